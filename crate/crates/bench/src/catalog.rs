//! Candidate specification templates over the region map.
//!
//! | template | formula |
//! |---|---|
//! | a | `F[0,20] Reg(i,j)` |
//! | b | `F[0,20] Reg(i1,j1) or F[0,20] Reg(i2,j2)`, `i1 > i2` |
//! | c | `F[0,10] Reg(i1,j1) and F[11,20] Reg(i3,j2)`, `i3 != 1`, `i1 != i3` |
//! | d | `F[0,15] G[0,5] Reg(i,j)` |
//! | e | `F[0,15] G[0,5] Reg(i1,j1) or F[0,15] G[0,5] Reg(i2,j2)`, `i1 > i2` |
//! | f | `F[0,20] Reg(4,4) and (not Reg(4,4) U[0,20] Reg(2,3))` |
//!
//! Specs are ordered by template, then lexicographically by the indices in
//! the order they appear in the formula.

use serde::{Deserialize, Serialize};
use stl2vec::embedding::{EmbeddingError, SpecSet};
use stl2vec::stl::{Formula, Interval, StlError};

use crate::world::RegionMap;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Template {
    A,
    B,
    C,
    D,
    E,
    F,
}

impl Template {
    pub const ALL: [Template; 6] = [
        Template::A,
        Template::B,
        Template::C,
        Template::D,
        Template::E,
        Template::F,
    ];

    pub fn letter(self) -> char {
        match self {
            Template::A => 'a',
            Template::B => 'b',
            Template::C => 'c',
            Template::D => 'd',
            Template::E => 'e',
            Template::F => 'f',
        }
    }

    pub fn from_letter(c: char) -> Option<Template> {
        Template::ALL.into_iter().find(|t| t.letter() == c.to_ascii_lowercase())
    }
}

/// Which candidate specs to enumerate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "set", rename_all = "snake_case")]
pub enum SpecSelection {
    /// All six templates: 369 specs.
    Full,
    /// (a), (b), (c) with `(i1, i3)` in `{(1,3),(2,1),(2,3),(2,4),(4,3)}`,
    /// (f), and `F[0,15]G[0,5] Reg(1,1) or F[0,15]G[0,5] Reg(3,2)`: 194 specs.
    Training,
    /// Templates filtered by region and sub-region constraints.
    Custom {
        templates: Vec<Template>,
        /// Only use these regions (all region indices of a spec must be in the list).
        #[serde(default)]
        regions: Option<Vec<usize>>,
        /// Two-region templates only pair equal sub-region indices.
        #[serde(default)]
        same_subregion: bool,
        /// Use exactly these `(i1, i3)` pairs for template (c), in place of
        /// the default `i3 != 1, i1 != i3` rule.
        #[serde(default)]
        c_pairs: Option<Vec<(usize, usize)>>,
    },
    /// Explicit instances, emitted in template then index order.
    List { specs: Vec<SpecInfo> },
}

/// Origin of one generated spec.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct SpecInfo {
    pub template: Template,
    /// `(region, sub-region)` pairs in formula order.
    pub parts: Vec<(usize, usize)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Catalog {
    pub set: SpecSet,
    pub info: Vec<SpecInfo>,
}

const TRAINING_C_PAIRS: [(usize, usize); 5] = [(1, 3), (2, 1), (2, 3), (2, 4), (4, 3)];

fn reg(i: usize, j: usize) -> String {
    format!("Reg({i},{j})")
}

fn ev(a: usize, b: usize, f: Formula) -> Formula {
    Formula::eventually(Interval::new(a, b).expect("static interval"), f)
}

fn alw(a: usize, b: usize, f: Formula) -> Formula {
    Formula::always(Interval::new(a, b).expect("static interval"), f)
}

struct Builder<'a> {
    map: &'a RegionMap,
    specs: Vec<Formula>,
    names: Vec<String>,
    info: Vec<SpecInfo>,
}

impl Builder<'_> {
    fn region(&self, i: usize, j: usize) -> Result<Formula, StlError> {
        self.map.sub_region(i, j).formula()
    }

    fn push(&mut self, template: Template, parts: Vec<(usize, usize)>) -> Result<(), StlError> {
        let (f, name) = match (template, parts.as_slice()) {
            (Template::A, &[(i, j)]) => (ev(0, 20, self.region(i, j)?), format!("F[0,20] {}", reg(i, j))),
            (Template::B, &[(i1, j1), (i2, j2)]) => (
                Formula::or(ev(0, 20, self.region(i1, j1)?), ev(0, 20, self.region(i2, j2)?)),
                format!("F[0,20] {} or F[0,20] {}", reg(i1, j1), reg(i2, j2)),
            ),
            (Template::C, &[(i1, j1), (i3, j2)]) => (
                Formula::and(ev(0, 10, self.region(i1, j1)?), ev(11, 20, self.region(i3, j2)?)),
                format!("F[0,10] {} and F[11,20] {}", reg(i1, j1), reg(i3, j2)),
            ),
            (Template::D, &[(i, j)]) => (
                ev(0, 15, alw(0, 5, self.region(i, j)?)),
                format!("F[0,15] G[0,5] {}", reg(i, j)),
            ),
            (Template::E, &[(i1, j1), (i2, j2)]) => (
                Formula::or(
                    ev(0, 15, alw(0, 5, self.region(i1, j1)?)),
                    ev(0, 15, alw(0, 5, self.region(i2, j2)?)),
                ),
                format!("F[0,15] G[0,5] {} or F[0,15] G[0,5] {}", reg(i1, j1), reg(i2, j2)),
            ),
            (Template::F, _) => {
                let goal = self.region(4, 4)?;
                let until = Formula::until(
                    Interval::new(0, 20).expect("static interval"),
                    Formula::not(goal.clone()),
                    self.region(2, 3)?,
                );
                (
                    Formula::and(ev(0, 20, goal), until),
                    format!("F[0,20] {} and (not {} U[0,20] {})", reg(4, 4), reg(4, 4), reg(2, 3)),
                )
            }
            _ => unreachable!("template arity"),
        };
        self.specs.push(f);
        self.names.push(name);
        self.info.push(SpecInfo { template, parts });
        Ok(())
    }
}

#[derive(Debug, Clone, Copy)]
struct Filter<'a> {
    regions: Option<&'a [usize]>,
    same_subregion: bool,
    c_pairs: Option<&'a [(usize, usize)]>,
}

impl Filter<'_> {
    fn region_ok(&self, i: usize) -> bool {
        self.regions.is_none_or(|r| r.contains(&i))
    }
}

fn enumerate(b: &mut Builder<'_>, t: Template, flt: Filter<'_>) -> Result<(), StlError> {
    let nr = b.map.num_regions();
    let regions: Vec<usize> = (1..=nr).filter(|&i| flt.region_ok(i)).collect();
    let subs = 1..=4usize;
    match t {
        Template::A | Template::D => {
            for &i in &regions {
                for j in subs.clone() {
                    b.push(t, vec![(i, j)])?;
                }
            }
        }
        Template::B | Template::E | Template::C => {
            for &i1 in &regions {
                for j1 in subs.clone() {
                    for &i2 in &regions {
                        let ok = match t {
                            // An explicit pair list overrides `i3 != 1`; the training
                            // subset lists (2, 1).
                            Template::C => match flt.c_pairs {
                                Some(p) => p.contains(&(i1, i2)),
                                None => i2 != 1 && i1 != i2,
                            },
                            _ => i1 > i2,
                        };
                        if !ok {
                            continue;
                        }
                        for j2 in subs.clone() {
                            if flt.same_subregion && j1 != j2 {
                                continue;
                            }
                            b.push(t, vec![(i1, j1), (i2, j2)])?;
                        }
                    }
                }
            }
        }
        Template::F => {
            if flt.region_ok(4) && flt.region_ok(2) {
                b.push(t, vec![(4, 4), (2, 3)])?;
            }
        }
    }
    Ok(())
}

/// Enumerates the selected candidate specifications.
/// Fails when fewer than two specs are selected.
pub fn build_specs(map: &RegionMap, selection: &SpecSelection) -> Result<Catalog, EmbeddingError> {
    let mut b = Builder {
        map,
        specs: Vec::new(),
        names: Vec::new(),
        info: Vec::new(),
    };
    let all = Filter {
        regions: None,
        same_subregion: false,
        c_pairs: None,
    };
    match selection {
        SpecSelection::Full => {
            for t in Template::ALL {
                enumerate(&mut b, t, all)?;
            }
        }
        SpecSelection::Training => {
            enumerate(&mut b, Template::A, all)?;
            enumerate(&mut b, Template::B, all)?;
            let c = Filter {
                c_pairs: Some(&TRAINING_C_PAIRS),
                ..all
            };
            enumerate(&mut b, Template::C, c)?;
            b.push(Template::E, vec![(1, 1), (3, 2)])?;
            enumerate(&mut b, Template::F, all)?;
        }
        SpecSelection::Custom {
            templates,
            regions,
            same_subregion,
            c_pairs,
        } => {
            let flt = Filter {
                regions: regions.as_deref(),
                same_subregion: *same_subregion,
                c_pairs: c_pairs.as_deref(),
            };
            let mut ts = templates.clone();
            ts.sort();
            ts.dedup();
            for t in ts {
                enumerate(&mut b, t, flt)?;
            }
        }
        SpecSelection::List { specs } => {
            let mut sorted = specs.clone();
            sorted.sort();
            sorted.dedup();
            for s in sorted {
                let arity = match s.template {
                    Template::A | Template::D => 1,
                    _ => 2,
                };
                let in_range = s
                    .parts
                    .iter()
                    .all(|&(i, j)| (1..=map.num_regions()).contains(&i) && (1..=4).contains(&j));
                if s.parts.len() != arity || !in_range {
                    return Err(EmbeddingError::IndexOutOfRange {
                        index: s.parts.len(),
                        len: arity,
                    });
                }
                b.push(s.template, s.parts)?;
            }
        }
    }
    let set = SpecSet::new(b.specs, b.names)?;
    Ok(Catalog { set, info: b.info })
}
