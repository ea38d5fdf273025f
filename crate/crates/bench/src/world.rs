//! Unicycle case-study world: dynamics, goal regions and the initial set.

use serde::{Deserialize, Serialize};
use stl2vec::diffgraph::{Graph, Var};
use stl2vec::dynamics::{check_bounds, DynamicsError, DynamicsModel, StateBox};
use stl2vec::stl::{rect_region, Formula, StlError};

/// `q_x += v sin(theta)`, `q_y += v cos(theta)`, `theta += omega`.
#[derive(Debug, Clone, PartialEq)]
pub struct Unicycle {
    lo: Vec<f64>,
    hi: Vec<f64>,
}

impl Unicycle {
    /// Bounds on `(v, omega)`.
    pub fn new(lo: [f64; 2], hi: [f64; 2]) -> Result<Self, DynamicsError> {
        check_bounds(&lo, &hi)?;
        Ok(Unicycle {
            lo: lo.to_vec(),
            hi: hi.to_vec(),
        })
    }
}

impl Default for Unicycle {
    fn default() -> Self {
        Unicycle::new([0.0, -0.5], [1.0, 0.5]).unwrap()
    }
}

impl DynamicsModel for Unicycle {
    fn state_dim(&self) -> usize {
        3
    }

    fn input_dim(&self) -> usize {
        2
    }

    fn input_lower(&self) -> &[f64] {
        &self.lo
    }

    fn input_upper(&self) -> &[f64] {
        &self.hi
    }

    fn step(&self, x: &[f64], u: &[f64]) -> Vec<f64> {
        let (v, w) = (u[0], u[1]);
        vec![x[0] + v * x[2].sin(), x[1] + v * x[2].cos(), x[2] + w]
    }

    fn step_graph(&self, g: &mut Graph, x: Var, u: Var) -> Var {
        let (qx, qy, th) = (g.element(x, 0), g.element(x, 1), g.element(x, 2));
        let (v, w) = (g.element(u, 0), g.element(u, 1));
        let s = g.sin(th);
        let c = g.cos(th);
        let dx = g.mul(v, s);
        let dy = g.mul(v, c);
        let nx = g.add(qx, dx);
        let ny = g.add(qy, dy);
        let nt = g.add(th, w);
        g.concat(&[nx, ny, nt]).expect("three scalars")
    }
}

/// Axis-aligned rectangle `[xlo, xhi] x [ylo, yhi]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    pub xlo: f64,
    pub xhi: f64,
    pub ylo: f64,
    pub yhi: f64,
}

impl Rect {
    pub fn new(xlo: f64, xhi: f64, ylo: f64, yhi: f64) -> Self {
        Rect { xlo, xhi, ylo, yhi }
    }

    pub fn center(&self) -> (f64, f64) {
        ((self.xlo + self.xhi) / 2.0, (self.ylo + self.yhi) / 2.0)
    }

    pub fn contains(&self, other: &Rect) -> bool {
        self.xlo <= other.xlo && other.xhi <= self.xhi && self.ylo <= other.ylo && other.yhi <= self.yhi
    }

    pub fn intersects(&self, other: &Rect) -> bool {
        self.xlo < other.xhi && other.xlo < self.xhi && self.ylo < other.yhi && other.ylo < self.yhi
    }

    /// Quadrant `j`: 1 lower-left, 2 lower-right, 3 upper-left, 4 upper-right.
    pub fn quadrant(&self, j: usize) -> Rect {
        let (cx, cy) = self.center();
        let (x, y) = match j {
            1 => ((self.xlo, cx), (self.ylo, cy)),
            2 => ((cx, self.xhi), (self.ylo, cy)),
            3 => ((self.xlo, cx), (cy, self.yhi)),
            4 => ((cx, self.xhi), (cy, self.yhi)),
            _ => panic!("quadrant index {j} out of 1..=4"),
        };
        Rect::new(x.0, x.1, y.0, y.1)
    }

    /// Membership formula over the first two coordinates of a 3-state.
    pub fn formula(&self) -> Result<Formula, StlError> {
        rect_region(self.xlo, self.xhi, self.ylo, self.yhi, 3)
    }
}

/// Goal regions `Reg 1..4` and the initial set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionMap {
    pub regions: Vec<Rect>,
    /// Initial positions.
    pub x0: Rect,
    /// Initial heading, fixed.
    pub theta0: f64,
}

impl Default for RegionMap {
    fn default() -> Self {
        RegionMap {
            regions: vec![
                Rect::new(3.0, 5.0, 7.0, 9.0),
                Rect::new(3.0, 5.0, 3.0, 5.0),
                Rect::new(7.0, 9.0, 3.0, 5.0),
                Rect::new(7.0, 9.0, 7.0, 9.0),
            ],
            x0: Rect::new(0.0, 0.7, 0.0, 0.7),
            theta0: 0.0,
        }
    }
}

impl RegionMap {
    pub fn num_regions(&self) -> usize {
        self.regions.len()
    }

    /// `Reg i`, 1-based.
    pub fn region(&self, i: usize) -> Rect {
        self.regions[i - 1]
    }

    /// `Reg(i, j)`, both 1-based.
    pub fn sub_region(&self, i: usize, j: usize) -> Rect {
        self.region(i).quadrant(j)
    }

    /// Sampler over `X_0 x {theta0}`.
    pub fn initial_box(&self) -> StateBox {
        StateBox::new(
            vec![self.x0.xlo, self.x0.ylo, self.theta0],
            vec![self.x0.xhi, self.x0.yhi, self.theta0],
        )
        .expect("initial box is well formed")
    }

    /// Euclidean distance from the center of `X_0` to the center of `Reg i`.
    pub fn distance_from_start(&self, i: usize) -> f64 {
        let (ax, ay) = self.x0.center();
        let (bx, by) = self.region(i).center();
        (ax - bx).hypot(ay - by)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use stl2vec::dynamics::simulate;
    use stl2vec::stl::{robustness, Trajectory};

    #[test]
    fn unicycle_steps() {
        let d = Unicycle::default();
        assert_eq!(d.step(&[0.0, 0.0, 0.0], &[1.0, 0.0]), vec![0.0, 1.0, 0.0]);
        let h = std::f64::consts::FRAC_PI_2;
        let x = d.step(&[0.0, 0.0, h], &[1.0, 0.0]);
        assert_eq!(x[0], 1.0);
        assert!(x[1].abs() < 1e-15);
        assert_eq!(d.step(&[0.0, 0.0, 0.0], &[0.0, 0.3]), vec![0.0, 0.0, 0.3]);
    }

    #[test]
    fn graph_step_matches() {
        let d = Unicycle::default();
        let x = [0.3, -1.2, 0.7];
        let u = [0.4, -0.2];
        let mut g = Graph::new();
        let xv = g.leaf(stl2vec::diffgraph::Tensor::column(x.to_vec()));
        let uv = g.leaf(stl2vec::diffgraph::Tensor::column(u.to_vec()));
        let out = d.step_graph(&mut g, xv, uv);
        assert_eq!(g.value(out).data(), &d.step(&x, &u)[..]);
    }

    #[test]
    fn sub_regions_tile_and_centers_have_half_margin() {
        let map = RegionMap::default();
        for i in 1..=4 {
            let r = map.region(i);
            let area: f64 = (1..=4)
                .map(|j| {
                    let q = map.sub_region(i, j);
                    assert!(r.contains(&q));
                    assert_eq!((q.xhi - q.xlo, q.yhi - q.ylo), (1.0, 1.0));
                    let (cx, cy) = q.center();
                    let traj = Trajectory::new(vec![vec![cx, cy, 0.0]]).unwrap();
                    assert_eq!(robustness(&q.formula().unwrap(), &traj, 0).unwrap(), 0.5);
                    1.0
                })
                .sum();
            assert_eq!(area, 4.0);
            assert!(!r.intersects(&map.x0));
        }
        assert_eq!(map.sub_region(1, 1), Rect::new(3.0, 4.0, 7.0, 8.0));
        assert_eq!(map.sub_region(3, 2), Rect::new(8.0, 9.0, 3.0, 4.0));
        assert_eq!(map.sub_region(2, 3), Rect::new(3.0, 4.0, 4.0, 5.0));
    }

    #[test]
    fn far_region_is_reachable_in_twenty_steps() {
        // Turn right by 0.5 once, then drive straight: covers the diagonal.
        let d = Unicycle::default();
        let mut u = vec![vec![1.0, 0.5]; 1];
        u[0][0] = 0.0;
        u.extend(std::iter::repeat_n(vec![1.0, 0.0], 19));
        let traj = simulate(&d, &[0.0, 0.0, 0.0], &u);
        let end = traj.state(20);
        assert!(end[0] > 8.0 && end[1] > 15.0);
        assert!(RegionMap::default().distance_from_start(2) < RegionMap::default().distance_from_start(4));
    }
}
