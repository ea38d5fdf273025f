//! End-to-end experiment: specs, dataset, embedding, controllers, reports.
//!
//! Every artifact carries the config hash and master seed, as `#` comment
//! lines in text files, XML comments in SVG and fields in JSON. Files are
//! written as soon as their stage finishes, so a failure leaves the earlier
//! artifacts in place.

use std::error::Error;
use std::fmt;
use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde_json::json;
use stl2vec::dynamics::{simulate, DynamicsModel};
use stl2vec::embedding::{
    generate_dataset, train_skipgram, write_dataset, write_embedding, Dataset, DatasetSample, EmbeddingModel,
    SkipGramTraining,
};
use stl2vec::policy::{
    sample_initial_states, train, train_one_by_one, write_checkpoint, write_training_log, Controller, LstmPolicy,
    PolicyError, SpecEncoding, TrainingLog,
};
use stl2vec::stl::{robustness, Trajectory};

use crate::catalog::{build_specs, Catalog};
use crate::config::{EncodingKind, ExperimentConfig};
use crate::plot::{line_chart, trajectory_map, Series};
use crate::report::report_similarities;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Config,
    Specs,
    Dataset,
    Embedding,
    Similarity,
    Controller(EncodingKind),
    Plots,
    Manifest,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Stage::Config => f.write_str("config"),
            Stage::Specs => f.write_str("specs"),
            Stage::Dataset => f.write_str("dataset"),
            Stage::Embedding => f.write_str("embedding"),
            Stage::Similarity => f.write_str("similarity"),
            Stage::Controller(k) => write!(f, "controller ({k})"),
            Stage::Plots => f.write_str("plots"),
            Stage::Manifest => f.write_str("manifest"),
        }
    }
}

#[derive(Debug)]
pub struct PipelineError {
    pub stage: Stage,
    pub source: Box<dyn Error + Send + Sync>,
}

impl fmt::Display for PipelineError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} stage failed: {}", self.stage, self.source)
    }
}

impl Error for PipelineError {
    fn source(&self) -> Option<&(dyn Error + 'static)> {
        Some(self.source.as_ref())
    }
}

trait AtStage<T> {
    fn at(self, stage: Stage) -> Result<T, PipelineError>;
}

impl<T, E: Into<Box<dyn Error + Send + Sync>>> AtStage<T> for Result<T, E> {
    fn at(self, stage: Stage) -> Result<T, PipelineError> {
        self.map_err(|e| PipelineError {
            stage,
            source: e.into(),
        })
    }
}

/// `config_hash <hex>` and `seed <n>` lines for artifact headers.
pub fn stamp(cfg: &ExperimentConfig) -> Vec<String> {
    vec![format!("config_hash {}", cfg.hash()), format!("seed {}", cfg.seed())]
}

/// A trained controller: one shared policy, or one per spec for
/// [`EncodingKind::OneByOne`].
#[derive(Debug, Clone)]
pub struct ControllerRun {
    pub kind: EncodingKind,
    pub encoding: SpecEncoding,
    pub policies: Vec<LstmPolicy>,
    pub log: TrainingLog,
}

impl ControllerRun {
    pub fn controller(&self) -> Controller<'_> {
        match self.kind {
            EncodingKind::OneByOne => Controller::PerSpec(&self.policies),
            _ => Controller::Shared {
                policy: &self.policies[0],
                encoding: &self.encoding,
            },
        }
    }
}

/// The encoding for `kind` over `m` specs. The learned one needs `model`.
pub fn spec_encoding(kind: EncodingKind, m: usize, model: Option<&EmbeddingModel>) -> Result<SpecEncoding, String> {
    Ok(match kind {
        EncodingKind::Stl2vec => {
            let model = model.ok_or("the stl2vec encoding needs a trained embedding")?;
            if model.num_specs() != m {
                return Err(format!(
                    "embedding has {} rows, the spec set has {m}",
                    model.num_specs()
                ));
            }
            SpecEncoding::Stl2vec(model.clone())
        }
        EncodingKind::Integer => SpecEncoding::Integer { specs: m },
        EncodingKind::OneHot => SpecEncoding::OneHot { specs: m },
        EncodingKind::OneByOne => SpecEncoding::None,
    })
}

pub fn train_controller(
    cfg: &ExperimentConfig,
    catalog: &Catalog,
    kind: EncodingKind,
    model: Option<&EmbeddingModel>,
) -> Result<ControllerRun, Box<dyn Error + Send + Sync>> {
    let encoding = spec_encoding(kind, catalog.set.len(), model)?;
    let dyn_ = cfg.dynamics();
    let sampler = cfg.regions.initial_box();
    let tc = cfg.train_config();
    let specs = catalog.set.specs();
    let (policies, log) = if kind == EncodingKind::OneByOne {
        let t = train_one_by_one(specs, &dyn_, &sampler, &tc)?;
        (t.policies, t.log)
    } else {
        let t = train(specs, &encoding, &dyn_, &sampler, &tc)?;
        (vec![t.policy], t.log)
    };
    Ok(ControllerRun {
        kind,
        encoding,
        policies,
        log,
    })
}

/// One closed-loop or optimized path with its robustness under its spec.
#[derive(Debug, Clone, PartialEq)]
pub struct PathRecord {
    pub spec: usize,
    pub sample: usize,
    pub rho: f64,
    pub trajectory: Trajectory,
    pub inputs: Vec<Vec<f64>>,
}

/// Rollouts of `run` for every spec from the first `n` evaluation states.
pub fn controller_rollouts(
    cfg: &ExperimentConfig,
    catalog: &Catalog,
    run: &ControllerRun,
    n: usize,
) -> Result<Vec<PathRecord>, PolicyError> {
    let dyn_ = cfg.dynamics();
    let sampler = cfg.regions.initial_box();
    let states = sample_initial_states(&sampler, cfg.controller.eval_samples, cfg.seed());
    let ctrl = run.controller();
    let mut out = Vec::new();
    for (i, f) in catalog.set.specs().iter().enumerate() {
        let (policy, z) = ctrl.for_spec(i);
        for (k, x0) in states.iter().take(n).enumerate() {
            let (trajectory, inputs) = policy.rollout(&dyn_, x0, &z, cfg.system.horizon)?;
            out.push(PathRecord {
                spec: i,
                sample: k,
                rho: robustness(f, &trajectory, 0)?,
                trajectory,
                inputs,
            });
        }
    }
    Ok(out)
}

pub fn dataset_paths(samples: &[DatasetSample]) -> Vec<PathRecord> {
    samples
        .iter()
        .map(|s| PathRecord {
            spec: s.center,
            sample: s.iteration,
            rho: s.rho[s.center],
            trajectory: s.trajectory.clone(),
            inputs: s.controls.clone(),
        })
        .collect()
}

/// Re-simulates every sample from its first state and controls.
pub fn check_resimulation<D: DynamicsModel + ?Sized>(
    dyn_: &D,
    samples: &[DatasetSample],
    tol: f64,
) -> Result<(), String> {
    for s in samples {
        let again = simulate(dyn_, s.trajectory.state(0), &s.controls);
        let worst = again
            .states()
            .iter()
            .zip(s.trajectory.states())
            .flat_map(|(a, b)| a.iter().zip(b).map(|(x, y)| (x - y).abs()))
            .fold(0.0, f64::max);
        if again.len() != s.trajectory.len() || !(worst <= tol) {
            return Err(format!(
                "spec {} iteration {}: trajectory deviates from re-simulation by {worst:e}",
                s.center, s.iteration
            ));
        }
    }
    Ok(())
}

fn comment_lines<W: Write>(out: &mut W, comments: &[String]) -> io::Result<()> {
    for c in comments {
        writeln!(out, "# {c}")?;
    }
    Ok(())
}

fn joined(xs: &[f64]) -> String {
    xs.iter().map(f64::to_string).collect::<Vec<_>>().join(",")
}

/// `index, template, parts, horizon, name, formula` per spec.
pub fn write_specs<W: Write>(mut out: W, catalog: &Catalog, comments: &[String]) -> io::Result<()> {
    comment_lines(&mut out, comments)?;
    writeln!(out, "index\ttemplate\tparts\thorizon\tname\tformula")?;
    for (i, info) in catalog.info.iter().enumerate() {
        let parts: Vec<String> = info.parts.iter().map(|(a, b)| format!("{a}.{b}")).collect();
        let f = catalog.set.spec(i);
        writeln!(
            out,
            "{i}\t{}\t{}\t{}\t{}\t{f}",
            info.template.letter(),
            parts.join(","),
            f.horizon(),
            catalog.set.name(i)
        )?;
    }
    Ok(())
}

/// `center, iteration, success, x0, rho` with the last two comma-joined;
/// `rho` holds the robustness of the optimum under every spec.
pub fn write_samples<W: Write>(mut out: W, samples: &[DatasetSample], comments: &[String]) -> io::Result<()> {
    comment_lines(&mut out, comments)?;
    writeln!(out, "center\titeration\tsuccess\tx0\trho")?;
    for s in samples {
        writeln!(
            out,
            "{}\t{}\t{}\t{}\t{}",
            s.center,
            s.iteration,
            s.success,
            joined(&s.x0),
            joined(&s.rho)
        )?;
    }
    Ok(())
}

/// Long format: one row per time step. Inputs are empty on the final step.
pub fn write_paths<W: Write>(mut out: W, paths: &[PathRecord], comments: &[String]) -> io::Result<()> {
    comment_lines(&mut out, comments)?;
    let n = paths.first().map_or(0, |p| p.trajectory.dim());
    let m = paths.first().and_then(|p| p.inputs.first()).map_or(0, Vec::len);
    let mut header = vec!["spec".to_string(), "sample".into(), "rho".into(), "t".into()];
    header.extend((0..n).map(|k| format!("x{k}")));
    header.extend((0..m).map(|k| format!("u{k}")));
    writeln!(out, "{}", header.join("\t"))?;
    for p in paths {
        for (t, x) in p.trajectory.states().iter().enumerate() {
            let mut row = vec![
                p.spec.to_string(),
                p.sample.to_string(),
                p.rho.to_string(),
                t.to_string(),
            ];
            row.extend(x.iter().map(f64::to_string));
            match p.inputs.get(t) {
                Some(u) => row.extend(u.iter().map(f64::to_string)),
                None => row.extend((0..m).map(|_| String::new())),
            }
            writeln!(out, "{}", row.join("\t"))?;
        }
    }
    Ok(())
}

/// Reads [`write_paths`] output back into `(spec, sample, rho, states)`.
pub fn read_paths(text: &str) -> Result<Vec<(usize, usize, f64, Trajectory)>, String> {
    let mut lines = text.lines().filter(|l| !l.starts_with('#') && !l.trim().is_empty());
    let header: Vec<&str> = lines.next().ok_or("empty path file")?.split('\t').collect();
    let n = header.iter().filter(|h| h.starts_with('x')).count();
    let mut out: Vec<(usize, usize, f64, Vec<Vec<f64>>)> = Vec::new();
    for line in lines {
        let cols: Vec<&str> = line.split('\t').collect();
        if cols.len() != header.len() {
            return Err(format!("row has {} columns, header has {}", cols.len(), header.len()));
        }
        let num = |s: &str| s.parse::<f64>().map_err(|_| format!("bad number {s:?}"));
        let idx = |s: &str| s.parse::<usize>().map_err(|_| format!("bad index {s:?}"));
        let (spec, sample, rho, t) = (idx(cols[0])?, idx(cols[1])?, num(cols[2])?, idx(cols[3])?);
        let x = cols[4..4 + n].iter().map(|s| num(s)).collect::<Result<Vec<_>, _>>()?;
        for u in &cols[4 + n..] {
            if !u.is_empty() {
                num(u)?;
            }
        }
        if t == 0 {
            out.push((spec, sample, rho, vec![x]));
        } else {
            match out.last_mut() {
                Some(p) if p.0 == spec && p.1 == sample && p.3.len() == t => p.3.push(x),
                _ => return Err(format!("out-of-order time step {t} for spec {spec}")),
            }
        }
    }
    out.into_iter()
        .map(|(a, b, r, xs)| Ok((a, b, r, Trajectory::new(xs).map_err(|e| e.to_string())?)))
        .collect()
}

/// `epoch,loss` CSV.
pub fn write_losses<W: Write>(mut out: W, losses: &[f64], comments: &[String]) -> io::Result<()> {
    comment_lines(&mut out, comments)?;
    writeln!(out, "epoch,loss")?;
    for (e, l) in losses.iter().enumerate() {
        writeln!(out, "{e},{l}")?;
    }
    Ok(())
}

/// Files of one controller run: checkpoint name(s), log and loss CSVs.
pub fn controller_files(kind: EncodingKind, m: usize) -> (Vec<String>, String, String) {
    let checkpoints = if kind == EncodingKind::OneByOne {
        (0..m).map(|i| format!("controller_{kind}_{i:03}.txt")).collect()
    } else {
        vec![format!("controller_{kind}.txt")]
    };
    (checkpoints, format!("training_{kind}.csv"), format!("loss_{kind}.csv"))
}

/// Everything the pipeline produced, kept in memory for callers.
#[derive(Debug)]
pub struct PipelineOutput {
    pub dir: PathBuf,
    pub hash: String,
    pub files: Vec<String>,
    pub catalog: Catalog,
    pub dataset: Dataset,
    pub embedding: SkipGramTraining,
    pub controllers: Vec<ControllerRun>,
}

struct Writer<'a> {
    dir: &'a Path,
    files: Vec<String>,
}

impl Writer<'_> {
    fn put(&mut self, name: &str, f: impl FnOnce(&mut BufWriter<File>) -> io::Result<()>) -> io::Result<()> {
        let mut w = BufWriter::new(File::create(self.dir.join(name))?);
        f(&mut w)?;
        w.flush()?;
        self.files.push(name.to_string());
        Ok(())
    }

    fn text(&mut self, name: &str, body: &str) -> io::Result<()> {
        self.put(name, |w| w.write_all(body.as_bytes()))
    }
}

fn planar(paths: &[PathRecord], names: &[String]) -> Vec<Series> {
    paths
        .iter()
        .map(|p| Series {
            label: names[p.spec].clone(),
            points: p.trajectory.states().iter().map(|x| (x[0], x[1])).collect(),
        })
        .collect()
}

pub fn run_pipeline(cfg: &ExperimentConfig) -> Result<PipelineOutput, PipelineError> {
    cfg.validate().at(Stage::Config)?;
    let dir = cfg.output_dir.clone();
    fs::create_dir_all(&dir).at(Stage::Config)?;
    let hash = cfg.hash();
    let seed = cfg.seed();
    let tags = stamp(cfg);
    let mut out = Writer {
        dir: &dir,
        files: Vec::new(),
    };
    let mut timings = Vec::new();
    let config_json = json!({ "config_hash": hash, "seed": seed, "config": cfg });
    out.text(
        "config.json",
        &(serde_json::to_string_pretty(&config_json).unwrap() + "\n"),
    )
    .at(Stage::Config)?;

    let clock = Instant::now();
    let catalog = build_specs(&cfg.regions, &cfg.specs).at(Stage::Specs)?;
    out.put("specs.tsv", |w| write_specs(w, &catalog, &tags))
        .at(Stage::Specs)?;
    let names = catalog.set.names().to_vec();
    log::info!("{} specs", catalog.set.len());

    let clock_ds = Instant::now();
    let dyn_ = cfg.dynamics();
    let sampler = cfg.regions.initial_box();
    let dataset = generate_dataset(&catalog.set, &dyn_, &sampler, &cfg.dataset_config()).at(Stage::Dataset)?;
    check_resimulation(&dyn_, &dataset.samples, 1e-12).at(Stage::Dataset)?;
    out.put("dataset.tsv", |w| write_dataset(w, &dataset.records, &tags))
        .at(Stage::Dataset)?;
    out.put("samples.tsv", |w| write_samples(w, &dataset.samples, &tags))
        .at(Stage::Dataset)?;
    let opt_paths = dataset_paths(&dataset.samples);
    out.put("dataset_trajectories.tsv", |w| write_paths(w, &opt_paths, &tags))
        .at(Stage::Dataset)?;
    timings.push(("dataset", clock_ds.elapsed().as_secs_f64()));
    log::info!(
        "dataset: {} records from {} optimizations",
        dataset.records.len(),
        dataset.samples.len()
    );

    let clock_emb = Instant::now();
    let embedding = train_skipgram(&dataset.records, catalog.set.len(), &cfg.skipgram_config()).at(Stage::Embedding)?;
    out.put("embedding.txt", |w| write_embedding(w, &embedding.model, &tags))
        .at(Stage::Embedding)?;
    out.put("skipgram_loss.csv", |w| write_losses(w, &embedding.losses, &tags))
        .at(Stage::Embedding)?;
    timings.push(("embedding", clock_emb.elapsed().as_secs_f64()));

    let queries: Vec<usize> = cfg
        .embedding
        .queries
        .clone()
        .unwrap_or_else(|| (0..catalog.set.len()).collect());
    let k = cfg.embedding.neighbors.min(catalog.set.len() - 1);
    let table = report_similarities(&embedding.model, &names, &queries, k).at(Stage::Similarity)?;
    out.text("similarity.csv", &table.to_csv(&names, &tags))
        .at(Stage::Similarity)?;
    let mut txt: String = tags.iter().map(|c| format!("# {c}\n")).collect();
    txt.push_str(&table.to_text(&names));
    out.text("similarity.txt", &txt).at(Stage::Similarity)?;

    let mut controllers = Vec::new();
    for &kind in &cfg.controller.encodings {
        let stage = Stage::Controller(kind);
        let clock_c = Instant::now();
        let run = train_controller(cfg, &catalog, kind, Some(&embedding.model)).at(stage)?;
        let (ckpts, log_name, loss_name) = controller_files(kind, catalog.set.len());
        for (name, p) in ckpts.iter().zip(&run.policies) {
            out.put(name, |w| write_checkpoint(w, p, run.encoding.kind(), &tags))
                .at(stage)?;
        }
        out.put(&log_name, |w| write_training_log(w, &run.log, &tags))
            .at(stage)?;
        out.put(&loss_name, |w| write_losses(w, &run.log.losses, &tags))
            .at(stage)?;
        let paths = controller_rollouts(cfg, &catalog, &run, cfg.controller.rollouts_per_spec).at(stage)?;
        out.put(&format!("rollouts_{kind}.tsv"), |w| write_paths(w, &paths, &tags))
            .at(stage)?;
        timings.push((kind.name(), clock_c.elapsed().as_secs_f64()));
        if let Some(last) = run.log.last() {
            log::info!("{kind}: final mean robustness {:.4}", last.mean);
        }
        controllers.push((run, paths));
    }

    let curves: Vec<Series> = controllers
        .iter()
        .map(|(run, _)| Series {
            label: run.kind.name().to_string(),
            points: run.log.evals.iter().map(|r| (r.epoch as f64, r.mean)).collect(),
        })
        .collect();
    let plots = [
        (
            "training_curves.svg".to_string(),
            line_chart(
                "Mean robustness on held-out initial states",
                "epoch",
                "mean robustness",
                &curves,
                &tags,
            ),
        ),
        (
            "skipgram_loss.svg".to_string(),
            line_chart(
                "Skip-gram loss",
                "epoch",
                "mean cross-entropy",
                &[Series {
                    label: "loss".into(),
                    points: embedding
                        .losses
                        .iter()
                        .enumerate()
                        .map(|(e, l)| (e as f64, *l))
                        .collect(),
                }],
                &tags,
            ),
        ),
        (
            "dataset_trajectories.svg".to_string(),
            trajectory_map(
                "Optimized trajectories",
                &cfg.regions,
                &planar(&opt_paths, &names),
                &tags,
            ),
        ),
    ];
    for (name, svg) in plots.iter() {
        out.text(name, svg).at(Stage::Plots)?;
    }
    for (run, paths) in &controllers {
        let first: Vec<PathRecord> = paths.iter().filter(|p| p.sample == 0).cloned().collect();
        let svg = trajectory_map(
            &format!("Closed-loop rollouts ({})", run.kind),
            &cfg.regions,
            &planar(&first, &names),
            &tags,
        );
        out.text(&format!("rollouts_{}.svg", run.kind), &svg).at(Stage::Plots)?;
    }

    timings.push(("total", clock.elapsed().as_secs_f64()));
    let summary: Vec<_> = controllers
        .iter()
        .map(|(run, _)| {
            json!({
                "encoding": run.kind.name(),
                "final_mean_robustness": run.log.last().map(|r| r.mean),
                "first_positive_epoch": run.log.first_positive_epoch(),
                "wall_seconds": run.log.last().map(|r| r.wall_seconds),
            })
        })
        .collect();
    let mut files = out.files.clone();
    files.push("manifest.json".into());
    let manifest = json!({
        "config_hash": hash,
        "seed": seed,
        "specs": catalog.set.len(),
        "records": dataset.records.len(),
        "successful_optimizations": dataset.samples.iter().filter(|s| s.success).count(),
        "optimizations": dataset.samples.len(),
        "controllers": summary,
        "stage_seconds": timings.iter().map(|(k, v)| json!({"stage": k, "seconds": v})).collect::<Vec<_>>(),
        "files": files,
    });
    out.text(
        "manifest.json",
        &(serde_json::to_string_pretty(&manifest).unwrap() + "\n"),
    )
    .at(Stage::Manifest)?;

    Ok(PipelineOutput {
        dir: dir.clone(),
        hash,
        files: out.files,
        catalog,
        dataset,
        embedding,
        controllers: controllers.into_iter().map(|(r, _)| r).collect(),
    })
}
