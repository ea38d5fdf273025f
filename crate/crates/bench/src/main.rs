use std::error::Error;
use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use stl2vec::diffgraph::{Graph, Tensor};
use stl2vec::embedding::{
    generate_dataset, read_dataset, read_embedding, train_skipgram, write_dataset, write_embedding,
};
use stl2vec::policy::{
    count_params, count_params_true, evaluate, read_checkpoint, sample_initial_states, write_checkpoint,
    write_training_log, Controller, Method, ParamDims,
};
use stl2vec::stl::{parse_with_dim, robustness, robustness_on_graph, Formula, RobustnessMode, Trajectory};
use stl2vec::trajopt::optimize;
use stl2vec_bench::catalog::{build_specs, Catalog};
use stl2vec_bench::config::{EncodingKind, ExperimentConfig};
use stl2vec_bench::pipeline::{
    check_resimulation, controller_files, controller_rollouts, dataset_paths, run_pipeline, spec_encoding, stamp,
    train_controller, write_losses, write_paths, write_samples, PathRecord,
};
use stl2vec_bench::report::report_similarities;

type Res<T> = Result<T, Box<dyn Error>>;

/// STL specification embeddings and specification-conditioned controllers.
#[derive(Parser)]
#[command(name = "stl2vec", version)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args)]
struct ConfigArg {
    /// Experiment config (JSON).
    #[arg(long, short)]
    config: PathBuf,
}

#[derive(Subcommand)]
enum Cmd {
    /// Parse a formula and print its syntax tree.
    Parse {
        formula: String,
        /// State dimension for signals `x1 .. xn`.
        #[arg(long)]
        dim: Option<usize>,
    },
    /// Robustness of a formula on a trajectory file (one state per line).
    Robustness {
        formula: String,
        #[arg(long)]
        trajectory: PathBuf,
        #[arg(long, default_value_t = 0)]
        time: usize,
        /// Use log-sum-exp extrema with this scale.
        #[arg(long)]
        smooth: Option<f64>,
    },
    /// Open-loop robustness maximization for one spec.
    Optimize {
        #[command(flatten)]
        config: ConfigArg,
        /// Spec index in the configured set.
        #[arg(long, conflicts_with = "formula")]
        spec: Option<usize>,
        #[arg(long)]
        formula: Option<String>,
        /// Initial state, comma separated; defaults to the center of the initial set.
        #[arg(long, value_delimiter = ',')]
        x0: Option<Vec<f64>>,
        /// Write the trajectory and inputs here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Generate the skip-gram dataset.
    GenDataset {
        #[command(flatten)]
        config: ConfigArg,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Train the embedding on a dataset file.
    TrainEmbed {
        #[command(flatten)]
        config: ConfigArg,
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Nearest specs by cosine similarity of their embeddings.
    Similar {
        #[command(flatten)]
        config: ConfigArg,
        #[arg(long)]
        embedding: PathBuf,
        #[arg(long, short, default_value_t = 4)]
        k: usize,
        /// Spec indices to query; all when omitted.
        #[arg(long = "query")]
        queries: Vec<usize>,
        /// Also write the table as CSV.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Train a controller with the given encoding.
    TrainController {
        #[command(flatten)]
        config: ConfigArg,
        #[arg(long)]
        encoding: EncodingKind,
        /// Embedding file, required for the stl2vec encoding.
        #[arg(long)]
        embedding: Option<PathBuf>,
        /// Output directory; defaults to the configured one.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Mean exact robustness of trained controllers on held-out initial states.
    Eval {
        #[command(flatten)]
        config: ConfigArg,
        /// One shared checkpoint, or one per spec in order for one-by-one controllers.
        #[arg(long = "checkpoint", required = true)]
        checkpoints: Vec<PathBuf>,
        #[arg(long)]
        embedding: Option<PathBuf>,
        /// Number of initial states; defaults to the configured count.
        #[arg(long)]
        samples: Option<usize>,
    },
    /// Parameter counts of the four methods.
    Params {
        #[arg(long, default_value_t = 194)]
        specs: u64,
        #[arg(long, default_value_t = 20)]
        embed: u64,
        #[arg(long, default_value_t = 3)]
        state: u64,
        #[arg(long, default_value_t = 2)]
        input: u64,
        #[arg(long, default_value_t = 32)]
        hidden: u64,
        #[arg(long, default_value_t = 2)]
        layers: u64,
        /// Also print actual trainable totals, recurrent weights and biases included.
        #[arg(long)]
        full: bool,
    },
    /// Run the whole experiment and write every artifact.
    Pipeline {
        #[command(flatten)]
        config: ConfigArg,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn load(c: &ConfigArg, out: Option<PathBuf>) -> Res<ExperimentConfig> {
    let mut cfg = ExperimentConfig::load(&c.config)?;
    if let Some(dir) = out {
        cfg.output_dir = dir;
    }
    Ok(cfg)
}

fn catalog(cfg: &ExperimentConfig) -> Res<Catalog> {
    Ok(build_specs(&cfg.regions, &cfg.specs)?)
}

fn create(path: &Path) -> Res<BufWriter<File>> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent)?;
    }
    Ok(BufWriter::new(File::create(path)?))
}

fn open(path: &Path) -> Res<BufReader<File>> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| format!("{}: {e}", path.display()).into())
}

fn load_embedding(path: &Path) -> Res<stl2vec::embedding::EmbeddingModel> {
    Ok(read_embedding(open(path)?)?)
}

/// States as rows of numbers separated by whitespace or commas.
fn read_states(text: &str) -> Res<Trajectory> {
    let rows = text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(|l| {
            l.split(|c: char| c == ',' || c.is_whitespace())
                .filter(|s| !s.is_empty())
                .map(|s| s.parse::<f64>().map_err(|_| format!("bad number {s:?}")))
                .collect::<Result<Vec<_>, _>>()
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(Trajectory::new(rows)?)
}

fn parse_formula(text: &str, dim: Option<usize>) -> Res<Formula> {
    Ok(match dim {
        Some(d) => parse_with_dim(text, d)?,
        None => stl2vec::stl::parse(text)?,
    })
}

fn run(cmd: Cmd) -> Res<()> {
    match cmd {
        Cmd::Parse { formula, dim } => {
            let f = parse_formula(&formula, dim)?;
            println!("{f}");
            println!("horizon {}", f.horizon());
            println!("{f:#?}");
        }
        Cmd::Robustness {
            formula,
            trajectory,
            time,
            smooth,
        } => {
            let traj = read_states(&fs::read_to_string(&trajectory)?)?;
            let f = parse_formula(&formula, Some(traj.dim()))?;
            let value = match smooth {
                None => robustness(&f, &traj, time)?,
                Some(beta) => {
                    let mut g = Graph::new();
                    let states: Vec<_> = traj
                        .states()
                        .iter()
                        .map(|x| g.leaf(Tensor::column(x.clone())))
                        .collect();
                    let r = robustness_on_graph(&mut g, &f, &states, time, RobustnessMode::smooth(beta)?)?;
                    g.value(r).item()
                }
            };
            println!("{value}");
        }
        Cmd::Optimize {
            config,
            spec,
            formula,
            x0,
            out,
        } => {
            let cfg = load(&config, None)?;
            let dyn_ = cfg.dynamics();
            let (f, index) = match (spec, formula) {
                (_, Some(text)) => (parse_formula(&text, Some(3))?, 0),
                (Some(i), None) => {
                    let cat = catalog(&cfg)?;
                    if i >= cat.set.len() {
                        return Err(format!("spec {i} out of range for {} specs", cat.set.len()).into());
                    }
                    println!("{}", cat.set.name(i));
                    (cat.set.spec(i).clone(), i)
                }
                (None, None) => return Err("give --spec or --formula".into()),
            };
            let sampler = cfg.regions.initial_box();
            let x0 = x0.unwrap_or_else(|| {
                let (lo, hi) = (sampler.lower(), sampler.upper());
                lo.iter().zip(hi).map(|(a, b)| (a + b) / 2.0).collect()
            });
            let r = optimize(&f, &x0, &dyn_, Some(&sampler), &cfg.opt_config())?;
            println!(
                "robustness {} (smooth {}), restart {}, iteration {}",
                r.robustness, r.smooth_robustness, r.restart, r.iterations
            );
            if let Some(path) = out {
                let rec = PathRecord {
                    spec: index,
                    sample: 0,
                    rho: r.robustness,
                    trajectory: r.trajectory,
                    inputs: r.controls,
                };
                write_paths(create(&path)?, &[rec], &stamp(&cfg))?;
            }
        }
        Cmd::GenDataset { config, out } => {
            let cfg = load(&config, None)?;
            let cat = catalog(&cfg)?;
            let dyn_ = cfg.dynamics();
            let ds = generate_dataset(&cat.set, &dyn_, &cfg.regions.initial_box(), &cfg.dataset_config())?;
            check_resimulation(&dyn_, &ds.samples, 1e-12)?;
            let path = out.unwrap_or_else(|| cfg.output_dir.join("dataset.tsv"));
            let tags = stamp(&cfg);
            write_dataset(create(&path)?, &ds.records, &tags)?;
            write_samples(create(&path.with_file_name("samples.tsv"))?, &ds.samples, &tags)?;
            write_paths(
                create(&path.with_file_name("dataset_trajectories.tsv"))?,
                &dataset_paths(&ds.samples),
                &tags,
            )?;
            let ok = ds.samples.iter().filter(|s| s.success).count();
            println!(
                "{} records, {ok}/{} optimizations satisfied their spec -> {}",
                ds.records.len(),
                ds.samples.len(),
                path.display()
            );
        }
        Cmd::TrainEmbed { config, dataset, out } => {
            let cfg = load(&config, None)?;
            let cat = catalog(&cfg)?;
            let records = read_dataset(open(&dataset)?)?;
            let t = train_skipgram(&records, cat.set.len(), &cfg.skipgram_config())?;
            let path = out.unwrap_or_else(|| cfg.output_dir.join("embedding.txt"));
            let tags = stamp(&cfg);
            write_embedding(create(&path)?, &t.model, &tags)?;
            write_losses(create(&path.with_file_name("skipgram_loss.csv"))?, &t.losses, &tags)?;
            println!(
                "loss {:.4} -> {:.4}, {} x {} -> {}",
                t.losses[0],
                t.losses.last().unwrap(),
                t.model.num_specs(),
                t.model.dim(),
                path.display()
            );
        }
        Cmd::Similar {
            config,
            embedding,
            k,
            queries,
            csv,
        } => {
            let cfg = load(&config, None)?;
            let cat = catalog(&cfg)?;
            let model = read_embedding(open(&embedding)?)?;
            let names = cat.set.names();
            let queries = if queries.is_empty() {
                (0..cat.set.len()).collect()
            } else {
                queries
            };
            let table = report_similarities(&model, names, &queries, k)?;
            print!("{}", table.to_text(names));
            if let Some(path) = csv {
                create(&path)?.write_all(table.to_csv(names, &stamp(&cfg)).as_bytes())?;
            }
        }
        Cmd::TrainController {
            config,
            encoding,
            embedding,
            out,
        } => {
            let cfg = load(&config, out)?;
            let cat = catalog(&cfg)?;
            let model = embedding.map(|p| load_embedding(&p)).transpose()?;
            let run = train_controller(&cfg, &cat, encoding, model.as_ref()).map_err(|e| e.to_string())?;
            let dir = &cfg.output_dir;
            fs::create_dir_all(dir)?;
            let tags = stamp(&cfg);
            let (ckpts, log_name, loss_name) = controller_files(encoding, cat.set.len());
            for (name, p) in ckpts.iter().zip(&run.policies) {
                write_checkpoint(create(&dir.join(name))?, p, run.encoding.kind(), &tags)?;
            }
            write_training_log(create(&dir.join(&log_name))?, &run.log, &tags)?;
            write_losses(create(&dir.join(&loss_name))?, &run.log.losses, &tags)?;
            let paths = controller_rollouts(&cfg, &cat, &run, cfg.controller.rollouts_per_spec)?;
            write_paths(create(&dir.join(format!("rollouts_{encoding}.tsv")))?, &paths, &tags)?;
            if let Some(last) = run.log.last() {
                println!(
                    "{encoding}: final mean robustness {:.4}, first positive epoch {:?}, {:.1}s",
                    last.mean,
                    run.log.first_positive_epoch(),
                    last.wall_seconds
                );
            }
            println!("wrote {}", dir.display());
        }
        Cmd::Eval {
            config,
            checkpoints,
            embedding,
            samples,
        } => {
            let cfg = load(&config, None)?;
            let cat = catalog(&cfg)?;
            let m = cat.set.len();
            let mut policies = Vec::new();
            let mut kinds = Vec::new();
            for path in &checkpoints {
                let (p, kind) = read_checkpoint(open(path)?)?;
                policies.push(p);
                kinds.push(kind);
            }
            let kind: EncodingKind = match kinds[0].as_str() {
                "none" => EncodingKind::OneByOne,
                other => other.parse()?,
            };
            if kinds.iter().any(|k| *k != kinds[0]) {
                return Err("checkpoints use different encodings".into());
            }
            let model = embedding.map(|p| load_embedding(&p)).transpose()?;
            let encoding = spec_encoding(kind, m, model.as_ref())?;
            let ctrl = if kind == EncodingKind::OneByOne {
                Controller::PerSpec(&policies)
            } else if policies.len() == 1 {
                Controller::Shared {
                    policy: &policies[0],
                    encoding: &encoding,
                }
            } else {
                return Err("a shared controller takes exactly one checkpoint".into());
            };
            let n = samples.unwrap_or(cfg.controller.eval_samples);
            let states = sample_initial_states(&cfg.regions.initial_box(), n, cfg.seed());
            let r = evaluate(ctrl, cat.set.specs(), &cfg.dynamics(), &states, cfg.system.horizon)?;
            for (i, v) in r.per_spec.iter().enumerate() {
                println!("{i}\t{v:.6}\t{}", cat.set.name(i));
            }
            let positive = r.per_spec.iter().filter(|v| **v > 0.0).count();
            println!("mean {:.6}, positive {positive}/{m}", r.mean);
        }
        Cmd::Params {
            specs,
            embed,
            state,
            input,
            hidden,
            layers,
            full,
        } => {
            if layers == 0 || hidden == 0 {
                return Err("hidden and layers must be positive".into());
            }
            let d = ParamDims {
                specs,
                embed,
                state,
                input,
                hidden,
                layers,
            };
            for method in Method::ALL {
                if full {
                    println!(
                        "{:<9}{:>10}{:>12}",
                        method.name(),
                        count_params(d, method),
                        count_params_true(d, method)
                    );
                } else {
                    println!("{:<9}{:>10}", method.name(), count_params(d, method));
                }
            }
        }
        Cmd::Pipeline { config, out } => {
            let cfg = load(&config, out)?;
            let result = run_pipeline(&cfg)?;
            println!(
                "config {} seed {}: {} files in {}",
                result.hash,
                cfg.seed(),
                result.files.len(),
                result.dir.display()
            );
            for run in &result.controllers {
                if let Some(last) = run.log.last() {
                    println!(
                        "  {:<11} final mean robustness {:>8.4}  first positive epoch {:?}",
                        run.kind.name(),
                        last.mean,
                        run.log.first_positive_epoch()
                    );
                }
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    if let Ok(v) = std::env::var("STL2VEC_THREADS") {
        match v.parse::<usize>() {
            Ok(n) if n > 0 => {
                if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
                    eprintln!("warning: cannot set thread count: {e}");
                }
            }
            _ => eprintln!("warning: ignoring STL2VEC_THREADS={v:?}; expected a positive integer"),
        }
    }
    match run(Cli::parse().cmd) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
