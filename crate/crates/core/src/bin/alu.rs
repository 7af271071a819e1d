use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand};

use alu_core::attack::run_attack;
use alu_core::bounds::DataPartition;
use alu_core::io;
use alu_core::pngd::{sample_distribution, Pipeline};
use alu_core::renyi::{estimate_renyi_sets, Objective};
use alu_core::workbench::{
    attack_sets, bound_sweep, compute_bounds, emit_divergence_curve, emit_fig3_curve,
    posteriors_csv, run_experiment, run_sweep, sweep_csv, ExperimentConfig, NoiseCurveConfig,
};

/// Asymmetric Langevin unlearning workbench.
#[derive(Parser)]
#[command(name = "alu", version)]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Global {
    /// Experiment config (TOML with dotted keys, or JSON).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the config's top-level seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Worker threads; defaults to the number of cores.
    #[arg(long, global = true)]
    workers: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Write every analytic bound to bounds.json, plus bounds_sweep.csv over `sweep.n_pub`.
    Bounds,
    /// Draw model samples from one pipeline, or all three.
    Sample {
        #[arg(long, default_value = "all")]
        pipeline: String,
    },
    /// Estimate D_alpha(P || Q) between two sample files.
    Estimate {
        #[arg(long)]
        p: PathBuf,
        #[arg(long)]
        q: PathBuf,
        /// Overrides `estimator.objective`.
        #[arg(long)]
        objective: Option<Objective>,
        /// Overrides `train.alpha`.
        #[arg(long)]
        alpha: Option<f64>,
    },
    /// Membership attack on one forget example.
    Attack,
    /// Full pipeline; sweeps `sweep.n_pub` when it is set.
    Experiment,
    /// Required noise against forget fraction; `--config` takes a noise-curve TOML.
    Fig3,
    /// Estimated divergence over the `sweep.n_pub` x `sweep.k` grid.
    DivergenceCurve,
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Bounds => "bounds",
            Command::Sample { .. } => "sample",
            Command::Estimate { .. } => "estimate",
            Command::Attack => "attack",
            Command::Experiment => "experiment",
            Command::Fig3 => "fig3",
            Command::DivergenceCurve => "divergence-curve",
        }
    }
}

fn load_config(g: &Global) -> anyhow::Result<ExperimentConfig> {
    let path = g
        .config
        .as_deref()
        .ok_or_else(|| anyhow!("--config is required"))?;
    let mut cfg = ExperimentConfig::load(path)?;
    if let Some(seed) = g.seed {
        cfg.seed = seed;
    }
    cfg.validate().context("stage `config` failed")?;
    Ok(cfg)
}

fn write(out: &Path, name: &str, text: &str) -> anyhow::Result<()> {
    let path = out.join(name);
    io::write_bytes(&path, text.as_bytes())?;
    println!("{}", path.display());
    Ok(())
}

fn run(cli: &Cli) -> anyhow::Result<()> {
    let g = &cli.global;
    match &cli.command {
        Command::Bounds => {
            let cfg = load_config(g)?;
            let (dataset, _) = cfg.load_data()?;
            let report = compute_bounds(
                &DataPartition::of(&dataset),
                &cfg.train.profile()?,
                &cfg.train.hyper()?,
                &cfg.train,
                &cfg.bounds,
                None,
            )?;
            write(&g.out, "bounds.json", &io::to_json_string(&report)?)?;
            if !cfg.sweep.n_pub.is_empty() {
                write(&g.out, "bounds_sweep.csv", &sweep_csv(&bound_sweep(&cfg)?))?;
            }
        }
        Command::Sample { pipeline } => {
            let cfg = load_config(g)?;
            let pipelines = match pipeline.as_str() {
                "all" => vec![Pipeline::Learn, Pipeline::Unlearn, Pipeline::Retrain],
                p => vec![p.parse()?],
            };
            let (dataset, _) = cfg.load_data()?;
            let (profile, hp) = (cfg.train.profile()?, cfg.train.hyper()?);
            for p in pipelines {
                let seed = alu_core::noise::derive_seed(cfg.seed, &p.to_string());
                let set = sample_distribution(&dataset, p, cfg.samples, &hp, &profile, seed)?;
                let path = g.out.join(format!("{p}.csv"));
                io::write_samples(&set, &path)?;
                println!("{}", path.display());
            }
        }
        Command::Estimate {
            p,
            q,
            objective,
            alpha,
        } => {
            let (mut section, default_alpha) = match &g.config {
                Some(_) => {
                    let cfg = load_config(g)?;
                    (cfg.estimator, cfg.train.alpha)
                }
                None => (Default::default(), 2.0),
            };
            if let Some(o) = objective {
                section.objective = *o;
            }
            let (p, q) = (io::read_samples(p)?, io::read_samples(q)?);
            let cfg = section.config(alpha.unwrap_or(default_alpha));
            let est = estimate_renyi_sets(&p, &q, &section.spec(p.dim()), &cfg)?;
            write(&g.out, "estimate.json", &io::to_json_string(&est)?)?;
        }
        Command::Attack => {
            let cfg = load_config(g)?;
            let (dataset, _) = cfg.load_data()?;
            let example = dataset
                .forget
                .get(cfg.attack.forget_index)
                .context("no forget example at attack.forget_index")?;
            let (profile, hp) = (cfg.train.profile()?, cfg.train.hyper()?);
            let [su, sr, tu, tr] = attack_sets(&dataset, &hp, &profile, &cfg.attack, cfg.seed)?;
            let report = run_attack(&su, &sr, &tu, &tr, example)?;
            write(&g.out, "attack.json", &io::to_json_string(&report)?)?;
            write(&g.out, "attack_posteriors.csv", &posteriors_csv(&report))?;
        }
        Command::Experiment => {
            let cfg = load_config(g)?;
            if cfg.sweep.n_pub.is_empty() {
                run_experiment(&cfg, &g.out)?;
            } else {
                run_sweep(&cfg, &g.out)?;
                println!("{}", g.out.join("sweep.csv").display());
            }
            println!("{}", g.out.display());
        }
        Command::Fig3 => {
            let cfg: NoiseCurveConfig = match &g.config {
                Some(path) => {
                    let text = std::fs::read_to_string(path)
                        .with_context(|| format!("reading {}", path.display()))?;
                    toml::from_str(&text)?
                }
                None => NoiseCurveConfig::default(),
            };
            write(&g.out, "fig3.csv", &emit_fig3_curve(&cfg)?)?;
        }
        Command::DivergenceCurve => {
            let cfg = load_config(g)?;
            write(
                &g.out,
                "divergence_curve.csv",
                &emit_divergence_curve(&cfg)?,
            )?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.global.workers {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
        {
            eprintln!("error: worker pool: {e}");
            return ExitCode::from(2);
        }
    }
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            // experiment failures already carry their pipeline stage
            eprintln!("error: {} failed: {e:#}", cli.command.name());
            ExitCode::FAILURE
        }
    }
}
