//! Experiment orchestration: data, sampling, bounds, estimation, attack.
//!
//! Configs are TOML with dotted keys (`train.sigma = 0.05`) or JSON with the
//! same nested keys. Every run writes its outputs under one directory and an
//! `artifact.json` that records the config, its SHA-256 and wall-clock
//! timings. Timings live only in `artifact.json`, so every other file is a
//! pure function of the config.

mod curves;
mod synthetic;

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::attack::{run_attack, AttackReport, Origin};
use crate::bounds::{
    bound_learn_retrain, bound_learn_retrain_strongly_convex, bound_unlearn,
    decide_unlearn_vs_retrain, generalization_bound, gradient_sensitivity, lsi_nonconvex,
    lsi_strongly_convex, lsi_universal_compact, min_unlearn_steps, public_ratio_threshold,
    required_sigma, DataPartition, DecisionReport, DivergenceBound, MismatchBound, NoiseMode,
    NoiseRegime, NoiseRequirement, RatioThreshold, SumRange, UnlearnRegime,
};
use crate::io;
use crate::model::{self, derive_profile, Dataset, LossProfile};
use crate::noise::derive_seed;
use crate::pngd::{sample_distribution, HyperParams, ModelSampleSet, Pipeline};
use crate::renyi::{
    estimate_renyi_sets, DiscriminatorSpec, DivergenceEstimate, EstimatorConfig, Objective,
};
use crate::{Error, Result};

pub use curves::{
    divergence_curve_csv, divergence_curve_rows, emit_divergence_curve, emit_fig3_curve,
    noise_curve_rows, strongly_convex_unlearn_bound, DivergenceCurveRow, NoiseCurveConfig,
    NoiseCurveRow,
};
pub use synthetic::{generate_synthetic, Synthetic, SyntheticShiftSpec, SyntheticTruth};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DataSource {
    Synthetic(SyntheticShiftSpec),
    Files { csv: PathBuf, manifest: PathBuf },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    pub lambda: f64,
    #[serde(default = "one")]
    pub clip: f64,
    /// Defaults to `1 / L`.
    #[serde(default)]
    pub eta: Option<f64>,
    pub sigma: f64,
    pub t: usize,
    pub k: usize,
    pub radius: f64,
    #[serde(default = "two")]
    pub alpha: f64,
    /// Log-Sobolev constant of the initial distribution.
    #[serde(default = "one")]
    pub c0: f64,
}

impl TrainConfig {
    pub fn profile(&self) -> Result<LossProfile> {
        derive_profile(self.lambda, self.clip)
    }

    pub fn hyper(&self) -> Result<HyperParams> {
        let profile = self.profile()?;
        let hp = HyperParams {
            eta: self.eta.unwrap_or(1.0 / profile.smoothness),
            sigma: self.sigma,
            t: self.t,
            k: self.k,
            radius: self.radius,
            alpha: self.alpha,
        };
        hp.validate()?;
        Ok(hp)
    }
}

fn one() -> f64 {
    1.0
}

fn two() -> f64 {
    2.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BoundsConfig {
    pub epsilon: f64,
    /// Largest K searched for the minimal unlearning horizon.
    pub k_max: usize,
}

impl Default for BoundsConfig {
    fn default() -> Self {
        Self {
            epsilon: 1.0,
            k_max: 10_000,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EstimatorSection {
    pub enabled: bool,
    pub objective: Objective,
    pub epochs: usize,
    pub batch: usize,
    pub learn_rate: f64,
    pub seeds: Vec<u64>,
    pub hidden_width: usize,
    pub output_gain: f64,
}

impl Default for EstimatorSection {
    fn default() -> Self {
        let e = EstimatorConfig::default();
        Self {
            enabled: false,
            objective: e.objective,
            epochs: e.epochs,
            batch: e.batch,
            learn_rate: e.learn_rate,
            seeds: e.seeds,
            hidden_width: DiscriminatorSpec::DEFAULT_HIDDEN,
            output_gain: DiscriminatorSpec::DEFAULT_GAIN,
        }
    }
}

impl EstimatorSection {
    pub fn config(&self, alpha: f64) -> EstimatorConfig {
        EstimatorConfig {
            alpha,
            epochs: self.epochs,
            batch: self.batch,
            learn_rate: self.learn_rate,
            seeds: self.seeds.clone(),
            objective: self.objective,
        }
    }

    pub fn spec(&self, dim: usize) -> DiscriminatorSpec {
        DiscriminatorSpec {
            hidden_width: self.hidden_width,
            output_gain: self.output_gain,
            ..DiscriminatorSpec::for_objective(dim, self.objective)
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AttackSection {
    pub enabled: bool,
    /// Shadow models per hypothesis.
    pub shadow: usize,
    /// Test models per hypothesis.
    pub test: usize,
    /// Index into the forget set of the attacked example.
    pub forget_index: usize,
}

impl Default for AttackSection {
    fn default() -> Self {
        Self {
            enabled: false,
            shadow: 200,
            test: 25,
            forget_index: 0,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSection {
    pub n_pub: Vec<usize>,
    pub k: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub seed: u64,
    pub data: DataSource,
    pub train: TrainConfig,
    /// Models drawn per pipeline.
    pub samples: usize,
    #[serde(default)]
    pub bounds: BoundsConfig,
    #[serde(default)]
    pub estimator: EstimatorSection,
    #[serde(default)]
    pub attack: AttackSection,
    #[serde(default)]
    pub sweep: SweepSection,
}

impl ExperimentConfig {
    /// Parse TOML, or JSON when the text starts with `{`.
    pub fn parse(text: &str) -> Result<Self> {
        if text.trim_start().starts_with('{') {
            serde_json::from_str(text).map_err(|e| Error::parse("experiment config (json)", e))
        } else {
            toml::from_str(text).map_err(|e| Error::parse("experiment config (toml)", e))
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::parse(&text)?;
        // data files are resolved against the config's directory
        if let DataSource::Files { csv, manifest } = &mut cfg.data {
            let base = path.parent().unwrap_or(Path::new(""));
            *csv = base.join(&*csv);
            *manifest = base.join(&*manifest);
        }
        Ok(cfg)
    }

    /// SHA-256 of the canonical JSON encoding.
    pub fn hash(&self) -> String {
        let canonical = serde_json::to_vec(self).expect("config serialises");
        hex::encode(Sha256::digest(&canonical))
    }

    pub fn validate(&self) -> Result<()> {
        self.train.hyper()?;
        if self.samples < 1 {
            return Err(Error::domain("samples must be at least 1"));
        }
        if let DataSource::Files { csv, manifest } = &self.data {
            for p in [csv, manifest] {
                if !p.exists() {
                    return Err(Error::domain(format!(
                        "data file {} does not exist",
                        p.display()
                    )));
                }
            }
        }
        if let DataSource::Synthetic(s) = &self.data {
            s.validate()?;
        }
        if self.estimator.enabled {
            self.estimator.config(self.train.alpha).validate()?;
        }
        Ok(())
    }

    pub fn load_data(&self) -> Result<(Dataset, Option<SyntheticTruth>)> {
        match &self.data {
            DataSource::Synthetic(spec) => {
                let s = generate_synthetic(spec)?;
                Ok((s.dataset, Some(s.truth)))
            }
            DataSource::Files { csv, manifest } => Ok((io::read_dataset(csv, manifest)?, None)),
        }
    }
}

/// Every analytic quantity the run's configuration supports.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub partition: DataPartition,
    pub profile: LossProfile,
    pub hyper: HyperParams,
    pub epsilon: f64,
    pub sensitivity: f64,
    /// Strongly convex closed form of the learning/retraining divergence.
    pub learn_retrain: DivergenceBound,
    /// Same quantity from the tracked strongly convex log-Sobolev schedule.
    pub learn_retrain_schedule: DivergenceBound,
    /// Log-Sobolev constant after `T` learning steps (strongly convex schedule).
    pub lsi_after_learning: f64,
    /// Strongly convex unlearning bound at `K`, absent when the decay premise
    /// `C > sigma^2 / m` fails.
    pub unlearn: Option<DivergenceBound>,
    /// Smooth-loss unlearning bound at `K` with the universal constant.
    pub unlearn_general: DivergenceBound,
    pub min_unlearn_steps: Option<usize>,
    /// Absent without private data.
    pub noise_symmetric: Option<NoiseRequirement>,
    pub noise_asymmetric: Option<NoiseRequirement>,
    /// Absent for noiseless training.
    pub decision: Option<DecisionReport>,
    pub ratio_threshold: Option<RatioThreshold>,
    pub mismatch: Option<MismatchBound>,
}

impl BoundReport {
    /// Tightest available unlearning bound.
    pub fn best_unlearn(&self) -> f64 {
        self.unlearn
            .as_ref()
            .map_or(self.unlearn_general.value, |b| {
                b.value.min(self.unlearn_general.value)
            })
    }
}

pub fn compute_bounds(
    part: &DataPartition,
    profile: &LossProfile,
    hp: &HyperParams,
    train: &TrainConfig,
    bounds: &BoundsConfig,
    mismatch_inputs: Option<(f64, f64)>,
) -> Result<BoundReport> {
    let alpha = hp.alpha;
    let m = profile.strong_convexity;
    let eps = bounds.epsilon;
    let sensitivity = gradient_sensitivity(hp.eta, profile.lipschitz, part)?;
    let learn_retrain =
        bound_learn_retrain_strongly_convex(alpha, profile, hp.eta, hp.sigma, hp.t, part)?;
    let sc = lsi_strongly_convex(train.c0, hp.eta, m, hp.sigma, hp.t + hp.k)?;
    let learn_retrain_schedule =
        bound_learn_retrain(alpha, profile, hp, part, &sc, SumRange::Interior)?;
    let c_t = sc.constants[hp.t];

    // the decay runs from the learned distribution, whose constant is C_T
    let sc_regime = UnlearnRegime::StronglyConvex { c: c_t };
    let unlearn = if c_t > hp.sigma * hp.sigma / m {
        Some(bound_unlearn(
            &learn_retrain,
            hp.k,
            alpha,
            hp,
            profile,
            &sc_regime,
        )?)
    } else {
        None
    };
    let c_tilde =
        lsi_universal_compact(hp.radius, hp.eta, profile.lipschitz, hp.sigma)?.constants[0];
    let unlearn_schedule = lsi_nonconvex(c_t, hp.eta, profile.smoothness, hp.sigma, hp.k)?;
    let general = UnlearnRegime::General {
        schedule: unlearn_schedule,
        c_tilde: Some(c_tilde),
    };
    let unlearn_general = bound_unlearn(&learn_retrain, hp.k, alpha, hp, profile, &general)?;
    let min_steps = if unlearn.is_some() {
        min_unlearn_steps(
            &learn_retrain,
            eps,
            bounds.k_max,
            alpha,
            hp,
            profile,
            &sc_regime,
        )?
    } else {
        None
    };

    let regime = NoiseRegime::StronglyConvexClosedForm;
    let noise = |mode| required_sigma(alpha, profile, part, eps, hp.t, hp.eta, mode, &regime);
    let (noise_symmetric, noise_asymmetric) = if part.n_priv > 0 {
        (
            Some(noise(NoiseMode::Symmetric)?),
            Some(noise(NoiseMode::Asymmetric)?),
        )
    } else {
        (None, None)
    };
    let (decision, ratio_threshold) = if hp.sigma > 0.0 {
        let d = decide_unlearn_vs_retrain(
            c_t,
            alpha,
            hp.sigma,
            hp.eta,
            profile.lipschitz,
            m,
            eps,
            part,
            hp.t,
        )?;
        let r = public_ratio_threshold(
            alpha,
            hp.sigma,
            hp.eta,
            c_t,
            profile.lipschitz,
            m,
            eps,
            hp.t,
            part.forget_fraction().unwrap_or(0.0),
        )?;
        (Some(d), Some(r))
    } else {
        (None, None)
    };

    let best = unlearn.as_ref().map_or(unlearn_general.value, |b| {
        b.value.min(unlearn_general.value)
    });
    let mismatch = match mismatch_inputs {
        Some((d_infty, base_risk)) => Some(generalization_bound(
            d_infty,
            part.n_pub,
            part.n_retain_priv(),
            base_risk,
            profile.lipschitz,
            2.0 * hp.radius,
            best,
        )?),
        None => None,
    };

    Ok(BoundReport {
        partition: *part,
        profile: *profile,
        hyper: *hp,
        epsilon: eps,
        sensitivity,
        learn_retrain,
        learn_retrain_schedule,
        lsi_after_learning: c_t,
        unlearn,
        unlearn_general,
        min_unlearn_steps: min_steps,
        noise_symmetric,
        noise_asymmetric,
        decision,
        ratio_threshold,
        mismatch,
    })
}

/// Mean unregularised loss of the models on `data`.
pub fn mean_risk(set: &ModelSampleSet, data: &[&model::LabeledExample]) -> Result<f64> {
    if data.is_empty() {
        return Ok(0.0);
    }
    let mut total = 0.0;
    for s in &set.samples {
        total += model::loss_value(&s.weights, data.iter().copied(), 0.0)?;
    }
    Ok(total / set.len() as f64)
}

/// Pipeline stage names used in failure reports.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Stage {
    Config,
    Data,
    Sample,
    Bounds,
    Estimate,
    Attack,
    Persist,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Stage::Config => "config",
            Stage::Data => "data",
            Stage::Sample => "sample",
            Stage::Bounds => "bounds",
            Stage::Estimate => "estimate",
            Stage::Attack => "attack",
            Stage::Persist => "persist",
        })
    }
}

#[derive(Debug, thiserror::Error)]
#[error("stage `{stage}` failed: {source}")]
pub struct StageError {
    pub stage: Stage,
    #[source]
    pub source: Error,
}

trait AtStage<T> {
    fn at(self, stage: Stage) -> std::result::Result<T, StageError>;
}

impl<T> AtStage<T> for Result<T> {
    fn at(self, stage: Stage) -> std::result::Result<T, StageError> {
        self.map_err(|source| StageError { stage, source })
    }
}

/// File names inside the output directory.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ArtifactFiles {
    pub dataset_csv: String,
    pub manifest: String,
    pub learn: String,
    pub unlearn: String,
    pub retrain: String,
    pub bounds: String,
    pub estimate: Option<String>,
    pub attack: Option<String>,
    pub attack_posteriors: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunArtifact {
    pub config: ExperimentConfig,
    pub config_hash: String,
    pub files: ArtifactFiles,
    pub bounds: BoundReport,
    pub estimate: Option<DivergenceEstimate>,
    pub attack: Option<AttackReport>,
    pub synthetic_truth: Option<SyntheticTruth>,
    /// Wall-clock seconds per stage.
    pub timings: BTreeMap<String, f64>,
}

/// Learn, unlearn and retrain sample sets from independent seed ranges.
pub fn sample_pipelines(
    dataset: &Dataset,
    hp: &HyperParams,
    profile: &LossProfile,
    n: usize,
    seed: u64,
) -> Result<[ModelSampleSet; 3]> {
    let draw = |p: Pipeline| {
        sample_distribution(
            dataset,
            p,
            n,
            hp,
            profile,
            derive_seed(seed, &p.to_string()),
        )
    };
    Ok([
        draw(Pipeline::Learn)?,
        draw(Pipeline::Unlearn)?,
        draw(Pipeline::Retrain)?,
    ])
}

/// Unlearned and retrained shadow and test sets for the attack, from four
/// disjoint seed ranges.
pub fn attack_sets(
    dataset: &Dataset,
    hp: &HyperParams,
    profile: &LossProfile,
    section: &AttackSection,
    seed: u64,
) -> Result<[ModelSampleSet; 4]> {
    let draw = |p: Pipeline, n: usize, label: &str| {
        sample_distribution(dataset, p, n, hp, profile, derive_seed(seed, label))
    };
    Ok([
        draw(Pipeline::Unlearn, section.shadow, "attack-shadow-unlearn")?,
        draw(Pipeline::Retrain, section.shadow, "attack-shadow-retrain")?,
        draw(Pipeline::Unlearn, section.test, "attack-test-unlearn")?,
        draw(Pipeline::Retrain, section.test, "attack-test-retrain")?,
    ])
}

/// One-row-per-model CSV of attack posteriors.
pub fn posteriors_csv(report: &AttackReport) -> String {
    let mut out = String::from("model,origin,posterior_unlearn,confidence\n");
    for (i, ((p, o), c)) in report
        .posteriors
        .iter()
        .zip(&report.true_labels)
        .zip(&report.confidences)
        .enumerate()
    {
        let origin = match o {
            Origin::Unlearn => "unlearn",
            Origin::Retrain => "retrain",
        };
        out.push_str(&format!("{i},{origin},{p},{c}\n"));
    }
    out
}

/// Run one experiment into `out`. On failure the error names the stage and
/// files written by earlier stages stay in place.
pub fn run_experiment(
    cfg: &ExperimentConfig,
    out: &Path,
) -> std::result::Result<RunArtifact, StageError> {
    let mut timings = BTreeMap::new();
    let mut clock = Instant::now();
    let mut lap = |name: &str, timings: &mut BTreeMap<String, f64>| {
        timings.insert(name.to_string(), clock.elapsed().as_secs_f64());
        clock = Instant::now();
    };

    cfg.validate().at(Stage::Config)?;
    let profile = cfg.train.profile().at(Stage::Config)?;
    let hp = cfg.train.hyper().at(Stage::Config)?;

    let (dataset, truth) = cfg.load_data().at(Stage::Data)?;
    let mut files = ArtifactFiles {
        dataset_csv: "dataset.csv".into(),
        manifest: "manifest.json".into(),
        learn: "learn.csv".into(),
        unlearn: "unlearn.csv".into(),
        retrain: "retrain.csv".into(),
        bounds: "bounds.json".into(),
        ..Default::default()
    };
    io::write_dataset(
        &dataset,
        &out.join(&files.dataset_csv),
        &out.join(&files.manifest),
    )
    .at(Stage::Data)?;
    lap("data", &mut timings);

    let [learn, unlearn, retrain] =
        sample_pipelines(&dataset, &hp, &profile, cfg.samples, cfg.seed).at(Stage::Sample)?;
    for (set, name) in [
        (&learn, &files.learn),
        (&unlearn, &files.unlearn),
        (&retrain, &files.retrain),
    ] {
        io::write_samples(set, &out.join(name)).at(Stage::Sample)?;
    }
    lap("sample", &mut timings);

    let part = DataPartition::of(&dataset);
    let mismatch_inputs = match &truth {
        Some(t) => Some((
            t.d_infty,
            mean_risk(&unlearn, &dataset.retain()).at(Stage::Bounds)?,
        )),
        None => None,
    };
    let bounds = compute_bounds(
        &part,
        &profile,
        &hp,
        &cfg.train,
        &cfg.bounds,
        mismatch_inputs,
    )
    .at(Stage::Bounds)?;
    io::write_json(&out.join(&files.bounds), &bounds).at(Stage::Bounds)?;
    lap("bounds", &mut timings);

    let estimate = if cfg.estimator.enabled {
        let spec = cfg.estimator.spec(retrain.dim());
        let est = estimate_renyi_sets(&retrain, &unlearn, &spec, &cfg.estimator.config(hp.alpha))
            .at(Stage::Estimate)?;
        let name = "estimate.json".to_string();
        io::write_json(&out.join(&name), &est).at(Stage::Estimate)?;
        files.estimate = Some(name);
        lap("estimate", &mut timings);
        Some(est)
    } else {
        None
    };

    let attack = if cfg.attack.enabled {
        let example = dataset
            .forget
            .get(cfg.attack.forget_index)
            .ok_or_else(|| Error::domain("attack needs a forget example at the configured index"))
            .at(Stage::Attack)?;
        let [su, sr, tu, tr] =
            attack_sets(&dataset, &hp, &profile, &cfg.attack, cfg.seed).at(Stage::Attack)?;
        let report = run_attack(&su, &sr, &tu, &tr, example).at(Stage::Attack)?;
        let (name, csv) = (
            "attack.json".to_string(),
            "attack_posteriors.csv".to_string(),
        );
        io::write_json(&out.join(&name), &report).at(Stage::Attack)?;
        io::write_bytes(&out.join(&csv), posteriors_csv(&report).as_bytes()).at(Stage::Attack)?;
        files.attack = Some(name);
        files.attack_posteriors = Some(csv);
        lap("attack", &mut timings);
        Some(report)
    } else {
        None
    };

    let artifact = RunArtifact {
        config: cfg.clone(),
        config_hash: cfg.hash(),
        files,
        bounds,
        estimate,
        attack,
        synthetic_truth: truth,
        timings,
    };
    io::write_json(&out.join("artifact.json"), &artifact).at(Stage::Persist)?;
    Ok(artifact)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub n_pub: usize,
    pub n_priv: usize,
    pub n_forget: usize,
    pub learn_retrain: f64,
    pub unlearn: f64,
    pub sigma_asymmetric: Option<f64>,
    pub unlearn_preferred: Option<bool>,
    pub estimate: Option<f64>,
}

/// Run the experiment once per `sweep.n_pub` setting (synthetic data only),
/// each into `out/n_pub_<n>`, and write `sweep.csv` with one row per setting.
pub fn run_sweep(
    cfg: &ExperimentConfig,
    out: &Path,
) -> std::result::Result<Vec<SweepRow>, StageError> {
    let DataSource::Synthetic(base) = &cfg.data else {
        return Err(StageError {
            stage: Stage::Config,
            source: Error::domain("n_pub sweeps need synthetic data"),
        });
    };
    let mut rows = Vec::new();
    for &n_pub in &cfg.sweep.n_pub {
        let mut c = cfg.clone();
        c.data = DataSource::Synthetic(SyntheticShiftSpec {
            n_pub,
            ..base.clone()
        });
        let a = run_experiment(&c, &out.join(format!("n_pub_{n_pub}")))?;
        rows.push(SweepRow {
            n_pub,
            n_priv: a.bounds.partition.n_priv,
            n_forget: a.bounds.partition.n_forget,
            learn_retrain: a.bounds.learn_retrain.value,
            unlearn: a.bounds.best_unlearn(),
            sigma_asymmetric: a.bounds.noise_asymmetric.as_ref().map(|n| n.sigma),
            unlearn_preferred: a.bounds.decision.as_ref().map(|d| d.unlearn_preferred),
            estimate: a.estimate.map(|e| e.value),
        });
    }
    io::write_bytes(&out.join("sweep.csv"), sweep_csv(&rows).as_bytes()).at(Stage::Persist)?;
    Ok(rows)
}

/// Analytic bounds over `sweep.n_pub` without sampling; the partition's
/// private and forget counts come from the configured data.
pub fn bound_sweep(cfg: &ExperimentConfig) -> Result<Vec<SweepRow>> {
    let profile = cfg.train.profile()?;
    let hp = cfg.train.hyper()?;
    let (dataset, _) = cfg.load_data()?;
    let base = DataPartition::of(&dataset);
    cfg.sweep
        .n_pub
        .iter()
        .map(|&n_pub| {
            let part = DataPartition::new(n_pub, base.n_priv, base.n_forget)?;
            let b = compute_bounds(&part, &profile, &hp, &cfg.train, &cfg.bounds, None)?;
            Ok(SweepRow {
                n_pub,
                n_priv: part.n_priv,
                n_forget: part.n_forget,
                learn_retrain: b.learn_retrain.value,
                unlearn: b.best_unlearn(),
                sigma_asymmetric: b.noise_asymmetric.as_ref().map(|n| n.sigma),
                unlearn_preferred: b.decision.as_ref().map(|d| d.unlearn_preferred),
                estimate: None,
            })
        })
        .collect()
}

pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut csv = String::from(
        "n_pub,n_priv,n_forget,learn_retrain_bound,unlearn_bound,sigma_asymmetric,unlearn_preferred,estimate\n",
    );
    for r in rows {
        csv.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            r.n_pub,
            r.n_priv,
            r.n_forget,
            r.learn_retrain,
            r.unlearn,
            opt(r.sigma_asymmetric),
            opt(r.unlearn_preferred),
            opt(r.estimate)
        ));
    }
    csv
}

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}
