//! Projected noisy gradient descent and the learn / unlearn / retrain pipelines.
//!
//! One PNGD step is `theta <- Proj[theta - eta * g(theta) + xi]` with
//! `xi ~ N(0, 2 eta sigma^2 I)` and `g` the average of per-example clipped
//! gradients. Learning runs `T` steps on the full data, unlearning continues
//! `K` steps on the retain set from the learned weights, and retraining runs
//! from a fresh initialisation on the retain set.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bounds::DataPartition;
use crate::model::{self, Dataset, LabeledExample, LossProfile, ParamVector};
use crate::noise::{self, NoiseStream};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HyperParams {
    pub eta: f64,
    /// Noise scale; each step adds noise with covariance `2 eta sigma^2 I`.
    pub sigma: f64,
    /// Learning iterations.
    pub t: usize,
    /// Unlearning iterations.
    pub k: usize,
    /// Projection radius.
    pub radius: f64,
    /// Rényi order.
    pub alpha: f64,
}

impl HyperParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.eta > 0.0) {
            return Err(Error::domain("eta must be positive"));
        }
        if !(self.sigma >= 0.0) {
            return Err(Error::domain("sigma must be nonnegative"));
        }
        if !(self.radius > 0.0) {
            return Err(Error::domain("radius must be positive"));
        }
        if !(self.alpha > 1.0) {
            return Err(Error::domain("alpha must exceed 1"));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Pipeline {
    Learn,
    Unlearn,
    Retrain,
}

impl fmt::Display for Pipeline {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Pipeline::Learn => "learn",
            Pipeline::Unlearn => "unlearn",
            Pipeline::Retrain => "retrain",
        })
    }
}

impl FromStr for Pipeline {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "learn" => Ok(Pipeline::Learn),
            "unlearn" => Ok(Pipeline::Unlearn),
            "retrain" => Ok(Pipeline::Retrain),
            other => Err(Error::parse(
                "pipeline",
                format!("unknown pipeline {other:?}"),
            )),
        }
    }
}

/// N weight vectors drawn from one pipeline, with the generating metadata.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelSampleSet {
    pub pipeline: Pipeline,
    pub hyper: HyperParams,
    pub profile: LossProfile,
    pub partition: DataPartition,
    pub seeds: Vec<u64>,
    /// Seed of the shared initialisation draw, when all runs share one.
    pub init_seed: Option<u64>,
    pub samples: Vec<ParamVector>,
}

impl ModelSampleSet {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.samples.first().map_or(0, ParamVector::dim)
    }

    /// Weight rows as plain vectors.
    pub fn rows(&self) -> Vec<Vec<f64>> {
        self.samples.iter().map(|s| s.weights.clone()).collect()
    }
}

/// One PNGD step. The noise stream is advanced by one counter.
pub fn pngd_step(
    theta: &ParamVector,
    data: &[&LabeledExample],
    hp: &HyperParams,
    profile: &LossProfile,
    noise: &mut NoiseStream,
) -> Result<ParamVector> {
    let g = model::clipped_gradient(
        &theta.weights,
        data.iter().copied(),
        profile.lambda,
        profile.lipschitz,
    )?;
    let mut next: Vec<f64> = theta
        .weights
        .iter()
        .zip(&g)
        .map(|(t, gi)| t - hp.eta * gi)
        .collect();
    if hp.sigma > 0.0 {
        let scale = (2.0 * hp.eta).sqrt() * hp.sigma;
        let xi = noise.peek(theta.dim());
        next.iter_mut().zip(&xi).for_each(|(v, z)| *v += scale * z);
    }
    noise.counter += 1;
    model::project_ball(&next, hp.radius)
}

fn run_steps(
    init: &ParamVector,
    data: &[&LabeledExample],
    steps: usize,
    hp: &HyperParams,
    profile: &LossProfile,
    noise: &mut NoiseStream,
) -> Result<ParamVector> {
    hp.validate()?;
    if steps > 0 && data.is_empty() {
        return Err(Error::domain("cannot run PNGD steps on an empty dataset"));
    }
    let mut theta = init.clone();
    for _ in 0..steps {
        theta = pngd_step(&theta, data, hp, profile, noise)?;
    }
    Ok(theta)
}

/// `hp.t` steps on public and all private data (forget set included).
pub fn run_learn(
    dataset: &Dataset,
    hp: &HyperParams,
    profile: &LossProfile,
    init: &ParamVector,
    noise: &mut NoiseStream,
) -> Result<ParamVector> {
    run_steps(init, &dataset.full(), hp.t, hp, profile, noise)
}

/// `hp.k` steps on the retain set starting from the learned weights.
pub fn run_unlearn(
    theta_t: &ParamVector,
    dataset: &Dataset,
    hp: &HyperParams,
    profile: &LossProfile,
    noise: &mut NoiseStream,
) -> Result<ParamVector> {
    run_steps(theta_t, &dataset.retain(), hp.k, hp, profile, noise)
}

/// `steps` steps on the retain set from `init`; the retraining baseline uses
/// `steps = T + K`.
pub fn run_retrain(
    dataset: &Dataset,
    steps: usize,
    hp: &HyperParams,
    profile: &LossProfile,
    init: &ParamVector,
    noise: &mut NoiseStream,
) -> Result<ParamVector> {
    run_steps(init, &dataset.retain(), steps, hp, profile, noise)
}

/// Initial weights: a standard Gaussian draw projected onto the ball.
pub fn initial_params(seed: u64, dim: usize, radius: f64) -> Result<ParamVector> {
    let z = noise::standard_normal(seed, noise::INIT_COUNTER, dim);
    model::project_ball(&z, radius)
}

/// Runs one full pipeline with run seed `seed`.
pub fn run_pipeline(
    dataset: &Dataset,
    pipeline: Pipeline,
    hp: &HyperParams,
    profile: &LossProfile,
    seed: u64,
    init_seed: Option<u64>,
) -> Result<ParamVector> {
    let init = initial_params(init_seed.unwrap_or(seed), dataset.dim()?, hp.radius)?;
    let mut stream = NoiseStream::new(seed);
    match pipeline {
        Pipeline::Learn => run_learn(dataset, hp, profile, &init, &mut stream),
        Pipeline::Unlearn => {
            let learned = run_learn(dataset, hp, profile, &init, &mut stream)?;
            run_unlearn(&learned, dataset, hp, profile, &mut stream)
        }
        Pipeline::Retrain => run_retrain(dataset, hp.t + hp.k, hp, profile, &init, &mut stream),
    }
}

/// Draws `n` independent models from `pipeline`; run `i` uses seed
/// `seed_base + i` for both its initialisation and its noise stream.
pub fn sample_distribution(
    dataset: &Dataset,
    pipeline: Pipeline,
    n: usize,
    hp: &HyperParams,
    profile: &LossProfile,
    seed_base: u64,
) -> Result<ModelSampleSet> {
    sample_distribution_with_init(dataset, pipeline, n, hp, profile, seed_base, None)
}

/// As [`sample_distribution`], optionally pinning every run to the same
/// initialisation draw.
pub fn sample_distribution_with_init(
    dataset: &Dataset,
    pipeline: Pipeline,
    n: usize,
    hp: &HyperParams,
    profile: &LossProfile,
    seed_base: u64,
    init_seed: Option<u64>,
) -> Result<ModelSampleSet> {
    if n < 1 {
        return Err(Error::domain("sample count must be at least 1"));
    }
    hp.validate()?;
    dataset.dim()?;
    let seeds: Vec<u64> = (0..n as u64).map(|i| seed_base.wrapping_add(i)).collect();
    let samples = seeds
        .par_iter()
        .map(|&seed| run_pipeline(dataset, pipeline, hp, profile, seed, init_seed))
        .collect::<Result<Vec<_>>>()?;
    Ok(ModelSampleSet {
        pipeline,
        hyper: *hp,
        profile: *profile,
        partition: DataPartition::of(dataset),
        seeds,
        init_seed,
        samples,
    })
}
