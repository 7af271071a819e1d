//! Discriminator training and the seeded divergence estimate.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::network::{Discriminator, DiscriminatorSpec};
use super::{gaussian_renyi_oracle, Objective};
use crate::noise::{derive_seed, standard_normal};
use crate::pngd::ModelSampleSet;
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EstimatorConfig {
    pub alpha: f64,
    pub epochs: usize,
    /// Samples per distribution per step.
    pub batch: usize,
    pub learn_rate: f64,
    pub seeds: Vec<u64>,
    pub objective: Objective,
}

impl Default for EstimatorConfig {
    fn default() -> Self {
        Self {
            alpha: 2.0,
            epochs: 300,
            batch: 256,
            learn_rate: 1e-4,
            seeds: (0..5).collect(),
            objective: Objective::Dv,
        }
    }
}

impl EstimatorConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 1.0) || !self.alpha.is_finite() {
            return Err(Error::domain("alpha must be finite and exceed 1"));
        }
        if self.seeds.is_empty() {
            return Err(Error::domain("at least one estimator seed is required"));
        }
        if self.batch == 0 {
            return Err(Error::domain("batch must be at least 1"));
        }
        if !(self.learn_rate > 0.0) {
            return Err(Error::domain("learning rate must be positive"));
        }
        Ok(())
    }
}

struct Adam {
    lr: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl Adam {
    const B1: f64 = 0.9;
    const B2: f64 = 0.999;
    const EPS: f64 = 1e-8;

    fn new(n: usize, lr: f64) -> Self {
        Self {
            lr,
            m: vec![0.0; n],
            v: vec![0.0; n],
            t: 0,
        }
    }

    /// One ascent step on `params` along `grad`.
    fn ascend(&mut self, params: &mut [f64], grad: &[f64]) {
        self.t += 1;
        let c1 = 1.0 - Self::B1.powi(self.t);
        let c2 = 1.0 - Self::B2.powi(self.t);
        for ((p, g), (m, v)) in params
            .iter_mut()
            .zip(grad)
            .zip(self.m.iter_mut().zip(self.v.iter_mut()))
        {
            *m = Self::B1 * *m + (1.0 - Self::B1) * g;
            *v = Self::B2 * *v + (1.0 - Self::B2) * g * g;
            *p += self.lr * (*m / c1) / ((*v / c2).sqrt() + Self::EPS);
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainedDiscriminator {
    pub network: Discriminator,
    /// Objective on the full training samples before training and after each epoch.
    pub trace: Vec<f64>,
}

fn check_inputs(p: &[&[f64]], q: &[&[f64]], spec: &DiscriminatorSpec) -> Result<()> {
    if p.is_empty() || q.is_empty() {
        return Err(Error::domain("both sample sets must be nonempty"));
    }
    for r in p.iter().chain(q) {
        if r.len() != spec.input_dim {
            return Err(Error::Dimension {
                expected: spec.input_dim,
                found: r.len(),
            });
        }
    }
    Ok(())
}

/// Gradient ascent on the objective with Adam, one power-iteration refresh
/// per step. P is the numerator distribution.
pub fn train_discriminator(
    p: &[&[f64]],
    q: &[&[f64]],
    spec: &DiscriminatorSpec,
    cfg: &EstimatorConfig,
    seed: u64,
) -> Result<TrainedDiscriminator> {
    cfg.validate()?;
    spec.validate()?;
    check_inputs(p, q, spec)?;
    if spec.output_activation != cfg.objective.output_activation() {
        return Err(Error::domain(format!(
            "{} objective needs a {:?} output head",
            cfg.objective,
            cfg.objective.output_activation()
        )));
    }
    let mut net = Discriminator::new(spec.clone(), derive_seed(seed, "discriminator-init"))?;
    let pooled: Vec<&[f64]> = p.iter().chain(q).copied().collect();
    net.fit_standardization(&pooled);
    for _ in 0..20 {
        net.power_step();
    }

    let alpha = cfg.alpha;
    let mut trace = vec![net.objective(p, q, cfg.objective, alpha)?];
    let mut rng = ChaCha12Rng::seed_from_u64(derive_seed(seed, "discriminator-batches"));
    let mut adam = Adam::new(net.n_params(), cfg.learn_rate);
    let batch = cfg.batch.min(p.len()).min(q.len());
    let n_batches = (p.len().min(q.len()) / batch).max(1);
    let mut ip: Vec<usize> = (0..p.len()).collect();
    let mut iq: Vec<usize> = (0..q.len()).collect();
    let mut params = net.params();

    for epoch in 0..cfg.epochs {
        ip.shuffle(&mut rng);
        iq.shuffle(&mut rng);
        for b in 0..n_batches {
            let bp: Vec<&[f64]> = ip[b * batch..(b + 1) * batch]
                .iter()
                .map(|&i| p[i])
                .collect();
            let bq: Vec<&[f64]> = iq[b * batch..(b + 1) * batch]
                .iter()
                .map(|&i| q[i])
                .collect();
            net.power_step();
            let (value, grad) = net.objective_and_grad(&bp, &bq, cfg.objective, alpha)?;
            let grad = grad.flatten();
            if !value.is_finite() || grad.iter().any(|g| !g.is_finite()) {
                return Err(Error::Numerical(format!(
                    "non-finite objective or gradient at epoch {epoch}, batch {b} (objective {value})"
                )));
            }
            adam.ascend(&mut params, &grad);
            net.set_params(&params)?;
        }
        let value = net.objective(p, q, cfg.objective, alpha)?;
        if !value.is_finite() {
            return Err(Error::Numerical(format!(
                "non-finite training objective after epoch {epoch}"
            )));
        }
        trace.push(value);
    }
    Ok(TrainedDiscriminator {
        network: net,
        trace,
    })
}

/// Outcome of running the CC objective on Gaussians with known divergence.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CcCalibration {
    /// Estimate for two samples of `N(0, 1)`; the truth is 0.
    pub same_distribution: f64,
    /// Estimate for `N(1, 1)` against `N(0, 1)`.
    pub shifted: f64,
    pub shifted_truth: f64,
    /// Both estimates within tolerance (0.1 absolute, 15% relative).
    pub trusted: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DivergenceEstimate {
    /// `max(0, raw_mean)`.
    pub value: f64,
    /// Unclamped `alpha * held-out objective` for each seed.
    pub per_seed: Vec<f64>,
    pub raw_mean: f64,
    /// Standard error of the mean over seeds (0 with one seed).
    pub std_error: f64,
    pub objective: Objective,
    pub alpha: f64,
    pub n_p: usize,
    pub n_q: usize,
    pub cc_calibration: Option<CcCalibration>,
}

/// Estimate `D_alpha(P || Q)` from row samples: for each seed, train on a
/// random half of each set and score `alpha * objective` on the other half.
pub fn estimate_renyi(
    p: &[&[f64]],
    q: &[&[f64]],
    spec: &DiscriminatorSpec,
    cfg: &EstimatorConfig,
) -> Result<DivergenceEstimate> {
    let mut est = estimate_uncalibrated(p, q, spec, cfg)?;
    if cfg.objective == Objective::Cc {
        est.cc_calibration = Some(cc_calibration(spec, cfg, 2000)?);
    }
    Ok(est)
}

fn estimate_uncalibrated(
    p: &[&[f64]],
    q: &[&[f64]],
    spec: &DiscriminatorSpec,
    cfg: &EstimatorConfig,
) -> Result<DivergenceEstimate> {
    cfg.validate()?;
    check_inputs(p, q, spec)?;
    if p.len() < 4 || q.len() < 4 {
        return Err(Error::domain(
            "divergence estimation needs at least 4 samples per distribution",
        ));
    }
    let per_seed = cfg
        .seeds
        .par_iter()
        .map(|&seed| -> Result<f64> {
            let mut rng = ChaCha12Rng::seed_from_u64(derive_seed(seed, "estimator-split"));
            let (p_fit, p_eval) = split_half(p, &mut rng);
            let (q_fit, q_eval) = split_half(q, &mut rng);
            let trained = train_discriminator(&p_fit, &q_fit, spec, cfg, seed)?;
            Ok(cfg.alpha
                * trained
                    .network
                    .objective(&p_eval, &q_eval, cfg.objective, cfg.alpha)?)
        })
        .collect::<Result<Vec<f64>>>()?;
    let n = per_seed.len() as f64;
    let raw_mean = per_seed.iter().sum::<f64>() / n;
    let std_error = if per_seed.len() > 1 {
        let var = per_seed.iter().map(|v| (v - raw_mean).powi(2)).sum::<f64>() / (n - 1.0);
        (var / n).sqrt()
    } else {
        0.0
    };
    Ok(DivergenceEstimate {
        value: raw_mean.max(0.0),
        per_seed,
        raw_mean,
        std_error,
        objective: cfg.objective,
        alpha: cfg.alpha,
        n_p: p.len(),
        n_q: q.len(),
        cc_calibration: None,
    })
}

fn as_rows(r: &[Vec<f64>]) -> Vec<&[f64]> {
    r.iter().map(Vec::as_slice).collect()
}

fn split_half<'a>(rows: &[&'a [f64]], rng: &mut ChaCha12Rng) -> (Vec<&'a [f64]>, Vec<&'a [f64]>) {
    let mut idx: Vec<usize> = (0..rows.len()).collect();
    idx.shuffle(rng);
    let half = rows.len() / 2;
    (
        idx[..half].iter().map(|&i| rows[i]).collect(),
        idx[half..].iter().map(|&i| rows[i]).collect(),
    )
}

/// Estimate between two weight-sample sets, P being the numerator.
pub fn estimate_renyi_sets(
    p: &ModelSampleSet,
    q: &ModelSampleSet,
    spec: &DiscriminatorSpec,
    cfg: &EstimatorConfig,
) -> Result<DivergenceEstimate> {
    if p.dim() != q.dim() {
        return Err(Error::Dimension {
            expected: p.dim(),
            found: q.dim(),
        });
    }
    let pr: Vec<&[f64]> = p.samples.iter().map(|s| s.weights.as_slice()).collect();
    let qr: Vec<&[f64]> = q.samples.iter().map(|s| s.weights.as_slice()).collect();
    estimate_renyi(&pr, &qr, spec, cfg)
}

/// Run the configured objective on 1-D Gaussians `N(0,1)` vs `N(0,1)` and
/// `N(1,1)` vs `N(0,1)` with `n` samples each.
pub fn cc_calibration(
    spec: &DiscriminatorSpec,
    cfg: &EstimatorConfig,
    n: usize,
) -> Result<CcCalibration> {
    let seed = derive_seed(cfg.seeds[0], "cc-calibration");
    let draw = |counter: u64, shift: f64| -> Vec<Vec<f64>> {
        standard_normal(seed, counter, n)
            .into_iter()
            .map(|x| vec![x + shift])
            .collect()
    };
    let (a, b, c) = (draw(0, 0.0), draw(1, 0.0), draw(2, 1.0));
    let spec1 = DiscriminatorSpec {
        input_dim: 1,
        ..spec.clone()
    };
    let same = estimate_uncalibrated(&as_rows(&a), &as_rows(&b), &spec1, cfg)?.raw_mean;
    let shifted = estimate_uncalibrated(&as_rows(&c), &as_rows(&b), &spec1, cfg)?.raw_mean;
    let truth = gaussian_renyi_oracle(1.0, 1.0, 0.0, 1.0, cfg.alpha)?;
    Ok(CcCalibration {
        same_distribution: same,
        shifted,
        shifted_truth: truth,
        trusted: same.abs() <= 0.1 && ((shifted - truth) / truth).abs() <= 0.15,
    })
}
