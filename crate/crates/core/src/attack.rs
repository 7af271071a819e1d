//! U-LiRA: unlearned-versus-retrained hypothesis test on one forget example.
//!
//! Each model is reduced to the logit of the confidence it gives the forget
//! example's true label. Shadow models from both pipelines fix one Gaussian
//! per hypothesis; test models then get the Bayes posterior of having been
//! unlearned under a uniform prior.

use std::collections::BTreeSet;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::model::{self, LabeledExample, ParamVector};
use crate::pngd::ModelSampleSet;
use crate::{Error, Flagged, Result};

const CLAMP: f64 = 1e-12;
pub const VARIANCE_FLOOR: f64 = 1e-12;

/// `ln(w / (1 - w))`, with `w` clamped to `[1e-12, 1 - 1e-12]` (flagged).
pub fn logit_rescale(omega: f64) -> Result<Flagged<f64>> {
    if !(0.0..=1.0).contains(&omega) {
        return Err(Error::domain(format!(
            "confidence must lie in [0, 1], got {omega}"
        )));
    }
    let clamped = omega.clamp(CLAMP, 1.0 - CLAMP);
    let v = (clamped / (1.0 - clamped)).ln();
    Ok(if clamped == omega {
        Flagged::clean(v)
    } else {
        Flagged::flagged(v)
    })
}

/// Rescaled confidence `logit(s(y theta^T x))` on the example's true label.
pub fn score_model(theta: &ParamVector, example: &LabeledExample) -> Result<Flagged<f64>> {
    if theta.dim() != example.dim() {
        return Err(Error::Dimension {
            expected: theta.dim(),
            found: example.dim(),
        });
    }
    let z = example.label.sign() * model::dot(&theta.weights, &example.features);
    logit_rescale(model::sigmoid(z))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GaussianFit {
    pub mu: f64,
    /// Unbiased sample variance, at least [`VARIANCE_FLOOR`].
    pub var: f64,
    pub n: usize,
    /// The variance was raised to the floor.
    pub degenerate: bool,
}

pub fn fit_gaussian(scores: &[f64]) -> Result<GaussianFit> {
    if scores.len() < 2 {
        return Err(Error::domain("a Gaussian fit needs at least 2 scores"));
    }
    if scores.iter().any(|s| !s.is_finite()) {
        return Err(Error::domain("scores must be finite"));
    }
    let n = scores.len() as f64;
    let mu = scores.iter().sum::<f64>() / n;
    let var = scores.iter().map(|s| (s - mu) * (s - mu)).sum::<f64>() / (n - 1.0);
    let degenerate = !(var >= VARIANCE_FLOOR);
    Ok(GaussianFit {
        mu,
        var: if degenerate { VARIANCE_FLOOR } else { var },
        n: scores.len(),
        degenerate,
    })
}

fn log_density(x: f64, fit: &GaussianFit) -> f64 {
    let d = x - fit.mu;
    -0.5 * (2.0 * std::f64::consts::PI * fit.var).ln() - d * d / (2.0 * fit.var)
}

/// Logistic function with `f(x) + f(-x) == 1` exactly.
fn symmetric_sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        1.0 - symmetric_sigmoid(-x)
    }
}

/// Posterior that `score` came from the unlearned distribution. Flagged
/// when both densities underflow in linear scale; 0.5 if they cannot be
/// compared at all.
pub fn ulira_posterior(score: f64, fit_u: &GaussianFit, fit_r: &GaussianFit) -> Flagged<f64> {
    let lu = log_density(score, fit_u);
    let lr = log_density(score, fit_r);
    let diff = lu - lr;
    if diff.is_nan() {
        return Flagged::flagged(0.5);
    }
    let floor = f64::MIN_POSITIVE.ln();
    let p = symmetric_sigmoid(diff);
    if lu < floor && lr < floor {
        Flagged::flagged(p)
    } else {
        Flagged::clean(p)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Origin {
    Unlearn,
    Retrain,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AttackReport {
    /// `P(unlearned | score)` for each test model, unlearn set first.
    pub posteriors: Vec<f64>,
    pub true_labels: Vec<Origin>,
    /// Posterior assigned to each model's true origin.
    pub confidences: Vec<f64>,
    pub accuracy: f64,
    /// First quartile, median and third quartile of `confidences`.
    pub confidence_quartiles: [f64; 3],
    pub fit_unlearn: GaussianFit,
    pub fit_retrain: GaussianFit,
    /// Scores whose confidence had to be clamped before the logit.
    pub clamped_scores: usize,
    /// Posteriors flagged by [`ulira_posterior`].
    pub flagged_posteriors: usize,
}

impl AttackReport {
    pub fn median_confidence(&self) -> f64 {
        self.confidence_quartiles[1]
    }
}

/// Linear-interpolation quantile of sorted data.
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

fn scores(set: &ModelSampleSet, example: &LabeledExample) -> Result<(Vec<f64>, usize)> {
    let scored = set
        .samples
        .par_iter()
        .map(|theta| score_model(theta, example))
        .collect::<Result<Vec<_>>>()?;
    let clamped = scored.iter().filter(|s| s.flagged).count();
    Ok((scored.into_iter().map(|s| s.value).collect(), clamped))
}

/// Fit on the shadow sets, classify every test model at posterior 0.5.
/// Ties count as errors. Shadow and test sets must come from disjoint seeds.
pub fn run_attack(
    shadow_u: &ModelSampleSet,
    shadow_r: &ModelSampleSet,
    test_u: &ModelSampleSet,
    test_r: &ModelSampleSet,
    forget_example: &LabeledExample,
) -> Result<AttackReport> {
    let shadow_seeds: BTreeSet<u64> = shadow_u
        .seeds
        .iter()
        .chain(&shadow_r.seeds)
        .copied()
        .collect();
    if let Some(s) = test_u
        .seeds
        .iter()
        .chain(&test_r.seeds)
        .find(|s| shadow_seeds.contains(s))
    {
        return Err(Error::domain(format!(
            "seed {s} is used by both shadow and test models"
        )));
    }
    if shadow_u.len() < 2 || shadow_r.len() < 2 {
        return Err(Error::domain("each shadow set needs at least 2 models"));
    }
    if test_u.is_empty() && test_r.is_empty() {
        return Err(Error::domain("no test models to attack"));
    }

    let (su, c1) = scores(shadow_u, forget_example)?;
    let (sr, c2) = scores(shadow_r, forget_example)?;
    let (tu, c3) = scores(test_u, forget_example)?;
    let (tr, c4) = scores(test_r, forget_example)?;
    let fit_unlearn = fit_gaussian(&su)?;
    let fit_retrain = fit_gaussian(&sr)?;

    let mut posteriors = Vec::with_capacity(tu.len() + tr.len());
    let mut true_labels = Vec::with_capacity(posteriors.capacity());
    let mut flagged_posteriors = 0;
    for (list, origin) in [(&tu, Origin::Unlearn), (&tr, Origin::Retrain)] {
        for &s in list {
            let p = ulira_posterior(s, &fit_unlearn, &fit_retrain);
            flagged_posteriors += usize::from(p.flagged);
            posteriors.push(p.value);
            true_labels.push(origin);
        }
    }
    let confidences: Vec<f64> = posteriors
        .iter()
        .zip(&true_labels)
        .map(|(&p, o)| match o {
            Origin::Unlearn => p,
            Origin::Retrain => 1.0 - p,
        })
        .collect();
    let correct = confidences.iter().filter(|&&c| c > 0.5).count();
    let mut sorted = confidences.clone();
    sorted.sort_by(f64::total_cmp);
    Ok(AttackReport {
        accuracy: correct as f64 / confidences.len() as f64,
        confidence_quartiles: [
            quantile(&sorted, 0.25),
            quantile(&sorted, 0.5),
            quantile(&sorted, 0.75),
        ],
        posteriors,
        true_labels,
        confidences,
        fit_unlearn,
        fit_retrain,
        clamped_scores: c1 + c2 + c3 + c4,
        flagged_posteriors,
    })
}
