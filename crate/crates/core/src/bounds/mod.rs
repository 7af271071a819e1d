//! Analytic bound calculators.
//!
//! Everything here is a pure function of its inputs. Divergence values may be
//! `+inf` when a premise degenerates (zero noise, unbounded log-Sobolev
//! constant); such results carry `unbounded = true`.

mod decision;
mod divergence;
mod lsi;
mod mismatch;
mod noise_req;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::model::Dataset;
use crate::{Error, Result};

pub use decision::{
    decide_unlearn_vs_retrain, public_ratio_threshold, DecisionReport, RatioThreshold,
};
pub use divergence::{
    bound_learn_retrain, bound_learn_retrain_strongly_convex, bound_unlearn, gradient_sensitivity,
    min_unlearn_steps, strongly_convex_decay, SumRange, UnlearnRegime,
};
pub use lsi::{
    lsi_convex, lsi_nonconvex, lsi_strongly_convex, lsi_universal_compact, LsiModel, LsiRegime,
    LsiSchedule,
};
pub use mismatch::{dinfty_discrete, generalization_bound, MismatchBound};
pub use noise_req::{required_sigma, NoiseMode, NoiseRegime, NoiseRequirement, Solver};

/// Public / private / forget counts. `n_priv` includes the forget set.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct DataPartition {
    pub n_pub: usize,
    pub n_priv: usize,
    pub n_forget: usize,
}

impl DataPartition {
    pub fn new(n_pub: usize, n_priv: usize, n_forget: usize) -> Result<Self> {
        let p = Self {
            n_pub,
            n_priv,
            n_forget,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn of(dataset: &Dataset) -> Self {
        Self {
            n_pub: dataset.n_pub(),
            n_priv: dataset.n_priv(),
            n_forget: dataset.n_forget(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_forget > self.n_priv {
            return Err(Error::domain("n_forget cannot exceed n_priv"));
        }
        if self.n_total() == 0 {
            return Err(Error::domain("n_pub + n_priv must be at least 1"));
        }
        Ok(())
    }

    pub fn n_total(&self) -> usize {
        self.n_pub + self.n_priv
    }

    pub fn n_retain_priv(&self) -> usize {
        self.n_priv - self.n_forget
    }

    /// `n_forget / n_priv`, undefined without private data.
    pub fn forget_fraction(&self) -> Option<f64> {
        (self.n_priv > 0).then(|| self.n_forget as f64 / self.n_priv as f64)
    }

    /// `n_priv / (n_pub + n_priv)`.
    pub fn private_ratio(&self) -> f64 {
        self.n_priv as f64 / self.n_total() as f64
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundSource {
    /// Learning vs retraining after T steps, schedule form.
    LearnRetrain,
    /// Learning vs retraining, strongly convex closed form.
    LearnRetrainStronglyConvex,
    /// Unlearning vs retraining after K steps, general regime.
    Unlearn,
    /// Unlearning vs retraining, strongly convex exponential decay.
    UnlearnStronglyConvex,
    UserSupplied,
}

/// Upper bound on a Rényi divergence of order `alpha`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DivergenceBound {
    #[serde(with = "crate::ext::extended_f64")]
    pub value: f64,
    pub alpha: f64,
    pub source: BoundSource,
    pub unbounded: bool,
    pub inputs: BTreeMap<String, f64>,
}

impl DivergenceBound {
    pub fn user_supplied(value: f64, alpha: f64) -> Result<Self> {
        if !(value >= 0.0) {
            return Err(Error::domain("divergence must be nonnegative"));
        }
        Ok(Self {
            value,
            alpha,
            source: BoundSource::UserSupplied,
            unbounded: value.is_infinite(),
            inputs: BTreeMap::new(),
        })
    }

    pub(crate) fn new(value: f64, alpha: f64, source: BoundSource, inputs: &[(&str, f64)]) -> Self {
        Self {
            value,
            alpha,
            source,
            unbounded: value.is_infinite(),
            inputs: inputs.iter().map(|(k, v)| (k.to_string(), *v)).collect(),
        }
    }
}

pub(crate) fn require_positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && !v.is_nan() {
        Ok(())
    } else {
        Err(Error::domain(format!("{name} must be positive, got {v}")))
    }
}

pub(crate) fn require_nonnegative(name: &str, v: f64) -> Result<()> {
    if v >= 0.0 {
        Ok(())
    } else {
        Err(Error::domain(format!(
            "{name} must be nonnegative, got {v}"
        )))
    }
}
