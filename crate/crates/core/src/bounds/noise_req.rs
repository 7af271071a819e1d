//! Noise needed to keep the learning/retraining divergence below a target,
//! in the symmetric (all-private) and asymmetric (public + private) settings.

use serde::{Deserialize, Serialize};

use super::divergence::{contraction_sum, SumRange};
use super::lsi::LsiModel;
use super::{require_positive, DataPartition};
use crate::model::LossProfile;
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseMode {
    /// No public data: evaluated as the asymmetric case with `n_pub = 0`.
    Symmetric,
    Asymmetric,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Solver {
    ClosedForm,
    FixedPoint,
}

/// Regime used to solve for the noise level.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum NoiseRegime {
    /// `sigma^2 = 4 alpha c^2 M^2 (1 - exp(-m eta T)) / (eps m) * rho^2`.
    StronglyConvexClosedForm,
    /// Smallest `sigma^2` with
    /// `sigma^2 >= 2 alpha M^2 eta^2 c^2 / eps * S(sigma) * rho^2`, where the
    /// contraction sum `S` is rebuilt from `model` for every candidate.
    Schedule { model: LsiModel, range: SumRange },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseRequirement {
    pub sigma_squared: f64,
    pub sigma: f64,
    pub mode: NoiseMode,
    pub epsilon: f64,
    pub solver: Solver,
    /// `n_priv / (n_pub + n_priv)` as applied (1 in symmetric mode).
    pub private_ratio: f64,
    pub forget_fraction: f64,
}

const SIGMA2_LO: f64 = 1e-12;
const SIGMA2_HI: f64 = 1e6;
const REL_TOL: f64 = 1e-9;

#[allow(clippy::too_many_arguments)]
pub fn required_sigma(
    alpha: f64,
    profile: &LossProfile,
    part: &DataPartition,
    epsilon: f64,
    t: usize,
    eta: f64,
    mode: NoiseMode,
    regime: &NoiseRegime,
) -> Result<NoiseRequirement> {
    if !(alpha > 1.0) {
        return Err(Error::domain("alpha must exceed 1"));
    }
    require_positive("epsilon", epsilon)?;
    require_positive("eta", eta)?;
    part.validate()?;
    let c = part
        .forget_fraction()
        .ok_or_else(|| Error::domain("forget fraction undefined without private data"))?;
    let rho = match mode {
        NoiseMode::Symmetric => 1.0,
        NoiseMode::Asymmetric => part.private_ratio(),
    };
    let m_lip = profile.lipschitz;

    let (sigma_squared, solver) = match regime {
        NoiseRegime::StronglyConvexClosedForm => {
            let m = profile.strong_convexity;
            require_positive("m", m)?;
            let decay = -(-m * eta * t as f64).exp_m1();
            let s2 = 4.0 * alpha * (c * m_lip * rho).powi(2) * decay / (epsilon * m);
            (s2, Solver::ClosedForm)
        }
        NoiseRegime::Schedule { model, range } => {
            let coef = 2.0 * alpha * (m_lip * eta * c * rho).powi(2) / epsilon;
            let s2 = if coef == 0.0 || t < 2 && *range == SumRange::Interior {
                0.0
            } else {
                solve_fixed_point(|s2| {
                    let sigma = s2.sqrt();
                    let sched = model.schedule(eta, sigma, t)?;
                    Ok(coef * contraction_sum(&sched, t, eta, sigma, *range)?)
                })?
            };
            (s2, Solver::FixedPoint)
        }
    };
    Ok(NoiseRequirement {
        sigma_squared,
        sigma: sigma_squared.sqrt(),
        mode,
        epsilon,
        solver,
        private_ratio: rho,
        forget_fraction: c,
    })
}

/// Smallest `s` in `[SIGMA2_LO, SIGMA2_HI]` with `s >= rhs(s)`. A geometric
/// scan brackets the first crossing, bisection refines it.
fn solve_fixed_point<F>(rhs: F) -> Result<f64>
where
    F: Fn(f64) -> Result<f64>,
{
    let feasible = |s: f64| -> Result<bool> { Ok(s >= rhs(s)?) };
    if feasible(SIGMA2_LO)? {
        return Ok(SIGMA2_LO);
    }
    const GRID: usize = 256;
    let ratio = (SIGMA2_HI / SIGMA2_LO).powf(1.0 / GRID as f64);
    let mut lo = SIGMA2_LO;
    let mut hi = None;
    for i in 1..=GRID {
        let s = if i == GRID {
            SIGMA2_HI
        } else {
            SIGMA2_LO * ratio.powi(i as i32)
        };
        if feasible(s)? {
            hi = Some(s);
            break;
        }
        lo = s;
    }
    let mut hi = hi.ok_or_else(|| {
        Error::Numerical(format!(
            "no noise variance in [{SIGMA2_LO:e}, {SIGMA2_HI:e}] meets the divergence target"
        ))
    })?;
    while (hi - lo) > REL_TOL * hi {
        let mid = 0.5 * (lo + hi);
        if feasible(mid)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}
