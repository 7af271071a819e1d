//! Log-Sobolev constant tracking along PNGD iterates.

use serde::{Deserialize, Serialize};

use super::{require_nonnegative, require_positive};
use crate::ext::extended_f64;
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LsiRegime {
    Nonconvex,
    Convex,
    StronglyConvex,
    UniversalCompact,
}

/// Log-Sobolev constants `C_0..C_K`, or a single iteration-independent
/// constant for the universal compact bound.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LsiSchedule {
    pub regime: LsiRegime,
    pub constants: Vec<f64>,
    /// Strongly convex regime: the step-size condition guaranteeing a
    /// non-increasing schedule holds.
    pub contractive: bool,
    /// Strongly convex regime: `eta * m >= 1`.
    pub step_too_large: bool,
    /// The universal constant is infinite (zero noise or exponent overflow).
    pub unbounded: bool,
    /// `ln C~` for the universal regime, kept when the constant overflows.
    #[serde(with = "extended_f64")]
    pub log_constant: f64,
}

impl LsiSchedule {
    fn tracked(regime: LsiRegime, constants: Vec<f64>) -> Self {
        Self {
            regime,
            constants,
            contractive: false,
            step_too_large: false,
            unbounded: false,
            log_constant: f64::NAN,
        }
    }

    /// Constant at iteration `k`.
    pub fn at(&self, k: usize) -> Option<f64> {
        match self.regime {
            LsiRegime::UniversalCompact => self.constants.first().copied(),
            _ => self.constants.get(k).copied(),
        }
    }

    /// Number of tracked iterations (`usize::MAX` for the universal constant).
    pub fn horizon(&self) -> usize {
        match self.regime {
            LsiRegime::UniversalCompact => usize::MAX,
            _ => self.constants.len(),
        }
    }
}

fn recurrence(c0: f64, factor: f64, additive: f64, k: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(k + 1);
    let mut c = c0;
    out.push(c);
    for _ in 0..k {
        c = factor * c + additive;
        out.push(c);
    }
    out
}

/// `C_k = (1 + eta L)^2 C_{k-1} + 2 eta sigma^2`. With `L = 0` this is the
/// convex schedule.
pub fn lsi_nonconvex(
    c0: f64,
    eta: f64,
    smoothness: f64,
    sigma: f64,
    k: usize,
) -> Result<LsiSchedule> {
    require_positive("C0", c0)?;
    require_positive("eta", eta)?;
    require_nonnegative("L", smoothness)?;
    require_nonnegative("sigma", sigma)?;
    if smoothness == 0.0 {
        return lsi_convex(c0, eta, sigma, k);
    }
    let factor = (1.0 + eta * smoothness).powi(2);
    Ok(LsiSchedule::tracked(
        LsiRegime::Nonconvex,
        recurrence(c0, factor, 2.0 * eta * sigma * sigma, k),
    ))
}

/// `C_k = C_0 + 2 k eta sigma^2`.
pub fn lsi_convex(c0: f64, eta: f64, sigma: f64, k: usize) -> Result<LsiSchedule> {
    require_positive("C0", c0)?;
    require_positive("eta", eta)?;
    require_nonnegative("sigma", sigma)?;
    let step = 2.0 * eta * sigma * sigma;
    Ok(LsiSchedule::tracked(
        LsiRegime::Convex,
        (0..=k).map(|i| c0 + i as f64 * step).collect(),
    ))
}

/// `C_k = (1 - eta m)^2 C_{k-1} + 2 eta sigma^2`, flagging whether the
/// contraction condition `eta < (2/m)(1 - sigma^2/(m C_0))` holds.
pub fn lsi_strongly_convex(c0: f64, eta: f64, m: f64, sigma: f64, k: usize) -> Result<LsiSchedule> {
    require_positive("C0", c0)?;
    require_positive("eta", eta)?;
    require_positive("m", m)?;
    require_nonnegative("sigma", sigma)?;
    let s2 = sigma * sigma;
    let factor = (1.0 - eta * m).powi(2);
    let mut sched = LsiSchedule::tracked(
        LsiRegime::StronglyConvex,
        recurrence(c0, factor, 2.0 * eta * s2, k),
    );
    sched.contractive = eta < (2.0 / m) * (1.0 - s2 / (m * c0));
    sched.step_too_large = eta * m >= 1.0;
    Ok(sched)
}

/// Universal bound for PNGD on a ball of radius `R`:
/// `6 (4 tau^2 + 2 eta sigma^2) exp(4 tau^2 / (2 eta sigma^2))`, `tau = R + eta M`.
pub fn lsi_universal_compact(
    radius: f64,
    eta: f64,
    lipschitz: f64,
    sigma: f64,
) -> Result<LsiSchedule> {
    require_positive("R", radius)?;
    require_positive("eta", eta)?;
    require_positive("M", lipschitz)?;
    require_nonnegative("sigma", sigma)?;
    let tau = radius + eta * lipschitz;
    let noise = 2.0 * eta * sigma * sigma;
    let log_c = if noise > 0.0 {
        6f64.ln() + (4.0 * tau * tau + noise).ln() + 4.0 * tau * tau / noise
    } else {
        f64::INFINITY
    };
    let c = log_c.exp();
    let mut sched = LsiSchedule::tracked(LsiRegime::UniversalCompact, vec![c]);
    sched.unbounded = c.is_infinite();
    sched.log_constant = log_c;
    Ok(sched)
}

/// How to rebuild a schedule for a candidate noise level.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "regime", rename_all = "snake_case")]
pub enum LsiModel {
    Nonconvex { c0: f64, smoothness: f64 },
    Convex { c0: f64 },
    StronglyConvex { c0: f64, m: f64 },
    UniversalCompact { radius: f64, lipschitz: f64 },
}

impl LsiModel {
    /// Schedule `C_0..C_k` at step size `eta` and noise `sigma`.
    pub fn schedule(&self, eta: f64, sigma: f64, k: usize) -> Result<LsiSchedule> {
        match *self {
            LsiModel::Nonconvex { c0, smoothness } => lsi_nonconvex(c0, eta, smoothness, sigma, k),
            LsiModel::Convex { c0 } => lsi_convex(c0, eta, sigma, k),
            LsiModel::StronglyConvex { c0, m } => lsi_strongly_convex(c0, eta, m, sigma, k),
            LsiModel::UniversalCompact { radius, lipschitz } => {
                lsi_universal_compact(radius, eta, lipschitz, sigma)
            }
        }
    }
}

impl std::str::FromStr for LsiRegime {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "nonconvex" => Ok(LsiRegime::Nonconvex),
            "convex" => Ok(LsiRegime::Convex),
            "strongly_convex" => Ok(LsiRegime::StronglyConvex),
            "universal_compact" => Ok(LsiRegime::UniversalCompact),
            other => Err(Error::parse(
                "lsi regime",
                format!("unknown regime {other:?}"),
            )),
        }
    }
}
