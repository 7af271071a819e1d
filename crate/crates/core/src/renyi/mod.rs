//! Variational Rényi divergence estimation between weight samples.
//!
//! Two objectives are available. The Donsker-Varadhan form
//! `(1/(a-1)) log E_P e^{(a-1) phi} - (1/a) log E_Q e^{a phi}` has supremum
//! `D_a(P||Q) / a` and is the default. The convex-conjugate form is kept as
//! written for comparison; it does not vanish at `P = Q` (its supremum over
//! constants is positive), so estimates made with it carry a calibration
//! record.

mod network;
mod train;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub use network::{
    spectral_normalize, Discriminator, DiscriminatorSpec, Gradients, OutputActivation,
};
pub use train::{
    cc_calibration, estimate_renyi, estimate_renyi_sets, train_discriminator, CcCalibration,
    DivergenceEstimate, EstimatorConfig, TrainedDiscriminator,
};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Objective {
    /// Convex-conjugate objective on strictly negative witnesses.
    Cc,
    /// Donsker-Varadhan objective.
    #[default]
    Dv,
}

impl std::str::FromStr for Objective {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "cc" => Ok(Objective::Cc),
            "dv" => Ok(Objective::Dv),
            other => Err(Error::parse(
                "objective",
                format!("expected cc or dv, got {other:?}"),
            )),
        }
    }
}

impl std::fmt::Display for Objective {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Objective::Cc => "cc",
            Objective::Dv => "dv",
        })
    }
}

impl Objective {
    /// Objective value for witness outputs on P-samples and Q-samples.
    pub fn value(self, on_p: &[f64], on_q: &[f64], alpha: f64) -> Result<f64> {
        match self {
            Objective::Cc => cc_objective(on_q, on_p, alpha),
            Objective::Dv => dv_objective(on_p, on_q, alpha),
        }
    }

    /// Value and its partial derivatives with respect to each output.
    pub fn value_and_grad(
        self,
        on_p: &[f64],
        on_q: &[f64],
        alpha: f64,
    ) -> Result<(f64, Vec<f64>, Vec<f64>)> {
        let value = self.value(on_p, on_q, alpha)?;
        let (gp, gq) = match self {
            Objective::Dv => {
                let gp = softmax(on_p, alpha - 1.0);
                let gq = softmax(on_q, alpha).into_iter().map(|w| -w).collect();
                (gp, gq)
            }
            Objective::Cc => {
                let np = on_p.len() as f64;
                let nq = on_q.len() as f64;
                let gp = on_p
                    .iter()
                    .map(|g| -(-g).powf(-1.0 / alpha) / (alpha * np))
                    .collect();
                (gp, vec![1.0 / nq; on_q.len()])
            }
        };
        Ok((value, gp, gq))
    }

    pub fn output_activation(self) -> OutputActivation {
        match self {
            Objective::Cc => OutputActivation::Polysoftplus,
            Objective::Dv => OutputActivation::Identity,
        }
    }
}

/// `-1/(1-x)` for `x < 0`, `-(1+x)` otherwise. Strictly negative, decreasing,
/// C1 with slope -1 at 0.
pub fn polysoftplus(x: f64) -> f64 {
    if x < 0.0 {
        -1.0 / (1.0 - x)
    } else {
        -(1.0 + x)
    }
}

pub fn polysoftplus_derivative(x: f64) -> f64 {
    if x < 0.0 {
        -1.0 / ((1.0 - x) * (1.0 - x))
    } else {
        -1.0
    }
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha > 1.0) || !alpha.is_finite() {
        return Err(Error::domain(format!(
            "alpha must be finite and exceed 1, got {alpha}"
        )));
    }
    Ok(())
}

/// `mean_Q g + (1/(a-1)) mean_P |g|^{(a-1)/a} + (ln a + 1)/a`, all `g < 0`.
pub fn cc_objective(g_on_q: &[f64], g_on_p: &[f64], alpha: f64) -> Result<f64> {
    check_alpha(alpha)?;
    if g_on_q.is_empty() || g_on_p.is_empty() {
        return Err(Error::domain(
            "objective needs samples from both distributions",
        ));
    }
    if let Some(g) = g_on_q
        .iter()
        .chain(g_on_p)
        .find(|g| !(**g < 0.0) || !g.is_finite())
    {
        return Err(Error::domain(format!(
            "witness values must be finite and negative, got {g}"
        )));
    }
    let q_term = g_on_q.iter().sum::<f64>() / g_on_q.len() as f64;
    let p = (alpha - 1.0) / alpha;
    let p_term = g_on_p.iter().map(|g| (-g).powf(p)).sum::<f64>() / g_on_p.len() as f64;
    Ok(q_term + p_term / (alpha - 1.0) + (alpha.ln() + 1.0) / alpha)
}

/// `(1/(a-1)) log mean_P e^{(a-1) phi} - (1/a) log mean_Q e^{a phi}`.
pub fn dv_objective(phi_on_p: &[f64], phi_on_q: &[f64], alpha: f64) -> Result<f64> {
    check_alpha(alpha)?;
    if phi_on_p.is_empty() || phi_on_q.is_empty() {
        return Err(Error::domain(
            "objective needs samples from both distributions",
        ));
    }
    if phi_on_p.iter().chain(phi_on_q).any(|v| !v.is_finite()) {
        return Err(Error::domain("witness values must be finite"));
    }
    let (mp, lp) = centered_log_mean_exp(phi_on_p, alpha - 1.0);
    let (mq, lq) = centered_log_mean_exp(phi_on_q, alpha);
    // maxima enter unscaled, so constant witnesses give exactly 0
    Ok((mp - mq) + lp / (alpha - 1.0) - lq / alpha)
}

/// `(m, log mean_i exp(s (x_i - m)))` with `m = max x` and `s > 0`, so that
/// `log mean_i exp(s x_i) = s m + second`.
fn centered_log_mean_exp(x: &[f64], s: f64) -> (f64, f64) {
    let max = x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let sum: f64 = x.iter().map(|v| (s * (v - max)).exp()).sum();
    (max, (sum / x.len() as f64).ln())
}

fn softmax(x: &[f64], s: f64) -> Vec<f64> {
    let max = x.iter().map(|v| s * v).fold(f64::NEG_INFINITY, f64::max);
    let w: Vec<f64> = x.iter().map(|v| (s * v - max).exp()).collect();
    let total: f64 = w.iter().sum();
    w.into_iter().map(|v| v / total).collect()
}

/// Closed-form `D_a(N(mu1, var1) || N(mu2, var2))`; `+inf` when
/// `(1-a) var1 + a var2 <= 0`.
pub fn gaussian_renyi_oracle(mu1: f64, var1: f64, mu2: f64, var2: f64, alpha: f64) -> Result<f64> {
    if !(var1 > 0.0) || !(var2 > 0.0) {
        return Err(Error::domain("variances must be positive"));
    }
    if !(alpha > 0.0) || alpha == 1.0 {
        return Err(Error::domain("alpha must be positive and differ from 1"));
    }
    let mixed = (1.0 - alpha) * var1 + alpha * var2;
    if !(mixed > 0.0) {
        return Ok(f64::INFINITY);
    }
    let dm = mu1 - mu2;
    Ok(alpha * dm * dm / (2.0 * mixed)
        + 0.5 * (var2 / var1).ln()
        + (var2 / mixed).ln() / (2.0 * (alpha - 1.0)))
}
