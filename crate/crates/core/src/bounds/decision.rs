//! When is unlearning cheaper than retraining (strongly convex losses).

use serde::{Deserialize, Serialize};

use super::divergence::bound_learn_retrain_strongly_convex;
use super::{require_nonnegative, require_positive, DataPartition};
use crate::ext::extended_f64;
use crate::model::LossProfile;
use crate::Result;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecisionReport {
    /// `(C alpha / (2 sigma^2 eta)) log(4 alpha M^2 n_f^2 / (m eps sigma^2 n^2))`;
    /// `-inf` when the log argument is not positive.
    #[serde(with = "extended_f64")]
    pub lhs: f64,
    /// `T - log(1 - exp(-m eta T))`.
    #[serde(with = "extended_f64")]
    pub rhs: f64,
    pub unlearn_preferred: bool,
    /// Smallest K with `D_init exp(-2 K sigma^2 eta / (C alpha)) <= eps`.
    pub min_k: u64,
    /// Strongly convex learning/retraining bound used for `min_k`.
    #[serde(with = "extended_f64")]
    pub d_init: f64,
}

#[allow(clippy::too_many_arguments)]
pub fn decide_unlearn_vs_retrain(
    c: f64,
    alpha: f64,
    sigma: f64,
    eta: f64,
    lipschitz: f64,
    m: f64,
    epsilon: f64,
    part: &DataPartition,
    t: usize,
) -> Result<DecisionReport> {
    require_positive("C", c)?;
    require_positive("sigma", sigma)?;
    require_positive("eta", eta)?;
    require_positive("M", lipschitz)?;
    require_positive("m", m)?;
    require_positive("epsilon", epsilon)?;
    part.validate()?;

    let n = part.n_total() as f64;
    let nf = part.n_forget as f64;
    let s2 = sigma * sigma;
    let rate = c * alpha / (2.0 * s2 * eta);
    let arg = 4.0 * alpha * lipschitz * lipschitz * nf * nf / (m * epsilon * s2 * n * n);
    let lhs = if arg > 0.0 {
        rate * arg.ln()
    } else {
        f64::NEG_INFINITY
    };
    let rhs = t as f64 - (-(-m * eta * t as f64).exp_m1()).ln();

    let profile = LossProfile::new(lipschitz, m, m, m)?;
    let d_init = bound_learn_retrain_strongly_convex(alpha, &profile, eta, sigma, t, part)?.value;
    let min_k = min_k_exponential(d_init, epsilon, rate);

    Ok(DecisionReport {
        lhs,
        rhs,
        unlearn_preferred: lhs < rhs,
        min_k,
        d_init,
    })
}

/// Smallest integer K with `d_init * exp(-K / rate) <= epsilon`.
fn min_k_exponential(d_init: f64, epsilon: f64, rate: f64) -> u64 {
    if d_init <= epsilon {
        return 0;
    }
    let meets = |k: u64| d_init * (-(k as f64) / rate).exp() <= epsilon;
    let mut k = (rate * (d_init / epsilon).ln()).ceil().max(0.0) as u64;
    // the closed form can land one off after rounding
    while k > 0 && meets(k - 1) {
        k -= 1;
    }
    while !meets(k) {
        k += 1;
    }
    k
}

/// Public-to-private ratio needed for unlearning to beat retraining when T
/// is small.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RatioThreshold {
    /// Minimal `n_pub / n_priv`, clamped at 0.
    pub value: f64,
    /// `Const * T^beta * eps^{-1/2} * c`, the right side of
    /// `n_pub / n_priv + 1 >= ...`.
    pub plus_one_term: f64,
    pub beta: f64,
    pub constant: f64,
    /// `2 sigma^2 eta T / (C alpha)`; the derivation treats its exponential as 1.
    pub neglected_exponent: f64,
    /// `m eta T`; the derivation linearises `1 - exp(-m eta T)`.
    pub taylor_argument: f64,
    /// Both approximations are accurate to about 10%.
    pub within_validity: bool,
}

/// Threshold from `n_pub/n_priv >= Const T^beta eps^{-1/2} c - 1` with
/// `beta = sigma^2 eta / (C alpha)` and `Const = 2 sqrt(alpha) M (m eta)^beta / m`.
#[allow(clippy::too_many_arguments)]
pub fn public_ratio_threshold(
    alpha: f64,
    sigma: f64,
    eta: f64,
    c: f64,
    lipschitz: f64,
    m: f64,
    epsilon: f64,
    t: usize,
    forget_fraction: f64,
) -> Result<RatioThreshold> {
    require_positive("alpha", alpha)?;
    require_positive("sigma", sigma)?;
    require_positive("eta", eta)?;
    require_positive("C", c)?;
    require_positive("M", lipschitz)?;
    require_positive("m", m)?;
    require_positive("epsilon", epsilon)?;
    require_nonnegative("forget fraction", forget_fraction)?;
    let beta = sigma * sigma * eta / (c * alpha);
    let constant = 2.0 * alpha.sqrt() * lipschitz * (m * eta).powf(beta) / m;
    let plus_one_term = constant * (t as f64).powf(beta) / epsilon.sqrt() * forget_fraction;
    let neglected_exponent = 2.0 * beta * t as f64;
    let taylor_argument = m * eta * t as f64;
    Ok(RatioThreshold {
        value: (plus_one_term - 1.0).max(0.0),
        plus_one_term,
        beta,
        constant,
        neglected_exponent,
        taylor_argument,
        within_validity: neglected_exponent <= 0.1 && taylor_argument <= 0.2,
    })
}
