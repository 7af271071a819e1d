//! Learning/retraining and unlearning/retraining divergence bounds.

use serde::{Deserialize, Serialize};

use super::lsi::LsiSchedule;
use super::{require_nonnegative, require_positive, BoundSource, DataPartition, DivergenceBound};
use crate::model::LossProfile;
use crate::pngd::HyperParams;
use crate::{Error, Result};

/// Maximal gap between the gradient updates on the retain set and on the
/// full data: `2 M eta n_forget / (n_pub + n_priv)`.
pub fn gradient_sensitivity(eta: f64, lipschitz: f64, part: &DataPartition) -> Result<f64> {
    require_positive("eta", eta)?;
    require_positive("M", lipschitz)?;
    part.validate()?;
    Ok(2.0 * lipschitz * eta * part.n_forget as f64 / part.n_total() as f64)
}

/// Summation range of the learning/retraining bound.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SumRange {
    /// `sum_{t=1}^{T-1} prod_{t'=t}^{T-1} h(t')`.
    #[default]
    Interior,
    /// `sum_{t=0}^{T} prod_{t'=t}^{T} h(t')`, every step of the unrolled
    /// recurrence.
    Full,
}

/// `sum_t prod_{t'>=t} (1 + eta sigma^2 / C_t')^{-1}` over `range`,
/// accumulated in log space.
pub(crate) fn contraction_sum(
    schedule: &LsiSchedule,
    t: usize,
    eta: f64,
    sigma: f64,
    range: SumRange,
) -> Result<f64> {
    let (lo, hi) = match range {
        SumRange::Interior => {
            if t < 2 {
                return Ok(0.0);
            }
            (1, t - 1)
        }
        SumRange::Full => (0, t),
    };
    if schedule.horizon() <= hi {
        return Err(Error::domain(format!(
            "LSI schedule has {} constants, need index {hi}",
            schedule.horizon()
        )));
    }
    let s2 = sigma * sigma;
    let mut log_prod = 0.0;
    let mut total = 0.0;
    for tp in (lo..=hi).rev() {
        let c = schedule.at(tp).expect("horizon checked");
        log_prod -= (eta * s2 / c).ln_1p();
        total += log_prod.exp();
    }
    Ok(total)
}

/// Upper bound on `D_alpha(pi_R^T || pi_L^T)`:
/// `alpha * 2 M^2 eta^2 n_f^2 / ((n_pub + n_priv)^2 sigma^2) * sum prod h`.
pub fn bound_learn_retrain(
    alpha: f64,
    profile: &LossProfile,
    hp: &HyperParams,
    part: &DataPartition,
    schedule: &LsiSchedule,
    range: SumRange,
) -> Result<DivergenceBound> {
    if !(alpha > 1.0) {
        return Err(Error::domain("alpha must exceed 1"));
    }
    if hp.t < 1 {
        return Err(Error::domain("learning bound needs T >= 1"));
    }
    require_positive("eta", hp.eta)?;
    require_nonnegative("sigma", hp.sigma)?;
    part.validate()?;
    let m_lip = profile.lipschitz;
    let inputs = [
        ("alpha", alpha),
        ("M", m_lip),
        ("eta", hp.eta),
        ("sigma", hp.sigma),
        ("T", hp.t as f64),
        ("n_pub", part.n_pub as f64),
        ("n_priv", part.n_priv as f64),
        ("n_forget", part.n_forget as f64),
    ];
    if part.n_forget == 0 {
        return Ok(DivergenceBound::new(
            0.0,
            alpha,
            BoundSource::LearnRetrain,
            &inputs,
        ));
    }
    if hp.sigma == 0.0 {
        return Ok(DivergenceBound::new(
            f64::INFINITY,
            alpha,
            BoundSource::LearnRetrain,
            &inputs,
        ));
    }
    let sum = contraction_sum(schedule, hp.t, hp.eta, hp.sigma, range)?;
    let ratio = part.n_forget as f64 / part.n_total() as f64;
    let prefactor = 2.0 * (m_lip * hp.eta * ratio).powi(2) / (hp.sigma * hp.sigma);
    Ok(DivergenceBound::new(
        alpha * prefactor * sum,
        alpha,
        BoundSource::LearnRetrain,
        &inputs,
    ))
}

/// Strongly convex closed form of the learning/retraining bound,
/// `4 alpha M^2 n_f^2 (1 - exp(-m eta T)) / (m sigma^2 (n_pub + n_priv)^2)`.
pub fn bound_learn_retrain_strongly_convex(
    alpha: f64,
    profile: &LossProfile,
    eta: f64,
    sigma: f64,
    t: usize,
    part: &DataPartition,
) -> Result<DivergenceBound> {
    if !(alpha > 1.0) {
        return Err(Error::domain("alpha must exceed 1"));
    }
    let m = profile.strong_convexity;
    require_positive("m", m)?;
    require_positive("eta", eta)?;
    require_nonnegative("sigma", sigma)?;
    part.validate()?;
    let inputs = [
        ("alpha", alpha),
        ("M", profile.lipschitz),
        ("m", m),
        ("eta", eta),
        ("sigma", sigma),
        ("T", t as f64),
        ("n_pub", part.n_pub as f64),
        ("n_priv", part.n_priv as f64),
        ("n_forget", part.n_forget as f64),
    ];
    let source = BoundSource::LearnRetrainStronglyConvex;
    if part.n_forget == 0 {
        return Ok(DivergenceBound::new(0.0, alpha, source, &inputs));
    }
    if sigma == 0.0 {
        return Ok(DivergenceBound::new(f64::INFINITY, alpha, source, &inputs));
    }
    let ratio = part.n_forget as f64 / part.n_total() as f64;
    let value =
        4.0 * alpha * (profile.lipschitz * ratio).powi(2) * (-(-m * eta * t as f64).exp_m1())
            / (m * sigma * sigma);
    Ok(DivergenceBound::new(value, alpha, source, &inputs))
}

/// Which contraction drives the unlearning bound.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "regime", rename_all = "snake_case")]
pub enum UnlearnRegime {
    /// `min(prod_k (1 + 2 eta sigma^2/((1+eta L)^2 C_{U,k}))^{-1/alpha},
    /// exp(-2 K sigma^2 eta / (alpha C~)))`. `c_tilde` is the universal
    /// compact constant.
    General {
        schedule: LsiSchedule,
        c_tilde: Option<f64>,
    },
    /// `exp(-2 K sigma^2 eta / (C alpha))`, valid when `C > sigma^2 / m`.
    StronglyConvex { c: f64 },
}

/// Strongly convex per-run decay factor `exp(-2 K sigma^2 eta / (C alpha))`.
pub fn strongly_convex_decay(k: usize, alpha: f64, eta: f64, sigma: f64, c: f64) -> f64 {
    (-2.0 * k as f64 * sigma * sigma * eta / (c * alpha)).exp()
}

fn log_decay(
    k: usize,
    alpha: f64,
    hp: &HyperParams,
    profile: &LossProfile,
    regime: &UnlearnRegime,
) -> Result<f64> {
    let s2 = hp.sigma * hp.sigma;
    match regime {
        UnlearnRegime::StronglyConvex { c } => {
            let m = profile.strong_convexity;
            require_positive("m", m)?;
            require_positive("C", *c)?;
            if *c <= s2 / m {
                return Err(Error::domain(
                    "strongly convex decay requires C > sigma^2 / m",
                ));
            }
            Ok(-2.0 * k as f64 * s2 * hp.eta / (c * alpha))
        }
        UnlearnRegime::General { schedule, c_tilde } => {
            let c_tilde = c_tilde.ok_or_else(|| {
                Error::domain("general unlearning bound requires the universal LSI constant")
            })?;
            require_positive("C~", c_tilde)?;
            if k > 0 && schedule.horizon() <= k {
                return Err(Error::domain(format!(
                    "LSI schedule has {} constants, need index {k}",
                    schedule.horizon()
                )));
            }
            let lift = (1.0 + hp.eta * profile.smoothness).powi(2);
            let log_product: f64 = (1..=k)
                .map(|i| {
                    let c = schedule.at(i).expect("horizon checked");
                    -(2.0 * hp.eta * s2 / (lift * c)).ln_1p() / alpha
                })
                .sum();
            let log_exp = -2.0 * k as f64 * s2 * hp.eta / (alpha * c_tilde);
            Ok(log_product.min(log_exp))
        }
    }
}

/// Upper bound on `D_alpha(pi_R^{T+K} || pi_U^K)` given the initial
/// learning/retraining divergence.
pub fn bound_unlearn(
    d_init: &DivergenceBound,
    k: usize,
    alpha: f64,
    hp: &HyperParams,
    profile: &LossProfile,
    regime: &UnlearnRegime,
) -> Result<DivergenceBound> {
    if !(alpha > 1.0) {
        return Err(Error::domain("alpha must exceed 1"));
    }
    require_positive("eta", hp.eta)?;
    require_nonnegative("sigma", hp.sigma)?;
    require_nonnegative("D_init", d_init.value)?;
    let log_factor = log_decay(k, alpha, hp, profile, regime)?;
    let source = match regime {
        UnlearnRegime::StronglyConvex { .. } => BoundSource::UnlearnStronglyConvex,
        UnlearnRegime::General { .. } => BoundSource::Unlearn,
    };
    let value = if d_init.value == 0.0 {
        0.0
    } else {
        d_init.value * log_factor.exp()
    };
    Ok(DivergenceBound::new(
        value,
        alpha,
        source,
        &[
            ("D_init", d_init.value),
            ("K", k as f64),
            ("alpha", alpha),
            ("eta", hp.eta),
            ("sigma", hp.sigma),
            ("log_factor", log_factor),
        ],
    ))
}

/// Smallest `K <= k_max` whose unlearning bound is at most `epsilon`, found
/// by forward evaluation. `None` when no such `K` exists in range.
pub fn min_unlearn_steps(
    d_init: &DivergenceBound,
    epsilon: f64,
    k_max: usize,
    alpha: f64,
    hp: &HyperParams,
    profile: &LossProfile,
    regime: &UnlearnRegime,
) -> Result<Option<usize>> {
    require_positive("epsilon", epsilon)?;
    for k in 0..=k_max {
        if bound_unlearn(d_init, k, alpha, hp, profile, regime)?.value <= epsilon {
            return Ok(Some(k));
        }
    }
    Ok(None)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bounds::lsi::{lsi_nonconvex, lsi_universal_compact};
    use crate::model::derive_profile;
    use approx::assert_relative_eq;

    fn hp(t: usize, sigma: f64) -> HyperParams {
        HyperParams {
            eta: 0.1,
            sigma,
            t,
            k: 0,
            radius: 1.0,
            alpha: 2.0,
        }
    }

    #[test]
    fn sensitivity_examples() {
        let p = DataPartition::new(0, 100, 0).unwrap();
        assert_eq!(gradient_sensitivity(0.1, 1.0, &p).unwrap(), 0.0);
        let p = DataPartition::new(40, 60, 10).unwrap();
        assert_relative_eq!(
            gradient_sensitivity(0.1, 1.0, &p).unwrap(),
            0.02,
            epsilon = 1e-15
        );
        assert!(gradient_sensitivity(0.0, 1.0, &p).is_err());
    }

    #[test]
    fn learn_retrain_degenerate_cases() {
        let profile = derive_profile(0.1, 1.0).unwrap();
        let sched = lsi_nonconvex(1.0, 0.1, profile.smoothness, 1.0, 20).unwrap();
        let none = DataPartition::new(10, 50, 0).unwrap();
        let b = bound_learn_retrain(
            2.0,
            &profile,
            &hp(10, 1.0),
            &none,
            &sched,
            SumRange::Interior,
        )
        .unwrap();
        assert_eq!(b.value, 0.0);
        let some = DataPartition::new(10, 50, 5).unwrap();
        let b = bound_learn_retrain(
            2.0,
            &profile,
            &hp(1, 1.0),
            &some,
            &sched,
            SumRange::Interior,
        )
        .unwrap();
        assert_eq!(b.value, 0.0);
        let b = bound_learn_retrain(
            2.0,
            &profile,
            &hp(5, 0.0),
            &some,
            &sched,
            SumRange::Interior,
        )
        .unwrap();
        assert!(b.unbounded);
        assert!(bound_learn_retrain(
            2.0,
            &profile,
            &hp(0, 1.0),
            &some,
            &sched,
            SumRange::Interior
        )
        .is_err());
        assert!(bound_learn_retrain(
            2.0,
            &profile,
            &hp(50, 1.0),
            &some,
            &sched,
            SumRange::Interior
        )
        .is_err());
    }

    #[test]
    fn learn_retrain_brute_force() {
        let profile = derive_profile(0.1, 1.0).unwrap();
        let (eta, sigma, t) = (0.1, 0.8, 7);
        let sched = lsi_nonconvex(1.0, eta, profile.smoothness, sigma, t).unwrap();
        let part = DataPartition::new(20, 80, 8).unwrap();
        let h = |tp: usize| 1.0 / (1.0 + eta * sigma * sigma / sched.constants[tp]);
        let mut sum = 0.0;
        for start in 1..t {
            sum += (start..t).map(h).product::<f64>();
        }
        let oracle = 2.0 * 2.0 * (eta * 8.0 / 100.0f64).powi(2) / (sigma * sigma) * sum;
        let b = bound_learn_retrain(
            2.0,
            &profile,
            &hp(t, sigma),
            &part,
            &sched,
            SumRange::Interior,
        )
        .unwrap();
        assert_relative_eq!(b.value, oracle, max_relative = 1e-13);

        let mut wide = 0.0;
        for start in 0..=t {
            wide += (start..=t).map(h).product::<f64>();
        }
        let b = bound_learn_retrain(2.0, &profile, &hp(t, sigma), &part, &sched, SumRange::Full)
            .unwrap();
        assert_relative_eq!(b.value, oracle / sum * wide, max_relative = 1e-13);
    }

    #[test]
    fn learn_retrain_quadratic_in_total() {
        let profile = derive_profile(0.1, 1.0).unwrap();
        let sched = lsi_universal_compact(1.0, 0.1, 1.0, 1.0).unwrap();
        let a = DataPartition::new(300, 500, 40).unwrap();
        let b = DataPartition::new(600, 500, 40).unwrap();
        let ba = bound_learn_retrain(2.0, &profile, &hp(30, 1.0), &a, &sched, SumRange::Interior)
            .unwrap();
        let bb = bound_learn_retrain(2.0, &profile, &hp(30, 1.0), &b, &sched, SumRange::Interior)
            .unwrap();
        let expected = (800.0f64 / 1100.0).powi(2);
        assert!((bb.value / ba.value - expected).abs() < 1e-12);
    }

    #[test]
    fn unlearn_examples() {
        let profile = derive_profile(0.5, 1.0).unwrap();
        let h = hp(10, 0.5);
        let d0 = DivergenceBound::user_supplied(3.0, 2.0).unwrap();
        let regime = UnlearnRegime::StronglyConvex { c: 1.0 };
        assert_eq!(
            bound_unlearn(&d0, 0, 2.0, &h, &profile, &regime)
                .unwrap()
                .value,
            3.0
        );
        let zero = DivergenceBound::user_supplied(0.0, 2.0).unwrap();
        assert_eq!(
            bound_unlearn(&zero, 7, 2.0, &h, &profile, &regime)
                .unwrap()
                .value,
            0.0
        );

        let f = |k| strongly_convex_decay(k, 2.0, h.eta, h.sigma, 1.0);
        assert!((f(10) - f(5) * f(5)).abs() < 1e-15);
        let b = bound_unlearn(&d0, 5, 2.0, &h, &profile, &regime).unwrap();
        assert_relative_eq!(b.value, 3.0 * f(5), max_relative = 1e-14);
    }

    #[test]
    fn unlearn_requires_premises() {
        let profile = derive_profile(0.5, 1.0).unwrap();
        let h = hp(10, 1.0);
        let d0 = DivergenceBound::user_supplied(1.0, 2.0).unwrap();
        // C must exceed sigma^2/m = 2
        let bad = UnlearnRegime::StronglyConvex { c: 1.5 };
        assert!(bound_unlearn(&d0, 3, 2.0, &h, &profile, &bad).is_err());
        let sched = lsi_nonconvex(1.0, h.eta, profile.smoothness, h.sigma, 5).unwrap();
        let missing = UnlearnRegime::General {
            schedule: sched,
            c_tilde: None,
        };
        assert!(bound_unlearn(&d0, 3, 2.0, &h, &profile, &missing).is_err());
    }

    #[test]
    fn general_unlearn_is_min_of_two_routes() {
        let profile = derive_profile(0.1, 1.0).unwrap();
        let h = hp(10, 1.0);
        let sched = lsi_nonconvex(1.0, h.eta, profile.smoothness, h.sigma, 12).unwrap();
        let c_tilde = lsi_universal_compact(1.0, h.eta, 1.0, h.sigma)
            .unwrap()
            .constants[0];
        let regime = UnlearnRegime::General {
            schedule: sched.clone(),
            c_tilde: Some(c_tilde),
        };
        let d0 = DivergenceBound::user_supplied(2.0, 2.0).unwrap();
        let k = 12;
        let lift = (1.0 + h.eta * profile.smoothness).powi(2);
        let product: f64 = (1..=k)
            .map(|i| (1.0 + 2.0 * h.eta / (lift * sched.constants[i])).powf(-0.5))
            .product();
        let expo = (-2.0 * k as f64 * h.eta / (2.0 * c_tilde)).exp();
        let b = bound_unlearn(&d0, k, 2.0, &h, &profile, &regime).unwrap();
        assert_relative_eq!(b.value, 2.0 * product.min(expo), max_relative = 1e-12);

        let mut prev = f64::INFINITY;
        for k in 0..=12 {
            let v = bound_unlearn(&d0, k, 2.0, &h, &profile, &regime)
                .unwrap()
                .value;
            assert!(v <= prev);
            prev = v;
        }
        let at = |k| {
            bound_unlearn(&d0, k, 2.0, &h, &profile, &regime)
                .unwrap()
                .value
        };
        let eps = 0.5 * (at(5) + at(6));
        let mk = min_unlearn_steps(&d0, eps, 12, 2.0, &h, &profile, &regime).unwrap();
        assert_eq!(mk, Some(6));
        assert_eq!(
            min_unlearn_steps(&d0, 1e-9, 12, 2.0, &h, &profile, &regime).unwrap(),
            None
        );
    }
}
