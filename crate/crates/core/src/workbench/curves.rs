//! CSV emitters for the required-noise curve and the divergence grid.

use serde::{Deserialize, Serialize};

use super::{DataSource, ExperimentConfig, SyntheticShiftSpec};
use crate::bounds::{
    bound_learn_retrain_strongly_convex, bound_unlearn, lsi_strongly_convex, required_sigma,
    DataPartition, NoiseMode, NoiseRegime, UnlearnRegime,
};
use crate::model::derive_profile;
use crate::noise::derive_seed;
use crate::pngd::{sample_distribution, HyperParams, Pipeline};
use crate::renyi::estimate_renyi_sets;
use crate::workbench::generate_synthetic;
use crate::{Error, Result};

/// Required-noise curve over forget fractions, strongly convex closed form.
/// Defaults: `lambda = 0.0119`, `T = 10^4`, `n_priv = 3000`, `M = 1`,
/// `alpha = 2`, `eta = 1/L`, `eps = 1`, `n_pub` in {1000, 3000, 10000}.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseCurveConfig {
    pub lambda: f64,
    pub t: usize,
    pub n_priv: usize,
    pub clip: f64,
    pub alpha: f64,
    /// Defaults to `1 / L`.
    pub eta: Option<f64>,
    pub epsilon: f64,
    pub n_pub: Vec<usize>,
    /// Forget fractions in `[0, 1]`; each is rounded to a whole forget count.
    pub c_grid: Vec<f64>,
}

impl Default for NoiseCurveConfig {
    fn default() -> Self {
        Self {
            lambda: 0.0119,
            t: 10_000,
            n_priv: 3000,
            clip: 1.0,
            alpha: 2.0,
            eta: None,
            epsilon: 1.0,
            n_pub: vec![1000, 3000, 10_000],
            c_grid: (0..=20).map(|i| i as f64 / 20.0).collect(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseCurveRow {
    /// Realised forget fraction `n_forget / n_priv`.
    pub c: f64,
    pub n_forget: usize,
    pub sigma_sym: f64,
    /// One entry per configured `n_pub`.
    pub sigma_asym: Vec<f64>,
}

pub fn noise_curve_rows(cfg: &NoiseCurveConfig) -> Result<Vec<NoiseCurveRow>> {
    let profile = derive_profile(cfg.lambda, cfg.clip)?;
    let eta = cfg.eta.unwrap_or(1.0 / profile.smoothness);
    if cfg.n_priv == 0 {
        return Err(Error::domain("n_priv must be positive"));
    }
    let regime = NoiseRegime::StronglyConvexClosedForm;
    let mut rows = Vec::with_capacity(cfg.c_grid.len());
    for &c in &cfg.c_grid {
        if !(0.0..=1.0).contains(&c) {
            return Err(Error::domain(format!("forget fraction {c} outside [0, 1]")));
        }
        let n_forget = (c * cfg.n_priv as f64).round() as usize;
        let sigma = |n_pub: usize, mode| -> Result<f64> {
            let part = DataPartition::new(n_pub, cfg.n_priv, n_forget)?;
            Ok(required_sigma(
                cfg.alpha,
                &profile,
                &part,
                cfg.epsilon,
                cfg.t,
                eta,
                mode,
                &regime,
            )?
            .sigma)
        };
        let sigma_sym = sigma(0, NoiseMode::Symmetric)?;
        let sigma_asym = cfg
            .n_pub
            .iter()
            .map(|&n| sigma(n, NoiseMode::Asymmetric))
            .collect::<Result<Vec<_>>>()?;
        rows.push(NoiseCurveRow {
            c: n_forget as f64 / cfg.n_priv as f64,
            n_forget,
            sigma_sym,
            sigma_asym,
        });
    }
    Ok(rows)
}

/// CSV with a `#` metadata header, then `c,n_forget,sigma_sym,sigma_asym_npub_<n>...`.
pub fn emit_fig3_curve(cfg: &NoiseCurveConfig) -> Result<String> {
    let rows = noise_curve_rows(cfg)?;
    let profile = derive_profile(cfg.lambda, cfg.clip)?;
    let eta = cfg.eta.unwrap_or(1.0 / profile.smoothness);
    let mut out = format!(
        "# lambda={} T={} n_priv={} M={} alpha={} eta={} epsilon={} regime=strongly_convex_closed_form\n",
        cfg.lambda, cfg.t, cfg.n_priv, cfg.clip, cfg.alpha, eta, cfg.epsilon
    );
    out.push_str("c,n_forget,sigma_sym");
    for n in &cfg.n_pub {
        out.push_str(&format!(",sigma_asym_npub_{n}"));
    }
    out.push('\n');
    for r in &rows {
        out.push_str(&format!("{},{},{}", r.c, r.n_forget, r.sigma_sym));
        for s in &r.sigma_asym {
            out.push_str(&format!(",{s}"));
        }
        out.push('\n');
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DivergenceCurveRow {
    pub n_pub: usize,
    pub k: usize,
    pub estimate: f64,
    pub std_error: f64,
    pub seed_min: f64,
    pub seed_max: f64,
    /// Strongly convex unlearning bound, infinite when its premise fails.
    pub bound: f64,
}

/// Estimated `D_alpha(pi_R^{T+K} || pi_U^K)` over the `sweep.n_pub` x
/// `sweep.k` grid. Only the public count varies; the rest of the synthetic
/// spec is held fixed.
pub fn divergence_curve_rows(cfg: &ExperimentConfig) -> Result<Vec<DivergenceCurveRow>> {
    let DataSource::Synthetic(base) = &cfg.data else {
        return Err(Error::domain("divergence curves need synthetic data"));
    };
    if cfg.sweep.n_pub.is_empty() || cfg.sweep.k.is_empty() {
        return Err(Error::domain(
            "divergence curves need non-empty n_pub and k grids",
        ));
    }
    let profile = cfg.train.profile()?;
    let est_cfg = cfg.estimator.config(cfg.train.alpha);
    let mut rows = Vec::new();
    for &n_pub in &cfg.sweep.n_pub {
        let synth = generate_synthetic(&SyntheticShiftSpec {
            n_pub,
            ..base.clone()
        })?;
        let ds = &synth.dataset;
        let part = DataPartition::of(ds);
        for &k in &cfg.sweep.k {
            let hp = HyperParams {
                k,
                ..cfg.train.hyper()?
            };
            let seed = derive_seed(cfg.seed, &format!("curve-{n_pub}-{k}"));
            let draw = |p: Pipeline| {
                sample_distribution(
                    ds,
                    p,
                    cfg.samples,
                    &hp,
                    &profile,
                    derive_seed(seed, &p.to_string()),
                )
            };
            let (retrain, unlearn) = (draw(Pipeline::Retrain)?, draw(Pipeline::Unlearn)?);
            let est = estimate_renyi_sets(
                &retrain,
                &unlearn,
                &cfg.estimator.spec(retrain.dim()),
                &est_cfg,
            )?;
            let bound = strongly_convex_unlearn_bound(
                &hp,
                cfg.train.c0,
                &part,
                cfg.train.lambda,
                cfg.train.clip,
            )?;
            let (lo, hi) = est
                .per_seed
                .iter()
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), &v| {
                    (l.min(v), h.max(v))
                });
            rows.push(DivergenceCurveRow {
                n_pub,
                k,
                estimate: est.value,
                std_error: est.std_error,
                seed_min: lo,
                seed_max: hi,
                bound,
            });
        }
    }
    Ok(rows)
}

/// Strongly convex unlearning bound at the run's `K`, or `inf` when the
/// decay premise `C_T > sigma^2 / m` fails.
pub fn strongly_convex_unlearn_bound(
    hp: &HyperParams,
    c0: f64,
    part: &DataPartition,
    lambda: f64,
    clip: f64,
) -> Result<f64> {
    let profile = derive_profile(lambda, clip)?;
    let m = profile.strong_convexity;
    let d_init =
        bound_learn_retrain_strongly_convex(hp.alpha, &profile, hp.eta, hp.sigma, hp.t, part)?;
    let c_t = lsi_strongly_convex(c0, hp.eta, m, hp.sigma, hp.t)?.constants[hp.t];
    if c_t <= hp.sigma * hp.sigma / m {
        return Ok(f64::INFINITY);
    }
    Ok(bound_unlearn(
        &d_init,
        hp.k,
        hp.alpha,
        hp,
        &profile,
        &UnlearnRegime::StronglyConvex { c: c_t },
    )?
    .value)
}

pub fn divergence_curve_csv(rows: &[DivergenceCurveRow]) -> String {
    let mut out = String::from("n_pub,k,estimate,std_error,seed_min,seed_max,bound_unlearn\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            r.n_pub, r.k, r.estimate, r.std_error, r.seed_min, r.seed_max, r.bound
        ));
    }
    out
}

pub fn emit_divergence_curve(cfg: &ExperimentConfig) -> Result<String> {
    Ok(divergence_curve_csv(&divergence_curve_rows(cfg)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn zero_forget_row_is_zero_and_ratio_holds() {
        let cfg = NoiseCurveConfig::default();
        let rows = noise_curve_rows(&cfg).unwrap();
        assert_eq!(rows[0].c, 0.0);
        assert_eq!(rows[0].sigma_sym, 0.0);
        assert!(rows[0].sigma_asym.iter().all(|&s| s == 0.0));
        for r in &rows[1..] {
            for (s, &n_pub) in r.sigma_asym.iter().zip(&cfg.n_pub) {
                let ratio = cfg.n_priv as f64 / (n_pub + cfg.n_priv) as f64;
                assert_relative_eq!(*s, r.sigma_sym * ratio, max_relative = 1e-12);
            }
        }
    }

    #[test]
    fn header_carries_configuration() {
        let csv = emit_fig3_curve(&NoiseCurveConfig::default()).unwrap();
        let first = csv.lines().next().unwrap();
        assert!(first.starts_with('#'));
        for key in [
            "lambda=0.0119",
            "T=10000",
            "n_priv=3000",
            "M=1",
            "alpha=2",
            "epsilon=1",
        ] {
            assert!(first.contains(key), "{key}");
        }
        assert_eq!(
            csv.lines().nth(1).unwrap(),
            "c,n_forget,sigma_sym,sigma_asym_npub_1000,sigma_asym_npub_3000,sigma_asym_npub_10000"
        );
        assert_eq!(csv.lines().count(), 2 + 21);
    }

    #[test]
    fn rejects_bad_fraction() {
        let cfg = NoiseCurveConfig {
            c_grid: vec![1.5],
            ..Default::default()
        };
        assert!(noise_curve_rows(&cfg).is_err());
    }
}
