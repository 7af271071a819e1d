//! Private-data risk after unlearning under public/private distribution mismatch.

use serde::{Deserialize, Serialize};

use super::require_nonnegative;
use crate::ext::extended_f64;
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MismatchBound {
    /// `exp(n_pub / (n_pub + n_retain) * D_inf)`, at least 1.
    #[serde(with = "extended_f64")]
    pub mismatch_penalty: f64,
    /// `M * diam * sqrt(D_alpha / 2)`.
    #[serde(with = "extended_f64")]
    pub approx_error: f64,
    #[serde(with = "extended_f64")]
    pub total: f64,
    #[serde(with = "extended_f64")]
    pub d_infty: f64,
    pub public_fraction: f64,
    pub base_risk: f64,
    pub lipschitz: f64,
    pub diameter: f64,
    #[serde(with = "extended_f64")]
    pub d_alpha: f64,
}

/// `total = exp(w D_inf) * base_risk + M diam sqrt(D_alpha / 2)` with
/// `w = n_pub / (n_pub + n_retain)`. For the projection ball, `diam = 2R`.
pub fn generalization_bound(
    d_infty: f64,
    n_pub: usize,
    n_retain: usize,
    base_risk: f64,
    lipschitz: f64,
    diameter: f64,
    d_alpha: f64,
) -> Result<MismatchBound> {
    require_nonnegative("D_inf", d_infty)?;
    require_nonnegative("D_alpha", d_alpha)?;
    require_nonnegative("base risk", base_risk)?;
    require_nonnegative("M", lipschitz)?;
    require_nonnegative("diameter", diameter)?;
    if n_pub + n_retain == 0 {
        return Err(Error::domain("n_pub + n_retain must be positive"));
    }
    let w = n_pub as f64 / (n_pub + n_retain) as f64;
    // w = 0 with an infinite D_inf still means no public data carries weight
    let penalty = if w == 0.0 { 1.0 } else { (w * d_infty).exp() };
    let approx_error = lipschitz * diameter * (0.5 * d_alpha).sqrt();
    Ok(MismatchBound {
        mismatch_penalty: penalty,
        approx_error,
        total: penalty * base_risk + approx_error,
        d_infty,
        public_fraction: w,
        base_risk,
        lipschitz,
        diameter,
        d_alpha,
    })
}

fn check_distribution(name: &str, p: &[f64]) -> Result<()> {
    if p.iter().any(|&v| !(v >= 0.0) || !v.is_finite()) {
        return Err(Error::domain(format!(
            "{name} has negative or non-finite mass"
        )));
    }
    let s: f64 = p.iter().sum();
    if (s - 1.0).abs() > 1e-9 {
        return Err(Error::domain(format!("{name} sums to {s}, not 1")));
    }
    Ok(())
}

/// `log max_i p_i / q_i` over the support of `p`; `+inf` when `p` puts mass
/// where `q` has none.
pub fn dinfty_discrete(p: &[f64], q: &[f64]) -> Result<f64> {
    if p.len() != q.len() {
        return Err(Error::Dimension {
            expected: p.len(),
            found: q.len(),
        });
    }
    if p.is_empty() {
        return Err(Error::domain("empty support"));
    }
    check_distribution("p", p)?;
    check_distribution("q", q)?;
    let mut worst = f64::NEG_INFINITY;
    for (&pi, &qi) in p.iter().zip(q) {
        if pi == 0.0 {
            continue;
        }
        if qi == 0.0 {
            return Ok(f64::INFINITY);
        }
        worst = worst.max(pi / qi);
    }
    Ok(worst.ln())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn bound_examples() {
        let b = generalization_bound(0.0, 10, 30, 0.4, 1.0, 2.0, 0.0).unwrap();
        assert_eq!(b.total, 0.4);
        let b = generalization_bound(0.0, 10, 30, 0.0, 1.0, 2.0, 2.0).unwrap();
        assert_relative_eq!(b.approx_error, 2.0, epsilon = 1e-15);
        let b = generalization_bound(0.7, 1_000_000_000, 1, 1.0, 1.0, 2.0, 0.0).unwrap();
        assert_relative_eq!(b.mismatch_penalty, 0.7f64.exp(), max_relative = 1e-8);
        assert!(generalization_bound(0.1, 0, 0, 1.0, 1.0, 2.0, 0.0).is_err());
        assert!(generalization_bound(-0.1, 1, 0, 1.0, 1.0, 2.0, 0.0).is_err());
    }

    #[test]
    fn bound_is_monotone_in_each_input() {
        let f = |di: f64, da: f64, br: f64| {
            generalization_bound(di, 30, 70, br, 1.0, 2.0, da)
                .unwrap()
                .total
        };
        let grid = [0.0, 0.1, 0.5, 1.0, 3.0];
        for w in grid.windows(2) {
            assert!(f(w[1], 0.3, 0.2) >= f(w[0], 0.3, 0.2));
            assert!(f(0.3, w[1], 0.2) >= f(0.3, w[0], 0.2));
            assert!(f(0.3, 0.2, w[1]) >= f(0.3, 0.2, w[0]));
        }
    }

    #[test]
    fn dinfty_examples() {
        let p = [0.2, 0.3, 0.5];
        assert_eq!(dinfty_discrete(&p, &p).unwrap(), 0.0);
        let v = dinfty_discrete(&[0.5, 0.5], &[0.25, 0.75]).unwrap();
        assert_relative_eq!(v, std::f64::consts::LN_2, epsilon = 1e-15);
        assert_eq!(
            dinfty_discrete(&[0.5, 0.5], &[1.0, 0.0]).unwrap(),
            f64::INFINITY
        );
        assert_eq!(
            dinfty_discrete(&[1.0, 0.0], &[0.5, 0.5]).unwrap(),
            2f64.ln()
        );
        assert!(dinfty_discrete(&[0.5, 0.6], &[0.5, 0.5]).is_err());
        assert!(dinfty_discrete(&[1.0], &[0.5, 0.5]).is_err());
    }

    /// Exhaustive grid over 2- and 3-point distributions: mixing the public
    /// distribution with the private one at weight `1 - w` shrinks `D_inf` at
    /// least as fast as the importance-weighting step assumes.
    #[test]
    fn mixture_contracts_dinfty() {
        let steps: Vec<f64> = (1..10).map(|i| i as f64 / 10.0).collect();
        let mut cases: Vec<(Vec<f64>, Vec<f64>)> = Vec::new();
        for &a in &steps {
            for &b in &steps {
                cases.push((vec![a, 1.0 - a], vec![b, 1.0 - b]));
            }
        }
        for &a in &steps {
            for &a2 in &steps {
                for &b in &steps {
                    for &b2 in &steps {
                        if a + a2 < 1.0 && b + b2 < 1.0 {
                            cases.push((vec![a, a2, 1.0 - a - a2], vec![b, b2, 1.0 - b - b2]));
                        }
                    }
                }
            }
        }
        for (p, q) in &cases {
            let base = dinfty_discrete(p, q).unwrap();
            for &w in &steps {
                let mix: Vec<f64> = p
                    .iter()
                    .zip(q)
                    .map(|(pi, qi)| w * qi + (1.0 - w) * pi)
                    .collect();
                let total: f64 = mix.iter().sum();
                let mix: Vec<f64> = mix.iter().map(|v| v / total).collect();
                let d = dinfty_discrete(p, &mix).unwrap();
                assert!(
                    d <= w * base + 1e-12,
                    "p={p:?} q={q:?} w={w}: {d} > {}",
                    w * base
                );
            }
        }
    }
}
