//! Public/private cluster mixtures with a known worst-case density ratio.
//!
//! Both sides draw from the same `K` cluster centres. Private data uses
//! uniform weights; public weights are `(1 - shift) * uniform + shift * e_last`,
//! so every cluster keeps public mass while `shift < 1`. Labels are fixed per
//! cluster, and an exact count of public labels can be flipped.

use rand::seq::index::sample as sample_indices;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::weighted::WeightedIndex;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::bounds::dinfty_discrete;
use crate::ext::extended_f64;
use crate::model::{Dataset, Label, LabeledExample};
use crate::noise::derive_seed;
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticShiftSpec {
    pub d: usize,
    pub n_pub: usize,
    pub n_priv: usize,
    pub n_forget: usize,
    #[serde(default = "default_clusters")]
    pub clusters: usize,
    pub shift: f64,
    #[serde(default)]
    pub label_flip_fraction: f64,
    /// Norm of every cluster centre.
    #[serde(default = "default_center_norm")]
    pub center_norm: f64,
    /// Half-width of the uniform per-coordinate jitter.
    #[serde(default = "default_jitter")]
    pub jitter: f64,
    /// Take the forget set from this cluster's private examples (topping up
    /// at random if it has too few) instead of uniformly.
    #[serde(default)]
    pub forget_cluster: Option<usize>,
    pub seed: u64,
}

fn default_clusters() -> usize {
    4
}

fn default_center_norm() -> f64 {
    1.0
}

fn default_jitter() -> f64 {
    0.25
}

impl SyntheticShiftSpec {
    pub fn validate(&self) -> Result<()> {
        if self.d == 0 || self.clusters == 0 {
            return Err(Error::domain(
                "dimension and cluster count must be positive",
            ));
        }
        if self.n_forget > self.n_priv {
            return Err(Error::domain("forget set cannot exceed the private set"));
        }
        if !(0.0..=1.0).contains(&self.shift) || !(0.0..=1.0).contains(&self.label_flip_fraction) {
            return Err(Error::domain(
                "shift and label flip fraction must lie in [0, 1]",
            ));
        }
        if !(self.center_norm >= 0.0) || !(self.jitter >= 0.0) {
            return Err(Error::domain("centre norm and jitter must be nonnegative"));
        }
        if self.forget_cluster.is_some_and(|k| k >= self.clusters) {
            return Err(Error::domain("forget cluster out of range"));
        }
        Ok(())
    }

    pub fn private_weights(&self) -> Vec<f64> {
        vec![1.0 / self.clusters as f64; self.clusters]
    }

    pub fn public_weights(&self) -> Vec<f64> {
        let k = self.clusters;
        let mut w = vec![(1.0 - self.shift) / k as f64; k];
        w[k - 1] += self.shift;
        w
    }

    pub fn cluster_label(k: usize) -> Label {
        if k.is_multiple_of(2) {
            Label::Pos
        } else {
            Label::Neg
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SyntheticTruth {
    /// `D_inf(P_priv || P_pub)` over cluster weights.
    #[serde(with = "extended_f64")]
    pub d_infty: f64,
    /// Same over the joint (cluster, label) law, public flips included.
    #[serde(with = "extended_f64")]
    pub d_infty_with_labels: f64,
    /// `d_infty` is infinite: the public weights miss a private cluster.
    pub unbounded: bool,
    pub private_weights: Vec<f64>,
    pub public_weights: Vec<f64>,
    pub centers: Vec<Vec<f64>>,
    /// Cluster of every generated example, in dataset order
    /// (public, retained private, forget).
    pub assignments: Vec<usize>,
    pub flipped: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Synthetic {
    pub dataset: Dataset,
    pub truth: SyntheticTruth,
}

pub fn generate_synthetic(spec: &SyntheticShiftSpec) -> Result<Synthetic> {
    spec.validate()?;
    let (d, k) = (spec.d, spec.clusters);
    let mut rng = ChaCha12Rng::seed_from_u64(derive_seed(spec.seed, "synthetic-centers"));
    let centers: Vec<Vec<f64>> = (0..k)
        .map(|_| {
            let z: Vec<f64> = (0..d).map(|_| StandardNormal.sample(&mut rng)).collect();
            let n = crate::model::norm(&z).max(f64::MIN_POSITIVE);
            z.into_iter().map(|v| v * spec.center_norm / n).collect()
        })
        .collect();

    let pw = spec.private_weights();
    let qw = spec.public_weights();
    let mut rng = ChaCha12Rng::seed_from_u64(derive_seed(spec.seed, "synthetic-private"));
    let priv_clusters = draw_clusters(&pw, spec.n_priv, &mut rng)?;
    let mut rng_pub = ChaCha12Rng::seed_from_u64(derive_seed(spec.seed, "synthetic-public"));
    let pub_clusters = draw_clusters(&qw, spec.n_pub, &mut rng_pub)?;

    let jitter = spec.jitter;
    let make = |c: usize, rng: &mut ChaCha12Rng| -> Result<LabeledExample> {
        let x = centers[c]
            .iter()
            .map(|m| {
                if jitter > 0.0 {
                    m + rng.random_range(-jitter..=jitter)
                } else {
                    *m
                }
            })
            .collect();
        LabeledExample::new(x, SyntheticShiftSpec::cluster_label(c))
    };
    let mut private: Vec<LabeledExample> = priv_clusters
        .iter()
        .map(|&c| make(c, &mut rng))
        .collect::<Result<_>>()?;
    let mut public: Vec<LabeledExample> = pub_clusters
        .iter()
        .map(|&c| make(c, &mut rng_pub))
        .collect::<Result<_>>()?;

    let n_flip = (spec.label_flip_fraction * spec.n_pub as f64).floor() as usize;
    let mut rng = ChaCha12Rng::seed_from_u64(derive_seed(spec.seed, "synthetic-flips"));
    for i in sample_indices(&mut rng, spec.n_pub, n_flip) {
        public[i].label = public[i].label.flipped();
    }

    let forget_idx = choose_forget(spec, &priv_clusters)?;
    let mut is_forget = vec![false; spec.n_priv];
    for &i in &forget_idx {
        is_forget[i] = true;
    }
    let mut forget = Vec::with_capacity(forget_idx.len());
    let mut forget_clusters = Vec::with_capacity(forget_idx.len());
    for &i in &forget_idx {
        forget.push(private[i].clone());
        forget_clusters.push(priv_clusters[i]);
    }
    let mut retain_clusters = Vec::with_capacity(spec.n_priv - forget.len());
    let mut keep = is_forget.iter().map(|f| !f);
    private.retain(|_| keep.next().unwrap_or(true));
    for (i, &c) in priv_clusters.iter().enumerate() {
        if !is_forget[i] {
            retain_clusters.push(c);
        }
    }

    let d_infty = dinfty_discrete(&pw, &qw)?;
    let f = n_flip as f64 / spec.n_pub.max(1) as f64;
    let mut p_joint = Vec::with_capacity(2 * k);
    let mut q_joint = Vec::with_capacity(2 * k);
    for c in 0..k {
        p_joint.extend([pw[c], 0.0]);
        q_joint.extend([qw[c] * (1.0 - f), qw[c] * f]);
    }
    let d_infty_with_labels = dinfty_discrete(&p_joint, &q_joint)?;

    let mut assignments = pub_clusters;
    assignments.extend(retain_clusters);
    assignments.extend(forget_clusters);
    Ok(Synthetic {
        dataset: Dataset::new(public, private, forget)?,
        truth: SyntheticTruth {
            d_infty,
            d_infty_with_labels,
            unbounded: d_infty.is_infinite(),
            private_weights: pw,
            public_weights: qw,
            centers,
            assignments,
            flipped: n_flip,
        },
    })
}

fn draw_clusters(weights: &[f64], n: usize, rng: &mut ChaCha12Rng) -> Result<Vec<usize>> {
    let dist =
        WeightedIndex::new(weights).map_err(|e| Error::domain(format!("cluster weights: {e}")))?;
    Ok((0..n).map(|_| dist.sample(rng)).collect())
}

/// Private indices of the forget set, in ascending order.
fn choose_forget(spec: &SyntheticShiftSpec, clusters: &[usize]) -> Result<Vec<usize>> {
    let mut rng = ChaCha12Rng::seed_from_u64(derive_seed(spec.seed, "synthetic-forget"));
    let n = spec.n_forget;
    let mut chosen: Vec<usize> = match spec.forget_cluster {
        None => sample_indices(&mut rng, clusters.len(), n).into_vec(),
        Some(target) => {
            let (mut inside, outside): (Vec<usize>, Vec<usize>) =
                (0..clusters.len()).partition(|&i| clusters[i] == target);
            if inside.len() >= n {
                inside.truncate(n);
                inside
            } else {
                let extra = n - inside.len();
                inside.extend(
                    sample_indices(&mut rng, outside.len(), extra)
                        .into_iter()
                        .map(|j| outside[j]),
                );
                inside
            }
        }
    };
    chosen.sort_unstable();
    Ok(chosen)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec() -> SyntheticShiftSpec {
        SyntheticShiftSpec {
            d: 5,
            n_pub: 300,
            n_priv: 400,
            n_forget: 40,
            clusters: 4,
            shift: 0.3,
            label_flip_fraction: 0.0,
            center_norm: 1.0,
            jitter: 0.25,
            forget_cluster: None,
            seed: 9,
        }
    }

    #[test]
    fn shapes_and_determinism() {
        let s = spec();
        let a = generate_synthetic(&s).unwrap();
        let b = generate_synthetic(&s).unwrap();
        assert_eq!(a, b);
        let ds = &a.dataset;
        assert_eq!((ds.n_pub(), ds.n_priv(), ds.n_forget()), (300, 400, 40));
        assert_eq!(ds.dim().unwrap(), 5);
        assert_eq!(a.truth.assignments.len(), 700);
    }

    #[test]
    fn zero_shift_has_zero_dinfty() {
        let s = SyntheticShiftSpec {
            shift: 0.0,
            ..spec()
        };
        let g = generate_synthetic(&s).unwrap();
        assert_eq!(g.truth.d_infty, 0.0);
        assert_eq!(s.public_weights(), s.private_weights());
    }

    #[test]
    fn two_cluster_example_gives_log_two() {
        let s = SyntheticShiftSpec {
            clusters: 2,
            shift: 0.5,
            ..spec()
        };
        assert_eq!(s.public_weights(), vec![0.25, 0.75]);
        let g = generate_synthetic(&s).unwrap();
        assert!((g.truth.d_infty - 2f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn full_shift_is_unbounded() {
        let g = generate_synthetic(&SyntheticShiftSpec {
            shift: 1.0,
            ..spec()
        })
        .unwrap();
        assert!(g.truth.unbounded && g.truth.d_infty.is_infinite());
    }

    #[test]
    fn exact_flip_count() {
        let s = SyntheticShiftSpec {
            label_flip_fraction: 0.4,
            shift: 0.0,
            ..spec()
        };
        let g = generate_synthetic(&s).unwrap();
        let flipped = g
            .dataset
            .public
            .iter()
            .zip(&g.truth.assignments)
            .filter(|(e, &c)| e.label != SyntheticShiftSpec::cluster_label(c))
            .count();
        assert_eq!(flipped, 120);
        assert_eq!(g.truth.flipped, 120);
        assert!((g.truth.d_infty_with_labels - (1.0f64 / 0.6).ln()).abs() < 1e-12);
    }

    #[test]
    fn forget_cluster_is_respected() {
        let s = SyntheticShiftSpec {
            forget_cluster: Some(2),
            ..spec()
        };
        let g = generate_synthetic(&s).unwrap();
        let forget_clusters = &g.truth.assignments[g.truth.assignments.len() - 40..];
        assert!(forget_clusters.iter().all(|&c| c == 2));
    }

    #[test]
    fn features_stay_near_centres() {
        let g = generate_synthetic(&spec()).unwrap();
        let all = g.dataset.full();
        for (e, &c) in all.iter().zip(&g.truth.assignments) {
            for (x, m) in e.features.iter().zip(&g.truth.centers[c]) {
                assert!((x - m).abs() <= 0.25 + 1e-12);
            }
        }
    }
}
