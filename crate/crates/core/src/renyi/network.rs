//! Two-layer spectrally normalised discriminator with hand-written backprop.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::{polysoftplus, polysoftplus_derivative, Objective};
use crate::{Error, Flagged, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputActivation {
    Identity,
    Polysoftplus,
}

impl OutputActivation {
    fn apply(self, x: f64) -> f64 {
        match self {
            OutputActivation::Identity => x,
            OutputActivation::Polysoftplus => polysoftplus(x),
        }
    }

    fn derivative(self, x: f64) -> f64 {
        match self {
            OutputActivation::Identity => 1.0,
            OutputActivation::Polysoftplus => polysoftplus_derivative(x),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiscriminatorSpec {
    pub input_dim: usize,
    pub hidden_width: usize,
    pub leaky_slope: f64,
    pub output_activation: OutputActivation,
    pub spectral_norm: bool,
    /// Fixed factor on the normalised second layer, so the network is
    /// `output_gain`-Lipschitz in standardised inputs.
    pub output_gain: f64,
}

impl DiscriminatorSpec {
    pub const DEFAULT_HIDDEN: usize = 64;
    pub const DEFAULT_SLOPE: f64 = 0.2;
    pub const DEFAULT_GAIN: f64 = 2.0;

    pub fn for_objective(input_dim: usize, objective: Objective) -> Self {
        Self {
            input_dim,
            hidden_width: Self::DEFAULT_HIDDEN,
            leaky_slope: Self::DEFAULT_SLOPE,
            output_activation: objective.output_activation(),
            spectral_norm: true,
            output_gain: Self::DEFAULT_GAIN,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.input_dim == 0 || self.hidden_width == 0 {
            return Err(Error::domain(
                "input dimension and hidden width must be at least 1",
            ));
        }
        if !(self.leaky_slope >= 0.0 && self.leaky_slope <= 1.0) {
            return Err(Error::domain("leaky slope must lie in [0, 1]"));
        }
        if !(self.output_gain > 0.0) || !self.output_gain.is_finite() {
            return Err(Error::domain("output gain must be positive"));
        }
        Ok(())
    }

    /// Lipschitz constant in standardised inputs when spectral norm is on.
    pub fn lipschitz_bound(&self) -> f64 {
        self.output_gain * self.leaky_slope.max(1.0)
    }
}

const POWER_MAX_ITERS: usize = 1000;
const POWER_TOL: f64 = 1e-9;

/// `W / ||W||_2` with the spectral norm found by power iteration. A zero
/// matrix is returned unchanged and flagged; so is one where the iteration
/// did not reach its residual tolerance.
pub fn spectral_normalize(w: &DMatrix<f64>) -> Flagged<DMatrix<f64>> {
    if w.iter().all(|&x| x == 0.0) || w.is_empty() {
        return Flagged::flagged(w.clone());
    }
    // start off any axis so the top singular direction is not missed
    let mut v = DVector::from_fn(w.ncols(), |i, _| {
        1.0 + 0.1 * i as f64 + 0.013 * (i * i) as f64
    });
    v.normalize_mut();
    let mut converged = false;
    let mut sigma = 0.0;
    for _ in 0..POWER_MAX_ITERS {
        let u = w * &v;
        sigma = u.norm();
        if sigma == 0.0 {
            break;
        }
        let u = u / sigma;
        let next = w.transpose() * &u;
        let next_norm = next.norm();
        let residual = (&next - &v * next_norm).norm();
        v = next / next_norm;
        sigma = next_norm;
        if residual <= POWER_TOL * sigma {
            converged = true;
            break;
        }
    }
    if sigma == 0.0 {
        return Flagged::flagged(w.clone());
    }
    let out = w / sigma;
    if converged {
        Flagged::clean(out)
    } else {
        Flagged::flagged(out)
    }
}

fn leaky(x: f64, slope: f64) -> f64 {
    if x >= 0.0 {
        x
    } else {
        slope * x
    }
}

fn leaky_derivative(x: f64, slope: f64) -> f64 {
    if x >= 0.0 {
        1.0
    } else {
        slope
    }
}

/// Gradients with the same layout as the trainable parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct Gradients {
    pub w1: DMatrix<f64>,
    pub b1: DVector<f64>,
    pub w2: DMatrix<f64>,
    pub b2: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Discriminator {
    pub spec: DiscriminatorSpec,
    /// Per-coordinate standardisation applied before the first layer.
    pub shift: Vec<f64>,
    pub scale: Vec<f64>,
    pub w1: DMatrix<f64>,
    pub b1: DVector<f64>,
    pub w2: DMatrix<f64>,
    pub b2: f64,
    /// Persistent left singular vector estimates for each layer.
    pub u1: DVector<f64>,
    pub u2: DVector<f64>,
}

/// Forward cache for one batch.
struct Cache {
    z: DMatrix<f64>,
    pre_hidden: DMatrix<f64>,
    hidden: DMatrix<f64>,
    pre_out: DVector<f64>,
    w2n: DMatrix<f64>,
    sigma1: f64,
    sigma2: f64,
}

impl Discriminator {
    /// Random initialisation with unit standardisation.
    pub fn new(spec: DiscriminatorSpec, seed: u64) -> Result<Self> {
        spec.validate()?;
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        let (d, h) = (spec.input_dim, spec.hidden_width);
        let mut normal = |n: usize, scale: f64| -> Vec<f64> {
            (0..n)
                .map(|_| {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    scale * z
                })
                .collect::<Vec<f64>>()
        };
        let w1 = DMatrix::from_vec(h, d, normal(h * d, (2.0 / d as f64).sqrt()));
        let w2 = DMatrix::from_vec(1, h, normal(h, (1.0 / h as f64).sqrt()));
        let mut u1 = DVector::from_vec(normal(h, 1.0));
        u1.normalize_mut();
        Ok(Self {
            shift: vec![0.0; d],
            scale: vec![1.0; d],
            w1,
            b1: DVector::zeros(h),
            w2,
            b2: 0.0,
            u1,
            u2: DVector::from_element(1, 1.0),
            spec,
        })
    }

    /// Set the standardisation to the pooled mean and standard deviation of
    /// the given rows. Constant coordinates keep unit scale.
    pub fn fit_standardization(&mut self, rows: &[&[f64]]) {
        let d = self.spec.input_dim;
        let n = rows.len().max(1) as f64;
        let mut mean = vec![0.0; d];
        for r in rows {
            for (m, x) in mean.iter_mut().zip(r.iter()) {
                *m += x / n;
            }
        }
        let mut var = vec![0.0; d];
        for r in rows {
            for ((v, x), m) in var.iter_mut().zip(r.iter()).zip(&mean) {
                *v += (x - m) * (x - m) / n;
            }
        }
        self.shift = mean;
        self.scale = var
            .into_iter()
            .map(|v| if v.sqrt() > 1e-12 { v.sqrt() } else { 1.0 })
            .collect();
    }

    /// One power-iteration refresh of both persistent singular vectors.
    pub fn power_step(&mut self) {
        fn refresh(w: &DMatrix<f64>, u: &mut DVector<f64>) {
            let v = w.transpose() * &*u;
            let vn = v.norm();
            if vn == 0.0 {
                return;
            }
            let next = w * (v / vn);
            let norm = next.norm();
            if norm > 0.0 {
                *u = next / norm;
            }
        }
        refresh(&self.w1, &mut self.u1);
        refresh(&self.w2, &mut self.u2);
    }

    /// Spectral norm estimate `||W^T u||` for the current `u`.
    fn sigma(&self, w: &DMatrix<f64>, u: &DVector<f64>) -> f64 {
        if self.spec.spectral_norm {
            (w.transpose() * u).norm()
        } else {
            1.0
        }
    }

    /// Weights as used in the forward pass.
    pub fn effective_weights(&self) -> (DMatrix<f64>, DMatrix<f64>) {
        let s1 = self.sigma(&self.w1, &self.u1);
        let s2 = self.sigma(&self.w2, &self.u2);
        (&self.w1 / s1, &self.w2 * (self.spec.output_gain / s2))
    }

    fn standardize(&self, rows: &[&[f64]]) -> Result<DMatrix<f64>> {
        let d = self.spec.input_dim;
        if let Some(r) = rows.iter().find(|r| r.len() != d) {
            return Err(Error::Dimension {
                expected: d,
                found: r.len(),
            });
        }
        Ok(DMatrix::from_fn(rows.len(), d, |i, j| {
            (rows[i][j] - self.shift[j]) / self.scale[j]
        }))
    }

    fn forward_cached(&self, rows: &[&[f64]]) -> Result<Cache> {
        let z = self.standardize(rows)?;
        let sigma1 = self.sigma(&self.w1, &self.u1);
        let sigma2 = self.sigma(&self.w2, &self.u2);
        if !(sigma1 > 0.0) || !(sigma2 > 0.0) {
            return Err(Error::Numerical(
                "spectral norm estimate collapsed to zero".into(),
            ));
        }
        let w1n = &self.w1 / sigma1;
        let w2n = &self.w2 / sigma2;
        let mut pre_hidden = &z * w1n.transpose();
        for mut row in pre_hidden.row_iter_mut() {
            row += self.b1.transpose();
        }
        let slope = self.spec.leaky_slope;
        let hidden = pre_hidden.map(|x| leaky(x, slope));
        let pre_out = (&hidden * w2n.transpose()).column(0) * self.spec.output_gain
            + DVector::from_element(rows.len(), self.b2);
        Ok(Cache {
            z,
            pre_hidden,
            hidden,
            pre_out,
            w2n,
            sigma1,
            sigma2,
        })
    }

    /// Witness values on each row.
    pub fn forward(&self, rows: &[&[f64]]) -> Result<Vec<f64>> {
        let act = self.spec.output_activation;
        Ok(self
            .forward_cached(rows)?
            .pre_out
            .iter()
            .map(|&x| act.apply(x))
            .collect())
    }

    /// Gradient of `sum_i dout_i * f(x_i)` with respect to the raw weights.
    fn backward(&self, cache: &Cache, dout: &[f64]) -> Gradients {
        let act = self.spec.output_activation;
        let gain = self.spec.output_gain;
        let dpre = DVector::from_iterator(
            dout.len(),
            dout.iter()
                .zip(cache.pre_out.iter())
                .map(|(g, &x)| g * act.derivative(x)),
        );
        let b2 = dpre.sum();
        // d/dW2n = gain * dpre^T H, d/dH = gain * dpre W2n
        let g_w2n = DMatrix::from_row_slice(
            1,
            self.spec.hidden_width,
            (dpre.transpose() * &cache.hidden * gain).as_slice(),
        );
        let d_hidden = (&dpre * &cache.w2n) * gain;
        let slope = self.spec.leaky_slope;
        let d_pre_hidden =
            d_hidden.zip_map(&cache.pre_hidden, |g, x| g * leaky_derivative(x, slope));
        let g_w1n = d_pre_hidden.transpose() * &cache.z;
        let b1 = DVector::from_iterator(
            self.spec.hidden_width,
            d_pre_hidden.column_iter().map(|c| c.sum()),
        );
        let w1 = self.through_norm(&self.w1, &self.u1, cache.sigma1, g_w1n);
        let w2 = self.through_norm(&self.w2, &self.u2, cache.sigma2, g_w2n);
        Gradients { w1, b1, w2, b2 }
    }

    /// Chain rule through `W / sigma(W)` with `sigma = ||W^T u||`, `u` fixed:
    /// `G / sigma - <G, W> / sigma^2 * u v^T`, `v = W^T u / sigma`.
    fn through_norm(
        &self,
        w: &DMatrix<f64>,
        u: &DVector<f64>,
        sigma: f64,
        g: DMatrix<f64>,
    ) -> DMatrix<f64> {
        if !self.spec.spectral_norm {
            return g;
        }
        let v = w.transpose() * u / sigma;
        let inner = g.dot(w);
        &g / sigma - (u * v.transpose()) * (inner / (sigma * sigma))
    }

    /// Objective on the given samples and its gradient in the raw weights.
    pub fn objective_and_grad(
        &self,
        p: &[&[f64]],
        q: &[&[f64]],
        objective: Objective,
        alpha: f64,
    ) -> Result<(f64, Gradients)> {
        let cp = self.forward_cached(p)?;
        let cq = self.forward_cached(q)?;
        let act = self.spec.output_activation;
        let fp: Vec<f64> = cp.pre_out.iter().map(|&x| act.apply(x)).collect();
        let fq: Vec<f64> = cq.pre_out.iter().map(|&x| act.apply(x)).collect();
        let (value, gp, gq) = objective.value_and_grad(&fp, &fq, alpha)?;
        let a = self.backward(&cp, &gp);
        let b = self.backward(&cq, &gq);
        Ok((
            value,
            Gradients {
                w1: a.w1 + b.w1,
                b1: a.b1 + b.b1,
                w2: a.w2 + b.w2,
                b2: a.b2 + b.b2,
            },
        ))
    }

    pub fn objective(
        &self,
        p: &[&[f64]],
        q: &[&[f64]],
        objective: Objective,
        alpha: f64,
    ) -> Result<f64> {
        objective.value(&self.forward(p)?, &self.forward(q)?, alpha)
    }

    /// Trainable parameters flattened as `w1 (column-major), b1, w2, b2`.
    pub fn params(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.n_params());
        out.extend(self.w1.iter());
        out.extend(self.b1.iter());
        out.extend(self.w2.iter());
        out.push(self.b2);
        out
    }

    pub fn n_params(&self) -> usize {
        let (d, h) = (self.spec.input_dim, self.spec.hidden_width);
        h * d + h + h + 1
    }

    pub fn set_params(&mut self, flat: &[f64]) -> Result<()> {
        if flat.len() != self.n_params() {
            return Err(Error::Dimension {
                expected: self.n_params(),
                found: flat.len(),
            });
        }
        let (d, h) = (self.spec.input_dim, self.spec.hidden_width);
        let (w1, rest) = flat.split_at(h * d);
        let (b1, rest) = rest.split_at(h);
        let (w2, rest) = rest.split_at(h);
        self.w1.copy_from_slice(w1);
        self.b1.copy_from_slice(b1);
        self.w2.copy_from_slice(w2);
        self.b2 = rest[0];
        Ok(())
    }
}

impl Gradients {
    /// Flattened in the same order as [`Discriminator::params`].
    pub fn flatten(&self) -> Vec<f64> {
        let mut out: Vec<f64> = self.w1.iter().copied().collect();
        out.extend(self.b1.iter());
        out.extend(self.w2.iter());
        out.push(self.b2);
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::Rng;

    #[test]
    fn spectral_normalize_examples() {
        let d = DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 1.0]);
        let n = spectral_normalize(&d);
        assert!(!n.flagged);
        assert_relative_eq!(
            n.value,
            DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.5]),
            epsilon = 1e-12
        );

        let (c, s) = (0.6, 0.8);
        let rot = DMatrix::from_row_slice(2, 2, &[c, -s, s, c]);
        assert_relative_eq!(spectral_normalize(&rot).value, rot, epsilon = 1e-12);

        let zero = DMatrix::<f64>::zeros(3, 2);
        let z = spectral_normalize(&zero);
        assert!(z.flagged);
        assert_eq!(z.value, zero);
    }

    #[test]
    fn spectral_normalize_matches_svd() {
        let mut rng = ChaCha12Rng::seed_from_u64(11);
        for _ in 0..50 {
            let w = DMatrix::from_fn(5, 5, |_, _| rng.random_range(-1.0..1.0));
            let n = spectral_normalize(&w).value;
            let top = n.clone().svd(false, false).singular_values.max();
            assert!((top - 1.0).abs() < 1e-6, "{top}");
        }
    }

    fn rows(n: usize, d: usize, seed: u64) -> Vec<Vec<f64>> {
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        (0..n)
            .map(|_| (0..d).map(|_| rng.random_range(-2.0..2.0)).collect())
            .collect()
    }

    fn refs(r: &[Vec<f64>]) -> Vec<&[f64]> {
        r.iter().map(Vec::as_slice).collect()
    }

    #[test]
    fn converged_network_respects_lipschitz_bound() {
        let spec = DiscriminatorSpec::for_objective(4, Objective::Dv);
        let mut net = Discriminator::new(spec.clone(), 3).unwrap();
        for _ in 0..500 {
            net.power_step();
        }
        let xs = rows(400, 4, 5);
        let out = net.forward(&refs(&xs)).unwrap();
        for i in 0..200 {
            let (a, b) = (&xs[2 * i], &xs[2 * i + 1]);
            let dist = a
                .iter()
                .zip(b)
                .map(|(x, y)| (x - y) * (x - y))
                .sum::<f64>()
                .sqrt();
            assert!((out[2 * i] - out[2 * i + 1]).abs() <= 1.05 * spec.lipschitz_bound() * dist);
        }
    }

    #[test]
    fn parameter_round_trip() {
        let mut net =
            Discriminator::new(DiscriminatorSpec::for_objective(3, Objective::Cc), 1).unwrap();
        let mut p = net.params();
        p[4] = 0.125;
        net.set_params(&p).unwrap();
        assert_eq!(net.params(), p);
        assert!(net.set_params(&p[1..]).is_err());
    }

    #[test]
    fn polysoftplus_head_is_negative() {
        let net =
            Discriminator::new(DiscriminatorSpec::for_objective(3, Objective::Cc), 2).unwrap();
        let xs = rows(100, 3, 9);
        assert!(net.forward(&refs(&xs)).unwrap().iter().all(|&g| g < 0.0));
    }
}
