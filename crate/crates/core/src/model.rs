//! Reference learning task: binary logistic regression with an L2 penalty,
//! per-example gradient clipping and projection onto a Euclidean ball.

use serde::{Deserialize, Serialize};

use crate::ext::ExactSum;
use crate::{Error, Result};

/// Binary label in {-1, +1}.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "i8", into = "i8")]
pub enum Label {
    Neg,
    Pos,
}

impl Label {
    pub fn sign(self) -> f64 {
        match self {
            Label::Neg => -1.0,
            Label::Pos => 1.0,
        }
    }

    pub fn flipped(self) -> Self {
        match self {
            Label::Neg => Label::Pos,
            Label::Pos => Label::Neg,
        }
    }
}

impl TryFrom<i8> for Label {
    type Error = Error;

    fn try_from(v: i8) -> Result<Self> {
        match v {
            -1 => Ok(Label::Neg),
            1 => Ok(Label::Pos),
            other => Err(Error::domain(format!("label must be -1 or 1, got {other}"))),
        }
    }
}

impl From<Label> for i8 {
    fn from(l: Label) -> i8 {
        match l {
            Label::Neg => -1,
            Label::Pos => 1,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LabeledExample {
    pub features: Vec<f64>,
    pub label: Label,
}

impl LabeledExample {
    pub fn new(features: Vec<f64>, label: Label) -> Result<Self> {
        if features.iter().any(|v| !v.is_finite()) {
            return Err(Error::domain("feature vector must be finite"));
        }
        Ok(Self { features, label })
    }

    pub fn dim(&self) -> usize {
        self.features.len()
    }
}

/// Training data split into public, retained-private and forget parts.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub public: Vec<LabeledExample>,
    pub private_retain: Vec<LabeledExample>,
    pub forget: Vec<LabeledExample>,
}

impl Dataset {
    pub fn new(
        public: Vec<LabeledExample>,
        private_retain: Vec<LabeledExample>,
        forget: Vec<LabeledExample>,
    ) -> Result<Self> {
        let ds = Self {
            public,
            private_retain,
            forget,
        };
        ds.dim()?;
        Ok(ds)
    }

    /// Shared feature dimension; errors when the parts disagree or the
    /// dataset is empty.
    pub fn dim(&self) -> Result<usize> {
        let mut all = self
            .public
            .iter()
            .chain(&self.private_retain)
            .chain(&self.forget);
        let first = all
            .next()
            .ok_or_else(|| Error::domain("dataset is empty"))?
            .dim();
        for ex in all {
            if ex.dim() != first {
                return Err(Error::Dimension {
                    expected: first,
                    found: ex.dim(),
                });
            }
        }
        Ok(first)
    }

    pub fn n_pub(&self) -> usize {
        self.public.len()
    }

    /// Private count including the forget set.
    pub fn n_priv(&self) -> usize {
        self.private_retain.len() + self.forget.len()
    }

    pub fn n_forget(&self) -> usize {
        self.forget.len()
    }

    /// Public, retained private and forget examples, in that order.
    pub fn full(&self) -> Vec<&LabeledExample> {
        self.public
            .iter()
            .chain(&self.private_retain)
            .chain(&self.forget)
            .collect()
    }

    /// Public and retained private examples.
    pub fn retain(&self) -> Vec<&LabeledExample> {
        self.public.iter().chain(&self.private_retain).collect()
    }
}

/// Lipschitz / smoothness / strong-convexity constants of the loss.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LossProfile {
    /// Gradient-norm clip bound, i.e. the Lipschitz constant.
    pub lipschitz: f64,
    pub smoothness: f64,
    /// Zero when the loss is not strongly convex.
    pub strong_convexity: f64,
    pub lambda: f64,
}

impl LossProfile {
    pub fn new(
        lipschitz: f64,
        smoothness: f64,
        strong_convexity: f64,
        lambda: f64,
    ) -> Result<Self> {
        if !(lipschitz > 0.0) {
            return Err(Error::domain("Lipschitz constant must be positive"));
        }
        if strong_convexity < 0.0 || (strong_convexity > 0.0 && strong_convexity > smoothness) {
            return Err(Error::domain("need 0 < m <= L when m > 0"));
        }
        Ok(Self {
            lipschitz,
            smoothness,
            strong_convexity,
            lambda,
        })
    }
}

/// Constants of clipped L2-regularised logistic regression: `M = clip`,
/// `L = 1/4 + lambda`, `m = lambda`.
pub fn derive_profile(lambda: f64, clip: f64) -> Result<LossProfile> {
    if !(lambda > 0.0) || !(clip > 0.0) {
        return Err(Error::domain("lambda and clip must be positive"));
    }
    Ok(LossProfile {
        lipschitz: clip,
        smoothness: 0.25 + lambda,
        strong_convexity: lambda,
        lambda,
    })
}

/// Parameter vector living in the ball of radius `radius`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParamVector {
    pub weights: Vec<f64>,
    pub radius: f64,
}

impl ParamVector {
    /// Wraps `weights`; fails when they lie outside the ball.
    pub fn new(weights: Vec<f64>, radius: f64) -> Result<Self> {
        if !(radius > 0.0) {
            return Err(Error::domain("projection radius must be positive"));
        }
        if norm(&weights) > radius {
            return Err(Error::domain("weights lie outside the projection ball"));
        }
        Ok(Self { weights, radius })
    }

    pub fn zeros(dim: usize, radius: f64) -> Result<Self> {
        Self::new(vec![0.0; dim], radius)
    }

    pub fn dim(&self) -> usize {
        self.weights.len()
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(v: &[f64]) -> f64 {
    dot(v, v).sqrt()
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `log s(z)` without overflow: `-softplus(-z)`.
fn log_sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        -(-z).exp().ln_1p()
    } else {
        z - z.exp().ln_1p()
    }
}

fn check_inputs<'a, I>(theta: &[f64], data: I) -> Result<usize>
where
    I: IntoIterator<Item = &'a LabeledExample>,
{
    let mut n = 0;
    for ex in data {
        if ex.dim() != theta.len() {
            return Err(Error::Dimension {
                expected: theta.len(),
                found: ex.dim(),
            });
        }
        n += 1;
    }
    if n == 0 {
        return Err(Error::domain("data must be nonempty"));
    }
    Ok(n)
}

/// `-(1/n) sum log s(y_i theta^T x_i) + (lambda/2) |theta|^2`.
pub fn loss_value<'a, I>(theta: &[f64], data: I, lambda: f64) -> Result<f64>
where
    I: IntoIterator<Item = &'a LabeledExample> + Clone,
{
    let n = check_inputs(theta, data.clone())?;
    let mut acc = ExactSum::default();
    for ex in data {
        acc.add(-log_sigmoid(ex.label.sign() * dot(theta, &ex.features)));
    }
    Ok(acc.value() / n as f64 + 0.5 * lambda * dot(theta, theta))
}

/// Gradient of a single example's regularised loss.
fn example_gradient(theta: &[f64], ex: &LabeledExample, lambda: f64, out: &mut [f64]) {
    let y = ex.label.sign();
    let coef = -(1.0 - sigmoid(y * dot(theta, &ex.features))) * y;
    for ((o, x), t) in out.iter_mut().zip(&ex.features).zip(theta) {
        *o = coef * x + lambda * t;
    }
}

/// Analytic (unclipped) gradient of [`loss_value`].
pub fn loss_gradient<'a, I>(theta: &[f64], data: I, lambda: f64) -> Result<Vec<f64>>
where
    I: IntoIterator<Item = &'a LabeledExample> + Clone,
{
    let n = check_inputs(theta, data.clone())?;
    let mut acc = vec![ExactSum::default(); theta.len()];
    let mut g = vec![0.0; theta.len()];
    for ex in data {
        example_gradient(theta, ex, lambda, &mut g);
        acc.iter_mut().zip(&g).for_each(|(a, &v)| a.add(v));
    }
    Ok(acc.iter().map(|a| a.value() / n as f64).collect())
}

/// Average of per-example regularised gradients, each clipped to norm `clip`
/// before averaging. This is the update direction used by PNGD.
pub fn clipped_gradient<'a, I>(theta: &[f64], data: I, lambda: f64, clip: f64) -> Result<Vec<f64>>
where
    I: IntoIterator<Item = &'a LabeledExample> + Clone,
{
    if !(clip > 0.0) {
        return Err(Error::domain("clip bound must be positive"));
    }
    let n = check_inputs(theta, data.clone())?;
    // exact sums make the average independent of row order
    let mut acc = vec![ExactSum::default(); theta.len()];
    let mut g = vec![0.0; theta.len()];
    for ex in data {
        example_gradient(theta, ex, lambda, &mut g);
        let scale = clip_scale(&g, clip);
        acc.iter_mut().zip(&g).for_each(|(a, &v)| a.add(scale * v));
    }
    Ok(acc.iter().map(|a| a.value() / n as f64).collect())
}

fn clip_scale(g: &[f64], clip: f64) -> f64 {
    let n = norm(g);
    if n > clip {
        clip / n
    } else {
        1.0
    }
}

/// Rescales `g` onto the ball of radius `clip` when it lies outside.
pub fn clip_gradient(g: &[f64], clip: f64) -> Result<Vec<f64>> {
    if !(clip > 0.0) {
        return Err(Error::domain("clip bound must be positive"));
    }
    let s = clip_scale(g, clip);
    let mut out: Vec<f64> = g.iter().map(|v| v * s).collect();
    // rounding can leave the norm a few ulps above the bound
    shrink_into(&mut out, g, s, clip);
    Ok(out)
}

/// Euclidean projection onto the ball of radius `radius`. The result is
/// guaranteed to satisfy `norm <= radius` in floating point.
pub fn project_ball(theta: &[f64], radius: f64) -> Result<ParamVector> {
    if !(radius > 0.0) {
        return Err(Error::domain("projection radius must be positive"));
    }
    let s = clip_scale(theta, radius);
    let mut weights: Vec<f64> = theta.iter().map(|v| v * s).collect();
    shrink_into(&mut weights, theta, s, radius);
    Ok(ParamVector { weights, radius })
}

fn shrink_into(out: &mut [f64], src: &[f64], mut scale: f64, bound: f64) {
    while norm(out) > bound {
        scale = scale.next_down();
        out.iter_mut().zip(src).for_each(|(o, v)| *o = v * scale);
    }
}
