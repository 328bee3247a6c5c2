use serde::{Deserialize, Serialize};

use crate::control::{is_infinite_cost, Axis, ValueField};
use crate::error::{Error, Result};
use crate::quadrature::GaussHermite;

/// Minimal penalty `κ_t(μ, Σ) = min_a v(t, μ, Σ, a)` on a `(μ, Σ)` grid, for a scalar signal.
///
/// Values are stored with `μ` varying slowest. `argmin` holds the minimising parameter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KappaField {
    pub mu: Axis,
    /// Variance axis.
    pub sigma: Axis,
    pub values: Vec<f64>,
    pub argmin: Vec<f64>,
}

impl KappaField {
    pub fn new(mu: Axis, sigma: Axis, values: Vec<f64>) -> Result<Self> {
        let n = mu.n * sigma.n;
        if values.len() != n {
            return Err(Error::DimensionMismatch { context: "κ-field", expected: n, found: values.len() });
        }
        Ok(KappaField { mu, sigma, argmin: vec![f64::NAN; n], values })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// `(μ, Σ)` of node `k`.
    pub fn node(&self, k: usize) -> (f64, f64) {
        (self.mu.point(k / self.sigma.n), self.sigma.point(k % self.sigma.n))
    }

    /// The field with every finite value multiplied by `s`.
    pub fn scaled(&self, s: f64) -> KappaField {
        let mut out = self.clone();
        for v in &mut out.values {
            if !is_infinite_cost(*v) {
                *v *= s;
            }
        }
        out
    }

    /// Node of the smallest finite penalty (first on ties).
    pub fn min_node(&self) -> Option<usize> {
        let mut best: Option<usize> = None;
        for (k, &v) in self.values.iter().enumerate() {
            if !is_infinite_cost(v) && best.is_none_or(|b| v < self.values[b]) {
                best = Some(k);
            }
        }
        best
    }
}

/// `κ_t(μ, Σ)` and its minimising `α`, interpolating in `(μ, Σ)` at every `α` node.
///
/// The field's grid must be `(μ, Σ, α)` and `t` one of its output times.
pub fn kappa(field: &ValueField, t: f64, mu: f64, sigma: f64) -> Result<(f64, f64)> {
    let k = field.time_index(t)?;
    let axes = &field.grid.axes;
    if axes.len() != 3 {
        return Err(Error::DimensionMismatch { context: "κ grid (μ, Σ, α)", expected: 3, found: axes.len() });
    }
    let mut best = (f64::INFINITY, f64::NAN);
    for a in axes[2].points() {
        let v = field.interpolate(k, &[mu, sigma, a]);
        if v < best.0 {
            best = (v, a);
        }
    }
    Ok(best)
}

/// `κ_t` on the `(μ, Σ)` nodes of a `(μ, Σ, α)` field.
pub fn kappa_field(field: &ValueField, t: f64) -> Result<KappaField> {
    let k = field.time_index(t)?;
    let axes = &field.grid.axes;
    if axes.len() != 3 {
        return Err(Error::DimensionMismatch { context: "κ grid (μ, Σ, α)", expected: 3, found: axes.len() });
    }
    let (nm, ns, na) = (axes[0].n, axes[1].n, axes[2].n);
    let slice = field.slice(k);
    let mut values = Vec::with_capacity(nm * ns);
    let mut argmin = Vec::with_capacity(nm * ns);
    for i in 0..nm * ns {
        let row = &slice[i * na..(i + 1) * na];
        let mut j_best = 0;
        for j in 1..na {
            if row[j] < row[j_best] {
                j_best = j;
            }
        }
        values.push(row[j_best]);
        argmin.push(axes[2].point(j_best));
    }
    Ok(KappaField { mu: axes[0].clone(), sigma: axes[1].clone(), values, argmin })
}

/// Value and maximising node of a nonlinear expectation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NonlinearExpectation {
    pub value: f64,
    pub mu: f64,
    pub sigma: f64,
    pub node: usize,
    /// Minimum subtracted from the field before exponentiation.
    pub normalisation: f64,
}

/// `E(φ(S_t) | Y_t) = sup_{(μ,Σ)} { ∫ φ dN(μ, Σ) - (κ̃_t(μ, Σ) / k₁)^{k₂} }` over the grid nodes.
///
/// `κ̃` is `κ` shifted so that its minimum is zero; infinite nodes are excluded. The Gaussian
/// integral uses Gauss–Hermite quadrature of order 64.
///
/// ```
/// use roughctrl::control::Axis;
/// use roughctrl::filter::{nonlinear_expectation, KappaField};
/// let kf = KappaField::new(Axis::new("mu", -1.0, 1.0, 3), Axis::new("sigma", 0.5, 1.0, 2), vec![3.0; 6]).unwrap();
/// let e = nonlinear_expectation(|_| 2.5, &kf, 1.0, 1.0).unwrap();
/// assert!((e.value - 2.5).abs() < 1e-12);
/// ```
pub fn nonlinear_expectation(phi: impl Fn(f64) -> f64, kf: &KappaField, k1: f64, k2: f64) -> Result<NonlinearExpectation> {
    if !(k1 > 0.0) || !(k2 >= 1.0) {
        return Err(Error::InvalidArgument(format!("need k1 > 0 and k2 ≥ 1, got {k1}, {k2}")));
    }
    let min = kf.min_node().ok_or_else(|| Error::InvalidArgument("κ-field has no finite value".into()))?;
    let base = kf.values[min];
    let rule = GaussHermite::default_rule();
    let mut best: Option<NonlinearExpectation> = None;
    for (k, &v) in kf.values.iter().enumerate() {
        if is_infinite_cost(v) {
            continue;
        }
        let (mu, sigma) = kf.node(k);
        let pen = ((v - base).max(0.0) / k1).powf(k2);
        let value = rule.gaussian_expectation(&phi, mu, sigma) - pen;
        if best.is_none_or(|b| value > b.value) {
            best = Some(NonlinearExpectation { value, mu, sigma, node: k, normalisation: base });
        }
    }
    Ok(best.expect("at least one finite node"))
}

/// Interval `[-E(-φ), E(φ)]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RobustInterval {
    pub lower: f64,
    pub upper: f64,
    /// Maximising node of `E(-φ)`.
    pub lower_arg: (f64, f64),
    /// Maximising node of `E(φ)`.
    pub upper_arg: (f64, f64),
}

impl RobustInterval {
    pub fn contains(&self, x: f64) -> bool {
        self.lower <= x && x <= self.upper
    }
}

/// Robust interval estimate of `φ(S_t)`.
pub fn robust_interval(phi: impl Fn(f64) -> f64, kf: &KappaField, k1: f64, k2: f64) -> Result<RobustInterval> {
    let up = nonlinear_expectation(&phi, kf, k1, k2)?;
    let lo = nonlinear_expectation(|x| -phi(x), kf, k1, k2)?;
    Ok(RobustInterval { lower: -lo.value, upper: up.value, lower_arg: (lo.mu, lo.sigma), upper_arg: (up.mu, up.sigma) })
}

/// Point estimate: the mean of the least-penalised model.
pub fn robust_point_estimate(kf: &KappaField) -> Option<f64> {
    kf.min_node().map(|k| kf.node(k).0)
}
