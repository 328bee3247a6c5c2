//! Rough-path lifts, rough-path metrics, controlled paths and the compensated rough integral.

use std::collections::hash_map::DefaultHasher;
use std::hash::{Hash, Hasher};
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::paths::{
    difference, holder_norm, interval_indices, norm, p_variation_full, same_grid, uniform_grid, SampledPath,
    TwoParamIncrements, TwoParameter,
};

/// Default regularity for Brownian-type drivers.
pub const DEFAULT_P: f64 = 2.5;

/// Tolerance used when validating ingested second levels.
pub const INGEST_TOL: f64 = 1e-9;

/// Content fingerprint of a rough path, used to match controlled paths to their driver.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct RoughPathId(u64);

#[derive(Debug, Clone)]
enum SecondLevel {
    Steps(TwoParamIncrements),
    /// Fully materialised `n × n` table of `d × d` entries, as ingested.
    Table { n: usize, d: usize, entries: Vec<f64> },
}

/// A path together with its second level `ζ^(2)`.
#[derive(Debug, Clone)]
pub struct RoughPath {
    first: Arc<SampledPath>,
    second: SecondLevel,
    geometric: bool,
    p: f64,
    id: RoughPathId,
}

fn fingerprint(first: &SampledPath, second: &[f64]) -> RoughPathId {
    let mut h = DefaultHasher::new();
    first.dim().hash(&mut h);
    for v in first.times().iter().chain(first.data()).chain(second) {
        v.to_bits().hash(&mut h);
    }
    RoughPathId(h.finish())
}

fn check_p(p: f64) -> Result<()> {
    if !(2.0..3.0).contains(&p) {
        return Err(Error::InvalidArgument(format!("rough path regularity p = {p} outside [2, 3)")));
    }
    Ok(())
}

/// Canonical lift of a piecewise-linear path: each step carries `½ Δ ⊗ Δ`.
///
/// ```
/// use roughctrl::paths::SampledPath;
/// use roughctrl::rough::lift_piecewise_linear;
/// let x = SampledPath::new(
///     vec![0.0, 1.0, 2.0],
///     vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![1.0, 1.0]],
/// ).unwrap();
/// let rp = lift_piecewise_linear(&x);
/// assert_eq!(rp.second(0, 2), vec![0.5, 1.0, 0.0, 0.5]);
/// assert_eq!(rp.levy_area(0, 2)[1], 0.5);
/// ```
pub fn lift_piecewise_linear(path: &SampledPath) -> RoughPath {
    lift_piecewise_linear_with_p(path, DEFAULT_P)
}

pub fn lift_piecewise_linear_with_p(path: &SampledPath, p: f64) -> RoughPath {
    let d = path.dim();
    let mut steps = Vec::with_capacity(d * d * (path.len() - 1));
    let mut inc = vec![0.0; d];
    for i in 0..path.len() - 1 {
        path.increment_into(i, i + 1, &mut inc);
        for a in 0..d {
            for b in 0..d {
                steps.push(0.5 * inc[a] * inc[b]);
            }
        }
    }
    RoughPath::from_steps_unchecked(path.clone(), steps, true, p)
}

/// Brownian path on a uniform grid of `[0, horizon]`, seeded deterministically.
pub fn brownian_path(seed: u64, n_steps: usize, horizon: f64, d: usize) -> SampledPath {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let times = uniform_grid(0.0, horizon, n_steps);
    let sd = (horizon / n_steps as f64).sqrt();
    let mut data = vec![0.0; d * (n_steps + 1)];
    for i in 1..=n_steps {
        for k in 0..d {
            let z: f64 = StandardNormal.sample(&mut rng);
            data[i * d + k] = data[(i - 1) * d + k] + sd * z;
        }
    }
    SampledPath::from_flat(times, d, data).expect("uniform grid is valid")
}

/// Stratonovich lift of a simulated Brownian path: the piecewise-linear lift of its samples.
pub fn lift_brownian_stratonovich(seed: u64, n_steps: usize, horizon: f64, d: usize) -> Result<RoughPath> {
    if n_steps == 0 || d == 0 || !(horizon > 0.0) {
        return Err(Error::InvalidArgument("Brownian lift needs n_steps ≥ 1, d ≥ 1 and T > 0".into()));
    }
    Ok(lift_piecewise_linear(&brownian_path(seed, n_steps, horizon, d)))
}

impl RoughPath {
    fn from_steps_unchecked(first: SampledPath, steps: Vec<f64>, geometric: bool, p: f64) -> Self {
        let id = fingerprint(&first, &steps);
        let second = TwoParamIncrements::chen(first.clone(), steps).expect("step count matches grid");
        RoughPath { first: Arc::new(first), second: SecondLevel::Steps(second), geometric, p, id }
    }

    /// Rough path from stored second-level steps; larger intervals follow Chen's relation.
    ///
    /// When `geometric` is set the symmetric part of every composed entry is checked
    /// against `½ ζ ⊗ ζ`.
    pub fn from_steps(first: SampledPath, steps: Vec<f64>, geometric: bool, p: f64) -> Result<Self> {
        check_p(p)?;
        let d = first.dim();
        if steps.len() != d * d * (first.len() - 1) {
            return Err(Error::DimensionMismatch {
                context: "second-level steps",
                expected: d * d * (first.len() - 1),
                found: steps.len(),
            });
        }
        if steps.iter().any(|v| !v.is_finite()) {
            return Err(Error::Parse("non-finite second-level entry".into()));
        }
        let rp = Self::from_steps_unchecked(first, steps, geometric, p);
        if geometric {
            let r = symmetry_residual(&rp);
            if r > INGEST_TOL * (1.0 + rp.first.sup_norm().powi(2)) {
                return Err(Error::SymmetryViolation(r));
            }
        }
        Ok(rp)
    }

    /// Rough path from a fully materialised table `table[i][j] = ζ^(2)_{t_i,t_j}` (row-major `d × d`).
    ///
    /// The table is validated against Chen's relation and, if `geometric`, against symmetry.
    pub fn from_table(first: SampledPath, table: Vec<Vec<Vec<f64>>>, geometric: bool, p: f64) -> Result<Self> {
        let rp = Self::from_table_unchecked(first, table, geometric, p)?;
        let scale = 1.0 + rp.first.sup_norm().powi(2);
        let r = chen_residual(&rp);
        if r > INGEST_TOL * scale {
            return Err(Error::ChenViolation(r));
        }
        if geometric {
            let r = symmetry_residual(&rp);
            if r > INGEST_TOL * scale {
                return Err(Error::SymmetryViolation(r));
            }
        }
        Ok(rp)
    }

    /// As [`RoughPath::from_table`] without validation.
    pub fn from_table_unchecked(first: SampledPath, table: Vec<Vec<Vec<f64>>>, geometric: bool, p: f64) -> Result<Self> {
        check_p(p)?;
        let (n, d) = (first.len(), first.dim());
        if table.len() != n || table.iter().any(|r| r.len() != n || r.iter().any(|e| e.len() != d * d)) {
            return Err(Error::DimensionMismatch {
                context: "second-level table",
                expected: n * n * d * d,
                found: table.iter().flatten().map(Vec::len).sum(),
            });
        }
        let entries: Vec<f64> = table.into_iter().flatten().flatten().collect();
        let id = fingerprint(&first, &entries);
        Ok(RoughPath { first: Arc::new(first), second: SecondLevel::Table { n, d, entries }, geometric, p, id })
    }

    pub fn first_level(&self) -> &SampledPath {
        &self.first
    }

    pub(crate) fn first_level_arc(&self) -> Arc<SampledPath> {
        Arc::clone(&self.first)
    }

    pub fn times(&self) -> &[f64] {
        self.first.times()
    }

    pub fn len(&self) -> usize {
        self.first.len()
    }

    pub fn is_empty(&self) -> bool {
        self.first.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.first.dim()
    }

    pub fn is_geometric(&self) -> bool {
        self.geometric
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn id(&self) -> RoughPathId {
        self.id
    }

    /// True when the second level is stored by steps and composed with Chen's relation.
    pub fn is_chen_stored(&self) -> bool {
        matches!(self.second, SecondLevel::Steps(_))
    }

    /// Second-level entry over `[t_i, t_{i+1}]` (row-major `d × d`).
    pub fn second_step(&self, i: usize) -> Vec<f64> {
        match &self.second {
            SecondLevel::Steps(s) => s.step(i).to_vec(),
            SecondLevel::Table { .. } => self.second(i, i + 1),
        }
    }

    /// Step entries of the second level, one `d × d` block per step.
    pub fn second_steps(&self) -> Vec<f64> {
        match &self.second {
            SecondLevel::Steps(s) => s.steps().to_vec(),
            SecondLevel::Table { .. } => (0..self.len() - 1).flat_map(|i| self.second(i, i + 1)).collect(),
        }
    }

    /// Second-level entry over `[t_i, t_j]`.
    pub fn second(&self, i: usize, j: usize) -> Vec<f64> {
        match &self.second {
            SecondLevel::Steps(s) => s.compose(i, j),
            SecondLevel::Table { n, d, entries } => {
                let w = d * d;
                entries[(i * n + j) * w..(i * n + j + 1) * w].to_vec()
            }
        }
    }

    /// Antisymmetric part `½(A - Aᵀ)` of the second level over `[t_i, t_j]`.
    pub fn levy_area(&self, i: usize, j: usize) -> Vec<f64> {
        let d = self.dim();
        let a = self.second(i, j);
        let mut out = vec![0.0; d * d];
        for r in 0..d {
            for c in 0..d {
                out[r * d + c] = 0.5 * (a[r * d + c] - a[c * d + r]);
            }
        }
        out
    }

    /// View of the second level as a two-parameter family.
    pub fn second_level(&self) -> SecondLevelView<'_> {
        SecondLevelView(self)
    }

    /// Piecewise-linear lift of the first level subsampled to `segments` steps.
    pub fn mollify(&self, segments: usize) -> Result<RoughPath> {
        let steps = self.len() - 1;
        if segments == 0 || !steps.is_multiple_of(segments) {
            return Err(Error::InvalidArgument(format!(
                "mollification level {segments} must divide the {steps} driver steps"
            )));
        }
        Ok(lift_piecewise_linear_with_p(&self.first.subsample(steps / segments), self.p))
    }
}

/// Borrowed two-parameter view of a second level.
pub struct SecondLevelView<'a>(&'a RoughPath);

impl TwoParameter for SecondLevelView<'_> {
    fn grid(&self) -> &[f64] {
        self.0.times()
    }

    fn width(&self) -> usize {
        self.0.dim() * self.0.dim()
    }

    fn row_into(&self, i: usize, end: usize, out: &mut [f64]) {
        match &self.0.second {
            SecondLevel::Steps(s) => s.row_into(i, end, out),
            SecondLevel::Table { n, d, entries } => {
                let w = d * d;
                for j in i + 1..=end {
                    out[(j - i - 1) * w..(j - i) * w].copy_from_slice(&entries[(i * n + j) * w..(i * n + j + 1) * w]);
                }
            }
        }
    }
}

/// Largest violation of Chen's relation over grid triples.
///
/// Step-stored lifts satisfy the relation by construction and report 0.
pub fn chen_residual(rp: &RoughPath) -> f64 {
    let (n, d) = match &rp.second {
        SecondLevel::Steps(_) => return 0.0,
        SecondLevel::Table { n, d, .. } => (*n, *d),
    };
    let x = rp.first_level();
    let mut worst = 0.0f64;
    for s in 0..n {
        for r in s..n {
            let a_sr = rp.second(s, r);
            let x_sr = x.increment(s, r);
            for t in r..n {
                let a_st = rp.second(s, t);
                let a_rt = rp.second(r, t);
                let x_rt = x.increment(r, t);
                for i in 0..d {
                    for j in 0..d {
                        let k = i * d + j;
                        let e = a_st[k] - a_sr[k] - a_rt[k] - x_sr[i] * x_rt[j];
                        worst = worst.max(e.abs());
                    }
                }
            }
        }
    }
    worst
}

/// Largest `|Sym(ζ^(2)_{s,t}) - ½ ζ_{s,t} ⊗ ζ_{s,t}|` over grid pairs.
pub fn symmetry_residual(rp: &RoughPath) -> f64 {
    let n = rp.len();
    let d = rp.dim();
    let x = rp.first_level();
    let view = rp.second_level();
    let w = d * d;
    let mut row = vec![0.0; w * n];
    let mut worst = 0.0f64;
    for i in 0..n - 1 {
        view.row_into(i, n - 1, &mut row);
        for j in i + 1..n {
            let a = &row[(j - i - 1) * w..(j - i) * w];
            let (xi, xj) = (x.value(i), x.value(j));
            for r in 0..d {
                for c in r..d {
                    let sym = 0.5 * (a[r * d + c] + a[c * d + r]);
                    let want = 0.5 * (xj[r] - xi[r]) * (xj[c] - xi[c]);
                    worst = worst.max((sym - want).abs());
                }
            }
        }
    }
    worst
}

/// Which rough-path metric to evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MetricMode {
    /// `‖η - ζ‖_p + ‖η^(2) - ζ^(2)‖_{p/2}`.
    PVar,
    /// `‖η - ζ‖_{1/p-Höl} + ‖η^(2) - ζ^(2)‖_{2/p-Höl}`.
    Holder,
}

/// Inhomogeneous rough-path distance between two lifts on the same grid.
///
/// Second levels are composed separately before subtracting. The exponent is `a.p()`.
pub fn rough_metric(a: &RoughPath, b: &RoughPath, mode: MetricMode) -> Result<f64> {
    same_grid(a.times(), b.times())?;
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch { context: "rough metric", expected: a.dim(), found: b.dim() });
    }
    let p = a.p();
    let d1 = difference(a.first_level(), b.first_level())?;
    let (sa, sb) = (a.second_level(), b.second_level());
    let d2 = difference(&sa, &sb)?;
    Ok(match mode {
        MetricMode::PVar => p_variation_full(&d1, p)? + p_variation_full(&d2, p / 2.0)?,
        MetricMode::Holder => holder_norm(&d1, 1.0 / p)? + holder_norm(&d2, 2.0 / p)?,
    })
}

/// Homogeneous norm `‖ζ‖_{1/p-Höl} + ‖ζ^(2)‖_{2/p-Höl}^{1/2}`.
pub fn homogeneous_holder_norm(rp: &RoughPath) -> Result<f64> {
    let p = rp.p();
    Ok(holder_norm(rp.first_level(), 1.0 / p)? + holder_norm(&rp.second_level(), 2.0 / p)?.sqrt())
}

/// A path `X` with Gubinelli derivative `X′` relative to a rough path.
///
/// Values are `dim`-vectors; derivatives are `dim × d` matrices stored row-major.
#[derive(Debug, Clone)]
pub struct ControlledPath {
    values: SampledPath,
    deriv: Vec<f64>,
    driver: Arc<SampledPath>,
    /// Grid index in the driver of the first value.
    offset: usize,
    reference: RoughPathId,
}

impl ControlledPath {
    /// Controlled path on a contiguous window of the rough path's grid.
    pub fn new(rp: &RoughPath, values: SampledPath, deriv: Vec<f64>) -> Result<Self> {
        let offset = rp.first_level().index_of(values.start_time())?;
        let end = offset + values.len();
        if end > rp.len() {
            return Err(Error::GridMismatch("controlled path extends beyond the driver grid".into()));
        }
        same_grid(values.times(), &rp.times()[offset..end])?;
        let w = values.dim() * rp.dim();
        if deriv.len() != w * values.len() {
            return Err(Error::DimensionMismatch {
                context: "Gubinelli derivative",
                expected: w * values.len(),
                found: deriv.len(),
            });
        }
        Ok(ControlledPath { values, deriv, driver: rp.first_level_arc(), offset, reference: rp.id() })
    }

    /// `X = ζ` with `X′ = I`.
    pub fn identity(rp: &RoughPath) -> Self {
        let d = rp.dim();
        let mut eye = vec![0.0; d * d];
        (0..d).for_each(|k| eye[k * d + k] = 1.0);
        let deriv = eye.repeat(rp.len());
        ControlledPath::new(rp, rp.first_level().clone(), deriv).expect("shapes agree")
    }

    /// Constant path with zero derivative.
    pub fn constant(rp: &RoughPath, value: &[f64]) -> Self {
        let values = SampledPath::constant(rp.times().to_vec(), value).expect("grid is valid");
        let deriv = vec![0.0; value.len() * rp.dim() * rp.len()];
        ControlledPath::new(rp, values, deriv).expect("shapes agree")
    }

    pub fn values(&self) -> &SampledPath {
        &self.values
    }

    pub fn times(&self) -> &[f64] {
        self.values.times()
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Dimension of the values.
    pub fn dim(&self) -> usize {
        self.values.dim()
    }

    /// Dimension of the driving path.
    pub fn driver_dim(&self) -> usize {
        self.driver.dim()
    }

    pub fn reference(&self) -> RoughPathId {
        self.reference
    }

    /// Driving first level over the window of this path.
    pub fn driver_value(&self, i: usize) -> &[f64] {
        self.driver.value(self.offset + i)
    }

    /// Grid index in the driver of the first value.
    pub fn offset(&self) -> usize {
        self.offset
    }

    /// Gubinelli derivative at grid index `i`.
    pub fn derivative(&self, i: usize) -> &[f64] {
        let w = self.dim() * self.driver_dim();
        &self.deriv[i * w..(i + 1) * w]
    }

    /// Gubinelli derivative as a path of flattened matrices.
    pub fn derivative_path(&self) -> SampledPath {
        SampledPath::from_flat(self.times().to_vec(), self.dim() * self.driver_dim(), self.deriv.clone())
            .expect("shapes agree")
    }

    /// Remainder `R^X_{s,t} = X_{s,t} - X′_s ζ_{s,t}`.
    pub fn remainder(&self) -> Remainder<'_> {
        Remainder(self)
    }
}

/// Remainder of a controlled path, evaluated exactly on every grid pair.
pub struct Remainder<'a>(&'a ControlledPath);

impl Remainder<'_> {
    /// Step entries `R_{t_i, t_{i+1}}` with the additive tag.
    pub fn steps(&self) -> TwoParamIncrements {
        let x = self.0;
        let m = x.dim();
        let mut steps = vec![0.0; m * (x.len() - 1)];
        for i in 0..x.len() - 1 {
            self.row_into(i, i + 1, &mut steps[i * m..(i + 1) * m]);
        }
        TwoParamIncrements::additive(x.times().to_vec(), m, 1, steps).expect("shapes agree")
    }
}

impl TwoParameter for Remainder<'_> {
    fn grid(&self) -> &[f64] {
        self.0.times()
    }

    fn width(&self) -> usize {
        self.0.dim()
    }

    fn row_into(&self, i: usize, end: usize, out: &mut [f64]) {
        let x = self.0;
        let (m, d) = (x.dim(), x.driver_dim());
        let xi = x.values.value(i);
        let zi = x.driver_value(i);
        let der = x.derivative(i);
        for j in i + 1..=end {
            let xj = x.values.value(j);
            let zj = x.driver_value(j);
            let o = &mut out[(j - i - 1) * m..(j - i) * m];
            for r in 0..m {
                let mut v = xj[r] - xi[r];
                for c in 0..d {
                    v -= der[r * d + c] * (zj[c] - zi[c]);
                }
                o[r] = v;
            }
        }
    }
}

/// Stand-alone form of [`ControlledPath::remainder`].
pub fn remainder(xp: &ControlledPath) -> Remainder<'_> {
    xp.remainder()
}

/// Compensated rough integral `∫ Y dζ` over `interval`, returned as a running integral.
///
/// The integrand takes values in `e × d` matrices (row-major, so `Y.dim() = e·d`) and its
/// derivative `Y′` in `(e·d) × d`. Each step contributes `Y_s ζ_{s,t} + Y′_s ζ^(2)_{s,t}`.
pub fn rough_integral(y: &ControlledPath, rp: &RoughPath, interval: (f64, f64)) -> Result<SampledPath> {
    if y.reference() != rp.id() {
        return Err(Error::ReferenceMismatch);
    }
    let d = rp.dim();
    if !y.dim().is_multiple_of(d) {
        return Err(Error::DimensionMismatch { context: "integrand", expected: d, found: y.dim() });
    }
    let e = y.dim() / d;
    let (i0, i1) = interval_indices(rp.times(), interval)?;
    if i0 < y.offset || i1 >= y.offset + y.len() {
        return Err(Error::GridMismatch("integration interval outside the integrand's grid".into()));
    }
    let x = rp.first_level();
    let mut acc = vec![0.0; e];
    let mut data = Vec::with_capacity(e * (i1 - i0 + 1));
    data.extend_from_slice(&acc);
    let mut inc = vec![0.0; d];
    for i in i0..i1 {
        x.increment_into(i, i + 1, &mut inc);
        let a2 = rp.second_step(i);
        let yv = y.values.value(i - y.offset);
        let yd = y.derivative(i - y.offset);
        for r in 0..e {
            let mut s = 0.0;
            for c in 0..d {
                s += yv[r * d + c] * inc[c];
                let k = r * d + c;
                for b in 0..d {
                    s += yd[k * d + b] * a2[b * d + c];
                }
            }
            acc[r] += s;
        }
        data.extend_from_slice(&acc);
    }
    SampledPath::from_flat(rp.times()[i0..=i1].to_vec(), e, data)
}

/// Composition `(ψ(X, γ), D_xψ(X, γ) X′)` with `γ` treated as having zero derivative.
///
/// `psi` returns a vector of length `k`, `dpsi` the `k × m` Jacobian in `x` (row-major).
pub fn compose_controlled(
    psi: impl Fn(&[f64], &[f64]) -> Vec<f64>,
    dpsi: impl Fn(&[f64], &[f64]) -> Vec<f64>,
    xp: &ControlledPath,
    gamma: &SampledPath,
) -> Result<ControlledPath> {
    same_grid(xp.times(), gamma.times())?;
    let (m, d) = (xp.dim(), xp.driver_dim());
    let n = xp.len();
    let mut values = Vec::new();
    let mut deriv = Vec::new();
    let mut k_out = None;
    for i in 0..n {
        let (x, a) = (xp.values.value(i), gamma.value(i));
        let v = psi(x, a);
        let k = *k_out.get_or_insert(v.len());
        if v.len() != k {
            return Err(Error::DimensionMismatch { context: "composed value", expected: k, found: v.len() });
        }
        let jac = dpsi(x, a);
        if jac.len() != k * m {
            return Err(Error::DimensionMismatch { context: "composed Jacobian", expected: k * m, found: jac.len() });
        }
        let xd = xp.derivative(i);
        for r in 0..k {
            for c in 0..d {
                deriv.push((0..m).map(|j| jac[r * m + j] * xd[j * d + c]).sum());
            }
        }
        values.extend(v);
    }
    let k = k_out.unwrap_or(0);
    let values = SampledPath::from_flat(xp.times().to_vec(), k, values)?;
    Ok(ControlledPath { values, deriv, driver: Arc::clone(&xp.driver), offset: xp.offset, reference: xp.reference })
}

/// Frobenius norm of a flat matrix.
pub fn frobenius(m: &[f64]) -> f64 {
    norm(m)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn linear(v: &[f64], n: usize, t1: f64) -> SampledPath {
        let d = v.len();
        SampledPath::from_fn(uniform_grid(0.0, t1, n), d, |t| v.iter().map(|c| c * t).collect()).unwrap()
    }

    #[test]
    fn linear_segment_second_level() {
        let rp = lift_piecewise_linear(&linear(&[1.0, -2.0], 7, 3.0));
        let a = rp.second(0, 7);
        let want = [0.5 * 9.0, -9.0, -9.0, 0.5 * 9.0 * 4.0];
        for (x, y) in a.iter().zip(want) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn l_path_area() {
        let x = SampledPath::new(vec![0.0, 1.0, 2.0], vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![1.0, 1.0]]).unwrap();
        let rp = lift_piecewise_linear(&x);
        assert_eq!(rp.second(0, 2), vec![0.5, 1.0, 0.0, 0.5]);
        assert_eq!(rp.levy_area(0, 2)[1], 0.5);
        // midpoint-rule quadrature of ∫ ζ ⊗ dζ on a fine linear interpolation
        let fine = x.refine(2000);
        let mut q = [0.0; 4];
        for i in 0..fine.len() - 1 {
            let (a, b) = (fine.value(i), fine.value(i + 1));
            for r in 0..2 {
                for c in 0..2 {
                    q[r * 2 + c] += (0.5 * (a[r] + b[r])) * (b[c] - a[c]);
                }
            }
        }
        for (x, y) in q.iter().zip(rp.second(0, 2)) {
            assert!((x - y).abs() < 1e-9);
        }
    }

    #[test]
    fn constant_path_has_zero_second_level() {
        let c = SampledPath::constant(uniform_grid(0.0, 1.0, 4), &[1.0, 2.0]).unwrap();
        let rp = lift_piecewise_linear(&c);
        assert!(rp.second(0, 4).iter().all(|v| *v == 0.0));
    }

    #[test]
    fn corrupted_table_violates_chen() {
        let x = brownian_path(3, 6, 1.0, 2);
        let rp = lift_piecewise_linear(&x);
        let n = x.len();
        let mut table: Vec<Vec<Vec<f64>>> = (0..n).map(|i| (0..n).map(|j| rp.second(i, j)).collect()).collect();
        let ok = RoughPath::from_table(x.clone(), table.clone(), true, DEFAULT_P).unwrap();
        assert!(chen_residual(&ok) < 1e-14);
        table[1][4][1] += 0.1;
        assert!(RoughPath::from_table(x.clone(), table.clone(), false, DEFAULT_P).is_err());
        let bad = RoughPath::from_table_unchecked(x, table, false, DEFAULT_P).unwrap();
        assert!(chen_residual(&bad) > 0.05);
    }

    #[test]
    fn metric_examples() {
        let t = vec![0.0, 1.0];
        let a = lift_piecewise_linear_with_p(&SampledPath::scalar(t.clone(), vec![0.0, 1.0]).unwrap(), 2.0);
        let b = lift_piecewise_linear_with_p(&SampledPath::scalar(t, vec![0.0, 2.0]).unwrap(), 2.0);
        assert!((rough_metric(&a, &b, MetricMode::PVar).unwrap() - 2.5).abs() < 1e-14);
        assert_eq!(rough_metric(&a, &a, MetricMode::PVar).unwrap(), 0.0);
        let w = brownian_path(1, 32, 1.0, 2);
        let (r1, r2) = (lift_piecewise_linear(&w), lift_piecewise_linear(&w.shifted(&[3.0, -1.0])));
        assert!(rough_metric(&r1, &r2, MetricMode::PVar).unwrap() < 1e-12);
        assert!(rough_metric(&r1, &r2, MetricMode::Holder).unwrap() < 1e-12);
    }

    #[test]
    fn integral_of_linear_path_is_exact() {
        for n in [1, 3, 17] {
            let rp = lift_piecewise_linear(&linear(&[1.0], n, 1.0));
            let y = ControlledPath::identity(&rp);
            let out = rough_integral(&y, &rp, (0.0, 1.0)).unwrap();
            assert!((out.last()[0] - 0.5).abs() < 1e-15);
        }
    }

    #[test]
    fn constant_integrand() {
        let rp = lift_brownian_stratonovich(5, 64, 1.0, 2).unwrap();
        let y = ControlledPath::constant(&rp, &[2.0, -1.0]);
        let out = rough_integral(&y, &rp, (0.0, 1.0)).unwrap();
        let z = rp.first_level().increment(0, 64);
        assert!((out.last()[0] - (2.0 * z[0] - z[1])).abs() < 1e-13);
    }

    #[test]
    fn reference_mismatch() {
        let a = lift_brownian_stratonovich(1, 8, 1.0, 1).unwrap();
        let b = lift_brownian_stratonovich(2, 8, 1.0, 1).unwrap();
        let y = ControlledPath::identity(&a);
        assert!(matches!(rough_integral(&y, &b, (0.0, 1.0)), Err(Error::ReferenceMismatch)));
    }

    #[test]
    fn composition_derivatives() {
        let rp = lift_brownian_stratonovich(9, 16, 1.0, 1).unwrap();
        let x = ControlledPath::identity(&rp);
        let gamma = SampledPath::from_fn(rp.times().to_vec(), 1, |t| vec![1.0 + t]).unwrap();
        let id = compose_controlled(|x, _| x.to_vec(), |_, _| vec![1.0], &x, &gamma).unwrap();
        assert_eq!(id.values(), x.values());
        let ga = compose_controlled(|_, a| a.to_vec(), |_, _| vec![0.0], &x, &gamma).unwrap();
        assert!((0..ga.len()).all(|i| ga.derivative(i)[0] == 0.0));
        let psi = compose_controlled(|x, a| vec![-a[0] * x[0]], |_, a| vec![-a[0]], &x, &gamma).unwrap();
        for i in 0..psi.len() {
            assert!((psi.derivative(i)[0] + gamma.value(i)[0]).abs() < 1e-15);
        }
    }

    #[test]
    fn remainder_examples() {
        let rp = lift_brownian_stratonovich(4, 16, 1.0, 1).unwrap();
        let lin = compose_controlled(|x, _| vec![3.0 * x[0] + 1.0], |_, _| vec![3.0], &ControlledPath::identity(&rp), rp.first_level()).unwrap();
        let steps = lin.remainder().steps();
        assert!(steps.steps().iter().all(|v| v.abs() < 1e-14));
        let zero_deriv = ControlledPath::new(&rp, rp.first_level().clone(), vec![0.0; 17]).unwrap();
        let s = zero_deriv.remainder().steps();
        for i in 0..16 {
            assert_eq!(s.step(i)[0], rp.first_level().increment(i, i + 1)[0]);
        }
    }
}
