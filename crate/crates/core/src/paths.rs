//! Grid-sampled paths, two-parameter increments and their variation norms.
//!
//! All suprema over partitions are taken over partitions made of grid points.

use crate::error::{Error, Result};

/// Largest grid accepted by [`p_variation_bruteforce`].
pub const BRUTEFORCE_MAX_LEN: usize = 16;

/// A strictly increasing time grid carrying one `dim`-vector per time.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledPath {
    times: Vec<f64>,
    dim: usize,
    data: Vec<f64>,
}

/// Uniform grid of `n_steps + 1` points from `t0` to `t1` with exact endpoints.
pub fn uniform_grid(t0: f64, t1: f64, n_steps: usize) -> Vec<f64> {
    let n = n_steps.max(1);
    let h = (t1 - t0) / n as f64;
    let mut out: Vec<f64> = (0..=n).map(|i| t0 + h * i as f64).collect();
    out[n] = t1;
    out
}

fn check_times(times: &[f64]) -> Result<()> {
    if times.is_empty() {
        return Err(Error::InvalidGrid("empty time grid".into()));
    }
    if let Some(t) = times.iter().find(|t| !t.is_finite()) {
        return Err(Error::InvalidGrid(format!("non-finite time {t}")));
    }
    for w in times.windows(2) {
        if w[1] <= w[0] {
            return Err(Error::InvalidGrid(format!(
                "times must be strictly increasing ({} followed by {})",
                w[0], w[1]
            )));
        }
    }
    Ok(())
}

/// Index of grid point `t`, allowing for rounding in the decimal representation.
pub fn grid_index(times: &[f64], t: f64) -> Result<usize> {
    let tol = 1e-12 * t.abs().max(1.0);
    let k = times.partition_point(|&s| s < t - tol);
    if k < times.len() && (times[k] - t).abs() <= tol {
        Ok(k)
    } else {
        Err(Error::NotGridPoint(t))
    }
}

impl SampledPath {
    /// Builds a path from one vector per time.
    pub fn new(times: Vec<f64>, values: Vec<Vec<f64>>) -> Result<Self> {
        if values.len() != times.len() {
            return Err(Error::DimensionMismatch {
                context: "path values",
                expected: times.len(),
                found: values.len(),
            });
        }
        let dim = values.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(dim * values.len());
        for v in &values {
            if v.len() != dim {
                return Err(Error::DimensionMismatch {
                    context: "path value",
                    expected: dim,
                    found: v.len(),
                });
            }
            data.extend_from_slice(v);
        }
        Self::from_flat(times, dim, data)
    }

    /// Builds a path from row-major storage, `dim` entries per time.
    pub fn from_flat(times: Vec<f64>, dim: usize, data: Vec<f64>) -> Result<Self> {
        check_times(&times)?;
        if dim == 0 {
            return Err(Error::InvalidGrid("path dimension must be positive".into()));
        }
        if data.len() != dim * times.len() {
            return Err(Error::DimensionMismatch {
                context: "path storage",
                expected: dim * times.len(),
                found: data.len(),
            });
        }
        Ok(Self { times, dim, data })
    }

    pub fn scalar(times: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        Self::from_flat(times, 1, values)
    }

    /// Samples `f` at every grid time.
    pub fn from_fn(times: Vec<f64>, dim: usize, mut f: impl FnMut(f64) -> Vec<f64>) -> Result<Self> {
        let mut data = Vec::with_capacity(dim * times.len());
        for &t in &times {
            let v = f(t);
            if v.len() != dim {
                return Err(Error::DimensionMismatch {
                    context: "sampled function",
                    expected: dim,
                    found: v.len(),
                });
            }
            data.extend(v);
        }
        Self::from_flat(times, dim, data)
    }

    pub fn constant(times: Vec<f64>, value: &[f64]) -> Result<Self> {
        let data = value.repeat(times.len());
        Self::from_flat(times, value.len(), data)
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn value(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn first(&self) -> &[f64] {
        self.value(0)
    }

    pub fn last(&self) -> &[f64] {
        self.value(self.len() - 1)
    }

    pub fn start_time(&self) -> f64 {
        self.times[0]
    }

    pub fn end_time(&self) -> f64 {
        self.times[self.times.len() - 1]
    }

    pub fn index_of(&self, t: f64) -> Result<usize> {
        grid_index(&self.times, t)
    }

    /// Increment `x_j - x_i`.
    pub fn increment(&self, i: usize, j: usize) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        self.increment_into(i, j, &mut out);
        out
    }

    pub fn increment_into(&self, i: usize, j: usize, out: &mut [f64]) {
        let (a, b) = (self.value(i), self.value(j));
        for k in 0..self.dim {
            out[k] = b[k] - a[k];
        }
    }

    /// Sub-path on grid indices `i0..=i1`.
    pub fn window(&self, i0: usize, i1: usize) -> SampledPath {
        SampledPath {
            times: self.times[i0..=i1].to_vec(),
            dim: self.dim,
            data: self.data[i0 * self.dim..(i1 + 1) * self.dim].to_vec(),
        }
    }

    /// Sub-path on the grid interval `[s, t]`.
    pub fn restrict(&self, s: f64, t: f64) -> Result<SampledPath> {
        let (i, j) = interval_indices(&self.times, (s, t))?;
        Ok(self.window(i, j))
    }

    /// Keeps every `stride`-th point; the last point is always kept.
    pub fn subsample(&self, stride: usize) -> SampledPath {
        let stride = stride.max(1);
        let n = self.len();
        let mut idx: Vec<usize> = (0..n).step_by(stride).collect();
        if *idx.last().unwrap() != n - 1 {
            idx.push(n - 1);
        }
        self.select(&idx)
    }

    /// Path restricted to the given (increasing) indices.
    pub fn select(&self, idx: &[usize]) -> SampledPath {
        let mut data = Vec::with_capacity(idx.len() * self.dim);
        for &i in idx {
            data.extend_from_slice(self.value(i));
        }
        SampledPath {
            times: idx.iter().map(|&i| self.times[i]).collect(),
            dim: self.dim,
            data,
        }
    }

    /// Piecewise-linear interpolant at time `t`, clamped to the grid range.
    pub fn interpolate_into(&self, t: f64, out: &mut [f64]) {
        let n = self.len();
        if n == 1 || t <= self.times[0] {
            out.copy_from_slice(self.value(0));
            return;
        }
        if t >= self.times[n - 1] {
            out.copy_from_slice(self.value(n - 1));
            return;
        }
        let k = self.times.partition_point(|&s| s <= t) - 1;
        let (t0, t1) = (self.times[k], self.times[k + 1]);
        let w = (t - t0) / (t1 - t0);
        let (a, b) = (self.value(k), self.value(k + 1));
        for c in 0..self.dim {
            out[c] = a[c] + w * (b[c] - a[c]);
        }
    }

    pub fn interpolate(&self, t: f64) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        self.interpolate_into(t, &mut out);
        out
    }

    /// Piecewise-linear interpolant sampled on a new grid.
    pub fn resample(&self, times: Vec<f64>) -> Result<SampledPath> {
        let mut data = vec![0.0; times.len() * self.dim];
        for (i, &t) in times.iter().enumerate() {
            self.interpolate_into(t, &mut data[i * self.dim..(i + 1) * self.dim]);
        }
        SampledPath::from_flat(times, self.dim, data)
    }

    /// Inserts `factor - 1` equally spaced points into every step.
    pub fn refine(&self, factor: usize) -> SampledPath {
        let factor = factor.max(1);
        let mut times = Vec::with_capacity((self.len() - 1) * factor + 1);
        for w in self.times.windows(2) {
            for k in 0..factor {
                times.push(w[0] + (w[1] - w[0]) * k as f64 / factor as f64);
            }
        }
        times.push(self.end_time());
        self.resample(times).expect("refined grid is increasing")
    }

    /// Scalar path made of coordinate `k`.
    pub fn component(&self, k: usize) -> SampledPath {
        SampledPath {
            times: self.times.clone(),
            dim: 1,
            data: (0..self.len()).map(|i| self.value(i)[k]).collect(),
        }
    }

    /// Pointwise map of the values.
    pub fn map(&self, dim: usize, mut f: impl FnMut(f64, &[f64]) -> Vec<f64>) -> Result<SampledPath> {
        let mut data = Vec::with_capacity(dim * self.len());
        for i in 0..self.len() {
            let v = f(self.times[i], self.value(i));
            if v.len() != dim {
                return Err(Error::DimensionMismatch {
                    context: "mapped value",
                    expected: dim,
                    found: v.len(),
                });
            }
            data.extend(v);
        }
        SampledPath::from_flat(self.times.clone(), dim, data)
    }

    /// Pointwise difference `self - other` on a shared grid.
    pub fn difference(&self, other: &SampledPath) -> Result<SampledPath> {
        same_grid(&self.times, &other.times)?;
        if self.dim != other.dim {
            return Err(Error::DimensionMismatch {
                context: "path difference",
                expected: self.dim,
                found: other.dim,
            });
        }
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect();
        Ok(SampledPath { times: self.times.clone(), dim: self.dim, data })
    }

    /// Adds a constant vector to every value.
    pub fn shifted(&self, shift: &[f64]) -> SampledPath {
        let mut out = self.clone();
        for (k, v) in out.data.iter_mut().enumerate() {
            *v += shift[k % self.dim];
        }
        out
    }

    /// Multiplies every value by `s`.
    pub fn scaled(&self, s: f64) -> SampledPath {
        let mut out = self.clone();
        out.data.iter_mut().for_each(|v| *v *= s);
        out
    }

    /// Largest Euclidean norm of a value.
    pub fn sup_norm(&self) -> f64 {
        (0..self.len()).map(|i| norm(self.value(i))).fold(0.0, f64::max)
    }
}

pub(crate) fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub(crate) fn same_grid(a: &[f64], b: &[f64]) -> Result<()> {
    if a.len() != b.len() {
        return Err(Error::GridMismatch(format!("grid lengths {} and {}", a.len(), b.len())));
    }
    let scale = a.iter().chain(b).fold(1.0f64, |m, t| m.max(t.abs()));
    if let Some(k) = a.iter().zip(b).position(|(x, y)| (x - y).abs() > 1e-12 * scale) {
        return Err(Error::GridMismatch(format!("grids differ at index {k}")));
    }
    Ok(())
}

/// Composition rule for step-stored two-parameter increments.
#[derive(Debug, Clone, PartialEq)]
pub enum Composition {
    /// `A_{s,u} = A_{s,t} + A_{t,u}`.
    Additive,
    /// `A_{s,u} = A_{s,t} + A_{t,u} + x_{s,t} ⊗ x_{t,u}` for the stored first level `x`.
    Chen(SampledPath),
}

/// Two-parameter object stored through its step entries `A_{t_i, t_{i+1}}`.
///
/// Entries are `rows × cols` tensors stored row-major. Values over longer
/// intervals are reconstructed with the composition rule.
#[derive(Debug, Clone, PartialEq)]
pub struct TwoParamIncrements {
    times: Vec<f64>,
    rows: usize,
    cols: usize,
    steps: Vec<f64>,
    rule: Composition,
}

impl TwoParamIncrements {
    /// Additively composed increments from flat step entries.
    pub fn additive(times: Vec<f64>, rows: usize, cols: usize, steps: Vec<f64>) -> Result<Self> {
        check_times(&times)?;
        let width = rows * cols;
        if width == 0 || steps.len() != width * (times.len() - 1) {
            return Err(Error::DimensionMismatch {
                context: "step entries",
                expected: width * (times.len() - 1),
                found: steps.len(),
            });
        }
        Ok(Self { times, rows, cols, steps, rule: Composition::Additive })
    }

    /// Chen-composed `d × d` increments over the first level `path`.
    pub fn chen(path: SampledPath, steps: Vec<f64>) -> Result<Self> {
        let d = path.dim();
        if steps.len() != d * d * (path.len() - 1) {
            return Err(Error::DimensionMismatch {
                context: "second-level steps",
                expected: d * d * (path.len() - 1),
                found: steps.len(),
            });
        }
        Ok(Self {
            times: path.times.clone(),
            rows: d,
            cols: d,
            steps,
            rule: Composition::Chen(path),
        })
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn rule(&self) -> &Composition {
        &self.rule
    }

    pub fn steps(&self) -> &[f64] {
        &self.steps
    }

    /// Number of step entries.
    pub fn n_steps(&self) -> usize {
        self.times.len() - 1
    }

    /// Step entry over `[t_i, t_{i+1}]`.
    pub fn step(&self, i: usize) -> &[f64] {
        let w = self.rows * self.cols;
        &self.steps[i * w..(i + 1) * w]
    }

    /// Composed value over `[t_i, t_j]`.
    pub fn compose(&self, i: usize, j: usize) -> Vec<f64> {
        let w = self.rows * self.cols;
        let mut acc = vec![0.0; w];
        if j <= i {
            return acc;
        }
        let mut buf = vec![0.0; w * (j - i)];
        self.row_into(i, j, &mut buf);
        acc.copy_from_slice(&buf[w * (j - i - 1)..]);
        acc
    }
}

/// A two-parameter family `(i, j) ↦ A_{t_i, t_j}` of fixed-width tensors on a grid.
///
/// Paths are two-parameter objects through their increments.
pub trait TwoParameter {
    fn grid(&self) -> &[f64];
    /// Number of scalar entries per value.
    fn width(&self) -> usize;
    /// Writes `A_{i,j}` for `j = i+1..=end` into consecutive blocks of `out`.
    fn row_into(&self, i: usize, end: usize, out: &mut [f64]);
}

impl TwoParameter for SampledPath {
    fn grid(&self) -> &[f64] {
        &self.times
    }

    fn width(&self) -> usize {
        self.dim
    }

    fn row_into(&self, i: usize, end: usize, out: &mut [f64]) {
        let d = self.dim;
        let base = self.value(i);
        for j in i + 1..=end {
            let v = self.value(j);
            let o = &mut out[(j - i - 1) * d..(j - i) * d];
            for k in 0..d {
                o[k] = v[k] - base[k];
            }
        }
    }
}

impl TwoParameter for TwoParamIncrements {
    fn grid(&self) -> &[f64] {
        &self.times
    }

    fn width(&self) -> usize {
        self.rows * self.cols
    }

    fn row_into(&self, i: usize, end: usize, out: &mut [f64]) {
        // Neumaier-compensated running sums.
        let w = self.rows * self.cols;
        let mut acc = vec![0.0; w];
        let mut comp = vec![0.0; w];
        let add = |acc: &mut f64, comp: &mut f64, v: f64| {
            let t = *acc + v;
            *comp += if acc.abs() >= v.abs() { (*acc - t) + v } else { (v - t) + *acc };
            *acc = t;
        };
        for j in i + 1..=end {
            let step = self.step(j - 1);
            for k in 0..w {
                add(&mut acc[k], &mut comp[k], step[k]);
            }
            if let Composition::Chen(x) = &self.rule {
                if j - 1 > i {
                    let (xi, xm, xj) = (x.value(i), x.value(j - 1), x.value(j));
                    let d = self.rows;
                    for a in 0..d {
                        let left = xm[a] - xi[a];
                        for b in 0..d {
                            add(&mut acc[a * d + b], &mut comp[a * d + b], left * (xj[b] - xm[b]));
                        }
                    }
                }
            }
            for (o, (a, c)) in out[(j - i - 1) * w..(j - i) * w].iter_mut().zip(acc.iter().zip(&comp)) {
                *o = a + c;
            }
        }
    }
}

/// Pointwise difference `A - B` of two two-parameter families, each composed first.
pub struct Difference<'a, A: ?Sized, B: ?Sized> {
    pub left: &'a A,
    pub right: &'a B,
}

impl<A: TwoParameter + ?Sized, B: TwoParameter + ?Sized> TwoParameter for Difference<'_, A, B> {
    fn grid(&self) -> &[f64] {
        self.left.grid()
    }

    fn width(&self) -> usize {
        self.left.width()
    }

    fn row_into(&self, i: usize, end: usize, out: &mut [f64]) {
        let n = self.left.width() * (end - i);
        let mut other = vec![0.0; n];
        self.left.row_into(i, end, out);
        self.right.row_into(i, end, &mut other);
        out[..n].iter_mut().zip(&other).for_each(|(a, b)| *a -= b);
    }
}

/// Checks that two families are comparable and returns their difference view.
pub fn difference<'a, A: TwoParameter + ?Sized, B: TwoParameter + ?Sized>(
    left: &'a A,
    right: &'a B,
) -> Result<Difference<'a, A, B>> {
    same_grid(left.grid(), right.grid())?;
    if left.width() != right.width() {
        return Err(Error::DimensionMismatch {
            context: "two-parameter difference",
            expected: left.width(),
            found: right.width(),
        });
    }
    Ok(Difference { left, right })
}

/// Norms `|A_{i,j}|` for `j = i+1..=end`.
pub(crate) fn row_norms<X: TwoParameter + ?Sized>(x: &X, i: usize, end: usize, buf: &mut Vec<f64>, out: &mut Vec<f64>) {
    let w = x.width();
    buf.resize(w * (end - i), 0.0);
    x.row_into(i, end, buf);
    out.clear();
    out.extend(buf.chunks_exact(w).map(norm));
}

/// Resolves an interval given in times to grid indices.
pub fn interval_indices(times: &[f64], interval: (f64, f64)) -> Result<(usize, usize)> {
    let i = grid_index(times, interval.0)?;
    let j = grid_index(times, interval.1)?;
    if j < i {
        return Err(Error::InvalidArgument(format!(
            "interval [{}, {}] is reversed",
            interval.0, interval.1
        )));
    }
    Ok((i, j))
}

/// Whole grid as an interval.
pub fn full_interval<X: TwoParameter + ?Sized>(x: &X) -> (f64, f64) {
    let g = x.grid();
    (g[0], g[g.len() - 1])
}

fn check_exponent(p: f64) -> Result<()> {
    if !(p.is_finite() && p >= 1.0) {
        return Err(Error::InvalidExponent(p));
    }
    Ok(())
}

/// Sum `Σ |A_{t_k, t_{k+1}}|^p` maximised over grid partitions of indices `[i, j]`.
pub(crate) fn pvar_power_indices<X: TwoParameter + ?Sized>(x: &X, p: f64, i: usize, j: usize) -> f64 {
    if j <= i {
        return 0.0;
    }
    let n = j - i + 1;
    let mut best = vec![f64::NEG_INFINITY; n];
    best[0] = 0.0;
    let (mut buf, mut norms) = (Vec::new(), Vec::new());
    for s in 0..n - 1 {
        row_norms(x, i + s, j, &mut buf, &mut norms);
        let base = best[s];
        for (k, r) in norms.iter().enumerate() {
            let cand = base + pow(*r, p);
            if cand > best[s + 1 + k] {
                best[s + 1 + k] = cand;
            }
        }
    }
    best[n - 1]
}

#[inline]
fn pow(r: f64, p: f64) -> f64 {
    if p == 1.0 {
        r
    } else if p == 2.0 {
        r * r
    } else {
        r.powf(p)
    }
}

#[inline]
fn root(v: f64, p: f64) -> f64 {
    if p == 1.0 {
        v
    } else if p == 2.0 {
        v.sqrt()
    } else {
        v.powf(1.0 / p)
    }
}

/// Grid p-variation over `interval` by dynamic programming over grid indices.
///
/// ```
/// use roughctrl::paths::{p_variation, SampledPath};
/// let x = SampledPath::scalar(vec![0.0, 1.0, 2.0], vec![0.0, 1.0, 0.0]).unwrap();
/// let v = p_variation(&x, 2.0, (0.0, 2.0)).unwrap();
/// assert!((v - 2f64.sqrt()).abs() < 1e-15);
/// ```
pub fn p_variation<X: TwoParameter + ?Sized>(x: &X, p: f64, interval: (f64, f64)) -> Result<f64> {
    check_exponent(p)?;
    let (i, j) = interval_indices(x.grid(), interval)?;
    Ok(root(pvar_power_indices(x, p, i, j), p))
}

/// p-variation over the whole grid.
pub fn p_variation_full<X: TwoParameter + ?Sized>(x: &X, p: f64) -> Result<f64> {
    p_variation(x, p, full_interval(x))
}

/// Exhaustive p-variation over all `2^(n-2)` grid partitions. Oracle for [`p_variation`].
pub fn p_variation_bruteforce<X: TwoParameter + ?Sized>(x: &X, p: f64, interval: (f64, f64)) -> Result<f64> {
    check_exponent(p)?;
    let (i, j) = interval_indices(x.grid(), interval)?;
    let n = j - i + 1;
    if n > BRUTEFORCE_MAX_LEN {
        return Err(Error::TooLong { len: n, max: BRUTEFORCE_MAX_LEN });
    }
    if n < 2 {
        return Ok(0.0);
    }
    let mut table = vec![0.0; n * n];
    let (mut buf, mut norms) = (Vec::new(), Vec::new());
    for s in 0..n - 1 {
        row_norms(x, i + s, j, &mut buf, &mut norms);
        for (k, r) in norms.iter().enumerate() {
            table[s * n + s + 1 + k] = pow(*r, p);
        }
    }
    let interior = n - 2;
    let mut best = f64::NEG_INFINITY;
    for mask in 0u32..(1u32 << interior) {
        let mut prev = 0;
        let mut total = 0.0;
        for b in 0..interior {
            if mask & (1 << b) != 0 {
                total += table[prev * n + b + 1];
                prev = b + 1;
            }
        }
        total += table[prev * n + n - 1];
        best = best.max(total);
    }
    Ok(root(best, p))
}

/// Largest `|A_{s,t}| / (t - s)^exponent` over all grid pairs.
///
/// For a path this is the `exponent`-Hölder seminorm; for a second level pass `2/p`.
pub fn holder_norm<X: TwoParameter + ?Sized>(x: &X, exponent: f64) -> Result<f64> {
    if !(exponent > 0.0 && exponent <= 1.0) {
        return Err(Error::InvalidArgument(format!("Hölder exponent {exponent} outside (0, 1]")));
    }
    let t = x.grid();
    let n = t.len();
    if n < 2 {
        return Err(Error::InvalidGrid("Hölder norm needs at least two grid points".into()));
    }
    let (mut buf, mut norms) = (Vec::new(), Vec::new());
    let mut best = 0.0f64;
    for i in 0..n - 1 {
        row_norms(x, i, n - 1, &mut buf, &mut norms);
        for (k, r) in norms.iter().enumerate() {
            let dt = t[i + 1 + k] - t[i];
            best = best.max(r / dt.powf(exponent));
        }
    }
    Ok(best)
}

/// Both sides of the pasting inequality `‖X‖_p ≤ n (Σ ‖X‖_{p;piece}^p)^{1/p}`.
///
/// `breakpoints` are interior grid times cutting the whole grid into `n` pieces.
pub fn partition_paste_check<X: TwoParameter + ?Sized>(x: &X, p: f64, breakpoints: &[f64]) -> Result<(f64, f64)> {
    check_exponent(p)?;
    let t = x.grid();
    let last = t.len() - 1;
    let mut cuts = vec![0];
    for &b in breakpoints {
        let k = grid_index(t, b)?;
        if k <= *cuts.last().unwrap() || k >= last {
            return Err(Error::InvalidArgument(format!(
                "breakpoint {b} must be an increasing interior grid time"
            )));
        }
        cuts.push(k);
    }
    cuts.push(last);
    let lhs = root(pvar_power_indices(x, p, 0, last), p);
    let pieces = cuts.len() - 1;
    let sum: f64 = cuts.windows(2).map(|w| pvar_power_indices(x, p, w[0], w[1])).sum();
    Ok((lhs, pieces as f64 * root(sum, p)))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar(v: &[f64]) -> SampledPath {
        SampledPath::scalar((0..v.len()).map(|i| i as f64).collect(), v.to_vec()).unwrap()
    }

    #[test]
    fn pvar_small_examples() {
        let mono = scalar(&[0.0, 1.0, 2.0, 3.0]);
        assert!((p_variation_full(&mono, 2.0).unwrap() - 3.0).abs() < 1e-15);
        let zig = scalar(&[0.0, 1.0, 0.0]);
        assert!((p_variation_full(&zig, 2.0).unwrap() - 2f64.sqrt()).abs() < 1e-15);
        assert_eq!(p_variation_full(&zig, 1.0).unwrap(), 2.0);
    }

    #[test]
    fn bruteforce_examples() {
        let full = |v: &[f64], p| {
            let x = scalar(v);
            p_variation_bruteforce(&x, p, full_interval(&x)).unwrap()
        };
        assert!((full(&[0.0, 1.0, 2.0, 3.0], 2.0) - 3.0).abs() < 1e-15);
        assert!((full(&[0.0, 1.0, 0.0], 2.0) - 2f64.sqrt()).abs() < 1e-15);
        assert!((full(&[0.0, 1.0, 0.0, 1.0], 2.0) - 3f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn bruteforce_rejects_long_grid() {
        let x = scalar(&[0.0; 17]);
        assert!(matches!(
            p_variation_bruteforce(&x, 2.0, (0.0, 16.0)),
            Err(Error::TooLong { len: 17, .. })
        ));
    }

    #[test]
    fn pvar_errors() {
        let x = scalar(&[0.0, 1.0, 0.0]);
        assert!(matches!(p_variation(&x, 0.5, (0.0, 2.0)), Err(Error::InvalidExponent(_))));
        assert!(matches!(p_variation(&x, 2.0, (0.0, 1.5)), Err(Error::NotGridPoint(_))));
    }

    #[test]
    fn holder_examples() {
        let t = uniform_grid(0.0, 1.0, 10);
        let x = SampledPath::from_fn(t, 1, |s| vec![2.0 * s]).unwrap();
        assert!((holder_norm(&x, 0.5).unwrap() - 2.0).abs() < 1e-12);
        let c = SampledPath::constant(uniform_grid(0.0, 1.0, 5), &[3.0]).unwrap();
        assert_eq!(holder_norm(&c, 0.3).unwrap(), 0.0);
        let y = SampledPath::from_fn(uniform_grid(0.0, 4.0, 8), 1, |s| vec![s]).unwrap();
        assert!((holder_norm(&y, 0.5).unwrap() - 2.0).abs() < 1e-12);
        let single = SampledPath::scalar(vec![0.0], vec![1.0]).unwrap();
        assert!(holder_norm(&single, 0.5).is_err());
    }

    #[test]
    fn paste_examples() {
        let x = scalar(&[0.0, 1.0, 2.0, 3.0]);
        let (l, r) = partition_paste_check(&x, 2.0, &[2.0]).unwrap();
        assert!((l - 3.0).abs() < 1e-15);
        assert!((r - 2.0 * 5f64.sqrt()).abs() < 1e-14);
        let (l, r) = partition_paste_check(&x, 2.0, &[]).unwrap();
        assert_eq!(l, r);
        let z = scalar(&[0.0, 1.0, 0.0]);
        let (l, r) = partition_paste_check(&z, 1.0, &[1.0]).unwrap();
        assert_eq!((l, r), (2.0, 4.0));
    }

    #[test]
    fn rejects_duplicate_times() {
        assert!(SampledPath::scalar(vec![0.0, 1.0, 1.0], vec![0.0; 3]).is_err());
    }

    #[test]
    fn chen_composition_matches_cross_term() {
        let x = SampledPath::new(vec![0.0, 1.0, 2.0], vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![1.0, 1.0]]).unwrap();
        let steps = vec![0.5, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.5];
        let a = TwoParamIncrements::chen(x, steps).unwrap();
        assert_eq!(a.compose(0, 2), vec![0.5, 1.0, 0.0, 0.5]);
        let b = TwoParamIncrements::additive(vec![0.0, 1.0, 2.0], 1, 1, vec![1.0, 2.0]).unwrap();
        assert_eq!(b.compose(0, 2), vec![3.0]);
    }

    #[test]
    fn refine_and_resample() {
        let x = scalar(&[0.0, 2.0, 0.0]);
        let r = x.refine(2);
        assert_eq!(r.data(), &[0.0, 1.0, 2.0, 1.0, 0.0]);
        assert_eq!(r.subsample(2), x);
        assert_eq!(x.interpolate(1.5), vec![1.0]);
    }
}
