//! Explicit monotone upwind solver for first-order HJB equations driven by a smooth path.

use rayon::prelude::*;

use super::problem::{ControlProblem, SENTINEL};
use crate::error::{Error, Result};
use crate::paths::{grid_index, SampledPath};
use crate::rough::RoughPath;

/// Boundary padding used for problems whose value explodes off the domain.
pub const DEFAULT_PADDING: f64 = 1e6;

const MAX_AXES: usize = 8;

/// One uniformly discretised coordinate axis.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Axis {
    pub name: String,
    pub lo: f64,
    pub hi: f64,
    pub n: usize,
}

impl Axis {
    pub fn new(name: &str, lo: f64, hi: f64, n: usize) -> Self {
        Axis { name: name.to_string(), lo, hi, n }
    }

    pub fn step(&self) -> f64 {
        (self.hi - self.lo) / (self.n - 1) as f64
    }

    pub fn point(&self, i: usize) -> f64 {
        if i + 1 == self.n {
            self.hi
        } else {
            self.lo + self.step() * i as f64
        }
    }

    pub fn points(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.point(i)).collect()
    }
}

/// Tensor-product state grid; the last axis varies fastest.
///
/// Axes list the `m` state coordinates first, then the `k` control-state coordinates.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct StateGrid {
    pub axes: Vec<Axis>,
}

impl StateGrid {
    pub fn new(axes: Vec<Axis>) -> Result<Self> {
        if axes.is_empty() || axes.len() > MAX_AXES {
            return Err(Error::InvalidArgument(format!("state grid needs 1 to {MAX_AXES} axes")));
        }
        for a in &axes {
            if a.n < 2 || !(a.hi > a.lo) {
                return Err(Error::InvalidArgument(format!("axis {} needs n ≥ 2 and hi > lo", a.name)));
            }
        }
        Ok(StateGrid { axes })
    }

    /// Parses `name=lo:hi:n` items separated by commas, e.g. `x=-3:3:61,a=-2:2:41`.
    pub fn parse(spec: &str) -> Result<Self> {
        let mut axes = Vec::new();
        for item in spec.split(',').map(str::trim).filter(|s| !s.is_empty()) {
            let (name, range) = item
                .split_once('=')
                .ok_or_else(|| Error::Parse(format!("grid axis `{item}` is not of the form name=lo:hi:n")))?;
            let parts: Vec<&str> = range.split(':').collect();
            if parts.len() != 3 {
                return Err(Error::Parse(format!("grid axis `{item}` is not of the form name=lo:hi:n")));
            }
            let num = |s: &str| s.trim().parse::<f64>().map_err(|e| Error::Parse(format!("`{s}` in `{item}`: {e}")));
            let n = parts[2].trim().parse::<usize>().map_err(|e| Error::Parse(format!("`{}` in `{item}`: {e}", parts[2])))?;
            axes.push(Axis::new(name.trim(), num(parts[0])?, num(parts[1])?, n));
        }
        StateGrid::new(axes)
    }

    pub fn dim(&self) -> usize {
        self.axes.len()
    }

    pub fn size(&self) -> usize {
        self.axes.iter().map(|a| a.n).product()
    }

    pub fn strides(&self) -> Vec<usize> {
        let mut s = vec![1; self.dim()];
        for j in (0..self.dim().saturating_sub(1)).rev() {
            s[j] = s[j + 1] * self.axes[j + 1].n;
        }
        s
    }

    /// Multi-index of a flat node index.
    pub fn multi_index(&self, mut node: usize) -> Vec<usize> {
        let mut idx = vec![0; self.dim()];
        for j in (0..self.dim()).rev() {
            idx[j] = node % self.axes[j].n;
            node /= self.axes[j].n;
        }
        idx
    }

    pub fn flat_index(&self, idx: &[usize]) -> usize {
        idx.iter().zip(&self.axes).fold(0, |acc, (i, a)| acc * a.n + i)
    }

    pub fn coords(&self, node: usize) -> Vec<f64> {
        self.multi_index(node).iter().zip(&self.axes).map(|(&i, a)| a.point(i)).collect()
    }

    /// Nearest node to `point` (clamped to the grid).
    pub fn nearest(&self, point: &[f64]) -> usize {
        let idx: Vec<usize> = point
            .iter()
            .zip(&self.axes)
            .map(|(&p, a)| (((p - a.lo) / a.step()).round().max(0.0) as usize).min(a.n - 1))
            .collect();
        self.flat_index(&idx)
    }

    /// True if the node lies at least `margin` nodes away from every face.
    pub fn is_interior(&self, node: usize, margin: usize) -> bool {
        self.multi_index(node).iter().zip(&self.axes).all(|(&i, a)| i >= margin && i + margin < a.n)
    }

    /// Multilinear interpolation of nodal values at `point` (clamped to the grid).
    pub fn interpolate(&self, values: &[f64], point: &[f64]) -> f64 {
        let dim = self.dim();
        let strides = self.strides();
        let mut base = 0;
        let mut frac = [0.0; MAX_AXES];
        let mut step = [0usize; MAX_AXES];
        for j in 0..dim {
            let a = &self.axes[j];
            let s = ((point[j] - a.lo) / a.step()).clamp(0.0, (a.n - 1) as f64);
            let i = (s.floor() as usize).min(a.n - 2);
            frac[j] = s - i as f64;
            base += i * strides[j];
            step[j] = strides[j];
        }
        let mut total = 0.0;
        for corner in 0..(1usize << dim) {
            let mut w = 1.0;
            let mut idx = base;
            for j in 0..dim {
                if corner & (1 << j) != 0 {
                    w *= frac[j];
                    idx += step[j];
                } else {
                    w *= 1.0 - frac[j];
                }
            }
            if w != 0.0 {
                total += w * values[idx];
            }
        }
        total
    }
}

/// Treatment of one face of the state box.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub enum Boundary {
    /// Upwind differences that would leave the grid use the inward one-sided difference.
    OneSided,
    /// Zero normal derivative: values outside equal the face value. Keeps the scheme monotone.
    Flat,
    /// Values outside the grid are taken to be this constant.
    Padding(f64),
}

/// Marching direction of the solver.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum Direction {
    /// Terminal condition `v(T) = g`, marching backward: `-∂_t v = H`.
    BackwardTerminal,
    /// Initial condition `v(0) = g`, marching forward along negated vector fields.
    ForwardInitial,
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct HjbOptions {
    pub direction: Direction,
    /// `(lower, upper)` face treatment per axis; missing axes default to one-sided.
    pub boundaries: Vec<(Boundary, Boundary)>,
    /// Safety factor applied to the stable step.
    pub cfl_factor: f64,
    /// Split steps that violate the CFL bound; otherwise report [`Error::Cfl`].
    pub substep: bool,
    /// Upper bound on internal steps.
    pub max_dt: Option<f64>,
}

impl Default for HjbOptions {
    fn default() -> Self {
        HjbOptions { direction: Direction::BackwardTerminal, boundaries: Vec::new(), cfl_factor: 0.9, substep: true, max_dt: None }
    }
}

impl HjbOptions {
    fn boundary(&self, axis: usize) -> (Boundary, Boundary) {
        self.boundaries.get(axis).copied().unwrap_or((Boundary::OneSided, Boundary::OneSided))
    }
}

/// Value function on output times × state grid, with the minimising control at each node.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct ValueField {
    pub times: Vec<f64>,
    pub grid: StateGrid,
    pub direction: Direction,
    /// Discretised control set; `policy` stores indices into it.
    pub controls: Vec<Vec<f64>>,
    values: Vec<f64>,
    policy: Vec<u32>,
}

impl ValueField {
    /// Field built from explicit slices, mostly for tests and synthetic penalties.
    pub fn from_slices(times: Vec<f64>, grid: StateGrid, direction: Direction, values: Vec<f64>) -> Result<Self> {
        let n = grid.size();
        if values.len() != n * times.len() {
            return Err(Error::DimensionMismatch { context: "value field", expected: n * times.len(), found: values.len() });
        }
        let policy = vec![0; values.len()];
        Ok(ValueField { times, grid, direction, controls: vec![vec![]], values, policy })
    }

    pub fn n_nodes(&self) -> usize {
        self.grid.size()
    }

    pub fn slice(&self, k: usize) -> &[f64] {
        let n = self.n_nodes();
        &self.values[k * n..(k + 1) * n]
    }

    pub fn value(&self, k: usize, node: usize) -> f64 {
        self.values[k * self.n_nodes() + node]
    }

    /// Index of output time `t`.
    pub fn time_index(&self, t: f64) -> Result<usize> {
        grid_index(&self.times, t)
    }

    /// Minimising control at slice `k` and `node`.
    pub fn policy(&self, k: usize, node: usize) -> &[f64] {
        &self.controls[self.policy[k * self.n_nodes() + node] as usize]
    }

    pub fn policy_index(&self, k: usize, node: usize) -> u32 {
        self.policy[k * self.n_nodes() + node]
    }

    /// Minimising control at the grid node nearest to `point`.
    pub fn policy_at(&self, k: usize, point: &[f64]) -> &[f64] {
        self.policy(k, self.grid.nearest(point))
    }

    /// Multilinear interpolation of slice `k` at `point`.
    pub fn interpolate(&self, k: usize, point: &[f64]) -> f64 {
        self.grid.interpolate(self.slice(k), point)
    }

    /// Sup-distance to another field over shared output times and interior nodes.
    pub fn interior_sup_diff(&self, other: &ValueField, margin: usize) -> Result<f64> {
        if self.grid != other.grid {
            return Err(Error::GridMismatch("value fields live on different state grids".into()));
        }
        crate::paths::same_grid(&self.times, &other.times)?;
        let nodes: Vec<usize> = (0..self.n_nodes()).filter(|&n| self.grid.is_interior(n, margin)).collect();
        let mut worst = 0.0f64;
        for k in 0..self.times.len() {
            let (a, b) = (self.slice(k), other.slice(k));
            for &n in &nodes {
                worst = worst.max((a[n] - b[n]).abs());
            }
        }
        Ok(worst)
    }

    /// Largest `|v|` over interior nodes of all slices.
    pub fn interior_sup(&self, margin: usize) -> f64 {
        let mut worst = 0.0f64;
        for n in (0..self.n_nodes()).filter(|&n| self.grid.is_interior(n, margin)) {
            for k in 0..self.times.len() {
                worst = worst.max(self.value(k, n).abs());
            }
        }
        worst
    }
}

/// Node-wise coefficient tables for one problem on one grid.
struct Tables {
    m: usize,
    k: usize,
    d: usize,
    n_u: usize,
    b: Vec<f64>,
    lam: Vec<f64>,
    psi: Vec<f64>,
    f: Vec<f64>,
    h: Vec<f64>,
    /// `max_u Σ |h_l| / Δa_l` per node.
    h_rate: Vec<f64>,
    terminal: Vec<f64>,
}

fn tables(prob: &ControlProblem, grid: &StateGrid, controls: &[Vec<f64>]) -> Result<Tables> {
    let (m, k, d) = (prob.state_dim(), prob.control_state_dim(), prob.noise_dim());
    if grid.dim() != m + k {
        return Err(Error::DimensionMismatch { context: "state grid axes", expected: m + k, found: grid.dim() });
    }
    let n = grid.size();
    let n_u = controls.len();
    let rows: Vec<_> = (0..n)
        .into_par_iter()
        .map(|node| {
            let c = grid.coords(node);
            let (x, a) = c.split_at(m);
            let mut b = vec![0.0; m];
            let mut lam = vec![0.0; m * d];
            let mut psi = vec![0.0; d];
            prob.dynamics.drift(x, a, &mut b);
            prob.dynamics.vol(x, a, &mut lam);
            (prob.psi)(x, a, &mut psi);
            let mut f = Vec::with_capacity(n_u);
            let mut h = vec![0.0; n_u * k];
            let mut rate = 0.0f64;
            for (j, u) in controls.iter().enumerate() {
                f.push((prob.f)(x, a, u));
                let hj = &mut h[j * k..(j + 1) * k];
                (prob.h)(a, u, hj);
                let r: f64 = hj.iter().enumerate().map(|(l, v)| v.abs() / grid.axes[m + l].step()).sum();
                rate = rate.max(r);
            }
            let g = (prob.g)(x, a);
            (b, lam, psi, f, h, rate, g)
        })
        .collect();
    let mut t = Tables {
        m,
        k,
        d,
        n_u,
        b: Vec::with_capacity(n * m),
        lam: Vec::with_capacity(n * m * d),
        psi: Vec::with_capacity(n * d),
        f: Vec::with_capacity(n * n_u),
        h: Vec::with_capacity(n * n_u * k),
        h_rate: Vec::with_capacity(n),
        terminal: Vec::with_capacity(n),
    };
    for (b, lam, psi, f, h, rate, g) in rows {
        t.b.extend(b);
        t.lam.extend(lam);
        t.psi.extend(psi);
        t.f.extend(f);
        t.h.extend(h);
        t.h_rate.push(rate);
        t.terminal.push(g.min(SENTINEL));
    }
    Ok(t)
}

struct Stencil {
    strides: Vec<usize>,
    steps: Vec<f64>,
    sizes: Vec<usize>,
    bounds: Vec<(Boundary, Boundary)>,
}

impl Stencil {
    /// Forward and backward differences of `v` at `node` along `axis`.
    #[inline]
    fn diffs(&self, v: &[f64], node: usize, idx: usize, axis: usize) -> (f64, f64) {
        let (s, h, n) = (self.strides[axis], self.steps[axis], self.sizes[axis]);
        let c = v[node];
        let up = if idx + 1 < n { Some((v[node + s] - c) / h) } else { None };
        let dn = if idx > 0 { Some((c - v[node - s]) / h) } else { None };
        let (lo, hi) = self.bounds[axis];
        let up = up.unwrap_or(match hi {
            Boundary::OneSided => dn.unwrap_or(0.0),
            Boundary::Flat => 0.0,
            Boundary::Padding(p) => (p - c) / h,
        });
        let dn = dn.unwrap_or(match lo {
            Boundary::OneSided => up,
            Boundary::Flat => 0.0,
            Boundary::Padding(p) => (c - p) / h,
        });
        (up, dn)
    }
}

#[inline]
fn upwind(w: f64, up: f64, dn: f64) -> f64 {
    if w > 0.0 {
        w * up
    } else {
        w * dn
    }
}

/// One explicit step `next = cur + dt · H(cur)`; also records the minimising control index.
#[allow(clippy::too_many_arguments)]
fn explicit_step(
    tab: &Tables,
    grid: &StateGrid,
    stencil: &Stencil,
    sign: f64,
    eta_dot: &[f64],
    dt: f64,
    cur: &[f64],
    next: &mut [f64],
    argmin: &mut [u32],
) {
    let (m, k, d, n_u) = (tab.m, tab.k, tab.d, tab.n_u);
    next.par_iter_mut().zip(argmin.par_iter_mut()).enumerate().for_each(|(node, (out, arg))| {
        let v = cur[node];
        if v >= SENTINEL {
            *out = SENTINEL;
            *arg = 0;
            return;
        }
        let idx = grid.multi_index(node);
        let mut acc = 0.0;
        for j in 0..m {
            let mut fj = tab.b[node * m + j];
            for c in 0..d {
                fj += tab.lam[(node * m + j) * d + c] * eta_dot[c];
            }
            let (up, dn) = stencil.diffs(cur, node, idx[j], j);
            acc += upwind(sign * fj, up, dn);
        }
        for c in 0..d {
            acc += tab.psi[node * d + c] * eta_dot[c];
        }
        let mut da = [(0.0, 0.0); MAX_AXES];
        for l in 0..k {
            da[l] = stencil.diffs(cur, node, idx[m + l], m + l);
        }
        let mut best = f64::INFINITY;
        let mut best_j = 0u32;
        for j in 0..n_u {
            let mut s = tab.f[node * n_u + j];
            let h = &tab.h[(node * n_u + j) * k..(node * n_u + j + 1) * k];
            for l in 0..k {
                s += upwind(sign * h[l], da[l].0, da[l].1);
            }
            if s < best {
                best = s;
                best_j = j as u32;
            }
        }
        *arg = best_j;
        let nv = v + dt * (acc + best);
        *out = if nv.is_finite() { nv.min(SENTINEL) } else { SENTINEL };
    });
}

/// Stable step bound `cfl / max_node(Σ_x |b + λη̇| / Δx + max_u Σ_a |h| / Δa)`.
fn stable_dt(tab: &Tables, grid: &StateGrid, eta_dot: &[f64], cfl: f64) -> f64 {
    let (m, d) = (tab.m, tab.d);
    let inv: Vec<f64> = grid.axes.iter().map(|a| 1.0 / a.step()).collect();
    let rate = (0..grid.size())
        .into_par_iter()
        .map(|node| {
            let mut r = tab.h_rate[node];
            for j in 0..m {
                let mut fj = tab.b[node * m + j];
                for c in 0..d {
                    fj += tab.lam[(node * m + j) * d + c] * eta_dot[c];
                }
                r += fj.abs() * inv[j];
            }
            r
        })
        .reduce(|| 0.0, f64::max);
    if rate > 0.0 {
        cfl / rate
    } else {
        f64::INFINITY
    }
}

/// Solves the HJB equation of `prob` driven by the piecewise-linear path `eta`.
///
/// `times` are the output times; internal steps also stop at every knot of `eta`, so that
/// `η̇` is constant on each step. The equation is
/// `-∂_t v = b·∇_x v + min_u {h·∇_a v + f} + (λ·∇_x v + ψ)·η̇` with `v(T) = g` for
/// [`Direction::BackwardTerminal`], and `∂_t v = -b·∇_x v + min_u {-h·∇_a v + f} + (-λ·∇_x v + ψ)·η̇`
/// with `v(0) = g` for [`Direction::ForwardInitial`].
pub fn solve_hjb_smooth(
    prob: &ControlProblem,
    eta: &SampledPath,
    times: &[f64],
    grid: &StateGrid,
    options: &HjbOptions,
) -> Result<ValueField> {
    if eta.dim() != prob.noise_dim() {
        return Err(Error::DimensionMismatch { context: "HJB driver", expected: prob.noise_dim(), found: eta.dim() });
    }
    if times.len() < 2 || times.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidGrid("HJB output times must be increasing with at least two points".into()));
    }
    let (t0, t1) = (times[0], times[times.len() - 1]);
    let tol = 1e-12 * t1.abs().max(1.0);
    if eta.start_time() > t0 + tol || eta.end_time() < t1 - tol {
        return Err(Error::GridMismatch("driver does not cover the HJB time horizon".into()));
    }
    let controls = prob.controls.points();
    if controls.is_empty() || controls.len() > u32::MAX as usize {
        return Err(Error::InvalidArgument("control set must be non-empty".into()));
    }
    let tab = tables(prob, grid, &controls)?;
    let stencil = Stencil {
        strides: grid.strides(),
        steps: grid.axes.iter().map(Axis::step).collect(),
        sizes: grid.axes.iter().map(|a| a.n).collect(),
        bounds: (0..grid.dim()).map(|j| options.boundary(j)).collect(),
    };
    let n = grid.size();
    let nt = times.len();
    let sign = match options.direction {
        Direction::BackwardTerminal => 1.0,
        Direction::ForwardInitial => -1.0,
    };

    let knots: Vec<f64> = eta.times().iter().copied().filter(|&s| s > t0 + tol && s < t1 - tol).collect();
    let mut values = vec![0.0; nt * n];
    let mut policy = vec![0u32; nt * n];
    let order: Vec<usize> = match options.direction {
        Direction::BackwardTerminal => (0..nt).rev().collect(),
        Direction::ForwardInitial => (0..nt).collect(),
    };
    let first = order[0];
    values[first * n..(first + 1) * n].copy_from_slice(&tab.terminal);

    let mut cur = tab.terminal.clone();
    let mut next = vec![0.0; n];
    let mut scratch = vec![0u32; n];
    let mut slope = vec![0.0; eta.dim()];
    let (mut ea, mut eb) = (vec![0.0; eta.dim()], vec![0.0; eta.dim()]);
    let mut started = false;
    for w in order.windows(2) {
        let (from, to) = (w[0], w[1]);
        let (lo, hi) = (times[from.min(to)], times[from.max(to)]);
        let mut cuts = vec![lo];
        cuts.extend(knots.iter().copied().filter(|&s| s > lo + tol && s < hi - tol));
        cuts.push(hi);
        let mut segments: Vec<(f64, f64)> = cuts.windows(2).map(|c| (c[0], c[1])).collect();
        if options.direction == Direction::BackwardTerminal {
            segments.reverse();
        }
        for (a, b) in segments {
            eta.interpolate_into(a, &mut ea);
            eta.interpolate_into(b, &mut eb);
            let len = b - a;
            for c in 0..slope.len() {
                slope[c] = (eb[c] - ea[c]) / len;
            }
            let dt_stable = stable_dt(&tab, grid, &slope, options.cfl_factor);
            if !options.substep && len > dt_stable * (1.0 + 1e-12) {
                return Err(Error::Cfl { dt: len, suggested: dt_stable });
            }
            let cap = if options.substep { dt_stable } else { f64::INFINITY };
            let cap = options.max_dt.map_or(cap, |m| cap.min(m));
            let pieces = (len / cap).ceil().max(1.0) as usize;
            let h = len / pieces as f64;
            for _ in 0..pieces {
                explicit_step(&tab, grid, &stencil, sign, &slope, h, &cur, &mut next, &mut scratch);
                std::mem::swap(&mut cur, &mut next);
            }
            if !started {
                // control law at the starting slice, from the first step taken
                policy[first * n..(first + 1) * n].copy_from_slice(&scratch);
                started = true;
            }
        }
        values[to * n..(to + 1) * n].copy_from_slice(&cur);
        policy[to * n..(to + 1) * n].copy_from_slice(&scratch);
    }
    Ok(ValueField { times: times.to_vec(), grid: grid.clone(), direction: options.direction, controls, values, policy })
}

/// Sup-differences between consecutive mollification levels.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct CauchyReport {
    pub levels: Vec<usize>,
    /// `sup |v^{n_{i+1}} - v^{n_i}|` over interior nodes and output times.
    pub sup_diffs: Vec<f64>,
    /// Every difference is at most twice its predecessor.
    pub within_slack: bool,
}

impl CauchyReport {
    pub fn from_diffs(levels: Vec<usize>, sup_diffs: Vec<f64>) -> Self {
        let within_slack = sup_diffs.windows(2).all(|w| w[1] <= 2.0 * w[0]);
        CauchyReport { levels, sup_diffs, within_slack }
    }
}

/// Rough HJB solution as the limit of smooth solutions along piecewise-linear mollifications.
///
/// Level `n` uses the driver's first level subsampled to `n` steps. Returns the field of the
/// finest level with the Cauchy report over interior nodes (`margin` nodes from each face).
pub fn solve_rough_hjb(
    prob: &ControlProblem,
    rp: &RoughPath,
    levels: &[usize],
    times: &[f64],
    grid: &StateGrid,
    options: &HjbOptions,
    margin: usize,
) -> Result<(ValueField, CauchyReport)> {
    if !rp.is_geometric() {
        return Err(Error::NotGeometric);
    }
    if levels.is_empty() {
        return Err(Error::InvalidArgument("at least one mollification level is required".into()));
    }
    let mut fields: Vec<ValueField> = Vec::with_capacity(levels.len());
    let mut diffs = Vec::new();
    for &level in levels {
        let eta = rp.mollify(level)?;
        log::info!("rough HJB: solving mollification level {level}");
        let field = solve_hjb_smooth(prob, eta.first_level(), times, grid, options)?;
        if let Some(prev) = fields.last() {
            diffs.push(field.interior_sup_diff(prev, margin)?);
        }
        fields.push(field);
    }
    let report = CauchyReport::from_diffs(levels.to_vec(), diffs);
    Ok((fields.pop().unwrap(), report))
}
