use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::mat;
use super::model::Gamma;
use super::penalty::PenaltySpec;
use crate::control::SENTINEL;
use crate::error::{Error, Result};
use crate::paths::SampledPath;
use crate::rde::BLOW_UP;
use crate::rough::RoughPath;

/// Covariances with smallest eigenvalue at or below this are outside the physical domain.
pub const COVARIANCE_MARGIN: f64 = 1e-9;

/// Which parameter blocks of `γ = (α, σ, c, ρ)` are uncertain and therefore controlled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParamMask {
    pub alpha: bool,
    pub sigma: bool,
    pub c: bool,
    pub rho: bool,
}

impl ParamMask {
    pub const ALPHA: ParamMask = ParamMask { alpha: true, sigma: false, c: false, rho: false };
    pub const ALL: ParamMask = ParamMask { alpha: true, sigma: true, c: true, rho: true };
}

/// Backward control problem: parameters `γ` steered by `dγ = h(γ, u) ds` into a terminal `(μ, Σ, a)`.
///
/// `h(γ, u) = u` on the uncertain blocks, multiplied by `1 - λ_max(ρρᵀ)` when `ρ` is uncertain.
/// The running cost is `𝔣 + ½(|cq|² + tr(cλ)) + ε|u|²` and the initial cost is `PenaltySpec::initial`.
#[derive(Debug, Clone)]
pub struct FilterControl {
    /// Dimensions of `γ`.
    pub template: Gamma,
    pub mask: ParamMask,
    pub spec: PenaltySpec,
    pub epsilon: f64,
    /// Bound on each control component.
    pub u_max: f64,
}

impl FilterControl {
    pub fn new(template: Gamma, mask: ParamMask, spec: PenaltySpec, epsilon: f64, u_max: f64) -> Result<Self> {
        if !(epsilon > 0.0) || !(u_max > 0.0) {
            return Err(Error::InvalidArgument("need ε > 0 and a positive control bound".into()));
        }
        Ok(FilterControl { template, mask, spec, epsilon, u_max })
    }

    /// Scalar problem with only `α` uncertain.
    pub fn reduced(sigma: f64, c: f64, spec: PenaltySpec, epsilon: f64, u_max: f64) -> Result<Self> {
        let template = Gamma::scalar(0.0, sigma, c, 0.0);
        FilterControl::new(template, ParamMask::ALPHA, spec, epsilon, u_max)
    }

    /// Flat indices of the controlled components of `γ`.
    pub fn free_indices(&self) -> Vec<usize> {
        let g = &self.template;
        let blocks = [(self.mask.alpha, g.alpha.len()), (self.mask.sigma, g.sigma.len()), (self.mask.c, g.c.len()), (self.mask.rho, g.rho.len())];
        let mut out = Vec::new();
        let mut start = 0;
        for (on, len) in blocks {
            if on {
                out.extend(start..start + len);
            }
            start += len;
        }
        out
    }

    /// Terminal parameters: the template with the uncertain components replaced by `a`.
    pub fn terminal_gamma(&self, a: &[f64]) -> Result<Gamma> {
        let free = self.free_indices();
        if a.len() != free.len() {
            return Err(Error::DimensionMismatch { context: "terminal parameters", expected: free.len(), found: a.len() });
        }
        let mut v = self.template.to_flat();
        for (k, &j) in free.iter().enumerate() {
            v[j] = a[k];
        }
        let mut g = self.template.clone();
        g.set_flat(&v);
        Ok(g)
    }

    fn h_scale(&self, g: &Gamma) -> f64 {
        if self.mask.rho {
            let (l, d) = (g.l, g.d);
            let mut rr = vec![0.0; l * l];
            mat::mul_bt(&g.rho, &g.rho, l, d, l, &mut rr);
            (1.0 - mat::sym_eig_range(&rr, l).1).max(0.0)
        } else {
            1.0
        }
    }

    /// Filter part of the running cost `½(|cq|² + tr(cλ))`.
    pub(crate) fn likelihood_rate(g: &Gamma, q: &[f64], lam: &[f64]) -> (f64, Vec<f64>, Vec<f64>) {
        let cq = g.observe(q);
        let cl = g.c_gain(lam);
        let v = 0.5 * (cq.iter().map(|x| x * x).sum::<f64>() + mat::trace(&cl, g.d));
        (v, cq, cl)
    }
}

/// Control that is constant on `knots.len()` equal pieces of `[0, horizon]`.
///
/// Each knot holds one value per controlled component.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PiecewiseControl {
    pub horizon: f64,
    pub knots: Vec<Vec<f64>>,
}

impl PiecewiseControl {
    pub fn zero(horizon: f64, n_pieces: usize, dim: usize) -> Self {
        PiecewiseControl { horizon, knots: vec![vec![0.0; dim]; n_pieces.max(1)] }
    }

    /// Knot in force at time `s` (right-continuous).
    pub fn piece(&self, s: f64) -> usize {
        let n = self.knots.len();
        if self.horizon <= 0.0 {
            return 0;
        }
        ((s / self.horizon * n as f64 + 1e-9).floor().max(0.0) as usize).min(n - 1)
    }

    pub fn at(&self, s: f64) -> &[f64] {
        &self.knots[self.piece(s)]
    }
}

/// Why a backward trajectory left the domain.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Failure {
    /// `λ_min(R)` reached the covariance margin.
    Covariance,
    /// Norm above the blow-up threshold or non-finite values.
    BlowUp,
    /// `ρ` left the correlation domain.
    Correlation,
}

/// State trajectories on `[0, t]` in forward time order.
#[derive(Debug, Clone)]
pub struct BackwardPath {
    pub q: SampledPath,
    /// Flattened `m × m`.
    pub r: SampledPath,
    /// Flattened `(α, σ, c, ρ)`.
    pub gamma: SampledPath,
    pub valid: bool,
    pub failure: Option<(Failure, f64)>,
}

/// Observation increments and second-level steps.
pub(crate) struct Driver {
    pub times: Vec<f64>,
    pub inc: Vec<f64>,
    pub second: Vec<f64>,
}

impl Driver {
    pub(crate) fn new(rp: &RoughPath) -> Self {
        let d = rp.dim();
        let z = rp.first_level();
        let n = rp.len();
        let mut inc = vec![0.0; d * (n - 1)];
        for i in 0..n - 1 {
            z.increment_into(i, i + 1, &mut inc[i * d..(i + 1) * d]);
        }
        Driver { times: rp.times().to_vec(), inc, second: rp.second_steps() }
    }
}

struct Raw {
    q: Vec<f64>,
    r: Vec<f64>,
    g: Vec<f64>,
    /// First grid index that has been filled.
    start: usize,
    failure: Option<(Failure, f64)>,
}

fn check_state(ctl: &FilterControl, q: &[f64], r: &[f64], g: &Gamma) -> Option<Failure> {
    let m = g.m;
    let flat_ok = |v: &[f64]| v.iter().all(|x| x.is_finite()) && v.iter().map(|x| x * x).sum::<f64>().sqrt() <= BLOW_UP;
    if !flat_ok(q) || !flat_ok(r) || !flat_ok(&g.alpha) || !flat_ok(&g.sigma) || !flat_ok(&g.c) || !flat_ok(&g.rho) {
        return Some(Failure::BlowUp);
    }
    if mat::sym_eig_range(r, m).0 <= COVARIANCE_MARGIN {
        return Some(Failure::Covariance);
    }
    if ctl.mask.rho && !g.correlation_ok() {
        return Some(Failure::Correlation);
    }
    None
}

/// Backward integration from index `i1`: RK4 for `(R, γ)`, reversed left-point sums for `q`.
fn integrate(ctl: &FilterControl, drv: &Driver, i1: usize, mu: &[f64], sigma: &[f64], a: &Gamma, u: &PiecewiseControl) -> Raw {
    let (m, d) = (a.m, a.d);
    let ng = a.flat_len();
    let nr = m * m;
    let free = ctl.free_indices();
    let n = i1 + 1;
    let mut qs = vec![0.0; n * m];
    let mut rs = vec![0.0; n * nr];
    let mut gs = vec![0.0; n * ng];
    qs[i1 * m..].copy_from_slice(mu);
    rs[i1 * nr..].copy_from_slice(sigma);
    gs[i1 * ng..].copy_from_slice(&a.to_flat());
    let mut g = a.clone();
    let mut lam = vec![0.0; m * d];
    let mut b = vec![0.0; m];
    let dim = nr + ng;
    let mut y = vec![0.0; dim];
    let mut tmp = vec![0.0; dim];
    let mut ks = [vec![0.0; dim], vec![0.0; dim], vec![0.0; dim], vec![0.0; dim]];
    let mut uvec = vec![0.0; ng];
    if let Some(f) = check_state(ctl, mu, sigma, a) {
        return Raw { q: qs, r: rs, g: gs, start: i1, failure: Some((f, drv.times[i1])) };
    }
    // reversed field: d/ds' (R, γ) = -(b_Σ, h)
    let field = |state: &[f64], g: &mut Gamma, lam: &mut [f64], uvec: &[f64], out: &mut [f64]| {
        g.set_flat(&state[nr..]);
        g.gain_into(&state[..nr], lam);
        g.riccati_into(&state[..nr], lam, &mut out[..nr]);
        let scale = ctl.h_scale(g);
        for j in 0..nr {
            out[j] = -out[j];
        }
        for j in 0..ng {
            out[nr + j] = -scale * uvec[j];
        }
    };
    for i in (0..i1).rev() {
        let h = drv.times[i + 1] - drv.times[i];
        let knot = u.at(drv.times[i]);
        uvec.fill(0.0);
        for (k, &j) in free.iter().enumerate() {
            uvec[j] = knot[k].clamp(-ctl.u_max, ctl.u_max);
        }
        // q step uses the coefficients at the later time
        let (q_next, q_prev) = {
            let (lo, hi) = qs.split_at_mut((i + 1) * m);
            (&hi[..m], &mut lo[i * m..])
        };
        g.set_flat(&gs[(i + 1) * ng..(i + 2) * ng]);
        g.gain_into(&rs[(i + 1) * nr..(i + 2) * nr], &mut lam);
        g.mean_drift_into(q_next, &lam, &mut b);
        let dy = &drv.inc[i * d..(i + 1) * d];
        for r in 0..m {
            q_prev[r] = q_next[r] - b[r] * h - (0..d).map(|k| lam[r * d + k] * dy[k]).sum::<f64>();
        }
        y[..nr].copy_from_slice(&rs[(i + 1) * nr..(i + 2) * nr]);
        y[nr..].copy_from_slice(&gs[(i + 1) * ng..(i + 2) * ng]);
        let [k1, k2, k3, k4] = &mut ks;
        field(&y, &mut g, &mut lam, &uvec, k1);
        (0..dim).for_each(|j| tmp[j] = y[j] + 0.5 * h * k1[j]);
        field(&tmp, &mut g, &mut lam, &uvec, k2);
        (0..dim).for_each(|j| tmp[j] = y[j] + 0.5 * h * k2[j]);
        field(&tmp, &mut g, &mut lam, &uvec, k3);
        (0..dim).for_each(|j| tmp[j] = y[j] + h * k3[j]);
        field(&tmp, &mut g, &mut lam, &uvec, k4);
        (0..dim).for_each(|j| y[j] += h / 6.0 * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j]));
        mat::symmetrize(&mut y[..nr], m);
        rs[i * nr..(i + 1) * nr].copy_from_slice(&y[..nr]);
        gs[i * ng..(i + 1) * ng].copy_from_slice(&y[nr..]);
        g.set_flat(&y[nr..]);
        if let Some(f) = check_state(ctl, &qs[i * m..(i + 1) * m], &y[..nr], &g) {
            return Raw { q: qs, r: rs, g: gs, start: i, failure: Some((f, drv.times[i])) };
        }
    }
    Raw { q: qs, r: rs, g: gs, start: 0, failure: None }
}

fn to_path(drv: &Driver, raw: Raw, i1: usize, m: usize, ng: usize) -> Result<BackwardPath> {
    let s = raw.start;
    let times = drv.times[s..=i1].to_vec();
    Ok(BackwardPath {
        q: SampledPath::from_flat(times.clone(), m, raw.q[s * m..].to_vec())?,
        r: SampledPath::from_flat(times.clone(), m * m, raw.r[s * m * m..].to_vec())?,
        gamma: SampledPath::from_flat(times, ng, raw.g[s * ng..].to_vec())?,
        valid: raw.failure.is_none(),
        failure: raw.failure,
    })
}

fn check_terminal(ctl: &FilterControl, mu: &[f64], sigma: &[f64], a: &[f64], u: &PiecewiseControl) -> Result<Gamma> {
    let m = ctl.template.m;
    if mu.len() != m || sigma.len() != m * m {
        return Err(Error::DimensionMismatch { context: "terminal mean and covariance", expected: m + m * m, found: mu.len() + sigma.len() });
    }
    let nf = ctl.free_indices().len();
    if u.knots.iter().any(|k| k.len() != nf) {
        return Err(Error::DimensionMismatch { context: "control knots", expected: nf, found: u.knots.iter().map(Vec::len).find(|&l| l != nf).unwrap_or(0) });
    }
    ctl.terminal_gamma(a)
}

/// Filter states and parameters driven backward from `(q_t, R_t, γ_t) = (μ, Σ, a)` to time 0.
///
/// `a` holds the uncertain components of `γ_t`; the others come from the template.
/// The path is truncated at the first grid point where `R` leaves the positive definite
/// cone, the state blows up or `ρ` leaves its domain, and is then flagged invalid.
pub fn backward_trajectories(
    t: f64,
    mu: &[f64],
    sigma: &[f64],
    a: &[f64],
    u: &PiecewiseControl,
    ctl: &FilterControl,
    obs: &RoughPath,
) -> Result<BackwardPath> {
    let g = check_terminal(ctl, mu, sigma, a, u)?;
    if obs.dim() != g.d {
        return Err(Error::DimensionMismatch { context: "observation", expected: g.d, found: obs.dim() });
    }
    let i1 = obs.first_level().index_of(t)?;
    let drv = Driver::new(obs);
    let raw = integrate(ctl, &drv, i1, mu, sigma, &g, u);
    to_path(&drv, raw, i1, g.m, g.flat_len())
}

/// Terms of the backward control cost.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ControlCost {
    /// `∫ (𝔣 + ½(|cq|² + tr(cλ)) + ε|u|²) ds`.
    pub running: f64,
    /// `∫ ψ dζ` with `ψ = -cq`.
    pub rough: f64,
    /// `g(q₀, R₀, γ₀)`.
    pub initial: f64,
    /// [`SENTINEL`] if the trajectory is invalid.
    pub total: f64,
}

/// Sup norms and 1-variations along a trajectory.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct PathBounds {
    pub q_sup: f64,
    pub r_sup: f64,
    pub gamma_sup: f64,
    pub r_var: f64,
    pub gamma_var: f64,
}

impl PathBounds {
    pub fn max(self, o: PathBounds) -> PathBounds {
        PathBounds {
            q_sup: self.q_sup.max(o.q_sup),
            r_sup: self.r_sup.max(o.r_sup),
            gamma_sup: self.gamma_sup.max(o.gamma_sup),
            r_var: self.r_var.max(o.r_var),
            gamma_var: self.gamma_var.max(o.gamma_var),
        }
    }

    pub fn largest(&self) -> f64 {
        [self.q_sup, self.r_sup, self.gamma_sup, self.r_var, self.gamma_var].into_iter().fold(0.0, f64::max)
    }
}

fn cost_of(ctl: &FilterControl, drv: &Driver, raw: &Raw, i1: usize, u: &PiecewiseControl) -> (ControlCost, PathBounds) {
    if raw.failure.is_some() {
        return (ControlCost { running: SENTINEL, rough: 0.0, initial: SENTINEL, total: SENTINEL }, PathBounds::default());
    }
    let t = &ctl.template;
    let (m, d) = (t.m, t.d);
    let (nr, ng) = (m * m, t.flat_len());
    let mut g = t.clone();
    let mut lam = vec![0.0; m * d];
    let mut running = 0.0;
    let mut rough = 0.0;
    let mut prev_rate = 0.0;
    let mut bounds = PathBounds::default();
    let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
    for i in 0..=i1 {
        let (q, r, gv) = (&raw.q[i * m..(i + 1) * m], &raw.r[i * nr..(i + 1) * nr], &raw.g[i * ng..(i + 1) * ng]);
        g.set_flat(gv);
        g.gain_into(r, &mut lam);
        let (lik, cq, cl) = FilterControl::likelihood_rate(&g, q, &lam);
        let rate = lik + (ctl.spec.prior)(q, r, &g);
        bounds.q_sup = bounds.q_sup.max(norm(q));
        bounds.r_sup = bounds.r_sup.max(norm(r));
        bounds.gamma_sup = bounds.gamma_sup.max(norm(gv));
        if i < i1 {
            let h = drv.times[i + 1] - drv.times[i];
            let knot = u.at(drv.times[i]);
            let u2: f64 = knot.iter().map(|x| x.clamp(-ctl.u_max, ctl.u_max).powi(2)).sum();
            running += ctl.epsilon * u2 * h;
            let dy = &drv.inc[i * d..(i + 1) * d];
            let z2 = &drv.second[i * d * d..(i + 1) * d * d];
            let mut s = 0.0;
            for k in 0..d {
                s += cq[k] * dy[k];
                for bb in 0..d {
                    s += cl[k * d + bb] * z2[bb * d + k];
                }
            }
            rough -= s;
            bounds.r_var += norm(&raw.r[(i + 1) * nr..(i + 2) * nr].iter().zip(r).map(|(a, b)| a - b).collect::<Vec<_>>());
            bounds.gamma_var += norm(&raw.g[(i + 1) * ng..(i + 2) * ng].iter().zip(gv).map(|(a, b)| a - b).collect::<Vec<_>>());
        }
        if i > 0 {
            running += 0.5 * (drv.times[i] - drv.times[i - 1]) * (prev_rate + rate);
        }
        prev_rate = rate;
    }
    g.set_flat(&raw.g[..ng]);
    let initial = (ctl.spec.initial)(&raw.q[..m], &raw.r[..nr], &g);
    let total = crate::control::add_costs(crate::control::add_costs(running, rough), initial);
    (ControlCost { running, rough, initial, total }, bounds)
}

/// Cost of steering the filter into `(μ, Σ, a)` at time `t` with control `u`.
pub fn backward_cost(
    t: f64,
    mu: &[f64],
    sigma: &[f64],
    a: &[f64],
    u: &PiecewiseControl,
    ctl: &FilterControl,
    obs: &RoughPath,
) -> Result<(ControlCost, BackwardPath)> {
    let g = check_terminal(ctl, mu, sigma, a, u)?;
    let i1 = obs.first_level().index_of(t)?;
    let drv = Driver::new(obs);
    let raw = integrate(ctl, &drv, i1, mu, sigma, &g, u);
    let (cost, _) = cost_of(ctl, &drv, &raw, i1, u);
    Ok((cost, to_path(&drv, raw, i1, g.m, g.flat_len())?))
}

/// Settings of the coordinate-descent shooting solver.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShootingOptions {
    pub n_pieces: usize,
    /// One start per seed; the first start is the zero control, the others are uniform in `±u_max/2`.
    pub seeds: Vec<u64>,
    pub max_sweeps: usize,
    pub rtol: f64,
    /// Initial coordinate step as a fraction of `u_max`.
    pub initial_step: f64,
}

impl Default for ShootingOptions {
    fn default() -> Self {
        ShootingOptions { n_pieces: 8, seeds: vec![1, 2, 3, 4, 5, 6, 7, 8], max_sweeps: 200, rtol: 1e-6, initial_step: 0.25 }
    }
}

/// What the optimizer saw along the way.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShootingDiagnostics {
    pub evaluations: usize,
    /// Largest `|∫ψ dζ| - ½(∫f + g)` over finite-cost trajectories.
    pub rough_term_excess: f64,
    /// Componentwise maxima of [`PathBounds`] over finite-cost trajectories.
    pub bounds: PathBounds,
    /// Number of accepted moves that hit the control bound.
    pub cap_hits: usize,
}

#[derive(Debug, Clone)]
pub struct ShootingResult {
    pub value: f64,
    pub control: PiecewiseControl,
    pub cost: ControlCost,
    pub path: BackwardPath,
    /// Index of the winning start.
    pub start: usize,
    pub diagnostics: ShootingDiagnostics,
}

struct Search<'a> {
    ctl: &'a FilterControl,
    drv: &'a Driver,
    i1: usize,
    mu: &'a [f64],
    sigma: &'a [f64],
    g: &'a Gamma,
    diag: ShootingDiagnostics,
}

/// Cost of a trial control; invalid trials are ranked by how far back they got.
#[derive(Debug, Clone, Copy)]
struct Score {
    cost: f64,
    /// Grid index where an invalid trajectory stopped; zero when valid.
    reach: usize,
}

impl Score {
    fn better_than(self, o: Score) -> bool {
        if self.cost < SENTINEL || o.cost < SENTINEL {
            self.cost < o.cost
        } else {
            self.reach < o.reach
        }
    }
}

impl Search<'_> {
    fn eval(&mut self, u: &PiecewiseControl) -> Score {
        let raw = integrate(self.ctl, self.drv, self.i1, self.mu, self.sigma, self.g, u);
        let reach = if raw.failure.is_some() { raw.start.max(1) } else { 0 };
        let (cost, bounds) = cost_of(self.ctl, self.drv, &raw, self.i1, u);
        self.diag.evaluations += 1;
        if cost.total < SENTINEL {
            self.diag.rough_term_excess = self.diag.rough_term_excess.max(cost.rough.abs() - 0.5 * (cost.running + cost.initial));
            self.diag.bounds = self.diag.bounds.max(bounds);
        }
        Score { cost: cost.total, reach }
    }

    fn descend(&mut self, mut u: PiecewiseControl, opts: &ShootingOptions) -> (f64, PiecewiseControl) {
        let u_max = self.ctl.u_max;
        let mut fx = self.eval(&u);
        let mut step = opts.initial_step * u_max;
        let nf = u.knots.first().map_or(0, Vec::len);
        for _ in 0..opts.max_sweeps {
            let before = fx;
            for p in 0..u.knots.len() {
                for j in 0..nf {
                    let x0 = u.knots[p][j];
                    for dir in [1.0, -1.0] {
                        let x1 = (x0 + dir * step).clamp(-u_max, u_max);
                        if x1 == x0 {
                            continue;
                        }
                        u.knots[p][j] = x1;
                        let f1 = self.eval(&u);
                        if f1.better_than(fx) {
                            fx = f1;
                            if x1.abs() >= u_max {
                                self.diag.cap_hits += 1;
                            }
                            break;
                        }
                        u.knots[p][j] = x0;
                    }
                }
            }
            let stalled = if fx.cost < SENTINEL { before.cost - fx.cost <= opts.rtol * fx.cost.abs().max(1.0) } else { fx.reach >= before.reach };
            if stalled {
                step *= 0.5;
                if step < opts.rtol * u_max {
                    break;
                }
            }
        }
        (fx.cost, u)
    }
}

/// Value `v(t, μ, Σ, a)` by direct minimisation over piecewise-constant controls.
///
/// Starts run in parallel and are reduced in start order, so results do not depend on
/// the thread count. If no start reaches a valid trajectory the value is [`SENTINEL`].
pub fn filter_value_shooting(
    t: f64,
    mu: &[f64],
    sigma: &[f64],
    a: &[f64],
    ctl: &FilterControl,
    obs: &RoughPath,
    opts: &ShootingOptions,
) -> Result<ShootingResult> {
    if opts.seeds.is_empty() || opts.n_pieces == 0 {
        return Err(Error::InvalidArgument("shooting needs at least one start and one piece".into()));
    }
    let nf = ctl.free_indices().len();
    let probe = PiecewiseControl::zero(t, opts.n_pieces, nf);
    let g = check_terminal(ctl, mu, sigma, a, &probe)?;
    if obs.dim() != g.d {
        return Err(Error::DimensionMismatch { context: "observation", expected: g.d, found: obs.dim() });
    }
    let i1 = obs.first_level().index_of(t)?;
    let drv = Driver::new(obs);
    let runs: Vec<(f64, PiecewiseControl, ShootingDiagnostics)> = opts
        .seeds
        .par_iter()
        .enumerate()
        .map(|(k, &seed)| {
            let mut u = PiecewiseControl::zero(t, opts.n_pieces, nf);
            if k > 0 {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                for knot in &mut u.knots {
                    for v in knot.iter_mut() {
                        *v = rng.random_range(-0.5..=0.5) * ctl.u_max;
                    }
                }
            }
            let mut search = Search {
                ctl,
                drv: &drv,
                i1,
                mu,
                sigma,
                g: &g,
                diag: ShootingDiagnostics { evaluations: 0, rough_term_excess: f64::NEG_INFINITY, bounds: PathBounds::default(), cap_hits: 0 },
            };
            let (v, u) = search.descend(u, opts);
            (v, u, search.diag)
        })
        .collect();
    let mut best = 0;
    for (k, r) in runs.iter().enumerate() {
        if r.0 < runs[best].0 {
            best = k;
        }
    }
    let diagnostics = runs.iter().fold(
        ShootingDiagnostics { evaluations: 0, rough_term_excess: f64::NEG_INFINITY, bounds: PathBounds::default(), cap_hits: 0 },
        |acc, r| ShootingDiagnostics {
            evaluations: acc.evaluations + r.2.evaluations,
            rough_term_excess: acc.rough_term_excess.max(r.2.rough_term_excess),
            bounds: acc.bounds.max(r.2.bounds),
            cap_hits: acc.cap_hits + r.2.cap_hits,
        },
    );
    let control = runs[best].1.clone();
    let raw = integrate(ctl, &drv, i1, mu, sigma, &g, &control);
    let (cost, _) = cost_of(ctl, &drv, &raw, i1, &control);
    let path = to_path(&drv, raw, i1, g.m, g.flat_len())?;
    Ok(ShootingResult { value: cost.total, control, cost, path, start: best, diagnostics })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::filter::{kalman_bucy_forward, FilterModel};
    use crate::paths::uniform_grid;
    use crate::rough::lift_piecewise_linear;

    fn quiet_obs(n: usize) -> RoughPath {
        lift_piecewise_linear(&SampledPath::constant(uniform_grid(0.0, 1.0, n), &[0.0]).unwrap())
    }

    #[test]
    fn frozen_dynamics() {
        let ctl = FilterControl::reduced(0.0, 0.0, PenaltySpec::zero(), 1.0, 1.0).unwrap();
        let u = PiecewiseControl::zero(1.0, 4, 1);
        let p = backward_trajectories(1.0, &[0.7], &[0.4], &[0.0], &u, &ctl, &quiet_obs(50)).unwrap();
        assert!(p.valid);
        assert!(p.q.data().iter().all(|v| *v == 0.7));
        assert!(p.r.data().iter().all(|v| *v == 0.4));
    }

    #[test]
    fn forward_backward_round_trip() {
        let ctl = FilterControl::reduced(0.8, 1.0, PenaltySpec::zero(), 1.0, 1.0).unwrap();
        let obs = quiet_obs(2000);
        let u = PiecewiseControl::zero(1.0, 1, 1);
        // just above the stable fixed point; backward in time R grows but stays finite
        let p = backward_trajectories(1.0, &[0.0], &[0.3], &[-1.0], &u, &ctl, &obs).unwrap();
        assert!(p.valid);
        let r0 = p.r.first()[0];
        let model = FilterModel::scalar(-1.0, 0.8, 1.0, 0.0, 0.0, r0).unwrap();
        let kb = kalman_bucy_forward(&model, obs.first_level()).unwrap();
        assert!((kb.r.last()[0] - 0.3).abs() < 1e-6);
    }

    #[test]
    fn small_covariance_is_invalid() {
        let ctl = FilterControl::reduced(1.0, 1.0, PenaltySpec::zero(), 1.0, 1.0).unwrap();
        let u = PiecewiseControl::zero(1.0, 1, 1);
        let p = backward_trajectories(1.0, &[0.0], &[1e-3], &[0.0], &u, &ctl, &quiet_obs(1000)).unwrap();
        assert!(!p.valid);
        assert_eq!(p.failure.unwrap().0, Failure::Covariance);
        assert!(p.failure.unwrap().1 > 0.99);
    }

    #[test]
    fn dominant_prior_pins_the_parameter() {
        let spec = PenaltySpec::new(|_, _, g| 1e4 * (g.alpha[0] + 1.0).powi(2), |_, _, _| 0.0, 1.0, 1.0).unwrap();
        let ctl = FilterControl::reduced(0.5, 1.0, spec, 0.1, 2.0).unwrap();
        let obs = quiet_obs(200);
        let opts = ShootingOptions { seeds: vec![1, 2], ..ShootingOptions::default() };
        let res = filter_value_shooting(1.0, &[0.0], &[0.3], &[-1.0], &ctl, &obs, &opts).unwrap();
        assert!(res.control.knots.iter().all(|k| k[0].abs() < 5e-3), "{:?}", res.control);
        let zero = backward_cost(1.0, &[0.0], &[0.3], &[-1.0], &PiecewiseControl::zero(1.0, 8, 1), &ctl, &obs).unwrap().0;
        assert!(res.value <= zero.total + 1e-12);
        assert!((res.value - zero.total).abs() < 1e-3 * zero.total.abs().max(1.0));
    }
}
