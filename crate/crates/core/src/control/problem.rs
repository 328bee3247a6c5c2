use std::sync::Arc;

use crate::error::{Error, Result};
use crate::paths::{interval_indices, norm, p_variation, SampledPath};
use crate::rde::{Dynamics, Stepper, BLOW_UP};
use crate::rough::{compose_controlled, rough_integral, ControlledPath, RoughPath};

/// Encoding of an infinite cost.
pub const SENTINEL: f64 = 1e30;

/// Sum of two costs that saturates at [`SENTINEL`].
pub fn add_costs(a: f64, b: f64) -> f64 {
    if is_infinite_cost(a) || is_infinite_cost(b) {
        SENTINEL
    } else {
        a + b
    }
}

pub fn is_infinite_cost(c: f64) -> bool {
    !(c.is_finite() && c < SENTINEL)
}

/// Finite set of admissible control values.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub enum ControlSet {
    /// Explicit list of points in `ℝ^j`.
    Points(Vec<Vec<f64>>),
    /// Tensor-product box with `resolution[i]` points per axis (endpoints included).
    Box { lower: Vec<f64>, upper: Vec<f64>, resolution: Vec<usize> },
}

impl ControlSet {
    /// Uniform discretisation of the interval `[lo, hi]`.
    pub fn interval(lo: f64, hi: f64, n: usize) -> Self {
        ControlSet::Box { lower: vec![lo], upper: vec![hi], resolution: vec![n] }
    }

    pub fn dim(&self) -> usize {
        match self {
            ControlSet::Points(p) => p.first().map_or(0, Vec::len),
            ControlSet::Box { lower, .. } => lower.len(),
        }
    }

    /// All control values, in a fixed order (first axis varies slowest).
    pub fn points(&self) -> Vec<Vec<f64>> {
        match self {
            ControlSet::Points(p) => p.clone(),
            ControlSet::Box { lower, upper, resolution } => {
                let axes: Vec<Vec<f64>> = (0..lower.len())
                    .map(|i| {
                        let n = resolution[i].max(1);
                        if n == 1 {
                            vec![0.5 * (lower[i] + upper[i])]
                        } else {
                            crate::paths::uniform_grid(lower[i], upper[i], n - 1)
                        }
                    })
                    .collect();
                let mut out = vec![Vec::new()];
                for axis in &axes {
                    out = out
                        .into_iter()
                        .flat_map(|prefix| {
                            axis.iter().map(move |&v| {
                                let mut p = prefix.clone();
                                p.push(v);
                                p
                            })
                        })
                        .collect();
                }
                out
            }
        }
    }

    /// True if `u` lies on the boundary of a box control set.
    pub fn on_boundary(&self, u: &[f64]) -> bool {
        match self {
            ControlSet::Points(_) => false,
            ControlSet::Box { lower, upper, .. } => u
                .iter()
                .zip(lower.iter().zip(upper))
                .any(|(v, (lo, hi))| v <= lo || v >= hi),
        }
    }
}

pub type VecField = Arc<dyn Fn(&[f64], &[f64], &mut [f64]) + Send + Sync>;
pub type RunningCost = Arc<dyn Fn(&[f64], &[f64], &[f64]) -> f64 + Send + Sync>;
pub type TerminalCost = Arc<dyn Fn(&[f64], &[f64]) -> f64 + Send + Sync>;

/// Coefficients of a pathwise control problem.
///
/// The state `X ∈ ℝ^m` follows `dX = b(X, γ) dt + λ(X, γ) dζ`, the control state
/// `γ ∈ ℝ^k` follows `dγ = h(γ, u) dt` with `u` in the control set, and the cost is
/// `∫ f(X, γ, u) dt + ∫ ψ(X, γ) dζ + g(X_T, γ_T)`, to be minimised.
#[derive(Clone)]
pub struct ControlProblem {
    pub dynamics: Arc<dyn Dynamics>,
    /// `h(a, u)` into `out[k]`.
    pub h: VecField,
    /// `f(x, a, u)`.
    pub f: RunningCost,
    /// `g(x, a)`.
    pub g: TerminalCost,
    /// `ψ(x, a)` into `out[d]`.
    pub psi: VecField,
    /// `D_xψ(x, a)` into `out[d × m]`.
    pub psi_dx: VecField,
    pub controls: ControlSet,
    /// Growth exponents `(δ₁, δ₂)` of `h` and `f` in the control.
    pub growth: (f64, f64),
}

impl ControlProblem {
    /// Problem with `h(a, u) = u`, `f = 0`, `g = 0` and `ψ = 0`.
    pub fn new(dynamics: Arc<dyn Dynamics>, controls: ControlSet) -> Self {
        ControlProblem {
            dynamics,
            h: Arc::new(|_, u, out| out.copy_from_slice(u)),
            f: Arc::new(|_, _, _| 0.0),
            g: Arc::new(|_, _| 0.0),
            psi: Arc::new(|_, _, out| out.fill(0.0)),
            psi_dx: Arc::new(|_, _, out| out.fill(0.0)),
            controls,
            growth: (1.0, 2.0),
        }
    }

    pub fn with_h(mut self, h: impl Fn(&[f64], &[f64], &mut [f64]) + Send + Sync + 'static) -> Self {
        self.h = Arc::new(h);
        self
    }

    pub fn with_running_cost(mut self, f: impl Fn(&[f64], &[f64], &[f64]) -> f64 + Send + Sync + 'static) -> Self {
        self.f = Arc::new(f);
        self
    }

    pub fn with_terminal_cost(mut self, g: impl Fn(&[f64], &[f64]) -> f64 + Send + Sync + 'static) -> Self {
        self.g = Arc::new(g);
        self
    }

    pub fn with_psi(
        mut self,
        psi: impl Fn(&[f64], &[f64], &mut [f64]) + Send + Sync + 'static,
        psi_dx: impl Fn(&[f64], &[f64], &mut [f64]) + Send + Sync + 'static,
    ) -> Self {
        self.psi = Arc::new(psi);
        self.psi_dx = Arc::new(psi_dx);
        self
    }

    pub fn state_dim(&self) -> usize {
        self.dynamics.state_dim()
    }

    pub fn control_state_dim(&self) -> usize {
        self.dynamics.control_dim()
    }

    pub fn noise_dim(&self) -> usize {
        self.dynamics.noise_dim()
    }

    /// Lower bounds of `f` and `g` and the largest difference quotient of `h` in `a`, over probes.
    pub fn probe(&self, probes: &[(Vec<f64>, Vec<f64>)]) -> ProbeReport {
        let us = self.controls.points();
        let k = self.control_state_dim();
        let mut report = ProbeReport { min_f: f64::INFINITY, min_g: f64::INFINITY, h_lipschitz: 0.0 };
        let (mut h1, mut h2) = (vec![0.0; k], vec![0.0; k]);
        for (x, a) in probes {
            report.min_g = report.min_g.min((self.g)(x, a));
            for u in &us {
                report.min_f = report.min_f.min((self.f)(x, a, u));
                for l in 0..k {
                    let mut b = a.clone();
                    let step = 1e-4 * a[l].abs().max(1.0);
                    b[l] += step;
                    (self.h)(a, u, &mut h1);
                    (self.h)(&b, u, &mut h2);
                    let dq = h1.iter().zip(&h2).map(|(p, q)| (p - q).abs()).fold(0.0, f64::max) / step;
                    report.h_lipschitz = report.h_lipschitz.max(dq);
                }
            }
        }
        report
    }
}

/// Sampled structural bounds of a problem.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProbeReport {
    pub min_f: f64,
    pub min_g: f64,
    pub h_lipschitz: f64,
}

/// Simulated state, control state and cost of one policy from `(t, x, a)`.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub x: SampledPath,
    pub gamma: SampledPath,
    /// Control applied on each step (one fewer than grid points).
    pub controls: Vec<Vec<f64>>,
    pub running: f64,
    pub rough: f64,
    pub terminal: f64,
    /// Total cost, [`SENTINEL`] if the state left the finite domain.
    pub cost: f64,
}

/// Simulates the problem on `interval` of the driver grid under a (feedback) policy.
///
/// `policy(i, x, a)` gives the control used on step `[t_i, t_{i+1}]`. The terminal cost is
/// added only when `with_terminal` is set.
pub fn rollout(
    prob: &ControlProblem,
    rp: &RoughPath,
    interval: (f64, f64),
    x0: &[f64],
    a0: &[f64],
    mut policy: impl FnMut(usize, &[f64], &[f64]) -> Vec<f64>,
    with_terminal: bool,
) -> Result<Trajectory> {
    let (m, k, d) = (prob.state_dim(), prob.control_state_dim(), prob.noise_dim());
    if rp.dim() != d || x0.len() != m || a0.len() != k {
        return Err(Error::DimensionMismatch { context: "rollout", expected: m + k + d, found: x0.len() + a0.len() + rp.dim() });
    }
    let (i0, i1) = interval_indices(rp.times(), interval)?;
    let t = rp.times();
    let z = rp.first_level();
    let mut xs = x0.to_vec();
    let mut gs = a0.to_vec();
    let mut controls = Vec::with_capacity(i1 - i0);
    let mut stepper = Stepper::new(prob.dynamics.as_ref());
    let (mut dz, mut next, mut hv) = (vec![0.0; d], vec![0.0; m], vec![0.0; k]);
    let mut running = 0.0;
    let mut blown = false;
    for i in i0..i1 {
        let s = i - i0;
        let dt = t[i + 1] - t[i];
        let (x, a) = (xs[s * m..(s + 1) * m].to_vec(), gs[s * k..(s + 1) * k].to_vec());
        let u = policy(i, &x, &a);
        (prob.h)(&a, &u, &mut hv);
        let a_next: Vec<f64> = a.iter().zip(&hv).map(|(g, h)| g + h * dt).collect();
        z.increment_into(i, i + 1, &mut dz);
        stepper.step(&x, &a, dt, &dz, &rp.second_step(i), &mut next);
        if next.iter().chain(&a_next).any(|v| !v.is_finite()) || norm(&next) > BLOW_UP || norm(&a_next) > BLOW_UP {
            blown = true;
            break;
        }
        running += 0.5 * dt * ((prob.f)(&x, &a, &u) + (prob.f)(&next, &a_next, &u));
        xs.extend_from_slice(&next);
        gs.extend(a_next);
        controls.push(u);
    }
    if blown {
        let n = xs.len() / m;
        let times = t[i0..i0 + n].to_vec();
        return Ok(Trajectory {
            x: SampledPath::from_flat(times.clone(), m, xs)?,
            gamma: SampledPath::from_flat(times, k, gs)?,
            controls,
            running: SENTINEL,
            rough: 0.0,
            terminal: 0.0,
            cost: SENTINEL,
        });
    }
    let times = t[i0..=i1].to_vec();
    let x = SampledPath::from_flat(times.clone(), m, xs)?;
    let gamma = SampledPath::from_flat(times, k, gs)?;
    let rough = psi_integral(prob, rp, &x, &gamma)?;
    let terminal = if with_terminal { (prob.g)(x.last(), gamma.last()) } else { 0.0 };
    let cost = add_costs(add_costs(running, rough), terminal);
    Ok(Trajectory { x, gamma, controls, running, rough, terminal, cost })
}

/// Compensated integral `∫ ψ(X, γ) dζ` with `X′ = λ(X, γ)`.
fn psi_integral(prob: &ControlProblem, rp: &RoughPath, x: &SampledPath, gamma: &SampledPath) -> Result<f64> {
    let (m, d) = (prob.state_dim(), prob.noise_dim());
    let mut lam = vec![0.0; m * d];
    let mut deriv = Vec::with_capacity(x.len() * m * d);
    for i in 0..x.len() {
        prob.dynamics.vol(x.value(i), gamma.value(i), &mut lam);
        deriv.extend_from_slice(&lam);
    }
    let xp = ControlledPath::new(rp, x.clone(), deriv)?;
    let psi = prob.psi.clone();
    let psi_dx = prob.psi_dx.clone();
    let y = compose_controlled(
        move |x, a| {
            let mut o = vec![0.0; d];
            psi(x, a, &mut o);
            o
        },
        move |x, a| {
            let mut o = vec![0.0; d * m];
            psi_dx(x, a, &mut o);
            o
        },
        &xp,
        gamma,
    )?;
    let out = rough_integral(&y, rp, (x.start_time(), x.end_time()))?;
    Ok(out.last()[0])
}

/// Cost `J(t, x, a; u)` of a control that is piecewise constant on the driver grid.
///
/// `u` is sampled on the driver grid; its value at `t_i` is used on `[t_i, t_{i+1}]`.
/// A blow-up of the state is reported as the [`SENTINEL`] cost.
pub fn cost_functional(prob: &ControlProblem, rp: &RoughPath, t: f64, x: &[f64], a: &[f64], u: &SampledPath) -> Result<f64> {
    crate::paths::same_grid(u.times(), rp.times())?;
    let end = *rp.times().last().unwrap();
    let traj = rollout(prob, rp, (t, end), x, a, |i, _, _| u.value(i).to_vec(), true)?;
    Ok(traj.cost)
}

/// Form of the regularising cost.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub enum RegularisingMode {
    /// `ε ‖γ‖_{p/2; [r,t]}^q`.
    PVar { p: f64 },
    /// `ε ∫_r^t |γ̇|^q ds` with forward-difference derivatives.
    Sobolev,
}

/// Regularising cost of a control path over `interval`.
///
/// ```
/// use roughctrl::control::{regularising_cost, RegularisingMode};
/// use roughctrl::paths::{uniform_grid, SampledPath};
/// let t = uniform_grid(0.0, 1.0, 50);
/// let gamma = SampledPath::scalar(t.clone(), t).unwrap();
/// let c = regularising_cost(&gamma, 1.0, 8.0, (0.0, 1.0), RegularisingMode::Sobolev).unwrap();
/// assert!((c - 1.0).abs() < 1e-12);
/// ```
pub fn regularising_cost(gamma: &SampledPath, epsilon: f64, q: f64, interval: (f64, f64), mode: RegularisingMode) -> Result<f64> {
    if !(epsilon > 0.0) {
        return Err(Error::InvalidArgument(format!("regularising weight must be positive, got {epsilon}")));
    }
    match mode {
        RegularisingMode::PVar { p } => {
            if q <= 2.0 * (1.0 + p) {
                log::warn!("regularising exponent q = {q} does not exceed 2(1+p) = {}", 2.0 * (1.0 + p));
            }
            Ok(epsilon * p_variation(gamma, p / 2.0, interval)?.powf(q))
        }
        RegularisingMode::Sobolev => {
            let (i0, i1) = interval_indices(gamma.times(), interval)?;
            let t = gamma.times();
            let mut inc = vec![0.0; gamma.dim()];
            let mut total = 0.0;
            for i in i0..i1 {
                let dt = t[i + 1] - t[i];
                gamma.increment_into(i, i + 1, &mut inc);
                total += dt * (norm(&inc) / dt).powf(q);
            }
            Ok(epsilon * total)
        }
    }
}
