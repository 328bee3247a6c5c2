//! Controlled rough differential equations `dX = b(X, γ) dt + λ(X, γ) dζ`.

use crate::error::{Error, Result};
use crate::paths::{interval_indices, norm, p_variation_full, same_grid, SampledPath, TwoParameter};
use crate::rough::{compose_controlled, homogeneous_holder_norm, rough_metric, ControlledPath, MetricMode, RoughPath};

/// States with norm above this are treated as having blown up.
pub const BLOW_UP: f64 = 1e12;

/// Coefficients of a controlled RDE with state in `ℝ^m`, control in `ℝ^k` and driver in `ℝ^d`.
pub trait Dynamics: Send + Sync {
    fn state_dim(&self) -> usize;
    fn control_dim(&self) -> usize;
    fn noise_dim(&self) -> usize;
    /// Drift `b(x, a)` into `out[m]`.
    fn drift(&self, x: &[f64], a: &[f64], out: &mut [f64]);
    /// Volatility `λ(x, a)` into `out[m × d]`, row-major.
    fn vol(&self, x: &[f64], a: &[f64], out: &mut [f64]);
    /// `out[(i·d + j)·m + l] = ∂λ_{ij} / ∂x_l`.
    fn vol_dx(&self, x: &[f64], a: &[f64], out: &mut [f64]);
}

type VecFn = Box<dyn Fn(&[f64], &[f64], &mut [f64]) + Send + Sync>;

/// [`Dynamics`] assembled from closures.
pub struct ControlledDynamics {
    pub m: usize,
    pub k: usize,
    pub d: usize,
    drift: VecFn,
    vol: VecFn,
    vol_dx: VecFn,
}

impl ControlledDynamics {
    pub fn new(
        m: usize,
        k: usize,
        d: usize,
        drift: impl Fn(&[f64], &[f64], &mut [f64]) + Send + Sync + 'static,
        vol: impl Fn(&[f64], &[f64], &mut [f64]) + Send + Sync + 'static,
        vol_dx: impl Fn(&[f64], &[f64], &mut [f64]) + Send + Sync + 'static,
    ) -> Self {
        ControlledDynamics { m, k, d, drift: Box::new(drift), vol: Box::new(vol), vol_dx: Box::new(vol_dx) }
    }

    /// Scalar `dX = X dζ`.
    pub fn linear_scalar() -> Self {
        Self::new(1, 1, 1, |_, _, o| o[0] = 0.0, |x, _, o| o[0] = x[0], |_, _, o| o[0] = 1.0)
    }

    /// Scalar `dX = γ dζ`.
    pub fn additive() -> Self {
        Self::new(1, 1, 1, |_, _, o| o[0] = 0.0, |_, a, o| o[0] = a[0], |_, _, o| o[0] = 0.0)
    }

    /// Wealth of an investor holding `γ` units of an asset priced by `ζ`.
    pub fn insider() -> Self {
        Self::additive()
    }

    /// Scalar `dX = X² dt`, which explodes at `1 / x₀`.
    pub fn riccati_scalar() -> Self {
        Self::new(1, 1, 1, |x, _, o| o[0] = x[0] * x[0], |_, _, o| o[0] = 0.0, |_, _, o| o[0] = 0.0)
    }
}

impl Dynamics for ControlledDynamics {
    fn state_dim(&self) -> usize {
        self.m
    }
    fn control_dim(&self) -> usize {
        self.k
    }
    fn noise_dim(&self) -> usize {
        self.d
    }
    fn drift(&self, x: &[f64], a: &[f64], out: &mut [f64]) {
        (self.drift)(x, a, out)
    }
    fn vol(&self, x: &[f64], a: &[f64], out: &mut [f64]) {
        (self.vol)(x, a, out)
    }
    fn vol_dx(&self, x: &[f64], a: &[f64], out: &mut [f64]) {
        (self.vol_dx)(x, a, out)
    }
}

/// Largest relative gap between `vol_dx` and a central difference of `vol` at the probes.
pub fn derivative_mismatch(dynamics: &dyn Dynamics, probes: &[(Vec<f64>, Vec<f64>)]) -> f64 {
    let (m, d) = (dynamics.state_dim(), dynamics.noise_dim());
    let mut worst = 0.0f64;
    let (mut up, mut dn, mut an) = (vec![0.0; m * d], vec![0.0; m * d], vec![0.0; m * d * m]);
    for (x, a) in probes {
        dynamics.vol_dx(x, a, &mut an);
        for l in 0..m {
            let h = 1e-5 * x[l].abs().max(1.0);
            let (mut xp, mut xm) = (x.clone(), x.clone());
            xp[l] += h;
            xm[l] -= h;
            dynamics.vol(&xp, a, &mut up);
            dynamics.vol(&xm, a, &mut dn);
            for ij in 0..m * d {
                let fd = (up[ij] - dn[ij]) / (2.0 * h);
                let exact = an[ij * m + l];
                worst = worst.max((fd - exact).abs() / exact.abs().max(1.0));
            }
        }
    }
    worst
}

/// One Davie step from `x` over a step with increments `dz`, second level `dz2` and length `dt`.
pub(crate) struct Stepper<'a> {
    dynamics: &'a dyn Dynamics,
    b: Vec<f64>,
    lam: Vec<f64>,
    dlam: Vec<f64>,
}

impl<'a> Stepper<'a> {
    pub(crate) fn new(dynamics: &'a dyn Dynamics) -> Self {
        let (m, d) = (dynamics.state_dim(), dynamics.noise_dim());
        Stepper { dynamics, b: vec![0.0; m], lam: vec![0.0; m * d], dlam: vec![0.0; m * d * m] }
    }

    /// Returns the volatility at the start point and writes the next state into `next`.
    pub(crate) fn step(&mut self, x: &[f64], a: &[f64], dt: f64, dz: &[f64], dz2: &[f64], next: &mut [f64]) -> &[f64] {
        let (m, d) = (self.dynamics.state_dim(), self.dynamics.noise_dim());
        self.dynamics.drift(x, a, &mut self.b);
        self.dynamics.vol(x, a, &mut self.lam);
        self.dynamics.vol_dx(x, a, &mut self.dlam);
        for r in 0..m {
            let mut v = x[r] + self.b[r] * dt;
            for c in 0..d {
                v += self.lam[r * d + c] * dz[c];
                for j in 0..d {
                    let mut coef = 0.0;
                    for l in 0..m {
                        coef += self.dlam[(r * d + c) * m + l] * self.lam[l * d + j];
                    }
                    v += coef * dz2[j * d + c];
                }
            }
            next[r] = v;
        }
        &self.lam
    }
}

fn check_shapes(dynamics: &dyn Dynamics, rp: &RoughPath, gamma: &SampledPath, x0: &[f64]) -> Result<()> {
    same_grid(gamma.times(), rp.times())?;
    let checks = [
        ("driver dimension", dynamics.noise_dim(), rp.dim()),
        ("control dimension", dynamics.control_dim(), gamma.dim()),
        ("initial state", dynamics.state_dim(), x0.len()),
    ];
    for (context, expected, found) in checks {
        if expected != found {
            return Err(Error::DimensionMismatch { context, expected, found });
        }
    }
    Ok(())
}

/// Solves the controlled RDE over `interval` with the second-order step scheme.
///
/// The output carries Gubinelli derivative `X′ = λ(X, γ)`. A state that leaves the
/// finite domain (norm above [`BLOW_UP`]) yields [`Error::BlowUp`] with the grid index.
///
/// ```
/// use roughctrl::paths::{uniform_grid, SampledPath};
/// use roughctrl::rde::{solve_rde, ControlledDynamics};
/// use roughctrl::rough::lift_piecewise_linear;
/// let t = uniform_grid(0.0, 1.0, 4096);
/// let rp = lift_piecewise_linear(&SampledPath::scalar(t.clone(), t.clone()).unwrap());
/// let gamma = SampledPath::constant(t, &[0.0]).unwrap();
/// let x = solve_rde(&ControlledDynamics::linear_scalar(), &rp, &gamma, &[1.0], (0.0, 1.0)).unwrap();
/// assert!((x.values().last()[0] - std::f64::consts::E).abs() < 1e-4);
/// ```
pub fn solve_rde(
    dynamics: &dyn Dynamics,
    rp: &RoughPath,
    gamma: &SampledPath,
    x0: &[f64],
    interval: (f64, f64),
) -> Result<ControlledPath> {
    check_shapes(dynamics, rp, gamma, x0)?;
    let (i0, i1) = interval_indices(rp.times(), interval)?;
    let (m, d) = (dynamics.state_dim(), dynamics.noise_dim());
    let t = rp.times();
    let z = rp.first_level();
    let n = i1 - i0 + 1;
    let mut xs = Vec::with_capacity(n * m);
    let mut deriv = Vec::with_capacity(n * m * d);
    xs.extend_from_slice(x0);
    let mut stepper = Stepper::new(dynamics);
    let (mut dz, mut next) = (vec![0.0; d], vec![0.0; m]);
    for i in i0..i1 {
        z.increment_into(i, i + 1, &mut dz);
        let dz2 = rp.second_step(i);
        let x = &xs[(i - i0) * m..(i - i0 + 1) * m];
        let lam = stepper.step(x, gamma.value(i), t[i + 1] - t[i], &dz, &dz2, &mut next);
        deriv.extend_from_slice(lam);
        if next.iter().any(|v| !v.is_finite()) || norm(&next) > BLOW_UP {
            return Err(Error::BlowUp { step: i + 1, time: t[i + 1] });
        }
        xs.extend_from_slice(&next);
    }
    let mut lam = vec![0.0; m * d];
    dynamics.vol(&xs[(n - 1) * m..], gamma.value(i1), &mut lam);
    deriv.extend_from_slice(&lam);
    let values = SampledPath::from_flat(t[i0..=i1].to_vec(), m, xs)?;
    ControlledPath::new(rp, values, deriv)
}

/// Norms entering the a priori estimates for an RDE solution.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct AprioriReport {
    /// `‖X‖_p`.
    pub x_pvar: f64,
    /// `‖R^X‖_{p/2}`.
    pub remainder_pvar: f64,
    /// `‖ψ(X, γ)′‖_p`.
    pub psi_deriv_pvar: f64,
    /// `‖R^{ψ(X, γ)}‖_{p/2}`.
    pub psi_remainder_pvar: f64,
    /// `‖γ‖_{p/2}`.
    pub gamma_pvar: f64,
    /// Homogeneous `1/p`-Hölder norm of the driver.
    pub rough_holder: f64,
}

/// Evaluates the a priori norms of a solution and of `ψ(X, γ)`.
pub fn apriori_diagnostics(
    solution: &ControlledPath,
    gamma: &SampledPath,
    rp: &RoughPath,
    psi: impl Fn(&[f64], &[f64]) -> Vec<f64>,
    dpsi: impl Fn(&[f64], &[f64]) -> Vec<f64>,
) -> Result<AprioriReport> {
    let p = rp.p();
    let g = gamma.restrict(solution.times()[0], *solution.times().last().unwrap())?;
    let psi_x = compose_controlled(psi, dpsi, solution, &g)?;
    Ok(AprioriReport {
        x_pvar: p_variation_full(solution.values(), p)?,
        remainder_pvar: p_variation_full(&solution.remainder(), p / 2.0)?,
        psi_deriv_pvar: p_variation_full(&psi_x.derivative_path(), p)?,
        psi_remainder_pvar: p_variation_full(&psi_x.remainder(), p / 2.0)?,
        gamma_pvar: p_variation_full(&g, p / 2.0)?,
        rough_holder: homogeneous_holder_norm(rp)?,
    })
}

/// Input data of one RDE solve in a stability comparison.
#[derive(Debug, Clone)]
pub struct RdeInput {
    pub rp: RoughPath,
    pub gamma: SampledPath,
    pub x0: Vec<f64>,
}

/// One row of a stability experiment.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct StabilityRow {
    pub input_distance: f64,
    pub output_distance: f64,
    /// `output / input`, or 0 when both vanish.
    pub ratio: f64,
}

/// Distance `|x - y| + ‖γ - ϑ‖_∞ + ‖γ - ϑ‖_{p/2} + ϱ_p(η, ζ)` between two inputs.
pub fn input_distance(a: &RdeInput, b: &RdeInput) -> Result<f64> {
    let p = a.rp.p();
    let dx: Vec<f64> = a.x0.iter().zip(&b.x0).map(|(u, v)| u - v).collect();
    let dg = a.gamma.difference(&b.gamma)?;
    Ok(norm(&dx) + dg.sup_norm() + p_variation_full(&dg, p / 2.0)? + rough_metric(&a.rp, &b.rp, MetricMode::PVar)?)
}

/// Distance `‖X′ - Y′‖_p + ‖R^X - R^Y‖_{p/2}` between two solutions.
pub fn output_distance(x: &ControlledPath, y: &ControlledPath, p: f64) -> Result<f64> {
    let dd = x.derivative_path().difference(&y.derivative_path())?;
    let (rx, ry) = (x.remainder(), y.remainder());
    let dr = crate::paths::difference(&rx, &ry)?;
    Ok(p_variation_full(&dd, p)? + p_variation_full(&dr, p / 2.0)?)
}

/// Solves each pair of inputs and tabulates input distance, output distance and their ratio.
pub fn stability_experiment(dynamics: &dyn Dynamics, pairs: &[(RdeInput, RdeInput)]) -> Result<Vec<StabilityRow>> {
    pairs
        .iter()
        .map(|(a, b)| {
            same_grid(a.rp.times(), b.rp.times())?;
            let full = (a.rp.times()[0], *a.rp.times().last().unwrap());
            let x = solve_rde(dynamics, &a.rp, &a.gamma, &a.x0, full)?;
            let y = solve_rde(dynamics, &b.rp, &b.gamma, &b.x0, full)?;
            let input = input_distance(a, b)?;
            let output = output_distance(&x, &y, a.rp.p())?;
            let ratio = if input > 0.0 { output / input } else { 0.0 };
            Ok(StabilityRow { input_distance: input, output_distance: output, ratio })
        })
        .collect()
}

/// `‖R‖_{p/2}` of an RDE solution.
pub fn remainder_variation(solution: &ControlledPath, p: f64) -> Result<f64> {
    let r = solution.remainder();
    debug_assert_eq!(r.width(), solution.dim());
    p_variation_full(&r, p / 2.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::paths::uniform_grid;
    use crate::rough::{lift_brownian_stratonovich, lift_piecewise_linear};

    fn time_lift(n: usize) -> RoughPath {
        let t = uniform_grid(0.0, 1.0, n);
        lift_piecewise_linear(&SampledPath::scalar(t.clone(), t).unwrap())
    }

    #[test]
    fn exponential_growth() {
        let rp = time_lift(4096);
        let g = SampledPath::constant(rp.times().to_vec(), &[0.0]).unwrap();
        let x = solve_rde(&ControlledDynamics::linear_scalar(), &rp, &g, &[1.0], (0.0, 1.0)).unwrap();
        assert!((x.values().last()[0] - std::f64::consts::E).abs() < 1e-4);
        for i in 0..x.len() {
            assert_eq!(x.derivative(i)[0], x.values().value(i)[0]);
        }
    }

    #[test]
    fn additive_dynamics_are_exact() {
        let rp = lift_brownian_stratonovich(2, 100, 1.0, 1).unwrap();
        let g = SampledPath::constant(rp.times().to_vec(), &[1.5]).unwrap();
        let x = solve_rde(&ControlledDynamics::additive(), &rp, &g, &[0.3], (0.0, 1.0)).unwrap();
        let z = rp.first_level();
        for i in 0..x.len() {
            assert!((x.values().value(i)[0] - 0.3 - 1.5 * z.increment(0, i)[0]).abs() < 1e-13);
        }
    }

    #[test]
    fn blow_up_is_reported() {
        let t = uniform_grid(0.0, 1.0, 2000);
        let rp = lift_piecewise_linear(&SampledPath::constant(t.clone(), &[0.0]).unwrap());
        let g = SampledPath::constant(t, &[0.0]).unwrap();
        match solve_rde(&ControlledDynamics::riccati_scalar(), &rp, &g, &[2.0], (0.0, 1.0)) {
            Err(Error::BlowUp { time, .. }) => assert!(time < 0.5 + 0.05),
            other => panic!("expected blow-up, got {other:?}"),
        }
    }

    #[test]
    fn builtin_derivatives_match_differences() {
        let probes: Vec<_> = [-1.3, 0.0, 2.1].iter().map(|&x| (vec![x], vec![0.7])).collect();
        for dynamics in [ControlledDynamics::linear_scalar(), ControlledDynamics::additive()] {
            assert!(derivative_mismatch(&dynamics, &probes) < 1e-6);
        }
    }

    #[test]
    fn identical_inputs_have_zero_distance() {
        let rp = lift_brownian_stratonovich(7, 64, 1.0, 1).unwrap();
        let input = RdeInput { gamma: SampledPath::constant(rp.times().to_vec(), &[0.5]).unwrap(), rp, x0: vec![1.0] };
        let rows = stability_experiment(&ControlledDynamics::linear_scalar(), &[(input.clone(), input)]).unwrap();
        assert_eq!(rows[0].input_distance, 0.0);
        assert_eq!(rows[0].output_distance, 0.0);
    }
}
