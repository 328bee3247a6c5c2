use std::sync::Arc;

use super::backward::FilterControl;
use super::model::Gamma;
use crate::control::{
    solve_hjb_smooth, solve_rough_hjb, Boundary, CauchyReport, ControlProblem, ControlSet, Direction, HjbOptions, StateGrid, ValueField,
    DEFAULT_PADDING, SENTINEL,
};
use crate::error::{Error, Result};
use crate::paths::SampledPath;
use crate::rde::ControlledDynamics;
use crate::rough::RoughPath;

/// Scalar filter dynamics on the state `(q, R)` with control state `α`.
///
/// `dq = (α - c²R) q dt + cR dζ`, `dR = (σ² + 2αR - c²R²) dt`.
pub fn reduced_dynamics(sigma: f64, c: f64) -> ControlledDynamics {
    ControlledDynamics::new(
        2,
        1,
        1,
        move |x, a, o| {
            let (q, r, al) = (x[0], x[1], a[0]);
            o[0] = (al - c * c * r) * q;
            o[1] = sigma * sigma + 2.0 * al * r - c * c * r * r;
        },
        move |x, _, o| {
            o[0] = c * x[1];
            o[1] = 0.0;
        },
        move |_, _, o| {
            o.fill(0.0);
            o[1] = c;
        },
    )
}

fn check_reduced(ctl: &FilterControl) -> Result<(f64, f64)> {
    let g = &ctl.template;
    if g.m != 1 || g.d != 1 || g.l != 1 || ctl.mask != super::backward::ParamMask::ALPHA || g.rho[0] != 0.0 {
        return Err(Error::InvalidModel("the grid solver handles the scalar problem with only α uncertain and ρ = 0".into()));
    }
    Ok((g.sigma[0], g.c[0]))
}

/// The reduced backward problem as a grid control problem on `(μ, Σ; α)`.
pub fn reduced_control_problem(ctl: &FilterControl, n_controls: usize) -> Result<ControlProblem> {
    let (sigma, c) = check_reduced(ctl)?;
    let spec = ctl.spec.clone();
    let spec2 = ctl.spec.clone();
    let eps = ctl.epsilon;
    let gamma = move |a: f64| Gamma::scalar(a, sigma, c, 0.0);
    let prob = ControlProblem::new(Arc::new(reduced_dynamics(sigma, c)), ControlSet::interval(-ctl.u_max, ctl.u_max, n_controls))
        .with_running_cost(move |x, a, u| {
            let g = gamma(a[0]);
            (spec.prior)(&x[..1], &x[1..2], &g) + 0.5 * c * c * (x[0] * x[0] + x[1]) + eps * u[0] * u[0]
        })
        .with_terminal_cost(move |x, a| {
            if x[1] <= 0.0 {
                return SENTINEL;
            }
            (spec2.initial)(&x[..1], &x[1..2], &gamma(a[0]))
        })
        .with_psi(
            move |x, _, o| o[0] = -c * x[0],
            move |_, _, o| {
                o[0] = -c;
                o[1] = 0.0;
            },
        );
    Ok(prob)
}

/// Initial-value marching with the lower covariance face padded by `padding`.
pub fn reduced_hjb_options(padding: f64) -> HjbOptions {
    HjbOptions {
        direction: Direction::ForwardInitial,
        boundaries: vec![
            (Boundary::Flat, Boundary::Flat),
            (Boundary::Padding(padding), Boundary::Flat),
            (Boundary::Flat, Boundary::Flat),
        ],
        ..HjbOptions::default()
    }
}

fn check_grid(grid: &StateGrid, times: &[f64]) -> Result<()> {
    if grid.dim() != 3 {
        return Err(Error::DimensionMismatch { context: "filter grid (μ, Σ, α)", expected: 3, found: grid.dim() });
    }
    if !(grid.axes[1].lo > 0.0) {
        return Err(Error::InvalidGrid("the covariance axis must stay above zero".into()));
    }
    if times.first().copied() != Some(0.0) {
        return Err(Error::InvalidGrid("the filter value starts from its initial condition at t = 0".into()));
    }
    Ok(())
}

/// HJB value `v(t, μ, Σ, α)` of the reduced problem along a smooth driver `eta`.
pub fn filter_value_hjb_smooth(
    ctl: &FilterControl,
    eta: &SampledPath,
    times: &[f64],
    grid: &StateGrid,
    n_controls: usize,
    options: Option<&HjbOptions>,
) -> Result<ValueField> {
    check_grid(grid, times)?;
    let prob = reduced_control_problem(ctl, n_controls)?;
    let default = reduced_hjb_options(DEFAULT_PADDING);
    solve_hjb_smooth(&prob, eta, times, grid, options.unwrap_or(&default))
}

/// Rough HJB value of the reduced problem along mollifications of the lifted observation.
///
/// Returns the finest level and the Cauchy report over `levels`.
pub fn filter_value_hjb(
    ctl: &FilterControl,
    obs: &RoughPath,
    levels: &[usize],
    times: &[f64],
    grid: &StateGrid,
    n_controls: usize,
    options: Option<&HjbOptions>,
) -> Result<(ValueField, CauchyReport)> {
    check_grid(grid, times)?;
    let prob = reduced_control_problem(ctl, n_controls)?;
    let default = reduced_hjb_options(DEFAULT_PADDING);
    solve_rough_hjb(&prob, obs, levels, times, grid, options.unwrap_or(&default), 1)
}
