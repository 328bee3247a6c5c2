use std::sync::Arc;

use super::problem::{ControlProblem, ControlSet};
use crate::error::{Error, Result};
use crate::paths::SampledPath;
use crate::rde::ControlledDynamics;

/// Closed-form optimal profit of the insider with quadratic trading costs.
///
/// The investor holds `γ` units of an asset priced by `ζ`, trades at rate `u` (so `dγ = u dt`)
/// and pays `ε u²`. Optimal expected terminal wealth from wealth `x` and holding `a` at time `t` is
/// `x + (ζ_T - ζ_t) a + (1/4ε) ∫_t^T (ζ_T - ζ_s)² ds`, evaluated here with the trapezoid rule
/// on the path grid. This is a maximisation; [`insider_problem`] states the same problem as
/// a minimisation whose value is the negative of this one.
///
/// ```
/// use roughctrl::control::insider_value_closed_form;
/// use roughctrl::paths::{uniform_grid, SampledPath};
/// let t = uniform_grid(0.0, 1.0, 2000);
/// let zeta = SampledPath::scalar(t.clone(), t).unwrap();
/// let v = insider_value_closed_form(&zeta, 0.25, 0.0, 0.0, 0.0).unwrap();
/// assert!((v - 1.0 / 3.0).abs() < 1e-6);
/// ```
pub fn insider_value_closed_form(zeta: &SampledPath, epsilon: f64, t: f64, x: f64, a: f64) -> Result<f64> {
    if !(epsilon > 0.0) {
        return Err(Error::InvalidArgument(format!("trading cost ε must be positive, got {epsilon}")));
    }
    if zeta.dim() != 1 {
        return Err(Error::DimensionMismatch { context: "insider price path", expected: 1, found: zeta.dim() });
    }
    let i0 = zeta.index_of(t)?;
    let n = zeta.len();
    let s = zeta.times();
    let z_end = zeta.last()[0];
    let mut integral = 0.0;
    for i in i0..n - 1 {
        let (l, r) = (z_end - zeta.value(i)[0], z_end - zeta.value(i + 1)[0]);
        integral += 0.5 * (s[i + 1] - s[i]) * (l * l + r * r);
    }
    Ok(x + (z_end - zeta.value(i0)[0]) * a + integral / (4.0 * epsilon))
}

/// Optimal trading rate `(ζ_T - ζ_t) / 2ε` of the insider problem.
pub fn insider_optimal_rate(zeta: &SampledPath, epsilon: f64, t: f64) -> Result<f64> {
    let i = zeta.index_of(t)?;
    Ok((zeta.last()[0] - zeta.value(i)[0]) / (2.0 * epsilon))
}

/// Insider problem in minimisation form on the state `(x, a)` with controls `u ∈ [-u_max, u_max]`.
///
/// `dX = γ dζ`, `dγ = u dt`, running cost `ε u²` and terminal cost `-x`.
pub fn insider_problem(epsilon: f64, u_max: f64, n_controls: usize) -> ControlProblem {
    ControlProblem::new(Arc::new(ControlledDynamics::insider()), ControlSet::interval(-u_max, u_max, n_controls))
        .with_running_cost(move |_, _, u| epsilon * u[0] * u[0])
        .with_terminal_cost(|x, _| -x[0])
}

/// How to measure `∫ |η̇|` of a sampled path.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum VariationMode {
    /// Samples of a smooth path: local extrema are refined by parabolic interpolation.
    Smooth,
    /// The piecewise-linear interpolant of the samples.
    PiecewiseLinear,
}

/// Total variation of a scalar path over grid interval `[i0, end]`.
pub fn total_variation(path: &SampledPath, i0: usize, mode: VariationMode) -> f64 {
    let s = path.times();
    let y: Vec<f64> = (i0..path.len()).map(|i| path.value(i)[0]).collect();
    let mut adj = y.clone();
    if mode == VariationMode::Smooth {
        for j in 1..y.len().saturating_sub(1) {
            let (l, r) = (y[j] - y[j - 1], y[j + 1] - y[j]);
            // a peak midway between two equal samples shows up as a zero increment
            let turns = l * r < 0.0
                || (r == 0.0 && l != 0.0 && y[j + 1..].windows(2).map(|w| w[1] - w[0]).find(|v| *v != 0.0).is_some_and(|v| v * l < 0.0));
            if !turns {
                continue;
            }
            let (t0, t1, t2) = (s[i0 + j - 1], s[i0 + j], s[i0 + j + 1]);
            // parabola through the three samples, evaluated at its vertex
            let d1 = l / (t1 - t0);
            let d2 = r / (t2 - t1);
            let curv = (d2 - d1) / (t2 - t0);
            if curv == 0.0 {
                continue;
            }
            let slope_mid = d1 + curv * (t1 - t0);
            let tv = t1 - slope_mid / (2.0 * curv);
            if tv > t0 && tv < t2 {
                adj[j] = y[j] + slope_mid * (tv - t1) + curv * (tv - t1).powi(2);
            }
        }
    }
    adj.windows(2).map(|w| (w[1] - w[0]).abs()).sum()
}

/// Unregularised value `x + ε ∫_t^T |η̇|` of choosing the holding in `[-ε, ε]` with full
/// knowledge of `η`, and the bang-bang optimal holding `ε sgn(η̇)`.
///
/// ```
/// use roughctrl::control::{degeneracy_demo, VariationMode};
/// use roughctrl::paths::{uniform_grid, SampledPath};
/// let t = uniform_grid(0.0, 2.0 * std::f64::consts::PI, 10_000);
/// let eta = SampledPath::from_fn(t, 1, |s| vec![(2.0 * s).sin()]).unwrap();
/// let (v, _) = degeneracy_demo(&eta, 1.0, 0.0, 0.0, VariationMode::Smooth).unwrap();
/// assert!((v - 8.0).abs() < 1e-6);
/// ```
pub fn degeneracy_demo(eta: &SampledPath, epsilon: f64, t: f64, x: f64, mode: VariationMode) -> Result<(f64, SampledPath)> {
    if eta.dim() != 1 {
        return Err(Error::DimensionMismatch { context: "degeneracy driver", expected: 1, found: eta.dim() });
    }
    let i0 = eta.index_of(t)?;
    let value = x + epsilon * total_variation(eta, i0, mode);
    let window = eta.window(i0, eta.len() - 1);
    let n = window.len();
    let mut control = Vec::with_capacity(n);
    for i in 0..n.saturating_sub(1) {
        let inc = window.value(i + 1)[0] - window.value(i)[0];
        control.push(if inc > 0.0 { epsilon } else if inc < 0.0 { -epsilon } else { 0.0 });
    }
    let last = control.last().copied().unwrap_or(0.0);
    control.push(last);
    Ok((value, SampledPath::scalar(window.times().to_vec(), control)?))
}
