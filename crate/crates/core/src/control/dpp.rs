use super::hjb::ValueField;
use super::problem::{add_costs, rollout, ControlProblem};
use crate::error::{Error, Result};
use crate::rough::RoughPath;

/// Both sides of the dynamic programming identity at `(t, x, a)` with split time `r`.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct DppResidual {
    /// `v(t, x, a)` read from the field.
    pub value: f64,
    /// Smallest `cost on [t, r] + v(r, X_r, γ_r)` over the candidate controls.
    pub continuation: f64,
    pub residual: f64,
}

/// Checks `v(t, x, a) = inf_u {∫_t^r f + ∫_t^r ψ dζ + v(r, X_r, γ_r)}` on a computed field.
///
/// Candidates are the field's own feedback control and every constant control. Rollouts use
/// the grid of `rp`, which should be the lift of the driver the field was computed with.
pub fn dpp_check(prob: &ControlProblem, rp: &RoughPath, field: &ValueField, t: f64, x: &[f64], a: &[f64], r: f64) -> Result<DppResidual> {
    if r < t {
        return Err(Error::InvalidArgument(format!("split time {r} precedes {t}")));
    }
    let kt = field.time_index(t)?;
    let kr = field.time_index(r)?;
    let point: Vec<f64> = x.iter().chain(a).copied().collect();
    let value = field.interpolate(kt, &point);
    let m = x.len();
    let times = rp.times().to_vec();
    let slice_of = |i: usize| field.times.partition_point(|&s| s <= times[i] + 1e-12).saturating_sub(1);
    let end_value = |traj: &super::problem::Trajectory| {
        let p: Vec<f64> = traj.x.last().iter().chain(traj.gamma.last()).copied().collect();
        add_costs(traj.cost, field.interpolate(kr, &p))
    };
    let feedback = rollout(
        prob,
        rp,
        (t, r),
        x,
        a,
        |i, xs, gs| {
            let p: Vec<f64> = xs.iter().chain(gs).copied().collect();
            debug_assert_eq!(xs.len(), m);
            field.policy_at(slice_of(i), &p).to_vec()
        },
        false,
    )?;
    let mut best = end_value(&feedback);
    for u in prob.controls.points() {
        let traj = rollout(prob, rp, (t, r), x, a, |_, _, _| u.clone(), false)?;
        best = best.min(end_value(&traj));
    }
    Ok(DppResidual { value, continuation: best, residual: (value - best).abs() })
}
