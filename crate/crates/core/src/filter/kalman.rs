use serde::{Deserialize, Serialize};

use super::mat;
use super::model::{FilterModel, Gamma};
use crate::error::{Error, Result};
use crate::paths::SampledPath;
use crate::rough::{rough_integral, ControlledPath, RoughPath};

/// Conditional mean and covariance of the Kalman–Bucy filter.
#[derive(Debug, Clone)]
pub struct KalmanOutput {
    /// `q_t ∈ ℝ^m`.
    pub q: SampledPath,
    /// `R_t`, flattened `m × m`.
    pub r: SampledPath,
}

/// One classical RK4 step of `dR/dt = σσᵀ + αR + Rαᵀ - λλᵀ` from `t` to `t + h`.
pub(crate) fn riccati_rk4(model: &FilterModel, t: f64, h: f64, r: &[f64], out: &mut [f64]) {
    let (m, d) = (model.m, model.d);
    let mut g = model.gamma_template();
    let mut lam = vec![0.0; m * d];
    let mut field = |s: f64, x: &[f64], k: &mut [f64]| {
        model.gamma_at_into(s, &mut g);
        g.gain_into(x, &mut lam);
        g.riccati_into(x, &lam, k);
    };
    let n = m * m;
    let (mut k1, mut k2, mut k3, mut k4, mut tmp) = (vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n]);
    field(t, r, &mut k1);
    (0..n).for_each(|i| tmp[i] = r[i] + 0.5 * h * k1[i]);
    field(t + 0.5 * h, &tmp, &mut k2);
    (0..n).for_each(|i| tmp[i] = r[i] + 0.5 * h * k2[i]);
    field(t + 0.5 * h, &tmp, &mut k3);
    (0..n).for_each(|i| tmp[i] = r[i] + h * k3[i]);
    field(t + h, &tmp, &mut k4);
    (0..n).for_each(|i| out[i] = r[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]));
    mat::symmetrize(out, m);
}

/// Runs the filter along the observation `y` from `(μ₀, Σ₀)`.
///
/// `R` follows the Riccati equation by RK4 on the observation grid; `q` follows
/// `dq = αq dt + λ(dY - cq dt)` with left-point increments.
///
/// ```
/// use roughctrl::filter::{kalman_bucy_forward, FilterModel};
/// use roughctrl::paths::{uniform_grid, SampledPath};
/// let model = FilterModel::scalar(0.0, 0.0, 1.0, 0.0, 0.0, 1.0).unwrap();
/// let t = uniform_grid(0.0, 1.0, 1000);
/// let y = SampledPath::constant(t, &[0.0]).unwrap();
/// let kb = kalman_bucy_forward(&model, &y).unwrap();
/// assert!((kb.r.last()[0] - 0.5).abs() < 1e-12);
/// ```
pub fn kalman_bucy_forward(model: &FilterModel, y: &SampledPath) -> Result<KalmanOutput> {
    model.validate()?;
    if y.dim() != model.d {
        return Err(Error::DimensionMismatch { context: "observation", expected: model.d, found: y.dim() });
    }
    let (m, d) = (model.m, model.d);
    let t = y.times();
    let n = t.len();
    let mut q = model.mu0.clone();
    let mut r = model.sigma0.clone();
    let mut qs = Vec::with_capacity(n * m);
    let mut rs = Vec::with_capacity(n * m * m);
    qs.extend_from_slice(&q);
    rs.extend_from_slice(&r);
    let mut g = model.gamma_template();
    let (mut lam, mut b, mut next_r, mut dy) = (vec![0.0; m * d], vec![0.0; m], vec![0.0; m * m], vec![0.0; d]);
    for i in 0..n - 1 {
        let h = t[i + 1] - t[i];
        model.gamma_at_into(t[i], &mut g);
        g.gain_into(&r, &mut lam);
        y.increment_into(i, i + 1, &mut dy);
        g.mean_drift_into(&q, &lam, &mut b);
        for j in 0..m {
            q[j] += b[j] * h + (0..d).map(|k| lam[j * d + k] * dy[k]).sum::<f64>();
        }
        riccati_rk4(model, t[i], h, &r, &mut next_r);
        r.copy_from_slice(&next_r);
        if !(mat::sym_eig_range(&r, m).0 > 0.0) || q.iter().chain(&r).any(|v| !v.is_finite()) {
            return Err(Error::InvalidModel(format!("filter covariance lost positive definiteness at t = {}; the step may be too coarse", t[i + 1])));
        }
        qs.extend_from_slice(&q);
        rs.extend_from_slice(&r);
    }
    Ok(KalmanOutput { q: SampledPath::from_flat(t.to_vec(), m, qs)?, r: SampledPath::from_flat(t.to_vec(), m * m, rs)? })
}

/// Form of the negative log-likelihood.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LikelihoodMode {
    /// `-∫ cq · dY + ½ ∫ |cq|² ds` with left-point sums.
    Ito,
    /// `-∫ cq ∘ dY + ½ ∫ (|cq|² + tr(cλ)) ds` with the rough integral against the lift.
    Strat,
}

/// Observation data: a plain path (Itô form only) or a rough lift.
#[derive(Debug, Clone, Copy)]
pub enum Observation<'a> {
    Path(&'a SampledPath),
    Lifted(&'a RoughPath),
}

impl<'a> Observation<'a> {
    pub fn path(&self) -> &'a SampledPath {
        match *self {
            Observation::Path(p) => p,
            Observation::Lifted(rp) => rp.first_level(),
        }
    }
}

/// Pieces of a negative log-likelihood.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Likelihood {
    /// `∫ cq · dY` (Itô) or `∫ cq ∘ dY` (Stratonovich).
    pub stochastic: f64,
    /// `½ ∫ |cq|² ds`.
    pub quadratic: f64,
    /// `½ ∫ tr(cλ) ds`, zero in the Itô form.
    pub correction: f64,
    pub value: f64,
}

impl Likelihood {
    /// Sum of the magnitudes of the pieces.
    pub fn scale(&self) -> f64 {
        self.stochastic.abs() + self.quadratic.abs() + self.correction.abs()
    }
}

/// Negative log-likelihood of the observation under `model` on `[0, T]`, constant dropped.
///
/// ```
/// use roughctrl::filter::{neg_log_likelihood, FilterModel, LikelihoodMode, Observation};
/// use roughctrl::rough::brownian_path;
/// let model = FilterModel::scalar(-1.0, 1.0, 0.0, 0.0, 0.0, 1.0).unwrap();
/// let y = brownian_path(4, 256, 1.0, 1);
/// let nll = neg_log_likelihood(&model, Observation::Path(&y), LikelihoodMode::Ito).unwrap();
/// assert_eq!(nll.value, 0.0);
/// ```
pub fn neg_log_likelihood(model: &FilterModel, obs: Observation<'_>, mode: LikelihoodMode) -> Result<Likelihood> {
    let y = obs.path();
    let kb = kalman_bucy_forward(model, y)?;
    likelihood_terms(model, &kb, obs, mode, y.end_time())
}

/// Likelihood pieces on `[0, t]` given a filter run on the observation grid.
pub(crate) fn likelihood_terms(model: &FilterModel, kb: &KalmanOutput, obs: Observation<'_>, mode: LikelihoodMode, t_end: f64) -> Result<Likelihood> {
    let y = obs.path();
    let (m, d) = (model.m, model.d);
    let i1 = y.index_of(t_end)?;
    let t = y.times();
    let mut g = model.gamma_template();
    let mut lam = vec![0.0; m * d];
    let mut cq = Vec::with_capacity(i1 + 1);
    let mut tr = Vec::with_capacity(i1 + 1);
    let mut psi = Vec::with_capacity(d * (i1 + 1));
    let mut dpsi = Vec::with_capacity(d * d * (i1 + 1));
    for i in 0..=i1 {
        model.gamma_at_into(t[i], &mut g);
        g.gain_into(kb.r.value(i), &mut lam);
        let o = g.observe(kb.q.value(i));
        let cl = g.c_gain(&lam);
        tr.push(mat::trace(&cl, d));
        psi.extend(o.iter().map(|v| -v));
        dpsi.extend(cl.iter().map(|v| -v));
        cq.push(o);
    }
    let sq = |v: &Vec<f64>| v.iter().map(|x| x * x).sum::<f64>();
    let quadratic = 0.5 * (0..i1).map(|i| 0.5 * (t[i + 1] - t[i]) * (sq(&cq[i]) + sq(&cq[i + 1]))).sum::<f64>();
    match mode {
        LikelihoodMode::Ito => {
            let mut dy = vec![0.0; d];
            let mut stochastic = 0.0;
            for i in 0..i1 {
                y.increment_into(i, i + 1, &mut dy);
                stochastic += cq[i].iter().zip(&dy).map(|(a, b)| a * b).sum::<f64>();
            }
            Ok(Likelihood { stochastic, quadratic, correction: 0.0, value: -stochastic + quadratic })
        }
        LikelihoodMode::Strat => {
            let Observation::Lifted(rp) = obs else {
                return Err(Error::InvalidArgument("the Stratonovich likelihood needs a lifted observation".into()));
            };
            let values = SampledPath::from_flat(t[..=i1].to_vec(), d, psi)?;
            let integrand = ControlledPath::new(rp, values, dpsi)?;
            let integral = rough_integral(&integrand, rp, (t[0], t[i1]))?;
            let stochastic = -integral.last()[0];
            let correction = 0.5 * (0..i1).map(|i| 0.5 * (t[i + 1] - t[i]) * (tr[i] + tr[i + 1])).sum::<f64>();
            Ok(Likelihood { stochastic, quadratic, correction, value: -stochastic + quadratic + correction })
        }
    }
}

/// Discrete covariation `Σ (cq)_{tᵢ,tᵢ₊₁} · Y_{tᵢ,tᵢ₊₁}` and its limit `∫ tr(c λ) ds`.
pub fn quadratic_covariation(model: &FilterModel, y: &SampledPath) -> Result<(f64, f64)> {
    let kb = kalman_bucy_forward(model, y)?;
    let (m, d) = (model.m, model.d);
    let t = y.times();
    let mut g: Gamma = model.gamma_template();
    let mut lam = vec![0.0; m * d];
    let mut prev_cq = Vec::new();
    let mut prev_tr = 0.0;
    let (mut discrete, mut integral) = (0.0, 0.0);
    let mut dy = vec![0.0; d];
    for i in 0..t.len() {
        model.gamma_at_into(t[i], &mut g);
        g.gain_into(kb.r.value(i), &mut lam);
        let cq = g.observe(kb.q.value(i));
        let tr = mat::trace(&g.c_gain(&lam), d);
        if i > 0 {
            y.increment_into(i - 1, i, &mut dy);
            discrete += (0..d).map(|k| (cq[k] - prev_cq[k]) * dy[k]).sum::<f64>();
            integral += 0.5 * (t[i] - t[i - 1]) * (tr + prev_tr);
        }
        prev_cq = cq;
        prev_tr = tr;
    }
    Ok((discrete, integral))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::paths::uniform_grid;

    fn zero_obs(n: usize, t: f64) -> SampledPath {
        SampledPath::constant(uniform_grid(0.0, t, n), &[0.0]).unwrap()
    }

    #[test]
    fn steady_state_of_scalar_riccati() {
        let model = FilterModel::scalar(-1.0, 1.0, 1.0, 0.0, 0.0, 1.0).unwrap();
        let kb = kalman_bucy_forward(&model, &zero_obs(10_000, 10.0)).unwrap();
        assert!((kb.r.last()[0] - (2f64.sqrt() - 1.0)).abs() < 1e-8);
    }

    #[test]
    fn pure_diffusion_of_uncertainty() {
        let model = FilterModel::scalar(0.0, 0.7, 0.0, 0.0, 0.0, 0.3).unwrap();
        let kb = kalman_bucy_forward(&model, &zero_obs(50, 2.0)).unwrap();
        for i in 0..kb.r.len() {
            let t = kb.r.times()[i];
            assert!((kb.r.value(i)[0] - (0.3 + 0.49 * t)).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_sensitivity_gives_zero_likelihood() {
        let model = FilterModel::scalar(-0.5, 1.0, 0.0, 0.0, 1.0, 1.0).unwrap();
        let rp = crate::rough::lift_brownian_stratonovich(5, 128, 1.0, 1).unwrap();
        for mode in [LikelihoodMode::Ito, LikelihoodMode::Strat] {
            assert_eq!(neg_log_likelihood(&model, Observation::Lifted(&rp), mode).unwrap().value, 0.0);
        }
        let y = rp.first_level().clone();
        assert!(neg_log_likelihood(&model, Observation::Path(&y), LikelihoodMode::Strat).is_err());
    }

    #[test]
    fn trace_term_with_zero_mean() {
        // with q ≡ 0 only the covariation correction survives
        let model = FilterModel::scalar(0.0, 0.0, 0.1, 0.0, 0.0, 1.0).unwrap();
        let t = uniform_grid(0.0, 1.0, 2000);
        let rp = crate::rough::lift_piecewise_linear(&SampledPath::constant(t, &[0.0]).unwrap());
        let nll = neg_log_likelihood(&model, Observation::Lifted(&rp), LikelihoodMode::Strat).unwrap();
        // R = 1 / (1 + 0.01 t), so ½∫ c²R = ½ ln(1.01)
        assert!((nll.value - 0.5 * 1.01f64.ln()).abs() < 1e-9);
    }
}
