use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::kalman::{kalman_bucy_forward, likelihood_terms, LikelihoodMode, Observation};
use super::mat;
use super::model::{FilterModel, Gamma};
use crate::control::{add_costs, SENTINEL};
use crate::error::{Error, Result};
use crate::rough::RoughPath;

/// `𝔣(q, R, γ)`: prior running term.
pub type PriorFn = Arc<dyn Fn(&[f64], &[f64], &Gamma) -> f64 + Send + Sync>;
/// `g(μ₀, Σ₀, γ₀)`: initial term.
pub type InitialFn = Arc<dyn Fn(&[f64], &[f64], &Gamma) -> f64 + Send + Sync>;

/// Prior and exponents of the nonlinear expectation.
#[derive(Clone)]
pub struct PenaltySpec {
    pub prior: PriorFn,
    /// Returns [`SENTINEL`] outside the physical domain.
    pub initial: InitialFn,
    pub k1: f64,
    pub k2: f64,
    /// Constant subtracted from every penalty; κ-fields are min-normalised regardless.
    pub offset: f64,
}

impl std::fmt::Debug for PenaltySpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("PenaltySpec").field("k1", &self.k1).field("k2", &self.k2).field("offset", &self.offset).finish_non_exhaustive()
    }
}

impl PenaltySpec {
    pub fn new(
        prior: impl Fn(&[f64], &[f64], &Gamma) -> f64 + Send + Sync + 'static,
        initial: impl Fn(&[f64], &[f64], &Gamma) -> f64 + Send + Sync + 'static,
        k1: f64,
        k2: f64,
    ) -> Result<Self> {
        if !(k1 > 0.0) || !(k2 >= 1.0) {
            return Err(Error::InvalidArgument(format!("need k1 > 0 and k2 ≥ 1, got k1 = {k1}, k2 = {k2}")));
        }
        Ok(PenaltySpec { prior: Arc::new(prior), initial: Arc::new(initial), k1, k2, offset: 0.0 })
    }

    /// `𝔣 = 0`, `g = 0`.
    pub fn zero() -> Self {
        PenaltySpec::new(|_, _, _| 0.0, |_, _, _| 0.0, 1.0, 1.0).expect("valid exponents")
    }
}

/// Serializable quadratic prior.
///
/// `𝔣 = ½ w_run |γ - γ̂|²` and
/// `g = ½ w_mean (μ₀ - m̂)ᵀ Ŝ⁻¹ (μ₀ - m̂) + w_cov (tr(Ŝ⁻¹Σ₀) - m - log det(Ŝ⁻¹Σ₀)) + ½ w_init |γ₀ - γ̂|²`,
/// restricted to the parameter components flagged in `mask` (all if empty).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PenaltyConfig {
    pub k1: f64,
    pub k2: f64,
    pub prior_mean: Vec<f64>,
    pub prior_cov: Vec<f64>,
    pub mean_weight: f64,
    pub cov_weight: f64,
    /// Flattened `γ̂` in `(α, σ, c, ρ)` order.
    pub gamma_ref: Vec<f64>,
    #[serde(default)]
    pub mask: Vec<bool>,
    pub running_weight: f64,
    pub initial_weight: f64,
}

impl PenaltyConfig {
    pub fn to_spec(&self) -> Result<PenaltySpec> {
        let m = self.prior_mean.len();
        if self.prior_cov.len() != m * m {
            return Err(Error::InvalidArgument("prior covariance must be m × m".into()));
        }
        let (inv, logdet_ref) =
            mat::spd_inverse_logdet(&self.prior_cov, m).ok_or_else(|| Error::InvalidArgument("prior covariance must be positive definite".into()))?;
        let n = self.gamma_ref.len();
        let mask: Vec<bool> = if self.mask.is_empty() { vec![true; n] } else { self.mask.clone() };
        if mask.len() != n {
            return Err(Error::InvalidArgument("mask length must match gamma_ref".into()));
        }
        let gref = self.gamma_ref.clone();
        let dist = Arc::new(move |g: &Gamma| -> f64 {
            let v = g.to_flat();
            v.iter().zip(&gref).zip(&mask).filter(|(_, &on)| on).map(|((a, b), _)| (a - b) * (a - b)).sum::<f64>()
        });
        let (w_run, w_init) = (self.running_weight, self.initial_weight);
        let d1 = Arc::clone(&dist);
        let prior = move |_: &[f64], _: &[f64], g: &Gamma| 0.5 * w_run * d1(g);
        let (mean, w_mean, w_cov) = (self.prior_mean.clone(), self.mean_weight, self.cov_weight);
        let initial = move |mu: &[f64], sig: &[f64], g: &Gamma| {
            if mu.len() != m || sig.len() != m * m {
                return SENTINEL;
            }
            let Some((_, logdet)) = mat::spd_inverse_logdet(sig, m) else {
                return SENTINEL;
            };
            let dm: Vec<f64> = mu.iter().zip(&mean).map(|(a, b)| a - b).collect();
            let mut quad = 0.0;
            let mut tr = 0.0;
            for i in 0..m {
                for j in 0..m {
                    quad += dm[i] * inv[i * m + j] * dm[j];
                    tr += inv[i * m + j] * sig[j * m + i];
                }
            }
            let div = tr - m as f64 - (logdet - logdet_ref);
            let v = 0.5 * w_mean * quad + w_cov * div + 0.5 * w_init * dist(g);
            if v.is_finite() {
                v.min(SENTINEL)
            } else {
                SENTINEL
            }
        };
        PenaltySpec::new(prior, initial, self.k1, self.k2)
    }
}

/// Terms of a penalty evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PenaltyBreakdown {
    /// `∫ 𝔣(q, R, γ) ds`.
    pub prior: f64,
    /// Stratonovich negative log-likelihood.
    pub likelihood: f64,
    /// `g(μ₀, Σ₀, γ₀)`.
    pub initial: f64,
    pub total: f64,
}

/// Penalty `∫₀ᵗ 𝔣 ds + ∫₀ᵗ ψ dζ + ½∫₀ᵗ (|cq|² + tr(cλ)) ds + g(μ₀, Σ₀, γ₀)` of a parameter trajectory.
///
/// The model's (possibly sampled) parameters are the trajectory `γ`; the filter runs forward
/// from the model's `(μ₀, Σ₀)` along the lifted observation.
pub fn penalty(model: &FilterModel, obs: &RoughPath, spec: &PenaltySpec, t: f64) -> Result<PenaltyBreakdown> {
    let y = obs.first_level();
    let i1 = y.index_of(t)?;
    let initial = (spec.initial)(&model.mu0, &model.sigma0, &model.gamma_at(y.start_time()));
    let truncated = obs.first_level().window(0, i1);
    let kb = match kalman_bucy_forward(model, &truncated) {
        Ok(kb) => kb,
        Err(Error::InvalidModel(_)) => return Ok(PenaltyBreakdown { prior: SENTINEL, likelihood: 0.0, initial, total: SENTINEL }),
        Err(e) => return Err(e),
    };
    let lik = likelihood_terms(model, &kb, Observation::Lifted(obs), LikelihoodMode::Strat, t)?;
    let times = y.times();
    let mut prior = 0.0;
    let mut prev = None;
    let mut g = model.gamma_template();
    for i in 0..=i1 {
        model.gamma_at_into(times[i], &mut g);
        let v = (spec.prior)(kb.q.value(i), kb.r.value(i), &g);
        if let Some(p) = prev {
            prior += 0.5 * (times[i] - times[i - 1]) * (p + v);
        }
        prev = Some(v);
    }
    let mut total = add_costs(add_costs(prior, lik.value), initial);
    if total < SENTINEL {
        total -= spec.offset;
    }
    Ok(PenaltyBreakdown { prior, likelihood: lik.value, initial, total })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::filter::{neg_log_likelihood, simulate_signal_observation};
    use crate::rough::{lift_piecewise_linear, RoughPath};

    fn sim_lift(model: &FilterModel, seed: u64, n: usize) -> RoughPath {
        let (_, y) = simulate_signal_observation(model, seed, n, 1.0).unwrap();
        lift_piecewise_linear(&y)
    }

    #[test]
    fn zero_penalty_without_information() {
        let model = FilterModel::scalar(-1.0, 1.0, 0.0, 0.0, 0.0, 1.0).unwrap();
        let rp = sim_lift(&model, 1, 200);
        let p = penalty(&model, &rp, &PenaltySpec::zero(), 1.0).unwrap();
        assert_eq!(p.total, 0.0);
    }

    #[test]
    fn penalty_is_the_sum_of_its_parts() {
        let model = FilterModel::scalar(-1.0, 0.5, 1.0, 0.0, 0.2, 0.8).unwrap();
        let rp = sim_lift(&model, 2, 500);
        let spec = PenaltySpec::new(|_, _, g| g.alpha[0].powi(2), |mu, s, _| mu[0] * mu[0] + s[0], 1.0, 1.0).unwrap();
        let p = penalty(&model, &rp, &spec, 1.0).unwrap();
        let lik = neg_log_likelihood(&model, Observation::Lifted(&rp), LikelihoodMode::Strat).unwrap();
        assert!((p.prior - 1.0).abs() < 1e-12);
        assert!((p.initial - (0.04 + 0.8)).abs() < 1e-12);
        assert!((p.likelihood - lik.value).abs() < 1e-12);
        assert!((p.total - (p.prior + p.initial + p.likelihood)).abs() < 1e-12);
    }

    #[test]
    fn quadratic_config_is_minimal_at_reference() {
        let cfg = PenaltyConfig {
            k1: 1.0,
            k2: 1.0,
            prior_mean: vec![0.5],
            prior_cov: vec![2.0],
            mean_weight: 1.0,
            cov_weight: 1.0,
            gamma_ref: vec![-1.0, 0.5, 1.0, 0.0],
            mask: vec![true, false, false, false],
            running_weight: 3.0,
            initial_weight: 1.0,
        };
        let spec = cfg.to_spec().unwrap();
        let g = Gamma::scalar(-1.0, 0.5, 1.0, 0.0);
        assert!((spec.initial)(&[0.5], &[2.0], &g).abs() < 1e-12);
        assert!((spec.initial)(&[0.5], &[1e-9], &g) > 10.0);
        assert_eq!((spec.initial)(&[0.5], &[-1.0], &g), SENTINEL);
        let off = Gamma::scalar(0.0, 9.0, 1.0, 0.0);
        assert!(((spec.prior)(&[0.0], &[1.0], &off) - 1.5).abs() < 1e-12);
    }
}
