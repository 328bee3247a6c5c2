use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::mat;
use crate::error::{Error, Result};
use crate::paths::{uniform_grid, SampledPath};

/// Margin in the correlation constraint `λ_max(ρρᵀ) < 1 - margin`.
pub const CORRELATION_MARGIN: f64 = 1e-6;

/// A matrix-valued parameter, constant or sampled on a time grid (linear in between).
///
/// Matrices are stored row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Param {
    Constant(Vec<f64>),
    Sampled { times: Vec<f64>, values: Vec<Vec<f64>> },
}

impl Param {
    fn len(&self) -> Option<usize> {
        match self {
            Param::Constant(v) => Some(v.len()),
            Param::Sampled { values, .. } => {
                let n = values.first()?.len();
                values.iter().all(|v| v.len() == n).then_some(n)
            }
        }
    }

    /// Value at `t`, clamped to the sampled range.
    pub fn at_into(&self, t: f64, out: &mut [f64]) {
        match self {
            Param::Constant(v) => out.copy_from_slice(v),
            Param::Sampled { times, values } => {
                let n = times.len();
                if t <= times[0] || n == 1 {
                    out.copy_from_slice(&values[0]);
                    return;
                }
                if t >= times[n - 1] {
                    out.copy_from_slice(&values[n - 1]);
                    return;
                }
                let j = times.partition_point(|&s| s <= t).clamp(1, n - 1);
                let w = (t - times[j - 1]) / (times[j] - times[j - 1]);
                for (k, o) in out.iter_mut().enumerate() {
                    *o = (1.0 - w) * values[j - 1][k] + w * values[j][k];
                }
            }
        }
    }

    fn samples(&self) -> Vec<&[f64]> {
        match self {
            Param::Constant(v) => vec![v.as_slice()],
            Param::Sampled { values, .. } => values.iter().map(Vec::as_slice).collect(),
        }
    }
}

/// Parameters `γ = (α, σ, c, ρ)` at one instant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Gamma {
    pub m: usize,
    pub d: usize,
    pub l: usize,
    /// `m × m`.
    pub alpha: Vec<f64>,
    /// `m × l`.
    pub sigma: Vec<f64>,
    /// `d × m`.
    pub c: Vec<f64>,
    /// `l × d`.
    pub rho: Vec<f64>,
}

impl Gamma {
    pub fn zeros(m: usize, d: usize, l: usize) -> Self {
        Gamma { m, d, l, alpha: vec![0.0; m * m], sigma: vec![0.0; m * l], c: vec![0.0; d * m], rho: vec![0.0; l * d] }
    }

    pub fn scalar(alpha: f64, sigma: f64, c: f64, rho: f64) -> Self {
        Gamma { m: 1, d: 1, l: 1, alpha: vec![alpha], sigma: vec![sigma], c: vec![c], rho: vec![rho] }
    }

    /// Length of the flattened parameter vector.
    pub fn flat_len(&self) -> usize {
        self.alpha.len() + self.sigma.len() + self.c.len() + self.rho.len()
    }

    /// Concatenation `(α, σ, c, ρ)`.
    pub fn to_flat(&self) -> Vec<f64> {
        [&self.alpha[..], &self.sigma, &self.c, &self.rho].concat()
    }

    pub fn set_flat(&mut self, v: &[f64]) {
        let (a, rest) = v.split_at(self.alpha.len());
        let (s, rest) = rest.split_at(self.sigma.len());
        let (c, r) = rest.split_at(self.c.len());
        self.alpha.copy_from_slice(a);
        self.sigma.copy_from_slice(s);
        self.c.copy_from_slice(c);
        self.rho.copy_from_slice(r);
    }

    /// Innovation gain `λ = R cᵀ + σ ρ` (`m × d`).
    pub fn gain_into(&self, r: &[f64], out: &mut [f64]) {
        let (m, d, l) = (self.m, self.d, self.l);
        mat::mul_bt(r, &self.c, m, m, d, out);
        for i in 0..m {
            for j in 0..d {
                out[i * d + j] += (0..l).map(|k| self.sigma[i * l + k] * self.rho[k * d + j]).sum::<f64>();
            }
        }
    }

    /// Riccati vector field `σσᵀ + αR + Rαᵀ - λλᵀ`, given the gain `lam`.
    pub fn riccati_into(&self, r: &[f64], lam: &[f64], out: &mut [f64]) {
        let (m, d, l) = (self.m, self.d, self.l);
        for i in 0..m {
            for j in 0..m {
                let mut v = 0.0;
                for k in 0..l {
                    v += self.sigma[i * l + k] * self.sigma[j * l + k];
                }
                for k in 0..m {
                    v += self.alpha[i * m + k] * r[k * m + j] + r[i * m + k] * self.alpha[j * m + k];
                }
                for k in 0..d {
                    v -= lam[i * d + k] * lam[j * d + k];
                }
                out[i * m + j] = v;
            }
        }
    }

    /// Mean drift `b_μ = αq - λcq`.
    pub fn mean_drift_into(&self, q: &[f64], lam: &[f64], out: &mut [f64]) {
        let (m, d) = (self.m, self.d);
        let cq: Vec<f64> = (0..d).map(|i| (0..m).map(|j| self.c[i * m + j] * q[j]).sum()).collect();
        for i in 0..m {
            let mut v: f64 = (0..m).map(|j| self.alpha[i * m + j] * q[j]).sum();
            v -= (0..d).map(|k| lam[i * d + k] * cq[k]).sum::<f64>();
            out[i] = v;
        }
    }

    /// `c q` (length `d`).
    pub fn observe(&self, q: &[f64]) -> Vec<f64> {
        (0..self.d).map(|i| (0..self.m).map(|j| self.c[i * self.m + j] * q[j]).sum()).collect()
    }

    /// `c λ` (`d × d`).
    pub fn c_gain(&self, lam: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.d * self.d];
        mat::mul(&self.c, lam, self.d, self.m, self.d, &mut out);
        out
    }

    pub fn correlation_ok(&self) -> bool {
        correlation_domain_check(&self.rho, self.l, self.d)
    }
}

/// `λ_max(ρρᵀ) < 1 - margin` for an `l × d` matrix `ρ`.
///
/// ```
/// use roughctrl::filter::correlation_domain_check;
/// assert!(correlation_domain_check(&[0.0], 1, 1));
/// assert!(!correlation_domain_check(&[1.0], 1, 1));
/// assert!(!correlation_domain_check(&[0.6, 0.8], 1, 2));
/// ```
pub fn correlation_domain_check(rho: &[f64], l: usize, d: usize) -> bool {
    if rho.len() != l * d || rho.iter().any(|v| !v.is_finite()) {
        return false;
    }
    let mut rr = vec![0.0; l * l];
    mat::mul_bt(rho, rho, l, d, l, &mut rr);
    mat::sym_eig_range(&rr, l).1 < 1.0 - CORRELATION_MARGIN
}

/// Linear Gaussian signal and observation model.
///
/// `dS = α S dt + σ dB¹`, `dY = c S dt + dB²`, `d⟨B¹, B²⟩ = ρ dt`, `S₀ ~ N(μ₀, Σ₀)`, `Y₀ = 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FilterModel {
    /// Signal dimension.
    pub m: usize,
    /// Observation dimension.
    pub d: usize,
    /// Signal noise dimension.
    pub l: usize,
    pub alpha: Param,
    pub sigma: Param,
    pub c: Param,
    pub rho: Param,
    pub mu0: Vec<f64>,
    /// Row-major `m × m`.
    pub sigma0: Vec<f64>,
}

impl FilterModel {
    /// Scalar model with constant parameters.
    pub fn scalar(alpha: f64, sigma: f64, c: f64, rho: f64, mu0: f64, sigma0: f64) -> Result<Self> {
        let model = FilterModel {
            m: 1,
            d: 1,
            l: 1,
            alpha: Param::Constant(vec![alpha]),
            sigma: Param::Constant(vec![sigma]),
            c: Param::Constant(vec![c]),
            rho: Param::Constant(vec![rho]),
            mu0: vec![mu0],
            sigma0: vec![sigma0],
        };
        model.validate()?;
        Ok(model)
    }

    /// Model with constant parameters `γ`.
    pub fn constant(gamma: &Gamma, mu0: Vec<f64>, sigma0: Vec<f64>) -> Result<Self> {
        let model = FilterModel {
            m: gamma.m,
            d: gamma.d,
            l: gamma.l,
            alpha: Param::Constant(gamma.alpha.clone()),
            sigma: Param::Constant(gamma.sigma.clone()),
            c: Param::Constant(gamma.c.clone()),
            rho: Param::Constant(gamma.rho.clone()),
            mu0,
            sigma0,
        };
        model.validate()?;
        Ok(model)
    }

    /// Model whose parameters follow a sampled trajectory `γ` (flattened as in [`Gamma::to_flat`]).
    pub fn from_trajectory(template: &Gamma, gamma: &SampledPath, mu0: Vec<f64>, sigma0: Vec<f64>) -> Result<Self> {
        if gamma.dim() != template.flat_len() {
            return Err(Error::DimensionMismatch { context: "parameter trajectory", expected: template.flat_len(), found: gamma.dim() });
        }
        let mut g = template.clone();
        let (mut a, mut s, mut c, mut r) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
        for i in 0..gamma.len() {
            g.set_flat(gamma.value(i));
            a.push(g.alpha.clone());
            s.push(g.sigma.clone());
            c.push(g.c.clone());
            r.push(g.rho.clone());
        }
        let times = gamma.times().to_vec();
        let model = FilterModel {
            m: template.m,
            d: template.d,
            l: template.l,
            alpha: Param::Sampled { times: times.clone(), values: a },
            sigma: Param::Sampled { times: times.clone(), values: s },
            c: Param::Sampled { times: times.clone(), values: c },
            rho: Param::Sampled { times, values: r },
            mu0,
            sigma0,
        };
        model.validate()?;
        Ok(model)
    }

    /// Checks shapes, `Σ₀` symmetric positive definite and `ρ ∈ Υ` at every sample.
    pub fn validate(&self) -> Result<()> {
        let (m, d, l) = (self.m, self.d, self.l);
        if m == 0 || d == 0 || l == 0 {
            return Err(Error::InvalidModel("dimensions must be positive".into()));
        }
        for (name, p, n) in [("alpha", &self.alpha, m * m), ("sigma", &self.sigma, m * l), ("c", &self.c, d * m), ("rho", &self.rho, l * d)] {
            if p.len() != Some(n) {
                return Err(Error::InvalidModel(format!("{name} must have {n} entries per sample")));
            }
            if let Param::Sampled { times, values } = p {
                if times.is_empty() || times.len() != values.len() || times.windows(2).any(|w| w[1] <= w[0]) {
                    return Err(Error::InvalidModel(format!("{name} needs increasing sample times matching its values")));
                }
            }
        }
        if self.mu0.len() != m || self.sigma0.len() != m * m {
            return Err(Error::InvalidModel("initial mean or covariance has the wrong size".into()));
        }
        let asym = (0..m).flat_map(|i| (0..m).map(move |j| (i, j))).map(|(i, j)| (self.sigma0[i * m + j] - self.sigma0[j * m + i]).abs()).fold(0.0, f64::max);
        if asym > 1e-12 * self.sigma0.iter().fold(1.0f64, |a, v| a.max(v.abs())) {
            return Err(Error::InvalidModel("initial covariance is not symmetric".into()));
        }
        if !(mat::sym_eig_range(&self.sigma0, m).0 > 0.0) {
            return Err(Error::InvalidModel("initial covariance is not positive definite".into()));
        }
        for rho in self.rho.samples() {
            if !correlation_domain_check(rho, l, d) {
                return Err(Error::InvalidModel("correlation leaves the valid domain".into()));
            }
        }
        Ok(())
    }

    pub fn gamma_template(&self) -> Gamma {
        Gamma::zeros(self.m, self.d, self.l)
    }

    pub fn gamma_at_into(&self, t: f64, g: &mut Gamma) {
        self.alpha.at_into(t, &mut g.alpha);
        self.sigma.at_into(t, &mut g.sigma);
        self.c.at_into(t, &mut g.c);
        self.rho.at_into(t, &mut g.rho);
    }

    pub fn gamma_at(&self, t: f64) -> Gamma {
        let mut g = self.gamma_template();
        self.gamma_at_into(t, &mut g);
        g
    }
}

/// Euler–Maruyama sample of signal and observation on `n_steps` uniform steps of `[0, horizon]`.
///
/// Each step draws `ΔB² = √dt z₂` and `ΔB¹ = ρ ΔB² + √dt L z₁` with `L Lᵀ = I - ρρᵀ`.
pub fn simulate_signal_observation(model: &FilterModel, seed: u64, n_steps: usize, horizon: f64) -> Result<(SampledPath, SampledPath)> {
    model.validate()?;
    if n_steps == 0 || !(horizon > 0.0) {
        return Err(Error::InvalidGrid("simulation needs a positive horizon and at least one step".into()));
    }
    let (m, d, l) = (model.m, model.d, model.l);
    let times = uniform_grid(0.0, horizon, n_steps);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut normal = || -> f64 { StandardNormal.sample(&mut rng) };
    let s0_factor = mat::cholesky(&model.sigma0, m).ok_or_else(|| Error::InvalidModel("initial covariance has no square root".into()))?;
    let z0: Vec<f64> = (0..m).map(|_| normal()).collect();
    let mut s: Vec<f64> = (0..m).map(|i| model.mu0[i] + (0..m).map(|j| s0_factor[i * m + j] * z0[j]).sum::<f64>()).collect();
    let mut y = vec![0.0; d];
    let mut s_data = Vec::with_capacity(m * (n_steps + 1));
    let mut y_data = Vec::with_capacity(d * (n_steps + 1));
    s_data.extend_from_slice(&s);
    y_data.extend_from_slice(&y);
    let mut g = model.gamma_template();
    let mut rr = vec![0.0; l * l];
    let mut factor_cache: Option<(Vec<f64>, Vec<f64>)> = None;
    for i in 0..n_steps {
        let dt = times[i + 1] - times[i];
        model.gamma_at_into(times[i], &mut g);
        let factor = match &factor_cache {
            Some((rho, f)) if *rho == g.rho => f.clone(),
            _ => {
                mat::mul_bt(&g.rho, &g.rho, l, d, l, &mut rr);
                let cov: Vec<f64> = mat::identity(l).iter().zip(&rr).map(|(a, b)| a - b).collect();
                let f = mat::cholesky(&cov, l).ok_or_else(|| Error::InvalidModel(format!("correlation block is not positive definite at t = {}", times[i])))?;
                factor_cache = Some((g.rho.clone(), f.clone()));
                f
            }
        };
        let sq = dt.sqrt();
        let db2: Vec<f64> = (0..d).map(|_| sq * normal()).collect();
        let z1: Vec<f64> = (0..l).map(|_| normal()).collect();
        let db1: Vec<f64> = (0..l)
            .map(|k| (0..d).map(|j| g.rho[k * d + j] * db2[j]).sum::<f64>() + sq * (0..l).map(|j| factor[k * l + j] * z1[j]).sum::<f64>())
            .collect();
        let cs = g.observe(&s);
        let next_s: Vec<f64> = (0..m)
            .map(|r| {
                s[r] + dt * (0..m).map(|j| g.alpha[r * m + j] * s[j]).sum::<f64>() + (0..l).map(|k| g.sigma[r * l + k] * db1[k]).sum::<f64>()
            })
            .collect();
        for j in 0..d {
            y[j] += cs[j] * dt + db2[j];
        }
        s = next_s;
        s_data.extend_from_slice(&s);
        y_data.extend_from_slice(&y);
    }
    Ok((SampledPath::from_flat(times.clone(), m, s_data)?, SampledPath::from_flat(times, d, y_data)?))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn degenerate_signal_is_constant() {
        let model = FilterModel::scalar(0.0, 0.0, 2.0, 0.0, 1.0, 0.5).unwrap();
        let (s, y) = simulate_signal_observation(&model, 3, 100, 1.0).unwrap();
        let s0 = s.first()[0];
        assert!(s.data().iter().all(|v| *v == s0));
        assert_eq!(y.first()[0], 0.0);
    }

    #[test]
    fn correlated_increments() {
        let model = FilterModel::scalar(0.0, 1.0, 0.0, 0.5, 0.0, 1.0).unwrap();
        let n = 100_000;
        let (s, y) = simulate_signal_observation(&model, 9, n, 1.0).unwrap();
        let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
        for i in 0..n {
            let a = s.value(i + 1)[0] - s.value(i)[0];
            let b = y.value(i + 1)[0] - y.value(i)[0];
            sxy += a * b;
            sxx += a * a;
            syy += b * b;
        }
        let corr = sxy / (sxx * syy).sqrt();
        let se = (1.0 - 0.25) / (n as f64).sqrt();
        assert!((corr - 0.5).abs() < 3.0 * se, "{corr}");
    }

    #[test]
    fn invalid_models_are_rejected() {
        assert!(FilterModel::scalar(0.0, 1.0, 1.0, 1.0, 0.0, 1.0).is_err());
        assert!(FilterModel::scalar(0.0, 1.0, 1.0, 0.0, 0.0, 0.0).is_err());
        let g = Gamma { m: 1, d: 2, l: 1, alpha: vec![0.0], sigma: vec![1.0], c: vec![1.0, 1.0], rho: vec![0.6, 0.8] };
        assert!(FilterModel::constant(&g, vec![0.0], vec![1.0]).is_err());
    }

    #[test]
    fn sampled_parameters_interpolate() {
        let p = Param::Sampled { times: vec![0.0, 1.0], values: vec![vec![0.0], vec![2.0]] };
        let mut o = [0.0];
        p.at_into(0.25, &mut o);
        assert_eq!(o[0], 0.5);
        p.at_into(3.0, &mut o);
        assert_eq!(o[0], 2.0);
    }
}
