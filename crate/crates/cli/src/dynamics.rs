//! Built-in dynamics and the JSON form of affine dynamics.

use std::path::Path;
use std::sync::Arc;

use serde::Deserialize;

use roughctrl::filter::reduced_dynamics;
use roughctrl::rde::{ControlledDynamics, Dynamics};

use crate::manifest::{config_error, load_json, Manifest};

/// `dX = (A x + B a + b) dt + (C x + D a + e) dζ`, coefficients row-major, zero when omitted.
///
/// The volatility is indexed by `(i·d + j)` for state row `i` and driver column `j`.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AffineDynamics {
    pub m: usize,
    pub k: usize,
    pub d: usize,
    #[serde(default)]
    pub drift_x: Vec<f64>,
    #[serde(default)]
    pub drift_a: Vec<f64>,
    #[serde(default)]
    pub drift_c: Vec<f64>,
    #[serde(default)]
    pub vol_x: Vec<f64>,
    #[serde(default)]
    pub vol_a: Vec<f64>,
    #[serde(default)]
    pub vol_c: Vec<f64>,
}

fn filled(v: &[f64], n: usize, name: &str) -> anyhow::Result<Vec<f64>> {
    match v.len() {
        0 => Ok(vec![0.0; n]),
        len if len == n => Ok(v.to_vec()),
        len => Err(config_error(format!("affine dynamics: `{name}` needs {n} entries, got {len}"))),
    }
}

fn affine_map(lin_x: &[f64], lin_a: &[f64], c: &[f64], x: &[f64], a: &[f64], out: &mut [f64]) {
    let (m, k) = (x.len(), a.len());
    for (r, o) in out.iter_mut().enumerate() {
        let mut v = c[r];
        for l in 0..m {
            v += lin_x[r * m + l] * x[l];
        }
        for l in 0..k {
            v += lin_a[r * k + l] * a[l];
        }
        *o = v;
    }
}

impl AffineDynamics {
    pub fn build(&self) -> anyhow::Result<ControlledDynamics> {
        let (m, k, d) = (self.m, self.k, self.d);
        if m == 0 || d == 0 {
            return Err(config_error("affine dynamics needs m ≥ 1 and d ≥ 1"));
        }
        let bx = filled(&self.drift_x, m * m, "drift_x")?;
        let ba = filled(&self.drift_a, m * k, "drift_a")?;
        let bc = filled(&self.drift_c, m, "drift_c")?;
        let vx = filled(&self.vol_x, m * d * m, "vol_x")?;
        let va = filled(&self.vol_a, m * d * k, "vol_a")?;
        let vc = filled(&self.vol_c, m * d, "vol_c")?;
        let vx2 = vx.clone();
        Ok(ControlledDynamics::new(
            m,
            k,
            d,
            move |x, a, o| affine_map(&bx, &ba, &bc, x, a, o),
            move |x, a, o| affine_map(&vx, &va, &vc, x, a, o),
            move |_, _, o| o.copy_from_slice(&vx2),
        ))
    }
}

/// Resolves a built-in name or an affine-dynamics JSON file.
///
/// Built-ins: `linear-scalar`, `additive`, `insider` and `kalman[:σ,c]` (default `σ = c = 1`).
pub fn dynamics(spec: &str, manifest: &mut Manifest) -> anyhow::Result<Arc<dyn Dynamics>> {
    let d: ControlledDynamics = match spec {
        "linear-scalar" => ControlledDynamics::linear_scalar(),
        "additive" => ControlledDynamics::additive(),
        "insider" => ControlledDynamics::insider(),
        s if s == "kalman" || s.starts_with("kalman:") => {
            let (sigma, c) = match s.strip_prefix("kalman:") {
                None => (1.0, 1.0),
                Some(rest) => {
                    let v: Vec<f64> = rest
                        .split(',')
                        .map(|x| x.trim().parse::<f64>())
                        .collect::<Result<_, _>>()
                        .map_err(|_| config_error(format!("bad kalman parameters {rest:?}")))?;
                    match v.as_slice() {
                        [s, c] => (*s, *c),
                        _ => return Err(config_error("kalman dynamics takes `kalman:σ,c`")),
                    }
                }
            };
            reduced_dynamics(sigma, c)
        }
        path if path.ends_with(".json") => {
            let affine: AffineDynamics = load_json(Path::new(path), manifest)?;
            affine.build()?
        }
        other => return Err(config_error(format!("unknown dynamics {other:?}; expected linear-scalar, additive, insider, kalman[:σ,c] or a .json file"))),
    };
    Ok(Arc::new(d))
}

/// Dynamics named inline in a problem file: a built-in name, a JSON path or an affine object.
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum DynamicsSource {
    Name(String),
    Affine(AffineDynamics),
}

impl DynamicsSource {
    pub fn build(&self, manifest: &mut Manifest) -> anyhow::Result<Arc<dyn Dynamics>> {
        match self {
            DynamicsSource::Name(s) => dynamics(s, manifest),
            DynamicsSource::Affine(a) => Ok(Arc::new(a.build()?)),
        }
    }
}

type Psi = Box<dyn Fn(&[f64], &[f64]) -> Vec<f64>>;

/// Componentwise test function `ψ` and its diagonal Jacobian.
pub fn psi(name: &str) -> anyhow::Result<(Psi, Psi)> {
    fn diag(v: Vec<f64>) -> Vec<f64> {
        let m = v.len();
        let mut out = vec![0.0; m * m];
        for (i, x) in v.into_iter().enumerate() {
            out[i * m + i] = x;
        }
        out
    }
    Ok(match name {
        "sin" => (Box::new(|x, _| x.iter().map(|v| v.sin()).collect()), Box::new(|x, _| diag(x.iter().map(|v| v.cos()).collect()))),
        "identity" => (Box::new(|x, _| x.to_vec()), Box::new(|x, _| diag(vec![1.0; x.len()]))),
        "square" => (Box::new(|x, _| x.iter().map(|v| v * v).collect()), Box::new(|x, _| diag(x.iter().map(|v| 2.0 * v).collect()))),
        other => return Err(config_error(format!("unknown ψ {other:?}; expected sin, identity or square"))),
    })
}
