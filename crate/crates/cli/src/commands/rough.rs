use std::path::PathBuf;

use clap::Args;
use serde::{Deserialize, Serialize};
use serde_json::json;

use roughctrl::io::{write_lift_json, write_path_csv};
use roughctrl::paths::SampledPath;
use roughctrl::rough::*;

use crate::manifest::*;

#[derive(Args, Serialize, Deserialize)]
pub struct LiftArgs {
    /// Sampled path CSV (`t,x1,...,xd`).
    #[arg(long, conflicts_with = "brownian")]
    pub input: Option<PathBuf>,
    /// Simulate a Brownian path instead of reading one.
    #[arg(long)]
    pub brownian: bool,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 1000)]
    pub steps: usize,
    #[arg(long, default_value_t = 1)]
    pub dim: usize,
    #[arg(long, default_value_t = 1.0)]
    pub horizon: f64,
    /// Variation exponent recorded with the lift.
    #[arg(long, default_value_t = DEFAULT_P)]
    pub p: f64,
    #[arg(long)]
    pub output: PathBuf,
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
}

#[allow(clippy::too_many_arguments)]
fn source(input: &Option<PathBuf>, brownian: bool, seed: u64, steps: usize, dim: usize, horizon: f64, p: f64, m: &mut Manifest) -> anyhow::Result<RoughPath> {
    match (input, brownian) {
        (Some(path), false) => Ok(lift_piecewise_linear_with_p(&load_path(path, m)?, p)),
        (None, true) => {
            if steps == 0 || dim == 0 || !(horizon > 0.0) {
                return Err(config_error("Brownian lift needs --steps ≥ 1, --dim ≥ 1 and --horizon > 0"));
            }
            Ok(lift_piecewise_linear_with_p(&brownian_path(seed, steps, horizon, dim), p))
        }
        (Some(_), true) => Err(config_error("give either an input path or --brownian, not both")),
        (None, false) => Err(config_error("give an input path or --brownian")),
    }
}

pub fn lift(args: LiftArgs, name: &str) -> anyhow::Result<()> {
    let mut m = Manifest::new(name, &args);
    let rp = source(&args.input, args.brownian, args.seed, args.steps, args.dim, args.horizon, args.p, &mut m)?;
    write_lift_json(&args.output, &rp)?;
    m.output(&args.output);
    m.write_beside(&args.output)?;
    let n = rp.len();
    print_result(
        json!({
            "points": n,
            "dim": rp.dim(),
            "p": rp.p(),
            "geometric": rp.is_geometric(),
            "increment": rp.first_level().increment(0, n - 1),
            "second_level": rp.second(0, n - 1),
        }),
        &m,
    )
}

#[derive(Args, Serialize, Deserialize)]
pub struct ChenCheckArgs {
    /// Lift JSON written by `lift`.
    #[arg(long, conflicts_with = "brownian")]
    pub lift: Option<PathBuf>,
    #[arg(long)]
    pub brownian: bool,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 256)]
    pub steps: usize,
    #[arg(long, default_value_t = 2)]
    pub dim: usize,
    #[arg(long, default_value_t = 1.0)]
    pub horizon: f64,
    /// Largest accepted residual.
    #[arg(long, default_value_t = 1e-12)]
    pub tol: f64,
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
}

pub fn chen_check(args: ChenCheckArgs, name: &str) -> anyhow::Result<()> {
    let mut m = Manifest::new(name, &args);
    let rp = match &args.lift {
        Some(path) => load_lift(path, &mut m)?,
        None => source(&None, args.brownian, args.seed, args.steps, args.dim, args.horizon, DEFAULT_P, &mut m)?,
    };
    let chen = chen_residual(&rp);
    let sym = if rp.is_geometric() { symmetry_residual(&rp) } else { 0.0 };
    let pass = chen <= args.tol && sym <= args.tol;
    print_result(json!({ "chen_residual": chen, "symmetry_residual": sym, "geometric": rp.is_geometric(), "tol": args.tol, "pass": pass }), &m)?;
    if !pass {
        return Err(Failure(format!("residuals exceed {:e}: chen {chen:e}, symmetry {sym:e}", args.tol)).into());
    }
    Ok(())
}

#[derive(Args, Serialize, Deserialize)]
pub struct IntegrateArgs {
    #[arg(long)]
    pub lift: PathBuf,
    /// `identity` (all of `∫ ζ^i dζ^j`), or `sin`, `cos`, `exp` (`∫ f(ζ^k) dζ^k` for each k).
    #[arg(long, default_value = "identity")]
    pub integrand: String,
    /// `s,t`; the whole grid by default.
    #[arg(long)]
    pub interval: Option<String>,
    /// Running integral CSV.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
}

/// Integrand of `∫ Y dζ` with `Y` stored as `e × d` matrices.
type Scalar = fn(f64) -> f64;

fn integrand(rp: &RoughPath, name: &str) -> anyhow::Result<ControlledPath> {
    let d = rp.dim();
    let x = rp.first_level();
    let n = rp.len();
    if name == "identity" {
        // Y_{(i,j),k} = ζ^i δ_{jk}, so (∫ Y dζ)_{(i,j)} = ∫ ζ^i dζ^j.
        let w = d * d * d;
        let mut vals = Vec::with_capacity(n * w);
        let mut der = Vec::with_capacity(n * w * d);
        for t in 0..n {
            let z = x.value(t);
            let mut block = vec![0.0; w];
            let mut dblock = vec![0.0; w * d];
            for i in 0..d {
                for j in 0..d {
                    let row = (i * d + j) * d + j;
                    block[row] = z[i];
                    dblock[row * d + i] = 1.0;
                }
            }
            vals.extend(block);
            der.extend(dblock);
        }
        let values = SampledPath::from_flat(rp.times().to_vec(), w, vals)?;
        return Ok(ControlledPath::new(rp, values, der)?);
    }
    let (f, df): (Scalar, Scalar) = match name {
        "sin" => (f64::sin, f64::cos),
        "cos" => (f64::cos, |v| -v.sin()),
        "exp" => (f64::exp, f64::exp),
        other => return Err(config_error(format!("unknown integrand {other:?}; expected identity, sin, cos or exp"))),
    };
    // Diagonal Y_{k,k} = f(ζ^k).
    let w = d * d;
    let mut vals = Vec::with_capacity(n * w);
    let mut der = Vec::with_capacity(n * w * d);
    for t in 0..n {
        let z = x.value(t);
        let mut block = vec![0.0; w];
        let mut dblock = vec![0.0; w * d];
        for k in 0..d {
            block[k * d + k] = f(z[k]);
            dblock[(k * d + k) * d + k] = df(z[k]);
        }
        vals.extend(block);
        der.extend(dblock);
    }
    let values = SampledPath::from_flat(rp.times().to_vec(), w, vals)?;
    Ok(ControlledPath::new(rp, values, der)?)
}

pub fn integrate(args: IntegrateArgs, name: &str) -> anyhow::Result<()> {
    let mut m = Manifest::new(name, &args);
    let rp = load_lift(&args.lift, &mut m)?;
    let interval = match &args.interval {
        Some(s) => parse_interval(s)?,
        None => full_span(rp.times()),
    };
    let y = integrand(&rp, &args.integrand)?;
    let running = rough_integral(&y, &rp, interval)?;
    write_path_csv(&args.out, &running)?;
    m.output(&args.out);
    m.write_beside(&args.out)?;
    let mut result = json!({ "interval": [interval.0, interval.1], "value": running.last() });
    if args.integrand == "identity" {
        // ∫_s^t ζ^i dζ^j = ζ^i_s ζ^j_{s,t} + ζ^(2)_{s,t}.
        let x = rp.first_level();
        let (i0, i1) = (x.index_of(interval.0)?, x.index_of(interval.1)?);
        let (z0, inc, second) = (x.value(i0), x.increment(i0, i1), rp.second(i0, i1));
        let d = rp.dim();
        let got = running.last();
        let gap = (0..d * d).map(|k| (got[k] - z0[k / d] * inc[k % d] - second[k]).abs()).fold(0.0, f64::max);
        result["second_level_gap"] = json!(gap);
    }
    print_result(result, &m)
}
