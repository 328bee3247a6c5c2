use std::path::PathBuf;

use clap::Args;
use serde::{Deserialize, Serialize};
use serde_json::json;

use roughctrl::io::write_path_csv;
use roughctrl::paths::SampledPath;
use roughctrl::rde::*;
use roughctrl::rough::{brownian_path, lift_piecewise_linear, RoughPath};

use crate::dynamics::{dynamics, psi};
use crate::manifest::*;

#[derive(Args, Serialize, Deserialize)]
pub struct RdeArgs {
    /// Built-in name (`linear-scalar`, `additive`, `insider`, `kalman[:σ,c]`) or affine-dynamics JSON.
    #[arg(long)]
    pub dynamics: String,
    #[arg(long)]
    pub lift: PathBuf,
    /// Control path CSV, interpolated onto the lift grid; zero if omitted.
    #[arg(long)]
    pub control: Option<PathBuf>,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub x0: Vec<f64>,
    /// `s,t`; the whole grid by default.
    #[arg(long)]
    pub interval: Option<String>,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
}

fn control_on(rp: &RoughPath, control: Option<SampledPath>, k: usize) -> anyhow::Result<SampledPath> {
    let gamma = match control {
        Some(g) if g.dim() != k => return Err(config_error(format!("control has {} components, dynamics needs {k}", g.dim()))),
        Some(g) if g.times() == rp.times() => g,
        Some(g) => g.resample(rp.times().to_vec())?,
        None => SampledPath::constant(rp.times().to_vec(), &vec![0.0; k])?,
    };
    Ok(gamma)
}

pub fn rde(args: RdeArgs, name: &str) -> anyhow::Result<()> {
    let mut m = Manifest::new(name, &args);
    let dyn_ = dynamics(&args.dynamics, &mut m)?;
    let rp = load_lift(&args.lift, &mut m)?;
    let control = args.control.as_ref().map(|p| load_path(p, &mut m)).transpose()?;
    let gamma = control_on(&rp, control, dyn_.control_dim())?;
    if args.x0.len() != dyn_.state_dim() {
        return Err(config_error(format!("--x0 has {} entries, dynamics has state dimension {}", args.x0.len(), dyn_.state_dim())));
    }
    let interval = match &args.interval {
        Some(s) => parse_interval(s)?,
        None => full_span(rp.times()),
    };
    let x = solve_rde(dyn_.as_ref(), &rp, &gamma, &args.x0, interval)?;
    write_path_csv(&args.out, x.values())?;
    m.output(&args.out);
    m.write_beside(&args.out)?;
    print_result(
        json!({
            "steps": x.len() - 1,
            "final_state": x.values().last(),
            "remainder_variation": remainder_variation(&x, rp.p())?,
        }),
        &m,
    )
}

#[derive(Args, Serialize, Deserialize)]
pub struct StabilityArgs {
    #[arg(long, default_value = "linear-scalar")]
    pub dynamics: String,
    /// Seed of the base driver; the perturbation direction uses `seed + 1`.
    #[arg(long, default_value_t = 3)]
    pub seed: u64,
    #[arg(long, default_value_t = 1024)]
    pub steps: usize,
    #[arg(long, default_value_t = 1.0)]
    pub horizon: f64,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, default_value = "0.3")]
    pub x0: Vec<f64>,
    /// Amplitude of the base control `a sin(2πt)` in every component.
    #[arg(long, default_value_t = 0.5)]
    pub amplitude: f64,
    #[arg(long, default_value_t = 1e-5)]
    pub delta_min: f64,
    #[arg(long, default_value_t = 1e-1)]
    pub delta_max: f64,
    #[arg(long, default_value_t = 2)]
    pub per_decade: usize,
    /// Table of `delta, input_distance, output_distance, ratio`.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
}

fn wave(times: &[f64], k: usize, amp: f64) -> SampledPath {
    SampledPath::from_fn(times.to_vec(), k, |s| vec![amp * (2.0 * std::f64::consts::PI * s).sin(); k]).expect("grid is valid")
}

/// Least-squares slope of `ys` against `xs`.
fn slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let (mx, my) = (xs.iter().sum::<f64>() / n, ys.iter().sum::<f64>() / n);
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    sxy / sxx
}

pub fn stability(args: StabilityArgs, name: &str) -> anyhow::Result<()> {
    let mut m = Manifest::new(name, &args);
    let dyn_ = dynamics(&args.dynamics, &mut m)?;
    let (dm, k, d) = (dyn_.state_dim(), dyn_.control_dim(), dyn_.noise_dim());
    if args.x0.len() != dm {
        return Err(config_error(format!("--x0 has {} entries, dynamics has state dimension {dm}", args.x0.len())));
    }
    if !(args.delta_min > 0.0 && args.delta_max > args.delta_min) || args.per_decade == 0 || args.steps == 0 {
        return Err(config_error("need 0 < delta-min < delta-max, per-decade ≥ 1 and steps ≥ 1"));
    }
    let w = brownian_path(args.seed, args.steps, args.horizon, d);
    let b = brownian_path(args.seed + 1, args.steps, args.horizon, d);
    let base = RdeInput { rp: lift_piecewise_linear(&w), gamma: wave(w.times(), k, args.amplitude), x0: args.x0.clone() };
    let decades = (args.delta_max / args.delta_min).log10();
    let n = (decades * args.per_decade as f64).round() as usize + 1;
    let deltas: Vec<f64> = (0..n).map(|i| args.delta_min * 10f64.powf(i as f64 / args.per_decade as f64)).collect();
    let mut pairs = Vec::with_capacity(n);
    for &delta in &deltas {
        let wp = w.map(d, |s, v| v.iter().zip(b.interpolate(s)).map(|(a, e)| a + delta * e).collect())?;
        let gp = base.gamma.map(k, |s, v| v.iter().map(|a| a + delta * (3.0 * s).cos()).collect())?;
        let x0: Vec<f64> = args.x0.iter().map(|v| v + delta).collect();
        pairs.push((base.clone(), RdeInput { rp: lift_piecewise_linear(&wp), gamma: gp, x0 }));
    }
    let rows = stability_experiment(dyn_.as_ref(), &pairs)?;
    write_table(
        &args.out,
        &header(&["delta", "input_distance", "output_distance", "ratio"]),
        deltas.iter().zip(&rows).map(|(dl, r)| vec![*dl, r.input_distance, r.output_distance, r.ratio]),
    )?;
    m.output(&args.out);
    m.write_beside(&args.out)?;
    let xs: Vec<f64> = deltas.iter().map(|v| v.log10()).collect();
    let ys: Vec<f64> = rows.iter().map(|r| r.ratio.log10()).collect();
    print_result(json!({ "rows": rows, "deltas": deltas, "log_ratio_slope": slope(&xs, &ys) }), &m)
}

#[derive(Args, Serialize, Deserialize)]
pub struct AprioriArgs {
    #[arg(long, default_value = "linear-scalar")]
    pub dynamics: String,
    #[arg(long, default_value_t = 3)]
    pub seed: u64,
    #[arg(long, default_value_t = 1024)]
    pub steps: usize,
    #[arg(long, default_value_t = 1.0)]
    pub horizon: f64,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, default_value = "0.3")]
    pub x0: Vec<f64>,
    /// Amplitudes `a` of the controls `a sin(2πt)`.
    #[arg(long, value_delimiter = ',', default_value = "0.01,0.02,0.05,0.1,0.2,0.5")]
    pub amplitudes: Vec<f64>,
    /// `sin`, `identity` or `square`, applied componentwise.
    #[arg(long, default_value = "sin")]
    pub psi: String,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
}

pub fn apriori(args: AprioriArgs, name: &str) -> anyhow::Result<()> {
    let mut m = Manifest::new(name, &args);
    let dyn_ = dynamics(&args.dynamics, &mut m)?;
    let (f, df) = psi(&args.psi)?;
    if args.x0.len() != dyn_.state_dim() {
        return Err(config_error(format!("--x0 has {} entries, dynamics has state dimension {}", args.x0.len(), dyn_.state_dim())));
    }
    let rp = lift_piecewise_linear(&brownian_path(args.seed, args.steps, args.horizon, dyn_.noise_dim()));
    let p = rp.p();
    let mut rows = Vec::new();
    let mut reports = Vec::new();
    for &amp in &args.amplitudes {
        let g = wave(rp.times(), dyn_.control_dim(), amp);
        let x = solve_rde(dyn_.as_ref(), &rp, &g, &args.x0, full_span(rp.times()))?;
        let e = apriori_diagnostics(&x, &g, &rp, &f, &df)?;
        rows.push(vec![
            amp,
            e.x_pvar,
            e.remainder_pvar,
            e.psi_deriv_pvar,
            e.psi_remainder_pvar,
            e.gamma_pvar,
            e.psi_deriv_pvar / (e.x_pvar + e.gamma_pvar),
            e.psi_remainder_pvar / (e.x_pvar.powi(2) + e.remainder_pvar + e.gamma_pvar),
            e.x_pvar / (1.0 + e.gamma_pvar.powf(1.0 + p)),
            e.remainder_pvar / (1.0 + e.gamma_pvar.powf(2.0 + p)),
        ]);
        reports.push(e);
    }
    let names = ["amplitude", "x_pvar", "remainder_pvar", "psi_deriv_pvar", "psi_remainder_pvar", "gamma_pvar", "ratio_psi_deriv", "ratio_psi_remainder", "ratio_x", "ratio_remainder"];
    write_table(&args.out, &header(&names), rows.clone())?;
    m.output(&args.out);
    m.write_beside(&args.out)?;
    let spread: Vec<f64> = (6..10)
        .map(|j| {
            let col: Vec<f64> = rows.iter().map(|r| r[j]).collect();
            col.iter().cloned().fold(f64::MIN, f64::max) / col.iter().cloned().fold(f64::MAX, f64::min)
        })
        .collect();
    print_result(json!({ "reports": reports, "ratio_spread": spread, "rough_holder": reports.first().map(|r| r.rough_holder) }), &m)
}
