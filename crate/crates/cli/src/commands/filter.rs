use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::Args;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use roughctrl::control::{StateGrid, ValueField};
use roughctrl::filter::*;
use roughctrl::io::write_path_csv;
use roughctrl::paths::{uniform_grid, SampledPath};

use crate::manifest::*;

fn load_model(path: &Path, m: &mut Manifest) -> anyhow::Result<FilterModel> {
    let model: FilterModel = load_json(path, m)?;
    model.validate().map_err(|e| config_error(format!("{}: {e}", path.display())))?;
    Ok(model)
}

#[derive(Args, Serialize, Deserialize)]
pub struct SimulateArgs {
    /// Model JSON: dims `m, d, l`, parameters `alpha, sigma, c, rho`, `mu0`, `sigma0`.
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 1000)]
    pub steps: usize,
    #[arg(long, default_value_t = 1.0)]
    pub horizon: f64,
    /// CSV `t, s1..sm, y1..yd`.
    #[arg(long)]
    pub out: PathBuf,
    /// Also write the observation alone (`t, y1..yd`).
    #[arg(long)]
    pub obs_out: Option<PathBuf>,
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
}

pub fn simulate(args: SimulateArgs, name: &str) -> anyhow::Result<()> {
    let mut m = Manifest::new(name, &args);
    let model = load_model(&args.model, &mut m)?;
    if args.steps == 0 || !(args.horizon > 0.0) {
        return Err(config_error("need --steps ≥ 1 and --horizon > 0"));
    }
    let (s, y) = simulate_signal_observation(&model, args.seed, args.steps, args.horizon)?;
    let mut names = vec!["t".to_string()];
    names.extend((1..=model.m).map(|i| format!("s{i}")));
    names.extend((1..=model.d).map(|i| format!("y{i}")));
    let rows = (0..s.len()).map(|i| [&[s.times()[i]][..], s.value(i), y.value(i)].concat());
    write_table(&args.out, &names, rows)?;
    m.output(&args.out);
    if let Some(obs) = &args.obs_out {
        write_path_csv(obs, &y)?;
        m.output(obs);
    }
    m.write_beside(&args.out)?;
    print_result(json!({ "steps": args.steps, "final_signal": s.last(), "final_observation": y.last() }), &m)
}

#[derive(Args, Serialize, Deserialize)]
pub struct FilterArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// Observation CSV with `d` value columns, or `simulate` output with `m + d`.
    #[arg(long)]
    pub obs: PathBuf,
    /// CSV `t, q1..qm, r11..rmm`.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
}

fn observation(raw: SampledPath, model: &FilterModel) -> anyhow::Result<SampledPath> {
    let (m, d) = (model.m, model.d);
    match raw.dim() {
        k if k == d => Ok(raw),
        k if k == m + d => Ok(raw.map(d, |_, v| v[m..].to_vec())?),
        k => Err(config_error(format!("observation file has {k} value columns; expected {d} or {}", m + d))),
    }
}

pub fn filter(args: FilterArgs, name: &str) -> anyhow::Result<()> {
    let mut mf = Manifest::new(name, &args);
    let model = load_model(&args.model, &mut mf)?;
    let y = observation(load_path(&args.obs, &mut mf)?, &model)?;
    let kb = kalman_bucy_forward(&model, &y)?;
    let mut names = vec!["t".to_string()];
    names.extend((1..=model.m).map(|i| format!("q{i}")));
    for i in 1..=model.m {
        names.extend((1..=model.m).map(|j| format!("r{i}{j}")));
    }
    let rows = (0..y.len()).map(|i| [&[y.times()[i]][..], kb.q.value(i), kb.r.value(i)].concat());
    write_table(&args.out, &names, rows)?;
    mf.output(&args.out);
    mf.write_beside(&args.out)?;
    let nll = neg_log_likelihood(&model, Observation::Path(&y), LikelihoodMode::Ito)?;
    print_result(json!({ "final_mean": kb.q.last(), "final_covariance": kb.r.last(), "neg_log_likelihood_ito": nll }), &mf)
}

#[derive(Args, Serialize, Deserialize)]
pub struct PenaltyArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// Lifted observation written by `lift`.
    #[arg(long)]
    pub obs_lift: PathBuf,
    /// Quadratic prior JSON (`k1, k2, prior_mean, prior_cov, ..., gamma_ref, mask`).
    #[arg(long)]
    pub spec: PathBuf,
    /// Evaluation time; the end of the observation by default.
    #[arg(long)]
    pub t: Option<f64>,
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
}

pub fn penalty(args: PenaltyArgs, name: &str) -> anyhow::Result<()> {
    let mut mf = Manifest::new(name, &args);
    let model = load_model(&args.model, &mut mf)?;
    let obs = load_lift(&args.obs_lift, &mut mf)?;
    let cfg: PenaltyConfig = load_json(&args.spec, &mut mf)?;
    let spec = cfg.to_spec()?;
    let t = args.t.unwrap_or(full_span(obs.times()).1);
    let b = roughctrl::filter::penalty(&model, &obs, &spec, t)?;
    print_result(json!({ "t": t, "penalty": b }), &mf)
}

#[derive(Args, Serialize, Deserialize)]
pub struct RobustArgs {
    /// Scalar model with constant `σ`, `c` and `ρ = 0`; `α` is the uncertain parameter.
    #[arg(long)]
    pub reduced: PathBuf,
    #[arg(long)]
    pub obs_lift: PathBuf,
    #[arg(long)]
    pub spec: PathBuf,
    #[arg(long, default_value = "mu=-4:4:41,sigma=0.05:4:40,alpha=-3:1:33")]
    pub grid: String,
    /// `id` or `indicator:a,b`.
    #[arg(long, default_value = "id")]
    pub phi: String,
    /// Control cost on `dα/dt`.
    #[arg(long, default_value_t = 0.5)]
    pub epsilon: f64,
    #[arg(long, default_value_t = 4.0)]
    pub u_max: f64,
    #[arg(long, default_value_t = 21)]
    pub n_controls: usize,
    #[arg(long, default_value_t = 16)]
    pub tsteps: usize,
    /// Mollification levels; without them the lift's first level drives the solver directly.
    #[arg(long, value_delimiter = ',')]
    pub levels: Option<Vec<usize>>,
    /// Value beyond the lower covariance face.
    #[arg(long, default_value_t = roughctrl::control::DEFAULT_PADDING)]
    pub padding: f64,
    /// Report JSON; plot data is written beside it.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
}

type Phi = Box<dyn Fn(f64) -> f64>;

fn phi(spec: &str) -> anyhow::Result<Phi> {
    if spec == "id" {
        return Ok(Box::new(|x| x));
    }
    if let Some(rest) = spec.strip_prefix("indicator:") {
        let (a, b) = parse_interval(rest)?;
        if !(a <= b) {
            return Err(config_error(format!("indicator interval [{a}, {b}] is empty")));
        }
        return Ok(Box::new(move |x| if (a..=b).contains(&x) { 1.0 } else { 0.0 }));
    }
    Err(config_error(format!("unknown φ {spec:?}; expected id or indicator:a,b")))
}

fn scalar_constant(p: &Param, what: &str) -> anyhow::Result<f64> {
    match p {
        Param::Constant(v) if v.len() == 1 => Ok(v[0]),
        _ => Err(config_error(format!("the reduced problem needs a constant scalar {what}"))),
    }
}

pub fn robust(args: RobustArgs, name: &str) -> anyhow::Result<()> {
    let mut mf = Manifest::new(name, &args);
    let model = load_model(&args.reduced, &mut mf)?;
    let obs = load_lift(&args.obs_lift, &mut mf)?;
    let cfg: PenaltyConfig = load_json(&args.spec, &mut mf)?;
    let f = phi(&args.phi)?;
    let (sigma, c) = (scalar_constant(&model.sigma, "σ")?, scalar_constant(&model.c, "c")?);
    if scalar_constant(&model.rho, "ρ")? != 0.0 {
        return Err(config_error("the reduced problem needs ρ = 0"));
    }
    let grid = StateGrid::parse(&args.grid)?;
    if args.tsteps == 0 {
        return Err(config_error("need --tsteps ≥ 1"));
    }
    let ctl = FilterControl::reduced(sigma, c, cfg.to_spec()?, args.epsilon, args.u_max)?;
    let (t0, t1) = full_span(obs.times());
    let times = uniform_grid(t0, t1, args.tsteps);
    let opts = reduced_hjb_options(args.padding);
    let start = Instant::now();
    let (field, cauchy): (ValueField, Option<Value>) = match &args.levels {
        Some(levels) => {
            let (field, report) = filter_value_hjb(&ctl, &obs, levels, &times, &grid, args.n_controls, Some(&opts))?;
            (field, Some(serde_json::to_value(report)?))
        }
        None => (filter_value_hjb_smooth(&ctl, obs.first_level(), &times, &grid, args.n_controls, Some(&opts))?, None),
    };
    let mut kappa_path = Vec::new();
    let mut rows = Vec::new();
    let mut expectations = Vec::new();
    let mut last_kf = None;
    for &t in &times {
        let kf = kappa_field(&field, t)?;
        let e = nonlinear_expectation(&f, &kf, cfg.k1, cfg.k2)?;
        let r = robust_interval(&f, &kf, cfg.k1, cfg.k2)?;
        let point = robust_point_estimate(&kf).unwrap_or(f64::NAN);
        rows.push(vec![t, r.lower, r.upper, point]);
        expectations.push(json!({ "t": t, "expectation": e, "interval": r, "point_estimate": point }));
        kappa_path.push(json!({ "t": t, "values": kf.values, "argmin_alpha": kf.argmin }));
        last_kf = Some(kf);
    }
    let elapsed = start.elapsed().as_secs_f64();
    let kf = last_kf.expect("at least one output time");

    let heat = sibling(&args.out, "kappa.csv");
    write_table(&heat, &header(&["mu", "sigma", "kappa"]), (0..kf.len()).map(|k| {
        let (mu, s) = kf.node(k);
        vec![mu, s, kf.values[k]]
    }))?;
    let intervals = sibling(&args.out, "intervals.csv");
    write_table(&intervals, &header(&["t", "lower", "upper", "point"]), rows)?;
    mf.output(&args.out);
    mf.output(&heat);
    mf.output(&intervals);
    let report = json!({
        "kappa": { "mu_axis": kf.mu, "sigma_axis": kf.sigma, "path": kappa_path },
        "estimates": expectations,
        "cauchy": cauchy,
        "timing_seconds": elapsed,
        "manifest": mf.to_json(),
    });
    write_json(&args.out, &report)?;
    mf.write_beside(&args.out)?;
    let last = expectations.last().cloned().unwrap_or(Value::Null);
    print_result(json!({ "final": last, "timing_seconds": elapsed, "report": args.out }), &mf)
}
