use std::path::{Path, PathBuf};

use clap::Args;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use roughctrl::control::*;
use roughctrl::paths::{uniform_grid, SampledPath};
use roughctrl::rough::{brownian_path, lift_piecewise_linear, RoughPath};

use crate::dynamics::DynamicsSource;
use crate::manifest::*;

/// Problem file for `hjb --problem custom.json`.
///
/// Running cost `ε|u|² + ½ q|x|²`, terminal cost `c·x + ½ w|x|²`.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemConfig {
    pub dynamics: DynamicsSource,
    pub controls: ControlSet,
    #[serde(default)]
    pub control_cost: f64,
    #[serde(default)]
    pub state_cost: f64,
    #[serde(default)]
    pub terminal_linear: Vec<f64>,
    #[serde(default)]
    pub terminal_quadratic: f64,
}

impl ProblemConfig {
    fn build(&self, m: &mut Manifest) -> anyhow::Result<ControlProblem> {
        let dynamics = self.dynamics.build(m)?;
        let n = dynamics.state_dim();
        if self.controls.dim() != dynamics.control_dim() {
            return Err(config_error(format!("control set has dimension {}, dynamics needs {}", self.controls.dim(), dynamics.control_dim())));
        }
        let lin = match self.terminal_linear.len() {
            0 => vec![0.0; n],
            k if k == n => self.terminal_linear.clone(),
            k => return Err(config_error(format!("terminal_linear needs {n} entries, got {k}"))),
        };
        let (eps, q, w) = (self.control_cost, self.state_cost, self.terminal_quadratic);
        let sq = |v: &[f64]| v.iter().map(|a| a * a).sum::<f64>();
        Ok(ControlProblem::new(dynamics, self.controls.clone())
            .with_running_cost(move |x, _, u| eps * sq(u) + 0.5 * q * sq(x))
            .with_terminal_cost(move |x, _| x.iter().zip(&lin).map(|(a, b)| a * b).sum::<f64>() + 0.5 * w * sq(x)))
    }
}

#[derive(Args, Serialize, Deserialize)]
pub struct HjbArgs {
    /// `insider` or a problem JSON file.
    #[arg(long, default_value = "insider")]
    pub problem: String,
    /// Driver lift; a Brownian lift from `--seed/--steps/--horizon` if omitted.
    #[arg(long)]
    pub lift: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 512)]
    pub steps: usize,
    #[arg(long, default_value_t = 1.0)]
    pub horizon: f64,
    /// Mollification levels, coarse to fine.
    #[arg(long, value_delimiter = ',', default_value = "64,128,256")]
    pub levels: Vec<usize>,
    #[arg(long, default_value = "x=-3:3:61,a=-2:2:41")]
    pub grid: String,
    /// Output time steps over the driver's horizon.
    #[arg(long, default_value_t = 400)]
    pub tsteps: usize,
    /// Insider trading cost.
    #[arg(long, default_value_t = 0.5)]
    pub epsilon: f64,
    #[arg(long, default_value_t = 5.0)]
    pub u_max: f64,
    #[arg(long, default_value_t = 201)]
    pub n_controls: usize,
    /// Nodes excluded at each face when comparing.
    #[arg(long, default_value_t = 1)]
    pub margin: usize,
    /// State at which the value is reported.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, default_value = "0,0")]
    pub probe: Vec<f64>,
    /// Write every n-th output time to the field file (the last is always written).
    #[arg(long, default_value_t = 1)]
    pub write_every: usize,
    /// Field CSV: `t, coordinates..., value, u*`.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
}

fn driver(lift: &Option<PathBuf>, seed: u64, steps: usize, horizon: f64, m: &mut Manifest) -> anyhow::Result<RoughPath> {
    match lift {
        Some(p) => load_lift(p, m),
        None if steps > 0 && horizon > 0.0 => Ok(lift_piecewise_linear(&brownian_path(seed, steps, horizon, 1))),
        None => Err(config_error("need --steps ≥ 1 and --horizon > 0")),
    }
}

fn write_field(path: &Path, field: &ValueField, every: usize) -> anyhow::Result<()> {
    let mut names = vec!["t".to_string()];
    names.extend(field.grid.axes.iter().map(|a| a.name.clone()));
    names.push("value".into());
    let j = field.controls.first().map_or(0, Vec::len);
    if j == 1 {
        names.push("u".into());
    } else {
        names.extend((1..=j).map(|i| format!("u{i}")));
    }
    let nt = field.times.len();
    let ks: Vec<usize> = (0..nt).filter(|k| k % every == 0 || *k == nt - 1).collect();
    let rows = ks.into_iter().flat_map(|k| {
        (0..field.n_nodes()).map(move |node| {
            let mut row = vec![field.times[k]];
            row.extend(field.grid.coords(node));
            row.push(field.value(k, node));
            row.extend_from_slice(field.policy(k, node));
            row
        })
    });
    write_table(path, &names, rows)
}

/// Sup error against the insider closed form over interior nodes at output times on `eta`'s grid.
fn insider_comparison(field: &ValueField, eta: &SampledPath, eps: f64, margin: usize) -> anyhow::Result<(f64, f64)> {
    let (mut err, mut scale) = (0.0f64, 0.0f64);
    for (k, &t) in field.times.iter().enumerate() {
        if eta.index_of(t).is_err() {
            continue;
        }
        for node in 0..field.n_nodes() {
            if !field.grid.is_interior(node, margin) {
                continue;
            }
            let c = field.grid.coords(node);
            let exact = -insider_value_closed_form(eta, eps, t, c[0], c[1])?;
            err = err.max((field.value(k, node) - exact).abs());
            scale = scale.max(exact.abs());
        }
    }
    Ok((err, scale))
}

pub fn hjb(args: HjbArgs, name: &str) -> anyhow::Result<()> {
    let mut m = Manifest::new(name, &args);
    let insider = args.problem == "insider";
    let prob = if insider {
        if !(args.epsilon > 0.0) || args.n_controls < 2 {
            return Err(config_error("insider problem needs --epsilon > 0 and --n-controls ≥ 2"));
        }
        insider_problem(args.epsilon, args.u_max, args.n_controls)
    } else {
        let cfg: ProblemConfig = load_json(Path::new(&args.problem), &mut m)?;
        cfg.build(&mut m)?
    };
    let grid = StateGrid::parse(&args.grid)?;
    if insider && grid.dim() != 2 {
        return Err(config_error("the insider problem lives on a grid `x=...,a=...`"));
    }
    if args.probe.len() != grid.dim() || args.write_every == 0 || args.tsteps == 0 {
        return Err(config_error(format!("need a probe with {} coordinates, --write-every ≥ 1 and --tsteps ≥ 1", grid.dim())));
    }
    let rp = driver(&args.lift, args.seed, args.steps, args.horizon, &mut m)?;
    let (t0, t1) = full_span(rp.times());
    let times = uniform_grid(t0, t1, args.tsteps);
    let (field, report) = solve_rough_hjb(&prob, &rp, &args.levels, &times, &grid, &HjbOptions::default(), args.margin)?;
    write_field(&args.out, &field, args.write_every)?;
    m.output(&args.out);

    let conv = sibling(&args.out, "convergence.csv");
    write_table(&conv, &header(&["level", "sup_diff"]), report.levels.iter().skip(1).zip(&report.sup_diffs).map(|(l, d)| vec![*l as f64, *d]))?;
    m.output(&conv);

    let finest = *args.levels.last().expect("levels is non-empty");
    let eta = rp.mollify(finest)?.first_level().clone();
    let axis = &grid.axes[0];
    let slice_rows: Vec<Vec<f64>> = axis
        .points()
        .into_iter()
        .map(|x| {
            let mut p = args.probe.clone();
            p[0] = x;
            let mut row = vec![x, field.interpolate(0, &p)];
            if insider {
                row.push(-insider_value_closed_form(&eta, args.epsilon, t0, p[0], p[1]).unwrap_or(f64::NAN));
            }
            row
        })
        .collect();
    let slice = sibling(&args.out, "slice.csv");
    let mut slice_header = vec![axis.name.clone(), "value".into()];
    if insider {
        slice_header.push("oracle".into());
    }
    write_table(&slice, &slice_header, slice_rows)?;
    m.output(&slice);
    m.write_beside(&args.out)?;

    let grid_value = field.interpolate(0, &args.probe);
    let mut result = json!({
        "probe": args.probe,
        "grid_value": grid_value,
        "cauchy": report,
        "interior_sup": field.interior_sup(args.margin),
    });
    if insider {
        let oracle = -insider_value_closed_form(&eta, args.epsilon, t0, args.probe[0], args.probe[1])?;
        let (err, scale) = insider_comparison(&field, &eta, args.epsilon, args.margin)?;
        result["oracle_value"] = json!(oracle);
        result["probe_relative_error"] = json!((grid_value - oracle).abs() / oracle.abs().max(f64::MIN_POSITIVE));
        result["relative_error"] = json!(err / scale);
    }
    print_result(result, &m)
}

#[derive(Args, Serialize, Deserialize)]
pub struct InsiderOracleArgs {
    /// Price path CSV.
    #[arg(long)]
    pub path: PathBuf,
    #[arg(long)]
    pub epsilon: f64,
    #[arg(long, default_value_t = 0.0)]
    pub t: f64,
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    pub x: f64,
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    pub a: f64,
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
}

pub fn insider_oracle(args: InsiderOracleArgs, name: &str) -> anyhow::Result<()> {
    let mut m = Manifest::new(name, &args);
    let zeta = load_path(&args.path, &mut m)?;
    let value = insider_value_closed_form(&zeta, args.epsilon, args.t, args.x, args.a)?;
    let rate = insider_optimal_rate(&zeta, args.epsilon, args.t)?;
    print_result(json!({ "value": value, "optimal_rate": rate }), &m)
}

#[derive(Args, Serialize, Deserialize)]
pub struct DegeneracyArgs {
    /// Frequencies `k` of the drivers `sin(ks)` on `[0, 2π]`.
    #[arg(long, value_delimiter = ',', default_value = "1,2,4,8")]
    pub freqs: Vec<f64>,
    #[arg(long, default_value_t = 1.0)]
    pub epsilon: f64,
    #[arg(long, default_value_t = 10_000)]
    pub nodes: usize,
    /// Brownian path refined through `--refinements` (each must divide the finest).
    #[arg(long, default_value_t = 77)]
    pub seed: u64,
    #[arg(long, value_delimiter = ',', default_value = "64,128,256,512,1024,2048,4096")]
    pub refinements: Vec<usize>,
    /// Report JSON; plot data is written beside it.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
}

pub fn degeneracy(args: DegeneracyArgs, name: &str) -> anyhow::Result<()> {
    let mut m = Manifest::new(name, &args);
    if args.nodes == 0 || args.refinements.is_empty() {
        return Err(config_error("need --nodes ≥ 1 and at least one refinement"));
    }
    let t = uniform_grid(0.0, 2.0 * std::f64::consts::PI, args.nodes);
    let mut smooth = Vec::new();
    for &k in &args.freqs {
        let eta = SampledPath::from_fn(t.clone(), 1, |s| vec![(k * s).sin()])?;
        let (v, _) = degeneracy_demo(&eta, args.epsilon, 0.0, 0.0, VariationMode::Smooth)?;
        smooth.push(json!({ "k": k, "value": v, "expected": 4.0 * k * args.epsilon }));
    }
    let finest = *args.refinements.iter().max().expect("non-empty");
    if args.refinements.iter().any(|&n| n == 0 || !finest.is_multiple_of(n)) {
        return Err(config_error("every refinement must divide the finest one"));
    }
    let fine = brownian_path(args.seed, finest, 1.0, 1);
    let mut refined = Vec::new();
    for &n in &args.refinements {
        let eta = fine.subsample(finest / n);
        let (unreg, _) = degeneracy_demo(&eta, args.epsilon, 0.0, 0.0, VariationMode::PiecewiseLinear)?;
        let reg = insider_value_closed_form(&eta, args.epsilon, 0.0, 0.0, 0.0)?;
        refined.push(vec![n as f64, unreg, reg]);
    }
    let monotone = refined.windows(2).all(|w| w[1][1] > w[0][1]);
    let result = json!({
        "smooth": smooth,
        "refinements": refined.iter().map(|r| json!({ "steps": r[0], "unregularised": r[1], "regularised": r[2] })).collect::<Vec<Value>>(),
        "unregularised_monotone": monotone,
    });
    if let Some(out) = &args.out {
        let a = sibling(out, "smooth.csv");
        let rows = smooth.iter().map(|s| vec![s["k"].as_f64().unwrap_or(f64::NAN), s["value"].as_f64().unwrap_or(f64::NAN)]);
        write_table(&a, &header(&["k", "value"]), rows)?;
        let b = sibling(out, "refinements.csv");
        write_table(&b, &header(&["steps", "unregularised", "regularised"]), refined.clone())?;
        m.output(out);
        m.output(&a);
        m.output(&b);
        let mut doc = result.clone();
        doc["manifest"] = m.to_json();
        write_json(out, &doc)?;
        m.write_beside(out)?;
    }
    print_result(result, &m)
}
