//! Configuration merging, run manifests and artifact writers.

use std::fmt;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::Context as _;
use clap::parser::ValueSource;
use clap::ArgMatches;
use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::{json, Value};

use roughctrl::io::{fmt_f64, read_lift_json, read_path_csv};
use roughctrl::paths::SampledPath;
use roughctrl::rough::RoughPath;

/// Invalid configuration: exit status 2.
#[derive(Debug)]
pub struct ConfigError(pub String);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

/// A check that ran and failed: exit status 1.
#[derive(Debug)]
pub struct Failure(pub String);

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Failure {}

pub fn config_error(msg: impl Into<String>) -> anyhow::Error {
    ConfigError(msg.into()).into()
}

/// Applies `--config` to parsed arguments; flags set on the command line win.
pub fn resolve<T: Serialize + DeserializeOwned>(args: T, matches: &ArgMatches, command: &str) -> anyhow::Result<T> {
    let Some(file) = matches.get_one::<PathBuf>("config") else {
        return Ok(args);
    };
    let text = std::fs::read_to_string(file).with_context(|| format!("cannot read config {}", file.display()))?;
    let doc: Value = serde_json::from_str(&text).with_context(|| format!("config {} is not valid JSON", file.display()))?;
    if let Some(cmd) = doc.get("command").and_then(Value::as_str) {
        if cmd != command {
            return Err(config_error(format!("config {} is for `{cmd}`, not `{command}`", file.display())));
        }
    }
    let given = doc.get("args").unwrap_or(&doc).as_object().ok_or_else(|| config_error("config arguments must be a JSON object"))?;
    let mut merged = serde_json::to_value(&args)?;
    let fields = merged.as_object_mut().expect("argument structs serialize to objects");
    for (key, value) in given {
        if !fields.contains_key(key) {
            return Err(config_error(format!("unknown key `{key}` in config {}", file.display())));
        }
        if matches.value_source(key) != Some(ValueSource::CommandLine) {
            fields.insert(key.clone(), value.clone());
        }
    }
    serde_json::from_value(merged).map_err(|e| config_error(format!("config {}: {e}", file.display())))
}

/// Record of one run: enough to repeat it with `--config`.
pub struct Manifest {
    command: String,
    args: Value,
    inputs: Vec<String>,
    outputs: Vec<String>,
}

impl Manifest {
    pub fn new(command: &str, args: &impl Serialize) -> Self {
        Manifest {
            command: command.to_string(),
            args: serde_json::to_value(args).expect("arguments serialize"),
            inputs: Vec::new(),
            outputs: Vec::new(),
        }
    }

    pub fn input(&mut self, p: &Path) {
        self.inputs.push(p.display().to_string());
    }

    pub fn output(&mut self, p: &Path) {
        self.outputs.push(p.display().to_string());
    }

    pub fn to_json(&self) -> Value {
        json!({
            "command": self.command,
            "version": concat!("roughctrl ", env!("CARGO_PKG_VERSION")),
            "args": self.args,
            "inputs": self.inputs,
            "outputs": self.outputs,
        })
    }

    /// Writes `<primary>.manifest.json`.
    pub fn write_beside(&self, primary: &Path) -> anyhow::Result<()> {
        write_json(&sibling(primary, "manifest.json"), &self.to_json())
    }
}

/// `dir/name.csv` → `dir/name.csv.<suffix>`.
pub fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".");
    s.push(suffix);
    PathBuf::from(s)
}

pub fn write_json(path: &Path, value: &Value) -> anyhow::Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text).with_context(|| format!("cannot write {}", path.display()))
}

/// Prints a result object with the manifest attached.
pub fn print_result(mut result: Value, manifest: &Manifest) -> anyhow::Result<()> {
    use std::io::Write as _;
    result["manifest"] = manifest.to_json();
    let text = serde_json::to_string_pretty(&result)?;
    match writeln!(std::io::stdout().lock(), "{text}") {
        Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(e.into()),
        _ => Ok(()),
    }
}

/// CSV with a header row and 17-significant-digit floats.
pub fn write_table(path: &Path, header: &[String], rows: impl IntoIterator<Item = Vec<f64>>) -> anyhow::Result<()> {
    let mut out = header.join(",");
    out.push('\n');
    for row in rows {
        for (k, v) in row.iter().enumerate() {
            if k > 0 {
                out.push(',');
            }
            let _ = write!(out, "{}", fmt_f64(*v));
        }
        out.push('\n');
    }
    std::fs::write(path, out).with_context(|| format!("cannot write {}", path.display()))
}

pub fn header(names: &[&str]) -> Vec<String> {
    names.iter().map(|s| s.to_string()).collect()
}

fn require_file(path: &Path) -> anyhow::Result<()> {
    if !path.is_file() {
        return Err(config_error(format!("input file not found: {}", path.display())));
    }
    Ok(())
}

pub fn load_path(path: &Path, manifest: &mut Manifest) -> anyhow::Result<SampledPath> {
    require_file(path)?;
    manifest.input(path);
    read_path_csv(path).with_context(|| format!("reading {}", path.display()))
}

pub fn load_lift(path: &Path, manifest: &mut Manifest) -> anyhow::Result<RoughPath> {
    require_file(path)?;
    manifest.input(path);
    read_lift_json(path).with_context(|| format!("reading {}", path.display()))
}

pub fn load_json<T: DeserializeOwned>(path: &Path, manifest: &mut Manifest) -> anyhow::Result<T> {
    require_file(path)?;
    manifest.input(path);
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

/// Parses `"s,t"`.
pub fn parse_interval(spec: &str) -> anyhow::Result<(f64, f64)> {
    let parts: Vec<&str> = spec.split(',').map(str::trim).collect();
    match parts.as_slice() {
        [s, t] => Ok((s.parse().map_err(|_| config_error(format!("bad interval start {s:?}")))?, t.parse().map_err(|_| config_error(format!("bad interval end {t:?}")))?)),
        _ => Err(config_error(format!("interval must be `s,t`, got {spec:?}"))),
    }
}

pub fn full_span(times: &[f64]) -> (f64, f64) {
    (times[0], *times.last().expect("non-empty grid"))
}
