// SPDX-License-Identifier: Apache-2.0

//! Flags, flat `key = value` files and the resolved scenario spec.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::Args;
use num_complex::Complex64;
use serde::{Serialize, Serializer};

use super::{CliError, ScenarioId};
use crate::engines::{CollapseStage, EngineMode};

pub const DEFAULT_TRIALS: u64 = 10_000;
pub const DEFAULT_BOHM_SAMPLES: u64 = 500;
pub const DEFAULT_ENV_BITS: usize = 20;
pub const DEFAULT_MU: f64 = 0.5;
pub const DEFAULT_GRID: usize = 10_000;
pub const DEFAULT_ODDS: f64 = 1.0;
pub const DEFAULT_NAIVE_P: f64 = 0.1;
pub const DEFAULT_DT: f64 = 1e-3;
pub const DEFAULT_T_MAX: f64 = 20.0;
pub const DEFAULT_X_INIT: f64 = -10.5;

/// Every key accepted on the command line and in config files.
const KEYS: [&str; 18] = [
    "scenario",
    "mode",
    "collapse-stage",
    "alpha",
    "beta",
    "mu",
    "trials",
    "seed",
    "env-bits",
    "marker",
    "dt",
    "t-max",
    "x-init",
    "grid",
    "odds",
    "naive-p",
    "out",
    "csv-dir",
];

#[derive(Debug, Clone, Default, Args)]
pub struct RunArgs {
    /// Scenario id (see `list`); may come from the config file instead.
    pub scenario: Option<String>,
    /// mwi | collapse
    #[arg(long)]
    pub mode: Option<String>,
    /// detector | observer
    #[arg(long)]
    pub collapse_stage: Option<String>,
    /// Splitter transmission amplitude, real or complex (`0.6+0.8i`).
    #[arg(long, allow_negative_numbers = true)]
    pub alpha: Option<String>,
    #[arg(long, allow_negative_numbers = true)]
    pub beta: Option<String>,
    /// Measure of existence of my world.
    #[arg(long, allow_negative_numbers = true)]
    pub mu: Option<String>,
    /// Collapse trials, or ensemble size for pilot-wave scenarios.
    #[arg(long, allow_negative_numbers = true)]
    pub trials: Option<String>,
    #[arg(long, allow_negative_numbers = true)]
    pub seed: Option<String>,
    #[arg(long, allow_negative_numbers = true)]
    pub env_bits: Option<String>,
    /// Put each crossing packet in its own marker sector.
    #[arg(long)]
    pub marker: bool,
    #[arg(long, allow_negative_numbers = true)]
    pub dt: Option<String>,
    #[arg(long, allow_negative_numbers = true)]
    pub t_max: Option<String>,
    #[arg(long, allow_negative_numbers = true)]
    pub x_init: Option<String>,
    /// Total number of adversary amplitudes in the steering grid search.
    #[arg(long, allow_negative_numbers = true)]
    pub grid: Option<String>,
    /// Payout per unit stake offered for the bet.
    #[arg(long, allow_negative_numbers = true)]
    pub odds: Option<String>,
    /// Probability of the adversary's outcome without interference.
    #[arg(long, allow_negative_numbers = true)]
    pub naive_p: Option<String>,
    /// Write the report here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Directory for trajectory CSV files.
    #[arg(long)]
    pub csv_dir: Option<PathBuf>,
    /// Flat `key = value` file using the flag names.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScenarioSpec {
    pub scenario: ScenarioId,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mode: Option<EngineMode>,
    #[serde(
        skip_serializing_if = "Option::is_none",
        serialize_with = "complex_opt"
    )]
    pub alpha: Option<Complex64>,
    #[serde(
        skip_serializing_if = "Option::is_none",
        serialize_with = "complex_opt"
    )]
    pub beta: Option<Complex64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mu: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trials: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub env_bits: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub marker: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t_max: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub x_init: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub grid: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub odds: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub naive_probability: Option<f64>,
    pub seed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub csv_dir: Option<PathBuf>,
}

fn complex_opt<S: Serializer>(c: &Option<Complex64>, s: S) -> Result<S::Ok, S::Error> {
    let c = c.expect("skipped when absent");
    [c.re, c.im].serialize(s)
}

impl ScenarioSpec {
    /// Spec with every default resolved.
    pub fn defaults(scenario: ScenarioId) -> Self {
        resolve(BTreeMap::from([(
            "scenario".to_string(),
            scenario.as_str().to_string(),
        )]))
        .expect("defaults are valid")
    }
}

/// Reads a flat `key = value` file; `#` starts a comment, keys use flag names.
pub fn read_config_file(path: &Path) -> Result<BTreeMap<String, String>, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    parse_config_text(&text)
}

pub fn parse_config_text(text: &str) -> Result<BTreeMap<String, String>, CliError> {
    let mut values = BTreeMap::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| CliError::Config(format!("line {}: expected `key = value`", n + 1)))?;
        let key = key.trim().replace('_', "-");
        let value = value.trim().trim_matches('"').to_string();
        if !KEYS.contains(&key.as_str()) {
            return Err(CliError::Config(format!(
                "line {}: unknown key `{key}`",
                n + 1
            )));
        }
        if values.insert(key.clone(), value).is_some() {
            return Err(CliError::Config(format!(
                "line {}: `{key}` given twice",
                n + 1
            )));
        }
    }
    Ok(values)
}

/// Merges the config file (if any) under the flags and resolves defaults.
pub fn parse_config(args: &RunArgs) -> Result<ScenarioSpec, CliError> {
    let mut values = match &args.config {
        Some(path) => read_config_file(path)?,
        None => BTreeMap::new(),
    };
    let flags = [
        ("mode", args.mode.clone()),
        ("collapse-stage", args.collapse_stage.clone()),
        ("alpha", args.alpha.clone()),
        ("beta", args.beta.clone()),
        ("mu", args.mu.clone()),
        ("trials", args.trials.clone()),
        ("seed", args.seed.clone()),
        ("env-bits", args.env_bits.clone()),
        ("marker", args.marker.then(|| "true".to_string())),
        ("dt", args.dt.clone()),
        ("t-max", args.t_max.clone()),
        ("x-init", args.x_init.clone()),
        ("grid", args.grid.clone()),
        ("odds", args.odds.clone()),
        ("naive-p", args.naive_p.clone()),
        ("out", args.out.as_ref().map(|p| p.display().to_string())),
        (
            "csv-dir",
            args.csv_dir.as_ref().map(|p| p.display().to_string()),
        ),
    ];
    for (key, value) in flags {
        if let Some(value) = value {
            values.insert(key.to_string(), value);
        }
    }
    if let Some(name) = &args.scenario {
        match values.get("scenario") {
            Some(from_file) if from_file != name => {
                return Err(CliError::Conflict(format!(
                    "scenario `{name}` on the command line, `{from_file}` in the config file"
                )))
            }
            _ => {
                values.insert("scenario".into(), name.clone());
            }
        }
    }
    resolve(values)
}

fn parse<T: FromStr>(values: &BTreeMap<String, String>, key: &str) -> Result<Option<T>, CliError> {
    values
        .get(key)
        .map(|v| {
            v.parse::<T>()
                .map_err(|_| CliError::InvalidParameter(format!("{key} = `{v}` is not valid")))
        })
        .transpose()
}

fn invalid(msg: String) -> CliError {
    CliError::InvalidParameter(msg)
}

fn finite(key: &str, v: f64) -> Result<f64, CliError> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(invalid(format!("{key} must be finite")))
    }
}

fn count(values: &BTreeMap<String, String>, key: &str, min: i64) -> Result<Option<u64>, CliError> {
    match parse::<i64>(values, key)? {
        Some(n) if n < min => Err(invalid(format!("{key} must be at least {min}, got {n}"))),
        other => Ok(other.map(|n| n as u64)),
    }
}

fn allowed_keys(id: ScenarioId) -> Vec<&'static str> {
    let mut keys = vec!["scenario", "seed", "out"];
    if id.is_interferometer() || id == ScenarioId::Undo {
        keys.extend(["mode", "collapse-stage", "trials"]);
    }
    if matches!(id, ScenarioId::Fig1Splitter | ScenarioId::Undo) {
        keys.extend(["alpha", "beta"]);
    }
    match id {
        ScenarioId::Steering => keys.extend(["mu", "grid"]),
        ScenarioId::Bet => keys.extend(["mu", "odds", "naive-p"]),
        ScenarioId::Decoherence => keys.push("env-bits"),
        id if id.is_bohm() => keys.extend(["trials", "marker", "dt", "t-max", "x-init", "csv-dir"]),
        _ => {}
    }
    keys
}

fn splitter_pair(
    alpha: Option<Complex64>,
    beta: Option<Complex64>,
) -> Result<(Complex64, Complex64), CliError> {
    let complete = |known: Complex64| -> Result<Complex64, CliError> {
        let rest = 1.0 - known.norm_sqr();
        if rest < -1e-9 {
            return Err(invalid(format!("|{known}|² exceeds 1")));
        }
        Ok(Complex64::new(rest.max(0.0).sqrt(), 0.0))
    };
    let (a, b) = match (alpha, beta) {
        (None, None) => {
            let h = Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
            return Ok((h, h));
        }
        (Some(a), None) => (a, complete(a)?),
        (None, Some(b)) => (complete(b)?, b),
        (Some(a), Some(b)) => (a, b),
    };
    let norm = (a.norm_sqr() + b.norm_sqr()).sqrt();
    if !(norm.is_finite() && norm > 0.0) {
        return Err(invalid("alpha and beta cannot both vanish".into()));
    }
    Ok((a / norm, b / norm))
}

fn engine_mode(values: &BTreeMap<String, String>) -> Result<EngineMode, CliError> {
    let stage = match values.get("collapse-stage").map(String::as_str) {
        None => None,
        Some("detector" | "after-detector" | "after_detector") => {
            Some(CollapseStage::AfterDetector)
        }
        Some("observer" | "after-observer" | "after_observer") => {
            Some(CollapseStage::AfterObserver)
        }
        Some(other) => return Err(invalid(format!("collapse-stage `{other}`"))),
    };
    match values.get("mode").map(String::as_str) {
        None | Some("mwi") => match stage {
            Some(_) => Err(CliError::Conflict(
                "collapse-stage needs --mode collapse".into(),
            )),
            None => Ok(EngineMode::Mwi),
        },
        Some("collapse") => Ok(EngineMode::Collapse(
            stage.unwrap_or(CollapseStage::AfterDetector),
        )),
        Some(other) => Err(invalid(format!("mode `{other}`"))),
    }
}

pub(crate) fn resolve(values: BTreeMap<String, String>) -> Result<ScenarioSpec, CliError> {
    let id: ScenarioId = values
        .get("scenario")
        .ok_or_else(|| invalid("no scenario given".into()))?
        .parse()?;
    let allowed = allowed_keys(id);
    if let Some(key) = values.keys().find(|k| !allowed.contains(&k.as_str())) {
        return Err(CliError::Conflict(format!(
            "`{key}` does not apply to {id}"
        )));
    }
    let mut spec = ScenarioSpec {
        scenario: id,
        mode: None,
        alpha: None,
        beta: None,
        mu: None,
        trials: None,
        env_bits: None,
        marker: None,
        dt: None,
        t_max: None,
        x_init: None,
        grid: None,
        odds: None,
        naive_probability: None,
        seed: count(&values, "seed", 0)?.unwrap_or(0),
        out: values.get("out").map(PathBuf::from),
        csv_dir: values.get("csv-dir").map(PathBuf::from),
    };

    if id.is_interferometer() || id == ScenarioId::Undo {
        let mode = engine_mode(&values)?;
        let trials = count(&values, "trials", 1)?;
        spec.trials = match (mode, trials) {
            (EngineMode::Mwi, Some(_)) => {
                return Err(CliError::Conflict(
                    "trials only apply to --mode collapse".into(),
                ))
            }
            (EngineMode::Mwi, None) => None,
            (EngineMode::Collapse(_), t) => Some(t.unwrap_or(DEFAULT_TRIALS)),
        };
        spec.mode = Some(mode);
    }
    if matches!(id, ScenarioId::Fig1Splitter | ScenarioId::Undo) {
        let (a, b) = splitter_pair(parse(&values, "alpha")?, parse(&values, "beta")?)?;
        spec.alpha = Some(a);
        spec.beta = Some(b);
    }
    if matches!(id, ScenarioId::Steering | ScenarioId::Bet) {
        let mu = finite("mu", parse(&values, "mu")?.unwrap_or(DEFAULT_MU))?;
        if !(mu > 0.0 && mu <= 1.0) {
            return Err(invalid(format!("mu must lie in (0, 1], got {mu}")));
        }
        spec.mu = Some(mu);
    }
    if id == ScenarioId::Steering {
        let grid = count(&values, "grid", 100)?.map_or(DEFAULT_GRID, |g| g as usize);
        spec.grid = Some(grid);
    }
    if id == ScenarioId::Bet {
        let odds = finite("odds", parse(&values, "odds")?.unwrap_or(DEFAULT_ODDS))?;
        if odds <= 0.0 {
            return Err(invalid(format!("odds must be positive, got {odds}")));
        }
        let p = finite(
            "naive-p",
            parse(&values, "naive-p")?.unwrap_or(DEFAULT_NAIVE_P),
        )?;
        if !(0.0..=1.0).contains(&p) {
            return Err(invalid(format!("naive-p must lie in [0, 1], got {p}")));
        }
        spec.odds = Some(odds);
        spec.naive_probability = Some(p);
    }
    if id == ScenarioId::Decoherence {
        spec.env_bits =
            Some(count(&values, "env-bits", 0)?.map_or(DEFAULT_ENV_BITS, |k| k as usize));
    }
    if id.is_bohm() {
        let marker: Option<bool> = parse(&values, "marker")?;
        spec.marker = Some(match (id, marker) {
            (ScenarioId::BohmBubble, Some(false)) => {
                return Err(CliError::Conflict(
                    "bohm_bubble always carries markers".into(),
                ))
            }
            (ScenarioId::BohmBubble, _) => true,
            (_, m) => m.unwrap_or(false),
        });
        spec.trials = Some(count(&values, "trials", 1)?.unwrap_or(DEFAULT_BOHM_SAMPLES));
        let dt = finite("dt", parse(&values, "dt")?.unwrap_or(DEFAULT_DT))?;
        let t_max = finite("t-max", parse(&values, "t-max")?.unwrap_or(DEFAULT_T_MAX))?;
        let x_init = finite(
            "x-init",
            parse(&values, "x-init")?.unwrap_or(DEFAULT_X_INIT),
        )?;
        if dt <= 0.0 {
            return Err(invalid(format!("dt must be positive, got {dt}")));
        }
        if t_max <= 0.0 {
            return Err(invalid(format!("t-max must be positive, got {t_max}")));
        }
        if x_init == 0.0 {
            return Err(invalid("x-init must not be the crossing point 0".into()));
        }
        spec.dt = Some(dt);
        spec.t_max = Some(t_max);
        spec.x_init = Some(x_init);
    }
    Ok(spec)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn args(scenario: &str) -> RunArgs {
        RunArgs {
            scenario: Some(scenario.into()),
            ..RunArgs::default()
        }
    }

    #[test]
    fn undo_flags_resolve_and_normalize() {
        let mut a = args("undo");
        a.alpha = Some("0.7071".into());
        a.beta = Some("0.7071".into());
        a.mode = Some("mwi".into());
        let spec = parse_config(&a).unwrap();
        assert_eq!(spec.mode, Some(EngineMode::Mwi));
        assert!((spec.alpha.unwrap().re - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-15);
        assert_eq!(spec.seed, 0);
        assert_eq!(spec.trials, None);
    }

    #[test]
    fn steering_default_grid() {
        let mut a = args("steering");
        a.mu = Some("0.9".into());
        let spec = parse_config(&a).unwrap();
        assert_eq!(spec.grid, Some(10_000));
        assert_eq!(spec.mu, Some(0.9));
    }

    #[test]
    fn negative_trials_in_file() {
        let values = parse_config_text("scenario = undo\nmode = collapse\ntrials = -1\n").unwrap();
        assert!(matches!(
            resolve(values),
            Err(CliError::InvalidParameter(_))
        ));
    }

    #[test]
    fn unknown_keys_and_conflicts() {
        assert!(matches!(
            parse_config_text("speed = 3"),
            Err(CliError::Config(_))
        ));
        assert!(matches!(
            parse_config_text("no equals sign"),
            Err(CliError::Config(_))
        ));
        let mut a = args("fig3_interferometer");
        a.collapse_stage = Some("observer".into());
        assert!(matches!(parse_config(&a), Err(CliError::Conflict(_))));
        let mut a = args("fig3_interferometer");
        a.mu = Some("0.3".into());
        assert!(matches!(parse_config(&a), Err(CliError::Conflict(_))));
        assert!(matches!(
            parse_config(&args("fig5")),
            Err(CliError::UnknownScenario(_))
        ));
    }

    #[test]
    fn flags_override_file_values() {
        let file = tempfile::NamedTempFile::new().unwrap();
        std::fs::write(file.path(), "scenario = steering\nmu = 0.3\ngrid = 400\n").unwrap();
        let a = RunArgs {
            mu: Some("0.8".into()),
            config: Some(file.path().to_path_buf()),
            ..RunArgs::default()
        };
        let spec = parse_config(&a).unwrap();
        assert_eq!((spec.mu, spec.grid), (Some(0.8), Some(400)));
        let mut clash = a.clone();
        clash.scenario = Some("bet".into());
        assert!(matches!(parse_config(&clash), Err(CliError::Conflict(_))));
    }
}
