// SPDX-License-Identifier: Apache-2.0

use std::collections::BTreeMap;
use std::fs::File;
use std::io::BufWriter;
use std::path::PathBuf;
use std::time::Instant;

use num_complex::Complex64;
use serde::Serialize;
use serde_json::{json, Value};

use super::{CliError, ScenarioId, ScenarioSpec, FORMAT_VERSION};
use crate::bohm::{
    collision_state, crossing_scenario_with, density_overlap, ensemble, integrate_trajectory,
    ks_distance, sample_initial, write_csv, CollisionGeometry, GaussianPacket,
};
use crate::circuit::names::*;
use crate::engines::{
    assess_bet, decoherence_profile, frequencies, record_experiments, steering_experiment,
    steering_range, steering_range_split, undo_exact, undo_experiment, undo_setup, EngineMode,
    FrequencyReport, RecordBasis,
};
use crate::experiments::{
    fig1_splitter, fig2_arrangements, fig3_interferometer, fig4_absorber, fig4_open, spin_memory,
    Arm, Experiment,
};
use crate::statevec::State;
use crate::worlds::{track, TreeSummary, WorldBasisSpec};

#[derive(Debug, Clone, Serialize)]
pub struct ScenarioReport {
    pub tool: &'static str,
    pub version: &'static str,
    pub format_version: u32,
    pub spec: ScenarioSpec,
    pub results: Value,
    /// Sidecar files written by this run.
    pub files: Vec<String>,
    pub wall_clock_seconds: f64,
}

impl ScenarioReport {
    pub fn to_json(&self) -> String {
        let mut text = serde_json::to_string_pretty(self).expect("reports serialize");
        text.push('\n');
        text
    }
}

#[derive(Debug, Clone, Serialize)]
struct AmplitudeRecord {
    configuration: String,
    re: f64,
    im: f64,
}

#[derive(Debug, Clone, Serialize)]
struct CircuitOutcome {
    /// Many-worlds measures of the final readouts.
    probabilities: BTreeMap<String, f64>,
    final_amplitudes: Vec<AmplitudeRecord>,
    world_tree: TreeSummary,
    #[serde(skip_serializing_if = "Option::is_none")]
    frequencies: Option<FrequencyReport>,
}

/// Rounding can leave a sum of measures a few ulps above 1.
fn probability(p: f64) -> f64 {
    p.clamp(0.0, 1.0)
}

fn readout(state: &State) -> Result<BTreeMap<String, f64>, CliError> {
    let mut probabilities = BTreeMap::new();
    for (key, sub, sym) in [
        ("D1", D1, TRIGGERED),
        ("D2", D2, TRIGGERED),
        ("escaped", NEUTRON, ESCAPED),
        ("absorbed", NEUTRON, ABSORBED),
    ] {
        probabilities.insert(key.to_string(), probability(state.probability(sub, sym)?));
    }
    Ok(probabilities)
}

fn amplitudes(state: &State) -> Vec<AmplitudeRecord> {
    state
        .terms()
        .into_iter()
        .map(|(configuration, a)| AmplitudeRecord {
            configuration,
            re: a.re,
            im: a.im,
        })
        .collect()
}

fn tracked(e: &Experiment) -> Result<TreeSummary, CliError> {
    Ok(track(&e.circuit, &e.initial, &WorldBasisSpec::all())?.summary())
}

fn circuit_outcome(e: &Experiment, spec: &ScenarioSpec) -> Result<CircuitOutcome, CliError> {
    let tree = track(&e.circuit, &e.initial, &WorldBasisSpec::all())?;
    let mode = spec.mode.unwrap_or(EngineMode::Mwi);
    let frequencies = match mode {
        EngineMode::Mwi => None,
        EngineMode::Collapse(_) => Some(frequencies(
            &e.circuit,
            &e.initial,
            mode,
            spec.trials.unwrap_or(1),
            spec.seed,
        )?),
    };
    Ok(CircuitOutcome {
        probabilities: readout(tree.final_state())?,
        final_amplitudes: amplitudes(tree.final_state()),
        world_tree: tree.summary(),
        frequencies,
    })
}

fn to_value<T: Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("results serialize")
}

fn pair(c: Complex64) -> [f64; 2] {
    [c.re, c.im]
}

fn run_interferometer(spec: &ScenarioSpec) -> Result<Value, CliError> {
    let single =
        |e: Experiment| -> Result<Value, CliError> { Ok(to_value(&circuit_outcome(&e, spec)?)) };
    match spec.scenario {
        ScenarioId::Fig1Splitter => single(fig1_splitter(
            spec.alpha.expect("resolved"),
            spec.beta.expect("resolved"),
        )?),
        ScenarioId::Fig2Arrangements => single(fig2_arrangements()?),
        ScenarioId::Fig3Interferometer => single(fig3_interferometer()?),
        ScenarioId::Fig4Open => single(fig4_open()?),
        ScenarioId::Fig4Absorber => Ok(json!({
            "screen_on_M1": to_value(&circuit_outcome(&fig4_absorber(Arm::M1)?, spec)?),
            "screen_on_M2": to_value(&circuit_outcome(&fig4_absorber(Arm::M2)?, spec)?),
        })),
        ScenarioId::SpinMemory => Ok(json!({
            "marker_kept": to_value(&circuit_outcome(&spin_memory(false)?, spec)?),
            "marker_erased": to_value(&circuit_outcome(&spin_memory(true)?, spec)?),
        })),
        _ => unreachable!("not an interferometer scenario"),
    }
}

fn run_undo(spec: &ScenarioSpec) -> Result<Value, CliError> {
    let (alpha, beta) = (spec.alpha.expect("resolved"), spec.beta.expect("resolved"));
    let mode = spec.mode.expect("resolved");
    let measured = undo_experiment(alpha, beta, mode, spec.trials.unwrap_or(0), spec.seed)?;
    let setup = undo_setup(alpha, beta)?;
    Ok(json!({
        "source_return_probability": probability(measured),
        "exact_source_return_probability": probability(undo_exact(alpha, beta, mode)?),
        "world_tree": to_value(&tracked(&setup)?),
    }))
}

fn run_steering(spec: &ScenarioSpec) -> Result<Value, CliError> {
    let mu = spec.mu.expect("resolved");
    let analysis = steering_range(mu, spec.grid.expect("resolved"))?;
    let h = Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
    let worst = steering_experiment(mu, analysis.argmin, h, h)?;
    let best = steering_experiment(mu, analysis.argmax, h, h)?;
    Ok(json!({
        "analysis": to_value(&analysis),
        "tracked_p_min": probability(worst.circuit.apply(&worst.initial)?.probability(D2, TRIGGERED)?),
        "tracked_p_max": probability(best.circuit.apply(&best.initial)?.probability(D2, TRIGGERED)?),
        "argmin_world_tree": to_value(&tracked(&worst)?),
    }))
}

fn run_bet(spec: &ScenarioSpec) -> Result<Value, CliError> {
    let (mu, odds, p) = (
        spec.mu.expect("resolved"),
        spec.odds.expect("resolved"),
        spec.naive_probability.expect("resolved"),
    );
    let assessment = assess_bet(mu, odds, p)?;
    let alpha = Complex64::new(p.sqrt(), 0.0);
    let beta = Complex64::new((1.0 - p).sqrt(), 0.0);
    let steering = steering_range_split(mu, 10_000, alpha, beta)?;
    let worst = steering_experiment(mu, steering.argmin, alpha, beta)?;
    Ok(json!({
        "assessment": to_value(&assessment),
        "steering": to_value(&steering),
        "adversary_amplitude": pair(steering.argmin),
        "worst_case_world_tree": to_value(&tracked(&worst)?),
    }))
}

fn run_decoherence(spec: &ScenarioSpec) -> Result<Value, CliError> {
    let bits = spec.env_bits.expect("resolved");
    let mut out = serde_json::Map::new();
    for basis in [RecordBasis::Local, RecordBasis::Nonlocal] {
        let profile = decoherence_profile(basis, bits)?;
        let (first, second) = record_experiments(basis, bits)?;
        out.insert(
            basis.to_string(),
            json!({
                "trace_distance": profile.last().copied().unwrap_or(1.0),
                "profile": profile,
                "first_record_tree": to_value(&tracked(&first)?),
                "second_record_tree": to_value(&tracked(&second)?),
            }),
        );
    }
    Ok(Value::Object(out))
}

fn run_bohm(spec: &ScenarioSpec, files: &mut Vec<String>) -> Result<Value, CliError> {
    let geometry = CollisionGeometry {
        t_max: spec.t_max.expect("resolved"),
        dt: spec.dt.expect("resolved"),
        ..CollisionGeometry::default()
    };
    let marked = spec.marker.expect("resolved");
    let x_init = spec.x_init.expect("resolved");
    let report = crossing_scenario_with(&geometry, marked, x_init).map_err(CliError::from_bohm)?;
    let state = collision_state(&geometry, marked).map_err(CliError::from_bohm)?;
    let fine = integrate_trajectory(&state, x_init, geometry.t_max, geometry.dt / 2.0)
        .map_err(CliError::from_bohm)?;
    let samples = spec.trials.expect("resolved") as usize;
    let starts = sample_initial(&state, samples, spec.seed).map_err(CliError::from_bohm)?;
    let members =
        ensemble(&state, &starts, geometry.t_max, geometry.dt).map_err(CliError::from_bohm)?;
    let ends: Vec<f64> = members.iter().map(|m| m.x_final).collect();
    let ks = ks_distance(&state, geometry.t_max, &ends).map_err(CliError::from_bohm)?;
    let from_m1 = GaussianPacket::new(
        -geometry.half_separation,
        geometry.speed,
        geometry.width,
        Complex64::new(1.0, 0.0),
    )
    .map_err(CliError::from_bohm)?;
    let from_m2 = GaussianPacket {
        x0: geometry.half_separation,
        v: -geometry.speed,
        ..from_m1
    };

    if let Some(dir) = &spec.csv_dir {
        std::fs::create_dir_all(dir)
            .map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))?;
        let path: PathBuf = dir.join(format!("{}_trajectory.csv", spec.scenario));
        let file =
            File::create(&path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        write_csv(&report.trajectory, BufWriter::new(file)).map_err(CliError::from_bohm)?;
        files.push(path.display().to_string());
    }
    Ok(json!({
        "geometry": to_value(&geometry),
        "pilot_norm": state.norm_sqr(),
        "trajectory": to_value(&report),
        "trajectory_samples": report.trajectory.points.len(),
        "dt_halving_shift": (fine.end().x - report.x_final).abs(),
        "residual_overlap": density_overlap(&from_m1, &from_m2, geometry.t_max),
        "ensemble": {
            "samples": samples,
            "kept_side": members.iter().filter(|m| m.kept_side).count(),
            "ks_distance": ks,
        },
    }))
}

/// Runs one resolved scenario; sidecar files are written, the report itself is not.
pub fn run_scenario(spec: &ScenarioSpec) -> Result<ScenarioReport, CliError> {
    let started = Instant::now();
    let mut files = Vec::new();
    let results = match spec.scenario {
        id if id.is_interferometer() => run_interferometer(spec)?,
        ScenarioId::Undo => run_undo(spec)?,
        ScenarioId::Steering => run_steering(spec)?,
        ScenarioId::Bet => run_bet(spec)?,
        ScenarioId::Decoherence => run_decoherence(spec)?,
        _ => run_bohm(spec, &mut files)?,
    };
    Ok(ScenarioReport {
        tool: env!("CARGO_PKG_NAME"),
        version: env!("CARGO_PKG_VERSION"),
        format_version: FORMAT_VERSION,
        spec: spec.clone(),
        results,
        files,
        wall_clock_seconds: started.elapsed().as_secs_f64(),
    })
}
