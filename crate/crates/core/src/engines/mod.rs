// SPDX-License-Identifier: Apache-2.0

//! Interpretation engines and the experiments that tell them apart.
//!
//! The many-worlds engine is the plain unitary evolution read through
//! [`crate::worlds`]. The collapse engine applies the circuit up to a
//! configured stage, samples a pointer reading with Born probability, projects
//! and renormalizes, and then finishes the circuit. Every trial draws from its
//! own ChaCha8 stream `(seed, trial)`, so runs are reproducible and trials can
//! be evaluated in parallel.

mod decoherence;
mod steering;
mod undo;

pub use decoherence::{
    decoherence_profile, decoherence_stability, record_experiments, record_states, RecordBasis,
};
pub use steering::{
    assess_bet, bet_decision, steering_experiment, steering_range, steering_range_split,
    BetAssessment, BetDecision, SteeringAnalysis,
};
pub use undo::{undo_exact, undo_experiment, undo_setup};

use std::collections::BTreeMap;
use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::circuit::{Circuit, CircuitError, ComponentKind};
use crate::statevec::{Configuration, State, StateError};
use crate::worlds::WorldsError;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EngineError {
    #[error("circuit has no {0} coupling to collapse after")]
    StageAbsent(CollapseStage),
    #[error("operation needs a collapse-mode engine")]
    NotCollapse,
    #[error("measure of existence {0} is outside (0, 1]")]
    MuOutOfRange(f64),
    #[error("grid must have at least 100 points, got {0}")]
    GridTooSmall(usize),
    #[error("invalid probability or odds: {0}")]
    InvalidInput(String),
    #[error(transparent)]
    Circuit(#[from] CircuitError),
    #[error(transparent)]
    State(#[from] StateError),
    #[error(transparent)]
    Worlds(#[from] WorldsError),
}

/// Where the collapse postulate acts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CollapseStage {
    AfterDetector,
    AfterObserver,
}

impl fmt::Display for CollapseStage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CollapseStage::AfterDetector => "detector",
            CollapseStage::AfterObserver => "observer",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "collapse_stage")]
pub enum EngineMode {
    Mwi,
    Collapse(CollapseStage),
}

impl fmt::Display for EngineMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EngineMode::Mwi => f.write_str("mwi"),
            EngineMode::Collapse(stage) => write!(f, "collapse@{stage}"),
        }
    }
}

/// Independent stream for one trial.
pub fn trial_rng(seed: u64, trial: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial);
    rng
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialResult {
    /// Full product-basis readout at the end of the circuit.
    pub outcome: Configuration,
    pub outcome_label: String,
    /// Pointer reading selected at the collapse stage.
    pub collapsed_to: String,
    pub seed: u64,
    pub trial: u64,
    pub mode: EngineMode,
}

struct CollapsePlan {
    point: usize,
    pointers: Vec<usize>,
}

fn plan(circuit: &Circuit, stage: CollapseStage) -> Result<CollapsePlan, EngineError> {
    let kind = match stage {
        CollapseStage::AfterDetector => ComponentKind::Detector,
        CollapseStage::AfterObserver => ComponentKind::Observer,
    };
    let layout = circuit.layout();
    let mut point = None;
    let mut pointers = Vec::new();
    for (i, step) in circuit.steps().iter().enumerate() {
        if step.kind() != kind || step.is_inverted() {
            continue;
        }
        point = Some(i + 1);
        // detectors record in their own subsystem; the observer in its last target
        let pointer = match kind {
            ComponentKind::Detector => &step.targets()[1],
            _ => step.targets().last().expect("targets"),
        };
        let pos = layout.index_of(pointer).expect("compiled circuit");
        if !pointers.contains(&pos) {
            pointers.push(pos);
        }
    }
    let point = point.ok_or(EngineError::StageAbsent(stage))?;
    pointers.sort_unstable();
    Ok(CollapsePlan { point, pointers })
}

/// Pointer readings with their Born weights, in configuration order.
fn pointer_weights(state: &State, pointers: &[usize]) -> BTreeMap<Vec<u8>, f64> {
    let mut weights: BTreeMap<Vec<u8>, f64> = BTreeMap::new();
    for (config, amp) in state.iter() {
        let key = pointers.iter().map(|&p| config.symbols()[p]).collect();
        *weights.entry(key).or_default() += amp.norm_sqr();
    }
    weights
}

fn pick<'a, K, R: Rng>(items: impl Iterator<Item = (&'a K, f64)>, rng: &mut R) -> &'a K
where
    K: 'a,
{
    let items: Vec<(&K, f64)> = items.collect();
    let total: f64 = items.iter().map(|(_, w)| w).sum();
    let u = rng.gen::<f64>() * total;
    let mut acc = 0.0;
    for (k, w) in &items {
        acc += w;
        if u < acc {
            return k;
        }
    }
    items.last().expect("non-empty distribution").0
}

fn pointer_label(state: &State, pointers: &[usize], key: &[u8]) -> String {
    let layout = state.layout();
    pointers
        .iter()
        .zip(key)
        .map(|(&p, &s)| {
            let sub = &layout.subsystems()[p];
            format!("{}={}", sub.name(), sub.alphabet()[s as usize])
        })
        .collect::<Vec<_>>()
        .join(",")
}

fn project_pointer(state: &State, pointers: &[usize], key: &[u8]) -> Result<State, StateError> {
    state.project(|c| pointers.iter().zip(key).all(|(&p, &s)| c.symbols()[p] == s))
}

/// One collapse-engine trial on stream `(seed, trial)`.
pub fn run_trial(
    circuit: &Circuit,
    initial: &State,
    stage: CollapseStage,
    seed: u64,
    trial: u64,
) -> Result<TrialResult, EngineError> {
    let plan = plan(circuit, stage)?;
    let mut rng = trial_rng(seed, trial);
    let before = circuit.apply_range(0..plan.point, initial)?;
    let weights = pointer_weights(&before, &plan.pointers);
    let key = pick(weights.iter().map(|(k, w)| (k, *w)), &mut rng).clone();
    let projected = project_pointer(&before, &plan.pointers, &key)?;
    let after = circuit.apply_range(plan.point..circuit.len(), &projected)?;
    let outcome = pick(after.iter().map(|(c, a)| (c, a.norm_sqr())), &mut rng).clone();
    Ok(TrialResult {
        outcome_label: after.layout().label(&outcome),
        outcome,
        collapsed_to: pointer_label(&before, &plan.pointers, &key),
        seed,
        trial,
        mode: EngineMode::Collapse(stage),
    })
}

/// A single collapse trial (stream 0 of `seed`).
pub fn run_collapse(
    circuit: &Circuit,
    initial: &State,
    mode: EngineMode,
    seed: u64,
) -> Result<TrialResult, EngineError> {
    match mode {
        EngineMode::Mwi => Err(EngineError::NotCollapse),
        EngineMode::Collapse(stage) => run_trial(circuit, initial, stage, seed, 0),
    }
}

/// One possible collapse outcome, enumerated exactly.
#[derive(Debug, Clone)]
pub struct CollapseBranch {
    pub pointer: String,
    pub probability: f64,
    /// State at the end of the circuit given this collapse outcome.
    pub final_state: State,
}

/// Every pointer reading at the collapse stage, with its probability and continuation.
pub fn collapse_branches(
    circuit: &Circuit,
    initial: &State,
    stage: CollapseStage,
) -> Result<Vec<CollapseBranch>, EngineError> {
    let plan = plan(circuit, stage)?;
    let before = circuit.apply_range(0..plan.point, initial)?;
    pointer_weights(&before, &plan.pointers)
        .into_iter()
        .map(|(key, probability)| {
            let projected = project_pointer(&before, &plan.pointers, &key)?;
            Ok(CollapseBranch {
                pointer: pointer_label(&before, &plan.pointers, &key),
                probability,
                final_state: circuit.apply_range(plan.point..circuit.len(), &projected)?,
            })
        })
        .collect()
}

/// Exact distribution of final readouts under `mode`.
pub fn exact_outcome_distribution(
    circuit: &Circuit,
    initial: &State,
    mode: EngineMode,
) -> Result<BTreeMap<Configuration, f64>, EngineError> {
    let mut dist: BTreeMap<Configuration, f64> = BTreeMap::new();
    match mode {
        EngineMode::Mwi => {
            for (c, a) in circuit.apply(initial)?.iter() {
                dist.insert(c.clone(), a.norm_sqr());
            }
        }
        EngineMode::Collapse(stage) => {
            for branch in collapse_branches(circuit, initial, stage)? {
                for (c, a) in branch.final_state.iter() {
                    *dist.entry(c.clone()).or_default() += branch.probability * a.norm_sqr();
                }
            }
        }
    }
    Ok(dist)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OutcomeRow {
    pub outcome: String,
    pub count: u64,
    pub frequency: f64,
    /// Many-worlds measure of this final world.
    pub measure: f64,
    /// Exact probability under the engine that produced the counts.
    pub expected: f64,
    /// `(frequency − measure) / σ` with `σ = √(measure(1 − measure)/trials)`.
    pub z_score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FrequencyReport {
    pub mode: EngineMode,
    pub trials: u64,
    pub seed: u64,
    /// Frequencies are exact measures, not samples.
    pub exact: bool,
    pub rows: Vec<OutcomeRow>,
}

impl FrequencyReport {
    pub fn max_abs_z(&self) -> f64 {
        self.rows
            .iter()
            .map(|r| r.z_score.abs())
            .fold(0.0, f64::max)
    }

    pub fn row(&self, outcome: &str) -> Option<&OutcomeRow> {
        self.rows.iter().find(|r| r.outcome == outcome)
    }

    /// Total frequency of outcomes accepted by `pred` (applied to outcome labels).
    pub fn frequency_where<F: Fn(&str) -> bool>(&self, pred: F) -> f64 {
        self.rows
            .iter()
            .filter(|r| pred(&r.outcome))
            .map(|r| r.frequency)
            .sum()
    }
}

fn z_score(frequency: f64, p: f64, trials: u64) -> f64 {
    let sigma = (p * (1.0 - p) / trials as f64).sqrt();
    if sigma > 0.0 {
        (frequency - p) / sigma
    } else if (frequency - p).abs() < 1e-15 {
        0.0
    } else {
        f64::INFINITY
    }
}

/// Outcome frequencies over `trials` seeded trials; exact measures in MWI mode.
pub fn frequencies(
    circuit: &Circuit,
    initial: &State,
    mode: EngineMode,
    trials: u64,
    seed: u64,
) -> Result<FrequencyReport, EngineError> {
    let layout = initial.layout().clone();
    let mwi = exact_outcome_distribution(circuit, initial, EngineMode::Mwi)?;
    let stage = match mode {
        EngineMode::Mwi => {
            let rows = mwi
                .iter()
                .map(|(c, &m)| OutcomeRow {
                    outcome: layout.label(c),
                    count: 0,
                    frequency: m,
                    measure: m,
                    expected: m,
                    z_score: 0.0,
                })
                .collect();
            return Ok(FrequencyReport {
                mode,
                trials: 0,
                seed,
                exact: true,
                rows,
            });
        }
        EngineMode::Collapse(stage) => stage,
    };
    if trials == 0 {
        return Err(EngineError::InvalidInput(
            "trials must be at least 1".into(),
        ));
    }
    let expected = exact_outcome_distribution(circuit, initial, mode)?;
    let outcomes = (0..trials)
        .into_par_iter()
        .map(|t| run_trial(circuit, initial, stage, seed, t).map(|r| r.outcome))
        .collect::<Result<Vec<_>, _>>()?;
    let mut counts: BTreeMap<Configuration, u64> = BTreeMap::new();
    for o in outcomes {
        *counts.entry(o).or_default() += 1;
    }
    let mut keys: Vec<&Configuration> = mwi
        .keys()
        .chain(expected.keys())
        .chain(counts.keys())
        .collect();
    keys.sort();
    keys.dedup();
    let rows = keys
        .into_iter()
        .map(|c| {
            let count = counts.get(c).copied().unwrap_or(0);
            let frequency = count as f64 / trials as f64;
            let measure = mwi.get(c).copied().unwrap_or(0.0);
            OutcomeRow {
                outcome: layout.label(c),
                count,
                frequency,
                measure,
                expected: expected.get(c).copied().unwrap_or(0.0),
                z_score: z_score(frequency, measure, trials),
            }
        })
        .collect();
    Ok(FrequencyReport {
        mode,
        trials,
        seed,
        exact: false,
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::names::*;
    use crate::experiments::fig1_splitter;
    use num_complex::Complex64;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    const DETECTOR: EngineMode = EngineMode::Collapse(CollapseStage::AfterDetector);

    #[test]
    fn balanced_trials_hit_either_detector() {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let e = fig1_splitter(c(h), c(h)).unwrap();
        let mut seen = std::collections::BTreeSet::new();
        for seed in 0..40 {
            let r = run_collapse(&e.circuit, &e.initial, DETECTOR, seed).unwrap();
            seen.insert(r.collapsed_to);
        }
        assert_eq!(
            seen.into_iter().collect::<Vec<_>>(),
            vec!["D1=in,D2=r".to_string(), "D1=r,D2=in".to_string()]
        );
    }

    #[test]
    fn transparent_splitter_always_d1() {
        let e = fig1_splitter(c(1.0), c(0.0)).unwrap();
        for seed in 0..20 {
            let r = run_collapse(&e.circuit, &e.initial, DETECTOR, seed).unwrap();
            assert_eq!(e.initial.layout().symbol(&r.outcome, D1), Some(TRIGGERED));
        }
    }

    #[test]
    fn trials_are_deterministic() {
        let e = fig1_splitter(c(0.6), c(0.8)).unwrap();
        let a = run_trial(&e.circuit, &e.initial, CollapseStage::AfterObserver, 7, 3).unwrap();
        let b = run_trial(&e.circuit, &e.initial, CollapseStage::AfterObserver, 7, 3).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn mwi_frequencies_are_exact_measures() {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let e = fig1_splitter(c(h), c(h)).unwrap();
        let report = frequencies(&e.circuit, &e.initial, EngineMode::Mwi, 100, 0).unwrap();
        assert!(report.exact);
        assert_eq!(report.rows.len(), 2);
        for row in &report.rows {
            assert!((row.frequency - 0.5).abs() < 1e-15);
        }
        assert!(matches!(
            run_collapse(&e.circuit, &e.initial, EngineMode::Mwi, 0),
            Err(EngineError::NotCollapse)
        ));
    }

    #[test]
    fn single_trial_report_is_degenerate() {
        let e = fig1_splitter(c(0.6), c(0.8)).unwrap();
        let report = frequencies(&e.circuit, &e.initial, DETECTOR, 1, 5).unwrap();
        let total: u64 = report.rows.iter().map(|r| r.count).sum();
        assert_eq!(total, 1);
        assert!(report.rows.iter().any(|r| r.frequency == 1.0));
    }

    #[test]
    fn missing_stage_is_an_error() {
        let layout = crate::experiments::standard_layout();
        let circuit =
            Circuit::new(layout.clone(), vec![crate::circuit::balanced_splitter()]).unwrap();
        let initial = crate::experiments::ready_state(&layout, UP).unwrap();
        assert_eq!(
            run_collapse(&circuit, &initial, DETECTOR, 0).unwrap_err(),
            EngineError::StageAbsent(CollapseStage::AfterDetector)
        );
    }
}
