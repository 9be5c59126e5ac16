// SPDX-License-Identifier: Apache-2.0

//! Records that survive the environment and records that do not.

use std::f64::consts::FRAC_1_SQRT_2;
use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use serde::Serialize;

use super::EngineError;
use crate::circuit::names::*;
use crate::circuit::{environment_coupling, Circuit};
use crate::experiments::{environment_layout, Experiment};
use crate::statevec::{make_state, partial_trace, trace_distance, State};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RecordBasis {
    /// `|in D1>|in>|r>` versus `|in D2>|r>|in>`.
    Local,
    /// Their `±` superpositions.
    Nonlocal,
}

impl fmt::Display for RecordBasis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RecordBasis::Local => "local",
            RecordBasis::Nonlocal => "nonlocal",
        })
    }
}

impl FromStr for RecordBasis {
    type Err = EngineError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "local" => Ok(RecordBasis::Local),
            "nonlocal" => Ok(RecordBasis::Nonlocal),
            other => Err(EngineError::InvalidInput(format!("record basis `{other}`"))),
        }
    }
}

/// The two record states to be told apart, before any environment coupling.
pub fn record_states(basis: RecordBasis, env_bits: usize) -> Result<(State, State), EngineError> {
    let layout = environment_layout(env_bits);
    let zeros = vec!["0"; env_bits];
    let config = |mode: &str, d1: &str, d2: &str| {
        let mut symbols = vec![mode, d1, d2];
        symbols.extend(&zeros);
        layout.configuration(&symbols)
    };
    let first = config("inD1", TRIGGERED, READY)?;
    let second = config("inD2", READY, TRIGGERED)?;
    let h = Complex64::new(FRAC_1_SQRT_2, 0.0);
    let pair = match basis {
        RecordBasis::Local => (
            State::basis(layout.clone(), first)?,
            State::basis(layout.clone(), second)?,
        ),
        RecordBasis::Nonlocal => (
            make_state(layout.clone(), [(first.clone(), h), (second.clone(), h)])?,
            make_state(layout.clone(), [(first, h), (second, -h)])?,
        ),
    };
    Ok(pair)
}

/// Environment bit `k` watches D1 for even `k`, D2 for odd `k`.
fn environment_circuit(env_bits: usize, active: usize) -> Result<Circuit, EngineError> {
    let layout = environment_layout(env_bits);
    let steps = (0..active)
        .map(|k| environment_coupling(k, if k % 2 == 0 { D1 } else { D2 }))
        .collect();
    Ok(Circuit::new(layout, steps)?)
}

/// Both records with the full environment coupling circuit attached.
pub fn record_experiments(
    basis: RecordBasis,
    env_bits: usize,
) -> Result<(Experiment, Experiment), EngineError> {
    let (a, b) = record_states(basis, env_bits)?;
    let circuit = environment_circuit(env_bits, env_bits)?;
    Ok((
        Experiment {
            circuit: circuit.clone(),
            initial: a,
        },
        Experiment {
            circuit,
            initial: b,
        },
    ))
}

fn distance_after(basis: RecordBasis, env_bits: usize, active: usize) -> Result<f64, EngineError> {
    let (a, b) = record_states(basis, env_bits)?;
    let circuit = environment_circuit(env_bits, active)?;
    let keep = [NEUTRON, D1, D2];
    let ra = partial_trace(&circuit.apply(&a)?, &keep)?;
    let rb = partial_trace(&circuit.apply(&b)?, &keep)?;
    Ok(trace_distance(&ra, &rb)?)
}

/// Trace distance between the two records once `env_bits` environment bits have coupled.
pub fn decoherence_stability(basis: RecordBasis, env_bits: usize) -> Result<f64, EngineError> {
    distance_after(basis, env_bits, env_bits)
}

/// Distances after 0, 1, ..., `env_bits` couplings, all on the same layout.
pub fn decoherence_profile(basis: RecordBasis, env_bits: usize) -> Result<Vec<f64>, EngineError> {
    (0..=env_bits)
        .map(|k| distance_after(basis, env_bits, k))
        .collect()
}
