// SPDX-License-Identifier: Apache-2.0

//! Measure, then run the whole chain backwards and look for the neutron at the source.

use num_complex::Complex64;

use super::{exact_outcome_distribution, run_trial, EngineError, EngineMode};
use crate::circuit::names::{NEUTRON, SOURCE};
use crate::experiments::{measurement_chain, Experiment};

/// Measurement chain followed by its exact inverse.
pub fn undo_setup(alpha: Complex64, beta: Complex64) -> Result<Experiment, EngineError> {
    let chain = measurement_chain(alpha, beta)?;
    let circuit = chain.circuit.then(&chain.circuit.inverse())?;
    Ok(Experiment {
        circuit,
        initial: chain.initial,
    })
}

fn at_source(e: &Experiment, config: &crate::statevec::Configuration) -> bool {
    e.initial.layout().symbol(config, NEUTRON) == Some(SOURCE)
}

/// Exact probability of finding the neutron back at the source.
pub fn undo_exact(alpha: Complex64, beta: Complex64, mode: EngineMode) -> Result<f64, EngineError> {
    let e = undo_setup(alpha, beta)?;
    let dist = exact_outcome_distribution(&e.circuit, &e.initial, mode)?;
    Ok(dist
        .iter()
        .filter(|(c, _)| at_source(&e, c))
        .map(|(_, p)| p)
        .sum())
}

/// Source-return probability: exact for MWI, the empirical frequency over `trials` for collapse.
pub fn undo_experiment(
    alpha: Complex64,
    beta: Complex64,
    mode: EngineMode,
    trials: u64,
    seed: u64,
) -> Result<f64, EngineError> {
    let stage = match mode {
        EngineMode::Mwi => return undo_exact(alpha, beta, mode),
        EngineMode::Collapse(stage) => stage,
    };
    if trials == 0 {
        return Err(EngineError::InvalidInput(
            "trials must be at least 1".into(),
        ));
    }
    let e = undo_setup(alpha, beta)?;
    use rayon::prelude::*;
    let hits = (0..trials)
        .into_par_iter()
        .map(|t| {
            run_trial(&e.circuit, &e.initial, stage, seed, t)
                .map(|r| at_source(&e, &r.outcome) as u64)
        })
        .collect::<Result<Vec<_>, _>>()?
        .into_iter()
        .sum::<u64>();
    Ok(hits as f64 / trials as f64)
}
