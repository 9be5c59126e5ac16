// SPDX-License-Identifier: Apache-2.0

//! The standard splitter, interferometer and spin-memory arrangements.

use std::sync::Arc;

use num_complex::Complex64;

use crate::circuit::names::*;
use crate::circuit::{
    absorber, balanced_splitter, beam_splitter, detector_coupling, emitter, escape, mirror,
    observer_coupling, spin_eraser, spin_marker, Circuit, CircuitError, Component,
};
use crate::statevec::{State, StateError, SubsystemLayout};

/// A circuit together with the state it is run on.
#[derive(Debug, Clone)]
pub struct Experiment {
    pub circuit: Circuit,
    pub initial: State,
}

/// Which interferometer arm a screen blocks: `M1` takes the `up` output of S₁.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Arm {
    M1,
    M2,
}

impl Arm {
    pub fn mode(self) -> &'static str {
        match self {
            Arm::M1 => UP,
            Arm::M2 => DOWN,
        }
    }
}

fn neutron_alphabet() -> Vec<String> {
    [UP, DOWN, SOURCE, "inD1", "inD2", ESCAPED, ABSORBED]
        .iter()
        .map(|s| s.to_string())
        .collect()
}

/// neutron mode, two detectors and the experimenter.
pub fn standard_layout() -> Arc<SubsystemLayout> {
    Arc::new(
        SubsystemLayout::new([
            (NEUTRON, neutron_alphabet()),
            (D1, vec![READY.into(), TRIGGERED.into()]),
            (D2, vec![READY.into(), TRIGGERED.into()]),
            (OBSERVER, vec![READY.into(), SAW_D1.into(), SAW_D2.into()]),
        ])
        .expect("static layout"),
    )
}

/// Standard layout plus the spin memory of the neutron.
pub fn spin_layout() -> Arc<SubsystemLayout> {
    Arc::new(
        SubsystemLayout::new([
            (NEUTRON, neutron_alphabet()),
            (SPIN, vec![NO_MARK.into(), M1.into(), M2.into()]),
            (D1, vec![READY.into(), TRIGGERED.into()]),
            (D2, vec![READY.into(), TRIGGERED.into()]),
            (OBSERVER, vec![READY.into(), SAW_D1.into(), SAW_D2.into()]),
        ])
        .expect("static layout"),
    )
}

/// Neutron, two detectors and `env_bits` environment bits.
pub fn environment_layout(env_bits: usize) -> Arc<SubsystemLayout> {
    let mut subsystems = vec![
        (NEUTRON.to_string(), neutron_alphabet()),
        (D1.to_string(), vec![READY.into(), TRIGGERED.into()]),
        (D2.to_string(), vec![READY.into(), TRIGGERED.into()]),
    ];
    for k in 0..env_bits {
        subsystems.push((env(k), vec!["0".into(), "1".into()]));
    }
    Arc::new(SubsystemLayout::new(subsystems).expect("generated layout"))
}

/// Basis state with the neutron in `mode` and every other subsystem at its first symbol.
pub fn ready_state(layout: &Arc<SubsystemLayout>, mode: &str) -> Result<State, StateError> {
    let symbols: Vec<&str> = layout
        .subsystems()
        .iter()
        .map(|s| {
            if s.name() == NEUTRON {
                mode
            } else {
                s.alphabet()[0].as_str()
            }
        })
        .collect();
    State::basis(layout.clone(), layout.configuration(&symbols)?)
}

fn detection() -> Vec<Component> {
    vec![
        detector_coupling(D1, UP),
        detector_coupling(D2, DOWN),
        observer_coupling(),
    ]
}

fn build(
    layout: Arc<SubsystemLayout>,
    mut steps: Vec<Component>,
    with_detection: bool,
    start: &str,
) -> Result<Experiment, CircuitError> {
    if with_detection {
        steps.extend(detection());
    }
    let initial = ready_state(&layout, start).map_err(|source| CircuitError::Layout {
        component: "initial state".into(),
        source,
    })?;
    Ok(Experiment {
        circuit: Circuit::new(layout, steps)?,
        initial,
    })
}

/// Single splitter, both detectors and the experimenter looking at them.
pub fn fig1_splitter(alpha: Complex64, beta: Complex64) -> Result<Experiment, CircuitError> {
    build(
        standard_layout(),
        vec![beam_splitter(alpha, beta)?.named("S")],
        true,
        UP,
    )
}

/// The full measurement chain starting from the source, used by the undo experiment.
pub fn measurement_chain(alpha: Complex64, beta: Complex64) -> Result<Experiment, CircuitError> {
    build(
        standard_layout(),
        vec![emitter(), beam_splitter(alpha, beta)?.named("S")],
        true,
        SOURCE,
    )
}

/// Splitter whose `up` port leaves the apparatus; `down` is mirrored into a second splitter.
pub fn fig2_arrangements() -> Result<Experiment, CircuitError> {
    build(
        standard_layout(),
        vec![
            balanced_splitter().named("S1"),
            escape(UP),
            mirror(),
            balanced_splitter().named("S2"),
        ],
        true,
        UP,
    )
}

/// Closed interferometer: S₁, mirrors, S₂, then detection.
pub fn fig3_interferometer() -> Result<Experiment, CircuitError> {
    build(
        standard_layout(),
        vec![
            balanced_splitter().named("S1"),
            mirror(),
            balanced_splitter().named("S2"),
        ],
        true,
        UP,
    )
}

/// Interferometer with S₂ removed; the two packets cross at A and go on to the detectors.
pub fn fig4_open() -> Result<Experiment, CircuitError> {
    build(
        standard_layout(),
        vec![balanced_splitter().named("S1"), mirror()],
        true,
        UP,
    )
}

/// Open interferometer with a screen in front of the mirror of `arm`.
pub fn fig4_absorber(arm: Arm) -> Result<Experiment, CircuitError> {
    build(
        standard_layout(),
        vec![
            balanced_splitter().named("S1"),
            absorber(arm.mode()),
            mirror(),
        ],
        true,
        UP,
    )
}

/// Interferometer with path memory in the spin; `erase` inserts the second magnet before S₂.
pub fn spin_memory(erase: bool) -> Result<Experiment, CircuitError> {
    let mut steps = vec![balanced_splitter().named("S1"), spin_marker(), mirror()];
    if erase {
        steps.push(spin_eraser());
    }
    steps.push(balanced_splitter().named("S2"));
    build(spin_layout(), steps, true, UP)
}
