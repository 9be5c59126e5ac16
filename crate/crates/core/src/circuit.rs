// SPDX-License-Identifier: Apache-2.0

//! Interferometer components and their composition into invertible circuits.
//!
//! A [`Component`] is written against subsystem *names* and symbol *names*; it
//! only becomes executable once a [`Circuit`] resolves it against a layout.
//! Actions are sparse: configurations that are not listed map to themselves.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::sync::Arc;

use num_complex::Complex64;
use thiserror::Error;

use crate::statevec::{same_layout, Configuration, State, StateError, SubsystemLayout};

/// Column orthonormality tolerance checked when a component is built.
pub const UNITARY_TOLERANCE: f64 = 1e-12;

/// Standard subsystem and symbol names used by the component library.
pub mod names {
    pub const NEUTRON: &str = "neutron";
    pub const SPIN: &str = "spin";
    pub const OBSERVER: &str = "observer";
    pub const D1: &str = "D1";
    pub const D2: &str = "D2";

    pub const UP: &str = "up";
    pub const DOWN: &str = "down";
    pub const SOURCE: &str = "source";
    pub const ESCAPED: &str = "escaped";
    pub const ABSORBED: &str = "absorbed";

    pub const READY: &str = "r";
    pub const TRIGGERED: &str = "in";

    pub const NO_MARK: &str = "none";
    pub const M1: &str = "M1";
    pub const M2: &str = "M2";

    pub const SAW_D1: &str = "sawD1";
    pub const SAW_D2: &str = "sawD2";

    /// Neutron mode after absorption by the named detector, e.g. `inD1`.
    pub fn absorbed_in(detector: &str) -> String {
        format!("in{detector}")
    }

    pub fn env(index: usize) -> String {
        format!("env{index}")
    }
}

use names::*;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CircuitError {
    #[error("splitter coefficients are not normalized: |alpha|^2 + |beta|^2 = {0}")]
    NonNormalizedSplitter(f64),
    #[error("component `{component}` is not unitary (deviation {deviation:e})")]
    NotUnitary { component: String, deviation: f64 },
    #[error("component `{component}` maps onto a configuration outside its listed domain")]
    OpenAction { component: String },
    #[error("component `{component}` needs {expected} symbols per configuration, got {got}")]
    Arity {
        component: String,
        expected: usize,
        got: usize,
    },
    #[error("component `{0}` has no targets or repeats a target")]
    BadTargets(String),
    #[error("component `{component}` cannot be placed on this layout: {source}")]
    Layout {
        component: String,
        #[source]
        source: StateError,
    },
    #[error("component `{component}` rejects input configuration {configuration}")]
    Rejected {
        component: String,
        configuration: String,
    },
    #[error("circuit and state are defined over different layouts")]
    LayoutMismatch,
}

/// What a component physically is; collapse stages are located by kind.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ComponentKind {
    Source,
    Splitter,
    Mirror,
    Marker,
    Detector,
    Observer,
    Environment,
    Absorber,
    Custom,
}

/// Local configuration over a component's targets, by symbol name.
pub type LocalConfig = Vec<String>;

/// Input pattern; `None` matches any symbol.
pub type GuardPattern = Vec<Option<String>>;

/// A unitary step acting on a few named subsystems.
#[derive(Debug, Clone, PartialEq)]
pub struct Component {
    name: String,
    kind: ComponentKind,
    targets: Vec<String>,
    action: BTreeMap<LocalConfig, Vec<(LocalConfig, Complex64)>>,
    guard: Vec<GuardPattern>,
    inverted: bool,
}

fn cfg(symbols: &[&str]) -> LocalConfig {
    symbols.iter().map(|s| s.to_string()).collect()
}

fn one() -> Complex64 {
    Complex64::new(1.0, 0.0)
}

impl Component {
    /// Builds a component from its explicit columns. Unlisted inputs are fixed
    /// points, so every listed output must itself be a listed input.
    pub fn new(
        name: impl Into<String>,
        kind: ComponentKind,
        targets: Vec<String>,
        action: BTreeMap<LocalConfig, Vec<(LocalConfig, Complex64)>>,
        guard: Vec<GuardPattern>,
    ) -> Result<Self, CircuitError> {
        let name = name.into();
        let unique: BTreeSet<&String> = targets.iter().collect();
        if targets.is_empty() || unique.len() != targets.len() {
            return Err(CircuitError::BadTargets(name));
        }
        let arity = targets.len();
        let mut merged = BTreeMap::new();
        for (input, outputs) in action {
            if input.len() != arity {
                return Err(CircuitError::Arity {
                    component: name,
                    expected: arity,
                    got: input.len(),
                });
            }
            let mut column: BTreeMap<LocalConfig, Complex64> = BTreeMap::new();
            for (out, amp) in outputs {
                if out.len() != arity {
                    return Err(CircuitError::Arity {
                        component: name,
                        expected: arity,
                        got: out.len(),
                    });
                }
                *column.entry(out).or_default() += amp;
            }
            column.retain(|_, a| a.norm() > 0.0);
            merged.insert(input, column.into_iter().collect::<Vec<_>>());
        }
        for pattern in &guard {
            if pattern.len() != arity {
                return Err(CircuitError::Arity {
                    component: name,
                    expected: arity,
                    got: pattern.len(),
                });
            }
        }
        let component = Self {
            name,
            kind,
            targets,
            action: merged,
            guard,
            inverted: false,
        };
        component.check_unitary()?;
        Ok(component)
    }

    fn check_unitary(&self) -> Result<(), CircuitError> {
        for outputs in self.action.values() {
            if outputs.iter().any(|(o, _)| !self.action.contains_key(o)) {
                return Err(CircuitError::OpenAction {
                    component: self.name.clone(),
                });
            }
        }
        let columns: Vec<BTreeMap<&LocalConfig, Complex64>> = self
            .action
            .values()
            .map(|outs| outs.iter().map(|(o, a)| (o, *a)).collect())
            .collect();
        let mut deviation: f64 = 0.0;
        for (i, ci) in columns.iter().enumerate() {
            for (j, cj) in columns.iter().enumerate().skip(i) {
                let dot: Complex64 = ci
                    .iter()
                    .filter_map(|(k, a)| cj.get(k).map(|b| a.conj() * b))
                    .sum();
                let target = if i == j { one() } else { Complex64::default() };
                deviation = deviation.max((dot - target).norm());
            }
        }
        if deviation > UNITARY_TOLERANCE {
            return Err(CircuitError::NotUnitary {
                component: self.name.clone(),
                deviation,
            });
        }
        Ok(())
    }

    /// Same component under a different display name.
    pub fn named(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    /// Display name; inverted components carry a `^-1` suffix.
    pub fn display_name(&self) -> String {
        if self.inverted {
            format!("{}^-1", self.name)
        } else {
            self.name.clone()
        }
    }

    pub fn kind(&self) -> ComponentKind {
        self.kind
    }

    pub fn targets(&self) -> &[String] {
        &self.targets
    }

    pub fn is_inverted(&self) -> bool {
        self.inverted
    }

    /// Conjugate transpose. Preconditions guard only the forward direction.
    pub fn inverse(&self) -> Self {
        let mut adjoint: BTreeMap<LocalConfig, Vec<(LocalConfig, Complex64)>> = self
            .action
            .keys()
            .map(|k| (k.clone(), Vec::new()))
            .collect();
        for (input, outputs) in &self.action {
            for (out, amp) in outputs {
                adjoint
                    .get_mut(out)
                    .expect("closed action")
                    .push((input.clone(), amp.conj()));
            }
        }
        // sorted columns keep inverse(inverse(c)) == c structurally
        for column in adjoint.values_mut() {
            column.sort_by(|a, b| a.0.cmp(&b.0));
        }
        Self {
            name: self.name.clone(),
            kind: self.kind,
            targets: self.targets.clone(),
            action: adjoint,
            guard: self.guard.clone(),
            inverted: !self.inverted,
        }
    }

    fn compile(&self, layout: &SubsystemLayout) -> Result<CompiledStep, CircuitError> {
        let wrap = |source| CircuitError::Layout {
            component: self.name.clone(),
            source,
        };
        let positions: Vec<usize> = self
            .targets
            .iter()
            .map(|t| {
                layout
                    .index_of(t)
                    .ok_or_else(|| wrap(StateError::UnknownSubsystem(t.clone())))
            })
            .collect::<Result<_, _>>()?;
        let resolve = |local: &LocalConfig| -> Result<Vec<u8>, CircuitError> {
            local
                .iter()
                .zip(&self.targets)
                .map(|(sym, t)| layout.resolve(t, sym).map(|(_, i)| i).map_err(wrap))
                .collect()
        };
        let mut action = HashMap::new();
        for (input, outputs) in &self.action {
            let outs = outputs
                .iter()
                .map(|(o, a)| resolve(o).map(|o| (o, *a)))
                .collect::<Result<Vec<_>, _>>()?;
            action.insert(resolve(input)?, outs);
        }
        let mut guard = Vec::new();
        if !self.inverted {
            'patterns: for pattern in &self.guard {
                let mut resolved = Vec::with_capacity(pattern.len());
                for (slot, t) in pattern.iter().zip(&self.targets) {
                    match slot {
                        None => resolved.push(None),
                        Some(sym) => match layout.resolve(t, sym) {
                            Ok((_, i)) => resolved.push(Some(i)),
                            // a symbol the layout lacks can never be present
                            Err(_) => continue 'patterns,
                        },
                    }
                }
                guard.push(resolved);
            }
        }
        Ok(CompiledStep {
            name: self.display_name(),
            positions,
            action,
            guard,
        })
    }
}

#[derive(Debug, Clone)]
struct CompiledStep {
    name: String,
    positions: Vec<usize>,
    action: HashMap<Vec<u8>, Vec<(Vec<u8>, Complex64)>>,
    guard: Vec<Vec<Option<u8>>>,
}

impl CompiledStep {
    fn apply(&self, layout: &SubsystemLayout, state: &State) -> Result<State, CircuitError> {
        let mut out: BTreeMap<Configuration, Complex64> = BTreeMap::new();
        for (config, amp) in state.iter() {
            let symbols = config.symbols();
            let local: Vec<u8> = self.positions.iter().map(|&p| symbols[p]).collect();
            let rejected = self.guard.iter().any(|pattern| {
                pattern
                    .iter()
                    .zip(&local)
                    .all(|(slot, s)| slot.is_none_or(|want| want == *s))
            });
            if rejected {
                return Err(CircuitError::Rejected {
                    component: self.name.clone(),
                    configuration: layout.label(config),
                });
            }
            match self.action.get(&local) {
                Some(outputs) => {
                    for (target, coef) in outputs {
                        let mut next = symbols.to_vec();
                        for (&p, &s) in self.positions.iter().zip(target) {
                            next[p] = s;
                        }
                        *out.entry(Configuration(next)).or_default() += amp * coef;
                    }
                }
                None => *out.entry(config.clone()).or_default() += *amp,
            }
        }
        Ok(State::from_raw(state.layout().clone(), out))
    }
}

/// Two-mode splitter: `up → α up + β down`, `down → β̄ up − ᾱ down`.
pub fn beam_splitter(alpha: Complex64, beta: Complex64) -> Result<Component, CircuitError> {
    let norm = alpha.norm_sqr() + beta.norm_sqr();
    if (norm - 1.0).abs() > 1e-12 {
        return Err(CircuitError::NonNormalizedSplitter(norm));
    }
    let action = BTreeMap::from([
        (cfg(&[UP]), vec![(cfg(&[UP]), alpha), (cfg(&[DOWN]), beta)]),
        (
            cfg(&[DOWN]),
            vec![(cfg(&[UP]), beta.conj()), (cfg(&[DOWN]), -alpha.conj())],
        ),
    ]);
    Component::new(
        "splitter",
        ComponentKind::Splitter,
        vec![NEUTRON.into()],
        action,
        vec![],
    )
}

/// The balanced splitter with real coefficients 1/√2.
pub fn balanced_splitter() -> Component {
    let h = Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
    beam_splitter(h, h).expect("balanced splitter is unitary")
}

/// Both interferometer mirrors at once: a phase-free `up ↔ down` swap.
pub fn mirror() -> Component {
    let action = BTreeMap::from([
        (cfg(&[UP]), vec![(cfg(&[DOWN]), one())]),
        (cfg(&[DOWN]), vec![(cfg(&[UP]), one())]),
    ]);
    Component::new(
        "mirrors",
        ComponentKind::Mirror,
        vec![NEUTRON.into()],
        action,
        vec![],
    )
    .expect("swap is unitary")
}

fn swaps(
    pairs: &[(LocalConfig, LocalConfig)],
) -> BTreeMap<LocalConfig, Vec<(LocalConfig, Complex64)>> {
    let mut action = BTreeMap::new();
    for (a, b) in pairs {
        action.insert(a.clone(), vec![(b.clone(), one())]);
        action.insert(b.clone(), vec![(a.clone(), one())]);
    }
    action
}

/// Path memory: `(up, none) ↔ (up, M1)` and `(down, none) ↔ (down, M2)`.
pub fn spin_marker() -> Component {
    let action = swaps(&[
        (cfg(&[UP, NO_MARK]), cfg(&[UP, M1])),
        (cfg(&[DOWN, NO_MARK]), cfg(&[DOWN, M2])),
    ]);
    Component::new(
        "spin-marker",
        ComponentKind::Marker,
        vec![NEUTRON.into(), SPIN.into()],
        action,
        vec![],
    )
    .expect("swap is unitary")
}

/// Second magnet placed after the mirrors: the marker's inverse written in the
/// reflected mode labels, i.e. `mirror · spin_marker⁻¹ · mirror`.
pub fn spin_eraser() -> Component {
    let action = swaps(&[
        (cfg(&[DOWN, M1]), cfg(&[DOWN, NO_MARK])),
        (cfg(&[UP, M2]), cfg(&[UP, NO_MARK])),
    ]);
    Component::new(
        "spin-eraser",
        ComponentKind::Marker,
        vec![NEUTRON.into(), SPIN.into()],
        action,
        vec![],
    )
    .expect("swap is unitary")
}

/// Detector `detector` absorbs a neutron in `trigger_mode` and flips to `in`.
/// An already-triggered detector meeting a trigger-mode neutron is rejected.
pub fn detector_coupling(detector: &str, trigger_mode: &str) -> Component {
    let absorbed = absorbed_in(detector);
    let action = swaps(&[(cfg(&[trigger_mode, READY]), cfg(&[&absorbed, TRIGGERED]))]);
    let guard = vec![vec![
        Some(trigger_mode.to_string()),
        Some(TRIGGERED.to_string()),
    ]];
    Component::new(
        detector,
        ComponentKind::Detector,
        vec![NEUTRON.into(), detector.into()],
        action,
        guard,
    )
    .expect("swap is unitary")
}

/// The experimenter looks at both detectors and remembers what was seen.
pub fn observer_coupling() -> Component {
    let action = swaps(&[
        (
            cfg(&[TRIGGERED, READY, READY]),
            cfg(&[TRIGGERED, READY, SAW_D1]),
        ),
        (
            cfg(&[READY, TRIGGERED, READY]),
            cfg(&[READY, TRIGGERED, SAW_D2]),
        ),
    ]);
    let guard = [SAW_D1, SAW_D2]
        .iter()
        .map(|s| vec![None, None, Some(s.to_string())])
        .collect();
    Component::new(
        "observer",
        ComponentKind::Observer,
        vec![D1.into(), D2.into(), OBSERVER.into()],
        action,
        guard,
    )
    .expect("swap is unitary")
}

/// Fresh environment bit `env_index` flips iff `target` reads `in`.
pub fn environment_coupling(env_index: usize, target: &str) -> Component {
    environment_coupling_on(env_index, target, TRIGGERED)
}

/// Controlled flip of environment bit `env_index` on `target == symbol`.
pub fn environment_coupling_on(env_index: usize, target: &str, symbol: &str) -> Component {
    let env = names::env(env_index);
    let action = swaps(&[(cfg(&[symbol, "0"]), cfg(&[symbol, "1"]))]);
    Component::new(
        format!("{env}<-{target}"),
        ComponentKind::Environment,
        vec![target.into(), env],
        action,
        vec![vec![None, Some("1".into())]],
    )
    .expect("swap is unitary")
}

fn sink(path_mode: &str, sink_symbol: &str, name: &str) -> Component {
    let action = swaps(&[(cfg(&[path_mode]), cfg(&[sink_symbol]))]);
    Component::new(
        name,
        ComponentKind::Absorber,
        vec![NEUTRON.into()],
        action,
        vec![vec![Some(sink_symbol.to_string())]],
    )
    .expect("swap is unitary")
}

/// Screen moving `path_mode` into the `absorbed` sink.
pub fn absorber(path_mode: &str) -> Component {
    sink(path_mode, ABSORBED, &format!("absorber({path_mode})"))
}

/// Open port: `path_mode` leaves the apparatus into the `escaped` sink.
pub fn escape(path_mode: &str) -> Component {
    sink(path_mode, ESCAPED, &format!("escape({path_mode})"))
}

/// The source emits the neutron toward the first splitter: `source ↔ up`.
pub fn emitter() -> Component {
    let action = swaps(&[(cfg(&[SOURCE]), cfg(&[UP]))]);
    Component::new(
        "source",
        ComponentKind::Source,
        vec![NEUTRON.into()],
        action,
        vec![],
    )
    .expect("swap is unitary")
}

/// Ordered list of components resolved against one layout.
#[derive(Debug, Clone)]
pub struct Circuit {
    layout: Arc<SubsystemLayout>,
    steps: Vec<Component>,
    compiled: Vec<CompiledStep>,
}

impl PartialEq for Circuit {
    fn eq(&self, other: &Self) -> bool {
        same_layout(&self.layout, &other.layout) && self.steps == other.steps
    }
}

impl Circuit {
    pub fn new(layout: Arc<SubsystemLayout>, steps: Vec<Component>) -> Result<Self, CircuitError> {
        let compiled = steps
            .iter()
            .map(|s| s.compile(&layout))
            .collect::<Result<_, _>>()?;
        Ok(Self {
            layout,
            steps,
            compiled,
        })
    }

    pub fn empty(layout: Arc<SubsystemLayout>) -> Self {
        Self {
            layout,
            steps: Vec::new(),
            compiled: Vec::new(),
        }
    }

    pub fn layout(&self) -> &Arc<SubsystemLayout> {
        &self.layout
    }

    pub fn steps(&self) -> &[Component] {
        &self.steps
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    fn check_layout(&self, state: &State) -> Result<(), CircuitError> {
        if same_layout(&self.layout, state.layout()) {
            Ok(())
        } else {
            Err(CircuitError::LayoutMismatch)
        }
    }

    /// Applies a single step.
    pub fn apply_step(&self, index: usize, state: &State) -> Result<State, CircuitError> {
        self.check_layout(state)?;
        self.compiled[index].apply(&self.layout, state)
    }

    /// Applies steps `range` in order.
    pub fn apply_range(
        &self,
        range: std::ops::Range<usize>,
        state: &State,
    ) -> Result<State, CircuitError> {
        self.check_layout(state)?;
        let mut current = state.clone();
        for step in &self.compiled[range] {
            current = step.apply(&self.layout, &current)?;
        }
        Ok(current)
    }

    pub fn apply(&self, state: &State) -> Result<State, CircuitError> {
        self.apply_range(0..self.len(), state)
    }

    /// Reversed order, each step conjugate-transposed.
    pub fn inverse(&self) -> Circuit {
        let steps: Vec<Component> = self.steps.iter().rev().map(Component::inverse).collect();
        Circuit::new(self.layout.clone(), steps).expect("inverse of a valid circuit compiles")
    }

    /// `self` followed by `other`.
    pub fn then(&self, other: &Circuit) -> Result<Circuit, CircuitError> {
        if !same_layout(&self.layout, &other.layout) {
            return Err(CircuitError::LayoutMismatch);
        }
        let mut steps = self.steps.clone();
        steps.extend(other.steps.iter().cloned());
        let mut compiled = self.compiled.clone();
        compiled.extend(other.compiled.iter().cloned());
        Ok(Circuit {
            layout: self.layout.clone(),
            steps,
            compiled,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::statevec::make_state;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    fn layout() -> Arc<SubsystemLayout> {
        Arc::new(
            SubsystemLayout::new([
                (
                    NEUTRON,
                    vec![UP, DOWN, SOURCE, "inD1", "inD2", ESCAPED, ABSORBED],
                ),
                (D1, vec![READY, TRIGGERED]),
                (D2, vec![READY, TRIGGERED]),
                (SPIN, vec![NO_MARK, M1, M2]),
                (OBSERVER, vec![READY, SAW_D1, SAW_D2]),
            ])
            .unwrap(),
        )
    }

    fn ket(l: &Arc<SubsystemLayout>, symbols: &[&str]) -> State {
        State::basis(l.clone(), l.configuration(symbols).unwrap()).unwrap()
    }

    fn run(l: &Arc<SubsystemLayout>, steps: Vec<Component>, s: &State) -> State {
        Circuit::new(l.clone(), steps).unwrap().apply(s).unwrap()
    }

    const READY_REST: [&str; 4] = [READY, READY, NO_MARK, READY];

    fn with_mode(mode: &str) -> Vec<&str> {
        let mut v = vec![mode];
        v.extend(READY_REST);
        v
    }

    #[test]
    fn balanced_splitter_on_down() {
        let l = layout();
        let out = run(&l, vec![balanced_splitter()], &ket(&l, &with_mode(DOWN)));
        let up = l.configuration(&with_mode(UP)).unwrap();
        let down = l.configuration(&with_mode(DOWN)).unwrap();
        let h = std::f64::consts::FRAC_1_SQRT_2;
        assert!((out.amplitude(&up) - c(h)).norm() < 1e-15);
        assert!((out.amplitude(&down) - c(-h)).norm() < 1e-15);
    }

    #[test]
    fn transparent_and_unbalanced_splitters() {
        let l = layout();
        let s = ket(&l, &with_mode(UP));
        let out = run(&l, vec![beam_splitter(c(1.0), c(0.0)).unwrap()], &s);
        assert_eq!(out, s);

        let split = beam_splitter(c(0.1f64.sqrt()), c(0.9f64.sqrt())).unwrap();
        let out = run(&l, vec![split], &s);
        let up = l.configuration(&with_mode(UP)).unwrap();
        let down = l.configuration(&with_mode(DOWN)).unwrap();
        assert!((out.amplitude(&up).re - 0.1f64.sqrt()).abs() < 1e-15);
        assert!((out.amplitude(&down).re - 0.9f64.sqrt()).abs() < 1e-15);

        assert!(matches!(
            beam_splitter(c(0.5), c(0.5)),
            Err(CircuitError::NonNormalizedSplitter(_))
        ));
    }

    #[test]
    fn mirror_swaps_modes() {
        let l = layout();
        assert_eq!(
            run(&l, vec![mirror()], &ket(&l, &with_mode(UP))),
            ket(&l, &with_mode(DOWN))
        );
        assert_eq!(
            run(&l, vec![mirror()], &ket(&l, &with_mode(DOWN))),
            ket(&l, &with_mode(UP))
        );
        let sym = make_state(
            l.clone(),
            [
                (l.configuration(&with_mode(UP)).unwrap(), c(1.0)),
                (l.configuration(&with_mode(DOWN)).unwrap(), c(1.0)),
            ],
        )
        .unwrap();
        assert_eq!(run(&l, vec![mirror()], &sym), sym);
    }

    #[test]
    fn non_unitary_and_open_actions_are_rejected() {
        let action = BTreeMap::from([
            (cfg(&[UP]), vec![(cfg(&[UP]), c(1.0))]),
            (cfg(&[DOWN]), vec![(cfg(&[UP]), c(1.0))]),
        ]);
        assert!(matches!(
            Component::new(
                "bad",
                ComponentKind::Custom,
                vec![NEUTRON.into()],
                action,
                vec![]
            ),
            Err(CircuitError::NotUnitary { .. })
        ));
        let action = BTreeMap::from([(cfg(&[UP]), vec![(cfg(&[DOWN]), c(1.0))])]);
        assert!(matches!(
            Component::new(
                "open",
                ComponentKind::Custom,
                vec![NEUTRON.into()],
                action,
                vec![]
            ),
            Err(CircuitError::OpenAction { .. })
        ));
    }

    #[test]
    fn marker_and_its_inverse() {
        let l = layout();
        let out = run(&l, vec![spin_marker()], &ket(&l, &with_mode(UP)));
        assert_eq!(out, ket(&l, &[UP, READY, READY, M1, READY]));

        let marker = spin_marker();
        for mode in [UP, DOWN, SOURCE, ABSORBED] {
            for mark in [NO_MARK, M1, M2] {
                let s = ket(&l, &[mode, READY, READY, mark, READY]);
                assert_eq!(run(&l, vec![marker.clone(), marker.inverse()], &s), s);
            }
        }
    }

    #[test]
    fn eraser_is_the_mirror_conjugated_inverse_marker() {
        let l = layout();
        for mode in [UP, DOWN] {
            for mark in [NO_MARK, M1, M2] {
                let s = ket(&l, &[mode, READY, READY, mark, READY]);
                let direct = run(&l, vec![spin_eraser()], &s);
                let composed = run(&l, vec![mirror(), spin_marker().inverse(), mirror()], &s);
                assert_eq!(direct, composed);
            }
        }
    }

    #[test]
    fn missing_targets_fail_at_compile_time() {
        let l = Arc::new(SubsystemLayout::new([(NEUTRON, vec![UP, DOWN])]).unwrap());
        assert!(matches!(
            Circuit::new(l.clone(), vec![spin_marker()]),
            Err(CircuitError::Layout { .. })
        ));
        assert!(matches!(
            Circuit::new(l.clone(), vec![detector_coupling(D1, UP)]),
            Err(CircuitError::Layout { .. })
        ));
        assert!(matches!(
            Circuit::new(l.clone(), vec![observer_coupling()]),
            Err(CircuitError::Layout { .. })
        ));
        // the sink symbol is missing from this alphabet
        assert!(matches!(
            Circuit::new(l, vec![absorber(UP)]),
            Err(CircuitError::Layout { .. })
        ));
    }

    #[test]
    fn detector_coupling_examples() {
        let l = layout();
        let alpha = c(0.6);
        let beta = Complex64::new(0.0, 0.8);
        let steps = vec![
            beam_splitter(alpha, beta).unwrap(),
            detector_coupling(D1, UP),
            detector_coupling(D2, DOWN),
        ];
        let out = run(&l, steps, &ket(&l, &with_mode(UP)));
        let a = l
            .configuration(&["inD1", TRIGGERED, READY, NO_MARK, READY])
            .unwrap();
        let b = l
            .configuration(&["inD2", READY, TRIGGERED, NO_MARK, READY])
            .unwrap();
        assert_eq!(out.len(), 2);
        assert!((out.amplitude(&a) - alpha).norm() < 1e-15);
        assert!((out.amplitude(&b) - beta).norm() < 1e-15);

        let triggered = ket(&l, &[UP, TRIGGERED, READY, NO_MARK, READY]);
        let circuit = Circuit::new(l.clone(), vec![detector_coupling(D1, UP)]).unwrap();
        assert!(matches!(
            circuit.apply(&triggered),
            Err(CircuitError::Rejected { .. })
        ));

        let steps = vec![
            beam_splitter(c(1.0), c(0.0)).unwrap(),
            detector_coupling(D1, UP),
            detector_coupling(D2, DOWN),
        ];
        let out = run(&l, steps, &ket(&l, &with_mode(UP)));
        assert_eq!(out.probability(D2, READY).unwrap(), 1.0);
    }

    #[test]
    fn observer_records_detector_pair() {
        let l = layout();
        let h = c(std::f64::consts::FRAC_1_SQRT_2);
        let steps = vec![
            balanced_splitter(),
            detector_coupling(D1, UP),
            detector_coupling(D2, DOWN),
            observer_coupling(),
        ];
        let out = run(&l, steps, &ket(&l, &with_mode(UP)));
        let a = l
            .configuration(&["inD1", TRIGGERED, READY, NO_MARK, SAW_D1])
            .unwrap();
        let b = l
            .configuration(&["inD2", READY, TRIGGERED, NO_MARK, SAW_D2])
            .unwrap();
        assert!((out.amplitude(&a) - h).norm() < 1e-15);
        assert!((out.amplitude(&b) - h).norm() < 1e-15);

        let single = run(
            &l,
            vec![detector_coupling(D1, UP), observer_coupling()],
            &ket(&l, &with_mode(UP)),
        );
        assert_eq!(
            single,
            ket(&l, &["inD1", TRIGGERED, READY, NO_MARK, SAW_D1])
        );

        let twice = Circuit::new(l.clone(), vec![observer_coupling()]).unwrap();
        assert!(matches!(
            twice.apply(&single),
            Err(CircuitError::Rejected { .. })
        ));
    }

    #[test]
    fn absorber_examples() {
        let l = layout();
        let sym = make_state(
            l.clone(),
            [
                (l.configuration(&with_mode(UP)).unwrap(), c(1.0)),
                (l.configuration(&with_mode(DOWN)).unwrap(), c(1.0)),
            ],
        )
        .unwrap();
        let out = run(&l, vec![absorber(UP)], &sym);
        assert!((out.probability(NEUTRON, ABSORBED).unwrap() - 0.5).abs() < 1e-15);
        assert!((out.probability(NEUTRON, DOWN).unwrap() - 0.5).abs() < 1e-15);
        let down = ket(&l, &with_mode(DOWN));
        assert_eq!(run(&l, vec![absorber(UP)], &down), down);
    }

    #[test]
    fn fig3_chain_closes_to_up() {
        let l = layout();
        let steps = vec![balanced_splitter(), mirror(), balanced_splitter()];
        let out = run(&l, steps, &ket(&l, &with_mode(UP)));
        let up = l.configuration(&with_mode(UP)).unwrap();
        assert!((out.amplitude(&up) - c(1.0)).norm() < 1e-12);
        assert_eq!(out.len(), 1);
    }

    #[test]
    fn empty_circuit_is_identity() {
        let l = layout();
        let s = ket(&l, &with_mode(DOWN));
        assert_eq!(Circuit::empty(l.clone()).apply(&s).unwrap(), s);
    }

    #[test]
    fn inversion_examples() {
        let l = layout();
        let circuit = Circuit::new(
            l.clone(),
            vec![
                emitter(),
                beam_splitter(c(0.6), c(0.8)).unwrap(),
                detector_coupling(D1, UP),
                detector_coupling(D2, DOWN),
                observer_coupling(),
            ],
        )
        .unwrap();
        let start = ket(&l, &with_mode(SOURCE));
        let forward = circuit.apply(&start).unwrap();
        let back = circuit.inverse().apply(&forward).unwrap();
        assert!(back.max_amplitude_error(&start).unwrap() < 1e-12);
        assert_eq!(circuit.inverse().inverse(), circuit);

        let pair = Circuit::new(
            l.clone(),
            vec![balanced_splitter(), balanced_splitter().inverse()],
        )
        .unwrap();
        let s = ket(&l, &with_mode(DOWN));
        assert!(pair.apply(&s).unwrap().max_amplitude_error(&s).unwrap() < 1e-15);
    }

    #[test]
    fn environment_bit_reuse_is_rejected() {
        let l = Arc::new(
            SubsystemLayout::new([(D1, vec![READY, TRIGGERED]), ("env0", vec!["0", "1"])]).unwrap(),
        );
        let circuit = Circuit::new(
            l.clone(),
            vec![environment_coupling(0, D1), environment_coupling(0, D1)],
        )
        .unwrap();
        let s = ket(&l, &[TRIGGERED, "0"]);
        assert!(matches!(
            circuit.apply(&s),
            Err(CircuitError::Rejected { .. })
        ));
        assert_eq!(
            circuit.apply_step(0, &s).unwrap(),
            ket(&l, &[TRIGGERED, "1"])
        );
    }
}
