// SPDX-License-Identifier: Apache-2.0

//! Preferred-basis world decomposition and branch-tree bookkeeping.
//!
//! A world is a (possibly coarse-grained) configuration of the pointer
//! subsystems. [`track`] runs a circuit step by step, decomposes after each
//! step and links worlds across steps by amplitude flow: child `c` descends
//! from parent `p` when the step maps `p`'s component onto label `c`.

use std::collections::{BTreeMap, HashMap};
use std::sync::Arc;

use num_complex::Complex64;
use serde::Serialize;
use thiserror::Error;

use crate::circuit::{Circuit, CircuitError};
use crate::statevec::{make_state, Configuration, State, StateError, SubsystemLayout};

/// Worlds with measure at or below this do not exist.
pub const MEASURE_THRESHOLD: f64 = 1e-14;

/// Conservation tolerance for measures.
pub const MEASURE_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum WorldsError {
    #[error("children carry measure {children}, parent has {parent}")]
    MeasureLeak { parent: f64, children: f64 },
    #[error("grouping for `{subsystem}` does not partition its alphabet")]
    BadGrouping { subsystem: String },
    #[error("step {step} is outside the tree (0..={last})")]
    StepOutOfRange { step: usize, last: usize },
    #[error(transparent)]
    State(#[from] StateError),
    #[error(transparent)]
    Circuit(#[from] CircuitError),
}

/// Which subsystems label a world, and which of their symbols are lumped together.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct WorldBasisSpec {
    pointer_subsystems: Option<Vec<String>>,
    coarse_graining: BTreeMap<String, Vec<Vec<String>>>,
}

impl WorldBasisSpec {
    /// Every subsystem is a pointer; no grouping.
    pub fn all() -> Self {
        Self::default()
    }

    pub fn pointers<S: Into<String>>(names: impl IntoIterator<Item = S>) -> Self {
        Self {
            pointer_subsystems: Some(names.into_iter().map(Into::into).collect()),
            coarse_graining: BTreeMap::new(),
        }
    }

    /// Treats each group of `subsystem`'s symbols as one world label.
    pub fn with_grouping<S: Into<String>>(
        mut self,
        subsystem: impl Into<String>,
        groups: impl IntoIterator<Item = Vec<S>>,
    ) -> Self {
        let groups = groups
            .into_iter()
            .map(|g| g.into_iter().map(Into::into).collect())
            .collect();
        self.coarse_graining.insert(subsystem.into(), groups);
        self
    }

    fn resolve(&self, layout: &SubsystemLayout) -> Result<LabelMap, WorldsError> {
        let positions: Vec<usize> = match &self.pointer_subsystems {
            None => (0..layout.len()).collect(),
            Some(names) => {
                let refs: Vec<&str> = names.iter().map(String::as_str).collect();
                layout.sub_layout(&refs)?.1
            }
        };
        let mut label_subsystems = Vec::new();
        let mut symbol_maps = Vec::new();
        for &pos in &positions {
            let sub = &layout.subsystems()[pos];
            match self.coarse_graining.get(sub.name()) {
                None => {
                    label_subsystems.push((sub.name().to_string(), sub.alphabet().to_vec()));
                    symbol_maps.push((0..sub.alphabet().len() as u8).collect());
                }
                Some(groups) => {
                    let mut map = vec![u8::MAX; sub.alphabet().len()];
                    for (g, group) in groups.iter().enumerate() {
                        for symbol in group {
                            let idx = sub.symbol_index(symbol).ok_or_else(|| {
                                WorldsError::BadGrouping {
                                    subsystem: sub.name().to_string(),
                                }
                            })?;
                            if map[idx as usize] != u8::MAX {
                                return Err(WorldsError::BadGrouping {
                                    subsystem: sub.name().to_string(),
                                });
                            }
                            map[idx as usize] = g as u8;
                        }
                    }
                    if map.contains(&u8::MAX) || groups.iter().any(Vec::is_empty) {
                        return Err(WorldsError::BadGrouping {
                            subsystem: sub.name().to_string(),
                        });
                    }
                    let group_names = groups.iter().map(|g| g.join("+")).collect::<Vec<_>>();
                    label_subsystems.push((sub.name().to_string(), group_names));
                    symbol_maps.push(map);
                }
            }
        }
        Ok(LabelMap {
            layout: Arc::new(SubsystemLayout::new_labels(label_subsystems)?),
            positions,
            symbol_maps,
        })
    }
}

struct LabelMap {
    layout: Arc<SubsystemLayout>,
    positions: Vec<usize>,
    symbol_maps: Vec<Vec<u8>>,
}

impl LabelMap {
    fn label(&self, config: &Configuration) -> Configuration {
        let symbols = config.symbols();
        Configuration(
            self.positions
                .iter()
                .zip(&self.symbol_maps)
                .map(|(&p, map)| map[symbols[p] as usize])
                .collect(),
        )
    }
}

/// One world: `amplitude · component` is the part of the state carrying `label`.
#[derive(Debug, Clone, PartialEq)]
pub struct Branch {
    pub label: Configuration,
    pub label_text: String,
    pub amplitude: Complex64,
    pub measure: f64,
    /// Normalized component |ψ_i⟩ over the full layout.
    pub component: State,
}

pub fn measure_of_existence(branch: &Branch) -> f64 {
    branch.amplitude.norm_sqr()
}

/// Splits `state` into worlds, one per occupied label, in label order.
pub fn decompose(state: &State, spec: &WorldBasisSpec) -> Result<Vec<Branch>, WorldsError> {
    let labels = spec.resolve(state.layout())?;
    decompose_with(state, &labels)
}

fn decompose_with(state: &State, labels: &LabelMap) -> Result<Vec<Branch>, WorldsError> {
    let mut groups: BTreeMap<Configuration, Vec<(Configuration, Complex64)>> = BTreeMap::new();
    for (config, amp) in state.iter() {
        groups
            .entry(labels.label(config))
            .or_default()
            .push((config.clone(), *amp));
    }
    let mut branches = Vec::with_capacity(groups.len());
    for (label, terms) in groups {
        let measure: f64 = terms.iter().map(|(_, a)| a.norm_sqr()).sum();
        let amplitude = if terms.len() == 1 {
            terms[0].1
        } else {
            // sub-vector norm carrying the phase of the largest term
            let lead =
                terms.iter().fold(
                    terms[0].1,
                    |best, (_, a)| if a.norm() > best.norm() { *a } else { best },
                );
            Complex64::from_polar(measure.sqrt(), lead.arg())
        };
        let component = make_state(
            state.layout().clone(),
            terms.iter().map(|(c, a)| (c.clone(), a / amplitude)),
        )?;
        branches.push(Branch {
            label_text: labels.layout.label(&label),
            label,
            amplitude,
            measure,
            component,
        });
    }
    Ok(branches)
}

/// `Σ α_i |ψ_i⟩`.
pub fn reconstruct(layout: Arc<SubsystemLayout>, branches: &[Branch]) -> Result<State, StateError> {
    make_state(
        layout,
        branches.iter().flat_map(|b| {
            b.component
                .iter()
                .map(move |(c, a)| (c.clone(), a * b.amplitude))
        }),
    )
}

/// Probability postulate: child `i` is found with `μ_i / μ`.
pub fn split_probabilities(parent: &Branch, children: &[Branch]) -> Result<Vec<f64>, WorldsError> {
    let total: f64 = children.iter().map(|c| c.measure).sum();
    if (total - parent.measure).abs() > MEASURE_TOLERANCE {
        return Err(WorldsError::MeasureLeak {
            parent: parent.measure,
            children: total,
        });
    }
    Ok(children
        .iter()
        .map(|c| c.measure / parent.measure)
        .collect())
}

/// Amplitude flow from a parent world into a child world across one step.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Link {
    pub parent: usize,
    pub child: usize,
    /// Measure carried from parent to child before interference with other parents.
    pub flow: f64,
    /// Share of the parent's outgoing flow; equals `μ_child/μ_parent` for plain splits.
    pub probability: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Level {
    /// Component applied to reach this level; `None` for the initial state.
    pub step: Option<String>,
    pub branches: Vec<Branch>,
    /// Links from the previous level.
    pub links: Vec<Link>,
}

impl Level {
    pub fn total_measure(&self) -> f64 {
        self.branches.iter().map(|b| b.measure).sum()
    }

    pub fn parents_of(&self, child: usize) -> impl Iterator<Item = &Link> {
        self.links.iter().filter(move |l| l.child == child)
    }

    pub fn children_of(&self, parent: usize) -> impl Iterator<Item = &Link> {
        self.links.iter().filter(move |l| l.parent == parent)
    }

    /// Parents with more than one child.
    pub fn splits(&self) -> Vec<usize> {
        let mut counts: BTreeMap<usize, usize> = BTreeMap::new();
        for l in &self.links {
            *counts.entry(l.parent).or_default() += 1;
        }
        counts
            .into_iter()
            .filter(|&(_, n)| n > 1)
            .map(|(p, _)| p)
            .collect()
    }

    /// Children with more than one parent (interference).
    pub fn merges(&self) -> Vec<usize> {
        let mut counts: BTreeMap<usize, usize> = BTreeMap::new();
        for l in &self.links {
            *counts.entry(l.child).or_default() += 1;
        }
        counts
            .into_iter()
            .filter(|&(_, n)| n > 1)
            .map(|(c, _)| c)
            .collect()
    }
}

/// Sequence of world labels from the root to one leaf.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct History {
    pub labels: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WorldTree {
    label_layout: Arc<SubsystemLayout>,
    levels: Vec<Level>,
    final_state: State,
}

/// Runs `circuit` on `initial`, decomposing into worlds after every step.
pub fn track(
    circuit: &Circuit,
    initial: &State,
    spec: &WorldBasisSpec,
) -> Result<WorldTree, WorldsError> {
    let labels = spec.resolve(initial.layout())?;
    let mut levels = vec![Level {
        step: None,
        branches: decompose_with(initial, &labels)?,
        links: Vec::new(),
    }];
    let mut state = initial.clone();
    for (i, component) in circuit.steps().iter().enumerate() {
        let next = circuit.apply_step(i, &state)?;
        let branches = decompose_with(&next, &labels)?;
        let index: HashMap<&Configuration, usize> = branches
            .iter()
            .enumerate()
            .map(|(k, b)| (&b.label, k))
            .collect();

        let parents = &levels.last().expect("root level").branches;
        let mut links = Vec::new();
        for (p, parent) in parents.iter().enumerate() {
            let part = state.restrict(|c| labels.label(c) == parent.label);
            let image = circuit.apply_step(i, &part)?;
            let mut flows: BTreeMap<usize, f64> = BTreeMap::new();
            for (config, amp) in image.iter() {
                if let Some(&k) = index.get(&labels.label(config)) {
                    *flows.entry(k).or_default() += amp.norm_sqr();
                }
            }
            let outgoing: f64 = flows.values().sum();
            for (child, flow) in flows {
                if flow > 0.0 {
                    links.push(Link {
                        parent: p,
                        child,
                        flow,
                        probability: flow / outgoing,
                    });
                }
            }
        }
        levels.push(Level {
            step: Some(component.display_name()),
            branches,
            links,
        });
        state = next;
    }
    Ok(WorldTree {
        label_layout: labels.layout,
        levels,
        final_state: state,
    })
}

/// Worlds with measure above [`MEASURE_THRESHOLD`] after `step` steps.
pub fn count_worlds(tree: &WorldTree, step: usize) -> Result<usize, WorldsError> {
    Ok(tree
        .level(step)?
        .branches
        .iter()
        .filter(|b| b.measure > MEASURE_THRESHOLD)
        .count())
}

impl WorldTree {
    pub fn levels(&self) -> &[Level] {
        &self.levels
    }

    /// Level after `step` steps (0 is the initial state).
    pub fn level(&self, step: usize) -> Result<&Level, WorldsError> {
        self.levels.get(step).ok_or(WorldsError::StepOutOfRange {
            step,
            last: self.levels.len() - 1,
        })
    }

    pub fn leaves(&self) -> &[Branch] {
        &self.levels.last().expect("root level").branches
    }

    pub fn final_state(&self) -> &State {
        &self.final_state
    }

    pub fn label_layout(&self) -> &Arc<SubsystemLayout> {
        &self.label_layout
    }

    /// World counts at every level.
    pub fn world_counts(&self) -> Vec<usize> {
        (0..self.levels.len())
            .map(|s| count_worlds(self, s).expect("in range"))
            .collect()
    }

    /// Story of branch `branch` at `step`, following the heaviest parent at merges.
    pub fn history(&self, step: usize, branch: usize) -> Result<History, WorldsError> {
        let mut labels = Vec::with_capacity(step + 1);
        let mut current = branch;
        for s in (0..=step).rev() {
            let level = self.level(s)?;
            labels.push(level.branches[current].label_text.clone());
            if s > 0 {
                let heaviest =
                    level
                        .parents_of(current)
                        .fold(None::<&Link>, |best, l| match best {
                            Some(b) if b.flow >= l.flow => Some(b),
                            _ => Some(l),
                        });
                current = heaviest.expect("every child has a parent").parent;
            }
        }
        labels.reverse();
        Ok(History { labels })
    }

    pub fn summary(&self) -> TreeSummary {
        TreeSummary {
            world_counts: self.world_counts(),
            levels: self
                .levels
                .iter()
                .enumerate()
                .map(|(i, level)| LevelSummary {
                    step: i,
                    component: level.step.clone(),
                    total_measure: level.total_measure(),
                    branches: level
                        .branches
                        .iter()
                        .enumerate()
                        .map(|(k, b)| BranchRecord {
                            label: b.label_text.clone(),
                            measure: b.measure,
                            parents: level
                                .parents_of(k)
                                .map(|l| ParentRecord {
                                    parent: l.parent,
                                    split_probability: l.probability,
                                })
                                .collect(),
                        })
                        .collect(),
                })
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TreeSummary {
    pub world_counts: Vec<usize>,
    pub levels: Vec<LevelSummary>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LevelSummary {
    pub step: usize,
    pub component: Option<String>,
    pub total_measure: f64,
    pub branches: Vec<BranchRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BranchRecord {
    pub label: String,
    pub measure: f64,
    pub parents: Vec<ParentRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ParentRecord {
    pub parent: usize,
    pub split_probability: f64,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::names::*;
    use crate::circuit::{balanced_splitter, beam_splitter, mirror};

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    fn mode_layout() -> Arc<SubsystemLayout> {
        Arc::new(SubsystemLayout::new([(NEUTRON, vec![UP, DOWN, ABSORBED])]).unwrap())
    }

    fn ket(l: &Arc<SubsystemLayout>, mode: &str) -> State {
        State::basis(l.clone(), l.configuration(&[mode]).unwrap()).unwrap()
    }

    fn superposition(l: &Arc<SubsystemLayout>, terms: &[(&str, Complex64)]) -> State {
        make_state(
            l.clone(),
            terms
                .iter()
                .map(|(m, a)| (l.configuration(&[m]).unwrap(), *a)),
        )
        .unwrap()
    }

    #[test]
    fn decompose_eq5_state() {
        let l = mode_layout();
        let s = superposition(&l, &[(UP, c(1.0)), (DOWN, c(1.0))]);
        let branches = decompose(&s, &WorldBasisSpec::all()).unwrap();
        assert_eq!(branches.len(), 2);
        for b in &branches {
            assert!((b.measure - 0.5).abs() < 1e-15);
        }
        let single = decompose(&ket(&l, UP), &WorldBasisSpec::all()).unwrap();
        assert_eq!(single.len(), 1);
        assert_eq!(single[0].measure, 1.0);
    }

    #[test]
    fn nonlocal_decomposition_is_not_a_world_basis() {
        // the two components of the alternative decomposition, summed, give back the state inside the interferometer
        let l = mode_layout();
        let k = 1.0 / 8f64.sqrt();
        let a = [(UP, Complex64::new(k, k)), (DOWN, Complex64::new(k, -k))];
        let b = [(UP, Complex64::new(k, -k)), (DOWN, Complex64::new(k, k))];
        let mut terms: Vec<(&str, Complex64)> = a.to_vec();
        terms.extend(b);
        let state = superposition(&l, &terms);
        let branches = decompose(&state, &WorldBasisSpec::all()).unwrap();
        let labels: Vec<&str> = branches.iter().map(|b| b.label_text.as_str()).collect();
        assert_eq!(labels, vec!["neutron=up", "neutron=down"]);
        for br in &branches {
            assert!((br.amplitude - c(std::f64::consts::FRAC_1_SQRT_2)).norm() < 1e-15);
        }
    }

    #[test]
    fn measure_examples() {
        let l = mode_layout();
        let s = superposition(&l, &[(UP, c(0.1f64.sqrt())), (DOWN, c(0.9f64.sqrt()))]);
        let b = decompose(&s, &WorldBasisSpec::all()).unwrap();
        assert!((measure_of_existence(&b[0]) - 0.1).abs() < 1e-15);
        assert!((measure_of_existence(&b[1]) - 0.9).abs() < 1e-15);
    }

    #[test]
    fn split_probability_examples() {
        let l = mode_layout();
        let root = decompose(&ket(&l, UP), &WorldBasisSpec::all())
            .unwrap()
            .remove(0);
        let s = superposition(&l, &[(UP, c(0.1f64.sqrt())), (DOWN, c(0.9f64.sqrt()))]);
        let children = decompose(&s, &WorldBasisSpec::all()).unwrap();
        let p = split_probabilities(&root, &children).unwrap();
        assert!((p[0] - 0.1).abs() < 1e-15 && (p[1] - 0.9).abs() < 1e-15);
        assert_eq!(
            split_probabilities(&root, std::slice::from_ref(&root)).unwrap(),
            vec![1.0]
        );
        assert!(matches!(
            split_probabilities(&root, &children[..1]),
            Err(WorldsError::MeasureLeak { .. })
        ));
    }

    #[test]
    fn second_level_split_of_one_branch() {
        // split the up branch inside the interferometer again; compare the tree against the full state
        let l = mode_layout();
        let circuit = Circuit::new(
            l.clone(),
            vec![
                balanced_splitter(),
                crate::circuit::absorber(DOWN),
                balanced_splitter(),
            ],
        )
        .unwrap();
        let tree = track(&circuit, &ket(&l, UP), &WorldBasisSpec::all()).unwrap();
        let level = tree.level(3).unwrap();
        let up_parent = tree
            .level(2)
            .unwrap()
            .branches
            .iter()
            .position(|b| b.label_text == "neutron=up")
            .unwrap();
        let probs: Vec<f64> = level
            .children_of(up_parent)
            .map(|l| l.probability)
            .collect();
        assert_eq!(probs.len(), 2);
        for p in probs {
            assert!((p - 0.5).abs() < 1e-12);
        }
        let full = tree.final_state();
        assert!((full.probability(NEUTRON, UP).unwrap() - 0.25).abs() < 1e-12);
        assert!((full.probability(NEUTRON, DOWN).unwrap() - 0.25).abs() < 1e-12);
    }

    #[test]
    fn fig3_tree_splits_and_merges() {
        let l = mode_layout();
        let circuit = Circuit::new(
            l.clone(),
            vec![balanced_splitter(), mirror(), balanced_splitter()],
        )
        .unwrap();
        let tree = track(&circuit, &ket(&l, UP), &WorldBasisSpec::all()).unwrap();
        assert_eq!(tree.world_counts(), vec![1, 2, 2, 1]);
        assert_eq!(tree.level(1).unwrap().splits(), vec![0]);
        assert_eq!(tree.level(3).unwrap().merges(), vec![0]);
        for level in tree.levels() {
            assert!((level.total_measure() - 1.0).abs() < 1e-12);
        }
        assert_eq!(count_worlds(&tree, 2).unwrap(), 2);
        assert!(matches!(
            count_worlds(&tree, 9),
            Err(WorldsError::StepOutOfRange { .. })
        ));
        let story = tree.history(3, 0).unwrap();
        assert_eq!(story.labels.len(), 4);
        assert_eq!(story.labels[3], "neutron=up");
    }

    #[test]
    fn identity_circuit_has_no_splits() {
        let l = mode_layout();
        let circuit =
            Circuit::new(l.clone(), vec![beam_splitter(c(1.0), c(0.0)).unwrap()]).unwrap();
        let tree = track(&circuit, &ket(&l, DOWN), &WorldBasisSpec::all()).unwrap();
        assert_eq!(tree.world_counts(), vec![1, 1]);
        assert!(tree.level(1).unwrap().splits().is_empty());
    }

    #[test]
    fn coarse_graining_sums_measures() {
        let l = mode_layout();
        let s = superposition(&l, &[(UP, c(1.0)), (DOWN, c(2.0)), (ABSORBED, c(2.0))]);
        let fine = decompose(&s, &WorldBasisSpec::all()).unwrap();
        let spec =
            WorldBasisSpec::all().with_grouping(NEUTRON, vec![vec![UP, DOWN], vec![ABSORBED]]);
        let coarse = decompose(&s, &spec).unwrap();
        assert_eq!(coarse.len(), 2);
        let merged = fine[0].measure + fine[1].measure;
        assert!((coarse[0].measure - merged).abs() < 1e-15);
        assert_eq!(coarse[0].label_text, "neutron=up+down");
        let back = reconstruct(l.clone(), &coarse).unwrap();
        assert!(back.max_amplitude_error(&s).unwrap() < 1e-15);

        let bad = WorldBasisSpec::all().with_grouping(NEUTRON, vec![vec![UP], vec![DOWN]]);
        assert!(matches!(
            decompose(&s, &bad),
            Err(WorldsError::BadGrouping { .. })
        ));
    }
}
