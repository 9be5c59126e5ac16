// SPDX-License-Identifier: Apache-2.0

//! Sparse product-basis states over named finite subsystems.
//!
//! A [`State`] maps [`Configuration`]s (one symbol per subsystem) to complex
//! amplitudes. Only occupied configurations are stored, so a layout with many
//! two-symbol environment bits stays cheap as long as few terms are populated.
//! Reduced states are [`DensityMatrix`] values obtained by [`partial_trace`].

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use thiserror::Error;

/// Amplitudes with magnitude below this are dropped after every operator application.
pub const PRUNE_THRESHOLD: f64 = 1e-14;

/// Tolerance for normalization and hermiticity checks.
pub const NORM_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StateError {
    #[error("duplicate subsystem name `{0}`")]
    DuplicateSubsystem(String),
    #[error("subsystem `{name}` needs at least two symbols, got {count}")]
    AlphabetTooSmall { name: String, count: usize },
    #[error("duplicate symbol `{symbol}` in subsystem `{name}`")]
    DuplicateSymbol { name: String, symbol: String },
    #[error("unknown subsystem `{0}`")]
    UnknownSubsystem(String),
    #[error("symbol `{symbol}` is not in the alphabet of `{subsystem}`")]
    InvalidSymbol { subsystem: String, symbol: String },
    #[error("configuration has {got} symbols, layout has {expected} subsystems")]
    ConfigurationArity { expected: usize, got: usize },
    #[error("amplitudes sum to the zero vector")]
    DegenerateState,
    #[error("states or matrices are defined over different layouts")]
    LayoutMismatch,
    #[error("partial trace needs at least one kept subsystem")]
    EmptyKeepSet,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Subsystem {
    name: String,
    alphabet: Vec<String>,
}

impl Subsystem {
    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn alphabet(&self) -> &[String] {
        &self.alphabet
    }

    pub fn symbol_index(&self, symbol: &str) -> Option<u8> {
        self.alphabet
            .iter()
            .position(|s| s == symbol)
            .map(|i| i as u8)
    }
}

/// Ordered list of named subsystems with their symbol alphabets.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SubsystemLayout {
    subsystems: Vec<Subsystem>,
}

impl SubsystemLayout {
    pub fn new<I, N, A, S>(subsystems: I) -> Result<Self, StateError>
    where
        I: IntoIterator<Item = (N, A)>,
        N: Into<String>,
        A: IntoIterator<Item = S>,
        S: Into<String>,
    {
        Self::build(subsystems, 2)
    }

    /// Label layouts for coarse-grained world bases may collapse an alphabet
    /// to a single group, so the two-symbol minimum is relaxed there.
    pub(crate) fn new_labels<I, N, A, S>(subsystems: I) -> Result<Self, StateError>
    where
        I: IntoIterator<Item = (N, A)>,
        N: Into<String>,
        A: IntoIterator<Item = S>,
        S: Into<String>,
    {
        Self::build(subsystems, 1)
    }

    fn build<I, N, A, S>(subsystems: I, min_symbols: usize) -> Result<Self, StateError>
    where
        I: IntoIterator<Item = (N, A)>,
        N: Into<String>,
        A: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let mut out: Vec<Subsystem> = Vec::new();
        for (name, alphabet) in subsystems {
            let name = name.into();
            if out.iter().any(|s| s.name == name) {
                return Err(StateError::DuplicateSubsystem(name));
            }
            let alphabet: Vec<String> = alphabet.into_iter().map(Into::into).collect();
            if alphabet.len() < min_symbols {
                return Err(StateError::AlphabetTooSmall {
                    name,
                    count: alphabet.len(),
                });
            }
            let mut seen = BTreeSet::new();
            for symbol in &alphabet {
                if !seen.insert(symbol.as_str()) {
                    return Err(StateError::DuplicateSymbol {
                        name,
                        symbol: symbol.clone(),
                    });
                }
            }
            assert!(alphabet.len() <= u8::MAX as usize, "alphabet too large");
            out.push(Subsystem { name, alphabet });
        }
        Ok(Self { subsystems: out })
    }

    pub fn len(&self) -> usize {
        self.subsystems.len()
    }

    pub fn is_empty(&self) -> bool {
        self.subsystems.is_empty()
    }

    pub fn subsystems(&self) -> &[Subsystem] {
        &self.subsystems
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.subsystems.iter().position(|s| s.name == name)
    }

    pub fn subsystem(&self, name: &str) -> Result<&Subsystem, StateError> {
        self.index_of(name)
            .map(|i| &self.subsystems[i])
            .ok_or_else(|| StateError::UnknownSubsystem(name.to_string()))
    }

    /// Resolves a `(subsystem, symbol)` pair into `(position, symbol index)`.
    pub fn resolve(&self, subsystem: &str, symbol: &str) -> Result<(usize, u8), StateError> {
        let pos = self
            .index_of(subsystem)
            .ok_or_else(|| StateError::UnknownSubsystem(subsystem.to_string()))?;
        let sym =
            self.subsystems[pos]
                .symbol_index(symbol)
                .ok_or_else(|| StateError::InvalidSymbol {
                    subsystem: subsystem.to_string(),
                    symbol: symbol.to_string(),
                })?;
        Ok((pos, sym))
    }

    /// Builds a configuration from one symbol per subsystem, in layout order.
    pub fn configuration(&self, symbols: &[&str]) -> Result<Configuration, StateError> {
        if symbols.len() != self.len() {
            return Err(StateError::ConfigurationArity {
                expected: self.len(),
                got: symbols.len(),
            });
        }
        symbols
            .iter()
            .zip(&self.subsystems)
            .map(|(sym, sub)| {
                sub.symbol_index(sym)
                    .ok_or_else(|| StateError::InvalidSymbol {
                        subsystem: sub.name.clone(),
                        symbol: sym.to_string(),
                    })
            })
            .collect::<Result<Vec<u8>, _>>()
            .map(Configuration)
    }

    /// Returns `base` with the named subsystems reassigned.
    pub fn with_symbols(
        &self,
        base: &Configuration,
        assignments: &[(&str, &str)],
    ) -> Result<Configuration, StateError> {
        self.check(base)?;
        let mut out = base.clone();
        for (sub, sym) in assignments {
            let (pos, idx) = self.resolve(sub, sym)?;
            out.0[pos] = idx;
        }
        Ok(out)
    }

    pub fn check(&self, config: &Configuration) -> Result<(), StateError> {
        if config.0.len() != self.len() {
            return Err(StateError::ConfigurationArity {
                expected: self.len(),
                got: config.0.len(),
            });
        }
        for (sub, &idx) in self.subsystems.iter().zip(config.0.iter()) {
            if idx as usize >= sub.alphabet.len() {
                return Err(StateError::InvalidSymbol {
                    subsystem: sub.name.clone(),
                    symbol: format!("#{idx}"),
                });
            }
        }
        Ok(())
    }

    pub fn symbol<'a>(&'a self, config: &Configuration, subsystem: &str) -> Option<&'a str> {
        let pos = self.index_of(subsystem)?;
        let sub = &self.subsystems[pos];
        config
            .0
            .get(pos)
            .and_then(|&i| sub.alphabet.get(i as usize))
            .map(String::as_str)
    }

    /// Human-readable `name=symbol,...` label for a configuration.
    pub fn label(&self, config: &Configuration) -> String {
        self.subsystems
            .iter()
            .zip(config.0.iter())
            .map(|(sub, &i)| format!("{}={}", sub.name, sub.alphabet[i as usize]))
            .collect::<Vec<_>>()
            .join(",")
    }

    /// Sub-layout over `keep` (in layout order) and the kept positions.
    pub fn sub_layout(&self, keep: &[&str]) -> Result<(SubsystemLayout, Vec<usize>), StateError> {
        for name in keep {
            if self.index_of(name).is_none() {
                return Err(StateError::UnknownSubsystem(name.to_string()));
            }
        }
        let positions: Vec<usize> = (0..self.len())
            .filter(|&i| keep.contains(&self.subsystems[i].name.as_str()))
            .collect();
        let subsystems = positions
            .iter()
            .map(|&i| self.subsystems[i].clone())
            .collect();
        Ok((SubsystemLayout { subsystems }, positions))
    }
}

/// One symbol index per subsystem, in layout order.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Configuration(pub(crate) Vec<u8>);

impl Configuration {
    pub fn symbols(&self) -> &[u8] {
        &self.0
    }

    pub(crate) fn project(&self, positions: &[usize]) -> Configuration {
        Configuration(positions.iter().map(|&p| self.0[p]).collect())
    }
}

impl fmt::Display for Configuration {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.0.iter().map(|i| i.to_string()).collect();
        write!(f, "[{}]", parts.join(" "))
    }
}

/// Normalized sparse state vector.
#[derive(Debug, Clone, PartialEq)]
pub struct State {
    layout: Arc<SubsystemLayout>,
    amplitudes: BTreeMap<Configuration, Complex64>,
}

/// Builds a normalized state; duplicate configurations are summed first.
pub fn make_state<I>(layout: Arc<SubsystemLayout>, terms: I) -> Result<State, StateError>
where
    I: IntoIterator<Item = (Configuration, Complex64)>,
{
    let mut amplitudes: BTreeMap<Configuration, Complex64> = BTreeMap::new();
    for (config, amp) in terms {
        layout.check(&config)?;
        *amplitudes.entry(config).or_default() += amp;
    }
    let norm = amplitudes
        .values()
        .map(|a| a.norm_sqr())
        .sum::<f64>()
        .sqrt();
    if norm == 0.0 || !norm.is_finite() {
        return Err(StateError::DegenerateState);
    }
    for amp in amplitudes.values_mut() {
        *amp /= norm;
    }
    amplitudes.retain(|_, a| a.norm() >= PRUNE_THRESHOLD);
    if amplitudes.is_empty() {
        return Err(StateError::DegenerateState);
    }
    Ok(State { layout, amplitudes })
}

/// `⟨a|b⟩`, conjugating `a`.
pub fn inner_product(a: &State, b: &State) -> Result<Complex64, StateError> {
    if !same_layout(&a.layout, &b.layout) {
        return Err(StateError::LayoutMismatch);
    }
    let (small, large, conj_small) = if a.len() <= b.len() {
        (a, b, true)
    } else {
        (b, a, false)
    };
    let mut acc = Complex64::new(0.0, 0.0);
    for (config, amp) in &small.amplitudes {
        if let Some(other) = large.amplitudes.get(config) {
            acc += if conj_small {
                amp.conj() * other
            } else {
                other.conj() * amp
            };
        }
    }
    Ok(acc)
}

pub(crate) fn same_layout(a: &Arc<SubsystemLayout>, b: &Arc<SubsystemLayout>) -> bool {
    Arc::ptr_eq(a, b) || a == b
}

impl State {
    /// The basis ket for one configuration.
    pub fn basis(layout: Arc<SubsystemLayout>, config: Configuration) -> Result<Self, StateError> {
        make_state(layout, [(config, Complex64::new(1.0, 0.0))])
    }

    /// Wraps an already-computed amplitude map, pruning dust but not renormalizing.
    pub(crate) fn from_raw(
        layout: Arc<SubsystemLayout>,
        mut amplitudes: BTreeMap<Configuration, Complex64>,
    ) -> Self {
        amplitudes.retain(|_, a| a.norm() >= PRUNE_THRESHOLD);
        Self { layout, amplitudes }
    }

    pub fn layout(&self) -> &Arc<SubsystemLayout> {
        &self.layout
    }

    pub fn len(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.amplitudes.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Configuration, &Complex64)> {
        self.amplitudes.iter()
    }

    pub fn amplitude(&self, config: &Configuration) -> Complex64 {
        self.amplitudes.get(config).copied().unwrap_or_default()
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.values().map(|a| a.norm_sqr()).sum()
    }

    /// Total weight of configurations where `subsystem` holds `symbol`.
    pub fn probability(&self, subsystem: &str, symbol: &str) -> Result<f64, StateError> {
        let (pos, idx) = self.layout.resolve(subsystem, symbol)?;
        Ok(self
            .amplitudes
            .iter()
            .filter(|(c, _)| c.0[pos] == idx)
            .map(|(_, a)| a.norm_sqr())
            .fold(0.0, |acc, p| acc + p))
    }

    /// Sum of |amplitude|² over configurations accepted by `pred`.
    pub fn weight_where<F: Fn(&Configuration) -> bool>(&self, pred: F) -> f64 {
        self.amplitudes
            .iter()
            .filter(|(c, _)| pred(c))
            .map(|(_, a)| a.norm_sqr())
            .fold(0.0, |acc, p| acc + p)
    }

    /// Keeps only configurations accepted by `pred`, without renormalizing.
    pub fn restrict<F: Fn(&Configuration) -> bool>(&self, pred: F) -> State {
        let amplitudes = self
            .amplitudes
            .iter()
            .filter(|(c, _)| pred(c))
            .map(|(c, a)| (c.clone(), *a))
            .collect();
        State {
            layout: self.layout.clone(),
            amplitudes,
        }
    }

    /// Renormalized projection onto configurations accepted by `pred`.
    pub fn project<F: Fn(&Configuration) -> bool>(&self, pred: F) -> Result<State, StateError> {
        let kept = self.restrict(pred);
        make_state(kept.layout.clone(), kept.amplitudes)
    }

    /// Largest per-configuration amplitude difference; `LayoutMismatch` across layouts.
    pub fn max_amplitude_error(&self, other: &State) -> Result<f64, StateError> {
        if !same_layout(&self.layout, &other.layout) {
            return Err(StateError::LayoutMismatch);
        }
        let keys: BTreeSet<&Configuration> = self
            .amplitudes
            .keys()
            .chain(other.amplitudes.keys())
            .collect();
        Ok(keys
            .into_iter()
            .map(|c| (self.amplitude(c) - other.amplitude(c)).norm())
            .fold(0.0, f64::max))
    }

    /// Decimal rendering of every term, used for golden reports.
    pub fn terms(&self) -> Vec<(String, Complex64)> {
        self.amplitudes
            .iter()
            .map(|(c, a)| (self.layout.label(c), *a))
            .collect()
    }
}

/// Sparse density matrix over a (sub-)layout.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    layout: Arc<SubsystemLayout>,
    entries: BTreeMap<(Configuration, Configuration), Complex64>,
}

/// Reduced density matrix over the kept subsystems.
pub fn partial_trace(state: &State, keep: &[&str]) -> Result<DensityMatrix, StateError> {
    if keep.is_empty() {
        return Err(StateError::EmptyKeepSet);
    }
    let (sub, kept) = state.layout.sub_layout(keep)?;
    let traced: Vec<usize> = (0..state.layout.len())
        .filter(|i| !kept.contains(i))
        .collect();

    // group amplitudes by the traced-out configuration
    let mut groups: BTreeMap<Configuration, Vec<(Configuration, Complex64)>> = BTreeMap::new();
    for (config, amp) in &state.amplitudes {
        groups
            .entry(config.project(&traced))
            .or_default()
            .push((config.project(&kept), *amp));
    }
    let mut entries: BTreeMap<(Configuration, Configuration), Complex64> = BTreeMap::new();
    for terms in groups.values() {
        for (a, amp_a) in terms {
            for (b, amp_b) in terms {
                *entries.entry((a.clone(), b.clone())).or_default() += amp_a * amp_b.conj();
            }
        }
    }
    entries.retain(|_, v| v.norm() >= PRUNE_THRESHOLD);
    Ok(DensityMatrix {
        layout: Arc::new(sub),
        entries,
    })
}

/// `½ Σ |λ_i(a − b)|`, computed on the joint support.
pub fn trace_distance(a: &DensityMatrix, b: &DensityMatrix) -> Result<f64, StateError> {
    if !same_layout(&a.layout, &b.layout) {
        return Err(StateError::LayoutMismatch);
    }
    let support: Vec<Configuration> = a.support().union(&b.support()).cloned().collect();
    if support.is_empty() {
        return Ok(0.0);
    }
    let diff = a.to_dense(&support) - b.to_dense(&support);
    let eig = SymmetricEigen::new(diff);
    let sum: f64 = eig.eigenvalues.iter().map(|l| l.abs()).sum();
    Ok((0.5 * sum).clamp(0.0, 1.0))
}

impl DensityMatrix {
    pub fn from_pure(state: &State) -> Self {
        let mut entries = BTreeMap::new();
        for (a, amp_a) in &state.amplitudes {
            for (b, amp_b) in &state.amplitudes {
                let v = amp_a * amp_b.conj();
                if v.norm() >= PRUNE_THRESHOLD {
                    entries.insert((a.clone(), b.clone()), v);
                }
            }
        }
        Self {
            layout: state.layout.clone(),
            entries,
        }
    }

    /// Convex combination `Σ p_i |ψ_i⟩⟨ψ_i|`; weights are renormalized.
    pub fn mixture(components: &[(f64, &State)]) -> Result<Self, StateError> {
        let first = components.first().ok_or(StateError::DegenerateState)?;
        let layout = first.1.layout.clone();
        let total: f64 = components.iter().map(|(p, _)| *p).sum();
        if total <= 0.0 {
            return Err(StateError::DegenerateState);
        }
        let mut entries: BTreeMap<(Configuration, Configuration), Complex64> = BTreeMap::new();
        for (p, state) in components {
            if !same_layout(&layout, &state.layout) {
                return Err(StateError::LayoutMismatch);
            }
            for (k, v) in DensityMatrix::from_pure(state).entries {
                *entries.entry(k).or_default() += v * (*p / total);
            }
        }
        entries.retain(|_, v| v.norm() >= PRUNE_THRESHOLD);
        Ok(Self { layout, entries })
    }

    pub fn layout(&self) -> &Arc<SubsystemLayout> {
        &self.layout
    }

    pub fn entry(&self, row: &Configuration, col: &Configuration) -> Complex64 {
        self.entries
            .get(&(row.clone(), col.clone()))
            .copied()
            .unwrap_or_default()
    }

    pub fn entries(&self) -> impl Iterator<Item = (&(Configuration, Configuration), &Complex64)> {
        self.entries.iter()
    }

    pub fn trace(&self) -> Complex64 {
        self.entries
            .iter()
            .filter(|((a, b), _)| a == b)
            .map(|(_, v)| *v)
            .sum()
    }

    /// `tr(ρ²)`.
    pub fn purity(&self) -> f64 {
        self.entries
            .iter()
            .map(|((a, b), v)| (v * self.entry(b, a)).re)
            .sum()
    }

    /// Largest off-diagonal magnitude.
    pub fn max_coherence(&self) -> f64 {
        self.entries
            .iter()
            .filter(|((a, b), _)| a != b)
            .map(|(_, v)| v.norm())
            .fold(0.0, f64::max)
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.entries
            .iter()
            .all(|((a, b), v)| (v - self.entry(b, a).conj()).norm() <= tol)
    }

    pub fn is_positive_semidefinite(&self, tol: f64) -> bool {
        let support: Vec<Configuration> = self.support().into_iter().collect();
        if support.is_empty() {
            return true;
        }
        let eig = SymmetricEigen::new(self.to_dense(&support));
        eig.eigenvalues.iter().all(|&l| l >= -tol)
    }

    /// Configurations that appear as a row or column index.
    pub fn support(&self) -> BTreeSet<Configuration> {
        self.entries
            .keys()
            .flat_map(|(a, b)| [a.clone(), b.clone()])
            .collect()
    }

    pub fn to_dense(&self, basis: &[Configuration]) -> DMatrix<Complex64> {
        let index: BTreeMap<&Configuration, usize> =
            basis.iter().enumerate().map(|(i, c)| (c, i)).collect();
        let mut m = DMatrix::<Complex64>::zeros(basis.len(), basis.len());
        for ((a, b), v) in &self.entries {
            if let (Some(&i), Some(&j)) = (index.get(a), index.get(b)) {
                m[(i, j)] = *v;
            }
        }
        m
    }

    /// Relabels the basis through a configuration map (e.g. a symbol permutation).
    pub fn relabel<F: Fn(&Configuration) -> Configuration>(&self, f: F) -> Self {
        let entries = self
            .entries
            .iter()
            .map(|((a, b), v)| ((f(a), f(b)), *v))
            .collect();
        Self {
            layout: self.layout.clone(),
            entries,
        }
    }
}
