// SPDX-License-Identifier: Apache-2.0

use neutron_worlds::circuit::names::*;
use neutron_worlds::engines::{
    collapse_branches, decoherence_stability, exact_outcome_distribution, frequencies, run_trial,
    steering_range, CollapseStage, EngineMode, RecordBasis,
};
use neutron_worlds::experiments::{fig1_splitter, fig2_arrangements, fig4_open, Experiment};
use neutron_worlds::worlds::{decompose, track, WorldBasisSpec};
use num_complex::Complex64;

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn chains() -> Vec<Experiment> {
    vec![
        fig1_splitter(c(0.6, 0.0), c(0.0, 0.8)).unwrap(),
        fig1_splitter(c(0.1f64.sqrt(), 0.0), c(0.9f64.sqrt(), 0.0)).unwrap(),
        fig2_arrangements().unwrap(),
        fig4_open().unwrap(),
    ]
}

#[test]
fn collapse_matches_many_worlds_when_nothing_follows() {
    for e in chains() {
        let mwi = exact_outcome_distribution(&e.circuit, &e.initial, EngineMode::Mwi).unwrap();
        let stage = CollapseStage::AfterObserver;
        let collapse =
            exact_outcome_distribution(&e.circuit, &e.initial, EngineMode::Collapse(stage))
                .unwrap();
        assert_eq!(mwi.len(), collapse.len());
        for (config, p) in &mwi {
            assert!((collapse[config] - p).abs() < 1e-12);
        }
        let report = frequencies(
            &e.circuit,
            &e.initial,
            EngineMode::Collapse(stage),
            10_000,
            11,
        )
        .unwrap();
        assert!(report.max_abs_z() < 3.0, "{report:?}");
    }
}

#[test]
fn branch_enumeration_sums_to_one() {
    for e in chains() {
        for stage in [CollapseStage::AfterDetector, CollapseStage::AfterObserver] {
            let branches = collapse_branches(&e.circuit, &e.initial, stage).unwrap();
            let total: f64 = branches.iter().map(|b| b.probability).sum();
            assert!((total - 1.0).abs() < 1e-12);
        }
    }
}

#[test]
fn identical_seeds_give_identical_trials() {
    let e = fig1_splitter(c(0.6, 0.0), c(0.8, 0.0)).unwrap();
    for trial in 0..50 {
        let a = run_trial(
            &e.circuit,
            &e.initial,
            CollapseStage::AfterDetector,
            5,
            trial,
        )
        .unwrap();
        let b = run_trial(
            &e.circuit,
            &e.initial,
            CollapseStage::AfterDetector,
            5,
            trial,
        )
        .unwrap();
        assert_eq!(a, b);
    }
    let a = frequencies(
        &e.circuit,
        &e.initial,
        EngineMode::Collapse(CollapseStage::AfterDetector),
        2_000,
        5,
    )
    .unwrap();
    let b = frequencies(
        &e.circuit,
        &e.initial,
        EngineMode::Collapse(CollapseStage::AfterDetector),
        2_000,
        5,
    )
    .unwrap();
    assert_eq!(a, b);
}

#[test]
fn split_probabilities_match_collapse_frequencies() {
    let e = fig1_splitter(c(0.6, 0.0), c(0.0, 0.8)).unwrap();
    let tree = track(&e.circuit, &e.initial, &WorldBasisSpec::pointers([D1, D2])).unwrap();
    let last = tree.levels().last().unwrap();
    let report = frequencies(
        &e.circuit,
        &e.initial,
        EngineMode::Collapse(CollapseStage::AfterDetector),
        10_000,
        3,
    )
    .unwrap();
    for (detector, split) in [(D1, 0.36), (D2, 0.64)] {
        let measure: f64 = last
            .branches
            .iter()
            .filter(|b| tree.label_layout().symbol(&b.label, detector) == Some(TRIGGERED))
            .map(|b| b.measure)
            .sum();
        assert!((measure - split).abs() < 1e-12);
        let key = format!("{detector}={TRIGGERED}");
        let freq = report.frequency_where(|o| o.contains(&key));
        let sigma = (split * (1.0 - split) / 10_000.0).sqrt();
        assert!((freq - split).abs() < 3.0 * sigma, "{detector}: {freq}");
    }
}

#[test]
fn coarse_graining_sums_measures() {
    let e = fig2_arrangements().unwrap();
    let out = e.circuit.apply(&e.initial).unwrap();
    let fine = decompose(&out, &WorldBasisSpec::pointers([NEUTRON])).unwrap();
    let coarse = decompose(
        &out,
        &WorldBasisSpec::pointers([NEUTRON]).with_grouping(
            NEUTRON,
            vec![
                vec![UP],
                vec![DOWN],
                vec![SOURCE],
                vec!["inD1", "inD2"],
                vec![ESCAPED],
                vec![ABSORBED],
            ],
        ),
    )
    .unwrap();
    assert_eq!(coarse.len() + 1, fine.len());
    let detected: f64 = fine
        .iter()
        .filter(|b| b.label_text.contains("inD"))
        .map(|b| b.measure)
        .sum();
    let merged = coarse
        .iter()
        .find(|b| b.label_text.contains("inD"))
        .expect("merged world");
    assert_eq!(merged.measure, detected);
}

#[test]
fn nonlocal_records_never_recover() {
    let mut last = decoherence_stability(RecordBasis::Nonlocal, 0).unwrap();
    for k in 1..=8 {
        let d = decoherence_stability(RecordBasis::Nonlocal, k).unwrap();
        assert!(d <= last + 1e-12);
        last = d;
        assert!((decoherence_stability(RecordBasis::Local, k).unwrap() - 1.0).abs() < 1e-12);
    }
}

#[test]
fn steering_is_degenerate_only_at_full_weight() {
    for k in 1..=20 {
        let mu = k as f64 / 20.0;
        let a = steering_range(mu, 400).unwrap();
        assert_eq!((a.p_max - a.p_min).abs() < 1e-12, k == 20, "mu = {mu}");
        let spacing = (1.0 - mu).sqrt() / 19.0;
        assert!(a.grid_error() <= spacing * spacing + 1e-12);
    }
}
