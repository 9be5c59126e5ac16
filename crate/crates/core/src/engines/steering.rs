// SPDX-License-Identifier: Apache-2.0

//! How far another world with access to interference can move my detection probabilities.
//!
//! My branch carries `√μ|up>`. The adversary controls `c|down>` with
//! `|c| ≤ √(1−μ)` and any phase, and both are recombined at a splitter
//! `up → α up + β down`. The D2 probability is `|√μ β − c ᾱ|²`.

use std::f64::consts::PI;
use std::fmt;

use num_complex::Complex64;
use serde::Serialize;

use super::EngineError;
use crate::circuit::names::*;
use crate::circuit::{beam_splitter, detector_coupling, Circuit};
use crate::experiments::{standard_layout, Experiment};
use crate::statevec::make_state;

/// Tolerance below which an expected value counts as a tie.
const TIE_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SteeringAnalysis {
    pub mu: f64,
    pub p_min: f64,
    pub p_max: f64,
    #[serde(serialize_with = "complex_pair")]
    pub argmin: Complex64,
    #[serde(serialize_with = "complex_pair")]
    pub argmax: Complex64,
    pub grid_points: usize,
    pub grid_p_min: f64,
    pub grid_p_max: f64,
}

fn complex_pair<S: serde::Serializer>(c: &Complex64, s: S) -> Result<S::Ok, S::Error> {
    use serde::ser::SerializeTuple;
    let mut t = s.serialize_tuple(2)?;
    t.serialize_element(&c.re)?;
    t.serialize_element(&c.im)?;
    t.end()
}

impl SteeringAnalysis {
    /// Largest disagreement between the closed form and the grid search.
    pub fn grid_error(&self) -> f64 {
        (self.p_min - self.grid_p_min)
            .abs()
            .max((self.p_max - self.grid_p_max).abs())
    }
}

fn check_mu(mu: f64) -> Result<(), EngineError> {
    if mu > 0.0 && mu <= 1.0 {
        Ok(())
    } else {
        Err(EngineError::MuOutOfRange(mu))
    }
}

fn d2_probability(mu: f64, c: Complex64, alpha: Complex64, beta: Complex64) -> f64 {
    (beta * mu.sqrt() - c * alpha.conj()).norm_sqr()
}

/// Steering range at the balanced splitter.
pub fn steering_range(mu: f64, grid: usize) -> Result<SteeringAnalysis, EngineError> {
    let h = Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
    steering_range_split(mu, grid, h, h)
}

/// Steering range for an arbitrary recombining splitter.
///
/// `grid` is the total number of adversary amplitudes searched: about `√grid`
/// moduli spanning `[0, √(1−μ)]` times as many phases.
pub fn steering_range_split(
    mu: f64,
    grid: usize,
    alpha: Complex64,
    beta: Complex64,
) -> Result<SteeringAnalysis, EngineError> {
    check_mu(mu)?;
    if grid < 100 {
        return Err(EngineError::GridTooSmall(grid));
    }
    let norm = alpha.norm_sqr() + beta.norm_sqr();
    if (norm - 1.0).abs() > 1e-12 {
        return Err(EngineError::InvalidInput(format!("|α|²+|β|² = {norm}")));
    }
    let reach = (1.0 - mu).max(0.0).sqrt();
    let mine = mu.sqrt() * beta.norm();
    let lever = reach * alpha.norm();
    let p_min = (mine - lever).max(0.0).powi(2);
    let p_max = (mine + lever).powi(2);

    // c ᾱ parallel to β cancels, antiparallel adds
    let aligned = beta.arg() + alpha.arg();
    let cancel = if alpha.norm() > 0.0 {
        (mine / alpha.norm()).min(reach)
    } else {
        0.0
    };
    let argmin = Complex64::from_polar(cancel, aligned);
    let argmax = Complex64::from_polar(reach, aligned + PI);

    let mut n = (grid as f64).sqrt().ceil() as usize;
    n += n % 2;
    let mut grid_p_min = f64::INFINITY;
    let mut grid_p_max = f64::NEG_INFINITY;
    for i in 0..n {
        let modulus = reach * i as f64 / (n - 1) as f64;
        for j in 0..n {
            let c = Complex64::from_polar(modulus, 2.0 * PI * j as f64 / n as f64);
            let p = d2_probability(mu, c, alpha, beta);
            grid_p_min = grid_p_min.min(p);
            grid_p_max = grid_p_max.max(p);
        }
    }
    Ok(SteeringAnalysis {
        mu,
        p_min,
        p_max,
        argmin,
        argmax,
        grid_points: n * n,
        grid_p_min,
        grid_p_max,
    })
}

/// My branch plus the adversary's, sent into the splitter and the detectors.
///
/// Whatever measure the adversary withholds (`|c|² < 1−μ`) sits in the `absorbed` sink.
pub fn steering_experiment(
    mu: f64,
    adversary: Complex64,
    alpha: Complex64,
    beta: Complex64,
) -> Result<Experiment, EngineError> {
    check_mu(mu)?;
    let layout = standard_layout();
    let rest = 1.0 - mu - adversary.norm_sqr();
    if rest < -1e-12 {
        return Err(EngineError::InvalidInput(format!(
            "adversary amplitude {adversary} exceeds √(1−μ)"
        )));
    }
    let at = |mode: &str| layout.configuration(&[mode, READY, READY, READY]);
    let mut terms = vec![
        (at(UP)?, Complex64::new(mu.sqrt(), 0.0)),
        (at(DOWN)?, adversary),
    ];
    if rest > 0.0 {
        terms.push((at(ABSORBED)?, Complex64::new(rest.sqrt(), 0.0)));
    }
    let initial = make_state(layout.clone(), terms)?;
    let circuit = Circuit::new(
        layout,
        vec![
            beam_splitter(alpha, beta)?.named("S"),
            detector_coupling(D1, UP),
            detector_coupling(D2, DOWN),
        ],
    )?;
    Ok(Experiment { circuit, initial })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum BetDecision {
    Accept,
    Reject,
}

impl fmt::Display for BetDecision {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BetDecision::Accept => "accept",
            BetDecision::Reject => "reject",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BetAssessment {
    pub mu: f64,
    pub offered_odds: f64,
    pub naive_probability: f64,
    /// Probability of my winning outcome (D2) with the adversary working against me.
    pub worst_case_win: f64,
    pub best_case_win: f64,
    /// Per unit stake at the worst case.
    pub expected_value: f64,
    pub decision: BetDecision,
}

/// Full worst-case analysis of being offered `offered_odds : 1` that the neutron reaches D1.
///
/// The adversary's outcome D1 has probability `naive_probability` without
/// interference; I win `offered_odds` per unit stake if it reaches D2 instead.
pub fn assess_bet(
    mu: f64,
    offered_odds: f64,
    naive_probability: f64,
) -> Result<BetAssessment, EngineError> {
    check_mu(mu)?;
    if !(0.0..=1.0).contains(&naive_probability) {
        return Err(EngineError::InvalidInput(format!(
            "naive probability {naive_probability}"
        )));
    }
    if !(offered_odds.is_finite() && offered_odds > 0.0) {
        return Err(EngineError::InvalidInput(format!("odds {offered_odds}")));
    }
    let alpha = Complex64::new(naive_probability.sqrt(), 0.0);
    let beta = Complex64::new((1.0 - naive_probability).sqrt(), 0.0);
    let range = steering_range_split(mu, 100, alpha, beta)?;
    let w = range.p_min;
    let expected_value = w * offered_odds - (1.0 - w);
    let decision = if expected_value <= TIE_TOLERANCE {
        BetDecision::Reject
    } else {
        BetDecision::Accept
    };
    Ok(BetAssessment {
        mu,
        offered_odds,
        naive_probability,
        worst_case_win: w,
        best_case_win: range.p_max,
        expected_value,
        decision,
    })
}

pub fn bet_decision(
    mu: f64,
    offered_odds: f64,
    naive_probability: f64,
) -> Result<BetDecision, EngineError> {
    Ok(assess_bet(mu, offered_odds, naive_probability)?.decision)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn closed_form_examples() {
        let r = steering_range(1.0, 10_000).unwrap();
        assert!((r.p_min - 0.5).abs() < 1e-12 && (r.p_max - 0.5).abs() < 1e-12);
        let r = steering_range(0.5, 10_000).unwrap();
        assert!(r.p_min.abs() < 1e-12 && (r.p_max - 1.0).abs() < 1e-12);
        let r = steering_range(0.9, 10_000).unwrap();
        assert!((r.p_min - 0.2).abs() < 1e-9 && (r.p_max - 0.8).abs() < 1e-9);
        assert!(r.grid_error() < 1e-9);
        assert!(steering_range(0.0, 1000).is_err());
        assert!(steering_range(0.5, 99).is_err());
    }

    #[test]
    fn arguments_reach_the_extremes() {
        let h = Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
        for mu in [0.2, 0.5, 0.7] {
            let r = steering_range(mu, 400).unwrap();
            assert!((d2_probability(mu, r.argmin, h, h) - r.p_min).abs() < 1e-12);
            assert!((d2_probability(mu, r.argmax, h, h) - r.p_max).abs() < 1e-12);
        }
    }

    #[test]
    fn superman_bet() {
        assert_eq!(bet_decision(0.01, 1.0, 0.1).unwrap(), BetDecision::Reject);
        assert_eq!(bet_decision(1.0, 1.0, 0.1).unwrap(), BetDecision::Accept);
        // fair even money on a coin toss with no adversary
        assert_eq!(bet_decision(1.0, 1.0, 0.5).unwrap(), BetDecision::Reject);
    }

    #[test]
    fn tracked_steering_matches_formula() {
        let h = Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
        let c = Complex64::from_polar(0.3, 1.1);
        let e = steering_experiment(0.6, c, h, h).unwrap();
        let out = e.circuit.apply(&e.initial).unwrap();
        let p = out.probability(D2, TRIGGERED).unwrap();
        assert!((p - d2_probability(0.6, c, h, h)).abs() < 1e-12);
    }
}
