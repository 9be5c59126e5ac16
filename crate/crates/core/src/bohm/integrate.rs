// SPDX-License-Identifier: Apache-2.0

//! RK4 integration of the guidance equation, ensembles and CSV export.

use std::io::Write;

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use super::{velocity_field, BohmError, Frame, PilotState, DENSITY_FLOOR};
use crate::engines::trial_rng;

/// Deepest step subdivision tried near a node.
pub const MAX_HALVINGS: u32 = 20;
/// Largest accepted disagreement between one step and two half steps.
pub const STEP_TOLERANCE: f64 = 1e-10;
/// `h · (stage velocity spread)` above which a step is checked against two half steps.
const STIFF_INDICATOR: f64 = 1e-5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TrajectoryPoint {
    pub t: f64,
    pub x: f64,
    pub v: f64,
    pub density: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Trajectory {
    /// One point per base step, starting at the time origin.
    pub points: Vec<TrajectoryPoint>,
    pub dt: f64,
    pub x_init: f64,
    pub floor: f64,
    pub tolerance: f64,
    /// Deepest subdivision used anywhere along the path.
    pub max_halvings: u32,
}

impl Trajectory {
    pub fn end(&self) -> &TrajectoryPoint {
        self.points.last().expect("trajectory has its start point")
    }

    /// True if x keeps a single strict sign throughout.
    pub fn keeps_side(&self) -> bool {
        let side = self.x_init.signum();
        self.points
            .iter()
            .all(|p| p.x.signum() == side && p.x != 0.0)
    }
}

struct Stuck;

struct Stepper<'a> {
    state: &'a PilotState,
    deepest: u32,
}

impl Stepper<'_> {
    /// Velocity at `x`, flagged when the density is within ten floors of vanishing.
    fn rate(frame: &Frame, x: f64) -> Result<(f64, bool), Stuck> {
        let (density, current) = frame.density_and_current(x);
        if density.is_nan() || density < DENSITY_FLOOR {
            return Err(Stuck);
        }
        Ok((current / density, density < 10.0 * DENSITY_FLOOR))
    }

    fn advance(&mut self, t: f64, x: f64, h: f64, depth: u32) -> Result<f64, Stuck> {
        self.deepest = self.deepest.max(depth);
        let full = match self.rk4(t, x, h) {
            Ok(step)
                if depth >= MAX_HALVINGS || (!step.thin && h * step.spread <= STIFF_INDICATOR) =>
            {
                return Ok(step.next)
            }
            // thin density or a velocity swing within the step: check against two half steps
            Ok(step) => Some(step.next),
            Err(Stuck) if depth >= MAX_HALVINGS => return Err(Stuck),
            Err(Stuck) => None,
        };
        let half = 0.5 * h;
        if let Some(full) = full {
            let two_halves = self
                .rk4(t, x, half)
                .and_then(|first| self.rk4(t + half, first.next, half));
            if let Ok(two_halves) = two_halves {
                if (two_halves.next - full).abs() <= STEP_TOLERANCE {
                    self.deepest = self.deepest.max(depth + 1);
                    return Ok(two_halves.next);
                }
            }
        }
        let mid = self.advance(t, x, half, depth + 1)?;
        self.advance(t + half, mid, half, depth + 1)
    }

    /// One classic RK4 step.
    fn rk4(&self, t: f64, x: f64, h: f64) -> Result<Rk4Step, Stuck> {
        let frame = |t| self.state.frame(t).map_err(|_| Stuck);
        let (start, mid, end) = (frame(t)?, frame(t + 0.5 * h)?, frame(t + h)?);
        let (k1, thin1) = Self::rate(&start, x)?;
        let (k2, thin2) = Self::rate(&mid, x + 0.5 * h * k1)?;
        let (k3, thin3) = Self::rate(&mid, x + 0.5 * h * k2)?;
        let (k4, thin4) = Self::rate(&end, x + h * k3)?;
        let ks = [k1, k2, k3, k4];
        let spread = ks.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
            - ks.iter().cloned().fold(f64::INFINITY, f64::min);
        Ok(Rk4Step {
            next: x + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4),
            spread,
            thin: thin1 || thin2 || thin3 || thin4,
        })
    }
}

struct Rk4Step {
    next: f64,
    /// Spread of the four stage velocities.
    spread: f64,
    thin: bool,
}

fn check_start(state: &PilotState, x_init: f64, t_max: f64, dt: f64) -> Result<f64, BohmError> {
    if !(dt.is_finite() && dt > 0.0) {
        return Err(BohmError::InvalidStep(dt));
    }
    if !(x_init.is_finite() && t_max.is_finite()) {
        return Err(BohmError::NonFinite);
    }
    let t0 = state.time_origin();
    if t_max < t0 {
        return Err(BohmError::NegativeTime(t_max));
    }
    velocity_field(state, x_init, t0)?;
    Ok(t0)
}

/// Runs base steps from the origin to `t_max`, handing each accepted point to `record`.
fn run<F: FnMut(f64, f64)>(
    state: &PilotState,
    x_init: f64,
    t_max: f64,
    dt: f64,
    mut record: F,
) -> Result<u32, (f64, u32)> {
    let t0 = state.time_origin();
    let steps = ((t_max - t0) / dt - 1e-9).ceil().max(0.0) as u64;
    let mut stepper = Stepper { state, deepest: 0 };
    let mut x = x_init;
    for i in 0..steps {
        let t = t0 + i as f64 * dt;
        let t_next = if i + 1 == steps {
            t_max
        } else {
            t0 + (i + 1) as f64 * dt
        };
        x = stepper
            .advance(t, x, t_next - t, 0)
            .map_err(|_| (t, stepper.deepest))?;
        record(t_next, x);
    }
    Ok(stepper.deepest)
}

fn point(state: &PilotState, t: f64, x: f64) -> TrajectoryPoint {
    let (density, current) = state.density_and_current(x, t).unwrap_or((0.0, 0.0));
    let v = if density > 0.0 {
        current / density
    } else {
        0.0
    };
    TrajectoryPoint { t, x, v, density }
}

/// RK4 on `dx/dt = v(x, t)` from the time origin to `t_max` with base step `dt`.
pub fn integrate_trajectory(
    state: &PilotState,
    x_init: f64,
    t_max: f64,
    dt: f64,
) -> Result<Trajectory, BohmError> {
    let t0 = check_start(state, x_init, t_max, dt)?;
    let mut points = vec![point(state, t0, x_init)];
    let outcome = run(state, x_init, t_max, dt, |t, x| {
        points.push(point(state, t, x))
    });
    let mut trajectory = Trajectory {
        points,
        dt,
        x_init,
        floor: DENSITY_FLOOR,
        tolerance: STEP_TOLERANCE,
        max_halvings: 0,
    };
    match outcome {
        Ok(deepest) => {
            trajectory.max_halvings = deepest;
            Ok(trajectory)
        }
        Err((t, deepest)) => {
            trajectory.max_halvings = deepest;
            Err(BohmError::NearNode {
                t,
                partial: Box::new(trajectory),
            })
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EnsembleMember {
    pub x_init: f64,
    pub x_final: f64,
    pub kept_side: bool,
}

fn member(
    state: &PilotState,
    x_init: f64,
    t_max: f64,
    dt: f64,
) -> Result<EnsembleMember, BohmError> {
    check_start(state, x_init, t_max, dt)?;
    let side = x_init.signum();
    let mut last = x_init;
    let mut kept_side = x_init != 0.0;
    match run(state, x_init, t_max, dt, |_, x| {
        last = x;
        kept_side &= x.signum() == side && x != 0.0;
    }) {
        Ok(_) => Ok(EnsembleMember {
            x_init,
            x_final: last,
            kept_side,
        }),
        // rerun with sampling to report the partial path
        Err(_) => integrate_trajectory(state, x_init, t_max, dt).map(|tr| EnsembleMember {
            x_init,
            x_final: tr.end().x,
            kept_side: tr.keeps_side(),
        }),
    }
}

/// Integrates many starts in parallel, keeping only endpoints and the side test.
pub fn ensemble(
    state: &PilotState,
    starts: &[f64],
    t_max: f64,
    dt: f64,
) -> Result<Vec<EnsembleMember>, BohmError> {
    starts
        .par_iter()
        .map(|&x| member(state, x, t_max, dt))
        .collect()
}

/// Final positions for many starts.
pub fn endpoints(
    state: &PilotState,
    starts: &[f64],
    t_max: f64,
    dt: f64,
) -> Result<Vec<f64>, BohmError> {
    Ok(ensemble(state, starts, t_max, dt)?
        .into_iter()
        .map(|m| m.x_final)
        .collect())
}

/// Cumulative trapezoid over an evenly spaced grid, normalized to end at 1.
fn cdf_table(
    state: &PilotState,
    t: f64,
    lo: f64,
    hi: f64,
    n: usize,
) -> Result<Vec<(f64, f64)>, BohmError> {
    let h = (hi - lo) / (n - 1) as f64;
    let xs: Vec<f64> = (0..n).map(|i| lo + i as f64 * h).collect();
    let rho = xs
        .iter()
        .map(|&x| state.density(x, t))
        .collect::<Result<Vec<_>, _>>()?;
    let mut acc = 0.0;
    let mut table = Vec::with_capacity(n);
    table.push((xs[0], 0.0));
    for i in 1..n {
        acc += 0.5 * h * (rho[i - 1] + rho[i]);
        table.push((xs[i], acc));
    }
    for entry in &mut table {
        entry.1 /= acc;
    }
    Ok(table)
}

fn interpolate_cdf(table: &[(f64, f64)], x: f64) -> f64 {
    let i = table.partition_point(|&(xi, _)| xi <= x);
    if i == 0 {
        return 0.0;
    }
    if i == table.len() {
        return 1.0;
    }
    let ((x0, f0), (x1, f1)) = (table[i - 1], table[i]);
    f0 + (f1 - f0) * (x - x0) / (x1 - x0)
}

fn support(state: &PilotState, t: f64) -> (f64, f64) {
    let local = t - state.time_origin();
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for p in state.sectors().iter().flat_map(|s| &s.packets) {
        let reach = 12.0 * p.width(local).norm();
        lo = lo.min(p.center(local) - reach);
        hi = hi.max(p.center(local) + reach);
    }
    (lo, hi)
}

const CDF_POINTS: usize = 40_001;

/// `n` positions drawn from `|ψ(x, origin)|²` by inverse-CDF sampling; deterministic in `seed`.
pub fn sample_initial(state: &PilotState, n: usize, seed: u64) -> Result<Vec<f64>, BohmError> {
    let t0 = state.time_origin();
    let (lo, hi) = support(state, t0);
    let table = cdf_table(state, t0, lo, hi, CDF_POINTS)?;
    let mut rng = trial_rng(seed, 0);
    Ok((0..n)
        .map(|_| {
            let u: f64 = rng.gen();
            let i = table
                .partition_point(|&(_, f)| f < u)
                .clamp(1, table.len() - 1);
            let ((x0, f0), (x1, f1)) = (table[i - 1], table[i]);
            if f1 > f0 {
                x0 + (x1 - x0) * (u - f0) / (f1 - f0)
            } else {
                x0
            }
        })
        .collect())
}

/// Kolmogorov–Smirnov distance between `positions` and `|ψ(x, t)|²`.
pub fn ks_distance(state: &PilotState, t: f64, positions: &[f64]) -> Result<f64, BohmError> {
    let mut sorted = positions.to_vec();
    sorted.sort_by(f64::total_cmp);
    let (lo, hi) = support(state, t);
    let table = cdf_table(state, t, lo, hi, CDF_POINTS)?;
    let n = sorted.len() as f64;
    Ok(sorted
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = interpolate_cdf(&table, x);
            (f - i as f64 / n).abs().max((f - (i + 1) as f64 / n).abs())
        })
        .fold(0.0, f64::max))
}

/// KS distance after transporting `samples` draws from `|ψ(x, origin)|²` to `t_max`.
pub fn equivariance_ks(
    state: &PilotState,
    samples: usize,
    t_max: f64,
    dt: f64,
    seed: u64,
) -> Result<f64, BohmError> {
    let starts = sample_initial(state, samples, seed)?;
    let ends = endpoints(state, &starts, t_max, dt)?;
    ks_distance(state, t_max, &ends)
}

/// Writes `t,x,v,density` rows with a header line.
pub fn write_csv<W: Write>(trajectory: &Trajectory, mut out: W) -> Result<(), BohmError> {
    let io = |e: std::io::Error| BohmError::Io(e.to_string());
    writeln!(out, "t,x,v,density").map_err(io)?;
    for p in &trajectory.points {
        writeln!(out, "{},{},{},{}", p.t, p.x, p.v, p.density).map_err(io)?;
    }
    Ok(())
}
