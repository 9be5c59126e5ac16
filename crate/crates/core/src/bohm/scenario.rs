// SPDX-License-Identifier: Apache-2.0

//! Two packets crossing at A, read as the open interferometer.
//!
//! The transverse coordinate runs through the crossing region: the packet
//! starting at negative x comes from the M1 arm, the one at positive x from the
//! M2 arm. After the crossing, D1 sits on the negative side and D2 on the
//! positive side.

use num_complex::Complex64;
use serde::Serialize;

use super::{
    integrate_trajectory, BohmError, GaussianPacket, Marker, PilotState, SectorWave, Trajectory,
};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CollisionGeometry {
    /// Packets start at `∓half_separation`.
    pub half_separation: f64,
    /// Each packet moves towards the other at this speed.
    pub speed: f64,
    pub width: f64,
    pub t_max: f64,
    pub dt: f64,
}

impl Default for CollisionGeometry {
    fn default() -> Self {
        CollisionGeometry {
            half_separation: 10.0,
            speed: 2.0,
            width: 1.0,
            t_max: 20.0,
            dt: 1e-3,
        }
    }
}

impl CollisionGeometry {
    fn packets(&self) -> Result<(GaussianPacket, GaussianPacket), BohmError> {
        let w = Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
        Ok((
            GaussianPacket::new(-self.half_separation, self.speed, self.width, w)?,
            GaussianPacket::new(self.half_separation, -self.speed, self.width, w)?,
        ))
    }
}

/// Symmetric collision; `with_marker` puts each packet in its own marker sector.
pub fn collision_state(
    geometry: &CollisionGeometry,
    with_marker: bool,
) -> Result<PilotState, BohmError> {
    let (from_m1, from_m2) = geometry.packets()?;
    let sectors = if with_marker {
        vec![
            SectorWave::new(Marker::M1, vec![from_m1]),
            SectorWave::new(Marker::M2, vec![from_m2]),
        ]
    } else {
        vec![SectorWave::new(Marker::Unmarked, vec![from_m1, from_m2])]
    };
    PilotState::normalized(sectors, 0.0)
}

/// Bhattacharyya coefficient of the two packets' densities at time `t`.
pub fn density_overlap(a: &GaussianPacket, b: &GaussianPacket, t: f64) -> f64 {
    let reach = 12.0 * a.width(t).norm().max(b.width(t).norm());
    let lo = a.center(t).min(b.center(t)) - reach;
    let hi = a.center(t).max(b.center(t)) + reach;
    let n = 40_000;
    let h = (hi - lo) / n as f64;
    let (mut cross, mut na, mut nb) = (0.0, 0.0, 0.0);
    for i in 0..=n {
        let x = lo + i as f64 * h;
        let (ra, rb) = (a.value(x, t).norm_sqr(), b.value(x, t).norm_sqr());
        cross += (ra * rb).sqrt();
        na += ra;
        nb += rb;
    }
    cross / (na * nb).sqrt()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SurrealReport {
    pub with_marker: bool,
    pub x_init: f64,
    pub x_final: f64,
    pub t_max: f64,
    /// Path the pilot-wave particle actually takes.
    pub bohm_arm_sequence: String,
    /// Path inferred from the detector that fires.
    pub naive_arm_sequence: String,
    /// Path shown by the marker record, when there is one.
    pub recorded_arm_sequence: Option<String>,
    pub kept_side: bool,
    pub max_halvings: u32,
    #[serde(skip)]
    pub trajectory: Trajectory,
}

fn arm(x: f64) -> &'static str {
    if x < 0.0 {
        "M1"
    } else {
        "M2"
    }
}

fn detector(x: f64) -> &'static str {
    if x < 0.0 {
        "D1"
    } else {
        "D2"
    }
}

/// Crossing scenario on the default geometry.
pub fn crossing_scenario(with_marker: bool, x_init: f64) -> Result<SurrealReport, BohmError> {
    crossing_scenario_with(&CollisionGeometry::default(), with_marker, x_init)
}

pub fn crossing_scenario_with(
    geometry: &CollisionGeometry,
    with_marker: bool,
    x_init: f64,
) -> Result<SurrealReport, BohmError> {
    if x_init == 0.0 {
        return Err(BohmError::StartAtCrossing);
    }
    let state = collision_state(geometry, with_marker)?;
    let trajectory = integrate_trajectory(&state, x_init, geometry.t_max, geometry.dt)?;
    let end = *trajectory.end();
    let fired = detector(end.x);

    // the packet the particle ends up inside, named by the arm it came from
    let (from_m1, from_m2) = geometry.packets()?;
    let t = end.t - state.time_origin();
    let host = if from_m1.value(end.x, t).norm_sqr() >= from_m2.value(end.x, t).norm_sqr() {
        "M1"
    } else {
        "M2"
    };
    let recorded_arm_sequence = if with_marker {
        let m1 = state.sector_density(Marker::M1, end.x, end.t)?;
        let m2 = state.sector_density(Marker::M2, end.x, end.t)?;
        let mark = if m1 >= m2 { Marker::M1 } else { Marker::M2 };
        Some(format!("S1{mark}{fired}"))
    } else {
        None
    };
    Ok(SurrealReport {
        with_marker,
        x_init,
        x_final: end.x,
        t_max: geometry.t_max,
        bohm_arm_sequence: format!("S1{}A{fired}", arm(x_init)),
        naive_arm_sequence: format!("S1{host}{fired}"),
        recorded_arm_sequence,
        kept_side: trajectory.keeps_side(),
        max_halvings: trajectory.max_halvings,
        trajectory,
    })
}
