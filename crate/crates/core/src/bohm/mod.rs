// SPDX-License-Identifier: Apache-2.0

//! Pilot-wave dynamics over free Gaussian packets in one transverse coordinate.
//!
//! Units are `ħ = m = 1`. Each sector carries a marker (the internal state of a
//! bubble-chamber atom); sectors with different markers never interfere, so
//! the guidance velocity sums currents and densities sector by sector.

mod integrate;
mod scenario;

pub use integrate::{
    endpoints, ensemble, equivariance_ks, integrate_trajectory, ks_distance, sample_initial,
    write_csv, EnsembleMember, Trajectory, TrajectoryPoint, MAX_HALVINGS, STEP_TOLERANCE,
};
pub use scenario::{
    collision_state, crossing_scenario, crossing_scenario_with, density_overlap, CollisionGeometry,
    SurrealReport,
};

use std::f64::consts::PI;
use std::fmt;

use num_complex::Complex64;
use serde::Serialize;
use thiserror::Error;

/// Total densities below this are treated as nodes.
pub const DENSITY_FLOOR: f64 = 1e-12;
pub const NORM_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BohmError {
    #[error("packet width must be positive and finite, got {0}")]
    InvalidWidth(f64),
    #[error("packet parameters must be finite")]
    NonFinite,
    #[error("pilot state norm {0} differs from 1")]
    Norm(f64),
    #[error("marker {0} appears in more than one sector")]
    DuplicateMarker(Marker),
    #[error("time {0} precedes the time origin")]
    NegativeTime(f64),
    #[error("step size must be positive, got {0}")]
    InvalidStep(f64),
    #[error("density {density:e} at x = {x}, t = {t} is below the node floor")]
    BelowFloor { x: f64, t: f64, density: f64 },
    #[error("trajectory from x = {} stuck at a node near t = {t}", .partial.x_init)]
    NearNode { t: f64, partial: Box<Trajectory> },
    #[error("the crossing point x = 0 is not a valid start")]
    StartAtCrossing,
    #[error("could not write trajectory: {0}")]
    Io(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum Marker {
    #[serde(rename = "none")]
    Unmarked,
    M1,
    M2,
}

impl fmt::Display for Marker {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Marker::Unmarked => "none",
            Marker::M1 => "M1",
            Marker::M2 => "M2",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GaussianPacket {
    pub x0: f64,
    pub v: f64,
    pub s0: f64,
    pub phase: f64,
    #[serde(skip)]
    pub weight: Complex64,
}

impl GaussianPacket {
    pub fn new(x0: f64, v: f64, s0: f64, weight: Complex64) -> Result<Self, BohmError> {
        let packet = GaussianPacket {
            x0,
            v,
            s0,
            phase: 0.0,
            weight,
        };
        packet.validate()?;
        Ok(packet)
    }

    fn validate(&self) -> Result<(), BohmError> {
        if !(self.s0.is_finite() && self.s0 > 0.0) {
            return Err(BohmError::InvalidWidth(self.s0));
        }
        let finite = [self.x0, self.v, self.phase, self.weight.re, self.weight.im];
        if finite.iter().all(|p| p.is_finite()) {
            Ok(())
        } else {
            Err(BohmError::NonFinite)
        }
    }

    /// Complex width `s0 (1 + i t / (2 s0²))`.
    pub fn width(&self, t: f64) -> Complex64 {
        Complex64::new(self.s0, t / (2.0 * self.s0))
    }

    pub fn center(&self, t: f64) -> f64 {
        self.x0 + self.v * t
    }

    /// Amplitude and its spatial derivative.
    pub fn value_and_slope(&self, x: f64, t: f64) -> (Complex64, Complex64) {
        let st = self.width(t);
        let offset = x - self.center(t);
        let prefactor = (2.0 * PI).powf(-0.25) / st.sqrt();
        let envelope = -offset * offset / (4.0 * self.s0 * st);
        let wave = Complex64::new(
            0.0,
            self.v * (x - self.x0) - 0.5 * self.v * self.v * t + self.phase,
        );
        let value = self.weight * prefactor * (envelope + wave).exp();
        let log_slope = -offset / (2.0 * self.s0 * st) + Complex64::new(0.0, self.v);
        (value, value * log_slope)
    }

    pub fn value(&self, x: f64, t: f64) -> Complex64 {
        self.value_and_slope(x, t).0
    }

    fn frame(&self, t: f64) -> PacketFrame {
        let st = self.width(t);
        let phase = -self.v * self.x0 - 0.5 * self.v * self.v * t + self.phase;
        PacketFrame {
            center: self.center(t),
            coef: self.weight * (2.0 * PI).powf(-0.25) / st.sqrt()
                * Complex64::from_polar(1.0, phase),
            inv4: 1.0 / (4.0 * self.s0 * st),
            v: self.v,
        }
    }

    /// `<self|other>` of the unit-weight packets at t = 0 (conserved by free evolution).
    fn unit_overlap(&self, other: &GaussianPacket) -> Complex64 {
        let (a, b) = (self, other);
        let quad = 0.25 / (a.s0 * a.s0) + 0.25 / (b.s0 * b.s0);
        let lin = Complex64::new(
            a.x0 / (2.0 * a.s0 * a.s0) + b.x0 / (2.0 * b.s0 * b.s0),
            b.v - a.v,
        );
        let constant = Complex64::new(
            -a.x0 * a.x0 / (4.0 * a.s0 * a.s0) - b.x0 * b.x0 / (4.0 * b.s0 * b.s0),
            a.v * a.x0 - b.v * b.x0 + b.phase - a.phase,
        );
        let norms = (2.0 * PI * a.s0 * a.s0).powf(-0.25) * (2.0 * PI * b.s0 * b.s0).powf(-0.25);
        norms * (PI / quad).sqrt() * (lin * lin / (4.0 * quad) + constant).exp()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SectorWave {
    pub marker: Marker,
    pub packets: Vec<GaussianPacket>,
}

impl SectorWave {
    pub fn new(marker: Marker, packets: Vec<GaussianPacket>) -> Self {
        SectorWave { marker, packets }
    }

    pub fn norm_sqr(&self) -> f64 {
        let mut total = Complex64::new(0.0, 0.0);
        for a in &self.packets {
            for b in &self.packets {
                total += a.weight.conj() * b.weight * a.unit_overlap(b);
            }
        }
        total.re
    }

    fn value_and_slope(&self, x: f64, t: f64) -> (Complex64, Complex64) {
        self.packets.iter().fold(
            (Complex64::new(0.0, 0.0), Complex64::new(0.0, 0.0)),
            |(v, s), p| {
                let (pv, ps) = p.value_and_slope(x, t);
                (v + pv, s + ps)
            },
        )
    }
}

/// Time-dependent packet factors, evaluated once per time slice.
#[derive(Debug, Clone, Copy)]
struct PacketFrame {
    center: f64,
    coef: Complex64,
    inv4: Complex64,
    v: f64,
}

impl PacketFrame {
    fn value_and_slope(&self, x: f64) -> (Complex64, Complex64) {
        let offset = x - self.center;
        let q = offset * offset;
        let value = self.coef
            * Complex64::from_polar((-q * self.inv4.re).exp(), -q * self.inv4.im + self.v * x);
        let log_slope = Complex64::new(0.0, self.v) - 2.0 * offset * self.inv4;
        (value, value * log_slope)
    }
}

/// The whole pilot state frozen at one time.
#[derive(Debug, Clone)]
pub(crate) struct Frame {
    packets: Vec<PacketFrame>,
    /// End index into `packets` of each sector.
    ends: Vec<usize>,
}

impl Frame {
    pub(crate) fn density_and_current(&self, x: f64) -> (f64, f64) {
        let mut start = 0;
        let (mut rho, mut j) = (0.0, 0.0);
        for &end in &self.ends {
            let (mut v, mut d) = (Complex64::new(0.0, 0.0), Complex64::new(0.0, 0.0));
            for p in &self.packets[start..end] {
                let (pv, pd) = p.value_and_slope(x);
                v += pv;
                d += pd;
            }
            rho += v.norm_sqr();
            j += (v.conj() * d).im;
            start = end;
        }
        (rho, j)
    }
}

/// Sector amplitude at `(x, t)`, with `t` measured from the packets' origin.
pub fn psi(sector: &SectorWave, x: f64, t: f64) -> Complex64 {
    sector.value_and_slope(x, t).0
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PilotState {
    sectors: Vec<SectorWave>,
    time_origin: f64,
}

impl PilotState {
    /// Validated state; the analytic norm must be 1 within 1e-9.
    pub fn new(sectors: Vec<SectorWave>, time_origin: f64) -> Result<Self, BohmError> {
        let state = PilotState::unchecked(sectors, time_origin)?;
        let norm = state.norm_sqr();
        if (norm - 1.0).abs() > NORM_TOLERANCE {
            return Err(BohmError::Norm(norm));
        }
        Ok(state)
    }

    /// Rescales every weight so the total norm is exactly 1.
    pub fn normalized(mut sectors: Vec<SectorWave>, time_origin: f64) -> Result<Self, BohmError> {
        let norm = PilotState::unchecked(sectors.clone(), time_origin)?.norm_sqr();
        if !(norm.is_finite() && norm > 0.0) {
            return Err(BohmError::Norm(norm));
        }
        let scale = 1.0 / norm.sqrt();
        for p in sectors.iter_mut().flat_map(|s| s.packets.iter_mut()) {
            p.weight *= scale;
        }
        PilotState::new(sectors, time_origin)
    }

    fn unchecked(sectors: Vec<SectorWave>, time_origin: f64) -> Result<Self, BohmError> {
        if !time_origin.is_finite() {
            return Err(BohmError::NonFinite);
        }
        let mut markers: Vec<Marker> = Vec::new();
        for s in &sectors {
            if markers.contains(&s.marker) {
                return Err(BohmError::DuplicateMarker(s.marker));
            }
            markers.push(s.marker);
            for p in &s.packets {
                p.validate()?;
            }
        }
        Ok(PilotState {
            sectors,
            time_origin,
        })
    }

    pub fn sectors(&self) -> &[SectorWave] {
        &self.sectors
    }

    pub fn time_origin(&self) -> f64 {
        self.time_origin
    }

    pub fn norm_sqr(&self) -> f64 {
        self.sectors.iter().map(SectorWave::norm_sqr).sum()
    }

    fn local_time(&self, t: f64) -> Result<f64, BohmError> {
        let local = t - self.time_origin;
        if local < 0.0 {
            Err(BohmError::NegativeTime(t))
        } else {
            Ok(local)
        }
    }

    /// Total density `Σ_s |ψ_s|²` and current `Im Σ_s conj(ψ_s) ∂ₓψ_s`.
    pub fn density_and_current(&self, x: f64, t: f64) -> Result<(f64, f64), BohmError> {
        Ok(self.frame(t)?.density_and_current(x))
    }

    pub(crate) fn frame(&self, t: f64) -> Result<Frame, BohmError> {
        let t = self.local_time(t)?;
        let mut packets = Vec::new();
        let mut ends = Vec::with_capacity(self.sectors.len());
        for s in &self.sectors {
            packets.extend(s.packets.iter().map(|p| p.frame(t)));
            ends.push(packets.len());
        }
        Ok(Frame { packets, ends })
    }

    pub fn density(&self, x: f64, t: f64) -> Result<f64, BohmError> {
        Ok(self.density_and_current(x, t)?.0)
    }

    /// Density of the sector carrying `marker` (zero if absent).
    pub fn sector_density(&self, marker: Marker, x: f64, t: f64) -> Result<f64, BohmError> {
        let t = self.local_time(t)?;
        Ok(self
            .sectors
            .iter()
            .filter(|s| s.marker == marker)
            .map(|s| psi(s, x, t).norm_sqr())
            .sum())
    }
}

/// Guidance velocity `j / ρ`.
pub fn velocity_field(state: &PilotState, x: f64, t: f64) -> Result<f64, BohmError> {
    let (density, current) = state.density_and_current(x, t)?;
    if density.is_nan() || density < DENSITY_FLOOR {
        return Err(BohmError::BelowFloor { x, t, density });
    }
    Ok(current / density)
}
