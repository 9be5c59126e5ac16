// SPDX-License-Identifier: Apache-2.0

//! Exact simulator for neutron-interferometer gedanken experiments.
//!
//! Three interpretation engines run over the same circuits: unitary-only
//! many-worlds bookkeeping ([`worlds`]), Born-rule collapse sampling at a
//! configurable stage ([`engines`]), and Bohmian pilot-wave trajectories over
//! free Gaussian packets ([`bohm`]). [`cli`] wires them into a closed scenario
//! registry with deterministic reports.

pub mod bohm;
pub mod circuit;
pub mod cli;
pub mod engines;
pub mod experiments;
pub mod statevec;
pub mod worlds;
