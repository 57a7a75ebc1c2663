// Copyright 2026 czpulse contributors
// SPDX-License-Identifier: Apache-2.0

//! Simulation and pulse-engineering toolkit for tunable-coupler adiabatic CZ gates.
//!
//! * [`model`]: circuit specification and truncated Hamiltonian.
//! * [`spectrum`]: adiabatic state tracking, ZZ strength, D-factor.
//! * [`perturbation`]: dispersive-regime ZZ formulas.
//! * [`pulse`]: adiabatically weighted, Fourier and Net-Zero waveforms, filtering, distortion.
//! * [`dynamics`]: gate propagation, phase extraction, error per gate, Lindblad oracle.
//! * [`noise`]: decoherence rates, phase covariances and the benchmarking error model.
//! * [`optimize`]: Nelder-Mead and pulse optimization.
//! * [`experiments`]: sweep engine behind the command-line tool.

pub mod config;
pub mod dynamics;
pub mod error;
pub mod experiments;
pub mod linalg;
pub mod model;
pub mod noise;
pub mod optimize;
pub mod output;
pub mod perturbation;
pub mod pulse;
pub mod spectrum;

pub use error::{Error, Result};
