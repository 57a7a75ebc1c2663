// Copyright 2026 czpulse contributors
// SPDX-License-Identifier: Apache-2.0

//! Error type shared by every module of the crate.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("value out of domain: {0}")]
    Domain(String),

    #[error("singular point: {0}")]
    Singular(String),

    #[error("no dispersive anchor: {0}")]
    Anchor(String),

    #[error("adiabatic tracking failed between {lo} and {hi} GHz: {reason}")]
    Tracking { lo: f64, hi: f64, reason: String },

    #[error("dispersive assumption violated: {0}")]
    Dispersive(String),

    #[error("pulse left the tabulated range: {0}")]
    Range(String),

    #[error("adiabaticity measure diverges: {0}")]
    Adiabaticity(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("calibration failed: {0}")]
    Calibration(String),

    #[error("optimization failed: {0}")]
    Optimization(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("unknown experiment '{0}'")]
    UnknownExperiment(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// True for failures caused by bad user input rather than numerics.
    pub fn is_usage(&self) -> bool {
        matches!(
            self,
            Error::Config(_) | Error::Domain(_) | Error::UnknownExperiment(_) | Error::Dimension(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
