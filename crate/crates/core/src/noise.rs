// Copyright 2026 czpulse contributors
// SPDX-License-Identifier: Apache-2.0

//! Noise-induced transition, leakage and dephasing rates, and the
//! randomized-benchmarking error budget built from them.
//!
//! Rates are reported in 1/μs. Pulse times are in ns, so a time integral of a
//! rate picks up a factor 1e-3.
//!
//! Phase covariances are computed in SI units: sensitivities P_m(t) in
//! rad/s per Φ0, times in s, flux amplitudes in Φ0.

use std::f64::consts::TAU;

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::dynamics::{self, Jump, C64};
use crate::error::{Error, Result};
use crate::linalg::Eigh;
use crate::model::{FluxMapSpec, HamiltonianBuilder};
use crate::pulse::PulseShape;
use crate::spectrum::{self, pair_labels, AdiabaticLabel};

/// Pair-label positions of |100⟩, |001⟩, |101⟩ (Q1 excited, Q2 excited, both).
pub const PHASE_STATES: [usize; 3] = [2, 1, 3];
/// Zero-padding factor of the sensitivity spectra.
pub const PAD_FACTOR: usize = 8;
/// Coupler-frequency spacing (GHz) of the rate grid laid under a pulse.
pub const RATE_GRID_STEP: f64 = 0.002;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseSpec {
    /// μs per mode, relaxation only; `inf` disables a mode
    pub t1_us: Vec<f64>,
    /// A_Φ in (μΦ0)², the 1/f amplitude at 1 Hz
    pub flux_a_uphi0sq: f64,
    /// quasistatic σ_Φ in μΦ0
    pub sigma_uphi0: f64,
    #[serde(default = "default_f_ir")]
    pub f_ir_hz: f64,
    #[serde(default = "default_f_uv")]
    pub f_uv_hz: f64,
}

fn default_f_ir() -> f64 {
    0.01
}

fn default_f_uv() -> f64 {
    1e7
}

impl NoiseSpec {
    pub fn new(t1_us: Vec<f64>, flux_a_uphi0sq: f64, sigma_uphi0: f64) -> Self {
        NoiseSpec { t1_us, flux_a_uphi0sq, sigma_uphi0, f_ir_hz: default_f_ir(), f_uv_hz: default_f_uv() }
    }

    pub fn validate(&self, n_modes: usize) -> Result<()> {
        if self.t1_us.len() != n_modes {
            return Err(Error::Config(format!("t1_us has {} entries for {n_modes} modes", self.t1_us.len())));
        }
        if self.t1_us.iter().any(|&t| !(t > 0.0)) {
            return Err(Error::Config("every T1 must be positive".into()));
        }
        if !(self.flux_a_uphi0sq >= 0.0) || !(self.sigma_uphi0 >= 0.0) {
            return Err(Error::Config("flux noise amplitudes must be non-negative".into()));
        }
        if !(self.f_ir_hz > 0.0 && self.f_ir_hz < self.f_uv_hz && self.f_uv_hz.is_finite()) {
            return Err(Error::Config(format!("need 0 < f_ir < f_uv, got {} and {}", self.f_ir_hz, self.f_uv_hz)));
        }
        Ok(())
    }

    /// σ_Φ (μΦ0) equivalent to the 1/f spectrum for a unipolar pulse: √(2A ln(ω_uv/ω_ir)).
    pub fn sigma_from_one_over_f(&self) -> f64 {
        (2.0 * self.flux_a_uphi0sq * (self.f_uv_hz / self.f_ir_hz).ln()).sqrt()
    }

    fn relaxation(&self) -> Vec<f64> {
        self.t1_us.iter().map(|t| 1.0 / t).collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Mechanism {
    Transverse,
    Longitudinal,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Transition {
    pub source: AdiabaticLabel,
    pub target: AdiabaticLabel,
    /// target is a computational state
    pub in_subspace: bool,
    pub mechanism: Mechanism,
    /// 1/μs
    pub rate: f64,
    /// transition frequency fell below f_ir and the spectrum was read at the cutoff
    pub clamped: bool,
}

/// Tracked eigensystem on a coupler-frequency grid.
struct Frames {
    labels: Vec<AdiabaticLabel>,
    eig: Vec<Eigh>,
    /// `[grid point][label]` eigen-index
    index: Vec<Vec<usize>>,
}

/// Pair labels first, then every other bare state with at most two excitations.
fn frames(builder: &HamiltonianBuilder, grid: &[f64]) -> Result<Frames> {
    if grid.is_empty() {
        return Err(Error::Domain("empty coupler-frequency grid".into()));
    }
    let labels = spectrum::low_excitation_labels(builder, 2);
    let mut order: Vec<usize> = (0..grid.len()).collect();
    order.sort_by(|&a, &b| grid[b].total_cmp(&grid[a]));
    let mut path = spectrum::anchored_path(builder, &labels, grid[order[0]], 0.02)?;
    let lead = path.len() - 1;
    path.extend(order[1..].iter().map(|&k| grid[k]));
    let t = spectrum::track_path(builder, &path, &labels)?;
    let mut index = vec![Vec::new(); grid.len()];
    for (j, &k) in order.iter().enumerate() {
        index[k] = t.index[lead + j].clone();
    }
    let eig = grid.par_iter().map(|&w| builder.eigh(w)).collect();
    Ok(Frames { labels, eig, index })
}

/// a_m + a_m† in the Fock basis.
fn quadrature(builder: &HamiltonianBuilder, mode: usize) -> DMatrix<f64> {
    let basis = &builder.basis;
    let mut x = DMatrix::zeros(basis.dim(), basis.dim());
    for (col, occ) in basis.occupations.iter().enumerate() {
        let n = occ[mode];
        if n + 1 < basis.levels[mode] {
            let mut up = occ.clone();
            up[mode] = n + 1;
            let row = basis.index_of(&up).expect("in range");
            x[(row, col)] = ((n + 1) as f64).sqrt();
            x[(col, row)] = ((n + 1) as f64).sqrt();
        }
    }
    x
}

fn flux_map(builder: &HamiltonianBuilder) -> Result<FluxMapSpec> {
    builder
        .spec
        .flux_map
        .ok_or_else(|| Error::Config("flux-noise rates need a flux map for the coupler".into()))
}

/// Rates and dephasing sensitivities on a coupler-frequency grid.
#[derive(Clone, Debug)]
pub struct RateCurves {
    pub omega_c: Vec<f64>,
    /// computational labels ordered 00, 01, 10, 11
    pub labels: Vec<AdiabaticLabel>,
    /// Γ_{S→S}, 1/μs
    pub gamma_ss: Vec<f64>,
    /// Γ_{S→L}, 1/μs
    pub gamma_sl: Vec<f64>,
    /// Γ_φ for |100⟩, |001⟩, |101⟩ in 1/μs, signed; zero without a flux map
    pub gamma_phi: Vec<[f64; 3]>,
    /// ∂ω̃_s/∂ω_c relative to the ground state, same state order
    pub dressed_slope: Vec<[f64; 3]>,
    pub transitions: Vec<Vec<Transition>>,
    /// flux-noise terms were included
    pub flux_terms: bool,
}

impl RateCurves {
    pub fn any_clamped(&self) -> bool {
        self.transitions.iter().flatten().any(|t| t.clamped)
    }
}

/// Evaluate every rate on `grid` (GHz). Flux-noise terms are included when the
/// circuit carries a flux map.
pub fn rate_curves(builder: &HamiltonianBuilder, noise: &NoiseSpec, grid: &[f64]) -> Result<RateCurves> {
    let spec = &builder.spec;
    noise.validate(spec.n_modes())?;
    let fm = spec.flux_map;
    if let Some(f) = &fm {
        if let Some(&w) = grid.iter().find(|&&w| w > f.omega_max + 1e-12) {
            return Err(Error::Domain(format!("coupler frequency {w} GHz above the flux-map maximum {}", f.omega_max)));
        }
    }
    let fr = frames(builder, grid)?;
    let relax = noise.relaxation();
    let xs: Vec<DMatrix<f64>> = (0..spec.n_modes()).map(|m| quadrature(builder, m)).collect();
    let c = spec.coupler_index;
    let a_flux = noise.flux_a_uphi0sq * 1e-12;
    let sigma = noise.sigma_uphi0 * 1e-6;
    let rows: Vec<Result<(Vec<Transition>, [f64; 3], [f64; 3])>> = (0..grid.len())
        .into_par_iter()
        .map(|k| {
            let eig = &fr.eig[k];
            let idx = &fr.index[k];
            let vec = |l: usize| eig.vectors.column(idx[l]);
            let mut out = Vec::new();
            // transverse: Γ = ½ Σ_i |⟨t|x_i|s⟩|² (2/T1_i), downward only
            for s in 0..4 {
                let vs = vec(s);
                let xv: Vec<DVector<f64>> = xs.iter().map(|x| x * vs).collect();
                for t in 0..fr.labels.len() {
                    if t == s || eig.values[idx[t]] >= eig.values[idx[s]] {
                        continue;
                    }
                    let vt = vec(t);
                    let rate: f64 = xv.iter().zip(&relax).map(|(x, r)| vt.dot(x).powi(2) * r).sum();
                    if rate > 0.0 {
                        out.push(Transition {
                            source: fr.labels[s].clone(),
                            target: fr.labels[t].clone(),
                            in_subspace: t < 4,
                            mechanism: Mechanism::Transverse,
                            rate,
                            clamped: false,
                        });
                    }
                }
            }
            let mut phi = [0.0; 3];
            let mut slope = [0.0; 3];
            if let Some(f) = &fm {
                let dw = f.slope_at(grid[k])? * TAU * 1e9; // rad/s per Φ0
                let occ: Vec<f64> = builder.basis.occupations.iter().map(|o| o[c] as f64).collect();
                // longitudinal: Γ = ½ |⟨t|2n_c|s⟩|² (dω_c/dΦ)² A/|f|, both directions
                for s in 0..4 {
                    let vs = vec(s);
                    let nv = DVector::from_iterator(vs.len(), vs.iter().zip(&occ).map(|(a, n)| a * n));
                    for t in 0..fr.labels.len() {
                        if t == s {
                            continue;
                        }
                        let m = 2.0 * vec(t).dot(&nv);
                        let f_hz = (eig.values[idx[s]] - eig.values[idx[t]]).abs() / TAU * 1e9;
                        let clamped = f_hz < noise.f_ir_hz;
                        let s_flux = a_flux / f_hz.max(noise.f_ir_hz);
                        let rate = 0.5 * m * m * dw * dw * s_flux * 1e-6;
                        if rate > 0.0 {
                            out.push(Transition {
                                source: fr.labels[s].clone(),
                                target: fr.labels[t].clone(),
                                in_subspace: t < 4,
                                mechanism: Mechanism::Longitudinal,
                                rate,
                                clamped,
                            });
                        }
                    }
                }
                let dh = builder.derivative(grid[k]);
                let hf = |l: usize| vec(l).dot(&(&dh * vec(l)));
                let ground = hf(0);
                for (j, &s) in PHASE_STATES.iter().enumerate() {
                    slope[j] = hf(s) - ground;
                    // Γ_φ = (∂ω̃/∂ω_c)(∂ω_c/∂Φ) σ/√2, rad/s → 1/μs
                    phi[j] = slope[j] * dw * sigma / 2f64.sqrt() * 1e-6;
                }
            } else {
                let dh = builder.derivative(grid[k]);
                let hf = |l: usize| vec(l).dot(&(&dh * vec(l)));
                let ground = hf(0);
                for (j, &s) in PHASE_STATES.iter().enumerate() {
                    slope[j] = hf(s) - ground;
                }
            }
            Ok((out, phi, slope))
        })
        .collect();
    let mut curves = RateCurves {
        omega_c: grid.to_vec(),
        labels: fr.labels[..4].to_vec(),
        gamma_ss: Vec::with_capacity(grid.len()),
        gamma_sl: Vec::with_capacity(grid.len()),
        gamma_phi: Vec::with_capacity(grid.len()),
        dressed_slope: Vec::with_capacity(grid.len()),
        transitions: Vec::with_capacity(grid.len()),
        flux_terms: fm.is_some(),
    };
    for r in rows {
        let (tr, phi, slope) = r?;
        curves.gamma_ss.push(tr.iter().filter(|t| t.in_subspace).map(|t| t.rate).sum());
        curves.gamma_sl.push(tr.iter().filter(|t| !t.in_subspace).map(|t| t.rate).sum());
        curves.gamma_phi.push(phi);
        curves.dressed_slope.push(slope);
        curves.transitions.push(tr);
    }
    Ok(curves)
}

/// Relaxation-induced rates at one bias (1/μs).
pub fn transverse_rates(builder: &HamiltonianBuilder, noise: &NoiseSpec, omega_c: f64) -> Result<Vec<Transition>> {
    let mut spec = builder.spec.clone();
    spec.flux_map = None;
    let b = HamiltonianBuilder::new(&spec);
    Ok(rate_curves(&b, noise, &[omega_c])?.transitions.remove(0))
}

/// Flux-noise-induced rates at one bias (1/μs).
pub fn longitudinal_rates(builder: &HamiltonianBuilder, noise: &NoiseSpec, omega_c: f64) -> Result<Vec<Transition>> {
    flux_map(builder)?;
    let all = rate_curves(builder, noise, &[omega_c])?.transitions.remove(0);
    Ok(all.into_iter().filter(|t| t.mechanism == Mechanism::Longitudinal).collect())
}

/// Γ_φ (1/μs, signed) of |100⟩, |001⟩, |101⟩ at one bias.
pub fn dephasing_rates(builder: &HamiltonianBuilder, noise: &NoiseSpec, omega_c: f64) -> Result<[f64; 3]> {
    flux_map(builder)?;
    Ok(rate_curves(builder, noise, &[omega_c])?.gamma_phi[0])
}

/// Grid covering the excursion of `pulse`.
pub fn pulse_grid(pulse: &PulseShape) -> Vec<f64> {
    let (lo, hi) = (pulse.min_frequency(), pulse.max_frequency());
    if hi - lo < 1e-9 {
        return vec![lo];
    }
    let n = (((hi - lo) / RATE_GRID_STEP).ceil() as usize + 1).max(2);
    spectrum::linspace(lo, hi, n)
}

/// Trapezoid rule on a possibly non-uniform grid.
fn integrate(x: &[f64], y: &[f64]) -> f64 {
    x.windows(2).zip(y.windows(2)).map(|(a, b)| 0.5 * (a[1] - a[0]) * (b[0] + b[1])).sum()
}

/// Linear interpolation on an ascending grid, clamped at the ends.
fn interp(xs: &[f64], ys: &[f64], x: f64) -> f64 {
    if xs.len() == 1 || x <= xs[0] {
        return ys[0];
    }
    let n = xs.len();
    if x >= xs[n - 1] {
        return ys[n - 1];
    }
    let k = xs.partition_point(|&v| v <= x).min(n - 1);
    let (x0, x1) = (xs[k - 1], xs[k]);
    ys[k - 1] + (ys[k] - ys[k - 1]) * (x - x0) / (x1 - x0)
}

/// Integrated rates γ̄τ of the two-qubit computational states, ordered 00, 01, 10, 11.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct TwoQubitRates {
    /// leakage out of each state
    pub leak: [f64; 4],
    /// `intra[s][t]`, transitions between computational states
    pub intra: [[f64; 4]; 4],
}

impl TwoQubitRates {
    pub fn total_intra(&self) -> f64 {
        self.intra.iter().flatten().sum()
    }

    pub fn total_leak(&self) -> f64 {
        self.leak.iter().sum()
    }
}

#[derive(Clone, Debug)]
pub struct RbErrorBreakdown {
    /// ⅕∫Γ_{S→S}dt
    pub transition_ss: f64,
    /// ¼∫Γ_{S→L}dt
    pub transition_sl: f64,
    pub transition: f64,
    /// ∫Γ_φ dt (rad) for |100⟩, |001⟩, |101⟩
    pub eps_phi: [f64; 3],
    pub dephasing: f64,
    pub total: f64,
    pub integrated: TwoQubitRates,
    pub clamped: bool,
}

/// Integrated rates along `pulse`.
fn integrate_along(curves: &RateCurves, pulse: &PulseShape) -> (TwoQubitRates, [f64; 3]) {
    let times = pulse.times();
    let grid = &curves.omega_c;
    let mut rates = TwoQubitRates::default();
    let mut keys: Vec<(usize, usize, bool)> = Vec::new();
    let labels = &curves.labels;
    for tr in curves.transitions.iter().flatten() {
        let s = labels.iter().position(|l| *l == tr.source).expect("source is computational");
        let t = if tr.in_subspace { labels.iter().position(|l| *l == tr.target).unwrap() } else { 4 };
        let key = (s, t, tr.in_subspace);
        if !keys.contains(&key) {
            keys.push(key);
        }
    }
    for &(s, t, inside) in &keys {
        let per_grid: Vec<f64> = curves
            .transitions
            .iter()
            .map(|row| {
                row.iter()
                    .filter(|tr| {
                        tr.source == labels[s] && tr.in_subspace == inside && (!inside || tr.target == labels[t])
                    })
                    .map(|tr| tr.rate)
                    .sum()
            })
            .collect();
        let along: Vec<f64> = pulse.samples.iter().map(|&w| interp(grid, &per_grid, w)).collect();
        let v = integrate(&times, &along) * 1e-3;
        if inside {
            rates.intra[s][t] += v;
        } else {
            rates.leak[s] += v;
        }
    }
    let mut eps = [0.0; 3];
    for (j, e) in eps.iter_mut().enumerate() {
        let per_grid: Vec<f64> = curves.gamma_phi.iter().map(|g| g[j]).collect();
        let along: Vec<f64> = pulse.samples.iter().map(|&w| interp(grid, &per_grid, w)).collect();
        *e = integrate(&times, &along) * 1e-3;
    }
    (rates, eps)
}

/// Phase error ε_ph from the covariance of |100⟩, |001⟩, |101⟩ phases:
/// (1/20)[3 Σ⟨Δφ_m²⟩ − 2 Σ_{m<n} ⟨Δφ_m Δφ_n⟩].
pub fn dephasing_from_covariance(cov: &[[f64; 3]; 3]) -> f64 {
    let diag = cov[0][0] + cov[1][1] + cov[2][2];
    let off = cov[0][1] + cov[0][2] + cov[1][2];
    (3.0 * diag - 2.0 * off) / 20.0
}

/// Phase error for a single common quasistatic source: (1/10)[3 Σ ε_m² − 2 Σ_{m<n} ε_m ε_n].
pub fn dephasing_from_rates(eps: &[f64; 3]) -> f64 {
    let sq: f64 = eps.iter().map(|e| e * e).sum();
    let cross = eps[0] * eps[1] + eps[0] * eps[2] + eps[1] * eps[2];
    (3.0 * sq - 2.0 * cross) / 10.0
}

/// RB error of a gate driven by `pulse`: transitions plus quasistatic flux dephasing.
pub fn rb_error(builder: &HamiltonianBuilder, noise: &NoiseSpec, pulse: &PulseShape) -> Result<RbErrorBreakdown> {
    flux_map(builder)?;
    let curves = rate_curves(builder, noise, &pulse_grid(pulse))?;
    Ok(rb_error_from_curves(&curves, pulse))
}

pub fn rb_error_from_curves(curves: &RateCurves, pulse: &PulseShape) -> RbErrorBreakdown {
    let (integrated, eps_phi) = integrate_along(curves, pulse);
    let transition_ss = integrated.total_intra() / 5.0;
    let transition_sl = integrated.total_leak() / 4.0;
    let dephasing = dephasing_from_rates(&eps_phi);
    RbErrorBreakdown {
        transition_ss,
        transition_sl,
        transition: transition_ss + transition_sl,
        eps_phi,
        dephasing,
        total: transition_ss + transition_sl + dephasing,
        integrated,
        clamped: curves.any_clamped(),
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum NoiseKind {
    Quasistatic,
    OneOverF,
    /// two-sided PSD in (μΦ0)²/Hz
    White(f64),
}

impl NoiseKind {
    pub fn tag(&self) -> &'static str {
        match self {
            NoiseKind::Quasistatic => "quasistatic",
            NoiseKind::OneOverF => "one_over_f",
            NoiseKind::White(_) => "white",
        }
    }
}

#[derive(Clone, Debug)]
pub struct PhaseCovariance {
    /// rad², states |100⟩, |001⟩, |101⟩
    pub matrix: [[f64; 3]; 3],
    /// log-spaced grid, f_ir..f_uv
    pub freq_hz: Vec<f64>,
    /// F_m(ω) = ∫P_m(t) e^{iωt} dt in rad/Φ0 on `freq_hz`
    pub spectra: Vec<[C64; 3]>,
    /// |F_m(0)|²
    pub dc_power: [f64; 3],
    /// frequency spacing of the zero-padded transform
    pub resolution_hz: f64,
    pub kind: NoiseKind,
}

/// Phase sensitivity P_m(t) = ∂ω̃_m/∂Φ in rad/s per Φ0 at each pulse sample.
pub fn sensitivities(builder: &HamiltonianBuilder, pulse: &PulseShape) -> Result<[Vec<f64>; 3]> {
    let fm = flux_map(builder)?;
    let curves = rate_curves(
        builder,
        &NoiseSpec::new(vec![f64::INFINITY; builder.spec.n_modes()], 0.0, 0.0),
        &pulse_grid(pulse),
    )?;
    let flux = pulse.flux.as_ref().filter(|f| f.len() == pulse.samples.len());
    let mut out: [Vec<f64>; 3] = Default::default();
    for (k, &w) in pulse.samples.iter().enumerate() {
        let dw = match flux {
            Some(f) => fm.frequency(f[k])?.1,
            None => fm.slope_at(w)?,
        } * TAU
            * 1e9;
        for (j, o) in out.iter_mut().enumerate() {
            let s: Vec<f64> = curves.dressed_slope.iter().map(|d| d[j]).collect();
            o.push(interp(&curves.omega_c, &s, w) * dw);
        }
    }
    Ok(out)
}

/// Zero-padded discrete transforms F_m(ω_j) = dt Σ_k P_m(t_k) e^{iω_j t_k}, ω_j = 2πj/(M dt).
fn padded_spectra(p: &[Vec<f64>; 3], dt_s: f64, pad: usize) -> (Vec<[C64; 3]>, f64) {
    let n = p[0].len();
    let m = (n * pad).max(1);
    let mut planner = FftPlanner::<f64>::new();
    let fft = planner.plan_fft_inverse(m);
    let mut out = vec![[C64::new(0.0, 0.0); 3]; m / 2 + 1];
    for (j, pm) in p.iter().enumerate() {
        let mut buf: Vec<C64> = pm.iter().map(|&x| C64::new(x * dt_s, 0.0)).collect();
        buf.resize(m, C64::new(0.0, 0.0));
        fft.process(&mut buf);
        for (k, o) in out.iter_mut().enumerate() {
            o[j] = buf[k];
        }
    }
    (out, 1.0 / (m as f64 * dt_s))
}

fn interp_spectrum(bins: &[[C64; 3]], df: f64, f: f64) -> [C64; 3] {
    let x = f / df;
    let k = x.floor() as usize;
    if k + 1 >= bins.len() {
        return bins[bins.len() - 1];
    }
    let w = x - k as f64;
    let mut out = [C64::new(0.0, 0.0); 3];
    for (j, o) in out.iter_mut().enumerate() {
        *o = bins[k][j] * (1.0 - w) + bins[k + 1][j] * w;
    }
    out
}

/// Phase covariance ⟨Δφ_m Δφ_n⟩ of |100⟩, |001⟩, |101⟩ under flux noise of the given kind.
pub fn phase_covariance(builder: &HamiltonianBuilder, noise: &NoiseSpec, pulse: &PulseShape, kind: NoiseKind) -> Result<PhaseCovariance> {
    noise.validate(builder.spec.n_modes())?;
    let p = sensitivities(builder, pulse)?;
    let dt_s = pulse.dt * 1e-9;
    let times: Vec<f64> = pulse.times().iter().map(|t| t * 1e-9).collect();
    let (bins, df) = padded_spectra(&p, dt_s, PAD_FACTOR);
    let n_grid = 2000;
    let (lo, hi) = (noise.f_ir_hz.ln(), noise.f_uv_hz.ln());
    let freq_hz: Vec<f64> = spectrum::linspace(lo, hi, n_grid).into_iter().map(f64::exp).collect();
    let spectra: Vec<[C64; 3]> = freq_hz.iter().map(|&f| interp_spectrum(&bins, df, f)).collect();
    let dc: [f64; 3] = std::array::from_fn(|j| integrate(&times, &p[j]));
    let mut matrix = [[0.0; 3]; 3];
    for m in 0..3 {
        for n in m..3 {
            let v = match kind {
                NoiseKind::Quasistatic => {
                    let s = noise.sigma_uphi0 * 1e-6;
                    s * s * dc[m] * dc[n]
                }
                NoiseKind::White(a) => {
                    let prod: Vec<f64> = p[m].iter().zip(&p[n]).map(|(x, y)| x * y).collect();
                    a * 1e-12 * integrate(&times, &prod)
                }
                NoiseKind::OneOverF => {
                    let logs: Vec<f64> = freq_hz.iter().map(|f| f.ln()).collect();
                    let re: Vec<f64> = spectra.iter().map(|s| (s[m] * s[n].conj()).re).collect();
                    2.0 * noise.flux_a_uphi0sq * 1e-12 * integrate(&logs, &re)
                }
            };
            matrix[m][n] = v;
            matrix[n][m] = v;
        }
    }
    Ok(PhaseCovariance {
        matrix,
        freq_hz,
        spectra,
        dc_power: std::array::from_fn(|j| dc[j] * dc[j]),
        resolution_hz: df,
        kind,
    })
}

/// F_m(ω) of the pulse's phase sensitivities at arbitrary frequencies (Hz), for plotting.
pub fn sensitivity_spectra(builder: &HamiltonianBuilder, pulse: &PulseShape, freq_hz: &[f64]) -> Result<Vec<[C64; 3]>> {
    let p = sensitivities(builder, pulse)?;
    let (bins, df) = padded_spectra(&p, pulse.dt * 1e-9, PAD_FACTOR);
    Ok(freq_hz.iter().map(|&f| interp_spectrum(&bins, df, f)).collect())
}

/// Sample covariance of Δφ_m = Σ_k P_m(t_k) x_k dt under white noise of two-sided PSD
/// `psd` (Φ0²/Hz), i.e. independent x_k with variance psd/dt.
pub fn white_noise_monte_carlo(p: &[Vec<f64>; 3], dt_s: f64, psd: f64, realizations: usize, seed: u64) -> [[f64; 3]; 3] {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, (psd / dt_s).sqrt()).expect("finite std");
    let mut acc = [[0.0; 3]; 3];
    let n = p[0].len();
    for _ in 0..realizations {
        let mut phi = [0.0; 3];
        for k in 0..n {
            let x = normal.sample(&mut rng) * dt_s;
            for j in 0..3 {
                phi[j] += p[j][k] * x;
            }
        }
        for a in 0..3 {
            for b in 0..3 {
                acc[a][b] += phi[a] * phi[b];
            }
        }
    }
    acc.map(|row| row.map(|v| v / realizations as f64))
}

/// Per-state error split of the RB model.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct StateErrors {
    pub dephasing: f64,
    pub leakage: f64,
    pub intra: f64,
}

impl StateErrors {
    pub fn total(&self) -> f64 {
        self.dephasing + self.leakage + self.intra
    }
}

/// The 60 equiprobable RB states: 4 basis states, 24 two-state and 32 four-state
/// superpositions, amplitudes ordered 00, 01, 10, 11.
pub fn rb_states() -> Vec<[C64; 4]> {
    let one = C64::new(1.0, 0.0);
    let zero = C64::new(0.0, 0.0);
    let phases = [one, -one, C64::new(0.0, 1.0), C64::new(0.0, -1.0)];
    let mut out = Vec::with_capacity(60);
    for k in 0..4 {
        let mut v = [zero; 4];
        v[k] = one;
        out.push(v);
    }
    let r = std::f64::consts::FRAC_1_SQRT_2;
    for a in 0..4 {
        for b in (a + 1)..4 {
            for &ph in &phases {
                let mut v = [zero; 4];
                v[a] = one * r;
                v[b] = ph * r;
                out.push(v);
            }
        }
    }
    for &a in &phases {
        for &b in &phases {
            for sign in [1.0, -1.0] {
                out.push([one * 0.5, a * 0.5, b * 0.5, a * b * sign * 0.5]);
            }
        }
    }
    out
}

/// RB states as d = 4 vectors.
pub fn rb_state_vectors() -> Vec<DVector<C64>> {
    rb_states().into_iter().map(|s| DVector::from_column_slice(&s)).collect()
}

/// Covariance of |100⟩, |001⟩, |101⟩ phases re-indexed over 00, 01, 10, 11 (zero row for 00).
pub fn covariance_pair_order(cov: &[[f64; 3]; 3]) -> [[f64; 4]; 4] {
    let mut out = [[0.0; 4]; 4];
    for (a, &sa) in PHASE_STATES.iter().enumerate() {
        for (b, &sb) in PHASE_STATES.iter().enumerate() {
            out[sa][sb] = cov[a][b];
        }
    }
    out
}

/// Second-order errors of one state from its populations: dephasing is the population-weighted
/// phase variance, a jump s→t costs γτ p_s (1 − p_t), leakage costs γτ p_s.
pub fn state_errors(psi: &[C64; 4], rates: &TwoQubitRates, cov: &[[f64; 4]; 4]) -> StateErrors {
    let p: Vec<f64> = psi.iter().map(|a| a.norm_sqr()).collect();
    let mut e = StateErrors::default();
    for m in 0..4 {
        e.leakage += p[m] * rates.leak[m];
        e.dephasing += p[m] * cov[m][m];
        for n in 0..4 {
            e.dephasing -= p[m] * p[n] * cov[m][n];
            if m != n {
                e.intra += rates.intra[m][n] * p[m] * (1.0 - p[n]);
            }
        }
    }
    e
}

/// Per-state errors as tabulated for the 60 RB states, in [`rb_states`] order.
///
/// The four-state row lists γ_{11→10} twice where γ_{11→01} would balance the
/// tabulated average; it is reproduced as printed.
pub fn table1_rows(rates: &TwoQubitRates, cov: &[[f64; 4]; 4]) -> Vec<StateErrors> {
    let g = |s: usize, t: usize| rates.intra[s][t];
    let l = rates.leak;
    let c = |m: usize, n: usize| cov[m][n];
    let row = |dephasing, leakage, intra| StateErrors { dephasing, leakage, intra };
    let mut out = vec![
        row(0.0, 0.0, 0.0),
        row(0.0, l[1], g(1, 0) + g(1, 2)),
        row(0.0, l[2], g(2, 0) + g(2, 1)),
        row(0.0, l[3], g(3, 2) + g(3, 1)),
    ];
    let pairs = [
        row(c(1, 1) / 4.0, l[1] / 2.0, g(1, 0) / 4.0 + g(1, 2) / 2.0),
        row(c(2, 2) / 4.0, l[2] / 2.0, g(2, 0) / 4.0 + g(2, 1) / 2.0),
        row(c(3, 3) / 4.0, l[3] / 2.0, g(3, 2) / 2.0 + g(3, 1) / 2.0),
        row(
            (c(1, 1) + c(2, 2) - 2.0 * c(1, 2)) / 4.0,
            (l[1] + l[2]) / 2.0,
            g(2, 0) / 2.0 + g(1, 0) / 2.0 + g(2, 1) / 4.0 + g(1, 2) / 4.0,
        ),
        row(
            (c(3, 3) + c(1, 1) - 2.0 * c(1, 3)) / 4.0,
            (l[1] + l[3]) / 2.0,
            g(3, 2) / 2.0 + g(3, 1) / 4.0 + g(1, 0) / 2.0 + g(1, 2) / 2.0,
        ),
        row(
            (c(3, 3) + c(2, 2) - 2.0 * c(2, 3)) / 4.0,
            (l[2] + l[3]) / 2.0,
            g(3, 2) / 4.0 + g(3, 1) / 2.0 + g(2, 0) / 2.0 + g(2, 1) / 2.0,
        ),
    ];
    for p in pairs {
        out.extend(std::iter::repeat_n(p, 4));
    }
    let four = row(
        (3.0 * (c(2, 2) + c(1, 1) + c(3, 3)) - 2.0 * (c(1, 2) + c(1, 3) + c(2, 3))) / 16.0,
        (l[3] + l[2] + l[1]) / 4.0,
        3.0 * (g(3, 2) + g(3, 2) + g(2, 0) + g(1, 0) + g(1, 2) + g(2, 1)) / 16.0,
    );
    out.extend(std::iter::repeat_n(four, 32));
    out
}

/// Closed-form RB average: coefficients 3/20 and −2/20 on the phase covariances,
/// 1/4 on leakage, 1/5 on intra-subspace transitions.
pub fn closed_form_average(rates: &TwoQubitRates, cov: &[[f64; 4]; 4]) -> StateErrors {
    let diag = cov[1][1] + cov[2][2] + cov[3][3];
    let off = cov[1][2] + cov[1][3] + cov[2][3];
    StateErrors {
        dephasing: (3.0 * diag - 2.0 * off) / 20.0,
        leakage: (rates.leak[1] + rates.leak[2] + rates.leak[3]) / 4.0,
        intra: rates.total_intra() / 5.0,
    }
}

fn mean(rows: &[StateErrors]) -> StateErrors {
    let n = rows.len() as f64;
    StateErrors {
        dephasing: rows.iter().map(|r| r.dephasing).sum::<f64>() / n,
        leakage: rows.iter().map(|r| r.leakage).sum::<f64>() / n,
        intra: rows.iter().map(|r| r.intra).sum::<f64>() / n,
    }
}

#[derive(Clone, Debug)]
pub struct Table1 {
    pub states: Vec<[C64; 4]>,
    /// as tabulated
    pub rows: Vec<StateErrors>,
    /// recomputed from each state's populations
    pub brute_force: Vec<StateErrors>,
    pub rows_average: StateErrors,
    pub brute_force_average: StateErrors,
    pub closed_form: StateErrors,
}

impl Table1 {
    /// Largest per-state difference between the tabulated and recomputed errors.
    pub fn transcription_gap(&self) -> f64 {
        self.rows
            .iter()
            .zip(&self.brute_force)
            .map(|(a, b)| {
                (a.dephasing - b.dephasing).abs().max((a.leakage - b.leakage).abs()).max((a.intra - b.intra).abs())
            })
            .fold(0.0, f64::max)
    }
}

pub fn table1_states_and_errors(rates: &TwoQubitRates, cov: &[[f64; 4]; 4]) -> Table1 {
    let states = rb_states();
    let rows = table1_rows(rates, cov);
    let brute_force: Vec<StateErrors> = states.iter().map(|s| state_errors(s, rates, cov)).collect();
    Table1 {
        rows_average: mean(&rows),
        brute_force_average: mean(&brute_force),
        closed_form: closed_form_average(rates, cov),
        states,
        rows,
        brute_force,
    }
}

/// Result of checking the rate-integral transition error against a Lindblad simulation.
#[derive(Clone, Debug)]
pub struct LindbladCheck {
    pub rate_integral: f64,
    pub lindblad: f64,
    pub integrated_rate: f64,
}

/// Relaxation-only RB transition error of `pulse`, from rate integrals and from
/// Lindblad propagation of the 60 RB states (via the 16 operators |i⟩⟨j|).
pub fn lindblad_transition_check(builder: &HamiltonianBuilder, noise: &NoiseSpec, pulse: &PulseShape, dt_max: f64) -> Result<LindbladCheck> {
    let mut spec = builder.spec.clone();
    spec.flux_map = None;
    let builder = HamiltonianBuilder::new(&spec);
    let curves = rate_curves(&builder, noise, &pulse_grid(pulse))?;
    let rb = rb_error_from_curves(&curves, pulse);
    let grid = curves.omega_c.clone();
    let mut keys: Vec<(AdiabaticLabel, AdiabaticLabel)> = Vec::new();
    for tr in curves.transitions.iter().flatten() {
        let k = (tr.source.clone(), tr.target.clone());
        if !keys.contains(&k) {
            keys.push(k);
        }
    }
    let per_key: Vec<Vec<f64>> = keys
        .iter()
        .map(|(s, t)| {
            curves
                .transitions
                .iter()
                .map(|row| row.iter().filter(|tr| tr.source == *s && tr.target == *t).map(|tr| tr.rate).sum())
                .collect()
        })
        .collect();
    let pulse_ref = pulse;
    let jumps: Vec<Jump> = keys
        .iter()
        .zip(per_key)
        .map(|((s, t), rates)| {
            let grid = grid.clone();
            Jump {
                source: s.clone(),
                target: t.clone(),
                rate: Box::new(move |time: f64| interp(&grid, &rates, pulse_ref.at(time)) * 1e-3),
            }
        })
        .collect();
    let labels = pair_labels(&spec, (spec.qubit_indices[0], spec.qubit_indices[1]));
    let path = spectrum::anchored_path(&builder, &labels, pulse.samples[0], 0.02)?;
    let t = spectrum::track_path(&builder, &path, &labels)?;
    let v0: DMatrix<C64> = t.vectors.last().unwrap().map(|x| C64::new(x, 0.0));
    let dim = builder.dim();
    let u = dynamics::propagate(&builder, pulse, dt_max)?;
    let ideal = &u * &v0;
    let channel: Vec<Result<DMatrix<C64>>> = (0..16)
        .into_par_iter()
        .map(|k| {
            let (i, j) = (k / 4, k % 4);
            let rho0 = v0.column(i) * v0.column(j).adjoint();
            let rho = dynamics::lindblad_propagate(&builder, pulse, &jumps, &rho0, dt_max)?;
            Ok(rho)
        })
        .collect();
    let channel: Vec<DMatrix<C64>> = channel.into_iter().collect::<Result<_>>()?;
    let mut total = 0.0;
    let states = rb_states();
    for psi in &states {
        let mut rho = DMatrix::<C64>::zeros(dim, dim);
        for i in 0..4 {
            for j in 0..4 {
                rho += &channel[i * 4 + j] * (psi[i] * psi[j].conj());
            }
        }
        let mut out = DVector::<C64>::zeros(dim);
        for i in 0..4 {
            out += ideal.column(i) * psi[i];
        }
        total += 1.0 - out.dotc(&(&rho * &out)).re;
    }
    Ok(LindbladCheck {
        rate_integral: rb.transition,
        lindblad: total / states.len() as f64,
        integrated_rate: rb.integrated.total_intra() + rb.integrated.total_leak(),
    })
}


#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::reference_circuit;
    use crate::optimize::GateSetup;
    use crate::pulse::PulseKind;

    fn flux_circuit(levels: usize) -> HamiltonianBuilder {
        let mut spec = reference_circuit(levels);
        spec.flux_map = Some(FluxMapSpec { omega_max: 8.2, alpha_c: -0.3 });
        HamiltonianBuilder::new(&spec)
    }

    fn noise() -> NoiseSpec {
        NoiseSpec::new(vec![20.0, 10.0, 20.0], 100.0, 60.0)
    }

    fn unipolar(b: &HamiltonianBuilder, tg: f64) -> PulseShape {
        let setup = GateSetup::new(&b.spec, &b.spec, 7.87, 5.75).unwrap();
        let l = setup.calibrated_lambda(PulseKind::Awp, tg).unwrap();
        setup.raw_pulse(PulseKind::Awp, tg, &[l]).unwrap()
    }

    #[test]
    fn isolated_qubit_relaxes_at_one_over_t1() {
        let mut spec = reference_circuit(3);
        for c in &mut spec.couplings {
            c.rho = 0.0;
        }
        let b = HamiltonianBuilder::new(&spec);
        let n = NoiseSpec::new(vec![17.0, 10.0, 23.0], 0.0, 0.0);
        let tr = transverse_rates(&b, &n, 7.0).unwrap();
        let from_q1: Vec<&Transition> = tr.iter().filter(|t| t.source.0 == [1, 0, 0]).collect();
        assert_eq!(from_q1.len(), 1);
        assert_eq!(from_q1[0].target.0, vec![0, 0, 0]);
        assert_eq!(from_q1[0].rate, 1.0 / 17.0);
        let from_q2 = tr.iter().find(|t| t.source.0 == [0, 0, 1]).unwrap();
        assert_eq!(from_q2.rate, 1.0 / 23.0);
    }

    #[test]
    fn relaxation_mostly_stays_in_the_subspace() {
        let b = flux_circuit(3);
        let c = rate_curves(&b, &noise(), &[6.4, 7.0, 7.87, 8.2]).unwrap();
        for k in 0..4 {
            assert!(c.gamma_ss[k] > 100.0 * c.gamma_sl[k], "{} {}", c.gamma_ss[k], c.gamma_sl[k]);
        }
        // near resonance the coupler contributes
        let near = rate_curves(&b, &noise(), &[6.1]).unwrap();
        assert!(near.gamma_ss[0] > c.gamma_ss[2]);
    }

    #[test]
    fn sweet_spot_has_no_first_order_dephasing() {
        let b = flux_circuit(3);
        let g = dephasing_rates(&b, &noise(), 8.2).unwrap();
        assert!(g.iter().all(|&x| x.abs() < 1e-9), "{g:?}");
        let g = dephasing_rates(&b, &noise(), 6.3).unwrap();
        assert!(g.iter().any(|&x| x.abs() > 1e-3));
    }

    #[test]
    fn flux_rates_need_a_flux_map() {
        let b = HamiltonianBuilder::new(&reference_circuit(3));
        assert!(matches!(dephasing_rates(&b, &noise(), 7.0), Err(Error::Config(_))));
        assert!(matches!(longitudinal_rates(&b, &noise(), 7.0), Err(Error::Config(_))));
    }

    #[test]
    fn longitudinal_rates_vanish_uncoupled_and_scale_with_amplitude() {
        let mut b = flux_circuit(3);
        let mut spec = b.spec.clone();
        for c in &mut spec.couplings {
            c.rho = 0.0;
        }
        let free = HamiltonianBuilder::new(&spec);
        assert!(longitudinal_rates(&free, &noise(), 7.0).unwrap().is_empty());
        let r1 = longitudinal_rates(&b, &noise(), 6.3).unwrap();
        let mut n2 = noise();
        n2.flux_a_uphi0sq *= 3.0;
        b = HamiltonianBuilder::new(&b.spec);
        let r2 = longitudinal_rates(&b, &n2, 6.3).unwrap();
        assert!(!r1.is_empty());
        for (a, c) in r1.iter().zip(&r2) {
            assert!((c.rate - 3.0 * a.rate).abs() <= 1e-12 * c.rate.abs());
        }
    }

    #[test]
    fn state_count_and_first_row() {
        let s = rb_states();
        assert_eq!(s.len(), 60);
        for v in &s {
            let norm: f64 = v.iter().map(|a| a.norm_sqr()).sum();
            assert!((norm - 1.0).abs() < 1e-15);
        }
        let rates = TwoQubitRates { leak: [0.0, 1.0, 2.0, 3.0], intra: [[0.5; 4]; 4] };
        let t = table1_states_and_errors(&rates, &[[1.0; 4]; 4]);
        assert_eq!(t.rows[0], StateErrors::default());
    }

    fn random_inputs(seed: u64) -> (TwoQubitRates, [[f64; 4]; 4]) {
        use rand::Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut r = TwoQubitRates::default();
        for s in 1..4 {
            r.leak[s] = rng.random::<f64>();
        }
        for s in 1..4 {
            for t in 0..4 {
                // the tabulated channels: one-excitation decays within the subspace
                if t < s && !(s == 3 && t == 0) {
                    r.intra[s][t] = rng.random::<f64>();
                }
            }
        }
        r.intra[1][2] = rng.random::<f64>();
        let a = DMatrix::<f64>::from_fn(3, 3, |_, _| rng.random::<f64>() - 0.5);
        let c = &a * a.transpose();
        let mut cov3 = [[0.0; 3]; 3];
        for i in 0..3 {
            for j in 0..3 {
                cov3[i][j] = c[(i, j)];
            }
        }
        (r, covariance_pair_order(&cov3))
    }

    #[test]
    fn brute_force_average_matches_closed_form() {
        for seed in 0..20 {
            let (r, c) = random_inputs(seed);
            let t = table1_states_and_errors(&r, &c);
            let (a, b) = (t.brute_force_average, t.closed_form);
            assert!((a.dephasing - b.dephasing).abs() < 1e-12);
            assert!((a.leakage - b.leakage).abs() < 1e-12);
            assert!((a.intra - b.intra).abs() < 1e-12);
        }
    }

    #[test]
    fn uniform_leakage_averages_to_three_quarters() {
        let g = 0.37;
        let r = TwoQubitRates { leak: [0.0, g, g, g], intra: [[0.0; 4]; 4] };
        let t = table1_states_and_errors(&r, &[[0.0; 4]; 4]);
        assert!((t.rows_average.leakage - 0.75 * g).abs() < 1e-12);
    }

    #[test]
    fn tabulated_rows_match_populations_except_the_four_state_intra_entry() {
        let (r, c) = random_inputs(7);
        let t = table1_states_and_errors(&r, &c);
        for (k, (a, b)) in t.rows.iter().zip(&t.brute_force).enumerate() {
            assert!((a.dephasing - b.dephasing).abs() < 1e-12, "state {k}");
            assert!((a.leakage - b.leakage).abs() < 1e-12, "state {k}");
            if k < 28 {
                assert!((a.intra - b.intra).abs() < 1e-12, "state {k}");
            }
        }
        // with γ_{11→01} = γ_{11→10} the duplicated entry is harmless
        let mut sym = r;
        sym.intra[3][1] = sym.intra[3][2];
        let t = table1_states_and_errors(&sym, &c);
        assert!(t.transcription_gap() < 1e-12);
        assert!((t.rows_average.intra - t.closed_form.intra).abs() < 1e-12);
    }

    #[test]
    fn covariance_form_reduces_to_rate_form() {
        use rand::Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..50 {
            let e: [f64; 3] = std::array::from_fn(|_| rng.random::<f64>() - 0.5);
            let cov: [[f64; 3]; 3] = std::array::from_fn(|m| std::array::from_fn(|n| 2.0 * e[m] * e[n]));
            assert!((dephasing_from_covariance(&cov) - dephasing_from_rates(&e)).abs() < 1e-12);
        }
    }

    #[test]
    fn white_noise_covariance_matches_monte_carlo() {
        let b = flux_circuit(3);
        let p = unipolar(&b, 30.0);
        let psd = 1.0; // (μΦ0)²/Hz
        let cov = phase_covariance(&b, &noise(), &p, NoiseKind::White(psd)).unwrap();
        let s = sensitivities(&b, &p).unwrap();
        let mc = white_noise_monte_carlo(&s, p.dt * 1e-9, psd * 1e-12, 4000, 11);
        for m in 0..3 {
            let rel = (mc[m][m] - cov.matrix[m][m]) / cov.matrix[m][m];
            assert!(rel.abs() < 0.05, "state {m}: {rel}");
        }
    }

    #[test]
    fn one_over_f_reduces_to_quasistatic_for_unipolar_pulses() {
        let b = flux_circuit(3);
        let p = unipolar(&b, 30.0);
        let mut n = noise();
        n.sigma_uphi0 = n.sigma_from_one_over_f();
        let f = phase_covariance(&b, &n, &p, NoiseKind::OneOverF).unwrap();
        let q = phase_covariance(&b, &n, &p, NoiseKind::Quasistatic).unwrap();
        for m in 0..3 {
            let rel = (f.matrix[m][m] - q.matrix[m][m]) / q.matrix[m][m];
            assert!(rel.abs() < 0.05, "state {m}: {rel}");
        }
        // rank one
        let det01 = q.matrix[0][0] * q.matrix[1][1] - q.matrix[0][1] * q.matrix[1][0];
        assert!(det01.abs() < 1e-10 * q.matrix[0][0] * q.matrix[1][1]);
    }

    #[test]
    fn net_zero_is_blind_at_zero_frequency() {
        let b = flux_circuit(3);
        let uni = unipolar(&b, 40.0);
        let setup = GateSetup::new(&b.spec, &b.spec, 8.2, 5.75).unwrap();
        let l = setup.calibrated_lambda(PulseKind::Netzero, 40.0).unwrap();
        let nz = setup.raw_pulse(PulseKind::Netzero, 40.0, &[l]).unwrap();
        let a = phase_covariance(&b, &noise(), &uni, NoiseKind::OneOverF).unwrap();
        let z = phase_covariance(&b, &noise(), &nz, NoiseKind::OneOverF).unwrap();
        for m in 0..3 {
            assert!(z.dc_power[m] < 1e-3 * a.dc_power[m], "{m}: {} vs {}", z.dc_power[m], a.dc_power[m]);
        }
    }

    #[test]
    fn rb_budget_is_transition_dominated_at_twenty_microseconds() {
        let b = flux_circuit(3);
        let p = unipolar(&b, 30.0);
        let r = rb_error(&b, &noise(), &p).unwrap();
        assert!(r.transition > r.dephasing, "{} {}", r.transition, r.dephasing);
        let quiet = NoiseSpec::new(vec![f64::INFINITY; 3], 0.0, 0.0);
        assert_eq!(rb_error(&b, &quiet, &p).unwrap().total, 0.0);
    }
}
