// Copyright 2026 czpulse contributors
// SPDX-License-Identifier: Apache-2.0

//! Coupler-frequency waveforms.
//!
//! The adiabatically weighted pulse (AWP) follows
//!
//! ```text
//! dω_c/dt = (D_ref / D(ω_c)) Σ_m λ_m sin(2π m t / T_g)
//! ```
//!
//! with D the diabaticity measure of [`crate::spectrum`] and `D_ref = D(ω_idle)`,
//! so λ_m carries units of GHz/ns and equals the initial slope scale. The plain
//! Fourier pulse is the same equation with D ≡ D_ref.

use std::f64::consts::{LN_2, TAU};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{CircuitSpec, FluxMapSpec, HamiltonianBuilder};
use crate::spectrum::{self, pair_labels};

/// Default sampling step (ns), 20 samples per ns.
pub const DEFAULT_DT: f64 = 0.05;
/// Padding on each side of a filtered waveform, in kernel widths.
pub const FILTER_PAD_SIGMAS: f64 = 6.0;
/// RK4 steps per output sample in [`awp_generate`].
pub const AWP_SUBSTEPS: usize = 4;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PulseKind {
    Awp,
    Fourier,
    Netzero,
}

impl PulseKind {
    pub fn parse(s: &str) -> Option<Self> {
        match s.to_ascii_lowercase().as_str() {
            "awp" => Some(PulseKind::Awp),
            "fourier" => Some(PulseKind::Fourier),
            "netzero" | "net-zero" => Some(PulseKind::Netzero),
            _ => None,
        }
    }
}

/// Uniformly sampled coupler-frequency waveform.
#[derive(Clone, Debug, PartialEq)]
pub struct PulseShape {
    /// nominal gate time (ns), excluding filter padding and reflection tail
    pub gate_time: f64,
    /// sample spacing (ns)
    pub dt: f64,
    /// ω_c (GHz) at t_k = k dt
    pub samples: Vec<f64>,
    /// flux (Φ0) per sample when the pulse was generated in flux
    pub flux: Option<Vec<f64>>,
    pub lambdas: Vec<f64>,
    /// GHz
    pub idle_frequency: f64,
    pub kind: PulseKind,
    /// MHz
    pub filter_cutoff: Option<f64>,
    /// (r, T_d in ns)
    pub distortion: Option<(f64, f64)>,
    /// set when the filter cutoff is below 10 / T_g
    pub over_filtered: bool,
}

impl PulseShape {
    pub fn constant(idle: f64, duration: f64, dt: f64) -> Self {
        let n = (duration / dt).round() as usize;
        PulseShape {
            gate_time: duration,
            dt,
            samples: vec![idle; n + 1],
            flux: None,
            lambdas: vec![],
            idle_frequency: idle,
            kind: PulseKind::Fourier,
            filter_cutoff: None,
            distortion: None,
            over_filtered: false,
        }
    }

    /// Total waveform duration (ns).
    pub fn duration(&self) -> f64 {
        (self.samples.len() - 1) as f64 * self.dt
    }

    pub fn times(&self) -> Vec<f64> {
        (0..self.samples.len()).map(|k| k as f64 * self.dt).collect()
    }

    /// Linear interpolation of ω_c at time `t` (ns), clamped to the ends.
    pub fn at(&self, t: f64) -> f64 {
        interp_uniform(&self.samples, self.dt, t)
    }

    /// Linear interpolation of the flux record, if any.
    pub fn flux_at(&self, t: f64) -> Option<f64> {
        self.flux.as_ref().map(|f| interp_uniform(f, self.dt, t))
    }

    pub fn min_frequency(&self) -> f64 {
        self.samples.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    pub fn max_frequency(&self) -> f64 {
        self.samples.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Copy with a constant frequency offset (GHz) added to every sample.
    pub fn shifted(&self, offset: f64) -> Self {
        let mut p = self.clone();
        for s in &mut p.samples {
            *s += offset;
        }
        p.idle_frequency += offset;
        p
    }
}

fn interp_uniform(y: &[f64], dt: f64, t: f64) -> f64 {
    let x = (t / dt).max(0.0);
    let k = x.floor() as usize;
    if k + 1 >= y.len() {
        return *y.last().unwrap();
    }
    let f = x - k as f64;
    y[k] * (1.0 - f) + y[k + 1] * f
}

/// Monotone piecewise-cubic Hermite interpolant (Fritsch–Carlson slopes).
#[derive(Clone, Debug)]
pub struct Pchip {
    x: Vec<f64>,
    y: Vec<f64>,
    m: Vec<f64>,
}

impl Pchip {
    /// `x` strictly ascending, at least two points.
    pub fn new(x: Vec<f64>, y: Vec<f64>) -> Self {
        let n = x.len();
        assert!(n >= 2 && y.len() == n);
        let h: Vec<f64> = x.windows(2).map(|w| w[1] - w[0]).collect();
        let s: Vec<f64> = (0..n - 1).map(|k| (y[k + 1] - y[k]) / h[k]).collect();
        let mut m = vec![0.0; n];
        m[0] = s[0];
        m[n - 1] = s[n - 2];
        for k in 1..n - 1 {
            if s[k - 1] * s[k] <= 0.0 {
                m[k] = 0.0;
            } else {
                let w1 = 2.0 * h[k] + h[k - 1];
                let w2 = h[k] + 2.0 * h[k - 1];
                m[k] = (w1 + w2) / (w1 / s[k - 1] + w2 / s[k]);
            }
        }
        Pchip { x, y, m }
    }

    pub fn range(&self) -> (f64, f64) {
        (self.x[0], *self.x.last().unwrap())
    }

    /// Inside the data range, with 1 MHz of slack at either end.
    pub fn contains(&self, t: f64) -> bool {
        let (a, b) = self.range();
        t >= a - 1e-3 && t <= b + 1e-3
    }

    pub fn eval(&self, t: f64) -> f64 {
        let n = self.x.len();
        let k = match self.x.binary_search_by(|v| v.total_cmp(&t)) {
            Ok(k) => k.min(n - 2),
            Err(0) => 0,
            Err(k) => (k - 1).min(n - 2),
        };
        let h = self.x[k + 1] - self.x[k];
        let u = (t - self.x[k]) / h;
        let (u2, u3) = (u * u, u * u * u);
        let h00 = 2.0 * u3 - 3.0 * u2 + 1.0;
        let h10 = u3 - 2.0 * u2 + u;
        let h01 = -2.0 * u3 + 3.0 * u2;
        let h11 = u3 - u2;
        h00 * self.y[k] + h10 * h * self.m[k] + h01 * self.y[k + 1] + h11 * h * self.m[k + 1]
    }
}

/// D-factor and ζ tabulated between an idle point and a turning-point bound.
#[derive(Clone, Debug)]
pub struct PathTable {
    pub idle: f64,
    /// ascending GHz
    pub omega: Vec<f64>,
    /// ns²
    pub d: Vec<f64>,
    /// rad/ns
    pub zeta: Vec<f64>,
    pub divergent: Vec<bool>,
    d_interp: Pchip,
    zeta_interp: Pchip,
}

impl PathTable {
    /// Track the computational states from `idle` to `bound` (either side) over `points` samples.
    pub fn build(spec: &CircuitSpec, idle: f64, bound: f64, points: usize) -> Result<Self> {
        let builder = HamiltonianBuilder::new(spec);
        Self::build_with(&builder, (spec.qubit_indices[0], spec.qubit_indices[1]), idle, bound, points)
    }

    pub fn build_with(builder: &HamiltonianBuilder, pair: (usize, usize), idle: f64, bound: f64, points: usize) -> Result<Self> {
        let n = points.max(500);
        let labels = pair_labels(&builder.spec, pair);
        let mut path = spectrum::anchored_path(builder, &labels, idle, 0.02)?;
        let lead = path.len() - 1;
        path.extend((1..n).map(|k| idle + (bound - idle) * k as f64 / (n - 1) as f64));
        let t = spectrum::track_path(builder, &path, &labels)?;
        let mut rows: Vec<(f64, f64, f64, bool)> = (lead..path.len())
            .into_par_iter()
            .map(|k| {
                let eig = builder.eigh(path[k]);
                let d = spectrum::d_factor_from(builder, &eig, &t.index[k], path[k]);
                (path[k], d.value, spectrum::zeta_from(&t.energies[k]), d.divergent)
            })
            .collect();
        rows.sort_by(|a, b| a.0.total_cmp(&b.0));
        let omega: Vec<f64> = rows.iter().map(|r| r.0).collect();
        let d: Vec<f64> = rows.iter().map(|r| r.1).collect();
        let zeta: Vec<f64> = rows.iter().map(|r| r.2).collect();
        let divergent = rows.iter().map(|r| r.3).collect();
        if d.iter().any(|&v| !(v > 0.0)) {
            return Err(Error::Adiabaticity("D-factor vanishes on the path; uncoupled circuit?".into()));
        }
        let d_interp = Pchip::new(omega.clone(), d.clone());
        let zeta_interp = Pchip::new(omega.clone(), zeta.clone());
        Ok(PathTable { idle, omega, d, zeta, divergent, d_interp, zeta_interp })
    }

    pub fn d_at(&self, w: f64) -> f64 {
        self.d_interp.eval(w)
    }

    pub fn zeta_at(&self, w: f64) -> f64 {
        self.zeta_interp.eval(w)
    }

    pub fn contains(&self, w: f64) -> bool {
        self.d_interp.contains(w)
    }

    pub fn d_idle(&self) -> f64 {
        self.d_at(self.idle)
    }

    /// True if a flagged-divergent sample lies between `a` and `b`.
    pub fn divergent_between(&self, a: f64, b: f64) -> bool {
        let (lo, hi) = (a.min(b), a.max(b));
        self.omega.iter().zip(&self.divergent).any(|(&w, &f)| f && w >= lo && w <= hi)
    }
}

fn fourier_rate(lambdas: &[f64], t: f64, tg: f64) -> f64 {
    lambdas.iter().enumerate().map(|(m, l)| l * (TAU * (m + 1) as f64 * t / tg).sin()).sum()
}

/// Closed-form integral Σ λ_m T/(2πm) (1 − cos(2π m t/T)).
pub fn fourier_integral(lambdas: &[f64], t: f64, tg: f64) -> f64 {
    lambdas
        .iter()
        .enumerate()
        .map(|(m, l)| {
            let k = (m + 1) as f64;
            l * tg / (TAU * k) * (1.0 - (TAU * k * t / tg).cos())
        })
        .sum()
}

fn sample_count(gate_time: f64, dt: f64) -> Result<usize> {
    if !(gate_time > 0.0) || !(dt > 0.0) {
        return Err(Error::Domain("gate time and step must be positive".into()));
    }
    let n = (gate_time / dt).round() as usize;
    if ((n as f64) * dt - gate_time).abs() > 1e-9 * gate_time {
        return Err(Error::Domain(format!("gate time {gate_time} ns is not a multiple of dt = {dt} ns")));
    }
    if dt > 0.05 + 1e-12 {
        return Err(Error::Domain("sampling must be at least 20 points per ns".into()));
    }
    Ok(n)
}

/// AWP by RK4 integration with the D-factor from `table`.
pub fn awp_generate(table: &PathTable, gate_time: f64, lambdas: &[f64], dt: f64) -> Result<PulseShape> {
    let n = sample_count(gate_time, dt)?;
    if lambdas.iter().all(|&l| l == 0.0) {
        let mut p = PulseShape::constant(table.idle, gate_time, dt);
        p.kind = PulseKind::Awp;
        p.lambdas = lambdas.to_vec();
        return Ok(p);
    }
    let d_ref = table.d_idle();
    let rhs = |t: f64, w: f64| -> Result<f64> {
        if !table.contains(w) {
            return Err(Error::Range(format!("ω_c = {w:.4} GHz at t = {t:.2} ns leaves the tabulated range")));
        }
        Ok(d_ref / table.d_at(w) * fourier_rate(lambdas, t, gate_time))
    };
    let mut samples = Vec::with_capacity(n + 1);
    let mut w = table.idle;
    samples.push(w);
    let h = dt / AWP_SUBSTEPS as f64;
    for k in 0..n {
        for j in 0..AWP_SUBSTEPS {
            let t = k as f64 * dt + j as f64 * h;
            let k1 = rhs(t, w)?;
            let k2 = rhs(t + 0.5 * h, w + 0.5 * h * k1)?;
            let k3 = rhs(t + 0.5 * h, w + 0.5 * h * k2)?;
            let k4 = rhs(t + h, w + h * k3)?;
            w += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        }
        samples.push(w);
    }
    let lo = samples.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = samples.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if table.divergent_between(lo, hi) {
        return Err(Error::Adiabaticity(format!("divergent D-factor inside [{lo:.4}, {hi:.4}] GHz")));
    }
    // the exact solution is periodic; remove the residual integration drift
    let drift = samples[n] - table.idle;
    if drift.abs() > 1e-6 {
        return Err(Error::Numerical(format!("AWP failed to return to idle ({:.3e} GHz off)", drift)));
    }
    samples[n] = table.idle;
    Ok(PulseShape {
        gate_time,
        dt,
        samples,
        flux: None,
        lambdas: lambdas.to_vec(),
        idle_frequency: table.idle,
        kind: PulseKind::Awp,
        filter_cutoff: None,
        distortion: None,
        over_filtered: false,
    })
}

/// Plain Fourier pulse ω_idle + Σ λ_m T/(2πm)(1 − cos(2πmt/T)).
pub fn fourier_generate(gate_time: f64, lambdas: &[f64], idle: f64, dt: f64) -> Result<PulseShape> {
    let n = sample_count(gate_time, dt)?;
    let samples: Vec<f64> = (0..=n).map(|k| idle + fourier_integral(lambdas, k as f64 * dt, gate_time)).collect();
    let (lo, hi) = crate::model::OMEGA_C_RANGE;
    if samples.iter().any(|&w| w < lo || w > hi) {
        return Err(Error::Range("Fourier pulse leaves the allowed coupler range".into()));
    }
    let mut p = PulseShape::constant(idle, gate_time, dt);
    p.samples = samples;
    p.samples[n] = idle;
    p.lambdas = lambdas.to_vec();
    Ok(p)
}

/// Net-Zero pulse: a unipolar AWP of length `half_gate_time` converted to flux,
/// followed by its flux-negated copy. The idle point must be the flux sweet spot.
pub fn netzero(table: &PathTable, flux_map: &FluxMapSpec, half_gate_time: f64, lambdas: &[f64], dt: f64) -> Result<PulseShape> {
    if (table.idle - flux_map.omega_max).abs() > 1e-9 {
        return Err(Error::Config(format!(
            "Net-Zero pulses idle at the sweet spot {} GHz, table idles at {} GHz",
            flux_map.omega_max, table.idle
        )));
    }
    let half = awp_generate(table, half_gate_time, lambdas, dt)?;
    let phi: Vec<f64> = half.samples.iter().map(|&w| flux_map.flux_for(w)).collect::<Result<_>>()?;
    let mut flux = phi.clone();
    flux.extend(phi.iter().skip(1).map(|p| -p));
    let samples = flux.iter().map(|&p| flux_map.frequency(p).map(|x| x.0)).collect::<Result<Vec<_>>>()?;
    Ok(PulseShape {
        gate_time: 2.0 * half_gate_time,
        dt,
        samples,
        flux: Some(flux),
        lambdas: lambdas.to_vec(),
        idle_frequency: table.idle,
        kind: PulseKind::Netzero,
        filter_cutoff: None,
        distortion: None,
        over_filtered: false,
    })
}

/// Kernel width σ_t (ns) whose transfer exp(−ω²σ²/2) is 1/√2 at `cutoff_mhz`.
pub fn filter_sigma(cutoff_mhz: f64) -> f64 {
    let fc = cutoff_mhz * 1e-3;
    LN_2.sqrt() / (TAU * fc)
}

/// Gaussian low-pass filter (−3 dB at `cutoff_mhz`). The waveform is padded with the
/// idle value by 6σ on both sides and the padded result is returned.
pub fn apply_filter(pulse: &PulseShape, cutoff_mhz: f64) -> Result<PulseShape> {
    if !(cutoff_mhz > 0.0) {
        return Err(Error::Domain("filter cutoff must be positive".into()));
    }
    let sigma = filter_sigma(cutoff_mhz);
    let pad = (FILTER_PAD_SIGMAS * sigma / pulse.dt).ceil() as usize;
    let idle = pulse.idle_frequency;
    let mut x = vec![0.0; pulse.samples.len() + 2 * pad];
    for (k, &w) in pulse.samples.iter().enumerate() {
        x[k + pad] = w - idle;
    }
    let kernel: Vec<f64> = (-(pad as i64)..=pad as i64)
        .map(|j| (-0.5 * (j as f64 * pulse.dt / sigma).powi(2)).exp())
        .collect();
    let norm: f64 = kernel.iter().sum();
    let n = x.len();
    let y: Vec<f64> = (0..n)
        .map(|i| {
            let mut acc = 0.0;
            for (j, kv) in kernel.iter().enumerate() {
                let src = i as i64 + j as i64 - pad as i64;
                if src >= 0 && (src as usize) < n {
                    acc += kv * x[src as usize];
                }
            }
            idle + acc / norm
        })
        .collect();
    let mut out = pulse.clone();
    out.samples = y;
    if let Some(f) = &pulse.flux {
        let mut fx = vec![0.0; n];
        fx[pad..pad + f.len()].copy_from_slice(f);
        out.flux = Some(
            (0..n)
                .map(|i| {
                    kernel
                        .iter()
                        .enumerate()
                        .filter_map(|(j, kv)| {
                            let src = i as i64 + j as i64 - pad as i64;
                            (src >= 0 && (src as usize) < n).then(|| kv * fx[src as usize])
                        })
                        .sum::<f64>()
                        / norm
                })
                .collect(),
        );
    }
    out.filter_cutoff = Some(cutoff_mhz);
    out.over_filtered = cutoff_mhz * 1e-3 < 10.0 / pulse.gate_time;
    Ok(out)
}

/// Discrete transfer of the sampled Gaussian kernel at frequency `f_mhz`.
pub fn filter_transfer(cutoff_mhz: f64, f_mhz: f64) -> f64 {
    let sigma = filter_sigma(cutoff_mhz);
    let w = TAU * f_mhz * 1e-3;
    (-0.5 * w * w * sigma * sigma).exp()
}

/// Reflection distortion δω(t) → δω(t) + r δω(t − T_d); the waveform grows by T_d.
pub fn apply_distortion(pulse: &PulseShape, r: f64, delay: f64) -> Result<PulseShape> {
    if !(0.0..1.0).contains(&r) {
        return Err(Error::Domain(format!("reflection coefficient {r} outside [0, 1)")));
    }
    if !(delay >= 0.0) {
        return Err(Error::Domain("reflection delay must be non-negative".into()));
    }
    if r == 0.0 {
        let mut p = pulse.clone();
        p.distortion = Some((r, delay));
        return Ok(p);
    }
    let shift = (delay / pulse.dt).round() as usize;
    let idle = pulse.idle_frequency;
    let n = pulse.samples.len();
    let total = n + shift;
    let dw = |k: usize| if k < n { pulse.samples[k] - idle } else { 0.0 };
    let samples = (0..total)
        .map(|k| idle + dw(k) + if k >= shift { r * dw(k - shift) } else { 0.0 })
        .collect();
    let mut out = pulse.clone();
    out.samples = samples;
    out.flux = None;
    out.distortion = Some((r, delay));
    Ok(out)
}

/// Order in which distortion and filtering are applied.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TransformOrder {
    #[default]
    DistortThenFilter,
    FilterThenDistort,
}

/// Apply optional distortion and filter in the given order.
pub fn transform(pulse: &PulseShape, filter_mhz: Option<f64>, distortion: Option<(f64, f64)>, order: TransformOrder) -> Result<PulseShape> {
    let mut p = pulse.clone();
    let distort = |p: &PulseShape| match distortion {
        Some((r, td)) => apply_distortion(p, r, td),
        None => Ok(p.clone()),
    };
    let filter = |p: &PulseShape| match filter_mhz {
        Some(fc) => apply_filter(p, fc),
        None => Ok(p.clone()),
    };
    match order {
        TransformOrder::DistortThenFilter => {
            p = distort(&p)?;
            p = filter(&p)?;
        }
        TransformOrder::FilterThenDistort => {
            p = filter(&p)?;
            p = distort(&p)?;
        }
    }
    Ok(p)
}

/// ∫ ζ(ω_c(t)) dt (rad) by the trapezoid rule over the samples.
pub fn zeta_integral(table: &PathTable, pulse: &PulseShape) -> f64 {
    let z: Vec<f64> = pulse.samples.iter().map(|&w| table.zeta_at(w)).collect();
    trapezoid(&z, pulse.dt)
}

pub fn trapezoid(y: &[f64], dt: f64) -> f64 {
    if y.len() < 2 {
        return 0.0;
    }
    dt * (y.iter().sum::<f64>() - 0.5 * (y[0] + y[y.len() - 1]))
}

/// Pulse family scaled by a single factor for calibration.
pub enum PulseFamily<'a> {
    Awp { table: &'a PathTable, gate_time: f64, shape: Vec<f64>, dt: f64 },
    Fourier { table: &'a PathTable, gate_time: f64, shape: Vec<f64>, dt: f64 },
}

impl PulseFamily<'_> {
    fn table(&self) -> &PathTable {
        match self {
            PulseFamily::Awp { table, .. } | PulseFamily::Fourier { table, .. } => table,
        }
    }

    pub fn generate(&self, scale: f64) -> Result<PulseShape> {
        match self {
            PulseFamily::Awp { table, gate_time, shape, dt } => {
                let l: Vec<f64> = shape.iter().map(|x| x * scale).collect();
                awp_generate(table, *gate_time, &l, *dt)
            }
            PulseFamily::Fourier { table, gate_time, shape, dt } => {
                let l: Vec<f64> = shape.iter().map(|x| x * scale).collect();
                let p = fourier_generate(*gate_time, &l, table.idle, *dt)?;
                if !p.samples.iter().all(|&w| table.contains(w)) {
                    return Err(Error::Range("Fourier pulse leaves the tabulated range".into()));
                }
                Ok(p)
            }
        }
    }
}

/// Scale the family's λ so that |∫ζ dt| equals |target| within 1e-4 rad.
/// Returns the scaled λ vector. The scale is searched on (0, ∞) by bracketing then bisection.
pub fn calibrate_conditional_phase(family: &PulseFamily, target: f64) -> Result<Vec<f64>> {
    let shape = match family {
        PulseFamily::Awp { shape, .. } | PulseFamily::Fourier { shape, .. } => shape.clone(),
    };
    if target == 0.0 {
        return Ok(vec![0.0; shape.len()]);
    }
    let goal = target.abs();
    let table = family.table();
    let phase = |s: f64| -> Option<f64> { family.generate(s).ok().map(|p| zeta_integral(table, &p).abs()) };
    let mut lo = 0.0;
    let mut hi = 1e-3;
    loop {
        match phase(hi) {
            Some(v) if v >= goal => break,
            Some(_) => {
                lo = hi;
                hi *= 1.5;
                if hi > 1e3 {
                    return Err(Error::Calibration("conditional phase target unreachable".into()));
                }
            }
            None => {
                // overshot into the infeasible region: find the feasible edge
                let (mut ok, mut bad) = (lo, hi);
                let mut edge = None;
                for _ in 0..60 {
                    let mid = 0.5 * (ok + bad);
                    match phase(mid) {
                        Some(v) if v >= goal => {
                            edge = Some(mid);
                            break;
                        }
                        Some(_) => ok = mid,
                        None => bad = mid,
                    }
                }
                match edge {
                    Some(e) => {
                        lo = ok;
                        hi = e;
                        break;
                    }
                    None => {
                        return Err(Error::Calibration(format!(
                            "target {goal:.4} rad unreachable inside the tabulated coupler range"
                        )))
                    }
                }
            }
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let v = phase(mid).ok_or_else(|| Error::Calibration("pulse generation failed during bisection".into()))?;
        if (v - goal).abs() < 1e-6 {
            lo = mid;
            hi = mid;
            break;
        }
        if v < goal {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let s = 0.5 * (lo + hi);
    Ok(shape.iter().map(|x| x * s).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::reference_circuit;
    use std::f64::consts::PI;

    fn table() -> PathTable {
        PathTable::build(&reference_circuit(4), 7.87, 5.75, 500).unwrap()
    }

    /// Separable solution: ∫_{idle}^{ω} D/D_ref dω' = Σ λ_m T/(2πm)(1 − cos), solved by
    /// trapezoid quadrature of the tabulated D and root bracketing.
    fn separable_oracle(t: &PathTable, lambdas: &[f64], tg: f64, time: f64) -> f64 {
        let target = fourier_integral(lambdas, time, tg);
        let d_ref = t.d_idle();
        let n = 20000;
        let (lo, hi) = (t.omega[0], t.idle);
        let h = (hi - lo) / n as f64;
        // G(w) = ∫_idle^w D/D_ref, G(idle) = 0, decreasing towards lo
        let mut g = vec![0.0; n + 1];
        for k in (0..n).rev() {
            let a = lo + k as f64 * h;
            g[k] = g[k + 1] - 0.5 * h * (t.d_at(a) + t.d_at(a + h)) / d_ref;
        }
        for k in 0..n {
            if (g[k] - target) * (g[k + 1] - target) <= 0.0 {
                let f = (target - g[k]) / (g[k + 1] - g[k]);
                return lo + (k as f64 + f) * h;
            }
        }
        panic!("target outside table");
    }

    #[test]
    fn zero_lambdas_give_constant() {
        let t = table();
        let p = awp_generate(&t, 30.0, &[0.0], 0.05).unwrap();
        assert!(p.samples.iter().all(|&w| w == 7.87));
        let f = fourier_generate(30.0, &[0.0, 0.0], 7.87, 0.05).unwrap();
        assert!(f.samples.iter().all(|&w| w == 7.87));
    }

    #[test]
    fn awp_dips_symmetrically_and_returns() {
        let t = table();
        let p = awp_generate(&t, 30.0, &[-3.0], 0.05).unwrap();
        let n = p.samples.len() - 1;
        let kmin = (0..=n).min_by(|&a, &b| p.samples[a].total_cmp(&p.samples[b])).unwrap();
        assert_eq!(kmin, n / 2);
        for k in 0..=n {
            assert!((p.samples[k] - p.samples[n - k]).abs() < 1e-6);
        }
        assert!(p.samples[n] == 7.87);
        assert!(p.min_frequency() < 6.2);
    }

    #[test]
    fn awp_matches_separable_solution() {
        let t = table();
        let l = [-0.12, 0.02];
        let p = awp_generate(&t, 30.0, &l, 0.05).unwrap();
        for k in [37usize, 150, 300, 411, 555] {
            let exact = separable_oracle(&t, &l, 30.0, k as f64 * 0.05);
            assert!((p.samples[k] - exact).abs() < 1e-5, "{k}: {} vs {exact}", p.samples[k]);
        }
    }

    #[test]
    fn awp_with_flat_weight_is_fourier() {
        let t = table();
        let l = [-0.05];
        let f = fourier_generate(30.0, &l, 7.87, 0.05).unwrap();
        assert!((f.samples[300] - (7.87 - 0.05 * 30.0 / TAU * 2.0)).abs() < 1e-12);
        assert_eq!(*f.samples.last().unwrap(), 7.87);
        let _ = t;
    }

    #[test]
    fn out_of_table_is_range_error() {
        let t = table();
        assert!(matches!(awp_generate(&t, 30.0, &[-100.0], 0.05), Err(Error::Range(_))));
    }

    #[test]
    fn filter_definition_and_endpoints() {
        assert!((filter_transfer(300.0, 300.0) - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-12);
        assert!((filter_sigma(300.0) - 0.4417).abs() < 1e-4);
        let c = PulseShape::constant(7.87, 10.0, 0.05);
        let fc = apply_filter(&c, 300.0).unwrap();
        assert!(fc.samples.iter().all(|&w| (w - 7.87).abs() < 1e-12));
        let t = table();
        let p = awp_generate(&t, 30.0, &[-3.0], 0.05).unwrap();
        let f = apply_filter(&p, 300.0).unwrap();
        assert!((f.samples[0] - 7.87).abs() < 1e-6);
        assert!((f.samples.last().unwrap() - 7.87).abs() < 1e-6);
        assert!(f.min_frequency() > p.min_frequency());
        assert!(f.samples.iter().all(|&w| w <= 7.87 + 1e-9));
        assert!(f.over_filtered);
    }

    #[test]
    fn sampled_kernel_transfer_matches_definition() {
        // DFT of the normalized discrete kernel at the cutoff
        let dt = 0.05;
        let sigma = filter_sigma(300.0);
        let pad = (6.0 * sigma / dt).ceil() as i64;
        let k: Vec<f64> = (-pad..=pad).map(|j| (-0.5 * (j as f64 * dt / sigma).powi(2)).exp()).collect();
        let norm: f64 = k.iter().sum();
        let w = TAU * 0.3;
        let h: f64 = (-pad..=pad).zip(&k).map(|(j, v)| v * (w * j as f64 * dt).cos()).sum::<f64>() / norm;
        assert!((h - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-6);
    }

    #[test]
    fn distortion_behaviour() {
        let t = table();
        let p = awp_generate(&t, 30.0, &[-3.0], 0.05).unwrap();
        assert_eq!(apply_distortion(&p, 0.0, 10.0).unwrap().samples, p.samples);
        let d = apply_distortion(&p, 0.1, 10.0).unwrap();
        assert_eq!(d.samples.len(), p.samples.len() + 200);
        assert_eq!(&d.samples[..200], &p.samples[..200]);
        assert!((d.samples[400] - (p.samples[400] + 0.1 * (p.samples[200] - 7.87))).abs() < 1e-12);
        assert!((d.samples.last().unwrap() - 7.87).abs() < 1e-12);
    }

    #[test]
    fn calibration_hits_target() {
        let t = table();
        let fam = PulseFamily::Awp { table: &t, gate_time: 30.0, shape: vec![-1.0], dt: 0.05 };
        let l = calibrate_conditional_phase(&fam, PI).unwrap();
        let p = awp_generate(&t, 30.0, &l, 0.05).unwrap();
        assert!((zeta_integral(&t, &p).abs() - PI).abs() < 1e-4);
        assert_eq!(calibrate_conditional_phase(&fam, 0.0).unwrap(), vec![0.0]);
    }

    #[test]
    fn longer_gate_needs_weaker_zeta() {
        let t = table();
        let peak = |tg: f64| {
            let fam = PulseFamily::Awp { table: &t, gate_time: tg, shape: vec![-1.0], dt: 0.05 };
            let l = calibrate_conditional_phase(&fam, PI).unwrap();
            let p = awp_generate(&t, tg, &l, 0.05).unwrap();
            p.samples.iter().map(|&w| t.zeta_at(w).abs()).fold(0.0, f64::max)
        };
        let r = peak(30.0) / peak(60.0);
        // doubling the gate time roughly halves the peak
        assert!((r - 2.0).abs() / 2.0 < 0.5, "{r}");
    }

    #[test]
    fn pchip_reproduces_data_and_stays_monotone() {
        let x = vec![0.0, 1.0, 2.0, 3.0];
        let y = vec![1.0, 1.0, 5.0, 5.1];
        let p = Pchip::new(x.clone(), y.clone());
        for (a, b) in x.iter().zip(&y) {
            assert!((p.eval(*a) - b).abs() < 1e-14);
        }
        let mut last = p.eval(0.0);
        for k in 1..300 {
            let v = p.eval(k as f64 * 0.01);
            assert!(v >= last - 1e-14);
            last = v;
        }
    }
}
