// Copyright 2026 czpulse contributors
// SPDX-License-Identifier: Apache-2.0

//! Nelder–Mead minimization, gate optimization and the sweep engine.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::{self, cz_target, GateReport, IdleBasis, C64};
use crate::error::{Error, Result};
use crate::model::{CircuitSpec, HamiltonianBuilder};
use crate::pulse::{self, PathTable, PulseFamily, PulseKind, PulseShape, TransformOrder};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OptimizerOptions {
    pub max_evals: usize,
    pub restarts: usize,
    /// initial simplex spread relative to each coordinate
    pub simplex_scale: f64,
    /// stop when (f_worst − f_best) ≤ tol · |f_best|
    pub tol: f64,
}

impl Default for OptimizerOptions {
    fn default() -> Self {
        OptimizerOptions { max_evals: 200, restarts: 5, simplex_scale: 0.01, tol: 0.01 }
    }
}

impl OptimizerOptions {
    pub fn validate(&self) -> Result<()> {
        if self.max_evals < 50 {
            return Err(Error::Config(format!("max_evals = {} is below 50", self.max_evals)));
        }
        if !(self.tol > 0.0) {
            return Err(Error::Config("optimizer tol must be positive".into()));
        }
        if self.restarts == 0 {
            return Err(Error::Config("restarts must be at least 1".into()));
        }
        if !(self.simplex_scale > 0.0) {
            return Err(Error::Config("simplex_scale must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct NmResult {
    pub x: Vec<f64>,
    pub f: f64,
    pub evals: usize,
    /// best value after each iteration
    pub history: Vec<f64>,
}

/// Nelder–Mead with reflection 1, expansion 2, contraction 0.5, shrink 0.5.
/// Non-finite objective values count as +∞.
pub fn nelder_mead<F: FnMut(&[f64]) -> f64>(f: F, x0: &[f64], opts: &OptimizerOptions) -> Result<NmResult> {
    let steps: Vec<f64> = x0.iter().map(|&x| if x != 0.0 { opts.simplex_scale * x } else { opts.simplex_scale.max(1e-4) }).collect();
    nelder_mead_with_steps(f, x0, &steps, opts)
}

/// [`nelder_mead`] with an explicit initial simplex offset per coordinate.
pub fn nelder_mead_with_steps<F: FnMut(&[f64]) -> f64>(mut f: F, x0: &[f64], steps: &[f64], opts: &OptimizerOptions) -> Result<NmResult> {
    let n = x0.len();
    if n == 0 || steps.len() != n {
        return Err(Error::Optimization("empty parameter vector or step mismatch".into()));
    }
    let mut evals = 0;
    let mut eval = |x: &[f64], evals: &mut usize| {
        *evals += 1;
        let v = f(x);
        if v.is_finite() { v } else { f64::INFINITY }
    };
    let f0 = eval(x0, &mut evals);
    if !f0.is_finite() {
        return Err(Error::Optimization("objective is not finite at the starting point".into()));
    }
    let mut simplex: Vec<(Vec<f64>, f64)> = vec![(x0.to_vec(), f0)];
    for i in 0..n {
        let mut x = x0.to_vec();
        x[i] += steps[i];
        let v = eval(&x, &mut evals);
        simplex.push((x, v));
    }
    let mut history = Vec::new();
    let combine = |a: &[f64], b: &[f64], t: f64| -> Vec<f64> { a.iter().zip(b).map(|(p, q)| p + t * (q - p)).collect() };
    while evals < opts.max_evals {
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        history.push(simplex[0].1);
        let (best, worst) = (simplex[0].1, simplex[n].1);
        let width = (1..=n)
            .map(|k| simplex[k].0.iter().zip(&simplex[0].0).map(|(a, b)| (a - b).abs() / b.abs().max(1e-12)).fold(0.0, f64::max))
            .fold(0.0, f64::max);
        if worst - best <= opts.tol * best.abs() || width < 1e-10 {
            break;
        }
        let centroid: Vec<f64> = (0..n).map(|j| simplex[..n].iter().map(|p| p.0[j]).sum::<f64>() / n as f64).collect();
        let xr = combine(&centroid, &simplex[n].0, -1.0);
        let fr = eval(&xr, &mut evals);
        if fr < simplex[0].1 {
            let xe = combine(&centroid, &simplex[n].0, -2.0);
            let fe = eval(&xe, &mut evals);
            simplex[n] = if fe < fr { (xe, fe) } else { (xr, fr) };
        } else if fr < simplex[n - 1].1 {
            simplex[n] = (xr, fr);
        } else {
            let (xc, fc) = if fr < simplex[n].1 {
                let xc = combine(&centroid, &xr, 0.5);
                let fc = eval(&xc, &mut evals);
                (xc, fc)
            } else {
                let xc = combine(&centroid, &simplex[n].0, 0.5);
                let fc = eval(&xc, &mut evals);
                (xc, fc)
            };
            if fc < fr.min(simplex[n].1) {
                simplex[n] = (xc, fc);
            } else {
                let x_best = simplex[0].0.clone();
                for p in simplex.iter_mut().skip(1) {
                    p.0 = combine(&x_best, &p.0, 0.5);
                    p.1 = eval(&p.0, &mut evals);
                }
            }
        }
    }
    simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
    history.push(simplex[0].1);
    let (x, f) = simplex.swap_remove(0);
    Ok(NmResult { x, f, evals, history })
}

/// Everything needed to evaluate a gate for given pulse parameters.
///
/// The pulse is shaped with `table` (the nominal model) and simulated on
/// `spec` (the actual circuit), which may differ for robustness studies.
pub struct GateSetup {
    pub spec: CircuitSpec,
    pub builder: HamiltonianBuilder,
    pub basis: IdleBasis,
    pub table: PathTable,
    pub target: DMatrix<C64>,
    pub filter_mhz: Option<f64>,
    pub distortion: Option<(f64, f64)>,
    pub order: TransformOrder,
    /// pulse sampling and propagation step (ns)
    pub dt: f64,
    /// coupler frequency offset of the actual device relative to the commanded pulse (GHz)
    pub omega_c_offset: f64,
}

impl GateSetup {
    /// Gate on `spec` idling at `idle`, shaped from `nominal` (usually the same circuit).
    /// `bound` is the far end of the D-factor table.
    pub fn new(spec: &CircuitSpec, nominal: &CircuitSpec, idle: f64, bound: f64) -> Result<Self> {
        let table = PathTable::build(nominal, idle, bound, 500)?;
        let builder = HamiltonianBuilder::new(spec);
        let basis = IdleBasis::new(&builder, idle)?;
        let n = spec.qubit_indices.len();
        Ok(GateSetup {
            spec: spec.clone(),
            builder,
            basis,
            table,
            target: cz_target(n, (0, 1)),
            filter_mhz: None,
            distortion: None,
            order: TransformOrder::default(),
            dt: pulse::DEFAULT_DT,
            omega_c_offset: 0.0,
        })
    }

    /// Same pulse shaping and transforms, simulated on another circuit.
    pub fn with_circuit(&self, spec: &CircuitSpec) -> Result<Self> {
        let builder = HamiltonianBuilder::new(spec);
        let basis = IdleBasis::new(&builder, self.idle() + self.omega_c_offset)?;
        Ok(GateSetup {
            spec: spec.clone(),
            builder,
            basis,
            table: self.table.clone(),
            target: cz_target(spec.qubit_indices.len(), (0, 1)),
            filter_mhz: self.filter_mhz,
            distortion: self.distortion,
            order: self.order,
            dt: self.dt,
            omega_c_offset: self.omega_c_offset,
        })
    }

    /// Shift the actual coupler frequency by `offset` GHz (rebuilds the idle basis).
    pub fn with_offset(mut self, offset: f64) -> Result<Self> {
        self.omega_c_offset = offset;
        self.basis = IdleBasis::new(&self.builder, self.table.idle + offset)?;
        Ok(self)
    }

    pub fn idle(&self) -> f64 {
        self.table.idle
    }

    /// Commanded waveform for `lambdas`, before filtering and distortion.
    pub fn raw_pulse(&self, kind: PulseKind, gate_time: f64, lambdas: &[f64]) -> Result<PulseShape> {
        match kind {
            PulseKind::Awp => pulse::awp_generate(&self.table, gate_time, lambdas, self.dt),
            PulseKind::Fourier => {
                let p = pulse::fourier_generate(gate_time, lambdas, self.idle(), self.dt)?;
                if !p.samples.iter().all(|&w| self.table.contains(w)) {
                    return Err(Error::Range("Fourier pulse leaves the tabulated range".into()));
                }
                Ok(p)
            }
            PulseKind::Netzero => {
                let fm = self.spec.flux_map.as_ref().ok_or_else(|| Error::Config("Net-Zero pulses need a flux map".into()))?;
                pulse::netzero(&self.table, fm, gate_time / 2.0, lambdas, self.dt)
            }
        }
    }

    /// Waveform seen by the device.
    pub fn pulse(&self, kind: PulseKind, gate_time: f64, lambdas: &[f64]) -> Result<PulseShape> {
        let p = self.raw_pulse(kind, gate_time, lambdas)?;
        let p = pulse::transform(&p, self.filter_mhz, self.distortion, self.order)?;
        Ok(if self.omega_c_offset != 0.0 { p.shifted(self.omega_c_offset) } else { p })
    }

    pub fn simulate(&self, pulse: &PulseShape) -> Result<GateReport> {
        dynamics::simulate_gate(&self.builder, &self.basis, pulse, &self.target, self.dt)
    }

    pub fn evaluate(&self, kind: PulseKind, gate_time: f64, lambdas: &[f64]) -> Result<(PulseShape, GateReport)> {
        let p = self.pulse(kind, gate_time, lambdas)?;
        let r = self.simulate(&p)?;
        Ok((p, r))
    }

    /// Direction of the excursion: towards the far end of the table.
    fn direction(&self) -> f64 {
        let lo = self.table.omega[0];
        if lo < self.idle() { -1.0 } else { 1.0 }
    }

    /// λ_1 giving |∫ζ dt| = π for a single-component pulse.
    pub fn calibrated_lambda(&self, kind: PulseKind, gate_time: f64) -> Result<f64> {
        let shape = vec![self.direction()];
        let fam = match kind {
            PulseKind::Fourier => PulseFamily::Fourier { table: &self.table, gate_time, shape, dt: self.dt },
            PulseKind::Awp => PulseFamily::Awp { table: &self.table, gate_time, shape, dt: self.dt },
            PulseKind::Netzero => PulseFamily::Awp { table: &self.table, gate_time: gate_time / 2.0, shape, dt: self.dt },
        };
        // Net-Zero halves each carry half the phase
        let target = if kind == PulseKind::Netzero { PI / 2.0 } else { PI };
        Ok(pulse::calibrate_conditional_phase(&fam, target)?[0])
    }
}

/// Result of [`optimize_pulse`].
#[derive(Clone, Debug)]
pub struct OptimizedGate {
    pub pulse: PulseShape,
    pub report: GateReport,
    pub lambdas: Vec<f64>,
    pub evals: usize,
    /// best EPG of every restart
    pub restart_values: Vec<f64>,
}

/// Log-spaced multiplicative offsets around the calibrated λ_1.
fn restart_factors(n: usize) -> Vec<f64> {
    (0..n)
        .map(|k| {
            let j = k.div_ceil(2) as f64;
            let sign = if k % 2 == 1 { -1.0 } else { 1.0 };
            10f64.powf(sign * 0.01 * j)
        })
        .collect()
}

/// Minimize EPG over λ_1..λ_mmax, starting from the phase-calibrated single-component pulse.
pub fn optimize_pulse(setup: &GateSetup, kind: PulseKind, gate_time: f64, m_max: usize, opts: &OptimizerOptions) -> Result<OptimizedGate> {
    opts.validate()?;
    if !(1..=4).contains(&m_max) {
        return Err(Error::Config(format!("m_max = {m_max} outside [1, 4]")));
    }
    let l1 = setup.calibrated_lambda(kind, gate_time)?;
    let objective = |x: &[f64]| -> f64 {
        match setup.evaluate(kind, gate_time, x) {
            Ok((_, r)) => r.epg,
            Err(e) => {
                log::debug!("objective failed at {x:?}: {e}");
                f64::INFINITY
            }
        }
    };
    let mut best: Option<NmResult> = None;
    let mut restart_values = Vec::new();
    let mut evals = 0;
    for factor in restart_factors(opts.restarts) {
        let mut x0 = vec![0.0; m_max];
        x0[0] = l1 * factor;
        // higher components start at zero and need an absolute step
        let steps: Vec<f64> = (0..m_max).map(|k| if k == 0 { opts.simplex_scale * x0[0] } else { 0.02 * l1.abs() }).collect();
        let r = nelder_mead_with_steps(objective, &x0, &steps, opts);
        match r {
            Ok(r) => {
                evals += r.evals;
                restart_values.push(r.f);
                log::debug!("restart λ1×{factor:.3}: epg {:.3e} after {} evals", r.f, r.evals);
                if best.as_ref().is_none_or(|b| r.f < b.f) {
                    best = Some(r);
                }
            }
            Err(e) => {
                log::debug!("restart λ1×{factor:.3} failed: {e}");
                restart_values.push(f64::INFINITY);
            }
        }
    }
    let best = best.ok_or_else(|| Error::Optimization("every restart failed".into()))?;
    if !best.f.is_finite() {
        return Err(Error::Optimization("no restart produced a valid pulse".into()));
    }
    let (pulse, report) = setup.evaluate(kind, gate_time, &best.x)?;
    Ok(OptimizedGate { pulse, report, lambdas: best.x, evals, restart_values })
}

/// One grid axis of a sweep.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Axis {
    pub name: String,
    pub values: Vec<f64>,
}

/// Outcome of one sweep point.
#[derive(Clone, Debug, PartialEq)]
pub struct SweepRow {
    pub params: Vec<f64>,
    pub values: Vec<f64>,
    pub error: Option<String>,
}

/// Result table of a sweep; `columns` lists the value columns after the axes.
#[derive(Clone, Debug, PartialEq)]
pub struct SweepTable {
    pub axes: Vec<String>,
    pub columns: Vec<String>,
    pub rows: Vec<SweepRow>,
}

impl SweepTable {
    pub fn header(&self) -> Vec<String> {
        let mut h = self.axes.clone();
        h.extend(self.columns.iter().cloned());
        h.push("error".into());
        h
    }
}

/// Cartesian product of the axes, first axis slowest.
pub fn grid_points(axes: &[Axis]) -> Vec<Vec<f64>> {
    let mut out = vec![vec![]];
    for a in axes {
        out = out
            .into_iter()
            .flat_map(|p| {
                a.values.iter().map(move |&v| {
                    let mut q = p.clone();
                    q.push(v);
                    q
                })
            })
            .collect();
    }
    if axes.is_empty() {
        return vec![];
    }
    out
}

/// Per-point seed derived from the job seed and the point index.
pub fn point_seed(seed: u64, index: usize) -> u64 {
    seed ^ (index as u64).wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

/// Evaluate `f(point, seed)` on every grid point with `workers` threads.
/// Failures are recorded per row; the sweep never aborts.
pub fn run_sweep<F>(axes: &[Axis], columns: &[&str], seed: u64, workers: usize, f: F) -> Result<SweepTable>
where
    F: Fn(&[f64], u64) -> Result<Vec<f64>> + Sync,
{
    for a in axes {
        if a.values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Config(format!("axis '{}' has non-finite values", a.name)));
        }
        if a.values.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::Config(format!("axis '{}' is not ordered", a.name)));
        }
    }
    let points = grid_points(axes);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::Config(format!("worker pool: {e}")))?;
    let width = columns.len();
    let rows = pool.install(|| {
        points
            .par_iter()
            .enumerate()
            .map(|(i, p)| match f(p, point_seed(seed, i)) {
                Ok(v) if v.len() == width => SweepRow { params: p.clone(), values: v, error: None },
                Ok(v) => SweepRow {
                    params: p.clone(),
                    values: vec![f64::NAN; width],
                    error: Some(format!("point returned {} values for {width} columns", v.len())),
                },
                Err(e) => SweepRow { params: p.clone(), values: vec![f64::NAN; width], error: Some(e.to_string()) },
            })
            .collect()
    });
    Ok(SweepTable {
        axes: axes.iter().map(|a| a.name.clone()).collect(),
        columns: columns.iter().map(|s| s.to_string()).collect(),
        rows,
    })
}
