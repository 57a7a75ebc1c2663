// Copyright 2026 czpulse contributors
// SPDX-License-Identifier: Apache-2.0

//! Figure-level experiments and the analyses run on their results.
//!
//! Every experiment reads its circuit from the [`Config`] and its grids from
//! `[job]` axes and params (defaults in the README), and returns named [`Table`]s. Per-point failures become error tags in the
//! table instead of aborting the run.

use std::fmt;

use nalgebra::{Matrix3, Vector3};
use rayon::prelude::*;

use crate::config::Config;
use crate::dynamics::GateReport;
use crate::error::{Error, Result};
use crate::model::{self, ghz, to_ghz, to_mhz, CircuitSpec, CouplingSpec, HamiltonianBuilder, ModeSpec};
use crate::noise::{self, NoiseKind, NoiseSpec};
use crate::optimize::{self, run_sweep, GateSetup, OptimizerOptions};
use crate::output::{Cell, Table};
use crate::perturbation;
use crate::pulse::{PulseKind, PulseShape};
use crate::spectrum::{self, linspace, AdiabaticLabel, DFactor};

/// Registered experiment ids with a one-line description.
pub const EXPERIMENTS: &[(&str, &str)] = &[
    ("fig2", "tracked spectrum, ZZ strength and D-factor versus coupler frequency"),
    ("fig3a", "residual |ZZ| over qubit-coupler detuning and direct coupling"),
    ("fig3b", "ZZ versus effective coupling for several qubit detunings, parabola fits"),
    ("fig4a", "optimized error per gate versus gate time for AWP and Fourier pulses"),
    ("fig4b", "30 ns AWP error under parameter deviations"),
    ("fig4c", "error per gate under pulse reflection for several coupling strengths"),
    ("designmap", "optimized error over qubit detuning and coupler anharmonicity, |ZZ| and D* maps"),
    ("stray", "five-mode spectator study: error versus stray coupling"),
    ("noise", "decoherence rates and benchmarking error budget versus gate time"),
    ("schemes", "ZZ and D-factor for the four coupler placement and tuning schemes"),
];

/// Execution settings shared by all experiments.
#[derive(Clone, Copy, Debug)]
pub struct RunOptions {
    pub seed: u64,
    /// 0 selects every logical core
    pub workers: usize,
}

fn pool(workers: usize) -> Result<rayon::ThreadPool> {
    let mut b = rayon::ThreadPoolBuilder::new();
    if workers > 0 {
        b = b.num_threads(workers);
    }
    b.build().map_err(|e| Error::Config(format!("worker pool: {e}")))
}

fn workers_or_all(workers: usize) -> usize {
    if workers == 0 {
        rayon::current_num_threads()
    } else {
        workers
    }
}

/// Run experiment `id` with the given config.
pub fn run(id: &str, cfg: &Config, opts: RunOptions) -> Result<Vec<Table>> {
    let p = pool(opts.workers)?;
    p.install(|| match id {
        "fig2" => fig2(cfg),
        "fig3a" => fig3a(cfg),
        "fig3b" => fig3b(cfg),
        "fig4a" => fig4a(cfg),
        "fig4b" => fig4b(cfg),
        "fig4c" => fig4c(cfg),
        "designmap" => designmap(cfg, opts),
        "stray" => stray(cfg),
        "noise" => noise_budget(cfg),
        "schemes" => schemes(cfg),
        other => Err(Error::UnknownExperiment(other.to_string())),
    })
}

fn num(x: f64) -> Cell {
    Cell::Num(x)
}

fn axis_ghz_from_mhz(cfg: &Config, name: &str, default_mhz: Vec<f64>) -> Result<Vec<f64>> {
    Ok(cfg.job.axis_or(name, default_mhz)?.values.into_iter().map(|v| v * 1e-3).collect())
}

// ---------------------------------------------------------------------------
// spectra

/// ZZ strength and D-factor along a coupler-frequency grid.
#[derive(Clone, Debug)]
pub struct ZzCurves {
    pub omega_c: Vec<f64>,
    /// rad/ns
    pub zeta: Vec<f64>,
    /// rad/ns, with the direct qubit-qubit coupling removed
    pub zeta_no_direct: Vec<f64>,
    pub g_eff: Vec<Option<f64>>,
    pub d_factor: Vec<DFactor>,
    pub labels: Vec<AdiabaticLabel>,
    /// rad/ns per label
    pub energies: Vec<Vec<f64>>,
}

/// Grid extended with the lead-in from a dispersive anchor; returns the
/// ascending path and the positions of the requested samples in it.
fn anchored_grid(builder: &HamiltonianBuilder, labels: &[AdiabaticLabel], grid: &[f64]) -> Result<(Vec<f64>, Vec<usize>)> {
    let top = grid.iter().cloned().fold(f64::MIN, f64::max);
    let bottom = grid.iter().cloned().fold(f64::MAX, f64::min);
    let mut lead = spectrum::anchored_path(builder, labels, top, 0.02)?;
    if lead.len() > 1 && lead[0] < top {
        lead = spectrum::anchored_path(builder, labels, bottom, 0.02)?;
    }
    let mut path: Vec<f64> = grid.to_vec();
    path.extend(lead.iter().filter(|&&w| w > top || w < bottom));
    path.sort_by(f64::total_cmp);
    path.dedup();
    let pos = grid.iter().map(|w| path.iter().position(|p| p == w).expect("grid point kept")).collect();
    Ok((path, pos))
}

fn without_direct(spec: &CircuitSpec) -> CircuitSpec {
    let mut s = spec.clone();
    s.set_rho(spec.qubit_indices[0], spec.qubit_indices[1], 0.0);
    s
}

/// Track the pair states and every bare state with at most two quanta over `grid`.
pub fn zz_curves(spec: &CircuitSpec, grid: &[f64]) -> Result<ZzCurves> {
    if grid.len() < 2 || grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::Domain("coupler grid must be ascending with at least two points".into()));
    }
    let builder = HamiltonianBuilder::new(spec);
    let labels = spectrum::low_excitation_labels(&builder, 2);
    let (path, pos) = anchored_grid(&builder, &labels, grid)?;
    let full = spectrum::track_adiabatic(spec, &path, &labels)?;
    let bare = without_direct(spec);
    let pair = spectrum::pair_labels(spec, (spec.qubit_indices[0], spec.qubit_indices[1]));
    let b2 = HamiltonianBuilder::new(&bare);
    let (path2, pos2) = anchored_grid(&b2, &pair, grid)?;
    let t2 = spectrum::track_path(&b2, &path2, &pair)?;
    Ok(ZzCurves {
        omega_c: grid.to_vec(),
        zeta: pos.iter().map(|&k| full.zeta[k]).collect(),
        zeta_no_direct: pos2.iter().map(|&k| spectrum::zeta_from(&t2.energies[k])).collect(),
        g_eff: pos.iter().map(|&k| full.g_eff[k]).collect(),
        d_factor: pos.iter().map(|&k| full.d_factor[k]).collect(),
        labels: full.labels,
        energies: pos.iter().map(|&k| full.tracked_energies[k].clone()).collect(),
    })
}

/// Extremes of |ζ| over a sweep.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ZzSwitch {
    pub min_abs_khz: f64,
    pub max_abs_mhz: f64,
    pub on_off_ratio: f64,
}

pub fn zz_switch(curves: &ZzCurves) -> ZzSwitch {
    let abs: Vec<f64> = curves.zeta.iter().map(|z| to_mhz(*z).abs()).collect();
    let lo = abs.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = abs.iter().cloned().fold(0.0, f64::max);
    ZzSwitch { min_abs_khz: lo * 1e3, max_abs_mhz: hi, on_off_ratio: hi / lo }
}

pub fn zz_tables(curves: &ZzCurves) -> Result<Vec<Table>> {
    let mut spec_t = Table::new("spectrum", &["omega_c_ghz", "label", "energy_ghz"]);
    let mut zeta_t = Table::new(
        "zeta",
        &["omega_c_ghz", "zeta_mhz", "g_eff_mhz", "d_factor", "abs_zeta_mhz", "zeta_no_direct_mhz", "d_divergent"],
    );
    for (k, &w) in curves.omega_c.iter().enumerate() {
        for (l, &e) in curves.labels.iter().zip(&curves.energies[k]) {
            spec_t.push(vec![num(w), l.to_string().into(), num(to_ghz(e))])?;
        }
        let z = to_mhz(curves.zeta[k]);
        zeta_t.push(vec![
            num(w),
            num(z),
            num(curves.g_eff[k].map_or(f64::NAN, to_mhz)),
            num(curves.d_factor[k].value),
            num(z.abs()),
            num(to_mhz(curves.zeta_no_direct[k])),
            curves.d_factor[k].divergent.into(),
        ])?;
    }
    Ok(vec![spec_t, zeta_t])
}

/// Default sweep of the ZZ-switch figure (GHz).
pub const FIG2_RANGE: (f64, f64, usize) = (5.5, 8.5, 301);

fn fig2(cfg: &Config) -> Result<Vec<Table>> {
    let grid = match &cfg.spectrum {
        Some(r) => r.grid()?,
        None => linspace(FIG2_RANGE.0, FIG2_RANGE.1, FIG2_RANGE.2),
    };
    let curves = zz_curves(&cfg.circuit()?, &grid)?;
    zz_tables(&curves)
}

// ---------------------------------------------------------------------------
// residual ZZ in the dispersive regime

/// Three-mode circuit with fixed coupling strengths (GHz) at coupler frequency `wc`.
pub fn fixed_coupling_circuit(base: &CircuitSpec, w2: f64, wc: f64, g1c: f64, g2c: f64, g12: f64) -> Result<CircuitSpec> {
    let (q1, q2, c) = (base.qubit_indices[0], base.qubit_indices[1], base.coupler_index);
    let mut s = base.clone();
    s.modes[q2].frequency = w2;
    s.modes[c].frequency = wc;
    let w1 = s.modes[q1].frequency;
    s.set_rho(q1, c, g1c / (w1 * wc).sqrt());
    s.set_rho(q2, c, g2c / (w2 * wc).sqrt());
    s.set_rho(q1, q2, g12 / (w1 * w2).sqrt());
    s.validate()?;
    Ok(s)
}

/// Grid of the residual-ZZ map. Frequencies and couplings in GHz.
#[derive(Clone, Debug)]
pub struct LocusParams {
    pub delta12: f64,
    pub g1c: f64,
    pub g2c: f64,
    /// Δ_1c = ω_1 − ω_c samples
    pub delta_1c: Vec<f64>,
    /// uniform, ascending
    pub g12: Vec<f64>,
}

#[derive(Clone, Debug)]
pub struct LocusColumn {
    pub delta_1c: f64,
    pub argmin_g12: f64,
    /// direct coupling that makes g̃ = 0
    pub zero_g12: f64,
    pub min_abs_zeta: f64,
    pub within_cell: bool,
}

#[derive(Clone, Debug)]
pub struct Locus {
    pub params: LocusParams,
    /// rad/ns, `[column][row]`
    pub zeta: Vec<Vec<f64>>,
    pub columns: Vec<LocusColumn>,
    pub fraction_within: f64,
}

/// |ζ| over (Δ_1c, g_12) and the per-column minimum compared with the g̃ = 0 curve.
pub fn residual_locus(base: &CircuitSpec, p: &LocusParams) -> Result<Locus> {
    if p.g12.len() < 2 || p.delta_1c.is_empty() {
        return Err(Error::Domain("residual map needs at least two g12 samples and one detuning".into()));
    }
    let cell = (p.g12[p.g12.len() - 1] - p.g12[0]) / (p.g12.len() - 1) as f64;
    let w1 = base.modes[base.qubit_indices[0]].frequency;
    let w2 = w1 - p.delta12;
    let results: Vec<Result<(Vec<f64>, LocusColumn)>> = p
        .delta_1c
        .par_iter()
        .map(|&d| {
            let wc = w1 - d;
            let zeta = p
                .g12
                .iter()
                .map(|&g| {
                    let s = fixed_coupling_circuit(base, w2, wc, p.g1c, p.g2c, g)?;
                    spectrum::zz_strength(&s, wc)
                })
                .collect::<Result<Vec<f64>>>()?;
            let k = (0..zeta.len()).min_by(|&a, &b| zeta[a].abs().total_cmp(&zeta[b].abs())).unwrap();
            let s0 = fixed_coupling_circuit(base, w2, wc, p.g1c, p.g2c, 0.0)?;
            let zero_g12 = -to_ghz(model::effective_coupling(&s0, wc)?);
            let col = LocusColumn {
                delta_1c: d,
                argmin_g12: p.g12[k],
                zero_g12,
                min_abs_zeta: zeta[k].abs(),
                within_cell: (p.g12[k] - zero_g12).abs() <= cell * (1.0 + 1e-9),
            };
            Ok((zeta, col))
        })
        .collect();
    let mut zeta = Vec::new();
    let mut columns = Vec::new();
    for r in results {
        let (z, c) = r?;
        zeta.push(z);
        columns.push(c);
    }
    let fraction_within = columns.iter().filter(|c| c.within_cell).count() as f64 / columns.len() as f64;
    Ok(Locus { params: p.clone(), zeta, columns, fraction_within })
}

/// Default residual-map grid: Δ_1c from −3 to −1 GHz (|Δ_1c| ≥ 8 g_1c), g_12 from 0 to 30 MHz.
pub fn default_locus_params(delta12: f64) -> LocusParams {
    LocusParams {
        delta12,
        g1c: 0.120,
        g2c: 0.100,
        delta_1c: linspace(-3.0, -1.0, 50),
        g12: linspace(0.0, 0.030, 50),
    }
}

fn fig3a(cfg: &Config) -> Result<Vec<Table>> {
    let base = cfg.circuit()?;
    let deltas = axis_ghz_from_mhz(cfg, "delta12_mhz", vec![600.0, 150.0])?;
    let d1c = cfg.job.axis_or("delta_1c_ghz", linspace(-3.0, -1.0, 50))?.values;
    let g12 = axis_ghz_from_mhz(cfg, "g12_mhz", linspace(0.0, 30.0, 50))?;
    let g1c = cfg.job.param_or("g1c_mhz", 120.0) * 1e-3;
    let g2c = cfg.job.param_or("g2c_mhz", 100.0) * 1e-3;
    let mut grid = Table::new(
        "fig3a_grid",
        &["delta12_mhz", "delta_1c_ghz", "g12_mhz", "zeta_exact_mhz", "abs_zeta_mhz", "zeta_pert_mhz", "nu"],
    );
    let w1 = base.modes[base.qubit_indices[0]].frequency;
    let mut locus = Table::new(
        "fig3a_locus",
        &["delta12_mhz", "delta_1c_ghz", "argmin_g12_mhz", "zero_g12_mhz", "min_abs_zeta_khz", "within_cell"],
    );
    for &d12 in &deltas {
        let p = LocusParams { delta12: d12, g1c, g2c, delta_1c: d1c.clone(), g12: g12.clone() };
        let l = residual_locus(&base, &p)?;
        for (c, col) in l.columns.iter().enumerate() {
            for (r, &g) in p.g12.iter().enumerate() {
                let z = to_mhz(l.zeta[c][r]);
                let wc = w1 - col.delta_1c;
                let s = fixed_coupling_circuit(&base, w1 - d12, wc, g1c, g2c, g)?;
                let (zp, nu) = perturbation::zeta_fourth_order_generic(&s, wc)
                    .map_or((f64::NAN, f64::NAN), |p| (to_mhz(p.zeta_total), p.nu));
                grid.push(vec![num(d12 * 1e3), num(col.delta_1c), num(g * 1e3), num(z), num(z.abs()), num(zp), num(nu)])?;
            }
            locus.push(vec![
                num(d12 * 1e3),
                num(col.delta_1c),
                num(col.argmin_g12 * 1e3),
                num(col.zero_g12 * 1e3),
                num(to_mhz(col.min_abs_zeta) * 1e3),
                col.within_cell.into(),
            ])?;
        }
    }
    Ok(vec![grid, locus])
}

/// Parabola-law study: ζ(g̃) at fixed g_12 while the coupler moves.
#[derive(Clone, Debug)]
pub struct ParabolaParams {
    /// GHz
    pub deltas: Vec<f64>,
    /// GHz, ascending
    pub omega_c: Vec<f64>,
    pub g12: f64,
    pub g1c: f64,
    pub g2c: f64,
}

impl Default for ParabolaParams {
    fn default() -> Self {
        ParabolaParams {
            deltas: vec![0.10, 0.15, 0.20, 0.40, 0.60, 0.80],
            omega_c: linspace(7.1, 8.1, 41),
            g12: 0.008,
            g1c: 0.120,
            g2c: 0.100,
        }
    }
}

#[derive(Clone, Debug)]
pub struct ParabolaCurve {
    pub delta12: f64,
    /// MHz
    pub g_eff_mhz: Vec<f64>,
    /// kHz
    pub zeta_khz: Vec<f64>,
    pub nu: Vec<f64>,
    /// ζ[kHz] = a g̃[MHz]² + b g̃ + c
    pub coeffs: [f64; 3],
    pub r2: f64,
}

impl ParabolaCurve {
    pub fn eval(&self, x: f64) -> f64 {
        self.coeffs[0] * x * x + self.coeffs[1] * x + self.coeffs[2]
    }

    pub fn opens_upward(&self) -> bool {
        self.coeffs[0] > 0.0
    }

    fn nu_at(&self, x: f64) -> f64 {
        interp_sorted(&self.g_eff_mhz, &self.nu, x)
    }
}

#[derive(Clone, Debug)]
pub struct ParabolaStudy {
    pub curves: Vec<ParabolaCurve>,
    /// (g̃ MHz, ζ kHz) from pairwise intersections of the fits
    pub common_point: (f64, f64),
    /// (α_q ν, 4(2α_c + α_q) ν²) with ν averaged over the curves at the common point
    pub predicted: (f64, f64),
    pub intersections: Vec<(f64, f64)>,
}

fn interp_sorted(x: &[f64], y: &[f64], t: f64) -> f64 {
    let mut idx: Vec<usize> = (0..x.len()).collect();
    idx.sort_by(|&a, &b| x[a].total_cmp(&x[b]));
    let xs: Vec<f64> = idx.iter().map(|&i| x[i]).collect();
    let ys: Vec<f64> = idx.iter().map(|&i| y[i]).collect();
    if t <= xs[0] {
        return ys[0];
    }
    if t >= xs[xs.len() - 1] {
        return ys[ys.len() - 1];
    }
    let k = xs.partition_point(|&v| v < t).max(1);
    let f = (t - xs[k - 1]) / (xs[k] - xs[k - 1]);
    ys[k - 1] + f * (ys[k] - ys[k - 1])
}

/// Least-squares quadratic fit; returns coefficients (a, b, c) and R².
pub fn fit_quadratic(x: &[f64], y: &[f64]) -> Result<([f64; 3], f64)> {
    if x.len() < 3 || x.len() != y.len() {
        return Err(Error::Dimension("quadratic fit needs at least three paired samples".into()));
    }
    let mut ata = Matrix3::zeros();
    let mut aty = Vector3::zeros();
    for (&xi, &yi) in x.iter().zip(y) {
        let row = Vector3::new(xi * xi, xi, 1.0);
        ata += row * row.transpose();
        aty += row * yi;
    }
    let sol = ata.lu().solve(&aty).ok_or_else(|| Error::Singular("degenerate quadratic fit".into()))?;
    let coeffs = [sol[0], sol[1], sol[2]];
    let mean = y.iter().sum::<f64>() / y.len() as f64;
    let ss_tot: f64 = y.iter().map(|v| (v - mean).powi(2)).sum();
    let ss_res: f64 = x
        .iter()
        .zip(y)
        .map(|(&xi, &yi)| (yi - (coeffs[0] * xi * xi + coeffs[1] * xi + coeffs[2])).powi(2))
        .sum();
    Ok((coeffs, 1.0 - ss_res / ss_tot))
}

fn intersection(a: &ParabolaCurve, b: &ParabolaCurve) -> Option<(f64, f64)> {
    let range = |c: &ParabolaCurve| {
        let mn = c.g_eff_mhz.iter().cloned().fold(f64::INFINITY, f64::min);
        let mx = c.g_eff_mhz.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        (mn, mx)
    };
    let (a0, a1) = range(a);
    let (b0, b1) = range(b);
    let (lo, hi) = (a0.max(b0), a1.min(b1));
    if !(hi > lo) {
        return None;
    }
    let (p, q, r) = (a.coeffs[0] - b.coeffs[0], a.coeffs[1] - b.coeffs[1], a.coeffs[2] - b.coeffs[2]);
    let roots: Vec<f64> = if p.abs() < 1e-300 {
        if q == 0.0 {
            vec![]
        } else {
            vec![-r / q]
        }
    } else {
        let disc = q * q - 4.0 * p * r;
        if disc < 0.0 {
            vec![]
        } else {
            let s = disc.sqrt();
            vec![(-q + s) / (2.0 * p), (-q - s) / (2.0 * p)]
        }
    };
    let mid = 0.5 * (lo + hi);
    roots
        .into_iter()
        .filter(|x| *x >= lo && *x <= hi)
        .min_by(|x, y| (x - mid).abs().total_cmp(&(y - mid).abs()))
        .map(|x| (x, 0.5 * (a.eval(x) + b.eval(x))))
}

/// Sweep the coupler at fixed g_12 for each detuning, fit ζ(g̃) and locate the common point.
pub fn parabola_study(base: &CircuitSpec, p: &ParabolaParams) -> Result<ParabolaStudy> {
    let (q1, q2, c) = (base.qubit_indices[0], base.qubit_indices[1], base.coupler_index);
    let alpha_q = base.modes[q1].anharmonicity;
    if (base.modes[q2].anharmonicity - alpha_q).abs() > 1e-12 {
        return Err(Error::Config("the parabola law assumes equal qubit anharmonicities".into()));
    }
    let alpha_c = base.modes[c].anharmonicity;
    let w1 = base.modes[q1].frequency;
    let curves = p
        .deltas
        .par_iter()
        .map(|&d12| {
            let mut g = Vec::new();
            let mut z = Vec::new();
            let mut nu = Vec::new();
            for &wc in &p.omega_c {
                let s = fixed_coupling_circuit(base, w1 - d12, wc, p.g1c, p.g2c, p.g12)?;
                g.push(to_mhz(model::effective_coupling(&s, wc)?));
                z.push(to_mhz(spectrum::zz_strength(&s, wc)?) * 1e3);
                nu.push(perturbation::nu(&s, wc));
            }
            let (coeffs, r2) = fit_quadratic(&g, &z)?;
            Ok(ParabolaCurve { delta12: d12, g_eff_mhz: g, zeta_khz: z, nu, coeffs, r2 })
        })
        .collect::<Result<Vec<_>>>()?;
    let mut intersections = Vec::new();
    for i in 0..curves.len() {
        for j in (i + 1)..curves.len() {
            if let Some(pt) = intersection(&curves[i], &curves[j]) {
                intersections.push(pt);
            }
        }
    }
    if intersections.is_empty() {
        return Err(Error::Numerical("fitted parabolas do not intersect inside the sampled range".into()));
    }
    let n = intersections.len() as f64;
    let x = intersections.iter().map(|p| p.0).sum::<f64>() / n;
    let y = intersections.iter().map(|p| p.1).sum::<f64>() / n;
    let nu = curves.iter().map(|c| c.nu_at(x)).sum::<f64>() / curves.len() as f64;
    let predicted = (
        to_mhz(ghz(alpha_q)) * nu,
        to_mhz(ghz(4.0 * (2.0 * alpha_c + alpha_q))) * nu * nu * 1e3,
    );
    Ok(ParabolaStudy { curves, common_point: (x, y), predicted, intersections })
}

fn fig3b(cfg: &Config) -> Result<Vec<Table>> {
    let base = cfg.circuit()?;
    let d = ParabolaParams::default();
    let p = ParabolaParams {
        deltas: axis_ghz_from_mhz(cfg, "delta12_mhz", d.deltas.iter().map(|v| v * 1e3).collect())?,
        omega_c: cfg.job.axis_or("omega_c_ghz", d.omega_c)?.values,
        g12: cfg.job.param_or("g12_mhz", 8.0) * 1e-3,
        g1c: cfg.job.param_or("g1c_mhz", 120.0) * 1e-3,
        g2c: cfg.job.param_or("g2c_mhz", 100.0) * 1e-3,
    };
    let s = parabola_study(&base, &p)?;
    let mut curves = Table::new("fig3b_curves", &["delta12_mhz", "omega_c_ghz", "g_eff_mhz", "zeta_khz", "nu"]);
    let mut fits = Table::new("fig3b_fits", &["delta12_mhz", "a_khz_per_mhz2", "b_khz_per_mhz", "c_khz", "r2", "opens_upward"]);
    for c in &s.curves {
        for (k, &w) in p.omega_c.iter().enumerate() {
            curves.push(vec![num(c.delta12 * 1e3), num(w), num(c.g_eff_mhz[k]), num(c.zeta_khz[k]), num(c.nu[k])])?;
        }
        fits.push(vec![
            num(c.delta12 * 1e3),
            num(c.coeffs[0]),
            num(c.coeffs[1]),
            num(c.coeffs[2]),
            num(c.r2),
            c.opens_upward().into(),
        ])?;
    }
    let mut common = Table::new("fig3b_common", &["source", "g_eff_mhz", "zeta_khz"]);
    common.push(vec!["fit".into(), num(s.common_point.0), num(s.common_point.1)])?;
    common.push(vec!["predicted".into(), num(s.predicted.0), num(s.predicted.1)])?;
    Ok(vec![curves, fits, common])
}

// ---------------------------------------------------------------------------
// gates

/// Gate setup with the filter, distortion, order and step of the config.
pub fn configured_setup(cfg: &Config, spec: &CircuitSpec, nominal: &CircuitSpec, idle: f64, bound: f64) -> Result<GateSetup> {
    let mut s = GateSetup::new(spec, nominal, idle, bound)?;
    s.filter_mhz = cfg.pulse.filter_mhz;
    s.distortion = cfg.pulse.distortion.map(|[r, td]| (r, td));
    s.order = cfg.pulse.order()?;
    s.dt = cfg.pulse.dt_ns;
    Ok(s)
}

/// Optimized or fixed-λ gate.
#[derive(Clone, Debug)]
pub struct GateOutcome {
    pub lambdas: Vec<f64>,
    pub report: GateReport,
    pub evals: usize,
    pub pulse: PulseShape,
}

/// Evaluate `lambdas` if given, otherwise optimize `mmax` components.
pub fn run_gate(setup: &GateSetup, kind: PulseKind, tg: f64, mmax: usize, lambdas: &[f64], opts: &OptimizerOptions) -> Result<GateOutcome> {
    if lambdas.is_empty() {
        let o = optimize::optimize_pulse(setup, kind, tg, mmax, opts)?;
        Ok(GateOutcome { lambdas: o.lambdas, report: o.report, evals: o.evals, pulse: o.pulse })
    } else {
        let (pulse, report) = setup.evaluate(kind, tg, lambdas)?;
        Ok(GateOutcome { lambdas: lambdas.to_vec(), report, evals: 1, pulse })
    }
}

const GATE_COLUMNS: [&str; 12] = [
    "epg",
    "phi_zz_rad",
    "leakage_total",
    "phi1_rad",
    "phi2_rad",
    "lambda1",
    "lambda2",
    "lambda3",
    "lambda4",
    "evals",
    "unitarity_defect",
    "error",
];

fn gate_cells(r: &Result<GateOutcome>) -> Vec<Cell> {
    match r {
        Ok(o) => {
            let mut row = vec![
                num(o.report.epg),
                num(o.report.phi_zz),
                num(o.report.total_leakage()),
                num(o.report.phi1),
                num(o.report.phi2),
            ];
            row.extend((0..4).map(|k| num(o.lambdas.get(k).copied().unwrap_or(f64::NAN))));
            row.push(num(o.evals as f64));
            row.push(num(o.report.unitarity_defect));
            row.push("".into());
            row
        }
        Err(e) => {
            let mut row = vec![num(f64::NAN); GATE_COLUMNS.len() - 1];
            row.push(e.to_string().into());
            row
        }
    }
}

fn gate_header(leading: &[&str]) -> Vec<String> {
    leading.iter().chain(GATE_COLUMNS.iter()).map(|s| s.to_string()).collect()
}

fn fig4a(cfg: &Config) -> Result<Vec<Table>> {
    let spec = cfg.dynamics_circuit()?;
    let idle = cfg.idle()?;
    let bound = cfg.pulse.bound()?;
    let fourier_bound = cfg.job.param_or("fourier_bound_ghz", 5.6);
    let tgs = cfg.job.axis_or("tg_ns", vec![16.0, 20.0, 24.0, 26.0, 30.0, 36.0, 40.0, 50.0])?.values;
    let awp_m = cfg.job.axis_or("awp_mmax", vec![1.0, 2.0])?.values;
    let fourier_m = cfg.job.axis_or("fourier_mmax", vec![1.0])?.values;
    let awp = configured_setup(cfg, &spec, &spec, idle, bound)?;
    let fourier = configured_setup(cfg, &spec, &spec, idle, fourier_bound)?;
    let mut jobs: Vec<(PulseKind, usize, f64)> = Vec::new();
    for &m in &awp_m {
        jobs.extend(tgs.iter().map(|&t| (PulseKind::Awp, m as usize, t)));
    }
    for &m in &fourier_m {
        jobs.extend(tgs.iter().map(|&t| (PulseKind::Fourier, m as usize, t)));
    }
    let results: Vec<Result<GateOutcome>> = jobs
        .par_iter()
        .map(|&(kind, m, tg)| {
            let setup = if kind == PulseKind::Fourier { &fourier } else { &awp };
            run_gate(setup, kind, tg, m, &[], &cfg.optimizer)
        })
        .collect();
    let mut t = Table { name: "fig4a".into(), header: gate_header(&["kind", "mmax", "tg_ns"]), rows: Vec::new() };
    for ((kind, m, tg), r) in jobs.iter().zip(&results) {
        let mut row = vec![kind_name(*kind).into(), num(*m as f64), num(*tg)];
        row.extend(gate_cells(r));
        t.push(row)?;
    }
    Ok(vec![t])
}

fn kind_name(k: PulseKind) -> &'static str {
    match k {
        PulseKind::Awp => "awp",
        PulseKind::Fourier => "fourier",
        PulseKind::Netzero => "netzero",
    }
}

/// Parameter that a [`Deviation`] shifts.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DeviationTarget {
    /// frequency of qubit k (1-based)
    Frequency(usize),
    CouplerFrequency,
    Anharmonicity(usize),
    CouplerAnharmonicity,
    /// ρ between qubit k and the coupler
    QubitCoupler(usize),
    /// ρ between qubits k and l
    QubitQubit(usize, usize),
}

/// One-at-a-time parameter error: GHz for frequencies and anharmonicities,
/// a relative fraction for coupling coefficients.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Deviation {
    pub target: DeviationTarget,
    pub delta: f64,
}

impl fmt::Display for Deviation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.target {
            DeviationTarget::Frequency(k) => write!(f, "omega{k},{:+}MHz", self.delta * 1e3),
            DeviationTarget::CouplerFrequency => write!(f, "omegac,{:+}MHz", self.delta * 1e3),
            DeviationTarget::Anharmonicity(k) => write!(f, "alpha{k},{:+}MHz", self.delta * 1e3),
            DeviationTarget::CouplerAnharmonicity => write!(f, "alphac,{:+}MHz", self.delta * 1e3),
            DeviationTarget::QubitCoupler(k) => write!(f, "rho{k}c,{:+}%", self.delta * 1e2),
            DeviationTarget::QubitQubit(k, l) => write!(f, "rho{k}{l},{:+}%", self.delta * 1e2),
        }
    }
}

fn parse_target(name: &str) -> Option<DeviationTarget> {
    let digit = |s: &str| s.parse::<usize>().ok().filter(|&k| k >= 1);
    if let Some(rest) = name.strip_prefix("omega") {
        return if rest == "c" { Some(DeviationTarget::CouplerFrequency) } else { digit(rest).map(DeviationTarget::Frequency) };
    }
    if let Some(rest) = name.strip_prefix("alpha") {
        return if rest == "c" {
            Some(DeviationTarget::CouplerAnharmonicity)
        } else {
            digit(rest).map(DeviationTarget::Anharmonicity)
        };
    }
    let rest = name.strip_prefix("rho")?;
    let chars: Vec<char> = rest.chars().collect();
    if chars.len() != 2 {
        return None;
    }
    let k = chars[0].to_digit(10).filter(|&d| d >= 1)? as usize;
    if chars[1] == 'c' {
        return Some(DeviationTarget::QubitCoupler(k));
    }
    let l = chars[1].to_digit(10).filter(|&d| d >= 1)? as usize;
    (k != l).then_some(DeviationTarget::QubitQubit(k.min(l), k.max(l)))
}

impl Deviation {
    /// Parse `name,delta`, e.g. `omega1,+10MHz`, `alphac,-0.01GHz`, `rho12,-10%`.
    pub fn parse(s: &str) -> Result<Self> {
        let bad = || Error::Config(format!("cannot parse deviation '{s}' (expected e.g. omega1,+10MHz or rho1c,-10%)"));
        let (name, value) = s.split_once(',').ok_or_else(bad)?;
        let target = parse_target(name.trim().to_ascii_lowercase().as_str()).ok_or_else(bad)?;
        let value = value.trim();
        let split = value.find(|c: char| c.is_ascii_alphabetic() || c == '%').unwrap_or(value.len());
        let (number, unit) = value.split_at(split);
        let x: f64 = number.trim().parse().map_err(|_| bad())?;
        let is_rho = matches!(target, DeviationTarget::QubitCoupler(_) | DeviationTarget::QubitQubit(..));
        let delta = match (is_rho, unit.to_ascii_lowercase().as_str()) {
            (true, "%") => x / 100.0,
            (true, "") => x,
            (false, "mhz") => x * 1e-3,
            (false, "khz") => x * 1e-6,
            (false, "ghz") => x,
            _ => return Err(bad()),
        };
        if !delta.is_finite() {
            return Err(bad());
        }
        Ok(Deviation { target, delta })
    }

    /// Deviated circuit and the coupler frequency offset (GHz) it implies.
    pub fn apply(&self, spec: &CircuitSpec) -> Result<(CircuitSpec, f64)> {
        let mut s = spec.clone();
        let c = spec.coupler_index;
        let qubit = |k: usize| {
            spec.qubit_indices
                .get(k - 1)
                .copied()
                .ok_or_else(|| Error::Config(format!("deviation names qubit {k}, circuit has {}", spec.qubit_indices.len())))
        };
        let mut offset = 0.0;
        match self.target {
            DeviationTarget::Frequency(k) => s.modes[qubit(k)?].frequency += self.delta,
            DeviationTarget::CouplerFrequency => offset = self.delta,
            DeviationTarget::Anharmonicity(k) => s.modes[qubit(k)?].anharmonicity += self.delta,
            DeviationTarget::CouplerAnharmonicity => s.modes[c].anharmonicity += self.delta,
            DeviationTarget::QubitCoupler(k) => {
                let q = qubit(k)?;
                s.set_rho(q, c, spec.rho(q, c) * (1.0 + self.delta));
            }
            DeviationTarget::QubitQubit(k, l) => {
                let (a, b) = (qubit(k)?, qubit(l)?);
                s.set_rho(a, b, spec.rho(a, b) * (1.0 + self.delta));
            }
        }
        s.validate()?;
        Ok((s, offset))
    }
}

/// ±10 MHz on every frequency and anharmonicity, ±10 % on every ρ of a two-qubit device.
pub fn default_deviations() -> Vec<Deviation> {
    use DeviationTarget::*;
    let targets = [
        Frequency(1),
        Frequency(2),
        CouplerFrequency,
        Anharmonicity(1),
        Anharmonicity(2),
        CouplerAnharmonicity,
        QubitCoupler(1),
        QubitCoupler(2),
        QubitQubit(1, 2),
    ];
    let mut out = Vec::new();
    for t in targets {
        let step = if matches!(t, QubitCoupler(_) | QubitQubit(..)) { 0.10 } else { 0.010 };
        out.push(Deviation { target: t, delta: -step });
        out.push(Deviation { target: t, delta: step });
    }
    out
}

/// Setup simulating the deviated device with the pulse shaping of `nominal`.
pub fn deviated_setup(nominal: &GateSetup, devs: &[Deviation]) -> Result<GateSetup> {
    let mut spec = nominal.spec.clone();
    let mut offset = nominal.omega_c_offset;
    for d in devs {
        let (s, o) = d.apply(&spec)?;
        spec = s;
        offset += o;
    }
    let setup = nominal.with_circuit(&spec)?;
    if offset != setup.omega_c_offset {
        return setup.with_offset(offset);
    }
    Ok(setup)
}

/// Gate on a deviated device: pulse shaped from the nominal table, λ re-optimized.
pub fn deviated_gate(nominal: &GateSetup, dev: &Deviation, kind: PulseKind, tg: f64, mmax: usize, opts: &OptimizerOptions) -> Result<GateOutcome> {
    run_gate(&deviated_setup(nominal, std::slice::from_ref(dev))?, kind, tg, mmax, &[], opts)
}

/// Gate described by `[pulse]`, on the configured device with `devs` applied.
/// Fixed `lambdas` are evaluated, otherwise `mmax` components are optimized.
pub fn configured_gate(cfg: &Config, devs: &[Deviation]) -> Result<GateOutcome> {
    let spec = cfg.dynamics_circuit()?;
    let nominal = configured_setup(cfg, &spec, &spec, cfg.idle()?, cfg.pulse.bound()?)?;
    let setup = if devs.is_empty() { nominal } else { deviated_setup(&nominal, devs)? };
    run_gate(&setup, cfg.pulse.kind()?, cfg.pulse.tg_ns, cfg.pulse.mmax, &cfg.pulse.lambdas, &cfg.optimizer)
}

/// `gate` summary row and `waveform` samples of one gate.
pub fn gate_tables(kind: PulseKind, outcome: &GateOutcome) -> Result<Vec<Table>> {
    let mut header = gate_header(&["tg_ns"]);
    header.push("kind".into());
    let mut g = Table { name: "gate".into(), header, rows: Vec::new() };
    let mut cells = vec![num(outcome.pulse.gate_time)];
    cells.extend(gate_cells(&Ok(outcome.clone())));
    cells.push(kind_name(kind).into());
    g.push(cells)?;
    let mut w = Table::new("waveform", &["t_ns", "omega_c_ghz"]);
    for (t, &x) in outcome.pulse.times().iter().zip(&outcome.pulse.samples) {
        w.push(vec![num(*t), num(x)])?;
    }
    Ok(vec![g, w])
}

fn fig4b(cfg: &Config) -> Result<Vec<Table>> {
    let spec = cfg.dynamics_circuit()?;
    let setup = configured_setup(cfg, &spec, &spec, cfg.idle()?, cfg.pulse.bound()?)?;
    let kind = cfg.pulse.kind()?;
    let tg = cfg.pulse.tg_ns;
    let devs = default_deviations();
    let mut all = vec![None];
    all.extend(devs.iter().map(|d| Some(*d)));
    let results: Vec<Result<GateOutcome>> = all
        .par_iter()
        .map(|d| match d {
            None => run_gate(&setup, kind, tg, cfg.pulse.mmax, &[], &cfg.optimizer),
            Some(d) => deviated_gate(&setup, d, kind, tg, cfg.pulse.mmax, &cfg.optimizer),
        })
        .collect();
    let mut t = Table { name: "fig4b".into(), header: gate_header(&["deviation", "tg_ns"]), rows: Vec::new() };
    for (d, r) in all.iter().zip(&results) {
        let mut row = vec![d.map_or("none".to_string(), |d| d.to_string()).into(), num(tg)];
        row.extend(gate_cells(r));
        t.push(row)?;
    }
    Ok(vec![t])
}

/// Coupling configurations of the distortion study: (name, ρ_1c, ρ_2c, ρ_12).
pub const DISTORTION_DESIGNS: [(&str, f64, f64, f64); 3] =
    [("gqc70", 0.012, 0.012, 0.0006), ("gqc105", 0.018, 0.018, 0.0015), ("gqc175", 0.03, 0.03, 0.0036)];

/// Two transmons coupled directly, the second one tunable (GHz).
pub fn coupler_free_circuit(w1: f64, w2_idle: f64, alpha: f64, rho12: f64, levels: usize) -> Result<CircuitSpec> {
    let modes = vec![ModeSpec::new("Q1", w1, alpha, levels, false), ModeSpec::new("Q2", w2_idle, alpha, levels, true)];
    CircuitSpec::new(modes, vec![CouplingSpec::new(0, 1, rho12)], None)?.with_qubits(vec![0, 1])
}

fn fig4c(cfg: &Config) -> Result<Vec<Table>> {
    let base = cfg.dynamics_circuit()?;
    let (q1, q2, c) = (base.qubit_indices[0], base.qubit_indices[1], base.coupler_index);
    let kind = cfg.pulse.kind()?;
    let tg = cfg.pulse.tg_ns;
    let rs = cfg.job.axis_or("r", vec![0.0, 0.005, 0.01, 0.02, 0.05, 0.1])?.values;
    let td = cfg.job.param_or("td_ns", 10.0);
    let (idle_lo, idle_hi) = (cfg.job.param_or("idle_lo_ghz", 7.6), cfg.job.param_or("idle_hi_ghz", 8.4));
    let mut designs: Vec<(String, Result<(CircuitSpec, f64, f64)>)> = Vec::new();
    for (name, r1, r2, r12) in DISTORTION_DESIGNS {
        let mut s = base.clone();
        s.set_rho(q1, c, r1);
        s.set_rho(q2, c, r2);
        s.set_rho(q1, q2, r12);
        let d = spectrum::minimal_zz_bias(&s, idle_lo, idle_hi, 1e-3).map(|(w, _)| (s, w, cfg.pulse.bound_ghz.unwrap_or(5.75)));
        designs.push((name.to_string(), d));
    }
    let levels = base.modes[q1].levels;
    let cf = coupler_free_circuit(
        cfg.job.param_or("coupler_free_w1_ghz", 6.0),
        cfg.job.param_or("coupler_free_w2_ghz", 8.0),
        base.modes[q1].anharmonicity,
        cfg.job.param_or("coupler_free_rho12", 0.005),
        levels,
    )
    .map(|s| {
        let idle = s.modes[1].frequency;
        (s, idle, cfg.job.param_or("coupler_free_bound_ghz", 6.2))
    });
    designs.push(("coupler_free".into(), cf));
    let mut header = vec!["design", "g_qc_mhz", "idle_ghz", "zeta_idle_khz", "r", "td_ns"];
    header.extend(GATE_COLUMNS);
    let mut t = Table::new("fig4c", &header);
    let rows: Vec<Vec<Vec<Cell>>> = designs
        .par_iter()
        .map(|(name, d)| {
            let fail = |e: &Error| -> Vec<Vec<Cell>> {
                rs.iter()
                    .map(|&r| {
                        let mut row = vec![name.clone().into(), num(f64::NAN), num(f64::NAN), num(f64::NAN), num(r), num(td)];
                        row.extend(gate_cells(&Err(Error::Numerical(e.to_string()))));
                        row
                    })
                    .collect()
            };
            let (spec, idle, bound) = match d {
                Ok(x) => x,
                Err(e) => return fail(e),
            };
            let (a, b) = (spec.qubit_indices[0], spec.coupler_index);
            let g_qc = if a == b { f64::NAN } else { to_mhz(spec.coupling_strength(a, b, *idle)) };
            let zeta_idle = spectrum::zz_strength(spec, *idle).map_or(f64::NAN, |z| to_mhz(z) * 1e3);
            let mut clean = match configured_setup(cfg, spec, spec, *idle, *bound) {
                Ok(s) => s,
                Err(e) => return fail(&e),
            };
            clean.distortion = None;
            let best = run_gate(&clean, kind, tg, cfg.pulse.mmax, &cfg.pulse.lambdas, &cfg.optimizer);
            rs.iter()
                .map(|&r| {
                    let out = best.as_ref().map_err(|e| Error::Numerical(e.to_string())).and_then(|b| {
                        let mut s = clean.with_circuit(spec)?;
                        s.distortion = if r == 0.0 { None } else { Some((r, td)) };
                        run_gate(&s, kind, tg, b.lambdas.len(), &b.lambdas, &cfg.optimizer)
                    });
                    let mut row = vec![name.clone().into(), num(g_qc), num(*idle), num(zeta_idle), num(r), num(td)];
                    row.extend(gate_cells(&out));
                    row
                })
                .collect()
        })
        .collect();
    for block in rows {
        for row in block {
            t.push(row)?;
        }
    }
    Ok(vec![t])
}

// ---------------------------------------------------------------------------
// design map

/// |ζ| and running-maximum D along the path from `idle` to `end`.
pub fn indicator_curve(spec: &CircuitSpec, idle: f64, end: f64, points: usize) -> Result<Vec<(f64, f64, DFactor)>> {
    let builder = HamiltonianBuilder::new(spec);
    let labels = spectrum::pair_labels(spec, (spec.qubit_indices[0], spec.qubit_indices[1]));
    let mut path = spectrum::anchored_path(&builder, &labels, idle, 0.02)?;
    let lead = path.len() - 1;
    let n = points.max(2);
    path.extend((1..n).map(|k| idle + (end - idle) * k as f64 / (n - 1) as f64));
    let t = spectrum::track_path(&builder, &path, &labels)?;
    let d: Vec<DFactor> = (lead..path.len())
        .into_par_iter()
        .map(|k| spectrum::d_factor_from(&builder, &builder.eigh(path[k]), &t.index[k], path[k]))
        .collect();
    let mut best = DFactor { value: 0.0, divergent: false };
    Ok((lead..path.len())
        .zip(d)
        .map(|(k, x)| {
            best.value = best.value.max(x.value);
            best.divergent |= x.divergent;
            (path[k], spectrum::zeta_from(&t.energies[k]), best)
        })
        .collect())
}

fn design_circuit(base: &CircuitSpec, delta12: f64, alpha_c: f64) -> Result<CircuitSpec> {
    let (q1, q2, c) = (base.qubit_indices[0], base.qubit_indices[1], base.coupler_index);
    let mut s = base.clone();
    s.modes[q2].frequency = s.modes[q1].frequency - delta12;
    s.modes[c].anharmonicity = alpha_c;
    s.validate()?;
    Ok(s)
}

fn designmap(cfg: &Config, opts: RunOptions) -> Result<Vec<Table>> {
    let base = cfg.dynamics_circuit()?;
    let q1 = base.qubit_indices[0];
    let w1 = base.modes[q1].frequency;
    let d12 = cfg.job.axis_or("delta12_mhz", linspace(100.0, 1000.0, 10))?;
    let ac = cfg.job.axis_or("alpha_c_mhz", linspace(-1200.0, 200.0, 8))?;
    let (idle_lo, idle_hi) = (cfg.job.param_or("idle_lo_ghz", 7.4), cfg.job.param_or("idle_hi_ghz", 8.6));
    let depth = cfg.job.param_or("bound_below_top_ghz", 0.25);
    let kind = cfg.pulse.kind()?;
    let tg = cfg.pulse.tg_ns;
    let epg = run_sweep(
        &[d12.clone(), ac.clone()],
        &["idle_ghz", "bound_ghz", "epg", "lambda1"],
        opts.seed,
        workers_or_all(opts.workers),
        |p, _| {
            let s = design_circuit(&base, p[0] * 1e-3, p[1] * 1e-3)?;
            let (idle, _) = spectrum::minimal_zz_bias(&s, idle_lo, idle_hi, 1e-3)?;
            let top = w1.max(w1 - p[0] * 1e-3);
            let bound = top - depth;
            let setup = configured_setup(cfg, &s, &s, idle, bound)?;
            let g = run_gate(&setup, kind, tg, 1, &[], &cfg.optimizer)?;
            Ok(vec![idle, bound, g.report.epg, g.lambdas[0]])
        },
    )?;
    let ind_d12 = cfg.job.axis_or("indicator_delta12_mhz", vec![100.0, 800.0])?;
    let ind_ac = cfg.job.axis_or("indicator_alpha_c_mhz", linspace(-1400.0, 400.0, 19))?;
    let end = cfg.job.param_or("indicator_end_ghz", 5.0);
    let points = cfg.job.param_or("indicator_points", 200.0) as usize;
    let curves: Vec<(f64, f64, Result<Vec<(f64, f64, DFactor)>>)> = ind_d12
        .values
        .iter()
        .flat_map(|&d| ind_ac.values.iter().map(move |&a| (d, a)))
        .collect::<Vec<_>>()
        .par_iter()
        .map(|&(d, a)| {
            let r = design_circuit(&base, d * 1e-3, a * 1e-3).and_then(|s| {
                let (idle, _) = spectrum::minimal_zz_bias(&s, idle_lo, idle_hi, 1e-3)?;
                indicator_curve(&s, idle, end, points)
            });
            (d, a, r)
        })
        .collect();
    let mut ind = Table::new(
        "designmap_indicators",
        &["delta12_mhz", "alpha_c_mhz", "omega_c_ghz", "abs_zeta_mhz", "d_star_ns2", "d_divergent", "error"],
    );
    for (d, a, r) in curves {
        match r {
            Ok(rows) => {
                for (w, z, ds) in rows {
                    ind.push(vec![
                        num(d),
                        num(a),
                        num(w),
                        num(to_mhz(z).abs()),
                        num(ds.value),
                        ds.divergent.into(),
                        "".into(),
                    ])?;
                }
            }
            Err(e) => ind.push(vec![
                num(d),
                num(a),
                num(f64::NAN),
                num(f64::NAN),
                num(f64::NAN),
                "".into(),
                e.to_string().into(),
            ])?,
        }
    }
    Ok(vec![Table::from_sweep("designmap_epg", &epg), ind])
}

// ---------------------------------------------------------------------------
// five-mode stray coupling

/// Which neighbouring pair performs the gate in the (Q1, C1, Q2, C2, Q3) chain.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StrayGate {
    /// CZ on (Q1, Q2), C1 pulsed
    CzI,
    /// CZ on (Q2, Q3), C2 pulsed
    ICz,
}

impl StrayGate {
    pub fn name(&self) -> &'static str {
        match self {
            StrayGate::CzI => "cz_i",
            StrayGate::ICz => "i_cz",
        }
    }
}

/// Kind of next-nearest-neighbour stray coupling.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StrayKind {
    QubitQubit,
    QubitCoupler,
    CouplerCoupler,
}

impl StrayKind {
    pub fn name(&self) -> &'static str {
        match self {
            StrayKind::QubitQubit => "qq",
            StrayKind::QubitCoupler => "qc",
            StrayKind::CouplerCoupler => "cc",
        }
    }

    /// Mode pair of the stray element for `gate`. The qubit-coupler element
    /// links the pulsed coupler with the spectator qubit.
    pub fn pair(&self, gate: StrayGate) -> (usize, usize) {
        match (self, gate) {
            (StrayKind::QubitQubit, _) => (0, 4),
            (StrayKind::CouplerCoupler, _) => (1, 3),
            (StrayKind::QubitCoupler, StrayGate::CzI) => (1, 4),
            (StrayKind::QubitCoupler, StrayGate::ICz) => (0, 3),
        }
    }
}

/// Five-mode chain prepared for `gate`: the gate's coupler tunable, the other one
/// parked at its configured frequency, the gate pair first in the qubit list.
pub fn stray_circuit(chain: &CircuitSpec, gate: StrayGate) -> Result<CircuitSpec> {
    if chain.n_modes() != 5 {
        return Err(Error::Config("the stray study needs the five-mode chain (Q1, C1, Q2, C2, Q3)".into()));
    }
    let mut s = chain.clone();
    let (tunable, qubits) = match gate {
        StrayGate::CzI => (1, vec![0, 2, 4]),
        StrayGate::ICz => (3, vec![2, 4, 0]),
    };
    for (k, m) in s.modes.iter_mut().enumerate() {
        m.tunable = k == tunable;
    }
    s.coupler_index = tunable;
    s.qubit_indices = qubits;
    s.validate()?;
    Ok(s)
}

/// Set the stray element between `pair` to `g` GHz, evaluated at the configured frequencies.
pub fn with_stray(spec: &CircuitSpec, pair: (usize, usize), g: f64) -> CircuitSpec {
    let mut s = spec.clone();
    let (wi, wj) = (spec.modes[pair.0].frequency, spec.modes[pair.1].frequency);
    s.set_rho(pair.0, pair.1, g / (wi * wj).sqrt());
    s
}

#[derive(Clone, Debug)]
pub struct StrayPoint {
    pub gate: StrayGate,
    pub kind: StrayKind,
    /// GHz
    pub strength: f64,
    pub outcome: std::result::Result<GateOutcome, String>,
}

/// Error of `gate` versus the strength of one stray element. `setup` is the
/// stray-free gate; λ is re-optimized at every point.
pub fn stray_sweep(setup: &GateSetup, gate: StrayGate, kind: StrayKind, strengths: &[f64], tg: f64, opts: &OptimizerOptions) -> Vec<StrayPoint> {
    let pair = kind.pair(gate);
    strengths
        .par_iter()
        .map(|&g| {
            let out = setup
                .with_circuit(&with_stray(&setup.spec, pair, g))
                .and_then(|s| run_gate(&s, PulseKind::Awp, tg, 1, &[], opts))
                .map_err(|e| e.to_string());
            StrayPoint { gate, kind, strength: g, outcome: out }
        })
        .collect()
}

fn stray(cfg: &Config) -> Result<Vec<Table>> {
    let chain = cfg.dynamics_circuit()?;
    let tg = cfg.pulse.tg_ns;
    let strengths = axis_ghz_from_mhz(cfg, "stray_mhz", vec![0.0, 0.5, 1.0, 2.0, 4.0, 8.0, 16.0, 32.0, 64.0])?;
    let bound_czi = cfg.pulse.bound()?;
    let mut header = vec!["gate", "stray", "mode_i", "mode_j", "stray_mhz"];
    header.extend(GATE_COLUMNS);
    let mut t = Table::new("stray", &header);
    let mut base = Table::new("stray_baseline", &["circuit", "epg", "leakage", "lambda1", "error"]);
    for gate in [StrayGate::CzI, StrayGate::ICz] {
        let spec = stray_circuit(&chain, gate)?;
        let c = spec.coupler_index;
        let idle = spec.modes[c].frequency;
        let bound = match gate {
            StrayGate::CzI => bound_czi,
            StrayGate::ICz => cfg.job.param_or("bound_icz_ghz", {
                let top = |s: &CircuitSpec| s.modes[s.qubit_indices[0]].frequency.max(s.modes[s.qubit_indices[1]].frequency);
                let czi = stray_circuit(&chain, StrayGate::CzI)?;
                top(&spec) - (top(&czi) - bound_czi)
            }),
        };
        let setup = configured_setup(cfg, &spec, &spec, idle, bound)?;
        for kind in [StrayKind::QubitQubit, StrayKind::QubitCoupler, StrayKind::CouplerCoupler] {
            let (i, j) = kind.pair(gate);
            for p in stray_sweep(&setup, gate, kind, &strengths, tg, &cfg.optimizer) {
                let mut row = vec![gate.name().into(), kind.name().into(), num(i as f64), num(j as f64), num(p.strength * 1e3)];
                row.extend(gate_cells(&p.outcome.map_err(Error::Numerical)));
                t.push(row)?;
            }
        }
        if gate == StrayGate::CzI {
            let sub = three_mode_subcircuit(&spec)?;
            let r = configured_setup(cfg, &sub, &sub, idle, bound)
                .and_then(|s| run_gate(&s, PulseKind::Awp, tg, 1, &[], &cfg.optimizer));
            match r {
                Ok(o) => base.push(vec![
                    "three_mode".into(),
                    num(o.report.epg),
                    num(o.report.total_leakage()),
                    num(o.lambdas[0]),
                    "".into(),
                ])?,
                Err(e) => base.push(vec!["three_mode".into(), num(f64::NAN), num(f64::NAN), num(f64::NAN), e.to_string().into()])?,
            }
        }
    }
    Ok(vec![t, base])
}

/// (Q1, C1, Q2) part of the chain with its couplings.
pub fn three_mode_subcircuit(chain: &CircuitSpec) -> Result<CircuitSpec> {
    let keep = [0usize, 1, 2];
    let modes = keep.iter().map(|&k| chain.modes[k].clone()).collect();
    let couplings = chain
        .couplings
        .iter()
        .filter(|c| keep.contains(&c.pair.0) && keep.contains(&c.pair.1))
        .cloned()
        .collect();
    CircuitSpec::new(modes, couplings, chain.flux_map.clone())
}

// ---------------------------------------------------------------------------
// noise

fn noise_budget(cfg: &Config) -> Result<Vec<Table>> {
    let spec = cfg.dynamics_circuit()?;
    let noise = cfg.noise()?.clone();
    if spec.flux_map.is_none() {
        return Err(Error::Config("the noise study needs a [flux] section".into()));
    }
    let builder = HamiltonianBuilder::new(&spec);
    let idle = cfg.idle()?;
    let bound = cfg.pulse.bound()?;
    let grid = cfg.job.axis_or("omega_c_ghz", linspace(bound, idle, 101))?.values;
    let curves = noise::rate_curves(&builder, &noise, &grid)?;
    let mut rates = Table::new(
        "noise_rates",
        &["omega_c_ghz", "gamma_ss", "gamma_sl", "gamma_phi_100", "gamma_phi_001", "gamma_phi_101", "clamped"],
    );
    let clamped_any = curves.any_clamped();
    for (k, &w) in curves.omega_c.iter().enumerate() {
        rates.push(vec![
            num(w),
            num(curves.gamma_ss[k]),
            num(curves.gamma_sl[k]),
            num(curves.gamma_phi[k][0]),
            num(curves.gamma_phi[k][1]),
            num(curves.gamma_phi[k][2]),
            clamped_any.into(),
        ])?;
    }
    let sota = NoiseSpec {
        t1_us: vec![cfg.job.param_or("sota_t1_us", 1000.0); spec.n_modes()],
        flux_a_uphi0sq: cfg.job.param_or("sota_a_uphi0sq", 1.0),
        sigma_uphi0: cfg.job.param_or("sota_sigma_uphi0", 6.0),
        ..noise.clone()
    };
    let tgs = cfg.job.axis_or("tg_ns", vec![20.0, 24.0, 30.0, 36.0, 40.0, 50.0, 60.0])?.values;
    let setup = configured_setup(cfg, &spec, &spec, idle, bound)?;
    let kind = cfg.pulse.kind()?;
    let rows: Vec<Vec<Cell>> = tgs
        .par_iter()
        .map(|&tg| {
            let r = (|| -> Result<Vec<f64>> {
                let g = run_gate(&setup, kind, tg, cfg.pulse.mmax, &[], &cfg.optimizer)?;
                let now = noise::rb_error(&builder, &noise, &g.pulse)?;
                let best = noise::rb_error(&builder, &sota, &g.pulse)?;
                Ok(vec![
                    now.transition_ss,
                    now.transition_sl,
                    now.transition,
                    now.dephasing,
                    now.total,
                    best.transition,
                    best.dephasing,
                    g.report.epg,
                ])
            })();
            let mut row = vec![num(tg)];
            match r {
                Ok(v) => {
                    row.extend(v.into_iter().map(num));
                    row.push("".into());
                }
                Err(e) => {
                    row.extend(std::iter::repeat_n(num(f64::NAN), 8));
                    row.push(e.to_string().into());
                }
            }
            row
        })
        .collect();
    let mut budget = Table::new(
        "noise_budget",
        &[
            "tg_ns",
            "eps_transition_ss",
            "eps_transition_sl",
            "eps_transition",
            "eps_dephasing",
            "eps_total",
            "eps_transition_projected",
            "eps_dephasing_projected",
            "epg_coherent",
            "error",
        ],
    );
    for r in rows {
        budget.push(r)?;
    }
    let mut phase = Table::new("noise_phase", &["pulse", "noise", "eps_phase", "dc_power_100", "error"]);
    let tg = cfg.pulse.tg_ns;
    let sweet = spec.flux_map.as_ref().map_or(idle, |f| f.omega_max);
    let netzero = configured_setup(cfg, &spec, &spec, sweet, bound);
    for pk in [PulseKind::Awp, PulseKind::Netzero] {
        let s = match pk {
            PulseKind::Netzero => netzero.as_ref().map_err(|e| Error::Numerical(e.to_string())),
            _ => Ok(&setup),
        };
        let pulse = s.and_then(|s| s.calibrated_lambda(pk, tg).and_then(|l| s.pulse(pk, tg, &[l])));
        for nk in [NoiseKind::Quasistatic, NoiseKind::OneOverF] {
            let r = pulse.as_ref().map_err(|e| Error::Numerical(e.to_string())).and_then(|p| noise::phase_covariance(&builder, &noise, p, nk));
            match r {
                Ok(c) => phase.push(vec![
                    kind_name(pk).into(),
                    nk.tag().into(),
                    num(noise::dephasing_from_covariance(&c.matrix)),
                    num(c.dc_power[0]),
                    "".into(),
                ])?,
                Err(e) => phase.push(vec![kind_name(pk).into(), nk.tag().into(), num(f64::NAN), num(f64::NAN), e.to_string().into()])?,
            }
        }
    }
    Ok(vec![rates, budget, phase])
}

// ---------------------------------------------------------------------------
// control schemes

/// A coupler placement and tuning direction.
#[derive(Clone, Debug)]
pub struct Scheme {
    pub name: &'static str,
    pub w2: f64,
    pub rho_qc: f64,
    pub rho_qq: f64,
    pub coupler_above: bool,
    pub tune_up: bool,
}

/// The four schemes with their qubit detunings and coupling signs.
pub fn default_schemes() -> Vec<Scheme> {
    vec![
        Scheme { name: "caq_u", w2: 5.9, rho_qc: 0.03, rho_qq: 0.004, coupler_above: true, tune_up: true },
        Scheme { name: "caq_d", w2: 5.4, rho_qc: 0.03, rho_qq: 0.004, coupler_above: true, tune_up: false },
        Scheme { name: "cbq_u", w2: 5.4, rho_qc: 0.04, rho_qq: -0.004, coupler_above: false, tune_up: true },
        Scheme { name: "cbq_d", w2: 5.9, rho_qc: 0.04, rho_qq: -0.004, coupler_above: false, tune_up: false },
    ]
}

/// Circuit of `scheme` on the anharmonicities and truncation of `base`, plus
/// its idle point (g̃ = 0 on the coupler's side) and sweep range (GHz).
pub fn scheme_circuit(base: &CircuitSpec, scheme: &Scheme) -> Result<(CircuitSpec, f64, (f64, f64))> {
    let (q1, q2, c) = (base.qubit_indices[0], base.qubit_indices[1], base.coupler_index);
    let mut s = base.clone();
    s.modes[q2].frequency = scheme.w2;
    s.set_rho(q1, c, scheme.rho_qc);
    s.set_rho(q2, c, scheme.rho_qc);
    s.set_rho(q1, q2, scheme.rho_qq);
    let w1 = s.modes[q1].frequency;
    let (lo, hi) = (w1.min(scheme.w2), w1.max(scheme.w2));
    let range = if scheme.coupler_above { (hi + 0.1, 12.0) } else { (1.5, lo - 0.1) };
    let bracket = if scheme.coupler_above { (hi + 0.5, 12.0) } else { (1.5, lo - 0.5) };
    let idle = model::zero_coupling_bias(&s, bracket.0, bracket.1)?;
    s.modes[c].frequency = idle;
    s.validate()?;
    Ok((s, idle, range))
}

fn schemes(cfg: &Config) -> Result<Vec<Table>> {
    let base = cfg.circuit()?;
    let points = cfg.job.param_or("points", 300.0) as usize;
    let results: Vec<(Scheme, Result<(f64, ZzCurves)>)> = default_schemes()
        .into_par_iter()
        .map(|sc| {
            let r = scheme_circuit(&base, &sc).and_then(|(s, idle, (lo, hi))| {
                let curves = zz_curves(&s, &linspace(lo, hi, points))?;
                Ok((idle, curves))
            });
            (sc, r)
        })
        .collect();
    let mut curves_t = Table::new(
        "schemes",
        &["scheme", "omega_c_ghz", "zeta_mhz", "abs_zeta_mhz", "d_factor_ns2", "d_divergent", "pulsed_side"],
    );
    let mut idle_t = Table::new("schemes_idle", &["scheme", "idle_ghz", "zeta_idle_khz", "max_abs_zeta_pulsed_mhz", "error"]);
    for (sc, r) in results {
        match r {
            Ok((idle, cv)) => {
                let mut max_pulsed: f64 = 0.0;
                let mut zeta_idle = f64::NAN;
                let mut best = f64::INFINITY;
                for (k, &w) in cv.omega_c.iter().enumerate() {
                    let z = to_mhz(cv.zeta[k]);
                    let pulsed = if sc.tune_up { w >= idle } else { w <= idle };
                    if pulsed {
                        max_pulsed = max_pulsed.max(z.abs());
                    }
                    if (w - idle).abs() < best {
                        best = (w - idle).abs();
                        zeta_idle = z * 1e3;
                    }
                    curves_t.push(vec![
                        sc.name.into(),
                        num(w),
                        num(z),
                        num(z.abs()),
                        num(cv.d_factor[k].value),
                        cv.d_factor[k].divergent.into(),
                        pulsed.into(),
                    ])?;
                }
                idle_t.push(vec![sc.name.into(), num(idle), num(zeta_idle), num(max_pulsed), "".into()])?;
            }
            Err(e) => idle_t.push(vec![sc.name.into(), num(f64::NAN), num(f64::NAN), num(f64::NAN), e.to_string().into()])?,
        }
    }
    Ok(vec![curves_t, idle_t])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::reference_circuit;

    #[test]
    fn unknown_experiment_is_reported() {
        let cfg = Config::parse(
            "[[mode]]\nlabel='Q1'\nfreq_ghz=6.0\nanh_ghz=-0.25\nlevels=3\n[[mode]]\nlabel='C'\nfreq_ghz=7.87\nanh_ghz=-0.3\nlevels=3\ntunable=true\n[[mode]]\nlabel='Q2'\nfreq_ghz=5.4\nanh_ghz=-0.25\nlevels=3\n",
        )
        .unwrap();
        let e = run("fig9", &cfg, RunOptions { seed: 0, workers: 1 }).unwrap_err();
        assert!(matches!(e, Error::UnknownExperiment(_)));
    }

    #[test]
    fn deviation_parsing() {
        let d = Deviation::parse("omega1,+10MHz").unwrap();
        assert_eq!(d.target, DeviationTarget::Frequency(1));
        assert!((d.delta - 0.010).abs() < 1e-15);
        let d = Deviation::parse("rho12,-10%").unwrap();
        assert_eq!(d.target, DeviationTarget::QubitQubit(1, 2));
        assert!((d.delta + 0.1).abs() < 1e-15);
        assert_eq!(Deviation::parse("alphac,-0.01GHz").unwrap().target, DeviationTarget::CouplerAnharmonicity);
        assert_eq!(Deviation::parse("rho2c,0.05").unwrap().delta, 0.05);
        for bad in ["omega1", "omega1,10", "beta1,+1MHz", "rho11,1%", "omega0,+1MHz", "rho1c,+1MHz"] {
            assert!(Deviation::parse(bad).is_err(), "{bad}");
        }
        for d in default_deviations() {
            assert_eq!(Deviation::parse(&d.to_string()).unwrap().target, d.target);
        }
    }

    #[test]
    fn deviation_application() {
        let spec = reference_circuit(3);
        let (s, off) = Deviation::parse("omega2,-10MHz").unwrap().apply(&spec).unwrap();
        assert!((s.modes[2].frequency - 5.39).abs() < 1e-12 && off == 0.0);
        let (s, off) = Deviation::parse("omegac,+10MHz").unwrap().apply(&spec).unwrap();
        assert_eq!(s, spec);
        assert!((off - 0.01).abs() < 1e-15);
        let (s, _) = Deviation::parse("rho1c,+10%").unwrap().apply(&spec).unwrap();
        assert!((s.rho(0, 1) - 0.0198).abs() < 1e-15);
        assert!(Deviation::parse("omega3,+1MHz").unwrap().apply(&spec).is_err());
        assert_eq!(default_deviations().len(), 18);
    }

    #[test]
    fn quadratic_fit_recovers_exact_parabola() {
        let x: Vec<f64> = linspace(-3.0, 2.0, 11);
        let y: Vec<f64> = x.iter().map(|v| -1.5 * v * v + 0.25 * v + 4.0).collect();
        let (c, r2) = fit_quadratic(&x, &y).unwrap();
        assert!((c[0] + 1.5).abs() < 1e-10 && (c[1] - 0.25).abs() < 1e-10 && (c[2] - 4.0).abs() < 1e-10);
        assert!((r2 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn parabola_intersection_inside_overlap() {
        let mk = |a: f64, b: f64, c: f64, lo: f64, hi: f64| ParabolaCurve {
            delta12: 0.0,
            g_eff_mhz: linspace(lo, hi, 5),
            zeta_khz: vec![0.0; 5],
            nu: vec![0.0; 5],
            coeffs: [a, b, c],
            r2: 1.0,
        };
        // (x+1)² − 2 and −(x+1)² − 2 meet only at x = −1
        let p = mk(1.0, 2.0, -1.0, -3.0, 1.0);
        let q = mk(-1.0, -2.0, -3.0, -2.0, 2.0);
        let (x, y) = intersection(&p, &q).unwrap();
        assert!((x + 1.0).abs() < 1e-9 && (y + 2.0).abs() < 1e-9);
        let far = mk(-1.0, -2.0, -3.0, 5.0, 6.0);
        assert!(intersection(&p, &far).is_none());
    }

    #[test]
    fn fixed_coupling_circuit_hits_requested_strengths() {
        let base = reference_circuit(3);
        let s = fixed_coupling_circuit(&base, 5.85, 7.5, 0.12, 0.10, 0.008).unwrap();
        assert!((to_ghz(s.coupling_strength(0, 1, 7.5)) - 0.12).abs() < 1e-12);
        assert!((to_ghz(s.coupling_strength(2, 1, 7.5)) - 0.10).abs() < 1e-12);
        assert!((to_ghz(s.coupling_strength(0, 2, 7.5)) - 0.008).abs() < 1e-12);
    }

    #[test]
    fn stray_pairs_and_circuits() {
        let modes = ["Q1", "C1", "Q2", "C2", "Q3"]
            .iter()
            .zip([6.0, 7.87, 5.4, 8.1, 6.1])
            .map(|(l, f)| ModeSpec::new(l, f, if l.starts_with('C') { -0.3 } else { -0.25 }, 2, *l == "C1"))
            .collect();
        let chain = CircuitSpec::new(modes, vec![CouplingSpec::new(0, 1, 0.018)], None).unwrap().with_qubits(vec![0, 2, 4]).unwrap();
        let a = stray_circuit(&chain, StrayGate::CzI).unwrap();
        assert_eq!((a.coupler_index, a.qubit_indices.clone()), (1, vec![0, 2, 4]));
        let b = stray_circuit(&chain, StrayGate::ICz).unwrap();
        assert_eq!((b.coupler_index, b.qubit_indices.clone()), (3, vec![2, 4, 0]));
        assert!(b.modes[3].tunable && !b.modes[1].tunable);
        let s = with_stray(&a, StrayKind::QubitCoupler.pair(StrayGate::CzI), 0.002);
        assert!((to_ghz(s.coupling_strength(1, 4, 7.87)) - 0.002).abs() < 1e-12);
        assert_eq!(three_mode_subcircuit(&a).unwrap().n_modes(), 3);
    }

    #[test]
    fn scheme_idle_points_sit_on_their_side() {
        let base = reference_circuit(3);
        for sc in default_schemes() {
            let (s, idle, (lo, hi)) = scheme_circuit(&base, &sc).unwrap();
            assert!(idle > lo && idle < hi, "{} idle {idle}", sc.name);
            assert!(model::effective_coupling(&s, idle).unwrap().abs() < 1e-9);
            assert_eq!(sc.coupler_above, idle > 6.0);
        }
    }

    #[test]
    fn zz_curves_include_anchor_lead() {
        let spec = reference_circuit(3);
        let grid = linspace(5.9, 6.3, 5);
        let c = zz_curves(&spec, &grid).unwrap();
        assert_eq!(c.zeta.len(), 5);
        assert_eq!(c.energies[0].len(), c.labels.len());
        let direct = spectrum::zz_strength(&spec, 6.3).unwrap();
        assert!((c.zeta[4] - direct).abs() < 1e-9 * direct.abs().max(1e-6));
    }
}
