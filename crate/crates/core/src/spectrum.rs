// Copyright 2026 czpulse contributors
// SPDX-License-Identifier: Apache-2.0

//! Adiabatic spectra over coupler-frequency paths.
//!
//! Adiabatic states are named after the bare Fock state they overlap at a
//! dispersive anchor and followed along a path by maximum-overlap continuation.
//! From the tracked energies we get the ZZ strength
//! `ζ = E_101 − E_100 − E_001 + E_000`, and from the tracked vectors the
//! diabaticity measure
//!
//! ```text
//! D = Σ_{s∈S} Σ_{s'≠s} |⟨s'|∂H/∂ω_c|s⟩| / (ω_s − ω_s')²
//! ```
//!
//! which has units of time squared (ns² internally).

use std::fmt;

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linalg::{self, Eigh};
use crate::model::{self, CircuitSpec, HamiltonianBuilder, HamiltonianMatrix};

/// Overlap a label must have with its bare state at the anchor.
pub const ANCHOR_OVERLAP: f64 = 0.9;
/// Minimum overlap between consecutive tracked vectors before refining.
pub const CONTINUITY_OVERLAP: f64 = 0.5;
/// Maximum bisection depth when refining a tracking step.
pub const MAX_REFINE: usize = 10;
/// Energy gaps below this (rad/ns) are treated as degenerate by the D-factor.
pub const DEGENERACY_GAP: f64 = 1e-6;
/// ns² to s².
pub const NS2_TO_S2: f64 = 1e-18;

/// Adiabatic state named by its dispersive-limit bare partner.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct AdiabaticLabel(pub Vec<usize>);

impl fmt::Display for AdiabaticLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for n in &self.0 {
            write!(f, "{n}")?;
        }
        Ok(())
    }
}

impl AdiabaticLabel {
    pub fn parse(s: &str) -> Option<Self> {
        let occ: Option<Vec<usize>> = s.chars().map(|c| c.to_digit(10).map(|d| d as usize)).collect();
        occ.filter(|o| !o.is_empty()).map(AdiabaticLabel)
    }
}

/// Computational labels: every 0/1 assignment of the qubits, first qubit most significant.
pub fn computational_labels(spec: &CircuitSpec) -> Vec<AdiabaticLabel> {
    let q = &spec.qubit_indices;
    (0..1usize << q.len())
        .map(|bits| {
            let mut occ = vec![0; spec.n_modes()];
            for (k, &m) in q.iter().enumerate() {
                occ[m] = (bits >> (q.len() - 1 - k)) & 1;
            }
            AdiabaticLabel(occ)
        })
        .collect()
}

/// Labels of the computational states of the two qubits at `pair` (spectators in 0).
pub fn pair_labels(spec: &CircuitSpec, pair: (usize, usize)) -> Vec<AdiabaticLabel> {
    [(0, 0), (0, 1), (1, 0), (1, 1)]
        .iter()
        .map(|&(a, b)| AdiabaticLabel(spec.occupation(&[(pair.0, a), (pair.1, b)])))
        .collect()
}

/// Pair labels of the first two qubits followed by every other bare state
/// with at most `max_excitations` quanta, in basis order.
pub fn low_excitation_labels(builder: &HamiltonianBuilder, max_excitations: usize) -> Vec<AdiabaticLabel> {
    let spec = &builder.spec;
    let mut labels = pair_labels(spec, (spec.qubit_indices[0], spec.qubit_indices[1]));
    for occ in &builder.basis.occupations {
        let l = AdiabaticLabel(occ.clone());
        if occ.iter().sum::<usize>() <= max_excitations && !labels.contains(&l) {
            labels.push(l);
        }
    }
    labels
}

/// Ascending eigenpairs of a Hamiltonian, largest component of each vector positive.
pub fn diagonalize(h: &HamiltonianMatrix) -> Result<Eigh> {
    let scale = h.entries.amax().max(1.0);
    if h.hermiticity_defect() > 1e-12 * scale {
        return Err(Error::Numerical("matrix is not Hermitian".into()));
    }
    Ok(linalg::eigh(&h.entries))
}

/// Per-sample result of tracking a label set along a path.
#[derive(Clone, Debug)]
pub struct TrackedPath {
    pub omega_c: Vec<f64>,
    pub labels: Vec<AdiabaticLabel>,
    /// `[sample][label]` eigen-index into the ascending spectrum
    pub index: Vec<Vec<usize>>,
    /// `[sample][label]` energy in rad/ns
    pub energies: Vec<Vec<f64>>,
    /// `[sample]` dim × labels
    pub vectors: Vec<DMatrix<f64>>,
    /// `[sample]` full ascending spectrum, rad/ns
    pub eigenvalues: Vec<Vec<f64>>,
    /// sample used as anchor
    pub anchor: usize,
}

impl TrackedPath {
    pub fn len(&self) -> usize {
        self.omega_c.len()
    }

    pub fn is_empty(&self) -> bool {
        self.omega_c.is_empty()
    }

    pub fn label_position(&self, label: &AdiabaticLabel) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }
}

fn bare_indices(builder: &HamiltonianBuilder, labels: &[AdiabaticLabel]) -> Result<Vec<usize>> {
    labels
        .iter()
        .map(|l| {
            builder
                .basis
                .index_of(&l.0)
                .ok_or_else(|| Error::Config(format!("label {l} outside the truncated basis")))
        })
        .collect()
}

/// Eigen-indices matching each bare state at one sample, with the worst overlap.
/// `None` if two labels land on the same eigenvector.
fn anchor_match(eig: &Eigh, bare: &[usize]) -> Option<(Vec<usize>, f64)> {
    let mut idx = Vec::with_capacity(bare.len());
    let mut worst = f64::INFINITY;
    for &b in bare {
        let row = eig.vectors.row(b);
        let (k, v) = row
            .iter()
            .enumerate()
            .map(|(k, x)| (k, x.abs()))
            .fold((0, -1.0), |acc, x| if x.1 > acc.1 { x } else { acc });
        if idx.contains(&k) {
            return None;
        }
        idx.push(k);
        worst = worst.min(v);
    }
    Some((idx, worst))
}

fn columns(eig: &Eigh, idx: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(eig.vectors.nrows(), idx.len(), |r, c| eig.vectors[(r, idx[c])])
}

/// Maximum-weight one-to-one assignment of rows to columns (rows ≤ cols).
fn assignment(weights: &DMatrix<f64>) -> Vec<usize> {
    // Hungarian algorithm on cost = -weight, potentials formulation.
    let n = weights.nrows();
    let m = weights.ncols();
    let inf = f64::INFINITY;
    let cost = |i: usize, j: usize| -weights[(i - 1, j - 1)];
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; m + 1];
    let mut p = vec![0usize; m + 1];
    let mut way = vec![0usize; m + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0;
        let mut minv = vec![inf; m + 1];
        let mut used = vec![false; m + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = inf;
            let mut j1 = 0;
            for j in 1..=m {
                if !used[j] {
                    let cur = cost(i0, j) - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=m {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut out = vec![0; n];
    for j in 1..=m {
        if p[j] != 0 {
            out[p[j] - 1] = j - 1;
        }
    }
    out
}

enum Match {
    Clean(Vec<usize>),
    Conflict,
    Weak,
}

fn match_columns(prev: &DMatrix<f64>, eig: &Eigh) -> (Match, DMatrix<f64>) {
    let ov = (prev.transpose() * &eig.vectors).map(f64::abs);
    let l = ov.nrows();
    let mut best = Vec::with_capacity(l);
    for r in 0..l {
        let row = ov.row(r);
        let (k, v) = row.iter().enumerate().fold((0, -1.0), |acc, (k, &x)| if x > acc.1 { (k, x) } else { acc });
        if v < CONTINUITY_OVERLAP {
            return (Match::Weak, ov);
        }
        best.push(k);
    }
    // greedy by descending overlap
    let mut order: Vec<usize> = (0..l).collect();
    order.sort_by(|&a, &b| ov[(b, best[b])].total_cmp(&ov[(a, best[a])]));
    let mut taken = std::collections::HashSet::new();
    for &r in &order {
        if !taken.insert(best[r]) {
            return (Match::Conflict, ov);
        }
    }
    (Match::Clean(best), ov)
}

/// Continue tracked columns from `from` to the sample at `to` whose decomposition is `eig`.
fn continue_step(
    builder: &HamiltonianBuilder,
    from: f64,
    prev: &DMatrix<f64>,
    to: f64,
    eig: &Eigh,
    depth: usize,
) -> Result<Vec<usize>> {
    let (m, ov) = match_columns(prev, eig);
    match m {
        Match::Clean(idx) => Ok(idx),
        _ if depth < MAX_REFINE => {
            let mid = 0.5 * (from + to);
            let eig_mid = builder.eigh(mid);
            let idx_mid = continue_step(builder, from, prev, mid, &eig_mid, depth + 1)?;
            let cols_mid = columns(&eig_mid, &idx_mid);
            continue_step(builder, mid, &cols_mid, to, eig, depth + 1)
        }
        Match::Conflict => Ok(assignment(&ov)),
        Match::Weak => Err(Error::Tracking {
            lo: from.min(to),
            hi: from.max(to),
            reason: "overlap below continuity threshold after refinement".into(),
        }),
    }
}

/// Track `labels` along an arbitrary (not necessarily monotone) path of coupler
/// frequencies. The anchor is the sample where every label's bare overlap is
/// largest (and above [`ANCHOR_OVERLAP`]).
pub fn track_path(builder: &HamiltonianBuilder, path: &[f64], labels: &[AdiabaticLabel]) -> Result<TrackedPath> {
    for &w in path {
        let (lo, hi) = model::OMEGA_C_RANGE;
        if !(w >= lo && w <= hi) {
            return Err(Error::Domain(format!("coupler frequency {w} GHz outside [{lo}, {hi}]")));
        }
    }
    let bare = bare_indices(builder, labels)?;
    let eigs: Vec<Eigh> = path.par_iter().map(|&w| builder.eigh(w)).collect();
    let mut anchor: Option<(usize, Vec<usize>, f64)> = None;
    for (k, e) in eigs.iter().enumerate() {
        if let Some((idx, worst)) = anchor_match(e, &bare) {
            if worst > ANCHOR_OVERLAP && anchor.as_ref().is_none_or(|a| worst > a.2) {
                anchor = Some((k, idx, worst));
            }
        }
    }
    let (a, idx_a, _) = anchor.ok_or_else(|| {
        Error::Anchor(format!("no sample where all {} labels overlap their bare states by > {ANCHOR_OVERLAP}", labels.len()))
    })?;
    let n = path.len();
    let mut index = vec![Vec::new(); n];
    let mut vectors = vec![DMatrix::zeros(0, 0); n];
    index[a] = idx_a.clone();
    vectors[a] = columns(&eigs[a], &idx_a);
    for k in (a + 1)..n {
        let idx = continue_step(builder, path[k - 1], &vectors[k - 1], path[k], &eigs[k], 0)?;
        vectors[k] = columns(&eigs[k], &idx);
        index[k] = idx;
    }
    for k in (0..a).rev() {
        let idx = continue_step(builder, path[k + 1], &vectors[k + 1], path[k], &eigs[k], 0)?;
        vectors[k] = columns(&eigs[k], &idx);
        index[k] = idx;
    }
    let energies = index
        .iter()
        .zip(&eigs)
        .map(|(idx, e)| idx.iter().map(|&i| e.values[i]).collect())
        .collect();
    Ok(TrackedPath {
        omega_c: path.to_vec(),
        labels: labels.to_vec(),
        index,
        energies,
        vectors,
        eigenvalues: eigs.into_iter().map(|e| e.values).collect(),
        anchor: a,
    })
}

/// Frequency at which the given labels are dispersive, on the side of `omega_c`.
pub fn dispersive_anchor(builder: &HamiltonianBuilder, labels: &[AdiabaticLabel], omega_c: f64) -> Result<f64> {
    let spec = &builder.spec;
    let bare = bare_indices(builder, labels)?;
    let others: Vec<f64> =
        (0..spec.n_modes()).filter(|&m| m != spec.coupler_index).map(|m| spec.modes[m].frequency).collect();
    let top = others.iter().cloned().fold(f64::MIN, f64::max);
    let bottom = others.iter().cloned().fold(f64::MAX, f64::min);
    let mid = 0.5 * (top + bottom);
    let candidates: Vec<f64> = if omega_c >= mid {
        (0..24).map(|k| top + 1.0 + 0.5 * k as f64).filter(|&w| w <= model::OMEGA_C_RANGE.1).collect()
    } else {
        (0..24).map(|k| bottom - 1.0 - 0.25 * k as f64).filter(|&w| w >= 1.5).collect()
    };
    for w in candidates {
        if let Some((_, worst)) = anchor_match(&builder.eigh(w), &bare) {
            if worst > ANCHOR_OVERLAP {
                return Ok(w);
            }
        }
    }
    Err(Error::Anchor(format!("no dispersive anchor found for coupler frequency {omega_c} GHz")))
}

/// Path from a dispersive anchor to `omega_c` with spacing at most `step` GHz.
pub fn anchored_path(builder: &HamiltonianBuilder, labels: &[AdiabaticLabel], omega_c: f64, step: f64) -> Result<Vec<f64>> {
    let bare = bare_indices(builder, labels)?;
    if let Some((_, worst)) = anchor_match(&builder.eigh(omega_c), &bare) {
        if worst > ANCHOR_OVERLAP {
            return Ok(vec![omega_c]);
        }
    }
    let w0 = dispersive_anchor(builder, labels, omega_c)?;
    let n = ((w0 - omega_c).abs() / step).ceil().max(1.0) as usize;
    Ok((0..=n).map(|k| w0 + (omega_c - w0) * k as f64 / n as f64).collect())
}

/// ZZ strength from the four pair energies ordered (00, 01, 10, 11).
pub fn zeta_from(e: &[f64]) -> f64 {
    e[3] - e[2] - e[1] + e[0]
}

/// ζ (rad/ns) of the first two qubits at `omega_c`.
pub fn zz_strength(spec: &CircuitSpec, omega_c: f64) -> Result<f64> {
    if spec.qubit_indices.len() < 2 {
        return Err(Error::Config("ZZ strength needs two qubits".into()));
    }
    let builder = HamiltonianBuilder::new(spec);
    zz_strength_with(&builder, (spec.qubit_indices[0], spec.qubit_indices[1]), omega_c)
}

/// ζ (rad/ns) of a qubit pair using a prepared builder.
pub fn zz_strength_with(builder: &HamiltonianBuilder, pair: (usize, usize), omega_c: f64) -> Result<f64> {
    let labels = pair_labels(&builder.spec, pair);
    let path = anchored_path(builder, &labels, omega_c, 0.02)?;
    let t = track_path(builder, &path, &labels)?;
    Ok(zeta_from(t.energies.last().expect("non-empty path")))
}

/// Coupler bias in `[lo, hi]` minimizing |ζ|, by golden-section search to `tol` GHz.
/// Assumes a single minimum inside the bracket.
pub fn minimal_zz_bias(spec: &CircuitSpec, lo: f64, hi: f64, tol: f64) -> Result<(f64, f64)> {
    if !(hi > lo) {
        return Err(Error::Domain(format!("empty bracket [{lo}, {hi}]")));
    }
    let builder = HamiltonianBuilder::new(spec);
    let pair = (spec.qubit_indices[0], spec.qubit_indices[1]);
    let f = |w: f64| zz_strength_with(&builder, pair, w).map(f64::abs);
    let r = 0.5 * (5f64.sqrt() - 1.0);
    let (mut a, mut b) = (lo, hi);
    let mut c = b - r * (b - a);
    let mut d = a + r * (b - a);
    let (mut fc, mut fd) = (f(c)?, f(d)?);
    while b - a > tol {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - r * (b - a);
            fc = f(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + r * (b - a);
            fd = f(d)?;
        }
    }
    let w = 0.5 * (a + b);
    Ok((w, zz_strength_with(&builder, pair, w)?))
}

/// D-factor at one sample.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DFactor {
    /// ns²
    pub value: f64,
    /// a nonzero matrix element met a near-degenerate partner and was skipped
    pub divergent: bool,
}

/// D-factor of the eigen-indices `states` of `eig`, the decomposition of H(omega_c).
pub fn d_factor_from(builder: &HamiltonianBuilder, eig: &Eigh, states: &[usize], omega_c: f64) -> DFactor {
    let dh = builder.derivative(omega_c);
    let mut value = 0.0;
    let mut divergent = false;
    for &s in states {
        let col = eig.vectors.column(s);
        let dv = &dh * col;
        let elems = eig.vectors.transpose() * dv;
        for (sp, &m) in elems.iter().enumerate() {
            if sp == s {
                continue;
            }
            let gap = eig.values[s] - eig.values[sp];
            if gap.abs() < DEGENERACY_GAP {
                if m.abs() > 1e-12 {
                    divergent = true;
                }
                continue;
            }
            value += m.abs() / (gap * gap);
        }
    }
    DFactor { value, divergent }
}

/// D-factor (ns²) of the computational states of the first two qubits at `omega_c`.
pub fn d_factor(spec: &CircuitSpec, omega_c: f64) -> Result<DFactor> {
    let builder = HamiltonianBuilder::new(spec);
    let labels = pair_labels(spec, (spec.qubit_indices[0], spec.qubit_indices[1]));
    let path = anchored_path(&builder, &labels, omega_c, 0.02)?;
    let t = track_path(&builder, &path, &labels)?;
    let eig = builder.eigh(omega_c);
    Ok(d_factor_from(&builder, &eig, t.index.last().unwrap(), omega_c))
}

/// D* = max of D between `omega_c` and `omega_idle` over `points` (≥ 200) samples.
pub fn d_star(spec: &CircuitSpec, omega_c: f64, omega_idle: f64, points: usize) -> Result<DFactor> {
    let curve = d_star_curve(spec, omega_idle, omega_c, points.max(200))?;
    Ok(*curve.last().unwrap())
}

/// Running maximum of D along the uniform path from `omega_idle` to `omega_end`.
pub fn d_star_curve(spec: &CircuitSpec, omega_idle: f64, omega_end: f64, points: usize) -> Result<Vec<DFactor>> {
    let builder = HamiltonianBuilder::new(spec);
    let labels = pair_labels(spec, (spec.qubit_indices[0], spec.qubit_indices[1]));
    let n = points.max(2);
    let mut path = anchored_path(&builder, &labels, omega_idle, 0.02)?;
    let lead = path.len() - 1;
    path.extend((1..n).map(|k| omega_idle + (omega_end - omega_idle) * k as f64 / (n - 1) as f64));
    let t = track_path(&builder, &path, &labels)?;
    let d: Vec<DFactor> = (lead..path.len())
        .into_par_iter()
        .map(|k| {
            let eig = builder.eigh(path[k]);
            d_factor_from(&builder, &eig, &t.index[k], path[k])
        })
        .collect();
    let mut best = DFactor { value: 0.0, divergent: false };
    Ok(d
        .into_iter()
        .map(|x| {
            best.value = best.value.max(x.value);
            best.divergent |= x.divergent;
            best
        })
        .collect())
}

/// Tracked spectrum with ZZ strength, effective coupling and D-factor per sample.
#[derive(Clone, Debug)]
pub struct SpectrumGrid {
    pub omega_c_samples: Vec<f64>,
    pub eigenvalues: Vec<Vec<f64>>,
    pub tracked_vectors: Vec<DMatrix<f64>>,
    pub tracked_energies: Vec<Vec<f64>>,
    pub labels: Vec<AdiabaticLabel>,
    /// rad/ns
    pub zeta: Vec<f64>,
    /// rad/ns, `None` where the closed form is singular
    pub g_eff: Vec<Option<f64>>,
    pub d_factor: Vec<DFactor>,
}

/// Track `labels` over an ascending grid. The four pair labels of the first two
/// qubits are always tracked (added if missing) so that ζ and D are available.
pub fn track_adiabatic(spec: &CircuitSpec, grid: &[f64], labels: &[AdiabaticLabel]) -> Result<SpectrumGrid> {
    if grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::Domain("grid must be strictly ascending".into()));
    }
    let builder = HamiltonianBuilder::new(spec);
    let pair = (spec.qubit_indices[0], spec.qubit_indices[1]);
    let mut all = pair_labels(spec, pair);
    for l in labels {
        if !all.contains(l) {
            all.push(l.clone());
        }
    }
    let t = track_path(&builder, grid, &all)?;
    let d_factor = grid
        .par_iter()
        .enumerate()
        .map(|(k, &w)| {
            let eig = builder.eigh(w);
            d_factor_from(&builder, &eig, &t.index[k][..4], w)
        })
        .collect();
    let zeta = t.energies.iter().map(|e| zeta_from(&e[..4])).collect();
    let g_eff = grid.iter().map(|&w| model::effective_coupling(spec, w).ok()).collect();
    Ok(SpectrumGrid {
        omega_c_samples: grid.to_vec(),
        eigenvalues: t.eigenvalues,
        tracked_vectors: t.vectors,
        tracked_energies: t.energies,
        labels: all,
        zeta,
        g_eff,
        d_factor,
    })
}

/// Uniform grid of `n` points on `[lo, hi]`.
pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    (0..n).map(|k| lo + (hi - lo) * k as f64 / (n - 1) as f64).collect()
}
