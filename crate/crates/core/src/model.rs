// Copyright 2026 czpulse contributors
// SPDX-License-Identifier: Apache-2.0

//! Circuit description and truncated Hamiltonian assembly.
//!
//! External frequencies are ordinary frequencies in GHz. Internally everything
//! is angular frequency in rad/ns, so `ω = 2π f`.
//!
//! The Hamiltonian of N coupled anharmonic modes is
//!
//! ```text
//! H = Σ_i ω_i n_i + (α_i/2) a_i† a_i† a_i a_i + Σ_(i,j) g_ij (a_i† + a_i)(a_j† + a_j)
//! g_ij = ρ_ij √(ω_i ω_j)
//! ```
//!
//! with the full exchange-plus-counter-rotating coupling.

use std::f64::consts::{PI, TAU};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;

/// GHz to rad/ns.
pub fn ghz(f: f64) -> f64 {
    TAU * f
}

/// MHz to rad/ns.
pub fn mhz(f: f64) -> f64 {
    TAU * f * 1e-3
}

/// rad/ns to GHz.
pub fn to_ghz(w: f64) -> f64 {
    w / TAU
}

/// rad/ns to MHz.
pub fn to_mhz(w: f64) -> f64 {
    w / TAU * 1e3
}

/// Allowed tunable-mode frequency range in GHz.
pub const OMEGA_C_RANGE: (f64, f64) = (1.0, 20.0);

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModeSpec {
    pub label: String,
    /// GHz
    pub frequency: f64,
    /// GHz, usually negative
    pub anharmonicity: f64,
    pub levels: usize,
    pub tunable: bool,
}

impl ModeSpec {
    pub fn new(label: &str, frequency: f64, anharmonicity: f64, levels: usize, tunable: bool) -> Self {
        ModeSpec { label: label.to_string(), frequency, anharmonicity, levels, tunable }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CouplingSpec {
    pub pair: (usize, usize),
    pub rho: f64,
}

impl CouplingSpec {
    pub fn new(i: usize, j: usize, rho: f64) -> Self {
        CouplingSpec { pair: (i.min(j), i.max(j)), rho }
    }
}

/// Symmetric split-transmon flux dependence of the tunable mode.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FluxMapSpec {
    /// GHz at zero flux
    pub omega_max: f64,
    /// GHz, negative
    pub alpha_c: f64,
}

impl FluxMapSpec {
    fn offset(&self) -> f64 {
        self.alpha_c.abs()
    }

    /// Frequency (GHz) and slope (GHz per flux quantum) at flux `phi` (units of Φ0).
    pub fn frequency(&self, phi: f64) -> Result<(f64, f64)> {
        let c = (PI * phi).cos();
        if c.abs() < 1e-12 {
            return Err(Error::Singular(format!("flux {phi} sits at a half flux quantum")));
        }
        let a = self.omega_max + self.offset();
        let w = a * c.abs().sqrt() - self.offset();
        let dw = -a * PI * (PI * phi).sin() * c.signum() / (2.0 * c.abs().sqrt());
        Ok((w, dw))
    }

    /// Flux in `[0, 0.5)` giving `omega` (GHz).
    pub fn flux_for(&self, omega: f64) -> Result<f64> {
        let a = self.omega_max + self.offset();
        let x = (omega + self.offset()) / a;
        if !(x > 0.0 && x <= 1.0 + 1e-15) {
            return Err(Error::Domain(format!(
                "frequency {omega} GHz unreachable with omega_max {} GHz",
                self.omega_max
            )));
        }
        Ok((x * x).min(1.0).acos() / PI)
    }

    /// Slope dω/dΦ (GHz per Φ0) at the flux bias producing `omega`, on the positive-flux branch.
    pub fn slope_at(&self, omega: f64) -> Result<f64> {
        let phi = self.flux_for(omega)?;
        Ok(self.frequency(phi)?.1)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CircuitSpec {
    pub modes: Vec<ModeSpec>,
    pub couplings: Vec<CouplingSpec>,
    pub qubit_indices: Vec<usize>,
    pub coupler_index: usize,
    pub flux_map: Option<FluxMapSpec>,
}

impl CircuitSpec {
    /// Build and validate. Qubits default to every non-tunable mode.
    pub fn new(modes: Vec<ModeSpec>, couplings: Vec<CouplingSpec>, flux_map: Option<FluxMapSpec>) -> Result<Self> {
        let tunable: Vec<usize> = modes.iter().enumerate().filter(|(_, m)| m.tunable).map(|(i, _)| i).collect();
        if tunable.len() != 1 {
            return Err(Error::Config(format!("expected exactly one tunable mode, found {}", tunable.len())));
        }
        let qubit_indices = (0..modes.len()).filter(|&i| i != tunable[0]).collect();
        let spec = CircuitSpec { modes, couplings, qubit_indices, coupler_index: tunable[0], flux_map };
        spec.validate()?;
        Ok(spec)
    }

    /// Replace the computational-qubit designation.
    pub fn with_qubits(mut self, qubits: Vec<usize>) -> Result<Self> {
        self.qubit_indices = qubits;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.modes.len();
        if n == 0 {
            return Err(Error::Config("circuit has no modes".into()));
        }
        for m in &self.modes {
            if m.levels < 2 {
                return Err(Error::Config(format!("mode {} needs levels >= 2", m.label)));
            }
            if !(m.frequency > 0.0) {
                return Err(Error::Config(format!("mode {} needs a positive frequency", m.label)));
            }
            if !m.anharmonicity.is_finite() {
                return Err(Error::Config(format!("mode {} anharmonicity not finite", m.label)));
            }
        }
        if self.coupler_index >= n || !self.modes[self.coupler_index].tunable {
            return Err(Error::Config("coupler_index must point at the tunable mode".into()));
        }
        if self.modes.iter().filter(|m| m.tunable).count() != 1 {
            return Err(Error::Config("exactly one mode must be tunable".into()));
        }
        let mut seen = std::collections::HashSet::new();
        for c in &self.couplings {
            let (i, j) = c.pair;
            if i >= j || j >= n {
                return Err(Error::Config(format!("coupling pair ({i}, {j}) invalid for {n} modes")));
            }
            if !(c.rho.abs() < 0.1) {
                return Err(Error::Config(format!("|rho| = {} outside the dispersive range", c.rho.abs())));
            }
            if !seen.insert((i, j)) {
                return Err(Error::Config(format!("duplicate coupling ({i}, {j})")));
            }
        }
        // the tunable mode may itself be a qubit (coupler-free designs)
        for (k, &q) in self.qubit_indices.iter().enumerate() {
            if q >= n || self.qubit_indices[..k].contains(&q) {
                return Err(Error::Config(format!("qubit index {q} invalid or repeated")));
            }
        }
        if let Some(f) = &self.flux_map {
            if !(f.omega_max > 0.0) {
                return Err(Error::Config("flux map omega_max must be positive".into()));
            }
        }
        Ok(())
    }

    pub fn n_modes(&self) -> usize {
        self.modes.len()
    }

    /// Copy with every mode truncated to `levels`.
    pub fn with_levels(&self, levels: usize) -> Self {
        let mut s = self.clone();
        for m in &mut s.modes {
            m.levels = levels;
        }
        s
    }

    pub fn rho(&self, i: usize, j: usize) -> f64 {
        let (a, b) = (i.min(j), i.max(j));
        self.couplings.iter().find(|c| c.pair == (a, b)).map_or(0.0, |c| c.rho)
    }

    /// Set (or insert) the coupling coefficient of a pair.
    pub fn set_rho(&mut self, i: usize, j: usize, rho: f64) {
        let (a, b) = (i.min(j), i.max(j));
        match self.couplings.iter_mut().find(|c| c.pair == (a, b)) {
            Some(c) => c.rho = rho,
            None => self.couplings.push(CouplingSpec::new(a, b, rho)),
        }
    }

    /// Mode frequency in GHz, with the tunable mode at `omega_c`.
    pub fn frequency_at(&self, mode: usize, omega_c: f64) -> f64 {
        if mode == self.coupler_index {
            omega_c
        } else {
            self.modes[mode].frequency
        }
    }

    /// Coupling strength g_ij in rad/ns.
    pub fn coupling_strength(&self, i: usize, j: usize, omega_c: f64) -> f64 {
        let wi = ghz(self.frequency_at(i, omega_c));
        let wj = ghz(self.frequency_at(j, omega_c));
        self.rho(i, j) * (wi * wj).sqrt()
    }

    /// Excitation-free occupation tuple with the given modes set to `n`.
    pub fn occupation(&self, excited: &[(usize, usize)]) -> Vec<usize> {
        let mut occ = vec![0; self.n_modes()];
        for &(m, n) in excited {
            occ[m] = n;
        }
        occ
    }
}

/// Product Fock basis in lexicographic order (last mode fastest).
#[derive(Clone, Debug, PartialEq)]
pub struct FockBasis {
    pub levels: Vec<usize>,
    pub occupations: Vec<Vec<usize>>,
}

impl FockBasis {
    pub fn new(levels: &[usize]) -> Self {
        let dim: usize = levels.iter().product();
        let mut occupations = Vec::with_capacity(dim);
        let mut occ = vec![0usize; levels.len()];
        for _ in 0..dim {
            occupations.push(occ.clone());
            for k in (0..levels.len()).rev() {
                occ[k] += 1;
                if occ[k] < levels[k] {
                    break;
                }
                occ[k] = 0;
            }
        }
        FockBasis { levels: levels.to_vec(), occupations }
    }

    pub fn dim(&self) -> usize {
        self.occupations.len()
    }

    pub fn index_of(&self, occ: &[usize]) -> Option<usize> {
        if occ.len() != self.levels.len() {
            return None;
        }
        let mut idx = 0;
        for (n, l) in occ.iter().zip(&self.levels) {
            if n >= l {
                return None;
            }
            idx = idx * l + n;
        }
        Some(idx)
    }
}

pub fn build_basis(spec: &CircuitSpec) -> FockBasis {
    let levels: Vec<usize> = spec.modes.iter().map(|m| m.levels).collect();
    FockBasis::new(&levels)
}

/// Dense Hamiltonian in rad/ns. Real symmetric because the Fock-basis
/// matrix elements of every term are real.
#[derive(Clone, Debug)]
pub struct HamiltonianMatrix {
    pub entries: DMatrix<f64>,
    pub basis: FockBasis,
}

impl HamiltonianMatrix {
    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn hermiticity_defect(&self) -> f64 {
        (&self.entries - self.entries.transpose()).amax()
    }
}

/// Precomputed pieces of H so that evaluating it at a new coupler frequency is cheap.
///
/// `H(ω_c) = H_static + ω_c N_c + √ω_c M_c` with `M_c` holding the coupler
/// couplings divided by `√ω_c`.
#[derive(Clone, Debug)]
pub struct HamiltonianBuilder {
    pub spec: CircuitSpec,
    pub basis: FockBasis,
    h_static: DMatrix<f64>,
    n_coupler: Vec<f64>,
    m_coupler: DMatrix<f64>,
    blocks: Vec<Vec<usize>>,
}

impl HamiltonianBuilder {
    pub fn new(spec: &CircuitSpec) -> Self {
        let basis = build_basis(spec);
        let dim = basis.dim();
        let c = spec.coupler_index;
        let mut h_static = DMatrix::zeros(dim, dim);
        let mut n_coupler = vec![0.0; dim];
        for (k, occ) in basis.occupations.iter().enumerate() {
            let mut e = 0.0;
            for (m, &n) in occ.iter().enumerate() {
                let nf = n as f64;
                let alpha = ghz(spec.modes[m].anharmonicity);
                e += 0.5 * alpha * nf * (nf - 1.0);
                if m != c {
                    e += ghz(spec.modes[m].frequency) * nf;
                }
            }
            h_static[(k, k)] = e;
            n_coupler[k] = occ[c] as f64;
        }
        let mut m_coupler = DMatrix::zeros(dim, dim);
        for cp in &spec.couplings {
            let (i, j) = cp.pair;
            if cp.rho == 0.0 {
                continue;
            }
            let involves_c = i == c || j == c;
            let coef = if involves_c {
                let other = if i == c { j } else { i };
                cp.rho * ghz(spec.modes[other].frequency).sqrt()
            } else {
                cp.rho * (ghz(spec.modes[i].frequency) * ghz(spec.modes[j].frequency)).sqrt()
            };
            let target = if involves_c { &mut m_coupler } else { &mut h_static };
            add_xx(target, &basis, i, j, coef);
        }
        let pattern = DMatrix::from_fn(dim, dim, |r, s| {
            h_static[(r, s)].abs() + m_coupler[(r, s)].abs() + if r == s { 1.0 } else { 0.0 }
        });
        let blocks = linalg::components(&pattern);
        HamiltonianBuilder { spec: spec.clone(), basis, h_static, n_coupler, m_coupler, blocks }
    }

    pub fn dim(&self) -> usize {
        self.basis.dim()
    }

    /// Independent blocks of every H(ω_c) this builder produces.
    pub fn blocks(&self) -> &[Vec<usize>] {
        &self.blocks
    }

    /// H at `omega_c` (GHz), rad/ns, without range checking.
    pub fn matrix(&self, omega_c: f64) -> DMatrix<f64> {
        let w = ghz(omega_c);
        let mut h = &self.h_static + &self.m_coupler * w.sqrt();
        for (k, n) in self.n_coupler.iter().enumerate() {
            h[(k, k)] += w * n;
        }
        h
    }

    /// H at `omega_c` (GHz) with range checking.
    pub fn at(&self, omega_c: f64) -> Result<HamiltonianMatrix> {
        check_omega_c(omega_c)?;
        Ok(HamiltonianMatrix { entries: self.matrix(omega_c), basis: self.basis.clone() })
    }

    /// ∂H/∂ω_c (dimensionless: both in rad/ns).
    pub fn derivative(&self, omega_c: f64) -> DMatrix<f64> {
        let w = ghz(omega_c);
        let mut d = &self.m_coupler * (0.5 / w.sqrt());
        for (k, n) in self.n_coupler.iter().enumerate() {
            d[(k, k)] += n;
        }
        d
    }

    /// Block-wise eigendecomposition of H(ω_c) merged into ascending order.
    pub fn eigh(&self, omega_c: f64) -> linalg::Eigh {
        linalg::eigh_blocked(&self.matrix(omega_c), &self.blocks)
    }

    /// Block-wise eigendecomposition of H(ω_c), blocks kept separate.
    pub fn eigh_blocks(&self, omega_c: f64) -> Vec<linalg::Block> {
        linalg::eigh_blocks(&self.matrix(omega_c), &self.blocks)
    }
}

fn check_omega_c(omega_c: f64) -> Result<()> {
    let (lo, hi) = OMEGA_C_RANGE;
    if !(omega_c >= lo && omega_c <= hi) {
        return Err(Error::Domain(format!("coupler frequency {omega_c} GHz outside [{lo}, {hi}]")));
    }
    Ok(())
}

/// Adds `coef (a_i† + a_i)(a_j† + a_j)` to `h`.
fn add_xx(h: &mut DMatrix<f64>, basis: &FockBasis, i: usize, j: usize, coef: f64) {
    for (col, occ) in basis.occupations.iter().enumerate() {
        for di in [-1i64, 1] {
            let ni = occ[i] as i64 + di;
            if ni < 0 || ni as usize >= basis.levels[i] {
                continue;
            }
            let ai = ((occ[i] as i64).max(ni) as f64).sqrt();
            for dj in [-1i64, 1] {
                let nj = occ[j] as i64 + dj;
                if nj < 0 || nj as usize >= basis.levels[j] {
                    continue;
                }
                let aj = ((occ[j] as i64).max(nj) as f64).sqrt();
                let mut new = occ.clone();
                new[i] = ni as usize;
                new[j] = nj as usize;
                let row = basis.index_of(&new).expect("in range");
                h[(row, col)] += coef * ai * aj;
            }
        }
    }
}

pub fn assemble_hamiltonian(spec: &CircuitSpec, omega_c: f64) -> Result<HamiltonianMatrix> {
    HamiltonianBuilder::new(spec).at(omega_c)
}

/// Qubit-qubit effective exchange coupling g̃ (rad/ns) for the first two qubits.
pub fn effective_coupling(spec: &CircuitSpec, omega_c: f64) -> Result<f64> {
    if spec.qubit_indices.len() < 2 {
        return Err(Error::Config("effective coupling needs two qubits".into()));
    }
    effective_coupling_pair(spec, spec.qubit_indices[0], spec.qubit_indices[1], omega_c)
}

/// g̃ = g_12 + ½ g_1c g_2c (1/Δ_1c + 1/Δ_2c − 1/Σ_1c − 1/Σ_2c) for qubits `q1`, `q2`.
pub fn effective_coupling_pair(spec: &CircuitSpec, q1: usize, q2: usize, omega_c: f64) -> Result<f64> {
    let c = spec.coupler_index;
    let wc = ghz(omega_c);
    let w1 = ghz(spec.modes[q1].frequency);
    let w2 = ghz(spec.modes[q2].frequency);
    let (d1, d2) = (w1 - wc, w2 - wc);
    if d1.abs() < 1e-12 || d2.abs() < 1e-12 {
        return Err(Error::Singular(format!("qubit-coupler degeneracy at {omega_c} GHz")));
    }
    let (s1, s2) = (w1 + wc, w2 + wc);
    let g12 = spec.coupling_strength(q1, q2, omega_c);
    let g1c = spec.coupling_strength(q1, c, omega_c);
    let g2c = spec.coupling_strength(q2, c, omega_c);
    Ok(g12 + 0.5 * g1c * g2c * (1.0 / d1 + 1.0 / d2 - 1.0 / s1 - 1.0 / s2))
}

/// Bisection root of g̃(ω_c) on `[lo, hi]` GHz.
pub fn zero_coupling_bias(spec: &CircuitSpec, lo: f64, hi: f64) -> Result<f64> {
    let f = |w: f64| effective_coupling(spec, w);
    let (mut a, mut b) = (lo, hi);
    let (mut fa, fb) = (f(a)?, f(b)?);
    if fa * fb > 0.0 {
        return Err(Error::Domain(format!("effective coupling keeps its sign on [{lo}, {hi}] GHz")));
    }
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        let fm = f(m)?;
        if fm * fa <= 0.0 {
            b = m;
        } else {
            a = m;
            fa = fm;
        }
        if b - a < 1e-13 {
            break;
        }
    }
    Ok(0.5 * (a + b))
}

/// The three-mode qubit-coupler-qubit circuit used throughout the examples.
///
/// Modes are ordered (Q1, C, Q2). Frequencies and anharmonicities in GHz.
pub fn three_mode(
    w1: f64,
    w2: f64,
    alpha_q: (f64, f64),
    alpha_c: f64,
    rho: (f64, f64, f64),
    levels: usize,
) -> CircuitSpec {
    let modes = vec![
        ModeSpec::new("Q1", w1, alpha_q.0, levels, false),
        ModeSpec::new("C", 7.0, alpha_c, levels, true),
        ModeSpec::new("Q2", w2, alpha_q.1, levels, false),
    ];
    let couplings = vec![
        CouplingSpec::new(0, 1, rho.0),
        CouplingSpec::new(1, 2, rho.1),
        CouplingSpec::new(0, 2, rho.2),
    ];
    CircuitSpec::new(modes, couplings, None).expect("valid three-mode circuit")
}

/// Default three-mode device: 6.0/5.4 GHz qubits, −0.25/−0.30 GHz anharmonicities,
/// ρ = (0.018, 0.018, 0.0015).
pub fn reference_circuit(levels: usize) -> CircuitSpec {
    three_mode(6.0, 5.4, (-0.25, -0.25), -0.30, (0.018, 0.018, 0.0015), levels)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn basis_sizes() {
        assert_eq!(FockBasis::new(&[6, 6, 6]).dim(), 216);
        assert_eq!(FockBasis::new(&[3; 5]).dim(), 243);
        let b = FockBasis::new(&[3]);
        assert_eq!(b.occupations, vec![vec![0], vec![1], vec![2]]);
    }

    #[test]
    fn basis_is_lexicographic() {
        let b = FockBasis::new(&[2, 3]);
        assert_eq!(b.occupations, vec![vec![0, 0], vec![0, 1], vec![0, 2], vec![1, 0], vec![1, 1], vec![1, 2]]);
        for (k, occ) in b.occupations.iter().enumerate() {
            assert_eq!(b.index_of(occ), Some(k));
        }
        assert_eq!(b.index_of(&[2, 0]), None);
    }

    #[test]
    fn single_mode_ladder() {
        let spec = CircuitSpec::new(vec![ModeSpec::new("C", 6.0, -0.25, 3, true)], vec![], None).unwrap();
        let h = assemble_hamiltonian(&spec, 6.0).unwrap();
        let w = ghz(6.0);
        let a = ghz(-0.25);
        let d: Vec<f64> = (0..3).map(|k| h.entries[(k, k)]).collect();
        assert_eq!(d, vec![0.0, w, 2.0 * w + a]);
        let mut off = h.entries.clone();
        off.fill_diagonal(0.0);
        assert_eq!(off.amax(), 0.0);
    }

    #[test]
    fn coupling_strength_value() {
        let spec = reference_circuit(3);
        let g = to_mhz(spec.coupling_strength(0, 1, 7.87));
        let expected = 0.018 * (6.0f64 * 7.87).sqrt() * 1e3;
        assert!((g - expected).abs() < 1e-9);
        assert!((g - 123.7).abs() < 0.1);
    }

    #[test]
    fn coupler_coupling_scales_with_sqrt_frequency() {
        let spec = reference_circuit(3);
        let r = spec.coupling_strength(0, 1, 16.0) / spec.coupling_strength(0, 1, 4.0);
        assert!((r - 2.0).abs() < 1e-14);
    }

    #[test]
    fn effective_coupling_reference_value() {
        let spec = reference_circuit(3);
        let g = to_mhz(effective_coupling(&spec, 7.87).unwrap());
        // independent evaluation in GHz units
        let g1c = 0.018 * (6.0f64 * 7.87).sqrt();
        let g2c = 0.018 * (5.4f64 * 7.87).sqrt();
        let g12 = 0.0015 * (6.0f64 * 5.4).sqrt();
        let oracle = 1e3
            * (g12 + 0.5 * g1c * g2c * (1.0 / (6.0 - 7.87) + 1.0 / (5.4 - 7.87) - 1.0 / 13.87 - 1.0 / 13.27));
        assert!((g - oracle).abs() < 1e-9);
        assert!((g - 0.65).abs() < 0.05);
        let root = zero_coupling_bias(&spec, 7.0, 9.0).unwrap();
        // frozen from an independent bisection of the closed form
        assert!((root - 7.626_535).abs() < 1e-5);
    }

    #[test]
    fn effective_coupling_without_coupler_is_direct() {
        let mut spec = reference_circuit(3);
        spec.set_rho(0, 1, 0.0);
        spec.set_rho(1, 2, 0.0);
        let g = effective_coupling(&spec, 7.0).unwrap();
        assert!((g - spec.coupling_strength(0, 2, 7.0)).abs() < 1e-15);
    }

    #[test]
    fn degenerate_detuning_is_singular() {
        let spec = reference_circuit(3);
        assert!(matches!(effective_coupling(&spec, 6.0), Err(Error::Singular(_))));
    }

    #[test]
    fn out_of_range_coupler_frequency() {
        let spec = reference_circuit(3);
        assert!(assemble_hamiltonian(&spec, 0.5).is_err());
        assert!(assemble_hamiltonian(&spec, 25.0).is_err());
    }

    #[test]
    fn flux_map_round_trip_and_slope() {
        let f = FluxMapSpec { omega_max: 8.2, alpha_c: -0.3 };
        let (w0, d0) = f.frequency(0.0).unwrap();
        assert!((w0 - 8.2).abs() < 1e-15);
        assert_eq!(d0, 0.0);
        let phi = f.flux_for(7.0).unwrap();
        let (w, dw) = f.frequency(phi).unwrap();
        assert!((w - 7.0).abs() < 1e-9);
        let h = 1e-6;
        let fd = (f.frequency(phi + h).unwrap().0 - f.frequency(phi - h).unwrap().0) / (2.0 * h);
        assert!(((dw - fd) / fd).abs() < 1e-6);
        assert!(matches!(f.frequency(0.5), Err(Error::Singular(_))));
    }

    #[test]
    fn validation_rejects_bad_specs() {
        let modes = vec![ModeSpec::new("Q", 5.0, -0.2, 3, false), ModeSpec::new("C", 7.0, -0.3, 3, true)];
        assert!(CircuitSpec::new(modes.clone(), vec![CouplingSpec::new(0, 1, 0.2)], None).is_err());
        assert!(CircuitSpec::new(modes.clone(), vec![CouplingSpec::new(0, 1, 0.01), CouplingSpec::new(1, 0, 0.01)], None).is_err());
        let mut bad = modes.clone();
        bad[0].levels = 1;
        assert!(CircuitSpec::new(bad, vec![], None).is_err());
        let mut two = modes.clone();
        two[0].tunable = true;
        assert!(CircuitSpec::new(two, vec![], None).is_err());
    }

    #[test]
    fn parity_blocks() {
        let b = HamiltonianBuilder::new(&reference_circuit(4));
        assert_eq!(b.blocks().len(), 2);
        assert_eq!(b.blocks()[0].len(), 32);
    }
}
