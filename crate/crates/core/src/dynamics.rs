// Copyright 2026 czpulse contributors
// SPDX-License-Identifier: Apache-2.0

//! Time evolution along a coupler pulse.
//!
//! The Schrödinger equation is integrated in the Fock basis with a
//! piecewise-constant Hamiltonian sampled at mid-step; each step is applied
//! exactly through the block eigendecomposition. Only the columns that start
//! in the idle computational states are propagated.
//!
//! Gate metrics follow
//!
//! ```text
//! ε = 1 − |Tr(U_target† Z(θ) U_g) / d|²
//! ```
//!
//! minimized over the diagonal single-qubit phase correction Z(θ).

use std::f64::consts::PI;

use nalgebra::{Complex, DMatrix, DVector};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linalg;
use crate::model::HamiltonianBuilder;
use crate::pulse::PulseShape;
use crate::spectrum::{self, computational_labels, AdiabaticLabel};

pub type C64 = Complex<f64>;

/// Largest propagation step (ns).
pub const MAX_DT: f64 = 0.05;
/// Tolerated ‖U†U − I‖_max on the propagated columns.
pub const UNITARITY_TOL: f64 = 1e-8;

/// Dressed computational basis at the idle point.
#[derive(Clone, Debug)]
pub struct IdleBasis {
    pub omega_c: f64,
    pub labels: Vec<AdiabaticLabel>,
    /// dim × d, columns follow `labels`
    pub vectors: DMatrix<f64>,
    /// rad/ns
    pub energies: Vec<f64>,
    /// number of qubits (d = 2^n)
    pub n_qubits: usize,
}

impl IdleBasis {
    pub fn new(builder: &HamiltonianBuilder, omega_c: f64) -> Result<Self> {
        let labels = computational_labels(&builder.spec);
        let path = spectrum::anchored_path(builder, &labels, omega_c, 0.02)?;
        let t = spectrum::track_path(builder, &path, &labels)?;
        Ok(IdleBasis {
            omega_c,
            n_qubits: builder.spec.qubit_indices.len(),
            vectors: t.vectors.last().unwrap().clone(),
            energies: t.energies.last().unwrap().clone(),
            labels,
        })
    }

    pub fn dim(&self) -> usize {
        self.labels.len()
    }
}

/// Complex matrix stored as separate real and imaginary parts.
#[derive(Clone, Debug)]
pub struct SplitMatrix {
    pub re: DMatrix<f64>,
    pub im: DMatrix<f64>,
}

impl SplitMatrix {
    pub fn real(re: DMatrix<f64>) -> Self {
        let im = DMatrix::zeros(re.nrows(), re.ncols());
        SplitMatrix { re, im }
    }

    pub fn to_complex(&self) -> DMatrix<C64> {
        DMatrix::from_fn(self.re.nrows(), self.re.ncols(), |i, j| C64::new(self.re[(i, j)], self.im[(i, j)]))
    }

    /// (A†B) for split A, B.
    pub fn adjoint_mul(&self, other: &SplitMatrix) -> DMatrix<C64> {
        let rr = self.re.transpose() * &other.re + self.im.transpose() * &other.im;
        let ii = self.re.transpose() * &other.im - self.im.transpose() * &other.re;
        DMatrix::from_fn(rr.nrows(), rr.ncols(), |i, j| C64::new(rr[(i, j)], ii[(i, j)]))
    }
}

/// Apply exp(−i H dt) given as block eigendecompositions to the columns of `psi`.
fn apply_step(blocks: &[linalg::Block], psi: &mut SplitMatrix, dt: f64) {
    let d = psi.re.ncols();
    for b in blocks {
        let m = b.indices.len();
        let v = &b.eig.vectors;
        let sub_re = DMatrix::from_fn(m, d, |r, c| psi.re[(b.indices[r], c)]);
        let sub_im = DMatrix::from_fn(m, d, |r, c| psi.im[(b.indices[r], c)]);
        let mut c_re = v.transpose() * sub_re;
        let mut c_im = v.transpose() * sub_im;
        for (k, &e) in b.eig.values.iter().enumerate() {
            let (s, co) = (-e * dt).sin_cos();
            for c in 0..d {
                let (x, y) = (c_re[(k, c)], c_im[(k, c)]);
                c_re[(k, c)] = co * x - s * y;
                c_im[(k, c)] = s * x + co * y;
            }
        }
        let n_re = v * c_re;
        let n_im = v * c_im;
        for r in 0..m {
            for c in 0..d {
                psi.re[(b.indices[r], c)] = n_re[(r, c)];
                psi.im[(b.indices[r], c)] = n_im[(r, c)];
            }
        }
    }
}

/// Step count and step length covering `duration` with steps ≤ `dt_max`.
pub fn step_grid(duration: f64, dt_max: f64) -> (usize, f64) {
    let n = ((duration / dt_max) - 1e-9).ceil().max(1.0) as usize;
    (n, duration / n as f64)
}

/// Propagate the columns of `initial` (dim × k) along `pulse` with steps ≤ `dt_max`.
pub fn propagate_columns(builder: &HamiltonianBuilder, pulse: &PulseShape, initial: SplitMatrix, dt_max: f64) -> Result<SplitMatrix> {
    if !(dt_max > 0.0 && dt_max <= MAX_DT + 1e-12) {
        return Err(Error::Domain(format!("propagation step {dt_max} ns outside (0, {MAX_DT}]")));
    }
    let (lo, hi) = crate::model::OMEGA_C_RANGE;
    if pulse.samples.iter().any(|&w| !(w >= lo && w <= hi)) {
        return Err(Error::Domain("pulse leaves the valid coupler range".into()));
    }
    let (n, dt) = step_grid(pulse.duration(), dt_max);
    let mut psi = initial;
    // eigendecompositions are independent, batch them across threads
    const BATCH: usize = 64;
    let mut k0 = 0;
    while k0 < n {
        let k1 = (k0 + BATCH).min(n);
        let decomps: Vec<Vec<linalg::Block>> =
            (k0..k1).into_par_iter().map(|k| builder.eigh_blocks(pulse.at((k as f64 + 0.5) * dt))).collect();
        for b in &decomps {
            apply_step(b, &mut psi, dt);
        }
        k0 = k1;
    }
    Ok(psi)
}

/// Full propagator (dim × dim) along `pulse`.
pub fn propagate(builder: &HamiltonianBuilder, pulse: &PulseShape, dt_max: f64) -> Result<DMatrix<C64>> {
    let n = builder.dim();
    let u = propagate_columns(builder, pulse, SplitMatrix::real(DMatrix::identity(n, n)), dt_max)?;
    let defect = unitarity_defect(&u);
    if defect > UNITARITY_TOL {
        return Err(Error::Numerical(format!("propagator unitarity defect {defect:.2e}")));
    }
    Ok(u.to_complex())
}

/// max |(U†U − I)_ij| over the propagated columns.
pub fn unitarity_defect(u: &SplitMatrix) -> f64 {
    let g = u.adjoint_mul(u);
    let mut worst = 0.0f64;
    for i in 0..g.nrows() {
        for j in 0..g.ncols() {
            let t = if i == j { 1.0 } else { 0.0 };
            worst = worst.max((g[(i, j)] - C64::new(t, 0.0)).norm());
        }
    }
    worst
}

/// Computational-subspace result of one gate.
#[derive(Clone, Debug)]
pub struct GateReport {
    /// d × d, rows and columns in [`IdleBasis::labels`] order
    pub unitary: DMatrix<C64>,
    /// closed-form virtual-Z phase per qubit (rad)
    pub qubit_phases: Vec<f64>,
    pub phi1: f64,
    pub phi2: f64,
    /// conditional phase of the first two qubits (rad), in (−π, π]
    pub phi_zz: f64,
    /// per column
    pub leakage: Vec<f64>,
    pub unitarity_defect: f64,
    pub epg: f64,
}

impl GateReport {
    pub fn total_leakage(&self) -> f64 {
        self.leakage.iter().sum::<f64>() / self.leakage.len() as f64
    }
}

/// Wrap to (−π, π].
pub fn wrap_phase(x: f64) -> f64 {
    let mut y = x.rem_euclid(2.0 * PI);
    if y > PI {
        y -= 2.0 * PI;
    }
    y
}

fn bit(s: usize, q: usize, n: usize) -> usize {
    (s >> (n - 1 - q)) & 1
}

/// Index of the basis state with only the given qubits excited.
fn state_index(ones: &[usize], n: usize) -> usize {
    ones.iter().map(|&q| 1 << (n - 1 - q)).sum()
}

/// Controlled-phase target diag((−1)^{b_a b_b}) on `n` qubits.
pub fn cz_target(n: usize, pair: (usize, usize)) -> DMatrix<C64> {
    let d = 1 << n;
    DMatrix::from_fn(d, d, |i, j| {
        if i != j {
            C64::new(0.0, 0.0)
        } else if bit(i, pair.0, n) == 1 && bit(i, pair.1, n) == 1 {
            C64::new(-1.0, 0.0)
        } else {
            C64::new(1.0, 0.0)
        }
    })
}

/// Diagonal single-qubit phase correction Z(θ) = diag(exp(i θ·b(s))).
pub fn virtual_z(theta: &[f64]) -> DVector<C64> {
    let n = theta.len();
    DVector::from_fn(1 << n, |s, _| {
        let a: f64 = (0..n).map(|q| theta[q] * bit(s, q, n) as f64).sum();
        C64::from_polar(1.0, a)
    })
}

/// Closed-form phases θ_q = arg U[0,0] − arg U[e_q, e_q].
pub fn closed_form_phases(u: &DMatrix<C64>, n: usize) -> Vec<f64> {
    let a0 = u[(0, 0)].arg();
    (0..n).map(|q| {
        let e = state_index(&[q], n);
        wrap_phase(a0 - u[(e, e)].arg())
    }).collect()
}

/// |Tr(T† Z(θ) U)| / d.
fn overlap(c: &[C64], theta: &[f64]) -> f64 {
    let z = virtual_z(theta);
    let s: C64 = c.iter().zip(z.iter()).map(|(a, b)| a * b).sum();
    s.norm() / c.len() as f64
}

/// EPG of `u` against `target`, minimized over virtual-Z phases.
/// Returns (ε, θ).
pub fn epg(u: &DMatrix<C64>, target: &DMatrix<C64>) -> Result<(f64, Vec<f64>)> {
    let d = u.nrows();
    if u.shape() != target.shape() || !d.is_power_of_two() || d < 2 {
        return Err(Error::Dimension(format!("unitary {:?} vs target {:?}", u.shape(), target.shape())));
    }
    let n = d.trailing_zeros() as usize;
    // Tr(T† Z U) = Σ_s Z_s (U T†)_ss
    let ut = u * target.adjoint();
    let c: Vec<C64> = (0..d).map(|s| ut[(s, s)]).collect();
    let mut theta = closed_form_phases(u, n);
    // the closed form ignores off-diagonal leakage; exact coordinate maximization refines it
    for _ in 0..100 {
        let before = overlap(&c, &theta);
        for q in 0..n {
            let z = virtual_z(&theta);
            let mut a = C64::new(0.0, 0.0);
            let mut b = C64::new(0.0, 0.0);
            for s in 0..d {
                let term = c[s] * z[s];
                if bit(s, q, n) == 1 {
                    b += term * C64::from_polar(1.0, -theta[q]);
                } else {
                    a += term;
                }
            }
            if b.norm() > 0.0 && a.norm() > 0.0 {
                theta[q] = wrap_phase(a.arg() - b.arg());
            }
        }
        if overlap(&c, &theta) - before < 1e-15 {
            break;
        }
    }
    let f = overlap(&c, &theta);
    Ok(((1.0 - f * f).clamp(0.0, 1.0), theta))
}

/// Conditional phase of qubits (a, b), others in 0:
/// φ = −(arg U_11 − arg U_10 − arg U_01 + arg U_00), wrapped to (−π, π].
/// With this sign a constant idle pulse gives φ = ζ T.
pub fn conditional_phase(u: &DMatrix<C64>, n: usize, pair: (usize, usize)) -> f64 {
    let i00 = 0;
    let i10 = state_index(&[pair.0], n);
    let i01 = state_index(&[pair.1], n);
    let i11 = state_index(&[pair.0, pair.1], n);
    let arg = |k: usize| u[(k, k)].arg();
    wrap_phase(-(arg(i11) - arg(i10) - arg(i01) + arg(i00)))
}

/// Project the propagated columns onto the idle basis and compute gate metrics.
pub fn computational_unitary(basis: &IdleBasis, propagated: &SplitMatrix, target: &DMatrix<C64>) -> Result<GateReport> {
    let b = SplitMatrix::real(basis.vectors.clone());
    let u = b.adjoint_mul(propagated);
    let d = u.nrows();
    let leakage = (0..d)
        .map(|c| (1.0 - u.column(c).iter().map(|z| z.norm_sqr()).sum::<f64>()).max(0.0))
        .collect();
    let n = basis.n_qubits;
    let (e, _) = epg(&u, target)?;
    let qubit_phases = closed_form_phases(&u, n);
    Ok(GateReport {
        phi1: qubit_phases[0],
        phi2: qubit_phases[1],
        phi_zz: conditional_phase(&u, n, (0, 1)),
        qubit_phases,
        leakage,
        unitarity_defect: unitarity_defect(propagated),
        epg: e,
        unitary: u,
    })
}

/// Simulate a gate: propagate the idle computational states and report.
pub fn simulate_gate(builder: &HamiltonianBuilder, basis: &IdleBasis, pulse: &PulseShape, target: &DMatrix<C64>, dt_max: f64) -> Result<GateReport> {
    if (pulse.idle_frequency - basis.omega_c).abs() > 1e-9 {
        return Err(Error::Config(format!(
            "pulse idles at {} GHz, basis prepared at {} GHz",
            pulse.idle_frequency, basis.omega_c
        )));
    }
    let psi = propagate_columns(builder, pulse, SplitMatrix::real(basis.vectors.clone()), dt_max)?;
    let defect = unitarity_defect(&psi);
    if defect > UNITARITY_TOL {
        return Err(Error::Numerical(format!("propagator unitarity defect {defect:.2e}")));
    }
    computational_unitary(basis, &psi, target)
}

/// Mean of 1 − |⟨ψ|T† Z U|ψ⟩|² over `states` (d-dimensional, normalized).
pub fn state_averaged_error(u: &DMatrix<C64>, target: &DMatrix<C64>, states: &[DVector<C64>]) -> Result<f64> {
    let (_, theta) = epg(u, target)?;
    let z = virtual_z(&theta);
    let corrected = DMatrix::from_fn(u.nrows(), u.ncols(), |i, j| z[i] * u[(i, j)]);
    let m = target.adjoint() * corrected;
    let mut acc = 0.0;
    for psi in states {
        if psi.len() != u.nrows() {
            return Err(Error::Dimension(format!("state of length {} for a {}-dim gate", psi.len(), u.nrows())));
        }
        let amp = psi.dotc(&(&m * psi));
        acc += 1.0 - amp.norm_sqr();
    }
    Ok(acc / states.len() as f64)
}

/// Jump |target⟩⟨source| between instantaneous adiabatic states with a time-dependent rate (1/ns).
pub struct Jump<'a> {
    pub source: AdiabaticLabel,
    pub target: AdiabaticLabel,
    pub rate: Box<dyn Fn(f64) -> f64 + Sync + 'a>,
}

/// Density-matrix evolution with jumps in the instantaneous adiabatic basis.
///
/// Strang splitting: exact half-step unitary, RK4 dissipator step, exact half step.
pub fn lindblad_propagate(builder: &HamiltonianBuilder, pulse: &PulseShape, jumps: &[Jump], rho0: &DMatrix<C64>, dt_max: f64) -> Result<DMatrix<C64>> {
    let dim = builder.dim();
    if rho0.shape() != (dim, dim) {
        return Err(Error::Dimension(format!("initial state {:?} for dimension {dim}", rho0.shape())));
    }
    let (n, dt) = step_grid(pulse.duration(), dt_max);
    let mids: Vec<f64> = (0..n).map(|k| pulse.at((k as f64 + 0.5) * dt)).collect();
    let mut labels: Vec<AdiabaticLabel> = Vec::new();
    for j in jumps {
        for l in [&j.source, &j.target] {
            if !labels.contains(l) {
                labels.push(l.clone());
            }
        }
    }
    let tracked = if labels.is_empty() {
        None
    } else {
        let mut path = spectrum::anchored_path(builder, &labels, pulse.samples[0], 0.02)?;
        let lead = path.len();
        path.extend(&mids);
        Some((spectrum::track_path(builder, &path, &labels)?, lead))
    };
    let mut rho = rho0.clone();
    let tr0 = rho.trace().re;
    let cplx = |m: &DMatrix<f64>| m.map(|x| C64::new(x, 0.0));
    for k in 0..n {
        let eig = builder.eigh(mids[k]);
        let phase = DVector::from_iterator(dim, eig.values.iter().map(|&e| C64::from_polar(1.0, -e * dt / 2.0)));
        let v = cplx(&eig.vectors);
        let mut w = v.clone();
        for j in 0..dim {
            let p = phase[j];
            for i in 0..dim {
                w[(i, j)] *= p;
            }
        }
        let half = &w * v.adjoint();
        rho = &half * &rho * half.adjoint();
        if let Some((t, lead)) = &tracked {
            let t_mid = (k as f64 + 0.5) * dt;
            let ops: Vec<(f64, DVector<C64>, DVector<C64>)> = jumps
                .iter()
                .map(|j| {
                    let s = t.label_position(&j.source).unwrap();
                    let g = t.label_position(&j.target).unwrap();
                    let vec_s = t.vectors[lead + k].column(s).map(|x| C64::new(x, 0.0));
                    let vec_t = t.vectors[lead + k].column(g).map(|x| C64::new(x, 0.0));
                    ((j.rate)(t_mid).max(0.0), vec_s, vec_t)
                })
                .collect();
            let dissipator = |r: &DMatrix<C64>| -> DMatrix<C64> {
                let mut out = DMatrix::zeros(dim, dim);
                for (g, vs, vt) in &ops {
                    if *g == 0.0 {
                        continue;
                    }
                    let pop = vs.dotc(&(r * vs));
                    out += vt * vt.adjoint() * (pop * *g);
                    let rv = r * vs;
                    let vr = vs.adjoint() * r;
                    out -= (vs * &vr + &rv * vs.adjoint()) * C64::new(0.5 * g, 0.0);
                }
                out
            };
            let c = C64::new(dt, 0.0);
            let k1 = dissipator(&rho);
            let k2 = dissipator(&(&rho + &k1 * (c * 0.5)));
            let k3 = dissipator(&(&rho + &k2 * (c * 0.5)));
            let k4 = dissipator(&(&rho + &k3 * c));
            rho += (k1 + k2 * C64::new(2.0, 0.0) + k3 * C64::new(2.0, 0.0) + k4) * (c / 6.0);
        }
        rho = &half * &rho * half.adjoint();
    }
    let drift = (rho.trace().re - tr0).abs();
    if drift > 1e-6 {
        return Err(Error::Numerical(format!("Lindblad trace drift {drift:.2e}")));
    }
    Ok(rho)
}

/// Smallest eigenvalue of a Hermitian matrix via its real symmetric embedding.
pub fn min_eigenvalue(rho: &DMatrix<C64>) -> f64 {
    let n = rho.nrows();
    let m = DMatrix::from_fn(2 * n, 2 * n, |i, j| {
        let z = rho[(i % n, j % n)];
        match (i < n, j < n) {
            (true, true) | (false, false) => z.re,
            (true, false) => -z.im,
            (false, true) => z.im,
        }
    });
    linalg::eigh(&m).values[0]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{ghz, reference_circuit};
    use crate::pulse::{awp_generate, PathTable};

    fn c(x: f64) -> C64 {
        C64::new(x, 0.0)
    }

    #[test]
    fn epg_closed_forms() {
        let t = cz_target(2, (0, 1));
        assert_eq!(epg(&t, &t).unwrap().0, 0.0);
        let id = DMatrix::<C64>::identity(4, 4);
        assert!((epg(&id, &t).unwrap().0 - 0.75).abs() < 1e-12);
        let mut ph = t.clone();
        ph[(1, 1)] = C64::from_polar(1.0, 0.3);
        ph[(2, 2)] = C64::from_polar(1.0, -1.1);
        ph[(3, 3)] = C64::from_polar(-1.0, 0.3 - 1.1);
        assert!(epg(&ph, &t).unwrap().0 < 1e-14);
        assert!(epg(&DMatrix::<C64>::identity(3, 3), &DMatrix::identity(3, 3)).is_err());
    }

    #[test]
    fn virtual_z_is_minimal_over_scan() {
        // nearly-CZ with small off-diagonal and phase noise
        let mut u = cz_target(2, (0, 1));
        let ph = [0.0, 0.7, -0.4, 0.35];
        for s in 0..4 {
            u[(s, s)] *= C64::from_polar(0.995, ph[s]);
        }
        u[(1, 2)] = c(0.05);
        u[(2, 1)] = c(-0.05);
        let t = cz_target(2, (0, 1));
        let (best, theta) = epg(&u, &t).unwrap();
        let mut scan = f64::INFINITY;
        for i in 0..20 {
            for j in 0..20 {
                let th = [theta[0] - 0.1 + 0.01 * i as f64, theta[1] - 0.1 + 0.01 * j as f64];
                let z = virtual_z(&th);
                let corr = DMatrix::from_fn(4, 4, |a, b| z[a] * u[(a, b)]);
                let tr = (t.adjoint() * corr).trace().norm() / 4.0;
                scan = scan.min(1.0 - tr * tr);
            }
        }
        assert!(best <= scan + 1e-8, "{best} vs {scan}");
    }

    #[test]
    fn conditional_phase_sign() {
        let mut u = DMatrix::<C64>::identity(4, 4);
        u[(3, 3)] = C64::from_polar(1.0, -0.4);
        assert!((conditional_phase(&u, 2, (0, 1)) - 0.4).abs() < 1e-15);
        assert_eq!(wrap_phase(-PI), PI);
    }

    #[test]
    fn zero_hamiltonian_gives_identity() {
        let blocks = linalg::eigh_blocks(&DMatrix::zeros(3, 3), &[vec![0, 2], vec![1]]);
        let mut psi = SplitMatrix::real(DMatrix::identity(3, 3));
        for _ in 0..100 {
            apply_step(&blocks, &mut psi, 0.05);
        }
        assert!((psi.to_complex() - DMatrix::<C64>::identity(3, 3)).iter().all(|z| z.norm() < 1e-15));
    }

    #[test]
    fn constant_idle_pulse_phase_equals_zeta_t() {
        let spec = reference_circuit(4);
        let b = HamiltonianBuilder::new(&spec);
        let basis = IdleBasis::new(&b, 7.0).unwrap();
        let p = PulseShape::constant(7.0, 20.0, 0.05);
        let r = simulate_gate(&b, &basis, &p, &cz_target(2, (0, 1)), 0.05).unwrap();
        let zeta = spectrum::zeta_from(&basis.energies);
        assert!((r.phi_zz - wrap_phase(zeta * 20.0)).abs() < 1e-6);
        assert!(r.leakage.iter().all(|&l| l < 1e-10));
        assert!(r.unitarity_defect < 1e-10);
        // stationary states only pick up phases
        for i in 0..4 {
            assert!((r.unitary[(i, i)].norm() - 1.0).abs() < 1e-10);
            assert!((r.unitary[(i, i)].arg() - wrap_phase(-basis.energies[i] * 20.0)).abs() < 1e-6);
        }
    }

    #[test]
    fn full_propagator_matches_exponential() {
        let spec = reference_circuit(3);
        let b = HamiltonianBuilder::new(&spec);
        let p = PulseShape::constant(6.5, 2.0, 0.05);
        let u = propagate(&b, &p, 0.05).unwrap();
        let e = b.eigh(6.5);
        let n = b.dim();
        let d = DMatrix::from_fn(n, n, |i, j| if i == j { C64::from_polar(1.0, -e.values[i] * 2.0) } else { c(0.0) });
        let v = e.vectors.map(c);
        let exact = &v * d * v.adjoint();
        assert!((u - exact).iter().map(|z| z.norm()).fold(0.0, f64::max) < 1e-10);
        let _ = ghz(1.0);
    }

    #[test]
    fn state_average_of_exact_gate_is_zero() {
        let t = cz_target(2, (0, 1));
        let s = 0.5f64;
        let states = vec![
            DVector::from_vec(vec![c(1.0), c(0.0), c(0.0), c(0.0)]),
            DVector::from_vec(vec![c(s), c(s), c(s), c(s)]),
        ];
        assert!(state_averaged_error(&t, &t, &states).unwrap() < 1e-15);
        let id = DMatrix::<C64>::identity(4, 4);
        assert!(state_averaged_error(&id, &t, &states).unwrap() > 0.1);
    }

    #[test]
    fn lindblad_without_jumps_is_unitary() {
        let spec = reference_circuit(3);
        let b = HamiltonianBuilder::new(&spec);
        let table = PathTable::build(&spec, 7.87, 5.9, 500).unwrap();
        let p = awp_generate(&table, 10.0, &[-3.0], 0.05).unwrap();
        let basis = IdleBasis::new(&b, 7.87).unwrap();
        let psi0 = basis.vectors.column(3).map(c);
        let rho0 = &psi0 * psi0.adjoint();
        let rho = lindblad_propagate(&b, &p, &[], &rho0, 0.05).unwrap();
        let u = propagate(&b, &p, 0.05).unwrap();
        let psi = &u * &psi0;
        let fid = psi.dotc(&(&rho * &psi)).re;
        assert!((fid - 1.0).abs() < 1e-8);
        assert!(min_eigenvalue(&rho) > -1e-8);
    }

    #[test]
    fn lindblad_leakage_of_uniform_state() {
        // constant rate on |11⟩ → |02⟩-like partner at idle: error γτ/4 to first order
        let spec = reference_circuit(3);
        let b = HamiltonianBuilder::new(&spec);
        let basis = IdleBasis::new(&b, 7.87).unwrap();
        let gamma = 1e-4;
        let tau = 30.0;
        let p = PulseShape::constant(7.87, tau, 0.05);
        let jumps = [Jump {
            source: AdiabaticLabel(vec![1, 0, 1]),
            target: AdiabaticLabel(vec![0, 1, 0]),
            rate: Box::new(move |_| gamma),
        }];
        let psi0 = (0..4).fold(DVector::<C64>::zeros(b.dim()), |acc, k| acc + basis.vectors.column(k).map(|x| c(0.5 * x)));
        let rho0 = &psi0 * psi0.adjoint();
        let rho = lindblad_propagate(&b, &p, &jumps, &rho0, 0.05).unwrap();
        let psi = propagate(&b, &p, 0.05).unwrap() * &psi0;
        let err = 1.0 - psi.dotc(&(&rho * &psi)).re;
        let expect = gamma * tau / 4.0;
        assert!(((err - expect) / expect).abs() < 0.05, "{err} vs {expect}");
        assert!((rho.trace().re - 1.0).abs() < 1e-8);
    }
}
