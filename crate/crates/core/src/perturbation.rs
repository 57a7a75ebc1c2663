// Copyright 2026 czpulse contributors
// SPDX-License-Identifier: Apache-2.0

//! Dispersive-regime ZZ strength from perturbation theory.
//!
//! Two routes:
//!
//! * [`zeta_simplified`], the closed quadratic law in g̃ and
//!   ν = g_1c g_2c / (2 Δ_1c Δ_2c);
//! * [`zeta_fourth_order_generic`], Rayleigh–Schrödinger sums to fourth order
//!   over the truncated bare basis, valid for any circuit.
//!
//! With the bare Hamiltonian diagonal and the coupling V purely off-diagonal,
//! the corrections to a bare level |n⟩ are
//!
//! ```text
//! E1 = 0
//! E2 = ⟨n|V R V|n⟩
//! E3 = ⟨n|V R V R V|n⟩
//! E4 = ⟨n|V R V R V R V|n⟩ − E2 ⟨n|V R² V|n⟩
//! ```
//!
//! with R the reduced resolvent Σ_{k≠n} |k⟩⟨k| / (E_n − E_k).

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::model::{self, ghz, CircuitSpec, HamiltonianBuilder};
use crate::spectrum::pair_labels;

/// Smallest energy denominator (rad/ns) the expansion accepts.
pub const MIN_DENOMINATOR: f64 = 1e-3;
/// Required ratio |Δ_ic| / g_ic.
pub const DISPERSIVE_RATIO: f64 = 3.0;

#[derive(Clone, Debug, PartialEq)]
pub struct PerturbativeResult {
    /// ζ_1..ζ_4 in rad/ns
    pub zeta_orders: [f64; 4],
    pub zeta_total: f64,
    pub nu: f64,
}

/// ν = g_1c g_2c / (2 Δ_1c Δ_2c) for the first two qubits.
pub fn nu(spec: &CircuitSpec, omega_c: f64) -> f64 {
    let (q1, q2, c) = (spec.qubit_indices[0], spec.qubit_indices[1], spec.coupler_index);
    let wc = ghz(omega_c);
    let d1 = ghz(spec.modes[q1].frequency) - wc;
    let d2 = ghz(spec.modes[q2].frequency) - wc;
    spec.coupling_strength(q1, c, omega_c) * spec.coupling_strength(q2, c, omega_c) / (2.0 * d1 * d2)
}

/// Closed-form dispersive ζ (rad/ns). All frequency arguments in rad/ns.
///
/// Uses the general unequal-anharmonicity expression; for α_1 = α_2 it equals
/// `4α/(Δ²−α²) (g̃ − αν)² + 4(2α_c + α)ν²`.
pub fn zeta_simplified(delta12: f64, alpha1: f64, alpha2: f64, alpha_c: f64, g_eff: f64, nu: f64) -> Result<f64> {
    let a = delta12 + alpha1;
    let b = delta12 - alpha2;
    if a.abs() < 1e-4 || b.abs() < 1e-4 {
        return Err(Error::Singular(format!("resonant denominator: Δ12+α1 = {a}, Δ12−α2 = {b}")));
    }
    let den = a * b;
    let first = 2.0
        * ((alpha1 + alpha2) * g_eff * g_eff
            - 2.0 * nu * (2.0 * alpha1 * alpha2 + (alpha1 - alpha2) * delta12) * g_eff)
        / den;
    let second = 2.0 * nu * nu * (4.0 * alpha_c + (alpha1 + alpha2) * delta12 * delta12 / den);
    Ok(first + second)
}

/// Equal-anharmonicity quadratic form of [`zeta_simplified`].
pub fn zeta_quadratic(delta12: f64, alpha_q: f64, alpha_c: f64, g_eff: f64, nu: f64) -> f64 {
    4.0 * alpha_q / (delta12 * delta12 - alpha_q * alpha_q) * (g_eff - alpha_q * nu).powi(2)
        + 4.0 * (2.0 * alpha_c + alpha_q) * nu * nu
}

/// Vertex shared by the equal-anharmonicity parabolas: (α ν, 4(2α_c + α)ν²).
pub fn common_point(alpha_q: f64, alpha_c: f64, nu: f64) -> (f64, f64) {
    (alpha_q * nu, 4.0 * (2.0 * alpha_c + alpha_q) * nu * nu)
}

/// Second-order ζ of two directly coupled transmons (rad/ns), no coupler path.
pub fn zeta2_direct(g12: f64, w1: f64, w2: f64, alpha1: f64, alpha2: f64) -> f64 {
    let d = w1 - w2;
    let s = w1 + w2;
    let g2 = g12 * g12;
    -2.0 * g2 / (d + alpha1) + 2.0 * g2 / (d - alpha2) + 2.0 * g2 / (s + alpha1) + 2.0 * g2 / (s + alpha2)
        - 4.0 * g2 / (s + alpha1 + alpha2)
}

/// Energy corrections E1..E4 of bare state `n`.
fn corrections(h0: &[f64], v: &DMatrix<f64>, n: usize) -> Result<[f64; 4]> {
    let dim = h0.len();
    let resolve = |x: &DVector<f64>| -> Result<DVector<f64>> {
        let mut y = DVector::zeros(dim);
        for k in 0..dim {
            if k == n || x[k] == 0.0 {
                continue;
            }
            let den = h0[n] - h0[k];
            if den.abs() < MIN_DENOMINATOR {
                if x[k].abs() > 1e-14 {
                    return Err(Error::Dispersive(format!(
                        "intermediate state {k} within {:.2e} rad/ns of state {n}",
                        den.abs()
                    )));
                }
                continue;
            }
            y[k] = x[k] / den;
        }
        Ok(y)
    };
    let x1 = v.column(n).into_owned();
    let e1 = x1[n];
    let y1 = resolve(&x1)?;
    let e2 = x1.dot(&y1);
    let x2 = v * &y1;
    let e3 = y1.dot(&x2);
    let z = resolve(&x2)?;
    let e4 = x2.dot(&z) - e2 * y1.dot(&y1);
    Ok([e1, e2, e3, e4])
}

/// Fourth-order ζ of the first two qubits at `omega_c` by explicit perturbation sums.
pub fn zeta_fourth_order_generic(spec: &CircuitSpec, omega_c: f64) -> Result<PerturbativeResult> {
    if spec.qubit_indices.len() < 2 {
        return Err(Error::Config("perturbative ZZ needs two qubits".into()));
    }
    let c = spec.coupler_index;
    for &q in &spec.qubit_indices[..2] {
        let g = spec.coupling_strength(q, c, omega_c).abs();
        let d = (ghz(spec.modes[q].frequency) - ghz(omega_c)).abs();
        if g > 0.0 && d <= DISPERSIVE_RATIO * g {
            return Err(Error::Dispersive(format!(
                "|Δ| = {:.1} MHz not above {DISPERSIVE_RATIO} g = {:.1} MHz for mode {q}",
                model::to_mhz(d),
                model::to_mhz(DISPERSIVE_RATIO * g)
            )));
        }
    }
    let builder = HamiltonianBuilder::new(spec);
    let h = builder.matrix(omega_c);
    let h0: Vec<f64> = (0..h.nrows()).map(|k| h[(k, k)]).collect();
    let mut v = h.clone();
    v.fill_diagonal(0.0);
    let labels = pair_labels(spec, (spec.qubit_indices[0], spec.qubit_indices[1]));
    let mut per_state = Vec::with_capacity(4);
    for l in &labels {
        let n = builder.basis.index_of(&l.0).expect("computational label in basis");
        per_state.push(corrections(&h0, &v, n)?);
    }
    let mut orders = [0.0; 4];
    for (k, o) in orders.iter_mut().enumerate() {
        *o = per_state[3][k] - per_state[2][k] - per_state[1][k] + per_state[0][k];
    }
    Ok(PerturbativeResult { zeta_orders: orders, zeta_total: orders.iter().sum(), nu: nu(spec, omega_c) })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{mhz, reference_circuit};
    use crate::spectrum::zz_strength;

    #[test]
    fn simplified_reduces_to_quadratic_form() {
        let (d, a, ac) = (mhz(600.0), mhz(-250.0), mhz(-300.0));
        for &(g, n) in &[(mhz(0.3), 1.2e-3), (mhz(-1.0), 3e-3), (0.0, 0.0)] {
            let general = zeta_simplified(d, a, a, ac, g, n).unwrap();
            let quad = zeta_quadratic(d, a, ac, g, n);
            assert!((general - quad).abs() < 1e-15, "{general} {quad}");
        }
        assert_eq!(zeta_simplified(d, a, a, ac, 0.0, 0.0).unwrap(), 0.0);
    }

    #[test]
    fn common_point_is_independent_of_detuning() {
        let (a, ac, n) = (mhz(-250.0), mhz(-300.0), 2e-3);
        let (x, y) = common_point(a, ac, n);
        for d in [100.0, 150.0, 400.0, 800.0] {
            let z = zeta_quadratic(mhz(d), a, ac, x, n);
            assert!((z - y).abs() < 1e-15);
        }
        assert!((y - (8.0 * ac + 4.0 * a) * n * n).abs() < 1e-18);
    }

    #[test]
    fn opposite_anharmonicity_kills_quadratic_term() {
        let (d, a) = (mhz(600.0), mhz(-250.0));
        let z1 = zeta_simplified(d, a, -a, mhz(-300.0), mhz(1.0), 0.0).unwrap();
        let z2 = zeta_simplified(d, a, -a, mhz(-300.0), mhz(2.0), 0.0).unwrap();
        assert!(z1.abs() < 1e-15 && z2.abs() < 1e-15);
    }

    #[test]
    fn resonant_denominator_rejected() {
        assert!(zeta_simplified(mhz(250.0), mhz(-250.0), mhz(-250.0), mhz(-300.0), 0.0, 0.0).is_err());
    }

    #[test]
    fn uncoupled_gives_zero() {
        let mut spec = reference_circuit(5);
        for c in &mut spec.couplings {
            c.rho = 0.0;
        }
        let r = zeta_fourth_order_generic(&spec, 7.5).unwrap();
        assert_eq!(r.zeta_total, 0.0);
    }

    #[test]
    fn first_order_vanishes() {
        let spec = reference_circuit(5);
        let r = zeta_fourth_order_generic(&spec, 7.87).unwrap();
        assert_eq!(r.zeta_orders[0], 0.0);
    }

    #[test]
    fn second_order_matches_closed_form() {
        let mut spec = reference_circuit(5);
        spec.set_rho(0, 1, 0.0);
        spec.set_rho(1, 2, 0.0);
        spec.set_rho(0, 2, 0.004);
        let r = zeta_fourth_order_generic(&spec, 7.5).unwrap();
        let g = spec.coupling_strength(0, 2, 7.5);
        let closed = zeta2_direct(g, ghz(6.0), ghz(5.4), ghz(-0.25), ghz(-0.25));
        assert!(((r.zeta_orders[1] - closed) / closed).abs() < 1e-12);
    }

    #[test]
    fn dispersive_guard() {
        let spec = reference_circuit(5);
        assert!(matches!(zeta_fourth_order_generic(&spec, 6.2), Err(Error::Dispersive(_))));
    }

    #[test]
    fn fourth_order_tracks_diagonalization_in_dispersive_regime() {
        let spec = reference_circuit(6);
        for w in [8.0, 8.5] {
            let exact = zz_strength(&spec, w).unwrap();
            let p = zeta_fourth_order_generic(&spec, w).unwrap().zeta_total;
            assert!(((p - exact) / exact).abs() < 0.25, "{w}: {p} vs {exact}");
        }
    }
}
