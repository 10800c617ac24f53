//! The Z2 gauge-theory chain in its spin-1/2 form.
//!
//! `L` fermion sites map to `L + 1` spins indexed `0..=L`. Spins 0 and L only
//! carry `Z` (field and boundary kinetic terms); they label the frozen gauge
//! links and are never flipped by `H`.

use std::collections::BTreeSet;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pauli::{Pauli, PauliString, PauliSum};
use crate::statevector::Basis;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    /// Number of fermion sites.
    #[serde(rename = "L")]
    pub l: usize,
    /// Confining field.
    pub h: f64,
    /// Chemical potential.
    pub mu: f64,
}

impl ModelParams {
    pub fn new(l: usize, h: f64, mu: f64) -> Result<ModelParams> {
        let p = ModelParams { l, h, mu };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        validate_length(self.l)?;
        if !self.h.is_finite() || !self.mu.is_finite() {
            return Err(Error::InvalidParams("h and mu must be finite".into()));
        }
        Ok(())
    }

    pub fn n_sites(&self) -> usize {
        self.l + 1
    }

    pub fn with_mu(self, mu: f64) -> ModelParams {
        ModelParams { mu, ..self }
    }
}

fn validate_length(l: usize) -> Result<()> {
    if l < 2 {
        return Err(Error::InvalidParams(format!("L must be at least 2, got {l}")));
    }
    if l + 1 > crate::pauli::MAX_SITES {
        return Err(Error::InvalidParams(format!("L = {l} is too large")));
    }
    Ok(())
}

fn string(n: usize, ops: &[(usize, Pauli)]) -> PauliString {
    PauliString::from_ops(n, ops.iter().copied()).expect("valid sites")
}

/// `H = 1/4 sum_{i=1}^{L-1} (X_i - Z_{i-1} X_i Z_{i+1}) + h sum_{i=0}^{L} Z_i`.
pub fn build_hamiltonian(params: &ModelParams) -> Result<PauliSum> {
    params.validate()?;
    let (l, n) = (params.l, params.n_sites());
    let mut terms = Vec::with_capacity(3 * l);
    for i in 1..l {
        terms.push((0.25, string(n, &[(i, Pauli::X)])));
        terms.push((-0.25, string(n, &[(i - 1, Pauli::Z), (i, Pauli::X), (i + 1, Pauli::Z)])));
    }
    for i in 0..=l {
        terms.push((params.h, string(n, &[(i, Pauli::Z)])));
    }
    PauliSum::from_real_terms(n, terms)
}

/// Domain-wall density on bond `i` (1-based): `n_i = (I - Z_{i-1} Z_i) / 2`.
pub fn site_occupation(l: usize, i: usize) -> Result<PauliSum> {
    validate_length(l)?;
    if i == 0 || i > l {
        return Err(Error::InvalidParams(format!("occupation site {i} outside 1..={l}")));
    }
    let n = l + 1;
    PauliSum::from_real_terms(
        n,
        [
            (0.5, PauliString::identity(n)),
            (-0.5, string(n, &[(i - 1, Pauli::Z), (i, Pauli::Z)])),
        ],
    )
}

/// Total fermion number `N = sum_{i=1}^{L} n_i`, the number of Ising domain walls.
pub fn build_number_operator(l: usize) -> Result<PauliSum> {
    validate_length(l)?;
    let n = l + 1;
    let mut terms = vec![(l as f64 / 2.0, PauliString::identity(n))];
    for i in 1..=l {
        terms.push((-0.5, string(n, &[(i - 1, Pauli::Z), (i, Pauli::Z)])));
    }
    PauliSum::from_real_terms(n, terms)
}

/// `H - mu N`.
pub fn build_grand_canonical(params: &ModelParams) -> Result<PauliSum> {
    let h = build_hamiltonian(params)?;
    let n = build_number_operator(params.l)?;
    h.linear_combination(Complex64::new(1.0, 0.0), &n, Complex64::new(-params.mu, 0.0))
}

/// `X` on every spin.
pub fn global_spin_flip(l: usize) -> PauliString {
    let n = l + 1;
    PauliString::from_ops(n, (0..n).map(|s| (s, Pauli::X))).expect("valid sites")
}

/// Generator pool for a given reference-state basis.
#[derive(Clone, Debug, PartialEq)]
pub struct OperatorPool {
    pub basis: Basis,
    pub generators: Vec<PauliString>,
}

impl OperatorPool {
    pub fn len(&self) -> usize {
        self.generators.len()
    }

    pub fn is_empty(&self) -> bool {
        self.generators.is_empty()
    }
}

/// Deterministic order: weight, then the ascending support sites, then the
/// operator letters read in site order.
fn pool_order_key(p: &PauliString) -> (usize, Vec<usize>, String) {
    let support = p.support();
    let letters = support.iter().map(|&s| p.pauli_at(s).letter()).collect();
    (p.weight(), support, letters)
}

pub fn sort_pool(generators: &mut [PauliString]) {
    generators.sort_by_cached_key(pool_order_key);
}

/// The operator pools `P_z`, `P_x` and `P_y` over spins `0..=L`.
///
/// * z: `{Y_i} ∪ {Y_i Z_j}`, `i != j`
/// * x: `P_z ∪ {Y_i X_j} ∪ {Y_i Z_j X_k}`, indices pairwise distinct
/// * y: `{Z_i, X_i} ∪ {Z_i X_j} ∪ {Z_i Z_j Z_k}` with `i < j < k`
pub fn build_pool(basis: Basis, l: usize) -> Result<OperatorPool> {
    validate_length(l)?;
    let n = l + 1;
    let mut set: BTreeSet<PauliString> = BTreeSet::new();
    let pairs = || (0..n).flat_map(move |i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)));
    match basis {
        Basis::Z | Basis::X => {
            for i in 0..n {
                set.insert(string(n, &[(i, Pauli::Y)]));
            }
            for (i, j) in pairs() {
                set.insert(string(n, &[(i, Pauli::Y), (j, Pauli::Z)]));
            }
            if basis == Basis::X {
                for (i, j) in pairs() {
                    set.insert(string(n, &[(i, Pauli::Y), (j, Pauli::X)]));
                    for k in (0..n).filter(|&k| k != i && k != j) {
                        set.insert(string(n, &[(i, Pauli::Y), (j, Pauli::Z), (k, Pauli::X)]));
                    }
                }
            }
        }
        Basis::Y => {
            for i in 0..n {
                set.insert(string(n, &[(i, Pauli::Z)]));
                set.insert(string(n, &[(i, Pauli::X)]));
            }
            for (i, j) in pairs() {
                set.insert(string(n, &[(i, Pauli::Z), (j, Pauli::X)]));
            }
            for i in 0..n {
                for j in i + 1..n {
                    for k in j + 1..n {
                        set.insert(string(n, &[(i, Pauli::Z), (j, Pauli::Z), (k, Pauli::Z)]));
                    }
                }
            }
        }
    }
    let mut generators: Vec<PauliString> = set.into_iter().collect();
    sort_pool(&mut generators);
    Ok(OperatorPool { basis, generators })
}

/// Fermi function `1 / (1 + e^{x})`, stable for large `|x|`.
fn fermi(x: f64) -> f64 {
    if x > 0.0 {
        let e = (-x).exp();
        e / (1.0 + e)
    } else {
        1.0 / (1.0 + x.exp())
    }
}

/// Single-particle energies of the open chain with hopping 1/2:
/// `cos(m pi / (L + 1))`, `m = 1..=L`.
pub fn free_fermion_levels(l: usize) -> Vec<f64> {
    (1..=l)
        .map(|m| (m as f64 * std::f64::consts::PI / (l as f64 + 1.0)).cos())
        .collect()
}

/// Grand-canonical energy and particle densities of the `h = 0` chain.
pub fn free_fermion_reference(l: usize, beta: f64, mu: f64) -> Result<(f64, f64)> {
    validate_length(l)?;
    if !(beta > 0.0) {
        return Err(Error::InvalidBeta(beta));
    }
    let (mut e, mut n) = (0.0, 0.0);
    for eps in free_fermion_levels(l) {
        let f = fermi(beta * (eps - mu));
        e += eps * f;
        n += f;
    }
    Ok((e / l as f64, n / l as f64))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::statevector::{cps_to_state, ClassicalProductState};

    #[test]
    fn hamiltonian_small_chain() {
        let p = ModelParams::new(2, 0.1, 0.0).unwrap();
        let h = build_hamiltonian(&p).unwrap();
        assert_eq!(h.len(), 5);
        let n = 3;
        let coeff = |label: &str| h.coeff_of(&PauliString::parse(n, label).unwrap()).re;
        assert_eq!(coeff("X1"), 0.25);
        assert_eq!(coeff("Z0 X1 Z2"), -0.25);
        for s in ["Z0", "Z1", "Z2"] {
            assert_eq!(coeff(s), 0.1);
        }
    }

    #[test]
    fn hamiltonian_term_structure() {
        let p = ModelParams::new(12, 0.0, 0.0).unwrap();
        let h = build_hamiltonian(&p).unwrap();
        assert_eq!(h.len(), 22);
        for t in h.terms() {
            assert!(matches!(t.string.weight(), 1 | 3));
            assert_eq!(t.coeff.re.abs(), 0.25);
        }
        let with_field = build_hamiltonian(&ModelParams::new(12, 0.3, 0.0).unwrap()).unwrap();
        assert_eq!(with_field.len(), 22 + 13);
        for t in with_field.terms() {
            for edge in [0, 12] {
                assert!(matches!(t.string.pauli_at(edge), Pauli::I | Pauli::Z));
            }
        }
    }

    #[test]
    fn rejects_short_chains() {
        assert!(ModelParams::new(1, 0.0, 0.0).is_err());
        assert!(build_number_operator(1).is_err());
        assert!(build_pool(Basis::Z, 1).is_err());
    }

    #[test]
    fn number_operator_counts_domain_walls() {
        let l = 3;
        let n_op = build_number_operator(l).unwrap();
        assert_eq!(n_op.len(), l + 1);
        assert_eq!(n_op.normalized_trace().re, l as f64 / 2.0);
        for (bits, walls) in [([0, 0, 0, 0], 0.0), ([0, 1, 0, 1], 3.0), ([0, 0, 1, 1], 1.0)] {
            let cps = ClassicalProductState::uniform(Basis::Z, bits.to_vec()).unwrap();
            let psi = cps_to_state(&cps);
            assert_eq!(n_op.expectation(&psi).unwrap(), walls);
            let applied = n_op.apply(&psi).unwrap();
            let idx = cps.outcome_index();
            assert_eq!(applied.amplitudes()[idx].re, walls);
        }
    }

    #[test]
    fn grand_canonical_generator() {
        let p = ModelParams::new(5, 0.2, 0.0).unwrap();
        assert_eq!(build_grand_canonical(&p).unwrap(), build_hamiltonian(&p).unwrap());

        let p = ModelParams::new(2, 0.0, 1.0).unwrap();
        let k = build_grand_canonical(&p).unwrap();
        assert_eq!(k.normalized_trace().re, -1.0);

        let p = ModelParams::new(6, 0.1, -0.4).unwrap();
        let k = build_grand_canonical(&p).unwrap();
        let direct = build_hamiltonian(&p)
            .unwrap()
            .minus(&build_number_operator(6).unwrap().scaled_real(-0.4))
            .unwrap();
        assert!(k.max_coeff_diff(&direct).unwrap() < 1e-14);
    }

    #[test]
    fn pool_sizes() {
        assert_eq!(build_pool(Basis::Z, 12).unwrap().len(), 169);
        assert_eq!(build_pool(Basis::Y, 12).unwrap().len(), 468);
        assert_eq!(build_pool(Basis::X, 12).unwrap().len(), 2041);
    }

    #[test]
    fn pool_order_is_deterministic_and_duplicate_free() {
        for basis in Basis::ALL {
            let pool = build_pool(basis, 4).unwrap();
            let unique: BTreeSet<_> = pool.generators.iter().collect();
            assert_eq!(unique.len(), pool.len());
            let keys: Vec<_> = pool.generators.iter().map(pool_order_key).collect();
            assert!(keys.windows(2).all(|w| w[0] < w[1]));
            assert!(pool.generators.iter().all(|g| g.n_sites() == 5));
        }
        let z = build_pool(Basis::Z, 3).unwrap();
        let labels: Vec<String> = z.generators.iter().take(6).map(|g| g.label()).collect();
        assert_eq!(labels, ["Y0", "Y1", "Y2", "Y3", "Y0 Z1", "Z0 Y1"]);
    }

    #[test]
    fn commutes_with_number_operator() {
        for l in 2..=6 {
            for h in [0.0, 0.1] {
                let p = ModelParams::new(l, h, 0.0).unwrap();
                let c = build_hamiltonian(&p)
                    .unwrap()
                    .commutator(&build_number_operator(l).unwrap())
                    .unwrap();
                assert!(c.terms().iter().all(|t| t.coeff.norm() < 1e-14), "L = {l}");
            }
        }
    }

    #[test]
    fn zero_field_spin_flip_symmetry() {
        for l in [2, 5, 9] {
            let h = build_hamiltonian(&ModelParams::new(l, 0.0, 0.0).unwrap()).unwrap();
            assert_eq!(h.conjugated_by(&global_spin_flip(l)).unwrap(), h);
            let hf = build_hamiltonian(&ModelParams::new(l, 0.1, 0.0).unwrap()).unwrap();
            assert_ne!(hf.conjugated_by(&global_spin_flip(l)).unwrap(), hf);
        }
    }

    #[test]
    fn free_fermion_limits() {
        for beta in [0.5, 3.0, 40.0] {
            let (_, n) = free_fermion_reference(12, beta, 0.0).unwrap();
            assert!((n - 0.5).abs() < 1e-14);
        }
        let (e, n) = free_fermion_reference(8, 1e-9, 0.3).unwrap();
        assert!((n - 0.5).abs() < 1e-9);
        assert!(e.abs() < 1e-9);
        let (_, n) = free_fermion_reference(12, 400.0, -0.54).unwrap();
        assert!((n - 1.0 / 3.0).abs() < 0.01);
        assert!(free_fermion_reference(4, 0.0, 0.0).is_err());
    }
}
