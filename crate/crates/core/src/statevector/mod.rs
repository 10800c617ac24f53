//! Exact statevector backend.
//!
//! Basis ordering puts site 0 on the most significant bit of the amplitude index.

mod ed;
mod krylov;

use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use ed::{
    block_ground_energies, block_structure, cached_spectrum, ed_thermal, DiagonalTable, Spectrum, ThermalOracle,
    MAX_DENSE_SITES,
};
pub use krylov::{exact_ite, exact_ite_with, KrylovOptions, KrylovPropagator};

/// Norm tolerance for states handed across module boundaries.
pub const NORM_TOL: f64 = 1e-10;

#[derive(Clone, Debug, PartialEq)]
pub struct Statevector {
    n_sites: usize,
    amps: Vec<Complex64>,
}

impl Statevector {
    pub fn new(n_sites: usize, amps: Vec<Complex64>) -> Result<Statevector> {
        if amps.len() != 1usize << n_sites {
            return Err(Error::DimensionMismatch {
                expected: 1usize << n_sites,
                found: amps.len(),
            });
        }
        Ok(Statevector { n_sites, amps })
    }

    /// Unchecked constructor; panics on a length mismatch.
    pub fn from_raw(n_sites: usize, amps: Vec<Complex64>) -> Statevector {
        assert_eq!(amps.len(), 1usize << n_sites, "amplitude count");
        Statevector { n_sites, amps }
    }

    pub fn basis_state(n_sites: usize, index: usize) -> Statevector {
        let mut amps = vec![Complex64::new(0.0, 0.0); 1usize << n_sites];
        amps[index] = Complex64::new(1.0, 0.0);
        Statevector { n_sites, amps }
    }

    pub fn n_sites(&self) -> usize {
        self.n_sites
    }

    pub fn dim(&self) -> usize {
        self.amps.len()
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amps
    }

    pub fn amplitudes_mut(&mut self) -> &mut [Complex64] {
        &mut self.amps
    }

    pub fn into_amplitudes(self) -> Vec<Complex64> {
        self.amps
    }

    pub fn norm(&self) -> f64 {
        norm(&self.amps)
    }

    pub fn normalized(mut self) -> Result<Statevector> {
        let n = self.norm();
        if !(n.is_finite() && n > 0.0) {
            return Err(Error::NotNormalized { norm: n });
        }
        let inv = 1.0 / n;
        self.amps.iter_mut().for_each(|a| *a *= inv);
        Ok(self)
    }

    pub fn ensure_normalized(&self, tol: f64) -> Result<()> {
        let n = self.norm();
        if (n - 1.0).abs() > tol {
            return Err(Error::NotNormalized { norm: n });
        }
        Ok(())
    }

    /// `<self|other>`.
    pub fn inner(&self, other: &Statevector) -> Result<Complex64> {
        if self.dim() != other.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: other.dim(),
            });
        }
        Ok(inner(&self.amps, &other.amps))
    }

    pub fn probabilities(&self) -> Vec<f64> {
        self.amps.iter().map(|a| a.norm_sqr()).collect()
    }
}

pub(crate) fn inner(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

pub(crate) fn norm(a: &[Complex64]) -> f64 {
    a.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
}

/// `|<a|b>|^2` for normalized states.
pub fn fidelity(a: &Statevector, b: &Statevector) -> Result<f64> {
    a.ensure_normalized(1e-8)?;
    b.ensure_normalized(1e-8)?;
    Ok(a.inner(b)?.norm_sqr().min(1.0))
}

/// Single-site measurement basis.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Basis {
    X,
    Y,
    Z,
}

impl Basis {
    pub const ALL: [Basis; 3] = [Basis::X, Basis::Y, Basis::Z];

    pub fn tag(self) -> char {
        match self {
            Basis::X => 'x',
            Basis::Y => 'y',
            Basis::Z => 'z',
        }
    }

    /// Amplitudes `(a0, a1)` of the eigenstate with the given outcome bit
    /// (0 for the +1 eigenvalue).
    fn eigenstate(self, outcome: u8) -> [Complex64; 2] {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let sign = if outcome == 0 { 1.0 } else { -1.0 };
        match self {
            Basis::Z if outcome == 0 => [Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)],
            Basis::Z => [Complex64::new(0.0, 0.0), Complex64::new(1.0, 0.0)],
            Basis::X => [Complex64::new(s, 0.0), Complex64::new(sign * s, 0.0)],
            Basis::Y => [Complex64::new(s, 0.0), Complex64::new(0.0, sign * s)],
        }
    }
}

impl fmt::Display for Basis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.tag())
    }
}

impl FromStr for Basis {
    type Err = Error;
    fn from_str(s: &str) -> Result<Basis> {
        match s.trim().to_ascii_lowercase().as_str() {
            "x" => Ok(Basis::X),
            "y" => Ok(Basis::Y),
            "z" => Ok(Basis::Z),
            other => Err(Error::UnknownBasis(other.to_string())),
        }
    }
}

/// Tensor product of single-site basis eigenstates.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ClassicalProductState {
    bases: Vec<Basis>,
    outcomes: Vec<u8>,
}

impl ClassicalProductState {
    pub fn new(bases: Vec<Basis>, outcomes: Vec<u8>) -> Result<ClassicalProductState> {
        if bases.is_empty() || bases.len() != outcomes.len() {
            return Err(Error::SizeMismatch {
                left: bases.len(),
                right: outcomes.len(),
            });
        }
        if outcomes.iter().any(|&o| o > 1) {
            return Err(Error::Parse("outcome bits must be 0 or 1".into()));
        }
        Ok(ClassicalProductState { bases, outcomes })
    }

    pub fn uniform(basis: Basis, outcomes: Vec<u8>) -> Result<ClassicalProductState> {
        Self::new(vec![basis; outcomes.len()], outcomes)
    }

    /// z-basis state for a computational basis index.
    pub fn from_z_index(n_sites: usize, index: usize) -> ClassicalProductState {
        let outcomes = (0..n_sites).map(|s| ((index >> (n_sites - 1 - s)) & 1) as u8).collect();
        ClassicalProductState {
            bases: vec![Basis::Z; n_sites],
            outcomes,
        }
    }

    /// Index of the outcome pattern, site 0 most significant.
    pub fn outcome_index(&self) -> usize {
        self.outcomes.iter().fold(0usize, |acc, &o| (acc << 1) | o as usize)
    }

    pub fn random<R: Rng + ?Sized>(basis: Basis, n_sites: usize, rng: &mut R) -> ClassicalProductState {
        let outcomes = (0..n_sites).map(|_| rng.gen_range(0..2u8)).collect();
        ClassicalProductState {
            bases: vec![basis; n_sites],
            outcomes,
        }
    }

    pub fn n_sites(&self) -> usize {
        self.bases.len()
    }

    pub fn bases(&self) -> &[Basis] {
        &self.bases
    }

    pub fn outcomes(&self) -> &[u8] {
        &self.outcomes
    }

    /// The shared basis when every site uses the same one.
    pub fn uniform_basis(&self) -> Option<Basis> {
        let first = self.bases[0];
        self.bases.iter().all(|&b| b == first).then_some(first)
    }

    pub fn label(&self) -> String {
        let bits: String = self.outcomes.iter().map(|o| char::from(b'0' + o)).collect();
        match self.uniform_basis() {
            Some(b) => format!("{b}:{bits}"),
            None => {
                let tags: String = self.bases.iter().map(|b| b.tag()).collect();
                format!("{tags}:{bits}")
            }
        }
    }
}

pub fn cps_to_state(cps: &ClassicalProductState) -> Statevector {
    let n = cps.n_sites();
    let mut amps = vec![Complex64::new(1.0, 0.0)];
    for (basis, &outcome) in cps.bases.iter().zip(&cps.outcomes) {
        let [a0, a1] = basis.eigenstate(outcome);
        let mut next = Vec::with_capacity(amps.len() * 2);
        for a in &amps {
            next.push(a * a0);
            next.push(a * a1);
        }
        amps = next;
    }
    Statevector::from_raw(n, amps)
}

/// Per-site or uniform measurement basis for [`collapse`].
#[derive(Clone, Debug, PartialEq)]
pub enum CollapseBasis {
    Uniform(Basis),
    PerSite(Vec<Basis>),
}

impl CollapseBasis {
    fn resolve(&self, n_sites: usize) -> Result<Vec<Basis>> {
        match self {
            CollapseBasis::Uniform(b) => Ok(vec![*b; n_sites]),
            CollapseBasis::PerSite(v) if v.len() == n_sites => Ok(v.clone()),
            CollapseBasis::PerSite(v) => Err(Error::SizeMismatch {
                left: n_sites,
                right: v.len(),
            }),
        }
    }
}

impl From<Basis> for CollapseBasis {
    fn from(b: Basis) -> Self {
        CollapseBasis::Uniform(b)
    }
}

/// Rotates every site so that z-basis amplitudes equal overlaps with the
/// requested eigenbasis: the amplitude at outcome `k` becomes `<k_basis|psi>`.
fn rotate_to_basis(amps: &mut [Complex64], n_sites: usize, bases: &[Basis]) {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    for (site, basis) in bases.iter().enumerate() {
        if *basis == Basis::Z {
            continue;
        }
        let bit = 1usize << (n_sites - 1 - site);
        // rows are conjugated eigenstates: <0_b| and <1_b|
        let [e0, e1] = [basis.eigenstate(0), basis.eigenstate(1)];
        let m = [[e0[0].conj(), e0[1].conj()], [e1[0].conj(), e1[1].conj()]];
        debug_assert!((m[0][0].norm() - s).abs() < 1e-15);
        for b in 0..amps.len() {
            if b & bit == 0 {
                let (a0, a1) = (amps[b], amps[b | bit]);
                amps[b] = m[0][0] * a0 + m[0][1] * a1;
                amps[b | bit] = m[1][0] * a0 + m[1][1] * a1;
            }
        }
    }
}

/// Born probabilities of every product-state outcome in the given bases.
pub fn outcome_probabilities(state: &Statevector, basis: &CollapseBasis) -> Result<Vec<f64>> {
    let bases = basis.resolve(state.n_sites())?;
    let mut amps = state.amplitudes().to_vec();
    rotate_to_basis(&mut amps, state.n_sites(), &bases);
    Ok(amps.iter().map(|a| a.norm_sqr()).collect())
}

/// Full-register projective measurement. Sites are sampled sequentially from
/// site 0 to site L using conditional marginals, which reproduces the joint
/// Born distribution exactly.
pub fn collapse<R: Rng + ?Sized>(
    state: &Statevector,
    basis: &CollapseBasis,
    rng: &mut R,
) -> Result<(ClassicalProductState, f64)> {
    state.ensure_normalized(1e-8)?;
    let bases = basis.resolve(state.n_sites())?;
    let probs = outcome_probabilities(state, basis)?;
    let n = state.n_sites();
    let (mut lo, mut hi) = (0usize, probs.len());
    let mut outcomes = Vec::with_capacity(n);
    for _ in 0..n {
        let mid = (lo + hi) / 2;
        let p0: f64 = probs[lo..mid].iter().sum();
        let p1: f64 = probs[mid..hi].iter().sum();
        let u: f64 = rng.gen::<f64>() * (p0 + p1);
        if u < p0 {
            outcomes.push(0);
            hi = mid;
        } else {
            outcomes.push(1);
            lo = mid;
        }
    }
    let prob = probs[lo];
    Ok((ClassicalProductState::new(bases, outcomes)?, prob))
}

/// A METTS sample: the normalized evolved state and `log P` with
/// `P = <i| e^{-beta K} |i>`, `beta = 2 tau`.
#[derive(Clone, Debug)]
pub struct MettsRecord {
    pub state: Statevector,
    pub log_p: f64,
    pub source_cps: ClassicalProductState,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pauli::{Pauli, PauliString, PauliSum};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn product_states() {
        let n = 4;
        let z = cps_to_state(&ClassicalProductState::uniform(Basis::Z, vec![0; n]).unwrap());
        assert_eq!(z.amplitudes()[0], Complex64::new(1.0, 0.0));
        assert!(z.amplitudes()[1..].iter().all(|a| a.norm() == 0.0));

        let x = cps_to_state(&ClassicalProductState::uniform(Basis::X, vec![0; n]).unwrap());
        let expected = 2f64.powf(-(n as f64) / 2.0);
        assert!(x
            .amplitudes()
            .iter()
            .all(|a| (a.re - expected).abs() < 1e-15 && a.im == 0.0));

        let y1 = cps_to_state(&ClassicalProductState::uniform(Basis::Y, vec![1]).unwrap());
        let s = std::f64::consts::FRAC_1_SQRT_2;
        assert!((y1.amplitudes()[0] - Complex64::new(s, 0.0)).norm() < 1e-15);
        assert!((y1.amplitudes()[1] - Complex64::new(0.0, -s)).norm() < 1e-15);
        let y_op = PauliSum::from_string(PauliString::single(1, 0, Pauli::Y), 1.0);
        assert!((y_op.expectation(&y1).unwrap() + 1.0).abs() < 1e-15);
    }

    #[test]
    fn cps_eigenvalues_match_outcomes() {
        let n = 3;
        for basis in Basis::ALL {
            let op = match basis {
                Basis::X => Pauli::X,
                Basis::Y => Pauli::Y,
                Basis::Z => Pauli::Z,
            };
            for idx in 0..8 {
                let outcomes: Vec<u8> = (0..n).map(|s| ((idx >> s) & 1) as u8).collect();
                let psi = cps_to_state(&ClassicalProductState::uniform(basis, outcomes.clone()).unwrap());
                for s in 0..n {
                    let e = PauliSum::from_string(PauliString::single(n, s, op), 1.0)
                        .expectation(&psi)
                        .unwrap();
                    let want = if outcomes[s] == 0 { 1.0 } else { -1.0 };
                    assert!((e - want).abs() < 1e-14);
                }
            }
        }
    }

    #[test]
    fn fidelity_examples() {
        let zero = Statevector::basis_state(1, 0);
        let one = Statevector::basis_state(1, 1);
        let plus = cps_to_state(&ClassicalProductState::uniform(Basis::X, vec![0]).unwrap());
        assert!((fidelity(&plus, &plus).unwrap() - 1.0).abs() < 1e-15);
        assert_eq!(fidelity(&zero, &one).unwrap(), 0.0);
        assert!((fidelity(&zero, &plus).unwrap() - 0.5).abs() < 1e-15);
        let two = Statevector::basis_state(2, 0);
        assert!(matches!(fidelity(&zero, &two), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn collapse_of_z_product_state_is_deterministic() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let cps = ClassicalProductState::uniform(Basis::Z, vec![1, 0, 1, 1]).unwrap();
        let psi = cps_to_state(&cps);
        for _ in 0..20 {
            let (out, p) = collapse(&psi, &Basis::Z.into(), &mut rng).unwrap();
            assert_eq!(out, cps);
            assert!((p - 1.0).abs() < 1e-15);
        }
        // same state in its own x basis
        let xcps = ClassicalProductState::uniform(Basis::X, vec![0, 1, 1]).unwrap();
        let (out, p) = collapse(&cps_to_state(&xcps), &Basis::X.into(), &mut rng).unwrap();
        assert_eq!(out, xcps);
        assert!((p - 1.0).abs() < 1e-12);
    }

    #[test]
    fn outcome_probabilities_are_complete() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let n = 3;
        let amps: Vec<Complex64> = (0..8)
            .map(|_| Complex64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5))
            .collect();
        let psi = Statevector::from_raw(n, amps).normalized().unwrap();
        for basis in [
            CollapseBasis::Uniform(Basis::X),
            CollapseBasis::Uniform(Basis::Y),
            CollapseBasis::Uniform(Basis::Z),
            CollapseBasis::PerSite(vec![Basis::Y, Basis::Z, Basis::X]),
        ] {
            let total: f64 = outcome_probabilities(&psi, &basis).unwrap().iter().sum();
            assert!((total - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn collapse_rejects_unnormalized_state() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let psi = Statevector::from_raw(2, vec![Complex64::new(1.0, 0.0); 4]);
        assert!(matches!(
            collapse(&psi, &Basis::Z.into(), &mut rng),
            Err(Error::NotNormalized { .. })
        ));
    }

    #[test]
    fn outcome_index_round_trip() {
        for idx in 0..32 {
            assert_eq!(ClassicalProductState::from_z_index(5, idx).outcome_index(), idx);
        }
    }
}
