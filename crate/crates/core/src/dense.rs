//! Dense reference matrices built from explicit Kronecker products.
//!
//! Slow and independent of the bit-mask machinery in [`crate::pauli`];
//! intended for cross-checks on small systems.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::pauli::{Pauli, PauliString, PauliSum};

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

pub fn single_site(p: Pauli) -> DMatrix<Complex64> {
    let z = c(0.0, 0.0);
    let one = c(1.0, 0.0);
    let i = c(0.0, 1.0);
    match p {
        Pauli::I => DMatrix::from_row_slice(2, 2, &[one, z, z, one]),
        Pauli::X => DMatrix::from_row_slice(2, 2, &[z, one, one, z]),
        Pauli::Y => DMatrix::from_row_slice(2, 2, &[z, -i, i, z]),
        Pauli::Z => DMatrix::from_row_slice(2, 2, &[one, z, z, -one]),
    }
}

/// Site 0 is the leftmost (most significant) tensor factor.
pub fn string_matrix(p: &PauliString) -> DMatrix<Complex64> {
    let mut m = DMatrix::from_element(1, 1, c(1.0, 0.0));
    for s in 0..p.n_sites() {
        m = m.kronecker(&single_site(p.pauli_at(s)));
    }
    m
}

pub fn sum_matrix(op: &PauliSum) -> DMatrix<Complex64> {
    let d = op.dim();
    let mut m = DMatrix::zeros(d, d);
    for t in op.terms() {
        m += string_matrix(&t.string) * t.coeff;
    }
    m
}

/// `f(A)` for Hermitian `A` through its eigendecomposition.
pub fn hermitian_function(a: &DMatrix<Complex64>, f: impl Fn(f64) -> f64) -> DMatrix<Complex64> {
    let eig = a.clone().symmetric_eigen();
    let q = &eig.eigenvectors;
    let diag = DMatrix::from_diagonal(&DVector::from_iterator(
        a.nrows(),
        eig.eigenvalues.iter().map(|&e| c(f(e), 0.0)),
    ));
    q * diag * q.adjoint()
}

pub fn eigenvalues(a: &DMatrix<Complex64>) -> Vec<f64> {
    let mut e: Vec<f64> = a.clone().symmetric_eigen().eigenvalues.iter().copied().collect();
    e.sort_by(f64::total_cmp);
    e
}

/// `Tr[O e^{-beta K}] / Tr[e^{-beta K}]`.
pub fn thermal_average(obs: &PauliSum, generator: &PauliSum, beta: f64) -> f64 {
    let k = sum_matrix(generator);
    let e0 = eigenvalues(&k)[0];
    let rho = hermitian_function(&k, |e| (-beta * (e - e0)).exp());
    let o = sum_matrix(obs);
    ((&o * &rho).trace() / rho.trace()).re
}

pub fn apply(a: &DMatrix<Complex64>, v: &[Complex64]) -> Vec<Complex64> {
    let out = a * DVector::from_column_slice(v);
    out.iter().copied().collect()
}
