//! Imaginary-time propagation `e^{-tau K} v` by Lanczos projection.
//!
//! Each substep builds an orthonormal Krylov basis with full
//! reorthogonalization, exponentiates the tridiagonal projection on a
//! spectrum shifted by its lowest Ritz value, and accepts the largest step
//! whose a-posteriori residual `beta_m |e_m^T y|` stays below tolerance.
//! The log-norm is accumulated across substeps so large `tau` never
//! under- or overflows.

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;

use super::{cps_to_state, inner, norm, ClassicalProductState, MettsRecord, Statevector};
use crate::error::{Error, Result};
use crate::pauli::{PauliOperator, PauliSum};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct KrylovOptions {
    /// Maximum Krylov subspace dimension per substep.
    pub max_dim: usize,
    /// Residual tolerance for one substep, relative to the propagated norm.
    pub tol: f64,
    pub max_substeps: usize,
}

impl Default for KrylovOptions {
    fn default() -> Self {
        KrylovOptions {
            max_dim: 30,
            tol: 1e-12,
            max_substeps: 100_000,
        }
    }
}

pub struct KrylovPropagator {
    op: PauliOperator,
    opts: KrylovOptions,
}

impl KrylovPropagator {
    pub fn new(generator: &PauliSum, opts: KrylovOptions) -> Result<KrylovPropagator> {
        generator.ensure_hermitian()?;
        Ok(KrylovPropagator {
            op: generator.compile(),
            opts,
        })
    }

    pub fn operator(&self) -> &PauliOperator {
        &self.op
    }

    /// Replaces `v` (normalized on return) by `e^{-tau K} v / ||.||` and
    /// returns `log ||e^{-tau K} v||^2` relative to the input norm.
    pub fn propagate(&self, v: &mut Vec<Complex64>, tau: f64) -> Result<f64> {
        if tau < 0.0 || !tau.is_finite() {
            return Err(Error::NegativeTime(tau));
        }
        if v.len() != self.op.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.op.dim(),
                found: v.len(),
            });
        }
        let n0 = norm(v);
        if n0 == 0.0 {
            return Err(Error::Krylov("zero input vector".into()));
        }
        v.iter_mut().for_each(|a| *a /= n0);
        let mut log_norm_sq = 0.0;
        let mut remaining = tau;
        let mut substeps = 0;
        while remaining > 0.0 {
            substeps += 1;
            if substeps > self.opts.max_substeps {
                return Err(Error::Krylov(format!(
                    "exceeded {} substeps with {remaining} left",
                    self.opts.max_substeps
                )));
            }
            let (dt, log_step) = self.substep(v, remaining)?;
            log_norm_sq += log_step;
            remaining = if dt >= remaining { 0.0 } else { remaining - dt };
        }
        Ok(log_norm_sq)
    }

    /// One accepted substep of length at most `max_dt`; returns the step taken
    /// and its contribution to the log norm squared.
    fn substep(&self, v: &mut Vec<Complex64>, max_dt: f64) -> Result<(f64, f64)> {
        let dim = v.len();
        let m_max = self.opts.max_dim.min(dim).max(1);
        let mut basis: Vec<Vec<Complex64>> = Vec::with_capacity(m_max);
        let mut alpha: Vec<f64> = Vec::with_capacity(m_max);
        let mut beta: Vec<f64> = Vec::with_capacity(m_max);
        basis.push(v.clone());
        let mut w = vec![Complex64::new(0.0, 0.0); dim];
        let mut breakdown = false;
        let mut residual = 0.0;
        for j in 0..m_max {
            self.op.apply_into(&basis[j], &mut w);
            let a = inner(&basis[j], &w).re;
            alpha.push(a);
            for (wi, bi) in w.iter_mut().zip(&basis[j]) {
                *wi -= a * bi;
            }
            if j > 0 {
                let b = beta[j - 1];
                for (wi, bi) in w.iter_mut().zip(&basis[j - 1]) {
                    *wi -= b * bi;
                }
            }
            // two passes of classical Gram-Schmidt against the whole basis
            for _ in 0..2 {
                for q in &basis {
                    let c = inner(q, &w);
                    for (wi, qi) in w.iter_mut().zip(q) {
                        *wi -= c * qi;
                    }
                }
            }
            let b = norm(&w);
            let scale = alpha.iter().map(|a| a.abs()).fold(1.0, f64::max);
            if b <= 1e-13 * scale {
                breakdown = true;
                break;
            }
            if j + 1 == m_max {
                residual = b;
                break;
            }
            beta.push(b);
            basis.push(w.iter().map(|x| x / b).collect());
        }

        let m = alpha.len();
        let mut t = DMatrix::<f64>::zeros(m, m);
        for i in 0..m {
            t[(i, i)] = alpha[i];
            if i + 1 < m {
                t[(i, i + 1)] = beta[i];
                t[(i + 1, i)] = beta[i];
            }
        }
        let eig = SymmetricEigen::new(t);
        let shift = eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min);
        let coeffs = |dt: f64| -> Vec<f64> {
            // y = Q exp(-dt (Lambda - shift)) Q^T e_1
            let weights: Vec<f64> = (0..m)
                .map(|k| (-dt * (eig.eigenvalues[k] - shift)).exp() * eig.eigenvectors[(0, k)])
                .collect();
            (0..m)
                .map(|i| (0..m).map(|k| eig.eigenvectors[(i, k)] * weights[k]).sum())
                .collect()
        };

        let mut dt = max_dt;
        let mut y = coeffs(dt);
        if !breakdown {
            let mut halvings = 0;
            loop {
                let y_norm = y.iter().map(|c| c * c).sum::<f64>().sqrt();
                let err = residual * y[m - 1].abs();
                if err <= self.opts.tol * y_norm {
                    break;
                }
                halvings += 1;
                if halvings > 200 {
                    return Err(Error::Krylov("step size underflow".into()));
                }
                dt *= 0.5;
                y = coeffs(dt);
            }
        }

        let mut out = vec![Complex64::new(0.0, 0.0); dim];
        for (q, &c) in basis.iter().zip(&y) {
            for (o, qi) in out.iter_mut().zip(q) {
                *o += c * qi;
            }
        }
        let n = norm(&out);
        if !(n.is_finite() && n > 0.0) {
            return Err(Error::Krylov(format!("propagated norm {n}")));
        }
        out.iter_mut().for_each(|a| *a /= n);
        *v = out;
        Ok((dt, 2.0 * (n.ln() - dt * shift)))
    }
}

/// Normalized `e^{-tau K}|cps>` together with `log P = log ||e^{-tau K}|cps>||^2`.
pub fn exact_ite(cps: &ClassicalProductState, generator: &PauliSum, tau: f64) -> Result<MettsRecord> {
    if tau < 0.0 {
        return Err(Error::NegativeTime(tau));
    }
    let prop = KrylovPropagator::new(generator, KrylovOptions::default())?;
    exact_ite_with(&prop, cps, tau)
}

/// [`exact_ite`] reusing a prepared propagator.
pub fn exact_ite_with(prop: &KrylovPropagator, cps: &ClassicalProductState, tau: f64) -> Result<MettsRecord> {
    let start = cps_to_state(cps);
    if start.n_sites() != prop.op.n_sites() {
        return Err(Error::SizeMismatch {
            left: prop.op.n_sites(),
            right: start.n_sites(),
        });
    }
    let mut amps = start.into_amplitudes();
    let log_p = if tau == 0.0 {
        0.0
    } else {
        prop.propagate(&mut amps, tau)?
    };
    Ok(MettsRecord {
        state: Statevector::from_raw(cps.n_sites(), amps),
        log_p,
        source_cps: cps.clone(),
    })
}
