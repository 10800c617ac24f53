//! Adaptive variational imaginary-time evolution.
//!
//! The ansatz `|psi> = U_N ... U_1 |psi_0>`, `U_j = exp(-i theta_j G_j / 2)`,
//! follows the normalized imaginary-time flow through McLachlan's principle
//! `(g + lambda) theta_dot = V`. When the McLachlan distance exceeds the
//! threshold, generators are appended (at `theta = 0`, acting last) from an
//! operator pool, one at a time, greedily picking the candidate that lowers
//! the distance most.
//!
//! Derivative states are stored as real columns `[Im d_j ; -Re d_j]` of
//! length `2 * dim`. In that layout `Re<d_i|d_j>` and the candidate overlaps
//! `Im<G_c psi|d_j>` are plain real matrix products.

use std::io::Write;

use nalgebra::{Cholesky, DMatrix, DVector, Dyn, SymmetricEigen};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::OperatorPool;
use crate::pauli::{PauliOperator, PauliString, PauliSum, Rotation};
use crate::statevector::{cps_to_state, ClassicalProductState, Statevector};

#[derive(Clone, Debug, PartialEq)]
pub struct Ansatz {
    pub reference: ClassicalProductState,
    pub generators: Vec<PauliString>,
    pub thetas: Vec<f64>,
}

impl Ansatz {
    pub fn new(reference: ClassicalProductState) -> Ansatz {
        Ansatz {
            reference,
            generators: Vec::new(),
            thetas: Vec::new(),
        }
    }

    pub fn with_gates(
        reference: ClassicalProductState,
        generators: Vec<PauliString>,
        thetas: Vec<f64>,
    ) -> Result<Ansatz> {
        if generators.len() != thetas.len() {
            return Err(Error::DimensionMismatch {
                expected: generators.len(),
                found: thetas.len(),
            });
        }
        if let Some(g) = generators.iter().find(|g| g.n_sites() != reference.n_sites()) {
            return Err(Error::SizeMismatch {
                left: reference.n_sites(),
                right: g.n_sites(),
            });
        }
        Ok(Ansatz {
            reference,
            generators,
            thetas,
        })
    }

    pub fn n_sites(&self) -> usize {
        self.reference.n_sites()
    }

    pub fn len(&self) -> usize {
        self.generators.len()
    }

    pub fn is_empty(&self) -> bool {
        self.generators.is_empty()
    }

    pub fn push(&mut self, generator: PauliString, theta: f64) {
        self.generators.push(generator);
        self.thetas.push(theta);
    }
}

/// `N_CX = sum_j 2 (W_j - 1)`.
pub fn cnot_count_of(generators: &[PauliString]) -> usize {
    generators.iter().map(|g| 2 * g.weight().saturating_sub(1)).sum()
}

pub fn cnot_count(ansatz: &Ansatz) -> usize {
    cnot_count_of(&ansatz.generators)
}

fn czero() -> Complex64 {
    Complex64::new(0.0, 0.0)
}

pub fn ansatz_state(ansatz: &Ansatz) -> Statevector {
    let mut amps = cps_to_state(&ansatz.reference).into_amplitudes();
    for (g, &t) in ansatz.generators.iter().zip(&ansatz.thetas) {
        g.rotate_in_place(t, &mut amps);
    }
    Statevector::from_raw(ansatz.n_sites(), amps)
}

/// Final state and the exact derivative states `d psi / d theta_j`, obtained
/// by inserting `-i G_j / 2` after gate `j`.
pub fn derivative_states(ansatz: &Ansatz) -> (Statevector, Vec<Vec<Complex64>>) {
    let mut psi = cps_to_state(&ansatz.reference).into_amplitudes();
    let mut derivs: Vec<Vec<Complex64>> = Vec::with_capacity(ansatz.len());
    let gates: Vec<Rotation> = ansatz
        .generators
        .iter()
        .zip(&ansatz.thetas)
        .map(|(g, &t)| Rotation::new(g, t))
        .collect();
    for (j, g) in ansatz.generators.iter().enumerate() {
        gates[j].apply(&mut psi);
        // each derivative runs through the rest of the circuit while it is cache resident
        let mut d = vec![czero(); psi.len()];
        g.apply_accumulate(Complex64::new(0.0, -0.5), &psi, &mut d);
        for later in &gates[j + 1..] {
            later.apply(&mut d);
        }
        derivs.push(d);
    }
    (Statevector::from_raw(ansatz.n_sites(), psi), derivs)
}

/// `C = A^T B` for column-major `A` (`rows x ca`) and `B` (`rows x cb`).
fn gemm_tn(a: &[f64], ca: usize, b: &[f64], cb: usize, rows: usize) -> DMatrix<f64> {
    debug_assert_eq!(a.len(), rows * ca);
    debug_assert_eq!(b.len(), rows * cb);
    let mut c = DMatrix::<f64>::zeros(ca, cb);
    if ca == 0 || cb == 0 || rows == 0 {
        return c;
    }
    unsafe {
        // A^T is ca x rows with row stride `rows`; DMatrix is column-major.
        matrixmultiply::dgemm(
            ca,
            rows,
            cb,
            1.0,
            a.as_ptr(),
            rows as isize,
            1,
            b.as_ptr(),
            1,
            rows as isize,
            0.0,
            c.as_mut_ptr(),
            1,
            ca as isize,
        );
    }
    c
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// The variational quantities at one parameter point.
struct Snapshot {
    dim: usize,
    psi: Vec<Complex64>,
    /// `[Re psi ; Im psi]`
    psi_col: Vec<f64>,
    /// `[Im H psi ; -Re H psi]`
    hpsi_col: Vec<f64>,
    variance: f64,
    /// Derivative columns `[Im d_j ; -Re d_j]`, column-major.
    deriv: Vec<f64>,
    /// `Im <psi|d_j>`
    overlap: Vec<f64>,
    metric: DMatrix<f64>,
    gradient: DVector<f64>,
}

fn split_col(v: &[Complex64]) -> Vec<f64> {
    v.iter().map(|a| a.re).chain(v.iter().map(|a| a.im)).collect()
}

impl Snapshot {
    fn new(ansatz: &Ansatz, h: &PauliOperator) -> Snapshot {
        let (psi, derivs) = derivative_states(ansatz);
        let psi = psi.into_amplitudes();
        let dim = psi.len();
        let hpsi = h.apply_vec(&psi);
        let energy: f64 = psi.iter().zip(&hpsi).map(|(a, b)| (a.conj() * b).re).sum();
        let h2: f64 = hpsi.iter().map(|a| a.norm_sqr()).sum();
        let n = derivs.len();
        let mut deriv = Vec::with_capacity(2 * dim * n);
        for d in &derivs {
            deriv.extend(d.iter().map(|a| a.im));
            deriv.extend(d.iter().map(|a| -a.re));
        }
        let psi_col = split_col(&psi);
        let hpsi_col: Vec<f64> = hpsi.iter().map(|a| a.im).chain(hpsi.iter().map(|a| -a.re)).collect();
        let rows = 2 * dim;
        let overlap: Vec<f64> = (0..n)
            .map(|j| dot(&psi_col, &deriv[j * rows..(j + 1) * rows]))
            .collect();
        let gradient = DVector::from_iterator(n, (0..n).map(|j| -dot(&hpsi_col, &deriv[j * rows..(j + 1) * rows])));
        let mut metric = gemm_tn(&deriv, n, &deriv, n, rows);
        for i in 0..n {
            for j in 0..n {
                metric[(i, j)] -= overlap[i] * overlap[j];
            }
        }
        metric = (&metric + metric.transpose()) * 0.5;
        Snapshot {
            dim,
            psi,
            psi_col,
            hpsi_col,
            variance: (h2 - energy * energy).max(0.0),
            deriv,
            overlap,
            metric,
            gradient,
        }
    }

    fn n(&self) -> usize {
        self.gradient.len()
    }

    /// Appends the derivative of a new gate `G_c` at `theta = 0`, with
    /// `u = G_c psi` split as `[Re u ; Im u]`.
    fn append(&mut self, u_col: &[f64], expectation: f64, b: &DVector<f64>, d: f64, v_c: f64) {
        let n = self.n();
        self.deriv.extend(u_col.iter().map(|x| -0.5 * x));
        self.overlap.push(-0.5 * expectation);
        let mut metric = DMatrix::<f64>::zeros(n + 1, n + 1);
        metric.view_mut((0, 0), (n, n)).copy_from(&self.metric);
        for j in 0..n {
            metric[(n, j)] = b[j];
            metric[(j, n)] = b[j];
        }
        metric[(n, n)] = d;
        self.metric = metric;
        self.gradient = self.gradient.clone().insert_row(n, v_c);
    }
}

/// Regularized linear system `(g + lambda I) x = V`.
enum Factor {
    Chol(Cholesky<f64, Dyn>),
    Eigen(SymmetricEigen<f64, Dyn>),
}

impl Factor {
    fn new(g: &DMatrix<f64>, lambda: f64) -> Factor {
        let n = g.nrows();
        let m = g + DMatrix::<f64>::identity(n, n) * lambda;
        match Cholesky::new(m.clone()) {
            Some(c) => Factor::Chol(c),
            None => Factor::Eigen(SymmetricEigen::new(m)),
        }
    }

    fn solve(&self, v: &DVector<f64>) -> DVector<f64> {
        match self {
            Factor::Chol(c) => c.solve(v),
            Factor::Eigen(e) => {
                let cut = 1e-14 * e.eigenvalues.amax().max(1e-300);
                let coeffs = e.eigenvectors.tr_mul(v);
                let scaled = DVector::from_iterator(
                    coeffs.len(),
                    coeffs
                        .iter()
                        .zip(e.eigenvalues.iter())
                        .map(|(c, &l)| if l.abs() > cut { c / l } else { 0.0 }),
                );
                &e.eigenvectors * scaled
            }
        }
    }

    /// `b^T M^{-1} b` for each column of `b`.
    fn quadratic_forms(&self, b: &DMatrix<f64>) -> Vec<f64> {
        match self {
            Factor::Chol(c) => {
                let y = c.l().solve_lower_triangular(b).expect("non-singular factor");
                y.column_iter().map(|col| col.norm_squared()).collect()
            }
            Factor::Eigen(_) => b
                .column_iter()
                .map(|col| {
                    let col = col.into_owned();
                    col.dot(&self.solve(&col))
                })
                .collect(),
        }
    }
}

/// Solution of the McLachlan equations at one parameter point.
#[derive(Clone, Debug)]
pub struct EomSolution {
    pub theta_dot: DVector<f64>,
    pub metric: DMatrix<f64>,
    pub gradient: DVector<f64>,
    pub mclachlan_sq: f64,
    /// `|(g + lambda) theta_dot - V|`
    pub residual: f64,
}

/// Fubini-Study metric `g` and gradient `V` of `h_gc` at the current point.
pub fn metric_and_gradient(ansatz: &Ansatz, h_gc: &PauliSum) -> Result<(DMatrix<f64>, DVector<f64>)> {
    let op = checked_operator(ansatz, h_gc)?;
    let s = Snapshot::new(ansatz, &op);
    Ok((s.metric, s.gradient))
}

fn checked_operator(ansatz: &Ansatz, h_gc: &PauliSum) -> Result<PauliOperator> {
    h_gc.ensure_hermitian()?;
    if h_gc.n_sites() != ansatz.n_sites() {
        return Err(Error::SizeMismatch {
            left: ansatz.n_sites(),
            right: h_gc.n_sites(),
        });
    }
    Ok(h_gc.compile())
}

/// `(g + lambda I) theta_dot = V`; returns the solution and its residual.
pub fn solve_eom(g: &DMatrix<f64>, v: &DVector<f64>, lambda: f64) -> (DVector<f64>, f64) {
    if v.is_empty() {
        return (DVector::zeros(0), 0.0);
    }
    let x = Factor::new(g, lambda).solve(v);
    let n = g.nrows();
    let residual = ((g + DMatrix::<f64>::identity(n, n) * lambda) * &x - v).norm();
    (x, residual)
}

fn distance(variance: f64, v: &DVector<f64>, x: &DVector<f64>) -> f64 {
    2.0 * (variance - v.dot(x))
}

/// `L^2 = 2 (<H^2> - <H>^2 - V . theta_dot)`, clipped at zero.
pub fn mclachlan_sq(ansatz: &Ansatz, h_gc: &PauliSum, theta_dot: &DVector<f64>) -> Result<f64> {
    let op = checked_operator(ansatz, h_gc)?;
    let s = Snapshot::new(ansatz, &op);
    if theta_dot.len() != s.n() {
        return Err(Error::DimensionMismatch {
            expected: s.n(),
            found: theta_dot.len(),
        });
    }
    Ok(distance(s.variance, &s.gradient, theta_dot).max(0.0))
}

/// Metric, gradient, `theta_dot` and `L^2` at the current point.
pub fn eom(ansatz: &Ansatz, h_gc: &PauliSum, lambda: f64) -> Result<EomSolution> {
    let op = checked_operator(ansatz, h_gc)?;
    let s = Snapshot::new(ansatz, &op);
    let (theta_dot, residual) = solve_eom(&s.metric, &s.gradient, lambda);
    Ok(EomSolution {
        mclachlan_sq: distance(s.variance, &s.gradient, &theta_dot).max(0.0),
        theta_dot,
        metric: s.metric,
        gradient: s.gradient,
        residual,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TieRule {
    /// Among near-equal scores prefer the lowest generator weight, then pool order.
    LowWeightFirst,
    /// Among near-equal scores take the first in pool order.
    PoolOrder,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StallPolicy {
    /// Fail with a non-convergence error.
    Error,
    /// Keep evolving with the distance above threshold.
    Continue,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AvqiteOptions {
    /// McLachlan distance that triggers growth.
    pub threshold: f64,
    /// Fixed value of `max_j |theta_dot_j| dtau`.
    pub step_cap: f64,
    pub dt_min: f64,
    pub dt_max: f64,
    /// Tikhonov shift of the metric.
    pub lambda: f64,
    pub tie_rule: TieRule,
    pub tie_tol: f64,
    /// Smallest decrease of `L^2` that counts as progress when growing.
    pub min_reduction: f64,
    pub max_steps: usize,
    pub on_stall: StallPolicy,
}

impl Default for AvqiteOptions {
    fn default() -> Self {
        AvqiteOptions {
            threshold: 1e-3,
            step_cap: 0.02,
            dt_min: 1e-4,
            dt_max: 0.1,
            lambda: 1e-6,
            tie_rule: TieRule::LowWeightFirst,
            tie_tol: 1e-9,
            min_reduction: 1e-12,
            max_steps: 200_000,
            on_stall: StallPolicy::Error,
        }
    }
}

impl AvqiteOptions {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("threshold", self.threshold),
            ("step_cap", self.step_cap),
            ("dt_min", self.dt_min),
            ("dt_max", self.dt_max),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidParams(format!("{name} must be positive, got {v}")));
            }
        }
        if self.dt_min > self.dt_max {
            return Err(Error::InvalidParams("dt_min exceeds dt_max".into()));
        }
        if !(self.lambda >= 0.0) || !(self.tie_tol >= 0.0) || !(self.min_reduction >= 0.0) {
            return Err(Error::InvalidParams(
                "lambda, tie_tol and min_reduction must be non-negative".into(),
            ));
        }
        Ok(())
    }
}

const SCORE_CHUNK: usize = 128;

/// Coupling of every candidate `G_c` (appended at `theta = 0`) to the current
/// derivative set: metric column `b_c`, `<G_c>`, gradient `V_c` and `g_cc`.
struct Border {
    b: DMatrix<f64>,
    expect: Vec<f64>,
    v: Vec<f64>,
    d: Vec<f64>,
}

fn border(snap: &Snapshot, candidates: &[PauliString]) -> Border {
    let n = snap.n();
    let rows = 2 * snap.dim;
    let p = candidates.len();
    let mut out = Border {
        b: DMatrix::zeros(n, p),
        expect: Vec::with_capacity(p),
        v: Vec::with_capacity(p),
        d: Vec::with_capacity(p),
    };
    let mut a = vec![0.0; rows * SCORE_CHUNK.min(p.max(1))];
    let mut u = vec![czero(); snap.dim];
    for (chunk_id, chunk) in candidates.chunks(SCORE_CHUNK).enumerate() {
        let k = chunk.len();
        let a = &mut a[..rows * k];
        for (c, g) in chunk.iter().enumerate() {
            u.iter_mut().for_each(|v| *v = czero());
            g.apply_accumulate(Complex64::new(1.0, 0.0), &snap.psi, &mut u);
            let col = &mut a[c * rows..(c + 1) * rows];
            for (i, v) in u.iter().enumerate() {
                col[i] = v.re;
                col[snap.dim + i] = v.im;
            }
        }
        // Im<u_c|d_j>, then b_cj = -Im<u_c|d_j>/2 + <G_c> Im<psi|d_j>/2
        let overlaps = gemm_tn(a, k, &snap.deriv, n, rows);
        for c in 0..k {
            let col = &a[c * rows..(c + 1) * rows];
            let expectation = dot(col, &snap.psi_col);
            let global = chunk_id * SCORE_CHUNK + c;
            for j in 0..n {
                out.b[(j, global)] = -0.5 * overlaps[(c, j)] + 0.5 * expectation * snap.overlap[j];
            }
            out.v.push(0.5 * dot(col, &snap.hpsi_col));
            out.d.push(0.25 * (1.0 - expectation * expectation));
            out.expect.push(expectation);
        }
    }
    out
}

/// Gain in `V^T M^{-1} V` from bordering `M` with `(b, d + lambda)`, given the
/// Schur complement `denom = d + lambda - b^T M^{-1} b`, which is at least
/// lambda in exact arithmetic; anything smaller is rounding noise.
fn gain(numerator: f64, denom: f64, d: f64, lambda: f64) -> f64 {
    let floor = 1e-12 * (d + lambda).max(f64::MIN_POSITIVE);
    if denom > floor {
        numerator * numerator / denom
    } else {
        0.0
    }
}

/// Captured `V^T M^{-1} V` after appending each candidate, using a general factor.
fn scores_from_factor(snap: &Snapshot, factor: &Factor, x: &DVector<f64>, bd: &Border, lambda: f64) -> Vec<f64> {
    let base = snap.gradient.dot(x);
    let quad = if snap.n() > 0 {
        factor.quadratic_forms(&bd.b)
    } else {
        vec![0.0; bd.v.len()]
    };
    (0..bd.v.len())
        .map(|c| {
            let bx = if snap.n() > 0 { bd.b.column(c).dot(x) } else { 0.0 };
            base + gain(bd.v[c] - bx, bd.d[c] + lambda - quad[c], bd.d[c], lambda)
        })
        .collect()
}

/// Candidate scores kept current across consecutive appends at a fixed
/// parameter point. With `M = L L^T`, `y_c = L^{-1} b_c` and `z = L^{-1} V`,
/// appending `c` captures `|z|^2 + (V_c - y_c.z)^2 / (d_c + lambda - |y_c|^2)`;
/// an append extends `L` by one row, so `y_c` and `z` each gain one entry.
struct Scorer<'a> {
    pool: &'a [PauliString],
    y: Vec<Vec<f64>>,
    expect: Vec<f64>,
    v: Vec<f64>,
    d: Vec<f64>,
    z: Vec<f64>,
    lambda: f64,
}

impl<'a> Scorer<'a> {
    fn new(snap: &Snapshot, pool: &'a [PauliString], lambda: f64) -> Option<Scorer<'a>> {
        let n = snap.n();
        let bd = border(snap, pool);
        let (y, z) = if n == 0 {
            (vec![Vec::new(); pool.len()], Vec::new())
        } else {
            let m = &snap.metric + DMatrix::<f64>::identity(n, n) * lambda;
            let chol = Cholesky::new(m)?;
            let l = chol.l();
            let y = l.solve_lower_triangular(&bd.b)?;
            let z = l.solve_lower_triangular(&snap.gradient)?;
            (
                y.column_iter().map(|c| c.iter().copied().collect()).collect(),
                z.iter().copied().collect(),
            )
        };
        Some(Scorer {
            pool,
            y,
            expect: bd.expect,
            v: bd.v,
            d: bd.d,
            z,
            lambda,
        })
    }

    fn captured_base(&self) -> f64 {
        self.z.iter().map(|z| z * z).sum()
    }

    fn captured(&self) -> Vec<f64> {
        let base = self.captured_base();
        (0..self.pool.len())
            .map(|c| {
                let yc = &self.y[c];
                let yz = dot(yc, &self.z);
                let denom = self.d[c] + self.lambda - dot(yc, yc);
                base + gain(self.v[c] - yz, denom, self.d[c], self.lambda)
            })
            .collect()
    }

    /// Borders the factor with candidate `c`; `psi` is the (unchanged) state.
    fn append(&mut self, psi: &[Complex64], c: usize) {
        let ystar = self.y[c].clone();
        let delta = (self.d[c] + self.lambda - dot(&ystar, &ystar))
            .max(f64::MIN_POSITIVE)
            .sqrt();
        let znew = (self.v[c] - dot(&ystar, &self.z)) / delta;
        let mut ustar = vec![czero(); psi.len()];
        self.pool[c].apply_accumulate(Complex64::new(1.0, 0.0), psi, &mut ustar);
        let ec = self.expect[c];
        for k in 0..self.pool.len() {
            // g(k, new) = Re<u_k|u_c>/4 - <G_k><G_c>/4
            let r = self.pool[k].matrix_element(psi, &ustar).re;
            let b_new = 0.25 * (r - self.expect[k] * ec);
            let entry = (b_new - dot(&ystar, &self.y[k])) / delta;
            self.y[k].push(entry);
        }
        self.z.push(znew);
    }
}

/// `L^2` that results from appending each candidate at `theta = 0` and
/// re-solving the regularized equations of motion.
pub fn candidate_distances(
    ansatz: &Ansatz,
    candidates: &[PauliString],
    h_gc: &PauliSum,
    lambda: f64,
) -> Result<Vec<f64>> {
    let op = checked_operator(ansatz, h_gc)?;
    let snap = Snapshot::new(ansatz, &op);
    let captured = match Scorer::new(&snap, candidates, lambda) {
        Some(s) => s.captured(),
        None => {
            let factor = Factor::new(&snap.metric, lambda);
            let x = factor.solve(&snap.gradient);
            scores_from_factor(&snap, &factor, &x, &border(&snap, candidates), lambda)
        }
    };
    Ok(captured.iter().map(|s| 2.0 * (snap.variance - s)).collect())
}

fn pick(scores: &[f64], pool: &[PauliString], rule: TieRule, tie_tol: f64) -> Option<usize> {
    let best = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !best.is_finite() {
        return None;
    }
    let near = (0..scores.len()).filter(|&c| scores[c] >= best - tie_tol);
    match rule {
        TieRule::PoolOrder => near.min(),
        TieRule::LowWeightFirst => near.min_by_key(|&c| (pool[c].weight(), c)),
    }
}

/// One appended generator.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GrowthEvent {
    pub tau: f64,
    pub generator: String,
    pub weight: usize,
    pub mclachlan_before: f64,
    pub mclachlan_after: f64,
}

struct GrowState<'a> {
    pool: &'a [PauliString],
    opts: &'a AvqiteOptions,
}

impl GrowState<'_> {
    /// Appends generators until `L^2 <= threshold`. Returns `theta_dot`, the
    /// final distance and the events; `Err` on a stall when the policy demands it.
    fn grow(
        &self,
        tau: f64,
        ansatz: &mut Ansatz,
        snap: &mut Snapshot,
    ) -> Result<(DVector<f64>, f64, Vec<GrowthEvent>)> {
        let lambda = self.opts.lambda;
        let mut factor = Factor::new(&snap.metric, lambda);
        let mut x = factor.solve(&snap.gradient);
        let mut l2 = distance(snap.variance, &snap.gradient, &x);
        if l2 <= self.opts.threshold {
            return Ok((x, l2, Vec::new()));
        }
        let mut scorer = Scorer::new(snap, self.pool, lambda);
        let mut events = Vec::new();
        while l2 > self.opts.threshold {
            let scores = match &scorer {
                Some(s) => s.captured(),
                None => scores_from_factor(snap, &factor, &x, &border(snap, self.pool), lambda),
            };
            let chosen = pick(&scores, self.pool, self.opts.tie_rule, self.opts.tie_tol);
            let next = chosen.map(|c| 2.0 * (snap.variance - scores[c]));
            match (chosen, next) {
                (Some(c), Some(new_l2)) if l2 - new_l2 > self.opts.min_reduction => {
                    let g = self.pool[c];
                    if let Some(s) = scorer.as_mut() {
                        s.append(&snap.psi, c);
                    }
                    append_generator(snap, &g);
                    ansatz.push(g, 0.0);
                    let after = match &scorer {
                        Some(s) => 2.0 * (snap.variance - s.captured_base()),
                        None => {
                            factor = Factor::new(&snap.metric, lambda);
                            x = factor.solve(&snap.gradient);
                            distance(snap.variance, &snap.gradient, &x)
                        }
                    };
                    events.push(GrowthEvent {
                        tau,
                        generator: g.label(),
                        weight: g.weight(),
                        mclachlan_before: l2.max(0.0),
                        mclachlan_after: after.max(0.0),
                    });
                    l2 = after;
                }
                _ => {
                    if self.opts.on_stall == StallPolicy::Error {
                        return Err(Error::NonConvergence {
                            tau,
                            distance: l2,
                            threshold: self.opts.threshold,
                        });
                    }
                    break;
                }
            }
        }
        let x = Factor::new(&snap.metric, lambda).solve(&snap.gradient);
        let l2 = distance(snap.variance, &snap.gradient, &x);
        Ok((x, l2, events))
    }
}

fn append_generator(snap: &mut Snapshot, g: &PauliString) {
    let n = snap.n();
    let rows = 2 * snap.dim;
    let mut u = vec![czero(); snap.dim];
    g.apply_accumulate(Complex64::new(1.0, 0.0), &snap.psi, &mut u);
    let col = split_col(&u);
    let expectation = dot(&col, &snap.psi_col);
    let v_c = 0.5 * dot(&col, &snap.hpsi_col);
    let d = 0.25 * (1.0 - expectation * expectation);
    let b = DVector::from_iterator(
        n,
        (0..n).map(|j| {
            let dj = &snap.deriv[j * rows..(j + 1) * rows];
            -0.5 * dot(&col, dj) + 0.5 * expectation * snap.overlap[j]
        }),
    );
    snap.append(&col, expectation, &b, d, v_c);
}

/// Grows `ansatz` from `pool` until the McLachlan distance is at most
/// `threshold`. Returns the appended generators in order.
pub fn grow(
    ansatz: &mut Ansatz,
    pool: &OperatorPool,
    h_gc: &PauliSum,
    opts: &AvqiteOptions,
) -> Result<Vec<PauliString>> {
    opts.validate()?;
    let op = checked_operator(ansatz, h_gc)?;
    let mut snap = Snapshot::new(ansatz, &op);
    let before = ansatz.len();
    let state = GrowState {
        pool: &pool.generators,
        opts,
    };
    state.grow(0.0, ansatz, &mut snap)?;
    Ok(ansatz.generators[before..].to_vec())
}

/// One line of the per-evolution trace.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub tau: f64,
    pub mclachlan_sq: f64,
    pub n_theta: usize,
    pub n_cx: usize,
    pub dtau: f64,
    pub appended: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvolutionReport {
    pub steps: usize,
    pub final_mclachlan_sq: f64,
    pub max_mclachlan_sq: f64,
    pub growth_events: Vec<GrowthEvent>,
    pub n_theta: usize,
    pub n_cx: usize,
    pub lambda: f64,
    pub trace: Vec<TraceRecord>,
}

impl EvolutionReport {
    pub fn write_trace_jsonl<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        for rec in &self.trace {
            serde_json::to_writer(&mut w, rec)?;
            w.write_all(b"\n")?;
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct Evolution {
    pub ansatz: Ansatz,
    pub state: Statevector,
    pub report: EvolutionReport,
}

/// Variational propagation of `cps` under `h_gc` to imaginary time `tau_final`.
pub fn evolve(
    cps: &ClassicalProductState,
    h_gc: &PauliSum,
    tau_final: f64,
    pool: &OperatorPool,
    opts: &AvqiteOptions,
) -> Result<Evolution> {
    let mut out = evolve_checkpoints(cps, h_gc, &[tau_final], pool, opts)?;
    Ok(out.pop().expect("one checkpoint"))
}

/// One trajectory reported at several imaginary times.
///
/// The step before each checkpoint is shortened to land on it. The first
/// result is identical to a separate [`evolve`] call; later ones differ from
/// separate calls only through the extra step boundaries.
pub fn evolve_checkpoints(
    cps: &ClassicalProductState,
    h_gc: &PauliSum,
    taus: &[f64],
    pool: &OperatorPool,
    opts: &AvqiteOptions,
) -> Result<Vec<Evolution>> {
    if let Some(t) = taus.iter().find(|t| !(**t >= 0.0) || !t.is_finite()) {
        return Err(Error::NegativeTime(*t));
    }
    if taus.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::InvalidParams("checkpoints must be in increasing order".into()));
    }
    opts.validate()?;
    let mut ansatz = Ansatz::new(cps.clone());
    let op = checked_operator(&ansatz, h_gc)?;
    if let Some(g) = pool.generators.iter().find(|g| g.n_sites() != cps.n_sites()) {
        return Err(Error::SizeMismatch {
            left: cps.n_sites(),
            right: g.n_sites(),
        });
    }
    let grower = GrowState {
        pool: &pool.generators,
        opts,
    };
    let mut report = EvolutionReport {
        steps: 0,
        final_mclachlan_sq: 0.0,
        max_mclachlan_sq: 0.0,
        growth_events: Vec::new(),
        n_theta: 0,
        n_cx: 0,
        lambda: opts.lambda,
        trace: Vec::new(),
    };
    let mut tau = 0.0;
    let mut out = Vec::with_capacity(taus.len());
    for &tau_final in taus {
        while tau < tau_final {
            if report.steps >= opts.max_steps {
                return Err(Error::NonConvergence {
                    tau,
                    distance: report.final_mclachlan_sq,
                    threshold: opts.threshold,
                });
            }
            let mut snap = Snapshot::new(&ansatz, &op);
            let (x, l2, events) = grower.grow(tau, &mut ansatz, &mut snap)?;
            let appended = events.iter().map(|e| e.generator.clone()).collect();
            report.growth_events.extend(events);
            let max_rate = x.amax();
            let mut dt = if max_rate > 0.0 {
                (opts.step_cap / max_rate).clamp(opts.dt_min, opts.dt_max)
            } else {
                opts.dt_max
            };
            let remaining = tau_final - tau;
            let last = dt >= remaining;
            if last {
                dt = remaining;
            }
            for (t, r) in ansatz.thetas.iter_mut().zip(x.iter()) {
                *t += r * dt;
            }
            tau = if last { tau_final } else { tau + dt };
            report.steps += 1;
            let l2 = l2.max(0.0);
            report.final_mclachlan_sq = l2;
            report.max_mclachlan_sq = report.max_mclachlan_sq.max(l2);
            report.trace.push(TraceRecord {
                tau,
                mclachlan_sq: l2,
                n_theta: ansatz.len(),
                n_cx: cnot_count(&ansatz),
                dtau: dt,
                appended,
            });
        }
        report.n_theta = ansatz.len();
        report.n_cx = cnot_count(&ansatz);
        let state = ansatz_state(&ansatz).normalized()?;
        out.push(Evolution {
            ansatz: ansatz.clone(),
            state,
            report: report.clone(),
        });
    }
    Ok(out)
}
