//! Exact thermal averages by block-dense diagonalization.
//!
//! The generator is split into the connected components of its basis-state
//! graph (two basis states are linked when the matrix element between them is
//! non-zero). Each component is diagonalized densely; together they form the
//! full eigendecomposition. For the gauge-theory chain the components are the
//! domain-wall sectors, so an `L = 12` chain needs blocks of at most 924 states.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::pauli::{PauliOperator, PauliSum, COEFF_EPS};

/// Largest register accepted by the dense path (2^17 amplitudes).
pub const MAX_DENSE_SITES: usize = 17;

/// Upper bound on stored eigenvector entries (sum of squared block sizes).
const MAX_STORED_ENTRIES: usize = 60_000_000;

struct UnionFind {
    parent: Vec<u32>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        UnionFind {
            parent: (0..n as u32).collect(),
        }
    }

    fn find(&mut self, mut a: u32) -> u32 {
        while self.parent[a as usize] != a {
            let p = self.parent[a as usize];
            self.parent[a as usize] = self.parent[p as usize];
            a = p;
        }
        a
    }

    fn union(&mut self, a: u32, b: u32) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
            self.parent[hi as usize] = lo;
        }
    }
}

/// Connected components of the basis-state graph of `op`, each sorted, ordered
/// by their smallest member.
pub fn block_structure(op: &PauliOperator) -> Vec<Vec<usize>> {
    let dim = op.dim();
    let mut uf = UnionFind::new(dim);
    for col in 0..dim {
        for (row, _) in op.column(col) {
            if row != col {
                uf.union(row as u32, col as u32);
            }
        }
    }
    let mut index_of_root: HashMap<u32, usize> = HashMap::new();
    let mut blocks: Vec<Vec<usize>> = Vec::new();
    for b in 0..dim {
        let r = uf.find(b as u32);
        let k = *index_of_root.entry(r).or_insert_with(|| {
            blocks.push(Vec::new());
            blocks.len() - 1
        });
        blocks[k].push(b);
    }
    blocks
}

struct Block {
    states: Vec<usize>,
    energies: Vec<f64>,
    /// Column `k` is eigenvector `k` in the block's local basis.
    vectors: DMatrix<Complex64>,
}

/// Full eigendecomposition of a Hermitian [`PauliSum`].
pub struct Spectrum {
    n_sites: usize,
    blocks: Vec<Block>,
    /// Global basis index -> (block, local index).
    locate: Vec<(u32, u32)>,
    ground_energy: f64,
}

fn dense_block(op: &PauliOperator, states: &[usize], local: &[(u32, u32)], block_id: u32) -> DMatrix<Complex64> {
    let d = states.len();
    let mut m = DMatrix::<Complex64>::zeros(d, d);
    for (j, &col) in states.iter().enumerate() {
        for (row, v) in op.column(col) {
            let (b, i) = local[row];
            debug_assert_eq!(b, block_id);
            m[(i as usize, j)] += v;
        }
    }
    m
}

fn diagonalize(m: DMatrix<Complex64>) -> (Vec<f64>, DMatrix<Complex64>) {
    let d = m.nrows();
    let real = m.iter().all(|z| z.im.abs() < COEFF_EPS);
    let (values, vectors) = if real {
        let eig = SymmetricEigen::new(m.map(|z| z.re));
        (eig.eigenvalues, eig.eigenvectors.map(|x| Complex64::new(x, 0.0)))
    } else {
        let eig = SymmetricEigen::new(m);
        (eig.eigenvalues, eig.eigenvectors)
    };
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let energies = order.iter().map(|&k| values[k]).collect();
    let vectors = DMatrix::from_fn(d, d, |i, j| vectors[(i, order[j])]);
    (energies, vectors)
}

impl Spectrum {
    pub fn new(hamiltonian: &PauliSum) -> Result<Spectrum> {
        hamiltonian.ensure_hermitian()?;
        let n_sites = hamiltonian.n_sites();
        if n_sites > MAX_DENSE_SITES {
            return Err(Error::DimensionGuard {
                dim: 1usize << n_sites,
                max: 1usize << MAX_DENSE_SITES,
            });
        }
        let op = hamiltonian.compile();
        let block_states = block_structure(&op);
        let stored: usize = block_states.iter().map(|b| b.len() * b.len()).sum();
        if stored > MAX_STORED_ENTRIES {
            return Err(Error::DimensionGuard {
                dim: stored,
                max: MAX_STORED_ENTRIES,
            });
        }
        let mut locate = vec![(0u32, 0u32); op.dim()];
        for (k, states) in block_states.iter().enumerate() {
            for (i, &s) in states.iter().enumerate() {
                locate[s] = (k as u32, i as u32);
            }
        }
        let blocks: Vec<Block> = block_states
            .into_iter()
            .enumerate()
            .map(|(k, states)| {
                let m = dense_block(&op, &states, &locate, k as u32);
                let (energies, vectors) = diagonalize(m);
                Block {
                    states,
                    energies,
                    vectors,
                }
            })
            .collect();
        let ground_energy = blocks
            .iter()
            .flat_map(|b| b.energies.iter().cloned())
            .fold(f64::INFINITY, f64::min);
        Ok(Spectrum {
            n_sites,
            blocks,
            locate,
            ground_energy,
        })
    }

    pub fn n_sites(&self) -> usize {
        self.n_sites
    }

    pub fn ground_energy(&self) -> f64 {
        self.ground_energy
    }

    pub fn block_count(&self) -> usize {
        self.blocks.len()
    }

    pub fn block_sizes(&self) -> Vec<usize> {
        self.blocks.iter().map(|b| b.states.len()).collect()
    }

    pub fn block_states(&self, block: usize) -> &[usize] {
        &self.blocks[block].states
    }

    /// All eigenvalues, ascending.
    pub fn eigenvalues(&self) -> Vec<f64> {
        let mut e: Vec<f64> = self.blocks.iter().flat_map(|b| b.energies.iter().cloned()).collect();
        e.sort_by(f64::total_cmp);
        e
    }

    /// Eigenvector `k` of `block` embedded in the full register.
    pub fn eigenvector(&self, block: usize, k: usize) -> Vec<Complex64> {
        let b = &self.blocks[block];
        let mut v = vec![Complex64::new(0.0, 0.0); 1usize << self.n_sites];
        for (i, &s) in b.states.iter().enumerate() {
            v[s] = b.vectors[(i, k)];
        }
        v
    }

    pub fn block_energies(&self, block: usize) -> &[f64] {
        &self.blocks[block].energies
    }

    /// `<n|obs|n>` for every eigenvector, grouped by block. Only matrix
    /// elements inside a block contribute to a diagonal element.
    pub fn diagonal_table(&self, obs: &PauliSum) -> Result<DiagonalTable> {
        obs.ensure_hermitian()?;
        if obs.n_sites() != self.n_sites {
            return Err(Error::SizeMismatch {
                left: self.n_sites,
                right: obs.n_sites(),
            });
        }
        let values = self
            .blocks
            .iter()
            .enumerate()
            .map(|(k, block)| {
                let d = block.states.len();
                let mut acc = vec![0.0f64; d];
                let mut pairs: Vec<(usize, usize, Complex64)> = Vec::with_capacity(d);
                for t in obs.terms() {
                    pairs.clear();
                    let x = t.string.x_mask() as usize;
                    for (l, &b) in block.states.iter().enumerate() {
                        let (blk, lt) = self.locate[b ^ x];
                        if blk as usize == k {
                            let c = t.coeff * t.string.phase_on(b as u64).to_complex();
                            pairs.push((l, lt as usize, c));
                        }
                    }
                    if pairs.is_empty() {
                        continue;
                    }
                    for (n, a) in acc.iter_mut().enumerate() {
                        let col = block.vectors.column(n);
                        let mut s = Complex64::new(0.0, 0.0);
                        for &(l, lt, c) in &pairs {
                            s += c * col[lt].conj() * col[l];
                        }
                        *a += s.re;
                    }
                }
                acc
            })
            .collect();
        Ok(DiagonalTable { values })
    }

    /// Thermal weights `e^{-beta (E_n + shift_b - E_ref)}` and their sum.
    fn weights(&self, beta: f64, shift: &dyn Fn(usize) -> f64) -> (Vec<Vec<f64>>, f64) {
        let e_ref = self
            .blocks
            .iter()
            .enumerate()
            .flat_map(|(k, b)| b.energies.iter().map(move |e| e + shift(k)))
            .fold(f64::INFINITY, f64::min);
        let mut total = 0.0;
        let w: Vec<Vec<f64>> = self
            .blocks
            .iter()
            .enumerate()
            .map(|(k, b)| {
                b.energies
                    .iter()
                    .map(|e| {
                        let x = (-beta * (e + shift(k) - e_ref)).exp();
                        total += x;
                        x
                    })
                    .collect()
            })
            .collect();
        (w, total)
    }

    /// `Tr(obs e^{-beta K}) / Tr(e^{-beta K})` for the diagonalized `K`.
    pub fn thermal_average(&self, table: &DiagonalTable, beta: f64) -> Result<f64> {
        self.thermal_average_shifted(table, beta, &|_| 0.0)
    }

    /// As [`Spectrum::thermal_average`] with every energy in block `b` moved by `shift(b)`.
    pub fn thermal_average_shifted(
        &self,
        table: &DiagonalTable,
        beta: f64,
        shift: &dyn Fn(usize) -> f64,
    ) -> Result<f64> {
        if beta < 0.0 || !beta.is_finite() {
            return Err(Error::InvalidBeta(beta));
        }
        let (w, total) = self.weights(beta, shift);
        let num: f64 = w
            .iter()
            .zip(&table.values)
            .map(|(wb, vb)| wb.iter().zip(vb).map(|(a, b)| a * b).sum::<f64>())
            .sum();
        Ok(num / total)
    }

    /// Normalized `e^{-tau K}|v>` and `log ||e^{-tau K} v||^2`, by spectral projection.
    pub fn propagate(&self, v: &[Complex64], tau: f64) -> Result<(Vec<Complex64>, f64)> {
        if tau < 0.0 {
            return Err(Error::NegativeTime(tau));
        }
        let mut out = vec![Complex64::new(0.0, 0.0); v.len()];
        let mut log_terms: Vec<(f64, usize, Complex64, usize)> = Vec::new();
        for (k, b) in self.blocks.iter().enumerate() {
            for n in 0..b.states.len() {
                let col = b.vectors.column(n);
                let overlap: Complex64 = b.states.iter().enumerate().map(|(i, &s)| col[i].conj() * v[s]).sum();
                if overlap.norm_sqr() > 0.0 {
                    log_terms.push((-tau * (b.energies[n] - self.ground_energy), k, overlap, n));
                }
            }
        }
        let max_exp = log_terms.iter().map(|t| t.0).fold(f64::NEG_INFINITY, f64::max);
        let mut norm_sq = 0.0;
        for &(e, k, overlap, n) in &log_terms {
            let f = (e - max_exp).exp();
            let b = &self.blocks[k];
            let col = b.vectors.column(n);
            for (i, &s) in b.states.iter().enumerate() {
                out[s] += f * overlap * col[i];
            }
        }
        for a in &out {
            norm_sq += a.norm_sqr();
        }
        let nrm = norm_sq.sqrt();
        out.iter_mut().for_each(|a| *a /= nrm);
        let log_p = norm_sq.ln() + 2.0 * (max_exp - tau * self.ground_energy);
        Ok((out, log_p))
    }
}

/// Per-eigenvector diagonal expectation values of one observable.
#[derive(Clone, Debug)]
pub struct DiagonalTable {
    values: Vec<Vec<f64>>,
}

impl DiagonalTable {
    pub fn block(&self, k: usize) -> &[f64] {
        &self.values[k]
    }
}

/// Thermal oracle for a Hamiltonian with a conserved diagonal charge `N`:
/// one diagonalization serves every chemical potential, since `H - mu N`
/// shares eigenvectors with `H` when `N` is constant on each block.
pub struct ThermalOracle {
    spectrum: Spectrum,
    charges: Vec<f64>,
}

impl ThermalOracle {
    pub fn new(hamiltonian: &PauliSum, conserved: &PauliSum) -> Result<ThermalOracle> {
        if conserved.terms().iter().any(|t| !t.string.is_diagonal()) {
            return Err(Error::InvalidParams("conserved charge must be diagonal".into()));
        }
        let spectrum = Spectrum::new(hamiltonian)?;
        let op = conserved.compile();
        let diag = |b: usize| -> f64 { op.column(b).filter(|(r, _)| *r == b).map(|(_, v)| v.re).sum() };
        let mut charges = Vec::with_capacity(spectrum.block_count());
        for block in &spectrum.blocks {
            let q = diag(block.states[0]);
            if block.states.iter().any(|&s| (diag(s) - q).abs() > 1e-9) {
                return Err(Error::InvalidParams(
                    "charge is not conserved by the Hamiltonian blocks".into(),
                ));
            }
            charges.push(q);
        }
        Ok(ThermalOracle { spectrum, charges })
    }

    pub fn spectrum(&self) -> &Spectrum {
        &self.spectrum
    }

    pub fn block_charge(&self, block: usize) -> f64 {
        self.charges[block]
    }

    pub fn table(&self, obs: &PauliSum) -> Result<DiagonalTable> {
        self.spectrum.diagonal_table(obs)
    }

    /// Grand-canonical average `Tr(O e^{-beta (H - mu N)}) / Z`.
    pub fn average(&self, table: &DiagonalTable, beta: f64, mu: f64) -> Result<f64> {
        self.spectrum
            .thermal_average_shifted(table, beta, &|k| -mu * self.charges[k])
    }

    pub fn thermal(&self, obs: &PauliSum, beta: f64, mu: f64) -> Result<f64> {
        self.average(&self.table(obs)?, beta, mu)
    }

    /// Lowest eigenvalue of `H - mu N` and the charge of its block.
    pub fn ground_state(&self, mu: f64) -> (f64, f64) {
        let mut best = (f64::INFINITY, 0.0);
        for (k, b) in self.spectrum.blocks.iter().enumerate() {
            let e = b.energies[0] - mu * self.charges[k];
            if e < best.0 - 1e-12 {
                best = (e, self.charges[k]);
            }
        }
        best
    }
}

const SPECTRUM_CACHE_CAPACITY: usize = 4;

type SpectrumCache = Mutex<Vec<(String, Arc<Spectrum>)>>;

fn spectrum_cache() -> &'static SpectrumCache {
    static CACHE: OnceLock<SpectrumCache> = OnceLock::new();
    CACHE.get_or_init(|| Mutex::new(Vec::new()))
}

/// Spectrum of `hamiltonian`, built once and shared afterwards.
pub fn cached_spectrum(hamiltonian: &PauliSum) -> Result<Arc<Spectrum>> {
    let key = format!("{}|{}", hamiltonian.n_sites(), hamiltonian.to_text());
    if let Some((_, s)) = spectrum_cache().lock().unwrap().iter().find(|(k, _)| *k == key) {
        return Ok(Arc::clone(s));
    }
    let spectrum = Arc::new(Spectrum::new(hamiltonian)?);
    let mut cache = spectrum_cache().lock().unwrap();
    if !cache.iter().any(|(k, _)| *k == key) {
        if cache.len() >= SPECTRUM_CACHE_CAPACITY {
            cache.remove(0);
        }
        cache.push((key, Arc::clone(&spectrum)));
    }
    Ok(spectrum)
}

/// Exact thermal average `Tr(obs e^{-beta K}) / Tr(e^{-beta K})`.
pub fn ed_thermal(obs: &PauliSum, hamiltonian_gc: &PauliSum, beta: f64) -> Result<f64> {
    if beta < 0.0 {
        return Err(Error::InvalidBeta(beta));
    }
    if hamiltonian_gc.n_sites() > MAX_DENSE_SITES {
        return Err(Error::DimensionGuard {
            dim: hamiltonian_gc.dim(),
            max: 1usize << MAX_DENSE_SITES,
        });
    }
    let spectrum = cached_spectrum(hamiltonian_gc)?;
    let table = spectrum.diagonal_table(obs)?;
    spectrum.thermal_average(&table, beta)
}

/// Lowest eigenvalue per block by Lanczos, for registers beyond the dense path.
/// Returns `(block states' first index, lowest eigenvalue, value of the
/// conserved diagonal charge)` for every block.
pub fn block_ground_energies(hamiltonian: &PauliSum, conserved: &PauliSum) -> Result<Vec<(usize, f64, f64)>> {
    hamiltonian.ensure_hermitian()?;
    let op = hamiltonian.compile();
    let charge_op = conserved.compile();
    let blocks = block_structure(&op);
    let mut local = vec![0u32; op.dim()];
    let mut out = Vec::with_capacity(blocks.len());
    for states in &blocks {
        for (i, &s) in states.iter().enumerate() {
            local[s] = i as u32;
        }
        let charge: f64 = charge_op
            .column(states[0])
            .filter(|(r, _)| *r == states[0])
            .map(|(_, v)| v.re)
            .sum();
        // sparse block matrix in CSR-like column lists (Hermitian, so columns act as rows)
        let cols: Vec<Vec<(u32, Complex64)>> = states
            .iter()
            .map(|&c| op.column(c).map(|(r, v)| (local[r], v)).collect())
            .collect();
        let e0 = lanczos_lowest(&cols)?;
        out.push((states[0], e0, charge));
    }
    Ok(out)
}

fn lanczos_lowest(cols: &[Vec<(u32, Complex64)>]) -> Result<f64> {
    let d = cols.len();
    let matvec = |v: &[Complex64], out: &mut [Complex64]| {
        out.iter_mut().for_each(|o| *o = Complex64::new(0.0, 0.0));
        for (j, col) in cols.iter().enumerate() {
            for &(i, val) in col {
                out[i as usize] += val * v[j];
            }
        }
    };
    if d <= 64 {
        let mut m = DMatrix::<Complex64>::zeros(d, d);
        for (j, col) in cols.iter().enumerate() {
            for &(i, val) in col {
                m[(i as usize, j)] += val;
            }
        }
        let (e, _) = diagonalize(m);
        return Ok(e[0]);
    }
    // deterministic, non-symmetric start vector
    let mut v: Vec<Complex64> = (0..d)
        .map(|i| Complex64::new(1.0 + 0.37 * ((i * 7919) % 113) as f64 / 113.0, 0.0))
        .collect();
    let nv = super::norm(&v);
    v.iter_mut().for_each(|a| *a /= nv);
    let mut previous = f64::INFINITY;
    for _restart in 0..50 {
        let m = 80.min(d);
        let mut basis = vec![v.clone()];
        let mut alpha = Vec::new();
        let mut beta: Vec<f64> = Vec::new();
        let mut w = vec![Complex64::new(0.0, 0.0); d];
        for j in 0..m {
            matvec(&basis[j], &mut w);
            let a = super::inner(&basis[j], &w).re;
            alpha.push(a);
            for q in &basis {
                let c = super::inner(q, &w);
                for (wi, qi) in w.iter_mut().zip(q) {
                    *wi -= c * qi;
                }
            }
            let b = super::norm(&w);
            if b < 1e-12 || j + 1 == m {
                break;
            }
            beta.push(b);
            basis.push(w.iter().map(|x| x / b).collect());
        }
        let k = alpha.len();
        let t = DMatrix::from_fn(k, k, |i, j| {
            if i == j {
                alpha[i]
            } else if i + 1 == j {
                beta[i]
            } else if j + 1 == i {
                beta[j]
            } else {
                0.0
            }
        });
        let eig = SymmetricEigen::new(t);
        let (imin, e0) = eig
            .eigenvalues
            .iter()
            .cloned()
            .enumerate()
            .fold((0, f64::INFINITY), |acc, (i, e)| if e < acc.1 { (i, e) } else { acc });
        let mut next = vec![Complex64::new(0.0, 0.0); d];
        for (q, c) in basis.iter().zip(eig.eigenvectors.column(imin).iter()) {
            for (o, qi) in next.iter_mut().zip(q) {
                *o += *c * qi;
            }
        }
        let nn = super::norm(&next);
        next.iter_mut().for_each(|a| *a /= nn);
        matvec(&next, &mut w);
        let rayleigh = super::inner(&next, &w).re;
        let resid = w
            .iter()
            .zip(&next)
            .map(|(a, b)| (a - rayleigh * b).norm_sqr())
            .sum::<f64>()
            .sqrt();
        if resid < 1e-10 || (previous - e0).abs() < 1e-13 {
            return Ok(e0.min(rayleigh));
        }
        previous = e0;
        v = next;
    }
    Err(Error::Krylov("Lanczos ground-state search did not converge".into()))
}
