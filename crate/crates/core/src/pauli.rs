//! Pauli-string algebra in the symplectic (bit-mask) representation.
//!
//! A string on `n` sites is stored as a pair of masks `(x, z)`: a site carries
//! `X` when only its x bit is set, `Z` when only its z bit is set and `Y` when
//! both are set. Bit layout follows the statevector basis ordering: site 0 is
//! the most significant bit, so site `s` lives at bit `n - 1 - s` and the masks
//! can be applied to basis indices directly.
//!
//! With `y = |x & z|`, the string acts on a basis state as
//! `P |b> = i^y (-1)^{|b & z|} |b ^ x>`.

use std::collections::BTreeMap;
use std::fmt;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::statevector::Statevector;

/// Terms with a coefficient magnitude below this are dropped on canonicalization.
pub const COEFF_EPS: f64 = 1e-14;

/// Largest register supported by the mask representation.
pub const MAX_SITES: usize = 63;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Pauli {
    I,
    X,
    Y,
    Z,
}

impl Pauli {
    pub fn letter(self) -> char {
        match self {
            Pauli::I => 'I',
            Pauli::X => 'X',
            Pauli::Y => 'Y',
            Pauli::Z => 'Z',
        }
    }

    pub fn from_letter(c: char) -> Option<Pauli> {
        match c.to_ascii_uppercase() {
            'I' => Some(Pauli::I),
            'X' => Some(Pauli::X),
            'Y' => Some(Pauli::Y),
            'Z' => Some(Pauli::Z),
            _ => None,
        }
    }
}

/// A power of `i`: one of `1, i, -1, -i`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Phase(u8);

impl Phase {
    pub const ONE: Phase = Phase(0);
    pub const I: Phase = Phase(1);
    pub const MINUS_ONE: Phase = Phase(2);
    pub const MINUS_I: Phase = Phase(3);

    /// `i^k` for any integer `k`.
    pub fn i_pow(k: i64) -> Phase {
        Phase(k.rem_euclid(4) as u8)
    }

    pub fn exponent(self) -> u8 {
        self.0
    }

    pub fn to_complex(self) -> Complex64 {
        match self.0 {
            0 => Complex64::new(1.0, 0.0),
            1 => Complex64::new(0.0, 1.0),
            2 => Complex64::new(-1.0, 0.0),
            _ => Complex64::new(0.0, -1.0),
        }
    }

    pub fn conj(self) -> Phase {
        Phase((4 - self.0) % 4)
    }
}

impl std::ops::Mul for Phase {
    type Output = Phase;
    fn mul(self, rhs: Phase) -> Phase {
        Phase((self.0 + rhs.0) % 4)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PauliString {
    n_sites: usize,
    x: u64,
    z: u64,
}

impl PauliString {
    pub fn identity(n_sites: usize) -> PauliString {
        assert!((1..=MAX_SITES).contains(&n_sites), "unsupported site count {n_sites}");
        PauliString { n_sites, x: 0, z: 0 }
    }

    /// Builds a string from raw masks in statevector bit layout.
    pub fn from_masks(n_sites: usize, x: u64, z: u64) -> Result<PauliString> {
        if n_sites == 0 || n_sites > MAX_SITES {
            return Err(Error::InvalidParams(format!(
                "site count {n_sites} outside 1..={MAX_SITES}"
            )));
        }
        let width = (1u64 << n_sites) - 1;
        if (x | z) & !width != 0 {
            return Err(Error::Parse(format!("masks ({x:#x}, {z:#x}) exceed {n_sites} sites")));
        }
        Ok(PauliString { n_sites, x, z })
    }

    pub fn from_ops<I>(n_sites: usize, ops: I) -> Result<PauliString>
    where
        I: IntoIterator<Item = (usize, Pauli)>,
    {
        let mut p = PauliString::identity(n_sites);
        for (site, op) in ops {
            if site >= n_sites {
                return Err(Error::Parse(format!("site {site} out of range for {n_sites} sites")));
            }
            if p.pauli_at(site) != Pauli::I {
                return Err(Error::Parse(format!("site {site} given twice")));
            }
            p.set(site, op);
        }
        Ok(p)
    }

    pub fn single(n_sites: usize, site: usize, op: Pauli) -> PauliString {
        let mut p = PauliString::identity(n_sites);
        assert!(site < n_sites, "site {site} out of range");
        p.set(site, op);
        p
    }

    fn set(&mut self, site: usize, op: Pauli) {
        let bit = self.site_bit(site);
        self.x &= !bit;
        self.z &= !bit;
        match op {
            Pauli::I => {}
            Pauli::X => self.x |= bit,
            Pauli::Z => self.z |= bit,
            Pauli::Y => {
                self.x |= bit;
                self.z |= bit;
            }
        }
    }

    #[inline]
    pub fn site_bit(&self, site: usize) -> u64 {
        1u64 << (self.n_sites - 1 - site)
    }

    pub fn n_sites(&self) -> usize {
        self.n_sites
    }

    pub fn x_mask(&self) -> u64 {
        self.x
    }

    pub fn z_mask(&self) -> u64 {
        self.z
    }

    pub fn is_identity(&self) -> bool {
        self.x == 0 && self.z == 0
    }

    /// Diagonal in the computational basis (no X or Y anywhere).
    pub fn is_diagonal(&self) -> bool {
        self.x == 0
    }

    pub fn pauli_at(&self, site: usize) -> Pauli {
        let bit = self.site_bit(site);
        match (self.x & bit != 0, self.z & bit != 0) {
            (false, false) => Pauli::I,
            (true, false) => Pauli::X,
            (false, true) => Pauli::Z,
            (true, true) => Pauli::Y,
        }
    }

    /// Number of sites on which the string acts non-trivially.
    pub fn weight(&self) -> usize {
        (self.x | self.z).count_ones() as usize
    }

    /// Sites with a non-identity factor, ascending.
    pub fn support(&self) -> Vec<usize> {
        (0..self.n_sites).filter(|&s| self.pauli_at(s) != Pauli::I).collect()
    }

    fn y_count(&self) -> u32 {
        (self.x & self.z).count_ones()
    }

    pub fn commutes_with(&self, other: &PauliString) -> bool {
        ((self.x & other.z).count_ones() + (self.z & other.x).count_ones()).is_multiple_of(2)
    }

    /// Phase picked up by basis state `b`: `P|b> = phase(b) |b ^ x>`.
    #[inline]
    pub fn phase_on(&self, b: u64) -> Phase {
        let sign = ((b & self.z).count_ones() % 2) as i64 * 2;
        Phase::i_pow(self.y_count() as i64 + sign)
    }

    /// Group product `a * b = phase * c`.
    pub fn multiply(a: &PauliString, b: &PauliString) -> Result<(Phase, PauliString)> {
        if a.n_sites != b.n_sites {
            return Err(Error::SizeMismatch {
                left: a.n_sites,
                right: b.n_sites,
            });
        }
        let product = PauliString {
            n_sites: a.n_sites,
            x: a.x ^ b.x,
            z: a.z ^ b.z,
        };
        // P = i^y X^x Z^z, and Z^z1 X^x2 = (-1)^{|z1 & x2|} X^x2 Z^z1.
        let k =
            a.y_count() as i64 + b.y_count() as i64 - product.y_count() as i64 + 2 * (a.z & b.x).count_ones() as i64;
        Ok((Phase::i_pow(k), product))
    }

    /// Accumulates `coeff * P * input` into `out`.
    pub fn apply_accumulate(&self, coeff: Complex64, input: &[Complex64], out: &mut [Complex64]) {
        debug_assert_eq!(input.len(), out.len());
        let base = coeff * Phase::i_pow(self.y_count() as i64).to_complex();
        let x = self.x as usize;
        let z = self.z;
        for (b, amp) in input.iter().enumerate() {
            let c = if (b as u64 & z).count_ones().is_multiple_of(2) {
                base
            } else {
                -base
            };
            out[b ^ x] += c * amp;
        }
    }

    /// `P * input` in place.
    pub fn apply_in_place(&self, amps: &mut [Complex64]) {
        let base = Phase::i_pow(self.y_count() as i64).to_complex();
        let x = self.x as usize;
        let z = self.z;
        let sign = |b: usize| {
            if (b as u64 & z).count_ones().is_multiple_of(2) {
                base
            } else {
                -base
            }
        };
        if x == 0 {
            for (b, a) in amps.iter_mut().enumerate() {
                *a *= sign(b);
            }
            return;
        }
        for b in 0..amps.len() {
            let partner = b ^ x;
            if b < partner {
                let (ab, ap) = (amps[b], amps[partner]);
                amps[partner] = sign(b) * ab;
                amps[b] = sign(partner) * ap;
            }
        }
    }

    /// `e^{-i theta P / 2} = cos(theta/2) - i sin(theta/2) P`, applied in place.
    pub fn rotate_in_place(&self, theta: f64, amps: &mut [Complex64]) {
        Rotation::new(self, theta).apply(amps);
    }

    /// `<bra| P |ket>` without allocating.
    pub fn matrix_element(&self, bra: &[Complex64], ket: &[Complex64]) -> Complex64 {
        let x = self.x as usize;
        let z = self.z;
        let mut even = Complex64::new(0.0, 0.0);
        let mut odd = Complex64::new(0.0, 0.0);
        for (b, k) in ket.iter().enumerate() {
            let term = bra[b ^ x].conj() * k;
            if (b as u64 & z).count_ones().is_multiple_of(2) {
                even += term;
            } else {
                odd += term;
            }
        }
        Phase::i_pow(self.y_count() as i64).to_complex() * (even - odd)
    }

    /// Label like `X0 Z2 Y5`, or `I` for the identity.
    pub fn label(&self) -> String {
        if self.is_identity() {
            return "I".to_string();
        }
        self.support()
            .into_iter()
            .map(|s| format!("{}{}", self.pauli_at(s).letter(), s))
            .collect::<Vec<_>>()
            .join(" ")
    }

    pub fn parse(n_sites: usize, label: &str) -> Result<PauliString> {
        let label = label.trim();
        if label.is_empty() || label == "I" {
            return Ok(PauliString::identity(n_sites));
        }
        let mut ops = Vec::new();
        for tok in label.split_whitespace() {
            let mut chars = tok.chars();
            let op = chars
                .next()
                .and_then(Pauli::from_letter)
                .ok_or_else(|| Error::Parse(format!("bad Pauli token '{tok}'")))?;
            let site: usize = chars
                .as_str()
                .parse()
                .map_err(|_| Error::Parse(format!("bad site index in '{tok}'")))?;
            if op != Pauli::I {
                ops.push((site, op));
            }
        }
        PauliString::from_ops(n_sites, ops)
    }
}

impl fmt::Display for PauliString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label())
    }
}

/// `e^{-i theta P / 2}` prepared for repeated application.
///
/// Amplitude pairs `(b, b ^ x)` are visited block-wise below the highest bit
/// of `x`; the sign `(-1)^{|b & z|}` is split into a per-block factor and a
/// table over the low bits.
#[derive(Clone, Debug)]
pub struct Rotation {
    x: usize,
    z: u64,
    top: usize,
    low_signs: Vec<f64>,
    /// `(-1)^{|x & z|}`: the partner's sign relative to `b`.
    partner_sign: f64,
    cos: f64,
    base: Complex64,
}

fn sign_table(z: u64, len: usize) -> Vec<f64> {
    let mut t = vec![1.0; len];
    let mut filled = 1;
    while filled < len {
        let flip = if z & filled as u64 != 0 { -1.0 } else { 1.0 };
        for l in 0..filled {
            t[filled + l] = flip * t[l];
        }
        filled *= 2;
    }
    t
}

impl Rotation {
    pub fn new(p: &PauliString, theta: f64) -> Rotation {
        let (s, c) = (0.5 * theta).sin_cos();
        let base = Complex64::new(0.0, -s) * Phase::i_pow(p.y_count() as i64).to_complex();
        let x = p.x as usize;
        let dim = 1usize << p.n_sites;
        let top = if x == 0 {
            dim
        } else {
            1usize << (63 - (x as u64).leading_zeros())
        };
        Rotation {
            x,
            z: p.z,
            top,
            low_signs: sign_table(p.z, top),
            partner_sign: if (p.x & p.z).count_ones().is_multiple_of(2) {
                1.0
            } else {
                -1.0
            },
            cos: c,
            base,
        }
    }

    pub fn apply(&self, amps: &mut [Complex64]) {
        let c = self.cos;
        if self.x == 0 {
            for (a, &sg) in amps.iter_mut().zip(&self.low_signs) {
                *a *= c + self.base * sg;
            }
            return;
        }
        let (x, top) = (self.x, self.top);
        for hi in (0..amps.len()).step_by(2 * top) {
            let block = if (hi as u64 & self.z).count_ones().is_multiple_of(2) {
                1.0
            } else {
                -1.0
            };
            let fb = self.base * block;
            let fp = fb * self.partner_sign;
            for (l, &sg) in self.low_signs.iter().enumerate() {
                let b = hi | l;
                let p = b ^ x;
                let (ab, ap) = (amps[b], amps[p]);
                amps[b] = c * ab + (fp * sg) * ap;
                amps[p] = c * ap + (fb * sg) * ab;
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PauliTerm {
    pub coeff: Complex64,
    pub string: PauliString,
}

/// A weighted sum of Pauli strings in canonical form: strings sorted, unique,
/// and no coefficient smaller than [`COEFF_EPS`].
#[derive(Clone, Debug, PartialEq)]
pub struct PauliSum {
    n_sites: usize,
    terms: Vec<PauliTerm>,
}

impl PauliSum {
    pub fn zero(n_sites: usize) -> PauliSum {
        PauliSum {
            n_sites,
            terms: Vec::new(),
        }
    }

    pub fn from_terms<I>(n_sites: usize, terms: I) -> Result<PauliSum>
    where
        I: IntoIterator<Item = (Complex64, PauliString)>,
    {
        let mut acc: BTreeMap<PauliString, Complex64> = BTreeMap::new();
        for (c, s) in terms {
            if s.n_sites() != n_sites {
                return Err(Error::SizeMismatch {
                    left: n_sites,
                    right: s.n_sites(),
                });
            }
            *acc.entry(s).or_insert(Complex64::new(0.0, 0.0)) += c;
        }
        Ok(Self::from_map(n_sites, acc))
    }

    /// Real-coefficient convenience constructor.
    pub fn from_real_terms<I>(n_sites: usize, terms: I) -> Result<PauliSum>
    where
        I: IntoIterator<Item = (f64, PauliString)>,
    {
        Self::from_terms(n_sites, terms.into_iter().map(|(c, s)| (Complex64::new(c, 0.0), s)))
    }

    pub fn from_string(string: PauliString, coeff: f64) -> PauliSum {
        Self::from_real_terms(string.n_sites(), [(coeff, string)]).expect("sizes agree")
    }

    fn from_map(n_sites: usize, acc: BTreeMap<PauliString, Complex64>) -> PauliSum {
        let terms = acc
            .into_iter()
            .filter(|(_, c)| c.norm() >= COEFF_EPS)
            .map(|(string, coeff)| PauliTerm { coeff, string })
            .collect();
        PauliSum { n_sites, terms }
    }

    pub fn n_sites(&self) -> usize {
        self.n_sites
    }

    pub fn dim(&self) -> usize {
        1usize << self.n_sites
    }

    pub fn terms(&self) -> &[PauliTerm] {
        &self.terms
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn coeff_of(&self, s: &PauliString) -> Complex64 {
        self.terms
            .binary_search_by(|t| t.string.cmp(s))
            .map(|i| self.terms[i].coeff)
            .unwrap_or_default()
    }

    fn check_sites(&self, other: &PauliSum) -> Result<()> {
        if self.n_sites != other.n_sites {
            return Err(Error::SizeMismatch {
                left: self.n_sites,
                right: other.n_sites,
            });
        }
        Ok(())
    }

    /// `a * self + b * other`.
    pub fn linear_combination(&self, a: Complex64, other: &PauliSum, b: Complex64) -> Result<PauliSum> {
        self.check_sites(other)?;
        Self::from_terms(
            self.n_sites,
            self.terms
                .iter()
                .map(|t| (a * t.coeff, t.string))
                .chain(other.terms.iter().map(|t| (b * t.coeff, t.string))),
        )
    }

    pub fn plus(&self, other: &PauliSum) -> Result<PauliSum> {
        self.linear_combination(Complex64::new(1.0, 0.0), other, Complex64::new(1.0, 0.0))
    }

    pub fn minus(&self, other: &PauliSum) -> Result<PauliSum> {
        self.linear_combination(Complex64::new(1.0, 0.0), other, Complex64::new(-1.0, 0.0))
    }

    pub fn scaled(&self, c: Complex64) -> PauliSum {
        Self::from_terms(self.n_sites, self.terms.iter().map(|t| (c * t.coeff, t.string))).expect("sizes agree")
    }

    pub fn scaled_real(&self, c: f64) -> PauliSum {
        self.scaled(Complex64::new(c, 0.0))
    }

    /// Operator product `self * other`, expanded term by term.
    pub fn product(&self, other: &PauliSum) -> Result<PauliSum> {
        self.check_sites(other)?;
        let mut acc: BTreeMap<PauliString, Complex64> = BTreeMap::new();
        for a in &self.terms {
            for b in &other.terms {
                let (phase, s) = PauliString::multiply(&a.string, &b.string)?;
                *acc.entry(s).or_insert(Complex64::new(0.0, 0.0)) += a.coeff * b.coeff * phase.to_complex();
            }
        }
        Ok(Self::from_map(self.n_sites, acc))
    }

    pub fn commutator(&self, other: &PauliSum) -> Result<PauliSum> {
        self.product(other)?.minus(&other.product(self)?)
    }

    /// `P * self * P` for a single string `P`.
    pub fn conjugated_by(&self, p: &PauliString) -> Result<PauliSum> {
        if p.n_sites() != self.n_sites {
            return Err(Error::SizeMismatch {
                left: self.n_sites,
                right: p.n_sites(),
            });
        }
        Self::from_terms(
            self.n_sites,
            self.terms.iter().map(|t| {
                let c = if t.string.commutes_with(p) { t.coeff } else { -t.coeff };
                (c, t.string)
            }),
        )
    }

    /// Every Pauli string is self-adjoint, so Hermiticity means real coefficients.
    pub fn is_hermitian(&self) -> bool {
        self.terms.iter().all(|t| t.coeff.im.abs() < COEFF_EPS)
    }

    pub fn ensure_hermitian(&self) -> Result<()> {
        match self.terms.iter().find(|t| t.coeff.im.abs() >= COEFF_EPS) {
            None => Ok(()),
            Some(t) => Err(Error::NonHermitian {
                label: t.string.label(),
                coeff: format!("{}", t.coeff),
            }),
        }
    }

    /// Largest coefficient-wise deviation between two sums.
    pub fn max_coeff_diff(&self, other: &PauliSum) -> Result<f64> {
        let diff = self.minus(other)?;
        Ok(diff.terms.iter().map(|t| t.coeff.norm()).fold(0.0, f64::max))
    }

    /// Trace divided by the Hilbert-space dimension (the identity coefficient).
    pub fn normalized_trace(&self) -> Complex64 {
        self.coeff_of(&PauliString::identity(self.n_sites))
    }

    fn check_state(&self, psi: &Statevector) -> Result<()> {
        if psi.dim() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: psi.dim(),
            });
        }
        Ok(())
    }

    /// `op |psi>`, unnormalized.
    pub fn apply(&self, psi: &Statevector) -> Result<Statevector> {
        self.check_state(psi)?;
        let mut out = vec![Complex64::new(0.0, 0.0); psi.dim()];
        for t in &self.terms {
            t.string.apply_accumulate(t.coeff, psi.amplitudes(), &mut out);
        }
        Ok(Statevector::from_raw(self.n_sites, out))
    }

    /// `<psi|op|psi>` for Hermitian `op` and normalized `psi`.
    pub fn expectation(&self, psi: &Statevector) -> Result<f64> {
        self.ensure_hermitian()?;
        self.check_state(psi)?;
        psi.ensure_normalized(1e-8)?;
        let value = self.raw_expectation(psi.amplitudes());
        if value.im.abs() >= 1e-10 {
            return Err(Error::ComplexExpectation { imag: value.im });
        }
        Ok(value.re)
    }

    /// Unchecked `<psi|op|psi>` on raw amplitudes.
    pub fn raw_expectation(&self, amps: &[Complex64]) -> Complex64 {
        self.terms
            .iter()
            .map(|t| t.coeff * t.string.matrix_element(amps, amps))
            .sum()
    }

    /// Precomputes the per-basis-state coefficients for repeated application.
    pub fn compile(&self) -> PauliOperator {
        PauliOperator::new(self)
    }

    /// Lines of `coeff<TAB>label`.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for t in &self.terms {
            out.push_str(&format_coeff(t.coeff));
            out.push('\t');
            out.push_str(&t.string.label());
            out.push('\n');
        }
        out
    }

    pub fn from_text(n_sites: usize, text: &str) -> Result<PauliSum> {
        let mut terms = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim_end();
            if line.trim().is_empty() || line.trim_start().starts_with('#') {
                continue;
            }
            let (c, label) = line
                .split_once('\t')
                .ok_or_else(|| Error::Parse(format!("line {}: expected coeff<TAB>label", lineno + 1)))?;
            let coeff = parse_coeff(c.trim())
                .ok_or_else(|| Error::Parse(format!("line {}: bad coefficient '{c}'", lineno + 1)))?;
            terms.push((coeff, PauliString::parse(n_sites, label)?));
        }
        Self::from_terms(n_sites, terms)
    }
}

impl fmt::Display for PauliSum {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_text())
    }
}

fn format_coeff(c: Complex64) -> String {
    if c.im == 0.0 {
        format!("{:e}", c.re)
    } else {
        format!("{:e}{:+e}i", c.re, c.im)
    }
}

fn parse_coeff(s: &str) -> Option<Complex64> {
    if let Some(body) = s.strip_suffix('i') {
        // split at the sign that starts the imaginary part, skipping exponent signs
        let bytes = body.as_bytes();
        let split = (1..bytes.len())
            .rev()
            .find(|&k| (bytes[k] == b'+' || bytes[k] == b'-') && !matches!(bytes[k - 1], b'e' | b'E'))?;
        let re: f64 = body[..split].parse().ok()?;
        let im: f64 = body[split..].parse().ok()?;
        Some(Complex64::new(re, im))
    } else {
        s.parse::<f64>().ok().map(|re| Complex64::new(re, 0.0))
    }
}

/// A [`PauliSum`] compiled into x-mask groups with tabulated diagonal factors:
/// `out[b ^ x] += table[b] * in[b]` for each group.
#[derive(Clone, Debug)]
pub struct PauliOperator {
    n_sites: usize,
    groups: Vec<(usize, Vec<Complex64>)>,
}

impl PauliOperator {
    fn new(sum: &PauliSum) -> PauliOperator {
        let dim = sum.dim();
        let mut by_x: BTreeMap<u64, Vec<&PauliTerm>> = BTreeMap::new();
        for t in sum.terms() {
            by_x.entry(t.string.x_mask()).or_default().push(t);
        }
        let groups = by_x
            .into_iter()
            .map(|(x, terms)| {
                let table = (0..dim as u64)
                    .map(|b| terms.iter().map(|t| t.coeff * t.string.phase_on(b).to_complex()).sum())
                    .collect();
                (x as usize, table)
            })
            .collect();
        PauliOperator {
            n_sites: sum.n_sites(),
            groups,
        }
    }

    pub fn n_sites(&self) -> usize {
        self.n_sites
    }

    pub fn dim(&self) -> usize {
        1usize << self.n_sites
    }

    /// Overwrites `out` with `op * input`.
    pub fn apply_into(&self, input: &[Complex64], out: &mut [Complex64]) {
        debug_assert_eq!(input.len(), self.dim());
        out.iter_mut().for_each(|o| *o = Complex64::new(0.0, 0.0));
        for (x, table) in &self.groups {
            let x = *x;
            if x == 0 {
                for ((o, t), a) in out.iter_mut().zip(table).zip(input) {
                    *o += t * a;
                }
            } else {
                for (b, (t, a)) in table.iter().zip(input).enumerate() {
                    out[b ^ x] += t * a;
                }
            }
        }
    }

    pub fn apply_vec(&self, input: &[Complex64]) -> Vec<Complex64> {
        let mut out = vec![Complex64::new(0.0, 0.0); input.len()];
        self.apply_into(input, &mut out);
        out
    }

    /// Iterates the non-zero matrix elements `(row, col, value)` of column `col`.
    pub fn column(&self, col: usize) -> impl Iterator<Item = (usize, Complex64)> + '_ {
        self.groups
            .iter()
            .map(move |(x, table)| (col ^ x, table[col]))
            .filter(|(_, v)| v.norm() >= COEFF_EPS)
    }
}
