//! Physics outputs: densities, site occupations, z-basis shots and
//! string/anti-string length statistics.

use std::collections::BTreeMap;
use std::io::Write;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metts::{estimate_values, fmt_f64, Estimate, SampleSet};
use crate::pauli::PauliSum;
use crate::statevector::Statevector;

/// `<H>/L` for the bare Hamiltonian.
pub fn energy_density(state: &Statevector, hamiltonian: &PauliSum, l: usize) -> Result<f64> {
    Ok(hamiltonian.expectation(state)? / l as f64)
}

/// `<N>/L`.
pub fn particle_density(state: &Statevector, number_op: &PauliSum, l: usize) -> Result<f64> {
    Ok(number_op.expectation(state)? / l as f64)
}

/// Pooled estimate of `<O>/L` from a chain column.
pub fn density_estimate(samples: &SampleSet, name: &str, l: usize) -> Result<Estimate> {
    let mut e = estimate_values(&samples.kept_values(name)?)?;
    e.mean /= l as f64;
    e.stderr /= l as f64;
    Ok(e)
}

/// `<n_i>` for `i = 1..L`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OccupationProfile {
    pub values: Vec<f64>,
}

impl OccupationProfile {
    pub fn total(&self) -> f64 {
        self.values.iter().sum()
    }
}

/// Site occupations `(1 - Z_{i-1} Z_i)/2` from the z-basis probabilities.
pub fn site_occupations(state: &Statevector) -> OccupationProfile {
    let n = state.n_sites();
    let mut values = vec![0.0; n - 1];
    for (b, a) in state.amplitudes().iter().enumerate() {
        let p = a.norm_sqr();
        if p == 0.0 {
            continue;
        }
        // neighbouring spins differ where b ^ (b >> 1) has a bit set
        let walls = b ^ (b >> 1);
        for (i, v) in values.iter_mut().enumerate() {
            // site i+1 pairs spins i and i+1, bits n-1-i and n-2-i
            if walls >> (n - 2 - i) & 1 == 1 {
                *v += p;
            }
        }
    }
    OccupationProfile { values }
}

/// Per-site estimates from the `n_i` columns of a chain.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProfileEstimate {
    pub values: Vec<f64>,
    pub stderr: Vec<f64>,
}

impl ProfileEstimate {
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["site", "value", "stderr"]).map_err(csv_err)?;
        for (i, (v, s)) in self.values.iter().zip(&self.stderr).enumerate() {
            out.write_record([(i + 1).to_string(), fmt_f64(*v), fmt_f64(*s)])
                .map_err(csv_err)?;
        }
        out.flush()?;
        Ok(())
    }
}

pub fn occupation_profile(samples: &SampleSet) -> Result<ProfileEstimate> {
    let l = samples.meta.params.l;
    let mut values = Vec::with_capacity(l);
    let mut stderr = Vec::with_capacity(l);
    for i in 1..=l {
        let e = estimate_values(&samples.kept_values(&format!("n_{i}"))?)?;
        values.push(e.mean);
        stderr.push(e.stderr);
    }
    Ok(ProfileEstimate { values, stderr })
}

/// Strict local maxima, excluding the first and last site.
pub fn count_peaks(values: &[f64]) -> usize {
    if values.len() < 3 {
        return 0;
    }
    values.windows(3).filter(|w| w[1] > w[0] && w[1] > w[2]).count()
}

/// Independent z-basis shots of `state`, each a bit per spin (site 0 first).
pub fn sample_bitstrings<R: Rng + ?Sized>(state: &Statevector, shots: usize, rng: &mut R) -> Result<Vec<Vec<u8>>> {
    state.ensure_normalized(1e-8)?;
    if shots == 0 {
        return Err(Error::EmptyInput("at least one shot is required"));
    }
    let n = state.n_sites();
    let mut cdf = Vec::with_capacity(state.dim());
    let mut acc = 0.0;
    for a in state.amplitudes() {
        acc += a.norm_sqr();
        cdf.push(acc);
    }
    let total = acc;
    let last_nonzero = state.amplitudes().iter().rposition(|a| a.norm_sqr() > 0.0).unwrap_or(0);
    Ok((0..shots)
        .map(|_| {
            let u = rng.gen::<f64>() * total;
            let idx = cdf.partition_point(|&c| c <= u).min(last_nonzero);
            (0..n).map(|s| ((idx >> (n - 1 - s)) & 1) as u8).collect()
        })
        .collect())
}

/// Run-length statistics. `C_l` is the number of runs of length `l` divided
/// by the number of bitstrings, so individual values may exceed one.
///
/// Shots are accumulated in groups (one group per METTS, or one per shot),
/// and standard errors are computed over groups.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct StringHistogram {
    pub strings: BTreeMap<usize, u64>,
    pub antistrings: BTreeMap<usize, u64>,
    pub total_samples: u64,
    groups: u64,
    string_sq: BTreeMap<usize, f64>,
    antistring_sq: BTreeMap<usize, f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RunKind {
    String,
    Antistring,
}

/// Maximal runs as `(bit, length)` pairs.
pub fn runs(bits: &[u8]) -> Vec<(u8, usize)> {
    let mut out: Vec<(u8, usize)> = Vec::new();
    for &b in bits {
        match out.last_mut() {
            Some((v, len)) if *v == b => *len += 1,
            _ => out.push((b, 1)),
        }
    }
    out
}

impl StringHistogram {
    pub fn new() -> StringHistogram {
        StringHistogram::default()
    }

    /// Adds shots that share one group for error estimation.
    pub fn add_group(&mut self, bitstrings: &[Vec<u8>]) -> Result<()> {
        if bitstrings.is_empty() {
            return Err(Error::EmptyInput("bitstring group is empty"));
        }
        let width = bitstrings[0].len();
        let mut s_counts: BTreeMap<usize, u64> = BTreeMap::new();
        let mut a_counts: BTreeMap<usize, u64> = BTreeMap::new();
        for bits in bitstrings {
            if bits.len() != width {
                return Err(Error::DimensionMismatch {
                    expected: width,
                    found: bits.len(),
                });
            }
            for (v, len) in runs(bits) {
                let map = if v == 1 { &mut s_counts } else { &mut a_counts };
                *map.entry(len).or_default() += 1;
            }
        }
        let k = bitstrings.len() as f64;
        for (map, sq, counts) in [
            (&mut self.strings, &mut self.string_sq, s_counts),
            (&mut self.antistrings, &mut self.antistring_sq, a_counts),
        ] {
            for (len, c) in counts {
                *map.entry(len).or_default() += c;
                *sq.entry(len).or_default() += (c as f64 / k).powi(2);
            }
        }
        self.total_samples += bitstrings.len() as u64;
        self.groups += 1;
        Ok(())
    }

    pub fn merge(&mut self, other: &StringHistogram) {
        for (a, b) in [
            (&mut self.strings, &other.strings),
            (&mut self.antistrings, &other.antistrings),
        ] {
            for (l, c) in b {
                *a.entry(*l).or_default() += c;
            }
        }
        for (a, b) in [
            (&mut self.string_sq, &other.string_sq),
            (&mut self.antistring_sq, &other.antistring_sq),
        ] {
            for (l, c) in b {
                *a.entry(*l).or_default() += c;
            }
        }
        self.total_samples += other.total_samples;
        self.groups += other.groups;
    }

    fn counts(&self, kind: RunKind) -> &BTreeMap<usize, u64> {
        match kind {
            RunKind::String => &self.strings,
            RunKind::Antistring => &self.antistrings,
        }
    }

    pub fn c(&self, kind: RunKind, l: usize) -> f64 {
        if self.total_samples == 0 {
            return 0.0;
        }
        self.counts(kind).get(&l).copied().unwrap_or(0) as f64 / self.total_samples as f64
    }

    /// Standard error of `C_l` over groups. Exact for equal group sizes.
    pub fn c_stderr(&self, kind: RunKind, l: usize) -> f64 {
        let g = self.groups as f64;
        if self.groups < 2 {
            return f64::NAN;
        }
        let sq = match kind {
            RunKind::String => &self.string_sq,
            RunKind::Antistring => &self.antistring_sq,
        };
        let mean = self.c(kind, l);
        let second = sq.get(&l).copied().unwrap_or(0.0) / g;
        let var = (second - mean * mean).max(0.0) * g / (g - 1.0);
        (var / g).sqrt()
    }

    pub fn lengths(&self) -> Vec<usize> {
        let mut ls: Vec<usize> = self.strings.keys().chain(self.antistrings.keys()).copied().collect();
        ls.sort_unstable();
        ls.dedup();
        ls
    }

    /// Mean run length of one kind, weighting lengths by `C_l`.
    pub fn mean_length(&self, kind: RunKind) -> f64 {
        let m = self.counts(kind);
        let total: u64 = m.values().sum();
        m.iter().map(|(l, c)| *l as f64 * *c as f64).sum::<f64>() / total as f64
    }

    pub fn length_variance(&self, kind: RunKind) -> f64 {
        let m = self.counts(kind);
        let total: u64 = m.values().sum();
        let mean = self.mean_length(kind);
        m.iter()
            .map(|(l, c)| (*l as f64 - mean).powi(2) * *c as f64)
            .sum::<f64>()
            / total as f64
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["kind", "l", "C_l", "stderr"]).map_err(csv_err)?;
        for (kind, name) in [(RunKind::String, "string"), (RunKind::Antistring, "antistring")] {
            for l in self.counts(kind).keys() {
                out.write_record([
                    name.to_string(),
                    l.to_string(),
                    fmt_f64(self.c(kind, *l)),
                    fmt_f64(self.c_stderr(kind, *l)),
                ])
                .map_err(csv_err)?;
            }
        }
        out.flush()?;
        Ok(())
    }
}

/// Histogram treating every bitstring as its own group.
pub fn string_histogram(bitstrings: &[Vec<u8>]) -> Result<StringHistogram> {
    if bitstrings.is_empty() {
        return Err(Error::EmptyInput("no bitstrings"));
    }
    let mut h = StringHistogram::new();
    let width = bitstrings[0].len();
    for b in bitstrings {
        if b.len() != width {
            return Err(Error::DimensionMismatch {
                expected: width,
                found: b.len(),
            });
        }
        h.add_group(std::slice::from_ref(b))?;
    }
    Ok(h)
}

/// Computational-basis shot to spin bits: 1 where Z = +1.
pub fn spin_up_bits(shot: &[u8]) -> Vec<u8> {
    shot.iter().map(|b| 1 - b).collect()
}

/// Histogram of the kept shots of a chain, grouped per METTS. Strings are
/// runs of up spins and anti-strings runs of down spins, which the confining
/// field `h > 0` favours.
pub fn chain_histogram(samples: &SampleSet) -> Result<StringHistogram> {
    let mut h = StringHistogram::new();
    for r in samples.kept().filter(|r| !r.bitstrings.is_empty()) {
        let spins: Vec<Vec<u8>> = r.bitstrings.iter().map(|b| spin_up_bits(b)).collect();
        h.add_group(&spins)?;
    }
    if h.total_samples == 0 {
        return Err(Error::EmptyInput("chain recorded no bitstrings"));
    }
    Ok(h)
}

fn csv_err(e: csv::Error) -> Error {
    Error::Parse(e.to_string())
}
