//! The METTS Markov chain and its estimators.
//!
//! A walk starts from a random product state, and every thermal step evolves
//! the current CPS to `tau = beta/2`, records observables on the normalized
//! METTS and collapses it in the scheduled basis to get the next CPS.

use std::collections::BTreeMap;
use std::fmt;
use std::io::Write;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::avqite::{self, AvqiteOptions, TraceRecord};
use crate::error::{Error, Result};
use crate::model::{build_grand_canonical, build_pool, ModelParams, OperatorPool};
use crate::observables;
use crate::pauli::PauliSum;
use crate::rng::{stream_rng, Purpose};
use crate::statevector::{
    collapse, exact_ite_with, Basis, ClassicalProductState, CollapseBasis, KrylovOptions, KrylovPropagator, Statevector,
};

/// Measurement basis per thermal step.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum CollapseSchedule {
    Fixed(Basis),
    /// `odd` at steps 1, 3, 5, ... and `even` at steps 2, 4, ...
    Alternating {
        odd: Basis,
        even: Basis,
    },
}

impl CollapseSchedule {
    /// Basis of the CPS at 1-based thermal step `step`.
    pub fn basis_at(&self, step: usize) -> Basis {
        match *self {
            CollapseSchedule::Fixed(b) => b,
            CollapseSchedule::Alternating { odd, even } => {
                if step % 2 == 1 {
                    odd
                } else {
                    even
                }
            }
        }
    }

    pub fn first(&self) -> Basis {
        self.basis_at(1)
    }

    /// Distinct bases in first-use order.
    pub fn bases(&self) -> Vec<Basis> {
        match *self {
            CollapseSchedule::Fixed(b) => vec![b],
            CollapseSchedule::Alternating { odd, even } if odd == even => vec![odd],
            CollapseSchedule::Alternating { odd, even } => vec![odd, even],
        }
    }
}

impl fmt::Display for CollapseSchedule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CollapseSchedule::Fixed(b) => write!(f, "{b}"),
            CollapseSchedule::Alternating { odd, even } => write!(f, "{odd}{even}"),
        }
    }
}

impl FromStr for CollapseSchedule {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim().to_ascii_lowercase();
        let bases = s
            .chars()
            .map(|c| c.to_string().parse::<Basis>())
            .collect::<Result<Vec<_>>>()
            .map_err(|_| Error::Config(format!("unknown collapse schedule '{s}'")))?;
        match bases.as_slice() {
            [b] => Ok(CollapseSchedule::Fixed(*b)),
            [odd, even] => Ok(CollapseSchedule::Alternating { odd: *odd, even: *even }),
            _ => Err(Error::Config(format!(
                "collapse schedule '{s}' must name one or two bases, e.g. \"y\" or \"xz\""
            ))),
        }
    }
}

impl TryFrom<String> for CollapseSchedule {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<CollapseSchedule> for String {
    fn from(s: CollapseSchedule) -> String {
        s.to_string()
    }
}

/// Propagator used for the `e^{-beta K/2}` step.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
#[derive(Default)]
pub enum Backend {
    #[default]
    Exact,
    Avqite(AvqiteOptions),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WalkConfig {
    pub s_w: usize,
    /// Kept samples per walk, after warm-up.
    pub s_0: usize,
    /// Discarded initial steps. Defaults to 10 for the exact backend and 1 for AVQITE.
    #[serde(default)]
    pub warmup: Option<usize>,
    pub schedule: CollapseSchedule,
    #[serde(default)]
    pub master_seed: u64,
    #[serde(default)]
    pub backend: Backend,
    /// Keep full AVQITE traces on every record.
    #[serde(default)]
    pub keep_traces: bool,
}

impl WalkConfig {
    pub fn new(s_w: usize, s_0: usize, schedule: CollapseSchedule, master_seed: u64) -> WalkConfig {
        WalkConfig {
            s_w,
            s_0,
            warmup: None,
            schedule,
            master_seed,
            backend: Backend::Exact,
            keep_traces: false,
        }
    }

    pub fn effective_warmup(&self) -> usize {
        self.warmup.unwrap_or(match self.backend {
            Backend::Exact => 10,
            Backend::Avqite(_) => 1,
        })
    }

    pub fn steps_per_walk(&self) -> usize {
        self.effective_warmup() + self.s_0
    }

    pub fn validate(&self) -> Result<()> {
        if self.s_w == 0 {
            return Err(Error::Config("s_w must be at least 1".into()));
        }
        if self.s_0 == 0 {
            return Err(Error::Config("s_0 must be at least 1".into()));
        }
        if self.steps_per_walk() > u32::MAX as usize || self.s_w > u32::MAX as usize {
            return Err(Error::Config("walk or step count too large".into()));
        }
        if let Backend::Avqite(opts) = &self.backend {
            opts.validate()?;
        }
        Ok(())
    }
}

/// What to record on every METTS.
#[derive(Clone, Debug, Default)]
pub struct Measurements {
    pub observables: Vec<(String, PauliSum)>,
    /// Adds columns `n_1 .. n_L`.
    pub site_occupations: bool,
    /// z-basis shots per METTS stored on the record.
    pub bitstring_shots: usize,
}

impl Measurements {
    pub fn new() -> Measurements {
        Measurements::default()
    }

    pub fn with(mut self, name: &str, op: PauliSum) -> Measurements {
        self.observables.push((name.to_string(), op));
        self
    }

    pub fn with_occupations(mut self) -> Measurements {
        self.site_occupations = true;
        self
    }

    pub fn with_bitstrings(mut self, shots: usize) -> Measurements {
        self.bitstring_shots = shots;
        self
    }

    fn names(&self, l: usize) -> Vec<String> {
        let mut names: Vec<String> = self.observables.iter().map(|(n, _)| n.clone()).collect();
        if self.site_occupations {
            names.extend((1..=l).map(|i| format!("n_{i}")));
        }
        names
    }

    fn validate(&self, n_sites: usize) -> Result<()> {
        let mut seen = std::collections::HashSet::new();
        for name in self.names(n_sites - 1) {
            if !seen.insert(name.clone()) {
                return Err(Error::Config(format!("duplicate observable name '{name}'")));
            }
        }
        for (name, op) in &self.observables {
            if op.n_sites() != n_sites {
                return Err(Error::Config(format!(
                    "observable '{name}' acts on {} sites, chain has {n_sites}",
                    op.n_sites()
                )));
            }
            op.ensure_hermitian()?;
        }
        Ok(())
    }

    fn measure(&self, state: &Statevector) -> Vec<f64> {
        let mut out: Vec<f64> = self
            .observables
            .iter()
            .map(|(_, op)| op.raw_expectation(state.amplitudes()).re)
            .collect();
        if self.site_occupations {
            out.extend(observables::site_occupations(state).values);
        }
        out
    }
}

/// Per-sample AVQITE resources.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AvqiteStep {
    pub n_theta: usize,
    pub n_cx: usize,
    pub steps: usize,
    pub max_mclachlan_sq: f64,
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub trace: Vec<TraceRecord>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SampleRecord {
    pub walk: usize,
    /// 1-based thermal step.
    pub step: usize,
    pub kept: bool,
    /// Basis of the CPS this METTS was evolved from.
    pub basis: Basis,
    pub cps: ClassicalProductState,
    pub log_p: f64,
    pub values: Vec<f64>,
    pub bitstrings: Vec<Vec<u8>>,
    pub avqite: Option<AvqiteStep>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SampleMeta {
    pub params: ModelParams,
    pub beta: f64,
    pub config: WalkConfig,
    pub warmup: usize,
    pub steps_per_walk: usize,
    pub observables: Vec<String>,
    pub bitstring_shots: usize,
}

/// All records of a chain, ordered by `(walk, step)`. Warm-up records are
/// kept and flagged.
#[derive(Clone, Debug, PartialEq)]
pub struct SampleSet {
    pub names: Vec<String>,
    pub records: Vec<SampleRecord>,
    pub meta: SampleMeta,
}

impl SampleSet {
    pub fn column_index(&self, name: &str) -> Result<usize> {
        self.names
            .iter()
            .position(|n| n == name)
            .ok_or_else(|| Error::UnknownObservable(name.to_string()))
    }

    pub fn kept(&self) -> impl Iterator<Item = &SampleRecord> {
        self.records.iter().filter(|r| r.kept)
    }

    /// Kept values of one observable in record order.
    pub fn kept_values(&self, name: &str) -> Result<Vec<f64>> {
        let c = self.column_index(name)?;
        Ok(self.kept().map(|r| r.values[c]).collect())
    }

    /// Kept values at the `k`-th kept step (1-based) of every walk.
    pub fn values_at_kept_step(&self, name: &str, k: usize) -> Result<Vec<f64>> {
        let c = self.column_index(name)?;
        let step = self.meta.warmup + k;
        Ok(self
            .records
            .iter()
            .filter(|r| r.step == step)
            .map(|r| r.values[c])
            .collect())
    }

    pub fn n_walks(&self) -> usize {
        self.meta.config.s_w
    }

    /// All kept z-basis shots.
    pub fn kept_bitstrings(&self) -> impl Iterator<Item = &Vec<u8>> {
        self.kept().flat_map(|r| r.bitstrings.iter())
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        let mut header = vec![
            "walk".to_string(),
            "step".into(),
            "kept".into(),
            "collapse_basis".into(),
            "cps".into(),
            "log_p".into(),
        ];
        header.extend(self.names.iter().cloned());
        let has_avq = self.records.iter().any(|r| r.avqite.is_some());
        if has_avq {
            header.extend(["n_theta".to_string(), "n_cx".into(), "max_mclachlan_sq".into()]);
        }
        out.write_record(&header).map_err(csv_err)?;
        for r in &self.records {
            let mut row = vec![
                r.walk.to_string(),
                r.step.to_string(),
                (r.kept as u8).to_string(),
                r.basis.to_string(),
                r.cps.label(),
                fmt_f64(r.log_p),
            ];
            row.extend(r.values.iter().map(|v| fmt_f64(*v)));
            if has_avq {
                match &r.avqite {
                    Some(a) => row.extend([a.n_theta.to_string(), a.n_cx.to_string(), fmt_f64(a.max_mclachlan_sq)]),
                    None => row.extend([String::new(), String::new(), String::new()]),
                }
            }
            out.write_record(&row).map_err(csv_err)?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn write_metadata<W: Write>(&self, w: W) -> Result<()> {
        serde_json::to_writer_pretty(w, &self.meta).map_err(|e| Error::Parse(e.to_string()))
    }

    /// One JSON line per trace record, tagged with walk and step.
    pub fn write_traces_jsonl<W: Write>(&self, mut w: W) -> Result<()> {
        #[derive(Serialize)]
        struct Line<'a> {
            walk: usize,
            step: usize,
            #[serde(flatten)]
            rec: &'a TraceRecord,
        }
        for r in &self.records {
            if let Some(a) = &r.avqite {
                for rec in &a.trace {
                    let line = Line {
                        walk: r.walk,
                        step: r.step,
                        rec,
                    };
                    serde_json::to_writer(&mut w, &line).map_err(|e| Error::Parse(e.to_string()))?;
                    w.write_all(b"\n")?;
                }
            }
        }
        Ok(())
    }
}

/// Shortest round-trip representation, so output files are byte-stable.
pub(crate) fn fmt_f64(v: f64) -> String {
    format!("{v:?}")
}

fn csv_err(e: csv::Error) -> Error {
    Error::Parse(e.to_string())
}

enum Propagator {
    Exact(KrylovPropagator),
    Avqite {
        generator: PauliSum,
        pools: BTreeMap<Basis, OperatorPool>,
        opts: AvqiteOptions,
    },
}

impl Propagator {
    fn evolve(
        &self,
        cps: &ClassicalProductState,
        tau: f64,
        keep_trace: bool,
    ) -> Result<(Statevector, f64, Option<AvqiteStep>)> {
        match self {
            Propagator::Exact(prop) => {
                let rec = exact_ite_with(prop, cps, tau)?;
                Ok((rec.state, rec.log_p, None))
            }
            Propagator::Avqite { generator, pools, opts } => {
                let basis = cps
                    .uniform_basis()
                    .ok_or_else(|| Error::Config("AVQITE walks need uniform-basis product states".into()))?;
                let pool = &pools[&basis];
                let ev = avqite::evolve(cps, generator, tau, pool, opts)?;
                let info = AvqiteStep {
                    n_theta: ev.report.n_theta,
                    n_cx: ev.report.n_cx,
                    steps: ev.report.steps,
                    max_mclachlan_sq: ev.report.max_mclachlan_sq,
                    trace: if keep_trace { ev.report.trace } else { Vec::new() },
                };
                // the variational state carries no norm information
                Ok((ev.state, f64::NAN, Some(info)))
            }
        }
    }
}

/// Runs `s_w` independent walks of `warmup + s_0` thermal steps each.
///
/// All randomness is drawn from streams keyed by `(master_seed, walk, step)`,
/// so results do not depend on the thread count.
pub fn run_chain(
    params: &ModelParams,
    beta: f64,
    config: &WalkConfig,
    measurements: &Measurements,
) -> Result<SampleSet> {
    if !(beta > 0.0) || !beta.is_finite() {
        return Err(Error::InvalidBeta(beta));
    }
    params.validate()?;
    config.validate()?;
    let n = params.n_sites();
    measurements.validate(n)?;
    let generator = build_grand_canonical(params)?;
    let prop = match &config.backend {
        Backend::Exact => Propagator::Exact(KrylovPropagator::new(&generator, KrylovOptions::default())?),
        Backend::Avqite(opts) => {
            let mut pools = BTreeMap::new();
            for b in config.schedule.bases() {
                pools.insert(b, build_pool(b, params.l)?);
            }
            Propagator::Avqite {
                generator: generator.clone(),
                pools,
                opts: *opts,
            }
        }
    };
    let warmup = config.effective_warmup();
    let steps = config.steps_per_walk();
    let tau = beta / 2.0;

    let walks: Vec<Vec<SampleRecord>> = (0..config.s_w)
        .into_par_iter()
        .map(|w| run_walk(w, steps, warmup, tau, config, &prop, measurements))
        .collect::<Result<_>>()?;

    Ok(SampleSet {
        names: measurements.names(params.l),
        records: walks.into_iter().flatten().collect(),
        meta: SampleMeta {
            params: *params,
            beta,
            config: config.clone(),
            warmup,
            steps_per_walk: steps,
            observables: measurements.names(params.l),
            bitstring_shots: measurements.bitstring_shots,
        },
    })
}

fn run_walk(
    w: usize,
    steps: usize,
    warmup: usize,
    tau: f64,
    config: &WalkConfig,
    prop: &Propagator,
    measurements: &Measurements,
) -> Result<Vec<SampleRecord>> {
    let seed = config.master_seed;
    let n = match prop {
        Propagator::Exact(p) => p.operator().n_sites(),
        Propagator::Avqite { generator, .. } => generator.n_sites(),
    };
    let context = |step: usize| {
        move |e: Error| Error::Walk {
            walk: w,
            step,
            source: Box::new(e),
        }
    };
    let first = config.schedule.first();
    let mut cps = ClassicalProductState::random(first, n, &mut stream_rng(seed, w as u32, 0, Purpose::InitialState));
    let mut out = Vec::with_capacity(steps);
    for step in 1..=steps {
        let (state, log_p, avq) = prop.evolve(&cps, tau, config.keep_traces).map_err(context(step))?;
        let values = measurements.measure(&state);
        let bitstrings = if measurements.bitstring_shots > 0 {
            let mut rng = stream_rng(seed, w as u32, step as u32, Purpose::Measurement);
            observables::sample_bitstrings(&state, measurements.bitstring_shots, &mut rng).map_err(context(step))?
        } else {
            Vec::new()
        };
        out.push(SampleRecord {
            walk: w,
            step,
            kept: step > warmup,
            basis: cps.uniform_basis().unwrap_or(first),
            cps: cps.clone(),
            log_p,
            values,
            bitstrings,
            avqite: avq,
        });
        if step < steps {
            let next = CollapseBasis::Uniform(config.schedule.basis_at(step + 1));
            let mut rng = stream_rng(seed, w as u32, step as u32, Purpose::Collapse);
            cps = collapse(&state, &next, &mut rng).map_err(context(step))?.0;
        }
    }
    Ok(out)
}

/// Sample mean and standard error.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub mean: f64,
    pub stderr: f64,
    pub count: usize,
}

/// Mean and `std(n-1)/sqrt(n)` of a sample.
pub fn estimate_values(values: &[f64]) -> Result<Estimate> {
    let s = values.len();
    if s < 2 {
        return Err(Error::TooFewRecords { needed: 2, found: s });
    }
    let mean = values.iter().sum::<f64>() / s as f64;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (s - 1) as f64;
    Ok(Estimate {
        mean,
        stderr: (var / s as f64).sqrt(),
        count: s,
    })
}

/// Pooled estimate over all kept records.
pub fn estimate(samples: &SampleSet, name: &str) -> Result<Estimate> {
    estimate_values(&samples.kept_values(name)?)
}

/// Estimate from per-walk means, which accounts for correlations along each walk.
pub fn blocked_estimate(samples: &SampleSet, name: &str) -> Result<Estimate> {
    let c = samples.column_index(name)?;
    let mut sums: BTreeMap<usize, (f64, usize)> = BTreeMap::new();
    for r in samples.kept() {
        let e = sums.entry(r.walk).or_insert((0.0, 0));
        e.0 += r.values[c];
        e.1 += 1;
    }
    let means: Vec<f64> = sums.values().map(|(s, k)| s / *k as f64).collect();
    let mut est = estimate_values(&means)?;
    est.mean = samples.kept_values(name)?.iter().sum::<f64>() / samples.kept().count() as f64;
    Ok(est)
}

/// Pooled estimates using the first `k` kept steps of every walk, for
/// `k = 1..=s_0`. Prefixes with fewer than two samples are skipped.
pub fn running_estimates(samples: &SampleSet, name: &str) -> Result<Vec<(usize, Estimate)>> {
    let mut acc = Vec::new();
    let mut out = Vec::new();
    for k in 1..=samples.meta.config.s_0 {
        acc.extend(samples.values_at_kept_step(name, k)?);
        if acc.len() >= 2 {
            out.push((k, estimate_values(&acc)?));
        }
    }
    Ok(out)
}

/// `|mean - ed| / |ed|`.
pub fn relative_error(mean: f64, ed_value: f64) -> Result<f64> {
    if ed_value == 0.0 {
        return Err(Error::UndefinedMetric("relative error against a zero reference"));
    }
    Ok((mean - ed_value).abs() / ed_value.abs())
}

/// Mean absolute relative deviation of per-sample values from the reference.
pub fn spread_metric(values: &[f64], ed_value: f64) -> Result<f64> {
    if ed_value == 0.0 {
        return Err(Error::UndefinedMetric("spread against a zero reference"));
    }
    if values.is_empty() {
        return Err(Error::EmptyInput("spread metric needs at least one value"));
    }
    let total: f64 = values.iter().map(|v| ((v - ed_value) / ed_value).abs()).sum();
    Ok(total / values.len() as f64)
}

/// `|av - ite| / |ed|`.
pub fn avqite_deviation(av_value: f64, ite_value: f64, ed_value: f64) -> Result<f64> {
    if ed_value == 0.0 {
        return Err(Error::UndefinedMetric("AVQITE deviation against a zero reference"));
    }
    Ok((av_value - ite_value).abs() / ed_value.abs())
}
