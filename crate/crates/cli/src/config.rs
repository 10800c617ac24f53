//! Declarative experiment configuration.
//!
//! A config file is TOML with optional top-level `seed`, `out` and `workers`
//! keys, an `[avqite]` table of solver options and one table per experiment.
//! Every key has a default, so an empty file runs the standard settings at
//! desk scale. A run manifest (`manifest.json`) is also accepted as
//! a config and reproduces the run it describes.

use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use z2metts_core::avqite::AvqiteOptions;
use z2metts_core::metts::CollapseSchedule;
use z2metts_core::model::ModelParams;
use z2metts_core::Basis;

use crate::error::{CliError, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    BasisStudy,
    Eos,
    Friedel,
    Strings,
    AvqiteAccuracy,
    Avqmetts,
    NcxScaling,
    EdReference,
}

impl ExperimentKind {
    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::BasisStudy => "basis-study",
            ExperimentKind::Eos => "eos",
            ExperimentKind::Friedel => "friedel",
            ExperimentKind::Strings => "strings",
            ExperimentKind::AvqiteAccuracy => "avqite-accuracy",
            ExperimentKind::Avqmetts => "avqmetts",
            ExperimentKind::NcxScaling => "ncx-scaling",
            ExperimentKind::EdReference => "ed-reference",
        }
    }
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Walk sizes shared by the chain experiments.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WalkSize {
    pub s_w: usize,
    pub s_0: usize,
    /// Defaults to 10 for exact propagation and 1 for AVQITE.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub warmup: Option<usize>,
}

impl WalkSize {
    fn check(&self, what: &str) -> Result<()> {
        if self.s_w == 0 || self.s_0 == 0 {
            return Err(CliError::config(format!("{what}: s_w and s_0 must be at least 1")));
        }
        Ok(())
    }
}

/// A `(h, mu)` pair.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FieldCase {
    pub h: f64,
    pub mu: f64,
}

fn friedel_cases() -> Vec<FieldCase> {
    vec![FieldCase { h: 0.0, mu: -0.55 }, FieldCase { h: 0.1, mu: -0.4 }]
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BasisStudy {
    #[serde(rename = "L")]
    pub l: usize,
    pub h: f64,
    pub mu: f64,
    pub beta: f64,
    pub schedules: Vec<CollapseSchedule>,
    pub walk: WalkSize,
    /// Write every sample to `samples_<schedule>.csv`.
    pub write_samples: bool,
}

impl Default for BasisStudy {
    fn default() -> Self {
        BasisStudy {
            l: 12,
            h: 0.1,
            mu: -0.4,
            beta: 10.0,
            schedules: ["yz", "y", "x", "xz"].iter().map(|s| s.parse().unwrap()).collect(),
            walk: WalkSize {
                s_w: 100,
                s_0: 20,
                warmup: None,
            },
            write_samples: true,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Eos {
    #[serde(rename = "L")]
    pub l: usize,
    pub h_values: Vec<f64>,
    pub betas: Vec<f64>,
    pub mu_min: f64,
    pub mu_max: f64,
    pub mu_step: f64,
    pub schedule: CollapseSchedule,
    pub walk: WalkSize,
}

impl Default for Eos {
    fn default() -> Self {
        Eos {
            l: 12,
            h_values: vec![0.0, 0.1],
            betas: vec![5.0, 10.0, 20.0],
            mu_min: -1.0,
            mu_max: 1.0,
            mu_step: 0.025,
            schedule: "yz".parse().unwrap(),
            walk: WalkSize {
                s_w: 20,
                s_0: 10,
                warmup: None,
            },
        }
    }
}

impl Eos {
    /// `mu_min, mu_min + step, ...` up to `mu_max` inclusive.
    pub fn mu_grid(&self) -> Vec<f64> {
        let n = ((self.mu_max - self.mu_min) / self.mu_step + 1e-9).floor() as usize + 1;
        (0..n).map(|k| self.mu_min + k as f64 * self.mu_step).collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Friedel {
    #[serde(rename = "L")]
    pub l: usize,
    pub cases: Vec<FieldCase>,
    pub betas: Vec<f64>,
    pub schedule: CollapseSchedule,
    pub walk: WalkSize,
}

impl Default for Friedel {
    fn default() -> Self {
        Friedel {
            l: 12,
            cases: friedel_cases(),
            betas: vec![5.0, 10.0, 20.0],
            schedule: "yz".parse().unwrap(),
            walk: WalkSize {
                s_w: 100,
                s_0: 20,
                warmup: None,
            },
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Strings {
    #[serde(rename = "L")]
    pub l: usize,
    pub cases: Vec<FieldCase>,
    pub betas: Vec<f64>,
    pub shots: usize,
    pub schedule: CollapseSchedule,
    pub walk: WalkSize,
}

impl Default for Strings {
    fn default() -> Self {
        Strings {
            l: 12,
            cases: friedel_cases(),
            betas: vec![20.0, 10.0, 5.0],
            shots: 50,
            schedule: "yz".parse().unwrap(),
            walk: WalkSize {
                s_w: 100,
                s_0: 20,
                warmup: None,
            },
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AvqiteAccuracy {
    #[serde(rename = "L")]
    pub l: usize,
    pub h: f64,
    pub mu: f64,
    pub betas: Vec<f64>,
    pub bases: Vec<Basis>,
    /// CPSs per basis, drawn uniformly.
    pub samples: usize,
}

impl Default for AvqiteAccuracy {
    fn default() -> Self {
        AvqiteAccuracy {
            l: 12,
            h: 0.0,
            mu: -0.55,
            betas: vec![1.0, 2.0],
            bases: vec![Basis::X, Basis::Y, Basis::Z],
            samples: 288,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Avqmetts {
    #[serde(rename = "L")]
    pub l: usize,
    pub h: f64,
    pub mu: f64,
    pub betas: Vec<f64>,
    pub schedules: Vec<CollapseSchedule>,
    pub walk: WalkSize,
}

impl Default for Avqmetts {
    fn default() -> Self {
        Avqmetts {
            l: 12,
            h: 0.0,
            mu: -0.55,
            betas: (1..=10).map(f64::from).collect(),
            schedules: vec!["yz".parse().unwrap()],
            walk: WalkSize {
                s_w: 288,
                s_0: 4,
                warmup: Some(1),
            },
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CpsSource {
    /// Uniformly random outcomes in the series basis.
    Uniform,
    /// CPSs reached by an exact METTS chain collapsing in the series basis.
    Thermal,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NcxSeries {
    pub basis: Basis,
    pub lengths: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NcxScaling {
    pub h: f64,
    /// Ground-state filling `<N>/L` maintained by per-length calibration of mu.
    pub filling: f64,
    pub betas: Vec<f64>,
    pub samples: usize,
    pub cps_source: CpsSource,
    pub series: Vec<NcxSeries>,
}

impl Default for NcxScaling {
    fn default() -> Self {
        NcxScaling {
            h: 0.0,
            filling: 0.25,
            betas: vec![1.0, 2.0],
            samples: 32,
            cps_source: CpsSource::Uniform,
            series: vec![
                NcxSeries {
                    basis: Basis::Z,
                    lengths: vec![8, 12, 16],
                },
                NcxSeries {
                    basis: Basis::Y,
                    lengths: vec![12],
                },
            ],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EdReference {
    #[serde(rename = "L")]
    pub l: usize,
    pub cases: Vec<FieldCase>,
    pub betas: Vec<f64>,
}

impl Default for EdReference {
    fn default() -> Self {
        EdReference {
            l: 12,
            cases: vec![FieldCase { h: 0.1, mu: -0.4 }, FieldCase { h: 0.0, mu: -0.55 }],
            betas: vec![1.0, 2.0, 5.0, 10.0, 20.0],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub workers: Option<usize>,
    pub avqite: AvqiteOptions,
    #[serde(rename = "basis-study")]
    pub basis_study: BasisStudy,
    pub eos: Eos,
    pub friedel: Friedel,
    pub strings: Strings,
    #[serde(rename = "avqite-accuracy")]
    pub avqite_accuracy: AvqiteAccuracy,
    pub avqmetts: Avqmetts,
    #[serde(rename = "ncx-scaling")]
    pub ncx_scaling: NcxScaling,
    #[serde(rename = "ed-reference")]
    pub ed_reference: EdReference,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            seed: 1,
            out: None,
            workers: None,
            avqite: AvqiteOptions::default(),
            basis_study: BasisStudy::default(),
            eos: Eos::default(),
            friedel: Friedel::default(),
            strings: Strings::default(),
            avqite_accuracy: AvqiteAccuracy::default(),
            avqmetts: Avqmetts::default(),
            ncx_scaling: NcxScaling::default(),
            ed_reference: EdReference::default(),
        }
    }
}

/// Accepts TOML configs and JSON manifests.
pub fn load(path: &Path) -> Result<ExperimentConfig> {
    let text =
        std::fs::read_to_string(path).map_err(|e| CliError::config(format!("cannot read {}: {e}", path.display())))?;
    parse(&text, path.extension().and_then(|e| e.to_str()) == Some("json"))
        .map_err(|e| CliError::config(format!("{}: {e}", path.display())))
}

fn parse(text: &str, json: bool) -> std::result::Result<ExperimentConfig, String> {
    if json {
        let value: serde_json::Value = serde_json::from_str(text).map_err(|e| e.to_string())?;
        let inner = value.get("config").cloned().unwrap_or(value);
        serde_json::from_value(inner).map_err(|e| e.to_string())
    } else {
        toml::from_str(text).map_err(|e| e.to_string())
    }
}

pub fn parse_toml(text: &str) -> Result<ExperimentConfig> {
    parse(text, false).map_err(CliError::Config)
}

fn check_betas(what: &str, betas: &[f64]) -> Result<()> {
    if betas.is_empty() {
        return Err(CliError::config(format!("{what}: beta list is empty")));
    }
    if let Some(b) = betas.iter().find(|b| !(**b > 0.0) || !b.is_finite()) {
        return Err(CliError::config(format!("{what}: beta must be positive, got {b}")));
    }
    Ok(())
}

fn check_model(what: &str, l: usize, h: f64, mu: f64) -> Result<ModelParams> {
    ModelParams::new(l, h, mu).map_err(|e| CliError::config(format!("{what}: {e}")))
}

/// Largest chain for which experiments build a full thermal spectrum.
pub const MAX_ED_L: usize = 14;

fn check_dense(what: &str, l: usize) -> Result<()> {
    if l > MAX_ED_L {
        return Err(CliError::config(format!(
            "{what}: L = {l} exceeds the exact-diagonalization limit L <= {MAX_ED_L}"
        )));
    }
    Ok(())
}

impl ExperimentConfig {
    /// Validates the section used by `kind`.
    pub fn validate(&self, kind: ExperimentKind) -> Result<()> {
        if self.workers == Some(0) {
            return Err(CliError::config("workers must be at least 1"));
        }
        self.avqite
            .validate()
            .map_err(|e| CliError::config(format!("avqite: {e}")))?;
        let what = kind.name();
        match kind {
            ExperimentKind::BasisStudy => {
                let c = &self.basis_study;
                check_model(what, c.l, c.h, c.mu)?;
                check_dense(what, c.l)?;
                check_betas(what, &[c.beta])?;
                c.walk.check(what)?;
                if c.schedules.is_empty() {
                    return Err(CliError::config("basis-study: schedules list is empty"));
                }
            }
            ExperimentKind::Eos => {
                let c = &self.eos;
                for h in &c.h_values {
                    check_model(what, c.l, *h, 0.0)?;
                }
                check_dense(what, c.l)?;
                check_betas(what, &c.betas)?;
                c.walk.check(what)?;
                if c.h_values.is_empty() {
                    return Err(CliError::config("eos: h_values is empty"));
                }
                if !(c.mu_step > 0.0) || !(c.mu_max >= c.mu_min) {
                    return Err(CliError::config("eos: need mu_step > 0 and mu_max >= mu_min"));
                }
            }
            ExperimentKind::Friedel | ExperimentKind::Strings | ExperimentKind::EdReference => {
                let (l, cases, betas) = match kind {
                    ExperimentKind::Friedel => (self.friedel.l, &self.friedel.cases, &self.friedel.betas),
                    ExperimentKind::Strings => (self.strings.l, &self.strings.cases, &self.strings.betas),
                    _ => (self.ed_reference.l, &self.ed_reference.cases, &self.ed_reference.betas),
                };
                if cases.is_empty() {
                    return Err(CliError::config(format!("{what}: cases list is empty")));
                }
                for c in cases {
                    check_model(what, l, c.h, c.mu)?;
                }
                check_dense(what, l)?;
                check_betas(what, betas)?;
                match kind {
                    ExperimentKind::Friedel => self.friedel.walk.check(what)?,
                    ExperimentKind::Strings => {
                        self.strings.walk.check(what)?;
                        if self.strings.shots == 0 {
                            return Err(CliError::config("strings: shots must be at least 1"));
                        }
                    }
                    _ => {}
                }
            }
            ExperimentKind::AvqiteAccuracy => {
                let c = &self.avqite_accuracy;
                check_model(what, c.l, c.h, c.mu)?;
                check_dense(what, c.l)?;
                check_betas(what, &c.betas)?;
                if c.bases.is_empty() || c.samples == 0 {
                    return Err(CliError::config(
                        "avqite-accuracy: need at least one basis and one sample",
                    ));
                }
            }
            ExperimentKind::Avqmetts => {
                let c = &self.avqmetts;
                check_model(what, c.l, c.h, c.mu)?;
                check_dense(what, c.l)?;
                check_betas(what, &c.betas)?;
                c.walk.check(what)?;
                if c.schedules.is_empty() {
                    return Err(CliError::config("avqmetts: schedules list is empty"));
                }
            }
            ExperimentKind::NcxScaling => {
                let c = &self.ncx_scaling;
                check_betas(what, &c.betas)?;
                if !(c.filling > 0.0 && c.filling < 1.0) {
                    return Err(CliError::config("ncx-scaling: filling must lie in (0, 1)"));
                }
                if c.samples == 0 || c.series.is_empty() {
                    return Err(CliError::config("ncx-scaling: need at least one series and one sample"));
                }
                for s in &c.series {
                    if s.lengths.is_empty() {
                        return Err(CliError::config(format!(
                            "ncx-scaling: {} series has no lengths",
                            s.basis
                        )));
                    }
                    for l in &s.lengths {
                        check_model(what, *l, c.h, 0.0)?;
                    }
                }
                if !c.series.iter().any(|s| distinct(&s.lengths) >= 3) {
                    return Err(CliError::config(
                        "ncx-scaling: the power-law fit needs a series with at least 3 distinct lengths",
                    ));
                }
            }
        }
        Ok(())
    }
}

pub(crate) fn distinct(lengths: &[usize]) -> usize {
    let mut v = lengths.to_vec();
    v.sort_unstable();
    v.dedup();
    v.len()
}
