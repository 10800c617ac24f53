//! One driver per experiment. Every driver returns its results in memory and
//! writes them as CSV/JSON under the output directory.

mod accuracy;
mod avqmetts;
mod basis_study;
mod ed_reference;
mod eos;
mod friedel;
mod ncx;
mod strings;

pub use accuracy::{run_avqite_accuracy, AccuracyAggregate, AccuracyResult, AccuracyRow};
pub use avqmetts::{run_avqmetts, AvqmettsPoint, AvqmettsResult};
pub use basis_study::{run_basis_study, BasisStudyResult, RunningRow, ScheduleRun};
pub use ed_reference::{run_ed_reference, EdRow};
pub use eos::{run_eos, EosRow};
pub use friedel::{run_friedel, FriedelRow};
pub use ncx::{power_law_fit, run_ncx_scaling, NcxFit, NcxResult, NcxRow, NcxSummary};
pub use strings::{run_strings, StringsRow};

use z2metts_core::metts::{Backend, CollapseSchedule, Measurements, WalkConfig};
use z2metts_core::model::{build_hamiltonian, build_number_operator, ModelParams};

use crate::config::{ExperimentConfig, ExperimentKind, WalkSize};
use crate::error::Result;
use crate::output::OutDir;

/// Deterministic per-task seed from the master seed and a label.
pub fn sub_seed(seed: u64, label: &str) -> u64 {
    // FNV-1a of the label, then a splitmix64 finalizer over the combination
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in label.bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    let mut z = seed ^ h;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

pub(crate) fn walk_config(size: &WalkSize, schedule: CollapseSchedule, seed: u64, backend: Backend) -> WalkConfig {
    WalkConfig {
        s_w: size.s_w,
        s_0: size.s_0,
        warmup: size.warmup,
        schedule,
        master_seed: seed,
        backend,
        keep_traces: false,
    }
}

/// Bare `H` and `N` columns.
pub(crate) fn energy_and_number(params: &ModelParams) -> Result<Measurements> {
    Ok(Measurements::new()
        .with("H", build_hamiltonian(&params.with_mu(0.0))?)
        .with("N", build_number_operator(params.l)?))
}

/// Runs `kind` and writes its outputs (without the manifest).
pub fn run(kind: ExperimentKind, cfg: &ExperimentConfig, out: &OutDir) -> Result<()> {
    cfg.validate(kind)?;
    match kind {
        ExperimentKind::BasisStudy => run_basis_study(cfg, out).map(drop),
        ExperimentKind::Eos => run_eos(cfg, out).map(drop),
        ExperimentKind::Friedel => run_friedel(cfg, out).map(drop),
        ExperimentKind::Strings => run_strings(cfg, out).map(drop),
        ExperimentKind::AvqiteAccuracy => run_avqite_accuracy(cfg, out).map(drop),
        ExperimentKind::Avqmetts => run_avqmetts(cfg, out).map(drop),
        ExperimentKind::NcxScaling => run_ncx_scaling(cfg, out).map(drop),
        ExperimentKind::EdReference => run_ed_reference(cfg, out).map(drop),
    }
}
