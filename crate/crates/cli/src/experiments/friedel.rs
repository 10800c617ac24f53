use serde::Serialize;
use z2metts_core::metts::{run_chain, Backend, Measurements};
use z2metts_core::model::ModelParams;
use z2metts_core::observables::{count_peaks, occupation_profile, ProfileEstimate};

use super::{sub_seed, walk_config};
use crate::config::ExperimentConfig;
use crate::error::Result;
use crate::output::{f, OutDir};
use crate::reference::reference;

#[derive(Clone, Debug, Serialize)]
pub struct FriedelRow {
    pub h: f64,
    pub mu: f64,
    pub beta: f64,
    pub profile: ProfileEstimate,
    pub ed: Vec<f64>,
    pub peaks: usize,
    pub ed_peaks: usize,
}

/// Site-resolved occupations for every `(h, mu)` case and temperature.
pub fn run_friedel(cfg: &ExperimentConfig, out: &OutDir) -> Result<Vec<FriedelRow>> {
    let c = &cfg.friedel;
    let mut rows = Vec::new();
    for case in &c.cases {
        let params = ModelParams::new(c.l, case.h, case.mu)?;
        let r = reference(&params)?;
        for &beta in &c.betas {
            let seed = sub_seed(cfg.seed, &format!("friedel/h={}/mu={}/beta={beta}", case.h, case.mu));
            let walk = walk_config(&c.walk, c.schedule, seed, Backend::Exact);
            let set = run_chain(&params, beta, &walk, &Measurements::new().with_occupations())?;
            let profile = occupation_profile(&set)?;
            let ed = r.occupations(beta, case.mu)?;
            rows.push(FriedelRow {
                h: case.h,
                mu: case.mu,
                beta,
                peaks: count_peaks(&profile.values),
                ed_peaks: count_peaks(&ed),
                profile,
                ed,
            });
        }
    }
    let mut table = Vec::new();
    for r in &rows {
        for (i, ((v, s), e)) in r.profile.values.iter().zip(&r.profile.stderr).zip(&r.ed).enumerate() {
            table.push(vec![
                f(r.h),
                f(r.mu),
                f(r.beta),
                (i + 1).to_string(),
                f(*v),
                f(*s),
                f(*e),
            ]);
        }
    }
    out.csv(
        "profiles.csv",
        &["h", "mu", "beta", "site", "value", "stderr", "ed"],
        &table,
    )?;
    let peaks: Vec<Vec<String>> = rows
        .iter()
        .map(|r| vec![f(r.h), f(r.mu), f(r.beta), r.peaks.to_string(), r.ed_peaks.to_string()])
        .collect();
    out.csv("peaks.csv", &["h", "mu", "beta", "peaks", "ed_peaks"], &peaks)?;
    Ok(rows)
}
