use serde::Serialize;
use z2metts_core::metts::{run_chain, Backend, Measurements};
use z2metts_core::model::ModelParams;
use z2metts_core::observables::{chain_histogram, RunKind, StringHistogram};

use super::{sub_seed, walk_config};
use crate::config::ExperimentConfig;
use crate::error::Result;
use crate::output::{f, OutDir};

#[derive(Clone, Debug, Serialize)]
pub struct StringsRow {
    pub h: f64,
    pub mu: f64,
    pub beta: f64,
    pub histogram: StringHistogram,
}

/// String and anti-string length distributions from z-basis shots of every METTS.
pub fn run_strings(cfg: &ExperimentConfig, out: &OutDir) -> Result<Vec<StringsRow>> {
    let c = &cfg.strings;
    let mut rows = Vec::new();
    for case in &c.cases {
        let params = ModelParams::new(c.l, case.h, case.mu)?;
        for &beta in &c.betas {
            let seed = sub_seed(cfg.seed, &format!("strings/h={}/mu={}/beta={beta}", case.h, case.mu));
            let walk = walk_config(&c.walk, c.schedule, seed, Backend::Exact);
            let set = run_chain(&params, beta, &walk, &Measurements::new().with_bitstrings(c.shots))?;
            rows.push(StringsRow {
                h: case.h,
                mu: case.mu,
                beta,
                histogram: chain_histogram(&set)?,
            });
        }
    }
    let mut table = Vec::new();
    let mut summary = Vec::new();
    for r in &rows {
        let hist = &r.histogram;
        for (kind, name) in [(RunKind::String, "string"), (RunKind::Antistring, "antistring")] {
            for l in hist.lengths() {
                let c_l = hist.c(kind, l);
                if c_l > 0.0 {
                    table.push(vec![
                        f(r.h),
                        f(r.mu),
                        f(r.beta),
                        name.to_string(),
                        l.to_string(),
                        f(c_l),
                        f(hist.c_stderr(kind, l)),
                    ]);
                }
            }
        }
        summary.push(vec![
            f(r.h),
            f(r.mu),
            f(r.beta),
            hist.total_samples.to_string(),
            f(hist.mean_length(RunKind::String)),
            f(hist.mean_length(RunKind::Antistring)),
            f(hist.length_variance(RunKind::String)),
            f(hist.length_variance(RunKind::Antistring)),
        ]);
    }
    out.csv(
        "histograms.csv",
        &["h", "mu", "beta", "kind", "l", "C_l", "stderr"],
        &table,
    )?;
    out.csv(
        "summary.csv",
        &[
            "h",
            "mu",
            "beta",
            "samples",
            "string_mean",
            "antistring_mean",
            "string_var",
            "antistring_var",
        ],
        &summary,
    )?;
    Ok(rows)
}
