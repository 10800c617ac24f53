use serde::Serialize;
use z2metts_core::metts::{relative_error, run_chain, running_estimates, Backend, CollapseSchedule, Estimate};
use z2metts_core::model::ModelParams;

use super::{energy_and_number, sub_seed, walk_config};
use crate::config::ExperimentConfig;
use crate::error::Result;
use crate::output::{f, OutDir};
use crate::reference::reference;

#[derive(Clone, Debug, Serialize)]
pub struct RunningRow {
    /// Kept steps per walk included in the averages.
    pub k: usize,
    pub eps: Estimate,
    pub n: Estimate,
    pub delta_eps: f64,
    pub delta_n: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct ScheduleRun {
    pub schedule: CollapseSchedule,
    pub running: Vec<RunningRow>,
}

impl ScheduleRun {
    pub fn at(&self, k: usize) -> Option<&RunningRow> {
        self.running.iter().find(|r| r.k == k)
    }

    pub fn last(&self) -> &RunningRow {
        self.running.last().expect("at least one kept step")
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct BasisStudyResult {
    pub eps_ed: f64,
    pub n_ed: f64,
    pub runs: Vec<ScheduleRun>,
}

impl BasisStudyResult {
    pub fn run(&self, schedule: &str) -> Option<&ScheduleRun> {
        self.runs.iter().find(|r| r.schedule.to_string() == schedule)
    }
}

/// Running energy and particle densities against kept thermal steps, one
/// chain per collapse schedule.
pub fn run_basis_study(cfg: &ExperimentConfig, out: &OutDir) -> Result<BasisStudyResult> {
    let c = &cfg.basis_study;
    let params = ModelParams::new(c.l, c.h, c.mu)?;
    let r = reference(&params)?;
    let (eps_ed, n_ed) = (r.energy_density(c.beta, c.mu)?, r.particle_density(c.beta, c.mu)?);
    let meas = energy_and_number(&params)?;
    let l = c.l as f64;

    let mut runs = Vec::new();
    let mut rows = Vec::new();
    for sched in &c.schedules {
        let walk = walk_config(
            &c.walk,
            *sched,
            sub_seed(cfg.seed, &format!("basis-study/{sched}")),
            Backend::Exact,
        );
        let set = run_chain(&params, c.beta, &walk, &meas)?;
        if c.write_samples {
            out.with_writer(&format!("samples_{sched}.csv"), |w| set.write_csv(w))?;
            out.with_writer(&format!("samples_{sched}.json"), |w| set.write_metadata(w))?;
        }
        let e_run = running_estimates(&set, "H")?;
        let n_run = running_estimates(&set, "N")?;
        let mut running = Vec::new();
        for ((k, e), (_, n)) in e_run.into_iter().zip(n_run) {
            let eps = scale(e, l);
            let n = scale(n, l);
            let row = RunningRow {
                k,
                delta_eps: relative_error(eps.mean, eps_ed)?,
                delta_n: relative_error(n.mean, n_ed)?,
                eps,
                n,
            };
            rows.push(vec![
                sched.to_string(),
                k.to_string(),
                row.eps.count.to_string(),
                f(row.eps.mean),
                f(row.eps.stderr),
                f(row.n.mean),
                f(row.n.stderr),
                f(row.delta_eps),
                f(row.delta_n),
            ]);
            running.push(row);
        }
        runs.push(ScheduleRun {
            schedule: *sched,
            running,
        });
    }
    out.csv(
        "running.csv",
        &[
            "schedule",
            "k",
            "samples",
            "eps",
            "eps_stderr",
            "n",
            "n_stderr",
            "delta_eps",
            "delta_n",
        ],
        &rows,
    )?;
    let mut summary: Vec<Vec<String>> = runs
        .iter()
        .map(|r| {
            let last = r.last();
            vec![
                r.schedule.to_string(),
                f(last.eps.mean),
                f(last.eps.stderr),
                f(last.n.mean),
                f(last.n.stderr),
                f(last.delta_eps),
                f(last.delta_n),
            ]
        })
        .collect();
    summary.push(vec![
        "ed".into(),
        f(eps_ed),
        "0.0".into(),
        f(n_ed),
        "0.0".into(),
        "0.0".into(),
        "0.0".into(),
    ]);
    out.csv(
        "summary.csv",
        &["schedule", "eps", "eps_stderr", "n", "n_stderr", "delta_eps", "delta_n"],
        &summary,
    )?;
    Ok(BasisStudyResult { eps_ed, n_ed, runs })
}

pub(crate) fn scale(e: Estimate, l: f64) -> Estimate {
    Estimate {
        mean: e.mean / l,
        stderr: e.stderr / l,
        count: e.count,
    }
}
