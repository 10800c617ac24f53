use serde::Serialize;
use z2metts_core::metts::{estimate_values, relative_error, run_chain, Backend, CollapseSchedule, Estimate};
use z2metts_core::model::ModelParams;

use super::{energy_and_number, sub_seed, walk_config};
use crate::config::ExperimentConfig;
use crate::error::Result;
use crate::output::{f, OutDir};
use crate::reference::reference;

#[derive(Clone, Debug, Serialize)]
pub struct AvqmettsPoint {
    pub schedule: CollapseSchedule,
    pub beta: f64,
    pub eps: Estimate,
    pub n: Estimate,
    pub eps_ed: f64,
    pub n_ed: f64,
    pub delta_eps: f64,
    pub delta_n: f64,
    pub mean_n_cx: f64,
    /// Energy and particle densities averaged over walks at each thermal
    /// step, warm-up steps included.
    pub per_step: Vec<(usize, Estimate, Estimate)>,
}

#[derive(Clone, Debug, Serialize)]
pub struct AvqmettsResult {
    pub points: Vec<AvqmettsPoint>,
}

impl AvqmettsResult {
    pub fn max_delta(&self, schedule: &str) -> Option<(f64, f64)> {
        let pts: Vec<_> = self
            .points
            .iter()
            .filter(|p| p.schedule.to_string() == schedule)
            .collect();
        (!pts.is_empty()).then(|| {
            pts.iter()
                .fold((0.0f64, 0.0f64), |(e, n), p| (e.max(p.delta_eps), n.max(p.delta_n)))
        })
    }
}

/// METTS chains with the AVQITE backend across temperatures.
pub fn run_avqmetts(cfg: &ExperimentConfig, out: &OutDir) -> Result<AvqmettsResult> {
    let c = &cfg.avqmetts;
    let params = ModelParams::new(c.l, c.h, c.mu)?;
    let r = reference(&params)?;
    let meas = energy_and_number(&params)?;
    let lf = c.l as f64;

    let mut points = Vec::new();
    for sched in &c.schedules {
        for &beta in &c.betas {
            let seed = sub_seed(cfg.seed, &format!("avqmetts/{sched}/beta={beta}"));
            let mut walk = walk_config(&c.walk, *sched, seed, Backend::Avqite(cfg.avqite));
            walk.keep_traces = true;
            let set = run_chain(&params, beta, &walk, &meas)?;
            out.with_writer(&format!("traces_{sched}_beta{beta}.jsonl"), |w| {
                set.write_traces_jsonl(w)
            })?;
            out.with_writer(&format!("samples_{sched}_beta{beta}.csv"), |w| set.write_csv(w))?;

            let (ie, inn) = (set.column_index("H")?, set.column_index("N")?);
            let kept: Vec<_> = set.kept().collect();
            let eps = estimate_values(&kept.iter().map(|s| s.values[ie] / lf).collect::<Vec<_>>())?;
            let n = estimate_values(&kept.iter().map(|s| s.values[inn] / lf).collect::<Vec<_>>())?;
            let n_cx: Vec<f64> = kept
                .iter()
                .filter_map(|s| s.avqite.as_ref().map(|a| a.n_cx as f64))
                .collect();
            let mut per_step = Vec::new();
            for step in 1..=set.meta.steps_per_walk {
                let at: Vec<_> = set.records.iter().filter(|s| s.step == step).collect();
                let e = estimate_values(&at.iter().map(|s| s.values[ie] / lf).collect::<Vec<_>>())?;
                let nn = estimate_values(&at.iter().map(|s| s.values[inn] / lf).collect::<Vec<_>>())?;
                per_step.push((step, e, nn));
            }
            let (eps_ed, n_ed) = (r.energy_density(beta, c.mu)?, r.particle_density(beta, c.mu)?);
            points.push(AvqmettsPoint {
                schedule: *sched,
                beta,
                delta_eps: relative_error(eps.mean, eps_ed)?,
                delta_n: relative_error(n.mean, n_ed)?,
                eps,
                n,
                eps_ed,
                n_ed,
                mean_n_cx: n_cx.iter().sum::<f64>() / n_cx.len().max(1) as f64,
                per_step,
            });
        }
    }

    let table: Vec<Vec<String>> = points
        .iter()
        .map(|p| {
            vec![
                p.schedule.to_string(),
                f(p.beta),
                p.eps.count.to_string(),
                f(p.eps.mean),
                f(p.eps.stderr),
                f(p.n.mean),
                f(p.n.stderr),
                f(p.eps_ed),
                f(p.n_ed),
                f(p.delta_eps),
                f(p.delta_n),
                f(p.mean_n_cx),
            ]
        })
        .collect();
    out.csv(
        "thermal.csv",
        &[
            "schedule",
            "beta",
            "samples",
            "eps",
            "eps_stderr",
            "n",
            "n_stderr",
            "eps_ed",
            "n_ed",
            "delta_eps",
            "delta_n",
            "mean_n_cx",
        ],
        &table,
    )?;
    let mut steps = Vec::new();
    for p in &points {
        for (step, e, n) in &p.per_step {
            steps.push(vec![
                p.schedule.to_string(),
                f(p.beta),
                step.to_string(),
                f(e.mean),
                f(e.stderr),
                f(n.mean),
                f(n.stderr),
            ]);
        }
    }
    out.csv(
        "steps.csv",
        &["schedule", "beta", "step", "eps", "eps_stderr", "n", "n_stderr"],
        &steps,
    )?;
    Ok(AvqmettsResult { points })
}
