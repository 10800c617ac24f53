use serde::Serialize;
use z2metts_core::metts::{blocked_estimate, estimate, run_chain, Backend, Estimate};
use z2metts_core::model::{free_fermion_reference, ModelParams};

use super::basis_study::scale;
use super::{energy_and_number, sub_seed, walk_config};
use crate::config::ExperimentConfig;
use crate::error::Result;
use crate::output::{f, OutDir};
use crate::reference::reference;

#[derive(Clone, Debug, Serialize)]
pub struct EosRow {
    pub h: f64,
    pub beta: f64,
    pub mu: f64,
    pub eps: Estimate,
    pub n: Estimate,
    /// Errors from per-walk means, which absorb autocorrelation along each walk.
    pub eps_blocked: Estimate,
    pub n_blocked: Estimate,
    pub eps_ed: f64,
    pub n_ed: f64,
    /// Free-fermion values, present when `h = 0`.
    pub free_fermion: Option<(f64, f64)>,
}

/// Energy density against particle density over a chemical-potential grid.
pub fn run_eos(cfg: &ExperimentConfig, out: &OutDir) -> Result<Vec<EosRow>> {
    let c = &cfg.eos;
    let l = c.l as f64;
    let mut rows = Vec::new();
    for &h in &c.h_values {
        let r = reference(&ModelParams::new(c.l, h, 0.0)?)?;
        for &beta in &c.betas {
            for (k, mu) in c.mu_grid().into_iter().enumerate() {
                let params = ModelParams::new(c.l, h, mu)?;
                let seed = sub_seed(cfg.seed, &format!("eos/h={h}/beta={beta}/{k}"));
                let walk = walk_config(&c.walk, c.schedule, seed, Backend::Exact);
                let set = run_chain(&params, beta, &walk, &energy_and_number(&params)?)?;
                rows.push(EosRow {
                    h,
                    beta,
                    mu,
                    eps: scale(estimate(&set, "H")?, l),
                    n: scale(estimate(&set, "N")?, l),
                    eps_blocked: scale(blocked_estimate(&set, "H")?, l),
                    n_blocked: scale(blocked_estimate(&set, "N")?, l),
                    eps_ed: r.energy_density(beta, mu)?,
                    n_ed: r.particle_density(beta, mu)?,
                    free_fermion: if h == 0.0 {
                        Some(free_fermion_reference(c.l, beta, mu)?)
                    } else {
                        None
                    },
                });
            }
        }
    }
    let table: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            let (ef, nf) = r.free_fermion.map(|(e, n)| (f(e), f(n))).unwrap_or_default();
            vec![
                f(r.h),
                f(r.beta),
                f(r.mu),
                f(r.eps.mean),
                f(r.eps.stderr),
                f(r.n.mean),
                f(r.n.stderr),
                f(r.eps_blocked.stderr),
                f(r.n_blocked.stderr),
                f(r.eps_ed),
                f(r.n_ed),
                ef,
                nf,
            ]
        })
        .collect();
    out.csv(
        "eos.csv",
        &[
            "h",
            "beta",
            "mu",
            "eps",
            "eps_stderr",
            "n",
            "n_stderr",
            "eps_stderr_blocked",
            "n_stderr_blocked",
            "eps_ed",
            "n_ed",
            "eps_free",
            "n_free",
        ],
        &table,
    )?;
    Ok(rows)
}
