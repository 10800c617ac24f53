use serde::Serialize;
use z2metts_core::model::ModelParams;

use crate::config::ExperimentConfig;
use crate::error::Result;
use crate::output::{f, OutDir};
use crate::reference::reference;

#[derive(Clone, Debug, Serialize)]
pub struct EdRow {
    pub h: f64,
    pub mu: f64,
    pub beta: f64,
    pub eps: f64,
    pub n: f64,
    pub occupations: Vec<f64>,
}

/// Exact thermal densities and occupation profiles.
pub fn run_ed_reference(cfg: &ExperimentConfig, out: &OutDir) -> Result<Vec<EdRow>> {
    let c = &cfg.ed_reference;
    let mut rows = Vec::new();
    for case in &c.cases {
        let r = reference(&ModelParams::new(c.l, case.h, case.mu)?)?;
        for &beta in &c.betas {
            rows.push(EdRow {
                h: case.h,
                mu: case.mu,
                beta,
                eps: r.energy_density(beta, case.mu)?,
                n: r.particle_density(beta, case.mu)?,
                occupations: r.occupations(beta, case.mu)?,
            });
        }
    }
    let mut header: Vec<String> = ["h", "mu", "beta", "eps", "n"].iter().map(|s| s.to_string()).collect();
    header.extend((1..=c.l).map(|i| format!("n_{i}")));
    let table: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            let mut row = vec![f(r.h), f(r.mu), f(r.beta), f(r.eps), f(r.n)];
            row.extend(r.occupations.iter().map(|v| f(*v)));
            row
        })
        .collect();
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    out.csv("ed.csv", &header, &table)?;
    Ok(rows)
}
