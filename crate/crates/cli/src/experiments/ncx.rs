use rayon::prelude::*;
use serde::Serialize;
use z2metts_core::avqite::evolve_checkpoints;
use z2metts_core::metts::{run_chain, CollapseSchedule, Measurements, WalkConfig};
use z2metts_core::model::{build_grand_canonical, build_pool, ModelParams};
use z2metts_core::rng::{stream_rng, Purpose};
use z2metts_core::statevector::{Basis, ClassicalProductState};

use super::sub_seed;
use crate::calibrate::calibrate_mu;
use crate::config::{CpsSource, ExperimentConfig};
use crate::error::{CliError, Result};
use crate::output::{f, OutDir};

#[derive(Clone, Debug, Serialize)]
pub struct NcxRow {
    pub basis: Basis,
    pub l: usize,
    pub beta: f64,
    pub index: usize,
    pub n_cx: usize,
    pub n_theta: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct NcxSummary {
    pub basis: Basis,
    pub l: usize,
    pub mu: f64,
    pub beta: f64,
    pub samples: usize,
    pub mean: f64,
    pub std: f64,
    pub min: usize,
    pub max: usize,
}

/// `N_CX ~ a L^b`.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct NcxFit {
    pub basis: Basis,
    pub beta: f64,
    pub a: f64,
    pub b: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct NcxResult {
    pub rows: Vec<NcxRow>,
    pub summaries: Vec<NcxSummary>,
    pub fits: Vec<NcxFit>,
}

impl NcxResult {
    pub fn summary(&self, basis: Basis, l: usize, beta: f64) -> Option<&NcxSummary> {
        self.summaries
            .iter()
            .find(|s| s.basis == basis && s.l == l && s.beta == beta)
    }

    pub fn fit(&self, basis: Basis, beta: f64) -> Option<&NcxFit> {
        self.fits.iter().find(|s| s.basis == basis && s.beta == beta)
    }
}

/// Least-squares line through `(log L, log y)`; returns `(a, b)`.
pub fn power_law_fit(points: &[(f64, f64)]) -> Result<(f64, f64)> {
    if points.len() < 3 {
        return Err(CliError::config(format!(
            "power-law fit needs at least 3 lengths, got {}",
            points.len()
        )));
    }
    if let Some((x, y)) = points.iter().find(|(x, y)| !(*x > 0.0 && *y > 0.0)) {
        return Err(CliError::config(format!(
            "power-law fit needs positive data, got ({x}, {y})"
        )));
    }
    let n = points.len() as f64;
    let (lx, ly): (Vec<f64>, Vec<f64>) = points.iter().map(|(x, y)| (x.ln(), y.ln())).unzip();
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxx: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    if sxx == 0.0 {
        return Err(CliError::config("power-law fit needs distinct lengths"));
    }
    let b = sxy / sxx;
    Ok(((my - b * mx).exp(), b))
}

fn sample_cps(
    basis: Basis,
    params: &ModelParams,
    beta: f64,
    samples: usize,
    source: CpsSource,
    seed: u64,
) -> Result<Vec<ClassicalProductState>> {
    match source {
        CpsSource::Uniform => Ok((0..samples)
            .map(|i| {
                ClassicalProductState::random(
                    basis,
                    params.n_sites(),
                    &mut stream_rng(seed, i as u32, 0, Purpose::InitialState),
                )
            })
            .collect()),
        CpsSource::Thermal => {
            let walk = WalkConfig::new(samples, 1, CollapseSchedule::Fixed(basis), seed);
            let set = run_chain(params, beta, &walk, &Measurements::new())?;
            Ok(set.kept().map(|r| r.cps.clone()).collect())
        }
    }
}

/// Two-qubit gate counts of converged AVQITE ansatze across system sizes.
pub fn run_ncx_scaling(cfg: &ExperimentConfig, out: &OutDir) -> Result<NcxResult> {
    let c = &cfg.ncx_scaling;
    let mut betas = c.betas.clone();
    betas.sort_by(f64::total_cmp);
    betas.dedup();
    let taus: Vec<f64> = betas.iter().map(|b| b / 2.0).collect();

    let mut rows = Vec::new();
    let mut summaries = Vec::new();
    let mut fits = Vec::new();
    for series in &c.series {
        let basis = series.basis;
        for &l in &series.lengths {
            let plateau = calibrate_mu(l, c.h, c.filling)?;
            let params = ModelParams::new(l, c.h, plateau.mu)?;
            let h_gc = build_grand_canonical(&params)?;
            let pool = build_pool(basis, l)?;
            let seed = sub_seed(cfg.seed, &format!("ncx-scaling/{basis}/L={l}"));
            // thermal CPSs are drawn once, at the largest beta
            let cps = sample_cps(
                basis,
                &params,
                *betas.last().expect("validated"),
                c.samples,
                c.cps_source,
                seed,
            )?;
            let counts: Vec<Vec<(usize, usize)>> = cps
                .par_iter()
                .map(|s| {
                    let evs = evolve_checkpoints(s, &h_gc, &taus, &pool, &cfg.avqite)?;
                    Ok(evs.iter().map(|e| (e.report.n_cx, e.report.n_theta)).collect())
                })
                .collect::<z2metts_core::Result<_>>()?;
            for (k, &beta) in betas.iter().enumerate() {
                let vals: Vec<usize> = counts.iter().map(|v| v[k].0).collect();
                for (i, v) in counts.iter().enumerate() {
                    rows.push(NcxRow {
                        basis,
                        l,
                        beta,
                        index: i,
                        n_cx: v[k].0,
                        n_theta: v[k].1,
                    });
                }
                let m = vals.len() as f64;
                let mean = vals.iter().sum::<usize>() as f64 / m;
                let var = if vals.len() > 1 {
                    vals.iter().map(|&v| (v as f64 - mean).powi(2)).sum::<f64>() / (m - 1.0)
                } else {
                    0.0
                };
                summaries.push(NcxSummary {
                    basis,
                    l,
                    mu: plateau.mu,
                    beta,
                    samples: vals.len(),
                    mean,
                    std: var.sqrt(),
                    min: vals.iter().copied().min().unwrap_or(0),
                    max: vals.iter().copied().max().unwrap_or(0),
                });
            }
        }
        if crate::config::distinct(&series.lengths) >= 3 {
            for &beta in &betas {
                let pts: Vec<(f64, f64)> = summaries
                    .iter()
                    .filter(|s| s.basis == basis && s.beta == beta)
                    .map(|s| (s.l as f64, s.mean))
                    .collect();
                let (a, b) = power_law_fit(&pts)?;
                fits.push(NcxFit { basis, beta, a, b });
            }
        }
    }

    let table: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            vec![
                r.basis.to_string(),
                r.l.to_string(),
                f(r.beta),
                r.index.to_string(),
                r.n_cx.to_string(),
                r.n_theta.to_string(),
            ]
        })
        .collect();
    out.csv("ncx.csv", &["basis", "L", "beta", "index", "n_cx", "n_theta"], &table)?;
    let summary: Vec<Vec<String>> = summaries
        .iter()
        .map(|s| {
            vec![
                s.basis.to_string(),
                s.l.to_string(),
                f(s.mu),
                f(s.beta),
                s.samples.to_string(),
                f(s.mean),
                f(s.std),
                s.min.to_string(),
                s.max.to_string(),
            ]
        })
        .collect();
    out.csv(
        "summary.csv",
        &["basis", "L", "mu", "beta", "samples", "mean", "std", "min", "max"],
        &summary,
    )?;
    let fit: Vec<Vec<String>> = fits
        .iter()
        .map(|x| vec![x.basis.to_string(), f(x.beta), f(x.a), f(x.b)])
        .collect();
    out.csv("fit.csv", &["basis", "beta", "a", "b"], &fit)?;
    Ok(NcxResult { rows, summaries, fits })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fit_recovers_exact_power_law() {
        let pts: Vec<(f64, f64)> = [8.0, 12.0, 16.0]
            .iter()
            .map(|&l: &f64| (l, 0.5 * l.powf(1.8)))
            .collect();
        let (a, b) = power_law_fit(&pts).unwrap();
        assert!((a - 0.5).abs() < 1e-12 && (b - 1.8).abs() < 1e-12);
    }

    #[test]
    fn fit_needs_three_points() {
        let err = power_law_fit(&[(8.0, 1.0), (12.0, 2.0)]).unwrap_err();
        assert_eq!(err.exit_code(), 2);
    }
}
