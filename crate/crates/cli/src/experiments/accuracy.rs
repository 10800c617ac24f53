use rayon::prelude::*;
use serde::Serialize;
use z2metts_core::avqite::{evolve_checkpoints, Evolution};
use z2metts_core::metts::{avqite_deviation, spread_metric};
use z2metts_core::model::{build_grand_canonical, build_pool, ModelParams};
use z2metts_core::rng::{stream_rng, Purpose};
use z2metts_core::statevector::{
    exact_ite_with, fidelity, Basis, ClassicalProductState, KrylovOptions, KrylovPropagator,
};

use super::sub_seed;
use crate::config::ExperimentConfig;
use crate::error::Result;
use crate::output::{f, OutDir};
use crate::reference::reference;

/// Below this `|N_AV - N_ITE|` the particle-number deviation counts as zero.
const ZERO_DEVIATION: f64 = 1e-10;

#[derive(Clone, Debug, Serialize)]
pub struct AccuracyRow {
    pub basis: Basis,
    pub beta: f64,
    pub index: usize,
    pub cps: String,
    pub infidelity: f64,
    /// Energy and particle densities of the AVQITE and exact states.
    pub eps_av: f64,
    pub eps_ite: f64,
    pub n_av: f64,
    pub n_ite: f64,
    pub delta_e: f64,
    pub delta_n: f64,
    pub n_theta: usize,
    pub n_cx: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct AccuracyAggregate {
    pub basis: Basis,
    pub beta: f64,
    pub samples: usize,
    pub d_e_av: f64,
    pub d_n_av: f64,
    pub d_e_ite: f64,
    pub d_n_ite: f64,
    pub max_infidelity: f64,
    pub zero_delta_n_fraction: f64,
    pub mean_n_cx: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct AccuracyResult {
    pub eps_ed: Vec<(f64, f64)>,
    pub n_ed: Vec<(f64, f64)>,
    pub rows: Vec<AccuracyRow>,
    pub aggregates: Vec<AccuracyAggregate>,
}

impl AccuracyResult {
    pub fn aggregate(&self, basis: Basis, beta: f64) -> Option<&AccuracyAggregate> {
        self.aggregates.iter().find(|a| a.basis == basis && a.beta == beta)
    }
}

/// AVQITE against exact ITE for random CPSs in each basis, every CPS
/// evolved once through all `beta/2` checkpoints.
pub fn run_avqite_accuracy(cfg: &ExperimentConfig, out: &OutDir) -> Result<AccuracyResult> {
    let c = &cfg.avqite_accuracy;
    let params = ModelParams::new(c.l, c.h, c.mu)?;
    let r = reference(&params)?;
    let h_gc = build_grand_canonical(&params)?;
    let prop = KrylovPropagator::new(&h_gc, KrylovOptions::default())?;
    let lf = c.l as f64;
    let n = params.n_sites();

    let mut betas = c.betas.clone();
    betas.sort_by(f64::total_cmp);
    betas.dedup();
    let taus: Vec<f64> = betas.iter().map(|b| b / 2.0).collect();
    let ed: Vec<(f64, f64)> = betas
        .iter()
        .map(|&b| Ok((r.energy_density(b, c.mu)?, r.particle_density(b, c.mu)?)))
        .collect::<Result<_>>()?;

    let mut rows = Vec::new();
    let mut aggregates = Vec::new();
    for &basis in &c.bases {
        let pool = build_pool(basis, c.l)?;
        let seed = sub_seed(cfg.seed, &format!("avqite-accuracy/{basis}"));
        let evolutions: Vec<(ClassicalProductState, Vec<Evolution>)> = (0..c.samples)
            .into_par_iter()
            .map(|i| {
                let cps =
                    ClassicalProductState::random(basis, n, &mut stream_rng(seed, i as u32, 0, Purpose::InitialState));
                let evs = evolve_checkpoints(&cps, &h_gc, &taus, &pool, &cfg.avqite)?;
                Ok((cps, evs))
            })
            .collect::<z2metts_core::Result<_>>()?;

        let per_cps: Vec<Vec<AccuracyRow>> = evolutions
            .par_iter()
            .enumerate()
            .map(|(i, (cps, evs))| {
                let mut out = Vec::with_capacity(taus.len());
                for (k, ev) in evs.iter().enumerate() {
                    let exact = exact_ite_with(&prop, cps, taus[k])?.state;
                    let (eps_ed, n_ed) = ed[k];
                    let eps_av = r.hamiltonian.expectation(&ev.state)? / lf;
                    let eps_ite = r.hamiltonian.expectation(&exact)? / lf;
                    let n_av = r.number.expectation(&ev.state)? / lf;
                    let n_ite = r.number.expectation(&exact)? / lf;
                    out.push(AccuracyRow {
                        basis,
                        beta: betas[k],
                        index: i,
                        cps: cps.label(),
                        infidelity: 1.0 - fidelity(&ev.state, &exact)?,
                        eps_av,
                        eps_ite,
                        n_av,
                        n_ite,
                        delta_e: avqite_deviation(eps_av, eps_ite, eps_ed)?,
                        delta_n: avqite_deviation(n_av, n_ite, n_ed)?,
                        n_theta: ev.report.n_theta,
                        n_cx: ev.report.n_cx,
                    });
                }
                Ok(out)
            })
            .collect::<z2metts_core::Result<_>>()?;

        out.with_writer(&format!("traces_{basis}.jsonl"), |w| write_traces(w, &evolutions))?;

        for (k, &beta) in betas.iter().enumerate() {
            let at: Vec<&AccuracyRow> = per_cps.iter().map(|v| &v[k]).collect();
            let pick = |g: fn(&AccuracyRow) -> f64| at.iter().map(|r| g(r)).collect::<Vec<f64>>();
            let (eps_ed, n_ed) = ed[k];
            let zeros = at
                .iter()
                .filter(|r| (r.n_av - r.n_ite).abs() * lf < ZERO_DEVIATION)
                .count();
            aggregates.push(AccuracyAggregate {
                basis,
                beta,
                samples: at.len(),
                d_e_av: spread_metric(&pick(|r| r.eps_av), eps_ed)?,
                d_n_av: spread_metric(&pick(|r| r.n_av), n_ed)?,
                d_e_ite: spread_metric(&pick(|r| r.eps_ite), eps_ed)?,
                d_n_ite: spread_metric(&pick(|r| r.n_ite), n_ed)?,
                max_infidelity: pick(|r| r.infidelity).into_iter().fold(0.0, f64::max),
                zero_delta_n_fraction: zeros as f64 / at.len() as f64,
                mean_n_cx: pick(|r| r.n_cx as f64).iter().sum::<f64>() / at.len() as f64,
            });
        }
        rows.extend(per_cps.into_iter().flatten());
    }

    let table: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            vec![
                r.basis.to_string(),
                f(r.beta),
                r.index.to_string(),
                r.cps.clone(),
                f(r.infidelity),
                f(r.eps_av),
                f(r.eps_ite),
                f(r.n_av),
                f(r.n_ite),
                f(r.delta_e),
                f(r.delta_n),
                r.n_theta.to_string(),
                r.n_cx.to_string(),
            ]
        })
        .collect();
    out.csv(
        "per_cps.csv",
        &[
            "basis",
            "beta",
            "index",
            "cps",
            "infidelity",
            "eps_av",
            "eps_ite",
            "n_av",
            "n_ite",
            "delta_e",
            "delta_n",
            "n_theta",
            "n_cx",
        ],
        &table,
    )?;
    let agg: Vec<Vec<String>> = aggregates
        .iter()
        .map(|a| {
            vec![
                a.basis.to_string(),
                f(a.beta),
                a.samples.to_string(),
                f(a.d_e_av),
                f(a.d_n_av),
                f(a.d_e_ite),
                f(a.d_n_ite),
                f(a.max_infidelity),
                f(a.zero_delta_n_fraction),
                f(a.mean_n_cx),
            ]
        })
        .collect();
    out.csv(
        "aggregate.csv",
        &[
            "basis",
            "beta",
            "samples",
            "D_E_av",
            "D_N_av",
            "D_E_ite",
            "D_N_ite",
            "max_infidelity",
            "zero_delta_n_fraction",
            "mean_n_cx",
        ],
        &agg,
    )?;
    Ok(AccuracyResult {
        eps_ed: betas.iter().zip(&ed).map(|(b, e)| (*b, e.0)).collect(),
        n_ed: betas.iter().zip(&ed).map(|(b, e)| (*b, e.1)).collect(),
        rows,
        aggregates,
    })
}

/// One JSON line per trace record of the longest checkpoint, tagged with the CPS.
fn write_traces<W: std::io::Write>(
    mut w: W,
    evolutions: &[(ClassicalProductState, Vec<Evolution>)],
) -> z2metts_core::Result<()> {
    #[derive(Serialize)]
    struct Line<'a> {
        index: usize,
        cps: String,
        #[serde(flatten)]
        rec: &'a z2metts_core::avqite::TraceRecord,
    }
    for (i, (cps, evs)) in evolutions.iter().enumerate() {
        let Some(last) = evs.last() else { continue };
        for rec in &last.report.trace {
            serde_json::to_writer(
                &mut w,
                &Line {
                    index: i,
                    cps: cps.label(),
                    rec,
                },
            )
            .map_err(|e| z2metts_core::Error::Io(e.into()))?;
            w.write_all(b"\n")?;
        }
    }
    Ok(())
}
