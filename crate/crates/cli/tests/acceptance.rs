//! End-to-end acceptance checks, one PASS/FAIL line per criterion.
//!
//! `Z2METTS_ACCEPTANCE=full` runs every criterion at its stated sample sizes;
//! the default runs reduced sizes where the stated ones take hours on one core.
//! `Z2METTS_ACCEPTANCE_ONLY=3,5` selects criteria. `Z2METTS_ACCEPTANCE_STRICT=1`
//! turns any FAIL into a non-zero exit.

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::time::Instant;

use num_complex::Complex64;
use z2metts::config::{parse_toml, ExperimentConfig};
use z2metts::experiments::{
    run_avqite_accuracy, run_avqmetts, run_basis_study, run_eos, run_friedel, run_ncx_scaling, run_strings,
    AccuracyResult, EosRow,
};
use z2metts::output::OutDir;
use z2metts_core::avqite::{ansatz_state, cnot_count_of, evolve, metric_and_gradient, Ansatz, AvqiteOptions};
use z2metts_core::dense::{hermitian_function, string_matrix, sum_matrix};
use z2metts_core::metts::{run_chain, CollapseSchedule, Measurements, WalkConfig};
use z2metts_core::model::{
    build_grand_canonical, build_hamiltonian, build_number_operator, build_pool, free_fermion_reference, ModelParams,
};
use z2metts_core::observables::RunKind;
use z2metts_core::statevector::{ed_thermal, exact_ite, fidelity, Basis, ClassicalProductState, Statevector};
use z2metts_core::PauliString;

type Check = Result<(bool, String), String>;

/// A stalled growth step keeps evolving (its distance stays in the traces)
/// instead of aborting a whole sample.
const CONTINUE: &str = "[avqite]\non_stall = \"continue\"\n";

struct Mode {
    full: bool,
    only: Option<Vec<usize>>,
    root: PathBuf,
}

impl Mode {
    fn out(&self, name: &str) -> OutDir {
        OutDir::create(self.root.join(name)).expect("output directory")
    }

    fn pick<T>(&self, scaled: T, full: T) -> T {
        if self.full {
            full
        } else {
            scaled
        }
    }
}

fn cfg(text: &str) -> ExperimentConfig {
    parse_toml(text).expect("acceptance config")
}

fn e<E: std::fmt::Display>(err: E) -> String {
    err.to_string()
}

fn ed_vs_free_fermions(_: &Mode) -> Check {
    let mut worst: f64 = 0.0;
    for l in [4, 6] {
        for beta in [1.0, 5.0, 10.0] {
            for mu in [-0.55, 0.0, 0.3] {
                let p = ModelParams::new(l, 0.0, mu).map_err(e)?;
                let k = build_grand_canonical(&p).map_err(e)?;
                let eps = ed_thermal(&build_hamiltonian(&p.with_mu(0.0)).map_err(e)?, &k, beta).map_err(e)? / l as f64;
                let n = ed_thermal(&build_number_operator(l).map_err(e)?, &k, beta).map_err(e)? / l as f64;
                let (ef, nf) = free_fermion_reference(l, beta, mu).map_err(e)?;
                worst = worst.max((eps - ef).abs()).max((n - nf).abs());
            }
        }
    }
    Ok((
        worst <= 1e-10,
        format!("max |ED - free fermion| = {worst:.2e} (tol 1e-10)"),
    ))
}

fn detailed_balance(_: &Mode) -> Check {
    let p = ModelParams::new(3, 0.1, -0.4).map_err(e)?;
    let k = build_grand_canonical(&p).map_err(e)?;
    let n = p.n_sites();
    let mut worst: f64 = 0.0;
    let mut pairs = 0;
    for beta in [1.0, 4.0] {
        let recs: Vec<_> = (0..1 << n)
            .map(|i| exact_ite(&ClassicalProductState::from_z_index(n, i), &k, beta / 2.0))
            .collect::<Result<_, _>>()
            .map_err(e)?;
        for i in 0..1 << n {
            for j in 0..1 << n {
                let fwd = recs[i].state.amplitudes()[j].norm_sqr();
                let back = recs[j].state.amplitudes()[i].norm_sqr();
                if fwd < 1e-14 || back < 1e-14 {
                    continue;
                }
                let ratio = fwd / back;
                let expected = (recs[j].log_p - recs[i].log_p).exp();
                worst = worst.max((ratio / expected - 1.0).abs());
                pairs += 1;
            }
        }
    }
    Ok((
        worst <= 1e-10,
        format!("{pairs} ordered pairs, max relative deviation {worst:.2e} (tol 1e-10)"),
    ))
}

fn basis_study(m: &Mode) -> Check {
    let c =
        cfg("seed = 1\n[basis-study]\nschedules = [\"yz\", \"y\", \"x\", \"xz\"]\nwalk = { s_w = 100, s_0 = 20 }\n");
    let r = run_basis_study(&c, &m.out("basis-study")).map_err(e)?;
    let mut ok = true;
    let mut parts = Vec::new();
    for s in ["yz", "y", "x"] {
        let row = r.run(s).and_then(|x| x.at(15)).ok_or("missing k=15")?;
        ok &= row.delta_eps <= 0.015 && row.delta_n <= 0.015;
        parts.push(format!(
            "{s}: d_eps={:.2}% d_n={:.2}%",
            100.0 * row.delta_eps,
            100.0 * row.delta_n
        ));
    }
    let y = r.run("y").ok_or("no y")?.last().eps.stderr;
    let xz = r.run("xz").ok_or("no xz")?.last().eps.stderr;
    ok &= y <= xz;
    parts.push(format!("stderr eps y={y:.2e} xz={xz:.2e}"));
    Ok((ok, parts.join("; ")))
}

/// Linear interpolation of `eps(n)` through points sorted by `n`.
fn interpolate(curve: &[(f64, f64)], n: f64) -> Option<f64> {
    curve.windows(2).find(|w| w[0].0 <= n && n <= w[1].0).map(|w| {
        let t = if w[1].0 > w[0].0 {
            (n - w[0].0) / (w[1].0 - w[0].0)
        } else {
            0.0
        };
        w[0].1 + t * (w[1].1 - w[0].1)
    })
}

fn eos_symmetry(m: &Mode) -> Check {
    let betas = m.pick("[10.0]", "[5.0, 10.0, 20.0]");
    let walk = m.pick("{ s_w = 10, s_0 = 10 }", "{ s_w = 20, s_0 = 10 }");
    let c = cfg(&format!(
        "seed = 1\n[eos]\nh_values = [0.0, 0.1]\nbetas = {betas}\nwalk = {walk}\n"
    ));
    let rows = run_eos(&c, &m.out("eos")).map_err(e)?;
    let mut by: BTreeMap<(u64, u64), Vec<&EosRow>> = BTreeMap::new();
    for r in &rows {
        by.entry((r.h.to_bits(), r.beta.to_bits())).or_default().push(r);
    }
    let mut violations = 0;
    let mut pairs = 0;
    let mut below_fail = 0;
    let mut gap_ok = true;
    for beta in &c.eos.betas {
        let h0 = &by[&(0f64.to_bits(), beta.to_bits())];
        let h1 = &by[&(0.1f64.to_bits(), beta.to_bits())];
        // particle-hole partner of mu is -mu, at n -> 1 - n
        let k = h0.len();
        for i in 0..k / 2 {
            let (a, b) = (h0[i], h0[k - 1 - i]);
            let tol = 2.0 * (a.eps_blocked.stderr.powi(2) + b.eps_blocked.stderr.powi(2)).sqrt() + 1e-9;
            pairs += 1;
            if (a.eps.mean - b.eps.mean).abs() > tol {
                violations += 1;
            }
        }
        let mut curve: Vec<(f64, f64)> = h0.iter().map(|r| (r.n.mean, r.eps.mean)).collect();
        curve.sort_by(|x, y| x.0.total_cmp(&y.0));
        let gaps: Vec<(f64, f64)> = h1
            .iter()
            .filter(|r| r.n.mean < 0.5)
            .filter_map(|r| interpolate(&curve, r.n.mean).map(|e0| (r.n.mean, e0 - r.eps.mean)))
            .collect();
        below_fail += gaps.iter().filter(|g| g.1 <= 0.0).count();
        let lowest = gaps.iter().min_by(|x, y| x.0.total_cmp(&y.0));
        let largest = gaps.iter().max_by(|x, y| x.1.total_cmp(&y.1));
        gap_ok &= matches!((lowest, largest), (Some(l), Some(g)) if l.0 == g.0);
    }
    Ok((
        violations == 0 && below_fail == 0 && gap_ok,
        format!(
            "h=0 pairs outside 2 sigma: {violations}/{pairs}; h=0.1 points not below h=0: {below_fail}; max gap at lowest n: {gap_ok}"
        ),
    ))
}

fn friedel_peaks(m: &Mode) -> Check {
    let c = cfg(
        "seed = 1\n[friedel]\ncases = [{ h = 0.0, mu = -0.55 }, { h = 0.1, mu = -0.4 }]\nbetas = [20.0, 5.0]\nwalk = { s_w = 100, s_0 = 20 }\n",
    );
    let rows = run_friedel(&c, &m.out("friedel")).map_err(e)?;
    let find = |h: f64, beta: f64| rows.iter().find(|r| r.h == h && r.beta == beta).ok_or("missing case");
    let cold0 = find(0.0, 20.0)?;
    let cold1 = find(0.1, 20.0)?;
    let warm0 = find(0.0, 5.0)?;
    let peaks = |v: &[f64]| -> Vec<usize> {
        (1..v.len() - 1)
            .filter(|&i| v[i] > v[i - 1] && v[i] > v[i + 1])
            .collect()
    };
    let p0 = peaks(&cold0.profile.values);
    let pw = peaks(&warm0.profile.values);
    let central: Vec<usize> = if p0.len() == 4 { vec![p0[1], p0[2]] } else { Vec::new() };
    let central_gone = !central.is_empty() && central.iter().all(|c| pw.iter().all(|p| p.abs_diff(*c) > 1));
    let ok = cold0.peaks == 4 && cold1.peaks == 2 && central_gone;
    Ok((
        ok,
        format!(
            "peaks h=0 b=20: {} (ED {}), h=0.1 b=20: {} (ED {}), h=0 b=5: {} at sites {:?} vs cold {:?}",
            cold0.peaks,
            cold0.ed_peaks,
            cold1.peaks,
            cold1.ed_peaks,
            warm0.peaks,
            pw.iter().map(|i| i + 1).collect::<Vec<_>>(),
            p0.iter().map(|i| i + 1).collect::<Vec<_>>()
        ),
    ))
}

fn string_statistics(m: &Mode) -> Check {
    let c = cfg(
        "seed = 1\n[strings]\ncases = [{ h = 0.0, mu = -0.55 }, { h = 0.1, mu = -0.4 }]\nbetas = [20.0, 10.0, 5.0]\nshots = 50\nwalk = { s_w = 100, s_0 = 20 }\n",
    );
    let rows = run_strings(&c, &m.out("strings")).map_err(e)?;
    let mut bins = 0;
    let mut bad_bins = 0;
    let mut asym_ok = true;
    let mut broad_ok = true;
    let mut parts = Vec::new();
    for h in [0.0, 0.1] {
        let mine: Vec<_> = rows.iter().filter(|r| r.h == h).collect();
        for r in &mine {
            let hist = &r.histogram;
            if h == 0.0 {
                for l in hist.lengths() {
                    let d = (hist.c(RunKind::String, l) - hist.c(RunKind::Antistring, l)).abs();
                    let s = (hist.c_stderr(RunKind::String, l).powi(2) + hist.c_stderr(RunKind::Antistring, l).powi(2))
                        .sqrt();
                    bins += 1;
                    if d > 3.0 * s {
                        bad_bins += 1;
                    }
                }
            } else {
                let (ms, ma) = (hist.mean_length(RunKind::String), hist.mean_length(RunKind::Antistring));
                asym_ok &= ma > ms;
                parts.push(format!("h=0.1 b={}: mean string {ms:.3} antistring {ma:.3}", r.beta));
            }
        }
        // betas run 20, 10, 5: variance must grow along the list
        for kind in [RunKind::String, RunKind::Antistring] {
            let v: Vec<f64> = mine.iter().map(|r| r.histogram.length_variance(kind)).collect();
            broad_ok &= v.windows(2).all(|w| w[1] > w[0]);
            parts.push(format!(
                "h={h} {} var {:?}",
                if kind == RunKind::String {
                    "string"
                } else {
                    "antistring"
                },
                v.iter().map(|x| format!("{x:.3}")).collect::<Vec<_>>()
            ));
        }
    }
    let samples = rows[0].histogram.total_samples;
    Ok((
        bad_bins == 0 && asym_ok && broad_ok && samples == 100_000,
        format!(
            "{samples} bitstrings/case; h=0 bins beyond 3 sigma {bad_bins}/{bins}; {}",
            parts.join("; ")
        ),
    ))
}

fn accuracy(m: &Mode, samples: usize) -> Result<AccuracyResult, String> {
    let c = cfg(&format!(
        "seed = 1\n{CONTINUE}[avqite-accuracy]\nbases = [\"x\", \"y\", \"z\"]\nbetas = [1.0, 2.0]\nsamples = {samples}\n"
    ));
    run_avqite_accuracy(&c, &m.out("avqite-accuracy")).map_err(e)
}

fn fidelity_check(r: &AccuracyResult) -> Check {
    let worst = r.rows.iter().map(|x| x.infidelity).fold(0.0, f64::max);
    let per: Vec<String> = r
        .aggregates
        .iter()
        .map(|a| format!("{}@{}={:.1e}", a.basis, a.beta, a.max_infidelity))
        .collect();
    let m = r.aggregates.first().map(|a| a.samples).unwrap_or(0);
    Ok((
        worst < 1e-2,
        format!("M={m}/basis, max infidelity {worst:.2e} (tol 1e-2): {}", per.join(" ")),
    ))
}

fn table_orderings(r: &AccuracyResult) -> Check {
    let mut ok = true;
    let mut parts = Vec::new();
    for beta in [1.0, 2.0] {
        let get = |b: Basis| r.aggregate(b, beta).ok_or(format!("missing {b} at beta {beta}"));
        let (x, y, z) = (get(Basis::X)?, get(Basis::Y)?, get(Basis::Z)?);
        ok &= y.d_e_av < z.d_e_av && z.d_e_av < x.d_e_av;
        ok &= y.d_n_av < x.d_n_av && x.d_n_av < z.d_n_av;
        parts.push(format!(
            "b={beta}: D_E x/y/z={:.2}/{:.2}/{:.2}% D_N x/y/z={:.2}/{:.2}/{:.2}%",
            100.0 * x.d_e_av,
            100.0 * y.d_e_av,
            100.0 * z.d_e_av,
            100.0 * x.d_n_av,
            100.0 * y.d_n_av,
            100.0 * z.d_n_av
        ));
    }
    let y1 = r.aggregate(Basis::Y, 1.0).ok_or("missing y")?;
    let within = |v: f64, target: f64| v >= target / 2.0 && v <= target * 2.0;
    let mag = within(y1.d_e_av, 0.0040) && within(y1.d_n_av, 0.0009);
    parts.push(format!("y@1 within 2x of 0.40%/0.09%: {mag}"));
    Ok((ok && mag, parts.join("; ")))
}

fn avqmetts(m: &Mode) -> Check {
    let walk = m.pick("{ s_w = 4, s_0 = 4, warmup = 1 }", "{ s_w = 288, s_0 = 4, warmup = 1 }");
    let betas = m.pick("[1.0]", "[1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0, 9.0, 10.0]");
    let c = cfg(&format!(
        "seed = 1\n{CONTINUE}[avqmetts]\nbetas = {betas}\nschedules = [\"yz\"]\nwalk = {walk}\n"
    ));
    let r = run_avqmetts(&c, &m.out("avqmetts")).map_err(e)?;
    let (de, dn) = r.max_delta("yz").ok_or("no yz points")?;
    let s = r.points[0].eps.count;
    Ok((
        de <= 0.04 && dn <= 0.02,
        format!(
            "S={s}, betas {betas}: max d_eps {:.2}% (tol 4%), max d_n {:.2}% (tol 2%){}",
            100.0 * de,
            100.0 * dn,
            if m.full { "" } else { "; reduced walks and temperatures" }
        ),
    ))
}

fn ncx_scaling(m: &Mode) -> Check {
    let y_samples = m.pick(4, 32);
    let z_samples = m.pick(8, 32);
    let c = cfg(&format!(
        "seed = 1\n{CONTINUE}[ncx-scaling]\nbetas = [1.0, 2.0]\nsamples = {z_samples}\n\
         series = [{{ basis = \"z\", lengths = [8, 12, 16] }}]\n"
    ));
    let z = run_ncx_scaling(&c, &m.out("ncx-z")).map_err(e)?;
    let cy = cfg(&format!(
        "seed = 1\n{CONTINUE}[ncx-scaling]\nbetas = [2.0]\nsamples = {y_samples}\nseries = [{{ basis = \"y\", lengths = [12] }}]\n"
    ));
    let y = run_ncx_scaling(&cy, &m.out("ncx-y")).map_err(e)?;
    let (lo, hi) = z
        .rows
        .iter()
        .fold((usize::MAX, 0), |(a, b), r| (a.min(r.n_cx), b.max(r.n_cx)));
    let range_ok = lo >= 4 && hi <= 30;
    let fits: Vec<String> = z
        .fits
        .iter()
        .map(|f| format!("b(beta={})={:.2}", f.beta, f.b))
        .collect();
    let fit_ok = z.fits.len() == 2 && z.fits.iter().all(|f| (1.5..=2.2).contains(&f.b));
    let zm = z.summary(Basis::Z, 12, 2.0).ok_or("missing z L=12")?.mean;
    let ym = y.summary(Basis::Y, 12, 2.0).ok_or("missing y L=12")?.mean;
    let ratio_ok = ym >= 10.0 * zm;
    Ok((
        range_ok && fit_ok && ratio_ok,
        format!(
            "z N_CX range [{lo}, {hi}] (want [4, 30]); {} (want [1.5, 2.2]); y/z mean at L=12 b=2: {ym:.0}/{zm:.1} = {:.1} (want >= 10, y M={y_samples})",
            fits.join(" "),
            ym / zm
        ),
    ))
}

fn pauli_algebra() -> Result<bool, String> {
    for a in 0..16u64 {
        for b in 0..16u64 {
            let p = PauliString::from_masks(2, a >> 2, a & 3).map_err(e)?;
            let q = PauliString::from_masks(2, b >> 2, b & 3).map_err(e)?;
            let (phase, r) = PauliString::multiply(&p, &q).map_err(e)?;
            let lhs = string_matrix(&p) * string_matrix(&q);
            let rhs = string_matrix(&r) * phase.to_complex();
            if (lhs - rhs).camax() > 1e-14 {
                return Ok(false);
            }
            let comm = string_matrix(&p) * string_matrix(&q) - string_matrix(&q) * string_matrix(&p);
            if p.commutes_with(&q) != (comm.camax() < 1e-14) {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

fn metric_vs_finite_differences() -> Result<f64, String> {
    let gates = ["Y0", "Y1 Z2", "X0 Y3", "Z1 Y2 X3", "Y2"];
    let gens: Vec<PauliString> = gates
        .iter()
        .map(|g| PauliString::parse(4, g))
        .collect::<Result<_, _>>()
        .map_err(e)?;
    let reference = ClassicalProductState::uniform(Basis::Y, vec![0, 1, 1, 0]).map_err(e)?;
    let a = Ansatz::with_gates(reference, gens, vec![0.3, -0.7, 1.1, 0.2, -0.4]).map_err(e)?;
    let h = build_grand_canonical(&ModelParams::new(3, 0.1, -0.4).map_err(e)?).map_err(e)?;
    let (g, v) = metric_and_gradient(&a, &h).map_err(e)?;
    let step = 1e-5;
    let shifted = |j: usize, d: f64| {
        let mut b = a.clone();
        b.thetas[j] += d;
        ansatz_state(&b)
    };
    let ip = |x: &[Complex64], y: &[Complex64]| -> Complex64 { x.iter().zip(y).map(|(a, b)| a.conj() * b).sum() };
    let psi = ansatz_state(&a).into_amplitudes();
    let fd: Vec<Vec<Complex64>> = (0..a.len())
        .map(|j| {
            let (p, q) = (shifted(j, step).into_amplitudes(), shifted(j, -step).into_amplitudes());
            p.iter().zip(&q).map(|(x, y)| (x - y) / (2.0 * step)).collect()
        })
        .collect();
    let mut worst: f64 = 0.0;
    for i in 0..a.len() {
        for j in 0..a.len() {
            let expected = (ip(&fd[i], &fd[j]) + ip(&psi, &fd[i]) * ip(&psi, &fd[j])).re;
            worst = worst.max((g[(i, j)] - expected).abs());
        }
        let de = (h.expectation(&shifted(i, step)).map_err(e)? - h.expectation(&shifted(i, -step)).map_err(e)?)
            / (2.0 * step);
        worst = worst.max((v[i] + 0.5 * de).abs());
    }
    Ok(worst)
}

fn cnot_hand_cases() -> Result<bool, String> {
    let count = |labels: &[&str]| -> Result<usize, String> {
        let g: Vec<PauliString> = labels
            .iter()
            .map(|l| PauliString::parse(5, l))
            .collect::<Result<_, _>>()
            .map_err(e)?;
        Ok(cnot_count_of(&g))
    };
    Ok(count(&["Y0"])? == 0
        && count(&["Y0 Z3"])? == 2
        && count(&["Y1 Z2 X4"])? == 4
        && count(&["Y0", "Y0 Z1", "Y2 Z3 X4", "Z0 Z1 Z2 Y3"])? == 12)
}

fn krylov_vs_dense() -> Result<f64, String> {
    let p = ModelParams::new(4, 0.1, -0.4).map_err(e)?;
    let k = build_grand_canonical(&p).map_err(e)?;
    let n = p.n_sites();
    let mut worst: f64 = 0.0;
    for tau in [0.5, 2.0] {
        let u = hermitian_function(&sum_matrix(&k), |x| (-tau * x).exp());
        for i in 0..1 << n {
            let cps = ClassicalProductState::from_z_index(n, i);
            let ours = exact_ite(&cps, &k, tau).map_err(e)?.state;
            let col: Vec<Complex64> = u.column(i).iter().copied().collect();
            let norm = col.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
            let dense = Statevector::from_raw(n, col.into_iter().map(|c| c / norm).collect());
            worst = worst.max(1.0 - fidelity(&ours, &dense).map_err(e)?);
        }
    }
    Ok(worst)
}

fn mclachlan_after_growth() -> Result<bool, String> {
    let p = ModelParams::new(4, 0.0, -0.55).map_err(e)?;
    let k = build_grand_canonical(&p).map_err(e)?;
    let opts = AvqiteOptions::default();
    for basis in [Basis::Z, Basis::X] {
        let pool = build_pool(basis, 4).map_err(e)?;
        let cps = ClassicalProductState::uniform(basis, vec![0, 1, 1, 0, 1]).map_err(e)?;
        let ev = evolve(&cps, &k, 1.0, &pool, &opts).map_err(e)?;
        if ev.report.trace.iter().any(|t| !(t.mclachlan_sq >= 0.0)) {
            return Ok(false);
        }
        let mut last_at: BTreeMap<u64, f64> = BTreeMap::new();
        for g in &ev.report.growth_events {
            if !(g.mclachlan_before >= 0.0 && g.mclachlan_after >= 0.0) {
                return Ok(false);
            }
            last_at.insert(g.tau.to_bits(), g.mclachlan_after);
        }
        if last_at.values().any(|&v| v > opts.threshold) {
            return Ok(false);
        }
    }
    Ok(true)
}

fn seed_determinism() -> Result<bool, String> {
    let p = ModelParams::new(4, 0.1, -0.4).map_err(e)?;
    let meas = Measurements::new()
        .with("H", build_hamiltonian(&p.with_mu(0.0)).map_err(e)?)
        .with_occupations()
        .with_bitstrings(3);
    let w = WalkConfig::new(
        6,
        5,
        CollapseSchedule::Alternating {
            odd: Basis::Y,
            even: Basis::Z,
        },
        42,
    );
    let a = run_chain(&p, 3.0, &w, &meas).map_err(e)?;
    let b = run_chain(&p, 3.0, &w, &meas).map_err(e)?;
    let mut ca = Vec::new();
    let mut cb = Vec::new();
    a.write_csv(&mut ca).map_err(e)?;
    b.write_csv(&mut cb).map_err(e)?;
    Ok(a == b && ca == cb)
}

fn property_suites(_: &Mode) -> Check {
    let pauli = pauli_algebra()?;
    let fd = metric_vs_finite_differences()?;
    let cx = cnot_hand_cases()?;
    let kry = krylov_vs_dense()?;
    let mc = mclachlan_after_growth()?;
    let det = seed_determinism()?;
    Ok((
        pauli && fd < 1e-6 && cx && kry < 1e-10 && mc && det,
        format!(
            "pauli n=2 {pauli}; metric/gradient fd err {fd:.1e}; N_CX hand cases {cx}; krylov infidelity {kry:.1e}; L^2 after growth {mc}; seed determinism {det}"
        ),
    ))
}

fn main() {
    let full = std::env::var("Z2METTS_ACCEPTANCE")
        .map(|v| v == "full")
        .unwrap_or(false);
    let strict = std::env::var("Z2METTS_ACCEPTANCE_STRICT")
        .map(|v| v == "1")
        .unwrap_or(false);
    let only = std::env::var("Z2METTS_ACCEPTANCE_ONLY").ok().map(|v| {
        v.split(',')
            .filter_map(|s| s.trim().parse().ok())
            .collect::<Vec<usize>>()
    });
    let root = PathBuf::from(env!("CARGO_TARGET_TMPDIR")).join("acceptance");
    let mode = Mode { full, only, root };
    println!(
        "acceptance ({} scale), outputs under {}",
        if full { "full" } else { "reduced" },
        mode.root.display()
    );

    let wanted = |n: usize| mode.only.as_ref().is_none_or(|v| v.contains(&n));
    let mut failures = 0;
    let mut report = |n: usize, name: &str, start: Instant, r: Check| {
        let secs = start.elapsed().as_secs_f64();
        let (tag, detail) = match r {
            Ok((true, d)) => ("PASS", d),
            Ok((false, d)) => ("FAIL", d),
            Err(msg) => ("FAIL", format!("error: {msg}")),
        };
        if tag == "FAIL" {
            failures += 1;
        }
        println!("criterion {n:>2} {tag} {name} [{secs:.0} s] {detail}");
    };

    let simple: [(usize, &str, fn(&Mode) -> Check); 6] = [
        (1, "ed-vs-free-fermions", ed_vs_free_fermions),
        (2, "detailed-balance", detailed_balance),
        (3, "basis-study", basis_study),
        (4, "eos-symmetry", eos_symmetry),
        (5, "friedel-peaks", friedel_peaks),
        (6, "string-statistics", string_statistics),
    ];
    for (n, name, f) in simple {
        if wanted(n) {
            let t = Instant::now();
            report(n, name, t, f(&mode));
        }
    }
    if wanted(7) || wanted(8) {
        let t = Instant::now();
        let samples = mode.pick(6, 288);
        match accuracy(&mode, samples) {
            Ok(r) => {
                if wanted(7) {
                    report(7, "avqite-fidelity", t, fidelity_check(&r));
                }
                if wanted(8) {
                    report(8, "spread-orderings", t, table_orderings(&r));
                }
            }
            Err(msg) => {
                for n in [7, 8].into_iter().filter(|n| wanted(*n)) {
                    report(n, "avqite-accuracy", t, Err(msg.clone()));
                }
            }
        }
    }
    let rest: [(usize, &str, fn(&Mode) -> Check); 3] = [
        (9, "avqmetts", avqmetts),
        (10, "ncx-scaling", ncx_scaling),
        (11, "property-suites", property_suites),
    ];
    for (n, name, f) in rest {
        if wanted(n) {
            let t = Instant::now();
            report(n, name, t, f(&mode));
        }
    }
    println!("acceptance: {failures} failing");
    if strict && failures > 0 {
        std::process::exit(1);
    }
}
