//! Exhaustive checks of the METTS transition kernel on a three-link chain.

use z2metts_core::dense;
use z2metts_core::model::{build_grand_canonical, build_hamiltonian, build_number_operator, ModelParams};
use z2metts_core::statevector::{
    exact_ite, outcome_probabilities, Basis, ClassicalProductState, CollapseBasis, ThermalOracle,
};

fn all_cps(basis: Basis, n: usize) -> Vec<ClassicalProductState> {
    (0..1usize << n)
        .map(|k| {
            let bits = (0..n).map(|s| ((k >> (n - 1 - s)) & 1) as u8).collect();
            ClassicalProductState::uniform(basis, bits).unwrap()
        })
        .collect()
}

/// Rows `T[i][i']`, weights `P_i` and the partition function.
fn kernel(params: &ModelParams, beta: f64, basis: Basis) -> (Vec<Vec<f64>>, Vec<f64>, f64) {
    let k = build_grand_canonical(params).unwrap();
    let n = params.n_sites();
    let mut t = Vec::new();
    let mut p = Vec::new();
    for cps in all_cps(basis, n) {
        let rec = exact_ite(&cps, &k, beta / 2.0).unwrap();
        p.push(rec.log_p.exp());
        t.push(outcome_probabilities(&rec.state, &CollapseBasis::Uniform(basis)).unwrap());
    }
    let z: f64 = dense::eigenvalues(&dense::sum_matrix(&k))
        .iter()
        .map(|e| (-beta * e).exp())
        .sum();
    (t, p, z)
}

#[test]
fn weights_sum_to_partition_function() {
    let params = ModelParams::new(3, 0.1, -0.4).unwrap();
    for basis in Basis::ALL {
        let (_, p, z) = kernel(&params, 2.0, basis);
        let total: f64 = p.iter().sum();
        assert!((total - z).abs() < 1e-10 * z, "{basis}: {total} vs {z}");
    }
}

#[test]
fn thermal_weights_are_stationary() {
    for (h, mu, beta) in [(0.1, -0.4, 2.0), (0.0, -0.55, 5.0), (0.3, 0.2, 1.0)] {
        let params = ModelParams::new(3, h, mu).unwrap();
        for basis in Basis::ALL {
            let (t, p, z) = kernel(&params, beta, basis);
            for j in 0..p.len() {
                let flowed: f64 = (0..p.len()).map(|i| p[i] / z * t[i][j]).sum();
                assert!((flowed - p[j] / z).abs() < 1e-10, "{basis} basis, outcome {j}");
            }
            for row in &t {
                assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            }
        }
    }
}

#[test]
fn detailed_balance_in_z_basis() {
    let params = ModelParams::new(3, 0.1, -0.4).unwrap();
    let (t, p, _) = kernel(&params, 3.0, Basis::Z);
    let mut checked = 0;
    for i in 0..p.len() {
        for j in 0..p.len() {
            // both directions vanish together between disconnected sectors
            if t[i][j] < 1e-13 {
                assert!(t[j][i] < 1e-12);
                continue;
            }
            let ratio = t[i][j] / t[j][i];
            assert!((ratio - p[j] / p[i]).abs() < 1e-10 * (p[j] / p[i]).max(1.0));
            checked += 1;
        }
    }
    assert!(checked > p.len());
}

#[test]
fn stationary_weights_reproduce_ed_averages() {
    let params = ModelParams::new(3, 0.1, -0.4).unwrap();
    let beta = 2.0;
    let h = build_hamiltonian(&params).unwrap();
    let n_op = build_number_operator(3).unwrap();
    let k = build_grand_canonical(&params).unwrap();
    let oracle = ThermalOracle::new(&h, &n_op).unwrap();
    for basis in Basis::ALL {
        let (mut num, mut den) = (0.0, 0.0);
        for cps in all_cps(basis, 4) {
            let rec = exact_ite(&cps, &k, beta / 2.0).unwrap();
            let w = rec.log_p.exp();
            num += w * h.expectation(&rec.state).unwrap();
            den += w;
        }
        let ed = oracle.thermal(&h, beta, params.mu).unwrap();
        assert!((num / den - ed).abs() < 1e-10, "{basis}: {} vs {ed}", num / den);
    }
}
