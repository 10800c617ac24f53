//! Chemical potential for a target ground-state filling.

use serde::Serialize;
use z2metts_core::model::{build_hamiltonian, build_number_operator, ModelParams};
use z2metts_core::statevector::block_ground_energies;

use crate::error::{CliError, Result};

/// The interval of `mu` over which the ground state of `H - mu N` holds
/// `particles` fermions, and its midpoint.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct MuPlateau {
    pub particles: usize,
    pub lo: f64,
    pub hi: f64,
    pub mu: f64,
}

/// Lowest energy of `H` in every particle-number sector `N = 0..=L`.
pub fn sector_ground_energies(l: usize, h: f64) -> Result<Vec<f64>> {
    let params = ModelParams::new(l, h, 0.0)?;
    let ham = build_hamiltonian(&params)?;
    let number = build_number_operator(l)?;
    let mut best = vec![f64::INFINITY; l + 1];
    for (_, e0, charge) in block_ground_energies(&ham, &number)? {
        let n = charge.round() as usize;
        best[n] = best[n].min(e0);
    }
    Ok(best)
}

/// Midpoint of the `mu` plateau, within `[-2, 2]`, on which the ground
/// state has `round(target * L)` particles. The plateau edges are the
/// chemical potentials where another sector's ground energy crosses, so no
/// finite-temperature proxy is needed.
pub fn calibrate_mu(l: usize, h: f64, target: f64) -> Result<MuPlateau> {
    if !(target > 0.0 && target < 1.0) {
        return Err(CliError::config(format!(
            "target filling must lie in (0, 1), got {target}"
        )));
    }
    let e = sector_ground_energies(l, h)?;
    let n = (target * l as f64).round() as usize;
    let (mut lo, mut hi) = (-2.0f64, 2.0f64);
    for (m, em) in e.iter().enumerate() {
        if !em.is_finite() || m == n {
            continue;
        }
        let slope = (e[n] - em) / (n as f64 - m as f64);
        if m < n {
            lo = lo.max(slope);
        } else {
            hi = hi.min(slope);
        }
    }
    if !(lo < hi) {
        return Err(CliError::config(format!(
            "no chemical-potential plateau in [-2, 2] gives {n} particles at L = {l}, h = {h}"
        )));
    }
    Ok(MuPlateau {
        particles: n,
        lo,
        hi,
        mu: 0.5 * (lo + hi),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use z2metts_core::model::build_grand_canonical;
    use z2metts_core::statevector::ThermalOracle;

    #[test]
    fn plateau_ground_states_have_target_filling() {
        for (l, h, target) in [(6, 0.0, 1.0 / 3.0), (6, 0.1, 1.0 / 3.0), (8, 0.0, 0.25)] {
            let p = calibrate_mu(l, h, target).unwrap();
            let params = ModelParams::new(l, h, 0.0).unwrap();
            let oracle =
                ThermalOracle::new(&build_hamiltonian(&params).unwrap(), &build_number_operator(l).unwrap()).unwrap();
            for mu in [p.mu, p.lo + 1e-6, p.hi - 1e-6] {
                let (_, charge) = oracle.ground_state(mu);
                assert_eq!(charge.round() as usize, p.particles, "L={l} h={h} mu={mu}");
            }
            let _ = build_grand_canonical(&params.with_mu(p.mu)).unwrap();
        }
    }

    #[test]
    fn half_filling_is_particle_hole_symmetric() {
        let p = calibrate_mu(8, 0.0, 0.5).unwrap();
        assert!(p.mu.abs() < 1e-9, "{p:?}");
        assert!((p.lo + p.hi).abs() < 1e-9);
    }

    #[test]
    fn rejects_bad_targets() {
        assert_eq!(calibrate_mu(6, 0.0, 1.0).unwrap_err().exit_code(), 2);
        assert!(calibrate_mu(6, 0.0, 0.0).is_err());
    }
}
