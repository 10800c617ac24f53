//! Exact thermal references, diagonalized once per `(L, h)` and reused for
//! every `(beta, mu)`.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use z2metts_core::model::{build_hamiltonian, build_number_operator, site_occupation, ModelParams};
use z2metts_core::statevector::{DiagonalTable, ThermalOracle};
use z2metts_core::PauliSum;

use crate::error::Result;

pub struct Reference {
    pub l: usize,
    pub h: f64,
    pub hamiltonian: PauliSum,
    pub number: PauliSum,
    oracle: ThermalOracle,
    h_table: DiagonalTable,
    n_table: DiagonalTable,
    site_tables: OnceLock<Vec<DiagonalTable>>,
}

impl Reference {
    pub fn energy_density(&self, beta: f64, mu: f64) -> Result<f64> {
        Ok(self.oracle.average(&self.h_table, beta, mu)? / self.l as f64)
    }

    pub fn particle_density(&self, beta: f64, mu: f64) -> Result<f64> {
        Ok(self.oracle.average(&self.n_table, beta, mu)? / self.l as f64)
    }

    pub fn occupations(&self, beta: f64, mu: f64) -> Result<Vec<f64>> {
        let tables = match self.site_tables.get() {
            Some(t) => t,
            None => {
                let t = (1..=self.l)
                    .map(|i| Ok(self.oracle.table(&site_occupation(self.l, i)?)?))
                    .collect::<Result<Vec<_>>>()?;
                let _ = self.site_tables.set(t);
                self.site_tables.get().unwrap()
            }
        };
        tables.iter().map(|t| Ok(self.oracle.average(t, beta, mu)?)).collect()
    }
}

type Cache = Mutex<HashMap<(usize, u64), Arc<Reference>>>;

/// Shared reference for the chain with `params.l` links and field `params.h`.
pub fn reference(params: &ModelParams) -> Result<Arc<Reference>> {
    static CACHE: OnceLock<Cache> = OnceLock::new();
    let key = (params.l, params.h.to_bits());
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    if let Some(r) = cache.lock().unwrap().get(&key) {
        return Ok(Arc::clone(r));
    }
    let bare = params.with_mu(0.0);
    let hamiltonian = build_hamiltonian(&bare)?;
    let number = build_number_operator(params.l)?;
    let oracle = ThermalOracle::new(&hamiltonian, &number)?;
    let r = Arc::new(Reference {
        l: params.l,
        h: params.h,
        h_table: oracle.table(&hamiltonian)?,
        n_table: oracle.table(&number)?,
        hamiltonian,
        number,
        oracle,
        site_tables: OnceLock::new(),
    });
    cache.lock().unwrap().insert(key, Arc::clone(&r));
    Ok(r)
}
