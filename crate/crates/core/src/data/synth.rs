use serde::{Deserialize, Serialize};

use crate::data::table::{FlowTable, LabelColumn, Provenance};
use crate::error::{Error, Result};
use crate::rng::Rng;

/// Parameters of the synthetic flow-table generator. The defaults reproduce
/// the DNP3 class populations (666 normal, 6660 attack).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub n_normal: usize,
    pub n_attack: usize,
    pub features: usize,
    pub separation: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            n_normal: 666,
            n_attack: 6660,
            features: 60,
            separation: 2.0,
            seed: 42,
        }
    }
}

/// Class-conditional generator.
///
/// Each feature `j` has a baseline `b_j ~ U[0, 10)`. Every row draws
/// `x_j = b_j + U[-0.5, 0.5)`; attack rows add `separation` to a seeded
/// subset of `ceil(F / 4)` features. With `separation >= 1` the shifted
/// features of the two classes occupy disjoint intervals, so the classes are
/// linearly separable (and stay so under min-max scaling, which is affine).
/// Rows are shuffled.
pub fn generate_synthetic(cfg: &SynthConfig) -> Result<FlowTable> {
    if cfg.features < 8 {
        return Err(Error::Parameter(format!("need at least 8 features, got {}", cfg.features)));
    }
    if cfg.n_normal == 0 || cfg.n_attack == 0 {
        return Err(Error::Parameter("both classes need at least one row".into()));
    }
    if !cfg.separation.is_finite() || cfg.separation < 0.0 {
        return Err(Error::Parameter(format!("separation must be finite and >= 0, got {}", cfg.separation)));
    }
    let root = Rng::new(cfg.seed);
    let f = cfg.features;
    let mut base_rng = root.split(0);
    let baseline: Vec<f64> = (0..f).map(|_| 10.0 * base_rng.uniform()).collect();
    let mut order: Vec<usize> = (0..f).collect();
    root.split(1).shuffle(&mut order);
    let mut shifted = vec![false; f];
    for &j in &order[..f.div_ceil(4)] {
        shifted[j] = true;
    }

    let mut noise = root.split(2);
    let n = cfg.n_normal + cfg.n_attack;
    let mut rows = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let attack = i >= cfg.n_normal;
        let row: Vec<f64> = (0..f)
            .map(|j| {
                let shift = if attack && shifted[j] { cfg.separation } else { 0.0 };
                baseline[j] + (noise.uniform() - 0.5) + shift
            })
            .collect();
        rows.push(row);
        labels.push(u8::from(attack));
    }
    let mut perm: Vec<usize> = (0..n).collect();
    root.split(3).shuffle(&mut perm);
    let width = (f - 1).to_string().len();
    let names = (0..f).map(|j| format!("f{j:0width$}")).collect();
    let rows = perm.iter().map(|&i| rows[i].clone()).collect();
    let labels = perm.iter().map(|&i| labels[i]).collect();
    let mut table = FlowTable::new(names, rows, LabelColumn::Binary(labels))?;
    table.provenance = Provenance {
        source: Some(format!(
            "synthetic(n_normal={}, n_attack={}, features={}, separation={}, seed={})",
            cfg.n_normal, cfg.n_attack, cfg.features, cfg.separation, cfg.seed
        )),
        ..Provenance::default()
    };
    Ok(table)
}
