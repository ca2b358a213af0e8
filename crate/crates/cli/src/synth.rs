//! Reproducible synthetic benchmark data: Zipf base weights per key with
//! per-assignment multiplicative log-normal jitter and dropout, plus a
//! binary `grp` attribute for subpopulation queries.

use coordsketch_core::model::Attrs;
use coordsketch_core::{ColocatedDataset, KeyId};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::StandardNormal;

#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct SynthConfig {
    pub keys: usize,
    pub assignments: usize,
    pub zipf_alpha: f64,
    pub jitter_sigma: f64,
    pub dropout: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            keys: 50,
            assignments: 3,
            zipf_alpha: 1.2,
            jitter_sigma: 0.4,
            dropout: 0.2,
            seed: 1,
        }
    }
}

pub fn generate(cfg: &SynthConfig) -> ColocatedDataset {
    let mut rng = ChaCha12Rng::seed_from_u64(cfg.seed);
    let assignments: Vec<String> = (1..=cfg.assignments).map(|b| format!("{b}")).collect();
    let rows: Vec<(KeyId, Vec<f64>, Attrs)> = (0..cfg.keys)
        .map(|i| {
            let base = 1000.0 * (i as f64 + 1.0).powf(-cfg.zipf_alpha);
            let mut wv: Vec<f64> = (0..cfg.assignments)
                .map(|_| {
                    let drop = rng.random::<f64>() < cfg.dropout;
                    let z: f64 = rng.sample(StandardNormal);
                    if drop {
                        0.0
                    } else {
                        base * (cfg.jitter_sigma * z).exp()
                    }
                })
                .collect();
            if wv.iter().all(|&w| w == 0.0) {
                wv[0] = base;
            }
            let mut attrs = Attrs::new();
            attrs.insert("grp".into(), format!("{}", i % 2));
            (KeyId::new(format!("k{i:04}")), wv, attrs)
        })
        .collect();
    ColocatedDataset::new(assignments, rows).expect("synthetic rows are valid")
}
