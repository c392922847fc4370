//! Shared test helpers: a brute-force pattern oracle and scenario builders.
#![allow(dead_code)]

use std::collections::BTreeSet;

use gridrep::mining::ItemId;
use gridrep::scenario::ScenarioConfig;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// A context with thresholds given as integer percentages.
#[derive(Clone, Debug)]
pub struct OracleCase {
    pub items: u32,
    pub rows: Vec<Vec<ItemId>>,
    pub minsupp_pct: u32,
    pub min_conf_pct: u32,
}

impl OracleCase {
    pub fn random(rng: &mut ChaCha8Rng) -> Self {
        let items = rng.random_range(1..=12u32);
        let n = rng.random_range(1..=30usize);
        let density: f64 = rng.random_range(0.1..0.9);
        let rows = (0..n)
            .map(|_| {
                (0..items)
                    .filter(|_| rng.random::<f64>() < density)
                    .collect()
            })
            .collect();
        OracleCase {
            items,
            rows,
            minsupp_pct: rng.random_range(1..=60),
            min_conf_pct: rng.random_range(0..=100),
        }
    }

    pub fn seeded(seed: u64) -> Self {
        Self::random(&mut ChaCha8Rng::seed_from_u64(seed))
    }

    pub fn minsupp(&self) -> f64 {
        self.minsupp_pct as f64 / 100.0
    }

    pub fn min_conf(&self) -> f64 {
        self.min_conf_pct as f64 / 100.0
    }

    pub fn count(&self, set: &[ItemId]) -> usize {
        self.rows
            .iter()
            .filter(|r| set.iter().all(|i| r.contains(i)))
            .count()
    }

    /// Frequent and correlated, in exact integer arithmetic.
    pub fn passes(&self, set: &[ItemId]) -> bool {
        let n = self.rows.len();
        let c = self.count(set);
        let max_item = set.iter().map(|&i| self.count(&[i])).max().unwrap_or(0);
        c >= 1
            && c * 100 >= self.minsupp_pct as usize * n
            && c * 100 >= self.min_conf_pct as usize * max_item
    }

    /// Every passing itemset, by enumerating all subsets of the items.
    pub fn all_passing(&self) -> BTreeSet<Vec<ItemId>> {
        (1u32..1 << self.items)
            .map(|mask| {
                (0..self.items)
                    .filter(|i| mask >> i & 1 == 1)
                    .collect::<Vec<_>>()
            })
            .filter(|s| self.passes(s))
            .collect()
    }

    /// Passing itemsets with no passing proper superset.
    pub fn maximal(&self) -> BTreeSet<Vec<ItemId>> {
        let all = self.all_passing();
        all.iter()
            .filter(|s| {
                !all.iter()
                    .any(|t| t.len() > s.len() && s.iter().all(|i| t.contains(i)))
            })
            .cloned()
            .collect()
    }
}

/// The bundled 15-site desk grid: S0 stores every master and runs no jobs.
pub fn desk_config(pattern: &str, seed: u64) -> ScenarioConfig {
    let path = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("data/desk.toml");
    let mut cfg = ScenarioConfig::load(&path)
        .expect("desk scenario loads")
        .with_param("jobs.pattern", &format!("{{ kind = \"{pattern}\" }}"))
        .expect("pattern override applies");
    cfg.seed = seed;
    cfg.name = format!("desk-{pattern}");
    cfg
}

/// Small grid with failing sites and masters spread over every site.
pub fn small_config(seed: u64, strategy: &str, failure: f64) -> ScenarioConfig {
    ScenarioConfig::from_toml(&format!(
        r#"
name = "small"
seed = {seed}
strategy = "{strategy}"

[rscp]
period_jobs = 5
minsupp = 0.2

[topology]
site_count = 5
capacity_mb = 600.0
failure_profile = {failure}
bandwidth_mb_per_s = 10.0
bandwidth_overrides = [{{ a = 0, b = 1, mb_per_s = 40.0 }}, {{ a = 2, b = 3, mb_per_s = 2.5 }}]

[files]
count = 12
size_mb = 100.0

[jobs]
count = 30
requests_per_job = 6
universe_size = 4
dataset_affinity = 0.5
pattern = {{ kind = "zipf", exponent = 1.0 }}
"#
    ))
    .expect("small scenario parses")
}
