//! Budgeted search over feature subsets for RuleFit.
//!
//! Subsets are sampled, not enumerated: with a few dozen candidate features
//! the number of combinations below the size cap is far too large. The
//! sampled list depends only on the seed, and each candidate is scored by
//! hold-out MAPE on a fixed internal split.

use std::collections::BTreeSet;

use rand::seq::index::sample;
use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::model::{rulefit_fit, RuleFitConfig};
use crate::dataset::{split_indices, FeatureTable};
use crate::error::{Error, Result};
use crate::evaluation::mape;
use crate::rng::{derive_seed, stream};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, schemars::JsonSchema)]
#[serde(default, deny_unknown_fields)]
pub struct SubsetSearch {
    pub min_features: usize,
    /// Inclusive upper bound on subset size.
    pub max_features: usize,
    /// Number of RuleFit fits, i.e. distinct subsets scored.
    pub budget: usize,
    pub train_fraction: f64,
}

impl Default for SubsetSearch {
    fn default() -> Self {
        SubsetSearch { min_features: 3, max_features: 11, budget: 32, train_fraction: 0.7 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubsetScore {
    pub features: Vec<String>,
    pub mape: f64,
    pub n_rules: usize,
}

/// Scores up to `search.budget` distinct subsets, best first. Ties keep
/// sampling order. Subsets whose fit fails are left out.
pub fn subset_search(table: &FeatureTable, rf: &RuleFitConfig, search: &SubsetSearch, seed: u64) -> Result<Vec<SubsetScore>> {
    let p = table.n_cols();
    let hi = search.max_features.min(p);
    if search.min_features == 0 || search.min_features > hi {
        return Err(Error::invalid(format!(
            "subset sizes {}..={} impossible with {p} features",
            search.min_features, search.max_features
        )));
    }
    if search.budget == 0 {
        return Err(Error::invalid("subset search budget must be positive"));
    }
    let subsets = sample_subsets(p, search.min_features, hi, search.budget, derive_seed(seed, 1));
    let (tr, va) = split_indices(table.n_rows(), search.train_fraction, derive_seed(seed, 2))?;
    let (train, valid) = (table.rows(&tr), table.rows(&va));

    let results: Vec<Result<SubsetScore>> = subsets
        .par_iter()
        .enumerate()
        .map(|(i, cols)| {
            let t = train.select_indices(cols);
            let model = rulefit_fit(&t, rf, derive_seed(seed, 100 + i as u64))?;
            let names = t.names();
            let v = valid.select_indices(cols);
            let pred = model.predict(&v.matrix, &names)?;
            Ok(SubsetScore { features: names, mape: mape(&v.target, &pred)?, n_rules: model.n_rules() })
        })
        .collect();
    // a subset of uninformative columns can fail the screen; skip it
    let mut scored = Vec::new();
    let mut last_err = None;
    for (r, cols) in results.into_iter().zip(&subsets) {
        match r {
            Ok(s) => scored.push(s),
            Err(e) => {
                log::debug!("subset {cols:?} skipped: {e}");
                last_err = Some(e);
            }
        }
    }
    if scored.is_empty() {
        return Err(last_err.expect("budget is positive"));
    }
    scored.sort_by(|a, b| a.mape.total_cmp(&b.mape));
    Ok(scored)
}

/// Distinct sorted column subsets; the full set comes first when it fits
/// under the size cap.
fn sample_subsets(p: usize, lo: usize, hi: usize, budget: usize, seed: u64) -> Vec<Vec<usize>> {
    let mut seen = BTreeSet::new();
    let mut out = Vec::new();
    if hi == p {
        seen.insert((0..p).collect::<Vec<_>>());
        out.push((0..p).collect());
    }
    let total: f64 = (lo..=hi).map(|k| binomial(p, k)).sum();
    let want = budget.min(total.min(usize::MAX as f64) as usize);
    let mut r = stream(seed, 0);
    // rejection sampling; the attempt cap only matters when `want` is close to `total`
    let mut attempts = 0usize;
    while out.len() < want && attempts < 1000 * budget {
        attempts += 1;
        let k = r.random_range(lo..=hi);
        let mut s = sample(&mut r, p, k).into_vec();
        s.sort_unstable();
        if seen.insert(s.clone()) {
            out.push(s);
        }
    }
    out
}

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}
