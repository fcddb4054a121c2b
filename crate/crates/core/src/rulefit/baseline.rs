use serde::{Deserialize, Serialize};

use super::tree::{fit_forest, forest_predict, Forest, ForestParams, TreeParams};
use crate::dataset::FeatureTable;
use crate::error::{Error, Result};
use crate::linalg::Matrix;

/// Forest used on its own as a price model, grown deeper than the rule
/// generator.
pub fn baseline_forest_params() -> ForestParams {
    ForestParams { n_trees: 200, tree: TreeParams { max_depth: 12, min_leaf: 5, feature_subsample: None }, bootstrap: true }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestModel {
    pub features: Vec<String>,
    pub forest: Forest,
}

impl ForestModel {
    pub fn fit(table: &FeatureTable, params: &ForestParams, seed: u64) -> Result<ForestModel> {
        let forest = fit_forest(&table.matrix, &table.target, params, seed)?;
        Ok(ForestModel { features: table.names(), forest })
    }

    /// Predicts from a matrix whose columns are named by `names`, in any
    /// order.
    pub fn predict(&self, x: &Matrix, names: &[String]) -> Result<Vec<f64>> {
        let idx: Vec<usize> = self
            .features
            .iter()
            .map(|f| names.iter().position(|n| n == f).ok_or_else(|| Error::MissingFeature(f.clone())))
            .collect::<Result<_>>()?;
        let x = Matrix::from_fn(x.nrows(), idx.len(), |i, k| x[(i, idx[k])]);
        Ok(forest_predict(&self.forest, &x))
    }

    pub fn predict_table(&self, table: &FeatureTable) -> Result<Vec<f64>> {
        self.predict(&table.matrix, &table.names())
    }
}
