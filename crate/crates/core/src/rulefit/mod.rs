//! Rule ensembles: CART trees, a random forest that generates candidate
//! rules, and a LASSO over linear terms plus rule indicators.

pub mod baseline;
pub mod lasso;
pub mod model;
pub mod rules;
pub mod search;
pub mod tree;

pub use baseline::{baseline_forest_params, ForestModel};
pub use lasso::{lambda_grid, lambda_max, lasso_cd, lasso_cv, lasso_path, CvPoint, CvResult, LassoFit, LassoParams};
pub use model::{rulefit_fit, rulefit_predict, screen_features, LambdaRule, RuleFitConfig, RuleFitModel, Term, TermKind};
pub use rules::{extract_rules, rule_matrix, Condition, Rule};
pub use search::{subset_search, SubsetScore, SubsetSearch};
pub use tree::{fit_forest, fit_tree, forest_predict, Forest, ForestParams, Tree, TreeNode, TreeParams};
