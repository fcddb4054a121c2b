use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::tree::Forest;
use crate::error::{Error, Result};
use crate::linalg::Matrix;

/// Interval condition `lower < x ≤ upper` on one feature; either bound may
/// be open.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Condition {
    pub feature: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub greater_than: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub at_most: Option<f64>,
}

impl Condition {
    pub fn holds(&self, v: f64) -> bool {
        self.greater_than.is_none_or(|t| v > t) && self.at_most.is_none_or(|t| v <= t)
    }
}

impl fmt::Display for Condition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (self.greater_than, self.at_most) {
            (Some(a), Some(b)) => write!(f, "{0} > {a} & {0} <= {b}", self.feature),
            (Some(a), None) => write!(f, "{} > {a}", self.feature),
            (None, Some(b)) => write!(f, "{} <= {b}", self.feature),
            (None, None) => write!(f, "{} is any", self.feature),
        }
    }
}

/// Conjunction of conditions, at most one per feature.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Rule {
    pub conditions: Vec<Condition>,
    /// Fraction of training rows satisfying the rule.
    pub support: f64,
    /// Summed impurity improvement of the splits along the rule's path.
    pub score: f64,
}

impl Rule {
    pub fn holds(&self, row: &dyn Fn(&str) -> Option<f64>) -> Result<bool> {
        for c in &self.conditions {
            let v = row(&c.feature).ok_or_else(|| Error::MissingFeature(c.feature.clone()))?;
            if !c.holds(v) {
                return Ok(false);
            }
        }
        Ok(true)
    }
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.conditions.iter().map(|c| c.to_string()).collect();
        write!(f, "{}", parts.join(" & "))
    }
}

#[derive(Clone)]
struct Bound {
    feature: usize,
    gt: Option<f64>,
    le: Option<f64>,
}

fn add_condition(path: &[Bound], feature: usize, threshold: f64, left: bool) -> Vec<Bound> {
    let mut out = path.to_vec();
    let pos = match out.iter().position(|b| b.feature == feature) {
        Some(p) => p,
        None => {
            out.push(Bound { feature, gt: None, le: None });
            out.sort_by_key(|b| b.feature);
            out.iter().position(|b| b.feature == feature).unwrap_or(0)
        }
    };
    let b = &mut out[pos];
    if left {
        b.le = Some(b.le.map_or(threshold, |t| t.min(threshold)));
    } else {
        b.gt = Some(b.gt.map_or(threshold, |t| t.max(threshold)));
    }
    out
}

type Key = Vec<(usize, Option<u64>, Option<u64>)>;

fn key(path: &[Bound]) -> Key {
    path.iter().map(|b| (b.feature, b.gt.map(f64::to_bits), b.le.map(f64::to_bits))).collect()
}

fn satisfies(path: &[Bound], x: &Matrix, i: usize) -> bool {
    path.iter().all(|b| {
        let v = x[(i, b.feature)];
        b.gt.is_none_or(|t| v > t) && b.le.is_none_or(|t| v <= t)
    })
}

/// Candidate rules from every non-root node of every tree. Conditions on
/// the same feature are merged, exact duplicates dropped (keeping the
/// highest score), rules with training support 0 or 1 discarded, and the
/// `rule_cap` best by score returned (ties keep discovery order).
pub fn extract_rules(forest: &Forest, x: &Matrix, names: &[String], rule_cap: usize) -> Result<Vec<Rule>> {
    if names.len() != x.ncols() {
        return Err(Error::LengthMismatch { expected: x.ncols(), got: names.len() });
    }
    let mut found: Vec<(Vec<Bound>, f64)> = Vec::new();
    let mut index: HashMap<Key, usize> = HashMap::new();
    for tree in &forest.trees {
        let mut stack: Vec<(usize, Vec<Bound>, f64)> = vec![(0, vec![], 0.0)];
        while let Some((id, path, score)) = stack.pop() {
            let Some(s) = &tree.nodes[id].split else { continue };
            let score = score + s.improvement;
            let children = [(s.left, true), (s.right, false)].map(|(child, left)| {
                let p = add_condition(&path, s.feature, s.threshold, left);
                let k = key(&p);
                match index.get(&k) {
                    Some(&at) => found[at].1 = found[at].1.max(score),
                    None => {
                        index.insert(k, found.len());
                        found.push((p.clone(), score));
                    }
                }
                (child, p)
            });
            // right pushed first so the left subtree is walked first
            for (child, p) in children.into_iter().rev() {
                stack.push((child, p, score));
            }
        }
    }
    let n = x.nrows() as f64;
    let mut rules: Vec<Rule> = found
        .into_iter()
        .filter_map(|(path, score)| {
            let hits = (0..x.nrows()).filter(|&i| satisfies(&path, x, i)).count();
            let support = hits as f64 / n;
            (hits > 0 && hits < x.nrows()).then(|| Rule {
                conditions: path
                    .iter()
                    .map(|b| Condition { feature: names[b.feature].clone(), greater_than: b.gt, at_most: b.le })
                    .collect(),
                support,
                score,
            })
        })
        .collect();
    // stable sort keeps discovery order among equal scores
    rules.sort_by(|a, b| b.score.total_cmp(&a.score));
    rules.truncate(rule_cap);
    Ok(rules)
}

/// 0/1 indicator matrix: entry `(i, r)` is 1 iff row `i` satisfies rule `r`.
pub fn rule_matrix(rules: &[Rule], x: &Matrix, names: &[String]) -> Result<Matrix> {
    let cols: Vec<Vec<(usize, &Condition)>> = rules
        .iter()
        .map(|r| {
            r.conditions
                .iter()
                .map(|c| {
                    names
                        .iter()
                        .position(|n| *n == c.feature)
                        .map(|j| (j, c))
                        .ok_or_else(|| Error::MissingFeature(c.feature.clone()))
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<_>>()?;
    Ok(Matrix::from_fn(x.nrows(), rules.len(), |i, r| {
        if cols[r].iter().all(|(j, c)| c.holds(x[(i, *j)])) {
            1.0
        } else {
            0.0
        }
    }))
}
