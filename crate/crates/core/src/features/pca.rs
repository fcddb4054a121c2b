use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Matrix;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PcaComponent {
    pub scores: Vec<f64>,
    pub loadings: Vec<f64>,
    pub eigenvalue: f64,
    pub explained_variance_ratio: f64,
}

/// Leading principal component of standardized columns. The eigenvector of
/// `XᵀX/n` (the correlation matrix for z-scored input) is oriented so its
/// loadings sum to a non-negative number.
pub fn pca_first_component(x: &Matrix) -> Result<PcaComponent> {
    let (n, p) = x.shape();
    if p < 2 {
        return Err(Error::invalid("PCA aggregation needs at least two columns"));
    }
    if n == 0 {
        return Err(Error::invalid("PCA on an empty matrix"));
    }
    let cov = (x.transpose() * x) / n as f64;
    let eig = cov.clone().symmetric_eigen();
    let mut best = 0;
    for i in 1..p {
        if eig.eigenvalues[i] > eig.eigenvalues[best] {
            best = i;
        }
    }
    let mut loadings: Vec<f64> = eig.eigenvectors.column(best).iter().copied().collect();
    let norm = loadings.iter().map(|v| v * v).sum::<f64>().sqrt();
    loadings.iter_mut().for_each(|v| *v /= norm);
    if loadings.iter().sum::<f64>() < 0.0 {
        loadings.iter_mut().for_each(|v| *v = -*v);
    }
    let scores: Vec<f64> = (0..n).map(|r| (0..p).map(|c| x[(r, c)] * loadings[c]).sum()).collect();
    let trace: f64 = cov.diagonal().sum();
    let eigenvalue = eig.eigenvalues[best];
    Ok(PcaComponent {
        scores,
        loadings,
        eigenvalue,
        explained_variance_ratio: if trace > 0.0 { eigenvalue / trace } else { 0.0 },
    })
}
