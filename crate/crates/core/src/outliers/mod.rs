//! Outlier detection: territorial k-means, per-cluster robust filters,
//! DBSCAN on building characteristics and RANSAC trend isolation.

pub mod clean;
pub mod dbscan;
pub mod filter;
pub mod kmeans;
pub mod ransac;

pub use clean::{clean_pipeline, OutlierConfig, OutlierReport, ReportEntry};
pub use dbscan::{dbscan, NOISE};
pub use filter::{robust_filter, FilterMethod, FilterOutcome};
pub use kmeans::{default_k, kmeans, ClusterAssignment};
pub use ransac::{ransac_line, RansacFit, ResidualThreshold};
