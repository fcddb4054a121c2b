//! Explanatory variables: projection to meters, POI distances and counts,
//! road-graph centrality and its interpolated surface, PCA aggregates and
//! ratio features.

pub mod builder;
pub mod graph;
pub mod network;
pub mod pca;
pub mod projection;
pub mod rbf;
pub mod spatial;

pub use builder::{build_features, FeatureConfig, FeatureDef, FeatureInputs, Poi, TargetKind};
pub use graph::{harmonic_centrality, road_distance, RoadGraph};
pub use network::{development_of_road_network, SurfaceOptions};
pub use pca::{pca_first_component, PcaComponent};
pub use projection::{centroid, project};
pub use rbf::{rbf_eval, rbf_fit, CentralitySurface};
pub use spatial::{count_within_radius, nearest_distance, ratio_feature};
