//! Geostatistics: empirical and exponential variograms, ordinary kriging,
//! correlograms, the residual stationarity check and regression-kriging.

pub mod correlogram;
pub mod kriging;
pub mod optim;
pub mod rk;
pub mod stationarity;
pub mod variogram;

pub use correlogram::{correlogram, CorrelogramBin};
pub use kriging::{krige, Kriged, KrigingModel, KrigingOptions};
pub use rk::{rk_fit, rk_predict, RkConfig, RkModel, RkPrediction};
pub use stationarity::{histogram, stationarity_check, HistogramBin, StationarityReport};
pub use variogram::{empirical_variogram, fit_exponential, EmpiricalVariogram, LagBin, VariogramFit, VariogramModel};
