pub mod analysis;
pub mod dist;
pub mod error;
pub mod bayesfit;
pub mod exgauss;
pub mod indices;
pub mod io;
pub mod mcmc;
pub mod mixture;
pub mod quadrature;
pub mod racesim;
pub mod rng;
pub mod sotest;
pub mod special;
pub mod tsbpa;

pub use dist::ParametricDistribution;
pub use error::{Error, Result};
pub use exgauss::{ExGaussianParams, RawMoments, ShapeStats};
pub use mixture::MixtureSsrt;
