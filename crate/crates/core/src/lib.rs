//! Matrix-free geostatistical filtering.
//!
//! A noisy raster is modelled as a sum of independent Gaussian random fields,
//! each given by a spectral model and a local anisotropy field. Covariances
//! are applied as Chebyshev polynomials of a sparse finite-element matrix, and
//! the signal component is extracted by factorial kriging with conjugate
//! gradients. No dense covariance matrix is formed outside [`oracle`].

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod anisotropy;
pub mod error;
pub mod fem;
pub mod mesh;
pub mod scalar;
pub mod sparse;
pub mod special;
pub mod spectral;
pub mod chebfilter;
pub mod cli;
pub mod krige;
pub mod oracle;
pub mod variogram;

pub use error::{Error, Result};
pub use scalar::Scalar;
pub use spectral::{Family, SpectralModel};

pub type TriMesh64 = mesh::TriMesh<f64>;
pub type TriMesh32 = mesh::TriMesh<f32>;
pub type Grid64 = mesh::Grid<f64>;
pub type AnisotropyField64 = anisotropy::AnisotropyField<f64>;
pub type AnisotropyField32 = anisotropy::AnisotropyField<f32>;
pub type FemOperator64 = fem::FemOperator<f64>;
pub type FemOperator32 = fem::FemOperator<f32>;
