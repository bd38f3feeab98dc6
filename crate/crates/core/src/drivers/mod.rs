//! The mixed Gaussian driver `(b^H, w)` on dyadic grids and its
//! Cameron–Martin space.

mod cameron_martin;
mod covariance;
mod grid;

pub use cameron_martin::{
    cm_basis_element, cm_inner_product, cm_norm_sq, discrete_cm_norm_sq, discrete_pairing, BasisEntry,
    BlockKind, CmBasis, CmElement, PairingKernel,
};
pub use covariance::{fbm_covariance, fbm_increment_covariance, rng_stream, sample_mixed_path, CovarianceFactor};
pub use grid::GridPath;
