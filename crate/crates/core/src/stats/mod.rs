//! Special functions, adaptive quadrature and seeded sampling.

pub mod quadrature;
pub mod random;
pub mod special;

pub use quadrature::{adaptive_quadrature, adaptive_quadrature_panels, Quadrature, QuadratureConfig};
pub use random::{
    sample_categorical, sample_dirichlet, sample_gamma, sample_mvn, MvnSampler, RngHandle,
    RNG_ALGORITHM,
};
pub use special::{
    digamma, erfc, hermite, ln_gamma, std_normal_cdf, std_normal_pdf, std_normal_quantile,
    trigamma,
};
