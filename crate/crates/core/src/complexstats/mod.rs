//! Empirical load correlations, the CR block matrix, and conversions between
//! real-composite covariance blocks and complex covariance / pseudo-covariance.
//!
//! Notation: for `x = r + j·s`,
//! `Γ = E[(x−μ)(x−μ)ᴴ] = K_rr + K_ss + j(K_sr − K_rs)` and
//! `C = E[(x−μ)(x−μ)ᵀ] = K_rr − K_ss + j(K_sr + K_rs)`, where `K_rs = E[r sᵀ]`.

mod correlation;
mod covariance;
mod gaussian;
mod nearest_pd;

pub use correlation::{
    build_cr_matrix, cr_from_profiles, empirical_correlation, CorrelationMatrix, LoadProfile,
};
pub use covariance::{
    assemble_complex_covariance, complex_from_real_composite, real_composite_from_complex,
    sd_from_error, RealCompositeCovariance,
};
pub use gaussian::ComplexGaussian;
pub use nearest_pd::{nearest_pd_correlation, NEAREST_PD_MAX_ITERATIONS, NEAREST_PD_TOLERANCE};
