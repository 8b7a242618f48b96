//! Centralized numerical tolerances and guards.
//!
//! Every threshold used by the library lives here so that the validation
//! suite and the implementation cannot drift apart.

/// Largest number of f64 elements a product-grid field may hold (256 MiB).
pub const FIELD_ELEM_BUDGET: u128 = 1 << 25;

/// A probability density must integrate to 1 within this relative error.
pub const DENSITY_NORM_TOL: f64 = 1e-12;

/// Per-axis marginals of a symmetric field must agree to this (max norm).
pub const MARGINAL_AGREEMENT_TOL: f64 = 1e-10;

/// Default stopping tolerance for the reallocation residual.
///
/// Tight enough that the unit-mass renormalization after the correction term
/// keeps the restored marginal within 1e-10 relative L1 of the target.
pub const REALLOC_DEFAULT_TOL: f64 = 1e-12;

/// Deficit integrals below this are treated as zero and the correction term
/// is dropped, avoiding 0/0 in the product normalization.
pub const Q_FLOOR: f64 = 1e-14;

/// On the excess set the current marginal strictly dominates the target, so
/// it is positive; anything below this indicates underflow, not a small value.
pub const SIGMA_FLOOR: f64 = 1e-300;

/// Hard failure threshold for the unit-mass defect after the correction term.
pub const MASS_DEFECT_MAX: f64 = 1e-8;

/// Gaussian stencils are truncated at this many standard deviations and then
/// renormalized; the discarded mass is below 1e-9.
pub const TRUNC_RADIUS_SIGMAS: f64 = 6.0;

/// The regularized single-particle density is a Gaussian convolution of a
/// probability density, hence strictly positive; values below this where the
/// regularized plan carries mass indicate underflow.
pub const RHO_EPS_FLOOR: f64 = 1e-300;

/// The two routes to the regularized density (marginal of the regularized
/// plan vs. direct convolution of the density) must agree to this; beyond it
/// the smoothing aborts.
pub const DUAL_PATH_ERR: f64 = 1e-9;

/// Mass allowed to leak past the box boundary during convolution.
pub const LEAKAGE_MAX: f64 = 1e-8;

/// Nodes where |psi| falls below this fraction of max|psi| take sign +1.
pub const SIGN_FLOOR_REL: f64 = 1e-13;

/// Inputs to the circle lifting may exceed [-1, 1] by at most this much
/// (and are clamped); anything larger is a range error.
pub const LIFT_CLAMP: f64 = 1e-12;

/// Generated targets must carry at most this much mass outside the safe core
/// [-L/2, L/2]^d of the box.
pub const SUPPORT_MASS_MAX: f64 = 1e-10;

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn guards_are_positive_and_ordered() {
        assert!(DENSITY_NORM_TOL < MARGINAL_AGREEMENT_TOL);
        assert!(REALLOC_DEFAULT_TOL < MARGINAL_AGREEMENT_TOL);
        assert!(SIGMA_FLOOR > 0.0 && RHO_EPS_FLOOR > 0.0);
        assert!(Q_FLOOR > 0.0 && Q_FLOOR < DENSITY_NORM_TOL);
        assert!(DUAL_PATH_ERR > 0.0 && LEAKAGE_MAX > 0.0);
    }
}
