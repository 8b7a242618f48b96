//! Iterative marginal reallocation.
//!
//! Starting from a symmetric non-negative wavefunction phi with marginal rho,
//! the scheme drives the marginal onto a target density rho_n by repeatedly
//! multiplying phi with sqrt(1 - S), where S averages per-particle shaving
//! ratios over the excess set (nodes whose current marginal exceeds the
//! target). The excess integral contracts by a factor (N-1)/N per step. The
//! limit marginal sits below the target everywhere; the remaining deficit is
//! refilled exactly by a product-form correction term, and the result is
//! renormalized to unit mass.

use crate::error::{Error, Result};
use crate::field::{compensated_sum, relative_l1_error, ConfigField, DensityField, ScalarField};
use crate::tol::{MARGINAL_AGREEMENT_TOL, MASS_DEFECT_MAX, Q_FLOOR, SIGMA_FLOOR};
use crate::trace::Tracer;

/// Nodes where the marginal strictly exceeds the target.
pub fn excess_set(sigma: &ScalarField, target: &DensityField) -> Vec<bool> {
    sigma
        .values()
        .iter()
        .zip(target.values())
        .map(|(s, r)| s > r)
        .collect()
}

/// The shaving field S(X) = (1/N) sum_j [(sigma - rho_n)/sigma](x_j) over
/// masked nodes; takes values in [0, 1] and is symmetric by construction.
pub fn shrink_factor(
    sigma: &ScalarField,
    target: &DensityField,
    mask: &[bool],
) -> Result<ConfigField> {
    let grid = *sigma.grid();
    let ratios = shaving_ratios(sigma, target, mask)?;
    let n = grid.n_particles();
    let inv_n = 1.0 / n as f64;
    let values = (0..grid.config_len())
        .map(|flat| {
            let mut sum = 0.0;
            for j in 0..n {
                sum += ratios[grid.block_index(flat, j)];
            }
            sum * inv_n
        })
        .collect();
    ConfigField::new_real(grid, values)
}

/// Per-node ratio (sigma - rho_n)/sigma on the excess set, zero elsewhere.
fn shaving_ratios(
    sigma: &ScalarField,
    target: &DensityField,
    mask: &[bool],
) -> Result<Vec<f64>> {
    sigma
        .values()
        .iter()
        .zip(target.values())
        .zip(mask)
        .map(|((s, r), &masked)| {
            if !masked {
                Ok(0.0)
            } else if *s < SIGMA_FLOOR {
                // Masked nodes satisfy sigma > rho_n >= 0; underflow here
                // means the instance is broken, not small.
                Err(Error::DivisionFloor {
                    value: *s,
                    floor: SIGMA_FLOOR,
                })
            } else {
                Ok((s - r) / s)
            }
        })
        .collect()
}

/// One iterate of the reallocation scheme.
#[derive(Debug, Clone)]
pub struct ReallocState {
    k: usize,
    phi: ConfigField,
    sigma: ScalarField,
    excess: Vec<bool>,
    residual: f64,
    min_deficit: f64,
}

impl ReallocState {
    /// Start the scheme at phi. Strips -0.0 sign bits, rejects genuinely
    /// negative or asymmetric input.
    pub fn new(phi: &ConfigField, target: &DensityField) -> Result<Self> {
        if phi.grid() != target.grid() {
            return Err(Error::InvalidArgument(
                "wavefunction and target live on different grids".into(),
            ));
        }
        let cleaned = phi
            .real_values()?
            .iter()
            .map(|&v| {
                if v < 0.0 {
                    Err(Error::InvalidArgument(format!(
                        "reallocation needs a non-negative field, found {v}"
                    )))
                } else {
                    Ok(v.abs())
                }
            })
            .collect::<Result<Vec<_>>>()?;
        let phi = ConfigField::new_real(*phi.grid(), cleaned)?;
        let sigma = phi.marginal()?;
        Self::assemble(0, phi, sigma, target)
    }

    fn assemble(
        k: usize,
        phi: ConfigField,
        sigma: ScalarField,
        target: &DensityField,
    ) -> Result<Self> {
        let excess = excess_set(&sigma, target);
        let weight = sigma.grid().scalar_weight();
        let residual = compensated_sum(
            sigma
                .values()
                .iter()
                .zip(target.values())
                .zip(&excess)
                .filter(|(_, &m)| m)
                .map(|((s, r), _)| s - r),
        ) * weight;
        let min_deficit = sigma
            .values()
            .iter()
            .zip(target.values())
            .map(|(s, r)| r - s)
            .fold(f64::INFINITY, f64::min);
        Ok(ReallocState {
            k,
            phi,
            sigma,
            excess,
            residual,
            min_deficit,
        })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn phi(&self) -> &ConfigField {
        &self.phi
    }

    pub fn sigma(&self) -> &ScalarField {
        &self.sigma
    }

    pub fn excess_mask(&self) -> &[bool] {
        &self.excess
    }

    /// Integral of (sigma - rho_n) over the excess set.
    pub fn residual(&self) -> f64 {
        self.residual
    }

    /// Most negative entry of rho_n - sigma (non-negative once converged).
    pub fn min_deficit(&self) -> f64 {
        self.min_deficit
    }

    /// One multiplicative shaving step.
    pub fn step(&self, target: &DensityField) -> Result<ReallocState> {
        let shrink = shrink_factor(&self.sigma, target, &self.excess)?;
        let phi = self.phi.real_values()?;
        let values = phi
            .iter()
            .zip(shrink.real_values()?)
            // 1 - S may round to a tiny negative when S accumulates to 1.
            .map(|(p, s)| p * (1.0 - s).max(0.0).sqrt())
            .collect();
        let phi_next = ConfigField::new_real(*self.phi.grid(), values)?;
        let sigma_next = phi_next.marginal()?;
        Self::assemble(self.k + 1, phi_next, sigma_next, target)
    }
}

/// Iteration budget from the geometric contraction of the excess integral,
/// with headroom for the pointwise deficit to clear as well.
pub fn iteration_budget(n_particles: usize, tol: f64) -> usize {
    let rate = (n_particles as f64 - 1.0) / n_particles as f64;
    ((tol / 2.0).ln() / rate.ln()).ceil() as usize + 16
}

/// Limit of the shaving iteration.
#[derive(Debug, Clone)]
pub struct ReallocLimit {
    pub phi_inf: ConfigField,
    pub sigma_inf: ScalarField,
    pub iterations: usize,
    pub residual: f64,
    pub min_deficit: f64,
    /// Validated marginal of the input (the source density rho).
    pub rho: DensityField,
}

/// Run the scheme until the excess residual falls below `tol` and the
/// pointwise deficit clears -tol, or `k_max` steps have been taken.
pub fn realloc_limit(
    phi: &ConfigField,
    target: &DensityField,
    tol: f64,
    k_max: usize,
    tracer: &mut dyn Tracer,
) -> Result<ReallocLimit> {
    if !(tol > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "stopping tolerance must be positive, got {tol}"
        )));
    }
    let mut state = ReallocState::new(phi, target)?;
    // The input marginal must itself be a probability density.
    let rho = DensityField::new(state.sigma().clone())
        .map_err(|e| Error::InvalidArgument(format!("input marginal is not a density: {e}")))?;
    tracer.realloc(state.k(), state.residual(), state.phi().mass(), state.min_deficit());
    while state.residual() > tol || state.min_deficit() < -tol {
        if state.k() >= k_max {
            return Err(Error::Convergence {
                iterations: state.k(),
                residual: state.residual(),
                tol,
            });
        }
        state = state.step(target)?;
        tracer.realloc(state.k(), state.residual(), state.phi().mass(), state.min_deficit());
    }
    Ok(ReallocLimit {
        iterations: state.k,
        residual: state.residual,
        min_deficit: state.min_deficit,
        phi_inf: state.phi,
        sigma_inf: state.sigma,
        rho,
    })
}

/// Product-form correction refilling the deficit g = (rho_n - sigma_inf)+:
/// alpha(X) = prod_j g(x_j) / q^(N-1) with q the deficit mass. Returns the
/// zero field when q falls below the floor.
pub fn correction(sigma_inf: &ScalarField, target: &DensityField) -> Result<(ConfigField, f64)> {
    let grid = *sigma_inf.grid();
    let deficit: Vec<f64> = target
        .values()
        .iter()
        .zip(sigma_inf.values())
        .map(|(r, s)| (r - s).max(0.0))
        .collect();
    let q = compensated_sum(deficit.iter().copied()) * grid.scalar_weight();
    if q <= Q_FLOOR {
        return Ok((ConfigField::constant_real(grid, 0.0)?, 0.0));
    }
    let n = grid.n_particles();
    let norm = q.powi(n as i32 - 1);
    let values = (0..grid.config_len())
        .map(|flat| {
            let mut prod = 1.0;
            for j in 0..n {
                prod *= deficit[grid.block_index(flat, j)];
            }
            prod / norm
        })
        .collect();
    Ok((ConfigField::new_real(grid, values)?, q))
}

/// Full output of the L2 matching stage.
#[derive(Debug, Clone)]
pub struct ReallocResult {
    pub phi_inf: ConfigField,
    pub sigma_inf: ScalarField,
    pub q_n: f64,
    pub phi_out: ConfigField,
    pub iterations: usize,
    pub residual: f64,
    pub mass_defect: f64,
    /// Relative L1 error of marginal(phi_out) against the target.
    pub marginal_error: f64,
    /// Validated marginal of the input.
    pub rho: DensityField,
}

/// Shave to the limit, refill the deficit, renormalize to unit mass.
pub fn l2_match(
    phi: &ConfigField,
    target: &DensityField,
    tol: f64,
    tracer: &mut dyn Tracer,
) -> Result<ReallocResult> {
    let k_max = iteration_budget(phi.grid().n_particles(), tol);
    let limit = realloc_limit(phi, target, tol, k_max, tracer)?;
    let (alpha, q_n) = correction(&limit.sigma_inf, target)?;
    let raw: Vec<f64> = limit
        .phi_inf
        .real_values()?
        .iter()
        .zip(alpha.real_values()?)
        .map(|(p, a)| (p * p + a).sqrt())
        .collect();
    let raw = ConfigField::new_real(*phi.grid(), raw)?;
    let mass = raw.mass();
    let mass_defect = (mass - 1.0).abs();
    if mass_defect > MASS_DEFECT_MAX {
        return Err(Error::MassDefect {
            defect: mass_defect,
            limit: MASS_DEFECT_MAX,
        });
    }
    let phi_out = raw.scale(1.0 / mass.sqrt())?;
    let marginal_error = relative_l1_error(&phi_out.marginal()?, target)?;
    let error_budget = MARGINAL_AGREEMENT_TOL.max(4.0 * tol);
    if marginal_error > error_budget {
        return Err(Error::Consistency(format!(
            "restored marginal misses the target by {marginal_error:.3e} (budget {error_budget:.3e})"
        )));
    }
    Ok(ReallocResult {
        phi_inf: limit.phi_inf,
        sigma_inf: limit.sigma_inf,
        q_n,
        phi_out,
        iterations: limit.iterations,
        residual: limit.residual,
        mass_defect,
        marginal_error,
        rho: limit.rho,
    })
}
