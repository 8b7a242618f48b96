//! Marginal-preserving Gaussian smoothing.
//!
//! The operator regularizes the plan |u|^2 by separable Gaussian convolution,
//! then composes with a product transport kernel that puts the original
//! single-particle density back. Writing rho for the marginal of |u|^2,
//! rho_eps for its mollification and Lambda for the mollified plan, the
//! smoothed plan factorizes as
//!
//!   Theta(X) = prod_j rho(x_j) * (G * kernel)(X),
//!   G(Y) = Lambda(Y) / prod_j rho_eps(y_j),
//!
//! which never materializes the transport kernel on the square of the
//! product grid. The marginal of Theta equals rho identically (up to
//! roundoff), for every epsilon, and sqrt(Theta) is the H1-regular
//! replacement for u.

use crate::error::{Error, Result};
use crate::field::{compensated_sum, ConfigField, ScalarField};
use crate::grid::GridSpec;
use crate::tol::{
    DUAL_PATH_ERR, LEAKAGE_MAX, MARGINAL_AGREEMENT_TOL, RHO_EPS_FLOOR, TRUNC_RADIUS_SIGMAS,
};
use crate::trace::Tracer;

/// One-axis discrete Gaussian stencil with variance parameter epsilon,
/// truncated at six standard deviations and renormalized to unit discrete
/// mass. Product over axes gives the d- and Nd-dimensional kernels.
#[derive(Debug, Clone)]
pub struct Mollifier {
    epsilon: f64,
    grid: GridSpec,
    radius: usize,
    taps: Vec<f64>,
}

impl Mollifier {
    /// Discrete samples of the Gaussian with variance epsilon.
    pub fn gaussian(epsilon: f64, grid: &GridSpec) -> Result<Self> {
        if !(epsilon > 0.0) || !epsilon.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "mollifier width must be positive, got {epsilon}"
            )));
        }
        let h = grid.spacing();
        let sigma = epsilon.sqrt();
        if sigma < h / 2.0 {
            return Err(Error::Resolution {
                width: sigma,
                floor: h / 2.0,
            });
        }
        let radius = (TRUNC_RADIUS_SIGMAS * sigma / h).ceil() as usize;
        let mut taps = vec![0.0; 2 * radius + 1];
        for k in 0..=radius {
            let z = k as f64 * h;
            let v = (-z * z / (2.0 * epsilon)).exp();
            taps[radius + k] = v;
            taps[radius - k] = v;
        }
        let total: f64 = compensated_sum(taps.iter().copied()) * h;
        for t in &mut taps {
            *t /= total;
        }
        Ok(Mollifier {
            epsilon,
            grid: *grid,
            radius,
            taps,
        })
    }

    /// Single-tap stencil (a discrete Dirac): convolution is the identity.
    pub fn identity(grid: &GridSpec) -> Self {
        Mollifier {
            epsilon: 0.0,
            grid: *grid,
            radius: 0,
            taps: vec![1.0 / grid.spacing()],
        }
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn radius(&self) -> usize {
        self.radius
    }

    pub fn taps(&self) -> &[f64] {
        &self.taps
    }

    /// Discrete mass h * sum of taps (1 after renormalization).
    pub fn mass(&self) -> f64 {
        compensated_sum(self.taps.iter().copied()) * self.grid.spacing()
    }

    /// Discrete second moment h * sum taps * (k h)^2; close to epsilon for
    /// well-resolved stencils.
    pub fn second_moment(&self) -> f64 {
        let h = self.grid.spacing();
        compensated_sum(self.taps.iter().enumerate().map(|(i, t)| {
            let z = (i as isize - self.radius as isize) as f64 * h;
            t * z * z
        })) * h
    }

    /// Stencil value at lattice offset k (zero outside the truncation).
    pub fn tap_at(&self, k: isize) -> f64 {
        if k.unsigned_abs() > self.radius {
            0.0
        } else {
            self.taps[(k + self.radius as isize) as usize]
        }
    }
}

/// Separable zero-padded convolution along every axis of a row-major field.
/// `taps` has length 2 * radius + 1 and discrete mass h * sum(taps).
pub(crate) fn convolve_axes(
    values: &[f64],
    axes: usize,
    m: usize,
    h: f64,
    taps: &[f64],
    radius: usize,
) -> Vec<f64> {
    let r = radius as isize;
    let mut cur = values.to_vec();
    let mut line = vec![0.0; m];
    let mut out_line = vec![0.0; m];
    for axis in 0..axes {
        let stride = m.pow((axes - 1 - axis) as u32);
        let block = stride * m;
        let n_blocks = cur.len() / block;
        for b in 0..n_blocks {
            for inner in 0..stride {
                let base = b * block + inner;
                for (t, slot) in line.iter_mut().enumerate() {
                    *slot = cur[base + t * stride];
                }
                for pos in 0..m {
                    let k_lo = (-r).max(pos as isize - (m as isize - 1));
                    let k_hi = r.min(pos as isize);
                    let mut acc = 0.0;
                    for k in k_lo..=k_hi {
                        acc += taps[(k + r) as usize] * line[(pos as isize - k) as usize];
                    }
                    out_line[pos] = acc * h;
                }
                for (t, v) in out_line.iter().enumerate() {
                    cur[base + t * stride] = *v;
                }
            }
        }
    }
    cur
}

fn convolve_all_axes(values: &[f64], axes: usize, m: usize, moll: &Mollifier) -> Vec<f64> {
    convolve_axes(
        values,
        axes,
        m,
        moll.grid.spacing(),
        &moll.taps,
        moll.radius,
    )
}

/// Mollified plan Lambda = |u|^2 convolved with the product kernel, plus the
/// mass that leaked past the box. Fails when the leak exceeds the budget.
pub fn lambda_eps(u: &ConfigField, moll: &Mollifier) -> Result<(ConfigField, f64)> {
    let grid = *u.grid();
    let w = u.abs2_values();
    let mass_before = compensated_sum(w.iter().copied()) * grid.config_weight();
    let conv = convolve_all_axes(&w, grid.config_axes(), grid.points_per_axis(), moll);
    let lambda = ConfigField::new_real(grid, conv)?;
    let mass_after = compensated_sum(lambda.real_values()?.iter().copied()) * grid.config_weight();
    let leakage = mass_before - mass_after;
    if leakage > LEAKAGE_MAX {
        return Err(Error::Leakage {
            leakage,
            limit: LEAKAGE_MAX,
        });
    }
    Ok((lambda, leakage))
}

struct SmoothParts {
    lambda: ConfigField,
    leakage: f64,
    rho: ScalarField,
    rho_eps: ScalarField,
    dual_gap: f64,
}

/// Shared pipeline: mollified plan, its marginal, and the mollified density,
/// cross-checked against each other.
fn smooth_parts(u: &ConfigField, moll: &Mollifier) -> Result<SmoothParts> {
    let grid = *u.grid();
    let (lambda, leakage) = lambda_eps(u, moll)?;
    let rho = u.marginal()?;
    let conv = convolve_all_axes(
        rho.values(),
        grid.scalar_axes(),
        grid.points_per_axis(),
        moll,
    );
    let rho_eps = ScalarField::new(grid, conv)?;
    let via_marginal = lambda.plan_marginal()?;
    let dual_gap = via_marginal
        .values()
        .iter()
        .zip(rho_eps.values())
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    if dual_gap > DUAL_PATH_ERR {
        return Err(Error::Consistency(format!(
            "mollified density disagrees between its two routes by {dual_gap:.3e}"
        )));
    }
    Ok(SmoothParts {
        lambda,
        leakage,
        rho,
        rho_eps,
        dual_gap,
    })
}

/// Mollified single-particle density, computed both as the marginal of the
/// mollified plan and as the mollified marginal; the two must agree.
pub fn rho_eps(u: &ConfigField, moll: &Mollifier) -> Result<ScalarField> {
    Ok(smooth_parts(u, moll)?.rho_eps)
}

/// Output of the smoothing operator.
#[derive(Debug, Clone)]
pub struct SmoothingOutput {
    /// sqrt(Theta), the H1-regular replacement for u.
    pub u_eps: ConfigField,
    /// The smoothed plan Theta itself.
    pub theta: ConfigField,
    /// Mollified single-particle density.
    pub rho_eps: ScalarField,
    /// Relative L1 error of marginal(Theta) against marginal(|u|^2).
    pub marginal_error: f64,
    /// Mass leaked past the box during convolution.
    pub leakage: f64,
    /// Max-norm gap between the two routes to rho_eps.
    pub dual_gap: f64,
}

/// Apply the marginal-preserving smoothing operator to u.
pub fn theta_eps(u: &ConfigField, moll: &Mollifier) -> Result<SmoothingOutput> {
    let grid = *u.grid();
    let parts = smooth_parts(u, moll)?;
    let n = grid.n_particles();
    let lam = parts.lambda.real_values()?;
    let re = parts.rho_eps.values();

    let mut g = vec![0.0; lam.len()];
    for (flat, (&l, slot)) in lam.iter().zip(&mut g).enumerate() {
        if l == 0.0 {
            continue;
        }
        let mut denom = 1.0;
        for j in 0..n {
            denom *= re[grid.block_index(flat, j)];
        }
        if denom < RHO_EPS_FLOOR {
            return Err(Error::DivisionFloor {
                value: denom,
                floor: RHO_EPS_FLOOR,
            });
        }
        *slot = l / denom;
    }

    let conv = convolve_all_axes(&g, grid.config_axes(), grid.points_per_axis(), moll);
    let rho = parts.rho.values();
    let theta_values: Vec<f64> = conv
        .iter()
        .enumerate()
        .map(|(flat, c)| {
            let mut prefactor = 1.0;
            for j in 0..n {
                prefactor *= rho[grid.block_index(flat, j)];
            }
            let t = prefactor * c;
            debug_assert!(t >= 0.0);
            t
        })
        .collect();
    let theta = ConfigField::new_real(grid, theta_values)?;
    let u_eps = ConfigField::new_real(
        grid,
        theta.real_values()?.iter().map(|t| t.sqrt()).collect(),
    )?;

    let restored = theta.plan_marginal()?;
    let rho_mass = compensated_sum(rho.iter().copied()) * grid.scalar_weight();
    let marginal_error = compensated_sum(
        restored
            .values()
            .iter()
            .zip(rho)
            .map(|(a, b)| (a - b).abs()),
    ) * grid.scalar_weight()
        / rho_mass;
    if marginal_error > MARGINAL_AGREEMENT_TOL {
        return Err(Error::Consistency(format!(
            "smoothing failed to restore the marginal: relative L1 error {marginal_error:.3e}"
        )));
    }
    Ok(SmoothingOutput {
        u_eps,
        theta,
        rho_eps: parts.rho_eps,
        marginal_error,
        leakage: parts.leakage,
        dual_gap: parts.dual_gap,
    })
}

/// sqrt(Theta), the smoothed wavefunction.
pub fn smooth_sqrt(u: &ConfigField, moll: &Mollifier) -> Result<ConfigField> {
    Ok(theta_eps(u, moll)?.u_eps)
}

/// Pair each sequence index n (1-based) with a smoothing width from
/// `eps_levels` so the smoothed sequence tracks the smoothed limit in H1:
/// level k starts at the smallest N_k with
/// ||sqrt(Theta_k[phi_n]) - sqrt(Theta_k[phi])||_H1 <= delta * eps_k for all
/// n >= N_k, and n gets the deepest level whose start it has passed.
pub fn diagonal_schedule(
    phi_seq: &[ConfigField],
    phi: &ConfigField,
    eps_levels: &[f64],
    delta: f64,
    tracer: &mut dyn Tracer,
) -> Result<Vec<(usize, f64)>> {
    if eps_levels.is_empty() {
        return Err(Error::InvalidArgument("eps_levels must be non-empty".into()));
    }
    if eps_levels.windows(2).any(|w| w[1] >= w[0]) || eps_levels.iter().any(|&e| e <= 0.0) {
        return Err(Error::InvalidArgument(
            "eps_levels must be positive and strictly decreasing".into(),
        ));
    }
    if !(delta > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "schedule delta must be positive, got {delta}"
        )));
    }
    if phi_seq.is_empty() {
        return Err(Error::InvalidArgument("empty approximant sequence".into()));
    }

    let n_len = phi_seq.len();
    let mut starts = Vec::with_capacity(eps_levels.len());
    let mut prev_start = 1usize;
    for (k, &eps) in eps_levels.iter().enumerate() {
        let moll = Mollifier::gaussian(eps, phi.grid())?;
        let reference = smooth_sqrt(phi, &moll)?;
        let mut dists = Vec::with_capacity(n_len);
        for item in phi_seq {
            let out = theta_eps(item, &moll)?;
            let dist = out.u_eps.h1_distance(&reference)?;
            tracer.smoothing(eps, out.marginal_error, dist);
            dists.push(dist);
        }
        let threshold = delta * eps;
        // Smallest admissible start not before the previous level's start.
        let mut found = None;
        for n0 in prev_start..=n_len {
            if dists[n0 - 1..].iter().all(|&d| d <= threshold) {
                found = Some(n0);
                break;
            }
        }
        match found {
            Some(n0) => {
                starts.push(n0);
                prev_start = n0;
            }
            None => {
                return Err(Error::ScheduleIncomplete {
                    failed_level: eps,
                    achieved: eps_levels[..k].to_vec(),
                });
            }
        }
    }

    let schedule = (1..=n_len)
        .map(|n| {
            let level = starts
                .iter()
                .rposition(|&n0| n0 <= n)
                .unwrap_or(0);
            (n, eps_levels[level])
        })
        .collect();
    Ok(schedule)
}
