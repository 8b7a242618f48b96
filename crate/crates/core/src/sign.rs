//! Sign recovery for real-valued wavefunctions.
//!
//! A real symmetric psi factors as psi = e |psi| with e a {-1,+1} sign field.
//! The sign is smoothed in the weighted Sobolev space H1(|psi|^2 dX): cut off
//! at growing radii, convolved with a compactly supported bump, and paired
//! with the wavefunction sequence so that Lip(e_n) * ||phi_n - |psi||| still
//! vanishes. The circle lifting omega(s) = exp(i (1-s) pi/2) then turns the
//! smoothed signs into unit-modulus phases, and psi_n = omega(e_n) phi_n
//! keeps |psi_n| = phi_n pointwise, so the marginal constraint survives.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::field::{compensated_sum, ConfigField, Neumaier};
use crate::grid::GridSpec;
use crate::smoothing::convolve_axes;
use crate::tol::{LIFT_CLAMP, SIGN_FLOOR_REL};

/// {-1,+1}-valued sign of a real wavefunction.
#[derive(Debug, Clone)]
pub struct SignField {
    e: ConfigField,
}

impl SignField {
    pub fn field(&self) -> &ConfigField {
        &self.e
    }
}

/// Pointwise sign of psi; nodes where |psi| is below a relative floor take
/// +1 (the choice is invisible in all |psi|^2-weighted norms).
pub fn extract_sign(psi: &ConfigField) -> Result<SignField> {
    let v = psi.real_values()?;
    let peak = v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let floor = SIGN_FLOOR_REL * peak;
    let values = v
        .iter()
        .map(|&x| if x.abs() > floor && x < 0.0 { -1.0 } else { 1.0 })
        .collect();
    Ok(SignField {
        e: ConfigField::new_real(*psi.grid(), values)?,
    })
}

/// Forward-difference gradient component along `axis`, zero extension.
fn forward_diff(values: &[f64], grid: &GridSpec, axis: usize, flat: usize) -> f64 {
    let m = grid.points_per_axis();
    let stride = grid.stride(grid.config_axes(), axis);
    let pos = (flat / stride) % m;
    let next = if pos + 1 < m { values[flat + stride] } else { 0.0 };
    (next - values[flat]) / grid.spacing()
}

/// Euclidean norm of the tested weighted-gradient identity with the weighted
/// gradient of f taken to be zero: per component,
/// integral of f * grad(test) * lambda^2 + 2 f * test * lambda * grad(lambda).
/// Vanishes (to quadrature error) when f is the sign of psi and lambda = |psi|.
pub fn weighted_gradient_residual(
    f: &ConfigField,
    lambda: &ConfigField,
    test: &ConfigField,
) -> Result<f64> {
    let grid = *f.grid();
    if lambda.grid() != &grid || test.grid() != &grid {
        return Err(Error::InvalidArgument("grid mismatch".into()));
    }
    let fv = f.real_values()?;
    let lv = lambda.real_values()?;
    let tv = test.real_values()?;
    let weight = grid.config_weight();
    let mut total = 0.0;
    for axis in 0..grid.config_axes() {
        let mut acc = Neumaier::new();
        for flat in 0..fv.len() {
            let dt = forward_diff(tv, &grid, axis, flat);
            let dl = forward_diff(lv, &grid, axis, flat);
            acc.add(fv[flat] * dt * lv[flat] * lv[flat]);
            acc.add(2.0 * fv[flat] * tv[flat] * lv[flat] * dl);
        }
        let component = acc.total() * weight;
        total += component * component;
    }
    Ok(total.sqrt())
}

/// Radial cut-off in configuration space: 1 inside radius n r_unit, 0
/// outside (n+1) r_unit, smoothstep ramp in between. The unit radius is
/// chosen so the inner ball at n = n_levels covers the whole configuration
/// box, the first ball is already non-degenerate, and the Lipschitz constant
/// stays below 2 / r_unit.
pub fn cutoff(grid: &GridSpec, n: usize, n_levels: usize) -> Result<ConfigField> {
    if n == 0 || n_levels < 2 || n > n_levels {
        return Err(Error::InvalidArgument(format!(
            "cutoff needs 1 <= n <= n_levels and n_levels >= 2, got n={n}, n_levels={n_levels}"
        )));
    }
    let r_unit = cutoff_unit_radius(grid, n_levels);
    let outer = (n + 1) as f64 * r_unit;
    let values = (0..grid.config_len())
        .map(|flat| {
            let r = grid.config_radius(flat);
            let t = ((outer - r) / r_unit).clamp(0.0, 1.0);
            t * t * (3.0 - 2.0 * t)
        })
        .collect();
    ConfigField::new_real(*grid, values)
}

/// Unit radius used by [`cutoff`] for a given level count.
pub fn cutoff_unit_radius(grid: &GridSpec, n_levels: usize) -> f64 {
    grid.config_circumradius() / n_levels.max(1) as f64
}

/// Compactly supported product bump kernel with support radius epsilon:
/// per axis proportional to (1 - (z/eps)^2)^2, renormalized to unit mass.
fn bump_taps(grid: &GridSpec, epsilon: f64) -> Result<(Vec<f64>, usize)> {
    let h = grid.spacing();
    if epsilon < 2.0 * h {
        return Err(Error::Resolution {
            width: epsilon,
            floor: 2.0 * h,
        });
    }
    let radius = (epsilon / h).floor() as usize;
    let mut taps = vec![0.0; 2 * radius + 1];
    for k in 0..=radius {
        let z = k as f64 * h / epsilon;
        let v = if z >= 1.0 { 0.0 } else { (1.0 - z * z) * (1.0 - z * z) };
        taps[radius + k] = v;
        taps[radius - k] = v;
    }
    let total = compensated_sum(taps.iter().copied()) * h;
    for t in &mut taps {
        *t /= total;
    }
    Ok((taps, radius))
}

/// Smoothed sign: J_eps * (e c_n), clamped to [-1, 1], with its measured
/// Lipschitz constant (max forward-difference gradient norm).
#[derive(Debug, Clone)]
pub struct SmoothedSign {
    pub e_n: ConfigField,
    pub lip: f64,
    pub n: usize,
    pub epsilon: f64,
    /// Weighted H1 distance between the smoothed and the cut-off sign when
    /// the width search produced this value (0 when not searched).
    pub weighted_gap: f64,
}

/// Cut off the sign at level n and mollify with the bump of width epsilon.
pub fn smooth_sign(
    e: &SignField,
    n: usize,
    n_levels: usize,
    epsilon: f64,
) -> Result<SmoothedSign> {
    let masked = masked_sign(e, n, n_levels)?;
    smooth_masked(&masked, n, epsilon)
}

fn masked_sign(e: &SignField, n: usize, n_levels: usize) -> Result<ConfigField> {
    let grid = *e.e.grid();
    let c = cutoff(&grid, n, n_levels)?;
    let values = e
        .e
        .real_values()?
        .iter()
        .zip(c.real_values()?)
        .map(|(a, b)| a * b)
        .collect();
    ConfigField::new_real(grid, values)
}

fn smooth_masked(masked: &ConfigField, n: usize, epsilon: f64) -> Result<SmoothedSign> {
    let grid = *masked.grid();
    let (taps, radius) = bump_taps(&grid, epsilon)?;
    let conv = convolve_axes(
        masked.real_values()?,
        grid.config_axes(),
        grid.points_per_axis(),
        grid.spacing(),
        &taps,
        radius,
    );
    // Convex combination of values in [-1, 1]; clamp the last-ulp overshoot.
    let values: Vec<f64> = conv.iter().map(|v| v.clamp(-1.0, 1.0)).collect();
    let e_n = ConfigField::new_real(grid, values)?;
    let lip = max_gradient_norm(&e_n)?;
    Ok(SmoothedSign {
        e_n,
        lip,
        n,
        epsilon,
        weighted_gap: 0.0,
    })
}

/// Max over nodes of the forward-difference gradient norm, interior
/// differences only: this estimates the Lipschitz constant of the function
/// itself, not of its zero extension past the box.
pub fn max_gradient_norm(f: &ConfigField) -> Result<f64> {
    let grid = *f.grid();
    let v = f.real_values()?;
    let axes = grid.config_axes();
    let m = grid.points_per_axis();
    let h = grid.spacing();
    let mut worst: f64 = 0.0;
    for flat in 0..v.len() {
        let mut sq = 0.0;
        for axis in 0..axes {
            let stride = grid.stride(axes, axis);
            let pos = (flat / stride) % m;
            if pos + 1 < m {
                let d = (v[flat + stride] - v[flat]) / h;
                sq += d * d;
            }
        }
        worst = worst.max(sq);
    }
    Ok(worst.sqrt())
}

/// L2 norm against the measure weight^2 dX.
pub fn weighted_l2(f: &ConfigField, weight: &ConfigField) -> Result<f64> {
    let fv = f.real_values()?;
    let wv = weight.real_values()?;
    let mut acc = Neumaier::new();
    for (a, b) in fv.iter().zip(wv) {
        acc.add(a * a * b * b);
    }
    Ok((acc.total() * f.grid().config_weight()).sqrt())
}

/// H1 norm against the measure weight^2 dX (plain gradients).
pub fn weighted_h1(f: &ConfigField, weight: &ConfigField) -> Result<f64> {
    let grid = *f.grid();
    let fv = f.real_values()?;
    let wv = weight.real_values()?;
    let axes = grid.config_axes();
    let mut acc = Neumaier::new();
    for flat in 0..fv.len() {
        let w2 = wv[flat] * wv[flat];
        let mut sq = fv[flat] * fv[flat];
        for axis in 0..axes {
            let d = forward_diff(fv, &grid, axis, flat);
            sq += d * d;
        }
        acc.add(sq * w2);
    }
    Ok((acc.total() * grid.config_weight()).sqrt())
}

/// Pick the largest resolvable dyadic width whose mollification stays within
/// 2^-n of the cut-off sign in the lambda^2-weighted H1 norm; falls back to
/// the smallest resolvable width when no candidate meets the threshold.
pub fn pick_sign_epsilon(
    e: &SignField,
    n: usize,
    n_levels: usize,
    lambda: &ConfigField,
) -> Result<SmoothedSign> {
    let grid = *e.e.grid();
    let h = grid.spacing();
    let floor = 2.0 * h;
    let masked = masked_sign(e, n, n_levels)?;
    let threshold = 2f64.powi(-(n as i32));
    let mut eps = grid.half_width();
    let mut best: Option<SmoothedSign> = None;
    while eps >= floor {
        let mut smoothed = smooth_masked(&masked, n, eps)?;
        let gap = weighted_h1(&smoothed.e_n.sub(&masked)?, lambda)?;
        smoothed.weighted_gap = gap;
        if gap <= threshold {
            return Ok(smoothed);
        }
        best = Some(smoothed);
        eps /= 2.0;
    }
    best.ok_or_else(|| Error::Resolution {
        width: grid.half_width(),
        floor,
    })
}

/// Result of the index pairing: `levels[k]` is the 1-based level n_k
/// assigned to entry k, `starts[n-1]` the start index K(n) from which level
/// n's products stay under 2^-n. Entries before `starts[0]` fall back to
/// level 1 and carry no product guarantee.
#[derive(Debug, Clone)]
pub struct SubsequenceSelection {
    pub levels: Vec<usize>,
    pub starts: Vec<usize>,
}

impl SubsequenceSelection {
    /// Deepest level that found a start index.
    pub fn deepest(&self) -> usize {
        self.starts.len()
    }
}

/// The proof-style index pairing: K(n) is the first start index from which
/// level n's products stay under 2^-n, each strictly past the previous one;
/// entry k then takes the deepest level whose start it has passed.
pub fn subsequence_select(m_levels: &[f64], a: &[f64]) -> Result<SubsequenceSelection> {
    if m_levels.is_empty() || a.is_empty() {
        return Err(Error::InvalidArgument("empty input sequences".into()));
    }
    if m_levels.iter().chain(a.iter()).any(|&x| !(x >= 0.0)) {
        return Err(Error::InvalidArgument(
            "sequences must be non-negative".into(),
        ));
    }
    if !(a[a.len() - 1] < a[0]) {
        return Err(Error::Truncation {
            deepest: 0,
            reason: format!(
                "a does not tend to zero: first {}, last {}",
                a[0],
                a[a.len() - 1]
            ),
        });
    }

    let mut starts: Vec<usize> = Vec::new(); // 1-based K(n)
    'levels: for (idx, &m_n) in m_levels.iter().enumerate() {
        let n = idx + 1;
        let bound = 2f64.powi(-(n as i32));
        let from = starts.last().map_or(1, |k| k + 1);
        for k0 in from..=a.len() {
            if a[k0 - 1..].iter().all(|&ak| m_n * ak < bound) {
                starts.push(k0);
                continue 'levels;
            }
        }
        break;
    }
    if starts.is_empty() {
        return Err(Error::Truncation {
            deepest: 0,
            reason: "level 1 has no admissible start index".into(),
        });
    }

    let levels = (1..=a.len())
        .map(|k| match starts.iter().rposition(|&k0| k0 <= k) {
            Some(level) => level + 1,
            None => 1,
        })
        .collect();
    Ok(SubsequenceSelection { levels, starts })
}

/// Unit-modulus phase field.
#[derive(Debug, Clone)]
pub struct PhaseField {
    w: ConfigField,
}

impl PhaseField {
    pub fn field(&self) -> &ConfigField {
        &self.w
    }
}

/// Circle lifting omega(s) = exp(i (1-s) pi/2): carries [-1, 1] onto the
/// upper unit half-circle with omega(1) = 1 and omega(-1) = -1, and is
/// (pi/2)-Lipschitz.
pub fn lift(e_n: &ConfigField) -> Result<PhaseField> {
    let v = e_n.real_values()?;
    let values = v
        .iter()
        .map(|&s| {
            if s < -1.0 - LIFT_CLAMP || s > 1.0 + LIFT_CLAMP {
                return Err(Error::Range { value: s });
            }
            let angle = (1.0 - s.clamp(-1.0, 1.0)) * std::f64::consts::FRAC_PI_2;
            Ok(Complex64::new(angle.cos(), angle.sin()))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(PhaseField {
        w: ConfigField::new_complex(*e_n.grid(), values)?,
    })
}

/// One assembled row of the signed pipeline.
#[derive(Debug, Clone)]
pub struct AssembledState {
    pub psi_n: ConfigField,
    pub l2_err: f64,
    pub h1_err: f64,
}

/// psi_n = omega(e_n) phi_n for each paired (sign, wavefunction); the modulus
/// of psi_n is phi_n pointwise, so marginals pass through untouched.
pub fn assemble(
    e_seq: &[ConfigField],
    phi_seq: &[ConfigField],
    psi: &ConfigField,
) -> Result<Vec<AssembledState>> {
    if e_seq.len() != phi_seq.len() {
        return Err(Error::InvalidArgument(format!(
            "sign and wavefunction sequences differ in length: {} vs {}",
            e_seq.len(),
            phi_seq.len()
        )));
    }
    let mut out = Vec::with_capacity(e_seq.len());
    for (e_n, phi_n) in e_seq.iter().zip(phi_seq) {
        let phase = lift(e_n)?;
        let pv = phase.w.complex_values()?;
        let fv = phi_n.real_values()?;
        let values: Vec<Complex64> = pv.iter().zip(fv).map(|(w, f)| w * f).collect();
        let psi_n = ConfigField::new_complex(*phi_n.grid(), values)?;
        let l2_err = psi_n.l2_distance(psi)?;
        let h1_err = psi_n.h1_distance(psi)?;
        out.push(AssembledState {
            psi_n,
            l2_err,
            h1_err,
        });
    }
    Ok(out)
}
