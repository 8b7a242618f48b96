//! Fields on the single-particle grid and on the N-fold product grid.
//!
//! `ScalarField` holds real data on [-L, L]^d (densities, mollified
//! densities); `ConfigField` holds real or complex data on the product grid
//! (wavefunctions, plans). All norms use midpoint quadrature and forward
//! finite differences with zero extension past the boundary, so compactly
//! supported fields have well-defined H1 norms without boundary
//! special-casing.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::grid::GridSpec;
use crate::tol::{DENSITY_NORM_TOL, MARGINAL_AGREEMENT_TOL};

/// Compensated (Neumaier) summation; error stays O(eps) independent of the
/// number of terms, which the 1e-12..1e-13 tolerances downstream rely on.
#[derive(Debug, Clone, Copy, Default)]
pub(crate) struct Neumaier {
    sum: f64,
    comp: f64,
}

impl Neumaier {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn total(&self) -> f64 {
        self.sum + self.comp
    }
}

pub(crate) fn compensated_sum(values: impl IntoIterator<Item = f64>) -> f64 {
    let mut acc = Neumaier::new();
    for v in values {
        acc.add(v);
    }
    acc.total()
}

/// Element kinds a configuration-space field can hold.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FieldKind {
    Real,
    Complex,
}

trait Elem: Copy {
    fn abs2(self) -> f64;
    fn sub(self, other: Self) -> Self;
    fn finite(self) -> bool;
    const ZERO: Self;
}

impl Elem for f64 {
    #[inline]
    fn abs2(self) -> f64 {
        self * self
    }
    #[inline]
    fn sub(self, other: Self) -> Self {
        self - other
    }
    fn finite(self) -> bool {
        self.is_finite()
    }
    const ZERO: Self = 0.0;
}

impl Elem for Complex64 {
    #[inline]
    fn abs2(self) -> f64 {
        self.norm_sqr()
    }
    #[inline]
    fn sub(self, other: Self) -> Self {
        self - other
    }
    fn finite(self) -> bool {
        self.re.is_finite() && self.im.is_finite()
    }
    const ZERO: Self = Complex64::new(0.0, 0.0);
}

fn check_finite<E: Elem>(values: &[E]) -> Result<()> {
    for (index, v) in values.iter().enumerate() {
        if !v.finite() {
            return Err(Error::NotFinite { index });
        }
    }
    Ok(())
}

/// Squared L2 norm: h^axes * sum |v|^2.
fn norm_sq<E: Elem>(values: &[E], weight: f64) -> f64 {
    compensated_sum(values.iter().map(|v| v.abs2())) * weight
}

/// Squared H1 seminorm with forward differences and zero extension.
fn seminorm_sq<E: Elem>(values: &[E], axes: usize, m: usize, h: f64, weight: f64) -> f64 {
    let mut acc = Neumaier::new();
    let inv_h2 = 1.0 / (h * h);
    for axis in 0..axes {
        let stride = m.pow((axes - 1 - axis) as u32);
        for (i, &v) in values.iter().enumerate() {
            let pos = (i / stride) % m;
            let next = if pos + 1 < m { values[i + stride] } else { E::ZERO };
            acc.add(next.sub(v).abs2() * inv_h2);
        }
    }
    acc.total() * weight
}

/// Real function on the d-dimensional grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    grid: GridSpec,
    values: Vec<f64>,
}

impl ScalarField {
    pub fn new(grid: GridSpec, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.scalar_len() {
            return Err(Error::InvalidArgument(format!(
                "scalar field needs {} values, got {}",
                grid.scalar_len(),
                values.len()
            )));
        }
        check_finite(&values)?;
        Ok(ScalarField { grid, values })
    }

    pub fn constant(grid: GridSpec, c: f64) -> Result<Self> {
        Self::new(grid, vec![c; grid.scalar_len()])
    }

    /// Sample a coordinate function at the cell midpoints.
    pub fn from_fn(grid: GridSpec, f: impl Fn(&[f64]) -> f64) -> Result<Self> {
        let d = grid.d();
        let m = grid.points_per_axis();
        let mut coords = vec![0.0; d];
        let values = (0..grid.scalar_len())
            .map(|flat| {
                let mut rest = flat;
                for a in (0..d).rev() {
                    coords[a] = grid.coord(rest % m);
                    rest /= m;
                }
                f(&coords)
            })
            .collect();
        Self::new(grid, values)
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    /// Midpoint quadrature h^d * sum.
    pub fn integrate(&self) -> f64 {
        compensated_sum(self.values.iter().copied()) * self.grid.scalar_weight()
    }

    pub fn l2_norm(&self) -> f64 {
        norm_sq(&self.values, self.grid.scalar_weight()).sqrt()
    }

    pub fn h1_seminorm(&self) -> f64 {
        seminorm_sq(
            &self.values,
            self.grid.scalar_axes(),
            self.grid.points_per_axis(),
            self.grid.spacing(),
            self.grid.scalar_weight(),
        )
        .sqrt()
    }

    pub fn h1_norm(&self) -> f64 {
        let l2 = norm_sq(&self.values, self.grid.scalar_weight());
        let semi = seminorm_sq(
            &self.values,
            self.grid.scalar_axes(),
            self.grid.points_per_axis(),
            self.grid.spacing(),
            self.grid.scalar_weight(),
        );
        (l2 + semi).sqrt()
    }

    /// Pointwise square root; negative entries are a caller bug.
    pub fn sqrt(&self) -> Result<ScalarField> {
        let values = self
            .values
            .iter()
            .map(|&v| {
                if v < 0.0 {
                    Err(Error::InvalidArgument(format!(
                        "sqrt of a field with negative entry {v}"
                    )))
                } else {
                    Ok(v.sqrt())
                }
            })
            .collect::<Result<Vec<_>>>()?;
        ScalarField::new(self.grid, values)
    }

    pub fn sub(&self, other: &ScalarField) -> Result<ScalarField> {
        if self.grid != other.grid {
            return Err(Error::InvalidArgument("grid mismatch in subtraction".into()));
        }
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a - b)
            .collect();
        ScalarField::new(self.grid, values)
    }

    pub fn scale(&self, c: f64) -> Result<ScalarField> {
        ScalarField::new(self.grid, self.values.iter().map(|v| v * c).collect())
    }

    pub fn min_value(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max_value(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Non-negative scalar field with unit quadrature mass.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityField {
    field: ScalarField,
}

impl DensityField {
    pub fn new(field: ScalarField) -> Result<Self> {
        if let Some(v) = field.values.iter().find(|v| **v < 0.0) {
            return Err(Error::NotADensity(format!("negative value {v}")));
        }
        let total = field.integrate();
        if (total - 1.0).abs() > DENSITY_NORM_TOL {
            return Err(Error::NotADensity(format!(
                "integral {total} differs from 1 beyond {DENSITY_NORM_TOL:.1e}"
            )));
        }
        Ok(DensityField { field })
    }

    /// Clamp negatives at zero and rescale to unit mass, then validate.
    pub fn normalized(field: ScalarField) -> Result<Self> {
        let clamped: Vec<f64> = field.values.iter().map(|v| v.max(0.0)).collect();
        let raw = ScalarField::new(field.grid, clamped)?;
        let total = raw.integrate();
        if total <= 0.0 {
            return Err(Error::NotADensity("zero mass".into()));
        }
        DensityField::new(raw.scale(1.0 / total)?)
    }

    pub fn into_scalar(self) -> ScalarField {
        self.field
    }
}

impl std::ops::Deref for DensityField {
    type Target = ScalarField;
    fn deref(&self) -> &ScalarField {
        &self.field
    }
}

/// Real- or complex-valued function on the N-fold product grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigField {
    grid: GridSpec,
    values: FieldValues,
}

#[derive(Debug, Clone, PartialEq)]
pub enum FieldValues {
    Real(Vec<f64>),
    Complex(Vec<Complex64>),
}

impl ConfigField {
    pub fn new_real(grid: GridSpec, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.config_len() {
            return Err(Error::InvalidArgument(format!(
                "configuration field needs {} values, got {}",
                grid.config_len(),
                values.len()
            )));
        }
        check_finite(&values)?;
        Ok(ConfigField {
            grid,
            values: FieldValues::Real(values),
        })
    }

    pub fn new_complex(grid: GridSpec, values: Vec<Complex64>) -> Result<Self> {
        if values.len() != grid.config_len() {
            return Err(Error::InvalidArgument(format!(
                "configuration field needs {} values, got {}",
                grid.config_len(),
                values.len()
            )));
        }
        check_finite(&values)?;
        Ok(ConfigField {
            grid,
            values: FieldValues::Complex(values),
        })
    }

    pub fn constant_real(grid: GridSpec, c: f64) -> Result<Self> {
        Self::new_real(grid, vec![c; grid.config_len()])
    }

    /// Sample a coordinate function of (x_1, ..., x_N) at the cell midpoints.
    pub fn from_fn(grid: GridSpec, f: impl Fn(&[f64]) -> f64) -> Result<Self> {
        let axes = grid.config_axes();
        let m = grid.points_per_axis();
        let mut coords = vec![0.0; axes];
        let values = (0..grid.config_len())
            .map(|flat| {
                let mut rest = flat;
                for a in (0..axes).rev() {
                    coords[a] = grid.coord(rest % m);
                    rest /= m;
                }
                f(&coords)
            })
            .collect();
        Self::new_real(grid, values)
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn kind(&self) -> FieldKind {
        match self.values {
            FieldValues::Real(_) => FieldKind::Real,
            FieldValues::Complex(_) => FieldKind::Complex,
        }
    }

    pub fn len(&self) -> usize {
        match &self.values {
            FieldValues::Real(v) => v.len(),
            FieldValues::Complex(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn real_values(&self) -> Result<&[f64]> {
        match &self.values {
            FieldValues::Real(v) => Ok(v),
            FieldValues::Complex(_) => Err(Error::InvalidArgument(
                "expected a real-valued field".into(),
            )),
        }
    }

    pub fn complex_values(&self) -> Result<&[Complex64]> {
        match &self.values {
            FieldValues::Complex(v) => Ok(v),
            FieldValues::Real(_) => Err(Error::InvalidArgument(
                "expected a complex-valued field".into(),
            )),
        }
    }

    /// |f| at node `i`.
    pub fn abs_at(&self, i: usize) -> f64 {
        match &self.values {
            FieldValues::Real(v) => v[i].abs(),
            FieldValues::Complex(v) => v[i].norm(),
        }
    }

    /// Pointwise modulus as a real field.
    pub fn abs(&self) -> ConfigField {
        let values = match &self.values {
            FieldValues::Real(v) => v.iter().map(|x| x.abs()).collect(),
            FieldValues::Complex(v) => v.iter().map(|x| x.norm()).collect(),
        };
        ConfigField {
            grid: self.grid,
            values: FieldValues::Real(values),
        }
    }

    /// |f|^2 as a plain vector (the plan carried by a wavefunction).
    pub fn abs2_values(&self) -> Vec<f64> {
        match &self.values {
            FieldValues::Real(v) => v.iter().map(|x| x * x).collect(),
            FieldValues::Complex(v) => v.iter().map(|x| x.norm_sqr()).collect(),
        }
    }

    /// Midpoint quadrature of the values themselves (real fields only).
    pub fn integrate(&self) -> Result<f64> {
        let v = self.real_values()?;
        Ok(compensated_sum(v.iter().copied()) * self.grid.config_weight())
    }

    /// Quadrature mass of |f|^2.
    pub fn mass(&self) -> f64 {
        let w = self.grid.config_weight();
        match &self.values {
            FieldValues::Real(v) => norm_sq(v.as_slice(), w),
            FieldValues::Complex(v) => norm_sq(v.as_slice(), w),
        }
    }

    pub fn l2_norm(&self) -> f64 {
        self.mass().sqrt()
    }

    pub fn h1_seminorm(&self) -> f64 {
        self.seminorm_sq().sqrt()
    }

    pub fn h1_norm(&self) -> f64 {
        (self.mass() + self.seminorm_sq()).sqrt()
    }

    fn seminorm_sq(&self) -> f64 {
        let axes = self.grid.config_axes();
        let m = self.grid.points_per_axis();
        let h = self.grid.spacing();
        let w = self.grid.config_weight();
        match &self.values {
            FieldValues::Real(v) => seminorm_sq(v.as_slice(), axes, m, h, w),
            FieldValues::Complex(v) => seminorm_sq(v.as_slice(), axes, m, h, w),
        }
    }

    /// Difference, promoting to complex when the kinds differ.
    pub fn sub(&self, other: &ConfigField) -> Result<ConfigField> {
        if self.grid != other.grid {
            return Err(Error::InvalidArgument("grid mismatch in subtraction".into()));
        }
        let values = match (&self.values, &other.values) {
            (FieldValues::Real(a), FieldValues::Real(b)) => {
                FieldValues::Real(a.iter().zip(b).map(|(x, y)| x - y).collect())
            }
            (FieldValues::Complex(a), FieldValues::Complex(b)) => {
                FieldValues::Complex(a.iter().zip(b).map(|(x, y)| x - y).collect())
            }
            (FieldValues::Real(a), FieldValues::Complex(b)) => FieldValues::Complex(
                a.iter().zip(b).map(|(x, y)| Complex64::new(*x, 0.0) - y).collect(),
            ),
            (FieldValues::Complex(a), FieldValues::Real(b)) => FieldValues::Complex(
                a.iter().zip(b).map(|(x, y)| x - Complex64::new(*y, 0.0)).collect(),
            ),
        };
        Ok(ConfigField {
            grid: self.grid,
            values,
        })
    }

    pub fn scale(&self, c: f64) -> Result<ConfigField> {
        let values = match &self.values {
            FieldValues::Real(v) => FieldValues::Real(v.iter().map(|x| x * c).collect()),
            FieldValues::Complex(v) => FieldValues::Complex(v.iter().map(|x| x * c).collect()),
        };
        Ok(ConfigField {
            grid: self.grid,
            values,
        })
    }

    pub fn l2_distance(&self, other: &ConfigField) -> Result<f64> {
        Ok(self.sub(other)?.l2_norm())
    }

    pub fn h1_distance(&self, other: &ConfigField) -> Result<f64> {
        Ok(self.sub(other)?.h1_norm())
    }

    /// Single-particle density of |f|^2: integrates out all but one particle
    /// block. All N block choices are computed and must agree (symmetry);
    /// block 0 is returned.
    pub fn marginal(&self) -> Result<ScalarField> {
        let w = self.abs2_values();
        self.marginal_of(&w)
    }

    /// Marginal of a plan already stored as values (no squaring).
    pub fn plan_marginal(&self) -> Result<ScalarField> {
        let v = self.real_values()?;
        self.marginal_of(v)
    }

    fn marginal_of(&self, plan: &[f64]) -> Result<ScalarField> {
        let n = self.grid.n_particles();
        let block = self.grid.scalar_len();
        let weight = self.grid.config_weight() / self.grid.scalar_weight();
        let mut per_block = vec![vec![0.0; block]; n];
        for j in 0..n {
            let after = block.pow((n - 1 - j) as u32);
            let acc = &mut per_block[j];
            for (flat, &v) in plan.iter().enumerate() {
                acc[(flat / after) % block] += v;
            }
        }
        let mut defect: f64 = 0.0;
        for j in 1..n {
            for s in 0..block {
                defect = defect.max(((per_block[j][s] - per_block[0][s]) * weight).abs());
            }
        }
        if defect > MARGINAL_AGREEMENT_TOL {
            return Err(Error::Symmetry {
                defect,
                tol: MARGINAL_AGREEMENT_TOL,
            });
        }
        let values = per_block.swap_remove(0).iter().map(|v| v * weight).collect();
        ScalarField::new(self.grid, values)
    }

    /// Max-norm distance to the nearest transposition image: the largest
    /// |f(X) - f(tau X)| over adjacent particle transpositions tau.
    pub fn symmetry_defect(&self) -> f64 {
        let n = self.grid.n_particles();
        let mut defect: f64 = 0.0;
        for j in 0..n - 1 {
            for flat in 0..self.len() {
                let other = self.grid.swap_adjacent_blocks(flat, j);
                let d = match &self.values {
                    FieldValues::Real(v) => (v[flat] - v[other]).abs(),
                    FieldValues::Complex(v) => (v[flat] - v[other]).norm(),
                };
                defect = defect.max(d);
            }
        }
        defect
    }

    /// Average over all N! particle permutations (N <= 3). Terms are summed
    /// in value order so permutation-related nodes get bitwise-equal results.
    pub fn symmetrize(&self) -> Result<ConfigField> {
        let n = self.grid.n_particles();
        if n > 3 {
            return Err(Error::InvalidArgument(format!(
                "symmetrize supports N <= 3, got N = {n}"
            )));
        }
        let perms = permutations(n);
        let inv = 1.0 / perms.len() as f64;
        let values = match &self.values {
            FieldValues::Real(v) => {
                let mut out = vec![0.0; v.len()];
                let mut terms = vec![0.0; perms.len()];
                for flat in 0..v.len() {
                    for (t, perm) in perms.iter().enumerate() {
                        terms[t] = v[self.grid.permute_blocks(flat, perm)];
                    }
                    terms.sort_by(|a, b| a.partial_cmp(b).unwrap());
                    out[flat] = terms.iter().sum::<f64>() * inv;
                }
                FieldValues::Real(out)
            }
            FieldValues::Complex(v) => {
                let mut out = vec![Complex64::new(0.0, 0.0); v.len()];
                let mut terms = vec![Complex64::new(0.0, 0.0); perms.len()];
                for flat in 0..v.len() {
                    for (t, perm) in perms.iter().enumerate() {
                        terms[t] = v[self.grid.permute_blocks(flat, perm)];
                    }
                    terms.sort_by(|a, b| (a.re, a.im).partial_cmp(&(b.re, b.im)).unwrap());
                    out[flat] = terms.iter().sum::<Complex64>() * inv;
                }
                FieldValues::Complex(out)
            }
        };
        Ok(ConfigField {
            grid: self.grid,
            values,
        })
    }
}

fn permutations(n: usize) -> Vec<Vec<usize>> {
    let mut items: Vec<usize> = (0..n).collect();
    let mut out = Vec::new();
    heap_permute(&mut items, n, &mut out);
    out
}

fn heap_permute(items: &mut Vec<usize>, k: usize, out: &mut Vec<Vec<usize>>) {
    if k == 1 {
        out.push(items.clone());
        return;
    }
    for i in 0..k {
        heap_permute(items, k - 1, out);
        if k % 2 == 0 {
            items.swap(i, k - 1);
        } else {
            items.swap(0, k - 1);
        }
    }
}

/// H1 distance of the pointwise square roots of two densities.
pub fn sqrt_density_h1_distance(a: &DensityField, b: &DensityField) -> Result<f64> {
    let da = a.sqrt()?;
    let db = b.sqrt()?;
    Ok(da.sub(&db)?.h1_norm())
}

/// L2 distance of the pointwise square roots of two densities.
pub fn sqrt_density_l2_distance(a: &DensityField, b: &DensityField) -> Result<f64> {
    let da = a.sqrt()?;
    let db = b.sqrt()?;
    Ok(da.sub(&db)?.l2_norm())
}

/// Relative L1 distance between a scalar field and a density.
pub fn relative_l1_error(f: &ScalarField, target: &DensityField) -> Result<f64> {
    let diff = f.sub(target)?;
    Ok(compensated_sum(diff.values().iter().map(|v| v.abs())) * f.grid().scalar_weight())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(d: usize, n: usize, l: f64, m: usize) -> GridSpec {
        GridSpec::new(d, n, l, m).unwrap()
    }

    #[test]
    fn integrate_constant_is_box_measure() {
        let g = grid(1, 2, 1.0, 4);
        let f = ScalarField::constant(g, 1.0).unwrap();
        assert!((f.integrate() - 2.0).abs() < 1e-15);
    }

    #[test]
    fn density_must_be_normalized_and_nonnegative() {
        let g = grid(1, 2, 1.0, 4);
        let ok = DensityField::new(ScalarField::constant(g, 0.5).unwrap()).unwrap();
        assert!((ok.integrate() - 1.0).abs() < 1e-12);
        assert!(DensityField::new(ScalarField::constant(g, 0.4).unwrap()).is_err());
        let mut v = vec![0.5; 4];
        v[2] = -0.1;
        assert!(DensityField::new(ScalarField::new(g, v).unwrap()).is_err());
    }

    #[test]
    fn norms_of_zero_field() {
        let g = grid(1, 2, 1.0, 8);
        let f = ScalarField::constant(g, 0.0).unwrap();
        assert_eq!(f.l2_norm(), 0.0);
        assert_eq!(f.h1_seminorm(), 0.0);
        assert_eq!(f.h1_norm(), 0.0);
    }

    #[test]
    fn norms_of_constant_field() {
        // Only the last cell sees a gradient under zero extension:
        // |grad|^2 = c^2/h^2 on one cell, so the seminorm is c/sqrt(h).
        let g = grid(1, 2, 1.0, 8);
        let c = 1.7;
        let f = ScalarField::constant(g, c).unwrap();
        assert!((f.l2_norm() - c * 2f64.sqrt()).abs() < 1e-14);
        let h = g.spacing();
        assert!((f.h1_seminorm() - c / h.sqrt()).abs() < 1e-14);
    }

    #[test]
    fn gaussian_l2_matches_analytic_integral() {
        // e^{-x^2/2} / pi^{1/4} has unit L2 norm on the line, since the
        // analytic oracle gives integral e^{-x^2} dx = sqrt(pi).
        let g = grid(1, 2, 8.0, 256);
        let norm = std::f64::consts::PI.powf(-0.25);
        let f = ScalarField::from_fn(g, |x| norm * (-x[0] * x[0] / 2.0).exp()).unwrap();
        assert!((f.l2_norm() - 1.0).abs() < 1e-3);
    }

    #[test]
    fn marginal_of_product_state_recovers_density() {
        let g = grid(1, 2, 4.0, 16);
        let rho = DensityField::normalized(
            ScalarField::from_fn(g, |x| (-x[0] * x[0]).exp()).unwrap(),
        )
        .unwrap();
        let rv = rho.values();
        let m = g.points_per_axis();
        let u = ConfigField::new_real(
            g,
            (0..g.config_len())
                .map(|flat| (rv[flat / m] * rv[flat % m]).sqrt())
                .collect(),
        )
        .unwrap();
        let marg = u.marginal().unwrap();
        for (a, b) in marg.values().iter().zip(rv) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn marginal_of_constant_unit_mass_field() {
        let g = grid(1, 2, 1.0, 4);
        // Box [-1,1]^2 has area 4; |u|^2 = 1/4 integrates to 1.
        let u = ConfigField::constant_real(g, 0.5).unwrap();
        assert!((u.mass() - 1.0).abs() < 1e-14);
        let marg = u.marginal().unwrap();
        for v in marg.values() {
            assert!((v - 0.5).abs() < 1e-14);
        }
    }

    #[test]
    fn marginal_mass_matches_field_mass() {
        let g = grid(1, 2, 2.0, 8);
        let u = ConfigField::from_fn(g, |x| (-(x[0] * x[0] + x[1] * x[1])).exp()).unwrap();
        let marg = u.marginal().unwrap();
        assert!((marg.integrate() - u.mass()).abs() < 1e-12);
    }

    #[test]
    fn asymmetric_field_marginal_is_rejected() {
        let g = grid(1, 2, 1.0, 4);
        let u = ConfigField::from_fn(g, |x| 1.0 + x[0]).unwrap();
        assert!(matches!(u.marginal(), Err(Error::Symmetry { .. })));
    }

    #[test]
    fn symmetry_defect_of_coordinate_field() {
        // u(x1, x2) = x1: the defect is max |x1 - x2| = 2L - h.
        let g = grid(1, 2, 1.0, 8);
        let u = ConfigField::from_fn(g, |x| x[0]).unwrap();
        let expected = 2.0 * g.half_width() - g.spacing();
        assert!((u.symmetry_defect() - expected).abs() < 1e-14);
    }

    #[test]
    fn symmetry_defect_of_product_field_is_zero() {
        // Product reassociation under transposition costs at most one ulp.
        let g = grid(1, 3, 1.0, 4);
        let u = ConfigField::from_fn(g, |x| x.iter().map(|t| (-t * t).exp()).product()).unwrap();
        assert!(u.symmetry_defect() <= 1e-15);
    }

    #[test]
    fn symmetrize_kills_the_defect() {
        let g = grid(1, 3, 1.0, 4);
        let u = ConfigField::from_fn(g, |x| {
            0.3 + x[0] + 0.5 * x[1] * x[1] + (x[2] * 1.3).sin() * x[0]
        })
        .unwrap();
        assert!(u.symmetry_defect() > 0.1);
        let s = u.symmetrize().unwrap();
        assert!(s.symmetry_defect() <= 1e-15);
    }

    #[test]
    fn symmetrize_rejects_large_n() {
        let g = grid(1, 4, 1.0, 2);
        let u = ConfigField::constant_real(g, 0.1).unwrap();
        assert!(u.symmetrize().is_err());
    }

    #[test]
    fn sqrt_density_distance_of_equal_densities_is_zero() {
        let g = grid(1, 2, 2.0, 16);
        let rho = DensityField::normalized(
            ScalarField::from_fn(g, |x| (-x[0] * x[0]).exp()).unwrap(),
        )
        .unwrap();
        assert_eq!(sqrt_density_h1_distance(&rho, &rho).unwrap(), 0.0);
    }

    #[test]
    fn sqrt_density_distance_of_disjoint_densities() {
        // Disjoint supports: the L2 part of the squared distance is exactly
        // 2, the seminorm part is computed by direct quadrature.
        let g = grid(1, 2, 1.0, 8);
        let mut a = vec![0.0; 8];
        let mut b = vec![0.0; 8];
        for i in 0..4 {
            a[i] = 1.0;
            b[i + 4] = 1.0;
        }
        let h = g.spacing();
        let scale = 1.0 / (4.0 * h);
        let rho1 = DensityField::new(
            ScalarField::new(g, a.iter().map(|v| v * scale).collect()).unwrap(),
        )
        .unwrap();
        let rho2 = DensityField::new(
            ScalarField::new(g, b.iter().map(|v| v * scale).collect()).unwrap(),
        )
        .unwrap();
        let diff = rho1.sqrt().unwrap().sub(&rho2.sqrt().unwrap()).unwrap();
        let semi = diff.h1_seminorm();
        let expected = (2.0 + semi * semi).sqrt();
        assert!((sqrt_density_h1_distance(&rho1, &rho2).unwrap() - expected).abs() < 1e-13);

        // Direct quadrature oracle for the seminorm: the difference jumps by
        // 2s at the support interface and by s at the right boundary cell.
        let s = scale.sqrt();
        let expected_semi = ((2.0 * s / h).powi(2) * h + (s / h).powi(2) * h).sqrt();
        assert!((semi - expected_semi).abs() < 1e-13);
    }

    #[test]
    fn quadrature_is_linear_and_positive() {
        let g = grid(1, 2, 1.5, 16);
        let f = ScalarField::from_fn(g, |x| (x[0] * 2.0).cos() + 1.5).unwrap();
        let gfield = ScalarField::from_fn(g, |x| x[0] * x[0]).unwrap();
        let (a, b) = (0.7, -0.3);
        let combo = ScalarField::new(
            g,
            f.values()
                .iter()
                .zip(gfield.values())
                .map(|(x, y)| a * x + b * y)
                .collect(),
        )
        .unwrap();
        let lhs = combo.integrate();
        let rhs = a * f.integrate() + b * gfield.integrate();
        assert!((lhs - rhs).abs() < 1e-12);
        assert!(f.integrate() >= 0.0);
    }

    #[test]
    fn complex_field_norms() {
        let g = grid(1, 2, 1.0, 4);
        let re = ConfigField::constant_real(g, 0.5).unwrap();
        let im: Vec<Complex64> = vec![Complex64::new(0.0, 0.5); g.config_len()];
        let cf = ConfigField::new_complex(g, im).unwrap();
        assert!((cf.mass() - re.mass()).abs() < 1e-14);
        assert!((cf.l2_norm() - re.l2_norm()).abs() < 1e-14);
        assert!((cf.h1_norm() - re.h1_norm()).abs() < 1e-14);
    }

    #[test]
    fn non_finite_values_rejected() {
        let g = grid(1, 2, 1.0, 2);
        assert!(matches!(
            ScalarField::new(g, vec![1.0, f64::NAN]),
            Err(Error::NotFinite { index: 1 })
        ));
        assert!(ConfigField::new_real(g, vec![1.0, 2.0, f64::INFINITY, 0.0]).is_err());
    }
}
