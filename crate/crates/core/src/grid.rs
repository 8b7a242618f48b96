//! Uniform discretization of the box [-L, L]^d and its N-fold product.
//!
//! Nodes sit at cell midpoints x_i = -L + (i + 1/2) h with h = 2L/M, and all
//! integrals are midpoint sums. Product-grid fields are stored row-major over
//! axes, first axis slowest; particle j owns the contiguous axis block
//! [j*d, (j+1)*d).

use crate::error::{Error, Result};
use crate::tol::FIELD_ELEM_BUDGET;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    d: usize,
    n_particles: usize,
    half_width: f64,
    points_per_axis: usize,
    spacing: f64,
}

impl GridSpec {
    /// Build a grid for N particles in d dimensions on [-L, L]^d with M
    /// points per axis. Rejects parameter sets whose product grid would not
    /// fit the element budget.
    pub fn new(d: usize, n_particles: usize, half_width: f64, points_per_axis: usize) -> Result<Self> {
        if d == 0 || n_particles < 2 {
            return Err(Error::InvalidArgument(format!(
                "need d >= 1 and N >= 2, got d={d}, N={n_particles}"
            )));
        }
        if points_per_axis < 2 {
            return Err(Error::InvalidArgument(format!(
                "need at least 2 points per axis, got {points_per_axis}"
            )));
        }
        if !(half_width > 0.0) || !half_width.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "half-width must be positive and finite, got {half_width}"
            )));
        }
        let axes = d * n_particles;
        let mut total: u128 = 1;
        for _ in 0..axes {
            total = total.saturating_mul(points_per_axis as u128);
            if total > FIELD_ELEM_BUDGET {
                return Err(Error::SizeBudget {
                    requested: total,
                    budget: FIELD_ELEM_BUDGET,
                });
            }
        }
        let spacing = 2.0 * half_width / points_per_axis as f64;
        Ok(GridSpec {
            d,
            n_particles,
            half_width,
            points_per_axis,
            spacing,
        })
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn n_particles(&self) -> usize {
        self.n_particles
    }

    pub fn half_width(&self) -> f64 {
        self.half_width
    }

    pub fn points_per_axis(&self) -> usize {
        self.points_per_axis
    }

    /// Mesh width h = 2L/M.
    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    /// Coordinate of node i along one axis: -L + (i + 1/2) h.
    pub fn coord(&self, i: usize) -> f64 {
        -self.half_width + (i as f64 + 0.5) * self.spacing
    }

    /// Number of axes of a single-particle field.
    pub fn scalar_axes(&self) -> usize {
        self.d
    }

    /// Number of axes of a configuration-space field.
    pub fn config_axes(&self) -> usize {
        self.d * self.n_particles
    }

    /// Node count of a single-particle field, M^d.
    pub fn scalar_len(&self) -> usize {
        self.points_per_axis.pow(self.d as u32)
    }

    /// Node count of a configuration-space field, M^(N d).
    pub fn config_len(&self) -> usize {
        self.points_per_axis.pow(self.config_axes() as u32)
    }

    /// Quadrature weight h^d of the single-particle grid.
    pub fn scalar_weight(&self) -> f64 {
        self.spacing.powi(self.d as i32)
    }

    /// Quadrature weight h^(N d) of the product grid.
    pub fn config_weight(&self) -> f64 {
        self.spacing.powi(self.config_axes() as i32)
    }

    /// Stride of `axis` in a row-major field with `axes` axes.
    pub fn stride(&self, axes: usize, axis: usize) -> usize {
        self.points_per_axis.pow((axes - 1 - axis) as u32)
    }

    /// Sub-index of particle `j`'s block inside a flat product-grid index:
    /// the M^d-ary digit group owned by that particle.
    #[inline]
    pub fn block_index(&self, flat: usize, j: usize) -> usize {
        let block = self.scalar_len();
        let after = block.pow((self.n_particles - 1 - j) as u32);
        (flat / after) % block
    }

    /// Flat index with particle blocks `j` and `j + 1` swapped.
    pub fn swap_adjacent_blocks(&self, flat: usize, j: usize) -> usize {
        let block = self.scalar_len();
        let after_lo = block.pow((self.n_particles - 2 - j) as u32);
        let after_hi = after_lo * block;
        let hi = self.block_index(flat, j);
        let lo = self.block_index(flat, j + 1);
        flat + lo * after_hi + hi * after_lo - hi * after_hi - lo * after_lo
    }

    /// Flat index whose particle block i is the input's block perm[i].
    pub fn permute_blocks(&self, flat: usize, perm: &[usize]) -> usize {
        let block = self.scalar_len();
        let n = self.n_particles;
        let mut out = 0;
        for (i, &src) in perm.iter().enumerate() {
            let digit = (flat / block.pow((n - 1 - src) as u32)) % block;
            out += digit * block.pow((n - 1 - i) as u32);
        }
        out
    }

    /// Euclidean norm of the configuration-space point with flat index `flat`.
    pub fn config_radius(&self, flat: usize) -> f64 {
        let axes = self.config_axes();
        let m = self.points_per_axis;
        let mut rest = flat;
        let mut sum = 0.0;
        for _ in 0..axes {
            let digit = rest % m;
            rest /= m;
            let x = self.coord(digit);
            sum += x * x;
        }
        sum.sqrt()
    }

    /// Circumradius of the configuration box [-L, L]^(N d).
    pub fn config_circumradius(&self) -> f64 {
        self.half_width * (self.config_axes() as f64).sqrt()
    }
}
