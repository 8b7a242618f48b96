//! Shared helpers for the integration suites: independent dense oracles that
//! evaluate the defining formulas by direct summation, plus seeded instance
//! generators. The oracles deliberately avoid the library's index machinery
//! and separable-convolution path.
#![allow(dead_code)] // each test target uses a different subset

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use rhomatch::field::{ConfigField, DensityField, ScalarField};
use rhomatch::grid::GridSpec;
use rhomatch::smoothing::Mollifier;

pub fn unit(rng: &mut ChaCha8Rng) -> f64 {
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Random symmetric strictly positive two-particle wavefunction with unit
/// mass, plus a perturbed target density, on a d=1 grid.
pub fn random_instance(grid: GridSpec, seed: u64) -> (ConfigField, DensityField) {
    assert_eq!(grid.d(), 1);
    assert_eq!(grid.n_particles(), 2);
    let m = grid.points_per_axis();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut values = vec![0.0; grid.config_len()];
    for x in 0..m {
        for y in x..m {
            let v = 0.1 + unit(&mut rng);
            values[x * m + y] = v;
            values[y * m + x] = v;
        }
    }
    let phi = ConfigField::new_real(grid, values).unwrap();
    let phi = phi.scale(1.0 / phi.mass().sqrt()).unwrap();

    let rho = phi.marginal().unwrap();
    let perturbed: Vec<f64> = rho
        .values()
        .iter()
        .map(|&r| r * (1.0 + 0.3 * (2.0 * unit(&mut rng) - 1.0)))
        .collect();
    let target =
        DensityField::normalized(ScalarField::new(grid, perturbed).unwrap()).unwrap();
    (phi, target)
}

/// Dense reallocation oracle on a two-particle d=1 grid: explicit 2D loops
/// over the squared wavefunction, no shared index helpers.
pub struct DenseRealloc {
    pub h: f64,
    pub m: usize,
    pub phi_sq: Vec<Vec<f64>>,
    pub rho_n: Vec<f64>,
}

impl DenseRealloc {
    pub fn new(phi: &ConfigField, target: &DensityField) -> Self {
        let g = phi.grid();
        assert_eq!(g.d(), 1);
        assert_eq!(g.n_particles(), 2);
        let m = g.points_per_axis();
        let v = phi.real_values().unwrap();
        let mut phi_sq = vec![vec![0.0; m]; m];
        for x in 0..m {
            for y in 0..m {
                phi_sq[x][y] = v[x * m + y] * v[x * m + y];
            }
        }
        DenseRealloc {
            h: g.spacing(),
            m,
            phi_sq,
            rho_n: target.values().to_vec(),
        }
    }

    pub fn sigma(&self) -> Vec<f64> {
        (0..self.m)
            .map(|x| self.h * self.phi_sq[x].iter().sum::<f64>())
            .collect()
    }

    pub fn excess(&self) -> Vec<bool> {
        self.sigma()
            .iter()
            .zip(&self.rho_n)
            .map(|(s, r)| s > r)
            .collect()
    }

    /// Integral of (sigma - rho_n) over the excess set.
    pub fn residual(&self) -> f64 {
        let sigma = self.sigma();
        let mut total = 0.0;
        for x in 0..self.m {
            if sigma[x] > self.rho_n[x] {
                total += (sigma[x] - self.rho_n[x]) * self.h;
            }
        }
        total
    }

    pub fn min_deficit(&self) -> f64 {
        self.sigma()
            .iter()
            .zip(&self.rho_n)
            .map(|(s, r)| r - s)
            .fold(f64::INFINITY, f64::min)
    }

    /// One shaving step applied to the squared wavefunction in place.
    pub fn step(&mut self) {
        let sigma = self.sigma();
        let ratio: Vec<f64> = sigma
            .iter()
            .zip(&self.rho_n)
            .map(|(s, r)| if s > r { (s - r) / s } else { 0.0 })
            .collect();
        for x in 0..self.m {
            for y in 0..self.m {
                let s = 0.5 * (ratio[x] + ratio[y]);
                self.phi_sq[x][y] *= 1.0 - s;
            }
        }
    }

    /// Deficit refill and unit-mass renormalization; returns the final
    /// wavefunction values (not squared), row-major.
    pub fn finish(&self) -> Vec<f64> {
        let sigma = self.sigma();
        let g: Vec<f64> = self
            .rho_n
            .iter()
            .zip(&sigma)
            .map(|(r, s)| (r - s).max(0.0))
            .collect();
        let q: f64 = g.iter().sum::<f64>() * self.h;
        let mut out = vec![0.0; self.m * self.m];
        for x in 0..self.m {
            for y in 0..self.m {
                let alpha = if q <= 1e-14 { 0.0 } else { g[x] * g[y] / q };
                out[x * self.m + y] = (self.phi_sq[x][y] + alpha).sqrt();
            }
        }
        let mass: f64 = out.iter().map(|v| v * v).sum::<f64>() * self.h * self.h;
        let scale = 1.0 / mass.sqrt();
        out.iter_mut().for_each(|v| *v *= scale);
        out
    }
}

/// Dense smoothing oracle: evaluates the mollified plan, the transport
/// kernel and the smoothed plan by direct quadruple-loop summation on a
/// d=1, N=2 grid, sharing only the stencil definition.
pub fn dense_theta(u: &ConfigField, moll: &Mollifier) -> Vec<f64> {
    let g = u.grid();
    assert_eq!(g.d(), 1);
    assert_eq!(g.n_particles(), 2);
    let m = g.points_per_axis();
    let h = g.spacing();
    let v = u.real_values().unwrap();
    let w = |x: usize, y: usize| v[x * m + y] * v[x * m + y];
    let tap = |a: usize, b: usize| moll.tap_at(a as isize - b as isize);

    // Mollified plan Lambda(Y) = h^2 sum_X w(X) k(y1-x1) k(y2-x2).
    let mut lambda = vec![vec![0.0; m]; m];
    for y1 in 0..m {
        for y2 in 0..m {
            let mut acc = 0.0;
            for x1 in 0..m {
                for x2 in 0..m {
                    acc += w(x1, x2) * tap(y1, x1) * tap(y2, x2);
                }
            }
            lambda[y1][y2] = acc * h * h;
        }
    }

    // Single-particle density and its mollification.
    let rho: Vec<f64> = (0..m)
        .map(|x| h * (0..m).map(|y| w(x, y)).sum::<f64>())
        .collect();
    let rho_eps: Vec<f64> = (0..m)
        .map(|y| h * (0..m).map(|x| rho[x] * tap(y, x)).sum::<f64>())
        .collect();

    // Theta(X) = h^2 sum_Y Lambda(Y) prod_j k(y_j - x_j) rho(x_j) / rho_eps(y_j).
    let mut theta = vec![0.0; m * m];
    for x1 in 0..m {
        for x2 in 0..m {
            let mut acc = 0.0;
            for y1 in 0..m {
                for y2 in 0..m {
                    let p = tap(y1, x1) * rho[x1] / rho_eps[y1]
                        * (tap(y2, x2) * rho[x2] / rho_eps[y2]);
                    acc += lambda[y1][y2] * p;
                }
            }
            theta[x1 * m + x2] = acc * h * h;
        }
    }
    theta
}
