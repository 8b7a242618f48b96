//! Property-based invariants: quadrature algebra, marginal consistency,
//! symmetrization, reallocation monotonicity, and file round-trips.

mod common;

use proptest::prelude::*;
use rhomatch::field::{ConfigField, DensityField, ScalarField};
use rhomatch::grid::GridSpec;
use rhomatch::realloc::ReallocState;
use rhomatch::wff;

fn grid_1d2p(m: usize) -> GridSpec {
    GridSpec::new(1, 2, 2.0, m).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn quadrature_linear_and_positive(
        a in -3.0f64..3.0,
        b in -3.0f64..3.0,
        xs in prop::collection::vec(-1.0f64..1.0, 16),
        ys in prop::collection::vec(0.0f64..2.0, 16),
    ) {
        let g = grid_1d2p(16);
        let f = ScalarField::new(g, xs).unwrap();
        let pos = ScalarField::new(g, ys).unwrap();
        let combo = ScalarField::new(
            g,
            f.values().iter().zip(pos.values()).map(|(x, y)| a * x + b * y).collect(),
        )
        .unwrap();
        prop_assert!(
            (combo.integrate() - (a * f.integrate() + b * pos.integrate())).abs() <= 1e-12
        );
        prop_assert!(pos.integrate() >= 0.0);
    }

    #[test]
    fn marginals_agree_over_axes_and_preserve_mass(seed in 0u64..512) {
        let g = grid_1d2p(12);
        let (phi, _) = common::random_instance(g, seed);
        // Any block choice gives the same marginal (checked internally to
        // 1e-10) and the marginal carries the full mass.
        let marg = phi.marginal().unwrap();
        prop_assert!((marg.integrate() - phi.mass()).abs() <= 1e-12);
    }

    #[test]
    fn symmetrize_is_idempotent_and_kills_defect(values in prop::collection::vec(-1.0f64..1.0, 64)) {
        let g = GridSpec::new(1, 3, 1.0, 4).unwrap();
        let u = ConfigField::new_real(g, values).unwrap();
        let s = u.symmetrize().unwrap();
        prop_assert!(s.symmetry_defect() <= 1e-15);
        let s2 = s.symmetrize().unwrap();
        let diff: f64 = s
            .real_values()
            .unwrap()
            .iter()
            .zip(s2.real_values().unwrap())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        prop_assert!(diff <= 1e-15);
    }

    #[test]
    fn realloc_steps_are_monotone(seed in 0u64..256) {
        let g = grid_1d2p(8);
        let (phi, target) = common::random_instance(g, seed);
        let mut state = ReallocState::new(&phi, &target).unwrap();
        for _ in 0..12 {
            let next = state.step(&target).unwrap();
            // 0 <= phi^{k+1} <= phi^k pointwise, excess sets shrink.
            for (a, b) in next
                .phi()
                .real_values()
                .unwrap()
                .iter()
                .zip(state.phi().real_values().unwrap())
            {
                prop_assert!(*a >= 0.0 && *a <= b + 1e-15);
            }
            for (now, before) in next.excess_mask().iter().zip(state.excess_mask()) {
                prop_assert!(!now || *before);
            }
            // Symmetry is preserved along the iteration.
            prop_assert!(
                next.phi().symmetry_defect() <= phi.symmetry_defect() + 1e-13
            );
            state = next;
        }
    }

    #[test]
    fn wff_round_trip_preserves_values(
        values in prop::collection::vec(
            prop::num::f64::NORMAL | prop::num::f64::ZERO, 16),
    ) {
        let g = GridSpec::new(1, 2, 1.0, 4).unwrap();
        let scaled: Vec<f64> = values.iter().map(|v| v % 1e100).collect();
        let f = ConfigField::new_real(g, scaled).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("f.wff");
        wff::write_config(&path, &f).unwrap();
        let back = wff::read_config(&path).unwrap();
        prop_assert_eq!(f.real_values().unwrap(), back.real_values().unwrap());
    }

    #[test]
    fn density_normalization_accepts_only_unit_mass(scale in 0.5f64..2.0) {
        let g = grid_1d2p(16);
        let base = ScalarField::from_fn(g, |x| (-x[0] * x[0]).exp()).unwrap();
        let normalized = DensityField::normalized(base.clone()).unwrap();
        prop_assert!((normalized.integrate() - 1.0).abs() <= 1e-12);
        let scaled = normalized.scale(scale).unwrap();
        if (scale - 1.0).abs() > 1e-9 {
            prop_assert!(DensityField::new(scaled).is_err());
        }
    }
}
