//! Property tests for the structural invariants of the grid calculus and
//! the drift decomposition.

use proptest::prelude::*;
use qpot_core::functionals::{fisher_information, shannon_entropy};
use qpot_core::grid::{gradient, laplacian, quadrature, Grid, GridField};
use qpot_core::paths::drift_pair_from_fields;
use qpot_core::scenario::gaussian_pdf;
use qpot_core::PhysicalConstants;

fn smooth_field(grid: Grid, a: f64, b: f64, k: f64) -> GridField {
    GridField::from_fn(grid, |x| a * (k * x).sin() + b * x * x / 10.0).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn differential_operators_are_linear(
        a in -3.0f64..3.0,
        b in -3.0f64..3.0,
        alpha in -5.0f64..5.0,
        beta in -5.0f64..5.0,
        k in 0.3f64..2.5,
    ) {
        let grid = Grid::new(-4.0, 4.0, 801).unwrap();
        let f = smooth_field(grid, a, b, k);
        let g = smooth_field(grid, b, a, 1.7 * k);
        let combo = f.zip(&g, |x, y| alpha * x + beta * y);
        for op in [gradient, laplacian] {
            let lhs = op(&combo).unwrap();
            let rhs = op(&f).unwrap().zip(&op(&g).unwrap(), |x, y| alpha * x + beta * y);
            let scale = lhs.max_abs().max(1.0);
            for (l, r) in lhs.values().iter().zip(rhs.values()) {
                prop_assert!((l - r).abs() <= 1e-10 * scale);
            }
        }
    }

    #[test]
    fn quadrature_of_gradient_telescopes(
        a in -2.0f64..2.0,
        b in -2.0f64..2.0,
        k in 0.3f64..2.0,
    ) {
        let grid = Grid::new(-3.0, 3.0, 1201).unwrap();
        let f = smooth_field(grid, a, b, k);
        let df = gradient(&f).unwrap();
        let jump = f.values()[grid.len() - 1] - f.values()[0];
        prop_assert!((quadrature(&df) - jump).abs() < 1e-4 * (1.0 + jump.abs()));
    }

    #[test]
    fn drift_pair_identities_hold(
        mean in -1.0f64..1.0,
        sigma in 0.5f64..1.5,
        v_amp in -1.0f64..1.0,
    ) {
        let grid = Grid::new(-10.0, 10.0, 1001).unwrap();
        let c = PhysicalConstants::default();
        let rho = gaussian_pdf(grid, mean, sigma).unwrap();
        let v = GridField::from_fn(grid, |x| v_amp * (0.5 * x).sin()).unwrap();
        let pair = drift_pair_from_fields(&rho, &v, &c).unwrap();
        for i in 0..grid.len() {
            if pair.mask.is_inside(i) {
                let mean_drift = 0.5 * (pair.b.values()[i] + pair.b_star.values()[i]);
                prop_assert!((mean_drift - pair.v.values()[i]).abs() < 1e-12);
                let osmotic = pair.b.values()[i] - pair.b_star.values()[i];
                prop_assert!((osmotic - 2.0 * pair.u.values()[i]).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn functionals_are_translation_invariant(
        shift in -1.5f64..1.5,
        sigma in 0.6f64..1.4,
    ) {
        let grid = Grid::new(-10.0, 10.0, 2001).unwrap();
        let base = gaussian_pdf(grid, 0.0, sigma).unwrap();
        let moved = gaussian_pdf(grid, shift, sigma).unwrap();
        let ds = shannon_entropy(&base).unwrap() - shannon_entropy(&moved).unwrap();
        let df = fisher_information(&base).unwrap() - fisher_information(&moved).unwrap();
        prop_assert!(ds.abs() < 1e-8, "entropy shift {}", ds);
        prop_assert!(df.abs() < 1e-8, "fisher shift {}", df);
    }
}
