mod common;

use common::{grad_case, gradient_check};

#[test]
fn analytic_gradient_matches_central_differences() {
    for (i, &(d, k)) in [(4, 0), (4, 2), (8, 1), (8, 3), (16, 2)].iter().enumerate() {
        let gc = grad_case(d, k, 100 + i as u64);
        let (worst, checked) = gradient_check(&gc, 1e-5);
        assert!(worst < 1e-4, "d={d} K={k}: worst relative error {worst:e} over {checked} partials");
    }
}
