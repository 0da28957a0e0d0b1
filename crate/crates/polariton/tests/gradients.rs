mod common;

#[test]
fn occupation_gradient_matches_finite_differences() {
    let e = common::occupation_gradient_error(100, 11);
    assert!(e < 1e-6, "max error {e:e}");
}

#[test]
fn g_operator_gradient_matches_finite_differences() {
    let e = common::g_operator_gradient_error(100, 12);
    assert!(e < 1e-6, "max error {e:e}");
}

#[test]
fn penalized_line_slope_matches_descent_vector() {
    let e = common::penalized_line_slope_error(50, 13);
    assert!(e < 1e-6, "max error {e:e}");
}

#[test]
fn line_search_derivative_matches_finite_differences() {
    let e = common::line_derivative_error(50, 14);
    assert!(e < 1e-6, "max error {e:e}");
}
