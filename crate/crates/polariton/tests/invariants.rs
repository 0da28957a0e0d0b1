mod common;

use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn occupations_are_n_representable(seed in any::<u64>()) {
        common::check_occupation_bounds(seed).map_err(TestCaseError::fail)?;
    }

    #[test]
    fn density_matrix_traces(seed in any::<u64>()) {
        common::check_trace_rules(seed).map_err(TestCaseError::fail)?;
    }

    #[test]
    fn interaction_kernels_are_symmetric(seed in any::<u64>()) {
        common::check_kernel_symmetry(seed).map_err(TestCaseError::fail)?;
    }

    #[test]
    fn operators_are_symmetric(seed in any::<u64>()) {
        common::check_hermiticity(seed).map_err(TestCaseError::fail)?;
    }

    #[test]
    fn uncoupled_levels_factorize(seed in any::<u64>()) {
        common::check_uncoupled_factorization(seed).map_err(TestCaseError::fail)?;
    }

    #[test]
    fn solvers_are_deterministic(seed in any::<u64>()) {
        common::check_determinism(seed).map_err(TestCaseError::fail)?;
    }
}
