mod common;

use common::properties as props;
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn neighbourhood_weights_sum_to_one((g, r) in (props::graph(), 1usize..5)) {
        props::weights_sum_to_one(&g, r)?;
    }

    #[test]
    fn intensity_is_monotone((p1, p2, zeta, w) in props::monitoring_case()) {
        props::intensity_monotone(&p1, &p2, zeta, w)?;
    }

    #[test]
    fn detector_is_shift_invariant((p1, p2, c) in props::shift_case()) {
        props::detector_shift_invariant(&p1, &p2, c)?;
    }

    #[test]
    fn asymmetry_statistics_flip_under_pair_swap((f1, f2) in props::flows()) {
        props::pair_swap_antisymmetric(&f1, &f2)?;
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn pipeline_is_seed_deterministic(spec in props::scenario()) {
        props::pipeline_deterministic(&spec)?;
    }
}
