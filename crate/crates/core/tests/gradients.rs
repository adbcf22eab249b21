mod common;

use common::{gradient_error, random_triple, FD_REL_TOL};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn analytic_gradient_matches_central_differences(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        if let Some((g, rule, target)) = random_triple(&mut rng) {
            if let Some(err) = gradient_error(&g, &rule, &target) {
                prop_assert!(err <= FD_REL_TOL, "relative error {err:e} for {target:?} on {}", g.to_json());
            }
        }
    }
}
