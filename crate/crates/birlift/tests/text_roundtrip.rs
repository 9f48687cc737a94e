use birlift::text::{env_text, parse_env, parse_expr_str, parse_program, program_text};
use birlift_core::fuzz::{random_env, random_program, random_typing, ExprGen};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn expressions_roundtrip(seed: u64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = ExprGen::new(random_typing(&mut rng));
        let e = g.predicate(&mut rng, 5);
        prop_assert_eq!(parse_expr_str(&e.to_string()).unwrap(), e);
    }

    #[test]
    fn programs_roundtrip(seed: u64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let rp = random_program(&mut rng, 8);
        let text = program_text(&rp.program, &rp.typing);
        let back = parse_program(&text).unwrap();
        prop_assert_eq!(back.program, rp.program);
        prop_assert_eq!(back.declared, rp.typing);
    }

    #[test]
    fn environments_roundtrip(seed: u64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let typing = random_typing(&mut rng);
        let env = random_env(&mut rng, &typing);
        prop_assert_eq!(parse_env(&env_text(&env)).unwrap(), env);
    }
}
