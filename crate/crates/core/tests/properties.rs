//! Property tests over randomly generated diagrams.

mod common;

use common::*;
use gsrapid::{Catalog, SimConfig};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn float_and_rational_runs_agree(seed in any::<u64>()) {
        let case = effect_case(&mut ChaCha8Rng::seed_from_u64(seed));
        let net = gsrapid::compile(&gsrapid::parse(&case.src, "p.gsr").unwrap(), Catalog::builtin()).unwrap();
        let f = gsrapid::simulate(&net, &case.script, &SimConfig::default()).unwrap();
        let r = gsrapid::simulate_exact(&net, &case.script, &SimConfig::default()).unwrap();
        prop_assert_eq!(f, r);
    }

    #[test]
    fn runs_are_deterministic(seed in any::<u64>()) {
        let case = effect_case(&mut ChaCha8Rng::seed_from_u64(seed));
        let net = gsrapid::compile(&gsrapid::parse(&case.src, "p.gsr").unwrap(), Catalog::builtin()).unwrap();
        let a = gsrapid::simulate(&net, &case.script, &SimConfig::default()).unwrap().to_jsonl();
        let b = gsrapid::simulate(&net, &case.script, &SimConfig::default()).unwrap().to_jsonl();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn printing_is_a_fixed_point(seed in any::<u64>()) {
        let case = effect_case(&mut ChaCha8Rng::seed_from_u64(seed));
        let printed = gsrapid::print(&gsrapid::parse(&case.src, "p.gsr").unwrap());
        let again = gsrapid::print(&gsrapid::parse(&printed, "p.gsr").unwrap());
        prop_assert_eq!(printed, again);
    }

    #[test]
    fn evaluation_order_is_independent_of_declaration_order(seed in any::<u64>()) {
        let case = logic_case(&mut ChaCha8Rng::seed_from_u64(seed));
        let net = gsrapid::compile(&gsrapid::parse(&case.src, "p.gsr").unwrap(), Catalog::builtin()).unwrap();
        let order = gsrapid::evaluation_order(&net).unwrap();
        for (id, _, inputs) in &case.logicals {
            let at = order.iter().position(|s| s == id).unwrap();
            for i in inputs {
                prop_assert!(order.iter().position(|s| s == i).unwrap() < at);
            }
        }
    }

    #[test]
    fn horizon_is_respected(seed in any::<u64>(), max in 1u64..30) {
        let case = effect_case(&mut ChaCha8Rng::seed_from_u64(seed));
        let net = gsrapid::compile(&gsrapid::parse(&case.src, "p.gsr").unwrap(), Catalog::builtin()).unwrap();
        let cfg = SimConfig { max_ticks: max, ..SimConfig::default() };
        let t = gsrapid::simulate(&net, &case.script, &cfg).unwrap();
        prop_assert!(t.records.len() as u64 <= max.min(case.script.ticks));
        use gsrapid::sim::Transition::{Cancelled, Completed, Stopped};
        let root_ended = t.records.iter().flat_map(|r| &r.lifecycle)
            .any(|l| l.command == "R" && matches!(l.status, Completed | Stopped | Cancelled));
        prop_assert_eq!(t.records.last().unwrap().truncated, !root_ended);
    }
}
