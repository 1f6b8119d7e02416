mod common;

use common::exhaustive_topk;
use lawnsim::toolkit::{Registry, Tier, TierConstraint, ToolDescriptor, ToolQuery};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const TAGS: [&str; 6] = ["plan", "local", "global", "perceive", "actuate", "comm"];

fn random_registry(rng: &mut ChaCha8Rng, size: usize) -> Registry {
    let tools = (0..size).map(|i| {
        let tier = if rng.gen_bool(0.5) { Tier::Onboard } else { Tier::Ground };
        let tags: Vec<&str> = TAGS.iter().copied().filter(|_| rng.gen_bool(0.4)).collect();
        // Coarse costs so ties in latency and energy actually happen.
        let lat = f64::from(rng.gen_range(0..5)) * 0.01;
        let en = f64::from(rng.gen_range(0..3)) * 0.5;
        ToolDescriptor::new(&format!("t{:03}", rng.gen_range(0..1000) * 1000 + i), tier, &tags, lat, en)
            .with_floor(f64::from(rng.gen_range(0..4)) * 25.0)
    });
    Registry::from_tools(tools).unwrap()
}

fn random_query(rng: &mut ChaCha8Rng) -> ToolQuery {
    let tags: Vec<&str> = TAGS.iter().copied().filter(|_| rng.gen_bool(0.25)).collect();
    let tier = [TierConstraint::Onboard, TierConstraint::Ground, TierConstraint::Any][rng.gen_range(0..3)];
    ToolQuery::new(&tags, tier, f64::from(rng.gen_range(0..100)), rng.gen_range(0..6))
}

fn names(hits: Vec<&ToolDescriptor>) -> Vec<String> {
    hits.into_iter().map(|t| t.name.clone()).collect()
}

#[test]
fn topk_matches_linear_scan() {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    for _ in 0..50 {
        let size = rng.gen_range(0..60);
        let reg = random_registry(&mut rng, size);
        for _ in 0..20 {
            let q = random_query(&mut rng);
            assert_eq!(names(reg.select_topk(&q)), exhaustive_topk(reg.tools(), &q), "{q:?}");
        }
    }
}

#[test]
fn duplicate_names_are_rejected() {
    let t = ToolDescriptor::new("a", Tier::Onboard, &["plan"], 0.1, 0.1);
    assert!(Registry::from_tools([t.clone(), t]).is_err());
}

proptest! {
    #[test]
    fn topk_is_sorted_bounded_and_admissible(seed in any::<u64>(), size in 0usize..40) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let reg = random_registry(&mut rng, size);
        let q = random_query(&mut rng);
        let hits = reg.select_topk(&q);
        prop_assert!(hits.len() <= q.k);
        for t in &hits {
            prop_assert!(t.matches(&q));
        }
        for w in hits.windows(2) {
            prop_assert!((w[0].latency_cost, w[0].energy_cost, &w[0].name) <= (w[1].latency_cost, w[1].energy_cost, &w[1].name));
        }
    }
}
