use delaybandit::delay::DelayDistribution;
use delaybandit::environment::{BanditInstance, Environment};
use delaybandit::policies::{IndexFamily, IndexPolicy, Policy, PolicyConfig, Setting, Variant};
use delaybandit::regret::{checkpoints, pseudo_regret, simulate};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const VARIANTS: [Variant; 8] = [
    Variant::DelayedUcb,
    Variant::DelayedKlucb,
    Variant::DiscardingUcb,
    Variant::DiscardingKlucb,
    Variant::AgnosticDelayedKlucb,
    Variant::Oracle,
    Variant::Uniform,
    Variant::RoundRobin,
];

fn instance() -> impl Strategy<Value = BanditInstance> {
    (prop::collection::vec(0.0..=1.0f64, 2..5), 0.5..60.0f64, prop::option::of(1u64..80), 50u64..600).prop_map(
        |(theta, mean, m, horizon)| {
            BanditInstance::new(theta, DelayDistribution::geometric(mean).unwrap(), m, horizon).unwrap()
        },
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn statistics_stay_consistent(inst in instance(), seed in any::<u64>(), ucb in any::<bool>()) {
        let setting = match inst.censor_window() {
            Some(window) => Setting::Censored { window },
            None => Setting::Uncensored,
        };
        let family = if ucb { IndexFamily::Ucb } else { IndexFamily::KlUcb };
        let mut policy = IndexPolicy::delayed("p", family, &inst, setting, 0.1);
        let mut env = Environment::new(&inst);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut prev = vec![0.0; inst.arms()];
        for t in 1..=inst.horizon() {
            let arm = policy.select_arm(t);
            prop_assert!(arm < inst.arms());
            let fb = env.step(arm, &mut rng).unwrap();
            for d in &fb.disclosures {
                prop_assert!(d.pull_time <= t);
                if let Some(m) = inst.censor_window() {
                    prop_assert!(d.delay() <= m);
                }
            }
            policy.update(arm, &fb);
            let stats = policy.stats();
            let counts = policy.effective_counts().unwrap();
            for k in 0..inst.arms() {
                prop_assert!(stats.successes(k) <= stats.pulls(k));
                prop_assert!(counts[k] >= -1e-12 && counts[k] <= stats.pulls(k) as f64 + 1e-9);
                if k != arm {
                    prop_assert!(counts[k] >= prev[k] - 1e-9);
                }
                if inst.censor_window().is_some() {
                    prop_assert_eq!(stats.settled_pulls(k) + stats.recent_pulls(k), stats.pulls(k));
                }
            }
            prev = counts;
        }
    }

    #[test]
    fn traces_match_the_regret_formula(inst in instance(), seed in any::<u64>(), v in 0usize..VARIANTS.len()) {
        let cps = checkpoints(inst.horizon(), 47);
        let mut policy = PolicyConfig::new(VARIANTS[v]).build(&inst, seed);
        if inst.censor_window().is_none() && matches!(VARIANTS[v], Variant::DiscardingUcb | Variant::DiscardingKlucb) {
            prop_assert!(policy.is_err());
            return Ok(());
        }
        let rep = simulate(&inst, policy.as_mut().unwrap().as_mut(), seed, &cps).unwrap();
        let trace = &rep.trace;
        prop_assert_eq!(rep.actions.len() as u64, inst.horizon());
        prop_assert!(trace.cum_pseudo_regret.windows(2).all(|w| w[0] <= w[1] + 1e-12));
        prop_assert!(trace.cum_reward.windows(2).all(|w| w[0] <= w[1]));
        for (&c, &r) in cps.iter().zip(&trace.cum_pseudo_regret) {
            prop_assert!((r - pseudo_regret(&inst, &rep.actions[..c as usize])).abs() < 1e-9);
        }
    }
}

#[test]
fn zero_rates_never_convert() {
    let inst = BanditInstance::new(vec![0.0, 0.0], DelayDistribution::constant(0), None, 300).unwrap();
    for variant in VARIANTS.into_iter().filter(|v| !matches!(v, Variant::DiscardingUcb | Variant::DiscardingKlucb)) {
        let mut policy = PolicyConfig::new(variant).build(&inst, 1).unwrap();
        let rep = simulate(&inst, policy.as_mut(), 1, &[300]).unwrap();
        assert_eq!(rep.trace.cum_reward, vec![0]);
        assert_eq!(rep.trace.cum_pseudo_regret, vec![0.0]);
    }
}

#[test]
fn certain_conversions_are_rewarded_every_round() {
    let inst = BanditInstance::new(vec![1.0, 1.0], DelayDistribution::constant(0), None, 100).unwrap();
    let mut policy = PolicyConfig::new(Variant::DelayedKlucb).build(&inst, 1).unwrap();
    let rep = simulate(&inst, policy.as_mut(), 1, &checkpoints(100, 10)).unwrap();
    assert_eq!(rep.trace.cum_reward, (1..=10).map(|i| 10 * i).collect::<Vec<u64>>());
}

#[test]
fn learns_the_best_arm() {
    let inst =
        BanditInstance::new(vec![0.2, 0.6, 0.3], DelayDistribution::geometric(5.0).unwrap(), Some(40), 5000).unwrap();
    for variant in [Variant::DelayedUcb, Variant::DelayedKlucb, Variant::DiscardingKlucb, Variant::AgnosticDelayedKlucb]
    {
        let mut policy = PolicyConfig::new(variant).build(&inst, 3).unwrap();
        let rep = simulate(&inst, policy.as_mut(), 3, &[5000]).unwrap();
        let best = rep.actions[4000..].iter().filter(|&&a| a == 1).count();
        assert!(best > 900, "{variant:?} played the best arm {best} times out of 1000");
    }
}
