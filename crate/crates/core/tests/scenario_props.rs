use proptest::prelude::*;

use procsim::scenarios::{
    build_party, counter_scenario, CounterConfig, PartyConfig, PhilosopherState, Trace, Variant,
};
use procsim::stats::{read_csv, simulate, sweep, sweep_sequential, write_csv};
use procsim::Environment;

fn variant() -> impl Strategy<Value = Variant> {
    prop::sample::select(Variant::ALL.to_vec())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn simulate_is_seed_deterministic(n in 2usize..12, v in variant(), seed in any::<u64>()) {
        let a = simulate(n, 3_000.0, v, seed).unwrap();
        let b = simulate(n, 3_000.0, v, seed).unwrap();
        prop_assert_eq!(a.per_philosopher.len(), n);
        let bits = |r: &procsim::stats::SweepResult| {
            r.per_philosopher.iter().map(|w| w.to_bits()).collect::<Vec<_>>()
        };
        prop_assert_eq!(bits(&a), bits(&b));
        prop_assert_eq!(a, b);
    }

    #[test]
    fn cells_do_not_depend_on_their_neighbours(n in 2usize..8, v in variant(), seed in 0u64..5) {
        let grid = sweep(&Variant::ALL, &[2, 5, 7], 2_000.0, &[0, 1, 2, 3, 4]).unwrap();
        if let Some(in_grid) = grid.iter().find(|r| r.variant == v && r.n == n && r.seed == seed) {
            prop_assert_eq!(in_grid, &simulate(n, 2_000.0, v, seed).unwrap());
        }
        let alone = sweep(&[v], &[n], 2_000.0, &[seed]).unwrap();
        prop_assert_eq!(&alone[0], &simulate(n, 2_000.0, v, seed).unwrap());
    }

    #[test]
    fn unordered_deadlocks_have_the_classic_shape(n in 2usize..7, seed in any::<u64>()) {
        let env = Environment::new(seed);
        let mut config = PartyConfig::new(n, Variant::Classic);
        config.record = true;
        let party = build_party(&env, &config, &Trace::disabled()).unwrap();
        if env.run(Some(200_000.0)).unwrap().is_exhausted() {
            prop_assert!(party.is_deadlocked());
            prop_assert_eq!(party.counts(), vec![1; n]);
            for p in &party.philosophers {
                prop_assert_eq!(p.state(), PhilosopherState::HungryWithOneChopstick);
            }
        } else {
            prop_assert!(!party.is_deadlocked());
        }
    }

    #[test]
    fn counter_serves_in_arrival_order(seed in any::<u64>(), customers in 1usize..120, odds in 1u64..12) {
        let env = Environment::new(seed);
        let cfg = CounterConfig { n_customers: customers, fail_one_in: odds, ..Default::default() };
        let model = counter_scenario(&env, cfg, Trace::enabled()).unwrap();
        prop_assert!(env.run(None).unwrap().is_exhausted());
        prop_assert_eq!(model.resolution_order(), (0..customers).collect::<Vec<_>>());
        let mut last = 0.0;
        for c in model.customers() {
            let start = c.service_start.unwrap();
            prop_assert_eq!(c.resolved_at.unwrap(), start + cfg.service_delay);
            prop_assert!(start >= c.arrival && start >= last);
            last = c.resolved_at.unwrap();
        }
        let records = model.trace().records();
        prop_assert!(records.windows(2).all(|w| w[0].time <= w[1].time));
        prop_assert_eq!(records.iter().filter(|r| r.message == "arrived").count(), customers);
    }

    #[test]
    fn csv_round_trips(ns in prop::collection::vec(2usize..6, 1..3), seeds in prop::collection::vec(any::<u64>(), 1..3)) {
        let results = sweep_sequential(&[Variant::Ordered, Variant::Impatient], &ns, 800.0, &seeds).unwrap();
        let mut buf = Vec::new();
        write_csv(&results, &mut buf).unwrap();
        let back = read_csv(&buf[..]).unwrap();
        prop_assert_eq!(back.len(), results.len());
        for (a, b) in results.iter().zip(&back) {
            prop_assert_eq!((a.variant, a.n, a.seed, a.deadlocked), (b.variant, b.n, b.seed, b.deadlocked));
            prop_assert_eq!(a.t.to_bits(), b.t.to_bits());
            prop_assert_eq!(a.mean_waiting.to_bits(), b.mean_waiting.to_bits());
        }
    }
}

#[cfg(feature = "parallel")]
#[test]
fn parallel_and_sequential_sweeps_agree() {
    let ns = [2, 3, 9];
    let seeds = [0, 1, 2];
    let seq = sweep_sequential(&Variant::ALL, &ns, 2_000.0, &seeds).unwrap();
    let par = procsim::stats::sweep_parallel(&Variant::ALL, &ns, 2_000.0, &seeds).unwrap();
    assert_eq!(seq, par);
}

#[test]
fn cli_replays_are_byte_identical() {
    let args: Vec<String> = [
        "procsim",
        "run",
        "--scenario",
        "bowl",
        "--n",
        "6",
        "--seed",
        "4",
        "--until",
        "3000",
        "--diag",
    ]
    .into_iter()
    .map(String::from)
    .collect();
    let once = || {
        let (mut out, mut err) = (Vec::new(), Vec::new());
        assert_eq!(procsim::cli::main_with(&args, &mut out, &mut err), 0);
        out
    };
    let first = once();
    assert!(!first.is_empty());
    assert_eq!(first, once());
}
