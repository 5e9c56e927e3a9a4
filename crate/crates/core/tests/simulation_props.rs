use deliver::coordination::MessageKind;
use deliver::geometry::Point;
use deliver::nlu::TaskSpec;
use deliver::planning::Robot;
use deliver::simulation::{
    generate_trial, run_batch, run_trial_detailed, summarize, to_jsonl, Package, SimConfig,
};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(96))]

    #[test]
    fn generated_trials_respect_constraints(seed in any::<u64>(), n in 1u32..=30) {
        let config = SimConfig::default();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (robots, task) = generate_trial(n, &config, &mut rng).unwrap();
        prop_assert_eq!(robots.len(), n as usize);
        for (i, a) in robots.iter().enumerate() {
            prop_assert!(a.position.x.fract() == 0.5 && a.position.y.fract() == 0.5);
            prop_assert!((0.0..20.0).contains(&a.position.x) && (0.0..20.0).contains(&a.position.y));
            for b in &robots[i + 1..] {
                prop_assert!(a.position != b.position);
            }
        }
        let dx = task.pickup.x - task.drop.x;
        let dy = task.pickup.y - task.drop.y;
        prop_assert!((dx * dx + dy * dy).sqrt() >= 8.0);
    }

    #[test]
    fn executions_keep_invariants(seed in any::<u64>(), n in 1u32..=12, delay in 0u64..=3) {
        let config = SimConfig { message_delay: delay, ..SimConfig::default() };
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (robots, task) = generate_trial(n, &config, &mut rng).unwrap();
        let run = run_trial_detailed(&robots, &task, &config, 1).unwrap();
        let relay = &run.relay;
        prop_assert!(relay.completed && run.baseline.completed);
        prop_assert_eq!(relay.package, Package::Delivered);
        prop_assert_eq!(relay.monitor.possession_violations, 0);
        prop_assert_eq!(relay.monitor.conservation_violations, 0);
        prop_assert_eq!(relay.monitor.bystander_activity, 0);
        prop_assert!(relay.monitor.handoffs_local(std::f64::consts::SQRT_2));
        let k = run.plan.transfers.len();
        prop_assert_eq!(relay.count(MessageKind::HandoffReady), k);
        prop_assert_eq!(relay.count(MessageKind::HandoffAck), k);
        prop_assert_eq!(relay.count(MessageKind::TaskComplete), 1);
        if delay == 0 {
            prop_assert!(relay.monitor.overlap_ticks <= k as u64);
        }
        // every active robot at least reaches its first waypoint's neighbourhood
        prop_assert_eq!(relay.moves.len(), run.plan.active.len());
    }
}

#[test]
fn one_robot_relay_equals_baseline() {
    let robots = vec![Robot::new(0, 10.5, 10.5)];
    let task = TaskSpec {
        pickup: Point::new(2.5, 2.5),
        drop: Point::new(17.5, 12.5),
        item: "box".into(),
        source_text: String::new(),
    };
    let run = run_trial_detailed(&robots, &task, &SimConfig::default(), 0).unwrap();
    assert_eq!(run.record.total_moves, run.record.baseline_total_moves);
    assert_eq!(run.record.total_moves, 16 + 25);
}

#[test]
fn batch_independent_of_thread_count() {
    let config = SimConfig {
        team_sizes: vec![2, 6],
        trials_per_size: 10,
        seed: 99,
        ..SimConfig::default()
    };
    let many = run_batch(&config).unwrap();
    let one = rayon::ThreadPoolBuilder::new()
        .num_threads(1)
        .build()
        .unwrap()
        .install(|| run_batch(&config).unwrap());
    assert_eq!(to_jsonl(&many.records), to_jsonl(&one.records));
    assert_eq!(to_jsonl(&many.messages), to_jsonl(&one.messages));
    assert_eq!(
        summarize(&many.records).unwrap().to_csv(),
        summarize(&one.records).unwrap().to_csv()
    );

    let other = run_batch(&SimConfig {
        seed: 100,
        ..config
    })
    .unwrap();
    assert_ne!(to_jsonl(&many.records), to_jsonl(&other.records));
}
