use icpo::harness::metrics_csv;
use icpo::trainer::{train, train_observed};
use icpo::RunConfig;

fn config(extra: &str) -> RunConfig {
    RunConfig::parse(&format!("steps = 30\nnum_prompts = 8\nlearning_rate = 5\n{extra}")).unwrap()
}

#[test]
fn same_seed_same_metrics() {
    let c = config("seed = 3\n");
    let a = metrics_csv::render(&train(&c).unwrap());
    let b = metrics_csv::render(&train(&c).unwrap());
    assert_eq!(a, b);
    let other = metrics_csv::render(&train(&config("seed = 4\n")).unwrap());
    assert_ne!(a, other);
}

#[test]
fn zero_omega_icpo_matches_grpo() {
    for task in ["modsum", "multipath"] {
        let g = train(&config(&format!("task = {task}\nalgorithm = grpo\n"))).unwrap();
        let i = train(&config(&format!(
            "task = {task}\nalgorithm = icpo\nschedule = no_decay\nomega_peak = 0\nomega_floor = 0\nomega_end = 0\n"
        )))
        .unwrap();
        assert_eq!(metrics_csv::render(&g), metrics_csv::render(&i), "{task}");
    }
}

#[test]
fn metric_ranges() {
    for scenario in ["none", "coarse", "noisy"] {
        let c = config(&format!("scenario = {scenario}\nvocab_size = 6\n"));
        let m = train(&c).unwrap();
        assert_eq!(m.rows.len(), 30);
        for (i, r) in m.rows.iter().enumerate() {
            assert_eq!(r.step, i);
            assert!(r.kl >= 0.0, "{scenario} {r:?}");
            assert!(r.entropy >= 0.0 && r.entropy <= 6f64.ln() + 1e-12);
            assert!((0.0..=1.0).contains(&r.accuracy));
            assert!((0.0..=1.0).contains(&r.mean_reward));
            assert!(r.omega >= 0.0 && r.omega <= 1.0);
        }
        // The reference is the initial policy.
        assert_eq!(m.rows[0].kl, 0.0);
    }
}

#[test]
fn noisy_rewards_stay_in_range_and_only_differ_by_magnitude() {
    let c = config("scenario = noisy\n");
    let mut seen = 0;
    let mut perturbed = 0;
    train_observed(&c, |t| {
        for (clean, r) in t.clean_rewards.iter().zip(&t.rewards) {
            seen += 1;
            assert!((0.0..=1.0).contains(r));
            if clean != r {
                perturbed += 1;
                let d = (clean - r).abs();
                assert!((d - 0.3).abs() < 1e-12 || *r == 0.0 || *r == 1.0);
            }
        }
    })
    .unwrap();
    let share = perturbed as f64 / seen as f64;
    assert!(share > 0.25 && share < 0.45, "{share}");
}

#[test]
fn coarse_groups_have_uniform_rewards() {
    let c = config("scenario = coarse\n");
    train_observed(&c, |t| {
        let uniform = t.rewards.windows(2).all(|w| w[0] == w[1]);
        if t.retained {
            assert!(uniform);
            assert_eq!(t.advantages.len(), t.responses.len());
        } else {
            assert!(t.advantages.is_empty());
        }
    })
    .unwrap();
}
