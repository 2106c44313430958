use std::time::Instant;

use sonic_guide::Mode;
use sonic_guide_service::operator::run_trial;
use sonic_guide_service::{run_simulated_operator, OperatorConfig, OperatorSummary, Outcome};

#[test]
fn two_d_trial_from_default_distance_hits_within_budget() {
    let cfg = OperatorConfig { mode: Mode::TwoD, ..Default::default() };
    let t0 = Instant::now();
    let rec = run_trial(&cfg, 1, 42).unwrap();
    eprintln!("steps {:?} path {:.3} in {:?}", rec.steps, rec.path_length, t0.elapsed());
    assert_eq!(rec.outcome, Outcome::Hit);
    assert!(rec.steps.unwrap() <= 50);
    assert!(rec.final_position().unwrap().norm() <= rec.target_radius);
    assert!((rec.path[0].d.norm() - 0.8).abs() <= 1e-9);
    assert!(rec.path.iter().all(|s| s.d.z == 0.0));
}

#[test]
fn start_inside_zone_hits_in_one_step() {
    let cfg = OperatorConfig { start_distance: 0.0, mode: Mode::ThreeD, ..Default::default() };
    let rec = run_trial(&cfg, 1, 5).unwrap();
    assert_eq!(rec.outcome, Outcome::Hit);
    assert_eq!(rec.steps, Some(1));
}

#[test]
fn runs_are_deterministic_and_thread_independent() {
    let base = OperatorConfig { trials: 4, seed: 11, mode: Mode::ThreeD, ..Default::default() };
    let a = run_simulated_operator(&OperatorConfig { threads: 1, ..base }).unwrap();
    let b = run_simulated_operator(&OperatorConfig { threads: 3, ..base }).unwrap();
    assert_eq!(a, b);
    let ids: Vec<u64> = a.iter().map(|r| r.trial).collect();
    assert_eq!(ids, [1, 2, 3, 4]);
    for r in &a {
        assert_eq!(r.outcome == Outcome::Hit, r.final_position().unwrap().norm() <= r.target_radius);
    }
    let s = OperatorSummary::from_records(&a);
    assert_eq!(s.trials, 4);
}

#[test]
fn budget_exhaustion_is_a_timeout() {
    let cfg = OperatorConfig { max_steps: 1, ..Default::default() };
    let rec = run_trial(&cfg, 1, 3).unwrap();
    assert_eq!(rec.outcome, Outcome::Timeout);
    assert_eq!(rec.steps, Some(1));
    assert!(rec.time_to_target.is_none());
}
