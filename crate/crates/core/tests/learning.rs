use atb_core::analysis::{convergence_stepsize, random_instance, sweep_instance};
use atb_core::envs::{make_gridworld, make_random_walk};
use atb_core::learner::{rms_error, run_episode};
use atb_core::mdp::exact_q;
use atb_core::{CoefficientStrategy, LearnerSettings, LearnerState, Policy, SigmaSchedule, StepsizeSchedule};

fn learn(strategy: CoefficientStrategy, episodes: usize, seed: u64) -> f64 {
    let (mdp, policy) = make_random_walk(5).unwrap();
    let truth = exact_q(&mdp, &policy, 1.0).unwrap();
    let settings = LearnerSettings::new(strategy, convergence_stepsize(), 1.0);
    let mut state = LearnerState::new(&mdp, 0.0, seed);
    for _ in 0..episodes {
        run_episode(&mdp, &policy, &settings, &mut state).unwrap();
    }
    rms_error(&state.q, &truth).unwrap()
}

#[test]
fn every_strategy_approaches_the_true_values_on_the_short_walk() {
    for strategy in [
        CoefficientStrategy::ExpectedSarsa,
        CoefficientStrategy::Sarsa,
        CoefficientStrategy::TreeBackup,
        CoefficientStrategy::QSigma(SigmaSchedule::exponential(1.0, 0.95).unwrap()),
        CoefficientStrategy::CountBased,
        CoefficientStrategy::PolicyBased,
    ] {
        let rms = learn(strategy, 5_000, 3);
        assert!(rms < 0.1, "{strategy}: {rms}");
    }
}

#[test]
fn same_seed_same_table() {
    let (mdp, policy) = make_random_walk(19).unwrap();
    let settings =
        LearnerSettings::new(CoefficientStrategy::CountBased, StepsizeSchedule::constant(0.4).unwrap(), 1.0);
    let tables: Vec<_> = (0..2)
        .map(|_| {
            let mut state = LearnerState::new(&mdp, 0.0, 42);
            for _ in 0..50 {
                run_episode(&mdp, &policy, &settings, &mut state).unwrap();
            }
            state.q
        })
        .collect();
    assert_eq!(tables[0], tables[1]);
}

#[test]
fn gridworld_learning_reduces_error() {
    let mdp = make_gridworld();
    let policy = Policy::uniform(mdp.num_states(), mdp.num_actions());
    let truth = exact_q(&mdp, &policy, 1.0).unwrap();
    let settings =
        LearnerSettings::new(CoefficientStrategy::PolicyBased, StepsizeSchedule::constant(0.1).unwrap(), 1.0);
    let mut state = LearnerState::new(&mdp, 0.0, 9);
    let before = rms_error(&state.q, &truth).unwrap();
    for _ in 0..500 {
        run_episode(&mdp, &policy, &settings, &mut state).unwrap();
    }
    assert!(rms_error(&state.q, &truth).unwrap() < 0.5 * before);
}

#[test]
fn identities_hold_on_random_instances() {
    for seed in 0..25 {
        let r = sweep_instance(&random_instance(seed)).unwrap();
        assert!(r.variance_identity <= 1e-10 && r.covariance_identity <= 1e-10 && r.expected_operator <= 1e-10);
        assert!(r.monotone, "seed {seed}");
    }
}
