//! Monte Carlo behaviour at scale: step-size convergence and value agreement
//! over a window short enough for every agent's estimator to be informative.

use stackgame::params::Scenario;
use stackgame::sim::{initial_values, simulate_terminal_utilities, Policy, SimConfig};
use stackgame::verify::DEFAULT_SEED;

#[test]
fn halving_step_moves_leader_estimate_within_noise() {
    let cfg = Scenario::paper_default().check().unwrap();
    let fine = SimConfig::full_horizon(&cfg, 100_000, DEFAULT_SEED);
    let coarse = SimConfig {
        dt: 2.0 * fine.dt,
        ..fine
    };
    let a = simulate_terminal_utilities(&cfg, &coarse, Policy::Equilibrium)
        .unwrap()
        .leader;
    let b = simulate_terminal_utilities(&cfg, &fine, Policy::Equilibrium)
        .unwrap()
        .leader;
    let combined = a.std_error.hypot(b.std_error);
    assert!((a.mean - b.mean).abs() < combined, "{a:?} vs {b:?}");
}

#[test]
fn final_half_year_matches_closed_form_for_all_agents() {
    let cfg = Scenario::paper_default().check().unwrap();
    let sim = SimConfig {
        t_start: 9.5,
        ..SimConfig::full_horizon(&cfg, 20_000, DEFAULT_SEED)
    };
    let out = simulate_terminal_utilities(&cfg, &sim, Policy::Equilibrium).unwrap();
    let closed = initial_values(&cfg, sim.t_start).unwrap();
    let est = [out.leader, out.insurers[0], out.insurers[1]];
    for k in 0..3 {
        let z = est[k].z_score(closed[k]);
        assert!(z.abs() < 3.0, "agent {k}: {:?} vs {} (z = {z})", est[k], closed[k]);
    }
    assert_eq!(out.flagged, 0);
}
