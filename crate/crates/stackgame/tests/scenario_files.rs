//! Scenario file parsing: the shipped default, derived fields and rejected input.

use std::path::PathBuf;

use stackgame::params::{Insurer, Scenario, ScenarioConfig};
use stackgame::Error;

fn shipped_default() -> String {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../scenarios/paper_default");
    std::fs::read_to_string(path).unwrap()
}

#[test]
fn shipped_file_matches_builtin_default() {
    let sc = Scenario::parse(&shipped_default()).unwrap();
    assert!(sc.eta2_derived);
    let builtin = ScenarioConfig::paper_default();
    let c = &sc.config;
    assert_eq!(c.market, builtin.market);
    assert_eq!(c.prefs, builtin.prefs);
    assert_eq!(c.delay_l, builtin.delay_l);
    assert_eq!(c.delay_1, builtin.delay_1);
    assert!((c.delay_2.eta - builtin.delay_2.eta).abs() < 1e-15);
    for i in Insurer::BOTH {
        assert!((c.claims.a(i) - builtin.claims.a(i)).abs() < 1e-12);
        assert_eq!(c.claims.sigma(i), builtin.claims.sigma(i));
    }
    assert_eq!(sc, Scenario::paper_default());
    sc.check().unwrap();
}

#[test]
fn derived_eta2_equalises_follower_kappa() {
    let cfg = Scenario::parse(&shipped_default()).unwrap().check().unwrap();
    let k1 = cfg.coeffs(Insurer::One).a + cfg.eta(Insurer::One);
    let k2 = cfg.coeffs(Insurer::Two).a + cfg.eta(Insurer::Two);
    assert!((k1 - k2).abs() < 1e-12 * k1.abs());
}

#[test]
fn unknown_key_rejected() {
    let text = shipped_default().replace("gamma = 0.1", "gamma = 0.1\ngama = 0.2");
    let err = Scenario::parse(&text).unwrap_err();
    assert!(matches!(err, Error::ScenarioFile(ref m) if m.contains("gama")), "{err}");
}

#[test]
fn unknown_section_rejected() {
    let text = format!("{}\n[insurer3]\ngamma = 1.0\n", shipped_default());
    assert!(Scenario::parse(&text).is_err());
}

#[test]
fn missing_key_rejected() {
    let text = shipped_default().replace("sigma = 0.4\n", "");
    assert!(Scenario::parse(&text).is_err());
}

#[test]
fn direct_claim_parameters_accepted() {
    let text = shipped_default()
        .replace("lambda1 = 0.8\nmu1 = 5.0\n", "a1 = 4.0\n")
        .replace("lambda2 = 1.0\nmu2 = 4.0\n", "a2 = 4.0\n");
    let sc = Scenario::parse(&text).unwrap();
    assert_eq!(sc.config.claims.a1, 4.0);
    assert_eq!(sc.config, Scenario::parse(&shipped_default()).unwrap().config);
}

#[test]
fn claim_given_twice_rejected() {
    let text = shipped_default().replace("mu1 = 5.0\n", "mu1 = 5.0\na1 = 4.0\n");
    assert!(Scenario::parse(&text).is_err());
}

#[test]
fn explicit_eta2_must_match_kappa() {
    let text = shipped_default().replace("alpha = 0.3\nx0 = 10.0", "alpha = 0.3\neta = 0.2\nx0 = 10.0");
    let sc = Scenario::parse(&text).unwrap();
    assert!(!sc.eta2_derived);
    assert!(matches!(sc.check(), Err(Error::Validation(_))));
}

#[test]
fn validation_failures_collected() {
    let text = shipped_default()
        .replace("k = 0.4", "k = 4.0")
        .replace("k = 0.3", "k = 3.0")
        .replace("sigma = 0.4", "sigma = -0.4");
    let err = Scenario::parse(&text).unwrap().check().unwrap_err();
    let Error::Validation(rep) = err else {
        panic!("expected a validation report")
    };
    assert!(rep.violations.len() >= 2, "{rep}");
}

#[test]
fn sweeping_insurer1_delay_rederives_eta2() {
    let mut sc = Scenario::paper_default();
    let before = sc.config.delay_2.eta;
    sc.set_param("insurer1.alpha", 0.4).unwrap();
    assert_ne!(sc.config.delay_2.eta, before);
    sc.check().unwrap();
    assert!(sc.set_param("insurer2.eta", 0.1).is_err());
}
