//! One reinsurer and one insurer: a pure Stackelberg game with a four-case schedule.

use crate::error::{Error, Result, ValidationReport};
use crate::kernels::{eval_g1, eval_phi};
use crate::params::{derive_delay_coefficients, kappa, DelaySpec, FinancialMarket, Insurer, ScenarioConfig};

use super::CASE_SLACK;

/// Market with a single insurer. Competition and correlation play no role.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SingleInsurerScenario {
    pub market: FinancialMarket,
    pub a1: f64,
    pub sigma1: f64,
    pub theta1: f64,
    pub theta_bar: f64,
    pub gamma_l: f64,
    pub gamma1: f64,
    pub delay_l: DelaySpec,
    pub delay_1: DelaySpec,
}

impl SingleInsurerScenario {
    /// Keep the reinsurer and insurer `i` of a two-insurer scenario.
    pub fn from_scenario(cfg: &ScenarioConfig, i: Insurer) -> SingleInsurerScenario {
        SingleInsurerScenario {
            market: cfg.market,
            a1: cfg.claims.a(i),
            sigma1: cfg.claims.sigma(i),
            theta1: cfg.claims.theta(i),
            theta_bar: cfg.claims.theta_bar,
            gamma_l: cfg.prefs.gamma_l,
            gamma1: cfg.prefs.gamma(i),
            delay_l: cfg.delay_l,
            delay_1: *cfg.delay(i),
        }
    }

    pub fn check(&self) -> Result<CheckedSingle> {
        let mut rep = ValidationReport::default();
        let m = &self.market;
        for (name, v) in [
            ("market.r0", m.r0),
            ("market.sigma", m.sigma),
            ("market.T", m.horizon),
            ("claims.a1", self.a1),
            ("claims.sigma1", self.sigma1),
            ("claims.theta1", self.theta1),
            ("prefs.gamma_L", self.gamma_l),
            ("prefs.gamma1", self.gamma1),
        ] {
            if !(v.is_finite() && v > 0.0) {
                rep.push(name, format!("must be > 0, got {v}"));
            }
        }
        if !(m.r > m.r0) {
            rep.push("market.r", format!("must exceed r0 = {}, got {}", m.r0, m.r));
        }
        if !(self.theta_bar > self.theta1) {
            rep.push("claims.theta_bar", format!("must exceed theta1 = {}", self.theta1));
        }
        for (name, spec) in [("delay_L", &self.delay_l), ("delay_1", &self.delay_1)] {
            if let Err(e) = derive_delay_coefficients(spec, m.r0) {
                rep.push(name, e.to_string());
            }
        }
        if !rep.is_empty() {
            return Err(Error::Validation(rep));
        }
        Ok(CheckedSingle {
            s: *self,
            kappa_l: kappa(&self.delay_l, m.r0),
            kappa_1: kappa(&self.delay_1, m.r0),
        })
    }
}

/// A validated single-insurer scenario.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CheckedSingle {
    s: SingleInsurerScenario,
    kappa_l: f64,
    kappa_1: f64,
}

impl CheckedSingle {
    pub fn scenario(&self) -> &SingleInsurerScenario {
        &self.s
    }

    pub fn c_f(&self) -> f64 {
        (1.0 + self.s.theta1) * self.s.a1
    }

    pub fn c_bar(&self) -> f64 {
        (1.0 + self.s.theta_bar) * self.s.a1
    }

    pub fn kappa_l(&self) -> f64 {
        self.kappa_l
    }

    pub fn kappa_1(&self) -> f64 {
        self.kappa_1
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SingleCase {
    FullRetention,
    Upper,
    Lower,
    Interior,
}

impl SingleCase {
    pub fn number(self) -> u8 {
        match self {
            SingleCase::FullRetention => 1,
            SingleCase::Upper => 2,
            SingleCase::Lower => 3,
            SingleCase::Interior => 4,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SingleInsurerPoint {
    pub t: f64,
    pub case: SingleCase,
    pub p: f64,
    pub bl: f64,
    pub q1: f64,
    pub b1: f64,
    pub phi_l: f64,
    pub phi_1: f64,
    pub premium_nonunique: bool,
}

fn ge(x: f64, y: f64) -> f64 {
    (x - y) / x.abs().max(y.abs()).max(1.0)
}

/// Equilibrium of the single-insurer game at (t, s).
pub fn single_insurer_strategy(t: f64, s: f64, cfg: &CheckedSingle) -> Result<SingleInsurerPoint> {
    let sc = &cfg.s;
    let m = &sc.market;
    let phi_l = eval_phi(t, cfg.kappa_l, m.horizon);
    let phi_1 = eval_phi(t, cfg.kappa_1, m.horizon);
    let unit = sc.gamma1 * sc.sigma1 * sc.sigma1 * phi_1;
    let n_c = (cfg.c_f() - sc.a1) / unit;
    let n_cbar = (cfg.c_bar() - sc.a1) / unit;
    let gf = sc.gamma1 * phi_1;
    let gl = sc.gamma_l * phi_l;
    let big_m = (gf + gl) / (2.0 * gf + gl);

    let margins = [
        (SingleCase::FullRetention, ge(n_c, 1.0)),
        (SingleCase::Upper, ge(big_m, n_cbar)),
        (SingleCase::Lower, ge(n_c, big_m).min(ge(1.0, n_c))),
        (SingleCase::Interior, ge(big_m, n_c).min(ge(n_cbar, big_m))),
    ];
    let Some(&(case, _)) = margins.iter().find(|(_, mg)| *mg >= -CASE_SLACK) else {
        let diagnostics = super::CaseDiagnostics {
            t,
            margins: margins
                .iter()
                .zip(super::CaseId::ALL)
                .map(|((_, mg), id)| (id, *mg))
                .collect(),
        };
        return Err(Error::NoCaseMatched(Box::new(diagnostics)));
    };
    let (p, q1) = match case {
        SingleCase::FullRetention => (cfg.c_bar(), 1.0),
        SingleCase::Upper => (cfg.c_bar(), n_cbar),
        SingleCase::Lower => (cfg.c_f(), n_c),
        SingleCase::Interior => (sc.a1 + big_m * unit, big_m),
    };
    let bracket = (m.r - m.r0) / (m.sigma * m.sigma) - 2.0 * m.beta * eval_g1(t, m);
    let scale = s.powf(-2.0 * m.beta) * bracket;
    Ok(SingleInsurerPoint {
        t,
        case,
        p,
        bl: scale / gl,
        q1,
        b1: scale / gf,
        phi_l,
        phi_1,
        premium_nonunique: case == SingleCase::FullRetention,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn interior_single() -> CheckedSingle {
        let mut sc = SingleInsurerScenario::from_scenario(&ScenarioConfig::paper_default(), Insurer::One);
        sc.gamma1 = 0.5;
        sc.theta1 = 0.5;
        sc.check().unwrap()
    }

    #[test]
    fn default_insurer_one_prices_at_upper_bound() {
        let cfg = SingleInsurerScenario::from_scenario(&ScenarioConfig::paper_default(), Insurer::One)
            .check()
            .unwrap();
        let pt = single_insurer_strategy(0.0, 1.0, &cfg).unwrap();
        assert_eq!(pt.case, SingleCase::Upper);
        assert_eq!(pt.p, cfg.c_bar());
    }

    #[test]
    fn interior_variance_premium() {
        let cfg = interior_single();
        let sc = *cfg.scenario();
        for t in [0.0, 2.5, 7.0, 10.0] {
            let pt = single_insurer_strategy(t, 1.0, &cfg).unwrap();
            assert_eq!(pt.case, SingleCase::Interior);
            let ced = 1.0 - pt.q1;
            let lhs = pt.p * ced;
            let rhs = sc.a1 * ced + (sc.gamma1 * pt.phi_1 + sc.gamma_l * pt.phi_l) * sc.sigma1.powi(2) * ced * ced;
            assert!((lhs - rhs).abs() <= 1e-12 * lhs.abs());
        }
    }

    #[test]
    fn terminal_interior_premium() {
        let cfg = interior_single();
        let sc = *cfg.scenario();
        let pt = single_insurer_strategy(sc.market.horizon, 1.0, &cfg).unwrap();
        let expect = sc.a1 + sc.gamma1 * sc.sigma1.powi(2) * (sc.gamma1 + sc.gamma_l) / (2.0 * sc.gamma1 + sc.gamma_l);
        assert!((pt.p - expect).abs() < 1e-12);
    }

    #[test]
    fn full_retention_flagged() {
        let mut sc = SingleInsurerScenario::from_scenario(&ScenarioConfig::paper_default(), Insurer::One);
        sc.gamma1 = 0.01;
        let pt = single_insurer_strategy(5.0, 1.0, &sc.check().unwrap()).unwrap();
        assert_eq!(pt.case, SingleCase::FullRetention);
        assert_eq!(pt.q1, 1.0);
        assert!(pt.premium_nonunique);
    }

    #[test]
    fn lower_and_upper_cases() {
        let mut sc = SingleInsurerScenario::from_scenario(&ScenarioConfig::paper_default(), Insurer::One);
        // Tiny loading band pushes the premium to c_bar.
        sc.theta1 = 0.01;
        sc.theta_bar = 0.02;
        let pt = single_insurer_strategy(5.0, 1.0, &sc.check().unwrap()).unwrap();
        assert_eq!(pt.case, SingleCase::Upper);
        // A large loading for the insurer pins the premium at c_F.
        let mut sc = SingleInsurerScenario::from_scenario(&ScenarioConfig::paper_default(), Insurer::One);
        sc.gamma1 = 0.5;
        sc.theta1 = 1.0;
        sc.theta_bar = 3.0;
        let pt = single_insurer_strategy(5.0, 1.0, &sc.check().unwrap()).unwrap();
        assert_eq!(pt.case, SingleCase::Lower);
    }
}
