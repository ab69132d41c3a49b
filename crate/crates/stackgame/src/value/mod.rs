//! Closed-form value functions, their case-dependent g2 accumulators and HJB
//! generator residuals.

use crate::equilibrium::{case_timeline, CaseId, CaseSegment};
use crate::kernels::{eval_g1, eval_g_plain, eval_phi};
use crate::params::{CheckedScenario, Insurer};
use crate::Result;

mod forms;
pub mod hjb;

pub use forms::Agent;
pub use hjb::{hjb_residual_f, hjb_residual_l, FollowerState, LeaderState, Residual};

/// The three g2 accumulators at one time.
#[derive(Debug, Clone, PartialEq)]
pub struct G2Eval {
    pub t: f64,
    /// Case in force at `t`.
    pub case: CaseId,
    pub g2_l: f64,
    pub g2_f1: f64,
    pub g2_f2: f64,
    /// True if the case changes somewhere in [t, T] and the value was assembled piecewise.
    pub stitched: bool,
    pub segments: Vec<CaseSegment>,
}

impl G2Eval {
    pub fn get(&self, agent: Agent) -> f64 {
        match agent {
            Agent::Leader => self.g2_l,
            Agent::Follower(Insurer::One) => self.g2_f1,
            Agent::Follower(Insurer::Two) => self.g2_f2,
        }
    }
}

/// Contribution of one case over [lo, hi] to each accumulator.
fn segment_increments(case: CaseId, lo: f64, hi: f64, cfg: &CheckedScenario) -> Result<[f64; 3]> {
    let mut out = [0.0; 3];
    for (slot, agent) in Agent::ALL.into_iter().enumerate() {
        out[slot] = forms::closed_form(case, agent, cfg).increment(lo, hi)?;
    }
    Ok(out)
}

fn assemble(t: f64, case_at_t: CaseId, segments: Vec<CaseSegment>, cfg: &CheckedScenario) -> Result<G2Eval> {
    let g = eval_g_plain(t, cfg.market());
    let mut acc = [g; 3];
    for seg in &segments {
        let inc = segment_increments(seg.case, seg.lo, seg.hi, cfg)?;
        for (a, v) in acc.iter_mut().zip(inc) {
            *a += v;
        }
    }
    Ok(G2Eval {
        t,
        case: case_at_t,
        g2_l: acc[0],
        g2_f1: acc[1],
        g2_f2: acc[2],
        stitched: segments.len() > 1,
        segments,
    })
}

/// The closed forms of `case` evaluated as if that case held on all of [t, T].
pub fn g2_case(t: f64, case: CaseId, cfg: &CheckedScenario) -> Result<G2Eval> {
    let seg = CaseSegment {
        lo: t,
        hi: cfg.horizon(),
        case,
    };
    assemble(t, case, vec![seg], cfg)
}

/// g2 at time t, stitched across every case switch in [t, T].
pub fn g2_eval(t: f64, cfg: &CheckedScenario) -> Result<G2Eval> {
    let segments = case_timeline(t, cfg)?;
    let case = segments.first().map(|s| s.case).expect("timeline is never empty");
    assemble(t, case, segments, cfg)
}

/// dg2/dt for `agent` at time t under `case`.
pub fn g2_rate(t: f64, case: CaseId, agent: Agent, cfg: &CheckedScenario) -> f64 {
    let m = cfg.market();
    let g_rate = -m.beta * (2.0 * m.beta + 1.0) * m.sigma * m.sigma * eval_g1(t, m);
    g_rate + forms::closed_form(case, agent, cfg).rate(t)
}

/// A value function evaluated at one state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ValueEval {
    pub t: f64,
    /// Wealth argument of the exponent: x_L + eta_L y_L, or x_hat_i + eta_i y_i - k_i eta_j y_j.
    pub wealth: f64,
    pub s: f64,
    pub exponent: f64,
    pub value: f64,
}

fn compose(t: f64, gamma: f64, phi: f64, wealth: f64, s: f64, g2: f64, cfg: &CheckedScenario) -> ValueEval {
    let m = cfg.market();
    let exponent = -gamma * phi * wealth + eval_g1(t, m) * s.powf(-2.0 * m.beta) + g2;
    ValueEval {
        t,
        wealth,
        s,
        exponent,
        value: -exponent.exp() / gamma,
    }
}

/// The reinsurer's value at (t, x_L, y_L, s).
pub fn value_l(t: f64, x_l: f64, y_l: f64, s: f64, cfg: &CheckedScenario) -> Result<ValueEval> {
    let g2 = g2_eval(t, cfg)?;
    Ok(value_l_with(&g2, x_l, y_l, s, cfg))
}

/// The reinsurer's value reusing an evaluated g2.
pub fn value_l_with(g2: &G2Eval, x_l: f64, y_l: f64, s: f64, cfg: &CheckedScenario) -> ValueEval {
    let phi = eval_phi(g2.t, cfg.kappa_l(), cfg.horizon());
    compose(g2.t, cfg.gamma_l(), phi, x_l + cfg.eta_l() * y_l, s, g2.g2_l, cfg)
}

/// Insurer i's value at (t, x_hat_i, y_i, y_j, s) with x_hat_i = x_i - k_i x_j.
pub fn value_f(t: f64, x_hat: f64, y_i: f64, y_j: f64, s: f64, i: Insurer, cfg: &CheckedScenario) -> Result<ValueEval> {
    let g2 = g2_eval(t, cfg)?;
    Ok(value_f_with(&g2, x_hat, y_i, y_j, s, i, cfg))
}

/// Insurer i's value reusing an evaluated g2.
pub fn value_f_with(
    g2: &G2Eval,
    x_hat: f64,
    y_i: f64,
    y_j: f64,
    s: f64,
    i: Insurer,
    cfg: &CheckedScenario,
) -> ValueEval {
    let j = i.other();
    let phi = eval_phi(g2.t, cfg.kappa_f(), cfg.horizon());
    let wealth = x_hat + cfg.eta(i) * y_i - cfg.k(i) * cfg.eta(j) * y_j;
    compose(g2.t, cfg.gamma(i), phi, wealth, s, g2.get(Agent::Follower(i)), cfg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::{validate, ScenarioConfig};

    fn default_cfg() -> CheckedScenario {
        validate(&ScenarioConfig::paper_default()).unwrap()
    }

    #[test]
    fn terminal_conditions_every_case() {
        let cfg = default_cfg();
        for case in CaseId::ALL {
            let g = g2_case(cfg.horizon(), case, &cfg).unwrap();
            assert_eq!((g.g2_l, g.g2_f1, g.g2_f2), (0.0, 0.0, 0.0), "case {case}");
        }
    }

    #[test]
    fn default_is_stitched_before_switch() {
        let cfg = default_cfg();
        let g = g2_eval(0.0, &cfg).unwrap();
        assert!(g.stitched);
        assert_eq!(g.segments.len(), 2);
        assert_eq!(g.case, CaseId::Case8);
        let late = g2_eval(8.0, &cfg).unwrap();
        assert!(!late.stitched);
        let direct = g2_case(8.0, CaseId::Case10, &cfg).unwrap();
        assert_eq!(late.g2_l, direct.g2_l);
    }

    #[test]
    fn stitched_g2_is_continuous_across_switch() {
        let cfg = default_cfg();
        let g = g2_eval(0.0, &cfg).unwrap();
        let ts = g.segments[0].hi;
        let a = g2_eval(ts - 1e-7, &cfg).unwrap();
        let b = g2_eval(ts + 1e-7, &cfg).unwrap();
        for agent in Agent::ALL {
            assert!((a.get(agent) - b.get(agent)).abs() < 1e-5);
        }
    }

    #[test]
    fn rate_matches_finite_difference() {
        let cfg = default_cfg();
        let h = 1e-5;
        for (t, case) in [(3.0, CaseId::Case8), (8.5, CaseId::Case10)] {
            for agent in Agent::ALL {
                let up = g2_case(t + h, case, &cfg).unwrap().get(agent);
                let dn = g2_case(t - h, case, &cfg).unwrap().get(agent);
                let fd = (up - dn) / (2.0 * h);
                let an = g2_rate(t, case, agent, &cfg);
                assert!(
                    (fd - an).abs() < 1e-6 * an.abs().max(1.0),
                    "{agent:?} {case}: {fd} vs {an}"
                );
            }
        }
    }

    #[test]
    fn terminal_value_is_utility() {
        let cfg = default_cfg();
        let t = cfg.horizon();
        let v = value_l(t, 20.0, 3.0, 1.4, &cfg).unwrap();
        let gl = cfg.gamma_l();
        let expect = -(-gl * (20.0 + cfg.eta_l() * 3.0)).exp() / gl;
        assert!((v.value - expect).abs() < 1e-15);
        let v = value_f(t, 6.0, 1.0, 2.0, 0.7, Insurer::Two, &cfg).unwrap();
        let g2 = cfg.gamma(Insurer::Two);
        let w = 6.0 + cfg.eta(Insurer::Two) * 1.0 - cfg.k(Insurer::Two) * cfg.eta(Insurer::One) * 2.0;
        assert!((v.value - (-(-g2 * w).exp() / g2)).abs() < 1e-15);
    }

    #[test]
    fn value_increases_with_wealth() {
        let cfg = default_cfg();
        let a = value_l(2.0, 20.0, 5.0, 1.0, &cfg).unwrap();
        let b = value_l(2.0, 21.0, 5.0, 1.0, &cfg).unwrap();
        assert!(a.value < 0.0 && b.value < 0.0 && b.value > a.value);
    }
}
