//! HJB generator residuals of the closed-form value functions.
//!
//! For V = -(1/gamma) exp(E) every partial derivative is V times a polynomial in
//! the exponent's derivatives, so the generator equals V times a sum of terms.
//! The residual reported is generator / |V|: zero at the optimum and negative at
//! any suboptimal control, since the HJB equation takes a supremum.

use crate::equilibrium::{classify_with, follower_response, investments_from, premium_and_retention_with};
use crate::kernels::{eval_case_constants, KernelEval};
use crate::params::{CheckedScenario, Insurer};
use crate::Result;

use super::{g2_rate, Agent};

/// State seen by the reinsurer's value function, plus the lagged wealth z_L.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LeaderState {
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub s: f64,
}

/// Full state entering an insurer's generator: both insurers' wealth, integrated
/// and lagged delay terms, and the asset price.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FollowerState {
    pub x: [f64; 2],
    pub y: [f64; 2],
    pub z: [f64; 2],
    pub s: f64,
}

/// Generator divided by |V|, with the largest absolute term for scale.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Residual {
    pub value: f64,
    pub scale: f64,
}

impl Residual {
    pub fn relative(&self) -> f64 {
        self.value / self.scale
    }

    fn from_terms(terms: &[f64]) -> Residual {
        // Generator = V * sum(terms) and V < 0.
        let sum: f64 = terms.iter().sum();
        let scale = terms.iter().fold(0.0f64, |m, t| m.max(t.abs()));
        Residual {
            value: -sum,
            scale: scale.max(f64::MIN_POSITIVE),
        }
    }
}

fn idx(i: Insurer) -> usize {
    i.number() - 1
}

/// Terms shared by all agents that come from the asset price and g1.
///
/// `u` is gamma * phi, `b` the effective investment exposure and `g1_rate` dg1/dt.
fn asset_terms(ke: &KernelEval, s: f64, u: f64, b: f64, cfg: &CheckedScenario) -> [f64; 6] {
    let m = cfg.market();
    let beta = m.beta;
    let sig2 = m.sigma * m.sigma;
    let s_2b = s.powf(-2.0 * beta);
    let g1 = ke.g1;
    let g1_rate = 2.0 * beta * m.r0 * g1 + 0.5 * (m.r - m.r0).powi(2) / sig2;
    [
        // V_t part from g1.
        g1_rate * s_2b,
        // x-drift from investment: V_x (r - r0) b.
        -u * (m.r - m.r0) * b,
        // Investment variance: (1/2) b^2 sigma^2 s^{2 beta} V_xx.
        0.5 * b * b * sig2 * s.powf(2.0 * beta) * u * u,
        // r s V_s.
        -2.0 * beta * m.r * g1 * s_2b,
        // (1/2) sigma^2 s^{2 beta + 2} V_ss.
        0.5 * sig2 * (4.0 * beta * beta * g1 * g1 * s_2b + 2.0 * beta * (2.0 * beta + 1.0) * g1),
        // b sigma^2 s^{2 beta + 1} V_xs.
        2.0 * beta * u * g1 * b * sig2,
    ]
}

/// Reinsurer's generator residual at control (p, b_L); insurers answer p with their Nash retentions.
pub fn hjb_residual_l(t: f64, st: &LeaderState, p: f64, b_l: f64, cfg: &CheckedScenario) -> Result<Residual> {
    use Insurer::{One, Two};
    let ke = eval_case_constants(t, cfg);
    let case = classify_with(&ke, cfg)?.case;
    let (q1, q2) = follower_response(&ke, p, cfg);
    let co = cfg.coeffs_l();
    let spec = cfg.config().delay_l;
    let eta = cfg.eta_l();
    let u = cfg.gamma_l() * ke.phi_l;
    let kappa = cfg.kappa_l();
    let (s1, s2) = (cfg.sigma_c(One), cfg.sigma_c(Two));
    let drift_claims = (p - cfg.a(One)) * (1.0 - q1) + (p - cfg.a(Two)) * (1.0 - q2);
    let var_claims = (1.0 - q1).powi(2) * s1 * s1
        + (1.0 - q2).powi(2) * s2 * s2
        + 2.0 * (1.0 - q1) * (1.0 - q2) * s1 * s2 * cfg.rho();

    let mut terms = vec![
        // V_t from phi (phi_t = -kappa phi) and g2.
        u * kappa * (st.x + eta * st.y),
        g2_rate(t, case, Agent::Leader, cfg),
        // V_x times the non-investment drift.
        -u * drift_claims,
        -u * co.a * st.x,
        -u * co.b * st.y,
        -u * co.c * st.z,
        0.5 * u * u * var_claims,
        // (x - alpha y - e^{-alpha h} z) V_y.
        -u * eta * (st.x - spec.alpha * st.y - spec.decay() * st.z),
    ];
    terms.extend(asset_terms(&ke, st.s, u, b_l, cfg));
    Ok(Residual::from_terms(&terms))
}

/// Insurer i's generator residual at control (q_i, b_i); the reinsurer and the
/// other insurer play their equilibrium strategies.
pub fn hjb_residual_f(
    t: f64,
    st: &FollowerState,
    q_i: f64,
    b_i: f64,
    i: Insurer,
    cfg: &CheckedScenario,
) -> Result<Residual> {
    let j = i.other();
    let ke = eval_case_constants(t, cfg);
    let eq = premium_and_retention_with(&ke, cfg)?;
    let inv = investments_from(&ke, st.s, cfg);
    let p = eq.p;
    let q_j = eq.q(j);
    let b_j = inv.b(j);
    let (ki, gi) = (cfg.k(i), cfg.gamma(i));
    let (si, sj) = (cfg.sigma_c(i), cfg.sigma_c(j));
    let (ci, cj) = (cfg.coeffs(i), cfg.coeffs(j));
    let (di, dj) = (cfg.config().delay(i), cfg.config().delay(j));
    let (eta_i, eta_j) = (cfg.eta(i), cfg.eta(j));
    let u = gi * ke.phi_f;
    let kappa = cfg.kappa_f();
    let (xi, xj) = (st.x[idx(i)], st.x[idx(j)]);
    let (yi, yj) = (st.y[idx(i)], st.y[idx(j)]);
    let (zi, zj) = (st.z[idx(i)], st.z[idx(j)]);
    let x_hat = xi - ki * xj;

    let drift_claims = cfg.theta(i) * cfg.a(i) - ki * cfg.theta(j) * cfg.a(j) - (p - cfg.a(i)) * (1.0 - q_i)
        + ki * (p - cfg.a(j)) * (1.0 - q_j);
    let var_claims = (q_i * si).powi(2) + (ki * q_j * sj).powi(2) - 2.0 * q_i * si * ki * q_j * sj * cfg.rho();

    let mut terms = vec![
        u * kappa * (x_hat + eta_i * yi - ki * eta_j * yj),
        g2_rate(t, eq.case, Agent::Follower(i), cfg),
        -u * drift_claims,
        -u * (ci.a * xi - ki * cj.a * xj),
        -u * (ci.b * yi - ki * cj.b * yj),
        -u * (ci.c * zi - ki * cj.c * zj),
        0.5 * u * u * var_claims,
        -u * eta_i * (xi - di.alpha * yi - di.decay() * zi),
        u * ki * eta_j * (xj - dj.alpha * yj - dj.decay() * zj),
    ];
    terms.extend(asset_terms(&ke, st.s, u, b_i - ki * b_j, cfg));
    Ok(Residual::from_terms(&terms))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::equilibrium::equilibrium_point;
    use crate::params::{validate, ScenarioConfig};

    fn default_cfg() -> CheckedScenario {
        validate(&ScenarioConfig::paper_default()).unwrap()
    }

    fn states() -> Vec<(LeaderState, FollowerState)> {
        (0..8)
            .map(|n| {
                let f = n as f64;
                (
                    LeaderState {
                        x: 15.0 + 2.0 * f,
                        y: 3.0 + 0.5 * f,
                        z: 12.0 - f,
                        s: 0.6 + 0.15 * f,
                    },
                    FollowerState {
                        x: [8.0 + f, 11.0 - 0.5 * f],
                        y: [2.0 + 0.3 * f, 4.0 - 0.2 * f],
                        z: [9.0 + 0.7 * f, 10.0],
                        s: 0.6 + 0.15 * f,
                    },
                )
            })
            .collect()
    }

    #[test]
    fn equilibrium_residuals_vanish_at_t5() {
        let cfg = default_cfg();
        let t = 5.0;
        for (ls, fs) in states() {
            let eq = equilibrium_point(t, ls.s, &cfg).unwrap();
            let r = hjb_residual_l(t, &ls, eq.p_star, eq.bl_star, &cfg).unwrap();
            assert!(r.relative().abs() < 1e-6, "leader {r:?}");
            for i in Insurer::BOTH {
                let eq = equilibrium_point(t, fs.s, &cfg).unwrap();
                let (q, b) = match i {
                    Insurer::One => (eq.q1_star, eq.b1_star),
                    Insurer::Two => (eq.q2_star, eq.b2_star),
                };
                let r = hjb_residual_f(t, &fs, q, b, i, &cfg).unwrap();
                assert!(r.relative().abs() < 1e-6, "insurer {i:?} {r:?}");
            }
        }
    }

    #[test]
    fn perturbed_investment_lowers_residual() {
        let cfg = default_cfg();
        let t = 5.0;
        let (ls, fs) = states()[3];
        let eq = equilibrium_point(t, ls.s, &cfg).unwrap();
        let at = hjb_residual_l(t, &ls, eq.p_star, eq.bl_star, &cfg).unwrap();
        let off = hjb_residual_l(t, &ls, eq.p_star, 1.1 * eq.bl_star, &cfg).unwrap();
        assert!(off.value < at.value);
        let eq = equilibrium_point(t, fs.s, &cfg).unwrap();
        let at = hjb_residual_f(t, &fs, eq.q1_star, eq.b1_star, Insurer::One, &cfg).unwrap();
        let off = hjb_residual_f(t, &fs, 1.0, eq.b1_star, Insurer::One, &cfg).unwrap();
        assert!(off.value < at.value);
    }
}
