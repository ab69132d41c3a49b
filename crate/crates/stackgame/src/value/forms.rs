//! Per-case closed forms of the g2 accumulators.
//!
//! Every closed form has the shape
//!
//! g2(t) = g(t) + lin (phi(t) - 1)/kappa + quad (phi(t)^2 - 1)/(4 kappa)
//!         + tau (T - t) + integral_T^t f(s) ds
//!
//! so a form is stored as its four ingredients. Evaluating it over a segment
//! [lo, hi] yields the contribution of that segment when the case holds only there.

use crate::equilibrium::CaseId;
use crate::kernels::{eval_case_constants, eval_phi};
use crate::numerics::{integrate, QUAD_ABS_TOL};
use crate::params::{CheckedScenario, Insurer};
use crate::Result;

/// Whose accumulator a form describes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Agent {
    Leader,
    Follower(Insurer),
}

impl Agent {
    pub const ALL: [Agent; 3] = [
        Agent::Leader,
        Agent::Follower(Insurer::One),
        Agent::Follower(Insurer::Two),
    ];
}

type Integrand<'a> = Box<dyn Fn(f64) -> f64 + 'a>;

pub(crate) struct ClosedForm<'a> {
    kappa: f64,
    horizon: f64,
    lin: f64,
    quad: f64,
    tau: f64,
    integrand: Option<Integrand<'a>>,
}

/// (e^{kappa d} - 1)/kappa, with the kappa -> 0 limit d.
fn exp_ratio(kappa: f64, d: f64) -> f64 {
    if kappa == 0.0 {
        d
    } else {
        (kappa * d).exp_m1() / kappa
    }
}

impl ClosedForm<'_> {
    /// g2(lo) - g2(hi) excluding g, if the case held on [lo, hi].
    pub(crate) fn increment(&self, lo: f64, hi: f64) -> Result<f64> {
        let d = hi - lo;
        let phi_hi = eval_phi(hi, self.kappa, self.horizon);
        // (phi(lo) - phi(hi))/kappa and (phi(lo)^2 - phi(hi)^2)/(4 kappa).
        let lin = phi_hi * exp_ratio(self.kappa, d);
        let quad = phi_hi * phi_hi * exp_ratio(2.0 * self.kappa, d) / 2.0;
        let mut v = self.lin * lin + self.quad * quad + self.tau * d;
        if let Some(f) = &self.integrand {
            v -= integrate(f, lo, hi, QUAD_ABS_TOL)?;
        }
        Ok(v)
    }

    /// d/dt of the closed form excluding g.
    pub(crate) fn rate(&self, t: f64) -> f64 {
        let phi = eval_phi(t, self.kappa, self.horizon);
        let mut v = -self.lin * phi - 0.5 * self.quad * phi * phi - self.tau;
        if let Some(f) = &self.integrand {
            v += f(t);
        }
        v
    }
}

/// Premium prescribed at time s by a case whose premium is fixed or given by P_N/P_D.
fn case_premium(case: CaseId, s: f64, cfg: &CheckedScenario) -> f64 {
    match case {
        CaseId::Case1 | CaseId::Case2 | CaseId::Case5 | CaseId::Case8 => cfg.c_bar(),
        CaseId::Case3 | CaseId::Case6 | CaseId::Case9 => cfg.c_f(),
        _ => eval_case_constants(s, cfg).premium_fraction(),
    }
}

pub(crate) fn closed_form<'a>(case: CaseId, agent: Agent, cfg: &'a CheckedScenario) -> ClosedForm<'a> {
    match agent {
        Agent::Leader => leader_form(case, cfg),
        Agent::Follower(i) => follower_form(case, i, cfg),
    }
}

fn leader_form(case: CaseId, cfg: &CheckedScenario) -> ClosedForm<'_> {
    use Insurer::{One, Two};
    let gl = cfg.gamma_l();
    let rho = cfg.rho();
    let mut form = ClosedForm {
        kappa: cfg.kappa_l(),
        horizon: cfg.horizon(),
        lin: 0.0,
        quad: 0.0,
        tau: 0.0,
        integrand: None,
    };
    match case {
        CaseId::Case1 => {}
        CaseId::Case2 | CaseId::Case3 | CaseId::Case4 | CaseId::Case5 | CaseId::Case6 | CaseId::Case7 => {
            let i = case.full_retainer().expect("boundary case");
            let j = i.other();
            let (si, sj) = (cfg.sigma_c(i), cfg.sigma_c(j));
            let kj = cfg.k(j);
            let eff = sj - kj * rho * si;
            let aj = cfg.a(j);
            let gj = cfg.gamma(j);
            form.quad = gl * gl * eff * eff;
            if matches!(case, CaseId::Case4 | CaseId::Case7) {
                form.integrand = Some(Box::new(move |s| {
                    let ke = eval_case_constants(s, cfg);
                    0.5 * gl * eff * eff * ke.phi_l * (gj * ke.phi_f + gl * ke.phi_l) * ke.m_f(j)
                }));
            } else {
                let pb = case_premium(case, 0.0, cfg);
                let cj = kj * rho * si / sj;
                form.integrand = Some(Box::new(move |s| {
                    let phi_l = eval_phi(s, cfg.kappa_l(), cfg.horizon());
                    let phi_f = eval_phi(s, cfg.kappa_f(), cfg.horizon());
                    let ratio = phi_l / phi_f;
                    (pb - aj) * gl * (1.0 - cj) * (phi_l + gl / gj * phi_l * ratio)
                        - (pb - aj).powi(2) * gl / (gj * sj * sj) * (ratio + gl / (2.0 * gj) * ratio * ratio)
                }));
            }
        }
        CaseId::Case8 | CaseId::Case9 | CaseId::Case10 => {
            let (s1, s2) = (cfg.sigma_c(One), cfg.sigma_c(Two));
            form.quad = gl * gl * (s1 * s1 + s2 * s2 + 2.0 * s1 * s2 * rho);
            let (a1, a2) = (cfg.a(One), cfg.a(Two));
            let (g1, g2) = (cfg.gamma(One), cfg.gamma(Two));
            form.integrand = Some(Box::new(move |s| {
                let ke = eval_case_constants(s, cfg);
                let p = match case {
                    CaseId::Case10 => ke.premium_fraction(),
                    _ => case_premium(case, s, cfg),
                };
                let lf = ke.phi_l / ke.phi_f;
                ke.k * gl
                    * ((p - a1) / g1 * lf * ke.d_f1 + (p - a2) / g2 * lf * ke.d_f2
                        - (p - a1).powi(2) / (g1 * s1 * s1) * lf * ke.d_bar_f1
                        - (p - a2).powi(2) / (g2 * s2 * s2) * lf * ke.d_bar_f2
                        - rho * (p - a1) * (p - a2) / (g1 * g2 * s1 * s2) * lf / ke.phi_f * ke.d_f12)
            }));
        }
    }
    form
}

fn follower_form(case: CaseId, i: Insurer, cfg: &CheckedScenario) -> ClosedForm<'_> {
    let j = i.other();
    let rho = cfg.rho();
    let (gi, gj) = (cfg.gamma(i), cfg.gamma(j));
    let (si, sj) = (cfg.sigma_c(i), cfg.sigma_c(j));
    let (ai, aj) = (cfg.a(i), cfg.a(j));
    let (ki, kj) = (cfg.k(i), cfg.k(j));
    let k1k2 = ki * kj;
    let big_k = cfg.big_k();
    let loading = cfg.theta(i) * ai - ki * cfg.theta(j) * aj;
    let mut form = ClosedForm {
        kappa: cfg.kappa_f(),
        horizon: cfg.horizon(),
        lin: -gi * loading,
        quad: 0.0,
        tau: 0.0,
        integrand: None,
    };
    // Coefficients of the interior-case quadratic in (p - a_i), (p - a_j).
    let cii = (1.0 - (k1k2 * rho).powi(2)) / (si * si);
    let cjj = ki * gi * (2.0 * gj - 2.0 * k1k2 * gj * rho * rho + ki * gi * (1.0 - rho * rho)) / (gj * sj).powi(2);
    let cij = 2.0 * ki * rho * (-gi * (1.0 - k1k2) + kj * gj * (1.0 - k1k2 * rho * rho)) / (si * sj * gj);
    let own_retention_var = gi * gi * si * si * (1.0 + (k1k2 * rho).powi(2) - 2.0 * k1k2 * rho * rho);

    match case {
        CaseId::Case1 => {
            form.quad = gi * gi * (si * si + ki * ki * sj * sj - 2.0 * si * ki * sj * rho);
        }
        CaseId::Case2 | CaseId::Case3 | CaseId::Case4 | CaseId::Case5 | CaseId::Case6 | CaseId::Case7 => {
            let retainer = case.full_retainer().expect("boundary case");
            let interior = matches!(case, CaseId::Case4 | CaseId::Case7);
            let pb = case_premium(case, 0.0, cfg);
            if retainer == i {
                // Insurer i keeps all claims; j reinsures.
                form.quad = own_retention_var;
                if interior {
                    let eff = sj - kj * rho * si;
                    let bracket = -gj * sj + kj * rho * gj * si + k1k2 * rho * gi * si - rho * si * gi;
                    form.integrand = Some(Box::new(move |s| {
                        let ke = eval_case_constants(s, cfg);
                        let pm = ke.phi_f * ke.m_f(j);
                        -ki * gi * eff * bracket * ke.phi_f * pm
                            - 0.5 * ki * gi * (2.0 * gj + ki * gi) * eff * eff * pm * pm
                    }));
                } else {
                    form.lin = gi
                        * (ki
                            * (pb - aj)
                            * (-1.0 + kj * rho * si / sj + k1k2 * rho * gi * si / (gj * sj)
                                - rho * si * gi / (gj * sj))
                            - loading);
                    form.tau = ki * gi / (gj * sj * sj) * (1.0 + ki * gi / (2.0 * gj)) * (pb - aj).powi(2);
                }
            } else {
                // Insurer i reinsures against the other's full retention; here i plays "j".
                let (r_s, r_k) = (cfg.sigma_c(j), cfg.k(i));
                form.quad = (r_k * gi * r_s).powi(2) * (1.0 - rho * rho);
                if interior {
                    let eff = si - ki * rho * sj;
                    form.integrand = Some(Box::new(move |s| {
                        let ke = eval_case_constants(s, cfg);
                        let gf = gi * ke.phi_f;
                        let gl = cfg.gamma_l() * ke.phi_l;
                        -(gi * eff).powi(2) * ke.phi_f * ke.phi_f * ke.m_f(i) * (3.0 * gf + gl)
                            / (2.0 * (2.0 * gf + gl))
                    }));
                } else {
                    form.lin = gi * ((1.0 - ki * rho * sj / si) * (pb - ai) - loading);
                    form.tau = -(pb - ai).powi(2) / (2.0 * si * si);
                }
            }
        }
        CaseId::Case8 | CaseId::Case9 => {
            let p = case_premium(case, 0.0, cfg);
            form.lin = gi * (p - ai - ki * (p - aj) - loading);
            form.tau =
                0.5 * big_k * big_k * (-cii * (p - ai).powi(2) + cjj * (p - aj).powi(2) + cij * (p - ai) * (p - aj));
        }
        CaseId::Case10 => {
            form.integrand = Some(Box::new(move |s| {
                let ke = eval_case_constants(s, cfg);
                let p = ke.premium_fraction();
                -gi * ke.phi_f * (p - ai)
                    + ki * gi * ke.phi_f * (p - aj)
                    + 0.5
                        * big_k
                        * big_k
                        * (cii * (p - ai).powi(2) - cjj * (p - aj).powi(2) - cij * (p - ai) * (p - aj))
            }));
        }
    }
    form
}
