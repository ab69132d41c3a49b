//! Brute-force and ODE oracles for the closed forms.
//!
//! Nothing here uses the case classifier's formulas: best responses come from
//! grid scans of the generator maximand, the Nash point from projected
//! iteration, the premium from a grid scan of the reinsurer's pointwise
//! objective, and the kernels and g2 accumulators from backward ODE integration.

use crate::equilibrium::{premium_and_retention, CheckedSingle};
use crate::error::{Error, Result};
use crate::kernels::{eval_g1, eval_g_plain, eval_phi};
use crate::numerics::{dopri45, OdeTolerance};
use crate::params::{CheckedScenario, Insurer};

/// Grid resolution for the brute-force searches.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    pub q_step: f64,
    /// Premium step as a fraction of the band width c_bar - c_F.
    pub p_step_fraction: f64,
    /// The investment grid spans +-`b_span` times the closed-form amount.
    pub b_span: f64,
    pub b_points: usize,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec {
            q_step: 1e-3,
            p_step_fraction: 1e-3,
            b_span: 5.0,
            b_points: 1000,
        }
    }
}

impl GridSpec {
    fn q_grid(&self) -> impl Iterator<Item = f64> + '_ {
        let n = (1.0 / self.q_step).round() as usize;
        (0..=n).map(move |k| (k as f64 * self.q_step).min(1.0))
    }
}

/// First maximiser over a grid (ties resolve to the earliest point).
fn grid_argmax(points: impl Iterator<Item = f64>, f: impl Fn(f64) -> f64) -> f64 {
    let mut best = (f64::NAN, f64::NEG_INFINITY);
    for x in points {
        let v = f(x);
        if v > best.1 {
            best = (x, v);
        }
    }
    best.0
}

/// Unconstrained retention n_i + c_i q_j before projection.
fn raw_response(t: f64, p: f64, q_other: f64, i: Insurer, cfg: &CheckedScenario) -> f64 {
    let j = i.other();
    let phi = eval_phi(t, cfg.kappa_f(), cfg.horizon());
    (p - cfg.a(i)) / (cfg.gamma(i) * cfg.sigma_c(i).powi(2) * phi)
        + cfg.k(i) * cfg.rho() * cfg.sigma_c(j) * q_other / cfg.sigma_c(i)
}

/// Grid argmax of insurer i's generator over (q_i, b_i) given the premium, the
/// other insurer's retention and the other insurer's closed-form investment.
///
/// The maximand is the strategy-dependent part of the generator divided by |V|;
/// it separates into a q_i part and a b_i part, each scanned on its own grid.
pub fn brute_force_insurer_response(
    t: f64,
    s: f64,
    p: f64,
    q_other: f64,
    i: Insurer,
    cfg: &CheckedScenario,
    grid: &GridSpec,
) -> (f64, f64) {
    let j = i.other();
    let m = cfg.market();
    let phi = eval_phi(t, cfg.kappa_f(), cfg.horizon());
    let u = cfg.gamma(i) * phi;
    let (si, sj, ki) = (cfg.sigma_c(i), cfg.sigma_c(j), cfg.k(i));
    let rho = cfg.rho();
    let q_obj = |q: f64| {
        -(p - cfg.a(i)) * (1.0 - q) * u - 0.5 * u * u * ((q * si).powi(2) - 2.0 * q * si * ki * q_other * sj * rho)
    };
    let q_best = grid_argmax(grid.q_grid(), q_obj);

    let inv = crate::equilibrium::investment_strategies(t, s, cfg);
    let b_j = inv.b(j);
    let g1 = eval_g1(t, m);
    let sig2 = m.sigma * m.sigma;
    let b_obj = |b: f64| {
        let e = b - ki * b_j;
        u * (m.r - m.r0) * e - 0.5 * u * u * e * e * sig2 * s.powf(2.0 * m.beta) - 2.0 * m.beta * u * g1 * e * sig2
    };
    let half = grid.b_span * inv.b(i).abs().max(1e-12);
    let n = grid.b_points.max(2);
    let step = 2.0 * half / (n - 1) as f64;
    let b_best = grid_argmax((0..n).map(|k| -half + step * k as f64), b_obj);
    (q_best, b_best)
}

/// Result of the followers' fixed-point iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct NashIteration {
    pub q1: f64,
    pub q2: f64,
    pub iterations: usize,
    /// |change in q2| after each sweep.
    pub changes: Vec<f64>,
}

pub const NASH_TOL: f64 = 1e-12;
pub const NASH_MAX_ITER: usize = 10_000;

/// Gauss-Seidel iteration of the projected best responses at premium p.
pub fn nash_iterate(t: f64, p: f64, cfg: &CheckedScenario) -> Result<NashIteration> {
    let proj = |x: f64| x.clamp(0.0, 1.0);
    let (mut q1, mut q2) = (1.0, 1.0);
    let mut changes = Vec::new();
    for it in 1..=NASH_MAX_ITER {
        let n1 = proj(raw_response(t, p, q2, Insurer::One, cfg));
        let n2 = proj(raw_response(t, p, n1, Insurer::Two, cfg));
        let change = (n1 - q1).abs().max((n2 - q2).abs());
        changes.push((n2 - q2).abs());
        q1 = n1;
        q2 = n2;
        if change < NASH_TOL {
            return Ok(NashIteration {
                q1,
                q2,
                iterations: it,
                changes,
            });
        }
    }
    Err(Error::NoConvergence {
        iterations: NASH_MAX_ITER,
        last_step: changes.last().copied().unwrap_or(f64::NAN),
    })
}

/// The followers' Nash retentions at premium p.
pub fn nash_fixed_point(t: f64, p: f64, cfg: &CheckedScenario) -> Result<(f64, f64)> {
    nash_iterate(t, p, cfg).map(|n| (n.q1, n.q2))
}

/// Reinsurer's pointwise objective at premium p given the followers' retentions.
pub fn leader_objective(t: f64, p: f64, q1: f64, q2: f64, cfg: &CheckedScenario) -> f64 {
    use Insurer::{One, Two};
    let u = cfg.gamma_l() * eval_phi(t, cfg.kappa_l(), cfg.horizon());
    let (s1, s2) = (cfg.sigma_c(One), cfg.sigma_c(Two));
    let (c1, c2) = (1.0 - q1, 1.0 - q2);
    u * ((p - cfg.a(One)) * c1 + (p - cfg.a(Two)) * c2)
        - 0.5 * u * u * (c1 * c1 * s1 * s1 + c2 * c2 * s2 * s2 + 2.0 * c1 * c2 * s1 * s2 * cfg.rho())
}

/// Premium grid over [c_F, c_bar].
pub fn premium_grid(c_f: f64, c_bar: f64, grid: &GridSpec) -> Vec<f64> {
    let n = (1.0 / grid.p_step_fraction).round() as usize;
    (0..=n)
        .map(|k| {
            if k == n {
                c_bar
            } else {
                c_f + (c_bar - c_f) * k as f64 / n as f64
            }
        })
        .collect()
}

/// Grid argmax of the reinsurer's objective, the followers answering each p with their Nash point.
pub fn brute_force_premium(t: f64, cfg: &CheckedScenario, grid: &GridSpec) -> Result<f64> {
    let mut best = (f64::NAN, f64::NEG_INFINITY);
    for p in premium_grid(cfg.c_f(), cfg.c_bar(), grid) {
        let (q1, q2) = nash_fixed_point(t, p, cfg)?;
        let v = leader_objective(t, p, q1, q2, cfg);
        if v > best.1 {
            best = (p, v);
        }
    }
    Ok(best.0)
}

/// Grid argmax of the reinsurer's objective with a single insurer.
pub fn brute_force_single_premium(t: f64, cfg: &CheckedSingle, grid: &GridSpec) -> f64 {
    let sc = cfg.scenario();
    let h = sc.market.horizon;
    let ul = sc.gamma_l * eval_phi(t, cfg.kappa_l(), h);
    let unit = sc.gamma1 * sc.sigma1 * sc.sigma1 * eval_phi(t, cfg.kappa_1(), h);
    let obj = |p: f64| {
        let q = ((p - sc.a1) / unit).clamp(0.0, 1.0);
        let c = 1.0 - q;
        ul * (p - sc.a1) * c - 0.5 * ul * ul * c * c * sc.sigma1 * sc.sigma1
    };
    grid_argmax(premium_grid(cfg.c_f(), cfg.c_bar(), grid).into_iter(), obj)
}

/// Maximum absolute deviations between closed-form kernels and their ODE solutions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelOdeReport {
    pub phi_l: f64,
    pub phi_f: f64,
    pub g1: f64,
    pub g_plain: f64,
    pub points: usize,
}

impl KernelOdeReport {
    pub fn max(&self) -> f64 {
        self.phi_l.max(self.phi_f).max(self.g1).max(self.g_plain)
    }
}

/// Integrate the kernel ODEs backward from T and compare with the closed forms at
/// `n_points` equally spaced times in [0, T].
pub fn ode_check_kernels(cfg: &CheckedScenario, n_points: usize) -> Result<KernelOdeReport> {
    let m = *cfg.market();
    let horizon = cfg.horizon();
    let (kl, kf) = (cfg.kappa_l(), cfg.kappa_f());
    let sharpe2 = ((m.r - m.r0) / m.sigma).powi(2);
    let rhs = |_t: f64, y: &[f64], dy: &mut [f64]| {
        dy[0] = -kl * y[0];
        dy[1] = -kf * y[1];
        dy[2] = 2.0 * m.beta * m.r0 * y[2] + 0.5 * sharpe2;
        dy[3] = -m.beta * (2.0 * m.beta + 1.0) * m.sigma * m.sigma * y[2];
    };
    let tol = OdeTolerance::default();
    let mut state = vec![1.0, 1.0, 0.0, 0.0];
    let mut t = horizon;
    let mut rep = KernelOdeReport {
        phi_l: 0.0,
        phi_f: 0.0,
        g1: 0.0,
        g_plain: 0.0,
        points: n_points,
    };
    let n = n_points.max(2);
    for k in (0..n).rev() {
        let target = horizon * k as f64 / (n - 1) as f64;
        state = dopri45(rhs, t, &state, target, tol)?;
        t = target;
        rep.phi_l = rep.phi_l.max((state[0] - eval_phi(t, kl, horizon)).abs());
        rep.phi_f = rep.phi_f.max((state[1] - eval_phi(t, kf, horizon)).abs());
        rep.g1 = rep.g1.max((state[2] - eval_g1(t, &m)).abs());
        rep.g_plain = rep.g_plain.max((state[3] - eval_g_plain(t, &m)).abs());
    }
    Ok(rep)
}

/// The g2 accumulators at time t by backward integration of the generator ODEs,
/// reclassifying the equilibrium at every evaluation.
///
/// dg2/dt = -beta(2 beta + 1) sigma^2 g1 + u drift - (1/2) u^2 var for each agent,
/// with u = gamma phi and drift/var the claim terms of its wealth equation.
pub fn ode_g2(t: f64, cfg: &CheckedScenario, tol: OdeTolerance) -> Result<[f64; 3]> {
    use Insurer::{One, Two};
    let m = *cfg.market();
    let horizon = cfg.horizon();
    let failure = std::cell::Cell::new(None);
    let rhs = |s: f64, _y: &[f64], dy: &mut [f64]| {
        let pr = match premium_and_retention(s, cfg) {
            Ok(pr) => pr,
            Err(e) => {
                failure.set(Some(e));
                dy.fill(0.0);
                return;
            }
        };
        let base = -m.beta * (2.0 * m.beta + 1.0) * m.sigma * m.sigma * eval_g1(s, &m);
        let (p, q1, q2) = (pr.p, pr.q1, pr.q2);
        let (s1, s2, rho) = (cfg.sigma_c(One), cfg.sigma_c(Two), cfg.rho());
        let ul = cfg.gamma_l() * eval_phi(s, cfg.kappa_l(), horizon);
        let (c1, c2) = (1.0 - q1, 1.0 - q2);
        let drift_l = (p - cfg.a(One)) * c1 + (p - cfg.a(Two)) * c2;
        let var_l = c1 * c1 * s1 * s1 + c2 * c2 * s2 * s2 + 2.0 * c1 * c2 * s1 * s2 * rho;
        dy[0] = base + ul * drift_l - 0.5 * ul * ul * var_l;
        let phi_f = eval_phi(s, cfg.kappa_f(), horizon);
        for (slot, i) in [(1, One), (2, Two)] {
            let j = i.other();
            let (qi, qj) = (pr.q(i), pr.q(j));
            let ki = cfg.k(i);
            let u = cfg.gamma(i) * phi_f;
            let drift = cfg.theta(i) * cfg.a(i) - ki * cfg.theta(j) * cfg.a(j) - (p - cfg.a(i)) * (1.0 - qi)
                + ki * (p - cfg.a(j)) * (1.0 - qj);
            let (si, sj) = (cfg.sigma_c(i), cfg.sigma_c(j));
            let var = (qi * si).powi(2) + (ki * qj * sj).powi(2) - 2.0 * qi * si * ki * qj * sj * rho;
            dy[slot] = base + u * drift - 0.5 * u * u * var;
        }
    };
    let y = dopri45(rhs, horizon, &[0.0; 3], t, tol)?;
    if let Some(e) = failure.take() {
        return Err(e);
    }
    Ok([y[0], y[1], y[2]])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::equilibrium::{best_response_retention, SingleInsurerScenario};
    use crate::params::{validate, ScenarioConfig};
    use crate::value::g2_eval;

    fn default_cfg() -> CheckedScenario {
        validate(&ScenarioConfig::paper_default()).unwrap()
    }

    #[test]
    fn table_point_best_response() {
        let cfg = default_cfg();
        let (q, _) = brute_force_insurer_response(9.0, 1.0, 11.030, 0.612, Insurer::One, &cfg, &GridSpec::default());
        assert!((q - 0.419).abs() <= 1e-3 + 1e-9, "{q}");
    }

    #[test]
    fn decoupled_vertex() {
        let mut c = ScenarioConfig::paper_default();
        c.prefs.k1 = 0.0;
        c.prefs.k2 = 0.0;
        let cfg = validate(&c).unwrap();
        let t = 4.0;
        let p = 10.0;
        let (q, b) = brute_force_insurer_response(t, 1.2, p, 0.5, Insurer::Two, &cfg, &GridSpec::default());
        let vertex = best_response_retention(t, p, 0.5, Insurer::Two, &cfg);
        assert!((q - vertex).abs() <= 1e-3);
        let inv = crate::equilibrium::investment_strategies(t, 1.2, &cfg);
        assert!((b - inv.b2).abs() <= 10.0 * inv.b2.abs() / 999.0);
        let n = nash_iterate(t, p, &cfg).unwrap();
        assert!(n.iterations <= 2);
    }

    #[test]
    fn low_premium_keeps_retention_nonnegative() {
        let cfg = default_cfg();
        let (q, _) = brute_force_insurer_response(0.0, 1.0, cfg.c_f(), 0.0, Insurer::One, &cfg, &GridSpec::default());
        assert!((0.0..=1.0).contains(&q));
    }

    #[test]
    fn nash_matches_table() {
        let cfg = default_cfg();
        let pr = premium_and_retention(9.0, &cfg).unwrap();
        let (q1, q2) = nash_fixed_point(9.0, pr.p, &cfg).unwrap();
        assert!((q1 - pr.q1).abs() < 1e-10 && (q2 - pr.q2).abs() < 1e-10);
    }

    #[test]
    fn premium_grid_search_matches_table() {
        let cfg = default_cfg();
        let g = GridSpec::default();
        let step = g.p_step_fraction * (cfg.c_bar() - cfg.c_f());
        assert_eq!(brute_force_premium(3.0, &cfg, &g).unwrap(), cfg.c_bar());
        let p = brute_force_premium(9.0, &cfg, &g).unwrap();
        assert!((p - 11.030).abs() <= step + 5e-4, "{p}");
    }

    #[test]
    fn single_premium_grid_matches_interior_formula() {
        let mut sc = SingleInsurerScenario::from_scenario(&ScenarioConfig::paper_default(), Insurer::One);
        sc.gamma1 = 0.5;
        sc.theta1 = 0.5;
        let cfg = sc.check().unwrap();
        let g = GridSpec::default();
        let pt = crate::equilibrium::single_insurer_strategy(4.0, 1.0, &cfg).unwrap();
        let p = brute_force_single_premium(4.0, &cfg, &g);
        assert!((p - pt.p).abs() <= g.p_step_fraction * (cfg.c_bar() - cfg.c_f()));
    }

    #[test]
    fn kernels_match_odes() {
        let rep = ode_check_kernels(&default_cfg(), 100).unwrap();
        assert!(rep.max() < 1e-9, "{rep:?}");
        let mut c = ScenarioConfig::paper_default();
        c.market.beta = 0.0;
        let rep = ode_check_kernels(&validate(&c).unwrap(), 100).unwrap();
        assert!(rep.g1 < 1e-12, "{rep:?}");
    }

    #[test]
    fn g2_ode_matches_closed_form_at_9_and_0() {
        let cfg = default_cfg();
        for t in [9.0, 0.0] {
            let ode = ode_g2(t, &cfg, OdeTolerance::default()).unwrap();
            let cf = g2_eval(t, &cfg).unwrap();
            for (a, b) in ode.iter().zip([cf.g2_l, cf.g2_f1, cf.g2_f2]) {
                assert!((a - b).abs() < 1e-8, "t={t}: {a} vs {b}");
            }
        }
    }
}
