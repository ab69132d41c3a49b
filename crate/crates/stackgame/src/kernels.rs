//! Time-dependent kernels and case constants.
//!
//! Everything here is a closed-form function of `t` and the scenario. The case
//! classifier needs nearly all of them at once, so [`eval_case_constants`]
//! computes one [`KernelEval`] bundle per time.

use crate::params::{CheckedScenario, FinancialMarket, Insurer};

/// exp{kappa (T - t)} with kappa = A + eta.
pub fn eval_phi(t: f64, kappa: f64, horizon: f64) -> f64 {
    (kappa * (horizon - t)).exp()
}

/// Asset kernel g1 multiplying s^{-2 beta} in the value-function exponent.
///
/// beta = 0 uses the analytic limit -(1/2)((r - r0)/sigma)^2 (T - t).
pub fn eval_g1(t: f64, market: &FinancialMarket) -> f64 {
    let tau = market.horizon - t;
    let sharpe2 = ((market.r - market.r0) / market.sigma).powi(2);
    if market.beta == 0.0 {
        return -0.5 * sharpe2 * tau;
    }
    let x = 2.0 * market.beta * market.r0;
    // 1 - e^{-x tau} = -expm1(-x tau)
    sharpe2 * (-x * tau).exp_m1() / (2.0 * x)
}

/// (x + e^{-x} - 1) / x, accurate near x = 0.
fn excess_ratio(x: f64) -> f64 {
    if x.abs() < 1e-2 {
        // x/2 - x^2/6 + x^3/24 - x^4/120 + x^5/720
        x * (0.5 - x * (1.0 / 6.0 - x * (1.0 / 24.0 - x * (1.0 / 120.0 - x / 720.0))))
    } else {
        (x + (-x).exp_m1()) / x
    }
}

/// The accumulator g(t) = integral_t^T beta(2 beta + 1) sigma^2 g1(s) ds.
pub fn eval_g_plain(t: f64, market: &FinancialMarket) -> f64 {
    if market.beta == 0.0 {
        return 0.0;
    }
    let tau = market.horizon - t;
    let x = 2.0 * market.beta * market.r0 * tau;
    -(2.0 * market.beta + 1.0) * (market.r - market.r0).powi(2) / (4.0 * market.r0) * tau * excess_ratio(x)
}

/// All kernels and case constants at one time.
///
/// Fields ending in 1/2 belong to insurer 1/2; "bar" marks the c_bar threshold and
/// plain `n_c` the c_F threshold.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelEval {
    pub t: f64,
    pub phi_l: f64,
    pub phi_f: f64,
    pub g1: f64,
    pub g_plain: f64,
    pub k: f64,
    pub k_bar_f1: f64,
    pub k_bar_f2: f64,
    pub k_f1: f64,
    pub k_f2: f64,
    pub n_c1: f64,
    pub n_c2: f64,
    pub n_cbar1: f64,
    pub n_cbar2: f64,
    pub n_a1: f64,
    pub n_a2: f64,
    pub m_f1: f64,
    pub m_f2: f64,
    pub d_f1: f64,
    pub d_f2: f64,
    pub d_bar_f1: f64,
    pub d_bar_f2: f64,
    pub d_f12: f64,
    pub p_n: f64,
    pub p_d: f64,
}

impl KernelEval {
    pub fn n_c(&self, i: Insurer) -> f64 {
        match i {
            Insurer::One => self.n_c1,
            Insurer::Two => self.n_c2,
        }
    }

    pub fn n_cbar(&self, i: Insurer) -> f64 {
        match i {
            Insurer::One => self.n_cbar1,
            Insurer::Two => self.n_cbar2,
        }
    }

    pub fn n_a(&self, i: Insurer) -> f64 {
        match i {
            Insurer::One => self.n_a1,
            Insurer::Two => self.n_a2,
        }
    }

    pub fn m_f(&self, i: Insurer) -> f64 {
        match i {
            Insurer::One => self.m_f1,
            Insurer::Two => self.m_f2,
        }
    }

    pub fn k_bar_f(&self, i: Insurer) -> f64 {
        match i {
            Insurer::One => self.k_bar_f1,
            Insurer::Two => self.k_bar_f2,
        }
    }

    pub fn d_f(&self, i: Insurer) -> f64 {
        match i {
            Insurer::One => self.d_f1,
            Insurer::Two => self.d_f2,
        }
    }

    pub fn d_bar_f(&self, i: Insurer) -> f64 {
        match i {
            Insurer::One => self.d_bar_f1,
            Insurer::Two => self.d_bar_f2,
        }
    }

    /// P_N / P_D; callers check `p_d > 0` first.
    pub fn premium_fraction(&self) -> f64 {
        self.p_n / self.p_d
    }
}

/// Evaluate every kernel and case constant at time t.
pub fn eval_case_constants(t: f64, cfg: &CheckedScenario) -> KernelEval {
    use Insurer::{One, Two};
    let market = cfg.market();
    let horizon = cfg.horizon();
    let phi_l = eval_phi(t, cfg.kappa_l(), horizon);
    let phi_f = eval_phi(t, cfg.kappa_f(), horizon);
    let rho = cfg.rho();
    let k = cfg.big_k();
    let gl = cfg.gamma_l() * phi_l;
    let (c_f, c_bar) = (cfg.c_f(), cfg.c_bar());

    let gam = |i: Insurer| cfg.gamma(i);
    let sig = |i: Insurer| cfg.sigma_c(i);
    let kk = |i: Insurer| cfg.k(i);

    let k_bar = |i: Insurer| {
        let j = i.other();
        (gam(j) * sig(j).powi(2) / (gam(i) * sig(i).powi(2)) + kk(i) * rho * sig(j) / sig(i))
            * (1.0 - kk(j) * rho * sig(i) / sig(j))
    };
    let k_f = |i: Insurer| {
        let j = i.other();
        (1.0 + kk(i) * rho * gam(i) * sig(i) / (gam(j) * sig(j))) * (1.0 - kk(i) * rho * sig(j) / sig(i))
    };
    let denom = |i: Insurer| gam(i) * sig(i).powi(2) * phi_f;
    let m_f = |i: Insurer| {
        let gf = gam(i) * phi_f;
        (gf + gl) / (2.0 * gf + gl)
    };
    let d_f = |i: Insurer| {
        let j = i.other();
        gam(i) * phi_f / k + gl * (1.0 + kk(j) * rho * rho + sig(j) * rho / sig(i) * (1.0 + kk(j)))
    };
    let d_bar_f = |i: Insurer| {
        let j = i.other();
        1.0 + k * (1.0 + (kk(j) * rho).powi(2) + 2.0 * kk(j) * rho * rho) * gl / (2.0 * gam(i) * phi_f)
    };
    let d_f12 = kk(One) * gam(One) * phi_f
        + kk(Two) * gam(Two) * phi_f
        + k * (1.0 + kk(One) + kk(Two) + kk(One) * kk(Two) * rho * rho) * gl;

    let (a1, a2) = (cfg.a(One), cfg.a(Two));
    let (s1, s2) = (sig(One), sig(Two));
    let (d_f1, d_f2) = (d_f(One), d_f(Two));
    let (d_bar_f1, d_bar_f2) = (d_bar_f(One), d_bar_f(Two));
    let g1f = gam(One) * phi_f;
    let g2f = gam(Two) * phi_f;
    let p_n = (s1 * s2).powi(2) * (g2f * d_f1 + g1f * d_f2)
        + 2.0 * a1 * s2 * s2 * g2f * d_bar_f1
        + 2.0 * a2 * s1 * s1 * g1f * d_bar_f2
        + (a1 + a2) * rho * s1 * s2 * d_f12;
    let p_d = 2.0 * s2 * s2 * g2f * d_bar_f1 + 2.0 * s1 * s1 * g1f * d_bar_f2 + 2.0 * rho * s1 * s2 * d_f12;

    KernelEval {
        t,
        phi_l,
        phi_f,
        g1: eval_g1(t, market),
        g_plain: eval_g_plain(t, market),
        k,
        k_bar_f1: k_bar(One),
        k_bar_f2: k_bar(Two),
        k_f1: k_f(One),
        k_f2: k_f(Two),
        n_c1: (c_f - a1) / denom(One),
        n_c2: (c_f - a2) / denom(Two),
        n_cbar1: (c_bar - a1) / denom(One),
        n_cbar2: (c_bar - a2) / denom(Two),
        n_a1: (a2 - a1) / denom(One),
        n_a2: (a1 - a2) / denom(Two),
        m_f1: m_f(One),
        m_f2: m_f(Two),
        d_f1,
        d_f2,
        d_bar_f1,
        d_bar_f2,
        d_f12,
        p_n,
        p_d,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::{validate, ScenarioConfig};

    #[test]
    fn phi_boundaries() {
        assert_eq!(eval_phi(10.0, 0.3, 10.0), 1.0);
        assert_eq!(eval_phi(3.0, 0.0, 10.0), 1.0);
        let v = eval_phi(0.0, 0.05391050280135989, 10.0);
        assert!((v - 1.714_47).abs() < 1e-5, "{v}");
    }

    #[test]
    fn g1_default_and_limits() {
        let m = ScenarioConfig::paper_default().market;
        assert_eq!(eval_g1(m.horizon, &m), 0.0);
        let v = eval_g1(0.0, &m);
        // -(1/(4*0.05)) * 0.015625 * (1 - e^{-1})
        let expect = -(1.0 / 0.2) * 0.015625 * (1.0 - (-1.0f64).exp());
        assert!((v - expect).abs() < 1e-15);
        assert!((v + 0.04938).abs() < 1e-5);
        let gbm = FinancialMarket { beta: 0.0, ..m };
        assert!((eval_g1(4.0, &gbm) + 0.5 * 0.015625 * 6.0).abs() < 1e-15);
        let tiny = FinancialMarket { beta: 1e-9, ..m };
        assert!((eval_g1(4.0, &tiny) - eval_g1(4.0, &gbm)).abs() < 1e-9);
    }

    #[test]
    fn g_plain_limits() {
        let m = ScenarioConfig::paper_default().market;
        assert_eq!(eval_g_plain(m.horizon, &m), 0.0);
        let gbm = FinancialMarket { beta: 0.0, ..m };
        assert_eq!(eval_g_plain(0.0, &gbm), 0.0);
        let small = FinancialMarket { beta: 1e-7, ..m };
        assert!(eval_g_plain(0.0, &small).abs() < 1e-8);
        // Series and direct branches agree where they meet.
        let x: f64 = 1e-2;
        let direct = (x + (-x).exp_m1()) / x;
        assert!((excess_ratio(x * (1.0 - 1e-12)) - direct).abs() < 1e-13);
    }

    #[test]
    fn terminal_constants() {
        let cfg = validate(&ScenarioConfig::paper_default()).unwrap();
        let ke = eval_case_constants(cfg.horizon(), &cfg);
        assert_eq!(ke.phi_l, 1.0);
        assert_eq!(ke.phi_f, 1.0);
        let p = cfg.prefs();
        assert!((ke.m_f1 - (p.gamma1 + p.gamma_l) / (2.0 * p.gamma1 + p.gamma_l)).abs() < 1e-15);
        assert!((ke.m_f2 - (p.gamma2 + p.gamma_l) / (2.0 * p.gamma2 + p.gamma_l)).abs() < 1e-15);
    }

    #[test]
    fn competition_free_constants() {
        let mut c = ScenarioConfig::paper_default();
        c.prefs.k1 = 0.0;
        c.prefs.k2 = 0.0;
        let cfg = validate(&c).unwrap();
        let ke = eval_case_constants(2.0, &cfg);
        assert_eq!(ke.k, 1.0);
        assert!((ke.d_f12 - c.prefs.gamma_l * ke.phi_l).abs() < 1e-15);
        assert_eq!(ke.k_f1, 1.0);
    }

    #[test]
    fn default_premium_fraction_at_9() {
        let cfg = validate(&ScenarioConfig::paper_default()).unwrap();
        let ke = eval_case_constants(9.0, &cfg);
        assert!(ke.p_d > 0.0);
        assert!(
            (ke.premium_fraction() - 11.030).abs() < 5e-4,
            "{}",
            ke.premium_fraction()
        );
    }
}
