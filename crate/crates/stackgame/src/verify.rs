//! Verification suites run by the `verify` command and the acceptance tests.
//!
//! Each suite returns a list of named checks. A failed computation becomes a
//! failed check carrying the error message, so a report is always produced.

use std::fmt;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::equilibrium::{
    classify_case, equilibrium_point, investment_strategies, no_delay_strategy, premium_and_retention,
    single_insurer_strategy, CaseId, SingleCase, SingleInsurerPoint, SingleInsurerScenario,
};
use crate::kernels::eval_phi;
use crate::numerics::OdeTolerance;
use crate::oracle::{
    brute_force_insurer_response, brute_force_premium, nash_fixed_point, ode_check_kernels, ode_g2, GridSpec,
};
use crate::params::{
    derive_eta2, validate, CheckedScenario, ClaimModel, DelaySpec, FinancialMarket, Insurer, Preferences,
    ScenarioConfig,
};
use crate::value::{g2_eval, hjb_residual_f, hjb_residual_l, FollowerState, LeaderState};
use crate::Result;

/// Seed used when none is given.
pub const DEFAULT_SEED: u64 = 20_240_917;

/// Published equilibrium with memory on the default scenario at t = 0, 1, ..., 10.
pub const REFERENCE_DELAY: [[f64; 3]; 11] = [
    [12.0, 0.294, 0.429],
    [12.0, 0.310, 0.452],
    [12.0, 0.327, 0.477],
    [12.0, 0.345, 0.504],
    [12.0, 0.364, 0.532],
    [12.0, 0.384, 0.561],
    [12.0, 0.406, 0.592],
    [11.831, 0.419, 0.612],
    [11.419, 0.419, 0.612],
    [11.030, 0.419, 0.612],
    [10.661, 0.419, 0.612],
];

/// Published equilibrium without memory, same times.
pub const REFERENCE_NO_DELAY: [[f64; 3]; 11] = [
    [12.0, 0.305, 0.446],
    [12.0, 0.321, 0.468],
    [12.0, 0.337, 0.492],
    [12.0, 0.355, 0.518],
    [12.0, 0.373, 0.544],
    [12.0, 0.392, 0.572],
    [12.0, 0.412, 0.601],
    [11.739, 0.419, 0.612],
    [11.361, 0.419, 0.612],
    [11.002, 0.419, 0.612],
    [10.661, 0.419, 0.612],
];

/// Tolerance of the published-table comparison after rounding to 3 decimals.
pub const REFERENCE_TOL: f64 = 0.001 + 1e-9;

/// Round to 3 decimals, the precision of the published table.
pub fn round3(x: f64) -> f64 {
    (x * 1000.0).round() / 1000.0
}

/// The available suites.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Suite {
    Table9,
    Timeline,
    Ode,
    Oracle,
    Hjb,
    Signs,
    VariancePremium,
}

impl Suite {
    pub const ALL: [Suite; 7] = [
        Suite::Table9,
        Suite::Timeline,
        Suite::Ode,
        Suite::Oracle,
        Suite::Hjb,
        Suite::Signs,
        Suite::VariancePremium,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Suite::Table9 => "table9",
            Suite::Timeline => "timeline",
            Suite::Ode => "ode",
            Suite::Oracle => "oracle",
            Suite::Hjb => "hjb",
            Suite::Signs => "signs",
            Suite::VariancePremium => "variance_premium",
        }
    }

    pub fn from_name(name: &str) -> Option<Suite> {
        Suite::ALL.into_iter().find(|s| s.name() == name)
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// One named pass/fail check.
#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    pub fn new(name: impl Into<String>, passed: bool, detail: impl Into<String>) -> Check {
        Check {
            name: name.into(),
            passed,
            detail: detail.into(),
        }
    }

    /// A check whose computation may fail; errors count as failures.
    fn from_result(name: impl Into<String>, r: Result<(bool, String)>) -> Check {
        match r {
            Ok((passed, detail)) => Check::new(name, passed, detail),
            Err(e) => Check::new(name, false, format!("error: {e}")),
        }
    }
}

/// Outcome of one suite.
#[derive(Debug, Clone)]
pub struct SuiteReport {
    pub suite: Suite,
    pub checks: Vec<Check>,
    pub elapsed: Duration,
}

impl SuiteReport {
    pub fn passed(&self) -> bool {
        !self.checks.is_empty() && self.checks.iter().all(|c| c.passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.passed)
    }
}

impl fmt::Display for SuiteReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let n_pass = self.checks.iter().filter(|c| c.passed).count();
        writeln!(
            f,
            "[{}] {}: {}/{} checks passed in {:.2}s",
            if self.passed() { "PASS" } else { "FAIL" },
            self.suite,
            n_pass,
            self.checks.len(),
            self.elapsed.as_secs_f64()
        )?;
        for c in &self.checks {
            writeln!(
                f,
                "  {} {}: {}",
                if c.passed { "ok  " } else { "FAIL" },
                c.name,
                c.detail
            )?;
        }
        Ok(())
    }
}

/// Run one suite against a scenario. Suites that need randomness draw from `seed`.
pub fn run_suite(suite: Suite, cfg: &CheckedScenario, seed: u64) -> SuiteReport {
    let start = Instant::now();
    let checks = match suite {
        Suite::Table9 => reference_table_suite(cfg),
        Suite::Timeline => timeline_suite(cfg),
        Suite::Ode => ode_suite(cfg),
        Suite::Oracle => oracle_suite(seed),
        Suite::Hjb => hjb_suite(cfg, seed),
        Suite::Signs => sign_suite(cfg),
        Suite::VariancePremium => variance_premium_suite(cfg, seed),
    };
    SuiteReport {
        suite,
        checks,
        elapsed: start.elapsed(),
    }
}

/// Draw a valid scenario with every parameter spread over a realistic range.
///
/// Insurer 2's eta is derived from insurer 1's delay; draws that fail
/// validation are discarded and redrawn.
pub fn random_scenario<R: Rng>(rng: &mut R) -> CheckedScenario {
    loop {
        let r0 = rng.random_range(0.02..0.08);
        let market = FinancialMarket {
            r0,
            r: r0 + rng.random_range(0.02..0.10),
            sigma: rng.random_range(0.2..0.5),
            beta: rng.random_range(0.0..1.5),
            s0: rng.random_range(0.5..2.0),
            horizon: rng.random_range(5.0..15.0),
        };
        let theta1 = rng.random_range(0.5..1.5);
        let theta2 = rng.random_range(0.5..1.5);
        let claims = ClaimModel {
            a1: rng.random_range(2.0..6.0),
            a2: rng.random_range(2.0..6.0),
            sigma1: rng.random_range(1.0..4.0),
            sigma2: rng.random_range(1.0..4.0),
            theta1,
            theta2,
            rho: rng.random_range(0.0..0.8),
            theta_bar: theta1.max(theta2) + rng.random_range(0.3..1.5),
        };
        let prefs = Preferences {
            gamma_l: rng.random_range(0.05..0.5),
            gamma1: rng.random_range(0.5..4.0),
            gamma2: rng.random_range(0.5..4.0),
            k1: rng.random_range(0.0..0.8),
            k2: rng.random_range(0.0..0.8),
        };
        let mut delay = || DelaySpec {
            h: rng.random_range(0.5..4.0),
            alpha: rng.random_range(0.1..0.8),
            eta: rng.random_range(0.01..0.2),
        };
        let delay_l = delay();
        let delay_1 = delay();
        let mut delay_2 = delay();
        let Ok(eta2) = derive_eta2(&delay_1, delay_2.h, delay_2.alpha, r0) else {
            continue;
        };
        delay_2.eta = eta2;
        let cfg = ScenarioConfig {
            market,
            claims,
            prefs,
            delay_l,
            delay_1,
            delay_2,
            x_l0: rng.random_range(10.0..30.0),
            x10: rng.random_range(5.0..15.0),
            x20: rng.random_range(5.0..15.0),
        };
        if let Ok(checked) = validate(&cfg) {
            return checked;
        }
    }
}

/// Seeded generator used by the suites.
pub fn suite_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Default scenario with claim loadings and risk aversions under which both
/// insurers keep all their claims at every premium in the band.
pub fn full_retention_scenario() -> ScenarioConfig {
    let mut c = ScenarioConfig::paper_default();
    c.claims.theta1 = 1.0;
    c.claims.theta2 = 1.0;
    c.claims.theta_bar = 2.0;
    c.prefs.gamma1 = 0.1;
    c.prefs.gamma2 = 0.1;
    c
}

/// Default scenario with low loadings, in which the reinsurer charges the
/// lowest premium c_F late in the horizon while both insurers reinsure.
pub fn floor_premium_scenario() -> ScenarioConfig {
    let mut c = ScenarioConfig::paper_default();
    c.claims.theta1 = 0.8;
    c.claims.theta2 = 0.8;
    c.claims.theta_bar = 1.3;
    c.prefs.gamma1 = 1.0;
    c.prefs.gamma2 = 1.0;
    c
}

/// Insurer 1 of `cfg` facing the reinsurer alone, with the risk aversion and
/// loading lowered so that the premium is interior.
pub fn single_interior_scenario(cfg: &ScenarioConfig) -> SingleInsurerScenario {
    let mut sc = SingleInsurerScenario::from_scenario(cfg, Insurer::One);
    sc.gamma1 = 0.5;
    sc.theta1 = 0.5;
    sc
}

fn reference_table_suite(cfg: &CheckedScenario) -> Vec<Check> {
    let s = cfg.market().s0;
    let mut checks = Vec::new();
    for (label, table, no_delay) in [
        ("delay", &REFERENCE_DELAY, false),
        ("nodelay", &REFERENCE_NO_DELAY, true),
    ] {
        for (n, row) in table.iter().enumerate() {
            let t = n as f64;
            let point = if no_delay {
                no_delay_strategy(t, s, cfg)
            } else {
                equilibrium_point(t, s, cfg)
            };
            let point = match point {
                Ok(p) => p,
                Err(e) => {
                    checks.push(Check::new(format!("{label} t={n}"), false, format!("error: {e}")));
                    continue;
                }
            };
            let got = [point.p_star, point.q1_star, point.q2_star];
            for ((name, want), v) in ["p", "q1", "q2"].into_iter().zip(row).zip(got) {
                let r = round3(v);
                checks.push(Check::new(
                    format!("{label} {name}({n})"),
                    (r - want).abs() <= REFERENCE_TOL,
                    format!("computed {v:.6} -> {r:.3}, published {want:.3}"),
                ));
            }
        }
    }
    checks
}

fn timeline_suite(cfg: &CheckedScenario) -> Vec<Check> {
    (0..=10)
        .map(|n| {
            let t = n as f64;
            let want = if n <= 6 { CaseId::Case8 } else { CaseId::Case10 };
            Check::from_result(
                format!("case at t={n}"),
                classify_case(t, cfg).map(|c| {
                    (
                        c.case == want && !c.boundary,
                        format!("classified {}, expected {want}, boundary={}", c.case, c.boundary),
                    )
                }),
            )
        })
        .collect()
}

/// Absolute tolerance for kernel ODE agreement.
pub const KERNEL_ODE_TOL: f64 = 1e-9;
/// Absolute tolerance for g2 ODE agreement.
pub const G2_ODE_TOL: f64 = 1e-8;

fn g2_ode_check(label: &str, t: f64, cfg: &CheckedScenario) -> (Check, Option<CaseId>) {
    let r = (|| -> Result<_> {
        let ode = ode_g2(t, cfg, OdeTolerance::default())?;
        let cf = g2_eval(t, cfg)?;
        let dev = ode
            .iter()
            .zip([cf.g2_l, cf.g2_f1, cf.g2_f2])
            .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        let cases: Vec<String> = cf.segments.iter().map(|s| s.case.to_string()).collect();
        Ok((dev, cf.case, cases.join(" -> ")))
    })();
    match r {
        Ok((dev, case, path)) => (
            Check::new(
                format!("g2 {label} t={t}"),
                dev < G2_ODE_TOL,
                format!("cases {path}, max |ODE - closed form| = {dev:.3e}"),
            ),
            Some(case),
        ),
        Err(e) => (
            Check::new(format!("g2 {label} t={t}"), false, format!("error: {e}")),
            None,
        ),
    }
}

fn ode_suite(cfg: &CheckedScenario) -> Vec<Check> {
    let mut checks = vec![Check::from_result(
        "kernels at 100 times",
        ode_check_kernels(cfg, 100).map(|r| {
            (
                r.max() < KERNEL_ODE_TOL,
                format!(
                    "max deviation phi_L {:.2e}, phi_F {:.2e}, g1 {:.2e}, g {:.2e}",
                    r.phi_l, r.phi_f, r.g1, r.g_plain
                ),
            )
        }),
    )];
    let mut seen = Vec::new();
    let h = cfg.horizon();
    let full = full_retention_scenario();
    let floor = floor_premium_scenario();
    let runs = [
        ("scenario", 0.0, *cfg.config()),
        ("scenario", 0.9 * h, *cfg.config()),
        ("full-retention", 0.0, full),
        ("full-retention", 5.0, full),
        ("floor-premium", 0.0, floor),
        ("floor-premium", 8.0, floor),
    ];
    for (label, t, c) in runs {
        match validate(&c) {
            Ok(c) => {
                let (check, case) = g2_ode_check(label, t, &c);
                checks.push(check);
                seen.extend(case);
            }
            Err(e) => checks.push(Check::new(format!("g2 {label}"), false, format!("error: {e}"))),
        }
    }
    for want in [CaseId::Case1, CaseId::Case8, CaseId::Case9, CaseId::Case10] {
        checks.push(Check::new(
            format!("{want} exercised"),
            seen.contains(&want),
            format!("cases in force at the check times: {seen:?}"),
        ));
    }
    checks
}

/// Number of random (scenario, t) draws in the oracle suite.
pub const ORACLE_DRAWS: usize = 25;

fn oracle_draw(n: usize, rng: &mut ChaCha8Rng, grid: &GridSpec) -> Check {
    let cfg = random_scenario(rng);
    let t = rng.random_range(0.0..cfg.horizon());
    let s = rng.random_range(0.5..2.0);
    let r = (|| -> Result<_> {
        let pr = premium_and_retention(t, &cfg)?;
        let p_step = grid.p_step_fraction * (cfg.c_bar() - cfg.c_f());
        let slack = 1.0 + 1e-9;
        let bf = brute_force_premium(t, &cfg, grid)?;
        let p_ok = pr.premium_nonunique || (bf - pr.p).abs() <= p_step * slack;
        let (n1, n2) = nash_fixed_point(t, pr.p, &cfg)?;
        let nash_dev = (n1 - pr.q1).abs().max((n2 - pr.q2).abs());
        let inv = investment_strategies(t, s, &cfg);
        let mut resp_q = 0.0f64;
        let mut resp_b_ok = true;
        for i in Insurer::BOTH {
            let (q, b) = brute_force_insurer_response(t, s, pr.p, pr.q(i.other()), i, &cfg, grid);
            resp_q = resp_q.max((q - pr.q(i)).abs());
            let b_step = 2.0 * grid.b_span * inv.b(i).abs() / (grid.b_points.max(2) - 1) as f64;
            resp_b_ok &= (b - inv.b(i)).abs() <= b_step * slack;
        }
        let q_tol = grid.q_step * slack;
        let passed = p_ok && nash_dev <= q_tol && resp_q <= q_tol && resp_b_ok;
        Ok((
            passed,
            format!(
                "{} t={t:.3}: p*={:.6} grid p={bf:.6}{}, |Nash - q*|={nash_dev:.2e}, |grid q - q*|={resp_q:.2e}, b within one step: {resp_b_ok}",
                pr.case,
                pr.p,
                if pr.premium_nonunique { " (premium not unique)" } else { "" }
            ),
        ))
    })();
    Check::from_result(format!("draw {n}"), r)
}

fn oracle_suite(seed: u64) -> Vec<Check> {
    let mut rng = suite_rng(seed);
    let grid = GridSpec::default();
    (0..ORACLE_DRAWS).map(|n| oracle_draw(n, &mut rng, &grid)).collect()
}

/// Random (t, state) draws and perturbations per agent in the HJB suite.
pub const HJB_DRAWS: usize = 10;
pub const HJB_PERTURBATIONS: usize = 100;
/// Bound on the equilibrium residual relative to the generator scale.
pub const HJB_TOL: f64 = 1e-6;

fn perturbed_amount<R: Rng>(rng: &mut R, b: f64) -> f64 {
    b + rng.random_range(-2.0..2.0) * b.abs().max(1.0)
}

fn hjb_draw<R: Rng>(n: usize, rng: &mut R, cfg: &CheckedScenario) -> Vec<Check> {
    let t = rng.random_range(0.0..cfg.horizon());
    let s0 = cfg.market().s0;
    let s = s0 * rng.random_range(0.5..2.0);
    let mut wealth = |x0: f64| x0 * rng.random_range(0.5..1.5);
    let c = cfg.config();
    let ls = LeaderState {
        x: wealth(c.x_l0),
        y: wealth(cfg.y0_l().max(1.0)),
        z: wealth(c.x_l0),
        s,
    };
    let fs = FollowerState {
        x: [wealth(c.x10), wealth(c.x20)],
        y: [
            wealth(cfg.y0(Insurer::One).max(1.0)),
            wealth(cfg.y0(Insurer::Two).max(1.0)),
        ],
        z: [wealth(c.x10), wealth(c.x20)],
        s,
    };
    let eq = match equilibrium_point(t, s, cfg) {
        Ok(eq) => eq,
        Err(e) => return vec![Check::new(format!("draw {n}"), false, format!("error: {e}"))],
    };
    let mut checks = Vec::new();
    let summarize = |label: String, at: crate::value::Residual, perturbed: &[Result<crate::value::Residual>]| {
        let mut worst_gap = f64::INFINITY;
        let mut bad = 0;
        for r in perturbed {
            match r {
                Ok(r) => {
                    let ok = r.value.abs() >= at.value.abs() && r.value <= at.value + 1e-12 * at.scale;
                    bad += usize::from(!ok);
                    worst_gap = worst_gap.min(r.value.abs() - at.value.abs());
                }
                Err(_) => bad += 1,
            }
        }
        let rel = at.relative();
        Check::new(
            label,
            rel.abs() < HJB_TOL && bad == 0,
            format!(
                "t={t:.3}: equilibrium residual {rel:.2e} of scale; {bad}/{} perturbations below it; smallest excess {worst_gap:.2e}",
                perturbed.len()
            ),
        )
    };
    let lead_at = hjb_residual_l(t, &ls, eq.p_star, eq.bl_star, cfg);
    match lead_at {
        Ok(at) => {
            let perturbed: Vec<_> = (0..HJB_PERTURBATIONS)
                .map(|_| {
                    let p = rng.random_range(cfg.c_f()..=cfg.c_bar());
                    let b = perturbed_amount(rng, eq.bl_star);
                    hjb_residual_l(t, &ls, p, b, cfg)
                })
                .collect();
            checks.push(summarize(format!("draw {n} reinsurer"), at, &perturbed));
        }
        Err(e) => checks.push(Check::new(format!("draw {n} reinsurer"), false, format!("error: {e}"))),
    }
    for i in Insurer::BOTH {
        let (q_eq, b_eq) = match i {
            Insurer::One => (eq.q1_star, eq.b1_star),
            Insurer::Two => (eq.q2_star, eq.b2_star),
        };
        let label = format!("draw {n} insurer {}", i.number());
        match hjb_residual_f(t, &fs, q_eq, b_eq, i, cfg) {
            Ok(at) => {
                let perturbed: Vec<_> = (0..HJB_PERTURBATIONS)
                    .map(|_| {
                        let q = rng.random_range(0.0..=1.0);
                        let b = perturbed_amount(rng, b_eq);
                        hjb_residual_f(t, &fs, q, b, i, cfg)
                    })
                    .collect();
                checks.push(summarize(label, at, &perturbed));
            }
            Err(e) => checks.push(Check::new(label, false, format!("error: {e}"))),
        }
    }
    checks
}

fn hjb_suite(cfg: &CheckedScenario, seed: u64) -> Vec<Check> {
    let mut rng = suite_rng(seed ^ 0x48_4a_42);
    (0..HJB_DRAWS).flat_map(|n| hjb_draw(n, &mut rng, cfg)).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Sign {
    Pos,
    Neg,
}

impl Sign {
    fn holds(self, d: f64) -> bool {
        match self {
            Sign::Pos => d > 0.0,
            Sign::Neg => d < 0.0,
        }
    }

    fn symbol(self) -> &'static str {
        match self {
            Sign::Pos => "> 0",
            Sign::Neg => "< 0",
        }
    }
}

/// Central difference with a step relative to the point.
fn central_difference(x: f64, f: impl Fn(f64) -> Result<f64>) -> Result<f64> {
    let h = 1e-5 * x.abs().max(1e-3);
    Ok((f(x + h)? - f(x - h)?) / (2.0 * h))
}

fn sign_check(name: String, want: Sign, d: Result<f64>) -> Check {
    Check::from_result(
        format!("{name} {}", want.symbol()),
        d.map(|d| (want.holds(d), format!("finite difference {d:.4e}"))),
    )
}

/// Investment amount of one agent under a modified scenario.
fn investment_of(c: &ScenarioConfig, t: f64, agent: Option<Insurer>) -> Result<f64> {
    let checked = validate(c)?;
    let inv = investment_strategies(t, checked.market().s0, &checked);
    Ok(match agent {
        None => inv.bl,
        Some(i) => inv.b(i),
    })
}

/// Threshold of alpha at which d kappa / d alpha changes sign: ln(h)/h.
pub fn alpha_threshold(h: f64) -> f64 {
    -(1.0 / h) * (1.0 / h).ln()
}

/// Threshold of h at which d kappa / d eta changes sign: -ln(1 - r0 - alpha)/alpha.
pub fn h_threshold(alpha: f64, r0: f64) -> f64 {
    -(1.0 / alpha) * (1.0 - r0 - alpha).ln()
}

/// Fixed memory used for the branch draws of the alpha and eta signs.
const BRANCH_H: f64 = 2.0;
const BRANCH_ALPHA: f64 = 0.5;
const BRANCH_ETA: f64 = 0.05;

/// (label, spec, expected sign of d b / d alpha) for both alpha branches.
fn alpha_branches() -> [(String, DelaySpec, Sign); 2] {
    let thr = alpha_threshold(BRANCH_H);
    [(0.5 * thr, Sign::Neg), (thr + 0.25, Sign::Pos)].map(|(alpha, sign)| {
        (
            format!(
                "alpha={alpha:.4} {} {thr:.4}",
                if sign == Sign::Pos { ">" } else { "<" }
            ),
            DelaySpec {
                h: BRANCH_H,
                alpha,
                eta: BRANCH_ETA,
            },
            sign,
        )
    })
}

/// (label, spec, expected sign of d b / d eta) for both h branches.
fn eta_branches(r0: f64) -> [(String, DelaySpec, Sign); 2] {
    let thr = h_threshold(BRANCH_ALPHA, r0);
    [(0.5 * thr, Sign::Pos), (thr + 1.0, Sign::Neg)].map(|(h, sign)| {
        (
            format!("h={h:.4} {} {thr:.4}", if sign == Sign::Pos { "<" } else { ">" }),
            DelaySpec {
                h,
                alpha: BRANCH_ALPHA,
                eta: BRANCH_ETA,
            },
            sign,
        )
    })
}

/// Give insurer i the memory `spec` and the other insurer the same h and alpha,
/// so the other insurer's derived eta stays admissible for any branch draw.
fn matched_insurers(base: &ScenarioConfig, i: Insurer, spec: DelaySpec) -> Result<ScenarioConfig> {
    let mut c = *base;
    *c.delay_mut(i.other()) = spec;
    c.with_insurer_delay(i, spec)
}

fn investment_signs(cfg: &CheckedScenario) -> Vec<Check> {
    let base = *cfg.config();
    let mut checks = Vec::new();
    let h = cfg.horizon();
    for t in [0.0, 0.5 * h] {
        checks.push(sign_check(
            format!("t={t}: d bL/d gamma_L"),
            Sign::Neg,
            central_difference(base.prefs.gamma_l, |x| {
                let mut c = base;
                c.prefs.gamma_l = x;
                investment_of(&c, t, None)
            }),
        ));
        checks.push(sign_check(
            format!("t={t}: d bL/d h_L"),
            Sign::Neg,
            central_difference(base.delay_l.h, |x| {
                let mut c = base;
                c.delay_l.h = x;
                investment_of(&c, t, None)
            }),
        ));
        for i in Insurer::BOTH {
            let n = i.number();
            checks.push(sign_check(
                format!("t={t}: d b{n}/d gamma{n}"),
                Sign::Neg,
                central_difference(base.prefs.gamma(i), |x| {
                    let mut c = base;
                    match i {
                        Insurer::One => c.prefs.gamma1 = x,
                        Insurer::Two => c.prefs.gamma2 = x,
                    }
                    investment_of(&c, t, Some(i))
                }),
            ));
            checks.push(sign_check(
                format!("t={t}: d b{n}/d k{n}"),
                Sign::Pos,
                central_difference(base.prefs.k(i), |x| {
                    let mut c = base;
                    match i {
                        Insurer::One => c.prefs.k1 = x,
                        Insurer::Two => c.prefs.k2 = x,
                    }
                    investment_of(&c, t, Some(i))
                }),
            ));
            checks.push(sign_check(
                format!("t={t}: d b{n}/d h{n}"),
                Sign::Neg,
                central_difference(base.delay(i).h, |x| {
                    let spec = DelaySpec { h: x, ..*base.delay(i) };
                    investment_of(&base.with_insurer_delay(i, spec)?, t, Some(i))
                }),
            ));
        }
    }
    // Branches of the memory-weight signs, at t = 0.
    for (label, spec, sign) in alpha_branches() {
        checks.push(sign_check(
            format!("{label}: d bL/d alpha_L"),
            sign,
            central_difference(spec.alpha, |x| {
                let mut c = base;
                c.delay_l = DelaySpec { alpha: x, ..spec };
                investment_of(&c, 0.0, None)
            }),
        ));
        for i in Insurer::BOTH {
            let n = i.number();
            checks.push(sign_check(
                format!("{label}: d b{n}/d alpha{n}"),
                sign,
                central_difference(spec.alpha, |x| {
                    investment_of(
                        &matched_insurers(&base, i, DelaySpec { alpha: x, ..spec })?,
                        0.0,
                        Some(i),
                    )
                }),
            ));
        }
    }
    for (label, spec, sign) in eta_branches(base.market.r0) {
        checks.push(sign_check(
            format!("{label}: d bL/d eta_L"),
            sign,
            central_difference(spec.eta, |x| {
                let mut c = base;
                c.delay_l = DelaySpec { eta: x, ..spec };
                investment_of(&c, 0.0, None)
            }),
        ));
        for i in Insurer::BOTH {
            let n = i.number();
            checks.push(sign_check(
                format!("{label}: d b{n}/d eta{n}"),
                sign,
                central_difference(spec.eta, |x| {
                    investment_of(&matched_insurers(&base, i, DelaySpec { eta: x, ..spec })?, 0.0, Some(i))
                }),
            ));
        }
    }
    checks
}

/// Which single-insurer quantity a sign check differentiates.
#[derive(Debug, Clone, Copy)]
enum SingleOut {
    P,
    Bl,
    Q1,
    B1,
}

impl SingleOut {
    fn name(self) -> &'static str {
        match self {
            SingleOut::P => "p~",
            SingleOut::Bl => "bL~",
            SingleOut::Q1 => "q1~",
            SingleOut::B1 => "b1~",
        }
    }

    fn pick(self, pt: &SingleInsurerPoint) -> f64 {
        match self {
            SingleOut::P => pt.p,
            SingleOut::Bl => pt.bl,
            SingleOut::Q1 => pt.q1,
            SingleOut::B1 => pt.b1,
        }
    }
}

/// Interior-case single-insurer output; leaving the interior case is an error.
fn single_output(sc: &SingleInsurerScenario, t: f64, out: SingleOut) -> Result<f64> {
    let checked = sc.check()?;
    let pt = single_insurer_strategy(t, sc.market.s0, &checked)?;
    if pt.case != SingleCase::Interior {
        return Err(crate::Error::ScenarioFile(format!(
            "single-insurer case {} is not interior at t={t}",
            pt.case.number()
        )));
    }
    Ok(out.pick(&pt))
}

fn single_signs(cfg: &CheckedScenario) -> Vec<Check> {
    use SingleOut::{Bl, B1, P, Q1};
    let base = single_interior_scenario(cfg.config());
    let mut checks = Vec::new();
    type Setter = fn(&mut SingleInsurerScenario, f64);
    let table: [(&str, Setter, fn(&SingleInsurerScenario) -> f64, SingleOut, Sign); 8] = [
        ("gamma_L", |s, x| s.gamma_l = x, |s| s.gamma_l, Bl, Sign::Neg),
        ("h_L", |s, x| s.delay_l.h = x, |s| s.delay_l.h, Bl, Sign::Neg),
        ("gamma1", |s, x| s.gamma1 = x, |s| s.gamma1, B1, Sign::Neg),
        ("h1", |s, x| s.delay_1.h = x, |s| s.delay_1.h, B1, Sign::Neg),
        ("gamma_L", |s, x| s.gamma_l = x, |s| s.gamma_l, P, Sign::Pos),
        ("h_L", |s, x| s.delay_l.h = x, |s| s.delay_l.h, P, Sign::Pos),
        ("gamma1", |s, x| s.gamma1 = x, |s| s.gamma1, Q1, Sign::Neg),
        ("h1", |s, x| s.delay_1.h = x, |s| s.delay_1.h, Q1, Sign::Neg),
    ];
    let h = base.market.horizon;
    for t in [0.0, 0.5 * h] {
        for (param, set, get, out, sign) in table {
            checks.push(sign_check(
                format!("single t={t}: d {}/d {param}", out.name()),
                sign,
                central_difference(get(&base), |x| {
                    let mut sc = base;
                    set(&mut sc, x);
                    single_output(&sc, t, out)
                }),
            ));
        }
    }
    // Memory-weight branches. The premium moves opposite to the reinsurer's
    // investment; the retention moves with the insurer's investment.
    let flip = |s: Sign| if s == Sign::Pos { Sign::Neg } else { Sign::Pos };
    for (label, spec, sign) in alpha_branches() {
        for (out, want, leader) in [
            (Bl, sign, true),
            (P, flip(sign), true),
            (B1, sign, false),
            (Q1, sign, false),
        ] {
            let who = if leader { "alpha_L" } else { "alpha1" };
            checks.push(sign_check(
                format!("single {label}: d {}/d {who}", out.name()),
                want,
                central_difference(spec.alpha, |x| {
                    let mut sc = base;
                    let d = DelaySpec { alpha: x, ..spec };
                    if leader {
                        sc.delay_l = d;
                    } else {
                        sc.delay_1 = d;
                    }
                    single_output(&sc, 0.0, out)
                }),
            ));
        }
    }
    for (label, spec, sign) in eta_branches(base.market.r0) {
        for (out, want, leader) in [
            (Bl, sign, true),
            (P, flip(sign), true),
            (B1, sign, false),
            (Q1, sign, false),
        ] {
            let who = if leader { "eta_L" } else { "eta1" };
            checks.push(sign_check(
                format!("single {label}: d {}/d {who}", out.name()),
                want,
                central_difference(spec.eta, |x| {
                    let mut sc = base;
                    let d = DelaySpec { eta: x, ..spec };
                    if leader {
                        sc.delay_l = d;
                    } else {
                        sc.delay_1 = d;
                    }
                    single_output(&sc, 0.0, out)
                }),
            ));
        }
    }
    checks
}

/// Bound on |with memory - without memory| at the terminal time.
pub const TERMINAL_COINCIDENCE_TOL: f64 = 1e-10;

fn terminal_coincidence(cfg: &CheckedScenario) -> Check {
    let t = cfg.horizon();
    let s = cfg.market().s0;
    Check::from_result(
        "terminal coincidence",
        (|| -> Result<_> {
            let a = equilibrium_point(t, s, cfg)?;
            let b = no_delay_strategy(t, s, cfg)?;
            let diffs = [
                a.p_star - b.p_star,
                a.q1_star - b.q1_star,
                a.q2_star - b.q2_star,
                a.bl_star - b.bl_star,
                a.b1_star - b.b1_star,
                a.b2_star - b.b2_star,
            ];
            let worst = diffs.iter().fold(0.0f64, |m, d| m.max(d.abs()));
            Ok((
                worst < TERMINAL_COINCIDENCE_TOL,
                format!("max |difference| at t=T: {worst:.2e}"),
            ))
        })(),
    )
}

fn sign_suite(cfg: &CheckedScenario) -> Vec<Check> {
    if cfg.market().beta < 0.0 {
        return vec![Check::new("beta >= 0", false, "the sign results assume beta >= 0")];
    }
    let mut checks = investment_signs(cfg);
    checks.extend(single_signs(cfg));
    checks.push(terminal_coincidence(cfg));
    checks
}

/// Relative tolerance of the variance-premium identity.
pub const VARIANCE_PREMIUM_TOL: f64 = 1e-12;
/// Number of random times in the variance-premium suite.
pub const VARIANCE_PREMIUM_DRAWS: usize = 20;

/// Residual of p(1-q) = a(1-q) + (gamma1 phi1 + gamma_L phi_L) sigma^2 (1-q)^2,
/// relative to the largest term.
pub fn variance_premium_residual(pt: &SingleInsurerPoint, sc: &SingleInsurerScenario) -> f64 {
    let c = 1.0 - pt.q1;
    let terms = [
        pt.p * c,
        -sc.a1 * c,
        -(sc.gamma1 * pt.phi_1 + sc.gamma_l * pt.phi_l) * sc.sigma1 * sc.sigma1 * c * c,
    ];
    let scale = terms.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    terms.iter().sum::<f64>().abs() / scale.max(f64::MIN_POSITIVE)
}

fn variance_premium_suite(cfg: &CheckedScenario, seed: u64) -> Vec<Check> {
    let sc = single_interior_scenario(cfg.config());
    let checked = match sc.check() {
        Ok(c) => c,
        Err(e) => return vec![Check::new("single-insurer scenario", false, format!("error: {e}"))],
    };
    let mut rng = suite_rng(seed ^ 0x56_50);
    (0..VARIANCE_PREMIUM_DRAWS)
        .map(|n| {
            let t = rng.random_range(0.0..=sc.market.horizon);
            Check::from_result(
                format!("time {n}"),
                single_insurer_strategy(t, sc.market.s0, &checked).map(|pt| {
                    let rel = variance_premium_residual(&pt, &sc);
                    (
                        pt.case == SingleCase::Interior && rel <= VARIANCE_PREMIUM_TOL,
                        format!("t={t:.4}, case {}, relative residual {rel:.2e}", pt.case.number()),
                    )
                }),
            )
        })
        .collect()
}

/// Phi of the reinsurer in a single-insurer scenario, exposed for tests.
pub fn single_phi_l(sc: &SingleInsurerScenario, t: f64) -> Result<f64> {
    Ok(eval_phi(t, sc.check()?.kappa_l(), sc.market.horizon))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn default_cfg() -> CheckedScenario {
        validate(&ScenarioConfig::paper_default()).unwrap()
    }

    fn assert_passes(suite: Suite) {
        let rep = run_suite(suite, &default_cfg(), DEFAULT_SEED);
        assert!(rep.passed(), "{rep}");
    }

    #[test]
    fn reference_table_suite_passes() {
        assert_passes(Suite::Table9);
    }

    #[test]
    fn timeline_suite_passes() {
        assert_passes(Suite::Timeline);
    }

    #[test]
    fn sign_suite_passes() {
        assert_passes(Suite::Signs);
    }

    #[test]
    fn variance_premium_suite_passes() {
        assert_passes(Suite::VariancePremium);
    }

    #[test]
    fn suite_names_round_trip() {
        for s in Suite::ALL {
            assert_eq!(Suite::from_name(s.name()), Some(s));
        }
        assert_eq!(Suite::from_name("nope"), None);
    }

    #[test]
    fn random_scenarios_are_valid_and_reproducible() {
        let a = random_scenario(&mut suite_rng(3));
        let b = random_scenario(&mut suite_rng(3));
        assert_eq!(a, b);
    }

    #[test]
    fn random_scenarios_always_classify() {
        let mut rng = suite_rng(11);
        for _ in 0..300 {
            let cfg = random_scenario(&mut rng);
            let t = rng.random_range(0.0..=cfg.horizon());
            classify_case(t, &cfg).unwrap();
        }
    }

    #[test]
    fn thresholds_split_branches() {
        assert!((alpha_threshold(2.0) - 2f64.ln() / 2.0).abs() < 1e-15);
        assert!((h_threshold(0.5, 0.05) - 1.597).abs() < 1e-3);
    }
}
