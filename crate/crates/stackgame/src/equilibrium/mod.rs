//! Equilibrium strategies: investment amounts, the ten-case premium/retention
//! classifier, follower best responses and the two special cases.

use std::fmt;

use crate::error::{Error, Result};
use crate::kernels::{eval_case_constants, KernelEval};
use crate::params::{CheckedScenario, Insurer};

pub mod single;

pub use single::{single_insurer_strategy, CheckedSingle, SingleCase, SingleInsurerPoint, SingleInsurerScenario};

/// Relative slack applied to every case inequality.
pub const CASE_SLACK: f64 = 1e-12;

/// The ten equilibrium regimes.
///
/// 1: both insurers retain everything. 2-4: insurer 1 retains everything, premium
/// at c_bar / c_F / interior. 5-7: same with the roles swapped. 8-10: both
/// reinsure, premium at c_bar / c_F / interior.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum CaseId {
    Case1,
    Case2,
    Case3,
    Case4,
    Case5,
    Case6,
    Case7,
    Case8,
    Case9,
    Case10,
}

/// Where the premium sits within [c_F, c_bar].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PremiumKind {
    Arbitrary,
    Upper,
    Lower,
    Interior,
}

impl CaseId {
    pub const ALL: [CaseId; 10] = [
        CaseId::Case1,
        CaseId::Case2,
        CaseId::Case3,
        CaseId::Case4,
        CaseId::Case5,
        CaseId::Case6,
        CaseId::Case7,
        CaseId::Case8,
        CaseId::Case9,
        CaseId::Case10,
    ];

    pub fn number(self) -> u8 {
        self as u8 + 1
    }

    pub fn from_number(n: u8) -> Option<CaseId> {
        (1..=10).contains(&n).then(|| CaseId::ALL[n as usize - 1])
    }

    /// The insurer that keeps all its claims in cases 2-7.
    pub fn full_retainer(self) -> Option<Insurer> {
        match self {
            CaseId::Case2 | CaseId::Case3 | CaseId::Case4 => Some(Insurer::One),
            CaseId::Case5 | CaseId::Case6 | CaseId::Case7 => Some(Insurer::Two),
            _ => None,
        }
    }

    pub fn premium_kind(self) -> PremiumKind {
        match self {
            CaseId::Case1 => PremiumKind::Arbitrary,
            CaseId::Case2 | CaseId::Case5 | CaseId::Case8 => PremiumKind::Upper,
            CaseId::Case3 | CaseId::Case6 | CaseId::Case9 => PremiumKind::Lower,
            CaseId::Case4 | CaseId::Case7 | CaseId::Case10 => PremiumKind::Interior,
        }
    }
}

impl fmt::Display for CaseId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.number())
    }
}

/// Smallest normalised margin of each case's condition set; a case holds when its
/// margin is at least `-CASE_SLACK`.
#[derive(Debug, Clone, PartialEq)]
pub struct CaseDiagnostics {
    pub t: f64,
    pub margins: Vec<(CaseId, f64)>,
}

impl fmt::Display for CaseDiagnostics {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "closest misses:")?;
        let mut sorted = self.margins.clone();
        sorted.sort_by(|a, b| b.1.total_cmp(&a.1));
        for (case, m) in sorted.iter().take(3) {
            write!(f, " case {case} margin {m:.3e};")?;
        }
        Ok(())
    }
}

/// Result of the case classifier.
#[derive(Debug, Clone, PartialEq)]
pub struct Classification {
    pub case: CaseId,
    /// Other cases whose conditions also hold within the slack.
    pub also_matched: Vec<CaseId>,
    /// True if the case is within the slack of a boundary or overlaps another case.
    pub boundary: bool,
    pub diagnostics: CaseDiagnostics,
}

/// Premium and retentions at one time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PremiumRetention {
    pub t: f64,
    pub case: CaseId,
    pub p: f64,
    pub q1: f64,
    pub q2: f64,
    /// Case 1: any premium in [c_F, c_bar] is optimal; `p` reports c_bar.
    pub premium_nonunique: bool,
    pub boundary: bool,
}

impl PremiumRetention {
    pub fn q(&self, i: Insurer) -> f64 {
        match i {
            Insurer::One => self.q1,
            Insurer::Two => self.q2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Investments {
    pub bl: f64,
    pub b1: f64,
    pub b2: f64,
}

impl Investments {
    pub fn b(&self, i: Insurer) -> f64 {
        match i {
            Insurer::One => self.b1,
            Insurer::Two => self.b2,
        }
    }
}

/// The full equilibrium strategy at (t, s).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EquilibriumPoint {
    pub t: f64,
    pub s: f64,
    pub case: CaseId,
    pub p_star: f64,
    pub bl_star: f64,
    pub b1_star: f64,
    pub b2_star: f64,
    pub q1_star: f64,
    pub q2_star: f64,
    pub premium_nonunique: bool,
    pub boundary: bool,
}

/// The bracket (r - r0)/sigma^2 - 2 beta g1(t) shared by all investment amounts.
fn investment_bracket(ke: &KernelEval, cfg: &CheckedScenario) -> f64 {
    let m = cfg.market();
    (m.r - m.r0) / (m.sigma * m.sigma) - 2.0 * m.beta * ke.g1
}

pub(crate) fn investments_from(ke: &KernelEval, s: f64, cfg: &CheckedScenario) -> Investments {
    let m = cfg.market();
    let scale = s.powf(-2.0 * m.beta) * investment_bracket(ke, cfg);
    let p = cfg.prefs();
    let b = |i: Insurer| {
        let j = i.other();
        scale / ((1.0 - p.k1 * p.k2) * ke.phi_f) * (1.0 / cfg.gamma(i) + cfg.k(i) / cfg.gamma(j))
    };
    Investments {
        bl: scale / (cfg.gamma_l() * ke.phi_l),
        b1: b(Insurer::One),
        b2: b(Insurer::Two),
    }
}

/// Equilibrium amounts invested in the risky asset by the reinsurer and both insurers.
pub fn investment_strategies(t: f64, s: f64, cfg: &CheckedScenario) -> Investments {
    investments_from(&eval_case_constants(t, cfg), s, cfg)
}

/// x >= y, as a margin normalised by the operands' magnitude.
fn ge(x: f64, y: f64) -> f64 {
    (x - y) / x.abs().max(y.abs()).max(1.0)
}

/// x < y; the strict inequality is relaxed by the same slack.
fn lt(x: f64, y: f64) -> f64 {
    ge(y, x)
}

fn min_all(ms: &[f64]) -> f64 {
    ms.iter().copied().fold(f64::INFINITY, f64::min)
}

/// Margins of the three boundary cases in which insurer i keeps everything and j reinsures.
fn partial_margins(ke: &KernelEval, i: Insurer, cfg: &CheckedScenario) -> [f64; 3] {
    let j = i.other();
    let (ci, cj) = (cfg.cross(i), cfg.cross(j));
    let k = ke.k;
    let mj = (1.0 - cj) * ke.m_f(j);
    let upper = min_all(&[ge(k * (ke.n_cbar(i) + ci * ke.n_cbar(j)), 1.0), ge(mj, ke.n_cbar(j))]);
    let lower = min_all(&[
        ge(k * (ke.n_c(i) + ci * ke.n_c(j)), 1.0),
        ge(ke.n_c(j), mj),
        lt(ke.n_c(j), 1.0 - cj),
    ]);
    let interior = min_all(&[
        ge(k * (ke.n_a(i) + ke.k_bar_f(i) * ke.m_f(j)), 1.0),
        lt(ke.n_c(j), mj),
        lt(mj, ke.n_cbar(j).min(1.0 - cj)),
    ]);
    [upper, lower, interior]
}

/// K-weighted interior retention of insurer i at premium p.
fn interior_retention(ke: &KernelEval, p: f64, i: Insurer, cfg: &CheckedScenario) -> f64 {
    let j = i.other();
    let n = |x: Insurer| (p - cfg.a(x)) / (cfg.gamma(x) * cfg.sigma_c(x).powi(2) * ke.phi_f);
    ke.k * (n(i) + cfg.cross(i) * n(j))
}

fn case_margins(ke: &KernelEval, cfg: &CheckedScenario) -> Vec<(CaseId, f64)> {
    use Insurer::{One, Two};
    let (c1, c2) = (cfg.cross(One), cfg.cross(Two));
    let k = ke.k;
    let mut out = Vec::with_capacity(10);
    out.push((CaseId::Case1, min_all(&[ge(ke.n_c1 + c1, 1.0), ge(ke.n_c2 + c2, 1.0)])));
    let [u, l, m] = partial_margins(ke, One, cfg);
    out.extend([(CaseId::Case2, u), (CaseId::Case3, l), (CaseId::Case4, m)]);
    let [u, l, m] = partial_margins(ke, Two, cfg);
    out.extend([(CaseId::Case5, u), (CaseId::Case6, l), (CaseId::Case7, m)]);

    let (c_f, c_bar) = (cfg.c_f(), cfg.c_bar());
    if ke.p_d > 0.0 {
        let frac = ke.premium_fraction();
        out.push((
            CaseId::Case8,
            min_all(&[
                lt(k * (ke.n_cbar1 + c1 * ke.n_cbar2), 1.0),
                lt(k * (ke.n_cbar2 + c2 * ke.n_cbar1), 1.0),
                ge(frac, c_bar),
            ]),
        ));
        out.push((
            CaseId::Case9,
            min_all(&[
                lt(k * (ke.n_c1 + c1 * ke.n_c2), 1.0),
                lt(k * (ke.n_c2 + c2 * ke.n_c1), 1.0),
                ge(c_f, frac),
            ]),
        ));
        out.push((
            CaseId::Case10,
            min_all(&[
                lt(interior_retention(ke, frac, One, cfg), 1.0),
                lt(interior_retention(ke, frac, Two, cfg), 1.0),
                lt(c_f, frac),
                lt(frac, c_bar),
            ]),
        ));
    } else {
        out.extend([
            (CaseId::Case8, f64::NEG_INFINITY),
            (CaseId::Case9, f64::NEG_INFINITY),
            (CaseId::Case10, f64::NEG_INFINITY),
        ]);
    }
    out
}

/// Classify using an already evaluated kernel bundle.
pub fn classify_with(ke: &KernelEval, cfg: &CheckedScenario) -> Result<Classification> {
    let margins = case_margins(ke, cfg);
    let matched: Vec<CaseId> = margins
        .iter()
        .filter(|(_, m)| *m >= -CASE_SLACK)
        .map(|(c, _)| *c)
        .collect();
    let diagnostics = CaseDiagnostics { t: ke.t, margins };
    if matched.is_empty() {
        return Err(if ke.p_d <= 0.0 {
            Error::NonPositivePremiumDenominator { t: ke.t, p_d: ke.p_d }
        } else {
            Error::NoCaseMatched(Box::new(diagnostics))
        });
    }
    // When several condition sets hold, the reinsurer takes the candidate with the
    // larger objective; exact ties go to the lower case number.
    let mut case = matched[0];
    let mut best = case_objective(ke, case, cfg);
    for &c in &matched[1..] {
        let v = case_objective(ke, c, cfg);
        if v > best {
            best = v;
            case = c;
        }
    }
    let own = diagnostics.margins[case.number() as usize - 1].1;
    let also_matched: Vec<CaseId> = matched.into_iter().filter(|c| *c != case).collect();
    Ok(Classification {
        case,
        boundary: !also_matched.is_empty() || own < CASE_SLACK,
        also_matched,
        diagnostics,
    })
}

/// The reinsurer's pointwise objective at the strategy a case prescribes.
pub fn case_objective(ke: &KernelEval, case: CaseId, cfg: &CheckedScenario) -> f64 {
    use Insurer::{One, Two};
    let (p, q1, q2) = case_strategy(ke, case, cfg);
    let u = cfg.gamma_l() * ke.phi_l;
    let (s1, s2) = (cfg.sigma_c(One), cfg.sigma_c(Two));
    let (c1, c2) = (1.0 - q1, 1.0 - q2);
    u * ((p - cfg.a(One)) * c1 + (p - cfg.a(Two)) * c2)
        - 0.5 * u * u * (c1 * c1 * s1 * s1 + c2 * c2 * s2 * s2 + 2.0 * c1 * c2 * s1 * s2 * cfg.rho())
}

/// Which of the ten cases holds at time t.
///
/// Conditions are checked in order 1 to 10. If more than one set holds, the case
/// giving the reinsurer the larger objective wins and the boundary flag is set.
pub fn classify_case(t: f64, cfg: &CheckedScenario) -> Result<Classification> {
    classify_with(&eval_case_constants(t, cfg), cfg)
}

/// The premium and retentions prescribed by `case`, whether or not its conditions hold.
pub fn case_strategy(ke: &KernelEval, case: CaseId, cfg: &CheckedScenario) -> (f64, f64, f64) {
    use Insurer::{One, Two};
    let (c_f, c_bar) = (cfg.c_f(), cfg.c_bar());
    let partial = |i: Insurer, p: f64| -> (f64, f64, f64) {
        let j = i.other();
        let qj = (p - cfg.a(j)) / (cfg.gamma(j) * cfg.sigma_c(j).powi(2) * ke.phi_f) + cfg.cross(j);
        match i {
            One => (p, 1.0, qj),
            Two => (p, qj, 1.0),
        }
    };
    let partial_interior = |i: Insurer| {
        let j = i.other();
        let cj = cfg.cross(j);
        partial(
            i,
            cfg.a(j) + cfg.gamma(j) * cfg.sigma_c(j).powi(2) * ke.phi_f * (1.0 - cj) * ke.m_f(j),
        )
    };
    let both = |p: f64| {
        (
            p,
            interior_retention(ke, p, One, cfg),
            interior_retention(ke, p, Two, cfg),
        )
    };
    match case {
        CaseId::Case1 => (c_bar, 1.0, 1.0),
        CaseId::Case2 => partial(One, c_bar),
        CaseId::Case3 => partial(One, c_f),
        CaseId::Case4 => partial_interior(One),
        CaseId::Case5 => partial(Two, c_bar),
        CaseId::Case6 => partial(Two, c_f),
        CaseId::Case7 => partial_interior(Two),
        CaseId::Case8 => both(c_bar),
        CaseId::Case9 => both(c_f),
        CaseId::Case10 => both(ke.premium_fraction()),
    }
}

pub(crate) fn premium_and_retention_with(ke: &KernelEval, cfg: &CheckedScenario) -> Result<PremiumRetention> {
    let cls = classify_with(ke, cfg)?;
    let (p, q1, q2) = case_strategy(ke, cls.case, cfg);
    Ok(PremiumRetention {
        t: ke.t,
        case: cls.case,
        p,
        q1,
        q2,
        premium_nonunique: cls.case == CaseId::Case1,
        boundary: cls.boundary,
    })
}

/// Equilibrium premium and retentions at time t.
pub fn premium_and_retention(t: f64, cfg: &CheckedScenario) -> Result<PremiumRetention> {
    premium_and_retention_with(&eval_case_constants(t, cfg), cfg)
}

/// Insurer i's best retention given the premium and the other insurer's retention.
pub fn best_response_retention(t: f64, p: f64, q_other: f64, i: Insurer, cfg: &CheckedScenario) -> f64 {
    let phi_f = crate::kernels::eval_phi(t, cfg.kappa_f(), cfg.horizon());
    let n = (p - cfg.a(i)) / (cfg.gamma(i) * cfg.sigma_c(i).powi(2) * phi_f);
    (n + cfg.cross(i) * q_other).min(1.0)
}

/// The followers' Nash retentions at an arbitrary premium p, solved in closed form.
///
/// With n_i = (p - a_i)/(gamma_i sigma_i^2 phi_F) and c_i the cross coefficient, the
/// responses q_i = min(n_i + c_i q_j, 1) have exactly one fixed point: both capped,
/// one capped, or the K-weighted interior solution.
pub fn follower_response(ke: &KernelEval, p: f64, cfg: &CheckedScenario) -> (f64, f64) {
    use Insurer::{One, Two};
    let n = |x: Insurer| (p - cfg.a(x)) / (cfg.gamma(x) * cfg.sigma_c(x).powi(2) * ke.phi_f);
    let (n1, n2) = (n(One), n(Two));
    let (c1, c2) = (cfg.cross(One), cfg.cross(Two));
    if n1 + c1 >= 1.0 && n2 + c2 >= 1.0 {
        return (1.0, 1.0);
    }
    if n2 + c2 < 1.0 && n1 + c1 * (n2 + c2) >= 1.0 {
        return (1.0, n2 + c2);
    }
    if n1 + c1 < 1.0 && n2 + c2 * (n1 + c1) >= 1.0 {
        return (n1 + c1, 1.0);
    }
    (ke.k * (n1 + c1 * n2), ke.k * (n2 + c2 * n1))
}

fn assemble(ke: &KernelEval, s: f64, pr: &PremiumRetention, cfg: &CheckedScenario) -> EquilibriumPoint {
    let inv = investments_from(ke, s, cfg);
    EquilibriumPoint {
        t: ke.t,
        s,
        case: pr.case,
        p_star: pr.p,
        bl_star: inv.bl,
        b1_star: inv.b1,
        b2_star: inv.b2,
        q1_star: pr.q1,
        q2_star: pr.q2,
        premium_nonunique: pr.premium_nonunique,
        boundary: pr.boundary,
    }
}

/// A maximal time interval on which one case holds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CaseSegment {
    pub lo: f64,
    pub hi: f64,
    pub case: CaseId,
}

/// Number of uniform cells scanned for case switches.
pub const TIMELINE_CELLS: usize = 256;

/// Partition [t0, T] into the intervals on which each case holds, earliest first.
///
/// The interval is scanned on a uniform grid and every switch is located by
/// bisection to a few ulps.
pub fn case_timeline(t0: f64, cfg: &CheckedScenario) -> Result<Vec<CaseSegment>> {
    let horizon = cfg.horizon();
    let case_at = |t: f64| classify_case(t, cfg).map(|c| c.case);
    let mut segments = Vec::new();
    let mut lo = t0;
    let mut current = case_at(t0)?;
    let width = (horizon - t0) / TIMELINE_CELLS as f64;
    for n in 1..=TIMELINE_CELLS {
        let b = if n == TIMELINE_CELLS {
            horizon
        } else {
            t0 + width * n as f64
        };
        let next = case_at(b)?;
        if next == current {
            continue;
        }
        // Bisect for each switch inside the cell; a cell may hold more than one.
        let mut a = t0 + width * (n - 1) as f64;
        while current != next {
            let mut hi = b;
            while hi - a > 4.0 * f64::EPSILON * horizon.abs().max(1.0) {
                let mid = 0.5 * (a + hi);
                if mid <= a || mid >= hi {
                    break;
                }
                if case_at(mid)? == current {
                    a = mid;
                } else {
                    hi = mid;
                }
            }
            let switch = 0.5 * (a + hi);
            segments.push(CaseSegment {
                lo,
                hi: switch,
                case: current,
            });
            lo = switch;
            current = case_at(hi)?;
            a = hi;
        }
    }
    segments.push(CaseSegment {
        lo,
        hi: horizon,
        case: current,
    });
    Ok(segments)
}

/// The complete equilibrium strategy at (t, s).
pub fn equilibrium_point(t: f64, s: f64, cfg: &CheckedScenario) -> Result<EquilibriumPoint> {
    let ke = eval_case_constants(t, cfg);
    let pr = premium_and_retention_with(&ke, cfg)?;
    Ok(assemble(&ke, s, &pr, cfg))
}

/// The equilibrium strategy when no agent has memory.
pub fn no_delay_strategy(t: f64, s: f64, cfg: &CheckedScenario) -> Result<EquilibriumPoint> {
    equilibrium_point(t, s, &cfg.without_delay())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::{validate, ScenarioConfig};

    fn default_cfg() -> CheckedScenario {
        validate(&ScenarioConfig::paper_default()).unwrap()
    }

    #[test]
    fn case_numbers_round_trip() {
        for c in CaseId::ALL {
            assert_eq!(CaseId::from_number(c.number()), Some(c));
        }
        assert_eq!(CaseId::from_number(0), None);
        assert_eq!(CaseId::from_number(11), None);
    }

    #[test]
    fn default_timeline() {
        let cfg = default_cfg();
        for t in 0..=10 {
            let c = classify_case(t as f64, &cfg).unwrap();
            let want = if t <= 6 { CaseId::Case8 } else { CaseId::Case10 };
            assert_eq!(c.case, want, "t={t}");
            assert!(!c.boundary);
        }
    }

    #[test]
    fn default_table_points() {
        let cfg = default_cfg();
        let pr = premium_and_retention(0.0, &cfg).unwrap();
        assert_eq!(pr.p, 12.0);
        assert!((pr.q1 - 0.294).abs() < 1e-3 && (pr.q2 - 0.429).abs() < 1.0001e-3);
        let pr = premium_and_retention(9.0, &cfg).unwrap();
        assert!((pr.p - 11.030).abs() < 5e-4);
        assert!((pr.q1 - 0.419).abs() < 5e-4 && (pr.q2 - 0.612).abs() < 5e-4);
        let nd = premium_and_retention(8.0, &cfg.without_delay()).unwrap();
        assert!((nd.p - 11.361).abs() < 5e-4);
    }

    #[test]
    fn gbm_investment_at_horizon() {
        let mut c = ScenarioConfig::paper_default();
        c.market.beta = 0.0;
        let cfg = validate(&c).unwrap();
        let inv = investment_strategies(c.market.horizon, 1.7, &cfg);
        let m = c.market;
        assert!((inv.bl - (m.r - m.r0) / (c.prefs.gamma_l * m.sigma * m.sigma)).abs() < 1e-12);
    }

    #[test]
    fn investment_affine_relation() {
        let cfg = default_cfg();
        let (t, s) = (3.3, 0.8);
        let inv = investment_strategies(t, s, &cfg);
        let ke = eval_case_constants(t, &cfg);
        let m = cfg.market();
        let own = s.powf(-2.0 * m.beta) / (cfg.gamma(Insurer::One) * ke.phi_f)
            * ((m.r - m.r0) / (m.sigma * m.sigma) - 2.0 * m.beta * ke.g1);
        let lhs = inv.b1 - cfg.k(Insurer::One) * inv.b2;
        assert!((lhs - own).abs() < 1e-12 * own.abs());
    }

    #[test]
    fn delay_lowers_reinsurer_investment_at_defaults() {
        let cfg = default_cfg();
        let with = investment_strategies(0.0, 1.0, &cfg);
        let without = no_delay_strategy(0.0, 1.0, &cfg).unwrap();
        assert!(with.bl < without.bl_star);
    }

    #[test]
    fn best_response_boundary_and_monotone() {
        let mut c = ScenarioConfig::paper_default();
        c.prefs.k1 = 0.0;
        let cfg = validate(&c).unwrap();
        let t = 4.0;
        let phi = crate::kernels::eval_phi(t, cfg.kappa_f(), cfg.horizon());
        let p = cfg.a(Insurer::One) + cfg.gamma(Insurer::One) * 9.0 * phi;
        assert!((best_response_retention(t, p, 0.3, Insurer::One, &cfg) - 1.0).abs() < 1e-12);
        let a = best_response_retention(t, 9.0, 0.3, Insurer::One, &cfg);
        let b = best_response_retention(t, 9.5, 0.3, Insurer::One, &cfg);
        assert!(b > a);
    }

    #[test]
    fn follower_response_is_fixed_point() {
        let cfg = default_cfg();
        for t in [0.0, 5.0, 9.5] {
            let ke = eval_case_constants(t, &cfg);
            for p in [cfg.c_f(), 10.0, cfg.c_bar()] {
                let (q1, q2) = follower_response(&ke, p, &cfg);
                let b1 = best_response_retention(t, p, q2, Insurer::One, &cfg);
                let b2 = best_response_retention(t, p, q1, Insurer::Two, &cfg);
                assert!((b1 - q1).abs() < 1e-12 && (b2 - q2).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn terminal_coincidence() {
        let cfg = default_cfg();
        let t = cfg.horizon();
        let a = equilibrium_point(t, 1.3, &cfg).unwrap();
        let b = no_delay_strategy(t, 1.3, &cfg).unwrap();
        for (x, y) in [
            (a.p_star, b.p_star),
            (a.q1_star, b.q1_star),
            (a.q2_star, b.q2_star),
            (a.bl_star, b.bl_star),
            (a.b1_star, b.b1_star),
            (a.b2_star, b.b2_star),
        ] {
            assert!((x - y).abs() < 1e-10);
        }
    }
}
