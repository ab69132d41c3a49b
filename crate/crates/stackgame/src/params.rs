//! Scenario parameters, derived delay coefficients and validation.
//!
//! A [`ScenarioConfig`] is plain data. [`validate`] checks every structural
//! condition the closed-form equilibrium needs and returns a
//! [`CheckedScenario`], which is the only input the solvers accept.

use std::path::Path;

use serde::Deserialize;

use crate::error::{Error, Result, ValidationReport};

/// Tolerance on A1 + eta1 = A2 + eta2 (relative).
pub const KAPPA_MATCH_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Insurer {
    One,
    Two,
}

impl Insurer {
    pub const BOTH: [Insurer; 2] = [Insurer::One, Insurer::Two];

    pub fn other(self) -> Insurer {
        match self {
            Insurer::One => Insurer::Two,
            Insurer::Two => Insurer::One,
        }
    }

    /// 1 or 2.
    pub fn number(self) -> usize {
        match self {
            Insurer::One => 1,
            Insurer::Two => 2,
        }
    }

    pub fn from_number(n: usize) -> Option<Insurer> {
        match n {
            1 => Some(Insurer::One),
            2 => Some(Insurer::Two),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FinancialMarket {
    pub r0: f64,
    pub r: f64,
    pub sigma: f64,
    pub beta: f64,
    pub s0: f64,
    /// Horizon T in years.
    pub horizon: f64,
}

/// Diffusion-approximated claims of the two insurers, plus the premium loadings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClaimModel {
    pub a1: f64,
    pub a2: f64,
    pub sigma1: f64,
    pub sigma2: f64,
    pub theta1: f64,
    pub theta2: f64,
    pub rho: f64,
    pub theta_bar: f64,
}

/// Compound-Poisson primitives from which a ClaimModel can be derived.
///
/// `lambda_i` is the total claim intensity of insurer i (own plus common shock),
/// `second_moment_i` is E[claim size^2].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RawClaims {
    pub lambda1: f64,
    pub lambda2: f64,
    pub lambda_common: f64,
    pub mu1: f64,
    pub mu2: f64,
    pub second_moment1: f64,
    pub second_moment2: f64,
}

impl ClaimModel {
    pub fn from_raw(raw: &RawClaims, theta1: f64, theta2: f64, theta_bar: f64) -> ClaimModel {
        let sigma1 = (raw.lambda1 * raw.second_moment1).sqrt();
        let sigma2 = (raw.lambda2 * raw.second_moment2).sqrt();
        ClaimModel {
            a1: raw.lambda1 * raw.mu1,
            a2: raw.lambda2 * raw.mu2,
            sigma1,
            sigma2,
            theta1,
            theta2,
            rho: raw.lambda_common * raw.mu1 * raw.mu2 / (sigma1 * sigma2),
            theta_bar,
        }
    }

    pub fn a(&self, i: Insurer) -> f64 {
        match i {
            Insurer::One => self.a1,
            Insurer::Two => self.a2,
        }
    }

    pub fn sigma(&self, i: Insurer) -> f64 {
        match i {
            Insurer::One => self.sigma1,
            Insurer::Two => self.sigma2,
        }
    }

    pub fn theta(&self, i: Insurer) -> f64 {
        match i {
            Insurer::One => self.theta1,
            Insurer::Two => self.theta2,
        }
    }
}

/// Bounded-memory parameters of one agent. All-zero means the agent has no memory.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DelaySpec {
    pub h: f64,
    pub alpha: f64,
    pub eta: f64,
}

impl DelaySpec {
    pub const NONE: DelaySpec = DelaySpec {
        h: 0.0,
        alpha: 0.0,
        eta: 0.0,
    };

    pub fn is_none(&self) -> bool {
        self.h == 0.0 && self.alpha == 0.0 && self.eta == 0.0
    }

    fn check(&self) -> std::result::Result<(), &'static str> {
        if self.is_none() {
            return Ok(());
        }
        if !(self.h.is_finite() && self.h > 0.0) {
            return Err("h must be > 0");
        }
        if !(self.alpha.is_finite() && self.alpha > 0.0) {
            return Err("alpha must be > 0");
        }
        if !(self.eta > 0.0 && self.eta < 1.0) {
            return Err("eta must lie in (0, 1)");
        }
        Ok(())
    }

    /// exp(-alpha h).
    pub fn decay(&self) -> f64 {
        (-self.alpha * self.h).exp()
    }
}

/// Capital-flow coefficients (A, B, C) of the delayed wealth equation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DerivedDelayCoeffs {
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Preferences {
    pub gamma_l: f64,
    pub gamma1: f64,
    pub gamma2: f64,
    pub k1: f64,
    pub k2: f64,
}

impl Preferences {
    pub fn gamma(&self, i: Insurer) -> f64 {
        match i {
            Insurer::One => self.gamma1,
            Insurer::Two => self.gamma2,
        }
    }

    pub fn k(&self, i: Insurer) -> f64 {
        match i {
            Insurer::One => self.k1,
            Insurer::Two => self.k2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScenarioConfig {
    pub market: FinancialMarket,
    pub claims: ClaimModel,
    pub prefs: Preferences,
    pub delay_l: DelaySpec,
    pub delay_1: DelaySpec,
    pub delay_2: DelaySpec,
    pub x_l0: f64,
    pub x10: f64,
    pub x20: f64,
}

impl ScenarioConfig {
    /// The default parameter set shipped as `scenarios/paper_default`, with eta2 derived.
    pub fn paper_default() -> ScenarioConfig {
        let market = FinancialMarket {
            r0: 0.05,
            r: 0.1,
            sigma: 0.4,
            beta: 1.0,
            s0: 1.0,
            horizon: 10.0,
        };
        let delay_1 = DelaySpec {
            h: 2.0,
            alpha: 0.5,
            eta: 0.05,
        };
        let eta2 = derive_eta2(&delay_1, 3.0, 0.3, market.r0).expect("default eta2 in range");
        ScenarioConfig {
            market,
            claims: ClaimModel {
                a1: 0.8 * 5.0,
                a2: 1.0 * 4.0,
                sigma1: 3.0,
                sigma2: 2.0,
                theta1: 1.2,
                theta2: 1.0,
                rho: 0.3,
                theta_bar: 2.0,
            },
            prefs: Preferences {
                gamma_l: 0.1,
                gamma1: 2.0,
                gamma2: 3.0,
                k1: 0.4,
                k2: 0.3,
            },
            delay_l: DelaySpec {
                h: 2.0,
                alpha: 0.3,
                eta: 0.05,
            },
            delay_1,
            delay_2: DelaySpec {
                h: 3.0,
                alpha: 0.3,
                eta: eta2,
            },
            x_l0: 20.0,
            x10: 10.0,
            x20: 10.0,
        }
    }

    pub fn delay(&self, i: Insurer) -> &DelaySpec {
        match i {
            Insurer::One => &self.delay_1,
            Insurer::Two => &self.delay_2,
        }
    }

    pub fn delay_mut(&mut self, i: Insurer) -> &mut DelaySpec {
        match i {
            Insurer::One => &mut self.delay_1,
            Insurer::Two => &mut self.delay_2,
        }
    }

    pub fn x0(&self, i: Insurer) -> f64 {
        match i {
            Insurer::One => self.x10,
            Insurer::Two => self.x20,
        }
    }

    /// Same scenario with every agent's memory switched off.
    pub fn without_delay(&self) -> ScenarioConfig {
        ScenarioConfig {
            delay_l: DelaySpec::NONE,
            delay_1: DelaySpec::NONE,
            delay_2: DelaySpec::NONE,
            ..*self
        }
    }

    /// Replace insurer i's delay spec and re-derive the other insurer's eta so that
    /// A1 + eta1 = A2 + eta2 keeps holding.
    pub fn with_insurer_delay(&self, i: Insurer, spec: DelaySpec) -> Result<ScenarioConfig> {
        let mut out = *self;
        *out.delay_mut(i) = spec;
        let j = i.other();
        let other = *self.delay(j);
        let eta_j = derive_eta2(&spec, other.h, other.alpha, self.market.r0)?;
        out.delay_mut(j).eta = eta_j;
        Ok(out)
    }

    /// Set a numeric field by its dotted path, e.g. `prefs.gamma_L` or `insurer1.k`.
    pub fn set_param(&mut self, path: &str, value: f64) -> Result<()> {
        let slot: &mut f64 = match path {
            "market.r0" => &mut self.market.r0,
            "market.r" => &mut self.market.r,
            "market.sigma" => &mut self.market.sigma,
            "market.beta" => &mut self.market.beta,
            "market.s0" => &mut self.market.s0,
            "market.T" | "market.horizon" => &mut self.market.horizon,
            "claims.a1" => &mut self.claims.a1,
            "claims.a2" => &mut self.claims.a2,
            "claims.sigma1" => &mut self.claims.sigma1,
            "claims.sigma2" => &mut self.claims.sigma2,
            "claims.theta1" => &mut self.claims.theta1,
            "claims.theta2" => &mut self.claims.theta2,
            "claims.rho" => &mut self.claims.rho,
            "claims.theta_bar" => &mut self.claims.theta_bar,
            "prefs.gamma_L" | "reinsurer.gamma" => &mut self.prefs.gamma_l,
            "prefs.gamma1" | "insurer1.gamma" => &mut self.prefs.gamma1,
            "prefs.gamma2" | "insurer2.gamma" => &mut self.prefs.gamma2,
            "prefs.k1" | "insurer1.k" => &mut self.prefs.k1,
            "prefs.k2" | "insurer2.k" => &mut self.prefs.k2,
            "delay_L.h" | "reinsurer.h" => &mut self.delay_l.h,
            "delay_L.alpha" | "reinsurer.alpha" => &mut self.delay_l.alpha,
            "delay_L.eta" | "reinsurer.eta" => &mut self.delay_l.eta,
            "delay_1.h" | "insurer1.h" => &mut self.delay_1.h,
            "delay_1.alpha" | "insurer1.alpha" => &mut self.delay_1.alpha,
            "delay_1.eta" | "insurer1.eta" => &mut self.delay_1.eta,
            "delay_2.h" | "insurer2.h" => &mut self.delay_2.h,
            "delay_2.alpha" | "insurer2.alpha" => &mut self.delay_2.alpha,
            "delay_2.eta" | "insurer2.eta" => &mut self.delay_2.eta,
            "wealth.x_L0" | "reinsurer.x0" => &mut self.x_l0,
            "wealth.x10" | "insurer1.x0" => &mut self.x10,
            "wealth.x20" | "insurer2.x0" => &mut self.x20,
            _ => return Err(Error::ScenarioFile(format!("unknown parameter path `{path}`"))),
        };
        *slot = value;
        Ok(())
    }
}

/// Solve the delay constraints C = eta e^{-alpha h}, B e^{-alpha h} = (alpha + A + eta) C
/// and A = r0 - B - C for (A, B, C).
pub fn derive_delay_coefficients(spec: &DelaySpec, r0: f64) -> Result<DerivedDelayCoeffs> {
    spec.check().map_err(|reason| Error::InvalidDelaySpec {
        h: spec.h,
        alpha: spec.alpha,
        eta: spec.eta,
        reason,
    })?;
    let DelaySpec { h: _, alpha, eta } = *spec;
    let e = spec.decay();
    let a = (r0 - (alpha + eta) * eta - eta * e) / (1.0 + eta);
    let c = eta * e;
    let b = (alpha + a + eta) * eta;
    Ok(DerivedDelayCoeffs { a, b, c })
}

/// A + eta for a delay spec, in closed form.
pub fn kappa(spec: &DelaySpec, r0: f64) -> f64 {
    (r0 + spec.eta * (1.0 - spec.alpha - spec.decay())) / (1.0 + spec.eta)
}

/// eta2 such that A1 + eta1 = A2 + eta2 given insurer 1's spec and insurer 2's (h, alpha).
pub fn derive_eta2(delay1: &DelaySpec, h2: f64, alpha2: f64, r0: f64) -> Result<f64> {
    let u1 = r0 - 1.0 + delay1.decay() + delay1.alpha;
    let e2 = (-alpha2 * h2).exp();
    let u2 = r0 - 1.0 + e2 + alpha2;
    let eta1 = delay1.eta;
    let eta2 = u1 * eta1 / (u2 + (alpha2 - delay1.alpha + e2 - delay1.decay()) * eta1);
    if eta2 > 0.0 && eta2 < 1.0 {
        Ok(eta2)
    } else {
        Err(Error::EtaOutOfRange { eta2 })
    }
}

/// (c_F, c_bar): the lowest and highest admissible reinsurance premium.
pub fn premium_bounds(claims: &ClaimModel) -> Result<(f64, f64)> {
    let c_f = ((1.0 + claims.theta1) * claims.a1).max((1.0 + claims.theta2) * claims.a2);
    let c_bar = (1.0 + claims.theta_bar) * claims.a1.max(claims.a2);
    if c_f >= c_bar {
        return Err(Error::DegenerateBand { c_f, c_bar });
    }
    Ok((c_f, c_bar))
}

/// A validated scenario together with its derived quantities.
#[derive(Debug, Clone, PartialEq)]
pub struct CheckedScenario {
    cfg: ScenarioConfig,
    coeffs_l: DerivedDelayCoeffs,
    coeffs_1: DerivedDelayCoeffs,
    coeffs_2: DerivedDelayCoeffs,
    c_f: f64,
    c_bar: f64,
}

fn positive(report: &mut ValidationReport, field: &str, v: f64) {
    if !(v.is_finite() && v > 0.0) {
        report.push(field, format!("must be > 0, got {v}"));
    }
}

/// Check every structural condition and collect all failures.
pub fn validate(cfg: &ScenarioConfig) -> Result<CheckedScenario> {
    let mut rep = ValidationReport::default();
    let m = &cfg.market;
    positive(&mut rep, "market.r0", m.r0);
    if !(m.r > m.r0) {
        rep.push("market.r", format!("must exceed r0 = {}, got {}", m.r0, m.r));
    }
    positive(&mut rep, "market.sigma", m.sigma);
    if !m.beta.is_finite() {
        rep.push("market.beta", format!("must be finite, got {}", m.beta));
    }
    positive(&mut rep, "market.s0", m.s0);
    positive(&mut rep, "market.T", m.horizon);

    let c = &cfg.claims;
    positive(&mut rep, "claims.a1", c.a1);
    positive(&mut rep, "claims.a2", c.a2);
    positive(&mut rep, "claims.sigma1", c.sigma1);
    positive(&mut rep, "claims.sigma2", c.sigma2);
    positive(&mut rep, "claims.theta1", c.theta1);
    positive(&mut rep, "claims.theta2", c.theta2);
    if !(c.theta_bar > c.theta1.max(c.theta2)) {
        rep.push(
            "claims.theta_bar",
            format!(
                "must exceed max(theta1, theta2) = {}, got {}",
                c.theta1.max(c.theta2),
                c.theta_bar
            ),
        );
    }
    if c.rho < 0.0 {
        rep.push(
            "claims.rho",
            format!("negative correlation is unsupported, got {}", c.rho),
        );
    } else if !(c.rho < 1.0) {
        rep.push("claims.rho", format!("must lie in [0, 1), got {}", c.rho));
    }

    let p = &cfg.prefs;
    positive(&mut rep, "prefs.gamma_L", p.gamma_l);
    positive(&mut rep, "prefs.gamma1", p.gamma1);
    positive(&mut rep, "prefs.gamma2", p.gamma2);
    for (name, k) in [("prefs.k1", p.k1), ("prefs.k2", p.k2)] {
        if !(0.0..=1.0).contains(&k) {
            rep.push(name, format!("must lie in [0, 1], got {k}"));
        }
    }
    if !(p.k1 * p.k2 < 1.0) {
        rep.push("prefs.k1*k2", format!("k1 k2 < 1 violated: {}", p.k1 * p.k2));
    }
    let kkr = p.k1 * p.k2 * c.rho * c.rho;
    if !(kkr < 1.0) {
        rep.push("prefs.k1*k2*rho^2", format!("k1 k2 rho^2 < 1 violated: {kkr}"));
    }

    let mut coeffs = [None, None, None];
    for (slot, (name, spec)) in [
        ("delay_L", &cfg.delay_l),
        ("delay_1", &cfg.delay_1),
        ("delay_2", &cfg.delay_2),
    ]
    .into_iter()
    .enumerate()
    {
        match derive_delay_coefficients(spec, m.r0) {
            Ok(co) => coeffs[slot] = Some(co),
            Err(e) => rep.push(name, e.to_string()),
        }
    }
    if coeffs[1].is_some() && coeffs[2].is_some() {
        let k1 = kappa(&cfg.delay_1, m.r0);
        let k2 = kappa(&cfg.delay_2, m.r0);
        let scale = k1.abs().max(k2.abs()).max(f64::MIN_POSITIVE);
        if (k1 - k2).abs() > KAPPA_MATCH_TOL * scale {
            rep.push(
                "delay_2",
                format!("A1+eta1 = {k1} differs from A2+eta2 = {k2} (mismatch {:e})", k1 - k2),
            );
        }
    }

    positive(&mut rep, "wealth.x_L0", cfg.x_l0);
    positive(&mut rep, "wealth.x10", cfg.x10);
    positive(&mut rep, "wealth.x20", cfg.x20);

    let band = premium_bounds(c);
    if let Err(e) = &band {
        rep.push("claims.theta_bar", e.to_string());
    }

    if !rep.is_empty() {
        return Err(Error::Validation(rep));
    }
    let (c_f, c_bar) = band.expect("checked above");
    Ok(CheckedScenario {
        cfg: *cfg,
        coeffs_l: coeffs[0].expect("checked"),
        coeffs_1: coeffs[1].expect("checked"),
        coeffs_2: coeffs[2].expect("checked"),
        c_f,
        c_bar,
    })
}

impl CheckedScenario {
    pub fn config(&self) -> &ScenarioConfig {
        &self.cfg
    }

    pub fn market(&self) -> &FinancialMarket {
        &self.cfg.market
    }

    pub fn claims(&self) -> &ClaimModel {
        &self.cfg.claims
    }

    pub fn prefs(&self) -> &Preferences {
        &self.cfg.prefs
    }

    pub fn horizon(&self) -> f64 {
        self.cfg.market.horizon
    }

    pub fn coeffs_l(&self) -> &DerivedDelayCoeffs {
        &self.coeffs_l
    }

    pub fn coeffs(&self, i: Insurer) -> &DerivedDelayCoeffs {
        match i {
            Insurer::One => &self.coeffs_1,
            Insurer::Two => &self.coeffs_2,
        }
    }

    pub fn c_f(&self) -> f64 {
        self.c_f
    }

    pub fn c_bar(&self) -> f64 {
        self.c_bar
    }

    /// A_L + eta_L.
    pub fn kappa_l(&self) -> f64 {
        self.coeffs_l.a + self.cfg.delay_l.eta
    }

    /// A_1 + eta_1 (= A_2 + eta_2).
    pub fn kappa_f(&self) -> f64 {
        self.coeffs_1.a + self.cfg.delay_1.eta
    }

    pub fn a(&self, i: Insurer) -> f64 {
        self.cfg.claims.a(i)
    }

    pub fn sigma_c(&self, i: Insurer) -> f64 {
        self.cfg.claims.sigma(i)
    }

    pub fn theta(&self, i: Insurer) -> f64 {
        self.cfg.claims.theta(i)
    }

    pub fn rho(&self) -> f64 {
        self.cfg.claims.rho
    }

    pub fn gamma_l(&self) -> f64 {
        self.cfg.prefs.gamma_l
    }

    pub fn gamma(&self, i: Insurer) -> f64 {
        self.cfg.prefs.gamma(i)
    }

    pub fn k(&self, i: Insurer) -> f64 {
        self.cfg.prefs.k(i)
    }

    /// Cross-retention coefficient k_i rho sigma_j / sigma_i.
    pub fn cross(&self, i: Insurer) -> f64 {
        let j = i.other();
        self.k(i) * self.rho() * self.sigma_c(j) / self.sigma_c(i)
    }

    /// K = 1 / (1 - k1 k2 rho^2).
    pub fn big_k(&self) -> f64 {
        let p = &self.cfg.prefs;
        1.0 / (1.0 - p.k1 * p.k2 * self.rho() * self.rho())
    }

    pub fn eta_l(&self) -> f64 {
        self.cfg.delay_l.eta
    }

    pub fn eta(&self, i: Insurer) -> f64 {
        self.cfg.delay(i).eta
    }

    /// Integrated delayed wealth at time 0 for an agent whose history is constant x0.
    pub fn initial_y(spec: &DelaySpec, x0: f64) -> f64 {
        if spec.is_none() {
            0.0
        } else {
            x0 * (1.0 - spec.decay()) / spec.alpha
        }
    }

    pub fn y0_l(&self) -> f64 {
        Self::initial_y(&self.cfg.delay_l, self.cfg.x_l0)
    }

    pub fn y0(&self, i: Insurer) -> f64 {
        Self::initial_y(self.cfg.delay(i), self.cfg.x0(i))
    }

    /// The same scenario with all memory switched off.
    pub fn without_delay(&self) -> CheckedScenario {
        validate(&self.cfg.without_delay()).expect("removing delay keeps a valid scenario valid")
    }
}

// ---------------------------------------------------------------------------
// Scenario files

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct MarketSection {
    r0: f64,
    r: f64,
    sigma: f64,
    beta: f64,
    s0: f64,
    #[serde(rename = "T")]
    horizon: f64,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct ClaimsSection {
    a1: Option<f64>,
    a2: Option<f64>,
    lambda1: Option<f64>,
    lambda2: Option<f64>,
    mu1: Option<f64>,
    mu2: Option<f64>,
    sigma1: Option<f64>,
    sigma2: Option<f64>,
    second_moment1: Option<f64>,
    second_moment2: Option<f64>,
    lambda_common: Option<f64>,
    rho: Option<f64>,
    theta1: f64,
    theta2: f64,
    theta_bar: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ReinsurerSection {
    gamma: f64,
    h: f64,
    alpha: f64,
    eta: f64,
    x0: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct InsurerSection {
    gamma: f64,
    k: f64,
    h: f64,
    alpha: f64,
    eta: Option<f64>,
    x0: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioFile {
    market: MarketSection,
    claims: ClaimsSection,
    reinsurer: ReinsurerSection,
    insurer1: InsurerSection,
    insurer2: InsurerSection,
}

fn pick(name: &str, direct: Option<f64>, derived: Option<f64>, how: &str) -> std::result::Result<f64, String> {
    match (direct, derived) {
        (Some(v), None) => Ok(v),
        (None, Some(v)) => Ok(v),
        (Some(_), Some(_)) => Err(format!("claims.{name} given both directly and via {how}")),
        (None, None) => Err(format!("claims.{name} missing (give it directly or via {how})")),
    }
}

impl ClaimsSection {
    fn resolve(&self) -> std::result::Result<ClaimModel, String> {
        let prod = |x: Option<f64>, y: Option<f64>| x.zip(y).map(|(x, y)| x * y);
        let a1 = pick("a1", self.a1, prod(self.lambda1, self.mu1), "lambda1 * mu1")?;
        let a2 = pick("a2", self.a2, prod(self.lambda2, self.mu2), "lambda2 * mu2")?;
        let s1 = pick(
            "sigma1",
            self.sigma1,
            prod(self.lambda1, self.second_moment1).map(f64::sqrt),
            "sqrt(lambda1 * second_moment1)",
        )?;
        let s2 = pick(
            "sigma2",
            self.sigma2,
            prod(self.lambda2, self.second_moment2).map(f64::sqrt),
            "sqrt(lambda2 * second_moment2)",
        )?;
        let from_common = match (self.lambda_common, self.mu1, self.mu2) {
            (Some(l), Some(m1), Some(m2)) => Some(l * m1 * m2 / (s1 * s2)),
            _ => None,
        };
        let rho = pick(
            "rho",
            self.rho,
            from_common,
            "lambda_common * mu1 * mu2 / (sigma1 sigma2)",
        )?;
        Ok(ClaimModel {
            a1,
            a2,
            sigma1: s1,
            sigma2: s2,
            theta1: self.theta1,
            theta2: self.theta2,
            rho,
            theta_bar: self.theta_bar,
        })
    }
}

/// A parsed scenario file. Keeps track of whether insurer 2's eta was supplied,
/// so that parameter sweeps can re-derive it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Scenario {
    pub config: ScenarioConfig,
    pub eta2_derived: bool,
}

impl Scenario {
    /// The built-in default scenario, with insurer 2's eta derived.
    pub fn paper_default() -> Scenario {
        Scenario {
            config: ScenarioConfig::paper_default(),
            eta2_derived: true,
        }
    }

    pub fn parse(text: &str) -> Result<Scenario> {
        let file: ScenarioFile = toml::from_str(text).map_err(|e| Error::ScenarioFile(e.to_string()))?;
        let claims = file.claims.resolve().map_err(Error::ScenarioFile)?;
        let market = FinancialMarket {
            r0: file.market.r0,
            r: file.market.r,
            sigma: file.market.sigma,
            beta: file.market.beta,
            s0: file.market.s0,
            horizon: file.market.horizon,
        };
        let delay_1 = DelaySpec {
            h: file.insurer1.h,
            alpha: file.insurer1.alpha,
            eta: file
                .insurer1
                .eta
                .ok_or_else(|| Error::ScenarioFile("insurer1.eta is required".to_string()))?,
        };
        let mut scenario = Scenario {
            config: ScenarioConfig {
                market,
                claims,
                prefs: Preferences {
                    gamma_l: file.reinsurer.gamma,
                    gamma1: file.insurer1.gamma,
                    gamma2: file.insurer2.gamma,
                    k1: file.insurer1.k,
                    k2: file.insurer2.k,
                },
                delay_l: DelaySpec {
                    h: file.reinsurer.h,
                    alpha: file.reinsurer.alpha,
                    eta: file.reinsurer.eta,
                },
                delay_1,
                delay_2: DelaySpec {
                    h: file.insurer2.h,
                    alpha: file.insurer2.alpha,
                    eta: file.insurer2.eta.unwrap_or(f64::NAN),
                },
                x_l0: file.reinsurer.x0,
                x10: file.insurer1.x0,
                x20: file.insurer2.x0,
            },
            eta2_derived: file.insurer2.eta.is_none(),
        };
        scenario.rederive()?;
        Ok(scenario)
    }

    pub fn load(path: &Path) -> Result<Scenario> {
        let text =
            std::fs::read_to_string(path).map_err(|e| Error::ScenarioFile(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    /// Re-derive eta2 if it was not supplied. A memoryless insurer 1 makes insurer 2
    /// memoryless as well.
    pub fn rederive(&mut self) -> Result<()> {
        if !self.eta2_derived {
            return Ok(());
        }
        let cfg = &mut self.config;
        if cfg.delay_1.is_none() {
            cfg.delay_2.eta = 0.0;
            return Ok(());
        }
        cfg.delay_2.eta = derive_eta2(&cfg.delay_1, cfg.delay_2.h, cfg.delay_2.alpha, cfg.market.r0)?;
        Ok(())
    }

    /// Set a parameter by path, re-deriving eta2 when it is a derived quantity.
    pub fn set_param(&mut self, path: &str, value: f64) -> Result<()> {
        if self.eta2_derived && matches!(path, "delay_2.eta" | "insurer2.eta") {
            return Err(Error::ScenarioFile(
                "insurer2.eta is derived in this scenario and cannot be swept".to_string(),
            ));
        }
        self.config.set_param(path, value)?;
        self.rederive()
    }

    pub fn check(&self) -> Result<CheckedScenario> {
        validate(&self.config)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / a.abs().max(b.abs()).max(1e-300)
    }

    #[test]
    fn delay_coefficients_satisfy_constraints() {
        let spec = DelaySpec {
            h: 2.0,
            alpha: 0.5,
            eta: 0.05,
        };
        let co = derive_delay_coefficients(&spec, 0.05).unwrap();
        assert!((co.a - 0.003910502801).abs() < 1e-9, "A = {}", co.a);
        assert!((co.a + spec.eta - 0.05391050280135989).abs() < 1e-14);
        assert!(rel(co.a, 0.05 - co.b - co.c) < 1e-12);
        assert!(rel(co.c, 0.05 * (-1.0f64).exp()) < 1e-12);
        assert!(rel(co.b * spec.decay(), (spec.alpha + co.a + spec.eta) * co.c) < 1e-12);
    }

    #[test]
    fn reinsurer_default_constraints() {
        let spec = DelaySpec {
            h: 2.0,
            alpha: 0.3,
            eta: 0.05,
        };
        let co = derive_delay_coefficients(&spec, 0.05).unwrap();
        assert!(rel(co.c, 0.05 * (-0.6f64).exp()) < 1e-12);
        assert!(rel(co.b * (-0.6f64).exp(), (0.3 + co.a + 0.05) * co.c) < 1e-12);
    }

    #[test]
    fn tiny_eta_degenerates_to_no_delay() {
        let spec = DelaySpec {
            h: 2.0,
            alpha: 0.5,
            eta: 1e-12,
        };
        let co = derive_delay_coefficients(&spec, 0.05).unwrap();
        assert!((co.a - 0.05).abs() < 1e-11);
        assert!(co.b.abs() < 1e-11 && co.c.abs() < 1e-11);
    }

    #[test]
    fn invalid_delay_spec_rejected() {
        let spec = DelaySpec {
            h: -1.0,
            alpha: 0.5,
            eta: 0.05,
        };
        assert!(matches!(
            derive_delay_coefficients(&spec, 0.05),
            Err(Error::InvalidDelaySpec { .. })
        ));
    }

    #[test]
    fn eta2_default_and_symmetric() {
        let d1 = DelaySpec {
            h: 2.0,
            alpha: 0.5,
            eta: 0.05,
        };
        let eta2 = derive_eta2(&d1, 3.0, 0.3, 0.05).unwrap();
        assert!((eta2 - 0.016326425580699258).abs() < 1e-12, "{eta2}");
        let k2 = kappa(
            &DelaySpec {
                h: 3.0,
                alpha: 0.3,
                eta: eta2,
            },
            0.05,
        );
        assert!(rel(k2, kappa(&d1, 0.05)) < 1e-12);
        assert!(rel(derive_eta2(&d1, 2.0, 0.5, 0.05).unwrap(), 0.05) < 1e-14);
    }

    #[test]
    fn eta2_out_of_range() {
        // Insurer 2 with a huge averaging rate cannot match insurer 1.
        let d1 = DelaySpec {
            h: 2.0,
            alpha: 0.5,
            eta: 0.9,
        };
        assert!(matches!(
            derive_eta2(&d1, 0.01, 0.01, 0.05),
            Err(Error::EtaOutOfRange { .. })
        ));
    }

    #[test]
    fn default_band() {
        let cfg = ScenarioConfig::paper_default();
        let (c_f, c_bar) = premium_bounds(&cfg.claims).unwrap();
        assert!((c_f - 8.8).abs() < 1e-12);
        assert!((c_bar - 12.0).abs() < 1e-12);
    }

    #[test]
    fn narrow_band() {
        let eps = 1e-3;
        let claims = ClaimModel {
            a1: 4.0,
            a2: 4.0,
            sigma1: 1.0,
            sigma2: 1.0,
            theta1: 2.0 - eps,
            theta2: 2.0 - eps,
            rho: 0.0,
            theta_bar: 2.0,
        };
        let (c_f, c_bar) = premium_bounds(&claims).unwrap();
        assert!(((c_bar - c_f) - 4.0 * eps).abs() < 1e-12);
        let degenerate = ClaimModel {
            theta_bar: 1.5,
            ..claims
        };
        assert!(matches!(premium_bounds(&degenerate), Err(Error::DegenerateBand { .. })));
    }

    #[test]
    fn default_validates() {
        let checked = validate(&ScenarioConfig::paper_default()).unwrap();
        assert!(rel(checked.kappa_l(), kappa(&checked.config().delay_l, 0.05)) < 1e-14);
        assert!((checked.kappa_f() - 0.05391050280135989).abs() < 1e-14);
    }

    #[test]
    fn full_competition_rejected() {
        let mut cfg = ScenarioConfig::paper_default();
        cfg.prefs.k1 = 1.0;
        cfg.prefs.k2 = 1.0;
        cfg.claims.rho = 1.0;
        let Err(Error::Validation(rep)) = validate(&cfg) else {
            panic!("expected validation failure")
        };
        assert!(rep.mentions("prefs.k1*k2*rho^2"));
        assert!(rep.mentions("prefs.k1*k2"));
        assert!(rep.mentions("claims.rho"));
    }

    #[test]
    fn kappa_mismatch_reported_with_magnitude() {
        let mut cfg = ScenarioConfig::paper_default();
        // Shift eta1 so that A1 + eta1 moves by about 1e-3.
        let target = kappa(&cfg.delay_1, cfg.market.r0) + 1e-3;
        let mut lo = cfg.delay_1.eta;
        let mut hi = 0.5;
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            let k = kappa(
                &DelaySpec {
                    eta: mid,
                    ..cfg.delay_1
                },
                cfg.market.r0,
            );
            if k < target {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        cfg.delay_1.eta = lo;
        let Err(Error::Validation(rep)) = validate(&cfg) else {
            panic!("expected validation failure")
        };
        let v = rep.violations.iter().find(|v| v.field == "delay_2").unwrap();
        assert!(v.message.contains("mismatch"), "{}", v.message);
        assert!(v.message.contains("e-3") || v.message.contains("e-4"), "{}", v.message);
    }

    #[test]
    fn validation_collects_everything() {
        let mut cfg = ScenarioConfig::paper_default();
        cfg.market.sigma = -1.0;
        cfg.prefs.gamma_l = 0.0;
        cfg.claims.rho = -0.2;
        cfg.x10 = -5.0;
        let Err(Error::Validation(rep)) = validate(&cfg) else {
            panic!("expected validation failure")
        };
        assert_eq!(rep.violations.len(), 4, "{rep}");
        let rho = rep.violations.iter().find(|v| v.field == "claims.rho").unwrap();
        assert!(rho.message.contains("unsupported"));
    }

    #[test]
    fn raw_claims_derivation() {
        let raw = RawClaims {
            lambda1: 0.8,
            lambda2: 1.0,
            lambda_common: 0.2,
            mu1: 5.0,
            mu2: 4.0,
            second_moment1: 11.25,
            second_moment2: 4.0,
        };
        let c = ClaimModel::from_raw(&raw, 1.2, 1.0, 2.0);
        assert!(rel(c.a1, 4.0) < 1e-15 && rel(c.a2, 4.0) < 1e-15);
        assert!(rel(c.sigma1, 3.0) < 1e-15 && rel(c.sigma2, 2.0) < 1e-15);
        assert!(rel(c.rho, 0.2 * 20.0 / 6.0) < 1e-15);
    }

    #[test]
    fn no_delay_scenario_is_valid() {
        let checked = validate(&ScenarioConfig::paper_default()).unwrap().without_delay();
        assert_eq!(checked.kappa_l(), 0.05);
        assert_eq!(checked.kappa_f(), 0.05);
        assert_eq!(checked.y0_l(), 0.0);
    }

    #[test]
    fn set_param_paths() {
        let mut cfg = ScenarioConfig::paper_default();
        cfg.set_param("prefs.gamma_L", 0.7).unwrap();
        cfg.set_param("insurer1.k", 0.1).unwrap();
        assert_eq!(cfg.prefs.gamma_l, 0.7);
        assert_eq!(cfg.prefs.k1, 0.1);
        assert!(cfg.set_param("prefs.nonsense", 1.0).is_err());
    }
}
