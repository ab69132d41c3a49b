//! Seeded Monte Carlo of the asset price and the three delayed wealth equations.
//!
//! Wealth follows an Euler-Maruyama step. The integrated delay Y is advanced by
//! an exact recursion of the trapezoid rule over the lookback window, so it
//! always equals the trapezoid sum over the ring buffer. The price is advanced
//! in U = S^{-beta}, whose drift-implicit step stays positive; investment
//! amounts scale like S^{-2 beta}, so the exposure b sigma S^beta equals a
//! deterministic coefficient times U.

use std::fmt;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::equilibrium::{equilibrium_point, follower_response, investment_strategies};
use crate::error::{Error, Result};
use crate::kernels::eval_case_constants;
use crate::params::{CheckedScenario, DelaySpec, Insurer};
use crate::value::{g2_eval, value_f_with, value_l_with};

/// Prices are clamped to this floor; a path that reaches it is flagged.
pub const PRICE_FLOOR: f64 = 1e-8;
/// Largest acceptable fraction of flagged paths.
pub const MAX_FLAGGED_FRACTION: f64 = 1e-3;
/// Environment variable capping the number of worker threads.
pub const THREADS_ENV: &str = "STACKGAME_THREADS";

/// Time grid, path count and seed of a run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimConfig {
    pub dt: f64,
    pub n_paths: usize,
    pub seed: u64,
    pub t_start: f64,
    pub t_end: f64,
}

impl SimConfig {
    /// A run over the whole horizon with the default step of 1e-3 years.
    pub fn full_horizon(cfg: &CheckedScenario, n_paths: usize, seed: u64) -> SimConfig {
        SimConfig {
            dt: 1e-3,
            n_paths,
            seed,
            t_start: 0.0,
            t_end: cfg.horizon(),
        }
    }

    /// Number of steps between t_start and t_end.
    pub fn n_steps(&self) -> usize {
        ((self.t_end - self.t_start) / self.dt).round() as usize
    }

    /// Check the grid against the scenario: dt must divide every delay length
    /// and the simulated span.
    pub fn check(&self, cfg: &CheckedScenario) -> Result<()> {
        let bad = |msg: String| Err(Error::SimConfig(msg));
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return bad(format!("dt must be > 0, got {}", self.dt));
        }
        if self.n_paths == 0 {
            return bad("n_paths must be >= 1".to_string());
        }
        if !(self.t_start >= 0.0 && self.t_start < self.t_end && self.t_end <= cfg.horizon() + 1e-9) {
            return bad(format!(
                "need 0 <= t_start < t_end <= T = {}, got [{}, {}]",
                cfg.horizon(),
                self.t_start,
                self.t_end
            ));
        }
        let divides = |len: f64| (len - (len / self.dt).round() * self.dt).abs() <= 1e-9;
        if !divides(self.t_end - self.t_start) {
            return bad(format!(
                "dt = {} does not divide the span {}",
                self.dt,
                self.t_end - self.t_start
            ));
        }
        let c = cfg.config();
        for (name, spec) in [
            ("reinsurer", c.delay_l),
            ("insurer1", c.delay_1),
            ("insurer2", c.delay_2),
        ] {
            if !spec.is_none() && !divides(spec.h) {
                return bad(format!("dt = {} does not divide {name}.h = {}", self.dt, spec.h));
            }
        }
        Ok(())
    }
}

/// Strategy amounts applied over one step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Controls {
    pub p: f64,
    pub q1: f64,
    pub q2: f64,
    /// Amounts invested in the risky asset by the reinsurer and the insurers.
    pub b: [f64; 3],
}

/// Brownian increments over one step; dw1 and dw2 are correlated, dw independent.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Increments {
    pub dw1: f64,
    pub dw2: f64,
    pub dw: f64,
}

/// Wealth values on the grid over the lookback window [t - h, t], oldest first.
#[derive(Debug, Clone, PartialEq)]
pub struct History {
    buf: Vec<f64>,
    head: usize,
}

impl History {
    /// A window of `lag_steps + 1` nodes filled with the constant history x0.
    pub fn constant(x0: f64, lag_steps: usize) -> History {
        History {
            buf: vec![x0; lag_steps + 1],
            head: 0,
        }
    }

    pub fn len(&self) -> usize {
        self.buf.len()
    }

    pub fn is_empty(&self) -> bool {
        self.buf.is_empty()
    }

    /// Node k of the window, k = 0 being the oldest (time t - h).
    pub fn get(&self, k: usize) -> f64 {
        self.buf[(self.head + k) % self.buf.len()]
    }

    /// Drop the oldest node and append the newest.
    fn push(&mut self, x: f64) {
        self.buf[self.head] = x;
        self.head = (self.head + 1) % self.buf.len();
    }
}

/// Per-agent constants of the wealth equation on the simulation grid.
#[derive(Debug, Clone, Copy, PartialEq)]
struct AgentModel {
    a: f64,
    b: f64,
    c: f64,
    alpha: f64,
    lag_steps: usize,
    has_memory: bool,
    /// e^{-alpha dt}, e^{-alpha h}, e^{-alpha (h + dt)}.
    decay_dt: f64,
    decay_h: f64,
    decay_h_dt: f64,
}

impl AgentModel {
    fn new(spec: &DelaySpec, a: f64, b: f64, c: f64, dt: f64) -> AgentModel {
        let has_memory = !spec.is_none();
        AgentModel {
            a,
            b,
            c,
            alpha: spec.alpha,
            lag_steps: if has_memory { (spec.h / dt).round() as usize } else { 0 },
            has_memory,
            decay_dt: (-spec.alpha * dt).exp(),
            decay_h: spec.decay(),
            decay_h_dt: (-spec.alpha * (spec.h + dt)).exp(),
        }
    }

    /// Trapezoid sum of e^{-alpha (t - u)} X(u) du over the window.
    fn trapezoid(&self, hist: &History, dt: f64) -> f64 {
        if !self.has_memory {
            return 0.0;
        }
        let n = hist.len() - 1;
        let mut sum = 0.0;
        for k in 0..=n {
            let w = if k == 0 || k == n { 0.5 } else { 1.0 };
            sum += w * (-self.alpha * (n - k) as f64 * dt).exp() * hist.get(k);
        }
        sum * dt
    }
}

/// Model constants of one scenario on one time grid.
#[derive(Debug, Clone, PartialEq)]
pub struct SimModel {
    dt: f64,
    sqrt_dt: f64,
    r: f64,
    r0: f64,
    sigma: f64,
    beta: f64,
    a: [f64; 2],
    theta: [f64; 2],
    sigma_c: [f64; 2],
    rho: f64,
    rho_perp: f64,
    agents: [AgentModel; 3],
}

impl SimModel {
    pub fn new(cfg: &CheckedScenario, dt: f64) -> SimModel {
        use Insurer::{One, Two};
        let m = cfg.market();
        let c = cfg.config();
        let agent =
            |spec: &DelaySpec, co: &crate::params::DerivedDelayCoeffs| AgentModel::new(spec, co.a, co.b, co.c, dt);
        SimModel {
            dt,
            sqrt_dt: dt.sqrt(),
            r: m.r,
            r0: m.r0,
            sigma: m.sigma,
            beta: m.beta,
            a: [cfg.a(One), cfg.a(Two)],
            theta: [cfg.theta(One), cfg.theta(Two)],
            sigma_c: [cfg.sigma_c(One), cfg.sigma_c(Two)],
            rho: cfg.rho(),
            rho_perp: (1.0 - cfg.rho() * cfg.rho()).sqrt(),
            agents: [
                agent(&c.delay_l, cfg.coeffs_l()),
                agent(&c.delay_1, cfg.coeffs(One)),
                agent(&c.delay_2, cfg.coeffs(Two)),
            ],
        }
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    /// Correlated increments from three independent standard normals.
    pub fn increments(&self, n: [f64; 3]) -> Increments {
        Increments {
            dw1: self.sqrt_dt * n[0],
            dw2: self.sqrt_dt * (self.rho * n[0] + self.rho_perp * n[1]),
            dw: self.sqrt_dt * n[2],
        }
    }

    /// U = S^{-beta}; equal to 1 when beta = 0.
    fn u_of(&self, s: f64) -> f64 {
        if self.beta == 0.0 {
            1.0
        } else {
            s.powf(-self.beta)
        }
    }
}

/// One simulated path: time, price (held as U = S^{-beta} when beta > 0), wealth, delay windows and the integrated
/// and lagged delay terms of the reinsurer (index 0) and the insurers (1, 2).
#[derive(Debug, Clone, PartialEq)]
pub struct PathState {
    pub t: f64,
    s: f64,
    u: f64,
    pub x: [f64; 3],
    pub y: [f64; 3],
    pub z: [f64; 3],
    pub history: [History; 3],
    pub flagged: bool,
}

impl PathState {
    /// State at `t0` after a constant wealth history x0 on [t0 - h, t0].
    pub fn initial(cfg: &CheckedScenario, model: &SimModel, t0: f64) -> PathState {
        let c = cfg.config();
        let x0 = [c.x_l0, c.x10, c.x20];
        let history: [History; 3] = std::array::from_fn(|k| History::constant(x0[k], model.agents[k].lag_steps));
        let y = std::array::from_fn(|k| model.agents[k].trapezoid(&history[k], model.dt));
        let s = cfg.market().s0;
        PathState {
            t: t0,
            s,
            u: model.u_of(s),
            x: x0,
            y,
            z: std::array::from_fn(|k| history[k].get(0)),
            history,
            flagged: false,
        }
    }

    /// Current asset price.
    pub fn s(&self, model: &SimModel) -> f64 {
        if model.beta == 0.0 {
            self.s
        } else {
            self.u.powf(-1.0 / model.beta)
        }
    }

    /// Y of agent k recomputed from the ring buffer by the trapezoid rule.
    pub fn recomputed_y(&self, k: usize, model: &SimModel) -> f64 {
        model.agents[k].trapezoid(&self.history[k], model.dt)
    }

    /// Terminal wealth X + eta Y of each agent.
    pub fn delayed_wealth(&self, cfg: &CheckedScenario) -> [f64; 3] {
        let eta = [cfg.eta_l(), cfg.eta(Insurer::One), cfg.eta(Insurer::Two)];
        std::array::from_fn(|k| self.x[k] + eta[k] * self.y[k])
    }
}

/// Advance a path by one step. Returns true if the price had to be clamped.
pub fn step(state: &mut PathState, ctl: &Controls, inc: &Increments, model: &SimModel) -> bool {
    let dt = model.dt;
    let [a1, a2] = model.a;
    let [s1, s2] = model.sigma_c;
    let (c1, c2) = (1.0 - ctl.q1, 1.0 - ctl.q2);
    // sigma S^beta dW, with S^beta = 1/U.
    let exposure = model.sigma * inc.dw / state.u;
    let excess = model.r - model.r0;

    let claims = [
        (
            (ctl.p - a1) * c1 + (ctl.p - a2) * c2,
            c1 * s1 * inc.dw1 + c2 * s2 * inc.dw2,
        ),
        (model.theta[0] * a1 - (ctl.p - a1) * c1, ctl.q1 * s1 * inc.dw1),
        (model.theta[1] * a2 - (ctl.p - a2) * c2, ctl.q2 * s2 * inc.dw2),
    ];
    for (k, (drift, noise)) in claims.into_iter().enumerate() {
        let ag = &model.agents[k];
        let x = state.x[k];
        let full_drift = drift + ag.a * x + ag.b * state.y[k] + ag.c * state.z[k] + excess * ctl.b[k];
        let x_new = x + full_drift * dt + noise + ctl.b[k] * exposure;
        if ag.has_memory {
            let hist = &mut state.history[k];
            let (oldest, next) = (hist.get(0), hist.get(1.min(hist.len() - 1)));
            state.y[k] = ag.decay_dt * state.y[k] + 0.5 * dt * (ag.decay_dt * x + x_new)
                - 0.5 * dt * (ag.decay_h_dt * oldest + ag.decay_h * next);
            hist.push(x_new);
            state.z[k] = hist.get(0);
        } else {
            state.z[k] = x_new;
        }
        state.x[k] = x_new;
    }

    let mut clamped = false;
    if model.beta == 0.0 {
        state.s *= ((model.r - 0.5 * model.sigma * model.sigma) * dt + model.sigma * inc.dw).exp();
    } else {
        // Drift-implicit step of dU = [-beta r U + beta(beta+1) sigma^2 / (2U)] dt - beta sigma dW.
        let beta = model.beta;
        let m = state.u - beta * model.sigma * inc.dw;
        let lead = 1.0 + beta * model.r * dt;
        let c = 0.5 * beta * (beta + 1.0) * model.sigma * model.sigma * dt;
        state.u = (m + (m * m + 4.0 * lead * c).sqrt()) / (2.0 * lead);
        let u_floor = model.u_of(PRICE_FLOOR);
        if !(state.u.is_finite() && state.u < u_floor) {
            state.u = u_floor;
            clamped = true;
        }
    }
    if !(state.s.is_finite() && state.s > PRICE_FLOOR) {
        state.s = PRICE_FLOOR;
        clamped = true;
    }
    state.flagged |= clamped;
    state.t += dt;
    clamped
}

/// Strategy field that a perturbed policy scales.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PolicyField {
    P,
    Q1,
    Q2,
    Bl,
    B1,
    B2,
}

impl FromStr for PolicyField {
    type Err = Error;

    fn from_str(s: &str) -> Result<PolicyField> {
        Ok(match s {
            "p" => PolicyField::P,
            "q1" => PolicyField::Q1,
            "q2" => PolicyField::Q2,
            "bL" | "b_L" | "bl" => PolicyField::Bl,
            "b1" => PolicyField::B1,
            "b2" => PolicyField::B2,
            _ => {
                return Err(Error::SimConfig(format!(
                    "unknown policy field `{s}` (p, q1, q2, bL, b1, b2)"
                )))
            }
        })
    }
}

/// Which strategy drives the simulated wealth.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Policy {
    /// The closed-form equilibrium with memory.
    Equilibrium,
    /// The equilibrium computed as if no agent had memory, applied to the delayed dynamics.
    NoDelay,
    /// The equilibrium with one field scaled. A scaled premium is clamped to the
    /// band and the insurers answer it with their Nash retentions; scaled
    /// retentions are clamped to [0, 1].
    Perturb { field: PolicyField, factor: f64 },
}

impl FromStr for Policy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Policy> {
        match s {
            "equilibrium" => Ok(Policy::Equilibrium),
            "nodelay" => Ok(Policy::NoDelay),
            _ => {
                let spec = s.strip_prefix("perturb:").ok_or_else(|| {
                    Error::SimConfig(format!(
                        "unknown policy `{s}` (equilibrium, nodelay, perturb:<field>=<factor>)"
                    ))
                })?;
                let (field, factor) = spec
                    .split_once('=')
                    .ok_or_else(|| Error::SimConfig(format!("perturbation `{spec}` must read <field>=<factor>")))?;
                let factor: f64 = factor
                    .parse()
                    .map_err(|_| Error::SimConfig(format!("bad perturbation factor `{factor}`")))?;
                if !factor.is_finite() {
                    return Err(Error::SimConfig(format!("bad perturbation factor `{factor}`")));
                }
                Ok(Policy::Perturb {
                    field: field.parse()?,
                    factor,
                })
            }
        }
    }
}

impl fmt::Display for PolicyField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PolicyField::P => "p",
            PolicyField::Q1 => "q1",
            PolicyField::Q2 => "q2",
            PolicyField::Bl => "bL",
            PolicyField::B1 => "b1",
            PolicyField::B2 => "b2",
        })
    }
}

impl fmt::Display for Policy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Policy::Equilibrium => f.write_str("equilibrium"),
            Policy::NoDelay => f.write_str("nodelay"),
            Policy::Perturb { field, factor } => write!(f, "perturb:{field}={factor}"),
        }
    }
}

/// Strategy on the time grid. Investment amounts are stored at s = 1 and
/// scaled by S^{-2 beta} along the path.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyTable {
    rows: Vec<Controls>,
    beta: f64,
}

impl PolicyTable {
    pub fn build(cfg: &CheckedScenario, sim: &SimConfig, policy: Policy) -> Result<PolicyTable> {
        let source = match policy {
            Policy::NoDelay => cfg.without_delay(),
            _ => cfg.clone(),
        };
        let rows = (0..sim.n_steps())
            .map(|k| {
                let t = sim.t_start + k as f64 * sim.dt;
                let eq = equilibrium_point(t, 1.0, &source)?;
                let mut ctl = Controls {
                    p: eq.p_star,
                    q1: eq.q1_star,
                    q2: eq.q2_star,
                    b: [eq.bl_star, eq.b1_star, eq.b2_star],
                };
                if let Policy::Perturb { field, factor } = policy {
                    match field {
                        PolicyField::P => {
                            ctl.p = (ctl.p * factor).clamp(cfg.c_f(), cfg.c_bar());
                            let (q1, q2) = follower_response(&eval_case_constants(t, cfg), ctl.p, cfg);
                            ctl.q1 = q1;
                            ctl.q2 = q2;
                        }
                        PolicyField::Q1 => ctl.q1 = (ctl.q1 * factor).clamp(0.0, 1.0),
                        PolicyField::Q2 => ctl.q2 = (ctl.q2 * factor).clamp(0.0, 1.0),
                        PolicyField::Bl => ctl.b[0] *= factor,
                        PolicyField::B1 => ctl.b[1] *= factor,
                        PolicyField::B2 => ctl.b[2] *= factor,
                    }
                }
                Ok(ctl)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(PolicyTable {
            rows,
            beta: cfg.market().beta,
        })
    }

    /// Controls at step k and price s.
    pub fn controls(&self, k: usize, s: f64) -> Controls {
        self.controls_u(k, if self.beta == 0.0 { 1.0 } else { s.powf(-self.beta) })
    }

    /// Controls at step k given U = S^{-beta}.
    fn controls_u(&self, k: usize, u: f64) -> Controls {
        let mut c = self.rows[k];
        let scale = u * u;
        for b in &mut c.b {
            *b *= scale;
        }
        c
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }
}

/// Monte Carlo mean with its standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MCEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub n_paths: usize,
}

impl MCEstimate {
    /// Mean and standard error of the samples, summed pairwise.
    pub fn from_samples(xs: &[f64]) -> MCEstimate {
        let n = xs.len();
        let mean = pairwise_sum(xs) / n as f64;
        let dev: Vec<f64> = xs.iter().map(|x| (x - mean) * (x - mean)).collect();
        let var = if n > 1 {
            pairwise_sum(&dev) / (n - 1) as f64
        } else {
            0.0
        };
        MCEstimate {
            mean,
            std_error: (var / n as f64).sqrt(),
            n_paths: n,
        }
    }

    /// (mean - reference) / std_error.
    pub fn z_score(&self, reference: f64) -> f64 {
        (self.mean - reference) / self.std_error
    }
}

/// Order-fixed pairwise summation.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    if xs.len() <= 32 {
        return xs.iter().sum();
    }
    let mid = xs.len() / 2;
    pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
}

/// Terminal state of one path.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathTerminal {
    pub path_id: usize,
    pub x: [f64; 3],
    pub y: [f64; 3],
    pub s: f64,
    pub flagged: bool,
}

/// Estimates of the reinsurer's expected utility and both insurers' objectives.
#[derive(Debug, Clone, PartialEq)]
pub struct SimOutput {
    pub leader: MCEstimate,
    pub insurers: [MCEstimate; 2],
    pub flagged: usize,
    pub paths: Vec<PathTerminal>,
}

impl SimOutput {
    pub fn flagged_fraction(&self) -> f64 {
        self.flagged as f64 / self.leader.n_paths as f64
    }
}

/// Rayon pool sized by STACKGAME_THREADS when set to a positive integer.
pub fn thread_pool() -> Result<rayon::ThreadPool> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Ok(v) = std::env::var(THREADS_ENV) {
        let n: usize = v
            .trim()
            .parse()
            .ok()
            .filter(|&n| n > 0)
            .ok_or_else(|| Error::SimConfig(format!("{THREADS_ENV} must be a positive integer, got `{v}`")))?;
        builder = builder.num_threads(n);
    }
    builder
        .build()
        .map_err(|e| Error::SimConfig(format!("cannot start thread pool: {e}")))
}

/// Random generator of one path: the run seed with the path index as stream.
pub fn path_rng(seed: u64, path: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(path as u64);
    rng
}

fn simulate_path(
    path_id: usize,
    cfg: &CheckedScenario,
    sim: &SimConfig,
    model: &SimModel,
    table: &PolicyTable,
) -> PathTerminal {
    let mut rng = path_rng(sim.seed, path_id);
    let mut st = PathState::initial(cfg, model, sim.t_start);
    for k in 0..table.len() {
        let n: [f64; 3] = std::array::from_fn(|_| StandardNormal.sample(&mut rng));
        let inc = model.increments(n);
        let ctl = table.controls_u(k, st.u);
        step(&mut st, &ctl, &inc, model);
    }
    PathTerminal {
        path_id,
        x: st.x,
        y: st.y,
        s: st.s(model),
        flagged: st.flagged,
    }
}

/// Simulate `sim.n_paths` paths under `policy` and estimate E[U_L(X_L + eta_L Y_L)]
/// and E[U_i(W_i - k_i W_j)] with W = X + eta Y at t_end.
pub fn simulate_terminal_utilities(cfg: &CheckedScenario, sim: &SimConfig, policy: Policy) -> Result<SimOutput> {
    sim.check(cfg)?;
    let model = SimModel::new(cfg, sim.dt);
    let table = PolicyTable::build(cfg, sim, policy)?;
    let pool = thread_pool()?;
    let paths: Vec<PathTerminal> = pool.install(|| {
        (0..sim.n_paths)
            .into_par_iter()
            .map(|p| simulate_path(p, cfg, sim, &model, &table))
            .collect()
    });
    let eta = [cfg.eta_l(), cfg.eta(Insurer::One), cfg.eta(Insurer::Two)];
    let wealth = |pt: &PathTerminal| -> [f64; 3] { std::array::from_fn(|k| pt.x[k] + eta[k] * pt.y[k]) };
    let utility = |gamma: f64, w: f64| -(-gamma * w).exp() / gamma;
    let gl = cfg.gamma_l();
    let lead: Vec<f64> = paths.iter().map(|pt| utility(gl, wealth(pt)[0])).collect();
    let follower = |i: Insurer| -> Vec<f64> {
        let (a, b) = (i.number(), i.other().number());
        let (g, k) = (cfg.gamma(i), cfg.k(i));
        paths
            .iter()
            .map(|pt| {
                let w = wealth(pt);
                utility(g, w[a] - k * w[b])
            })
            .collect()
    };
    Ok(SimOutput {
        leader: MCEstimate::from_samples(&lead),
        insurers: [
            MCEstimate::from_samples(&follower(Insurer::One)),
            MCEstimate::from_samples(&follower(Insurer::Two)),
        ],
        flagged: paths.iter().filter(|p| p.flagged).count(),
        paths,
    })
}

/// Closed-form values of the reinsurer and both insurers at t0 and the initial
/// state: constant wealth history, Y(t0) = (x0/alpha)(1 - e^{-alpha h}), S = s0.
pub fn initial_values(cfg: &CheckedScenario, t0: f64) -> Result<[f64; 3]> {
    use Insurer::{One, Two};
    let c = cfg.config();
    let s0 = cfg.market().s0;
    let g2 = g2_eval(t0, cfg)?;
    let lead = value_l_with(&g2, c.x_l0, cfg.y0_l(), s0, cfg).value;
    let f = |i: Insurer| {
        let x_hat = c.x0(i) - cfg.k(i) * c.x0(i.other());
        value_f_with(&g2, x_hat, cfg.y0(i), cfg.y0(i.other()), s0, i, cfg).value
    };
    Ok([lead, f(One), f(Two)])
}

/// Investment coefficient check used by tests: amounts at s equal amounts at 1 times s^{-2 beta}.
pub fn investment_at(cfg: &CheckedScenario, t: f64, s: f64) -> [f64; 3] {
    let inv = investment_strategies(t, s, cfg);
    [inv.bl, inv.b1, inv.b2]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::{validate, ScenarioConfig};

    fn default_cfg() -> CheckedScenario {
        validate(&ScenarioConfig::paper_default()).unwrap()
    }

    fn short(cfg: &CheckedScenario, n_paths: usize) -> SimConfig {
        SimConfig {
            dt: 1e-2,
            n_paths,
            seed: 5,
            t_start: 0.0,
            t_end: cfg.horizon(),
        }
    }

    #[test]
    fn history_reads_initial_wealth() {
        let cfg = default_cfg();
        let model = SimModel::new(&cfg, 1e-3);
        let st = PathState::initial(&cfg, &model, 0.0);
        for k in 0..3 {
            let h = &st.history[k];
            assert!((0..h.len()).all(|n| h.get(n) == st.x[k]));
            assert_eq!(st.z[k], st.x[k]);
        }
        assert_eq!(st.history[0].len(), 2001);
        let exact = cfg.y0_l();
        assert!((st.y[0] - exact).abs() / exact < 1e-6);
    }

    #[test]
    fn null_dynamics_keep_wealth_constant() {
        let mut c = ScenarioConfig::paper_default().without_delay();
        c.market.r0 = 1e-300;
        c.market.r = 2e-300;
        c.claims.theta1 = 1e-300;
        c.claims.theta2 = 1e-300;
        let cfg = validate(&c).unwrap();
        let model = SimModel::new(&cfg, 1e-3);
        let mut st = PathState::initial(&cfg, &model, 0.0);
        let ctl = Controls {
            p: cfg.a(Insurer::One),
            q1: 1.0,
            q2: 1.0,
            b: [0.0; 3],
        };
        let inc = Increments {
            dw1: 0.0,
            dw2: 0.0,
            dw: 0.0,
        };
        let x0 = st.x;
        for _ in 0..100 {
            step(&mut st, &ctl, &inc, &model);
        }
        assert_eq!(st.x, x0);
    }

    #[test]
    fn full_retention_leaves_reinsurer_riskless() {
        let cfg = default_cfg();
        let model = SimModel::new(&cfg, 1e-3);
        let mut st = PathState::initial(&cfg, &model, 0.0);
        let ctl = Controls {
            p: 11.0,
            q1: 1.0,
            q2: 1.0,
            b: [0.0, 1.0, 1.0],
        };
        let inc = model.increments([1.3, -0.7, 2.1]);
        let ag = model.agents[0];
        let expect = st.x[0] + (ag.a * st.x[0] + ag.b * st.y[0] + ag.c * st.z[0]) * model.dt;
        step(&mut st, &ctl, &inc, &model);
        assert!((st.x[0] - expect).abs() < 1e-14);
    }

    #[test]
    fn incremental_y_matches_trapezoid_after_1000_steps() {
        let cfg = default_cfg();
        let sim = short(&cfg, 1);
        let model = SimModel::new(&cfg, 1e-3);
        let table = PolicyTable::build(&cfg, &SimConfig { dt: 1e-3, ..sim }, Policy::Equilibrium).unwrap();
        let mut rng = path_rng(9, 0);
        let mut st = PathState::initial(&cfg, &model, 0.0);
        for k in 0..1000 {
            let n: [f64; 3] = std::array::from_fn(|_| StandardNormal.sample(&mut rng));
            let ctl = table.controls(k, st.s(&model));
            step(&mut st, &ctl, &model.increments(n), &model);
        }
        for k in 0..3 {
            let rec = st.recomputed_y(k, &model);
            assert!(
                (st.y[k] - rec).abs() <= 1e-8 * rec.abs(),
                "agent {k}: {} vs {rec}",
                st.y[k]
            );
        }
    }

    #[test]
    fn increments_have_the_scenario_correlation() {
        let cfg = default_cfg();
        let model = SimModel::new(&cfg, 1.0);
        let mut rng = path_rng(1, 0);
        let n = 1_000_000;
        let (mut s12, mut s11, mut s22, mut s13, mut s33) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for _ in 0..n {
            let z: [f64; 3] = std::array::from_fn(|_| StandardNormal.sample(&mut rng));
            let inc = model.increments(z);
            s12 += inc.dw1 * inc.dw2;
            s11 += inc.dw1 * inc.dw1;
            s22 += inc.dw2 * inc.dw2;
            s13 += inc.dw1 * inc.dw;
            s33 += inc.dw * inc.dw;
        }
        let corr = s12 / (s11 * s22).sqrt();
        assert!((corr - cfg.rho()).abs() < 0.005, "{corr}");
        assert!((s13 / (s11 * s33).sqrt()).abs() < 0.005);
    }

    #[test]
    fn fixed_seed_is_bit_reproducible() {
        let cfg = default_cfg();
        let sim = short(&cfg, 1);
        let a = simulate_terminal_utilities(&cfg, &sim, Policy::Equilibrium).unwrap();
        let b = simulate_terminal_utilities(&cfg, &sim, Policy::Equilibrium).unwrap();
        assert_eq!(a, b);
        let many = simulate_terminal_utilities(&cfg, &short(&cfg, 8), Policy::Equilibrium).unwrap();
        assert_eq!(many.paths[0], a.paths[0]);
    }

    #[test]
    fn grid_must_divide_delays() {
        let cfg = default_cfg();
        let mut sim = short(&cfg, 1);
        sim.dt = 0.3;
        assert!(matches!(sim.check(&cfg), Err(Error::SimConfig(_))));
        sim.dt = 0.0;
        assert!(sim.check(&cfg).is_err());
        sim.dt = 1e-2;
        sim.n_paths = 0;
        assert!(sim.check(&cfg).is_err());
    }

    #[test]
    fn policy_parsing() {
        assert_eq!("equilibrium".parse::<Policy>().unwrap(), Policy::Equilibrium);
        assert_eq!("nodelay".parse::<Policy>().unwrap(), Policy::NoDelay);
        assert_eq!(
            "perturb:bL=1.5".parse::<Policy>().unwrap(),
            Policy::Perturb {
                field: PolicyField::Bl,
                factor: 1.5
            }
        );
        assert!("perturb:x=2".parse::<Policy>().is_err());
        assert!("perturb:p".parse::<Policy>().is_err());
        assert!("greedy".parse::<Policy>().is_err());
    }

    #[test]
    fn table_scales_investment_with_price() {
        let cfg = default_cfg();
        let sim = short(&cfg, 1);
        let table = PolicyTable::build(&cfg, &sim, Policy::Equilibrium).unwrap();
        let ctl = table.controls(100, 1.7);
        let direct = investment_at(&cfg, 1.0, 1.7);
        for k in 0..3 {
            assert!((ctl.b[k] - direct[k]).abs() < 1e-12 * direct[k].abs());
        }
    }

    #[test]
    fn pairwise_sum_matches_naive() {
        let xs: Vec<f64> = (0..1000).map(|k| k as f64 * 0.5).collect();
        assert_eq!(pairwise_sum(&xs), xs.iter().sum::<f64>());
        let est = MCEstimate::from_samples(&[1.0, 3.0]);
        assert_eq!(est.mean, 2.0);
        assert!((est.std_error - 1.0).abs() < 1e-15);
    }
}
