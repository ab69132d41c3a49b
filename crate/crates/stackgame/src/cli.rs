//! Command implementations behind the `stackgame` binary: strategy tables,
//! parameter sweeps, Monte Carlo runs and verification suites, with CSV output.

use std::io::Write;
use std::str::FromStr;

use crate::equilibrium::{equilibrium_point, no_delay_strategy, EquilibriumPoint};
use crate::error::{Error, Result};
use crate::params::{CheckedScenario, Scenario, ScenarioConfig};
use crate::sim::{
    initial_values, simulate_terminal_utilities, MCEstimate, Policy, SimConfig, SimOutput, MAX_FLAGGED_FRACTION,
};
use crate::verify::{run_suite, Suite, SuiteReport};

/// Significant digits written to CSV files.
pub const CSV_DIGITS: usize = 12;
/// Largest |z| accepted when comparing a Monte Carlo estimate with the closed form.
pub const MAX_Z: f64 = 3.0;

/// Format a number with 12 significant digits in plain notation where possible.
pub fn fmt_num(x: f64) -> String {
    if !x.is_finite() {
        return x.to_string();
    }
    let rounded: f64 = format!("{:.*e}", CSV_DIGITS - 1, x)
        .parse()
        .expect("formatted float parses");
    let plain = rounded.to_string();
    if plain.len() > 24 {
        format!("{rounded:e}")
    } else {
        plain
    }
}

fn csv_writer<W: Write>(out: W) -> csv::Writer<W> {
    csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(out)
}

/// An evaluation time grid `start:end:count`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGrid {
    pub start: f64,
    pub end: f64,
    pub count: usize,
}

fn parse_range(s: &str) -> Result<(f64, f64, usize)> {
    let parts: Vec<&str> = s.split(':').collect();
    let [a, b, n] = parts[..] else {
        return Err(Error::Argument(format!("`{s}` must read start:end:count")));
    };
    let num = |v: &str| {
        v.trim()
            .parse::<f64>()
            .ok()
            .filter(|x| x.is_finite())
            .ok_or_else(|| Error::Argument(format!("`{v}` is not a number")))
    };
    let count = n
        .trim()
        .parse::<usize>()
        .map_err(|_| Error::Argument(format!("`{n}` is not a count")))?;
    Ok((num(a)?, num(b)?, count))
}

impl FromStr for TimeGrid {
    type Err = Error;

    fn from_str(s: &str) -> Result<TimeGrid> {
        let (start, end, count) = parse_range(s)?;
        if count == 0 {
            return Err(Error::Argument("time grid is empty (count = 0)".to_string()));
        }
        if count > 1 && start == end {
            return Err(Error::Argument(
                "time grid with several points needs start != end".to_string(),
            ));
        }
        Ok(TimeGrid { start, end, count })
    }
}

impl TimeGrid {
    /// The grid times. Endpoints are returned as given; interior points are
    /// weighted averages of the endpoints, snapped to 1e-9 so integer times come out exact.
    pub fn times(&self) -> Vec<f64> {
        if self.count == 1 {
            return vec![self.start];
        }
        let n = (self.count - 1) as f64;
        (0..self.count)
            .map(|k| {
                if k == 0 {
                    return self.start;
                }
                if k == self.count - 1 {
                    return self.end;
                }
                let k = k as f64;
                let t = (self.start * (n - k) + self.end * k) / n;
                let snapped = (t * 1e9).round() / 1e9;
                if (t - snapped).abs() < 1e-12 {
                    snapped
                } else {
                    t
                }
            })
            .collect()
    }

    fn check(&self, cfg: &CheckedScenario) -> Result<()> {
        let horizon = cfg.horizon();
        for t in [self.start, self.end] {
            if !(0.0..=horizon).contains(&t) {
                return Err(Error::Argument(format!("time {t} lies outside [0, T = {horizon}]")));
            }
        }
        Ok(())
    }
}

/// One row of the strategy table.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StrategyRow {
    pub with_delay: EquilibriumPoint,
    pub without_delay: EquilibriumPoint,
}

pub const STRATEGY_HEADER: [&str; 11] = [
    "t",
    "case",
    "p_star",
    "q1_star",
    "q2_star",
    "bL_star",
    "b1_star",
    "b2_star",
    "p_nodelay",
    "q1_nodelay",
    "q2_nodelay",
];

/// Equilibrium with and without memory at each time of the grid.
pub fn strategy_rows(cfg: &CheckedScenario, grid: &TimeGrid, s: f64) -> Result<Vec<StrategyRow>> {
    grid.check(cfg)?;
    grid.times()
        .into_iter()
        .map(|t| {
            Ok(StrategyRow {
                with_delay: equilibrium_point(t, s, cfg)?,
                without_delay: no_delay_strategy(t, s, cfg)?,
            })
        })
        .collect()
}

pub fn write_strategy_csv<W: Write>(rows: &[StrategyRow], out: W) -> Result<()> {
    let mut w = csv_writer(out);
    w.write_record(STRATEGY_HEADER)?;
    for r in rows {
        let (a, b) = (&r.with_delay, &r.without_delay);
        let mut rec = vec![fmt_num(a.t), a.case.number().to_string()];
        rec.extend(
            [
                a.p_star, a.q1_star, a.q2_star, a.bl_star, a.b1_star, a.b2_star, b.p_star, b.q1_star, b.q2_star,
            ]
            .map(fmt_num),
        );
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

/// A one-parameter sweep `path=start:end:count`.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub param: String,
    pub start: f64,
    pub end: f64,
    pub count: usize,
}

impl FromStr for SweepSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<SweepSpec> {
        let (param, range) = s
            .split_once('=')
            .ok_or_else(|| Error::Argument(format!("sweep `{s}` must read param=start:end:count")))?;
        let (start, end, count) = parse_range(range)?;
        if count < 2 {
            return Err(Error::Argument("a sweep needs count >= 2".to_string()));
        }
        if start == end {
            return Err(Error::Argument("degenerate sweep: start equals end".to_string()));
        }
        // Reject unknown paths before any evaluation.
        ScenarioConfig::paper_default().set_param(param.trim(), start)?;
        Ok(SweepSpec {
            param: param.trim().to_string(),
            start,
            end,
            count,
        })
    }
}

impl SweepSpec {
    pub fn values(&self) -> Vec<f64> {
        TimeGrid {
            start: self.start,
            end: self.end,
            count: self.count,
        }
        .times()
    }
}

/// One evaluated sweep point, or the reason it could not be evaluated.
#[derive(Debug)]
pub struct SweepPoint {
    pub value: f64,
    pub t: f64,
    /// The equilibrium, or why this parameter value was rejected.
    pub result: std::result::Result<EquilibriumPoint, String>,
}

pub const SWEEP_HEADER: [&str; 10] = [
    "value", "t", "case", "p_star", "q1_star", "q2_star", "bL_star", "b1_star", "b2_star", "boundary",
];

/// Evaluate the equilibrium at every (parameter value, time) pair. Points whose
/// scenario fails validation carry the error; the others are evaluated.
pub fn sweep_points(base: &Scenario, spec: &SweepSpec, grid: &TimeGrid, s: f64) -> Vec<SweepPoint> {
    let mut out = Vec::new();
    for value in spec.values() {
        let checked = (|| -> Result<CheckedScenario> {
            let mut sc = *base;
            sc.set_param(&spec.param, value)?;
            let cfg = sc.check()?;
            grid.check(&cfg)?;
            Ok(cfg)
        })();
        for t in grid.times() {
            let result = match &checked {
                Ok(cfg) => equilibrium_point(t, s, cfg).map_err(|e| e.to_string()),
                Err(e) => Err(e.to_string()),
            };
            out.push(SweepPoint { value, t, result });
        }
    }
    out
}

/// Write the evaluated sweep points; failed points are skipped.
pub fn write_sweep_csv<W: Write>(points: &[SweepPoint], out: W) -> Result<()> {
    let mut w = csv_writer(out);
    w.write_record(SWEEP_HEADER)?;
    for pt in points {
        if let Ok(e) = &pt.result {
            let mut rec = vec![fmt_num(pt.value), fmt_num(pt.t), e.case.number().to_string()];
            rec.extend([e.p_star, e.q1_star, e.q2_star, e.bl_star, e.b1_star, e.b2_star].map(fmt_num));
            rec.push(u8::from(e.boundary).to_string());
            w.write_record(&rec)?;
        }
    }
    w.flush()?;
    Ok(())
}

pub const PATH_HEADER: [&str; 9] = [
    "path_id", "X_L_T", "X1_T", "X2_T", "Y_L_T", "Y1_T", "Y2_T", "S_T", "flagged",
];

/// Per-path terminal states.
pub fn write_paths_csv<W: Write>(out_sim: &SimOutput, out: W) -> Result<()> {
    let mut w = csv_writer(out);
    w.write_record(PATH_HEADER)?;
    for p in &out_sim.paths {
        let mut rec = vec![p.path_id.to_string()];
        rec.extend(p.x.map(fmt_num));
        rec.extend(p.y.map(fmt_num));
        rec.push(fmt_num(p.s));
        rec.push(u8::from(p.flagged).to_string());
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

/// Monte Carlo run of one policy, with the equilibrium as a common-random-numbers
/// benchmark when the policy differs from it.
#[derive(Debug, Clone)]
pub struct SimulateReport {
    pub policy: Policy,
    pub sim: SimConfig,
    pub output: SimOutput,
    pub benchmark: Option<SimOutput>,
    /// Closed-form values at t_start, or None when the run stops before T.
    pub closed_form: Option<[f64; 3]>,
}

const AGENTS: [&str; 3] = ["reinsurer", "insurer 1", "insurer 2"];

impl SimulateReport {
    fn estimates(out: &SimOutput) -> [MCEstimate; 3] {
        [out.leader, out.insurers[0], out.insurers[1]]
    }

    /// z-scores of the equilibrium estimates against the closed form.
    pub fn z_scores(&self) -> Option<[f64; 3]> {
        if self.policy != Policy::Equilibrium {
            return None;
        }
        let v = self.closed_form?;
        let est = Self::estimates(&self.output);
        Some(std::array::from_fn(|k| est[k].z_score(v[k])))
    }

    pub fn flagged_ok(&self) -> bool {
        self.output.flagged_fraction() <= MAX_FLAGGED_FRACTION
            && self
                .benchmark
                .as_ref()
                .is_none_or(|b| b.flagged_fraction() <= MAX_FLAGGED_FRACTION)
    }

    /// True unless too many paths were flagged or an equilibrium estimate
    /// misses its closed-form value by more than three standard errors.
    pub fn passed(&self) -> bool {
        self.flagged_ok() && self.z_scores().is_none_or(|z| z.iter().all(|z| z.abs() < MAX_Z))
    }

    pub fn render(&self) -> String {
        let mut s = format!(
            "policy {} | paths {} | dt {} | seed {} | t in [{}, {}]\n",
            self.policy, self.sim.n_paths, self.sim.dt, self.sim.seed, self.sim.t_start, self.sim.t_end
        );
        let est = Self::estimates(&self.output);
        let bench = self.benchmark.as_ref().map(Self::estimates);
        let z = self.z_scores();
        for k in 0..3 {
            s += &format!(
                "{:<10} E[U] = {:.6e} +- {:.3e}",
                AGENTS[k], est[k].mean, est[k].std_error
            );
            if let Some(v) = self.closed_form {
                s += &format!(" | closed form {:.6e}", v[k]);
            }
            if let Some(z) = z {
                s += &format!(" | z = {:.3}", z[k]);
            }
            if let Some(b) = &bench {
                let diff = est[k].mean - b[k].mean;
                s += &format!(" | equilibrium {:.6e} (difference {:.3e})", b[k].mean, diff);
            }
            s.push('\n');
        }
        s += &format!(
            "flagged paths: {} ({:.4}%, limit {:.1}%)\n",
            self.output.flagged,
            100.0 * self.output.flagged_fraction(),
            100.0 * MAX_FLAGGED_FRACTION
        );
        s += if self.passed() {
            "result: PASS\n"
        } else {
            "result: FAIL\n"
        };
        s
    }
}

pub fn simulate(cfg: &CheckedScenario, sim: &SimConfig, policy: Policy) -> Result<SimulateReport> {
    let output = simulate_terminal_utilities(cfg, sim, policy)?;
    let benchmark = if policy == Policy::Equilibrium {
        None
    } else {
        Some(simulate_terminal_utilities(cfg, sim, Policy::Equilibrium)?)
    };
    let closed_form = if (sim.t_end - cfg.horizon()).abs() <= 1e-9 {
        Some(initial_values(cfg, sim.t_start)?)
    } else {
        None
    };
    Ok(SimulateReport {
        policy,
        sim: *sim,
        output,
        benchmark,
        closed_form,
    })
}

/// Which suites `verify` runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SuiteSelector {
    All,
    One(Suite),
}

impl FromStr for SuiteSelector {
    type Err = Error;

    fn from_str(s: &str) -> Result<SuiteSelector> {
        if s == "all" {
            return Ok(SuiteSelector::All);
        }
        Suite::from_name(s).map(SuiteSelector::One).ok_or_else(|| {
            let names: Vec<&str> = Suite::ALL.iter().map(|s| s.name()).collect();
            Error::Argument(format!("unknown suite `{s}` (all, {})", names.join(", ")))
        })
    }
}

pub fn verify(cfg: &CheckedScenario, selector: SuiteSelector, seed: u64) -> Vec<SuiteReport> {
    let suites: Vec<Suite> = match selector {
        SuiteSelector::All => Suite::ALL.to_vec(),
        SuiteSelector::One(s) => vec![s],
    };
    suites.into_iter().map(|s| run_suite(s, cfg, seed)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::validate;

    #[test]
    fn numbers_keep_twelve_digits() {
        assert_eq!(fmt_num(0.428_470_123_456_789), "0.428470123457");
        assert_eq!(fmt_num(12.0), "12");
        assert_eq!(fmt_num(-3.691_962_257_032e-6), "-0.00000369196225703");
        assert_eq!(fmt_num(1.5e-300), "1.5e-300");
    }

    #[test]
    fn time_grid_parsing() {
        let g: TimeGrid = "0:10:11".parse().unwrap();
        assert_eq!(g.times(), (0..=10).map(f64::from).collect::<Vec<_>>());
        assert!("0:10:0".parse::<TimeGrid>().is_err());
        assert!("0:10".parse::<TimeGrid>().is_err());
        assert!("3:3:4".parse::<TimeGrid>().is_err());
        let one: TimeGrid = "9:9:1".parse().unwrap();
        assert_eq!(one.times(), vec![9.0]);
        let thirds: TimeGrid = "0:1:4".parse().unwrap();
        assert_eq!(thirds.times()[1], 1.0 / 3.0);
    }

    #[test]
    fn sweep_parsing() {
        let s: SweepSpec = "prefs.k1=0:0.8:5".parse().unwrap();
        assert_eq!(s.values(), vec![0.0, 0.2, 0.4, 0.6, 0.8]);
        assert!("prefs.k1=0.3:0.3:5".parse::<SweepSpec>().is_err());
        assert!("prefs.k1=0:1:1".parse::<SweepSpec>().is_err());
        assert!("prefs.nope=0:1:3".parse::<SweepSpec>().is_err());
    }

    #[test]
    fn strategy_csv_layout() {
        let cfg = validate(&ScenarioConfig::paper_default()).unwrap();
        let rows = strategy_rows(&cfg, &"0:10:11".parse().unwrap(), 1.0).unwrap();
        let mut buf = Vec::new();
        write_strategy_csv(&rows, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(!text.contains('\r'));
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 12);
        assert_eq!(lines[0], STRATEGY_HEADER.join(","));
        assert!(lines[1].starts_with("0,8,12,"));
        let last = &rows[10];
        assert_eq!(last.with_delay.p_star, last.without_delay.p_star);
    }

    #[test]
    fn time_outside_horizon_rejected() {
        let cfg = validate(&ScenarioConfig::paper_default()).unwrap();
        assert!(strategy_rows(&cfg, &"0:11:12".parse().unwrap(), 1.0).is_err());
    }

    #[test]
    fn suite_selector_parsing() {
        assert_eq!("all".parse::<SuiteSelector>().unwrap(), SuiteSelector::All);
        assert_eq!(
            "table9".parse::<SuiteSelector>().unwrap(),
            SuiteSelector::One(Suite::Table9)
        );
        assert!("bogus".parse::<SuiteSelector>().is_err());
    }
}
