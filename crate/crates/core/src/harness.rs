//! Experiment orchestration: single runs, iPolicy-vs-multigrid comparisons
//! and parking trials, each writing CSV artifacts into an output directory.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use crate::config::{OracleChoice, Scenario, ScenarioConfig};
use crate::dynamics::ModelKind;
use crate::error::{Error, Result};
use crate::evaluation::{rmse, GroundTruth, RmseReport};
use crate::multigrid::multigrid_baseline;
use crate::planner::Planner;
use crate::rollout::{revalidate, rollout, Outcome, Trajectory};

/// Command-line overrides applied on top of a loaded config.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub time_budget_s: Option<f64>,
    /// Total vertex count at which the run stops.
    pub max_samples: Option<usize>,
    pub no_wall_clock: bool,
}

impl Overrides {
    pub fn apply(&self, cfg: &mut ScenarioConfig) -> Result<()> {
        if let Some(s) = self.seed {
            cfg.seed = s;
            cfg.evaluation.seeds = vec![s];
        }
        if let Some(t) = self.time_budget_s {
            if !(t > 0.0) {
                return Err(Error::Config(format!("time budget {t} must be positive")));
            }
            cfg.vi.time_budget_s = Some(t);
        }
        if let Some(n) = self.max_samples {
            let n0 = cfg.init.uniform_samples + cfg.init.goal_samples;
            if n < n0 {
                return Err(Error::Config(format!(
                    "max samples {n} is below the initial vertex count {n0}"
                )));
            }
            cfg.vi.max_iterations = n - n0;
        }
        if self.no_wall_clock {
            cfg.output.wall_clock = false;
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Method {
    Ipolicy,
    Multigrid,
}

/// One point of an RMSE series.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RmsePoint {
    pub wall_s: f64,
    pub samples: usize,
    /// `None` when no vertex had a finite estimate.
    pub report: Option<RmseReport>,
}

impl RmsePoint {
    pub fn rmse(&self) -> f64 {
        self.report.map_or(f64::NAN, |r| r.rmse)
    }
}

#[derive(Clone, Debug)]
pub struct RunSummary {
    pub iterations: usize,
    pub samples: usize,
    pub rmse: Vec<RmsePoint>,
    pub rollouts: Vec<(Outcome, f64)>,
}

#[derive(Clone, Debug)]
pub struct SeedComparison {
    pub seed: u64,
    pub ipolicy: Vec<RmsePoint>,
    pub multigrid: Vec<RmsePoint>,
    /// Last time both series cover, with each method's latest RMSE by then.
    pub common: Option<(f64, f64, f64)>,
}

#[derive(Clone, Debug)]
pub struct ParkingSummary {
    pub success: bool,
    pub iterations: usize,
    pub samples: usize,
    pub wall_s: f64,
    pub hit_time: f64,
}

struct Csv {
    w: BufWriter<File>,
    path: PathBuf,
}

impl Csv {
    fn create(path: PathBuf, header: &str) -> Result<Self> {
        let f = File::create(&path).map_err(|e| Error::io(&path, e))?;
        let mut c = Csv {
            w: BufWriter::new(f),
            path,
        };
        c.line(header)?;
        Ok(c)
    }

    fn line(&mut self, s: &str) -> Result<()> {
        writeln!(self.w, "{s}").map_err(|e| Error::io(&self.path, e))
    }

    fn finish(mut self) -> Result<()> {
        self.w.flush().map_err(|e| Error::io(&self.path, e))
    }
}

fn write_file(
    path: PathBuf,
    body: impl FnOnce(&mut BufWriter<File>) -> std::io::Result<()>,
) -> Result<()> {
    let f = File::create(&path).map_err(|e| Error::io(&path, e))?;
    let mut w = BufWriter::new(f);
    body(&mut w)
        .and_then(|_| w.flush())
        .map_err(|e| Error::io(&path, e))
}

fn make_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(|e| Error::io(path, e))
}

/// Resolves, validates and records the config in `out`.
fn prepare(cfg: &ScenarioConfig, out: &Path) -> Result<(ScenarioConfig, Scenario)> {
    let resolved = cfg.resolved()?;
    let scenario = resolved.build()?;
    make_dir(out)?;
    let text = resolved.to_toml();
    write_file(out.join("config.resolved.toml"), |w| w.write_all(text.as_bytes()))?;
    Ok((resolved, scenario))
}

fn oracle_for(cfg: &ScenarioConfig, scenario: &Scenario) -> Result<Option<GroundTruth>> {
    if cfg.model != ModelKind::PointMass || cfg.evaluation.oracle == OracleChoice::None {
        return Ok(None);
    }
    let h = cfg.evaluation.oracle_resolution;
    GroundTruth::for_environment(&scenario.env, h, scenario.model.speed_bound).map(Some)
}

fn planner_for(cfg: &ScenarioConfig, scenario: &Scenario, seed: u64) -> Result<Planner> {
    Planner::new(
        scenario.env.clone(),
        scenario.model.clone(),
        scenario.schedule,
        cfg.vi,
        cfg.init.uniform_samples,
        cfg.init.goal_samples,
        seed,
    )
}

fn measure(planner: &Planner, oracle: &GroundTruth) -> Result<RmsePoint> {
    let g = planner.graph();
    let report = match rmse(g.states(), g.values(), oracle) {
        Ok(r) => Some(r),
        Err(Error::NoFiniteEstimates) => None,
        Err(e) => return Err(e),
    };
    Ok(RmsePoint {
        wall_s: planner.busy_seconds(),
        samples: g.len(),
        report,
    })
}

fn rmse_row(p: &RmsePoint, wall_clock: bool) -> String {
    let wall = if wall_clock { p.wall_s } else { 0.0 };
    let excluded = p.report.map_or(p.samples, |r| r.excluded);
    format!("{wall},{},{},{excluded}", p.samples, p.rmse())
}

fn write_rmse_series(path: PathBuf, series: &[RmsePoint], wall_clock: bool) -> Result<()> {
    let mut csv = Csv::create(path, "wall_s,samples,rmse,excluded")?;
    for p in series {
        csv.line(&rmse_row(p, wall_clock))?;
    }
    csv.finish()
}

fn dump_values(planner: &Planner, cfg: &ScenarioConfig, dir: &Path) -> Result<()> {
    let g = planner.graph();
    let k = planner.iteration();
    write_file(dir.join(format!("values_{k:06}.csv")), |w| g.write_values_csv(w))?;
    if let Some(theta) = cfg.output.slice_theta.filter(|_| g.model().dim() == 3) {
        let tol = cfg.output.slice_tolerance_deg.to_radians();
        write_file(dir.join(format!("slice_{k:06}.csv")), |w| {
            g.write_slice_csv(w, theta, tol)
        })?;
    }
    Ok(())
}

fn write_trajectory(path: PathBuf, traj: &Trajectory) -> Result<()> {
    write_file(path, |w| traj.write_csv(w))
}

/// Plans for `K` iterations or until the time budget, writing
///
/// - `config.resolved.toml`
/// - `iterations.csv`: `k,vertices,d,eps,rho,stale,residual,wall_ms`
/// - `values/values_{k}.csv` (and `slice_{k}.csv` for poses) at `k = 0`,
///   every checkpoint and the final iteration
/// - `rmse.csv` when the scenario has an oracle
/// - `trajectories/traj_{i}.csv` and `trajectories/summary.csv` for each
///   configured start
pub fn run_ipolicy(cfg: &ScenarioConfig, out: &Path) -> Result<RunSummary> {
    let (cfg, scenario) = prepare(cfg, out)?;
    let wall_clock = cfg.output.wall_clock;
    let values_dir = out.join("values");
    make_dir(&values_dir)?;
    let oracle = oracle_for(&cfg, &scenario)?;
    let mut planner = planner_for(&cfg, &scenario, cfg.seed)?;

    let mut log = Csv::create(
        out.join("iterations.csv"),
        "k,vertices,d,eps,rho,stale,residual,wall_ms",
    )?;
    let mut series = Vec::new();
    let checkpoint = |planner: &Planner, series: &mut Vec<RmsePoint>| -> Result<()> {
        dump_values(planner, &cfg, &values_dir)?;
        if let Some(o) = &oracle {
            series.push(measure(planner, o)?);
        }
        Ok(())
    };
    checkpoint(&planner, &mut series)?;
    let mut last = 0;
    while !planner.finished() {
        let rec = planner.step()?;
        let wall_ms = if wall_clock { rec.wall_ms } else { 0.0 };
        log.line(&format!(
            "{},{},{},{},{},{},{},{wall_ms}",
            rec.k,
            rec.vertices,
            rec.res.d,
            rec.res.eps,
            rec.res.rho,
            rec.report.updated.len(),
            rec.report.residual
        ))?;
        if cfg.checkpoints.due(rec.k, rec.vertices) {
            checkpoint(&planner, &mut series)?;
            last = rec.k;
        }
    }
    log.finish()?;
    if last != planner.iteration() {
        checkpoint(&planner, &mut series)?;
    }
    if oracle.is_some() {
        write_rmse_series(out.join("rmse.csv"), &series, wall_clock)?;
    }

    let mut rollouts = Vec::new();
    if !scenario.starts.is_empty() {
        let dir = out.join("trajectories");
        make_dir(&dir)?;
        let mut summary = Csv::create(
            dir.join("summary.csv"),
            "start,outcome,hit_time,steps,revalidated",
        )?;
        let g = planner.graph();
        for (i, s) in scenario.starts.iter().enumerate() {
            let traj = rollout(g, g.values(), *s, cfg.rollout.max_time);
            write_trajectory(dir.join(format!("traj_{i}.csv")), &traj)?;
            summary.line(&format!(
                "{i},{},{},{},{}",
                traj.outcome,
                traj.hit_time,
                traj.controls.len(),
                revalidate(g, &traj)
            ))?;
            log::info!("rollout {i}: {} at t={}", traj.outcome, traj.hit_time);
            rollouts.push((traj.outcome, traj.hit_time));
        }
        summary.finish()?;
    }
    Ok(RunSummary {
        iterations: planner.iteration(),
        samples: planner.graph().len(),
        rmse: series,
        rollouts,
    })
}

fn latest_by(series: &[RmsePoint], t: f64) -> Option<f64> {
    series.iter().rev().find(|p| p.wall_s <= t).map(RmsePoint::rmse)
}

/// Runs the requested methods on every configured seed against one shared
/// oracle. Writes `rmse_{method}_seed{s}.csv` per seed, `aggregate.csv`
/// (`method,checkpoint,samples,mean_wall_s,mean_rmse,runs`) and, when both
/// methods ran, `comparison.csv`
/// (`seed,common_wall_s,ipolicy_rmse,multigrid_rmse,ipolicy_le_multigrid`).
pub fn run_comparison(
    cfg: &ScenarioConfig,
    out: &Path,
    methods: &[Method],
) -> Result<Vec<SeedComparison>> {
    let (cfg, scenario) = prepare(cfg, out)?;
    let wall_clock = cfg.output.wall_clock;
    let oracle = oracle_for(&cfg, &scenario)?.ok_or_else(|| {
        Error::Config("compare needs a point-mass scenario with an oracle".into())
    })?;
    if cfg.evaluation.seeds.is_empty() {
        return Err(Error::Config("evaluation.seeds is empty".into()));
    }
    let budget = cfg.vi.time_budget_s.unwrap_or(f64::INFINITY);
    let mut results = Vec::new();
    for &seed in &cfg.evaluation.seeds {
        let mut ipolicy = Vec::new();
        if methods.contains(&Method::Ipolicy) {
            let mut planner = planner_for(&cfg, &scenario, seed)?;
            while !planner.finished() {
                let rec = planner.step()?;
                if cfg.checkpoints.due(rec.k, rec.vertices) {
                    ipolicy.push(measure(&planner, &oracle)?);
                }
            }
            if ipolicy.is_empty() {
                log::warn!("seed {seed}: iPolicy stopped before its first checkpoint");
            }
            write_rmse_series(
                out.join(format!("rmse_ipolicy_seed{seed}.csv")),
                &ipolicy,
                wall_clock,
            )?;
        }
        let mut multigrid = Vec::new();
        if methods.contains(&Method::Multigrid) {
            let levels = multigrid_baseline(
                &scenario.env,
                &scenario.model,
                &cfg.evaluation.multigrid_resolutions,
                scenario.schedule.epsilon_rule,
                cfg.evaluation.multigrid_tol,
                &oracle,
            )?;
            multigrid = levels
                .iter()
                .filter(|l| l.wall_s <= budget)
                .map(|l| RmsePoint {
                    wall_s: l.wall_s,
                    samples: l.vertices,
                    report: Some(l.rmse),
                })
                .collect();
            if multigrid.is_empty() {
                log::warn!("seed {seed}: the time budget ends before the first grid is solved");
            }
            write_rmse_series(
                out.join(format!("rmse_multigrid_seed{seed}.csv")),
                &multigrid,
                wall_clock,
            )?;
        }
        let common = match (ipolicy.last(), multigrid.last()) {
            (Some(a), Some(b)) => {
                let t = a.wall_s.min(b.wall_s);
                latest_by(&ipolicy, t)
                    .zip(latest_by(&multigrid, t))
                    .map(|(x, y)| (t, x, y))
            }
            _ => None,
        };
        results.push(SeedComparison {
            seed,
            ipolicy,
            multigrid,
            common,
        });
    }

    let mut agg = Csv::create(
        out.join("aggregate.csv"),
        "method,checkpoint,samples,mean_wall_s,mean_rmse,runs",
    )?;
    for (name, pick) in [
        ("ipolicy", (|r: &SeedComparison| &r.ipolicy) as fn(&SeedComparison) -> &Vec<RmsePoint>),
        ("multigrid", |r: &SeedComparison| &r.multigrid),
    ] {
        let len = results.iter().map(|r| pick(r).len()).max().unwrap_or(0);
        for i in 0..len {
            let pts: Vec<&RmsePoint> = results.iter().filter_map(|r| pick(r).get(i)).collect();
            let n = pts.len() as f64;
            let wall = if wall_clock {
                pts.iter().map(|p| p.wall_s).sum::<f64>() / n
            } else {
                0.0
            };
            let err = pts.iter().map(|p| p.rmse()).sum::<f64>() / n;
            agg.line(&format!("{name},{i},{},{wall},{err},{}", pts[0].samples, pts.len()))?;
        }
    }
    agg.finish()?;

    if methods.contains(&Method::Ipolicy) && methods.contains(&Method::Multigrid) {
        let mut cmp = Csv::create(
            out.join("comparison.csv"),
            "seed,common_wall_s,ipolicy_rmse,multigrid_rmse,ipolicy_le_multigrid",
        )?;
        for r in &results {
            let line = match r.common {
                Some((t, a, b)) => {
                    let t = if wall_clock { t } else { 0.0 };
                    format!("{},{t},{a},{b},{}", r.seed, a <= b)
                }
                None => format!("{},NaN,NaN,NaN,false", r.seed),
            };
            cmp.line(&line)?;
        }
        cmp.finish()?;
    }
    Ok(results)
}

/// Plans until a rollout from the first configured start reaches the goal
/// without collision, trying every `parking.check_every` iterations.
/// Writes `parking.csv` (`k,samples,wall_s,outcome,hit_time,revalidated`
/// per attempt), `result.csv`, `trajectory.csv` for the last attempt and the
/// final values. Returns [`Error::BudgetExhausted`] when the sample or time
/// budget runs out first.
pub fn run_parking(cfg: &ScenarioConfig, out: &Path) -> Result<ParkingSummary> {
    let started = Instant::now();
    let (cfg, scenario) = prepare(cfg, out)?;
    let wall_clock = cfg.output.wall_clock;
    let start = *scenario
        .starts
        .first()
        .ok_or_else(|| Error::Config("parking needs a rollout start".into()))?;
    let mut planner = planner_for(&cfg, &scenario, cfg.seed)?;
    let mut attempts = Csv::create(
        out.join("parking.csv"),
        "k,samples,wall_s,outcome,hit_time,revalidated",
    )?;

    let mut attempt = |planner: &Planner| -> Result<(Trajectory, bool, f64)> {
        let g = planner.graph();
        let traj = rollout(g, g.values(), start, cfg.rollout.max_time);
        let valid = traj.outcome == Outcome::ReachedGoal && revalidate(g, &traj);
        let wall = started.elapsed().as_secs_f64();
        attempts.line(&format!(
            "{},{},{},{},{},{valid}",
            planner.iteration(),
            g.len(),
            if wall_clock { wall } else { 0.0 },
            traj.outcome,
            traj.hit_time
        ))?;
        Ok((traj, valid, wall))
    };

    let (mut traj, mut ok, mut wall) = attempt(&planner)?;
    while !ok && !planner.finished() {
        let rec = planner.step()?;
        if rec.k % cfg.parking.check_every == 0 || planner.finished() {
            (traj, ok, wall) = attempt(&planner)?;
        }
    }
    drop(attempt);
    attempts.finish()?;

    write_trajectory(out.join("trajectory.csv"), &traj)?;
    let g = planner.graph();
    write_file(out.join("values_final.csv"), |w| g.write_values_csv(w))?;
    let summary = ParkingSummary {
        success: ok,
        iterations: planner.iteration(),
        samples: g.len(),
        wall_s: wall,
        hit_time: traj.hit_time,
    };
    let mut result = Csv::create(out.join("result.csv"), "status,k,samples,wall_s,hit_time")?;
    result.line(&format!(
        "{},{},{},{},{}",
        if ok { "success" } else { "budget_exhausted" },
        summary.iterations,
        summary.samples,
        if wall_clock { summary.wall_s } else { 0.0 },
        summary.hit_time
    ))?;
    result.finish()?;
    if ok {
        log::info!(
            "parked after {} samples, {:.2} s, hit time {:.2}",
            summary.samples,
            summary.wall_s,
            summary.hit_time
        );
        Ok(summary)
    } else {
        Err(Error::BudgetExhausted(format!(
            "no collision-free rollout from {:?} after {} samples and {:.1} s (last attempt: {})",
            start.coords(),
            summary.samples,
            summary.wall_s,
            traj.outcome
        )))
    }
}
