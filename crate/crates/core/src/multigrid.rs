//! Coarse-to-fine synchronous value iteration on uniform lattices.

use std::time::Instant;

use crate::dynamics::DynamicsModel;
use crate::error::{Error, Result};
use crate::evaluation::{rmse, GroundTruth, RmseReport};
use crate::geometry::{Environment, State};
use crate::graph::SampleGraph;
use crate::schedule::{Dispersion, EpsilonRule, ResolutionSchedule, RhoRule};
use crate::value_iteration::solve_frozen;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MultigridLevel {
    pub d: f64,
    pub eps: f64,
    pub vertices: usize,
    /// Wall time since the start of the whole run, in seconds.
    pub wall_s: f64,
    pub rmse: RmseReport,
}

/// Lattice with spacing `d` over `X_free + d B`, planar or with `n_theta`
/// headings.
pub fn lattice(env: &Environment, dim: usize, d: f64) -> Vec<State> {
    let b = env.workspace.inflate(d);
    let nx = (b.width() / d).floor() as usize;
    let ny = (b.height() / d).floor() as usize;
    let mut out = Vec::new();
    for j in 0..=ny {
        for i in 0..=nx {
            let x = b.lo[0] + i as f64 * d;
            let y = b.lo[1] + j as f64 * d;
            if dim == 2 {
                let s = State::planar(x, y);
                if env.is_free_inflated(&s, d) {
                    out.push(s);
                }
            } else {
                let dt = d / env.metric.angle_scale;
                let nt = ((2.0 * std::f64::consts::PI) / dt).floor() as usize;
                for k in 0..nt {
                    let s = State::pose(x, y, -std::f64::consts::PI + k as f64 * dt);
                    if env.is_free_inflated(&s, d) {
                        out.push(s);
                    }
                }
            }
        }
    }
    out
}

fn nearest_value(prev: &SampleGraph, values: &[f64], s: &State) -> f64 {
    let d = prev.current_resolutions().d;
    let mut r = d;
    loop {
        let hits = prev.range_query(s, r);
        if let Some(&best) = hits.iter().min_by(|&&a, &&b| {
            let da = prev.env().dist(prev.state(a), s);
            let db = prev.env().dist(prev.state(b), s);
            da.total_cmp(&db).then(a.cmp(&b))
        }) {
            return values[best as usize];
        }
        r *= 2.0;
        if r > 1e6 {
            return 1.0;
        }
    }
}

/// Solves each lattice to its fixed point in turn, warm-starting non-goal
/// vertices from the nearest vertex of the previous lattice, and reports
/// cumulative wall time and RMSE per level.
pub fn multigrid_baseline(
    env: &Environment,
    model: &DynamicsModel,
    resolutions: &[f64],
    epsilon_rule: EpsilonRule,
    tol: f64,
    oracle: &GroundTruth,
) -> Result<Vec<MultigridLevel>> {
    if resolutions.is_empty() || resolutions.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::Config(
            "multigrid resolutions must be non-empty and strictly decreasing".into(),
        ));
    }
    let start = Instant::now();
    let mut levels = Vec::with_capacity(resolutions.len());
    let mut prev: Option<(SampleGraph, Vec<f64>)> = None;
    for &d in resolutions {
        let schedule = ResolutionSchedule {
            dispersion: Dispersion::Fixed { d },
            epsilon_rule,
            rho_rule: RhoRule::TwiceD,
            lipschitz: model.lipschitz,
            speed_bound: model.speed_bound,
            dim: model.dim(),
        };
        let states = lattice(env, model.dim(), d);
        let mut g = SampleGraph::new(env.clone(), model.clone(), schedule, 0, states)?;
        if let Some((pg, pv)) = &prev {
            for id in 0..g.len() as u32 {
                if !g.in_goal_inflated(id) {
                    let v = nearest_value(pg, pv, g.state(id));
                    g.set_value(id, v);
                }
            }
        }
        let values = solve_frozen(&mut g, tol)?;
        let report = rmse(g.states(), &values, oracle)?;
        let res = g.current_resolutions();
        levels.push(MultigridLevel {
            d,
            eps: res.eps,
            vertices: g.len(),
            wall_s: start.elapsed().as_secs_f64(),
            rmse: report,
        });
        log::info!(
            "multigrid d={d}: {} vertices, rmse {:.4}",
            g.len(),
            report.rmse
        );
        prev = Some((g, values));
    }
    Ok(levels)
}
