//! Ground-truth minimal times for the point mass and RMSE against them.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{Error, Result};
use crate::geometry::{Environment, State};
use crate::value_iteration::kruzhkov_inv;

/// Minimal travel times on a uniform grid over the workspace, from
/// Dijkstra with 8-connected moves at constant speed.
#[derive(Clone, Debug)]
pub struct OracleGrid {
    env: Environment,
    h: f64,
    speed: f64,
    nx: usize,
    ny: usize,
    times: Vec<f64>,
}

#[derive(PartialEq)]
struct Entry(f64, usize);

impl Eq for Entry {}

impl Ord for Entry {
    fn cmp(&self, other: &Self) -> Ordering {
        other.0.total_cmp(&self.0).then(other.1.cmp(&self.1))
    }
}

impl PartialOrd for Entry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl OracleGrid {
    pub fn build(env: &Environment, h: f64, speed: f64) -> Result<Self> {
        if env.dim() != 2 {
            return Err(Error::Config("the grid oracle needs a planar state space".into()));
        }
        if !(h > 0.0 && speed > 0.0) {
            return Err(Error::Config("oracle resolution and speed must be positive".into()));
        }
        let ws = env.workspace;
        let nx = (ws.width() / h).round() as usize + 1;
        let ny = (ws.height() / h).round() as usize + 1;
        let node = |i: usize, j: usize| State::planar(ws.lo[0] + i as f64 * h, ws.lo[1] + j as f64 * h);
        let mut free = vec![false; nx * ny];
        let mut times = vec![f64::INFINITY; nx * ny];
        let mut heap = BinaryHeap::new();
        for j in 0..ny {
            for i in 0..nx {
                let s = node(i, j);
                let k = j * nx + i;
                free[k] = env.is_free(&s);
                if free[k] && env.in_goal(&s) {
                    times[k] = 0.0;
                    heap.push(Entry(0.0, k));
                }
            }
        }
        if heap.is_empty() {
            return Err(Error::Scenario(format!(
                "no free grid node inside the goal at resolution {h}"
            )));
        }
        let diag = std::f64::consts::SQRT_2 * h / speed;
        let axis = h / speed;
        let moves: [(isize, isize, f64); 8] = [
            (1, 0, axis),
            (-1, 0, axis),
            (0, 1, axis),
            (0, -1, axis),
            (1, 1, diag),
            (1, -1, diag),
            (-1, 1, diag),
            (-1, -1, diag),
        ];
        while let Some(Entry(t, k)) = heap.pop() {
            if t > times[k] {
                continue;
            }
            let (i, j) = ((k % nx) as isize, (k / nx) as isize);
            for &(di, dj, w) in &moves {
                let (a, b) = (i + di, j + dj);
                if a < 0 || b < 0 || a >= nx as isize || b >= ny as isize {
                    continue;
                }
                let n = b as usize * nx + a as usize;
                if !free[n] {
                    continue;
                }
                let cand = t + w;
                if cand < times[n] {
                    times[n] = cand;
                    heap.push(Entry(cand, n));
                }
            }
        }
        Ok(OracleGrid {
            env: env.clone(),
            h,
            speed,
            nx,
            ny,
            times,
        })
    }

    pub fn resolution(&self) -> f64 {
        self.h
    }

    pub fn speed(&self) -> f64 {
        self.speed
    }

    pub fn node_time(&self, i: usize, j: usize) -> f64 {
        self.times[j * self.nx + i]
    }

    /// Bilinear interpolation over the free, reachable corners of the cell
    /// containing `x`; `+inf` inside obstacles. Positions outside the
    /// workspace are clamped onto it.
    pub fn time(&self, x: &State) -> f64 {
        if !self.env.is_free(x) {
            return f64::INFINITY;
        }
        let ws = self.env.workspace;
        let p = ws.clamp(x.position());
        let fx = ((p[0] - ws.lo[0]) / self.h).clamp(0.0, (self.nx - 1) as f64);
        let fy = ((p[1] - ws.lo[1]) / self.h).clamp(0.0, (self.ny - 1) as f64);
        let i0 = (fx.floor() as usize).min(self.nx.saturating_sub(2));
        let j0 = (fy.floor() as usize).min(self.ny.saturating_sub(2));
        let (tx, ty) = (fx - i0 as f64, fy - j0 as f64);
        let corners = [
            (i0, j0, (1.0 - tx) * (1.0 - ty)),
            (i0 + 1, j0, tx * (1.0 - ty)),
            (i0, j0 + 1, (1.0 - tx) * ty),
            (i0 + 1, j0 + 1, tx * ty),
        ];
        let (mut acc, mut wsum) = (0.0, 0.0);
        for (i, j, w) in corners {
            let t = self.node_time(i, j);
            if t.is_finite() && w > 0.0 {
                acc += w * t;
                wsum += w;
            }
        }
        if wsum > 0.0 {
            acc / wsum
        } else {
            // exactly on a node whose neighbors carry zero weight
            let t = self.node_time(fx.round() as usize, fy.round() as usize);
            if t.is_finite() {
                t
            } else {
                f64::INFINITY
            }
        }
    }
}

/// Source of ground-truth times for the point mass.
#[derive(Clone, Debug)]
pub enum GroundTruth {
    /// Straight line to a goal ball in an obstacle-free world.
    Analytic {
        center: [f64; 2],
        radius: f64,
        speed: f64,
    },
    Grid(OracleGrid),
}

impl GroundTruth {
    /// Analytic times when the world is empty, a grid oracle otherwise.
    pub fn for_environment(env: &Environment, h: f64, speed: f64) -> Result<Self> {
        if env.obstacles.is_empty() && env.dim() == 2 {
            Ok(GroundTruth::Analytic {
                center: env.goal.center.position(),
                radius: env.goal.radius,
                speed,
            })
        } else {
            OracleGrid::build(env, h, speed).map(GroundTruth::Grid)
        }
    }

    pub fn time(&self, x: &State) -> f64 {
        match self {
            GroundTruth::Analytic {
                center,
                radius,
                speed,
            } => ((x.x() - center[0]).hypot(x.y() - center[1]) - radius).max(0.0) / speed,
            GroundTruth::Grid(g) => g.time(x),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RmseReport {
    pub rmse: f64,
    /// Vertices left out because the estimate or the oracle is infinite.
    pub excluded: usize,
    pub compared: usize,
}

/// RMSE in time units between `kruzhkov_inv(values)` and the oracle over
/// `states`, skipping pairs where either side is infinite.
pub fn rmse(states: &[State], values: &[f64], oracle: &GroundTruth) -> Result<RmseReport> {
    assert_eq!(states.len(), values.len());
    let mut sum = 0.0;
    let mut compared = 0;
    for (s, &v) in states.iter().zip(values) {
        let est = kruzhkov_inv(v);
        let truth = oracle.time(s);
        if est.is_finite() && truth.is_finite() {
            sum += (est - truth) * (est - truth);
            compared += 1;
        }
    }
    if compared == 0 {
        return Err(Error::NoFiniteEstimates);
    }
    Ok(RmseReport {
        rmse: (sum / compared as f64).sqrt(),
        excluded: states.len() - compared,
        compared,
    })
}
