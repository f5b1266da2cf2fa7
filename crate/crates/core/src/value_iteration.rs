//! Kruzhkov-transformed Bellman updates on a [`SampleGraph`].
//!
//! Values live in `[0, 1]`: `Theta = 1 - exp(-T)` for time-to-go `T`, so
//! unreachable vertices sit at 1 and goal vertices at 0. The operator is
//! `Theta(x) <- Delta + beta * min_{x' in F(x)} Theta(x')` away from the
//! inflated goal and the identity inside it.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{SampleGraph, VertexId};

const MAX_FROZEN_SWEEPS: usize = 1_000_000;

/// `1 - exp(-t)`; `+inf` maps to 1.
pub fn kruzhkov(t: f64) -> f64 {
    assert!(t >= 0.0, "negative time {t}");
    if t == f64::INFINITY {
        1.0
    } else {
        -(-t).exp_m1()
    }
}

/// `-ln(1 - v)`; 1 maps to `+inf`.
pub fn kruzhkov_inv(v: f64) -> f64 {
    assert!((0.0..=1.0).contains(&v), "transformed value {v} outside [0, 1]");
    if v == 1.0 {
        f64::INFINITY
    } else {
        -(-v).ln_1p()
    }
}

/// Recursion allowance `m_k` for the depth-first refresh.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum RecursionAllowance {
    Constant { m: u32 },
    /// `m_k = |V_k|`
    VertexCount,
}

impl Default for RecursionAllowance {
    fn default() -> Self {
        RecursionAllowance::Constant { m: 500 }
    }
}

impl RecursionAllowance {
    pub fn at(&self, vertex_count: usize) -> u32 {
        match *self {
            RecursionAllowance::Constant { m } => m,
            RecursionAllowance::VertexCount => vertex_count.max(1) as u32,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ViConfig {
    /// Staleness threshold `P`.
    pub staleness_threshold: u32,
    pub recursion: RecursionAllowance,
    /// Maximum number of planner iterations `K`.
    pub max_iterations: usize,
    /// Optional wall-clock budget in seconds.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub time_budget_s: Option<f64>,
}

impl Default for ViConfig {
    fn default() -> Self {
        ViConfig {
            staleness_threshold: 50,
            recursion: RecursionAllowance::default(),
            max_iterations: 2000,
            time_budget_s: None,
        }
    }
}

impl ViConfig {
    pub fn validate(&self) -> Result<()> {
        if let RecursionAllowance::Constant { m: 0 } = self.recursion {
            return Err(Error::Config("recursion allowance must be at least 1".into()));
        }
        if matches!(self.time_budget_s, Some(t) if !(t > 0.0)) {
            return Err(Error::Config("time budget must be positive".into()));
        }
        Ok(())
    }
}

/// One application of the transformed operator at `x` against `values`.
pub fn bellman_apply(graph: &mut SampleGraph, x: VertexId, values: &[f64]) -> f64 {
    if graph.in_goal_inflated(x) {
        return values[x as usize];
    }
    let res = graph.current_resolutions();
    match min_over(graph.one_hop(x), values) {
        Some(m) => res.delta + res.beta * m,
        None => values[x as usize],
    }
}

fn min_over(ids: &[VertexId], values: &[f64]) -> Option<f64> {
    ids.iter().map(|&i| values[i as usize]).min_by(f64::total_cmp)
}

/// Synchronous sweep: the operator applied to every vertex of `values`.
pub fn bellman_sweep(graph: &mut SampleGraph, values: &[f64]) -> Vec<f64> {
    (0..graph.len() as VertexId)
        .map(|x| bellman_apply(graph, x, values))
        .collect()
}

struct Frame {
    vertex: VertexId,
    next: usize,
}

/// Reusable scratch space for depth-limited back-propagation.
#[derive(Default)]
pub struct Backprop {
    /// Remaining allowance at which a vertex is refreshed in the current
    /// call, valid when the matching `mark` equals `generation`.
    depth: Vec<u32>,
    mark: Vec<u32>,
    done: Vec<u32>,
    generation: u32,
    queue: Vec<VertexId>,
    stack: Vec<Frame>,
    lists: Vec<Vec<VertexId>>,
}

impl Backprop {
    pub fn new() -> Self {
        Self::default()
    }

    fn fresh(&mut self, v: VertexId) -> bool {
        self.mark[v as usize] != self.generation
    }

    /// Depth-first refresh of `root` with recursion allowance `m`, writing
    /// refreshed values into the graph. The goal boundary and exhausted
    /// allowance stop the recursion. Each vertex is refreshed at most once
    /// per call, at the largest allowance any recursion path gives it
    /// (`m` minus its hop distance from `root`), after its deeper
    /// neighbors.
    pub fn run(&mut self, graph: &mut SampleGraph, root: VertexId, m: u32) -> f64 {
        if m == 0 || graph.in_goal_inflated(root) {
            return graph.value(root);
        }
        let n = graph.len();
        if self.mark.len() < n {
            self.mark.resize(n, 0);
            self.done.resize(n, 0);
            self.depth.resize(n, 0);
            self.lists.resize_with(n, Vec::new);
        }
        self.generation = self.generation.wrapping_add(1);
        if self.generation == 0 {
            self.mark.iter_mut().for_each(|g| *g = 0);
            self.done.iter_mut().for_each(|g| *g = 0);
            self.generation = 1;
        }
        let gen = self.generation;

        // breadth-first pass: best remaining allowance per vertex
        self.queue.clear();
        self.queue.push(root);
        self.mark[root as usize] = gen;
        self.depth[root as usize] = m;
        let mut head = 0;
        while head < self.queue.len() {
            let v = self.queue[head];
            head += 1;
            let list = &mut self.lists[v as usize];
            list.clear();
            list.extend_from_slice(graph.one_hop(v));
            let child_depth = self.depth[v as usize] - 1;
            if child_depth == 0 {
                continue;
            }
            for i in 0..self.lists[v as usize].len() {
                let c = self.lists[v as usize][i];
                if self.fresh(c) && !graph.in_goal_inflated(c) {
                    self.mark[c as usize] = gen;
                    self.depth[c as usize] = child_depth;
                    self.queue.push(c);
                }
            }
        }

        // depth-first pass in post-order; children refreshed before parents
        let res = graph.current_resolutions();
        self.stack.push(Frame {
            vertex: root,
            next: 0,
        });
        self.done[root as usize] = gen;
        while let Some(top) = self.stack.last_mut() {
            let v = top.vertex as usize;
            if self.depth[v] > 1 && top.next < self.lists[v].len() {
                let c = self.lists[v][top.next];
                top.next += 1;
                let ci = c as usize;
                if self.mark[ci] == gen && self.done[ci] != gen {
                    self.done[ci] = gen;
                    self.stack.push(Frame { vertex: c, next: 0 });
                }
            } else {
                self.stack.pop();
                if let Some(m) = min_over(&self.lists[v], graph.values()) {
                    graph.set_value(v as VertexId, res.delta + res.beta * m);
                }
            }
        }
        graph.value(root)
    }
}

/// Convenience wrapper around [`Backprop::run`] with fresh scratch space.
pub fn backprop(graph: &mut SampleGraph, x: VertexId, m: u32) -> f64 {
    Backprop::new().run(graph, x, m)
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct StepReport {
    /// The stale set, ascending.
    pub updated: Vec<VertexId>,
    /// `max |Theta_after - Theta_before|` over the stale set.
    pub residual: f64,
}

/// One asynchronous value iteration: refresh every vertex whose staleness
/// reached the threshold (and that lies in the inflated free set), then
/// reset its staleness and age every other vertex.
pub fn value_iteration_step(
    graph: &mut SampleGraph,
    recursion: &RecursionAllowance,
    scratch: &mut Backprop,
) -> StepReport {
    let p = graph.staleness_threshold();
    let stale: Vec<VertexId> = (0..graph.len() as VertexId)
        .filter(|&x| graph.staleness()[x as usize] == p && graph.in_free_inflated(x))
        .collect();
    let m = recursion.at(graph.len());
    let mut residual = 0.0f64;
    for &x in &stale {
        let before = graph.value(x);
        let after = scratch.run(graph, x, m);
        residual = residual.max((after - before).abs());
    }
    let staleness = graph.staleness_mut();
    for f in staleness.iter_mut() {
        *f = (*f + 1).min(p);
    }
    for &x in &stale {
        staleness[x as usize] = 0;
    }
    StepReport {
        updated: stale,
        residual,
    }
}

/// Fixed point of the operator on a frozen graph by synchronous sweeps,
/// starting from the graph's current values. The graph's values are not
/// modified; neighbor caches are pruned.
pub fn solve_frozen(graph: &mut SampleGraph, tol: f64) -> Result<Vec<f64>> {
    assert!(tol > 0.0);
    graph.prune_all();
    let mut values = graph.values().to_vec();
    for _ in 0..MAX_FROZEN_SWEEPS {
        let next = bellman_sweep(graph, &values);
        let residual = next
            .iter()
            .zip(&values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        values = next;
        if residual < tol {
            return Ok(values);
        }
    }
    Err(Error::Numerical(format!(
        "no convergence after {MAX_FROZEN_SWEEPS} sweeps (beta = {})",
        graph.current_resolutions().beta
    )))
}
