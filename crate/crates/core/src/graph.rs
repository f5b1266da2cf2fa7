//! Incrementally grown sample set with cached one-hop neighbor lists.
//!
//! Neighbor caches follow the computation-saving scheme for stoppable
//! systems: a new vertex gets its full neighbor list once, is appended to the
//! lists of existing vertices that can reach it, and lists are only ever
//! shrunk afterwards, lazily, the first time they are queried at a new
//! resolution.

use std::io::{self, Write};

use rand::Rng;

use crate::dynamics::DynamicsModel;
use crate::error::{Error, Result};
use crate::geometry::{Environment, State};
use crate::schedule::{ResolutionSchedule, Resolutions};
use crate::spatial::GridIndex;

const MAX_REJECTIONS: usize = 1_000_000;
const RANGE_SLACK: f64 = 1e-9;

pub type VertexId = u32;

#[derive(Clone, Debug)]
pub struct SampleGraph {
    env: Environment,
    model: DynamicsModel,
    schedule: ResolutionSchedule,
    staleness_threshold: u32,
    states: Vec<State>,
    values: Vec<f64>,
    staleness: Vec<u32>,
    neighbors: Vec<Vec<VertexId>>,
    pruned_at: Vec<u64>,
    penetration: Vec<f64>,
    goal_dist: Vec<f64>,
    index: GridIndex,
    res: Resolutions,
    epoch: u64,
}

impl SampleGraph {
    /// Builds the graph on an initial vertex set. Vertices inside the
    /// inflated goal start at 0, others at 1; every staleness starts at the
    /// threshold so the first value iteration refreshes all of them.
    pub fn new(
        env: Environment,
        model: DynamicsModel,
        schedule: ResolutionSchedule,
        staleness_threshold: u32,
        initial: Vec<State>,
    ) -> Result<Self> {
        if initial.iter().any(|s| s.dim() != model.dim()) || env.dim() != model.dim() {
            return Err(Error::Config(format!(
                "state dimension does not match model {}",
                model.kind.name()
            )));
        }
        let res = schedule.at(initial.len())?;
        res.check_eps_exceeds_d()?;
        let ws = env.workspace;
        let cell = (ws.width().max(ws.height()) / 64.0).max(1e-6);
        let index = GridIndex::new(ws, cell);
        let n = initial.len();
        let mut g = SampleGraph {
            env,
            model,
            schedule,
            staleness_threshold,
            states: Vec::with_capacity(n),
            values: Vec::with_capacity(n),
            staleness: Vec::with_capacity(n),
            neighbors: Vec::with_capacity(n),
            pruned_at: Vec::with_capacity(n),
            penetration: Vec::with_capacity(n),
            goal_dist: Vec::with_capacity(n),
            index,
            res,
            epoch: 0,
        };
        for s in initial {
            g.push_vertex(s);
        }
        for id in 0..n as VertexId {
            let f = g.direct_one_hop(id);
            g.neighbors[id as usize] = f;
        }
        Ok(g)
    }

    fn push_vertex(&mut self, s: State) -> VertexId {
        let id = self.states.len() as VertexId;
        self.penetration.push(self.env.penetration(&s));
        self.goal_dist.push(self.env.goal_distance(&s));
        let v = if self.goal_dist[id as usize] <= self.res.goal_radius {
            0.0
        } else {
            1.0
        };
        self.values.push(v);
        self.staleness.push(self.staleness_threshold);
        self.neighbors.push(Vec::new());
        self.pruned_at.push(self.epoch);
        self.index.insert(id, &s);
        self.states.push(s);
        id
    }

    pub fn env(&self) -> &Environment {
        &self.env
    }

    pub fn model(&self) -> &DynamicsModel {
        &self.model
    }

    pub fn schedule(&self) -> &ResolutionSchedule {
        &self.schedule
    }

    pub fn staleness_threshold(&self) -> u32 {
        self.staleness_threshold
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn states(&self) -> &[State] {
        &self.states
    }

    pub fn state(&self, id: VertexId) -> &State {
        &self.states[id as usize]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn value(&self, id: VertexId) -> f64 {
        self.values[id as usize]
    }

    pub fn set_value(&mut self, id: VertexId, v: f64) {
        debug_assert!((0.0..=1.0).contains(&v), "value {v} out of range");
        self.values[id as usize] = v;
    }

    pub fn staleness(&self) -> &[u32] {
        &self.staleness
    }

    pub(crate) fn staleness_mut(&mut self) -> &mut [u32] {
        &mut self.staleness
    }

    /// `(d, eps, rho, Delta, beta)` at the current vertex count.
    pub fn current_resolutions(&self) -> Resolutions {
        self.res
    }

    /// Resolutions that will apply once one more vertex is added.
    pub fn next_resolutions(&self) -> Result<Resolutions> {
        self.schedule.at(self.len() + 1)
    }

    /// Vertex lies in `X_goal + (M eps + d) B` at the current resolutions.
    pub fn in_goal_inflated(&self, id: VertexId) -> bool {
        self.goal_dist[id as usize] <= self.res.goal_radius
    }

    /// Vertex lies in `X_free + d B` at the current resolutions.
    pub fn in_free_inflated(&self, id: VertexId) -> bool {
        self.penetration[id as usize] <= self.res.d
    }

    /// Upper bound on the metric distance between a vertex and any state in
    /// its one-hop set.
    pub fn reach_radius(&self, res: &Resolutions) -> f64 {
        self.model.metric_speed_bound(&self.env.metric) * res.eps + res.rho + RANGE_SLACK
    }

    fn reaches(&self, from: VertexId, to: VertexId, res: &Resolutions) -> bool {
        self.model.reach_membership(
            &self.env.metric,
            &self.states[from as usize],
            &self.states[to as usize],
            res.eps,
            res.rho,
        )
    }

    /// Vertices within metric distance `r` of `x`, ascending by id.
    pub fn range_query(&self, x: &State, r: f64) -> Vec<VertexId> {
        debug_assert!(r >= 0.0);
        self.index.within(&self.states, &self.env.metric, x, r)
    }

    /// One-hop neighbors evaluated from scratch at the current resolutions.
    pub fn direct_one_hop(&self, id: VertexId) -> Vec<VertexId> {
        let res = self.res;
        let x = self.states[id as usize];
        self.range_query(&x, self.reach_radius(&res))
            .into_iter()
            .filter(|&c| c != id && self.penetration[c as usize] <= res.d && self.reaches(id, c, &res))
            .collect()
    }

    /// Cached one-hop neighbors, pruned to the current resolutions.
    pub fn one_hop(&mut self, id: VertexId) -> &[VertexId] {
        let i = id as usize;
        if self.pruned_at[i] != self.epoch {
            let res = self.res;
            let mut list = std::mem::take(&mut self.neighbors[i]);
            list.retain(|&c| self.penetration[c as usize] <= res.d && self.reaches(id, c, &res));
            self.neighbors[i] = list;
            self.pruned_at[i] = self.epoch;
        }
        &self.neighbors[i]
    }

    /// The cache as stored, without pruning.
    pub fn cached_neighbors(&self, id: VertexId) -> &[VertexId] {
        &self.neighbors[id as usize]
    }

    /// Prunes every cache at the current resolutions.
    pub fn prune_all(&mut self) {
        for id in 0..self.len() as VertexId {
            self.one_hop(id);
        }
    }

    /// Draws a uniform state from `X_free + d B`, `d` being the spatial
    /// resolution after the next insertion.
    pub fn sample_free<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<State> {
        let d = self.next_resolutions()?.d;
        sample_inflated_free(&self.env, self.model.dim(), d, rng)
    }

    /// Appends `x_new`, updating resolutions and neighbor caches. Returns the
    /// new vertex id.
    pub fn add_sample(&mut self, x_new: State) -> Result<VertexId> {
        let res = self.next_resolutions()?;
        res.check_eps_exceeds_d()?;
        if res.rho < self.res.d {
            log::warn!(
                "perturbation radius {} below previous spatial resolution {} at |V| = {}",
                res.rho,
                self.res.d,
                self.len() + 1
            );
        }
        assert!(
            self.env.penetration(&x_new) <= res.d,
            "new sample {x_new:?} lies outside the inflated free set"
        );
        self.res = res;
        self.epoch += 1;
        let id = self.push_vertex(x_new);
        self.pruned_at[id as usize] = self.epoch;

        let candidates = self.range_query(&x_new, self.reach_radius(&res));
        let mut own = Vec::new();
        for &c in &candidates {
            if c == id {
                continue;
            }
            if self.penetration[c as usize] <= res.d && self.reaches(id, c, &res) {
                own.push(c);
            }
            if self.reaches(c, id, &res) {
                self.neighbors[c as usize].push(id);
            }
        }
        self.neighbors[id as usize] = own;
        Ok(id)
    }

    /// Writes `id,x0,..,x{n-1},theta_value,staleness`.
    pub fn write_values_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        write_value_rows(&mut w, self, |_| true)
    }

    /// Like [`SampleGraph::write_values_csv`] but only for vertices whose
    /// heading is within `tol` radians of `theta`. Planar graphs write all.
    pub fn write_slice_csv<W: Write>(&self, mut w: W, theta: f64, tol: f64) -> io::Result<()> {
        write_value_rows(&mut w, self, |s| match s.theta() {
            Some(t) => crate::geometry::wrap_angle(t - theta).abs() <= tol,
            None => true,
        })
    }
}

fn write_value_rows<W: Write>(
    w: &mut W,
    g: &SampleGraph,
    keep: impl Fn(&State) -> bool,
) -> io::Result<()> {
    let n = g.model.dim();
    let mut header = String::from("id");
    for i in 0..n {
        header.push_str(&format!(",x{i}"));
    }
    header.push_str(",theta_value,staleness\n");
    w.write_all(header.as_bytes())?;
    for (i, s) in g.states.iter().enumerate() {
        if !keep(s) {
            continue;
        }
        write!(w, "{i}")?;
        for c in s.coords() {
            write!(w, ",{c}")?;
        }
        writeln!(w, ",{},{}", g.values[i], g.staleness[i])?;
    }
    Ok(())
}

/// Rejection sampling from the workspace box inflated by `d`, with a
/// uniform heading for poses.
pub fn sample_inflated_free<R: Rng + ?Sized>(
    env: &Environment,
    dim: usize,
    d: f64,
    rng: &mut R,
) -> Result<State> {
    let b = env.workspace.inflate(d);
    for _ in 0..MAX_REJECTIONS {
        let x = rng.gen_range(b.lo[0]..=b.hi[0]);
        let y = rng.gen_range(b.lo[1]..=b.hi[1]);
        let s = if dim == 3 {
            State::pose(x, y, rng.gen_range(-std::f64::consts::PI..std::f64::consts::PI))
        } else {
            State::planar(x, y)
        };
        if env.penetration(&s) <= d {
            return Ok(s);
        }
    }
    Err(Error::Scenario(format!(
        "{MAX_REJECTIONS} consecutive rejections; free space is effectively empty"
    )))
}

/// Uniform sample from the goal ball intersected with the free space.
pub fn sample_goal<R: Rng + ?Sized>(env: &Environment, rng: &mut R) -> Result<State> {
    let c = env.goal.center;
    let r = env.goal.radius;
    for _ in 0..MAX_REJECTIONS {
        let s = match c.theta() {
            Some(t) => {
                let a = env.metric.angle_scale;
                State::pose(
                    c.x() + rng.gen_range(-r..=r),
                    c.y() + rng.gen_range(-r..=r),
                    t + rng.gen_range(-r..=r) / a,
                )
            }
            None => State::planar(c.x() + rng.gen_range(-r..=r), c.y() + rng.gen_range(-r..=r)),
        };
        if env.in_goal(&s) && env.is_free(&s) {
            return Ok(s);
        }
    }
    Err(Error::Scenario("could not sample a free goal state".into()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::ModelKind;
    use crate::geometry::{Bounds, GoalRegion, Metric, Obstacle};
    use crate::schedule::{default_dispersion_constant, Dispersion, EpsilonRule, RhoRule};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn env(kind: ModelKind, obstacles: Vec<Obstacle>) -> Environment {
        let center = match kind {
            ModelKind::PointMass => State::planar(0.0, 0.0),
            _ => State::pose(0.0, 0.0, 0.0),
        };
        Environment::new(
            Bounds {
                lo: [-10.0, -10.0],
                hi: [10.0, 10.0],
            },
            obstacles,
            GoalRegion {
                center,
                radius: 1.0,
            },
            Metric::default(),
        )
        .unwrap()
    }

    fn graph(kind: ModelKind, b_scale: f64, seed: u64, n0: usize) -> (SampleGraph, ChaCha8Rng) {
        let e = env(kind, vec![]);
        let model = DynamicsModel::new(kind);
        let schedule = ResolutionSchedule {
            dispersion: Dispersion::Asymptotic {
                b: b_scale * default_dispersion_constant(e.state_space_measure(), kind.dim()),
            },
            epsilon_rule: EpsilonRule::default(),
            rho_rule: RhoRule::TwiceD,
            lipschitz: model.lipschitz,
            speed_bound: model.speed_bound,
            dim: kind.dim(),
        };
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let d0 = schedule.at(n0).unwrap().d;
        let init: Vec<State> = (0..n0)
            .map(|_| sample_inflated_free(&e, kind.dim(), d0, &mut rng).unwrap())
            .collect();
        (SampleGraph::new(e, model, schedule, 3, init).unwrap(), rng)
    }

    #[test]
    fn new_vertex_values() {
        let (mut g, _) = graph(ModelKind::PointMass, 0.2, 1, 10);
        let id = g.add_sample(State::planar(0.1, 0.0)).unwrap();
        assert_eq!(g.value(id), 0.0);
        assert_eq!(g.staleness()[id as usize], 3);
        let far = g.add_sample(State::planar(9.9, 9.9)).unwrap();
        let res = g.current_resolutions();
        assert!(14.0 - 1.0 > res.goal_radius, "test assumes far vertex is outside");
        assert_eq!(g.value(far), 1.0);
    }

    #[test]
    fn isolated_vertex_has_no_neighbors() {
        let e = env(ModelKind::PointMass, vec![]);
        let model = DynamicsModel::new(ModelKind::PointMass);
        let schedule = ResolutionSchedule {
            dispersion: Dispersion::Fixed { d: 0.05 },
            epsilon_rule: EpsilonRule::default(),
            rho_rule: RhoRule::TwiceD,
            lipschitz: 0.0,
            speed_bound: 1.0,
            dim: 2,
        };
        let init = vec![
            State::planar(0.0, 0.0),
            State::planar(0.2, 0.0),
            State::planar(-9.0, -9.0),
        ];
        let mut g = SampleGraph::new(e, model, schedule, 0, init).unwrap();
        let x = g.add_sample(State::planar(9.0, 9.0)).unwrap();
        assert!(g.one_hop(x).is_empty());
        assert_eq!(g.one_hop(0), &[1]);
        assert_eq!(g.one_hop(1), &[0]);
    }

    #[test]
    fn one_hop_is_idempotent() {
        let (mut g, mut rng) = graph(ModelKind::PointMass, 0.3, 2, 30);
        for _ in 0..200 {
            let s = g.sample_free(&mut rng).unwrap();
            g.add_sample(s).unwrap();
        }
        for id in 0..g.len() as VertexId {
            let a = g.one_hop(id).to_vec();
            let b = g.one_hop(id).to_vec();
            assert_eq!(a, b);
        }
    }

    #[test]
    fn cache_shrinks_monotonically() {
        let (mut g, mut rng) = graph(ModelKind::SimpleCar, 0.4, 3, 30);
        let mut before: Vec<Vec<VertexId>> = (0..g.len() as VertexId).map(|i| g.one_hop(i).to_vec()).collect();
        for _ in 0..300 {
            let n_before = g.len() as VertexId;
            let s = g.sample_free(&mut rng).unwrap();
            g.add_sample(s).unwrap();
            for id in 0..n_before {
                let now = g.one_hop(id).to_vec();
                let prev = &before[id as usize];
                assert!(now.iter().all(|c| prev.contains(c) || *c >= n_before));
                before[id as usize] = now;
            }
            before.push(g.one_hop(n_before).to_vec());
        }
    }

    #[test]
    fn cache_equals_direct_for_stoppable_models() {
        for kind in [ModelKind::PointMass, ModelKind::SimpleCar] {
            let (mut g, mut rng) = graph(kind, 0.3, 4, 25);
            for _ in 0..400 {
                let s = g.sample_free(&mut rng).unwrap();
                g.add_sample(s).unwrap();
            }
            for id in 0..g.len() as VertexId {
                let direct = g.direct_one_hop(id);
                let mut cached = g.one_hop(id).to_vec();
                cached.sort_unstable();
                assert_eq!(cached, direct, "{kind:?} vertex {id}");
            }
        }
    }

    #[test]
    fn sampling_is_seed_deterministic() {
        let run = |seed| {
            let (mut g, mut rng) = graph(ModelKind::DubinsCar, 0.5, seed, 21);
            for _ in 0..50 {
                let s = g.sample_free(&mut rng).unwrap();
                g.add_sample(s).unwrap();
            }
            g.states().to_vec()
        };
        assert_eq!(run(9), run(9));
        assert_ne!(run(9), run(10));
    }

    #[test]
    fn sampler_respects_inflated_free_set() {
        let e = env(
            ModelKind::PointMass,
            vec![Obstacle::Rect {
                lo: [-11.0, 2.0],
                hi: [11.0, 11.0],
            }],
        );
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for _ in 0..10_000 {
            let s = sample_inflated_free(&e, 2, 0.1, &mut rng).unwrap();
            assert!(e.penetration(&s) <= 0.1);
            assert!(s.y() <= 2.1);
        }
    }

    #[test]
    fn sampler_gives_up_on_empty_space() {
        // the goal pokes out of an obstacle covering everything else
        let e = Environment::new(
            Bounds {
                lo: [0.0, 0.0],
                hi: [10.0, 10.0],
            },
            vec![Obstacle::Rect {
                lo: [0.0, 0.0],
                hi: [10.0, 10.0],
            }],
            GoalRegion {
                center: State::planar(10.0, 10.0),
                radius: 0.5,
            },
            Metric::default(),
        )
        .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        // only the measure-zero boundary is free at d = 0
        assert!(matches!(
            sample_inflated_free(&e, 2, 0.0, &mut rng),
            Err(Error::Scenario(_))
        ));
    }

    #[test]
    fn csv_dump_format() {
        let (g, _) = graph(ModelKind::SimpleCar, 0.5, 5, 3);
        let mut buf = Vec::new();
        g.write_values_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("id,x0,x1,x2,theta_value,staleness"));
        assert_eq!(lines.count(), 3);
    }
}
