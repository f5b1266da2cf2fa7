//! The incremental planning loop: sample, insert, value-iterate.

use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::dynamics::DynamicsModel;
use crate::error::{Error, Result};
use crate::geometry::Environment;
use crate::graph::{sample_goal, sample_inflated_free, SampleGraph};
use crate::schedule::{ResolutionSchedule, Resolutions};
use crate::value_iteration::{value_iteration_step, Backprop, StepReport, ViConfig};

/// One row of the per-iteration log.
#[derive(Clone, Debug, PartialEq)]
pub struct IterationRecord {
    pub k: usize,
    pub vertices: usize,
    pub res: Resolutions,
    pub report: StepReport,
    pub wall_ms: f64,
}

pub struct Planner {
    graph: SampleGraph,
    rng: ChaCha8Rng,
    scratch: Backprop,
    vi: ViConfig,
    k: usize,
    busy_s: f64,
}

impl Planner {
    /// Initial vertex set: `uniform` samples from the inflated free set
    /// followed by `goal` samples from the goal region.
    pub fn new(
        env: Environment,
        model: DynamicsModel,
        schedule: ResolutionSchedule,
        vi: ViConfig,
        uniform: usize,
        goal: usize,
        seed: u64,
    ) -> Result<Self> {
        vi.validate()?;
        if goal == 0 {
            return Err(Error::Config(
                "the initial vertex set must intersect the goal region".into(),
            ));
        }
        let started = Instant::now();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let d0 = schedule.at(uniform + goal)?.d;
        let mut initial = Vec::with_capacity(uniform + goal);
        for _ in 0..uniform {
            initial.push(sample_inflated_free(&env, model.dim(), d0, &mut rng)?);
        }
        for _ in 0..goal {
            initial.push(sample_goal(&env, &mut rng)?);
        }
        let graph = SampleGraph::new(env, model, schedule, vi.staleness_threshold, initial)?;
        Ok(Planner {
            graph,
            rng,
            scratch: Backprop::new(),
            vi,
            k: 0,
            busy_s: started.elapsed().as_secs_f64(),
        })
    }

    pub fn graph(&self) -> &SampleGraph {
        &self.graph
    }

    pub fn graph_mut(&mut self) -> &mut SampleGraph {
        &mut self.graph
    }

    pub fn iteration(&self) -> usize {
        self.k
    }

    pub fn vi_config(&self) -> &ViConfig {
        &self.vi
    }

    /// Seconds spent inside [`Planner::new`] and [`Planner::step`].
    pub fn busy_seconds(&self) -> f64 {
        self.busy_s
    }

    /// True once `K` iterations ran or the time budget is spent.
    pub fn finished(&self) -> bool {
        self.k >= self.vi.max_iterations
            || self.vi.time_budget_s.is_some_and(|b| self.busy_s >= b)
    }

    /// One iteration: draw a sample, insert it and run one asynchronous
    /// value iteration.
    pub fn step(&mut self) -> Result<IterationRecord> {
        let t0 = Instant::now();
        let prev = self.graph.current_resolutions();
        let x_new = self.graph.sample_free(&mut self.rng)?;
        self.graph.add_sample(x_new)?;
        let res = self.graph.current_resolutions();
        debug_assert!(res.d <= prev.d && res.eps <= prev.eps);
        debug_assert!(res.d / res.eps <= prev.d / prev.eps + 1e-15);
        let recursion = self.vi.recursion;
        let report = value_iteration_step(&mut self.graph, &recursion, &mut self.scratch);
        self.k += 1;
        let dt = t0.elapsed().as_secs_f64();
        self.busy_s += dt;
        Ok(IterationRecord {
            k: self.k,
            vertices: self.graph.len(),
            res,
            report,
            wall_ms: dt * 1e3,
        })
    }
}
