//! Greedy feedback policy over a value table and closed-loop simulation.

use std::fmt;
use std::io::{self, Write};

use crate::dynamics::Control;
use crate::geometry::State;
use crate::graph::SampleGraph;
use crate::value_iteration::kruzhkov_inv;

/// Euler sub-steps per control hold.
pub const SUBSTEPS: usize = 10;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Outcome {
    ReachedGoal,
    Collided,
    TimedOut,
    Stuck,
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Outcome::ReachedGoal => "reached_goal",
            Outcome::Collided => "collided",
            Outcome::TimedOut => "timed_out",
            Outcome::Stuck => "stuck",
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    pub states: Vec<State>,
    pub controls: Vec<Control>,
    pub dt: f64,
    pub hit_time: f64,
    pub outcome: Outcome,
}

impl Trajectory {
    pub fn duration(&self) -> f64 {
        self.controls.len() as f64 * self.dt
    }

    /// `t,x0,..,x{n-1},u0,u1` per state; the final state has empty control
    /// fields. A trailing comment records the outcome.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        let n = self.states.first().map_or(2, State::dim);
        let mut header = String::from("t");
        for i in 0..n {
            header.push_str(&format!(",x{i}"));
        }
        header.push_str(",u0,u1\n");
        w.write_all(header.as_bytes())?;
        for (i, s) in self.states.iter().enumerate() {
            write!(w, "{}", i as f64 * self.dt)?;
            for c in s.coords() {
                write!(w, ",{c}")?;
            }
            match self.controls.get(i) {
                Some(u) => writeln!(w, ",{},{}", u[0], u[1])?,
                None => writeln!(w, ",,")?,
            }
        }
        writeln!(
            w,
            "# outcome={},hit_time={},steps={}",
            self.outcome,
            self.hit_time,
            self.controls.len()
        )
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Decision {
    /// Index into the model's control menu.
    pub index: usize,
    pub control: Control,
    pub score: f64,
}

/// One-step lookahead: for each menu control, hold it for `eps` and score
/// the landing point by `Delta + beta * min Theta` over vertices within
/// `rho`. A held path that enters the goal before any collision scores 0.
/// Controls whose held path collides, or whose landing point has no
/// vertex nearby or lies outside the inflated free set, score 1. Ties go to
/// the landing point closest to the goal, then to the lowest menu index.
/// Controls with zero velocity are skipped. `None` means every control
/// scores 1.
pub fn greedy_control(graph: &SampleGraph, values: &[f64], x: &State) -> Option<Decision> {
    let res = graph.current_resolutions();
    let env = graph.env();
    let model = graph.model();
    let mut best: Option<(Decision, f64)> = None;
    for (index, u) in model.controls.iter().enumerate() {
        if model.flow(x, u).iter().all(|&v| v == 0.0) {
            continue;
        }
        let (y, path) = hold(graph, x, u, res.eps);
        let gd = env.goal_distance(&y);
        let score = if path == Hold::ReachesGoal {
            0.0
        } else if path != Hold::Free || !env.is_free_inflated(&y, res.d) {
            1.0
        } else {
            graph
                .range_query(&y, res.rho)
                .iter()
                .map(|&v| values[v as usize])
                .min_by(f64::total_cmp)
                .map_or(1.0, |m| res.delta + res.beta * m)
        };
        let better = match &best {
            None => true,
            Some((b, bgd)) => score < b.score || (score == b.score && gd < *bgd),
        };
        if better {
            let d = Decision {
                index,
                control: *u,
                score,
            };
            best = Some((d, gd));
        }
    }
    best.map(|(d, _)| d).filter(|d| d.score < 1.0)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Hold {
    Free,
    Collides,
    ReachesGoal,
}

/// Integrates `u` for `eps` in sub-steps, stopping early on collision or
/// goal entry.
fn hold(graph: &SampleGraph, x: &State, u: &Control, eps: f64) -> (State, Hold) {
    let env = graph.env();
    let dt = eps / SUBSTEPS as f64;
    let mut cur = *x;
    for _ in 0..SUBSTEPS {
        let next = graph.model().integrate(&cur, u, dt);
        if !env.segment_collision_free(&cur, &next) {
            return (next, Hold::Collides);
        }
        cur = next;
        if env.in_goal(&cur) {
            return (cur, Hold::ReachesGoal);
        }
    }
    (cur, Hold::Free)
}

/// Closed-loop simulation: re-plan every `eps`, integrate with `eps / 10`
/// Euler sub-steps, check each sub-segment for collision, and stop on goal
/// entry, collision, a stuck decision or `max_time`.
pub fn rollout(graph: &SampleGraph, values: &[f64], x0: State, max_time: f64) -> Trajectory {
    let env = graph.env();
    let model = graph.model();
    let eps = graph.current_resolutions().eps;
    let dt = eps / SUBSTEPS as f64;
    let mut traj = Trajectory {
        states: vec![x0],
        controls: Vec::new(),
        dt,
        hit_time: f64::INFINITY,
        outcome: Outcome::TimedOut,
    };
    if env.in_goal(&x0) {
        traj.hit_time = 0.0;
        traj.outcome = Outcome::ReachedGoal;
        return traj;
    }
    let mut x = x0;
    loop {
        if traj.duration() >= max_time {
            traj.outcome = Outcome::TimedOut;
            return traj;
        }
        let Some(decision) = greedy_control(graph, values, &x) else {
            traj.outcome = Outcome::Stuck;
            return traj;
        };
        for _ in 0..SUBSTEPS {
            let next = model.integrate(&x, &decision.control, dt);
            traj.controls.push(decision.control);
            traj.states.push(next);
            if !env.segment_collision_free(&x, &next) {
                traj.outcome = Outcome::Collided;
                return traj;
            }
            x = next;
            if env.in_goal(&x) {
                traj.outcome = Outcome::ReachedGoal;
                traj.hit_time = traj.duration();
                return traj;
            }
        }
    }
}

/// First goal-entry time of a successful trajectory, `+inf` otherwise.
pub fn hitting_time(traj: &Trajectory) -> f64 {
    match traj.outcome {
        Outcome::ReachedGoal => traj.hit_time,
        _ => f64::INFINITY,
    }
}

/// Re-checks every segment of `traj` at a tenth of the usual spacing.
pub fn revalidate(graph: &SampleGraph, traj: &Trajectory) -> bool {
    let env = graph.env();
    let spacing = (env.collision_spacing() / 10.0).min(traj.dt / 10.0);
    traj.states
        .windows(2)
        .all(|w| env.segment_points_free(&w[0], &w[1], spacing))
}

/// Time-to-go implied by the smallest value within `r` of `x`.
pub fn estimated_time(graph: &SampleGraph, values: &[f64], x: &State, r: f64) -> f64 {
    graph
        .range_query(x, r)
        .iter()
        .map(|&v| values[v as usize])
        .min_by(f64::total_cmp)
        .map_or(f64::INFINITY, kruzhkov_inv)
}
