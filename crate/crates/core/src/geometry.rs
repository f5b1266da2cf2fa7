//! Workspace, obstacles and goal region.
//!
//! States are points in R^2 (point mass) or R^2 x S^1 (car models). The angle
//! is stored in radians in `[-pi, pi)`; the metric rescales it so that the
//! half-turn `pi` maps to a configurable half-range (10 for a 20 x 20 world),
//! which keeps the angular axis commensurate with the position axes.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Wraps an angle into `[-pi, pi)`.
pub fn wrap_angle(theta: f64) -> f64 {
    if (-PI..PI).contains(&theta) {
        return theta;
    }
    let t = (theta + PI).rem_euclid(2.0 * PI) - PI;
    // rem_euclid can round up to exactly 2*pi for tiny negative inputs
    if t >= PI {
        t - 2.0 * PI
    } else {
        t
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct State {
    coords: [f64; 3],
    dim: usize,
}

impl State {
    pub fn planar(x: f64, y: f64) -> Self {
        State {
            coords: [x, y, 0.0],
            dim: 2,
        }
    }

    /// A car pose; `theta` is in radians and gets wrapped.
    pub fn pose(x: f64, y: f64, theta: f64) -> Self {
        State {
            coords: [x, y, wrap_angle(theta)],
            dim: 3,
        }
    }

    pub fn from_slice(c: &[f64]) -> Option<Self> {
        match *c {
            [x, y] => Some(State::planar(x, y)),
            [x, y, t] => Some(State::pose(x, y, t)),
            _ => None,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords[..self.dim]
    }

    pub fn x(&self) -> f64 {
        self.coords[0]
    }

    pub fn y(&self) -> f64 {
        self.coords[1]
    }

    pub fn theta(&self) -> Option<f64> {
        (self.dim == 3).then_some(self.coords[2])
    }

    pub fn position(&self) -> [f64; 2] {
        [self.coords[0], self.coords[1]]
    }

    /// Component-wise `self + s * v`, re-wrapping the angle.
    pub fn offset(&self, v: &[f64], s: f64) -> Self {
        debug_assert_eq!(v.len(), self.dim);
        match self.dim {
            2 => State::planar(self.coords[0] + s * v[0], self.coords[1] + s * v[1]),
            _ => State::pose(
                self.coords[0] + s * v[0],
                self.coords[1] + s * v[1],
                self.coords[2] + s * v[2],
            ),
        }
    }
}

/// Unsigned shortest arc between two angles, exactly symmetric.
pub fn angle_between(a: f64, b: f64) -> f64 {
    let r = (a - b).abs().rem_euclid(2.0 * PI);
    r.min(2.0 * PI - r)
}

/// Distance on positions plus (for poses) a rescaled, wrapped angle axis.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Metric {
    /// Multiplier applied to angular differences in radians.
    pub angle_scale: f64,
}

impl Metric {
    /// `half_range` is the value the angle `pi` is mapped to.
    pub fn with_angle_half_range(half_range: f64) -> Self {
        Metric {
            angle_scale: half_range / PI,
        }
    }

    pub fn dist(&self, a: &State, b: &State) -> f64 {
        assert_eq!(a.dim, b.dim, "dimension mismatch in dist");
        let dx = a.coords[0] - b.coords[0];
        let dy = a.coords[1] - b.coords[1];
        if a.dim == 2 {
            return dx.hypot(dy);
        }
        let dt = self.angle_scale * angle_between(a.coords[2], b.coords[2]);
        (dx * dx + dy * dy + dt * dt).sqrt()
    }
}

impl Default for Metric {
    fn default() -> Self {
        Metric::with_angle_half_range(10.0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Bounds {
    pub lo: [f64; 2],
    pub hi: [f64; 2],
}

impl Bounds {
    pub fn width(&self) -> f64 {
        self.hi[0] - self.lo[0]
    }

    pub fn height(&self) -> f64 {
        self.hi[1] - self.lo[1]
    }

    pub fn area(&self) -> f64 {
        self.width() * self.height()
    }

    /// Euclidean distance from `p` to the box (0 inside).
    pub fn distance_outside(&self, p: [f64; 2]) -> f64 {
        let dx = (self.lo[0] - p[0]).max(p[0] - self.hi[0]).max(0.0);
        let dy = (self.lo[1] - p[1]).max(p[1] - self.hi[1]).max(0.0);
        dx.hypot(dy)
    }

    pub fn contains(&self, p: [f64; 2]) -> bool {
        self.distance_outside(p) == 0.0
    }

    pub fn inflate(&self, r: f64) -> Bounds {
        Bounds {
            lo: [self.lo[0] - r, self.lo[1] - r],
            hi: [self.hi[0] + r, self.hi[1] + r],
        }
    }

    pub fn clamp(&self, p: [f64; 2]) -> [f64; 2] {
        [
            p[0].clamp(self.lo[0], self.hi[0]),
            p[1].clamp(self.lo[1], self.hi[1]),
        ]
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Obstacle {
    Rect { lo: [f64; 2], hi: [f64; 2] },
    Circle { center: [f64; 2], radius: f64 },
}

impl Obstacle {
    /// Signed distance from `p` to the obstacle boundary, negative inside.
    pub fn signed_distance(&self, p: [f64; 2]) -> f64 {
        match *self {
            Obstacle::Rect { lo, hi } => {
                let cx = 0.5 * (lo[0] + hi[0]);
                let cy = 0.5 * (lo[1] + hi[1]);
                let qx = (p[0] - cx).abs() - 0.5 * (hi[0] - lo[0]);
                let qy = (p[1] - cy).abs() - 0.5 * (hi[1] - lo[1]);
                let outside = qx.max(0.0).hypot(qy.max(0.0));
                outside + qx.max(qy).min(0.0)
            }
            Obstacle::Circle { center, radius } => {
                (p[0] - center[0]).hypot(p[1] - center[1]) - radius
            }
        }
    }

    pub fn feature_size(&self) -> f64 {
        match *self {
            Obstacle::Rect { lo, hi } => (hi[0] - lo[0]).min(hi[1] - lo[1]),
            Obstacle::Circle { radius, .. } => radius,
        }
    }

    fn validate(&self) -> Result<()> {
        let ok = match *self {
            Obstacle::Rect { lo, hi } => lo[0] < hi[0] && lo[1] < hi[1],
            Obstacle::Circle { radius, .. } => radius > 0.0,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("degenerate obstacle {self:?}")))
        }
    }

    fn intersects(&self, b: &Bounds) -> bool {
        match *self {
            Obstacle::Rect { lo, hi } => {
                lo[0] <= b.hi[0] && hi[0] >= b.lo[0] && lo[1] <= b.hi[1] && hi[1] >= b.lo[1]
            }
            Obstacle::Circle { center, radius } => b.distance_outside(center) <= radius,
        }
    }
}

/// Goal region: a closed ball in the scenario metric.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GoalRegion {
    pub center: State,
    pub radius: f64,
}

#[derive(Clone, Debug)]
pub struct Environment {
    pub workspace: Bounds,
    pub obstacles: Vec<Obstacle>,
    pub goal: GoalRegion,
    pub metric: Metric,
    dim: usize,
}

impl Environment {
    pub fn new(
        workspace: Bounds,
        obstacles: Vec<Obstacle>,
        goal: GoalRegion,
        metric: Metric,
    ) -> Result<Self> {
        if !(workspace.lo[0] < workspace.hi[0] && workspace.lo[1] < workspace.hi[1]) {
            return Err(Error::Config("empty workspace".into()));
        }
        if !(goal.radius >= 0.0) {
            return Err(Error::Config("goal radius must be non-negative".into()));
        }
        for o in &obstacles {
            o.validate()?;
            if !o.intersects(&workspace) {
                return Err(Error::Config(format!(
                    "obstacle {o:?} does not intersect the workspace"
                )));
            }
        }
        let env = Environment {
            workspace,
            obstacles,
            goal,
            metric,
            dim: goal.center.dim(),
        };
        if !env.goal_has_free_point() {
            return Err(Error::Config(
                "goal region does not intersect the free space".into(),
            ));
        }
        Ok(env)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn dist(&self, a: &State, b: &State) -> f64 {
        self.metric.dist(a, b)
    }

    /// How far the position of `x` lies inside the obstacle set or outside
    /// the workspace; 0 for free points. `x` is in `X_free + rB` iff this is
    /// at most `r`.
    pub fn penetration(&self, x: &State) -> f64 {
        let p = x.position();
        let outside = self.workspace.distance_outside(p);
        let q = self.workspace.clamp(p);
        let depth = self
            .obstacles
            .iter()
            .map(|o| -o.signed_distance(q))
            .fold(0.0, f64::max);
        if outside == 0.0 {
            depth
        } else {
            outside.hypot(depth)
        }
    }

    pub fn is_free_inflated(&self, x: &State, r: f64) -> bool {
        debug_assert!(r >= 0.0);
        self.penetration(x) <= r
    }

    pub fn is_free(&self, x: &State) -> bool {
        self.is_free_inflated(x, 0.0)
    }

    /// Metric distance from `x` to the goal ball (0 inside).
    pub fn goal_distance(&self, x: &State) -> f64 {
        (self.dist(x, &self.goal.center) - self.goal.radius).max(0.0)
    }

    pub fn in_goal_inflated(&self, x: &State, r: f64) -> bool {
        debug_assert!(r >= 0.0);
        self.goal_distance(x) <= r
    }

    pub fn in_goal(&self, x: &State) -> bool {
        self.in_goal_inflated(x, 0.0)
    }

    pub fn min_feature_size(&self) -> Option<f64> {
        self.obstacles
            .iter()
            .map(Obstacle::feature_size)
            .min_by(f64::total_cmp)
    }

    /// Sub-sampling spacing used by [`Environment::segment_collision_free`]:
    /// a tenth of the smallest obstacle feature or workspace side.
    pub fn collision_spacing(&self) -> f64 {
        let ws = self.workspace.width().min(self.workspace.height());
        self.min_feature_size().map_or(ws, |f| f.min(ws)) / 10.0
    }

    /// Signed distance from the position of `x` to the boundary of the free
    /// set: positive in free space, negative in obstacles or outside the
    /// workspace.
    pub fn clearance(&self, x: &State) -> f64 {
        let p = x.position();
        let ws = &self.workspace;
        let inside = (p[0] - ws.lo[0])
            .min(ws.hi[0] - p[0])
            .min(p[1] - ws.lo[1])
            .min(ws.hi[1] - p[1]);
        let mut c = if inside >= 0.0 {
            inside
        } else {
            -ws.distance_outside(p)
        };
        for o in &self.obstacles {
            c = c.min(o.signed_distance(p));
        }
        c
    }

    /// Checks the straight position segment from `a` to `b` at the default
    /// spacing (a tenth of the smallest obstacle feature).
    pub fn segment_collision_free(&self, a: &State, b: &State) -> bool {
        self.segment_collision_free_with(a, b, self.collision_spacing())
    }

    /// Conservative sub-sampling: the segment is cut into pieces no longer
    /// than `spacing` and every sample point must clear the obstacles by half
    /// a piece, so a `true` answer certifies the whole segment.
    pub fn segment_collision_free_with(&self, a: &State, b: &State, spacing: f64) -> bool {
        let pa = a.position();
        let pb = b.position();
        let len = (pb[0] - pa[0]).hypot(pb[1] - pa[1]);
        let steps = if spacing.is_finite() && spacing > 0.0 {
            (len / spacing).ceil().max(1.0) as usize
        } else {
            1
        };
        let margin = 0.5 * len / steps as f64;
        (0..=steps).all(|i| {
            let t = i as f64 / steps as f64;
            let p = State::planar(pa[0] + t * (pb[0] - pa[0]), pa[1] + t * (pb[1] - pa[1]));
            self.clearance(&p) >= margin
        })
    }

    /// Point-wise probe of the segment at `spacing`, without margin.
    pub fn segment_points_free(&self, a: &State, b: &State, spacing: f64) -> bool {
        let pa = a.position();
        let pb = b.position();
        let len = (pb[0] - pa[0]).hypot(pb[1] - pa[1]);
        let steps = (len / spacing).ceil().max(1.0) as usize;
        (0..=steps).all(|i| {
            let t = i as f64 / steps as f64;
            self.is_free(&State::planar(
                pa[0] + t * (pb[0] - pa[0]),
                pa[1] + t * (pb[1] - pa[1]),
            ))
        })
    }

    /// Lebesgue measure of the state space in metric units.
    pub fn state_space_measure(&self) -> f64 {
        let area = self.workspace.area();
        if self.dim == 3 {
            area * 2.0 * PI * self.metric.angle_scale
        } else {
            area
        }
    }

    fn goal_has_free_point(&self) -> bool {
        let c = self.goal.center;
        if self.is_free(&c) {
            return true;
        }
        // probe a polar grid of positions inside the ball
        let r = self.goal.radius;
        (1..=8).any(|i| {
            let rad = r * i as f64 / 8.0;
            (0..32).any(|j| {
                let a = 2.0 * PI * j as f64 / 32.0;
                let p = State::planar(c.x() + rad * a.cos(), c.y() + rad * a.sin());
                self.is_free(&p)
            })
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn world(obstacles: Vec<Obstacle>) -> Environment {
        Environment::new(
            Bounds {
                lo: [-10.0, -10.0],
                hi: [10.0, 10.0],
            },
            obstacles,
            GoalRegion {
                center: State::planar(0.0, 0.0),
                radius: 1.0,
            },
            Metric::default(),
        )
        .unwrap()
    }

    #[test]
    fn planar_distance() {
        let m = Metric::default();
        assert_eq!(
            m.dist(&State::planar(0.0, 0.0), &State::planar(3.0, 4.0)),
            5.0
        );
    }

    #[test]
    fn angular_distance_wraps() {
        let m = Metric::with_angle_half_range(10.0);
        // 9.5 and -9.5 in rescaled units
        let a = State::pose(0.0, 0.0, 0.95 * PI);
        let b = State::pose(0.0, 0.0, -0.95 * PI);
        assert_abs_diff_eq!(m.dist(&a, &b), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn identical_states() {
        let a = State::pose(1.0, 2.0, 3.0);
        assert_eq!(Metric::default().dist(&a, &a), 0.0);
    }

    #[test]
    #[should_panic(expected = "dimension mismatch")]
    fn mismatched_dimensions_panic() {
        Metric::default().dist(&State::planar(0.0, 0.0), &State::pose(0.0, 0.0, 0.0));
    }

    #[test]
    fn wrap_angle_range() {
        for t in [-7.0, -PI, -1e-18, 0.0, PI, 3.5 * PI, 100.0] {
            let w = wrap_angle(t);
            assert!((-PI..PI).contains(&w), "{t} -> {w}");
        }
    }

    #[test]
    fn free_space_queries() {
        let env = world(vec![Obstacle::Rect {
            lo: [2.0, 2.0],
            hi: [4.0, 6.0],
        }]);
        assert!(env.is_free_inflated(&State::planar(0.0, 0.0), 0.0));
        assert!(!env.is_free_inflated(&State::planar(3.0, 4.0), 0.0));
        // just outside the right workspace edge
        assert!(env.is_free_inflated(&State::planar(10.05, 0.0), 0.1));
        assert!(!env.is_free_inflated(&State::planar(10.05, 0.0), 0.0));
        // 0.5 deep into the rectangle from its left side
        assert!(env.is_free_inflated(&State::planar(2.5, 4.0), 0.5));
        assert!(!env.is_free_inflated(&State::planar(2.5, 4.0), 0.49));
    }

    #[test]
    fn goal_queries() {
        let env = world(vec![]);
        assert!(env.in_goal_inflated(&State::planar(0.0, 0.0), 0.0));
        assert!(env.in_goal_inflated(&State::planar(1.4, 0.0), 0.5));
        assert!(!env.in_goal_inflated(&State::planar(10.0, 10.0), 0.5));
    }

    #[test]
    fn segments() {
        let env = world(vec![Obstacle::Circle {
            center: [5.0, 0.0],
            radius: 1.0,
        }]);
        assert!(env.segment_collision_free(&State::planar(-5.0, -5.0), &State::planar(-1.0, -2.0)));
        assert!(!env.segment_collision_free(&State::planar(3.0, 0.0), &State::planar(7.0, 0.0)));
        // grazing at clearance 1e-3 is below the half-step margin, so the
        // conservative rule rejects it
        let spacing = env.collision_spacing();
        let steps = (4.0 / spacing).ceil();
        let margin = 0.5 * 4.0 / steps;
        let y = 1.0 + 1e-3;
        assert!(y - 1.0 < margin);
        assert!(!env.segment_collision_free(&State::planar(3.0, y), &State::planar(7.0, y)));
        let y = 1.0 + 1.01 * margin;
        assert!(env.segment_collision_free(&State::planar(3.0, y), &State::planar(7.0, y)));
    }

    proptest! {
        #[test]
        fn accepted_segments_are_free(
            ax in -10.0..10.0f64, ay in -10.0..10.0f64,
            bx in -10.0..10.0f64, by in -10.0..10.0f64,
        ) {
            let env = world(vec![
                Obstacle::Circle { center: [5.0, 0.0], radius: 1.0 },
                Obstacle::Rect { lo: [-4.0, -6.0], hi: [-3.0, 2.0] },
            ]);
            let a = State::planar(ax, ay);
            let b = State::planar(bx, by);
            if env.segment_collision_free(&a, &b) {
                prop_assert!(env.segment_points_free(&a, &b, 1e-3));
            }
        }
    }

    #[test]
    fn rejects_goal_inside_obstacle() {
        let r = Environment::new(
            Bounds {
                lo: [-10.0, -10.0],
                hi: [10.0, 10.0],
            },
            vec![Obstacle::Circle {
                center: [0.0, 0.0],
                radius: 3.0,
            }],
            GoalRegion {
                center: State::planar(0.0, 0.0),
                radius: 1.0,
            },
            Metric::default(),
        );
        assert!(matches!(r, Err(Error::Config(_))));
    }

    #[test]
    fn rejects_obstacle_outside_workspace() {
        let r = Environment::new(
            Bounds {
                lo: [-10.0, -10.0],
                hi: [10.0, 10.0],
            },
            vec![Obstacle::Circle {
                center: [20.0, 0.0],
                radius: 1.0,
            }],
            GoalRegion {
                center: State::planar(0.0, 0.0),
                radius: 1.0,
            },
            Metric::default(),
        );
        assert!(r.is_err());
    }

    fn pose() -> impl Strategy<Value = State> {
        (-12.0..12.0f64, -12.0..12.0f64, -PI..PI).prop_map(|(x, y, t)| State::pose(x, y, t))
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(2000))]

        #[test]
        fn metric_axioms(a in pose(), b in pose(), c in pose()) {
            let m = Metric::default();
            let ab = m.dist(&a, &b);
            prop_assert_eq!(ab, m.dist(&b, &a));
            prop_assert!(ab >= 0.0);
            prop_assert_eq!(m.dist(&a, &a), 0.0);
            prop_assert!(m.dist(&a, &c) <= ab + m.dist(&b, &c) + 1e-12);
        }

        #[test]
        fn free_inflation_is_monotone(x in pose(), r1 in 0.0..2.0f64, dr in 0.0..2.0f64) {
            let env = world(vec![
                Obstacle::Rect { lo: [2.0, 2.0], hi: [6.0, 5.0] },
                Obstacle::Circle { center: [-5.0, -5.0], radius: 2.0 },
            ]);
            let p = State::planar(x.x(), x.y());
            if env.is_free_inflated(&p, r1) {
                prop_assert!(env.is_free_inflated(&p, r1 + dr));
            }
        }

        #[test]
        fn goal_inflation_is_monotone(x in pose(), r in 0.0..5.0f64) {
            let env = world(vec![]);
            let p = State::planar(x.x(), x.y());
            if env.in_goal_inflated(&p, 0.0) {
                prop_assert!(env.in_goal_inflated(&p, r));
            }
        }
    }
}
