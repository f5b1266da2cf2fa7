//! Point mass, simple car and Dubins car.
//!
//! Angles are integrated in radians; the angular rescaling lives only in
//! [`Metric`]. One-hop reachability is evaluated in closed form: the set of
//! Euler successors `x + eps * f(x, U)` is a disc (point mass), a planar
//! rectangle patch (simple car) or a segment (Dubins), so the distance from a
//! candidate state to it is a clamped projection.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::geometry::{wrap_angle, Metric, State};

pub type Control = [f64; 2];

const CONTROL_TOL: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    PointMass,
    SimpleCar,
    DubinsCar,
}

impl ModelKind {
    pub fn name(&self) -> &'static str {
        match self {
            ModelKind::PointMass => "point_mass",
            ModelKind::SimpleCar => "simple_car",
            ModelKind::DubinsCar => "dubins_car",
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            ModelKind::PointMass => 2,
            _ => 3,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ControlSet {
    Disc { radius: f64 },
    Box { lo: Control, hi: Control },
    FixedFirstAxis { value: f64, lo: f64, hi: f64 },
}

impl ControlSet {
    pub fn contains(&self, u: &Control) -> bool {
        match *self {
            ControlSet::Disc { radius } => u[0].hypot(u[1]) <= radius + CONTROL_TOL,
            ControlSet::Box { lo, hi } => (0..2)
                .all(|i| u[i] >= lo[i] - CONTROL_TOL && u[i] <= hi[i] + CONTROL_TOL),
            ControlSet::FixedFirstAxis { value, lo, hi } => {
                (u[0] - value).abs() <= CONTROL_TOL
                    && u[1] >= lo - CONTROL_TOL
                    && u[1] <= hi + CONTROL_TOL
            }
        }
    }

    /// Finite control menu used for policy extraction.
    pub fn discretize(&self) -> Vec<Control> {
        match *self {
            ControlSet::Disc { radius } => {
                let mut menu = vec![[0.0, 0.0]];
                menu.extend((0..16).map(|i| {
                    let a = 2.0 * PI * i as f64 / 16.0;
                    [radius * a.cos(), radius * a.sin()]
                }));
                menu
            }
            ControlSet::Box { lo, hi } => {
                let lin = |a: f64, b: f64, i: usize| a + (b - a) * i as f64 / 4.0;
                let mut menu = Vec::with_capacity(25);
                for i in 0..5 {
                    for j in 0..5 {
                        menu.push([lin(lo[0], hi[0], i), lin(lo[1], hi[1], j)]);
                    }
                }
                menu
            }
            ControlSet::FixedFirstAxis { value, lo, hi } => (0..9)
                .map(|i| [value, lo + (hi - lo) * i as f64 / 8.0])
                .collect(),
        }
    }
}

#[derive(Clone, Debug)]
pub struct DynamicsModel {
    pub kind: ModelKind,
    pub control_set: ControlSet,
    pub controls: Vec<Control>,
    /// Bound on `|f(x, u)|` used for goal inflation `M * eps + d`.
    pub speed_bound: f64,
    /// Lipschitz constant of `f` in `x`.
    pub lipschitz: f64,
    pub stoppable: bool,
}

impl DynamicsModel {
    pub fn new(kind: ModelKind) -> Self {
        let (control_set, speed_bound, lipschitz, stoppable) = match kind {
            ModelKind::PointMass => (ControlSet::Disc { radius: 1.0 }, 1.0, 0.0, true),
            ModelKind::SimpleCar => (
                ControlSet::Box {
                    lo: [-1.0, -1.0],
                    hi: [1.0, 1.0],
                },
                2f64.sqrt(),
                1.0,
                true,
            ),
            ModelKind::DubinsCar => (
                ControlSet::FixedFirstAxis {
                    value: 1.0,
                    lo: -1.0,
                    hi: 1.0,
                },
                2f64.sqrt(),
                1.0,
                false,
            ),
        };
        DynamicsModel {
            kind,
            control_set,
            controls: control_set.discretize(),
            speed_bound,
            lipschitz,
            stoppable,
        }
    }

    pub fn dim(&self) -> usize {
        self.kind.dim()
    }

    pub fn flow(&self, x: &State, u: &Control) -> [f64; 3] {
        assert!(
            self.control_set.contains(u),
            "control {u:?} outside the control set of {}",
            self.kind.name()
        );
        match self.kind {
            ModelKind::PointMass => [u[0], u[1], 0.0],
            ModelKind::SimpleCar | ModelKind::DubinsCar => {
                let t = x.theta().expect("car models need a heading");
                [u[0] * t.cos(), u[0] * t.sin(), u[1]]
            }
        }
    }

    /// One explicit Euler step.
    pub fn integrate(&self, x: &State, u: &Control, dt: f64) -> State {
        debug_assert!(dt > 0.0);
        let v = self.flow(x, u);
        x.offset(&v[..x.dim()], dt)
    }

    /// Largest metric displacement per unit time, used to bound range queries.
    pub fn metric_speed_bound(&self, metric: &Metric) -> f64 {
        match self.kind {
            ModelKind::PointMass => 1.0,
            _ => (1.0 + metric.angle_scale * metric.angle_scale).sqrt(),
        }
    }

    /// Metric distance from `to` to the Euler successor set
    /// `x + eps * f(x, U)`.
    pub fn reach_residual(&self, metric: &Metric, x: &State, to: &State, eps: f64) -> f64 {
        let dx = to.x() - x.x();
        let dy = to.y() - x.y();
        match self.kind {
            ModelKind::PointMass => (dx.hypot(dy) - eps).max(0.0),
            ModelKind::SimpleCar | ModelKind::DubinsCar => {
                let t = x.theta().expect("car models need a heading");
                let to_t = to.theta().expect("car models need a heading");
                let (s, c) = t.sin_cos();
                let along = dx * c + dy * s;
                let lateral = -dx * s + dy * c;
                let along_res = match self.kind {
                    ModelKind::SimpleCar => (along.abs() - eps).max(0.0),
                    _ => along - eps,
                };
                let ang = angular_gap(wrap_angle(to_t - t), eps);
                let a = metric.angle_scale * ang;
                (lateral * lateral + along_res * along_res + a * a).sqrt()
            }
        }
    }

    /// `to` lies in `x + eps * f(x, U) + rho * B`.
    pub fn reach_membership(
        &self,
        metric: &Metric,
        x: &State,
        to: &State,
        eps: f64,
        rho: f64,
    ) -> bool {
        debug_assert!(eps > 0.0 && rho >= 0.0);
        self.reach_residual(metric, x, to, eps) <= rho
    }
}

/// Circular distance from the wrapped angle `d` to the arc `[-eps, eps]`.
fn angular_gap(d: f64, eps: f64) -> f64 {
    if eps >= PI {
        0.0
    } else {
        (d.abs() - eps).max(0.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn point_mass_flow_is_identity() {
        let m = DynamicsModel::new(ModelKind::PointMass);
        let v = m.flow(&State::planar(3.0, 1.0), &[0.6, -0.8]);
        assert_eq!(&v[..2], &[0.6, -0.8]);
    }

    #[test]
    fn car_flows() {
        let car = DynamicsModel::new(ModelKind::SimpleCar);
        let v = car.flow(&State::pose(0.0, 0.0, 0.0), &[1.0, 0.5]);
        assert_eq!(v, [1.0, 0.0, 0.5]);

        let dubins = DynamicsModel::new(ModelKind::DubinsCar);
        let v = dubins.flow(&State::pose(0.0, 0.0, PI / 2.0), &[1.0, 0.0]);
        assert_abs_diff_eq!(v[0], 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(v[1], 1.0, epsilon = 1e-15);
        assert_eq!(v[2], 0.0);
    }

    #[test]
    #[should_panic(expected = "outside the control set")]
    fn rejects_controls_outside_set() {
        DynamicsModel::new(ModelKind::DubinsCar).flow(&State::pose(0.0, 0.0, 0.0), &[0.5, 0.0]);
    }

    #[test]
    fn euler_steps() {
        let pm = DynamicsModel::new(ModelKind::PointMass);
        assert_eq!(
            pm.integrate(&State::planar(0.0, 0.0), &[1.0, 0.0], 0.5),
            State::planar(0.5, 0.0)
        );
        let car = DynamicsModel::new(ModelKind::SimpleCar);
        let y = car.integrate(&State::pose(0.0, 0.0, 0.0), &[0.0, 1.0], 0.1);
        assert_eq!(y.coords(), &[0.0, 0.0, 0.1]);
        let dubins = DynamicsModel::new(ModelKind::DubinsCar);
        let y = dubins.integrate(&State::pose(0.0, 0.0, 0.0), &[1.0, 1.0], 0.01);
        assert_abs_diff_eq!(y.x(), 0.01, epsilon = 1e-15);
        assert_eq!(y.y(), 0.0);
        assert_abs_diff_eq!(y.theta().unwrap(), 0.01, epsilon = 1e-15);
    }

    #[test]
    fn point_mass_membership() {
        let m = DynamicsModel::new(ModelKind::PointMass);
        let metric = Metric::default();
        let o = State::planar(0.0, 0.0);
        assert!(m.reach_membership(&metric, &o, &State::planar(0.9, 0.0), 1.0, 0.1));
        assert!(!m.reach_membership(&metric, &o, &State::planar(1.2, 0.0), 1.0, 0.1));
    }

    #[test]
    fn dubins_cannot_reverse() {
        let m = DynamicsModel::new(ModelKind::DubinsCar);
        let metric = Metric::default();
        let eps = 0.5;
        let o = State::pose(0.0, 0.0, 0.0);
        let back = State::pose(-eps, 0.0, 0.0);
        assert_abs_diff_eq!(m.reach_residual(&metric, &o, &back, eps), 2.0 * eps, epsilon = 1e-12);
        assert!(!m.reach_membership(&metric, &o, &back, eps, 0.9 * eps));
        // not stoppable: the state itself is eps away from its successor segment
        assert!(!m.reach_membership(&metric, &o, &o, eps, 0.9 * eps));
    }

    #[test]
    fn menus_lie_in_control_sets() {
        for kind in [ModelKind::PointMass, ModelKind::SimpleCar, ModelKind::DubinsCar] {
            let m = DynamicsModel::new(kind);
            assert!(!m.controls.is_empty());
            assert!(m.controls.iter().all(|u| m.control_set.contains(u)));
        }
        assert_eq!(DynamicsModel::new(ModelKind::PointMass).controls.len(), 17);
        assert_eq!(DynamicsModel::new(ModelKind::SimpleCar).controls.len(), 25);
        assert_eq!(DynamicsModel::new(ModelKind::DubinsCar).controls.len(), 9);
    }

    #[test]
    fn stoppable_models_reach_themselves() {
        let metric = Metric::default();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for kind in [ModelKind::PointMass, ModelKind::SimpleCar] {
            let m = DynamicsModel::new(kind);
            for _ in 0..1000 {
                let x = random_state(&mut rng, kind);
                let eps = rng.gen_range(1e-3..3.0);
                assert!(m.reach_membership(&metric, &x, &x, eps, 0.0));
            }
        }
    }

    fn random_state(rng: &mut ChaCha8Rng, kind: ModelKind) -> State {
        let x = rng.gen_range(-10.0..10.0);
        let y = rng.gen_range(-10.0..10.0);
        match kind {
            ModelKind::PointMass => State::planar(x, y),
            _ => State::pose(x, y, rng.gen_range(-PI..PI)),
        }
    }

    fn random_control(rng: &mut ChaCha8Rng, set: &ControlSet) -> Control {
        match *set {
            ControlSet::Disc { radius } => {
                let r = radius * rng.gen::<f64>().sqrt();
                let a = rng.gen_range(-PI..PI);
                [r * a.cos(), r * a.sin()]
            }
            ControlSet::Box { lo, hi } => [rng.gen_range(lo[0]..=hi[0]), rng.gen_range(lo[1]..=hi[1])],
            ControlSet::FixedFirstAxis { value, lo, hi } => [value, rng.gen_range(lo..=hi)],
        }
    }

    #[test]
    fn speed_bound_holds() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for kind in [ModelKind::PointMass, ModelKind::SimpleCar, ModelKind::DubinsCar] {
            let m = DynamicsModel::new(kind);
            for _ in 0..100_000 {
                let x = random_state(&mut rng, kind);
                let u = random_control(&mut rng, &m.control_set);
                let v = m.flow(&x, &u);
                let n = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
                assert!(n <= m.speed_bound + 1e-12);
            }
        }
    }

    #[test]
    fn velocity_sets_are_convex() {
        let metric = Metric::default();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for kind in [ModelKind::PointMass, ModelKind::SimpleCar, ModelKind::DubinsCar] {
            let m = DynamicsModel::new(kind);
            for _ in 0..10_000 {
                let x = random_state(&mut rng, kind);
                let u1 = random_control(&mut rng, &m.control_set);
                let u2 = random_control(&mut rng, &m.control_set);
                let lam = rng.gen::<f64>();
                let eps = rng.gen_range(0.01..2.0);
                let (f1, f2) = (m.flow(&x, &u1), m.flow(&x, &u2));
                let v: Vec<f64> = (0..x.dim()).map(|i| lam * f1[i] + (1.0 - lam) * f2[i]).collect();
                let y = x.offset(&v, eps);
                assert!(m.reach_membership(&metric, &x, &y, eps, 1e-9), "{kind:?} {x:?} {y:?}");
            }
        }
    }
}
