//! Scenario configuration (TOML) and bundled presets.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dynamics::{DynamicsModel, ModelKind};
use crate::error::{Error, Result};
use crate::geometry::{Bounds, Environment, GoalRegion, Metric, Obstacle, State};
use crate::schedule::{
    default_dispersion_constant, dispersion_lower_bound, Dispersion, EpsilonRule,
    ResolutionSchedule, RhoRule,
};
use crate::value_iteration::ViConfig;

const PRESETS: &[(&str, &str)] = &[
    ("pointmass_fig2", include_str!("../presets/pointmass_fig2.toml")),
    ("pointmass_empty", include_str!("../presets/pointmass_empty.toml")),
    ("simplecar_value_fig3", include_str!("../presets/simplecar_value_fig3.toml")),
    ("parking_headin_fig4a", include_str!("../presets/parking_headin_fig4a.toml")),
    ("parking_parallel_fig4b", include_str!("../presets/parking_parallel_fig4b.toml")),
    ("dubins_fig5", include_str!("../presets/dubins_fig5.toml")),
];

pub fn preset_names() -> impl Iterator<Item = &'static str> {
    PRESETS.iter().map(|(n, _)| *n)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GoalConfig {
    /// `[x, y]` or `[x, y, theta]` with theta in radians.
    pub center: Vec<f64>,
    pub radius: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MetricConfig {
    /// Value the heading `pi` is mapped to in the metric.
    pub angle_half_range: f64,
}

impl Default for MetricConfig {
    fn default() -> Self {
        MetricConfig {
            angle_half_range: 10.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScheduleConfig {
    /// Dispersion constant `B`; defaults to 1.1 times its lower bound.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub b: Option<f64>,
    pub epsilon_coef: f64,
    pub epsilon_exponent: f64,
    pub rho_rule: RhoRule,
    /// Lipschitz constant `l`; model default when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lipschitz: Option<f64>,
    /// Velocity bound `M`; model default when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub speed_bound: Option<f64>,
}

impl Default for ScheduleConfig {
    fn default() -> Self {
        let e = EpsilonRule::default();
        ScheduleConfig {
            b: None,
            epsilon_coef: e.coef,
            epsilon_exponent: e.exponent,
            rho_rule: RhoRule::default(),
            lipschitz: None,
            speed_bound: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct InitConfig {
    pub uniform_samples: usize,
    pub goal_samples: usize,
}

impl Default for InitConfig {
    fn default() -> Self {
        InitConfig {
            uniform_samples: 20,
            goal_samples: 1,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CheckpointConfig {
    /// Checkpoint every `every` iterations; 0 disables.
    pub every: usize,
    /// Checkpoint when the vertex count reaches one of these values.
    pub at_samples: Vec<usize>,
}

impl CheckpointConfig {
    pub fn due(&self, k: usize, vertices: usize) -> bool {
        (self.every > 0 && k % self.every == 0) || self.at_samples.contains(&vertices)
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OracleChoice {
    /// Analytic for empty planar worlds, grid oracle otherwise, none for cars.
    #[default]
    Auto,
    None,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvaluationConfig {
    pub oracle: OracleChoice,
    pub oracle_resolution: f64,
    pub multigrid_resolutions: Vec<f64>,
    pub multigrid_tol: f64,
    /// Seeds used by the comparison harness.
    pub seeds: Vec<u64>,
}

impl Default for EvaluationConfig {
    fn default() -> Self {
        EvaluationConfig {
            oracle: OracleChoice::Auto,
            oracle_resolution: 0.02,
            multigrid_resolutions: vec![0.8, 0.4, 0.2, 0.1],
            multigrid_tol: 1e-9,
            seeds: vec![1, 2, 3, 4, 5],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RolloutConfig {
    pub starts: Vec<Vec<f64>>,
    pub max_time: f64,
}

impl Default for RolloutConfig {
    fn default() -> Self {
        RolloutConfig {
            starts: Vec::new(),
            max_time: 100.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ParkingConfig {
    /// Attempt a rollout every this many iterations.
    pub check_every: usize,
}

impl Default for ParkingConfig {
    fn default() -> Self {
        ParkingConfig { check_every: 10 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    /// When false, every wall-clock column is written as 0 so artifacts are
    /// byte-identical across runs.
    pub wall_clock: bool,
    /// Heading of the value slice, radians; the goal heading when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub slice_theta: Option<f64>,
    pub slice_tolerance_deg: f64,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig {
            wall_clock: true,
            slice_theta: None,
            slice_tolerance_deg: 10.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub name: String,
    pub model: ModelKind,
    #[serde(default)]
    pub seed: u64,
    pub workspace: Bounds,
    #[serde(default)]
    pub obstacles: Vec<Obstacle>,
    pub goal: GoalConfig,
    #[serde(default)]
    pub metric: MetricConfig,
    #[serde(default)]
    pub schedule: ScheduleConfig,
    #[serde(default)]
    pub vi: ViConfig,
    #[serde(default)]
    pub init: InitConfig,
    #[serde(default)]
    pub checkpoints: CheckpointConfig,
    #[serde(default)]
    pub evaluation: EvaluationConfig,
    #[serde(default)]
    pub rollout: RolloutConfig,
    #[serde(default)]
    pub parking: ParkingConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

/// Everything needed to start a planner, built from a validated config.
#[derive(Clone, Debug)]
pub struct Scenario {
    pub env: Environment,
    pub model: DynamicsModel,
    pub schedule: ResolutionSchedule,
    pub starts: Vec<State>,
}

impl ScenarioConfig {
    pub fn from_toml(text: &str) -> std::result::Result<Self, toml::de::Error> {
        toml::from_str(text)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text).map_err(|source| Error::ConfigParse {
            path: path.to_path_buf(),
            source,
        })
    }

    pub fn preset(name: &str) -> Result<Self> {
        let (_, text) = PRESETS.iter().find(|(n, _)| *n == name).ok_or_else(|| {
            let known: Vec<&str> = preset_names().collect();
            Error::Config(format!("unknown preset {name:?}; known: {}", known.join(", ")))
        })?;
        Self::from_toml(text).map_err(|source| Error::ConfigParse {
            path: format!("<preset {name}>").into(),
            source,
        })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    fn state(&self, c: &[f64], what: &str) -> Result<State> {
        let s = State::from_slice(c)
            .ok_or_else(|| Error::Config(format!("{what} must have 2 or 3 coordinates")))?;
        if s.dim() != self.model.dim() {
            return Err(Error::Config(format!(
                "{what} has {} coordinates but {} needs {}",
                s.dim(),
                self.model.name(),
                self.model.dim()
            )));
        }
        Ok(s)
    }

    /// Fills every defaulted field with its concrete value.
    pub fn resolved(&self) -> Result<Self> {
        let mut c = self.clone();
        let scenario = self.build()?;
        c.schedule.b = Some(match scenario.schedule.dispersion {
            Dispersion::Asymptotic { b } => b,
            Dispersion::Fixed { d } => d,
        });
        c.schedule.lipschitz = Some(scenario.schedule.lipschitz);
        c.schedule.speed_bound = Some(scenario.schedule.speed_bound);
        if c.output.slice_theta.is_none() {
            c.output.slice_theta = scenario.env.goal.center.theta();
        }
        Ok(c)
    }

    /// Validates the config and constructs environment, model and schedule.
    pub fn build(&self) -> Result<Scenario> {
        if !(self.metric.angle_half_range > 0.0) {
            return Err(Error::Config("angle_half_range must be positive".into()));
        }
        let metric = Metric::with_angle_half_range(self.metric.angle_half_range);
        let goal = GoalRegion {
            center: self.state(&self.goal.center, "goal center")?,
            radius: self.goal.radius,
        };
        let env = Environment::new(self.workspace, self.obstacles.clone(), goal, metric)?;

        let mut model = DynamicsModel::new(self.model);
        if let Some(m) = self.schedule.speed_bound {
            if !(m > 0.0) {
                return Err(Error::Config("speed_bound must be positive".into()));
            }
            model.speed_bound = m;
        }
        if let Some(l) = self.schedule.lipschitz {
            if !(l >= 0.0) {
                return Err(Error::Config("lipschitz must be non-negative".into()));
            }
            model.lipschitz = l;
        }

        let dim = model.dim();
        let lower = dispersion_lower_bound(env.state_space_measure(), dim);
        let b = match self.schedule.b {
            Some(b) if b > 0.0 => b,
            Some(b) => return Err(Error::Config(format!("dispersion constant {b} must be positive"))),
            None => default_dispersion_constant(env.state_space_measure(), dim),
        };
        if b <= lower {
            log::warn!("dispersion constant {b} is at or below its lower bound {lower}");
        }
        if !(self.schedule.epsilon_coef > 0.0 && self.schedule.epsilon_exponent > 0.0) {
            return Err(Error::Config("epsilon rule coefficients must be positive".into()));
        }
        let schedule = ResolutionSchedule {
            dispersion: Dispersion::Asymptotic { b },
            epsilon_rule: EpsilonRule {
                coef: self.schedule.epsilon_coef,
                exponent: self.schedule.epsilon_exponent,
            },
            rho_rule: self.schedule.rho_rule,
            lipschitz: model.lipschitz,
            speed_bound: model.speed_bound,
            dim,
        };

        self.vi.validate()?;
        if self.init.goal_samples == 0 {
            return Err(Error::Config("init.goal_samples must be at least 1".into()));
        }
        let n0 = self.init.uniform_samples + self.init.goal_samples;
        schedule.at(n0)?.check_eps_exceeds_d()?;
        if !(self.evaluation.oracle_resolution > 0.0 && self.evaluation.multigrid_tol > 0.0) {
            return Err(Error::Config("oracle resolution and multigrid tolerance must be positive".into()));
        }
        if !(self.rollout.max_time > 0.0) {
            return Err(Error::Config("rollout.max_time must be positive".into()));
        }
        if self.parking.check_every == 0 {
            return Err(Error::Config("parking.check_every must be at least 1".into()));
        }

        let mut starts = Vec::with_capacity(self.rollout.starts.len());
        for (i, c) in self.rollout.starts.iter().enumerate() {
            let s = self.state(c, &format!("rollout start {i}"))?;
            if !env.is_free(&s) {
                return Err(Error::Config(format!(
                    "rollout start {i} {c:?} is not in the free space"
                )));
            }
            starts.push(s);
        }
        Ok(Scenario {
            env,
            model,
            schedule,
            starts,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
name = "tiny"
model = "point_mass"
workspace = { lo = [-5.0, -5.0], hi = [5.0, 5.0] }
goal = { center = [0.0, 0.0], radius = 1.0 }
"#;

    #[test]
    fn minimal_config_gets_defaults() {
        let c = ScenarioConfig::from_toml(MINIMAL).unwrap();
        assert_eq!(c.vi.staleness_threshold, 50);
        assert_eq!(c.init.uniform_samples, 20);
        let s = c.build().unwrap();
        assert_eq!(s.model.kind, ModelKind::PointMass);
        let r = c.resolved().unwrap();
        let b = r.schedule.b.unwrap();
        assert!((b - 1.1 * (100.0 / std::f64::consts::PI).sqrt()).abs() < 1e-12);
        // resolved config round-trips
        let back = ScenarioConfig::from_toml(&r.to_toml()).unwrap();
        assert_eq!(back, r);
    }

    #[test]
    fn every_preset_parses_and_validates() {
        for name in preset_names() {
            let c = ScenarioConfig::preset(name).unwrap();
            assert_eq!(c.name, name);
            c.build().unwrap_or_else(|e| panic!("{name}: {e}"));
        }
        assert!(ScenarioConfig::preset("nope").is_err());
    }

    #[test]
    fn rejects_eps_not_above_d() {
        let text = format!("{MINIMAL}\n[schedule]\nepsilon_coef = 0.001\nepsilon_exponent = 1.0\n");
        let c = ScenarioConfig::from_toml(&text).unwrap();
        assert!(matches!(c.build(), Err(Error::Config(_))));
    }

    #[test]
    fn rejects_start_in_obstacle() {
        let text = format!(
            "{MINIMAL}\n[[obstacles]]\nkind = \"circle\"\ncenter = [3.0, 3.0]\nradius = 1.0\n\n[rollout]\nstarts = [[3.0, 3.0]]\n"
        );
        let c = ScenarioConfig::from_toml(&text).unwrap();
        assert!(matches!(c.build(), Err(Error::Config(_))));
    }

    #[test]
    fn rejects_dimension_mismatch() {
        let text = MINIMAL.replace("point_mass", "simple_car");
        let c = ScenarioConfig::from_toml(&text).unwrap();
        assert!(matches!(c.build(), Err(Error::Config(_))));
    }

    #[test]
    fn rejects_unknown_fields() {
        let text = format!("{MINIMAL}\nbogus = 1\n");
        assert!(ScenarioConfig::from_toml(&text).is_err());
    }

    #[test]
    fn checkpoint_policy() {
        let c = CheckpointConfig {
            every: 10,
            at_samples: vec![55],
        };
        assert!(c.due(20, 41));
        assert!(!c.due(21, 42));
        assert!(c.due(34, 55));
        assert!(!CheckpointConfig::default().due(10, 10));
    }
}
