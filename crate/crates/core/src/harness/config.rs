//! Scenario configuration, read from a single JSON document.

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::observers::{Gains, Predictor};
use crate::so3::{exp_skew, Mat3, Rotation, Vec3};
use crate::truth::{NoiseSpec, OmegaProfile};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scenario {
    ConstantOmega,
    GainSweep,
    ManifoldConvergence,
    Noise,
    EulerComparison,
    DtSweep,
    TaylorPredictor,
    Stabilization,
    PathTracking,
    Replay,
}

impl Scenario {
    pub const ALL: [Scenario; 10] = [
        Scenario::ConstantOmega,
        Scenario::GainSweep,
        Scenario::ManifoldConvergence,
        Scenario::Noise,
        Scenario::EulerComparison,
        Scenario::DtSweep,
        Scenario::TaylorPredictor,
        Scenario::Stabilization,
        Scenario::PathTracking,
        Scenario::Replay,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Scenario::ConstantOmega => "constant_omega",
            Scenario::GainSweep => "gain_sweep",
            Scenario::ManifoldConvergence => "manifold_convergence",
            Scenario::Noise => "noise",
            Scenario::EulerComparison => "euler_comparison",
            Scenario::DtSweep => "dt_sweep",
            Scenario::TaylorPredictor => "taylor_predictor",
            Scenario::Stabilization => "stabilization",
            Scenario::PathTracking => "path_tracking",
            Scenario::Replay => "replay",
        }
    }

    pub fn description(self) -> &'static str {
        match self {
            Scenario::ConstantOmega => "discrete observer, constant body rate, biased gyro",
            Scenario::GainSweep => "constant_omega swept over k_p",
            Scenario::ManifoldConvergence => "constant_omega with and without k_e",
            Scenario::Noise => "constant_omega with a sinusoidal disturbance on both channels",
            Scenario::EulerComparison => "proposed observer against Euler-discretised Mahony, with and without k_e",
            Scenario::DtSweep => "long runs over several sampling intervals, for the error envelope",
            Scenario::TaylorPredictor => "exact exponential predictor against a truncated series",
            Scenario::Stabilization => "closed-loop stabiliser about a target attitude",
            Scenario::PathTracking => "tracking of f(t) = f0 exp(t hat(omega))",
            Scenario::Replay => "observer driven by a replay file (a synthetic one if none is given)",
        }
    }

    pub fn default_dt(self) -> f64 {
        match self {
            Scenario::Stabilization => 0.1,
            _ => 0.5,
        }
    }

    pub fn default_horizon(self) -> f64 {
        match self {
            Scenario::DtSweep => 1000.0,
            Scenario::Stabilization => 30.0,
            Scenario::PathTracking => 50.0,
            _ => 100.0,
        }
    }

    pub fn default_sweep(self) -> Option<Sweep> {
        let sweep = |parameter, values: &[f64]| {
            Some(Sweep {
                parameter,
                values: values.to_vec(),
            })
        };
        match self {
            Scenario::GainSweep => sweep(SweepParam::KP, &[0.25, 0.5, 1.0, 1.5]),
            Scenario::ManifoldConvergence => sweep(SweepParam::KE, &[1.0, 0.0]),
            Scenario::EulerComparison => sweep(SweepParam::Dt, &[0.5, 0.01]),
            Scenario::DtSweep => sweep(SweepParam::Dt, &[0.5, 0.25, 0.1]),
            _ => None,
        }
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Scenario {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Scenario::ALL
            .into_iter()
            .find(|sc| sc.name() == s)
            .ok_or_else(|| Error::config("scenario", format!("unknown scenario `{s}`")))
    }
}

/// How an initial attitude is chosen.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum AttitudeSpec {
    Identity,
    /// Uniform random rotation drawn from the config seed.
    Random,
    /// `exp(hat(vector))`.
    Exp {
        vector: [f64; 3],
    },
    /// Explicit rows; need not be a rotation for estimates.
    Matrix {
        rows: [[f64; 3]; 3],
    },
}

impl AttitudeSpec {
    pub fn resolve(&self, rng: &mut ChaCha8Rng) -> Mat3 {
        match self {
            AttitudeSpec::Identity => Mat3::identity(),
            AttitudeSpec::Random => Rotation::random(rng).into_inner(),
            AttitudeSpec::Exp { vector } => exp_skew(&Vec3::from(*vector)).into_inner(),
            AttitudeSpec::Matrix { rows } => Mat3::from_fn(|i, j| rows[i][j]),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SweepParam {
    #[serde(rename = "k_p")]
    KP,
    #[serde(rename = "k_i")]
    KI,
    #[serde(rename = "k_e")]
    KE,
    #[serde(rename = "k_b")]
    KB,
    #[serde(rename = "dt")]
    Dt,
}

impl SweepParam {
    pub fn name(self) -> &'static str {
        match self {
            SweepParam::KP => "k_p",
            SweepParam::KI => "k_i",
            SweepParam::KE => "k_e",
            SweepParam::KB => "k_b",
            SweepParam::Dt => "dt",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sweep {
    pub parameter: SweepParam,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReplayConfig {
    pub path: PathBuf,
    /// Resampling step; inferred from the timestamps when absent.
    #[serde(default)]
    pub dt: Option<f64>,
}

/// One experiment. Absent optional fields take the scenario's defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub scenario: Scenario,
    pub dt: Option<f64>,
    pub horizon: Option<f64>,
    pub gains: Gains,
    /// Gyro bias `b`.
    pub bias: [f64; 3],
    pub omega: OmegaProfile,
    /// True initial attitude; for the controllers, the initial plant attitude.
    pub r0: AttitudeSpec,
    pub rhat0: AttitudeSpec,
    pub bhat0: [f64; 3],
    /// Stabilisation target, and `f(0)` for path tracking.
    pub target: AttitudeSpec,
    /// Disturbance; the `noise` scenario uses the default spec when absent.
    pub noise: Option<NoiseSpec>,
    pub sweep: Option<Sweep>,
    pub seed: u64,
    pub predictor: Predictor,
    /// Series order used by the `taylor_predictor` scenario.
    pub taylor_order: u32,
    /// Truth integration steps per sampling interval for time-varying rates.
    pub truth_substeps: u32,
    pub replay: Option<ReplayConfig>,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig {
            scenario: Scenario::ConstantOmega,
            dt: None,
            horizon: None,
            gains: Gains::default(),
            bias: [0.1, -0.1, 0.05],
            omega: OmegaProfile::default(),
            r0: AttitudeSpec::Random,
            rhat0: AttitudeSpec::Identity,
            bhat0: [0.0; 3],
            target: AttitudeSpec::Identity,
            noise: None,
            sweep: None,
            seed: 0,
            predictor: Predictor::ExactExp,
            taylor_order: 2,
            truth_substeps: 10,
            replay: None,
        }
    }
}

impl ScenarioConfig {
    pub fn for_scenario(scenario: Scenario) -> Self {
        ScenarioConfig {
            scenario,
            ..ScenarioConfig::default()
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: ScenarioConfig = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    /// The config with every scenario default made explicit, for echoing.
    pub fn resolved(&self) -> Self {
        ScenarioConfig {
            dt: Some(self.dt()),
            horizon: Some(self.horizon()),
            sweep: self.sweep(),
            noise: self.noise(),
            ..self.clone()
        }
    }

    pub fn dt(&self) -> f64 {
        self.dt.unwrap_or(self.scenario.default_dt())
    }

    pub fn horizon(&self) -> f64 {
        self.horizon.unwrap_or(self.scenario.default_horizon())
    }

    pub fn sweep(&self) -> Option<Sweep> {
        self.sweep.clone().or_else(|| self.scenario.default_sweep())
    }

    pub fn noise(&self) -> Option<NoiseSpec> {
        match (self.noise, self.scenario) {
            (Some(n), _) => Some(n),
            (None, Scenario::Noise) => Some(NoiseSpec::default()),
            _ => None,
        }
    }

    pub fn bias(&self) -> Vec3 {
        Vec3::from(self.bias)
    }

    pub fn rng(&self) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(self.seed)
    }

    /// `(dt, gains)` for each sweep point, or the single base point.
    pub fn points(&self) -> Vec<SweepPoint> {
        let base = SweepPoint {
            dt: self.dt(),
            gains: self.gains,
            swept: None,
        };
        match self.sweep() {
            None => vec![base],
            Some(sweep) => sweep
                .values
                .iter()
                .map(|&v| {
                    let mut p = SweepPoint {
                        swept: Some((sweep.parameter, v)),
                        ..base
                    };
                    match sweep.parameter {
                        SweepParam::KP => p.gains.k_p = v,
                        SweepParam::KI => p.gains.k_i = v,
                        SweepParam::KE => p.gains.k_e = v,
                        SweepParam::KB => p.gains.k_b = v,
                        SweepParam::Dt => p.dt = v,
                    }
                    p
                })
                .collect(),
        }
    }

    /// Checks every field; errors name the offending field.
    pub fn validate(&self) -> Result<()> {
        let dt = self.dt();
        let horizon = self.horizon();
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::config("dt", format!("{dt} must be positive")));
        }
        if !(horizon.is_finite() && horizon >= dt) {
            return Err(Error::config(
                "horizon",
                format!("{horizon} must be at least dt = {dt}"),
            ));
        }
        if self.bias.iter().chain(&self.bhat0).any(|v| !v.is_finite()) {
            return Err(Error::config("bias", "entries must be finite"));
        }
        if let Some(sweep) = &self.sweep {
            if sweep.values.is_empty() {
                return Err(Error::config("sweep.values", "must not be empty"));
            }
        }
        for p in self.points() {
            p.gains.validate().map_err(|e| match e {
                Error::InvalidParameter { name, reason } => Error::config(format!("gains.{name}"), reason),
                other => other,
            })?;
            if !(p.dt > 0.0 && p.dt.is_finite()) {
                return Err(Error::config("sweep.values", format!("dt {} must be positive", p.dt)));
            }
            if p.dt > horizon {
                return Err(Error::config(
                    "sweep.values",
                    format!("dt {} exceeds horizon {horizon}", p.dt),
                ));
            }
        }
        if let Some(noise) = self.noise() {
            noise.validate().map_err(|e| Error::config("noise", e.to_string()))?;
        }
        match &self.omega {
            OmegaProfile::Constant { omega } if omega.iter().any(|v| !v.is_finite()) => {
                return Err(Error::config("omega", "entries must be finite"));
            }
            OmegaProfile::Sinusoidal { frequency_hz, .. } if !frequency_hz.is_finite() => {
                return Err(Error::config("omega.frequency_hz", "must be finite"));
            }
            _ => {}
        }
        if self.truth_substeps == 0 {
            return Err(Error::config("truth_substeps", "must be at least 1"));
        }
        if !(1..=10).contains(&self.taylor_order) {
            return Err(Error::config(
                "taylor_order",
                format!("{} is outside 1..=10", self.taylor_order),
            ));
        }
        if let Predictor::Taylor(order) = self.predictor {
            if !(1..=10).contains(&order) {
                return Err(Error::config(
                    "predictor",
                    format!("taylor order {order} is outside 1..=10"),
                ));
            }
        }
        for (name, spec) in [("r0", &self.r0), ("target", &self.target)] {
            if let AttitudeSpec::Matrix { rows } = spec {
                Rotation::new(Mat3::from_fn(|i, j| rows[i][j])).map_err(|e| Error::config(name, e.to_string()))?;
            }
        }
        if let Some(replay) = &self.replay {
            if let Some(dt) = replay.dt {
                if !(dt > 0.0) {
                    return Err(Error::config("replay.dt", format!("{dt} must be positive")));
                }
            }
        }
        Ok(())
    }
}

/// Parameters of one series in a sweep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepPoint {
    pub dt: f64,
    pub gains: Gains,
    pub swept: Option<(SweepParam, f64)>,
}

impl SweepPoint {
    pub fn label(&self) -> Option<String> {
        self.swept.map(|(p, v)| format!("{}={v}", p.name()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scenario_names_round_trip() {
        for sc in Scenario::ALL {
            assert_eq!(sc.name().parse::<Scenario>().unwrap(), sc);
            let json = serde_json::to_string(&sc).unwrap();
            assert_eq!(json, format!("\"{}\"", sc.name()));
        }
        assert!("bogus".parse::<Scenario>().is_err());
    }

    #[test]
    fn defaults_fill_absent_fields() {
        let cfg = ScenarioConfig::from_json(r#"{"scenario": "stabilization"}"#).unwrap();
        assert_eq!(cfg.dt(), 0.1);
        assert_eq!(cfg.horizon(), 30.0);
        assert_eq!(cfg.gains, Gains::default());
        let cfg = ScenarioConfig::from_json(r#"{"scenario": "noise"}"#).unwrap();
        assert_eq!(cfg.noise(), Some(NoiseSpec::default()));
        let cfg = ScenarioConfig::from_json(r#"{"scenario": "manifold_convergence"}"#).unwrap();
        let ke: Vec<f64> = cfg.points().iter().map(|p| p.gains.k_e).collect();
        assert_eq!(ke, vec![1.0, 0.0]);
    }

    #[test]
    fn invalid_fields_are_named() {
        let field = |json: &str| match ScenarioConfig::from_json(json) {
            Err(Error::Config { field, .. }) => field,
            other => panic!("expected a config error, got {other:?}"),
        };
        assert_eq!(field(r#"{"dt": -1}"#), "dt");
        assert_eq!(field(r#"{"dt": 1, "horizon": 0.5}"#), "horizon");
        assert_eq!(field(r#"{"gains": {"k_p": 0}}"#), "gains.k_p");
        assert_eq!(
            field(r#"{"sweep": {"parameter": "k_i", "values": []}}"#),
            "sweep.values"
        );
        assert_eq!(field(r#"{"noise": {"frequency_hz": 0}}"#), "noise");
        assert_eq!(field(r#"{"taylor_order": 0}"#), "taylor_order");
        assert!(ScenarioConfig::from_json(r#"{"bogus": 1}"#).is_err());
    }

    #[test]
    fn sweep_points_override_one_parameter() {
        let cfg = ScenarioConfig {
            sweep: Some(Sweep {
                parameter: SweepParam::Dt,
                values: vec![0.2, 0.1],
            }),
            ..ScenarioConfig::default()
        };
        let pts = cfg.points();
        assert_eq!(pts.len(), 2);
        assert_eq!(pts[1].dt, 0.1);
        assert_eq!(pts[1].gains, Gains::default());
        assert_eq!(pts[0].label().unwrap(), "dt=0.2");
    }

    #[test]
    fn attitude_specs() {
        let mut rng = ScenarioConfig::default().rng();
        assert_eq!(AttitudeSpec::Identity.resolve(&mut rng), Mat3::identity());
        let a = AttitudeSpec::Random.resolve(&mut ScenarioConfig::default().rng());
        let b = AttitudeSpec::Random.resolve(&mut ScenarioConfig::default().rng());
        assert_eq!(a, b);
        let spec: AttitudeSpec = serde_json::from_str(r#"{"kind": "exp", "vector": [0, 0, 0]}"#).unwrap();
        assert_eq!(spec.resolve(&mut rng), Mat3::identity());
    }
}
