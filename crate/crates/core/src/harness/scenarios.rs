//! Deterministic execution of a [`ScenarioConfig`].

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use crate::controllers::{run_path_tracking, run_stabilization, PathSpec};
use crate::error::{Error, Result};
use crate::exec::{self, ExecMode};
use crate::observers::discrete::{run_discrete, run_euler};
use crate::observers::{ObserverState, Predictor};
use crate::so3::{Mat3, Rotation, Vec3};
use crate::truth::{
    apply_noise, format_replay_rows, load_replay, parse_replay_rows, propagate_truth, resample_replay,
    sample_measurements, stream_rows, write_replay, MeasurementStream,
};

use super::config::{Scenario, ScenarioConfig, SweepPoint};
use super::records::{emit_csv, emit_summary_json, Method, Series, SeriesSummary, Summary, TrajectoryRecord};

/// Initial conditions drawn once per experiment, shared by every series.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InitialConditions {
    pub r0: Rotation,
    pub rhat0: Mat3,
    pub bhat0: Vec3,
    pub target: Rotation,
}

impl InitialConditions {
    /// Draws `r0`, `rhat0` and `target` in that order from the config seed.
    pub fn resolve(cfg: &ScenarioConfig) -> Result<Self> {
        let mut rng = cfg.rng();
        let r0 = Rotation::new(cfg.r0.resolve(&mut rng)).map_err(|e| Error::config("r0", e.to_string()))?;
        let rhat0 = cfg.rhat0.resolve(&mut rng);
        let target = Rotation::new(cfg.target.resolve(&mut rng)).map_err(|e| Error::config("target", e.to_string()))?;
        Ok(InitialConditions {
            r0,
            rhat0,
            bhat0: Vec3::from(cfg.bhat0),
            target,
        })
    }
}

/// Output of one experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct Experiment {
    pub config: ScenarioConfig,
    pub series: Vec<Series>,
    /// Synthetic replay input, when the `replay` scenario had to make one.
    pub fixture: Option<MeasurementStream>,
}

pub const FIXTURE_FILE: &str = "replay_fixture.txt";

impl Experiment {
    /// `<scenario>.csv`, or `<scenario>_<label>.csv` for labelled series.
    pub fn file_name(&self, series: &Series) -> String {
        let scenario = self.config.scenario.name();
        if series.label.is_empty() {
            format!("{scenario}.csv")
        } else {
            let suffix: String = series
                .label
                .chars()
                .map(|c| if c == '=' || c == ',' { '_' } else { c })
                .collect();
            format!("{scenario}_{suffix}.csv")
        }
    }

    pub fn summary(&self) -> Result<Summary> {
        Ok(Summary {
            scenario: self.config.scenario.name().to_owned(),
            config: serde_json::to_value(self.config.resolved())?,
            series: self
                .series
                .iter()
                .map(|s| SeriesSummary::new(s, self.file_name(s)))
                .collect(),
        })
    }

    /// Writes every series, `summary.json` and any fixture into `dir`.
    pub fn write(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let mut written = Vec::new();
        for s in &self.series {
            let path = dir.join(self.file_name(s));
            emit_csv(&s.records, &path)?;
            written.push(path);
        }
        if let Some(fixture) = &self.fixture {
            let path = dir.join(FIXTURE_FILE);
            write_replay(fixture, &path)?;
            written.push(path);
        }
        let path = dir.join("summary.json");
        emit_summary_json(&self.summary()?, &path)?;
        written.push(path);
        Ok(written)
    }

    pub fn find(&self, method: Method) -> impl Iterator<Item = &Series> {
        self.series.iter().filter(move |s| s.method == method)
    }
}

pub fn run_experiment(cfg: &ScenarioConfig) -> Result<Experiment> {
    run_experiment_with(cfg, ExecMode::default())
}

/// Runs every sweep point; `mode` only decides whether points run concurrently.
pub fn run_experiment_with(cfg: &ScenarioConfig, mode: ExecMode) -> Result<Experiment> {
    cfg.validate()?;
    let ic = InitialConditions::resolve(cfg)?;
    let points = cfg.points();
    let mut fixture = None;
    let series = match cfg.scenario {
        Scenario::Replay => {
            let (stream, synthetic) = replay_stream(cfg, &ic)?;
            fixture = synthetic.then(|| stream.clone());
            let per_point = exec::try_map(mode, &points, |p| replay_point(cfg, &ic, p, &stream))?;
            per_point.into_iter().flatten().collect()
        }
        Scenario::Stabilization => exec::try_map(mode, &points, |p| stabilization_point(cfg, &ic, p))?,
        Scenario::PathTracking => exec::try_map(mode, &points, |p| tracking_point(cfg, &ic, p))?,
        _ => {
            let per_point = exec::try_map(mode, &points, |p| observer_point(cfg, &ic, p))?;
            per_point.into_iter().flatten().collect()
        }
    };
    Ok(Experiment {
        config: cfg.clone(),
        series,
        fixture,
    })
}

/// One experiment per seed, the seeds spread over threads in `Parallel` mode.
pub fn run_batch(cfg: &ScenarioConfig, seeds: &[u64], mode: ExecMode) -> Result<Vec<Experiment>> {
    exec::try_map(mode, seeds, |&seed| {
        let cfg = ScenarioConfig { seed, ..cfg.clone() };
        run_experiment_with(&cfg, ExecMode::Sequential)
    })
}

/// True attitudes and (biased, possibly disturbed) measurements at `kΔt`.
pub fn synthesize(cfg: &ScenarioConfig, r0: Rotation, dt: f64) -> Result<(Vec<Rotation>, MeasurementStream)> {
    let h = match cfg.omega.as_constant() {
        Some(_) => dt,
        None => dt / cfg.truth_substeps as f64,
    };
    let traj = propagate_truth(r0, &cfg.omega, h, cfg.horizon())?;
    let truth = sample_measurements(&traj, Vec3::zeros(), dt)?
        .epochs
        .iter()
        .map(|m| m.ry)
        .collect();
    let mut stream = sample_measurements(&traj, cfg.bias(), dt)?;
    if let Some(noise) = cfg.noise() {
        stream = apply_noise(&stream, &noise)?;
    }
    Ok((truth, stream))
}

fn params(p: &SweepPoint) -> BTreeMap<String, f64> {
    BTreeMap::from([
        ("dt".to_owned(), p.dt),
        ("k_p".to_owned(), p.gains.k_p),
        ("k_i".to_owned(), p.gains.k_i),
        ("k_e".to_owned(), p.gains.k_e),
        ("k_b".to_owned(), p.gains.k_b),
    ])
}

fn label(method: Option<Method>, p: &SweepPoint) -> String {
    [method.map(|m| m.name().to_owned()), p.label()]
        .into_iter()
        .flatten()
        .collect::<Vec<_>>()
        .join(",")
}

fn records_from_states(states: &[ObserverState], truth: &[Rotation], dt: f64, b: &Vec3) -> Vec<TrajectoryRecord> {
    states
        .iter()
        .zip(truth)
        .enumerate()
        .map(|(k, (st, r))| TrajectoryRecord::from_state(k, k as f64 * dt, r.matrix(), st, b))
        .collect()
}

fn observer_point(cfg: &ScenarioConfig, ic: &InitialConditions, p: &SweepPoint) -> Result<Vec<Series>> {
    let methods: &[Method] = match cfg.scenario {
        Scenario::EulerComparison => &[Method::Proposed, Method::Euler, Method::EulerKe],
        Scenario::TaylorPredictor => &[Method::Proposed, Method::Taylor],
        _ => &[Method::Proposed],
    };
    let (truth, stream) = synthesize(cfg, ic.r0, p.dt)?;
    let b = cfg.bias();
    methods
        .iter()
        .map(|&method| {
            let (states, diverged_at) = match method {
                Method::Proposed => (
                    run_discrete(ic.rhat0, ic.bhat0, &stream, &p.gains, cfg.predictor)?,
                    None,
                ),
                Method::Taylor => {
                    let predictor = Predictor::Taylor(cfg.taylor_order);
                    (run_discrete(ic.rhat0, ic.bhat0, &stream, &p.gains, predictor)?, None)
                }
                Method::Euler | Method::EulerKe => {
                    let run = run_euler(ic.rhat0, ic.bhat0, &stream, &p.gains, method == Method::EulerKe);
                    (run.states, run.diverged_at)
                }
                Method::Stabilizer | Method::PathTracker => unreachable!("not an observer method"),
            };
            let mut params = params(p);
            if method == Method::Taylor {
                params.insert("taylor_order".to_owned(), f64::from(cfg.taylor_order));
            }
            Ok(Series {
                label: label((methods.len() > 1).then_some(method), p),
                method,
                params,
                records: records_from_states(&states, &truth, p.dt, &b),
                diverged_at,
            })
        })
        .collect()
}

/// Loads the configured replay file, or round-trips a synthetic one through
/// the replay text format. The flag is true for the synthetic case.
fn replay_stream(cfg: &ScenarioConfig, ic: &InitialConditions) -> Result<(MeasurementStream, bool)> {
    match &cfg.replay {
        Some(replay) => Ok((load_replay(&replay.path, replay.dt)?, false)),
        None => {
            let (_, stream) = synthesize(cfg, ic.r0, cfg.dt())?;
            let text = format_replay_rows(&stream_rows(&stream));
            let rows = parse_replay_rows(text.as_bytes())?;
            let mut loaded = resample_replay(&rows, None)?;
            loaded.bias = stream.bias;
            Ok((loaded, true))
        }
    }
}

/// Without ground truth the measured attitude stands in for `R`.
fn replay_point(
    cfg: &ScenarioConfig,
    ic: &InitialConditions,
    p: &SweepPoint,
    stream: &MeasurementStream,
) -> Result<Vec<Series>> {
    let states = run_discrete(ic.rhat0, ic.bhat0, stream, &p.gains, cfg.predictor)?;
    let truth: Vec<Rotation> = stream.epochs.iter().map(|m| m.ry).collect();
    let mut params = params(p);
    params.insert("dt".to_owned(), stream.dt);
    Ok(vec![Series {
        label: label(None, p),
        method: Method::Proposed,
        params,
        records: records_from_states(&states, &truth, stream.dt, &stream.bias),
        diverged_at: None,
    }])
}

fn stabilization_point(cfg: &ScenarioConfig, ic: &InitialConditions, p: &SweepPoint) -> Result<Series> {
    let run = run_stabilization(ic.r0.into_inner(), ic.target, &p.gains, p.dt, cfg.horizon())?;
    let records = run
        .attitudes
        .iter()
        .zip(&run.states)
        .enumerate()
        .map(|(k, (r, st))| {
            TrajectoryRecord::new(
                k,
                k as f64 * p.dt,
                ic.target.matrix(),
                r,
                &st.bhat,
                &st.prev_innovation,
                &Vec3::zeros(),
            )
        })
        .collect();
    Ok(Series {
        label: label(None, p),
        method: Method::Stabilizer,
        params: params(p),
        records,
        diverged_at: None,
    })
}

fn tracking_point(cfg: &ScenarioConfig, ic: &InitialConditions, p: &SweepPoint) -> Result<Series> {
    let path = match cfg.omega.as_constant() {
        Some(w) => PathSpec::uniform_rotation(ic.target, w),
        None => {
            let h = p.dt / cfg.truth_substeps as f64;
            let traj = propagate_truth(ic.target, &cfg.omega, h, cfg.horizon() + p.dt)?;
            PathSpec::from_samples(traj.rotations, h)?
        }
    };
    let states = run_path_tracking(ic.r0.into_inner(), &path, &p.gains, p.dt, cfg.horizon())?;
    let truth: Vec<Rotation> = (0..states.len()).map(|k| path.rotation(k as f64 * p.dt)).collect();
    Ok(Series {
        label: label(None, p),
        method: Method::PathTracker,
        params: params(p),
        records: records_from_states(&states, &truth, p.dt, &Vec3::zeros()),
        diverged_at: None,
    })
}
