//! Ground-truth kinematics `Ṙ = R hat(Ω)` and synthetic measurements.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::so3::{exp_skew, orthogonality_defect, project_to_so3, Mat3, Rotation, Vec3, ROTATION_TOLERANCE};

/// Replay rows with a defect above this are rejected instead of repaired.
pub const REPLAY_REPAIR_LIMIT: f64 = 1e-2;

/// One epoch of measurements: attitude `Rʸ` and biased rate `Ωʸ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Measurement {
    pub ry: Rotation,
    pub omega_y: Vec3,
}

/// Body angular-velocity profile of the true system.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum OmegaProfile {
    Constant {
        omega: [f64; 3],
    },
    /// `mean + amplitude ⊙ sin(2π f t)` componentwise.
    Sinusoidal {
        mean: [f64; 3],
        amplitude: [f64; 3],
        frequency_hz: f64,
    },
}

impl Default for OmegaProfile {
    fn default() -> Self {
        OmegaProfile::Constant { omega: [1.0, 1.0, 1.0] }
    }
}

impl OmegaProfile {
    pub fn eval(&self, t: f64) -> Vec3 {
        match self {
            OmegaProfile::Constant { omega } => Vec3::from(*omega),
            OmegaProfile::Sinusoidal {
                mean,
                amplitude,
                frequency_hz,
            } => {
                let s = (std::f64::consts::TAU * frequency_hz * t).sin();
                Vec3::from(*mean) + Vec3::from(*amplitude) * s
            }
        }
    }

    pub fn as_constant(&self) -> Option<Vec3> {
        match self {
            OmegaProfile::Constant { omega } => Some(Vec3::from(*omega)),
            _ => None,
        }
    }
}

/// Uniformly sampled true attitude and angular velocity.
#[derive(Debug, Clone, PartialEq)]
pub struct TruthTrajectory {
    pub h: f64,
    pub times: Vec<f64>,
    pub rotations: Vec<Rotation>,
    pub omega: Vec<Vec3>,
}

impl TruthTrajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }
}

/// Exact-time measurement source for a constant body rate, `R(t) = R₀ exp(tΩ)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConstantRateTruth {
    pub r0: Rotation,
    pub omega: Vec3,
    pub bias: Vec3,
}

impl ConstantRateTruth {
    pub fn rotation_at(&self, t: f64) -> Rotation {
        self.r0 * exp_skew(&(self.omega * t))
    }

    pub fn measurement_at(&self, t: f64) -> Measurement {
        Measurement {
            ry: self.rotation_at(t),
            omega_y: self.omega + self.bias,
        }
    }
}

pub(crate) fn step_count(horizon: f64, h: f64) -> usize {
    (horizon / h + 1e-9).floor() as usize
}

/// Propagates the truth on a uniform grid of spacing `h` up to `horizon`.
///
/// Constant rates use the closed form; time-varying rates use a
/// fourth-order Magnus step, which stays on the group by construction.
pub fn propagate_truth(r0: Rotation, omega: &OmegaProfile, h: f64, horizon: f64) -> Result<TruthTrajectory> {
    match omega.as_constant() {
        Some(w) => {
            check_grid(h, horizon)?;
            let n = step_count(horizon, h);
            let truth = ConstantRateTruth {
                r0,
                omega: w,
                bias: Vec3::zeros(),
            };
            let times: Vec<f64> = (0..=n).map(|k| k as f64 * h).collect();
            Ok(TruthTrajectory {
                h,
                rotations: times.iter().map(|&t| truth.rotation_at(t)).collect(),
                omega: vec![w; n + 1],
                times,
            })
        }
        None => propagate_truth_with(r0, |t| omega.eval(t), h, horizon),
    }
}

/// [`propagate_truth`] for an arbitrary rate function.
pub fn propagate_truth_with<F>(r0: Rotation, omega: F, h: f64, horizon: f64) -> Result<TruthTrajectory>
where
    F: Fn(f64) -> Vec3,
{
    check_grid(h, horizon)?;
    let n = step_count(horizon, h);
    // Gauss–Legendre nodes for the two-point Magnus expansion
    let c = 3f64.sqrt() / 6.0;
    let mut times = Vec::with_capacity(n + 1);
    let mut rotations = Vec::with_capacity(n + 1);
    let mut rates = Vec::with_capacity(n + 1);
    let mut r = *r0.matrix();
    for k in 0..=n {
        let t = k as f64 * h;
        times.push(t);
        rotations.push(Rotation::from_matrix_unchecked(r));
        rates.push(omega(t));
        if k < n {
            let w1 = omega(t + (0.5 - c) * h);
            let w2 = omega(t + (0.5 + c) * h);
            let incr = (w1 + w2) * (0.5 * h) + w1.cross(&w2) * (3f64.sqrt() / 12.0 * h * h);
            r *= *exp_skew(&incr);
        }
    }
    Ok(TruthTrajectory {
        h,
        times,
        rotations,
        omega: rates,
    })
}

fn check_grid(h: f64, horizon: f64) -> Result<()> {
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::param("h", format!("{h} must be positive")));
    }
    if !(horizon >= 0.0 && horizon.is_finite()) {
        return Err(Error::param("horizon", format!("{horizon} must be non-negative")));
    }
    Ok(())
}

/// Measurements at uniform epochs `kΔt`.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementStream {
    pub dt: f64,
    pub epochs: Vec<Measurement>,
    /// Rate bias used to generate the stream (zero for replayed data).
    pub bias: Vec3,
}

impl MeasurementStream {
    pub fn len(&self) -> usize {
        self.epochs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.epochs.is_empty()
    }

    pub fn time(&self, k: usize) -> f64 {
        k as f64 * self.dt
    }
}

/// `Rʸ_k = R(kΔt)`, `Ωʸ_k = Ω(kΔt) + b`.
pub fn sample_measurements(traj: &TruthTrajectory, bias: Vec3, dt: f64) -> Result<MeasurementStream> {
    if !(dt > 0.0) {
        return Err(Error::param("dt", format!("{dt} must be positive")));
    }
    let ratio = dt / traj.h;
    let stride = ratio.round();
    if stride < 1.0 || (ratio - stride).abs() > 1e-9 * ratio.max(1.0) {
        return Err(Error::param(
            "dt",
            format!("{dt} is not an integer multiple of the truth spacing {}", traj.h),
        ));
    }
    let stride = stride as usize;
    let epochs = (0..traj.len())
        .step_by(stride)
        .map(|i| Measurement {
            ry: traj.rotations[i],
            omega_y: traj.omega[i] + bias,
        })
        .collect();
    Ok(MeasurementStream { dt, epochs, bias })
}

/// Deterministic sinusoidal disturbance on both measurement channels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseSpec {
    pub amplitude: f64,
    pub frequency_hz: f64,
    pub direction: [f64; 3],
}

impl Default for NoiseSpec {
    fn default() -> Self {
        NoiseSpec {
            amplitude: 0.1,
            frequency_hz: 159.0,
            direction: [1.0, 1.0, 1.0],
        }
    }
}

impl NoiseSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.amplitude >= 0.0 && self.amplitude.is_finite()) {
            return Err(Error::param(
                "amplitude",
                format!("{} must be non-negative", self.amplitude),
            ));
        }
        if !(self.frequency_hz > 0.0 && self.frequency_hz.is_finite()) {
            return Err(Error::param(
                "frequency_hz",
                format!("{} must be positive", self.frequency_hz),
            ));
        }
        Ok(())
    }

    /// Disturbance vector `amplitude · sin(2π f t) · direction`.
    pub fn offset(&self, t: f64) -> Vec3 {
        Vec3::from(self.direction) * (self.amplitude * (std::f64::consts::TAU * self.frequency_hz * t).sin())
    }
}

/// `Rʸ_k ← Rʸ_k exp(hat(n_k))`, `Ωʸ_k ← Ωʸ_k + n_k` with `n_k` from [`NoiseSpec::offset`].
pub fn apply_noise(stream: &MeasurementStream, spec: &NoiseSpec) -> Result<MeasurementStream> {
    spec.validate()?;
    if spec.amplitude == 0.0 {
        return Ok(stream.clone());
    }
    let epochs = stream
        .epochs
        .iter()
        .enumerate()
        .map(|(k, m)| {
            let n = spec.offset(stream.time(k));
            Measurement {
                ry: m.ry * exp_skew(&n),
                omega_y: m.omega_y + n,
            }
        })
        .collect();
    Ok(MeasurementStream {
        epochs,
        ..stream.clone()
    })
}

/// A timestamped replay row before resampling.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReplayRow {
    pub time: f64,
    pub rotation: Mat3,
    pub omega: Vec3,
}

/// Formats rows as `time, r00..r22 (row-major), wx, wy, wz`.
pub fn format_replay_rows(rows: &[ReplayRow]) -> String {
    let mut out = String::from("# time,r00,r01,r02,r10,r11,r12,r20,r21,r22,wx,wy,wz\n");
    for row in rows {
        write!(out, "{}", row.time).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                write!(out, ",{}", row.rotation[(i, j)]).unwrap();
            }
        }
        for w in row.omega.iter() {
            write!(out, ",{w}").unwrap();
        }
        out.push('\n');
    }
    out
}

pub fn write_replay_rows(rows: &[ReplayRow], path: &Path) -> Result<()> {
    std::fs::write(path, format_replay_rows(rows)).map_err(|e| Error::io(path, e))
}

/// Replay rows of a stream with timestamps `kΔt`.
pub fn stream_rows(stream: &MeasurementStream) -> Vec<ReplayRow> {
    stream
        .epochs
        .iter()
        .enumerate()
        .map(|(k, m)| ReplayRow {
            time: stream.time(k),
            rotation: *m.ry.matrix(),
            omega: m.omega_y,
        })
        .collect()
}

pub fn write_replay(stream: &MeasurementStream, path: &Path) -> Result<()> {
    write_replay_rows(&stream_rows(stream), path)
}

/// Parses a replay file and validates every row.
pub fn read_replay_rows(path: &Path) -> Result<Vec<ReplayRow>> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    parse_replay_rows(file)
}

pub fn parse_replay_rows<R: std::io::Read>(source: R) -> Result<Vec<ReplayRow>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(source);
    let mut rows: Vec<ReplayRow> = Vec::new();
    for (idx, record) in reader.records().enumerate() {
        let record = record.map_err(|e| Error::Replay {
            row: idx,
            reason: e.to_string(),
        })?;
        if record.len() != 13 {
            return Err(Error::Replay {
                row: idx,
                reason: format!("expected 13 fields, found {}", record.len()),
            });
        }
        let mut vals = [0.0f64; 13];
        for (v, field) in vals.iter_mut().zip(record.iter()) {
            *v = field.parse().map_err(|_| Error::Replay {
                row: idx,
                reason: format!("`{field}` is not a number"),
            })?;
            if !v.is_finite() {
                return Err(Error::Replay {
                    row: idx,
                    reason: "non-finite value".into(),
                });
            }
        }
        if let Some(prev) = rows.last() {
            if vals[0] <= prev.time {
                return Err(Error::Replay {
                    row: idx,
                    reason: format!("timestamp {} does not increase", vals[0]),
                });
            }
        }
        rows.push(ReplayRow {
            time: vals[0],
            rotation: Mat3::from_row_slice(&vals[1..10]),
            omega: Vec3::new(vals[10], vals[11], vals[12]),
        });
    }
    Ok(rows)
}

fn repair_rotation(m: &Mat3, row: usize) -> Result<Rotation> {
    let defect = orthogonality_defect(m);
    if defect <= ROTATION_TOLERANCE {
        return Rotation::new(*m).map_err(|e| Error::Replay {
            row,
            reason: e.to_string(),
        });
    }
    if defect > REPLAY_REPAIR_LIMIT {
        return Err(Error::Replay {
            row,
            reason: format!("rotation defect {defect:e} exceeds {REPLAY_REPAIR_LIMIT:e}"),
        });
    }
    project_to_so3(m).map_err(|e| Error::Replay {
        row,
        reason: e.to_string(),
    })
}

/// Loads a replay file and resamples it to uniform epochs.
///
/// Epoch `k` takes the row whose timestamp is closest to `t₀ + kΔt`. When
/// `dt` is `None` the mean row spacing is used.
pub fn load_replay(path: &Path, dt: Option<f64>) -> Result<MeasurementStream> {
    resample_replay(&read_replay_rows(path)?, dt)
}

/// Repairs and resamples already parsed rows, as [`load_replay`] does.
pub fn resample_replay(rows: &[ReplayRow], dt: Option<f64>) -> Result<MeasurementStream> {
    let rotations = rows
        .iter()
        .enumerate()
        .map(|(i, r)| repair_rotation(&r.rotation, i))
        .collect::<Result<Vec<_>>>()?;
    if rows.is_empty() {
        return Err(Error::Replay {
            row: 0,
            reason: "file contains no rows".into(),
        });
    }
    let t0 = rows[0].time;
    let span = rows[rows.len() - 1].time - t0;
    let dt = match dt {
        Some(dt) if dt > 0.0 => dt,
        Some(dt) => return Err(Error::param("dt", format!("{dt} must be positive"))),
        None if rows.len() > 1 => span / (rows.len() - 1) as f64,
        None => {
            return Err(Error::Replay {
                row: 0,
                reason: "cannot infer a step from a single row".into(),
            })
        }
    };
    let count = step_count(span, dt) + 1;
    let times: Vec<f64> = rows.iter().map(|r| r.time).collect();
    let epochs = (0..count)
        .map(|k| {
            let i = nearest_index(&times, t0 + k as f64 * dt);
            Measurement {
                ry: rotations[i],
                omega_y: rows[i].omega,
            }
        })
        .collect();
    Ok(MeasurementStream {
        dt,
        epochs,
        bias: Vec3::zeros(),
    })
}

fn nearest_index(sorted: &[f64], target: f64) -> usize {
    let i = sorted.partition_point(|&t| t < target);
    if i == 0 {
        0
    } else if i == sorted.len() {
        sorted.len() - 1
    } else if (sorted[i] - target).abs() < (target - sorted[i - 1]).abs() {
        i
    } else {
        i - 1
    }
}
