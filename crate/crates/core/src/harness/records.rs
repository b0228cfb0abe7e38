//! Per-epoch records, derived metrics and their CSV/JSON forms.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::observers::ObserverState;
use crate::so3::{orthogonality_defect, Mat3, Vec3};

/// One CSV row. Column order is the field order.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRecord {
    pub k: usize,
    pub t: f64,
    pub r00: f64,
    pub r01: f64,
    pub r02: f64,
    pub r10: f64,
    pub r11: f64,
    pub r12: f64,
    pub r20: f64,
    pub r21: f64,
    pub r22: f64,
    pub rhat00: f64,
    pub rhat01: f64,
    pub rhat02: f64,
    pub rhat10: f64,
    pub rhat11: f64,
    pub rhat12: f64,
    pub rhat20: f64,
    pub rhat21: f64,
    pub rhat22: f64,
    pub bhat_x: f64,
    pub bhat_y: f64,
    pub bhat_z: f64,
    pub omega_x: f64,
    pub omega_y: f64,
    pub omega_z: f64,
    pub frobenius_error: f64,
    pub defect: f64,
    pub bias_error: f64,
}

pub const CSV_COLUMNS: [&str; 29] = [
    "k",
    "t",
    "r00",
    "r01",
    "r02",
    "r10",
    "r11",
    "r12",
    "r20",
    "r21",
    "r22",
    "rhat00",
    "rhat01",
    "rhat02",
    "rhat10",
    "rhat11",
    "rhat12",
    "rhat20",
    "rhat21",
    "rhat22",
    "bhat_x",
    "bhat_y",
    "bhat_z",
    "omega_x",
    "omega_y",
    "omega_z",
    "frobenius_error",
    "defect",
    "bias_error",
];

impl TrajectoryRecord {
    /// `innovation` is `ω_k`; `b` is the true bias.
    pub fn new(k: usize, t: f64, r: &Mat3, rhat: &Mat3, bhat: &Vec3, innovation: &Vec3, b: &Vec3) -> Self {
        TrajectoryRecord {
            k,
            t,
            r00: r[(0, 0)],
            r01: r[(0, 1)],
            r02: r[(0, 2)],
            r10: r[(1, 0)],
            r11: r[(1, 1)],
            r12: r[(1, 2)],
            r20: r[(2, 0)],
            r21: r[(2, 1)],
            r22: r[(2, 2)],
            rhat00: rhat[(0, 0)],
            rhat01: rhat[(0, 1)],
            rhat02: rhat[(0, 2)],
            rhat10: rhat[(1, 0)],
            rhat11: rhat[(1, 1)],
            rhat12: rhat[(1, 2)],
            rhat20: rhat[(2, 0)],
            rhat21: rhat[(2, 1)],
            rhat22: rhat[(2, 2)],
            bhat_x: bhat.x,
            bhat_y: bhat.y,
            bhat_z: bhat.z,
            omega_x: innovation.x,
            omega_y: innovation.y,
            omega_z: innovation.z,
            frobenius_error: (rhat - r).norm(),
            defect: orthogonality_defect(rhat),
            bias_error: (bhat - b).norm(),
        }
    }

    pub fn from_state(k: usize, t: f64, r: &Mat3, st: &ObserverState, b: &Vec3) -> Self {
        Self::new(k, t, r, &st.rhat, &st.bhat, &st.innovation, b)
    }

    pub fn truth(&self) -> Mat3 {
        Mat3::new(
            self.r00, self.r01, self.r02, self.r10, self.r11, self.r12, self.r20, self.r21, self.r22,
        )
    }

    pub fn estimate(&self) -> Mat3 {
        Mat3::new(
            self.rhat00,
            self.rhat01,
            self.rhat02,
            self.rhat10,
            self.rhat11,
            self.rhat12,
            self.rhat20,
            self.rhat21,
            self.rhat22,
        )
    }

    /// `‖R̂‖_F`, equal to √3 on the manifold.
    pub fn estimate_norm(&self) -> f64 {
        self.estimate().norm()
    }
}

/// Which algorithm produced a series.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Proposed,
    Taylor,
    Euler,
    EulerKe,
    Stabilizer,
    PathTracker,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Proposed => "proposed",
            Method::Taylor => "taylor",
            Method::Euler => "euler",
            Method::EulerKe => "euler_ke",
            Method::Stabilizer => "stabilizer",
            Method::PathTracker => "path_tracker",
        }
    }
}

/// One labelled run.
#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub label: String,
    pub method: Method,
    pub params: BTreeMap<String, f64>,
    pub records: Vec<TrajectoryRecord>,
    /// First epoch whose state was not finite; the records stop before it.
    pub diverged_at: Option<usize>,
}

impl Series {
    pub fn errors(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.frobenius_error).collect()
    }

    pub fn terminal(&self) -> Option<&TrajectoryRecord> {
        self.records.last()
    }

    /// Smallest error over the run.
    pub fn min_error(&self) -> f64 {
        self.records
            .iter()
            .map(|r| r.frobenius_error)
            .fold(f64::INFINITY, f64::min)
    }

    /// First time the error drops below `threshold`.
    pub fn first_below(&self, threshold: f64) -> Option<f64> {
        self.records.iter().find(|r| r.frobenius_error < threshold).map(|r| r.t)
    }

    /// Mean error over `t ≥ from`.
    pub fn mean_error_after(&self, from: f64) -> Option<f64> {
        let tail: Vec<f64> = self
            .records
            .iter()
            .filter(|r| r.t >= from)
            .map(|r| r.frobenius_error)
            .collect();
        (!tail.is_empty()).then(|| tail.iter().sum::<f64>() / tail.len() as f64)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnvelopePoint {
    pub t: f64,
    pub peak_error: f64,
}

/// Indices of strict interior local maxima.
pub fn local_maxima(values: &[f64]) -> Result<Vec<usize>> {
    if values.len() < 3 {
        return Err(Error::param(
            "series",
            format!("needs at least 3 points, got {}", values.len()),
        ));
    }
    Ok((1..values.len() - 1)
        .filter(|&i| values[i] > values[i - 1] && values[i] > values[i + 1])
        .collect())
}

/// Crests of the error series.
pub fn extract_envelope(records: &[TrajectoryRecord]) -> Result<Vec<EnvelopePoint>> {
    let errors: Vec<f64> = records.iter().map(|r| r.frobenius_error).collect();
    Ok(local_maxima(&errors)?
        .into_iter()
        .map(|i| EnvelopePoint {
            t: records[i].t,
            peak_error: errors[i],
        })
        .collect())
}

/// Writes a header row and one row per record.
pub fn emit_csv(records: &[TrajectoryRecord], path: &Path) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(file);
    w.write_record(CSV_COLUMNS)?;
    for r in records {
        w.serialize(r)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_csv(path: &Path) -> Result<Vec<TrajectoryRecord>> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut r = csv::Reader::from_reader(file);
    let header: Vec<String> = r.headers()?.iter().map(str::to_owned).collect();
    if header != CSV_COLUMNS {
        return Err(Error::config(path.display().to_string(), "unexpected CSV header"));
    }
    r.deserialize().map(|row| row.map_err(Error::from)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TerminalMetrics {
    pub k: usize,
    pub t: f64,
    pub frobenius_error: f64,
    pub defect: f64,
    pub bias_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesSummary {
    pub label: String,
    pub method: Method,
    pub params: BTreeMap<String, f64>,
    pub file: String,
    pub rows: usize,
    pub diverged_at: Option<usize>,
    pub terminal: Option<TerminalMetrics>,
    /// `‖R̂‖_F` at the last epoch.
    pub terminal_norm: Option<f64>,
    pub min_error: Option<f64>,
    pub first_below_0_1: Option<f64>,
    pub envelope: Vec<EnvelopePoint>,
}

impl SeriesSummary {
    pub fn new(series: &Series, file: String) -> Self {
        let terminal = series.terminal();
        SeriesSummary {
            label: series.label.clone(),
            method: series.method,
            params: series.params.clone(),
            file,
            rows: series.records.len(),
            diverged_at: series.diverged_at,
            terminal: terminal.map(|r| TerminalMetrics {
                k: r.k,
                t: r.t,
                frobenius_error: r.frobenius_error,
                defect: r.defect,
                bias_error: r.bias_error,
            }),
            terminal_norm: terminal.map(TrajectoryRecord::estimate_norm),
            min_error: (!series.records.is_empty()).then(|| series.min_error()),
            first_below_0_1: series.first_below(0.1),
            envelope: extract_envelope(&series.records).unwrap_or_default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub scenario: String,
    pub config: serde_json::Value,
    pub series: Vec<SeriesSummary>,
}

pub fn emit_summary_json(summary: &Summary, path: &Path) -> Result<()> {
    let text = serde_json::to_string_pretty(summary)?;
    std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::so3::exp_skew;

    fn record(k: usize, err: f64) -> TrajectoryRecord {
        let mut r = TrajectoryRecord::new(
            k,
            k as f64 * 0.1,
            &Mat3::identity(),
            &Mat3::identity(),
            &Vec3::zeros(),
            &Vec3::zeros(),
            &Vec3::zeros(),
        );
        r.frobenius_error = err;
        r
    }

    #[test]
    fn metrics_of_a_record() {
        let r = *exp_skew(&Vec3::new(0.1, 0.2, 0.3));
        let rhat = Mat3::identity() * 2.0;
        let rec = TrajectoryRecord::new(3, 1.5, &r, &rhat, &Vec3::new(0.1, 0.0, 0.0), &Vec3::x(), &Vec3::zeros());
        assert_eq!(rec.frobenius_error, (rhat - r).norm());
        assert!((rec.defect - 27f64.sqrt()).abs() < 1e-12);
        assert_eq!(rec.bias_error, 0.1);
        assert_eq!(rec.truth(), r);
        assert_eq!(rec.estimate(), rhat);
    }

    #[test]
    fn maxima_examples() {
        assert_eq!(local_maxima(&[0.0, 1.0, 0.0, 2.0, 0.0]).unwrap(), vec![1, 3]);
        assert!(local_maxima(&[5.0, 4.0, 3.0, 2.0]).unwrap().is_empty());
        assert!(local_maxima(&[0.0, 1.0, 1.0, 0.0]).unwrap().is_empty());
        assert!(local_maxima(&[1.0, 2.0]).is_err());
    }

    #[test]
    fn envelope_of_damped_oscillation_decreases() {
        let recs: Vec<TrajectoryRecord> = (0..200)
            .map(|k| {
                let t = k as f64 * 0.1;
                record(k, (-t).exp() * t.sin().abs())
            })
            .collect();
        let env = extract_envelope(&recs).unwrap();
        assert!(env.len() >= 4);
        for w in env.windows(2) {
            assert!(w[1].peak_error < w[0].peak_error);
        }
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.csv");
        emit_csv(&[], &path).unwrap();
        assert_eq!(
            std::fs::read_to_string(&path).unwrap().trim_end(),
            CSV_COLUMNS.join(",")
        );
        assert!(read_csv(&path).unwrap().is_empty());

        let r = *exp_skew(&Vec3::new(0.3, -1.1, 0.7));
        let recs: Vec<TrajectoryRecord> = (0..5)
            .map(|k| {
                let rhat = r * (1.0 + 1e-3 * k as f64 / 3.0);
                TrajectoryRecord::new(
                    k,
                    k as f64 / 3.0,
                    &r,
                    &rhat,
                    &Vec3::new(0.1, 1.0 / 7.0, -2e-17),
                    &Vec3::x(),
                    &Vec3::zeros(),
                )
            })
            .collect();
        emit_csv(&recs, &path).unwrap();
        assert_eq!(read_csv(&path).unwrap(), recs);
    }
}
