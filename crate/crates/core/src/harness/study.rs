//! Discrete observer against the rk4-integrated continuous observer.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::{self, ExecMode};
use crate::feedback_integrator::Scheme;
use crate::observers::continuous::integrate_continuous;
use crate::observers::discrete::run_discrete;
use crate::observers::ObserverState;
use crate::truth::{propagate_truth, sample_measurements, step_count, Measurement};

use super::config::ScenarioConfig;
use super::scenarios::InitialConditions;

/// Reference step is the smallest `Δt` divided by this.
pub const REFERENCE_REFINEMENT: f64 = 20.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OrderRow {
    pub dt: f64,
    /// `max_k ‖R̂_d(k|k) − R̂_cont(kΔt)‖_F`.
    pub max_deviation: f64,
    /// Previous row's deviation over this one.
    pub ratio: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrderStudy {
    pub h_ref: f64,
    pub horizon: f64,
    pub rows: Vec<OrderRow>,
}

pub fn convergence_order_study(cfg: &ScenarioConfig, dts: &[f64]) -> Result<OrderStudy> {
    convergence_order_study_with(cfg, dts, ExecMode::default())
}

/// Uses the config's truth, bias, gains and initial conditions; any
/// disturbance is left out so both observers see the same signal.
pub fn convergence_order_study_with(cfg: &ScenarioConfig, dts: &[f64], mode: ExecMode) -> Result<OrderStudy> {
    let horizon = cfg.horizon();
    if dts.is_empty() {
        return Err(Error::param("dts", "at least one step is required"));
    }
    for &dt in dts {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::param("dts", format!("{dt} must be positive")));
        }
        if dt > horizon {
            return Err(Error::param("dts", format!("{dt} exceeds the horizon {horizon}")));
        }
    }
    let h_ref = dts.iter().copied().fold(f64::INFINITY, f64::min) / REFERENCE_REFINEMENT;
    let strides = dts
        .iter()
        .map(|&dt| {
            let ratio = dt / h_ref;
            let stride = ratio.round();
            if (ratio - stride).abs() > 1e-6 * ratio {
                return Err(Error::param(
                    "dts",
                    format!("{dt} is not an integer multiple of the reference step {h_ref}"),
                ));
            }
            Ok(stride as usize)
        })
        .collect::<Result<Vec<_>>>()?;

    let ic = InitialConditions::resolve(cfg)?;
    // rk4 stages sit on multiples of h_ref / 2
    let h_fine = h_ref / 2.0;
    let fine = propagate_truth(ic.r0, &cfg.omega, h_fine, horizon + h_ref)?;
    let b = cfg.bias();
    let meas = |t: f64| {
        let i = ((t / h_fine).round() as usize).min(fine.len() - 1);
        Measurement {
            ry: fine.rotations[i],
            omega_y: fine.omega[i] + b,
        }
    };
    let st0 = ObserverState::new(ic.rhat0, ic.bhat0);
    let reference = integrate_continuous(&st0, meas, &cfg.gains, h_ref, horizon, Scheme::Rk4)?;

    let deviations = exec::try_map(mode, &strides, |&stride| {
        let dt = stride as f64 * h_ref;
        let mut stream = sample_measurements(&fine, b, dt)?;
        stream.epochs.truncate(step_count(horizon, dt) + 1);
        let states = run_discrete(ic.rhat0, ic.bhat0, &stream, &cfg.gains, cfg.predictor)?;
        Ok::<f64, Error>(
            states
                .iter()
                .enumerate()
                .map(|(k, st)| (st.rhat - reference[k * stride].rhat).norm())
                .fold(0.0, f64::max),
        )
    })?;

    let rows = dts
        .iter()
        .zip(&deviations)
        .enumerate()
        .map(|(i, (&dt, &dev))| OrderRow {
            dt,
            max_deviation: dev,
            ratio: (i > 0).then(|| deviations[i - 1] / dev),
        })
        .collect();
    Ok(OrderStudy { h_ref, horizon, rows })
}
