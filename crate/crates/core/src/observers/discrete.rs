//! Predictor–corrector observer for measurements sampled every `Δt`.
//!
//! Predictor: `R̂(k|k−1) = R̂(k−1|k−1) exp(hat(Ω̂(k−1)) Δt)`.
//! Corrector at `t = kΔt`:
//!
//! ```text
//! ω_k     = vex(P_a(R̂(k|k−1)ᵀ Rʸ_k))
//! R̂(k|k) = R̂(k|k−1) + R̂(k|k−1) hat(k_p ω_k) Δt − k_e R̂(k|k−1)(R̂(k|k−1)ᵀR̂(k|k−1) − I) Δt
//! b̂(k)   = b̂(k−1) ± k_b ω_k Δt
//! Ω̂(k)   = Ωʸ_k − b̂(k)
//! ```

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::so3::{exp_skew, exp_skew_taylor, hat, Mat3, Vec3};
use crate::truth::{Measurement, MeasurementStream};

use super::continuous::{innovation, manifold_term};
use super::{Gains, ObserverState};

/// How the predictor evaluates `exp(hat(Ω̂) Δt)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Predictor {
    #[default]
    ExactExp,
    /// Truncated series of the given order (1 to 10).
    Taylor(u32),
}

pub fn predict(st: &ObserverState, dt: f64, predictor: Predictor) -> Result<Mat3> {
    if !(dt > 0.0) {
        return Err(Error::param("dt", format!("{dt} must be positive")));
    }
    let v = st.omega_held * dt;
    Ok(match predictor {
        Predictor::ExactExp => st.rhat * *exp_skew(&v),
        Predictor::Taylor(order) => st.rhat * exp_skew_taylor(&v, order)?,
    })
}

pub fn correct(rpred: &Mat3, bhat_prev: &Vec3, meas: &Measurement, g: &Gains, dt: f64) -> ObserverState {
    let w = innovation(rpred, &meas.ry);
    let rhat = rpred + rpred * hat(&(w * g.k_p)) * dt - manifold_term(rpred, g.k_e) * dt;
    let bhat = bhat_prev + w * (g.bias_sign.value() * g.k_b * dt);
    ObserverState {
        rhat,
        bhat,
        omega_held: meas.omega_y - bhat,
        innovation: w,
    }
}

/// One full predict–correct cycle consuming epoch `k`.
pub fn step_discrete(
    st: &ObserverState,
    meas: &Measurement,
    g: &Gains,
    dt: f64,
    predictor: Predictor,
) -> Result<ObserverState> {
    let rpred = predict(st, dt, predictor)?;
    Ok(correct(&rpred, &st.bhat, meas, g, dt))
}

/// Multiplicative Euler step of the plain Mahony observer:
///
/// `R̂⁺ = R̂ (I + hat(Ωʸ − b̂ + k_p ω) Δt [− k_e (R̂ᵀR̂ − I) Δt])`,
/// `b̂⁺ = b̂ − k_I ω Δt`, with `ω` taken at the current estimate.
pub fn euler_mahony_step(st: &ObserverState, meas: &Measurement, g: &Gains, dt: f64, with_ke: bool) -> ObserverState {
    let w = innovation(&st.rhat, &meas.ry);
    let mut bracket = Mat3::identity() + hat(&(meas.omega_y - st.bhat + w * g.k_p)) * dt;
    if with_ke {
        bracket -= (st.rhat.transpose() * st.rhat - Mat3::identity()) * (g.k_e * dt);
    }
    ObserverState {
        rhat: st.rhat * bracket,
        bhat: st.bhat - w * (g.k_i * dt),
        omega_held: meas.omega_y - st.bhat,
        innovation: w,
    }
}

/// Runs the predictor–corrector over a stream. `states[k]` is `R̂(k|k)`.
pub fn run_discrete(
    rhat0: Mat3,
    bhat0: Vec3,
    stream: &MeasurementStream,
    g: &Gains,
    predictor: Predictor,
) -> Result<Vec<ObserverState>> {
    let Some(first) = stream.epochs.first() else {
        return Ok(Vec::new());
    };
    let mut st = ObserverState::initial(rhat0, bhat0, &first.omega_y);
    let mut states = Vec::with_capacity(stream.len());
    states.push(st);
    for (k, meas) in stream.epochs.iter().enumerate().skip(1) {
        st = step_discrete(&st, meas, g, stream.dt, predictor)?;
        if !st.is_finite() {
            return Err(Error::NonFinite { epoch: k });
        }
        states.push(st);
    }
    Ok(states)
}

/// Euler baseline trajectory, truncated where it stops being finite.
#[derive(Debug, Clone)]
pub struct EulerRun {
    pub states: Vec<ObserverState>,
    pub diverged_at: Option<usize>,
}

/// Runs the Euler baseline; the step from epoch `k` uses measurement `k`.
pub fn run_euler(rhat0: Mat3, bhat0: Vec3, stream: &MeasurementStream, g: &Gains, with_ke: bool) -> EulerRun {
    let mut st = ObserverState::new(rhat0, bhat0);
    let mut states = Vec::with_capacity(stream.len());
    let mut diverged_at = None;
    for k in 0..stream.len() {
        if !st.is_finite() {
            diverged_at = Some(k);
            break;
        }
        let next = euler_mahony_step(&st, &stream.epochs[k], g, stream.dt, with_ke);
        st.innovation = next.innovation;
        states.push(st);
        st = next;
    }
    EulerRun { states, diverged_at }
}
