//! Continuous-time observer with manifold attraction:
//!
//! ```text
//! d/dt R̂ = R̂ hat(Ωʸ − b̂ + k_p ω) − k_e R̂ (R̂ᵀR̂ − I)
//! d/dt b̂ = −k_I ω,      ω = vex(P_a(R̂ᵀ Rʸ))
//! ```

use crate::error::{Error, Result};
use crate::feedback_integrator::{euler_step_at, rk4_step_at, FieldPair, FlowState, Scheme};
use crate::so3::{hat, vex_antisym, Mat3, Rotation, Vec3};
use crate::truth::{step_count, Measurement};

use super::{Gains, ObserverState};

/// Dimension of the flattened observer state (nine `R̂` entries, three `b̂`).
pub const FLOW_DIM: usize = 12;

/// `vex(P_a(R̂ᵀ Rʸ))`.
pub fn innovation(rhat: &Mat3, ry: &Rotation) -> Vec3 {
    vex_antisym(&(rhat.transpose() * **ry))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StateDerivative {
    pub rhat: Mat3,
    pub bhat: Vec3,
}

/// `k_e R̂ (R̂ᵀR̂ − I)`, the manifold-attraction term.
pub fn manifold_term(rhat: &Mat3, k_e: f64) -> Mat3 {
    rhat * (rhat.transpose() * rhat - Mat3::identity()) * k_e
}

pub fn continuous_rhs(st: &ObserverState, ry: &Rotation, omega_y: &Vec3, g: &Gains) -> StateDerivative {
    let w = innovation(&st.rhat, ry);
    StateDerivative {
        rhat: st.rhat * hat(&(omega_y - st.bhat + w * g.k_p)) - manifold_term(&st.rhat, g.k_e),
        bhat: -w * g.k_i,
    }
}

/// Row-major `R̂` entries followed by `b̂`.
pub fn to_flow(rhat: &Mat3, bhat: &Vec3) -> FlowState {
    let mut x = FlowState::zeros(FLOW_DIM);
    for i in 0..3 {
        for j in 0..3 {
            x[3 * i + j] = rhat[(i, j)];
        }
    }
    x.fixed_rows_mut::<3>(9).copy_from(bhat);
    x
}

pub fn from_flow(x: &FlowState) -> (Mat3, Vec3) {
    assert_eq!(x.len(), FLOW_DIM, "observer flow state has 12 entries");
    let rhat = Mat3::from_fn(|i, j| x[3 * i + j]);
    (rhat, Vec3::new(x[9], x[10], x[11]))
}

fn derivative_to_flow(d: &StateDerivative) -> FlowState {
    to_flow(&d.rhat, &d.bhat)
}

/// Observer dynamics frozen at one measurement, split as original field
/// `X` (`k_e = 0`) plus the potential `V = (k_e/4)‖R̂ᵀR̂ − I‖²`, whose
/// gradient is exactly the manifold term.
pub fn observer_field_pair(meas: Measurement, g: Gains) -> FieldPair {
    let g_plain = g.with_k_e(0.0);
    let k_e = g.k_e;
    FieldPair::new(
        move |x: &FlowState| {
            let (rhat, bhat) = from_flow(x);
            let d = continuous_rhs(&ObserverState::new(rhat, bhat), &meas.ry, &meas.omega_y, &g_plain);
            derivative_to_flow(&d)
        },
        move |x: &FlowState| {
            let (rhat, _) = from_flow(x);
            to_flow(&manifold_term(&rhat, k_e), &Vec3::zeros())
        },
        move |x: &FlowState| {
            let (rhat, _) = from_flow(x);
            0.25 * k_e * (rhat.transpose() * rhat - Mat3::identity()).norm_squared()
        },
    )
}

/// Integrates the continuous observer with step `h` up to `horizon`.
///
/// `meas` is sampled at every stage time of the scheme, so the reference
/// sees exact-time measurements rather than a zero-order hold.
pub fn integrate_continuous<M>(
    st0: &ObserverState,
    meas: M,
    g: &Gains,
    h: f64,
    horizon: f64,
    scheme: Scheme,
) -> Result<Vec<ObserverState>>
where
    M: Fn(f64) -> Measurement,
{
    if !(h > 0.0) {
        return Err(Error::param("h", format!("{h} must be positive")));
    }
    if !(horizon >= h) {
        return Err(Error::param(
            "horizon",
            format!("{horizon} is shorter than the step {h}"),
        ));
    }
    let n = step_count(horizon, h);
    let field = |t: f64, x: &FlowState| {
        let (rhat, bhat) = from_flow(x);
        let m = meas(t);
        derivative_to_flow(&continuous_rhs(&ObserverState::new(rhat, bhat), &m.ry, &m.omega_y, g))
    };
    let mut states = Vec::with_capacity(n + 1);
    states.push(ObserverState::new(st0.rhat, st0.bhat));
    let mut x = to_flow(&st0.rhat, &st0.bhat);
    for k in 0..n {
        let t = k as f64 * h;
        x = match scheme {
            Scheme::Euler => euler_step_at(field, t, &x, h),
            Scheme::Rk4 => rk4_step_at(field, t, &x, h),
        };
        let (rhat, bhat) = from_flow(&x);
        let st = ObserverState::new(rhat, bhat);
        if !st.is_finite() {
            return Err(Error::NonFinite { epoch: k + 1 });
        }
        states.push(st);
    }
    Ok(states)
}
