//! Stabilisation and path tracking built from the discrete observer.
//!
//! Stabiliser about a target `p`, one epoch:
//!
//! ```text
//! b̂(k) = b̂(k−1) ± k_b ω_{k−1} Δt
//! x_d  = exp(−hat(b̂(k)) Δt)
//! ω_k  = vex(P_a(x_dᵀ Rʸ_kᵀ p))
//! Ω_c  = x_d [I + k_p hat(ω_k) Δt − k_e (x_dᵀ Rʸ_kᵀ Rʸ_k x_d − I) Δt]
//! ```
//!
//! and the plant moves as `R_{k+1} = R_k Ω_c`. The plant is integrated in
//! the ambient space, so the attitude fed back is a plain matrix.

use std::fmt;

use crate::error::{Error, Result};
use crate::observers::discrete::{step_discrete, Predictor};
use crate::observers::{Gains, ObserverState};
use crate::so3::{exp_skew, hat, vee, vex_antisym, Mat3, Rotation, Vec3};
use crate::truth::{step_count, Measurement};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StabilizerState {
    pub bhat: Vec3,
    pub target: Rotation,
    /// Innovation of the previous epoch, used by the bias update.
    pub prev_innovation: Vec3,
}

impl StabilizerState {
    pub fn new(target: Rotation) -> Self {
        StabilizerState {
            bhat: Vec3::zeros(),
            target,
            prev_innovation: Vec3::zeros(),
        }
    }
}

/// Returns the multiplicative input `Ω_c` and the updated stabiliser state.
pub fn stabilizing_input(st: &StabilizerState, ry: &Mat3, g: &Gains, dt: f64) -> Result<(Mat3, StabilizerState)> {
    if !(dt > 0.0) {
        return Err(Error::param("dt", format!("{dt} must be positive")));
    }
    let bhat = st.bhat + st.prev_innovation * (g.bias_sign.value() * g.k_b * dt);
    let xd = *exp_skew(&(-bhat * dt));
    let w = vex_antisym(&(xd.transpose() * ry.transpose() * *st.target));
    let quad = xd.transpose() * ry.transpose() * ry * xd - Mat3::identity();
    let omega_c = xd * (Mat3::identity() + hat(&(w * g.k_p)) * dt - quad * (g.k_e * dt));
    Ok((
        omega_c,
        StabilizerState {
            bhat,
            target: st.target,
            prev_innovation: w,
        },
    ))
}

/// Closed-loop stabiliser run; `attitudes[k]` is `R_k`.
#[derive(Debug, Clone)]
pub struct StabilizationRun {
    pub dt: f64,
    pub attitudes: Vec<Mat3>,
    pub states: Vec<StabilizerState>,
}

impl StabilizationRun {
    /// `‖R_k − p‖_F` per epoch.
    pub fn errors(&self) -> Vec<f64> {
        self.attitudes
            .iter()
            .zip(&self.states)
            .map(|(r, s)| (r - *s.target).norm())
            .collect()
    }
}

/// Feeds the plant attitude back as the measurement at every epoch.
pub fn run_stabilization(r0: Mat3, target: Rotation, g: &Gains, dt: f64, horizon: f64) -> Result<StabilizationRun> {
    if !(dt > 0.0) {
        return Err(Error::param("dt", format!("{dt} must be positive")));
    }
    let n = step_count(horizon, dt);
    let mut r = r0;
    let mut st = StabilizerState::new(target);
    let mut attitudes = Vec::with_capacity(n + 1);
    let mut states = Vec::with_capacity(n + 1);
    attitudes.push(r);
    states.push(st);
    for k in 1..=n {
        let (omega_c, next) = stabilizing_input(&st, &r, g, dt)?;
        r *= omega_c;
        if !r.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite { epoch: k });
        }
        st = next;
        attitudes.push(r);
        states.push(st);
    }
    Ok(StabilizationRun { dt, attitudes, states })
}

type PathFn = Box<dyn Fn(f64) -> Rotation + Send + Sync>;
type VelocityFn = Box<dyn Fn(f64) -> Mat3 + Send + Sync>;

/// Desired attitude path `f(t)` with optional induced velocity `g = fᵀḟ`.
pub struct PathSpec {
    f: PathFn,
    g: Option<VelocityFn>,
}

impl fmt::Debug for PathSpec {
    fn fmt(&self, fmt: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt.debug_struct("PathSpec")
            .field("analytic_velocity", &self.g.is_some())
            .finish()
    }
}

impl PathSpec {
    /// Path without a velocity; [`PathSpec::velocity`] falls back to finite differences.
    pub fn new(f: impl Fn(f64) -> Rotation + Send + Sync + 'static) -> Self {
        PathSpec {
            f: Box::new(f),
            g: None,
        }
    }

    pub fn with_velocity(mut self, g: impl Fn(f64) -> Mat3 + Send + Sync + 'static) -> Self {
        self.g = Some(Box::new(g));
        self
    }

    pub fn constant(p: Rotation) -> Self {
        PathSpec::new(move |_| p).with_velocity(|_| Mat3::zeros())
    }

    /// `f(t) = f₀ exp(t hat(v))`, `g = hat(v)`.
    pub fn uniform_rotation(f0: Rotation, v: Vec3) -> Self {
        PathSpec::new(move |t| f0 * exp_skew(&(v * t))).with_velocity(move |_| hat(&v))
    }

    /// Geodesic interpolation of uniformly spaced samples; clamps outside the span.
    pub fn from_samples(samples: Vec<Rotation>, spacing: f64) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::param("samples", "at least one sample is required"));
        }
        if !(spacing > 0.0) {
            return Err(Error::param("spacing", format!("{spacing} must be positive")));
        }
        let steps: Vec<Vec3> = samples
            .windows(2)
            .map(|w| log_rotation(&(w[0].inverse() * w[1])))
            .collect();
        Ok(PathSpec::new(move |t| {
            let last = samples.len() - 1;
            let u = (t / spacing).clamp(0.0, last as f64);
            let i = (u.floor() as usize).min(last.saturating_sub(1));
            if last == 0 {
                return samples[0];
            }
            samples[i] * exp_skew(&(steps[i] * (u - i as f64)))
        }))
    }

    pub fn rotation(&self, t: f64) -> Rotation {
        (self.f)(t)
    }

    /// `g(t)`, or a central difference with step `dt_fd` when no velocity was given.
    pub fn velocity(&self, t: f64, dt_fd: f64) -> Result<Mat3> {
        match &self.g {
            Some(g) => Ok(g(t)),
            None => path_velocity(&self.f, t, dt_fd),
        }
    }
}

/// Axis-angle vector of a rotation with angle below π.
fn log_rotation(r: &Rotation) -> Vec3 {
    let m = r.matrix();
    let cos = ((m.trace() - 1.0) * 0.5).clamp(-1.0, 1.0);
    let theta = cos.acos();
    let axis = Vec3::new(m[(2, 1)] - m[(1, 2)], m[(0, 2)] - m[(2, 0)], m[(1, 0)] - m[(0, 1)]);
    if theta < 1e-12 {
        axis * 0.5
    } else {
        axis * (theta / (2.0 * theta.sin()))
    }
}

/// `f(t)ᵀ ḟ(t)` with `ḟ` from a central difference of step `dt_fd`.
pub fn path_velocity<F>(f: F, t: f64, dt_fd: f64) -> Result<Mat3>
where
    F: Fn(f64) -> Rotation,
{
    if !(dt_fd > 0.0) {
        return Err(Error::param("dt_fd", format!("{dt_fd} must be positive")));
    }
    let fdot = (*f(t + dt_fd) - *f(t - dt_fd)) / (2.0 * dt_fd);
    Ok(f(t).transpose() * fdot)
}

/// One predictor–corrector step with `Rʸ_k = f_k` and `Ωʸ_k = vee(g_k)`.
pub fn path_tracking_step(
    st: &ObserverState,
    f_k: &Rotation,
    g_k: &Mat3,
    gains: &Gains,
    dt: f64,
) -> Result<ObserverState> {
    let meas = Measurement {
        ry: *f_k,
        omega_y: vee(g_k)?,
    };
    step_discrete(st, &meas, gains, dt, Predictor::ExactExp)
}

/// Tracks `path` from `rhat0`; `states[k]` is `R̂_d(k|k)` at `t = kΔt`.
pub fn run_path_tracking(rhat0: Mat3, path: &PathSpec, g: &Gains, dt: f64, horizon: f64) -> Result<Vec<ObserverState>> {
    if !(dt > 0.0) {
        return Err(Error::param("dt", format!("{dt} must be positive")));
    }
    let dt_fd = dt / 100.0;
    let n = step_count(horizon, dt);
    let g0 = vee(&path.velocity(0.0, dt_fd)?)?;
    let mut st = ObserverState::initial(rhat0, Vec3::zeros(), &g0);
    let mut states = Vec::with_capacity(n + 1);
    states.push(st);
    for k in 1..=n {
        let t = k as f64 * dt;
        st = path_tracking_step(&st, &path.rotation(t), &path.velocity(t, dt_fd)?, g, dt)?;
        if !st.is_finite() {
            return Err(Error::NonFinite { epoch: k });
        }
        states.push(st);
    }
    Ok(states)
}
