//! Error-system diagnostics for the observers.

use nalgebra::{Complex, Matrix2, SMatrix};
use rand::Rng;

use crate::error::{Error, Result};
use crate::feedback_integrator::FlowState;
use crate::so3::{hat, vex_antisym, Mat3, Rotation, Vec3};

use super::{Gains, ObserverState};

pub type Mat6 = SMatrix<f64, 6, 6>;

/// `R̃ = R̂ᵀR`, `b̃ = b − b̂`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorState {
    pub rtilde: Mat3,
    pub btilde: Vec3,
}

pub fn error_state(st: &ObserverState, r: &Rotation, b: &Vec3) -> ErrorState {
    ErrorState {
        rtilde: st.rhat.transpose() * **r,
        btilde: b - st.bhat,
    }
}

/// `¼‖I − R̃‖² + ‖b̃‖² / (2 k_I)`.
pub fn lyapunov_v(e: &ErrorState, k_i: f64) -> Result<f64> {
    if !(k_i > 0.0) {
        return Err(Error::param("k_i", format!("{k_i} must be positive")));
    }
    Ok(0.25 * (Mat3::identity() - e.rtilde).norm_squared() + e.btilde.norm_squared() / (2.0 * k_i))
}

/// `‖R̂ᵀR̂ − I‖²`.
pub fn potential_v1(rhat: &Mat3) -> f64 {
    (rhat.transpose() * rhat - Mat3::identity()).norm_squared()
}

/// Error dynamics with exact attitude measurements (`Rʸ = R`):
///
/// ```text
/// d/dt R̃ = [R̃, hat(Ω)] − k_p hat(ω) R̃ − hat(b̃) R̃ − k_e (R̃R̃ᵀ − I) R̃
/// d/dt b̃ = k_I ω,       ω = vex(P_a(R̃))
/// ```
pub fn error_dynamics(e: &ErrorState, omega: &Vec3, g: &Gains) -> ErrorState {
    let r = e.rtilde;
    let w = vex_antisym(&r);
    let om = hat(omega);
    let rdot =
        r * om - om * r - hat(&w) * r * g.k_p - hat(&e.btilde) * r - (r * r.transpose() - Mat3::identity()) * r * g.k_e;
    ErrorState {
        rtilde: rdot,
        btilde: w * g.k_i,
    }
}

/// Coordinates near `(I, 0)`: `R̃ = I + s + hat(a)`, `b̃ = −y`, `s` symmetric.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearizedState {
    pub a: Vec3,
    pub y: Vec3,
    pub s: Mat3,
}

impl LinearizedState {
    pub fn from_error(e: &ErrorState) -> Self {
        let d = e.rtilde - Mat3::identity();
        LinearizedState {
            a: vex_antisym(&d),
            y: -e.btilde,
            s: (d + d.transpose()) * 0.5,
        }
    }

    pub fn to_error(&self) -> ErrorState {
        ErrorState {
            rtilde: Mat3::identity() + self.s + hat(&self.a),
            btilde: -self.y,
        }
    }
}

/// Linearised error dynamics about `(I, 0)` for a frozen `Ω`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Linearization {
    /// `[[−k_p I − hat(Ω), I], [−k_I I, 0]]` acting on `(a, y)`.
    pub a: Mat6,
    pub omega: Vec3,
    pub k_e: f64,
}

impl Linearization {
    /// `ṡ = [s, hat(Ω)] − 2 k_e s`.
    pub fn s_decay(&self, s: &Mat3) -> Mat3 {
        let om = hat(&self.omega);
        s * om - om * s - s * (2.0 * self.k_e)
    }

    pub fn eigenvalues(&self) -> Vec<Complex<f64>> {
        self.a.complex_eigenvalues().iter().copied().collect()
    }

    pub fn max_real_part(&self) -> f64 {
        self.eigenvalues()
            .iter()
            .map(|z| z.re)
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

pub fn linearized_matrices(omega: &Vec3, g: &Gains) -> Linearization {
    let mut a = Mat6::zeros();
    let top_left = -Mat3::identity() * g.k_p - hat(omega);
    a.fixed_view_mut::<3, 3>(0, 0).copy_from(&top_left);
    a.fixed_view_mut::<3, 3>(0, 3).copy_from(&Mat3::identity());
    a.fixed_view_mut::<3, 3>(3, 0).copy_from(&(-Mat3::identity() * g.k_i));
    Linearization {
        a,
        omega: *omega,
        k_e: g.k_e,
    }
}

/// Weights and matrices of the quadratic certificate for the `(a, y)` subsystem.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StabilityCertificate {
    pub alpha1: f64,
    pub alpha2: f64,
    pub alpha3: f64,
    pub omega_max: f64,
    /// `[[α₁ I, α₂ I], [−α₂ I, α₃ I]]`.
    pub p: Mat6,
    /// `[[k_p α₁ − α₂ k_I, α₂ |Ω_max|], [−α₂ |Ω_max|, α₂]]`.
    pub q: Matrix2<f64>,
    /// Smallest eigenvalue of the symmetric part of `p`.
    pub p_min_eig: f64,
    /// Smallest eigenvalue of the symmetric part of `q`.
    pub q_min_eig: f64,
}

/// Picks `α₁ = 2·α₂(|Ω_max|² + k_I)/k_p` and `α₃` at the midpoint of
/// `((α₁ + k_p α₂)/k_I, (α₁ + k_p α₂ + |Ω_max| α₂)/k_I)`, then checks
/// positive definiteness of `P` and `Q`.
pub fn build_certificate(g: &Gains, omega_max: f64, alpha2: f64) -> Result<StabilityCertificate> {
    if !(alpha2 > 0.0 && alpha2.is_finite()) {
        return Err(Error::param("alpha2", format!("{alpha2} must be positive")));
    }
    if !(omega_max >= 0.0 && omega_max.is_finite()) {
        return Err(Error::param("omega_max", format!("{omega_max} must be non-negative")));
    }
    g.validate()?;
    let alpha1 = 2.0 * alpha2 * (omega_max * omega_max + g.k_i) / g.k_p;
    let lo = (alpha1 + g.k_p * alpha2) / g.k_i;
    let width = omega_max * alpha2 / g.k_i;
    if !(width > 0.0) {
        return Err(Error::Certificate(format!(
            "admissible alpha3 interval ({lo}, {lo}) is empty"
        )));
    }
    let alpha3 = lo + 0.5 * width;

    let mut p = Mat6::zeros();
    p.fixed_view_mut::<3, 3>(0, 0).copy_from(&(Mat3::identity() * alpha1));
    p.fixed_view_mut::<3, 3>(0, 3).copy_from(&(Mat3::identity() * alpha2));
    p.fixed_view_mut::<3, 3>(3, 0).copy_from(&(Mat3::identity() * -alpha2));
    p.fixed_view_mut::<3, 3>(3, 3).copy_from(&(Mat3::identity() * alpha3));
    let q = Matrix2::new(
        g.k_p * alpha1 - alpha2 * g.k_i,
        alpha2 * omega_max,
        -alpha2 * omega_max,
        alpha2,
    );

    let p_min_eig = ((p + p.transpose()) * 0.5).symmetric_eigenvalues().min();
    let q_min_eig = ((q + q.transpose()) * 0.5).symmetric_eigenvalues().min();
    if !(p_min_eig > 0.0 && q_min_eig > 0.0) {
        return Err(Error::Certificate(format!(
            "not positive definite (min eig P = {p_min_eig}, Q = {q_min_eig})"
        )));
    }
    Ok(StabilityCertificate {
        alpha1,
        alpha2,
        alpha3,
        omega_max,
        p,
        q,
        p_min_eig,
        q_min_eig,
    })
}

/// Constants of the global error bound for the discrete observer.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct ConvergenceBound {
    /// Local remainder constant: one-step error ≤ `c Δt²`.
    pub c: f64,
    /// Lipschitz constant of the continuous right-hand side.
    pub l: f64,
    pub dt: f64,
    pub t_star: f64,
}

impl ConvergenceBound {
    pub fn new(c: f64, l: f64, dt: f64, t_star: f64) -> Result<Self> {
        for (name, v) in [("c", c), ("l", l), ("dt", dt), ("t_star", t_star)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::param(name, format!("{v} must be positive")));
            }
        }
        Ok(ConvergenceBound { c, l, dt, t_star })
    }

    /// `(c/L) Δt (e^{L t*} − 1)`, valid for every `k ≤ ⌊t*/Δt⌋`.
    pub fn horizon_bound(&self) -> f64 {
        self.c / self.l * self.dt * (self.l * self.t_star).exp_m1()
    }
}

/// `(c/L) Δt ((1 + LΔt)^k − 1)`.
pub fn error_bound(cb: &ConvergenceBound, k: u32) -> f64 {
    let growth = (k as f64 * (cb.l * cb.dt).ln_1p()).exp_m1();
    cb.c / cb.l * cb.dt * growth
}

/// Largest `‖f(t, x) − f(t, y)‖ / ‖x − y‖` over random perturbations `y` of
/// each sample point within `radius`.
pub fn estimate_lipschitz<F, R>(f: F, points: &[(f64, FlowState)], radius: f64, draws: usize, rng: &mut R) -> f64
where
    F: Fn(f64, &FlowState) -> FlowState,
    R: Rng + ?Sized,
{
    let mut best = 0.0f64;
    for (t, x) in points {
        let fx = f(*t, x);
        for _ in 0..draws {
            let dir = FlowState::from_fn(x.len(), |_, _| rng.random_range(-1.0..1.0));
            let n = dir.norm();
            if n == 0.0 {
                continue;
            }
            let scale = radius * rng.random_range(0.1..1.0) / n;
            let y = x + dir * scale;
            let ratio = (f(*t, &y) - &fx).norm() / (n * scale);
            best = best.max(ratio);
        }
    }
    best
}

/// `max ‖x_{k+1} − 2x_k + x_{k−1}‖ / Δt²` over a uniformly spaced trajectory.
pub fn second_difference_constant(traj: &[FlowState], dt: f64) -> f64 {
    traj.windows(3)
        .map(|w| (&w[2] - &w[1] * 2.0 + &w[0]).norm() / (dt * dt))
        .fold(0.0, f64::max)
}
