//! Mahony-type attitude observers in the ambient space ℝ³ˣ³ × ℝ³.
//!
//! * [`continuous`]: the observer with the manifold-attraction term `k_e`, its
//!   error dynamics and the matching [`FieldPair`](crate::feedback_integrator::FieldPair).
//! * [`discrete`]: the predictor–corrector observer and the Euler baselines.
//! * [`analysis`]: Lyapunov functions, linearisation, stability certificates
//!   and the global error bound for the discrete scheme.

pub mod analysis;
pub mod continuous;
pub mod discrete;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::so3::{Mat3, Vec3};

pub use analysis::{
    build_certificate, error_bound, error_state, linearized_matrices, lyapunov_v, potential_v1, ConvergenceBound,
    ErrorState, Linearization, LinearizedState, StabilityCertificate,
};
pub use continuous::{continuous_rhs, innovation, integrate_continuous, StateDerivative};
pub use discrete::{correct, euler_mahony_step, predict, step_discrete, Predictor};

/// Sign applied to the discrete bias update `b̂ ← b̂ ± k_b ω Δt`.
///
/// `Negative` matches the continuous law `ḃ̂ = −k_I ω` and is the only sign
/// for which the bias loop is stable; `Positive` is kept for comparison.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(try_from = "i8", into = "i8")]
pub enum BiasSign {
    Positive,
    #[default]
    Negative,
}

impl BiasSign {
    pub fn value(self) -> f64 {
        match self {
            BiasSign::Positive => 1.0,
            BiasSign::Negative => -1.0,
        }
    }
}

impl TryFrom<i8> for BiasSign {
    type Error = String;

    fn try_from(v: i8) -> std::result::Result<Self, String> {
        match v {
            1 => Ok(BiasSign::Positive),
            -1 => Ok(BiasSign::Negative),
            other => Err(format!("bias_sign must be +1 or -1, got {other}")),
        }
    }
}

impl From<BiasSign> for i8 {
    fn from(s: BiasSign) -> i8 {
        match s {
            BiasSign::Positive => 1,
            BiasSign::Negative => -1,
        }
    }
}

/// Observer gains. `k_i` drives the continuous bias law, `k_b` the discrete one.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Gains {
    pub k_p: f64,
    pub k_i: f64,
    pub k_e: f64,
    pub k_b: f64,
    pub bias_sign: BiasSign,
}

impl Default for Gains {
    fn default() -> Self {
        Gains {
            k_p: 1.0,
            k_i: 0.3,
            k_e: 1.0,
            k_b: 0.3,
            bias_sign: BiasSign::Negative,
        }
    }
}

impl Gains {
    pub fn validate(&self) -> Result<()> {
        let positive = [("k_p", self.k_p), ("k_i", self.k_i), ("k_b", self.k_b)];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::param(name, format!("{v} must be positive")));
            }
        }
        if !(self.k_e >= 0.0 && self.k_e.is_finite()) {
            return Err(Error::param("k_e", format!("{} must be non-negative", self.k_e)));
        }
        Ok(())
    }

    pub fn with_k_e(mut self, k_e: f64) -> Self {
        self.k_e = k_e;
        self
    }
}

/// Observer estimate. `rhat` lives in the ambient space and is not
/// guaranteed to be a rotation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObserverState {
    pub rhat: Mat3,
    pub bhat: Vec3,
    /// Held angular-velocity estimate `Ωʸ_k − b̂_k` used by the next predictor.
    pub omega_held: Vec3,
    /// Innovation from the most recent correction (zero before the first).
    pub innovation: Vec3,
}

impl ObserverState {
    pub fn new(rhat: Mat3, bhat: Vec3) -> Self {
        ObserverState {
            rhat,
            bhat,
            omega_held: Vec3::zeros(),
            innovation: Vec3::zeros(),
        }
    }

    /// Discrete start: holds `Ωʸ_0 − b̂_0` for the first prediction.
    pub fn initial(rhat: Mat3, bhat: Vec3, omega_y0: &Vec3) -> Self {
        ObserverState {
            omega_held: omega_y0 - bhat,
            ..ObserverState::new(rhat, bhat)
        }
    }

    /// False once any entry, or the norm of `R̂` or `b̂`, is no longer finite.
    pub fn is_finite(&self) -> bool {
        self.rhat.norm().is_finite() && self.bhat.norm().is_finite()
    }
}
