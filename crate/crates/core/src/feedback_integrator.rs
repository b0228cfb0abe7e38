//! Feedback-integrator machinery for constrained flows embedded in ℝⁿ.
//!
//! A flow `ẋ = X(x)` that preserves the level set `V⁻¹(0)` is replaced by
//! `ẋ = X(x) − ∇V(x)`. Both fields coincide on `V⁻¹(0)`, and off it the
//! gradient term pulls trajectories back, so plain Euclidean one-step
//! schemes can be used without leaving a neighbourhood of the constraint.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type FlowState = DVector<f64>;

type VectorField = Box<dyn Fn(&FlowState) -> FlowState + Send + Sync>;
type ScalarField = Box<dyn Fn(&FlowState) -> f64 + Send + Sync>;

/// Original field `X`, constraint-potential gradient `∇V` and the potential `V`.
pub struct FieldPair {
    field: VectorField,
    gradient: VectorField,
    potential: ScalarField,
}

impl FieldPair {
    pub fn new(
        field: impl Fn(&FlowState) -> FlowState + Send + Sync + 'static,
        gradient: impl Fn(&FlowState) -> FlowState + Send + Sync + 'static,
        potential: impl Fn(&FlowState) -> f64 + Send + Sync + 'static,
    ) -> Self {
        FieldPair {
            field: Box::new(field),
            gradient: Box::new(gradient),
            potential: Box::new(potential),
        }
    }

    pub fn field(&self, x: &FlowState) -> FlowState {
        (self.field)(x)
    }

    pub fn gradient(&self, x: &FlowState) -> FlowState {
        (self.gradient)(x)
    }

    pub fn potential(&self, x: &FlowState) -> f64 {
        (self.potential)(x)
    }
}

/// One-step scheme used by the continuous integrators.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    Euler,
    Rk4,
}

/// `x ↦ X(x) − ∇V(x)`.
pub fn modified_field(fp: &FieldPair) -> impl Fn(&FlowState) -> FlowState + '_ {
    move |x| fp.field(x) - fp.gradient(x)
}

pub fn euler_step<F>(field: F, x: &FlowState, h: f64) -> FlowState
where
    F: Fn(&FlowState) -> FlowState,
{
    assert!(h > 0.0, "step size must be positive");
    x + field(x) * h
}

pub fn rk4_step<F>(field: F, x: &FlowState, h: f64) -> FlowState
where
    F: Fn(&FlowState) -> FlowState,
{
    rk4_step_at(|_, y| field(y), 0.0, x, h)
}

/// Classical RK4 for a time-dependent field `f(t, x)`.
pub fn rk4_step_at<F>(field: F, t: f64, x: &FlowState, h: f64) -> FlowState
where
    F: Fn(f64, &FlowState) -> FlowState,
{
    assert!(h > 0.0, "step size must be positive");
    let k1 = field(t, x);
    let k2 = field(t + 0.5 * h, &(x + &k1 * (0.5 * h)));
    let k3 = field(t + 0.5 * h, &(x + &k2 * (0.5 * h)));
    let k4 = field(t + h, &(x + &k3 * h));
    x + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0)
}

/// Forward Euler for a time-dependent field.
pub fn euler_step_at<F>(field: F, t: f64, x: &FlowState, h: f64) -> FlowState
where
    F: Fn(f64, &FlowState) -> FlowState,
{
    assert!(h > 0.0, "step size must be positive");
    x + field(t, x) * h
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TangencyReport {
    /// `max |⟨∇V(x), X(x)⟩|` over the samples.
    pub max_inner: f64,
    pub tol: f64,
    pub passed: bool,
}

/// Checks `∇V(x)·X(x) = 0` on every sample.
pub fn check_tangency(fp: &FieldPair, samples: &[FlowState], tol: f64) -> Result<TangencyReport> {
    if samples.is_empty() {
        return Err(Error::param("samples", "empty sample set"));
    }
    let max_inner = samples
        .iter()
        .map(|x| fp.gradient(x).dot(&fp.field(x)).abs())
        .fold(0.0, f64::max);
    Ok(TangencyReport {
        max_inner,
        tol,
        passed: max_inner < tol,
    })
}

/// `[V(x⁺) − V(x)] / (−h‖∇V(x)‖²)` with `x⁺` one Euler step of the modified
/// field. Tends to 1 as `h → 0` when the tangency condition holds.
pub fn discrete_decrease_ratio(fp: &FieldPair, x: &FlowState, h: f64) -> Result<f64> {
    if !(h > 0.0) {
        return Err(Error::param("h", format!("{h} is not positive")));
    }
    let grad = fp.gradient(x);
    let g2 = grad.norm_squared();
    if g2.sqrt() <= 1e-8 {
        return Err(Error::OnConstraint(g2.sqrt()));
    }
    let next = euler_step(modified_field(fp), x, h);
    Ok((fp.potential(&next) - fp.potential(x)) / (-h * g2))
}
