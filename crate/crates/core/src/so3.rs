//! Dense 3×3 kernel for rotations.
//!
//! Everything here works on plain `nalgebra` matrices in the ambient space
//! ℝ³ˣ³. [`Rotation`] is the only type that carries a manifold guarantee;
//! estimates produced by the observers are ordinary [`Mat3`] values and may
//! drift off SO(3).
//!
//! The hat map follows `hat(v) * w == v.cross(&w)`.

use std::ops::{Deref, Mul};

use nalgebra::{Matrix3, Vector3};
use rand::Rng;

use crate::error::{Error, Result};

pub type Vec3 = Vector3<f64>;
pub type Mat3 = Matrix3<f64>;

/// Orthogonality defect accepted by [`Rotation::new`].
pub const ROTATION_TOLERANCE: f64 = 1e-9;

/// Symmetric-part tolerance accepted by [`vee`].
pub const SKEW_TOLERANCE: f64 = 1e-9;

/// Below this angle `exp_skew` switches from Rodrigues to its series.
const SMALL_ANGLE: f64 = 1e-6;

/// A 3×3 matrix certified to lie on SO(3).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rotation(Mat3);

impl Rotation {
    pub fn identity() -> Self {
        Rotation(Mat3::identity())
    }

    /// Validates `m` against the orthogonality and orientation invariants.
    pub fn new(m: Mat3) -> Result<Self> {
        let defect = orthogonality_defect(&m);
        let det = m.determinant();
        if !defect.is_finite() || defect > ROTATION_TOLERANCE || det <= 0.0 {
            return Err(Error::NotRotation { defect, det });
        }
        Ok(Rotation(m))
    }

    /// Wraps a matrix already known to be on the manifold by construction.
    pub(crate) fn from_matrix_unchecked(m: Mat3) -> Self {
        Rotation(m)
    }

    pub fn matrix(&self) -> &Mat3 {
        &self.0
    }

    pub fn into_inner(self) -> Mat3 {
        self.0
    }

    pub fn inverse(&self) -> Rotation {
        Rotation(self.0.transpose())
    }

    /// Uniformly distributed rotation (Shoemake's subgroup algorithm).
    pub fn random<R: Rng + ?Sized>(rng: &mut R) -> Rotation {
        let u1: f64 = rng.random();
        let u2: f64 = rng.random::<f64>() * std::f64::consts::TAU;
        let u3: f64 = rng.random::<f64>() * std::f64::consts::TAU;
        let (a, b) = ((1.0 - u1).sqrt(), u1.sqrt());
        let q = nalgebra::Quaternion::new(b * u3.cos(), a * u2.sin(), a * u2.cos(), b * u3.sin());
        let uq = nalgebra::UnitQuaternion::from_quaternion(q);
        Rotation(uq.to_rotation_matrix().into_inner())
    }
}

impl Deref for Rotation {
    type Target = Mat3;

    fn deref(&self) -> &Mat3 {
        &self.0
    }
}

impl From<Rotation> for Mat3 {
    fn from(r: Rotation) -> Mat3 {
        r.0
    }
}

impl Mul for Rotation {
    type Output = Rotation;

    fn mul(self, rhs: Rotation) -> Rotation {
        Rotation(self.0 * rhs.0)
    }
}

pub fn hat(v: &Vec3) -> Mat3 {
    Mat3::new(0.0, -v.z, v.y, v.z, 0.0, -v.x, -v.y, v.x, 0.0)
}

/// Inverse of [`hat`]. Rejects matrices whose symmetric part exceeds
/// [`SKEW_TOLERANCE`] in Frobenius norm.
pub fn vee(m: &Mat3) -> Result<Vec3> {
    let sym = (m + m.transpose()) * 0.5;
    let n = sym.norm();
    if !(n <= SKEW_TOLERANCE) {
        return Err(Error::NotSkew(n));
    }
    Ok(vee_unchecked(m))
}

/// Reads the skew entries without checking the symmetric part.
#[inline]
pub(crate) fn vee_unchecked(m: &Mat3) -> Vec3 {
    Vec3::new(m[(2, 1)], m[(0, 2)], m[(1, 0)])
}

/// `(M − Mᵀ) / 2`.
pub fn antisym_project(m: &Mat3) -> Mat3 {
    (m - m.transpose()) * 0.5
}

/// `vee(antisym_project(m))`, skipping the redundant tolerance check.
#[inline]
pub fn vex_antisym(m: &Mat3) -> Vec3 {
    0.5 * Vec3::new(m[(2, 1)] - m[(1, 2)], m[(0, 2)] - m[(2, 0)], m[(1, 0)] - m[(0, 1)])
}

/// Matrix exponential of `hat(v)` via Rodrigues' formula.
pub fn exp_skew(v: &Vec3) -> Rotation {
    let theta2 = v.norm_squared();
    let theta = theta2.sqrt();
    let (a, b) = if theta < SMALL_ANGLE {
        (1.0 - theta2 / 6.0, 0.5 - theta2 / 24.0)
    } else {
        (theta.sin() / theta, (1.0 - theta.cos()) / theta2)
    };
    let k = hat(v);
    Rotation(Mat3::identity() + k * a + k * k * b)
}

/// `Σ_{j=0..order} hat(v)ʲ / j!`, the truncated exponential series.
///
/// Not a rotation in general; the observer's manifold term absorbs the
/// truncation error.
pub fn exp_skew_taylor(v: &Vec3, order: u32) -> Result<Mat3> {
    if !(1..=10).contains(&order) {
        return Err(Error::param("order", format!("{order} not in [1, 10]")));
    }
    let k = hat(v);
    let mut term = Mat3::identity();
    let mut sum = Mat3::identity();
    for j in 1..=order {
        term = term * k / f64::from(j);
        sum += term;
    }
    Ok(sum)
}

/// `‖MᵀM − I‖_F`.
pub fn orthogonality_defect(m: &Mat3) -> f64 {
    (m.transpose() * m - Mat3::identity()).norm()
}

/// Orthogonal polar factor of `m`, the nearest rotation in Frobenius norm.
pub fn project_to_so3(m: &Mat3) -> Result<Rotation> {
    let det = m.determinant();
    if !det.is_finite() || det <= 1e-12 * m.norm().powi(3).max(f64::MIN_POSITIVE) {
        return Err(Error::Singular(det));
    }
    let svd = m.svd(true, true);
    let (u, v_t) = match (svd.u, svd.v_t) {
        (Some(u), Some(v_t)) => (u, v_t),
        _ => return Err(Error::Singular(det)),
    };
    Ok(Rotation(u * v_t))
}
