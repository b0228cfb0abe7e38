#![allow(dead_code)]

use rand::Rng;
use so3_observer::so3::{hat, orthogonality_defect, Mat3, Rotation, Vec3};

/// exp by truncated power series with scaling and squaring.
pub fn series_exp(v: &Vec3) -> Mat3 {
    let mut squarings = 0;
    let mut scaled = *v;
    while scaled.norm() > 0.5 {
        scaled /= 2.0;
        squarings += 1;
    }
    let k = hat(&scaled);
    let mut term = Mat3::identity();
    let mut sum = Mat3::identity();
    for j in 1..=30 {
        term = term * k / j as f64;
        sum += term;
    }
    for _ in 0..squarings {
        sum = sum * sum;
    }
    sum
}

pub fn random_vec<R: Rng>(rng: &mut R, scale: f64) -> Vec3 {
    Vec3::new(
        rng.random_range(-scale..scale),
        rng.random_range(-scale..scale),
        rng.random_range(-scale..scale),
    )
}

/// A random rotation stretched by `I + εS`, with `ε` chosen so the
/// orthogonality defect equals `defect`.
pub fn off_manifold<R: Rng>(rng: &mut R, defect: f64) -> Mat3 {
    let q = Rotation::random(rng).into_inner();
    let a = Mat3::from_fn(|_, _| rng.random_range(-1.0..1.0));
    let s = (a + a.transpose()) * 0.5;
    let s = s / s.norm();
    let (mut lo, mut hi) = (0.0, 1.0);
    while orthogonality_defect(&(Mat3::identity() + s * hi)) < defect {
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if orthogonality_defect(&(Mat3::identity() + s * mid)) < defect {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    q * (Mat3::identity() + s * (0.5 * (lo + hi)))
}
