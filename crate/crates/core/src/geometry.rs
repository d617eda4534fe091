//! Closed-form primitives on the Poincaré ball of curvature −1.
//!
//! Every function here is pure. Points are stored as plain `f64` coordinate
//! vectors behind newtypes that enforce the ball/sphere invariants at
//! construction time.

use crate::error::{check_dims, Error, Result};

/// Margin kept between embeddings produced by [`exp0`] or [`project_to_ball`]
/// and the unit sphere.
pub const BALL_EPS: f64 = 1e-5;

/// Rows whose norm is already within this distance of 1 are not rescaled by
/// [`IdealPoint::new`], so normalization is idempotent bit-for-bit.
const UNIT_NORM_SLACK: f64 = 1e-15;

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn sq_norm(a: &[f64]) -> f64 {
    a.iter().map(|x| x * x).sum()
}

pub(crate) fn norm(a: &[f64]) -> f64 {
    sq_norm(a).sqrt()
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn all_finite(a: &[f64]) -> bool {
    a.iter().all(|x| x.is_finite())
}

/// A raw network output living in the tangent space at the origin.
#[derive(Debug, Clone, PartialEq)]
pub struct EuclideanVector(Vec<f64>);

impl EuclideanVector {
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        if coords.is_empty() {
            return Err(Error::invalid("vector must have at least one coordinate"));
        }
        if !all_finite(&coords) {
            return Err(Error::invalid("vector has non-finite coordinates"));
        }
        Ok(Self(coords))
    }

    pub fn coords(&self) -> &[f64] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn norm(&self) -> f64 {
        norm(&self.0)
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }
}

/// A point strictly inside the open unit ball.
#[derive(Debug, Clone, PartialEq)]
pub struct PoincarePoint(Vec<f64>);

impl PoincarePoint {
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        if coords.is_empty() {
            return Err(Error::invalid("point must have at least one coordinate"));
        }
        if !all_finite(&coords) {
            return Err(Error::invalid("point has non-finite coordinates"));
        }
        let n = norm(&coords);
        if n >= 1.0 {
            return Err(Error::domain(format!("point with norm {n} is not strictly inside the unit ball")));
        }
        Ok(Self(coords))
    }

    pub fn origin(dim: usize) -> Self {
        Self(vec![0.0; dim.max(1)])
    }

    pub fn coords(&self) -> &[f64] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn norm(&self) -> f64 {
        norm(&self.0)
    }

    /// `1 − ‖z‖²`, evaluated as `(1 − ‖z‖)(1 + ‖z‖)` to keep relative
    /// accuracy close to the boundary.
    pub fn conformal_gap(&self) -> f64 {
        let n = self.norm();
        (1.0 - n) * (1.0 + n)
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }
}

/// A point on the ideal boundary (the unit sphere).
#[derive(Debug, Clone, PartialEq)]
pub struct IdealPoint(Vec<f64>);

impl IdealPoint {
    /// Normalizes `coords` onto the unit sphere.
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        if coords.is_empty() {
            return Err(Error::invalid("ideal point must have at least one coordinate"));
        }
        if !all_finite(&coords) {
            return Err(Error::invalid("ideal point has non-finite coordinates"));
        }
        let n = norm(&coords);
        if n == 0.0 {
            return Err(Error::invalid("cannot normalize the zero vector onto the sphere"));
        }
        if (n - 1.0).abs() <= UNIT_NORM_SLACK {
            return Ok(Self(coords));
        }
        Ok(Self(coords.into_iter().map(|c| c / n).collect()))
    }

    pub fn coords(&self) -> &[f64] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }
}

/// Exponential map at the origin: `tanh(‖x‖/2) · x/‖x‖`.
///
/// The radius is clamped to `1 − BALL_EPS` once `tanh` saturates, and
/// `exp0(0) = 0`.
pub fn exp0(x: &EuclideanVector) -> PoincarePoint {
    let r = x.norm();
    if r == 0.0 {
        return PoincarePoint(vec![0.0; x.dim()]);
    }
    let radius = (r / 2.0).tanh().min(1.0 - BALL_EPS);
    let scale = radius / r;
    PoincarePoint(x.coords().iter().map(|c| c * scale).collect())
}

/// Hyperbolic distance `arcosh(1 + 2‖a−b‖²/((1−‖a‖²)(1−‖b‖²)))`.
///
/// Evaluated through the equivalent `2·asinh(‖a−b‖/√((1−‖a‖²)(1−‖b‖²)))`,
/// which stays accurate for nearby points where `arcosh` near 1 does not.
pub fn geodesic_distance(a: &PoincarePoint, b: &PoincarePoint) -> Result<f64> {
    check_dims(a.dim(), b.dim())?;
    let s = sq_dist(a.coords(), b.coords()).sqrt() / (a.conformal_gap() * b.conformal_gap()).sqrt();
    Ok(2.0 * s.asinh())
}

/// Point at arc length `t` along the unit-speed geodesic from the origin
/// toward `p`, i.e. `p · tanh(t/2)`.
pub fn geodesic_ray(p: &IdealPoint, t: f64) -> Result<PoincarePoint> {
    if !(t.is_finite() && t >= 0.0) {
        return Err(Error::domain(format!("ray parameter must be finite and >= 0, got {t}")));
    }
    let radius = (t / 2.0).tanh();
    let coords: Vec<f64> = p.coords().iter().map(|c| c * radius).collect();
    if norm(&coords) >= 1.0 {
        return Err(Error::domain(format!(
            "ray parameter {t} is too large: the point is indistinguishable from the boundary"
        )));
    }
    Ok(PoincarePoint(coords))
}

/// Busemann function `log(‖p − z‖² / (1 − ‖z‖²))`.
pub fn busemann(p: &IdealPoint, z: &PoincarePoint) -> Result<f64> {
    check_dims(p.dim(), z.dim())?;
    Ok((sq_dist(p.coords(), z.coords()) / z.conformal_gap()).ln())
}

/// Finite-`t` approximation `d(γ_p(t), z) − t` of the Busemann function.
pub fn busemann_limit(p: &IdealPoint, z: &PoincarePoint, t: f64) -> Result<f64> {
    if t.is_nan() || t <= 0.0 {
        return Err(Error::domain(format!("limit parameter must be > 0, got {t}")));
    }
    check_dims(p.dim(), z.dim())?;
    let on_ray = geodesic_ray(p, t)?;
    // 1 − tanh²(t/2) = sech²(t/2), exact where the rounded coordinates are not
    let ray_gap = (t / 2.0).cosh().powi(-2);
    let s = sq_dist(on_ray.coords(), z.coords()).sqrt() / (ray_gap * z.conformal_gap()).sqrt();
    Ok(2.0 * s.asinh() - t)
}

/// Rescales `x` onto the sphere of radius `1 − eps` if it lies outside it.
pub fn project_to_ball(x: &EuclideanVector, eps: f64) -> Result<PoincarePoint> {
    if !(eps > 0.0 && eps <= 1e-2) {
        return Err(Error::invalid(format!("eps must lie in (0, 1e-2], got {eps}")));
    }
    let n = x.norm();
    let limit = 1.0 - eps;
    if n <= limit {
        return Ok(PoincarePoint(x.coords().to_vec()));
    }
    let scale = limit / n;
    Ok(PoincarePoint(x.coords().iter().map(|c| c * scale).collect()))
}
