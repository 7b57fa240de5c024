//! Positioner arm geometry and 2R kinematics.
//!
//! A theta-phi positioner is a planar two-link arm. The central arm (length
//! `l1`) rotates by `theta` about the positioner center; the eccentric arm
//! (length `l2`) rotates by `phi` about the tip of the central arm and carries
//! the fiber. Only the eccentric arm takes part in collision checks, so it is
//! exposed as a [`Segment`].

use std::f64::consts::{PI, TAU};
use std::ops::{Add, Mul, Sub};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Relative slack applied to reach limits so that targets generated exactly on
/// the patrol boundary are not rejected by rounding.
const REACH_EPS: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("arm lengths must be positive and finite (l1 = {l1}, l2 = {l2})")]
    NonPositiveArm { l1: f64, l2: f64 },
    #[error("arm ratio l2/l1 = {0} is below 1")]
    RatioBelowOne(f64),
    #[error("invalid safety parameter: {0}")]
    InvalidSafety(&'static str),
    #[error("target at distance {distance} is outside the patrol annulus [{min}, {max}]")]
    OutOfReach { distance: f64, min: f64, max: f64 },
    #[error("sample count must be at least 2, got {0}")]
    InvalidSampleCount(usize),
}

/// A point (or vector) in the focal plane, in millimetres.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const ORIGIN: Point = Point { x: 0.0, y: 0.0 };

    #[inline]
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    /// Unit vector at angle `alpha` from +x.
    #[inline]
    pub fn unit(alpha: f64) -> Self {
        let (s, c) = alpha.sin_cos();
        Self { x: c, y: s }
    }

    #[inline]
    pub fn dot(self, other: Point) -> f64 {
        self.x * other.x + self.y * other.y
    }

    #[inline]
    pub fn cross(self, other: Point) -> f64 {
        self.x * other.y - self.y * other.x
    }

    #[inline]
    pub fn norm_sq(self) -> f64 {
        self.x * self.x + self.y * self.y
    }

    #[inline]
    pub fn norm(self) -> f64 {
        self.norm_sq().sqrt()
    }

    #[inline]
    pub fn distance(self, other: Point) -> f64 {
        (self - other).norm()
    }

    /// Angle of the vector from +x, in (-π, π].
    #[inline]
    pub fn bearing(self) -> f64 {
        self.y.atan2(self.x)
    }
}

impl Add for Point {
    type Output = Point;
    #[inline]
    fn add(self, rhs: Point) -> Point {
        Point::new(self.x + rhs.x, self.y + rhs.y)
    }
}

impl Sub for Point {
    type Output = Point;
    #[inline]
    fn sub(self, rhs: Point) -> Point {
        Point::new(self.x - rhs.x, self.y - rhs.y)
    }
}

impl Mul<f64> for Point {
    type Output = Point;
    #[inline]
    fn mul(self, rhs: f64) -> Point {
        Point::new(self.x * rhs, self.y * rhs)
    }
}

/// Central (`l1`) and eccentric (`l2`) arm lengths in mm.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ArmGeometry {
    l1: f64,
    l2: f64,
}

impl ArmGeometry {
    pub fn new(l1: f64, l2: f64) -> Result<Self, GeometryError> {
        if !(l1.is_finite() && l2.is_finite() && l1 > 0.0 && l2 > 0.0) {
            return Err(GeometryError::NonPositiveArm { l1, l2 });
        }
        let ratio = l2 / l1;
        if ratio < 1.0 {
            return Err(GeometryError::RatioBelowOne(ratio));
        }
        Ok(Self { l1, l2 })
    }

    /// Geometry from a central arm length and an arm ratio `l2 / l1`.
    pub fn from_ratio(l1: f64, ratio: f64) -> Result<Self, GeometryError> {
        Self::new(l1, l1 * ratio)
    }

    #[inline]
    pub fn l1(&self) -> f64 {
        self.l1
    }

    #[inline]
    pub fn l2(&self) -> f64 {
        self.l2
    }

    #[inline]
    pub fn ratio(&self) -> f64 {
        self.l2 / self.l1
    }

    #[inline]
    pub fn reach_max(&self) -> f64 {
        self.l1 + self.l2
    }

    #[inline]
    pub fn reach_min(&self) -> f64 {
        (self.l2 - self.l1).abs()
    }

    /// Whether a point at `distance` from the center lies in the patrol annulus.
    ///
    /// This is the single reachability predicate shared by target allocation and
    /// inverse kinematics.
    #[inline]
    pub fn reaches(&self, distance: f64) -> bool {
        let slack = REACH_EPS * self.reach_max();
        distance >= self.reach_min() - slack && distance <= self.reach_max() + slack
    }
}

/// Safety radius, step angle and pairwise detection threshold.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SafetyModel {
    /// Radial clearance around the eccentric arm line (mm).
    pub d: f64,
    /// Per-step rotation bound (rad). Zero for static analysis.
    pub delta_theta: f64,
    /// Two arms collide when their distance is below this value (mm).
    pub threshold: f64,
}

impl Default for SafetyModel {
    fn default() -> Self {
        Self {
            d: 4.5,
            delta_theta: 0.0,
            threshold: 4.5,
        }
    }
}

impl SafetyModel {
    pub fn new(d: f64, delta_theta: f64, threshold: f64) -> Result<Self, GeometryError> {
        if !(d.is_finite() && d >= 0.0) {
            return Err(GeometryError::InvalidSafety("d must be finite and >= 0"));
        }
        if !(delta_theta.is_finite() && (0.0..=PI / 4.0).contains(&delta_theta)) {
            return Err(GeometryError::InvalidSafety(
                "delta_theta must lie in [0, pi/4]",
            ));
        }
        if !(threshold.is_finite() && threshold >= 0.0) {
            return Err(GeometryError::InvalidSafety(
                "threshold must be finite and >= 0",
            ));
        }
        Ok(Self {
            d,
            delta_theta,
            threshold,
        })
    }

    /// Static model: zero step angle.
    pub fn fixed(d: f64, threshold: f64) -> Result<Self, GeometryError> {
        Self::new(d, 0.0, threshold)
    }
}

/// Joint angles, both normalized to `[0, 2π)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pose {
    theta: f64,
    phi: f64,
}

impl Pose {
    pub fn new(theta: f64, phi: f64) -> Self {
        Self {
            theta: normalize_angle(theta),
            phi: normalize_angle(phi),
        }
    }

    #[inline]
    pub fn theta(&self) -> f64 {
        self.theta
    }

    #[inline]
    pub fn phi(&self) -> f64 {
        self.phi
    }
}

/// Wraps an angle into `[0, 2π)`.
pub fn normalize_angle(alpha: f64) -> f64 {
    let a = alpha.rem_euclid(TAU);
    // rem_euclid can round up to exactly TAU for tiny negative inputs
    if a >= TAU {
        0.0
    } else {
        a
    }
}

/// Inverse kinematics branch. `Right` takes `phi` in `[0, π]`, `Left` takes
/// the mirrored solution.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum Elbow {
    Left,
    #[default]
    Right,
}

impl std::str::FromStr for Elbow {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "left" => Ok(Elbow::Left),
            "right" => Ok(Elbow::Right),
            other => Err(format!("unknown elbow '{other}' (expected left|right)")),
        }
    }
}

impl std::fmt::Display for Elbow {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Elbow::Left => "left",
            Elbow::Right => "right",
        })
    }
}

/// Closed straight segment; `a == b` is a point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub a: Point,
    pub b: Point,
}

impl Segment {
    #[inline]
    pub const fn new(a: Point, b: Point) -> Self {
        Self { a, b }
    }

    #[inline]
    pub fn length(&self) -> f64 {
        self.a.distance(self.b)
    }

    #[inline]
    pub fn midpoint(&self) -> Point {
        Point::new(0.5 * (self.a.x + self.b.x), 0.5 * (self.a.y + self.b.y))
    }
}

/// Elbow joint position (tip of the central arm).
#[inline]
pub fn elbow_point(geom: &ArmGeometry, center: Point, pose: Pose) -> Point {
    center + Point::unit(pose.theta) * geom.l1
}

/// Fiber tip position for `pose`.
#[inline]
pub fn forward_kinematics(geom: &ArmGeometry, center: Point, pose: Pose) -> Point {
    elbow_point(geom, center, pose) + Point::unit(pose.theta + pose.phi) * geom.l2
}

/// Joint angles that put the fiber tip on `target`.
///
/// When equal arms fold onto their own center `theta` is indeterminate and is
/// fixed to 0.
pub fn inverse_kinematics(
    geom: &ArmGeometry,
    center: Point,
    target: Point,
    elbow: Elbow,
) -> Result<Pose, GeometryError> {
    let rel = target - center;
    let r = rel.norm();
    if !geom.reaches(r) {
        return Err(GeometryError::OutOfReach {
            distance: r,
            min: geom.reach_min(),
            max: geom.reach_max(),
        });
    }
    let (l1, l2) = (geom.l1, geom.l2);
    if r <= REACH_EPS * geom.reach_max() {
        // only reachable for equal arms: folded singularity
        return Ok(Pose::new(0.0, PI));
    }
    let cos_phi = (r * r - l1 * l1 - l2 * l2) / (2.0 * l1 * l2);
    // acos is ill-conditioned at +-1; snap the fully extended / folded cases
    let interior = if cos_phi >= 1.0 - 4.0 * f64::EPSILON {
        0.0
    } else if cos_phi <= -1.0 + 4.0 * f64::EPSILON {
        PI
    } else {
        cos_phi.acos()
    };
    let phi = match elbow {
        Elbow::Right => interior,
        Elbow::Left => -interior,
    };
    let theta = rel.bearing() - (l2 * phi.sin()).atan2(l1 + l2 * phi.cos());
    Ok(Pose::new(theta, phi))
}

/// The eccentric arm as a segment from the elbow to the fiber tip.
#[inline]
pub fn eccentric_arm_segment(geom: &ArmGeometry, center: Point, pose: Pose) -> Segment {
    let elbow = elbow_point(geom, center, pose);
    let tip = elbow + Point::unit(pose.theta + pose.phi) * geom.l2;
    Segment::new(elbow, tip)
}

/// Largest displacement of the eccentric arm during one step:
/// `(l1 + l2) * sin(2 * delta_theta)`.
pub fn max_displacement(geom: &ArmGeometry, safety: &SafetyModel) -> f64 {
    if safety.delta_theta == 0.0 {
        return 0.0;
    }
    geom.reach_max() * (2.0 * safety.delta_theta).sin()
}

/// Lower bound on pairwise arm distance: `max_displacement + 2d`.
///
/// This is a helper only; collision detection always uses
/// [`SafetyModel::threshold`].
pub fn min_safe_distance(geom: &ArmGeometry, safety: &SafetyModel) -> f64 {
    max_displacement(geom, safety) + 2.0 * safety.d
}
