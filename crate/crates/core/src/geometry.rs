//! Planar primitives shared by every module.

use std::f64::consts::{PI, TAU};

use serde::{Deserialize, Serialize};

pub type Vec2 = nalgebra::Vector2<f64>;
pub type Mat2 = nalgebra::Matrix2<f64>;

/// Wraps an angle to `(-π, π]`.
pub fn wrap_angle(a: f64) -> f64 {
    let mut w = a.rem_euclid(TAU);
    if w > PI {
        w -= TAU;
    }
    w
}

/// Unit vector at angle `a`.
#[inline]
pub fn unit(a: f64) -> Vec2 {
    Vec2::new(a.cos(), a.sin())
}

/// A planar pose. `phi` is kept in `(-π, π]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pose2 {
    pub x: f64,
    pub y: f64,
    pub phi: f64,
}

impl Pose2 {
    pub fn new(x: f64, y: f64, phi: f64) -> Self {
        Self {
            x,
            y,
            phi: wrap_angle(phi),
        }
    }

    pub fn position(&self) -> Vec2 {
        Vec2::new(self.x, self.y)
    }
}

/// Closed angle interval in radians. An interval spanning `2π` or more is the full circle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AngleRange {
    pub lo: f64,
    pub hi: f64,
}

impl AngleRange {
    pub const FULL: AngleRange = AngleRange { lo: -PI, hi: PI };

    pub fn is_full(&self) -> bool {
        self.hi - self.lo >= TAU
    }

    pub fn contains(&self, a: f64) -> bool {
        self.inner_distance(a) >= 0.0
    }

    /// Signed angular distance of `a` from the nearest end of the interval;
    /// positive inside, negative outside, `+inf` for the full circle.
    pub fn inner_distance(&self, a: f64) -> f64 {
        if self.is_full() {
            return f64::INFINITY;
        }
        let rel = (a - self.lo).rem_euclid(TAU);
        let span = self.hi - self.lo;
        if rel <= span {
            rel.min(span - rel)
        } else {
            -(rel - span).min(TAU - rel)
        }
    }
}

impl Default for AngleRange {
    fn default() -> Self {
        Self::FULL
    }
}
