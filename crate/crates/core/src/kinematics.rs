//! Forward/inverse kinematics of the 2-DoF table linkage.
//!
//! Generalized coordinates are the *absolute* link angles `theta1` (link 1,
//! J1 → J2) and `psi2` (link 2, J2 → pen), both measured from the base x-axis.
//! Variant C drives both of them from the base through its third
//! parallelogram, so each damper sees a single coordinate rate.
//!
//! The parallelograms of variants B and C are not modelled as extra bodies.
//! Their only kinematic effect is the constant end-effector orientation,
//! which `fk` reports as `phi = 0`.

use std::f64::consts::FRAC_PI_2;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{unit, wrap_angle, AngleRange, Mat2, Pose2, Vec2};
use crate::InvalidParam;

/// Mechanism variants, in increasing order of complexity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Variant {
    /// Bare two-bar chain; the handle turns with the distal link.
    A,
    /// Two parallelograms keep the end effector's orientation fixed.
    B,
    /// A third parallelogram moves the second joint's actuation to the base.
    C,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MechanismConfig {
    pub variant: Variant,
    /// Link J1 → J2, m.
    pub l1: f64,
    /// Link J2 → pen, m.
    pub l2: f64,
    /// Position of J1 on the table, m.
    pub base: Vec2,
    /// Minimum separation of the link directions from alignment, rad.
    pub joint_clearance_delta: f64,
    pub theta1_range: AngleRange,
}

impl Default for MechanismConfig {
    fn default() -> Self {
        Self {
            variant: Variant::C,
            l1: 0.25,
            l2: 0.25,
            base: Vec2::zeros(),
            joint_clearance_delta: 10f64.to_radians(),
            theta1_range: AngleRange::FULL,
        }
    }
}

impl MechanismConfig {
    pub fn with_variant(variant: Variant) -> Self {
        Self {
            variant,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), InvalidParam> {
        if !(self.l1.is_finite() && self.l1 > 0.0) {
            return Err(InvalidParam::new("l1", "must be a positive length"));
        }
        if !(self.l2.is_finite() && self.l2 > 0.0) {
            return Err(InvalidParam::new("l2", "must be a positive length"));
        }
        if !(self.base.x.is_finite() && self.base.y.is_finite()) {
            return Err(InvalidParam::new("base", "must be finite"));
        }
        let d = self.joint_clearance_delta;
        if !(d > 0.0 && d < FRAC_PI_2) {
            return Err(InvalidParam::new(
                "joint_clearance_delta",
                "must lie in (0, pi/2)",
            ));
        }
        let r = self.theta1_range;
        if !(r.lo.is_finite() && r.hi.is_finite() && r.lo < r.hi) {
            return Err(InvalidParam::new("theta1_range", "needs finite lo < hi"));
        }
        Ok(())
    }

    /// Radial band `[inner, outer]` of admissible pen distances from the base.
    ///
    /// `|gamma|` ranges over `[delta, pi - delta]`, and the pen distance is
    /// monotone in `|gamma|`, so the band ends are reached at those limits.
    pub fn reach_band(&self) -> (f64, f64) {
        let (l1, l2, d) = (self.l1, self.l2, self.joint_clearance_delta);
        let radius = |cos_gamma: f64| (l1 * l1 + l2 * l2 + 2.0 * l1 * l2 * cos_gamma).max(0.0).sqrt();
        (radius(-d.cos()), radius(d.cos()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct JointState {
    pub theta1: f64,
    pub psi2: f64,
    pub omega1: f64,
    pub omega2: f64,
}

impl JointState {
    pub fn at_rest(theta1: f64, psi2: f64) -> Self {
        Self {
            theta1,
            psi2,
            omega1: 0.0,
            omega2: 0.0,
        }
    }

    /// Relative angle `psi2 - theta1`, wrapped to `(-π, π]`.
    pub fn gamma(&self) -> f64 {
        wrap_angle(self.psi2 - self.theta1)
    }

    pub fn is_admissible(&self, config: &MechanismConfig) -> bool {
        let g = self.gamma().abs();
        let d = config.joint_clearance_delta;
        g >= d && g <= std::f64::consts::PI - d && config.theta1_range.contains(self.theta1)
    }

    pub fn is_finite(&self) -> bool {
        self.theta1.is_finite()
            && self.psi2.is_finite()
            && self.omega1.is_finite()
            && self.omega2.is_finite()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum KinematicsError {
    #[error("target at distance {distance} m is outside the reach annulus [{min}, {max}] m")]
    OutOfReach { distance: f64, min: f64, max: f64 },
}

/// Result of [`ik`]: admissible states first, then the geometric solutions
/// rejected by the joint limits.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct IkSolutions {
    pub states: Vec<JointState>,
    pub filtered: Vec<JointState>,
}

impl IkSolutions {
    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn first(&self) -> Option<&JointState> {
        self.states.first()
    }
}

/// Pen position only.
pub fn pen_position(config: &MechanismConfig, state: &JointState) -> Vec2 {
    config.base + config.l1 * unit(state.theta1) + config.l2 * unit(state.psi2)
}

/// Position of the intermediate joint J2.
pub fn elbow_position(config: &MechanismConfig, state: &JointState) -> Vec2 {
    config.base + config.l1 * unit(state.theta1)
}

pub fn fk(config: &MechanismConfig, state: &JointState) -> Pose2 {
    let p = pen_position(config, state);
    let phi = match config.variant {
        Variant::A => state.psi2,
        Variant::B | Variant::C => 0.0,
    };
    Pose2::new(p.x, p.y, phi)
}

pub fn ik(config: &MechanismConfig, target: Vec2) -> Result<IkSolutions, KinematicsError> {
    let (l1, l2) = (config.l1, config.l2);
    let rel = target - config.base;
    let r = rel.norm();
    let (min, max) = ((l1 - l2).abs(), l1 + l2);
    // A few ulps of slack so boundary targets built from fk still solve.
    let slack = 8.0 * f64::EPSILON * max;
    if !(r <= max + slack && r >= min - slack) {
        return Err(KinematicsError::OutOfReach {
            distance: r,
            min,
            max,
        });
    }
    let cos_gamma = ((r * r - l1 * l1 - l2 * l2) / (2.0 * l1 * l2)).clamp(-1.0, 1.0);
    let gamma = cos_gamma.acos();
    let heading = rel.y.atan2(rel.x);

    let branch = |g: f64| {
        let theta1 = heading - (l2 * g.sin()).atan2(l1 + l2 * g.cos());
        JointState::at_rest(wrap_angle(theta1), wrap_angle(theta1 + g))
    };

    let mut candidates = vec![branch(gamma)];
    // Branches coincide at full extension and full fold.
    if gamma > 1e-12 && gamma < std::f64::consts::PI - 1e-12 {
        candidates.push(branch(-gamma));
    }

    let mut out = IkSolutions::default();
    for s in candidates {
        if s.is_admissible(config) {
            out.states.push(s);
        } else {
            out.filtered.push(s);
        }
    }
    Ok(out)
}

/// `d(pen)/d(theta1, psi2)`.
pub fn jacobian(config: &MechanismConfig, state: &JointState) -> Mat2 {
    let (s1, c1) = state.theta1.sin_cos();
    let (s2, c2) = state.psi2.sin_cos();
    Mat2::new(
        -config.l1 * s1,
        -config.l2 * s2,
        config.l1 * c1,
        config.l2 * c2,
    )
}
