//! Three-bar handle adjustment (K1, K2, K3) between pen holder and handle.
//!
//! Each adjustment is a revolute setting locked by a screw, so the mount is a
//! static planar 3R chain. Dynamics treats it as rigidly lumped with the end
//! effector.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{unit, wrap_angle, Pose2, Vec2};
use crate::InvalidParam;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MountConfig {
    pub k1: f64,
    pub k2: f64,
    pub k3: f64,
}

impl Default for MountConfig {
    fn default() -> Self {
        Self {
            k1: 0.040,
            k2: 0.030,
            k3: 0.020,
        }
    }
}

impl MountConfig {
    pub fn validate(&self) -> Result<(), InvalidParam> {
        for (name, v) in [("k1", self.k1), ("k2", self.k2), ("k3", self.k3)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(InvalidParam::new(name, "must be a positive length"));
            }
        }
        Ok(())
    }
}

/// Screw settings of the three adjustments, rad.
pub type MountAngles = [f64; 3];

#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum MountError {
    #[error("wrist point at {distance} m is outside [{min}, {max}] m")]
    Unreachable { distance: f64, min: f64, max: f64 },
}

pub fn mount_fk(mount: &MountConfig, angles: MountAngles) -> Pose2 {
    let [a1, a2, a3] = angles;
    let p = mount.k1 * unit(a1) + mount.k2 * unit(a1 + a2) + mount.k3 * unit(a1 + a2 + a3);
    Pose2::new(p.x, p.y, a1 + a2 + a3)
}

/// All settings placing the handle at `target`; elbow branch with `a2 > 0` first.
pub fn mount_ik(mount: &MountConfig, target: Pose2) -> Result<Vec<MountAngles>, MountError> {
    let wrist = target.position() - mount.k3 * unit(target.phi);
    let r = wrist.norm();
    let (k1, k2) = (mount.k1, mount.k2);
    let (min, max) = ((k1 - k2).abs(), k1 + k2);
    let slack = 8.0 * f64::EPSILON * max;
    if !(r <= max + slack && r >= min - slack) {
        return Err(MountError::Unreachable {
            distance: r,
            min,
            max,
        });
    }
    let c2 = ((r * r - k1 * k1 - k2 * k2) / (2.0 * k1 * k2)).clamp(-1.0, 1.0);
    // acos amplifies rounding near ±1; snap so a stretched or folded chain has one branch.
    let c2 = if 1.0 - c2.abs() < 16.0 * f64::EPSILON { c2.signum() } else { c2 };
    let a2 = c2.acos();
    let heading = wrist.y.atan2(wrist.x);
    let solve = |a2: f64| {
        let a1 = wrap_angle(heading - (k2 * a2.sin()).atan2(k1 + k2 * a2.cos()));
        [a1, a2, wrap_angle(target.phi - a1 - a2)]
    };
    let mut out = vec![solve(a2)];
    if c2.abs() < 1.0 {
        out.push(solve(-a2));
    }
    Ok(out)
}

pub fn screw_settings_deg(angles: &MountAngles) -> [f64; 3] {
    angles.map(f64::to_degrees)
}

pub fn wrist_point(mount: &MountConfig, target: &Pose2) -> Vec2 {
    target.position() - mount.k3 * unit(target.phi)
}
