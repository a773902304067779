//! Digital twin of a passive two-degree-of-freedom handwriting-assistance
//! linkage: a table-mounted arm whose parallelograms keep the pen holder's
//! orientation fixed while rotary dampers and link inertia filter the
//! writer's tremor.
//!
//! The crate covers linkage kinematics and workspace coverage, damped
//! dynamics under a hand-impedance coupling, tremor/intent signal
//! generation, frequency-response metrics, damper optimisation, the
//! screw-driven pen gripper, the three-bar handle mount, and a
//! deterministic live-session stepper for interactive front ends.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod dynamics;
pub mod geometry;
pub mod handlemount;
pub mod kinematics;
pub mod metrics;
pub mod optimize;
pub mod penholder;
pub mod session;
pub mod signals;
pub mod svg;
pub mod workspace;

pub use geometry::{Mat2, Pose2, Vec2};

/// A parameter that failed validation. `field` is relative to the owning struct.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("{field}: {reason}")]
pub struct InvalidParam {
    pub field: String,
    pub reason: String,
}

impl InvalidParam {
    pub fn new(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Self {
            field: field.into(),
            reason: reason.into(),
        }
    }

    /// Prefix the field path with the owning struct's name, e.g. `mechanism.l1`.
    pub fn within(mut self, parent: &str) -> Self {
        self.field = format!("{parent}.{}", self.field);
        self
    }
}
