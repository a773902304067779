//! Screw-actuated two-finger pen gripper.
//!
//! Symmetric slider-crank per finger, in millimetres. For the right finger,
//! with finger angle `alpha` measured from vertical:
//!
//! ```text
//! pivot       P = (w, 0)
//! attachment  A = (w - a sin α, -a cos α)
//! nut         n = (0, -(h0 + s))
//! fingertip   T = (w - f sin α, -f cos α)
//! |A - n| = c,   aperture = 2 (w - f sin α)
//! ```
//!
//! The nut is kept below the attachment point. Contact is idealised as the
//! two fingertips touching the pen at opposite ends of a diameter.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::Vec2;
use crate::svg::Canvas;
use crate::InvalidParam;

const ANGLE_TOL: f64 = 1e-9;
const DIAMETER_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GripperGeometry {
    /// Half-distance between the proximal pivots.
    pub w: f64,
    /// Pivot to coupler attachment.
    pub a: f64,
    /// Coupler length.
    pub c: f64,
    /// Pivot to fingertip.
    pub f: f64,
    /// Nut depth below the pivot line at zero travel.
    pub h0: f64,
    pub s_max: f64,
    /// Screw lead, mm per turn.
    pub pitch: f64,
    pub d_min: f64,
    pub d_max: f64,
}

impl Default for GripperGeometry {
    fn default() -> Self {
        Self {
            w: 18.0,
            a: 18.0,
            c: 16.0,
            f: 35.0,
            h0: 10.0,
            s_max: 25.0,
            pitch: 1.0,
            d_min: 8.0,
            d_max: 20.0,
        }
    }
}

/// Torsion spring that reopens the fingers when the screw is backed off.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SpringSpec {
    /// N·mm/rad.
    pub kappa: f64,
    /// rad.
    pub preload: f64,
    /// Opening torque needed to overcome joint friction, N·mm.
    pub tau_friction: f64,
}

impl Default for SpringSpec {
    fn default() -> Self {
        Self {
            kappa: 5.0,
            preload: 0.2,
            tau_friction: 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum PenholderError {
    #[error("linkage cannot close at travel {s} mm (feasible {lo}..{hi} mm)")]
    LinkageLocked { s: f64, lo: f64, hi: f64 },
    #[error("travel {s} mm outside [0, {s_max}] mm")]
    TravelOutOfRange { s: f64, s_max: f64 },
    #[error("pen diameter {d} mm outside the supported {min}..{max} mm")]
    DiameterOutOfRange { d: f64, min: f64, max: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ScrewSetting {
    pub diameter: f64,
    /// Nut travel, mm.
    pub travel: f64,
    pub turns: f64,
    /// Finger angle at grip, rad.
    pub alpha: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SpringCheck {
    pub opens: bool,
    /// Opening torque minus friction, N·mm.
    pub margin: f64,
}

/// Joint positions of the right finger at one pose.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FingerPose {
    pub alpha: f64,
    pub pivot: Vec2,
    pub attachment: Vec2,
    pub nut: Vec2,
    pub tip: Vec2,
}

impl GripperGeometry {
    /// Nut depth `h0 + s` that puts the finger at `alpha`.
    fn nut_depth(&self, alpha: f64) -> f64 {
        let dx = self.w - self.a * alpha.sin();
        self.a * alpha.cos() + (self.c * self.c - dx * dx).max(0.0).sqrt()
    }

    /// Finger angles spanned by the mechanism: from the first angle at which
    /// the coupler reaches the centreline to fingertips touching.
    pub fn alpha_bracket(&self) -> (f64, f64) {
        let lo = if self.w > self.c {
            ((self.w - self.c) / self.a).min(1.0).asin()
        } else {
            0.0
        };
        let close = (self.w / self.f).min(1.0).asin();
        let reach = ((self.w + self.c) / self.a).min(1.0).asin();
        (lo, close.min(reach))
    }

    /// Screw travel range over which the linkage has a solution, clipped to `[0, s_max]`.
    pub fn feasible_travel(&self) -> (f64, f64) {
        let (lo, hi) = self.alpha_bracket();
        (
            (self.nut_depth(lo) - self.h0).max(0.0),
            (self.nut_depth(hi) - self.h0).min(self.s_max),
        )
    }

    pub fn pose(&self, alpha: f64) -> FingerPose {
        let (s, c) = alpha.sin_cos();
        FingerPose {
            alpha,
            pivot: Vec2::new(self.w, 0.0),
            attachment: Vec2::new(self.w - self.a * s, -self.a * c),
            nut: Vec2::new(0.0, -self.nut_depth(alpha)),
            tip: Vec2::new(self.w - self.f * s, -self.f * c),
        }
    }

    pub fn validate(&self) -> Result<(), InvalidParam> {
        for (name, v) in [
            ("w", self.w),
            ("a", self.a),
            ("c", self.c),
            ("f", self.f),
            ("h0", self.h0),
            ("s_max", self.s_max),
            ("pitch", self.pitch),
            ("d_min", self.d_min),
            ("d_max", self.d_max),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(InvalidParam::new(name, "must be a positive length"));
            }
        }
        if self.d_min >= self.d_max {
            return Err(InvalidParam::new("d_min", "must be below d_max"));
        }
        if self.w - self.c > self.a {
            return Err(InvalidParam::new("c", "coupler too short to reach the nut"));
        }
        let (lo, hi) = self.alpha_bracket();
        if !(hi > lo) {
            return Err(InvalidParam::new("f", "finger range is empty"));
        }
        // Travel must move the fingers one way only.
        let n = 2000;
        let mut prev = self.nut_depth(lo);
        for i in 1..=n {
            let d = self.nut_depth(lo + (hi - lo) * i as f64 / n as f64);
            if d <= prev {
                return Err(InvalidParam::new("a", "nut travel is not monotone in finger angle"));
            }
            prev = d;
        }
        let (s_lo, s_hi) = self.feasible_travel();
        let widest = aperture(self, s_lo).map_err(|_| InvalidParam::new("h0", "no feasible travel"))?;
        let narrowest = aperture(self, s_hi).map_err(|_| InvalidParam::new("h0", "no feasible travel"))?;
        if widest < self.d_max || narrowest > self.d_min {
            return Err(InvalidParam::new(
                "d_max",
                format!(
                    "aperture range {narrowest:.3}..{widest:.3} mm does not cover {}..{} mm",
                    self.d_min, self.d_max
                ),
            ));
        }
        Ok(())
    }
}

/// Finger angle at screw travel `s`, by bisection.
pub fn finger_angle(geom: &GripperGeometry, s: f64) -> Result<f64, PenholderError> {
    if !(0.0..=geom.s_max).contains(&s) {
        return Err(PenholderError::TravelOutOfRange { s, s_max: geom.s_max });
    }
    let depth = geom.h0 + s;
    // Positive while the nut sits deeper than the linkage at `alpha` allows,
    // i.e. the finger must close further. Bounds the coupler-length residual.
    let residual = |alpha: f64| depth - geom.nut_depth(alpha);
    let (mut lo, mut hi) = geom.alpha_bracket();
    let (r_lo, r_hi) = (residual(lo), residual(hi));
    if r_lo < -ANGLE_TOL || r_hi > ANGLE_TOL {
        let (flo, fhi) = geom.feasible_travel();
        return Err(PenholderError::LinkageLocked { s, lo: flo, hi: fhi });
    }
    if r_lo.abs() < ANGLE_TOL {
        return Ok(lo);
    }
    if r_hi.abs() < ANGLE_TOL {
        return Ok(hi);
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let r = residual(mid);
        if r.abs() < ANGLE_TOL {
            return Ok(mid);
        }
        if r > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Fingertip separation at travel `s`, mm.
pub fn aperture(geom: &GripperGeometry, s: f64) -> Result<f64, PenholderError> {
    let alpha = finger_angle(geom, s)?;
    Ok(2.0 * (geom.w - geom.f * alpha.sin()))
}

/// Screw travel that closes the fingers on a pen of diameter `d`.
pub fn solve_screw(geom: &GripperGeometry, d: f64) -> Result<ScrewSetting, PenholderError> {
    if !(d >= geom.d_min && d <= geom.d_max) {
        return Err(PenholderError::DiameterOutOfRange {
            d,
            min: geom.d_min,
            max: geom.d_max,
        });
    }
    let (mut lo, mut hi) = geom.feasible_travel();
    let err = |s: f64| aperture(geom, s).map(|ap| ap - d);
    let (e_lo, e_hi) = (err(lo)?, err(hi)?);
    if e_lo < -DIAMETER_TOL || e_hi > DIAMETER_TOL {
        return Err(PenholderError::LinkageLocked { s: f64::NAN, lo, hi });
    }
    let mut s = if e_lo.abs() < DIAMETER_TOL {
        lo
    } else if e_hi.abs() < DIAMETER_TOL {
        hi
    } else {
        loop {
            let mid = 0.5 * (lo + hi);
            let e = err(mid)?;
            if e.abs() < DIAMETER_TOL || hi - lo < 1e-13 {
                break mid;
            }
            // Aperture falls as travel grows.
            if e > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
    };
    if s < 0.0 {
        s = 0.0;
    }
    Ok(ScrewSetting {
        diameter: d,
        travel: s,
        turns: s / geom.pitch,
        alpha: finger_angle(geom, s)?,
    })
}

pub fn check_spring_open(
    geom: &GripperGeometry,
    spring: &SpringSpec,
    d: f64,
) -> Result<SpringCheck, PenholderError> {
    let alpha = solve_screw(geom, d)?.alpha;
    Ok(spring_margin(spring, alpha))
}

/// Opening torque `kappa (alpha + preload)` against friction.
pub fn spring_margin(spring: &SpringSpec, alpha: f64) -> SpringCheck {
    let margin = spring.kappa * (alpha + spring.preload) - spring.tau_friction;
    SpringCheck {
        opens: margin >= 0.0,
        margin,
    }
}

/// `(d, s, turns)` rows, one per millimetre of pen diameter.
pub fn travel_table(geom: &GripperGeometry) -> Result<Vec<ScrewSetting>, PenholderError> {
    let first = geom.d_min.ceil() as i64;
    let last = geom.d_max.floor() as i64;
    let mut ds: Vec<f64> = (first..=last).map(|d| d as f64).collect();
    if ds.first() != Some(&geom.d_min) {
        ds.insert(0, geom.d_min);
    }
    if ds.last() != Some(&geom.d_max) {
        ds.push(geom.d_max);
    }
    ds.into_iter().map(|d| solve_screw(geom, d)).collect()
}

pub fn travel_table_text(rows: &[ScrewSetting]) -> String {
    let mut out = String::from("diameter_mm  travel_mm  turns\n");
    for r in rows {
        let _ = writeln!(out, "{:>11.2}  {:>9.4}  {:>5.2}", r.diameter, r.travel, r.turns);
    }
    out
}

/// Both fingers at the widest, middle and narrowest supported diameters.
pub fn linkage_svg(geom: &GripperGeometry) -> Result<String, PenholderError> {
    let ds = [geom.d_max, 0.5 * (geom.d_min + geom.d_max), geom.d_min];
    let spacing = 3.0 * geom.w + geom.f;
    let lo = Vec2::new(-geom.w - 10.0, -geom.f.max(geom.h0 + geom.s_max) - 10.0);
    let hi = Vec2::new(spacing * 2.0 + geom.w + 10.0, 15.0);
    let mut c = Canvas::equal(900.0, lo, hi);
    for (k, &d) in ds.iter().enumerate() {
        let setting = solve_screw(geom, d)?;
        let p = geom.pose(setting.alpha);
        let shift = Vec2::new(k as f64 * spacing, 0.0);
        let mirror = |v: Vec2| Vec2::new(-v.x, v.y);
        for m in [false, true] {
            let tf = |v: Vec2| if m { mirror(v) } else { v } + shift;
            c.line(tf(p.pivot), tf(p.tip), "#333", 3.0);
            c.line(tf(p.attachment), tf(p.nut), "#2b6cb0", 2.0);
            c.dot(tf(p.pivot), 3.0, "black");
        }
        c.line(shift + Vec2::new(0.0, 5.0), shift + p.nut, "#999", 4.0);
        c.rect(shift + p.nut - Vec2::new(3.0, 2.0), shift + p.nut + Vec2::new(3.0, 2.0), "#555", "#bbb");
        let tip_y = p.tip.y;
        c.circle(shift + Vec2::new(0.0, tip_y), d / 2.0, "#d62728", "none");
        c.text(
            shift + Vec2::new(-geom.w, 8.0),
            &format!("d={d:.1} mm s={:.2} mm", setting.travel),
            12.0,
        );
    }
    Ok(c.finish())
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Independent closed form: invert aperture for alpha, then the nut depth.
    fn travel_oracle(g: &GripperGeometry, d: f64) -> f64 {
        let alpha = ((g.w - d / 2.0) / g.f).asin();
        let dx = g.w - g.a * alpha.sin();
        g.a * alpha.cos() + (g.c * g.c - dx * dx).sqrt() - g.h0
    }

    #[test]
    fn default_geometry_is_valid() {
        GripperGeometry::default().validate().unwrap();
        let (lo, hi) = GripperGeometry::default().feasible_travel();
        assert!((lo - 7.888_543_819_998_318).abs() < 1e-9);
        assert!((hi - 18.837_231_857_036_25).abs() < 1e-9);
    }

    #[test]
    fn fully_open_when_fingers_vertical() {
        let g = GripperGeometry {
            c: 20.0,
            ..Default::default()
        };
        let s0 = 16.717_797_887_081_346;
        assert!((aperture(&g, s0).unwrap() - 36.0).abs() < 1e-6);
    }

    #[test]
    fn supported_range_solves() {
        let g = GripperGeometry::default();
        for (d, expect) in [
            (8.0, 18.302_356_152_539_99),
            (14.0, 17.268_966_781_463_51),
            (20.0, 15.472_509_856_284_873),
        ] {
            let s = solve_screw(&g, d).unwrap();
            assert!((aperture(&g, s.travel).unwrap() - d).abs() < 1e-6);
            assert!((s.travel - expect).abs() < 1e-5, "{d}: {} vs {expect}", s.travel);
            assert!((s.travel - travel_oracle(&g, d)).abs() < 1e-5);
            assert_eq!(s.turns, s.travel / g.pitch);
        }
    }

    #[test]
    fn out_of_range_diameters_rejected() {
        let g = GripperGeometry::default();
        assert!(matches!(
            solve_screw(&g, 25.0),
            Err(PenholderError::DiameterOutOfRange { .. })
        ));
        assert!(matches!(
            solve_screw(&g, 7.9),
            Err(PenholderError::DiameterOutOfRange { .. })
        ));
    }

    #[test]
    fn locked_and_out_of_range_travel() {
        let g = GripperGeometry::default();
        assert!(matches!(aperture(&g, 2.0), Err(PenholderError::LinkageLocked { .. })));
        assert!(matches!(aperture(&g, 24.0), Err(PenholderError::LinkageLocked { .. })));
        assert!(matches!(aperture(&g, -1.0), Err(PenholderError::TravelOutOfRange { .. })));
    }

    #[test]
    fn aperture_strictly_decreasing_over_feasible_travel() {
        let g = GripperGeometry::default();
        let (lo, hi) = g.feasible_travel();
        let n = ((hi - lo) / 0.01).floor() as usize;
        let mut prev = aperture(&g, lo).unwrap();
        for i in 1..=n {
            let ap = aperture(&g, lo + i as f64 * 0.01).unwrap();
            assert!(ap < prev);
            prev = ap;
        }
    }

    #[test]
    fn fixed_point_at_feasible_start() {
        let mut g = GripperGeometry::default();
        let (lo, _) = g.feasible_travel();
        let d = aperture(&g, lo).unwrap();
        g.d_max = d;
        let s = solve_screw(&g, d).unwrap();
        assert!((s.travel - lo).abs() < 1e-6);
    }

    #[test]
    fn spring_examples() {
        let zero = SpringSpec {
            kappa: 0.0,
            ..Default::default()
        };
        assert!(!spring_margin(&zero, 0.3).opens);
        let s = SpringSpec {
            kappa: 5.0,
            preload: 0.2,
            tau_friction: 1.0,
        };
        let chk = spring_margin(&s, 0.3);
        assert!(chk.opens && (chk.margin - 1.5).abs() < 1e-12);
        let stiffer = SpringSpec { kappa: 6.0, ..s };
        assert!(spring_margin(&stiffer, 0.3).margin > chk.margin);
        let g = GripperGeometry::default();
        assert!(check_spring_open(&g, &SpringSpec::default(), 14.0).unwrap().opens);
    }

    #[test]
    fn validation_rejects_short_range() {
        let g = GripperGeometry {
            d_max: 30.0,
            ..Default::default()
        };
        assert_eq!(g.validate().unwrap_err().field, "d_max");
        let g = GripperGeometry {
            f: 22.0,
            ..Default::default()
        };
        assert!(g.validate().is_err());
    }

    #[test]
    fn table_and_svg() {
        let g = GripperGeometry::default();
        let rows = travel_table(&g).unwrap();
        assert_eq!(rows.len(), 13);
        assert!(rows.windows(2).all(|w| w[1].travel < w[0].travel));
        assert!(travel_table_text(&rows).lines().count() == 14);
        assert!(linkage_svg(&g).unwrap().contains("d=20.0 mm"));
    }
}
