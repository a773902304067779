//! Reachability, sheet coverage, manipulability and base placement.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::Vec2;
use crate::kinematics::{ik, jacobian, JointState, MechanismConfig};
use crate::svg::Canvas;

/// Legal paper, short side × long side, m.
pub const LEGAL_SHORT: f64 = 0.2159;
pub const LEGAL_LONG: f64 = 0.3556;

pub const DEFAULT_GRID_PITCH: f64 = 0.005;
/// Base offsets are searched on this pitch ...
pub const PLACEMENT_PITCH: f64 = 0.01;
/// ... over a square window of this half-width around the sheet centre.
pub const PLACEMENT_HALF_WINDOW: f64 = 0.3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Orientation {
    Portrait,
    Landscape,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sheet {
    pub width: f64,
    pub height: f64,
    pub center: Vec2,
    pub orientation: Orientation,
}

impl Sheet {
    pub fn legal(orientation: Orientation, center: Vec2) -> Self {
        let (width, height) = match orientation {
            Orientation::Portrait => (LEGAL_SHORT, LEGAL_LONG),
            Orientation::Landscape => (LEGAL_LONG, LEGAL_SHORT),
        };
        Self {
            width,
            height,
            center,
            orientation,
        }
    }

    pub fn min(&self) -> Vec2 {
        self.center - Vec2::new(self.width, self.height) / 2.0
    }

    pub fn max(&self) -> Vec2 {
        self.center + Vec2::new(self.width, self.height) / 2.0
    }

    /// Uniform grid with spacing at most `pitch`, corners first.
    pub fn sample_points(&self, pitch: f64) -> Vec<Vec2> {
        let nx = ((self.width / pitch) - 1e-9).ceil().max(1.0) as usize;
        let ny = ((self.height / pitch) - 1e-9).ceil().max(1.0) as usize;
        let (lo, hi) = (self.min(), self.max());
        let at = |i: usize, j: usize| {
            Vec2::new(
                lo.x + (hi.x - lo.x) * i as f64 / nx as f64,
                lo.y + (hi.y - lo.y) * j as f64 / ny as f64,
            )
        };
        let corners = [(0, 0), (nx, 0), (0, ny), (nx, ny)];
        let mut pts: Vec<Vec2> = corners.iter().map(|&(i, j)| at(i, j)).collect();
        for j in 0..=ny {
            for i in 0..=nx {
                if !corners.contains(&(i, j)) {
                    pts.push(at(i, j));
                }
            }
        }
        pts
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageReport {
    pub covered: bool,
    pub fraction: f64,
    /// Minimum signed distance of any sample point to the workspace boundary, m.
    pub margin: f64,
    pub grid_pitch: f64,
    #[serde(skip)]
    pub uncovered: Vec<Vec2>,
}

#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum WorkspaceError {
    #[error("no base offset in the search window covers the sheet (best margin {best_margin} m)")]
    NoFeasiblePlacement { best_margin: f64 },
    #[error("grid pitch must be positive, got {0}")]
    InvalidPitch(f64),
}

pub fn reachable(config: &MechanismConfig, point: Vec2) -> bool {
    ik(config, point).map(|s| !s.is_empty()).unwrap_or(false)
}

/// Signed distance from `point` to the admissible workspace boundary:
/// positive inside. Uses the annulus band, tightened by the arc distance to
/// the `theta1` limits when those are not the full circle.
pub fn point_margin(config: &MechanismConfig, point: Vec2) -> f64 {
    let (inner, outer) = config.reach_band();
    let r = (point - config.base).norm();
    let radial = (r - inner).min(outer - r);
    if config.theta1_range.is_full() {
        return radial;
    }
    match ik(config, point) {
        Ok(sol) => sol
            .states
            .iter()
            .chain(sol.filtered.iter())
            .map(|s| radial.min(r * config.theta1_range.inner_distance(s.theta1)))
            .fold(f64::NEG_INFINITY, f64::max),
        Err(_) => radial,
    }
}

pub fn coverage(
    config: &MechanismConfig,
    sheet: &Sheet,
    grid_pitch: f64,
) -> Result<CoverageReport, WorkspaceError> {
    if !(grid_pitch > 0.0) {
        return Err(WorkspaceError::InvalidPitch(grid_pitch));
    }
    let pts = sheet.sample_points(grid_pitch);
    let mut margin = f64::INFINITY;
    let mut uncovered = Vec::new();
    for &p in &pts {
        margin = margin.min(point_margin(config, p));
        if !reachable(config, p) {
            uncovered.push(p);
        }
    }
    let fraction = (pts.len() - uncovered.len()) as f64 / pts.len() as f64;
    Ok(CoverageReport {
        covered: uncovered.is_empty(),
        fraction,
        margin,
        grid_pitch,
        uncovered,
    })
}

/// `|det J|`, m².
pub fn manipulability(config: &MechanismConfig, state: &JointState) -> f64 {
    jacobian(config, state).determinant().abs()
}

/// Grid search over base positions relative to the sheet centre, maximising
/// the coverage margin. Ties go to the offset closest to the sheet centre.
///
/// Returns `base - sheet.center` and the coverage report at that base.
pub fn place_base(
    config: &MechanismConfig,
    sheet: &Sheet,
) -> Result<(Vec2, CoverageReport), WorkspaceError> {
    let pts = sheet.sample_points(DEFAULT_GRID_PITCH);
    let n = (PLACEMENT_HALF_WINDOW / PLACEMENT_PITCH).round() as i32;
    let mut best: Option<(f64, f64, Vec2)> = None;

    for iy in -n..=n {
        for ix in -n..=n {
            let offset = Vec2::new(ix as f64, iy as f64) * PLACEMENT_PITCH;
            let candidate = MechanismConfig {
                base: sheet.center + offset,
                ..*config
            };
            let floor = best.map_or(f64::NEG_INFINITY, |b| b.0);
            // Early exit once this placement cannot beat (or tie) the incumbent.
            let mut m = f64::INFINITY;
            for &p in &pts {
                m = m.min(point_margin(&candidate, p));
                if m < floor {
                    break;
                }
            }
            if m < floor {
                continue;
            }
            let dist = offset.norm();
            let better = match best {
                None => true,
                Some((bm, bd, _)) => m > bm || (m == bm && dist < bd),
            };
            if better {
                best = Some((m, dist, offset));
            }
        }
    }

    let (margin, _, offset) = best.expect("search window is nonempty");
    if margin < 0.0 {
        return Err(WorkspaceError::NoFeasiblePlacement {
            best_margin: margin,
        });
    }
    let placed = MechanismConfig {
        base: sheet.center + offset,
        ..*config
    };
    let report = coverage(&placed, sheet, DEFAULT_GRID_PITCH)?;
    Ok((offset, report))
}

/// Workspace map: admissible annulus, sheet outline, uncovered samples in red.
pub fn workspace_svg(config: &MechanismConfig, sheet: &Sheet, report: &CoverageReport) -> String {
    let (inner, outer) = config.reach_band();
    let reach = config.l1 + config.l2;
    let pad = Vec2::new(0.02, 0.02);
    let lo = config.base.inf(&sheet.min()).inf(&(config.base - Vec2::repeat(reach))) - pad;
    let hi = config.base.sup(&sheet.max()).sup(&(config.base + Vec2::repeat(reach))) + pad;
    let mut c = Canvas::equal(640.0, lo, hi);
    c.annulus(config.base, inner, outer, "#cfe3f7");
    c.circle(config.base, outer, "#2b6cb0", "none");
    c.circle(config.base, inner, "#2b6cb0", "none");
    c.rect(sheet.min(), sheet.max(), "#333", "none");
    for &p in &report.uncovered {
        c.dot(p, 1.5, "#d62728");
    }
    c.dot(config.base, 3.0, "black");
    c.label(
        10.0,
        20.0,
        &format!(
            "{:?} sheet: covered={} fraction={:.4} margin={:+.4} m",
            sheet.orientation, report.covered, report.fraction, report.margin
        ),
        13.0,
    );
    c.finish()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn reachable_examples() {
        let c = MechanismConfig::default();
        assert!(reachable(&c, Vec2::new(0.0, 0.49)));
        assert!(!reachable(&c, Vec2::new(0.6, 0.0)));
        assert!(!reachable(&c, Vec2::zeros()));
    }

    #[test]
    fn reach_band_closed_form() {
        let c = MechanismConfig::default();
        let (inner, outer) = c.reach_band();
        assert!((inner - 0.043_577_871_373_829_08).abs() < 1e-15);
        assert!((outer - 0.498_097_349_045_872_8).abs() < 1e-15);
    }

    #[test]
    fn coverage_portrait_mid_sheet() {
        let c = MechanismConfig::default();
        let sheet = Sheet::legal(Orientation::Portrait, Vec2::new(0.0, 0.28));
        let r = coverage(&c, &sheet, DEFAULT_GRID_PITCH).unwrap();
        assert!(r.covered);
        assert_eq!(r.fraction, 1.0);
        // Far corners set the margin.
        assert!((r.margin - 0.027_742_118_927_188_92).abs() < 1e-12, "{}", r.margin);
    }

    #[test]
    fn coverage_portrait_too_far() {
        let c = MechanismConfig::default();
        let sheet = Sheet::legal(Orientation::Portrait, Vec2::new(0.0, 0.45));
        let r = coverage(&c, &sheet, DEFAULT_GRID_PITCH).unwrap();
        assert!(!r.covered && r.fraction < 1.0 && r.margin < 0.0);
        assert!((r.margin - (0.498_097_349_045_872_8 - 0.637_013_377_018_096_9)).abs() < 1e-12);
    }

    #[test]
    fn degenerate_sheet() {
        let c = MechanismConfig::default();
        let sheet = Sheet {
            width: DEFAULT_GRID_PITCH,
            height: DEFAULT_GRID_PITCH,
            center: Vec2::new(0.1, 0.2),
            orientation: Orientation::Portrait,
        };
        let r = coverage(&c, &sheet, DEFAULT_GRID_PITCH).unwrap();
        assert!(r.covered);
        assert_eq!(r.fraction, 1.0);
    }

    #[test]
    fn sample_grid_includes_corners() {
        let sheet = Sheet::legal(Orientation::Portrait, Vec2::zeros());
        let pts = sheet.sample_points(0.005);
        assert_eq!(pts[0], sheet.min());
        assert_eq!(pts[3], sheet.max());
        assert_eq!(pts.len(), 45 * 73);
    }

    #[test]
    fn manipulability_examples() {
        let c = MechanismConfig::default();
        let at = |g: f64| manipulability(&c, &JointState::at_rest(0.3, 0.3 + g));
        assert!((at(PI / 2.0) - 0.0625).abs() < 1e-15);
        assert!(at(0.0).abs() < 1e-15);
        assert!((at(PI / 6.0) - 0.03125).abs() < 1e-15);
    }

    #[test]
    fn oversized_sheet_has_no_placement() {
        let c = MechanismConfig::default();
        let sheet = Sheet {
            width: 1.2,
            height: 0.1,
            center: Vec2::zeros(),
            orientation: Orientation::Landscape,
        };
        assert!(matches!(
            place_base(&c, &sheet),
            Err(WorkspaceError::NoFeasiblePlacement { .. })
        ));
    }

    #[test]
    fn theta1_limits_tighten_margin() {
        let c = MechanismConfig {
            theta1_range: crate::geometry::AngleRange { lo: 0.0, hi: PI / 2.0 },
            ..Default::default()
        };
        // Pen straight below the base needs theta1 < 0 on both branches.
        let p = Vec2::new(0.0, -0.3);
        assert!(!reachable(&c, p));
        assert!(point_margin(&c, p) < 0.0);
        assert!(point_margin(&MechanismConfig::default(), p) > 0.0);
    }

    #[test]
    fn svg_mentions_sheet() {
        let c = MechanismConfig::default();
        let sheet = Sheet::legal(Orientation::Portrait, Vec2::new(0.0, 0.45));
        let r = coverage(&c, &sheet, 0.02).unwrap();
        let s = workspace_svg(&c, &sheet, &r);
        assert!(s.contains("<rect") && s.contains("#d62728"));
    }
}
