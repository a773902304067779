//! Browser bindings: a damped stroke, a transmissibility sweep and a gripper
//! pose. Each returns a JSON string for the page script to draw.

use serde::Serialize;
use wasm_bindgen::prelude::*;

use gripscribe::dynamics::{DynamicParams, HandImpedance};
use gripscribe::kinematics::MechanismConfig;
use gripscribe::metrics::{
    frequency_sweep, path_rmse, simulate_scenario, target_rmse, DriveSettings,
    TransmissibilityPoint, DEFAULT_SWEEP_FREQS,
};
use gripscribe::penholder::{aperture, solve_screw, GripperGeometry};
use gripscribe::signals::{intent_path, IntentPath, TremorSpec};
use gripscribe::Vec2;

/// Points kept per drawn polyline.
const PLOT_POINTS: usize = 600;
const SETTLE: f64 = 1.0;

#[derive(Debug, Serialize)]
pub struct Stroke {
    pub intent: Vec<[f64; 2]>,
    pub raw: Vec<[f64; 2]>,
    pub pen: Vec<[f64; 2]>,
    pub pen_rmse_mm: f64,
    pub raw_rmse_mm: f64,
}

fn intent_named(name: &str) -> Result<IntentPath, String> {
    let c = Vec2::new(0.0, 0.28);
    Ok(match name {
        "line" => IntentPath::default(),
        "circle" => IntentPath::circle(c, 0.04, 0.04),
        "lissajous" => IntentPath::lissajous(c, Vec2::new(0.04, 0.03), [0.2, 0.4]),
        other => return Err(format!("unknown intent {other:?}")),
    })
}

/// Both dampers set to `b` (N·m·s/rad), sinusoidal tremor of `tremor_mm` at `tremor_hz`.
pub fn stroke(b: f64, tremor_mm: f64, tremor_hz: f64, intent: &str) -> Result<Stroke, String> {
    let intent = intent_named(intent)?;
    let params = DynamicParams::default().with_dampers(b, b);
    params.validate().map_err(|e| e.to_string())?;
    let tremor = TremorSpec::sinusoid(tremor_mm * 1e-3, tremor_hz);
    tremor.validate().map_err(|e| e.to_string())?;
    let duration = intent.natural_duration().min(10.0);
    let trace = simulate_scenario(
        &params,
        &MechanismConfig::default(),
        &HandImpedance::default(),
        &tremor,
        &intent,
        duration,
        1e-3,
    )
    .map_err(|e| e.to_string())?;
    let every = (trace.rows.len() / PLOT_POINTS).max(1);
    let rows: Vec<_> = trace.rows.iter().step_by(every).collect();
    let xy = |p: Vec2| [p.x, p.y];
    Ok(Stroke {
        intent: rows.iter().map(|r| xy(intent_path(&intent, r.t).0)).collect(),
        raw: rows.iter().map(|r| xy(r.target)).collect(),
        pen: rows.iter().map(|r| xy(r.pen)).collect(),
        pen_rmse_mm: path_rmse(&trace, &intent, SETTLE).map_err(|e| e.to_string())? * 1e3,
        raw_rmse_mm: target_rmse(&trace, &intent, SETTLE).map_err(|e| e.to_string())? * 1e3,
    })
}

/// Transmissibility over the default frequencies with both dampers at `b`.
pub fn bode(b: f64) -> Result<Vec<TransmissibilityPoint>, String> {
    let params = DynamicParams::default().with_dampers(b, b);
    params.validate().map_err(|e| e.to_string())?;
    let drive = DriveSettings {
        settle: 1.0,
        measure: 2.0,
        ..DriveSettings::default()
    };
    frequency_sweep(
        &params,
        &MechanismConfig::default(),
        &HandImpedance::default(),
        &DEFAULT_SWEEP_FREQS,
        &drive,
    )
    .map_err(|e| e.to_string())
}

#[derive(Debug, Serialize)]
pub struct Grip {
    pub diameter: f64,
    pub travel: f64,
    pub turns: f64,
    pub alpha_deg: f64,
    pub aperture: f64,
    /// Right finger, mm: pivot, coupler attachment, nut, fingertip.
    pub finger: [[f64; 2]; 4],
    pub half_width: f64,
}

pub fn gripper(diameter_mm: f64) -> Result<Grip, String> {
    let g = GripperGeometry::default();
    let s = solve_screw(&g, diameter_mm).map_err(|e| e.to_string())?;
    let pose = g.pose(s.alpha);
    let xy = |p: Vec2| [p.x, p.y];
    Ok(Grip {
        diameter: diameter_mm,
        travel: s.travel,
        turns: s.turns,
        alpha_deg: s.alpha.to_degrees(),
        aperture: aperture(&g, s.travel).map_err(|e| e.to_string())?,
        finger: [xy(pose.pivot), xy(pose.attachment), xy(pose.nut), xy(pose.tip)],
        half_width: g.w,
    })
}

fn to_js<T: Serialize>(r: Result<T, String>) -> Result<String, JsError> {
    r.map(|v| serde_json::to_string(&v).expect("plain data serializes"))
        .map_err(|e| JsError::new(&e))
}

#[wasm_bindgen(js_name = simulateStroke)]
pub fn simulate_stroke_js(b: f64, tremor_mm: f64, tremor_hz: f64, intent: &str) -> Result<String, JsError> {
    to_js(stroke(b, tremor_mm, tremor_hz, intent))
}

#[wasm_bindgen(js_name = bodeSweep)]
pub fn bode_js(b: f64) -> Result<String, JsError> {
    to_js(bode(b))
}

#[wasm_bindgen(js_name = gripperPose)]
pub fn gripper_js(diameter_mm: f64) -> Result<String, JsError> {
    to_js(gripper(diameter_mm))
}
