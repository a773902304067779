use gripscribe_demo::{bode, gripper, stroke};

#[test]
fn damping_lowers_stroke_error() {
    let light = stroke(0.01, 5.0, 8.0, "line").unwrap();
    let heavy = stroke(0.5, 5.0, 8.0, "line").unwrap();
    assert!(heavy.pen_rmse_mm < light.pen_rmse_mm);
    assert!(heavy.pen_rmse_mm < heavy.raw_rmse_mm);
    assert_eq!(light.pen.len(), light.raw.len());
    assert!(light.pen.len() <= 1000);
}

#[test]
fn stroke_rejects_bad_input() {
    assert!(stroke(0.05, 5.0, 8.0, "spiral").is_err());
    assert!(stroke(-1.0, 5.0, 8.0, "line").is_err());
}

#[test]
fn bode_gain_falls_at_tremor_band() {
    let pts = bode(0.2).unwrap();
    assert_eq!(pts.len(), 7);
    let g = |f: f64| pts.iter().find(|p| p.frequency == f).unwrap().gain;
    assert!(g(8.0) < g(0.5));
}

#[test]
fn gripper_closes_on_requested_pen() {
    let g = gripper(14.0).unwrap();
    assert!((g.aperture - 14.0).abs() < 1e-6);
    assert!(gripper(25.0).is_err());
    let json = serde_json::to_string(&g).unwrap();
    assert!(json.contains("\"finger\""));
}
