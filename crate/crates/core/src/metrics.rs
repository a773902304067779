//! Stabilisation metrics: transmissibility of the hand → pen path and
//! tracking error against the intended path.
//!
//! A nonlinear linkage has no unique frequency response, so the operating
//! point (pen 0.28 m in front of the base, first IK branch) and the drive
//! amplitude are part of the metric's definition.

use std::f64::consts::TAU;
use std::io::Write;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dynamics::{simulate, DynamicParams, DynamicsError, HandImpedance, SimTrace, DEFAULT_DT};
use crate::geometry::Vec2;
use crate::kinematics::{ik, MechanismConfig};
use crate::signals::{compose_target, intent_path, IntentPath, Tremor, TremorSpec};
use crate::svg::Canvas;

/// Pen operating point relative to the base, m.
pub const OPERATING_POINT: Vec2 = Vec2::new(0.0, 0.28);
pub const DEFAULT_SWEEP_FREQS: [f64; 7] = [0.25, 0.5, 1.0, 2.0, 4.0, 8.0, 12.0];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TransmissibilityPoint {
    pub frequency: f64,
    pub gain: f64,
    pub phase: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DriveSettings {
    /// Target excursion along x, m.
    pub amplitude: f64,
    /// Discarded transient, s.
    pub settle: f64,
    /// Nominal measurement window, rounded to whole periods (at least one), s.
    pub measure: f64,
    pub dt: f64,
}

impl Default for DriveSettings {
    fn default() -> Self {
        Self {
            amplitude: 0.005,
            settle: 2.0,
            measure: 4.0,
            dt: DEFAULT_DT,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MetricsError {
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
    #[error("operating point {0:?} has no admissible posture")]
    OperatingPoint(Vec2),
    #[error("frequencies must be positive and ascending")]
    BadFrequencies,
    #[error("trace is empty after the settle time")]
    EmptyTrace,
}

/// Amplitude and phase of the `f`-Hz component of `values`, relative to
/// `sin(2π f t)`. The samples should span a whole number of periods.
pub fn demodulate(times: &[f64], values: &[f64], f: f64) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let (mut i, mut q) = (0.0, 0.0);
    for (&t, &v) in times.iter().zip(values) {
        let (s, c) = (TAU * f * t).sin_cos();
        i += (v - mean) * s;
        q += (v - mean) * c;
    }
    let (i, q) = (2.0 * i / n, 2.0 * q / n);
    (i.hypot(q), q.atan2(i))
}

pub fn operating_state(config: &MechanismConfig) -> Result<crate::kinematics::JointState, MetricsError> {
    let p = config.base + OPERATING_POINT;
    ik(config, p)
        .ok()
        .and_then(|s| s.first().copied())
        .ok_or(MetricsError::OperatingPoint(p))
}

pub fn transmissibility(
    params: &DynamicParams,
    config: &MechanismConfig,
    imp: &HandImpedance,
    f: f64,
    drive: &DriveSettings,
) -> Result<TransmissibilityPoint, MetricsError> {
    if !(f > 0.0) {
        return Err(MetricsError::BadFrequencies);
    }
    let initial = operating_state(config)?;
    let center = config.base + OPERATING_POINT;
    let periods = (drive.measure * f).round().max(1.0);
    let window = periods / f;
    let w = TAU * f;
    let a = drive.amplitude;
    let target = move |t: f64| {
        (
            center + Vec2::new(a * (w * t).sin(), 0.0),
            Vec2::new(a * w * (w * t).cos(), 0.0),
        )
    };
    let trace = simulate(params, config, imp, &initial, target, drive.settle + window, drive.dt)?;

    let skip = (drive.settle / drive.dt).round() as usize;
    let count = (window / drive.dt).round() as usize;
    let rows = &trace.rows[skip..(skip + count).min(trace.rows.len())];
    let times: Vec<f64> = rows.iter().map(|r| r.t).collect();
    let xs: Vec<f64> = rows.iter().map(|r| r.pen.x).collect();
    let (amp, phase) = demodulate(&times, &xs, f);
    Ok(TransmissibilityPoint {
        frequency: f,
        gain: amp / a,
        phase,
    })
}

pub fn frequency_sweep(
    params: &DynamicParams,
    config: &MechanismConfig,
    imp: &HandImpedance,
    freqs: &[f64],
    drive: &DriveSettings,
) -> Result<Vec<TransmissibilityPoint>, MetricsError> {
    if freqs.iter().any(|f| !(*f > 0.0)) || freqs.windows(2).any(|w| w[1] <= w[0]) {
        return Err(MetricsError::BadFrequencies);
    }
    freqs
        .iter()
        .map(|&f| transmissibility(params, config, imp, f, drive))
        .collect()
}

/// Drives the mechanism along `intent` plus `tremor`, starting at rest with
/// the pen on the path.
#[allow(clippy::too_many_arguments)]
pub fn simulate_scenario(
    params: &DynamicParams,
    config: &MechanismConfig,
    imp: &HandImpedance,
    tremor: &TremorSpec,
    intent: &IntentPath,
    duration: f64,
    dt: f64,
) -> Result<SimTrace, MetricsError> {
    let p0 = intent_path(intent, 0.0).0;
    let initial = ik(config, p0)
        .ok()
        .and_then(|s| s.first().copied())
        .ok_or(MetricsError::OperatingPoint(p0))?;
    let tremor = Tremor::new(tremor);
    Ok(simulate(
        params,
        config,
        imp,
        &initial,
        |t| compose_target(intent, &tremor, t),
        duration,
        dt,
    )?)
}

/// RMS distance between pen and intended path over rows with `t >= settle`.
pub fn path_rmse(trace: &SimTrace, intent: &IntentPath, settle: f64) -> Result<f64, MetricsError> {
    let (sum, n) = trace
        .rows
        .iter()
        .filter(|r| r.t >= settle)
        .fold((0.0, 0usize), |(s, n), r| {
            (s + (r.pen - intent_path(intent, r.t).0).norm_squared(), n + 1)
        });
    if n == 0 {
        return Err(MetricsError::EmptyTrace);
    }
    Ok((sum / n as f64).sqrt())
}

/// Same as [`path_rmse`] for the raw (tremor-augmented) target column.
pub fn target_rmse(trace: &SimTrace, intent: &IntentPath, settle: f64) -> Result<f64, MetricsError> {
    let (sum, n) = trace
        .rows
        .iter()
        .filter(|r| r.t >= settle)
        .fold((0.0, 0usize), |(s, n), r| {
            (s + (r.target - intent_path(intent, r.t).0).norm_squared(), n + 1)
        });
    if n == 0 {
        return Err(MetricsError::EmptyTrace);
    }
    Ok((sum / n as f64).sqrt())
}

pub fn write_sweep_csv<W: Write>(points: &[TransmissibilityPoint], out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["f_hz", "gain", "phase_rad"])?;
    for p in points {
        w.write_record([p.frequency, p.gain, p.phase].iter().map(f64::to_string))?;
    }
    w.flush()?;
    Ok(())
}

/// Magnitude plot in dB against log frequency.
pub fn sweep_svg(points: &[TransmissibilityPoint]) -> String {
    let db = |g: f64| 20.0 * g.max(1e-9).log10();
    let lx: Vec<f64> = points.iter().map(|p| p.frequency.log10()).collect();
    let ly: Vec<f64> = points.iter().map(|p| db(p.gain)).collect();
    let fold = |v: &[f64], init: f64, op: fn(f64, f64) -> f64| v.iter().copied().fold(init, op);
    let (x0, x1) = (fold(&lx, f64::INFINITY, f64::min).floor(), fold(&lx, f64::NEG_INFINITY, f64::max).ceil());
    let y0 = (fold(&ly, 0.0, f64::min) / 3.0).floor() * 3.0 - 3.0;
    let y1 = (fold(&ly, 0.0, f64::max) / 3.0).ceil() * 3.0 + 3.0;
    let mut c = Canvas::new(640.0, 400.0, Vec2::new(x0, y0), Vec2::new(x1.max(x0 + 1.0), y1));
    let mut decade = x0;
    while decade <= x1 {
        c.line(Vec2::new(decade, y0), Vec2::new(decade, y1), "#ddd", 1.0);
        c.text(Vec2::new(decade, y0), &format!("{} Hz", 10f64.powf(decade)), 11.0);
        decade += 1.0;
    }
    let mut g = y0;
    while g <= y1 {
        c.line(Vec2::new(x0, g), Vec2::new(x1, g), "#eee", 1.0);
        c.text(Vec2::new(x0, g), &format!("{g:.0} dB"), 11.0);
        g += 3.0;
    }
    c.line(Vec2::new(x0, 0.0), Vec2::new(x1, 0.0), "#888", 1.0);
    c.polyline(lx.iter().zip(&ly).map(|(&x, &y)| Vec2::new(x, y)), "#1f77b4", 2.0);
    for (&x, &y) in lx.iter().zip(&ly) {
        c.dot(Vec2::new(x, y), 3.0, "#1f77b4");
    }
    c.label(10.0, 20.0, "transmissibility |pen x| / |target x|", 13.0);
    c.finish()
}

/// Overlay of intended path, raw target and stabilised pen path.
pub fn pen_trace_svg(trace: &SimTrace, intent: &IntentPath) -> String {
    let pts = |f: &dyn Fn(&crate::dynamics::TraceRow) -> Vec2| -> Vec<Vec2> {
        trace.rows.iter().map(f).collect()
    };
    let intent_pts = pts(&|r| intent_path(intent, r.t).0);
    let raw = pts(&|r| r.target);
    let pen = pts(&|r| r.pen);
    let all = intent_pts.iter().chain(&raw).chain(&pen);
    let lo = all.clone().fold(Vec2::repeat(f64::INFINITY), |a, p| a.inf(p));
    let hi = all.fold(Vec2::repeat(f64::NEG_INFINITY), |a, p| a.sup(p));
    let pad = (hi - lo).max() * 0.05 + 1e-3;
    let mut c = Canvas::equal(720.0, lo - Vec2::repeat(pad), hi + Vec2::repeat(pad));
    c.polyline(raw, "#f4a582", 1.0);
    c.polyline(intent_pts, "#999", 1.0);
    c.polyline(pen, "#08306b", 1.5);
    c.label(10.0, 20.0, "grey: intent, orange: raw target, blue: pen", 13.0);
    c.finish()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kinematics::pen_position;

    #[test]
    fn demodulation_recovers_synthetic_sinusoid() {
        let (f, amp, phase) = (3.0, 0.0042, 0.7);
        let times: Vec<f64> = (0..2000).map(|i| 1.0 + i as f64 * 1e-3).collect();
        let values: Vec<f64> = times.iter().map(|t| 0.3 + amp * (TAU * f * t + phase).sin()).collect();
        let (a, p) = demodulate(&times, &values, f);
        assert!((a / amp - 1.0).abs() < 1e-3);
        assert!((p - phase).abs() < 0.01);
    }

    #[test]
    fn path_rmse_cases() {
        let config = MechanismConfig::default();
        let params = DynamicParams::default();
        let imp = HandImpedance::default();
        let s = operating_state(&config).unwrap();
        let pen = pen_position(&config, &s);
        let trace = simulate(&params, &config, &imp, &s, |_| (pen, Vec2::zeros()), 0.2, 1e-3).unwrap();

        let on_pen = IntentPath::line(pen, pen + Vec2::new(1.0, 0.0), 1e-300);
        assert!(path_rmse(&trace, &on_pen, 0.0).unwrap() < 1e-12);

        let e = Vec2::new(0.003, -0.004);
        let off = IntentPath::line(pen + e, pen + e + Vec2::new(1.0, 0.0), 1e-300);
        assert!((path_rmse(&trace, &off, 0.0).unwrap() - 0.005).abs() < 1e-12);

        assert!(matches!(path_rmse(&trace, &off, 10.0), Err(MetricsError::EmptyTrace)));
    }

    #[test]
    fn sweep_rejects_unsorted() {
        let r = frequency_sweep(
            &DynamicParams::default(),
            &MechanismConfig::default(),
            &HandImpedance::default(),
            &[2.0, 1.0],
            &DriveSettings::default(),
        );
        assert!(matches!(r, Err(MetricsError::BadFrequencies)));
    }

    #[test]
    fn single_frequency_sweep_equals_point() {
        let (p, c, h) = (DynamicParams::default(), MechanismConfig::default(), HandImpedance::default());
        let d = DriveSettings {
            settle: 0.5,
            measure: 1.0,
            ..Default::default()
        };
        let one = transmissibility(&p, &c, &h, 4.0, &d).unwrap();
        assert_eq!(frequency_sweep(&p, &c, &h, &[4.0], &d).unwrap(), vec![one]);
    }

    #[test]
    fn sweep_csv_header() {
        let pts = [TransmissibilityPoint {
            frequency: 1.0,
            gain: 0.5,
            phase: -0.1,
        }];
        let mut buf = Vec::new();
        write_sweep_csv(&pts, &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "f_hz,gain,phase_rad\n1,0.5,-0.1\n");
        assert!(sweep_svg(&pts).contains("<polyline"));
    }
}
