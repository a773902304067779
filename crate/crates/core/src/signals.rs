//! Synthetic tremor and intended-trajectory generators.
//!
//! Tremor is a displacement added to the intended hand position. All
//! randomness comes from ChaCha8 streams keyed by the spec's seed:
//!
//! * stream 0 draws the band-noise components (x axis first, then y; each
//!   component is a frequency uniform in the band then a phase uniform in
//!   `[0, 2π)`),
//! * stream `k + 1` draws the spasm events of the one-second bin
//!   `[k, k + 1)`: a Poisson count, then per event an onset uniform in the bin
//!   and a direction uniform in `[0, 2π)`.
//!
//! Every sample is therefore a pure function of `(spec, t)`.

use std::f64::consts::TAU;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use crate::geometry::{unit, Vec2};
use crate::InvalidParam;

pub const BAND_COMPONENTS: usize = 32;
const SPASM_BIN: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TremorKind {
    Sinusoid,
    BandNoise,
    SpasmImpulses,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TremorSpec {
    pub kind: TremorKind,
    /// Peak displacement (sinusoid, spasm) or `√2 ×` per-axis RMS (noise), m.
    pub amplitude: f64,
    /// Sinusoid frequency, Hz.
    pub frequency: f64,
    /// Noise band, Hz.
    pub band: [f64; 2],
    /// Spasm events per second.
    pub rate: f64,
    /// Spasm pulse width, s.
    pub pulse_width: f64,
    /// Sinusoid direction, rad from the x axis.
    pub direction: f64,
    pub seed: u64,
}

impl Default for TremorSpec {
    fn default() -> Self {
        Self {
            kind: TremorKind::Sinusoid,
            amplitude: 0.005,
            frequency: 8.0,
            band: [4.0, 12.0],
            rate: 0.5,
            pulse_width: 0.1,
            direction: 0.0,
            seed: 0,
        }
    }
}

impl TremorSpec {
    pub fn sinusoid(amplitude: f64, frequency: f64) -> Self {
        Self {
            kind: TremorKind::Sinusoid,
            amplitude,
            frequency,
            ..Self::default()
        }
    }

    pub fn band_noise(amplitude: f64, band: [f64; 2], seed: u64) -> Self {
        Self {
            kind: TremorKind::BandNoise,
            amplitude,
            band,
            seed,
            ..Self::default()
        }
    }

    pub fn spasms(amplitude: f64, rate: f64, pulse_width: f64, seed: u64) -> Self {
        Self {
            kind: TremorKind::SpasmImpulses,
            amplitude,
            rate,
            pulse_width,
            seed,
            ..Self::default()
        }
    }

    pub fn silent() -> Self {
        Self {
            amplitude: 0.0,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), InvalidParam> {
        if !(self.amplitude.is_finite() && self.amplitude >= 0.0) {
            return Err(InvalidParam::new("amplitude", "must be nonnegative"));
        }
        if !(self.frequency.is_finite() && self.frequency > 0.0) {
            return Err(InvalidParam::new("frequency", "must be positive"));
        }
        let [lo, hi] = self.band;
        if !(lo > 0.0 && lo < hi && hi.is_finite()) {
            return Err(InvalidParam::new("band", "needs 0 < low < high"));
        }
        if !(self.rate.is_finite() && self.rate >= 0.0) {
            return Err(InvalidParam::new("rate", "must be nonnegative"));
        }
        if !(self.pulse_width.is_finite() && self.pulse_width > 0.0) {
            return Err(InvalidParam::new("pulse_width", "must be positive"));
        }
        if !self.direction.is_finite() {
            return Err(InvalidParam::new("direction", "must be finite"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy)]
struct Component {
    amp: f64,
    omega: f64,
    phase: f64,
}

/// A tremor source with its random components drawn once.
#[derive(Debug, Clone)]
pub struct Tremor {
    spec: TremorSpec,
    axes: [Vec<Component>; 2],
}

impl Tremor {
    pub fn new(spec: &TremorSpec) -> Self {
        let mut axes = [Vec::new(), Vec::new()];
        if spec.kind == TremorKind::BandNoise {
            let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
            rng.set_stream(0);
            let amp = spec.amplitude / (BAND_COMPONENTS as f64).sqrt();
            let [lo, hi] = spec.band;
            for axis in axes.iter_mut() {
                for _ in 0..BAND_COMPONENTS {
                    let f = lo + (hi - lo) * rng.gen::<f64>();
                    let phase = TAU * rng.gen::<f64>();
                    axis.push(Component {
                        amp,
                        omega: TAU * f,
                        phase,
                    });
                }
            }
        }
        Self {
            spec: *spec,
            axes,
        }
    }

    pub fn spec(&self) -> &TremorSpec {
        &self.spec
    }

    pub fn displacement(&self, t: f64) -> Vec2 {
        self.eval(t).0
    }

    /// Analytic time derivative of [`displacement`](Self::displacement).
    pub fn velocity(&self, t: f64) -> Vec2 {
        self.eval(t).1
    }

    /// `(displacement, velocity)`.
    pub fn eval(&self, t: f64) -> (Vec2, Vec2) {
        let s = &self.spec;
        if s.amplitude == 0.0 {
            return (Vec2::zeros(), Vec2::zeros());
        }
        match s.kind {
            TremorKind::Sinusoid => {
                let w = TAU * s.frequency;
                let u = unit(s.direction);
                let (sn, cs) = (w * t).sin_cos();
                (s.amplitude * sn * u, s.amplitude * w * cs * u)
            }
            TremorKind::BandNoise => {
                let mut p = Vec2::zeros();
                let mut v = Vec2::zeros();
                for (i, axis) in self.axes.iter().enumerate() {
                    for c in axis {
                        let (sn, cs) = (c.omega * t + c.phase).sin_cos();
                        p[i] += c.amp * sn;
                        v[i] += c.amp * c.omega * cs;
                    }
                }
                (p, v)
            }
            TremorKind::SpasmImpulses => self.spasm_eval(t),
        }
    }

    /// Onsets and directions of the spasm events in bin `k`.
    fn spasm_bin(&self, k: u64) -> Vec<(f64, f64)> {
        let s = &self.spec;
        if s.rate <= 0.0 {
            return Vec::new();
        }
        let mut rng = ChaCha8Rng::seed_from_u64(s.seed);
        rng.set_stream(k + 1);
        let count: f64 = Poisson::new(s.rate * SPASM_BIN)
            .expect("rate validated positive")
            .sample(&mut rng);
        (0..count as u64)
            .map(|_| {
                let onset = (k as f64 + rng.gen::<f64>()) * SPASM_BIN;
                (onset, TAU * rng.gen::<f64>())
            })
            .collect()
    }

    fn spasm_eval(&self, t: f64) -> (Vec2, Vec2) {
        let s = &self.spec;
        let w = s.pulse_width;
        let first = ((t - w) / SPASM_BIN).floor().max(0.0) as u64;
        let last = (t / SPASM_BIN).floor().max(0.0) as u64;
        let mut p = Vec2::zeros();
        let mut v = Vec2::zeros();
        for k in first..=last {
            for (onset, dir) in self.spasm_bin(k) {
                let tau = t - onset;
                if (0.0..=w).contains(&tau) {
                    let arg = TAU * tau / w;
                    let u = unit(dir);
                    p += s.amplitude * 0.5 * (1.0 - arg.cos()) * u;
                    v += s.amplitude * 0.5 * (TAU / w) * arg.sin() * u;
                }
            }
        }
        (p, v)
    }

    /// Spasm onsets in `[0, horizon)`, for plotting and tests.
    pub fn spasm_onsets(&self, horizon: f64) -> Vec<f64> {
        if self.spec.kind != TremorKind::SpasmImpulses {
            return Vec::new();
        }
        let bins = (horizon / SPASM_BIN).ceil() as u64;
        (0..bins)
            .flat_map(|k| self.spasm_bin(k))
            .map(|(t, _)| t)
            .filter(|&t| t < horizon)
            .collect()
    }
}

pub fn tremor_signal(spec: &TremorSpec, t: f64) -> Vec2 {
    Tremor::new(spec).displacement(t)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IntentKind {
    Line,
    Circle,
    LissajousLetter,
}

/// The writer's intended pen path. Every kind is C¹; a line keeps going past
/// `end` at constant speed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct IntentPath {
    pub kind: IntentKind,
    pub start: Vec2,
    pub end: Vec2,
    pub center: Vec2,
    pub radius: f64,
    /// Lissajous half-extents, m.
    pub amplitude: Vec2,
    /// Lissajous lobe frequencies (x, y), Hz.
    pub lobe_freqs: [f64; 2],
    /// Line and circle speed, m/s.
    pub speed: f64,
}

impl Default for IntentPath {
    fn default() -> Self {
        Self {
            kind: IntentKind::Line,
            start: Vec2::new(-0.05, 0.28),
            end: Vec2::new(0.05, 0.28),
            center: Vec2::new(0.0, 0.28),
            radius: 0.04,
            amplitude: Vec2::new(0.04, 0.03),
            lobe_freqs: [0.2, 0.4],
            speed: 0.02,
        }
    }
}

impl IntentPath {
    pub fn line(start: Vec2, end: Vec2, speed: f64) -> Self {
        Self {
            kind: IntentKind::Line,
            start,
            end,
            speed,
            ..Self::default()
        }
    }

    pub fn circle(center: Vec2, radius: f64, speed: f64) -> Self {
        Self {
            kind: IntentKind::Circle,
            center,
            radius,
            speed,
            ..Self::default()
        }
    }

    pub fn lissajous(center: Vec2, amplitude: Vec2, lobe_freqs: [f64; 2]) -> Self {
        Self {
            kind: IntentKind::LissajousLetter,
            center,
            amplitude,
            lobe_freqs,
            ..Self::default()
        }
    }

    /// Time for one natural traversal (line length, one lap, one Lissajous period).
    pub fn natural_duration(&self) -> f64 {
        match self.kind {
            IntentKind::Line => (self.end - self.start).norm() / self.speed,
            IntentKind::Circle => TAU * self.radius / self.speed,
            IntentKind::LissajousLetter => {
                let [fx, fy] = self.lobe_freqs;
                1.0 / gcd_freq(fx, fy)
            }
        }
    }

    pub fn validate(&self) -> Result<(), InvalidParam> {
        match self.kind {
            IntentKind::Line => {
                if !((self.end - self.start).norm() > 0.0) {
                    return Err(InvalidParam::new("end", "must differ from start"));
                }
            }
            IntentKind::Circle => {
                if !(self.radius.is_finite() && self.radius > 0.0) {
                    return Err(InvalidParam::new("radius", "must be positive"));
                }
            }
            IntentKind::LissajousLetter => {
                if !self.lobe_freqs.iter().all(|f| f.is_finite() && *f > 0.0) {
                    return Err(InvalidParam::new("lobe_freqs", "must be positive"));
                }
            }
        }
        if self.kind != IntentKind::LissajousLetter && !(self.speed.is_finite() && self.speed > 0.0) {
            return Err(InvalidParam::new("speed", "must be positive"));
        }
        Ok(())
    }
}

fn gcd_freq(a: f64, b: f64) -> f64 {
    // Frequencies are compared on a 1 mHz lattice.
    let (mut x, mut y) = ((a * 1000.0).round() as u64, (b * 1000.0).round() as u64);
    while y != 0 {
        (x, y) = (y, x % y);
    }
    (x.max(1)) as f64 / 1000.0
}

/// Intended position and its exact velocity at `t`.
pub fn intent_path(path: &IntentPath, t: f64) -> (Vec2, Vec2) {
    match path.kind {
        IntentKind::Line => {
            let u = (path.end - path.start).normalize();
            (path.start + u * path.speed * t, u * path.speed)
        }
        IntentKind::Circle => {
            let w = path.speed / path.radius;
            let (s, c) = (w * t).sin_cos();
            (
                path.center + path.radius * Vec2::new(c, s),
                path.radius * w * Vec2::new(-s, c),
            )
        }
        IntentKind::LissajousLetter => {
            let [fx, fy] = path.lobe_freqs;
            let (wx, wy) = (TAU * fx, TAU * fy);
            let a = path.amplitude;
            (
                path.center + Vec2::new(a.x * (wx * t).sin(), a.y * (wy * t).sin()),
                Vec2::new(a.x * wx * (wx * t).cos(), a.y * wy * (wy * t).cos()),
            )
        }
    }
}

/// Intent plus tremor, with the tremor velocity taken analytically.
pub fn compose_target(path: &IntentPath, tremor: &Tremor, t: f64) -> (Vec2, Vec2) {
    let (p, v) = intent_path(path, t);
    let (dp, dv) = tremor.eval(t);
    (p + dp, v + dv)
}
