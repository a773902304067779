//! Live drawing session: newline-delimited JSON frames in, pen poses out.
//!
//! A connection opens with `{"hello":"gripscribe","version":1}`, which the
//! server echoes. Each later line is a [`SessionFrame`]. The host calls
//! [`SessionState::tick`] with the elapsed wall time; the session advances the
//! dynamics at a fixed 1 ms step and emits a [`PenFrame`] every
//! [`EMIT_EVERY`] steps.
//!
//! Replay files hold the inbound lines verbatim, interleaved with
//! `{"tick_ns": N}` records for the wall time granted to each tick. Feeding a
//! replay file through [`replay`] reproduces the live outbound stream byte for
//! byte.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::ProjectConfig;
use crate::dynamics::{step_with_ledger, DynamicParams, HandImpedance};
use crate::kinematics::{fk, JointState, MechanismConfig};
use crate::metrics::operating_state;
use crate::signals::Tremor;
use crate::Vec2;

pub const PROTOCOL_NAME: &str = "gripscribe";
pub const PROTOCOL_VERSION: u32 = 1;
pub const SESSION_DT: f64 = 1e-3;
const STEP_NS: u64 = 1_000_000;
/// Steps per outbound frame (62.5 Hz).
pub const EMIT_EVERY: u64 = 16;
/// Catch-up cap per tick: 100 ms of simulated time.
pub const MAX_STEPS_PER_TICK: u64 = 100;
/// Clamp on the first-difference estimate of pointer velocity, m/s.
pub const MAX_TARGET_SPEED: f64 = 2.0;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Hello {
    pub hello: String,
    pub version: u32,
}

impl Hello {
    pub fn current() -> Self {
        Self {
            hello: PROTOCOL_NAME.into(),
            version: PROTOCOL_VERSION,
        }
    }
}

/// Live damper changes. Other dynamic parameters are fixed for a session.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamUpdate {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub b1: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub b2: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SessionFrame {
    pub t: f64,
    pub x: f64,
    pub y: f64,
    pub tremor_on: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub set_params: Option<ParamUpdate>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PenFrame {
    pub t: f64,
    pub pen_x: f64,
    pub pen_y: f64,
    pub raw_x: f64,
    pub raw_y: f64,
    pub theta1: f64,
    pub psi2: f64,
    pub dissipated: f64,
    /// Set on the first frame after catch-up steps were dropped.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub lag: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorFrame {
    pub error: String,
    pub line: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Outbound {
    Pen(PenFrame),
    Error(ErrorFrame),
}

impl Outbound {
    pub fn to_line(&self) -> String {
        serde_json::to_string(self).expect("frames serialize")
    }
}

#[derive(Debug, Error)]
pub enum SessionError {
    #[error("handshake: {0}")]
    Handshake(String),
    #[error("invalid configuration: {0}")]
    Config(#[from] crate::InvalidParam),
    #[error("operating point unreachable")]
    OperatingPoint,
    #[error("replay line {line}: {message}")]
    Replay { line: u64, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Checks the opening line. On failure the caller sends the error frame and closes.
pub fn handshake(line: &str) -> Result<Hello, ErrorFrame> {
    let err = |e: String| ErrorFrame { error: e, line: 1 };
    let hello: Hello = serde_json::from_str(line.trim()).map_err(|e| err(format!("bad handshake: {e}")))?;
    if hello.hello != PROTOCOL_NAME {
        return Err(err(format!("unknown protocol {:?}", hello.hello)));
    }
    if hello.version != PROTOCOL_VERSION {
        return Err(err(format!(
            "protocol version {} not supported (server speaks {PROTOCOL_VERSION})",
            hello.version
        )));
    }
    Ok(hello)
}

#[derive(Debug, Clone)]
pub struct SessionState {
    params: DynamicParams,
    config: MechanismConfig,
    hand: HandImpedance,
    tremor: Tremor,
    tremor_on: bool,
    joint: JointState,
    steps: u64,
    dissipated: f64,
    held: Vec2,
    held_vel: Vec2,
    /// Step count after which `held_vel` no longer applies.
    vel_until: u64,
    last_client: Option<(f64, Vec2)>,
    pending_ns: u64,
    lag: bool,
    /// Inbound lines seen, handshake included.
    line: u64,
    last_t: f64,
    queue: Vec<SessionFrame>,
    closed: bool,
}

impl SessionState {
    /// Starts at rest at the operating point, with the target on the pen.
    pub fn new(cfg: &ProjectConfig) -> Result<Self, SessionError> {
        cfg.validate()?;
        let joint = operating_state(&cfg.mechanism).map_err(|_| SessionError::OperatingPoint)?;
        let pen = fk(&cfg.mechanism, &joint).position();
        Ok(Self {
            params: cfg.dynamics,
            config: cfg.mechanism,
            hand: cfg.hand,
            tremor: Tremor::new(&cfg.tremor),
            tremor_on: false,
            joint,
            steps: 0,
            dissipated: 0.0,
            held: pen,
            held_vel: Vec2::zeros(),
            vel_until: 0,
            last_client: None,
            pending_ns: 0,
            lag: false,
            line: 1,
            last_t: f64::NEG_INFINITY,
            queue: Vec::new(),
            closed: false,
        })
    }

    pub fn time(&self) -> f64 {
        self.steps as f64 * SESSION_DT
    }

    pub fn params(&self) -> &DynamicParams {
        &self.params
    }

    pub fn joint(&self) -> &JointState {
        &self.joint
    }

    pub fn is_closed(&self) -> bool {
        self.closed
    }

    /// Parses one inbound line and queues it for the next tick.
    /// Blank lines are ignored; a bad line yields an error frame and is dropped.
    pub fn accept_line(&mut self, text: &str) -> Option<ErrorFrame> {
        self.line += 1;
        let text = text.trim();
        if text.is_empty() {
            return None;
        }
        let err = |e: String| ErrorFrame {
            error: e,
            line: self.line,
        };
        let frame: SessionFrame = match serde_json::from_str(text) {
            Ok(f) => f,
            Err(e) => return Some(err(e.to_string())),
        };
        if let Some(msg) = check_frame(&frame, self.last_t) {
            return Some(err(msg));
        }
        self.last_t = frame.t;
        self.queue.push(frame);
        None
    }

    /// Applies queued frames and advances by `wall_dt` seconds of wall time.
    pub fn tick(&mut self, wall_dt: f64) -> Vec<Outbound> {
        let frames = std::mem::take(&mut self.queue);
        session_step(self, &frames, wall_dt)
    }

    fn apply(&mut self, f: &SessionFrame) {
        let pos = Vec2::new(f.x, f.y);
        self.held_vel = Vec2::zeros();
        if let Some((t0, p0)) = self.last_client {
            let dt = f.t - t0;
            if dt > 0.0 {
                let mut v = (pos - p0) / dt;
                let speed = v.norm();
                if speed > MAX_TARGET_SPEED {
                    v *= MAX_TARGET_SPEED / speed;
                }
                self.held_vel = v;
                self.vel_until = self.steps + (dt / SESSION_DT).round() as u64;
            }
        }
        self.last_client = Some((f.t, pos));
        self.held = pos;
        self.tremor_on = f.tremor_on;
        if let Some(u) = f.set_params {
            if let Some(b) = u.b1 {
                self.params.b1 = b;
            }
            if let Some(b) = u.b2 {
                self.params.b2 = b;
            }
        }
    }

    fn raw_target(&self) -> (Vec2, Vec2) {
        let v = if self.steps < self.vel_until {
            self.held_vel
        } else {
            Vec2::zeros()
        };
        if self.tremor_on {
            let (dp, dv) = self.tremor.eval(self.time());
            (self.held + dp, v + dv)
        } else {
            (self.held, v)
        }
    }

    fn pen_frame(&mut self) -> PenFrame {
        let pen = fk(&self.config, &self.joint).position();
        let (raw, _) = self.raw_target();
        PenFrame {
            t: self.time(),
            pen_x: pen.x,
            pen_y: pen.y,
            raw_x: raw.x,
            raw_y: raw.y,
            theta1: self.joint.theta1,
            psi2: self.joint.psi2,
            dissipated: self.dissipated,
            lag: std::mem::take(&mut self.lag),
        }
    }
}

fn check_frame(f: &SessionFrame, last_t: f64) -> Option<String> {
    if !(f.t.is_finite() && f.x.is_finite() && f.y.is_finite()) {
        return Some("t, x and y must be finite".into());
    }
    if f.t < last_t {
        return Some(format!("t went backwards ({} < {last_t})", f.t));
    }
    if let Some(u) = f.set_params {
        for (name, b) in [("b1", u.b1), ("b2", u.b2)] {
            if let Some(b) = b {
                if !(b.is_finite() && b >= 0.0) {
                    return Some(format!("set_params.{name} must be finite and nonnegative"));
                }
            }
        }
    }
    None
}

/// Applies `frames` (already validated) and advances the simulation by the
/// whole number of steps covered by `wall_dt`, capped per tick.
pub fn session_step(state: &mut SessionState, frames: &[SessionFrame], wall_dt: f64) -> Vec<Outbound> {
    let mut out = Vec::new();
    if state.closed {
        return out;
    }
    for f in frames {
        state.apply(f);
    }
    let ns = if wall_dt.is_finite() && wall_dt > 0.0 {
        (wall_dt * 1e9).round() as u64
    } else {
        0
    };
    state.pending_ns = state.pending_ns.saturating_add(ns);
    let mut n = state.pending_ns / STEP_NS;
    state.pending_ns %= STEP_NS;
    if n > MAX_STEPS_PER_TICK {
        n = MAX_STEPS_PER_TICK;
        state.lag = true;
    }
    for _ in 0..n {
        let (target, vel) = state.raw_target();
        match step_with_ledger(
            &state.params,
            &state.config,
            &state.hand,
            &state.joint,
            target,
            vel,
            SESSION_DT,
        ) {
            Ok((j, _work, diss)) => {
                state.joint = j;
                state.dissipated += diss;
                state.steps += 1;
            }
            Err(e) => {
                state.closed = true;
                out.push(Outbound::Error(ErrorFrame {
                    error: e.to_string(),
                    line: state.line,
                }));
                return out;
            }
        }
        if state.steps.is_multiple_of(EMIT_EVERY) {
            out.push(Outbound::Pen(state.pen_frame()));
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TickRecord {
    tick_ns: u64,
}

/// Writes a replay file while a live session runs.
pub struct Recorder<W: Write> {
    out: W,
}

impl<W: Write> Recorder<W> {
    pub fn new(out: W) -> Self {
        Self { out }
    }

    pub fn inbound(&mut self, line: &str) -> std::io::Result<()> {
        writeln!(self.out, "{}", line.trim_end_matches(['\r', '\n']))
    }

    /// Records the wall time of a tick and returns it as the session will see it.
    pub fn tick(&mut self, wall_dt: f64) -> std::io::Result<f64> {
        let tick_ns = if wall_dt.is_finite() && wall_dt > 0.0 {
            (wall_dt * 1e9).round() as u64
        } else {
            0
        };
        writeln!(self.out, "{}", serde_json::to_string(&TickRecord { tick_ns }).unwrap())?;
        Ok(tick_ns as f64 * 1e-9)
    }

    pub fn into_inner(self) -> W {
        self.out
    }
}

/// Runs a recorded stream offline. Returns the outbound lines, handshake
/// reply included, exactly as the live session sent them.
pub fn replay<R: BufRead>(cfg: &ProjectConfig, input: R) -> Result<Vec<String>, SessionError> {
    let mut lines = input.lines();
    let first = lines
        .next()
        .ok_or_else(|| SessionError::Handshake("empty replay".into()))??;
    let mut out = Vec::new();
    if let Err(e) = handshake(&first) {
        out.push(Outbound::Error(e).to_line());
        return Ok(out);
    }
    out.push(serde_json::to_string(&Hello::current()).unwrap());
    let mut state = SessionState::new(cfg)?;
    for line in lines {
        let line = line?;
        if let Ok(tick) = serde_json::from_str::<TickRecord>(&line) {
            let wall = tick.tick_ns as f64 * 1e-9;
            out.extend(state.tick(wall).iter().map(Outbound::to_line));
            if state.is_closed() {
                break;
            }
        } else if let Some(e) = state.accept_line(&line) {
            out.push(Outbound::Error(e).to_line());
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signals::TremorSpec;

    fn cfg() -> ProjectConfig {
        ProjectConfig {
            tremor: TremorSpec::sinusoid(0.002, 8.0),
            ..ProjectConfig::default()
        }
    }

    fn frame(t: f64, x: f64, y: f64) -> SessionFrame {
        SessionFrame {
            t,
            x,
            y,
            tremor_on: false,
            set_params: None,
        }
    }

    fn pens(out: &[Outbound]) -> Vec<PenFrame> {
        out.iter()
            .filter_map(|o| match o {
                Outbound::Pen(p) => Some(*p),
                Outbound::Error(_) => None,
            })
            .collect()
    }

    #[test]
    fn handshake_checks_name_and_version() {
        assert!(handshake(r#"{"hello":"gripscribe","version":1}"#).is_ok());
        assert!(handshake(r#"{"hello":"gripscribe","version":2}"#).is_err());
        assert!(handshake(r#"{"hello":"other","version":1}"#).is_err());
        assert_eq!(handshake("nope").unwrap_err().line, 1);
    }

    #[test]
    fn idle_session_holds_still() {
        let mut s = SessionState::new(&cfg()).unwrap();
        let out = pens(&s.tick(1.0));
        assert!(!out.is_empty());
        let p0 = out[0];
        for p in &out {
            assert_eq!((p.pen_x, p.pen_y), (p0.pen_x, p0.pen_y));
            assert_eq!(p.dissipated, 0.0);
        }
    }

    #[test]
    fn step_count_follows_wall_time() {
        let mut s = SessionState::new(&cfg()).unwrap();
        let mut frames = 0;
        for _ in 0..100 {
            frames += pens(&s.tick(0.016)).len();
        }
        assert_eq!(s.time(), 1.6);
        assert_eq!(frames, 100);
    }

    #[test]
    fn fractional_ticks_accumulate() {
        let mut s = SessionState::new(&cfg()).unwrap();
        for _ in 0..3 {
            s.tick(0.0004);
        }
        assert_eq!(s.steps, 1);
    }

    #[test]
    fn stall_is_capped_and_flagged() {
        let mut s = SessionState::new(&cfg()).unwrap();
        let out = pens(&s.tick(2.0));
        assert_eq!(s.steps, MAX_STEPS_PER_TICK);
        assert!(out[0].lag);
        assert!(out[1..].iter().all(|p| !p.lag));
        let out = pens(&s.tick(0.016));
        assert!(out.iter().all(|p| !p.lag));
    }

    #[test]
    fn step_input_settles_with_at_most_one_overshoot() {
        let mut s = SessionState::new(&cfg()).unwrap();
        let start = fk(&s.config, &s.joint).position();
        let goal = start + Vec2::new(0.005, 0.0);
        let mut out = session_step(&mut s, &[frame(0.0, goal.x, goal.y)], 0.016);
        for _ in 0..250 {
            out.extend(s.tick(0.016));
        }
        let err: Vec<f64> = pens(&out).iter().map(|p| goal.x - p.pen_x).collect();
        let crossings = err.windows(2).filter(|w| w[0].signum() != w[1].signum()).count();
        assert!(crossings <= 1, "{crossings} zero crossings");
        let last = pens(&out).last().copied().unwrap();
        assert!((Vec2::new(last.pen_x, last.pen_y) - goal).norm() < 1e-4);
    }

    fn drive(b_change: Option<f64>) -> (f64, f64) {
        let mut s = SessionState::new(&cfg()).unwrap();
        let c = fk(&s.config, &s.joint).position();
        let mut pens_after = Vec::new();
        let mut d_mid = 0.0;
        for k in 0..240 {
            let t = k as f64 / 60.0;
            let mut f = frame(t, c.x + 0.03 * (2.0 * t).sin(), c.y);
            f.tremor_on = true;
            if k == 120 {
                d_mid = s.dissipated;
                if let Some(b) = b_change {
                    f.set_params = Some(ParamUpdate {
                        b1: Some(b),
                        b2: Some(b),
                    });
                }
            }
            let out = pens(&session_step(&mut s, &[f], 1.0 / 60.0));
            if k >= 120 {
                pens_after.extend(out);
            }
        }
        let speed_sq: f64 = pens_after
            .windows(2)
            .map(|w| {
                let dt = w[1].t - w[0].t;
                ((w[1].pen_x - w[0].pen_x).powi(2) + (w[1].pen_y - w[0].pen_y).powi(2)) / dt
            })
            .sum();
        (s.dissipated - d_mid, speed_sq)
    }

    #[test]
    fn raising_damping_live_raises_dissipation_per_speed() {
        let (d0, v0) = drive(None);
        let (d1, v1) = drive(Some(0.5));
        assert!(d1 / v1 > d0 / v0 * 2.0, "{} vs {}", d1 / v1, d0 / v0);
    }

    #[test]
    fn malformed_lines_give_error_frames() {
        let mut s = SessionState::new(&cfg()).unwrap();
        let e = s.accept_line("{not json").unwrap();
        assert_eq!(e.line, 2);
        assert!(s.accept_line(r#"{"t":0,"x":0,"y":0.28,"tremor_on":false}"#).is_none());
        let e = s.accept_line(r#"{"t":-1,"x":0,"y":0.28,"tremor_on":false}"#).unwrap();
        assert_eq!(e.line, 4);
        assert!(s.accept_line(r#"{"t":1,"x":0,"y":0.28,"tremor_on":false,"set_params":{"m1":1}}"#).is_some());
        assert!(s.accept_line("").is_none());
        assert_eq!(s.queue.len(), 1);
    }

    #[test]
    fn velocity_estimate_is_clamped() {
        let mut s = SessionState::new(&cfg()).unwrap();
        session_step(&mut s, &[frame(0.0, 0.0, 0.28)], 0.0);
        session_step(&mut s, &[frame(0.01, 0.1, 0.28)], 0.0);
        assert!((s.held_vel.norm() - MAX_TARGET_SPEED).abs() < 1e-12);
        assert_eq!(s.vel_until, 10);
    }

    #[test]
    fn pen_frame_wire_names() {
        let p = PenFrame {
            t: 0.0,
            pen_x: 0.0,
            pen_y: 0.0,
            raw_x: 0.0,
            raw_y: 0.0,
            theta1: 0.0,
            psi2: 0.0,
            dissipated: 0.0,
            lag: false,
        };
        let v: serde_json::Value = serde_json::to_value(Outbound::Pen(p)).unwrap();
        let mut keys: Vec<_> = v.as_object().unwrap().keys().cloned().collect();
        keys.sort();
        assert_eq!(
            keys,
            ["dissipated", "pen_x", "pen_y", "psi2", "raw_x", "raw_y", "t", "theta1"]
        );
        let v = serde_json::to_value(Outbound::Pen(PenFrame { lag: true, ..p })).unwrap();
        assert_eq!(v["lag"], true);
    }

    #[test]
    fn recorded_stream_replays_bit_exactly() {
        let cfg = cfg();
        let mut rec = Recorder::new(Vec::new());
        let hello = r#"{"hello":"gripscribe","version":1}"#;
        rec.inbound(hello).unwrap();
        let mut live = vec![serde_json::to_string(&Hello::current()).unwrap()];
        let mut s = SessionState::new(&cfg).unwrap();
        for k in 0..200 {
            let t = k as f64 / 60.0;
            let line = if k == 50 {
                "garbage".to_string()
            } else {
                format!(
                    r#"{{"t":{t},"x":{},"y":0.28,"tremor_on":{}}}"#,
                    0.02 * (t * 1.3).sin(),
                    k % 40 < 20
                )
            };
            rec.inbound(&line).unwrap();
            if let Some(e) = s.accept_line(&line) {
                live.push(Outbound::Error(e).to_line());
            }
            // Irregular wall time, as a real host would see it.
            let wall = rec.tick(0.0167 + 0.003 * ((k * 7919) % 13) as f64 / 13.0).unwrap();
            live.extend(s.tick(wall).iter().map(Outbound::to_line));
        }
        let bytes = rec.into_inner();
        let replayed = replay(&cfg, std::io::Cursor::new(bytes)).unwrap();
        assert!(live.len() > 150);
        assert_eq!(replayed, live);
    }
}
