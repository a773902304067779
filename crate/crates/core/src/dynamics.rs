//! Equations of motion of the damped linkage driven through a hand impedance.
//!
//! Coordinates are the absolute link angles `(theta1, psi2)`:
//!
//! ```text
//! M(q) q'' = J(q)^T (F_hand + F_drag) - h(q, q') + tau_damper
//! ```
//!
//! The parallelogram bars are lumped into `m1`/`m2`. Their couplers only
//! translate, so an exact treatment would add configuration-independent mass
//! terms and a small coupling; the lumped model ignores both.
//!
//! Work done by the hand and energy taken out by the dampers are carried as
//! two extra integrator states, so the energy ledger is exactly as accurate
//! as the trajectory itself.

use std::io::Write;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{Mat2, Vec2};
use crate::kinematics::{jacobian, pen_position, JointState, MechanismConfig, Variant};
use crate::InvalidParam;

pub const DEFAULT_DT: f64 = 1e-3;
const SINGULAR_MASS_DET: f64 = 1e-12;

/// Where the two rotary dampers act.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DamperPlacement {
    /// Variant B: `b1` on link 1 at J1, `b2` on the relative rotation at J2.
    RelativeAtJoints,
    /// Variant C: both dampers at the base, each on one absolute angle.
    BothAtBase,
    /// Variant A: only `b1` at J1.
    None,
}

impl DamperPlacement {
    pub fn for_variant(v: Variant) -> Self {
        match v {
            Variant::A => Self::None,
            Variant::B => Self::RelativeAtJoints,
            Variant::C => Self::BothAtBase,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DynamicParams {
    pub m1: f64,
    pub m2: f64,
    pub lc1: f64,
    pub lc2: f64,
    pub i1: f64,
    pub i2: f64,
    pub b1: f64,
    pub b2: f64,
    pub damper_placement: DamperPlacement,
    /// Isotropic viscous drag at the pen tip, N·s/m.
    pub pen_drag: f64,
}

impl Default for DynamicParams {
    fn default() -> Self {
        Self {
            m1: 0.12,
            m2: 0.12,
            lc1: 0.125,
            lc2: 0.125,
            i1: 6.25e-4,
            i2: 6.25e-4,
            b1: 0.05,
            b2: 0.05,
            damper_placement: DamperPlacement::BothAtBase,
            pen_drag: 0.0,
        }
    }
}

impl DynamicParams {
    pub fn with_dampers(self, b1: f64, b2: f64) -> Self {
        Self { b1, b2, ..self }
    }

    pub fn validate(&self) -> Result<(), InvalidParam> {
        let nonneg = [
            ("m1", self.m1),
            ("m2", self.m2),
            ("lc1", self.lc1),
            ("lc2", self.lc2),
            ("i1", self.i1),
            ("i2", self.i2),
            ("b1", self.b1),
            ("b2", self.b2),
            ("pen_drag", self.pen_drag),
        ];
        for (name, v) in nonneg {
            if !(v.is_finite() && v >= 0.0) {
                return Err(InvalidParam::new(name, "must be finite and nonnegative"));
            }
        }
        Ok(())
    }
}

/// Spring-damper between the writer's intended hand position and the pen.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HandImpedance {
    pub k: f64,
    pub d: f64,
}

impl Default for HandImpedance {
    fn default() -> Self {
        Self { k: 200.0, d: 10.0 }
    }
}

impl HandImpedance {
    pub fn validate(&self) -> Result<(), InvalidParam> {
        if !(self.k.is_finite() && self.k > 0.0) {
            return Err(InvalidParam::new("k", "must be positive"));
        }
        if !(self.d.is_finite() && self.d >= 0.0) {
            return Err(InvalidParam::new("d", "must be nonnegative"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum DynamicsError {
    #[error("mass matrix is singular (det = {det:e})")]
    SingularMass { det: f64 },
    #[error("state became non-finite at t = {t} s")]
    NonFinite { t: f64 },
    #[error("time step must be positive, got {0}")]
    InvalidStep(f64),
}

pub fn mass_matrix(params: &DynamicParams, config: &MechanismConfig, state: &JointState) -> Mat2 {
    let p = params;
    let m11 = p.i1 + p.m1 * p.lc1 * p.lc1 + p.m2 * config.l1 * config.l1;
    let m22 = p.i2 + p.m2 * p.lc2 * p.lc2;
    let m12 = p.m2 * config.l1 * p.lc2 * (state.theta1 - state.psi2).cos();
    Mat2::new(m11, m12, m12, m22)
}

/// Centripetal bias `h`; it is subtracted from the applied torques.
pub fn velocity_bias(params: &DynamicParams, config: &MechanismConfig, state: &JointState) -> Vec2 {
    let c = params.m2 * config.l1 * params.lc2 * (state.theta1 - state.psi2).sin();
    Vec2::new(c * state.omega2 * state.omega2, -c * state.omega1 * state.omega1)
}

pub fn damping_torque(params: &DynamicParams, state: &JointState) -> Vec2 {
    let (w1, w2) = (state.omega1, state.omega2);
    match params.damper_placement {
        DamperPlacement::BothAtBase => Vec2::new(-params.b1 * w1, -params.b2 * w2),
        DamperPlacement::RelativeAtJoints => {
            let rel = w2 - w1;
            Vec2::new(-params.b1 * w1 + params.b2 * rel, -params.b2 * rel)
        }
        DamperPlacement::None => Vec2::new(-params.b1 * w1, 0.0),
    }
}

/// Power absorbed by the dampers (nonnegative).
pub fn damper_power(params: &DynamicParams, state: &JointState) -> f64 {
    let w = Vec2::new(state.omega1, state.omega2);
    -damping_torque(params, state).dot(&w)
}

/// `(h, tau_damper)`.
pub fn bias_and_damping(
    params: &DynamicParams,
    config: &MechanismConfig,
    state: &JointState,
) -> (Vec2, Vec2) {
    (
        velocity_bias(params, config, state),
        damping_torque(params, state),
    )
}

pub fn hand_force(
    imp: &HandImpedance,
    target: Vec2,
    target_vel: Vec2,
    pen: Vec2,
    pen_vel: Vec2,
) -> Vec2 {
    imp.k * (target - pen) + imp.d * (target_vel - pen_vel)
}

pub fn pen_velocity(config: &MechanismConfig, state: &JointState) -> Vec2 {
    jacobian(config, state) * Vec2::new(state.omega1, state.omega2)
}

pub fn kinetic_energy(params: &DynamicParams, config: &MechanismConfig, state: &JointState) -> f64 {
    let w = Vec2::new(state.omega1, state.omega2);
    0.5 * w.dot(&(mass_matrix(params, config, state) * w))
}

/// Integrator state: joint state plus cumulative hand work and dissipation.
#[derive(Debug, Clone, Copy)]
struct Augmented([f64; 6]);

impl Augmented {
    fn new(s: &JointState, work: f64, dissipated: f64) -> Self {
        Self([s.theta1, s.psi2, s.omega1, s.omega2, work, dissipated])
    }

    fn joint(&self) -> JointState {
        let y = &self.0;
        JointState {
            theta1: y[0],
            psi2: y[1],
            omega1: y[2],
            omega2: y[3],
        }
    }

    fn axpy(&self, a: f64, k: &Augmented) -> Augmented {
        let mut y = self.0;
        for (yi, ki) in y.iter_mut().zip(k.0.iter()) {
            *yi += a * ki;
        }
        Augmented(y)
    }
}

struct Plant<'a> {
    params: &'a DynamicParams,
    config: &'a MechanismConfig,
    hand: Option<&'a HandImpedance>,
}

impl Plant<'_> {
    fn derivative(&self, y: &Augmented, target: (Vec2, Vec2)) -> Result<Augmented, DynamicsError> {
        let s = y.joint();
        let m = mass_matrix(self.params, self.config, &s);
        let det = m.determinant();
        if !(det >= SINGULAR_MASS_DET) {
            return Err(DynamicsError::SingularMass { det });
        }
        let j = jacobian(self.config, &s);
        let w = Vec2::new(s.omega1, s.omega2);
        let pen_vel = j * w;
        let f_hand = match self.hand {
            Some(imp) => hand_force(
                imp,
                target.0,
                target.1,
                pen_position(self.config, &s),
                pen_vel,
            ),
            None => Vec2::zeros(),
        };
        let f_drag = -self.params.pen_drag * pen_vel;
        let (h, tau_d) = bias_and_damping(self.params, self.config, &s);
        let tau = j.transpose() * (f_hand + f_drag) - h + tau_d;
        let acc = m.try_inverse().ok_or(DynamicsError::SingularMass { det })? * tau;
        let dissipation = damper_power(self.params, &s) + self.params.pen_drag * pen_vel.norm_squared();
        Ok(Augmented([
            s.omega1,
            s.omega2,
            acc.x,
            acc.y,
            f_hand.dot(&pen_vel),
            dissipation,
        ]))
    }

    fn rk4<F>(&self, y: &Augmented, t: f64, dt: f64, target_at: &F) -> Result<Augmented, DynamicsError>
    where
        F: Fn(f64) -> (Vec2, Vec2),
    {
        let mid = target_at(t + 0.5 * dt);
        let k1 = self.derivative(y, target_at(t))?;
        let k2 = self.derivative(&y.axpy(0.5 * dt, &k1), mid)?;
        let k3 = self.derivative(&y.axpy(0.5 * dt, &k2), mid)?;
        let k4 = self.derivative(&y.axpy(dt, &k3), target_at(t + dt))?;
        let mut out = y.0;
        for (i, o) in out.iter_mut().enumerate() {
            *o += dt / 6.0 * (k1.0[i] + 2.0 * k2.0[i] + 2.0 * k3.0[i] + k4.0[i]);
        }
        Ok(Augmented(out))
    }
}

/// One RK4 step with the hand target held fixed over the step.
pub fn step(
    params: &DynamicParams,
    config: &MechanismConfig,
    imp: &HandImpedance,
    state: &JointState,
    target: Vec2,
    target_vel: Vec2,
    dt: f64,
) -> Result<JointState, DynamicsError> {
    step_with_ledger(params, config, imp, state, target, target_vel, dt).map(|(s, _, _)| s)
}

/// As [`step`], also returning the hand work and the dissipation over the step.
pub fn step_with_ledger(
    params: &DynamicParams,
    config: &MechanismConfig,
    imp: &HandImpedance,
    state: &JointState,
    target: Vec2,
    target_vel: Vec2,
    dt: f64,
) -> Result<(JointState, f64, f64), DynamicsError> {
    if !(dt > 0.0) {
        return Err(DynamicsError::InvalidStep(dt));
    }
    let plant = Plant {
        params,
        config,
        hand: Some(imp),
    };
    let y = plant.rk4(&Augmented::new(state, 0.0, 0.0), 0.0, dt, &|_| (target, target_vel))?;
    let s = y.joint();
    if !s.is_finite() {
        return Err(DynamicsError::NonFinite { t: dt });
    }
    Ok((s, y.0[4], y.0[5]))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub t: f64,
    pub target: Vec2,
    pub state: JointState,
    pub pen: Vec2,
    /// Cumulative work done on the pen by the hand coupling, J.
    pub work_in: f64,
    /// Cumulative energy absorbed by dampers and pen drag, J.
    pub dissipated: f64,
    pub kinetic: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimTrace {
    pub dt: f64,
    pub rows: Vec<TraceRow>,
    /// `|work_in - (kinetic_end - kinetic_start) - dissipated|` at the end of the run, J.
    pub energy_residual: f64,
}

pub const TRACE_CSV_HEADER: [&str; 12] = [
    "t", "target_x", "target_y", "theta1", "psi2", "omega1", "omega2", "pen_x", "pen_y",
    "work_in", "dissipated", "kinetic",
];

impl SimTrace {
    pub fn last(&self) -> &TraceRow {
        self.rows.last().expect("trace has at least the initial row")
    }

    pub fn total_work(&self) -> f64 {
        self.last().work_in
    }

    pub fn write_csv<W: Write>(&self, out: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(TRACE_CSV_HEADER)?;
        for r in &self.rows {
            let s = r.state;
            w.write_record(
                [
                    r.t, r.target.x, r.target.y, s.theta1, s.psi2, s.omega1, s.omega2, r.pen.x,
                    r.pen.y, r.work_in, r.dissipated, r.kinetic,
                ]
                .iter()
                .map(f64::to_string),
            )?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Runs the coupled system for `duration`, sampling `target_fn` (position and
/// velocity of the hand target) at every integrator stage.
pub fn simulate<F>(
    params: &DynamicParams,
    config: &MechanismConfig,
    imp: &HandImpedance,
    initial: &JointState,
    target_fn: F,
    duration: f64,
    dt: f64,
) -> Result<SimTrace, DynamicsError>
where
    F: Fn(f64) -> (Vec2, Vec2),
{
    run(
        Plant {
            params,
            config,
            hand: Some(imp),
        },
        initial,
        target_fn,
        duration,
        dt,
    )
}

/// Free motion with no hand attached.
pub fn coast(
    params: &DynamicParams,
    config: &MechanismConfig,
    initial: &JointState,
    duration: f64,
    dt: f64,
) -> Result<SimTrace, DynamicsError> {
    let rest = pen_position(config, initial);
    run(
        Plant {
            params,
            config,
            hand: None,
        },
        initial,
        |_| (rest, Vec2::zeros()),
        duration,
        dt,
    )
}

fn run<F>(
    plant: Plant<'_>,
    initial: &JointState,
    target_fn: F,
    duration: f64,
    dt: f64,
) -> Result<SimTrace, DynamicsError>
where
    F: Fn(f64) -> (Vec2, Vec2),
{
    if !(dt > 0.0) {
        return Err(DynamicsError::InvalidStep(dt));
    }
    let steps = (duration / dt).round().max(1.0) as usize;
    let (params, config) = (plant.params, plant.config);
    let row = |t: f64, y: &Augmented| {
        let s = y.joint();
        TraceRow {
            t,
            target: target_fn(t).0,
            state: s,
            pen: pen_position(config, &s),
            work_in: y.0[4],
            dissipated: y.0[5],
            kinetic: kinetic_energy(params, config, &s),
        }
    };

    let mut y = Augmented::new(initial, 0.0, 0.0);
    let mut rows = Vec::with_capacity(steps + 1);
    rows.push(row(0.0, &y));
    for n in 0..steps {
        let t = n as f64 * dt;
        y = plant.rk4(&y, t, dt, &target_fn)?;
        let t_next = (n + 1) as f64 * dt;
        if !y.0.iter().all(|v| v.is_finite()) {
            return Err(DynamicsError::NonFinite { t: t_next });
        }
        rows.push(row(t_next, &y));
    }
    let (first, last) = (&rows[0], rows.last().unwrap());
    let energy_residual = (last.work_in - (last.kinetic - first.kinetic) - last.dissipated).abs();
    Ok(SimTrace {
        dt,
        rows,
        energy_residual,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kinematics::ik;
    use std::f64::consts::PI;

    fn defaults() -> (DynamicParams, MechanismConfig, HandImpedance) {
        (
            DynamicParams::default(),
            MechanismConfig::default(),
            HandImpedance::default(),
        )
    }

    #[test]
    fn mass_matrix_examples() {
        let (p, c, _) = defaults();
        let m = mass_matrix(&p, &c, &JointState::at_rest(0.4, 0.4 + PI / 2.0));
        assert!((m - Mat2::new(0.01, 0.0, 0.0, 0.0025)).abs().max() < 1e-15);
        let m = mass_matrix(&p, &c, &JointState::at_rest(0.4, 0.4));
        assert!((m[(0, 1)] - 0.00375).abs() < 1e-15);

        let p0 = DynamicParams { m2: 0.0, ..p };
        let m = mass_matrix(&p0, &c, &JointState::at_rest(0.1, 1.3));
        assert!((m - Mat2::new(p.i1 + p.m1 * p.lc1 * p.lc1, 0.0, 0.0, p.i2)).abs().max() < 1e-15);
    }

    #[test]
    fn damping_examples() {
        let base = DynamicParams::default();
        let w = |w1, w2| JointState {
            omega1: w1,
            omega2: w2,
            ..Default::default()
        };
        let b = DynamicParams {
            damper_placement: DamperPlacement::BothAtBase,
            ..base
        };
        assert_eq!(damping_torque(&b, &w(1.0, 0.0)), Vec2::new(-b.b1, 0.0));

        let r = DynamicParams {
            damper_placement: DamperPlacement::RelativeAtJoints,
            ..base
        };
        assert_eq!(damping_torque(&r, &w(1.0, 1.0)), Vec2::new(-r.b1, 0.0));
        assert_eq!(damping_torque(&r, &w(0.0, 1.0)), Vec2::new(r.b2, -r.b2));
        assert!((damper_power(&r, &w(0.0, 1.0)) - r.b2).abs() < 1e-15);

        let n = DynamicParams {
            damper_placement: DamperPlacement::None,
            b2: 7.0,
            ..base
        };
        assert_eq!(damping_torque(&n, &w(1.0, 3.0)), Vec2::new(-n.b1, 0.0));
    }

    #[test]
    fn bias_does_no_net_work_against_mass_rate() {
        // omega . h == 1/2 omega^T dM/dt omega
        let (p, c, _) = defaults();
        let s = JointState {
            theta1: 0.3,
            psi2: 1.9,
            omega1: 1.7,
            omega2: -0.6,
        };
        let h = velocity_bias(&p, &c, &s);
        let w = Vec2::new(s.omega1, s.omega2);
        let dm12 = -p.m2 * c.l1 * p.lc2 * (s.theta1 - s.psi2).sin() * (s.omega1 - s.omega2);
        assert!((w.dot(&h) - s.omega1 * s.omega2 * dm12).abs() < 1e-15);
    }

    #[test]
    fn hand_force_examples() {
        let imp = HandImpedance::default();
        let z = Vec2::zeros();
        assert_eq!(hand_force(&imp, z, z, z, z), z);
        let f = hand_force(&imp, Vec2::new(0.01, 0.0), z, z, z);
        assert!((f - Vec2::new(2.0, 0.0)).norm() < 1e-12);
        let f = hand_force(&imp, z, Vec2::new(0.0, 0.1), z, z);
        assert!((f - Vec2::new(0.0, 1.0)).norm() < 1e-12);
    }

    fn mid_state(c: &MechanismConfig) -> JointState {
        *ik(c, Vec2::new(0.0, 0.28)).unwrap().first().unwrap()
    }

    #[test]
    fn equilibrium_is_fixed() {
        let (p, c, imp) = defaults();
        let s = mid_state(&c);
        let pen = pen_position(&c, &s);
        let next = step(&p, &c, &imp, &s, pen, Vec2::zeros(), DEFAULT_DT).unwrap();
        assert!((next.theta1 - s.theta1).abs() < 1e-15);
        assert!((next.psi2 - s.psi2).abs() < 1e-15);
        assert!(next.omega1.abs() < 1e-13 && next.omega2.abs() < 1e-13);
    }

    #[test]
    fn one_step_order_is_at_least_four() {
        // Richardson: |one step(h) - two steps(h/2)| scales as h^5.
        let (p, c, imp) = defaults();
        let s0 = mid_state(&c);
        let target = pen_position(&c, &s0) + Vec2::new(0.004, -0.002);
        let diff = |h: f64| {
            let a = step(&p, &c, &imp, &s0, target, Vec2::zeros(), h).unwrap();
            let b = step(&p, &c, &imp, &s0, target, Vec2::zeros(), h / 2.0).unwrap();
            let b = step(&p, &c, &imp, &b, target, Vec2::zeros(), h / 2.0).unwrap();
            ((a.theta1 - b.theta1).powi(2)
                + (a.psi2 - b.psi2).powi(2)
                + ((a.omega1 - b.omega1) * h).powi(2)
                + ((a.omega2 - b.omega2) * h).powi(2))
            .sqrt()
        };
        let order = (diff(4e-3) / diff(2e-3)).log2();
        assert!(order >= 4.0, "observed order {order}");
    }

    #[test]
    fn kinetic_energy_decays_without_input() {
        let (p, c, _) = defaults();
        let mut s = mid_state(&c);
        s.omega1 = 0.8;
        s.omega2 = -0.5;
        let trace = coast(&p, &c, &s, 0.05, DEFAULT_DT).unwrap();
        for w in trace.rows.windows(2) {
            assert!(w[1].kinetic < w[0].kinetic);
            assert!(w[1].dissipated >= w[0].dissipated);
        }
        assert!(trace.energy_residual < 1e-12);
    }

    #[test]
    fn singular_mass_rejected() {
        let (_, c, imp) = defaults();
        let p = DynamicParams {
            m1: 0.0,
            m2: 0.0,
            i1: 0.0,
            i2: 0.0,
            ..Default::default()
        };
        let s = mid_state(&c);
        assert!(matches!(
            step(&p, &c, &imp, &s, Vec2::zeros(), Vec2::zeros(), 1e-3),
            Err(DynamicsError::SingularMass { .. })
        ));
    }

    #[test]
    fn stationary_target_gives_zero_energies() {
        let (p, c, imp) = defaults();
        let s = mid_state(&c);
        let pen = pen_position(&c, &s);
        let trace = simulate(&p, &c, &imp, &s, |_| (pen, Vec2::zeros()), 0.5, DEFAULT_DT).unwrap();
        assert_eq!(trace.rows.len(), 501);
        for r in &trace.rows {
            assert!((r.pen - pen).norm() < 1e-14);
            assert!(r.work_in.abs() < 1e-20 && r.dissipated.abs() < 1e-20 && r.kinetic.abs() < 1e-20);
        }
    }

    #[test]
    fn trace_times_are_uniform() {
        let (p, c, imp) = defaults();
        let s = mid_state(&c);
        let trace = simulate(&p, &c, &imp, &s, |_| (Vec2::new(0.0, 0.3), Vec2::zeros()), 0.1, 1e-3).unwrap();
        for (n, r) in trace.rows.iter().enumerate() {
            assert_eq!(r.t, n as f64 * 1e-3);
        }
    }

    #[test]
    fn csv_header_and_row_count() {
        let (p, c, imp) = defaults();
        let s = mid_state(&c);
        let trace = simulate(&p, &c, &imp, &s, |_| (Vec2::new(0.0, 0.3), Vec2::zeros()), 0.01, 1e-3).unwrap();
        let mut buf = Vec::new();
        trace.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(
            lines.next().unwrap(),
            "t,target_x,target_y,theta1,psi2,omega1,omega2,pen_x,pen_y,work_in,dissipated,kinetic"
        );
        assert_eq!(lines.count(), 11);
    }
}
