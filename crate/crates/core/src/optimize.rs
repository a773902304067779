//! Damper tuning: trade tremor-band gain against intent-band tracking.
//!
//! ```text
//! cost = gain(tremor_freq) + penalty_weight * max(0, intent_floor - gain(intent_freq))
//! ```
//!
//! Both searches run in `ln b` coordinates because damping effects span decades.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::dynamics::{DynamicParams, HandImpedance};
use crate::kinematics::MechanismConfig;
use crate::metrics::{transmissibility, DriveSettings, MetricsError};
use crate::InvalidParam;

pub const B_MIN: f64 = 1e-3;
pub const B_MAX: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DesignVars {
    pub b1: f64,
    pub b2: f64,
}

impl DesignVars {
    pub fn in_box(&self) -> bool {
        (B_MIN..=B_MAX).contains(&self.b1) && (B_MIN..=B_MAX).contains(&self.b2)
    }

    fn to_log(self) -> [f64; 2] {
        [self.b1.ln(), self.b2.ln()]
    }

    fn from_log(x: &[f64]) -> Self {
        Self {
            b1: x[0].exp().clamp(B_MIN, B_MAX),
            b2: x[1].exp().clamp(B_MIN, B_MAX),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ObjectiveSpec {
    pub tremor_freq: f64,
    pub intent_freq: f64,
    pub intent_floor: f64,
    pub penalty_weight: f64,
}

impl Default for ObjectiveSpec {
    fn default() -> Self {
        Self {
            tremor_freq: 8.0,
            intent_freq: 0.5,
            intent_floor: 0.8,
            penalty_weight: 10.0,
        }
    }
}

impl ObjectiveSpec {
    pub fn validate(&self) -> Result<(), InvalidParam> {
        if !(self.intent_freq > 0.0) {
            return Err(InvalidParam::new("intent_freq", "must be positive"));
        }
        if !(self.tremor_freq > self.intent_freq) {
            return Err(InvalidParam::new("tremor_freq", "must exceed intent_freq"));
        }
        if !(self.intent_floor > 0.0 && self.intent_floor <= 1.0) {
            return Err(InvalidParam::new("intent_floor", "must lie in (0, 1]"));
        }
        if !(self.penalty_weight >= 0.0) {
            return Err(InvalidParam::new("penalty_weight", "must be nonnegative"));
        }
        Ok(())
    }

    pub fn cost(&self, tremor_gain: f64, intent_gain: f64) -> f64 {
        tremor_gain + self.penalty_weight * (self.intent_floor - intent_gain).max(0.0)
    }
}

/// Everything needed to score a design besides the dampers themselves.
#[derive(Debug, Clone, Copy)]
pub struct Problem {
    pub spec: ObjectiveSpec,
    pub params: DynamicParams,
    pub config: MechanismConfig,
    pub hand: HandImpedance,
    pub drive: DriveSettings,
}

impl Problem {
    pub fn new(params: DynamicParams, config: MechanismConfig, hand: HandImpedance) -> Self {
        Self {
            spec: ObjectiveSpec::default(),
            params,
            config,
            hand,
            drive: DriveSettings::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub vars: DesignVars,
    pub cost: f64,
    pub tremor_gain: f64,
    pub intent_gain: f64,
}

pub fn evaluate_design(vars: DesignVars, problem: &Problem) -> Result<Evaluation, MetricsError> {
    let params = problem.params.with_dampers(vars.b1, vars.b2);
    let gain = |f| {
        transmissibility(&params, &problem.config, &problem.hand, f, &problem.drive).map(|p| p.gain)
    };
    let tremor_gain = gain(problem.spec.tremor_freq)?;
    let intent_gain = gain(problem.spec.intent_freq)?;
    Ok(Evaluation {
        vars,
        cost: problem.spec.cost(tremor_gain, intent_gain),
        tremor_gain,
        intent_gain,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridResult {
    pub best: Evaluation,
    /// Row-major, `b1` outer; `n * n` rows.
    pub table: Vec<Evaluation>,
}

pub fn log_grid(n: usize) -> Vec<f64> {
    let (lo, hi) = (B_MIN.log10(), B_MAX.log10());
    (0..n)
        .map(|i| {
            if i + 1 == n {
                B_MAX
            } else {
                10f64.powf(lo + (hi - lo) * i as f64 / (n - 1) as f64)
            }
        })
        .collect()
}

/// Exhaustive search on an `n × n` log-spaced grid; ties go to smaller `b1`, then `b2`.
pub fn grid_search(problem: &Problem, n_per_axis: usize) -> Result<GridResult, MetricsError> {
    assert!(n_per_axis >= 2, "grid needs at least two points per axis");
    let axis = log_grid(n_per_axis);
    let mut table = Vec::with_capacity(n_per_axis * n_per_axis);
    for &b1 in &axis {
        for &b2 in &axis {
            table.push(evaluate_design(DesignVars { b1, b2 }, problem)?);
        }
    }
    let best = *table
        .iter()
        .reduce(|best, e| if e.cost < best.cost { e } else { best })
        .expect("grid is nonempty");
    Ok(GridResult { best, table })
}

pub fn write_grid_csv<W: Write>(table: &[Evaluation], out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["b1", "b2", "cost", "tremor_gain", "intent_gain"])?;
    for e in table {
        w.write_record(
            [e.vars.b1, e.vars.b2, e.cost, e.tremor_gain, e.intent_gain]
                .iter()
                .map(f64::to_string),
        )?;
    }
    w.flush()?;
    Ok(())
}

/// Reflection, expansion, contraction and shrink coefficients.
#[derive(Debug, Clone, Copy)]
pub struct NelderMead {
    pub alpha: f64,
    pub gamma: f64,
    pub rho: f64,
    pub sigma: f64,
    /// Converged when every vertex lies within `tol` of the best one.
    pub tol: f64,
    pub max_iter: usize,
    /// Initial simplex edge along each axis.
    pub initial_step: f64,
}

impl Default for NelderMead {
    fn default() -> Self {
        Self {
            alpha: 1.0,
            gamma: 2.0,
            rho: 0.5,
            sigma: 0.5,
            tol: 1e-4,
            max_iter: 200,
            initial_step: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub value: f64,
    pub iterations: usize,
    /// `false` means the iteration budget ran out; `x` is the best vertex so far.
    pub converged: bool,
    /// Every point handed to the objective, in order.
    pub evaluated: Vec<Vec<f64>>,
}

impl NelderMead {
    /// Minimises `f` from `start`, clamping every trial point to `[lo, hi]` per axis.
    pub fn minimize<F, E>(&self, mut f: F, start: &[f64], lo: &[f64], hi: &[f64]) -> Result<Minimum, E>
    where
        F: FnMut(&[f64]) -> Result<f64, E>,
    {
        let n = start.len();
        let clamp = |x: Vec<f64>| -> Vec<f64> {
            x.iter()
                .enumerate()
                .map(|(i, v)| v.clamp(lo[i], hi[i]))
                .collect()
        };
        let mut evaluated = Vec::new();
        let mut eval = |x: &Vec<f64>, evaluated: &mut Vec<Vec<f64>>| {
            evaluated.push(x.clone());
            f(x)
        };

        let x0 = clamp(start.to_vec());
        let mut simplex = vec![x0.clone()];
        for i in 0..n {
            let mut v = x0.clone();
            // Step away from the nearer bound.
            let room_up = hi[i] - x0[i];
            let room_down = x0[i] - lo[i];
            v[i] += if room_up >= room_down {
                self.initial_step.min(room_up)
            } else {
                -self.initial_step.min(room_down)
            };
            simplex.push(v);
        }
        let mut values = Vec::with_capacity(n + 1);
        for v in &simplex {
            values.push(eval(v, &mut evaluated)?);
        }

        let mut iterations = 0;
        let mut converged = false;
        loop {
            let mut order: Vec<usize> = (0..=n).collect();
            order.sort_by(|&a, &b| values[a].total_cmp(&values[b]).then(a.cmp(&b)));
            simplex = order.iter().map(|&i| simplex[i].clone()).collect();
            values = order.iter().map(|&i| values[i]).collect();

            let size = simplex[1..]
                .iter()
                .map(|v| dist(v, &simplex[0]))
                .fold(0.0, f64::max);
            if size < self.tol {
                converged = true;
                break;
            }
            if iterations >= self.max_iter {
                break;
            }
            iterations += 1;

            let centroid: Vec<f64> = (0..n)
                .map(|j| simplex[..n].iter().map(|v| v[j]).sum::<f64>() / n as f64)
                .collect();
            let along = |from: &[f64], coef: f64| -> Vec<f64> {
                clamp(
                    centroid
                        .iter()
                        .zip(from)
                        .map(|(c, x)| c + coef * (x - c))
                        .collect(),
                )
            };
            let worst = simplex[n].clone();
            let reflected = along(&worst, -self.alpha);
            let fr = eval(&reflected, &mut evaluated)?;

            if fr < values[0] {
                let expanded = along(&reflected, self.gamma);
                let fe = eval(&expanded, &mut evaluated)?;
                if fe < fr {
                    simplex[n] = expanded;
                    values[n] = fe;
                } else {
                    simplex[n] = reflected;
                    values[n] = fr;
                }
                continue;
            }
            if fr < values[n - 1] {
                simplex[n] = reflected;
                values[n] = fr;
                continue;
            }
            let outside = fr < values[n];
            let contracted = if outside {
                along(&reflected, self.rho)
            } else {
                along(&worst, self.rho)
            };
            let fc = eval(&contracted, &mut evaluated)?;
            let accept = if outside { fc <= fr } else { fc < values[n] };
            if accept {
                simplex[n] = contracted;
                values[n] = fc;
                continue;
            }
            let best = simplex[0].clone();
            for i in 1..=n {
                simplex[i] = clamp(
                    best.iter()
                        .zip(&simplex[i])
                        .map(|(b, x)| b + self.sigma * (x - b))
                        .collect(),
                );
                values[i] = eval(&simplex[i], &mut evaluated)?;
            }
        }
        Ok(Minimum {
            x: simplex[0].clone(),
            value: values[0],
            iterations,
            converged,
            evaluated,
        })
    }
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

#[derive(Debug, Clone, PartialEq)]
pub struct DesignOptimum {
    pub best: Evaluation,
    pub iterations: usize,
    pub converged: bool,
    /// Designs evaluated, in order.
    pub evaluated: Vec<DesignVars>,
}

/// Nelder–Mead over `(ln b1, ln b2)` clamped to the damper box.
pub fn nelder_mead(
    problem: &Problem,
    start: DesignVars,
    tol: f64,
    max_iter: usize,
) -> Result<DesignOptimum, MetricsError> {
    let nm = NelderMead {
        tol,
        max_iter,
        ..Default::default()
    };
    let lo = [B_MIN.ln(); 2];
    let hi = [B_MAX.ln(); 2];
    let mut best: Option<Evaluation> = None;
    let min = nm.minimize(
        |x| {
            let e = evaluate_design(DesignVars::from_log(x), problem)?;
            if best.is_none_or(|b| e.cost < b.cost) {
                best = Some(e);
            }
            Ok::<_, MetricsError>(e.cost)
        },
        &start.to_log(),
        &lo,
        &hi,
    )?;
    let best = best.expect("simplex was evaluated");
    debug_assert_eq!(best.cost, min.value);
    Ok(DesignOptimum {
        best,
        iterations: min.iterations,
        converged: min.converged,
        evaluated: min.evaluated.iter().map(|x| DesignVars::from_log(x)).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::convert::Infallible;

    fn quadratic(x: &[f64]) -> Result<f64, Infallible> {
        // (x - x*)^T A (x - x*), A = [[3, 1], [1, 2]], x* = (0.7, -1.3)
        let (dx, dy) = (x[0] - 0.7, x[1] + 1.3);
        Ok(3.0 * dx * dx + 2.0 * dx * dy + 2.0 * dy * dy)
    }

    #[test]
    fn converges_on_spd_quadratic() {
        let nm = NelderMead::default();
        let m = nm
            .minimize(quadratic, &[3.0, 2.0], &[-10.0, -10.0], &[10.0, 10.0])
            .unwrap();
        assert!(m.converged);
        assert!(dist(&m.x, &[0.7, -1.3]) < 1e-4, "{:?}", m.x);
    }

    #[test]
    fn respects_bounds_from_corner() {
        let nm = NelderMead::default();
        let m = nm
            .minimize(quadratic, &[1.0, 1.0], &[1.0, -0.5], &[2.0, 1.0])
            .unwrap();
        for x in &m.evaluated {
            assert!((1.0..=2.0).contains(&x[0]) && (-0.5..=1.0).contains(&x[1]));
        }
        // Constrained optimum sits on the x0 = 1 edge.
        assert!((m.x[0] - 1.0).abs() < 1e-4);
    }

    #[test]
    fn budget_exhaustion_is_flagged() {
        let nm = NelderMead {
            max_iter: 3,
            ..Default::default()
        };
        let m = nm
            .minimize(quadratic, &[3.0, 2.0], &[-10.0; 2], &[10.0; 2])
            .unwrap();
        assert!(!m.converged);
        assert_eq!(m.iterations, 3);
        assert!(m.value <= quadratic(&[3.0, 2.0]).unwrap());
    }

    #[test]
    fn deterministic_iterates() {
        let nm = NelderMead::default();
        let a = nm.minimize(quadratic, &[3.0, 2.0], &[-10.0; 2], &[10.0; 2]).unwrap();
        let b = nm.minimize(quadratic, &[3.0, 2.0], &[-10.0; 2], &[10.0; 2]).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn cost_definition() {
        let s = ObjectiveSpec::default();
        assert_eq!(s.cost(0.9, 0.95), 0.9);
        assert!((s.cost(0.9, 0.7) - (0.9 + 10.0 * 0.1)).abs() < 1e-12);
    }

    #[test]
    fn log_grid_spans_box() {
        let g = log_grid(11);
        assert_eq!(g.len(), 11);
        assert_eq!(g[0], B_MIN);
        assert_eq!(g[10], B_MAX);
        assert!((g[5] - 10f64.powf(-1.5)).abs() < 1e-15);
    }

    #[test]
    fn objective_spec_validation() {
        let s = ObjectiveSpec {
            tremor_freq: 0.4,
            ..Default::default()
        };
        assert_eq!(s.validate().unwrap_err().field, "tremor_freq");
    }
}
