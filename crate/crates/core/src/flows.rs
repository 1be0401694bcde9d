//! The combinatorial α-Ricci and α-Calabi flows with surgery.
//!
//! Ricci: `dh/dt = R_α - R̄`. Calabi: `dh/dt = Δ_α(R̄ - R_α)`.
//!
//! Right-hand sides are evaluated on the extended curvature: every stage
//! point of the integrator is reached from the current state by following
//! the segment through the weighted Delaunay walls it crosses. After an
//! accepted step the state itself is moved the same way, which is where the
//! recorded flips happen.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::curvature::{
    alpha_curvature, angle_defect, jacobian, laplace_apply, potential_diff, potential_diff_fixed,
    CurvatureError,
    PotentialError, Quadrature,
};
use crate::delaunay::{
    is_weighted_delaunay, DelaunayError, FlipEvent, SurgeryState, DEFAULT_TOLERANCE,
};
use crate::metric::ConformalClass;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FlowKind {
    Ricci,
    Calabi,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stepper {
    Euler,
    Rk4,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FlowError {
    #[error("step size fell below {0} without producing a valid state")]
    StepUnderflow(f64),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Delaunay(#[from] DelaunayError),
    #[error(transparent)]
    Curvature(#[from] CurvatureError),
    #[error(transparent)]
    Potential(#[from] PotentialError),
}

#[derive(Clone, Debug, PartialEq)]
pub struct FlowConfig {
    pub alpha: f64,
    pub target: Vec<f64>,
    pub stepper: Stepper,
    /// Initial step size.
    pub dt: f64,
    pub dt_min: f64,
    pub dt_max: f64,
    /// Step-doubling error control (RK4 only). Without it the step is fixed
    /// except for halving on degeneracy.
    pub adaptive: bool,
    /// Allowed local error per step relative to the size of the step,
    /// both in the sup-norm on `h`.
    pub step_tol: f64,
    /// Absolute floor of the allowed local error.
    pub step_atol: f64,
    /// Stop once `‖R_α - R̄‖_∞ < eps`.
    pub eps: f64,
    pub max_steps: usize,
    pub max_time: f64,
    /// With surgery disabled the triangulation stays fixed and Delaunay
    /// violations are only counted.
    pub surgery: bool,
    pub delaunay_tol: f64,
    /// Evaluate the `W_α` increment of every step.
    pub track_potential: bool,
}

impl FlowConfig {
    pub fn new(alpha: f64, target: Vec<f64>) -> Self {
        FlowConfig {
            alpha,
            target,
            stepper: Stepper::Rk4,
            dt: 0.05,
            dt_min: 1e-12,
            dt_max: 10.0,
            adaptive: true,
            step_tol: 1e-4,
            step_atol: 1e-15,
            eps: 1e-10,
            max_steps: 1_000_000,
            max_time: f64::INFINITY,
            surgery: true,
            delaunay_tol: DEFAULT_TOLERANCE,
            track_potential: true,
        }
    }

    fn check(&self, n: usize) -> Result<(), FlowError> {
        let bad = |m: &str| Err(FlowError::Config(m.to_string()));
        if self.target.len() != n {
            return bad(&format!("target has {} entries for {n} vertices", self.target.len()));
        }
        if !(self.dt > 0.0) {
            return bad("dt must be positive");
        }
        if !(self.eps > 0.0) {
            return bad("eps must be positive");
        }
        if !(self.dt_min > 0.0 && self.dt_min <= self.dt) {
            return bad("dt_min must be positive and at most dt");
        }
        Ok(())
    }
}

/// One accepted step.
#[derive(Clone, Debug, PartialEq)]
pub struct TraceRecord {
    pub t: f64,
    pub dt: f64,
    pub h: Vec<f64>,
    pub r_alpha: Vec<f64>,
    pub sup_err: f64,
    /// `W_α(h(t)) - W_α(h(0))`.
    pub w_increment: f64,
    /// `W_α` increment of this step alone.
    pub w_step: f64,
    pub flips: usize,
    /// Delaunay violations of the fixed triangulation, without surgery.
    pub violations: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimedFlip {
    pub t: f64,
    #[serde(flatten)]
    pub event: FlipEvent,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct FlowTrace {
    pub records: Vec<TraceRecord>,
    pub flips: Vec<TimedFlip>,
    pub rejected_steps: usize,
}

impl FlowTrace {
    pub fn min_h(&self) -> f64 {
        self.records
            .iter()
            .flat_map(|r| r.h.iter().copied())
            .fold(f64::INFINITY, f64::min)
    }

    pub fn total_violations(&self) -> usize {
        self.records.iter().map(|r| r.violations).sum()
    }

    /// CSV with columns `t, h_1..h_N, Rα_1..Rα_N, sup_err, dW, flips`.
    pub fn to_csv(&self) -> String {
        let n = self.records.first().map_or(0, |r| r.h.len());
        let mut out = String::from("t");
        for i in 1..=n {
            write!(out, ",h_{i}").unwrap();
        }
        for i in 1..=n {
            write!(out, ",Ralpha_{i}").unwrap();
        }
        out.push_str(",sup_err,dW,flips\n");
        for r in &self.records {
            write!(out, "{:.16e}", r.t).unwrap();
            for v in r.h.iter().chain(&r.r_alpha) {
                write!(out, ",{v:.16e}").unwrap();
            }
            writeln!(out, ",{:.16e},{:.16e},{}", r.sup_err, r.w_increment, r.flips).unwrap();
        }
        out
    }

    /// One JSON object per line.
    pub fn flip_log_jsonl(&self) -> String {
        self.flips
            .iter()
            .map(|f| serde_json::to_string(f).expect("flip events serialize") + "\n")
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum FlowStatus {
    Converged,
    MaxSteps,
    MaxTime,
    Failed(String),
}

#[derive(Clone, Debug)]
pub struct FlowOutcome {
    pub h: Vec<f64>,
    pub class: ConformalClass,
    pub trace: FlowTrace,
    pub status: FlowStatus,
}

/// Snapshot of a flow: the surface and factor, always weighted Delaunay
/// when surgery is on.
#[derive(Clone, Debug)]
pub struct FlowState {
    pub surgery: SurgeryState,
    pub t: f64,
}

impl FlowState {
    pub fn new(class: ConformalClass, h: Vec<f64>, config: &FlowConfig) -> Result<Self, FlowError> {
        let surgery = if config.surgery {
            SurgeryState::new(class, h, config.delaunay_tol)?.with_samples(1)
        } else {
            SurgeryState::from_delaunay(class, h, config.delaunay_tol)
        };
        Ok(FlowState { surgery, t: 0.0 })
    }

    pub fn h(&self) -> &[f64] {
        self.surgery.h()
    }

    pub fn class(&self) -> &ConformalClass {
        self.surgery.class()
    }
}

/// `R_α - R̄` on the given (Delaunay) triangulation.
pub fn ricci_rhs(class: &ConformalClass, h: &[f64], alpha: f64, target: &[f64]) -> Result<Vec<f64>, CurvatureError> {
    let r = alpha_curvature(&angle_defect(class, h)?, h, alpha);
    Ok(r.iter().zip(target).map(|(a, b)| a - b).collect())
}

/// `Δ_α(R̄ - R_α)` on the given (Delaunay) triangulation.
pub fn calabi_rhs(class: &ConformalClass, h: &[f64], alpha: f64, target: &[f64]) -> Result<Vec<f64>, CurvatureError> {
    let r = alpha_curvature(&angle_defect(class, h)?, h, alpha);
    let f: Vec<f64> = target.iter().zip(&r).map(|(a, b)| a - b).collect();
    Ok(laplace_apply(&jacobian(class, h)?, h, alpha, &f))
}

fn rhs(kind: FlowKind, class: &ConformalClass, h: &[f64], config: &FlowConfig) -> Result<Vec<f64>, CurvatureError> {
    match kind {
        FlowKind::Ricci => ricci_rhs(class, h, config.alpha, &config.target),
        FlowKind::Calabi => calabi_rhs(class, h, config.alpha, &config.target),
    }
}

/// Right-hand side at `y`, reached from the current state by surgery.
fn rhs_at(state: &FlowState, y: &[f64], kind: FlowKind, config: &FlowConfig) -> Result<Vec<f64>, FlowError> {
    if y.iter().any(|&v| !(v > 0.0)) {
        return Err(FlowError::StepUnderflow(0.0));
    }
    if !config.surgery || y == state.h() {
        return Ok(rhs(kind, state.class(), y, config)?);
    }
    let mut probe = state.surgery.clone();
    probe.advance_to(y)?;
    Ok(rhs(kind, probe.class(), y, config)?)
}

fn axpy(y: &[f64], a: f64, k: &[f64]) -> Vec<f64> {
    y.iter().zip(k).map(|(yi, ki)| yi + a * ki).collect()
}

fn rk4(state: &FlowState, y0: &[f64], k1: &[f64], dt: f64, kind: FlowKind, config: &FlowConfig) -> Result<Vec<f64>, FlowError> {
    let k2 = rhs_at(state, &axpy(y0, 0.5 * dt, k1), kind, config)?;
    let k3 = rhs_at(state, &axpy(y0, 0.5 * dt, &k2), kind, config)?;
    let k4 = rhs_at(state, &axpy(y0, dt, &k3), kind, config)?;
    Ok(y0
        .iter()
        .enumerate()
        .map(|(i, y)| y + dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
        .collect())
}

/// Result of one attempted step.
struct Proposal {
    h: Vec<f64>,
    dt_used: f64,
    dt_next: f64,
}

fn propose(state: &FlowState, dt: f64, kind: FlowKind, config: &FlowConfig) -> Result<Proposal, FlowError> {
    let y0 = state.h().to_vec();
    let k1 = rhs_at(state, &y0, kind, config)?;
    match config.stepper {
        Stepper::Euler => Ok(Proposal {
            h: axpy(&y0, dt, &k1),
            dt_used: dt,
            dt_next: dt,
        }),
        Stepper::Rk4 if !config.adaptive => Ok(Proposal {
            h: rk4(state, &y0, &k1, dt, kind, config)?,
            dt_used: dt,
            dt_next: dt,
        }),
        Stepper::Rk4 => {
            let full = rk4(state, &y0, &k1, dt, kind, config)?;
            let mid = rk4(state, &y0, &k1, 0.5 * dt, kind, config)?;
            let mut half = state.clone();
            if config.surgery {
                half.surgery.advance_to(&mid)?;
            } else {
                half.surgery = SurgeryState::from_delaunay(state.class().clone(), mid.clone(), config.delaunay_tol);
            }
            let km = rhs_at(&half, &mid, kind, config)?;
            let two = rk4(&half, &mid, &km, 0.5 * dt, kind, config)?;
            let err = two
                .iter()
                .zip(&full)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max)
                / 15.0;
            let displacement = sup_distance(&two, &y0);
            let tol = config.step_tol * displacement + config.step_atol;
            let factor = if err == 0.0 {
                4.0
            } else {
                (0.9 * (tol / err).powf(0.2)).clamp(0.2, 4.0)
            };
            if err > tol {
                return Ok(Proposal {
                    h: Vec::new(),
                    dt_used: 0.0,
                    dt_next: dt * factor.min(0.9),
                });
            }
            let h = two
                .iter()
                .zip(&full)
                .map(|(a, b)| a + (a - b) / 15.0)
                .collect();
            Ok(Proposal {
                h,
                dt_used: dt,
                dt_next: (dt * factor).min(config.dt_max),
            })
        }
    }
}

/// Advances one accepted step, halving the step on degeneracy. Returns the
/// record for the new state and the step size to try next.
pub fn step_with_surgery(
    state: &mut FlowState,
    dt: f64,
    kind: FlowKind,
    config: &FlowConfig,
    trace: &mut FlowTrace,
) -> Result<(TraceRecord, f64), FlowError> {
    let mut dt = dt;
    while dt >= config.dt_min {
        match try_step(state, dt, kind, config) {
            Ok(Attempt::Accepted {
                next,
                record,
                flips,
                dt_next,
            }) => {
                *state = *next;
                trace
                    .flips
                    .extend(flips.into_iter().map(|event| TimedFlip { t: record.t, event }));
                return Ok((record, dt_next));
            }
            Ok(Attempt::Rejected { dt_next }) => {
                trace.rejected_steps += 1;
                dt = dt_next;
            }
            Err(FlowError::Config(m)) => return Err(FlowError::Config(m)),
            Err(_) => {
                trace.rejected_steps += 1;
                dt *= 0.5;
            }
        }
    }
    Err(FlowError::StepUnderflow(config.dt_min))
}

enum Attempt {
    Accepted {
        next: Box<FlowState>,
        record: TraceRecord,
        flips: Vec<FlipEvent>,
        dt_next: f64,
    },
    Rejected {
        dt_next: f64,
    },
}

fn try_step(state: &FlowState, dt: f64, kind: FlowKind, config: &FlowConfig) -> Result<Attempt, FlowError> {
    let p = propose(state, dt, kind, config)?;
    if p.h.is_empty() {
        return Ok(Attempt::Rejected { dt_next: p.dt_next });
    }
    if p.h.iter().any(|&v| !(v > 0.0)) {
        return Err(FlowError::StepUnderflow(dt));
    }
    let mut next = state.clone();
    let w_step = match (config.track_potential, config.surgery) {
        (false, _) => 0.0,
        (true, true) => potential_diff(state.class(), state.h(), &p.h, config.alpha, &config.target, Quadrature::default())?,
        (true, false) => {
            potential_diff_fixed(state.class(), state.h(), &p.h, config.alpha, &config.target, Quadrature::default())?
        }
    };
    let (flips, violations) = if config.surgery {
        (next.surgery.advance_to(&p.h)?, 0)
    } else {
        let report = is_weighted_delaunay(state.class(), &p.h, config.delaunay_tol)?;
        next.surgery = SurgeryState::from_delaunay(state.class().clone(), p.h.clone(), config.delaunay_tol);
        (Vec::new(), report.violations.len())
    };
    next.t = state.t + p.dt_used;
    let k = angle_defect(next.class(), &p.h)?;
    let r_alpha = alpha_curvature(&k, &p.h, config.alpha);
    let sup_err = sup_distance(&r_alpha, &config.target);
    let record = TraceRecord {
        t: next.t,
        dt: p.dt_used,
        h: p.h,
        r_alpha,
        sup_err,
        w_increment: 0.0,
        w_step,
        flips: flips.len(),
        violations,
    };
    Ok(Attempt::Accepted {
        next: Box::new(next),
        record,
        flips,
        dt_next: p.dt_next,
    })
}

fn sup_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Runs a flow from `h0` until `‖R_α - R̄‖_∞ < eps` or a limit is hit.
pub fn run_flow(
    class: &ConformalClass,
    h0: &[f64],
    config: &FlowConfig,
    kind: FlowKind,
) -> Result<FlowOutcome, FlowError> {
    config.check(class.num_vertices())?;
    let mut state = FlowState::new(class.clone(), h0.to_vec(), config)?;
    let mut trace = FlowTrace::default();

    let k = angle_defect(state.class(), state.h())?;
    let r_alpha = alpha_curvature(&k, state.h(), config.alpha);
    let sup_err = sup_distance(&r_alpha, &config.target);
    let violations = if config.surgery {
        0
    } else {
        is_weighted_delaunay(state.class(), state.h(), config.delaunay_tol)?
            .violations
            .len()
    };
    trace.records.push(TraceRecord {
        t: 0.0,
        dt: 0.0,
        h: h0.to_vec(),
        r_alpha,
        sup_err,
        w_increment: 0.0,
        w_step: 0.0,
        flips: 0,
        violations,
    });

    let mut dt = config.dt;
    let mut status = FlowStatus::MaxSteps;
    let mut w_total = 0.0;
    if sup_err < config.eps {
        status = FlowStatus::Converged;
    } else {
        for _ in 0..config.max_steps {
            if state.t >= config.max_time {
                status = FlowStatus::MaxTime;
                break;
            }
            let step = dt.min(config.max_time - state.t).max(config.dt_min);
            let (mut record, next_dt) = match step_with_surgery(&mut state, step, kind, config, &mut trace) {
                Ok(r) => r,
                Err(e) => {
                    status = FlowStatus::Failed(e.to_string());
                    break;
                }
            };
            dt = next_dt;
            w_total += record.w_step;
            record.w_increment = w_total;
            let done = record.sup_err < config.eps;
            trace.records.push(record);
            if done {
                status = FlowStatus::Converged;
                break;
            }
        }
    }
    Ok(FlowOutcome {
        h: state.h().to_vec(),
        class: state.surgery.into_class(),
        trace,
        status,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Sign {
    NonNegative,
    NonPositive,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MaxPrincipleReport {
    /// `None` when `M_α(0)` has mixed signs.
    pub sign: Option<Sign>,
    /// Smallest and largest entry of `M_α = R_α - R̄` over the trace.
    pub min: f64,
    pub max: f64,
    /// `(t, vertex, value)` for entries on the wrong side beyond the tolerance.
    pub violations: Vec<(f64, usize, f64)>,
}

impl MaxPrincipleReport {
    pub fn holds(&self) -> bool {
        self.sign.is_some() && self.violations.is_empty()
    }
}

/// Checks that a sign of `M_α = R_α - R̄` present at time zero persists
/// along a Ricci trace.
pub fn monitor_max_principle(trace: &FlowTrace, target: &[f64], tol: f64) -> MaxPrincipleReport {
    let m = |r: &TraceRecord| -> Vec<f64> { r.r_alpha.iter().zip(target).map(|(a, b)| a - b).collect() };
    let first = trace.records.first().map(m).unwrap_or_default();
    let sign = if first.iter().all(|&v| v >= 0.0) {
        Some(Sign::NonNegative)
    } else if first.iter().all(|&v| v <= 0.0) {
        Some(Sign::NonPositive)
    } else {
        None
    };
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    let mut violations = Vec::new();
    for r in &trace.records {
        for (i, v) in m(r).into_iter().enumerate() {
            lo = lo.min(v);
            hi = hi.max(v);
            let wrong = match sign {
                Some(Sign::NonNegative) => v < -tol,
                Some(Sign::NonPositive) => v > tol,
                None => false,
            };
            if wrong {
                violations.push((r.t, i, v));
            }
        }
    }
    MaxPrincipleReport {
        sign,
        min: lo,
        max: hi,
        violations,
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PotentialReport {
    pub min_step_increment: f64,
    /// `C` in the per-step allowance `1e-12 + C Δt²`.
    pub constant: f64,
    /// `(t, increment, allowance)` for steps that lost more than allowed.
    pub violations: Vec<(f64, f64, f64)>,
}

impl PotentialReport {
    pub fn holds(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Checks that `W_α` does not decrease along the trace beyond the stepper
/// error. The allowance per step is `1e-12 + C Δt²`, where `C` is the
/// largest observed rate `ΔW / Δt`.
pub fn monitor_potential(trace: &FlowTrace) -> PotentialReport {
    let steps = trace.records.iter().skip(1);
    let constant = steps
        .clone()
        .filter(|r| r.dt > 0.0)
        .map(|r| r.w_step.abs() / r.dt)
        .fold(0.0, f64::max);
    let mut min_step_increment = f64::INFINITY;
    let mut violations = Vec::new();
    for r in steps {
        min_step_increment = min_step_increment.min(r.w_step);
        let allowance = 1e-12 + constant * r.dt * r.dt;
        if r.w_step < -allowance {
            violations.push((r.t, r.w_step, allowance));
        }
    }
    PotentialReport {
        min_step_increment,
        constant,
        violations,
    }
}
