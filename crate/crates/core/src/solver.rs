//! Newton's method on the concave potential `W_α`, and the existence
//! conditions under which a solution is guaranteed.

use std::f64::consts::PI;
use std::fmt::{self, Write as _};

use nalgebra::{Cholesky, DMatrix, DVector};
use thiserror::Error;

use crate::curvature::{potential_diff, potential_grad, potential_hessian, CurvatureError, PotentialError, Quadrature};
use crate::delaunay::{DelaunayError, FlipEvent, SurgeryState, DEFAULT_TOLERANCE};
use crate::metric::ConformalClass;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolveError {
    #[error("target curvature R[{0}] = {1} is not below 2π")]
    TargetOutOfRange(usize, f64),
    #[error("Hessian is not negative definite at iteration {0}")]
    SingularHessian(usize),
    #[error("line search found no ascent at iteration {0}")]
    LineSearchFailed(usize),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Delaunay(#[from] DelaunayError),
    #[error(transparent)]
    Curvature(#[from] CurvatureError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ExistenceCase {
    /// `α < 0`, `χ < 0`, `R̄ ≤ 0`.
    I,
    /// `α > 0`, `R̄ > 0`.
    II,
    /// `α = 0`, `Σ R̄ > 2πχ`.
    III,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Verdict {
    Guaranteed(ExistenceCase),
    NotGuaranteed,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Verdict::Guaranteed(ExistenceCase::I) => f.write_str("existence guaranteed (alpha < 0, chi < 0, target <= 0)"),
            Verdict::Guaranteed(ExistenceCase::II) => f.write_str("existence guaranteed (alpha > 0, target > 0)"),
            Verdict::Guaranteed(ExistenceCase::III) => f.write_str("existence guaranteed (alpha = 0, sum of target > 2 pi chi)"),
            Verdict::NotGuaranteed => f.write_str("no sufficient existence condition holds"),
        }
    }
}

pub fn existence_precheck(chi: i64, alpha: f64, target: &[f64]) -> Result<Verdict, SolveError> {
    if let Some(i) = target.iter().position(|&r| !(r < 2.0 * PI)) {
        return Err(SolveError::TargetOutOfRange(i, target[i]));
    }
    let verdict = if alpha < 0.0 && chi < 0 && target.iter().all(|&r| r <= 0.0) {
        Verdict::Guaranteed(ExistenceCase::I)
    } else if alpha > 0.0 && target.iter().all(|&r| r > 0.0) {
        Verdict::Guaranteed(ExistenceCase::II)
    } else if alpha == 0.0 && target.iter().sum::<f64>() > 2.0 * PI * chi as f64 {
        Verdict::Guaranteed(ExistenceCase::III)
    } else {
        Verdict::NotGuaranteed
    };
    Ok(verdict)
}

#[derive(Clone, Debug, PartialEq)]
pub struct SolveConfig {
    pub alpha: f64,
    pub target: Vec<f64>,
    /// Stop once `‖∇W_α‖_∞` is below this.
    pub grad_tol: f64,
    pub max_iter: usize,
    pub backtrack: f64,
    /// Sufficient-increase constant of the Armijo condition.
    pub armijo: f64,
    pub h_floor: f64,
    pub delaunay_tol: f64,
}

impl SolveConfig {
    pub fn new(alpha: f64, target: Vec<f64>) -> Self {
        SolveConfig {
            alpha,
            target,
            grad_tol: 1e-11,
            max_iter: 100,
            backtrack: 0.5,
            armijo: 1e-4,
            h_floor: 1e-8,
            delaunay_tol: DEFAULT_TOLERANCE,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct IterationRecord {
    pub iter: usize,
    pub grad_inf: f64,
    pub step: f64,
    pub w_increment: f64,
    pub flips: usize,
    /// Gradient ascent was used because the Hessian was not definite.
    pub gradient_step: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub enum SolveStatus {
    Converged,
    MaxIterations,
}

#[derive(Clone, Debug)]
pub struct SolveOutcome {
    pub h: Vec<f64>,
    pub class: ConformalClass,
    pub iterations: usize,
    pub status: SolveStatus,
    pub log: Vec<IterationRecord>,
    pub flips: Vec<FlipEvent>,
}

impl SolveOutcome {
    /// CSV with columns `iter, grad_inf, step, dW, flips`.
    pub fn log_csv(&self) -> String {
        let mut out = String::from("iter,grad_inf,step,dW,flips\n");
        for r in &self.log {
            writeln!(
                out,
                "{},{:.16e},{:.16e},{:.16e},{}",
                r.iter, r.grad_inf, r.step, r.w_increment, r.flips
            )
            .unwrap();
        }
        out
    }
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Maximizes `W_α` by Newton steps with backtracking, retriangulating
/// after every accepted iterate.
pub fn newton_solve(class: &ConformalClass, h0: &[f64], config: &SolveConfig) -> Result<SolveOutcome, SolveError> {
    let n = class.num_vertices();
    if config.target.len() != n || h0.len() != n {
        return Err(SolveError::Config(format!("expected {n} entries in target and start")));
    }
    if !(config.backtrack > 0.0 && config.backtrack < 1.0) || !(config.grad_tol > 0.0) {
        return Err(SolveError::Config("need 0 < backtrack < 1 and grad_tol > 0".into()));
    }
    if let Some(i) = config.target.iter().position(|&r| !(r < 2.0 * PI)) {
        return Err(SolveError::TargetOutOfRange(i, config.target[i]));
    }
    let definite_regime = config.target.iter().all(|&r| config.alpha * r >= 0.0);
    let (alpha, target) = (config.alpha, &config.target);
    let mut state = SurgeryState::new(class.clone(), h0.to_vec(), config.delaunay_tol)?;
    let mut log = Vec::new();
    let mut flips = Vec::new();

    for iter in 0..config.max_iter {
        let h = state.h().to_vec();
        let g = potential_grad(state.class(), &h, alpha, target)?;
        let grad_inf = inf_norm(&g);
        if grad_inf < config.grad_tol {
            return Ok(SolveOutcome {
                h,
                class: state.into_class(),
                iterations: iter,
                status: SolveStatus::Converged,
                log,
                flips,
            });
        }
        let hess = potential_hessian(state.class(), &h, alpha, target)?;
        let gv = DVector::from_column_slice(&g);
        let (dir, gradient_step) = match Cholesky::new(-hess) {
            Some(chol) => (chol.solve(&gv), false),
            None if definite_regime => return Err(SolveError::SingularHessian(iter)),
            None => (gv.clone(), true),
        };
        let slope = gv.dot(&dir);

        // keep every coordinate above the floor
        let mut step: f64 = 1.0;
        for (hi, di) in h.iter().zip(dir.iter()) {
            if hi + step * di < config.h_floor.max(0.5 * hi) {
                step = step.min((0.5 * hi).max(hi - config.h_floor) / -di);
            }
        }

        let mut accepted = None;
        for _ in 0..60 {
            let trial: Vec<f64> = h.iter().zip(dir.iter()).map(|(a, d)| a + step * d).collect();
            let dw = potential_diff(state.class(), &h, &trial, alpha, target, Quadrature::default());
            match dw {
                Ok(dw) if dw >= config.armijo * step * slope - 1e-12 * (1.0 + dw.abs()) => {
                    accepted = Some((trial, dw));
                    break;
                }
                Ok(_) | Err(PotentialError::Curvature(_)) | Err(PotentialError::Delaunay(_)) => {
                    step *= config.backtrack;
                }
                Err(PotentialError::QuadratureNotConverged(..)) => step *= config.backtrack,
            }
        }
        let Some((trial, dw)) = accepted else {
            return Err(SolveError::LineSearchFailed(iter));
        };
        let events = state.advance_to(&trial)?;
        log.push(IterationRecord {
            iter,
            grad_inf,
            step,
            w_increment: dw,
            flips: events.len(),
            gradient_step,
        });
        flips.extend(events);
    }
    let h = state.h().to_vec();
    let g = potential_grad(state.class(), &h, alpha, target)?;
    let status = if inf_norm(&g) < config.grad_tol {
        SolveStatus::Converged
    } else {
        SolveStatus::MaxIterations
    };
    Ok(SolveOutcome {
        h,
        class: state.into_class(),
        iterations: config.max_iter,
        status,
        log,
        flips,
    })
}

/// Checks a dense symmetric matrix for negative definiteness via Cholesky.
pub fn is_negative_definite(m: &DMatrix<f64>) -> bool {
    Cholesky::new(-m.clone()).is_some()
}
