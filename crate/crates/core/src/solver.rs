//! Full-batch gradient descent on the tilted objective and warm-started
//! sweeps over a grid of tilts.

use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::loss_core::TiltParam;
use crate::models::{mean_objective_and_grad, tilted_objective_and_grad, ModelSpec, ParamVector};

/// Objective values above this are treated as divergence.
pub const DIVERGENCE_THRESHOLD: f64 = 1e12;

const MIN_STEP: f64 = 1e-30;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "kebab-case")]
pub enum StepRule {
    /// Constant step `1 / (c_max + 2 c lambda)` for losses with squared
    /// gradient norm at most `c` and Hessian between `c_min` and `c_max`.
    FixedStep { c: f64, c_min: f64, c_max: f64 },
    /// Armijo backtracking from a Barzilai-Borwein trial step.
    Backtracking { shrink: f64, armijo: f64 },
}

impl Default for StepRule {
    fn default() -> Self {
        StepRule::Backtracking {
            shrink: 0.5,
            armijo: 1e-4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub step_rule: StepRule,
    pub max_iters: usize,
    pub grad_tol: f64,
    pub seed: u64,
    /// Initialize a sweep from the mean-loss minimizer instead of the seeded
    /// random point.
    #[serde(default)]
    pub start_from_utilitarian: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            step_rule: StepRule::default(),
            max_iters: 20_000,
            grad_tol: 1e-8,
            seed: 0,
            start_from_utilitarian: false,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_iters == 0 {
            return Err(Error::InvalidParameter(
                "max_iters must be at least 1".into(),
            ));
        }
        if self.grad_tol.is_nan() || self.grad_tol <= 0.0 {
            return Err(Error::InvalidParameter("grad_tol must be positive".into()));
        }
        match self.step_rule {
            StepRule::FixedStep { c, c_min, c_max } => {
                if !(c > 0.0 && c_min > 0.0 && c_max > 0.0 && c_min <= c_max) {
                    return Err(Error::InvalidParameter(format!(
                        "curvature constants must satisfy c > 0 and 0 < c_min <= c_max, got c={c}, c_min={c_min}, c_max={c_max}"
                    )));
                }
            }
            StepRule::Backtracking { shrink, armijo } => {
                if !(shrink > 0.0 && shrink < 1.0 && armijo > 0.0 && armijo < 1.0) {
                    return Err(Error::InvalidParameter(
                        "backtracking needs shrink and armijo in (0, 1)".into(),
                    ));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub theta_hat: ParamVector,
    pub objective: f64,
    pub grad_norm: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Objective at every iterate, starting with the initial point.
    pub objective_trace: Vec<f64>,
    /// The solve stopped on a non-finite or exploding objective.
    #[serde(default)]
    pub diverged: bool,
}

/// `1 / (c_max + 2 c lambda)`.
pub fn fixed_step_size(c: f64, c_max: f64, lambda: f64) -> Result<f64> {
    if !(c > 0.0 && c_max > 0.0 && lambda > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "step size needs positive c, c_max and lambda, got {c}, {c_max}, {lambda}"
        )));
    }
    Ok(1.0 / (c_max + 2.0 * c * lambda))
}

/// Guaranteed per-iteration contraction `1 - c_min / (c_max + 2 c lambda)`.
pub fn fixed_step_contraction(c: f64, c_min: f64, c_max: f64, lambda: f64) -> Result<f64> {
    Ok(1.0 - c_min * fixed_step_size(c, c_max, lambda)?)
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn check_value(value: f64, iteration: usize, theta: &[f64]) -> Result<()> {
    if !value.is_finite() || value > DIVERGENCE_THRESHOLD {
        return Err(Error::Divergence {
            iteration,
            objective: value,
            theta: theta.to_vec(),
        });
    }
    Ok(())
}

/// Gradient descent on an arbitrary smooth objective returning
/// `(value, gradient)`.
///
/// `lambda` only feeds the fixed step rule; pass the tilt being solved.
pub fn minimize_fn<F>(
    mut objective: F,
    init: &[f64],
    lambda: f64,
    config: &SolverConfig,
) -> Result<SolveReport>
where
    F: FnMut(&[f64]) -> Result<(f64, Vec<f64>)>,
{
    config.validate()?;
    if let Some(i) = init.iter().position(|v| !v.is_finite()) {
        return Err(Error::InvalidInput(format!(
            "initial parameter {i} is not finite"
        )));
    }
    let mut theta = init.to_vec();
    let (mut value, mut grad) = objective(&theta)?;
    check_value(value, 0, &theta)?;
    let mut trace = vec![value];
    let mut grad_norm = norm(&grad);
    let mut iterations = 0;
    // previous step and gradient change, for the Barzilai-Borwein trial step
    let mut last: Option<(Vec<f64>, Vec<f64>)> = None;
    let mut last_step = 1.0;

    while grad_norm > config.grad_tol && iterations < config.max_iters {
        let (next, next_value, next_grad) = match config.step_rule {
            StepRule::FixedStep { c, c_max, .. } => {
                let alpha = fixed_step_size(c, c_max, lambda)?;
                let next: Vec<f64> = theta
                    .iter()
                    .zip(&grad)
                    .map(|(t, g)| t - alpha * g)
                    .collect();
                let (v, g) = objective(&next)?;
                (next, v, g)
            }
            StepRule::Backtracking { shrink, armijo } => {
                let mut step = match &last {
                    Some((s, y)) => {
                        let sy = dot(s, y);
                        if sy > 0.0 {
                            dot(s, s) / sy
                        } else {
                            last_step / shrink
                        }
                    }
                    None => 1.0 / grad_norm.max(1.0),
                };
                let slope = grad_norm * grad_norm;
                // tolerate rounding-level increases once the decrease is below resolution
                let noise = 8.0 * f64::EPSILON * value.abs();
                loop {
                    let next: Vec<f64> =
                        theta.iter().zip(&grad).map(|(t, g)| t - step * g).collect();
                    let (v, g) = objective(&next)?;
                    if v.is_finite() && v <= value - armijo * step * slope + noise {
                        last_step = step;
                        break (next, v, g);
                    }
                    step *= shrink;
                    if step < MIN_STEP {
                        // no representable decrease along the gradient
                        return Ok(SolveReport {
                            theta_hat: ParamVector::new(theta)?,
                            objective: value,
                            grad_norm,
                            iterations,
                            converged: false,
                            objective_trace: trace,
                            diverged: false,
                        });
                    }
                }
            }
        };
        iterations += 1;
        check_value(next_value, iterations, &next)?;
        let s: Vec<f64> = next.iter().zip(&theta).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = next_grad.iter().zip(&grad).map(|(a, b)| a - b).collect();
        last = Some((s, y));
        theta = next;
        value = next_value;
        grad = next_grad;
        grad_norm = norm(&grad);
        trace.push(value);
    }

    Ok(SolveReport {
        theta_hat: ParamVector::new(theta)?,
        objective: value,
        grad_norm,
        iterations,
        converged: grad_norm <= config.grad_tol,
        objective_trace: trace,
        diverged: false,
    })
}

fn check_init(spec: &ModelSpec, init: &ParamVector) -> Result<()> {
    spec.validate()?;
    if init.len() != spec.param_count() {
        return Err(Error::DimensionMismatch {
            expected: spec.param_count(),
            found: init.len(),
        });
    }
    Ok(())
}

/// Minimizes the tilted objective of `spec` on `dataset`.
pub fn minimize(
    spec: &ModelSpec,
    dataset: &Dataset,
    tilt: TiltParam,
    config: &SolverConfig,
    init: &ParamVector,
) -> Result<SolveReport> {
    check_init(spec, init)?;
    minimize_fn(
        |theta| tilted_objective_and_grad(spec, theta, dataset, tilt),
        init.as_slice(),
        tilt.value(),
        config,
    )
}

/// Minimizes the mean loss. Always uses backtracking since the fixed step
/// rule is stated for a positive tilt.
pub fn minimize_mean(
    spec: &ModelSpec,
    dataset: &Dataset,
    config: &SolverConfig,
    init: &ParamVector,
) -> Result<SolveReport> {
    check_init(spec, init)?;
    let config = SolverConfig {
        step_rule: StepRule::default(),
        ..config.clone()
    };
    minimize_fn(
        |theta| mean_objective_and_grad(spec, theta, dataset),
        init.as_slice(),
        1.0,
        &config,
    )
}

/// Solves over an ascending tilt grid, warm-starting every solve from the
/// previous minimizer. A failed solve is recorded as not converged and the
/// sweep carries on from the last good point.
pub fn sweep(
    spec: &ModelSpec,
    dataset: &Dataset,
    lambda_grid: &[f64],
    config: &SolverConfig,
) -> Result<Vec<SolveReport>> {
    let tilts = ascending_grid(lambda_grid)?;
    config.validate()?;
    spec.validate()?;

    let mut start = spec.init_params(config.seed);
    if config.start_from_utilitarian {
        if let Ok(report) = minimize_mean(spec, dataset, config, &start) {
            start = report.theta_hat;
        }
    }

    let mut reports = Vec::with_capacity(tilts.len());
    for tilt in tilts {
        match minimize(spec, dataset, tilt, config, &start) {
            Ok(report) => {
                start = report.theta_hat.clone();
                reports.push(report);
            }
            Err(Error::Divergence {
                iteration,
                objective,
                ..
            }) => {
                reports.push(SolveReport {
                    theta_hat: start.clone(),
                    objective,
                    grad_norm: f64::NAN,
                    iterations: iteration,
                    converged: false,
                    objective_trace: Vec::new(),
                    diverged: true,
                });
            }
            Err(e) => return Err(e),
        }
    }
    Ok(reports)
}

/// Validates a strictly ascending grid of positive tilts.
pub fn ascending_grid(lambda_grid: &[f64]) -> Result<Vec<TiltParam>> {
    if lambda_grid.is_empty() {
        return Err(Error::InvalidParameter("lambda grid is empty".into()));
    }
    if lambda_grid
        .windows(2)
        .any(|w| w[0].partial_cmp(&w[1]) != Some(std::cmp::Ordering::Less))
    {
        return Err(Error::InvalidParameter(
            "lambda grid must be strictly ascending".into(),
        ));
    }
    lambda_grid.iter().map(|&l| TiltParam::new(l)).collect()
}

/// `count` points spaced geometrically on `[min, max]`.
pub fn geometric_grid(min: f64, max: f64, count: usize) -> Result<Vec<f64>> {
    if !(min > 0.0 && max >= min && min.is_finite() && max.is_finite()) || count == 0 {
        return Err(Error::InvalidParameter(format!(
            "geometric grid needs 0 < min <= max and count >= 1, got [{min}, {max}] x {count}"
        )));
    }
    if count == 1 {
        return Ok(vec![min]);
    }
    let (lo, hi) = (min.ln(), max.ln());
    let mut grid: Vec<f64> = (0..count)
        .map(|k| (lo + (hi - lo) * k as f64 / (count - 1) as f64).exp())
        .collect();
    grid[0] = min;
    grid[count - 1] = max;
    Ok(grid)
}

/// Default grid: 25 geometric points on `[1e-3, 1e2]`.
pub fn default_grid() -> Vec<f64> {
    geometric_grid(1e-3, 1e2, 25).expect("valid default grid")
}
