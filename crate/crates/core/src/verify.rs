//! Numerical checks of the tilted objective's theoretical properties.
//!
//! Each check compares the solver or objective against an oracle that does
//! not go through the code path being checked: closed-form least squares,
//! grid search, direct exponentiation, or Monte Carlo averages.

use serde::{Deserialize, Serialize};

use crate::data::{generate, Dataset, Noise, SyntheticConfig, SyntheticKind};
use crate::error::{Error, Result};
use crate::loss_core::{decompose, penalized_value, tilted_value, LossProfile, TiltParam};
use crate::models::{
    loss_profile, per_sample_loss, tilted_objective_and_grad, ModelSpec, ParamVector,
};
use crate::solver::{
    fixed_step_contraction, minimize, minimize_fn, minimize_mean, SolverConfig, StepRule,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CheckStatus {
    Pass,
    Fail,
    Inconclusive,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckReport {
    pub check_id: String,
    pub status: CheckStatus,
    pub passed: bool,
    pub measured: Vec<f64>,
    pub threshold: Vec<f64>,
    pub details: String,
}

impl CheckReport {
    fn new(
        check_id: &str,
        passed: bool,
        measured: Vec<f64>,
        threshold: Vec<f64>,
        details: String,
    ) -> Self {
        Self {
            check_id: check_id.to_string(),
            status: if passed {
                CheckStatus::Pass
            } else {
                CheckStatus::Fail
            },
            passed,
            measured,
            threshold,
            details,
        }
    }

    fn inconclusive(check_id: &str, details: String) -> Self {
        Self {
            check_id: check_id.to_string(),
            status: CheckStatus::Inconclusive,
            passed: false,
            measured: Vec::new(),
            threshold: Vec::new(),
            details,
        }
    }

    pub fn summary_line(&self) -> String {
        let status = match self.status {
            CheckStatus::Pass => "PASS",
            CheckStatus::Fail => "FAIL",
            CheckStatus::Inconclusive => "INCONCLUSIVE",
        };
        format!("{status:<12} {:<36} {}", self.check_id, self.details)
    }
}

/// A model and dataset with at most two parameters.
#[derive(Debug, Clone)]
pub struct LowDimInstance {
    pub spec: ModelSpec,
    pub dataset: Dataset,
}

impl LowDimInstance {
    /// `f(x) = theta * x` with squared loss.
    pub fn univariate(x: &[f64], y: &[f64]) -> Result<Self> {
        Ok(Self {
            spec: ModelSpec::linear(1).without_intercept(),
            dataset: Dataset::from_rows(x.iter().map(|&v| vec![v]).collect(), y.to_vec(), None)?,
        })
    }

    /// `l_i(theta) = (theta - y_i)^2`.
    pub fn quadratic(y: &[f64]) -> Result<Self> {
        Self::univariate(&vec![1.0; y.len()], y)
    }

    fn dim(&self) -> usize {
        self.spec.param_count()
    }

    fn losses(&self, theta: &[f64]) -> Result<Vec<f64>> {
        (0..self.dataset.n())
            .map(|i| {
                per_sample_loss(
                    &self.spec,
                    theta,
                    self.dataset.row(i),
                    self.dataset.targets()[i],
                )
            })
            .collect()
    }

    fn max_loss(&self, theta: &[f64]) -> f64 {
        self.losses(theta)
            .map(|l| l.into_iter().fold(f64::NEG_INFINITY, f64::max))
            .unwrap_or(f64::INFINITY)
    }

    /// Design matrix including the intercept column when the model has one.
    fn design_row(&self, i: usize) -> Vec<f64> {
        let mut row = self.dataset.row(i).to_vec();
        if self.spec.intercept {
            row.push(1.0);
        }
        row
    }
}

fn tight_solver() -> SolverConfig {
    SolverConfig {
        grad_tol: 1e-12,
        max_iters: 200_000,
        ..Default::default()
    }
}

/// Least squares through the normal equations, for at most two parameters.
fn least_squares(instance: &LowDimInstance) -> Result<Vec<f64>> {
    let d = instance.dim();
    let mut xtx = [[0.0; 2]; 2];
    let mut xty = [0.0; 2];
    for i in 0..instance.dataset.n() {
        let row = instance.design_row(i);
        let y = instance.dataset.targets()[i];
        for a in 0..d {
            xty[a] += row[a] * y;
            for b in 0..d {
                xtx[a][b] += row[a] * row[b];
            }
        }
    }
    match d {
        1 if xtx[0][0] > 0.0 => Ok(vec![xty[0] / xtx[0][0]]),
        2 => {
            let det = xtx[0][0] * xtx[1][1] - xtx[0][1] * xtx[1][0];
            if det.abs() <= 1e-12 * (xtx[0][0] * xtx[1][1]).abs().max(1.0) {
                return Err(Error::InvalidInput("design matrix is singular".into()));
            }
            Ok(vec![
                (xtx[1][1] * xty[0] - xtx[0][1] * xty[1]) / det,
                (xtx[0][0] * xty[1] - xtx[1][0] * xty[0]) / det,
            ])
        }
        _ => Err(Error::InvalidInput("design matrix is singular".into())),
    }
}

/// Outcome of a refined grid search.
#[derive(Debug, Clone, PartialEq)]
pub struct GridMinimum {
    pub argmin: Vec<f64>,
    pub value: f64,
    /// The coarse minimum sat on the edge of the search box.
    pub on_boundary: bool,
    pub resolution: f64,
}

/// Minimizes `f` over the box by a 201-point-per-axis grid, then re-grids
/// the neighbourhood of the best point `refinements` times. Dimension 1 or 2.
pub fn grid_minimize<F: Fn(&[f64]) -> f64>(
    f: F,
    lower: &[f64],
    upper: &[f64],
    refinements: usize,
) -> GridMinimum {
    const POINTS: usize = 201;
    let d = lower.len();
    assert!(
        d == 1 || d == 2,
        "grid search supports one or two dimensions"
    );
    let mut lo = lower.to_vec();
    let mut hi = upper.to_vec();
    let mut best = lo.clone();
    let mut best_value = f64::INFINITY;
    let mut on_boundary = false;
    let mut step = vec![0.0; d];
    for pass in 0..=refinements {
        for k in 0..d {
            step[k] = (hi[k] - lo[k]) / (POINTS - 1) as f64;
        }
        let mut best_index = vec![0; d];
        let mut point = vec![0.0; d];
        let count = POINTS.pow(d as u32);
        for flat in 0..count {
            let idx = [flat % POINTS, flat / POINTS];
            for k in 0..d {
                point[k] = lo[k] + step[k] * idx[k] as f64;
            }
            let v = f(&point);
            if v < best_value {
                best_value = v;
                best.copy_from_slice(&point);
                best_index.copy_from_slice(&idx[..d]);
            }
        }
        if pass == 0 {
            on_boundary = best_index.iter().any(|&i| i == 0 || i == POINTS - 1);
        }
        for k in 0..d {
            lo[k] = best[k] - 2.0 * step[k];
            hi[k] = best[k] + 2.0 * step[k];
        }
    }
    GridMinimum {
        argmin: best,
        value: best_value,
        on_boundary,
        resolution: step.iter().copied().fold(0.0, f64::max),
    }
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

pub const LIMIT_SMALL_TILT: f64 = 1e-4;
pub const LIMIT_LARGE_TILT: f64 = 1e3;
pub const UTILITARIAN_TOL: f64 = 1e-3;
pub const MINIMAX_TOL: f64 = 5e-2;

/// Minimizers at small and large tilt against the mean-loss minimizer and a
/// grid-search minimax oracle.
pub fn check_minimizer_limits(check_id: &str, instance: &LowDimInstance) -> Result<CheckReport> {
    let d = instance.dim();
    if d == 0 || d > 2 {
        return Err(Error::InvalidInput(format!(
            "minimizer limit check needs 1 or 2 parameters, got {d}"
        )));
    }
    let utilitarian = if instance.spec.is_classifier() {
        let report = minimize_mean(
            &instance.spec,
            &instance.dataset,
            &tight_solver(),
            &instance.spec.zero_params(),
        )?;
        report.theta_hat.into_inner()
    } else {
        least_squares(instance)?
    };

    let solve = |lambda: f64| -> Result<Vec<f64>> {
        let report = minimize(
            &instance.spec,
            &instance.dataset,
            TiltParam::new(lambda)?,
            &SolverConfig {
                grad_tol: 1e-10,
                ..tight_solver()
            },
            &instance.spec.zero_params(),
        )?;
        Ok(report.theta_hat.into_inner())
    };
    let small = solve(LIMIT_SMALL_TILT)?;
    let large = solve(LIMIT_LARGE_TILT)?;

    let radius = 2.0 * (1.0 + utilitarian.iter().map(|v| v.abs()).fold(0.0, f64::max));
    let lower: Vec<f64> = utilitarian.iter().map(|v| v - radius).collect();
    let upper: Vec<f64> = utilitarian.iter().map(|v| v + radius).collect();
    let oracle = grid_minimize(|t| instance.max_loss(t), &lower, &upper, 2);
    if oracle.on_boundary {
        return Ok(CheckReport::inconclusive(
            check_id,
            format!(
                "minimax grid minimum {:?} lies on the search box boundary",
                oracle.argmin
            ),
        ));
    }

    let small_err = max_abs_diff(&small, &utilitarian);
    let large_err = max_abs_diff(&large, &oracle.argmin);
    Ok(CheckReport::new(
        check_id,
        small_err <= UTILITARIAN_TOL && large_err <= MINIMAX_TOL,
        vec![small_err, large_err],
        vec![UTILITARIAN_TOL, MINIMAX_TOL],
        format!(
            "theta(lambda={LIMIT_SMALL_TILT:e})={small:?} vs mean-loss minimizer {utilitarian:?}; \
             theta(lambda={LIMIT_LARGE_TILT:e})={large:?} vs minimax grid {:?}",
            oracle.argmin
        ),
    ))
}

pub const LEXIMAX_TILTS: [f64; 3] = [10.0, 50.0, 250.0];

/// Descending sort; the leximax order compares these lexicographically.
fn sorted_descending(profile: &[f64]) -> Vec<f64> {
    let mut v = profile.to_vec();
    v.sort_by(|a, b| b.total_cmp(a));
    v
}

fn leximax_cmp(a: &[f64], b: &[f64]) -> std::cmp::Ordering {
    let (a, b) = (sorted_descending(a), sorted_descending(b));
    for (x, y) in a.iter().zip(&b) {
        match x.total_cmp(y) {
            std::cmp::Ordering::Equal => continue,
            other => return other,
        }
    }
    a.len().cmp(&b.len())
}

/// Argmin of the tilted value over finitely many loss profiles at large
/// tilt against the brute-force leximax minimum.
pub fn check_leximax_limit(check_id: &str, profiles: &[Vec<f64>]) -> Result<CheckReport> {
    if profiles.is_empty() || profiles.len() > 10_000 {
        return Err(Error::InvalidInput(format!(
            "leximax check takes 1..=10000 profiles, got {}",
            profiles.len()
        )));
    }
    if profiles
        .iter()
        .flatten()
        .any(|&l| !(0.0..=100.0).contains(&l))
    {
        return Err(Error::InvalidInput(
            "profile entries must lie in [0, 100]".into(),
        ));
    }
    let parsed = profiles
        .iter()
        .map(|p| LossProfile::new(p.clone()))
        .collect::<Result<Vec<_>>>()?;

    let mut lex_best = 0;
    for i in 1..profiles.len() {
        if leximax_cmp(&profiles[i], &profiles[lex_best]).is_lt() {
            lex_best = i;
        }
    }
    let lex_ties = (0..profiles.len())
        .filter(|&i| leximax_cmp(&profiles[i], &profiles[lex_best]).is_eq())
        .count();
    if lex_ties > 1 {
        return Ok(CheckReport::inconclusive(
            check_id,
            format!("{lex_ties} profiles tie for the leximax minimum"),
        ));
    }

    let mut argmins = Vec::with_capacity(LEXIMAX_TILTS.len());
    let mut tied_at_largest = false;
    for (k, &lambda) in LEXIMAX_TILTS.iter().enumerate() {
        let tilt = TiltParam::new(lambda)?;
        let values: Vec<f64> = parsed.iter().map(|p| tilted_value(p, tilt)).collect();
        let best = values.iter().copied().fold(f64::INFINITY, f64::min);
        let at_best: Vec<usize> = (0..values.len()).filter(|&i| values[i] == best).collect();
        if k + 1 == LEXIMAX_TILTS.len() {
            tied_at_largest = at_best.len() > 1;
        }
        argmins.push(at_best[0]);
    }
    if tied_at_largest {
        return Ok(CheckReport::inconclusive(
            check_id,
            "tilted values tie at the largest tilt".into(),
        ));
    }
    let last = *argmins.last().expect("non-empty tilt list");
    Ok(CheckReport::new(
        check_id,
        last == lex_best,
        argmins.iter().map(|&i| i as f64).collect(),
        vec![lex_best as f64],
        format!(
            "tilted argmin at lambda={LEXIMAX_TILTS:?}: {argmins:?}; leximax minimum: profile {lex_best} {:?}",
            profiles[lex_best]
        ),
    ))
}

pub const FIXED_POINT_TOL: f64 = 1e-8;

fn normalized_exp_weights(losses: &[f64], lambda: f64) -> Vec<f64> {
    let max = losses.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let raw: Vec<f64> = losses.iter().map(|l| (lambda * (l - max)).exp()).collect();
    let total: f64 = raw.iter().sum();
    raw.into_iter().map(|r| r / total).collect()
}

fn solve_univariate(
    instance: &LowDimInstance,
    lambda: f64,
    grad_tol: f64,
) -> Result<(Vec<f64>, bool)> {
    let config = SolverConfig {
        grad_tol,
        ..tight_solver()
    };
    let report = minimize(
        &instance.spec,
        &instance.dataset,
        TiltParam::new(lambda)?,
        &config,
        &instance.spec.zero_params(),
    )?;
    Ok((report.theta_hat.into_inner(), report.converged))
}

/// The univariate no-intercept minimizer reproduces itself as a least
/// squares estimate under the twisted (loss-exponentiated) measure.
pub fn check_regression_fixed_point(
    check_id: &str,
    x: &[f64],
    y: &[f64],
    lambda: f64,
) -> Result<CheckReport> {
    let instance = LowDimInstance::univariate(x, y)?;
    let (theta, converged) = solve_univariate(&instance, lambda, 1e-12)?;
    if !converged {
        return Ok(CheckReport::inconclusive(
            check_id,
            "solver did not converge".into(),
        ));
    }
    let theta = theta[0];
    let losses: Vec<f64> = x
        .iter()
        .zip(y)
        .map(|(xi, yi)| (theta * xi - yi).powi(2))
        .collect();
    let w = normalized_exp_weights(&losses, lambda);
    let cov: f64 = w.iter().zip(x).zip(y).map(|((w, x), y)| w * x * y).sum();
    let var: f64 = w.iter().zip(x).map(|(w, x)| w * x * x).sum();
    let fixed_point = cov / var;
    let residual = (theta - fixed_point).abs() / theta.abs().max(1e-12);
    Ok(CheckReport::new(
        check_id,
        residual <= FIXED_POINT_TOL,
        vec![residual],
        vec![FIXED_POINT_TOL],
        format!("theta={theta}, twisted least squares={fixed_point}"),
    ))
}

pub const CONCENTRATION_MASS: f64 = 0.99;

/// At tilt at least 50 / gap (gap between the near-maximal losses and the
/// rest) the twisted measure puts almost all its mass on the near-maximal
/// observations.
pub fn check_twisted_concentration(check_id: &str, x: &[f64], y: &[f64]) -> Result<CheckReport> {
    let instance = LowDimInstance::univariate(x, y)?;
    let mut lambda = 10.0;
    for _ in 0..8 {
        let (theta, converged) = solve_univariate(&instance, lambda, 1e-10)?;
        if !converged {
            return Ok(CheckReport::inconclusive(
                check_id,
                format!("solver did not converge at lambda={lambda}"),
            ));
        }
        let losses: Vec<f64> = x
            .iter()
            .zip(y)
            .map(|(xi, yi)| (theta[0] * xi - yi).powi(2))
            .collect();
        let max = losses.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let near_max: Vec<bool> = losses.iter().map(|&l| l >= max - 2.0 / lambda).collect();
        let rest = losses
            .iter()
            .zip(&near_max)
            .filter(|(_, &m)| !m)
            .map(|(&l, _)| l)
            .fold(f64::NEG_INFINITY, f64::max);
        if rest == f64::NEG_INFINITY {
            return Ok(CheckReport::inconclusive(
                check_id,
                "every observation is near-maximal".into(),
            ));
        }
        let gap = max - rest;
        if lambda * gap < 50.0 {
            lambda = 50.0 / gap * 1.01;
            continue;
        }
        let w = normalized_exp_weights(&losses, lambda);
        let mass: f64 = w
            .iter()
            .zip(&near_max)
            .filter(|(_, &m)| m)
            .map(|(w, _)| w)
            .sum();
        return Ok(CheckReport::new(
            check_id,
            mass >= CONCENTRATION_MASS,
            vec![mass, lambda, gap],
            vec![CONCENTRATION_MASS],
            format!("weight on near-maximal set {mass} at lambda={lambda} (gap {gap})"),
        ));
    }
    Ok(CheckReport::inconclusive(
        check_id,
        "tilt did not settle above 50/gap".into(),
    ))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NoiseShape {
    Symmetric,
    Skewed,
}

pub const IDENTIFIABILITY_TILTS: [f64; 2] = [0.1, 1.0];
pub const SYMMETRIC_MAX_SE: f64 = 3.0;
pub const SKEWED_MIN_SE: f64 = 5.0;

/// Monte Carlo mean of the tilted gradient at the true parameter of a
/// linear model `y = 2x + e`; returns `(mean, standard error)` per tilt.
pub fn mean_gradient_at_truth(
    noise: Noise,
    trials: usize,
    n: usize,
    seed: u64,
) -> Result<Vec<(f64, f64)>> {
    let spec = ModelSpec::linear(1).without_intercept();
    let theta_star = [2.0];
    let datasets = (0..trials)
        .map(|t| {
            generate(&SyntheticConfig {
                kind: SyntheticKind::LinearNoise,
                n,
                p: 1,
                noise,
                group_imbalance: 0.5,
                seed: seed.wrapping_add(t as u64),
                feature_mean: 1.0,
                theta_star: Some(theta_star.to_vec()),
            })
            .map(|s| s.dataset)
        })
        .collect::<Result<Vec<_>>>()?;
    IDENTIFIABILITY_TILTS
        .iter()
        .map(|&lambda| {
            let tilt = TiltParam::new(lambda)?;
            let grads = datasets
                .iter()
                .map(|d| tilted_objective_and_grad(&spec, &theta_star, d, tilt).map(|(_, g)| g[0]))
                .collect::<Result<Vec<_>>>()?;
            let m = grads.iter().sum::<f64>() / trials as f64;
            let var = grads.iter().map(|g| (g - m).powi(2)).sum::<f64>() / (trials as f64 - 1.0);
            Ok((m, (var / trials as f64).sqrt()))
        })
        .collect()
}

/// Symmetric noise leaves the expected gradient at the true parameter at
/// zero; skewed noise does not.
pub fn check_identifiability(
    check_id: &str,
    shape: NoiseShape,
    trials: usize,
    n: usize,
    seed: u64,
) -> Result<CheckReport> {
    if trials < 200 || n < 500 {
        return Err(Error::InvalidParameter(format!(
            "identifiability needs at least 200 trials of 500 observations, got {trials} x {n}"
        )));
    }
    let noise = match shape {
        NoiseShape::Symmetric => Noise::Gaussian { sigma: 1.0 },
        NoiseShape::Skewed => Noise::SkewedExponential { rate: 1.0 },
    };
    let stats = mean_gradient_at_truth(noise, trials, n, seed)?;
    let z: Vec<f64> = stats.iter().map(|(m, se)| m.abs() / se).collect();
    let (passed, threshold) = match shape {
        NoiseShape::Symmetric => (z.iter().all(|&z| z <= SYMMETRIC_MAX_SE), SYMMETRIC_MAX_SE),
        NoiseShape::Skewed => (z.iter().all(|&z| z >= SKEWED_MIN_SE), SKEWED_MIN_SE),
    };
    let mut measured = z.clone();
    measured.extend(stats.iter().flat_map(|&(m, se)| [m, se]));
    Ok(CheckReport::new(
        check_id,
        passed,
        measured,
        vec![threshold],
        format!(
            "{shape:?} noise, {trials} trials x {n}: mean gradient / standard error {z:?} at lambda={IDENTIFIABILITY_TILTS:?}"
        ),
    ))
}

pub const RATE_SLACK: f64 = 1e-9;

/// Fixed-step gradient descent on `l_i(theta) = (theta - y_i)^2` stays under
/// the guaranteed linear rate at every iteration.
pub fn check_gd_rate(
    check_id: &str,
    y: &[f64],
    lambda: f64,
    theta0: f64,
    iterations: usize,
) -> Result<CheckReport> {
    let instance = LowDimInstance::quadratic(y)?;
    let tilt = TiltParam::new(lambda)?;
    let lo = y.iter().copied().fold(theta0, f64::min);
    let hi = y.iter().copied().fold(theta0, f64::max);
    let c = y
        .iter()
        .flat_map(|yi| [(2.0 * (lo - yi)).powi(2), (2.0 * (hi - yi)).powi(2)])
        .fold(0.0, f64::max)
        .max(f64::MIN_POSITIVE);
    let (c_min, c_max) = (2.0, 2.0);
    let rho = fixed_step_contraction(c, c_min, c_max, lambda)?;

    let reference = minimize(
        &instance.spec,
        &instance.dataset,
        tilt,
        &tight_solver(),
        &ParamVector::new(vec![theta0])?,
    )?;
    let optimum = reference.objective;

    let mut iterates = Vec::new();
    let config = SolverConfig {
        step_rule: StepRule::FixedStep { c, c_min, c_max },
        max_iters: iterations,
        grad_tol: f64::MIN_POSITIVE,
        ..Default::default()
    };
    let run = minimize_fn(
        |theta| {
            iterates.push(theta[0]);
            tilted_objective_and_grad(&instance.spec, theta, &instance.dataset, tilt)
        },
        &[theta0],
        lambda,
        &config,
    )?;

    let initial_gap = run.objective_trace[0] - optimum;
    let mut worst_excess = f64::NEG_INFINITY;
    let mut bound = initial_gap;
    for (k, &value) in run.objective_trace.iter().enumerate() {
        if k > 0 {
            bound *= rho;
        }
        worst_excess = worst_excess.max((value - optimum) - (bound + RATE_SLACK));
    }
    let in_box = iterates.iter().all(|&t| t >= lo && t <= hi);
    let k = run.objective_trace.len() - 1;
    let final_gap = (run.objective_trace[k] - optimum).max(0.0);
    let empirical_rate = if initial_gap > 0.0 && k > 0 && final_gap > 0.0 {
        (final_gap / initial_gap).powf(1.0 / k as f64)
    } else {
        0.0
    };
    Ok(CheckReport::new(
        check_id,
        worst_excess <= 0.0 && in_box,
        vec![worst_excess, empirical_rate, rho, c],
        vec![0.0],
        format!(
            "lambda={lambda}: {k} iterations, guaranteed rate {rho:.6}, empirical rate {empirical_rate:.6}, \
             largest excess over bound {worst_excess:e}, iterates in gradient box: {in_box}"
        ),
    ))
}

pub const UTILITY_TILTS: [f64; 3] = [0.1, 1.0, 10.0];

/// Over a finite parameter grid the tilted objective and the mean
/// exponential utility `-(1/n) sum exp(lambda l_i)` pick the same point.
pub fn check_utility_argmin_equivalence(
    check_id: &str,
    instance: &LowDimInstance,
    grid: &[Vec<f64>],
) -> Result<CheckReport> {
    if grid.is_empty() || grid.len() > 10_000 {
        return Err(Error::InvalidInput(format!(
            "argmin equivalence takes 1..=10000 grid points, got {}",
            grid.len()
        )));
    }
    let profiles = grid
        .iter()
        .map(|theta| loss_profile(&instance.spec, theta, &instance.dataset))
        .collect::<Result<Vec<_>>>()?;
    let mut measured = Vec::new();
    let mut passed = true;
    for &lambda in &UTILITY_TILTS {
        let tilt = TiltParam::new(lambda)?;
        let objective: Vec<f64> = profiles.iter().map(|p| tilted_value(p, tilt)).collect();
        let utility: Vec<f64> = profiles
            .iter()
            .map(|p| -p.losses().iter().map(|l| (lambda * l).exp()).sum::<f64>() / p.len() as f64)
            .collect();
        let min = objective.iter().copied().fold(f64::INFINITY, f64::min);
        let max = utility.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let argmin: Vec<usize> = (0..grid.len()).filter(|&i| objective[i] == min).collect();
        let argmax: Vec<usize> = (0..grid.len()).filter(|&i| utility[i] == max).collect();
        if argmin.len() > 1 || argmax.len() > 1 {
            return Ok(CheckReport::inconclusive(
                check_id,
                format!("grid ties at lambda={lambda}: argmin {argmin:?}, argmax {argmax:?}"),
            ));
        }
        measured.extend([argmin[0] as f64, argmax[0] as f64]);
        passed &= argmin[0] == argmax[0];
    }
    Ok(CheckReport::new(
        check_id,
        passed,
        measured.clone(),
        Vec::new(),
        format!("(argmin objective, argmax utility) grid indices at lambda={UTILITY_TILTS:?}: {measured:?}"),
    ))
}

pub const PENALTY_IDENTITY_TOL: f64 = 1e-9;
pub const PENALTY_GRID_TOL: f64 = 1e-6;

/// The penalized objective with the decomposition coefficient of the tilted
/// minimizer equals the tilted value over that coefficient there, and a grid
/// search never finds the penalized objective above that bound.
pub fn check_regularization_bound(
    check_id: &str,
    x: &[f64],
    y: &[f64],
    lambda: f64,
) -> Result<CheckReport> {
    let instance = LowDimInstance::univariate(x, y)?;
    let (theta, converged) = solve_univariate(&instance, lambda, 1e-10)?;
    if !converged {
        return Ok(CheckReport::inconclusive(
            check_id,
            "solver did not converge".into(),
        ));
    }
    let profile = loss_profile(&instance.spec, &theta, &instance.dataset)?;
    let decomposition = decompose(&profile, TiltParam::new(lambda)?);
    let gamma = match decomposition.gamma {
        Some(g) if g > 0.0 && g < 1.0 => g,
        _ => {
            return Ok(CheckReport::inconclusive(
                check_id,
                "loss profile at the minimizer is constant; gamma undefined".into(),
            ))
        }
    };
    let bound = decomposition.value / gamma;
    let identity_err = (penalized_value(&profile, gamma)? - bound).abs();

    let penalized = |t: &[f64]| -> f64 {
        match instance.losses(t) {
            Ok(losses) => {
                let n = losses.len() as f64;
                let mean = losses.iter().sum::<f64>() / n;
                let max = losses.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                mean + (1.0 - gamma) / gamma * max
            }
            Err(_) => f64::INFINITY,
        }
    };
    let radius = 2.0 * (1.0 + theta[0].abs());
    let grid = grid_minimize(penalized, &[theta[0] - radius], &[theta[0] + radius], 2);
    let grid_slack = bound - grid.value;
    Ok(CheckReport::new(
        check_id,
        identity_err <= PENALTY_IDENTITY_TOL && grid.value <= bound + PENALTY_GRID_TOL,
        vec![identity_err, grid_slack, gamma],
        vec![PENALTY_IDENTITY_TOL, PENALTY_GRID_TOL],
        format!(
            "lambda={lambda}: theta={}, gamma={gamma}, bound={bound}, grid minimum {} at {}, identity error {identity_err:e}",
            theta[0], grid.value, grid.argmin[0]
        ),
    ))
}

/// Every check in the default suite, in run order.
pub const CHECK_NAMES: [&str; 16] = [
    "minimizer_limits",
    "minimizer_limits_logistic",
    "leximax_max_separated",
    "leximax_max_tied",
    "regression_fixed_point",
    "twisted_concentration",
    "identifiability_symmetric",
    "identifiability_skewed",
    "gd_rate_lambda_0.1",
    "gd_rate_lambda_1",
    "gd_rate_lambda_5",
    "utility_argmin_equivalence",
    "regularization_bound_a",
    "regularization_bound_b",
    "regularization_bound_c",
    "sandwich_and_limits",
];

pub const IDENTIFIABILITY_TRIALS: usize = 200;
pub const IDENTIFIABILITY_N: usize = 500;

/// Small non-separable logistic instance with one feature and an intercept.
fn logistic_instance() -> Result<LowDimInstance> {
    let x = [-2.0, -1.5, -1.0, -0.5, 0.0, 0.5, 1.0, 1.5, 2.0, 2.5];
    let y = [0.0, 0.0, 1.0, 0.0, 0.0, 1.0, 0.0, 1.0, 1.0, 1.0];
    Ok(LowDimInstance {
        spec: ModelSpec::logistic(1),
        dataset: Dataset::from_rows(x.iter().map(|&v| vec![v]).collect(), y.to_vec(), None)?,
    })
}

/// Tilted value sits between mean and max, approaches the mean at tiny tilt
/// and the max at tilt 40/gap, on seeded random profiles.
pub fn check_sandwich_and_limits(
    check_id: &str,
    profiles: usize,
    seed: u64,
) -> Result<CheckReport> {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut violations = 0usize;
    let mut worst_small = 0.0f64;
    let mut worst_large = 0.0f64;
    for _ in 0..profiles {
        let n = rng.random_range(2..=100);
        let losses: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..10.0)).collect();
        let p = LossProfile::new(losses)?;
        let (mean, max, min) = (p.mean(), p.max(), p.min());
        let small = tilted_value(&p, TiltParam::new(1e-7)?);
        if !(mean <= small && small <= max) {
            violations += 1;
        }
        worst_small = worst_small.max((small - mean).abs() / (1.0 + max - min));
        let second = p
            .losses()
            .iter()
            .copied()
            .filter(|&l| l < max)
            .fold(f64::NEG_INFINITY, f64::max);
        let gap = max - second;
        if gap.is_finite() && gap >= 0.1 {
            let large = tilted_value(&p, TiltParam::new(40.0 / gap)?);
            if !(mean <= large && large <= max) {
                violations += 1;
            }
            worst_large = worst_large.max((large - max).abs() / gap);
        }
    }
    Ok(CheckReport::new(
        check_id,
        violations == 0 && worst_small <= 1e-4 && worst_large <= 0.15,
        vec![violations as f64, worst_small, worst_large],
        vec![0.0, 1e-4, 0.15],
        format!(
            "{profiles} profiles: {violations} sandwich violations, small-tilt error {worst_small:e} (relative to 1+range), \
             large-tilt error {worst_large:e} (relative to gap)"
        ),
    ))
}

/// Runs one named check of the default suite.
pub fn run_check(name: &str) -> Result<CheckReport> {
    match name {
        "minimizer_limits" => check_minimizer_limits(
            name,
            &LowDimInstance::univariate(&[1.0, 2.0], &[0.0, 10.0])?,
        ),
        "minimizer_limits_logistic" => check_minimizer_limits(name, &logistic_instance()?),
        "leximax_max_separated" => {
            check_leximax_limit(name, &[vec![1.0, 2.0, 3.0], vec![0.5, 2.75, 2.75]])
        }
        "leximax_max_tied" => check_leximax_limit(name, &[vec![2.0, 2.0], vec![2.0, 1.9]]),
        "regression_fixed_point" => {
            check_regression_fixed_point(name, &[1.0, 2.0], &[0.0, 10.0], 0.05)
        }
        "twisted_concentration" => {
            check_twisted_concentration(name, &[1.0, 2.0, 1.0], &[0.0, 10.0, 1.0])
        }
        "identifiability_symmetric" => check_identifiability(
            name,
            NoiseShape::Symmetric,
            IDENTIFIABILITY_TRIALS,
            IDENTIFIABILITY_N,
            1_000,
        ),
        "identifiability_skewed" => check_identifiability(
            name,
            NoiseShape::Skewed,
            IDENTIFIABILITY_TRIALS,
            IDENTIFIABILITY_N,
            2_000,
        ),
        "gd_rate_lambda_0.1" => check_gd_rate(name, &[0.0, 1.0], 0.1, 5.0, 500),
        "gd_rate_lambda_1" => check_gd_rate(name, &[0.0, 1.0], 1.0, 5.0, 500),
        "gd_rate_lambda_5" => check_gd_rate(name, &[0.0, 1.0], 5.0, 5.0, 500),
        "utility_argmin_equivalence" => {
            let grid: Vec<Vec<f64>> = (0..=1000).map(|k| vec![k as f64 * 0.005]).collect();
            check_utility_argmin_equivalence(
                name,
                &LowDimInstance::quadratic(&[0.0, 1.0, 3.0])?,
                &grid,
            )
        }
        "regularization_bound_a" => {
            check_regularization_bound(name, &[1.0, 2.0], &[0.0, 10.0], 0.05)
        }
        "regularization_bound_b" => {
            check_regularization_bound(name, &[1.0, 1.0, 1.0], &[0.0, 1.0, 3.0], 1.0)
        }
        "regularization_bound_c" => {
            check_regularization_bound(name, &[1.0, 2.0, 3.0], &[1.0, 0.0, 5.0], 0.2)
        }
        "sandwich_and_limits" => check_sandwich_and_limits(name, 1_000, 7),
        other => Err(Error::Config(format!(
            "unknown check `{other}`; known checks: {}",
            CHECK_NAMES.join(", ")
        ))),
    }
}

/// Runs the named checks (all of them when `names` is empty). Unknown names
/// are rejected before anything runs.
pub fn run_checks(names: &[String]) -> Result<Vec<CheckReport>> {
    let selected: Vec<&str> = if names.is_empty() {
        CHECK_NAMES.to_vec()
    } else {
        names.iter().map(String::as_str).collect()
    };
    if let Some(unknown) = selected.iter().find(|n| !CHECK_NAMES.contains(n)) {
        return Err(Error::Config(format!(
            "unknown check `{unknown}`; known checks: {}",
            CHECK_NAMES.join(", ")
        )));
    }
    selected.into_iter().map(run_check).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn least_squares_reference() {
        let inst = LowDimInstance::univariate(&[1.0, 2.0], &[0.0, 10.0]).unwrap();
        assert_eq!(least_squares(&inst).unwrap(), vec![4.0]);
        let inst = LowDimInstance {
            spec: ModelSpec::linear(1),
            dataset: Dataset::from_rows(
                vec![vec![0.0], vec![1.0], vec![2.0]],
                vec![1.0, 3.0, 5.0],
                None,
            )
            .unwrap(),
        };
        let beta = least_squares(&inst).unwrap();
        assert!((beta[0] - 2.0).abs() < 1e-12 && (beta[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn grid_search_finds_kinked_minimum() {
        // max((θ)², (2θ - 10)²) is minimized at θ = 10/3
        let g = grid_minimize(
            |t| t[0].powi(2).max((2.0 * t[0] - 10.0).powi(2)),
            &[-6.0],
            &[14.0],
            2,
        );
        assert!(!g.on_boundary);
        assert!((g.argmin[0] - 10.0 / 3.0).abs() <= g.resolution);
        let g = grid_minimize(
            |t| (t[0] - 1.0).powi(2) + (t[1] + 2.0).powi(2),
            &[-5.0, -5.0],
            &[5.0, 5.0],
            2,
        );
        assert!((g.argmin[0] - 1.0).abs() < 1e-4 && (g.argmin[1] + 2.0).abs() < 1e-4);
        let g = grid_minimize(|t| t[0], &[0.0], &[1.0], 0);
        assert!(g.on_boundary);
    }

    #[test]
    fn minimizer_limits_on_the_hand_built_instance() {
        let r = run_check("minimizer_limits").unwrap();
        assert!(r.passed, "{}", r.details);
    }

    #[test]
    fn equal_targets_share_both_limits() {
        let inst = LowDimInstance::quadratic(&[2.5, 2.5, 2.5]).unwrap();
        let r = check_minimizer_limits("equal", &inst).unwrap();
        assert!(r.passed, "{}", r.details);
    }

    #[test]
    fn single_observation_limits() {
        let inst = LowDimInstance::univariate(&[2.0], &[3.0]).unwrap();
        let r = check_minimizer_limits("single", &inst).unwrap();
        assert!(r.passed, "{}", r.details);
    }

    #[test]
    fn too_many_parameters_is_an_error() {
        let inst = LowDimInstance {
            spec: ModelSpec::linear(2),
            dataset: Dataset::from_rows(vec![vec![1.0, 0.0]], vec![1.0], None).unwrap(),
        };
        assert!(check_minimizer_limits("x", &inst).is_err());
    }

    #[test]
    fn leximax_cases() {
        let r = run_check("leximax_max_separated").unwrap();
        assert!(r.passed, "{}", r.details);
        assert_eq!(r.threshold, vec![1.0]);
        let r = run_check("leximax_max_tied").unwrap();
        assert!(r.passed, "{}", r.details);
        assert_eq!(r.threshold, vec![1.0]);
        let r = check_leximax_limit("one", &[vec![3.0, 1.0]]).unwrap();
        assert!(r.passed);
        let r = check_leximax_limit("tie", &[vec![3.0, 1.0], vec![1.0, 3.0]]).unwrap();
        assert_eq!(r.status, CheckStatus::Inconclusive);
        assert!(check_leximax_limit("range", &[vec![101.0]]).is_err());
    }

    #[test]
    fn regression_fixed_point_cases() {
        let r = run_check("regression_fixed_point").unwrap();
        assert!(r.passed, "{}", r.details);
        let inst = LowDimInstance::univariate(&[1.0, 2.0], &[0.0, 10.0]).unwrap();
        let (theta, _) = solve_univariate(&inst, 1e-8, 1e-12).unwrap();
        assert!((theta[0] - 4.0).abs() < 1e-4);
        let r = run_check("twisted_concentration").unwrap();
        assert!(r.passed, "{}", r.details);
    }

    #[test]
    fn noiseless_gradient_vanishes_at_truth() {
        let stats = mean_gradient_at_truth(Noise::Gaussian { sigma: 0.0 }, 3, 50, 0).unwrap();
        for (m, _) in stats {
            assert_eq!(m, 0.0);
        }
    }

    #[test]
    fn identifiability_needs_enough_trials() {
        assert!(check_identifiability("x", NoiseShape::Symmetric, 10, 500, 0).is_err());
        assert!(check_identifiability("x", NoiseShape::Symmetric, 200, 50, 0).is_err());
    }

    #[test]
    fn gd_rate_from_the_optimum_stays_put() {
        let r = check_gd_rate("opt", &[0.0, 1.0], 1.0, 0.5, 50).unwrap();
        assert!(r.passed, "{}", r.details);
    }

    #[test]
    fn contraction_weakens_with_tilt() {
        let a = fixed_step_contraction(100.0, 2.0, 2.0, 1.0).unwrap();
        let b = fixed_step_contraction(100.0, 2.0, 2.0, 2.0).unwrap();
        assert!(b > a && b < 1.0);
    }

    #[test]
    fn utility_argmin_single_point_grid() {
        let inst = LowDimInstance::quadratic(&[0.0, 1.0]).unwrap();
        let r = check_utility_argmin_equivalence("one", &inst, &[vec![0.3]]).unwrap();
        assert!(r.passed);
    }

    #[test]
    fn regularization_constant_profile_is_inconclusive() {
        let r = check_regularization_bound("c", &[1.0, 1.0], &[2.0, 2.0], 1.0).unwrap();
        assert_eq!(r.status, CheckStatus::Inconclusive);
    }

    #[test]
    fn unknown_check_is_rejected() {
        assert!(matches!(
            run_checks(&["nope".to_string()]),
            Err(Error::Config(_))
        ));
    }
}
