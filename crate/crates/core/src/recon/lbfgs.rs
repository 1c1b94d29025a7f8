//! Limited-memory BFGS with a monotone backtracking (Armijo) line search.

use std::collections::VecDeque;

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

#[derive(Debug, Clone, Copy)]
pub struct LbfgsOptions {
    pub memory: usize,
    pub max_iterations: usize,
    /// Stop when `‖g‖ ≤ gradient_tolerance · max(1, ‖g₀‖)`.
    pub gradient_tolerance: f64,
    /// Stop when the last `progress_window` accepted steps together lowered
    /// the objective by less than `progress_window · progress_tolerance · max(1, |f|)`.
    pub progress_tolerance: f64,
    pub progress_window: usize,
    pub armijo: f64,
    pub max_backtracks: usize,
}

impl Default for LbfgsOptions {
    fn default() -> Self {
        Self {
            memory: 10,
            max_iterations: 2000,
            gradient_tolerance: 1e-8,
            progress_tolerance: 1e-12,
            progress_window: 10,
            armijo: 1e-4,
            max_backtracks: 60,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    GradientTolerance,
    ProgressTolerance,
    /// No descent possible even along the steepest-descent direction.
    LineSearchStalled,
    MaxIterations,
}

impl StopReason {
    pub fn converged(self) -> bool {
        !matches!(self, StopReason::MaxIterations)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            StopReason::GradientTolerance => "gradient_tolerance",
            StopReason::ProgressTolerance => "progress_tolerance",
            StopReason::LineSearchStalled => "line_search_stalled",
            StopReason::MaxIterations => "max_iterations",
        }
    }
}

#[derive(Debug, Clone)]
pub struct LbfgsOutcome {
    pub iterations: usize,
    pub evaluations: usize,
    pub value: f64,
    pub gradient_norm: f64,
    pub reason: StopReason,
    /// Objective at the start and after every accepted step.
    pub trace: Vec<f64>,
}

/// Minimizes `f` from `x` in place. `f(x, grad)` returns the value and
/// writes the gradient.
pub fn minimize<F>(x: &mut [f64], options: &LbfgsOptions, mut f: F) -> LbfgsOutcome
where
    F: FnMut(&[f64], &mut [f64]) -> f64,
{
    let n = x.len();
    let mut grad = vec![0.0; n];
    let mut value = f(x, &mut grad);
    let mut evaluations = 1;
    let g0 = norm(&grad);
    let gtol = options.gradient_tolerance * g0.max(1.0);

    let mut history: VecDeque<(Vec<f64>, Vec<f64>, f64)> = VecDeque::with_capacity(options.memory);
    let mut direction = vec![0.0; n];
    let mut trial = vec![0.0; n];
    let mut trial_grad = vec![0.0; n];
    let mut alphas = vec![0.0; options.memory];

    let mut trace = vec![value];
    let mut iterations = 0;
    let reason = loop {
        let gnorm = norm(&grad);
        if gnorm <= gtol {
            break StopReason::GradientTolerance;
        }
        if iterations >= options.max_iterations {
            break StopReason::MaxIterations;
        }

        two_loop(&grad, &history, &mut direction, &mut alphas);
        let mut slope = dot(&grad, &direction);
        if slope.is_nan() || slope >= 0.0 {
            history.clear();
            direction.iter_mut().zip(&grad).for_each(|(d, g)| *d = -g);
            slope = -gnorm * gnorm;
        }

        let mut step = if history.is_empty() {
            (1.0 / grad.iter().map(|g| g.abs()).sum::<f64>()).min(1.0)
        } else {
            1.0
        };

        let mut accepted = None;
        for _ in 0..options.max_backtracks {
            trial
                .iter_mut()
                .zip(x.iter())
                .zip(&direction)
                .for_each(|((t, xi), d)| {
                    *t = xi + step * d;
                });
            let v = f(&trial, &mut trial_grad);
            evaluations += 1;
            if v.is_finite() && v <= value + options.armijo * step * slope {
                accepted = Some(v);
                break;
            }
            step *= 0.5;
        }

        let Some(new_value) = accepted else {
            if history.is_empty() {
                break StopReason::LineSearchStalled;
            }
            // retry from steepest descent
            history.clear();
            continue;
        };

        iterations += 1;
        let s: Vec<f64> = trial.iter().zip(x.iter()).map(|(t, xi)| t - xi).collect();
        let y: Vec<f64> = trial_grad.iter().zip(&grad).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        if sy > 1e-12 * norm(&s) * norm(&y) && sy > 0.0 {
            if history.len() == options.memory {
                history.pop_front();
            }
            history.push_back((s, y, 1.0 / sy));
        }

        x.copy_from_slice(&trial);
        grad.copy_from_slice(&trial_grad);
        value = new_value;
        trace.push(value);
        let window = options.progress_window.max(1);
        if trace.len() > window {
            let decrease = trace[trace.len() - 1 - window] - value;
            if decrease <= window as f64 * options.progress_tolerance * value.abs().max(1.0) {
                break StopReason::ProgressTolerance;
            }
        }
    };

    LbfgsOutcome {
        iterations,
        evaluations,
        value,
        gradient_norm: norm(&grad),
        reason,
        trace,
    }
}

/// `direction = −H g` with the standard two-loop recursion and
/// `H₀ = (sᵀy / yᵀy) I`.
fn two_loop(
    grad: &[f64],
    history: &VecDeque<(Vec<f64>, Vec<f64>, f64)>,
    direction: &mut [f64],
    alphas: &mut [f64],
) {
    direction.iter_mut().zip(grad).for_each(|(d, g)| *d = -g);
    for (i, (s, y, rho)) in history.iter().enumerate().rev() {
        let a = rho * dot(s, direction);
        alphas[i] = a;
        direction.iter_mut().zip(y).for_each(|(d, yi)| *d -= a * yi);
    }
    if let Some((s, y, _)) = history.back() {
        let gamma = dot(s, y) / dot(y, y);
        direction.iter_mut().for_each(|d| *d *= gamma);
    }
    for (i, (s, y, rho)) in history.iter().enumerate() {
        let beta = rho * dot(y, direction);
        let a = alphas[i];
        direction
            .iter_mut()
            .zip(s)
            .for_each(|(d, si)| *d += (a - beta) * si);
    }
}
