//! L1–L1 tomographic inversion
//!
//! ```text
//! α̂ = argmin ‖L α + b‖₁ + λ ‖D α‖₁
//! ```
//!
//! solved on the smooth surrogate `|x| ≈ √(x² + ε²)` with L-BFGS. The
//! smoothing is tightened in stages (ε-continuation), each stage warm
//! started from the previous one, ending at the configured ε.
//!
//! The image is solved for in Np/m, but [`solve`] applies the regularizer to
//! the image expressed in dB/cm, so `λ` weighs data misfit (Np) against
//! attenuation jumps measured in dB/cm.

pub mod lbfgs;
mod regularizer;

pub use lbfgs::{LbfgsOptions, LbfgsOutcome, StopReason};
pub use regularizer::{GradientWeights, RegularizerMatrix};

use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::image::AttenuationImage;
use crate::physics::DB_CM_PER_NP_M;
use crate::raypath::RayPathMatrix;

/// Ratio of the default ε to `median |b|`.
pub const DEFAULT_EPSILON_SCALE: f64 = 1e-6;
/// Used when the data carry no scale (`median |b| = 0`).
const EPSILON_FLOOR: f64 = 1e-12;
/// Continuation starts this many decades above the final ε.
const CONTINUATION_DECADES: i32 = 4;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ReconConfig {
    pub lambda: f64,
    pub weights: GradientWeights,
    /// Absolute smoothing (Np). `None` means `1e-6 · median |b|`.
    pub epsilon: Option<f64>,
    /// Iteration cap for each continuation stage.
    pub max_iterations: usize,
    pub gradient_tolerance: f64,
    /// Windowed relative progress test of the final stage; earlier stages
    /// use ten times this.
    pub progress_tolerance: f64,
    pub memory: usize,
    pub continuation: bool,
}

impl Default for ReconConfig {
    fn default() -> Self {
        Self {
            lambda: 0.6,
            weights: GradientWeights::default(),
            epsilon: None,
            max_iterations: 2000,
            gradient_tolerance: 1e-8,
            progress_tolerance: 1e-7,
            memory: 10,
            continuation: true,
        }
    }
}

impl ReconConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(Error::invalid(
                "recon config",
                format!("lambda {}", self.lambda),
            ));
        }
        if let Some(eps) = self.epsilon {
            if !(eps > 0.0 && eps.is_finite()) {
                return Err(Error::invalid("recon config", format!("epsilon {eps}")));
            }
        }
        if [self.progress_tolerance, self.gradient_tolerance]
            .iter()
            .any(|t| t.is_nan() || *t < 0.0)
        {
            return Err(Error::invalid("recon config", "tolerances must be >= 0"));
        }
        if self.max_iterations == 0 || self.memory == 0 {
            return Err(Error::invalid(
                "recon config",
                "max_iterations and memory must be at least 1",
            ));
        }
        let w = self.weights;
        if [w.horizontal, w.vertical, w.diagonal, w.anti_diagonal]
            .iter()
            .any(|k| !(*k >= 0.0 && k.is_finite()))
        {
            return Err(Error::invalid(
                "recon config",
                "gradient weights must be >= 0",
            ));
        }
        Ok(())
    }

    /// Smoothing for data `b`.
    pub fn epsilon_for(&self, b: &[f64]) -> f64 {
        self.epsilon
            .unwrap_or_else(|| (DEFAULT_EPSILON_SCALE * median_abs(b)).max(EPSILON_FLOOR))
    }
}

pub fn median_abs(values: &[f64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    let mut v: Vec<f64> = values.iter().map(|x| x.abs()).collect();
    let mid = v.len() / 2;
    let (_, m, _) = v.select_nth_unstable_by(mid, f64::total_cmp);
    let upper = *m;
    if v.len() % 2 == 1 {
        upper
    } else {
        let lower = v[..mid].iter().copied().fold(f64::NEG_INFINITY, f64::max);
        0.5 * (lower + upper)
    }
}

/// The smoothed objective bound to one problem instance.
pub struct Objective<'a> {
    l: &'a RayPathMatrix,
    b: &'a [f64],
    d: &'a RegularizerMatrix,
    lambda: f64,
    epsilon: f64,
}

impl<'a> Objective<'a> {
    pub fn new(
        l: &'a RayPathMatrix,
        b: &'a [f64],
        d: &'a RegularizerMatrix,
        lambda: f64,
        epsilon: f64,
    ) -> Result<Self> {
        check_len(l.n_rays(), b.len(), "data vector vs L rows")?;
        check_len(l.n_cells(), d.n_cols(), "D columns vs L columns")?;
        if b.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("data vector"));
        }
        Ok(Self {
            l,
            b,
            d,
            lambda,
            epsilon,
        })
    }

    pub fn n_cells(&self) -> usize {
        self.l.n_cells()
    }

    pub fn with_epsilon(&self, epsilon: f64) -> Objective<'a> {
        Objective { epsilon, ..*self }
    }

    /// Surrogate value; the gradient is written into `grad`.
    pub fn evaluate(&self, alpha: &[f64], grad: &mut [f64]) -> f64 {
        let eps2 = self.epsilon * self.epsilon;
        let smooth = |x: f64| (x * x + eps2).sqrt();

        let mut residual = vec![0.0; self.l.n_rays()];
        self.l.apply_into(alpha, &mut residual);
        let mut value = 0.0;
        for (r, b) in residual.iter_mut().zip(self.b) {
            *r += b;
            let s = smooth(*r);
            value += s;
            *r /= s;
        }
        self.l.apply_transpose_into(&residual, grad);

        if self.d.n_rows() > 0 {
            let mut diff = vec![0.0; self.d.n_rows()];
            self.d.apply_into(alpha, &mut diff);
            let mut reg = 0.0;
            for v in &mut diff {
                let s = smooth(*v);
                reg += s;
                *v *= self.lambda / s;
            }
            value += self.lambda * reg;
            let mut back = vec![0.0; alpha.len()];
            self.d.apply_transpose_into(&diff, &mut back);
            grad.iter_mut().zip(&back).for_each(|(g, r)| *g += r);
        }
        value
    }

    /// Exact (unsmoothed) `‖Lα + b‖₁ + λ‖Dα‖₁`.
    pub fn l1_value(&self, alpha: &[f64]) -> f64 {
        let mut residual = vec![0.0; self.l.n_rays()];
        self.l.apply_into(alpha, &mut residual);
        let data: f64 = residual
            .iter()
            .zip(self.b)
            .map(|(r, b)| (r + b).abs())
            .sum();
        let mut diff = vec![0.0; self.d.n_rows()];
        self.d.apply_into(alpha, &mut diff);
        data + self.lambda * diff.iter().map(|v| v.abs()).sum::<f64>()
    }
}

/// Smoothed objective and its gradient at `alpha`.
pub fn objective(
    alpha: &[f64],
    l: &RayPathMatrix,
    b: &[f64],
    d: &RegularizerMatrix,
    lambda: f64,
    epsilon: f64,
) -> Result<(f64, Vec<f64>)> {
    check_len(l.n_cells(), alpha.len(), "image for objective")?;
    let obj = Objective::new(l, b, d, lambda, epsilon)?;
    let mut grad = vec![0.0; alpha.len()];
    let value = obj.evaluate(alpha, &mut grad);
    Ok((value, grad))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceReport {
    pub converged: bool,
    pub reason: StopReason,
    pub iterations: usize,
    pub evaluations: usize,
    pub stages: usize,
    /// Surrogate objective at the final ε.
    pub objective: f64,
    pub objective_l1: f64,
    pub gradient_norm: f64,
    pub epsilon: f64,
    pub lambda: f64,
    /// Surrogate objective after each accepted step of the final stage.
    pub trace: Vec<f64>,
}

impl ConvergenceReport {
    pub fn to_key_value(&self) -> String {
        format!(
            "converged={}\nreason={}\niterations={}\nevaluations={}\nstages={}\n\
             objective={:.12e}\nobjective_l1={:.12e}\ngradient_norm={:.6e}\n\
             epsilon={:.6e}\nlambda={}\n",
            self.converged,
            self.reason.as_str(),
            self.iterations,
            self.evaluations,
            self.stages,
            self.objective,
            self.objective_l1,
            self.gradient_norm,
            self.epsilon,
            self.lambda,
        )
    }
}

#[derive(Debug, Clone)]
pub struct Reconstruction {
    pub image: AttenuationImage,
    pub report: ConvergenceReport,
}

/// Reconstructs α (Np/m) from calibrated data `b` starting at α = 0.
///
/// Hitting the iteration cap is not an error: the last (lowest) iterate is
/// returned with `report.converged == false`.
pub fn solve(l: &RayPathMatrix, b: &[f64], config: &ReconConfig) -> Result<Reconstruction> {
    config.validate()?;
    let d = RegularizerMatrix::build(l.grid(), config.weights.scaled(DB_CM_PER_NP_M));
    solve_with(l, b, &d, config)
}

/// [`solve`] with a caller-supplied regularizer, applied to α in Np/m as is.
pub fn solve_with(
    l: &RayPathMatrix,
    b: &[f64],
    d: &RegularizerMatrix,
    config: &ReconConfig,
) -> Result<Reconstruction> {
    config.validate()?;
    let epsilon = config.epsilon_for(b);
    let target = Objective::new(l, b, d, config.lambda, epsilon)?;

    let schedule: Vec<f64> = if config.continuation {
        (0..=CONTINUATION_DECADES)
            .rev()
            .map(|k| epsilon * 10f64.powi(k))
            .collect()
    } else {
        vec![epsilon]
    };

    let mut alpha = vec![0.0; l.n_cells()];
    let mut iterations = 0;
    let mut evaluations = 0;
    let mut last = None;
    for (stage, &eps) in schedule.iter().enumerate() {
        let is_final = stage + 1 == schedule.len();
        let loosen = if is_final { 1.0 } else { 10.0 };
        let options = LbfgsOptions {
            memory: config.memory,
            max_iterations: config.max_iterations,
            gradient_tolerance: config.gradient_tolerance * loosen,
            progress_tolerance: config.progress_tolerance * loosen,
            ..LbfgsOptions::default()
        };
        let obj = target.with_epsilon(eps);
        let outcome = lbfgs::minimize(&mut alpha, &options, |x, g| obj.evaluate(x, g));
        log::debug!(
            "stage {stage}: eps={eps:.3e} iterations={} value={:.6e} reason={}",
            outcome.iterations,
            outcome.value,
            outcome.reason.as_str()
        );
        iterations += outcome.iterations;
        evaluations += outcome.evaluations;
        let capped = outcome.reason == StopReason::MaxIterations;
        last = Some(outcome);
        if capped {
            break;
        }
    }
    let outcome = last.expect("at least one stage");
    if alpha.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("reconstruction"));
    }

    let report = ConvergenceReport {
        converged: outcome.reason.converged(),
        reason: outcome.reason,
        iterations,
        evaluations,
        stages: schedule.len(),
        objective: outcome.value,
        objective_l1: target.l1_value(&alpha),
        gradient_norm: outcome.gradient_norm,
        epsilon,
        lambda: config.lambda,
        trace: outcome.trace,
    };
    Ok(Reconstruction {
        image: AttenuationImage::new(*l.grid(), alpha)?,
        report,
    })
}
