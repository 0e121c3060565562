//! Error bookkeeping, Lyapunov values and convergence summaries.

use serde::Serialize;

use crate::dynamics::TruthState;
use crate::error::{Error, Result};
use crate::geometry::{Mat9, Vec3, Vec9};
use crate::observer::ObserverState;

/// Biases the sensors actually carry.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct TrueBiases {
    pub gyro: Vec3,
    pub accel: Vec3,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ErrorRecord {
    pub t: f64,
    pub norm_e_r: f64,
    pub norm_e_p: f64,
    pub norm_e_v: f64,
    pub norm_e_omega: f64,
    pub norm_e_a: f64,
    pub v1: f64,
    pub v2: Option<f64>,
}

impl ErrorRecord {
    pub fn norms(&self) -> [f64; 5] {
        [self.norm_e_r, self.norm_e_p, self.norm_e_v, self.norm_e_omega, self.norm_e_a]
    }

    /// Euclidean norm of the five component norms.
    pub fn total(&self) -> f64 {
        self.norms().iter().map(|x| x * x).sum::<f64>().sqrt()
    }
}

/// Translational error `x = (e_p, e_v, e_a)`.
pub fn translational_error(truth: &TruthState, biases: &TrueBiases, obs: &ObserverState) -> Vec9 {
    let mut x = Vec9::zeros();
    x.fixed_rows_mut::<3>(0).copy_from(&(truth.position - obs.position));
    x.fixed_rows_mut::<3>(3).copy_from(&(truth.velocity - obs.velocity));
    x.fixed_rows_mut::<3>(6).copy_from(&(biases.accel - obs.accel_bias));
    x
}

/// `V₂ = xᵀP⁻¹x`; `None` if `P` is not positive definite.
pub fn lyapunov_v2(x: &Vec9, p: &Mat9) -> Option<f64> {
    let chol = p.cholesky()?;
    Some(x.dot(&chol.solve(x)))
}

/// Norms of `E_R = R − R̄`, `e_p`, `e_v`, `e_Ω`, `e_a` and
/// `V₁ = (k2/2)⟨E_R, E_R⟩ + ⟨e_Ω, e_Ω⟩`. `v2` is left empty.
pub fn compute_errors(t: f64, truth: &TruthState, biases: &TrueBiases, obs: &ObserverState, k2: f64) -> ErrorRecord {
    let e_r = truth.rotation.matrix() - obs.rotation;
    let e_omega = biases.gyro - obs.gyro_bias;
    let norm_e_r = e_r.norm();
    let norm_e_omega = e_omega.norm();
    ErrorRecord {
        t,
        norm_e_r,
        norm_e_p: (truth.position - obs.position).norm(),
        norm_e_v: (truth.velocity - obs.velocity).norm(),
        norm_e_omega,
        norm_e_a: (biases.accel - obs.accel_bias).norm(),
        v1: 0.5 * k2 * e_r.norm_squared() + e_omega.norm_squared(),
        v2: None,
    }
}

/// Least-squares fit of `ln(norm)` against `t`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct RateFit {
    /// Slope of the log-norm, 1/s. Negative means decay.
    pub slope: f64,
    pub r2: f64,
    pub window: (f64, f64),
    pub samples: usize,
}

pub const MIN_FIT_SAMPLES: usize = 10;
const MIN_FIT_NORM: f64 = 1e-14;

pub fn fit_exponential_rate(series: &[(f64, f64)], window: (f64, f64)) -> Result<RateFit> {
    if !(window.0 < window.1) {
        return Err(Error::InsufficientData(format!("empty window {window:?}")));
    }
    let pts: Vec<(f64, f64)> = series
        .iter()
        .filter(|(t, y)| *t >= window.0 && *t <= window.1 && *y > MIN_FIT_NORM)
        .map(|&(t, y)| (t, y.ln()))
        .collect();
    if pts.len() < MIN_FIT_SAMPLES {
        return Err(Error::InsufficientData(format!(
            "{} usable samples in {window:?}, need {MIN_FIT_SAMPLES}",
            pts.len()
        )));
    }
    let n = pts.len() as f64;
    let mean_t = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let mean_y = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let (mut stt, mut sty, mut syy) = (0.0, 0.0, 0.0);
    for &(t, y) in &pts {
        let (dt, dy) = (t - mean_t, y - mean_y);
        stt += dt * dt;
        sty += dt * dy;
        syy += dy * dy;
    }
    if stt == 0.0 {
        return Err(Error::InsufficientData("all samples at one instant".into()));
    }
    let slope = sty / stt;
    let ss_res = syy - slope * sty;
    let r2 = if syy == 0.0 { 1.0 } else { (1.0 - ss_res / syy).clamp(0.0, 1.0) };
    Ok(RateFit {
        slope,
        r2,
        window,
        samples: pts.len(),
    })
}

pub const DEFAULT_TAIL_FRACTION: f64 = 0.2;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct BiasSummary {
    pub mean: [f64; 3],
    /// Largest Euclidean distance of a tail sample from the tail mean.
    pub max_deviation: f64,
    /// Max deviation below 1% of the mean's magnitude, or below 0.01 absolute.
    pub converged: bool,
}

impl BiasSummary {
    pub fn mean(&self) -> Vec3 {
        Vec3::from(self.mean)
    }
}

/// Mean and spread over the trailing `tail_fraction` of `series`.
pub fn summarize_bias(series: &[Vec3], tail_fraction: f64) -> Result<BiasSummary> {
    if !(tail_fraction > 0.0 && tail_fraction <= 1.0) {
        return Err(Error::ConfigInvalid(format!("tail fraction {tail_fraction} not in (0, 1]")));
    }
    if series.is_empty() {
        return Err(Error::InsufficientData("empty bias series".into()));
    }
    let n = ((series.len() as f64 * tail_fraction).ceil() as usize).clamp(1, series.len());
    let tail = &series[series.len() - n..];
    let mean = tail.iter().fold(Vec3::zeros(), |acc, b| acc + b) / n as f64;
    let max_deviation = tail.iter().map(|b| (b - mean).norm()).fold(0.0, f64::max);
    let converged = max_deviation < 0.01 * mean.norm() || max_deviation < 0.01;
    Ok(BiasSummary {
        mean: mean.into(),
        max_deviation,
        converged,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConvergenceSummary {
    pub fitted_rate: Option<f64>,
    pub fit_r2: Option<f64>,
    pub window: (f64, f64),
    pub gyro_bias: BiasSummary,
    pub accel_bias: BiasSummary,
}

impl ConvergenceSummary {
    pub fn final_gyro_bias(&self) -> Vec3 {
        self.gyro_bias.mean()
    }

    pub fn final_accel_bias(&self) -> Vec3 {
        self.accel_bias.mean()
    }
}
