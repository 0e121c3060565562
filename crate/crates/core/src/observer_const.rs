//! Constant-gain observer.
//!
//! Attitude and gyro bias follow the shared laws in [`crate::observer`];
//! the translational part uses scalar gains:
//!
//! ```text
//! p̄̇  = v̄ + k3 (p − p̄)
//! v̄̇  = g + R (a_m − b̄_a) + k4 (p − p̄)
//! b̄̇_a = −k5 Rᵀ (p − p̄)
//! ```
//!
//! Exponential convergence is guaranteed when `(k3, k4, k5)` make the
//! matrices `Y` and `Z` positive definite for `c ≥ sup‖Ω‖`. The set `K(c)`
//! is a family of sufficient scalar inequalities for that; it is not
//! exhaustive, so [`check_gains`] reports both.

use nalgebra::Matrix3;
use serde::Serialize;

use crate::dynamics::MeasurementFrame;
use crate::error::{Error, Result};
use crate::geometry::{eig_bounds_static, Mat3, Mat9, Vec3};
use crate::observer::{attitude_rates, MeasurementSpan, ObserverState};
use crate::ode::rk4_step;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, serde::Deserialize)]
pub struct ConstGains {
    pub k1: f64,
    pub k2: f64,
    pub k3: f64,
    pub k4: f64,
    pub k5: f64,
    /// Angular-speed bound the gains are meant for.
    pub c: f64,
}

impl ConstGains {
    /// `k1 = k2 = 1, k3 = 3.4, k4 = 5.5, k5 = 1.3`, with `c = sup‖Ω‖` of the
    /// default signal.
    pub fn reference() -> Self {
        Self {
            k1: 1.0,
            k2: 1.0,
            k3: 3.4,
            k4: 5.5,
            k5: 1.3,
            c: 1.36f64.sqrt(),
        }
    }

    pub fn report(&self) -> FeasibilityReport {
        check_gains(self.k3, self.k4, self.k5, self.c)
    }
}

#[rustfmt::skip]
pub fn build_y(k3: f64, k4: f64, k5: f64, c: f64) -> Mat3 {
    Matrix3::new(
        2.0 * k3 * k3 - 2.0 * k4 - k5 * k5,  k3 * k4 - k3 * k5 * k5,                         -k3 * k5,
        k3 * k4 - k3 * k5 * k5,               2.0 * k4 * k4 - 2.0 * k3 * k5 - k3 * k3 * k5 * k5, -k4 * k5,
        -k3 * k5,                             -k4 * k5,                                        2.0 * k5 * k5 - c * c,
    )
}

#[rustfmt::skip]
pub fn build_z(k3: f64, k4: f64, k5: f64) -> Mat3 {
    Matrix3::new(
        k3,   k4,            -k5,
        k4,   k3 * k4 - k5,  -k3 * k5,
        -k5,  -k3 * k5,      k4 * k5,
    )
}

/// One inequality `value > 0` of the set `K(c)`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GainCondition {
    pub name: &'static str,
    pub value: f64,
}

impl GainCondition {
    pub fn holds(&self) -> bool {
        self.value > 0.0
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FeasibilityReport {
    pub k3: f64,
    pub k4: f64,
    pub k5: f64,
    pub c: f64,
    /// All six `K(c)` inequalities hold strictly.
    pub in_k: bool,
    pub y_min_eig: f64,
    pub z_min_eig: f64,
    pub conditions: Vec<GainCondition>,
    pub violated_conditions: Vec<&'static str>,
}

impl FeasibilityReport {
    /// `Y > 0` and `Z > 0` directly, which is what convergence needs.
    pub fn satisfies_matrix_inequalities(&self) -> bool {
        self.y_min_eig > 0.0 && self.z_min_eig > 0.0
    }
}

pub const CONDITION_K5: &str = "k5 - c > 0";
pub const CONDITION_K3: &str = "k3 > 0";
pub const CONDITION_Y2: &str = "k4^2 - 2 k3 k5 - 2 k3^2 k5^2 > 0";
pub const CONDITION_Z2: &str = "k3^2 k4 - k3 k5 - k4^2 > 0";
pub const CONDITION_Z3: &str = "k3^2 k4^2 - k3^3 k5 - k4^3 > 0";
pub const CONDITION_Y1: &str = "k3^2 - 2 k4 - 2 k5^2 > 0";

pub fn k_conditions(k3: f64, k4: f64, k5: f64, c: f64) -> Vec<GainCondition> {
    let cond = |name, value| GainCondition { name, value };
    vec![
        cond(CONDITION_K5, k5 - c),
        cond(CONDITION_K3, k3),
        cond(CONDITION_Y2, k4 * k4 - 2.0 * k3 * k5 - 2.0 * k3 * k3 * k5 * k5),
        cond(CONDITION_Z2, k3 * k3 * k4 - k3 * k5 - k4 * k4),
        cond(CONDITION_Z3, k3 * k3 * k4 * k4 - k3.powi(3) * k5 - k4.powi(3)),
        cond(CONDITION_Y1, k3 * k3 - 2.0 * k4 - 2.0 * k5 * k5),
    ]
}

/// Evaluates `K(c)` membership and the minimum eigenvalues of `Y` and `Z`.
pub fn check_gains(k3: f64, k4: f64, k5: f64, c: f64) -> FeasibilityReport {
    let conditions = k_conditions(k3, k4, k5, c);
    let violated_conditions: Vec<_> = conditions.iter().filter(|c| !c.holds()).map(|c| c.name).collect();
    let min_eig = |m: &Mat3| eig_bounds_static(m).map(|(lo, _)| lo).unwrap_or(f64::NAN);
    FeasibilityReport {
        k3,
        k4,
        k5,
        c,
        in_k: violated_conditions.is_empty(),
        y_min_eig: min_eig(&build_y(k3, k4, k5, c)),
        z_min_eig: min_eig(&build_z(k3, k4, k5)),
        conditions,
        violated_conditions,
    }
}

/// Maps a triple certified for `c = 1` to one certified for `c`:
/// `(c k3′, c² k4′, c k5′)`. For `0 < c ≤ 1` the base triple is already in
/// `K(c)` and is returned unchanged.
pub fn scale_gains(k3: f64, k4: f64, k5: f64, c: f64) -> Result<(f64, f64, f64)> {
    if !check_gains(k3, k4, k5, 1.0).in_k {
        return Err(Error::BaseGainsInfeasible(k3, k4, k5));
    }
    if !(c > 0.0) {
        return Err(Error::ConfigInvalid(format!("angular-speed bound must be positive, got {c}")));
    }
    let scaled = if c > 1.0 { (c * k3, c * c * k4, c * k5) } else { (k3, k4, k5) };
    debug_assert!(check_gains(scaled.0, scaled.1, scaled.2, c).in_k);
    Ok(scaled)
}

/// `diag(I₆, Rᵀ)(Z ⊗ I₃)diag(I₆, R)`, the matrix whose inverse defines the
/// translational Lyapunov function `xᵀP⁻¹x` of this observer.
pub fn lyapunov_matrix(gains: &ConstGains, r: &Mat3) -> Mat9 {
    let z = build_z(gains.k3, gains.k4, gains.k5);
    let mut p = Mat9::zeros();
    for i in 0..3 {
        for j in 0..3 {
            let block = match (i, j) {
                (2, 2) | (0, 0) | (0, 1) | (1, 0) | (1, 1) => Mat3::identity(),
                (2, _) => r.transpose(),
                (_, 2) => *r,
                _ => unreachable!(),
            } * z[(i, j)];
            p.fixed_view_mut::<3, 3>(3 * i, 3 * j).copy_from(&block);
        }
    }
    p
}

/// Right-hand side of the observer equations for one measurement frame.
pub fn observer_rates(o: &ObserverState, m: &MeasurementFrame, g: &Vec3, gains: &ConstGains) -> ObserverState {
    let (rotation, gyro_bias) = attitude_rates(o, m, gains.k1, gains.k2);
    let r = m.rotation.matrix();
    let e_p = m.position - o.position;
    ObserverState {
        rotation,
        gyro_bias,
        position: o.velocity + e_p * gains.k3,
        velocity: g + r * (m.acceleration - o.accel_bias) + e_p * gains.k4,
        accel_bias: -(r.transpose() * e_p) * gains.k5,
    }
}

/// One RK4 step of the constant-gain observer.
pub fn step_observer_const<M: MeasurementSpan>(
    o: &ObserverState,
    m: &M,
    g: &Vec3,
    gains: &ConstGains,
    dt: f64,
) -> ObserverState {
    rk4_step(o, dt, |stage, x: &ObserverState| {
        Ok::<_, std::convert::Infallible>(observer_rates(x, m.at(stage), g, gains))
    })
    .unwrap_or_else(|e| match e {})
}
