//! State and measurement plumbing shared by both observers.

use crate::dynamics::MeasurementFrame;
use crate::geometry::{hat, skew_axial, Mat3, Vec3};
use crate::ode::{OdeState, Stage};

/// Estimate `(R̄, p̄, v̄, b̄_Ω, b̄_a)`. `rotation` lives in the ambient space
/// of 3×3 matrices and is never projected back onto SO(3).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ObserverState {
    pub rotation: Mat3,
    pub position: Vec3,
    pub velocity: Vec3,
    pub gyro_bias: Vec3,
    pub accel_bias: Vec3,
}

impl Default for ObserverState {
    /// `(I₃, 0, 0, 0, 0)`
    fn default() -> Self {
        Self {
            rotation: Mat3::identity(),
            position: Vec3::zeros(),
            velocity: Vec3::zeros(),
            gyro_bias: Vec3::zeros(),
            accel_bias: Vec3::zeros(),
        }
    }
}

impl ObserverState {
    pub fn is_finite(&self) -> bool {
        self.rotation.iter().all(|x| x.is_finite())
            && [self.position, self.velocity, self.gyro_bias, self.accel_bias]
                .iter()
                .all(|v| v.iter().all(|x| x.is_finite()))
    }
}

impl OdeState for ObserverState {
    fn axpy(&self, h: f64, d: &Self) -> Self {
        Self {
            rotation: self.rotation + d.rotation * h,
            position: self.position + d.position * h,
            velocity: self.velocity + d.velocity * h,
            gyro_bias: self.gyro_bias + d.gyro_bias * h,
            accel_bias: self.accel_bias + d.accel_bias * h,
        }
    }
}

/// Measurements available over one integration step.
pub trait MeasurementSpan {
    fn at(&self, stage: Stage) -> &MeasurementFrame;
}

/// A single frame held constant across the step (zero-order hold).
impl MeasurementSpan for MeasurementFrame {
    fn at(&self, _stage: Stage) -> &MeasurementFrame {
        self
    }
}

/// Frames sampled at the start, midpoint and end of a step, for when
/// measurements are available in continuous time.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StageSamples {
    pub start: MeasurementFrame,
    pub mid: MeasurementFrame,
    pub end: MeasurementFrame,
}

impl StageSamples {
    pub fn held(frame: MeasurementFrame) -> Self {
        Self {
            start: frame,
            mid: frame,
            end: frame,
        }
    }
}

impl MeasurementSpan for StageSamples {
    fn at(&self, stage: Stage) -> &MeasurementFrame {
        match stage {
            Stage::Start => &self.start,
            Stage::Mid => &self.mid,
            Stage::End => &self.end,
        }
    }
}

/// Attitude and gyro-bias laws, identical for both observers:
/// `R̄̇ = R(Ω_m − b̄_Ω)× + k1(R − R̄)`, `b̄̇_Ω = k2 π_so3(RᵀR̄)∨`.
pub(crate) fn attitude_rates(o: &ObserverState, m: &MeasurementFrame, k1: f64, k2: f64) -> (Mat3, Vec3) {
    let r = m.rotation.matrix();
    let rotation = r * hat(&(m.angular_velocity - o.gyro_bias)) + (r - o.rotation) * k1;
    let gyro_bias = skew_axial(&(r.transpose() * o.rotation)) * k2;
    (rotation, gyro_bias)
}
