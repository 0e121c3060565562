//! Ground-truth rigid-body motion and the sensor models that observe it.
//!
//! The body obeys `Ṙ = RΩ×`, `ṗ = v`, `v̇ = g + Ra`. Pose is observed
//! through landmarks expressed in the body frame and reconstructed with
//! `π_SE3(r b†)`; angular velocity and specific force are observed with a
//! constant additive bias plus white Gaussian noise.

use nalgebra::{DMatrix, Matrix3xX};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::Result;
use crate::geometry::{
    exp_so3, hat, project_se3, project_so3, HomogeneousPointSet, Mat3, Mat4, RotationMatrix, Vec3,
};
use crate::ode::{rk4_step, OdeState};

/// Default gravity vector (m/s²).
pub const STANDARD_GRAVITY: Vec3 = Vec3::new(0.0, 0.0, -9.81);

/// True angular velocity and body-frame specific acceleration as functions of time.
pub trait InertialSignal {
    fn angular_velocity(&self, t: f64) -> Vec3;
    fn acceleration(&self, t: f64) -> Vec3;
}

/// One sinusoidal component `amplitude · sin(frequency · t + phase)` on `axis`.
#[derive(Clone, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct SineTerm {
    pub axis: usize,
    pub amplitude: f64,
    pub frequency: f64,
    #[serde(default)]
    pub phase: f64,
}

fn eval_terms(offset: &Vec3, terms: &[SineTerm], t: f64) -> Vec3 {
    let mut out = *offset;
    for term in terms {
        out[term.axis] += term.amplitude * (term.frequency * t + term.phase).sin();
    }
    out
}

#[derive(Clone, Debug, PartialEq)]
pub enum Signal {
    /// `Ω = (−sin 10t, cos 10t, 0.6 sin 5t)`, `a = (cos 0.5t, sin 0.5t, cos t)`.
    Reference,
    /// Offsets plus sums of sinusoids, per axis.
    Sinusoids {
        omega_offset: Vec3,
        omega_terms: Vec<SineTerm>,
        accel_offset: Vec3,
        accel_terms: Vec<SineTerm>,
    },
}

impl Signal {
    pub fn constant(omega: Vec3, accel: Vec3) -> Self {
        Signal::Sinusoids {
            omega_offset: omega,
            omega_terms: Vec::new(),
            accel_offset: accel,
            accel_terms: Vec::new(),
        }
    }
}

impl InertialSignal for Signal {
    fn angular_velocity(&self, t: f64) -> Vec3 {
        match self {
            Signal::Reference => Vec3::new(-(10.0 * t).sin(), (10.0 * t).cos(), 0.6 * (5.0 * t).sin()),
            Signal::Sinusoids {
                omega_offset,
                omega_terms,
                ..
            } => eval_terms(omega_offset, omega_terms, t),
        }
    }

    fn acceleration(&self, t: f64) -> Vec3 {
        match self {
            Signal::Reference => Vec3::new((0.5 * t).cos(), (0.5 * t).sin(), t.cos()),
            Signal::Sinusoids {
                accel_offset,
                accel_terms,
                ..
            } => eval_terms(accel_offset, accel_terms, t),
        }
    }
}

/// `sup ‖Ω(t)‖` over `[0, t_end]`, sampled at a tenth of `dt`.
pub fn sup_angular_speed(signal: &impl InertialSignal, t_end: f64, dt: f64) -> f64 {
    let h = dt / 10.0;
    let n = (t_end / h).ceil() as usize;
    (0..=n)
        .map(|i| signal.angular_velocity((i as f64 * h).min(t_end)).norm())
        .fold(0.0, f64::max)
}

/// A signal together with a bound on its angular speed.
#[derive(Clone, Debug, PartialEq)]
pub struct SignalSpec {
    pub signal: Signal,
    pub omega_bound: f64,
}

impl SignalSpec {
    /// Computes the angular-speed bound by dense sampling over the horizon.
    pub fn sampled(signal: Signal, t_end: f64, dt: f64) -> Self {
        let omega_bound = sup_angular_speed(&signal, t_end, dt);
        Self {
            signal,
            omega_bound,
        }
    }
}

impl InertialSignal for SignalSpec {
    fn angular_velocity(&self, t: f64) -> Vec3 {
        self.signal.angular_velocity(t)
    }

    fn acceleration(&self, t: f64) -> Vec3 {
        self.signal.acceleration(t)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TruthState {
    pub rotation: RotationMatrix,
    pub position: Vec3,
    pub velocity: Vec3,
}

impl TruthState {
    pub fn new(rotation: RotationMatrix, position: Vec3, velocity: Vec3) -> Self {
        Self {
            rotation,
            position,
            velocity,
        }
    }

    /// `(exp(−π e3× / 3), 0, 0)`.
    pub fn reference() -> Self {
        Self::new(
            exp_so3(&Vec3::new(0.0, 0.0, -std::f64::consts::PI / 3.0)),
            Vec3::zeros(),
            Vec3::zeros(),
        )
    }
}

#[derive(Clone, Copy, Debug)]
struct RigidBody {
    r: Mat3,
    p: Vec3,
    v: Vec3,
}

impl OdeState for RigidBody {
    fn axpy(&self, h: f64, d: &Self) -> Self {
        Self {
            r: self.r + d.r * h,
            p: self.p + d.p * h,
            v: self.v + d.v * h,
        }
    }
}

/// One RK4 step of the rigid-body equations. The rotation is re-projected
/// onto SO(3) afterwards.
pub fn step_truth(
    s: &TruthState,
    signal: &impl InertialSignal,
    gravity: &Vec3,
    t: f64,
    dt: f64,
) -> TruthState {
    let x0 = RigidBody {
        r: *s.rotation.matrix(),
        p: s.position,
        v: s.velocity,
    };
    let x1 = rk4_step(&x0, dt, |stage, x: &RigidBody| {
        let tau = t + stage.offset(dt);
        Ok::<_, std::convert::Infallible>(RigidBody {
            r: x.r * hat(&signal.angular_velocity(tau)),
            p: x.v,
            v: gravity + x.r * signal.acceleration(tau),
        })
    })
    .unwrap_or_else(|e| match e {});
    let rotation = project_so3(&x1.r).expect("RK4 step of a rotation is nonsingular for dt <= 0.01");
    TruthState::new(rotation, x1.p, x1.v)
}

/// Constant biases, noise level and landmark layout of the simulated sensors.
#[derive(Clone, Debug, PartialEq)]
pub struct SensorSpec {
    pub gyro_bias: Vec3,
    pub accel_bias: Vec3,
    /// Standard deviation of the additive Gaussian noise, per component.
    pub noise: f64,
    pub landmarks: HomogeneousPointSet,
    pub seed: u64,
}

impl SensorSpec {
    /// Biases `b_Ω = (−1, 1, 5)`, `b_a = (1, −5, 1)`, noise 0.01, cube landmarks.
    pub fn reference() -> Self {
        Self {
            gyro_bias: Vec3::new(-1.0, 1.0, 5.0),
            accel_bias: Vec3::new(1.0, -5.0, 1.0),
            noise: 0.01,
            landmarks: HomogeneousPointSet::unit_cube(),
            seed: 0,
        }
    }
}

/// Independent counter-based streams, one per sensor channel.
#[derive(Clone, Debug)]
pub struct SensorRng {
    pub landmarks: ChaCha8Rng,
    pub gyro: ChaCha8Rng,
    pub accel: ChaCha8Rng,
}

impl SensorRng {
    pub fn new(seed: u64) -> Self {
        let stream = |id: u64| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(id);
            rng
        };
        Self {
            landmarks: stream(0),
            gyro: stream(1),
            accel: stream(2),
        }
    }

    pub fn draw(&mut self, n_landmarks: usize) -> NoiseDraw {
        NoiseDraw {
            landmarks: standard_normal_matrix(&mut self.landmarks, n_landmarks),
            gyro: standard_normal_vec(&mut self.gyro),
            accel: standard_normal_vec(&mut self.accel),
        }
    }
}

fn standard_normal_vec(rng: &mut impl Rng) -> Vec3 {
    Vec3::from_fn(|_, _| rng.sample(StandardNormal))
}

fn standard_normal_matrix(rng: &mut impl Rng, cols: usize) -> Matrix3xX<f64> {
    let mut m = Matrix3xX::zeros(cols);
    for j in 0..cols {
        for i in 0..3 {
            m[(i, j)] = rng.sample(StandardNormal);
        }
    }
    m
}

/// Unit-variance samples for one measurement epoch; scaled by the noise level
/// when applied.
#[derive(Clone, Debug, PartialEq)]
pub struct NoiseDraw {
    pub landmarks: Matrix3xX<f64>,
    pub gyro: Vec3,
    pub accel: Vec3,
}

impl NoiseDraw {
    pub fn zeros(n_landmarks: usize) -> Self {
        Self {
            landmarks: Matrix3xX::zeros(n_landmarks),
            gyro: Vec3::zeros(),
            accel: Vec3::zeros(),
        }
    }
}

/// Body-frame landmark observations with explicitly supplied noise samples.
pub fn synth_landmark_body_with(
    s: &TruthState,
    landmarks: &HomogeneousPointSet,
    noise: f64,
    eta: &Matrix3xX<f64>,
) -> DMatrix<f64> {
    let rt = s.rotation.matrix().transpose();
    let mut r = DMatrix::zeros(4, landmarks.len());
    for i in 0..landmarks.len() {
        let y = rt * (landmarks.point(i) - s.position) + eta.column(i) * noise;
        r.fixed_view_mut::<3, 1>(0, i).copy_from(&y);
        r[(3, i)] = 1.0;
    }
    r
}

/// Column `i` is `[Rᵀ(p_i − p) + noise·η; 1]`.
pub fn synth_landmark_body(
    s: &TruthState,
    landmarks: &HomogeneousPointSet,
    noise: f64,
    rng: &mut impl Rng,
) -> DMatrix<f64> {
    let eta = standard_normal_matrix(rng, landmarks.len());
    synth_landmark_body_with(s, landmarks, noise, &eta)
}

/// Like [`reconstruct_pose`] but with a precomputed `b†`.
pub fn reconstruct_pose_with(r: &DMatrix<f64>, b_pinv: &DMatrix<f64>) -> Result<(RotationMatrix, Vec3)> {
    let t = r * b_pinv;
    let t = Mat4::from_fn(|i, j| t[(i, j)]);
    // r ≈ [Rᵀ, −Rᵀp; 0, 1] b, so invert the body transform
    let (rot, trans) = project_se3(&t)?;
    let r_world = rot.transpose();
    let p_world = -(r_world.matrix() * trans);
    Ok((r_world, p_world))
}

/// World-frame pose from body-frame landmark observations via `π_SE3(r b†)`.
pub fn reconstruct_pose(r: &DMatrix<f64>, b: &HomogeneousPointSet) -> Result<(RotationMatrix, Vec3)> {
    reconstruct_pose_with(r, &b.pseudo_inverse()?)
}

pub fn corrupt_inertial_with(omega: &Vec3, accel: &Vec3, spec: &SensorSpec, draw: &NoiseDraw) -> (Vec3, Vec3) {
    (
        omega + spec.gyro_bias + draw.gyro * spec.noise,
        accel + spec.accel_bias + draw.accel * spec.noise,
    )
}

/// `Ω_m = Ω + b_Ω + noise·η`, `a_m = a + b_a + noise·η′`.
pub fn corrupt_inertial(omega: &Vec3, accel: &Vec3, spec: &SensorSpec, rng: &mut SensorRng) -> (Vec3, Vec3) {
    let draw = NoiseDraw {
        landmarks: Matrix3xX::zeros(0),
        gyro: standard_normal_vec(&mut rng.gyro),
        accel: standard_normal_vec(&mut rng.accel),
    };
    corrupt_inertial_with(omega, accel, spec, &draw)
}

/// Everything an observer is fed at one instant.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MeasurementFrame {
    pub t: f64,
    pub rotation: RotationMatrix,
    pub position: Vec3,
    pub angular_velocity: Vec3,
    pub acceleration: Vec3,
}

impl MeasurementFrame {
    pub fn with_added_bias(&self, gyro: &Vec3, accel: &Vec3) -> Self {
        Self {
            angular_velocity: self.angular_velocity + gyro,
            acceleration: self.acceleration + accel,
            ..*self
        }
    }
}

/// Simulated sensor suite with its own random streams.
#[derive(Clone, Debug)]
pub struct Sensor {
    spec: SensorSpec,
    landmarks_pinv: DMatrix<f64>,
    rng: SensorRng,
}

impl Sensor {
    pub fn new(spec: SensorSpec) -> Result<Self> {
        let landmarks_pinv = spec.landmarks.pseudo_inverse()?;
        let rng = SensorRng::new(spec.seed);
        Ok(Self {
            spec,
            landmarks_pinv,
            rng,
        })
    }

    pub fn spec(&self) -> &SensorSpec {
        &self.spec
    }

    /// Noise samples for the next epoch (all zeros when the sensor is noise-free).
    pub fn draw(&mut self) -> NoiseDraw {
        if self.spec.noise > 0.0 {
            self.rng.draw(self.spec.landmarks.len())
        } else {
            NoiseDraw::zeros(self.spec.landmarks.len())
        }
    }

    /// Measurement of `truth` at time `t` using the given noise samples.
    pub fn measure(
        &self,
        truth: &TruthState,
        t: f64,
        signal: &impl InertialSignal,
        draw: &NoiseDraw,
    ) -> Result<MeasurementFrame> {
        let r = synth_landmark_body_with(truth, &self.spec.landmarks, self.spec.noise, &draw.landmarks);
        let (rotation, position) = reconstruct_pose_with(&r, &self.landmarks_pinv)?;
        let (angular_velocity, acceleration) = corrupt_inertial_with(
            &signal.angular_velocity(t),
            &signal.acceleration(t),
            &self.spec,
            draw,
        );
        Ok(MeasurementFrame {
            t,
            rotation,
            position,
            angular_velocity,
            acceleration,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn run(signal: &impl InertialSignal, g: &Vec3, s0: TruthState, dt: f64, t_end: f64) -> TruthState {
        let n = (t_end / dt).round() as usize;
        let mut s = s0;
        for k in 0..n {
            s = step_truth(&s, signal, g, k as f64 * dt, dt);
        }
        s
    }

    #[test]
    fn free_body_drifts_linearly() {
        let sig = Signal::constant(Vec3::zeros(), Vec3::zeros());
        let s0 = TruthState::new(exp_so3(&Vec3::new(0.1, 0.2, 0.3)), Vec3::new(1.0, 2.0, 3.0), Vec3::new(0.5, -0.5, 2.0));
        let s1 = step_truth(&s0, &sig, &Vec3::zeros(), 0.0, 0.01);
        assert_eq!(s1.velocity, s0.velocity);
        assert_abs_diff_eq!(s1.position, s0.position + s0.velocity * 0.01, epsilon = 1e-15);
        assert_abs_diff_eq!(*s1.rotation.matrix(), *s0.rotation.matrix(), epsilon = 1e-15);
    }

    #[test]
    fn rest_is_a_fixed_point() {
        let sig = Signal::constant(Vec3::zeros(), Vec3::zeros());
        let s0 = TruthState::reference();
        let s = run(&sig, &Vec3::zeros(), s0, 1e-3, 1.0);
        assert_eq!(s.position, s0.position);
        assert_eq!(s.velocity, s0.velocity);
        assert_abs_diff_eq!(*s.rotation.matrix(), *s0.rotation.matrix(), epsilon = 1e-13);
    }

    #[test]
    fn constant_rate_rotation_matches_closed_form() {
        let w = 1.7;
        let sig = Signal::constant(Vec3::new(0.0, 0.0, w), Vec3::zeros());
        let s0 = TruthState::reference();
        let t_end = 2.0;
        let s = run(&sig, &Vec3::zeros(), s0, 1e-3, t_end);
        let expected = s0.rotation.matrix() * exp_so3(&Vec3::new(0.0, 0.0, w * t_end)).matrix();
        assert_abs_diff_eq!(*s.rotation.matrix(), expected, epsilon = 1e-8);
    }

    #[test]
    fn reference_signal_values() {
        let sig = Signal::Reference;
        assert_eq!(sig.angular_velocity(0.0), Vec3::new(-0.0, 1.0, 0.0));
        assert_eq!(sig.acceleration(0.0), Vec3::new(1.0, 0.0, 1.0));
        let c = sup_angular_speed(&sig, 15.0, 1e-3);
        assert!(c <= 1.36f64.sqrt() + 1e-12 && c > 1.16);
    }

    #[test]
    fn sinusoid_terms_add_up() {
        let sig = Signal::Sinusoids {
            omega_offset: Vec3::new(0.1, 0.0, 0.0),
            omega_terms: vec![SineTerm { axis: 1, amplitude: 2.0, frequency: 3.0, phase: 0.5 }],
            accel_offset: Vec3::zeros(),
            accel_terms: vec![
                SineTerm { axis: 2, amplitude: 1.0, frequency: 1.0, phase: 0.0 },
                SineTerm { axis: 2, amplitude: 1.0, frequency: 2.0, phase: 0.0 },
            ],
        };
        let t = 0.3;
        assert_eq!(sig.angular_velocity(t), Vec3::new(0.1, 2.0 * (0.9f64 + 0.5).sin(), 0.0));
        assert_eq!(sig.acceleration(t).z, 0.3f64.sin() + 0.6f64.sin());
    }

    #[test]
    fn landmark_synthesis_examples() {
        let b = HomogeneousPointSet::unit_cube();
        let ident = TruthState::new(RotationMatrix::identity(), Vec3::zeros(), Vec3::zeros());
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let r = synth_landmark_body(&ident, &b, 0.0, &mut rng);
        assert_eq!(&r, b.matrix());

        let at_landmark = TruthState::new(exp_so3(&Vec3::new(0.4, 0.1, -1.0)), b.point(5), Vec3::zeros());
        let r = synth_landmark_body(&at_landmark, &b, 0.0, &mut rng);
        assert_eq!(r.column(5).as_slice(), &[0.0, 0.0, 0.0, 1.0]);
    }

    #[test]
    fn reconstruction_roundtrip_noise_free() {
        let b = HomogeneousPointSet::unit_cube();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for k in 0..50 {
            let axis = Vec3::new((k as f64).sin(), (2.0 * k as f64).cos(), 0.3 * k as f64 - 4.0);
            let s = TruthState::new(exp_so3(&axis), Vec3::new(k as f64, -2.0, 0.5 * k as f64), Vec3::zeros());
            let r = synth_landmark_body(&s, &b, 0.0, &mut rng);
            let (rot, pos) = reconstruct_pose(&r, &b).unwrap();
            assert_abs_diff_eq!(*rot.matrix(), *s.rotation.matrix(), epsilon = 1e-9);
            assert_abs_diff_eq!(pos, s.position, epsilon = 1e-9);
        }
        let (rot, pos) = reconstruct_pose(b.matrix(), &b).unwrap();
        assert_abs_diff_eq!(*rot.matrix(), Mat3::identity(), epsilon = 1e-12);
        assert_abs_diff_eq!(pos, Vec3::zeros(), epsilon = 1e-12);
    }

    #[test]
    fn reconstruction_under_noise_monte_carlo() {
        let b = HomogeneousPointSet::unit_cube();
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        let mut good = 0;
        for k in 0..1000 {
            let s = TruthState::new(
                exp_so3(&Vec3::new(0.01 * k as f64, 1.0, -0.5)),
                Vec3::new(1.0, 2.0, 3.0),
                Vec3::zeros(),
            );
            let r = synth_landmark_body(&s, &b, 0.01, &mut rng);
            let (rot, _) = reconstruct_pose(&r, &b).unwrap();
            if (rot.matrix() - s.rotation.matrix()).norm() < 0.1 {
                good += 1;
            }
        }
        assert!(good >= 990, "{good}/1000");
    }

    #[test]
    fn inertial_corruption() {
        let mut spec = SensorSpec::reference();
        spec.noise = 0.0;
        let mut rng = SensorRng::new(1);
        let (w, a) = corrupt_inertial(&Vec3::zeros(), &Vec3::zeros(), &spec, &mut rng);
        assert_eq!(w, Vec3::new(-1.0, 1.0, 5.0));
        assert_eq!(a, Vec3::new(1.0, -5.0, 1.0));

        spec.gyro_bias = Vec3::zeros();
        spec.accel_bias = Vec3::zeros();
        let w0 = Vec3::new(0.3, 0.2, 0.1);
        assert_eq!(corrupt_inertial(&w0, &w0, &spec, &mut rng), (w0, w0));
    }

    #[test]
    fn gyro_noise_mean_converges_to_bias() {
        let spec = SensorSpec::reference();
        let mut rng = SensorRng::new(77);
        let n = 100_000;
        let omega = Vec3::new(0.5, -0.2, 0.1);
        let mut sum = Vec3::zeros();
        for _ in 0..n {
            let (w, _) = corrupt_inertial(&omega, &Vec3::zeros(), &spec, &mut rng);
            sum += w - omega;
        }
        let mean = sum / n as f64;
        assert!((mean - spec.gyro_bias).norm() < 3e-4 * 3f64.sqrt());
    }

    #[test]
    fn streams_are_independent_and_reproducible() {
        let mut a = SensorRng::new(5);
        let mut b = SensorRng::new(5);
        assert_eq!(a.draw(8), b.draw(8));
        let d = a.draw(8);
        assert_ne!(d.gyro, d.accel);
    }
}
