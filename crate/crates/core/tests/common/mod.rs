//! Reference computations written independently of the library: a plain RK4
//! over flat vectors and the observer error systems in closed form.
#![allow(dead_code)]

use nalgebra::{DVector, Matrix3, SMatrix, Vector3};
use se3_observer::sim::{SimulationRun, StepRecord};

pub type M3 = Matrix3<f64>;
pub type V3 = Vector3<f64>;
pub type M9 = SMatrix<f64, 9, 9>;

pub fn rk4(y: &DVector<f64>, t: f64, h: f64, f: &dyn Fn(f64, &DVector<f64>) -> DVector<f64>) -> DVector<f64> {
    let k1 = f(t, y);
    let k2 = f(t + h / 2.0, &(y + &k1 * (h / 2.0)));
    let k3 = f(t + h / 2.0, &(y + &k2 * (h / 2.0)));
    let k4 = f(t + h, &(y + &k3 * h));
    y + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0)
}

pub fn omega(t: f64) -> V3 {
    V3::new(-(10.0 * t).sin(), (10.0 * t).cos(), 0.6 * (5.0 * t).sin())
}

pub fn skew(w: &V3) -> M3 {
    M3::new(0.0, -w.z, w.y, w.z, 0.0, -w.x, -w.y, w.x, 0.0)
}

pub fn unskew(m: &M3) -> V3 {
    V3::new(m[(2, 1)], m[(0, 2)], m[(1, 0)])
}

pub fn rot_z(theta: f64) -> M3 {
    let (s, c) = theta.sin_cos();
    M3::new(c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0)
}

/// Unit quaternion `(w, x, y, z)` to rotation matrix.
pub fn quat_to_rot(q: [f64; 4]) -> M3 {
    let n = q.iter().map(|x| x * x).sum::<f64>().sqrt();
    let [w, x, y, z] = q.map(|c| c / n);
    M3::new(
        1.0 - 2.0 * (y * y + z * z),
        2.0 * (x * y - w * z),
        2.0 * (x * z + w * y),
        2.0 * (x * y + w * z),
        1.0 - 2.0 * (x * x + z * z),
        2.0 * (y * z - w * x),
        2.0 * (x * z - w * y),
        2.0 * (y * z + w * x),
        1.0 - 2.0 * (x * x + y * y),
    )
}

fn get3(y: &DVector<f64>, at: usize) -> V3 {
    V3::new(y[at], y[at + 1], y[at + 2])
}

fn get33(y: &DVector<f64>, at: usize) -> M3 {
    M3::from_column_slice(&y.as_slice()[at..at + 9])
}

fn put(out: &mut DVector<f64>, at: usize, vals: &[f64]) {
    out.as_mut_slice()[at..at + vals.len()].copy_from_slice(vals);
}

/// Layout: `R (9) | E_R (9) | e_Ω | e_p | e_v | e_a | P (81, optional)`.
const R_AT: usize = 0;
const ER_AT: usize = 9;
const EW_AT: usize = 18;
const EP_AT: usize = 21;
const EV_AT: usize = 24;
const EA_AT: usize = 27;
const P_AT: usize = 30;

pub enum Gains {
    Constant { k1: f64, k2: f64, k3: f64, k4: f64, k5: f64 },
    Riccati { k1: f64, k2: f64, q: f64, v: f64, p0: f64 },
}

/// Error-system snapshot `(E_R, e_Ω, e_p, e_v, e_a)`.
pub type Errors = (M3, V3, V3, V3, V3);

fn error_rates(t: f64, y: &DVector<f64>, gains: &Gains) -> DVector<f64> {
    let r = get33(y, R_AT);
    let e_r = get33(y, ER_AT);
    let e_w = get3(y, EW_AT);
    let e_p = get3(y, EP_AT);
    let e_v = get3(y, EV_AT);
    let e_a = get3(y, EA_AT);
    let mut out = DVector::zeros(y.len());
    put(&mut out, R_AT, (r * skew(&omega(t))).as_slice());
    let (k1, k2) = match gains {
        Gains::Constant { k1, k2, .. } | Gains::Riccati { k1, k2, .. } => (*k1, *k2),
    };
    put(&mut out, ER_AT, (-r * skew(&e_w) - e_r * k1).as_slice());
    let rt_er = r.transpose() * e_r;
    put(&mut out, EW_AT, (unskew(&((rt_er - rt_er.transpose()) * 0.5)) * k2).as_slice());
    match gains {
        Gains::Constant { k3, k4, k5, .. } => {
            put(&mut out, EP_AT, (e_v - e_p * *k3).as_slice());
            put(&mut out, EV_AT, (-r * e_a - e_p * *k4).as_slice());
            put(&mut out, EA_AT, (r.transpose() * e_p * *k5).as_slice());
        }
        Gains::Riccati { q, v, .. } => {
            let p = M9::from_column_slice(&y.as_slice()[P_AT..P_AT + 81]);
            let mut a = M9::zeros();
            for i in 0..3 {
                a[(i, 3 + i)] = 1.0;
            }
            a.view_mut((3, 6), (3, 3)).copy_from(&(-r));
            // C = [I 0 0], Q = q I, V = v I
            let pc = p.fixed_columns::<3>(0).into_owned();
            let p_dot = a * p + p * a.transpose() - pc * pc.transpose() * *q + M9::identity() * *v;
            let k3 = p.view((0, 0), (3, 3)) * *q;
            let k4 = p.view((3, 0), (3, 3)) * *q;
            let k5 = p.view((6, 0), (3, 3)) * *q;
            put(&mut out, EP_AT, (e_v - k3 * e_p).as_slice());
            put(&mut out, EV_AT, (-r * e_a - k4 * e_p).as_slice());
            put(&mut out, EA_AT, (-(k5 * e_p)).as_slice());
            put(&mut out, P_AT, p_dot.as_slice());
        }
    }
    out
}

/// Integrates the truth attitude together with the error system from the
/// reference initial conditions, returning the errors on the grid `k·dt`.
pub fn integrate_error_system(gains: &Gains, b_w: V3, b_a: V3, dt: f64, steps: usize) -> Vec<Errors> {
    let riccati = matches!(gains, Gains::Riccati { .. });
    let mut y = DVector::zeros(if riccati { P_AT + 81 } else { P_AT });
    let r0 = rot_z(-std::f64::consts::PI / 3.0);
    put(&mut y, R_AT, r0.as_slice());
    // observer starts at (I, 0, 0, 0, 0)
    put(&mut y, ER_AT, (r0 - M3::identity()).as_slice());
    put(&mut y, EW_AT, b_w.as_slice());
    put(&mut y, EA_AT, b_a.as_slice());
    if let Gains::Riccati { p0, .. } = gains {
        put(&mut y, P_AT, (M9::identity() * *p0).as_slice());
    }
    let f = |t: f64, y: &DVector<f64>| error_rates(t, y, gains);
    let mut out = Vec::with_capacity(steps + 1);
    for k in 0..=steps {
        out.push((get33(&y, ER_AT), get3(&y, EW_AT), get3(&y, EP_AT), get3(&y, EV_AT), get3(&y, EA_AT)));
        if k < steps {
            y = rk4(&y, k as f64 * dt, dt, &f);
        }
    }
    out
}

pub fn record_errors(r: &StepRecord, b_w: V3, b_a: V3) -> Errors {
    (
        r.truth.rotation.matrix() - r.estimate.rotation,
        b_w - r.estimate.gyro_bias,
        r.truth.position - r.estimate.position,
        r.truth.velocity - r.estimate.velocity,
        b_a - r.estimate.accel_bias,
    )
}

pub fn sup_diff(a: &Errors, b: &Errors) -> f64 {
    [
        (a.0 - b.0).amax(),
        (a.1 - b.1).amax(),
        (a.2 - b.2).amax(),
        (a.3 - b.3).amax(),
        (a.4 - b.4).amax(),
    ]
    .into_iter()
    .fold(0.0, f64::max)
}

/// Largest component-wise gap between a simulated run and the error-system
/// reference over the whole run.
pub fn oracle_gap(run: &SimulationRun, gains: &Gains, b_w: V3, b_a: V3, dt: f64) -> f64 {
    let reference = integrate_error_system(gains, b_w, b_a, dt, run.records.len());
    run.records
        .iter()
        .zip(&reference)
        .map(|(r, e)| sup_diff(&record_errors(r, b_w, b_a), e))
        .fold(0.0, f64::max)
}

/// Sylvester's criterion on a symmetric 3×3 matrix.
pub fn is_pd3(m: &M3) -> bool {
    m[(0, 0)] > 0.0 && m[(0, 0)] * m[(1, 1)] - m[(0, 1)] * m[(1, 0)] > 0.0 && m.determinant() > 0.0
}
