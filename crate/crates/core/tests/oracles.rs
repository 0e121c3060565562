mod common;

use common::*;
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use se3_observer::geometry::{Mat3, Mat9, Vec3};
use se3_observer::observer_const::ConstGains;
use se3_observer::observer_riccati::{build_a, extract_gains, step_riccati, RiccatiState};
use se3_observer::sim::{simulate, ObserverKind, Scenario};

/// Solves `F X + X Fᵀ + W = 0` through the Kronecker form.
fn lyapunov(f: &Mat9, w: &Mat9) -> Mat9 {
    let i = DMatrix::<f64>::identity(9, 9);
    let fd = DMatrix::from_column_slice(9, 9, f.as_slice());
    let lhs = i.kronecker(&fd) + fd.kronecker(&i);
    let rhs = -DVector::from_column_slice(w.as_slice());
    let x = lhs.lu().solve(&rhs).expect("F is Hurwitz");
    Mat9::from_column_slice(x.as_slice())
}

/// Newton–Kleinman iteration for `AP + PAᵀ − PCᵀQCP + V = 0`.
fn are_solution(a: &Mat9, q: &Mat3, v: &Mat9) -> Mat9 {
    let mut c = nalgebra::SMatrix::<f64, 3, 9>::zeros();
    c.fixed_view_mut::<3, 3>(0, 0).fill_with_identity();
    // K₀ places every closed-loop pole at −1 when R = I
    let mut k = nalgebra::SMatrix::<f64, 9, 3>::zeros();
    k.fixed_view_mut::<3, 3>(0, 0).copy_from(&(Mat3::identity() * 3.0));
    k.fixed_view_mut::<3, 3>(3, 0).copy_from(&(Mat3::identity() * 3.0));
    k.fixed_view_mut::<3, 3>(6, 0).copy_from(&(-Mat3::identity()));
    let q_inv = q.try_inverse().unwrap();
    let mut p = Mat9::zeros();
    for _ in 0..50 {
        let f = a - k * c;
        let next = lyapunov(&f, &(v + k * q_inv * k.transpose()));
        let done = (next - p).amax() < 1e-14;
        p = next;
        k = p * c.transpose() * q;
        if done {
            break;
        }
    }
    p
}

#[test]
fn riccati_flow_settles_on_the_algebraic_solution() {
    let r = Mat3::identity();
    let a = build_a(&r);
    let mut rs = RiccatiState::reference();
    let p_inf = are_solution(&a, &rs.q, &rs.v);
    let pc = p_inf.fixed_columns::<3>(0).into_owned();
    let residual = a * p_inf + p_inf * a.transpose() - pc * rs.q * pc.transpose() + rs.v;
    assert!(residual.amax() < 1e-10, "ARE residual {}", residual.amax());
    let dt = 1e-2;
    for k in 0..20_000 {
        rs = step_riccati(&rs, &r, k as f64 * dt, dt).unwrap();
    }
    assert!((rs.p - p_inf).amax() < 1e-8, "gap {}", (rs.p - p_inf).amax());
    let gains = extract_gains(&rs);
    assert!((gains.k3 - p_inf.fixed_view::<3, 3>(0, 0) * rs.q).amax() < 1e-8);
}

#[test]
fn observer_at_truth_stays_there() {
    for kind in [ObserverKind::Constant, ObserverKind::Riccati] {
        let mut s = Scenario::reference_noise_free();
        s.t_end = 1.0;
        s.sensor.gyro_bias = Vec3::zeros();
        s.sensor.accel_bias = Vec3::zeros();
        s.observer0.rotation = *s.truth0.rotation.matrix();
        let run = simulate(&s, kind).unwrap();
        for r in &run.records {
            assert!(r.errors.total() <= 1e-8, "{} t={} {:?}", kind.name(), r.t, r.errors);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn constant_gain_run_follows_its_error_system(
        k1 in 0.2f64..3.0,
        k2 in 0.2f64..3.0,
        k3 in 0.5f64..12.0,
        k4 in 0.5f64..40.0,
        k5 in 0.1f64..3.0,
        bw in prop::array::uniform3(-3.0f64..3.0),
        ba in prop::array::uniform3(-3.0f64..3.0),
    ) {
        let mut s = Scenario::reference_noise_free();
        s.t_end = 2.0;
        s.const_gains = ConstGains { k1, k2, k3, k4, k5, c: 1.0 };
        s.sensor.gyro_bias = Vec3::from(bw);
        s.sensor.accel_bias = Vec3::from(ba);
        let run = simulate(&s, ObserverKind::Constant).unwrap();
        let gap = oracle_gap(&run, &Gains::Constant { k1, k2, k3, k4, k5 }, Vec3::from(bw), Vec3::from(ba), s.dt);
        prop_assert!(gap < 1e-9, "gap {gap}");
    }

    #[test]
    fn riccati_run_follows_its_error_system(
        q in 0.2f64..5.0,
        v in 0.01f64..1.0,
        p0 in 0.2f64..5.0,
        bw in prop::array::uniform3(-3.0f64..3.0),
        ba in prop::array::uniform3(-3.0f64..3.0),
    ) {
        let mut s = Scenario::reference_noise_free();
        s.t_end = 2.0;
        s.riccati = RiccatiState::from_scales(p0, q, v, 1.0, 1.0).unwrap();
        s.sensor.gyro_bias = Vec3::from(bw);
        s.sensor.accel_bias = Vec3::from(ba);
        let run = simulate(&s, ObserverKind::Riccati).unwrap();
        let gap = oracle_gap(&run, &Gains::Riccati { k1: 1.0, k2: 1.0, q, v, p0 }, Vec3::from(bw), Vec3::from(ba), s.dt);
        prop_assert!(gap < 1e-9, "gap {gap}");
    }
}
