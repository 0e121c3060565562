//! Variable-gain observer driven by a continuous Riccati equation.
//!
//! The translational error `x = (e_p, e_v, e_a)` is treated as the state of
//! the linear time-varying system `ẋ = A(t)x, y = Cx` with
//!
//! ```text
//! A(t) = [0 I 0; 0 0 −R(t); 0 0 0],   C = [I 0 0]
//! ```
//!
//! and the gains are read from the solution of
//! `Ṗ = AP + PAᵀ − PCᵀQCP + V` as `[K3; K4; K5] = PCᵀQ`.

use nalgebra::SMatrix;

use crate::dynamics::MeasurementFrame;
use crate::error::{Error, Result};
use crate::geometry::{eig_bounds_static, Mat3, Mat9, Vec3};
use crate::observer::{attitude_rates, MeasurementSpan, ObserverState};
use crate::ode::{rk4_step, OdeState};

type Mat9x3 = SMatrix<f64, 9, 3>;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RiccatiState {
    pub p: Mat9,
    pub q: Mat3,
    pub v: Mat9,
    pub k1: f64,
    pub k2: f64,
}

impl RiccatiState {
    /// Validates that `P`, `Q` and `V` are symmetric positive definite and
    /// `k1`, `k2` positive.
    pub fn new(p: Mat9, q: Mat3, v: Mat9, k1: f64, k2: f64) -> Result<Self> {
        check_spd(&p, "P")?;
        check_spd(&q, "Q")?;
        check_spd(&v, "V")?;
        if !(k1 > 0.0 && k2 > 0.0) {
            return Err(Error::ConfigInvalid(format!("k1, k2 must be positive, got {k1}, {k2}")));
        }
        Ok(Self { p, q, v, k1, k2 })
    }

    /// `P(0) = I₉`, `V = 0.1 I₉`, `Q = I₃`, `k1 = k2 = 1`.
    pub fn reference() -> Self {
        Self::from_scales(1.0, 1.0, 0.1, 1.0, 1.0).expect("reference parameters are valid")
    }

    /// `P(0) = p0·I₉`, `Q = q·I₃`, `V = v·I₉`.
    pub fn from_scales(p0: f64, q: f64, v: f64, k1: f64, k2: f64) -> Result<Self> {
        Self::new(Mat9::identity() * p0, Mat3::identity() * q, Mat9::identity() * v, k1, k2)
    }

    /// `(λ_min(P), λ_max(P))`
    pub fn p_bounds(&self) -> (f64, f64) {
        let e = self.p.symmetric_eigenvalues();
        (e.min(), e.max())
    }
}

fn check_spd<const N: usize>(m: &SMatrix<f64, N, N>, name: &str) -> Result<()> {
    let (lo, _) = eig_bounds_static(m)
        .map_err(|_| Error::ConfigInvalid(format!("{name} must be symmetric")))?;
    if !(lo > 0.0) {
        return Err(Error::ConfigInvalid(format!(
            "{name} must be positive definite (min eigenvalue {lo})"
        )));
    }
    Ok(())
}

/// Gain blocks `K3`, `K4`, `K5`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GainTriple {
    pub k3: Mat3,
    pub k4: Mat3,
    pub k5: Mat3,
}

pub fn build_a(r: &Mat3) -> Mat9 {
    let mut a = Mat9::zeros();
    a.fixed_view_mut::<3, 3>(0, 3).copy_from(&Mat3::identity());
    a.fixed_view_mut::<3, 3>(3, 6).copy_from(&(-r));
    a
}

fn c_transpose() -> Mat9x3 {
    let mut c = Mat9x3::zeros();
    c.fixed_view_mut::<3, 3>(0, 0).copy_from(&Mat3::identity());
    c
}

/// `M Mᵀ` with `M = [M₀ M₁ M₂]`, `M₀ = Cᵀ`, `M_{i+1} = Ṁ_i + AᵀM_i`.
///
/// For this `(A, C)` pair `M₀` and `M₁` are constant, so the derivative
/// terms vanish and `M₂ = [0; 0; −Rᵀ]`.
pub fn observability_certificate(r: &Mat3) -> Mat9 {
    let at = build_a(r).transpose();
    let m0 = c_transpose();
    let m1 = at * m0;
    let m2 = at * m1;
    let mut m = Mat9::zeros();
    m.fixed_view_mut::<9, 3>(0, 0).copy_from(&m0);
    m.fixed_view_mut::<9, 3>(0, 3).copy_from(&m1);
    m.fixed_view_mut::<9, 3>(0, 6).copy_from(&m2);
    m * m.transpose()
}

/// `PCᵀQ`, stacked as a 9×3 matrix.
fn stacked_gains(p: &Mat9, q: &Mat3) -> Mat9x3 {
    p.fixed_view::<9, 3>(0, 0) * q
}

/// `AP + PAᵀ − PCᵀQCP + V`
pub fn cre_rhs(p: &Mat9, r: &Mat3, q: &Mat3, v: &Mat9) -> Mat9 {
    let a = build_a(r);
    let g = stacked_gains(p, q);
    let cp = p.fixed_view::<3, 9>(0, 0);
    a * p + p * a.transpose() - g * cp + v
}

pub fn extract_gains(rs: &RiccatiState) -> GainTriple {
    split_gains(&stacked_gains(&rs.p, &rs.q))
}

fn split_gains(g: &Mat9x3) -> GainTriple {
    GainTriple {
        k3: g.fixed_view::<3, 3>(0, 0).into_owned(),
        k4: g.fixed_view::<3, 3>(3, 0).into_owned(),
        k5: g.fixed_view::<3, 3>(6, 0).into_owned(),
    }
}

fn settle(p: &Mat9, t: f64) -> Result<Mat9> {
    let p = (p + p.transpose()) * 0.5;
    let min_eig = p.symmetric_eigenvalues().min();
    if !(min_eig > 0.0) {
        return Err(Error::LostPositivity { t, min_eig });
    }
    Ok(p)
}

/// One RK4 step of the Riccati equation with `R` held over the step. `t` is
/// used only for error reporting.
pub fn step_riccati(rs: &RiccatiState, r: &Mat3, t: f64, dt: f64) -> Result<RiccatiState> {
    let p = rk4_step(&rs.p, dt, |_, p: &Mat9| {
        Ok::<_, std::convert::Infallible>(cre_rhs(p, r, &rs.q, &rs.v))
    })
    .unwrap_or_else(|e| match e {});
    Ok(RiccatiState { p: settle(&p, t)?, ..*rs })
}

/// Observer right-hand side for explicit gain blocks.
pub fn observer_rates(
    o: &ObserverState,
    m: &MeasurementFrame,
    g: &Vec3,
    k1: f64,
    k2: f64,
    gains: &GainTriple,
) -> ObserverState {
    let (rotation, gyro_bias) = attitude_rates(o, m, k1, k2);
    let r = m.rotation.matrix();
    let e_p = m.position - o.position;
    ObserverState {
        rotation,
        gyro_bias,
        position: o.velocity + gains.k3 * e_p,
        velocity: g + r * (m.acceleration - o.accel_bias) + gains.k4 * e_p,
        accel_bias: gains.k5 * e_p,
    }
}

#[derive(Clone, Copy, Debug)]
struct Joint {
    obs: ObserverState,
    p: Mat9,
}

impl OdeState for Joint {
    fn axpy(&self, h: f64, d: &Self) -> Self {
        Self {
            obs: self.obs.axpy(h, &d.obs),
            p: self.p + d.p * h,
        }
    }
}

/// Advances the observer and its Riccati matrix together. Each RK4 stage
/// uses gains extracted from that stage's `P`.
pub fn step_observer_var<M: MeasurementSpan>(
    o: &ObserverState,
    m: &M,
    g: &Vec3,
    rs: &RiccatiState,
    dt: f64,
) -> Result<(ObserverState, RiccatiState)> {
    let x0 = Joint { obs: *o, p: rs.p };
    let x1 = rk4_step(&x0, dt, |stage, x: &Joint| {
        let frame = m.at(stage);
        let gains = split_gains(&stacked_gains(&x.p, &rs.q));
        Ok::<_, std::convert::Infallible>(Joint {
            obs: observer_rates(&x.obs, frame, g, rs.k1, rs.k2, &gains),
            p: cre_rhs(&x.p, frame.rotation.matrix(), &rs.q, &rs.v),
        })
    })
    .unwrap_or_else(|e| match e {});
    let t_end = m.at(crate::ode::Stage::Start).t + dt;
    let p = settle(&x1.p, t_end)?;
    Ok((x1.obs, RiccatiState { p, ..*rs }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::exp_so3;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::FRAC_PI_2;

    #[test]
    fn a_matrix_blocks() {
        let a = build_a(&Mat3::identity());
        assert_eq!(a.fixed_view::<3, 3>(3, 6).into_owned(), -Mat3::identity());
        assert_eq!(a.fixed_view::<3, 3>(0, 3).into_owned(), Mat3::identity());
        let r = exp_so3(&Vec3::new(0.0, 0.0, FRAC_PI_2));
        let a = build_a(r.matrix());
        #[rustfmt::skip]
        let expected = -Mat3::new(0.0, -1.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 1.0);
        assert_abs_diff_eq!(a.fixed_view::<3, 3>(3, 6).into_owned(), expected, epsilon = 1e-15);
    }

    #[test]
    fn a_is_nilpotent() {
        for k in 0..20 {
            let r = exp_so3(&Vec3::new(k as f64, 0.5, -0.1 * k as f64));
            let a = build_a(r.matrix());
            assert_eq!(a * a * a, Mat9::zeros());
        }
    }

    #[test]
    fn certificate_is_identity_for_rotations() {
        assert_eq!(observability_certificate(&Mat3::identity()), Mat9::identity());
        let r = exp_so3(&Vec3::new(1.0, 2.0, 3.0));
        assert_abs_diff_eq!(observability_certificate(r.matrix()), Mat9::identity(), epsilon = 1e-12);
    }

    #[test]
    fn certificate_exposes_non_orthogonal_block() {
        #[rustfmt::skip]
        let b = Mat3::new(1.0, 2.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.5, 3.0);
        let mm = observability_certificate(&b);
        assert_eq!(mm.fixed_view::<3, 3>(6, 6).into_owned(), b.transpose() * b);
        assert_ne!(mm, Mat9::identity());
    }

    #[test]
    fn cre_rhs_at_identity_by_hand() {
        let rhs = cre_rhs(&Mat9::identity(), &Mat3::identity(), &Mat3::identity(), &(Mat9::identity() * 0.1));
        // A + Aᵀ − CᵀC + 0.1 I, block by block
        let i3 = Mat3::identity();
        let z3 = Mat3::zeros();
        let expected_blocks = [
            [i3 * (-0.9), i3, z3],
            [i3, i3 * 0.1, -i3],
            [z3, -i3, i3 * 0.1],
        ];
        for (bi, row) in expected_blocks.iter().enumerate() {
            for (bj, block) in row.iter().enumerate() {
                assert_eq!(rhs.fixed_view::<3, 3>(3 * bi, 3 * bj).into_owned(), *block, "block ({bi},{bj})");
            }
        }
        assert_eq!(cre_rhs(&Mat9::zeros(), &Mat3::identity(), &Mat3::zeros(), &Mat9::zeros()), Mat9::zeros());
    }

    #[test]
    fn cre_rhs_is_symmetric() {
        let r = exp_so3(&Vec3::new(0.2, 1.1, -0.4));
        let l = Mat9::from_fn(|i, j| ((i * 9 + j) as f64 * 0.37).sin());
        let p = l * l.transpose() + Mat9::identity();
        let rhs = cre_rhs(&p, r.matrix(), &(Mat3::identity() * 2.0), &(Mat9::identity() * 0.1));
        assert!((rhs - rhs.transpose()).norm() <= 1e-12 * rhs.norm());
    }

    #[test]
    fn gains_from_identity() {
        let rs = RiccatiState::reference();
        let g = extract_gains(&rs);
        assert_eq!(g.k3, Mat3::identity());
        assert_eq!(g.k4, Mat3::zeros());
        assert_eq!(g.k5, Mat3::zeros());
        let rs = RiccatiState { q: Mat3::identity() * 2.0, ..rs };
        assert_eq!(extract_gains(&rs).k3, Mat3::identity() * 2.0);
    }

    #[test]
    fn validation_rejects_indefinite_inputs() {
        let mut p = Mat9::identity();
        p[(4, 4)] = -1.0;
        assert!(RiccatiState::new(p, Mat3::identity(), Mat9::identity(), 1.0, 1.0).is_err());
        assert!(RiccatiState::from_scales(1.0, 1.0, 0.1, 0.0, 1.0).is_err());
    }

    #[test]
    fn loss_of_positivity_is_an_error() {
        // A huge step with a large Q pushes P indefinite.
        let rs = RiccatiState::from_scales(1.0, 1e4, 0.1, 1.0, 1.0).unwrap();
        let err = step_riccati(&rs, &Mat3::identity(), 3.0, 0.01).unwrap_err();
        assert!(matches!(err, Error::LostPositivity { t, .. } if t == 3.0));
    }

    #[test]
    fn single_step_keeps_symmetry() {
        let rs = RiccatiState::reference();
        let r = exp_so3(&Vec3::new(0.3, 0.2, 0.1));
        let next = step_riccati(&rs, r.matrix(), 0.0, 1e-3).unwrap();
        assert_eq!(next.p, next.p.transpose());
    }
}
