//! SO(3)/SE(3) primitives and the small amount of dense linear algebra the
//! observers need.
//!
//! Vectors and 3×3 matrices are plain `nalgebra` types. [`RotationMatrix`]
//! wraps a `Matrix3` that has been checked to lie on SO(3); the observer's
//! attitude estimate is deliberately *not* wrapped, since it lives in the
//! ambient space of all 3×3 matrices.

use nalgebra::{DMatrix, Matrix3, Matrix4, SMatrix, Vector3};

use crate::error::{Error, Result};

pub type Vec3 = Vector3<f64>;
pub type Mat3 = Matrix3<f64>;
pub type Mat4 = Matrix4<f64>;
pub type Mat9 = SMatrix<f64, 9, 9>;
pub type Vec9 = SMatrix<f64, 9, 1>;

/// Orthogonality tolerance for rotations built in-process.
pub const TOL_ORTH: f64 = 1e-9;
/// Orthogonality tolerance for rotations that come from measured data.
pub const TOL_ORTH_MEASURED: f64 = 1e-6;
/// Tolerance on the symmetric part of a matrix handed to [`vee`].
pub const TOL_SKEW: f64 = 1e-9;

const EXP_TAYLOR_THRESHOLD: f64 = 1e-8;
const MIN_SINGULAR_VALUE: f64 = 1e-12;
const RANK_RTOL: f64 = 1e-12;

/// A 3×3 matrix known to be in SO(3) up to a stated tolerance.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RotationMatrix(Mat3);

impl RotationMatrix {
    pub fn identity() -> Self {
        Self(Mat3::identity())
    }

    /// Checks `m` against [`TOL_ORTH`].
    pub fn new(m: Mat3) -> Result<Self> {
        Self::with_tolerance(m, TOL_ORTH)
    }

    pub fn with_tolerance(m: Mat3, tol: f64) -> Result<Self> {
        let defect = orthogonality_defect(&m);
        let det = m.determinant();
        if !(defect <= tol) || !(det > 0.0) {
            return Err(Error::NotRotation { defect, det });
        }
        Ok(Self(m))
    }

    /// Wraps `m` without checking. Callers must guarantee membership in SO(3).
    pub fn new_unchecked(m: Mat3) -> Self {
        Self(m)
    }

    pub fn matrix(&self) -> &Mat3 {
        &self.0
    }

    pub fn into_inner(self) -> Mat3 {
        self.0
    }

    pub fn transpose(&self) -> Self {
        Self(self.0.transpose())
    }
}

impl Default for RotationMatrix {
    fn default() -> Self {
        Self::identity()
    }
}

/// `‖RᵀR − I‖` in the Frobenius norm.
pub fn orthogonality_defect(m: &Mat3) -> f64 {
    (m.transpose() * m - Mat3::identity()).norm()
}

/// Cross-product matrix: `hat(v) * w == v × w`.
#[rustfmt::skip]
pub fn hat(v: &Vec3) -> Mat3 {
    Mat3::new(
         0.0, -v.z,  v.y,
         v.z,  0.0, -v.x,
        -v.y,  v.x,  0.0,
    )
}

/// Inverse of [`hat`]. Fails if the symmetric part of `a` exceeds [`TOL_SKEW`].
pub fn vee(a: &Mat3) -> Result<Vec3> {
    let sym = (a + a.transpose()) * 0.5;
    let worst = sym.amax();
    if worst > TOL_SKEW {
        return Err(Error::NotSkew(worst));
    }
    Ok(vee_unchecked(a))
}

/// Reads the axial vector of `a` without checking skew-symmetry.
pub(crate) fn vee_unchecked(a: &Mat3) -> Vec3 {
    Vec3::new(a[(2, 1)], a[(0, 2)], a[(1, 0)])
}

/// Orthogonal projection onto so(3): `(A − Aᵀ)/2`.
pub fn project_skew(a: &Mat3) -> Mat3 {
    (a - a.transpose()) * 0.5
}

/// `π_so3(A)_∨`, the axial vector of the skew part of `a`.
pub fn skew_axial(a: &Mat3) -> Vec3 {
    vee_unchecked(&project_skew(a))
}

/// Exponential map so(3) → SO(3) via the Rodrigues formula.
pub fn exp_so3(v: &Vec3) -> RotationMatrix {
    let theta = v.norm();
    let k = hat(v);
    let k2 = k * k;
    let m = if theta < EXP_TAYLOR_THRESHOLD {
        Mat3::identity() + k + k2 * 0.5
    } else {
        let a = theta.sin() / theta;
        let b = (1.0 - theta.cos()) / (theta * theta);
        Mat3::identity() + k * a + k2 * b
    };
    RotationMatrix(m)
}

/// Nearest rotation to `m` in the Frobenius norm: `U diag(1, 1, det(UVᵀ)) Vᵀ`.
pub fn project_so3(m: &Mat3) -> Result<RotationMatrix> {
    let svd = m.svd(true, true);
    let smallest = svd.singular_values.min();
    if !(smallest >= MIN_SINGULAR_VALUE) {
        return Err(Error::SingularBlock(smallest));
    }
    let u = svd.u.expect("svd computed with u");
    let v_t = svd.v_t.expect("svd computed with v_t");
    let d = (u * v_t).determinant().signum();
    let r = u * Mat3::from_diagonal(&Vec3::new(1.0, 1.0, d)) * v_t;
    Ok(RotationMatrix(r))
}

/// Projects a homogeneous 4×4 matrix onto SE(3). The rotation is the
/// special-orthogonal polar factor of the top-left block; the translation
/// column is passed through.
pub fn project_se3(a: &Mat4) -> Result<(RotationMatrix, Vec3)> {
    let block: Mat3 = a.fixed_view::<3, 3>(0, 0).into_owned();
    let translation: Vec3 = a.fixed_view::<3, 1>(0, 3).into_owned();
    Ok((project_so3(&block)?, translation))
}

/// Assembles `[R t; 0 1]`.
pub fn homogeneous(r: &Mat3, t: &Vec3) -> Mat4 {
    let mut m = Mat4::identity();
    m.fixed_view_mut::<3, 3>(0, 0).copy_from(r);
    m.fixed_view_mut::<3, 1>(0, 3).copy_from(t);
    m
}

fn numerical_rank(singular_values: &[f64]) -> usize {
    let largest = singular_values.iter().cloned().fold(0.0, f64::max);
    let cutoff = largest * RANK_RTOL;
    singular_values.iter().filter(|&&s| s > cutoff).count()
}

/// Moore–Penrose pseudo-inverse of a full-rank matrix.
///
/// Returns [`Error::RankDeficient`] when the numerical rank is below
/// `min(rows, cols)`.
pub fn pseudo_inverse(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let required = m.nrows().min(m.ncols());
    let svd = m.clone().svd(true, true);
    let rank = numerical_rank(svd.singular_values.as_slice());
    if rank < required {
        return Err(Error::RankDeficient { rank, required });
    }
    let eps = svd.singular_values.max() * RANK_RTOL;
    svd.pseudo_inverse(eps)
        .map_err(|e| Error::InvalidLandmarks(e.to_string()))
}

/// Extreme eigenvalues `(λ_min, λ_max)` of a symmetric matrix.
pub fn eig_bounds(s: &DMatrix<f64>) -> Result<(f64, f64)> {
    if !s.is_square() {
        return Err(Error::NotSymmetric(f64::INFINITY));
    }
    let asym = (s - s.transpose()).norm();
    if !(asym <= 1e-9) {
        return Err(Error::NotSymmetric(asym));
    }
    let sym = (s + s.transpose()) * 0.5;
    let eig = sym.symmetric_eigenvalues();
    Ok((eig.min(), eig.max()))
}

/// [`eig_bounds`] for statically sized matrices.
pub fn eig_bounds_static<const N: usize>(s: &SMatrix<f64, N, N>) -> Result<(f64, f64)> {
    eig_bounds(&DMatrix::from_column_slice(N, N, s.as_slice()))
}

/// Landmarks in homogeneous coordinates, one per column (4×l).
#[derive(Clone, Debug, PartialEq)]
pub struct HomogeneousPointSet(DMatrix<f64>);

impl HomogeneousPointSet {
    pub fn new(m: DMatrix<f64>) -> Result<Self> {
        if m.nrows() != 4 {
            return Err(Error::InvalidLandmarks(format!(
                "expected 4 rows, got {}",
                m.nrows()
            )));
        }
        if m.ncols() < 4 {
            return Err(Error::InvalidLandmarks(format!(
                "need at least 4 landmarks, got {}",
                m.ncols()
            )));
        }
        if m.row(3).iter().any(|&w| w != 1.0) {
            return Err(Error::InvalidLandmarks("last row must be all ones".into()));
        }
        let rank = numerical_rank(m.clone().singular_values().as_slice());
        if rank < 4 {
            return Err(Error::RankDeficient { rank, required: 4 });
        }
        Ok(Self(m))
    }

    pub fn from_points(points: &[Vec3]) -> Result<Self> {
        let m = DMatrix::from_fn(4, points.len(), |i, j| {
            if i < 3 {
                points[j][i]
            } else {
                1.0
            }
        });
        Self::new(m)
    }

    /// The eight vertices of `[-1, 1]³`.
    pub fn unit_cube() -> Self {
        let mut pts = Vec::with_capacity(8);
        for &x in &[-1.0, 1.0] {
            for &y in &[-1.0, 1.0] {
                for &z in &[-1.0, 1.0] {
                    pts.push(Vec3::new(x, y, z));
                }
            }
        }
        Self::from_points(&pts).expect("cube vertices span R^3")
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.0.ncols() == 0
    }

    pub fn point(&self, i: usize) -> Vec3 {
        Vec3::new(self.0[(0, i)], self.0[(1, i)], self.0[(2, i)])
    }

    /// `b†` (l×4).
    pub fn pseudo_inverse(&self) -> Result<DMatrix<f64>> {
        pseudo_inverse(&self.0)
    }
}

impl Default for HomogeneousPointSet {
    fn default() -> Self {
        Self::unit_cube()
    }
}
