//! Fixed-step classical Runge–Kutta integration.

/// Where inside a step a right-hand side is being evaluated.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Stage {
    Start,
    Mid,
    End,
}

impl Stage {
    /// Offset from the start of a step of length `dt`.
    pub fn offset(self, dt: f64) -> f64 {
        match self {
            Stage::Start => 0.0,
            Stage::Mid => 0.5 * dt,
            Stage::End => dt,
        }
    }
}

/// A state that lives in a vector space, so it can be advanced by RK4.
pub trait OdeState: Sized {
    /// `self + h * d`
    fn axpy(&self, h: f64, d: &Self) -> Self;
}

/// One RK4 step. `f` is evaluated once at [`Stage::Start`], twice at
/// [`Stage::Mid`] and once at [`Stage::End`].
pub fn rk4_step<S, F, E>(x: &S, dt: f64, mut f: F) -> Result<S, E>
where
    S: OdeState,
    F: FnMut(Stage, &S) -> Result<S, E>,
{
    let k1 = f(Stage::Start, x)?;
    let k2 = f(Stage::Mid, &x.axpy(0.5 * dt, &k1))?;
    let k3 = f(Stage::Mid, &x.axpy(0.5 * dt, &k2))?;
    let k4 = f(Stage::End, &x.axpy(dt, &k3))?;
    Ok(x.axpy(dt / 6.0, &k1)
        .axpy(dt / 3.0, &k2)
        .axpy(dt / 3.0, &k3)
        .axpy(dt / 6.0, &k4))
}

impl OdeState for f64 {
    fn axpy(&self, h: f64, d: &Self) -> Self {
        self + h * d
    }
}

impl<const R: usize, const C: usize> OdeState for nalgebra::SMatrix<f64, R, C> {
    fn axpy(&self, h: f64, d: &Self) -> Self {
        self + d * h
    }
}
