use super::{ActionChunk, Observation};

/// Conditional velocity field `v(x_tau, o, tau)` over action chunks.
pub trait VelocityField: Send + Sync {
    /// `(rows, cols)` of the chunks this field transports.
    fn shape(&self) -> (usize, usize);

    fn eval(&self, x: &ActionChunk, obs: &Observation, tau: f64) -> ActionChunk;

    /// `J^T c`, where `J` is the Jacobian with respect to `x` of the
    /// denoised estimate `x + (1 - tau) v(x, o, tau)`.
    fn vjp(&self, x: &ActionChunk, obs: &Observation, tau: f64, cotangent: &ActionChunk) -> ActionChunk;

    /// Per-column `(mean, std)` of the source draw `x0`; `None` is `N(0, I)`.
    fn source(&self) -> Option<(&[f64], &[f64])> {
        None
    }
}

impl<F: VelocityField + ?Sized> VelocityField for &F {
    fn shape(&self) -> (usize, usize) {
        (**self).shape()
    }

    fn eval(&self, x: &ActionChunk, obs: &Observation, tau: f64) -> ActionChunk {
        (**self).eval(x, obs, tau)
    }

    fn vjp(&self, x: &ActionChunk, obs: &Observation, tau: f64, cotangent: &ActionChunk) -> ActionChunk {
        (**self).vjp(x, obs, tau, cotangent)
    }

    fn source(&self) -> Option<(&[f64], &[f64])> {
        (**self).source()
    }
}

impl<F: VelocityField + ?Sized> VelocityField for Box<F> {
    fn shape(&self) -> (usize, usize) {
        (**self).shape()
    }

    fn eval(&self, x: &ActionChunk, obs: &Observation, tau: f64) -> ActionChunk {
        (**self).eval(x, obs, tau)
    }

    fn vjp(&self, x: &ActionChunk, obs: &Observation, tau: f64, cotangent: &ActionChunk) -> ActionChunk {
        (**self).vjp(x, obs, tau, cotangent)
    }

    fn source(&self) -> Option<(&[f64], &[f64])> {
        (**self).source()
    }
}

/// One-step extrapolation to the end of the linear path: `x + (1 - tau) v`.
/// Returns `x` unchanged at `tau >= 1`.
pub fn denoised_estimate(x: &ActionChunk, v: &ActionChunk, tau: f64) -> ActionChunk {
    let mut out = x.clone();
    if tau < 1.0 {
        out.axpy(1.0 - tau, v);
    }
    out
}
