use std::sync::Arc;

use super::{ActionChunk, Observation, VelocityField};
use crate::error::{Error, Result};

type MeanFn = Arc<dyn Fn(&Observation) -> ActionChunk + Send + Sync>;

/// Exact velocity field of the linear path from `N(0, I)` to
/// `N(mu(o), diag(sigma^2))`, with one standard deviation per column.
///
/// For `x_tau = (1 - tau) x0 + tau x1` each entry is Gaussian with
/// variance `D = (1 - tau)^2 + tau^2 sigma^2`, and
///
/// * `E[x1 | x] = mu + tau sigma^2 (x - tau mu) / D`
/// * `E[x0 | x] = (1 - tau) (x - tau mu) / D`
/// * `v = E[x1 | x] - E[x0 | x]`.
///
/// The denoised estimate `x + (1 - tau) v` is exactly `E[x1 | x]`, affine in
/// `x` with slope `tau sigma^2 / D`.
#[derive(Clone)]
pub struct GaussianField {
    rows: usize,
    cols: usize,
    sigma: Vec<f64>,
    mean: MeanFn,
}

impl std::fmt::Debug for GaussianField {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("GaussianField")
            .field("rows", &self.rows)
            .field("cols", &self.cols)
            .field("sigma", &self.sigma)
            .finish_non_exhaustive()
    }
}

impl GaussianField {
    pub fn constant(mean: ActionChunk, sigma: Vec<f64>) -> Result<Self> {
        let (rows, cols) = mean.shape();
        Self::conditional(rows, cols, sigma, move |_| mean.clone())
    }

    pub fn conditional(
        rows: usize,
        cols: usize,
        sigma: Vec<f64>,
        mean: impl Fn(&Observation) -> ActionChunk + Send + Sync + 'static,
    ) -> Result<Self> {
        if sigma.len() != cols {
            return Err(Error::invalid("one sigma per column required"));
        }
        if sigma.iter().any(|&s| !(s > 0.0 && s.is_finite())) {
            return Err(Error::invalid("sigma must be positive"));
        }
        Ok(GaussianField {
            rows,
            cols,
            sigma,
            mean: Arc::new(mean),
        })
    }

    pub fn mean(&self, obs: &Observation) -> ActionChunk {
        (self.mean)(obs)
    }

    pub fn sigma(&self) -> &[f64] {
        &self.sigma
    }
}

impl VelocityField for GaussianField {
    fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    fn eval(&self, x: &ActionChunk, obs: &Observation, tau: f64) -> ActionChunk {
        let mu = self.mean(obs);
        ActionChunk::from_fn(self.rows, self.cols, |t, d| {
            let s2 = self.sigma[d] * self.sigma[d];
            let var = (1.0 - tau).powi(2) + tau * tau * s2;
            let centered = x[(t, d)] - tau * mu[(t, d)];
            let e1 = mu[(t, d)] + tau * s2 * centered / var;
            let e0 = (1.0 - tau) * centered / var;
            e1 - e0
        })
    }

    fn vjp(&self, _x: &ActionChunk, _obs: &Observation, tau: f64, cotangent: &ActionChunk) -> ActionChunk {
        ActionChunk::from_fn(self.rows, self.cols, |t, d| {
            let s2 = self.sigma[d] * self.sigma[d];
            let var = (1.0 - tau).powi(2) + tau * tau * s2;
            tau * s2 / var * cotangent[(t, d)]
        })
    }
}
