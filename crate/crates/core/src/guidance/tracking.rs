use crate::error::{Error, Result};
use crate::policy::ActionChunk;

/// Weighted quadratic pull toward a reference chunk:
/// `1/2 sum_t sum_d lambda_d w_t (A_td - A_des_td)^2`.
#[derive(Debug, Clone, PartialEq)]
pub struct TrackingSpec {
    pub a_des: ActionChunk,
    /// Per-column strengths.
    pub lambda: Vec<f64>,
    /// Per-row weights.
    pub weights: Vec<f64>,
}

impl TrackingSpec {
    pub fn new(a_des: ActionChunk, lambda: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        let spec = TrackingSpec { a_des, lambda, weights };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        let (h, d) = self.a_des.shape();
        if self.lambda.len() != d || self.weights.len() != h {
            return Err(Error::invalid(format!(
                "tracking spec for a {h}x{d} chunk has {} strengths and {} weights",
                self.lambda.len(),
                self.weights.len()
            )));
        }
        if self.lambda.iter().chain(&self.weights).any(|&v| !(v >= 0.0)) {
            return Err(Error::invalid("tracking strengths and weights must be non-negative"));
        }
        Ok(())
    }

    pub fn potential(&self, a: &ActionChunk) -> f64 {
        let mut total = 0.0;
        for (t, &w) in self.weights.iter().enumerate() {
            for (d, &l) in self.lambda.iter().enumerate() {
                let r = a[(t, d)] - self.a_des[(t, d)];
                total += l * w * r * r;
            }
        }
        0.5 * total
    }

    pub fn gradient(&self, a: &ActionChunk) -> ActionChunk {
        ActionChunk::from_fn(a.rows(), a.cols(), |t, d| {
            self.lambda[d] * self.weights[t] * (a[(t, d)] - self.a_des[(t, d)])
        })
    }
}

pub fn tracking_potential(a: &ActionChunk, spec: &TrackingSpec) -> f64 {
    spec.potential(a)
}

pub fn tracking_gradient(a: &ActionChunk, spec: &TrackingSpec) -> ActionChunk {
    spec.gradient(a)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn worked_examples() {
        let spec = TrackingSpec::new(ActionChunk::filled(1, 1, 1.0), vec![2.0], vec![1.0]).unwrap();
        assert_eq!(tracking_potential(&ActionChunk::filled(1, 1, 3.0), &spec), 4.0);
        assert_eq!(tracking_potential(&spec.a_des.clone(), &spec), 0.0);
        assert_eq!(tracking_gradient(&spec.a_des.clone(), &spec), ActionChunk::zeros(1, 1));
    }

    #[test]
    fn linear_in_weights() {
        let a_des = ActionChunk::from_fn(3, 2, |t, d| (t * 2 + d) as f64 * 0.1);
        let a = ActionChunk::from_fn(3, 2, |t, d| (t as f64 - d as f64) * 0.3);
        let s1 = TrackingSpec::new(a_des.clone(), vec![1.0, 0.5], vec![0.2, 1.0, 0.7]).unwrap();
        let s2 = TrackingSpec::new(a_des, vec![1.0, 0.5], vec![0.4, 2.0, 1.4]).unwrap();
        assert!((2.0 * s1.potential(&a) - s2.potential(&a)).abs() < 1e-14);
    }

    #[test]
    fn gradient_descent_converges_below_step_bound() {
        let a_des = ActionChunk::from_fn(4, 3, |t, d| (t + d) as f64);
        let spec = TrackingSpec::new(a_des.clone(), vec![1.0, 2.0, 4.0], vec![1.0, 0.5, 0.25, 1.0]).unwrap();
        let max_curv = 4.0;
        let eta = 1.9 / max_curv;
        let mut a = ActionChunk::zeros(4, 3);
        for _ in 0..2000 {
            let g = spec.gradient(&a);
            a.axpy(-eta, &g);
        }
        assert!(a.max_abs_diff(&a_des) < 1e-9);

        // Just above the bound the stiffest coordinate oscillates outward.
        let mut b = ActionChunk::zeros(4, 3);
        for _ in 0..200 {
            let g = spec.gradient(&b);
            b.axpy(-2.1 / max_curv, &g);
        }
        assert!(b.max_abs_diff(&a_des) > 1.0);
    }

    #[test]
    fn rejects_bad_shapes() {
        assert!(TrackingSpec::new(ActionChunk::zeros(2, 2), vec![1.0], vec![1.0, 1.0]).is_err());
        assert!(TrackingSpec::new(ActionChunk::zeros(2, 2), vec![1.0, -1.0], vec![1.0, 1.0]).is_err());
    }
}
