use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::{ActionChunk, Observation, VelocityField, FEATURE_DIM};
use crate::rng;

/// Shape of an [`MlpField`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MlpArch {
    pub horizon: usize,
    pub action_dim: usize,
    pub feature_dim: usize,
    pub hidden: [usize; 2],
}

impl MlpArch {
    pub fn new(horizon: usize, action_dim: usize, hidden: usize) -> Self {
        MlpArch {
            horizon,
            action_dim,
            feature_dim: FEATURE_DIM,
            hidden: [hidden, hidden],
        }
    }

    pub fn chunk_len(&self) -> usize {
        self.horizon * self.action_dim
    }

    /// Flattened chunk, then features, then `tau`.
    pub fn input_len(&self) -> usize {
        self.chunk_len() + self.feature_dim + 1
    }

    pub fn param_count(&self) -> usize {
        let [h1, h2] = self.hidden;
        let (n_in, n_out) = (self.input_len(), self.chunk_len());
        h1 * n_in + h1 + h2 * h1 + h2 + n_out * h2 + n_out
    }

    fn offsets(&self) -> Offsets {
        let [h1, h2] = self.hidden;
        let w1 = 0;
        let b1 = w1 + h1 * self.input_len();
        let w2 = b1 + h1;
        let b2 = w2 + h2 * h1;
        let w3 = b2 + h2;
        let b3 = w3 + self.chunk_len() * h2;
        Offsets { w1, b1, w2, b2, w3, b3 }
    }
}

#[derive(Debug, Clone, Copy)]
struct Offsets {
    w1: usize,
    b1: usize,
    w2: usize,
    b2: usize,
    w3: usize,
    b3: usize,
}

/// Two-hidden-layer SiLU network parameterizing a velocity field.
///
/// The network output `y` is read as a normalized prediction of the clean
/// chunk, `x1_hat = shift + scale * y` (per action column), and the velocity is
/// `(x1_hat - x) / max(1 - tau, tau_floor)`. Below `1 - tau_floor` the denoised
/// estimate `x + (1 - tau) v` is therefore exactly `x1_hat`.
///
/// Flat parameter layout, all row-major:
/// `W1 [h1 x n_in] | b1 [h1] | W2 [h2 x h1] | b2 [h2] | W3 [n_out x h2] | b3 [n_out]`
/// with `n_in = H*D + feature_dim + 1` and `n_out = H*D`.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpField {
    arch: MlpArch,
    tau_floor: f64,
    shift: Vec<f64>,
    scale: Vec<f64>,
    params: Vec<f64>,
}

pub(crate) struct Activations {
    input: Vec<f64>,
    pre1: Vec<f64>,
    h1: Vec<f64>,
    pre2: Vec<f64>,
    h2: Vec<f64>,
    pub(crate) out: Vec<f64>,
}

fn sigmoid(a: f64) -> f64 {
    1.0 / (1.0 + (-a).exp())
}

fn silu(a: f64) -> f64 {
    a * sigmoid(a)
}

fn silu_grad(a: f64) -> f64 {
    let s = sigmoid(a);
    s * (1.0 + a * (1.0 - s))
}

fn affine(w: &[f64], b: &[f64], x: &[f64], out: &mut Vec<f64>) {
    let n_in = x.len();
    out.clear();
    out.extend(b.iter().enumerate().map(|(i, bi)| {
        let row = &w[i * n_in..(i + 1) * n_in];
        bi + row.iter().zip(x).map(|(a, b)| a * b).sum::<f64>()
    }));
}

/// Accumulates `dW += dy x^T`, `db += dy` when `grads` is given, and returns
/// `W^T dy`.
fn affine_backward(w: &[f64], x: &[f64], dy: &[f64], grads: Option<(&mut [f64], &mut [f64])>) -> Vec<f64> {
    let n_in = x.len();
    if let Some((dw, db)) = grads {
        for (i, &g) in dy.iter().enumerate() {
            db[i] += g;
            if g != 0.0 {
                let row = &mut dw[i * n_in..(i + 1) * n_in];
                for (r, xv) in row.iter_mut().zip(x) {
                    *r += g * xv;
                }
            }
        }
    }
    let mut dx = vec![0.0; n_in];
    for (i, &g) in dy.iter().enumerate() {
        if g != 0.0 {
            let row = &w[i * n_in..(i + 1) * n_in];
            for (d, wv) in dx.iter_mut().zip(row) {
                *d += g * wv;
            }
        }
    }
    dx
}

impl MlpField {
    /// Random initialization: weights `N(0, 1/fan_in)`, zero biases.
    pub fn init(arch: MlpArch, shift: Vec<f64>, scale: Vec<f64>, tau_floor: f64, seed: u64) -> Self {
        let mut rng = rng::rng(seed);
        let mut params = vec![0.0; arch.param_count()];
        let off = arch.offsets();
        let [h1, h2] = arch.hidden;
        let blocks = [
            (off.w1, h1 * arch.input_len(), arch.input_len()),
            (off.w2, h2 * h1, h1),
            (off.w3, arch.chunk_len() * h2, h2),
        ];
        for (start, len, fan_in) in blocks {
            let std = (1.0 / fan_in as f64).sqrt();
            for p in &mut params[start..start + len] {
                let z: f64 = StandardNormal.sample(&mut rng);
                *p = std * z;
            }
        }
        Self::from_parts(arch, shift, scale, tau_floor, params).expect("consistent init")
    }

    pub fn from_parts(
        arch: MlpArch,
        shift: Vec<f64>,
        scale: Vec<f64>,
        tau_floor: f64,
        params: Vec<f64>,
    ) -> crate::Result<Self> {
        if params.len() != arch.param_count() {
            return Err(crate::Error::invalid(format!(
                "{} parameters for an architecture of {}",
                params.len(),
                arch.param_count()
            )));
        }
        if shift.len() != arch.action_dim || scale.len() != arch.action_dim {
            return Err(crate::Error::invalid("normalization must have one entry per action column"));
        }
        if scale.iter().any(|&s| !(s > 0.0)) || !(tau_floor > 0.0 && tau_floor < 1.0) {
            return Err(crate::Error::invalid("scale must be positive and tau_floor in (0, 1)"));
        }
        Ok(MlpField {
            arch,
            tau_floor,
            shift,
            scale,
            params,
        })
    }

    pub fn arch(&self) -> &MlpArch {
        &self.arch
    }

    pub fn tau_floor(&self) -> f64 {
        self.tau_floor
    }

    pub fn shift(&self) -> &[f64] {
        &self.shift
    }

    pub fn scale(&self) -> &[f64] {
        &self.scale
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub(crate) fn denominator(&self, tau: f64) -> f64 {
        (1.0 - tau).max(self.tau_floor)
    }

    pub(crate) fn input(&self, x: &[f64], obs: &Observation, tau: f64) -> Vec<f64> {
        let d = self.arch.action_dim;
        let mut z = Vec::with_capacity(self.arch.input_len());
        z.extend(x.iter().enumerate().map(|(i, v)| (v - self.shift[i % d]) / self.scale[i % d]));
        z.extend_from_slice(&obs.features()[..self.arch.feature_dim]);
        z.push(tau);
        z
    }

    pub(crate) fn forward(&self, input: Vec<f64>) -> Activations {
        let off = self.arch.offsets();
        let [h1, h2] = self.arch.hidden;
        let p = &self.params;
        let mut pre1 = Vec::new();
        affine(&p[off.w1..off.b1], &p[off.b1..off.b1 + h1], &input, &mut pre1);
        let h1v: Vec<f64> = pre1.iter().map(|&a| silu(a)).collect();
        let mut pre2 = Vec::new();
        affine(&p[off.w2..off.b2], &p[off.b2..off.b2 + h2], &h1v, &mut pre2);
        let h2v: Vec<f64> = pre2.iter().map(|&a| silu(a)).collect();
        let mut out = Vec::new();
        let n_out = self.arch.chunk_len();
        affine(&p[off.w3..off.b3], &p[off.b3..off.b3 + n_out], &h2v, &mut out);
        Activations {
            input,
            pre1,
            h1: h1v,
            pre2,
            h2: h2v,
            out,
        }
    }

    /// Backpropagates `d_out` (gradient with respect to the raw network
    /// output). Parameter gradients are accumulated into `grads` when given;
    /// the return value is the gradient with respect to the network input.
    pub(crate) fn backward(&self, act: &Activations, d_out: &[f64], grads: Option<&mut [f64]>) -> Vec<f64> {
        let off = self.arch.offsets();
        let p = &self.params;
        let n_out = self.arch.chunk_len();
        let [h1, h2] = self.arch.hidden;
        match grads {
            Some(g) => {
                let (g_w1, rest) = g.split_at_mut(off.b1);
                let (g_b1, rest) = rest.split_at_mut(h1);
                let (g_w2, rest) = rest.split_at_mut(h2 * h1);
                let (g_b2, rest) = rest.split_at_mut(h2);
                let (g_w3, g_b3) = rest.split_at_mut(n_out * h2);
                let d_h2 = affine_backward(&p[off.w3..off.b3], &act.h2, d_out, Some((g_w3, g_b3)));
                let d_pre2: Vec<f64> = d_h2.iter().zip(&act.pre2).map(|(g, &a)| g * silu_grad(a)).collect();
                let d_h1 = affine_backward(&p[off.w2..off.b2], &act.h1, &d_pre2, Some((g_w2, g_b2)));
                let d_pre1: Vec<f64> = d_h1.iter().zip(&act.pre1).map(|(g, &a)| g * silu_grad(a)).collect();
                affine_backward(&p[off.w1..off.b1], &act.input, &d_pre1, Some((g_w1, g_b1)))
            }
            None => {
                let d_h2 = affine_backward(&p[off.w3..off.b3], &act.h2, d_out, None);
                let d_pre2: Vec<f64> = d_h2.iter().zip(&act.pre2).map(|(g, &a)| g * silu_grad(a)).collect();
                let d_h1 = affine_backward(&p[off.w2..off.b2], &act.h1, &d_pre2, None);
                let d_pre1: Vec<f64> = d_h1.iter().zip(&act.pre1).map(|(g, &a)| g * silu_grad(a)).collect();
                affine_backward(&p[off.w1..off.b1], &act.input, &d_pre1, None)
            }
        }
    }

    /// Clean-chunk prediction `shift + scale * y` from raw outputs.
    pub(crate) fn predicted_clean(&self, out: &[f64]) -> Vec<f64> {
        let d = self.arch.action_dim;
        out.iter()
            .enumerate()
            .map(|(i, y)| self.shift[i % d] + self.scale[i % d] * y)
            .collect()
    }

    pub(crate) fn velocity_from(&self, x: &[f64], out: &[f64], tau: f64) -> Vec<f64> {
        let c = self.denominator(tau);
        self.predicted_clean(out)
            .iter()
            .zip(x)
            .map(|(x1, xv)| (x1 - xv) / c)
            .collect()
    }
}

impl VelocityField for MlpField {
    fn shape(&self) -> (usize, usize) {
        (self.arch.horizon, self.arch.action_dim)
    }

    fn eval(&self, x: &ActionChunk, obs: &Observation, tau: f64) -> ActionChunk {
        let act = self.forward(self.input(x.as_slice(), obs, tau));
        let v = self.velocity_from(x.as_slice(), &act.out, tau);
        ActionChunk::from_vec(self.arch.horizon, self.arch.action_dim, v).expect("shape")
    }

    fn vjp(&self, x: &ActionChunk, obs: &Observation, tau: f64, cotangent: &ActionChunk) -> ActionChunk {
        // A_hat = x + r (x1_hat(x) - x) with r = (1 - tau) / max(1 - tau, floor).
        let r = (1.0 - tau).max(0.0) / self.denominator(tau);
        let d = self.arch.action_dim;
        let act = self.forward(self.input(x.as_slice(), obs, tau));
        let d_out: Vec<f64> = cotangent
            .as_slice()
            .iter()
            .enumerate()
            .map(|(i, c)| r * self.scale[i % d] * c)
            .collect();
        let d_in = self.backward(&act, &d_out, None);
        let n = self.arch.chunk_len();
        let data = cotangent
            .as_slice()
            .iter()
            .zip(&d_in[..n])
            .enumerate()
            .map(|(i, (c, g))| (1.0 - r) * c + g / self.scale[i % d])
            .collect();
        ActionChunk::from_vec(self.arch.horizon, d, data).expect("shape")
    }

    fn source(&self) -> Option<(&[f64], &[f64])> {
        Some((&self.shift, &self.scale))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::policy::{denoised_estimate, TaskToken};
    use nalgebra::Vector3;
    use rand::Rng;

    fn small() -> MlpField {
        let arch = MlpArch::new(3, 2, 7);
        MlpField::init(arch, vec![0.1, -0.2], vec![0.5, 2.0], 0.05, 11)
    }

    fn obs() -> Observation {
        Observation::new(
            Vector3::new(0.3, -0.2, 1.1),
            0.2,
            0.8,
            Vector3::new(1.0, 0.0, 1.0),
            TaskToken::PICK_PLACE,
        )
    }

    #[test]
    fn param_count_matches_layout() {
        let arch = MlpArch::new(25, 5, 128);
        let n_in = 125 + FEATURE_DIM + 1;
        assert_eq!(arch.param_count(), 128 * n_in + 128 + 128 * 128 + 128 + 125 * 128 + 125);
        let off = arch.offsets();
        assert_eq!(off.b3 + 125, arch.param_count());
    }

    #[test]
    fn parameter_gradient_matches_finite_differences() {
        let field = small();
        let mut r = rng::rng(5);
        let x: Vec<f64> = (0..6).map(|_| r.random_range(-1.0..1.0)).collect();
        let w: Vec<f64> = (0..6).map(|_| r.random_range(-1.0..1.0)).collect();
        let loss = |f: &MlpField| -> f64 {
            let act = f.forward(f.input(&x, &obs(), 0.4));
            act.out.iter().zip(&w).map(|(a, b)| a * b).sum()
        };
        let act = field.forward(field.input(&x, &obs(), 0.4));
        let mut grads = vec![0.0; field.params.len()];
        field.backward(&act, &w, Some(&mut grads));
        let h = 1e-6;
        for i in (0..field.params.len()).step_by(7) {
            let mut fp = field.clone();
            fp.params[i] += h;
            let mut fm = field.clone();
            fm.params[i] -= h;
            let fd = (loss(&fp) - loss(&fm)) / (2.0 * h);
            assert!((fd - grads[i]).abs() < 1e-6 * (1.0 + fd.abs()), "param {i}: {fd} vs {}", grads[i]);
        }
    }

    #[test]
    fn vjp_adjoint_identity() {
        let field = small();
        let mut r = rng::rng(9);
        for &tau in &[0.0, 0.3, 0.9, 0.97] {
            let x = ActionChunk::from_fn(3, 2, |_, _| r.random_range(-1.0..1.0));
            let u = ActionChunk::from_fn(3, 2, |_, _| r.random_range(-1.0..1.0));
            let c = ActionChunk::from_fn(3, 2, |_, _| r.random_range(-1.0..1.0));
            let a_hat = |x: &ActionChunk| denoised_estimate(x, &field.eval(x, &obs(), tau), tau);
            let h = 1e-6;
            let mut xp = x.clone();
            xp.axpy(h, &u);
            let mut xm = x.clone();
            xm.axpy(-h, &u);
            let mut ju = a_hat(&xp);
            ju.axpy(-1.0, &a_hat(&xm));
            let lhs = ju.dot(&c) / (2.0 * h);
            let rhs = u.dot(&field.vjp(&x, &obs(), tau, &c));
            assert!((lhs - rhs).abs() < 1e-6, "tau {tau}: {lhs} vs {rhs}");
        }
    }

    #[test]
    fn from_parts_checks_lengths() {
        let f = small();
        let arch = *f.arch();
        assert!(MlpField::from_parts(arch, vec![0.0; 2], vec![1.0; 2], 0.05, vec![0.0; 3]).is_err());
        assert!(MlpField::from_parts(arch, vec![0.0; 1], vec![1.0; 2], 0.05, f.params.clone()).is_err());
        assert!(MlpField::from_parts(arch, vec![0.0; 2], vec![1.0; 2], 0.0, f.params.clone()).is_err());
    }
}
