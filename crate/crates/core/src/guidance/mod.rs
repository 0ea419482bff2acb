//! Inference-time guidance: potentials on the denoised chunk, their analytic
//! gradients, payload confidence, and the guided velocity
//! `v - s(tau) J^T grad(Phi)(A_hat)`.

mod payload;
mod tracking;

use serde::{Deserialize, Serialize};

pub use payload::{payload_confidence, payload_potential, payload_potential_with_alpha, payload_weights, Confidence, PayloadSpec};
pub use tracking::{tracking_gradient, tracking_potential, TrackingSpec};

use crate::error::{Error, Result};
use crate::policy::{denoised_estimate, ActionChunk, Observation, VelocityField};

/// Guidance strength as a function of flow time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Schedule {
    /// `s(tau) = s0`.
    Constant { s0: f64 },
    /// `s(tau) = s0 (1 - tau)`.
    Linear { s0: f64 },
    /// `s(tau) = scale * tau^exponent`.
    Power { scale: f64, exponent: f64 },
}

impl Default for Schedule {
    fn default() -> Self {
        Schedule::Power {
            scale: 0.7,
            exponent: 3.0,
        }
    }
}

impl Schedule {
    pub fn eval(&self, tau: f64) -> f64 {
        match *self {
            Schedule::Constant { s0 } => s0,
            Schedule::Linear { s0 } => s0 * (1.0 - tau),
            Schedule::Power { scale, exponent } => scale * tau.max(0.0).powf(exponent),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            Schedule::Constant { s0 } | Schedule::Linear { s0 } => s0 >= 0.0 && s0.is_finite(),
            Schedule::Power { scale, exponent } => scale >= 0.0 && scale.is_finite() && exponent >= 0.0,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::invalid(format!("schedule {self:?} is negative somewhere on [0, 1]")))
        }
    }
}

/// One additive guidance term.
#[derive(Debug, Clone, PartialEq)]
pub enum Potential {
    Tracking(TrackingSpec),
    Payload(PayloadSpec),
}

#[derive(Debug, Clone, PartialEq)]
pub struct GuidanceSpec {
    pub terms: Vec<Potential>,
    pub schedule: Schedule,
}

impl GuidanceSpec {
    pub fn new(terms: Vec<Potential>, schedule: Schedule) -> Result<Self> {
        let spec = GuidanceSpec { terms, schedule };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.terms.is_empty() {
            return Err(Error::invalid("guidance needs at least one potential"));
        }
        for t in &self.terms {
            match t {
                Potential::Tracking(s) => s.validate()?,
                Potential::Payload(s) => s.validate()?,
            }
        }
        self.schedule.validate()
    }

    /// Sum of all potentials at `a`.
    pub fn potential(&self, a: &ActionChunk, obs: &Observation, gripper_history: &[f64]) -> f64 {
        self.terms
            .iter()
            .map(|t| match t {
                Potential::Tracking(s) => s.potential(a),
                Potential::Payload(s) => payload_potential(a, obs, gripper_history, s).0,
            })
            .sum()
    }

    /// Sum of all potential gradients at `a`.
    pub fn gradient(&self, a: &ActionChunk, obs: &Observation, gripper_history: &[f64]) -> ActionChunk {
        let mut g = ActionChunk::zeros(a.rows(), a.cols());
        for t in &self.terms {
            match t {
                Potential::Tracking(s) => g.axpy(1.0, &s.gradient(a)),
                Potential::Payload(s) => g.axpy(1.0, &payload_potential(a, obs, gripper_history, s).1),
            }
        }
        g
    }
}

/// Immutable per-chunk guidance context handed to the sampler.
#[derive(Debug, Clone, Copy)]
pub struct Guidance<'a> {
    /// Each spec is weighted by its own schedule.
    pub specs: &'a [GuidanceSpec],
    /// Most recently emitted gripper commands, oldest first. Payload
    /// confidence reads the last `K` of them.
    pub gripper_history: &'a [f64],
}

impl<'a> Guidance<'a> {
    pub fn new(spec: &'a GuidanceSpec, gripper_history: &'a [f64]) -> Self {
        Self::layered(std::slice::from_ref(spec), gripper_history)
    }

    pub fn layered(specs: &'a [GuidanceSpec], gripper_history: &'a [f64]) -> Self {
        Guidance { specs, gripper_history }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GuidedVelocity {
    pub velocity: ActionChunk,
    /// False when the guidance gradient was non-finite and the base velocity
    /// was returned.
    pub applied: bool,
}

/// `v - s(tau) * vjp(G)` with `G` the summed potential gradient at the
/// denoised estimate. A non-finite `G` or correction leaves `v` unchanged.
///
/// For a field with a scaled source the correction is taken in its
/// normalized coordinates, i.e. `vjp(G)` is premultiplied by the source
/// variance per column. A standard-normal source leaves it as is.
pub fn guided_velocity<F: VelocityField + ?Sized>(
    field: &F,
    x: &ActionChunk,
    obs: &Observation,
    tau: f64,
    spec: &GuidanceSpec,
    gripper_history: &[f64],
) -> GuidedVelocity {
    guided_velocity_layered(field, x, obs, tau, std::slice::from_ref(spec), gripper_history)
}

/// [`guided_velocity`] for several specs, each scaled by its own schedule:
/// `v - vjp(sum_k s_k(tau) G_k)`.
pub fn guided_velocity_layered<F: VelocityField + ?Sized>(
    field: &F,
    x: &ActionChunk,
    obs: &Observation,
    tau: f64,
    specs: &[GuidanceSpec],
    gripper_history: &[f64],
) -> GuidedVelocity {
    let mut v = field.eval(x, obs, tau);
    let active: Vec<(f64, &GuidanceSpec)> = specs
        .iter()
        .map(|g| (g.schedule.eval(tau), g))
        .filter(|(s, _)| *s != 0.0)
        .collect();
    if active.is_empty() {
        return GuidedVelocity { velocity: v, applied: true };
    }
    let a_hat = denoised_estimate(x, &v, tau);
    let (h, d) = field.shape();
    let mut g = ActionChunk::zeros(h, d);
    for (s, spec) in active {
        g.axpy(s, &spec.gradient(&a_hat, obs, gripper_history));
    }
    if !g.is_finite() {
        log::warn!("non-finite guidance gradient at tau = {tau:.3}; using base velocity");
        return GuidedVelocity { velocity: v, applied: false };
    }
    let mut xi = field.vjp(x, obs, tau, &g);
    if let Some((_, std)) = field.source() {
        for t in 0..xi.rows() {
            for (v, s) in xi.row_mut(t).iter_mut().zip(std) {
                *v *= s * s;
            }
        }
    }
    if !xi.is_finite() {
        log::warn!("non-finite guidance correction at tau = {tau:.3}; using base velocity");
        return GuidedVelocity { velocity: v, applied: false };
    }
    v.axpy(-1.0, &xi);
    GuidedVelocity { velocity: v, applied: true }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::policy::{sample_chunk, GaussianField, TaskToken};
    use nalgebra::Vector3;

    fn obs() -> Observation {
        Observation::new(Vector3::new(0.0, 0.0, 1.0), 0.0, 1.0, Vector3::zeros(), TaskToken::PICK_PLACE)
    }

    fn field() -> GaussianField {
        GaussianField::constant(ActionChunk::from_fn(4, 5, |t, d| 0.1 * (t + d) as f64), vec![0.5; 5]).unwrap()
    }

    fn tracking(lambda: f64) -> TrackingSpec {
        TrackingSpec::new(ActionChunk::filled(4, 5, -0.3), vec![lambda; 5], vec![1.0; 4]).unwrap()
    }

    #[test]
    fn schedules() {
        assert_eq!(Schedule::Constant { s0: 2.0 }.eval(0.7), 2.0);
        assert!((Schedule::Linear { s0: 2.0 }.eval(0.25) - 1.5).abs() < 1e-15);
        assert!((Schedule::default().eval(0.5) - 0.7 * 0.125).abs() < 1e-15);
        assert!(Schedule::Constant { s0: -1.0 }.validate().is_err());
        let json = serde_json::to_string(&Schedule::Linear { s0: 1.0 }).unwrap();
        assert_eq!(json, r#"{"kind":"linear","s0":1.0}"#);
    }

    #[test]
    fn zero_gradient_returns_base_velocity() {
        let f = field();
        let x = ActionChunk::from_fn(4, 5, |t, d| (t as f64 - d as f64) * 0.2);
        let tau = 0.4;
        let v = f.eval(&x, &obs(), tau);
        let a_hat = denoised_estimate(&x, &v, tau);
        let spec = GuidanceSpec::new(
            vec![
                Potential::Tracking(TrackingSpec::new(a_hat, vec![1.0; 5], vec![1.0; 4]).unwrap()),
                Potential::Payload(PayloadSpec::default()),
            ],
            Schedule::Constant { s0: 1.0 },
        )
        .unwrap();
        let open = [-1.0; 4];
        let out = guided_velocity(&f, &x, &obs(), tau, &spec, &open);
        assert!(out.applied);
        assert_eq!(out.velocity, v);
    }

    #[test]
    fn zero_schedule_is_bit_exact_unguided() {
        let f = field();
        let spec = GuidanceSpec::new(vec![Potential::Tracking(tracking(5.0))], Schedule::Constant { s0: 0.0 }).unwrap();
        for seed in 0..10 {
            let a = sample_chunk(&f, &obs(), 10, seed, None).unwrap();
            let b = sample_chunk(&f, &obs(), 10, seed, Some(Guidance::new(&spec, &[]))).unwrap();
            assert_eq!(a, b);
        }
    }

    #[test]
    fn composition_is_additive() {
        let f = field();
        let s = Schedule::Constant { s0: 1.0 };
        // Two equal terms against one term of doubled strength: the summed
        // gradients agree bit for bit, so the samples do too.
        let both = GuidanceSpec::new(vec![Potential::Tracking(tracking(1.5)), Potential::Tracking(tracking(1.5))], s).unwrap();
        let single = GuidanceSpec::new(vec![Potential::Tracking(tracking(3.0))], s).unwrap();
        for seed in 0..5 {
            let a = sample_chunk(&f, &obs(), 10, seed, Some(Guidance::new(&both, &[]))).unwrap();
            let b = sample_chunk(&f, &obs(), 10, seed, Some(Guidance::new(&single, &[]))).unwrap();
            assert_eq!(a, b);
        }

        // Distinct references merge into their strength-weighted average.
        let t1 = tracking(1.0);
        let mut t2 = tracking(3.0);
        t2.a_des = ActionChunk::filled(4, 5, 0.5);
        let merged = TrackingSpec::new(ActionChunk::filled(4, 5, (-0.3 + 3.0 * 0.5) / 4.0), vec![4.0; 5], vec![1.0; 4]).unwrap();
        let pair = GuidanceSpec::new(vec![Potential::Tracking(t1), Potential::Tracking(t2)], s).unwrap();
        let one = GuidanceSpec::new(vec![Potential::Tracking(merged)], s).unwrap();
        let x = ActionChunk::filled(4, 5, 0.1);
        assert!(pair.gradient(&x, &obs(), &[]).max_abs_diff(&one.gradient(&x, &obs(), &[])) < 1e-12);
    }

    #[test]
    fn non_finite_gradient_fails_open() {
        let f = field();
        let mut bad = tracking(1.0);
        bad.a_des[(0, 0)] = f64::NAN;
        let spec = GuidanceSpec { terms: vec![Potential::Tracking(bad)], schedule: Schedule::Constant { s0: 1.0 } };
        let x = ActionChunk::zeros(4, 5);
        let out = guided_velocity(&f, &x, &obs(), 0.5, &spec, &[]);
        assert!(!out.applied);
        assert_eq!(out.velocity, f.eval(&x, &obs(), 0.5));
    }

    #[test]
    fn empty_spec_rejected() {
        assert!(GuidanceSpec::new(vec![], Schedule::default()).is_err());
    }
}
