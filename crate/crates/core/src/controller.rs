//! One uncoupled CPG oscillator per active hinge.
//!
//! Joint `i` owns a neuron pair `(x_i, y_i)` and an output neuron. Each
//! neuron's state changes by the opposite neuron's activation times a weight,
//! and the output is `tanh(w_out * x)`. The weight vector is laid out joint by
//! joint as `(w_xy, w_yx, w_out)`.

use thiserror::Error;

use crate::morphology::BodyPlan;

pub const STATE_LIMIT: f64 = 10.0;
pub const INITIAL_STATE: f64 = std::f64::consts::FRAC_1_SQRT_2;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ControllerError {
    #[error("expected {expected} weights for {joints} joints, got {got}")]
    DimensionMismatch {
        joints: usize,
        expected: usize,
        got: usize,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct CpgNetwork {
    weights: Vec<f64>,
    x: Vec<f64>,
    y: Vec<f64>,
}

impl CpgNetwork {
    pub fn new(n_joints: usize, weights: &[f64]) -> Result<Self, ControllerError> {
        if weights.len() != 3 * n_joints {
            return Err(ControllerError::DimensionMismatch {
                joints: n_joints,
                expected: 3 * n_joints,
                got: weights.len(),
            });
        }
        Ok(Self {
            weights: weights.to_vec(),
            x: vec![INITIAL_STATE; n_joints],
            y: vec![INITIAL_STATE; n_joints],
        })
    }

    pub fn for_body(body: &BodyPlan, weights: &[f64]) -> Result<Self, ControllerError> {
        Self::new(body.n_joints(), weights)
    }

    pub fn n_joints(&self) -> usize {
        self.x.len()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn state(&self, joint: usize) -> (f64, f64) {
        (self.x[joint], self.y[joint])
    }

    pub fn set_state(&mut self, joint: usize, x: f64, y: f64) {
        self.x[joint] = x;
        self.y[joint] = y;
    }

    /// Current outputs without advancing the state.
    pub fn outputs_into(&self, out: &mut [f64]) {
        for (i, o) in out.iter_mut().enumerate() {
            *o = (self.weights[3 * i + 2] * self.x[i]).tanh();
        }
    }

    /// One explicit Euler step; `y` is updated from the pre-step `x`.
    pub fn step_into(&mut self, dt: f64, out: &mut [f64]) {
        debug_assert!(dt > 0.0);
        for i in 0..self.x.len() {
            let (w_xy, w_yx, w_out) = (
                self.weights[3 * i],
                self.weights[3 * i + 1],
                self.weights[3 * i + 2],
            );
            let (x, y) = (self.x[i], self.y[i]);
            let nx = (x + dt * w_yx * y).clamp(-STATE_LIMIT, STATE_LIMIT);
            let ny = (y + dt * w_xy * x).clamp(-STATE_LIMIT, STATE_LIMIT);
            self.x[i] = nx;
            self.y[i] = ny;
            out[i] = (w_out * nx).tanh();
        }
    }

    pub fn step(&mut self, dt: f64) -> Vec<f64> {
        let mut out = vec![0.0; self.n_joints()];
        self.step_into(dt, &mut out);
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lsystem::Symbol::*;
    use crate::morphology::decode;
    use proptest::prelude::*;

    const DT: f64 = 1.0 / 240.0;

    #[test]
    fn sizing_and_errors() {
        let empty = CpgNetwork::for_body(&BodyPlan::core_only(), &[]).unwrap();
        assert_eq!(empty.n_joints(), 0);
        let two = decode(&[Core, Hinge, Hinge]).unwrap();
        assert_eq!(CpgNetwork::for_body(&two, &[0.0; 6]).unwrap().n_joints(), 2);
        assert_eq!(
            CpgNetwork::for_body(&two, &[0.0; 5]),
            Err(ControllerError::DimensionMismatch {
                joints: 2,
                expected: 6,
                got: 5
            })
        );
    }

    #[test]
    fn zero_weights_are_inert() {
        let mut net = CpgNetwork::new(3, &[0.0; 9]).unwrap();
        for _ in 0..100 {
            assert!(net.step(DT).iter().all(|&o| o == 0.0));
        }
        assert_eq!(net.state(1), (INITIAL_STATE, INITIAL_STATE));
    }

    #[test]
    fn euler_radius_growth_is_exact() {
        // x' = x + h w y, y' = y - h w x  =>  r'^2 = (1 + (h w)^2) r^2
        for &w in &[0.3, -0.7, 1.0] {
            let mut net = CpgNetwork::new(1, &[-w, w, 1.0]).unwrap();
            for _ in 0..500 {
                let (x, y) = net.state(0);
                let r2 = x * x + y * y;
                net.step(DT);
                let (x, y) = net.state(0);
                let drift = (x * x + y * y - r2).abs();
                let bound = (w * DT).powi(2) * r2;
                assert!(drift <= bound * (1.0 + 1e-9) + 1e-15, "{drift} > {bound}");
            }
        }
    }

    /// Exact flow of x' = w y, y' = -w x from (x0, y0).
    fn rotation(w: f64, t: f64, x0: f64, y0: f64) -> (f64, f64) {
        let (s, c) = (w * t).sin_cos();
        (x0 * c + y0 * s, -x0 * s + y0 * c)
    }

    #[test]
    fn tracks_closed_form_rotation_over_thirty_seconds() {
        let steps = 30 * 240;
        for &w in &[0.05, 0.1, -0.2] {
            let mut net = CpgNetwork::new(1, &[-w, w, 1.0]).unwrap();
            for _ in 0..steps {
                net.step(DT);
            }
            let (x, y) = net.state(0);
            let (ex, ey) = rotation(w, steps as f64 * DT, INITIAL_STATE, INITIAL_STATE);
            let err = ((x - ex).powi(2) + (y - ey).powi(2)).sqrt() / (ex * ex + ey * ey).sqrt();
            assert!(err < 0.01, "w = {w}: relative error {err}");
        }
    }

    #[test]
    fn closed_form_euler_envelope_for_full_weight_range() {
        // explicit Euler scales the radius by (1 + (w dt)^2)^(n/2) exactly
        let steps = 30 * 240;
        for &w in &[0.5, -1.0] {
            let mut net = CpgNetwork::new(1, &[-w, w, 1.0]).unwrap();
            for _ in 0..steps {
                net.step(DT);
            }
            let (x, y) = net.state(0);
            let r = (x * x + y * y).sqrt();
            let expected = (1.0 + (w * DT).powi(2)).powf(steps as f64 / 2.0);
            assert!((r - expected).abs() / expected < 1e-9);
        }
    }

    proptest! {
        #[test]
        fn outputs_bounded_and_deterministic(
            weights in proptest::collection::vec(-1.0f64..=1.0, 6),
            steps in 1usize..3000,
        ) {
            let mut a = CpgNetwork::new(2, &weights).unwrap();
            let mut b = a.clone();
            for _ in 0..steps {
                let oa = a.step(DT);
                let ob = b.step(DT);
                prop_assert!(oa.iter().all(|o| (-1.0..=1.0).contains(o)));
                prop_assert_eq!(oa, ob);
            }
            for j in 0..2 {
                let (x, y) = a.state(j);
                prop_assert!(x.abs() <= STATE_LIMIT && y.abs() <= STATE_LIMIT);
            }
        }
    }
}
