//! Augmented neural-ODE reduced-order models.
//!
//! The model state carries the `n` physical output channels plus `i`
//! augmented free variables. A two-layer sigmoid network forms the ODE
//! right-hand side; its output is remapped to `(-s, s)` with a trainable
//! scale so derivatives can change sign. Time is normalized to the training
//! span and outputs to per-channel `[0, 1]`.

mod ode;
mod train;

pub use ode::{rk4_integrate, Trajectory};
pub use train::{loss_and_gradient, loss_mse, select_complexity, train, ParamGrad, Scenario, TrainConfig};

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{CoreError, CoreResult};

/// Affine maps between physical and normalized units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Normalization {
    /// Per output channel: physical value at normalized 0.
    pub out_offset: Vec<f64>,
    /// Per output channel: physical span of the normalized unit interval.
    pub out_scale: Vec<f64>,
    pub in_offset: f64,
    pub in_scale: f64,
    /// Physical seconds mapped onto one unit of normalized time.
    pub time_span: f64,
}

impl Normalization {
    pub fn identity(n: usize) -> Self {
        Self {
            out_offset: vec![0.0; n],
            out_scale: vec![1.0; n],
            in_offset: 0.0,
            in_scale: 1.0,
            time_span: 1.0,
        }
    }

    pub fn normalize_output(&self, channel: usize, y: f64) -> f64 {
        (y - self.out_offset[channel]) / self.out_scale[channel]
    }

    pub fn denormalize_output(&self, channel: usize, y: f64) -> f64 {
        self.out_offset[channel] + y * self.out_scale[channel]
    }

    pub fn normalize_input(&self, g: f64) -> f64 {
        (g - self.in_offset) / self.in_scale
    }

    pub fn validate(&self, n: usize) -> CoreResult<()> {
        if self.out_offset.len() != n || self.out_scale.len() != n {
            return Err(CoreError::InvalidDimension(format!(
                "normalization covers {} channels, model has {n}",
                self.out_offset.len()
            )));
        }
        if self.out_scale.iter().any(|&s| !(s > 0.0))
            || !(self.in_scale > 0.0)
            || !(self.time_span > 0.0)
        {
            return Err(CoreError::InvalidConfig("normalization scales must be positive".into()));
        }
        Ok(())
    }
}

/// Trained reduced-order model.
///
/// With `m = n + aug`, `w1` is `m x (m + 1)` (state plus the scalar input),
/// `w2` is `m x m`, both row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RomModel {
    /// Output-state dimension (number of physical channels).
    pub n: usize,
    /// Complexity: number of augmented free variables.
    pub aug: usize,
    pub w1: Vec<Vec<f64>>,
    pub b1: Vec<f64>,
    pub w2: Vec<Vec<f64>>,
    pub b2: Vec<f64>,
    /// Positive output scale `s`; the network output is `s * (2 z - 1)`.
    pub out_scale: f64,
    pub norm: Normalization,
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + libm::exp(-x))
}

impl RomModel {
    /// Total state dimension `n + aug`.
    pub fn state_dim(&self) -> usize {
        self.n + self.aug
    }

    pub fn validate(&self) -> CoreResult<()> {
        let m = self.state_dim();
        if self.w1.len() != m || self.w1.iter().any(|r| r.len() != m + 1) {
            return Err(CoreError::InvalidDimension(format!("w1 must be {m}x{}", m + 1)));
        }
        if self.w2.len() != m || self.w2.iter().any(|r| r.len() != m) {
            return Err(CoreError::InvalidDimension(format!("w2 must be {m}x{m}")));
        }
        if self.b1.len() != m || self.b2.len() != m {
            return Err(CoreError::InvalidDimension(format!("biases must have length {m}")));
        }
        let finite = self
            .w1
            .iter()
            .chain(self.w2.iter())
            .flatten()
            .chain(self.b1.iter())
            .chain(self.b2.iter())
            .all(|v| v.is_finite());
        if !finite || !self.out_scale.is_finite() || !(self.out_scale > 0.0) {
            return Err(CoreError::InvalidConfig("model parameters must be finite, scale positive".into()));
        }
        self.norm.validate(self.n)
    }

    /// ODE right-hand side in normalized units.
    pub fn rhs(&self, state: &[f64], g: f64) -> Vec<f64> {
        let m = self.state_dim();
        let mut h = vec![0.0; m];
        let mut out = vec![0.0; m];
        self.rhs_into(state, g, &mut h, &mut out);
        out
    }

    /// Buffer-reusing variant: `hidden` receives the hidden activations,
    /// `out` the remapped derivative.
    pub(crate) fn rhs_into(&self, state: &[f64], g: f64, hidden: &mut [f64], out: &mut [f64]) {
        let m = self.state_dim();
        for r in 0..m {
            let row = &self.w1[r];
            let mut acc = self.b1[r];
            for c in 0..m {
                acc += row[c] * state[c];
            }
            acc += row[m] * g;
            hidden[r] = sigmoid(acc);
        }
        for r in 0..m {
            let row = &self.w2[r];
            let mut acc = self.b2[r];
            for c in 0..m {
                acc += row[c] * hidden[c];
            }
            let z = sigmoid(acc);
            out[r] = self.out_scale * (2.0 * z - 1.0);
        }
    }

    /// Second-stage activations `z`, needed by the training tape.
    pub(crate) fn rhs_stages(&self, state: &[f64], g: f64, hidden: &mut [f64], z: &mut [f64], out: &mut [f64]) {
        let m = self.state_dim();
        for r in 0..m {
            let row = &self.w1[r];
            let mut acc = self.b1[r];
            for c in 0..m {
                acc += row[c] * state[c];
            }
            acc += row[m] * g;
            hidden[r] = sigmoid(acc);
        }
        for r in 0..m {
            let row = &self.w2[r];
            let mut acc = self.b2[r];
            for c in 0..m {
                acc += row[c] * hidden[c];
            }
            z[r] = sigmoid(acc);
            out[r] = self.out_scale * (2.0 * z[r] - 1.0);
        }
    }
}

/// Glorot-uniform initialization; biases zero, output scale one,
/// identity normalization. Deterministic in `seed`.
pub fn init_model(n: usize, aug: usize, seed: u64) -> CoreResult<RomModel> {
    if n < 1 {
        return Err(CoreError::InvalidDimension("n must be at least 1".into()));
    }
    let m = n + aug;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut draw_matrix = |rows: usize, cols: usize| -> Vec<Vec<f64>> {
        let r = libm::sqrt(6.0 / (rows + cols) as f64);
        (0..rows)
            .map(|_| (0..cols).map(|_| rng.gen_range(-r..=r)).collect())
            .collect()
    };
    let w1 = draw_matrix(m, m + 1);
    let w2 = draw_matrix(m, m);
    Ok(RomModel {
        n,
        aug,
        w1,
        b1: vec![0.0; m],
        w2,
        b2: vec![0.0; m],
        out_scale: 1.0,
        norm: Normalization::identity(n),
    })
}

#[cfg(test)]
mod tests {
    extern crate std;

    use super::*;

    #[test]
    fn init_dimensions_follow_the_layer_law() {
        let model = init_model(2, 3, 0).unwrap();
        assert_eq!(model.w1.len(), 5);
        assert!(model.w1.iter().all(|r| r.len() == 6));
        assert_eq!(model.w2.len(), 5);
        assert!(model.w2.iter().all(|r| r.len() == 5));
        assert_eq!(model.b1.len(), 5);
        assert_eq!(model.b2.len(), 5);

        let plain = init_model(2, 0, 0).unwrap();
        assert_eq!(plain.w1.len(), 2);
        assert!(plain.w1.iter().all(|r| r.len() == 3));
    }

    #[test]
    fn init_is_deterministic() {
        let a = init_model(2, 2, 42).unwrap();
        let b = init_model(2, 2, 42).unwrap();
        assert_eq!(a, b);
        let c = init_model(2, 2, 43).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn zero_weights_give_zero_rhs() {
        let mut model = init_model(2, 1, 0).unwrap();
        for row in model.w1.iter_mut().chain(model.w2.iter_mut()) {
            row.iter_mut().for_each(|v| *v = 0.0);
        }
        let out = model.rhs(&[0.3, -0.2, 0.9], 0.5);
        for v in out {
            assert_eq!(v, 0.0);
        }
    }

    #[test]
    fn rhs_is_bounded_by_the_output_scale() {
        let model = init_model(2, 2, 7).unwrap();
        for seed in 0..20u64 {
            let x = seed as f64 * 13.7 - 100.0;
            let state = [x, -x, x * 0.1, 1000.0];
            for v in model.rhs(&state, x) {
                assert!(v.abs() < model.out_scale);
            }
        }
    }

    #[test]
    fn rhs_matches_a_straight_line_reimplementation() {
        let model = init_model(1, 1, 5).unwrap();
        let state = [0.4, -0.7];
        let g = 0.3;
        let got = model.rhs(&state, g);

        // Independent re-evaluation of the two-layer formula.
        let sig = |x: f64| 1.0 / (1.0 + libm::exp(-x));
        let x_in = [state[0], state[1], g];
        let mut h = [0.0; 2];
        for r in 0..2 {
            let a = model.w1[r][0] * x_in[0] + model.w1[r][1] * x_in[1] + model.w1[r][2] * x_in[2]
                + model.b1[r];
            h[r] = sig(a);
        }
        for r in 0..2 {
            let a = model.w2[r][0] * h[0] + model.w2[r][1] * h[1] + model.b2[r];
            let expect = model.out_scale * (2.0 * sig(a) - 1.0);
            assert!((got[r] - expect).abs() < 1e-12);
        }
    }

    #[test]
    fn normalization_round_trips() {
        let norm = Normalization {
            out_offset: vec![278.0, 280.0],
            out_scale: vec![120.0, 190.0],
            in_offset: 280.0,
            in_scale: 190.0,
            time_span: 1395.0,
        };
        for &y in &[278.0, 300.0, 455.5] {
            let back = norm.denormalize_output(0, norm.normalize_output(0, y));
            assert!((back - y).abs() < 1e-12);
        }
    }
}
