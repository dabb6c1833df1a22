//! Fixed-step classic Runge-Kutta integration of the model ODE.

use alloc::vec;
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use crate::error::{CoreError, CoreResult};
use crate::signals::{ExcitationSignal, TimeGrid};

use super::RomModel;

/// Integrated model response on a sampling grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub grid: TimeGrid,
    /// Normalized augmented states, `(n + i)` rows of `N` samples.
    pub states: Vec<Vec<f64>>,
    /// Physical outputs, `n` rows of `N` samples.
    pub outputs: Vec<Vec<f64>>,
}

/// Classic RK4 over `n_samples - 1` steps of width `d_tau`, with the scalar
/// input supplied per stage time. Generic in the vector field so analytic
/// fields can be injected for testing.
///
/// `field(state, g, tau, out)` writes the derivative into `out`;
/// `input(tau)` returns the (normalized) excitation at stage time `tau`.
pub fn rk4_integrate<F, G>(
    mut field: F,
    mut input: G,
    state0: &[f64],
    n_samples: usize,
    d_tau: f64,
) -> CoreResult<Vec<Vec<f64>>>
where
    F: FnMut(&[f64], f64, f64, &mut [f64]),
    G: FnMut(f64) -> CoreResult<f64>,
{
    let m = state0.len();
    let mut states = Vec::with_capacity(n_samples);
    states.push(state0.to_vec());

    let mut y = state0.to_vec();
    let mut k1 = vec![0.0; m];
    let mut k2 = vec![0.0; m];
    let mut k3 = vec![0.0; m];
    let mut k4 = vec![0.0; m];
    let mut stage = vec![0.0; m];

    for step in 0..n_samples - 1 {
        let tau = step as f64 * d_tau;
        let g0 = input(tau)?;
        let g_half = input(tau + 0.5 * d_tau)?;
        let g1 = input(tau + d_tau)?;

        field(&y, g0, tau, &mut k1);
        for c in 0..m {
            stage[c] = y[c] + 0.5 * d_tau * k1[c];
        }
        field(&stage, g_half, tau + 0.5 * d_tau, &mut k2);
        for c in 0..m {
            stage[c] = y[c] + 0.5 * d_tau * k2[c];
        }
        field(&stage, g_half, tau + 0.5 * d_tau, &mut k3);
        for c in 0..m {
            stage[c] = y[c] + d_tau * k3[c];
        }
        field(&stage, g1, tau + d_tau, &mut k4);
        for c in 0..m {
            y[c] += d_tau / 6.0 * (k1[c] + 2.0 * k2[c] + 2.0 * k3[c] + k4[c]);
        }
        if y.iter().any(|v| !v.is_finite()) {
            return Err(CoreError::NonFiniteState { step: step + 1 });
        }
        states.push(y.clone());
    }
    Ok(states)
}

impl RomModel {
    /// Integrates the model under the given excitation from the physical
    /// initial outputs `x0` (augmented variables start at zero).
    pub fn integrate(&self, signal: &ExcitationSignal, x0: &[f64]) -> CoreResult<Trajectory> {
        self.validate()?;
        if x0.len() != self.n {
            return Err(CoreError::InvalidDimension(alloc::format!(
                "x0 has {} entries, model has {} channels",
                x0.len(),
                self.n
            )));
        }
        let grid = signal.grid;
        let m = self.state_dim();
        let mut state0 = vec![0.0; m];
        for ch in 0..self.n {
            state0[ch] = self.norm.normalize_output(ch, x0[ch]);
        }

        // One normalized time unit spans the training horizon; a signal of a
        // different length is integrated over the proportional tau range.
        let d_tau = grid.dt / self.norm.time_span;
        let t0 = grid.t0;
        let span = self.norm.time_span;
        let n_samples = grid.n_samples;

        // Stage inputs (nodes and step midpoints), normalized once up front
        // so the integration loop is pure arithmetic.
        let mut g_stage = Vec::with_capacity(2 * n_samples - 1);
        for step in 0..2 * (n_samples - 1) + 1 {
            let tau = step as f64 * (0.5 * d_tau);
            g_stage.push(self.norm.normalize_input(signal.sample_at(t0 + tau * span)?));
        }

        // Flattened weights: row-major, the input column last in `w1f`.
        let w1f: Vec<f64> = self.w1.iter().flatten().copied().collect();
        let w2f: Vec<f64> = self.w2.iter().flatten().copied().collect();
        let sc = self.out_scale;
        let rhs = |state: &[f64], g: f64, hidden: &mut [f64], out: &mut [f64]| {
            for (r, h) in hidden.iter_mut().enumerate() {
                let row = &w1f[r * (m + 1)..(r + 1) * (m + 1)];
                let mut acc = self.b1[r];
                for (w, s) in row[..m].iter().zip(state) {
                    acc += w * s;
                }
                *h = super::sigmoid(acc + row[m] * g);
            }
            for (r, o) in out.iter_mut().enumerate() {
                let row = &w2f[r * m..(r + 1) * m];
                let mut acc = self.b2[r];
                for (w, h) in row.iter().zip(hidden.iter()) {
                    acc += w * h;
                }
                *o = sc * (2.0 * super::sigmoid(acc) - 1.0);
            }
        };

        let mut states = vec![vec![0.0; n_samples]; m];
        let mut outputs = vec![vec![0.0; n_samples]; self.n];
        let mut y = state0;
        let mut k1 = vec![0.0; m];
        let mut k2 = vec![0.0; m];
        let mut k3 = vec![0.0; m];
        let mut k4 = vec![0.0; m];
        let mut stage = vec![0.0; m];
        let mut hidden = vec![0.0; m];
        let record = |states: &mut [Vec<f64>], outputs: &mut [Vec<f64>], y: &[f64], k: usize| {
            for c in 0..m {
                states[c][k] = y[c];
            }
            for ch in 0..self.n {
                outputs[ch][k] = self.norm.denormalize_output(ch, y[ch]);
            }
        };
        record(&mut states, &mut outputs, &y, 0);
        for step in 0..n_samples - 1 {
            let g0 = g_stage[2 * step];
            let g_half = g_stage[2 * step + 1];
            let g1 = g_stage[2 * step + 2];
            rhs(&y, g0, &mut hidden, &mut k1);
            for c in 0..m {
                stage[c] = y[c] + 0.5 * d_tau * k1[c];
            }
            rhs(&stage, g_half, &mut hidden, &mut k2);
            for c in 0..m {
                stage[c] = y[c] + 0.5 * d_tau * k2[c];
            }
            rhs(&stage, g_half, &mut hidden, &mut k3);
            for c in 0..m {
                stage[c] = y[c] + d_tau * k3[c];
            }
            rhs(&stage, g1, &mut hidden, &mut k4);
            for c in 0..m {
                y[c] += d_tau / 6.0 * (k1[c] + 2.0 * k2[c] + 2.0 * k3[c] + k4[c]);
            }
            if y.iter().any(|v| !v.is_finite()) {
                return Err(CoreError::NonFiniteState { step: step + 1 });
            }
            record(&mut states, &mut outputs, &y, step + 1);
        }
        Ok(Trajectory { grid, states, outputs })
    }
}
