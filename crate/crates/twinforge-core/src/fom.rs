//! Built-in reference full-order model: a 1D slab with coupled heat and
//! moisture transport and a convective boundary, solved with second-order
//! central differences in space and explicit Euler in time.
//!
//! The slab spans `[0, L]` with a symmetry (zero-flux) condition at `x = 0`
//! and the mixed boundary at `x = L`:
//!
//! ```text
//! dT/dt = (k(M) / rho_cp) d2T/dx2,   k(M) = k0 (1 + beta_M M)
//! dM/dt = D_m d2M/dx2
//! -k dT/dx = alpha (T_surf - T_oven(t))            at x = L
//! -D_m dM/dx = h_evap max(T_surf - T_init, 0) M_surf at x = L
//! ```

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use crate::error::{CoreError, CoreResult};
use crate::signals::ExcitationSignal;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FomConfig {
    /// Slab half-thickness in meters.
    pub length: f64,
    pub n_nodes: usize,
    /// Convective heat-transfer coefficient, W/(m^2 K).
    pub alpha: f64,
    /// Base thermal conductivity, W/(m K).
    pub k0: f64,
    /// Moisture sensitivity of the conductivity (dimensionless).
    pub beta_m: f64,
    /// Volumetric heat capacity, J/(m^3 K).
    pub rho_cp: f64,
    /// Moisture diffusivity, m^2/s.
    pub d_m: f64,
    /// Surface moisture-loss coefficient, 1/(s K).
    pub h_evap: f64,
    pub t_init: f64,
    /// Initial dry-basis moisture content.
    pub m_init: f64,
    pub dt_internal: f64,
    pub probe_core_index: usize,
    pub probe_surface_index: usize,
}

impl Default for FomConfig {
    fn default() -> Self {
        Self {
            length: 0.015,
            n_nodes: 31,
            alpha: 25.0,
            k0: 0.45,
            beta_m: 0.3,
            rho_cp: 3.6e6,
            d_m: 1e-9,
            h_evap: 1e-6,
            t_init: 278.0,
            m_init: 2.5,
            dt_internal: 0.25,
            probe_core_index: 0,
            probe_surface_index: 30,
        }
    }
}

impl FomConfig {
    pub fn dx(&self) -> f64 {
        self.length / (self.n_nodes - 1) as f64
    }

    /// Largest stable explicit step for the heat equation with the
    /// worst-case conductivity `k0 (1 + beta_M m_init)`.
    pub fn dt_stable(&self) -> f64 {
        let k_max = self.k0 * (1.0 + self.beta_m * self.m_init);
        0.5 * self.dx() * self.dx() * self.rho_cp / k_max
    }

    pub fn validate(&self, recording_dt: f64) -> CoreResult<()> {
        if self.n_nodes < 3 {
            return Err(CoreError::InvalidConfig(format!(
                "n_nodes must be at least 3, got {}",
                self.n_nodes
            )));
        }
        for (name, v) in [
            ("length", self.length),
            ("alpha", self.alpha),
            ("k0", self.k0),
            ("rho_cp", self.rho_cp),
            ("d_m", self.d_m),
            ("dt_internal", self.dt_internal),
        ] {
            if !(v > 0.0) {
                return Err(CoreError::InvalidConfig(format!("{name} must be positive, got {v}")));
            }
        }
        if self.beta_m < 0.0 || self.h_evap < 0.0 {
            return Err(CoreError::InvalidConfig(
                "beta_m and h_evap must be nonnegative".into(),
            ));
        }
        if self.probe_core_index >= self.n_nodes || self.probe_surface_index >= self.n_nodes {
            return Err(CoreError::InvalidConfig("probe index out of range".into()));
        }
        let steps = recording_dt / self.dt_internal;
        if (steps - libm::round(steps)).abs() > 1e-9 * steps.max(1.0) {
            return Err(CoreError::InvalidConfig(format!(
                "dt_internal {} s must divide the recording step {} s",
                self.dt_internal, recording_dt
            )));
        }
        if self.dt_internal > self.dt_stable() {
            return Err(CoreError::UnstableTimestep {
                dt: self.dt_internal,
                dt_max: self.dt_stable(),
            });
        }
        Ok(())
    }
}

/// One excitation plus the recorded model outputs on a shared grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DataSet {
    pub id: String,
    pub excitation: ExcitationSignal,
    /// Channel-major 2xN output array, kelvin.
    pub outputs: Vec<Vec<f64>>,
    /// Digest of the producing configuration and seed.
    pub provenance: String,
}

pub const CHANNEL_NAMES: [&str; 2] = ["T_A", "T_B"];

impl DataSet {
    pub fn n_samples(&self) -> usize {
        self.excitation.grid.n_samples
    }

    pub fn n_channels(&self) -> usize {
        self.outputs.len()
    }

    pub fn validate(&self) -> CoreResult<()> {
        if self.outputs.len() != 2 {
            return Err(CoreError::ShapeMismatch {
                expected: (2, self.n_samples()),
                got: (self.outputs.len(), self.outputs.first().map_or(0, Vec::len)),
            });
        }
        for ch in &self.outputs {
            if ch.len() != self.n_samples() {
                return Err(CoreError::ShapeMismatch {
                    expected: (2, self.n_samples()),
                    got: (2, ch.len()),
                });
            }
            if ch.iter().any(|v| !v.is_finite()) {
                return Err(CoreError::NonFiniteState { step: 0 });
            }
        }
        Ok(())
    }
}

/// Integrates the coupled heat/moisture slab under the given excitation and
/// records the probe temperatures at every grid sample.
pub fn simulate_fom(signal: &ExcitationSignal, cfg: &FomConfig) -> CoreResult<DataSet> {
    let grid = &signal.grid;
    cfg.validate(grid.dt)?;

    let n = cfg.n_nodes;
    let dx = cfg.dx();
    let dx2 = dx * dx;
    let dt = cfg.dt_internal;
    let substeps = libm::round(grid.dt / dt) as usize;

    let mut temp = vec![cfg.t_init; n];
    let mut moist = vec![cfg.m_init; n];
    let mut temp_next = vec![0.0; n];
    let mut moist_next = vec![0.0; n];

    let mut t_a = Vec::with_capacity(grid.n_samples);
    let mut t_b = Vec::with_capacity(grid.n_samples);
    t_a.push(temp[cfg.probe_core_index]);
    t_b.push(temp[cfg.probe_surface_index]);

    for sample in 1..grid.n_samples {
        let t_base = grid.time(sample - 1);
        for sub in 0..substeps {
            let t_now = t_base + sub as f64 * dt;
            let t_oven = signal.sample_at(t_now)?;

            // Interior nodes, conductivity evaluated per node.
            for j in 0..n {
                let k_j = cfg.k0 * (1.0 + cfg.beta_m * moist[j]);
                let lap_t;
                let lap_m;
                if j == 0 {
                    // Symmetry: ghost mirrors node 1.
                    lap_t = 2.0 * (temp[1] - temp[0]) / dx2;
                    lap_m = 2.0 * (moist[1] - moist[0]) / dx2;
                } else if j == n - 1 {
                    // Mixed boundary via ghost node.
                    let c_t = 2.0 * dx * cfg.alpha / k_j;
                    let ghost_t = temp[n - 2] - c_t * (temp[n - 1] - t_oven);
                    lap_t = (ghost_t - 2.0 * temp[n - 1] + temp[n - 2]) / dx2;
                    let drive = (temp[n - 1] - cfg.t_init).max(0.0);
                    let c_m = 2.0 * dx * cfg.h_evap * drive / cfg.d_m;
                    let ghost_m = moist[n - 2] - c_m * moist[n - 1];
                    lap_m = (ghost_m - 2.0 * moist[n - 1] + moist[n - 2]) / dx2;
                } else {
                    lap_t = (temp[j + 1] - 2.0 * temp[j] + temp[j - 1]) / dx2;
                    lap_m = (moist[j + 1] - 2.0 * moist[j] + moist[j - 1]) / dx2;
                }
                temp_next[j] = temp[j] + dt * k_j / cfg.rho_cp * lap_t;
                moist_next[j] = (moist[j] + dt * cfg.d_m * lap_m).max(0.0);
            }
            core::mem::swap(&mut temp, &mut temp_next);
            core::mem::swap(&mut moist, &mut moist_next);
        }
        let core_t = temp[cfg.probe_core_index];
        let surf_t = temp[cfg.probe_surface_index];
        if !core_t.is_finite() || !surf_t.is_finite() {
            return Err(CoreError::NonFiniteState { step: sample });
        }
        t_a.push(core_t);
        t_b.push(surf_t);
    }

    Ok(DataSet {
        id: String::new(),
        excitation: signal.clone(),
        outputs: vec![t_a, t_b],
        provenance: String::new(),
    })
}

#[cfg(test)]
mod tests {
    extern crate std;

    use super::*;
    use crate::signals::{gen_aprbs, AprbsConfig, ExcitationSignal, SignalKind, TimeGrid};

    fn grid() -> TimeGrid {
        TimeGrid::new(280, 5.0, 0.0).unwrap()
    }

    fn constant_signal(grid: TimeGrid, value: f64) -> ExcitationSignal {
        ExcitationSignal {
            grid,
            values: vec![value; grid.n_samples],
            kind: SignalKind::Aprbs,
            jumps: Vec::new(),
            seed: 0,
            id: String::new(),
        }
    }

    fn step_signal(grid: TimeGrid, from: f64, to: f64) -> ExcitationSignal {
        let mut sig = constant_signal(grid, to);
        sig.values[0] = from;
        sig
    }

    #[test]
    fn constant_input_is_an_equilibrium() {
        let cfg = FomConfig::default();
        let ds = simulate_fom(&constant_signal(grid(), cfg.t_init), &cfg).unwrap();
        for ch in &ds.outputs {
            for &v in ch {
                assert!((v - cfg.t_init).abs() < 1e-10, "drift: {}", v - cfg.t_init);
            }
        }
    }

    #[test]
    fn step_input_heats_surface_before_core() {
        let cfg = FomConfig::default();
        let ds = simulate_fom(&step_signal(grid(), cfg.t_init, cfg.t_init + 100.0), &cfg).unwrap();
        let (t_a, t_b) = (&ds.outputs[0], &ds.outputs[1]);
        for k in 1..t_b.len() {
            assert!(t_b[k] >= t_b[k - 1] - 1e-12, "surface not monotone at {k}");
            assert!(t_b[k] >= t_a[k] - 1e-12, "core above surface at {k}");
        }
        assert!(t_b[t_b.len() - 1] > cfg.t_init + 10.0);
    }

    #[test]
    fn maximum_principle_on_random_aprbs() {
        let cfg = FomConfig::default();
        let sig_cfg = AprbsConfig { hold_max: 320.0, ..AprbsConfig::default() };
        for seed in 0..10 {
            let sig = gen_aprbs(&sig_cfg, &grid(), seed).unwrap();
            let ds = simulate_fom(&sig, &cfg).unwrap();
            let lo = sig.values.iter().cloned().fold(cfg.t_init, f64::min);
            let hi = sig.values.iter().cloned().fold(cfg.t_init, f64::max);
            for ch in &ds.outputs {
                for &v in ch {
                    assert!(v >= lo - 1e-9 && v <= hi + 1e-9, "seed {seed}: {v} outside [{lo}, {hi}]");
                }
            }
        }
    }

    #[test]
    fn self_convergence_under_step_halving() {
        // Explicit Euler is first order; the 1e-3 K bound needs a refined
        // internal step (the halving gap at the 0.25 s default is ~0.04 K).
        let cfg = FomConfig { dt_internal: 0.004, ..FomConfig::default() };
        let fine = FomConfig { dt_internal: cfg.dt_internal / 2.0, ..cfg };
        let sig = step_signal(grid(), cfg.t_init, cfg.t_init + 150.0);
        let coarse_ds = simulate_fom(&sig, &cfg).unwrap();
        let fine_ds = simulate_fom(&sig, &fine).unwrap();
        let mut max_diff = 0.0f64;
        for (a, b) in coarse_ds.outputs.iter().zip(&fine_ds.outputs) {
            for (&x, &y) in a.iter().zip(b) {
                max_diff = max_diff.max((x - y).abs());
            }
        }
        assert!(max_diff < 1e-3, "self-convergence gap {max_diff} K");
    }

    #[test]
    fn unstable_timestep_is_rejected() {
        let cfg = FomConfig { dt_internal: 2.5, ..FomConfig::default() };
        let g = TimeGrid::new(10, 5.0, 0.0).unwrap();
        let err = simulate_fom(&constant_signal(g, 278.0), &cfg).unwrap_err();
        assert!(matches!(err, CoreError::UnstableTimestep { .. }));
    }

    #[test]
    fn simulation_is_deterministic() {
        let cfg = FomConfig::default();
        let sig = gen_aprbs(&AprbsConfig { hold_max: 320.0, ..AprbsConfig::default() }, &grid(), 4).unwrap();
        let a = simulate_fom(&sig, &cfg).unwrap();
        let b = simulate_fom(&sig, &cfg).unwrap();
        assert_eq!(a.outputs, b.outputs);
    }

    #[test]
    fn mean_moisture_is_nonincreasing() {
        // Track moisture via a probe-free rerun at coarse resolution.
        let cfg = FomConfig::default();
        let sig = step_signal(grid(), cfg.t_init, cfg.t_init + 150.0);
        // simulate_fom does not expose moisture; check the invariant by
        // re-running the update loop here with the same scheme.
        let n = cfg.n_nodes;
        let dx2 = cfg.dx() * cfg.dx();
        let dt = cfg.dt_internal;
        let mut temp = vec![cfg.t_init; n];
        let mut moist = vec![cfg.m_init; n];
        let mut prev_mean = cfg.m_init;
        let steps = ((grid().duration() / dt) as usize).min(4000);
        for step in 0..steps {
            let t_oven = sig.sample_at((step as f64 * dt).min(grid().t_end())).unwrap();
            let mut temp_next = temp.clone();
            let mut moist_next = moist.clone();
            for j in 0..n {
                let k_j = cfg.k0 * (1.0 + cfg.beta_m * moist[j]);
                let (lap_t, lap_m) = if j == 0 {
                    (2.0 * (temp[1] - temp[0]) / dx2, 2.0 * (moist[1] - moist[0]) / dx2)
                } else if j == n - 1 {
                    let c_t = 2.0 * cfg.dx() * cfg.alpha / k_j;
                    let ghost_t = temp[n - 2] - c_t * (temp[n - 1] - t_oven);
                    let drive = (temp[n - 1] - cfg.t_init).max(0.0);
                    let c_m = 2.0 * cfg.dx() * cfg.h_evap * drive / cfg.d_m;
                    let ghost_m = moist[n - 2] - c_m * moist[n - 1];
                    (
                        (ghost_t - 2.0 * temp[n - 1] + temp[n - 2]) / dx2,
                        (ghost_m - 2.0 * moist[n - 1] + moist[n - 2]) / dx2,
                    )
                } else {
                    (
                        (temp[j + 1] - 2.0 * temp[j] + temp[j - 1]) / dx2,
                        (moist[j + 1] - 2.0 * moist[j] + moist[j - 1]) / dx2,
                    )
                };
                temp_next[j] = temp[j] + dt * k_j / cfg.rho_cp * lap_t;
                moist_next[j] = (moist[j] + dt * cfg.d_m * lap_m).max(0.0);
            }
            temp = temp_next;
            moist = moist_next;
            let mean: f64 = moist.iter().sum::<f64>() / n as f64;
            assert!(mean <= prev_mean + 1e-12, "moisture mean rose at step {step}");
            prev_mean = mean;
        }
        assert!(prev_mean < cfg.m_init);
    }
}
