//! Excitation signal synthesis.
//!
//! Three signal classes drive the reference model: amplitude-modulated
//! pseudo-random binary sequences (APRBS), multi-sines, and APRBS with
//! half-cosine ramps replacing the steps (sinAPRBS). All generators are
//! deterministic functions of (config, grid, seed).

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::f64::consts::PI;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{CoreError, CoreResult};

/// Uniform sampling grid: sample `k` has time `t0 + k * dt`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    pub n_samples: usize,
    pub dt: f64,
    pub t0: f64,
}

impl TimeGrid {
    pub fn new(n_samples: usize, dt: f64, t0: f64) -> CoreResult<Self> {
        if n_samples < 2 {
            return Err(CoreError::InvalidConfig(format!(
                "grid needs at least 2 samples, got {n_samples}"
            )));
        }
        if !(dt > 0.0) {
            return Err(CoreError::InvalidConfig(format!("dt must be positive, got {dt}")));
        }
        Ok(Self { n_samples, dt, t0 })
    }

    pub fn time(&self, k: usize) -> f64 {
        self.t0 + k as f64 * self.dt
    }

    pub fn t_end(&self) -> f64 {
        self.time(self.n_samples - 1)
    }

    /// Span covered by the samples, `(n_samples - 1) * dt`.
    pub fn duration(&self) -> f64 {
        (self.n_samples - 1) as f64 * self.dt
    }

    pub fn nyquist(&self) -> f64 {
        0.5 / self.dt
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SignalKind {
    Aprbs,
    Multisine,
    SinAprbs,
}

impl SignalKind {
    pub fn prefix(&self) -> &'static str {
        match self {
            SignalKind::Aprbs => "AP",
            SignalKind::Multisine => "MS",
            SignalKind::SinAprbs => "SA",
        }
    }
}

/// One level change of an APRBS-family signal.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Jump {
    /// Jump instant in seconds (a grid node).
    pub time: f64,
    /// Signed level change in kelvin.
    pub delta: f64,
}

/// A sampled oven-temperature trajectory with its synthesis metadata.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExcitationSignal {
    pub grid: TimeGrid,
    pub values: Vec<f64>,
    pub kind: SignalKind,
    pub jumps: Vec<Jump>,
    pub seed: u64,
    pub id: String,
}

impl ExcitationSignal {
    /// Plateau levels of an APRBS-family signal, reconstructed from the
    /// first sample and the jump deltas.
    pub fn plateau_levels(&self) -> CoreResult<Vec<f64>> {
        if self.kind == SignalKind::Multisine {
            return Err(CoreError::MissingJumps);
        }
        let mut levels = Vec::with_capacity(self.jumps.len() + 1);
        let mut level = self.values[0];
        levels.push(level);
        for jump in &self.jumps {
            level += jump.delta;
            levels.push(level);
        }
        Ok(levels)
    }

    /// Linear interpolation between the bracketing samples; exact at nodes.
    pub fn sample_at(&self, t: f64) -> CoreResult<f64> {
        let grid = &self.grid;
        let t_end = grid.t_end();
        let tol = 1e-9 * grid.dt.max(1.0);
        if t < grid.t0 - tol || t > t_end + tol {
            return Err(CoreError::OutOfRange { t, t_min: grid.t0, t_max: t_end });
        }
        let s = ((t - grid.t0) / grid.dt).clamp(0.0, (grid.n_samples - 1) as f64);
        let k = (s as usize).min(grid.n_samples - 2);
        let frac = s - k as f64;
        Ok(self.values[k] * (1.0 - frac) + self.values[k + 1] * frac)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum FirstValueMode {
    Random,
    Fixed(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AprbsConfig {
    pub amp_min: f64,
    pub amp_max: f64,
    pub n_levels: usize,
    pub hold_min: f64,
    pub hold_max: f64,
    /// Ramp width in seconds; 0 for pure APRBS, > 0 for sinAPRBS.
    pub transition_time: f64,
    pub first_value_mode: FirstValueMode,
}

impl Default for AprbsConfig {
    fn default() -> Self {
        Self {
            amp_min: 280.0,
            amp_max: 470.0,
            n_levels: 5,
            hold_min: 150.0,
            hold_max: 500.0,
            transition_time: 0.0,
            first_value_mode: FirstValueMode::Random,
        }
    }
}

impl AprbsConfig {
    fn validate(&self, grid: &TimeGrid) -> CoreResult<()> {
        if !(self.amp_min < self.amp_max) {
            return Err(CoreError::InvalidConfig(format!(
                "amp_min {} must be below amp_max {}",
                self.amp_min, self.amp_max
            )));
        }
        if self.n_levels < 2 {
            return Err(CoreError::InvalidConfig(format!(
                "n_levels must be at least 2, got {}",
                self.n_levels
            )));
        }
        if !(self.hold_min > 0.0 && self.hold_min <= self.hold_max) {
            return Err(CoreError::InvalidConfig(format!(
                "hold times must satisfy 0 < hold_min <= hold_max, got [{}, {}]",
                self.hold_min, self.hold_max
            )));
        }
        if (self.n_levels - 1) as f64 * self.hold_min > grid.duration() {
            return Err(CoreError::InvalidConfig(format!(
                "{} plateaus at hold_min {} s exceed the grid span {} s",
                self.n_levels,
                self.hold_min,
                grid.duration()
            )));
        }
        if let FirstValueMode::Fixed(v) = self.first_value_mode {
            if v < self.amp_min || v > self.amp_max {
                return Err(CoreError::InvalidConfig(format!(
                    "fixed first value {v} outside [{}, {}]",
                    self.amp_min, self.amp_max
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PhaseMode {
    Random,
    Schroeder,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MultisineConfig {
    pub amp_min: f64,
    pub amp_max: f64,
    pub n_harmonics: usize,
    pub f_min: f64,
    pub f_max: f64,
    pub phase_mode: PhaseMode,
}

impl Default for MultisineConfig {
    fn default() -> Self {
        Self {
            amp_min: 280.0,
            amp_max: 470.0,
            n_harmonics: 4,
            f_min: 0.0008,
            f_max: 0.004,
            phase_mode: PhaseMode::Random,
        }
    }
}

impl MultisineConfig {
    fn validate(&self, grid: &TimeGrid) -> CoreResult<()> {
        if !(self.amp_min < self.amp_max) {
            return Err(CoreError::InvalidConfig(format!(
                "amp_min {} must be below amp_max {}",
                self.amp_min, self.amp_max
            )));
        }
        if self.n_harmonics < 1 {
            return Err(CoreError::InvalidConfig("n_harmonics must be at least 1".into()));
        }
        if !(self.f_min > 0.0 && self.f_min < self.f_max && self.f_max <= grid.nyquist()) {
            return Err(CoreError::InvalidConfig(format!(
                "frequency band [{}, {}] must satisfy 0 < f_min < f_max <= Nyquist {}",
                self.f_min,
                self.f_max,
                grid.nyquist()
            )));
        }
        Ok(())
    }
}

/// Plateau schedule shared by APRBS and sinAPRBS: levels plus snapped jump
/// instants, drawn from the seeded generator.
struct PlateauSchedule {
    levels: Vec<f64>,
    jump_times: Vec<f64>,
}

fn draw_schedule(cfg: &AprbsConfig, grid: &TimeGrid, seed: u64) -> CoreResult<PlateauSchedule> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut levels = Vec::with_capacity(cfg.n_levels);
    let first = match cfg.first_value_mode {
        FirstValueMode::Random => rng.gen_range(cfg.amp_min..=cfg.amp_max),
        FirstValueMode::Fixed(v) => v,
    };
    levels.push(first);
    for _ in 1..cfg.n_levels {
        levels.push(rng.gen_range(cfg.amp_min..=cfg.amp_max));
    }

    // Hold durations snapped to the nearest grid node (at least one sample).
    let mut jump_times = Vec::with_capacity(cfg.n_levels - 1);
    let mut t = grid.t0;
    for _ in 0..cfg.n_levels - 1 {
        let hold = rng.gen_range(cfg.hold_min..=cfg.hold_max);
        let steps = libm::round(hold / grid.dt).max(1.0);
        t += steps * grid.dt;
        jump_times.push(t);
    }
    // The final plateau must own at least one sample.
    let t_last = *jump_times.last().expect("n_levels >= 2");
    if t_last > grid.t_end() + 1e-9 * grid.dt {
        return Err(CoreError::DurationTooShort {
            needed: t_last - grid.t0,
            available: grid.duration(),
        });
    }
    Ok(PlateauSchedule { levels, jump_times })
}

fn jumps_of(schedule: &PlateauSchedule) -> Vec<Jump> {
    schedule
        .jump_times
        .iter()
        .zip(schedule.levels.windows(2))
        .map(|(&time, pair)| Jump { time, delta: pair[1] - pair[0] })
        .collect()
}

/// Piecewise-constant excitation with random levels and hold times.
pub fn gen_aprbs(cfg: &AprbsConfig, grid: &TimeGrid, seed: u64) -> CoreResult<ExcitationSignal> {
    cfg.validate(grid)?;
    let schedule = draw_schedule(cfg, grid, seed)?;
    let tol = 1e-9 * grid.dt;
    let values = (0..grid.n_samples)
        .map(|k| {
            let t = grid.time(k);
            // A jump scheduled on node k takes effect at that node.
            let idx = schedule.jump_times.iter().filter(|&&tj| tj <= t + tol).count();
            schedule.levels[idx]
        })
        .collect();
    Ok(ExcitationSignal {
        grid: *grid,
        values,
        kind: SignalKind::Aprbs,
        jumps: jumps_of(&schedule),
        seed,
        id: String::new(),
    })
}

/// APRBS with each step replaced by a half-cosine ramp of width
/// `transition_time` centered on the jump instant.
pub fn gen_sinaprbs(cfg: &AprbsConfig, grid: &TimeGrid, seed: u64) -> CoreResult<ExcitationSignal> {
    cfg.validate(grid)?;
    if !(cfg.transition_time > 0.0) {
        return Err(CoreError::InvalidConfig(
            "sinAPRBS requires transition_time > 0".into(),
        ));
    }
    if cfg.transition_time > cfg.hold_min {
        return Err(CoreError::InvalidConfig(format!(
            "transition_time {} s exceeds hold_min {} s; ramps would overlap",
            cfg.transition_time, cfg.hold_min
        )));
    }
    let schedule = draw_schedule(cfg, grid, seed)?;
    let w = cfg.transition_time;
    let values = (0..grid.n_samples)
        .map(|k| {
            let t = grid.time(k);
            // Locate the plateau index, then blend if t falls on a ramp.
            let idx = schedule.jump_times.iter().filter(|&&tj| tj <= t).count();
            let mut v = schedule.levels[idx];
            if idx < schedule.jump_times.len() {
                let tj = schedule.jump_times[idx];
                if t > tj - 0.5 * w {
                    let phase = (t - (tj - 0.5 * w)) / w;
                    let delta = schedule.levels[idx + 1] - schedule.levels[idx];
                    v += delta * 0.5 * (1.0 - libm::cos(PI * phase));
                }
            }
            if idx > 0 {
                let tj = schedule.jump_times[idx - 1];
                if t < tj + 0.5 * w {
                    let phase = (t - (tj - 0.5 * w)) / w;
                    let delta = schedule.levels[idx] - schedule.levels[idx - 1];
                    v = schedule.levels[idx - 1] + delta * 0.5 * (1.0 - libm::cos(PI * phase));
                }
            }
            v
        })
        .collect();
    Ok(ExcitationSignal {
        grid: *grid,
        values,
        kind: SignalKind::SinAprbs,
        jumps: jumps_of(&schedule),
        seed,
        id: String::new(),
    })
}

/// Sum of equally spaced sinusoids, affinely rescaled so the sampled min and
/// max hit `amp_min` and `amp_max` exactly.
pub fn gen_multisine(
    cfg: &MultisineConfig,
    grid: &TimeGrid,
    seed: u64,
) -> CoreResult<ExcitationSignal> {
    cfg.validate(grid)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let m = cfg.n_harmonics;
    let freqs: Vec<f64> = (0..m)
        .map(|j| {
            if m == 1 {
                cfg.f_min
            } else {
                cfg.f_min + j as f64 * (cfg.f_max - cfg.f_min) / (m - 1) as f64
            }
        })
        .collect();
    let phases: Vec<f64> = (0..m)
        .map(|j| match cfg.phase_mode {
            PhaseMode::Random => rng.gen_range(0.0..2.0 * PI),
            PhaseMode::Schroeder => -PI * (j * (j + 1)) as f64 / m as f64,
        })
        .collect();

    let mut raw: Vec<f64> = (0..grid.n_samples)
        .map(|k| {
            let t = grid.time(k) - grid.t0;
            freqs
                .iter()
                .zip(&phases)
                .map(|(&f, &p)| libm::sin(2.0 * PI * f * t + p))
                .sum()
        })
        .collect();
    let lo = raw.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = raw.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !((hi - lo) > 1e-12) {
        return Err(CoreError::InvalidConfig(
            "multisine is constant on this grid; adjust band or phases".into(),
        ));
    }
    let scale = (cfg.amp_max - cfg.amp_min) / (hi - lo);
    for v in &mut raw {
        *v = cfg.amp_min + (*v - lo) * scale;
    }
    Ok(ExcitationSignal {
        grid: *grid,
        values: raw,
        kind: SignalKind::Multisine,
        jumps: Vec::new(),
        seed,
        id: String::new(),
    })
}

#[cfg(test)]
mod tests {
    extern crate std;

    use super::*;
    use alloc::vec;

    fn grid() -> TimeGrid {
        TimeGrid::new(280, 5.0, 0.0).unwrap()
    }

    // Hold range whose worst-case total always fits the 1395 s span.
    fn cfg() -> AprbsConfig {
        AprbsConfig { hold_max: 320.0, ..AprbsConfig::default() }
    }

    fn count_discontinuities(values: &[f64]) -> usize {
        values.windows(2).filter(|w| w[1] != w[0]).count()
    }

    #[test]
    fn aprbs_is_deterministic() {
        let cfg = cfg();
        let a = gen_aprbs(&cfg, &grid(), 7).unwrap();
        let b = gen_aprbs(&cfg, &grid(), 7).unwrap();
        assert_eq!(a.values, b.values);
        assert_eq!(a.jumps, b.jumps);
    }

    #[test]
    fn aprbs_jump_accounting() {
        let cfg = AprbsConfig { n_levels: 5, ..cfg() };
        for seed in 0..20 {
            let sig = gen_aprbs(&cfg, &grid(), seed).unwrap();
            assert_eq!(sig.jumps.len(), 4, "seed {seed}");
            assert_eq!(count_discontinuities(&sig.values), 4, "seed {seed}");
        }
    }

    #[test]
    fn aprbs_stays_in_range() {
        let cfg = cfg();
        for seed in 0..50 {
            let sig = gen_aprbs(&cfg, &grid(), seed).unwrap();
            for &v in &sig.values {
                assert!(v >= cfg.amp_min && v <= cfg.amp_max);
            }
        }
    }

    #[test]
    fn aprbs_rejects_short_duration() {
        let cfg = AprbsConfig { n_levels: 10, hold_min: 400.0, hold_max: 500.0, ..AprbsConfig::default() };
        let err = gen_aprbs(&cfg, &grid(), 1).unwrap_err();
        assert!(matches!(err, CoreError::InvalidConfig(_) | CoreError::DurationTooShort { .. }));
    }

    #[test]
    fn multisine_hits_amplitude_bounds_exactly() {
        let cfg = MultisineConfig { n_harmonics: 1, phase_mode: PhaseMode::Schroeder, ..MultisineConfig::default() };
        let sig = gen_multisine(&cfg, &grid(), 0).unwrap();
        let lo = sig.values.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = sig.values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        assert_eq!(lo, cfg.amp_min);
        assert_eq!(hi, cfg.amp_max);
    }

    #[test]
    fn multisine_spectrum_has_energy_only_at_configured_frequencies() {
        // Band chosen so all 3 harmonics land exactly on DFT bins of the
        // 256-sample grid (bin spacing 1/(256*5) Hz).
        let grid = TimeGrid::new(256, 5.0, 0.0).unwrap();
        let df = 1.0 / (256.0 * 5.0);
        let cfg = MultisineConfig {
            n_harmonics: 3,
            f_min: 4.0 * df,
            f_max: 10.0 * df,
            phase_mode: PhaseMode::Random,
            ..MultisineConfig::default()
        };
        let sig = gen_multisine(&cfg, &grid, 1).unwrap();

        // DFT oracle on the emitted array.
        use rustfft::{num_complex::Complex, FftPlanner};
        let mut buf: vec::Vec<Complex<f64>> =
            sig.values.iter().map(|&v| Complex::new(v, 0.0)).collect();
        FftPlanner::new().plan_fft_forward(256).process(&mut buf);
        let mags: vec::Vec<f64> = buf.iter().take(128).map(|c| c.norm()).collect();
        let expected_bins = [4usize, 7, 10];
        let floor = 1e-6 * mags.iter().cloned().fold(0.0, f64::max);
        for (bin, &mag) in mags.iter().enumerate().skip(1) {
            if expected_bins.contains(&bin) {
                assert!(mag > floor, "expected energy at bin {bin}");
            } else {
                assert!(mag < floor, "unexpected energy at bin {bin}: {mag}");
            }
        }
    }

    #[test]
    fn sinaprbs_plateaus_match_aprbs_and_ramps_are_monotone() {
        let base = cfg();
        let smooth = AprbsConfig { transition_time: 60.0, ..base };
        for seed in 0..10 {
            let ap = gen_aprbs(&base, &grid(), seed).unwrap();
            let sa = gen_sinaprbs(&smooth, &grid(), seed).unwrap();
            assert_eq!(ap.jumps, sa.jumps);
            // Samples outside every ramp must coincide with the APRBS.
            for k in 0..ap.grid.n_samples {
                let t = ap.grid.time(k);
                let on_ramp = sa
                    .jumps
                    .iter()
                    .any(|j| t > j.time - 30.0 && t < j.time + 30.0);
                if !on_ramp {
                    assert_eq!(ap.values[k], sa.values[k], "seed {seed} sample {k}");
                }
            }
            // Monotone along each ramp.
            for j in &sa.jumps {
                let ks: vec::Vec<usize> = (0..sa.grid.n_samples)
                    .filter(|&k| {
                        let t = sa.grid.time(k);
                        t >= j.time - 30.0 && t <= j.time + 30.0
                    })
                    .collect();
                for w in ks.windows(2) {
                    let d = sa.values[w[1]] - sa.values[w[0]];
                    assert!(d * j.delta >= 0.0, "ramp not monotone at seed {seed}");
                }
            }
        }
    }

    #[test]
    fn sample_at_is_exact_at_nodes_and_linear_between() {
        let cfg = cfg();
        let sig = gen_aprbs(&cfg, &grid(), 3).unwrap();
        for k in 0..sig.grid.n_samples {
            assert_eq!(sig.sample_at(sig.grid.time(k)).unwrap(), sig.values[k]);
        }
        let mut sig = sig;
        sig.values[0] = 280.0;
        sig.values[1] = 284.0;
        // Quarter of the way into the first interval.
        let v = sig.sample_at(0.25 * sig.grid.dt).unwrap();
        assert!((v - 281.0).abs() < 1e-12);
        // Midpoint of 300 and 310.
        sig.values[0] = 300.0;
        sig.values[1] = 310.0;
        assert!((sig.sample_at(2.5).unwrap() - 305.0).abs() < 1e-12);
        assert!(matches!(sig.sample_at(-1.0), Err(CoreError::OutOfRange { .. })));
        assert!(matches!(sig.sample_at(1e9), Err(CoreError::OutOfRange { .. })));
    }

    #[test]
    fn multisine_is_deterministic() {
        let cfg = MultisineConfig::default();
        let a = gen_multisine(&cfg, &grid(), 11).unwrap();
        let b = gen_multisine(&cfg, &grid(), 11).unwrap();
        assert_eq!(a.values, b.values);
    }
}
