//! Wall-clock speed comparison between the reduced- and full-order models on
//! the same excitation.

use std::time::Instant;

use anyhow::{anyhow, ensure, Result};
use serde::{Deserialize, Serialize};
use twinforge_core::fom::simulate_fom;
use twinforge_core::signals::ExcitationSignal;
use twinforge_core::{FomConfig, RomModel};

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct SpeedReport {
    /// Median wall time of one ROM trajectory, seconds.
    pub rom_wall_time: f64,
    /// Wall time of one FOM simulation, seconds.
    pub fom_wall_time: f64,
    /// Sp = fom_wall_time / rom_wall_time.
    pub speedup: f64,
}

/// Times `reps` (at least 10) ROM integrations and one FOM simulation of the
/// same signal; the ROM figure is the median repetition.
pub fn bench(
    model: &RomModel,
    fom_cfg: &FomConfig,
    signal: &ExcitationSignal,
    reps: usize,
) -> Result<SpeedReport> {
    let reps = reps.max(10);
    let x0 = vec![fom_cfg.t_init; model.n];

    let mut rom_times = Vec::with_capacity(reps);
    for _ in 0..reps {
        let start = Instant::now();
        let traj = model.integrate(signal, &x0).map_err(|e| anyhow!("{e}"))?;
        let elapsed = start.elapsed().as_secs_f64();
        ensure!(traj.outputs[0].len() == signal.grid.n_samples, "short trajectory");
        rom_times.push(elapsed);
    }
    rom_times.sort_by(|a, b| a.partial_cmp(b).expect("finite times"));
    let rom_wall_time = rom_times[reps / 2].max(1e-12);

    let start = Instant::now();
    let ds = simulate_fom(signal, fom_cfg).map_err(|e| anyhow!("{e}"))?;
    let fom_wall_time = start.elapsed().as_secs_f64().max(1e-12);
    ensure!(ds.n_samples() == signal.grid.n_samples, "short simulation");

    Ok(SpeedReport {
        rom_wall_time,
        fom_wall_time,
        speedup: fom_wall_time / rom_wall_time,
    })
}
