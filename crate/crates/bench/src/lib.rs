//! Fixtures shared by the benchmarks.

use miscorr_core::simkit::{LevelsMode, ScenarioConfig, Simulation};
use miscorr_core::{Distortion, ObservedDataset};

/// A simulated dataset of `n` rows with `covariates` covariates of `levels`
/// levels under the given distortion, plus the simulation that produced it.
pub fn fixture(distortion: Distortion, covariates: usize, levels: usize, n: usize) -> (Simulation, ObservedDataset) {
    let mut config = ScenarioConfig::study(distortion, covariates, LevelsMode::Fixed(levels));
    config.n_max = n;
    config.n_grid = vec![n];
    config.sigmas = vec![0.5];
    config.master_seed = 2024;
    let sim = Simulation::new(config).expect("fixture scenario is valid");
    let draw = sim.draw(0).expect("fixture draw");
    let y = sim.response(&draw, 0, 0).expect("fixture response");
    let ds = ObservedDataset::new(y, draw.w)
        .and_then(|d| d.with_truth(draw.x))
        .expect("fixture dataset");
    (sim, ds)
}
