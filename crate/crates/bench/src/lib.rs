//! Shared inputs for the criterion benches.

use rand::Rng;
use rand_distr::StandardNormal;
use tenmon_core::rng::rng_from_seed;
use tenmon_core::simulate::{
    generate_ten, AdjacencySource, ChangeScope, ChangedParameter, GeneratedTen, ScenarioSpec,
};

/// The default ER scenario with a `beta + 0.3` change and cheap calibration.
pub fn scenario(seed: u64) -> ScenarioSpec {
    let mut spec = ScenarioSpec::new(
        AdjacencySource::ErdosRenyi,
        ChangedParameter::Beta,
        0.3,
        ChangeScope::AllFlows,
        1,
        seed,
    );
    spec.chart.mc_reps = 1000;
    spec
}

pub fn simulated(seed: u64) -> GeneratedTen {
    generate_ten(&scenario(seed), seed).expect("default scenario is valid")
}

pub fn normal_stream(len: usize, seed: u64) -> Vec<f64> {
    let mut rng = rng_from_seed(seed);
    (0..len).map(|_| rng.sample(StandardNormal)).collect()
}
