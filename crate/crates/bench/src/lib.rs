//! Shared fixtures for the benchmarks.

use aec_core::engine::{EchoCanceller, MaskSource, RunConfig};
use aec_core::scenario::{Scenario, ScenarioConfig};

/// One second of a double-talk scenario with the default block geometry.
pub fn fixture() -> Scenario {
    Scenario::generate(&ScenarioConfig {
        duration: 1.0,
        seed: 11,
        ..Default::default()
    })
    .expect("valid scenario")
}

/// A canceller with a warmed-up filter, so timing reflects steady operation.
pub fn warmed_canceller(config: RunConfig, scenario: &Scenario) -> EchoCanceller {
    let mut aec = EchoCanceller::new(RunConfig {
        mask: MaskSource::Unity,
        ..config
    })
    .expect("valid config");
    let r = aec.spec().shift();
    for (far, mic) in scenario
        .far_end
        .chunks_exact(r)
        .zip(scenario.mic.chunks_exact(r))
        .take(32)
    {
        aec.process_block(far, mic, None).expect("finite input");
    }
    aec
}
