//! Inputs shared by the benchmarks in `benches/`.

use catdet_core::ingest::{generate_synthetic, SyntheticOutput, SyntheticScenario};
use catdet_core::ClassMap;

const BENCHMARK_SCENARIO: &str = include_str!("../../../fixtures/benchmark/scenario.toml");

/// The 200-frame benchmark sequence, generated from its checked-in scenario.
pub fn benchmark_sequence() -> SyntheticOutput {
    let scenario = SyntheticScenario::parse(BENCHMARK_SCENARIO).expect("benchmark scenario parses");
    generate_synthetic(&scenario, &ClassMap::kitti()).expect("benchmark scenario generates")
}

#[cfg(test)]
mod tests {
    #[test]
    fn benchmark_sequence_is_populated() {
        let seq = super::benchmark_sequence();
        assert_eq!(seq.meta.frame_count, 200);
        assert!(!seq.proposal.is_empty() && !seq.refinement.is_empty());
    }
}
