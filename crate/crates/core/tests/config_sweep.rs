//! `max_age_n` sweep over the synthetic fault suite.

use std::sync::Arc;

use crosstrack::affinity::{SimilarityProvider, ZeroProvider};
use crosstrack::sim::FaultSpec;
use crosstrack::suite::{evaluate_mode, fault_suite, Sequence};
use crosstrack::tracker::PipelineMode;
use crosstrack::types::default_config;

#[test]
fn default_max_age_maximizes_mota() {
    let scenes = fault_suite(10, 5, 100, &FaultSpec::fault_suite(500)).unwrap();
    let zero: Arc<dyn SimilarityProvider> = Arc::new(ZeroProvider);
    let seqs: Vec<Sequence> = scenes
        .iter()
        .enumerate()
        .map(|(k, s)| Sequence::from_scenario(format!("{k:04}"), s, zero.clone(), zero.clone()))
        .collect();
    let mut scores = Vec::new();
    for n in 1..=6u32 {
        let cfg = crosstrack::types::TrackerConfig {
            max_age_n: n,
            ..default_config()
        };
        let r = evaluate_mode(&seqs, &cfg, PipelineMode::full(), 0.5)
            .unwrap()
            .report;
        println!(
            "max_age_n={n} MOTA={:.4} FP={} FN={} IDSW={}",
            r.mota, r.fp, r.fn_, r.idsw
        );
        scores.push((n, r.mota));
    }
    let best = scores.iter().map(|s| s.1).fold(f64::MIN, f64::max);
    let at_default = scores
        .iter()
        .find(|s| s.0 == default_config().max_age_n)
        .unwrap()
        .1;
    assert_eq!(at_default, best, "{scores:?}");
}
