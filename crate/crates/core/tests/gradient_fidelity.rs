use std::time::Instant;

use gridsentry::gradcheck::{run_all, CheckKind, DEFAULT_TOLERANCE};

#[test]
fn every_kind_passes_fifty_seeds_within_a_minute() {
    let started = Instant::now();
    let summaries = run_all(50, 1000, DEFAULT_TOLERANCE).unwrap();
    let elapsed = started.elapsed().as_secs_f64();
    assert_eq!(summaries.len(), CheckKind::ALL.len());
    for s in &summaries {
        assert_eq!(s.cases, 50);
        assert!(
            s.passed && s.max_rel_error <= 1e-4,
            "{}: error {:e} at seed {}",
            s.name,
            s.max_rel_error,
            s.worst_seed
        );
    }
    assert!(summaries.iter().any(|s| s.kind == CheckKind::ModelF8));
    assert!(elapsed < 60.0, "gradient checks took {elapsed:.1}s");
}
