use gridsentry::{crossval, generate_synthetic, ArchitectureConfig, MetricSet, SynthConfig, TrainConfig};

#[test]
fn five_folds_cover_every_row_once_and_means_are_fold_averages() {
    let table = generate_synthetic(&SynthConfig {
        n_normal: 30,
        n_attack: 120,
        features: 16,
        separation: 2.0,
        seed: 5,
    })
    .unwrap();
    let arch = ArchitectureConfig::new(16)
        .with_conv(4, 2)
        .with_lstm_units(vec![6, 6])
        .with_dense_units(8);
    let cfg = TrainConfig {
        max_epochs: 3,
        ..TrainConfig::default()
    };
    let cv = crossval::<f64>(&table, &arch, &cfg, 5, 11).unwrap();
    assert_eq!(cv.k, 5);
    assert_eq!(cv.folds.len(), 5);

    let mut seen = vec![0usize; table.len()];
    for f in &cv.folds {
        for &i in &f.held_out {
            seen[i] += 1;
        }
        assert_eq!(f.confusion.total() as usize, f.held_out.len());
    }
    assert!(seen.iter().all(|&c| c == 1), "{seen:?}");

    let n = cv.folds.len() as f64;
    let avg = |g: fn(&MetricSet) -> f64| cv.folds.iter().map(|f| g(&f.metrics)).sum::<f64>() / n;
    assert_eq!(cv.means.accuracy, avg(|m| m.accuracy));
    assert_eq!(cv.means.precision, avg(|m| m.precision));
    assert_eq!(cv.means.recall, avg(|m| m.recall));
    assert_eq!(cv.means.f1, avg(|m| m.f1));
    assert_eq!(cv.means.loss, Some(avg(|m| m.loss.unwrap())));
}
