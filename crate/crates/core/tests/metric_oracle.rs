use gridsentry::eval::f1_from;
use gridsentry::{confusion, metrics, Rng};

/// Counts every cell independently and applies the textbook formulas.
fn oracle(pred: &[u8], truth: &[u8]) -> (u64, u64, u64, u64, f64, f64, f64, f64) {
    let count = |p: u8, t: u8| pred.iter().zip(truth).filter(|&(&a, &b)| a == p && b == t).count() as u64;
    let (tp, tn, fp, fn_) = (count(1, 1), count(0, 0), count(1, 0), count(0, 1));
    let frac = |n: u64, d: u64| if d == 0 { 0.0 } else { n as f64 / d as f64 };
    let acc = frac(tp + tn, tp + tn + fp + fn_);
    let prec = frac(tp, tp + fp);
    let rec = frac(tp, tp + fn_);
    let f1 = if prec + rec == 0.0 { 0.0 } else { 2.0 * prec * rec / (prec + rec) };
    (tp, tn, fp, fn_, 100.0 * acc, 100.0 * prec, 100.0 * rec, 100.0 * f1)
}

#[test]
fn matches_naive_counting_on_a_thousand_vectors() {
    let mut rng = Rng::new(2024);
    for case in 0..1000 {
        let n = 1 + rng.below(500);
        // Vary the class balance so empty-denominator cases show up too.
        let bias = rng.uniform();
        let truth: Vec<u8> = (0..n).map(|_| u8::from(rng.uniform() < bias)).collect();
        let pred: Vec<u8> = (0..n).map(|_| u8::from(rng.uniform() < bias)).collect();
        let cm = confusion(&pred, &truth).unwrap();
        let m = metrics(&cm).unwrap();
        let (tp, tn, fp, fn_, acc, prec, rec, f1) = oracle(&pred, &truth);
        assert_eq!((cm.true_pos, cm.true_neg, cm.false_pos, cm.false_neg), (tp, tn, fp, fn_), "case {case}");
        assert_eq!(m.accuracy, acc, "case {case}");
        assert_eq!(m.precision, prec, "case {case}");
        assert_eq!(m.recall, rec, "case {case}");
        assert_eq!(m.f1, f1, "case {case}");
    }
}

#[test]
fn iec104_row_is_internally_consistent() {
    let f1 = f1_from(99.84, 99.72);
    assert!((f1 - 99.78).abs() <= 0.01, "F1 {f1}");
}
