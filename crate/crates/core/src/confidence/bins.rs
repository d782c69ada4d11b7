use serde::{Deserialize, Serialize};

/// `count` equal-width bins on `[lo, hi]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bins {
    pub count: usize,
    pub lo: f64,
    pub hi: f64,
}

impl Bins {
    pub fn new(count: usize, lo: f64, hi: f64) -> Self {
        assert!(count > 0 && hi > lo, "bins need a positive count and width");
        Self { count, lo, hi }
    }

    pub fn width(&self) -> f64 {
        (self.hi - self.lo) / self.count as f64
    }

    pub fn center(&self, k: usize) -> f64 {
        self.lo + (k as f64 + 0.5) * self.width()
    }

    /// Bin of `v`, values outside the range clamped to the end bins.
    pub fn index(&self, v: f64) -> usize {
        let k = ((v - self.lo) / self.width()).floor();
        if k.is_nan() || k < 0.0 {
            0
        } else {
            (k as usize).min(self.count - 1)
        }
    }
}

fn softmax(logits: &[f64]) -> Vec<f64> {
    let m = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = logits.iter().map(|l| (l - m).exp()).collect();
    let z: f64 = e.iter().sum();
    e.into_iter().map(|v| v / z).collect()
}

/// Probability-weighted mean of the bin centres.
pub fn expected_value(logits: &[f64], bins: &Bins) -> f64 {
    softmax(logits)
        .iter()
        .enumerate()
        .map(|(k, p)| p * bins.center(k))
        .sum()
}

/// `−log softmax(logits)[target]` and its gradient.
pub fn cross_entropy_with_grad(logits: &[f64], target: usize) -> (f64, Vec<f64>) {
    let m = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lse = m + logits.iter().map(|l| (l - m).exp()).sum::<f64>().ln();
    let mut g = softmax(logits);
    g[target] -= 1.0;
    (lse - logits[target], g)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn indices_and_centres() {
        let b = Bins::new(50, 0.0, 1.0);
        assert_eq!(b.index(0.0), 0);
        assert_eq!(b.index(0.999), 49);
        assert_eq!(b.index(1.0), 49);
        assert_eq!(b.index(-3.0), 0);
        assert!((b.center(0) - 0.01).abs() < 1e-12);
        let p = Bins::new(64, 0.0, 32.0);
        assert_eq!(p.index(5.1), 10);
    }

    #[test]
    fn uniform_logits_cost_log_bins() {
        let (l, g) = cross_entropy_with_grad(&[0.0; 64], 7);
        assert!((l - 64f64.ln()).abs() < 1e-12);
        assert!((g.iter().sum::<f64>()).abs() < 1e-12);
    }

    #[test]
    fn confident_correct_logits_cost_nothing() {
        let mut prev = f64::INFINITY;
        for margin in [1.0, 5.0, 20.0, 60.0] {
            let mut l = vec![0.0; 10];
            l[3] = margin;
            let (v, _) = cross_entropy_with_grad(&l, 3);
            assert!(v < prev);
            prev = v;
        }
        assert!(prev < 1e-20);
    }

    proptest! {
        #[test]
        fn decoded_values_stay_in_range(logits in proptest::collection::vec(-50.0f64..50.0, 64)) {
            let b = Bins::new(64, 0.0, 32.0);
            let v = expected_value(&logits, &b);
            prop_assert!((0.0..=32.0).contains(&v));
            let b = Bins::new(50, 0.0, 1.0);
            let v = expected_value(&logits[..50], &b);
            prop_assert!((0.0..=1.0).contains(&v));
        }
    }
}
