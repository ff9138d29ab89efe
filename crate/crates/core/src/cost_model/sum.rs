//! Correctly rounded floating-point summation (Shewchuk partials).
//!
//! Every cost total in the crate goes through this accumulator so that two
//! assignments with the same real-valued cost produce the same `f64`, and a
//! strictly cheaper assignment never reports a larger total.

#[derive(Debug, Clone, Default)]
pub struct ExactSum {
    partials: Vec<f64>,
}

impl ExactSum {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn clear(&mut self) {
        self.partials.clear();
    }

    pub fn add(&mut self, mut x: f64) {
        let mut i = 0;
        for j in 0..self.partials.len() {
            let mut y = self.partials[j];
            if x.abs() < y.abs() {
                std::mem::swap(&mut x, &mut y);
            }
            let hi = x + y;
            let lo = y - (hi - x);
            if lo != 0.0 {
                self.partials[i] = lo;
                i += 1;
            }
            x = hi;
        }
        self.partials.truncate(i);
        self.partials.push(x);
    }

    pub fn value(&self) -> f64 {
        let p = &self.partials;
        let mut n = p.len();
        if n == 0 {
            return 0.0;
        }
        n -= 1;
        let mut hi = p[n];
        let mut lo = 0.0;
        while n > 0 {
            let x = hi;
            n -= 1;
            let y = p[n];
            hi = x + y;
            let yr = hi - x;
            lo = y - yr;
            if lo != 0.0 {
                break;
            }
        }
        // Round half to even across the remaining partials.
        if n > 0 && ((lo < 0.0 && p[n - 1] < 0.0) || (lo > 0.0 && p[n - 1] > 0.0)) {
            let y = lo * 2.0;
            let x = hi + y;
            let yr = x - hi;
            if y == yr {
                hi = x;
            }
        }
        hi
    }
}

impl Extend<f64> for ExactSum {
    fn extend<I: IntoIterator<Item = f64>>(&mut self, iter: I) {
        for x in iter {
            self.add(x);
        }
    }
}

pub fn exact_sum(values: impl IntoIterator<Item = f64>) -> f64 {
    let mut acc = ExactSum::new();
    acc.extend(values);
    acc.value()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn cancellation_is_exact() {
        assert_eq!(exact_sum([1e100, 1.0, -1e100]), 1.0);
        assert_eq!(exact_sum([0.1; 10]), 1.0);
        assert_eq!(exact_sum([]), 0.0);
    }

    proptest! {
        #[test]
        fn order_independent(mut xs in prop::collection::vec(0.0f64..1e4, 0..40), seed in any::<u64>()) {
            let forward = exact_sum(xs.iter().copied());
            // deterministic shuffle
            let mut s = seed;
            for i in (1..xs.len()).rev() {
                s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                xs.swap(i, (s >> 33) as usize % (i + 1));
            }
            prop_assert_eq!(forward, exact_sum(xs.iter().copied()));
        }

        #[test]
        fn close_to_naive(xs in prop::collection::vec(0.0f64..1e4, 1..40)) {
            let naive: f64 = xs.iter().sum();
            let exact = exact_sum(xs.iter().copied());
            prop_assert!((naive - exact).abs() <= 1e-12 * naive.max(1.0));
        }
    }
}
