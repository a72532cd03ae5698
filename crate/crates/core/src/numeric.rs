//! Compensated summation and deterministic parallel reductions.
//!
//! Every reduction over atoms or sample points goes through [`NeumaierSum`].
//! Parallel reductions split the index range into fixed-size chunks, sum each
//! chunk independently and merge the partial sums in chunk order, so the
//! result does not depend on the number of worker threads.

use rayon::prelude::*;

/// Chunk length used by [`par_sum`].
pub const CHUNK_LEN: usize = 4096;

/// Neumaier's variant of Kahan summation.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct NeumaierSum {
    sum: f64,
    compensation: f64,
}

impl NeumaierSum {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.compensation += (self.sum - t) + x;
        } else {
            self.compensation += (x - t) + self.sum;
        }
        self.sum = t;
    }

    /// Folds another partial sum into this one.
    pub fn merge(&mut self, other: &NeumaierSum) {
        self.add(other.sum);
        self.add(other.compensation);
    }

    pub fn value(&self) -> f64 {
        self.sum + self.compensation
    }
}

impl Extend<f64> for NeumaierSum {
    fn extend<I: IntoIterator<Item = f64>>(&mut self, iter: I) {
        for x in iter {
            self.add(x);
        }
    }
}

impl FromIterator<f64> for NeumaierSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut s = NeumaierSum::new();
        s.extend(iter);
        s
    }
}

/// Compensated sum of an iterator.
pub fn sum<I: IntoIterator<Item = f64>>(iter: I) -> f64 {
    iter.into_iter().collect::<NeumaierSum>().value()
}

/// Deterministic parallel compensated sum of `f(i)` for `i in 0..n`.
pub fn par_sum<F>(n: usize, f: F) -> f64
where
    F: Fn(usize) -> f64 + Sync,
{
    let n_chunks = n.div_ceil(CHUNK_LEN);
    let partials: Vec<NeumaierSum> = (0..n_chunks)
        .into_par_iter()
        .map(|c| {
            let lo = c * CHUNK_LEN;
            let hi = (lo + CHUNK_LEN).min(n);
            (lo..hi).map(&f).collect()
        })
        .collect();
    let mut total = NeumaierSum::new();
    for p in &partials {
        total.merge(p);
    }
    total.value()
}

/// Deterministic parallel mean of `f(i)` for `i in 0..n`. Returns NaN for `n == 0`.
pub fn par_mean<F>(n: usize, f: F) -> f64
where
    F: Fn(usize) -> f64 + Sync,
{
    if n == 0 {
        return f64::NAN;
    }
    par_sum(n, f) / n as f64
}

/// Sample mean and standard error of the mean.
pub fn mean_and_std_err(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = sum(values.iter().copied()) / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let ss = sum(values.iter().map(|v| (v - mean) * (v - mean)));
    let var = ss / (n - 1) as f64;
    (mean, (var / n as f64).sqrt())
}

/// `true` when `a` and `b` agree to `rel` relative tolerance, with `rel` also
/// used as an absolute floor near zero.
pub fn approx_eq(a: f64, b: f64, rel: f64) -> bool {
    (a - b).abs() <= rel * a.abs().max(b.abs()).max(1.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn compensated_sum_recovers_small_terms() {
        let mut values = vec![1.0e16, 1.0, -1.0e16];
        values.extend(std::iter::repeat_n(2f64.powi(-10), 1024));
        assert_eq!(sum(values.iter().copied()), 2.0);
        let naive: f64 = values.iter().sum();
        assert_ne!(naive, 2.0);
    }

    #[test]
    fn par_sum_matches_sequential_order() {
        let n = 3 * CHUNK_LEN + 17;
        let f = |i: usize| ((i as f64) * 0.37).sin();
        let seq = sum((0..n).map(f));
        let par = par_sum(n, f);
        assert!((seq - par).abs() < 1e-12);
        // bit-stable across thread pools
        let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let single = pool.install(|| par_sum(n, f));
        assert_eq!(single.to_bits(), par.to_bits());
    }

    #[test]
    fn std_err_of_constant_is_zero() {
        let (m, se) = mean_and_std_err(&[2.5; 10]);
        assert_eq!(m, 2.5);
        assert_eq!(se, 0.0);
    }
}
