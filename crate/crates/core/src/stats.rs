//! Compensated accumulators and the deterministic chunked parallel reduction
//! used by every sampling loop.
//!
//! Sample counts reach 1e7 at the cheap levels, where naive sum-of-squares
//! accumulation loses digits, so scalar sums are Neumaier-compensated and the
//! parallel reduction merges fixed-size chunk partials in chunk order. Totals
//! are therefore bit-identical regardless of how many worker threads ran.

use rayon::prelude::*;

use crate::error::{Result, SimError};

/// Neumaier-compensated scalar sum.
#[derive(Debug, Clone, Copy, Default)]
pub struct CompensatedSum {
    s: f64,
    c: f64,
}

impl CompensatedSum {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, x: f64) {
        let t = self.s + x;
        if self.s.abs() >= x.abs() {
            self.c += (self.s - t) + x;
        } else {
            self.c += (x - t) + self.s;
        }
        self.s = t;
    }

    /// Append another accumulator. Order-sensitive by design: callers merge
    /// partials in a fixed order.
    pub fn merge(&mut self, other: &CompensatedSum) {
        self.add(other.s);
        self.add(other.c);
    }

    pub fn value(&self) -> f64 {
        self.s + self.c
    }
}

/// Streaming first and second moments over scalar samples, kept as
/// compensated Σy and Σy².
#[derive(Debug, Clone, Copy, Default)]
pub struct RunningStats {
    n: u64,
    sum: CompensatedSum,
    sum_sq: CompensatedSum,
}

impl RunningStats {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, y: f64) {
        self.n += 1;
        self.sum.add(y);
        self.sum_sq.add(y * y);
    }

    pub fn merge(&mut self, other: &RunningStats) {
        self.n += other.n;
        self.sum.merge(&other.sum);
        self.sum_sq.merge(&other.sum_sq);
    }

    pub fn count(&self) -> u64 {
        self.n
    }

    pub fn sum(&self) -> f64 {
        self.sum.value()
    }

    pub fn mean(&self) -> f64 {
        if self.n == 0 {
            return 0.0;
        }
        self.sum.value() / self.n as f64
    }

    /// Unbiased sample variance, clamped at zero against cancellation noise.
    pub fn sample_variance(&self) -> f64 {
        if self.n < 2 {
            return 0.0;
        }
        let n = self.n as f64;
        let raw = (self.sum_sq.value() - self.sum.value() * self.sum.value() / n) / (n - 1.0);
        raw.max(0.0)
    }

    /// Standard error of the mean.
    pub fn std_error(&self) -> f64 {
        if self.n == 0 {
            return f64::INFINITY;
        }
        (self.sample_variance() / self.n as f64).sqrt()
    }
}

/// Fixed chunk width of the deterministic parallel reduction.
pub const REDUCTION_CHUNK: u64 = 4096;

/// Run `run_chunk` over `[start, end)` split into `REDUCTION_CHUNK`-sized
/// pieces, in parallel, then merge the partials sequentially in chunk order.
///
/// On failure the error from the lowest-indexed failing chunk is returned, so
/// the reported sample index does not depend on scheduling either.
pub fn par_chunked_reduce<A, F, M>(
    start: u64,
    end: u64,
    run_chunk: F,
    mut merge: M,
) -> Result<Option<A>>
where
    A: Send,
    F: Fn(std::ops::Range<u64>) -> Result<A> + Sync,
    M: FnMut(&mut A, A),
{
    if start >= end {
        return Ok(None);
    }
    let n_chunks = (end - start).div_ceil(REDUCTION_CHUNK);
    let partials: Vec<Result<A>> = (0..n_chunks)
        .into_par_iter()
        .map(|c| {
            let lo = start + c * REDUCTION_CHUNK;
            let hi = (lo + REDUCTION_CHUNK).min(end);
            run_chunk(lo..hi)
        })
        .collect();

    let mut acc: Option<A> = None;
    for partial in partials {
        let value = partial?;
        match &mut acc {
            None => acc = Some(value),
            Some(a) => merge(a, value),
        }
    }
    Ok(acc)
}

/// Convenience wrapper: accumulate one `RunningStats` over per-sample values.
pub fn par_sample_stats<F>(start: u64, end: u64, sample: F) -> Result<RunningStats>
where
    F: Fn(u64) -> Result<f64> + Sync,
{
    let out = par_chunked_reduce(
        start,
        end,
        |range| {
            let mut stats = RunningStats::new();
            for i in range {
                stats.add(sample(i)?);
            }
            Ok(stats)
        },
        |a, b| a.merge(&b),
    )?;
    Ok(out.unwrap_or_default())
}

#[allow(dead_code)]
fn _assert_sim_error_send_sync(e: SimError) -> impl Send + Sync {
    e
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn compensated_sum_survives_cancellation() {
        let mut s = CompensatedSum::new();
        s.add(1e16);
        for _ in 0..10 {
            s.add(0.1);
        }
        s.add(-1e16);
        assert!((s.value() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn running_stats_matches_naive_formulas() {
        let xs: Vec<f64> = (0..100).map(|i| i as f64).collect();
        let mut st = RunningStats::new();
        for &x in &xs {
            st.add(x);
        }
        assert_eq!(st.mean(), 49.5);
        assert!((st.sample_variance() - 841.6666666666666).abs() < 1e-9);
    }

    #[test]
    fn merge_in_order_equals_sequential() {
        let mut whole = RunningStats::new();
        let mut left = RunningStats::new();
        let mut right = RunningStats::new();
        for i in 0..1000 {
            let y = (i as f64).sin() * 1e8 + 1.0;
            whole.add(y);
            if i < 400 {
                left.add(y);
            } else {
                right.add(y);
            }
        }
        left.merge(&right);
        assert_eq!(left.sum(), whole.sum());
        assert_eq!(left.count(), whole.count());
    }

    #[test]
    fn chunked_reduce_is_thread_count_invariant() {
        let run = |threads: usize| {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap();
            pool.install(|| {
                par_sample_stats(0, 20_000, |i| Ok(((i as f64) * 1e-3).sin() * 1e7)).unwrap()
            })
        };
        let one = run(1);
        let four = run(4);
        assert_eq!(one.sum(), four.sum());
        assert_eq!(one.sample_variance(), four.sample_variance());
    }

    #[test]
    fn chunked_reduce_reports_lowest_failing_sample() {
        let res = par_chunked_reduce(
            0,
            50_000,
            |range| {
                for i in range {
                    if i % 9000 == 8999 {
                        return Err(SimError::InvalidArgument(format!("fail at {i}")));
                    }
                }
                Ok(())
            },
            |_, _| {},
        );
        match res {
            Err(SimError::InvalidArgument(msg)) => assert_eq!(msg, "fail at 8999"),
            other => panic!("unexpected: {other:?}"),
        }
    }
}
