//! Seeded randomness, the philosopher sweep harness, and an M/M/1 oracle
//! for validating the kernel against a closed form.

mod mm1;
mod rng;
mod sweep;

pub use mm1::{mm1_expected_wait, mm1_simulate, MM1Params};
pub use rng::Rng;
pub use sweep::{
    cell_seed, cells, mean_sd, pooled_standard_error, read_csv, simulate, summarize, sweep,
    sweep_sequential, write_csv, CellSummary, SweepResult,
};

#[cfg(feature = "parallel")]
pub use sweep::sweep_parallel;

/// Kolmogorov–Smirnov distance between the empirical distribution of
/// `samples` and the exponential CDF with the given mean.
pub fn ks_exponential(samples: &[f64], mean: f64) -> f64 {
    let mut xs = samples.to_vec();
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    xs.iter()
        .enumerate()
        .map(|(i, &x)| {
            let cdf = 1.0 - (-x / mean).exp();
            let above = (i as f64 + 1.0) / n - cdf;
            let below = cdf - i as f64 / n;
            above.max(below)
        })
        .fold(0.0, f64::max)
}

/// Asymptotic 1% critical value of the one-sample KS statistic.
pub fn ks_critical_1pct(n: usize) -> f64 {
    1.628 / (n as f64).sqrt()
}
