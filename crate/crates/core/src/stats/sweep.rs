use std::io;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::kernel::{Environment, SimTime};
use crate::scenarios::{build_party, PartyConfig, Trace, Variant};

/// One simulated party.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub variant: Variant,
    pub n: usize,
    pub t: SimTime,
    /// Replicate seed; the environment seed is derived with [`cell_seed`].
    pub seed: u64,
    pub mean_waiting: f64,
    pub deadlocked: bool,
    #[serde(skip)]
    pub per_philosopher: Vec<f64>,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Environment seed of the sweep cell `(seed, variant, n)`.
///
/// `splitmix64(seed ^ splitmix64(variant_tag ^ splitmix64(n)))`, so every
/// cell owns an independent stream no matter which other cells run.
pub fn cell_seed(seed: u64, variant: Variant, n: usize) -> u64 {
    splitmix64(seed ^ splitmix64(variant.tag() ^ splitmix64(n as u64)))
}

/// Simulate `n` philosophers of the given variant for up to `t` time units.
pub fn simulate(n: usize, t: SimTime, variant: Variant, seed: u64) -> Result<SweepResult> {
    if n < 2 {
        return Err(invalid(format!("need at least 2 philosophers, got {n}")));
    }
    if !(t.is_finite() && t > 0.0) {
        return Err(invalid(format!("horizon {t} must be positive")));
    }
    let env = Environment::new(cell_seed(seed, variant, n));
    let party = build_party(&env, &PartyConfig::new(n, variant), &Trace::disabled())?;
    let outcome = env.run(Some(t))?;
    let per_philosopher = party.waiting();
    Ok(SweepResult {
        variant,
        n,
        t,
        seed,
        mean_waiting: per_philosopher.iter().sum::<f64>() / n as f64,
        deadlocked: outcome.is_exhausted() && party.is_deadlocked(),
        per_philosopher,
    })
}

/// Grid of sweep cells in `(variant, n, seed)` order.
pub fn cells(variants: &[Variant], ns: &[usize], seeds: &[u64]) -> Vec<(Variant, usize, u64)> {
    let mut out = Vec::with_capacity(variants.len() * ns.len() * seeds.len());
    for &v in variants {
        for &n in ns {
            for &s in seeds {
                out.push((v, n, s));
            }
        }
    }
    out
}

fn check_grid(variants: &[Variant], ns: &[usize], seeds: &[u64]) -> Result<()> {
    if variants.is_empty() || ns.is_empty() || seeds.is_empty() {
        return Err(invalid("sweep ranges must be nonempty"));
    }
    Ok(())
}

/// Run every cell on the calling thread.
pub fn sweep_sequential(
    variants: &[Variant],
    ns: &[usize],
    t: SimTime,
    seeds: &[u64],
) -> Result<Vec<SweepResult>> {
    check_grid(variants, ns, seeds)?;
    cells(variants, ns, seeds)
        .into_iter()
        .map(|(v, n, s)| simulate(n, t, v, s))
        .collect()
}

/// Run cells across the rayon pool; results keep `(variant, n, seed)` order.
#[cfg(feature = "parallel")]
pub fn sweep_parallel(
    variants: &[Variant],
    ns: &[usize],
    t: SimTime,
    seeds: &[u64],
) -> Result<Vec<SweepResult>> {
    use rayon::prelude::*;

    check_grid(variants, ns, seeds)?;
    cells(variants, ns, seeds)
        .into_par_iter()
        .map(|(v, n, s)| simulate(n, t, v, s))
        .collect()
}

/// Full cross product of variants, party sizes and seeds.
pub fn sweep(
    variants: &[Variant],
    ns: &[usize],
    t: SimTime,
    seeds: &[u64],
) -> Result<Vec<SweepResult>> {
    #[cfg(feature = "parallel")]
    {
        sweep_parallel(variants, ns, t, seeds)
    }
    #[cfg(not(feature = "parallel"))]
    {
        sweep_sequential(variants, ns, t, seeds)
    }
}

/// Mean and sample standard deviation of one `(variant, n)` cell.
#[derive(Debug, Clone, PartialEq)]
pub struct CellSummary {
    pub variant: Variant,
    pub n: usize,
    pub count: usize,
    pub mean: f64,
    pub sd: f64,
    pub deadlocks: usize,
}

impl CellSummary {
    pub fn standard_error(&self) -> f64 {
        self.sd / (self.count as f64).sqrt()
    }
}

pub fn mean_sd(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Standard error of the difference of two cell means.
pub fn pooled_standard_error(a: &CellSummary, b: &CellSummary) -> f64 {
    (a.sd.powi(2) / a.count as f64 + b.sd.powi(2) / b.count as f64).sqrt()
}

/// Group results by `(variant, n)`, preserving first-seen order.
pub fn summarize(results: &[SweepResult]) -> Vec<CellSummary> {
    let mut keys: Vec<(Variant, usize)> = Vec::new();
    for r in results {
        if !keys.contains(&(r.variant, r.n)) {
            keys.push((r.variant, r.n));
        }
    }
    keys.into_iter()
        .map(|(variant, n)| {
            let cell: Vec<&SweepResult> = results
                .iter()
                .filter(|r| r.variant == variant && r.n == n)
                .collect();
            let xs: Vec<f64> = cell.iter().map(|r| r.mean_waiting).collect();
            let (mean, sd) = mean_sd(&xs);
            CellSummary {
                variant,
                n,
                count: xs.len(),
                mean,
                sd,
                deadlocks: cell.iter().filter(|r| r.deadlocked).count(),
            }
        })
        .collect()
}

/// Write `variant,n,t,seed,mean_waiting,deadlocked` rows with LF endings.
pub fn write_csv<W: io::Write>(results: &[SweepResult], out: W) -> Result<(), csv::Error> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(out);
    for r in results {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_csv<R: io::Read>(input: R) -> Result<Vec<SweepResult>, csv::Error> {
    csv::Reader::from_reader(input).deserialize().collect()
}
