use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};

use crate::error::{Error, Result};

pub const DEFAULT_RESAMPLES: usize = 10_000;

/// Resampled differences with absolute value at or below this count as zero.
pub const ZERO_TOLERANCE: f64 = 1e-9;

fn binomial(n: u64, p: f64, rng: &mut impl Rng) -> u64 {
    if n == 0 || p <= 0.0 {
        return 0;
    }
    if p >= 1.0 {
        return n;
    }
    Binomial::new(n, p)
        .expect("probability in (0, 1)")
        .sample(rng)
}

/// Per-instance differences grouped by magnitude. Drawing counts per
/// magnitude and then splitting each count by sign is distributed exactly as
/// resampling instances with replacement, and mirrors draw for draw when the
/// two systems are swapped.
struct Magnitudes {
    /// (magnitude, instances with +m, instances with -m), ascending magnitude.
    rows: Vec<(f64, u64, u64)>,
    /// Sign given to the first count of a balanced split.
    orientation: bool,
}

impl Magnitudes {
    fn new(diffs: &[f64]) -> Self {
        let mut by: BTreeMap<u64, (f64, u64, u64)> = BTreeMap::new();
        for &d in diffs {
            let m = d.abs();
            let row = by.entry(m.to_bits()).or_insert((m, 0, 0));
            if d > 0.0 {
                row.1 += 1;
            } else {
                row.2 += 1;
            }
        }
        let rows: Vec<(f64, u64, u64)> = by.into_values().collect();
        let orientation = rows
            .iter()
            .find(|(m, pos, neg)| *m > 0.0 && pos != neg)
            .map(|(_, pos, neg)| pos > neg)
            .unwrap_or(true);
        Self { rows, orientation }
    }

    fn resample_sum(&self, n: u64, rng: &mut impl Rng) -> f64 {
        let mut remaining_n = n;
        let mut remaining_f = n;
        let mut sum = 0.0;
        for &(m, pos, neg) in &self.rows {
            let f = pos + neg;
            let count = if f == remaining_f {
                remaining_n
            } else {
                binomial(remaining_n, f as f64 / remaining_f as f64, rng)
            };
            remaining_n -= count;
            remaining_f -= f;
            if m == 0.0 || count == 0 {
                continue;
            }
            let minority_positive = if pos == neg {
                !self.orientation
            } else {
                pos < neg
            };
            let minority = binomial(count, pos.min(neg) as f64 / f as f64, rng);
            let positives = if minority_positive {
                minority
            } else {
                count - minority
            };
            sum += m * (positives as f64 - (count - positives) as f64);
        }
        sum
    }
}

/// Two-tailed paired bootstrap p-value for mean(a) - mean(b) over `resamples`
/// resamples of the instance indices. Differences of exactly zero count
/// toward both tails.
pub fn paired_bootstrap(a: &[f64], b: &[f64], resamples: usize, seed: u64) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::Validation(format!(
            "paired bootstrap needs equal lengths, got {} and {}",
            a.len(),
            b.len()
        )));
    }
    if a.is_empty() || resamples == 0 {
        return Err(Error::Validation(
            "paired bootstrap needs instances and at least one resample".into(),
        ));
    }
    let diffs: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let mags = Magnitudes::new(&diffs);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = diffs.len() as u64;
    let (mut le, mut ge) = (0usize, 0usize);
    for _ in 0..resamples {
        let s = mags.resample_sum(n, &mut rng);
        if s.abs() <= ZERO_TOLERANCE {
            le += 1;
            ge += 1;
        } else if s < 0.0 {
            le += 1;
        } else {
            ge += 1;
        }
    }
    let p = 2.0 * (le.min(ge) as f64 / resamples as f64);
    Ok(p.clamp(0.0, 1.0))
}
