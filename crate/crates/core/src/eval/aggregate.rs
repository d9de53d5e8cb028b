use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::bootstrap::paired_bootstrap;
use super::categorize::{Categorization, Category};
use super::score::RunResult;
use crate::error::{Error, Result};

pub const STD_NOTE: &str = "std is the population standard deviation over seeds";
pub const POOLING_NOTE: &str =
    "significance pools seeds by averaging per-instance correctness before resampling";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetStats {
    pub mean: f64,
    pub std: f64,
    /// Accuracy per seed.
    pub seeds: BTreeMap<u64, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemReport {
    pub system: String,
    pub datasets: BTreeMap<String, DatasetStats>,
    /// Unweighted mean of member-dataset means per category.
    pub groups: BTreeMap<Category, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Significance {
    pub a: String,
    pub b: String,
    /// `dataset:<name>` or `group:<category>`.
    pub surface: String,
    /// Mean per-instance difference a - b on this surface.
    pub difference: f64,
    pub p_value: f64,
    pub resamples: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub notes: Vec<String>,
    pub categories: Categorization,
    pub systems: Vec<SystemReport>,
    #[serde(default)]
    pub significance: Vec<Significance>,
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

fn population_std(xs: &[f64]) -> f64 {
    let m = mean(xs);
    (xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / xs.len() as f64).sqrt()
}

/// Systems in order of first appearance, each mapping dataset to seed to result.
type Grouped<'a> = Vec<(&'a str, BTreeMap<&'a str, BTreeMap<u64, &'a RunResult>>)>;

fn group(results: &[RunResult]) -> Result<Grouped<'_>> {
    let mut out: Grouped<'_> = Vec::new();
    for r in results {
        let pos = match out.iter().position(|(s, _)| *s == r.system) {
            Some(p) => p,
            None => {
                out.push((r.system.as_str(), BTreeMap::new()));
                out.len() - 1
            }
        };
        let seeds = out[pos].1.entry(r.dataset.as_str()).or_default();
        if seeds.insert(r.seed, r).is_some() {
            return Err(Error::Validation(format!(
                "duplicate result for system {} dataset {} seed {}",
                r.system, r.dataset, r.seed
            )));
        }
    }
    for (system, datasets) in &out {
        let mut reference: Option<(&str, BTreeSet<u64>)> = None;
        for (dataset, seeds) in datasets {
            let set: BTreeSet<u64> = seeds.keys().copied().collect();
            match &reference {
                None => reference = Some((dataset, set)),
                Some((first, want)) if *want != set => {
                    let gap: Vec<String> = want
                        .symmetric_difference(&set)
                        .map(u64::to_string)
                        .collect();
                    return Err(Error::Validation(format!(
                        "system {system}: seeds for {dataset} differ from {first} (seeds {})",
                        gap.join(", ")
                    )));
                }
                _ => {}
            }
            let len = seeds.values().next().map(|r| r.correct.len());
            if seeds.values().any(|r| Some(r.correct.len()) != len) {
                return Err(Error::Validation(format!(
                    "system {system}: results for {dataset} differ in length across seeds"
                )));
            }
        }
    }
    Ok(out)
}

/// Per-dataset mean and spread over seeds, and per-category averages.
pub fn aggregate(results: &[RunResult], categories: &Categorization) -> Result<EvalReport> {
    let grouped = group(results)?;
    let mut systems = Vec::with_capacity(grouped.len());
    for (system, datasets) in &grouped {
        let mut stats = BTreeMap::new();
        for (dataset, seeds) in datasets {
            let accs: Vec<f64> = seeds.values().map(|r| r.accuracy).collect();
            stats.insert(
                dataset.to_string(),
                DatasetStats {
                    mean: mean(&accs),
                    std: population_std(&accs),
                    seeds: seeds.iter().map(|(s, r)| (*s, r.accuracy)).collect(),
                },
            );
        }
        let mut groups = BTreeMap::new();
        for category in [
            Category::InDistribution,
            Category::Challenge,
            Category::Standard,
        ] {
            let mut members: Vec<&str> = categories.members(category);
            members.retain(|d| stats.contains_key(*d));
            members.sort_unstable();
            if !members.is_empty() {
                let means: Vec<f64> = members.iter().map(|d| stats[*d].mean).collect();
                groups.insert(category, mean(&means));
            }
        }
        systems.push(SystemReport {
            system: system.to_string(),
            datasets: stats,
            groups,
        });
    }
    Ok(EvalReport {
        notes: vec![STD_NOTE.into(), POOLING_NOTE.into()],
        categories: categories.clone(),
        systems,
        significance: Vec::new(),
    })
}

/// Per-instance correctness averaged over seeds.
pub fn pooled_bits(results: &[RunResult], system: &str, dataset: &str) -> Result<Vec<f64>> {
    let runs: Vec<&RunResult> = results
        .iter()
        .filter(|r| r.system == system && r.dataset == dataset)
        .collect();
    let first = runs
        .first()
        .ok_or_else(|| Error::Validation(format!("no results for system {system} on {dataset}")))?;
    let n = first.correct.len();
    if runs.iter().any(|r| r.correct.len() != n) {
        return Err(Error::Validation(format!(
            "system {system}: results for {dataset} differ in length"
        )));
    }
    let mut sums = vec![0.0; n];
    for r in &runs {
        for (s, &b) in sums.iter_mut().zip(&r.correct) {
            *s += f64::from(b);
        }
    }
    Ok(sums.into_iter().map(|s| s / runs.len() as f64).collect())
}

/// Paired bootstrap between systems `a` and `b` on each shared dataset and on
/// each category's concatenated members.
pub fn bootstrap_compare(
    results: &[RunResult],
    a: &str,
    b: &str,
    categories: &Categorization,
    resamples: usize,
    seed: u64,
) -> Result<Vec<Significance>> {
    let datasets_of = |system: &str| -> BTreeSet<&str> {
        results
            .iter()
            .filter(|r| r.system == system)
            .map(|r| r.dataset.as_str())
            .collect()
    };
    let shared: Vec<&str> = datasets_of(a)
        .intersection(&datasets_of(b))
        .copied()
        .collect();
    if shared.is_empty() {
        return Err(Error::Validation(format!(
            "systems {a} and {b} share no dataset"
        )));
    }
    let mut pooled: BTreeMap<&str, (Vec<f64>, Vec<f64>)> = BTreeMap::new();
    for d in &shared {
        let pa = pooled_bits(results, a, d)?;
        let pb = pooled_bits(results, b, d)?;
        if pa.len() != pb.len() {
            return Err(Error::Validation(format!(
                "{d}: {a} has {} instances but {b} has {}",
                pa.len(),
                pb.len()
            )));
        }
        pooled.insert(d, (pa, pb));
    }

    let mut out = Vec::new();
    let mut push = |surface: String, xa: &[f64], xb: &[f64]| -> Result<()> {
        out.push(Significance {
            a: a.into(),
            b: b.into(),
            surface,
            difference: mean(xa) - mean(xb),
            p_value: paired_bootstrap(xa, xb, resamples, seed)?,
            resamples,
        });
        Ok(())
    };
    for (d, (xa, xb)) in &pooled {
        push(format!("dataset:{d}"), xa, xb)?;
    }
    for category in [Category::Challenge, Category::Standard] {
        let mut members: Vec<&str> = categories.members(category);
        members.retain(|d| pooled.contains_key(d));
        members.sort_unstable();
        if members.is_empty() {
            continue;
        }
        let xa: Vec<f64> = members
            .iter()
            .flat_map(|d| pooled[d].0.iter().copied())
            .collect();
        let xb: Vec<f64> = members
            .iter()
            .flat_map(|d| pooled[d].1.iter().copied())
            .collect();
        push(format!("group:{}", category.as_str()), &xa, &xb)?;
    }
    Ok(out)
}
