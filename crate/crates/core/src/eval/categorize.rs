use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const CHALLENGE_THRESHOLD: f64 = 0.70;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Category {
    InDistribution,
    Challenge,
    Standard,
}

impl Category {
    pub fn as_str(self) -> &'static str {
        match self {
            Category::InDistribution => "in_distribution",
            Category::Challenge => "challenge",
            Category::Standard => "standard",
        }
    }
}

/// Datasets in display order with their category.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Categorization {
    pub entries: Vec<(String, Category)>,
}

impl Categorization {
    pub fn get(&self, dataset: &str) -> Option<Category> {
        self.entries
            .iter()
            .find(|(d, _)| d == dataset)
            .map(|(_, c)| *c)
    }

    pub fn members(&self, category: Category) -> Vec<&str> {
        self.entries
            .iter()
            .filter(|(_, c)| *c == category)
            .map(|(d, _)| d.as_str())
            .collect()
    }
}

/// A dataset is a challenge set when its baseline accuracy is strictly below
/// `threshold`. Datasets named in `in_distribution` are exempt.
pub fn categorize(
    baseline: &[(String, f64)],
    threshold: f64,
    in_distribution: &[String],
) -> Result<Categorization> {
    let mut entries = Vec::with_capacity(baseline.len());
    for (name, acc) in baseline {
        if !(0.0..=1.0).contains(acc) {
            return Err(Error::Validation(format!(
                "baseline accuracy {acc} for {name} outside [0, 1]"
            )));
        }
        let category = if in_distribution.contains(name) {
            Category::InDistribution
        } else if *acc < threshold {
            Category::Challenge
        } else {
            Category::Standard
        };
        entries.push((name.clone(), category));
    }
    Ok(Categorization { entries })
}
