use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_K_FRACTION: f64 = 0.05;

/// Training-set size `m` and the per-class swap cap `k`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Budget {
    pub m: usize,
    pub k_fraction: f64,
    pub k: usize,
}

impl Budget {
    /// Budget with `k = round(k_fraction * m)` per class.
    pub fn new(m: usize, k_fraction: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&k_fraction) {
            return Err(Error::Config(format!(
                "k_fraction {k_fraction} outside [0, 1]"
            )));
        }
        let k = (k_fraction * m as f64).round() as usize;
        Self::with_k(m, k_fraction, k)
    }

    /// Budget with an explicit per-class cap.
    pub fn with_k(m: usize, k_fraction: f64, k: usize) -> Result<Self> {
        if m == 0 {
            return Err(Error::Config("budget m must be positive".into()));
        }
        if 3 * k > m {
            return Err(Error::Config(format!(
                "per-class cap {k} too large for m = {m} (3k must not exceed m)"
            )));
        }
        Ok(Self { m, k_fraction, k })
    }

    pub fn total_swap(&self) -> usize {
        3 * self.k
    }
}

/// Disjoint initial-training and candidate-pool id sets drawn from one corpus.
/// Ids are kept in corpus order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Partition {
    pub dataset: String,
    pub seed: u64,
    pub init_ids: Vec<String>,
    pub potential_ids: Vec<String>,
}

impl Partition {
    pub fn check(&self, m: usize) -> Result<()> {
        if self.init_ids.len() != m || self.potential_ids.len() != m {
            return Err(Error::Invariant(format!(
                "partition sizes {}/{} differ from m = {m}",
                self.init_ids.len(),
                self.potential_ids.len()
            )));
        }
        let init: HashSet<&String> = self.init_ids.iter().collect();
        if let Some(id) = self.potential_ids.iter().find(|id| init.contains(id)) {
            return Err(Error::Invariant(format!(
                "id {id} is in both init and potential sets"
            )));
        }
        Ok(())
    }
}
