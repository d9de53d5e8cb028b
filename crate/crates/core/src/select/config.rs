use serde::{Deserialize, Serialize};

use crate::digest::json_digest;
use crate::domain::Budget;
use crate::error::{Error, Result};
use crate::modelgate::ScoreDimension;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SelectionMethod {
    Random,
    Uncertainty,
    UncertaintyCorrectOnly,
    DifficultyScore,
    Misclassified,
    ConcatHypothesis,
}

impl SelectionMethod {
    pub const ALL: [SelectionMethod; 6] = [
        SelectionMethod::Random,
        SelectionMethod::Uncertainty,
        SelectionMethod::UncertaintyCorrectOnly,
        SelectionMethod::DifficultyScore,
        SelectionMethod::Misclassified,
        SelectionMethod::ConcatHypothesis,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            SelectionMethod::Random => "random",
            SelectionMethod::Uncertainty => "uncertainty",
            SelectionMethod::UncertaintyCorrectOnly => "uncertainty_correct_only",
            SelectionMethod::DifficultyScore => "difficulty_score",
            SelectionMethod::Misclassified => "misclassified",
            SelectionMethod::ConcatHypothesis => "concat_hypothesis",
        }
    }

    pub fn uses_entropy(self) -> bool {
        matches!(
            self,
            SelectionMethod::Uncertainty | SelectionMethod::UncertaintyCorrectOnly
        )
    }

    pub fn needs_predictions(self) -> bool {
        self.uses_entropy() || self == SelectionMethod::Misclassified
    }
}

impl std::fmt::Display for SelectionMethod {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for SelectionMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        SelectionMethod::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown selection method {s:?}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DownStrategy {
    #[default]
    Random,
    LowestEntropy,
    LowestScore,
}

impl DownStrategy {
    pub fn as_str(self) -> &'static str {
        match self {
            DownStrategy::Random => "random",
            DownStrategy::LowestEntropy => "lowest_entropy",
            DownStrategy::LowestScore => "lowest_score",
        }
    }
}

impl std::str::FromStr for DownStrategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        [
            DownStrategy::Random,
            DownStrategy::LowestEntropy,
            DownStrategy::LowestScore,
        ]
        .into_iter()
        .find(|d| d.as_str() == s)
        .ok_or_else(|| Error::Config(format!("unknown down strategy {s:?}")))
    }
}

pub const DEFAULT_H: usize = 3;

pub fn default_score_dims() -> Vec<ScoreDimension> {
    vec![ScoreDimension::Correctness, ScoreDimension::Difficulty]
}

fn default_h() -> usize {
    DEFAULT_H
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionConfig {
    pub method: SelectionMethod,
    #[serde(default)]
    pub down_strategy: DownStrategy,
    /// Per-class cap overriding the budget's K.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k: Option<usize>,
    #[serde(default = "default_h")]
    pub h: usize,
    #[serde(default = "default_score_dims")]
    pub score_dims: Vec<ScoreDimension>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub template_id: Option<String>,
}

impl SelectionConfig {
    pub fn new(method: SelectionMethod, seed: u64) -> Self {
        SelectionConfig {
            method,
            down_strategy: DownStrategy::Random,
            k: None,
            h: DEFAULT_H,
            score_dims: default_score_dims(),
            seed,
            template_id: None,
        }
    }

    pub fn with_down(mut self, down: DownStrategy) -> Self {
        self.down_strategy = down;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.h < 2 {
            return Err(Error::Config(format!(
                "H must be at least 2, got {}",
                self.h
            )));
        }
        let scoring = self.method == SelectionMethod::DifficultyScore
            || self.down_strategy == DownStrategy::LowestScore;
        if scoring && self.score_dims.is_empty() {
            return Err(Error::Config("score dimension set is empty".into()));
        }
        match self.down_strategy {
            DownStrategy::LowestEntropy if !self.method.uses_entropy() => {
                Err(Error::Config(format!(
                    "down strategy lowest_entropy needs an entropy-based method, not {}",
                    self.method
                )))
            }
            DownStrategy::LowestScore if self.method != SelectionMethod::DifficultyScore => {
                Err(Error::Config(format!(
                    "down strategy lowest_score needs difficulty_score, not {}",
                    self.method
                )))
            }
            _ => Ok(()),
        }
    }

    /// The effective budget: the configured override or the budget's own K.
    pub fn budget(&self, budget: &Budget) -> Result<Budget> {
        match self.k {
            Some(k) if k != budget.k => Budget::with_k(budget.m, budget.k_fraction, k),
            _ => Ok(*budget),
        }
    }

    pub fn digest(&self) -> String {
        json_digest(self)
    }
}
