//! Building swap plans: which instances enter the training set and which
//! leave it.

mod concat;
mod config;
mod down;
pub(crate) mod rank;
mod up;

use std::collections::BTreeMap;

pub use concat::{
    concat_candidates, concat_instance, select_concat, CONCAT_SOURCE, MAX_SUBSETS_PER_GROUP,
    META_LINEAGE, META_LINEAGE_LABELS,
};
pub use config::{default_score_dims, DownStrategy, SelectionConfig, SelectionMethod, DEFAULT_H};
pub use down::{choose_down, DownArtifacts};
pub use up::{select_difficulty, select_misclassified, select_random, select_uncertainty, UpDraft};

use crate::domain::{Budget, NliInstance, SwapPlan};
use crate::error::{Error, Result};
use crate::modelgate::{PredictionRecord, ScoreOutcome};

/// Everything a selection run may read. Which fields are required depends on
/// the method and down strategy.
#[derive(Debug, Clone, Copy, Default)]
pub struct SelectionInputs<'a> {
    /// The initial training instances.
    pub init: &'a [NliInstance],
    /// Candidate pool for the ranking and sampling methods.
    pub pool: &'a [NliInstance],
    /// Corpus minus the initial set, used by concatenation.
    pub source: &'a [NliInstance],
    pub predictions: Option<&'a [PredictionRecord]>,
    pub scores: Option<&'a BTreeMap<String, ScoreOutcome>>,
    pub down: DownArtifacts<'a>,
}

/// Runs the configured method and down strategy and returns a validated plan.
pub fn select(
    cfg: &SelectionConfig,
    budget: &Budget,
    inputs: &SelectionInputs<'_>,
) -> Result<SwapPlan> {
    cfg.validate()?;
    let budget = cfg.budget(budget)?;
    let k = budget.k;
    let (mut up_rng, mut down_rng) = rank::streams(cfg.seed);
    let need_predictions = || {
        inputs.predictions.ok_or_else(|| {
            Error::Config(format!(
                "method {} needs predictions over the pool",
                cfg.method
            ))
        })
    };
    let draft = match cfg.method {
        SelectionMethod::Random => select_random(inputs.pool, k, &mut up_rng)?,
        SelectionMethod::Uncertainty => {
            select_uncertainty(inputs.pool, need_predictions()?, k, false, &mut up_rng)?
        }
        SelectionMethod::UncertaintyCorrectOnly => {
            select_uncertainty(inputs.pool, need_predictions()?, k, true, &mut up_rng)?
        }
        SelectionMethod::Misclassified => {
            select_misclassified(inputs.pool, need_predictions()?, k, &mut up_rng)?
        }
        SelectionMethod::DifficultyScore => {
            let scores = inputs.scores.ok_or_else(|| {
                Error::Config("difficulty_score needs scores over the pool".into())
            })?;
            select_difficulty(inputs.pool, scores, &cfg.score_dims, k, &mut up_rng)?
        }
        SelectionMethod::ConcatHypothesis => select_concat(inputs.source, cfg.h, k, &mut up_rng)?,
    };
    let down_ids = choose_down(
        inputs.init,
        draft.need(),
        cfg.down_strategy,
        inputs.down,
        &cfg.score_dims,
        &mut down_rng,
    )?;
    let plan = SwapPlan {
        method: cfg.method.as_str().to_string(),
        seed: cfg.seed,
        k,
        config_digest: cfg.digest(),
        template_id: cfg.template_id.clone(),
        up: draft.up,
        down_ids,
        warnings: draft.warnings,
    };
    plan.validate(inputs.init)?;
    Ok(plan)
}
