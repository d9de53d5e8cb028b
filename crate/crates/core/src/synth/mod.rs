//! Synthetic instance generation, model labelling of external text, and
//! unanimity validation.

mod catalog;
mod generate;
mod labelling;
mod plan;
mod strategy;
mod vote;

pub use catalog::{DomainCatalog, DOMAINS, DOMAIN_COUNT};
pub use generate::{
    generate_batch, GeneratedBatch, GenerationSpec, DEFAULT_GENERATION_TEMPERATURE,
    SKIP_BUDGET_FRACTION,
};
pub use labelling::{label_unlabelled, LabelledCorpus};
pub use plan::build_generation_plan;
pub use strategy::{GenStrategy, PremiseLength, StrategyKind};
pub use vote::{
    keep_decision, validate_unanimity, ValidationOutcome, ValidationVerdict,
    DEFAULT_VOTE_TEMPERATURE, VOTES,
};

use crate::domain::NliInstance;
use crate::error::{Error, Result};

pub const META_DOMAIN: &str = "domain";
pub const META_INTENDED_LABEL: &str = "intended_label";
pub const META_FINAL_LABEL: &str = "final_label";
pub const META_STRATEGY: &str = "strategy";
pub const META_TEMPLATE_ID: &str = "template_id";

/// Checks the audit fields a generated instance must carry. `validated`
/// additionally requires the final label set by unanimity validation.
pub fn check_provenance(inst: &NliInstance, validated: bool) -> Result<()> {
    let mut required = vec![META_STRATEGY, META_DOMAIN, META_INTENDED_LABEL];
    if inst.meta.get(META_STRATEGY).map(String::as_str) == Some("long_complex") {
        required.push(META_TEMPLATE_ID);
    }
    if validated {
        required.push(META_FINAL_LABEL);
    }
    let missing: Vec<&str> = required
        .into_iter()
        .filter(|k| !inst.meta.contains_key(*k))
        .collect();
    if missing.is_empty() && !inst.source.is_empty() {
        Ok(())
    } else {
        Err(Error::Invariant(format!(
            "generated instance {} lacks {}",
            inst.id,
            missing.join(", ")
        )))
    }
}
