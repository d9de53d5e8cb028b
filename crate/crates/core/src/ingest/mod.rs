//! Corpus input/output, the dataset registry, seeded partitioning and the
//! quality filters for generated text.

mod filter;
mod jsonl;
mod partition;
mod registry;

pub use filter::{
    filter_generated, FilterReport, FilterRules, DEFAULT_RULES, RULE_EXCLAMATION, RULE_QUESTION,
    RULE_RUN_ON,
};
pub use jsonl::{load_jsonl, save_jsonl, write_instances, FieldMapping, LoadOutcome};
pub use partition::draw_partition;
pub use registry::{load_dataset, DatasetFormat, DatasetManifest, Registry, RegistryLoad};
