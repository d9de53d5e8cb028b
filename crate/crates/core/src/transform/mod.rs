//! Deterministic dataset constructions.

mod copa;
mod splits;

pub use copa::{
    build_copa_nli, copa_hypothesis, read_copa_jsonl, CopaBuild, CopaInput, CopaQuestion,
    CopaRecord, NonEntailmentLabel, RecordError,
};
pub use splits::{tag_splits, SplitTag, TagEvent, TaggingLog, SPLIT_META_KEY};
