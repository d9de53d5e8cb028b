//! Domain types shared by every pipeline stage: labels, instances, budgets,
//! partitions and swap plans, plus the entropy and label-composition rules.

mod budget;
mod entropy;
mod instance;
mod label;
mod swap;

pub use budget::{Budget, Partition, DEFAULT_K_FRACTION};
pub use entropy::{entropy, validate_probs, PROB_SUM_TOLERANCE};
pub use instance::{histogram, Dataset, DatasetKind, NliInstance};
pub use label::{compose_labels, Label};
pub use swap::{apply_swap, SwapPlan};
