use serde::{Deserialize, Serialize};

use super::{META_FINAL_LABEL, META_STRATEGY};
use crate::domain::NliInstance;
use crate::error::{Error, Result};
use crate::ingest::{filter_generated, FilterReport, FilterRules};
use crate::modelgate::{Decoded, Gateway, ModelHandle, PromptConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelledCorpus {
    pub instances: Vec<NliInstance>,
    pub filter: FilterReport,
    /// Instances whose prediction decoded to no label.
    pub invalid: usize,
}

/// Filters an unlabelled corpus, then labels each survivor with the model's
/// few-shot prediction.
pub fn label_unlabelled(
    gw: &Gateway,
    handle: &ModelHandle,
    corpus: Vec<NliInstance>,
    cfg: &PromptConfig,
    rules: &FilterRules,
) -> Result<LabelledCorpus> {
    if let Some(inst) = corpus.iter().find(|i| i.label.is_some()) {
        return Err(Error::Validation(format!(
            "instance {} is already labelled",
            inst.id
        )));
    }
    let (clean, filter) = filter_generated(corpus, rules);
    let predictions = gw.classify_batch(handle, &clean, cfg);
    let mut instances = Vec::with_capacity(clean.len());
    let mut invalid = 0;
    for (mut inst, pred) in clean.into_iter().zip(predictions) {
        match pred?.decoded {
            Decoded::Label(label) => {
                inst.label = Some(label);
                inst.meta
                    .insert(META_STRATEGY.into(), "domain_label".into());
                inst.meta
                    .insert(META_FINAL_LABEL.into(), label.as_str().into());
                instances.push(inst);
            }
            Decoded::Invalid => invalid += 1,
        }
    }
    Ok(LabelledCorpus {
        instances,
        filter,
        invalid,
    })
}
