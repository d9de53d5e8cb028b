use serde::{Deserialize, Serialize};

use super::{META_FINAL_LABEL, META_INTENDED_LABEL};
use crate::domain::{Label, NliInstance};
use crate::error::{Error, Result};
use crate::modelgate::{Decoded, Gateway, ModelHandle, PromptConfig};

pub const VOTES: usize = 8;

pub const DEFAULT_VOTE_TEMPERATURE: f64 = 1.0;

/// The label every vote agrees on, or `None` when the votes are empty,
/// disagree, or include an undecodable answer.
pub fn keep_decision(votes: &[Decoded]) -> Option<Label> {
    let first = votes.first()?.label()?;
    votes
        .iter()
        .all(|v| *v == Decoded::Label(first))
        .then_some(first)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationVerdict {
    pub instance_id: String,
    pub votes: Vec<Decoded>,
    pub kept: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub final_label: Option<Label>,
    pub temperature: f64,
    /// Transport failure that left the votes incomplete.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationOutcome {
    pub kept: Vec<NliInstance>,
    pub verdicts: Vec<ValidationVerdict>,
    pub discarded: usize,
    pub unresolved: usize,
}

/// Asks for `votes` independent predictions per instance and keeps only the
/// unanimous ones, relabelled with the agreed label.
pub fn validate_unanimity(
    gw: &Gateway,
    handle: &ModelHandle,
    instances: Vec<NliInstance>,
    cfg: &PromptConfig,
    votes: usize,
) -> Result<ValidationOutcome> {
    if votes == 0 {
        return Err(Error::Config("at least one vote is required".into()));
    }
    let jobs: Vec<(usize, usize)> = (0..instances.len())
        .flat_map(|i| (0..votes).map(move |v| (i, v)))
        .collect();
    let mut results = gw
        .map_bounded(&jobs, |&(i, v)| {
            gw.classify_with_nonce(handle, &instances[i], cfg, Some(&format!("vote:{v}")))
        })
        .into_iter();

    let mut out = ValidationOutcome {
        kept: Vec::new(),
        verdicts: Vec::new(),
        discarded: 0,
        unresolved: 0,
    };
    for mut inst in instances {
        let mut ballot = Vec::with_capacity(votes);
        let mut error = None;
        for r in results.by_ref().take(votes) {
            match r {
                Ok(rec) => ballot.push(rec.decoded),
                Err(e) if e.class() == crate::ErrorClass::Provider => {
                    error.get_or_insert_with(|| e.to_string());
                }
                Err(e) => return Err(e),
            }
        }
        let decision = if error.is_none() {
            keep_decision(&ballot)
        } else {
            None
        };
        match (&error, decision) {
            (Some(_), _) => out.unresolved += 1,
            (None, None) => out.discarded += 1,
            (None, Some(label)) => {
                if let Some(intended) = inst.label {
                    inst.meta
                        .entry(META_INTENDED_LABEL.into())
                        .or_insert_with(|| intended.as_str().into());
                }
                inst.label = Some(label);
                inst.meta
                    .insert(META_FINAL_LABEL.into(), label.as_str().into());
                out.kept.push(inst.clone());
            }
        }
        out.verdicts.push(ValidationVerdict {
            instance_id: inst.id,
            votes: ballot,
            kept: decision.is_some(),
            final_label: decision,
            temperature: cfg.temperature,
            error,
        });
    }
    Ok(out)
}
