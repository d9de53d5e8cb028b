use std::collections::{BTreeMap, HashMap};

use rand::Rng;

use super::config::DownStrategy;
use super::rank::{by_class, draw, labelled, rank};
use crate::domain::{entropy, Label, NliInstance};
use crate::error::{Error, Result};
use crate::modelgate::{PredictionRecord, ScoreDimension, ScoreOutcome};

/// Per-instance evidence over the initial training set that ranked down
/// strategies consume.
#[derive(Debug, Clone, Copy, Default)]
pub struct DownArtifacts<'a> {
    pub predictions: Option<&'a [PredictionRecord]>,
    pub scores: Option<&'a BTreeMap<String, ScoreOutcome>>,
}

/// Ids to remove from `init`, exactly `need[c]` of each class `c`.
pub fn choose_down(
    init: &[NliInstance],
    need: [usize; 3],
    strategy: DownStrategy,
    artifacts: DownArtifacts<'_>,
    dims: &[ScoreDimension],
    rng: &mut impl Rng,
) -> Result<Vec<String>> {
    if need.iter().all(|&n| n == 0) {
        return Ok(Vec::new());
    }
    let keyed: [Vec<(&NliInstance, f64)>; 3] = match strategy {
        DownStrategy::Random => by_class(labelled(init).map(|(l, i)| (l, (i, 0.0)))),
        DownStrategy::LowestEntropy => {
            let preds = artifacts.predictions.ok_or_else(|| {
                Error::Config("lowest_entropy needs predictions over the initial set".into())
            })?;
            let index: HashMap<&str, &PredictionRecord> =
                preds.iter().map(|p| (p.instance_id.as_str(), p)).collect();
            let mut rows = Vec::new();
            let mut missing = Vec::new();
            for (label, inst) in labelled(init) {
                match index.get(inst.id.as_str()) {
                    None => missing.push(inst.id.clone()),
                    Some(rec) => {
                        let probs = rec.probs.ok_or_else(|| {
                            Error::Capability(format!(
                                "prediction for {} carries no probabilities",
                                inst.id
                            ))
                        })?;
                        rows.push((label, (inst, entropy(&probs)?)));
                    }
                }
            }
            if !missing.is_empty() {
                return Err(Error::Coverage(missing));
            }
            by_class(rows)
        }
        DownStrategy::LowestScore => {
            let scores = artifacts.scores.ok_or_else(|| {
                Error::Config("lowest_score needs scores over the initial set".into())
            })?;
            if dims.is_empty() {
                return Err(Error::Config("score dimension set is empty".into()));
            }
            let mut rows = Vec::new();
            let mut missing = Vec::new();
            for (label, inst) in labelled(init) {
                match scores.get(&inst.id) {
                    None => missing.push(inst.id.clone()),
                    Some(outcome) => {
                        if let Some(total) = outcome.total(dims) {
                            rows.push((label, (inst, f64::from(total))));
                        }
                    }
                }
            }
            if !missing.is_empty() {
                return Err(Error::Coverage(missing));
            }
            by_class(rows)
        }
    };

    let mut out = Vec::with_capacity(need.iter().sum());
    for label in Label::ALL {
        let cands = &keyed[label.index()];
        let n = need[label.index()];
        if cands.len() < n {
            return Err(Error::Sizing(format!(
                "class {label}: {n} removals required but only {} eligible initial instances",
                cands.len()
            )));
        }
        let picked: Vec<&NliInstance> = match strategy {
            DownStrategy::Random => draw(cands, n, rng).into_iter().map(|(i, _)| i).collect(),
            _ => rank(cands.clone(), rng, |(_, v)| *v, false)
                .into_iter()
                .take(n)
                .map(|(i, _)| i)
                .collect(),
        };
        out.extend(picked.into_iter().map(|i| i.id.clone()));
    }
    Ok(out)
}
