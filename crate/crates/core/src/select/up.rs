use std::collections::{BTreeMap, HashMap};

use rand::Rng;

use super::rank::{by_class, draw, labelled, rank};
use crate::domain::{entropy, Label, NliInstance};
use crate::error::{Error, Result};
use crate::modelgate::{PredictionRecord, ScoreDimension, ScoreOutcome};

/// Up-instances chosen by one method, before the matching down draw.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct UpDraft {
    pub up: Vec<NliInstance>,
    pub warnings: Vec<String>,
}

impl UpDraft {
    pub fn need(&self) -> [usize; 3] {
        crate::domain::histogram(&self.up)
    }

    fn extend(&mut self, picked: Vec<&NliInstance>) {
        self.up.extend(picked.into_iter().cloned());
    }

    fn note_shortfall(&mut self, label: Label, got: usize, k: usize, why: &str) {
        if got < k {
            self.warnings
                .push(format!("class {label}: {got} of {k} {why}"));
        }
    }
}

fn index_predictions<'a>(
    pool: &[NliInstance],
    predictions: &'a [PredictionRecord],
) -> Result<HashMap<&'a str, &'a PredictionRecord>> {
    let index: HashMap<&str, &PredictionRecord> = predictions
        .iter()
        .map(|p| (p.instance_id.as_str(), p))
        .collect();
    let missing: Vec<String> = pool
        .iter()
        .filter(|i| i.label.is_some() && !index.contains_key(i.id.as_str()))
        .map(|i| i.id.clone())
        .collect();
    if missing.is_empty() {
        Ok(index)
    } else {
        Err(Error::Coverage(missing))
    }
}

/// `k` instances per class drawn uniformly without replacement.
pub fn select_random(pool: &[NliInstance], k: usize, rng: &mut impl Rng) -> Result<UpDraft> {
    let classes = by_class(labelled(pool));
    for label in Label::ALL {
        let have = classes[label.index()].len();
        if have < k {
            return Err(Error::Sizing(format!(
                "class {label}: pool has {have} instances, {k} required"
            )));
        }
    }
    let mut draft = UpDraft::default();
    for cands in &classes {
        draft.extend(draw(cands, k, rng));
    }
    Ok(draft)
}

/// Top `k` per gold class by predictive entropy. With `correct_only`, only
/// candidates the model labelled correctly are ranked, and a class may come
/// up short.
pub fn select_uncertainty(
    pool: &[NliInstance],
    predictions: &[PredictionRecord],
    k: usize,
    correct_only: bool,
    rng: &mut impl Rng,
) -> Result<UpDraft> {
    let index = index_predictions(pool, predictions)?;
    let mut scored = Vec::new();
    for (label, inst) in labelled(pool) {
        let rec = index[inst.id.as_str()];
        let probs = rec.probs.ok_or_else(|| {
            Error::Capability(format!(
                "prediction for {} carries no probabilities",
                inst.id
            ))
        })?;
        if correct_only && rec.decoded.label() != Some(label) {
            continue;
        }
        scored.push((label, (inst, entropy(&probs)?)));
    }
    let classes = by_class(scored);
    let mut draft = UpDraft::default();
    for label in Label::ALL {
        let cands = classes[label.index()].clone();
        if !correct_only && cands.len() < k {
            return Err(Error::Sizing(format!(
                "class {label}: pool has {} instances, {k} required",
                cands.len()
            )));
        }
        let ranked = rank(cands, rng, |(_, h)| *h, true);
        let picked: Vec<&NliInstance> = ranked.into_iter().take(k).map(|(i, _)| i).collect();
        draft.note_shortfall(
            label,
            picked.len(),
            k,
            "correctly predicted candidates available",
        );
        draft.extend(picked);
    }
    Ok(draft)
}

/// Top `k` per gold class by the summed scores over `dims`. Unscorable
/// instances are left out and counted in the draft warnings.
pub fn select_difficulty(
    pool: &[NliInstance],
    scores: &BTreeMap<String, ScoreOutcome>,
    dims: &[ScoreDimension],
    k: usize,
    rng: &mut impl Rng,
) -> Result<UpDraft> {
    if dims.is_empty() {
        return Err(Error::Config("score dimension set is empty".into()));
    }
    let missing: Vec<String> = labelled(pool)
        .filter(|(_, i)| !scores.contains_key(&i.id))
        .map(|(_, i)| i.id.clone())
        .collect();
    if !missing.is_empty() {
        return Err(Error::Coverage(missing));
    }
    let mut unscorable = 0usize;
    let mut scored = Vec::new();
    for (label, inst) in labelled(pool) {
        match scores[&inst.id].total(dims) {
            Some(total) => scored.push((label, (inst, total))),
            None => unscorable += 1,
        }
    }
    let classes = by_class(scored);
    let mut draft = UpDraft::default();
    if unscorable > 0 {
        draft
            .warnings
            .push(format!("{unscorable} unscorable instances excluded"));
    }
    for label in Label::ALL {
        let ranked = rank(classes[label.index()].clone(), rng, |(_, s)| *s, true);
        let picked: Vec<&NliInstance> = ranked.into_iter().take(k).map(|(i, _)| i).collect();
        draft.note_shortfall(label, picked.len(), k, "scorable candidates available");
        draft.extend(picked);
    }
    Ok(draft)
}

/// Up to `k` per gold class drawn from the instances the model got wrong.
/// An invalid prediction counts as wrong.
pub fn select_misclassified(
    pool: &[NliInstance],
    predictions: &[PredictionRecord],
    k: usize,
    rng: &mut impl Rng,
) -> Result<UpDraft> {
    let index = index_predictions(pool, predictions)?;
    let wrong = labelled(pool)
        .filter(|(label, inst)| index[inst.id.as_str()].decoded.label() != Some(*label));
    let classes = by_class(wrong);
    let mut draft = UpDraft::default();
    for label in Label::ALL {
        let picked = draw(&classes[label.index()], k, rng);
        draft.note_shortfall(label, picked.len(), k, "misclassified candidates available");
        draft.extend(picked);
    }
    Ok(draft)
}
