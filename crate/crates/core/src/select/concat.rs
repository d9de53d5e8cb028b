use std::collections::{BTreeSet, HashMap};

use rand::seq::SliceRandom;
use rand::Rng;

use super::up::UpDraft;
use crate::domain::{compose_labels, Label, NliInstance};
use crate::error::{Error, Result};

pub const CONCAT_SOURCE: &str = "concat";
pub const META_LINEAGE: &str = "lineage";
pub const META_LINEAGE_LABELS: &str = "lineage_labels";

/// Premise groups with more subsets than this are sampled instead of
/// enumerated.
pub const MAX_SUBSETS_PER_GROUP: usize = 64;

fn binomial(n: usize, k: usize) -> usize {
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
        if acc > usize::MAX as u128 {
            return usize::MAX;
        }
    }
    acc as usize
}

fn all_subsets(n: usize, h: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut idx: Vec<usize> = (0..h).collect();
    loop {
        out.push(idx.clone());
        let Some(pos) = (0..h).rev().find(|&i| idx[i] < n - h + i) else {
            return out;
        };
        idx[pos] += 1;
        for j in pos + 1..h {
            idx[j] = idx[j - 1] + 1;
        }
    }
}

fn group_subsets(n: usize, h: usize, rng: &mut impl Rng) -> Vec<Vec<usize>> {
    if binomial(n, h) <= MAX_SUBSETS_PER_GROUP {
        return all_subsets(n, h);
    }
    let mut seen = BTreeSet::new();
    while seen.len() < MAX_SUBSETS_PER_GROUP {
        let mut pick = rand::seq::index::sample(rng, n, h).into_vec();
        pick.sort_unstable();
        seen.insert(pick);
    }
    seen.into_iter().collect()
}

/// Builds one synthetic instance from `parts`, which share a premise, in the
/// given order.
pub fn concat_instance(parts: &[&NliInstance]) -> Result<NliInstance> {
    let labels: Vec<Label> = parts
        .iter()
        .map(|p| {
            p.label
                .ok_or_else(|| Error::Validation(format!("{} is unlabelled", p.id)))
        })
        .collect::<Result<_>>()?;
    let ids: Vec<&str> = parts.iter().map(|p| p.id.as_str()).collect();
    let hypothesis = parts
        .iter()
        .map(|p| p.hypothesis.as_str())
        .collect::<Vec<_>>()
        .join(" ");
    Ok(NliInstance::new(
        format!("concat:{}", ids.join("+")),
        parts[0].premise.clone(),
        hypothesis,
        Some(compose_labels(&labels)?),
        CONCAT_SOURCE,
    )
    .with_meta(META_LINEAGE, ids.join("|"))
    .with_meta(
        META_LINEAGE_LABELS,
        labels
            .iter()
            .map(|l| l.as_str())
            .collect::<Vec<_>>()
            .join("|"),
    ))
}

/// Every candidate built from premise groups of at least `h` instances, each
/// subset in a random order, the whole list shuffled.
pub fn concat_candidates(
    source: &[NliInstance],
    h: usize,
    rng: &mut impl Rng,
) -> Result<Vec<NliInstance>> {
    if h < 2 {
        return Err(Error::Config(format!("H must be at least 2, got {h}")));
    }
    let mut order: Vec<&str> = Vec::new();
    let mut groups: HashMap<&str, Vec<&NliInstance>> = HashMap::new();
    for inst in source.iter().filter(|i| i.label.is_some()) {
        let g = groups.entry(inst.premise.as_str()).or_default();
        if g.is_empty() {
            order.push(inst.premise.as_str());
        }
        g.push(inst);
    }
    let mut out = Vec::new();
    for premise in order {
        let group = &groups[premise];
        if group.len() < h {
            continue;
        }
        for subset in group_subsets(group.len(), h, rng) {
            let mut parts: Vec<&NliInstance> = subset.iter().map(|&i| group[i]).collect();
            parts.shuffle(rng);
            out.push(concat_instance(&parts)?);
        }
    }
    out.shuffle(rng);
    Ok(out)
}

/// Up to `k` concatenated candidates per composed class.
pub fn select_concat(
    source: &[NliInstance],
    h: usize,
    k: usize,
    rng: &mut impl Rng,
) -> Result<UpDraft> {
    let candidates = concat_candidates(source, h, rng)?;
    let mut taken = [0usize; 3];
    let mut draft = UpDraft::default();
    for cand in candidates {
        let c = cand.label.expect("composed label").index();
        if taken[c] < k {
            taken[c] += 1;
            draft.up.push(cand);
        }
    }
    draft.up.sort_by_key(|i| i.label.map(Label::index));
    for label in Label::ALL {
        let got = taken[label.index()];
        if got < k {
            let msg = format!("class {label}: {got} of {k} concatenated candidates available");
            log::warn!("{msg}");
            draft.warnings.push(msg);
        }
    }
    Ok(draft)
}
