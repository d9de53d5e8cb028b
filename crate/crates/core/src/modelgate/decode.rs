//! Turning raw model text into labels, scores and class probabilities.

use serde::{Deserialize, Serialize};

use super::types::Decoded;
use crate::domain::Label;

/// Earliest case-insensitive occurrence of a label word wins; no occurrence
/// decodes to [`Decoded::Invalid`].
pub fn decode_label(raw: &str) -> Decoded {
    let lower = raw.to_lowercase();
    Label::ALL
        .iter()
        .filter_map(|l| lower.find(l.as_str()).map(|at| (at, *l)))
        .min_by_key(|(at, _)| *at)
        .map_or(Decoded::Invalid, |(_, l)| Decoded::Label(l))
}

/// First integer in `raw`, accepted only within 1..=10.
pub fn parse_score(raw: &str) -> Option<u8> {
    let start = raw.find(|c: char| c.is_ascii_digit())?;
    let digits: String = raw[start..]
        .chars()
        .take_while(|c| c.is_ascii_digit())
        .collect();
    let preceded_by_minus = raw[..start].ends_with('-');
    match digits.parse::<u8>() {
        Ok(n) if (1..=10).contains(&n) && !preceded_by_minus => Some(n),
        _ => None,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopLogprob {
    pub token: String,
    pub logprob: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TokenLogprob {
    pub token: String,
    pub logprob: f64,
    #[serde(default)]
    pub top_logprobs: Vec<TopLogprob>,
}

fn label_for_token(token: &str) -> Option<Label> {
    let t = token.trim().to_lowercase();
    if t.is_empty() {
        return None;
    }
    Label::ALL.into_iter().find(|l| l.as_str().starts_with(&t))
}

/// Class probabilities from token log-likelihoods: locate the first generated
/// token that begins a label word, read the alternatives offered at that
/// position, and renormalize over the three label words. Labels absent from
/// the alternatives get probability zero.
pub fn probs_from_logprobs(tokens: &[TokenLogprob]) -> Option<[f64; 3]> {
    let position = tokens
        .iter()
        .find(|t| label_for_token(&t.token).is_some())?;
    let mut best = [f64::NEG_INFINITY; 3];
    let candidates = position
        .top_logprobs
        .iter()
        .map(|t| (t.token.as_str(), t.logprob))
        .chain(std::iter::once((position.token.as_str(), position.logprob)));
    for (token, logprob) in candidates {
        if let Some(l) = label_for_token(token) {
            let slot = &mut best[l.index()];
            *slot = slot.max(logprob);
        }
    }
    let max = best.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let weights = best.map(|lp| {
        if lp.is_finite() {
            (lp - max).exp()
        } else {
            0.0
        }
    });
    let total: f64 = weights.iter().sum();
    Some(weights.map(|w| w / total))
}
