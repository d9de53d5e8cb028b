//! Quality filters applied to model-generated text.

use std::collections::BTreeMap;
use std::path::Path;

use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::domain::NliInstance;
use crate::error::{Error, Result};

pub const DEFAULT_RULES: &str = include_str!("../../assets/filter_rules.txt");

/// Reason attached to premises ending in `?`.
pub const RULE_QUESTION: &str = "terminal:?";
/// Reason attached to premises ending in `!`.
pub const RULE_EXCLAMATION: &str = "terminal:!";
/// Reason attached to text with two sentences run together.
pub const RULE_RUN_ON: &str = "run_on";

#[derive(Debug, Clone)]
enum TextRule {
    Word { word: String, pattern: Regex },
    Phrase { phrase: String },
}

/// Word and phrase lists plus the fixed punctuation rules.
#[derive(Debug, Clone)]
pub struct FilterRules {
    rules: Vec<TextRule>,
}

impl Default for FilterRules {
    fn default() -> Self {
        Self::parse(DEFAULT_RULES).expect("bundled filter rules parse")
    }
}

impl FilterRules {
    /// Parses `word:` / `phrase:` lines; blank lines and `#` comments are skipped.
    pub fn parse(text: &str) -> Result<Self> {
        let mut rules = Vec::new();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            if let Some(word) = line.strip_prefix("word:") {
                let word = word.trim().to_lowercase();
                let pattern = Regex::new(&format!(r"(?i)\b{}\b", regex::escape(&word)))
                    .map_err(|e| Error::Config(e.to_string()))?;
                rules.push(TextRule::Word { word, pattern });
            } else if let Some(phrase) = line.strip_prefix("phrase:") {
                rules.push(TextRule::Phrase {
                    phrase: phrase.trim().to_lowercase(),
                });
            } else {
                return Err(Error::Config(format!(
                    "filter rules line {}: expected word: or phrase: prefix, got {line:?}",
                    n + 1
                )));
            }
        }
        Ok(Self { rules })
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    /// Name of the first rule that rejects `inst`, if any. Word rules are
    /// checked in the premise, then the hypothesis, then phrase rules in the
    /// premise; within a field the match that starts earliest wins.
    pub fn first_violation(&self, inst: &NliInstance) -> Option<String> {
        let words = |text: &str| {
            self.rules
                .iter()
                .filter_map(|rule| match rule {
                    TextRule::Word { word, pattern } => {
                        pattern.find(text).map(|m| (m.start(), word))
                    }
                    TextRule::Phrase { .. } => None,
                })
                .min_by_key(|(start, _)| *start)
                .map(|(_, word)| format!("word:{word}"))
        };
        if let Some(hit) = words(&inst.premise).or_else(|| words(&inst.hypothesis)) {
            return Some(hit);
        }
        let premise_lower = inst.premise.to_lowercase();
        let phrase = self
            .rules
            .iter()
            .filter_map(|rule| match rule {
                TextRule::Phrase { phrase } => {
                    premise_lower.find(phrase.as_str()).map(|at| (at, phrase))
                }
                TextRule::Word { .. } => None,
            })
            .min_by_key(|(at, _)| *at);
        if let Some((_, phrase)) = phrase {
            return Some(format!("phrase:{phrase}"));
        }
        let premise = inst.premise.trim_end();
        if premise.ends_with('?') {
            return Some(RULE_QUESTION.into());
        }
        if premise.ends_with('!') {
            return Some(RULE_EXCLAMATION.into());
        }
        if has_run_on(&inst.premise) || has_run_on(&inst.hypothesis) {
            return Some(RULE_RUN_ON.into());
        }
        None
    }
}

/// Lowercase letter, space, uppercase letter: a sentence boundary with the
/// terminal punctuation missing. A capital `I` standing alone is the pronoun
/// and does not count.
fn has_run_on(text: &str) -> bool {
    let chars: Vec<char> = text.chars().collect();
    chars.windows(3).enumerate().any(|(i, w)| {
        w[0].is_lowercase()
            && w[1] == ' '
            && w[2].is_uppercase()
            && !(w[2] == 'I' && !chars.get(i + 3).is_some_and(|c| c.is_alphabetic()))
    })
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FilterReport {
    pub kept: usize,
    pub dropped: usize,
    /// Drops per rule; each dropped instance counts toward its first matching rule.
    pub reasons: BTreeMap<String, usize>,
    /// Fields each rule family is checked against.
    pub scope: BTreeMap<String, String>,
}

impl FilterReport {
    fn with_scope() -> Self {
        let mut scope = BTreeMap::new();
        scope.insert("word".into(), "premise+hypothesis".into());
        scope.insert("phrase".into(), "premise".into());
        scope.insert("terminal".into(), "premise".into());
        scope.insert(RULE_RUN_ON.into(), "premise+hypothesis".into());
        Self {
            scope,
            ..Self::default()
        }
    }

    pub fn merge(&mut self, other: &FilterReport) {
        self.kept += other.kept;
        self.dropped += other.dropped;
        for (k, v) in &other.reasons {
            *self.reasons.entry(k.clone()).or_default() += v;
        }
        if self.scope.is_empty() {
            self.scope = other.scope.clone();
        }
    }
}

pub fn filter_generated(
    instances: Vec<NliInstance>,
    rules: &FilterRules,
) -> (Vec<NliInstance>, FilterReport) {
    let mut report = FilterReport::with_scope();
    let mut kept = Vec::with_capacity(instances.len());
    for inst in instances {
        match rules.first_violation(&inst) {
            Some(reason) => {
                report.dropped += 1;
                *report.reasons.entry(reason).or_default() += 1;
            }
            None => {
                report.kept += 1;
                kept.push(inst);
            }
        }
    }
    (kept, report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn pair(p: &str, h: &str) -> NliInstance {
        NliInstance::new("x", p, h, None, "gen")
    }

    fn reason(p: &str, h: &str) -> Option<String> {
        FilterRules::default().first_violation(&pair(p, h))
    }

    #[test]
    fn documented_examples() {
        assert_eq!(
            reason("Sure! Here is a sentence.", "A man sleeps."),
            Some("phrase:sure!".into())
        );
        assert_eq!(
            reason("A dog runs.", "This implies the premise."),
            Some("word:implies".into())
        );
        assert_eq!(
            reason("A dog runs.", "This implies the dog moves."),
            Some("word:implies".into())
        );
        assert_eq!(
            reason(
                "The train left at noon. It was full.",
                "The train was busy."
            ),
            None
        );
    }

    #[test]
    fn word_boundaries() {
        assert_eq!(
            reason("It was IMPLIED earlier.", "A cat."),
            Some("word:implied".into())
        );
        assert_eq!(reason("The implication was clear.", "A cat sat."), None);
    }

    #[test]
    fn phrases_only_in_premise() {
        assert_eq!(reason("A cat sat.", "No problem with that."), None);
        assert_eq!(
            reason("No problem, the cat sat.", "A cat."),
            Some("phrase:no problem".into())
        );
    }

    #[test]
    fn punctuation_rules() {
        assert_eq!(
            reason("Where is it?", "It is here."),
            Some(RULE_QUESTION.into())
        );
        assert_eq!(
            reason("What a day!", "It was a day."),
            Some(RULE_EXCLAMATION.into())
        );
        assert_eq!(
            reason("The shop opened early It was busy.", "A shop."),
            Some(RULE_RUN_ON.into())
        );
        assert_eq!(reason("Yesterday I went out.", "Someone went out."), None);
        assert_eq!(
            reason("A man waits.", "He left Then he came back."),
            Some(RULE_RUN_ON.into())
        );
    }

    #[test]
    fn report_accounts_for_everything() {
        let input = vec![
            pair("Sure! ok.", "x."),
            pair("Fine.", "neutral thing."),
            pair("Fine.", "Good."),
        ];
        let (kept, report) = filter_generated(input, &FilterRules::default());
        assert_eq!(kept.len(), 1);
        assert_eq!(report.kept + report.dropped, 3);
        assert_eq!(report.reasons["phrase:sure!"], 1);
        assert_eq!(report.reasons["word:neutral"], 1);
        assert_eq!(report.scope["phrase"], "premise");
    }

    #[test]
    fn bad_rule_line() {
        assert!(FilterRules::parse("word:x\nbogus\n").is_err());
    }

    proptest! {
        #[test]
        fn idempotent(texts in proptest::collection::vec(("[A-Za-z !?.]{0,30}", "[A-Za-z !?.]{0,30}"), 0..20)) {
            let rules = FilterRules::default();
            let input: Vec<_> = texts.iter().map(|(p, h)| pair(p, h)).collect();
            let (once, _) = filter_generated(input, &rules);
            let (twice, report) = filter_generated(once.clone(), &rules);
            prop_assert_eq!(&once, &twice);
            prop_assert_eq!(report.dropped, 0);
        }
    }
}
