use serde::{Deserialize, Serialize};

use crate::domain::Label;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StrategyKind {
    ShortSimple,
    LongSimple,
    LongComplex,
    /// Model-labelled external text; no generation prompts.
    DomainLabel,
}

impl StrategyKind {
    pub const ALL: [StrategyKind; 4] = [
        StrategyKind::ShortSimple,
        StrategyKind::LongSimple,
        StrategyKind::LongComplex,
        StrategyKind::DomainLabel,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            StrategyKind::ShortSimple => "short_simple",
            StrategyKind::LongSimple => "long_simple",
            StrategyKind::LongComplex => "long_complex",
            StrategyKind::DomainLabel => "domain_label",
        }
    }
}

impl std::fmt::Display for StrategyKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for StrategyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        StrategyKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown generation strategy {s:?}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PremiseLength {
    OneSentence,
    FourSentences,
}

impl PremiseLength {
    pub fn directive(self) -> &'static str {
        match self {
            PremiseLength::OneSentence => "Provide a single sentence",
            PremiseLength::FourSentences => "Provide an output with four sentences",
        }
    }
}

/// Premise length plus the hypothesis template ids for each class.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GenStrategy {
    pub kind: StrategyKind,
    pub length: PremiseLength,
    /// Template ids indexed by class; draws cycle through each class's list.
    pub templates: [Vec<String>; 3],
}

impl GenStrategy {
    pub fn new(kind: StrategyKind) -> Self {
        let simple = || Label::ALL.map(|l| vec![format!("hyp_simple_{l}")]);
        let (length, templates) = match kind {
            StrategyKind::ShortSimple => (PremiseLength::OneSentence, simple()),
            StrategyKind::LongSimple => (PremiseLength::FourSentences, simple()),
            StrategyKind::LongComplex => (
                PremiseLength::FourSentences,
                Label::ALL
                    .map(|l| vec![format!("hyp_complex_{l}_1"), format!("hyp_complex_{l}_2")]),
            ),
            StrategyKind::DomainLabel => (PremiseLength::OneSentence, Default::default()),
        };
        Self {
            kind,
            length,
            templates,
        }
    }

    pub fn check(&self) -> Result<()> {
        let counts = self.templates.iter().map(Vec::len).collect::<Vec<_>>();
        match self.kind {
            StrategyKind::DomainLabel => Ok(()),
            StrategyKind::LongComplex if counts != [2, 2, 2] => Err(Error::Config(format!(
                "long_complex needs two templates per class, found {counts:?}"
            ))),
            _ if counts.contains(&0) => Err(Error::Config(format!(
                "{} lacks a template for some class",
                self.kind
            ))),
            _ => Ok(()),
        }
    }

    /// Template for the `round`-th draw of `label`.
    pub fn template_for(&self, label: Label, round: usize) -> &str {
        let list = &self.templates[label.index()];
        &list[round % list.len()]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn long_complex_has_six_templates() {
        let s = GenStrategy::new(StrategyKind::LongComplex);
        assert!(s.check().is_ok());
        assert_eq!(s.templates.iter().map(Vec::len).sum::<usize>(), 6);
        assert_eq!(
            s.template_for(Label::Contradiction, 0),
            "hyp_complex_contradiction_1"
        );
        assert_eq!(
            s.template_for(Label::Contradiction, 1),
            "hyp_complex_contradiction_2"
        );
        assert_eq!(
            s.template_for(Label::Contradiction, 2),
            "hyp_complex_contradiction_1"
        );
        let mut broken = s.clone();
        broken.templates[0].pop();
        assert!(broken.check().is_err());
    }

    #[test]
    fn lengths_follow_strategy() {
        assert_eq!(
            GenStrategy::new(StrategyKind::ShortSimple)
                .length
                .directive(),
            "Provide a single sentence"
        );
        assert_eq!(
            GenStrategy::new(StrategyKind::LongSimple)
                .length
                .directive(),
            "Provide an output with four sentences"
        );
        assert_eq!(
            "long_complex".parse::<StrategyKind>().unwrap(),
            StrategyKind::LongComplex
        );
    }
}
