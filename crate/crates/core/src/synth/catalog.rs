use std::collections::HashSet;
use std::path::Path;

use crate::error::{Error, Result};

pub const DOMAINS: &str = include_str!("../../assets/domains.txt");

/// Size of the bundled catalog.
pub const DOMAIN_COUNT: usize = 51;

/// Ordered domain phrases that complete a premise-generation prompt.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DomainCatalog {
    domains: Vec<String>,
}

impl DomainCatalog {
    /// One phrase per line; blank lines are ignored.
    pub fn parse(text: &str) -> Result<Self> {
        let domains: Vec<String> = text
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty())
            .map(str::to_string)
            .collect();
        if domains.is_empty() {
            return Err(Error::Config("domain catalog is empty".into()));
        }
        let mut seen = HashSet::new();
        if let Some(dup) = domains.iter().find(|d| !seen.insert(d.as_str())) {
            return Err(Error::Config(format!("domain {dup:?} listed twice")));
        }
        Ok(Self { domains })
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn len(&self) -> usize {
        self.domains.len()
    }

    pub fn is_empty(&self) -> bool {
        self.domains.is_empty()
    }

    /// Domain at position `i`, wrapping around the catalog.
    pub fn cycle(&self, i: usize) -> &str {
        &self.domains[i % self.domains.len()]
    }

    pub fn iter(&self) -> impl Iterator<Item = &str> {
        self.domains.iter().map(String::as_str)
    }
}

impl Default for DomainCatalog {
    fn default() -> Self {
        Self::parse(DOMAINS).expect("bundled domain catalog parses")
    }
}
