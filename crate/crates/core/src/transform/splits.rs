use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::domain::Dataset;

pub const SPLIT_META_KEY: &str = "split";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SplitTag {
    Hard,
    Ambiguous,
    Easy,
}

impl SplitTag {
    pub fn as_str(self) -> &'static str {
        match self {
            SplitTag::Hard => "hard",
            SplitTag::Ambiguous => "ambiguous",
            SplitTag::Easy => "easy",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TagEvent {
    pub id: String,
    pub previous: Option<String>,
    pub tag: SplitTag,
}

/// Running record of tag assignments across successive `tag_splits` calls.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaggingLog {
    pub events: Vec<TagEvent>,
    /// Ids named in a split map but absent from the dataset.
    pub missing: usize,
}

impl TaggingLog {
    pub fn overwrites(&self) -> impl Iterator<Item = &TagEvent> {
        self.events
            .iter()
            .filter(|e| e.previous.as_deref().is_some_and(|p| p != e.tag.as_str()))
    }
}

/// Records difficulty tags in instance metadata under `split`. Later calls
/// overwrite earlier tags for the same id.
pub fn tag_splits(
    mut d: Dataset,
    split_map: &BTreeMap<String, SplitTag>,
    log: &mut TaggingLog,
) -> Dataset {
    let mut found = 0;
    for inst in &mut d.instances {
        if let Some(tag) = split_map.get(&inst.id) {
            found += 1;
            let previous = inst.meta.insert(SPLIT_META_KEY.into(), tag.as_str().into());
            log.events.push(TagEvent {
                id: inst.id.clone(),
                previous,
                tag: *tag,
            });
        }
    }
    let missing = split_map.len() - found;
    if missing > 0 {
        log::warn!("{missing} split id(s) not found in dataset {}", d.name);
        log.missing += missing;
    }
    d
}
