use std::collections::{HashMap, HashSet};

use serde::{Deserialize, Serialize};

use super::instance::{histogram, Dataset, NliInstance};
use super::label::Label;
use crate::error::{Error, Result};

/// Instances entering the training set (`up`) matched per class by instances
/// leaving it (`down_ids`). Serialized as the audit record of a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SwapPlan {
    pub method: String,
    pub seed: u64,
    /// Per-class cap the plan was built under.
    pub k: usize,
    #[serde(default)]
    pub config_digest: String,
    /// Prompt template behind the predictions or scores the plan ranked on.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub template_id: Option<String>,
    pub up: Vec<NliInstance>,
    pub down_ids: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

impl SwapPlan {
    pub fn up_histogram(&self) -> [usize; 3] {
        histogram(&self.up)
    }

    /// Per-class counts of the removed instances, looked up in `init`.
    pub fn down_histogram(&self, init: &[NliInstance]) -> Result<[usize; 3]> {
        let by_id: HashMap<&str, &NliInstance> = init.iter().map(|i| (i.id.as_str(), i)).collect();
        let mut h = [0usize; 3];
        for id in &self.down_ids {
            let inst = by_id.get(id.as_str()).ok_or_else(|| {
                Error::Invariant(format!("down id {id} is not in the initial set"))
            })?;
            let label = inst
                .label
                .ok_or_else(|| Error::Invariant(format!("down instance {id} is unlabelled")))?;
            h[label.index()] += 1;
        }
        Ok(h)
    }

    /// Checks every plan invariant against the initial training instances and
    /// names the first violated constraint.
    pub fn validate(&self, init: &[NliInstance]) -> Result<()> {
        let init_ids: HashSet<&str> = init.iter().map(|i| i.id.as_str()).collect();

        let mut up_ids = HashSet::with_capacity(self.up.len());
        for inst in &self.up {
            if inst.label.is_none() {
                return Err(Error::Invariant(format!(
                    "up instance {} is unlabelled",
                    inst.id
                )));
            }
            if init_ids.contains(inst.id.as_str()) {
                return Err(Error::Invariant(format!(
                    "up instance {} already belongs to the initial set",
                    inst.id
                )));
            }
            if !up_ids.insert(inst.id.as_str()) {
                return Err(Error::Invariant(format!("up id {} appears twice", inst.id)));
            }
        }

        let mut down_seen = HashSet::with_capacity(self.down_ids.len());
        for id in &self.down_ids {
            if !down_seen.insert(id.as_str()) {
                return Err(Error::Invariant(format!("down id {id} appears twice")));
            }
        }

        let up = self.up_histogram();
        let down = self.down_histogram(init)?;
        for label in Label::ALL {
            let (u, d) = (up[label.index()], down[label.index()]);
            if u != d {
                return Err(Error::Invariant(format!(
                    "class {label}: {u} added but {d} removed"
                )));
            }
            if u > self.k {
                return Err(Error::Invariant(format!(
                    "class {label}: {u} swapped exceeds cap {}",
                    self.k
                )));
            }
        }
        Ok(())
    }
}

/// Removes `down_ids` from `init` and appends `up`: survivors keep their order
/// and additions follow in plan order.
pub fn apply_swap(init: &Dataset, plan: &SwapPlan) -> Result<Dataset> {
    plan.validate(&init.instances)?;
    let down: HashSet<&str> = plan.down_ids.iter().map(String::as_str).collect();
    let mut instances: Vec<NliInstance> = init
        .instances
        .iter()
        .filter(|i| !down.contains(i.id.as_str()))
        .cloned()
        .collect();
    instances.extend(plan.up.iter().cloned());
    Dataset::new(
        format!("{}+{}", init.name, plan.method),
        init.kind,
        instances,
    )
}
