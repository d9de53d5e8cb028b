use serde::Serialize;

use crate::digest::json_digest;
use crate::domain::{Budget, Label, NliInstance, SwapPlan};
use crate::error::Result;
use crate::select::{choose_down, DownArtifacts, DownStrategy};

#[derive(Serialize)]
struct PlanKey<'a> {
    method: &'a str,
    k: usize,
    seed: u64,
}

/// Swaps up to `K` validated generated instances per class into the initial
/// set, removing the same number of each class at random.
pub fn build_generation_plan(
    method: &str,
    init: &[NliInstance],
    generated: &[NliInstance],
    budget: &Budget,
    seed: u64,
) -> Result<SwapPlan> {
    let k = budget.k;
    let (mut up_rng, mut down_rng) = crate::select::rank::streams(seed);
    let classes = crate::select::rank::by_class(crate::select::rank::labelled(generated));
    let mut up = Vec::new();
    let mut warnings = Vec::new();
    for label in Label::ALL {
        let picked = crate::select::rank::draw(&classes[label.index()], k, &mut up_rng);
        if picked.len() < k {
            let msg = format!(
                "class {label}: {} of {k} generated instances available",
                picked.len()
            );
            log::warn!("{msg}");
            warnings.push(msg);
        }
        up.extend(picked.into_iter().cloned());
    }
    let need = crate::domain::histogram(&up);
    let down_ids = choose_down(
        init,
        need,
        DownStrategy::Random,
        DownArtifacts::default(),
        &[],
        &mut down_rng,
    )?;
    let plan = SwapPlan {
        method: method.to_string(),
        seed,
        k,
        config_digest: json_digest(&PlanKey { method, k, seed }),
        template_id: None,
        up,
        down_ids,
        warnings,
    };
    plan.validate(init)?;
    Ok(plan)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn insts(prefix: &str, counts: [usize; 3]) -> Vec<NliInstance> {
        let mut out = Vec::new();
        for label in Label::ALL {
            for i in 0..counts[label.index()] {
                out.push(NliInstance::new(
                    format!("{prefix}{label}{i}"),
                    "p",
                    "h",
                    Some(label),
                    "gen",
                ));
            }
        }
        out
    }

    #[test]
    fn full_supply_fills_budget() {
        let init = insts("i", [3400, 3300, 3300]);
        let generated = insts("g", [600, 600, 600]);
        let budget = Budget::new(10_000, 0.05).unwrap();
        let plan = build_generation_plan("long_complex", &init, &generated, &budget, 1).unwrap();
        assert_eq!(plan.up.len(), 1500);
        assert_eq!(plan.down_ids.len(), 1500);
        assert_eq!(
            plan,
            build_generation_plan("long_complex", &init, &generated, &budget, 1).unwrap()
        );
    }

    #[test]
    fn shortfall_shrinks_matched_down() {
        let init = insts("i", [3400, 3300, 3300]);
        let generated = insts("g", [600, 600, 400]);
        let budget = Budget::new(10_000, 0.05).unwrap();
        let plan = build_generation_plan("long_complex", &init, &generated, &budget, 1).unwrap();
        assert_eq!(plan.up_histogram(), [500, 500, 400]);
        assert_eq!(plan.down_histogram(&init).unwrap(), [500, 500, 400]);
        assert_eq!(plan.warnings.len(), 1);
    }
}
