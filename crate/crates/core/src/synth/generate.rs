use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::catalog::DomainCatalog;
use super::strategy::{GenStrategy, StrategyKind};
use super::{META_DOMAIN, META_INTENDED_LABEL, META_STRATEGY, META_TEMPLATE_ID};
use crate::domain::{Label, NliInstance};
use crate::error::{Error, Result};
use crate::ingest::{filter_generated, FilterReport, FilterRules};
use crate::modelgate::{Gateway, ModelHandle, PromptConfig};

/// Share of requested draws that may fail before a batch is cut short.
pub const SKIP_BUDGET_FRACTION: f64 = 0.10;

pub const DEFAULT_GENERATION_TEMPERATURE: f64 = 1.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratedBatch {
    pub instances: Vec<NliInstance>,
    pub filter: FilterReport,
    /// Draws abandoned after provider failures.
    pub skipped: usize,
    /// Set when failures exceeded the skip budget and the batch stopped early.
    pub partial: bool,
}

/// What to generate: strategy, volume, sampling temperature and seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationSpec {
    pub strategy: GenStrategy,
    pub target_per_class: usize,
    pub temperature: f64,
    pub seed: u64,
}

impl GenerationSpec {
    pub fn new(kind: StrategyKind, target_per_class: usize, seed: u64) -> Self {
        Self {
            strategy: GenStrategy::new(kind),
            target_per_class,
            temperature: DEFAULT_GENERATION_TEMPERATURE,
            seed,
        }
    }
}

struct Draw<'a> {
    gw: &'a Gateway,
    handle: &'a ModelHandle,
    spec: &'a GenerationSpec,
    catalog: &'a DomainCatalog,
    cfg: PromptConfig,
    start: usize,
}

fn draw_one(ctx: &Draw<'_>, j: usize) -> Result<NliInstance> {
    let Draw {
        gw,
        handle,
        spec,
        catalog,
        ref cfg,
        start,
    } = *ctx;
    let (strategy, seed) = (&spec.strategy, spec.seed);
    let label = Label::from_index(j % 3).expect("class index");
    let round = j / 3;
    let domain = catalog.cycle(start + j);
    let nonce = format!("draw:{seed}:{j}");
    let premise_prompt = gw.templates().render(
        "premise",
        &[
            ("directive", strategy.length.directive()),
            ("domain", domain),
        ],
    )?;
    let premise = gw
        .generate(handle, &premise_prompt, cfg, Some(&nonce))?
        .trim()
        .to_string();
    let template_id = strategy.template_for(label, round);
    let hyp_prompt = gw
        .templates()
        .render(template_id, &[("premise", &premise)])?;
    let hypothesis = gw
        .generate(handle, &hyp_prompt, cfg, Some(&nonce))?
        .trim()
        .to_string();
    Ok(NliInstance::new(
        format!("{}:{seed}:{j}", strategy.kind),
        premise,
        hypothesis,
        Some(label),
        strategy.kind.as_str(),
    )
    .with_meta(META_DOMAIN, domain)
    .with_meta(META_INTENDED_LABEL, label.as_str())
    .with_meta(META_STRATEGY, strategy.kind.as_str())
    .with_meta(META_TEMPLATE_ID, template_id))
}

/// Generates `target_per_class` draws of every class, cycling domains from a
/// seeded start, and filters the outputs. Draw `j` targets class `j mod 3`.
pub fn generate_batch(
    gw: &Gateway,
    handle: &ModelHandle,
    spec: &GenerationSpec,
    catalog: &DomainCatalog,
    rules: &FilterRules,
) -> Result<GeneratedBatch> {
    let strategy = &spec.strategy;
    if spec.target_per_class == 0 {
        return Err(Error::Config("target per class must be at least 1".into()));
    }
    if strategy.kind == StrategyKind::DomainLabel {
        return Err(Error::Config(
            "domain_label labels an existing corpus; use label_unlabelled".into(),
        ));
    }
    strategy.check()?;
    let start = ChaCha8Rng::seed_from_u64(spec.seed).random_range(0..catalog.len());
    let ctx = Draw {
        gw,
        handle,
        spec,
        catalog,
        cfg: PromptConfig::generation(spec.temperature),
        start,
    };
    let draws: Vec<usize> = (0..3 * spec.target_per_class).collect();
    let results = gw.map_bounded(&draws, |&j| draw_one(&ctx, j));

    let budget = (SKIP_BUDGET_FRACTION * draws.len() as f64).floor() as usize;
    let mut produced = Vec::with_capacity(draws.len());
    let mut skipped = 0;
    let mut partial = false;
    for (j, r) in results.into_iter().enumerate() {
        match r {
            Ok(inst) => produced.push(inst),
            Err(e) if e.class() == crate::ErrorClass::Provider => {
                log::warn!("draw {j} skipped: {e}");
                skipped += 1;
                if skipped > budget {
                    log::warn!("skip budget of {budget} exceeded; batch cut short at draw {j}");
                    partial = true;
                    break;
                }
            }
            Err(e) => return Err(e),
        }
    }
    let (instances, filter) = filter_generated(produced, rules);
    for inst in &instances {
        super::check_provenance(inst, false)?;
    }
    Ok(GeneratedBatch {
        instances,
        filter,
        skipped,
        partial,
    })
}
