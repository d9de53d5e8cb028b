//! Stage orchestration over a run directory.

use std::cell::{OnceCell, RefCell};
use std::collections::BTreeMap;
use std::path::PathBuf;
use std::sync::Arc;
use std::time::{Duration, Instant};

use anyhow::Context;
use nlicurate::digest::{file_digest, json_digest};
use nlicurate::domain::{apply_swap, histogram, Dataset, NliInstance, Partition, SwapPlan};
use nlicurate::eval::{
    aggregate, bootstrap_compare, categorize, score, Categorization, RunResult, ScoreMode,
};
use nlicurate::ingest::{draw_partition, save_jsonl, FilterRules, Registry};
use nlicurate::modelgate::{
    FinetuneJob, FinetuneScript, Gateway, JobState, JobStore, MockProvider, ModelHandle,
    OpenAiCompatible, PredictionRecord, PromptConfig, Provider, ResponseCache, ScoreOutcome,
    TemplateStore,
};
use nlicurate::select::{
    select, DownArtifacts, DownStrategy, SelectionConfig, SelectionInputs, SelectionMethod,
};
use nlicurate::synth::{
    build_generation_plan, generate_batch, label_unlabelled, validate_unanimity, DomainCatalog,
    GenStrategy, GenerationSpec, StrategyKind,
};
use nlicurate::{Error, Result};
use serde::Serialize;
use serde_json::{json, Value};

use crate::artifacts::{ArtifactDir, ScoreRecord};
use crate::config::{Config, ProviderKind};
use crate::export::{export_finetune, FINETUNE_TEMPLATE};
use crate::manifest::{RunManifest, StageRecord, StageStatus};

pub const MANIFEST: &str = "manifest.json";
pub const REGISTRY: &str = "registry.json";
pub const CACHE_FILE: &str = "responses.jsonl";

/// Which trained system a stage acts on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum System {
    Baseline,
    Curated,
}

impl System {
    pub fn as_str(self) -> &'static str {
        match self {
            System::Baseline => "baseline",
            System::Curated => "curated",
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub run_id: Option<String>,
    pub seed_index: Option<usize>,
    pub offline: bool,
    pub cache_dir: Option<PathBuf>,
}

mod paths {
    pub fn ingest_report() -> String {
        "reports/ingest.json".into()
    }
    pub fn partition(s: u64) -> String {
        format!("partitions/seed-{s}.json")
    }
    pub fn export(sys: &str, s: u64) -> String {
        format!("exports/{sys}-seed-{s}.jsonl")
    }
    pub fn jobs(sys: &str, s: u64) -> String {
        format!("exports/finetune-{sys}-seed-{s}.json")
    }
    pub fn predictions(set: &str, s: u64) -> String {
        format!("predictions/{set}-seed-{s}.jsonl")
    }
    pub fn scores(set: &str, s: u64) -> String {
        format!("predictions/scores-{set}-seed-{s}.jsonl")
    }
    pub fn generated(s: u64) -> String {
        format!("pools/generated-seed-{s}.jsonl")
    }
    pub fn generate_report(s: u64) -> String {
        format!("reports/generate-seed-{s}.json")
    }
    pub fn validated(s: u64) -> String {
        format!("pools/validated-seed-{s}.jsonl")
    }
    pub fn validation_report(s: u64) -> String {
        format!("reports/validation-seed-{s}.json")
    }
    pub fn plan(s: u64) -> String {
        format!("plans/seed-{s}.json")
    }
    pub fn train(s: u64) -> String {
        format!("pools/train-seed-{s}.jsonl")
    }
    pub fn eval_predictions(sys: &str, dataset: &str, s: u64) -> String {
        format!("predictions/eval-{sys}-{dataset}-seed-{s}.jsonl")
    }
    pub fn results(sys: &str, s: u64) -> String {
        format!("reports/results-{sys}-seed-{s}.json")
    }
    pub fn report_json() -> String {
        "reports/report.json".into()
    }
    pub fn report_txt() -> String {
        "reports/report.txt".into()
    }
}

/// Named input digests of a stage.
#[derive(Debug, Default)]
struct Inputs(BTreeMap<String, String>);

impl Inputs {
    fn value<T: Serialize + ?Sized>(mut self, name: &str, v: &T) -> Self {
        self.0.insert(name.to_string(), json_digest(v));
        self
    }

    fn artifact(mut self, dir: &ArtifactDir, rel: &str) -> Result<Self> {
        let digest = file_digest(&dir.path(rel)).map_err(|e| match e.kind() {
            std::io::ErrorKind::NotFound => Error::Validation(format!(
                "missing artifact {rel}; run the stage that produces it first"
            )),
            _ => Error::Io(e),
        })?;
        self.0.insert(rel.to_string(), digest);
        Ok(self)
    }
}

pub struct Pipeline {
    cfg: Config,
    opts: RunOptions,
    dir: ArtifactDir,
    templates: TemplateStore,
    base: ModelHandle,
    gateway: OnceCell<Gateway>,
    manifest: RunManifest,
    calls_seen: u64,
    datasets: RefCell<BTreeMap<String, Arc<Dataset>>>,
}

impl Pipeline {
    pub fn open(cfg: Config, opts: RunOptions) -> Result<Self> {
        let mut cfg = cfg;
        if let Some(id) = &opts.run_id {
            cfg.run_id = id.clone();
            cfg.check()?;
        }
        if let Some(i) = opts.seed_index {
            if i >= cfg.seeds.len() {
                return Err(Error::Config(format!(
                    "seed index {i} out of range for {} seed(s)",
                    cfg.seeds.len()
                )));
            }
        }
        let dir = ArtifactDir::new(cfg.run_dir());
        std::fs::create_dir_all(dir.root())?;
        let templates = match &cfg.provider.templates_dir {
            Some(d) => TemplateStore::with_overrides(d)?,
            None => TemplateStore::default(),
        };
        let mut base = cfg.provider.base_handle();
        if opts.offline {
            base.provider = "mock".into();
        }
        let manifest =
            RunManifest::load_or_new(&dir.path(MANIFEST), &cfg.run_id, &json_digest(&cfg))?;
        Ok(Self {
            cfg,
            opts,
            dir,
            templates,
            base,
            gateway: OnceCell::new(),
            manifest,
            calls_seen: 0,
            datasets: RefCell::new(BTreeMap::new()),
        })
    }

    pub fn config(&self) -> &Config {
        &self.cfg
    }

    pub fn config_mut(&mut self) -> &mut Config {
        &mut self.cfg
    }

    pub fn run_dir(&self) -> PathBuf {
        self.dir.root().to_path_buf()
    }

    pub fn manifest(&self) -> &RunManifest {
        &self.manifest
    }

    /// Seeds selected by `--seed-index`, or all configured seeds.
    pub fn seeds(&self) -> Vec<u64> {
        match self.opts.seed_index {
            Some(i) => vec![self.cfg.seeds[i]],
            None => self.cfg.seeds.clone(),
        }
    }

    fn mock(&self) -> bool {
        self.opts.offline || self.cfg.provider.kind == ProviderKind::Mock
    }

    fn provider_fragment(&self) -> Value {
        json!({
            "handle": self.base,
            "mock_seed": self.mock().then_some(self.cfg.provider.mock_seed),
            "base_url": (!self.mock()).then_some(&self.cfg.provider.base_url),
        })
    }

    fn gateway(&self) -> Result<&Gateway> {
        if let Some(gw) = self.gateway.get() {
            return Ok(gw);
        }
        let provider: Arc<dyn Provider> = if self.mock() {
            Arc::new(
                MockProvider::nli(self.cfg.provider.mock_seed)
                    .with_finetune_script(FinetuneScript::default()),
            )
        } else {
            Arc::new(OpenAiCompatible::new(
                self.cfg.provider.id(),
                &self.cfg.provider.base_url,
                Some(&self.cfg.provider.api_key_env),
            )?)
        };
        let cache_path = match &self.opts.cache_dir {
            Some(d) => d.join(CACHE_FILE),
            None => self.dir.path("cache").join(CACHE_FILE),
        };
        if let Some(parent) = cache_path.parent() {
            std::fs::create_dir_all(parent)?;
        }
        let gw = Gateway::new(
            provider,
            ResponseCache::open(&cache_path)?,
            self.cfg.provider.gateway_config(),
        )?
        .with_templates(self.templates.clone());
        let _ = self.gateway.set(gw);
        Ok(self.gateway.get().expect("gateway initialised"))
    }

    fn template_digest(&self, ids: &[&str]) -> Result<String> {
        let bodies = ids
            .iter()
            .map(|id| self.templates.get(id).map(|b| (*id, b)))
            .collect::<Result<Vec<_>>>()?;
        Ok(json_digest(&bodies))
    }

    fn save_manifest(&self) -> Result<()> {
        self.manifest.save(&self.dir.path(MANIFEST))
    }

    /// Runs `body` unless the stage is fresh, then records its outputs.
    fn stage<F>(
        &mut self,
        name: &str,
        inputs: Inputs,
        outputs: Vec<String>,
        body: F,
    ) -> anyhow::Result<StageStatus>
    where
        F: FnOnce(&Self) -> Result<()>,
    {
        let inputs = inputs.0;
        if self
            .manifest
            .is_fresh(name, &inputs, self.dir.root(), &outputs)
        {
            log::info!("{name}: cached");
            let rec = self
                .manifest
                .stages
                .get_mut(name)
                .expect("fresh stage has a record");
            rec.status = StageStatus::Cached;
            rec.wall_ms = 0;
            self.save_manifest()?;
            return Ok(StageStatus::Cached);
        }
        log::info!("{name}: running");
        let start = Instant::now();
        let result = body(self);
        let calls = self.gateway.get().map_or(0, Gateway::transport_calls);
        self.manifest.usage.transport_calls += calls - self.calls_seen;
        self.calls_seen = calls;
        let wall_ms = start.elapsed().as_millis() as u64;
        let mut record = StageRecord {
            stage: name.to_string(),
            status: StageStatus::Succeeded,
            inputs,
            outputs: BTreeMap::new(),
            wall_ms,
            error: None,
        };
        let outcome = result.and_then(|()| {
            for rel in &outputs {
                record
                    .outputs
                    .insert(rel.clone(), file_digest(&self.dir.path(rel))?);
            }
            Ok(())
        });
        if let Err(e) = &outcome {
            record.status = StageStatus::Failed;
            record.error = Some(e.to_string());
        }
        self.manifest.stages.insert(name.to_string(), record);
        self.save_manifest()?;
        outcome.with_context(|| format!("stage {name} failed"))?;
        Ok(StageStatus::Succeeded)
    }

    fn registry(&self) -> Result<Registry> {
        self.dir.read_json(REGISTRY)
    }

    fn dataset(&self, name: &str) -> Result<Arc<Dataset>> {
        if let Some(d) = self.datasets.borrow().get(name) {
            return Ok(d.clone());
        }
        let loaded = Arc::new(self.registry()?.load_named(name)?.dataset);
        self.datasets
            .borrow_mut()
            .insert(name.to_string(), loaded.clone());
        Ok(loaded)
    }

    fn partition(&self, seed: u64) -> Result<Partition> {
        self.dir.read_json(&paths::partition(seed))
    }

    /// Initial set, candidate pool, and corpus minus the initial set.
    fn split(&self, seed: u64) -> Result<(Dataset, Vec<NliInstance>, Vec<NliInstance>)> {
        let corpus = self.dataset(&self.cfg.train)?;
        let part = self.partition(seed)?;
        let init = corpus.subset(format!("init-seed-{seed}"), &part.init_ids)?;
        let pool = corpus.subset("pool", &part.potential_ids)?.instances;
        let init_ids: std::collections::HashSet<&str> =
            part.init_ids.iter().map(String::as_str).collect();
        let source = corpus
            .instances
            .iter()
            .filter(|i| !init_ids.contains(i.id.as_str()))
            .cloned()
            .collect();
        Ok((init, pool, source))
    }

    fn eval_names(&self) -> Vec<String> {
        let mut names: Vec<String> = Vec::new();
        for n in self
            .cfg
            .eval
            .in_distribution
            .iter()
            .chain(&self.cfg.eval.datasets)
        {
            if !names.contains(n) {
                names.push(n.clone());
            }
        }
        names
    }

    fn selection_for(&self, seed: u64) -> Option<SelectionConfig> {
        self.cfg.selection.clone().map(|mut sel| {
            sel.seed = seed;
            if sel.template_id.is_none() {
                sel.template_id = if sel.method == SelectionMethod::DifficultyScore {
                    Some(
                        sel.score_dims
                            .iter()
                            .map(|d| d.template_id())
                            .collect::<Vec<_>>()
                            .join("+"),
                    )
                } else if sel.method.needs_predictions() {
                    Some(FINETUNE_TEMPLATE.into())
                } else {
                    None
                };
            }
            sel
        })
    }

    fn has_curated(&self) -> bool {
        self.cfg.selection.is_some() || self.cfg.generation.is_some()
    }

    fn system_name(&self, sys: System) -> String {
        match sys {
            System::Baseline => "baseline".into(),
            System::Curated => self.cfg.curated_name(),
        }
    }

    /// Refuses entropy-based selection when the provider exposes no probabilities.
    fn capability_gate(&self) -> Result<()> {
        if let Some(sel) = &self.cfg.selection {
            if sel.method.uses_entropy() || sel.down_strategy == DownStrategy::LowestEntropy {
                self.base.require_probabilities()?;
            }
        }
        Ok(())
    }

    fn needs_predictions(&self) -> (bool, bool) {
        match &self.cfg.selection {
            Some(sel) => (
                sel.method.needs_predictions(),
                sel.down_strategy == DownStrategy::LowestEntropy,
            ),
            None => (false, false),
        }
    }

    fn needs_scores(&self) -> (bool, bool) {
        match &self.cfg.selection {
            Some(sel) => (
                sel.method == SelectionMethod::DifficultyScore,
                sel.down_strategy == DownStrategy::LowestScore,
            ),
            None => (false, false),
        }
    }

    /// Fine-tuned model recorded in a system's job store.
    fn finetuned(&self, sys: System, seed: u64) -> Result<ModelHandle> {
        let rel = paths::jobs(sys.as_str(), seed);
        if !self.dir.exists(&rel) {
            return Err(Error::Validation(format!(
                "missing artifact {rel}; run finetune first"
            )));
        }
        let store = JobStore::open(&self.dir.path(&rel))?;
        let job = store
            .jobs()
            .next()
            .ok_or_else(|| Error::Validation(format!("{rel} records no fine-tune job")))?;
        finished_model(job)
    }

    pub fn ingest(&mut self) -> anyhow::Result<StageStatus> {
        let mut inputs = Inputs::default().value("datasets", &self.cfg.datasets);
        for d in &self.cfg.datasets {
            let digest = file_digest(&d.path)
                .with_context(|| format!("dataset {} at {}", d.name, d.path.display()))?;
            inputs.0.insert(format!("file:{}", d.name), digest);
        }
        let outputs = vec![REGISTRY.to_string(), paths::ingest_report()];
        let status = self.stage("ingest", inputs, outputs, |p| {
            let mut registry = Registry::default();
            let mut report = Vec::new();
            for manifest in &p.cfg.datasets {
                let loaded = nlicurate::ingest::load_dataset(manifest)?;
                let d = &loaded.dataset;
                for inst in &d.instances {
                    inst.check_usable()?;
                }
                report.push(json!({
                    "name": d.name,
                    "split": manifest.split,
                    "format": manifest.format,
                    "instances": d.len(),
                    "histogram": d.histogram(),
                    "unlabelled": d.instances.iter().filter(|i| i.label.is_none()).count(),
                    "dropped_labels": loaded.dropped_labels,
                    "checksum": loaded.checksum,
                    "stale": loaded.stale,
                }));
                let mut m = manifest.clone();
                m.checksum = Some(loaded.checksum.clone());
                registry.datasets.push(m);
            }
            p.dir.write_json(REGISTRY, &registry)?;
            p.dir.write_json(&paths::ingest_report(), &report)
        })?;
        self.datasets.borrow_mut().clear();
        Ok(status)
    }

    pub fn partition_stage(&mut self, seed: u64) -> anyhow::Result<StageStatus> {
        let inputs = Inputs::default()
            .artifact(&self.dir, REGISTRY)?
            .value("config", &(&self.cfg.train, &self.cfg.budget, seed));
        self.stage(
            &format!("partition/seed-{seed}"),
            inputs,
            vec![paths::partition(seed)],
            |p| {
                let budget = p.cfg.budget.budget()?;
                let corpus = p.dataset(&p.cfg.train)?;
                let part = draw_partition(&corpus, &budget, seed)?;
                p.dir.write_json(&paths::partition(seed), &part)
            },
        )
    }

    pub fn export_stage(&mut self, sys: System, seed: u64) -> anyhow::Result<StageStatus> {
        let source = match sys {
            System::Baseline => paths::partition(seed),
            System::Curated => paths::train(seed),
        };
        let inputs = Inputs::default()
            .artifact(&self.dir, REGISTRY)?
            .artifact(&self.dir, &source)?
            .value("template", &self.template_digest(&[FINETUNE_TEMPLATE])?);
        let out = paths::export(sys.as_str(), seed);
        self.stage(
            &format!("export-finetune/{}/seed-{seed}", sys.as_str()),
            inputs,
            vec![out.clone()],
            |p| {
                let instances = match sys {
                    System::Baseline => p.split(seed)?.0.instances,
                    System::Curated => p.dir.read_jsonl(&paths::train(seed))?,
                };
                export_finetune(
                    &instances,
                    &p.templates,
                    FINETUNE_TEMPLATE,
                    &p.dir.path(&out),
                )
                .map(drop)
            },
        )
    }

    pub fn finetune_stage(&mut self, sys: System, seed: u64) -> anyhow::Result<StageStatus> {
        let export = paths::export(sys.as_str(), seed);
        let params = self.finetune_params(seed);
        let inputs = Inputs::default()
            .artifact(&self.dir, &export)?
            .value("provider", &self.provider_fragment())
            .value("params", &params);
        let out = paths::jobs(sys.as_str(), seed);
        self.stage(
            &format!("finetune/{}/seed-{seed}", sys.as_str()),
            inputs,
            vec![out.clone()],
            |p| {
                let gw = p.gateway()?;
                let store_path = p.dir.path(&out);
                let mut store = JobStore::open(&store_path)?;
                let digest = file_digest(&p.dir.path(&export))?;
                let job = gw.submit_finetune(
                    &mut store,
                    &p.base,
                    &p.dir.path(&export),
                    &digest,
                    &params,
                )?;
                let interval = if p.mock() {
                    Duration::ZERO
                } else {
                    Duration::from_secs_f64(p.cfg.finetune.poll_interval_secs)
                };
                let job = gw.wait_finetune(&mut store, &job, p.cfg.finetune.max_polls, interval)?;
                let stale: Vec<FinetuneJob> = store
                    .jobs()
                    .filter(|j| j.job_id != job.job_id)
                    .cloned()
                    .collect();
                if !stale.is_empty() {
                    let mut fresh = JobStore::default();
                    fresh.upsert(job.clone())?;
                    let mut body = serde_json::to_vec_pretty(&fresh)?;
                    body.push(b'\n');
                    std::fs::write(&store_path, body)?;
                }
                finished_model(&job).map(drop)
            },
        )
    }

    fn finetune_params(&self, seed: u64) -> BTreeMap<String, Value> {
        let mut params = self.cfg.finetune.params.clone();
        if self.cfg.finetune.pass_seed {
            params.insert("seed".into(), Value::from(seed));
        }
        params
    }

    pub fn predict_stage(&mut self, seed: u64) -> anyhow::Result<Option<StageStatus>> {
        self.capability_gate()?;
        let (pool, init) = self.needs_predictions();
        if !pool && !init {
            return Ok(None);
        }
        let prompt = PromptConfig::fine_tuned();
        let inputs = Inputs::default()
            .artifact(&self.dir, REGISTRY)?
            .artifact(&self.dir, &paths::partition(seed))?
            .artifact(&self.dir, &paths::jobs(System::Baseline.as_str(), seed))?
            .value(
                "prompt",
                &(
                    &prompt,
                    self.template_digest(&[FINETUNE_TEMPLATE])?,
                    pool,
                    init,
                ),
            );
        let mut outputs = Vec::new();
        if pool {
            outputs.push(paths::predictions("pool", seed));
        }
        if init {
            outputs.push(paths::predictions("init", seed));
        }
        let status = self.stage(&format!("predict/seed-{seed}"), inputs, outputs, |p| {
            let handle = p.finetuned(System::Baseline, seed)?;
            let (init_set, pool_set, _) = p.split(seed)?;
            let gw = p.gateway()?;
            for (wanted, set, instances) in [
                (pool, "pool", &pool_set),
                (init, "init", &init_set.instances),
            ] {
                if wanted {
                    let preds = gw
                        .classify_batch(&handle, instances, &prompt)
                        .into_iter()
                        .collect::<Result<Vec<PredictionRecord>>>()?;
                    p.dir.write_jsonl(&paths::predictions(set, seed), &preds)?;
                }
            }
            Ok(())
        })?;
        Ok(Some(status))
    }

    pub fn score_stage(&mut self, seed: u64) -> anyhow::Result<Option<StageStatus>> {
        let (pool, init) = self.needs_scores();
        if !pool && !init {
            return Ok(None);
        }
        let dims = self
            .cfg
            .selection
            .as_ref()
            .map(|s| s.score_dims.clone())
            .unwrap_or_default();
        let ids: Vec<String> = dims.iter().map(|d| d.template_id()).collect();
        let id_refs: Vec<&str> = ids.iter().map(String::as_str).collect();
        let inputs = Inputs::default()
            .artifact(&self.dir, REGISTRY)?
            .artifact(&self.dir, &paths::partition(seed))?
            .value("provider", &self.provider_fragment())
            .value(
                "scoring",
                &(
                    &dims,
                    self.template_digest(&id_refs)?,
                    self.cfg.provider.score_retries,
                    pool,
                    init,
                ),
            );
        let mut outputs = Vec::new();
        if pool {
            outputs.push(paths::scores("pool", seed));
        }
        if init {
            outputs.push(paths::scores("init", seed));
        }
        let status = self.stage(&format!("score/seed-{seed}"), inputs, outputs, |p| {
            let (init_set, pool_set, _) = p.split(seed)?;
            let gw = p.gateway()?;
            let base = &p.base;
            for (wanted, set, instances) in [
                (pool, "pool", &pool_set),
                (init, "init", &init_set.instances),
            ] {
                if wanted {
                    let rows = gw
                        .map_bounded(instances, |inst| {
                            gw.score_instance(base, inst, &dims)
                                .map(|outcome| ScoreRecord {
                                    instance_id: inst.id.clone(),
                                    outcome,
                                })
                        })
                        .into_iter()
                        .collect::<Result<Vec<_>>>()?;
                    p.dir.write_jsonl(&paths::scores(set, seed), &rows)?;
                }
            }
            Ok(())
        })?;
        Ok(Some(status))
    }

    fn generation_inputs(&self) -> Result<Inputs> {
        let g = self
            .cfg
            .generation
            .as_ref()
            .ok_or_else(|| Error::Config("no [generation] section".into()))?;
        let mut inputs = Inputs::default()
            .value("generation", g)
            .value("provider", &self.provider_fragment());
        for p in [&g.domains, &g.filter_rules].into_iter().flatten() {
            inputs
                .0
                .insert(format!("file:{}", p.display()), file_digest(p)?);
        }
        Ok(inputs)
    }

    fn filter_rules(&self) -> Result<FilterRules> {
        match self
            .cfg
            .generation
            .as_ref()
            .and_then(|g| g.filter_rules.as_ref())
        {
            Some(path) => FilterRules::from_file(path),
            None => Ok(FilterRules::default()),
        }
    }

    pub fn generate_stage(&mut self, seed: u64) -> anyhow::Result<StageStatus> {
        let g = self
            .cfg
            .generation
            .clone()
            .ok_or_else(|| Error::Config("no [generation] section".into()))?;
        let mut inputs = self.generation_inputs()?.value("seed", &seed);
        if g.strategy == StrategyKind::DomainLabel {
            inputs = inputs.artifact(&self.dir, REGISTRY)?.value(
                "prompt",
                &(
                    self.cfg.prompt.few_shot(),
                    self.template_digest(&["classify_few_shot"])?,
                ),
            );
        } else {
            let strategy = GenStrategy::new(g.strategy);
            let mut ids = vec!["premise"];
            for per_class in &strategy.templates {
                ids.extend(per_class.iter().map(String::as_str));
            }
            inputs = inputs.value("templates", &self.template_digest(&ids)?);
        }
        let outputs = vec![paths::generated(seed), paths::generate_report(seed)];
        self.stage(&format!("generate/seed-{seed}"), inputs, outputs, |p| {
            let gw = p.gateway()?;
            let rules = p.filter_rules()?;
            if g.strategy == StrategyKind::DomainLabel {
                let name = g.unlabelled.as_deref().expect("checked by config");
                let corpus = p.dataset(name)?.instances.clone();
                let labelled =
                    label_unlabelled(gw, &p.base, corpus, &p.cfg.prompt.few_shot(), &rules)?;
                p.dir
                    .write_jsonl(&paths::generated(seed), &labelled.instances)?;
                p.dir.write_json(
                    &paths::generate_report(seed),
                    &json!({
                        "strategy": g.strategy,
                        "instances": labelled.instances.len(),
                        "histogram": histogram(&labelled.instances),
                        "filter": labelled.filter,
                        "invalid": labelled.invalid,
                    }),
                )
            } else {
                let catalog = match &g.domains {
                    Some(path) => DomainCatalog::from_file(path)?,
                    None => DomainCatalog::default(),
                };
                let mut spec = GenerationSpec::new(g.strategy, g.target_per_class, seed);
                spec.temperature = g.temperature;
                let batch = generate_batch(gw, &p.base, &spec, &catalog, &rules)?;
                if batch.partial {
                    log::warn!(
                        "generation stopped early after {} provider failures",
                        batch.skipped
                    );
                }
                p.dir
                    .write_jsonl(&paths::generated(seed), &batch.instances)?;
                p.dir.write_json(
                    &paths::generate_report(seed),
                    &json!({
                        "strategy": g.strategy,
                        "instances": batch.instances.len(),
                        "histogram": histogram(&batch.instances),
                        "filter": batch.filter,
                        "skipped": batch.skipped,
                        "partial": batch.partial,
                    }),
                )
            }
        })
    }

    pub fn validate_stage(&mut self, seed: u64) -> anyhow::Result<Option<StageStatus>> {
        let g = self
            .cfg
            .generation
            .clone()
            .ok_or_else(|| Error::Config("no [generation] section".into()))?;
        if !g.validate {
            return Ok(None);
        }
        let prompt = PromptConfig {
            temperature: g.vote_temperature,
            ..self.cfg.prompt.few_shot()
        };
        let inputs = Inputs::default()
            .artifact(&self.dir, &paths::generated(seed))?
            .value("provider", &self.provider_fragment())
            .value(
                "votes",
                &(
                    &prompt,
                    g.votes,
                    self.template_digest(&["classify_few_shot"])?,
                ),
            );
        let outputs = vec![paths::validated(seed), paths::validation_report(seed)];
        let status = self.stage(&format!("validate/seed-{seed}"), inputs, outputs, |p| {
            let generated: Vec<NliInstance> = p.dir.read_jsonl(&paths::generated(seed))?;
            let outcome = validate_unanimity(p.gateway()?, &p.base, generated, &prompt, g.votes)?;
            p.dir.write_jsonl(&paths::validated(seed), &outcome.kept)?;
            p.dir.write_json(
                &paths::validation_report(seed),
                &json!({
                    "kept": outcome.kept.len(),
                    "histogram": histogram(&outcome.kept),
                    "discarded": outcome.discarded,
                    "unresolved": outcome.unresolved,
                    "verdicts": outcome.verdicts,
                }),
            )
        })?;
        Ok(Some(status))
    }

    pub fn select_stage(&mut self, seed: u64) -> anyhow::Result<StageStatus> {
        self.capability_gate()?;
        let mut inputs = Inputs::default()
            .artifact(&self.dir, REGISTRY)?
            .artifact(&self.dir, &paths::partition(seed))?
            .value("budget", &self.cfg.budget);
        let out = paths::plan(seed);
        if let Some(sel) = self.selection_for(seed) {
            inputs = inputs.value("selection", &sel);
            let (pp, ip) = self.needs_predictions();
            let (ps, is) = self.needs_scores();
            for (wanted, rel) in [
                (pp, paths::predictions("pool", seed)),
                (ip, paths::predictions("init", seed)),
                (ps, paths::scores("pool", seed)),
                (is, paths::scores("init", seed)),
            ] {
                if wanted {
                    inputs = inputs.artifact(&self.dir, &rel)?;
                }
            }
            self.stage(
                &format!("select/seed-{seed}"),
                inputs,
                vec![out.clone()],
                |p| {
                    let budget = p.cfg.budget.budget()?;
                    let (init, pool, source) = p.split(seed)?;
                    let read_preds = |set: &str| {
                        p.dir
                            .read_jsonl::<PredictionRecord>(&paths::predictions(set, seed))
                    };
                    let read_scores = |set: &str| -> Result<BTreeMap<String, ScoreOutcome>> {
                        Ok(p.dir
                            .read_jsonl::<ScoreRecord>(&paths::scores(set, seed))?
                            .into_iter()
                            .map(|r| (r.instance_id, r.outcome))
                            .collect())
                    };
                    let pool_preds = if pp { Some(read_preds("pool")?) } else { None };
                    let init_preds = if ip { Some(read_preds("init")?) } else { None };
                    let pool_scores = if ps { Some(read_scores("pool")?) } else { None };
                    let init_scores = if is { Some(read_scores("init")?) } else { None };
                    let inputs = SelectionInputs {
                        init: &init.instances,
                        pool: &pool,
                        source: &source,
                        predictions: pool_preds.as_deref(),
                        scores: pool_scores.as_ref(),
                        down: DownArtifacts {
                            predictions: init_preds.as_deref(),
                            scores: init_scores.as_ref(),
                        },
                    };
                    let plan = select(&sel, &budget, &inputs)?;
                    p.dir.write_json(&out, &plan)
                },
            )
        } else if let Some(g) = self.cfg.generation.clone() {
            let pool_rel = if g.validate {
                paths::validated(seed)
            } else {
                paths::generated(seed)
            };
            inputs = inputs
                .artifact(&self.dir, &pool_rel)?
                .value("strategy", &(g.strategy, seed));
            self.stage(
                &format!("select/seed-{seed}"),
                inputs,
                vec![out.clone()],
                |p| {
                    let budget = p.cfg.budget.budget()?;
                    let (init, _, _) = p.split(seed)?;
                    let generated: Vec<NliInstance> = p.dir.read_jsonl(&pool_rel)?;
                    let plan = build_generation_plan(
                        g.strategy.as_str(),
                        &init.instances,
                        &generated,
                        &budget,
                        seed,
                    )?;
                    p.dir.write_json(&out, &plan)
                },
            )
        } else {
            Err(
                Error::Config("configure [selection] or [generation] to build a plan".into())
                    .into(),
            )
        }
    }

    pub fn assemble_stage(&mut self, seed: u64) -> anyhow::Result<StageStatus> {
        let inputs = Inputs::default()
            .artifact(&self.dir, REGISTRY)?
            .artifact(&self.dir, &paths::partition(seed))?
            .artifact(&self.dir, &paths::plan(seed))?;
        let out = paths::train(seed);
        self.stage(
            &format!("assemble/seed-{seed}"),
            inputs,
            vec![out.clone()],
            |p| {
                let (init, _, _) = p.split(seed)?;
                let plan: SwapPlan = p.dir.read_json(&paths::plan(seed))?;
                let train = apply_swap(&init, &plan)?;
                let budget = p.cfg.budget.budget()?;
                if train.len() != budget.m || train.histogram() != init.histogram() {
                    return Err(Error::Invariant(format!(
                        "assembled set has {} instances and histogram {:?}, expected {} and {:?}",
                        train.len(),
                        train.histogram(),
                        budget.m,
                        init.histogram()
                    )));
                }
                save_jsonl(&train, &p.dir.path(&out))
            },
        )
    }

    pub fn evaluate_stage(&mut self, sys: System, seed: u64) -> anyhow::Result<StageStatus> {
        let names = self.eval_names();
        let prompt = PromptConfig::fine_tuned();
        let inputs = Inputs::default()
            .artifact(&self.dir, REGISTRY)?
            .artifact(&self.dir, &paths::jobs(sys.as_str(), seed))?
            .value(
                "eval",
                &(
                    &names,
                    &prompt,
                    self.template_digest(&[FINETUNE_TEMPLATE])?,
                    self.system_name(sys),
                ),
            );
        let mut outputs: Vec<String> = names
            .iter()
            .map(|d| paths::eval_predictions(sys.as_str(), d, seed))
            .collect();
        outputs.push(paths::results(sys.as_str(), seed));
        self.stage(
            &format!("evaluate/{}/seed-{seed}", sys.as_str()),
            inputs,
            outputs,
            |p| {
                let handle = p.finetuned(sys, seed)?;
                let gw = p.gateway()?;
                let system = p.system_name(sys);
                let mut results = Vec::new();
                for name in &names {
                    let data = p.dataset(name)?;
                    let preds = gw
                        .classify_batch(&handle, &data.instances, &prompt)
                        .into_iter()
                        .collect::<Result<Vec<PredictionRecord>>>()?;
                    p.dir
                        .write_jsonl(&paths::eval_predictions(sys.as_str(), name, seed), &preds)?;
                    results.push(score(&system, seed, &data, &preds, ScoreMode::Auto)?);
                }
                p.dir
                    .write_json(&paths::results(sys.as_str(), seed), &results)
            },
        )
    }

    fn collect_results(&self) -> Result<Vec<RunResult>> {
        let mut out = Vec::new();
        for sys in [System::Baseline, System::Curated] {
            for &seed in &self.cfg.seeds {
                let rel = paths::results(sys.as_str(), seed);
                if self.dir.exists(&rel) {
                    out.extend(self.dir.read_json::<Vec<RunResult>>(&rel)?);
                }
            }
        }
        Ok(out)
    }

    fn categories(&self, results: &[RunResult]) -> Result<Categorization> {
        let names = self.eval_names();
        let eval = &self.cfg.eval;
        let baseline: Vec<(String, f64)> = match &eval.baseline {
            Some(map) => names
                .iter()
                .map(|n| {
                    map.get(n).map(|&a| (n.clone(), a)).ok_or_else(|| {
                        Error::Config(format!("eval.baseline has no accuracy for {n}"))
                    })
                })
                .collect::<Result<_>>()?,
            None => {
                let measured = aggregate(
                    &results
                        .iter()
                        .filter(|r| r.system == "baseline")
                        .cloned()
                        .collect::<Vec<_>>(),
                    &Categorization {
                        entries: Vec::new(),
                    },
                )?;
                let sys = measured.systems.first().ok_or_else(|| {
                    Error::Validation("no baseline results to categorize datasets".into())
                })?;
                names
                    .iter()
                    .filter_map(|n| sys.datasets.get(n).map(|s| (n.clone(), s.mean)))
                    .collect()
            }
        };
        categorize(&baseline, eval.threshold, &eval.in_distribution)
    }

    pub fn report_stage(&mut self) -> anyhow::Result<StageStatus> {
        let mut inputs = Inputs::default()
            .value("eval", &self.cfg.eval)
            .value("curated", &self.cfg.curated_name());
        for sys in [System::Baseline, System::Curated] {
            for &seed in &self.cfg.seeds {
                let rel = paths::results(sys.as_str(), seed);
                if self.dir.exists(&rel) {
                    inputs = inputs.artifact(&self.dir, &rel)?;
                }
            }
        }
        let outputs = vec![paths::report_json(), paths::report_txt()];
        self.stage("report", inputs, outputs, |p| {
            let results = p.collect_results()?;
            if results.is_empty() {
                return Err(Error::Validation(
                    "no evaluation results; run evaluate first".into(),
                ));
            }
            let categories = p.categories(&results)?;
            let mut report = aggregate(&results, &categories)?;
            let curated = p.cfg.curated_name();
            if p.has_curated() && results.iter().any(|r| r.system == curated) {
                report.significance = bootstrap_compare(
                    &results,
                    &curated,
                    "baseline",
                    &categories,
                    p.cfg.eval.resamples,
                    p.cfg.eval.bootstrap_seed,
                )?;
            }
            p.dir.write_bytes(
                &paths::report_json(),
                format!("{}\n", report.to_json()).as_bytes(),
            )?;
            p.dir
                .write_bytes(&paths::report_txt(), report.to_table().as_bytes())
        })
    }

    /// Every stage for one seed, in order.
    pub fn run_seed(&mut self, seed: u64) -> anyhow::Result<()> {
        self.partition_stage(seed)?;
        self.export_stage(System::Baseline, seed)?;
        self.finetune_stage(System::Baseline, seed)?;
        if self.cfg.selection.is_some() {
            self.predict_stage(seed)?;
            self.score_stage(seed)?;
        } else if self.cfg.generation.is_some() {
            self.generate_stage(seed)?;
            self.validate_stage(seed)?;
        }
        if self.has_curated() {
            self.select_stage(seed)?;
            self.assemble_stage(seed)?;
            self.export_stage(System::Curated, seed)?;
            self.finetune_stage(System::Curated, seed)?;
        }
        self.evaluate_stage(System::Baseline, seed)?;
        if self.has_curated() {
            self.evaluate_stage(System::Curated, seed)?;
        }
        Ok(())
    }

    /// Ingest, every selected seed, then the report.
    pub fn run_all(&mut self) -> anyhow::Result<()> {
        self.capability_gate()?;
        self.ingest()?;
        for seed in self.seeds() {
            self.run_seed(seed)?;
        }
        self.report_stage()?;
        Ok(())
    }

    /// Systems that have a curated counterpart in this configuration.
    pub fn systems(&self) -> Vec<System> {
        if self.has_curated() {
            vec![System::Baseline, System::Curated]
        } else {
            vec![System::Baseline]
        }
    }
}

fn finished_model(job: &FinetuneJob) -> Result<ModelHandle> {
    match job.state {
        JobState::Succeeded => job.model.clone().ok_or_else(|| {
            Error::Invariant(format!("job {} succeeded without a model", job.job_id))
        }),
        JobState::Failed => Err(Error::Gateway(format!(
            "fine-tune job {} failed: {}",
            job.job_id,
            job.failure_reason.as_deref().unwrap_or("no reason given")
        ))),
        state => Err(Error::Gateway(format!(
            "fine-tune job {} is still {state:?}; rerun finetune to resume polling",
            job.job_id
        ))),
    }
}
