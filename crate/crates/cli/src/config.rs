use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use nlicurate::domain::Budget;
use nlicurate::ingest::DatasetManifest;
use nlicurate::modelgate::{
    openai_default_params, GatewayConfig, ModelHandle, ModelRole, PromptConfig, RetryPolicy,
};
use nlicurate::select::SelectionConfig;
use nlicurate::synth::{
    StrategyKind, DEFAULT_GENERATION_TEMPERATURE, DEFAULT_VOTE_TEMPERATURE, VOTES,
};
use nlicurate::{Error, Result};
use serde::{Deserialize, Serialize};
use serde_json::Value;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProviderKind {
    Mock,
    Openai,
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProviderConfig {
    pub kind: ProviderKind,
    #[serde(default = "ProviderConfig::default_model")]
    pub model: String,
    #[serde(default = "ProviderConfig::default_base_url")]
    pub base_url: String,
    /// Environment variable holding the API key.
    #[serde(default = "ProviderConfig::default_key_env")]
    pub api_key_env: String,
    #[serde(default = "yes")]
    pub supports_probabilities: bool,
    #[serde(default = "yes")]
    pub supports_finetune: bool,
    #[serde(default)]
    pub mock_seed: u64,
    #[serde(default = "ProviderConfig::default_in_flight")]
    pub max_in_flight: usize,
    #[serde(default = "ProviderConfig::default_retries")]
    pub max_retries: u32,
    #[serde(default = "ProviderConfig::default_delay")]
    pub retry_base_delay_ms: u64,
    /// Extra attempts when a score answer does not parse.
    #[serde(default = "ProviderConfig::default_score_retries")]
    pub score_retries: u32,
    #[serde(default)]
    pub templates_dir: Option<PathBuf>,
}

impl ProviderConfig {
    fn default_model() -> String {
        "gpt-4o-mini-2024-07-18".into()
    }
    fn default_base_url() -> String {
        "https://api.openai.com/v1".into()
    }
    fn default_key_env() -> String {
        "OPENAI_API_KEY".into()
    }
    fn default_in_flight() -> usize {
        8
    }
    fn default_retries() -> u32 {
        3
    }
    fn default_delay() -> u64 {
        1000
    }
    fn default_score_retries() -> u32 {
        2
    }

    pub fn id(&self) -> &'static str {
        match self.kind {
            ProviderKind::Mock => "mock",
            ProviderKind::Openai => "openai",
        }
    }

    pub fn base_handle(&self) -> ModelHandle {
        ModelHandle {
            provider: self.id().into(),
            model: self.model.clone(),
            role: ModelRole::Base,
            supports_probabilities: self.supports_probabilities,
            supports_finetune: self.supports_finetune,
        }
    }

    pub fn gateway_config(&self) -> GatewayConfig {
        GatewayConfig {
            max_in_flight: self.max_in_flight,
            retry: RetryPolicy {
                max_retries: self.max_retries,
                base_delay: std::time::Duration::from_millis(self.retry_base_delay_ms),
            },
            score_retries: self.score_retries,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BudgetConfig {
    pub m: usize,
    #[serde(default = "BudgetConfig::default_fraction")]
    pub k_fraction: f64,
    #[serde(default)]
    pub k: Option<usize>,
}

impl BudgetConfig {
    fn default_fraction() -> f64 {
        nlicurate::domain::DEFAULT_K_FRACTION
    }

    pub fn budget(&self) -> Result<Budget> {
        match self.k {
            Some(k) => Budget::with_k(self.m, self.k_fraction, k),
            None => Budget::new(self.m, self.k_fraction),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GenerationConfig {
    pub strategy: StrategyKind,
    #[serde(default)]
    pub target_per_class: usize,
    #[serde(default = "GenerationConfig::default_temperature")]
    pub temperature: f64,
    #[serde(default = "yes")]
    pub validate: bool,
    #[serde(default = "GenerationConfig::default_votes")]
    pub votes: usize,
    #[serde(default = "GenerationConfig::default_vote_temperature")]
    pub vote_temperature: f64,
    /// Registered unlabelled corpus for the domain_label strategy.
    #[serde(default)]
    pub unlabelled: Option<String>,
    #[serde(default)]
    pub domains: Option<PathBuf>,
    #[serde(default)]
    pub filter_rules: Option<PathBuf>,
}

impl GenerationConfig {
    fn default_temperature() -> f64 {
        DEFAULT_GENERATION_TEMPERATURE
    }
    fn default_votes() -> usize {
        VOTES
    }
    fn default_vote_temperature() -> f64 {
        DEFAULT_VOTE_TEMPERATURE
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PromptSection {
    #[serde(default = "PromptSection::default_shots")]
    pub n_shots: usize,
    #[serde(default = "yes")]
    pub chain_of_thought: bool,
    #[serde(default)]
    pub temperature: f64,
}

impl PromptSection {
    fn default_shots() -> usize {
        3
    }

    pub fn few_shot(&self) -> PromptConfig {
        PromptConfig {
            n_shots: self.n_shots,
            chain_of_thought: self.chain_of_thought,
            temperature: self.temperature,
            ..PromptConfig::default()
        }
    }
}

impl Default for PromptSection {
    fn default() -> Self {
        Self {
            n_shots: 3,
            chain_of_thought: true,
            temperature: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvalConfig {
    pub datasets: Vec<String>,
    #[serde(default)]
    pub in_distribution: Vec<String>,
    #[serde(default = "EvalConfig::default_threshold")]
    pub threshold: f64,
    /// Reference accuracies in [0, 1] used to categorize datasets. Without
    /// them the measured baseline accuracies are used.
    #[serde(default)]
    pub baseline: Option<BTreeMap<String, f64>>,
    #[serde(default = "EvalConfig::default_resamples")]
    pub resamples: usize,
    #[serde(default)]
    pub bootstrap_seed: u64,
}

impl EvalConfig {
    fn default_threshold() -> f64 {
        nlicurate::eval::CHALLENGE_THRESHOLD
    }
    fn default_resamples() -> usize {
        nlicurate::eval::DEFAULT_RESAMPLES
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FinetuneConfig {
    #[serde(default = "openai_default_params")]
    pub params: BTreeMap<String, Value>,
    #[serde(default = "FinetuneConfig::default_interval")]
    pub poll_interval_secs: f64,
    #[serde(default = "FinetuneConfig::default_polls")]
    pub max_polls: usize,
    /// Pass the run seed to the provider as a job parameter.
    #[serde(default = "yes")]
    pub pass_seed: bool,
}

impl FinetuneConfig {
    fn default_interval() -> f64 {
        30.0
    }
    fn default_polls() -> usize {
        2880
    }
}

impl Default for FinetuneConfig {
    fn default() -> Self {
        Self {
            params: openai_default_params(),
            poll_interval_secs: Self::default_interval(),
            max_polls: Self::default_polls(),
            pass_seed: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub run_id: String,
    /// Directory holding run directories; relative to the config file.
    #[serde(default = "Config::default_runs_dir")]
    pub runs_dir: PathBuf,
    #[serde(default = "Config::default_seeds")]
    pub seeds: Vec<u64>,
    pub provider: ProviderConfig,
    pub budget: BudgetConfig,
    /// Registered corpus the training subsets are drawn from.
    pub train: String,
    #[serde(default)]
    pub datasets: Vec<DatasetManifest>,
    #[serde(default)]
    pub selection: Option<SelectionConfig>,
    #[serde(default)]
    pub generation: Option<GenerationConfig>,
    #[serde(default)]
    pub prompt: PromptSection,
    pub eval: EvalConfig,
    #[serde(default)]
    pub finetune: FinetuneConfig,
}

impl Config {
    fn default_runs_dir() -> PathBuf {
        PathBuf::from("runs")
    }
    fn default_seeds() -> Vec<u64> {
        (0..5).collect()
    }

    pub fn parse(text: &str, base: &Path) -> Result<Self> {
        let mut cfg: Config =
            toml::from_str(text).map_err(|e| Error::Config(format!("config: {e}")))?;
        cfg.resolve_paths(base);
        cfg.check()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
        Self::parse(&text, path.parent().unwrap_or(Path::new(".")))
    }

    fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.runs_dir);
        for d in &mut self.datasets {
            fix(&mut d.path);
        }
        if let Some(dir) = &mut self.provider.templates_dir {
            fix(dir);
        }
        if let Some(g) = &mut self.generation {
            for p in [&mut g.domains, &mut g.filter_rules].into_iter().flatten() {
                fix(p);
            }
        }
    }

    pub fn check(&self) -> Result<()> {
        if self.run_id.is_empty() || self.run_id.contains(['/', '\\']) {
            return Err(Error::Config(format!("invalid run_id {:?}", self.run_id)));
        }
        if self.seeds.is_empty() {
            return Err(Error::Config("seeds list is empty".into()));
        }
        self.budget.budget()?;
        let known = |name: &str| self.datasets.iter().any(|d| d.name == name);
        if !known(&self.train) {
            return Err(Error::Config(format!(
                "training corpus {} is not registered",
                self.train
            )));
        }
        for d in self.eval.datasets.iter().chain(&self.eval.in_distribution) {
            if !known(d) {
                return Err(Error::Config(format!(
                    "evaluation dataset {d} is not registered"
                )));
            }
        }
        match (&self.selection, &self.generation) {
            (Some(_), Some(_)) => {
                return Err(Error::Config(
                    "configure either [selection] or [generation], not both".into(),
                ))
            }
            (Some(sel), None) => sel.validate()?,
            (None, Some(g)) => {
                if g.strategy == StrategyKind::DomainLabel {
                    match &g.unlabelled {
                        Some(name) if known(name) => {}
                        _ => {
                            return Err(Error::Config(
                                "domain_label needs a registered unlabelled corpus".into(),
                            ))
                        }
                    }
                } else if g.target_per_class == 0 {
                    return Err(Error::Config(
                        "generation target_per_class must be at least 1".into(),
                    ));
                }
            }
            (None, None) => {}
        }
        Ok(())
    }

    /// Name under which the curated system is reported.
    pub fn curated_name(&self) -> String {
        match (&self.selection, &self.generation) {
            (Some(s), _) => s.method.as_str().to_string(),
            (None, Some(g)) => g.strategy.as_str().to_string(),
            (None, None) => "curated".into(),
        }
    }

    pub fn run_dir(&self) -> PathBuf {
        self.runs_dir.join(&self.run_id)
    }
}
