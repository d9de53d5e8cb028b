use std::collections::BTreeSet;
use std::sync::{Arc, Mutex};
use std::time::Duration;

use nlicurate::domain::{Label, NliInstance};
use nlicurate::ingest::FilterRules;
use nlicurate::modelgate::*;
use nlicurate::synth::*;

fn handle() -> ModelHandle {
    ModelHandle {
        provider: "mock".into(),
        model: "mock-base".into(),
        role: ModelRole::Base,
        supports_probabilities: true,
        supports_finetune: true,
    }
}

fn gateway(p: impl Provider + 'static) -> Gateway {
    let cfg = GatewayConfig {
        max_in_flight: 4,
        retry: RetryPolicy {
            max_retries: 1,
            base_delay: Duration::ZERO,
        },
        score_retries: 2,
    };
    Gateway::new(Arc::new(p), ResponseCache::in_memory(), cfg).unwrap()
}

fn run(gw: &Gateway, kind: StrategyKind, per_class: usize, seed: u64) -> GeneratedBatch {
    generate_batch(
        gw,
        &handle(),
        &GenerationSpec::new(kind, per_class, seed),
        &DomainCatalog::default(),
        &FilterRules::default(),
    )
    .unwrap()
}

#[test]
fn short_simple_shape() {
    let gw = gateway(MockProvider::nli(1));
    let batch = run(&gw, StrategyKind::ShortSimple, 2, 7);
    assert_eq!(batch.instances.len(), 6);
    assert!(!batch.partial);
    let catalog: BTreeSet<String> = DomainCatalog::default()
        .iter()
        .map(str::to_string)
        .collect();
    for (j, inst) in batch.instances.iter().enumerate() {
        assert_eq!(inst.label, Label::from_index(j % 3));
        assert_eq!(inst.source, "short_simple");
        assert!(catalog.contains(&inst.meta[META_DOMAIN]));
        assert_eq!(inst.premise.matches(". ").count(), 0, "{}", inst.premise);
        check_provenance(inst, false).unwrap();
    }
    let domains: BTreeSet<&str> = batch
        .instances
        .iter()
        .map(|i| i.meta[META_DOMAIN].as_str())
        .collect();
    assert_eq!(domains.len(), 6);
}

#[test]
fn long_premises_have_four_sentences() {
    let gw = gateway(MockProvider::nli(1));
    let batch = run(&gw, StrategyKind::LongSimple, 2, 7);
    for inst in &batch.instances {
        assert_eq!(inst.premise.matches('.').count(), 4, "{}", inst.premise);
    }
}

#[test]
fn long_complex_uses_stored_templates_alternately() {
    let prompts = Arc::new(Mutex::new(Vec::new()));
    let seen = prompts.clone();
    let inner = MockProvider::nli(3);
    let gw = gateway(MockProvider::from_fn(3, move |req, _| {
        seen.lock().unwrap().push(last_user(req).to_string());
        inner.complete(req)
    }));
    let batch = run(&gw, StrategyKind::LongComplex, 2, 0);
    let contradictions: Vec<&NliInstance> = batch
        .instances
        .iter()
        .filter(|i| i.label == Some(Label::Contradiction))
        .collect();
    let ids: Vec<&str> = contradictions
        .iter()
        .map(|i| i.meta[META_TEMPLATE_ID].as_str())
        .collect();
    assert_eq!(
        ids,
        ["hyp_complex_contradiction_1", "hyp_complex_contradiction_2"]
    );
    let prompts = prompts.lock().unwrap();
    let first = prompts
        .iter()
        .find(|p| p.contains(&contradictions[0].premise) && p.contains("sentence 1"))
        .unwrap();
    assert!(first.contains(
        "construct a sentence that contradicts sentence 1, does not contradict sentence 2"
    ));
}

#[test]
fn generation_is_deterministic() {
    let a = run(
        &gateway(MockProvider::nli(5)),
        StrategyKind::LongComplex,
        4,
        11,
    );
    let b = run(
        &gateway(MockProvider::nli(5)),
        StrategyKind::LongComplex,
        4,
        11,
    );
    assert_eq!(
        serde_json::to_string(&a).unwrap(),
        serde_json::to_string(&b).unwrap()
    );
    let c = run(
        &gateway(MockProvider::nli(5)),
        StrategyKind::LongComplex,
        4,
        12,
    );
    assert_ne!(a.instances, c.instances);
}

#[test]
fn chatty_premises_are_filtered() {
    let gw = gateway(MockProvider::from_fn(0, |req, _| {
        Ok(text(
            if last_user(req).contains("Reply with the text only") {
                "Sure! Here is a sentence about work."
            } else {
                "A person is working."
            },
        ))
    }));
    let batch = run(&gw, StrategyKind::ShortSimple, 2, 0);
    assert!(batch.instances.is_empty());
    assert_eq!(batch.filter.dropped, 6);
    assert_eq!(batch.filter.reasons.values().sum::<usize>(), 6);
}

#[test]
fn provider_failures_consume_skip_budget() {
    let gw = gateway(MockProvider::from_fn(0, |req, _| {
        if req.nonce.as_deref() == Some("draw:0:3") {
            Err(TransportError::Transient("boom".into()))
        } else {
            Ok(text("A dog runs in a park."))
        }
    }));
    let batch = run(&gw, StrategyKind::ShortSimple, 4, 0);
    assert_eq!(batch.skipped, 1);
    assert!(!batch.partial);
    assert_eq!(batch.instances.len(), 11);

    let gw = gateway(MockProvider::from_fn(0, |_, _| {
        Err(TransportError::Transient("down".into()))
    }));
    let batch = run(&gw, StrategyKind::ShortSimple, 4, 0);
    assert!(batch.partial);
    assert_eq!(batch.skipped, 2);
    assert!(batch.instances.is_empty());
}

#[test]
fn domain_label_is_not_generated() {
    let gw = gateway(MockProvider::nli(0));
    let spec = GenerationSpec::new(StrategyKind::DomainLabel, 1, 0);
    assert!(generate_batch(
        &gw,
        &handle(),
        &spec,
        &DomainCatalog::default(),
        &FilterRules::default()
    )
    .is_err());
}

fn unlabelled(n: usize) -> Vec<NliInstance> {
    (0..n)
        .map(|i| {
            NliInstance::new(
                format!("u{i}"),
                format!("A child plays with toy {i}."),
                "A kid is playing.",
                None,
                "mnli-gen",
            )
        })
        .collect()
}

#[test]
fn labels_unlabelled_corpus() {
    let gw = gateway(MockProvider::from_fn(0, |_, _| Ok(text("Answer: neutral"))));
    let out = label_unlabelled(
        &gw,
        &handle(),
        unlabelled(10),
        &PromptConfig::default(),
        &FilterRules::default(),
    )
    .unwrap();
    assert_eq!(out.instances.len(), 10);
    assert!(out
        .instances
        .iter()
        .all(|i| i.label == Some(Label::Neutral)));
    assert_eq!(out.invalid, 0);
}

#[test]
fn filtered_pairs_never_reach_the_model() {
    let gw = gateway(MockProvider::from_fn(0, |_, _| Ok(text("entailment"))));
    let mut corpus = unlabelled(3);
    corpus[1].premise = "The hypothesis is that a child plays.".into();
    let out = label_unlabelled(
        &gw,
        &handle(),
        corpus,
        &PromptConfig::default(),
        &FilterRules::default(),
    )
    .unwrap();
    assert_eq!(out.instances.len(), 2);
    assert_eq!(out.filter.dropped, 1);
    assert_eq!(gw.transport_calls(), 2);
}

#[test]
fn undecodable_predictions_are_dropped() {
    let gw = gateway(MockProvider::from_fn(0, |req, _| {
        Ok(text(if last_user(req).contains("toy 4.") {
            "no idea"
        } else {
            "contradiction"
        }))
    }));
    let out = label_unlabelled(
        &gw,
        &handle(),
        unlabelled(10),
        &PromptConfig::default(),
        &FilterRules::default(),
    )
    .unwrap();
    assert_eq!(out.instances.len(), 9);
    assert_eq!(out.invalid, 1);
}

fn generated(n: usize, label: Label) -> Vec<NliInstance> {
    (0..n)
        .map(|i| {
            NliInstance::new(
                format!("g{i}"),
                format!("Premise {i}."),
                "Hypothesis.",
                Some(label),
                "long_complex",
            )
            .with_meta(META_DOMAIN, "about railways")
            .with_meta(META_INTENDED_LABEL, label.as_str())
            .with_meta(META_STRATEGY, "long_complex")
            .with_meta(META_TEMPLATE_ID, "hyp_complex_entailment_1")
        })
        .collect()
}

fn vote_cfg() -> PromptConfig {
    PromptConfig {
        temperature: DEFAULT_VOTE_TEMPERATURE,
        ..PromptConfig::default()
    }
}

#[test]
fn unanimous_votes_keep_and_relabel() {
    let gw = gateway(MockProvider::from_fn(0, |_, _| Ok(text("Answer: neutral"))));
    let out = validate_unanimity(
        &gw,
        &handle(),
        generated(3, Label::Entailment),
        &vote_cfg(),
        VOTES,
    )
    .unwrap();
    assert_eq!(out.kept.len(), 3);
    for inst in &out.kept {
        assert_eq!(inst.label, Some(Label::Neutral));
        assert_eq!(inst.meta[META_INTENDED_LABEL], "entailment");
        assert_eq!(inst.meta[META_FINAL_LABEL], "neutral");
        check_provenance(inst, true).unwrap();
    }
    assert!(out
        .verdicts
        .iter()
        .all(|v| v.votes.len() == 8 && v.temperature == 1.0));
    assert_eq!(gw.transport_calls(), 24);
}

#[test]
fn one_dissent_discards() {
    let gw = gateway(MockProvider::from_fn(0, |req, _| {
        Ok(text(if req.nonce.as_deref() == Some("vote:6") {
            "neutral"
        } else {
            "entailment"
        }))
    }));
    let out = validate_unanimity(
        &gw,
        &handle(),
        generated(1, Label::Entailment),
        &vote_cfg(),
        VOTES,
    )
    .unwrap();
    assert!(out.kept.is_empty());
    assert_eq!(out.discarded, 1);
    assert!(!out.verdicts[0].kept);
}

#[test]
fn transport_failure_is_unresolved() {
    let gw = gateway(MockProvider::from_fn(0, |req, _| {
        if req.nonce.as_deref() == Some("vote:2") && last_user(req).contains("Premise 0.") {
            Err(TransportError::Transient("flaky".into()))
        } else {
            Ok(text("entailment"))
        }
    }));
    let out = validate_unanimity(
        &gw,
        &handle(),
        generated(2, Label::Entailment),
        &vote_cfg(),
        VOTES,
    )
    .unwrap();
    assert_eq!(out.unresolved, 1);
    assert_eq!(out.discarded, 0);
    assert_eq!(out.kept.len(), 1);
    assert!(out.verdicts[0].error.is_some());
}

/// Random mock votes: keep rate 3 * (1/3)^8 within three standard errors.
#[test]
fn mock_votes_keep_rate() {
    let gw = gateway(MockProvider::nli(9));
    let n = 6000;
    let insts: Vec<NliInstance> = (0..n)
        .map(|i| {
            NliInstance::new(
                format!("v{i}"),
                format!("Scene {i}."),
                "Something happens.",
                Some(Label::Neutral),
                "gen",
            )
        })
        .collect();
    let out = validate_unanimity(&gw, &handle(), insts, &vote_cfg(), VOTES).unwrap();
    let p = 3.0 * (1.0f64 / 3.0).powi(8);
    let se = (p * (1.0 - p) / n as f64).sqrt();
    let observed = out.kept.len() as f64 / n as f64;
    assert!((observed - p).abs() <= 3.0 * se, "observed {observed}");
    let labels: BTreeSet<_> = out.kept.iter().map(|i| i.label).collect();
    assert!(labels.len() <= 3);
}
