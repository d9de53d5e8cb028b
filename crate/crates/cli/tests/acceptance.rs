//! Acceptance suite: one PASS/FAIL line per criterion.

mod common;

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::sync::Arc;
use std::time::{Duration, Instant};

use nlicurate::domain::{
    apply_swap, compose_labels, entropy, Budget, Dataset, DatasetKind, Label, NliInstance,
};
use nlicurate::eval::{
    aggregate, categorize, paired_bootstrap, Category, RunResult, CHALLENGE_THRESHOLD,
};
use nlicurate::ingest::{draw_partition, filter_generated, FilterRules};
use nlicurate::modelgate::{
    text, Decoded, Gateway, GatewayConfig, MockProvider, ModelHandle, ModelRole, PredictionRecord,
    PromptConfig, ResponseCache, ScoreDimension, ScoreOutcome,
};
use nlicurate::select::{
    concat_candidates, select, select_uncertainty, DownArtifacts, DownStrategy, SelectionConfig,
    SelectionInputs, SelectionMethod, META_LINEAGE, META_LINEAGE_LABELS,
};
use nlicurate::synth::{keep_decision, validate_unanimity, VOTES};
use nlicurate::transform::{build_copa_nli, CopaQuestion, CopaRecord, NonEntailmentLabel};
use nlicurate_cli::{Config, Pipeline, RunOptions};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

fn check(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn within(elapsed: Duration, limit: Duration) -> Result<(), String> {
    check(elapsed < limit, || {
        format!("took {elapsed:.2?}, limit {limit:?}")
    })
}

/// Precedence written out as a table: any contradiction wins, then any neutral.
fn composition_oracle(labels: &[Label]) -> Label {
    if labels.contains(&Label::Contradiction) {
        Label::Contradiction
    } else if labels.contains(&Label::Neutral) {
        Label::Neutral
    } else {
        Label::Entailment
    }
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let mut cases = 0;
    let mut mismatches = 0;
    for h in 1..=4u32 {
        for code in 0..3usize.pow(h) {
            let tuple: Vec<Label> = (0..h)
                .map(|i| Label::ALL[(code / 3usize.pow(i)) % 3])
                .collect();
            cases += 1;
            if compose_labels(&tuple).map_err(|e| e.to_string())? != composition_oracle(&tuple) {
                mismatches += 1;
            }
        }
    }
    check(cases == 120, || format!("{cases} cases enumerated"))?;
    check(mismatches == 0, || format!("{mismatches} mismatches"))?;
    within(start.elapsed(), Duration::from_secs(1))?;
    Ok(format!(
        "{cases} tuples, 0 mismatches in {:.2?}",
        start.elapsed()
    ))
}

/// Error-free transformation of a product: `a * b = p + e` exactly.
fn two_prod(a: f64, b: f64) -> (f64, f64) {
    let p = a * b;
    (p, a.mul_add(b, -p))
}

/// Natural log in double-double precision: one Newton step on exp from the
/// f64 estimate, with the residual carried as the low word.
fn ln_dd(x: f64) -> (f64, f64) {
    let y = x.ln();
    let e = y.exp();
    let (e_hi, e_lo) = (e, y.exp_m1() - (e - 1.0));
    let correction = (x - e_hi - e_lo) / e;
    (y, correction)
}

/// Entropy accumulated in double-double arithmetic.
fn entropy_oracle(p: &[f64]) -> f64 {
    let (mut hi, mut lo) = (0.0f64, 0.0f64);
    for &x in p {
        if x <= 0.0 {
            continue;
        }
        let (l_hi, l_lo) = ln_dd(x);
        let (t_hi, t_lo) = two_prod(x, l_hi);
        let term_lo = t_lo + x * l_lo;
        let s = hi - t_hi;
        let bp = s - hi;
        let err = (hi - (s - bp)) + (-t_hi - bp);
        hi = s;
        lo += err - term_lo;
    }
    hi + lo
}

fn criterion_2() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst = 0.0f64;
    for i in 0..1000 {
        let mut raw: [f64; 3] = std::array::from_fn(|_| rng.random::<f64>());
        if i % 10 == 0 {
            raw[i % 3] = 0.0;
        }
        if i % 17 == 0 {
            raw[(i + 1) % 3] *= 1e-12;
        }
        let total: f64 = raw.iter().sum();
        let p = raw.map(|x| x / total);
        let got = entropy(&p).map_err(|e| e.to_string())?;
        worst = worst.max((got - entropy_oracle(&p)).abs());
    }
    check(worst <= 1e-12, || format!("max entropy error {worst:e}"))?;

    let pool: Vec<NliInstance> = (0..500)
        .map(|i| {
            NliInstance::new(
                format!("p{i}"),
                format!("Premise {i}."),
                format!("Hypothesis {i}."),
                Some(Label::ALL[i % 3]),
                "fx",
            )
        })
        .collect();
    let preds: Vec<PredictionRecord> = pool
        .iter()
        .map(|inst| {
            let raw: [f64; 3] = std::array::from_fn(|_| rng.random::<f64>() + 1e-6);
            let total: f64 = raw.iter().sum();
            PredictionRecord {
                instance_id: inst.id.clone(),
                decoded: Decoded::Label(Label::Entailment),
                probs: Some(raw.map(|x| x / total)),
                raw: String::new(),
                prompt_hash: String::new(),
            }
        })
        .collect();
    let h: HashMap<&str, f64> = preds
        .iter()
        .map(|p| (p.instance_id.as_str(), entropy_oracle(&p.probs.unwrap())))
        .collect();
    for k in [1usize, 5, 50] {
        let draft = select_uncertainty(
            &pool,
            &preds,
            k,
            false,
            &mut ChaCha8Rng::seed_from_u64(k as u64),
        )
        .map_err(|e| e.to_string())?;
        let got: BTreeSet<&str> = draft.up.iter().map(|i| i.id.as_str()).collect();
        let mut want = BTreeSet::new();
        for label in Label::ALL {
            let mut class: Vec<&NliInstance> =
                pool.iter().filter(|i| i.label == Some(label)).collect();
            class.sort_by(|a, b| h[b.id.as_str()].total_cmp(&h[a.id.as_str()]));
            want.extend(class.iter().take(k).map(|i| i.id.as_str()));
        }
        check(got == want, || {
            format!("top-{k} selection differs from exhaustive sort")
        })?;
    }
    within(start.elapsed(), Duration::from_secs(5))?;
    Ok(format!(
        "max error {worst:.1e}; top-K equal for K in {{1, 5, 50}}; {:.2?}",
        start.elapsed()
    ))
}

fn random_probs(rng: &mut ChaCha8Rng) -> [f64; 3] {
    let raw: [f64; 3] = std::array::from_fn(|_| rng.random::<f64>() + 1e-6);
    let total: f64 = raw.iter().sum();
    raw.map(|x| x / total)
}

fn random_scores(rng: &mut ChaCha8Rng) -> ScoreOutcome {
    if rng.random_bool(0.05) {
        ScoreOutcome::Unscorable {
            dimension: ScoreDimension::Difficulty,
            raw: "?".into(),
        }
    } else {
        ScoreOutcome::Scored {
            scores: BTreeMap::from([
                (ScoreDimension::Correctness, rng.random_range(1..=10)),
                (ScoreDimension::Difficulty, rng.random_range(1..=10)),
            ]),
        }
    }
}

fn grouped_corpus(rng: &mut ChaCha8Rng, n: usize) -> Dataset {
    let mut instances = Vec::with_capacity(n);
    let mut group = 0;
    while instances.len() < n {
        let size = rng.random_range(1..=5).min(n - instances.len());
        for j in 0..size {
            instances.push(NliInstance::new(
                format!("g{group}-{j}"),
                format!("Premise of group {group}."),
                format!("Hypothesis {j} of group {group}."),
                Some(Label::ALL[rng.random_range(0..3)]),
                "fx",
            ));
        }
        group += 1;
    }
    Dataset::new("fx", DatasetKind::Train, instances).expect("unique ids")
}

fn prediction(id: &str, gold: Option<Label>, rng: &mut ChaCha8Rng) -> PredictionRecord {
    let probs = random_probs(rng);
    let decoded = if rng.random_bool(0.5) {
        Decoded::Label(gold.unwrap_or(Label::Neutral))
    } else {
        Decoded::Label(Label::ALL[rng.random_range(0..3)])
    };
    PredictionRecord {
        instance_id: id.into(),
        decoded,
        probs: Some(probs),
        raw: String::new(),
        prompt_hash: String::new(),
    }
}

fn criterion_3() -> Outcome {
    let mut violations = Vec::new();
    let mut per_method = BTreeMap::new();
    for trial in 0..200u64 {
        let method = SelectionMethod::ALL[trial as usize % 6];
        let mut rng = ChaCha8Rng::seed_from_u64(1000 + trial);
        let m = rng.random_range(60..=160);
        let budget = Budget::new(m, 0.05).map_err(|e| e.to_string())?;
        let corpus = grouped_corpus(&mut rng, 3 * m + 20);
        let part = draw_partition(&corpus, &budget, trial).map_err(|e| e.to_string())?;
        let init = corpus
            .subset("init", &part.init_ids)
            .map_err(|e| e.to_string())?;
        let pool = corpus
            .subset("pool", &part.potential_ids)
            .map_err(|e| e.to_string())?
            .instances;
        let init_ids: BTreeSet<&str> = part.init_ids.iter().map(String::as_str).collect();
        let source: Vec<NliInstance> = corpus
            .instances
            .iter()
            .filter(|i| !init_ids.contains(i.id.as_str()))
            .cloned()
            .collect();

        let pool_preds: Vec<PredictionRecord> = pool
            .iter()
            .map(|i| prediction(&i.id, i.label, &mut rng))
            .collect();
        let init_preds: Vec<PredictionRecord> = init
            .instances
            .iter()
            .map(|i| prediction(&i.id, i.label, &mut rng))
            .collect();
        let pool_scores: BTreeMap<String, ScoreOutcome> = pool
            .iter()
            .map(|i| (i.id.clone(), random_scores(&mut rng)))
            .collect();
        let init_scores: BTreeMap<String, ScoreOutcome> = init
            .instances
            .iter()
            .map(|i| (i.id.clone(), random_scores(&mut rng)))
            .collect();

        let down = match (method, trial % 3) {
            (SelectionMethod::Uncertainty | SelectionMethod::UncertaintyCorrectOnly, 1) => {
                DownStrategy::LowestEntropy
            }
            (SelectionMethod::DifficultyScore, 1) => DownStrategy::LowestScore,
            _ => DownStrategy::Random,
        };
        let cfg = SelectionConfig::new(method, trial).with_down(down);
        let inputs = SelectionInputs {
            init: &init.instances,
            pool: &pool,
            source: &source,
            predictions: Some(&pool_preds),
            scores: Some(&pool_scores),
            down: DownArtifacts {
                predictions: Some(&init_preds),
                scores: Some(&init_scores),
            },
        };
        let plan = match select(&cfg, &budget, &inputs) {
            Ok(plan) => plan,
            Err(e) => {
                violations.push(format!("trial {trial} ({method}): {e}"));
                continue;
            }
        };
        let up = plan.up_histogram();
        let down_h = plan
            .down_histogram(&init.instances)
            .map_err(|e| e.to_string())?;
        if up != down_h || up.iter().any(|&c| c > budget.k) {
            violations.push(format!(
                "trial {trial} ({method}): up {up:?} down {down_h:?} K {}",
                budget.k
            ));
        }
        match apply_swap(&init, &plan) {
            Ok(train) if train.len() == m && train.histogram() == init.histogram() => {}
            Ok(train) => violations.push(format!(
                "trial {trial} ({method}): |train| {} histogram {:?} vs {:?}",
                train.len(),
                train.histogram(),
                init.histogram()
            )),
            Err(e) => violations.push(format!("trial {trial} ({method}): {e}")),
        }
        *per_method.entry(method.as_str()).or_insert(0) += 1;
    }
    check(violations.is_empty(), || {
        format!(
            "{} violation(s): {}",
            violations.len(),
            violations.join("; ")
        )
    })?;
    Ok(format!(
        "200 plans over {} methods, 0 violations",
        per_method.len()
    ))
}

fn criterion_4() -> Outcome {
    let start = Instant::now();
    let marks = [
        Decoded::Label(Label::Entailment),
        Decoded::Label(Label::Neutral),
        Decoded::Label(Label::Contradiction),
        Decoded::Invalid,
    ];
    let mut kept = Vec::new();
    for code in 0..4usize.pow(VOTES as u32) {
        let votes: Vec<Decoded> = (0..VOTES)
            .map(|i| marks[(code / 4usize.pow(i as u32)) % 4])
            .collect();
        if let Some(label) = keep_decision(&votes) {
            kept.push((code, label));
        }
    }
    check(kept.len() == 3, || format!("{} tuples kept", kept.len()))?;
    for (code, label) in &kept {
        let votes: Vec<Decoded> = (0..VOTES)
            .map(|i| marks[(code / 4usize.pow(i as u32)) % 4])
            .collect();
        check(votes.iter().all(|v| *v == Decoded::Label(*label)), || {
            format!("kept non-unanimous tuple {code}")
        })?;
    }

    let n = 50_000;
    let provider = MockProvider::from_fn(4, |_, rng| {
        Ok(text(Label::ALL[rng.random_range(0..3)].as_str()))
    });
    let gw = Gateway::new(
        Arc::new(provider),
        ResponseCache::in_memory(),
        GatewayConfig::default(),
    )
    .map_err(|e| e.to_string())?;
    let handle = ModelHandle {
        provider: "mock".into(),
        model: "uniform".into(),
        role: ModelRole::Base,
        supports_probabilities: false,
        supports_finetune: false,
    };
    let instances: Vec<NliInstance> = (0..n)
        .map(|i| {
            NliInstance::new(
                format!("v{i}"),
                format!("Premise {i}."),
                format!("Hypothesis {i}."),
                Some(Label::Neutral),
                "mc",
            )
        })
        .collect();
    let prompt = PromptConfig {
        n_shots: 0,
        chain_of_thought: false,
        temperature: 1.0,
        ..PromptConfig::default()
    };
    let outcome =
        validate_unanimity(&gw, &handle, instances, &prompt, VOTES).map_err(|e| e.to_string())?;
    let p = 1.0 / 2187.0;
    let observed = outcome.kept.len() as f64 / n as f64;
    let se = (p * (1.0 - p) / n as f64).sqrt();
    let z = (observed - p) / se;
    check(z.abs() <= 3.0, || {
        format!("keep fraction {observed:.3e}, z = {z:.2}")
    })?;
    Ok(format!(
        "3 of 65536 tuples kept; Monte Carlo {} / {n} kept = {observed:.3e} (z = {z:+.2}) in {:.1?}",
        outcome.kept.len(),
        start.elapsed()
    ))
}

fn criterion_5() -> Outcome {
    let records: Vec<CopaRecord> = (0..100)
        .map(|i| CopaRecord {
            id: Some(format!("r{i}")),
            premise: format!("Premise {i}."),
            choice1: format!("First option {i}"),
            choice2: format!("Second option {i}"),
            question: if i % 2 == 0 {
                CopaQuestion::Cause
            } else {
                CopaQuestion::Effect
            },
            label: 1 + (i % 3 == 0) as u8,
        })
        .collect();
    let built = build_copa_nli("copa", &records, NonEntailmentLabel::default());
    check(built.errors.is_empty(), || {
        format!("{} record errors", built.errors.len())
    })?;
    let d = &built.dataset;
    check(d.len() == 2 * records.len(), || {
        format!("{} instances from {} records", d.len(), records.len())
    })?;
    for rec in &records {
        let id = rec.id.as_deref().unwrap();
        let pair: Vec<&NliInstance> = d
            .instances
            .iter()
            .filter(|i| i.meta.get("copa_record").map(String::as_str) == Some(id))
            .collect();
        check(pair.len() == 2, || {
            format!("record {id} produced {} instances", pair.len())
        })?;
        let entailed = pair
            .iter()
            .filter(|i| i.label == Some(Label::Entailment))
            .count();
        check(entailed == 1, || {
            format!("record {id}: pair is not label-complementary")
        })?;
        let q = match rec.question {
            CopaQuestion::Cause => "cause",
            CopaQuestion::Effect => "effect",
        };
        let fwd = format!(
            "\"{}\" is a more likely {q} of this than \"{}\"",
            rec.choice1, rec.choice2
        );
        let swap = format!(
            "\"{}\" is a more likely {q} of this than \"{}\"",
            rec.choice2, rec.choice1
        );
        let hyps: BTreeSet<&str> = pair.iter().map(|i| i.hypothesis.as_str()).collect();
        check(
            hyps == BTreeSet::from([fwd.as_str(), swap.as_str()]),
            || format!("record {id}: hypotheses {hyps:?}"),
        )?;
        let fwd_inst = pair.iter().find(|i| i.hypothesis == fwd).unwrap();
        let want = if rec.label == 1 {
            Label::Entailment
        } else {
            Label::Neutral
        };
        check(fwd_inst.label == Some(want), || {
            format!("record {id}: forward label {:?}", fwd_inst.label)
        })?;
    }
    Ok("100 records -> 200 instances, all pairs complementary, templates byte-exact".into())
}

fn criterion_6() -> Outcome {
    let cases: [(&str, &str, Option<&str>); 15] = [
        (
            "The premise of the talk was simple.",
            "A talk happened.",
            Some("word:premise"),
        ),
        (
            "A man walks a dog.",
            "This hypothesis is about a dog.",
            Some("word:hypothesis"),
        ),
        (
            "Entailment is a logical relation.",
            "Logic exists.",
            Some("word:entailment"),
        ),
        (
            "The referee stayed neutral.",
            "A referee watched.",
            Some("word:neutral"),
        ),
        (
            "A cat sleeps.",
            "That is a contradiction of terms.",
            Some("word:contradiction"),
        ),
        (
            "Smoke implies fire nearby.",
            "There is smoke.",
            Some("word:implies"),
        ),
        (
            "A visit was implied by the note.",
            "There was a note.",
            Some("word:implied"),
        ),
        (
            "Sure! Here is a sentence about boats.",
            "Boats float.",
            Some("phrase:sure!"),
        ),
        (
            "How can I help you with this task today.",
            "Help was offered.",
            Some("phrase:can i help"),
        ),
        (
            "I am happy to help with the garden.",
            "A garden exists.",
            Some("phrase:happy to help"),
        ),
        (
            "No problem, the train left on time.",
            "A train departed.",
            Some("phrase:no problem"),
        ),
        (
            "Where did the children go after school?",
            "Children attend school.",
            Some("terminal:?"),
        ),
        (
            "The crowd cheered loudly at the final whistle!",
            "A crowd was present.",
            Some("terminal:!"),
        ),
        (
            "The bus arrived late The driver apologised.",
            "A bus was late.",
            Some("run_on"),
        ),
        (
            "Yesterday I visited the premises of the old mill.",
            "Someone visited a mill.",
            None,
        ),
    ];
    let instances: Vec<NliInstance> = cases
        .iter()
        .enumerate()
        .map(|(i, (p, h, _))| NliInstance::new(format!("f{i}"), *p, *h, None, "crafted"))
        .collect();
    let rules = FilterRules::default();
    let (kept, report) = filter_generated(instances.clone(), &rules);
    let want_kept: Vec<String> = cases
        .iter()
        .enumerate()
        .filter(|(_, c)| c.2.is_none())
        .map(|(i, _)| format!("f{i}"))
        .collect();
    let got_kept: Vec<String> = kept.iter().map(|i| i.id.clone()).collect();
    check(got_kept == want_kept, || {
        format!("kept {got_kept:?}, expected {want_kept:?}")
    })?;
    for (inst, (_, _, want)) in instances.iter().zip(&cases) {
        let got = rules.first_violation(inst);
        check(got.as_deref() == *want, || {
            format!("{}: attributed to {got:?}, expected {want:?}", inst.id)
        })?;
    }
    let want_reasons: BTreeMap<String, usize> = cases
        .iter()
        .filter_map(|c| c.2)
        .map(|r| (r.to_string(), 1))
        .collect();
    check(report.reasons == want_reasons, || {
        format!("report reasons {:?}", report.reasons)
    })?;
    check(report.kept == 1 && report.dropped == 14, || {
        format!("kept {} dropped {}", report.kept, report.dropped)
    })?;
    Ok("15 cases: 14 dropped with one per rule, 1 control kept".into())
}

fn criterion_7() -> Outcome {
    let table: [(&str, f64); 12] = [
        ("SNLI", 92.47),
        ("r1", 65.98),
        ("r2", 58.10),
        ("r3", 55.38),
        ("COPA", 56.20),
        ("INLI-I", 61.42),
        ("WANLI", 60.62),
        ("MNLI-m", 86.93),
        ("MNLI-mm", 87.24),
        ("FEVER", 71.21),
        ("Scitail", 72.55),
        ("INLI-NLI", 80.21),
    ];
    let baseline: Vec<(String, f64)> = table
        .iter()
        .map(|(n, a)| (n.to_string(), a / 100.0))
        .collect();
    let cats = categorize(&baseline, CHALLENGE_THRESHOLD, &["SNLI".to_string()])
        .map_err(|e| e.to_string())?;
    let challenge: BTreeSet<&str> = cats.members(Category::Challenge).into_iter().collect();
    let standard: BTreeSet<&str> = cats.members(Category::Standard).into_iter().collect();
    check(
        challenge == BTreeSet::from(["r1", "r2", "r3", "COPA", "INLI-I", "WANLI"]),
        || format!("challenge {challenge:?}"),
    )?;
    check(
        standard == BTreeSet::from(["MNLI-m", "MNLI-mm", "FEVER", "Scitail", "INLI-NLI"]),
        || format!("standard {standard:?}"),
    )?;

    let results: Vec<RunResult> = table
        .iter()
        .map(|(n, a)| RunResult {
            system: "baseline".into(),
            seed: 0,
            dataset: n.to_string(),
            correct: Vec::new(),
            accuracy: a / 100.0,
        })
        .collect();
    let report = aggregate(&results, &cats).map_err(|e| e.to_string())?;
    let groups = &report.systems[0].groups;
    let ch = groups[&Category::Challenge] * 100.0;
    let st = groups[&Category::Standard] * 100.0;
    check((ch - 59.62).abs() <= 0.005, || {
        format!("challenge average {ch:.4}")
    })?;
    check((st - 79.63).abs() <= 0.005, || {
        format!("standard average {st:.4}")
    })?;
    Ok(format!("challenge avg {ch:.2} (printed 59.62), standard avg {st:.2} (printed 79.63); 6 challenge / 5 standard"))
}

fn criterion_8() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let same: Vec<f64> = (0..200)
        .map(|_| f64::from(u8::from(rng.random_bool(0.6))))
        .collect();
    let p_same = paired_bootstrap(&same, &same, 1000, 1).map_err(|e| e.to_string())?;
    check(p_same == 1.0, || format!("identical systems p = {p_same}"))?;

    let p_disjoint =
        paired_bootstrap(&[1.0; 100], &[0.0; 100], 1000, 2).map_err(|e| e.to_string())?;
    check(p_disjoint <= 0.002, || {
        format!("disjoint systems p = {p_disjoint}")
    })?;

    let trials = 500;
    let mut rejections = 0;
    for t in 0..trials {
        let a: Vec<f64> = (0..2000)
            .map(|_| f64::from(u8::from(rng.random_bool(0.7))))
            .collect();
        let b: Vec<f64> = (0..2000)
            .map(|_| f64::from(u8::from(rng.random_bool(0.7))))
            .collect();
        if paired_bootstrap(&a, &b, 2000, t).map_err(|e| e.to_string())? < 0.05 {
            rejections += 1;
        }
    }
    let rate = rejections as f64 / trials as f64;
    check((0.03..=0.07).contains(&rate), || {
        format!("null rejection rate {rate:.3}")
    })?;
    within(start.elapsed(), Duration::from_secs(60))?;
    Ok(format!(
        "identical p = 1.0, disjoint p = {p_disjoint}, null rejection {:.1}% over {trials} trials; {:.1?}",
        rate * 100.0,
        start.elapsed()
    ))
}

fn artifact_files(root: &Path) -> BTreeMap<String, Vec<u8>> {
    fn walk(root: &Path, dir: &Path, out: &mut BTreeMap<String, Vec<u8>>) {
        for entry in std::fs::read_dir(dir).unwrap() {
            let path = entry.unwrap().path();
            let rel = path
                .strip_prefix(root)
                .unwrap()
                .to_string_lossy()
                .replace('\\', "/");
            if rel == "manifest.json" || rel == "cache" {
                continue;
            }
            if path.is_dir() {
                walk(root, &path, out);
            } else {
                out.insert(rel, std::fs::read(&path).unwrap());
            }
        }
    }
    let mut out = BTreeMap::new();
    walk(root, root, &mut out);
    out
}

fn criterion_9() -> Outcome {
    let data = tempfile::tempdir().map_err(|e| e.to_string())?;
    let template = common::fixture(data.path(), r#"method = "uncertainty""#, "");
    let base = std::fs::read_to_string(&template).map_err(|e| e.to_string())?;
    let mut trees = Vec::new();
    let mut times = Vec::new();
    let mut stages = BTreeSet::new();
    let mut run_dirs = Vec::new();
    for _ in 0..2 {
        let runs = tempfile::tempdir().map_err(|e| e.to_string())?;
        let text = base.replacen(
            "run_id = \"toy\"",
            &format!("run_id = \"toy\"\nruns_dir = {:?}", runs.path()),
            1,
        );
        let cfg = Config::parse(&text, data.path()).map_err(|e| e.to_string())?;
        let start = Instant::now();
        let mut pipeline = Pipeline::open(
            cfg,
            RunOptions {
                offline: true,
                ..RunOptions::default()
            },
        )
        .map_err(|e| e.to_string())?;
        pipeline.run_all().map_err(|e| format!("{e:#}"))?;
        times.push(start.elapsed());
        let bad: Vec<&str> = pipeline
            .manifest()
            .stages
            .values()
            .filter(|r| r.status != nlicurate_cli::StageStatus::Succeeded)
            .map(|r| r.stage.as_str())
            .collect();
        check(bad.is_empty(), || format!("stages not succeeded: {bad:?}"))?;
        stages = pipeline.manifest().stages.keys().cloned().collect();
        trees.push(artifact_files(&pipeline.run_dir()));
        run_dirs.push(runs);
    }
    for t in &times {
        within(*t, Duration::from_secs(10))?;
    }
    check(trees[0].keys().eq(trees[1].keys()), || {
        "runs wrote different artifact sets".into()
    })?;
    let differing: Vec<&String> = trees[0]
        .iter()
        .filter(|(k, v)| trees[1][*k] != **v)
        .map(|(k, _)| k)
        .collect();
    check(differing.is_empty(), || {
        format!("artifacts differ: {differing:?}")
    })?;
    for stage in [
        "ingest",
        "partition/seed-0",
        "predict/seed-0",
        "select/seed-0",
        "assemble/seed-0",
        "export-finetune/curated/seed-1",
        "finetune/curated/seed-1",
        "evaluate/curated/seed-1",
        "report",
    ] {
        check(stages.contains(stage), || {
            format!("stage {stage} missing from manifest")
        })?;
    }
    let corpus_lines = std::fs::read_to_string(data.path().join("train.jsonl"))
        .map_err(|e| e.to_string())?
        .lines()
        .count();
    Ok(format!(
        "{corpus_lines}-instance corpus, {} stages succeeded, {} artifacts byte-identical; runs took {:.2?} and {:.2?}",
        stages.len(),
        trees[0].len(),
        times[0],
        times[1]
    ))
}

fn criterion_10() -> Outcome {
    let sizes = [2usize, 3, 4, 6];
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let mut source = Vec::new();
    for (g, &n) in sizes.iter().enumerate() {
        for j in 0..n {
            source.push(NliInstance::new(
                format!("g{g}-{j}"),
                format!("Shared premise {g}."),
                format!("Hypothesis {j} of group {g}."),
                Some(Label::ALL[rng.random_range(0..3)]),
                "fx",
            ));
        }
    }
    source.shuffle(&mut rng);
    let by_id: HashMap<&str, &NliInstance> = source.iter().map(|i| (i.id.as_str(), i)).collect();
    let candidates = concat_candidates(&source, 3, &mut rng).map_err(|e| e.to_string())?;
    let expected = 1 + 4 + 20;
    check(candidates.len() == expected, || {
        format!("{} candidates, expected {expected}", candidates.len())
    })?;
    let mut seen = BTreeSet::new();
    for c in &candidates {
        let lineage: Vec<&str> = c
            .meta
            .get(META_LINEAGE)
            .map(|s| s.split('|').collect())
            .unwrap_or_default();
        check(lineage.len() == 3, || {
            format!("{}: lineage {lineage:?}", c.id)
        })?;
        let parts: Vec<&NliInstance> = lineage.iter().map(|id| by_id[id]).collect();
        check(parts.iter().all(|p| p.premise == c.premise), || {
            format!("{}: mixed premises", c.id)
        })?;
        check(!c.premise.contains("premise 0."), || {
            format!("{}: drawn from a group smaller than H", c.id)
        })?;
        let labels: Vec<Label> = parts.iter().map(|p| p.label.unwrap()).collect();
        check(c.label == Some(composition_oracle(&labels)), || {
            format!("{}: label {:?} vs oracle", c.id, c.label)
        })?;
        let recorded = labels
            .iter()
            .map(|l| l.as_str())
            .collect::<Vec<_>>()
            .join("|");
        check(c.meta.get(META_LINEAGE_LABELS) == Some(&recorded), || {
            format!("{}: lineage labels", c.id)
        })?;
        let mut key = lineage.clone();
        key.sort_unstable();
        check(seen.insert(key.join("+")), || {
            format!("{}: duplicate subset", c.id)
        })?;
    }
    Ok(format!("{expected} candidates from groups of 3, 4 and 6; labels match the oracle; the pair group emits none"))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 10] = [
        ("label composition oracle", criterion_1),
        ("entropy equivalence", criterion_2),
        ("budget invariants", criterion_3),
        ("unanimity combinatorics", criterion_4),
        ("COPA-NLI construction", criterion_5),
        ("generated-text filtering", criterion_6),
        ("paper-anchored aggregation", criterion_7),
        ("bootstrap behaviour", criterion_8),
        ("end-to-end determinism", criterion_9),
        ("concatenative sampling fidelity", criterion_10),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let outcome = catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|panic| {
            Err(panic
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| panic.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into()))
        });
        match outcome {
            Ok(detail) => println!("criterion {:>2} PASS  {name}: {detail}", i + 1),
            Err(detail) => {
                failed += 1;
                println!("criterion {:>2} FAIL  {name}: {detail}", i + 1);
            }
        }
    }
    println!(
        "acceptance: {} passed, {failed} failed",
        criteria.len() - failed
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
