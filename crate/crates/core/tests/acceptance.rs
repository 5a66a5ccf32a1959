//! Acceptance suite: one PASS/FAIL line per criterion.

mod common;

use std::collections::BTreeMap;
use std::process::{Command, ExitCode};
use std::sync::Arc;
use std::time::{Duration, Instant};

use num_bigint::BigInt;
use num_rational::BigRational;
use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};
use wordlearn::elicitation::{expected_entropy_after, select_candidates, ElicitationConfig, Strategy};
use wordlearn::inference::{build_space, likelihood, Posterior};
use wordlearn::ontology::{NodeIx, Ontology};
use wordlearn::session::{BotReply, Session};
use wordlearn::sim::{observations_to_identify, run_batch, BatchConfig, BatchSource, Learner, ScenarioResult};

type Outcome = Result<String, String>;
type Criterion = (u8, &'static str, fn() -> Outcome);

fn check(cond: bool, msg: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol
}

/// Random tree plus observations drawn from one node's extension.
fn random_case(rng: &mut ChaCha8Rng, max_nodes: usize, max_obs: usize) -> (Arc<Ontology>, Vec<String>) {
    let doc = common::random_document(rng, max_nodes);
    let o = Arc::new(Ontology::from_document(doc).unwrap());
    let nodes: Vec<NodeIx> = o.nodes().filter(|&ix| o.extension_of(ix) > 0).collect();
    let pool = o.extension_entities(*nodes.choose(rng).unwrap());
    let n = rng.random_range(0..=max_obs);
    let obs = (0..n).map(|_| o.id(*pool.choose(rng).unwrap()).to_string()).collect();
    (o, obs)
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let fixture = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/hr-1099.json");
    let out = Command::new(env!("CARGO_BIN_EXE_wordlearn"))
        .args(["simulate", "--ontology", fixture.to_str().unwrap(), "--word", "external"])
        .args(["--observations", "John Contractor,Mary Lawyer", "--threshold", "0.9", "--format", "json"])
        .env("RUST_LOG", "off")
        .output()
        .map_err(|e| e.to_string())?;
    let elapsed = start.elapsed();
    check(out.status.code() == Some(0), format!("exit code {:?}", out.status.code()))?;
    let r: ScenarioResult = serde_json::from_slice(&out.stdout).map_err(|e| e.to_string())?;

    // Hand enumeration. Weights: supplier 1; company, contractor,
    // subscription 3; contractor entities 3; company entities 2; cloudsub 1.
    // After john: john 3·1, contractor 3·(1/3), supplier 1·(1/6), i.e.
    // 3 : 1 : 1/6 = 18 : 6 : 1 over 25. After john, mary: contractor
    // 3·(1/9) = 1/3, supplier 1/36, i.e. 12 : 1 over 13.
    let step1 = [("john_contractor", 18.0 / 25.0), ("contractor", 6.0 / 25.0), ("supplier", 1.0 / 25.0)];
    let step2 = [("contractor", 12.0 / 13.0), ("supplier", 1.0 / 13.0)];
    for (step, expected) in [(1usize, &step1[..]), (2, &step2[..])] {
        let report = &r.steps[step].posterior;
        for m in &report.mass {
            let want = expected.iter().find(|(n, _)| *n == m.node).map_or(0.0, |(_, p)| *p);
            check(close(m.p, want, 1e-9), format!("step {step} {}: {} vs {want}", m.node, m.p))?;
        }
    }
    // Cross-check against the document-level rational oracle.
    let doc = serde_json::from_str(common::HR_1099).unwrap();
    let oracle = common::oracle_posterior(&doc, &["john_contractor", "mary_lawyer"]).unwrap();
    check(oracle["contractor"] == common::ratio(12, 13), "oracle disagrees with hand enumeration")?;
    check(r.commit_step == Some(2), format!("commit step {:?}", r.commit_step))?;
    check(elapsed < Duration::from_secs(1), format!("runtime {elapsed:?}"))?;
    Ok(format!(
        "step1 = 18/25, 6/25, 1/25; step2 = 12/13, 1/13; commit at step 2; {} ms",
        elapsed.as_millis()
    ))
}

fn criterion_2() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst = 0.0f64;
    for case in 0..100 {
        let (o, obs) = random_case(&mut rng, 50, 5);
        check(o.node_count() <= 50, "tree too large")?;
        let space = build_space(&o, "w");
        let batch = Posterior::batch(&space, &obs).map_err(|e| e.to_string())?;
        let mut fold = Posterior::prior(&space);
        for x in &obs {
            fold = fold.update(x).map_err(|e| e.to_string())?;
        }
        let refs: Vec<&str> = obs.iter().map(String::as_str).collect();
        let oracle = common::oracle_posterior(o.document(), &refs).ok_or("oracle found no consistent node")?;
        check(oracle.len() == space.len(), format!("case {case}: hypothesis count"))?;
        for (h, m) in batch.iter() {
            let exact = common::to_f64(&oracle[&h.node]);
            let f = fold.mass_of(&h.node).unwrap();
            worst = worst.max((m - exact).abs()).max((f - exact).abs()).max((f - m).abs());
        }
    }
    let elapsed = start.elapsed();
    check(worst <= 1e-9, format!("max deviation {worst:e}"))?;
    check(elapsed < Duration::from_secs(10), format!("runtime {elapsed:?}"))?;
    Ok(format!("100 trees, max |fold-batch-oracle| = {worst:.1e}; {} ms", elapsed.as_millis()))
}

fn criterion_3() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut samples = 0;
    let mut worst = 0.0f64;
    while samples < 1000 {
        let (o, obs) = random_case(&mut rng, 30, 5);
        let space = build_space(&o, "w");
        let consistent: Vec<_> = space
            .hypotheses()
            .iter()
            .filter(|h| !likelihood(&o, h, &obs).unwrap().is_zero())
            .collect();
        let (h1, h2) = (*consistent.choose(&mut rng).unwrap(), *consistent.choose(&mut rng).unwrap());
        let l1 = likelihood(&o, h1, &obs).unwrap();
        let l2 = likelihood(&o, h2, &obs).unwrap();
        let n = obs.len();
        let expected = num_traits::pow(
            BigRational::new(BigInt::from(h2.extension_size), BigInt::from(h1.extension_size)),
            n,
        );
        check(
            l1.to_ratio() / l2.to_ratio() == expected,
            format!("{} vs {} with n={n}", h1.node, h2.node),
        )?;
        let float = l1.value() / l2.value();
        let want = (h2.extension_size as f64 / h1.extension_size as f64).powi(n as i32);
        worst = worst.max((float - want).abs() / want);
        samples += 1;
    }
    check(worst <= 1e-12, format!("float relative error {worst:e}"))?;
    Ok(format!("1000 (h1, h2, X) samples exact as rationals; float rel. error ≤ {worst:.1e}"))
}

fn criterion_4() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut worst = 0.0f64;
    let mut cases: Vec<(Arc<Ontology>, Vec<String>)> = (0..100).map(|_| random_case(&mut rng, 50, 5)).collect();
    cases.push((common::hr(), vec!["john_contractor".into(), "mary_lawyer".into()]));
    for (o, obs) in &cases {
        let space = build_space(o, "w");
        let base = Posterior::batch(&space, obs).unwrap();
        for c in [0.5, 3.0, 1000.0] {
            let scaled = Arc::new(space.with_weight_scale(c));
            let p = Posterior::batch(&scaled, obs).unwrap();
            let mut q = Posterior::prior(&scaled);
            for x in obs {
                q = q.update(x).unwrap();
            }
            for ((a, b), d) in base.masses().iter().zip(p.masses()).zip(q.masses()) {
                worst = worst.max((a - b).abs()).max((a - d).abs());
            }
        }
    }
    check(worst <= 1e-12, format!("max change {worst:e}"))?;
    Ok(format!("c ∈ {{0.5, 3, 1000}} over 101 cases, max change {worst:.1e}"))
}

fn criterion_5() -> Outcome {
    let mut checked = 0;
    for seed in 0..100u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(500 + seed);
        let (o, obs) = random_case(&mut rng, 40, 3);
        let space = build_space(&o, "w");
        let p = Posterior::batch(&space, &obs).unwrap();
        let h = p.entropy();
        for strategy in [Strategy::Infogain, Strategy::Diverse] {
            for k in 1..=o.entity_count().min(4) {
                let cfg = ElicitationConfig { k, strategy, seed, ..Default::default() };
                let a = select_candidates(&o, &p, &cfg);
                let b = select_candidates(&o, &p, &cfg);
                check(a == b, format!("seed {seed}: nondeterministic {strategy}"))?;
                let mut dedup = a.clone();
                dedup.sort();
                dedup.dedup();
                check(dedup.len() == a.len() && a.len() == k, format!("seed {seed}: duplicates or wrong size {a:?}"))?;
                let e = expected_entropy_after(&o, &p, &a);
                check(e <= h + 1e-12, format!("seed {seed}: E[H] {e} > H {h}"))?;
                checked += 1;
            }
        }
        // Arbitrary candidate sets too.
        let ids: Vec<&str> = o.entities().iter().map(|&e| o.id(e)).collect();
        for _ in 0..5 {
            let size = rng.random_range(1..=ids.len());
            let set: Vec<&str> = ids.choose_multiple(&mut rng, size).copied().collect();
            let e = expected_entropy_after(&o, &p, &set);
            check(e <= h + 1e-12, format!("seed {seed}: E[H] {e} > H {h} for {set:?}"))?;
            checked += 1;
        }
    }
    Ok(format!("100 seeded runs, {checked} candidate sets: E[H] ≤ H, deterministic, no duplicates"))
}

const MESSAGES: [&str; 6] = [
    "1099 for externals",
    "what about vendors",
    "freelancers and partners",
    "1099 for contractors",
    "John Contractor and Company B?",
    "externals or vendors or freelancers",
];

fn criterion_6() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut commits = 0;
    let mut events = 0;
    for i in 0..50u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(600 + i);
        let ctx = common::context(common::hr(), Some(&dir.path().join(format!("lex{i}.json"))));
        let path = dir.path().join(format!("s{i}.jsonl"));
        let mut live = Session::create_logged(format!("s{i}"), Arc::clone(&ctx), &path).map_err(|e| e.to_string())?;
        let entities: Vec<String> = ctx.ontology.entities().iter().map(|&e| ctx.ontology.id(e).to_string()).collect();
        let mut offered: Vec<String> = Vec::new();
        let mut word = String::new();
        let remember = |reply: Option<BotReply>, offered: &mut Vec<String>, word: &mut String| {
            if let Some(BotReply::Elicitation { word: w, candidates }) = reply {
                *word = w;
                *offered = candidates.into_iter().map(|c| c.id).collect();
            }
        };
        for _ in 0..rng.random_range(1..30) {
            match rng.random_range(0..10) {
                0..=2 => {
                    let r = live.handle_message(MESSAGES.choose(&mut rng).unwrap()).ok();
                    remember(r, &mut offered, &mut word);
                }
                3..=8 => {
                    if let Some(e) = offered.choose(&mut rng).cloned() {
                        if let Ok(r) = live.handle_selection(&word, &e) {
                            commits += r.decision.is_commit() as usize;
                            remember(r.next, &mut offered, &mut word);
                        }
                    }
                }
                _ => {
                    let _ = live.handle_selection(&word, entities.choose(&mut rng).unwrap());
                }
            }
        }
        if rng.random_bool(0.3) {
            live.close().map_err(|e| e.to_string())?;
        }
        events += live.events().len();
        let restored = Session::restore(format!("s{i}"), Arc::clone(&ctx), &path).map_err(|e| e.to_string())?;
        check(restored.state().approx_eq(live.state(), 1e-9), format!("session {i}: state differs"))?;
        check(restored.state().lexicon == live.state().lexicon, format!("session {i}: lexicon differs"))?;
        check(restored.events() == live.events(), format!("session {i}: events differ"))?;
    }
    Ok(format!("50 sessions, {events} events, {commits} commits replayed to equal state"))
}

fn criterion_7() -> Outcome {
    let rt = tokio::runtime::Runtime::new().map_err(|e| e.to_string())?;
    rt.block_on(async {
        let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
        let server = common::Server::start(dir.path()).await;
        let c = reqwest::Client::new();
        let call = |url: String, body: Value| {
            let c = c.clone();
            async move {
                let r = c.post(url).json(&body).send().await.map_err(|e| e.to_string())?;
                let status = r.status();
                let v: Value = r.json().await.map_err(|e| e.to_string())?;
                check(status.is_success(), format!("{status}: {v}"))?;
                Ok::<Value, String>(v)
            }
        };
        let id = call(server.url("/api/sessions"), json!({})).await?["session_id"]
            .as_str()
            .unwrap()
            .to_string();
        let reply = call(server.url(&format!("/api/sessions/{id}/messages")), json!({"text": "1099 for externals"})).await?;
        check(reply["type"] == "elicitation" && reply["word"] == "external", format!("reply {reply}"))?;
        let sel = server.url(&format!("/api/sessions/{id}/selections"));
        let first = call(sel.clone(), json!({"word": "external", "entity": "john_contractor"})).await?;
        check(first["status"] == "learning", format!("first selection {}", first["status"]))?;
        let second = call(sel, json!({"word": "external", "entity": "mary_lawyer"})).await?;
        let p = second["posterior"]["mass"]
            .as_array()
            .and_then(|m| m.iter().find(|e| e["node"] == "contractor"))
            .and_then(|e| e["p"].as_f64())
            .ok_or("no contractor mass")?;
        check(second["status"] == "committed", format!("status {}", second["status"]))?;
        check(second["committed_node"] == "contractor", format!("node {}", second["committed_node"]))?;
        check(close(p, 12.0 / 13.0, 1e-9), format!("p = {p}"))?;
        server.stop().await;
        Ok(format!("status committed, committed_node contractor, p = {p:.12}"))
    })
}

fn criterion_8() -> Outcome {
    let o = common::hr();
    let space = build_space(&o, "external");
    let members = ["john_contractor", "mary_lawyer", "mike_lawyer"];
    let mut per_pair = BTreeMap::new();
    for a in members {
        for b in members {
            let got = observations_to_identify(Learner::Bayes, &space, "contractor", &[a, b], 0.9)
                .map_err(|e| e.to_string())?;
            if a != b {
                check(got == Some(2), format!("({a}, {b}) → {got:?}"))?;
            }
            per_pair.insert((a, b), got);
        }
    }
    let distinct = per_pair.iter().filter(|((a, b), _)| a != b).count();
    let source = BatchSource::Ontology(Arc::clone(&o));
    let cfg = |learner| BatchConfig {
        trials: 1000,
        seed: 8,
        learner,
        target: Some("contractor".into()),
        max_observations: 10,
        threshold: 0.9,
    };
    let rule = run_batch(&source, &cfg(Learner::RuleIntersection)).map_err(|e| e.to_string())?;
    check(rule.failures == rule.trials, format!("rule_intersection failures {}/{}", rule.failures, rule.trials))?;
    let bayes = run_batch(&source, &cfg(Learner::Bayes)).map_err(|e| e.to_string())?;
    Ok(format!(
        "9 ordered pairs enumerated, all {distinct} distinct pairs identify at n = 2; rule_intersection fails {}/{}; bayes batch median {:?}",
        rule.failures, rule.trials, bayes.median_observations
    ))
}

fn main() -> ExitCode {
    let criteria: [Criterion; 8] = [
        (1, "scenario reproduction", criterion_1),
        (2, "oracle equivalence", criterion_2),
        (3, "size-principle exactness", criterion_3),
        (4, "prior scale invariance", criterion_4),
        (5, "elicitation properties", criterion_5),
        (6, "event replay", criterion_6),
        (7, "golden HTTP transcript", criterion_7),
        (8, "batch comparison", criterion_8),
    ];
    let mut failed = 0;
    for (n, name, f) in criteria {
        match f() {
            Ok(detail) => println!("PASS criterion {n} ({name}): {detail}"),
            Err(why) => {
                failed += 1;
                println!("FAIL criterion {n} ({name}): {why}");
            }
        }
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
