//! Scripted scenarios and batch learner comparisons.
//!
//! [`run_scenario`] replays a fixed list of user selections and records the
//! posterior after each one. [`run_batch`] simulates a cooperative user who
//! draws examples uniformly from a hidden true concept, and measures how many
//! examples each learner needs before it pins that concept down.

use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;
use std::sync::Arc;

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::elicitation::{commit_decision, select_candidates, Decision, ElicitationConfig};
use crate::error::{ConfigError, InferenceError, OntologyError};
use crate::inference::{build_space, HypothesisSpace, Posterior, PosteriorReport};
use crate::ontology::{ConceptNode, Entity, NodeIx, NodeKind, Ontology, OntologyDocument};

#[derive(Debug, Error)]
pub enum SimError {
    #[error(transparent)]
    Ontology(#[from] OntologyError),
    #[error(transparent)]
    Inference(#[from] InferenceError),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("unknown entity `{0}`")]
    UnknownEntity(String),
    #[error("label `{0}` matches more than one entity")]
    AmbiguousLabel(String),
    #[error("invalid batch spec: {0}")]
    InvalidSpec(String),
    #[error("cannot write report: {0}")]
    Io(#[from] std::io::Error),
}

/// Posterior and bookkeeping after one step of a scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioStep {
    pub step: usize,
    /// Entity observed at this step; `None` for the prior.
    pub observation: Option<String>,
    pub posterior: PosteriorReport,
    pub map_node: String,
    pub map_p: f64,
    pub entropy: f64,
    pub decision: Decision,
    /// What the bot would offer next from this belief.
    pub candidates: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioResult {
    pub word: String,
    pub observations: Vec<String>,
    /// Step 0 is the prior; step `i` follows the `i`-th observation.
    pub steps: Vec<ScenarioStep>,
    /// First step whose MAP reached the commit threshold.
    pub commit_step: Option<usize>,
}

impl ScenarioResult {
    pub fn committed(&self) -> bool {
        self.commit_step.is_some()
    }
}

/// Resolves an entity reference given either as an id or as a unique label.
pub fn resolve_entity(o: &Ontology, reference: &str) -> Result<NodeIx, SimError> {
    let reference = reference.trim();
    if let Ok(ix) = o.entity(reference) {
        return Ok(ix);
    }
    let exact = o.entities_with_label(reference);
    let matches = if exact.is_empty() {
        o.entities()
            .iter()
            .copied()
            .filter(|&e| o.label(e).eq_ignore_ascii_case(reference))
            .collect()
    } else {
        exact
    };
    match matches.as_slice() {
        [one] => Ok(*one),
        [] => Err(SimError::UnknownEntity(reference.to_string())),
        _ => Err(SimError::AmbiguousLabel(reference.to_string())),
    }
}

/// Plays `observations` (ids or labels) against the prior for `word`.
pub fn run_scenario<S: AsRef<str>>(
    ontology: &Arc<Ontology>,
    word: &str,
    observations: &[S],
    config: &ElicitationConfig,
) -> Result<ScenarioResult, SimError> {
    config.validate(ontology)?;
    let ids: Vec<String> = observations
        .iter()
        .map(|r| resolve_entity(ontology, r.as_ref()).map(|ix| ontology.id(ix).to_string()))
        .collect::<Result<_, _>>()?;

    let space = build_space(ontology, word);
    let mut posterior = Posterior::prior(&space);
    let mut steps = vec![step_record(ontology, 0, None, &posterior, config)];
    for (i, id) in ids.iter().enumerate() {
        posterior = posterior.update(id)?;
        steps.push(step_record(ontology, i + 1, Some(id.clone()), &posterior, config));
    }
    let commit_step = steps.iter().find(|s| s.decision.is_commit()).map(|s| s.step);
    Ok(ScenarioResult {
        word: word.to_string(),
        observations: ids,
        steps,
        commit_step,
    })
}

fn step_record(
    o: &Ontology,
    step: usize,
    observation: Option<String>,
    p: &Posterior,
    config: &ElicitationConfig,
) -> ScenarioStep {
    let (h, map_p) = p.map();
    ScenarioStep {
        step,
        observation,
        posterior: p.report(),
        map_node: h.node.clone(),
        map_p,
        entropy: p.entropy(),
        decision: commit_decision(p, config),
        candidates: select_candidates(o, p, config),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReportFormat {
    Table,
    Json,
    Csv,
}

impl FromStr for ReportFormat {
    type Err = SimError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "table" => Ok(ReportFormat::Table),
            "json" => Ok(ReportFormat::Json),
            "csv" => Ok(ReportFormat::Csv),
            other => Err(SimError::InvalidSpec(format!("unknown format `{other}`"))),
        }
    }
}

/// Renders a scenario as a human table, JSON, or `step,node,p` CSV.
pub fn render_scenario(result: &ScenarioResult, format: ReportFormat) -> Result<String, SimError> {
    match format {
        ReportFormat::Json => Ok(serde_json::to_string_pretty(result).map_err(std::io::Error::from)? + "\n"),
        ReportFormat::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            w.write_record(["step", "node", "p"]).map_err(std::io::Error::from)?;
            for s in &result.steps {
                for m in &s.posterior.mass {
                    w.write_record([s.step.to_string(), m.node.clone(), m.p.to_string()])
                        .map_err(std::io::Error::from)?;
                }
            }
            let bytes = w.into_inner().map_err(|e| e.into_error())?;
            Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
        }
        ReportFormat::Table => {
            let mut out = String::new();
            writeln!(out, "word: {}", result.word).unwrap();
            for s in &result.steps {
                let seen = s.observation.as_deref().unwrap_or("(prior)");
                writeln!(
                    out,
                    "\nstep {} {:<18} MAP {} p={:.6} entropy={:.4} bits",
                    s.step, seen, s.map_node, s.map_p, s.entropy
                )
                .unwrap();
                for m in &s.posterior.mass {
                    writeln!(out, "  {:<20} {:<10} {:.6}", m.node, m.level.as_str(), m.p).unwrap();
                }
            }
            match result.commit_step {
                Some(k) => writeln!(out, "\ncommitted at step {k}").unwrap(),
                None => writeln!(out, "\nno commit").unwrap(),
            }
            Ok(out)
        }
    }
}

/// Writes a rendered report to `out`, or stdout when `out` is `None`.
pub fn emit_report(result: &ScenarioResult, format: ReportFormat, out: Option<&Path>) -> Result<(), SimError> {
    write_output(&render_scenario(result, format)?, out)
}

pub(crate) fn write_output(text: &str, out: Option<&Path>) -> Result<(), SimError> {
    match out {
        Some(path) => std::fs::write(path, text)?,
        None => print!("{text}"),
    }
    Ok(())
}

/// Competing learners for the batch comparison.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Learner {
    /// Sibling prior with the size-principle likelihood, committing at the
    /// configured threshold.
    Bayes,
    /// Keeps every node consistent with all examples; done when one is left.
    RuleIntersection,
    /// Picks the node whose extension contains the most examples, ignoring
    /// extension size; done when that node is unique.
    FrequencyBaseline,
}

impl FromStr for Learner {
    type Err = SimError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "bayes" => Ok(Learner::Bayes),
            "rule_intersection" => Ok(Learner::RuleIntersection),
            "frequency_baseline" => Ok(Learner::FrequencyBaseline),
            other => Err(SimError::InvalidSpec(format!("unknown learner `{other}`"))),
        }
    }
}

/// Number of leading observations `learner` needs to identify `truth`, or
/// `None` if it never does (or the Bayes learner commits to the wrong node).
pub fn observations_to_identify<S: AsRef<str>>(
    learner: Learner,
    space: &Arc<HypothesisSpace>,
    truth: &str,
    observations: &[S],
    threshold: f64,
) -> Result<Option<usize>, SimError> {
    let o = space.ontology();
    match learner {
        Learner::Bayes => {
            let cfg = ElicitationConfig {
                threshold,
                ..ElicitationConfig::default()
            };
            let mut p = Posterior::prior(space);
            for (i, x) in observations.iter().enumerate() {
                p = p.update(x.as_ref())?;
                if let Decision::Commit { node, .. } = commit_decision(&p, &cfg) {
                    return Ok((node == truth).then_some(i + 1));
                }
            }
            Ok(None)
        }
        Learner::RuleIntersection | Learner::FrequencyBaseline => {
            let hyps = space.hypotheses();
            let mut counts = vec![0usize; hyps.len()];
            for (i, x) in observations.iter().enumerate() {
                let e = o.entity(x.as_ref())?;
                for (c, h) in counts.iter_mut().zip(hyps) {
                    if o.covers_ix(h.ix, e) {
                        *c += 1;
                    }
                }
                let n = i + 1;
                let survivors: Vec<usize> = match learner {
                    Learner::RuleIntersection => (0..hyps.len()).filter(|&j| counts[j] == n).collect(),
                    _ => {
                        let best = counts.iter().copied().max().unwrap_or(0);
                        (0..hyps.len()).filter(|&j| counts[j] == best).collect()
                    }
                };
                if let [only] = survivors.as_slice() {
                    return Ok((hyps[*only].node == truth).then_some(n));
                }
            }
            Ok(None)
        }
    }
}

/// Shape of randomly generated trees: every concept above `depth` has
/// between 1 and `branch` child concepts, and every concept at `depth` has
/// between 1 and `leaves` entities.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GeneratorSpec {
    pub depth: usize,
    pub branch: usize,
    pub leaves: usize,
}

const MAX_GENERATED_NODES: usize = 200_000;

impl FromStr for GeneratorSpec {
    type Err = SimError;

    /// Parses `depth:D,branch:B,leaves:E`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = |msg: &str| SimError::InvalidSpec(format!("{msg} in `{s}`"));
        let (mut depth, mut branch, mut leaves) = (None, None, None);
        for part in s.split(',') {
            let (key, value) = part.split_once(':').ok_or_else(|| bad("expected key:value"))?;
            let v: usize = value.trim().parse().map_err(|_| bad("expected a positive integer"))?;
            let slot = match key.trim() {
                "depth" => &mut depth,
                "branch" => &mut branch,
                "leaves" => &mut leaves,
                _ => return Err(bad("unknown key")),
            };
            if slot.replace(v).is_some() {
                return Err(bad("repeated key"));
            }
        }
        let spec = GeneratorSpec {
            depth: depth.ok_or_else(|| bad("missing depth"))?,
            branch: branch.ok_or_else(|| bad("missing branch"))?,
            leaves: leaves.ok_or_else(|| bad("missing leaves"))?,
        };
        spec.validate()?;
        Ok(spec)
    }
}

impl GeneratorSpec {
    pub fn validate(&self) -> Result<(), SimError> {
        if self.depth == 0 || self.branch == 0 || self.leaves == 0 {
            return Err(SimError::InvalidSpec("depth, branch and leaves must be ≥ 1".into()));
        }
        let mut level = 1usize;
        let mut total = 1usize;
        for _ in 0..self.depth {
            level = level.saturating_mul(self.branch);
            total = total.saturating_add(level);
        }
        total = total.saturating_add(level.saturating_mul(self.leaves));
        if total > MAX_GENERATED_NODES {
            return Err(SimError::InvalidSpec(format!(
                "tree could reach {total} nodes (limit {MAX_GENERATED_NODES})"
            )));
        }
        Ok(())
    }

    /// Draws one tree.
    pub fn generate(&self, rng: &mut impl Rng) -> Ontology {
        let mut concepts = vec![ConceptNode {
            id: "c".into(),
            label: "concept c".into(),
            parent: None,
        }];
        let mut entities = Vec::new();
        let mut frontier = vec!["c".to_string()];
        for level in 0..self.depth {
            let mut next = Vec::new();
            for parent in &frontier {
                // The root gets at least two children when `branch` allows.
                let lo = if level == 0 { self.branch.min(2) } else { 1 };
                let n = rng.random_range(lo..=self.branch);
                for i in 0..n {
                    let id = format!("{parent}.{i}");
                    concepts.push(ConceptNode {
                        id: id.clone(),
                        label: format!("concept {id}"),
                        parent: Some(parent.clone()),
                    });
                    next.push(id);
                }
            }
            frontier = next;
        }
        for leaf in &frontier {
            let n = rng.random_range(1..=self.leaves);
            for _ in 0..n {
                let id = format!("e{}", entities.len());
                entities.push(Entity {
                    label: format!("entity {id}"),
                    id,
                    concept: leaf.clone(),
                });
            }
        }
        Ontology::from_document(OntologyDocument { concepts, entities })
            .expect("generated trees are valid")
    }
}

#[derive(Debug, Clone)]
pub enum BatchSource {
    Ontology(Arc<Ontology>),
    Generated(GeneratorSpec),
}

#[derive(Debug, Clone)]
pub struct BatchConfig {
    pub trials: usize,
    pub seed: u64,
    pub learner: Learner,
    /// Fixed true concept; drawn per trial when absent.
    pub target: Option<String>,
    pub max_observations: usize,
    pub threshold: f64,
}

impl Default for BatchConfig {
    fn default() -> Self {
        BatchConfig {
            trials: 100,
            seed: 0,
            learner: Learner::Bayes,
            target: None,
            max_observations: 10,
            threshold: 0.9,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchReport {
    pub learner: Learner,
    pub trials: usize,
    pub successes: usize,
    pub failures: usize,
    pub mean_observations: Option<f64>,
    pub median_observations: Option<f64>,
    /// Observations-to-identify per trial, `None` on failure.
    pub per_trial: Vec<Option<usize>>,
}

fn trial_rng(seed: u64, trial: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial as u64);
    rng
}

/// Runs `config.trials` independent simulated teaching sessions.
///
/// The draws of trial `t` depend only on `(seed, t)`, so different learners
/// run with the same seed see identical example sequences.
pub fn run_batch(source: &BatchSource, config: &BatchConfig) -> Result<BatchReport, SimError> {
    if config.trials == 0 {
        return Err(SimError::InvalidSpec("trials must be > 0".into()));
    }
    if config.max_observations == 0 {
        return Err(SimError::InvalidSpec("max observations must be > 0".into()));
    }
    if !(config.threshold > 0.0 && config.threshold <= 1.0) {
        return Err(ConfigError::Threshold(config.threshold).into());
    }
    if let BatchSource::Generated(spec) = source {
        spec.validate()?;
    }
    if let (BatchSource::Ontology(o), Some(t)) = (source, &config.target) {
        let ix = o.node(t)?;
        if o.extension_of(ix) == 0 {
            return Err(SimError::InvalidSpec(format!("target `{t}` has no entities")));
        }
    }

    let mut per_trial = Vec::with_capacity(config.trials);
    for t in 0..config.trials {
        let mut rng = trial_rng(config.seed, t);
        let ontology = match source {
            BatchSource::Ontology(o) => Arc::clone(o),
            BatchSource::Generated(spec) => Arc::new(spec.generate(&mut rng)),
        };
        let truth = match &config.target {
            Some(t) => ontology.node(t)?,
            None => {
                let concepts: Vec<NodeIx> = ontology
                    .nodes()
                    .filter(|&ix| ontology.kind(ix) == NodeKind::Concept && ontology.extension_of(ix) > 0)
                    .collect();
                *concepts.choose(&mut rng).expect("a valid ontology has a nonempty root")
            }
        };
        let pool = ontology.extension_entities(truth);
        let draws: Vec<&str> = (0..config.max_observations)
            .map(|_| ontology.id(*pool.choose(&mut rng).expect("nonempty extension")))
            .collect();
        let space = build_space(&ontology, "w");
        per_trial.push(observations_to_identify(
            config.learner,
            &space,
            ontology.id(truth),
            &draws,
            config.threshold,
        )?);
    }

    let mut hits: Vec<usize> = per_trial.iter().flatten().copied().collect();
    hits.sort_unstable();
    let successes = hits.len();
    let mean = (successes > 0).then(|| hits.iter().sum::<usize>() as f64 / successes as f64);
    let median = (successes > 0).then(|| {
        let mid = successes / 2;
        if successes % 2 == 1 {
            hits[mid] as f64
        } else {
            (hits[mid - 1] + hits[mid]) as f64 / 2.0
        }
    });
    Ok(BatchReport {
        learner: config.learner,
        trials: config.trials,
        successes,
        failures: config.trials - successes,
        mean_observations: mean,
        median_observations: median,
        per_trial,
    })
}

pub fn render_batch(report: &BatchReport, format: ReportFormat) -> Result<String, SimError> {
    match format {
        ReportFormat::Json => Ok(serde_json::to_string_pretty(report).map_err(std::io::Error::from)? + "\n"),
        ReportFormat::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            w.write_record(["trial", "observations"]).map_err(std::io::Error::from)?;
            for (i, n) in report.per_trial.iter().enumerate() {
                let n = n.map(|n| n.to_string()).unwrap_or_default();
                w.write_record([i.to_string(), n]).map_err(std::io::Error::from)?;
            }
            let bytes = w.into_inner().map_err(|e| e.into_error())?;
            Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
        }
        ReportFormat::Table => {
            let fmt = |x: Option<f64>| x.map_or("-".to_string(), |v| format!("{v:.3}"));
            Ok(format!(
                "learner   {:?}\ntrials    {}\nsuccesses {}\nfailures  {}\nmean obs  {}\nmedian    {}\n",
                report.learner,
                report.trials,
                report.successes,
                report.failures,
                fmt(report.mean_observations),
                fmt(report.median_observations),
            ))
        }
    }
}

pub fn emit_batch(report: &BatchReport, format: ReportFormat, out: Option<&Path>) -> Result<(), SimError> {
    write_output(&render_batch(report, format)?, out)
}
