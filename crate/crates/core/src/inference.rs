//! Exact Bayesian inference over graph-node hypotheses.
//!
//! Every node with a nonempty extension is a candidate meaning for the word
//! under study. The prior weight of a node is its sibling weight (siblings plus
//! itself); the likelihood of observations `X` under a node is
//! `(1 / ext(h))^n` when every observation falls inside the node's extension
//! and zero otherwise. Posteriors are kept as per-hypothesis log weights so
//! that incremental updates and batch computation share the exact same
//! arithmetic and never underflow before normalization.

use std::cmp::Ordering;
use std::sync::Arc;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};

use crate::error::InferenceError;
use crate::ontology::{NodeIx, NodeKind, Ontology};

/// Masses closer than this are treated as tied by [`Posterior::map`].
pub const TIE_EPSILON: f64 = 1e-12;

/// Depth class of a hypothesis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Level {
    /// The root concept.
    General,
    /// Any non-root concept.
    Specific,
    /// A single entity.
    Individual,
}

impl Level {
    fn of(o: &Ontology, ix: NodeIx) -> Self {
        match o.kind(ix) {
            NodeKind::Entity => Level::Individual,
            NodeKind::Concept if ix == o.root() => Level::General,
            NodeKind::Concept => Level::Specific,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Level::General => "general",
            Level::Specific => "specific",
            Level::Individual => "individual",
        }
    }
}

/// One graph node considered as the meaning of a word.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Hypothesis {
    pub node: String,
    pub ix: NodeIx,
    pub prior_weight: u64,
    pub extension_size: u64,
    pub level: Level,
}

/// The hypotheses available for one word, with their prior.
#[derive(Debug, Clone)]
pub struct HypothesisSpace {
    word: String,
    ontology: Arc<Ontology>,
    hypotheses: Vec<Hypothesis>,
    /// Unnormalized prior weights; sibling weights unless rescaled.
    weights: Vec<f64>,
    prior: Vec<f64>,
}

impl HypothesisSpace {
    /// Builds the space for `word`: every concept with a nonempty extension
    /// plus every entity, ordered by node id.
    pub fn build(ontology: &Arc<Ontology>, word: &str) -> Self {
        let mut hypotheses: Vec<Hypothesis> = ontology
            .nodes()
            .filter(|&ix| ontology.extension_of(ix) > 0)
            .map(|ix| Hypothesis {
                node: ontology.id(ix).to_string(),
                ix,
                prior_weight: ontology.sibling_weight_of(ix),
                extension_size: ontology.extension_of(ix),
                level: Level::of(ontology, ix),
            })
            .collect();
        hypotheses.sort_by(|a, b| a.node.cmp(&b.node));
        let weights: Vec<f64> = hypotheses.iter().map(|h| h.prior_weight as f64).collect();
        let prior = normalize(&weights);
        HypothesisSpace {
            word: word.to_string(),
            ontology: Arc::clone(ontology),
            hypotheses,
            weights,
            prior,
        }
    }

    /// A copy of this space with every unnormalized prior weight multiplied
    /// by `factor`. The normalized prior is unchanged.
    pub fn with_weight_scale(&self, factor: f64) -> Self {
        assert!(factor > 0.0 && factor.is_finite(), "scale must be positive");
        let mut scaled = self.clone();
        for w in &mut scaled.weights {
            *w *= factor;
        }
        scaled
    }

    pub fn word(&self) -> &str {
        &self.word
    }

    pub fn ontology(&self) -> &Arc<Ontology> {
        &self.ontology
    }

    pub fn hypotheses(&self) -> &[Hypothesis] {
        &self.hypotheses
    }

    pub fn len(&self) -> usize {
        self.hypotheses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.hypotheses.is_empty()
    }

    /// Normalized prior, aligned with [`hypotheses`](Self::hypotheses).
    pub fn prior(&self) -> &[f64] {
        &self.prior
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Position of the hypothesis for node `id`, if it is in the space.
    pub fn position(&self, id: &str) -> Option<usize> {
        self.hypotheses
            .binary_search_by(|h| h.node.as_str().cmp(id))
            .ok()
    }

    pub fn prior_of(&self, id: &str) -> Option<f64> {
        self.position(id).map(|i| self.prior[i])
    }
}

fn normalize(weights: &[f64]) -> Vec<f64> {
    let total: f64 = weights.iter().sum();
    weights.iter().map(|w| w / total).collect()
}

/// Size-principle likelihood of a set of observations under one hypothesis.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Likelihood {
    /// Some observation lies outside the hypothesis.
    Zero,
    /// All `n` observations are consistent; the value is `(1/extension)^n`.
    Consistent { extension: u64, n: u32 },
}

impl Likelihood {
    /// Exact value as a rational number.
    pub fn to_ratio(self) -> BigRational {
        match self {
            Likelihood::Zero => BigRational::zero(),
            Likelihood::Consistent { extension, n } => BigRational::new(
                BigInt::one(),
                num_traits::pow(BigInt::from(extension), n as usize),
            ),
        }
    }

    pub fn value(self) -> f64 {
        match self {
            Likelihood::Zero => 0.0,
            Likelihood::Consistent { extension, n } => (extension as f64).powi(-(n as i32)),
        }
    }

    /// Natural log of the value; negative infinity for [`Likelihood::Zero`].
    pub fn ln(self) -> f64 {
        match self {
            Likelihood::Zero => f64::NEG_INFINITY,
            Likelihood::Consistent { extension, n } => -(n as f64) * (extension as f64).ln(),
        }
    }

    pub fn is_zero(self) -> bool {
        matches!(self, Likelihood::Zero)
    }
}

/// Computes `P(X | h)` up to the size-principle proportionality.
pub fn likelihood<S: AsRef<str>>(
    ontology: &Ontology,
    hypothesis: &Hypothesis,
    observations: &[S],
) -> Result<Likelihood, InferenceError> {
    let mut consistent = true;
    for x in observations {
        let e = ontology.entity(x.as_ref())?;
        consistent &= ontology.covers_ix(hypothesis.ix, e);
    }
    if !consistent {
        return Ok(Likelihood::Zero);
    }
    Ok(Likelihood::Consistent {
        extension: hypothesis.extension_size,
        n: observations.len() as u32,
    })
}

/// Normalized distribution over a [`HypothesisSpace`] given observations.
#[derive(Debug, Clone)]
pub struct Posterior {
    space: Arc<HypothesisSpace>,
    observations: Vec<String>,
    log_weight: Vec<f64>,
    mass: Vec<f64>,
}

impl Posterior {
    /// Computes the posterior for `observations` in one pass.
    pub fn batch<S: AsRef<str>>(
        space: &Arc<HypothesisSpace>,
        observations: &[S],
    ) -> Result<Self, InferenceError> {
        let o = space.ontology();
        let entities = observations
            .iter()
            .map(|x| o.entity(x.as_ref()).map_err(InferenceError::from))
            .collect::<Result<Vec<_>, _>>()?;
        let log_weight: Vec<f64> = space
            .hypotheses
            .iter()
            .zip(&space.weights)
            .map(|(h, w)| {
                entities.iter().fold(w.ln(), |acc, &e| {
                    acc + step_log_likelihood(o, h, e)
                })
            })
            .collect();
        let mass = normalize_log(&log_weight)?;
        Ok(Posterior {
            space: Arc::clone(space),
            observations: observations.iter().map(|x| x.as_ref().to_string()).collect(),
            log_weight,
            mass,
        })
    }

    /// The prior, viewed as a posterior over zero observations.
    pub fn prior(space: &Arc<HypothesisSpace>) -> Self {
        Self::batch::<&str>(space, &[]).expect("prior is always normalizable")
    }

    /// Incorporates one more observation.
    pub fn update(&self, x: &str) -> Result<Self, InferenceError> {
        let o = self.space.ontology();
        let e = o.entity(x)?;
        let log_weight: Vec<f64> = self
            .space
            .hypotheses
            .iter()
            .zip(&self.log_weight)
            .map(|(h, lw)| lw + step_log_likelihood(o, h, e))
            .collect();
        let mass = normalize_log(&log_weight)?;
        let mut observations = self.observations.clone();
        observations.push(x.to_string());
        Ok(Posterior {
            space: Arc::clone(&self.space),
            observations,
            log_weight,
            mass,
        })
    }

    pub fn space(&self) -> &Arc<HypothesisSpace> {
        &self.space
    }

    pub fn word(&self) -> &str {
        self.space.word()
    }

    pub fn observations(&self) -> &[String] {
        &self.observations
    }

    pub fn n(&self) -> usize {
        self.observations.len()
    }

    /// Masses aligned with the space's hypotheses.
    pub fn masses(&self) -> &[f64] {
        &self.mass
    }

    pub fn mass_of(&self, id: &str) -> Option<f64> {
        self.space.position(id).map(|i| self.mass[i])
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Hypothesis, f64)> {
        self.space.hypotheses.iter().zip(self.mass.iter().copied())
    }

    /// Most probable hypothesis. Ties go to the smaller extension, then to
    /// the lexicographically smaller node id.
    pub fn map(&self) -> (&Hypothesis, f64) {
        self.iter()
            .min_by(|(ha, pa), (hb, pb)| {
                if (pa - pb).abs() > TIE_EPSILON {
                    pb.partial_cmp(pa).unwrap_or(Ordering::Equal)
                } else {
                    ha.extension_size
                        .cmp(&hb.extension_size)
                        .then_with(|| ha.node.cmp(&hb.node))
                }
            })
            .expect("hypothesis spaces are never empty")
    }

    /// Shannon entropy in bits.
    pub fn entropy(&self) -> f64 {
        entropy_bits(&self.mass)
    }

    #[cfg(test)]
    pub(crate) fn set_masses_for_test(&mut self, mass: Vec<f64>) {
        assert_eq!(mass.len(), self.mass.len());
        self.log_weight = mass.iter().map(|m| m.ln()).collect();
        self.mass = mass;
    }

    /// Element-wise comparison of masses against another posterior over the
    /// same hypotheses.
    pub fn approx_eq(&self, other: &Posterior, tol: f64) -> bool {
        self.word() == other.word()
            && self.observations == other.observations
            && self.space.hypotheses == other.space.hypotheses
            && self
                .mass
                .iter()
                .zip(&other.mass)
                .all(|(a, b)| (a - b).abs() <= tol)
    }

    /// Serializable view, sorted by descending mass then node id.
    pub fn report(&self) -> PosteriorReport {
        let mut mass: Vec<MassEntry> = self
            .iter()
            .map(|(h, p)| MassEntry {
                node: h.node.clone(),
                level: h.level,
                p,
            })
            .collect();
        mass.sort_by(|a, b| {
            b.p.partial_cmp(&a.p)
                .unwrap_or(Ordering::Equal)
                .then_with(|| a.node.cmp(&b.node))
        });
        PosteriorReport {
            word: self.word().to_string(),
            n: self.n(),
            mass,
        }
    }
}

fn step_log_likelihood(o: &Ontology, h: &Hypothesis, entity: NodeIx) -> f64 {
    if o.covers_ix(h.ix, entity) {
        -(h.extension_size as f64).ln()
    } else {
        f64::NEG_INFINITY
    }
}

fn normalize_log(log_weight: &[f64]) -> Result<Vec<f64>, InferenceError> {
    let max = log_weight
        .iter()
        .copied()
        .fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return Err(InferenceError::NoConsistentHypothesis);
    }
    let scaled: Vec<f64> = log_weight.iter().map(|lw| (lw - max).exp()).collect();
    let total: f64 = scaled.iter().sum();
    Ok(scaled.into_iter().map(|w| w / total).collect())
}

/// Shannon entropy in bits of a probability vector, with `0 log 0 = 0`.
pub fn entropy_bits(p: &[f64]) -> f64 {
    let h: f64 = p
        .iter()
        .filter(|&&q| q > 0.0)
        .map(|&q| -q * q.log2())
        .sum();
    h.max(0.0)
}

/// Builds the hypothesis space for `word` over `ontology`.
pub fn build_space(ontology: &Arc<Ontology>, word: &str) -> Arc<HypothesisSpace> {
    Arc::new(HypothesisSpace::build(ontology, word))
}

pub fn posterior_batch<S: AsRef<str>>(
    space: &Arc<HypothesisSpace>,
    observations: &[S],
) -> Result<Posterior, InferenceError> {
    Posterior::batch(space, observations)
}

pub fn posterior_update(p: &Posterior, x: &str) -> Result<Posterior, InferenceError> {
    p.update(x)
}

/// `(node id, probability)` of the most probable hypothesis.
pub fn map_hypothesis(p: &Posterior) -> (String, f64) {
    let (h, m) = p.map();
    (h.node.clone(), m)
}

pub fn entropy(p: &Posterior) -> f64 {
    p.entropy()
}

/// Wire form of a posterior.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PosteriorReport {
    pub word: String,
    pub n: usize,
    pub mass: Vec<MassEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MassEntry {
    pub node: String,
    pub level: Level,
    pub p: f64,
}

impl PosteriorReport {
    pub fn p(&self, node: &str) -> Option<f64> {
        self.mass.iter().find(|m| m.node == node).map(|m| m.p)
    }
}
