//! Few-shot word-meaning learning over a knowledge graph.
//!
//! An unknown word is mapped onto a node of a concept/entity tree by exact
//! Bayesian inference: each node is a hypothesis, weighted a priori by its
//! sibling count and scored by the size principle against the example
//! entities a user picked. The [`session`] module wraps this in a chat-style
//! state machine with a persistent lexicon, [`service`] exposes it over HTTP,
//! and [`sim`] drives scripted scenarios and batch comparisons.

pub mod elicitation;
pub mod error;
pub mod fixtures;
pub mod inference;
pub mod ontology;
pub mod service;
pub mod session;
pub mod sim;

pub use elicitation::{
    commit_decision, expected_entropy_after, select_candidates, Decision, ElicitationConfig,
    Strategy,
};
pub use error::{ConfigError, InferenceError, OntologyError, SessionError};
pub use inference::{
    build_space, entropy, likelihood, map_hypothesis, posterior_batch, posterior_update,
    Hypothesis, HypothesisSpace, Level, Likelihood, MassEntry, Posterior, PosteriorReport,
};
pub use sim::{run_batch, run_scenario, BatchConfig, BatchReport, BatchSource, GeneratorSpec, Learner, ReportFormat, ScenarioResult};
pub use ontology::{ConceptNode, Entity, NodeIx, NodeKind, Ontology, OntologyDocument};
pub use session::{
    detect_unknown_terms, replay, BotReply, EpisodeStatus, LearningEpisode, Lexicon,
    LexiconEntry, LexiconStore, SelectionResult, Session, SessionContext, SessionEvent,
    SessionState,
};
