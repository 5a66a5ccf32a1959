use thiserror::Error;

/// Failures while loading or querying an ontology.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum OntologyError {
    #[error("malformed ontology document: {0}")]
    Parse(String),
    #[error("cannot read ontology: {0}")]
    Io(String),
    #[error("duplicate node id `{0}`")]
    DuplicateId(String),
    #[error("concept `{id}` references missing parent `{parent}`")]
    DanglingParent { id: String, parent: String },
    #[error("entity `{id}` references missing concept `{concept}`")]
    DanglingConcept { id: String, concept: String },
    #[error("concept parent links form a cycle through `{0}`")]
    Cycle(String),
    #[error("ontology has no root concept")]
    NoRoot,
    #[error("ontology has more than one root: {0:?}")]
    MultipleRoots(Vec<String>),
    #[error("ontology has no entities")]
    NoEntities,
    #[error("unknown node `{0}`")]
    UnknownNode(String),
    #[error("unknown entity `{0}`")]
    UnknownEntity(String),
}

impl OntologyError {
    /// True for structural validation failures (as opposed to parse, IO or
    /// lookup errors).
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            OntologyError::DuplicateId(_)
                | OntologyError::DanglingParent { .. }
                | OntologyError::DanglingConcept { .. }
                | OntologyError::Cycle(_)
                | OntologyError::NoRoot
                | OntologyError::MultipleRoots(_)
                | OntologyError::NoEntities
        )
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum InferenceError {
    #[error("unknown entity `{0}`")]
    UnknownEntity(String),
    #[error("no hypothesis is consistent with the observations")]
    NoConsistentHypothesis,
}

impl From<OntologyError> for InferenceError {
    fn from(e: OntologyError) -> Self {
        match e {
            OntologyError::UnknownEntity(id) | OntologyError::UnknownNode(id) => {
                InferenceError::UnknownEntity(id)
            }
            other => InferenceError::UnknownEntity(other.to_string()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConfigError {
    #[error("candidate count k must be between 1 and {max}, got {k}")]
    CandidateCount { k: usize, max: usize },
    #[error("commit threshold must be in (0, 1], got {0}")]
    Threshold(f64),
    #[error("unknown strategy `{0}` (expected `diverse` or `infogain`)")]
    Strategy(String),
    #[error("invalid config: {0}")]
    Invalid(String),
}

/// Errors raised by the conversational session.
#[derive(Debug, Error)]
pub enum SessionError {
    #[error("session is closed")]
    SessionClosed,
    #[error("no open learning episode for `{0}`")]
    NoActiveEpisode(String),
    #[error("`{entity}` was not among the offered candidates for `{word}`")]
    CandidateNotOffered { word: String, entity: String },
    #[error("unknown entity `{0}`")]
    UnknownEntity(String),
    #[error("corrupt event log: {0}")]
    CorruptLog(String),
    #[error("storage error: {0}")]
    Storage(#[from] std::io::Error),
    #[error(transparent)]
    Inference(#[from] InferenceError),
}

impl SessionError {
    /// Stable machine-readable code used in service error bodies.
    pub fn code(&self) -> &'static str {
        match self {
            SessionError::SessionClosed => "session_closed",
            SessionError::NoActiveEpisode(_) => "no_active_episode",
            SessionError::CandidateNotOffered { .. } => "candidate_not_offered",
            SessionError::UnknownEntity(_) => "unknown_entity",
            SessionError::CorruptLog(_) => "corrupt_log",
            SessionError::Storage(_) => "storage_unavailable",
            SessionError::Inference(InferenceError::UnknownEntity(_)) => "unknown_entity",
            SessionError::Inference(InferenceError::NoConsistentHypothesis) => {
                "no_consistent_hypothesis"
            }
        }
    }
}
