//! Session events: the wire record and its typed payloads.

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::error::SessionError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    UserMessage,
    BotElicitation,
    UserSelection,
    BotCommit,
    BotAnswer,
}

/// One line of a session log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionEvent {
    pub seq: u64,
    pub ts: DateTime<Utc>,
    pub kind: EventKind,
    pub payload: serde_json::Value,
}

/// An entity offered to the user.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Candidate {
    pub id: String,
    pub label: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BindingSource {
    Label,
    Lexicon,
}

/// A term in a user message resolved to a graph node.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Binding {
    pub term: String,
    pub node: String,
    pub label: String,
    pub source: BindingSource,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UserMessage {
    pub text: String,
}

/// The bot asked for an example of `word`. An empty candidate list closes
/// the episode for `word` without committing it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BotElicitation {
    pub word: String,
    pub candidates: Vec<Candidate>,
    /// Words waiting for their own episode after this one.
    pub queued: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UserSelection {
    pub word: String,
    pub entity: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BotCommit {
    pub word: String,
    pub node: String,
    pub confidence: f64,
    pub n: usize,
    pub committed_at: DateTime<Utc>,
    /// Words still waiting after this commit, before any follow-up prompt.
    #[serde(default)]
    pub queued: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BotAnswer {
    pub bindings: Vec<Binding>,
}

/// Typed view of an event payload.
#[derive(Debug, Clone, PartialEq)]
pub enum EventBody {
    UserMessage(UserMessage),
    BotElicitation(BotElicitation),
    UserSelection(UserSelection),
    BotCommit(BotCommit),
    BotAnswer(BotAnswer),
}

impl EventBody {
    pub fn kind(&self) -> EventKind {
        match self {
            EventBody::UserMessage(_) => EventKind::UserMessage,
            EventBody::BotElicitation(_) => EventKind::BotElicitation,
            EventBody::UserSelection(_) => EventKind::UserSelection,
            EventBody::BotCommit(_) => EventKind::BotCommit,
            EventBody::BotAnswer(_) => EventKind::BotAnswer,
        }
    }

    pub fn to_payload(&self) -> serde_json::Value {
        let v = match self {
            EventBody::UserMessage(b) => serde_json::to_value(b),
            EventBody::BotElicitation(b) => serde_json::to_value(b),
            EventBody::UserSelection(b) => serde_json::to_value(b),
            EventBody::BotCommit(b) => serde_json::to_value(b),
            EventBody::BotAnswer(b) => serde_json::to_value(b),
        };
        v.expect("event payloads always serialize")
    }
}

impl SessionEvent {
    pub fn new(seq: u64, ts: DateTime<Utc>, body: &EventBody) -> Self {
        SessionEvent {
            seq,
            ts,
            kind: body.kind(),
            payload: body.to_payload(),
        }
    }

    /// Decodes the payload according to `kind`.
    pub fn body(&self) -> Result<EventBody, SessionError> {
        fn de<T: serde::de::DeserializeOwned>(
            seq: u64,
            v: &serde_json::Value,
        ) -> Result<T, SessionError> {
            T::deserialize(v)
                .map_err(|e| SessionError::CorruptLog(format!("event {seq}: bad payload: {e}")))
        }
        let p = &self.payload;
        Ok(match self.kind {
            EventKind::UserMessage => EventBody::UserMessage(de(self.seq, p)?),
            EventKind::BotElicitation => EventBody::BotElicitation(de(self.seq, p)?),
            EventKind::UserSelection => EventBody::UserSelection(de(self.seq, p)?),
            EventKind::BotCommit => EventBody::BotCommit(de(self.seq, p)?),
            EventKind::BotAnswer => EventBody::BotAnswer(de(self.seq, p)?),
        })
    }
}
