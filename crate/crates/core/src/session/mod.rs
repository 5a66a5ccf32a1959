//! The bot's conversational state machine.
//!
//! A [`Session`] detects unknown words in user messages, runs one learning
//! episode at a time (further unknown words wait in a FIFO queue), and commits
//! learned meanings to the shared [`LexiconStore`].
//!
//! State is event-sourced. Every live operation first decides which events to
//! emit, then folds them into [`SessionState`] through [`SessionState::apply`],
//! the same function [`replay`] uses. Replaying a persisted log therefore
//! reproduces the live state exactly.

pub mod events;
pub mod store;
pub mod text;

use std::collections::VecDeque;
use std::path::PathBuf;
use std::sync::Arc;

use chrono::Utc;
use serde::{Deserialize, Serialize};

use crate::elicitation::{commit_decision, select_candidates, Decision, ElicitationConfig};
use crate::error::SessionError;
use crate::inference::{build_space, Posterior, PosteriorReport};
use crate::ontology::Ontology;

pub use events::{
    Binding, BindingSource, BotAnswer, BotCommit, BotElicitation, Candidate, EventBody,
    EventKind, SessionEvent, UserMessage, UserSelection,
};
pub use store::{EventLog, Lexicon, LexiconEntry, LexiconStore};
pub use text::{detect_unknown_terms, normalize_word, tokenize, Vocabulary};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EpisodeStatus {
    AwaitingSelection,
    Committed,
    Abandoned,
}

/// One word under study.
#[derive(Debug, Clone)]
pub struct LearningEpisode {
    pub word: String,
    pub observations: Vec<String>,
    pub posterior: Posterior,
    pub status: EpisodeStatus,
    pub pending_candidates: Vec<String>,
}

impl LearningEpisode {
    fn approx_eq(&self, other: &Self, tol: f64) -> bool {
        self.word == other.word
            && self.observations == other.observations
            && self.status == other.status
            && self.pending_candidates == other.pending_candidates
            && self.posterior.approx_eq(&other.posterior, tol)
    }
}

/// Everything a session log determines.
#[derive(Debug, Clone)]
pub struct SessionState {
    ontology: Arc<Ontology>,
    pub episodes: Vec<LearningEpisode>,
    pub queue: VecDeque<String>,
    /// Meanings committed by this session.
    pub lexicon: Lexicon,
    pub last_seq: u64,
}

impl SessionState {
    pub fn new(ontology: Arc<Ontology>) -> Self {
        SessionState {
            ontology,
            episodes: Vec::new(),
            queue: VecDeque::new(),
            lexicon: Lexicon::default(),
            last_seq: 0,
        }
    }

    /// The episode currently awaiting a selection, if any.
    pub fn active(&self) -> Option<&LearningEpisode> {
        self.episodes
            .last()
            .filter(|e| e.status == EpisodeStatus::AwaitingSelection)
    }

    fn active_mut(&mut self) -> Option<&mut LearningEpisode> {
        self.episodes
            .last_mut()
            .filter(|e| e.status == EpisodeStatus::AwaitingSelection)
    }

    /// Latest episode for `word`, whatever its status.
    pub fn episode(&self, word: &str) -> Option<&LearningEpisode> {
        self.episodes.iter().rev().find(|e| e.word == word)
    }

    /// Folds one event into the state. Fails if the event is inconsistent
    /// with the current state or out of sequence.
    pub fn apply(&mut self, event: &SessionEvent) -> Result<(), SessionError> {
        if event.seq != self.last_seq + 1 {
            return Err(SessionError::CorruptLog(format!(
                "expected seq {}, found {}",
                self.last_seq + 1,
                event.seq
            )));
        }
        let corrupt = |msg: String| SessionError::CorruptLog(format!("event {}: {msg}", event.seq));
        match event.body()? {
            EventBody::UserMessage(_) | EventBody::BotAnswer(_) => {}
            EventBody::BotElicitation(b) => {
                for c in &b.candidates {
                    self.ontology
                        .entity(&c.id)
                        .map_err(|_| corrupt(format!("unknown candidate `{}`", c.id)))?;
                }
                let ids: Vec<String> = b.candidates.iter().map(|c| c.id.clone()).collect();
                match self.active_mut() {
                    Some(ep) if ep.word == b.word => {
                        if ids.is_empty() {
                            ep.status = EpisodeStatus::Abandoned;
                        }
                        ep.pending_candidates = ids;
                    }
                    Some(ep) => {
                        return Err(corrupt(format!(
                            "elicitation for `{}` while `{}` is open",
                            b.word, ep.word
                        )))
                    }
                    None => {
                        if ids.is_empty() {
                            return Err(corrupt(format!("empty elicitation for `{}`", b.word)));
                        }
                        let space = build_space(&self.ontology, &b.word);
                        self.episodes.push(LearningEpisode {
                            word: b.word.clone(),
                            observations: Vec::new(),
                            posterior: Posterior::prior(&space),
                            status: EpisodeStatus::AwaitingSelection,
                            pending_candidates: ids,
                        });
                    }
                }
                self.queue = b.queued.into();
            }
            EventBody::UserSelection(s) => {
                let ep = self
                    .active_mut()
                    .filter(|ep| ep.word == s.word)
                    .ok_or_else(|| corrupt(format!("selection for `{}` without episode", s.word)))?;
                if !ep.pending_candidates.contains(&s.entity) {
                    return Err(corrupt(format!("`{}` was not offered", s.entity)));
                }
                ep.posterior = ep
                    .posterior
                    .update(&s.entity)
                    .map_err(|e| corrupt(e.to_string()))?;
                ep.observations.push(s.entity);
            }
            EventBody::BotCommit(c) => {
                let ep = self
                    .active_mut()
                    .filter(|ep| ep.word == c.word)
                    .ok_or_else(|| corrupt(format!("commit for `{}` without episode", c.word)))?;
                ep.status = EpisodeStatus::Committed;
                ep.pending_candidates.clear();
                self.queue = c.queued.into();
                self.lexicon.insert(
                    c.word,
                    LexiconEntry {
                        node: c.node,
                        confidence: c.confidence,
                        n: c.n,
                        committed_at: c.committed_at,
                    },
                );
            }
        }
        self.last_seq = event.seq;
        Ok(())
    }

    /// Structural comparison with posterior masses compared within `tol`.
    pub fn approx_eq(&self, other: &Self, tol: f64) -> bool {
        self.last_seq == other.last_seq
            && self.queue == other.queue
            && self.lexicon == other.lexicon
            && self.episodes.len() == other.episodes.len()
            && self
                .episodes
                .iter()
                .zip(&other.episodes)
                .all(|(a, b)| a.approx_eq(b, tol))
    }
}

/// Rebuilds session state from a log. Sequence numbers must run 1, 2, 3, ...
pub fn replay(ontology: &Arc<Ontology>, events: &[SessionEvent]) -> Result<SessionState, SessionError> {
    let mut state = SessionState::new(Arc::clone(ontology));
    for e in events {
        state.apply(e)?;
    }
    Ok(state)
}

/// What the bot says back to a user message.
///
/// An answer only lists the resolved term bindings; answering the actual
/// question is outside this crate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum BotReply {
    Elicitation {
        word: String,
        candidates: Vec<Candidate>,
    },
    Answer {
        bindings: Vec<Binding>,
    },
}

/// Outcome of a user selection.
#[derive(Debug, Clone)]
pub struct SelectionResult {
    pub posterior: Posterior,
    pub decision: Decision,
    /// Follow-up prompt: new candidates for the same word, or the first
    /// prompt for the next queued word after a commit.
    pub next: Option<BotReply>,
}

impl SelectionResult {
    pub fn report(&self) -> PosteriorReport {
        self.posterior.report()
    }
}

/// Read-only context shared by every session of a deployment.
#[derive(Debug)]
pub struct SessionContext {
    pub ontology: Arc<Ontology>,
    pub vocabulary: Vocabulary,
    pub config: ElicitationConfig,
    pub lexicon: Arc<LexiconStore>,
}

impl SessionContext {
    pub fn new(ontology: Arc<Ontology>, config: ElicitationConfig, lexicon: Arc<LexiconStore>) -> Self {
        let vocabulary = Vocabulary::with_default_stopwords(&ontology);
        SessionContext {
            ontology,
            vocabulary,
            config,
            lexicon,
        }
    }

    pub fn with_stopwords(mut self, stopwords: &[String]) -> Self {
        self.vocabulary = Vocabulary::new(&self.ontology, stopwords);
        self
    }

    fn knows(&self, word: &str) -> bool {
        self.vocabulary.contains(word) || self.lexicon.contains(word)
    }
}

/// A single conversation. Mutations must be serialized by the caller.
#[derive(Debug)]
pub struct Session {
    id: String,
    ctx: Arc<SessionContext>,
    state: SessionState,
    events: Vec<SessionEvent>,
    log: Option<EventLog>,
    closed: bool,
}

impl Session {
    /// A session whose events stay in memory.
    pub fn new(id: impl Into<String>, ctx: Arc<SessionContext>) -> Self {
        let state = SessionState::new(Arc::clone(&ctx.ontology));
        Session {
            id: id.into(),
            ctx,
            state,
            events: Vec::new(),
            log: None,
            closed: false,
        }
    }

    /// A session persisted to a fresh log file at `path`.
    pub fn create_logged(
        id: impl Into<String>,
        ctx: Arc<SessionContext>,
        path: impl Into<PathBuf>,
    ) -> Result<Self, SessionError> {
        let mut s = Session::new(id, ctx);
        s.log = Some(EventLog::create(path)?);
        Ok(s)
    }

    /// Restores a session from its log file, continuing to append to it.
    pub fn restore(
        id: impl Into<String>,
        ctx: Arc<SessionContext>,
        path: impl Into<PathBuf>,
    ) -> Result<Self, SessionError> {
        let log = EventLog::attach(path);
        let events = log.read()?;
        let state = replay(&ctx.ontology, &events)?;
        Ok(Session {
            id: id.into(),
            ctx,
            state,
            events,
            log: Some(log),
            closed: false,
        })
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn state(&self) -> &SessionState {
        &self.state
    }

    pub fn events(&self) -> &[SessionEvent] {
        &self.events
    }

    pub fn context(&self) -> &Arc<SessionContext> {
        &self.ctx
    }

    pub fn is_closed(&self) -> bool {
        self.closed
    }

    /// Appends events atomically: all of them reach the state and the log,
    /// or none do.
    fn emit(&mut self, bodies: Vec<EventBody>) -> Result<(), SessionError> {
        let mut next = self.state.clone();
        let mut new_events = Vec::with_capacity(bodies.len());
        for body in &bodies {
            let event = SessionEvent::new(next.last_seq + 1, Utc::now(), body);
            next.apply(&event)?;
            new_events.push(event);
        }
        if let Some(log) = &self.log {
            let mut all = self.events.clone();
            all.extend(new_events.iter().cloned());
            log.persist(&all)?;
        }
        self.events.extend(new_events);
        self.state = next;
        Ok(())
    }

    fn candidates_for(&self, p: &Posterior) -> Vec<Candidate> {
        let o = &self.ctx.ontology;
        select_candidates(o, p, &self.ctx.config)
            .into_iter()
            .map(|id| {
                let label = o.label(o.entity(&id).expect("selected from ontology")).to_string();
                Candidate { id, label }
            })
            .collect()
    }

    /// Opens an episode for the next queued word that is still unknown.
    fn open_next(&self, queue: &mut VecDeque<String>) -> Option<BotElicitation> {
        while let Some(word) = queue.pop_front() {
            if self.ctx.knows(&word) {
                continue;
            }
            let space = build_space(&self.ctx.ontology, &word);
            let candidates = self.candidates_for(&Posterior::prior(&space));
            return Some(BotElicitation {
                word,
                candidates,
                queued: queue.iter().cloned().collect(),
            });
        }
        None
    }

    fn bindings(&self, text: &str) -> Vec<Binding> {
        let o = &self.ctx.ontology;
        let vocab = &self.ctx.vocabulary;
        let tokens = tokenize(text);
        let mut out = Vec::new();
        let mut i = 0;
        'outer: while i < tokens.len() {
            let longest = vocab.longest_label().min(tokens.len() - i);
            for n in (1..=longest).rev() {
                let phrase = tokens[i..i + n].join(" ");
                let singular = text::singular(&tokens[i + n - 1])
                    .map(|s| {
                        let mut t = tokens[i..i + n - 1].to_vec();
                        t.push(s.to_string());
                        t.join(" ")
                    });
                for term in std::iter::once(phrase).chain(singular) {
                    if let Some(ix) = vocab.label(&term) {
                        out.push(Binding {
                            term,
                            node: o.id(ix).to_string(),
                            label: o.label(ix).to_string(),
                            source: BindingSource::Label,
                        });
                        i += n;
                        continue 'outer;
                    }
                }
            }
            let token = &tokens[i];
            let forms = std::iter::once(token.as_str()).chain(text::singular(token));
            for form in forms {
                if let Some(entry) = self.ctx.lexicon.get(form) {
                    let label = o
                        .node(&entry.node)
                        .map(|ix| o.label(ix).to_string())
                        .unwrap_or_default();
                    out.push(Binding {
                        term: form.to_string(),
                        node: entry.node,
                        label,
                        source: BindingSource::Lexicon,
                    });
                    break;
                }
            }
            i += 1;
        }
        out
    }

    /// Processes one user message.
    pub fn handle_message(&mut self, text: &str) -> Result<BotReply, SessionError> {
        if self.closed {
            return Err(SessionError::SessionClosed);
        }
        let unknown = text::detect_unknown_with(text, |w| self.ctx.knows(w));
        let mut bodies = vec![EventBody::UserMessage(UserMessage {
            text: text.to_string(),
        })];

        if unknown.is_empty() {
            let bindings = self.bindings(text);
            bodies.push(EventBody::BotAnswer(BotAnswer {
                bindings: bindings.clone(),
            }));
            self.emit(bodies)?;
            return Ok(BotReply::Answer { bindings });
        }

        let mut queue = self.state.queue.clone();
        let active_word = self.state.active().map(|e| e.word.clone());
        for w in unknown {
            if Some(&w) != active_word.as_ref() && !queue.contains(&w) {
                queue.push_back(w);
            }
        }
        let elicitation = match self.state.active() {
            Some(ep) => {
                let candidates = self.candidates_for(&ep.posterior);
                BotElicitation {
                    word: ep.word.clone(),
                    candidates,
                    queued: queue.into_iter().collect(),
                }
            }
            None => self
                .open_next(&mut queue)
                .expect("queue holds at least one unknown word"),
        };
        let reply = BotReply::Elicitation {
            word: elicitation.word.clone(),
            candidates: elicitation.candidates.clone(),
        };
        bodies.push(EventBody::BotElicitation(elicitation));
        self.emit(bodies)?;
        Ok(reply)
    }

    /// Records the user's pick of `entity` as an example of `word`.
    pub fn handle_selection(&mut self, word: &str, entity: &str) -> Result<SelectionResult, SessionError> {
        if self.closed {
            return Err(SessionError::SessionClosed);
        }
        let word = normalize_word(word);
        let ep = self
            .state
            .active()
            .filter(|e| e.word == word)
            .ok_or_else(|| SessionError::NoActiveEpisode(word.clone()))?;
        if self.ctx.ontology.entity(entity).is_err() {
            return Err(SessionError::UnknownEntity(entity.to_string()));
        }
        if !ep.pending_candidates.iter().any(|c| c == entity) {
            return Err(SessionError::CandidateNotOffered {
                word,
                entity: entity.to_string(),
            });
        }

        let posterior = ep.posterior.update(entity)?;
        let decision = commit_decision(&posterior, &self.ctx.config);
        let mut bodies = vec![EventBody::UserSelection(UserSelection {
            word: word.clone(),
            entity: entity.to_string(),
        })];

        let next = match &decision {
            Decision::Commit { node, probability } => {
                let committed_at = Utc::now();
                let mut queue = self.state.queue.clone();
                let follow = self.open_next_excluding(&mut queue, &word);
                bodies.push(EventBody::BotCommit(BotCommit {
                    word: word.clone(),
                    node: node.clone(),
                    confidence: *probability,
                    n: posterior.n(),
                    committed_at,
                    queued: queue.iter().cloned().collect(),
                }));
                let reply = follow.as_ref().map(|e| BotReply::Elicitation {
                    word: e.word.clone(),
                    candidates: e.candidates.clone(),
                });
                if let Some(e) = follow {
                    bodies.push(EventBody::BotElicitation(e));
                }
                self.emit(bodies)?;
                self.ctx.lexicon.commit(
                    &word,
                    LexiconEntry {
                        node: node.clone(),
                        confidence: *probability,
                        n: posterior.n(),
                        committed_at,
                    },
                )?;
                reply
            }
            Decision::KeepLearning => {
                let candidates = self.candidates_for(&posterior);
                let reply = BotReply::Elicitation {
                    word: word.clone(),
                    candidates: candidates.clone(),
                };
                bodies.push(EventBody::BotElicitation(BotElicitation {
                    word: word.clone(),
                    candidates,
                    queued: self.state.queue.iter().cloned().collect(),
                }));
                self.emit(bodies)?;
                Some(reply)
            }
        };

        Ok(SelectionResult {
            posterior,
            decision,
            next,
        })
    }

    fn open_next_excluding(&self, queue: &mut VecDeque<String>, word: &str) -> Option<BotElicitation> {
        queue.retain(|w| w != word);
        self.open_next(queue)
    }

    /// Current belief about `word`: the episode's posterior, or the prior if
    /// the word is queued but not yet under study.
    pub fn posterior(&self, word: &str) -> Option<Posterior> {
        let word = normalize_word(word);
        if let Some(ep) = self.state.episode(&word) {
            return Some(ep.posterior.clone());
        }
        if self.state.queue.contains(&word) {
            return Some(Posterior::prior(&build_space(&self.ctx.ontology, &word)));
        }
        None
    }

    /// Abandons the open episode and any queued words, then refuses further
    /// messages.
    pub fn close(&mut self) -> Result<(), SessionError> {
        if self.closed {
            return Ok(());
        }
        if let Some(ep) = self.state.active() {
            let body = EventBody::BotElicitation(BotElicitation {
                word: ep.word.clone(),
                candidates: Vec::new(),
                queued: Vec::new(),
            });
            self.emit(vec![body])?;
        }
        self.closed = true;
        Ok(())
    }
}
