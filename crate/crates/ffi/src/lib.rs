//! C ABI for `wordlearn`.
//!
//! Objects are opaque handles created by `wl_*_new`/`wl_ontology_from_json`
//! and released with the matching `_free` function. Every fallible call
//! returns a [`WlStatus`]; on failure a message is available from
//! [`wl_last_error_message`] on the same thread. Strings returned through
//! `out` parameters are owned by the caller and must be released with
//! [`wl_string_free`]. Structured results are JSON documents using the same
//! shapes as the HTTP service.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;
use std::sync::Arc;

use wordlearn::elicitation::{Decision, ElicitationConfig};
use wordlearn::error::{ConfigError, InferenceError, OntologyError, SessionError};
use wordlearn::inference::{build_space, Posterior};
use wordlearn::ontology::Ontology;
use wordlearn::service::{SelectionResponse, SelectionStatus};
use wordlearn::session::{LexiconStore, Session, SessionContext};

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WlStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    InvalidJson = 3,
    InvalidOntology = 4,
    UnknownNode = 5,
    UnknownEntity = 6,
    NoConsistentHypothesis = 7,
    InvalidConfig = 8,
    NoActiveEpisode = 9,
    CandidateNotOffered = 10,
    SessionClosed = 11,
    Storage = 12,
    Internal = 13,
}

/// A loaded, validated ontology.
pub struct WlOntology(Arc<Ontology>);

/// A conversation with an in-memory event log and lexicon.
pub struct WlSession(Session);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

struct Failure(WlStatus, String);

impl From<OntologyError> for Failure {
    fn from(e: OntologyError) -> Self {
        let status = match &e {
            OntologyError::UnknownNode(_) => WlStatus::UnknownNode,
            OntologyError::UnknownEntity(_) => WlStatus::UnknownEntity,
            _ => WlStatus::InvalidOntology,
        };
        Failure(status, e.to_string())
    }
}

impl From<InferenceError> for Failure {
    fn from(e: InferenceError) -> Self {
        let status = match &e {
            InferenceError::UnknownEntity(_) => WlStatus::UnknownEntity,
            InferenceError::NoConsistentHypothesis => WlStatus::NoConsistentHypothesis,
        };
        Failure(status, e.to_string())
    }
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure(WlStatus::InvalidConfig, e.to_string())
    }
}

impl From<SessionError> for Failure {
    fn from(e: SessionError) -> Self {
        let status = match &e {
            SessionError::SessionClosed => WlStatus::SessionClosed,
            SessionError::NoActiveEpisode(_) => WlStatus::NoActiveEpisode,
            SessionError::CandidateNotOffered { .. } => WlStatus::CandidateNotOffered,
            SessionError::UnknownEntity(_) => WlStatus::UnknownEntity,
            SessionError::CorruptLog(_) | SessionError::Storage(_) => WlStatus::Storage,
            SessionError::Inference(InferenceError::UnknownEntity(_)) => WlStatus::UnknownEntity,
            SessionError::Inference(InferenceError::NoConsistentHypothesis) => {
                WlStatus::NoConsistentHypothesis
            }
        };
        Failure(status, e.to_string())
    }
}

impl From<serde_json::Error> for Failure {
    fn from(e: serde_json::Error) -> Self {
        Failure(WlStatus::InvalidJson, e.to_string())
    }
}

fn set_error(msg: String) {
    let msg = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|slot| *slot.borrow_mut() = Some(msg));
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> WlStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|slot| *slot.borrow_mut() = None);
            WlStatus::Ok
        }
        Ok(Err(Failure(status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic".into());
            WlStatus::Internal
        }
    }
}

unsafe fn str_arg<'a>(p: *const c_char, name: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(Failure(WlStatus::NullPointer, format!("`{name}` is null")));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Failure(WlStatus::InvalidUtf8, format!("`{name}` is not UTF-8")))
}

unsafe fn ref_arg<'a, T>(p: *const T, name: &str) -> Result<&'a T, Failure> {
    p.as_ref()
        .ok_or_else(|| Failure(WlStatus::NullPointer, format!("`{name}` is null")))
}

unsafe fn out_arg<'a, T>(p: *mut T, name: &str) -> Result<&'a mut T, Failure> {
    p.as_mut()
        .ok_or_else(|| Failure(WlStatus::NullPointer, format!("`{name}` is null")))
}

fn to_c_string(s: String) -> Result<*mut c_char, Failure> {
    CString::new(s)
        .map(CString::into_raw)
        .map_err(|_| Failure(WlStatus::Internal, "string contains NUL".into()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn wl_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message for the last failed call on this thread, or NULL. The pointer
/// stays valid until the next `wl_*` call on the same thread.
#[no_mangle]
pub extern "C" fn wl_last_error_message() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Releases a string returned by this library. NULL is ignored.
///
/// # Safety
/// `s` must be NULL or a pointer obtained from this library that has not
/// been freed.
#[no_mangle]
pub unsafe extern "C" fn wl_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Parses and validates an ontology document.
///
/// # Safety
/// `json` must be NULL or a NUL-terminated string; `out` must be NULL or
/// writable.
#[no_mangle]
pub unsafe extern "C" fn wl_ontology_from_json(json: *const c_char, out: *mut *mut WlOntology) -> WlStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        *out = ptr::null_mut();
        let o = Ontology::from_json(str_arg(json, "json")?)?;
        *out = Box::into_raw(Box::new(WlOntology(Arc::new(o))));
        Ok(())
    })
}

/// Loads and validates an ontology file.
///
/// # Safety
/// As for [`wl_ontology_from_json`].
#[no_mangle]
pub unsafe extern "C" fn wl_ontology_load(path: *const c_char, out: *mut *mut WlOntology) -> WlStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        *out = ptr::null_mut();
        let o = Ontology::load(str_arg(path, "path")?)?;
        *out = Box::into_raw(Box::new(WlOntology(Arc::new(o))));
        Ok(())
    })
}

/// Releases an ontology. Sessions created from it stay valid. NULL is
/// ignored.
///
/// # Safety
/// `o` must be NULL or a live handle from this library.
#[no_mangle]
pub unsafe extern "C" fn wl_ontology_free(o: *mut WlOntology) {
    if !o.is_null() {
        drop(Box::from_raw(o));
    }
}

/// Number of entities under `node`.
///
/// # Safety
/// Pointers must be NULL or valid; strings NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn wl_ontology_extension_size(
    o: *const WlOntology,
    node: *const c_char,
    out: *mut u64,
) -> WlStatus {
    guard(|| {
        let o = ref_arg(o, "ontology")?;
        *out_arg(out, "out")? = o.0.extension_size(str_arg(node, "node")?)?;
        Ok(())
    })
}

/// One plus the number of siblings of `node`.
///
/// # Safety
/// Pointers must be NULL or valid; strings NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn wl_ontology_sibling_weight(
    o: *const WlOntology,
    node: *const c_char,
    out: *mut u64,
) -> WlStatus {
    guard(|| {
        let o = ref_arg(o, "ontology")?;
        *out_arg(out, "out")? = o.0.sibling_weight(str_arg(node, "node")?)?;
        Ok(())
    })
}

/// Whether `entity` falls under `node`.
///
/// # Safety
/// Pointers must be NULL or valid; strings NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn wl_ontology_covers(
    o: *const WlOntology,
    node: *const c_char,
    entity: *const c_char,
    out: *mut bool,
) -> WlStatus {
    guard(|| {
        let o = ref_arg(o, "ontology")?;
        *out_arg(out, "out")? = o.0.covers(str_arg(node, "node")?, str_arg(entity, "entity")?)?;
        Ok(())
    })
}

/// Posterior over all hypotheses for `word` after the observations given as
/// a JSON array of entity ids, written to `out` as a JSON report.
///
/// # Safety
/// Pointers must be NULL or valid; strings NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn wl_posterior_json(
    o: *const WlOntology,
    word: *const c_char,
    observations_json: *const c_char,
    out: *mut *mut c_char,
) -> WlStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        *out = ptr::null_mut();
        let o = ref_arg(o, "ontology")?;
        let obs: Vec<String> = serde_json::from_str(str_arg(observations_json, "observations_json")?)?;
        let space = build_space(&o.0, str_arg(word, "word")?);
        let p = Posterior::batch(&space, &obs)?;
        *out = to_c_string(serde_json::to_string(&p.report())?)?;
        Ok(())
    })
}

/// Starts a session over `o`. `config_json` may be NULL for defaults, or an
/// object with any of `k`, `strategy`, `threshold`, `seed`.
///
/// # Safety
/// Pointers must be NULL or valid; strings NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn wl_session_new(
    o: *const WlOntology,
    config_json: *const c_char,
    out: *mut *mut WlSession,
) -> WlStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        *out = ptr::null_mut();
        let o = ref_arg(o, "ontology")?;
        let config: ElicitationConfig = if config_json.is_null() {
            ElicitationConfig::default()
        } else {
            serde_json::from_str(str_arg(config_json, "config_json")?)?
        };
        config.validate(&o.0)?;
        let ctx = SessionContext::new(Arc::clone(&o.0), config, Arc::new(LexiconStore::in_memory()));
        *out = Box::into_raw(Box::new(WlSession(Session::new("ffi", Arc::new(ctx)))));
        Ok(())
    })
}

/// Releases a session. NULL is ignored.
///
/// # Safety
/// `s` must be NULL or a live handle from this library.
#[no_mangle]
pub unsafe extern "C" fn wl_session_free(s: *mut WlSession) {
    if !s.is_null() {
        drop(Box::from_raw(s));
    }
}

/// Sends a user message; the bot reply is written to `out` as JSON.
///
/// # Safety
/// Pointers must be NULL or valid; strings NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn wl_session_message(
    s: *mut WlSession,
    text: *const c_char,
    out: *mut *mut c_char,
) -> WlStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        *out = ptr::null_mut();
        let s = out_arg(s, "session")?;
        let reply = s.0.handle_message(str_arg(text, "text")?)?;
        *out = to_c_string(serde_json::to_string(&reply)?)?;
        Ok(())
    })
}

/// Records the user's pick of `entity` for `word`; the selection result is
/// written to `out` as JSON.
///
/// # Safety
/// Pointers must be NULL or valid; strings NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn wl_session_select(
    s: *mut WlSession,
    word: *const c_char,
    entity: *const c_char,
    out: *mut *mut c_char,
) -> WlStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        *out = ptr::null_mut();
        let s = out_arg(s, "session")?;
        let r = s.0.handle_selection(str_arg(word, "word")?, str_arg(entity, "entity")?)?;
        let (status, committed_node) = match &r.decision {
            Decision::Commit { node, .. } => (SelectionStatus::Committed, Some(node.clone())),
            Decision::KeepLearning => (SelectionStatus::Learning, None),
        };
        let body = SelectionResponse {
            posterior: r.report(),
            status,
            committed_node,
            next: r.next,
        };
        *out = to_c_string(serde_json::to_string(&body)?)?;
        Ok(())
    })
}

/// The session's event log as a JSON array.
///
/// # Safety
/// Pointers must be NULL or valid.
#[no_mangle]
pub unsafe extern "C" fn wl_session_events_json(s: *const WlSession, out: *mut *mut c_char) -> WlStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        *out = ptr::null_mut();
        let s = ref_arg(s, "session")?;
        *out = to_c_string(serde_json::to_string(s.0.events())?)?;
        Ok(())
    })
}
