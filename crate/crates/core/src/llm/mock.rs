use std::collections::{HashMap, VecDeque};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Duration;

use super::{BackendError, BackendReply, LlmBackend, LlmRequest, RequestKind};

/// Reply function for requests without a canned answer.
pub type Responder = Box<dyn Fn(&LlmRequest) -> Result<String, BackendError> + Send + Sync>;

/// Deterministic backend: canned replies keyed by [`LlmRequest::key`], with an
/// optional responder function for everything else.
pub struct MockBackend {
    id: String,
    vision: bool,
    canned: HashMap<String, String>,
    responder: Option<Responder>,
}

impl MockBackend {
    pub fn new(id: &str) -> Self {
        Self {
            id: id.into(),
            vision: true,
            canned: HashMap::new(),
            responder: None,
        }
    }

    pub fn text_only(mut self) -> Self {
        self.vision = false;
        self
    }

    pub fn with_reply(mut self, request: &LlmRequest, text: &str) -> Self {
        self.canned.insert(request.key(), text.into());
        self
    }

    pub fn with_responder(
        mut self,
        f: impl Fn(&LlmRequest) -> Result<String, BackendError> + Send + Sync + 'static,
    ) -> Self {
        self.responder = Some(Box::new(f));
        self
    }
}

impl LlmBackend for MockBackend {
    fn id(&self) -> &str {
        &self.id
    }

    fn supports(&self, kind: RequestKind) -> bool {
        self.vision || kind == RequestKind::TextChat
    }

    fn call(&self, request: &LlmRequest) -> Result<BackendReply, BackendError> {
        if let Some(text) = self.canned.get(&request.key()) {
            return Ok(BackendReply::new(text.clone()));
        }
        match &self.responder {
            Some(f) => f(request).map(BackendReply::new),
            None => Err(BackendError::Fatal(format!(
                "no canned reply for task {}",
                request.task
            ))),
        }
    }
}

/// Plays back a fixed sequence of outcomes, one per call, and records how
/// many calls were in flight at once. After the script runs out every call
/// succeeds with `default_reply`.
pub struct ScriptedBackend {
    script: Mutex<VecDeque<Result<String, BackendError>>>,
    default_reply: String,
    hold: Duration,
    calls: AtomicUsize,
    in_flight: AtomicUsize,
    peak: AtomicUsize,
}

impl ScriptedBackend {
    pub fn new(script: Vec<Result<String, BackendError>>) -> Self {
        Self {
            script: Mutex::new(script.into()),
            default_reply: "ok".into(),
            hold: Duration::ZERO,
            calls: AtomicUsize::new(0),
            in_flight: AtomicUsize::new(0),
            peak: AtomicUsize::new(0),
        }
    }

    /// Each call sleeps this long while counted as in flight.
    pub fn with_hold(mut self, hold: Duration) -> Self {
        self.hold = hold;
        self
    }

    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }

    pub fn peak_in_flight(&self) -> usize {
        self.peak.load(Ordering::SeqCst)
    }
}

impl LlmBackend for ScriptedBackend {
    fn id(&self) -> &str {
        "scripted"
    }

    fn supports(&self, _kind: RequestKind) -> bool {
        true
    }

    fn call(&self, _request: &LlmRequest) -> Result<BackendReply, BackendError> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        let now = self.in_flight.fetch_add(1, Ordering::SeqCst) + 1;
        self.peak.fetch_max(now, Ordering::SeqCst);
        if !self.hold.is_zero() {
            std::thread::sleep(self.hold);
        }
        let next = self.script.lock().unwrap_or_else(|e| e.into_inner()).pop_front();
        self.in_flight.fetch_sub(1, Ordering::SeqCst);
        next.unwrap_or_else(|| Ok(self.default_reply.clone()))
            .map(BackendReply::new)
    }
}
