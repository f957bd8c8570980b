use std::collections::{HashMap, VecDeque};
use std::sync::Arc;

use parking_lot::Mutex;

use super::{Backend, BackendError, CompletionRequest, CompletionResponse, Purpose};
use crate::domain::token_estimate;

/// A scripted reply function. Returning `None` passes to the next script
/// source; a request nobody answers is a script miss.
pub trait Responder: Send + Sync {
    fn respond(&self, req: &CompletionRequest) -> Option<String>;
}

impl<F> Responder for F
where
    F: Fn(&CompletionRequest) -> Option<String> + Send + Sync,
{
    fn respond(&self, req: &CompletionRequest) -> Option<String> {
        self(req)
    }
}

/// Deterministic backend for tests and desk-scale runs.
///
/// Lookup order: exact prompt match, then the playback queue for the
/// request's purpose, then responders in registration order.
#[derive(Clone, Default)]
pub struct MockBackend {
    name: String,
    exact: HashMap<String, String>,
    queues: Arc<Mutex<HashMap<Purpose, VecDeque<String>>>>,
    responders: Vec<Arc<dyn Responder>>,
}

impl MockBackend {
    pub fn new() -> Self {
        MockBackend {
            name: "mock".into(),
            ..Default::default()
        }
    }

    pub fn named(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    pub fn with_exact(mut self, prompt: impl Into<String>, reply: impl Into<String>) -> Self {
        self.exact.insert(prompt.into(), reply.into());
        self
    }

    pub fn with_queue<I, S>(self, purpose: Purpose, replies: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        self.queues
            .lock()
            .entry(purpose)
            .or_default()
            .extend(replies.into_iter().map(Into::into));
        self
    }

    pub fn with_responder(mut self, responder: impl Responder + 'static) -> Self {
        self.responders.push(Arc::new(responder));
        self
    }

    pub fn with_shared_responder(mut self, responder: Arc<dyn Responder>) -> Self {
        self.responders.push(responder);
        self
    }

    fn lookup(&self, req: &CompletionRequest) -> Option<String> {
        if let Some(r) = self.exact.get(&req.prompt_text) {
            return Some(r.clone());
        }
        if let Some(r) = self
            .queues
            .lock()
            .get_mut(&req.purpose)
            .and_then(VecDeque::pop_front)
        {
            return Some(r);
        }
        self.responders.iter().find_map(|r| r.respond(req))
    }
}

impl Backend for MockBackend {
    fn identity(&self) -> String {
        self.name.clone()
    }

    fn complete(&self, req: &CompletionRequest) -> Result<CompletionResponse, BackendError> {
        match self.lookup(req) {
            Some(text) => Ok(CompletionResponse {
                prompt_tokens: token_estimate(&req.prompt_text) as u64,
                completion_tokens: token_estimate(&text) as u64,
                text,
            }),
            None => {
                let head: String = req.prompt_text.chars().take(60).collect();
                Err(BackendError::ScriptMiss(format!("[{}] {head:?}", req.purpose)))
            }
        }
    }
}
