//! Model clients and the model-backed decision path.

use std::path::Path;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::parse::{parse_decision, ParseError};
use super::prompt::{build_prompt, parse_state, Exemplar, GOAL_CLOSE, GOAL_OPEN};
use super::solver::{solve_per_slot, SolverConfig};
use super::{Decision, PolicyTag};
use crate::error::{Error, Result};
use crate::pdt::PredictiveState;
use crate::semantics::BetaWeights;
use crate::sim::SimParams;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: String,
    pub content: String,
}

impl ChatMessage {
    pub fn system(text: impl Into<String>) -> Self {
        ChatMessage {
            role: "system".into(),
            content: text.into(),
        }
    }

    pub fn user(text: impl Into<String>) -> Self {
        ChatMessage {
            role: "user".into(),
            content: text.into(),
        }
    }
}

/// A reply and how long the call took (seconds).
#[derive(Debug, Clone, PartialEq)]
pub struct Completion {
    pub text: String,
    pub latency_s: f64,
}

/// Chat-completion style backend.
pub trait ModelClient: Send {
    fn call(&mut self, messages: &[ChatMessage], timeout: Duration) -> Result<Completion>;

    fn name(&self) -> &str;

    /// Convenience wrapper with a generous timeout.
    fn complete(&mut self, messages: &[ChatMessage]) -> Result<String> {
        self.call(messages, Duration::from_secs(30)).map(|c| c.text)
    }
}

/// Canned responses served in order (cycling), with a fixed simulated
/// latency so runs stay deterministic.
#[derive(Debug, Clone, PartialEq)]
pub struct MockClient {
    responses: Vec<String>,
    next: usize,
    pub simulated_latency_s: f64,
    pub prompts: Vec<Vec<ChatMessage>>,
    /// Keep at most this many prompts in `prompts`.
    pub keep_prompts: usize,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum Fixture {
    List(Vec<String>),
    Object {
        responses: Vec<String>,
        #[serde(default)]
        latency_s: f64,
    },
}

impl MockClient {
    pub fn new(responses: Vec<String>) -> Self {
        MockClient {
            responses,
            next: 0,
            simulated_latency_s: 0.0,
            prompts: Vec::new(),
            keep_prompts: 8,
        }
    }

    pub fn with_latency(mut self, latency_s: f64) -> Self {
        self.simulated_latency_s = latency_s;
        self
    }

    /// Fixture file: a JSON array of strings, or
    /// `{"responses": [...], "latency_s": 0.0}`.
    pub fn from_fixture(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let fx: Fixture = serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Ok(match fx {
            Fixture::List(r) => MockClient::new(r),
            Fixture::Object { responses, latency_s } => MockClient::new(responses).with_latency(latency_s),
        })
    }

    pub fn calls(&self) -> usize {
        self.next
    }
}

impl ModelClient for MockClient {
    fn call(&mut self, messages: &[ChatMessage], timeout: Duration) -> Result<Completion> {
        if self.prompts.len() < self.keep_prompts {
            self.prompts.push(messages.to_vec());
        }
        if self.responses.is_empty() {
            return Err(Error::Io("mock client has no responses".into()));
        }
        let text = self.responses[self.next % self.responses.len()].clone();
        self.next += 1;
        if self.simulated_latency_s > timeout.as_secs_f64() {
            return Err(Error::Io("model call timed out".into()));
        }
        Ok(Completion {
            text,
            latency_s: self.simulated_latency_s,
        })
    }

    fn name(&self) -> &str {
        "mock"
    }
}

/// Always fails; the policy then runs on its fallback.
#[derive(Debug, Clone, Copy, Default)]
pub struct DisabledClient;

impl ModelClient for DisabledClient {
    fn call(&mut self, _: &[ChatMessage], _: Duration) -> Result<Completion> {
        Err(Error::Io("model client disabled".into()))
    }

    fn name(&self) -> &str {
        "disabled"
    }
}

/// Offline stand-in for a model: reads the state and goal back out of the
/// prompt and answers with the solver's decision as JSON. Exercises the
/// full prompt → parse path without a network.
#[derive(Debug, Clone, PartialEq)]
pub struct SolverEchoClient {
    pub params: SimParams,
    pub solver: SolverConfig,
    pub simulated_latency_s: f64,
    calls: usize,
}

impl SolverEchoClient {
    pub fn new(params: SimParams, solver: SolverConfig) -> Self {
        SolverEchoClient {
            params,
            solver,
            simulated_latency_s: 0.0,
            calls: 0,
        }
    }

    pub fn calls(&self) -> usize {
        self.calls
    }
}

fn between<'a>(text: &'a str, open: &str, close: &str) -> Option<&'a str> {
    let start = text.find(open)? + open.len();
    let end = start + text[start..].find(close)?;
    Some(&text[start..end])
}

impl ModelClient for SolverEchoClient {
    fn call(&mut self, messages: &[ChatMessage], timeout: Duration) -> Result<Completion> {
        self.calls += 1;
        if self.simulated_latency_s > timeout.as_secs_f64() {
            return Err(Error::Io("model call timed out".into()));
        }
        let user = messages
            .iter()
            .rev()
            .find(|m| m.role == "user")
            .ok_or_else(|| Error::Io("no user message".into()))?;
        let goal = between(&user.content, GOAL_OPEN, GOAL_CLOSE).unwrap_or("").trim();
        let state_text = between(&user.content, "## Predictive State\n", "\n## Exemplars")
            .ok_or_else(|| Error::Io("prompt has no state section".into()))?;
        let state = parse_state(state_text)?;
        let beta = crate::semantics::interpret_rules(goal);
        let d = solve_per_slot(&state, &beta, &self.params, &self.solver);
        let text = serde_json::json!({ "w": d.offload, "a": d.alloc }).to_string();
        Ok(Completion {
            text,
            latency_s: self.simulated_latency_s,
        })
    }

    fn name(&self) -> &str {
        "solver-echo"
    }
}

#[cfg(feature = "http-client")]
pub use http::{AuditEntry, HttpClient, HttpClientConfig, API_KEY_ENV};

#[cfg(feature = "http-client")]
mod http {
    use std::io::Write;
    use std::path::PathBuf;
    use std::time::{Duration, Instant};

    use serde::{Deserialize, Serialize};

    use super::{ChatMessage, Completion, ModelClient};
    use crate::error::{Error, Result};

    /// The only place an API key is read from.
    pub const API_KEY_ENV: &str = "VECORCH_API_KEY";

    #[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
    #[serde(default, deny_unknown_fields)]
    pub struct HttpClientConfig {
        /// e.g. `http://localhost:8000/v1`; `/chat/completions` is appended.
        pub base_url: String,
        pub model: String,
        /// JSONL file receiving request/response bodies.
        pub audit_log: Option<PathBuf>,
        pub temperature: f64,
    }

    impl Default for HttpClientConfig {
        fn default() -> Self {
            HttpClientConfig {
                base_url: "http://127.0.0.1:8000/v1".into(),
                model: "default".into(),
                audit_log: None,
                temperature: 0.0,
            }
        }
    }

    #[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
    pub struct AuditEntry {
        pub url: String,
        pub request: String,
        pub response: String,
        pub status: Option<u16>,
        pub latency_s: f64,
    }

    pub struct HttpClient {
        cfg: HttpClientConfig,
        key: Option<String>,
        http: reqwest::blocking::Client,
        pub audit: Vec<AuditEntry>,
    }

    impl HttpClient {
        pub fn new(cfg: HttpClientConfig) -> Result<Self> {
            let key = std::env::var(API_KEY_ENV).ok().filter(|k| !k.is_empty());
            let http = reqwest::blocking::Client::builder()
                .build()
                .map_err(|e| Error::Config(e.to_string()))?;
            Ok(HttpClient {
                cfg,
                key,
                http,
                audit: Vec::new(),
            })
        }

        fn redact(&self, text: &str) -> String {
            match &self.key {
                Some(k) => text.replace(k.as_str(), "[REDACTED]"),
                None => text.to_string(),
            }
        }

        fn record(&mut self, entry: AuditEntry) {
            if let Some(path) = &self.cfg.audit_log {
                let line = serde_json::to_string(&entry).unwrap_or_default();
                let res = std::fs::OpenOptions::new()
                    .create(true)
                    .append(true)
                    .open(path)
                    .and_then(|mut f| writeln!(f, "{line}"));
                if let Err(e) = res {
                    log::warn!("audit log {}: {e}", path.display());
                }
            }
            self.audit.push(entry);
        }
    }

    #[derive(Deserialize)]
    struct Reply {
        choices: Vec<Choice>,
    }

    #[derive(Deserialize)]
    struct Choice {
        message: ChatMessage,
    }

    impl ModelClient for HttpClient {
        fn call(&mut self, messages: &[ChatMessage], timeout: Duration) -> Result<Completion> {
            let url = format!("{}/chat/completions", self.cfg.base_url.trim_end_matches('/'));
            let body = serde_json::json!({
                "model": self.cfg.model,
                "messages": messages,
                "temperature": self.cfg.temperature,
            });
            let request = body.to_string();
            let mut req = self
                .http
                .post(&url)
                .timeout(timeout)
                .header("content-type", "application/json")
                .body(request.clone());
            if let Some(k) = &self.key {
                req = req.bearer_auth(k);
            }
            let started = Instant::now();
            let result = req.send().and_then(|r| {
                let status = r.status().as_u16();
                r.text().map(|t| (status, t))
            });
            let latency_s = started.elapsed().as_secs_f64();
            let (status, text) = match result {
                Ok(x) => x,
                Err(e) => {
                    let msg = self.redact(&e.to_string());
                    self.record(AuditEntry {
                        url,
                        request: self.redact(&request),
                        response: msg.clone(),
                        status: None,
                        latency_s,
                    });
                    return Err(Error::Io(msg));
                }
            };
            self.record(AuditEntry {
                url,
                request: self.redact(&request),
                response: self.redact(&text),
                status: Some(status),
                latency_s,
            });
            if !(200..300).contains(&status) {
                return Err(Error::Io(format!("model endpoint returned {status}")));
            }
            let reply: Reply = serde_json::from_str(&text).map_err(|e| Error::Io(format!("bad reply: {e}")))?;
            let content = reply
                .choices
                .into_iter()
                .next()
                .map(|c| c.message.content)
                .ok_or_else(|| Error::Io("reply has no choices".into()))?;
            Ok(Completion { text: content, latency_s })
        }

        fn name(&self) -> &str {
            "http"
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LlmConfig {
    pub timeout_s: f64,
    pub max_exemplars: usize,
    pub solver: SolverConfig,
}

impl Default for LlmConfig {
    fn default() -> Self {
        LlmConfig {
            timeout_s: 2.0,
            max_exemplars: 4,
            solver: SolverConfig::default(),
        }
    }
}

/// Why the model's answer was not used.
#[derive(Debug, Clone, PartialEq)]
pub enum FallbackReason {
    Client(String),
    Parse(ParseError),
}

/// Result of one model round trip.
#[derive(Debug, Clone, PartialEq)]
pub struct LlmOutcome {
    pub decision: Decision,
    pub latency_s: f64,
    pub fallback: Option<FallbackReason>,
}

/// prompt → model → parse; any failure yields the solver's decision on the
/// same state with the fallback flag set.
pub fn llm_decide_detailed(
    state: &PredictiveState,
    goal_text: &str,
    beta: &BetaWeights,
    client: &mut dyn ModelClient,
    params: &SimParams,
    exemplars: &[Exemplar],
    cfg: &LlmConfig,
) -> LlmOutcome {
    let bundle = build_prompt(state, goal_text, exemplars, cfg.max_exemplars);
    let messages = [ChatMessage::system(bundle.system_text()), ChatMessage::user(bundle.user_text())];
    let timeout = Duration::from_secs_f64(cfg.timeout_s.max(0.0));
    let fallback = |reason: FallbackReason, latency_s: f64| {
        log::debug!("slot {}: model decision unusable ({reason:?})", state.slot_index);
        let mut d = solve_per_slot(state, beta, params, &cfg.solver);
        d.policy = PolicyTag::Llm;
        d.flags.fallback = true;
        LlmOutcome {
            decision: d,
            latency_s,
            fallback: Some(reason),
        }
    };
    match client.call(&messages, timeout) {
        Err(e) => fallback(FallbackReason::Client(e.to_string()), cfg.timeout_s),
        Ok(c) => match parse_decision(&c.text, &state.vehicle_ids, state.num_types(), state.slot_index) {
            Ok(d) => LlmOutcome {
                decision: d,
                latency_s: c.latency_s,
                fallback: None,
            },
            Err(e) => fallback(FallbackReason::Parse(e), c.latency_s),
        },
    }
}

pub fn llm_decide(
    state: &PredictiveState,
    goal_text: &str,
    beta: &BetaWeights,
    client: &mut dyn ModelClient,
    params: &SimParams,
    cfg: &LlmConfig,
) -> Decision {
    llm_decide_detailed(state, goal_text, beta, client, params, &[], cfg).decision
}

/// Exemplars made by the solver on the given states.
pub fn solver_exemplars(states: &[(PredictiveState, String, BetaWeights)], params: &SimParams, cfg: &SolverConfig) -> Vec<Exemplar> {
    states
        .iter()
        .map(|(s, goal, beta)| Exemplar {
            state: s.clone(),
            goal: goal.clone(),
            action: solve_per_slot(s, beta, params, cfg),
        })
        .collect()
}
