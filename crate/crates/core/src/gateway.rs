//! Chat-completion transport, prompt templates and response parsing.

use std::collections::BTreeMap;
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Condvar, Mutex};
use std::time::Duration;

use abpr_engine::apd::{NodeOracle, OracleError, OracleVerdict};
use abpr_engine::Term;
use abpr_grid::Grid;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::digest;
use crate::refine::RefineContext;
use crate::task::TaskRecord;

pub const SYSTEM_TEMPLATE: &str = include_str!("../templates/system.txt");
pub const FIRST_TEMPLATE: &str = include_str!("../templates/first.txt");
pub const FIX_TEMPLATE: &str = include_str!("../templates/fix.txt");

/// Default in-flight request cap shared by all runs using one gateway.
pub const DEFAULT_IN_FLIGHT: usize = 8;
pub const DEFAULT_PROMPT_BUDGET: usize = 60_000;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GatewayError {
    #[error("placeholder {{{0}}} has no value")]
    PlaceholderUnbound(String),
    #[error("empty response")]
    EmptyResponse,
    #[error("transport failed: {0}")]
    Transport(String),
    #[error("bad mock script: {0}")]
    Script(String),
}

// ---- templates ----

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptBundle {
    pub system: String,
    pub first: String,
    pub fix: String,
}

impl Default for PromptBundle {
    fn default() -> Self {
        PromptBundle { system: SYSTEM_TEMPLATE.to_string(), first: FIRST_TEMPLATE.to_string(), fix: FIX_TEMPLATE.to_string() }
    }
}

impl PromptBundle {
    /// Loads `system.txt`, `first.txt` and `fix.txt` from a directory; a
    /// missing file keeps the built-in template.
    pub fn load_dir(dir: &Path) -> std::io::Result<PromptBundle> {
        let mut b = PromptBundle::default();
        for (name, slot) in [("system.txt", &mut b.system), ("first.txt", &mut b.first), ("fix.txt", &mut b.fix)] {
            let p = dir.join(name);
            if p.exists() {
                *slot = std::fs::read_to_string(p)?;
            }
        }
        Ok(b)
    }
}

fn placeholder_at(s: &str) -> Option<&str> {
    let rest = s.strip_prefix('{')?;
    let end = rest.find('}')?;
    let name = &rest[..end];
    (!name.is_empty() && name.bytes().all(|b| b.is_ascii_lowercase() || b == b'_')).then_some(name)
}

/// Names of the `{placeholder}` slots in a template, in order of appearance.
pub fn placeholders(template: &str) -> Vec<String> {
    let mut out = Vec::new();
    for (i, _) in template.match_indices('{') {
        if let Some(name) = placeholder_at(&template[i..]) {
            out.push(name.to_string());
        }
    }
    out
}

/// Substitutes every `{name}` slot in one pass. Substituted text is not
/// rescanned, so values may contain braces.
pub fn render_template(template: &str, values: &[(&str, &str)]) -> Result<String, GatewayError> {
    let mut out = String::with_capacity(template.len());
    let mut rest = template;
    while let Some(i) = rest.find('{') {
        out.push_str(&rest[..i]);
        match placeholder_at(&rest[i..]) {
            Some(name) => {
                let v = values.iter().find(|(k, _)| *k == name).ok_or_else(|| GatewayError::PlaceholderUnbound(name.to_string()))?;
                out.push_str(v.1);
                rest = &rest[i + name.len() + 2..];
            }
            None => {
                out.push('{');
                rest = &rest[i + 1..];
            }
        }
    }
    out.push_str(rest);
    Ok(out)
}

// ---- examples ----

/// Order in which a run shows the training examples.
pub fn permutation(n: usize, seed: u64) -> Vec<usize> {
    let mut p: Vec<usize> = (0..n).collect();
    p.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    p
}

fn grid_block(label: &str, g: &Grid) -> String {
    format!("{label}:\n{g}")
}

/// Training pairs in the given order, then the challenge inputs.
pub fn render_examples(task: &TaskRecord, order: &[usize]) -> String {
    let mut blocks = Vec::new();
    for (shown, &i) in order.iter().enumerate() {
        let p = &task.train[i];
        blocks.push(grid_block(&format!("Example {} - Input", shown + 1), &p.input));
        blocks.push(grid_block(&format!("Example {} - Output", shown + 1), &p.output));
    }
    let challenges = challenge_diagrams(task);
    if !challenges.is_empty() {
        blocks.push(challenges);
    }
    blocks.join("\n\n")
}

pub fn challenge_diagrams(task: &TaskRecord) -> String {
    task.test
        .iter()
        .enumerate()
        .map(|(j, t)| grid_block(&format!("Challenge {} - Input", j + 1), &t.input))
        .collect::<Vec<_>>()
        .join("\n\n")
}

pub fn render_first_prompt(bundle: &PromptBundle, examples: &str) -> Result<String, GatewayError> {
    render_template(&bundle.first, &[("examples", examples)])
}

// ---- fix prompt ----

pub const HISTORY_TYPE: &str = "previous attempts ordered oldest-first";

fn history_description(n: usize) -> String {
    format!("The last {n} attempt(s) and their outcomes")
}

/// Keeps the first `keep` characters of `s` and appends an elision marker.
fn cut_tail(s: &str, keep: usize) -> String {
    let total = s.chars().count();
    if keep >= total {
        return s.to_string();
    }
    let mut out: String = s.chars().take(keep).collect();
    out.push_str(&format!("\n… [{} characters elided]", total - keep));
    out
}

/// The fix prompt for one iteration, at most `budget` characters long.
/// Over budget, the trace is cut from its tail first, then the attempt
/// history, then the whole prompt.
pub fn render_fix_prompt(bundle: &PromptBundle, ctx: &RefineContext, budget: usize) -> Result<String, GatewayError> {
    let current = ctx.iteration.to_string();
    let max = ctx.max_iterations.to_string();
    let count = ctx.iteration_count.to_string();
    let description = history_description(ctx.attempts.len());
    let mut history = ctx.attempts.iter().map(|a| a.render()).collect::<Vec<_>>().join("\n\n");
    let mut trace = ctx.trace_detail.clone();
    if let Some(n) = &ctx.buggy_nodes {
        trace.push_str("\n\nCANDIDATE BUGGY NODES:\n");
        trace.push_str(n);
    }
    let render = |trace: &str, history: &str| {
        render_template(
            &bundle.fix,
            &[
                ("current_iteration", &current),
                ("max_iterations", &max),
                ("iteration_count", &count),
                ("history_description", &description),
                ("history_type", HISTORY_TYPE),
                ("attempts_history", history),
                ("iteration", &current),
                ("trace_detail", trace),
                ("challenge_diagrams", &ctx.challenge_diagrams),
            ],
        )
    };
    let mut out = render(&trace, &history)?;
    for stage in 0..2 {
        let mut tries = 0;
        while out.chars().count() > budget && tries < 4 {
            let target = if stage == 0 { &mut trace } else { &mut history };
            let len = target.chars().count();
            if len == 0 {
                break;
            }
            let over = out.chars().count() - budget;
            // the marker costs about 40 characters
            let keep = len.saturating_sub(over + 40);
            *target = if keep == 0 { String::new() } else { cut_tail(target, keep) };
            out = render(&trace, &history)?;
            tries += 1;
        }
    }
    if out.chars().count() > budget {
        out = out.chars().take(budget).collect();
    }
    Ok(out)
}

// ---- responses ----

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Extracted {
    pub code: String,
    /// False when the response had no fenced block and the whole text was
    /// taken.
    pub fenced: bool,
}

fn is_fence(line: &str) -> bool {
    line.trim_start().starts_with("```")
}

/// Body of the last fenced code block; the language tag is optional. An
/// unterminated final block runs to the end of the response.
pub fn extract_code_block(response: &str) -> Result<Extracted, GatewayError> {
    if response.trim().is_empty() {
        return Err(GatewayError::EmptyResponse);
    }
    let mut blocks: Vec<Vec<&str>> = Vec::new();
    let mut open: Option<Vec<&str>> = None;
    for line in response.lines() {
        match open.take() {
            None if is_fence(line) => open = Some(Vec::new()),
            None => {}
            Some(body) if line.trim() == "```" => blocks.push(body),
            Some(mut body) => {
                body.push(line);
                open = Some(body);
            }
        }
    }
    if let Some(body) = open {
        blocks.push(body);
    }
    match blocks.pop() {
        Some(body) => {
            let mut code = body.join("\n");
            code.push('\n');
            Ok(Extracted { code, fenced: true })
        }
        None => Ok(Extracted { code: response.replace("```", "").trim().to_string(), fenced: false }),
    }
}

// ---- transport ----

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RequestKind {
    /// First-generation and fix prompts.
    Generate,
    /// Node validity questions during explicit localization.
    Oracle,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChatRequest {
    pub system: String,
    pub user: String,
    pub temperature: f64,
    pub max_output_tokens: u32,
    pub provider: String,
    pub model: String,
    pub kind: RequestKind,
    pub task_id: String,
    /// Seed of the run issuing the request.
    pub seed: u64,
    /// Position of the request in the run's sequence of this kind.
    pub seq: u32,
    /// Provider-specific pass-through options, e.g. `reasoning_effort`.
    pub options: BTreeMap<String, String>,
    /// Earlier exchanges sent before `user`.
    pub prior: Vec<Turn>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Turn {
    pub user: String,
    pub assistant: String,
}

impl ChatRequest {
    /// Fingerprint of the prompt content and sampling settings.
    pub fn digest(&self) -> String {
        let prior: String = self.prior.iter().map(|t| format!("{}\u{0}{}\u{0}", t.user, t.assistant)).collect();
        digest(&format!("{}\u{0}{}\u{0}{}\u{0}{prior}{}", self.model, self.temperature, self.system, self.user))
    }

    /// Sampling nonce derived from the run seed and request position.
    pub fn nonce(&self) -> u64 {
        let d = digest(&format!("{:?}:{}:{}", self.kind, self.seed, self.seq));
        u64::from_str_radix(&d[..16], 16).expect("hex digest")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TransportError {
    /// Worth retrying: rate limits, server errors, dropped connections.
    #[error("transient: {0}")]
    Transient(String),
    #[error("fatal: {0}")]
    Fatal(String),
}

pub trait Transport: Send + Sync {
    fn complete(&self, req: &ChatRequest) -> Result<String, TransportError>;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RetryPolicy {
    pub attempts: u32,
    pub base_delay: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy { attempts: 3, base_delay: Duration::from_millis(500) }
    }
}

/// Shared front door to a transport: bounds requests in flight and retries
/// transient failures with exponential backoff.
pub struct Gateway {
    transport: Arc<dyn Transport>,
    cap: usize,
    in_flight: Mutex<usize>,
    freed: Condvar,
    peak: AtomicUsize,
    retry: RetryPolicy,
}

impl Gateway {
    pub fn new(transport: Arc<dyn Transport>, cap: usize) -> Gateway {
        Gateway {
            transport,
            cap: cap.max(1),
            in_flight: Mutex::new(0),
            freed: Condvar::new(),
            peak: AtomicUsize::new(0),
            retry: RetryPolicy::default(),
        }
    }

    pub fn with_retry(mut self, retry: RetryPolicy) -> Gateway {
        self.retry = retry;
        self
    }

    /// Highest number of requests seen in flight at once.
    pub fn peak_in_flight(&self) -> usize {
        self.peak.load(Ordering::SeqCst)
    }

    pub fn complete(&self, req: &ChatRequest) -> Result<String, GatewayError> {
        let mut attempt = 0;
        loop {
            attempt += 1;
            let r = {
                let _slot = self.acquire();
                self.transport.complete(req)
            };
            match r {
                Ok(text) => return Ok(text),
                Err(TransportError::Transient(e)) if attempt < self.retry.attempts => {
                    std::thread::sleep(self.retry.base_delay * 2u32.pow(attempt - 1));
                    let _ = e;
                }
                Err(e) => return Err(GatewayError::Transport(e.to_string())),
            }
        }
    }

    fn acquire(&self) -> Slot<'_> {
        let mut n = self.in_flight.lock().unwrap();
        while *n >= self.cap {
            n = self.freed.wait(n).unwrap();
        }
        *n += 1;
        self.peak.fetch_max(*n, Ordering::SeqCst);
        Slot(self)
    }
}

struct Slot<'g>(&'g Gateway);

impl Drop for Slot<'_> {
    fn drop(&mut self) {
        *self.0.in_flight.lock().unwrap() -= 1;
        self.0.freed.notify_one();
    }
}

// ---- mock transport ----

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MockReply {
    Text(String),
    /// `{"error": "transient"}` or `{"error": "fatal"}` simulates a failure.
    Error { error: String },
}

/// Canned responses. A request is answered by the first match among:
/// its digest in `by_digest`; the `seq`-th entry of the sequence keyed
/// `task:seed`, `task:*`, `*:seed` or `*` (the last entry repeats); then
/// `default`. Oracle requests use the same keys prefixed with `oracle/`.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MockScript {
    #[serde(default)]
    pub by_digest: BTreeMap<String, MockReply>,
    #[serde(default)]
    pub sequences: BTreeMap<String, Vec<MockReply>>,
    #[serde(default)]
    pub default: Option<MockReply>,
}

impl MockScript {
    pub fn load(path: &Path) -> Result<MockScript, GatewayError> {
        let text = std::fs::read_to_string(path).map_err(|e| GatewayError::Script(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| GatewayError::Script(format!("{}: {e}", path.display())))
    }

    pub fn lookup(&self, req: &ChatRequest) -> Option<&MockReply> {
        if let Some(r) = self.by_digest.get(&req.digest()) {
            return Some(r);
        }
        let prefix = match req.kind {
            RequestKind::Generate => "",
            RequestKind::Oracle => "oracle/",
        };
        let keys = [
            format!("{prefix}{}:{}", req.task_id, req.seed),
            format!("{prefix}{}:*", req.task_id),
            format!("{prefix}*:{}", req.seed),
            format!("{prefix}*"),
        ];
        for k in keys {
            if let Some(seq) = self.sequences.get(&k) {
                if let Some(last) = seq.last() {
                    return Some(seq.get(req.seq as usize).unwrap_or(last));
                }
            }
        }
        self.default.as_ref()
    }
}

/// Deterministic transport answering from a [`MockScript`].
pub struct MockTransport {
    script: MockScript,
}

impl MockTransport {
    pub fn new(script: MockScript) -> MockTransport {
        MockTransport { script }
    }
}

impl Transport for MockTransport {
    fn complete(&self, req: &ChatRequest) -> Result<String, TransportError> {
        match self.script.lookup(req) {
            Some(MockReply::Text(t)) => Ok(t.clone()),
            Some(MockReply::Error { error }) if error == "transient" => Err(TransportError::Transient("scripted".into())),
            Some(MockReply::Error { error }) => Err(TransportError::Fatal(format!("scripted {error}"))),
            None => Err(TransportError::Fatal(format!("no scripted reply for {}:{} #{}", req.task_id, req.seed, req.seq))),
        }
    }
}

// ---- HTTP transport ----

/// Environment variable holding a provider's API key, e.g. `OPENAI_API_KEY`.
pub fn api_key_var(provider: &str) -> String {
    let p: String = provider.chars().map(|c| if c.is_ascii_alphanumeric() { c.to_ascii_uppercase() } else { '_' }).collect();
    format!("{p}_API_KEY")
}

fn base_url_var(provider: &str) -> String {
    api_key_var(provider).replace("_API_KEY", "_BASE_URL")
}

pub fn credentials_available(provider: &str) -> bool {
    std::env::var(api_key_var(provider)).is_ok_and(|k| !k.trim().is_empty())
}

fn default_base_url(provider: &str) -> Option<&'static str> {
    match provider {
        "openai" => Some("https://api.openai.com/v1"),
        "anthropic" => Some("https://api.anthropic.com/v1"),
        "gemini" | "google" => Some("https://generativelanguage.googleapis.com/v1beta/openai"),
        "deepseek" => Some("https://api.deepseek.com/v1"),
        _ => None,
    }
}

/// Blocking HTTP+JSON transport. `anthropic` uses the messages API; every
/// other provider is spoken to as an OpenAI-style chat-completions endpoint
/// at `<PROVIDER>_BASE_URL`.
pub struct HttpTransport {
    agent: ureq::Agent,
}

impl HttpTransport {
    pub fn new(timeout: Duration) -> HttpTransport {
        let agent = ureq::Agent::config_builder().timeout_global(Some(timeout)).http_status_as_error(false).build().into();
        HttpTransport { agent }
    }
}

impl Transport for HttpTransport {
    fn complete(&self, req: &ChatRequest) -> Result<String, TransportError> {
        let key = std::env::var(api_key_var(&req.provider))
            .map_err(|_| TransportError::Fatal(format!("{} is not set", api_key_var(&req.provider))))?;
        let base = std::env::var(base_url_var(&req.provider))
            .ok()
            .or_else(|| default_base_url(&req.provider).map(str::to_string))
            .ok_or_else(|| TransportError::Fatal(format!("{} is not set", base_url_var(&req.provider))))?;
        let base = base.trim_end_matches('/');
        let anthropic = req.provider == "anthropic";
        let mut body = if anthropic {
            serde_json::json!({
                "model": req.model,
                "max_tokens": req.max_output_tokens,
                "temperature": req.temperature,
                "system": req.system,
                "messages": messages(req, false),
            })
        } else {
            serde_json::json!({
                "model": req.model,
                "max_tokens": req.max_output_tokens,
                "temperature": req.temperature,
                "seed": req.nonce() % (1 << 31),
                "messages": messages(req, true),
            })
        };
        for (k, v) in &req.options {
            body[k] = serde_json::Value::String(v.clone());
        }
        let call = if anthropic {
            self.agent.post(format!("{base}/messages")).header("x-api-key", &key).header("anthropic-version", "2023-06-01")
        } else {
            self.agent.post(format!("{base}/chat/completions")).header("Authorization", &format!("Bearer {key}"))
        };
        let call = call.header("content-type", "application/json");
        let mut resp = call.send(body.to_string()).map_err(|e| TransportError::Transient(e.to_string()))?;
        let status = resp.status().as_u16();
        let text = resp.body_mut().read_to_string().map_err(|e| TransportError::Transient(e.to_string()))?;
        if status == 429 || status >= 500 {
            return Err(TransportError::Transient(format!("HTTP {status}")));
        }
        if status >= 400 {
            return Err(TransportError::Fatal(format!("HTTP {status}: {}", text.chars().take(300).collect::<String>())));
        }
        let v: serde_json::Value = serde_json::from_str(&text).map_err(|e| TransportError::Fatal(format!("malformed response: {e}")))?;
        let content = if anthropic {
            v["content"].as_array().map(|parts| {
                parts.iter().filter_map(|p| p["text"].as_str()).collect::<Vec<_>>().join("")
            })
        } else {
            v["choices"][0]["message"]["content"].as_str().map(str::to_string)
        };
        content.ok_or_else(|| TransportError::Fatal("response has no message content".into()))
    }
}

fn messages(req: &ChatRequest, with_system: bool) -> serde_json::Value {
    let mut m = Vec::new();
    if with_system {
        m.push(serde_json::json!({"role": "system", "content": req.system}));
    }
    for t in &req.prior {
        m.push(serde_json::json!({"role": "user", "content": t.user}));
        m.push(serde_json::json!({"role": "assistant", "content": t.assistant}));
    }
    m.push(serde_json::json!({"role": "user", "content": req.user}));
    serde_json::Value::Array(m)
}

// ---- LLM-backed node oracle ----

/// Asks the model whether a goal instance is correct for the task.
pub struct LlmOracle {
    pub gateway: Arc<Gateway>,
    pub provider: String,
    pub model: String,
    pub temperature: f64,
    pub task_id: String,
    pub seed: u64,
    /// Training examples as shown to the refiner.
    pub examples: String,
    pub program: String,
    seq: u32,
}

impl LlmOracle {
    pub fn new(gateway: Arc<Gateway>, provider: &str, model: &str, task_id: &str, seed: u64) -> LlmOracle {
        LlmOracle {
            gateway,
            provider: provider.to_string(),
            model: model.to_string(),
            temperature: 0.0,
            task_id: task_id.to_string(),
            seed,
            examples: String::new(),
            program: String::new(),
            seq: 0,
        }
    }
}

pub fn parse_verdict(answer: &str) -> OracleVerdict {
    let word: String = answer.trim_start().chars().take_while(|c| c.is_ascii_alphabetic()).collect::<String>().to_ascii_lowercase();
    match word.as_str() {
        "valid" | "correct" | "yes" => OracleVerdict::Valid,
        "invalid" | "incorrect" | "no" => OracleVerdict::Invalid,
        _ => OracleVerdict::Unknown,
    }
}

impl NodeOracle for LlmOracle {
    fn verdict(&mut self, goal: &Term) -> Result<OracleVerdict, OracleError> {
        let user = format!(
            "Training examples:\n\n{}\n\nProgram under test:\n```prolog\n{}```\n\n\
             During execution the program derived this goal instance:\n\n    {goal}\n\n\
             Judged by the transformation the examples demonstrate, is this instance correct? \
             Reply with one word: valid, invalid or unknown.",
            self.examples, self.program
        );
        let req = ChatRequest {
            system: "You judge intermediate results of Prolog programs that solve ARC grid tasks.".into(),
            user,
            temperature: self.temperature,
            max_output_tokens: 16,
            provider: self.provider.clone(),
            model: self.model.clone(),
            kind: RequestKind::Oracle,
            task_id: self.task_id.clone(),
            seed: self.seed,
            seq: self.seq,
            options: BTreeMap::new(),
            prior: Vec::new(),
        };
        self.seq += 1;
        let answer = self.gateway.complete(&req).map_err(|e| OracleError::OracleUnavailable(e.to_string()))?;
        Ok(parse_verdict(&answer))
    }
}
