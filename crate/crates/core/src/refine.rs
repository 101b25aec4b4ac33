//! The refinement loop: evaluate a candidate on the training pairs, trace its
//! failures, ask the refiner for a successor, keep the best few.

use std::collections::BTreeMap;
use std::sync::Arc;
use std::time::{Duration, Instant};

use abpr_engine::apd::{locate_buggy_nodes, NodeOracle};
use abpr_engine::{
    parse_program, parse_query, render_trace, solve_first, solve_traced, term_to_grid, EngineError, LimitKind, Program,
    ResourceLimits, Term, TraceOutcome, TraceRenderOptions,
};
use abpr_grid::{grid_diff, side_by_side, Grid};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::digest;
use crate::gateway::{
    challenge_diagrams, extract_code_block, permutation, render_examples, render_first_prompt, render_fix_prompt, ChatRequest,
    Gateway, GatewayError, LlmOracle, PromptBundle, RequestKind, Turn,
};
use crate::task::TaskRecord;

// ---- configuration ----

/// Engine limits in serializable form.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Limits {
    pub steps: u64,
    pub depth: usize,
    pub timeout_ms: u64,
}

impl Default for Limits {
    fn default() -> Self {
        let d = ResourceLimits::default();
        Limits { steps: d.max_steps, depth: d.max_depth, timeout_ms: d.timeout_ms }
    }
}

impl Limits {
    pub fn engine(&self) -> ResourceLimits {
        ResourceLimits { max_steps: self.steps, max_depth: self.depth, timeout_ms: self.timeout_ms }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceBudget {
    /// Node budget shared by all traces in one prompt.
    pub max_nodes: usize,
    pub max_term_depth: usize,
    pub max_list_items: usize,
    pub indent_width: usize,
}

impl Default for TraceBudget {
    fn default() -> Self {
        let d = TraceRenderOptions::default();
        TraceBudget {
            max_nodes: d.max_nodes,
            max_term_depth: d.max_term_depth,
            max_list_items: d.max_list_items,
            indent_width: d.indent_width,
        }
    }
}

impl TraceBudget {
    fn options(&self, max_nodes: usize) -> TraceRenderOptions {
        TraceRenderOptions {
            max_nodes: max_nodes.max(1),
            max_term_depth: self.max_term_depth,
            max_list_items: self.max_list_items,
            indent_width: self.indent_width,
        }
    }
}

/// Which buffered hypothesis the next iteration starts from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BaseSelection {
    /// The most recent entry.
    Latest,
    /// The entry with the best coverage, most recent first on ties.
    BestCoverage,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub max_iterations: u32,
    pub buffer_k: usize,
    pub limits: Limits,
    pub base_selection: BaseSelection,
    /// Run bug localization before each fix prompt and include the result.
    pub explicit_localization: bool,
    pub oracle_budget: usize,
    pub trace: TraceBudget,
    /// Character budget of the fix prompt.
    pub prompt_budget: usize,
    pub max_refiner_retries: u32,
    pub retry_backoff_ms: u64,
    pub temperature: f64,
    pub provider: String,
    pub model: String,
    pub max_output_tokens: u32,
    pub provider_options: BTreeMap<String, String>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            max_iterations: 10,
            buffer_k: 2,
            limits: Limits::default(),
            base_selection: BaseSelection::Latest,
            explicit_localization: false,
            oracle_budget: abpr_engine::apd::DEFAULT_QUERY_BUDGET,
            trace: TraceBudget::default(),
            prompt_budget: crate::gateway::DEFAULT_PROMPT_BUDGET,
            max_refiner_retries: 3,
            retry_backoff_ms: 500,
            temperature: 1.0,
            provider: "openai".into(),
            model: "gpt-5-mini".into(),
            max_output_tokens: 16_384,
            provider_options: BTreeMap::new(),
        }
    }
}

// ---- evaluation ----

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorKind {
    Parse,
    Steps,
    Depth,
    Timeout,
    Instantiation,
    Type,
    Evaluation,
    InvalidMatcher,
    CallableExpected,
    /// `Output` was bound to something that is not a grid.
    MalformedOutput,
}

impl From<&EngineError> for ErrorKind {
    fn from(e: &EngineError) -> Self {
        match e {
            EngineError::ResourceExhausted(LimitKind::Steps) => ErrorKind::Steps,
            EngineError::ResourceExhausted(LimitKind::Depth) => ErrorKind::Depth,
            EngineError::ResourceExhausted(LimitKind::Timeout) => ErrorKind::Timeout,
            EngineError::Instantiation { .. } => ErrorKind::Instantiation,
            EngineError::Type { .. } => ErrorKind::Type,
            EngineError::Evaluation { .. } => ErrorKind::Evaluation,
            EngineError::InvalidMatcher(_) => ErrorKind::InvalidMatcher,
            EngineError::CallableExpected(_) => ErrorKind::CallableExpected,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "outcome", rename_all = "snake_case")]
pub enum PairOutcome {
    Correct,
    WrongOutput { grid: Grid },
    Failed,
    Error { kind: ErrorKind, detail: String },
}

impl PairOutcome {
    pub fn label(&self) -> String {
        match self {
            PairOutcome::Correct => "correct".into(),
            PairOutcome::WrongOutput { .. } => "wrong output".into(),
            PairOutcome::Failed => "no solution".into(),
            PairOutcome::Error { kind, .. } => format!("error ({})", serde_json::to_value(kind).unwrap().as_str().unwrap()),
        }
    }
}

/// The `solve(Input, Output)` query for a grid, and the variable for Output.
pub fn solve_query(input: &Grid) -> (Term, Term) {
    let q = parse_query(&format!("solve({}, Output)", abpr_engine::grid_to_term(input))).expect("grid query parses");
    let out = Term::Var(q.var("Output").expect("query names Output"));
    (q.goal, out)
}

/// Runs `program` on one input and reads the first answer as a grid.
pub fn run_on(program: &Program, input: &Grid, limits: &ResourceLimits) -> Result<Option<Grid>, PairOutcome> {
    let (goal, out) = solve_query(input);
    match solve_first(program, &goal, limits) {
        Ok(Some(b)) => {
            let t = b.apply(&out);
            match term_to_grid(&t) {
                Some(g) => Ok(Some(g)),
                None => Err(PairOutcome::Error { kind: ErrorKind::MalformedOutput, detail: t.to_string() }),
            }
        }
        Ok(None) => Ok(None),
        Err(e) => Err(PairOutcome::Error { kind: ErrorKind::from(&e), detail: e.to_string() }),
    }
}

/// Per-pair outcomes of running `solve/2` on each input, and the number of
/// pairs solved exactly.
pub fn consistency_check(program: &Program, pairs: &[(&Grid, &Grid)], limits: &ResourceLimits) -> (Vec<PairOutcome>, usize) {
    let outcomes: Vec<PairOutcome> = pairs
        .iter()
        .map(|(input, expected)| match run_on(program, input, limits) {
            Ok(Some(g)) if &g == *expected => PairOutcome::Correct,
            Ok(Some(g)) => PairOutcome::WrongOutput { grid: g },
            Ok(None) => PairOutcome::Failed,
            Err(o) => o,
        })
        .collect();
    let coverage = outcomes.iter().filter(|o| **o == PairOutcome::Correct).count();
    (outcomes, coverage)
}

/// A candidate program with its training results.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Hypothesis {
    pub source: String,
    #[serde(skip)]
    pub program: Option<Arc<Program>>,
    /// Position in the run's sample sequence; the initial program is 1.
    pub timestamp: u32,
    pub coverage: usize,
    /// Outcome per training pair, in task order.
    pub outcomes: Vec<PairOutcome>,
    pub digest: String,
    /// Parser message when the source did not parse.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub parse_error: Option<String>,
}

impl PartialEq for Hypothesis {
    fn eq(&self, other: &Self) -> bool {
        self.source == other.source
            && self.timestamp == other.timestamp
            && self.coverage == other.coverage
            && self.outcomes == other.outcomes
            && self.parse_error == other.parse_error
    }
}

impl Hypothesis {
    pub fn evaluate(source: &str, pairs: &[(&Grid, &Grid)], limits: &ResourceLimits, timestamp: u32) -> Hypothesis {
        let digest = digest(source);
        match parse_program(source) {
            Ok(p) => {
                let (outcomes, coverage) = consistency_check(&p, pairs, limits);
                Hypothesis {
                    source: source.to_string(),
                    program: Some(Arc::new(p)),
                    timestamp,
                    coverage,
                    outcomes,
                    digest,
                    parse_error: None,
                }
            }
            Err(e) => Hypothesis {
                source: source.to_string(),
                program: None,
                timestamp,
                coverage: 0,
                outcomes: vec![PairOutcome::Error { kind: ErrorKind::Parse, detail: e.to_string() }; pairs.len()],
                digest,
                parse_error: Some(e.to_string()),
            },
        }
    }

    pub fn parsed(&self) -> bool {
        self.parse_error.is_none()
    }

    pub fn is_consistent(&self) -> bool {
        self.parsed() && !self.outcomes.is_empty() && self.coverage == self.outcomes.len()
    }

    /// Retention order: coverage, then parseable before unparseable, then
    /// recency.
    pub fn rank_key(&self) -> (usize, bool, u32) {
        (self.coverage, self.parsed(), self.timestamp)
    }

    /// The parsed program, re-parsing when the hypothesis was deserialized.
    pub fn program(&self) -> Option<Arc<Program>> {
        self.program.clone().or_else(|| parse_program(&self.source).ok().map(Arc::new))
    }
}

// ---- history buffer ----

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum RefineError {
    #[error("history buffer is empty")]
    EmptyBuffer,
}

/// The best `k` hypotheses offered so far.
#[derive(Debug, Clone)]
pub struct HistoryBuffer {
    k: usize,
    entries: Vec<Hypothesis>,
}

impl HistoryBuffer {
    pub fn new(k: usize) -> HistoryBuffer {
        HistoryBuffer { k: k.max(1), entries: Vec::new() }
    }

    pub fn capacity(&self) -> usize {
        self.k
    }

    /// Entries, best first.
    pub fn entries(&self) -> &[Hypothesis] {
        &self.entries
    }

    pub fn offer(&mut self, h: Hypothesis) {
        self.entries.push(h);
        self.entries.sort_by_key(|h| std::cmp::Reverse(h.rank_key()));
        self.entries.truncate(self.k);
    }

    pub fn select_base(&self, how: BaseSelection) -> Result<&Hypothesis, RefineError> {
        match how {
            BaseSelection::Latest => self.entries.iter().max_by_key(|h| h.timestamp),
            BaseSelection::BestCoverage => self.best(),
        }
        .ok_or(RefineError::EmptyBuffer)
    }

    pub fn best(&self) -> Option<&Hypothesis> {
        self.entries.iter().max_by_key(|h| h.rank_key())
    }
}

// ---- refiner contract ----

/// One attempt as shown in the fix prompt's history section.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AttemptSummary {
    pub timestamp: u32,
    pub coverage: usize,
    pub source: String,
    pub outcomes: Vec<PairOutcome>,
}

impl AttemptSummary {
    pub fn of(h: &Hypothesis) -> AttemptSummary {
        AttemptSummary { timestamp: h.timestamp, coverage: h.coverage, source: h.source.clone(), outcomes: h.outcomes.clone() }
    }

    pub fn render(&self) -> String {
        let results: Vec<String> =
            self.outcomes.iter().enumerate().map(|(i, o)| format!("example {}: {}", i + 1, o.label())).collect();
        format!(
            "--- Attempt {} (solved {}/{} training examples) ---\n```prolog\n{}\n```\nResults: {}",
            self.timestamp,
            self.coverage,
            self.outcomes.len(),
            self.source.trim_end(),
            results.join("; ")
        )
    }
}

/// Everything a refiner sees when asked for a successor.
#[derive(Debug, Clone, PartialEq)]
pub struct RefineContext {
    pub task_id: String,
    pub seed: u64,
    /// Loop iteration, 1-based.
    pub iteration: u32,
    pub max_iterations: u32,
    /// Hypotheses tested so far.
    pub iteration_count: u32,
    pub base: Hypothesis,
    /// Training examples in this run's order, as in the first prompt.
    pub examples: String,
    pub trace_detail: String,
    /// Oldest first.
    pub attempts: Vec<AttemptSummary>,
    pub challenge_diagrams: String,
    /// Localized buggy clause instances, when explicit localization is on.
    pub buggy_nodes: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Sample {
    pub source: String,
    pub prompt_digest: String,
    pub response_digest: String,
    /// Anything unusual about the sample, e.g. an unfenced response.
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RefinerError {
    /// Retryable.
    #[error("refiner transport failed: {0}")]
    Transport(String),
    #[error("prompt construction failed: {0}")]
    Prompt(String),
}

/// Proposes programs: an initial one from the examples, then successors of
/// a base hypothesis.
pub trait Refiner: Send {
    fn initial(&mut self, task: &TaskRecord, examples: &str) -> Result<Sample, RefinerError>;
    fn refine(&mut self, ctx: &RefineContext) -> Result<Sample, RefinerError>;
    /// Oracle for explicit localization, primed with the base program.
    fn oracle(&mut self, _base: &Hypothesis, _examples: &str) -> Option<&mut dyn NodeOracle> {
        None
    }
}

/// A refiner that replays a fixed list of programs: the first entry is the
/// initial program, later entries answer successive fix requests, and the
/// last entry repeats.
#[derive(Debug, Clone, Default)]
pub struct ScriptedRefiner {
    steps: Vec<ScriptStep>,
    next: usize,
    /// Contexts received by `refine`, for inspection.
    pub contexts: Vec<RefineContext>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ScriptStep {
    Source(String),
    TransportFailure,
}

impl ScriptedRefiner {
    pub fn new(steps: Vec<ScriptStep>) -> ScriptedRefiner {
        ScriptedRefiner { steps, next: 0, contexts: Vec::new() }
    }

    pub fn from_sources<S: Into<String>>(sources: impl IntoIterator<Item = S>) -> ScriptedRefiner {
        ScriptedRefiner::new(sources.into_iter().map(|s| ScriptStep::Source(s.into())).collect())
    }

    fn step(&mut self) -> Result<Sample, RefinerError> {
        let i = self.next.min(self.steps.len().saturating_sub(1));
        self.next += 1;
        match self.steps.get(i) {
            Some(ScriptStep::Source(s)) => Ok(Sample { source: s.clone(), ..Sample::default() }),
            Some(ScriptStep::TransportFailure) => Err(RefinerError::Transport("scripted failure".into())),
            None => Err(RefinerError::Transport("empty script".into())),
        }
    }
}

impl Refiner for ScriptedRefiner {
    fn initial(&mut self, _task: &TaskRecord, _examples: &str) -> Result<Sample, RefinerError> {
        self.step()
    }

    fn refine(&mut self, ctx: &RefineContext) -> Result<Sample, RefinerError> {
        self.contexts.push(ctx.clone());
        self.step()
    }
}

/// A refiner backed by a chat model.
pub struct LlmRefiner {
    gateway: Arc<Gateway>,
    bundle: Arc<PromptBundle>,
    config: RunConfig,
    task_id: String,
    seed: u64,
    seq: u32,
    oracle: LlmOracle,
}

impl LlmRefiner {
    pub fn new(gateway: Arc<Gateway>, bundle: Arc<PromptBundle>, config: &RunConfig, task_id: &str, seed: u64) -> LlmRefiner {
        let oracle = LlmOracle::new(gateway.clone(), &config.provider, &config.model, task_id, seed);
        LlmRefiner { gateway, bundle, config: config.clone(), task_id: task_id.to_string(), seed, seq: 0, oracle }
    }

    fn ask(&mut self, user: String, prior: Vec<Turn>) -> Result<(String, String, String), RefinerError> {
        let req = ChatRequest {
            system: self.bundle.system.clone(),
            user,
            temperature: self.config.temperature,
            max_output_tokens: self.config.max_output_tokens,
            provider: self.config.provider.clone(),
            model: self.config.model.clone(),
            kind: RequestKind::Generate,
            task_id: self.task_id.clone(),
            seed: self.seed,
            seq: self.seq,
            options: self.config.provider_options.clone(),
            prior,
        };
        self.seq += 1;
        let prompt_digest = req.digest();
        let response = self.gateway.complete(&req).map_err(|e| RefinerError::Transport(e.to_string()))?;
        let response_digest = digest(&response);
        Ok((response, prompt_digest, response_digest))
    }

    fn sample(&mut self, user: String, prior: Vec<Turn>, fallback: &str) -> Result<Sample, RefinerError> {
        let (response, prompt_digest, response_digest) = self.ask(user, prior)?;
        let (source, note) = match extract_code_block(&response) {
            Ok(e) if e.fenced => (e.code, None),
            Ok(e) => (e.code, Some("response had no fenced code block".to_string())),
            Err(_) => (fallback.to_string(), Some("empty response; previous program kept".to_string())),
        };
        Ok(Sample { source, prompt_digest, response_digest, note })
    }
}

impl Refiner for LlmRefiner {
    fn initial(&mut self, _task: &TaskRecord, examples: &str) -> Result<Sample, RefinerError> {
        let user = render_first_prompt(&self.bundle, examples).map_err(|e| RefinerError::Prompt(e.to_string()))?;
        self.sample(user, Vec::new(), "")
    }

    fn refine(&mut self, ctx: &RefineContext) -> Result<Sample, RefinerError> {
        let prompt = |e: GatewayError| RefinerError::Prompt(e.to_string());
        // the fix prompt follows the first exchange, answered by the base
        let first = render_first_prompt(&self.bundle, &ctx.examples).map_err(prompt)?;
        let prior = vec![Turn { user: first, assistant: format!("```prolog\n{}\n```", ctx.base.source.trim_end()) }];
        let user = render_fix_prompt(&self.bundle, ctx, self.config.prompt_budget).map_err(prompt)?;
        self.sample(user, prior, &ctx.base.source)
    }

    fn oracle(&mut self, base: &Hypothesis, examples: &str) -> Option<&mut dyn NodeOracle> {
        self.oracle.program = base.source.clone();
        self.oracle.examples = examples.to_string();
        Some(&mut self.oracle)
    }
}

// ---- traces for the fix prompt ----

fn rendered_nodes(text: &str) -> usize {
    text.lines().filter(|l| !l.starts_with("… (")).count()
}

/// Debugger output for every training pair the base gets wrong: the grids,
/// the cell differences and the proof tree (or failure witness), sharing one
/// node budget.
pub fn trace_detail(task: &TaskRecord, base: &Hypothesis, config: &RunConfig) -> String {
    let Some(program) = base.program() else {
        return format!("The program does not parse: {}", base.parse_error.clone().unwrap_or_default());
    };
    let limits = config.limits.engine();
    let mut remaining = config.trace.max_nodes;
    let mut sections = Vec::new();
    for (i, (pair, outcome)) in task.train.iter().zip(&base.outcomes).enumerate() {
        if *outcome == PairOutcome::Correct {
            continue;
        }
        let mut s = format!("=== Training example {}: {} ===\n", i + 1, outcome.label());
        let actual = match outcome {
            PairOutcome::WrongOutput { grid } => Some(grid),
            _ => None,
        };
        s.push_str(&side_by_side(&[("INPUT", Some(&pair.input)), ("EXPECTED", Some(&pair.output)), ("ACTUAL", actual)]));
        s.push_str("\nDIFFERENCE SUMMARY:\n");
        match (outcome, actual) {
            (_, Some(a)) => s.push_str(&grid_diff(&pair.output, a).render_summary(20)),
            (PairOutcome::Error { detail, .. }, None) => s.push_str(&format!("no output: {detail}\n")),
            _ => s.push_str("no output: solve/2 has no solution for this input\n"),
        }
        let (goal, _) = solve_query(&pair.input);
        let (heading, tree) = match solve_traced(&program, &goal, &limits) {
            Ok(TraceOutcome::Proved { tree, .. }) => ("PROOF TREE", Some(tree)),
            Ok(TraceOutcome::Failed { witness }) => ("PROOF TREE (failure witness)", Some(witness)),
            Err(e) => ("PROOF TREE (partial, up to the error)", e.partial),
        };
        s.push_str(&format!("\n{heading}:\n"));
        match tree {
            _ if remaining == 0 => s.push_str("(omitted: trace budget spent)\n"),
            Some(t) => {
                let text = render_trace(&t, &config.trace.options(remaining));
                remaining = remaining.saturating_sub(rendered_nodes(&text));
                s.push_str(&text);
            }
            None => s.push_str("(not available)\n"),
        }
        sections.push(s);
    }
    sections.join("\n")
}

/// Serialized candidate buggy nodes for the first wrong-output pair: the
/// clause text and the instantiated head of each.
pub fn localize(task: &TaskRecord, base: &Hypothesis, oracle: &mut dyn NodeOracle, config: &RunConfig) -> Option<String> {
    let program = base.program()?;
    let i = base.outcomes.iter().position(|o| matches!(o, PairOutcome::WrongOutput { .. }))?;
    let (goal, _) = solve_query(&task.train[i].input);
    let TraceOutcome::Proved { tree, .. } = solve_traced(&program, &goal, &config.limits.engine()).ok()? else { return None };
    let set = match locate_buggy_nodes(&tree, oracle, config.oracle_budget) {
        Ok(s) => s,
        Err(e) => return Some(format!("(localization failed: {e})")),
    };
    let mut out = format!("Training example {}, {} oracle queries", i + 1, set.queries);
    if set.truncated {
        out.push_str(", query budget exhausted");
    }
    out.push('\n');
    if set.nodes.is_empty() {
        out.push_str("No buggy node found.\n");
    }
    for n in &set.nodes {
        out.push_str(&format!("Clause:\n{}\nInstance:\n{}\n\n", program.clause(n.clause).text(), n.goal));
    }
    Some(out)
}

// ---- the loop ----

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RunError {
    #[error("refiner failed after retries: {0}")]
    RefinerFailure(String),
    #[error("no parseable initial program: {0}")]
    InitializationFailure(String),
}

/// One line of the iteration log.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub run_seed: u64,
    pub t: u32,
    pub coverage: usize,
    pub outcome: String,
    pub source_digest: String,
    pub prompt_digest: String,
    pub response_digest: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
    pub elapsed_ms: u64,
}

impl IterationRecord {
    fn new(seed: u64, h: &Hypothesis, sample: &Sample, started: Instant) -> IterationRecord {
        let outcome = if !h.parsed() {
            "parse_error"
        } else if h.is_consistent() {
            "consistent"
        } else {
            "inconsistent"
        };
        IterationRecord {
            run_seed: seed,
            t: h.timestamp,
            coverage: h.coverage,
            outcome: outcome.into(),
            source_digest: h.digest.clone(),
            prompt_digest: sample.prompt_digest.clone(),
            response_digest: sample.response_digest.clone(),
            note: sample.note.clone(),
            elapsed_ms: started.elapsed().as_millis() as u64,
        }
    }

    /// The record with timing zeroed, for run-to-run comparison.
    pub fn untimed(&self) -> IterationRecord {
        IterationRecord { elapsed_ms: 0, ..self.clone() }
    }
}

#[derive(Debug, Clone)]
pub struct RunResult {
    pub seed: u64,
    pub hypothesis: Hypothesis,
    pub log: Vec<IterationRecord>,
    /// Timestamp of the consistent hypothesis, when the run stopped early.
    pub solved_at: Option<u32>,
    /// Final buffer contents, best first.
    pub buffer: Vec<Hypothesis>,
}

fn with_retries<T>(
    config: &RunConfig,
    mut call: impl FnMut() -> Result<T, RefinerError>,
) -> Result<T, RunError> {
    let attempts = config.max_refiner_retries.max(1);
    let mut last = String::new();
    for n in 0..attempts {
        match call() {
            Ok(v) => return Ok(v),
            Err(RefinerError::Prompt(e)) => return Err(RunError::RefinerFailure(e)),
            Err(RefinerError::Transport(e)) => last = e,
        }
        if n + 1 < attempts && config.retry_backoff_ms > 0 {
            std::thread::sleep(Duration::from_millis(config.retry_backoff_ms << n));
        }
    }
    Err(RunError::RefinerFailure(last))
}

/// Runs the refinement loop on one task.
///
/// The initial program has timestamp 1 and the program sampled in loop
/// iteration `i` has timestamp `i + 1`. The run stops at the first
/// hypothesis that solves every training pair; otherwise it returns the
/// buffered hypothesis with the best coverage, most recent on ties.
pub fn abpr_run(task: &TaskRecord, refiner: &mut dyn Refiner, config: &RunConfig, seed: u64) -> Result<RunResult, RunError> {
    let pairs = task.train_pairs();
    let limits = config.limits.engine();
    let examples = render_examples(task, &permutation(task.train.len(), seed));
    let challenges = challenge_diagrams(task);
    let mut log = Vec::new();

    let started = Instant::now();
    let mut discarded = Vec::new();
    let h0 = loop {
        let sample = with_retries(config, || refiner.initial(task, &examples))?;
        let h = Hypothesis::evaluate(&sample.source, &pairs, &limits, 1);
        if h.parsed() {
            let mut sample = sample;
            if !discarded.is_empty() {
                let note = format!("{} unparseable initial sample(s) discarded", discarded.len());
                sample.note = Some(match sample.note {
                    Some(n) => format!("{n}; {note}"),
                    None => note,
                });
            }
            log.push(IterationRecord::new(seed, &h, &sample, started));
            break h;
        }
        discarded.push(h.parse_error.unwrap_or_default());
        if discarded.len() as u32 >= config.max_refiner_retries.max(1) {
            return Err(RunError::InitializationFailure(discarded.join(" | ")));
        }
    };
    if h0.is_consistent() {
        return Ok(RunResult { seed, solved_at: Some(h0.timestamp), buffer: vec![h0.clone()], hypothesis: h0, log });
    }
    let mut buffer = HistoryBuffer::new(config.buffer_k);
    let mut previous = h0.clone();
    buffer.offer(h0);

    for i in 1..=config.max_iterations {
        let started = Instant::now();
        let base = buffer.select_base(config.base_selection).expect("buffer holds the initial program").clone();
        let mut shown: Vec<&Hypothesis> = buffer.entries().iter().collect();
        if !shown.iter().any(|h| h.timestamp == previous.timestamp) {
            shown.push(&previous);
        }
        shown.sort_by_key(|h| h.timestamp);
        let buggy_nodes = if config.explicit_localization {
            refiner.oracle(&base, &examples).and_then(|o| localize(task, &base, o, config))
        } else {
            None
        };
        let ctx = RefineContext {
            task_id: task.id.clone(),
            seed,
            iteration: i,
            max_iterations: config.max_iterations,
            iteration_count: i,
            trace_detail: trace_detail(task, &base, config),
            attempts: shown.iter().map(|h| AttemptSummary::of(h)).collect(),
            base,
            examples: examples.clone(),
            challenge_diagrams: challenges.clone(),
            buggy_nodes,
        };
        let sample = with_retries(config, || refiner.refine(&ctx))?;
        let h = Hypothesis::evaluate(&sample.source, &pairs, &limits, i + 1);
        log.push(IterationRecord::new(seed, &h, &sample, started));
        if h.is_consistent() {
            let mut kept: Vec<Hypothesis> = buffer.entries().to_vec();
            kept.insert(0, h.clone());
            return Ok(RunResult { seed, solved_at: Some(h.timestamp), hypothesis: h, log, buffer: kept });
        }
        previous = h.clone();
        buffer.offer(h);
    }
    let best = buffer.best().expect("buffer is not empty").clone();
    Ok(RunResult { seed, hypothesis: best, log, solved_at: None, buffer: buffer.entries().to_vec() })
}
