//! The `abpr` command line.

use std::ffi::OsString;
use std::io::{BufRead, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use abpr_core::gateway::{api_key_var, credentials_available, HttpTransport, MockScript, MockTransport, RetryPolicy, Transport};
use abpr_core::harness::{self, load_results, load_suite, recorded_max_timestamp, Mode, Summary, SuiteConfig, TaskResult};
use abpr_core::interactive::{debug_session, InteractiveOracle, SessionOutcome};
use abpr_core::refine::{run_on, solve_query, LlmRefiner, Refiner};
use abpr_core::{digest, load_task, Gateway, PromptBundle, RankOrder, TaskRecord};
use abpr_engine::apd::OracleError;
use abpr_engine::{parse_program, parse_query, render_trace, solve_traced, Program, Term, TraceOutcome, TraceRenderOptions};
use abpr_grid::Grid;
use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser, Debug)]
#[command(name = "abpr", version, about = "Trace-guided Prolog program refinement for ARC tasks")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Run every task file in a directory and write results
    Run {
        #[arg(long, value_name = "DIR")]
        tasks: PathBuf,
        #[command(flatten)]
        opts: RunOpts,
    },
    /// Run one task and show every run and the selected programs
    Solve {
        #[arg(long, value_name = "FILE")]
        task: PathBuf,
        #[command(flatten)]
        opts: RunOpts,
    },
    /// Print the proof tree or failure witness of a goal
    Trace {
        program: PathBuf,
        goal: String,
        #[command(flatten)]
        limits: LimitOpts,
        /// Node budget of the rendered tree
        #[arg(long, default_value_t = 800)]
        max_nodes: usize,
    },
    /// Run solve/2 on a grid stored as JSON rows and print the output grid
    Exec {
        program: PathBuf,
        input: PathBuf,
        #[command(flatten)]
        limits: LimitOpts,
    },
    /// Recompute the summary from a results file or output directory
    Report { results: PathBuf },
    /// Find buggy clauses by answering questions about goal instances
    Debug {
        program: PathBuf,
        /// Debug the program on a training pair of this task
        #[arg(long, value_name = "FILE", conflicts_with = "goal")]
        task: Option<PathBuf>,
        /// 1-based training pair; defaults to the first one answered wrongly
        #[arg(long, requires = "task")]
        pair: Option<usize>,
        /// Debug this goal instead of a training pair
        #[arg(long)]
        goal: Option<String>,
        #[arg(long, value_enum)]
        mode: Option<ModeArg>,
        #[arg(long, default_value_t = abpr_engine::apd::DEFAULT_QUERY_BUDGET)]
        max_questions: usize,
        #[command(flatten)]
        limits: LimitOpts,
    },
}

#[derive(Args, Debug, Default, Clone)]
pub struct LimitOpts {
    /// Resolution steps per query
    #[arg(long, value_name = "N")]
    pub step_limit: Option<u64>,
    /// Wall time per query in milliseconds
    #[arg(long, value_name = "N")]
    pub timeout_ms: Option<u64>,
    /// Maximum recursion depth per query
    #[arg(long, value_name = "N")]
    pub depth_limit: Option<usize>,
}

impl LimitOpts {
    fn apply(&self, l: &mut abpr_core::refine::Limits) {
        if let Some(v) = self.step_limit {
            l.steps = v;
        }
        if let Some(v) = self.timeout_ms {
            l.timeout_ms = v;
        }
        if let Some(v) = self.depth_limit {
            l.depth = v;
        }
    }

    fn engine(&self) -> abpr_engine::ResourceLimits {
        let mut l = abpr_core::refine::Limits::default();
        self.apply(&mut l);
        l.engine()
    }
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModeArg {
    Live,
    Mock,
    Interactive,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum RankArg {
    Coverage,
    Consensus,
}

/// Flags for `run` and `solve`. Unset flags keep the value from `--config`,
/// or the default.
#[derive(Args, Debug, Default, Clone)]
pub struct RunOpts {
    /// Start from a saved config.json
    #[arg(long, value_name = "FILE")]
    pub config: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub mode: Option<ModeArg>,
    /// Canned responses for mock mode
    #[arg(long, value_name = "FILE")]
    pub mock_script: Option<PathBuf>,
    /// Worker threads per task
    #[arg(long, value_name = "N")]
    pub threads: Option<usize>,
    /// Independent runs per task
    #[arg(long, value_name = "N")]
    pub instances: Option<usize>,
    /// Refinement steps per run
    #[arg(long, value_name = "T")]
    pub max_iters: Option<u32>,
    /// Hypotheses kept per run
    #[arg(long, value_name = "K")]
    pub buffer_k: Option<usize>,
    /// Seed of run 0; run i uses seed + i
    #[arg(long, value_name = "S")]
    pub seed: Option<u64>,
    #[arg(long, value_name = "ID")]
    pub provider: Option<String>,
    #[arg(long, value_name = "ID")]
    pub model: Option<String>,
    #[arg(long)]
    pub temperature: Option<f64>,
    /// Output directory
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// Character budget of a fix prompt
    #[arg(long, value_name = "CHARS")]
    pub budget: Option<usize>,
    /// Concurrent model requests across all runs
    #[arg(long, value_name = "N")]
    pub in_flight: Option<usize>,
    #[arg(long, value_enum)]
    pub rank: Option<RankArg>,
    /// Ask the model to localize buggy clauses before each fix
    #[arg(long)]
    pub explicit_localization: bool,
    #[command(flatten)]
    pub limits: LimitOpts,
}

/// Exit status 2: bad flags, inputs or environment. Status 1: some task
/// or goal could not be processed.
#[derive(Debug)]
pub enum Failure {
    Config(String),
    Task(String),
}

impl Failure {
    fn code(&self) -> i32 {
        match self {
            Failure::Config(_) => 2,
            Failure::Task(_) => 1,
        }
    }

    fn line(&self) -> String {
        let (kind, msg) = match self {
            Failure::Config(m) => ("config", m),
            Failure::Task(m) => ("task", m),
        };
        format!("error: {kind}: {}", msg.replace('\n', " "))
    }
}

pub struct Io<'a> {
    pub stdin: &'a mut dyn BufRead,
    pub stdout: &'a mut dyn Write,
    pub stderr: &'a mut dyn Write,
}

/// Parses `args` and runs the command, returning the exit status.
pub fn run_cli<I, T>(args: I, io: &mut Io) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion | ErrorKind::DisplayHelpOnMissingArgumentOrSubcommand) {
                let _ = write!(io.stdout, "{e}");
                return 0;
            }
            let first = e.to_string().lines().next().unwrap_or("").trim_start_matches("error: ").to_string();
            let _ = writeln!(io.stderr, "error: usage: {first}");
            return 2;
        }
    };
    match dispatch(cli.command, io) {
        Ok(code) => code,
        Err(f) => {
            let _ = writeln!(io.stderr, "{}", f.line());
            f.code()
        }
    }
}

fn write_err(e: std::io::Error) -> Failure {
    Failure::Config(format!("write failed: {e}"))
}

fn dispatch(command: Command, io: &mut Io) -> Result<i32, Failure> {
    match command {
        Command::Run { tasks, opts } => cmd_run(&tasks, &opts, io),
        Command::Solve { task, opts } => cmd_solve(&task, &opts, io),
        Command::Trace { program, goal, limits, max_nodes } => cmd_trace(&program, &goal, &limits, max_nodes, io),
        Command::Exec { program, input, limits } => cmd_exec(&program, &input, &limits, io),
        Command::Report { results } => cmd_report(&results, io),
        Command::Debug { program, task, pair, goal, mode, max_questions, limits } => {
            if matches!(mode, Some(m) if m != ModeArg::Interactive) {
                return Err(Failure::Config("debug only supports --mode interactive".into()));
            }
            cmd_debug(&program, task.as_deref(), pair, goal.as_deref(), max_questions, &limits, io)
        }
    }
}

fn read(path: &Path) -> Result<String, Failure> {
    std::fs::read_to_string(path).map_err(|e| Failure::Config(format!("cannot read {}: {e}", path.display())))
}

fn load_program(path: &Path) -> Result<Program, Failure> {
    parse_program(&read(path)?).map_err(|e| Failure::Task(format!("{}: {e}", path.display())))
}

/// The suite configuration selected by the flags.
pub fn suite_config(opts: &RunOpts) -> Result<SuiteConfig, Failure> {
    let mut c: SuiteConfig = match &opts.config {
        Some(p) => serde_json::from_str(&read(p)?).map_err(|e| Failure::Config(format!("{}: {e}", p.display())))?,
        None => SuiteConfig { mode: Mode::Live, in_flight: abpr_core::gateway::DEFAULT_IN_FLIGHT, ..SuiteConfig::default() },
    };
    if let Some(m) = opts.mode {
        c.mode = match m {
            ModeArg::Live => Mode::Live,
            ModeArg::Mock => Mode::Mock,
            ModeArg::Interactive => Mode::Interactive,
        };
    }
    if let Some(p) = &opts.mock_script {
        c.mock_script = Some(p.display().to_string());
    }
    macro_rules! set {
        ($field:expr, $value:expr) => {
            if let Some(v) = $value.clone() {
                $field = v;
            }
        };
    }
    set!(c.ensemble.threads, opts.threads);
    set!(c.ensemble.instances, opts.instances);
    set!(c.ensemble.base_seed, opts.seed);
    set!(c.run.max_iterations, opts.max_iters);
    set!(c.run.buffer_k, opts.buffer_k);
    set!(c.run.provider, opts.provider);
    set!(c.run.model, opts.model);
    set!(c.run.temperature, opts.temperature);
    set!(c.run.prompt_budget, opts.budget);
    set!(c.in_flight, opts.in_flight);
    if let Some(r) = opts.rank {
        c.ensemble.rank = match r {
            RankArg::Coverage => RankOrder::CoverageFirst,
            RankArg::Consensus => RankOrder::ConsensusFirst,
        };
    }
    if opts.explicit_localization {
        c.run.explicit_localization = true;
    }
    opts.limits.apply(&mut c.run.limits);
    if c.ensemble.instances == 0 {
        return Err(Failure::Config("--instances must be at least 1".into()));
    }
    if c.run.buffer_k == 0 {
        return Err(Failure::Config("--buffer-k must be at least 1".into()));
    }
    c.ensemble.threads = c.ensemble.threads.max(1);
    c.in_flight = c.in_flight.max(1);
    match c.mode {
        Mode::Interactive => return Err(Failure::Config("interactive mode is only available for the debug command".into())),
        Mode::Live if !credentials_available(&c.run.provider) => {
            return Err(Failure::Config(format!("{} is not set", api_key_var(&c.run.provider))))
        }
        _ => {}
    }
    Ok(c)
}

fn gateway(config: &mut SuiteConfig) -> Result<Arc<Gateway>, Failure> {
    let (transport, retry): (Arc<dyn Transport>, RetryPolicy) = match config.mode {
        Mode::Mock => {
            let path = config.mock_script.clone().ok_or_else(|| Failure::Config("mock mode needs --mock-script".into()))?;
            let text = read(Path::new(&path))?;
            config.inputs.insert(path.clone(), digest(&text));
            let script: MockScript = serde_json::from_str(&text).map_err(|e| Failure::Config(format!("{path}: {e}")))?;
            (Arc::new(MockTransport::new(script)), RetryPolicy { base_delay: Duration::ZERO, ..RetryPolicy::default() })
        }
        Mode::Live => (Arc::new(HttpTransport::new(Duration::from_secs(600))), RetryPolicy::default()),
        Mode::Interactive => unreachable!("rejected by suite_config"),
    };
    Ok(Arc::new(Gateway::new(transport, config.in_flight).with_retry(retry)))
}

fn suite(
    tasks: &[TaskRecord],
    mut config: SuiteConfig,
    opts: &RunOpts,
    io: &mut Io,
    verbose: bool,
) -> Result<(Vec<TaskResult>, Summary), Failure> {
    let gateway = gateway(&mut config)?;
    if config.mode == Mode::Mock {
        config.run.retry_backoff_ms = 0;
    }
    let bundle = Arc::new(PromptBundle::default());
    let run_config = config.run.clone();
    let factory = move |t: &TaskRecord, seed: u64| -> Box<dyn Refiner> {
        Box::new(LlmRefiner::new(gateway.clone(), bundle.clone(), &run_config, &t.id, seed))
    };
    let out = opts.out.clone().unwrap_or_else(|| PathBuf::from("out"));
    let stdout = &mut *io.stdout;
    let mut progress = |r: &TaskResult| {
        let _ = writeln!(stdout, "{}", task_line(r));
        if verbose {
            let _ = write!(stdout, "{}", task_details(r));
        }
    };
    harness::run_suite(tasks, &factory, &config, &out, &mut progress)
        .map_err(|e| Failure::Config(format!("cannot write to {}: {e}", out.display())))
}

fn task_line(r: &TaskResult) -> String {
    if let Some(e) = &r.error {
        return format!("{}: error: {e}", r.task_id);
    }
    match (r.pass_at_2, r.solved_iteration) {
        (Some(true), Some(t)) => format!("{}: solved (iteration {t})", r.task_id),
        (Some(true), None) => format!("{}: solved", r.task_id),
        (Some(false), _) => format!("{}: not solved", r.task_id),
        (None, _) => format!("{}: predictions written (no test outputs)", r.task_id),
    }
}

fn task_details(r: &TaskResult) -> String {
    let mut s = String::new();
    for (i, run) in r.runs.iter().enumerate() {
        match (&run.error, run.solved_at) {
            (Some(e), _) => s.push_str(&format!("  run {i} (seed {}): failed: {e}\n", run.seed)),
            (None, Some(t)) => s.push_str(&format!("  run {i} (seed {}): consistent at t={t}\n", run.seed)),
            (None, None) => s.push_str(&format!(
                "  run {i} (seed {}): best coverage {} after {} samples\n",
                run.seed,
                run.final_coverage.unwrap_or(0),
                run.iterations
            )),
        }
    }
    for (i, sel) in r.selected.iter().enumerate() {
        s.push_str(&format!(
            "  submission {}: run {} (group of {}, coverage {}, t={})\n```prolog\n{}\n```\n",
            i + 1,
            sel.run,
            sel.group_size,
            sel.coverage,
            sel.timestamp,
            sel.source.trim_end()
        ));
        match &sel.predictions {
            Some(ps) => {
                for (j, p) in ps.iter().enumerate() {
                    s.push_str(&format!("  prediction {}:\n{p}\n", j + 1));
                }
            }
            None => s.push_str("  no prediction: the program fails on a test input\n"),
        }
    }
    s
}

fn cmd_run(dir: &Path, opts: &RunOpts, io: &mut Io) -> Result<i32, Failure> {
    let mut config = suite_config(opts)?;
    let (tasks, load_errors) = load_suite(dir).map_err(|e| Failure::Config(format!("cannot read {}: {e}", dir.display())))?;
    for e in &load_errors {
        writeln!(io.stderr, "warning: {e}").map_err(write_err)?;
    }
    for t in &tasks {
        for w in t.warnings() {
            writeln!(io.stderr, "warning: {w}").map_err(write_err)?;
        }
        let path = dir.join(format!("{}.json", t.id));
        if let Ok(text) = std::fs::read_to_string(&path) {
            config.inputs.insert(path.display().to_string(), digest(&text));
        }
    }
    if tasks.is_empty() && load_errors.is_empty() {
        return Err(Failure::Config(format!("no task files in {}", dir.display())));
    }
    let (results, summary) = suite(&tasks, config, opts, io, false)?;
    write!(io.stdout, "{}", summary.render()).map_err(write_err)?;
    let failed = load_errors.len() + results.iter().filter(|r| r.error.is_some()).count();
    Ok(if failed > 0 { 1 } else { 0 })
}

fn cmd_solve(path: &Path, opts: &RunOpts, io: &mut Io) -> Result<i32, Failure> {
    let mut config = suite_config(opts)?;
    let task = load_task(path).map_err(|e| Failure::Task(e.to_string()))?;
    config.inputs.insert(path.display().to_string(), digest(&read(path)?));
    for w in task.warnings() {
        writeln!(io.stderr, "warning: {w}").map_err(write_err)?;
    }
    writeln!(io.stdout, "task {}: {} training pairs, {} test inputs", task.id, task.train.len(), task.test.len()).map_err(write_err)?;
    let (results, _) = suite(std::slice::from_ref(&task), config, opts, io, true)?;
    Ok(if results.iter().any(|r| r.error.is_some()) { 1 } else { 0 })
}

/// `Name = value` for each named query variable, or `true`.
fn answer_line(q: &abpr_engine::Query, b: &abpr_engine::Bindings) -> String {
    let parts: Vec<String> = q
        .var_names
        .iter()
        .filter(|n| !n.starts_with('_'))
        .filter_map(|n| q.var(n).map(|v| format!("{n} = {}", b.apply(&Term::Var(v)))))
        .collect();
    if parts.is_empty() {
        "true.".into()
    } else {
        format!("{}.", parts.join(", "))
    }
}

fn cmd_trace(path: &Path, goal: &str, limits: &LimitOpts, max_nodes: usize, io: &mut Io) -> Result<i32, Failure> {
    let program = load_program(path)?;
    let q = parse_query(goal).map_err(|e| Failure::Task(format!("goal: {e}")))?;
    let opts = TraceRenderOptions { max_nodes: max_nodes.max(1), ..TraceRenderOptions::default() };
    match solve_traced(&program, &q.goal, &limits.engine()) {
        Ok(TraceOutcome::Proved { bindings, tree }) => {
            writeln!(io.stdout, "{}{}", render_trace(&tree, &opts), answer_line(&q, &bindings)).map_err(write_err)?;
            Ok(0)
        }
        Ok(TraceOutcome::Failed { witness }) => {
            writeln!(io.stdout, "{}false.", render_trace(&witness, &opts)).map_err(write_err)?;
            Ok(0)
        }
        Err(e) => {
            if let Some(t) = &e.partial {
                write!(io.stdout, "{}", render_trace(t, &opts)).map_err(write_err)?;
            }
            Err(Failure::Task(format!("engine: {}", e.error)))
        }
    }
}

fn read_grid(path: &Path) -> Result<Grid, Failure> {
    let rows: Vec<Vec<i64>> =
        serde_json::from_str(&read(path)?).map_err(|e| Failure::Config(format!("{}: not a grid: {e}", path.display())))?;
    Grid::from_rows(&rows).map_err(|e| Failure::Config(format!("{}: {e}", path.display())))
}

fn cmd_exec(path: &Path, input: &Path, limits: &LimitOpts, io: &mut Io) -> Result<i32, Failure> {
    let program = load_program(path)?;
    let grid = read_grid(input)?;
    match run_on(&program, &grid, &limits.engine()) {
        Ok(Some(g)) => {
            writeln!(io.stdout, "{g}").map_err(write_err)?;
            Ok(0)
        }
        Ok(None) => Err(Failure::Task("solve/2 has no solution for this input".into())),
        Err(o) => Err(Failure::Task(o.label())),
    }
}

fn cmd_report(path: &Path, io: &mut Io) -> Result<i32, Failure> {
    let results = load_results(path).map_err(|e| Failure::Config(e.to_string()))?;
    let summary = Summary::new(&results, recorded_max_timestamp(path).unwrap_or(0));
    write!(io.stdout, "{}", summary.render()).map_err(write_err)?;
    Ok(0)
}

fn cmd_debug(
    path: &Path,
    task: Option<&Path>,
    pair: Option<usize>,
    goal: Option<&str>,
    max_questions: usize,
    limits: &LimitOpts,
    io: &mut Io,
) -> Result<i32, Failure> {
    let program = load_program(path)?;
    let limits = limits.engine();
    let goal = match (goal, task) {
        (Some(g), _) => parse_query(g).map_err(|e| Failure::Task(format!("goal: {e}")))?.goal,
        (None, Some(t)) => {
            let task = load_task(t).map_err(|e| Failure::Task(e.to_string()))?;
            let i = match pair {
                Some(p) if p >= 1 && p <= task.train.len() => p - 1,
                Some(p) => return Err(Failure::Config(format!("--pair {p} is out of range 1..={}", task.train.len()))),
                None => task
                    .train
                    .iter()
                    .position(|p| !matches!(run_on(&program, &p.input, &limits), Ok(Some(ref g)) if *g == p.output))
                    .ok_or_else(|| Failure::Task("the program solves every training pair".into()))?,
            };
            writeln!(io.stdout, "training pair {}", i + 1).map_err(write_err)?;
            solve_query(&task.train[i].input).0
        }
        (None, None) => return Err(Failure::Config("debug needs --goal or --task".into())),
    };
    let tree = match solve_traced(&program, &goal, &limits) {
        Ok(TraceOutcome::Proved { tree, .. }) => tree,
        Ok(TraceOutcome::Failed { witness }) => {
            write!(io.stdout, "the goal fails; failure witness:\n{}", render_trace(&witness, &TraceRenderOptions::default()))
                .map_err(write_err)?;
            return Ok(0);
        }
        Err(e) => return Err(Failure::Task(format!("engine: {}", e.error))),
    };
    let mut oracle = InteractiveOracle::new(&mut *io.stdin, &mut *io.stdout);
    match debug_session(&program, &tree, &mut oracle, max_questions) {
        Ok(SessionOutcome::RootValid | SessionOutcome::Found(_)) => Ok(0),
        Err(OracleError::SessionAborted) => Err(Failure::Task("session aborted".into())),
        Err(e) => Err(Failure::Task(e.to_string())),
    }
}
