//! Suite runs: load tasks, run the ensemble on each, persist per-task
//! records, per-run iteration logs and the cumulative solve curve.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use abpr_grid::Grid;
use serde::{Deserialize, Serialize};

use crate::ensemble::{pass_at_2, run_ensemble, EnsembleConfig, EnsembleResult, RefinerFactory};
use crate::refine::{IterationRecord, RunConfig};
use crate::task::{load_task, TaskError, TaskRecord};

pub const RESULTS_FILE: &str = "results.jsonl";
pub const LOG_FILE: &str = "iterations.jsonl";
pub const CURVE_FILE: &str = "curve.csv";
pub const CONFIG_FILE: &str = "config.json";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Live,
    #[default]
    Mock,
    Interactive,
}

/// Everything needed to repeat a suite run.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct SuiteConfig {
    pub mode: Mode,
    pub run: RunConfig,
    pub ensemble: EnsembleConfig,
    /// Gateway-wide cap on concurrent model requests.
    pub in_flight: usize,
    pub mock_script: Option<String>,
    /// Input files and their SHA-256 digests.
    pub inputs: BTreeMap<String, String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunSummary {
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub final_coverage: Option<usize>,
    pub solved_at: Option<u32>,
    pub iterations: usize,
    pub source_digest: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SelectedSummary {
    pub run: usize,
    pub seed: u64,
    pub group_size: usize,
    pub coverage: usize,
    /// When the program was sampled within its run.
    pub timestamp: u32,
    pub source_digest: String,
    pub source: String,
    /// Test predictions; absent when some test input has no answer.
    pub predictions: Option<Vec<Grid>>,
    pub correct: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroupSummary {
    pub members: Vec<usize>,
    pub best_coverage: usize,
    pub executes: bool,
}

/// One line of `results.jsonl`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaskResult {
    pub task_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    /// Absent for tasks without test outputs.
    pub pass_at_2: Option<bool>,
    /// Earliest sample timestamp among the correct selected programs.
    pub solved_iteration: Option<u32>,
    pub runs: Vec<RunSummary>,
    pub groups: Vec<GroupSummary>,
    pub selected: Vec<SelectedSummary>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
    pub wall_ms: u64,
}

impl TaskResult {
    pub fn failed(task_id: &str, error: String, wall_ms: u64) -> TaskResult {
        TaskResult {
            task_id: task_id.to_string(),
            error: Some(error),
            pass_at_2: None,
            solved_iteration: None,
            runs: Vec::new(),
            groups: Vec::new(),
            selected: Vec::new(),
            warnings: Vec::new(),
            wall_ms,
        }
    }

    pub fn solved(&self) -> bool {
        self.pass_at_2 == Some(true)
    }

    fn from_ensemble(task: &TaskRecord, config: &SuiteConfig, ens: &EnsembleResult, wall_ms: u64) -> TaskResult {
        let runs = ens
            .runs
            .iter()
            .enumerate()
            .map(|(i, r)| match r {
                Ok(r) => RunSummary {
                    seed: r.seed,
                    error: None,
                    final_coverage: Some(r.hypothesis.coverage),
                    solved_at: r.solved_at,
                    iterations: r.log.len(),
                    source_digest: Some(r.hypothesis.digest.clone()),
                },
                Err(e) => RunSummary {
                    seed: config.ensemble.seed(i),
                    error: Some(e.to_string()),
                    final_coverage: None,
                    solved_at: None,
                    iterations: 0,
                    source_digest: None,
                },
            })
            .collect();
        let groups = crate::ensemble::group_candidates(&ens.candidates, config.ensemble.rank)
            .into_iter()
            .map(|g| GroupSummary { members: g.members, best_coverage: g.best_coverage, executes: g.signature.is_some() })
            .collect();
        let selected: Vec<SelectedSummary> = ens
            .selected
            .iter()
            .map(|s| SelectedSummary {
                run: s.group.representative,
                seed: config.ensemble.seed(s.group.representative),
                group_size: s.group.size(),
                coverage: s.hypothesis.coverage,
                timestamp: s.hypothesis.timestamp,
                source_digest: s.hypothesis.digest.clone(),
                source: s.hypothesis.source.clone(),
                predictions: s.group.signature.clone(),
                correct: pass_at_2(task, std::slice::from_ref(&s.group)),
            })
            .collect();
        let groups_selected: Vec<_> = ens.selected.iter().map(|s| s.group.clone()).collect();
        let pass = pass_at_2(task, &groups_selected);
        let solved_iteration = selected.iter().filter(|s| s.correct == Some(true)).map(|s| s.timestamp).min();
        TaskResult {
            task_id: task.id.clone(),
            error: None,
            pass_at_2: pass,
            solved_iteration,
            runs,
            groups,
            selected,
            warnings: task.warnings(),
            wall_ms,
        }
    }
}

/// Every `*.json` file in `dir`, sorted by name. Files that fail to load
/// are returned separately.
pub fn load_suite(dir: &Path) -> std::io::Result<(Vec<TaskRecord>, Vec<TaskError>)> {
    let mut paths: Vec<PathBuf> = std::fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    paths.sort();
    let mut tasks = Vec::new();
    let mut errors = Vec::new();
    for p in paths {
        match load_task(&p) {
            Ok(t) => tasks.push(t),
            Err(e) => errors.push(e),
        }
    }
    Ok((tasks, errors))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub iteration: u32,
    pub solved: usize,
    pub rate: f64,
}

/// Aggregates over a set of task results.
#[derive(Debug, Clone, PartialEq)]
pub struct Summary {
    pub tasks: usize,
    /// Tasks with test outputs and no error, i.e. the denominator.
    pub evaluated: usize,
    pub solved: usize,
    pub errors: usize,
    pub curve: Vec<CurvePoint>,
}

impl Summary {
    pub fn new(results: &[TaskResult], max_timestamp: u32) -> Summary {
        let evaluated = results.iter().filter(|r| r.pass_at_2.is_some()).count() + results.iter().filter(|r| r.error.is_some()).count();
        let solved = results.iter().filter(|r| r.solved()).count();
        let last = results.iter().filter_map(|r| r.solved_iteration).max().unwrap_or(0).max(max_timestamp);
        let curve = (1..=last)
            .map(|t| {
                let n = results.iter().filter(|r| r.solved() && r.solved_iteration.is_some_and(|s| s <= t)).count();
                CurvePoint { iteration: t, solved: n, rate: ratio(n, evaluated) }
            })
            .collect();
        Summary { tasks: results.len(), evaluated, solved, errors: results.iter().filter(|r| r.error.is_some()).count(), curve }
    }

    pub fn rate(&self) -> f64 {
        ratio(self.solved, self.evaluated)
    }

    pub fn curve_csv(&self) -> String {
        let mut s = String::from("iteration,cumulative_solved,rate\n");
        for p in &self.curve {
            s.push_str(&format!("{},{},{:.6}\n", p.iteration, p.solved, p.rate));
        }
        s
    }

    pub fn render(&self) -> String {
        let mut s = format!("tasks: {}\n", self.tasks);
        if self.errors > 0 {
            s.push_str(&format!("task errors: {}\n", self.errors));
        }
        if self.evaluated == 0 {
            s.push_str("pass@2: n/a (no test outputs)\n");
        } else {
            s.push_str(&format!("pass@2: {:.2}% ({}/{})\n", 100.0 * self.rate(), self.solved, self.evaluated));
        }
        s
    }
}

fn ratio(n: usize, d: usize) -> f64 {
    if d == 0 {
        0.0
    } else {
        n as f64 / d as f64
    }
}

#[derive(Serialize)]
struct LogLine<'a> {
    task_id: &'a str,
    run: usize,
    #[serde(flatten)]
    record: &'a IterationRecord,
}

/// Appends records to the output directory. All writes go through one
/// instance so lines never interleave.
pub struct ResultWriter {
    dir: PathBuf,
    results: BufWriter<File>,
    log: BufWriter<File>,
}

impl ResultWriter {
    pub fn create(dir: &Path, config: &SuiteConfig) -> std::io::Result<ResultWriter> {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join(CONFIG_FILE), serde_json::to_string_pretty(config)? + "\n")?;
        Ok(ResultWriter {
            dir: dir.to_path_buf(),
            results: BufWriter::new(File::create(dir.join(RESULTS_FILE))?),
            log: BufWriter::new(File::create(dir.join(LOG_FILE))?),
        })
    }

    pub fn task(&mut self, result: &TaskResult, ens: Option<&EnsembleResult>) -> std::io::Result<()> {
        if let Some(ens) = ens {
            for (run, r) in ens.runs.iter().enumerate() {
                for record in r.iter().flat_map(|r| &r.log) {
                    serde_json::to_writer(&mut self.log, &LogLine { task_id: &result.task_id, run, record })?;
                    self.log.write_all(b"\n")?;
                }
            }
            self.log.flush()?;
        }
        serde_json::to_writer(&mut self.results, result)?;
        self.results.write_all(b"\n")?;
        self.results.flush()
    }

    pub fn finish(mut self, summary: &Summary) -> std::io::Result<()> {
        self.results.flush()?;
        self.log.flush()?;
        std::fs::write(self.dir.join(CURVE_FILE), summary.curve_csv())
    }
}

/// Runs the ensemble on each task in order and persists the results.
/// `progress` sees each task result as it completes.
pub fn run_suite(
    tasks: &[TaskRecord],
    factory: &RefinerFactory,
    config: &SuiteConfig,
    out: &Path,
    progress: &mut dyn FnMut(&TaskResult),
) -> std::io::Result<(Vec<TaskResult>, Summary)> {
    let mut writer = ResultWriter::create(out, config)?;
    let mut results = Vec::new();
    for task in tasks {
        let started = Instant::now();
        let outcome = run_ensemble(task, factory, &config.run, &config.ensemble);
        let wall_ms = started.elapsed().as_millis() as u64;
        let result = match &outcome {
            Ok(ens) => TaskResult::from_ensemble(task, config, ens, wall_ms),
            Err(e) => TaskResult::failed(&task.id, e.to_string(), wall_ms),
        };
        writer.task(&result, outcome.as_ref().ok())?;
        progress(&result);
        results.push(result);
    }
    let summary = Summary::new(&results, config.run.max_iterations + 1);
    writer.finish(&summary)?;
    Ok((results, summary))
}

#[derive(Debug, thiserror::Error)]
pub enum ReportError {
    #[error("cannot read {0}: {1}")]
    Io(String, std::io::Error),
    #[error("{0} line {1}: {2}")]
    Format(String, usize, serde_json::Error),
}

/// Reads `results.jsonl`, or the one inside a directory.
pub fn load_results(path: &Path) -> Result<Vec<TaskResult>, ReportError> {
    let path = if path.is_dir() { path.join(RESULTS_FILE) } else { path.to_path_buf() };
    let shown = path.display().to_string();
    let file = File::open(&path).map_err(|e| ReportError::Io(shown.clone(), e))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| ReportError::Io(shown.clone(), e))?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| ReportError::Format(shown.clone(), i + 1, e))?);
    }
    Ok(out)
}

/// Iteration limit recorded in the config snapshot next to a results file.
pub fn recorded_max_timestamp(results_path: &Path) -> Option<u32> {
    let dir = if results_path.is_dir() { results_path } else { results_path.parent()? };
    let text = std::fs::read_to_string(dir.join(CONFIG_FILE)).ok()?;
    let config: SuiteConfig = serde_json::from_str(&text).ok()?;
    Some(config.run.max_iterations + 1)
}
