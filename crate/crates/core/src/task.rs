//! ARC task files.

use std::path::Path;

use abpr_grid::{Grid, GridError};
use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrainPair {
    pub input: Grid,
    pub output: Grid,
}

/// A test pair. The output is absent for hidden evaluation sets.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TestPair {
    pub input: Grid,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<Grid>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TaskRecord {
    pub id: String,
    pub train: Vec<TrainPair>,
    pub test: Vec<TestPair>,
}

#[derive(Serialize)]
struct TaskFile<'a> {
    train: &'a [TrainPair],
    test: &'a [TestPair],
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TaskError {
    #[error("cannot read {path}: {detail}")]
    Io { path: String, detail: String },
    #[error("format error in {path}: {detail}")]
    Format { path: String, detail: String },
    #[error("grid invariant violated in {path} at {location}: cell ({row},{col}) holds {value}")]
    GridInvariant { path: String, location: String, row: usize, col: usize, value: i64 },
}

impl TaskRecord {
    /// Training pairs as (input, output) references.
    pub fn train_pairs(&self) -> Vec<(&Grid, &Grid)> {
        self.train.iter().map(|p| (&p.input, &p.output)).collect()
    }

    /// True when every test pair carries an expected output.
    pub fn has_test_outputs(&self) -> bool {
        !self.test.is_empty() && self.test.iter().all(|t| t.output.is_some())
    }

    /// Pair counts outside the usual 2–5 train / 1–3 test range.
    pub fn warnings(&self) -> Vec<String> {
        let mut w = Vec::new();
        if !(2..=5).contains(&self.train.len()) {
            w.push(format!("task {} has {} training pairs", self.id, self.train.len()));
        }
        if !(1..=3).contains(&self.test.len()) {
            w.push(format!("task {} has {} test pairs", self.id, self.test.len()));
        }
        w
    }

    /// The ARC JSON layout with keys in a fixed order.
    pub fn to_json(&self) -> String {
        serde_json::to_string(&TaskFile { train: &self.train, test: &self.test }).expect("grids serialize")
    }

    pub fn from_json(id: &str, text: &str) -> Result<TaskRecord, TaskError> {
        parse_task(id, id, text)
    }
}

pub fn load_task(path: impl AsRef<Path>) -> Result<TaskRecord, TaskError> {
    let path = path.as_ref();
    let shown = path.display().to_string();
    let text = std::fs::read_to_string(path).map_err(|e| TaskError::Io { path: shown.clone(), detail: e.to_string() })?;
    let id = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    parse_task(&id, &shown, &text)
}

fn parse_task(id: &str, path: &str, text: &str) -> Result<TaskRecord, TaskError> {
    let fmt = |detail: String| TaskError::Format { path: path.to_string(), detail };
    let root: Value = serde_json::from_str(text).map_err(|e| fmt(e.to_string()))?;
    let obj = root.as_object().ok_or_else(|| fmt("top level is not an object".into()))?;
    let section = |key: &str| -> Result<&Vec<Value>, TaskError> {
        obj.get(key).and_then(Value::as_array).ok_or_else(|| fmt(format!("missing array \"{key}\"")))
    };
    let mut train = Vec::new();
    for (i, pair) in section("train")?.iter().enumerate() {
        let input = grid_at(pair, "input", &format!("train[{i}].input"), path)?.ok_or_else(|| fmt(format!("train[{i}] has no input")))?;
        let output = grid_at(pair, "output", &format!("train[{i}].output"), path)?.ok_or_else(|| fmt(format!("train[{i}] has no output")))?;
        train.push(TrainPair { input, output });
    }
    let mut test = Vec::new();
    for (i, pair) in section("test")?.iter().enumerate() {
        let input = grid_at(pair, "input", &format!("test[{i}].input"), path)?.ok_or_else(|| fmt(format!("test[{i}] has no input")))?;
        let output = grid_at(pair, "output", &format!("test[{i}].output"), path)?;
        test.push(TestPair { input, output });
    }
    if train.is_empty() {
        return Err(fmt("no training pairs".into()));
    }
    Ok(TaskRecord { id: id.to_string(), train, test })
}

fn grid_at(pair: &Value, key: &str, location: &str, path: &str) -> Result<Option<Grid>, TaskError> {
    let fmt = |detail: String| TaskError::Format { path: path.to_string(), detail: format!("{location}: {detail}") };
    let Some(v) = pair.get(key) else { return Ok(None) };
    let rows = v.as_array().ok_or_else(|| fmt("grid is not an array".into()))?;
    let mut out: Vec<Vec<i64>> = Vec::with_capacity(rows.len());
    for row in rows {
        let row = row.as_array().ok_or_else(|| fmt("row is not an array".into()))?;
        let cells = row.iter().map(|c| c.as_i64().ok_or_else(|| fmt(format!("cell {c} is not an integer")))).collect::<Result<_, _>>()?;
        out.push(cells);
    }
    match Grid::from_rows(&out) {
        Ok(g) => Ok(Some(g)),
        Err(GridError::BadValue { row, col, value }) => {
            Err(TaskError::GridInvariant { path: path.to_string(), location: location.to_string(), row, col, value })
        }
        Err(e) => Err(fmt(e.to_string())),
    }
}
