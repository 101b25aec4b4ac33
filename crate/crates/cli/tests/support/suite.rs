//! A synthetic task suite with canned model replies and a known outcome per
//! task. Every task maps a 1x1 grid to itself plus a task constant.

#![allow(dead_code)]

use std::path::{Path, PathBuf};

use serde_json::{json, Map, Value};

/// Task id and the iteration at which it is first solved, if ever.
pub const DESIGN: &[(&str, Option<u32>)] = &[
    ("t01", Some(1)),  // every run right away
    ("t02", Some(3)),  // every run, third sample
    ("t03", None),     // one training pair, no test answer
    ("t04", None),     // evaluation errors
    ("t05", Some(5)),  // only run 3, fifth sample
    ("t06", Some(11)), // only run 7, last sample
    ("t07", None),     // overfits the training pairs in two ways
    ("t08", Some(1)),  // the majority overfits, the second slot is right
    ("t09", None),     // six runs never parse, the rest are wrong
    ("t10", Some(1)),  // a failed request first
];

fn constant(id: &str) -> i64 {
    1 + id[1..].parse::<i64>().unwrap() % 2
}

fn fenced(src: String) -> Value {
    Value::String(format!("Here is the program.\n\n```prolog\n{src}\n```\n"))
}

fn correct(c: i64) -> Value {
    fenced(format!("solve([[X]], [[Y]]) :- Y is X + {c}."))
}

fn identity() -> Value {
    fenced("solve(X, X).".into())
}

fn first_pair(c: i64) -> Value {
    fenced(format!("solve([[1]], [[Y]]) :- Y is 1 + {c}."))
}

fn two_pairs(c: i64) -> Value {
    fenced(format!("solve([[X]], [[Y]]) :- X < 4, Y is X + {c}."))
}

fn lookup(c: i64, fallback: i64) -> Value {
    fenced(format!(
        "solve([[1]], [[{}]]).\nsolve([[3]], [[{}]]).\nsolve([[5]], [[{}]]).\nsolve(_, [[{fallback}]]).",
        1 + c,
        3 + c,
        5 + c
    ))
}

fn erroring() -> Value {
    fenced("solve([[X]], [[Y]]) :- Y is X + foo.".into())
}

fn unparseable() -> Value {
    fenced("solve(X, :- .".into())
}

fn sequences(id: &str) -> Vec<(String, Vec<Value>)> {
    let c = constant(id);
    let all = |v: Vec<Value>| vec![(format!("{id}:*"), v)];
    let seed = |s: u64, v: Vec<Value>| (format!("{id}:{s}"), v);
    match id {
        "t01" => all(vec![correct(c)]),
        "t02" => all(vec![identity(), first_pair(c), correct(c)]),
        "t03" => all(vec![first_pair(c)]),
        "t04" => all(vec![erroring()]),
        "t05" => {
            let mut v = all(vec![identity(), first_pair(c)]);
            v.push(seed(3, vec![identity(), identity(), first_pair(c), two_pairs(c), correct(c)]));
            v
        }
        "t06" => {
            let mut v = all(vec![two_pairs(c)]);
            let mut late = vec![first_pair(c); 10];
            late.push(correct(c));
            v.push(seed(7, late));
            v
        }
        "t07" => {
            let mut v = all(vec![lookup(c, 0)]);
            v.extend((0..3).map(|s| seed(s, vec![lookup(c, 5)])));
            v
        }
        "t08" => {
            let mut v = all(vec![lookup(c, 0)]);
            v.extend((5..8).map(|s| seed(s, vec![correct(c)])));
            v
        }
        "t09" => {
            let mut v = all(vec![identity()]);
            v.extend((0..6).map(|s| seed(s, vec![unparseable()])));
            v
        }
        "t10" => all(vec![json!({"error": "fatal"}), correct(c)]),
        _ => panic!("unknown task {id}"),
    }
}

fn task_json(id: &str) -> Value {
    let c = constant(id);
    let pair = |x: i64| json!({"input": [[x]], "output": [[x + c]]});
    json!({"train": [pair(1), pair(3), pair(5)], "test": [pair(7)]})
}

/// Writes the named tasks to `root/tasks` and their replies to
/// `root/script.json`.
pub fn write_suite(root: &Path, ids: &[&str]) -> (PathBuf, PathBuf) {
    let tasks = root.join("tasks");
    std::fs::create_dir_all(&tasks).unwrap();
    let mut seqs = Map::new();
    for id in ids {
        std::fs::write(tasks.join(format!("{id}.json")), task_json(id).to_string()).unwrap();
        for (k, v) in sequences(id) {
            seqs.insert(k, Value::Array(v));
        }
    }
    let script = root.join("script.json");
    std::fs::write(&script, serde_json::to_string_pretty(&json!({ "sequences": seqs })).unwrap()).unwrap();
    (tasks, script)
}

pub fn designed(ids: &[&str]) -> Vec<(&'static str, Option<u32>)> {
    DESIGN.iter().filter(|(id, _)| ids.contains(id)).copied().collect()
}

/// Runs the CLI in-process and returns (exit code, stdout, stderr).
pub fn cli(args: &[&str], stdin: &str) -> (i32, String, String) {
    let mut input = stdin.as_bytes();
    let (mut out, mut err) = (Vec::new(), Vec::new());
    let mut argv = vec!["abpr"];
    argv.extend_from_slice(args);
    let code = abpr_cli::run_cli(argv, &mut abpr_cli::Io { stdin: &mut input, stdout: &mut out, stderr: &mut err });
    (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
}

pub fn mock_run(tasks: &Path, script: &Path, out: &Path, extra: &[&str]) -> (i32, String, String) {
    let mut args = vec![
        "run",
        "--tasks",
        tasks.to_str().unwrap(),
        "--mode",
        "mock",
        "--mock-script",
        script.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ];
    args.extend_from_slice(extra);
    cli(&args, "")
}

/// JSON lines with wall-clock fields removed.
pub fn untimed(path: &Path) -> Vec<Value> {
    std::fs::read_to_string(path)
        .unwrap()
        .lines()
        .map(|l| {
            let mut v: Value = serde_json::from_str(l).unwrap();
            if let Some(o) = v.as_object_mut() {
                o.remove("wall_ms");
                o.remove("elapsed_ms");
            }
            v
        })
        .collect()
}

/// Checks the curve file against the results and the iteration log:
/// non-decreasing, ending at the solved count, and every solve time backed
/// by a logged sample of the selected program.
pub fn check_curve(out: &Path, total: usize) -> Result<Vec<(u32, usize)>, String> {
    let results = untimed(&out.join("results.jsonl"));
    let log = untimed(&out.join("iterations.jsonl"));
    let mut times = Vec::new();
    for r in &results {
        if r["pass_at_2"] != json!(true) {
            continue;
        }
        let id = r["task_id"].as_str().unwrap();
        let t = r["solved_iteration"].as_u64().ok_or(format!("{id}: solved without a time"))?;
        let backed = r["selected"].as_array().unwrap().iter().any(|s| {
            s["correct"] == json!(true)
                && s["timestamp"].as_u64() == Some(t)
                && log.iter().any(|l| {
                    l["task_id"] == json!(id)
                        && l["run"] == s["run"]
                        && l["t"].as_u64() == Some(t)
                        && l["source_digest"] == s["source_digest"]
                })
        });
        if !backed {
            return Err(format!("{id}: solve time {t} has no matching log line"));
        }
        times.push(t as u32);
    }
    let csv = std::fs::read_to_string(out.join("curve.csv")).unwrap();
    let mut lines = csv.lines();
    if lines.next() != Some("iteration,cumulative_solved,rate") {
        return Err("bad curve header".into());
    }
    let mut curve = Vec::new();
    let mut last = 0;
    for line in lines {
        let f: Vec<&str> = line.split(',').collect();
        let (i, n): (u32, usize) = (f[0].parse().unwrap(), f[1].parse().unwrap());
        let rate: f64 = f[2].parse().unwrap();
        if n < last {
            return Err(format!("curve decreases at iteration {i}"));
        }
        let expect = times.iter().filter(|&&t| t <= i).count();
        if n != expect {
            return Err(format!("iteration {i}: curve says {n}, logs say {expect}"));
        }
        if (rate - n as f64 / total as f64).abs() > 1e-6 {
            return Err(format!("iteration {i}: rate {rate}"));
        }
        last = n;
        curve.push((i, n));
    }
    if last != times.len() {
        return Err(format!("curve ends at {last}, {} tasks solved", times.len()));
    }
    Ok(curve)
}
