use abpr_core::{load_task, TaskRecord};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

fn random_grid(rng: &mut ChaCha8Rng) -> Value {
    let (h, w) = (rng.random_range(1..8), rng.random_range(1..8));
    Value::from((0..h).map(|_| (0..w).map(|_| rng.random_range(0..10u8)).collect::<Vec<_>>()).collect::<Vec<_>>())
}

#[test]
fn twenty_random_tasks_round_trip() {
    let mut rng = ChaCha8Rng::seed_from_u64(20);
    let dir = tempfile::tempdir().unwrap();
    for i in 0..20 {
        let train: Vec<Value> =
            (0..rng.random_range(2..6)).map(|_| json!({"output": random_grid(&mut rng), "input": random_grid(&mut rng)})).collect();
        let hidden = rng.random_bool(0.3);
        let test: Vec<Value> = (0..rng.random_range(1..4))
            .map(|_| if hidden { json!({"input": random_grid(&mut rng)}) } else { json!({"input": random_grid(&mut rng), "output": random_grid(&mut rng)}) })
            .collect();
        let original = json!({"test": test, "train": train});
        let path = dir.path().join(format!("task{i:02}.json"));
        std::fs::write(&path, serde_json::to_string_pretty(&original).unwrap()).unwrap();
        let task = load_task(&path).unwrap();
        assert_eq!(task.id, format!("task{i:02}"));
        assert!(task.warnings().is_empty());
        assert_eq!(task.has_test_outputs(), !hidden);
        let again: Value = serde_json::from_str(&task.to_json()).unwrap();
        assert_eq!(again, original);
        assert_eq!(TaskRecord::from_json(&task.id, &task.to_json()).unwrap(), task);
    }
}
