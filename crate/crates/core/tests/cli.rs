use std::collections::BTreeMap;
use std::path::Path;
use std::process::{Command, Output};

use inferplan::bench::{generate_random_dag, sized_chain, GraphGenerator};
use inferplan::executor::run_graph;
use inferplan::memplan::plan_naive;
use inferplan::{DenseTensor, GraphModel, TensorId};
use serde_json::Value;

fn inferplan(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_inferplan")).args(args).output().expect("binary runs")
}

fn stdout_json(out: &Output) -> Value {
    assert_eq!(out.status.code(), Some(0), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

fn write_graph(dir: &Path, name: &str, g: &GraphModel) -> String {
    let path = dir.join(name);
    std::fs::write(&path, g.to_json()).unwrap();
    path.to_str().unwrap().to_string()
}

#[test]
fn inspect_summarizes_chain() {
    let dir = tempfile::tempdir().unwrap();
    let g = write_graph(dir.path(), "chain.json", &sized_chain(&[10, 20, 15]));
    let v = stdout_json(&inferplan(&["inspect", &g]));
    assert_eq!(v["ops"], 4);
    assert_eq!(v["tensors"], 5);
    assert_eq!(v["intermediates"], 3);
    assert_eq!(v["peak_live_bytes"], 35);
}

#[test]
fn greedy_plan_of_chain_totals_35() {
    let dir = tempfile::tempdir().unwrap();
    let g = write_graph(dir.path(), "chain.json", &sized_chain(&[10, 20, 15]));
    let v = stdout_json(&inferplan(&["plan-mem", "--strategy", "greedy", &g]));
    assert_eq!(v["total_bytes"], 35);
    assert_eq!(v["strategy"], "greedy");
    let v = stdout_json(&inferplan(&["plan-mem", "--compare", &g]));
    assert_eq!((v["naive"].as_u64(), v["greedy"].as_u64(), v["mcfp"].as_u64()), (Some(45), Some(35), Some(35)));
}

#[test]
fn unknown_strategy_is_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let g = write_graph(dir.path(), "chain.json", &sized_chain(&[10, 20, 15]));
    let out = inferplan(&["plan-mem", "--strategy", "quantum", &g]);
    assert_eq!(out.status.code(), Some(2));
    assert!(out.stdout.is_empty());
}

#[test]
fn invalid_graph_reports_json_error() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.json");
    // Op 0 reads a tensor nobody produces.
    std::fs::write(
        &path,
        r#"{"tensors":[{"id":0,"shape":[1,2,2,1],"role":"graph_output"}],
            "ops":[{"id":0,"kind":"RELU","inputs":[7],"outputs":[0]}]}"#,
    )
    .unwrap();
    let out = inferplan(&["inspect", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    let err: Value = serde_json::from_slice(&out.stderr).expect("stderr is JSON");
    assert!(err["error"].is_string() && err["detail"].is_string());
}

#[test]
fn missing_file_is_domain_error() {
    let out = inferplan(&["inspect", "/nonexistent/graph.json"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn same_inputs_give_identical_stdout() {
    let dir = tempfile::tempdir().unwrap();
    let g = write_graph(dir.path(), "g.json", &generate_random_dag(&GraphGenerator { seed: 11, ..Default::default() }));
    for args in [
        vec!["plan-mem", "--strategy", "mincostflow", g.as_str()],
        vec!["optimize", "--log", g.as_str()],
        vec!["partition", g.as_str()],
        vec!["tune-wg", "--seed", "4", "--noise", "0.1"],
        vec!["bench", "--seeds", "0..5"],
    ] {
        let a = inferplan(&args);
        let b = inferplan(&args);
        assert_eq!(a.status.code(), Some(0), "{args:?}");
        assert_eq!(a.stdout, b.stdout, "{args:?}");
    }
}

#[test]
fn files_written_only_with_out() {
    let dir = tempfile::tempdir().unwrap();
    let g = write_graph(dir.path(), "g.json", &generate_random_dag(&GraphGenerator { seed: 3, ..Default::default() }));
    stdout_json(&inferplan(&["optimize", &g]));
    stdout_json(&inferplan(&["bench", "--seeds", "0..2"]));
    assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 1);

    let out = dir.path().join("opt.json");
    let printed = inferplan(&["optimize", &g, "--out", out.to_str().unwrap()]);
    stdout_json(&printed);
    let written = GraphModel::from_json(&std::fs::read_to_string(&out).unwrap()).unwrap();
    let from_stdout = GraphModel::from_json(std::str::from_utf8(&printed.stdout).unwrap()).unwrap();
    assert_eq!(written, from_stdout);
}

#[test]
fn pretty_flag_only_changes_whitespace() {
    let compact = inferplan(&["pack", "--shape", "8,6,12", "--dims-only"]);
    let pretty = inferplan(&["--pretty", "pack", "--shape", "8,6,12", "--dims-only"]);
    assert_eq!(stdout_json(&compact), stdout_json(&pretty));
    assert!(String::from_utf8_lossy(&pretty.stdout).contains('\n'));
    assert_eq!(String::from_utf8_lossy(&compact.stdout).trim().lines().count(), 1);
}

#[test]
fn run_matches_library_executor() {
    let dir = tempfile::tempdir().unwrap();
    let graph = generate_random_dag(&GraphGenerator { seed: 21, ..Default::default() });
    let g = write_graph(dir.path(), "g.json", &graph);
    let inputs: BTreeMap<TensorId, DenseTensor> = graph
        .inputs()
        .map(|t| {
            let data = (0..t.shape.element_count()).map(|i| (i % 7) as f32 - 3.0).collect();
            (t.id, DenseTensor::new(t.shape, data).unwrap())
        })
        .collect();
    let inputs_path = dir.path().join("inputs.json");
    std::fs::write(&inputs_path, serde_json::to_string(&inputs).unwrap()).unwrap();
    let expected = run_graph(&graph, &plan_naive(&graph), &inputs).unwrap();
    for strategy in ["naive", "greedy", "mincostflow"] {
        let out = inferplan(&[
            "run",
            "--graph",
            &g,
            "--inputs",
            inputs_path.to_str().unwrap(),
            "--plan",
            strategy,
            "--check-pads",
        ]);
        stdout_json(&out);
        let got: BTreeMap<TensorId, DenseTensor> = serde_json::from_slice(&out.stdout).unwrap();
        assert_eq!(got.len(), expected.len());
        assert!(got.iter().all(|(k, v)| v.bit_eq(&expected[k])), "{strategy}");
    }
}

#[test]
fn tune_and_cache_commands() {
    let v = stdout_json(&inferplan(&["tune-wg", "--gpu", "Adreno 630", "--op", "conv_2d"]));
    assert_eq!(v["config"], serde_json::json!({"x": 4, "y": 8, "z": 4}));
    let out = inferplan(&["tune-wg", "--gpu", "Adreno 999"]);
    assert_eq!(out.status.code(), Some(1));

    let v = stdout_json(&inferplan(&["tune-wg", "--exhaustive"]));
    assert_eq!(v["config"], serde_json::json!({"x": 4, "y": 8, "z": 4}));
    assert_eq!(v["points_measured"], 27);

    let v = stdout_json(&inferplan(&["simulate-cache", "--layout", "phwc4", "--shape", "8,8,8"]));
    assert_eq!(v["miss_rate"], 0.25);
    let out = inferplan(&["simulate-cache", "--line-bytes", "40", "--shape", "8,8,8"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn tune_from_csv_table() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("cost.csv");
    let mut text = String::from("x,y,z,latency_ms\n");
    for x in [2, 4, 8] {
        for y in [2, 4, 8] {
            for z in [2, 4, 8] {
                let cost = if (x, y, z) == (8, 2, 4) { 1.0 } else { 5.0 + x as f64 };
                text.push_str(&format!("{x},{y},{z},{cost}\n"));
            }
        }
    }
    std::fs::write(&path, text).unwrap();
    let v = stdout_json(&inferplan(&["tune-wg", "--cost", "csv", "--table", path.to_str().unwrap(), "--exhaustive"]));
    assert_eq!(v["config"], serde_json::json!({"x": 8, "y": 2, "z": 4}));
}
