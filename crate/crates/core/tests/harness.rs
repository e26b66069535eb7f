use std::path::{Path, PathBuf};

use cbwk_core::acceptance::reference_instance;
use cbwk_core::harness::{self, ExperimentConfig, InstanceFile, RunOptions};

fn configs_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

/// Two seeds at two horizons, written next to a copy of the reference instance.
fn small_config(dir: &Path) -> PathBuf {
    std::fs::copy(
        configs_dir().join("reference_instance.json"),
        dir.join("instance.json"),
    )
    .unwrap();
    let path = dir.join("config.json");
    std::fs::write(
        &path,
        r#"{
  "instance": "instance.json",
  "algorithm": "cbwk",
  "horizons": [8192, 16384],
  "budget": { "ratio": 0.5 },
  "delta": 0.05,
  "seeds": [3, 4],
  "output_dir": "out"
}
"#,
    )
    .unwrap();
    path
}

fn run(config: &Path, out: &Path) -> harness::ExperimentOutput {
    let loaded = ExperimentConfig::load(config).unwrap();
    let opts = RunOptions {
        jobs: 2,
        ..RunOptions::default()
    };
    harness::run_experiment(&loaded, out, &opts).unwrap()
}

fn files_with(dir: &Path, prefix: &str) -> Vec<PathBuf> {
    let mut v: Vec<PathBuf> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.file_name().unwrap().to_str().unwrap().starts_with(prefix))
        .collect();
    v.sort();
    v
}

#[test]
fn two_seeds_two_horizons_give_four_traces_and_one_summary() {
    let dir = tempfile::tempdir().unwrap();
    let config = small_config(dir.path());
    let out = dir.path().join("out");
    run(&config, &out);
    assert_eq!(files_with(&out, "trace_").len(), 4);
    assert_eq!(files_with(&out, "summary").len(), 1);
}

#[test]
fn rerun_gives_identical_summary() {
    let dir = tempfile::tempdir().unwrap();
    let config = small_config(dir.path());
    run(&config, &dir.path().join("a"));
    run(&config, &dir.path().join("b"));
    let a = std::fs::read(dir.path().join("a/summary.csv")).unwrap();
    let b = std::fs::read(dir.path().join("b/summary.csv")).unwrap();
    assert_eq!(a, b);
    assert_eq!(
        harness::summarize(&dir.path().join("a")).unwrap(),
        harness::read_summary(&dir.path().join("a/summary.csv")).unwrap()
    );
}

/// Reads a trace with plain string handling: the reward column summed, the
/// terminal `opt` and `regret`, and the horizon.
fn parse_trace(path: &Path) -> (usize, f64, f64, f64) {
    let text = std::fs::read_to_string(path).unwrap();
    let mut header: Vec<String> = Vec::new();
    let mut reward_sum = 0.0;
    let mut horizon = 0;
    let (mut opt, mut regret) = (f64::NAN, f64::NAN);
    let field = |line: &str, key: &str| -> String {
        line.split_whitespace()
            .find_map(|kv| kv.strip_prefix(&format!("{key}=")).map(str::to_string))
            .unwrap()
    };
    for line in text.lines() {
        if line.starts_with("# run ") {
            horizon = field(line, "horizon").parse().unwrap();
        } else if line.starts_with("# terminal ") {
            opt = field(line, "opt").parse().unwrap();
            regret = field(line, "regret").parse().unwrap();
        } else if line.starts_with('#') {
            continue;
        } else if header.is_empty() {
            header = line.split(',').map(str::to_string).collect();
        } else {
            let col = header.iter().position(|h| h == "reward").unwrap();
            reward_sum += line.split(',').nth(col).unwrap().parse::<f64>().unwrap();
        }
    }
    (horizon, reward_sum, opt, regret)
}

#[test]
fn summary_regret_matches_recomputation_from_traces() {
    let dir = tempfile::tempdir().unwrap();
    let config = small_config(dir.path());
    let out = dir.path().join("out");
    let result = run(&config, &out);
    let mut per_horizon: std::collections::BTreeMap<usize, Vec<f64>> = Default::default();
    for path in files_with(&out, "trace_") {
        let (horizon, rewards, opt, regret) = parse_trace(&path);
        assert!(
            (regret - (opt - rewards)).abs() <= 1e-9,
            "{}",
            path.display()
        );
        per_horizon.entry(horizon).or_default().push(opt - rewards);
    }
    // summary.csv read as text, mean_regret column by header name.
    let text = std::fs::read_to_string(out.join("summary.csv")).unwrap();
    let mut lines = text.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let h_col = header.iter().position(|h| *h == "horizon").unwrap();
    let r_col = header.iter().position(|h| *h == "mean_regret").unwrap();
    let mut rows = 0;
    for line in lines {
        let cells: Vec<&str> = line.split(',').collect();
        let horizon: usize = cells[h_col].parse().unwrap();
        let mean: f64 = cells[r_col].parse().unwrap();
        let regrets = &per_horizon[&horizon];
        let expected = regrets.iter().sum::<f64>() / regrets.len() as f64;
        assert!(
            (mean - expected).abs() <= 1e-9 * expected.abs().max(1.0),
            "{mean} vs {expected}"
        );
        rows += 1;
    }
    assert_eq!(rows, 2);
    assert_eq!(result.summary.len(), 2);
}

#[test]
fn summarize_rebuilds_the_written_summary() {
    let dir = tempfile::tempdir().unwrap();
    let config = small_config(dir.path());
    let out = dir.path().join("out");
    let result = run(&config, &out);
    assert_eq!(harness::summarize(&out).unwrap(), result.summary);
}

#[test]
fn refused_runs_leave_markers() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::copy(
        configs_dir().join("reference_instance.json"),
        dir.path().join("instance.json"),
    )
    .unwrap();
    let path = dir.path().join("config.json");
    std::fs::write(
        &path,
        r#"{"instance": "instance.json", "algorithm": "cbwk", "horizons": [2048],
            "budget": {"ratio": 0.125}, "delta": 0.05, "seeds": [1, 2], "output_dir": "out"}"#,
    )
    .unwrap();
    let out = dir.path().join("out");
    let result = run(&path, &out);
    assert_eq!(files_with(&out, "refused_").len(), 2);
    assert_eq!(files_with(&out, "trace_").len(), 0);
    assert_eq!(result.summary[0].refused, 2);
    assert_eq!(harness::summarize(&out).unwrap(), result.summary);
}

fn load_error(text: &str) -> String {
    let dir = tempfile::tempdir().unwrap();
    std::fs::copy(
        configs_dir().join("reference_instance.json"),
        dir.path().join("instance.json"),
    )
    .unwrap();
    let path = dir.path().join("c.json");
    std::fs::write(&path, text).unwrap();
    ExperimentConfig::load(&path).unwrap_err().to_string()
}

#[test]
fn config_errors_name_the_line() {
    let base = |extra: &str| {
        format!(
            "{{\n  \"instance\": \"instance.json\",\n  \"algorithm\": \"cbwk\",\n  \"horizons\": [1024, 4096],\n  \"budget\": {{ \"ratio\": 0.5 }},\n  \"delta\": 0.05,\n  \"seeds\": [1],\n{extra}  \"output_dir\": \"out\"\n}}\n"
        )
    };
    let e = load_error(&base("  \"bogus\": 1,\n"));
    assert!(e.contains("c.json:8:"), "{e}");
    let e = load_error(&base("").replace("[1024, 4096]", "[4096, 1024]"));
    assert!(e.contains("c.json:4:") && e.contains("ascending"), "{e}");
    let e = load_error(&base("").replace("0.05", "1.5"));
    assert!(e.contains("c.json:6:"), "{e}");
    let e = load_error(&base("").replace("instance.json", "missing.json"));
    assert!(
        e.contains("c.json:2:") && e.contains("does not exist"),
        "{e}"
    );
    let e = load_error(&base("").replace("\"cbwk\"", "\"cbwr\""));
    assert!(e.contains("objective"), "{e}");
    let e = load_error(&base("").replace("\"cbwk\"", "\"greedy\""));
    assert!(e.contains("c.json:3:"), "{e}");
}

#[test]
fn shipped_configs_load() {
    for name in [
        "cbwk_reference.json",
        "uniform_reference.json",
        "static_lp_reference.json",
        "cbwr_reference.json",
        "quick.json",
    ] {
        ExperimentConfig::load(&configs_dir().join(name)).unwrap_or_else(|e| panic!("{name}: {e}"));
    }
}

#[test]
fn shipped_instance_is_the_reference_instance() {
    let file = InstanceFile::load(&configs_dir().join("reference_instance.json")).unwrap();
    let inst = file.build().unwrap();
    let reference = reference_instance();
    assert_eq!(inst.environment, reference.environment);
    assert_eq!(inst.policies, reference.policies);
}
