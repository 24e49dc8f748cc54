use std::path::Path;
use std::process::{Command, Output};

fn liquar(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_liquar")).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn repo_config(rel: &str) -> String {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(rel).to_string_lossy().into_owned()
}

#[test]
fn solve_optimal_on_shipped_base_config() {
    let o = liquar(&["solve-optimal", "--config", &repo_config("base-6.1.toml")]);
    assert!(o.status.success(), "{o:?}");
    let s = stdout(&o);
    assert!(s.contains("mu*=8.18") && s.contains("p*=3.78"), "{s}");
}

#[test]
fn missing_config_exits_2_and_names_path() {
    let o = liquar(&["solve-optimal", "--config", "/no/such/file.toml"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("/no/such/file.toml"));
}

#[test]
fn malformed_config_names_key() {
    let dir = tempfile::tempdir().unwrap();
    let text = std::fs::read_to_string(repo_config("base-6.1-desk.toml")).unwrap().replace("alpha = 0.1", "alpha = 0.9");
    let path = dir.path().join("bad.toml");
    std::fs::write(&path, text).unwrap();
    let o = liquar(&["solve-optimal", "--config", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("schedule.alpha"));
}

#[test]
fn unknown_preset_lists_alternatives() {
    let o = liquar(&["solve-optimal", "--preset", "nope"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("base-6.1-desk"));
}

#[test]
fn run_liquar_writes_provenance_and_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let text = std::fs::read_to_string(repo_config("base-6.1-desk.toml")).unwrap().replace("iterations = 300", "iterations = 25");
    let cfg = dir.path().join("cfg.toml");
    std::fs::write(&cfg, text).unwrap();
    let mut outputs = Vec::new();
    for run in ["a", "b"] {
        let out = dir.path().join(run);
        let o = liquar(&["run-liquar", "--config", cfg.to_str().unwrap(), "--seed", "7", "--out", out.to_str().unwrap()]);
        assert!(o.status.success(), "{o:?}");
        for f in ["config.toml", "seeds.json", "cycles.csv", "iterations.csv", "regret.csv", "summary.json"] {
            assert!(out.join(f).exists(), "{f}");
        }
        outputs.push(std::fs::read(out.join("cycles.csv")).unwrap());
    }
    assert_eq!(outputs[0], outputs[1]);
    let cycles = String::from_utf8(outputs[0].clone()).unwrap();
    assert_eq!(cycles.lines().count(), 51);
    assert!(cycles.starts_with("k,l,mu,p,T_k,N_l,workload_integral"));
}

#[test]
fn run_pto_writes_ledger() {
    let dir = tempfile::tempdir().unwrap();
    let o = liquar(&[
        "run-pto",
        "--config",
        &repo_config("pto-6.3-light-desk.toml"),
        "--theta",
        "0.06",
        "--seed",
        "2",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{o:?}");
    let ledger = std::fs::read_to_string(dir.path().join("ledger.csv")).unwrap();
    assert!(ledger.starts_with("phase,t_start,t_end,mu,p,cost"));
    assert_eq!(ledger.lines().filter(|l| l.starts_with("prediction")).count(), 3);
    let summary: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("summary.json")).unwrap()).unwrap();
    assert!(summary["fitted"]["m0"].is_number());
}

#[test]
fn replicate_desk_base_prints_slope() {
    let dir = tempfile::tempdir().unwrap();
    let o = liquar(&["replicate", "--preset", "base-6.1-desk", "--runs", "4", "--jobs", "4", "--out", dir.path().to_str().unwrap(), "--svg"]);
    assert!(o.status.success(), "{o:?}");
    assert!(stdout(&o).contains("slope="));
    let csv = std::fs::read_to_string(dir.path().join("liquar/regret.csv")).unwrap();
    assert!(csv.starts_with("time,mean_regret,band_lo,band_hi"));
    assert!(dir.path().join("liquar/regret.svg").exists());
}

#[test]
fn sensitivity_table_has_one_row_per_h0() {
    let o = liquar(&["sensitivity", "--epsilon", "0.05", "--h0-list", "1,0.1,0.02"]);
    assert!(o.status.success(), "{o:?}");
    let s = stdout(&o);
    assert_eq!(s.lines().count(), 4);
    assert!(s.lines().nth(1).unwrap().starts_with("1,0.706"));
}

#[test]
fn check_assumptions_reports_non_convex_base_box() {
    let o = liquar(&["check-assumptions", "--preset", "base-6.1", "--grid", "60"]);
    assert!(o.status.success(), "{o:?}");
    let s = stdout(&o);
    assert!(s.contains("holds=false") && s.contains("convex=false"), "{s}");
}

#[test]
fn validate_sim_structural_checks() {
    let o = liquar(&["validate-sim", "--seed", "3", "--horizon", "20000"]);
    let s = stdout(&o);
    for name in ["work-conservation", "nonnegativity", "censoring-dominance"] {
        assert!(s.contains(&format!("PASS {name}")), "{s}");
    }
    assert_eq!(o.status.success(), !s.contains("FAIL"));
}
