use std::collections::BTreeSet;
use std::path::Path;
use std::process::{Command, Output};

use besov_mlmc::GridField;

fn cli(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_besov-mlmc"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn active_set(dir: &Path) -> BTreeSet<(u32, u64, u64)> {
    std::fs::read_to_string(dir.join("active.csv"))
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| {
            let f: Vec<u64> = l.split(',').map(|x| x.parse().unwrap()).collect();
            (f[0] as u32, f[1], f[2])
        })
        .collect()
}

#[test]
fn exit_codes() {
    assert_eq!(cli(&["--help"]).status.code(), Some(0));
    assert_eq!(cli(&["run"]).status.code(), Some(1));
    assert_eq!(cli(&["run", "--scenario", "no_such_scenario"]).status.code(), Some(1));
    assert_eq!(cli(&["run", "--scenario", "smooth", "--eps-list", "abc"]).status.code(), Some(1));
    assert_eq!(cli(&["run", "--scenario", "smooth", "--threads", "0"]).status.code(), Some(1));
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.toml");
    std::fs::write(&bad, "scenario = \"smooth\"\nbeta = 7.0\n").unwrap();
    assert_eq!(cli(&["run", "--scenario", bad.to_str().unwrap()]).status.code(), Some(1));
    let missing = dir.path().join("missing.csv");
    assert_eq!(cli(&["report", "--in", missing.to_str().unwrap()]).status.code(), Some(2));
}

#[test]
fn run_then_report() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("pexp.toml");
    std::fs::write(
        &config,
        "scenario = \"p_exponential\"\nxi_list = [3, 4, 5]\nxi_ref = 6\nn_ml = 2\nn_ref = 1\nseed = 4\n",
    )
    .unwrap();
    let out = dir.path().join("run.csv");
    let run = cli(&[
        "run",
        "--scenario",
        config.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(run.status.success(), "{}", String::from_utf8_lossy(&run.stderr));
    assert!(dir.path().join("run.csv.timing.csv").exists());
    let report = cli(&["report", "--in", out.to_str().unwrap()]);
    assert!(report.status.success());
    let text = String::from_utf8(report.stdout).unwrap();
    assert!(text.contains("reference = "));
    assert!(text.contains("work slope"));
    assert_eq!(text.lines().filter(|l| l.trim_start().starts_with("0.")).count(), 3);
}

#[test]
fn stdout_run_matches_file_run() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run.csv");
    let args = ["run", "--scenario", "rough", "--eps-list", "2^-1.5,2^-2", "--seed", "8"];
    let to_stdout = cli(&args);
    assert!(to_stdout.status.success());
    let mut with_out = args.to_vec();
    with_out.extend(["--out", out.to_str().unwrap()]);
    assert!(cli(&with_out).status.success());
    assert_eq!(to_stdout.stdout, std::fs::read(&out).unwrap());
}

#[test]
fn dump_field_is_nested_across_densities() {
    let base = tempfile::tempdir().unwrap();
    let mut sets = Vec::new();
    for beta in ["0.25", "0.75"] {
        let dir = base.path().join(beta);
        let res = cli(&[
            "dump-field",
            "--scenario",
            "smooth_gaussian",
            "--resolution",
            "6",
            "--truncation",
            "6",
            "--beta",
            beta,
            "--seed",
            "17",
            "--out",
            dir.to_str().unwrap(),
        ]);
        assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
        let (field, params) =
            GridField::read_from(std::io::BufReader::new(std::fs::File::open(dir.join("field.txt")).unwrap()))
                .unwrap();
        assert_eq!(field.side(), 64);
        assert!(params.iter().any(|(k, v)| k == "beta" && v == beta));
        let (sol, _) =
            GridField::read_from(std::io::BufReader::new(std::fs::File::open(dir.join("solution.txt")).unwrap()))
                .unwrap();
        assert!(sol.values.iter().all(|v| *v >= 0.0));
        sets.push(active_set(&dir));
    }
    assert!(sets[0].is_subset(&sets[1]));
    assert!(sets[0].len() < sets[1].len());
}
