use besov_mlmc::experiment::{
    read_csv, rmse_table, run_scenario, write_csv, write_timing, RecordKind, Scenario, ScenarioConfig, CSV_COLUMNS,
};

fn small_config() -> ScenarioConfig {
    let mut cfg = ScenarioConfig::desk(Scenario::rough_gaussian());
    cfg.eps_list.truncate(2);
    cfg.eps_ref = cfg.scenario.eps_for(4.0);
    cfg.n_ml = 3;
    cfg.n_ref = 2;
    cfg.seed = 21;
    cfg
}

#[test]
fn schema_and_front_matter() {
    let cfg = small_config();
    let out = run_scenario(&cfg).unwrap();
    let mut buf = Vec::new();
    write_csv(&mut buf, &cfg, &out.records).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "---");
    let end = 1 + lines[1..].iter().position(|l| *l == "---").unwrap();
    let keys: Vec<&str> = lines[1..end].iter().map(|l| l.split(": ").next().unwrap()).collect();
    for k in ["scenario", "s", "p", "kappa", "beta", "t", "r", "theta", "eps_list", "eps_ref", "n_ml", "n_ref", "seed"] {
        assert!(keys.contains(&k), "front matter lacks {k}");
    }
    assert_eq!(lines[end + 1], CSV_COLUMNS.join(","));
    let rows = &lines[end + 2..];
    let expected: usize = out.records.iter().map(|r| r.levels.len()).sum();
    assert_eq!(rows.len(), expected);
    assert!(rows.iter().all(|r| r.split(',').count() == CSV_COLUMNS.len()));
    assert!(rows.iter().all(|r| r.starts_with("reference,") || r.starts_with("estimate,")));
    let refs = out.records.iter().filter(|r| r.kind == RecordKind::Reference).count();
    assert_eq!(refs, 2);
    assert_eq!(out.records.len(), 2 + 2 * 3);
}

#[test]
fn round_trip_reproduces_the_rmse_table() {
    let cfg = small_config();
    let out = run_scenario(&cfg).unwrap();
    let mut buf = Vec::new();
    write_csv(&mut buf, &cfg, &out.records).unwrap();
    let (meta, records) = read_csv(&buf[..]).unwrap();
    assert_eq!(meta["scenario"], "rough_gaussian");
    assert_eq!(meta["seed"], "21");
    let (reference, rows) = rmse_table(&records).unwrap();
    assert_eq!(reference, out.reference);
    assert_eq!(rows, out.rmse);
    for (a, b) in records.iter().zip(&out.records) {
        assert_eq!(a.estimate, b.estimate);
        assert_eq!(a.work_units(), b.work_units());
    }
}

#[test]
fn timing_sidecar_has_one_row_per_level() {
    let cfg = small_config();
    let out = run_scenario(&cfg).unwrap();
    let mut buf = Vec::new();
    write_timing(&mut buf, &out.records).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let expected: usize = out.records.iter().map(|r| r.levels.len()).sum();
    assert_eq!(text.lines().count(), expected + 1);
    assert!(text.starts_with("kind,eps,replicate,level,wall_seconds\n"));
}

#[test]
fn infeasible_eps_is_skipped() {
    let mut cfg = small_config();
    cfg.eps_list.insert(0, 0.9);
    let out = run_scenario(&cfg).unwrap();
    assert_eq!(out.skipped, vec![0.9]);
    assert_eq!(out.rmse.len(), 2);
}

#[test]
fn malformed_csv_is_rejected() {
    assert!(read_csv(&b"kind,eps\n"[..]).is_err());
    let bad_header = format!("---\nscenario: x\n---\n{}\n", "a,b,c");
    assert!(read_csv(bad_header.as_bytes()).is_err());
    let short_row = format!("---\nscenario: x\n---\n{}\nestimate,1,2\n", CSV_COLUMNS.join(","));
    assert!(read_csv(short_row.as_bytes()).is_err());
}
