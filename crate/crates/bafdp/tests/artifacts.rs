use std::fs;

use bafdp::core::data::generate_synthetic;
use bafdp::core::protocol::Method;
use bafdp::csv_io::write_cdr_csv;
use bafdp::runner::{LOAD_REPORT_FILE, RESOLVED_CONFIG_FILE, SUMMARY_FILE, TRACE_FILE};
use bafdp::trace_io::{read_summary, read_trace, SummaryRow};
use bafdp::{run, RunConfig};

const KEYS: [&str; 10] = [
    "virtual_time",
    "iteration",
    "kind",
    "client_id",
    "train_loss",
    "eps_per_client",
    "stationarity_gap",
    "bytes_transferred",
    "test_rmse",
    "test_mae",
];

fn small() -> RunConfig {
    let mut c = RunConfig::default();
    c.model.hidden = vec![4];
    c.model.kappa = 0.01;
    c.protocol.r = 4;
    c.protocol.s = 2;
    c.protocol.t = 300;
    c.data.n_cells = 4;
    c.data.n_days = 14;
    c
}

#[test]
fn trace_replays_into_the_written_summary() {
    let dir = tempfile::tempdir().unwrap();
    let c = small();
    let outcome = run(&c, dir.path()).unwrap();
    let trace = read_trace(&dir.path().join(TRACE_FILE)).unwrap();
    assert_eq!(trace, outcome.trace);
    assert_eq!(trace.config_fingerprint, c.fingerprint());

    let replayed = trace.summary(c.protocol.gap_target);
    let row = SummaryRow::from_summary(
        read_summary(&dir.path().join(SUMMARY_FILE)).unwrap()[0].run_id.clone(),
        "bafdp".into(),
        1,
        0.0,
        1.0,
        &replayed,
    );
    assert_eq!(read_summary(&dir.path().join(SUMMARY_FILE)).unwrap(), vec![row]);
}

#[test]
fn every_event_line_carries_every_key() {
    let dir = tempfile::tempdir().unwrap();
    run(&small(), dir.path()).unwrap();
    let text = fs::read_to_string(dir.path().join(TRACE_FILE)).unwrap();
    let mut lines = text.lines();
    let header: serde_json::Value = serde_json::from_str(lines.next().unwrap()).unwrap();
    assert!(header.get("config_fingerprint").is_some() && header.get("seed").is_some());
    let mut kinds = std::collections::BTreeSet::new();
    for line in lines {
        let v: serde_json::Value = serde_json::from_str(line).unwrap();
        let obj = v.as_object().unwrap();
        assert_eq!(obj.len(), KEYS.len(), "{line}");
        for k in KEYS {
            assert!(obj.contains_key(k), "{k} missing in {line}");
        }
        kinds.insert(obj["kind"].as_str().unwrap().to_string());
    }
    let expected: std::collections::BTreeSet<String> =
        ["client_step", "server_step", "dual_step", "eval"].map(String::from).into();
    assert_eq!(kinds, expected);
}

#[test]
fn resolved_config_reproduces_the_run() {
    let dir = tempfile::tempdir().unwrap();
    let mut c = small();
    c.attack.ratio = 0.25;
    c.sim.stragglers = vec![0];
    run(&c, &dir.path().join("a")).unwrap();
    let resolved = RunConfig::load(&dir.path().join("a").join(RESOLVED_CONFIG_FILE)).unwrap();
    assert_eq!(resolved, c);
    assert_eq!(resolved.fingerprint(), c.fingerprint());
    run(&resolved, &dir.path().join("b")).unwrap();
    assert_eq!(
        fs::read(dir.path().join("a").join(TRACE_FILE)).unwrap(),
        fs::read(dir.path().join("b").join(TRACE_FILE)).unwrap()
    );
}

#[test]
fn output_dir_does_not_change_the_fingerprint() {
    let mut c = small();
    let before = c.fingerprint();
    c.output.dir = "elsewhere".into();
    assert_eq!(c.fingerprint(), before);
    c.sim.seed += 1;
    assert_ne!(c.fingerprint(), before);
}

#[test]
fn csv_source_matches_the_synthetic_source() {
    let dir = tempfile::tempdir().unwrap();
    let c = small();
    let series = generate_synthetic(c.data.n_cells, c.data.n_days, c.sim.seed, &c.data.profile).unwrap();
    let csv = dir.path().join("traffic.csv");
    write_cdr_csv(&csv, &series).unwrap();

    let from_synth = run(&c, &dir.path().join("synth")).unwrap();
    let mut from_file = c.clone();
    from_file.data.source = csv.to_str().unwrap().into();
    let loaded = run(&from_file, &dir.path().join("csv")).unwrap();

    assert_eq!(from_synth.summary.final_rmse, loaded.summary.final_rmse);
    assert_eq!(from_synth.trace.events, loaded.trace.events);
    let report = fs::read_to_string(dir.path().join("csv").join(LOAD_REPORT_FILE)).unwrap();
    assert!(report.contains("interpolated hours: 0"), "{report}");
}

#[test]
fn fedavg_is_fragile_under_large_constant_attack() {
    let dir = tempfile::tempdir().unwrap();
    let mut c = small();
    c.model.hidden = Vec::new();
    c.protocol.method = Method::Fedavg;
    let clean = run(&c, &dir.path().join("clean")).unwrap().summary.final_rmse.unwrap();
    c.attack.ratio = 0.3;
    let attacked = run(&c, &dir.path().join("attacked")).unwrap().summary.final_rmse.unwrap();
    assert!(attacked >= 2.0 * clean, "{attacked} vs {clean}");
}
