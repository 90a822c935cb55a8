use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use benchtrend::synth::{synthetic_records, SynthSpec};
use benchtrend::BenchmarkRecord;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_benchtrend"));
    c.env_remove("RUST_LOG");
    c
}

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures").join(name)
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Systems and micros CSVs in the ingest format.
fn write_records(dir: &Path, records: &[BenchmarkRecord]) -> (PathBuf, PathBuf) {
    let systems = dir.join("systems.csv");
    let micros = dir.join("micros.csv");
    let mut w = csv::Writer::from_path(&systems).unwrap();
    w.write_record([
        "record_id",
        "suite",
        "date",
        "vendor",
        "system",
        "processor",
        "cores",
        "freq_mhz",
        "l3_kb",
        "threads_per_core",
        "auto_parallel",
        "transistors",
        "score_speed",
        "score_rate",
    ])
    .unwrap();
    let mut m = csv::Writer::from_path(&micros).unwrap();
    m.write_record(["record_id", "micro_name", "ratio"]).unwrap();
    for r in records {
        w.write_record([
            r.record_id.clone(),
            r.suite.to_string(),
            r.date.to_string(),
            r.vendor.clone(),
            r.system.clone(),
            r.processor.clone(),
            opt(r.hw.cores),
            opt(r.hw.freq_mhz),
            opt(r.hw.l3_kb),
            opt(r.hw.threads_per_core),
            opt(r.hw.auto_parallel.map(u8::from)),
            opt(r.hw.transistors),
            opt(r.score_speed),
            opt(r.score_rate),
        ])
        .unwrap();
        for (name, v) in &r.micros {
            m.write_record([r.record_id.clone(), name.clone(), v.to_string()]).unwrap();
        }
    }
    w.flush().unwrap();
    m.flush().unwrap();
    (systems, micros)
}

fn synthetic_inputs(dir: &Path) -> (PathBuf, PathBuf) {
    let spec = SynthSpec {
        per_suite: 150,
        overlap: 30,
        ..SynthSpec::default()
    };
    write_records(dir, &synthetic_records(&spec, 5))
}

#[test]
fn summarize_fixture_row() {
    let o = run(&["summarize", "--suite", "2006", "--systems", p(&fixture("mini_spec.csv"))]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let out = stdout(&o);
    assert!(out.starts_with("# seed: 20170801\n"));
    assert!(out.contains("\n2006,speed,10,23.765,"), "{out}");
    assert!(out.contains(",10.033,2.9,2790.0,6451.2,1.6\n"), "{out}");
}

#[test]
fn unknown_subcommand_is_usage_error() {
    let o = run(&["frobnicate"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("Usage:"), "{}", stderr(&o));
    assert!(o.stdout.is_empty());
}

#[test]
fn help_exits_zero() {
    let o = run(&["--help"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("scenario"));
}

#[test]
fn missing_required_input_is_usage_error() {
    let o = run(&["summarize"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("--systems is required"));
    assert!(stderr(&o).contains("Usage:"));
}

#[test]
fn unsupported_format_is_usage_error() {
    let o = run(&["summarize", "--format", "text", "--systems", p(&fixture("mini_spec.csv"))]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn missing_file_is_data_error() {
    let o = run(&["summarize", "--systems", "/no/such/systems.csv"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn fit_trend_on_five_rows() {
    let dir = tempfile::tempdir().unwrap();
    let text = fs::read_to_string(fixture("mini_spec.csv")).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    let mut five = vec![lines[0]];
    five.extend(lines.iter().filter(|l| l.contains(",2017,")).take(5));
    let path = dir.path().join("five.csv");
    fs::write(&path, five.join("\n") + "\n").unwrap();
    let o = run(&["fit-trend", "--systems", p(&path)]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("n >= 10 required"), "{}", stderr(&o));
}

#[test]
fn ingest_check_reports_rejects() {
    let dir = tempfile::tempdir().unwrap();
    let mut text = fs::read_to_string(fixture("mini_spec.csv")).unwrap();
    text.push_str("bad1,1999,1996-01,V,S,P,1,200,,1,0,,-3,1\n");
    let path = dir.path().join("bad.csv");
    fs::write(&path, text).unwrap();
    let o = run(&["ingest-check", "--systems", p(&path)]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("41 rows, 40 accepted, 1 rejected"), "{}", stderr(&o));
    assert_eq!(stdout(&o).lines().count(), 3);
}

#[test]
fn doubling_from_theta() {
    let o = run(&["doubling", "--theta", "2.69,0.25,-9.14", "--format", "json"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    let gaps: Vec<u64> = v["rows"].as_array().unwrap().iter().map(|r| r["gap"].as_u64().unwrap()).collect();
    assert_eq!(&gaps[..3], &[6, 9, 13]);
    assert_eq!(v["seed"], 20170801);
}

#[test]
fn config_file_and_flag_precedence() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.json");
    fs::write(
        &cfg,
        format!(r#"{{"systems": {:?}, "seed": 7}}"#, p(&fixture("mini_spec.csv"))),
    )
    .unwrap();
    let o = run(&["summarize", "--config", p(&cfg)]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stdout(&o).starts_with("# seed: 7\n"));
    let o = run(&["summarize", "--config", p(&cfg), "--seed", "9"]);
    assert!(stdout(&o).starts_with("# seed: 9\n"));

    fs::write(&cfg, r#"{"systems": "/no/such.csv"}"#).unwrap();
    assert_eq!(run(&["summarize", "--config", p(&cfg)]).status.code(), Some(2));
}

fn dir_listing(dir: &Path) -> Vec<String> {
    let mut v: Vec<String> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .collect();
    v.sort();
    v
}

#[test]
fn out_dir_confines_writes() {
    let cwd = tempfile::tempdir().unwrap();
    let o = bin()
        .current_dir(cwd.path())
        .args([
            "normalize",
            "--systems",
            p(&fixture("mini_spec.csv")),
            "--micros",
            p(&fixture("mini_micros.csv")),
            "--out",
            "results",
        ])
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert_eq!(dir_listing(cwd.path()), vec!["results"]);
    assert_eq!(dir_listing(&cwd.path().join("results")), vec!["chain.json", "normalized.csv"]);
    // The summary goes to stdout and names what was written.
    assert!(stdout(&o).contains("[normalized.csv, chain.json]"), "{}", stdout(&o));
}

#[test]
fn normalize_chain_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("o");
    let o = run(&["normalize", "--systems", p(&fixture("mini_spec.csv")), "--out", p(&out)]);
    assert_eq!(o.status.code(), Some(0));
    let text = fs::read_to_string(out.join("chain.json")).unwrap();
    let chain: benchtrend::ConversionChain = serde_json::from_str(&text).unwrap();
    assert_eq!(chain.steps.len(), 3);
    let v: serde_json::Value = serde_json::from_str(&text).unwrap();
    assert_eq!(v["steps"][0]["method"], "constant");
    assert_eq!(v["steps"][0]["factor"], 0.04163115278018054);
}

/// The full forecasting pipeline across separate invocations, twice, byte for byte.
#[test]
fn pipeline_is_byte_identical() {
    let data = tempfile::tempdir().unwrap();
    let (systems, micros) = synthetic_inputs(data.path());
    let mut runs = Vec::new();
    for attempt in 0..2 {
        let out = data.path().join(format!("run{attempt}"));
        let common = ["--systems", p(&systems), "--micros", p(&micros), "--out", p(&out)];
        for cmd in [
            vec!["normalize"],
            vec!["fit-trend"],
            vec!["fit-quantiles", "--to", "2021-12"],
            vec!["factor-reg"],
            vec!["influence", "--suite", "2017"],
            vec!["sensitivity-export"],
            vec!["feasible-check", "--derive"],
        ] {
            let o = bin().args(&cmd).args(common).output().unwrap();
            assert_eq!(o.status.code(), Some(0), "{cmd:?}: {}", stderr(&o));
        }
        let trend = out.join("trend.json");
        let o = bin().args(["fit-gp", "--trend", p(&trend)]).args(common).output().unwrap();
        assert_eq!(o.status.code(), Some(0), "fit-gp: {}", stderr(&o));
        let gp = out.join("gp.json");
        let o = bin()
            .args(["predict", "--trend", p(&trend), "--gp", p(&gp), "--date", "2023-06"])
            .args(["--cores", "16", "--freq-mhz", "3000", "--l3-kb", "32768"])
            .args(["--out", p(&out)])
            .output()
            .unwrap();
        assert_eq!(o.status.code(), Some(0), "predict: {}", stderr(&o));
        let o = bin()
            .args(["scenario", "--trend", p(&trend), "--gp", p(&gp)])
            .args(["--lines", p(&out.join("lines.json")), "--region", p(&out.join("region.json"))])
            .args(["--from", "2018-01", "--to", "2021-01", "--step", "12", "--out", p(&out)])
            .output()
            .unwrap();
        assert_eq!(o.status.code(), Some(0), "scenario: {}", stderr(&o));
        let sweep = fs::read_to_string(out.join("scenario.csv")).unwrap();
        assert!(sweep.starts_with("# seed: 20170801\nt,date,q,cores,freq_mhz,l3_kb,threads,mean_log,var,lo95,hi95\n"));
        runs.push(out);
    }
    let names = dir_listing(&runs[0]);
    assert_eq!(names, dir_listing(&runs[1]));
    for name in &names {
        assert_eq!(
            fs::read(runs[0].join(name)).unwrap(),
            fs::read(runs[1].join(name)).unwrap(),
            "{name} differs between runs"
        );
    }
}
