//! End-to-end tests of the `tradenet` binary: pipeline wiring, determinism
//! and exit codes.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("tests/fixtures")
        .join(name)
}

fn tradenet(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tradenet"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn run_ok(args: &[&str]) -> Output {
    let out = tradenet(args);
    assert!(
        out.status.success(),
        "command {args:?} failed:\nstdout: {}\nstderr: {}",
        stdout(&out),
        stderr(&out)
    );
    out
}

/// Snapshot of an output tree: file name -> raw bytes.
fn tree(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut map = BTreeMap::new();
    for entry in std::fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        if path.is_file() {
            map.insert(
                path.file_name().unwrap().to_string_lossy().into_owned(),
                std::fs::read(&path).unwrap(),
            );
        }
    }
    map
}

fn run_pipeline(out_dir: &Path, config: &Path) -> Vec<Output> {
    let out_s = out_dir.to_str().unwrap();
    let cfg_s = config.to_str().unwrap();
    vec![
        run_ok(&["ingest", "--config", cfg_s, "--output", out_s]),
        run_ok(&["fit", "--config", cfg_s, "--output", out_s]),
        run_ok(&["simulate", "--config", cfg_s, "--output", out_s]),
        run_ok(&["analyze", "--config", cfg_s, "--output", out_s]),
    ]
}

fn write_config(dir: &Path) -> PathBuf {
    let path = dir.join("run.toml");
    let config = format!(
        r#"
flows = "{}"
gdp = "{}"
years = "1974..1975"
seed = 42
samples = 2
method = "both"

[chain]
sweeps = 3000
burn_in = 500
thin = 10

[filters]
min_expected_share = 1e-4
min_bin_count = 0
"#,
        fixture("flows.csv").display(),
        fixture("gdp.csv").display()
    );
    std::fs::write(&path, config).unwrap();
    path
}

#[test]
fn pipeline_produces_expected_files_and_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("out");
    let config = write_config(dir.path());

    let logs = run_pipeline(&out_dir, &config);
    let first = tree(&out_dir);

    // Stage files for both years.
    for year in [1974, 1975] {
        for name in [
            format!("snapshot-{year}.csv"),
            format!("countries-{year}.csv"),
            format!("params-{year}.csv"),
            format!("chain-{year}.csv"),
            format!("strength-{year}.csv"),
            format!("cloud-{year}.csv"),
            format!("cloud-bins-{year}.csv"),
            format!("hist-{year}-real.csv"),
            format!("hist-{year}-simulated.csv"),
            format!("hist-{year}-expected.csv"),
        ] {
            assert!(first.contains_key(&name), "missing {name}");
        }
        // samples=2, both methods: direct at seeds 42,43 and metropolis at 44,45.
        let samples: Vec<_> = first
            .keys()
            .filter(|k| k.starts_with(&format!("sample-{year}-")))
            .collect();
        assert_eq!(samples.len(), 4, "samples for {year}: {samples:?}");
    }

    // Exactly one consecutive-year table set.
    let fr_tables: Vec<_> = first
        .keys()
        .filter(|k| k.starts_with("fr-") && !k.starts_with("fr-points") && !k.starts_with("fr-agg"))
        .collect();
    assert_eq!(fr_tables, ["fr-1974-1975.csv"]);
    assert!(first.contains_key("fr-points-1974-1975.csv"));
    assert!(first.contains_key("fr-agg-1974-1975.csv"));

    // The ingest summary reports the GDP-less trading country.
    let ingest_log = stdout(&logs[0]);
    assert!(
        ingest_log.contains("dropped_countries=1"),
        "ingest log: {ingest_log}"
    );

    // The fit echoes a machine-precision residual for the sum identity.
    let fit_log = stdout(&logs[1]);
    for line in fit_log.lines() {
        let residual: f64 = line
            .split("residual=")
            .nth(1)
            .expect("residual in fit line")
            .trim()
            .parse()
            .unwrap();
        assert!(residual < 1e-10, "fit line: {line}");
    }

    // Both methods requested: a per-pair sampler-agreement summary is emitted.
    let sim_log = stdout(&logs[2]);
    assert!(sim_log.contains("ks year=1974 passed="), "sim log: {sim_log}");

    // Rerunning the whole pipeline over existing outputs is byte-identical.
    run_pipeline(&out_dir, &config);
    let second = tree(&out_dir);
    assert_eq!(first.len(), second.len());
    for (name, bytes) in &first {
        assert_eq!(
            bytes,
            second.get(name).expect(name),
            "file {name} changed between runs"
        );
    }
}

#[test]
fn analysis_outputs_are_normalized_and_filtered() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("out");
    let config = write_config(dir.path());
    run_pipeline(&out_dir, &config);

    // Histogram densities integrate to one for every source.
    for source in ["real", "simulated", "expected"] {
        let content =
            std::fs::read_to_string(out_dir.join(format!("hist-1975-{source}.csv"))).unwrap();
        let mut mass = 0.0;
        for line in content.lines().filter(|l| !l.starts_with('#')).skip(1) {
            let fields: Vec<&str> = line.split(',').collect();
            let lo: f64 = fields[0].parse().unwrap();
            let hi: f64 = fields[1].parse().unwrap();
            let density: f64 = fields[2].parse().unwrap();
            mass += density * (hi - lo);
        }
        assert!((mass - 1.0).abs() < 1e-6, "{source} histogram mass {mass}");
    }

    // The tables carry the documented columns.
    let fr = std::fs::read_to_string(out_dir.join("fr-1974-1975.csv")).unwrap();
    let header = fr.lines().find(|l| !l.starts_with('#')).unwrap();
    assert_eq!(header, "m,n,count,geo_mean_dxi,geo_mean_dv");
    let strength = std::fs::read_to_string(out_dir.join("strength-1975.csv")).unwrap();
    let header = strength.lines().find(|l| !l.starts_with('#')).unwrap();
    assert_eq!(header, "direction,a_fit,a_theory,loglog_slope");
    // min_bin_count = 0 keeps the sparse fixture cells.
    assert!(fr.lines().filter(|l| !l.starts_with('#')).count() > 1);
}

#[test]
fn default_count_filter_empties_tiny_fixtures() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("out");
    let out_s = out_dir.to_str().unwrap();
    let flows = fixture("flows.csv");
    let gdp = fixture("gdp.csv");
    run_ok(&[
        "ingest",
        "--flows",
        flows.to_str().unwrap(),
        "--gdp",
        gdp.to_str().unwrap(),
        "--years",
        "1974..1975",
        "--output",
        out_s,
    ]);
    run_ok(&["fit", "--years", "1974..1975", "--output", out_s]);
    run_ok(&["simulate", "--years", "1974..1975", "--output", out_s]);
    run_ok(&["analyze", "--years", "1974..1975", "--output", out_s]);
    // Default min_bin_count = 1000 removes every cell of a 5-country fixture.
    let fr = std::fs::read_to_string(out_dir.join("fr-1974-1975.csv")).unwrap();
    assert_eq!(fr.lines().filter(|l| !l.starts_with('#')).count(), 1); // header only
}

#[test]
fn year_without_data_is_skipped_with_warning() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("out");
    let flows = fixture("flows.csv");
    let gdp = fixture("gdp.csv");
    let out = run_ok(&[
        "ingest",
        "--flows",
        flows.to_str().unwrap(),
        "--gdp",
        gdp.to_str().unwrap(),
        "--years",
        "1974..1976",
        "--output",
        out_dir.to_str().unwrap(),
    ]);
    assert!(stderr(&out).contains("1976"), "stderr: {}", stderr(&out));
    assert!(out_dir.join("snapshot-1975.csv").exists());
    assert!(!out_dir.join("snapshot-1976.csv").exists());
}

#[test]
fn unit_gdp_fixture_fits_unit_fields() {
    // Two countries with x = 1 (millions USD) each and T = 4 give theta = 1
    // for both, exactly.
    let dir = tempfile::tempdir().unwrap();
    let flows = dir.path().join("flows.csv");
    let gdp = dir.path().join("gdp.csv");
    std::fs::write(
        &flows,
        "year,exporter,importer,export_musd,import_musd\n\
         1990,AAA,BBB,2.0,\n\
         1990,BBB,AAA,2.0,\n",
    )
    .unwrap();
    std::fs::write(
        &gdp,
        "year,country,gdp_pc_usd,population\n\
         1990,AAA,1,1000000\n\
         1990,BBB,1,1000000\n",
    )
    .unwrap();
    let out_dir = dir.path().join("out");
    let out_s = out_dir.to_str().unwrap();
    run_ok(&[
        "ingest",
        "--flows",
        flows.to_str().unwrap(),
        "--gdp",
        gdp.to_str().unwrap(),
        "--years",
        "1990",
        "--output",
        out_s,
    ]);
    run_ok(&["fit", "--years", "1990", "--output", out_s]);
    let params = std::fs::read_to_string(out_dir.join("params-1990.csv")).unwrap();
    let thetas: Vec<&str> = params
        .lines()
        .filter(|l| !l.starts_with('#'))
        .skip(1)
        .map(|l| l.rsplit(',').next().unwrap())
        .collect();
    assert_eq!(thetas, vec!["1", "1"], "params file: {params}");
}

#[test]
fn invalid_chain_config_is_rejected_before_sampling() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("bad.toml");
    std::fs::write(
        &config,
        r#"
years = "1974"
[chain]
sweeps = 100
burn_in = 100
"#,
    )
    .unwrap();
    let out = tradenet(&[
        "simulate",
        "--config",
        config.to_str().unwrap(),
        "--method",
        "metropolis",
        "--output",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(1), "stderr: {}", stderr(&out));
    assert!(stderr(&out).contains("burn_in"));
    // Nothing was written.
    assert!(std::fs::read_dir(dir.path()).unwrap().count() <= 2);
}

#[test]
fn usage_and_config_errors_exit_one() {
    // Unknown flag.
    let out = tradenet(&["ingest", "--no-such-flag"]);
    assert_eq!(out.status.code(), Some(1));
    // Missing years.
    let out = tradenet(&["fit", "--output", "/tmp/nowhere"]);
    assert_eq!(out.status.code(), Some(1), "stderr: {}", stderr(&out));
    // Bad years spec.
    let out = tradenet(&["fit", "--years", "abc", "--output", "/tmp/nowhere"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn data_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    // Input file does not exist.
    let out = tradenet(&[
        "ingest",
        "--flows",
        "/no/such/flows.csv",
        "--gdp",
        "/no/such/gdp.csv",
        "--years",
        "1974",
        "--output",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2), "stderr: {}", stderr(&out));
    assert!(stderr(&out).contains("flows.csv"));

    // Fit without snapshots names the missing year file.
    let out = tradenet(&[
        "fit",
        "--years",
        "1974",
        "--output",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("1974"), "stderr: {}", stderr(&out));
}

#[test]
fn help_exits_zero() {
    let out = tradenet(&["--help"]);
    assert_eq!(out.status.code(), Some(0));
    assert!(stdout(&out).contains("ingest"));
}
