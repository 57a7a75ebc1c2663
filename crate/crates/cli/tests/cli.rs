// Copyright 2026 czpulse contributors
// SPDX-License-Identifier: Apache-2.0

use std::path::Path;
use std::process::{Command, Output};

const CIRCUIT: &str = r#"
[[mode]]
label = "Q1"
freq_ghz = 6.0
anh_ghz = -0.25
levels = 3

[[mode]]
label = "C"
freq_ghz = 7.87
anh_ghz = -0.30
levels = 3
tunable = true

[[mode]]
label = "Q2"
freq_ghz = 5.4
anh_ghz = -0.25
levels = 3

[[coupling]]
pair = [0, 1]
rho = 0.018

[[coupling]]
pair = [1, 2]
rho = 0.018

[[coupling]]
pair = [0, 2]
rho = 0.0015

[pulse]
tg_ns = 30.0
bound_ghz = 5.75
filter_mhz = 300.0
"#;

fn czpulse(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_czpulse")).args(args).output().expect("binary runs")
}

fn write_config(dir: &Path, extra: &str) -> String {
    let p = dir.join("circuit.toml");
    std::fs::write(&p, format!("{CIRCUIT}{extra}")).unwrap();
    p.display().to_string()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn list_names_every_experiment() {
    let o = czpulse(&["list"]);
    assert!(o.status.success());
    for id in ["fig2", "fig3a", "fig4a", "designmap", "stray", "noise", "schemes"] {
        assert!(stdout(&o).contains(id), "{id}");
    }
}

#[test]
fn spectrum_is_deterministic_and_writes_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "");
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for out in [&a, &b] {
        let o = czpulse(&["spectrum", "--config", &cfg, "--out", out.to_str().unwrap(), "--range", "7.0,8.5,16"]);
        assert!(o.status.success(), "{}", stderr(&o));
    }
    for f in ["spectrum.csv", "zeta.csv"] {
        let x = std::fs::read(a.join(f)).unwrap();
        assert_eq!(x, std::fs::read(b.join(f)).unwrap(), "{f}");
    }
    let zeta = std::fs::read_to_string(a.join("zeta.csv")).unwrap();
    assert!(zeta.starts_with("omega_c_ghz,zeta_mhz,g_eff_mhz,d_factor"));
    assert_eq!(zeta.lines().count(), 17);
    let manifest = std::fs::read_to_string(a.join("fig2.manifest.toml")).unwrap();
    assert!(manifest.contains("experiment = \"fig2\"") && manifest.contains("zeta.csv"));
}

#[test]
fn empty_range_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "");
    let o = czpulse(&["spectrum", "--config", &cfg, "--out", dir.path().to_str().unwrap(), "--range", "8.0,7.0,10"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("empty spectrum range"));
}

#[test]
fn config_errors_name_the_line() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "\n[pulse2]\nkind = \n");
    let o = czpulse(&["spectrum", "--config", &cfg, "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("line"), "{}", stderr(&o));
}

#[test]
fn unknown_experiment_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "");
    let o = czpulse(&["run", "--config", &cfg, "--out", dir.path().to_str().unwrap(), "fig99"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn gate_summary_and_zero_reflection() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "");
    let run = |out: &str, extra: &[&str]| {
        let out = dir.path().join(out);
        let mut args = vec!["gate", "--config", &cfg, "--out", out.to_str().unwrap(), "--lambdas=-8.0"];
        args.extend_from_slice(extra);
        let o = czpulse(&args);
        assert!(o.status.success(), "{}", stderr(&o));
        (stdout(&o), std::fs::read_to_string(out.join("gate.csv")).unwrap())
    };
    let (plain, table) = run("plain", &[]);
    assert!(plain.starts_with("epg=") && plain.contains(" phi_zz="), "{plain}");
    assert!(table.starts_with("tg_ns,epg,phi_zz_rad,leakage_total,phi1_rad,phi2_rad"));
    let (zero, zero_table) = run("zero", &["--distort", "0.0,10"]);
    assert_eq!(plain, zero);
    assert_eq!(table, zero_table);
    let (deviated, _) = run("dev", &["--deviate", "omega1,+10MHz"]);
    assert_ne!(plain, deviated);
    let wave = std::fs::read_to_string(dir.path().join("plain/waveform.csv")).unwrap();
    let first: Vec<f64> = wave.lines().nth(1).unwrap().split(',').map(|x| x.parse().unwrap()).collect();
    assert_eq!(first[0], 0.0);
    assert!((first[1] - 7.87).abs() < 1e-3, "{first:?}");
}

#[test]
fn bad_gate_arguments() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "");
    let out = dir.path().to_str().unwrap();
    let o = czpulse(&["gate", "--config", &cfg, "--out", out, "--lambdas=-8", "--deviate", "beta1,+1MHz"]);
    assert_eq!(o.status.code(), Some(2));
    let o = czpulse(&["gate", "--config", &cfg, "--out", out, "--lambdas=-8", "--distort", "0.1"]);
    assert_eq!(o.status.code(), Some(2));
    // an excursion far beyond the tabulated range is a numerical failure
    let o = czpulse(&["gate", "--config", &cfg, "--out", out, "--lambdas=-500"]);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
}
