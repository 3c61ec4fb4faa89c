//! End-to-end tests of the installed binary: argument handling, exit codes,
//! deterministic emission, and the scan cache.

use std::fs;
use std::path::PathBuf;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_liencycle"))
}

fn tmpdir(tag: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("liencycle-test-{tag}-{}", std::process::id()));
    let _ = fs::remove_dir_all(&dir);
    fs::create_dir_all(&dir).unwrap();
    dir
}

fn run(cmd: &mut Command) -> Output {
    cmd.output().expect("binary should spawn")
}

#[test]
fn simulate_emits_finite_csv_with_events() {
    let out = run(bin()
        .args(["simulate", "--system", "glo:1,-2.6,1", "--y0", "3", "--t-max", "50"])
        .env_remove("LIENCYCLE_CACHE"));
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "t,x,y,event");
    let mut events = 0;
    for line in lines {
        let cols: Vec<&str> = line.split(',').collect();
        assert_eq!(cols.len(), 4, "{line}");
        for v in &cols[..3] {
            assert!(v.parse::<f64>().unwrap().is_finite(), "{line}");
        }
        if !cols[3].is_empty() {
            events += 1;
            assert!(cols[3] == "L2R" || cols[3] == "R2L");
        }
    }
    assert!(events >= 2, "expected section crossings, saw {events}");
}

#[test]
fn hamiltonian_orbit_closes_after_one_period() {
    let out = run(bin().args([
        "simulate",
        "--system",
        "hamiltonian-test",
        "--y0",
        "1",
        "--stop",
        "full-return",
        "--t-max",
        "100",
    ]));
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let last = text.lines().last().unwrap();
    let cols: Vec<f64> = last
        .split(',')
        .take(3)
        .map(|v| v.parse().unwrap())
        .collect();
    // returned to the section at the starting ordinate
    assert!(cols[1].abs() < 1e-12, "x = {}", cols[1]);
    assert!((cols[2] - 1.0).abs() < 1e-8, "y = {}", cols[2]);
}

#[test]
fn malformed_config_is_rejected_with_exit_2() {
    let dir = tmpdir("cfg");
    let path = dir.join("bad.toml");
    fs::write(
        &path,
        r#"
name = "bad"
domain_d = 4.0

[[f_terms]]
kind = "SignStep"
coef = 1.0

[[g0_terms]]
kind = "PowerOdd"
coef = 1.0
exponent = 1.0
"#,
    )
    .unwrap();
    let out = run(bin().args(["cycles", "--config", path.to_str().unwrap()]));
    assert_eq!(out.status.code(), Some(2));
    let msg = String::from_utf8(out.stderr).unwrap();
    assert!(msg.contains("continuous"), "stderr: {msg}");
    let _ = fs::remove_dir_all(&dir);
}

#[test]
fn toml_config_roundtrips_through_check() {
    let dir = tmpdir("pls");
    let path = dir.join("pls.toml");
    // the saturated fractional-power system, spelled out longhand
    fs::write(
        &path,
        r#"
name = "pls-config"
domain_d = 12.0
c = 0.0

[[f_terms]]
kind = "PowerOdd"
coef = 1.0
exponent = 0.6666666666666666

[[f_terms]]
kind = "SaturatedPowerOdd"
coef = 1.0
exponent = 0.6666666666666666
saturation = 1.0

[[f_terms]]
kind = "SaturatedPowerOdd"
coef = -1.8
exponent = 0.6666666666666666
saturation = 2.0

[[g0_terms]]
kind = "PowerOdd"
coef = 1.0
exponent = 0.3333333333333333
"#,
    )
    .unwrap();
    let out = run(bin().args(["check", "--config", path.to_str().unwrap()]));
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let doc: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(doc["h1"]["holds"], true);
    assert_eq!(doc["h1"]["marginal"], true);
    assert_eq!(doc["thm_a_d"]["holds"], false);
    let _ = fs::remove_dir_all(&dir);
}

#[test]
fn cycles_json_counts_no_cycle_system() {
    let out = run(bin().args(["cycles", "--system", "glo:0,1,1", "--y-max", "10"]));
    assert!(out.status.success());
    let doc: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(doc["count"], 0);
    assert_eq!(doc["origin"], "Sink");
}

#[test]
fn unknown_flags_and_families_exit_2() {
    assert_eq!(
        run(bin().args(["cycles", "--system", "glo:1,-2.6,1", "--no-such-flag"]))
            .status
            .code(),
        Some(2)
    );
    assert_eq!(
        run(bin().args(["trace-dl", "--family", "pendulum"])).status.code(),
        Some(2)
    );
    assert_eq!(
        run(bin().args(["trace-dl", "--a", "-1"])).status.code(),
        Some(2)
    );
}

#[test]
fn regions_rerun_hits_cache_and_is_byte_identical() {
    let cache = tmpdir("cache");
    let args = [
        "regions",
        "--family",
        "glo",
        "--c",
        "1",
        "--a-range",
        "0.4:1",
        "--b-range",
        "-3:-2",
        "--grid",
        "2x3",
        "--n-grid",
        "60",
        "--y-max",
        "10",
    ];
    let first = run(bin().args(args).env("LIENCYCLE_CACHE", &cache));
    assert!(first.status.success(), "{}", String::from_utf8_lossy(&first.stderr));
    let cached_files = fs::read_dir(&cache).unwrap().count();
    assert_eq!(cached_files, 1, "one scan result should be cached");
    let second = run(bin().args(args).env("LIENCYCLE_CACHE", &cache));
    assert!(second.status.success());
    assert_eq!(first.stdout, second.stdout);
    let text = String::from_utf8(first.stdout).unwrap();
    assert_eq!(text.lines().next().unwrap(), "a,b,c,label,cycle_count,origin");
    // 2x3 grid, range does not straddle a = 0
    assert_eq!(text.lines().count(), 7);
    let _ = fs::remove_dir_all(&cache);
}

#[test]
fn portrait_and_simulate_svg_are_wellformed() {
    let dir = tmpdir("svg");
    let svg_path = dir.join("portrait.svg");
    let out = run(bin().args([
        "portrait",
        "--system",
        "glo:1,-2.6,1",
        "--y0",
        "0.5,2.6",
        "--t-max",
        "20",
        "--out",
        svg_path.to_str().unwrap(),
    ]));
    assert!(out.status.success());
    let svg = fs::read_to_string(&svg_path).unwrap();
    assert!(svg.starts_with("<svg"));
    assert!(svg.trim_end().ends_with("</svg>"));
    assert!(svg.contains("polyline"));
    let _ = fs::remove_dir_all(&dir);
}
