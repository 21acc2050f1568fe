use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tdlforge::units::SPEED_OF_LIGHT_M_PER_NS;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tdlforge"))
        .args(args)
        .env_remove("TDLFORGE_SEED")
        .output()
        .unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn dist(bins: f64) -> String {
    (bins * 33.3 * SPEED_OF_LIGHT_M_PER_NS).to_string()
}

fn write_tdl(dir: &Path, name: &str, body: &str) -> std::path::PathBuf {
    let p = dir.join(name);
    fs::write(&p, body).unwrap();
    p
}

const THREE_TAPS: &str = r#"{"first_tap_power_db": -80, "k_factor_db": 9, "num_taps": 3, "delays_ns": [0, 166.5, 399.6], "powers_db": [0, -6, -12]}"#;

/// Rows of noise around -120 dB with one spike at bin 6.
fn spike_csv(rows: usize) -> String {
    let mut s = String::from("# bin_spacing_ns=33.3\n");
    for r in 0..rows {
        let cells: Vec<String> = (0..16)
            .map(|b| if b == 6 { "-60".into() } else { format!("{}", -120.0 - ((b * 7 + r * 3) % 5) as f64 * 0.2) })
            .collect();
        s.push_str(&format!("{},{}\n", r as f64 * 0.02, cells.join(",")));
    }
    s
}

#[test]
fn extract_single_spike_gives_one_tap_files() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("spike.csv");
    fs::write(&csv, spike_csv(12)).unwrap();
    let out = dir.path().join("out");
    let o = run(&["extract", "--pdp", s(&csv), "--out", s(&out), "--window", "3"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let index: Vec<serde_json::Value> = serde_json::from_str(&fs::read_to_string(out.join("index.json")).unwrap()).unwrap();
    assert_eq!(index.len(), 10);
    for e in &index {
        let t: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join(e["file"].as_str().unwrap())).unwrap()).unwrap();
        assert_eq!(t["num_taps"], 1);
        assert!((t["first_tap_power_db"].as_f64().unwrap() + 60.0).abs() < 1e-9);
    }

    let again = dir.path().join("again");
    assert!(run(&["extract", "--pdp", s(&csv), "--out", s(&again), "--window", "3"]).status.success());
    for e in fs::read_dir(&out).unwrap() {
        let name = e.unwrap().file_name();
        assert_eq!(fs::read(out.join(&name)).unwrap(), fs::read(again.join(&name)).unwrap());
    }
}

#[test]
fn extract_all_noise_reports_no_multipath() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("noise.csv");
    let mut text = String::from("# bin_spacing_ns=33.3\n");
    for r in 0..5 {
        text.push_str(&format!("{r},-120,-121,-120.5,-119.8,-120.2,-121.3\n"));
    }
    fs::write(&csv, text).unwrap();
    let o = run(&["extract", "--pdp", s(&csv), "--out", s(&dir.path().join("o")), "--window", "2"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stdout(&o).contains("no multipath detected 4"), "{}", stdout(&o));
}

#[test]
fn extract_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["extract", "--pdp", s(&dir.path().join("missing.csv")), "--out", s(dir.path())]);
    assert_eq!(o.status.code(), Some(1));
    let bad = dir.path().join("bad.csv");
    fs::write(&bad, "# bin_spacing_ns=33.3\n0,-60,x\n").unwrap();
    let o = run(&["extract", "--pdp", s(&bad), "--out", s(dir.path())]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains(":2:"), "{}", stderr(&o));
}

#[test]
fn synth_row_count_and_reproducibility() {
    let dir = tempfile::tempdir().unwrap();
    let tdl = write_tdl(dir.path(), "t.json", THREE_TAPS);
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    for p in [&a, &b] {
        let o = run(&["synth", "--tdl", s(&tdl), "--distance", &dist(6.0), "--draws", "1", "--seed", "77", "--out", s(p)]);
        assert!(o.status.success(), "{}", stderr(&o));
    }
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());

    let c = dir.path().join("c.csv");
    assert!(run(&["synth", "--tdl", s(&tdl), "--distance", &dist(6.0), "--draws", "17", "--out", s(&c)]).status.success());
    assert_eq!(fs::read_to_string(&c).unwrap().lines().count(), 1 + 17);
    assert_eq!(fs::read_to_string(dir.path().join("c_apdp.csv")).unwrap().lines().count(), 2);
}

#[test]
fn synth_seed_comes_from_env() {
    let dir = tempfile::tempdir().unwrap();
    let tdl = write_tdl(dir.path(), "t.json", THREE_TAPS);
    let flag = dir.path().join("flag.csv");
    let env = dir.path().join("env.csv");
    assert!(run(&["synth", "--tdl", s(&tdl), "--distance", "10", "--draws", "3", "--seed", "31", "--out", s(&flag)]).status.success());
    let o = Command::new(env!("CARGO_BIN_EXE_tdlforge"))
        .args(["synth", "--tdl", s(&tdl), "--distance", "10", "--draws", "3", "--out", s(&env)])
        .env("TDLFORGE_SEED", "31")
        .output()
        .unwrap();
    assert!(o.status.success());
    assert_eq!(fs::read(&flag).unwrap(), fs::read(&env).unwrap());
}

#[test]
fn synth_huge_k_single_tap_is_one_bin() {
    let dir = tempfile::tempdir().unwrap();
    let tdl = write_tdl(dir.path(), "t.json", r#"{"first_tap_power_db": -70, "k_factor_db": 150, "num_taps": 1, "delays_ns": [0], "powers_db": [0]}"#);
    let out = dir.path().join("e.csv");
    assert!(run(&["synth", "--tdl", s(&tdl), "--distance", &dist(8.0), "--draws", "20", "--out", s(&out)]).status.success());
    let apdp = fs::read_to_string(dir.path().join("e_apdp.csv")).unwrap();
    let row: Vec<f64> = apdp.lines().nth(1).unwrap().split(',').skip(1).map(|c| c.parse().unwrap()).collect();
    let above: Vec<usize> = (0..row.len()).filter(|&i| row[i] > -150.0).collect();
    assert_eq!(above, vec![8]);
}

#[test]
fn synth_rejects_invalid_tdl() {
    let dir = tempfile::tempdir().unwrap();
    let tdl = write_tdl(dir.path(), "t.json", r#"{"first_tap_power_db": -70, "k_factor_db": 3, "num_taps": 2, "delays_ns": [0], "powers_db": [0]}"#);
    let o = run(&["synth", "--tdl", s(&tdl), "--distance", "10", "--draws", "2", "--out", s(&dir.path().join("x.csv"))]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("delays_ns"), "{}", stderr(&o));
}

#[test]
fn roundtrip_recovers_structure_and_flags_k() {
    let dir = tempfile::tempdir().unwrap();
    let tdl = write_tdl(dir.path(), "t.json", THREE_TAPS);
    let report = dir.path().join("r.json");
    let o = run(&["roundtrip", "--tdl", s(&tdl), "--distance", &dist(10.0), "--seed", "2", "--out", s(&report)]);
    let r: serde_json::Value = serde_json::from_str(&fs::read_to_string(&report).unwrap()).unwrap();
    assert_eq!(r["recovered_num_taps"], 3);
    assert!(r["taps"].as_array().unwrap().iter().all(|t| t["delay_ok"] == true));
    // the peak-over-window estimator cannot see NLOS power that shares the LOS bin
    assert_eq!(o.status.code(), Some(3));
    assert!(stdout(&o).contains("BREACH"));
}

#[test]
fn roundtrip_single_tap_passes_without_k_check() {
    let dir = tempfile::tempdir().unwrap();
    let tdl = write_tdl(dir.path(), "t.json", r#"{"first_tap_power_db": -75, "k_factor_db": 10, "num_taps": 1, "delays_ns": [0], "powers_db": [0]}"#);
    let o = run(&["roundtrip", "--tdl", s(&tdl), "--distance", &dist(9.0), "--tol-k-db", "inf"]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
}

#[test]
fn roundtrip_merges_close_taps() {
    let dir = tempfile::tempdir().unwrap();
    let tdl = write_tdl(dir.path(), "t.json", r#"{"first_tap_power_db": -75, "k_factor_db": 10, "num_taps": 2, "delays_ns": [0, 66.6], "powers_db": [0, -3]}"#);
    let report = dir.path().join("r.json");
    let o = run(&["roundtrip", "--tdl", s(&tdl), "--distance", &dist(9.0), "--tol-k-db", "inf", "--out", s(&report)]);
    assert_eq!(o.status.code(), Some(3));
    let r: serde_json::Value = serde_json::from_str(&fs::read_to_string(&report).unwrap()).unwrap();
    assert_eq!(r["recovered_num_taps"], 1);
}

fn eval_fixture(dir: &Path, offset_db: f64) -> (std::path::PathBuf, std::path::PathBuf) {
    let tdl = write_tdl(dir, "t.json", THREE_TAPS);
    let pdp = dir.join("m.csv");
    assert!(run(&["synth", "--tdl", s(&tdl), "--distance", &dist(7.0), "--draws", "30", "--noise-floor-db", "-150", "--out", s(&pdp)]).status.success());
    let truth = dir.join("truth");
    assert!(run(&["extract", "--pdp", s(&pdp), "--out", s(&truth)]).status.success());
    let index: Vec<serde_json::Value> = serde_json::from_str(&fs::read_to_string(truth.join("index.json")).unwrap()).unwrap();
    let mut lines = String::new();
    for e in &index {
        let mut t: serde_json::Value = serde_json::from_str(&fs::read_to_string(truth.join(e["file"].as_str().unwrap())).unwrap()).unwrap();
        t["first_tap_power_db"] = (t["first_tap_power_db"].as_f64().unwrap() + offset_db).into();
        lines.push_str(&serde_json::json!({"timestamp_s": e["timestamp_s"], "tdl": t}).to_string());
        lines.push('\n');
    }
    let pred = dir.join("pred.jsonl");
    fs::write(&pred, lines).unwrap();
    (truth, pred)
}

#[test]
fn eval_offset_shows_up_as_path_loss_rmse() {
    let dir = tempfile::tempdir().unwrap();
    let (truth, pred) = eval_fixture(dir.path(), 3.0);
    let out = dir.path().join("r.json");
    let o = run(&["--json", "eval", "--truth", s(&truth), "--pred", s(&pred), "--out", s(&out), "--draws", "10"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let r: serde_json::Value = serde_json::from_str(&fs::read_to_string(&out).unwrap()).unwrap();
    assert!((r["rmse_path_loss_db"].as_f64().unwrap() - 3.0).abs() < 1e-9);
    assert!((r["pdp_avg_cosine_similarity"].as_f64().unwrap() - 1.0).abs() < 1e-12);
    let console: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(console["match_loss"]["config"]["repulsion_alpha"], 1.0);
}

#[test]
fn eval_error_paths() {
    let dir = tempfile::tempdir().unwrap();
    let (truth, pred) = eval_fixture(dir.path(), 0.0);
    let out = dir.path().join("r.json");
    let o = run(&["eval", "--truth", s(&truth), "--pred", s(&dir.path().join("none.jsonl")), "--out", s(&out)]);
    assert_eq!(o.status.code(), Some(1));

    let text = fs::read_to_string(&pred).unwrap();
    let few: String = text.lines().take(3).map(|l| format!("{l}\n")).collect();
    let sparse = dir.path().join("sparse.jsonl");
    fs::write(&sparse, few).unwrap();
    let o = run(&["eval", "--truth", s(&truth), "--pred", s(&sparse), "--out", s(&out)]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn config_file_supplies_defaults() {
    let dir = tempfile::tempdir().unwrap();
    let tdl = write_tdl(dir.path(), "t.json", THREE_TAPS);
    let cfg = dir.path().join("run.conf");
    fs::write(&cfg, "# synth defaults\ndraws = 5\nseed = 12\ndistance = 10\n").unwrap();
    let a = dir.path().join("a.csv");
    let o = run(&["--config", s(&cfg), "synth", "--tdl", s(&tdl), "--out", s(&a)]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(fs::read_to_string(&a).unwrap().lines().count(), 6);

    let b = dir.path().join("b.csv");
    assert!(run(&["--config", s(&cfg), "synth", "--tdl", s(&tdl), "--out", s(&b), "--draws", "2"]).status.success());
    assert_eq!(fs::read_to_string(&b).unwrap().lines().count(), 3);
}

#[test]
fn geo_specs_without_raster() {
    let dir = tempfile::tempdir().unwrap();
    // 100 m due north
    let o = run(&["--json", "geo", "--tx", "30.0,120.0", "--rx", "30.000899322,120.0", "--out", s(dir.path())]);
    assert!(o.status.success(), "{}", stderr(&o));
    let r: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert!((r["link"]["distance_m"].as_f64().unwrap() - 100.0).abs() < 0.01);
    assert_eq!(r["global_crop"]["width_m"], 256.0);
    assert_eq!(r["global_crop"]["out_width_px"], 512);
    assert!(dir.path().join("geo.json").exists());
}

#[test]
fn geo_coincident_points_warn() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["--json", "geo", "--tx", "30,120", "--rx", "30,120", "--out", s(dir.path())]);
    assert!(o.status.success());
    let r: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(r["link"]["azimuth_deg"], 0.0);
    assert!(stderr(&o).contains("coincide"), "{}", stderr(&o));
}

#[test]
fn geo_crop_outside_raster_is_a_validation_error() {
    use tdlforge::geo::GeoPoint;
    use tdlforge::raster::{write_georef, write_png, Raster};
    let dir = tempfile::tempdir().unwrap();
    let img = Raster::filled(50, 50, 1, 90, 1.0, GeoPoint::new(10.0, 10.0).unwrap()).unwrap();
    write_png(&dir.path().join("s.png"), &img).unwrap();
    write_georef(&dir.path().join("s.json"), &img.georef()).unwrap();
    let o = run(&[
        "geo", "--tx", "40,40", "--rx", "40.001,40", "--raster", s(&dir.path().join("s.png")),
        "--georef", s(&dir.path().join("s.json")), "--out", s(&dir.path().join("o")),
    ]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
    let o = run(&["geo", "--tx", "40,200", "--rx", "40,40", "--out", s(&dir.path().join("o"))]);
    assert_eq!(o.status.code(), Some(2));
}
