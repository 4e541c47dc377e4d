use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn workspace() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn compliance(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_compliance"))
        .args(args)
        .env("RUST_LOG", "off")
        .output()
        .expect("binary runs")
}

fn demo(name: &str) -> String {
    workspace().join("configs").join(format!("{name}.demo.toml")).display().to_string()
}

fn write_config(dir: &Path, body: &str) -> String {
    let p = dir.join("config.toml");
    std::fs::write(&p, body).unwrap();
    p.display().to_string()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn files(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    std::fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().to_string_lossy().into_owned(), std::fs::read(e.path()).unwrap())
        })
        .collect()
}

fn manifest(dir: &Path) -> serde_json::Value {
    serde_json::from_slice(&std::fs::read(dir.join("manifest.json")).unwrap()).unwrap()
}

#[test]
fn list_names_every_experiment() {
    let o = compliance(&["list"]);
    assert!(o.status.success());
    let text = String::from_utf8(o.stdout).unwrap();
    for name in [
        "spring-curves",
        "hopper-sweep",
        "resonance-map",
        "track",
        "vibrobot",
        "entrain",
        "kuramoto",
        "quad-communities",
        "modes",
        "identify",
        "nav-sim",
        "nav-fuse",
        "correlate",
    ] {
        let line = text.lines().find(|l| l.starts_with(name)).unwrap_or_else(|| panic!("{name} missing"));
        assert!(line.contains("Fig. "), "{line}");
    }
    assert!(text.lines().any(|l| l.starts_with("resonance-map") && l.contains("Fig. 9")));
    assert!(text.contains("OUT-OF-SCOPE"));
}

#[test]
fn missing_block_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "experiment = \"track\"\nseed = 1\n");
    let o = compliance(&["run", "--config", &cfg, "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("[track]"), "{}", stderr(&o));
    assert!(!dir.path().join("track").exists());
}

#[test]
fn unknown_keys_are_named() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let cases = [
        ("experiment = \"modes\"\nverbose = true\n[modes]\n", "`verbose`"),
        ("experiment = \"modes\"\n[modes]\nzetta = 0.1\n", "`zetta`"),
        ("experiment = \"modes\"\n[modes.plate]\nmas = 2.0\n", "plate.mas"),
        ("experiment = \"nav-sim\"\n[nav-sim.scenario.noise]\ngyro = 0.1\n", "scenario.noise.gyro"),
    ];
    for (body, key) in cases {
        let cfg = write_config(dir.path(), body);
        let o = compliance(&["run", "--config", &cfg, "--out", out]);
        assert_eq!(o.status.code(), Some(2), "{body}");
        assert!(stderr(&o).contains(key), "{key}: {}", stderr(&o));
    }
    let o = compliance(&["run", "modes", "--out", out, "--override", "modes.plate.springs=3"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("plate.springs"), "{}", stderr(&o));
}

#[test]
fn invalid_values_are_config_errors() {
    let dir = tempfile::tempdir().unwrap();
    let o = compliance(&["run", "modes", "--out", dir.path().to_str().unwrap(), "--override", "modes.plate.mass=-1"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("[modes]"));
}

#[test]
fn runtime_failure_exits_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("streams");
    std::fs::create_dir(&input).unwrap();
    std::fs::write(input.join("imu.csv"), "t,ax,ay,gz\n0,0,0,0\n0,0,0,0\n").unwrap();
    let o = compliance(&[
        "run",
        "nav-fuse",
        "--out",
        dir.path().to_str().unwrap(),
        "--override",
        &format!("nav-fuse.input=\"{}\"", input.display()),
    ]);
    assert_eq!(o.status.code(), Some(1), "{}", stderr(&o));
}

#[test]
fn spring_curves_match_the_golden_file() {
    let dir = tempfile::tempdir().unwrap();
    let o = compliance(&["run", "--config", &demo("spring-curves"), "--out", dir.path().to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let got = std::fs::read(dir.path().join("spring-curves/curves.csv")).unwrap();
    let want = std::fs::read(workspace().join("crates/cli/tests/golden/spring-curves.csv")).unwrap();
    assert!(got == want, "curves.csv differs from the golden file");
}

// Isothermal two-chamber law evaluated independently of the library.
fn closed_form(c_v: f64, x: f64) -> f64 {
    let (a_v, a_r, p_v, p_r, v_v, v_r, v_t, c_r) = (7.9e-5, 6.6e-5, 2.5e5, 3.0e5, 6.3e-6, 0.0, 6.3e-6, 4.0e-6);
    let upper = p_v * (v_v + c_v) / (c_v + v_t - a_v * x);
    let rear = p_r * (v_r + c_r) / (a_v * x + c_r);
    a_v * upper - a_r * rear
}

#[test]
fn golden_file_agrees_with_the_closed_form() {
    let text = std::fs::read_to_string(workspace().join("crates/cli/tests/golden/spring-curves.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("dead_volume,x,force,stiffness"));
    let mut curves: BTreeMap<String, Vec<(f64, f64, f64)>> = BTreeMap::new();
    for l in lines {
        let v: Vec<f64> = l.split(',').map(|s| s.parse().unwrap()).collect();
        let want = closed_form(v[0], v[1]);
        assert!((v[2] - want).abs() <= 1e-12 * want.abs().max(1.0), "{l}: {want}");
        let h = 1e-7;
        let slope = (closed_form(v[0], v[1] + h) - closed_form(v[0], v[1] - h)) / (2.0 * h);
        assert!((v[3] - slope).abs() < 1e-5 * slope.abs(), "{l}: {slope}");
        curves.entry(l.split(',').next().unwrap().to_string()).or_default().push((v[1], v[2], v[3]));
    }
    assert_eq!(curves.len(), 5);
    for c in curves.values() {
        assert!((c[0].1 + 0.05).abs() < 1e-9);
    }
    // Small dead volume bends upward at large compression, large dead
    // volume bends downward everywhere.
    let second = |c: &[(f64, f64, f64)], i: usize| c[i + 1].1 - 2.0 * c[i].1 + c[i - 1].1;
    let hard = &curves["0"];
    let soft = &curves["0.00005"];
    assert!((15..hard.len() - 1).all(|i| second(hard, i) > 0.0));
    assert!((1..soft.len() - 1).all(|i| second(soft, i) < 0.0));
}

#[test]
fn same_config_twice_gives_identical_artifacts() {
    for name in ["modes", "kuramoto", "identify", "nav-fuse"] {
        let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
        for d in [&a, &b] {
            let o = compliance(&["run", "--config", &demo(name), "--out", d.path().to_str().unwrap(), "--jobs", "2"]);
            assert!(o.status.success(), "{name}: {}", stderr(&o));
        }
        let (fa, fb) = (files(&a.path().join(name)), files(&b.path().join(name)));
        assert_eq!(fa.keys().collect::<Vec<_>>(), fb.keys().collect::<Vec<_>>());
        for (k, v) in &fa {
            if k != "manifest.json" {
                assert!(v == &fb[k], "{name}/{k} differs");
            }
        }
        let strip = |mut m: serde_json::Value| {
            m.as_object_mut().unwrap().remove("wall_time_s");
            m["config"].as_object_mut().unwrap().remove("output");
            m
        };
        assert_eq!(strip(manifest(&a.path().join(name))), strip(manifest(&b.path().join(name))));
    }
}

#[test]
fn manifest_echoes_the_resolved_config() {
    let dir = tempfile::tempdir().unwrap();
    let o = compliance(&[
        "run",
        "--config",
        &demo("identify"),
        "--out",
        dir.path().to_str().unwrap(),
        "--seed",
        "11",
        "--override",
        "identify.noise=0.02",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let m = manifest(&dir.path().join("identify"));
    assert_eq!(m["seed"], 11);
    assert_eq!(m["config"]["identify"]["noise"], 0.02);
    assert_eq!(m["config"]["identify"]["front"]["m_eff"], 0.6);
    assert!(m["wall_time_s"].as_f64().unwrap() >= 0.0);
    assert!(m["version"].is_string());
    let csv: Vec<&serde_json::Value> = m["artifacts"].as_array().unwrap().iter().filter(|a| a["file"].as_str().unwrap().ends_with(".csv")).collect();
    assert!(!csv.is_empty());
    for a in csv {
        let body = std::fs::read_to_string(dir.path().join("identify").join(a["file"].as_str().unwrap())).unwrap();
        let header: Vec<&str> = body.lines().next().unwrap().split(',').collect();
        let documented: Vec<&str> = a["columns"].as_array().unwrap().iter().map(|c| c["name"].as_str().unwrap()).collect();
        assert_eq!(header, documented);
    }
}

#[test]
fn seed_changes_stochastic_output() {
    let run = |seed: &str| {
        let dir = tempfile::tempdir().unwrap();
        let o = compliance(&["run", "--config", &demo("identify"), "--out", dir.path().to_str().unwrap(), "--seed", seed]);
        assert!(o.status.success());
        std::fs::read(dir.path().join("identify/responses.csv")).unwrap()
    };
    assert_ne!(run("1"), run("2"));
}
