use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_tbt"))
}

const CONFIG: &str = r#"
[system]
n = 1
m = 1
a = [[1.0]]
b = [[1.0]]
dt = 1.0
state_box = [[-5.0, 5.0]]

[control]
bounds = [[-1.0, 1.0]]

[problem]
x0 = [0.0]
horizon = 4
r = [1.0]
spec = "spec.tbt"
"#;

#[test]
fn broken_spec_exits_2() {
    let tmp = tempfile::tempdir().unwrap();
    std::fs::write(tmp.path().join("spec.tbt"), "pred p := garbage\n").unwrap();
    let cfg = tmp.path().join("run.toml");
    std::fs::write(&cfg, CONFIG).unwrap();
    let status = bin()
        .args(["encode", "--config", cfg.to_str().unwrap()])
        .arg("--out")
        .arg(tmp.path().join("out"))
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(2));
}

#[test]
fn missing_config_exits_2() {
    let status = bin().args(["encode", "--config", "/nonexistent.toml"]).status().unwrap();
    assert_eq!(status.code(), Some(2));
}

#[test]
fn encode_is_deterministic() {
    let tmp = tempfile::tempdir().unwrap();
    std::fs::write(
        tmp.path().join("spec.tbt"),
        "pred goal := [1] *x >= 1 (delta 0.25);\nformula F[0,4] goal ; at 0\n",
    )
    .unwrap();
    let cfg = tmp.path().join("run.toml");
    std::fs::write(&cfg, CONFIG).unwrap();
    let mut lp = Vec::new();
    for dir in ["a", "b"] {
        let out = tmp.path().join(dir);
        let status = bin()
            .args(["encode", "--config", cfg.to_str().unwrap()])
            .arg("--out")
            .arg(&out)
            .status()
            .unwrap();
        assert!(status.success());
        lp.push(std::fs::read_to_string(out.join("model.lp")).unwrap());
    }
    assert_eq!(lp[0], lp[1]);
}

#[test]
fn monitor_roundtrip() {
    let tmp = tempfile::tempdir().unwrap();
    let spec = tmp.path().join("spec.tbt");
    std::fs::write(&spec, "pred goal := [1] *x >= 1 (delta 0.25);\nformula F[0,3] goal ; at 0\n")
        .unwrap();
    let trace = tmp.path().join("trace.csv");
    std::fs::write(&trace, "t,x1\n0,0\n1,0.5\n2,1.5\n3,2.0\n").unwrap();
    let out = bin()
        .args(["monitor", "--spec", spec.to_str().unwrap(), "--trace", trace.to_str().unwrap()])
        .arg("--matrix")
        .arg("--out")
        .arg(tmp.path().join("out"))
        .output()
        .unwrap();
    assert!(out.status.success());
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("verdict: T"), "unexpected output: {stdout}");
    let matrix = std::fs::read_to_string(tmp.path().join("out/verdicts.csv")).unwrap();
    assert!(matrix.lines().count() > 4);
}
