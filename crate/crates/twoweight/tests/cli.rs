use std::path::Path;
use std::process::{Command, Output};

fn twoweight(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_twoweight")).args(args).current_dir(dir).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn verify_two_cell_instance() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("pair.txt"), "scale_exponent: 0\nsigma: 0.5 1\nw: 1.5 1\n").unwrap();
    let out = twoweight(&["verify", "pair.txt"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = stdout(&out);
    assert!(text.lines().any(|l| l.starts_with("pass") && l.contains("h_glob_le_c")), "{text}");
    assert!(!text.contains("fail"));

    let out = twoweight(&["norm", "pair.txt"], dir.path());
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!((v["value"].as_f64().unwrap() - 1.0).abs() < 1e-12);
}

#[test]
fn bad_input_exits_with_two() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("bad.txt"), "scale_exponent: 0\nw: 0.5 -1\n").unwrap();
    let out = twoweight(&["constants", "bad.txt"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("w[0].mass"), "{err}");
}

#[test]
fn ensemble_files_feed_the_report() {
    let dir = tempfile::tempdir().unwrap();
    let out = twoweight(&["ensemble", "--kind", "common-mass", "--n", "6", "--count", "2", "--seed", "4", "--out", "ens"], dir.path());
    assert!(out.status.success());
    let files: Vec<String> = stdout(&out).lines().map(str::to_string).collect();
    assert_eq!(files.len(), 2);

    let mut args = vec!["report", "--seed", "4", "--out", "from-files"];
    args.extend(files.iter().map(String::as_str));
    assert!(twoweight(&args, dir.path()).status.success());
    let gen = ["report", "--kind", "common-mass", "--n", "6", "--count", "2", "--seed", "4", "--out", "direct"];
    assert!(twoweight(&gen, dir.path()).status.success());

    // same measures, so the same constants; labels differ
    let read = |d: &str| std::fs::read_to_string(dir.path().join(d).join("report.csv")).unwrap();
    let strip = |t: String| t.lines().map(|l| l.split(',').skip(2).collect::<Vec<_>>().join(",")).collect::<Vec<_>>();
    assert_eq!(strip(read("from-files")), strip(read("direct")));
    assert!(dir.path().join("direct/summary.json").exists());
    assert!(dir.path().join("direct/timings.csv").exists());
}

#[test]
fn config_file_and_flags() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("run.toml"), "kind = \"lattice\"\nn = 4\ncount = 1\ngamma = 0.5\n").unwrap();
    let out = twoweight(&["--config", "run.toml", "--r", "2", "report", "--out", "rep"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("rep/summary.json")).unwrap()).unwrap();
    assert_eq!(summary["config"]["gamma"], 0.5);
    assert_eq!(summary["config"]["r"], 2);
    assert_eq!(summary["ensemble"]["kind"], "lattice");
}
