use nahm::models::{builtin_disc, builtin_model};
use serde_json::Value;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn nahm(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_nahm"))
        .args(args)
        .arg("--out")
        .arg(dir)
        .env_remove("OUTPUT_DIR")
        .output()
        .unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn summary(dir: &Path, cmd: &str) -> Value {
    serde_json::from_str(&std::fs::read_to_string(dir.join(format!("{cmd}.summary.json"))).unwrap()).unwrap()
}

fn config(dir: &Path, text: &str) -> PathBuf {
    let p = dir.join("run.toml");
    std::fs::write(&p, text).unwrap();
    p
}

fn checker() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scripts/check_summary.py")
}

#[test]
fn spectrum_passes_and_is_deterministic() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    assert_eq!(code(&nahm(a.path(), &["spectrum"])), 0);
    assert_eq!(code(&nahm(b.path(), &["spectrum", "--workers", "2"])), 0);
    assert_eq!(
        std::fs::read(a.path().join("spectrum.json")).unwrap(),
        std::fs::read(b.path().join("spectrum.json")).unwrap()
    );
    let (mut sa, mut sb) = (summary(a.path(), "spectrum"), summary(b.path(), "spectrum"));
    assert_eq!(sa["pass"], true);
    sa["header"]["timestamp_unix"] = Value::Null;
    sb["header"]["timestamp_unix"] = Value::Null;
    assert_eq!(sa, sb);
}

#[test]
fn unknown_key_is_a_config_error_with_its_line() {
    let d = tempfile::tempdir().unwrap();
    let cfg = config(d.path(), "[disc]\nt_max = 1.5\nbogus = 3\n");
    let o = nahm(d.path(), &["spectrum", "--config", cfg.to_str().unwrap()]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("line 3"), "{}", stderr(&o));
    assert!(stderr(&o).contains("bogus"));
}

#[test]
fn invalid_values_name_the_field() {
    let d = tempfile::tempdir().unwrap();
    let cfg = config(d.path(), "# coarse\ndisc.n_t = 10\n");
    let o = nahm(d.path(), &["spectrum", "--config", cfg.to_str().unwrap()]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("line 2, field `disc.n_t`"), "{}", stderr(&o));

    let o = nahm(d.path(), &["spectrum", "--set", "disc.t_max=1.2", "--set", "model.t_flat=0.5"]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("disc.t_max"), "{}", stderr(&o));

    let o = nahm(d.path(), &["spectrum", "--set", "output.format=\"xml\""]);
    assert_eq!(code(&o), 2);
}

#[test]
fn scan_box_touching_the_singular_set_is_rejected() {
    let d = tempfile::tempdir().unwrap();
    let w = builtin_model().w_minus;
    let o = nahm(d.path(), &["scan", "--set", &format!("scan.origin=[{}, {}, {}]", w[0], w[1], w[2])]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("scan.origin"));
}

#[test]
fn compute_errors_exit_3_with_the_error_name() {
    let d = tempfile::tempdir().unwrap();
    let w = builtin_model().w_minus;
    let o = nahm(d.path(), &["index", "--set", &format!("index.twists=[[{}, {}, {}]]", w[0], w[1], w[2])]);
    assert_eq!(code(&o), 3);
    assert!(stderr(&o).contains("CrossingAtBoundary"), "{}", stderr(&o));
}

#[test]
fn failing_check_exits_1_and_is_recorded() {
    let d = tempfile::tempdir().unwrap();
    let o = nahm(d.path(), &["scan", "--set", "scan.n=[2, 2, 2]"]);
    assert_eq!(code(&o), 1);
    let s = summary(d.path(), "scan");
    assert_eq!(s["pass"], false);
    let failed: Vec<&str> =
        s["checks"].as_array().unwrap().iter().filter(|c| c["pass"] == false).map(|c| c["name"].as_str().unwrap()).collect();
    assert_eq!(failed, ["nonzero_rank"]);
    let lines = std::fs::read_to_string(d.path().join("monopole.jsonl")).unwrap();
    assert_eq!(lines.lines().count(), 1 + 8);
}

#[test]
fn output_dir_precedence() {
    let (env_dir, flag_dir) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let run = |out: Option<&Path>| {
        let mut c = Command::new(env!("CARGO_BIN_EXE_nahm"));
        c.arg("spectrum").env("OUTPUT_DIR", env_dir.path());
        if let Some(o) = out {
            c.arg("--out").arg(o);
        }
        c.output().unwrap()
    };
    assert_eq!(code(&run(None)), 0);
    assert!(env_dir.path().join("spectrum.summary.json").exists());
    std::fs::remove_file(env_dir.path().join("spectrum.summary.json")).unwrap();
    assert_eq!(code(&run(Some(flag_dir.path()))), 0);
    assert!(flag_dir.path().join("spectrum.summary.json").exists());
    assert!(!env_dir.path().join("spectrum.summary.json").exists());
}

#[test]
fn csv_tables_and_weight_grid() {
    let d = tempfile::tempdir().unwrap();
    let o = nahm(
        d.path(),
        &["grid", "--format", "csv", "--set", "grid.mode=\"delta\"", "--set", "grid.delta_plus=[-1.0, 1.0, 5]", "--set", "grid.delta_minus=[0.0, 0.0, 1]"],
    );
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let table = std::fs::read_to_string(d.path().join("grid.csv")).unwrap();
    assert!(table.starts_with("delta_minus,delta_plus,on_wall"));
    assert_eq!(table.lines().count(), 1 + 5);
    assert!(d.path().join("walls.csv").exists());
}

#[test]
fn saved_path_is_accepted_as_model() {
    let d = tempfile::tempdir().unwrap();
    let disc = builtin_disc();
    let stem = d.path().join("model");
    nahm::cache::save_path(&stem, &builtin_model().to_connection(&disc).unwrap()).unwrap();
    let cfg = config(d.path(), &format!("model.kind = \"file\"\nmodel.path = {:?}\n", stem.to_str().unwrap()));
    let o = nahm(d.path(), &["index", "--config", cfg.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let rows: Value = serde_json::from_str(&std::fs::read_to_string(d.path().join("index.json")).unwrap()).unwrap();
    assert_eq!(rows["rows"][0]["dim_ker"], 1);

    let bad = config(d.path(), "model.kind = \"file\"\nmodel.path = \"/nonexistent/stem\"\n");
    assert_eq!(code(&nahm(d.path(), &["index", "--config", bad.to_str().unwrap()])), 2);
}

#[test]
fn checker_script_agrees_with_the_summaries() {
    if Command::new("python3").arg("--version").output().is_err() {
        eprintln!("python3 not found; skipping");
        return;
    }
    let d = tempfile::tempdir().unwrap();
    for (cmd, extra) in [("spectrum", vec![]), ("audit", vec![]), ("index", vec!["--format", "csv"]), ("scan", vec!["--set", "scan.n=[2, 2, 2]"])] {
        let mut args = vec![cmd];
        args.extend(extra);
        let c = code(&nahm(d.path(), &args));
        assert!(c == 0 || c == 1, "{cmd} exited {c}");
    }
    let o = Command::new("python3").arg(checker()).arg(d.path()).output().unwrap();
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stdout));
}
