use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

const TEST1: &str = r#"
scheme = "fvs"

[domain]
length = 5.0
cells = 35
ratio = 1.4

[time]
final = 2.0
steps = 20

[optimizer]
eps0 = 0.002
max_iters = 50

[target]
benchmark = "test1"
"#;

struct Table {
    comment: String,
    columns: Vec<String>,
    rows: Vec<Vec<f64>>,
}

impl Table {
    fn column(&self, name: &str) -> Vec<f64> {
        let k = self.columns.iter().position(|c| c == name).unwrap_or_else(|| panic!("no column {name}"));
        self.rows.iter().map(|r| r[k]).collect()
    }
}

fn read_table(path: &Path) -> Table {
    let text = fs::read_to_string(path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
    let mut lines = text.lines();
    let comment = lines.next().unwrap().to_string();
    let columns = lines.next().unwrap().split(',').map(String::from).collect();
    let rows = lines
        .map(|l| l.split(',').map(|v| v.parse().unwrap()).collect())
        .collect();
    Table { comment, columns, rows }
}

fn fraginv(args: &[&str], env_out: Option<&Path>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_fraginv"));
    cmd.args(args).env("RUST_LOG", "off").env_remove("FRAGINV_OUT");
    if let Some(p) = env_out {
        cmd.env("FRAGINV_OUT", p);
    }
    cmd.output().unwrap()
}

fn write_config(dir: &Path, text: &str) -> PathBuf {
    let path = dir.join("run.toml");
    fs::write(&path, text).unwrap();
    path
}

fn run_ok(args: &[&str]) -> Output {
    let out = fraginv(args, None);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    out
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn forward_writes_solution_and_moments() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), &TEST1.replace("\"fvs\"", "\"wfvs\""));
    let out = tmp.path().join("out");
    run_ok(&["forward", "--config", s(&cfg), "--out", s(&out)]);

    let sol = read_table(&out.join("solution.csv"));
    assert_eq!(sol.columns, ["x_center", "dx", "f_initial", "f_final"]);
    assert_eq!(sol.rows.len(), 35);
    assert!(sol.comment.starts_with("# fraginv config_sha256="));
    assert!(sol.comment.contains("R=5 I=35 ratio=1.4 T=2 N=20"));

    let mom = read_table(&out.join("moments.csv"));
    assert_eq!(mom.columns, ["t", "M0", "M1", "M2"]);
    assert_eq!(mom.rows.len(), 21);
    assert_eq!(mom.column("t")[20], 2.0);
    let m1 = mom.column("M1");
    for m in &m1 {
        assert!((m - m1[0]).abs() <= 1e-12 * m1[0]);
    }
    let m0 = mom.column("M0");
    assert!(m0.windows(2).all(|w| w[1] > w[0]));
}

#[test]
fn forward_without_steps_keeps_initial_datum() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), &TEST1.replace("steps = 20", "steps = 0"));
    let out = tmp.path().join("out");
    run_ok(&["forward", "--config", s(&cfg), "--out", s(&out)]);
    let sol = read_table(&out.join("solution.csv"));
    assert_eq!(sol.column("f_initial"), sol.column("f_final"));
    assert_eq!(read_table(&out.join("moments.csv")).rows.len(), 1);
}

#[test]
fn blowup_exits_3_and_leaves_no_partial_output() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(
        tmp.path(),
        &TEST1.replace("final = 2.0", "final = 1e300").replace("steps = 20", "steps = 2"),
    );
    let out = tmp.path().join("out");
    let res = fraginv(&["forward", "--config", s(&cfg), "--out", s(&out)], None);
    assert_eq!(res.status.code(), Some(3), "{}", String::from_utf8_lossy(&res.stderr));
    assert!(!out.join("solution.csv").exists());
    assert!(!out.join("moments.csv").exists());
}

#[test]
fn invalid_configs_exit_2_with_key_paths() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("out");
    let cases = [
        (TEST1.replace("steps = 20\n", ""), "time.steps"),
        (TEST1.replace("ratio = 1.4", "ratio = 0.9"), "domain.ratio"),
        (format!("{TEST1}\n[taylor]\netas = []\n"), "taylor.etas"),
        (TEST1.replace("benchmark = \"test1\"", "benchmark = \"test7\""), "target.benchmark"),
    ];
    for (text, key) in cases {
        let cfg = write_config(tmp.path(), &text);
        let res = fraginv(&["taylor", "--config", s(&cfg), "--out", s(&out)], None);
        assert_eq!(res.status.code(), Some(2));
        let err = String::from_utf8_lossy(&res.stderr);
        assert!(err.contains(key), "expected `{key}` in: {err}");
    }
    assert!(!out.exists());
}

#[test]
fn missing_config_file_exits_2() {
    let res = fraginv(&["forward", "--config", "/nonexistent/run.toml"], None);
    assert_eq!(res.status.code(), Some(2));
    let res = fraginv(&["invert"], None);
    assert_eq!(res.status.code(), Some(2));
}

#[test]
fn invert_writes_history_reconstruction_and_final_state() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), TEST1);
    let out = tmp.path().join("out");
    run_ok(&["invert", "--config", s(&cfg), "--out", s(&out)]);

    let hist = read_table(&out.join("history.csv"));
    assert_eq!(hist.columns, ["iter", "J", "E_target", "E_init"]);
    assert_eq!(hist.rows.len(), 51);
    assert_eq!(hist.column("iter"), (0..=50).map(f64::from).collect::<Vec<_>>());
    let j = hist.column("J");
    assert!(j.windows(2).all(|w| w[1] <= w[0]));

    let rec = read_table(&out.join("reconstruction.csv"));
    assert_eq!(rec.columns, ["x_center", "f0_exact_if_known", "f0_reconstructed"]);
    let exact: Vec<f64> = rec.column("x_center").iter().map(|x| (-x).exp()).collect();
    for (a, b) in rec.column("f0_exact_if_known").iter().zip(&exact) {
        assert!((a - b).abs() <= 1e-15);
    }

    let fin = read_table(&out.join("final_state.csv"));
    assert_eq!(fin.columns, ["x_center", "f_target", "f_final"]);
    let e_target = fin
        .column("f_target")
        .iter()
        .zip(fin.column("f_final"))
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    assert_eq!(e_target, hist.column("E_target")[50]);
}

#[test]
fn zero_iterations_give_single_history_row() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), &TEST1.replace("max_iters = 50", "max_iters = 0"));
    let out = tmp.path().join("out");
    run_ok(&["invert", "--config", s(&cfg), "--out", s(&out)]);
    assert_eq!(read_table(&out.join("history.csv")).rows.len(), 1);
}

#[test]
fn clipping_keeps_reconstruction_nonnegative() {
    let tmp = TempDir::new().unwrap();
    let text = TEST1
        .replace("max_iters = 50", "max_iters = 50\nclip_nonnegative = true")
        .replace("eps0 = 0.002", "eps0 = 0.005");
    let cfg = write_config(tmp.path(), &text);
    let out = tmp.path().join("out");
    run_ok(&["invert", "--config", s(&cfg), "--out", s(&out)]);
    let rec = read_table(&out.join("reconstruction.csv"));
    assert!(rec.column("f0_reconstructed").iter().all(|v| *v >= 0.0));
}

#[test]
fn taylor_table_rows_and_transpose_exactness() {
    let tmp = TempDir::new().unwrap();
    let text = TEST1.replace("max_iters = 50", "max_iters = 50\ngradient_kind = \"transpose\"");
    let cfg = write_config(tmp.path(), &text);
    let out = tmp.path().join("out");
    run_ok(&["taylor", "--config", s(&cfg), "--out", s(&out), "--scheme", "wfvs"]);
    let t = read_table(&out.join("taylor.csv"));
    assert_eq!(t.columns, ["eta", "remainder", "ratio"]);
    assert_eq!(t.column("eta"), [1e-1, 1e-2, 1e-3]);
    let ratios = t.column("ratio");
    for r in &ratios {
        assert!((r / ratios[0] - 1.0).abs() <= 1e-6, "{ratios:?}");
    }
    assert!(t.comment.contains("scheme=wfvs"));
}

#[test]
fn outputs_are_byte_identical_across_runs() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), TEST1);
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    for cmd in ["invert", "taylor", "forward"] {
        run_ok(&[cmd, "--config", s(&cfg), "--out", s(&a), "--seed", "7"]);
        run_ok(&[cmd, "--config", s(&cfg), "--out", s(&b), "--seed", "7"]);
    }
    let mut names: Vec<_> = fs::read_dir(&a).unwrap().map(|e| e.unwrap().file_name()).collect();
    names.sort();
    assert_eq!(names.len(), 6);
    for n in names {
        assert_eq!(fs::read(a.join(&n)).unwrap(), fs::read(b.join(&n)).unwrap(), "{n:?}");
    }
}

#[test]
fn seed_changes_taylor_direction() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), TEST1);
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    run_ok(&["taylor", "--config", s(&cfg), "--out", s(&a), "--seed", "1"]);
    run_ok(&["taylor", "--config", s(&cfg), "--out", s(&b), "--seed", "2"]);
    let ra = read_table(&a.join("taylor.csv"));
    let rb = read_table(&b.join("taylor.csv"));
    assert_ne!(ra.column("remainder"), rb.column("remainder"));
    assert_ne!(ra.comment, rb.comment);
}

#[test]
fn output_root_precedence() {
    let tmp = TempDir::new().unwrap();
    let text = format!("output_dir = \"{}\"\n{TEST1}", s(&tmp.path().join("from_config")));
    let cfg = write_config(tmp.path(), &text);
    let env_dir = tmp.path().join("from_env");
    let flag_dir = tmp.path().join("from_flag");

    let res = fraginv(&["forward", "--config", s(&cfg)], None);
    assert!(res.status.success());
    assert!(tmp.path().join("from_config/solution.csv").exists());

    let res = fraginv(&["forward", "--config", s(&cfg)], Some(&env_dir));
    assert!(res.status.success());
    assert!(env_dir.join("solution.csv").exists());

    let res = fraginv(&["forward", "--config", s(&cfg), "--out", s(&flag_dir)], Some(&env_dir));
    assert!(res.status.success());
    assert!(flag_dir.join("solution.csv").exists());
}

#[test]
fn csv_target_round_trip() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), TEST1);
    let out = tmp.path().join("out");
    run_ok(&["invert", "--config", s(&cfg), "--out", s(&out)]);
    let fin = read_table(&out.join("final_state.csv"));

    // feed the benchmark target back in as an external file
    let target: String = std::iter::once("x_center,f".to_string())
        .chain(
            fin.column("x_center")
                .iter()
                .zip(fin.column("f_target"))
                .map(|(x, f)| format!("{x:.16e},{f:.16e}")),
        )
        .collect::<Vec<_>>()
        .join("\n");
    fs::write(tmp.path().join("target.csv"), target).unwrap();
    let text = TEST1.replace(
        "benchmark = \"test1\"",
        "csv = \"target.csv\"\n\n[kernel.selection]\nkind = \"linear\"",
    );
    let cfg2 = tmp.path().join("csv.toml");
    fs::write(&cfg2, text).unwrap();
    let out2 = tmp.path().join("out2");
    run_ok(&["invert", "--config", s(&cfg2), "--out", s(&out2)]);
    let h1 = read_table(&out.join("history.csv"));
    let h2 = read_table(&out2.join("history.csv"));
    assert_eq!(h1.column("J"), h2.column("J"));
    assert!(h2.column("E_init").iter().all(|v| v.is_nan()));
}

#[test]
fn bench_runs_default_iterations() {
    let tmp = TempDir::new().unwrap();
    run_ok(&["bench", "test2", "fvs", "--out", s(tmp.path())]);
    let dir = tmp.path().join("test2");
    assert_eq!(read_table(&dir.join("fvs/history.csv")).rows.len(), 151);
    assert!(dir.join("fvs/reconstruction.csv").exists());
    assert!(dir.join("fvs/final_state.csv").exists());
    assert!(!dir.join("wfvs").exists());
    let report = fs::read_to_string(dir.join("report.txt")).unwrap();
    assert!(report.contains("fvs 150 "), "{report}");
}

#[test]
fn bench_without_scheme_runs_both() {
    let tmp = TempDir::new().unwrap();
    run_ok(&["bench", "test1", "--out", s(tmp.path())]);
    let dir = tmp.path().join("test1");
    for scheme in ["fvs", "wfvs"] {
        assert_eq!(read_table(&dir.join(scheme).join("history.csv")).rows.len(), 51);
    }
    let report = fs::read_to_string(dir.join("report.txt")).unwrap();
    assert_eq!(report.lines().count(), 4);
}

#[test]
fn bench_rejects_unknown_case_with_usage() {
    let tmp = TempDir::new().unwrap();
    let res = fraginv(&["bench", "test3", "--out", s(tmp.path())], None);
    assert_eq!(res.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&res.stderr).contains("Usage:"));
    let res = fraginv(&["bench", "test1", "fvs", "--scheme", "wfvs", "--out", s(tmp.path())], None);
    assert_eq!(res.status.code(), Some(2));
}

#[test]
fn shipped_configs_parse() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let c1 = fraginv::parse_config(&dir.join("test1.toml")).unwrap();
    assert_eq!((c1.domain.cells, c1.optimizer.eps0), (35, Some(0.002)));
    let c2 = fraginv::parse_config(&dir.join("test2.toml")).unwrap();
    assert_eq!((c2.domain.cells, c2.optimizer.max_iters), (25, Some(15)));
}
