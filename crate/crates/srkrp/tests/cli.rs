use std::path::Path;
use std::process::{Command, Output};

use srkrp_core::linalg::{parse_triples, DenseMatrix};

fn srkrp(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_srkrp"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("spawn srkrp")
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

/// Rows of a CSV file as maps from column name to field.
fn read_csv(path: &Path) -> Vec<Vec<(String, String)>> {
    let text = std::fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    let header: Vec<String> = lines.next().unwrap().split(',').map(String::from).collect();
    lines
        .map(|l| header.iter().cloned().zip(l.split(',').map(String::from)).collect())
        .collect()
}

fn field<'a>(row: &'a [(String, String)], key: &str) -> &'a str {
    &row.iter().find(|(k, _)| k == key).unwrap().1
}

#[test]
fn custom_tiny_instance_matches_factorial_law() {
    let dir = tempfile::tempdir().unwrap();
    let out = srkrp(
        &[
            "run", "custom", "--m", "2", "--n", "2", "--workers", "4", "--stragglers", "0",
            "--udist", "simplest(1)", "--vdist", "simplest(1)", "--trials-max", "20000",
            "--target-failures", "20000", "--seed", "7", "-o", "tiny.csv",
        ],
        dir.path(),
    );
    assert!(out.status.success(), "{}", stderr(&out));
    let rows = read_csv(&dir.path().join("tiny.csv"));
    assert_eq!(rows.len(), 1);
    let p_f: f64 = field(&rows[0], "p_f").parse().unwrap();
    assert!((p_f - 0.90625).abs() < 0.01, "p_f {p_f}");
    assert_eq!(field(&rows[0], "trials"), "20000");
    assert!(stderr(&out).contains("# seed = 7"));
}

#[test]
fn same_seed_gives_identical_csv_with_full_parameters() {
    let dir = tempfile::tempdir().unwrap();
    let args = |name: &'static str| {
        [
            "run", "fig5", "--theta", "1,1.5", "--trials-max", "300", "--seed", "9", "--jobs", "2",
            "-o", name,
        ]
    };
    for name in ["a.csv", "b.csv"] {
        let out = srkrp(&args(name), dir.path());
        assert!(out.status.success(), "{}", stderr(&out));
    }
    let a = std::fs::read(dir.path().join("a.csv")).unwrap();
    let b = std::fs::read(dir.path().join("b.csv")).unwrap();
    assert_eq!(a, b);

    let rows = read_csv(&dir.path().join("a.csv"));
    assert_eq!(rows.len(), 6);
    let mut extras: Vec<&str> = rows.iter().map(|r| field(r, "R")).collect();
    extras.sort_unstable();
    extras.dedup();
    assert_eq!(extras, ["0", "1", "2"]);
    for row in &rows {
        for key in ["K", "N", "S", "R", "seed", "m", "n", "udist", "vdist", "coeff_dist", "norm", "log_base"] {
            assert!(!field(row, key).is_empty(), "{key} missing");
        }
    }
}

#[test]
fn matmul_writes_the_product() {
    let dir = tempfile::tempdir().unwrap();
    let a = "4 4 6\n0 0 1.5\n1 1 -2\n2 3 0.25\n3 2 4\n0 3 1\n2 0 3\n";
    let b = "4 2 5\n0 0 1\n1 1 2\n2 0 -1\n3 1 0.5\n3 0 2\n";
    std::fs::write(dir.path().join("a.mtx"), a).unwrap();
    std::fs::write(dir.path().join("b.mtx"), b).unwrap();
    let out = srkrp(
        &["run", "matmul", "--a", "a.mtx", "--b", "b.mtx", "--m", "2", "--n", "2", "--stragglers", "1", "-o", "c.mtx"],
        dir.path(),
    );
    assert!(out.status.success(), "{}", stderr(&out));

    let a = parse_triples(a).unwrap().to_dense();
    let b = parse_triples(b).unwrap().to_dense();
    let want = a.transpose().matmul(&b).unwrap();
    let got: DenseMatrix =
        parse_triples(&std::fs::read_to_string(dir.path().join("c.mtx")).unwrap()).unwrap().to_dense();
    assert_eq!(got.shape(), want.shape());
    for (g, w) in got.as_slice().iter().zip(want.as_slice()) {
        assert!((g - w).abs() < 1e-10, "{g} vs {w}");
    }
}

#[test]
fn usage_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    for args in [
        &["run", "fig9"][..],
        &["run", "custom", "--bogus"],
        &["run", "custom", "--theta", "abc"],
        &["run", "fig7", "--w-star", "16"],
    ] {
        let out = srkrp(args, dir.path());
        assert_eq!(out.status.code(), Some(2), "{args:?}: {}", stderr(&out));
    }
}

#[test]
fn config_errors_name_line_and_key() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("run.toml"), "experiment = \"custom\"\nseed = 3\nthetta = 1.0\n").unwrap();
    let out = srkrp(&["run", "--config", "run.toml"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    let err = stderr(&out);
    assert!(err.contains("thetta") && err.contains("line 3"), "{err}");
}

#[test]
fn config_sweep_and_flag_precedence() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("run.toml"),
        "experiment = \"custom\"\nm = 4\nn = 4\ntheta = [1.0, 1.5]\ntrials_max = 100\nseed = 3\n",
    )
    .unwrap();
    let out = srkrp(&["run", "--config", "run.toml", "--seed", "4", "-o", "s.csv"], dir.path());
    assert!(out.status.success(), "{}", stderr(&out));
    let rows = read_csv(&dir.path().join("s.csv"));
    let thetas: Vec<&str> = rows.iter().map(|r| field(r, "theta")).collect();
    assert_eq!(thetas, ["1", "1.5"]);
    assert!(stderr(&out).contains("# seed = 4"));
}

#[test]
fn unwritable_output_exits_with_one() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("blocker"), "").unwrap();
    let out = srkrp(
        &["run", "custom", "--trials-max", "10", "-o", "blocker/out.csv"],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(1), "{}", stderr(&out));
}
