use std::io::Write;
use std::process::{Command, Output};

use tempfile::NamedTempFile;

fn lorpe(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lorpe"))
        .args(args)
        .env_remove("LORPE_THREADS")
        .output()
        .expect("binary runs")
}

fn data_file(lines: &[String]) -> NamedTempFile {
    let mut f = NamedTempFile::new().unwrap();
    for l in lines {
        writeln!(f, "{l}").unwrap();
    }
    f
}

/// Skewed sample: exponential quantiles at the midpoints of `n` equal cells.
fn skewed(n: usize) -> Vec<String> {
    (0..n)
        .map(|i| {
            let p = (i as f64 + 0.5) / n as f64;
            format!("{}", -(1.0 - p).ln() * 100.0)
        })
        .collect()
}

fn csv_columns(out: &[u8]) -> (Vec<String>, Vec<Vec<f64>>) {
    let text = String::from_utf8(out.to_vec()).unwrap();
    let mut lines = text.lines();
    let header = lines.next().unwrap().split(',').map(str::to_string).collect();
    let rows = lines.map(|l| l.split(',').map(|v| v.parse().unwrap()).collect()).collect();
    (header, rows)
}

fn trapezoid(rows: &[Vec<f64>]) -> f64 {
    rows.windows(2).map(|w| 0.5 * (w[1][0] - w[0][0]) * (w[1][1] + w[0][1])).sum()
}

#[test]
fn empty_file_exits_2() {
    let f = data_file(&[]);
    let out = lorpe(&["fit", f.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn unparsable_line_exits_2_with_line_number() {
    let f = data_file(&["1.0".into(), "2.0".into(), "oops".into()]);
    let out = lorpe(&["fit", f.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 3"));
}

#[test]
fn single_point_plugin_exits_3() {
    let f = data_file(&["0.7".into()]);
    let out = lorpe(&["fit", f.path().to_str().unwrap(), "--method", "plugin"]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("degenerate sample"));
}

#[test]
fn bad_flag_exits_1() {
    assert_eq!(lorpe(&["simulate", "--dist", "exp1", "--bogus"]).status.code(), Some(1));
    assert_eq!(lorpe(&["simulate", "--dist", "nosuch"]).status.code(), Some(1));
    assert_eq!(lorpe(&["fit", "/nonexistent/data.txt"]).status.code(), Some(1));
    assert_eq!(lorpe(&["--help"]).status.code(), Some(0));
}

#[test]
fn missing_fixed_parameters_exit_1() {
    let out = lorpe(&["simulate", "--dist", "exp1", "--n", "20", "--reps", "2"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn simulate_is_deterministic() {
    let args = ["simulate", "--dist", "exp1", "--n", "100", "--reps", "40", "--M", "2", "--h", "4.1", "--seed", "7"];
    let a = lorpe(&args);
    let b = lorpe(&args);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
    let (header, rows) = {
        let text = String::from_utf8(a.stdout).unwrap();
        let mut lines = text.lines().map(str::to_string);
        (lines.next().unwrap(), lines.collect::<Vec<_>>())
    };
    assert_eq!(header, "distribution,n,estimator,M,h,alpha,reps,log10_mise,se,seed");
    assert_eq!(rows.len(), 1);
    assert!(rows[0].starts_with("exp1,100,lorpe,2.0,4.1,,40,"));
    assert!(rows[0].ends_with(",7"));
}

#[test]
fn simulate_thread_count_does_not_change_output() {
    let args = ["simulate", "--dist", "truncnorm0", "--n", "50", "--reps", "12", "--estimator", "kde-plugin", "--mirror"];
    let one = lorpe(&[&args[..], &["--threads", "1"]].concat());
    let two = lorpe(&[&args[..], &["--threads", "2"]].concat());
    assert!(one.status.success());
    assert_eq!(one.stdout, two.stdout);
}

#[test]
fn fit_rlcv_integrates_to_one() {
    let f = data_file(&skewed(86));
    let out = lorpe(&["fit", f.path().to_str().unwrap(), "--method", "rlcv", "--alpha", "0.5"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let (header, rows) = csv_columns(&out.stdout);
    assert_eq!(header, ["grid", "value"]);
    assert!((trapezoid(&rows) - 1.0).abs() < 1e-9);
    assert!(rows.iter().all(|r| r[1] >= 0.0));
    let echo = String::from_utf8_lossy(&out.stderr);
    assert!(echo.contains("method=rlcv") && echo.contains("h=") && echo.contains("M="));
}

#[test]
fn fit_baselines_integrate_to_one() {
    let f = data_file(&skewed(200));
    for est in ["kde", "osde"] {
        let out = lorpe(&["fit", f.path().to_str().unwrap(), "--estimator", est]);
        assert!(out.status.success(), "{est}: {}", String::from_utf8_lossy(&out.stderr));
        let (_, rows) = csv_columns(&out.stdout);
        assert!((trapezoid(&rows) - 1.0).abs() < 1e-9, "{est}");
    }
}

#[test]
fn tune_writes_score_table() {
    let f = data_file(&skewed(60));
    let path = f.path().to_str().unwrap();
    let out = lorpe(&["tune", path, "--method", "lscv", "--h-grid", "20,40,80", "--m-grid", "0,1,2"]);
    assert!(out.status.success());
    let (header, rows) = csv_columns(&out.stdout);
    assert_eq!(header, ["h", "M", "score"]);
    assert_eq!(rows.len(), 9);
    let out = lorpe(&["tune", path]);
    let (header, rows) = csv_columns(&out.stdout);
    assert_eq!(header, ["r", "amise", "h", "M"]);
    assert_eq!(rows.len(), 4);
}

#[test]
fn effkernel_near_boundary_is_asymmetric() {
    let out = lorpe(&["effkernel", "--kernel", "gauss", "--M", "4", "--h", "0.1", "--xfit", "0", "--support", "0,1", "--points", "4001"]);
    assert!(out.status.success());
    let (header, rows) = csv_columns(&out.stdout);
    assert_eq!(header, ["u", "keff"]);
    // fit point on the left end: data lie at u = (x_fit - x)/h <= 0 only
    assert!(rows.iter().all(|r| r[0] <= 1e-12));
    let mass: f64 = trapezoid(&rows);
    assert!((mass - 1.0).abs() < 1e-4, "{mass}");
}

#[test]
fn effkernel_polys_table_and_json() {
    let out = lorpe(&["--format", "json", "effkernel", "--M", "2", "--polys", "--points", "5"]);
    assert!(out.status.success());
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let rows = v.as_array().unwrap();
    assert_eq!(rows.len(), 5);
    let keys: Vec<&str> = rows[0].as_object().unwrap().keys().map(String::as_str).collect();
    assert_eq!(keys, ["y", "weight", "P0", "P1", "P2"]);
}

#[test]
fn oracle_writes_surface() {
    let out = lorpe(&[
        "oracle", "--dist", "truncnorm0", "--n", "50", "--reps", "4", "--h-points", "3", "--m-max", "2",
    ]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(text.lines().count(), 1 + 3 * 3);
    assert!(String::from_utf8_lossy(&out.stderr).contains("best M="));
}
