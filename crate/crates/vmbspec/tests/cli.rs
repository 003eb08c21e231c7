use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("vmbspec-cli-{}-{name}", std::process::id()));
    let _ = std::fs::remove_dir_all(&dir);
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn run(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_vmbspec")).current_dir(dir).args(args).output().unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn read_csv(path: &Path) -> (Vec<String>, Vec<Vec<String>>) {
    let text = std::fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    let header = lines.next().unwrap().split(',').map(String::from).collect();
    // detail fields may contain commas inside quotes; only the last column is inspected
    let rows = lines.map(|l| l.split(',').map(String::from).collect()).collect();
    (header, rows)
}

fn assert_hash_column(path: &Path) -> String {
    let (header, rows) = read_csv(path);
    assert_eq!(header.last().unwrap(), "config_hash", "{path:?}");
    assert!(!rows.is_empty(), "{path:?} has no rows");
    let h = rows[0].last().unwrap().clone();
    assert_eq!(h.len(), 16);
    assert!(rows.iter().all(|r| r.last().unwrap() == &h));
    h
}

#[test]
fn usage_errors_exit_with_two() {
    let d = scratch("usage");
    assert_eq!(code(&run(&d, &["--help"])), 0);
    assert_eq!(code(&run(&d, &["frobnicate"])), 2);
    assert_eq!(code(&run(&d, &["coeffs", "--no-such-flag"])), 2);
    let o = run(&d, &["gap", "--n", "1"]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("n_per_axis"), "{}", stderr(&o));
    assert_eq!(code(&run(&d, &["branch", "--which", "nope"])), 2);
}

#[test]
fn config_errors_name_file_and_line() {
    let d = scratch("config");
    std::fs::write(d.join("bad.toml"), "[grid]\nn_per_axis = 6\nrefine_n = \"eight\"\n").unwrap();
    let o = run(&d, &["--config", "bad.toml", "coeffs"]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("bad.toml:3"), "{}", stderr(&o));

    std::fs::write(d.join("unknown.toml"), "[grid]\nn_per_axis = 6\n\n[run]\ncolour = 1\n").unwrap();
    let o = run(&d, &["--config", "unknown.toml", "gap"]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("unknown.toml:5"), "{}", stderr(&o));

    let o = run(&d, &["--config", "missing.toml", "gap"]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("missing.toml"));
}

#[test]
fn coeffs_are_reproducible_and_hash_the_configuration() {
    let d = scratch("coeffs");
    std::fs::write(d.join("c.toml"), "[grid]\nn_per_axis = 6\nrefine_n = 8\n").unwrap();
    let o = run(&d, &["--config", "c.toml", "coeffs"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let values = |p: &Path| -> Vec<Vec<String>> { read_csv(p).1.into_iter().map(|r| r[..3].to_vec()).collect() };
    let first = std::fs::read(d.join("coeffs.csv")).unwrap();
    let (header, rows) = read_csv(&d.join("coeffs.csv"));
    assert_eq!(header, ["name", "value", "refinement_delta", "config_hash"]);
    assert_eq!(rows.len(), 10);
    let h1 = assert_hash_column(&d.join("coeffs.csv"));

    assert_eq!(code(&run(&d, &["--config", "c.toml", "coeffs"])), 0);
    assert_eq!(std::fs::read(d.join("coeffs.csv")).unwrap(), first);
    // the thread count is part of the hashed configuration but not of the numbers
    let v1 = values(&d.join("coeffs.csv"));
    assert_eq!(code(&run(&d, &["--config", "c.toml", "--threads", "1", "coeffs"])), 0);
    assert_eq!(values(&d.join("coeffs.csv")), v1);

    // a flag override changes the hash
    assert_eq!(code(&run(&d, &["--config", "c.toml", "--n", "7", "coeffs"])), 0);
    assert_ne!(assert_hash_column(&d.join("coeffs.csv")), h1);
}

#[test]
fn spectrum_is_sorted_by_real_part() {
    let d = scratch("spectrum");
    let o = run(&d, &["spectrum", "--n", "6", "--species", "one", "--s", "0.5"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let (header, rows) = read_csv(&d.join("spectrum.csv"));
    assert_eq!(header, ["s", "index", "re_lambda", "im_lambda", "residual", "config_hash"]);
    assert_eq!(rows.len(), 6 * 6 * 6 + 4);
    let re: Vec<f64> = rows.iter().map(|r| r[2].parse().unwrap()).collect();
    assert!(re.windows(2).all(|w| w[0] >= w[1]));
    assert!(re[0] < 0.0);
    assert_hash_column(&d.join("spectrum.csv"));
}

#[test]
fn branch_and_gap_write_their_tables() {
    let d = scratch("branch");
    let o = run(&d, &["branch", "--which", "two_low1", "--n", "6", "--smin", "0.005", "--smax", "0.02", "--steps", "3"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let (header, rows) = read_csv(&d.join("branch.csv"));
    assert_eq!(header, ["s", "re_lambda", "im_lambda", "residual", "converged", "multiplicity", "config_hash"]);
    assert_eq!(rows.len(), 3);
    assert!(rows.iter().all(|r| r[4] == "true" && r[5] == "2"));

    let o = run(&d, &["gap", "--n", "6", "--steps", "3", "--species", "one"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let (header, rows) = read_csv(&d.join("gap.csv"));
    assert_eq!(header, ["s", "rightmost_re", "config_hash"]);
    assert_eq!(rows.len(), 3);
}

#[test]
fn validate_detects_an_injected_fault() {
    let d = scratch("validate");
    let o = run(&d, &["validate", "--n", "6", "--inject-fault"]);
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("first failing invariant"));
    let text = std::fs::read_to_string(d.join("validate.csv")).unwrap();
    assert!(text.starts_with("module,check,pass,detail,config_hash"));
    assert!(text.lines().any(|l| l.starts_with("modes,dissipativity,false")), "{text}");

    let o = run(&d, &["validate", "--n", "6"]);
    let text = std::fs::read_to_string(d.join("validate.csv")).unwrap();
    assert!(text.lines().any(|l| l.starts_with("modes,dissipativity,true")));
    // the unprojected operator leaks out of the null space at this coarse resolution
    assert_eq!(code(&o), 1);
    assert!(text.lines().any(|l| l.starts_with("collision,raw_leakage,false") && l.contains("increase n_per_axis")));
}

#[test]
fn decay_writes_curves_and_fits() {
    let d = scratch("decay");
    let o = run(&d, &["decay", "--scenario", "boltzmann", "--n", "6", "--steps", "24", "--tmax", "200"]);
    assert_ne!(code(&o), 2, "{}", stderr(&o));
    let (header, rows) = read_csv(&d.join("decay.csv"));
    assert_eq!(header[0], "t");
    assert_eq!(header.len(), 11);
    assert!(rows.iter().all(|r| r[0].parse::<f64>().unwrap() <= 200.0 + 1e-9));
    let (fh, fits) = read_csv(&d.join("decay_fit.csv"));
    assert_eq!(fh, ["channel", "slope", "stderr", "target", "pass", "config_hash"]);
    assert_eq!(fits.len(), 2);
}
