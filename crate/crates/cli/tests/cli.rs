use std::path::Path;
use std::process::{Command, Output};

use proptest::prelude::*;

const SEED_U: &str = "alpha1*exp(alpha1*t)/(alpha2 + exp(alpha1*t))";
const SEED_V: &str = "-alpha1*alpha2/(alpha2 + exp(alpha1*t))";

fn symkit(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_symkit"))
        .args(args)
        .env_remove("SYMKIT_CATALOG")
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn solution_file(dir: &Path, u: &str) -> std::path::PathBuf {
    let p = dir.join("sol.ini");
    std::fs::write(
        &p,
        format!(
            "[solution]\nid = seed\nsystem = 3-1\nu = {u}\nv = {SEED_V}\nparams = alpha1 = 1, alpha2 = 1\nt = 0:1\nx = 0:3\n"
        ),
    )
    .unwrap();
    p
}

#[test]
fn validate_all_prints_27_rows() {
    let o = symkit(&["validate", "--all"]);
    assert_eq!(code(&o), 0);
    let out = stdout(&o);
    assert_eq!(out.lines().filter(|l| l.starts_with('T')).count(), 27);
    assert!(out.contains("27 entries, 112 pairs, 0 failures"));
}

#[test]
fn determining_generic_is_clean() {
    let o = symkit(&["determining", "--generic"]);
    assert_eq!(code(&o), 0);
    let out = stdout(&o);
    assert!(out.contains("total: 17 equations, discrepancies: 0"));
    assert_eq!(out.lines().filter(|l| l.starts_with("  S")).count(), 16);
}

#[test]
fn verify_printed_family() {
    let o = symkit(&["verify-solution", "--family", "3-6", "--system", "3-1"]);
    assert_eq!(code(&o), 0);
    let out = stdout(&o);
    assert!(out.contains("S1 = 0") && out.contains("S2 = 0"), "{out}");
}

#[test]
fn wrong_system_is_a_verification_failure() {
    assert_eq!(code(&symkit(&["verify-solution", "--family", "3-6", "--system", "3-2"])), 1);
    assert_eq!(code(&symkit(&["check", "--system", "3-2", "--operator", "Z1"])), 1);
}

#[test]
fn usage_errors_exit_2() {
    for args in [
        &["frobnicate"][..],
        &["validate", "--format", "xml"],
        &["check", "--table", "2"],
        &["check", "--table", "9", "--case", "1", "--operator", "P_t"],
        &["verify-solution", "--family", "no-such-family"],
        &["verify-solution", "--family", "3-6", "--bind", "alpha1"],
        &["orbit", "--family", "3-5", "--generator", "X7"],
    ] {
        assert_eq!(code(&symkit(args)), 2, "{args:?}");
    }
}

#[test]
fn missing_files_exit_3() {
    assert_eq!(code(&symkit(&["simulate", "--config", "/no/such/file.ini"])), 3);
    assert_eq!(code(&symkit(&["verify-solution", "--file", "/no/such/file.ini"])), 3);
    let o = Command::new(env!("CARGO_BIN_EXE_symkit"))
        .args(["catalog", "list"])
        .env("SYMKIT_CATALOG", "/no/such/catalog.ini")
        .output()
        .unwrap();
    assert_eq!(code(&o), 3);
}

#[test]
fn catalog_override_with_broken_entry_fails_validation() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("catalog.ini");
    // T3.7 with the u-equation diffusion coefficient sign flipped
    std::fs::write(&p, "[entry]\ntable = 3\ncase = 7\nd12 = -1\nd21 = 1\noperators = P_t, Z5\n").unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_symkit"))
        .args(["validate", "--all"])
        .env("SYMKIT_CATALOG", &p)
        .output()
        .unwrap();
    assert_eq!(code(&o), 1);
    assert!(stdout(&o).contains("Z5(FAIL"));
}

#[test]
fn reports_are_deterministic() {
    for args in [
        &["verify-solution", "--family", "3-7", "--seed", "5", "--points", "50"][..],
        &["validate", "--all", "--format", "csv"],
        &["commutators", "--table", "3", "--case", "7"],
    ] {
        assert_eq!(symkit(args).stdout, symkit(args).stdout, "{args:?}");
    }
}

#[test]
fn csv_and_output_file() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("r.csv");
    let o = symkit(&["verify-solution", "--family", "3-5", "--format", "csv", "--output", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    assert!(o.stdout.is_empty());
    let text = std::fs::read_to_string(&out).unwrap();
    assert!(text.starts_with("family,system,max_abs_residual,points,verdict\n"));
    assert!(text.trim_end().ends_with(",pass"));
}

#[test]
fn kernel_direction_keeps_seed_a_solution() {
    let dir = tempfile::tempdir().unwrap();
    let p = solution_file(dir.path(), &format!("{SEED_U} - 2*exp(x)"));
    assert_eq!(code(&symkit(&["verify-solution", "--file", p.to_str().unwrap()])), 0);
}

#[test]
fn solution_file_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let p = solution_file(dir.path(), SEED_U);
    assert_eq!(code(&symkit(&["verify-solution", "--file", p.to_str().unwrap()])), 0);
}

#[test]
fn flux_on_full_and_half_period() {
    assert_eq!(code(&symkit(&["flux-check", "--family", "3-7", "--bind", "lambda2=0"])), 0);
    assert_eq!(code(&symkit(&["flux-check", "--family", "3-7", "--bind", "lambda2=0", "--x1", "pi/2"])), 1);
}

#[test]
fn reduce_lists_branches() {
    let o = symkit(&["reduce"]);
    assert_eq!(code(&o), 0);
    assert_eq!(stdout(&o).matches("satisfies").count(), 6);
}

#[test]
fn simulate_writes_trajectory_csv() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("sim.ini");
    std::fs::write(
        &cfg,
        "[simulate]\nsystem = T3.7\ngrid.x0 = 0\ngrid.x1 = 1\ngrid.n = 16\nt_end = 0.01\ninit = 2 + cos(pi*x); 1\nstride = 50\n",
    )
    .unwrap();
    let out = dir.path().join("traj.csv");
    let o = symkit(&["simulate", "--config", cfg.to_str().unwrap(), "--output", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let text = std::fs::read_to_string(out).unwrap();
    assert!(text.starts_with("t,x,u,v\n"));
    assert_eq!((text.lines().count() - 1) % 16, 0);
}

#[test]
fn convergence_small_grids() {
    let o = symkit(&["convergence", "--sizes", "32,64", "--t-end", "0.02", "--format", "csv"]);
    assert_eq!(code(&o), 0, "{}", stdout(&o));
    assert!(stdout(&o).starts_with("n,rel_l2,steps,order\n"));
}

#[test]
fn catalog_show_and_list() {
    let o = symkit(&["catalog", "show", "--table", "2", "--case", "3"]);
    assert_eq!(code(&o), 0);
    assert!(stdout(&o).contains("Z1 = "));
    assert_eq!(stdout(&symkit(&["catalog", "list"])).lines().count(), 27);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    // Exit 0 iff the injected perturbation vanishes. (exp(x) is left out:
    // u + c*exp(x) is again a solution.)
    #[test]
    fn exit_code_tracks_injected_failure(c in -3i32..=3, term in prop::sample::select(vec!["x", "t", "exp(2*x)", "1"])) {
        let dir = tempfile::tempdir().unwrap();
        let p = solution_file(dir.path(), &format!("{SEED_U} + ({c})*{term}"));
        let o = symkit(&["verify-solution", "--file", p.to_str().unwrap()]);
        prop_assert_eq!(code(&o), if c == 0 { 0 } else { 1 });
    }
}
