//! End-to-end checks of the binary: exit codes, output shape, determinism.

use std::path::PathBuf;
use std::process::{Command, Output};

fn actid(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_actid"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn repo_file(name: &str) -> String {
    let mut p = PathBuf::from(env!("CARGO_MANIFEST_DIR"));
    p.pop();
    p.pop();
    p.push("problems");
    p.push(name);
    p.to_string_lossy().into_owned()
}

fn write_temp(name: &str, contents: &str) -> String {
    let mut p = std::env::temp_dir();
    p.push(format!("actid-test-{}-{name}", std::process::id()));
    std::fs::write(&p, contents).unwrap();
    p.to_string_lossy().into_owned()
}

#[test]
fn run_two_circle_summary() {
    let out = actid(&["run", &repo_file("two_circle.idk"), "--mu", "1", "--steps", "16"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("# revealed (tail 5): G3 G4"), "{text}");
    assert!(text.contains("G2=sufficient"), "{text}");
    assert!(text.contains("G3=sufficient"), "{text}");
    assert!(text.contains("G4=sufficient"), "{text}");
    assert!(text.contains("G1=insufficient"), "{text}");
    assert!(text.starts_with("r\teps_r\tstep_norm\tstationarity\tvalue_gap\tdist_G1"));
}

#[test]
fn outputs_are_byte_identical_across_runs() {
    for args in [
        vec!["run", &repo_file("two_circle.idk")],
        vec!["demo", "two-circle"],
        vec!["demo", "abs-1d"],
        vec!["demo", "l1-2d"],
        vec!["demo", "eig", "3"],
    ] {
        let a = actid(&args);
        let b = actid(&args);
        assert!(a.status.success(), "{args:?}");
        assert_eq!(a.stdout, b.stdout, "{args:?} not deterministic");
    }
}

#[test]
fn demo_two_circle_prints_vertices() {
    let out = actid(&["demo", "two-circle"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(
        text.contains("# multiplier vertices: (1, 0, 0.25) (1, 0.5, 0)"),
        "{text}"
    );
}

#[test]
fn demo_abs_lists_decomposition() {
    let out = actid(&["demo", "abs-1d"]);
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("# G1: c in (-inf, 0] , v in {-1}"), "{text}");
    assert!(text.contains("# G2: c in {0} , v in [-1, 1]"), "{text}");
    assert!(text.contains("# manifold {0} identified on tail: true"), "{text}");
}

#[test]
fn demo_eig_prints_documented_distance() {
    let out = actid(&["demo", "eig", "2"]);
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("0.565685"), "{text}");
}

#[test]
fn malformed_file_exits_2_with_location() {
    let path = write_temp("bad.idk", "[problem]\nn = 1\nh = huber\nc1 = x1\n");
    let out = actid(&["run", &path]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(err.contains("line 3"), "{err}");
}

#[test]
fn missing_file_exits_2() {
    let out = actid(&["run", "/nonexistent/nothing.idk"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn unknown_demo_exits_2() {
    let out = actid(&["demo", "warble"]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(err.contains("two-circle"), "{err}");
}

#[test]
fn unsupported_prox_kind_exits_3() {
    let path = write_temp(
        "eig.idk",
        "[problem]\nn = 3\nh = max_eig(k=2)\nc1 = x1\nc2 = x2\nc3 = x3\n\
         [reference]\nx = 1 0 0\n[schedule]\nsteps = 2\n",
    );
    let out = actid(&["run", &path]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn run_without_reference_notes_degraded_mode() {
    let path = write_temp(
        "noref.idk",
        "[problem]\nn = 1\nh = abs\nc1 = x1^2 - 1\n[schedule]\nsteps = 4\nx0 = 1\ndir = 1\n",
    );
    let out = actid(&["run", &path]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("degraded mode"), "{text}");
    assert!(text.contains("\tnan\t"), "value gap column should be nan: {text}");
}

#[test]
fn certify_index_sets() {
    let file = repo_file("two_circle.idk");
    let out = actid(&["certify", &file, "--J", "2"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("sufficient: true"), "{text}");
    assert!(text.contains("mu=(0, 0.25)"), "{text}");

    let out = actid(&["certify", &file, "--J", ""]);
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("sufficient: false"), "{text}");
    assert!(text.contains("1.000000000e0"), "{text}");

    let out = actid(&["certify", &file, "--J", "1,2"]);
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("sufficient: true"), "{text}");
}

#[test]
fn certify_piece_by_id() {
    let file = repo_file("two_circle.idk");
    let out = actid(&["certify", &file, "--piece", "G3"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("G3=sufficient"), "{text}");

    let out = actid(&["certify", &file, "--piece", "G9"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn certify_without_reference_exits_2() {
    let path = write_temp("noref2.idk", "[problem]\nn = 1\nh = abs\nc1 = x1\n");
    let out = actid(&["certify", &path, "--J", ""]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn out_flag_writes_file() {
    let mut target = std::env::temp_dir();
    target.push(format!("actid-out-{}.tsv", std::process::id()));
    let target = target.to_string_lossy().into_owned();
    let out = actid(&["run", &repo_file("abs_1d.idk"), "--out", &target]);
    assert!(out.status.success());
    assert!(out.stdout.is_empty());
    let written = std::fs::read_to_string(&target).unwrap();
    assert!(written.contains("# revealed"));
    std::fs::remove_file(&target).ok();
}

#[test]
fn pretty_flag_renders_columns() {
    let out = actid(&["run", &repo_file("abs_1d.idk"), "--pretty"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(!text.lines().next().unwrap().contains('\t'), "{text}");
}

#[test]
fn opposing_gradients_certify_from_file() {
    // MFCQ fails here, but the stationarity system 1 + mu1 - mu2 = 0 is
    // still solvable with mu >= 0, so the full pair is sufficient.
    let out = actid(&["certify", &repo_file("opposing.idk"), "--J", "1,2"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("sufficient: true"), "{text}");
}
