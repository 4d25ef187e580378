use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use efx_core::instance::{detect_regimes, parse_instance, serialize_instance};
use efx_core::valuation::{parse_valuation, serialize_valuation};

fn efx(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_efx"))
        .current_dir(dir)
        .env_remove("EFX_SEED")
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

#[test]
fn gen_writes_files_that_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let out = efx(dir.path(), &["gen", "bipartite", "--n", "6", "--mult", "3", "--seed", "1", "--out", "a"]);
    assert_eq!(code(&out), 0);
    let inst_text = fs::read_to_string(dir.path().join("a.inst")).unwrap();
    let val_text = fs::read_to_string(dir.path().join("a.val")).unwrap();
    let inst = parse_instance(&inst_text).unwrap();
    assert_eq!(serialize_instance(&inst), inst_text);
    let profile = parse_valuation(&val_text, &inst).unwrap();
    assert_eq!(serialize_valuation(&profile), val_text);
}

#[test]
fn gen_girth6_satisfies_girth() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&efx(dir.path(), &["gen", "girth6", "--n", "6", "--seed", "2", "--out", "g"])), 0);
    let inst = parse_instance(&fs::read_to_string(dir.path().join("g.inst")).unwrap()).unwrap();
    assert!(detect_regimes(&inst).girth_ok);
}

#[test]
fn gen_rejects_neighbors_above_bound() {
    let dir = tempfile::tempdir().unwrap();
    let out = efx(dir.path(), &["gen", "bounded", "--n", "3", "--neighbors", "2", "--out", "b"]);
    assert_ne!(code(&out), 0);
    assert!(String::from_utf8_lossy(&out.stderr).contains("= 0"));
    assert!(!dir.path().join("b.inst").exists());
}

#[test]
fn seed_env_overrides_flag() {
    let dir = tempfile::tempdir().unwrap();
    efx(dir.path(), &["gen", "girth6", "--n", "7", "--seed", "9", "--out", "x"]);
    let with_env = Command::new(env!("CARGO_BIN_EXE_efx"))
        .current_dir(dir.path())
        .env("EFX_SEED", "9")
        .args(["gen", "girth6", "--n", "7", "--seed", "1", "--out", "y"])
        .output()
        .unwrap();
    assert_eq!(code(&with_env), 0);
    let read = |p: &str| fs::read(dir.path().join(p)).unwrap();
    assert_eq!(read("x.inst"), read("y.inst"));
    assert_eq!(read("x.val"), read("y.val"));
}

#[test]
fn solve_then_verify_both_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    efx(d, &["gen", "bipartite", "--n", "6", "--mult", "3", "--seed", "4", "--valuation", "monotone", "--out", "a"]);
    let out = efx(d, &["solve", "a.inst", "a.val", "--trace", "a.trace", "--out", "a.alloc"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let v = efx(d, &["verify", "a.inst", "a.val", "a.alloc"]);
    assert_eq!(code(&v), 0, "{}", stdout(&v));
    let v = efx(d, &["verify", "a.inst", "a.val", "a.trace"]);
    assert_eq!(code(&v), 0, "{}", stdout(&v));
    assert!(stdout(&v).ends_with("result pass\n"));
    let o = efx(d, &["oracle", "a.inst", "a.val", "--check", "a.alloc"]);
    assert_eq!(code(&o), 0);
    assert!(stdout(&o).contains("member true"));
}

#[test]
fn solve_triangle_has_no_regime() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    fs::write(d.join("t.inst"), "efx-instance v1\nn 3\nedge 0 1\nedge 1 2\nedge 0 2\n").unwrap();
    fs::write(d.join("t.val"), "efx-valuation v1\nadditive 0 0=1 2=1\nadditive 1 0=1 1=1\nadditive 2 1=1 2=1\n").unwrap();
    assert_eq!(code(&efx(d, &["solve", "t.inst", "t.val"])), 2);
}

#[test]
fn forced_girth6_on_four_cycle_is_refused() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    fs::write(d.join("c.inst"), "efx-instance v1\nn 4\nedge 0 1\nedge 1 2\nedge 2 3\nedge 0 3\n").unwrap();
    fs::write(
        d.join("c.val"),
        "efx-valuation v1\nadditive 0 0=1 3=1\nadditive 1 0=1 1=1\nadditive 2 1=1 2=1\nadditive 3 2=1 3=1\n",
    )
    .unwrap();
    assert_eq!(code(&efx(d, &["solve", "c.inst", "c.val", "--regime", "girth6"])), 2);
    assert_eq!(code(&efx(d, &["solve", "c.inst", "c.val", "--regime", "bipartite"])), 0);
}

#[test]
fn verify_reports_moved_edge() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    fs::write(d.join("p.inst"), "efx-instance v1\nn 2\nedge 0 1\nedge 0 1\nedge 0 1\n").unwrap();
    fs::write(d.join("p.val"), "efx-valuation v1\nadditive 0 0=1 1=1 2=1\nadditive 1 0=1 1=1 2=1\n").unwrap();
    fs::write(d.join("good.alloc"), "efx-allocation v1\nvertex 0: 0\nvertex 1: 1 2\n").unwrap();
    fs::write(d.join("bad.alloc"), "efx-allocation v1\nvertex 0:\nvertex 1: 0 1 2\n").unwrap();
    assert_eq!(code(&efx(d, &["verify", "p.inst", "p.val", "good.alloc"])), 0);
    let bad = efx(d, &["verify", "p.inst", "p.val", "bad.alloc"]);
    assert_eq!(code(&bad), 1);
    assert!(stdout(&bad).contains("check efx fail 0 envies 1"));
}

#[test]
fn truncated_trace_is_unreadable() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    efx(d, &["gen", "girth6", "--n", "6", "--seed", "3", "--out", "g"]);
    assert_eq!(code(&efx(d, &["solve", "g.inst", "g.val", "--trace", "g.trace", "--out", "g.alloc"])), 0);
    let text = fs::read_to_string(d.join("g.trace")).unwrap();
    let cut = text.lines().take(text.lines().count() / 2).collect::<Vec<_>>().join("\n");
    fs::write(d.join("cut.trace"), cut).unwrap();
    assert_eq!(code(&efx(d, &["verify", "g.inst", "g.val", "cut.trace"])), 4);
}

#[test]
fn oracle_cap_exceeded_code() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    efx(d, &["gen", "girth6", "--n", "8", "--mult", "3", "--seed", "5", "--out", "g"]);
    assert_eq!(code(&efx(d, &["oracle", "g.inst", "g.val", "--cap", "1"])), 5);
}

#[test]
fn sweep_bipartite_hundred_rows() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let out = efx(d, &["sweep", "bipartite", "--n", "6", "--seeds", "100", "--out", "s.csv"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let mut rdr = csv::Reader::from_path(d.join("s.csv")).unwrap();
    let rows: Vec<csv::StringRecord> = rdr.records().map(Result::unwrap).collect();
    assert_eq!(rows.len(), 100);
    assert!(rows.iter().all(|r| &r[8] == "EFX"));
}

#[test]
fn sweep_bounded_envied_within_half() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let out = efx(d, &["sweep", "bounded", "--n", "4,8", "--mult", "2", "--seeds", "30", "--out", "s.csv"]);
    assert_eq!(code(&out), 0);
    let mut rdr = csv::Reader::from_path(d.join("s.csv")).unwrap();
    assert_eq!(rdr.headers().unwrap().get(5), Some("envied_after_step1"));
    for r in rdr.records().map(Result::unwrap) {
        let n: usize = r[3].parse().unwrap();
        let envied: usize = r[5].parse().unwrap();
        assert!(envied <= n / 2, "{r:?}");
    }
}

#[test]
fn sweep_without_seeds_writes_header_only() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    assert_eq!(code(&efx(d, &["sweep", "girth6", "--n", "6", "--seeds", "0", "--out", "e.csv"])), 0);
    assert_eq!(
        fs::read_to_string(d.join("e.csv")).unwrap(),
        "family,seed,regime,n,m,envied_after_step1,step2_rounds,parked,status\n"
    );
}
