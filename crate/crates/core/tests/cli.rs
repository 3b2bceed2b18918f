mod common;

use std::process::Command;

use common::{bits_equal, hosts_text};
use pencil_fft::bench::read_csv;
use pencil_fft::tensor::read_tensor;

const BIN: &str = env!("CARGO_BIN_EXE_pencil-fft");

fn run(args: &[&str]) -> std::process::Output {
    Command::new(BIN).args(args).output().unwrap()
}

fn read(path: &std::path::Path) -> pencil_fft::Tensor3 {
    read_tensor(std::fs::File::open(path).unwrap()).unwrap().1
}

#[test]
fn info_lists_every_scheme() {
    let out = run(&["info", "--dims", "16,8,4"]);
    assert!(out.status.success());
    assert_eq!(String::from_utf8_lossy(&out.stdout).trim(), "P_max slab=4 pencil=32 cell=512");
}

#[test]
fn verify_json_lines() {
    let out = run(&["verify", "--size", "8", "--ranks", "4", "--json"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8(out.stdout).unwrap();
    let names: Vec<String> = text
        .lines()
        .map(|l| serde_json::from_str::<serde_json::Value>(l).unwrap()["name"].as_str().unwrap().to_string())
        .collect();
    assert_eq!(names, ["oracle", "roundtrip", "parseval", "option_equivalence"]);
}

#[test]
fn invalid_configs_exit_nonzero() {
    for args in [
        &["verify", "--size", "8", "--ranks", "16", "--scheme", "slab"][..],
        &["verify", "--size", "12"],
        &["verify", "--size", "8", "--ranks", "4", "--k", "3"],
        &["verify", "--size", "8", "--ranks", "4", "--grid", "4,2"],
        &["verify", "--size", "8", "--option", "5"],
    ] {
        let out = run(args);
        assert!(!out.status.success(), "{args:?} succeeded");
        assert!(String::from_utf8_lossy(&out.stderr).contains("error"), "{args:?}");
    }
}

#[test]
fn dump_and_load_roundtrip() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("x.bin");
    let spec = dir.path().join("y.bin");
    let again = dir.path().join("y2.bin");
    let p = |x: &std::path::Path| x.to_str().unwrap().to_string();
    assert!(run(&["dump", "--dims", "8,4,4", "--seed", "3", "--input-only", "--file", &p(&input)]).status.success());
    assert!(run(&["dump", "--dims", "8,4,4", "--ranks", "4", "--seed", "3", "--file", &p(&spec)]).status.success());
    let out = run(&["load", "--file", &p(&input), "--ranks", "2", "--out", &p(&again)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stdout).starts_with("dims 8x4x4"));
    assert!(bits_equal(&read(&spec), &read(&again)));
}

#[test]
fn bench_matrix_with_skips() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("t.csv");
    let out = run(&[
        "bench", "--size", "8", "--ranks", "2,16", "--scheme", "slab", "--option", "1,4", "--runs", "2", "--csv",
        csv.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let rows = read_csv(std::fs::File::open(&csv).unwrap()).unwrap();
    // Two timed configurations of 3 rows each, then two skipped rows.
    assert_eq!(rows.len(), 8);
    let skipped: Vec<_> = rows.iter().filter(|r| r.get("run").unwrap().starts_with("skipped")).collect();
    assert_eq!(skipped.len(), 2);
    assert!(skipped.iter().all(|r| r.get("run").unwrap().contains("P_max=8")));
    assert!(rows.iter().filter(|r| r.get("run") == Some("best")).all(|r| r.get("scheme") == Some("slab")));
}

#[test]
fn tcp_verify_across_processes() {
    let dir = tempfile::tempdir().unwrap();
    let hosts = dir.path().join("hosts");
    std::fs::write(&hosts, hosts_text(&common::free_ports(2))).unwrap();
    let children: Vec<_> = (0..2)
        .map(|r| {
            Command::new(BIN)
                .args(["verify", "--size", "8", "--transport", "tcp", "--json", "--rank", &r.to_string()])
                .arg("--hosts")
                .arg(&hosts)
                .stdout(std::process::Stdio::piped())
                .spawn()
                .unwrap()
        })
        .collect();
    let outs: Vec<_> = children.into_iter().map(|c| c.wait_with_output().unwrap()).collect();
    assert!(outs.iter().all(|o| o.status.success()));
    let text = String::from_utf8_lossy(&outs[0].stdout);
    assert_eq!(text.lines().count(), 4);
    assert!(text.lines().all(|l| l.contains("\"passed\":true")));
    assert!(outs[1].stdout.is_empty());
}
