//! Golden-file tests: the committed fixture corpus must reproduce the
//! committed outputs byte for byte, and the documented exit codes must
//! hold.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};
use std::process::Command;

fn bin() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_bogontrace"));
    // Fixture paths inside manifests are relative to the crate root.
    cmd.current_dir(env!("CARGO_MANIFEST_DIR"));
    cmd
}

fn fixture(name: &str) -> String {
    format!("tests/fixtures/{name}")
}

fn golden_dir(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join(format!("tests/fixtures/golden/{name}"))
}

fn file_names(dir: &Path) -> BTreeSet<String> {
    std::fs::read_dir(dir)
        .unwrap_or_else(|e| panic!("read {}: {e}", dir.display()))
        .map(|entry| entry.unwrap().file_name().to_string_lossy().into_owned())
        .collect()
}

fn assert_dirs_identical(golden: &Path, produced: &Path) {
    let golden_files = file_names(golden);
    let produced_files = file_names(produced);
    assert_eq!(
        golden_files, produced_files,
        "file sets differ between {} and {}",
        golden.display(),
        produced.display()
    );
    for name in golden_files {
        let want = std::fs::read(golden.join(&name)).unwrap();
        let got = std::fs::read(produced.join(&name)).unwrap();
        assert_eq!(
            want, got,
            "{name} differs from the committed golden (regenerate goldens if the format \
             intentionally changed)"
        );
    }
}

#[test]
fn analyze_matches_golden() {
    let out = tempfile::tempdir().unwrap();
    let status = bin()
        .args([
            "analyze",
            "--label",
            "2023-07",
            "--rib",
            &fixture("rib.mrt"),
            "--traces",
            &fixture("traces.jsonl"),
            "--out",
        ])
        .arg(out.path())
        .status()
        .unwrap();
    assert!(status.success());
    assert_dirs_identical(&golden_dir("run1"), out.path());
}

#[test]
fn similarity_matches_golden() {
    let out = tempfile::tempdir().unwrap();
    let status = bin()
        .args([
            "similarity",
            "--run",
            &fixture("golden/run1"),
            "--run",
            &fixture("golden/run2"),
            "--out",
        ])
        .arg(out.path())
        .status()
        .unwrap();
    assert!(status.success());
    assert_dirs_identical(&golden_dir("sim"), out.path());
}

#[test]
fn crosscheck_matches_golden() {
    let out = tempfile::tempdir().unwrap();
    let status = bin()
        .args([
            "crosscheck",
            "--run",
            &fixture("golden/run1"),
            "--run",
            &fixture("golden/run2"),
            "--spoofer",
            &fixture("spoofer.csv"),
            "--manrs",
            &fixture("manrs.csv"),
            "--metadata",
            &fixture("metadata.csv"),
            "--case",
            "BA",
            "--out",
        ])
        .arg(out.path())
        .status()
        .unwrap();
    assert!(status.success());
    assert_dirs_identical(&golden_dir("xc"), out.path());
}

#[test]
fn case_filter_restricts_findings() {
    let out = tempfile::tempdir().unwrap();
    let status = bin()
        .args([
            "analyze",
            "--label",
            "bc-only",
            "--case",
            "BC",
            "--rib",
            &fixture("rib.mrt"),
            "--traces",
            &fixture("traces.jsonl"),
            "--out",
        ])
        .arg(out.path())
        .status()
        .unwrap();
    assert!(status.success());
    let findings = std::fs::read_to_string(out.path().join("findings.csv")).unwrap();
    for line in findings.lines().skip(1) {
        assert!(line.contains(",BC,"), "unexpected row {line}");
    }
    // Only BC ASN lists are emitted.
    for name in file_names(out.path()) {
        if name.starts_with("asns_") {
            assert!(name.starts_with("asns_bc_"), "unexpected list {name}");
        }
    }
}

#[test]
fn missing_config_is_exit_2() {
    let status = bin()
        .args(["analyze", "--rib", &fixture("rib.mrt")])
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(2));
}

#[test]
fn corrupt_rib_is_exit_3() {
    let dir = tempfile::tempdir().unwrap();
    // Unknown record type 99 up front: RIB corruption is always fatal.
    let mut bytes = Vec::new();
    bytes.extend_from_slice(&0u32.to_be_bytes());
    bytes.extend_from_slice(&99u16.to_be_bytes());
    bytes.extend_from_slice(&0u16.to_be_bytes());
    bytes.extend_from_slice(&4u32.to_be_bytes());
    bytes.extend_from_slice(&[0, 0, 0, 0]);
    let rib = dir.path().join("bad.mrt");
    std::fs::write(&rib, bytes).unwrap();
    let out = dir.path().join("out");
    let status = bin()
        .args(["analyze", "--label", "x", "--traces", &fixture("traces.jsonl")])
        .arg("--rib")
        .arg(&rib)
        .arg("--out")
        .arg(&out)
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(3));
}

#[test]
fn bogon_only_rib_is_exit_4() {
    use bogontrace_core::synth::{MrtWriter, PathSegmentSpec, RibEntrySpec};
    let dir = tempfile::tempdir().unwrap();
    let mut writer = MrtWriter::new(0);
    writer.rib_ipv4_unicast(
        0,
        "10.0.0.0/8".parse().unwrap(),
        &[RibEntrySpec {
            peer_index: 0,
            originated: 0,
            segments: vec![PathSegmentSpec::Sequence(vec![65000, 64496])],
        }],
    );
    let rib = dir.path().join("leaked.mrt");
    std::fs::write(&rib, writer.finish()).unwrap();
    let out = dir.path().join("out");
    let status = bin()
        .args(["analyze", "--label", "x", "--traces", &fixture("traces.jsonl")])
        .arg("--rib")
        .arg(&rib)
        .arg("--out")
        .arg(&out)
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(4));
}

#[test]
fn strict_mode_fails_on_damaged_corpus() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = dir.path().join("damaged.jsonl");
    let mut text = std::fs::read_to_string(
        Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/traces.jsonl"),
    )
    .unwrap();
    text.push_str("this line is not json\n");
    std::fs::write(&corpus, &text).unwrap();

    let out = dir.path().join("out");
    let strict = bin()
        .args(["analyze", "--label", "x", "--strict", "--rib", &fixture("rib.mrt")])
        .arg("--traces")
        .arg(&corpus)
        .arg("--out")
        .arg(&out)
        .status()
        .unwrap();
    assert_eq!(strict.code(), Some(3));

    // Lenient mode (the default) counts and continues.
    let lenient = bin()
        .args(["analyze", "--label", "x", "--rib", &fixture("rib.mrt")])
        .arg("--traces")
        .arg(&corpus)
        .arg("--out")
        .arg(&out)
        .status()
        .unwrap();
    assert!(lenient.success());
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("manifest.json")).unwrap())
            .unwrap();
    assert_eq!(manifest["counters"]["ingest"]["malformed_lines"], 1);
}

#[test]
fn similarity_rejects_label_collision() {
    let out = tempfile::tempdir().unwrap();
    let status = bin()
        .args([
            "similarity",
            "--run",
            &fixture("golden/run1"),
            "--run",
            &fixture("golden/run1"),
            "--out",
        ])
        .arg(out.path())
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(2));
}

#[test]
fn fetch_dry_run_expands_templates() {
    let cache = tempfile::tempdir().unwrap();
    let output = bin()
        .args([
            "fetch",
            "--collector",
            "rrc00",
            "--date",
            "2023-07-18",
            "--dry-run",
            "--cache",
        ])
        .arg(cache.path())
        .output()
        .unwrap();
    assert!(output.status.success());
    let stdout = String::from_utf8(output.stdout).unwrap();
    assert!(
        stdout.contains("2023.07/bview.20230718.0000.gz"),
        "unexpected expansion: {stdout}"
    );
}

#[test]
fn config_file_with_flag_override() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("run.toml");
    std::fs::write(
        &config,
        format!(
            "label = \"from-config\"\nribs = [{:?}]\ntraces = [{:?}]\n",
            Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/rib.mrt"),
            Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/traces.jsonl"),
        ),
    )
    .unwrap();
    let out = dir.path().join("out");
    // Flag wins over the config file's label.
    let status = bin()
        .arg("analyze")
        .arg("--config")
        .arg(&config)
        .args(["--label", "from-flag"])
        .arg("--out")
        .arg(&out)
        .status()
        .unwrap();
    assert!(status.success());
    let stats = std::fs::read_to_string(out.join("stats.csv")).unwrap();
    assert!(stats.lines().nth(1).unwrap().starts_with("from-flag,"));
}
