use std::path::Path;
use std::process::{Command, Output};

use elliptope::io::{Corm1Reader, CORM1_HEADER_LEN, CORM1_MAGIC};

fn elliptope(args: &[&str], out_dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_elliptope"))
        .args(args)
        .env("ELLIPTOPE_OUT_DIR", out_dir)
        .output()
        .unwrap()
}

fn ok(out: &Output) {
    assert!(
        out.status.success(),
        "status {:?}\nstderr: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stderr)
    );
}

#[test]
fn generate_writes_corm1() {
    let dir = tempfile::tempdir().unwrap();
    let out = elliptope(
        &["generate", "--dim", "6", "--count", "25", "--seed", "3"],
        dir.path(),
    );
    ok(&out);
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(
        stderr.contains("method=chol") && stderr.contains("seed=3"),
        "{stderr}"
    );

    let bytes = std::fs::read(dir.path().join("matrices.corm1")).unwrap();
    assert_eq!(&bytes[..6], CORM1_MAGIC);
    assert_eq!(u32::from_le_bytes(bytes[6..10].try_into().unwrap()), 6);
    assert_eq!(u64::from_le_bytes(bytes[10..18].try_into().unwrap()), 25);
    assert_eq!(bytes.len(), CORM1_HEADER_LEN + 25 * 36 * 8);
    let reader = Corm1Reader::new(bytes.as_slice()).unwrap();
    assert_eq!(reader.collect::<Result<Vec<_>, _>>().unwrap().len(), 25);
}

#[test]
fn generate_is_deterministic_across_runs_and_threads() {
    let dir = tempfile::tempdir().unwrap();
    for method in ["chol", "vine", "onion", "polar"] {
        let mut files = Vec::new();
        for (k, threads) in ["1", "1", "4"].iter().enumerate() {
            let path = dir.path().join(format!("{method}-{k}.corm1"));
            let out = elliptope(
                &[
                    "--threads",
                    threads,
                    "generate",
                    "--method",
                    method,
                    "--dim",
                    "12",
                    "--count",
                    "40",
                    "--seed",
                    "99",
                    "--output",
                    path.to_str().unwrap(),
                ],
                dir.path(),
            );
            ok(&out);
            files.push(std::fs::read(path).unwrap());
        }
        assert_eq!(files[0], files[1], "{method}: runs differ");
        assert_eq!(files[0], files[2], "{method}: thread counts differ");
    }
}

#[test]
fn seeds_change_output() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.corm1");
    let b = dir.path().join("b.corm1");
    ok(&elliptope(
        &[
            "generate",
            "--dim",
            "4",
            "--count",
            "5",
            "--output",
            a.to_str().unwrap(),
        ],
        dir.path(),
    ));
    ok(&elliptope(
        &[
            "generate",
            "--dim",
            "4",
            "--count",
            "5",
            "--seed",
            "1",
            "--output",
            b.to_str().unwrap(),
        ],
        dir.path(),
    ));
    assert_ne!(std::fs::read(a).unwrap(), std::fs::read(b).unwrap());
}

#[test]
fn generate_csv_to_stdout() {
    let dir = tempfile::tempdir().unwrap();
    let out = elliptope(
        &[
            "generate", "--dim", "3", "--count", "2", "--format", "csv", "--mode", "restart",
            "--output", "-",
        ],
        dir.path(),
    );
    ok(&out);
    let text = String::from_utf8(out.stdout).unwrap();
    let blocks: Vec<&str> = text.trim_end().split("\n\n").collect();
    assert_eq!(blocks.len(), 2);
    for b in blocks {
        let rows: Vec<&str> = b.lines().collect();
        assert_eq!(rows.len(), 3);
        assert!(rows[0].starts_with("1,"));
    }
}

#[test]
fn usage_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(
        elliptope(&["generate", "--dim", "0"], dir.path())
            .status
            .code(),
        Some(2)
    );
    assert_eq!(elliptope(&["generate"], dir.path()).status.code(), Some(2));
    assert_eq!(
        elliptope(&["generate", "--dim", "3", "--method", "qr"], dir.path())
            .status
            .code(),
        Some(2)
    );
    assert_eq!(
        elliptope(&["frobnicate"], dir.path()).status.code(),
        Some(2)
    );
}

#[test]
fn invalid_parameters_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let out = elliptope(&["generate", "--dim", "3", "--sigma-eps", "0"], dir.path());
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("error"));
    let out = elliptope(&["generate", "--dim", "3", "--thin", "0"], dir.path());
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn bench_csv_layout() {
    let dir = tempfile::tempdir().unwrap();
    let out = elliptope(
        &[
            "bench",
            "--dims",
            "4,6",
            "--count",
            "20",
            "--repeats",
            "3",
            "--include-restart",
            "--seed",
            "5",
        ],
        dir.path(),
    );
    ok(&out);
    let text = std::fs::read_to_string(dir.path().join("bench.csv")).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert!(lines[0].starts_with("# seed=5"));
    assert_eq!(lines[1], "method,p,n,seconds");
    assert_eq!(lines.len(), 2 + 2 * 5);
    let labels: Vec<&str> = lines[2..7]
        .iter()
        .map(|l| l.split(',').next().unwrap())
        .collect();
    assert_eq!(
        labels,
        ["chol", "vine", "onion(direct)", "polar", "chol-restart"]
    );
    for l in &lines[2..] {
        let secs: f64 = l.rsplit(',').next().unwrap().parse().unwrap();
        assert!(secs.is_finite() && secs >= 0.0);
    }
}

#[test]
fn diagnose_csv_layout() {
    let dir = tempfile::tempdir().unwrap();
    let out = elliptope(
        &[
            "diagnose",
            "--dim",
            "8",
            "--steps",
            "2000",
            "--burn-in",
            "100",
            "--sigmas",
            "1e-12,0.01,1",
        ],
        dir.path(),
    );
    ok(&out);
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("monotone trend"), "{stdout}");
    let text = std::fs::read_to_string(dir.path().join("acceptance.csv")).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "# seed=0");
    assert_eq!(
        lines[1],
        "p,row_index,sigma_eps,sigma_eps_sq,steps,accept_ratio"
    );
    assert!(lines[2].starts_with("8,1,1e-12,"));
}

#[test]
fn verify_quick_passes_and_writes_ks_csv() {
    let dir = tempfile::tempdir().unwrap();
    let out = elliptope(&["verify", "--quick"], dir.path());
    ok(&out);
    let text = std::fs::read_to_string(dir.path().join("ks.csv")).unwrap();
    assert_eq!(text.lines().nth(1), Some("method,p,statistic,p_value,n"));
}

#[test]
fn verify_detects_wrong_exponent() {
    let dir = tempfile::tempdir().unwrap();
    let out = elliptope(&["verify", "--quick", "--exponent-shift", "1"], dir.path());
    assert_eq!(out.status.code(), Some(1));
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("failed gates: row-oracle"), "{stdout}");
}
