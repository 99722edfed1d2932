//! Compiles a small C program against the generated header and the static
//! library. Skipped when no C compiler or archive is available.

use std::path::PathBuf;
use std::process::Command;

const PROGRAM: &str = r#"
#include <stdio.h>
#include "elliptope.h"

int main(void) {
    ElSamplerConfig cfg = el_sampler_config_default(4, 3);
    cfg.seed = 5;
    ElSampler *s = NULL;
    if (el_sampler_new(&cfg, &s) != EL_STATUS_OK) return 1;
    double buf[16];
    int n = 0;
    ElStatus st;
    while ((st = el_sampler_next(s, buf, 16)) == EL_STATUS_OK) {
        for (int i = 0; i < 4; i++) if (buf[i * 5] != 1.0) return 2;
        n++;
    }
    el_sampler_free(s);
    if (st != EL_STATUS_EXHAUSTED || n != 3) return 3;
    cfg.dim = 0;
    if (el_sampler_new(&cfg, &s) != EL_STATUS_INVALID_ARGUMENT) return 4;
    if (el_last_error() == NULL) return 5;
    printf("ok %d\n", n);
    return 0;
}
"#;

/// `cargo test` only builds the rlib, so the archive is rebuilt here.
fn static_lib() -> Option<PathBuf> {
    let exe = std::env::current_exe().ok()?;
    let profile_dir = exe.parent()?.parent()?;
    let target_dir = profile_dir.parent()?;
    let mut cmd = Command::new(std::env::var("CARGO").unwrap_or_else(|_| "cargo".into()));
    cmd.args([
        "build",
        "-q",
        "--offline",
        "-p",
        "elliptope-ffi",
        "--lib",
        "--target-dir",
    ])
    .arg(target_dir);
    if profile_dir.file_name()? == "release" {
        cmd.arg("--release");
    }
    if !cmd.status().ok()?.success() {
        return None;
    }
    let lib = profile_dir.join("libelliptope_ffi.a");
    lib.exists().then_some(lib)
}

#[test]
fn c_program_links_and_runs() {
    let Some(lib) = static_lib() else {
        eprintln!("static library unavailable; skipping");
        return;
    };
    let cc = std::env::var("CC").unwrap_or_else(|_| "cc".into());
    if Command::new(&cc).arg("--version").output().is_err() {
        eprintln!("no C compiler; skipping");
        return;
    }
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("main.c");
    let exe = dir.path().join("main");
    std::fs::write(&src, PROGRAM).unwrap();
    let include = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("include");
    let status = Command::new(&cc)
        .arg("-std=c99")
        .arg("-Wall")
        .arg("-I")
        .arg(&include)
        .arg(&src)
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm"])
        .arg("-o")
        .arg(&exe)
        .status()
        .unwrap();
    assert!(status.success(), "C compilation failed");
    let out = Command::new(&exe).output().unwrap();
    assert!(out.status.success(), "exit {:?}", out.status.code());
    assert_eq!(String::from_utf8_lossy(&out.stdout).trim(), "ok 3");
}
