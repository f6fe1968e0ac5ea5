//! Compiles and runs a small C program against the generated header and the
//! static library.

use std::path::PathBuf;
use std::process::Command;

const PROGRAM: &str = r#"
#include <stdio.h>
#include <math.h>
#include "sagnac.h"

int main(void) {
    SagnacLayout *h = NULL;
    double loss = 0.0;
    if (sagnac_layout_new(&h) != SAGNAC_STATUS_OK) return 1;
    if (sagnac_layout_add_fiber(h, SAGNAC_FIBER_SMF28_ULL, 200.0) != SAGNAC_STATUS_OK) return 2;
    if (sagnac_layout_total_loss_db(h, &loss) != SAGNAC_STATUS_OK) return 3;
    sagnac_layout_free(h);
    if (fabs(loss - 31.8) > 1e-9) return 4;
    if (sagnac_layout_total_loss_db(NULL, &loss) != SAGNAC_STATUS_NULL_POINTER) return 5;
    if (sagnac_last_error() == NULL) return 6;
    printf("%.1f\n", loss);
    return 0;
}
"#;

#[test]
fn header_compiles_and_links_from_c() {
    let manifest = PathBuf::from(env!("CARGO_MANIFEST_DIR"));
    // target/<profile>/deps/<test binary>
    let profile_dir = std::env::current_exe().unwrap().parent().unwrap().parent().unwrap().to_path_buf();
    let lib = profile_dir.join("libsagnac_ffi.a");
    if !lib.exists() {
        eprintln!("skipping: {} not built", lib.display());
        return;
    }
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("smoke.c");
    let exe = dir.path().join("smoke");
    std::fs::write(&src, PROGRAM).unwrap();
    let status = Command::new("cc")
        .arg(&src)
        .arg("-I")
        .arg(manifest.join("include"))
        .arg(&lib)
        .args(["-lm", "-lpthread", "-ldl", "-o"])
        .arg(&exe)
        .status()
        .expect("cc not available");
    assert!(status.success());
    let out = Command::new(&exe).output().unwrap();
    assert!(out.status.success(), "exit {:?}", out.status.code());
    assert_eq!(String::from_utf8_lossy(&out.stdout).trim(), "31.8");
}
