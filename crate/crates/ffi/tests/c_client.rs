use std::path::{Path, PathBuf};
use std::process::Command;

const PROGRAM: &str = r#"
#include <stdio.h>
#include "hyperlab.h"

int main(void) {
    HlCircleMap *map = NULL;
    if (hl_circle_map_new(1, 0.1, false, &map) != HL_STATUS_OK) return 10;
    HlContinuum a = { HL_CONTINUUM_KIND_ARC, 0.1, 0.2 };
    HlContinuum image;
    if (hl_continuum_image(map, &a, &image) != HL_STATUS_OK) return 11;
    double d = -1.0;
    if (hl_hausdorff(&a, &image, &d) != HL_STATUS_OK || !(d > 0.0)) return 12;
    if (hl_hausdorff(NULL, &a, &d) != HL_STATUS_NULL_POINTER) return 13;
    char *report = NULL;
    if (hl_run_config("{\"experiment\": \"shadow\", \"mode\": \"verify\"}", &report) != HL_STATUS_OK) return 14;
    hl_string_free(report);
    hl_circle_map_free(map);
    printf("%s %.17g\n", hl_version(), d);
    return 0;
}
"#;

/// Directory holding the staticlib built alongside this test binary.
fn artifact_dir() -> PathBuf {
    let exe = std::env::current_exe().unwrap();
    exe.parent().and_then(Path::parent).unwrap().to_path_buf()
}

#[test]
fn c_program_links_against_the_header_and_staticlib() {
    let Ok(cc) = which_cc() else {
        eprintln!("no C compiler on PATH; header not compiled");
        return;
    };
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("client.c");
    std::fs::write(&src, PROGRAM).unwrap();
    let exe = dir.path().join("client");
    let include = Path::new(env!("CARGO_MANIFEST_DIR")).join("include");
    let lib = artifact_dir().join("libhyperlab_ffi.a");
    assert!(lib.exists(), "{} missing", lib.display());
    let status = Command::new(cc)
        .args(["-std=c99", "-Wall", "-Werror", "-o"])
        .arg(&exe)
        .arg(&src)
        .arg("-I")
        .arg(&include)
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm"])
        .status()
        .unwrap();
    assert!(status.success(), "C client failed to build");
    let out = Command::new(&exe).output().unwrap();
    assert!(out.status.success(), "C client exited with {:?}", out.status.code());
    assert!(String::from_utf8_lossy(&out.stdout).starts_with(env!("CARGO_PKG_VERSION")));
}

fn which_cc() -> Result<String, ()> {
    let cc = std::env::var("CC").unwrap_or_else(|_| "cc".into());
    match Command::new(&cc).arg("--version").output() {
        Ok(o) if o.status.success() => Ok(cc),
        _ => Err(()),
    }
}
