use std::path::{Path, PathBuf};
use std::process::Command;

fn target_dir() -> PathBuf {
    // target/<profile>/deps/<test binary>
    let exe = std::env::current_exe().unwrap();
    exe.parent().unwrap().parent().unwrap().to_path_buf()
}

#[test]
fn c_program_links_against_static_library() {
    let root = Path::new(env!("CARGO_MANIFEST_DIR"));
    let lib = target_dir().join("libhzlab_ffi.a");
    assert!(lib.exists(), "static library missing at {}", lib.display());
    let work = tempfile::tempdir().unwrap();
    let exe = work.path().join("smoke");
    let status = Command::new("cc")
        .arg("-std=c99")
        .arg("-Wall")
        .arg("-Werror")
        .arg("-I")
        .arg(root.join("include"))
        .arg(root.join("tests/c/smoke.c"))
        .arg(&lib)
        .args(["-lm", "-lpthread", "-ldl"])
        .arg("-o")
        .arg(&exe)
        .status()
        .expect("cc runs");
    assert!(status.success());
    let out = Command::new(&exe).current_dir(work.path()).output().unwrap();
    assert!(out.status.success(), "exit {:?}: {}", out.status, String::from_utf8_lossy(&out.stderr));
    assert_eq!(String::from_utf8_lossy(&out.stdout).trim(), "ok");
}

#[test]
fn header_is_valid_cxx() {
    let root = Path::new(env!("CARGO_MANIFEST_DIR"));
    let work = tempfile::tempdir().unwrap();
    let src = work.path().join("h.cpp");
    std::fs::write(&src, "#include \"hzlab.h\"\nint main() { return hz_last_error_message() == nullptr ? 0 : 0; }\n").unwrap();
    let status = Command::new("c++")
        .arg("-fsyntax-only")
        .arg("-I")
        .arg(root.join("include"))
        .arg(&src)
        .status()
        .expect("c++ runs");
    assert!(status.success());
}
