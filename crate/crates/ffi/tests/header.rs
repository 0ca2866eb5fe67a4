use std::path::Path;
use std::process::Command;

fn header() -> String {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("include/tangent_mbd.h");
    std::fs::read_to_string(path).expect("build script writes the header")
}

#[test]
fn header_declares_the_api() {
    let h = header();
    for item in [
        "typedef struct TmbdScenario TmbdScenario;",
        "typedef struct TmbdTrajectory TmbdTrajectory;",
        "TMBD_STATUS_OK = 0",
        "TMBD_METHOD_NEWMARK_MINIMAL = 3",
        "tmbd_scenario_new(",
        "tmbd_scenario_run(",
        "tmbd_trajectory_vector(",
        "tmbd_trajectory_write_csv(",
        "tmbd_last_error_message(void)",
        "tmbd_newmark_dt_limit(",
    ] {
        assert!(h.contains(item), "header lacks {item}");
    }
}

#[test]
fn header_compiles_as_c99() {
    let Ok(out) = Command::new("cc")
        .args(["-std=c99", "-Wall", "-Werror", "-fsyntax-only", "-x", "c"])
        .arg(Path::new(env!("CARGO_MANIFEST_DIR")).join("include/tangent_mbd.h"))
        .output()
    else {
        eprintln!("no C compiler on PATH; skipped");
        return;
    };
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
}
