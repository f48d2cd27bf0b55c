#![allow(dead_code)]

use std::path::PathBuf;
use std::process::Output;

pub const PRESETS: [&str; 3] = ["plain", "tented", "strong"];

pub fn bin() -> std::process::Command {
    std::process::Command::new(env!("CARGO_BIN_EXE_archflow"))
}

pub fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("spawn archflow")
}

pub fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).expect("utf-8 stdout")
}

pub fn golden_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("tests/golden")
        .join(name)
}

/// Compares `actual` with the stored golden file. With `UPDATE_GOLDEN=1`
/// the file is rewritten instead.
pub fn check_golden(name: &str, actual: &str) -> Result<(), String> {
    let path = golden_path(name);
    if std::env::var_os("UPDATE_GOLDEN").is_some_and(|v| v == "1") {
        std::fs::write(&path, actual).map_err(|e| format!("{}: {e}", path.display()))?;
        return Ok(());
    }
    let expected = std::fs::read_to_string(&path)
        .map_err(|e| format!("{}: {e} (regenerate with UPDATE_GOLDEN=1)", path.display()))?;
    if expected == actual {
        return Ok(());
    }
    let line = expected
        .lines()
        .zip(actual.lines())
        .position(|(a, b)| a != b)
        .map_or_else(|| "length".to_string(), |i| format!("line {}", i + 1));
    Err(format!("{name} differs from golden at {line}"))
}
