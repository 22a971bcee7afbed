#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

pub fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

pub fn read_fixture(name: &str) -> String {
    std::fs::read_to_string(fixture(name)).unwrap()
}

/// Config using the mock embedders and, when given, a scripted chat
/// transcript. Sessions go to `<dir>/data`.
pub fn write_config(dir: &Path, transcript: Option<&Path>) -> PathBuf {
    let mut text = String::from("listen = \"127.0.0.1:0\"\ndata_dir = \"data\"\n");
    if let Some(t) = transcript {
        text.push_str(&format!("\n[providers.chat]\nkind = \"scripted\"\ntranscript = {:?}\n", t.display().to_string()));
    }
    text.push_str("\n[providers.style]\nkind = \"mock\"\n\n[providers.content]\nkind = \"mock\"\n");
    let path = dir.join("config.toml");
    std::fs::write(&path, text).unwrap();
    path
}

/// The `wd` binary with a clean environment, run in `dir`.
pub fn wd_command(dir: &Path) -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_wd"));
    cmd.current_dir(dir).env_clear();
    cmd
}

pub fn wd(dir: &Path, args: &[&str]) -> Output {
    wd_command(dir).args(args).output().unwrap()
}

pub fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

pub fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

/// Compares `actual` against a checked-in file. `WD_UPDATE_GOLDEN=1`
/// rewrites the file instead.
pub fn assert_golden(name: &str, actual: &str) {
    let path = fixture("golden").join(name);
    if std::env::var_os("WD_UPDATE_GOLDEN").is_some() {
        std::fs::write(&path, actual).unwrap();
        return;
    }
    let expected = std::fs::read_to_string(&path)
        .unwrap_or_else(|e| panic!("{}: {e} (run with WD_UPDATE_GOLDEN=1 to create it)", path.display()));
    assert_eq!(actual, expected, "{} differs from the golden file", path.display());
}
