//! Shared helpers for integration tests.

// Each test binary compiles this module but uses only part of it.
#![allow(dead_code)]

pub mod oracle;

use std::path::{Path, PathBuf};
use std::process::Command;

/// Path of the workspace-level `data/` directory.
pub fn data_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data")
}

/// Run the rankfuse binary with the given args.
pub fn rankfuse_cmd(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_rankfuse"))
        .args(args)
        .output()
        .expect("failed to launch rankfuse binary")
}
