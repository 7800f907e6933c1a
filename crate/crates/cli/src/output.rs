//! Where results go and the provenance block every artifact carries.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Serialize;

pub const OUT_DIR_VAR: &str = "MANYBELL_OUT_DIR";

/// Tool, version and the full configuration of one invocation.
#[derive(Serialize)]
pub struct Provenance<'a, C: Serialize> {
    pub tool: &'static str,
    pub version: &'static str,
    pub subcommand: &'static str,
    pub config: &'a C,
}

impl<'a, C: Serialize> Provenance<'a, C> {
    pub fn new(subcommand: &'static str, config: &'a C) -> Self {
        Provenance {
            tool: env!("CARGO_PKG_NAME"),
            version: env!("CARGO_PKG_VERSION"),
            subcommand,
            config,
        }
    }

    /// `# ` lines for the top of a CSV file.
    pub fn csv_comments(&self) -> Result<String> {
        Ok(format!(
            "# {} {} {}\n# config {}\n",
            self.tool,
            self.version,
            self.subcommand,
            serde_json::to_string(self.config)?
        ))
    }

    /// `{"provenance": ..., "result": ...}`, pretty-printed.
    pub fn json_document<R: Serialize>(&self, result: &R) -> Result<String> {
        #[derive(Serialize)]
        struct Doc<'p, P: Serialize, R: Serialize> {
            provenance: &'p P,
            result: &'p R,
        }
        let mut text = serde_json::to_string_pretty(&Doc {
            provenance: self,
            result,
        })?;
        text.push('\n');
        Ok(text)
    }
}

/// `--out` if given, else `$MANYBELL_OUT_DIR/<default_name>`, else `None`
/// for standard output.
pub fn destination(out: &Option<PathBuf>, default_name: &str) -> Result<Option<PathBuf>> {
    if let Some(path) = out {
        return Ok(Some(path.clone()));
    }
    match std::env::var_os(OUT_DIR_VAR) {
        Some(dir) if !dir.is_empty() => {
            let dir = PathBuf::from(dir);
            fs::create_dir_all(&dir)
                .with_context(|| format!("creating output directory {}", dir.display()))?;
            Ok(Some(dir.join(default_name)))
        }
        _ => Ok(None),
    }
}

pub fn emit(dest: Option<&Path>, content: &str) -> Result<()> {
    match dest {
        Some(path) => {
            fs::write(path, content).with_context(|| format!("writing {}", path.display()))
        }
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(content.as_bytes())?;
            stdout.flush()?;
            Ok(())
        }
    }
}
