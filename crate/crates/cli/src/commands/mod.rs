//! Subcommand implementations and shared artifact plumbing.

pub mod analyze;
pub mod fuse;
pub mod ingest;
pub mod ml;
pub mod probe;
pub mod record;
pub mod relay;
pub mod simulate;

use std::fs;
use std::net::{SocketAddr, ToSocketAddrs};
use std::path::{Path, PathBuf};

use anyhow::{anyhow, Context, Result};
use serde::Serialize;

use cvqx_core::util::atomic_write;

use crate::config::PipelineConfig;
use crate::UsageError;

/// Resolved global state every subcommand sees.
pub struct Ctx {
    pub cfg: PipelineConfig,
    /// --seed, or the config file's seed; commands fall back to 0.
    pub seed: Option<u64>,
    pub out_dir: PathBuf,
}

impl Ctx {
    pub fn seed_or_default(&self) -> u64 {
        self.seed.unwrap_or(0)
    }
}

/// Write one artifact into the output directory atomically.
pub fn write_artifact(out_dir: &Path, name: &str, bytes: &[u8]) -> Result<PathBuf> {
    fs::create_dir_all(out_dir)
        .with_context(|| format!("cannot create output directory {}", out_dir.display()))?;
    let path = out_dir.join(name);
    atomic_write(&path, bytes).with_context(|| format!("cannot write {}", path.display()))?;
    Ok(path)
}

/// Record the fully resolved settings that produced this directory's
/// artifacts. One file per command (`effective-<command>.toml`) so a
/// directory shared by several pipeline stages keeps the provenance of
/// each. The output directory itself is not echoed — the file's location
/// already states it, and omitting it keeps reruns into different
/// directories byte-comparable.
pub fn echo_effective<T: Serialize>(
    out_dir: &Path,
    command: &str,
    seed: Option<u64>,
    section: &T,
) -> Result<()> {
    let mut doc = toml::map::Map::new();
    doc.insert("command".into(), toml::Value::String(command.into()));
    if let Some(seed) = seed {
        doc.insert("seed".into(), toml::Value::Integer(seed as i64));
    }
    doc.insert(command.into(), toml::Value::try_from(section)?);
    let text = toml::to_string_pretty(&toml::Value::Table(doc))?;
    write_artifact(out_dir, &format!("effective-{command}.toml"), text.as_bytes())?;
    Ok(())
}

/// Resolve "host:port" to a socket address (first match wins).
pub fn resolve_addr(text: &str, what: &str) -> Result<SocketAddr> {
    text.to_socket_addrs()
        .map_err(|err| anyhow!(UsageError(format!("cannot resolve {what} '{text}': {err}"))))?
        .next()
        .ok_or_else(|| anyhow!(UsageError(format!("{what} '{text}' resolves to no address"))))
}
