//! Configured experiment pipelines and their file artifacts.

pub mod config;
pub mod csv;
pub mod svg;

mod commands;

pub use commands::log_check_scenario;

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use crate::error::{Error, Result};

pub use config::{Config, KeySpec};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Simulate,
    VerifyEstimates,
    Picard,
    Lifespan,
    Decay,
}

impl Command {
    pub const ALL: [Command; 5] = [
        Command::Simulate,
        Command::VerifyEstimates,
        Command::Picard,
        Command::Lifespan,
        Command::Decay,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Command::Simulate => "simulate",
            Command::VerifyEstimates => "verify-estimates",
            Command::Picard => "picard",
            Command::Lifespan => "lifespan",
            Command::Decay => "decay",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| Error::invalid(format!("unknown command `{s}`")))
    }

    pub fn schema(&self) -> &'static [KeySpec] {
        match self {
            Command::Simulate => commands::SIMULATE,
            Command::VerifyEstimates => commands::VERIFY,
            Command::Picard => commands::PICARD,
            Command::Lifespan => commands::LIFESPAN,
            Command::Decay => commands::DECAY,
        }
    }

    /// Schema defaults for this command.
    pub fn config(&self) -> Config {
        Config::new(self.name(), self.schema())
    }
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Output files keyed by name, written in name order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Artifacts {
    pub files: BTreeMap<String, String>,
    /// Computation-level outcomes (blow-up, divergence, failed fits), also listed in the summary.
    pub flags: Vec<String>,
}

impl Artifacts {
    pub fn add(&mut self, name: &str, body: String) {
        self.files.insert(name.to_string(), body);
    }

    pub fn get(&self, name: &str) -> Option<&str> {
        self.files.get(name).map(String::as_str)
    }

    pub fn flag(&mut self, msg: impl Into<String>) {
        self.flags.push(msg.into());
    }

    pub fn write_to(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        for (name, body) in &self.files {
            std::fs::write(dir.join(name), body)?;
        }
        Ok(())
    }
}

/// The manifest: code version followed by the resolved configuration.
pub fn manifest(cfg: &Config) -> String {
    format!("# radwave {VERSION}\n{}", cfg.render())
}

/// Validates the whole configuration, runs the pipeline and collects every output file.
pub fn run(cfg: &Config) -> Result<Artifacts> {
    let cmd = Command::parse(cfg.command())?;
    let mut out = match cmd {
        Command::Simulate => commands::simulate(cfg)?,
        Command::VerifyEstimates => commands::verify(cfg)?,
        Command::Picard => commands::picard(cfg)?,
        Command::Lifespan => commands::lifespan(cfg)?,
        Command::Decay => commands::decay(cfg)?,
    };
    let mut summary = format!("radwave {VERSION} {cmd}\n");
    if out.flags.is_empty() {
        summary.push_str("flags: none\n");
    } else {
        for f in &out.flags {
            summary.push_str(&format!("flag: {f}\n"));
        }
    }
    summary.push_str(out.get("summary.txt").unwrap_or(""));
    out.add("summary.txt", summary);
    out.add("manifest.txt", manifest(cfg));
    Ok(out)
}

/// Reads a config file on top of the command defaults.
pub fn load(cmd: Command, path: Option<&Path>) -> Result<Config> {
    let mut cfg = cmd.config();
    if let Some(p) = path {
        let text = std::fs::read_to_string(p)
            .map_err(|e| Error::invalid(format!("cannot read config {}: {e}", p.display())))?;
        cfg.apply_text(&text)?;
    }
    Ok(cfg)
}
