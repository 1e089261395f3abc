//! Run configuration: JSON file, environment and flags, resolved in that
//! order of increasing precedence on top of the built-in defaults.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use serde::{Deserialize, Serialize};

pub const OUTPUT_DIR_ENV: &str = "TODA_OUTPUT_DIR";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum CommandKind {
    Spectrum,
    Kernel,
    VerifyClosedForm,
    Detect,
    Continue,
    PerturbCartan,
    Diagnose,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Family {
    Liouville,
    Jostwang,
}

/// Everything a run can be configured with; every field is optional so the
/// same shape serves the config file and the flag overrides.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub command: Option<CommandKind>,
    pub grid_size: Option<usize>,
    pub stretch: Option<f64>,
    pub alpha: Option<f64>,
    pub mode_n: Option<usize>,
    pub eps_max: Option<f64>,
    pub mu_range: Option<[f64; 2]>,
    pub tol: Option<f64>,
    pub seed: Option<u64>,
    pub output_dir: Option<PathBuf>,
    pub max_n: Option<usize>,
    pub steps: Option<usize>,
    pub family: Option<Family>,
    pub mu: Option<f64>,
    pub delta: Option<f64>,
    pub a1: Option<f64>,
    pub a2: Option<f64>,
    pub mu_target: Option<f64>,
    pub noise: Option<f64>,
    pub input: Option<PathBuf>,
    pub id: Option<String>,
    pub dump_fields: Option<bool>,
}

impl RunConfig {
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing config {}", path.display()))
    }

    /// Fields set in `over` replace those in `self`.
    pub fn overlay(mut self, over: RunConfig) -> Self {
        macro_rules! take {
            ($($f:ident),*) => { $( if over.$f.is_some() { self.$f = over.$f; } )* };
        }
        take!(
            command, grid_size, stretch, alpha, mode_n, eps_max, mu_range, tol, seed, output_dir,
            max_n, steps, family, mu, delta, a1, a2, mu_target, noise, input, id, dump_fields
        );
        self
    }
}

/// Fully resolved settings.
#[derive(Debug, Clone)]
pub struct Settings {
    pub command: CommandKind,
    pub grid_size: usize,
    pub stretch: f64,
    pub alpha: f64,
    pub mode_n: usize,
    pub eps_max: f64,
    pub mu_range: (f64, f64),
    pub tol: f64,
    pub seed: u64,
    pub output_dir: PathBuf,
    pub max_n: usize,
    pub steps: usize,
    pub family: Family,
    pub mu: f64,
    pub delta: f64,
    pub a1: f64,
    pub a2: f64,
    pub mu_target: f64,
    pub noise: f64,
    pub input: Option<PathBuf>,
    pub id: Option<String>,
    pub dump_fields: bool,
}

/// `file ⊕ env ⊕ flags` over the defaults, then validated.
pub fn resolve(file: RunConfig, env_output: Option<PathBuf>, flags: RunConfig) -> anyhow::Result<Settings> {
    let env = RunConfig { output_dir: env_output, ..Default::default() };
    let c = file.overlay(env).overlay(flags);
    let Some(command) = c.command else {
        bail!("no command given on the command line or in the config file");
    };
    let s = Settings {
        command,
        grid_size: c.grid_size.unwrap_or(400),
        stretch: c.stretch.unwrap_or(4.0),
        alpha: c.alpha.unwrap_or(0.5),
        mode_n: c.mode_n.unwrap_or(2),
        eps_max: c.eps_max.unwrap_or(1e-3),
        mu_range: c.mu_range.map_or((-1.6, 0.5), |[a, b]| (a, b)),
        tol: c.tol.unwrap_or(1e-10),
        seed: c.seed.unwrap_or(0),
        output_dir: c.output_dir.unwrap_or_else(|| PathBuf::from("out")),
        max_n: c.max_n.unwrap_or(5),
        steps: c.steps.unwrap_or(8),
        family: c.family.unwrap_or(Family::Liouville),
        mu: c.mu.unwrap_or(0.0),
        delta: c.delta.unwrap_or(1.0),
        a1: c.a1.unwrap_or(1.0),
        a2: c.a2.unwrap_or(1.0),
        mu_target: c.mu_target.unwrap_or(-0.95),
        noise: c.noise.unwrap_or(0.0),
        input: c.input,
        id: c.id,
        dump_fields: c.dump_fields.unwrap_or(false),
    };
    s.validate()?;
    Ok(s)
}

impl Settings {
    fn validate(&self) -> anyhow::Result<()> {
        if self.grid_size < 16 {
            bail!("grid_size must be at least 16, got {}", self.grid_size);
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            bail!("alpha must lie in (0, 1), got {}", self.alpha);
        }
        if !(self.tol > 0.0) {
            bail!("tol must be positive, got {}", self.tol);
        }
        if !(self.stretch > 0.0 && self.stretch.is_finite()) {
            bail!("stretch must be positive, got {}", self.stretch);
        }
        if !(self.noise >= 0.0 && self.noise.is_finite()) {
            bail!("noise must be nonnegative, got {}", self.noise);
        }
        if self.steps == 0 {
            bail!("steps must be positive");
        }
        if let Some(id) = &self.id {
            if id.is_empty() || !id.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-') {
                bail!("report id must be nonempty and use [A-Za-z0-9_-], got {id:?}");
            }
        }
        Ok(())
    }
}
