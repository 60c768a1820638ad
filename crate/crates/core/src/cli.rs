//! Command-line front end: configuration, experiment drivers and output.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::affine_deform::Cocycle;
use crate::error::{Error, Result};
use crate::fuchsian::{self, Sl2Matrix};
use crate::principal_rep::Representation;
use crate::surface_group::{solve_cocycle_space, GroupPresentation};

mod commands;

/// Environment variable holding the worker thread count.
pub const THREADS_ENV: &str = "SURFLAB_THREADS";

#[derive(Parser, Debug)]
#[command(name = "surflab", version, about = "Length spectra, Margulis invariants and entropy of surface-group representations")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,

    /// JSON experiment configuration.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub p: Option<usize>,
    /// Length bound T.
    #[arg(long, global = true)]
    pub radius: Option<f64>,
    /// Extra search radius beyond the certified class ball.
    #[arg(long, global = true)]
    pub slack: Option<f64>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true)]
    pub tolerance: Option<f64>,
}

#[derive(Subcommand, Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    /// Relator, form signatures and form preservation.
    CheckRep,
    /// Per-class eigenvalue data.
    Spectrum,
    /// Entropy of the hyperbolic and last-root length functions.
    Entropy,
    /// Margulis invariants and their closed-orbit averages.
    Margulis,
    /// Transversality margins over sampled fixed-point triples.
    Transversality,
    /// Eigenvalue derivative against the Margulis invariant and finite differences.
    DerivCheck,
    /// Entropy of the perturbed last-root lengths along a grid.
    Scan,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::CheckRep => "check-rep",
            Command::Spectrum => "spectrum",
            Command::Entropy => "entropy",
            Command::Margulis => "margulis",
            Command::Transversality => "transversality",
            Command::DerivCheck => "deriv-check",
            Command::Scan => "scan",
        }
    }
}

/// Builtin octagon group or explicit SL(2,R) generators `[a, b, c, d]` for
/// the genus-2 presentation.
#[derive(Clone, Debug, Deserialize, Serialize, PartialEq)]
#[serde(untagged)]
pub enum GroupSpec {
    Builtin(String),
    Explicit { generators: Vec<[f64; 4]> },
}

#[derive(Clone, Debug, Deserialize, Serialize, PartialEq)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum CocycleSpec {
    /// Gaussian combination of a basis of the cocycle space; falls back to
    /// the top-level seed.
    Random { seed: Option<u64> },
    /// `omega_g = v - rho0(g) v`.
    Coboundary { vector: Vec<f64> },
    /// One vector per generator.
    Explicit { vectors: Vec<Vec<f64>> },
}

#[derive(Clone, Debug, Deserialize, Serialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub p: usize,
    pub group: GroupSpec,
    pub cocycle: Option<CocycleSpec>,
    pub radius: f64,
    pub slack: f64,
    /// Fit window; defaults to `[radius - 4, radius]`.
    pub window: Option<[f64; 2]>,
    pub tolerance: f64,
    pub seed: Option<u64>,
    /// Number of sampled words, triples or classes.
    pub samples: usize,
    /// Perturbation scales for `scan`.
    pub grid: Vec<f64>,
    /// Finite-difference step for `deriv-check`.
    pub fd_step: f64,
    pub out: PathBuf,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            p: 2,
            group: GroupSpec::Builtin(BUILTIN_GROUP.into()),
            cocycle: None,
            radius: 8.0,
            slack: 0.0,
            window: None,
            tolerance: 1e-9,
            seed: None,
            samples: 1000,
            grid: vec![-0.1, -0.05, 0.0, 0.05, 0.1],
            fd_step: 1e-4,
            out: PathBuf::from("out"),
        }
    }
}

pub const BUILTIN_GROUP: &str = "genus2-octagon";

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct PartialConfig {
    p: Option<usize>,
    group: Option<GroupSpec>,
    cocycle: Option<CocycleSpec>,
    radius: Option<f64>,
    slack: Option<f64>,
    window: Option<[f64; 2]>,
    tolerance: Option<f64>,
    seed: Option<u64>,
    samples: Option<usize>,
    grid: Option<Vec<f64>>,
    fd_step: Option<f64>,
    out: Option<PathBuf>,
}

impl ExperimentConfig {
    /// Defaults, overridden by the config file, overridden by flags.
    pub fn resolve(cli: &Cli) -> Result<Self> {
        let mut c = ExperimentConfig::default();
        if let Some(path) = &cli.config {
            let text = fs::read_to_string(path)
                .map_err(|e| Error::invalid(format!("cannot read config {}: {e}", path.display())))?;
            let pc: PartialConfig = serde_json::from_str(&text)
                .map_err(|e| Error::invalid(format!("config {}: {e}", path.display())))?;
            macro_rules! take {
                ($($f:ident),*) => { $(if let Some(v) = pc.$f { c.$f = v; })* };
            }
            take!(p, group, radius, slack, tolerance, samples, grid, fd_step, out);
            c.cocycle = pc.cocycle;
            c.window = pc.window;
            c.seed = pc.seed;
        }
        macro_rules! flag {
            ($($f:ident),*) => { $(if let Some(v) = cli.$f.clone() { c.$f = v; })* };
        }
        flag!(p, radius, slack, tolerance, out);
        if cli.seed.is_some() {
            c.seed = cli.seed;
        }
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::invalid(m));
        if !(2..=6).contains(&self.p) {
            return bad(format!("p = {} is outside 2..=6", self.p));
        }
        if !(self.radius.is_finite() && self.radius > 0.0 && self.radius <= 20.0) {
            return bad(format!("radius = {} is outside (0, 20]", self.radius));
        }
        if !(self.slack.is_finite() && (0.0..=10.0).contains(&self.slack)) {
            return bad(format!("slack = {} is outside [0, 10]", self.slack));
        }
        if !(self.tolerance.is_finite() && self.tolerance > 0.0 && self.tolerance < 1.0) {
            return bad(format!("tolerance = {} is outside (0, 1)", self.tolerance));
        }
        if !(1..=10_000_000).contains(&self.samples) {
            return bad(format!("samples = {} is outside 1..=10^7", self.samples));
        }
        if !(self.fd_step.is_finite() && self.fd_step > 0.0 && self.fd_step < 1.0) {
            return bad(format!("fd_step = {} is outside (0, 1)", self.fd_step));
        }
        if self.grid.iter().any(|s| !s.is_finite() || s.abs() > 1.0) {
            return bad("grid values must lie in [-1, 1]".into());
        }
        if let Some([t0, t1]) = self.window {
            if !(t0.is_finite() && t1.is_finite() && t0 > 0.0 && t1 > t0 && t1 <= self.radius) {
                return bad(format!("window [{t0}, {t1}] must satisfy 0 < T0 < T1 <= radius"));
            }
        }
        if let GroupSpec::Builtin(name) = &self.group {
            if name != BUILTIN_GROUP {
                return bad(format!("unknown builtin group '{name}' (expected '{BUILTIN_GROUP}')"));
            }
        }
        if let Some(CocycleSpec::Random { seed: None }) = self.cocycle {
            if self.seed.is_none() {
                return bad("a random cocycle needs a seed".into());
            }
        }
        Ok(())
    }

    pub fn window(&self) -> [f64; 2] {
        self.window.unwrap_or([(self.radius - 4.0).max(0.5), self.radius])
    }

    pub fn require_seed(&self, what: &str) -> Result<u64> {
        self.seed.ok_or_else(|| Error::invalid(format!("{what} needs a seed (--seed or \"seed\")")))
    }

    pub fn is_builtin(&self) -> bool {
        matches!(self.group, GroupSpec::Builtin(_))
    }

    pub fn sl2_generators(&self) -> Result<(GroupPresentation, Vec<Sl2Matrix>)> {
        match &self.group {
            GroupSpec::Builtin(_) => fuchsian::octagon_group(),
            GroupSpec::Explicit { generators } => {
                let presentation = GroupPresentation::genus2();
                if generators.len() != presentation.generator_count() {
                    return Err(Error::invalid(format!(
                        "expected {} generators, got {}",
                        presentation.generator_count(),
                        generators.len()
                    )));
                }
                let gens = generators
                    .iter()
                    .map(|m| Sl2Matrix::new(m[0], m[1], m[2], m[3]))
                    .collect::<Result<Vec<_>>>()?;
                Ok((presentation, gens))
            }
        }
    }

    pub fn representation(&self) -> Result<Representation> {
        let (presentation, gens) = self.sl2_generators()?;
        Representation::from_sl2(self.p, presentation, gens)
    }

    /// The configured cocycle on `V`, if any, checked against the relator.
    pub fn cocycle(&self, rep: &Representation) -> Result<Option<Cocycle>> {
        let Some(spec) = &self.cocycle else { return Ok(None) };
        let d = rep.dim();
        let k = rep.generator_count();
        let omega = match spec {
            CocycleSpec::Random { seed } => {
                let seed = seed.or(self.seed).ok_or_else(|| Error::invalid("a random cocycle needs a seed"))?;
                Cocycle::random(&solve_cocycle_space(rep)?, seed)?
            }
            CocycleSpec::Coboundary { vector } => {
                if vector.len() != d {
                    return Err(Error::invalid(format!("coboundary vector has length {}, expected {d}", vector.len())));
                }
                Cocycle::coboundary(rep, &DVector::from_column_slice(vector))
            }
            CocycleSpec::Explicit { vectors } => {
                if vectors.len() != k || vectors.iter().any(|v| v.len() != d) {
                    return Err(Error::invalid(format!("explicit cocycle must be {k} vectors of length {d}")));
                }
                Cocycle::new(vectors.iter().map(|v| DVector::from_column_slice(v)).collect())
            }
        };
        if let Some(r) = omega.relator_residual(rep) {
            let scale = omega.flatten().amax().max(1.0) * rep.relator_conditioning().unwrap_or(1.0);
            if r > self.tolerance.max(1e-9) * scale {
                return Err(Error::invalid(format!("cocycle does not vanish on the relator (residual {r:e})")));
            }
        }
        Ok(Some(omega))
    }

    pub fn require_cocycle(&self, rep: &Representation) -> Result<Cocycle> {
        self.cocycle(rep)?.ok_or_else(|| Error::invalid("this subcommand needs a \"cocycle\" in the config"))
    }
}

/// Writes `contents` to `path` through a temporary file in the same
/// directory and a rename.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|d| !d.as_os_str().is_empty()).unwrap_or(Path::new("."));
    fs::create_dir_all(dir)?;
    let name = path.file_name().ok_or_else(|| Error::invalid("output path has no file name"))?;
    let tmp = dir.join(format!(".{}.tmp{}", name.to_string_lossy(), std::process::id()));
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(contents)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_atomic(path, text.as_bytes())
}

/// Float formatting for CSV files: 17 significant digits.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

/// Machine-readable diagnostic for standard error.
pub fn diagnostic(err: &Error) -> String {
    serde_json::json!({
        "error": err.kind(),
        "message": err.to_string(),
        "exit_code": err.exit_code(),
    })
    .to_string()
}

/// Configures the global thread pool from [`THREADS_ENV`]; all cores when
/// unset.
pub fn init_threads() -> Result<()> {
    let Ok(v) = std::env::var(THREADS_ENV) else { return Ok(()) };
    let n: usize = v
        .trim()
        .parse()
        .ok()
        .filter(|n| *n > 0)
        .ok_or_else(|| Error::invalid(format!("{THREADS_ENV} = '{v}' is not a positive integer")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| Error::invalid(format!("cannot configure threads: {e}")))
}

/// Runs one subcommand and returns the paths it wrote.
pub fn run(command: Command, config: &ExperimentConfig) -> Result<Vec<PathBuf>> {
    log::info!("{} with p = {}, radius = {}", command.name(), config.p, config.radius);
    match command {
        Command::CheckRep => commands::check_rep(config),
        Command::Spectrum => commands::spectrum(config),
        Command::Entropy => commands::entropy(config),
        Command::Margulis => commands::margulis(config),
        Command::Transversality => commands::transversality(config),
        Command::DerivCheck => commands::deriv_check(config),
        Command::Scan => commands::scan(config),
    }
}

/// Parses arguments, runs, and returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return 0;
            }
            eprintln!("{}", diagnostic(&Error::invalid(e.to_string().trim().to_string())));
            return 1;
        }
    };
    let result = init_threads()
        .and_then(|_| ExperimentConfig::resolve(&cli))
        .and_then(|c| run(cli.command, &c));
    match result {
        Ok(paths) => {
            for p in paths {
                println!("{}", p.display());
            }
            0
        }
        Err(e) => {
            eprintln!("{}", diagnostic(&e));
            e.exit_code()
        }
    }
}
