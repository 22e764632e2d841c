//! `craniotk` subcommands.
//!
//! Exit codes: 0 success, 1 runtime failure (including any failed case in a
//! batch), 2 usage error. Progress and errors go to stderr as JSON lines;
//! result tables go to stdout.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use craniotk_core::atlas::CaseMap;
use craniotk_core::registration::RegistrationOptions;

use crate::config::{Config, Parse, Settings};
use crate::exec::{thread_count, Pool};
use crate::io::{CaseEntry, DatasetManifest};
use crate::{log, Error, Result};

mod atlas;
mod craniectomy;
mod evaluate;
mod phantom;
mod reconstruct;
mod register;

#[derive(Debug, Parser)]
#[command(name = "craniotk", version, about = "Synthetic skull defects, atlas building and implant reconstruction")]
pub struct Cli {
    /// Key-value config file; flags take precedence over it.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Worker threads (falls back to CRANIOTK_THREADS, then all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a population of synthetic full skulls.
    Phantom(phantom::PhantomArgs),
    /// Carve simulated craniectomies out of full skulls.
    Craniectomy(craniectomy::CraniectomyArgs),
    /// Build an average-shape atlas from full skulls.
    Atlas(atlas::AtlasArgs),
    /// Rigidly register skulls to an atlas.
    Register(register::RegisterArgs),
    /// Estimate implants with a baseline method.
    Reconstruct(reconstruct::ReconstructArgs),
    /// Score predicted implants against ground truth.
    Evaluate(evaluate::EvaluateArgs),
}

/// Input layout written by `--export-training`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum TrainingVariant {
    /// One channel: the defected skull.
    De,
    /// Two channels: the defected skull and the atlas prior.
    DeShape,
}

impl TrainingVariant {
    pub fn channels(self) -> Vec<crate::io::Channel> {
        use crate::io::Channel;
        match self {
            TrainingVariant::De => vec![Channel::Defected],
            TrainingVariant::DeShape => vec![Channel::Defected, Channel::Prior],
        }
    }
}

macro_rules! parse_value_enum {
    ($($t:ty),*) => {$(
        impl Parse for $t {
            fn parse(s: &str) -> std::result::Result<Self, String> {
                <$t as ValueEnum>::from_str(s.trim(), false)
            }
            fn show(&self) -> String {
                self.to_possible_value().map(|v| v.get_name().to_string()).unwrap_or_default()
            }
        }
    )*};
}

parse_value_enum!(TrainingVariant, craniectomy::TemplateChoice, reconstruct::Method);

/// Parse `args` (including the program name), run, and return the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = e.print();
                return 0;
            }
            let message = e.to_string();
            let first = message.lines().next().unwrap_or("").trim_start_matches("error: ").to_string();
            let _ = e.print();
            let err = Error::Usage(first);
            log::error(&err);
            return err.exit_code();
        }
    };
    match dispatch(cli) {
        Ok(()) => 0,
        Err(e) => {
            log::error(&e);
            e.exit_code()
        }
    }
}

fn dispatch(cli: Cli) -> Result<()> {
    let config = match &cli.config {
        Some(p) => Some(Config::load(p)?),
        None => None,
    };
    let ctx = Context { config, threads: cli.threads };
    match cli.command {
        Command::Phantom(a) => phantom::run(a, &ctx),
        Command::Craniectomy(a) => craniectomy::run(a, &ctx),
        Command::Atlas(a) => atlas::run(a, &ctx),
        Command::Register(a) => register::run(a, &ctx),
        Command::Reconstruct(a) => reconstruct::run(a, &ctx),
        Command::Evaluate(a) => evaluate::run(a, &ctx),
    }
}

pub(crate) struct Context {
    config: Option<Config>,
    threads: Option<usize>,
}

impl Context {
    fn settings(&self) -> Settings<'_> {
        Settings::new(self.config.as_ref())
    }

    fn pool(&self, settings: &mut Settings<'_>) -> Result<Pool> {
        let explicit = settings.get_opt("threads", self.threads)?;
        let n = thread_count(explicit)?;
        if explicit.is_none() {
            settings.record("threads", n, crate::config::Source::Default);
        }
        Pool::new(n)
    }
}

pub(crate) fn registration_options(settings: &mut Settings<'_>) -> Result<RegistrationOptions> {
    let d = RegistrationOptions::default();
    let opts = RegistrationOptions {
        band_mm: settings.get("band_mm", None, d.band_mm)?,
        max_iterations_per_level: settings.get("max_iterations", None, d.max_iterations_per_level)?,
        tolerance: settings.get("tolerance", None, d.tolerance)?,
        max_samples: settings.get("max_samples", None, d.max_samples)?,
        ..d
    };
    if !(opts.band_mm > 0.0) || opts.max_samples == 0 || !(opts.tolerance > 0.0) {
        return Err(Error::Usage("band_mm, tolerance and max_samples must be positive".into()));
    }
    Ok(opts)
}

pub(crate) fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

/// Absolute form of an input path, for manifests written elsewhere.
pub(crate) fn absolute(p: &Path) -> Result<String> {
    let abs = std::fs::canonicalize(p).map_err(|e| Error::io(p, e))?;
    Ok(abs.display().to_string())
}

/// Read a manifest and return it with the directory its paths refer to.
pub(crate) fn load_manifest(path: &Path) -> Result<(DatasetManifest, PathBuf)> {
    let m = crate::io::read_manifest(path)?;
    Ok((m, crate::io::manifest::base_dir(path)))
}

pub(crate) fn input_path(base: &Path, p: &str) -> PathBuf {
    crate::io::manifest::resolve(base, p)
}

/// Run `f` over every case in the pool, log each outcome and return the
/// successes in case order. Fails after all cases ran if any case failed.
pub(crate) fn for_each_case<T: Send>(
    pool: &Pool,
    cases: &[CaseEntry],
    f: impl Fn(usize, &CaseEntry) -> Result<(T, serde_json::Value)> + Sync,
) -> (Vec<T>, Option<Error>) {
    let results = pool.map(cases.len(), |i| f(i, &cases[i]));
    let mut ok = Vec::new();
    let mut failed = 0;
    for (case, r) in cases.iter().zip(results) {
        match r {
            Ok((v, detail)) => {
                log::case_done(&case.case_id, detail);
                ok.push(v);
            }
            Err(e) => {
                log::case_failed(&case.case_id, &e);
                failed += 1;
            }
        }
    }
    let err = (failed > 0).then_some(Error::CaseFailures { failed, total: cases.len() });
    (ok, err)
}

pub(crate) fn missing(what: &str) -> Error {
    Error::Usage(format!("missing required {what}"))
}
