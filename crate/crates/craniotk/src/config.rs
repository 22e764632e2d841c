//! Key-value configuration files and setting resolution.
//!
//! A config file holds `key = value` lines (`#` comments allowed). Each
//! setting resolves as command-line flag, then config file, then built-in
//! default; the resolved values and their sources are echoed in the run
//! log header.
//!
//! Recognised keys (all optional):
//!
//! | key | used by |
//! |---|---|
//! | `threads` | all |
//! | `n`, `seed`, `spacing`, `margin_mm`, `subset`, `id_prefix` | phantom |
//! | `seed`, `template`, `noise_p`, `sphere_radius_mm`, `cube_edge_mm`, `cylinder_ratio`, `upper_quantile` | craniectomy |
//! | `threshold`, `iterations`, `grid_dims`, `grid_spacing` | atlas |
//! | `band_mm`, `max_iterations`, `tolerance`, `max_samples` | registration in atlas, register, reconstruct, craniectomy export |
//! | `close_radius_mm`, `open_radius_mm`, `d_max_mm` | reconstruct |
//! | `hd_percentile` | evaluate |
//!
//! List values (`spacing`, `grid_dims`, ranges) are comma-separated.

use std::collections::BTreeMap;
use std::fmt::Display;
use std::path::Path;
use std::str::FromStr;

use crate::io::atlas_store::parse_key_values;
use crate::{Error, Result};

#[derive(Debug, Clone, Default)]
pub struct Config {
    values: BTreeMap<String, String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Source {
    Flag,
    Config,
    Default,
}

impl Source {
    pub fn name(self) -> &'static str {
        match self {
            Source::Flag => "flag",
            Source::Config => "config",
            Source::Default => "default",
        }
    }
}

impl Config {
    pub fn parse(text: &str) -> Result<Self> {
        let values = parse_key_values(text).map_err(|e| Error::Usage(format!("config: {e}")))?;
        Ok(Config { values })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Config::parse(&text)
    }

    pub fn raw(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(String::as_str)
    }
}

/// Resolved settings of one run, in resolution order.
#[derive(Debug, Default)]
pub struct Settings<'a> {
    config: Option<&'a Config>,
    pub resolved: Vec<(String, String, Source)>,
}

impl<'a> Settings<'a> {
    pub fn new(config: Option<&'a Config>) -> Self {
        Settings { config, resolved: Vec::new() }
    }

    /// Resolve `key` from a flag, the config file, or `default`.
    pub fn get<T: Parse>(&mut self, key: &str, flag: Option<T>, default: T) -> Result<T> {
        let (value, source) = match self.lookup(key, flag)? {
            Some(found) => found,
            None => (default, Source::Default),
        };
        self.resolved.push((key.to_string(), value.show(), source));
        Ok(value)
    }

    /// Like [`Settings::get`] for settings without a default.
    pub fn get_opt<T: Parse>(&mut self, key: &str, flag: Option<T>) -> Result<Option<T>> {
        let found = self.lookup(key, flag)?;
        if let Some((v, source)) = &found {
            self.resolved.push((key.to_string(), v.show(), *source));
        }
        Ok(found.map(|(v, _)| v))
    }

    /// Record a value that was resolved elsewhere.
    pub fn record(&mut self, key: &str, value: impl Display, source: Source) {
        self.resolved.push((key.to_string(), value.to_string(), source));
    }

    fn lookup<T: Parse>(&self, key: &str, flag: Option<T>) -> Result<Option<(T, Source)>> {
        if let Some(v) = flag {
            return Ok(Some((v, Source::Flag)));
        }
        match self.config.and_then(|c| c.raw(key)) {
            Some(raw) => {
                let v = T::parse(raw).map_err(|e| Error::Usage(format!("config key `{key}`: {e}")))?;
                Ok(Some((v, Source::Config)))
            }
            None => Ok(None),
        }
    }
}

/// Values that can be read from a config file and echoed in logs.
pub trait Parse: Sized {
    fn parse(s: &str) -> std::result::Result<Self, String>;
    fn show(&self) -> String;
}

macro_rules! parse_via_fromstr {
    ($($t:ty),*) => {$(
        impl Parse for $t {
            fn parse(s: &str) -> std::result::Result<Self, String> {
                <$t as FromStr>::from_str(s.trim()).map_err(|e| e.to_string())
            }
            fn show(&self) -> String {
                format!("{self}")
            }
        }
    )*};
}

parse_via_fromstr!(u8, u64, usize, f64, String, crate::io::DatasetSubset);

impl<T: Parse + Copy, const N: usize> Parse for [T; N] {
    fn parse(s: &str) -> std::result::Result<Self, String> {
        let parts: Vec<T> = s.split(',').map(T::parse).collect::<std::result::Result<_, _>>()?;
        match parts.len() {
            1 => Ok([parts[0]; N]),
            n if n == N => Ok(std::array::from_fn(|i| parts[i])),
            n => Err(format!("expected 1 or {N} comma-separated values, got {n}")),
        }
    }
    fn show(&self) -> String {
        self.iter().map(Parse::show).collect::<Vec<_>>().join(",")
    }
}

impl Parse for (f64, f64) {
    fn parse(s: &str) -> std::result::Result<Self, String> {
        let [lo, hi] = <[f64; 2]>::parse(s)?;
        Ok((lo, hi))
    }
    fn show(&self) -> String {
        format!("{},{}", self.0, self.1)
    }
}

/// clap value parser for comma-separated triples (`1.0` or `1,1,2`).
pub fn parse_triple<T: Parse + Copy>(s: &str) -> std::result::Result<[T; 3], String> {
    <[T; 3]>::parse(s)
}
