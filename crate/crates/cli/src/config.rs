//! Flat `key = value` run configuration with flag overrides, typed getters,
//! and the stable hashes embedded in every output header.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use logibranch_core::assembly::ProblemParams;
use logibranch_core::domain::DomainSpec;

/// Error category carrying the process exit code.
#[derive(Debug)]
pub enum CliError {
    /// Bad configuration or arguments (exit 2).
    Config(String),
    /// A solver or tracer failed at runtime (exit 3).
    Solver(String),
    /// A mathematical precondition was violated (exit 4).
    Precondition(String),
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "configuration error: {m}"),
            CliError::Solver(m) => write!(f, "solver failure: {m}"),
            CliError::Precondition(m) => write!(f, "precondition violation: {m}"),
        }
    }
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Solver(_) => 3,
            CliError::Precondition(_) => 4,
        }
    }
}

impl From<logibranch_core::error::Error> for CliError {
    fn from(e: logibranch_core::error::Error) -> Self {
        use logibranch_core::error::Error as E;
        match e {
            E::InvalidParams(_) | E::DegenerateDomain(_) | E::MeshMismatch { .. } => {
                CliError::Config(e.to_string())
            }
            E::LambdaOmegaNotGreaterThanOne { .. }
            | E::PreconditionLambdaOmega(_)
            | E::NonDifferentiableBoundary { .. }
            | E::NotInCone(_) => CliError::Precondition(e.to_string()),
            _ => CliError::Solver(e.to_string()),
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;

/// The merged configuration: file keys first, then flag overrides.
#[derive(Debug, Clone, Default)]
pub struct RunConfig {
    map: BTreeMap<String, String>,
}

impl RunConfig {
    pub fn load(path: Option<&Path>) -> CliResult<Self> {
        let mut cfg = RunConfig::default();
        if let Some(p) = path {
            let text = std::fs::read_to_string(p)
                .map_err(|e| CliError::Config(format!("cannot read {}: {e}", p.display())))?;
            for (ln, raw) in text.lines().enumerate() {
                let line = raw.trim();
                if line.is_empty() || line.starts_with('#') {
                    continue;
                }
                let Some((k, v)) = line.split_once('=') else {
                    return Err(CliError::Config(format!(
                        "{}:{}: expected `key = value`, got `{raw}`",
                        p.display(),
                        ln + 1
                    )));
                };
                cfg.set(k.trim(), v.trim());
            }
        }
        Ok(cfg)
    }

    pub fn set(&mut self, key: &str, value: &str) {
        self.map.insert(key.to_string(), value.to_string());
    }

    pub fn set_if_absent(&mut self, key: &str, value: &str) {
        self.map
            .entry(key.to_string())
            .or_insert_with(|| value.to_string());
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.map.get(key).map(|s| s.as_str())
    }

    pub fn str_or(&self, key: &str, default: &str) -> String {
        self.get(key).unwrap_or(default).to_string()
    }

    pub fn require(&self, key: &str) -> CliResult<&str> {
        self.get(key)
            .ok_or_else(|| CliError::Config(format!("missing required key `{key}`")))
    }

    pub fn f64_or(&self, key: &str, default: f64) -> CliResult<f64> {
        match self.get(key) {
            None => Ok(default),
            Some(s) => s
                .parse()
                .map_err(|_| CliError::Config(format!("key `{key}`: `{s}` is not a number"))),
        }
    }

    pub fn usize_or(&self, key: &str, default: usize) -> CliResult<usize> {
        match self.get(key) {
            None => Ok(default),
            Some(s) => s
                .parse()
                .map_err(|_| CliError::Config(format!("key `{key}`: `{s}` is not an integer"))),
        }
    }

    /// Comma-separated float list, required to be strictly increasing.
    pub fn f64_list(&self, key: &str) -> CliResult<Vec<f64>> {
        let raw = self.require(key)?;
        let mut out = Vec::new();
        for part in raw.split(',') {
            let v: f64 = part.trim().parse().map_err(|_| {
                CliError::Config(format!("key `{key}`: `{part}` is not a number"))
            })?;
            out.push(v);
        }
        if out.windows(2).any(|w| w[1] <= w[0]) {
            return Err(CliError::Config(format!(
                "key `{key}`: grid must be strictly increasing"
            )));
        }
        Ok(out)
    }

    pub fn domain(&self) -> CliResult<DomainSpec> {
        let raw = self.require("domain")?;
        DomainSpec::parse(raw).map_err(CliError::from)
    }

    pub fn resolution(&self) -> CliResult<usize> {
        self.usize_or("n", 1024)
    }

    pub fn params(&self) -> CliResult<ProblemParams> {
        let p = self.f64_or("p", 2.0)?;
        let q = self.f64_or("q", 0.5)?;
        let lambda = self.f64_or("lambda", 0.0)?;
        let eps = self.f64_or("eps", 0.0)?;
        let base = ProblemParams::new(p, q, lambda).map_err(CliError::from)?;
        base.with_eps(eps).map_err(CliError::from)
    }

    /// Canonical text form: sorted `key=value` lines.
    fn canonical(&self) -> String {
        let mut s = String::new();
        for (k, v) in &self.map {
            s.push_str(k);
            s.push('=');
            s.push_str(v);
            s.push('\n');
        }
        s
    }

    /// Hash of the whole configuration (reproducibility stamp).
    pub fn config_hash(&self) -> u64 {
        fnv1a(self.canonical().as_bytes())
    }

    /// Hash of the problem identity `(p, q, domain)` only; the diagram
    /// merger refuses files whose identity hashes differ.
    pub fn identity_hash(&self) -> CliResult<u64> {
        let p = self.f64_or("p", 2.0)?;
        let q = self.f64_or("q", 0.5)?;
        let d = self.str_or("domain", "");
        Ok(fnv1a(
            format!("p={p:.17e};q={q:.17e};domain={d}").as_bytes(),
        ))
    }
}

/// 64-bit FNV-1a: stable across builds, unlike the stdlib hasher.
fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// Shared output header: version, config hash, identity hash, mesh size.
pub fn header_line(cfg: &RunConfig, mesh_h: f64) -> CliResult<String> {
    Ok(format!(
        "# logibranch {} config={:016x} key={:016x} h={}",
        env!("CARGO_PKG_VERSION"),
        cfg.config_hash(),
        cfg.identity_hash()?,
        fmt_f64(mesh_h)
    ))
}

/// 17-significant-digit decimal, round-trip exact for doubles.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}
