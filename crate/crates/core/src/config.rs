//! Flat `key = value` run configuration.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::fields::FieldKind;

/// Recognized keys, in canonical order.
pub const CONFIG_KEYS: [&str; 9] = [
    "n",
    "nu",
    "dt",
    "t_end",
    "sample_every",
    "init",
    "seed",
    "dealias",
    "snapshot_every",
];

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    pub n: usize,
    pub nu: f64,
    pub dt: f64,
    pub t_end: f64,
    pub sample_every: usize,
    /// `zero`, `taylor_green` or `random_div_free`.
    pub init: String,
    pub seed: u64,
    pub dealias: bool,
    /// Keep a velocity snapshot every this many samples; 0 keeps none.
    pub snapshot_every: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            n: 32,
            nu: 0.1,
            dt: 1e-3,
            t_end: 1.0,
            sample_every: 10,
            init: "taylor_green".into(),
            seed: 0,
            dealias: true,
            snapshot_every: 1,
        }
    }
}

fn bad(key: &str, message: impl Into<String>) -> Error {
    Error::Config {
        key: key.into(),
        message: message.into(),
    }
}

fn parse_value<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| bad(key, format!("cannot parse `{value}`")))
}

impl SolverConfig {
    /// Parse `key = value` lines. `#` starts a comment. Every key except
    /// `n`, `nu`, `dt`, `t_end` and `init` has a default.
    pub fn parse(text: &str) -> Result<Self> {
        let mut c = Self::default();
        let mut seen: Vec<&str> = Vec::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| bad(line, format!("line {} is not `key = value`", lineno + 1)))?;
            let (key, value) = (key.trim(), value.trim());
            let Some(&canonical) = CONFIG_KEYS.iter().find(|k| **k == key) else {
                return Err(bad(key, "unknown key"));
            };
            if seen.contains(&canonical) {
                return Err(bad(key, "duplicate key"));
            }
            seen.push(canonical);
            match canonical {
                "n" => c.n = parse_value(key, value)?,
                "nu" => c.nu = parse_value(key, value)?,
                "dt" => c.dt = parse_value(key, value)?,
                "t_end" => c.t_end = parse_value(key, value)?,
                "sample_every" => c.sample_every = parse_value(key, value)?,
                "init" => c.init = value.to_string(),
                "seed" => c.seed = parse_value(key, value)?,
                "dealias" => c.dealias = parse_value(key, value)?,
                "snapshot_every" => c.snapshot_every = parse_value(key, value)?,
                _ => unreachable!(),
            }
        }
        for required in ["n", "nu", "dt", "t_end", "init"] {
            if !seen.contains(&required) {
                return Err(bad(required, "missing required key"));
            }
        }
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 8 || !self.n.is_multiple_of(2) {
            return Err(bad("n", format!("{} must be even and >= 8", self.n)));
        }
        if !(self.nu > 0.0 && self.nu.is_finite()) {
            return Err(bad("nu", format!("{} must be positive", self.nu)));
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(bad("dt", format!("{} must be positive", self.dt)));
        }
        if !(self.t_end >= 0.0 && self.t_end.is_finite()) {
            return Err(bad("t_end", format!("{} must be nonnegative", self.t_end)));
        }
        if self.sample_every == 0 {
            return Err(bad("sample_every", "must be at least 1"));
        }
        FieldKind::from_str(&self.init).map_err(|e| bad("init", e.to_string()))?;
        crate::solver::step_count(self.t_end, self.dt)?;
        Ok(())
    }

    /// The initial condition with the configured seed applied.
    pub fn init_kind(&self) -> FieldKind {
        match FieldKind::from_str(&self.init) {
            Ok(FieldKind::RandomDivFree { slope, cutoff, .. }) => FieldKind::RandomDivFree {
                seed: self.seed,
                slope,
                cutoff,
            },
            Ok(k) => k,
            Err(_) => FieldKind::Zero,
        }
    }
}

impl fmt::Display for SolverConfig {
    /// Canonical text form; parses back to the same config.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "n = {}", self.n)?;
        writeln!(f, "nu = {}", self.nu)?;
        writeln!(f, "dt = {}", self.dt)?;
        writeln!(f, "t_end = {}", self.t_end)?;
        writeln!(f, "sample_every = {}", self.sample_every)?;
        writeln!(f, "init = {}", self.init)?;
        writeln!(f, "seed = {}", self.seed)?;
        writeln!(f, "dealias = {}", self.dealias)?;
        writeln!(f, "snapshot_every = {}", self.snapshot_every)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASIC: &str = "n = 16\nnu = 0.1\ndt = 0.001\nt_end = 0.01\ninit = taylor_green\n";

    #[test]
    fn parses_with_defaults() {
        let c = SolverConfig::parse(BASIC).unwrap();
        assert_eq!(c.n, 16);
        assert_eq!(c.sample_every, 10);
        assert!(c.dealias);
        assert_eq!(c.init_kind(), FieldKind::TaylorGreen);
    }

    #[test]
    fn roundtrips_through_display() {
        let mut c = SolverConfig::parse(BASIC).unwrap();
        c.init = "random_div_free".into();
        c.seed = 42;
        let back = SolverConfig::parse(&c.to_string()).unwrap();
        assert_eq!(back, c);
        assert!(matches!(back.init_kind(), FieldKind::RandomDivFree { seed: 42, .. }));
    }

    #[test]
    fn comments_and_blank_lines() {
        let text = format!("# run\n\n{BASIC}seed = 3 # trailing\n");
        assert_eq!(SolverConfig::parse(&text).unwrap().seed, 3);
    }

    #[test]
    fn errors_name_the_key() {
        let cases = [
            (format!("{BASIC}viscosity = 1\n"), "viscosity"),
            (format!("{BASIC}n = 16\n"), "n"),
            (BASIC.replace("nu = 0.1", "nu = -1"), "nu"),
            (BASIC.replace("n = 16", "n = 15"), "n"),
            (BASIC.replace("taylor_green", "vortex"), "init"),
            (BASIC.replace("dt = 0.001", "dt = abc"), "dt"),
            (BASIC.replace("t_end = 0.01", "t_end = 0.0105"), "t_end"),
            (BASIC.replace("dt = 0.001\n", ""), "dt"),
            (format!("{BASIC}dealias = maybe\n"), "dealias"),
            (format!("{BASIC}sample_every = 0\n"), "sample_every"),
        ];
        for (text, key) in cases {
            match SolverConfig::parse(&text) {
                Err(Error::Config { key: k, .. }) => assert_eq!(k, key, "{text}"),
                other => panic!("expected config error for {key}, got {other:?}"),
            }
        }
    }
}
