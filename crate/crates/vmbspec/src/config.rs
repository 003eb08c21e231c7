//! Run configuration: TOML file with sections, range validation, and a
//! content hash stamped on every output row.
//!
//! ```toml
//! [grid]
//! n_per_axis = 12
//!
//! [branch]
//! which = "two_low1"
//! s_min = 1e-3
//! s_max = 0.1
//! ```
//!
//! Every key is optional; missing keys take the defaults below.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{path}:{line}: {msg}")]
    Parse { path: String, line: usize, msg: String },
    #[error("{path}: {msg}")]
    Read { path: String, msg: String },
    #[error("invalid value for {key}: {msg}")]
    Range { key: String, msg: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridSection {
    pub n_per_axis: usize,
    /// Resolution of the refinement column in `coeffs`.
    pub refine_n: usize,
    pub scale: f64,
}

impl Default for GridSection {
    fn default() -> Self {
        Self { n_per_axis: 12, refine_n: 16, scale: 1.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunSection {
    /// `two`, `one` or `boltzmann`.
    pub species: String,
    pub scenario: String,
    /// Worker threads; 0 picks the number of cores.
    pub threads: usize,
    pub seed: u64,
}

impl Default for RunSection {
    fn default() -> Self {
        Self { species: "two".into(), scenario: "two_species_field".into(), threads: 0, seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BranchSection {
    pub which: String,
    pub s_min: f64,
    pub s_max: f64,
    pub steps: usize,
}

impl Default for BranchSection {
    fn default() -> Self {
        Self { which: "two_low1".into(), s_min: 1e-3, s_max: 0.1, steps: 29 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SpectrumSection {
    pub s: f64,
}

impl Default for SpectrumSection {
    fn default() -> Self {
        Self { s: 0.05 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GapSection {
    pub s_min: f64,
    pub s_max: f64,
    pub steps: usize,
}

impl Default for GapSection {
    fn default() -> Self {
        Self { s_min: 0.5, s_max: 5.0, steps: 8 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DecaySection {
    pub n_per_axis: usize,
    pub n_radial: usize,
    pub s_min: f64,
    pub s_max: f64,
    pub t_max: f64,
    pub n_times: usize,
    /// `aligned` or `direct`.
    pub frames: String,
    pub d0: f64,
    pub r0: f64,
    pub window: [f64; 2],
    pub slope_tol: f64,
}

impl Default for DecaySection {
    fn default() -> Self {
        Self {
            n_per_axis: 8,
            n_radial: 48,
            s_min: 1e-3,
            s_max: 8.0,
            t_max: 500.0,
            n_times: 40,
            frames: "aligned".into(),
            d0: 1.0,
            r0: 1.0,
            window: [50.0, 500.0],
            slope_tol: 0.08,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub grid: GridSection,
    pub run: RunSection,
    pub branch: BranchSection,
    pub spectrum: SpectrumSection,
    pub gap: GapSection,
    pub decay: DecaySection,
}

fn line_of(src: &str, offset: usize) -> usize {
    src[..offset.min(src.len())].bytes().filter(|&b| b == b'\n').count() + 1
}

fn range<T: PartialOrd + std::fmt::Display>(key: &str, v: T, lo: T, hi: T) -> Result<(), ConfigError> {
    if v >= lo && v <= hi {
        Ok(())
    } else {
        Err(ConfigError::Range { key: key.into(), msg: format!("{v} outside [{lo}, {hi}]") })
    }
}

fn one_of(key: &str, v: &str, allowed: &[&str]) -> Result<(), ConfigError> {
    if allowed.contains(&v) {
        Ok(())
    } else {
        Err(ConfigError::Range { key: key.into(), msg: format!("'{v}' is not one of {}", allowed.join(", ")) })
    }
}

pub const BRANCHES: [&str; 7] = ["two_low1", "one_low", "one_det0", "one_det1", "one_osc", "two_high", "one_high"];

impl RunConfig {
    pub fn parse(src: &str, path: &str) -> Result<Self, ConfigError> {
        let cfg: RunConfig = toml::from_str(src).map_err(|e| ConfigError::Parse {
            path: path.into(),
            line: e.span().map(|s| line_of(src, s.start)).unwrap_or(1),
            msg: e.message().to_string(),
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let p = path.display().to_string();
        let src = std::fs::read_to_string(path).map_err(|e| ConfigError::Read { path: p.clone(), msg: e.to_string() })?;
        Self::parse(&src, &p)
    }

    /// Checks every numeric field against its documented range.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let g = &self.grid;
        range("grid.n_per_axis", g.n_per_axis, 4, 24)?;
        range("grid.refine_n", g.refine_n, 4, 24)?;
        range("grid.scale", g.scale, 0.25, 4.0)?;
        one_of("run.species", &self.run.species, &["two", "one", "boltzmann"])?;
        one_of("run.scenario", &self.run.scenario, &["two_species_field", "one_magnetic", "one_electric", "boltzmann"])?;
        range("run.threads", self.run.threads, 0, 1024)?;
        let b = &self.branch;
        one_of("branch.which", &b.which, &BRANCHES)?;
        range("branch.s_min", b.s_min, 1e-6, 1e3)?;
        range("branch.s_max", b.s_max, b.s_min, 1e3)?;
        range("branch.steps", b.steps, 2, 10_000)?;
        range("spectrum.s", self.spectrum.s, 1e-6, 1e3)?;
        range("gap.s_min", self.gap.s_min, 1e-6, 1e3)?;
        range("gap.s_max", self.gap.s_max, self.gap.s_min, 1e3)?;
        range("gap.steps", self.gap.steps, 1, 10_000)?;
        let d = &self.decay;
        range("decay.n_per_axis", d.n_per_axis, 4, 24)?;
        range("decay.n_radial", d.n_radial, 4, 1024)?;
        range("decay.s_min", d.s_min, 1e-8, 1.0)?;
        range("decay.s_max", d.s_max, d.s_min, 100.0)?;
        range("decay.t_max", d.t_max, 2.0, 1e5)?;
        range("decay.n_times", d.n_times, 8, 10_000)?;
        one_of("decay.frames", &d.frames, &["aligned", "direct"])?;
        range("decay.d0", d.d0, 1e-12, 1e12)?;
        range("decay.r0", d.r0, 0.0, 10.0)?;
        range("decay.window[0]", d.window[0], 0.0, d.t_max)?;
        range("decay.window[1]", d.window[1], d.window[0], d.t_max)?;
        range("decay.slope_tol", d.slope_tol, 0.0, 1.0)?;
        Ok(())
    }

    /// First 16 hex digits of the SHA-256 of the canonical TOML form.
    pub fn hash(&self) -> String {
        let canon = toml::to_string(self).expect("config serializes");
        let digest = Sha256::digest(canon.as_bytes());
        digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_roundtrip_and_hash() {
        let c = RunConfig::default();
        c.validate().unwrap();
        let back = RunConfig::parse(&c.to_toml(), "x").unwrap();
        assert_eq!(back, c);
        assert_eq!(back.hash(), c.hash());
        let mut d = c.clone();
        d.grid.n_per_axis = 10;
        assert_ne!(d.hash(), c.hash());
    }

    #[test]
    fn errors_carry_line_numbers() {
        let src = "[grid]\nn_per_axis = 12\n\n[branch]\ns_min = \"low\"\n";
        match RunConfig::parse(src, "cfg.toml") {
            Err(ConfigError::Parse { line, .. }) => assert_eq!(line, 5),
            other => panic!("{other:?}"),
        }
        let src = "[grid]\nn_per_axis = 3\n";
        assert!(matches!(RunConfig::parse(src, "c"), Err(ConfigError::Range { .. })));
        assert!(matches!(RunConfig::parse("[nope]\n", "c"), Err(ConfigError::Parse { line: 1, .. })));
    }
}
