//! Experiment configuration: one TOML file with a section per stage. Unknown keys are rejected.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use sbmlab::particles::InitialMeasure;

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    Profile,
    Spectrum,
    PdeRate,
    Simulate,
    Tail,
    Dimension,
    Tauberian,
    FullPipeline,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub experiment: Option<Experiment>,
    pub seed: u64,
    pub output_dir: PathBuf,
    pub threads: Option<usize>,
    pub profile: ProfileSection,
    pub spectrum: SpectrumSection,
    pub pde_rate: PdeRateSection,
    pub simulate: SimulateSection,
    pub tail: TailSection,
    pub dimension: DimensionSection,
    pub tauberian: TauberianSection,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            experiment: None,
            seed: 1,
            output_dir: PathBuf::from("out"),
            threads: None,
            profile: ProfileSection::default(),
            spectrum: SpectrumSection::default(),
            pde_rate: PdeRateSection::default(),
            simulate: SimulateSection::default(),
            tail: TailSection::default(),
            dimension: DimensionSection::default(),
            tauberian: TauberianSection::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ProfileSection {
    pub step: f64,
    pub y_max: f64,
    pub bracket_tol: f64,
    /// Every `output_stride`-th node goes to profile.csv.
    pub output_stride: usize,
}

impl Default for ProfileSection {
    fn default() -> Self {
        Self { step: 1e-4, y_max: 8.0, bracket_tol: 1e-13, output_stride: 10 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PhiChoice {
    Zero,
    HalfF,
    FullF,
}

impl PhiChoice {
    pub fn name(self) -> &'static str {
        match self {
            PhiChoice::Zero => "zero",
            PhiChoice::HalfF => "half-f",
            PhiChoice::FullF => "full-f",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SpectrumSection {
    pub phi: PhiChoice,
    pub domain_l: f64,
    pub grid_step: f64,
    pub n_max: usize,
    pub output_stride: usize,
}

impl Default for SpectrumSection {
    fn default() -> Self {
        Self { phi: PhiChoice::FullF, domain_l: 12.0, grid_step: 1.0 / 400.0, n_max: 10, output_stride: 4 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PdeRateSection {
    pub t: f64,
    pub lambdas: Vec<f64>,
    pub dy: f64,
    pub ds: f64,
    pub y_max: f64,
}

impl Default for PdeRateSection {
    fn default() -> Self {
        Self { t: 1.0, lambdas: vec![16.0, 32.0, 64.0, 128.0, 256.0, 512.0, 1024.0], dy: 0.02, ds: 0.01, y_max: 10.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimulateSection {
    pub x0: String,
    pub t: f64,
    pub n: usize,
    pub reps: usize,
    pub bandwidth: Option<f64>,
    /// Left-tail levels counted in tail.csv (no fit).
    pub a_levels: Vec<f64>,
    pub holder_bandwidth: f64,
    pub holder_lags: Vec<usize>,
    pub holder_reps: usize,
}

impl Default for SimulateSection {
    fn default() -> Self {
        Self {
            x0: "delta:0".into(),
            t: 1.0,
            n: 10_000,
            reps: 2000,
            bandwidth: None,
            a_levels: vec![0.02, 0.04, 0.08, 0.16, 0.32],
            holder_bandwidth: 0.01,
            holder_lags: vec![2, 4, 8, 16, 32],
            holder_reps: 40,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TailSection {
    pub x0: String,
    pub t: f64,
    pub n: usize,
    pub reps: usize,
    pub bandwidth: Option<f64>,
    pub a_ladder: Vec<f64>,
    pub bootstrap: usize,
}

impl Default for TailSection {
    fn default() -> Self {
        Self {
            x0: "delta:0".into(),
            t: 1.0,
            n: 10_000,
            reps: 100_000,
            bandwidth: None,
            a_ladder: vec![0.02, 0.04, 0.08, 0.16, 0.32],
            bootstrap: 200,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DimensionSource {
    Bz,
    Cantor,
    Subordinator,
    Input,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DimensionSection {
    pub source: DimensionSource,
    pub input: Option<PathBuf>,
    pub cantor_depth: u32,
    /// Subordinator index; `None` means `2 lambda0 - 1`.
    pub alpha: Option<f64>,
    pub jump_floor: f64,
    pub horizon: f64,
    /// Explicit scale ladder; otherwise chosen per source.
    pub scales: Option<Vec<f64>>,
    /// Riesz exponent for an energy estimate.
    pub beta: Option<f64>,
    pub bz: BzSection,
}

impl Default for DimensionSection {
    fn default() -> Self {
        Self {
            source: DimensionSource::Bz,
            input: None,
            cantor_depth: 12,
            alpha: None,
            jump_floor: 1e-6,
            horizon: 1.0,
            scales: None,
            beta: None,
            bz: BzSection::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BzSection {
    pub x0: String,
    pub t: f64,
    pub n: usize,
    pub reps: usize,
    /// The estimate is repeated at `n · 2^k` for `k = 1..=doublings`.
    pub doublings: u32,
    /// Scales `w · 2^k`, `k = 0..scale_count`.
    pub scale_count: usize,
}

impl Default for BzSection {
    fn default() -> Self {
        Self { x0: "lebesgue:[-10,10]:4".into(), t: 1.0, n: 4000, reps: 200, doublings: 2, scale_count: 6 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TauberianSection {
    pub c1: f64,
    pub c2: f64,
    pub p: f64,
    pub ulambda: f64,
}

impl Default for TauberianSection {
    fn default() -> Self {
        Self { c1: 1.0, c2: 1.0, p: 1.0, ulambda: 0.0 }
    }
}

fn bad<T>(msg: impl Into<String>) -> Result<T, CliError> {
    Err(CliError::Config(msg.into()))
}

fn positive(name: &str, v: f64) -> Result<(), CliError> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        bad(format!("{name} must be positive and finite, got {v}"))
    }
}

fn in_range(name: &str, v: f64, lo: f64, hi: f64) -> Result<(), CliError> {
    if v >= lo && v <= hi {
        Ok(())
    } else {
        bad(format!("{name} must lie in [{lo}, {hi}], got {v}"))
    }
}

fn increasing(name: &str, v: &[f64], min_len: usize) -> Result<(), CliError> {
    if v.len() < min_len {
        return bad(format!("{name} needs at least {min_len} entries"));
    }
    if v.iter().any(|x| !(*x > 0.0 && x.is_finite())) || v.windows(2).any(|w| w[1] <= w[0]) {
        return bad(format!("{name} must be positive and strictly increasing"));
    }
    Ok(())
}

fn measure(name: &str, text: &str) -> Result<InitialMeasure, CliError> {
    text.parse().map_err(|e| CliError::Config(format!("{name}: {e}")))
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    /// Checks every section against its documented range.
    pub fn validate(&self) -> Result<(), CliError> {
        if let Some(t) = self.threads {
            if t == 0 {
                return bad("threads must be at least 1");
            }
        }
        let p = &self.profile;
        in_range("profile.step", p.step, 1e-6, 1e-2)?;
        in_range("profile.y_max", p.y_max, 4.0, 20.0)?;
        positive("profile.bracket_tol", p.bracket_tol)?;
        if p.output_stride == 0 {
            return bad("profile.output_stride must be at least 1");
        }

        let s = &self.spectrum;
        in_range("spectrum.domain_l", s.domain_l, 4.0, 40.0)?;
        in_range("spectrum.grid_step", s.grid_step, 1e-4, 0.05)?;
        if s.n_max > 60 {
            return bad("spectrum.n_max must be at most 60");
        }
        if s.output_stride == 0 {
            return bad("spectrum.output_stride must be at least 1");
        }

        let r = &self.pde_rate;
        positive("pde_rate.t", r.t)?;
        increasing("pde_rate.lambdas", &r.lambdas, 4)?;
        in_range("pde_rate.dy", r.dy, 1e-3, 0.1)?;
        in_range("pde_rate.ds", r.ds, 1e-4, 0.1)?;
        in_range("pde_rate.y_max", r.y_max, 6.0, 20.0)?;

        let m = &self.simulate;
        measure("simulate.x0", &m.x0)?;
        positive("simulate.t", m.t)?;
        if m.n == 0 || m.reps == 0 || m.holder_reps == 0 {
            return bad("simulate.n, simulate.reps and simulate.holder_reps must be at least 1");
        }
        if let Some(w) = m.bandwidth {
            positive("simulate.bandwidth", w)?;
        }
        increasing("simulate.a_levels", &m.a_levels, 1)?;
        positive("simulate.holder_bandwidth", m.holder_bandwidth)?;
        let lags: Vec<f64> = m.holder_lags.iter().map(|&k| k as f64).collect();
        increasing("simulate.holder_lags", &lags, 2)?;

        let t = &self.tail;
        measure("tail.x0", &t.x0)?;
        positive("tail.t", t.t)?;
        if t.n == 0 || t.reps == 0 {
            return bad("tail.n and tail.reps must be at least 1");
        }
        if let Some(w) = t.bandwidth {
            positive("tail.bandwidth", w)?;
        }
        increasing("tail.a_ladder", &t.a_ladder, 2)?;

        let d = &self.dimension;
        if !(1..=20).contains(&d.cantor_depth) {
            return bad("dimension.cantor_depth must lie in 1..=20");
        }
        if let Some(a) = d.alpha {
            if !(a > 0.0 && a < 1.0) {
                return bad(format!("dimension.alpha must lie in (0, 1), got {a}"));
            }
        }
        positive("dimension.jump_floor", d.jump_floor)?;
        positive("dimension.horizon", d.horizon)?;
        if let Some(scales) = &d.scales {
            let mut sorted = scales.clone();
            sorted.sort_by(f64::total_cmp);
            increasing("dimension.scales", &sorted, 2)?;
        }
        if let Some(b) = d.beta {
            if !(b > 0.0 && b < 1.0) {
                return bad(format!("dimension.beta must lie in (0, 1), got {b}"));
            }
        }
        if d.source == DimensionSource::Input {
            match &d.input {
                Some(path) if path.is_file() => {}
                Some(path) => return bad(format!("dimension.input {} is not a readable file", path.display())),
                None => return bad("dimension.source = input needs dimension.input"),
            }
        }
        let b = &d.bz;
        measure("dimension.bz.x0", &b.x0)?;
        positive("dimension.bz.t", b.t)?;
        if b.n == 0 || b.reps == 0 {
            return bad("dimension.bz.n and dimension.bz.reps must be at least 1");
        }
        if b.doublings > 4 {
            return bad("dimension.bz.doublings must be at most 4");
        }
        if b.scale_count < 2 {
            return bad("dimension.bz.scale_count must be at least 2");
        }

        let q = &self.tauberian;
        positive("tauberian.c2", q.c2)?;
        positive("tauberian.p", q.p)?;
        if !(q.c1 >= 0.0) || !(q.ulambda >= 0.0) {
            return bad("tauberian.c1 and tauberian.ulambda must be nonnegative");
        }
        Ok(())
    }

    /// SHA-256 of the configuration with the run-local fields (output directory, thread count)
    /// cleared, so the same experiment hashes the same wherever it is written.
    pub fn hash(&self) -> String {
        let mut canonical = self.clone();
        canonical.output_dir = PathBuf::new();
        canonical.threads = None;
        let json = serde_json::to_string(&canonical).expect("config serializes");
        hex::encode(Sha256::digest(json.as_bytes()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        ExperimentConfig::default().validate().unwrap();
    }

    #[test]
    fn parses_partial_files() {
        let c = ExperimentConfig::from_toml("seed = 7\n[tail]\nreps = 10\n[dimension]\nsource = \"cantor\"\n").unwrap();
        assert_eq!(c.seed, 7);
        assert_eq!(c.tail.reps, 10);
        assert_eq!(c.tail.n, 10_000);
        assert_eq!(c.dimension.source, DimensionSource::Cantor);
    }

    #[test]
    fn rejects_unknown_keys() {
        assert!(ExperimentConfig::from_toml("sed = 7").is_err());
        assert!(ExperimentConfig::from_toml("[tail]\nrepz = 1").is_err());
        assert!(ExperimentConfig::from_toml("[dimension.bz]\nN = 1").is_err());
    }

    #[test]
    fn rejects_out_of_range_values() {
        for text in [
            "[profile]\nstep = 0.5",
            "[pde_rate]\nlambdas = [16.0, 8.0, 32.0, 64.0]",
            "[simulate]\nx0 = \"gauss:0\"",
            "[tail]\na_ladder = [0.1]",
            "[dimension]\nbeta = 1.5",
            "[dimension]\nsource = \"input\"",
            "[tauberian]\nc2 = 0.0",
            "threads = 0",
        ] {
            let c = ExperimentConfig::from_toml(text).unwrap();
            assert!(matches!(c.validate(), Err(CliError::Config(_))), "{text}");
        }
    }

    #[test]
    fn hash_ignores_output_location() {
        let a = ExperimentConfig::default();
        let mut b = a.clone();
        b.output_dir = PathBuf::from("/elsewhere");
        b.threads = Some(3);
        assert_eq!(a.hash(), b.hash());
        b.seed += 1;
        assert_ne!(a.hash(), b.hash());
    }
}
