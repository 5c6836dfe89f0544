//! Project configuration (TOML). Physical keys carry their unit in the name.

use std::collections::HashSet;
use std::path::Path;

use nalgebra::Matrix3;
use serde::{Deserialize, Serialize};

use crate::bath::{BathConfig, SequenceKind, SequenceParams};
use crate::constants::YSO_Y_DENSITY;
use crate::spin::{Site, SpinSystemSpec};
use crate::{Error, Result};

pub const SCHEMA_VERSION: u32 = 1;

type Tensor = [[f64; 3]; 3];

fn matrix(t: &Tensor) -> Matrix3<f64> {
    Matrix3::from_fn(|i, j| t[i][j])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpinSystemConfig {
    pub label: String,
    pub site: Site,
    /// 2I.
    #[serde(default)]
    pub two_i: u8,
    #[serde(default = "unit")]
    pub abundance: f64,
    pub g: Tensor,
    #[serde(default)]
    pub a_mhz: Option<Tensor>,
    #[serde(default)]
    pub q_mhz: Option<Tensor>,
    #[serde(default)]
    pub gamma_n_hz_per_t: f64,
    /// Gaussian EDFS linewidth, mT.
    #[serde(default = "default_fwhm")]
    pub fwhm_mt: f64,
}

fn unit() -> f64 {
    1.0
}

fn default_fwhm() -> f64 {
    1.0
}

impl SpinSystemConfig {
    pub fn to_spec(&self) -> Result<SpinSystemSpec> {
        let spec = SpinSystemSpec {
            label: self.label.clone(),
            two_i: self.two_i,
            abundance: self.abundance,
            g: matrix(&self.g),
            a: self.a_mhz.map(|t| matrix(&t) * 1e6).unwrap_or_else(Matrix3::zeros),
            q: self.q_mhz.map(|t| matrix(&t) * 1e6),
            gamma_n: self.gamma_n_hz_per_t,
            site: self.site,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn from_spec(spec: &SpinSystemSpec, fwhm_mt: f64) -> Self {
        let t = |m: &Matrix3<f64>, s: f64| -> Tensor {
            let mut out = [[0.0; 3]; 3];
            for (i, row) in out.iter_mut().enumerate() {
                for (j, v) in row.iter_mut().enumerate() {
                    *v = m[(i, j)] * s;
                }
            }
            out
        };
        SpinSystemConfig {
            label: spec.label.clone(),
            site: spec.site,
            two_i: spec.two_i,
            abundance: spec.abundance,
            g: t(&spec.g, 1.0),
            a_mhz: (spec.two_i > 0).then(|| t(&spec.a, 1e-6)),
            q_mhz: spec.q.as_ref().map(|q| t(q, 1e-6)),
            gamma_n_hz_per_t: spec.gamma_n,
            fwhm_mt,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BathPreset {
    pub label: String,
    #[serde(flatten)]
    pub bath: BathConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SequencePreset {
    pub label: String,
    pub kind: SequenceKind,
    #[serde(default)]
    pub tau_s: f64,
    #[serde(default)]
    pub tw_s: f64,
    #[serde(default = "one_cycle")]
    pub cycles: usize,
    #[serde(default)]
    pub n_pulses: Option<usize>,
    #[serde(default)]
    pub pulse_error: f64,
    /// Bath this preset is meant for.
    #[serde(default)]
    pub bath: Option<String>,
}

fn one_cycle() -> usize {
    1
}

impl SequencePreset {
    pub fn params(&self) -> SequenceParams {
        SequenceParams {
            tau: self.tau_s,
            tw: self.tw_s,
            cycles: self.cycles,
            n_pulses: self.n_pulses,
            pulse_error: self.pulse_error,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConstantsConfig {
    /// Host cation density, m⁻³.
    #[serde(default = "host_density")]
    pub host_density_m3: f64,
}

fn host_density() -> f64 {
    YSO_Y_DENSITY
}

impl Default for ConstantsConfig {
    fn default() -> Self {
        ConstantsConfig { host_density_m3: YSO_Y_DENSITY }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProjectConfig {
    pub schema_version: u32,
    #[serde(default)]
    pub output_dir: Option<String>,
    #[serde(default)]
    pub constants: ConstantsConfig,
    #[serde(default, rename = "spin_system")]
    pub spin_systems: Vec<SpinSystemConfig>,
    #[serde(default, rename = "bath")]
    pub baths: Vec<BathPreset>,
    #[serde(default, rename = "sequence")]
    pub sequences: Vec<SequencePreset>,
}

impl ProjectConfig {
    pub fn validate(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(Error::Config(format!(
                "unsupported schema_version {} (expected {SCHEMA_VERSION})",
                self.schema_version
            )));
        }
        let mut seen = HashSet::new();
        for label in self
            .spin_systems
            .iter()
            .map(|s| &s.label)
            .chain(self.baths.iter().map(|b| &b.label))
            .chain(self.sequences.iter().map(|s| &s.label))
        {
            if !seen.insert(label.as_str()) {
                return Err(Error::Config(format!("duplicate label `{label}`")));
            }
        }
        for s in &self.spin_systems {
            s.to_spec().map_err(|e| Error::Config(e.to_string()))?;
        }
        for b in &self.baths {
            b.bath.validate().map_err(|e| Error::Config(format!("bath `{}`: {e}", b.label)))?;
        }
        for s in &self.sequences {
            if let Some(bath) = &s.bath {
                if !self.baths.iter().any(|b| &b.label == bath) {
                    return Err(Error::Config(format!("sequence `{}` references unknown bath `{bath}`", s.label)));
                }
            }
        }
        Ok(())
    }

    pub fn spin_system(&self, label: &str) -> Result<SpinSystemSpec> {
        self.spin_systems
            .iter()
            .find(|s| s.label == label)
            .ok_or_else(|| Error::InvalidInput(format!("unknown spin system `{label}`")))?
            .to_spec()
    }

    pub fn bath(&self, label: &str) -> Result<&BathConfig> {
        self.baths
            .iter()
            .find(|b| b.label == label)
            .map(|b| &b.bath)
            .ok_or_else(|| Error::InvalidInput(format!("unknown bath `{label}`")))
    }

    pub fn sequence(&self, label: &str) -> Result<&SequencePreset> {
        self.sequences
            .iter()
            .find(|s| s.label == label)
            .ok_or_else(|| Error::InvalidInput(format!("unknown sequence preset `{label}`")))
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }
}

pub fn parse_config(text: &str) -> Result<ProjectConfig> {
    let cfg: ProjectConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
    cfg.validate()?;
    Ok(cfg)
}

pub fn load_config(path: &Path) -> Result<ProjectConfig> {
    let text = std::fs::read_to_string(path)?;
    parse_config(&text)
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = r#"
schema_version = 1

[[spin_system]]
label = "free"
site = "I"
g = [[2.0, 0.0, 0.0], [0.0, 2.0, 0.0], [0.0, 0.0, 2.0]]

[[bath]]
label = "pair"
gamma_central_hz_per_t = 2.8e10
realizations = 10

[[bath.species]]
label = "b"
density_m3 = 4.7e23
gamma_hz_per_t = 8.4e10
flip_rate_hz = 925.0

[[sequence]]
label = "echo"
kind = "hahn"
tau_s = 1e-6
bath = "pair"
"#;

    #[test]
    fn parses_sample() {
        let c = parse_config(SAMPLE).unwrap();
        assert_eq!(c.spin_system("free").unwrap().two_i, 0);
        assert_eq!(c.bath("pair").unwrap().species[0].flip_rate_hz, 925.0);
        assert_eq!(c.bath("pair").unwrap().box_spins, 2000);
        assert_eq!(c.sequence("echo").unwrap().kind, SequenceKind::Hahn);
        let again = parse_config(&c.to_toml().unwrap()).unwrap();
        assert_eq!(again, c);
    }

    #[test]
    fn rejects_bad_version_and_duplicates() {
        assert!(matches!(parse_config(&SAMPLE.replace("schema_version = 1", "schema_version = 9")), Err(Error::Config(_))));
        let dup = SAMPLE.replace("label = \"echo\"", "label = \"free\"");
        assert!(matches!(parse_config(&dup), Err(Error::Config(_))));
        let dangling = SAMPLE.replace("bath = \"pair\"", "bath = \"nope\"");
        assert!(matches!(parse_config(&dangling), Err(Error::Config(_))));
    }
}
