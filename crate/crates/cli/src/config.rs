//! TOML scenario files. Unknown keys are rejected; every value is re-checked by
//! the library constructors when the run starts.

use std::fs;
use std::path::Path;

use boxctrl::control::{GrapeSettings, TransferOptions};
use boxctrl::linalg::CVector;
use boxctrl::propagation::Stepping;
use boxctrl::resonance::DEFAULT_RESONANCE_TOL;
use boxctrl::stability::DEFAULT_EPSILON;
use boxctrl::{BasisTruncation, BoxGeometry, SpectralState};
use num_complex::Complex64;
use serde::de::DeserializeOwned;
use serde::Deserialize;
use sha2::{Digest, Sha256};

use crate::Failure;

/// A parsed config with the SHA-256 of its raw bytes.
pub struct Loaded<T> {
    pub config: T,
    pub sha256: String,
}

pub fn load<T: DeserializeOwned>(path: &Path) -> Result<Loaded<T>, Failure> {
    let raw = fs::read(path)
        .map_err(|e| Failure::invalid(format!("cannot read {}: {e}", path.display())))?;
    let text = std::str::from_utf8(&raw)
        .map_err(|_| Failure::invalid(format!("{} is not UTF-8", path.display())))?;
    let config =
        toml::from_str(text).map_err(|e| Failure::invalid(format!("{}: {e}", path.display())))?;
    Ok(Loaded {
        config,
        sha256: sha256_hex(&raw),
    })
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes)
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

/// `"ground"`, `"excited-k"` (the k-th excited mode), a 1-based basis index, or a
/// list of `[re, im]` coefficients (normalized on load).
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum StateSpec {
    Index(usize),
    Name(String),
    Coefficients(Vec<[f64; 2]>),
}

impl Default for StateSpec {
    fn default() -> Self {
        StateSpec::Name("ground".into())
    }
}

impl StateSpec {
    pub fn build(
        &self,
        n: BasisTruncation,
        geometry: BoxGeometry,
    ) -> Result<SpectralState, Failure> {
        match self {
            StateSpec::Index(j) => Ok(SpectralState::basis(*j, n, geometry)?),
            StateSpec::Name(name) => {
                let j = match name.as_str() {
                    "ground" => 1,
                    other => other
                        .strip_prefix("excited-")
                        .and_then(|k| k.parse::<usize>().ok())
                        .filter(|&k| k >= 1)
                        .map(|k| k + 1)
                        .ok_or_else(|| Failure::invalid(format!("unknown state \"{other}\"")))?,
                };
                Ok(SpectralState::basis(j, n, geometry)?)
            }
            StateSpec::Coefficients(list) => {
                if list.is_empty() || list.len() > n.dim() {
                    return Err(Failure::invalid(format!(
                        "coefficient list needs 1..={} entries, got {}",
                        n.dim(),
                        list.len()
                    )));
                }
                let mut c = CVector::zeros(n.dim());
                for (k, [re, im]) in list.iter().enumerate() {
                    c[k] = Complex64::new(*re, *im);
                }
                Ok(SpectralState::new(c, geometry).normalized()?)
            }
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Endpoint {
    pub length: f64,
    pub center: f64,
    #[serde(default)]
    pub state: StateSpec,
}

impl Endpoint {
    pub fn geometry(&self) -> Result<BoxGeometry, Failure> {
        Ok(BoxGeometry::new(self.length, self.center)?)
    }
}

/// Sub-steps per linear segment and an optional largest step `h`.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Integrator {
    pub substeps: usize,
    pub step: Option<f64>,
}

impl Default for Integrator {
    fn default() -> Self {
        Self {
            substeps: Stepping::default().min_substeps,
            step: None,
        }
    }
}

impl Integrator {
    pub fn stepping(&self) -> Result<Stepping, Failure> {
        if self.substeps == 0 {
            return Err(Failure::invalid("integrator.substeps must be positive"));
        }
        if let Some(h) = self.step {
            if !(h > 0.0 && h.is_finite()) {
                return Err(Failure::invalid(format!(
                    "integrator.step must be positive, got {h}"
                )));
            }
        }
        Ok(Stepping {
            min_substeps: self.substeps,
            max_step: self.step.unwrap_or(f64::INFINITY),
        })
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Synthesis {
    pub segments: Vec<usize>,
    pub horizons: Vec<f64>,
    pub lift_start: usize,
    pub lift_max: usize,
    pub multistarts: usize,
    pub iterations: usize,
    pub learning_rate: f64,
    pub init_scale: f64,
}

impl Default for Synthesis {
    fn default() -> Self {
        let o = TransferOptions::default();
        Self {
            segments: o.segments,
            horizons: o.horizons,
            lift_start: o.lift_start,
            lift_max: o.lift_max,
            multistarts: o.grape.multistarts,
            iterations: o.grape.iterations,
            learning_rate: o.grape.learning_rate,
            init_scale: o.grape.init_scale,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TransferConfig {
    #[serde(default = "default_truncation")]
    pub truncation: usize,
    pub epsilon: f64,
    pub rate_bound: f64,
    #[serde(default)]
    pub seed: u64,
    pub initial: Endpoint,
    pub target: Endpoint,
    #[serde(default)]
    pub integrator: Integrator,
    #[serde(default)]
    pub synthesis: Synthesis,
    /// Rows kept in trajectory.csv (evenly thinned, last step always kept).
    #[serde(default = "default_samples")]
    pub trajectory_samples: usize,
}

impl TransferConfig {
    pub fn options(
        &self,
        seed: u64,
        execution: boxctrl::Execution,
    ) -> Result<TransferOptions, Failure> {
        let s = &self.synthesis;
        if s.segments.is_empty() || s.horizons.is_empty() || s.segments.contains(&0) {
            return Err(Failure::invalid(
                "synthesis.segments and synthesis.horizons must be non-empty and positive",
            ));
        }
        if s.horizons.iter().any(|&t| !(t > 0.0 && t.is_finite())) {
            return Err(Failure::invalid("synthesis.horizons must be positive"));
        }
        if s.lift_start == 0 || s.lift_max < s.lift_start {
            return Err(Failure::invalid(
                "need 0 < synthesis.lift_start <= synthesis.lift_max",
            ));
        }
        if s.multistarts == 0
            || s.learning_rate.is_nan()
            || s.learning_rate <= 0.0
            || !(s.init_scale >= 0.0 && s.init_scale < 1.0)
        {
            return Err(Failure::invalid(
                "synthesis needs multistarts >= 1, learning_rate > 0 and 0 <= init_scale < 1",
            ));
        }
        if self.trajectory_samples < 2 {
            return Err(Failure::invalid("trajectory_samples must be at least 2"));
        }
        Ok(TransferOptions {
            segments: s.segments.clone(),
            horizons: s.horizons.clone(),
            lift_start: s.lift_start,
            lift_max: s.lift_max,
            grape: GrapeSettings {
                multistarts: s.multistarts,
                iterations: s.iterations,
                learning_rate: s.learning_rate,
                init_scale: s.init_scale,
                seed,
                execution,
                ..GrapeSettings::default()
            },
            stepping: self.integrator.stepping()?,
        })
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SpectrumGrid {
    pub eta_max: f64,
    pub points: usize,
    pub modes: usize,
}

impl Default for SpectrumGrid {
    fn default() -> Self {
        Self {
            eta_max: 0.1,
            points: 21,
            modes: 10,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScanSettings {
    pub eta_max: f64,
    pub grid_size: usize,
    pub max_index: Option<usize>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ResonanceConfig {
    pub lambda: f64,
    pub delta: f64,
    pub truncation: usize,
    pub max_index: usize,
    #[serde(default = "default_resonance_tol")]
    pub tolerance: f64,
    /// Perturbation strength at which the chain certificate is evaluated.
    #[serde(default)]
    pub eta: f64,
    #[serde(default)]
    pub spectrum: SpectrumGrid,
    pub scan: Option<ScanSettings>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StabilityConfig {
    pub lambda: f64,
    pub delta: f64,
    #[serde(default = "one")]
    pub ell0: f64,
    pub rate_bound: f64,
    #[serde(default = "default_truncation")]
    pub truncation: usize,
    pub horizon: f64,
    /// Piecewise-constant auxiliary control on equal segments.
    pub controls: Vec<f64>,
    #[serde(default)]
    pub initial: StateSpec,
    #[serde(default = "default_n_list")]
    pub n_list: Vec<usize>,
    /// Lift order checked against the auxiliary family and its own doubling.
    #[serde(default = "default_bound_lift")]
    pub bound_lift: usize,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    #[serde(default)]
    pub integrator: Integrator,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OperatorsConfig {
    #[serde(default = "default_truncation")]
    pub truncation: usize,
    #[serde(default = "one")]
    pub lambda: f64,
    #[serde(default = "one")]
    pub delta: f64,
}

impl Default for OperatorsConfig {
    fn default() -> Self {
        Self {
            truncation: default_truncation(),
            lambda: 1.0,
            delta: 1.0,
        }
    }
}

fn default_truncation() -> usize {
    32
}

fn default_samples() -> usize {
    400
}

fn default_resonance_tol() -> f64 {
    DEFAULT_RESONANCE_TOL
}

fn default_n_list() -> Vec<usize> {
    vec![8, 16, 32, 64]
}

fn default_bound_lift() -> usize {
    8
}

fn default_epsilon() -> f64 {
    DEFAULT_EPSILON
}

fn one() -> f64 {
    1.0
}
