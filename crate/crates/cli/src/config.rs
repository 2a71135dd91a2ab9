//! Run configuration: a versioned JSON schema with strict validation
//! (unknown keys rejected), plus construction of the core objects it
//! describes.

use paraman::fields::{CoefficientModel, NoiseModel};
use paraman::geometry::{build_basis, build_grid, EigenBasis, ManifoldSpec, QuadratureGrid};
use paraman::integrate::Scheme;
use paraman::spectral::SpectralVector;
use serde::{Deserialize, Serialize};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub schema_version: u32,
    pub manifold: ManifoldConfig,
    pub model: ModelConfig,
    pub initial: InitialConfig,
    pub solver: SolverSection,
    #[serde(default)]
    pub stochastic: StochasticSection,
    #[serde(default)]
    pub verify: VerifySection,
    #[serde(default)]
    pub convergence: ConvergenceSection,
    pub output: OutputSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ManifoldConfig {
    Torus1 { period: f64, resolution: [usize; 1] },
    Torus2 { periods: [f64; 2], resolution: [usize; 2] },
    Sphere2 { resolution: [usize; 2] },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    /// Registry name: heat | aniso_linear | bounded_nonlinear | burgers |
    /// compat_pair | incompat_pair | indefinite.
    pub name: String,
    #[serde(default)]
    pub parameters: ModelParameters,
    /// Compose the model with the range cutoff χ.
    #[serde(default)]
    pub truncated: bool,
    /// λ-samples for the structural checks; defaults to the model's range.
    #[serde(default)]
    pub lambda_range: Option<[f64; 2]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelParameters {
    #[serde(default = "default_nu")]
    pub nu: f64,
    /// Diagonal for aniso_linear.
    #[serde(default)]
    pub d: Option<[f64; 2]>,
    /// sin-amplitude for bounded_nonlinear.
    #[serde(default)]
    pub a: Option<f64>,
    /// Flux strength for compat_pair.
    #[serde(default)]
    pub strength: Option<f64>,
    /// Negative-direction scale for indefinite.
    #[serde(default)]
    pub neg: Option<f64>,
}

fn default_nu() -> f64 {
    1.0
}

impl Default for ModelParameters {
    fn default() -> Self {
        ModelParameters {
            nu: 1.0,
            d: None,
            a: None,
            strength: None,
            neg: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialConfig {
    /// Explicit coefficients: list of (mode slot, value).
    Modes { modes: Vec<(usize, f64)> },
    /// Named presets; `midrange_mode` is 1/2 + amplitude·e₁/max|e₁|,
    /// which ranges over `[1/2 − a, 1/2 + a]` ⊂ `[0,1]` for a < 1/2.
    FunctionPreset { name: String, amplitude: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSection {
    pub n: usize,
    pub dt: f64,
    pub t_end: f64,
    /// "imex" (stiff-exact, linear diffusion only) or "rk4".
    pub scheme: String,
    #[serde(default)]
    pub epsilon: f64,
    #[serde(default = "default_stride")]
    pub output_stride: usize,
}

fn default_stride() -> usize {
    10
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StochasticSection {
    #[serde(default)]
    pub enabled: bool,
    #[serde(default = "default_samples")]
    pub samples: u64,
    #[serde(default = "default_seed")]
    pub seed: u64,
    /// "additive_mode" | "multiplicative_bounded" | "none".
    #[serde(default = "default_phi")]
    pub phi: String,
    #[serde(default = "default_sigma")]
    pub sigma: f64,
    #[serde(default = "default_lags")]
    pub holder_lags: Vec<u64>,
}

fn default_samples() -> u64 {
    1000
}
fn default_seed() -> u64 {
    42
}
fn default_phi() -> String {
    "additive_mode".into()
}
fn default_sigma() -> f64 {
    0.3
}
fn default_lags() -> Vec<u64> {
    vec![1, 10, 100]
}

impl Default for StochasticSection {
    fn default() -> Self {
        StochasticSection {
            enabled: false,
            samples: default_samples(),
            seed: default_seed(),
            phi: default_phi(),
            sigma: default_sigma(),
            holder_lags: default_lags(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerifySection {
    #[serde(default = "default_triples")]
    pub triples: usize,
    #[serde(default = "default_verify_seed")]
    pub seed: u64,
    #[serde(default)]
    pub require_growth: bool,
    #[serde(default)]
    pub require_compat: bool,
}

fn default_triples() -> usize {
    5
}
fn default_verify_seed() -> u64 {
    2024
}

impl Default for VerifySection {
    fn default() -> Self {
        VerifySection {
            triples: default_triples(),
            seed: default_verify_seed(),
            require_growth: false,
            require_compat: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct ConvergenceSection {
    #[serde(default)]
    pub n_list: Vec<usize>,
    #[serde(default)]
    pub dt_list: Vec<f64>,
    #[serde(default)]
    pub reference_n: Option<usize>,
    #[serde(default)]
    pub reference_dt: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    pub directory: String,
    #[serde(default = "default_formats")]
    pub formats: Vec<String>,
}

fn default_formats() -> Vec<String> {
    vec!["csv".into()]
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self, String> {
        let config: RunConfig =
            serde_json::from_str(text).map_err(|e| format!("config parse error: {e}"))?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(format!(
                "unsupported schema_version {} (expected {SCHEMA_VERSION})",
                self.schema_version
            ));
        }
        let positive = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(format!("{name} must be positive and finite, got {v}"))
            }
        };
        match &self.manifold {
            ManifoldConfig::Torus1 { period, .. } => positive("period", *period)?,
            ManifoldConfig::Torus2 { periods, .. } => {
                positive("periods[0]", periods[0])?;
                positive("periods[1]", periods[1])?;
            }
            ManifoldConfig::Sphere2 { .. } => {}
        }
        positive("solver.dt", self.solver.dt)?;
        positive("solver.t_end", self.solver.t_end)?;
        if self.solver.n == 0 {
            return Err("solver.n must be at least 1".into());
        }
        if !self.solver.epsilon.is_finite() || self.solver.epsilon < 0.0 {
            return Err(format!("solver.epsilon must be ≥ 0, got {}", self.solver.epsilon));
        }
        match self.solver.scheme.as_str() {
            "imex" | "rk4" => {}
            other => return Err(format!("unknown scheme '{other}' (use \"imex\" or \"rk4\")")),
        }
        match self.stochastic.phi.as_str() {
            "additive_mode" | "multiplicative_bounded" | "none" => {}
            other => return Err(format!("unknown phi '{other}'")),
        }
        if !self.stochastic.sigma.is_finite() {
            return Err("stochastic.sigma must be finite".into());
        }
        for f in &self.output.formats {
            if f != "csv" {
                return Err(format!("unsupported output format '{f}'"));
            }
        }
        if let InitialConfig::FunctionPreset { name, amplitude } = &self.initial {
            if name != "midrange_mode" {
                return Err(format!("unknown function preset '{name}'"));
            }
            if !(0.0..0.5).contains(amplitude) {
                return Err(format!(
                    "midrange_mode amplitude must lie in [0, 0.5), got {amplitude}"
                ));
            }
        }
        Ok(())
    }

    pub fn manifold_spec(&self) -> ManifoldSpec {
        match &self.manifold {
            ManifoldConfig::Torus1 { period, .. } => ManifoldSpec::torus1(*period),
            ManifoldConfig::Torus2 { periods, .. } => ManifoldSpec::torus2(*periods),
            ManifoldConfig::Sphere2 { .. } => ManifoldSpec::sphere2(),
        }
    }

    pub fn resolution(&self) -> Vec<usize> {
        match &self.manifold {
            ManifoldConfig::Torus1 { resolution, .. } => resolution.to_vec(),
            ManifoldConfig::Torus2 { resolution, .. } => resolution.to_vec(),
            ManifoldConfig::Sphere2 { resolution } => resolution.to_vec(),
        }
    }

    pub fn build_geometry(&self) -> Result<(QuadratureGrid, EigenBasis), String> {
        self.build_geometry_with_n(self.solver.n)
    }

    pub fn build_geometry_with_n(&self, n: usize) -> Result<(QuadratureGrid, EigenBasis), String> {
        let spec = self.manifold_spec();
        let grid = build_grid(&spec, &self.resolution()).map_err(|e| e.to_string())?;
        let basis = build_basis(&spec, &grid, n).map_err(|e| e.to_string())?;
        Ok((grid, basis))
    }

    pub fn build_model(&self) -> Result<CoefficientModel, String> {
        let p = &self.model.parameters;
        let base = match self.model.name.as_str() {
            "heat" => CoefficientModel::heat(p.nu),
            "aniso_linear" => {
                CoefficientModel::aniso_linear(p.d.ok_or("aniso_linear needs parameters.d")?)
            }
            "bounded_nonlinear" => CoefficientModel::bounded_nonlinear(p.nu, p.a.unwrap_or(0.1)),
            "burgers" => CoefficientModel::burgers(p.nu),
            "compat_pair" => CoefficientModel::compat_pair(p.nu, p.strength.unwrap_or(1.0)),
            "incompat_pair" => CoefficientModel::incompat_pair(p.nu),
            "indefinite" => CoefficientModel::indefinite(p.nu, p.neg.unwrap_or(0.5)),
            other => return Err(format!("unknown model '{other}'")),
        };
        let model = if self.model.truncated {
            CoefficientModel::truncated(base)
        } else {
            base
        };
        if !model.supported_on(&self.manifold_spec().kind) {
            return Err(format!(
                "model '{}' is not defined on this manifold",
                self.model.name
            ));
        }
        Ok(model)
    }

    pub fn build_noise(&self) -> Result<Option<NoiseModel>, String> {
        if !self.stochastic.enabled {
            return Ok(None);
        }
        match self.stochastic.phi.as_str() {
            "none" => Ok(None),
            "additive_mode" => Ok(Some(NoiseModel::AdditiveMode {
                sigma: self.stochastic.sigma,
            })),
            "multiplicative_bounded" => Ok(Some(NoiseModel::MultiplicativeBounded {
                sigma: self.stochastic.sigma,
            })),
            other => Err(format!("unknown phi '{other}'")),
        }
    }

    pub fn build_initial(&self, basis: &EigenBasis) -> Result<SpectralVector, String> {
        let n = basis.n();
        match &self.initial {
            InitialConfig::Modes { modes } => {
                let mut v = SpectralVector::zeros(n);
                for &(slot, value) in modes {
                    if slot >= n {
                        return Err(format!("initial mode slot {slot} exceeds n = {n}"));
                    }
                    v.coeffs[slot] = value;
                }
                Ok(v)
            }
            InitialConfig::FunctionPreset { amplitude, .. } => {
                if n < 2 {
                    return Err("midrange_mode needs at least 2 modes".into());
                }
                let vol = self.manifold_spec().analytic_volume;
                let mut v = SpectralVector::zeros(n);
                v.coeffs[0] = 0.5 * vol.sqrt();
                v.coeffs[1] = amplitude / basis.max_abs_value(1);
                Ok(v)
            }
        }
    }

    pub fn scheme(&self) -> Scheme {
        match self.solver.scheme.as_str() {
            "rk4" => Scheme::Rk4,
            _ => Scheme::Imex,
        }
    }

    /// λ-samples for the structural checks.
    pub fn lambda_samples(&self, model: &CoefficientModel) -> Vec<f64> {
        let range = self
            .model
            .lambda_range
            .unwrap_or_else(|| model.default_lambda_range());
        let count = 17;
        (0..count)
            .map(|i| range[0] + (range[1] - range[0]) * i as f64 / (count - 1) as f64)
            .collect()
    }
}
