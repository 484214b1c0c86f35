//! Experiment configuration: one JSON document per run.

use crate::dynamics::{NoiseSpec, TimeGrid, Weighting};
use crate::error::{Error, Result};
use crate::hum::HumConfig;
use crate::mlf::FracOrder;
use crate::quadrature::Grading;
use crate::sensing::{Sensor, SensorSuite};
use crate::spectral::{
    build_basis, grad_adjoint, Basis, Dim, Mode, QuadGrid, Rect, Region, SpectralField,
};
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};
use std::sync::Arc;

/// One `(mode, value)` entry of an eigen-expansion.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModeTerm {
    pub mode: Mode,
    pub value: f64,
}

/// How the initial state is given.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialCondition {
    /// `y0 = Σ value · ξ_mode`.
    Coefficients { terms: Vec<ModeTerm> },
    /// `y0 = ∇*p*_ω ∇u` with `u = Σ value · ξ_mode`; `region` defaults to ω.
    /// The regional gradient to recover is then `p_ω∇u`.
    RegionalGradient {
        terms: Vec<ModeTerm>,
        #[serde(default)]
        region: Option<Vec<Rect>>,
    },
}

impl InitialCondition {
    pub fn terms(&self) -> &[ModeTerm] {
        match self {
            InitialCondition::Coefficients { terms }
            | InitialCondition::RegionalGradient { terms, .. } => terms,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum TimeGridSpec {
    /// Gauss–Legendre nodes on a mesh refined toward `t = 0`.
    Graded {
        #[serde(default)]
        grading: Grading,
    },
    /// `samples` equispaced nodes ending at the horizon.
    Uniform { samples: usize },
}

impl Default for TimeGridSpec {
    fn default() -> Self {
        TimeGridSpec::Graded {
            grading: Grading::default(),
        }
    }
}

/// CG settings of the reconstruction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HumSettings {
    pub tolerance: f64,
    pub max_iterations: usize,
    pub epsilon: f64,
}

impl Default for HumSettings {
    fn default() -> Self {
        let d = HumConfig::default();
        HumSettings {
            tolerance: d.tolerance,
            max_iterations: d.max_iterations,
            epsilon: d.epsilon,
        }
    }
}

fn default_horizon() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub alpha: FracOrder,
    #[serde(default = "default_horizon")]
    pub horizon: f64,
    pub dimension: usize,
    /// State truncation `M`: every mode index at most `M`.
    pub truncation: u32,
    /// Truncation of the state sums inside the Gramian; defaults to `M`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gram_truncation: Option<u32>,
    /// Potential truncation `Q`; defaults to `M`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub potential_truncation: Option<u32>,
    /// Subregion ω; the whole domain when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub omega: Option<Vec<Rect>>,
    pub sensors: Vec<Sensor>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial: Option<InitialCondition>,
    #[serde(default)]
    pub time_grid: TimeGridSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub noise: Option<NoiseSpec>,
    #[serde(default)]
    pub weighting: Weighting,
    #[serde(default)]
    pub hum: HumSettings,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
}

impl ExperimentConfig {
    /// Parses and validates a configuration document. Parse errors carry
    /// the line and column; validation errors name the offending field.
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig =
            serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn validate(&self) -> Result<()> {
        let field = |name: &str, e: Error| Error::Config(format!("field `{name}`: {e}"));
        let dim = self.dim()?;
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return Err(Error::Config(format!(
                "field `horizon`: must be positive, got {}",
                self.horizon
            )));
        }
        for (name, t) in [
            ("truncation", Some(self.truncation)),
            ("gram_truncation", self.gram_truncation),
            ("potential_truncation", self.potential_truncation),
        ] {
            if t == Some(0) {
                return Err(Error::Config(format!("field `{name}`: must be at least 1")));
            }
        }
        build_basis(dim, self.truncation.max(self.gram_truncation.unwrap_or(0)))
            .map_err(|e| field("truncation", e))?;
        self.omega_region().map_err(|e| field("omega", e))?;
        self.suite().map_err(|e| field("sensors", e))?;
        if let Some(init) = &self.initial {
            for t in init.terms() {
                t.mode.validate().map_err(|e| field("initial", e))?;
                if t.mode.dim() != dim {
                    return Err(Error::Config(format!(
                        "field `initial`: mode {} has the wrong dimension",
                        t.mode
                    )));
                }
                if !t.value.is_finite() {
                    return Err(Error::Config(
                        "field `initial`: coefficients must be finite".into(),
                    ));
                }
            }
            if let InitialCondition::RegionalGradient {
                region: Some(r), ..
            } = init
            {
                Region::new(dim, r.clone()).map_err(|e| field("initial.region", e))?;
            }
        }
        match self.time_grid {
            TimeGridSpec::Graded { grading } => {
                grading.validate().map_err(|e| field("time_grid", e))?
            }
            TimeGridSpec::Uniform { samples: 0 } => {
                return Err(Error::Config(
                    "field `time_grid`: at least one sample is needed".into(),
                ))
            }
            TimeGridSpec::Uniform { .. } => {}
        }
        if let Some(n) = self.noise {
            if !(n.sigma >= 0.0 && n.sigma.is_finite()) {
                return Err(Error::Config(format!(
                    "field `noise`: sigma must be nonnegative, got {}",
                    n.sigma
                )));
            }
        }
        self.hum_config().validate().map_err(|e| field("hum", e))
    }

    pub fn dim(&self) -> Result<Dim> {
        Dim::from_n(self.dimension).map_err(|e| Error::Config(format!("field `dimension`: {e}")))
    }

    pub fn gram_truncation(&self) -> u32 {
        self.gram_truncation.unwrap_or(self.truncation)
    }

    pub fn potential_truncation(&self) -> u32 {
        self.potential_truncation.unwrap_or(self.truncation)
    }

    pub fn omega_region(&self) -> Result<Region> {
        let dim = self.dim()?;
        match &self.omega {
            Some(rects) => Region::new(dim, rects.clone()),
            None => Ok(Region::whole(dim)),
        }
    }

    pub fn suite(&self) -> Result<SensorSuite> {
        SensorSuite::new(self.dim()?, self.sensors.clone())
    }

    pub fn basis(&self) -> Result<Arc<Basis>> {
        Ok(Arc::new(build_basis(self.dim()?, self.truncation)?))
    }

    pub fn grading(&self) -> Grading {
        match self.time_grid {
            TimeGridSpec::Graded { grading } => grading,
            TimeGridSpec::Uniform { .. } => Grading::default(),
        }
    }

    pub fn time_grid(&self) -> Result<TimeGrid> {
        match self.time_grid {
            TimeGridSpec::Graded { grading } => {
                TimeGrid::graded(self.horizon, self.alpha, &grading)
            }
            TimeGridSpec::Uniform { samples } => TimeGrid::uniform(self.horizon, samples),
        }
    }

    pub fn hum_config(&self) -> HumConfig {
        HumConfig {
            tolerance: self.hum.tolerance,
            max_iterations: self.hum.max_iterations,
            epsilon: self.hum.epsilon,
            weighting: self.weighting,
            state_truncation: self.truncation,
            potential_truncation: self.potential_truncation(),
            horizon: self.horizon,
            alpha: self.alpha,
            grading: self.grading(),
        }
    }

    /// Replaces the noise seed, if noise is configured.
    pub fn with_seed(mut self, seed: u64) -> Self {
        if let Some(n) = self.noise.as_mut() {
            n.seed = seed;
        }
        self
    }

    /// The initial state on `basis`, or `None` when the config has none.
    pub fn initial_state(&self, basis: &Arc<Basis>) -> Result<Option<SpectralField>> {
        let Some(init) = &self.initial else {
            return Ok(None);
        };
        match init {
            InitialCondition::Coefficients { terms } => {
                let entries: Vec<(Mode, f64)> = terms.iter().map(|t| (t.mode, t.value)).collect();
                SpectralField::from_modes(basis.clone(), &entries).map(Some)
            }
            InitialCondition::RegionalGradient { terms, region } => {
                let region = match region {
                    Some(r) => Region::new(basis.dim(), r.clone())?,
                    None => self.omega_region()?,
                };
                let u = self.potential_field(terms)?;
                Ok(Some(regional_state(&u, &region, basis.clone())))
            }
        }
    }

    /// `u = Σ value · ξ_mode` on a basis wide enough to hold every term.
    pub fn potential_field(&self, terms: &[ModeTerm]) -> Result<SpectralField> {
        let top = terms.iter().map(|t| t.mode.max_index()).max().unwrap_or(1);
        let basis = Arc::new(build_basis(self.dim()?, top)?);
        let entries: Vec<(Mode, f64)> = terms.iter().map(|t| (t.mode, t.value)).collect();
        SpectralField::from_modes(basis, &entries)
    }
}

/// `∇*p*_ω ∇u` projected on `basis`.
pub fn regional_state(u: &SpectralField, region: &Region, basis: Arc<Basis>) -> SpectralField {
    let freq = 2 * u.basis().truncation().max(basis.truncation());
    let grid = Arc::new(QuadGrid::new(region, freq));
    grad_adjoint(&u.gradient_on(grid), basis)
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{
        "alpha": 0.7,
        "dimension": 1,
        "truncation": 4,
        "sensors": [{"kind": "pointwise", "location": [0.3, 0.0]}]
    }"#;

    #[test]
    fn minimal_document_gets_defaults() {
        let cfg = ExperimentConfig::from_json(MINIMAL).unwrap();
        assert_eq!(cfg.horizon, 1.0);
        assert_eq!(cfg.potential_truncation(), 4);
        assert_eq!(cfg.time_grid, TimeGridSpec::default());
        assert_eq!(cfg.omega_region().unwrap().measure(), 1.0);
    }

    #[test]
    fn rejects_bad_order() {
        let text = MINIMAL.replace("0.7", "1.5");
        let err = ExperimentConfig::from_json(&text).unwrap_err();
        assert_eq!(err.exit_code(), 2);
        assert!(err.to_string().contains("line"), "{err}");
    }

    #[test]
    fn rejects_empty_suite_and_foreign_omega() {
        let no_sensors = MINIMAL.replace(r#"{"kind": "pointwise", "location": [0.3, 0.0]}"#, "");
        let err = ExperimentConfig::from_json(&no_sensors).unwrap_err();
        assert!(err.to_string().contains("sensors"), "{err}");
        let outside = MINIMAL.replace(
            r#""truncation": 4,"#,
            r#""truncation": 4, "omega": [{"lo": [0.5, 0.0], "hi": [1.5, 1.0]}],"#,
        );
        let err = ExperimentConfig::from_json(&outside).unwrap_err();
        assert!(err.to_string().contains("omega"), "{err}");
    }

    #[test]
    fn rejects_unknown_fields() {
        let text = MINIMAL.replace(r#""dimension": 1,"#, r#""dimension": 1, "dimensions": 2,"#);
        assert!(ExperimentConfig::from_json(&text).is_err());
    }

    #[test]
    fn echo_round_trips() {
        let cfg = ExperimentConfig::from_json(MINIMAL).unwrap();
        let again = ExperimentConfig::from_json(&serde_json::to_string(&cfg).unwrap()).unwrap();
        assert_eq!(cfg, again);
    }
}
