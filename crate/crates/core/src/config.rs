//! TOML experiment configuration and its translation into meshes, fields and
//! measures.

use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::expr::Expr;
use crate::grid::{build_interval_mesh, build_square_mesh, Mesh};
use crate::homogenization::{layered_coefficient, Axis, OscillatingFamily, PerturbationKind, Profile};
use crate::measures::{add, atom_measure, boundary_power_density, truncate_to_core, DensityFn, DiscreteMeasure, DEFAULT_ORDER};
use crate::operators::{CoefficientField, Mat2};
use crate::quadrature::{QuadratureRule, RuleKind};
use crate::singular::{check_lambda, SolverOptions};

pub const DEFAULT_SEED: u64 = 42;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default = "default_seed")]
    pub seed: u64,
    pub domain: DomainConfig,
    #[serde(default)]
    pub coefficient: CoefficientConfig,
    pub measure: Option<MeasureConfig>,
    pub problem: ProblemConfig,
    #[serde(default)]
    pub solver: SolverOptions,
    pub experiment: Option<ExperimentBlock>,
}

fn default_seed() -> u64 {
    DEFAULT_SEED
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainConfig {
    pub dim: usize,
    pub cells: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum CoefficientConfig {
    /// `value`·I, or a full `matrix` (row-major) when given.
    Constant {
        #[serde(default = "one")]
        value: f64,
        matrix: Option<Mat2>,
    },
    Layered {
        profile: String,
        epsilon: f64,
        #[serde(default)]
        axis: Axis,
    },
    /// Scalar a(x, y)·I sampled at element midpoints.
    Expression { expression: String },
}

fn one() -> f64 {
    1.0
}

impl Default for CoefficientConfig {
    fn default() -> Self {
        CoefficientConfig::Constant { value: 1.0, matrix: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum MeasureConfig {
    Density {
        expression: String,
        #[serde(default = "default_order")]
        order: usize,
        /// Use the boundary-graded rule instead of per-cell Gauss points.
        #[serde(default)]
        graded: bool,
        #[serde(default)]
        core_margin: f64,
    },
    /// dist(x, ∂Ω)^{-s} dx.
    BoundaryPower {
        s: f64,
        #[serde(default)]
        core_margin: f64,
    },
    Atom {
        position: f64,
        #[serde(default = "one")]
        mass: f64,
    },
    Sum {
        parts: Vec<MeasureConfig>,
        #[serde(default)]
        core_margin: f64,
    },
}

fn default_order() -> usize {
    DEFAULT_ORDER
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemConfig {
    pub lambda: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentBlock {
    pub epsilons: Vec<f64>,
    pub family: PerturbationKind,
    pub test_functions: usize,
    pub suite: Option<String>,
}

impl Default for ExperimentBlock {
    fn default() -> Self {
        Self {
            epsilons: Vec::new(),
            family: PerturbationKind::Decaying,
            test_functions: 4,
            suite: None,
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.message().to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    /// Range checks that do not require building anything.
    pub fn validate(&self) -> Result<()> {
        if !(1..=2).contains(&self.domain.dim) {
            return Err(Error::Config(format!("domain.dim must be 1 or 2, got {}", self.domain.dim)));
        }
        if self.domain.cells < 2 {
            return Err(Error::Config("domain.cells must be at least 2".into()));
        }
        check_lambda(self.problem.lambda)?;
        self.solver.validate()?;
        if let Some(m) = &self.measure {
            validate_measure(m, self.domain.dim, true)?;
        }
        if let Some(x) = &self.experiment {
            if x.test_functions == 0 {
                return Err(Error::Config("experiment.test_functions must be positive".into()));
            }
        }
        Ok(())
    }

    pub fn lambda(&self) -> f64 {
        self.problem.lambda
    }

    pub fn build_mesh(&self) -> Result<Arc<Mesh>> {
        match self.domain.dim {
            1 => build_interval_mesh(self.domain.cells),
            _ => build_square_mesh(self.domain.cells),
        }
    }

    pub fn build_coefficient(&self, mesh: &Arc<Mesh>) -> Result<CoefficientField> {
        match &self.coefficient {
            CoefficientConfig::Constant { value, matrix } => {
                CoefficientField::constant(mesh, matrix.unwrap_or([*value, 0.0, 0.0, *value]))
            }
            CoefficientConfig::Layered { profile, epsilon, axis } => {
                layered_coefficient(&Profile::parse(profile)?, *epsilon, *axis, mesh)
            }
            CoefficientConfig::Expression { expression } => {
                let e = Expr::parse(expression)?;
                let dim = mesh.dim();
                CoefficientField::scalar(mesh, |p| e.eval(p[0], p[1], crate::grid::dist_boundary(dim, p)))
            }
        }
    }

    pub fn build_measure(&self, mesh: &Arc<Mesh>) -> Result<DiscreteMeasure> {
        let m = self
            .measure
            .as_ref()
            .ok_or_else(|| Error::Config("missing [measure] block".into()))?;
        build_measure(m, mesh)
    }

    /// Oscillating family from a layered coefficient block and the experiment's ε list.
    pub fn oscillating_family(&self) -> Result<OscillatingFamily> {
        let CoefficientConfig::Layered { profile, axis, .. } = &self.coefficient else {
            return Err(Error::Config("homogenization needs a layered coefficient".into()));
        };
        let x = self
            .experiment
            .as_ref()
            .filter(|x| !x.epsilons.is_empty())
            .ok_or_else(|| Error::Config("homogenization needs experiment.epsilons".into()))?;
        OscillatingFamily::new(Profile::parse(profile)?, *axis, x.epsilons.clone())
    }

    pub fn experiment_block(&self) -> ExperimentBlock {
        self.experiment.clone().unwrap_or_default()
    }
}

fn validate_measure(m: &MeasureConfig, dim: usize, top: bool) -> Result<()> {
    let margin = |c: f64| {
        if !(0.0..0.5).contains(&c) {
            return Err(Error::Config(format!("core_margin must lie in [0, 0.5), got {c}")));
        }
        if !top && c != 0.0 {
            return Err(Error::Config("core_margin belongs on the outer measure".into()));
        }
        Ok(())
    };
    match m {
        MeasureConfig::Density { expression, order, core_margin, .. } => {
            Expr::parse(expression)?;
            if *order == 0 {
                return Err(Error::Config("density order must be positive".into()));
            }
            margin(*core_margin)
        }
        MeasureConfig::BoundaryPower { core_margin, .. } => margin(*core_margin),
        MeasureConfig::Atom { .. } if dim != 1 => Err(Error::AtomInTwoDimensions),
        MeasureConfig::Atom { .. } => Ok(()),
        MeasureConfig::Sum { parts, core_margin } => {
            if parts.is_empty() {
                return Err(Error::Config("sum needs at least one part".into()));
            }
            for p in parts {
                validate_measure(p, dim, false)?;
            }
            margin(*core_margin)
        }
    }
}

fn uses_graded(m: &MeasureConfig) -> bool {
    match m {
        MeasureConfig::Density { graded, .. } => *graded,
        MeasureConfig::BoundaryPower { .. } => true,
        MeasureConfig::Atom { .. } => false,
        MeasureConfig::Sum { parts, .. } => parts.iter().any(uses_graded),
    }
}

fn expression_density(expression: &str) -> Result<DensityFn> {
    let e = Expr::parse(expression)?;
    Ok(Arc::new(move |p, d| e.eval(p[0], p[1], d)))
}

/// Builds the measure; inside a sum, densities share the graded rule whenever
/// any part needs it so the parts stay combinable.
pub fn build_measure(m: &MeasureConfig, mesh: &Arc<Mesh>) -> Result<DiscreteMeasure> {
    build_part(m, mesh, uses_graded(m))
}

fn build_part(m: &MeasureConfig, mesh: &Arc<Mesh>, graded: bool) -> Result<DiscreteMeasure> {
    let (measure, margin) = match m {
        MeasureConfig::Density { expression, order, core_margin, .. } => {
            let kind = if graded { RuleKind::graded(mesh.dim()) } else { RuleKind::gauss(*order) };
            let rule = Arc::new(QuadratureRule::new(mesh, kind, 0.0));
            (DiscreteMeasure::from_density(rule, expression_density(expression)?)?, *core_margin)
        }
        MeasureConfig::BoundaryPower { s, core_margin } => (boundary_power_density(mesh, *s)?, *core_margin),
        MeasureConfig::Atom { position, mass } => (atom_measure(mesh, *position, *mass)?, 0.0),
        MeasureConfig::Sum { parts, core_margin } => {
            let mut total = build_part(&parts[0], mesh, graded)?;
            for p in &parts[1..] {
                total = add(&total, &build_part(p, mesh, graded)?)?;
            }
            (total, *core_margin)
        }
    };
    if margin > 0.0 {
        truncate_to_core(&measure, margin)
    } else {
        Ok(measure)
    }
}
