//! Oscillating coefficients, perturbed measure families, laminate limits and
//! the H-convergence experiment.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::expr::Expr;
use crate::grid::{p1_interpolate, FeFunction, Mesh};
use crate::measures::{DensityFn, DiscreteMeasure};
use crate::operators::{assemble_lumped_mass, assemble_stiffness, dot, CoefficientField, Mat2};
use crate::potential::{d_lambda_with, linear_solution_with};
use crate::quadrature::GaussLegendre;
use crate::singular::{check_lambda, singular_load, solve_singular, SolverOptions};

/// Number of cells per period required of the mesh.
pub const CELLS_PER_PERIOD: f64 = 16.0;

const SAMPLES: usize = 1 << 14;

/// Positive 1-periodic profile a(y).
#[derive(Clone)]
pub struct Profile {
    label: String,
    f: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    min: f64,
    max: f64,
}

impl fmt::Debug for Profile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Profile")
            .field("label", &self.label)
            .field("min", &self.min)
            .field("max", &self.max)
            .finish()
    }
}

impl Profile {
    /// Profile from a closure; its range is taken from dense sampling of [0, 1].
    pub fn new<F>(label: impl Into<String>, f: F) -> Result<Self>
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        let (mut min, mut max) = (f64::INFINITY, f64::NEG_INFINITY);
        for k in 0..=SAMPLES {
            let v = f(k as f64 / SAMPLES as f64);
            if !v.is_finite() {
                return Err(Error::InvalidArgument(format!("profile is not finite at y = {}", k as f64 / SAMPLES as f64)));
            }
            min = min.min(v);
            max = max.max(v);
        }
        if min <= 0.0 {
            return Err(Error::InvalidArgument(format!("profile must be positive, min a = {min}")));
        }
        Ok(Self {
            label: label.into(),
            f: Arc::new(f),
            min,
            max,
        })
    }

    /// Profile from an expression in `y` (`x` is accepted as an alias).
    pub fn parse(source: &str) -> Result<Self> {
        let e = Expr::parse(source)?;
        Self::new(source, move |y| e.eval(y, y, 0.0))
    }

    pub fn constant(c: f64) -> Result<Self> {
        Self::new(format!("{c}"), move |_| c)
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn eval(&self, y: f64) -> f64 {
        (self.f)(y)
    }

    pub fn min(&self) -> f64 {
        self.min
    }

    pub fn max(&self) -> f64 {
        self.max
    }

    /// (∫₀¹ dy / a(y))⁻¹.
    pub fn harmonic_mean(&self) -> f64 {
        1.0 / self.mean_of(|a| 1.0 / a)
    }

    pub fn arithmetic_mean(&self) -> f64 {
        self.mean_of(|a| a)
    }

    fn mean_of(&self, g: impl Fn(f64) -> f64) -> f64 {
        let rule = GaussLegendre::new(12);
        let panels = 256;
        (0..panels)
            .map(|k| {
                let (a, b) = (k as f64 / panels as f64, (k + 1) as f64 / panels as f64);
                rule.integrate(a, b, |y| g(self.eval(y)))
            })
            .sum()
    }
}

/// Direction along which a laminate oscillates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    #[default]
    X,
    Y,
}

impl Axis {
    fn index(self) -> usize {
        match self {
            Axis::X => 0,
            Axis::Y => 1,
        }
    }
}

#[derive(Debug, Clone)]
pub struct OscillatingFamily {
    pub profile: Profile,
    pub axis: Axis,
    pub epsilons: Vec<f64>,
}

impl OscillatingFamily {
    /// Checks that each ε is the reciprocal of an integer; ε values are kept
    /// sorted in decreasing order.
    pub fn new(profile: Profile, axis: Axis, mut epsilons: Vec<f64>) -> Result<Self> {
        if epsilons.is_empty() {
            return Err(Error::InvalidArgument("empty ε list".into()));
        }
        for &eps in &epsilons {
            check_tiling(eps)?;
        }
        epsilons.sort_by(|a, b| b.total_cmp(a));
        epsilons.dedup();
        Ok(Self {
            profile,
            axis,
            epsilons,
        })
    }
}

fn check_tiling(eps: f64) -> Result<()> {
    let inv = 1.0 / eps;
    if !(eps > 0.0 && eps <= 1.0) || (inv - inv.round()).abs() > 1e-9 * inv {
        return Err(Error::InvalidArgument(format!("ε must be 1/integer, got {eps}")));
    }
    Ok(())
}

fn check_resolution(mesh: &Mesh, eps: f64) -> Result<()> {
    let h = mesh.spacing();
    let limit = eps / CELLS_PER_PERIOD;
    if h > limit * (1.0 + 1e-12) {
        return Err(Error::UnresolvedOscillation { h, limit });
    }
    Ok(())
}

fn check_axis(mesh: &Mesh, axis: Axis) -> Result<()> {
    if mesh.dim() == 1 && axis == Axis::Y {
        return Err(Error::InvalidArgument("axis y needs a two-dimensional mesh".into()));
    }
    Ok(())
}

/// A(x) = a(x_axis/ε)·I at element midpoints, with bounds (min a, max a).
pub fn layered_coefficient(profile: &Profile, eps: f64, axis: Axis, mesh: &Arc<Mesh>) -> Result<CoefficientField> {
    check_tiling(eps)?;
    check_axis(mesh, axis)?;
    check_resolution(mesh, eps)?;
    let i = axis.index();
    let field = CoefficientField::scalar(mesh, |p| profile.eval((p[i] / eps).fract()))?;
    field.with_certified_bounds(profile.min(), profile.max())
}

/// Homogenized matrix of a laminate: harmonic mean across the layers,
/// arithmetic mean along them.
pub fn h_limit_layered(profile: &Profile, axis: Axis, dim: usize) -> Mat2 {
    let harm = profile.harmonic_mean();
    if dim == 1 {
        return [harm, 0.0, 0.0, harm];
    }
    let arith = profile.arithmetic_mean();
    match axis {
        Axis::X => [harm, 0.0, 0.0, arith],
        Axis::Y => [arith, 0.0, 0.0, harm],
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PerturbationKind {
    /// f·(1 + ε sin(2πx/ε)).
    #[default]
    Decaying,
    /// f·(1 + sin(2πx/ε)).
    Oscillating,
    /// σ_ε = σ.
    Fixed,
}

#[derive(Debug, Clone)]
pub struct MeasureFamily {
    pub base: DiscreteMeasure,
    pub kind: PerturbationKind,
    pub members: Vec<(f64, DiscreteMeasure)>,
    /// Set when d_λ(σ, σ_ε) does not tend to zero.
    pub dlambda_nonvanishing: bool,
}

impl MeasureFamily {
    pub fn member(&self, eps: f64) -> Option<&DiscreteMeasure> {
        if eps == 0.0 {
            return Some(&self.base);
        }
        self.members.iter().find(|(e, _)| *e == eps).map(|(_, m)| m)
    }
}

/// σ_ε for each ε on the base measure's quadrature rule; ε = 0 yields σ.
pub fn perturbed_measure_family(sigma: &DiscreteMeasure, kind: PerturbationKind, epsilons: &[f64]) -> Result<MeasureFamily> {
    let f = sigma
        .density()
        .cloned()
        .ok_or(Error::InvalidArgument("perturbed families need a density measure".into()))?;
    let mut members = Vec::with_capacity(epsilons.len());
    for &eps in epsilons {
        if eps == 0.0 {
            members.push((0.0, sigma.clone()));
            continue;
        }
        if !(eps > 0.0) {
            return Err(Error::InvalidArgument(format!("ε must be positive, got {eps}")));
        }
        check_resolution(sigma.mesh(), eps)?;
        let amp = match kind {
            PerturbationKind::Decaying => eps,
            PerturbationKind::Oscillating => 1.0,
            PerturbationKind::Fixed => 0.0,
        };
        let g = f.clone();
        let fe: DensityFn = Arc::new(move |p, d| g(p, d) * (1.0 + amp * (2.0 * PI * p[0] / eps).sin()));
        members.push((eps, sigma.with_density(fe)?));
    }
    Ok(MeasureFamily {
        base: sigma.clone(),
        kind,
        members,
        dlambda_nonvanishing: kind == PerturbationKind::Oscillating,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceRow {
    pub epsilon: f64,
    pub l2_err: f64,
    /// |(u_ε − u₀, φ_j)_{H¹₀}| for the fixed test functions.
    pub pairs: Vec<f64>,
    pub hminus1_rhs: f64,
    pub d_lambda: f64,
    pub h: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceTable {
    pub lambda: f64,
    pub a0: Mat2,
    pub profile: String,
    pub axis: Axis,
    pub kind: PerturbationKind,
    pub dlambda_nonvanishing: bool,
    pub rows: Vec<ConvergenceRow>,
}

impl ConvergenceTable {
    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let pick = |r: &ConvergenceRow| -> Option<f64> {
            Some(match name {
                "epsilon" => r.epsilon,
                "l2_err" => r.l2_err,
                "hminus1_rhs" => r.hminus1_rhs,
                "d_lambda" => r.d_lambda,
                "h" => r.h,
                _ => {
                    let j: usize = name.strip_prefix("pair_")?.parse().ok()?;
                    *r.pairs.get(j.checked_sub(1)?)?
                }
            })
        };
        self.rows.iter().map(pick).collect()
    }

    fn column_names(&self) -> Vec<String> {
        let npairs = self.rows.first().map_or(0, |r| r.pairs.len());
        let mut names = vec!["epsilon".to_string(), "l2_err".to_string()];
        names.extend((1..=npairs).map(|j| format!("pair_{j}")));
        names.push("hminus1_rhs".into());
        names.push("d_lambda".into());
        names
    }

    pub fn to_csv(&self) -> String {
        let names = self.column_names();
        let mut out = names.join(",");
        out.push('\n');
        for r in &self.rows {
            let mut cells = vec![format!("{:e}", r.epsilon), format!("{:e}", r.l2_err)];
            cells.extend(r.pairs.iter().map(|v| format!("{v:e}")));
            cells.push(format!("{:e}", r.hminus1_rhs));
            cells.push(format!("{:e}", r.d_lambda));
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        out
    }

    /// Least-squares slope of log(column) against log ε; `None` when the column
    /// has nonpositive entries or fewer than two rows.
    pub fn rate(&self, name: &str) -> Option<f64> {
        let eps = self.column("epsilon")?;
        let ys = self.column(name)?;
        if eps.len() < 2 || ys.iter().any(|v| !(*v > 0.0)) {
            return None;
        }
        let xs: Vec<f64> = eps.iter().map(|e| e.ln()).collect();
        let ys: Vec<f64> = ys.iter().map(|v| v.ln()).collect();
        let n = xs.len() as f64;
        let (mx, my) = (xs.iter().sum::<f64>() / n, ys.iter().sum::<f64>() / n);
        let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
        let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
        Some(sxy / sxx)
    }

    pub fn summary_json(&self) -> Value {
        let rates: serde_json::Map<String, Value> = self
            .column_names()
            .into_iter()
            .skip(1)
            .map(|c| {
                let r = self.rate(&c);
                (c, r.map_or(Value::Null, Value::from))
            })
            .collect();
        json!({
            "lambda": self.lambda,
            "a0": self.a0,
            "profile": self.profile,
            "axis": self.axis,
            "family": self.kind,
            "dlambda_nonvanishing": self.dlambda_nonvanishing,
            "h": self.rows.first().map(|r| r.h),
            "rates": rates,
            "rows": self.rows,
        })
    }
}

/// Interpolants of sin(jπx) (times sin(jπy) in 2D), j = 1..count.
pub fn test_functions(mesh: &Arc<Mesh>, count: usize) -> Vec<FeFunction> {
    (1..=count)
        .map(|j| {
            let k = j as f64 * PI;
            if mesh.dim() == 1 {
                p1_interpolate(|p| (k * p[0]).sin(), mesh, true).expect("sine vanishes on the boundary")
            } else {
                p1_interpolate(|p| (k * p[0]).sin() * (k * p[1]).sin(), mesh, true).expect("sine vanishes on the boundary")
            }
        })
        .collect()
}

/// Solves the ε-problems and the homogenized problem on the base measure's mesh
/// and tabulates the error indicators.
pub fn run_h_convergence(
    family: &OscillatingFamily,
    measures: &MeasureFamily,
    lambda: f64,
    test_count: usize,
    opts: &SolverOptions,
) -> Result<ConvergenceTable> {
    check_lambda(lambda)?;
    let sigma = &measures.base;
    if sigma.is_zero() {
        return Err(Error::ZeroMeasure);
    }
    let mesh = sigma.mesh().clone();
    check_axis(&mesh, family.axis)?;
    let a0 = h_limit_layered(&family.profile, family.axis, mesh.dim());
    let field0 = CoefficientField::constant(&mesh, a0)?;
    let (u0, _) = solve_singular(&field0, sigma, lambda, opts)?;
    let load0 = singular_load(&u0, sigma, lambda)?;

    let identity = CoefficientField::identity(&mesh);
    let k = assemble_stiffness(&mesh, &identity);
    let phis: Vec<Vec<f64>> = test_functions(&mesh, test_count)
        .iter()
        .map(|f| k.matvec(&f.interior_values()))
        .collect();

    let mut rows = Vec::with_capacity(family.epsilons.len());
    for &eps in &family.epsilons {
        let with_eps = |e: Error| Error::InvalidArgument(format!("ε = {eps}: {e}"));
        let sigma_eps = measures
            .member(eps)
            .ok_or_else(|| Error::InvalidArgument(format!("measure family has no member for ε = {eps}")))?;
        let a_eps = layered_coefficient(&family.profile, eps, family.axis, &mesh)?;
        let (u_eps, _) = solve_singular(&a_eps, sigma_eps, lambda, opts).map_err(|e| match e {
            Error::StageFailure { .. } | Error::CgStagnation { .. } => e,
            other => with_eps(other),
        })?;
        let diff = u_eps.sub(&u0);
        let dv = diff.interior_values();
        let pairs = phis.iter().map(|kp| dot(kp, &dv).abs()).collect();
        let r: Vec<f64> = singular_load(&u_eps, sigma_eps, lambda)?
            .iter()
            .zip(&load0)
            .map(|(a, b)| a - b)
            .collect();
        let kr = opts.backend.solve(&k, &r)?;
        let d = if measures.kind == PerturbationKind::Fixed {
            0.0
        } else {
            d_lambda_with(sigma, sigma_eps, lambda, opts)?
        };
        rows.push(ConvergenceRow {
            epsilon: eps,
            l2_err: diff.l2_norm(),
            pairs,
            hminus1_rhs: dot(&r, &kr).max(0.0).sqrt(),
            d_lambda: d,
            h: mesh.h(),
        });
    }
    Ok(ConvergenceTable {
        lambda,
        a0,
        profile: family.profile.label().to_string(),
        axis: family.axis,
        kind: measures.kind,
        dlambda_nonvanishing: measures.dlambda_nonvanishing,
        rows,
    })
}

/// Fitted effective coefficient for −(a(x/ε)u')' = 1 on (0,1): the constant
/// c minimizing ‖u_ε − u₁/c‖ in the lumped L² norm, where u₁ solves with a ≡ 1.
pub fn fit_effective_coefficient(profile: &Profile, eps: f64, sigma: &DiscreteMeasure, opts: &SolverOptions) -> Result<f64> {
    let mesh = sigma.mesh();
    if mesh.dim() != 1 {
        return Err(Error::InvalidArgument("coefficient fitting is one-dimensional".into()));
    }
    let a_eps = layered_coefficient(profile, eps, Axis::X, mesh)?;
    let u_eps = linear_solution_with(&a_eps, sigma, opts.backend)?;
    let u1 = linear_solution_with(&CoefficientField::identity(mesh), sigma, opts.backend)?;
    let m = assemble_lumped_mass(mesh);
    let inner = |a: &FeFunction, b: &FeFunction| -> f64 {
        a.values().iter().zip(b.values()).zip(&m).map(|((x, y), w)| x * y * w).sum()
    };
    Ok(inner(&u1, &u1) / inner(&u_eps, &u1))
}
