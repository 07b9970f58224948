//! Nonnegative measures on a mesh, represented by their pairings with the P1
//! basis together with density samples on a quadrature rule and 1D atoms.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::grid::{Mesh, Point};
use crate::quadrature::{integrate_domain_graded, QuadratureRule, RuleKind};

/// Density as a function of the point and its distance to ∂Ω.
pub type DensityFn = Arc<dyn Fn(Point, f64) -> f64 + Send + Sync>;

/// Default per-cell Gauss order for smooth densities.
pub const DEFAULT_ORDER: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Mass {
    Finite(f64),
    Infinite,
}

impl Mass {
    pub fn value(self) -> f64 {
        match self {
            Mass::Finite(m) => m,
            Mass::Infinite => f64::INFINITY,
        }
    }

    pub fn is_finite(self) -> bool {
        matches!(self, Mass::Finite(_))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Atom {
    pub position: f64,
    pub mass: f64,
}

/// A point charge seen by the discrete operators: weight at a barycentric
/// location in an element.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Charge {
    pub cell: usize,
    pub bary: [f64; 3],
    pub weight: f64,
}

#[derive(Clone)]
pub struct DiscreteMeasure {
    mesh: Arc<Mesh>,
    rule: Option<Arc<QuadratureRule>>,
    density: Option<DensityFn>,
    // exponent s when the density is exactly δ^{-s}
    power: Option<f64>,
    samples: Vec<f64>,
    atoms: Vec<Atom>,
    load: Vec<f64>,
    mass: Mass,
}

impl fmt::Debug for DiscreteMeasure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("DiscreteMeasure")
            .field("dim", &self.mesh.dim())
            .field("cells", &self.mesh.cells_per_side())
            .field("rule", &self.rule.as_ref().map(|r| r.descriptor()))
            .field("power", &self.power)
            .field("atoms", &self.atoms)
            .field("mass", &self.mass)
            .finish()
    }
}

/// Density measure f·dx with a per-cell Gauss rule of `order` points per direction.
pub fn density_measure<F>(mesh: &Arc<Mesh>, f: F, order: usize) -> Result<DiscreteMeasure>
where
    F: Fn(Point) -> f64 + Send + Sync + 'static,
{
    let rule = Arc::new(QuadratureRule::new(mesh, RuleKind::gauss(order), 0.0));
    DiscreteMeasure::from_density(rule, Arc::new(move |p, _| f(p)))
}

/// Density δ(x)^{-s} with δ = dist(x, ∂Ω).
pub fn boundary_power_density(mesh: &Arc<Mesh>, s: f64) -> Result<DiscreteMeasure> {
    boundary_power_with_margin(mesh, s, 0.0)
}

fn boundary_power_with_margin(mesh: &Arc<Mesh>, s: f64, margin: f64) -> Result<DiscreteMeasure> {
    if !(s < 2.0) {
        return Err(Error::PairingDivergent { s });
    }
    let rule = Arc::new(QuadratureRule::new(mesh, RuleKind::graded(mesh.dim()), margin));
    let density: DensityFn = Arc::new(move |_, d: f64| if s == 0.0 { 1.0 } else { d.powf(-s) });
    let mut m = DiscreteMeasure::from_density(rule, density)?;
    m.power = Some(s);
    if mesh.dim() == 1 {
        m.load = power_load_1d(mesh, s, margin);
        m.mass = if s >= 1.0 && margin == 0.0 {
            Mass::Infinite
        } else {
            Mass::Finite(2.0 * power_integral(margin, 0.5, -s))
        };
    } else if s >= 1.0 && margin == 0.0 {
        for v in 0..mesh.num_vertices() {
            if mesh.is_boundary(v) {
                m.load[v] = f64::INFINITY;
            }
        }
        m.mass = Mass::Infinite;
    }
    Ok(m)
}

/// ∫_a^b x^p dx for 0 ≤ a ≤ b (infinite when a = 0 and p ≤ −1).
fn power_integral(a: f64, b: f64, p: f64) -> f64 {
    if b <= a {
        return 0.0;
    }
    if p == -1.0 {
        return if a == 0.0 { f64::INFINITY } else { (b / a).ln() };
    }
    if a == 0.0 && p < -1.0 {
        return f64::INFINITY;
    }
    (b.powf(p + 1.0) - a.powf(p + 1.0)) / (p + 1.0)
}

/// ∫_a^b (c0 + c1 x)·δ(x)^{-s} dx on [0, 1].
fn linear_times_power(a: f64, b: f64, c0: f64, c1: f64, s: f64) -> f64 {
    let mut total = 0.0;
    let (la, lb) = (a.min(0.5), b.min(0.5));
    if lb > la {
        for (coef, p) in [(c0, -s), (c1, 1.0 - s)] {
            if coef != 0.0 {
                total += coef * power_integral(la, lb, p);
            }
        }
    }
    let (ra, rb) = (a.max(0.5), b.max(0.5));
    if rb > ra {
        // y = 1 - x: c0 + c1 x = (c0 + c1) - c1 y
        let (ya, yb) = (1.0 - rb, 1.0 - ra);
        for (coef, p) in [(c0 + c1, -s), (-c1, 1.0 - s)] {
            if coef != 0.0 {
                total += coef * power_integral(ya, yb, p);
            }
        }
    }
    total
}

fn power_load_1d(mesh: &Mesh, s: f64, margin: f64) -> Vec<f64> {
    let mut load = vec![0.0; mesh.num_vertices()];
    for e in 0..mesh.num_cells() {
        let c = mesh.cell(e);
        let (x0, x1) = (mesh.vertex(c[0])[0], mesh.vertex(c[1])[0]);
        let (a, b) = (x0.max(margin), x1.min(1.0 - margin));
        if b <= a {
            continue;
        }
        let h = x1 - x0;
        // φ_left = (x1 - x)/h, φ_right = (x - x0)/h
        load[c[0]] += linear_times_power(a, b, x1 / h, -1.0 / h, s);
        load[c[1]] += linear_times_power(a, b, -x0 / h, 1.0 / h, s);
    }
    load
}

/// Point mass m at x0 (dimension 1 only).
pub fn atom_measure(mesh: &Arc<Mesh>, x0: f64, m: f64) -> Result<DiscreteMeasure> {
    if mesh.dim() != 1 {
        return Err(Error::AtomInTwoDimensions);
    }
    if !(x0 > 0.0 && x0 < 1.0) {
        return Err(Error::AtomNotInterior { position: x0 });
    }
    if !(m > 0.0 && m.is_finite()) {
        return Err(Error::InvalidArgument(format!("atom mass must be positive, got {m}")));
    }
    Ok(DiscreteMeasure::assemble(
        mesh.clone(),
        None,
        None,
        Vec::new(),
        vec![Atom { position: x0, mass: m }],
    ))
}

fn same_mesh(a: &Arc<Mesh>, b: &Arc<Mesh>) -> bool {
    Arc::ptr_eq(a, b) || **a == **b
}

/// Common rule of two measures, if they are combinable.
fn common_rule(a: &DiscreteMeasure, b: &DiscreteMeasure) -> Result<Option<Arc<QuadratureRule>>> {
    if !same_mesh(&a.mesh, &b.mesh) {
        return Err(Error::IncompatibleMeasures("measures live on different meshes"));
    }
    match (&a.rule, &b.rule) {
        (Some(ra), Some(rb)) if ra.descriptor() != rb.descriptor() => {
            Err(Error::IncompatibleMeasures("quadrature descriptors differ"))
        }
        (Some(r), _) | (None, Some(r)) => Ok(Some(r.clone())),
        (None, None) => Ok(None),
    }
}

/// |σ − ν| for measures sharing mesh and quadrature descriptor.
pub fn abs_diff(a: &DiscreteMeasure, b: &DiscreteMeasure) -> Result<DiscreteMeasure> {
    let rule = common_rule(a, b)?;
    let n = rule.as_ref().map_or(0, |r| r.len());
    let sa = a.samples_or_zero(n);
    let sb = b.samples_or_zero(n);
    let samples: Vec<f64> = sa.iter().zip(&sb).map(|(x, y)| (x - y).abs()).collect();
    let density = match (&a.density, &b.density, a.rule.is_some(), b.rule.is_some()) {
        (Some(f), Some(g), _, _) => {
            let (f, g) = (f.clone(), g.clone());
            Some(Arc::new(move |p, d| (f(p, d) - g(p, d)).abs()) as DensityFn)
        }
        (Some(f), None, _, false) | (None, Some(f), false, _) => Some(f.clone()),
        _ => None,
    };
    let atoms = merge_atoms(&a.atoms, &b.atoms, |x, y| (x - y).abs());
    let mut m = DiscreteMeasure::assemble(a.mesh.clone(), rule, density, samples, atoms);
    let (ia, ib) = (!a.mass.is_finite(), !b.mass.is_finite());
    if ia != ib {
        m.mass = Mass::Infinite;
    } else if ia && ib && m.rule_margin() == 0.0 {
        if let Some(f) = &m.density {
            let (_, divergent) = integrate_domain_graded(m.mesh.dim(), |p, d| f(p, d), 40);
            if divergent {
                m.mass = Mass::Infinite;
            }
        }
    }
    Ok(m)
}

/// σ + ν.
pub fn add(a: &DiscreteMeasure, b: &DiscreteMeasure) -> Result<DiscreteMeasure> {
    let rule = common_rule(a, b)?;
    let n = rule.as_ref().map_or(0, |r| r.len());
    let samples: Vec<f64> = a
        .samples_or_zero(n)
        .iter()
        .zip(&b.samples_or_zero(n))
        .map(|(x, y)| x + y)
        .collect();
    let density = match (&a.density, &b.density, a.rule.is_some(), b.rule.is_some()) {
        (Some(f), Some(g), _, _) => {
            let (f, g) = (f.clone(), g.clone());
            Some(Arc::new(move |p, d| f(p, d) + g(p, d)) as DensityFn)
        }
        (Some(f), None, _, false) | (None, Some(f), false, _) => Some(f.clone()),
        _ => None,
    };
    let atoms = merge_atoms(&a.atoms, &b.atoms, |x, y| x + y);
    let mut m = DiscreteMeasure::assemble(a.mesh.clone(), rule, density, samples, atoms);
    // exact loads are additive
    m.load = a.load.iter().zip(&b.load).map(|(x, y)| x + y).collect();
    if !a.mass.is_finite() || !b.mass.is_finite() {
        m.mass = Mass::Infinite;
    } else {
        m.mass = Mass::Finite(a.mass.value() + b.mass.value());
    }
    Ok(m)
}

fn merge_atoms(a: &[Atom], b: &[Atom], op: impl Fn(f64, f64) -> f64) -> Vec<Atom> {
    let mut positions: Vec<f64> = a.iter().chain(b).map(|t| t.position).collect();
    positions.sort_by(f64::total_cmp);
    positions.dedup();
    positions
        .into_iter()
        .filter_map(|x| {
            let ma: f64 = a.iter().filter(|t| t.position == x).map(|t| t.mass).sum();
            let mb: f64 = b.iter().filter(|t| t.position == x).map(|t| t.mass).sum();
            let mass = op(ma, mb);
            (mass != 0.0).then_some(Atom { position: x, mass })
        })
        .collect()
}

/// Restriction of σ to the core {x : dist(x, ∂Ω) ≥ margin}.
pub fn truncate_to_core(sigma: &DiscreteMeasure, margin: f64) -> Result<DiscreteMeasure> {
    if !(0.0..0.5).contains(&margin) {
        if margin >= 0.5 {
            return Err(Error::MarginTooLarge { margin });
        }
        return Err(Error::InvalidArgument(format!("margin must be nonnegative, got {margin}")));
    }
    if margin == 0.0 {
        return Ok(sigma.clone());
    }
    let mesh = &sigma.mesh;
    let atoms: Vec<Atom> = sigma
        .atoms
        .iter()
        .copied()
        .filter(|a| a.position.min(1.0 - a.position) >= margin)
        .collect();
    let Some(rule) = &sigma.rule else {
        return Ok(DiscreteMeasure::assemble(mesh.clone(), None, None, Vec::new(), atoms));
    };
    let descriptor = rule.descriptor();
    let margin = margin.max(descriptor.core_margin);
    let mut m = if let Some(s) = sigma.power {
        boundary_power_with_margin(mesh, s, margin)?
    } else if let Some(f) = &sigma.density {
        let rule = Arc::new(QuadratureRule::new(mesh, descriptor.kind, margin));
        DiscreteMeasure::from_density(rule, f.clone())?
    } else {
        let samples = rule
            .points()
            .iter()
            .zip(&sigma.samples)
            .map(|(q, &f)| if q.delta >= margin { f } else { 0.0 })
            .collect();
        DiscreteMeasure::assemble(mesh.clone(), Some(rule.clone()), None, samples, Vec::new())
    };
    if !atoms.is_empty() {
        let a = DiscreteMeasure::assemble(mesh.clone(), None, None, Vec::new(), atoms);
        m = add(&m, &a)?;
    }
    Ok(m)
}

/// Weighted Lebesgue norm (∫ f^{2/(1+λ)} δ^{2(1−λ)/(1+λ)} dx)^{(1+λ)/2} on the unit
/// interval or square by graded quadrature; +∞ when the integral diverges.
///
/// `f` receives the point and its distance to ∂Ω.
pub fn dhr_weighted_norm<F: Fn(Point, f64) -> f64>(dim: usize, f: F, lambda: f64) -> f64 {
    let q = 2.0 / (1.0 + lambda);
    let wexp = 2.0 * (1.0 - lambda) / (1.0 + lambda);
    let (integral, divergent) = integrate_domain_graded(dim, |p, d| f(p, d).powf(q) * d.powf(wexp), 40);
    if divergent || !integral.is_finite() {
        f64::INFINITY
    } else {
        integral.powf(1.0 / q)
    }
}

impl DiscreteMeasure {
    /// Zero measure on a mesh.
    pub fn zero(mesh: &Arc<Mesh>) -> Self {
        Self::assemble(mesh.clone(), None, None, Vec::new(), Vec::new())
    }

    /// Density measure on a given rule; rejects negative samples.
    pub fn from_density(rule: Arc<QuadratureRule>, f: DensityFn) -> Result<Self> {
        let samples = rule
            .points()
            .iter()
            .map(|q| {
                let v = f(q.pos, q.delta);
                if v >= 0.0 && v.is_finite() {
                    Ok(v)
                } else {
                    Err(Error::SignedDensity {
                        x: q.pos[0],
                        y: q.pos[1],
                        value: v,
                    })
                }
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self::assemble(rule.mesh().clone(), Some(rule), Some(f), samples, Vec::new()))
    }

    /// Measure with the given density samples on an existing rule.
    pub fn from_samples(rule: Arc<QuadratureRule>, samples: Vec<f64>, atoms: Vec<Atom>) -> Result<Self> {
        assert_eq!(samples.len(), rule.len(), "one sample per quadrature point");
        if let Some((q, &v)) = rule.points().iter().zip(&samples).find(|(_, v)| !(**v >= 0.0)) {
            return Err(Error::SignedDensity {
                x: q.pos[0],
                y: q.pos[1],
                value: v,
            });
        }
        Ok(Self::assemble(rule.mesh().clone(), Some(rule), None, samples, atoms))
    }

    fn assemble(
        mesh: Arc<Mesh>,
        rule: Option<Arc<QuadratureRule>>,
        density: Option<DensityFn>,
        samples: Vec<f64>,
        atoms: Vec<Atom>,
    ) -> Self {
        let mut m = Self {
            mesh,
            rule,
            density,
            power: None,
            samples,
            atoms,
            load: Vec::new(),
            mass: Mass::Finite(0.0),
        };
        let mut load = vec![0.0; m.mesh.num_vertices()];
        let mut mass = 0.0;
        for c in m.charges() {
            for (a, &v) in m.mesh.cell(c.cell).iter().enumerate() {
                load[v] += c.weight * c.bary[a];
            }
            mass += c.weight;
        }
        m.load = load;
        m.mass = Mass::Finite(mass);
        m
    }

    fn samples_or_zero(&self, n: usize) -> Vec<f64> {
        if self.samples.is_empty() {
            vec![0.0; n]
        } else {
            self.samples.clone()
        }
    }

    fn rule_margin(&self) -> f64 {
        self.rule.as_ref().map_or(0.0, |r| r.descriptor().core_margin)
    }

    pub fn mesh(&self) -> &Arc<Mesh> {
        &self.mesh
    }

    pub fn rule(&self) -> Option<&Arc<QuadratureRule>> {
        self.rule.as_ref()
    }

    /// Density values at the rule's points (empty without a density part).
    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn density(&self) -> Option<&DensityFn> {
        self.density.as_ref()
    }

    /// b_i = ∫φ_i dσ at every vertex (boundary vertices included).
    pub fn load(&self) -> &[f64] {
        &self.load
    }

    /// Load restricted to interior degrees of freedom.
    pub fn interior_load(&self) -> Vec<f64> {
        self.mesh.interior_vertices().iter().map(|&v| self.load[v]).collect()
    }

    pub fn mass(&self) -> Mass {
        self.mass
    }

    /// Total weight seen by the discrete operators (finite even for infinite mass).
    pub fn quadrature_mass(&self) -> f64 {
        self.charges().map(|c| c.weight).sum()
    }

    pub fn is_zero(&self) -> bool {
        self.samples.iter().all(|&v| v == 0.0) && self.atoms.is_empty()
    }

    /// Density quadrature points weighted by the density, then atoms.
    pub fn charges(&self) -> impl Iterator<Item = Charge> + '_ {
        let density = self.rule.iter().flat_map(move |r| {
            r.points().iter().zip(&self.samples).filter(|(_, &f)| f != 0.0).map(|(q, &f)| Charge {
                cell: q.cell,
                bary: q.bary,
                weight: q.weight * f,
            })
        });
        let atoms = self.atoms.iter().map(move |a| {
            let (cell, bary) = self.mesh.locate_1d(a.position);
            Charge {
                cell,
                bary,
                weight: a.mass,
            }
        });
        density.chain(atoms)
    }

    /// t·σ for t ≥ 0.
    pub fn scale(&self, t: f64) -> Result<Self> {
        if !(t >= 0.0 && t.is_finite()) {
            return Err(Error::InvalidArgument(format!("scale factor must be nonnegative, got {t}")));
        }
        let mut m = self.clone();
        m.samples.iter_mut().for_each(|v| *v *= t);
        m.atoms.iter_mut().for_each(|a| a.mass *= t);
        m.atoms.retain(|a| a.mass != 0.0);
        m.load.iter_mut().for_each(|v| {
            *v = if *v == f64::INFINITY && t == 0.0 { 0.0 } else { *v * t }
        });
        m.mass = match m.mass {
            Mass::Infinite if t > 0.0 => Mass::Infinite,
            other => Mass::Finite(other.value().min(f64::MAX) * t),
        };
        if let Some(f) = m.density.take() {
            m.density = Some(Arc::new(move |p, d| t * f(p, d)));
        }
        m.power = None;
        Ok(m)
    }

    /// Same rule and atoms, new density samples (used for measure families).
    pub fn with_density(&self, f: DensityFn) -> Result<Self> {
        let rule = self
            .rule
            .clone()
            .ok_or(Error::IncompatibleMeasures("measure has no density part"))?;
        let mut m = Self::from_density(rule, f)?;
        if !self.atoms.is_empty() {
            let a = Self::assemble(self.mesh.clone(), None, None, Vec::new(), self.atoms.clone());
            m = add(&m, &a)?;
        }
        Ok(m)
    }

    /// Measure with every density sample and atom mass multiplied by `weight`,
    /// which receives the quadrature point's cell and barycentric coordinates.
    pub fn reweighted<F: Fn(usize, &[f64; 3]) -> f64>(&self, weight: F) -> Result<Self> {
        let samples: Vec<f64> = match &self.rule {
            Some(r) => r
                .points()
                .iter()
                .zip(&self.samples)
                .map(|(q, &f)| if f == 0.0 { 0.0 } else { f * weight(q.cell, &q.bary) })
                .collect(),
            None => Vec::new(),
        };
        let atoms: Vec<Atom> = self
            .atoms
            .iter()
            .map(|a| {
                let (cell, bary) = self.mesh.locate_1d(a.position);
                Atom {
                    position: a.position,
                    mass: a.mass * weight(cell, &bary),
                }
            })
            .filter(|a| a.mass != 0.0)
            .collect();
        if samples.iter().chain(atoms.iter().map(|a| &a.mass)).any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::WeightSingularity);
        }
        Ok(Self::assemble(self.mesh.clone(), self.rule.clone(), None, samples, atoms))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{build_interval_mesh, build_square_mesh, dist_boundary};
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use std::f64::consts::{LN_2, PI};

    #[test]
    fn density_examples() {
        let m = build_interval_mesh(4).unwrap();
        let one = density_measure(&m, |_| 1.0, DEFAULT_ORDER).unwrap();
        assert_abs_diff_eq!(one.mass().value(), 1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(one.load()[1], 0.25, epsilon = 1e-15);
        let m = build_interval_mesh(64).unwrap();
        let beta = density_measure(&m, |p| 2.0 * (p[0] * (1.0 - p[0])).sqrt(), DEFAULT_ORDER).unwrap();
        assert_abs_diff_eq!(beta.mass().value(), PI / 4.0, epsilon = 1e-4);
        let neg = density_measure(&m, |p| p[0] - 0.5, DEFAULT_ORDER);
        assert!(matches!(neg, Err(Error::SignedDensity { .. })));
    }

    #[test]
    fn boundary_power_examples() {
        let m = build_interval_mesh(8).unwrap();
        let s0 = boundary_power_density(&m, 0.0).unwrap();
        assert_abs_diff_eq!(s0.mass().value(), 1.0, epsilon = 1e-14);
        let half = boundary_power_density(&m, 0.5).unwrap();
        assert_abs_diff_eq!(half.mass().value(), 2.0 * 2.0f64.sqrt(), epsilon = 1e-12);
        assert_abs_diff_eq!(half.load().iter().sum::<f64>(), 2.0 * 2.0f64.sqrt(), epsilon = 1e-12);
        assert_abs_diff_eq!(half.quadrature_mass(), 2.0 * 2.0f64.sqrt(), epsilon = 1e-10);
        let one = boundary_power_density(&m, 1.0).unwrap();
        assert_abs_diff_eq!(one.load()[1], 2.0 * LN_2, epsilon = 1e-13);
        assert_eq!(one.mass(), Mass::Infinite);
        assert!(matches!(boundary_power_density(&m, 2.0), Err(Error::PairingDivergent { .. })));
        // graded quadrature pairings agree with the exact antiderivatives
        let q = DiscreteMeasure::from_samples(
            one.rule().unwrap().clone(),
            one.samples().to_vec(),
            Vec::new(),
        )
        .unwrap();
        for i in 1..8 {
            assert_abs_diff_eq!(q.load()[i], one.load()[i], epsilon = 1e-10);
        }
    }

    #[test]
    fn boundary_power_2d() {
        let m = build_square_mesh(8).unwrap();
        let half = boundary_power_density(&m, 0.5).unwrap();
        let exact = 4.0 * (2.0 * 0.5f64.sqrt() - (4.0 / 3.0) * 0.5f64.powf(1.5));
        assert_abs_diff_eq!(half.mass().value(), exact, epsilon = 1e-10);
        let one = boundary_power_density(&m, 1.5).unwrap();
        assert_eq!(one.mass(), Mass::Infinite);
        assert!(one.interior_load().iter().all(|b| b.is_finite() && *b > 0.0));
    }

    #[test]
    fn atom_examples() {
        let m = build_interval_mesh(4).unwrap();
        let a = atom_measure(&m, 0.5, 1.0).unwrap();
        assert_eq!(a.load(), &[0.0, 0.0, 1.0, 0.0, 0.0]);
        let a = atom_measure(&m, 0.3, 1.0).unwrap();
        assert_abs_diff_eq!(a.load()[1], 0.8, epsilon = 1e-14);
        assert_abs_diff_eq!(a.load()[2], 0.2, epsilon = 1e-14);
        assert_eq!(a.mass(), Mass::Finite(1.0));
        let sq = build_square_mesh(4).unwrap();
        assert!(matches!(atom_measure(&sq, 0.5, 1.0), Err(Error::AtomInTwoDimensions)));
    }

    #[test]
    fn abs_diff_examples() {
        let m = build_interval_mesh(8).unwrap();
        let one = density_measure(&m, |_| 1.0, DEFAULT_ORDER).unwrap();
        let two = density_measure(&m, |_| 2.0, DEFAULT_ORDER).unwrap();
        assert!(abs_diff(&one, &one).unwrap().is_zero());
        let d = abs_diff(&one, &two).unwrap();
        assert_abs_diff_eq!(d.mass().value(), 1.0, epsilon = 1e-14);
        let a1 = atom_measure(&m, 0.5, 1.0).unwrap();
        let a3 = atom_measure(&m, 0.5, 3.0).unwrap();
        assert_eq!(abs_diff(&a1, &a3).unwrap().atoms(), &[Atom { position: 0.5, mass: 2.0 }]);
        let graded = boundary_power_density(&m, 0.5).unwrap();
        assert!(matches!(abs_diff(&one, &graded), Err(Error::IncompatibleMeasures(_))));
        let other = build_interval_mesh(16).unwrap();
        let far = density_measure(&other, |_| 1.0, DEFAULT_ORDER).unwrap();
        assert!(matches!(abs_diff(&one, &far), Err(Error::IncompatibleMeasures(_))));
        let inf = boundary_power_density(&m, 1.0).unwrap();
        assert!(abs_diff(&inf, &inf).unwrap().is_zero());
        assert_eq!(abs_diff(&inf, &inf).unwrap().mass(), Mass::Finite(0.0));
    }

    #[test]
    fn truncation_examples() {
        let m = build_interval_mesh(8).unwrap();
        let dx = density_measure(&m, |_| 1.0, DEFAULT_ORDER).unwrap();
        let core = truncate_to_core(&dx, 0.25).unwrap();
        assert_abs_diff_eq!(core.mass().value(), 0.5, epsilon = 1e-14);
        assert!(core.rule().unwrap().points().iter().all(|q| q.pos[0] >= 0.25 && q.pos[0] <= 0.75));
        let same = truncate_to_core(&dx, 0.0).unwrap();
        assert_eq!(same.load(), dx.load());
        let inv = boundary_power_density(&m, 1.0).unwrap();
        let core = truncate_to_core(&inv, 0.25).unwrap();
        assert_abs_diff_eq!(core.mass().value(), 2.0 * LN_2, epsilon = 1e-13);
        assert_abs_diff_eq!(core.load().iter().sum::<f64>(), 2.0 * LN_2, epsilon = 1e-13);
        assert!(matches!(truncate_to_core(&dx, 0.5), Err(Error::MarginTooLarge { .. })));
        let a = atom_measure(&m, 0.1, 1.0).unwrap();
        assert!(truncate_to_core(&a, 0.25).unwrap().is_zero());
    }

    #[test]
    fn dhr_examples() {
        for dim in [1, 2] {
            assert_abs_diff_eq!(dhr_weighted_norm(dim, |_, _| 1.0, 1.0), 1.0, epsilon = 1e-12);
        }
        assert_abs_diff_eq!(dhr_weighted_norm(1, |_, _| 1.0, 0.0), (1.0f64 / 12.0).sqrt(), epsilon = 1e-12);
        assert_abs_diff_eq!(dhr_weighted_norm(1, |_, d| d.powf(-0.5), 0.5), 1.0, epsilon = 1e-10);
        // δ^{-s} at λ = 1 is unweighted L¹: divergent for s = 1
        assert!(dhr_weighted_norm(1, |_, d| d.powf(-1.0), 1.0).is_infinite());
        assert!(dhr_weighted_norm(1, |_, d| d.powf(-1.2), 0.5).is_finite());
        assert!(dhr_weighted_norm(1, |_, d| d.powf(-1.3), 0.5).is_infinite());
    }

    #[test]
    fn power_mass_closed_form() {
        let m = build_interval_mesh(16).unwrap();
        for s in [0.1, 0.3, 0.6, 0.9] {
            let mu = boundary_power_density(&m, s).unwrap();
            let closed = 2.0 * 0.5f64.powf(1.0 - s) / (1.0 - s);
            assert_abs_diff_eq!(mu.mass().value(), closed, epsilon = 1e-12);
            // graded panels stop at 2^-40·h, which costs ~(2^-40·h)^{1-s}/(1-s)
            if s < 0.7 {
                assert_abs_diff_eq!(mu.quadrature_mass(), closed, epsilon = 1e-7 * closed);
            }
        }
    }

    proptest! {
        #[test]
        fn load_is_linear_in_density(t in 0.0f64..10.0, a in 0.0f64..3.0, b in 0.0f64..3.0) {
            let m = build_interval_mesh(16).unwrap();
            let f = move |p: Point| a + b * p[0] * p[0];
            let base = density_measure(&m, f, DEFAULT_ORDER).unwrap();
            let scaled = density_measure(&m, move |p| t * f(p), DEFAULT_ORDER).unwrap();
            for (x, y) in base.load().iter().zip(scaled.load()) {
                prop_assert!((t * x - y).abs() <= 1e-12 * (1.0 + y.abs()));
            }
            let via_scale = base.scale(t).unwrap();
            for (x, y) in via_scale.load().iter().zip(scaled.load()) {
                prop_assert!((x - y).abs() <= 1e-12 * (1.0 + y.abs()));
            }
        }

        #[test]
        fn abs_diff_below_sum(a in 0.0f64..3.0, b in -2.0f64..2.0, c in 0.0f64..3.0, w in 0.05f64..0.95) {
            let m = build_interval_mesh(32).unwrap();
            let s = density_measure(&m, move |p| a + b.abs() * (p[0] - w).abs(), DEFAULT_ORDER).unwrap();
            let n = density_measure(&m, move |p| c * (1.0 + (4.0 * p[0]).sin().abs()), DEFAULT_ORDER).unwrap();
            let d = abs_diff(&s, &n).unwrap();
            let sum = add(&s, &n).unwrap();
            for (x, y) in d.load().iter().zip(sum.load()) {
                prop_assert!(*x <= y + 1e-14);
            }
            prop_assert!((sum.load().iter().sum::<f64>() - sum.mass().value()).abs() < 1e-12);
        }

        #[test]
        fn truncated_mass_monotone(m1 in 0.0f64..0.45, m2 in 0.0f64..0.45, k in 0usize..3) {
            let mesh = build_square_mesh(8).unwrap();
            let sigma = match k {
                0 => density_measure(&mesh, |p| 1.0 + p[0], DEFAULT_ORDER).unwrap(),
                1 => boundary_power_density(&mesh, 0.5).unwrap(),
                _ => density_measure(&mesh, |p| dist_boundary(2, p), DEFAULT_ORDER).unwrap(),
            };
            let (lo, hi) = if m1 < m2 { (m1, m2) } else { (m2, m1) };
            let a = truncate_to_core(&sigma, lo).unwrap().mass().value();
            let b = truncate_to_core(&sigma, hi).unwrap().mass().value();
            prop_assert!(b <= a + 1e-12);
            prop_assert!(a <= sigma.mass().value() + 1e-12);
        }
    }

    #[test]
    fn truncated_mass_converges() {
        let mesh = build_interval_mesh(64).unwrap();
        let sigma = boundary_power_density(&mesh, 0.5).unwrap();
        let full = sigma.mass().value();
        let mut prev = 0.0;
        for k in 2..20 {
            let mass = truncate_to_core(&sigma, 0.5f64.powi(k)).unwrap().mass().value();
            assert!(mass >= prev);
            prev = mass;
        }
        assert_abs_diff_eq!(prev, full, epsilon = 1e-2);
    }
}
