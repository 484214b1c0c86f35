//! Dirichlet-Laplacian eigenbasis on the unit interval and unit square,
//! tensor Gauss–Legendre quadrature over unions of boxes, and the
//! gradient / adjoint-gradient pair.
//!
//! Points are `[f64; 2]` throughout; in one dimension only the first
//! coordinate is read.

use crate::error::{Error, Result};
use crate::quadrature::{composite, GaussLegendre};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::f64::consts::{PI, SQRT_2};
use std::sync::Arc;

pub type Point = [f64; 2];

/// Largest number of modes a basis may hold.
pub const MAX_MODES: usize = 10_000;
/// Relative tolerance used to merge eigenvalues into one group.
pub const GROUP_TOL: f64 = 1e-9;
const NODES_PER_PANEL: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Dim {
    One,
    Two,
}

impl Dim {
    pub fn n(self) -> usize {
        match self {
            Dim::One => 1,
            Dim::Two => 2,
        }
    }

    pub fn from_n(n: usize) -> Result<Self> {
        match n {
            1 => Ok(Dim::One),
            2 => Ok(Dim::Two),
            _ => Err(Error::Config(format!("dimension must be 1 or 2, got {n}"))),
        }
    }
}

/// A Dirichlet eigenfunction: `√2 sin(jπx)` on the interval or
/// `2 sin(mπx₁) sin(nπx₂)` on the square.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "Vec<u32>", into = "Vec<u32>")]
pub enum Mode {
    Line(u32),
    Square(u32, u32),
}

impl TryFrom<Vec<u32>> for Mode {
    type Error = Error;

    fn try_from(v: Vec<u32>) -> Result<Self> {
        let m = match v.as_slice() {
            [j] => Mode::Line(*j),
            [m, n] => Mode::Square(*m, *n),
            _ => {
                return Err(Error::Config(format!(
                    "mode needs 1 or 2 indices, got {v:?}"
                )))
            }
        };
        m.validate()?;
        Ok(m)
    }
}

impl From<Mode> for Vec<u32> {
    fn from(m: Mode) -> Self {
        match m {
            Mode::Line(j) => vec![j],
            Mode::Square(m, n) => vec![m, n],
        }
    }
}

impl std::fmt::Display for Mode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Mode::Line(j) => write!(f, "({j})"),
            Mode::Square(m, n) => write!(f, "({m},{n})"),
        }
    }
}

impl Mode {
    pub fn validate(self) -> Result<()> {
        let ok = match self {
            Mode::Line(j) => j >= 1,
            Mode::Square(m, n) => m >= 1 && n >= 1,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!(
                "mode indices must be >= 1, got {self}"
            )))
        }
    }

    pub fn dim(self) -> Dim {
        match self {
            Mode::Line(_) => Dim::One,
            Mode::Square(..) => Dim::Two,
        }
    }

    pub fn max_index(self) -> u32 {
        match self {
            Mode::Line(j) => j,
            Mode::Square(m, n) => m.max(n),
        }
    }

    /// Sum of squared indices, so that `λ = -π²·index_norm2`.
    pub fn index_norm2(self) -> u64 {
        match self {
            Mode::Line(j) => (j as u64).pow(2),
            Mode::Square(m, n) => (m as u64).pow(2) + (n as u64).pow(2),
        }
    }

    pub fn eigenvalue(self) -> f64 {
        -(self.index_norm2() as f64) * PI * PI
    }

    pub fn eval(self, x: Point) -> f64 {
        match self {
            Mode::Line(j) => SQRT_2 * (j as f64 * PI * x[0]).sin(),
            Mode::Square(m, n) => 2.0 * (m as f64 * PI * x[0]).sin() * (n as f64 * PI * x[1]).sin(),
        }
    }

    /// Analytic gradient; the second entry is zero in one dimension.
    pub fn grad(self, x: Point) -> Point {
        match self {
            Mode::Line(j) => {
                let k = j as f64 * PI;
                [SQRT_2 * k * (k * x[0]).cos(), 0.0]
            }
            Mode::Square(m, n) => {
                let (km, kn) = (m as f64 * PI, n as f64 * PI);
                let (s1, c1) = (km * x[0]).sin_cos();
                let (s2, c2) = (kn * x[1]).sin_cos();
                [2.0 * km * c1 * s2, 2.0 * kn * s1 * c2]
            }
        }
    }
}

/// Modes sharing one eigenvalue.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EigenGroup {
    pub eigenvalue: f64,
    pub members: Vec<Mode>,
}

impl EigenGroup {
    pub fn multiplicity(&self) -> usize {
        self.members.len()
    }
}

/// All modes with every index at most `truncation`, grouped by eigenvalue
/// in strictly decreasing order. Coefficient vectors use the flattened
/// group-by-group order of [`Basis::modes`].
#[derive(Debug, Clone)]
pub struct Basis {
    dim: Dim,
    truncation: u32,
    groups: Vec<EigenGroup>,
    modes: Vec<Mode>,
    group_of: Vec<usize>,
    index: HashMap<Mode, usize>,
}

pub fn build_basis(dim: Dim, truncation: u32) -> Result<Basis> {
    if truncation == 0 {
        return Err(Error::Size("truncation must be at least 1".into()));
    }
    let m = truncation as u64;
    let count = match dim {
        Dim::One => m,
        Dim::Two => m.saturating_mul(m),
    };
    if count > MAX_MODES as u64 {
        return Err(Error::Size(format!(
            "{count} modes requested, the limit is {MAX_MODES}"
        )));
    }
    let mut modes: Vec<Mode> = match dim {
        Dim::One => (1..=truncation).map(Mode::Line).collect(),
        Dim::Two => (1..=truncation)
            .flat_map(|a| (1..=truncation).map(move |b| Mode::Square(a, b)))
            .collect(),
    };
    modes.sort_by(|a, b| a.index_norm2().cmp(&b.index_norm2()).then(a.cmp(b)));

    let mut groups: Vec<EigenGroup> = Vec::new();
    for mode in modes {
        let lam = mode.eigenvalue();
        match groups.last_mut() {
            Some(g) if (g.eigenvalue - lam).abs() <= GROUP_TOL * lam.abs() => g.members.push(mode),
            _ => groups.push(EigenGroup {
                eigenvalue: lam,
                members: vec![mode],
            }),
        }
    }
    let mut flat = Vec::with_capacity(count as usize);
    let mut group_of = Vec::with_capacity(count as usize);
    for (gi, g) in groups.iter().enumerate() {
        for &m in &g.members {
            flat.push(m);
            group_of.push(gi);
        }
    }
    let index = flat.iter().enumerate().map(|(i, m)| (*m, i)).collect();
    Ok(Basis {
        dim,
        truncation,
        groups,
        modes: flat,
        group_of,
        index,
    })
}

impl Basis {
    pub fn dim(&self) -> Dim {
        self.dim
    }

    pub fn truncation(&self) -> u32 {
        self.truncation
    }

    pub fn groups(&self) -> &[EigenGroup] {
        &self.groups
    }

    pub fn modes(&self) -> &[Mode] {
        &self.modes
    }

    pub fn len(&self) -> usize {
        self.modes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.modes.is_empty()
    }

    pub fn index_of(&self, mode: Mode) -> Option<usize> {
        self.index.get(&mode).copied()
    }

    /// Group index of the mode at flattened position `i`.
    pub fn group_of(&self, i: usize) -> usize {
        self.group_of[i]
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        self.modes.iter().map(|m| m.eigenvalue()).collect()
    }
}

/// An axis-aligned box `Π [lo_s, hi_s]`; only the first axis is used in
/// one dimension.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    pub lo: Point,
    pub hi: Point,
}

impl Rect {
    pub fn interval(a: f64, b: f64) -> Self {
        Rect {
            lo: [a, 0.0],
            hi: [b, 1.0],
        }
    }

    pub fn new(lo: Point, hi: Point) -> Self {
        Rect { lo, hi }
    }

    fn measure(&self, dim: Dim) -> f64 {
        (0..dim.n()).map(|s| self.hi[s] - self.lo[s]).product()
    }

    fn contains(&self, x: Point, dim: Dim) -> bool {
        (0..dim.n()).all(|s| x[s] >= self.lo[s] && x[s] <= self.hi[s])
    }

    fn overlap(&self, other: &Rect, dim: Dim) -> f64 {
        (0..dim.n())
            .map(|s| (self.hi[s].min(other.hi[s]) - self.lo[s].max(other.lo[s])).max(0.0))
            .product()
    }
}

/// A finite union of boxes inside the unit domain with disjoint interiors.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Region {
    dim: Dim,
    rects: Vec<Rect>,
}

impl Region {
    pub fn new(dim: Dim, rects: Vec<Rect>) -> Result<Self> {
        if rects.is_empty() {
            return Err(Error::Config("a region needs at least one box".into()));
        }
        for r in &rects {
            for s in 0..dim.n() {
                let (a, b) = (r.lo[s], r.hi[s]);
                if !(a.is_finite() && b.is_finite() && 0.0 <= a && a < b && b <= 1.0) {
                    return Err(Error::Config(format!(
                        "box {r:?} is empty or leaves the unit domain on axis {}",
                        s + 1
                    )));
                }
            }
        }
        for (i, a) in rects.iter().enumerate() {
            for b in &rects[i + 1..] {
                if a.overlap(b, dim) > 0.0 {
                    return Err(Error::Config(format!("boxes {a:?} and {b:?} overlap")));
                }
            }
        }
        Ok(Region { dim, rects })
    }

    /// The whole domain `Ω`.
    pub fn whole(dim: Dim) -> Self {
        Region {
            dim,
            rects: vec![Rect::new([0.0, 0.0], [1.0, 1.0])],
        }
    }

    pub fn dim(&self) -> Dim {
        self.dim
    }

    pub fn rects(&self) -> &[Rect] {
        &self.rects
    }

    pub fn measure(&self) -> f64 {
        self.rects.iter().map(|r| r.measure(self.dim)).sum()
    }

    /// Closed membership test.
    pub fn contains(&self, x: Point) -> bool {
        self.rects.iter().any(|r| r.contains(x, self.dim))
    }
}

/// Tensor Gauss–Legendre nodes and weights over a region.
#[derive(Debug, Clone)]
pub struct QuadGrid {
    region: Region,
    nodes: Vec<Point>,
    weights: Vec<f64>,
}

impl QuadGrid {
    /// Grid exact-grade for products of modes up to combined index `freq`:
    /// each box axis gets `max(4, 2·freq)` panels of 8 nodes.
    pub fn new(region: &Region, freq: u32) -> Self {
        let panels = (2 * freq as usize).max(4);
        let rule = GaussLegendre::new(NODES_PER_PANEL);
        let mut nodes = Vec::new();
        let mut weights = Vec::new();
        for r in &region.rects {
            let (x1, w1) = composite(r.lo[0], r.hi[0], panels, &rule);
            match region.dim {
                Dim::One => {
                    nodes.extend(x1.iter().map(|&x| [x, 0.0]));
                    weights.extend(w1);
                }
                Dim::Two => {
                    let (x2, w2) = composite(r.lo[1], r.hi[1], panels, &rule);
                    for (a, wa) in x1.iter().zip(&w1) {
                        for (b, wb) in x2.iter().zip(&w2) {
                            nodes.push([*a, *b]);
                            weights.push(wa * wb);
                        }
                    }
                }
            }
        }
        QuadGrid {
            region: region.clone(),
            nodes,
            weights,
        }
    }

    pub fn region(&self) -> &Region {
        &self.region
    }

    pub fn nodes(&self) -> &[Point] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn integrate<F: Fn(Point) -> f64>(&self, f: F) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(x, w)| w * f(*x))
            .sum()
    }
}

/// Scalar samples on a quadrature grid, i.e. an element of `L²` of the
/// grid's region.
#[derive(Debug, Clone)]
pub struct FieldSamples {
    pub grid: Arc<QuadGrid>,
    pub values: Vec<f64>,
}

impl FieldSamples {
    pub fn from_fn<F: Fn(Point) -> f64>(grid: Arc<QuadGrid>, f: F) -> Self {
        let values = grid.nodes.iter().map(|x| f(*x)).collect();
        FieldSamples { grid, values }
    }

    pub fn norm_sq(&self) -> f64 {
        self.values
            .iter()
            .zip(&self.grid.weights)
            .map(|(v, w)| w * v * v)
            .sum()
    }
}

/// `n` component arrays on a quadrature grid.
#[derive(Debug, Clone)]
pub struct VectorFieldSamples {
    pub grid: Arc<QuadGrid>,
    pub components: Vec<Vec<f64>>,
}

impl VectorFieldSamples {
    pub fn new(grid: Arc<QuadGrid>, components: Vec<Vec<f64>>) -> Result<Self> {
        if components.len() != grid.region.dim.n() {
            return Err(Error::Size(format!(
                "expected {} components, got {}",
                grid.region.dim.n(),
                components.len()
            )));
        }
        if components.iter().any(|c| c.len() != grid.len()) {
            return Err(Error::Size(
                "component length differs from the grid size".into(),
            ));
        }
        Ok(VectorFieldSamples { grid, components })
    }

    pub fn from_fn<F: Fn(Point) -> Point>(grid: Arc<QuadGrid>, f: F) -> Self {
        let n = grid.region.dim.n();
        let mut components = vec![Vec::with_capacity(grid.len()); n];
        for x in &grid.nodes {
            let v = f(*x);
            for (s, c) in components.iter_mut().enumerate() {
                c.push(v[s]);
            }
        }
        VectorFieldSamples { grid, components }
    }

    pub fn zeros(grid: Arc<QuadGrid>) -> Self {
        let n = grid.region.dim.n();
        let len = grid.len();
        VectorFieldSamples {
            grid,
            components: vec![vec![0.0; len]; n],
        }
    }

    /// `(L²)ⁿ` inner product; both fields must share the grid.
    pub fn dot(&self, other: &VectorFieldSamples) -> f64 {
        debug_assert!(Arc::ptr_eq(&self.grid, &other.grid) || self.grid.len() == other.grid.len());
        self.components
            .iter()
            .zip(&other.components)
            .map(|(a, b)| {
                a.iter()
                    .zip(b)
                    .zip(&self.grid.weights)
                    .map(|((x, y), w)| w * x * y)
                    .sum::<f64>()
            })
            .sum()
    }

    pub fn norm_sq(&self) -> f64 {
        self.dot(self)
    }

    pub fn at(&self, i: usize) -> Point {
        let mut p = [0.0; 2];
        for (s, c) in self.components.iter().enumerate() {
            p[s] = c[i];
        }
        p
    }
}

/// Masking to a region and zero-extension back out of it.
pub trait Restrict: Sized {
    /// Zeroes every sample outside `region`.
    fn restrict(&self, region: &Region) -> Self;
    /// Reinterprets samples supported on a subregion as a field on the
    /// larger `outer` region that vanishes off the grid.
    fn extend(&self, outer: &Region) -> Result<Self>;
}

fn check_nested(inner: &Region, outer: &Region) -> Result<()> {
    let inside = inner.rects.iter().all(|r| {
        outer
            .rects
            .iter()
            .map(|o| r.overlap(o, inner.dim))
            .sum::<f64>()
            >= r.measure(inner.dim) * (1.0 - 1e-12)
    });
    if inside {
        Ok(())
    } else {
        Err(Error::Config(
            "extension target does not contain the region".into(),
        ))
    }
}

fn with_region(grid: &QuadGrid, region: &Region) -> Arc<QuadGrid> {
    Arc::new(QuadGrid {
        region: region.clone(),
        nodes: grid.nodes.clone(),
        weights: grid.weights.clone(),
    })
}

impl Restrict for FieldSamples {
    fn restrict(&self, region: &Region) -> Self {
        let values = self
            .grid
            .nodes
            .iter()
            .zip(&self.values)
            .map(|(x, v)| if region.contains(*x) { *v } else { 0.0 })
            .collect();
        FieldSamples {
            grid: self.grid.clone(),
            values,
        }
    }

    fn extend(&self, outer: &Region) -> Result<Self> {
        check_nested(&self.grid.region, outer)?;
        Ok(FieldSamples {
            grid: with_region(&self.grid, outer),
            values: self.values.clone(),
        })
    }
}

impl Restrict for VectorFieldSamples {
    fn restrict(&self, region: &Region) -> Self {
        let mask: Vec<bool> = self
            .grid
            .nodes
            .iter()
            .map(|x| region.contains(*x))
            .collect();
        let components = self
            .components
            .iter()
            .map(|c| {
                c.iter()
                    .zip(&mask)
                    .map(|(v, m)| if *m { *v } else { 0.0 })
                    .collect()
            })
            .collect();
        VectorFieldSamples {
            grid: self.grid.clone(),
            components,
        }
    }

    fn extend(&self, outer: &Region) -> Result<Self> {
        check_nested(&self.grid.region, outer)?;
        Ok(VectorFieldSamples {
            grid: with_region(&self.grid, outer),
            components: self.components.clone(),
        })
    }
}

/// A scalar field given by coefficients on a basis.
#[derive(Debug, Clone)]
pub struct SpectralField {
    basis: Arc<Basis>,
    coeffs: Vec<f64>,
}

impl SpectralField {
    pub fn zeros(basis: Arc<Basis>) -> Self {
        let n = basis.len();
        SpectralField {
            basis,
            coeffs: vec![0.0; n],
        }
    }

    pub fn from_coeffs(basis: Arc<Basis>, coeffs: Vec<f64>) -> Result<Self> {
        if coeffs.len() != basis.len() {
            return Err(Error::Size(format!(
                "{} coefficients for a basis of {} modes",
                coeffs.len(),
                basis.len()
            )));
        }
        Ok(SpectralField { basis, coeffs })
    }

    /// Field with the given `(mode, coefficient)` entries and zeros elsewhere.
    pub fn from_modes(basis: Arc<Basis>, entries: &[(Mode, f64)]) -> Result<Self> {
        let mut f = SpectralField::zeros(basis);
        for &(m, c) in entries {
            let i = f
                .basis
                .index_of(m)
                .ok_or_else(|| Error::Size(format!("mode {m} is outside the basis")))?;
            f.coeffs[i] += c;
        }
        Ok(f)
    }

    pub fn basis(&self) -> &Arc<Basis> {
        &self.basis
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn coeff(&self, mode: Mode) -> Option<f64> {
        self.basis.index_of(mode).map(|i| self.coeffs[i])
    }

    /// Euclidean norm of the coefficients, equal to the `L²(Ω)` norm.
    pub fn norm(&self) -> f64 {
        self.coeffs.iter().map(|c| c * c).sum::<f64>().sqrt()
    }

    pub fn eval(&self, x: Point) -> f64 {
        self.basis
            .modes
            .iter()
            .zip(&self.coeffs)
            .map(|(m, c)| c * m.eval(x))
            .sum()
    }

    pub fn grad(&self, x: Point) -> Point {
        let mut g = [0.0; 2];
        for (m, c) in self.basis.modes.iter().zip(&self.coeffs) {
            if *c != 0.0 {
                let d = m.grad(x);
                g[0] += c * d[0];
                g[1] += c * d[1];
            }
        }
        g
    }

    pub fn sample(&self, grid: Arc<QuadGrid>) -> FieldSamples {
        FieldSamples::from_fn(grid, |x| self.eval(x))
    }

    /// `p_ω ∇y`: the gradient sampled on a grid over `region`, fine enough
    /// for products with any basis mode.
    pub fn restricted_gradient(&self, region: &Region) -> VectorFieldSamples {
        let grid = Arc::new(QuadGrid::new(region, 2 * self.basis.truncation));
        self.gradient_on(grid)
    }

    pub fn gradient_on(&self, grid: Arc<QuadGrid>) -> VectorFieldSamples {
        VectorFieldSamples::from_fn(grid, |x| self.grad(x))
    }

    pub fn scaled_add(&mut self, a: f64, other: &SpectralField) {
        for (x, y) in self.coeffs.iter_mut().zip(&other.coeffs) {
            *x += a * y;
        }
    }

    pub fn dot(&self, other: &SpectralField) -> f64 {
        self.coeffs
            .iter()
            .zip(&other.coeffs)
            .map(|(a, b)| a * b)
            .sum()
    }
}

/// `∫_region f ξ_mode dx` on a grid resolving both `f` (up to index
/// `f_freq`) and the mode.
pub fn inner_product<F: Fn(Point) -> f64>(f: F, f_freq: u32, mode: Mode, region: &Region) -> f64 {
    let grid = QuadGrid::new(region, f_freq + mode.max_index());
    grid.integrate(|x| f(x) * mode.eval(x))
}

/// Analytic gradients of one mode at each point.
pub fn grad_eval(mode: Mode, points: &[Point]) -> Vec<Point> {
    points.iter().map(|x| mode.grad(*x)).collect()
}

/// Coefficients of `∇*g = -div g` (weak, zero Dirichlet data):
/// `(∇*g, ξ) = Σ_s ∫ g_s ∂_sξ`.
pub fn grad_adjoint(g: &VectorFieldSamples, basis: Arc<Basis>) -> SpectralField {
    let grid = &g.grid;
    let coeffs = basis
        .modes
        .par_iter()
        .map(|m| {
            let mut acc = 0.0;
            for (i, (x, w)) in grid.nodes.iter().zip(&grid.weights).enumerate() {
                let d = m.grad(*x);
                let mut v = 0.0;
                for (s, c) in g.components.iter().enumerate() {
                    v += c[i] * d[s];
                }
                acc += w * v;
            }
            acc
        })
        .collect();
    SpectralField { basis, coeffs }
}

/// Projection of a closed-form field with highest index `f_freq` onto the
/// basis.
pub fn project<F: Fn(Point) -> f64 + Sync>(f: F, f_freq: u32, basis: Arc<Basis>) -> SpectralField {
    let whole = Region::whole(basis.dim);
    let grid = QuadGrid::new(&whole, f_freq + basis.truncation);
    let fx: Vec<f64> = grid.nodes.iter().map(|x| f(*x)).collect();
    let coeffs = basis
        .modes
        .par_iter()
        .map(|m| {
            grid.nodes
                .iter()
                .zip(&grid.weights)
                .zip(&fx)
                .map(|((x, w), v)| w * v * m.eval(*x))
                .sum()
        })
        .collect();
    SpectralField { basis, coeffs }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn groups_in_two_dimensions() {
        let b = build_basis(Dim::Two, 2).unwrap();
        let mult: Vec<usize> = b.groups().iter().map(|g| g.multiplicity()).collect();
        assert_eq!(mult, vec![1, 2, 1]);
        assert!((b.groups()[1].eigenvalue + 5.0 * PI * PI).abs() < 1e-12);
        let b = build_basis(Dim::Two, 8).unwrap();
        let g = b
            .groups()
            .iter()
            .find(|g| (g.eigenvalue + 65.0 * PI * PI).abs() < 1e-9)
            .unwrap();
        let mut members = g.members.clone();
        members.sort();
        assert_eq!(
            members,
            vec![
                Mode::Square(1, 8),
                Mode::Square(4, 7),
                Mode::Square(7, 4),
                Mode::Square(8, 1)
            ]
        );
        assert!(b
            .groups()
            .windows(2)
            .all(|w| w[0].eigenvalue > w[1].eigenvalue));
    }

    #[test]
    fn one_dimensional_groups_are_simple() {
        let b = build_basis(Dim::One, 3).unwrap();
        assert_eq!(b.groups().len(), 3);
        assert!(b.groups().iter().all(|g| g.multiplicity() == 1));
    }

    #[test]
    fn mode_cap() {
        assert!(matches!(build_basis(Dim::Two, 101), Err(Error::Size(_))));
        assert!(build_basis(Dim::Two, 100).is_ok());
        assert!(matches!(build_basis(Dim::One, 0), Err(Error::Size(_))));
    }

    #[test]
    fn region_validation() {
        assert!(Region::new(Dim::Two, vec![]).is_err());
        assert!(Region::new(Dim::Two, vec![Rect::new([0.0, 0.0], [1.2, 0.5])]).is_err());
        assert!(Region::new(Dim::Two, vec![Rect::new([0.3, 0.0], [0.3, 0.5])]).is_err());
        let overlapping = vec![
            Rect::new([0.0, 0.0], [0.5, 0.5]),
            Rect::new([0.4, 0.4], [0.8, 0.8]),
        ];
        assert!(Region::new(Dim::Two, overlapping).is_err());
        let touching = vec![
            Rect::new([0.0, 0.0], [0.5, 0.5]),
            Rect::new([0.5, 0.0], [1.0, 0.5]),
        ];
        let r = Region::new(Dim::Two, touching).unwrap();
        assert!((r.measure() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn quadrature_weights_sum_to_measure() {
        let r = Region::new(Dim::Two, vec![Rect::new([0.0, 0.0], [1.0, 1.0 / 6.0])]).unwrap();
        let g = QuadGrid::new(&r, 5);
        let s: f64 = g.weights().iter().sum();
        assert!((s - 1.0 / 6.0).abs() < 1e-12);
        assert!(g.weights().iter().all(|w| *w > 0.0));
    }

    #[test]
    fn inner_product_examples() {
        let whole = Region::whole(Dim::Two);
        let xi11 = Mode::Square(1, 1);
        let v = inner_product(|x| xi11.eval(x), 1, xi11, &whole);
        assert!((v - 1.0).abs() < 1e-10);
        let v = inner_product(|x| Mode::Square(1, 2).eval(x), 2, xi11, &whole);
        assert!(v.abs() < 1e-10);
        // ∫_0^{1/6} sin(3πx) sin(πx) dx = √3/(16π)
        let strip = Region::new(Dim::One, vec![Rect::interval(0.0, 1.0 / 6.0)]).unwrap();
        let grid = QuadGrid::new(&strip, 3);
        let v = grid.integrate(|x| (3.0 * PI * x[0]).sin() * (PI * x[0]).sin());
        assert!((v - 3f64.sqrt() / (16.0 * PI)).abs() < 1e-14);
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let m = Mode::Square(1, 3);
        let x = [0.25, 0.25];
        let g = grad_eval(m, &[x])[0];
        let h = 1e-6;
        let d1 = (m.eval([x[0] + h, x[1]]) - m.eval([x[0] - h, x[1]])) / (2.0 * h);
        let d2 = (m.eval([x[0], x[1] + h]) - m.eval([x[0], x[1] - h])) / (2.0 * h);
        assert!((g[0] - d1).abs() < 1e-7 && (g[1] - d2).abs() < 1e-7);
        assert!(grad_eval(Mode::Square(1, 1), &[[0.5, 0.5]])[0]
            .iter()
            .all(|v| v.abs() < 1e-14));
        assert!((Mode::Line(2).grad([0.0, 0.0])[0] - SQRT_2 * 2.0 * PI).abs() < 1e-14);
    }

    #[test]
    fn adjoint_gradient_of_counterexample_field() {
        let basis = Arc::new(build_basis(Dim::Two, 4).unwrap());
        let grid = Arc::new(QuadGrid::new(&Region::whole(Dim::Two), 8));
        let g = VectorFieldSamples::from_fn(grid.clone(), |x| {
            [
                (PI * x[0]).cos() * (3.0 * PI * x[1]).sin() / PI,
                3.0 * (PI * x[0]).sin() * (3.0 * PI * x[1]).cos() / PI,
            ]
        });
        let f = grad_adjoint(&g, basis.clone());
        for (m, c) in basis.modes().iter().zip(f.coeffs()) {
            let expect = if *m == Mode::Square(1, 3) { 5.0 } else { 0.0 };
            assert!((c - expect).abs() < 1e-9, "{m}: {c}");
        }
        let g = VectorFieldSamples::from_fn(grid.clone(), |x| Mode::Square(1, 1).grad(x));
        let f = grad_adjoint(&g, basis.clone());
        assert!((f.coeff(Mode::Square(1, 1)).unwrap() - 2.0 * PI * PI).abs() < 1e-9);
        let f = grad_adjoint(&VectorFieldSamples::zeros(grid), basis);
        assert_eq!(f.norm(), 0.0);
    }

    #[test]
    fn restriction_and_extension() {
        let omega = Region::new(Dim::Two, vec![Rect::new([0.0, 0.0], [1.0, 1.0 / 6.0])]).unwrap();
        let grid = Arc::new(QuadGrid::new(&omega, 2));
        let one = FieldSamples::from_fn(grid, |_| 1.0);
        assert!((one.norm_sq() - 1.0 / 6.0).abs() < 1e-10);
        let whole = Region::whole(Dim::Two);
        let back = one.extend(&whole).unwrap().restrict(&omega);
        assert_eq!(back.values, one.values);
        let full = FieldSamples::from_fn(Arc::new(QuadGrid::new(&whole, 2)), |x| x[0]);
        assert_eq!(full.restrict(&whole).values, full.values);
        assert!(Region::whole(Dim::Two).contains([1.0, 0.0]));
        assert!(one
            .extend(&Region::new(Dim::Two, vec![Rect::new([0.0, 0.5], [1.0, 1.0])]).unwrap())
            .is_err());
    }

    #[test]
    fn mode_serde_roundtrip() {
        let m: Mode = serde_json::from_str("[2,3]").unwrap();
        assert_eq!(m, Mode::Square(2, 3));
        assert_eq!(serde_json::to_string(&Mode::Line(4)).unwrap(), "[4]");
        assert!(serde_json::from_str::<Mode>("[0]").is_err());
    }
}
