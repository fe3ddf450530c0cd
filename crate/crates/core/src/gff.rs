//! Lattice Gaussian free fields with zero, free and prescribed boundary data,
//! harmonic extension and the strip decomposition into column averages and a
//! lateral part.

use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{bail, Result};
#[allow(unused_imports)]
use crate::float::*;
use crate::lattice::{DomainKind, LatticeDomain};
use crate::linalg::{conjugate_gradient, DenseMatrix, EnvelopeCholesky, SparseSym};

/// Boundary condition of a GFF sample.
#[derive(Debug, Clone, PartialEq)]
pub enum BoundaryCondition {
    /// Dirichlet zero on boundary-flagged vertices.
    Zero,
    /// Neumann on the whole graph, normalized to mean zero.
    Free,
    /// Zero-boundary GFF plus the harmonic extension of the given boundary
    /// values (a full-length vector; only boundary entries are read).
    Pinned(Vec<f64>),
}

/// How the values of a field came about.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FieldOrigin {
    Zero,
    Free,
    Pinned,
    Derived,
}

/// A real function on the vertices of a lattice domain.
#[derive(Debug, Clone)]
pub struct LatticeField {
    pub domain: Arc<LatticeDomain>,
    pub values: Vec<f64>,
    pub origin: FieldOrigin,
}

impl LatticeField {
    pub fn zeros(domain: Arc<LatticeDomain>) -> Self {
        let n = domain.len();
        Self {
            domain,
            values: vec![0.0; n],
            origin: FieldOrigin::Derived,
        }
    }

    pub fn from_fn(domain: Arc<LatticeDomain>, f: impl Fn(Complex64) -> f64) -> Self {
        let values = (0..domain.len()).map(|v| f(domain.point(v))).collect();
        Self {
            domain,
            values,
            origin: FieldOrigin::Derived,
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// `a * self + b * other`, vertexwise.
    pub fn combine(&self, a: f64, other: &LatticeField, b: f64) -> LatticeField {
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(x, y)| a * x + b * y)
            .collect();
        LatticeField {
            domain: self.domain.clone(),
            values,
            origin: FieldOrigin::Derived,
        }
    }

    pub fn add_constant(&mut self, c: f64) {
        self.values.iter_mut().for_each(|v| *v += c);
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.len() as f64
    }

    /// Bilinear interpolation with nearest-vertex fallback.
    pub fn at(&self, p: Complex64) -> f64 {
        self.domain.interpolate_or_nearest(&self.values, p).value
    }

    /// Average over a circle, by bilinear interpolation at equally spaced
    /// points. The circle must lie in the domain.
    pub fn circle_average(&self, center: Complex64, radius: f64) -> Result<f64> {
        circle_average(self, center, radius)
    }
}

const NONE: u32 = u32::MAX;

/// A Dirichlet problem on a set of unknown vertices of a lattice domain, with
/// every other vertex treated as fixed data. The factorization is reused for
/// sampling and for harmonic extension.
#[derive(Debug, Clone)]
pub struct DirichletSolver {
    domain: Arc<LatticeDomain>,
    unknowns: Vec<usize>,
    index: Vec<u32>,
    matrix: SparseSym,
    factor: EnvelopeCholesky,
}

impl DirichletSolver {
    /// Factors the Laplacian restricted to `unknowns` (sorted, distinct). At
    /// least one vertex must be fixed.
    pub fn new(domain: Arc<LatticeDomain>, unknowns: Vec<usize>) -> Result<Self> {
        let matrix = restricted_laplacian(&domain, &unknowns)?;
        let factor = EnvelopeCholesky::factor(&matrix)?;
        let mut index = vec![NONE; domain.len()];
        for (k, &v) in unknowns.iter().enumerate() {
            index[v] = k as u32;
        }
        Ok(Self {
            domain,
            unknowns,
            index,
            matrix,
            factor,
        })
    }

    pub fn domain(&self) -> &Arc<LatticeDomain> {
        &self.domain
    }

    pub fn unknowns(&self) -> &[usize] {
        &self.unknowns
    }

    fn rhs(&self, values: &[f64]) -> Vec<f64> {
        self.unknowns
            .iter()
            .map(|&v| {
                self.domain
                    .weighted_neighbors(v)
                    .filter(|&(u, _)| self.index[u] == NONE)
                    .map(|(u, w)| w * values[u])
                    .sum()
            })
            .collect()
    }

    /// Overwrites the unknown entries of `values` with the discrete harmonic
    /// extension of the fixed entries.
    pub fn extend(&self, values: &mut [f64]) {
        let x = self.factor.solve(&self.rhs(values));
        for (k, &v) in self.unknowns.iter().enumerate() {
            values[v] = x[k];
        }
    }

    /// Adds a centered Gaussian with covariance 2 pi A^{-1} to the unknown
    /// entries of `values`.
    pub fn add_noise<R: Rng + ?Sized>(&self, values: &mut [f64], rng: &mut R) {
        let scale = self.domain.normalization().sqrt();
        let mut z: Vec<f64> = (0..self.unknowns.len())
            .map(|_| rng.sample::<f64, _>(StandardNormal))
            .collect();
        self.factor.color(&mut z);
        for (k, &v) in self.unknowns.iter().enumerate() {
            values[v] += scale * z[k];
        }
    }

    /// The restricted Laplacian, for independent cross-checks.
    pub fn matrix(&self) -> &SparseSym {
        &self.matrix
    }
}

fn restricted_laplacian(domain: &LatticeDomain, unknowns: &[usize]) -> Result<SparseSym> {
    if unknowns.is_empty() {
        bail!(Geometry, "empty set of unknowns");
    }
    if unknowns.len() >= domain.len() {
        bail!(
            Geometry,
            "Dirichlet problem needs at least one fixed vertex"
        );
    }
    let mut index = vec![NONE; domain.len()];
    for (k, &v) in unknowns.iter().enumerate() {
        if v >= domain.len() || index[v] != NONE {
            bail!(
                InvalidArgument,
                "unknown vertex list must be distinct and in range"
            );
        }
        index[v] = k as u32;
    }
    let mut a = SparseSym::zeros(unknowns.len());
    for (k, &v) in unknowns.iter().enumerate() {
        for (u, w) in domain.weighted_neighbors(v) {
            a.diag[k] += w;
            let ku = index[u];
            if ku != NONE && (ku as usize) > k {
                a.add_off(k, ku as usize, -w);
            }
        }
    }
    Ok(a)
}

/// Sampler for a lattice GFF with a fixed boundary condition.
#[derive(Debug, Clone)]
pub struct GffSampler {
    solver: DirichletSolver,
    condition: BoundaryCondition,
    mean: Option<Vec<f64>>,
}

impl GffSampler {
    pub fn new(domain: Arc<LatticeDomain>, condition: BoundaryCondition) -> Result<Self> {
        let unknowns = match condition {
            BoundaryCondition::Free => (1..domain.len()).collect(),
            _ => domain.interior_vertices(),
        };
        if unknowns.is_empty() {
            bail!(InvalidResolution, "grid has no interior vertices");
        }
        let solver = DirichletSolver::new(domain.clone(), unknowns)?;
        let mean = match &condition {
            BoundaryCondition::Pinned(data) => {
                if data.len() != domain.len() {
                    bail!(
                        InvalidArgument,
                        "pinned data has length {} for {} vertices",
                        data.len(),
                        domain.len()
                    );
                }
                let mut m: Vec<f64> = (0..domain.len())
                    .map(|v| if domain.is_boundary(v) { data[v] } else { 0.0 })
                    .collect();
                solver.extend(&mut m);
                Some(m)
            }
            _ => None,
        };
        Ok(Self {
            solver,
            condition,
            mean,
        })
    }

    pub fn domain(&self) -> &Arc<LatticeDomain> {
        self.solver.domain()
    }

    pub fn condition(&self) -> &BoundaryCondition {
        &self.condition
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> LatticeField {
        let domain = self.solver.domain().clone();
        let mut values = self.mean.clone().unwrap_or_else(|| vec![0.0; domain.len()]);
        self.solver.add_noise(&mut values, rng);
        let origin = match self.condition {
            BoundaryCondition::Zero => FieldOrigin::Zero,
            BoundaryCondition::Free => {
                let m = values.iter().sum::<f64>() / values.len() as f64;
                values.iter_mut().for_each(|v| *v -= m);
                FieldOrigin::Free
            }
            BoundaryCondition::Pinned(_) => FieldOrigin::Pinned,
        };
        LatticeField {
            domain,
            values,
            origin,
        }
    }
}

/// Dense covariance matrix of the lattice GFF, computed independently of the
/// sampler: `2 pi L_I^{-1}` (zero boundary, padded with zero rows for boundary
/// vertices) and `2 pi L^+` (free boundary, via (L + J/N)^{-1} - J/N).
pub fn green_matrix(domain: &LatticeDomain, free: bool) -> Result<DenseMatrix> {
    let n = domain.len();
    if n > 6000 {
        bail!(
            InvalidResolution,
            "dense Green's matrix limited to 6000 vertices, got {n}"
        );
    }
    let lap = domain.laplacian().to_dense();
    let norm = domain.normalization();
    if free {
        let mut a = lap.clone();
        let j = 1.0 / n as f64;
        for r in 0..n {
            for c in 0..n {
                a[(r, c)] += j;
            }
        }
        let mut g = a.cholesky()?.inverse();
        for r in 0..n {
            for c in 0..n {
                g[(r, c)] = norm * (g[(r, c)] - j);
            }
        }
        Ok(g)
    } else {
        let interior = domain.interior_vertices();
        let m = interior.len();
        let mut a = DenseMatrix::zeros(m);
        for (r, &u) in interior.iter().enumerate() {
            for (c, &v) in interior.iter().enumerate() {
                a[(r, c)] = lap[(u, v)];
            }
        }
        let inv = a.cholesky()?.inverse();
        let mut g = DenseMatrix::zeros(n);
        for (r, &u) in interior.iter().enumerate() {
            for (c, &v) in interior.iter().enumerate() {
                g[(u, v)] = norm * inv[(r, c)];
            }
        }
        Ok(g)
    }
}

/// Solves L_I x = e_v by conjugate gradient and returns 2 pi x, a column of
/// the zero-boundary Green's matrix, for cross-checking the factorization.
pub fn green_column_cg(domain: &LatticeDomain, v: usize) -> Result<Vec<f64>> {
    let interior = domain.interior_vertices();
    let a = restricted_laplacian(domain, &interior)?;
    let Some(k) = interior.iter().position(|&u| u == v) else {
        bail!(InvalidArgument, "vertex {v} is not interior");
    };
    let mut b = vec![0.0; interior.len()];
    b[k] = 1.0;
    let mut x = vec![0.0; interior.len()];
    conjugate_gradient(&a, &b, &mut x, 1e-13, 20 * interior.len() + 100)?;
    let mut out = vec![0.0; domain.len()];
    for (k, &u) in interior.iter().enumerate() {
        out[u] = domain.normalization() * x[k];
    }
    Ok(out)
}

/// Checks that `region` is a nonempty, 4-connected set of vertices with at
/// least one vertex outside it, returning it sorted.
pub fn validate_region(domain: &LatticeDomain, region: &[usize]) -> Result<Vec<usize>> {
    if region.is_empty() {
        bail!(Geometry, "empty region");
    }
    let mut r = region.to_vec();
    r.sort_unstable();
    r.dedup();
    if r.len() >= domain.len() {
        bail!(Geometry, "region has no boundary");
    }
    let mut mark = vec![0u8; domain.len()];
    for &v in &r {
        if v >= domain.len() {
            bail!(InvalidArgument, "vertex {v} out of range");
        }
        mark[v] = 1;
    }
    let mut stack = vec![r[0]];
    mark[r[0]] = 2;
    let mut seen = 1;
    while let Some(v) = stack.pop() {
        for u in domain.neighbors(v) {
            if mark[u] == 1 {
                mark[u] = 2;
                seen += 1;
                stack.push(u);
            }
        }
    }
    if seen != r.len() {
        bail!(Geometry, "region is disconnected");
    }
    Ok(r)
}

/// Harmonic extension into `region` of the field's values outside it.
pub fn harmonic_extension(field: &LatticeField, region: &[usize]) -> Result<LatticeField> {
    let r = validate_region(&field.domain, region)?;
    let solver = DirichletSolver::new(field.domain.clone(), r)?;
    let mut values = field.values.clone();
    solver.extend(&mut values);
    Ok(LatticeField {
        domain: field.domain.clone(),
        values,
        origin: FieldOrigin::Derived,
    })
}

/// Column averages (trapezoidal in y) of a strip field, and the lateral part
/// whose column averages vanish.
pub fn strip_decompose(field: &LatticeField) -> Result<(Vec<f64>, LatticeField)> {
    let d = &field.domain;
    if !matches!(d.kind(), DomainKind::Strip { .. }) {
        bail!(InvalidArgument, "strip decomposition needs a strip domain");
    }
    let avg = column_averages(d, &field.values);
    let mut lateral = field.clone();
    lateral.origin = FieldOrigin::Derived;
    for v in 0..d.len() {
        lateral.values[v] -= avg[d.grid_coords(v).0];
    }
    Ok((avg, lateral))
}

/// Trapezoidal column averages over y in [0, 2 pi] of a strip-grid function.
pub fn column_averages(d: &LatticeDomain, values: &[f64]) -> Vec<f64> {
    let (nx, ny) = d.grid_dims();
    let mut avg = vec![0.0; nx];
    let norm = (ny - 1) as f64;
    for v in 0..d.len() {
        let (i, j) = d.grid_coords(v);
        let w = if j == 0 || j == ny - 1 { 0.5 } else { 1.0 };
        avg[i] += w * values[v] / norm;
    }
    avg
}

/// Average of a lattice field over a circle.
pub fn circle_average(field: &LatticeField, center: Complex64, radius: f64) -> Result<f64> {
    let d = &field.domain;
    if !(radius > 0.0) {
        bail!(Geometry, "circle radius {radius} must be positive");
    }
    let fits = match d.kind() {
        DomainKind::Disk => center.norm() + radius <= 1.0 + 1e-12,
        DomainKind::Strip { x_max } => {
            center.re.abs() + radius <= x_max
                && center.im - radius >= 0.0
                && center.im + radius <= 2.0 * PI
        }
    };
    if !fits {
        bail!(
            Geometry,
            "circle centered {center} radius {radius} leaves the domain"
        );
    }
    let m = ((4.0 * PI * radius / d.h()).ceil() as usize).max(32);
    let mut s = 0.0;
    for k in 0..m {
        let p = center + Complex64::from_polar(radius, 2.0 * PI * k as f64 / m as f64);
        s += d.interpolate_or_nearest(&field.values, p).value;
    }
    Ok(s / m as f64)
}
