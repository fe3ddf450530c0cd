//! Mollified critical boundary measures on the unit circle, on the strip
//! boundary and along lattice loops.

use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use num_complex::Complex64;
use rand::Rng;

use crate::disk::{DiskField, FieldKind};
use crate::error::{bail, Result};
#[allow(unused_imports)]
use crate::float::*;
use crate::gff::DirichletSolver;
use crate::lattice::{DomainKind, LatticeDomain};
use crate::moebius::Moebius;

/// Geometry of one cell of a boundary measure.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Cell {
    /// Arc of the unit circle between two angles in [0, 2 pi].
    Arc { theta_start: f64, theta_end: f64 },
    /// Dual edge crossing a lattice loop, between an inside and an outside
    /// vertex.
    Edge { inside: usize, outside: usize },
}

/// A discrete boundary measure: nonnegative masses on ordered cells.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryMeasure {
    pub cells: Vec<Cell>,
    pub masses: Vec<f64>,
    pub epsilon: f64,
    pub total: f64,
}

impl BoundaryMeasure {
    fn new(cells: Vec<Cell>, masses: Vec<f64>, epsilon: f64) -> Self {
        let total = masses.iter().sum();
        Self {
            cells,
            masses,
            epsilon,
            total,
        }
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    /// Merges each run of `k` consecutive cells. Total mass is conserved.
    pub fn coarsen(&self, k: usize) -> Result<BoundaryMeasure> {
        if k == 0 || !self.len().is_multiple_of(k) {
            bail!(
                InvalidArgument,
                "cannot merge {} cells in groups of {k}",
                self.len()
            );
        }
        let mut cells = Vec::new();
        let mut masses = Vec::new();
        for (cs, ms) in self.cells.chunks(k).zip(self.masses.chunks(k)) {
            let cell = match (cs[0], cs[k - 1]) {
                (Cell::Arc { theta_start, .. }, Cell::Arc { theta_end, .. }) => Cell::Arc {
                    theta_start,
                    theta_end,
                },
                _ => bail!(Unsupported, "only arc measures can be coarsened"),
            };
            cells.push(cell);
            masses.push(ms.iter().sum());
        }
        Ok(BoundaryMeasure {
            cells,
            masses,
            epsilon: self.epsilon,
            total: self.total,
        })
    }

    /// Mass of the counterclockwise arc from `a` to `b` (radians), with mass
    /// spread uniformly inside each cell.
    pub fn arc_mass(&self, a: f64, b: f64) -> f64 {
        let mut len = b - a;
        while len < 0.0 {
            len += 2.0 * PI;
        }
        let a = crate::moebius::wrap_angle(a);
        // Split [a, a+len] into pieces inside [0, 2 pi].
        let mut pieces = vec![(a, (a + len).min(2.0 * PI))];
        if a + len > 2.0 * PI {
            pieces.push((0.0, a + len - 2.0 * PI));
        }
        let mut m = 0.0;
        for (c, &mass) in self.cells.iter().zip(&self.masses) {
            if let Cell::Arc {
                theta_start,
                theta_end,
            } = *c
            {
                let w = theta_end - theta_start;
                for &(lo, hi) in &pieces {
                    let ov = hi.min(theta_end) - lo.max(theta_start);
                    if ov > 0.0 && w > 0.0 {
                        m += mass * ov / w;
                    }
                }
            }
        }
        m
    }
}

/// Default number of arcs for a disk grid: about one per lattice spacing,
/// rounded up to a multiple of 64 so quarter turns permute cells and every
/// coarse partition used by diagnostics nests in it.
pub fn default_arc_count(domain: &LatticeDomain) -> usize {
    64 * (2.0 * PI / (64.0 * domain.h())).ceil() as usize
}

fn mollifier_prefactor(eps: f64) -> f64 {
    (1.0 / eps).ln().sqrt() * eps
}

/// Evaluator for the critical boundary measure on a fixed disk grid, holding
/// the harmonic-extension factorization.
#[derive(Debug, Clone)]
pub struct BoundaryMeasurer {
    solver: DirichletSolver,
    epsilon: f64,
    arcs: usize,
}

impl BoundaryMeasurer {
    pub fn new(domain: Arc<LatticeDomain>, epsilon: f64) -> Result<Self> {
        let arcs = default_arc_count(&domain);
        Self::with_arcs(domain, epsilon, arcs)
    }

    pub fn with_arcs(domain: Arc<LatticeDomain>, epsilon: f64, arcs: usize) -> Result<Self> {
        if domain.kind() != DomainKind::Disk {
            bail!(
                InvalidArgument,
                "boundary measure of the unit circle needs a disk grid"
            );
        }
        check_epsilon(epsilon, domain.h())?;
        if arcs == 0 || !arcs.is_multiple_of(4) {
            bail!(
                InvalidArgument,
                "arc count {arcs} must be a positive multiple of 4"
            );
        }
        let solver = DirichletSolver::new(domain.clone(), domain.interior_vertices())?;
        Ok(Self {
            solver,
            epsilon,
            arcs,
        })
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn arcs(&self) -> usize {
        self.arcs
    }

    pub fn domain(&self) -> &Arc<LatticeDomain> {
        self.solver.domain()
    }

    /// Harmonic extension of the boundary entries of `values`.
    pub fn extension(&self, values: &[f64]) -> Vec<f64> {
        let mut h = values.to_vec();
        self.solver.extend(&mut h);
        h
    }

    fn cell(&self, k: usize) -> (f64, f64, Complex64) {
        let w = 2.0 * PI / self.arcs as f64;
        let (a, b) = (k as f64 * w, (k + 1) as f64 * w);
        (a, b, Complex64::from_polar(1.0, (k as f64 + 0.5) * w))
    }

    /// The measure of a raw critical field given by its vertex values.
    pub fn measure_values(&self, values: &[f64]) -> BoundaryMeasure {
        let h = self.extension(values);
        let d = self.domain();
        let pre = mollifier_prefactor(self.epsilon);
        let w = 2.0 * PI / self.arcs as f64;
        let mut cells = Vec::with_capacity(self.arcs);
        let mut masses = Vec::with_capacity(self.arcs);
        for k in 0..self.arcs {
            let (a, b, z) = self.cell(k);
            let v = d.interpolate_or_nearest(&h, z * (1.0 - self.epsilon)).value;
            cells.push(Cell::Arc {
                theta_start: a,
                theta_end: b,
            });
            masses.push(pre * v.exp() * w);
        }
        BoundaryMeasure::new(cells, masses, self.epsilon)
    }

    /// The boundary measure of a critical or supercritical field; for the
    /// latter it is the measure of the critical constituent.
    pub fn measure(&self, field: &DiskField) -> Result<BoundaryMeasure> {
        let crit = critical_values(field)?;
        if crit.len() != self.domain().len() {
            bail!(InvalidArgument, "field and measurer grids differ");
        }
        Ok(self.measure_values(crit))
    }
}

fn check_epsilon(eps: f64, h: f64) -> Result<()> {
    if !(eps > h && eps < 0.25) {
        bail!(
            InvalidArgument,
            "epsilon = {eps} must lie in (grid spacing {h}, 1/4)"
        );
    }
    Ok(())
}

fn critical_values(field: &DiskField) -> Result<&[f64]> {
    match field.kind {
        FieldKind::Critical | FieldKind::Supercritical | FieldKind::Dual => {
            match field.critical_part() {
                Some(c) => Ok(&c.values),
                None => bail!(InvalidArgument, "field has no stored critical constituent"),
            }
        }
        FieldKind::Liouville => bail!(
            InvalidArgument,
            "boundary measure is defined for critical or supercritical fields"
        ),
    }
}

/// One-shot evaluation of the critical boundary measure.
pub fn critical_boundary_measure(field: &DiskField, epsilon: f64) -> Result<BoundaryMeasure> {
    BoundaryMeasurer::new(field.domain().clone(), epsilon)?.measure(field)
}

/// Total critical measure of the two boundary lines of the truncated strip,
/// mollified at distance `epsilon` into the strip. `solver` must have the
/// strip interior as unknowns.
pub fn strip_boundary_length(
    solver: &DirichletSolver,
    values: &[f64],
    epsilon: f64,
) -> Result<f64> {
    let d = solver.domain();
    if !matches!(d.kind(), DomainKind::Strip { .. }) {
        bail!(InvalidArgument, "strip boundary length needs a strip grid");
    }
    if !(epsilon > 0.0 && epsilon < 0.25) {
        bail!(InvalidArgument, "epsilon = {epsilon} must lie in (0, 1/4)");
    }
    let mut h = values.to_vec();
    solver.extend(&mut h);
    let (nx, _) = d.grid_dims();
    let (hx, _) = d.spacing();
    let pre = mollifier_prefactor(epsilon);
    let mut total = 0.0;
    for i in 0..nx {
        let x = d.position(d.vertex_at(i, 0).expect("strip grid is rectangular"))[0];
        let w = if i == 0 || i == nx - 1 { hx / 2.0 } else { hx };
        for y in [epsilon, 2.0 * PI - epsilon] {
            let v = d.interpolate_or_nearest(&h, Complex64::new(x, y)).value;
            total += pre * v.exp() * w;
        }
    }
    Ok(total)
}

/// Both sides of the coordinate-change identity on a common arc partition.
#[derive(Debug, Clone, PartialEq)]
pub struct CoordinateChangeReport {
    /// Per arc A_k: the measure of m(A_k) under the original field.
    pub direct: Vec<f64>,
    /// Per arc A_k: the measure of A_k under the transformed field.
    pub transformed: Vec<f64>,
    pub max_rel_err: f64,
}

/// Compares nu_Phi(m(A_k)) with nu_{Phi o m + Q log|m'|}(A_k) on `arcs`
/// equal arcs. The transformed side evaluates the harmonic extension of the
/// original data at m((1 - eps) z), which is the harmonic extension of the
/// transformed data; the direct side evaluates it at (1 - eps) m(z). Both use
/// the same fine cells so that rotations are a pure relabeling.
pub fn measure_coordinate_change_check(
    measurer: &BoundaryMeasurer,
    field: &DiskField,
    m: &Moebius,
    arcs: usize,
) -> Result<CoordinateChangeReport> {
    if !(8..=64).contains(&arcs) || !measurer.arcs().is_multiple_of(arcs) {
        bail!(
            InvalidArgument,
            "arc count {arcs} must lie in 8..=64 and divide {}",
            measurer.arcs()
        );
    }
    let crit = critical_values(field)?;
    if m.is_identity() {
        let direct = measurer
            .measure_values(crit)
            .coarsen(measurer.arcs() / arcs)?
            .masses;
        return Ok(CoordinateChangeReport {
            transformed: direct.clone(),
            direct,
            max_rel_err: 0.0,
        });
    }
    let h = measurer.extension(crit);
    let d = measurer.domain();
    let eps = measurer.epsilon();
    let pre = mollifier_prefactor(eps);
    let per = measurer.arcs() / arcs;
    let mut direct = vec![0.0; arcs];
    let mut transformed = vec![0.0; arcs];
    let w = 2.0 * PI / measurer.arcs() as f64;
    for k in 0..measurer.arcs() {
        let (a, b, z) = measurer.cell(k);
        let (ma, mb) = (
            m.apply(Complex64::from_polar(1.0, a)),
            m.apply(Complex64::from_polar(1.0, b)),
        );
        let mut image_len = mb.arg() - ma.arg();
        while image_len <= 0.0 {
            image_len += 2.0 * PI;
        }
        let mz = m.apply(z);
        let p1 = mz / mz.norm() * (1.0 - eps);
        direct[k / per] += pre * d.interpolate_or_nearest(&h, p1).value.exp() * image_len;
        let q = z * (1.0 - eps);
        let p2 = m.apply(q);
        let lj = 2.0 * m.derivative(q).norm().ln();
        transformed[k / per] += pre * (d.interpolate_or_nearest(&h, p2).value + lj).exp() * w;
    }
    let max_rel_err = direct
        .iter()
        .zip(&transformed)
        .map(|(a, b)| {
            if a == b {
                0.0
            } else {
                (a - b).abs() / a.abs().max(b.abs())
            }
        })
        .fold(0.0, f64::max);
    Ok(CoordinateChangeReport {
        direct,
        transformed,
        max_rel_err,
    })
}

/// Point drawn from a measure: a cell chosen with probability proportional
/// to its mass and a uniform position within it.
pub fn sample_boundary_point<R: Rng + ?Sized>(
    measure: &BoundaryMeasure,
    domain: Option<&LatticeDomain>,
    rng: &mut R,
) -> Result<(usize, Complex64)> {
    if !(measure.total > 0.0) {
        bail!(
            InvalidArgument,
            "cannot sample from a measure with zero total mass"
        );
    }
    let target = rng.random::<f64>() * measure.total;
    let mut acc = 0.0;
    let mut k = measure.len() - 1;
    for (i, &m) in measure.masses.iter().enumerate() {
        acc += m;
        if target < acc && m > 0.0 {
            k = i;
            break;
        }
    }
    while measure.masses[k] <= 0.0 && k > 0 {
        k -= 1;
    }
    let u: f64 = rng.random();
    let p = match measure.cells[k] {
        Cell::Arc {
            theta_start,
            theta_end,
        } => Complex64::from_polar(1.0, theta_start + u * (theta_end - theta_start)),
        Cell::Edge { inside, outside } => {
            let Some(d) = domain else {
                bail!(InvalidArgument, "edge cells need the lattice domain");
            };
            // Uniform on the dual edge through the midpoint.
            let (a, b) = (d.point(inside), d.point(outside));
            let mid = (a + b) / 2.0;
            let t = (b - a) * Complex64::i();
            mid + t * (u - 0.5)
        }
    };
    Ok((k, p))
}

/// Which side of a loop the mollified field is evaluated from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LoopSide {
    Inside,
    Outside,
}

/// Dual-edge cells of the loop bounding `region`: each lattice edge from a
/// region vertex to a vertex outside it, ordered by angle about the region's
/// centroid.
pub fn loop_cells(domain: &LatticeDomain, region: &[bool]) -> Result<Vec<Cell>> {
    if region.len() != domain.len() {
        bail!(InvalidArgument, "region mask has wrong length");
    }
    let mut cells = Vec::new();
    let mut c = Complex64::new(0.0, 0.0);
    let mut count = 0usize;
    for v in (0..domain.len()).filter(|&v| region[v]) {
        if domain.is_boundary(v) {
            bail!(
                Geometry,
                "loop region touches the domain boundary at vertex {v}"
            );
        }
        c += domain.point(v);
        count += 1;
        for u in domain.neighbors(v) {
            if !region[u] {
                cells.push(Cell::Edge {
                    inside: v,
                    outside: u,
                });
            }
        }
    }
    if count == 0 || cells.is_empty() {
        bail!(Geometry, "empty loop region");
    }
    let c = c / count as f64;
    let key = |cell: &Cell| match *cell {
        Cell::Edge { inside, outside } => {
            ((domain.point(inside) + domain.point(outside)) / 2.0 - c).arg()
        }
        Cell::Arc { theta_start, .. } => theta_start,
    };
    cells.sort_by(|a, b| key(a).total_cmp(&key(b)));
    Ok(cells)
}

/// Harmonic extension of `values` from the rim of `side` (side vertices with
/// a lattice neighbor outside `side`, or on the domain boundary) into the
/// rest of `side`. Constant rim data is extended exactly without a solve.
pub fn side_extension(
    domain: &Arc<LatticeDomain>,
    values: &[f64],
    side: &[bool],
) -> Result<Vec<f64>> {
    let rim = |v: usize| domain.is_boundary(v) || domain.neighbors(v).any(|u| !side[u]);
    let unknowns: Vec<usize> = (0..domain.len()).filter(|&v| side[v] && !rim(v)).collect();
    let mut out = values.to_vec();
    let rim_values: Vec<f64> = (0..domain.len())
        .filter(|&v| side[v] && rim(v))
        .map(|v| values[v])
        .collect();
    if unknowns.is_empty() {
        return Ok(out);
    }
    if let Some(&first) = rim_values.first() {
        if rim_values.iter().all(|&x| x == first) {
            for v in unknowns {
                out[v] = first;
            }
            return Ok(out);
        }
    }
    let solver = DirichletSolver::new(domain.clone(), unknowns)?;
    solver.extend(&mut out);
    Ok(out)
}

/// Loop masses for one field and one loop region, sharing the inside
/// extension of the critical constituent across sides.
#[derive(Debug, Clone)]
pub struct LoopEvaluator<'a> {
    field: &'a DiskField,
    region: &'a [bool],
    cells: Vec<Cell>,
    phi2: Vec<f64>,
    k: f64,
    epsilon: f64,
}

impl<'a> LoopEvaluator<'a> {
    pub fn new(field: &'a DiskField, region: &'a [bool], epsilon: f64) -> Result<Self> {
        let d = field.domain();
        check_epsilon(epsilon, d.h())?;
        let (Some(p), Some(c)) = (field.params, field.constituents.as_ref()) else {
            bail!(
                InvalidArgument,
                "loop measure needs a field with stored constituents"
            );
        };
        let k = p.dual_weight().unwrap_or(0.0) / p.critical_weight();
        let cells = loop_cells(d, region)?;
        let phi2 = side_extension(d, &c.critical.values, region)?;
        Ok(Self {
            field,
            region,
            cells,
            phi2,
            k,
            epsilon,
        })
    }

    pub fn cells(&self) -> &[Cell] {
        &self.cells
    }

    fn eval(&self, vals: &[f64], mask: &[bool], p: Complex64, fallback: usize) -> f64 {
        self.field
            .domain()
            .interpolate(vals, p, Some(mask))
            .map_or(vals[fallback], |i| i.value)
    }

    fn geometry(&self, cell: &Cell) -> (usize, usize, Complex64, Complex64) {
        let d = self.field.domain();
        let Cell::Edge { inside, outside } = *cell else {
            unreachable!("loop cells are edges")
        };
        let (a, b) = (d.point(inside), d.point(outside));
        (inside, outside, (a + b) / 2.0, (a - b) / d.h())
    }

    /// The measure of the critical constituent alone.
    pub fn critical(&self) -> BoundaryMeasure {
        let pre = mollifier_prefactor(self.epsilon);
        let h = self.field.domain().h();
        let masses = self
            .cells
            .iter()
            .map(|cell| {
                let (inside, _, mid, n_in) = self.geometry(cell);
                pre * self
                    .eval(&self.phi2, self.region, mid + n_in * self.epsilon, inside)
                    .exp()
                    * h
            })
            .collect();
        BoundaryMeasure::new(self.cells.clone(), masses, self.epsilon)
    }

    /// The measure of the full field from `side`, with Psi extended in
    /// `side_region`.
    pub fn side(&self, side_region: &[bool], side: LoopSide) -> Result<BoundaryMeasure> {
        let d = self.field.domain();
        if side_region.len() != d.len() {
            bail!(InvalidArgument, "side region mask has wrong length");
        }
        for cell in &self.cells {
            let (inside, outside, _, _) = self.geometry(cell);
            let ok = match side {
                LoopSide::Inside => side_region[inside] && !side_region[outside],
                LoopSide::Outside => side_region[outside] && !side_region[inside],
            };
            if !ok {
                bail!(
                    Geometry,
                    "side region does not border the loop along edge {inside}-{outside}"
                );
            }
        }
        let c = self.field.constituents.as_ref().expect("checked in new");
        let psi = side_extension(d, &c.zero_boundary.values, side_region)?;
        let pre = mollifier_prefactor(self.epsilon);
        let h = d.h();
        let masses = self
            .cells
            .iter()
            .map(|cell| {
                let (inside, outside, mid, n_in) = self.geometry(cell);
                let f2 = self.eval(&self.phi2, self.region, mid + n_in * self.epsilon, inside);
                let ps = match side {
                    LoopSide::Inside => {
                        self.eval(&psi, side_region, mid + n_in * self.epsilon, inside)
                    }
                    LoopSide::Outside => {
                        self.eval(&psi, side_region, mid - n_in * self.epsilon, outside)
                    }
                };
                pre * (f2 + self.k * ps).exp() * h
            })
            .collect();
        Ok(BoundaryMeasure::new(
            self.cells.clone(),
            masses,
            self.epsilon,
        ))
    }
}

/// The boundary measure of the loop around `region`, seen from `side`.
///
/// The critical constituent is always mollified from inside the region; the
/// zero-boundary constituent Psi is mollified in `side_region` (the region
/// itself for the inside, the surrounding gasket for the outside). Cell mass
/// is sqrt(log 1/eps) eps exp(Phi_2^eps + k Psi^eps) h with
/// k = sqrt(4-Q^2)/Q.
pub fn loop_boundary_measure(
    field: &DiskField,
    region: &[bool],
    side_region: &[bool],
    side: LoopSide,
    epsilon: f64,
) -> Result<BoundaryMeasure> {
    LoopEvaluator::new(field, region, epsilon)?.side(side_region, side)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gff::LatticeField;
    use crate::rng::Streams;
    use crate::stats::mean;
    use rand_distr::{Distribution, StandardNormal};

    fn domain(n: usize) -> Arc<LatticeDomain> {
        Arc::new(LatticeDomain::disk_grid(n).unwrap())
    }

    #[test]
    fn constant_fields() {
        let d = domain(33);
        let eps = 0.125;
        let m = BoundaryMeasurer::new(d.clone(), eps).unwrap();
        let zero = DiskField::critical(LatticeField::zeros(d.clone()));
        let mu = m.measure(&zero).unwrap();
        let want = (8f64).ln().sqrt() * eps * 2.0 * PI;
        assert!((mu.total - want).abs() < 1e-12 * want);
        let mut c = zero.clone();
        c.field.add_constant(0.7);
        let mc = m.measure(&c).unwrap();
        assert!((mc.total / mu.total - 0.7f64.exp()).abs() < 1e-12);
        assert!(BoundaryMeasurer::new(d.clone(), 0.05).is_err());
        assert!(BoundaryMeasurer::new(d, 0.3).is_err());
    }

    #[test]
    fn rotation_equivariance_cellwise() {
        let d = domain(33);
        let mut rng = Streams::new(4).stream("x");
        let vals: Vec<f64> = (0..d.len())
            .map(|_| StandardNormal.sample(&mut rng))
            .collect();
        let rot: Vec<f64> = (0..d.len())
            .map(|v| vals[d.rotate_quarter(v).unwrap()])
            .collect();
        let m = BoundaryMeasurer::new(d, 0.125).unwrap();
        let a = m.measure_values(&vals);
        let b = m.measure_values(&rot);
        let q = m.arcs() / 4;
        for k in 0..m.arcs() {
            let j = (k + q) % m.arcs();
            assert!((b.masses[k] - a.masses[j]).abs() < 1e-9 * a.masses[j]);
        }
    }

    #[test]
    fn coarsen_and_arc_mass_conserve() {
        let d = domain(33);
        let m = BoundaryMeasurer::new(d.clone(), 0.125).unwrap();
        let f = LatticeField::from_fn(d, |z| z.re * 2.0 - z.im);
        let mu = m.measure_values(&f.values);
        let c = mu.coarsen(4).unwrap();
        assert!((c.masses.iter().sum::<f64>() - mu.total).abs() < 1e-12 * mu.total);
        assert!((mu.arc_mass(0.0, 2.0 * PI - 1e-15) - mu.total).abs() < 1e-9 * mu.total);
        let split = mu.arc_mass(1.0, 2.5) + mu.arc_mass(2.5, 1.0);
        assert!((split - mu.total).abs() < 1e-12 * mu.total);
    }

    #[test]
    fn coordinate_change_identity_and_rotation() {
        let d = domain(33);
        let mut rng = Streams::new(8).stream("x");
        let vals: Vec<f64> = (0..d.len())
            .map(|_| StandardNormal.sample(&mut rng))
            .collect();
        let f = DiskField::critical(LatticeField {
            domain: d.clone(),
            values: vals,
            origin: crate::gff::FieldOrigin::Derived,
        });
        let m = BoundaryMeasurer::new(d, 0.125).unwrap();
        let r = measure_coordinate_change_check(&m, &f, &Moebius::identity(), 16).unwrap();
        assert_eq!(r.max_rel_err, 0.0);
        let r = measure_coordinate_change_check(&m, &f, &Moebius::rotation(0.377), 16).unwrap();
        assert!(r.max_rel_err < 1e-6, "{}", r.max_rel_err);
        let g = Moebius::new(0.2, Complex64::new(0.3, 0.1)).unwrap();
        let r = measure_coordinate_change_check(&m, &f, &g, 16).unwrap();
        assert!(r.max_rel_err.is_finite());
    }

    #[test]
    fn point_sampling() {
        let mu = BoundaryMeasure::new(
            vec![
                Cell::Arc {
                    theta_start: 0.0,
                    theta_end: 1.0,
                },
                Cell::Arc {
                    theta_start: 1.0,
                    theta_end: 2.0,
                },
                Cell::Arc {
                    theta_start: 2.0,
                    theta_end: 2.0 * PI,
                },
            ],
            vec![1.0, 2.0, 3.0],
            0.1,
        );
        let mut rng = Streams::new(1).stream("p");
        let n = 60_000;
        let mut counts = [0usize; 3];
        for _ in 0..n {
            let (k, p) = sample_boundary_point(&mu, None, &mut rng).unwrap();
            counts[k] += 1;
            assert!((p.norm() - 1.0).abs() < 1e-12);
        }
        for (k, &c) in counts.iter().enumerate() {
            let p = (k + 1) as f64 / 6.0;
            let se = (p * (1.0 - p) / n as f64).sqrt();
            assert!(
                (c as f64 / n as f64 - p).abs() < 3.0 * se.max(1e-9) + 1e-3,
                "{k}"
            );
        }
        let single = BoundaryMeasure::new(
            vec![Cell::Arc {
                theta_start: 0.5,
                theta_end: 0.6,
            }],
            vec![2.0],
            0.1,
        );
        let (k, p) = sample_boundary_point(&single, None, &mut rng).unwrap();
        assert_eq!(k, 0);
        assert!(p.arg() >= 0.5 && p.arg() <= 0.6);
        let empty = BoundaryMeasure::new(
            vec![Cell::Arc {
                theta_start: 0.0,
                theta_end: 1.0,
            }],
            vec![0.0],
            0.1,
        );
        assert!(sample_boundary_point(&empty, None, &mut rng).is_err());
    }

    #[test]
    fn strip_length_of_zero_field() {
        let s = Arc::new(LatticeDomain::strip_grid(16, 2.0).unwrap());
        let solver = DirichletSolver::new(s.clone(), s.interior_vertices()).unwrap();
        let eps = 0.125;
        let l = strip_boundary_length(&solver, &vec![0.0; s.len()], eps).unwrap();
        let want = mollifier_prefactor(eps) * 2.0 * 4.0;
        assert!((l - want).abs() < 1e-12 * want);
        let _ = mean(&[l]);
    }
}
