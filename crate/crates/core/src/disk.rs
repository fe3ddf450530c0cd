//! Critical, supercritical, dual and Liouville disk fields, coordinate changes
//! under disk automorphisms and orthogonal rotations of field vectors.

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
use crate::gff::{
    column_averages, BoundaryCondition, DirichletSolver, FieldOrigin, GffSampler, LatticeField,
};
use crate::gmc;
use crate::lattice::{DomainKind, LatticeDomain};
use crate::moebius::{disk_to_strip, disk_to_strip_derivative, strip_to_disk, Moebius};
use crate::params::{ParamSet, Regime};

/// Default mollification scale for boundary measures.
pub const DEFAULT_EPSILON: f64 = 1.0 / 32.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FieldKind {
    Critical,
    Supercritical,
    Dual,
    Liouville,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Embedding {
    Standard,
    Other,
}

/// The two independent pieces of a supercritical field.
#[derive(Debug, Clone)]
pub struct Constituents {
    /// The critical disk field Phi_2.
    pub critical: LatticeField,
    /// The zero-boundary GFF Psi.
    pub zero_boundary: LatticeField,
}

/// Bookkeeping for a windowed Liouville field sample.
#[derive(Debug, Clone)]
pub struct LiouvilleParts {
    /// GFF part, pinned to zero semicircle average.
    pub gff: LatticeField,
    /// The additive constant C.
    pub constant: f64,
    /// Window the constant was drawn from; absent after rotation.
    pub window: Option<(f64, f64)>,
    /// Mass of e^{-2Qc} dc on the window.
    pub window_mass: Option<f64>,
}

/// A field on the disk grid together with its provenance.
#[derive(Debug, Clone)]
pub struct DiskField {
    pub field: LatticeField,
    pub kind: FieldKind,
    pub params: Option<ParamSet>,
    /// Background charge used by coordinate changes.
    pub charge: f64,
    pub marked_points: Vec<Complex64>,
    pub embedding: Embedding,
    pub constituents: Option<Constituents>,
    pub liouville: Option<LiouvilleParts>,
    /// Vertices whose values were clipped or extrapolated.
    pub clipped: Vec<bool>,
}

impl DiskField {
    pub fn domain(&self) -> &Arc<LatticeDomain> {
        &self.field.domain
    }

    pub fn values(&self) -> &[f64] {
        &self.field.values
    }

    /// The critical field whose chaos defines boundary lengths: the field
    /// itself when critical, the stored Phi_2 otherwise.
    pub fn critical_part(&self) -> Option<&LatticeField> {
        match self.kind {
            FieldKind::Critical => Some(&self.field),
            FieldKind::Supercritical | FieldKind::Dual => {
                self.constituents.as_ref().map(|c| &c.critical)
            }
            FieldKind::Liouville => None,
        }
    }

    pub fn clipped_count(&self) -> usize {
        self.clipped.iter().filter(|&&c| c).count()
    }

    /// Wraps a critical lattice field (for example one built by hand in tests).
    pub fn critical(field: LatticeField) -> Self {
        let n = field.len();
        Self {
            field,
            kind: FieldKind::Critical,
            params: Some(ParamSet::critical()),
            charge: 2.0,
            marked_points: Vec::new(),
            embedding: Embedding::Other,
            constituents: None,
            liouville: None,
            clipped: vec![false; n],
        }
    }

    /// Assembles (Q/2) Phi_2 + (sqrt(4-Q^2)/2) Psi from constituents. Valid for
    /// c_L <= 25; at the critical point Psi drops out.
    pub fn compose(params: ParamSet, critical: DiskField, psi: LatticeField) -> Result<DiskField> {
        let Some(dw) = params.dual_weight() else {
            bail!(
                ParameterOutOfRange,
                "c_l = {} > 25 has no supercritical decomposition",
                params.c_l()
            );
        };
        if critical.kind != FieldKind::Critical {
            bail!(
                InvalidArgument,
                "first constituent must be a critical field"
            );
        }
        let field = critical.field.combine(params.critical_weight(), &psi, dw);
        let kind = if params.regime() == Regime::Critical {
            FieldKind::Critical
        } else {
            FieldKind::Supercritical
        };
        Ok(DiskField {
            field,
            kind,
            params: Some(params),
            charge: params.q(),
            marked_points: critical.marked_points.clone(),
            embedding: critical.embedding,
            clipped: critical.clipped.clone(),
            constituents: Some(Constituents {
                critical: critical.field,
                zero_boundary: psi,
            }),
            liouville: None,
        })
    }

    /// The dual field (sqrt(4-Q^2)/2) Phi_2 - (Q/2) Psi of a supercritical
    /// field; its charge is sqrt(4-Q^2).
    pub fn dual(&self) -> Result<DiskField> {
        let (Some(p), Some(c)) = (self.params, self.constituents.as_ref()) else {
            bail!(
                InvalidArgument,
                "dual field needs a field with stored constituents"
            );
        };
        if self.kind != FieldKind::Supercritical {
            bail!(
                InvalidArgument,
                "dual field is defined for supercritical fields"
            );
        }
        let dq = p.dual_q().expect("supercritical");
        let field = c.critical.combine(dq / 2.0, &c.zero_boundary, -p.q() / 2.0);
        Ok(DiskField {
            field,
            kind: FieldKind::Dual,
            charge: dq,
            ..self.clone()
        })
    }
}

/// The column-average process of a critical disk: two independent
/// discretized 3d Bessel processes scaled by -sqrt(2), glued at time 0.
#[derive(Debug, Clone, PartialEq)]
pub struct BesselAveragePath {
    pub times: Vec<f64>,
    pub values: Vec<f64>,
    pub normalization_shift: f64,
}

impl BesselAveragePath {
    /// Samples at `times`, which must be sorted and contain 0. Transitions
    /// are exact: the path is -sqrt(2) |W| for a 3d Brownian motion W on each
    /// side of 0.
    pub fn sample<R: Rng + ?Sized>(times: &[f64], rng: &mut R) -> Result<Self> {
        let Some(zero) = times.iter().position(|&t| t == 0.0) else {
            bail!(InvalidArgument, "Bessel path times must contain 0");
        };
        if times.windows(2).any(|w| !(w[1] > w[0])) {
            bail!(
                InvalidArgument,
                "Bessel path times must be strictly increasing"
            );
        }
        let mut values = vec![0.0; times.len()];
        let walk = |range: &mut dyn Iterator<Item = usize>, values: &mut [f64], rng: &mut R| {
            let mut w = [0.0f64; 3];
            let mut prev = 0.0f64;
            for i in range {
                let dt = (times[i].abs() - prev).abs();
                prev = times[i].abs();
                let sd = dt.sqrt();
                for c in &mut w {
                    *c += sd * rng.sample::<f64, _>(StandardNormal);
                }
                values[i] = -(2.0f64).sqrt() * (w[0] * w[0] + w[1] * w[1] + w[2] * w[2]).sqrt();
            }
        };
        walk(&mut (zero + 1..times.len()), &mut values, rng);
        walk(&mut (0..zero).rev(), &mut values, rng);
        Ok(Self {
            times: times.to_vec(),
            values,
            normalization_shift: 0.0,
        })
    }

    /// Index of the time-0 entry.
    pub fn zero_index(&self) -> usize {
        self.times.iter().position(|&t| t == 0.0).unwrap_or(0)
    }
}

/// Grid and mollification settings for disk sampling.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiskConfig {
    /// Vertices per side of the disk grid.
    pub disk_n: usize,
    /// Cells across the strip height 2 pi.
    pub strip_n: usize,
    /// Strip half-width.
    pub x_max: f64,
    /// Mollification scale of the boundary measure.
    pub epsilon: f64,
}

impl Default for DiskConfig {
    fn default() -> Self {
        Self {
            disk_n: 129,
            strip_n: 128,
            x_max: 6.0,
            epsilon: DEFAULT_EPSILON,
        }
    }
}

impl DiskConfig {
    /// A config for disk grid `n`, with the strip resolution matched to it.
    pub fn for_disk(n: usize) -> Self {
        Self {
            disk_n: n,
            strip_n: (n - 1).max(8),
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct Pullback {
    w: Complex64,
    two_log_deriv: f64,
    clipped: bool,
}

/// Output of the critical sampler, with the strip-side intermediates.
#[derive(Debug, Clone)]
pub struct CriticalSample {
    pub disk: DiskField,
    /// The normalized strip field Phi_0 - log nu(dS) + log L.
    pub strip_field: LatticeField,
    pub bessel: BesselAveragePath,
    /// nu_{Phi_0}(dS) before normalization.
    pub raw_strip_length: f64,
}

/// Sampler for critical and supercritical disks on fixed grids. Holds the
/// factorizations so that repeated sampling is cheap.
#[derive(Debug, Clone)]
pub struct DiskSampler {
    config: DiskConfig,
    disk: Arc<LatticeDomain>,
    strip: Arc<LatticeDomain>,
    strip_free: GffSampler,
    strip_dirichlet: DirichletSolver,
    disk_zero: GffSampler,
    pullback: Vec<Pullback>,
}

impl DiskSampler {
    pub fn new(config: DiskConfig) -> Result<Self> {
        if !(config.epsilon > 0.0 && config.epsilon < 0.25) {
            bail!(
                InvalidArgument,
                "epsilon = {} must lie in (0, 1/4)",
                config.epsilon
            );
        }
        let disk = Arc::new(LatticeDomain::disk_grid(config.disk_n)?);
        let strip = Arc::new(LatticeDomain::strip_grid(config.strip_n, config.x_max)?);
        let strip_free = GffSampler::new(strip.clone(), BoundaryCondition::Free)?;
        let strip_dirichlet = DirichletSolver::new(strip.clone(), strip.interior_vertices())?;
        let disk_zero = GffSampler::new(disk.clone(), BoundaryCondition::Zero)?;
        let h = disk.h();
        let pullback = (0..disk.len())
            .map(|v| {
                let mut z = disk.point(v);
                let mut clipped = false;
                for s in [1.0, -1.0] {
                    if (z - Complex64::new(s, 0.0)).norm() < h / 2.0 {
                        z = Complex64::new(s * (1.0 - h / 2.0), z.im);
                        clipped = true;
                    }
                }
                let mut w = disk_to_strip(z);
                if w.re.abs() > config.x_max {
                    w.re = w.re.signum() * config.x_max;
                    clipped = true;
                }
                w.im = w.im.clamp(0.0, 2.0 * PI);
                Pullback {
                    w,
                    two_log_deriv: 2.0 * disk_to_strip_derivative(z).norm().ln(),
                    clipped,
                }
            })
            .collect();
        Ok(Self {
            config,
            disk,
            strip,
            strip_free,
            strip_dirichlet,
            disk_zero,
            pullback,
        })
    }

    pub fn config(&self) -> &DiskConfig {
        &self.config
    }

    pub fn disk_domain(&self) -> &Arc<LatticeDomain> {
        &self.disk
    }

    pub fn strip_domain(&self) -> &Arc<LatticeDomain> {
        &self.strip
    }

    /// Samples the critical disk with boundary length `boundary_length` in its
    /// standard embedding.
    pub fn sample_critical<R: Rng + ?Sized>(
        &self,
        boundary_length: f64,
        rng: &mut R,
    ) -> Result<CriticalSample> {
        if !(boundary_length > 0.0) || !boundary_length.is_finite() {
            bail!(
                InvalidArgument,
                "boundary length {boundary_length} must be positive"
            );
        }
        let s = &self.strip;
        let (nx, _) = s.grid_dims();
        let times: Vec<f64> = (0..nx)
            .map(|i| s.position(s.vertex_at(i, 0).unwrap())[0])
            .collect();
        let mut bessel = BesselAveragePath::sample(&times, rng)?;
        let lateral_raw = self.strip_free.sample(rng);
        let avg = column_averages(s, &lateral_raw.values);
        let mut phi0 = lateral_raw.values;
        for v in 0..s.len() {
            let i = s.grid_coords(v).0;
            phi0[v] += bessel.values[i] - avg[i];
        }
        let raw = gmc::strip_boundary_length(&self.strip_dirichlet, &phi0, self.config.epsilon)?;
        let shift = boundary_length.ln() - raw.ln();
        bessel.normalization_shift = shift;
        phi0.iter_mut().for_each(|v| *v += shift);
        // The column averages are B + shift, so the maximum sits at x = 0; a
        // numerical tie or drift would be corrected by an integer shift.
        let col = column_averages(s, &phi0);
        let arg =
            col.iter().enumerate().fold(
                (0, f64::NEG_INFINITY),
                |b, (i, &v)| if v > b.1 { (i, v) } else { b },
            );
        if arg.0 != nx / 2 {
            bail!(
                Numerical,
                "column-average maximum at column {} instead of {}",
                arg.0,
                nx / 2
            );
        }
        let strip_field = LatticeField {
            domain: s.clone(),
            values: phi0,
            origin: FieldOrigin::Derived,
        };
        let mut values = Vec::with_capacity(self.disk.len());
        let mut clipped = Vec::with_capacity(self.disk.len());
        for p in &self.pullback {
            let it = s.interpolate_or_nearest(&strip_field.values, p.w);
            values.push(it.value + p.two_log_deriv);
            clipped.push(p.clipped);
        }
        let disk = DiskField {
            field: LatticeField {
                domain: self.disk.clone(),
                values,
                origin: FieldOrigin::Derived,
            },
            kind: FieldKind::Critical,
            params: Some(ParamSet::critical()),
            charge: 2.0,
            marked_points: vec![Complex64::new(-1.0, 0.0), Complex64::new(1.0, 0.0)],
            embedding: Embedding::Standard,
            constituents: None,
            liouville: None,
            clipped,
        };
        Ok(CriticalSample {
            disk,
            strip_field,
            bessel,
            raw_strip_length: raw,
        })
    }

    /// Samples the supercritical disk (Q/2) Phi_2 + (sqrt(4-Q^2)/2) Psi.
    pub fn sample_supercritical<R: Rng + ?Sized>(
        &self,
        boundary_length: f64,
        params: ParamSet,
        rng: &mut R,
    ) -> Result<DiskField> {
        if !params.is_supercritical() {
            bail!(
                ParameterOutOfRange,
                "c_l = {} is not supercritical; use the critical constructor",
                params.c_l()
            );
        }
        let crit = self.sample_critical(boundary_length, rng)?.disk;
        let psi = self.disk_zero.sample(rng);
        DiskField::compose(params, crit, psi)
    }

    /// An independent zero-boundary GFF on the disk grid.
    pub fn sample_zero_boundary<R: Rng + ?Sized>(&self, rng: &mut R) -> LatticeField {
        self.disk_zero.sample(rng)
    }
}

/// Applies z -> Phi(m(z)) + Q log|m'(z)| on the same grid, with Q the field's
/// charge. Constituents transform with charges 2 and 0. Values at vertices
/// whose image has no usable grid cell are taken from the nearest vertex and
/// flagged.
pub fn apply_coordinate_change(field: &DiskField, m: &Moebius) -> DiskField {
    if m.is_identity() {
        return field.clone();
    }
    let d = field.domain().clone();
    let images: Vec<(Complex64, f64)> = (0..d.len())
        .map(|v| (m.apply(d.point(v)), m.derivative(d.point(v)).norm().ln()))
        .collect();
    let mut clipped = field.clipped.clone();
    let transform = |f: &LatticeField, q: f64, clipped: Option<&mut Vec<bool>>| -> LatticeField {
        let mut flags = clipped;
        let values = images
            .iter()
            .enumerate()
            .map(|(v, &(w, ld))| {
                let w = if w.norm() > 1.0 { w / w.norm() } else { w };
                let it = d.interpolate_or_nearest(&f.values, w);
                if let Some(fl) = flags.as_deref_mut() {
                    if it.degraded && !d.is_boundary(v) {
                        fl[v] = true;
                    }
                }
                it.value + q * ld
            })
            .collect();
        LatticeField {
            domain: d.clone(),
            values,
            origin: FieldOrigin::Derived,
        }
    };
    let new_field = transform(&field.field, field.charge, Some(&mut clipped));
    let constituents = field.constituents.as_ref().map(|c| Constituents {
        critical: transform(&c.critical, 2.0, None),
        zero_boundary: transform(&c.zero_boundary, 0.0, None),
    });
    let inv = m.inverse();
    DiskField {
        field: new_field,
        constituents,
        marked_points: field.marked_points.iter().map(|&p| inv.apply(p)).collect(),
        embedding: Embedding::Other,
        clipped,
        ..field.clone()
    }
}

/// Column averages, in strip coordinates, of the critical field after the
/// coordinate change by `m`: for each x, the mean over `rows` heights y of
/// Phi_2(m(z)) + 2 log|m'(z)| - 2 log|f'(z)| with z = f^{-1}(x + iy).
pub fn strip_profile(critical: &LatticeField, m: &Moebius, xs: &[f64], rows: usize) -> Vec<f64> {
    let d = &critical.domain;
    xs.iter()
        .map(|&x| {
            let mut acc = 0.0;
            for j in 0..rows {
                let y = 2.0 * PI * (j as f64 + 0.5) / rows as f64;
                let z = strip_to_disk(Complex64::new(x, y));
                let mut w = m.apply(z);
                if w.norm() > 1.0 {
                    w /= w.norm();
                }
                let v = d.interpolate_or_nearest(&critical.values, w).value;
                acc += v + 2.0 * m.derivative(z).norm().ln()
                    - 2.0 * disk_to_strip_derivative(z).norm().ln();
            }
            acc / rows as f64
        })
        .collect()
}

/// Settings for moving a disk field to its standard embedding.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StandardizeConfig {
    /// Half-width of the strip window searched for the column maximum.
    pub x_range: f64,
    pub x_step: f64,
    /// Heights averaged per column.
    pub rows: usize,
}

impl Default for StandardizeConfig {
    fn default() -> Self {
        Self {
            x_range: 4.0,
            x_step: 0.05,
            rows: 64,
        }
    }
}

/// Samples two marked points from `measure`, sends them to -1 and 1, and
/// translates along the strip so that the column-average process of the
/// critical constituent peaks at x = 0. Returns the transformed field and
/// the total coordinate change.
pub fn standardize<R: Rng + ?Sized>(
    field: &DiskField,
    measure: &gmc::BoundaryMeasure,
    config: &StandardizeConfig,
    rng: &mut R,
) -> Result<(DiskField, Moebius)> {
    let Some(crit) = field.critical_part() else {
        bail!(
            InvalidArgument,
            "standard embedding needs a critical constituent"
        );
    };
    let (_, x) = gmc::sample_boundary_point(measure, None, rng)?;
    let (_, y) = gmc::sample_boundary_point(measure, None, rng)?;
    let m0 = Moebius::sending_to_pm1(x, y)?.inverse();
    let steps = (config.x_range / config.x_step).round() as i64;
    let xs: Vec<f64> = (-steps..=steps).map(|k| k as f64 * config.x_step).collect();
    let prof = strip_profile(crit, &m0, &xs, config.rows);
    let (arg, _) =
        prof.iter().enumerate().fold(
            (0, f64::NEG_INFINITY),
            |b, (i, &v)| if v > b.1 { (i, v) } else { b },
        );
    let total = m0.compose(&Moebius::strip_translation(xs[arg]));
    let mut out = apply_coordinate_change(field, &total);
    out.marked_points = vec![Complex64::new(-1.0, 0.0), Complex64::new(1.0, 0.0)];
    out.embedding = Embedding::Standard;
    Ok((out, total))
}

/// The Cayley identification of the half-plane with the disk used for
/// Liouville fields: w in D corresponds to z = i (1 + w)/(1 - w) in H.
pub fn disk_to_half_plane(w: Complex64) -> Complex64 {
    let one = Complex64::new(1.0, 0.0);
    Complex64::i() * (one + w) / (one - w)
}

/// Sampler for windowed Liouville fields on the half-plane, represented on
/// the disk grid through [`disk_to_half_plane`].
#[derive(Debug, Clone)]
pub struct LiouvilleSampler {
    free: GffSampler,
    semicircle: Vec<Complex64>,
    log_term: Vec<f64>,
}

impl LiouvilleSampler {
    pub fn new(domain: Arc<LatticeDomain>) -> Result<Self> {
        if domain.kind() != DomainKind::Disk {
            bail!(InvalidArgument, "Liouville fields live on the disk grid");
        }
        let m = 4 * domain.resolution();
        let semicircle = (0..m)
            .map(|k| {
                let t = PI * (k as f64 + 0.5) / m as f64;
                let z = Complex64::from_polar(1.0, t);
                (z - Complex64::i()) / (z + Complex64::i())
            })
            .collect();
        let floor = domain.h() / 2.0;
        let log_term = (0..domain.len())
            .map(|v| {
                let w = domain.point(v);
                let r = (Complex64::new(1.0, 0.0) + w).norm()
                    / (Complex64::new(1.0, 0.0) - w).norm().max(floor);
                r.max(1.0).ln()
            })
            .collect();
        let free = GffSampler::new(domain, BoundaryCondition::Free)?;
        Ok(Self {
            free,
            semicircle,
            log_term,
        })
    }

    /// Average of `values` over the unit semicircle of H (uniform in angle).
    pub fn semicircle_average(&self, values: &[f64]) -> f64 {
        let d = self.free.domain();
        self.semicircle
            .iter()
            .map(|&p| d.interpolate_or_nearest(values, p).value)
            .sum::<f64>()
            / self.semicircle.len() as f64
    }

    /// Samples Phi^0 - 2Q log max(|z|, 1) + C with C drawn from e^{-2Qc} dc
    /// restricted to `window`.
    pub fn sample<R: Rng + ?Sized>(
        &self,
        charge: f64,
        window: (f64, f64),
        rng: &mut R,
    ) -> Result<DiskField> {
        let (a, b) = window;
        if !(a < b) || !a.is_finite() || !b.is_finite() {
            bail!(
                InvalidArgument,
                "constant window ({a}, {b}) is empty or infinite"
            );
        }
        if !(charge >= 0.0) || !charge.is_finite() {
            bail!(
                ParameterOutOfRange,
                "Liouville charge {charge} must be nonnegative"
            );
        }
        let mut gff = self.free.sample(rng);
        let avg = self.semicircle_average(&gff.values);
        gff.values.iter_mut().for_each(|v| *v -= avg);
        let u: f64 = rng.random();
        let (constant, mass) = truncated_exponential(charge, a, b, u);
        let values = gff
            .values
            .iter()
            .zip(&self.log_term)
            .map(|(g, l)| g - 2.0 * charge * l + constant)
            .collect();
        let d = gff.domain.clone();
        Ok(DiskField {
            field: LatticeField {
                domain: d.clone(),
                values,
                origin: FieldOrigin::Derived,
            },
            kind: FieldKind::Liouville,
            params: ParamSet::from_background_charge(charge).ok(),
            charge,
            marked_points: Vec::new(),
            embedding: Embedding::Other,
            constituents: None,
            liouville: Some(LiouvilleParts {
                gff,
                constant,
                window: Some(window),
                window_mass: Some(mass),
            }),
            clipped: vec![false; d.len()],
        })
    }
}

/// Inverse-CDF draw from the density proportional to e^{-2Qc} on [a, b];
/// also returns the window mass. Uniform when Q = 0.
pub fn truncated_exponential(q: f64, a: f64, b: f64, u: f64) -> (f64, f64) {
    if q == 0.0 {
        return (a + u * (b - a), b - a);
    }
    let k = 2.0 * q;
    // c = a - ln(1 - u (1 - e^{-k(b-a)})) / k, using expm1/ln_1p for accuracy.
    let span = -(-k * (b - a)).exp_m1();
    let c = a - (-u * span).ln_1p() / k;
    let mass = (-k * a).exp() * span / k;
    (c.min(b), mass)
}

/// CDF of the truncated exponential of [`truncated_exponential`].
pub fn truncated_exponential_cdf(q: f64, a: f64, b: f64, c: f64) -> f64 {
    if c <= a {
        return 0.0;
    }
    if c >= b {
        return 1.0;
    }
    if q == 0.0 {
        return (c - a) / (b - a);
    }
    let k = 2.0 * q;
    (-k * (c - a)).exp_m1() / (-k * (b - a)).exp_m1()
}

/// Result of rotating a vector of Liouville fields.
#[derive(Debug, Clone)]
pub struct RotatedFields {
    pub fields: Vec<DiskField>,
    pub charges: Vec<f64>,
    pub central_charges: Vec<f64>,
    /// Whether every rotated charge is nonnegative, the case in which the
    /// rotated vector is again a vector of independent Liouville fields.
    pub nonnegative: bool,
}

/// Forms the vertexwise combinations sum_j A_ij Phi_j of independent Liouville
/// fields, with charges Q_hat = A Q and central charges 1 + 6 Q_hat^2.
pub fn rotate_field_vector(fields: &[DiskField], a: &[Vec<f64>]) -> Result<RotatedFields> {
    let n = fields.len();
    if n == 0 {
        bail!(InvalidArgument, "no fields to rotate");
    }
    if a.len() != n || a.iter().any(|r| r.len() != n) {
        bail!(InvalidArgument, "matrix must be {n} x {n}");
    }
    for i in 0..n {
        for j in 0..n {
            let s: f64 = (0..n).map(|k| a[k][i] * a[k][j]).sum();
            let e = if i == j { 1.0 } else { 0.0 };
            if (s - e).abs() > 1e-10 {
                bail!(
                    InvalidArgument,
                    "matrix is not orthogonal: (A^T A)[{i}][{j}] = {s}"
                );
            }
        }
    }
    let d = fields[0].domain().clone();
    for f in fields {
        if f.kind != FieldKind::Liouville || f.liouville.is_none() {
            bail!(InvalidArgument, "rotation acts on Liouville fields");
        }
        if f.domain().len() != d.len() {
            bail!(InvalidArgument, "fields must share a domain");
        }
    }
    let q: Vec<f64> = fields.iter().map(|f| f.charge).collect();
    let q_hat: Vec<f64> = (0..n)
        .map(|i| (0..n).map(|j| a[i][j] * q[j]).sum())
        .collect();
    let nonnegative = q_hat.iter().all(|&v| v >= -1e-12);
    let q_hat: Vec<f64> = if nonnegative {
        q_hat.into_iter().map(|v| v.max(0.0)).collect()
    } else {
        q_hat
    };
    let lin = |i: usize, get: &dyn Fn(&DiskField) -> &[f64]| -> Vec<f64> {
        let mut out = vec![0.0; d.len()];
        for (j, f) in fields.iter().enumerate() {
            let c = a[i][j];
            for (o, x) in out.iter_mut().zip(get(f)) {
                *o += c * x;
            }
        }
        out
    };
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let values = lin(i, &|f| &f.field.values);
        let gff = lin(i, &|f| &f.liouville.as_ref().unwrap().gff.values);
        let constant: f64 = (0..n)
            .map(|j| a[i][j] * fields[j].liouville.as_ref().unwrap().constant)
            .sum();
        out.push(DiskField {
            field: LatticeField {
                domain: d.clone(),
                values,
                origin: FieldOrigin::Derived,
            },
            kind: FieldKind::Liouville,
            params: ParamSet::from_background_charge(q_hat[i]).ok(),
            charge: q_hat[i],
            marked_points: Vec::new(),
            embedding: Embedding::Other,
            constituents: None,
            liouville: Some(LiouvilleParts {
                gff: LatticeField {
                    domain: d.clone(),
                    values: gff,
                    origin: FieldOrigin::Derived,
                },
                constant,
                window: None,
                window_mass: None,
            }),
            clipped: vec![false; d.len()],
        });
    }
    let central_charges = q_hat.iter().map(|q| 1.0 + 6.0 * q * q).collect();
    Ok(RotatedFields {
        fields: out,
        charges: q_hat,
        central_charges,
        nonnegative,
    })
}

/// A Haar-distributed orthogonal matrix: Gram-Schmidt on a Gaussian matrix,
/// rows as the output vectors.
pub fn random_orthogonal<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Vec<Vec<f64>> {
    let mut rows: Vec<Vec<f64>> = Vec::with_capacity(n);
    while rows.len() < n {
        let mut v: Vec<f64> = (0..n)
            .map(|_| rng.sample::<f64, _>(StandardNormal))
            .collect();
        for r in &rows {
            let d: f64 = r.iter().zip(&v).map(|(a, b)| a * b).sum();
            v.iter_mut().zip(r).for_each(|(x, a)| *x -= d * a);
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-8 {
            v.iter_mut().for_each(|x| *x /= norm);
            rows.push(v);
        }
    }
    rows
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Streams;
    use crate::stats::ks_one_sample;

    fn small_sampler() -> DiskSampler {
        DiskSampler::new(DiskConfig {
            disk_n: 33,
            strip_n: 32,
            x_max: 5.0,
            epsilon: 0.125,
        })
        .unwrap()
    }

    #[test]
    fn critical_sample_structure() {
        let s = small_sampler();
        let st = Streams::new(11);
        let a = s.sample_critical(1.0, &mut st.stream("disk")).unwrap();
        assert_eq!(a.disk.kind, FieldKind::Critical);
        assert_eq!(a.disk.embedding, Embedding::Standard);
        let z = a.bessel.zero_index();
        assert!(a.bessel.values.iter().all(|&v| v <= 0.0));
        assert_eq!(a.bessel.values[z], 0.0);
        let col = column_averages(&a.strip_field.domain, &a.strip_field.values);
        let max = col.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        assert_eq!(col[z], max);
        // Boundary length scaling.
        let b = s.sample_critical(3.0, &mut st.stream("disk")).unwrap();
        for (x, y) in a.disk.values().iter().zip(b.disk.values()) {
            assert!((y - x - 3f64.ln()).abs() < 1e-12);
        }
        assert!(s.sample_critical(0.0, &mut st.stream("disk")).is_err());
    }

    #[test]
    fn supercritical_identity_and_dual() {
        let s = small_sampler();
        let p = ParamSet::from_central_charge(13.0).unwrap();
        let f = s
            .sample_supercritical(1.0, p, &mut Streams::new(3).stream("d"))
            .unwrap();
        let c = f.constituents.as_ref().unwrap();
        let (qa, qb) = (p.q() / 2.0, p.dual_q().unwrap() / 2.0);
        for v in 0..f.field.len() {
            let want = qa * c.critical.values[v] + qb * c.zero_boundary.values[v];
            assert!((f.field.values[v] - want).abs() < 1e-12);
        }
        let d = f.dual().unwrap();
        assert_eq!(d.kind, FieldKind::Dual);
        for v in f.domain().boundary_vertices() {
            assert!(
                (p.q() * d.field.values[v] - p.dual_q().unwrap() * f.field.values[v]).abs() < 1e-9
            );
            assert!((f.field.values[v] - qa * c.critical.values[v]).abs() < 1e-12);
        }
        assert!(s
            .sample_supercritical(1.0, ParamSet::critical(), &mut Streams::new(3).stream("d"))
            .is_err());
    }

    #[test]
    fn psi_coefficient_vanishes_at_critical_limit() {
        let p = ParamSet::from_central_charge(25.0 - 1e-10).unwrap();
        assert!(p.dual_weight().unwrap() < 1e-5);
    }

    #[test]
    fn bessel_marginal_matches() {
        // At time t, |W_t|/sqrt(t) is chi with 3 degrees of freedom.
        let times = [-2.0, -1.0, 0.0, 0.5, 1.5];
        let st = Streams::new(5);
        let mut rng = st.stream("b");
        let mut xs = Vec::new();
        for _ in 0..10_000 {
            let p = BesselAveragePath::sample(&times, &mut rng).unwrap();
            xs.push(-p.values[4] / (2.0f64).sqrt() / 1.5f64.sqrt());
        }
        let r = ks_one_sample(&xs, chi3_cdf);
        assert!(r.p_value > 0.01, "{r:?}");
    }

    fn chi3_cdf(r: f64) -> f64 {
        // P(|N_3| <= r) = erf(r/sqrt 2) - sqrt(2/pi) r e^{-r^2/2}.
        statrs::function::erf::erf(r / 2f64.sqrt()) - (2.0 / PI).sqrt() * r * (-r * r / 2.0).exp()
    }

    #[test]
    fn coordinate_change_identity_rotation_and_composition() {
        let d = Arc::new(LatticeDomain::disk_grid(65).unwrap());
        let smooth =
            LatticeField::from_fn(d.clone(), |z| (z * z).re + 0.5 * z.im + (z.re * 0.7).cos());
        let f = DiskField::critical(smooth);
        let same = apply_coordinate_change(&f, &Moebius::identity());
        assert_eq!(same.field.values, f.field.values);
        let rot = apply_coordinate_change(&f, &Moebius::rotation(PI / 2.0));
        for v in 0..d.len() {
            let r = d.rotate_quarter(v).unwrap();
            assert!((rot.field.values[v] - f.field.values[r]).abs() < 1e-9);
        }
        let m1 = Moebius::new(0.4, Complex64::new(0.2, -0.1)).unwrap();
        let m2 = Moebius::new(-1.1, Complex64::new(-0.15, 0.25)).unwrap();
        let two = apply_coordinate_change(&apply_coordinate_change(&f, &m1), &m2);
        let one = apply_coordinate_change(&f, &m1.compose(&m2));
        for v in d.interior_vertices() {
            if d.point(v).norm() < 0.8 {
                assert!(
                    (two.field.values[v] - one.field.values[v]).abs() < 1e-3,
                    "{v}"
                );
            }
        }
    }

    #[test]
    fn coordinate_change_respects_decomposition() {
        let s = small_sampler();
        let p = ParamSet::from_central_charge(7.0).unwrap();
        let f = s
            .sample_supercritical(1.0, p, &mut Streams::new(9).stream("d"))
            .unwrap();
        let m = Moebius::new(0.3, Complex64::new(0.3, 0.2)).unwrap();
        let g = apply_coordinate_change(&f, &m);
        let c = g.constituents.as_ref().unwrap();
        for v in 0..g.field.len() {
            let want = p.q() / 2.0 * c.critical.values[v]
                + p.dual_q().unwrap() / 2.0 * c.zero_boundary.values[v];
            assert!((g.field.values[v] - want).abs() < 1e-9);
        }
    }

    #[test]
    fn liouville_gauge_and_constant() {
        let d = Arc::new(LatticeDomain::disk_grid(17).unwrap());
        let ls = LiouvilleSampler::new(d).unwrap();
        let mut rng = Streams::new(1).stream("l");
        let mut cs = Vec::new();
        for _ in 0..10_000 {
            let f = ls.sample(1.2, (-1.0, 2.0), &mut rng).unwrap();
            let parts = f.liouville.as_ref().unwrap();
            assert!(ls.semicircle_average(&parts.gff.values).abs() < 1e-12);
            cs.push(parts.constant);
        }
        let r = ks_one_sample(&cs, |c| truncated_exponential_cdf(1.2, -1.0, 2.0, c));
        assert!(r.p_value > 0.01, "{r:?}");
        let f0 = ls.sample(0.0, (0.0, 1.0), &mut rng).unwrap();
        let parts = f0.liouville.unwrap();
        for (v, g) in f0.field.values.iter().zip(&parts.gff.values) {
            assert!((v - g - parts.constant).abs() < 1e-12);
        }
        assert!(ls.sample(1.0, (1.0, 1.0), &mut rng).is_err());
    }

    #[test]
    fn rotation_errors_and_identity() {
        let d = Arc::new(LatticeDomain::disk_grid(9).unwrap());
        let ls = LiouvilleSampler::new(d).unwrap();
        let mut rng = Streams::new(2).stream("l");
        let fs = vec![
            ls.sample(2.0, (0.0, 1.0), &mut rng).unwrap(),
            ls.sample(0.0, (0.0, 1.0), &mut rng).unwrap(),
        ];
        let id = rotate_field_vector(&fs, &[vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        assert_eq!(id.charges, vec![2.0, 0.0]);
        assert_eq!(id.fields[0].field.values, fs[0].field.values);
        assert!(rotate_field_vector(&fs, &[vec![1.0, 0.1], vec![0.0, 1.0]]).is_err());
        let neg = rotate_field_vector(&fs, &[vec![-1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        assert!(!neg.nonnegative && neg.fields[0].params.is_none());
        assert!((neg.central_charges.iter().sum::<f64>() - 26.0).abs() < 1e-10);
        let a = random_orthogonal(3, &mut rng);
        for i in 0..3 {
            for j in 0..3 {
                let s: f64 = (0..3).map(|k| a[i][k] * a[j][k]).sum();
                assert!((s - if i == j { 1.0 } else { 0.0 }).abs() < 1e-12);
            }
        }
        let q = 2f64.sqrt();
        let dq = (4.0 - q * q).sqrt();
        let r =
            rotate_field_vector(&fs, &[vec![q / 2.0, dq / 2.0], vec![dq / 2.0, -q / 2.0]]).unwrap();
        assert!((r.charges[0] - q).abs() < 1e-12 && (r.charges[1] - dq).abs() < 1e-12);
        assert!((r.central_charges.iter().sum::<f64>() - 26.0).abs() < 1e-10);
    }
}
