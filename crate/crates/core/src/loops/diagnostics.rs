//! Two statistics of the loop coupling: the growth of the harmonic extension
//! from a loop towards it, and the Markov property of the field inside a
//! fixed loop.

use alloc::vec::Vec;
use core::f64::consts::PI;

use num_complex::Complex64;
use rand::Rng;

use super::{circle_region, mask, CouplingConfig, CouplingSampler, LoopSource};
use crate::disk::{standardize, DiskConfig, DiskField, DiskSampler, StandardizeConfig};
use crate::error::{bail, Result};
#[allow(unused_imports)]
use crate::float::*;
use crate::gff::{DirichletSolver, FieldOrigin, LatticeField};
use crate::gmc::{BoundaryMeasure, BoundaryMeasurer};
use crate::params::{ParamSet, Regime};
use crate::rng::Streams;
use crate::stats::{ks_two_sample, mean, variance};

#[derive(Debug, Clone, PartialEq)]
pub struct NonIndependenceConfig {
    pub disk: DiskConfig,
    /// Radius of the fixed circle loop around 0.
    pub radius: f64,
    /// Distances from the loop at which the extension is read.
    pub distances: Vec<f64>,
    /// Equally spaced angles per distance.
    pub angles: usize,
}

impl Default for NonIndependenceConfig {
    fn default() -> Self {
        Self {
            disk: DiskConfig::default(),
            radius: 0.5,
            distances: (3..=6).map(|k| 0.5f64.powi(k)).collect(),
            angles: 16,
        }
    }
}

/// One run: the loop sign and the extension values, indexed by distance
/// then angle.
#[derive(Debug, Clone, PartialEq)]
pub struct HarmonicSample {
    pub sign: i8,
    pub values: Vec<Vec<f64>>,
}

/// Harmonic extension, into a fixed circle, of the supercritical field's
/// values on the circle, read at points approaching it from inside.
#[derive(Debug, Clone)]
pub struct NonIndependenceExperiment {
    config: NonIndependenceConfig,
    coupling: CouplingSampler,
    solver: DirichletSolver,
    points: Vec<Vec<Complex64>>,
}

impl NonIndependenceExperiment {
    /// `params` may be critical (the control, where no loop sign enters).
    pub fn new(params: ParamSet, config: NonIndependenceConfig) -> Result<Self> {
        let coupling = CouplingSampler::new(
            params,
            CouplingConfig {
                disk: config.disk,
                depth: 1,
                source: LoopSource::single_circle(config.radius),
            },
        )?;
        let d = coupling.domain().clone();
        let h = d.h();
        if let Some(&bad) = config
            .distances
            .iter()
            .find(|&&t| !(t >= h * (1.0 - 1e-9) && t < config.radius))
        {
            bail!(
                InvalidArgument,
                "distance {bad} must lie in [h = {h}, radius)"
            );
        }
        if config.angles == 0 {
            bail!(InvalidArgument, "need at least one angle");
        }
        let region = circle_region(&d, Complex64::new(0.0, 0.0), config.radius);
        let m = mask(d.len(), &region);
        let unknowns: Vec<usize> = region
            .into_iter()
            .filter(|&v| d.neighbors(v).all(|u| m[u]))
            .collect();
        let solver = DirichletSolver::new(d, unknowns)?;
        let points = config
            .distances
            .iter()
            .map(|&t| {
                (0..config.angles)
                    .map(|j| {
                        Complex64::from_polar(
                            config.radius - t,
                            2.0 * PI * j as f64 / config.angles as f64,
                        )
                    })
                    .collect()
            })
            .collect();
        Ok(Self {
            config,
            coupling,
            solver,
            points,
        })
    }

    pub fn config(&self) -> &NonIndependenceConfig {
        &self.config
    }

    pub fn params(&self) -> ParamSet {
        self.coupling.params()
    }

    pub fn run(&self, streams: &Streams) -> Result<HarmonicSample> {
        let c = self.coupling.sample(1.0, streams)?;
        let mut h = c.phi.values().to_vec();
        self.solver.extend(&mut h);
        let d = self.solver.domain();
        let values = self
            .points
            .iter()
            .map(|ps| {
                ps.iter()
                    .map(|&p| d.interpolate_or_nearest(&h, p).value)
                    .collect()
            })
            .collect();
        Ok(HarmonicSample {
            sign: c.tree.nodes.first().map_or(0, |n| n.sign),
            values,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScaleReport {
    pub distance: f64,
    pub log_inverse_distance: f64,
    /// Variance over runs, averaged over angles.
    pub raw_variance: f64,
    /// Variance within each sign class, pooled, averaged over angles.
    pub within_sign_variance: f64,
    /// within_sign_variance / log(1/d).
    pub normalized: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NonIndependenceReport {
    pub c_l: f64,
    /// Q^2/4.
    pub target: f64,
    pub runs: usize,
    pub scales: Vec<ScaleReport>,
    /// Least-squares slope of the within-sign variance against log(1/d).
    pub slope: f64,
    pub slope_ratio: f64,
    /// normalized / target at the smallest distance.
    pub ratio_at_smallest: f64,
}

fn pooled_variance(groups: &[&[f64]]) -> f64 {
    let (mut ss, mut dof) = (0.0, 0usize);
    for g in groups.iter().filter(|g| g.len() > 1) {
        ss += variance(g) * (g.len() - 1) as f64;
        dof += g.len() - 1;
    }
    if dof == 0 {
        f64::NAN
    } else {
        ss / dof as f64
    }
}

pub fn nonindependence_report(
    params: ParamSet,
    distances: &[f64],
    samples: &[HarmonicSample],
) -> Result<NonIndependenceReport> {
    if samples.len() < 3 {
        bail!(
            InvalidArgument,
            "need at least 3 runs, got {}",
            samples.len()
        );
    }
    let target = params.q() * params.q() / 4.0;
    let mut scales = Vec::with_capacity(distances.len());
    for (k, &t) in distances.iter().enumerate() {
        let angles = samples[0].values[k].len();
        let (mut raw, mut within) = (0.0, 0.0);
        for j in 0..angles {
            let all: Vec<f64> = samples.iter().map(|s| s.values[k][j]).collect();
            let plus: Vec<f64> = samples
                .iter()
                .filter(|s| s.sign > 0)
                .map(|s| s.values[k][j])
                .collect();
            let minus: Vec<f64> = samples
                .iter()
                .filter(|s| s.sign <= 0)
                .map(|s| s.values[k][j])
                .collect();
            raw += variance(&all);
            within += pooled_variance(&[&plus, &minus]);
        }
        let (raw, within) = (raw / angles as f64, within / angles as f64);
        let l = (1.0 / t).ln();
        scales.push(ScaleReport {
            distance: t,
            log_inverse_distance: l,
            raw_variance: raw,
            within_sign_variance: within,
            normalized: within / l,
        });
    }
    let xs: Vec<f64> = scales.iter().map(|s| s.log_inverse_distance).collect();
    let ys: Vec<f64> = scales.iter().map(|s| s.within_sign_variance).collect();
    let (mx, my) = (mean(&xs), mean(&ys));
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = if sxx > 0.0 { sxy / sxx } else { f64::NAN };
    let smallest = scales
        .iter()
        .min_by(|a, b| a.distance.total_cmp(&b.distance))
        .map_or(f64::NAN, |s| s.normalized / target);
    Ok(NonIndependenceReport {
        c_l: params.c_l(),
        target,
        runs: samples.len(),
        scales,
        slope,
        slope_ratio: slope / target,
        ratio_at_smallest: smallest,
    })
}

/// Circle averages compared between the restricted and the fresh field,
/// as (name, center, radius).
pub const MARKOV_STATISTICS: [(&str, Complex64, f64); 5] = [
    ("center_r0.2", Complex64::new(0.0, 0.0), 0.2),
    ("center_r0.4", Complex64::new(0.0, 0.0), 0.4),
    ("east_r0.2", Complex64::new(0.45, 0.0), 0.2),
    ("west_r0.2", Complex64::new(-0.45, 0.0), 0.2),
    ("north_r0.2", Complex64::new(0.0, 0.45), 0.2),
];

#[derive(Debug, Clone, PartialEq)]
pub struct MarkovConfig {
    /// Grid of the coupled disk.
    pub outer: DiskConfig,
    /// Grid of the restricted and fresh disks; (inner - 1) must divide
    /// (outer - 1) times the loop radius exactly.
    pub inner_n: usize,
    pub radius: f64,
    pub standardize: StandardizeConfig,
}

impl Default for MarkovConfig {
    fn default() -> Self {
        Self {
            outer: DiskConfig::default(),
            inner_n: 65,
            radius: 0.5,
            standardize: StandardizeConfig::default(),
        }
    }
}

/// One run: the restricted field's boundary length, its loop sign and the
/// statistics of both fields in their standard embeddings.
#[derive(Debug, Clone, PartialEq)]
pub struct MarkovSample {
    pub length: f64,
    pub sign: i8,
    pub restricted: [f64; 5],
    pub fresh: [f64; 5],
}

/// The field inside a fixed circle loop, mapped to the unit disk and
/// re-centered, against an independent disk with the same boundary length.
#[derive(Debug, Clone)]
pub struct MarkovExperiment {
    config: MarkovConfig,
    coupling: CouplingSampler,
    inner: DiskSampler,
    measurer: BoundaryMeasurer,
    /// For each inner vertex, the outer vertex at radius times its position.
    embed: Vec<usize>,
}

impl MarkovExperiment {
    pub fn new(params: ParamSet, config: MarkovConfig) -> Result<Self> {
        if params.regime() == Regime::Subcritical {
            bail!(
                ParameterOutOfRange,
                "the Markov test needs c_l <= 25, got {}",
                params.c_l()
            );
        }
        let coupling = CouplingSampler::new(
            params,
            CouplingConfig {
                disk: config.outer,
                depth: 1,
                source: LoopSource::single_circle(config.radius),
            },
        )?;
        let inner_cfg = DiskConfig {
            epsilon: config.outer.epsilon / config.radius,
            ..DiskConfig::for_disk(config.inner_n)
        };
        let inner = DiskSampler::new(inner_cfg)?;
        let (od, id) = (coupling.domain().clone(), inner.disk_domain().clone());
        let mut embed = Vec::with_capacity(id.len());
        for v in 0..id.len() {
            let p = id.point(v) * config.radius;
            let u = od.nearest_vertex(p);
            if (od.point(u) - p).norm() > 1e-9 {
                bail!(
                    Geometry,
                    "inner grid {} does not nest in the outer grid at radius {}",
                    config.inner_n,
                    config.radius
                );
            }
            embed.push(u);
        }
        let region = circle_region(&od, Complex64::new(0.0, 0.0), config.radius);
        if region.len() != embed.len() {
            bail!(
                Geometry,
                "loop region has {} vertices, inner grid {}",
                region.len(),
                embed.len()
            );
        }
        let measurer = BoundaryMeasurer::new(id, inner_cfg.epsilon)?;
        Ok(Self {
            config,
            coupling,
            inner,
            measurer,
            embed,
        })
    }

    pub fn config(&self) -> &MarkovConfig {
        &self.config
    }

    fn statistics(field: &DiskField) -> Result<[f64; 5]> {
        let mut out = [0.0; 5];
        for (o, &(_, c, r)) in out.iter_mut().zip(&MARKOV_STATISTICS) {
            *o = field.field.circle_average(c, r)?;
        }
        Ok(out)
    }

    /// An independent disk on the inner grid rescaled to boundary length
    /// `length`, with its boundary measure.
    fn fresh_matched<R: Rng + ?Sized>(
        &self,
        length: f64,
        rng: &mut R,
    ) -> Result<(DiskField, BoundaryMeasure)> {
        let mut crit = self.inner.sample_critical(1.0, rng)?.disk;
        let lambda = self.measurer.measure(&crit)?.total;
        crit.field.add_constant((length / lambda).ln());
        let psi = self.inner.sample_zero_boundary(rng);
        let field = DiskField::compose(self.coupling.params(), crit, psi)?;
        let m = self.measurer.measure(&field)?;
        Ok((field, m))
    }

    /// Calibration run: the restricted field is replaced by a second fresh
    /// disk matched to the same coupled boundary length, so both sides have
    /// the same law and the KS p-values should be uniform.
    pub fn run_null(&self, streams: &Streams) -> Result<MarkovSample> {
        let mut s = self.run(streams)?;
        let (other, m) = self.fresh_matched(s.length, &mut streams.stream("null"))?;
        let (os, _) = standardize(
            &other,
            &m,
            &self.config.standardize,
            &mut streams.stream("standardize-null"),
        )?;
        s.restricted = Self::statistics(&os)?;
        s.sign = 0;
        Ok(s)
    }

    pub fn run(&self, streams: &Streams) -> Result<MarkovSample> {
        let params = self.coupling.params();
        let k = params.dual_weight().expect("checked at construction") / params.critical_weight();
        let c = self.coupling.sample(1.0, streams)?;
        let sign = c.tree.nodes[0].sign;
        let x = PI * f64::from(sign);
        let parts = c
            .phi
            .constituents
            .as_ref()
            .expect("coupled fields keep constituents");
        let id = self.inner.disk_domain().clone();
        let two_log_r = 2.0 * self.config.radius.ln();
        let crit: Vec<f64> = self
            .embed
            .iter()
            .map(|&u| parts.critical.values[u] + two_log_r + k * x)
            .collect();
        let psi: Vec<f64> = self
            .embed
            .iter()
            .map(|&u| parts.zero_boundary.values[u] - x)
            .collect();
        let restricted = DiskField::compose(
            params,
            DiskField::critical(LatticeField {
                domain: id.clone(),
                values: crit,
                origin: FieldOrigin::Derived,
            }),
            LatticeField {
                domain: id.clone(),
                values: psi,
                origin: FieldOrigin::Derived,
            },
        )?;
        let m_r = self.measurer.measure(&restricted)?;
        let length = m_r.total;

        let (fresh, m_f) = self.fresh_matched(length, &mut streams.stream("fresh"))?;
        let cfg = &self.config.standardize;
        let (rs, _) = standardize(
            &restricted,
            &m_r,
            cfg,
            &mut streams.stream("standardize-restricted"),
        )?;
        let (fs, _) = standardize(&fresh, &m_f, cfg, &mut streams.stream("standardize-fresh"))?;
        Ok(MarkovSample {
            length,
            sign,
            restricted: Self::statistics(&rs)?,
            fresh: Self::statistics(&fs)?,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StatisticReport {
    pub name: &'static str,
    pub ks_statistic: f64,
    pub p_value: f64,
    /// Top-decile restricted runs against bottom-decile fresh runs.
    pub control_p_value: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MarkovReport {
    pub runs: usize,
    pub statistics: Vec<StatisticReport>,
    /// Statistics with p > 0.01.
    pub passing: usize,
    /// Whether some control p-value is below 0.01.
    pub control_detects: bool,
}

pub fn markov_report(samples: &[MarkovSample]) -> Result<MarkovReport> {
    if samples.len() < 20 {
        bail!(
            InvalidArgument,
            "need at least 20 runs, got {}",
            samples.len()
        );
    }
    let mut order: Vec<usize> = (0..samples.len()).collect();
    order.sort_by(|&a, &b| samples[a].length.total_cmp(&samples[b].length));
    let dec = samples.len() / 10;
    let (low, high) = (&order[..dec], &order[samples.len() - dec..]);
    let statistics: Vec<StatisticReport> = MARKOV_STATISTICS
        .iter()
        .enumerate()
        .map(|(k, &(name, _, _))| {
            let r: Vec<f64> = samples.iter().map(|s| s.restricted[k]).collect();
            let f: Vec<f64> = samples.iter().map(|s| s.fresh[k]).collect();
            let ks = ks_two_sample(&r, &f);
            let hi: Vec<f64> = high.iter().map(|&i| samples[i].restricted[k]).collect();
            let lo: Vec<f64> = low.iter().map(|&i| samples[i].fresh[k]).collect();
            StatisticReport {
                name,
                ks_statistic: ks.statistic,
                p_value: ks.p_value,
                control_p_value: ks_two_sample(&hi, &lo).p_value,
            }
        })
        .collect();
    let passing = statistics.iter().filter(|s| s.p_value > 0.01).count();
    let control_detects = statistics.iter().any(|s| s.control_p_value < 0.01);
    Ok(MarkovReport {
        runs: samples.len(),
        statistics,
        passing,
        control_detects,
    })
}
