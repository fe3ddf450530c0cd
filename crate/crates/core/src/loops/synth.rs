//! Exact synthesis of the supercritical disk coupled with nested signed
//! loops, and sign recovery from inner and outer boundary lengths.

use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;

use super::{
    extract_level_loops, fixed_tree, mask, random_circle_tree, LoopSource, LoopTree, HEIGHT_GAP,
};
use crate::disk::{DiskConfig, DiskField, DiskSampler};
use crate::error::{bail, Result};
#[allow(unused_imports)]
use crate::float::*;
use crate::gff::{DirichletSolver, FieldOrigin, LatticeField};
use crate::gmc::{LoopEvaluator, LoopSide};
use crate::lattice::LatticeDomain;
use crate::params::{ParamSet, Regime};
use crate::rng::Streams;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CouplingMode {
    /// Psi built from the loops: piecewise constant plus leaf infills.
    Synthesis,
    /// Loops read off an existing Psi.
    Extraction,
}

/// A supercritical disk together with a nested signed loop tree.
#[derive(Debug, Clone)]
pub struct CoupledDisk {
    pub phi: DiskField,
    pub tree: LoopTree,
    /// The piecewise-constant Psi_n, equal to gap * (sum of signs of the
    /// loops surrounding a vertex).
    pub psi_partial: LatticeField,
    pub mode: CouplingMode,
    pub depth: usize,
    /// Mollification scale of the loop lengths.
    pub epsilon: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CouplingConfig {
    pub disk: DiskConfig,
    pub depth: usize,
    pub source: LoopSource,
}

impl Default for CouplingConfig {
    fn default() -> Self {
        Self {
            disk: DiskConfig::default(),
            depth: 1,
            source: LoopSource::Gff,
        }
    }
}

/// Sampler for coupled disks. For fixed loop geometry the tree and the leaf
/// factorizations are built once.
#[derive(Debug, Clone)]
pub struct CouplingSampler {
    params: ParamSet,
    config: CouplingConfig,
    disk: DiskSampler,
    fixed: Option<(LoopTree, Vec<Option<DirichletSolver>>)>,
}

impl CouplingSampler {
    pub fn new(params: ParamSet, config: CouplingConfig) -> Result<Self> {
        if params.regime() == Regime::Subcritical {
            bail!(
                ParameterOutOfRange,
                "coupling needs c_l <= 25, got {}",
                params.c_l()
            );
        }
        if config.depth == 0 {
            bail!(InvalidArgument, "depth must be at least 1");
        }
        let disk = DiskSampler::new(config.disk)?;
        let fixed = match &config.source {
            LoopSource::Fixed(specs) => {
                let tree = fixed_tree(disk.disk_domain(), specs, config.depth)?;
                let solvers = leaf_solvers(disk.disk_domain(), &tree)?;
                Some((tree, solvers))
            }
            _ => None,
        };
        Ok(Self {
            params,
            config,
            disk,
            fixed,
        })
    }

    pub fn params(&self) -> ParamSet {
        self.params
    }

    pub fn config(&self) -> &CouplingConfig {
        &self.config
    }

    pub fn disk_sampler(&self) -> &DiskSampler {
        &self.disk
    }

    pub fn domain(&self) -> &Arc<LatticeDomain> {
        self.disk.disk_domain()
    }

    /// Samples with fair signs.
    pub fn sample(&self, boundary_length: f64, streams: &Streams) -> Result<CoupledDisk> {
        self.sample_with_signs(boundary_length, streams, None)
    }

    /// Samples with the given per-loop signs (in tree order) instead of fair
    /// coins. Every other draw uses the same streams either way.
    pub fn sample_with_signs(
        &self,
        boundary_length: f64,
        streams: &Streams,
        signs: Option<&[i8]>,
    ) -> Result<CoupledDisk> {
        let d = self.domain().clone();
        let crit = self
            .disk
            .sample_critical(boundary_length, &mut streams.stream("critical"))?
            .disk;
        let owned;
        let (mut tree, solvers): (LoopTree, &[Option<DirichletSolver>]) =
            match (&self.fixed, &self.config.source) {
                (Some((t, s)), _) => (t.clone(), s),
                (None, LoopSource::RandomCircles { max_children }) => {
                    let t = random_circle_tree(
                        &d,
                        self.config.depth,
                        *max_children,
                        &mut streams.stream("loops"),
                    )?;
                    owned = leaf_solvers(&d, &t)?;
                    (t, &owned)
                }
                (None, _) => {
                    let aux = self.disk.sample_zero_boundary(&mut streams.stream("loops"));
                    let t = extract_level_loops(&aux, self.config.depth)?;
                    owned = leaf_solvers(&d, &t)?;
                    (t, &owned)
                }
            };
        tree.assign_fair_signs(&mut streams.stream("signs"));
        if let Some(s) = signs {
            if s.len() != tree.len() || s.iter().any(|&x| x != 1 && x != -1) {
                bail!(
                    InvalidArgument,
                    "sign vector must hold +-1 for each of the {} loops",
                    tree.len()
                );
            }
            for (n, &x) in tree.nodes.iter_mut().zip(s) {
                n.sign = x;
            }
        }
        let deepest = tree.deepest_containing(d.len());
        let offsets: Vec<f64> = (0..tree.len())
            .map(|i| HEIGHT_GAP * tree.sign_sum(i) as f64)
            .collect();
        let partial: Vec<f64> = deepest
            .iter()
            .map(|o| o.map_or(0.0, |i| offsets[i]))
            .collect();
        let mut psi = partial.clone();
        let mut infill = streams.stream("infill");
        let mut noise = vec![0.0; d.len()];
        for s in solvers.iter().flatten() {
            s.add_noise(&mut noise, &mut infill);
        }
        for (p, n) in psi.iter_mut().zip(&noise) {
            *p += n;
        }
        let psi = LatticeField {
            domain: d.clone(),
            values: psi,
            origin: FieldOrigin::Derived,
        };
        let phi = DiskField::compose(self.params, crit, psi)?;
        let eps = self.config.disk.epsilon;
        fill_lengths(&phi, &mut tree, eps)?;
        Ok(CoupledDisk {
            phi,
            tree,
            psi_partial: LatticeField {
                domain: d,
                values: partial,
                origin: FieldOrigin::Derived,
            },
            mode: CouplingMode::Synthesis,
            depth: self.config.depth,
            epsilon: eps,
        })
    }
}

/// Zero-boundary infill solvers for the leaves of `tree`: each childless
/// loop region, or the whole disk when the tree is empty. The rim of each
/// region stays at zero.
fn leaf_solvers(d: &Arc<LatticeDomain>, tree: &LoopTree) -> Result<Vec<Option<DirichletSolver>>> {
    let mut regions: Vec<Vec<usize>> = tree
        .nodes
        .iter()
        .filter(|n| n.children.is_empty())
        .map(|n| n.region.clone())
        .collect();
    if tree.is_empty() {
        regions.push((0..d.len()).collect());
    }
    regions
        .into_iter()
        .map(|r| {
            let m = mask(d.len(), &r);
            let unknowns: Vec<usize> = r
                .into_iter()
                .filter(|&v| !d.is_boundary(v) && d.neighbors(v).all(|u| m[u]))
                .collect();
            if unknowns.is_empty() {
                Ok(None)
            } else {
                DirichletSolver::new(d.clone(), unknowns).map(Some)
            }
        })
        .collect()
}

fn fill_lengths(phi: &DiskField, tree: &mut LoopTree, eps: f64) -> Result<()> {
    let nv = phi.domain().len();
    for i in 0..tree.len() {
        let region = tree.region_mask(nv, i);
        let outside = tree.outside_mask(nv, i);
        let ev = LoopEvaluator::new(phi, &region, eps)?;
        tree.nodes[i].critical_length = ev.critical().total;
        tree.nodes[i].inner_length = ev.side(&region, LoopSide::Inside)?.total;
        tree.nodes[i].outer_length = ev.side(&outside, LoopSide::Outside)?.total;
    }
    Ok(())
}

impl CoupledDisk {
    /// Reads loops off the Psi constituent of a supercritical field and
    /// measures their lengths from the field itself.
    pub fn extract(phi: DiskField, depth: usize, epsilon: f64) -> Result<Self> {
        let Some(c) = phi.constituents.as_ref() else {
            bail!(
                InvalidArgument,
                "extraction needs the field's Psi constituent"
            );
        };
        let mut tree = extract_level_loops(&c.zero_boundary, depth)?;
        fill_lengths(&phi, &mut tree, epsilon)?;
        let d = phi.domain().clone();
        let deepest = tree.deepest_containing(d.len());
        let partial = deepest
            .iter()
            .map(|o| o.map_or(0.0, |i| HEIGHT_GAP * tree.sign_sum(i) as f64))
            .collect();
        Ok(Self {
            tree,
            psi_partial: LatticeField {
                domain: d,
                values: partial,
                origin: FieldOrigin::Derived,
            },
            mode: CouplingMode::Extraction,
            depth,
            epsilon,
            phi,
        })
    }
}

/// Recovers each loop's sign as the sign of log(inner / outer length),
/// recomputing both lengths from the field.
pub fn recover_signs(coupled: &CoupledDisk) -> Result<Vec<i8>> {
    let d = coupled.phi.domain();
    let nv = d.len();
    (0..coupled.tree.len())
        .map(|i| {
            let region = coupled.tree.region_mask(nv, i);
            let outside = coupled.tree.outside_mask(nv, i);
            let ev = LoopEvaluator::new(&coupled.phi, &region, coupled.epsilon)?;
            let inner = ev.side(&region, LoopSide::Inside)?.total;
            let outer = ev.side(&outside, LoopSide::Outside)?.total;
            let r = inner / outer;
            if (r - 1.0).abs() < 1e-6 {
                bail!(
                    Ambiguous,
                    "loop {i}: inner/outer length ratio {r} does not determine a sign"
                );
            }
            Ok(if r.ln() > 0.0 { 1 } else { -1 })
        })
        .collect()
}
