//! Nested level-loop trees with signs, the loop-coupled supercritical disk,
//! heuristic loop extraction and the statistics built on them.

mod diagnostics;
mod extract;
mod synth;

pub use diagnostics::{
    markov_report, nonindependence_report, HarmonicSample, MarkovConfig, MarkovExperiment,
    MarkovReport, MarkovSample, NonIndependenceConfig, NonIndependenceExperiment,
    NonIndependenceReport, ScaleReport, StatisticReport, MARKOV_STATISTICS,
};
pub use extract::extract_level_loops;
pub use synth::{recover_signs, CoupledDisk, CouplingConfig, CouplingMode, CouplingSampler};

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use num_complex::Complex64;
use rand::Rng;

use crate::error::{bail, Result};
#[allow(unused_imports)]
use crate::float::*;
use crate::lattice::LatticeDomain;

/// Height gap between the two sides of a level loop.
pub const HEIGHT_GAP: f64 = PI;

/// Regions with fewer vertices than a 4 x 4 block (3 x 3 cells) are pruned.
pub const MIN_REGION_VERTICES: usize = 16;

/// One loop of a nested tree, with the region it encloses.
#[derive(Debug, Clone, PartialEq)]
pub struct LoopNode {
    pub id: usize,
    pub parent: Option<usize>,
    pub generation: usize,
    /// +1 or -1; 0 before signs are assigned.
    pub sign: i8,
    /// Sorted vertex ids of the enclosed region.
    pub region: Vec<usize>,
    /// Outer vertex boundary of the region, ordered by angle about its
    /// centroid.
    pub polygon: Vec<usize>,
    pub children: Vec<usize>,
    pub critical_length: f64,
    pub inner_length: f64,
    pub outer_length: f64,
}

/// A forest of nested loops; roots are generation-1 loops.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct LoopTree {
    pub nodes: Vec<LoopNode>,
    /// Regions dropped for being below the resolution floor or for touching
    /// a sibling.
    pub pruned: usize,
}

impl LoopTree {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn roots(&self) -> impl Iterator<Item = &LoopNode> + '_ {
        self.nodes.iter().filter(|n| n.parent.is_none())
    }

    pub fn depth(&self) -> usize {
        self.nodes.iter().map(|n| n.generation).max().unwrap_or(0)
    }

    /// Sum of the signs of `id` and all loops surrounding it.
    pub fn sign_sum(&self, id: usize) -> i64 {
        let mut s = 0i64;
        let mut cur = Some(id);
        while let Some(i) = cur {
            s += i64::from(self.nodes[i].sign);
            cur = self.nodes[i].parent;
        }
        s
    }

    /// Children of `parent` (generation-1 loops when None).
    pub fn children_of(&self, parent: Option<usize>) -> Vec<usize> {
        match parent {
            Some(p) => self.nodes[p].children.clone(),
            None => self
                .nodes
                .iter()
                .filter(|n| n.parent.is_none())
                .map(|n| n.id)
                .collect(),
        }
    }

    pub fn region_mask(&self, n_vertices: usize, id: usize) -> Vec<bool> {
        mask(n_vertices, &self.nodes[id].region)
    }

    /// The side region outside loop `id`: its parent's region (the whole
    /// domain for generation 1) with every sibling region removed.
    pub fn outside_mask(&self, n_vertices: usize, id: usize) -> Vec<bool> {
        let parent = self.nodes[id].parent;
        let mut m = match parent {
            Some(p) => self.region_mask(n_vertices, p),
            None => vec![true; n_vertices],
        };
        for s in self.children_of(parent) {
            for &v in &self.nodes[s].region {
                m[v] = false;
            }
        }
        m
    }

    /// For each vertex, the deepest loop whose region contains it.
    pub fn deepest_containing(&self, n_vertices: usize) -> Vec<Option<usize>> {
        let mut out = vec![None; n_vertices];
        let mut order: Vec<usize> = (0..self.len()).collect();
        order.sort_by_key(|&i| self.nodes[i].generation);
        for i in order {
            for &v in &self.nodes[i].region {
                out[v] = Some(i);
            }
        }
        out
    }

    /// Keeps only loops of generation at most `depth`.
    pub fn truncate(&mut self, depth: usize) {
        let keep: Vec<bool> = self.nodes.iter().map(|n| n.generation <= depth).collect();
        let mut new_id = vec![usize::MAX; self.len()];
        let mut k = 0;
        for (i, &kp) in keep.iter().enumerate() {
            if kp {
                new_id[i] = k;
                k += 1;
            }
        }
        let nodes = core::mem::take(&mut self.nodes);
        self.nodes = nodes
            .into_iter()
            .filter(|n| keep[n.id])
            .map(|mut n| {
                n.id = new_id[n.id];
                n.parent = n.parent.map(|p| new_id[p]);
                n.children = n
                    .children
                    .iter()
                    .filter(|&&c| keep[c])
                    .map(|&c| new_id[c])
                    .collect();
                n
            })
            .collect();
    }

    /// Draws independent fair signs for every loop.
    pub fn assign_fair_signs<R: Rng + ?Sized>(&mut self, rng: &mut R) {
        for n in &mut self.nodes {
            n.sign = if rng.random::<bool>() { 1 } else { -1 };
        }
    }

    /// Checks the nesting invariants against `domain`.
    pub fn validate(&self, domain: &LatticeDomain) -> Result<()> {
        let nv = domain.len();
        let mut owner: Vec<Option<usize>> = vec![None; nv];
        for n in &self.nodes {
            if let Some(p) = n.parent {
                if self.nodes[p].generation + 1 != n.generation {
                    bail!(
                        Geometry,
                        "loop {} has generation {} under parent generation {}",
                        n.id,
                        n.generation,
                        self.nodes[p].generation
                    );
                }
                if !self.nodes[p].children.contains(&n.id) {
                    bail!(Geometry, "loop {} missing from its parent's children", n.id);
                }
            } else if n.generation != 1 {
                bail!(
                    Geometry,
                    "root loop {} has generation {}",
                    n.id,
                    n.generation
                );
            }
            if !(n.sign == 1 || n.sign == -1 || n.sign == 0) {
                bail!(Geometry, "loop {} has sign {}", n.id, n.sign);
            }
        }
        for g in 1..=self.depth() {
            owner.iter_mut().for_each(|o| *o = None);
            for n in self.nodes.iter().filter(|n| n.generation == g) {
                for &v in &n.region {
                    if let Some(o) = owner[v] {
                        bail!(Geometry, "loops {o} and {} overlap at vertex {v}", n.id);
                    }
                    owner[v] = Some(n.id);
                }
            }
            for n in self.nodes.iter().filter(|n| n.generation == g) {
                if let Some(p) = n.parent {
                    let pm = self.region_mask(nv, p);
                    if n.region.iter().chain(&n.polygon).any(|&v| !pm[v]) {
                        bail!(
                            Geometry,
                            "loop {} is not strictly inside its parent {p}",
                            n.id
                        );
                    }
                }
                if n.polygon.iter().any(|&v| owner[v].is_some()) {
                    bail!(Geometry, "loop {} touches a sibling region", n.id);
                }
            }
        }
        Ok(())
    }
}

pub(crate) fn mask(n: usize, vertices: &[usize]) -> Vec<bool> {
    let mut m = vec![false; n];
    for &v in vertices {
        m[v] = true;
    }
    m
}

/// Vertices inside the closed disk of the given center and radius.
pub fn circle_region(domain: &LatticeDomain, center: Complex64, radius: f64) -> Vec<usize> {
    (0..domain.len())
        .filter(|&v| (domain.point(v) - center).norm() <= radius + 1e-12)
        .collect()
}

/// Lattice vertices outside `region` adjacent to it, ordered by angle about
/// the region's centroid.
pub fn outer_boundary(domain: &LatticeDomain, region: &[usize]) -> Vec<usize> {
    let m = mask(domain.len(), region);
    let mut seen = vec![false; domain.len()];
    let mut out = Vec::new();
    for &v in region {
        for u in domain.neighbors(v) {
            if !m[u] && !seen[u] {
                seen[u] = true;
                out.push(u);
            }
        }
    }
    let c = region.iter().map(|&v| domain.point(v)).sum::<Complex64>() / region.len().max(1) as f64;
    out.sort_by(|&a, &b| {
        (domain.point(a) - c)
            .arg()
            .total_cmp(&(domain.point(b) - c).arg())
            .then(a.cmp(&b))
    });
    out
}

/// Incremental construction of a loop tree with pruning and validation.
pub(crate) struct TreeBuilder<'a> {
    domain: &'a LatticeDomain,
    pub tree: LoopTree,
    owner: Vec<Option<usize>>,
}

impl<'a> TreeBuilder<'a> {
    pub fn new(domain: &'a LatticeDomain) -> Self {
        Self {
            domain,
            tree: LoopTree::default(),
            owner: vec![None; domain.len()],
        }
    }

    /// Adds a loop around `region` (sorted vertex ids) under `parent`.
    /// Returns None when the region is below the resolution floor.
    pub fn add(
        &mut self,
        parent: Option<usize>,
        mut region: Vec<usize>,
        sign: i8,
    ) -> Result<Option<usize>> {
        region.sort_unstable();
        region.dedup();
        if region.len() < MIN_REGION_VERTICES {
            self.tree.pruned += 1;
            return Ok(None);
        }
        let d = self.domain;
        if let Some(&v) = region.iter().find(|&&v| d.is_boundary(v)) {
            bail!(
                Geometry,
                "loop region touches the domain boundary at vertex {v}"
            );
        }
        let polygon = outer_boundary(d, &region);
        let generation = match parent {
            Some(p) => {
                let pm = self.tree.region_mask(d.len(), p);
                if region.iter().chain(&polygon).any(|&v| !pm[v]) {
                    bail!(
                        Geometry,
                        "loop region is not strictly inside its parent {p}"
                    );
                }
                self.tree.nodes[p].generation + 1
            }
            None => 1,
        };
        let id = self.tree.nodes.len();
        // Siblings: same parent, disjoint and not adjacent.
        for &v in region.iter().chain(&polygon) {
            if let Some(o) = self.owner[v] {
                if self.tree.nodes[o].parent == parent {
                    bail!(Geometry, "loop regions {o} and {id} overlap or touch");
                }
            }
        }
        for &v in &region {
            self.owner[v] = Some(id);
        }
        if let Some(p) = parent {
            self.tree.nodes[p].children.push(id);
        }
        self.tree.nodes.push(LoopNode {
            id,
            parent,
            generation,
            sign,
            region,
            polygon,
            children: Vec::new(),
            critical_length: 0.0,
            inner_length: 0.0,
            outer_length: 0.0,
        });
        Ok(Some(id))
    }

    pub fn finish(self) -> LoopTree {
        self.tree
    }
}

/// A circle of a fixed loop configuration; `parent` indexes an earlier entry.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CircleSpec {
    pub center: Complex64,
    pub radius: f64,
    pub parent: Option<usize>,
}

/// Where loop geometry comes from.
#[derive(Debug, Clone, PartialEq)]
pub enum LoopSource {
    /// Deterministic circles.
    Fixed(Vec<CircleSpec>),
    /// Random disjoint circles sized by the parent's conformal radius at the
    /// child center (a cheap proxy).
    RandomCircles { max_children: usize },
    /// Level loops extracted from an auxiliary zero-boundary GFF.
    Gff,
}

impl LoopSource {
    /// A single circle centered at 0.
    pub fn single_circle(radius: f64) -> Self {
        LoopSource::Fixed(vec![CircleSpec {
            center: Complex64::new(0.0, 0.0),
            radius,
            parent: None,
        }])
    }

    /// A nested configuration with `depth` generations of two children each.
    pub fn nested_circles(depth: usize) -> Self {
        let mut specs = vec![CircleSpec {
            center: Complex64::new(0.0, 0.0),
            radius: 0.8,
            parent: None,
        }];
        let mut frontier = vec![0usize];
        for _ in 1..depth {
            let mut next = Vec::new();
            for &p in &frontier {
                let s = specs[p];
                for dir in [-1.0, 1.0] {
                    let r = s.radius * 0.4;
                    specs.push(CircleSpec {
                        center: s.center + Complex64::new(dir * s.radius * 0.5, 0.0),
                        radius: r,
                        parent: Some(p),
                    });
                    next.push(specs.len() - 1);
                }
            }
            frontier = next;
        }
        LoopSource::Fixed(specs)
    }
}

/// Builds the tree of a fixed circle configuration, up to `depth`.
pub fn fixed_tree(domain: &LatticeDomain, specs: &[CircleSpec], depth: usize) -> Result<LoopTree> {
    let mut b = TreeBuilder::new(domain);
    let mut ids: Vec<Option<usize>> = Vec::with_capacity(specs.len());
    let mut gens: Vec<usize> = Vec::with_capacity(specs.len());
    for (i, s) in specs.iter().enumerate() {
        let (parent, g) = match s.parent {
            Some(p) if p >= i => bail!(InvalidArgument, "circle {i} names a later parent {p}"),
            Some(p) => match ids[p] {
                Some(pid) => (Some(pid), gens[p] + 1),
                None => {
                    ids.push(None);
                    gens.push(gens[p] + 1);
                    b.tree.pruned += 1;
                    continue;
                }
            },
            None => (None, 1),
        };
        gens.push(g);
        if g > depth {
            ids.push(None);
            continue;
        }
        ids.push(b.add(parent, circle_region(domain, s.center, s.radius), 0)?);
    }
    Ok(b.finish())
}

/// Random disjoint circles, nested to `depth`.
pub fn random_circle_tree<R: Rng + ?Sized>(
    domain: &LatticeDomain,
    depth: usize,
    max_children: usize,
    rng: &mut R,
) -> Result<LoopTree> {
    let h = domain.h();
    let mut b = TreeBuilder::new(domain);
    // (center, radius, tree id) of regions to fill; the root is the disk.
    let mut frontier: Vec<(Complex64, f64, Option<usize>)> =
        vec![(Complex64::new(0.0, 0.0), 1.0 - 2.0 * h, None)];
    for _ in 0..depth {
        let mut next = Vec::new();
        for &(c, big_r, parent) in &frontier {
            let mut placed: Vec<(Complex64, f64)> = Vec::new();
            for _ in 0..max_children {
                let rho = big_r * 0.6 * rng.random::<f64>().sqrt();
                let p = c + Complex64::from_polar(rho, 2.0 * PI * rng.random::<f64>());
                let cr = big_r * (1.0 - (rho / big_r).powi(2));
                let r = (cr * (0.2 + 0.3 * rng.random::<f64>())).min(big_r - rho - 3.0 * h);
                if r < 2.0 * h
                    || placed
                        .iter()
                        .any(|&(q, s)| (p - q).norm() < r + s + 3.0 * h)
                {
                    continue;
                }
                if let Some(id) = b.add(parent, circle_region(domain, p, r), 0)? {
                    placed.push((p, r));
                    next.push((p, r, Some(id)));
                }
            }
        }
        frontier = next;
    }
    Ok(b.finish())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Streams;

    #[test]
    fn fixed_nested_tree() {
        let d = LatticeDomain::disk_grid(65).unwrap();
        let LoopSource::Fixed(specs) = LoopSource::nested_circles(3) else {
            unreachable!()
        };
        let t = fixed_tree(&d, &specs, 3).unwrap();
        assert_eq!(t.len(), 7);
        assert_eq!(t.depth(), 3);
        t.validate(&d).unwrap();
        let mut t2 = t.clone();
        t2.truncate(2);
        assert_eq!(t2.len(), 3);
        t2.validate(&d).unwrap();
        assert!(fixed_tree(&d, &specs[..1], 0).unwrap().is_empty());
    }

    #[test]
    fn overlapping_circles_rejected() {
        let d = LatticeDomain::disk_grid(33).unwrap();
        let specs = [
            CircleSpec {
                center: Complex64::new(-0.2, 0.0),
                radius: 0.3,
                parent: None,
            },
            CircleSpec {
                center: Complex64::new(0.2, 0.0),
                radius: 0.3,
                parent: None,
            },
        ];
        assert!(fixed_tree(&d, &specs, 1).is_err());
        let touching = [CircleSpec {
            center: Complex64::new(0.0, 0.0),
            radius: 1.0,
            parent: None,
        }];
        assert!(fixed_tree(&d, &touching, 1).is_err());
    }

    #[test]
    fn random_circles_are_valid() {
        let d = LatticeDomain::disk_grid(65).unwrap();
        let st = Streams::new(3);
        for i in 0..20 {
            let mut rng = st.child("rc", i).stream("loops");
            let t = random_circle_tree(&d, 3, 4, &mut rng).unwrap();
            t.validate(&d).unwrap();
        }
    }

    #[test]
    fn sign_sums_and_masks() {
        let d = LatticeDomain::disk_grid(65).unwrap();
        let LoopSource::Fixed(specs) = LoopSource::nested_circles(2) else {
            unreachable!()
        };
        let mut t = fixed_tree(&d, &specs, 2).unwrap();
        t.nodes[0].sign = 1;
        t.nodes[1].sign = -1;
        t.nodes[2].sign = -1;
        assert_eq!(t.sign_sum(0), 1);
        assert_eq!(t.sign_sum(1), 0);
        let out = t.outside_mask(d.len(), 1);
        assert!(t.nodes[1].region.iter().all(|&v| !out[v]));
        assert!(t.nodes[2].region.iter().all(|&v| !out[v]));
        assert!(t.nodes[1].polygon.iter().all(|&v| out[v]));
        let deep = t.deepest_containing(d.len());
        assert_eq!(deep[t.nodes[1].region[0]], Some(1));
    }
}
