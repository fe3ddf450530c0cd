//! Triangulations of the disk decorated by fully packed loops at tiny sizes:
//! exhaustive enumeration, gasket decomposition into rings, the recursive
//! sampler with its modified ring step, and a perimeter-only branching
//! version of it.
//!
//! Maps are rooted on a boundary half-edge and compared up to
//! root-preserving orientation-preserving isomorphism.

mod count;
mod enumerate;
mod gasket;
mod sample;

pub use count::{ring_count, WeightTable};
pub use enumerate::{enumerate_decorated_maps, EnumeratedMap, Enumeration, EnumerationCaps};
pub use gasket::{gasket_decompose, reassemble, Decomposition, Filling, Gasket, Ring};
pub use sample::{
    survival_experiment, HoleProxy, PerimeterLaws, PerimeterSampler, RingAnchor, RingMode,
    RingProxy, StructuralSample, StructuralSampler, SurvivalConfig, SurvivalPoint, SurvivalReport,
};

use alloc::collections::VecDeque;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{bail, Result};

pub(crate) const NONE: usize = usize::MAX;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum FaceKind {
    Boundary,
    Triangle,
    /// A face of a gasket, to be filled by a ring.
    Hole,
}

impl FaceKind {
    fn code(self) -> u32 {
        match self {
            FaceKind::Boundary => 0,
            FaceKind::Triangle => 1,
            FaceKind::Hole => 2,
        }
    }
}

/// A rooted planar map stored as half-edges. Each face is a cycle of `next`
/// (face on the left), each edge a `twin` pair, and `root` is a half-edge of
/// the boundary face. The map with no half-edges is the single vertex,
/// whose boundary has perimeter 0.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HalfEdgeMap {
    pub next: Vec<usize>,
    pub twin: Vec<usize>,
    pub face: Vec<usize>,
    pub face_kind: Vec<FaceKind>,
    pub root: usize,
}

impl HalfEdgeMap {
    pub fn vertex() -> Self {
        Self {
            next: Vec::new(),
            twin: Vec::new(),
            face: Vec::new(),
            face_kind: vec![FaceKind::Boundary],
            root: NONE,
        }
    }

    /// A single k-gon boundary face with no edges glued, for building maps.
    pub(crate) fn open_polygon(k: usize) -> Self {
        Self {
            next: (0..k).map(|i| (i + 1) % k).collect(),
            twin: vec![NONE; k],
            face: vec![0; k],
            face_kind: vec![FaceKind::Boundary],
            root: if k == 0 { NONE } else { 0 },
        }
    }

    pub fn is_vertex(&self) -> bool {
        self.next.is_empty()
    }

    pub fn len(&self) -> usize {
        self.next.len()
    }

    pub fn is_empty(&self) -> bool {
        self.next.is_empty()
    }

    /// Appends a face of `kind` with `degree` fresh half-edges; returns the
    /// first.
    pub(crate) fn add_face(&mut self, kind: FaceKind, degree: usize) -> usize {
        let f = self.face_kind.len();
        self.face_kind.push(kind);
        let h0 = self.next.len();
        for i in 0..degree {
            self.next.push(h0 + (i + 1) % degree);
            self.twin.push(NONE);
            self.face.push(f);
        }
        h0
    }

    /// Builds faces as the cycles of `next`, numbered from the face of
    /// `root`, each taking the kind of its first half-edge.
    pub(crate) fn from_cycles(
        next: Vec<usize>,
        twin: Vec<usize>,
        kind: &[FaceKind],
        root: usize,
    ) -> Self {
        let n = next.len();
        if n == 0 {
            return HalfEdgeMap::vertex();
        }
        let mut m = HalfEdgeMap {
            next,
            twin,
            face: vec![NONE; n],
            face_kind: Vec::new(),
            root,
        };
        for h in core::iter::once(root).chain(0..n) {
            if m.face[h] != NONE {
                continue;
            }
            let f = m.face_kind.len();
            m.face_kind.push(kind[h]);
            for g in m.face_cycle(h) {
                m.face[g] = f;
            }
        }
        m
    }

    pub(crate) fn glue(&mut self, a: usize, b: usize) {
        self.twin[a] = b;
        self.twin[b] = a;
    }

    pub fn perimeter(&self) -> usize {
        if self.is_vertex() {
            0
        } else {
            self.face_cycle(self.root).len()
        }
    }

    /// The half-edges of the face of `h`, starting at `h`.
    pub fn face_cycle(&self, h: usize) -> Vec<usize> {
        let mut out = vec![h];
        let mut g = self.next[h];
        while g != h {
            out.push(g);
            g = self.next[g];
        }
        out
    }

    /// One half-edge of each face, indexed by face id.
    pub fn face_representatives(&self) -> Vec<usize> {
        let mut rep = vec![NONE; self.face_kind.len()];
        for h in (0..self.len()).rev() {
            rep[self.face[h]] = h;
        }
        rep
    }

    pub fn faces_of_kind(&self, kind: FaceKind) -> usize {
        self.face_kind.iter().filter(|&&k| k == kind).count()
    }

    pub fn vertex_count(&self) -> usize {
        if self.is_vertex() {
            return 1;
        }
        let mut seen = vec![false; self.len()];
        let mut v = 0;
        for h in 0..self.len() {
            if seen[h] {
                continue;
            }
            v += 1;
            let mut g = h;
            while !seen[g] {
                seen[g] = true;
                g = self.next[self.twin[g]];
            }
        }
        v
    }

    /// V - E + F.
    pub fn euler_characteristic(&self) -> i64 {
        self.vertex_count() as i64 - (self.len() / 2) as i64 + self.face_kind.len() as i64
    }

    /// Permutation, involution and face bookkeeping checks, connectivity and
    /// sphere topology.
    pub fn validate(&self) -> Result<()> {
        let n = self.len();
        if self.twin.len() != n || self.face.len() != n {
            bail!(Geometry, "half-edge arrays have different lengths");
        }
        if n == 0 {
            if self.face_kind.len() != 1 {
                bail!(Geometry, "the vertex map has exactly one face");
            }
            return Ok(());
        }
        let mut hit = vec![false; n];
        for h in 0..n {
            let (g, t) = (self.next[h], self.twin[h]);
            if g >= n || t >= n || hit[g] {
                bail!(Geometry, "next is not a permutation at half-edge {h}");
            }
            hit[g] = true;
            if t == h || self.twin[t] != h {
                bail!(Geometry, "twin is not a fixed-point-free involution at {h}");
            }
            if self.face[g] != self.face[h] {
                bail!(Geometry, "face labels disagree along next at {h}");
            }
        }
        let rep = self.face_representatives();
        if rep.contains(&NONE) {
            bail!(Geometry, "a face has no half-edges");
        }
        let mut seen_face = vec![false; self.face_kind.len()];
        for h in 0..n {
            let f = self.face[h];
            if !seen_face[f] {
                seen_face[f] = true;
                if self.face_cycle(h).len() != self.face.iter().filter(|&&x| x == f).count() {
                    bail!(Geometry, "face {f} is not a single next-cycle");
                }
            }
        }
        if self.root >= n || self.face_kind[self.face[self.root]] != FaceKind::Boundary {
            bail!(Geometry, "root must be a boundary half-edge");
        }
        if self.faces_of_kind(FaceKind::Boundary) != 1 {
            bail!(Geometry, "exactly one boundary face expected");
        }
        if self.canonical_order().len() != n {
            bail!(Geometry, "map is disconnected");
        }
        if self.euler_characteristic() != 2 {
            bail!(
                Geometry,
                "Euler characteristic {} != 2",
                self.euler_characteristic()
            );
        }
        Ok(())
    }

    /// Half-edges in breadth-first order from the root along next and twin.
    pub fn canonical_order(&self) -> Vec<usize> {
        if self.is_vertex() {
            return Vec::new();
        }
        let mut label = vec![NONE; self.len()];
        let mut order = Vec::with_capacity(self.len());
        let mut q = VecDeque::from([self.root]);
        label[self.root] = 0;
        order.push(self.root);
        while let Some(h) = q.pop_front() {
            for g in [self.next[h], self.twin[h]] {
                if label[g] == NONE {
                    label[g] = order.len();
                    order.push(g);
                    q.push_back(g);
                }
            }
        }
        order
    }

    /// A code equal for two maps iff they are isomorphic as rooted maps
    /// with face kinds and the per-half-edge tags.
    pub fn canonical_code(&self, tag: impl Fn(usize) -> u32) -> Vec<u32> {
        let order = self.canonical_order();
        let mut label = vec![0u32; self.len()];
        for (i, &h) in order.iter().enumerate() {
            label[h] = i as u32;
        }
        let mut code = Vec::with_capacity(4 * order.len() + 1);
        code.push(order.len() as u32);
        for &h in &order {
            code.push(label[self.next[h]]);
            code.push(label[self.twin[h]]);
            code.push(self.face_kind[self.face[h]].code());
            code.push(tag(h));
        }
        code
    }

    /// The copy relabeled in canonical order, faces numbered by first
    /// appearance; also returns the old index of each new half-edge.
    pub fn canonical_relabel(&self) -> (HalfEdgeMap, Vec<usize>) {
        let order = self.canonical_order();
        let mut new = vec![NONE; self.len()];
        for (i, &h) in order.iter().enumerate() {
            new[h] = i;
        }
        let mut fnew = vec![NONE; self.face_kind.len()];
        let mut kinds = Vec::new();
        let mut face = Vec::with_capacity(order.len());
        for &h in &order {
            let f = self.face[h];
            if fnew[f] == NONE {
                fnew[f] = kinds.len();
                kinds.push(self.face_kind[f]);
            }
            face.push(fnew[f]);
        }
        if self.is_vertex() {
            kinds = vec![FaceKind::Boundary];
        }
        let m = HalfEdgeMap {
            next: order.iter().map(|&h| new[self.next[h]]).collect(),
            twin: order.iter().map(|&h| new[self.twin[h]]).collect(),
            face,
            face_kind: kinds,
            root: if self.is_vertex() { NONE } else { 0 },
        };
        (m, order)
    }

    /// The map obtained by deleting every edge whose half-edges are not
    /// kept. Faces all of whose half-edges are kept retain their kind;
    /// merged faces get `merged_kind`, except the face of `root`, which
    /// becomes the boundary. Returns the map and the old index of each kept
    /// half-edge. With nothing kept the result is the vertex map.
    pub(crate) fn restrict(
        &self,
        keep: &[bool],
        root: usize,
        merged_kind: FaceKind,
    ) -> (HalfEdgeMap, Vec<usize>) {
        let old: Vec<usize> = (0..self.len()).filter(|&h| keep[h]).collect();
        if old.is_empty() {
            return (HalfEdgeMap::vertex(), old);
        }
        let mut new = vec![NONE; self.len()];
        for (i, &h) in old.iter().enumerate() {
            new[h] = i;
        }
        let next: Vec<usize> = old
            .iter()
            .map(|&h| {
                let mut g = self.next[h];
                while !keep[g] {
                    g = self.next[self.twin[g]];
                }
                new[g]
            })
            .collect();
        let twin: Vec<usize> = old.iter().map(|&h| new[self.twin[h]]).collect();
        let mut m = HalfEdgeMap {
            next,
            twin,
            face: vec![NONE; old.len()],
            face_kind: Vec::new(),
            root: new[root],
        };
        let mut order: Vec<usize> = vec![m.root];
        order.extend(0..old.len());
        for h in order {
            if m.face[h] != NONE {
                continue;
            }
            let f = m.face_kind.len();
            let cyc = m.face_cycle(h);
            let intact = cyc.len() == self.face_cycle(old[h]).len()
                && cyc.iter().all(|&g| self.face[old[g]] == self.face[old[h]]);
            let kind = if f == 0 {
                FaceKind::Boundary
            } else if intact {
                self.face_kind[self.face[old[h]]]
            } else {
                merged_kind
            };
            m.face_kind.push(kind);
            for g in cyc {
                m.face[g] = f;
            }
        }
        (m, old)
    }
}

/// A triangulation of the disk with a fully packed loop configuration: each
/// triangle is crossed by exactly one loop, through two of its edges, and
/// no loop crosses the boundary.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DecoratedMap {
    pub map: HalfEdgeMap,
    /// Whether the edge of each half-edge is crossed by a loop.
    pub crossed: Vec<bool>,
}

impl DecoratedMap {
    pub fn vertex() -> Self {
        Self {
            map: HalfEdgeMap::vertex(),
            crossed: Vec::new(),
        }
    }

    pub fn perimeter(&self) -> usize {
        self.map.perimeter()
    }

    pub fn triangle_count(&self) -> usize {
        self.map.faces_of_kind(FaceKind::Triangle)
    }

    /// Loops as lists of triangle face ids in traversal order.
    pub fn loops(&self) -> Vec<Vec<usize>> {
        let m = &self.map;
        let rep = m.face_representatives();
        let mut seen = vec![false; m.face_kind.len()];
        let mut out = Vec::new();
        for f in 0..m.face_kind.len() {
            if m.face_kind[f] != FaceKind::Triangle || seen[f] {
                continue;
            }
            let Some(&start) = m.face_cycle(rep[f]).iter().find(|&&h| self.crossed[h]) else {
                continue;
            };
            let mut lp = Vec::new();
            let mut entry = start;
            loop {
                let face = m.face[entry];
                if seen[face] {
                    break;
                }
                seen[face] = true;
                lp.push(face);
                let exit = m
                    .face_cycle(entry)
                    .into_iter()
                    .skip(1)
                    .find(|&h| self.crossed[h])
                    .unwrap_or(entry);
                entry = m.twin[exit];
            }
            out.push(lp);
        }
        out
    }

    pub fn loop_count(&self) -> usize {
        self.loops().len()
    }

    /// log(e^{-beta #triangles} 2^{#loops}).
    pub fn log_weight(&self, beta: f64) -> f64 {
        -beta * self.triangle_count() as f64 + self.loop_count() as f64 * core::f64::consts::LN_2
    }

    pub fn canonical_code(&self) -> Vec<u32> {
        self.map.canonical_code(|h| u32::from(self.crossed[h]))
    }

    /// Map validity plus the full-packing conditions.
    pub fn validate(&self) -> Result<()> {
        let m = &self.map;
        m.validate()?;
        if self.crossed.len() != m.len() {
            bail!(Geometry, "crossing flags have the wrong length");
        }
        if m.is_vertex() {
            return Ok(());
        }
        for h in 0..m.len() {
            if self.crossed[h] != self.crossed[m.twin[h]] {
                bail!(
                    Geometry,
                    "edge of half-edge {h} is crossed from one side only"
                );
            }
        }
        let rep = m.face_representatives();
        for (f, &kind) in m.face_kind.iter().enumerate() {
            let cyc = m.face_cycle(rep[f]);
            let c = cyc.iter().filter(|&&h| self.crossed[h]).count();
            match kind {
                FaceKind::Boundary if c != 0 => bail!(Geometry, "a loop crosses the boundary"),
                FaceKind::Triangle if cyc.len() != 3 => {
                    bail!(Geometry, "face {f} is not a triangle")
                }
                FaceKind::Triangle if c != 2 => {
                    bail!(Geometry, "triangle {f} is crossed {c} times")
                }
                FaceKind::Hole => bail!(Geometry, "decorated maps have no holes"),
                _ => {}
            }
        }
        Ok(())
    }

    /// Loop index of each face (None for the boundary face).
    pub fn loop_membership(&self) -> Vec<Option<usize>> {
        let mut out = vec![None; self.map.face_kind.len()];
        for (i, l) in self.loops().iter().enumerate() {
            for &f in l {
                out[f] = Some(i);
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn vertex_map_is_valid() {
        let v = DecoratedMap::vertex();
        v.validate().unwrap();
        assert_eq!(v.perimeter(), 0);
        assert_eq!(v.map.euler_characteristic(), 2);
    }

    #[test]
    fn single_triangle_with_folded_edges() {
        // Boundary 1-gon glued to a triangle whose other two sides are glued.
        let mut m = HalfEdgeMap::open_polygon(1);
        let t = m.add_face(FaceKind::Triangle, 3);
        m.glue(0, t);
        m.glue(t + 1, t + 2);
        let d = DecoratedMap {
            crossed: vec![false, false, true, true],
            map: m,
        };
        d.validate().unwrap();
        assert_eq!(d.loop_count(), 1);
        assert_eq!(d.perimeter(), 1);
    }

    #[test]
    fn restrict_and_relabel() {
        let mut m = HalfEdgeMap::open_polygon(1);
        let t = m.add_face(FaceKind::Triangle, 3);
        m.glue(0, t);
        m.glue(t + 1, t + 2);
        let keep = vec![true, true, false, false];
        let (r, old) = m.restrict(&keep, 0, FaceKind::Hole);
        assert_eq!(old, vec![0, 1]);
        r.validate().unwrap();
        assert_eq!(r.face_kind, vec![FaceKind::Boundary, FaceKind::Hole]);
        let (c, _) = r.canonical_relabel();
        assert_eq!(c.canonical_code(|_| 0), r.canonical_code(|_| 0));
    }
}
