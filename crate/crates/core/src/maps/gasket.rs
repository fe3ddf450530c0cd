//! Gasket decomposition: a decorated map is its gasket, plus for every hole
//! the ring of triangles crossed by the outermost loop there and the
//! decorated map the ring encloses.

use alloc::collections::VecDeque;
use alloc::vec;
use alloc::vec::Vec;

use super::{DecoratedMap, FaceKind, HalfEdgeMap, NONE};
use crate::error::{bail, Result};

/// A cyclic band of triangles crossed by one loop. `word[i]` is true for an
/// out-triangle (one side on the outer boundary) and false for an
/// in-triangle; `word[0]` is the out-triangle on the hole root.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Ring {
    pub word: Vec<bool>,
}

impl Ring {
    pub fn new(word: Vec<bool>) -> Result<Self> {
        if word.first() != Some(&true) {
            bail!(InvalidArgument, "a ring word starts with an out-triangle");
        }
        Ok(Self { word })
    }

    pub fn outer_perimeter(&self) -> usize {
        self.word.iter().filter(|&&o| o).count()
    }

    pub fn inner_perimeter(&self) -> usize {
        self.word.len() - self.outer_perimeter()
    }

    pub fn triangle_count(&self) -> usize {
        self.word.len()
    }
}

/// A map whose inner faces are all holes; `holes` lists each hole's root,
/// its half-edge with the least canonical label, in increasing order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Gasket {
    pub map: HalfEdgeMap,
    pub holes: Vec<usize>,
}

impl Gasket {
    /// Canonically relabels `map` and lists its holes. Also returns, for
    /// every half-edge of the result, its index in `map`.
    pub fn new(map: &HalfEdgeMap) -> Result<(Self, Vec<usize>)> {
        if map.face_kind.iter().skip(1).any(|&k| k != FaceKind::Hole) {
            bail!(
                Geometry,
                "gasket faces other than the boundary must be holes"
            );
        }
        let (m, order) = map.canonical_relabel();
        let holes = m.face_representatives().into_iter().skip(1).collect();
        Ok((Self { map: m, holes }, order))
    }

    pub fn hole_perimeters(&self) -> Vec<usize> {
        self.holes
            .iter()
            .map(|&h| self.map.face_cycle(h).len())
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Filling {
    pub ring: Ring,
    /// Rooted on the base of the first in-triangle; the vertex map when the
    /// ring has none.
    pub interior: DecoratedMap,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Decomposition {
    pub gasket: Gasket,
    /// One per hole, in the order of `gasket.holes`.
    pub fillings: Vec<Filling>,
}

/// Splits a valid decorated map into gasket, rings and interiors.
pub fn gasket_decompose(dm: &DecoratedMap) -> Result<Decomposition> {
    let m = &dm.map;
    if m.is_vertex() {
        return Ok(Decomposition {
            gasket: Gasket {
                map: HalfEdgeMap::vertex(),
                holes: Vec::new(),
            },
            fillings: Vec::new(),
        });
    }
    let n = m.len();
    // Vertices reachable from the boundary without crossing a loop, as
    // breadth-first search over vertex rotations.
    let mut seen = vec![false; n];
    let mut in_gasket = vec![false; n];
    let mut q = VecDeque::from([m.root]);
    while let Some(h0) = q.pop_front() {
        if seen[h0] {
            continue;
        }
        let mut h = h0;
        loop {
            seen[h] = true;
            if !dm.crossed[h] {
                in_gasket[h] = true;
                in_gasket[m.twin[h]] = true;
                let t = m.twin[h];
                if !seen[t] {
                    q.push_back(t);
                }
            }
            h = m.next[m.twin[h]];
            if h == h0 {
                break;
            }
        }
    }
    let (raw, old) = m.restrict(&in_gasket, m.root, FaceKind::Hole);
    if raw.face_kind.contains(&FaceKind::Triangle) {
        bail!(Geometry, "a triangle lies outside every loop");
    }
    let (gasket, order) = Gasket::new(&raw)?;
    let original = |g: usize| old[order[g]];
    let mut fillings = Vec::with_capacity(gasket.holes.len());
    for &r in &gasket.holes {
        let cycle = gasket.map.face_cycle(r);
        fillings.push(extract_filling(
            dm,
            &cycle.iter().map(|&g| original(g)).collect::<Vec<_>>(),
        )?);
    }
    Ok(Decomposition { gasket, fillings })
}

/// Walks the ring whose out-bases are `bases` (in hole order) and cuts out
/// the interior.
fn extract_filling(dm: &DecoratedMap, bases: &[usize]) -> Result<Filling> {
    let m = &dm.map;
    let c = &dm.crossed;
    let mut word = Vec::new();
    let mut in_bases = Vec::new();
    let mut out_bases = Vec::new();
    let mut ring_face = vec![false; m.face_kind.len()];
    let first = bases[0];
    if m.face_kind[m.face[first]] != FaceKind::Triangle || c[first] {
        bail!(Geometry, "hole side is not the base of a triangle");
    }
    let entry0 = m.next[m.next[first]];
    let (mut base, mut exit, mut out) = (first, m.next[first], true);
    loop {
        if word.len() > m.len() {
            bail!(Geometry, "ring walk does not close");
        }
        if ring_face[m.face[base]] {
            bail!(Geometry, "ring revisits a triangle");
        }
        ring_face[m.face[base]] = true;
        word.push(out);
        if out {
            out_bases.push(base);
        } else {
            in_bases.push(base);
        }
        let entry = m.twin[exit];
        if entry == entry0 {
            break;
        }
        if !c[m.next[entry]] {
            out = true;
            base = m.next[entry];
            exit = m.next[base];
        } else {
            out = false;
            exit = m.next[entry];
            base = m.next[exit];
        }
        if !c[exit] || c[base] {
            bail!(Geometry, "malformed loop crossing in a ring triangle");
        }
    }
    if out_bases != bases {
        bail!(Geometry, "ring out-sides do not match the hole boundary");
    }
    let ring = Ring::new(word)?;
    if in_bases.is_empty() {
        return Ok(Filling {
            ring,
            interior: DecoratedMap::vertex(),
        });
    }
    // Faces enclosed by the ring, flooded from the inner sides.
    let mut inner = vec![false; m.face_kind.len()];
    let mut q: VecDeque<usize> = in_bases.iter().map(|&b| m.face[m.twin[b]]).collect();
    while let Some(f) = q.pop_front() {
        if ring_face[f] || inner[f] {
            continue;
        }
        if m.face_kind[f] != FaceKind::Triangle {
            bail!(Geometry, "ring interior reaches the boundary");
        }
        inner[f] = true;
        let rep = (0..m.len()).find(|&h| m.face[h] == f).unwrap_or(NONE);
        for h in m.face_cycle(rep) {
            q.push_back(m.face[m.twin[h]]);
        }
    }
    let mut keep = vec![false; m.len()];
    for h in 0..m.len() {
        if inner[m.face[h]] {
            keep[h] = true;
        }
    }
    for &b in &in_bases {
        keep[b] = true;
    }
    if (0..m.len()).any(|h| keep[h] != keep[m.twin[h]]) {
        bail!(Geometry, "ring interior is not closed");
    }
    let (imap, old) = m.restrict(&keep, in_bases[0], FaceKind::Hole);
    let interior = DecoratedMap {
        crossed: old.iter().map(|&h| c[h]).collect(),
        map: imap,
    };
    interior.validate()?;
    Ok(Filling { ring, interior })
}

/// Glues each filling into its hole; the inverse of `gasket_decompose`.
pub fn reassemble(gasket: &Gasket, fillings: &[Filling]) -> Result<DecoratedMap> {
    let g = &gasket.map;
    if fillings.len() != gasket.holes.len() {
        bail!(
            InvalidArgument,
            "{} fillings for {} holes",
            fillings.len(),
            gasket.holes.len()
        );
    }
    if g.is_vertex() {
        return Ok(DecoratedMap::vertex());
    }
    let mut b = Parts {
        next: g.next.clone(),
        twin: g.twin.clone(),
        kind: g.face.iter().map(|&f| g.face_kind[f]).collect(),
        crossed: vec![false; g.len()],
    };
    for (&root, fill) in gasket.holes.iter().zip(fillings) {
        let hole = g.face_cycle(root);
        let (p, q) = (fill.ring.outer_perimeter(), fill.ring.inner_perimeter());
        if p != hole.len() || fill.ring.word.first() != Some(&true) {
            bail!(
                InvalidArgument,
                "ring outer perimeter {p} does not fit a hole of perimeter {}",
                hole.len()
            );
        }
        let d = &fill.interior;
        if d.perimeter() != q {
            bail!(
                InvalidArgument,
                "interior perimeter {} does not match ring inner perimeter {q}",
                d.perimeter()
            );
        }
        // Copy the interior, whose boundary sides become in-triangle bases.
        let off = b.next.len();
        let inner_cycle = if q > 0 {
            d.map.face_cycle(d.map.root)
        } else {
            Vec::new()
        };
        for h in 0..d.map.len() {
            b.next.push(off + d.map.next[h]);
            b.twin.push(off + d.map.twin[h]);
            b.kind.push(d.map.face_kind[d.map.face[h]]);
            b.crossed.push(d.crossed[h]);
        }
        let (mut oi, mut ii) = (0, 0);
        let mut exits = Vec::with_capacity(p + q);
        let mut entries = Vec::with_capacity(p + q);
        for &o in &fill.ring.word {
            let a = b.push();
            let c = b.push();
            if o {
                // base -> exit -> entry
                let base = hole[oi];
                oi += 1;
                b.kind[base] = FaceKind::Triangle;
                b.next[base] = a;
                b.next[a] = c;
                b.next[c] = base;
                exits.push(a);
                entries.push(c);
            } else {
                // entry -> exit -> base
                let base = off + inner_cycle[(q - ii) % q];
                ii += 1;
                b.kind[base] = FaceKind::Triangle;
                b.next[a] = c;
                b.next[c] = base;
                b.next[base] = a;
                entries.push(a);
                exits.push(c);
            }
        }
        let l = exits.len();
        for i in 0..l {
            let (x, y) = (exits[i], entries[(i + 1) % l]);
            b.twin[x] = y;
            b.twin[y] = x;
        }
    }
    let map = HalfEdgeMap::from_cycles(b.next, b.twin, &b.kind, g.root);
    let out = DecoratedMap {
        map,
        crossed: b.crossed,
    };
    out.validate()?;
    Ok(out)
}

struct Parts {
    next: Vec<usize>,
    twin: Vec<usize>,
    kind: Vec<FaceKind>,
    crossed: Vec<bool>,
}

impl Parts {
    /// A fresh crossed triangle side.
    fn push(&mut self) -> usize {
        self.next.push(NONE);
        self.twin.push(NONE);
        self.kind.push(FaceKind::Triangle);
        self.crossed.push(true);
        self.next.len() - 1
    }
}
