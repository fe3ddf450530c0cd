//! Heuristic extraction of nested level loops from a lattice field.

use alloc::collections::VecDeque;
use alloc::vec;
use alloc::vec::Vec;

use super::{mask, LoopTree, TreeBuilder, HEIGHT_GAP, MIN_REGION_VERTICES};
use crate::error::Result;
#[allow(unused_imports)]
use crate::float::*;
use crate::gff::LatticeField;
use crate::lattice::LatticeDomain;

/// Extracts loops of a zero-boundary field: inside each explored region,
/// the same-sign connected components where the locally averaged field
/// exceeds the height gap in absolute value, with holes filled, become
/// loops; the search recurses inside each loop on the field shifted by
/// -gap * sign. The result is a lattice approximation with no claim on its
/// law.
/// A region still to explore: its mask, the recentred field, the parent loop
/// and the generation of loops found in it.
type Pending = (Vec<bool>, Vec<f64>, Option<usize>, usize);

pub fn extract_level_loops(field: &LatticeField, max_depth: usize) -> Result<LoopTree> {
    let d = &field.domain;
    let mut b = TreeBuilder::new(d);
    let interior: Vec<bool> = (0..d.len()).map(|v| !d.is_boundary(v)).collect();
    let mut stack: Vec<Pending> = vec![(interior, field.values.clone(), None, 1)];
    while let Some((region, values, parent, generation)) = stack.pop() {
        if generation > max_depth {
            continue;
        }
        for (comp, sign) in outermost_components(d, &region, &values, &mut b.tree.pruned) {
            if let Some(id) = b.add(parent, comp.clone(), sign)? {
                let m = mask(d.len(), &comp);
                let shifted: Vec<f64> = values
                    .iter()
                    .map(|v| v - HEIGHT_GAP * f64::from(sign))
                    .collect();
                stack.push((m, shifted, Some(id), generation + 1));
            }
        }
    }
    let mut tree = b.finish();
    // Children were discovered depth-first; keep their lists sorted.
    for n in &mut tree.nodes {
        n.children.sort_unstable();
    }
    Ok(tree)
}

fn outermost_components(
    d: &LatticeDomain,
    region: &[bool],
    f: &[f64],
    pruned: &mut usize,
) -> Vec<(Vec<usize>, i8)> {
    let n = d.len();
    let rim = |v: usize| d.is_boundary(v) || d.neighbors(v).any(|u| !region[u]);
    // Candidate vertices: not on the rim, with every neighbor off the rim as
    // well, so that a component and its outer boundary stay in the region.
    let mut sign = vec![0i8; n];
    for v in (0..n).filter(|&v| region[v] && !rim(v)) {
        if d.neighbors(v).any(&rim) {
            continue;
        }
        let (mut s, mut c) = (f[v], 1.0);
        for u in d.neighbors(v) {
            s += f[u];
            c += 1.0;
        }
        let a = s / c;
        if a > HEIGHT_GAP {
            sign[v] = 1;
        } else if a < -HEIGHT_GAP {
            sign[v] = -1;
        }
    }
    let mut label = vec![usize::MAX; n];
    let mut comps: Vec<(Vec<usize>, i8)> = Vec::new();
    for v in 0..n {
        if sign[v] == 0 || label[v] != usize::MAX {
            continue;
        }
        let k = comps.len();
        let mut q = VecDeque::from([v]);
        label[v] = k;
        let mut comp = Vec::new();
        while let Some(x) = q.pop_front() {
            comp.push(x);
            for u in d.neighbors(x) {
                if sign[u] == sign[v] && label[u] == usize::MAX {
                    label[u] = k;
                    q.push_back(u);
                }
            }
        }
        comps.push((comp, sign[v]));
    }
    // A ring around a 2 x 2 hole is the smallest component that can fill to
    // the resolution floor.
    let mut filled: Vec<(Vec<usize>, i8)> = Vec::new();
    for (comp, s) in comps {
        if comp.len() < 12 {
            *pruned += 1;
            continue;
        }
        let full = fill_holes(d, &comp);
        if full.len() < MIN_REGION_VERTICES {
            *pruned += 1;
            continue;
        }
        filled.push((full, s));
    }
    // Largest first, ties by lowest vertex id; drop regions nested in or
    // touching an accepted one.
    filled.sort_by(|a, b| b.0.len().cmp(&a.0.len()).then(a.0[0].cmp(&b.0[0])));
    let mut taken = vec![false; n];
    let mut out = Vec::new();
    for (full, s) in filled {
        let clash = full
            .iter()
            .any(|&v| taken[v] || d.neighbors(v).any(|u| taken[u]));
        if clash {
            let nested = full.iter().any(|&v| taken[v]);
            if !nested {
                *pruned += 1;
            }
            continue;
        }
        for &v in &full {
            taken[v] = true;
        }
        out.push((full, s));
    }
    out.sort_by_key(|c| c.0[0]);
    out
}

/// The component together with every vertex it encloses, found by flooding
/// the complement from outside the component's bounding box.
fn fill_holes(d: &LatticeDomain, comp: &[usize]) -> Vec<usize> {
    let (mut i0, mut j0, mut i1, mut j1) = (usize::MAX, usize::MAX, 0usize, 0usize);
    for &v in comp {
        let (i, j) = d.grid_coords(v);
        i0 = i0.min(i);
        j0 = j0.min(j);
        i1 = i1.max(i);
        j1 = j1.max(j);
    }
    // Work on the box grown by one, in local coordinates.
    let (bi, bj) = (i0 as i64 - 1, j0 as i64 - 1);
    let (w, h) = ((i1 - i0 + 3) as i64, (j1 - j0 + 3) as i64);
    let idx = |i: i64, j: i64| ((j - bj) * w + (i - bi)) as usize;
    let mut blocked = vec![false; (w * h) as usize];
    for &v in comp {
        let (i, j) = d.grid_coords(v);
        blocked[idx(i as i64, j as i64)] = true;
    }
    let mut outside = vec![false; (w * h) as usize];
    let mut q = VecDeque::new();
    for i in bi..bi + w {
        for j in [bj, bj + h - 1] {
            q.push_back((i, j));
        }
    }
    for j in bj..bj + h {
        for i in [bi, bi + w - 1] {
            q.push_back((i, j));
        }
    }
    while let Some((i, j)) = q.pop_front() {
        let k = idx(i, j);
        if outside[k] || blocked[k] {
            continue;
        }
        outside[k] = true;
        for (di, dj) in [(1, 0), (-1, 0), (0, 1), (0, -1)] {
            let (a, b) = (i + di, j + dj);
            if a >= bi && a < bi + w && b >= bj && b < bj + h {
                q.push_back((a, b));
            }
        }
    }
    let mut out = Vec::with_capacity(comp.len());
    for j in bj + 1..bj + h - 1 {
        for i in bi + 1..bi + w - 1 {
            if !outside[idx(i, j)] {
                if let Some(v) = d.vertex_at(i as usize, j as usize) {
                    out.push(v);
                }
            }
        }
    }
    out.sort_unstable();
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::sync::Arc;
    use num_complex::Complex64;

    fn bump(d: &Arc<LatticeDomain>, c: Complex64, r: f64, height: f64) -> LatticeField {
        // Smoothed indicator: plateau inside radius r, linear ramp over 2h.
        let h = d.h();
        LatticeField::from_fn(d.clone(), |z| {
            let t = ((r + h - (z - c).norm()) / (2.0 * h)).clamp(0.0, 1.0);
            height * t
        })
    }

    #[test]
    fn zero_field_has_no_loops() {
        let d = Arc::new(LatticeDomain::disk_grid(33).unwrap());
        let t = extract_level_loops(&LatticeField::zeros(d), 5).unwrap();
        assert!(t.is_empty());
    }

    #[test]
    fn single_bump_gives_one_loop() {
        let d = Arc::new(LatticeDomain::disk_grid(65).unwrap());
        let c = Complex64::new(0.1, -0.05);
        let r = 0.4;
        let f = bump(&d, c, r, HEIGHT_GAP * 1.2);
        let t = extract_level_loops(&f, 3).unwrap();
        assert_eq!(t.len(), 1);
        let n = &t.nodes[0];
        assert_eq!(n.sign, 1);
        for &v in &n.polygon {
            let dist = ((d.point(v) - c).norm() - r).abs();
            assert!(
                dist <= 2.0 * d.h() + 1e-12,
                "polygon vertex {v} at distance {dist}"
            );
        }
        t.validate(&d).unwrap();
    }

    #[test]
    fn extraction_is_odd() {
        let d = Arc::new(LatticeDomain::disk_grid(65).unwrap());
        let mut f = bump(&d, Complex64::new(-0.4, 0.0), 0.25, HEIGHT_GAP * 1.3);
        let g = bump(&d, Complex64::new(0.4, 0.1), 0.3, -HEIGHT_GAP * 2.5);
        for (a, b) in f.values.iter_mut().zip(&g.values) {
            *a += b;
        }
        let t = extract_level_loops(&f, 3).unwrap();
        let mut neg = f.clone();
        neg.values.iter_mut().for_each(|v| *v = -*v);
        let u = extract_level_loops(&neg, 3).unwrap();
        assert_eq!(t.len(), u.len());
        assert!(t.len() >= 2);
        for (a, b) in t.nodes.iter().zip(&u.nodes) {
            assert_eq!(a.region, b.region);
            assert_eq!(a.sign, -b.sign);
        }
    }
}
