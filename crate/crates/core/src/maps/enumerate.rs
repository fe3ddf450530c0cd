//! Exhaustive enumeration of decorated maps by peeling the root side.

use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;

use super::{DecoratedMap, FaceKind, HalfEdgeMap};
use crate::error::{bail, Result};
#[allow(unused_imports)]
use crate::float::*;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EnumerationCaps {
    pub max_perimeter: usize,
    pub max_faces: usize,
    /// Maximum number of distinct maps kept.
    pub max_maps: usize,
}

impl Default for EnumerationCaps {
    fn default() -> Self {
        Self {
            max_perimeter: 6,
            max_faces: 12,
            max_maps: 5_000_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnumeratedMap {
    pub map: DecoratedMap,
    pub triangles: usize,
    pub loops: usize,
    pub code: Vec<u32>,
}

/// All rooted decorated maps of one perimeter with at most `max_faces`
/// triangles, sorted by canonical code, with their Boltzmann weights.
#[derive(Debug, Clone, PartialEq)]
pub struct Enumeration {
    pub perimeter: usize,
    pub max_faces: usize,
    pub beta: f64,
    pub maps: Vec<EnumeratedMap>,
    /// Peeling leaves whose map was already seen; zero when peeling is a
    /// bijection onto rooted maps.
    pub duplicates: usize,
    index: BTreeMap<Vec<u32>, usize>,
}

impl Enumeration {
    pub fn len(&self) -> usize {
        self.maps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.maps.is_empty()
    }

    /// e^{-beta n} 2^{loops}.
    pub fn weight(&self, i: usize) -> f64 {
        let m = &self.maps[i];
        (-self.beta * m.triangles as f64).exp() * 2f64.powi(m.loops as i32)
    }

    /// The truncated partition sum.
    pub fn partition_sum(&self) -> f64 {
        (0..self.len()).map(|i| self.weight(i)).sum()
    }

    pub fn probabilities(&self) -> Vec<f64> {
        let z = self.partition_sum();
        (0..self.len()).map(|i| self.weight(i) / z).collect()
    }

    pub fn index_of(&self, code: &[u32]) -> Option<usize> {
        self.index.get(code).copied()
    }

    /// Sum of loop_weight^loops by triangle count.
    pub fn weighted_counts(&self, loop_weight: u128) -> Vec<u128> {
        let mut c = vec![0u128; self.max_faces + 1];
        for m in &self.maps {
            c[m.triangles] += loop_weight.pow(m.loops as u32);
        }
        c
    }
}

struct State {
    map: HalfEdgeMap,
    crossed: Vec<bool>,
    /// Open boundaries of the unexplored region, as the half-edges still
    /// missing a twin, in order around the region.
    holes: Vec<Vec<usize>>,
    budget: usize,
}

/// Enumerates every rooted decorated map with boundary perimeter k and at
/// most max_faces triangles. Each map is produced by exactly one sequence of
/// peeling choices; duplicates are still detected through canonical codes.
pub fn enumerate_decorated_maps(
    k: usize,
    max_faces: usize,
    beta: f64,
    caps: &EnumerationCaps,
) -> Result<Enumeration> {
    if k > caps.max_perimeter || max_faces > caps.max_faces {
        bail!(
            CapExceeded,
            "perimeter {k} / faces {max_faces} above caps {} / {}",
            caps.max_perimeter,
            caps.max_faces
        );
    }
    if !beta.is_finite() {
        bail!(InvalidArgument, "beta must be finite");
    }
    let mut out = Enumeration {
        perimeter: k,
        max_faces,
        beta,
        maps: Vec::new(),
        duplicates: 0,
        index: BTreeMap::new(),
    };
    let mut found: BTreeMap<Vec<u32>, DecoratedMap> = BTreeMap::new();
    if k == 0 {
        let v = DecoratedMap::vertex();
        found.insert(v.canonical_code(), v);
    } else {
        let mut holes = vec![0];
        holes.extend((1..k).rev());
        let st = State {
            map: HalfEdgeMap::open_polygon(k),
            crossed: vec![false; k],
            holes: vec![holes],
            budget: max_faces,
        };
        peel(st, &mut found, &mut out.duplicates, caps.max_maps)?;
    }
    for (code, map) in found {
        let triangles = map.triangle_count();
        let loops = map.loop_count();
        out.index.insert(code.clone(), out.maps.len());
        out.maps.push(EnumeratedMap {
            map,
            triangles,
            loops,
            code,
        });
    }
    Ok(out)
}

fn peel(
    mut st: State,
    found: &mut BTreeMap<Vec<u32>, DecoratedMap>,
    dup: &mut usize,
    cap: usize,
) -> Result<()> {
    while st.holes.last().is_some_and(|h| h.is_empty()) {
        st.holes.pop();
    }
    let Some(hole) = st.holes.last().cloned() else {
        let m = DecoratedMap {
            map: st.map,
            crossed: st.crossed,
        };
        let code = m.canonical_code();
        if found.contains_key(&code) {
            *dup += 1;
        } else {
            if found.len() >= cap {
                bail!(CapExceeded, "more than {cap} maps");
            }
            found.insert(code, m);
        }
        return Ok(());
    };
    // Without triangles left a region closes only by pairing its sides.
    if st.budget == 0 && st.holes.iter().any(|h| h.len() % 2 == 1) {
        return Ok(());
    }
    let e = hole[0];
    let ce = st.crossed[e];
    if st.budget > 0 {
        // A new triangle on e; its uncrossed side is f0 when e is uncrossed,
        // otherwise one of the two others.
        let options: &[usize] = if ce { &[1, 2] } else { &[0] };
        for &u in options {
            let mut s = clone_state(&st);
            let f0 = s.map.add_face(FaceKind::Triangle, 3);
            s.crossed.extend((0..3).map(|i| i != u));
            s.map.glue(e, f0);
            let top = s.holes.last_mut().unwrap();
            top.splice(0..1, [f0 + 2, f0 + 1]);
            s.budget -= 1;
            peel(s, found, dup, cap)?;
        }
    }
    for j in 1..hole.len() {
        if st.crossed[hole[j]] != ce {
            continue;
        }
        let mut s = clone_state(&st);
        s.map.glue(e, hole[j]);
        s.holes.pop();
        s.holes.push(hole[j + 1..].to_vec());
        s.holes.push(hole[1..j].to_vec());
        peel(s, found, dup, cap)?;
    }
    Ok(())
}

fn clone_state(st: &State) -> State {
    State {
        map: st.map.clone(),
        crossed: st.crossed.clone(),
        holes: st.holes.clone(),
        budget: st.budget,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::maps::WeightTable;

    fn all(k: usize, f: usize) -> Enumeration {
        enumerate_decorated_maps(k, f, 0.0, &EnumerationCaps::default()).unwrap()
    }

    #[test]
    fn perimeter_one_without_faces_is_empty() {
        // Frozen golden values.
        assert_eq!(all(1, 0).len(), 0);
        assert_eq!(all(0, 4).len(), 1);
        assert_eq!(all(2, 0).len(), 1);
        assert_eq!(all(1, 1).len(), 1);
    }

    #[test]
    fn every_map_is_valid_and_unique() {
        for k in 0..=4 {
            let e = all(k, 5);
            assert_eq!(e.duplicates, 0);
            for m in &e.maps {
                m.map.validate().unwrap();
                assert_eq!(m.map.perimeter(), k);
                assert!(m.triangles <= 5);
            }
        }
    }

    #[test]
    fn agrees_with_counting_recursion() {
        let t2 = WeightTable::new(2, 12).unwrap();
        let t1 = WeightTable::new(1, 12).unwrap();
        for k in 0..=4 {
            let f = 7 - k.min(1);
            let e = all(k, f);
            assert_eq!(e.weighted_counts(2), t2.counts(k, f).unwrap(), "k={k}");
            assert_eq!(e.weighted_counts(1), t1.counts(k, f).unwrap(), "k={k}");
        }
    }

    #[test]
    fn more_faces_never_fewer_maps() {
        let mut last = 0;
        for f in 0..=6 {
            let n = all(3, f).len();
            assert!(n >= last);
            last = n;
        }
    }

    #[test]
    fn caps_are_enforced() {
        let caps = EnumerationCaps {
            max_maps: 3,
            ..EnumerationCaps::default()
        };
        assert!(enumerate_decorated_maps(3, 5, 0.0, &caps).is_err());
        assert!(enumerate_decorated_maps(7, 1, 0.0, &EnumerationCaps::default()).is_err());
    }
}
