//! Exact counting of decorated maps by the gasket form of Tutte's equation.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{bail, Result};
#[allow(unused_imports)]
use crate::float::*;

/// Rooted rings with outer perimeter `p` and inner perimeter `q`: cyclic
/// words of p out-triangles and q in-triangles, rooted at an out-triangle.
pub fn ring_count(p: usize, q: usize) -> u128 {
    if p == 0 {
        return 0;
    }
    binomial(p + q - 1, p - 1)
}

pub(crate) fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut c: u128 = 1;
    for i in 0..k {
        c = c * (n - i) as u128 / (i + 1) as u128;
    }
    c
}

/// Generating polynomials, truncated in the number of triangles, of
/// decorated maps by boundary perimeter: `count(k, n)` is the sum of
/// `loop_weight^loops` over rooted maps with perimeter k and n triangles.
/// Entries are exact for k + n up to `reach`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WeightTable {
    loop_weight: u128,
    reach: usize,
    w: Vec<Vec<u128>>,
    x: Vec<Vec<u128>>,
}

/// Entries beyond this reach overflow u128 for loop weight 2.
const MAX_REACH: usize = 40;

impl WeightTable {
    /// A table exact for every perimeter k and face count n with k + n <=
    /// reach.
    pub fn new(loop_weight: u128, reach: usize) -> Result<Self> {
        if reach > MAX_REACH {
            bail!(CapExceeded, "table reach {reach} above {MAX_REACH}");
        }
        let r = reach;
        let mut w = vec![vec![0u128; r + 1]; r + 1];
        // x[p][a]: weight of filling a hole of perimeter p with a triangles.
        let mut x = vec![vec![0u128; r + 1]; r + 1];
        w[0][0] = 1;
        let get =
            |w: &Vec<Vec<u128>>, k: usize, n: usize| if k <= r && n <= r { w[k][n] } else { 0 };
        for n in 0..=r {
            for p in 1..=n {
                let mut s = 0u128;
                for q in 0..=n - p {
                    s += ring_count(p, q) * get(&w, q, n - p - q);
                }
                x[p][n] = loop_weight * s;
            }
            for k in 1..=r - n.min(r) {
                let mut s = 0u128;
                for p in 1..=n {
                    for a in p..=n {
                        s += x[p][a] * get(&w, k + p - 2, n - a);
                    }
                }
                for i in 0..k.saturating_sub(1) {
                    for a in 0..=n {
                        s += get(&w, i, a) * get(&w, k - 2 - i, n - a);
                    }
                }
                w[k][n] = s;
            }
        }
        Ok(Self {
            loop_weight,
            reach,
            w,
            x,
        })
    }

    pub fn loop_weight(&self) -> u128 {
        self.loop_weight
    }

    pub fn reach(&self) -> usize {
        self.reach
    }

    pub fn is_exact(&self, k: usize, n: usize) -> bool {
        k + n <= self.reach
    }

    /// The weighted count, or None outside the exact range.
    pub fn count(&self, k: usize, n: usize) -> Option<u128> {
        self.is_exact(k, n).then(|| self.w[k][n])
    }

    pub(crate) fn w(&self, k: usize, n: usize) -> u128 {
        debug_assert!(self.is_exact(k, n), "table entry ({k}, {n}) out of range");
        if k <= self.reach && n <= self.reach {
            self.w[k][n]
        } else {
            0
        }
    }

    /// Weight of the hole fillings of perimeter p using a triangles, loop
    /// included.
    pub(crate) fn x(&self, p: usize, a: usize) -> u128 {
        if p <= self.reach && a <= self.reach {
            self.x[p][a]
        } else {
            0
        }
    }

    /// Counts for perimeter k, n = 0..=max_faces.
    pub fn counts(&self, k: usize, max_faces: usize) -> Result<Vec<u128>> {
        if !self.is_exact(k, max_faces) {
            bail!(
                CapExceeded,
                "perimeter {k} with {max_faces} faces is beyond the table reach {}",
                self.reach
            );
        }
        Ok((0..=max_faces).map(|n| self.w[k][n]).collect())
    }

    /// Truncated partition sum: sum over n <= max_faces of count(k, n) e^{-beta n}.
    pub fn partition_sum(&self, k: usize, max_faces: usize, beta: f64) -> Result<f64> {
        let c = self.counts(k, max_faces)?;
        Ok(c.iter()
            .enumerate()
            .map(|(n, &v)| v as f64 * (-beta * n as f64).exp())
            .sum())
    }
}
