//! Square-grid discretizations of the unit disk and of the strip
//! R x (0, 2 pi), with conductance weights, boundary flags and bilinear
//! interpolation.

use alloc::collections::VecDeque;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{bail, Result};
#[allow(unused_imports)]
use crate::float::*;
use crate::linalg::SparseSym;

/// Covariance normalization: the lattice GFF has covariance
/// `GFF_NORMALIZATION * L^{-1}` so that it matches the continuum kernel
/// log(1/|z-w|) + O(1) up to lattice corrections.
pub const GFF_NORMALIZATION: f64 = 2.0 * PI;

/// Directions in neighbor arrays: east, north, west, south.
pub const EAST: usize = 0;
pub const NORTH: usize = 1;
pub const WEST: usize = 2;
pub const SOUTH: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DomainKind {
    /// Grid points of [-1,1]^2 in the closed unit disk.
    Disk,
    /// The truncated strip [-x_max, x_max] x [0, 2 pi].
    Strip { x_max: f64 },
}

/// A finite grid graph with positions, conductances and boundary flags.
#[derive(Debug, Clone)]
pub struct LatticeDomain {
    kind: DomainKind,
    resolution: usize,
    nx: usize,
    ny: usize,
    x0: f64,
    y0: f64,
    hx: f64,
    hy: f64,
    grid: Vec<u32>,
    ij: Vec<(u32, u32)>,
    neighbors: Vec<[u32; 4]>,
    boundary: Vec<bool>,
}

const NONE: u32 = u32::MAX;

/// Result of bilinear interpolation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interpolated {
    pub value: f64,
    /// True when some cell corners were unavailable and the weights were
    /// renormalized, or when the point had to be clamped into the grid.
    pub degraded: bool,
}

impl LatticeDomain {
    /// The disk grid with `n` vertices per side of [-1,1]^2, keeping points
    /// with |z| <= 1. A vertex is flagged boundary when one of its four
    /// lattice neighbors falls outside the disk.
    pub fn disk_grid(n: usize) -> Result<Self> {
        if n < 3 {
            bail!(
                InvalidResolution,
                "disk grid needs n >= 3 vertices per side, got {n}"
            );
        }
        if n > 4097 {
            bail!(InvalidResolution, "disk grid resolution {n} exceeds 4097");
        }
        let h = 2.0 / (n - 1) as f64;
        let inside = |i: usize, j: usize| {
            let x = -1.0 + i as f64 * h;
            let y = -1.0 + j as f64 * h;
            x * x + y * y <= 1.0 + 1e-12
        };
        let dom = Self::build(
            DomainKind::Disk,
            n,
            n,
            n,
            -1.0,
            -1.0,
            h,
            h,
            inside,
            |d, v| d.neighbors[v].contains(&NONE),
        )?;
        Ok(dom)
    }

    /// The strip grid with `n` cells across the height 2 pi and square-ish
    /// cells out to |x| = x_max. Rows y = 0, y = 2 pi and the two end columns
    /// are flagged boundary.
    pub fn strip_grid(n: usize, x_max: f64) -> Result<Self> {
        if n < 4 {
            bail!(
                InvalidResolution,
                "strip grid needs n >= 4 cells per period, got {n}"
            );
        }
        if !(x_max > 0.0) || !x_max.is_finite() {
            bail!(
                InvalidArgument,
                "strip half-width x_max = {x_max} must be positive"
            );
        }
        let hy = 2.0 * PI / n as f64;
        let half = ((x_max / hy).round() as usize).max(1);
        let hx = x_max / half as f64;
        let nx = 2 * half + 1;
        let ny = n + 1;
        Self::build(
            DomainKind::Strip { x_max },
            n,
            nx,
            ny,
            -x_max,
            0.0,
            hx,
            hy,
            |_, _| true,
            |d, v| {
                let (i, j) = d.ij[v];
                i == 0 || j == 0 || i as usize == d.nx - 1 || j as usize == d.ny - 1
            },
        )
    }

    #[allow(clippy::too_many_arguments)]
    fn build(
        kind: DomainKind,
        resolution: usize,
        nx: usize,
        ny: usize,
        x0: f64,
        y0: f64,
        hx: f64,
        hy: f64,
        inside: impl Fn(usize, usize) -> bool,
        is_boundary: impl Fn(&LatticeDomain, usize) -> bool,
    ) -> Result<Self> {
        let mut grid = vec![NONE; nx * ny];
        let mut ij = Vec::new();
        for j in 0..ny {
            for i in 0..nx {
                if inside(i, j) {
                    grid[j * nx + i] = ij.len() as u32;
                    ij.push((i as u32, j as u32));
                }
            }
        }
        let mut d = LatticeDomain {
            kind,
            resolution,
            nx,
            ny,
            x0,
            y0,
            hx,
            hy,
            grid,
            neighbors: Vec::with_capacity(ij.len()),
            boundary: Vec::new(),
            ij,
        };
        for v in 0..d.ij.len() {
            let (i, j) = d.ij[v];
            let (i, j) = (i as i64, j as i64);
            let nb = [
                d.grid_index(i + 1, j),
                d.grid_index(i, j + 1),
                d.grid_index(i - 1, j),
                d.grid_index(i, j - 1),
            ];
            d.neighbors.push(nb.map(|o| o.map_or(NONE, |u| u as u32)));
        }
        d.boundary = (0..d.ij.len()).map(|v| is_boundary(&d, v)).collect();
        if !d.is_connected() {
            bail!(Geometry, "grid graph is disconnected");
        }
        Ok(d)
    }

    fn grid_index(&self, i: i64, j: i64) -> Option<usize> {
        if i < 0 || j < 0 || i as usize >= self.nx || j as usize >= self.ny {
            return None;
        }
        let g = self.grid[j as usize * self.nx + i as usize];
        (g != NONE).then_some(g as usize)
    }

    fn is_connected(&self) -> bool {
        if self.ij.is_empty() {
            return false;
        }
        let mut seen = vec![false; self.len()];
        let mut q = VecDeque::from([0usize]);
        seen[0] = true;
        let mut count = 1;
        while let Some(v) = q.pop_front() {
            for u in self.neighbors(v) {
                if !seen[u] {
                    seen[u] = true;
                    count += 1;
                    q.push_back(u);
                }
            }
        }
        count == self.len()
    }

    pub fn kind(&self) -> DomainKind {
        self.kind
    }

    /// The resolution parameter the grid was built from.
    pub fn resolution(&self) -> usize {
        self.resolution
    }

    pub fn len(&self) -> usize {
        self.ij.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ij.is_empty()
    }

    /// Grid dimensions (columns, rows) of the bounding box.
    pub fn grid_dims(&self) -> (usize, usize) {
        (self.nx, self.ny)
    }

    /// Cell sizes (hx, hy).
    pub fn spacing(&self) -> (f64, f64) {
        (self.hx, self.hy)
    }

    /// The larger of the two cell sizes.
    pub fn h(&self) -> f64 {
        self.hx.max(self.hy)
    }

    pub fn normalization(&self) -> f64 {
        GFF_NORMALIZATION
    }

    pub fn grid_coords(&self, v: usize) -> (usize, usize) {
        let (i, j) = self.ij[v];
        (i as usize, j as usize)
    }

    pub fn vertex_at(&self, i: usize, j: usize) -> Option<usize> {
        self.grid_index(i as i64, j as i64)
    }

    pub fn position(&self, v: usize) -> [f64; 2] {
        let (i, j) = self.ij[v];
        [self.x0 + i as f64 * self.hx, self.y0 + j as f64 * self.hy]
    }

    pub fn point(&self, v: usize) -> Complex64 {
        let [x, y] = self.position(v);
        Complex64::new(x, y)
    }

    pub fn is_boundary(&self, v: usize) -> bool {
        self.boundary[v]
    }

    pub fn boundary_flags(&self) -> &[bool] {
        &self.boundary
    }

    pub fn interior_vertices(&self) -> Vec<usize> {
        (0..self.len()).filter(|&v| !self.boundary[v]).collect()
    }

    pub fn boundary_vertices(&self) -> Vec<usize> {
        (0..self.len()).filter(|&v| self.boundary[v]).collect()
    }

    /// Neighbor in direction `dir` (EAST, NORTH, WEST, SOUTH).
    pub fn neighbor(&self, v: usize, dir: usize) -> Option<usize> {
        let u = self.neighbors[v][dir];
        (u != NONE).then_some(u as usize)
    }

    pub fn neighbors(&self, v: usize) -> impl Iterator<Item = usize> + '_ {
        self.neighbors[v]
            .iter()
            .filter(|&&u| u != NONE)
            .map(|&u| u as usize)
    }

    /// Conductance of an edge in direction `dir`: hy/hx for horizontal edges,
    /// hx/hy for vertical ones.
    pub fn weight(&self, dir: usize) -> f64 {
        if dir.is_multiple_of(2) {
            self.hy / self.hx
        } else {
            self.hx / self.hy
        }
    }

    /// Neighbors with conductances.
    pub fn weighted_neighbors(&self, v: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        (0..4).filter_map(move |d| self.neighbor(v, d).map(|u| (u, self.weight(d))))
    }

    /// Edges (u, v) with u < v.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut e = Vec::new();
        for v in 0..self.len() {
            for d in [EAST, NORTH] {
                if let Some(u) = self.neighbor(v, d) {
                    e.push((v.min(u), v.max(u)));
                }
            }
        }
        e
    }

    /// Weighted Laplacian of the whole graph (free boundary).
    pub fn laplacian(&self) -> SparseSym {
        let mut a = SparseSym::zeros(self.len());
        for v in 0..self.len() {
            for d in [EAST, NORTH] {
                if let Some(u) = self.neighbor(v, d) {
                    let w = self.weight(d);
                    a.add_off(v, u, -w);
                    a.diag[v] += w;
                    a.diag[u] += w;
                }
            }
        }
        a
    }

    /// True if `p` lies in the continuum domain the grid discretizes.
    pub fn contains(&self, p: Complex64) -> bool {
        match self.kind {
            DomainKind::Disk => p.norm_sqr() <= 1.0 + 1e-12,
            DomainKind::Strip { x_max } => {
                p.re.abs() <= x_max + 1e-12 && p.im >= -1e-12 && p.im <= 2.0 * PI + 1e-12
            }
        }
    }

    /// Nearest grid vertex, searching outward from the nearest grid node.
    pub fn nearest_vertex(&self, p: Complex64) -> usize {
        let fi = ((p.re - self.x0) / self.hx).round();
        let fj = ((p.im - self.y0) / self.hy).round();
        let ci = (fi.max(0.0) as usize).min(self.nx - 1) as i64;
        let cj = (fj.max(0.0) as usize).min(self.ny - 1) as i64;
        let mut best = (f64::INFINITY, 0usize);
        for r in 0..(self.nx.max(self.ny) as i64) {
            for di in -r..=r {
                for dj in -r..=r {
                    if di.abs() != r && dj.abs() != r {
                        continue;
                    }
                    if let Some(v) = self.grid_index(ci + di, cj + dj) {
                        let d = (self.point(v) - p).norm_sqr();
                        if d < best.0 {
                            best = (d, v);
                        }
                    }
                }
            }
            if best.0.is_finite() {
                return best.1;
            }
        }
        best.1
    }

    /// Cell lookup: lower-left grid indices and fractional offsets, clamped to
    /// the bounding box. The flag is set when clamping occurred.
    fn locate(&self, p: Complex64) -> (i64, i64, f64, f64, bool) {
        let fx = (p.re - self.x0) / self.hx;
        let fy = (p.im - self.y0) / self.hy;
        let clamp = |f: f64, n: usize| -> (i64, f64, bool) {
            let max = (n - 1) as f64;
            let eps = 1e-9;
            let out = f < -eps || f > max + eps;
            let f = f.clamp(0.0, max);
            let i = (f.floor() as i64).min(n as i64 - 2).max(0);
            (i, (f - i as f64).clamp(0.0, 1.0), out)
        };
        let (i, tx, ox) = clamp(fx, self.nx);
        let (j, ty, oy) = clamp(fy, self.ny);
        (i, j, tx, ty, ox || oy)
    }

    /// Bilinear interpolation of vertex values at `p`. Only vertices with
    /// `mask[v]` true (all vertices when `mask` is None) are used; missing
    /// corners are dropped and the remaining weights renormalized. Falls back
    /// to the nearest available corner, and returns None when no corner of the
    /// containing cell is available.
    pub fn interpolate(
        &self,
        values: &[f64],
        p: Complex64,
        mask: Option<&[bool]>,
    ) -> Option<Interpolated> {
        let (i, j, tx, ty, clamped) = self.locate(p);
        let corners = [
            (i, j, (1.0 - tx) * (1.0 - ty)),
            (i + 1, j, tx * (1.0 - ty)),
            (i, j + 1, (1.0 - tx) * ty),
            (i + 1, j + 1, tx * ty),
        ];
        let mut num = 0.0;
        let mut den = 0.0;
        let mut missing = false;
        let mut nearest: Option<(f64, usize)> = None;
        for (ci, cj, w) in corners {
            match self
                .grid_index(ci, cj)
                .filter(|&v| mask.is_none_or(|m| m[v]))
            {
                Some(v) => {
                    num += w * values[v];
                    den += w;
                    let d = (self.point(v) - p).norm_sqr();
                    if nearest.is_none_or(|(bd, _)| d < bd) {
                        nearest = Some((d, v));
                    }
                }
                None => missing |= w > 0.0,
            }
        }
        if den > 1e-12 {
            Some(Interpolated {
                value: num / den,
                degraded: missing || clamped,
            })
        } else {
            nearest.map(|(_, v)| Interpolated {
                value: values[v],
                degraded: true,
            })
        }
    }

    /// Interpolation that falls back to the nearest vertex anywhere in the grid
    /// when the containing cell has no usable corner.
    pub fn interpolate_or_nearest(&self, values: &[f64], p: Complex64) -> Interpolated {
        self.interpolate(values, p, None)
            .unwrap_or_else(|| Interpolated {
                value: values[self.nearest_vertex(p)],
                degraded: true,
            })
    }

    /// Vertex obtained by rotating `v` a quarter turn counterclockwise about
    /// the disk center. Only meaningful for disk grids.
    pub fn rotate_quarter(&self, v: usize) -> Option<usize> {
        if self.kind != DomainKind::Disk {
            return None;
        }
        let (i, j) = self.ij[v];
        self.vertex_at(self.nx - 1 - j as usize, i as usize)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn smallest_disk() {
        let d = LatticeDomain::disk_grid(3).unwrap();
        assert_eq!(d.len(), 5);
        assert_eq!(d.interior_vertices().len(), 1);
        let c = d.interior_vertices()[0];
        assert_eq!(d.position(c), [0.0, 0.0]);
        assert_eq!(d.neighbors(c).filter(|&u| d.is_boundary(u)).count(), 4);
        assert!(LatticeDomain::disk_grid(2).is_err());
        assert!(LatticeDomain::disk_grid(0).is_err());
    }

    #[test]
    fn disk_17_structure() {
        let d = LatticeDomain::disk_grid(17).unwrap();
        for v in 0..d.len() {
            assert!(d.point(v).norm() <= 1.0 + 1e-12);
            if !d.is_boundary(v) {
                assert_eq!(d.neighbors(v).count(), 4);
            }
        }
        let lap = d.laplacian();
        for v in 0..d.len() {
            let s: f64 = lap.diag[v] + lap.off[v].iter().map(|e| e.1).sum::<f64>();
            assert!(s.abs() < 1e-14);
        }
    }

    #[test]
    fn strip_weights() {
        let s = LatticeDomain::strip_grid(16, 3.0).unwrap();
        let (hx, hy) = s.spacing();
        assert!((hy - 2.0 * PI / 16.0).abs() < 1e-15);
        assert!((s.weight(EAST) - hy / hx).abs() < 1e-15);
        let (nx, ny) = s.grid_dims();
        assert_eq!(ny, 17);
        assert_eq!(nx % 2, 1);
        let mid = s.vertex_at(nx / 2, 0).unwrap();
        assert_eq!(s.position(mid)[0], 0.0);
        assert!(s.is_boundary(mid));
    }

    #[test]
    fn quarter_rotation_is_a_symmetry() {
        let d = LatticeDomain::disk_grid(21).unwrap();
        for v in 0..d.len() {
            let r = d.rotate_quarter(v).unwrap();
            let (p, q) = (d.point(v), d.point(r));
            assert!((q - p * Complex64::i()).norm() < 1e-12);
            assert_eq!(d.is_boundary(v), d.is_boundary(r));
        }
    }

    proptest! {
        #[test]
        fn interpolation_reproduces_affine(a in -2.0f64..2.0, b in -2.0f64..2.0, c in -1.0f64..1.0,
                                           r in 0.0f64..0.9, t in 0.0f64..6.3) {
            let d = LatticeDomain::disk_grid(33).unwrap();
            let vals: Vec<f64> = (0..d.len()).map(|v| { let [x, y] = d.position(v); a * x + b * y + c }).collect();
            let p = Complex64::from_polar(r, t);
            let got = d.interpolate(&vals, p, None).unwrap();
            prop_assert!((got.value - (a * p.re + b * p.im + c)).abs() < 1e-12);
        }
    }
}
