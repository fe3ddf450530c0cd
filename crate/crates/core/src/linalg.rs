//! Dense and envelope (profile) Cholesky factorizations and a conjugate
//! gradient solver, enough for lattice Laplacians of a few tens of thousands
//! of vertices.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{bail, Result};
#[allow(unused_imports)]
use crate::float::*;

/// A symmetric sparse matrix stored as a diagonal plus symmetric off-diagonal
/// adjacency lists.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseSym {
    pub diag: Vec<f64>,
    pub off: Vec<Vec<(usize, f64)>>,
}

impl SparseSym {
    pub fn zeros(n: usize) -> Self {
        Self {
            diag: vec![0.0; n],
            off: vec![Vec::new(); n],
        }
    }

    pub fn len(&self) -> usize {
        self.diag.len()
    }

    pub fn is_empty(&self) -> bool {
        self.diag.is_empty()
    }

    /// Adds `v` to entries (i, j) and (j, i), i != j.
    pub fn add_off(&mut self, i: usize, j: usize, v: f64) {
        debug_assert_ne!(i, j);
        self.off[i].push((j, v));
        self.off[j].push((i, v));
    }

    pub fn mul_vec(&self, x: &[f64], out: &mut [f64]) {
        for i in 0..self.len() {
            let mut s = self.diag[i] * x[i];
            for &(j, v) in &self.off[i] {
                s += v * x[j];
            }
            out[i] = s;
        }
    }

    pub fn to_dense(&self) -> DenseMatrix {
        let n = self.len();
        let mut m = DenseMatrix::zeros(n);
        for i in 0..n {
            m[(i, i)] += self.diag[i];
            for &(j, v) in &self.off[i] {
                m[(i, j)] += v;
            }
        }
        m
    }
}

/// Row-major square matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix {
    n: usize,
    data: Vec<f64>,
}

impl core::ops::Index<(usize, usize)> for DenseMatrix {
    type Output = f64;
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.n + j]
    }
}

impl core::ops::IndexMut<(usize, usize)> for DenseMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.n + j]
    }
}

impl DenseMatrix {
    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            data: vec![0.0; n * n],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    pub fn scale(&mut self, s: f64) {
        self.data.iter_mut().for_each(|v| *v *= s);
    }

    /// Dense Cholesky factor, failing if the matrix is not positive definite.
    pub fn cholesky(&self) -> Result<DenseCholesky> {
        let n = self.n;
        let mut l = vec![0.0; n * n];
        for j in 0..n {
            let mut d = self[(j, j)];
            for k in 0..j {
                d -= l[j * n + k] * l[j * n + k];
            }
            if !(d > 0.0) {
                bail!(Numerical, "matrix not positive definite at pivot {j}");
            }
            let djj = d.sqrt();
            l[j * n + j] = djj;
            for i in j + 1..n {
                let mut s = self[(i, j)];
                for k in 0..j {
                    s -= l[i * n + k] * l[j * n + k];
                }
                l[i * n + j] = s / djj;
            }
        }
        Ok(DenseCholesky { n, l })
    }
}

/// Dense lower-triangular Cholesky factor.
#[derive(Debug, Clone)]
pub struct DenseCholesky {
    n: usize,
    l: Vec<f64>,
}

impl DenseCholesky {
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.n;
        let mut y = b.to_vec();
        for i in 0..n {
            let mut s = y[i];
            for k in 0..i {
                s -= self.l[i * n + k] * y[k];
            }
            y[i] = s / self.l[i * n + i];
        }
        for i in (0..n).rev() {
            let mut s = y[i];
            for k in i + 1..n {
                s -= self.l[k * n + i] * y[k];
            }
            y[i] = s / self.l[i * n + i];
        }
        y
    }

    pub fn inverse(&self) -> DenseMatrix {
        let n = self.n;
        let mut out = DenseMatrix::zeros(n);
        let mut e = vec![0.0; n];
        for j in 0..n {
            e.iter_mut().for_each(|v| *v = 0.0);
            e[j] = 1.0;
            let col = self.solve(&e);
            for i in 0..n {
                out[(i, j)] = col[i];
            }
        }
        out
    }
}

/// Cholesky factor stored in envelope form: row `i` keeps entries from its
/// first structural nonzero column up to the diagonal. Fill-in never leaves
/// the envelope, so natural orderings of grid graphs cost O(N b^2).
#[derive(Debug, Clone)]
pub struct EnvelopeCholesky {
    first: Vec<usize>,
    offset: Vec<usize>,
    values: Vec<f64>,
}

impl EnvelopeCholesky {
    pub fn factor(a: &SparseSym) -> Result<Self> {
        let n = a.len();
        let mut first = vec![0usize; n];
        let mut offset = vec![0usize; n + 1];
        for i in 0..n {
            let mut f = i;
            for &(j, _) in &a.off[i] {
                if j < f {
                    f = j;
                }
            }
            first[i] = f;
            offset[i + 1] = offset[i] + (i - f + 1);
        }
        let mut values = vec![0.0; offset[n]];
        for i in 0..n {
            let base = offset[i] - first[i];
            values[base + i] += a.diag[i];
            for &(j, v) in &a.off[i] {
                if j < i {
                    values[base + j] += v;
                }
            }
        }
        for i in 0..n {
            let fi = first[i];
            let bi = offset[i] - fi;
            for j in fi..i {
                let fj = first[j];
                let bj = offset[j] - fj;
                let k0 = fi.max(fj);
                let mut s = values[bi + j];
                let ri = &values[bi + k0..bi + j];
                let rj = &values[bj + k0..bj + j];
                for (x, y) in ri.iter().zip(rj) {
                    s -= x * y;
                }
                values[bi + j] = s / values[bj + j];
            }
            let mut d = values[bi + i];
            for x in &values[bi + fi..bi + i] {
                d -= x * x;
            }
            if !(d > 0.0) {
                bail!(Numerical, "matrix not positive definite at pivot {i}");
            }
            values[bi + i] = d.sqrt();
        }
        Ok(Self {
            first,
            offset,
            values,
        })
    }

    pub fn dim(&self) -> usize {
        self.first.len()
    }

    #[inline]
    fn row(&self, i: usize) -> &[f64] {
        &self.values[self.offset[i]..self.offset[i + 1]]
    }

    /// Solves L y = b in place.
    pub fn forward(&self, y: &mut [f64]) {
        for i in 0..self.dim() {
            let r = self.row(i);
            let fi = self.first[i];
            let mut s = y[i];
            for (k, l) in r[..r.len() - 1].iter().enumerate() {
                s -= l * y[fi + k];
            }
            y[i] = s / r[r.len() - 1];
        }
    }

    /// Solves L^T x = y in place.
    pub fn backward(&self, x: &mut [f64]) {
        for i in (0..self.dim()).rev() {
            let r = self.row(i);
            let fi = self.first[i];
            let xi = x[i] / r[r.len() - 1];
            x[i] = xi;
            for (k, l) in r[..r.len() - 1].iter().enumerate() {
                x[fi + k] -= l * xi;
            }
        }
    }

    /// Solves A x = b.
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let mut x = b.to_vec();
        self.forward(&mut x);
        self.backward(&mut x);
        x
    }

    /// Maps white noise z to L^{-T} z, which has covariance A^{-1}.
    pub fn color(&self, z: &mut [f64]) {
        self.backward(z);
    }
}

/// Preconditioned (Jacobi) conjugate gradient for SPD `a`. Returns the number
/// of iterations used.
pub fn conjugate_gradient(
    a: &SparseSym,
    b: &[f64],
    x: &mut [f64],
    rel_tol: f64,
    max_iter: usize,
) -> Result<usize> {
    let n = a.len();
    let mut ax = vec![0.0; n];
    a.mul_vec(x, &mut ax);
    let mut r: Vec<f64> = b.iter().zip(&ax).map(|(b, ax)| b - ax).collect();
    let bnorm = b.iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-300);
    let inv_d: Vec<f64> = a.diag.iter().map(|d| 1.0 / d).collect();
    let mut z: Vec<f64> = r.iter().zip(&inv_d).map(|(r, d)| r * d).collect();
    let mut p = z.clone();
    let mut rz: f64 = r.iter().zip(&z).map(|(a, b)| a * b).sum();
    let mut ap = vec![0.0; n];
    for it in 0..max_iter {
        let rnorm = r.iter().map(|v| v * v).sum::<f64>().sqrt();
        if rnorm <= rel_tol * bnorm {
            return Ok(it);
        }
        a.mul_vec(&p, &mut ap);
        let pap: f64 = p.iter().zip(&ap).map(|(a, b)| a * b).sum();
        if !(pap > 0.0) {
            bail!(Numerical, "conjugate gradient breakdown");
        }
        let alpha = rz / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
            z[i] = r[i] * inv_d[i];
        }
        let rz_new: f64 = r.iter().zip(&z).map(|(a, b)| a * b).sum();
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    bail!(
        Numerical,
        "conjugate gradient did not converge in {max_iter} iterations"
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn path_laplacian(n: usize, shift: f64) -> SparseSym {
        let mut a = SparseSym::zeros(n);
        for i in 0..n {
            a.diag[i] = 2.0 + shift;
            if i + 1 < n {
                a.add_off(i, i + 1, -1.0);
            }
        }
        a
    }

    fn random_spd(n: usize, seed: u64) -> SparseSym {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut a = SparseSym::zeros(n);
        for i in 0..n {
            for j in i + 1..n.min(i + 4) {
                if rng.random::<f64>() < 0.7 {
                    let w = rng.random::<f64>();
                    a.add_off(i, j, -w);
                    a.diag[i] += w;
                    a.diag[j] += w;
                }
            }
            a.diag[i] += 0.1;
        }
        a
    }

    #[test]
    fn envelope_matches_dense() {
        let a = random_spd(40, 3);
        let env = EnvelopeCholesky::factor(&a).unwrap();
        let dense = a.to_dense().cholesky().unwrap();
        let b: Vec<f64> = (0..40).map(|i| (i as f64).sin()).collect();
        let x1 = env.solve(&b);
        let x2 = dense.solve(&b);
        for (u, v) in x1.iter().zip(&x2) {
            assert!((u - v).abs() < 1e-10);
        }
        let mut ax = vec![0.0; 40];
        a.mul_vec(&x1, &mut ax);
        for (u, v) in ax.iter().zip(&b) {
            assert!((u - v).abs() < 1e-10);
        }
    }

    #[test]
    fn cg_matches_direct() {
        let a = path_laplacian(50, 0.01);
        let b: Vec<f64> = (0..50).map(|i| (i % 7) as f64 - 3.0).collect();
        let mut x = vec![0.0; 50];
        conjugate_gradient(&a, &b, &mut x, 1e-13, 1000).unwrap();
        let y = EnvelopeCholesky::factor(&a).unwrap().solve(&b);
        for (u, v) in x.iter().zip(&y) {
            assert!((u - v).abs() < 1e-8 * (1.0 + v.abs()));
        }
    }

    #[test]
    fn rejects_indefinite() {
        let mut a = path_laplacian(5, 0.0);
        a.diag[2] = -1.0;
        assert!(EnvelopeCholesky::factor(&a).is_err());
        assert!(a.to_dense().cholesky().is_err());
    }

    #[test]
    fn dense_inverse() {
        let a = random_spd(12, 9).to_dense();
        let inv = a.cholesky().unwrap().inverse();
        for i in 0..12 {
            for j in 0..12 {
                let s: f64 = (0..12).map(|k| a[(i, k)] * inv[(k, j)]).sum();
                let e = if i == j { 1.0 } else { 0.0 };
                assert!((s - e).abs() < 1e-10);
            }
        }
    }
}
