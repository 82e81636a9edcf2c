//! Compressed sparse row, vertex-block-diagonal and diagonal matrices, plus
//! the two iterative kernels the solver needs (conjugate gradients and power
//! iteration).
//!
//! All products sum in ascending column order so that repeated and
//! row-parallel evaluations agree bit for bit.

use std::io::Write;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{shape_err, Error, Result};

/// Entries with `|v| < DROP_TOL * max|v|` are removed on construction.
pub const DROP_TOL: f64 = 1e-14;

/// Something that maps `x` to `y = A x`.
pub trait LinearOperator {
    fn nrows(&self) -> usize;
    fn ncols(&self) -> usize;
    /// Overwrites `y` with `A x`. Lengths are the caller's responsibility.
    fn apply_into(&self, x: &[f64], y: &mut [f64]);

    fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.ncols() {
            return Err(shape_err(
                format!("vector of length {}", self.ncols()),
                x.len(),
            ));
        }
        let mut y = vec![0.0; self.nrows()];
        self.apply_into(x, &mut y);
        Ok(y)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CsrMatrix {
    nrows: usize,
    ncols: usize,
    row_offsets: Vec<usize>,
    col_indices: Vec<usize>,
    values: Vec<f64>,
}

impl CsrMatrix {
    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        CsrMatrix {
            nrows,
            ncols,
            row_offsets: vec![0; nrows + 1],
            col_indices: Vec::new(),
            values: Vec::new(),
        }
    }

    pub fn identity(n: usize) -> Self {
        Self::from_triplets(n, n, (0..n).map(|i| (i, i, 1.0)))
            .expect("identity indices are in range")
    }

    /// Sums duplicates and drops numerical zeros. Duplicates are accumulated
    /// in the order given.
    pub fn from_triplets(
        nrows: usize,
        ncols: usize,
        triplets: impl IntoIterator<Item = (usize, usize, f64)>,
    ) -> Result<Self> {
        let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); nrows];
        for (i, j, v) in triplets {
            if i >= nrows || j >= ncols {
                return Err(Error::Index(format!(
                    "entry ({i}, {j}) in {nrows}x{ncols} matrix"
                )));
            }
            rows[i].push((j, v));
        }
        let mut row_offsets = Vec::with_capacity(nrows + 1);
        row_offsets.push(0);
        let mut col_indices = Vec::new();
        let mut values = Vec::new();
        for row in &mut rows {
            // stable: duplicates keep insertion order
            row.sort_by_key(|&(j, _)| j);
            let mut iter = row.iter().peekable();
            while let Some(&(j, mut v)) = iter.next() {
                while let Some(&&(k, w)) = iter.peek() {
                    if k != j {
                        break;
                    }
                    v += w;
                    iter.next();
                }
                col_indices.push(j);
                values.push(v);
            }
            row_offsets.push(col_indices.len());
        }
        let mut m = CsrMatrix {
            nrows,
            ncols,
            row_offsets,
            col_indices,
            values,
        };
        m.drop_small();
        Ok(m)
    }

    fn drop_small(&mut self) {
        let max = self.max_abs();
        let cut = DROP_TOL * max;
        if self.values.iter().all(|v| v.abs() >= cut && *v != 0.0) {
            return;
        }
        let mut offsets = Vec::with_capacity(self.nrows + 1);
        offsets.push(0);
        let mut cols = Vec::with_capacity(self.col_indices.len());
        let mut vals = Vec::with_capacity(self.values.len());
        for i in 0..self.nrows {
            for k in self.row_offsets[i]..self.row_offsets[i + 1] {
                let v = self.values[k];
                if v != 0.0 && v.abs() >= cut {
                    cols.push(self.col_indices[k]);
                    vals.push(v);
                }
            }
            offsets.push(cols.len());
        }
        self.row_offsets = offsets;
        self.col_indices = cols;
        self.values = vals;
    }

    pub fn from_diagonal(diag: &[f64]) -> Self {
        Self::from_triplets(
            diag.len(),
            diag.len(),
            diag.iter().enumerate().map(|(i, &v)| (i, i, v)),
        )
        .expect("diagonal indices are in range")
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Column indices and values of row `i`.
    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let r = self.row_offsets[i]..self.row_offsets[i + 1];
        (&self.col_indices[r.clone()], &self.values[r])
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (cols, vals) = self.row(i);
        cols.binary_search(&j).map(|k| vals[k]).unwrap_or(0.0)
    }

    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.nrows).flat_map(move |i| {
            let (c, v) = self.row(i);
            c.iter().zip(v).map(move |(&j, &x)| (i, j, x))
        })
    }

    pub fn transpose(&self) -> CsrMatrix {
        CsrMatrix::from_triplets(
            self.ncols,
            self.nrows,
            self.triplets().map(|(i, j, v)| (j, i, v)),
        )
        .expect("transpose indices are in range")
    }

    pub fn spmv(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.apply(x)
    }

    /// Row-parallel product; bit-identical to the serial one.
    pub fn par_spmv(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.ncols {
            return Err(shape_err(
                format!("vector of length {}", self.ncols),
                x.len(),
            ));
        }
        Ok((0..self.nrows)
            .into_par_iter()
            .map(|i| self.row_dot(i, x))
            .collect())
    }

    #[inline]
    fn row_dot(&self, i: usize, x: &[f64]) -> f64 {
        let (cols, vals) = self.row(i);
        cols.iter()
            .zip(vals)
            .fold(0.0, |acc, (&j, &v)| acc + v * x[j])
    }

    /// Sparse product `self * other`.
    pub fn matmul(&self, other: &CsrMatrix) -> Result<CsrMatrix> {
        if self.ncols != other.nrows {
            return Err(shape_err(format!("{} rows", self.ncols), other.nrows));
        }
        let mut trips = Vec::new();
        for i in 0..self.nrows {
            let (ca, va) = self.row(i);
            for (&k, &a) in ca.iter().zip(va) {
                let (cb, vb) = other.row(k);
                trips.extend(cb.iter().zip(vb).map(|(&j, &b)| (i, j, a * b)));
            }
        }
        CsrMatrix::from_triplets(self.nrows, other.ncols, trips)
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut d = DMatrix::zeros(self.nrows, self.ncols);
        for (i, j, v) in self.triplets() {
            d[(i, j)] = v;
        }
        d
    }

    /// Largest `|a_ij - a_ji|`.
    pub fn asymmetry(&self) -> f64 {
        self.triplets()
            .map(|(i, j, v)| (v - self.get(j, i)).abs())
            .fold(0.0, f64::max)
    }

    /// Coordinate-list dump: header `rows cols nnz`, then `i j value` lines.
    pub fn write_coo<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "{} {} {}", self.nrows, self.ncols, self.nnz())?;
        for (i, j, v) in self.triplets() {
            writeln!(out, "{i} {j} {v:?}")?;
        }
        Ok(())
    }
}

impl LinearOperator for CsrMatrix {
    fn nrows(&self) -> usize {
        self.nrows
    }

    fn ncols(&self) -> usize {
        self.ncols
    }

    fn apply_into(&self, x: &[f64], y: &mut [f64]) {
        for (i, yi) in y.iter_mut().enumerate() {
            *yi = self.row_dot(i, x);
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DiagonalMatrix {
    pub diag: Vec<f64>,
}

impl DiagonalMatrix {
    pub fn new(diag: Vec<f64>) -> Self {
        DiagonalMatrix { diag }
    }

    pub fn len(&self) -> usize {
        self.diag.len()
    }

    pub fn is_empty(&self) -> bool {
        self.diag.is_empty()
    }

    pub fn inverse(&self) -> Result<DiagonalMatrix> {
        if let Some(i) = self.diag.iter().position(|&d| d == 0.0 || !d.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "diagonal entry {i} is not invertible"
            )));
        }
        Ok(DiagonalMatrix::new(
            self.diag.iter().map(|d| 1.0 / d).collect(),
        ))
    }

    pub fn to_csr(&self) -> CsrMatrix {
        CsrMatrix::from_diagonal(&self.diag)
    }
}

impl LinearOperator for DiagonalMatrix {
    fn nrows(&self) -> usize {
        self.diag.len()
    }

    fn ncols(&self) -> usize {
        self.diag.len()
    }

    fn apply_into(&self, x: &[f64], y: &mut [f64]) {
        for ((yi, d), xi) in y.iter_mut().zip(&self.diag).zip(x) {
            *yi = d * xi;
        }
    }
}

/// Block-diagonal matrix whose blocks are indexed by mesh vertices.
#[derive(Clone, Debug, PartialEq)]
pub struct VertexBlockMatrix {
    /// Global indices belonging to each block, in block order.
    block_dofs: Vec<Vec<usize>>,
    blocks: Vec<DMatrix<f64>>,
    /// `(block, position)` of every global index.
    locate: Vec<(usize, usize)>,
}

impl VertexBlockMatrix {
    /// `block_dofs[v]` lists the global indices of block `v`; together they
    /// must partition `0..dim`.
    pub fn new(dim: usize, block_dofs: Vec<Vec<usize>>) -> Result<Self> {
        let mut locate = vec![(usize::MAX, 0); dim];
        for (b, dofs) in block_dofs.iter().enumerate() {
            for (p, &d) in dofs.iter().enumerate() {
                let slot = locate
                    .get_mut(d)
                    .ok_or_else(|| Error::Index(format!("dof {d} in block {b} exceeds {dim}")))?;
                if slot.0 != usize::MAX {
                    return Err(Error::InvalidArgument(format!(
                        "dof {d} appears in two blocks"
                    )));
                }
                *slot = (b, p);
            }
        }
        if let Some(d) = locate.iter().position(|s| s.0 == usize::MAX) {
            return Err(Error::InvalidArgument(format!(
                "dof {d} belongs to no block"
            )));
        }
        let blocks = block_dofs
            .iter()
            .map(|d| DMatrix::zeros(d.len(), d.len()))
            .collect();
        Ok(VertexBlockMatrix {
            block_dofs,
            blocks,
            locate,
        })
    }

    pub fn dim(&self) -> usize {
        self.locate.len()
    }

    pub fn num_blocks(&self) -> usize {
        self.blocks.len()
    }

    pub fn block(&self, b: usize) -> &DMatrix<f64> {
        &self.blocks[b]
    }

    pub fn block_dofs(&self, b: usize) -> &[usize] {
        &self.block_dofs[b]
    }

    pub fn locate(&self, dof: usize) -> (usize, usize) {
        self.locate[dof]
    }

    /// Adds `v` at global `(i, j)`; fails if `i` and `j` live in different
    /// blocks.
    pub fn add(&mut self, i: usize, j: usize, v: f64) -> Result<()> {
        let (bi, pi) = self.locate[i];
        let (bj, pj) = self.locate[j];
        if bi != bj {
            return Err(Error::InvalidArgument(format!(
                "entry ({i}, {j}) couples blocks {bi} and {bj}"
            )));
        }
        self.blocks[bi][(pi, pj)] += v;
        Ok(())
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (bi, pi) = self.locate[i];
        let (bj, pj) = self.locate[j];
        if bi == bj {
            self.blocks[bi][(pi, pj)]
        } else {
            0.0
        }
    }

    /// Largest block asymmetry `|B - B^T|`.
    pub fn asymmetry(&self) -> f64 {
        self.blocks
            .iter()
            .map(|b| (b - b.transpose()).abs().max())
            .fold(0.0, f64::max)
    }

    /// Per-block inverse through a Cholesky factorization.
    pub fn invert_blocks(&self) -> Result<VertexBlockMatrix> {
        let mut blocks = Vec::with_capacity(self.blocks.len());
        for (b, m) in self.blocks.iter().enumerate() {
            if m.nrows() == 0 {
                blocks.push(m.clone());
                continue;
            }
            let chol = m
                .clone()
                .cholesky()
                .ok_or(Error::Degenerate { vertex: b })?;
            let inv = chol.inverse();
            // average the two triangles so the result is exactly symmetric
            let sym = (&inv + inv.transpose()) * 0.5;
            blocks.push(sym);
        }
        Ok(VertexBlockMatrix {
            block_dofs: self.block_dofs.clone(),
            blocks,
            locate: self.locate.clone(),
        })
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut d = DMatrix::zeros(self.dim(), self.dim());
        for (dofs, m) in self.block_dofs.iter().zip(&self.blocks) {
            for (a, &i) in dofs.iter().enumerate() {
                for (b, &j) in dofs.iter().enumerate() {
                    d[(i, j)] = m[(a, b)];
                }
            }
        }
        d
    }

    pub fn to_csr(&self) -> CsrMatrix {
        let mut trips = Vec::new();
        for (dofs, m) in self.block_dofs.iter().zip(&self.blocks) {
            for (a, &i) in dofs.iter().enumerate() {
                for (b, &j) in dofs.iter().enumerate() {
                    trips.push((i, j, m[(a, b)]));
                }
            }
        }
        CsrMatrix::from_triplets(self.dim(), self.dim(), trips).expect("block indices are in range")
    }
}

impl LinearOperator for VertexBlockMatrix {
    fn nrows(&self) -> usize {
        self.dim()
    }

    fn ncols(&self) -> usize {
        self.dim()
    }

    fn apply_into(&self, x: &[f64], y: &mut [f64]) {
        for (dofs, m) in self.block_dofs.iter().zip(&self.blocks) {
            for (a, &i) in dofs.iter().enumerate() {
                y[i] = dofs
                    .iter()
                    .enumerate()
                    .fold(0.0, |acc, (b, &j)| acc + m[(a, b)] * x[j]);
            }
        }
    }
}

/// Explicit `P B P^T` for a block-diagonal `B`. Symmetric pairs are averaged
/// when they agree to `1e-13 * max|a|`.
pub fn triple_product(p: &CsrMatrix, b: &VertexBlockMatrix) -> Result<CsrMatrix> {
    if p.ncols != b.dim() {
        return Err(shape_err(format!("{} columns", b.dim()), p.ncols));
    }
    let pt = p.transpose();
    let mut trips = Vec::new();
    for i in 0..p.nrows {
        // row i of P B, accumulated per block
        let (cols, vals) = p.row(i);
        let mut pb: Vec<(usize, f64)> = Vec::new();
        for (&k, &pik) in cols.iter().zip(vals) {
            let (blk, pos) = b.locate(k);
            let m = b.block(blk);
            for (q, &j) in b.block_dofs(blk).iter().enumerate() {
                pb.push((j, pik * m[(pos, q)]));
            }
        }
        pb.sort_by_key(|&(j, _)| j);
        // (P B) P^T: combine with column structure of P^T, i.e. rows of P^T
        for (j, v) in pb {
            let (rcols, rvals) = pt.row(j);
            for (&l, &pl) in rcols.iter().zip(rvals) {
                trips.push((i, l, v * pl));
            }
        }
    }
    let mut m = CsrMatrix::from_triplets(p.nrows, p.nrows, trips)?;
    symmetrize(&mut m, 1e-13)?;
    Ok(m)
}

fn symmetrize(m: &mut CsrMatrix, rel_tol: f64) -> Result<()> {
    let tol = rel_tol * m.max_abs();
    let snapshot = m.clone();
    for i in 0..m.nrows {
        for k in m.row_offsets[i]..m.row_offsets[i + 1] {
            let j = m.col_indices[k];
            let a = snapshot.values[k];
            let b = snapshot.get(j, i);
            if (a - b).abs() > tol {
                return Err(Error::InvalidArgument(format!(
                    "product is not symmetric at ({i}, {j}): {a} vs {b}"
                )));
            }
            // addition commutes, so (i, j) and (j, i) receive identical bits
            m.values[k] = 0.5 * (a + b);
        }
    }
    Ok(())
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[derive(Clone, Debug, PartialEq)]
pub struct CgSolution {
    pub x: Vec<f64>,
    pub iterations: usize,
    /// Final relative residual `|b - A x| / |b|`.
    pub relative_residual: f64,
}

/// Conjugate gradients for a symmetric positive definite operator, stopping
/// once `|b - A x| <= tol |b|`.
pub fn conjugate_gradient(
    apply: impl Fn(&[f64], &mut [f64]),
    b: &[f64],
    tol: f64,
    max_iter: usize,
) -> Result<CgSolution> {
    let n = b.len();
    let bnorm = dot(b, b).sqrt();
    let mut x = vec![0.0; n];
    if bnorm == 0.0 {
        return Ok(CgSolution {
            x,
            iterations: 0,
            relative_residual: 0.0,
        });
    }
    let mut r = b.to_vec();
    let mut p = r.clone();
    let mut ap = vec![0.0; n];
    let mut rr = dot(&r, &r);
    for it in 1..=max_iter {
        apply(&p, &mut ap);
        let pap = dot(&p, &ap);
        if !(pap > 0.0) {
            return Err(Error::NotConverged {
                method: "conjugate gradient (operator not positive definite)",
                iterations: it,
                residual: rr.sqrt() / bnorm,
            });
        }
        let alpha = rr / pap;
        x.iter_mut().zip(&p).for_each(|(xi, pi)| *xi += alpha * pi);
        r.iter_mut().zip(&ap).for_each(|(ri, ai)| *ri -= alpha * ai);
        let rr_new = dot(&r, &r);
        if rr_new.sqrt() <= tol * bnorm {
            return Ok(CgSolution {
                x,
                iterations: it,
                relative_residual: rr_new.sqrt() / bnorm,
            });
        }
        let beta = rr_new / rr;
        p.iter_mut()
            .zip(&r)
            .for_each(|(pi, ri)| *pi = ri + beta * *pi);
        rr = rr_new;
    }
    Err(Error::NotConverged {
        method: "conjugate gradient",
        iterations: max_iter,
        residual: rr.sqrt() / bnorm,
    })
}

/// Largest eigenvalue of an operator that is self-adjoint and positive
/// semi-definite with respect to `inner`. Stops when the Rayleigh quotient
/// changes by less than `tol` relative between iterations.
pub fn power_iteration_max_eig(
    dim: usize,
    apply: impl Fn(&[f64], &mut [f64]),
    inner: impl Fn(&[f64], &[f64]) -> f64,
    tol: f64,
    max_iter: usize,
) -> Result<f64> {
    if dim == 0 {
        return Ok(0.0);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let mut x: Vec<f64> = (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let norm = inner(&x, &x).sqrt();
    x.iter_mut().for_each(|v| *v /= norm);
    let mut y = vec![0.0; dim];
    let mut lambda = f64::NAN;
    for it in 0..max_iter {
        apply(&x, &mut y);
        let next = inner(&y, &x);
        let ynorm = inner(&y, &y).sqrt();
        if ynorm == 0.0 {
            return Ok(0.0);
        }
        if it > 0 && (next - lambda).abs() <= tol * next.abs() {
            return Ok(next);
        }
        lambda = next;
        for (xi, yi) in x.iter_mut().zip(&y) {
            *xi = yi / ynorm;
        }
    }
    Err(Error::NotConverged {
        method: "power iteration",
        iterations: max_iter,
        residual: lambda,
    })
}

/// Largest eigenvalue of the symmetric tridiagonal matrix with diagonal
/// `alpha` and off-diagonal `beta`, by Sturm-sequence bisection.
fn tridiagonal_max_eig(alpha: &[f64], beta: &[f64]) -> f64 {
    let m = alpha.len();
    let off = |i: usize| if i < beta.len() { beta[i].abs() } else { 0.0 };
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for i in 0..m {
        let r = off(i) + if i > 0 { off(i - 1) } else { 0.0 };
        lo = lo.min(alpha[i] - r);
        hi = hi.max(alpha[i] + r);
    }
    // number of eigenvalues below x
    let count = |x: f64| {
        let mut n = 0;
        let mut d = 1.0;
        for i in 0..m {
            d = alpha[i]
                - x
                - if i > 0 {
                    beta[i - 1] * beta[i - 1] / d
                } else {
                    0.0
                };
            if d == 0.0 {
                d = -f64::EPSILON * (x.abs() + f64::MIN_POSITIVE);
            }
            if d < 0.0 {
                n += 1;
            }
        }
        n
    };
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if count(mid) < m {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    hi
}

/// Largest eigenvalue of an operator that is self-adjoint and positive
/// semi-definite in the inner product `<x, y> = x^T W y`, by the Lanczos
/// three-term recurrence. `weight` applies the symmetric positive definite
/// `W`. The top Ritz value increases monotonically towards the answer; the
/// iteration stops once it changes by less than `tol` (relative) over ten
/// steps, or the Krylov space is exhausted. Without reorthogonalization
/// spurious copies of converged Ritz values may appear, which does not
/// affect the largest one.
pub fn lanczos_max_eig(
    dim: usize,
    apply: impl Fn(&[f64], &mut [f64]),
    weight: impl Fn(&[f64], &mut [f64]),
    tol: f64,
    max_iter: usize,
) -> Result<f64> {
    if dim == 0 {
        return Ok(0.0);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let mut q: Vec<f64> = (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let mut wq = vec![0.0; dim];
    weight(&q, &mut wq);
    let norm = dot(&q, &wq).sqrt();
    q.iter_mut().for_each(|v| *v /= norm);
    wq.iter_mut().for_each(|v| *v /= norm);
    let mut q_prev = vec![0.0; dim];
    let (mut alpha, mut beta) = (Vec::<f64>::new(), Vec::<f64>::new());
    let mut ritz = Vec::new();
    let mut scale = 0.0f64;
    let mut w = vec![0.0; dim];
    let mut ww = vec![0.0; dim];
    for k in 0..max_iter {
        apply(&q, &mut w);
        if let Some(&b) = beta.last() {
            w.iter_mut().zip(&q_prev).for_each(|(wi, pi)| *wi -= b * pi);
        }
        let a = dot(&w, &wq);
        w.iter_mut().zip(&q).for_each(|(wi, qi)| *wi -= a * qi);
        alpha.push(a);
        weight(&w, &mut ww);
        let b = dot(&w, &ww).max(0.0).sqrt();
        scale = scale.max(a.abs());
        let exhausted = k + 1 == dim || b <= 1e-12 * scale;
        if exhausted || k % 10 == 9 {
            let theta = tridiagonal_max_eig(&alpha, &beta);
            let settled = ritz
                .last()
                .is_some_and(|&r: &f64| (theta - r).abs() <= tol * theta.abs());
            ritz.push(theta);
            if exhausted || settled {
                return Ok(theta.max(0.0));
            }
        }
        beta.push(b);
        std::mem::swap(&mut q_prev, &mut q);
        q.iter_mut().zip(&w).for_each(|(qi, wi)| *qi = wi / b);
        wq.iter_mut().zip(&ww).for_each(|(qi, wi)| *qi = wi / b);
    }
    Err(Error::NotConverged {
        method: "Lanczos",
        iterations: max_iter,
        residual: ritz.last().copied().unwrap_or(f64::NAN),
    })
}
