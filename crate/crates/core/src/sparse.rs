//! Compressed sparse rows, a geometric nested-dissection ordering and an up-looking
//! sparse LDLᵀ factorization for symmetric systems.

use std::io::Write;

use crate::bernstein::Vec2;
use crate::error::{Error, Result};

/// Square sparse matrix in compressed row form, columns sorted within each row.
#[derive(Clone, Debug, PartialEq)]
pub struct CsrMatrix {
    pub n: usize,
    pub row_ptr: Vec<usize>,
    pub col_idx: Vec<usize>,
    pub values: Vec<f64>,
}

impl CsrMatrix {
    /// Sums duplicate entries.
    pub fn from_triplets(n: usize, mut t: Vec<(usize, usize, f64)>) -> Self {
        t.sort_unstable_by_key(|&(r, c, _)| (r, c));
        let mut row_ptr = vec![0; n + 1];
        let mut col_idx = Vec::with_capacity(t.len());
        let mut values: Vec<f64> = Vec::with_capacity(t.len());
        let mut last = None;
        for (r, c, v) in t {
            if last == Some((r, c)) {
                *values.last_mut().unwrap() += v;
            } else {
                col_idx.push(c);
                values.push(v);
                row_ptr[r + 1] += 1;
                last = Some((r, c));
            }
        }
        for i in 0..n {
            row_ptr[i + 1] += row_ptr[i];
        }
        Self {
            n,
            row_ptr,
            col_idx,
            values,
        }
    }

    pub fn identity(n: usize) -> Self {
        Self::from_triplets(n, (0..n).map(|i| (i, i, 1.0)).collect())
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let range = self.row_ptr[r]..self.row_ptr[r + 1];
        self.col_idx[range.clone()]
            .iter()
            .copied()
            .zip(self.values[range].iter().copied())
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        let range = self.row_ptr[r]..self.row_ptr[r + 1];
        match self.col_idx[range.clone()].binary_search(&c) {
            Ok(k) => self.values[range.start + k],
            Err(_) => 0.0,
        }
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        (0..self.n).map(|r| self.row(r).map(|(c, v)| v * x[c]).sum()).collect()
    }

    /// Largest `|a_ij − a_ji|` relative to the largest entry.
    pub fn asymmetry(&self) -> f64 {
        let scale = self
            .values
            .iter()
            .fold(0.0f64, |m, v| m.max(v.abs()))
            .max(f64::MIN_POSITIVE);
        let mut worst = 0.0f64;
        for r in 0..self.n {
            for (c, v) in self.row(r) {
                worst = worst.max((v - self.get(c, r)).abs());
            }
        }
        worst / scale
    }

    pub fn to_dense(&self) -> nalgebra::DMatrix<f64> {
        let mut m = nalgebra::DMatrix::zeros(self.n, self.n);
        for r in 0..self.n {
            for (c, v) in self.row(r) {
                m[(r, c)] += v;
            }
        }
        m
    }

    /// Writes the matrix in Matrix Market coordinate format.
    pub fn write_matrix_market(&self, w: &mut impl Write) -> std::io::Result<()> {
        writeln!(w, "%%MatrixMarket matrix coordinate real general")?;
        writeln!(w, "{} {} {}", self.n, self.n, self.nnz())?;
        for r in 0..self.n {
            for (c, v) in self.row(r) {
                writeln!(w, "{} {} {:.17e}", r + 1, c + 1, v)?;
            }
        }
        Ok(())
    }
}

const ND_LEAF: usize = 48;

/// Fill-reducing elimination order by recursive coordinate bisection. Each cut keeps the
/// nodes of one half that touch the other half as a separator, ordered last.
///
/// Returns `perm` with `perm[k]` the original index eliminated `k`-th.
pub fn nested_dissection(a: &CsrMatrix, coords: &[Vec2]) -> Vec<usize> {
    assert_eq!(coords.len(), a.n);
    let mut out = Vec::with_capacity(a.n);
    let mut stamp = vec![0usize; a.n];
    let mut counter = 0usize;
    let mut stack: Vec<Task> = vec![Task::Split((0..a.n).collect())];
    enum Task {
        Split(Vec<usize>),
        Emit(Vec<usize>),
    }
    while let Some(task) = stack.pop() {
        let mut nodes = match task {
            Task::Emit(v) => {
                out.extend(v);
                continue;
            }
            Task::Split(v) => v,
        };
        if nodes.len() <= ND_LEAF {
            out.extend(nodes);
            continue;
        }
        let (mut lo, mut hi) = (Vec2::repeat(f64::INFINITY), Vec2::repeat(f64::NEG_INFINITY));
        for &i in &nodes {
            lo = lo.inf(&coords[i]);
            hi = hi.sup(&coords[i]);
        }
        let axis = if hi.x - lo.x >= hi.y - lo.y { 0 } else { 1 };
        nodes.sort_by(|&i, &j| coords[i][axis].total_cmp(&coords[j][axis]).then(i.cmp(&j)));
        let right = nodes.split_off(nodes.len() / 2);
        counter += 1;
        for &i in &right {
            stamp[i] = counter;
        }
        let (sep, left): (Vec<usize>, Vec<usize>) = nodes
            .into_iter()
            .partition(|&i| a.row(i).any(|(c, _)| stamp[c] == counter));
        // processed in reverse: left, right, then separator
        stack.push(Task::Emit(sep));
        stack.push(Task::Split(right));
        stack.push(Task::Split(left));
    }
    out
}

/// `P A Pᵀ = L D Lᵀ` with unit lower-triangular `L` stored by columns.
#[derive(Clone, Debug)]
pub struct LdlFactor {
    n: usize,
    perm: Vec<usize>,
    lp: Vec<usize>,
    li: Vec<usize>,
    lx: Vec<f64>,
    d: Vec<f64>,
}

impl LdlFactor {
    /// Factors a symmetric matrix (only the pattern of `a` and its lower or upper part
    /// are read consistently; `a` is assumed symmetric).
    pub fn new(a: &CsrMatrix, perm: Vec<usize>) -> Result<Self> {
        let n = a.n;
        let mut iperm = vec![0; n];
        for (k, &p) in perm.iter().enumerate() {
            iperm[p] = k;
        }
        // column k of the permuted upper triangle: entries of row perm[k] mapped through iperm
        let col = |k: usize| a.row(perm[k]).map(|(c, v)| (iperm[c], v)).filter(move |&(i, _)| i <= k);

        let none = usize::MAX;
        let mut parent = vec![none; n];
        let mut flag = vec![none; n];
        let mut lnz = vec![0usize; n];
        for k in 0..n {
            flag[k] = k;
            for (mut i, _) in col(k) {
                while i < k && flag[i] != k {
                    if parent[i] == none {
                        parent[i] = k;
                    }
                    lnz[i] += 1;
                    flag[i] = k;
                    i = parent[i];
                }
            }
        }
        let mut lp = vec![0; n + 1];
        for k in 0..n {
            lp[k + 1] = lp[k] + lnz[k];
        }
        let total = lp[n];
        let mut li = vec![0; total];
        let mut lx = vec![0.0; total];
        let mut d = vec![0.0; n];
        let mut y = vec![0.0; n];
        let mut pattern = vec![0usize; n];
        let scale = a.values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        lnz.iter_mut().for_each(|x| *x = 0);
        for k in 0..n {
            let mut top = n;
            flag[k] = k;
            for (i0, v) in col(k) {
                y[i0] += v;
                let mut len = 0;
                let mut i = i0;
                while flag[i] != k {
                    pattern[len] = i;
                    len += 1;
                    flag[i] = k;
                    i = parent[i];
                }
                while len > 0 {
                    top -= 1;
                    len -= 1;
                    pattern[top] = pattern[len];
                }
            }
            d[k] = y[k];
            y[k] = 0.0;
            while top < n {
                let i = pattern[top];
                let yi = y[i];
                y[i] = 0.0;
                let p2 = lp[i] + lnz[i];
                for p in lp[i]..p2 {
                    y[li[p]] -= lx[p] * yi;
                }
                let lki = yi / d[i];
                d[k] -= lki * yi;
                li[p2] = k;
                lx[p2] = lki;
                lnz[i] += 1;
                top += 1;
            }
            if !(d[k].abs() > 1e-14 * scale) {
                let dmax = d[..=k].iter().fold(0.0f64, |m, v| m.max(v.abs()));
                return Err(Error::SingularMatrix {
                    row: perm[k],
                    pivot: d[k],
                    condition_estimate: dmax / d[k].abs(),
                });
            }
        }
        Ok(Self { n, perm, lp, li, lx, d })
    }

    pub fn nnz(&self) -> usize {
        self.lx.len()
    }

    /// Ratio of the largest to the smallest pivot magnitude.
    pub fn pivot_ratio(&self) -> f64 {
        let (lo, hi) = self.d.iter().fold((f64::INFINITY, 0.0f64), |(lo, hi), v| {
            (lo.min(v.abs()), hi.max(v.abs()))
        });
        hi / lo
    }

    /// Number of negative pivots (the inertia's negative count).
    pub fn negative_pivots(&self) -> usize {
        self.d.iter().filter(|&&v| v < 0.0).count()
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.n;
        let mut x: Vec<f64> = (0..n).map(|k| b[self.perm[k]]).collect();
        for j in 0..n {
            let xj = x[j];
            for p in self.lp[j]..self.lp[j + 1] {
                x[self.li[p]] -= self.lx[p] * xj;
            }
        }
        for j in 0..n {
            x[j] /= self.d[j];
        }
        for j in (0..n).rev() {
            let mut s = x[j];
            for p in self.lp[j]..self.lp[j + 1] {
                s -= self.lx[p] * x[self.li[p]];
            }
            x[j] = s;
        }
        let mut out = vec![0.0; n];
        for k in 0..n {
            out[self.perm[k]] = x[k];
        }
        out
    }
}

/// Solution and the achieved relative residual `‖Ax − b‖ / ‖b‖`.
#[derive(Clone, Debug)]
pub struct SparseSolution {
    pub x: Vec<f64>,
    pub relative_residual: f64,
    pub factor_nnz: usize,
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Direct solve with a few steps of iterative refinement.
pub fn solve_symmetric(a: &CsrMatrix, b: &[f64], coords: Option<&[Vec2]>) -> Result<SparseSolution> {
    if b.len() != a.n {
        return Err(Error::Solver(format!(
            "right-hand side has length {}, matrix has {} rows",
            b.len(),
            a.n
        )));
    }
    let perm = match coords {
        Some(c) => nested_dissection(a, c),
        None => (0..a.n).collect(),
    };
    let f = LdlFactor::new(a, perm)?;
    let mut x = f.solve(b);
    let bn = norm(b).max(f64::MIN_POSITIVE);
    let mut rel = f64::INFINITY;
    for _ in 0..3 {
        let ax = a.mul_vec(&x);
        let r: Vec<f64> = b.iter().zip(&ax).map(|(b, a)| b - a).collect();
        rel = norm(&r) / bn;
        if rel <= 1e-14 {
            break;
        }
        let dx = f.solve(&r);
        x.iter_mut().zip(&dx).for_each(|(x, d)| *x += d);
    }
    let ax = a.mul_vec(&x);
    let r: Vec<f64> = b.iter().zip(&ax).map(|(b, a)| b - a).collect();
    rel = rel.min(norm(&r) / bn);
    if !rel.is_finite() {
        return Err(Error::Solver("solution is not finite".into()));
    }
    if rel > 1e-10 {
        log::warn!(
            "sparse solve: relative residual {rel:e}, pivot ratio {:e}",
            f.pivot_ratio()
        );
    }
    Ok(SparseSolution {
        x,
        relative_residual: rel,
        factor_nnz: f.nnz(),
    })
}
