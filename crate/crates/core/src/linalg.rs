//! Dense symmetric matrices and a packed lower-triangular Cholesky factor
//! that can grow one row at a time.

/// Dense symmetric matrix, stored in full row-major form.
#[derive(Debug, Clone, PartialEq)]
pub struct SymMatrix {
    n: usize,
    data: Vec<f64>,
}

impl SymMatrix {
    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            data: vec![0.0; n * n],
        }
    }

    /// Builds the matrix from its lower triangle: `f(i, j)` is called for `j <= i`.
    pub fn from_lower_fn(n: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            for j in 0..=i {
                let v = f(i, j);
                m.data[i * n + j] = v;
                m.data[j * n + i] = v;
            }
        }
        m
    }

    pub fn size(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// `x^T A x`
    pub fn quadratic_form(&self, x: &[f64]) -> f64 {
        (0..self.n)
            .map(|i| x[i] * dot(self.row(i), x))
            .sum()
    }
}

/// Failure of a Cholesky step: the pivot at `index` was not positive.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NotPositiveDefinite {
    pub index: usize,
    pub pivot: f64,
}

/// Lower-triangular `L` stored row by row; row `i` holds `L[i][0..=i]`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct LowerFactor {
    n: usize,
    data: Vec<f64>,
}

fn row_start(i: usize) -> usize {
    i * (i + 1) / 2
}

impl LowerFactor {
    pub fn empty() -> Self {
        Self::default()
    }

    /// Right-looking Cholesky factorization `A = L L^T`.
    pub fn cholesky(a: &SymMatrix) -> Result<Self, NotPositiveDefinite> {
        let n = a.size();
        // column-major copy of the lower triangle so that updates run over contiguous memory
        let mut cols = vec![0.0; n * n];
        for j in 0..n {
            for i in j..n {
                cols[j * n + i] = a.get(i, j);
            }
        }
        for k in 0..n {
            let pivot = cols[k * n + k];
            if !(pivot > 0.0 && pivot.is_finite()) {
                return Err(NotPositiveDefinite { index: k, pivot });
            }
            let lkk = pivot.sqrt();
            let (head, tail) = cols.split_at_mut((k + 1) * n);
            let col_k = &mut head[k * n..];
            col_k[k] = lkk;
            for v in &mut col_k[k + 1..n] {
                *v /= lkk;
            }
            for j in (k + 1)..n {
                let ljk = col_k[j];
                if ljk == 0.0 {
                    continue;
                }
                let col_j = &mut tail[(j - k - 1) * n..(j - k) * n];
                for i in j..n {
                    col_j[i] -= col_k[i] * ljk;
                }
            }
        }
        let mut data = Vec::with_capacity(row_start(n));
        for i in 0..n {
            for j in 0..=i {
                data.push(cols[j * n + i]);
            }
        }
        Ok(Self { n, data })
    }

    pub fn size(&self) -> usize {
        self.n
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[row_start(i)..row_start(i + 1)]
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        if j > i {
            0.0
        } else {
            self.data[row_start(i) + j]
        }
    }

    pub fn diag(&self, i: usize) -> f64 {
        self.data[row_start(i) + i]
    }

    /// Appends a row given the already-solved off-diagonal part
    /// `offdiag = L^{-1} a` and the new diagonal entry.
    pub fn push_row(&mut self, offdiag: &[f64], diag: f64) {
        assert_eq!(offdiag.len(), self.n, "off-diagonal length must equal current size");
        self.data.extend_from_slice(offdiag);
        self.data.push(diag);
        self.n += 1;
    }

    /// Solves `L v = b`.
    pub fn solve_lower(&self, b: &[f64]) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.n);
        for i in 0..self.n {
            let row = self.row(i);
            let s = b[i] - dot(&row[..i], &v);
            v.push(s / row[i]);
        }
        v
    }

    /// Solves `L^T x = y`.
    pub fn solve_upper(&self, y: &[f64]) -> Vec<f64> {
        let mut x = y[..self.n].to_vec();
        for i in (0..self.n).rev() {
            let row = self.row(i);
            x[i] /= row[i];
            let xi = x[i];
            for (xj, lij) in x[..i].iter_mut().zip(&row[..i]) {
                *xj -= lij * xi;
            }
        }
        x
    }

    /// `L L^T` as a dense matrix.
    pub fn reconstruct(&self) -> SymMatrix {
        SymMatrix::from_lower_fn(self.n, |i, j| dot(&self.row(i)[..=j], self.row(j)))
    }

    /// `L z`, used to color white noise.
    pub fn mul_vec(&self, z: &[f64]) -> Vec<f64> {
        (0..self.n).map(|i| dot(self.row(i), &z[..=i])).collect()
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Dot product accumulated in double-double (TwoSum / FMA TwoProduct), plus
/// `init`. The result is as accurate as if computed in twice the working
/// precision and then rounded.
pub fn dot_compensated(init: f64, a: &[f64], b: &[f64]) -> f64 {
    let (mut hi, mut lo) = (init, 0.0);
    for (x, y) in a.iter().zip(b) {
        let p = x * y;
        let perr = x.mul_add(*y, -p);
        let s = hi + p;
        let bb = s - hi;
        let serr = (hi - (s - bb)) + (p - bb);
        hi = s;
        lo += perr + serr;
    }
    hi + lo
}
