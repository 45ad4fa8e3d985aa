//! Compressed sparse row matrices built from triplets.

use nalgebra::DMatrix;

use crate::par::Exec;

/// Triplet accumulator with 32-bit indices.
#[derive(Debug, Clone, Default)]
pub struct Triplets {
    pub entries: Vec<(u32, u32, f64)>,
}

impl Triplets {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, i: usize, j: usize, v: f64) {
        self.entries.push((i as u32, j as u32, v));
    }

    pub fn extend(&mut self, other: Triplets) {
        self.entries.extend(other.entries);
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    nrows: usize,
    ncols: usize,
    indptr: Vec<usize>,
    indices: Vec<u32>,
    data: Vec<f64>,
}

impl CsrMatrix {
    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        CsrMatrix { nrows, ncols, indptr: vec![0; nrows + 1], indices: Vec::new(), data: Vec::new() }
    }

    /// Sums duplicates; consumes the triplets.
    pub fn from_triplets(nrows: usize, ncols: usize, t: Triplets) -> Self {
        let mut counts = vec![0usize; nrows + 1];
        for &(i, _, _) in &t.entries {
            counts[i as usize + 1] += 1;
        }
        for i in 0..nrows {
            counts[i + 1] += counts[i];
        }
        let mut next = counts.clone();
        let mut cols = vec![0u32; t.entries.len()];
        let mut vals = vec![0.0; t.entries.len()];
        for (i, j, v) in t.entries {
            let k = next[i as usize];
            cols[k] = j;
            vals[k] = v;
            next[i as usize] += 1;
        }
        let mut indptr = vec![0usize; nrows + 1];
        let mut indices = Vec::new();
        let mut data = Vec::new();
        let mut order: Vec<usize> = Vec::new();
        for i in 0..nrows {
            let (s, e) = (counts[i], counts[i + 1]);
            order.clear();
            order.extend(s..e);
            order.sort_unstable_by_key(|&k| cols[k]);
            let mut last = u32::MAX;
            for &k in &order {
                if cols[k] == last {
                    *data.last_mut().expect("entry") += vals[k];
                } else {
                    indices.push(cols[k]);
                    data.push(vals[k]);
                    last = cols[k];
                }
            }
            indptr[i + 1] = indices.len();
        }
        CsrMatrix { nrows, ncols, indptr, indices, data }
    }

    pub fn from_dense(m: &DMatrix<f64>) -> Self {
        let mut t = Triplets::new();
        for i in 0..m.nrows() {
            for j in 0..m.ncols() {
                if m[(i, j)] != 0.0 {
                    t.push(i, j, m[(i, j)]);
                }
            }
        }
        Self::from_triplets(m.nrows(), m.ncols(), t)
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.data.len()
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let (s, e) = (self.indptr[i], self.indptr[i + 1]);
        self.indices[s..e].iter().zip(&self.data[s..e]).map(|(&j, &v)| (j as usize, v))
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (s, e) = (self.indptr[i], self.indptr[i + 1]);
        match self.indices[s..e].binary_search(&(j as u32)) {
            Ok(k) => self.data[s + k],
            Err(_) => 0.0,
        }
    }

    #[inline]
    fn row_dot(&self, i: usize, x: &[f64]) -> f64 {
        let (s, e) = (self.indptr[i], self.indptr[i + 1]);
        let cols = &self.indices[s..e];
        let vals = &self.data[s..e];
        let mut acc = [0.0; 4];
        let mut cc = cols.chunks_exact(4);
        let mut vc = vals.chunks_exact(4);
        for (c, v) in (&mut cc).zip(&mut vc) {
            acc[0] += v[0] * x[c[0] as usize];
            acc[1] += v[1] * x[c[1] as usize];
            acc[2] += v[2] * x[c[2] as usize];
            acc[3] += v[3] * x[c[3] as usize];
        }
        for (c, v) in cc.remainder().iter().zip(vc.remainder()) {
            acc[0] += v * x[*c as usize];
        }
        (acc[0] + acc[1]) + (acc[2] + acc[3])
    }

    /// `y = M x`.
    pub fn matvec(&self, x: &[f64], y: &mut [f64], exec: Exec) {
        exec.fill(y, |i| self.row_dot(i, x));
    }

    /// `y += M x`.
    pub fn matvec_add(&self, x: &[f64], y: &mut [f64], exec: Exec) {
        exec.fill_add(y, |i| self.row_dot(i, x));
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.nrows];
        self.matvec(x, &mut y, Exec::Sequential);
        y
    }

    pub fn transpose(&self) -> CsrMatrix {
        let mut t = Triplets::new();
        t.entries.reserve(self.nnz());
        for i in 0..self.nrows {
            for (j, v) in self.row(i) {
                t.push(j, i, v);
            }
        }
        CsrMatrix::from_triplets(self.ncols, self.nrows, t)
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |a, &b| a.max(b.abs()))
    }

    /// `max |M − Mᵀ|` over stored entries of both.
    pub fn symmetry_defect(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..self.nrows {
            for (j, v) in self.row(i) {
                worst = worst.max((v - self.get(j, i)).abs());
            }
        }
        worst
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.nrows, self.ncols);
        for i in 0..self.nrows {
            for (j, v) in self.row(i) {
                m[(i, j)] += v;
            }
        }
        m
    }

    /// Restriction to the given rows and columns (index lists map new → old).
    pub fn submatrix(&self, rows: &[usize], cols: &[usize]) -> CsrMatrix {
        let mut colmap = vec![u32::MAX; self.ncols];
        for (k, &c) in cols.iter().enumerate() {
            colmap[c] = k as u32;
        }
        let mut t = Triplets::new();
        for (k, &r) in rows.iter().enumerate() {
            for (j, v) in self.row(r) {
                let c = colmap[j];
                if c != u32::MAX {
                    t.push(k, c as usize, v);
                }
            }
        }
        CsrMatrix::from_triplets(rows.len(), cols.len(), t)
    }

    /// Iterates all stored entries.
    pub fn entries(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.nrows).flat_map(move |i| self.row(i).map(move |(j, v)| (i, j, v)))
    }

    /// Block matrix from blocks placed at row/column offsets.
    pub fn from_blocks(nrows: usize, ncols: usize, blocks: &[(&CsrMatrix, usize, usize)]) -> CsrMatrix {
        let mut t = Triplets::new();
        t.entries.reserve(blocks.iter().map(|b| b.0.nnz()).sum());
        for &(b, r0, c0) in blocks {
            for (i, j, v) in b.entries() {
                t.push(r0 + i, c0 + j, v);
            }
        }
        CsrMatrix::from_triplets(nrows, ncols, t)
    }
}
