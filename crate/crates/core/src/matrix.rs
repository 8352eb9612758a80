//! Dense complex matrices with explicit subsystem dimension metadata.
//!
//! Storage is row-major; in every tensor index the leftmost factor is the
//! slowest-varying one. That convention is fixed here and used everywhere
//! else in the crate.

use std::fmt;
use std::ops::Index;
use std::path::Path;

use num_complex::Complex64;
use serde::Deserialize;

use crate::error::{Error, Result};

/// Dense complex matrix together with the tensor factorisation of its
/// row and column spaces.
#[derive(Clone, PartialEq)]
pub struct Operator {
    rows: usize,
    cols: usize,
    row_dims: Vec<usize>,
    col_dims: Vec<usize>,
    data: Vec<Complex64>,
}

impl fmt::Debug for Operator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "Operator({}x{}, row_dims={:?}, col_dims={:?})",
            self.rows, self.cols, self.row_dims, self.col_dims
        )
    }
}

fn dims_product(dims: &[usize]) -> usize {
    dims.iter().product()
}

impl Operator {
    /// Builds an operator from row-major data, validating the dimension
    /// metadata and that every entry is finite.
    pub fn new(row_dims: Vec<usize>, col_dims: Vec<usize>, data: Vec<Complex64>) -> Result<Self> {
        if row_dims.contains(&0) || col_dims.contains(&0) {
            return Err(Error::Dimension("zero subsystem dimension".into()));
        }
        let rows = dims_product(&row_dims);
        let cols = dims_product(&col_dims);
        if rows * cols != data.len() {
            return Err(Error::Dimension(format!(
                "data length {} does not match {}x{}",
                data.len(),
                rows,
                cols
            )));
        }
        if data.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::Contract("non-finite matrix entry".into()));
        }
        Ok(Self { rows, cols, row_dims, col_dims, data })
    }

    pub fn zeros(row_dims: &[usize], col_dims: &[usize]) -> Self {
        let rows = dims_product(row_dims);
        let cols = dims_product(col_dims);
        Self {
            rows,
            cols,
            row_dims: row_dims.to_vec(),
            col_dims: col_dims.to_vec(),
            data: vec![Complex64::new(0.0, 0.0); rows * cols],
        }
    }

    pub fn identity(dims: &[usize]) -> Self {
        let mut m = Self::zeros(dims, dims);
        for i in 0..m.rows {
            m.data[i * m.cols + i] = Complex64::new(1.0, 0.0);
        }
        m
    }

    /// Square diagonal matrix with the given entries, a single subsystem.
    pub fn diagonal(entries: &[Complex64]) -> Self {
        let n = entries.len();
        let mut m = Self::zeros(&[n], &[n]);
        for (i, &e) in entries.iter().enumerate() {
            m.data[i * n + i] = e;
        }
        m
    }

    /// Column vector with a single row subsystem.
    pub fn column(data: Vec<Complex64>) -> Self {
        let n = data.len();
        Self { rows: n, cols: 1, row_dims: vec![n], col_dims: vec![1], data }
    }

    pub fn from_fn(
        row_dims: &[usize],
        col_dims: &[usize],
        f: impl Fn(usize, usize) -> Complex64,
    ) -> Self {
        let mut m = Self::zeros(row_dims, col_dims);
        for i in 0..m.rows {
            for j in 0..m.cols {
                m.data[i * m.cols + j] = f(i, j);
            }
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row_dims(&self) -> &[usize] {
        &self.row_dims
    }

    pub fn col_dims(&self) -> &[usize] {
        &self.col_dims
    }

    pub fn data(&self) -> &[Complex64] {
        &self.data
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: Complex64) {
        self.data[i * self.cols + j] = v;
    }

    /// Same data, new row factorisation (the product must match).
    pub fn with_row_dims(&self, dims: &[usize]) -> Result<Self> {
        if dims_product(dims) != self.rows {
            return Err(Error::Dimension(format!(
                "row dims {:?} do not factor {} rows",
                dims, self.rows
            )));
        }
        let mut out = self.clone();
        out.row_dims = dims.to_vec();
        Ok(out)
    }

    /// Same data, new column factorisation.
    pub fn with_col_dims(&self, dims: &[usize]) -> Result<Self> {
        if dims_product(dims) != self.cols {
            return Err(Error::Dimension(format!(
                "col dims {:?} do not factor {} cols",
                dims, self.cols
            )));
        }
        let mut out = self.clone();
        out.col_dims = dims.to_vec();
        Ok(out)
    }

    pub fn adjoint(&self) -> Self {
        let mut out = Self::zeros(&self.col_dims, &self.row_dims);
        for i in 0..self.rows {
            for j in 0..self.cols {
                out.data[j * self.rows + i] = self.data[i * self.cols + j].conj();
            }
        }
        out
    }

    pub fn transpose(&self) -> Self {
        let mut out = Self::zeros(&self.col_dims, &self.row_dims);
        for i in 0..self.rows {
            for j in 0..self.cols {
                out.data[j * self.rows + i] = self.data[i * self.cols + j];
            }
        }
        out
    }

    pub fn scale(&self, s: Complex64) -> Self {
        let mut out = self.clone();
        for z in &mut out.data {
            *z *= s;
        }
        out
    }

    pub fn add(&self, other: &Self) -> Self {
        assert_eq!(
            (self.rows, self.cols),
            (other.rows, other.cols),
            "operator addition shape mismatch"
        );
        let mut out = self.clone();
        for (z, w) in out.data.iter_mut().zip(&other.data) {
            *z += w;
        }
        out
    }

    pub fn sub(&self, other: &Self) -> Self {
        assert_eq!(
            (self.rows, self.cols),
            (other.rows, other.cols),
            "operator subtraction shape mismatch"
        );
        let mut out = self.clone();
        for (z, w) in out.data.iter_mut().zip(&other.data) {
            *z -= w;
        }
        out
    }

    /// Matrix product; the result keeps `self`'s row factors and `other`'s
    /// column factors.
    pub fn mul(&self, other: &Self) -> Self {
        assert_eq!(self.cols, other.rows, "operator product shape mismatch");
        let mut out = Self::zeros(&self.row_dims, &other.col_dims);
        for i in 0..self.rows {
            let lhs_row = &self.data[i * self.cols..(i + 1) * self.cols];
            let out_row = &mut out.data[i * other.cols..(i + 1) * other.cols];
            for (k, &a) in lhs_row.iter().enumerate() {
                if a.re == 0.0 && a.im == 0.0 {
                    continue;
                }
                let rhs_row = &other.data[k * other.cols..(k + 1) * other.cols];
                for (o, &b) in out_row.iter_mut().zip(rhs_row) {
                    *o += a * b;
                }
            }
        }
        out
    }

    pub fn trace(&self) -> Complex64 {
        assert!(self.is_square(), "trace of a non-square operator");
        (0..self.rows).map(|i| self.data[i * self.cols + i]).sum()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// Relative Hermiticity test: ||X - X^dag|| <= tol * ||X|| in Frobenius
    /// norm (and exactly true for the zero matrix).
    pub fn is_hermitian(&self, rel_tol: f64) -> bool {
        if !self.is_square() {
            return false;
        }
        let mut dev2 = 0.0;
        for i in 0..self.rows {
            for j in i..self.cols {
                let d = self.data[i * self.cols + j] - self.data[j * self.cols + i].conj();
                let w = if i == j { 1.0 } else { 2.0 };
                dev2 += w * d.norm_sqr() / 4.0;
            }
        }
        let scale = self.frobenius_norm();
        dev2.sqrt() <= rel_tol * scale.max(f64::MIN_POSITIVE)
    }

    /// (X + X^dag) / 2.
    pub fn symmetrized(&self) -> Self {
        assert!(self.is_square(), "symmetrization of a non-square operator");
        let mut out = self.clone();
        for i in 0..self.rows {
            for j in 0..self.cols {
                let v = (self.data[i * self.cols + j] + self.data[j * self.cols + i].conj()) * 0.5;
                out.data[i * self.cols + j] = v;
            }
        }
        out
    }

    /// Kronecker product; dimension lists concatenate.
    pub fn tensor(&self, other: &Self) -> Self {
        let mut row_dims = self.row_dims.clone();
        row_dims.extend_from_slice(&other.row_dims);
        let mut col_dims = self.col_dims.clone();
        col_dims.extend_from_slice(&other.col_dims);
        let rows = self.rows * other.rows;
        let cols = self.cols * other.cols;
        let mut data = vec![Complex64::new(0.0, 0.0); rows * cols];
        for ia in 0..self.rows {
            for ja in 0..self.cols {
                let a = self.data[ia * self.cols + ja];
                if a.re == 0.0 && a.im == 0.0 {
                    continue;
                }
                for ib in 0..other.rows {
                    let row = ia * other.rows + ib;
                    for jb in 0..other.cols {
                        let col = ja * other.cols + jb;
                        data[row * cols + col] = a * other.data[ib * other.cols + jb];
                    }
                }
            }
        }
        Self { rows, cols, row_dims, col_dims, data }
    }

    /// Partial trace keeping the listed subsystems (indices into the
    /// dimension list, strictly increasing). Requires matching row and
    /// column factorisations.
    pub fn partial_trace(&self, keep: &[usize]) -> Result<Self> {
        if self.row_dims != self.col_dims {
            return Err(Error::Dimension(
                "partial trace requires row_dims == col_dims".into(),
            ));
        }
        let n_sub = self.row_dims.len();
        for w in keep.windows(2) {
            if w[0] >= w[1] {
                return Err(Error::Dimension(
                    "keep set must be strictly increasing".into(),
                ));
            }
        }
        if keep.iter().any(|&k| k >= n_sub) {
            return Err(Error::Dimension(format!(
                "subsystem index out of range (have {} subsystems)",
                n_sub
            )));
        }

        let traced: Vec<usize> = (0..n_sub).filter(|i| !keep.contains(i)).collect();
        let strides: Vec<usize> = (0..n_sub)
            .map(|i| self.row_dims[i + 1..].iter().product())
            .collect();
        let kept_dims: Vec<usize> = keep.iter().map(|&k| self.row_dims[k]).collect();
        let out_dims = if kept_dims.is_empty() { vec![1] } else { kept_dims.clone() };
        let mut out = Self::zeros(&out_dims, &out_dims);

        let kept_total: usize = kept_dims.iter().product();
        let traced_total: usize = traced.iter().map(|&t| self.row_dims[t]).product();

        // Base offset of a kept multi-index within the full index.
        let kept_offset = |mut flat: usize| -> usize {
            let mut off = 0;
            for &k in keep.iter().rev() {
                let d = self.row_dims[k];
                off += (flat % d) * strides[k];
                flat /= d;
            }
            off
        };
        let traced_offset = |mut flat: usize| -> usize {
            let mut off = 0;
            for &t in traced.iter().rev() {
                let d = self.row_dims[t];
                off += (flat % d) * strides[t];
                flat /= d;
            }
            off
        };

        let traced_offsets: Vec<usize> = (0..traced_total).map(traced_offset) .collect();
        let kept_offsets: Vec<usize> = (0..kept_total.max(1)).map(kept_offset).collect();

        for (kr, &row_base) in kept_offsets.iter().enumerate() {
            for (kc, &col_base) in kept_offsets.iter().enumerate() {
                let mut acc = Complex64::new(0.0, 0.0);
                for &t in &traced_offsets {
                    acc += self.data[(row_base + t) * self.cols + (col_base + t)];
                }
                out.data[kr * kept_total.max(1) + kc] = acc;
            }
        }
        Ok(out)
    }

    /// Sum of singular values.
    pub fn trace_norm(&self) -> f64 {
        if self.is_square() && self.is_hermitian(1e-10) {
            let eig = crate::decomp::hermitian_eig(self).expect("hermitian within tolerance");
            return eig.eigenvalues.iter().map(|l| l.abs()).sum();
        }
        crate::decomp::singular_values(self).iter().sum()
    }

    /// Largest singular value.
    pub fn operator_norm(&self) -> f64 {
        if self.rows == 0 || self.cols == 0 {
            return 0.0;
        }
        if self.is_square() && self.is_hermitian(1e-10) {
            let eig = crate::decomp::hermitian_eig(self).expect("hermitian within tolerance");
            return eig
                .eigenvalues
                .iter()
                .map(|l| l.abs())
                .fold(0.0, f64::max);
        }
        crate::decomp::singular_values(self)
            .first()
            .copied()
            .unwrap_or(0.0)
    }
}

impl Index<(usize, usize)> for Operator {
    type Output = Complex64;

    fn index(&self, (i, j): (usize, usize)) -> &Complex64 {
        &self.data[i * self.cols + j]
    }
}

/// sqrt(||A||_2^2 + ||B||_2^2): the l2-sum of Frobenius norms used by the
/// Lipschitz estimates.
pub fn pair_two_norm(a: &Operator, b: &Operator) -> f64 {
    let fa = a.frobenius_norm();
    let fb = b.frobenius_norm();
    (fa * fa + fb * fb).sqrt()
}

#[derive(Deserialize)]
struct MatrixFile {
    rows: usize,
    cols: usize,
    row_dims: Vec<usize>,
    col_dims: Vec<usize>,
    data: Vec<[f64; 2]>,
}

/// Renders the portable matrix document. Numbers carry 17 significant
/// digits so every f64 round-trips exactly.
pub fn matrix_to_json(op: &Operator) -> String {
    let mut s = String::new();
    s.push_str("{\n");
    s.push_str(&format!("  \"rows\": {},\n", op.rows()));
    s.push_str(&format!("  \"cols\": {},\n", op.cols()));
    s.push_str(&format!(
        "  \"row_dims\": [{}],\n",
        op.row_dims().iter().map(|d| d.to_string()).collect::<Vec<_>>().join(", ")
    ));
    s.push_str(&format!(
        "  \"col_dims\": [{}],\n",
        op.col_dims().iter().map(|d| d.to_string()).collect::<Vec<_>>().join(", ")
    ));
    s.push_str("  \"data\": [\n");
    for (k, z) in op.data().iter().enumerate() {
        let sep = if k + 1 == op.data().len() { "" } else { "," };
        s.push_str(&format!("    [{:.16e}, {:.16e}]{}\n", z.re, z.im, sep));
    }
    s.push_str("  ]\n}\n");
    s
}

pub fn matrix_from_json(text: &str, origin: &str) -> Result<Operator> {
    let file: MatrixFile = serde_json::from_str(text).map_err(|e| Error::Parse {
        path: origin.to_string(),
        message: e.to_string(),
    })?;
    if dims_product(&file.row_dims) != file.rows || dims_product(&file.col_dims) != file.cols {
        return Err(Error::Parse {
            path: origin.to_string(),
            message: "dimension lists do not match rows/cols".into(),
        });
    }
    let data: Vec<Complex64> = file.data.iter().map(|p| Complex64::new(p[0], p[1])).collect();
    Operator::new(file.row_dims, file.col_dims, data)
}

pub fn write_matrix_file(path: &Path, op: &Operator) -> Result<()> {
    crate::report::write_atomic(path, &matrix_to_json(op))
}

pub fn read_matrix_file(path: &Path) -> Result<Operator> {
    let text = std::fs::read_to_string(path)?;
    matrix_from_json(&text, &path.display().to_string())
}
