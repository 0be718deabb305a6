//! Dense row-major complex tensors (last axis fastest).

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::spectral::ComplexMatrix;

#[derive(Clone, Debug, PartialEq)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<Complex64>,
}

impl Tensor {
    pub fn new(shape: Vec<usize>, data: Vec<Complex64>) -> Result<Self> {
        let len: usize = shape.iter().product();
        if shape.is_empty() || len != data.len() {
            return Err(Error::ShapeMismatch(format!(
                "shape {shape:?} holds {len} entries, got {}",
                data.len()
            )));
        }
        Ok(Self { shape, data })
    }

    pub fn zeros(shape: Vec<usize>) -> Self {
        let len = shape.iter().product();
        Self { shape, data: vec![Complex64::new(0.0, 0.0); len] }
    }

    pub fn from_fn(shape: Vec<usize>, mut f: impl FnMut(&[usize]) -> Complex64) -> Self {
        let data = MultiIndex::new(&shape).map(|idx| f(&idx)).collect();
        Self { shape, data }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn rank(&self) -> usize {
        self.shape.len()
    }

    pub fn data(&self) -> &[Complex64] {
        &self.data
    }

    pub fn into_data(self) -> Vec<Complex64> {
        self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn offset(&self, idx: &[usize]) -> usize {
        debug_assert_eq!(idx.len(), self.shape.len());
        idx.iter().zip(&self.shape).fold(0, |acc, (&i, &n)| {
            debug_assert!(i < n);
            acc * n + i
        })
    }

    pub fn get(&self, idx: &[usize]) -> Complex64 {
        self.data[self.offset(idx)]
    }

    pub fn set(&mut self, idx: &[usize], value: Complex64) {
        let o = self.offset(idx);
        self.data[o] = value;
    }

    pub fn indices(&self) -> MultiIndex {
        MultiIndex::new(&self.shape)
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// Matrix with `shape[axis]` rows; columns run over the remaining axes in
    /// row-major order.
    pub fn unfold(&self, axis: usize) -> ComplexMatrix {
        let rows = self.shape[axis];
        let cols = self.data.len() / rows;
        let mut out = ComplexMatrix::zeros(rows, cols);
        let mut counters = vec![0usize; rows];
        for (idx, &v) in self.indices().zip(&self.data) {
            let r = idx[axis];
            out[(r, counters[r])] = v;
            counters[r] += 1;
        }
        out
    }

    /// Contracts `axis` with the columns of `mat`: the new axis has
    /// `mat.nrows()` entries and `out[.., i, ..] = Σ_n mat[i, n] · self[.., n, ..]`.
    pub fn mode_product(&self, axis: usize, mat: &ComplexMatrix) -> Result<Tensor> {
        if mat.ncols() != self.shape[axis] {
            return Err(Error::ShapeMismatch(format!(
                "axis {axis} has {} entries, matrix has {} columns",
                self.shape[axis],
                mat.ncols()
            )));
        }
        let outer: usize = self.shape[..axis].iter().product();
        let inner: usize = self.shape[axis + 1..].iter().product();
        let n_in = self.shape[axis];
        let n_out = mat.nrows();
        let mut shape = self.shape.clone();
        shape[axis] = n_out;
        let mut data = vec![Complex64::new(0.0, 0.0); outer * n_out * inner];
        for o in 0..outer {
            for i in 0..n_out {
                let dst = &mut data[(o * n_out + i) * inner..(o * n_out + i + 1) * inner];
                for n in 0..n_in {
                    let w = mat[(i, n)];
                    if w == Complex64::new(0.0, 0.0) {
                        continue;
                    }
                    let src = &self.data[(o * n_in + n) * inner..(o * n_in + n + 1) * inner];
                    for (d, s) in dst.iter_mut().zip(src) {
                        *d += w * s;
                    }
                }
            }
        }
        Ok(Tensor { shape, data })
    }
}

/// Row-major iterator over all multi-indices of a shape.
#[derive(Clone, Debug)]
pub struct MultiIndex {
    shape: Vec<usize>,
    next: Option<Vec<usize>>,
}

impl MultiIndex {
    pub fn new(shape: &[usize]) -> Self {
        let next = if shape.iter().any(|&n| n == 0) { None } else { Some(vec![0; shape.len()]) };
        Self { shape: shape.to_vec(), next }
    }
}

impl Iterator for MultiIndex {
    type Item = Vec<usize>;

    fn next(&mut self) -> Option<Vec<usize>> {
        let current = self.next.take()?;
        let mut succ = current.clone();
        let mut axis = succ.len();
        loop {
            if axis == 0 {
                break;
            }
            axis -= 1;
            succ[axis] += 1;
            if succ[axis] < self.shape[axis] {
                self.next = Some(succ);
                break;
            }
            succ[axis] = 0;
        }
        Some(current)
    }
}
