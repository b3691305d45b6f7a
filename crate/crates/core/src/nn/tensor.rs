//! Dense double-precision containers: batch×time×channels and rows×cols.

use alloc::format;
use alloc::vec::Vec;

use super::NnError;

/// Contiguous (batch, time, channels) tensor, row-major with channels fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor3 {
    n: usize,
    t: usize,
    c: usize,
    data: Vec<f64>,
}

impl Tensor3 {
    pub fn zeros(n: usize, t: usize, c: usize) -> Tensor3 {
        Tensor3 {
            n,
            t,
            c,
            data: alloc::vec![0.0; n * t * c],
        }
    }

    pub fn from_vec(n: usize, t: usize, c: usize, data: Vec<f64>) -> Result<Tensor3, NnError> {
        if data.len() != n * t * c {
            return Err(NnError::Shape(format!(
                "tensor: {} values for dims {}x{}x{}",
                data.len(),
                n,
                t,
                c
            )));
        }
        Ok(Tensor3 { n, t, c, data })
    }

    pub fn dims(&self) -> (usize, usize, usize) {
        (self.n, self.t, self.c)
    }

    pub fn batch(&self) -> usize {
        self.n
    }

    pub fn time(&self) -> usize {
        self.t
    }

    pub fn channels(&self) -> usize {
        self.c
    }

    #[inline]
    pub fn at(&self, n: usize, t: usize, c: usize) -> f64 {
        self.data[(n * self.t + t) * self.c + c]
    }

    #[inline]
    pub fn set(&mut self, n: usize, t: usize, c: usize, v: f64) {
        self.data[(n * self.t + t) * self.c + c] = v;
    }

    /// The channel row at one (sample, time step).
    #[inline]
    pub fn row(&self, n: usize, t: usize) -> &[f64] {
        let start = (n * self.t + t) * self.c;
        &self.data[start..start + self.c]
    }

    #[inline]
    pub fn row_mut(&mut self, n: usize, t: usize) -> &mut [f64] {
        let start = (n * self.t + t) * self.c;
        &mut self.data[start..start + self.c]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn add(&self, other: &Tensor3) -> Result<Tensor3, NnError> {
        if self.dims() != other.dims() {
            return Err(NnError::Shape(format!(
                "add: {:?} vs {:?}",
                self.dims(),
                other.dims()
            )));
        }
        let mut out = self.clone();
        for (o, v) in out.data.iter_mut().zip(other.data.iter()) {
            *o += v;
        }
        Ok(out)
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}

/// Plain rows×cols matrix (pooled activations, logits, probabilities).
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Matrix {
        Matrix {
            rows,
            cols,
            data: alloc::vec![0.0; rows * cols],
        }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Matrix, NnError> {
        if data.len() != rows * cols {
            return Err(NnError::Shape(format!(
                "matrix: {} values for dims {}x{}",
                data.len(),
                rows,
                cols
            )));
        }
        Ok(Matrix { rows, cols, data })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn at(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.cols + c] = v;
    }

    #[inline]
    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, r: usize) -> &mut [f64] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }
}
