//! Dense column-major matrices.

use num_complex::Complex;

use crate::error::{EmuError, Result};

/// Dense column-major matrix with leading dimension equal to `rows`.
#[derive(Clone, Debug, PartialEq)]
pub struct Matrix<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Copy + Default> Matrix<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![T::default(); rows * cols],
        }
    }

    /// Builds a matrix from column-major data.
    pub fn from_col_major(rows: usize, cols: usize, data: Vec<T>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(EmuError::dim(format!(
                "{rows}x{cols} matrix needs {} elements, got {}",
                rows * cols,
                data.len()
            )));
        }
        Ok(Self { rows, cols, data })
    }

    /// Builds a matrix from a row-major nested literal. Handy in tests.
    pub fn from_rows(rows: &[Vec<T>]) -> Result<Self> {
        let m = rows.len();
        let n = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != n) {
            return Err(EmuError::dim("ragged row literal"));
        }
        Ok(Self::from_fn(m, n, |i, j| rows[i][j]))
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for j in 0..cols {
            for i in 0..rows {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    /// Copies an `rows x cols` view out of a strided column-major buffer.
    pub fn from_strided(rows: usize, cols: usize, buf: &[T], ld: usize) -> Result<Self> {
        check_strided(rows, cols, buf.len(), ld)?;
        Ok(Self::from_fn(rows, cols, |i, j| buf[i + j * ld]))
    }

    /// Writes into a strided column-major buffer.
    pub fn write_strided(&self, buf: &mut [T], ld: usize) -> Result<()> {
        check_strided(self.rows, self.cols, buf.len(), ld)?;
        for j in 0..self.cols {
            buf[j * ld..j * ld + self.rows].copy_from_slice(self.col(j));
        }
        Ok(())
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    pub fn map<U: Copy + Default>(&self, f: impl Fn(T) -> U) -> Matrix<U> {
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&x| f(x)).collect(),
        }
    }

    /// Columns `[start, end)` as a new matrix.
    pub fn col_range(&self, start: usize, end: usize) -> Self {
        Self {
            rows: self.rows,
            cols: end - start,
            data: self.data[start * self.rows..end * self.rows].to_vec(),
        }
    }
}

impl<T> Matrix<T> {
    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    #[inline]
    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    #[inline]
    pub fn as_mut_slice(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<T> {
        self.data
    }

    #[inline]
    pub fn col(&self, j: usize) -> &[T] {
        &self.data[j * self.rows..(j + 1) * self.rows]
    }

    #[inline]
    pub fn col_mut(&mut self, j: usize) -> &mut [T] {
        &mut self.data[j * self.rows..(j + 1) * self.rows]
    }
}

impl<T> std::ops::Index<(usize, usize)> for Matrix<T> {
    type Output = T;

    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &T {
        debug_assert!(i < self.rows && j < self.cols);
        &self.data[i + j * self.rows]
    }
}

impl<T> std::ops::IndexMut<(usize, usize)> for Matrix<T> {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut T {
        debug_assert!(i < self.rows && j < self.cols);
        &mut self.data[i + j * self.rows]
    }
}

fn check_strided(rows: usize, cols: usize, len: usize, ld: usize) -> Result<()> {
    if ld < rows.max(1) {
        return Err(EmuError::dim(format!("leading dimension {ld} < rows {rows}")));
    }
    if cols > 0 && rows > 0 && len < (cols - 1) * ld + rows {
        return Err(EmuError::dim(format!(
            "buffer of {len} elements too small for {rows}x{cols} with ld {ld}"
        )));
    }
    Ok(())
}

/// Complex matrix stored as separate real and imaginary planes.
#[derive(Clone, Debug, PartialEq)]
pub struct ComplexMatrix<T> {
    pub re: Matrix<T>,
    pub im: Matrix<T>,
}

impl<T: Copy + Default> ComplexMatrix<T> {
    pub fn new(re: Matrix<T>, im: Matrix<T>) -> Result<Self> {
        if re.shape() != im.shape() {
            return Err(EmuError::dim(format!(
                "real part {:?} and imaginary part {:?} differ in shape",
                re.shape(),
                im.shape()
            )));
        }
        Ok(Self { re, im })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            re: Matrix::zeros(rows, cols),
            im: Matrix::zeros(rows, cols),
        }
    }

    pub fn rows(&self) -> usize {
        self.re.rows()
    }

    pub fn cols(&self) -> usize {
        self.re.cols()
    }

    pub fn shape(&self) -> (usize, usize) {
        self.re.shape()
    }

    /// Splits an interleaved strided buffer (standard complex layout).
    pub fn from_interleaved(rows: usize, cols: usize, buf: &[Complex<T>], ld: usize) -> Result<Self> {
        check_strided(rows, cols, buf.len(), ld)?;
        Ok(Self {
            re: Matrix::from_fn(rows, cols, |i, j| buf[i + j * ld].re),
            im: Matrix::from_fn(rows, cols, |i, j| buf[i + j * ld].im),
        })
    }

    pub fn write_interleaved(&self, buf: &mut [Complex<T>], ld: usize) -> Result<()> {
        check_strided(self.rows(), self.cols(), buf.len(), ld)?;
        for j in 0..self.cols() {
            for i in 0..self.rows() {
                buf[i + j * ld] = Complex::new(self.re[(i, j)], self.im[(i, j)]);
            }
        }
        Ok(())
    }

    pub fn get(&self, i: usize, j: usize) -> Complex<T> {
        Complex::new(self.re[(i, j)], self.im[(i, j)])
    }
}

impl<T: Copy + Default + std::ops::Neg<Output = T>> ComplexMatrix<T> {
    pub fn conj(&self) -> Self {
        Self {
            re: self.re.clone(),
            im: self.im.map(|x| -x),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn column_major_layout() {
        let m = Matrix::from_rows(&[vec![1, 2, 3], vec![4, 5, 6]]).unwrap();
        assert_eq!(m.as_slice(), &[1, 4, 2, 5, 3, 6]);
        assert_eq!(m[(1, 2)], 6);
        assert_eq!(m.transpose()[(2, 1)], 6);
    }

    #[test]
    fn strided_round_trip() {
        let buf: Vec<f64> = (0..12).map(f64::from).collect();
        let m = Matrix::from_strided(3, 3, &buf, 4).unwrap();
        assert_eq!(m.col(1), &[4.0, 5.0, 6.0]);
        let mut out = vec![-1.0; 12];
        m.write_strided(&mut out, 4).unwrap();
        assert_eq!(out[3], -1.0);
        assert_eq!(out[8..11], [8.0, 9.0, 10.0]);
    }

    #[test]
    fn strided_rejects_short_buffer() {
        assert!(Matrix::from_strided(3, 3, &[0.0; 8], 3).is_err());
        assert!(Matrix::<f64>::from_strided(3, 1, &[0.0; 3], 2).is_err());
    }
}
