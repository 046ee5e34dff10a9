//! Reference products: exact integer GEMM and double-double GEMM.

use num_bigint::BigInt;
use num_traits::Zero;

use crate::crt::f64_to_bigint;
use crate::dd::{fast_two_sum, two_prod, two_sum, DoubleDouble};
use crate::emulate::Scalar;
use crate::error::{EmuError, Result};
use crate::matrix::{ComplexMatrix, Matrix};

/// Dense column-major matrix of arbitrary-precision integers.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BigIntMatrix {
    rows: usize,
    cols: usize,
    data: Vec<BigInt>,
}

impl BigIntMatrix {
    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> &BigInt {
        &self.data[i + j * self.rows]
    }

    pub fn as_slice(&self) -> &[BigInt] {
        &self.data
    }

    /// Exact conversion of an integer-valued double matrix.
    pub fn from_f64(m: &Matrix<f64>) -> Result<Self> {
        let data = m
            .as_slice()
            .iter()
            .map(|&x| {
                if x.is_finite() && x.fract() == 0.0 {
                    Ok(f64_to_bigint(x))
                } else {
                    Err(EmuError::domain(format!("{x} is not a finite integer")))
                }
            })
            .collect::<Result<_>>()?;
        Ok(Self {
            rows: m.rows(),
            cols: m.cols(),
            data,
        })
    }

    /// Elementwise equality with an integer-valued double matrix.
    pub fn equals_f64(&self, m: &Matrix<f64>) -> bool {
        m.shape() == (self.rows, self.cols)
            && m.as_slice()
                .iter()
                .zip(&self.data)
                .all(|(&x, y)| x.is_finite() && x.fract() == 0.0 && &f64_to_bigint(x) == y)
    }
}

/// Exact product of integer-valued matrices.
///
/// Uses 64- or 128-bit accumulation whenever a magnitude bound proves it
/// cannot overflow, and big integers otherwise.
pub fn exact_gemm_bigint(a: &Matrix<f64>, b: &Matrix<f64>) -> Result<BigIntMatrix> {
    let (m, k) = a.shape();
    let n = b.cols();
    if b.rows() != k {
        return Err(EmuError::dim(format!(
            "inner dimensions differ: {m}x{k} times {}x{n}",
            b.rows()
        )));
    }
    for &x in a.as_slice().iter().chain(b.as_slice()) {
        if !(x.is_finite() && x.fract() == 0.0) {
            return Err(EmuError::domain(format!("{x} is not a finite integer")));
        }
    }
    let amax = a.as_slice().iter().fold(0.0f64, |s, x| s.max(x.abs()));
    let bmax = b.as_slice().iter().fold(0.0f64, |s, x| s.max(x.abs()));
    // Upper bound on |c_ij|; the arithmetic here only needs to be rough.
    let bound = amax * bmax * (k.max(1) as f64) * 1.01;
    let data = if amax < 2f64.powi(62) && bmax < 2f64.powi(62) && bound < 2f64.powi(62) {
        gemm_prim(a, b, |x| x as i64, |c: &mut i64, x, y| *c += x * y)
            .into_iter()
            .map(BigInt::from)
            .collect()
    } else if amax < 2f64.powi(63) && bmax < 2f64.powi(63) && bound < 2f64.powi(126) {
        gemm_prim(a, b, |x| i128::from(x as i64), |c: &mut i128, x, y| *c += x * y)
            .into_iter()
            .map(BigInt::from)
            .collect()
    } else {
        let ab: Vec<BigInt> = a.as_slice().iter().map(|&x| f64_to_bigint(x)).collect();
        let bb: Vec<BigInt> = b.as_slice().iter().map(|&x| f64_to_bigint(x)).collect();
        let mut out = vec![BigInt::zero(); m * n];
        for j in 0..n {
            for h in 0..k {
                let y = &bb[h + j * k];
                for i in 0..m {
                    out[i + j * m] += &ab[i + h * m] * y;
                }
            }
        }
        out
    };
    Ok(BigIntMatrix { rows: m, cols: n, data })
}

fn gemm_prim<T: Copy + Default>(
    a: &Matrix<f64>,
    b: &Matrix<f64>,
    conv: impl Fn(f64) -> T,
    mac: impl Fn(&mut T, T, T),
) -> Vec<T> {
    let (m, k) = a.shape();
    let n = b.cols();
    let ai: Vec<T> = a.as_slice().iter().map(|&x| conv(x)).collect();
    let mut out = vec![T::default(); m * n];
    for j in 0..n {
        let col = &mut out[j * m..(j + 1) * m];
        for h in 0..k {
            let y = conv(b[(h, j)]);
            for (c, &x) in col.iter_mut().zip(&ai[h * m..(h + 1) * m]) {
                mac(c, x, y);
            }
        }
    }
    out
}

// ---------------------------------------------------------------------------
// Double-double reference

/// Matrix of double-double values.
#[derive(Debug, Clone, PartialEq)]
pub struct DdMatrix {
    pub hi: Matrix<f64>,
    pub lo: Matrix<f64>,
}

impl DdMatrix {
    pub fn shape(&self) -> (usize, usize) {
        self.hi.shape()
    }

    pub fn get(&self, i: usize, j: usize) -> DoubleDouble {
        DoubleDouble::new(self.hi[(i, j)], self.lo[(i, j)])
    }

    /// Rounds every element to double precision.
    pub fn to_f64(&self) -> Matrix<f64> {
        Matrix::from_fn(self.hi.rows(), self.hi.cols(), |i, j| self.get(i, j).to_f64())
    }
}

/// Complex double-double matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexDdMatrix {
    pub re: DdMatrix,
    pub im: DdMatrix,
}

const LANES: usize = 16;

/// Accumulates `acc += x * y` for `L` independent lanes, with the same
/// operation sequence as [`DoubleDouble::add_prod`].
#[inline(always)]
fn dd_mac<const L: usize>(hi: &mut [f64; L], lo: &mut [f64; L], x: &[f64], y: f64, fused: bool) {
    for l in 0..L {
        let (p, e) = if fused {
            let p = x[l] * y;
            (p, x[l].mul_add(y, -p))
        } else {
            two_prod(x[l], y)
        };
        let (s, se) = two_sum(hi[l], p);
        let (t, te) = two_sum(lo[l], e);
        let se = se + t;
        let (s, se) = fast_two_sum(s, se);
        let se = se + te;
        let (h, g) = fast_two_sum(s, se);
        hi[l] = h;
        lo[l] = g;
    }
}

/// One output column; rows are processed `LANES` at a time.
#[inline(always)]
fn dd_column(a: &Matrix<f64>, bcol: &[f64], hi: &mut [f64], lo: &mut [f64], fused: bool) {
    let m = a.rows();
    let full = m / LANES * LANES;
    for i0 in (0..full).step_by(LANES) {
        let mut h = [0.0; LANES];
        let mut g = [0.0; LANES];
        for (kk, &y) in bcol.iter().enumerate() {
            dd_mac(&mut h, &mut g, &a.col(kk)[i0..i0 + LANES], y, fused);
        }
        hi[i0..i0 + LANES].copy_from_slice(&h);
        lo[i0..i0 + LANES].copy_from_slice(&g);
    }
    for i in full..m {
        let mut h = [0.0; 1];
        let mut g = [0.0; 1];
        for (kk, &y) in bcol.iter().enumerate() {
            dd_mac(&mut h, &mut g, &a.col(kk)[i..i + 1], y, fused);
        }
        hi[i] = h[0];
        lo[i] = g[0];
    }
}

#[cfg(target_arch = "x86_64")]
#[target_feature(enable = "avx2,fma")]
unsafe fn dd_column_fma(a: &Matrix<f64>, bcol: &[f64], hi: &mut [f64], lo: &mut [f64]) {
    dd_column(a, bcol, hi, lo, true);
}

fn dd_gemm(a: &Matrix<f64>, b: &Matrix<f64>) -> DdMatrix {
    use rayon::prelude::*;
    let (m, n) = (a.rows(), b.cols());
    let mut hi = Matrix::zeros(m, n);
    let mut lo = Matrix::zeros(m, n);
    if m == 0 || n == 0 {
        return DdMatrix { hi, lo };
    }
    #[cfg(target_arch = "x86_64")]
    let fma = std::is_x86_feature_detected!("avx2") && std::is_x86_feature_detected!("fma");
    #[cfg(not(target_arch = "x86_64"))]
    let fma = false;
    hi.as_mut_slice()
        .par_chunks_mut(m)
        .zip(lo.as_mut_slice().par_chunks_mut(m))
        .enumerate()
        .for_each(|(j, (h, g))| {
            let bcol = b.col(j);
            // Both product forms are error-free, so they agree bitwise.
            #[cfg(target_arch = "x86_64")]
            if fma {
                // SAFETY: AVX2 and FMA support was detected above.
                unsafe { dd_column_fma(a, bcol, h, g) };
                return;
            }
            let _ = fma;
            dd_column(a, bcol, h, g, false);
        });
    DdMatrix { hi, lo }
}

fn check_inner(a: (usize, usize), b: (usize, usize)) -> Result<()> {
    if a.1 != b.0 {
        return Err(EmuError::dim(format!(
            "inner dimensions differ: {}x{} times {}x{}",
            a.0, a.1, b.0, b.1
        )));
    }
    Ok(())
}

/// Double-double product of real matrices, each dot product accumulated
/// in ascending order.
pub fn reference_gemm_dd_real<T: Scalar>(a: &Matrix<T>, b: &Matrix<T>) -> Result<DdMatrix> {
    check_inner(a.shape(), b.shape())?;
    Ok(dd_gemm(&a.map(T::to_f64), &b.map(T::to_f64)))
}

/// Double-double product of complex matrices. Each part is one dot product of
/// length `2k`: `re = sum_h (aR bR - aI bI)`, `im = sum_h (aR bI + aI bR)`,
/// with the real-part terms of every `h` visited first.
pub fn reference_gemm_dd_complex<T: Scalar>(a: &ComplexMatrix<T>, b: &ComplexMatrix<T>) -> Result<ComplexDdMatrix> {
    check_inner(a.shape(), b.shape())?;
    let (m, k) = a.shape();
    let n = b.cols();
    let ar = a.re.map(T::to_f64);
    let ai = a.im.map(T::to_f64);
    let br = b.re.map(T::to_f64);
    let bi = b.im.map(T::to_f64);
    // Interleave h so the accumulation order is (R,R), (I,I) for each h.
    let lhs = Matrix::from_fn(
        m,
        2 * k,
        |i, h| if h % 2 == 0 { ar[(i, h / 2)] } else { ai[(i, h / 2)] },
    );
    let rhs_re = Matrix::from_fn(
        2 * k,
        n,
        |h, j| if h % 2 == 0 { br[(h / 2, j)] } else { -bi[(h / 2, j)] },
    );
    let rhs_im = Matrix::from_fn(
        2 * k,
        n,
        |h, j| if h % 2 == 0 { bi[(h / 2, j)] } else { br[(h / 2, j)] },
    );
    Ok(ComplexDdMatrix {
        re: dd_gemm(&lhs, &rhs_re),
        im: dd_gemm(&lhs, &rhs_im),
    })
}

// ---------------------------------------------------------------------------
// Plain working-precision references

/// `A B` accumulated in the working precision `T`, ascending inner index.
pub fn native_gemm_real<T>(a: &Matrix<T>, b: &Matrix<T>) -> Result<Matrix<T>>
where
    T: Scalar + std::ops::Mul<Output = T> + std::ops::Add<Output = T>,
{
    check_inner(a.shape(), b.shape())?;
    let (m, k) = a.shape();
    let n = b.cols();
    let mut c = Matrix::zeros(m, n);
    for j in 0..n {
        for h in 0..k {
            let y = b[(h, j)];
            let acol = a.col(h);
            for (ci, &x) in c.col_mut(j).iter_mut().zip(acol) {
                *ci = *ci + x * y;
            }
        }
    }
    Ok(c)
}

/// Complex `A B` in the working precision: `re += aR bR; re -= aI bI`,
/// `im += aR bI; im += aI bR` for ascending inner index.
pub fn native_gemm_complex<T>(a: &ComplexMatrix<T>, b: &ComplexMatrix<T>) -> Result<ComplexMatrix<T>>
where
    T: Scalar + std::ops::Mul<Output = T> + std::ops::Add<Output = T> + std::ops::Sub<Output = T>,
{
    check_inner(a.shape(), b.shape())?;
    let (m, k) = a.shape();
    let n = b.cols();
    let mut re = Matrix::zeros(m, n);
    let mut im = Matrix::zeros(m, n);
    for j in 0..n {
        for h in 0..k {
            let (yr, yi) = (b.re[(h, j)], b.im[(h, j)]);
            let (xr, xi) = (a.re.col(h), a.im.col(h));
            let rc = re.col_mut(j);
            for i in 0..m {
                rc[i] = rc[i] + xr[i] * yr - xi[i] * yi;
            }
            let ic = im.col_mut(j);
            for i in 0..m {
                ic[i] = ic[i] + xr[i] * yi + xi[i] * yr;
            }
        }
    }
    ComplexMatrix::new(re, im)
}

// ---------------------------------------------------------------------------
// Error metric

/// Maximum componentwise relative error and the number of reference
/// components that were zero (and therefore skipped).
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ErrorStats {
    pub max_rel: f64,
    pub skipped_zero: usize,
}

fn rel_error(approx: f64, r: DoubleDouble, stats: &mut ErrorStats) {
    if r.hi == 0.0 {
        stats.skipped_zero += 1;
        return;
    }
    let d = (approx - r.hi) - r.lo;
    let e = d.abs() / r.hi.abs();
    if e > stats.max_rel || e.is_nan() {
        stats.max_rel = e;
    }
}

/// `max_ij |c~_ij - c_ij| / |c_ij|` over nonzero reference entries.
pub fn max_relative_error_real<T: Scalar>(approx: &Matrix<T>, reference: &DdMatrix) -> Result<ErrorStats> {
    if approx.shape() != reference.shape() {
        return Err(EmuError::dim("approximation and reference differ in shape"));
    }
    let mut stats = ErrorStats::default();
    for (j, col) in (0..approx.cols()).map(|j| (j, approx.col(j))) {
        for (i, &x) in col.iter().enumerate() {
            rel_error(x.to_f64(), reference.get(i, j), &mut stats);
        }
    }
    Ok(stats)
}

/// Complex metric: the maximum over both the real and imaginary ratios.
pub fn max_relative_error_complex<T: Scalar>(
    approx: &ComplexMatrix<T>,
    reference: &ComplexDdMatrix,
) -> Result<ErrorStats> {
    let re = max_relative_error_real(&approx.re, &reference.re)?;
    let im = max_relative_error_real(&approx.im, &reference.im)?;
    Ok(ErrorStats {
        max_rel: if im.max_rel > re.max_rel || im.max_rel.is_nan() {
            im.max_rel
        } else {
            re.max_rel
        },
        skipped_zero: re.skipped_zero + im.skipped_zero,
    })
}

#[cfg(test)]
mod tests {
    use num_bigint::BigInt;

    use super::*;

    #[test]
    fn small_exact_product() {
        let a = Matrix::from_rows(&[vec![1.0, 2.0]]).unwrap();
        let b = Matrix::from_rows(&[vec![3.0], vec![4.0]]).unwrap();
        let c = exact_gemm_bigint(&a, &b).unwrap();
        assert_eq!(c.get(0, 0), &BigInt::from(11));
    }

    #[test]
    fn beyond_64_bits() {
        let x = 2f64.powi(52) - 1.0;
        let a = Matrix::from_fn(1, 4, |_, _| x);
        let b = Matrix::from_fn(4, 1, |_, _| -x);
        let c = exact_gemm_bigint(&a, &b).unwrap();
        let xb = BigInt::from(x as i64);
        assert_eq!(c.get(0, 0), &(-(&xb * &xb) * 4));
        // Wider than i128 as well.
        let a = Matrix::from_fn(1, 2, |_, _| 2f64.powi(100));
        let b = Matrix::from_fn(2, 1, |_, _| 2f64.powi(90));
        let c = exact_gemm_bigint(&a, &b).unwrap();
        assert_eq!(c.get(0, 0), &(BigInt::from(1) << 191));
    }

    #[test]
    fn rejects_non_integers() {
        let a = Matrix::from_rows(&[vec![1.5]]).unwrap();
        assert!(exact_gemm_bigint(&a, &a).is_err());
    }

    #[test]
    fn dd_captures_low_word() {
        let e = 2f64.powi(-53);
        let a = Matrix::from_rows(&[vec![1.0 + 2.0 * e]]).unwrap();
        let b = Matrix::from_rows(&[vec![1.0 - 2.0 * e]]).unwrap();
        let c = reference_gemm_dd_real(&a, &b).unwrap();
        // (1 + 2^-52)(1 - 2^-52) = 1 - 2^-104
        assert_eq!(c.hi[(0, 0)], 1.0);
        assert_eq!(c.lo[(0, 0)], -(2f64.powi(-104)));
    }

    #[test]
    fn dd_identity() {
        let id = Matrix::from_fn(20, 20, |i, j| if i == j { 1.0 } else { 0.0 });
        let b = Matrix::from_fn(20, 3, |i, j| (i as f64 + 0.1) * (j as f64 - 1.7));
        let c = reference_gemm_dd_real(&id, &b).unwrap();
        assert_eq!(c.hi, b);
        assert!(c.lo.as_slice().iter().all(|&x| x == 0.0));
    }

    #[test]
    fn lane_and_tail_paths_agree() {
        // 17 rows: one full 16-lane block plus a scalar tail row equal to row 0.
        let a = Matrix::from_fn(17, 9, |i, j| {
            let i = if i == 16 { 0 } else { i };
            ((i * 31 + j * 7) % 13) as f64 * 0.1 - 0.55
        });
        let b = Matrix::from_fn(9, 2, |i, j| (i as f64 * 0.37).sin() + j as f64);
        let c = reference_gemm_dd_real(&a, &b).unwrap();
        for j in 0..2 {
            assert_eq!(c.get(16, j), c.get(0, j));
            let mut acc = DoubleDouble::ZERO;
            for h in 0..9 {
                acc = acc.add_prod(a[(0, h)], b[(h, j)]);
            }
            assert_eq!(c.get(0, j), acc);
        }
    }

    #[test]
    fn relative_error_metric() {
        let r = reference_gemm_dd_real(
            &Matrix::from_rows(&[vec![1.0], vec![0.0], vec![2.0]]).unwrap(),
            &Matrix::from_rows(&[vec![1.0]]).unwrap(),
        )
        .unwrap();
        let exact = Matrix::from_rows(&[vec![1.0], vec![0.0], vec![2.0]]).unwrap();
        let s = max_relative_error_real(&exact, &r).unwrap();
        assert_eq!(
            s,
            ErrorStats {
                max_rel: 0.0,
                skipped_zero: 1
            }
        );
        let eps = f64::EPSILON;
        let off = Matrix::from_rows(&[vec![1.0], vec![0.5], vec![2.0 * (1.0 + 2.0 * eps)]]).unwrap();
        let s = max_relative_error_real(&off, &r).unwrap();
        assert_eq!(s.max_rel, 2.0 * eps);
    }

    #[test]
    fn native_complex_small() {
        let a = ComplexMatrix::new(
            Matrix::from_rows(&[vec![1.0f32]]).unwrap(),
            Matrix::from_rows(&[vec![2.0f32]]).unwrap(),
        )
        .unwrap();
        let b = ComplexMatrix::new(
            Matrix::from_rows(&[vec![3.0f32]]).unwrap(),
            Matrix::from_rows(&[vec![4.0f32]]).unwrap(),
        )
        .unwrap();
        let c = native_gemm_complex(&a, &b).unwrap();
        assert_eq!((c.re[(0, 0)], c.im[(0, 0)]), (-5.0, 10.0));
        let r = reference_gemm_dd_complex(&a, &b).unwrap();
        assert_eq!((r.re.hi[(0, 0)], r.im.hi[(0, 0)]), (-5.0, 10.0));
    }
}
