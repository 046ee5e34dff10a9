//! Exact int8 x int8 -> int32 matrix products and the modular complex kernels.
//!
//! This is the software stand-in for an INT8 matrix engine. All arithmetic is
//! integer, so results do not depend on tiling, blocking, or thread count.

use rayon::prelude::*;

use crate::crt::symmetric_mod_int;
use crate::error::{EmuError, Result};
use crate::matrix::Matrix;

pub type Int8Matrix = Matrix<i8>;
pub type Int32Matrix = Matrix<i32>;

/// Largest inner dimension for a single int8 product.
pub const MAX_INNER_DIM: usize = 1 << 17;
/// Largest inner dimension for the complex kernels.
pub const MAX_COMPLEX_INNER_DIM: usize = 1 << 16;
/// Default output-column block width.
pub const DEFAULT_N_BLOCK: usize = 8192;

/// How a modular complex product is mapped onto real int8 products.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub enum ComplexStrategy {
    /// `[C_R; C_I] = [[A_R, -A_I], [A_I, A_R]] [B_R; B_I]`.
    ExpandRows,
    /// `[C_I, C_R] = [A_I, A_R] [[B_R, -B_I], [B_I, B_R]]`.
    ExpandCols,
    /// Three products `D = A_R B_R`, `E = A_I B_I`, `F = (A_R + A_I)(B_R + B_I)`.
    #[default]
    Karatsuba,
}

impl std::str::FromStr for ComplexStrategy {
    type Err = EmuError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "expand-rows" => Ok(Self::ExpandRows),
            "expand-cols" => Ok(Self::ExpandCols),
            "karatsuba" => Ok(Self::Karatsuba),
            _ => Err(EmuError::config(format!("unknown complex strategy {s:?}"))),
        }
    }
}

/// Left operand transposed to row-major so each dot product reads two
/// contiguous slices.
pub(crate) struct PackedLhs {
    rows: usize,
    depth: usize,
    data: Vec<i8>,
}

impl PackedLhs {
    pub(crate) fn new(a: &Int8Matrix) -> Self {
        let (rows, depth) = a.shape();
        let mut data = vec![0i8; rows * depth];
        for h in 0..depth {
            for (i, &x) in a.col(h).iter().enumerate() {
                data[i * depth + h] = x;
            }
        }
        Self { rows, depth, data }
    }

    #[inline]
    fn row(&self, i: usize) -> &[i8] {
        &self.data[i * self.depth..(i + 1) * self.depth]
    }
}

/// Exact product `A B` with 32-bit accumulation.
///
/// Exact for `k < 2^17`. At `k = 2^17` the single input pair where every
/// product equals `(-128)^2` wraps to `-2^31`, which is still congruent to the
/// true value modulo `2^32` (and hence modulo 256).
pub fn gemm_i8_i32(a: &Int8Matrix, b: &Int8Matrix) -> Result<Int32Matrix> {
    check_gemm_dims(a.shape(), b.shape(), MAX_INNER_DIM)?;
    let lhs = PackedLhs::new(a);
    let mut out = Matrix::zeros(a.rows(), b.cols());
    gemm_packed(&lhs, b.as_slice(), b.cols(), out.as_mut_slice());
    Ok(out)
}

fn check_gemm_dims(a: (usize, usize), b: (usize, usize), max_k: usize) -> Result<()> {
    if a.1 != b.0 {
        return Err(EmuError::dim(format!(
            "inner dimensions differ: {}x{} times {}x{}",
            a.0, a.1, b.0, b.1
        )));
    }
    if a.1 > max_k {
        return Err(EmuError::dim(format!("inner dimension {} exceeds {max_k}", a.1)));
    }
    Ok(())
}

const TILE_R: usize = 4;
const TILE_C: usize = 4;
const PAR_COLS: usize = 16;

/// `out (m x n, col-major) = lhs * b (k x n, col-major)`.
pub(crate) fn gemm_packed(lhs: &PackedLhs, b: &[i8], n: usize, out: &mut [i32]) {
    let (m, k) = (lhs.rows, lhs.depth);
    if m == 0 || n == 0 {
        return;
    }
    if k == 0 {
        out.fill(0);
        return;
    }
    debug_assert_eq!(b.len(), k * n);
    debug_assert_eq!(out.len(), m * n);
    out.par_chunks_mut(m * PAR_COLS)
        .zip(b.par_chunks(k * PAR_COLS))
        .for_each(|(oc, bc)| gemm_block(lhs, bc, oc));
}

fn gemm_block(lhs: &PackedLhs, b: &[i8], out: &mut [i32]) {
    #[cfg(target_arch = "x86_64")]
    {
        if std::is_x86_feature_detected!("avx2") {
            // SAFETY: the CPU supports AVX2, checked just above.
            unsafe { gemm_block_avx2(lhs, b, out) };
            return;
        }
    }
    gemm_block_generic(lhs, b, out);
}

/// AVX2 path: 4x2 register tile, 16 int8 values per step widened to int16
/// and multiplied pairwise into int32 (`vpmaddwd`). Integer wrapping makes
/// the result identical to the generic path.
#[cfg(target_arch = "x86_64")]
#[target_feature(enable = "avx2")]
unsafe fn gemm_block_avx2(lhs: &PackedLhs, b: &[i8], out: &mut [i32]) {
    use std::arch::x86_64::*;

    #[inline(always)]
    unsafe fn load16(p: *const i8) -> __m256i {
        _mm256_cvtepi8_epi16(_mm_loadu_si128(p.cast()))
    }

    #[inline(always)]
    unsafe fn hsum(v: __m256i) -> i32 {
        let s = _mm_add_epi32(_mm256_castsi256_si128(v), _mm256_extracti128_si256::<1>(v));
        let s = _mm_add_epi32(s, _mm_shuffle_epi32::<0b01_00_11_10>(s));
        let s = _mm_add_epi32(s, _mm_shuffle_epi32::<0b10_11_00_01>(s));
        _mm_cvtsi128_si32(s)
    }

    const R: usize = 4;
    const C: usize = 2;
    let (m, k) = (lhs.rows, lhs.depth);
    let n = b.len() / k;
    let full = k - k % 16;
    let tail = |x: &[i8], y: &[i8]| {
        x[full..]
            .iter()
            .zip(&y[full..])
            .fold(0i32, |s, (&u, &v)| s.wrapping_add(i32::from(u) * i32::from(v)))
    };

    let mut j = 0;
    while j + C <= n {
        let cols = [&b[j * k..(j + 1) * k], &b[(j + 1) * k..(j + 2) * k]];
        let mut i = 0;
        while i + R <= m {
            let rows = [lhs.row(i), lhs.row(i + 1), lhs.row(i + 2), lhs.row(i + 3)];
            let mut acc = [_mm256_setzero_si256(); R * C];
            let mut h = 0;
            while h < full {
                let b0 = load16(cols[0].as_ptr().add(h));
                let b1 = load16(cols[1].as_ptr().add(h));
                for r in 0..R {
                    let a = load16(rows[r].as_ptr().add(h));
                    acc[r * C] = _mm256_add_epi32(acc[r * C], _mm256_madd_epi16(a, b0));
                    acc[r * C + 1] = _mm256_add_epi32(acc[r * C + 1], _mm256_madd_epi16(a, b1));
                }
                h += 16;
            }
            for r in 0..R {
                for c in 0..C {
                    out[(j + c) * m + i + r] = hsum(acc[r * C + c]).wrapping_add(tail(rows[r], cols[c]));
                }
            }
            i += R;
        }
        for ii in i..m {
            for c in 0..C {
                out[(j + c) * m + ii] = dot(lhs.row(ii), cols[c]);
            }
        }
        j += C;
    }
    for jj in j..n {
        let col = &b[jj * k..(jj + 1) * k];
        for i in 0..m {
            out[jj * m + i] = dot(lhs.row(i), col);
        }
    }
}

#[inline(always)]
fn gemm_block_generic(lhs: &PackedLhs, b: &[i8], out: &mut [i32]) {
    let (m, k) = (lhs.rows, lhs.depth);
    if k == 0 {
        out.fill(0);
        return;
    }
    let n = b.len() / k;
    let bcol = |j: usize| &b[j * k..(j + 1) * k];
    let mut j = 0;
    while j + TILE_C <= n {
        let cols = [bcol(j), bcol(j + 1), bcol(j + 2), bcol(j + 3)];
        let mut i = 0;
        while i + TILE_R <= m {
            let rows = [lhs.row(i), lhs.row(i + 1), lhs.row(i + 2), lhs.row(i + 3)];
            let t = dot_tile(&rows, &cols);
            for (c, tc) in t.iter().enumerate() {
                out[(j + c) * m + i..(j + c) * m + i + TILE_R].copy_from_slice(tc);
            }
            i += TILE_R;
        }
        for ii in i..m {
            for (c, col) in cols.iter().enumerate() {
                out[(j + c) * m + ii] = dot(lhs.row(ii), col);
            }
        }
        j += TILE_C;
    }
    for jj in j..n {
        let col = bcol(jj);
        for i in 0..m {
            out[jj * m + i] = dot(lhs.row(i), col);
        }
    }
}

const LANES: usize = 16;

/// 4x4 block of dot products; returns `[col][row]`.
#[inline(always)]
fn dot_tile(rows: &[&[i8]; TILE_R], cols: &[&[i8]; TILE_C]) -> [[i32; TILE_R]; TILE_C] {
    let k = rows[0].len();
    let mut acc = [[[0i32; LANES]; TILE_R]; TILE_C];
    let full = k - k % LANES;
    let mut h = 0;
    while h < full {
        let a: [[i16; LANES]; TILE_R] = std::array::from_fn(|r| std::array::from_fn(|l| i16::from(rows[r][h + l])));
        let bv: [[i16; LANES]; TILE_C] = std::array::from_fn(|c| std::array::from_fn(|l| i16::from(cols[c][h + l])));
        for c in 0..TILE_C {
            for r in 0..TILE_R {
                for l in 0..LANES {
                    acc[c][r][l] = acc[c][r][l].wrapping_add(i32::from(a[r][l]) * i32::from(bv[c][l]));
                }
            }
        }
        h += LANES;
    }
    let mut res = [[0i32; TILE_R]; TILE_C];
    for c in 0..TILE_C {
        for r in 0..TILE_R {
            let mut s = acc[c][r].iter().fold(0i32, |s, &x| s.wrapping_add(x));
            for hh in full..k {
                s = s.wrapping_add(i32::from(rows[r][hh]) * i32::from(cols[c][hh]));
            }
            res[c][r] = s;
        }
    }
    res
}

#[inline(always)]
fn dot(a: &[i8], b: &[i8]) -> i32 {
    a.iter()
        .zip(b)
        .fold(0i32, |s, (&x, &y)| s.wrapping_add(i32::from(x) * i32::from(y)))
}

#[inline]
fn reduce_i64(x: i64, p: u32) -> i8 {
    symmetric_mod_int(x, p) as i8
}

fn check_residues(ms: &[&Int8Matrix], p: u32) -> Result<()> {
    if !(2..=256).contains(&p) {
        return Err(EmuError::config(format!("modulus {p} outside 2..=256")));
    }
    let (lo, hi) = crate::crt::residue_range(p);
    for m in ms {
        if m.as_slice().iter().any(|&e| i32::from(e) < lo || i32::from(e) > hi) {
            return Err(EmuError::domain(format!(
                "residue outside [{lo}, {hi}] for modulus {p}"
            )));
        }
    }
    Ok(())
}

/// `E = mod(A B, p)` for one modulus, blocked over output columns.
pub fn real_gemm_mod(a: &Int8Matrix, b: &Int8Matrix, p: u32, n_block: usize) -> Result<Int8Matrix> {
    check_gemm_dims(a.shape(), b.shape(), MAX_INNER_DIM)?;
    if n_block == 0 {
        return Err(EmuError::config("block width must be at least 1"));
    }
    let lhs = PackedLhs::new(a);
    Ok(real_gemm_mod_packed(&lhs, b, p, n_block))
}

pub(crate) fn real_gemm_mod_packed(lhs: &PackedLhs, b: &Int8Matrix, p: u32, n_block: usize) -> Int8Matrix {
    let (m, k, n) = (lhs.rows, lhs.depth, b.cols());
    let mut e = Matrix::zeros(m, n);
    let mut d = vec![0i32; m * n_block.min(n)];
    for j0 in (0..n).step_by(n_block) {
        let nb = n_block.min(n - j0);
        let d = &mut d[..m * nb];
        gemm_packed(lhs, &b.as_slice()[j0 * k..(j0 + nb) * k], nb, d);
        for (dst, &x) in e.as_mut_slice()[j0 * m..(j0 + nb) * m].iter_mut().zip(d.iter()) {
            *dst = reduce_i64(i64::from(x), p);
        }
    }
    e
}

/// Modular complex product: returns `(E_R, E_I)` with
/// `E_R ≡ A_R B_R - A_I B_I` and `E_I ≡ A_R B_I + A_I B_R (mod p)`,
/// reduced to the symmetric residue range.
pub fn complex_gemm_mod(
    a_re: &Int8Matrix,
    a_im: &Int8Matrix,
    b_re: &Int8Matrix,
    b_im: &Int8Matrix,
    p: u32,
    strategy: ComplexStrategy,
    n_block: usize,
) -> Result<(Int8Matrix, Int8Matrix)> {
    if a_re.shape() != a_im.shape() || b_re.shape() != b_im.shape() {
        return Err(EmuError::dim("real and imaginary parts differ in shape"));
    }
    check_gemm_dims(a_re.shape(), b_re.shape(), MAX_COMPLEX_INNER_DIM)?;
    if n_block == 0 {
        return Err(EmuError::config("block width must be at least 1"));
    }
    check_residues(&[a_re, a_im, b_re, b_im], p)?;
    Ok(match strategy {
        ComplexStrategy::Karatsuba => {
            let lhs = KaratsubaLhs::new(a_re, a_im, p);
            karatsuba_mod_packed(&lhs, b_re, b_im, p, n_block)
        }
        ComplexStrategy::ExpandRows => expand_rows(a_re, a_im, b_re, b_im, p, n_block),
        ComplexStrategy::ExpandCols => expand_cols(a_re, a_im, b_re, b_im, p, n_block),
    })
}

/// Packed left operands `A_R`, `A_I`, `mod(A_R + A_I, p)` for the Karatsuba kernel.
pub(crate) struct KaratsubaLhs {
    re: PackedLhs,
    im: PackedLhs,
    sum: PackedLhs,
}

impl KaratsubaLhs {
    pub(crate) fn new(a_re: &Int8Matrix, a_im: &Int8Matrix, p: u32) -> Self {
        let sum = add_mod(a_re, a_im, p);
        Self {
            re: PackedLhs::new(a_re),
            im: PackedLhs::new(a_im),
            sum: PackedLhs::new(&sum),
        }
    }
}

fn add_mod(x: &Int8Matrix, y: &Int8Matrix, p: u32) -> Int8Matrix {
    let data = x
        .as_slice()
        .iter()
        .zip(y.as_slice())
        .map(|(&a, &b)| reduce_i64(i64::from(a) + i64::from(b), p))
        .collect();
    Matrix::from_col_major(x.rows(), x.cols(), data).expect("shape preserved")
}

fn neg_mod(x: &Int8Matrix, p: u32) -> Int8Matrix {
    x.map(|a| reduce_i64(-i64::from(a), p))
}

pub(crate) fn karatsuba_mod_packed(
    lhs: &KaratsubaLhs,
    b_re: &Int8Matrix,
    b_im: &Int8Matrix,
    p: u32,
    n_block: usize,
) -> (Int8Matrix, Int8Matrix) {
    let (m, k, n) = (lhs.re.rows, lhs.re.depth, b_re.cols());
    let b_sum = add_mod(b_re, b_im, p);
    let mut e_re = Matrix::zeros(m, n);
    let mut e_im = Matrix::zeros(m, n);
    let cap = m * n_block.min(n);
    let (mut d, mut e, mut f) = (vec![0i32; cap], vec![0i32; cap], vec![0i32; cap]);
    for j0 in (0..n).step_by(n_block) {
        let nb = n_block.min(n - j0);
        let cols = j0 * k..(j0 + nb) * k;
        let (d, e, f) = (&mut d[..m * nb], &mut e[..m * nb], &mut f[..m * nb]);
        gemm_packed(&lhs.re, &b_re.as_slice()[cols.clone()], nb, d);
        gemm_packed(&lhs.im, &b_im.as_slice()[cols.clone()], nb, e);
        gemm_packed(&lhs.sum, &b_sum.as_slice()[cols], nb, f);
        let out = j0 * m..(j0 + nb) * m;
        for (((re, im), (&dd, &ee)), &ff) in e_re.as_mut_slice()[out.clone()]
            .iter_mut()
            .zip(&mut e_im.as_mut_slice()[out])
            .zip(d.iter().zip(e.iter()))
            .zip(f.iter())
        {
            let (dd, ee, ff) = (i64::from(dd), i64::from(ee), i64::from(ff));
            *re = reduce_i64(dd - ee, p);
            *im = reduce_i64(ff - dd - ee, p);
        }
    }
    (e_re, e_im)
}

fn stack_rows(top: &Int8Matrix, bottom: &Int8Matrix) -> Int8Matrix {
    let m = top.rows();
    Matrix::from_fn(m + bottom.rows(), top.cols(), |i, j| {
        if i < m {
            top[(i, j)]
        } else {
            bottom[(i - m, j)]
        }
    })
}

fn stack_cols(left: &Int8Matrix, right: &Int8Matrix) -> Int8Matrix {
    let mut data = left.as_slice().to_vec();
    data.extend_from_slice(right.as_slice());
    Matrix::from_col_major(left.rows(), left.cols() + right.cols(), data).expect("shape preserved")
}

fn expand_rows(
    a_re: &Int8Matrix,
    a_im: &Int8Matrix,
    b_re: &Int8Matrix,
    b_im: &Int8Matrix,
    p: u32,
    n_block: usize,
) -> (Int8Matrix, Int8Matrix) {
    let m = a_re.rows();
    let a_hat = stack_cols(&stack_rows(a_re, a_im), &stack_rows(&neg_mod(a_im, p), a_re));
    let lhs = PackedLhs::new(&a_hat);
    let b_stack = stack_rows(b_re, b_im);
    let e = real_gemm_mod_packed(&lhs, &b_stack, p, n_block);
    let n = b_re.cols();
    let e_re = Matrix::from_fn(m, n, |i, j| e[(i, j)]);
    let e_im = Matrix::from_fn(m, n, |i, j| e[(i + m, j)]);
    (e_re, e_im)
}

fn expand_cols(
    a_re: &Int8Matrix,
    a_im: &Int8Matrix,
    b_re: &Int8Matrix,
    b_im: &Int8Matrix,
    p: u32,
    n_block: usize,
) -> (Int8Matrix, Int8Matrix) {
    let (m, n) = (a_re.rows(), b_re.cols());
    let lhs = PackedLhs::new(&stack_cols(a_im, a_re));
    let mut e_re = Matrix::zeros(m, n);
    let mut e_im = Matrix::zeros(m, n);
    // Block over logical output columns; each block expands to [B_R; B_I | -B_I; B_R].
    for j0 in (0..n).step_by(n_block) {
        let nb = n_block.min(n - j0);
        let br = b_re.col_range(j0, j0 + nb);
        let bi = b_im.col_range(j0, j0 + nb);
        let b_hat = stack_cols(&stack_rows(&br, &bi), &stack_rows(&neg_mod(&bi, p), &br));
        let e = real_gemm_mod_packed(&lhs, &b_hat, p, 2 * nb);
        e_im.as_mut_slice()[j0 * m..(j0 + nb) * m].copy_from_slice(&e.as_slice()[..nb * m]);
        e_re.as_mut_slice()[j0 * m..(j0 + nb) * m].copy_from_slice(&e.as_slice()[nb * m..]);
    }
    (e_re, e_im)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn naive(a: &Int8Matrix, b: &Int8Matrix) -> Matrix<i64> {
        Matrix::from_fn(a.rows(), b.cols(), |i, j| {
            (0..a.cols()).map(|h| i64::from(a[(i, h)]) * i64::from(b[(h, j)])).sum()
        })
    }

    fn lcg(seed: &mut u64) -> i8 {
        *seed = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        (*seed >> 56) as i8
    }

    #[test]
    fn small_product() {
        let a = Matrix::from_rows(&[vec![1i8, 2]]).unwrap();
        let b = Matrix::from_rows(&[vec![3i8], vec![4]]).unwrap();
        assert_eq!(gemm_i8_i32(&a, &b).unwrap().as_slice(), &[11]);
    }

    #[test]
    fn identity_widens() {
        let id = Matrix::from_fn(3, 3, |i, j| i8::from(i == j));
        let b = Matrix::from_rows(&[vec![-128i8, 5, 7], vec![1, 127, -3], vec![0, 9, -9]]).unwrap();
        let c = gemm_i8_i32(&id, &b).unwrap();
        assert_eq!(c, b.map(i32::from));
    }

    #[test]
    fn odd_shapes_match_naive() {
        let mut s = 7;
        for &(m, k, n) in &[(1, 1, 1), (5, 3, 7), (9, 33, 6), (4, 16, 4), (17, 50, 19), (3, 0, 2)] {
            let a = Matrix::from_fn(m, k, |_, _| lcg(&mut s));
            let b = Matrix::from_fn(k, n, |_, _| lcg(&mut s));
            let c = gemm_i8_i32(&a, &b).unwrap();
            assert_eq!(c.map(i64::from), naive(&a, &b), "{m}x{k}x{n}");
        }
    }

    #[test]
    fn dimension_errors() {
        let a = Int8Matrix::zeros(2, 3);
        let b = Int8Matrix::zeros(4, 2);
        assert!(matches!(gemm_i8_i32(&a, &b), Err(EmuError::Dimension(_))));
        let a = Int8Matrix::zeros(1, MAX_INNER_DIM + 1);
        let b = Int8Matrix::zeros(MAX_INNER_DIM + 1, 1);
        assert!(matches!(gemm_i8_i32(&a, &b), Err(EmuError::Dimension(_))));
    }

    #[test]
    fn extreme_inner_dimension_stays_exact() {
        let k = MAX_INNER_DIM - 1;
        let a = Matrix::from_fn(1, k, |_, _| -128i8);
        let b = Matrix::from_fn(k, 2, |_, j| if j == 0 { -128 } else { 127 });
        let c = gemm_i8_i32(&a, &b).unwrap();
        assert_eq!(i64::from(c[(0, 0)]), (k as i64) << 14);
        assert_eq!(i64::from(c[(0, 1)]), -(k as i64) * 128 * 127);
    }

    #[test]
    fn complex_hand_example() {
        let one = |v: i8| Matrix::from_rows(&[vec![v]]).unwrap();
        for s in [
            ComplexStrategy::ExpandRows,
            ComplexStrategy::ExpandCols,
            ComplexStrategy::Karatsuba,
        ] {
            let (re, im) = complex_gemm_mod(&one(1), &one(2), &one(3), &one(4), 251, s, 1).unwrap();
            assert_eq!((re[(0, 0)], im[(0, 0)]), (-5, 10), "{s:?}");
        }
    }

    #[test]
    fn complex_with_zero_imaginary() {
        let mut s = 3;
        let p = 253;
        let r = |s: &mut u64| (i32::from(lcg(s)) % 126) as i8;
        let a_re = Matrix::from_fn(5, 7, |_, _| r(&mut s));
        let b_re = Matrix::from_fn(7, 4, |_, _| r(&mut s));
        let zero_a = Int8Matrix::zeros(5, 7);
        let zero_b = Int8Matrix::zeros(7, 4);
        let (e_re, e_im) = complex_gemm_mod(&a_re, &zero_a, &b_re, &zero_b, p, ComplexStrategy::Karatsuba, 3).unwrap();
        assert!(e_im.as_slice().iter().all(|&x| x == 0));
        assert_eq!(e_re, real_gemm_mod(&a_re, &b_re, p, 8192).unwrap());
    }

    #[test]
    fn complex_rejects_bad_residues_and_dims() {
        let a = Matrix::from_rows(&[vec![127i8]]).unwrap();
        let z = Int8Matrix::zeros(1, 1);
        assert!(complex_gemm_mod(&a, &z, &z, &z, 251, ComplexStrategy::Karatsuba, 1).is_err());
        assert!(complex_gemm_mod(&z, &z, &z, &z, 251, ComplexStrategy::Karatsuba, 0).is_err());
        let big = Int8Matrix::zeros(1, MAX_COMPLEX_INNER_DIM + 1);
        let bigt = Int8Matrix::zeros(MAX_COMPLEX_INNER_DIM + 1, 1);
        assert!(matches!(
            complex_gemm_mod(&big, &big, &bigt, &bigt, 251, ComplexStrategy::Karatsuba, 1),
            Err(EmuError::Dimension(_))
        ));
    }

    proptest! {
        #[test]
        fn strategies_agree_with_i64(
            p in prop_oneof![Just(251u32), Just(255u32), Just(256u32)],
            (m, k, n) in (1usize..12, 1usize..40, 1usize..20),
            seed in any::<u64>(),
            n_block in 1usize..9,
        ) {
            let (lo, hi) = crate::crt::residue_range(p);
            let span = (hi - lo + 1) as u64;
            let mut s = seed;
            let mut draw = || {
                s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                (lo + ((s >> 33) % span) as i32) as i8
            };
            let a_re = Matrix::from_fn(m, k, |_, _| draw());
            let a_im = Matrix::from_fn(m, k, |_, _| draw());
            let b_re = Matrix::from_fn(k, n, |_, _| draw());
            let b_im = Matrix::from_fn(k, n, |_, _| draw());
            let rr = naive(&a_re, &b_re);
            let ii = naive(&a_im, &b_im);
            let ri = naive(&a_re, &b_im);
            let ir = naive(&a_im, &b_re);
            let sym = |x: i64| crate::crt::symmetric_mod_int(x, p) as i8;
            let want_re = Matrix::from_fn(m, n, |i, j| sym(rr[(i, j)] - ii[(i, j)]));
            let want_im = Matrix::from_fn(m, n, |i, j| sym(ri[(i, j)] + ir[(i, j)]));
            for strat in [ComplexStrategy::ExpandRows, ComplexStrategy::ExpandCols, ComplexStrategy::Karatsuba] {
                let (er, ei) = complex_gemm_mod(&a_re, &a_im, &b_re, &b_im, p, strat, n_block).unwrap();
                prop_assert_eq!(&er, &want_re);
                prop_assert_eq!(&ei, &want_im);
            }
        }
    }
}
