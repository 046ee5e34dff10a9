//! Power-of-two scaling vectors (fast and accurate modes) and quantization.
//!
//! Every scaling factor is an exact power of two, represented by its exponent.
//! The exponents are chosen so that the truncated integer operands `A'`, `B'`
//! satisfy `2 * sum_h |a'_ih| |b'_hj| < P`, which makes the CRT reconstruction
//! unique.

use std::f64::consts::{LOG2_E, SQRT_2};
use std::str::FromStr;

use libm::{ilogb, scalbn};
use num_bigint::{BigInt, BigUint};

use crate::crt::{biguint_to_f64, f64_to_bigint, ModulusSet};
use crate::dd::two_sum;
use crate::error::{EmuError, Result};
use crate::int8::{gemm_i8_i32, Int32Matrix, Int8Matrix};
use crate::matrix::{ComplexMatrix, Matrix};

/// Largest exponent ever applied to an operand. Nothing finite needs more.
pub const MAX_EXPONENT: i32 = 2097;
/// Accurate mode scales row/column maxima into `[2^5, 2^6)`.
pub const BAR_BITS: i32 = 5;
/// Quantized magnitudes must stay below this power of two.
pub const QUANT_LIMIT_BITS: i32 = 180;

/// Unit roundoff of binary32.
const U_SINGLE: f64 = 1.0 / 16_777_216.0;

/// Scaling strategy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Mode {
    /// Cauchy–Schwarz row/column norm bound.
    Fast,
    /// Bound from an auxiliary 7-bit integer product.
    #[default]
    Accurate,
}

impl FromStr for Mode {
    type Err = EmuError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fast" => Ok(Mode::Fast),
            "accurate" | "accu" => Ok(Mode::Accurate),
            _ => Err(EmuError::config(format!("unknown mode `{s}` (fast|accurate)"))),
        }
    }
}

// ---------------------------------------------------------------------------
// log2

/// Splits a positive finite `x` into `m * 2^e` with `m` in `[1, 2)`.
fn split_pow2(x: f64) -> (f64, i32) {
    let e = ilogb(x);
    (scalbn(x, -e), e)
}

/// Binary logarithm, evaluated in a fixed operation order with no libm calls.
///
/// Exact for powers of two; otherwise within a few ulps. `x` must be positive
/// and finite.
pub fn log2_f64(x: f64) -> f64 {
    debug_assert!(x > 0.0 && x.is_finite());
    let (mut m, mut e) = split_pow2(x);
    if m > SQRT_2 {
        m *= 0.5;
        e += 1;
    }
    // ln m = 2 atanh(t), t = (m-1)/(m+1), |t| < 0.1716.
    let t = (m - 1.0) / (m + 1.0);
    let t2 = t * t;
    let mut s = 0.0;
    for j in (0..14).rev() {
        s = s * t2 + 1.0 / f64::from(2 * j + 1);
    }
    f64::from(e) + (2.0 * t * s) * LOG2_E
}

/// Bound on the absolute error of [`log2_f64`] (zero for powers of two).
fn log2_margin(x: f64, v: f64) -> f64 {
    if split_pow2(x).0 == 1.0 {
        0.0
    } else {
        (1.0 + v.abs()) * 2f64.powi(-40)
    }
}

/// Single-precision upper bound on `log2(x)`.
///
/// The result `r` satisfies `log2(x) <= r <= log2(x) + 2^-20 + |log2 x| 2^-22`
/// and is bitwise deterministic.
pub fn log2_upper(x: f64) -> Result<f32> {
    if !(x > 0.0 && x.is_finite()) {
        return Err(EmuError::domain(format!("log2 of {x}")));
    }
    let v = log2_f64(x);
    Ok(round_up_f32(v + log2_margin(x, v)))
}

fn round_up_f32(x: f64) -> f32 {
    let f = x as f32;
    if f64::from(f) < x {
        f.next_up()
    } else {
        f
    }
}

fn round_down_f32(x: f64) -> f32 {
    let f = x as f32;
    if f64::from(f) > x {
        f.next_down()
    } else {
        f
    }
}

/// `a - b` rounded toward minus infinity.
fn sub_down(a: f64, b: f64) -> f64 {
    let (s, e) = two_sum(a, -b);
    if e < 0.0 {
        s.next_down()
    } else {
        s
    }
}

/// `floor(a - b)` of the exact difference.
fn floor_diff(a: f64, b: f64) -> f64 {
    let (s, e) = two_sum(a, -b);
    let f = s.floor();
    if f == s && e < 0.0 {
        f - 1.0
    } else {
        f
    }
}

// ---------------------------------------------------------------------------
// Constants

/// Precomputed single-precision constants of the scaling formulas.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScalingConstants {
    /// `log2(P-1)/2 - 1.5`, rounded down.
    pub p_fast: f32,
    /// `log2(P-1)/2 - 0.5`, rounded down.
    pub p_accu: f32,
    /// `0.5 / (1 - 4u)`, rounded down.
    pub delta: f32,
    /// Unit roundoff of single precision.
    pub u: f32,
}

impl ScalingConstants {
    pub fn new(ms: &ModulusSet) -> Self {
        let pm1: BigUint = ms.product() - 1u32;
        let f = biguint_to_f64(&pm1);
        let v = log2_f64(f);
        let exact = f64_to_bigint(f) == BigInt::from(pm1);
        let margin = if exact {
            log2_margin(f, v)
        } else {
            (1.0 + v.abs()) * 2f64.powi(-40)
        };
        Self::from_log2_lower(v - margin)
    }

    /// Constants from a lower bound (or exact value) of `log2(P - 1)`.
    pub fn from_log2_lower(log2_pm1: f64) -> Self {
        let half = log2_pm1 * 0.5;
        Self {
            p_fast: round_down_f32(sub_down(half, 1.5)),
            p_accu: round_down_f32(sub_down(half, 0.5)),
            delta: round_down_f32(0.5 / (1.0 - 4.0 * U_SINGLE)),
            u: U_SINGLE as f32,
        }
    }
}

// ---------------------------------------------------------------------------
// Result types

/// Counters for degenerate rows/columns and clamped exponents.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ScalingDiagnostics {
    pub zero_rows: usize,
    pub zero_cols: usize,
    pub clamped: usize,
}

/// Per-row exponents of `mu` and per-column exponents of `nu`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ScalingVectors {
    pub mu_exp: Vec<i32>,
    pub nu_exp: Vec<i32>,
    /// Pre-scaling exponents of the accurate mode.
    pub bar_mu_exp: Option<Vec<i32>>,
    pub bar_nu_exp: Option<Vec<i32>>,
    pub diagnostics: ScalingDiagnostics,
}

/// Integer-valued operands together with their scaling.
#[derive(Debug, Clone)]
pub struct ScaledIntMatrices<M> {
    pub a_int: M,
    pub b_int: M,
    pub scaling: ScalingVectors,
}

/// Intermediate quantities of the accurate-mode bound.
#[derive(Debug, Clone)]
pub struct AccurateBound {
    pub bar_mu_exp: Vec<i32>,
    pub bar_nu_exp: Vec<i32>,
    /// `ceil(|A| 2^bar_mu)` per part (real, or real then imaginary).
    pub a_bar: Vec<Int8Matrix>,
    pub b_bar: Vec<Int8Matrix>,
    /// Real-part bound (the only bound for real inputs).
    pub c_re: Int32Matrix,
    pub c_im: Option<Int32Matrix>,
}

// ---------------------------------------------------------------------------
// Line statistics. A "line" is a row of A or a column of B; `parts` holds the
// real part and, for complex data, the imaginary part.

#[derive(Clone, Copy, PartialEq, Eq)]
enum Lines {
    Rows,
    Cols,
}

fn check_finite(parts: &[&Matrix<f64>]) -> Result<()> {
    for p in parts {
        if let Some(x) = p.as_slice().iter().find(|x| !x.is_finite()) {
            return Err(EmuError::domain(format!("non-finite input element {x}")));
        }
    }
    Ok(())
}

fn line_count(m: &Matrix<f64>, lines: Lines) -> usize {
    match lines {
        Lines::Rows => m.rows(),
        Lines::Cols => m.cols(),
    }
}

/// `floor(log2 max|x|)` per line, `None` for all-zero lines.
fn line_ilogb(parts: &[&Matrix<f64>], lines: Lines) -> Vec<Option<i32>> {
    let mut mx = vec![0.0f64; line_count(parts[0], lines)];
    for p in parts {
        for j in 0..p.cols() {
            for (i, &x) in p.col(j).iter().enumerate() {
                let slot = match lines {
                    Lines::Rows => &mut mx[i],
                    Lines::Cols => &mut mx[j],
                };
                *slot = slot.max(x.abs());
            }
        }
    }
    mx.into_iter().map(|v| (v != 0.0).then(|| ilogb(v))).collect()
}

/// Upper bound of `sum x^2` per line after normalizing by `2^-e`.
fn line_sumsq_upper(parts: &[&Matrix<f64>], lines: Lines, e: &[Option<i32>]) -> Vec<f64> {
    let mut sums = vec![0.0f64; e.len()];
    let mut terms = 0usize;
    for p in parts {
        terms += match lines {
            Lines::Rows => p.cols(),
            Lines::Cols => p.rows(),
        };
        for j in 0..p.cols() {
            for (i, &x) in p.col(j).iter().enumerate() {
                let l = if lines == Lines::Rows { i } else { j };
                if let Some(el) = e[l] {
                    let y = scalbn(x, -el);
                    sums[l] += y * y;
                }
            }
        }
    }
    // Each sum is >= 1 and carries a relative error below (terms+1) 2^-53.
    let inflate = 1.0 + (terms as f64 + 2.0) * 2f64.powi(-52);
    sums.into_iter().map(|s| (s * inflate).next_up()).collect()
}

fn clamp_exp(e: i32, diag: &mut ScalingDiagnostics) -> i32 {
    if e > MAX_EXPONENT {
        diag.clamped += 1;
        MAX_EXPONENT
    } else {
        e
    }
}

fn fast_line_exps(
    parts: &[&Matrix<f64>],
    lines: Lines,
    sc: &ScalingConstants,
    diag: &mut ScalingDiagnostics,
) -> Result<Vec<i32>> {
    let e = line_ilogb(parts, lines);
    let sums = line_sumsq_upper(parts, lines, &e);
    let pf = f64::from(sc.p_fast);
    let delta = f64::from(sc.delta);
    let mut out = Vec::with_capacity(e.len());
    for (el, s) in e.into_iter().zip(sums) {
        let exp = match el {
            Some(el) => {
                let l = f64::from(log2_upper(s)?);
                floor_diff(pf, (delta * l).max(1.0)) as i32 - el
            }
            None => {
                match lines {
                    Lines::Rows => diag.zero_rows += 1,
                    Lines::Cols => diag.zero_cols += 1,
                }
                floor_diff(pf, 1.0) as i32
            }
        };
        out.push(clamp_exp(exp, diag));
    }
    Ok(out)
}

/// `ceil(|x| 2^e)` per line, as 7-bit integers in `[0, 64]`.
fn bar_matrix(m: &Matrix<f64>, lines: Lines, e: &[i32]) -> Int8Matrix {
    Matrix::from_fn(m.rows(), m.cols(), |i, j| {
        let l = if lines == Lines::Rows { i } else { j };
        scalbn(m[(i, j)].abs(), e[l]).ceil() as i8
    })
}

fn bar_exps(parts: &[&Matrix<f64>], lines: Lines) -> Vec<i32> {
    line_ilogb(parts, lines)
        .into_iter()
        .map(|e| BAR_BITS - e.unwrap_or(0))
        .collect()
}

fn accurate_line_exps(
    bar: &[i32],
    maxima: &[i32],
    sc: &ScalingConstants,
    diag: &mut ScalingDiagnostics,
) -> Result<Vec<i32>> {
    let pa = f64::from(sc.p_accu);
    let delta = f64::from(sc.delta);
    bar.iter()
        .zip(maxima)
        .map(|(&b, &x)| {
            let l = f64::from(log2_upper(f64::from(x.max(1)))?);
            Ok(clamp_exp(b + floor_diff(pa, delta * l) as i32, diag))
        })
        .collect()
}

fn row_col_maxima(cs: &[&Int32Matrix]) -> (Vec<i32>, Vec<i32>) {
    let (m, n) = cs[0].shape();
    let mut rmax = vec![0i32; m];
    let mut cmax = vec![0i32; n];
    for c in cs {
        for (j, cm) in cmax.iter_mut().enumerate() {
            for (i, &x) in c.col(j).iter().enumerate() {
                rmax[i] = rmax[i].max(x);
                *cm = (*cm).max(x);
            }
        }
    }
    (rmax, cmax)
}

fn count_zero_lines(parts: &[&Matrix<f64>], lines: Lines) -> usize {
    line_ilogb(parts, lines).iter().filter(|e| e.is_none()).count()
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

// ---------------------------------------------------------------------------
// Public scaling entry points

fn fast_parts(a: &[&Matrix<f64>], b: &[&Matrix<f64>], sc: &ScalingConstants) -> Result<ScalingVectors> {
    check_inner(a[0].shape(), b[0].shape())?;
    check_finite(a)?;
    check_finite(b)?;
    let mut diagnostics = ScalingDiagnostics::default();
    let mu_exp = fast_line_exps(a, Lines::Rows, sc, &mut diagnostics)?;
    let nu_exp = fast_line_exps(b, Lines::Cols, sc, &mut diagnostics)?;
    Ok(ScalingVectors {
        mu_exp,
        nu_exp,
        bar_mu_exp: None,
        bar_nu_exp: None,
        diagnostics,
    })
}

/// Fast-mode scaling of real operands.
pub fn fast_scaling_real(a: &Matrix<f64>, b: &Matrix<f64>, sc: &ScalingConstants) -> Result<ScalingVectors> {
    fast_parts(&[a], &[b], sc)
}

/// Fast-mode scaling of complex operands; norms run over both parts.
pub fn fast_scaling_complex(
    a: &ComplexMatrix<f64>,
    b: &ComplexMatrix<f64>,
    sc: &ScalingConstants,
) -> Result<ScalingVectors> {
    fast_parts(&[&a.re, &a.im], &[&b.re, &b.im], sc)
}

fn bound_parts(a: &[&Matrix<f64>], b: &[&Matrix<f64>]) -> Result<AccurateBound> {
    check_inner(a[0].shape(), b[0].shape())?;
    check_finite(a)?;
    check_finite(b)?;
    let bar_mu_exp = bar_exps(a, Lines::Rows);
    let bar_nu_exp = bar_exps(b, Lines::Cols);
    let a_bar: Vec<_> = a.iter().map(|m| bar_matrix(m, Lines::Rows, &bar_mu_exp)).collect();
    let b_bar: Vec<_> = b.iter().map(|m| bar_matrix(m, Lines::Cols, &bar_nu_exp)).collect();

    let (c_re, c_im) = if a_bar.len() == 1 {
        (gemm_i8_i32(&a_bar[0], &b_bar[0])?, None)
    } else {
        let (ar, ai) = (&a_bar[0], &a_bar[1]);
        let (br, bi) = (&b_bar[0], &b_bar[1]);
        // C_I = [A_I A_R] [B_R; B_I]
        let lhs = hcat(ai, ar);
        let rhs = vcat(br, bi);
        let c_im = gemm_i8_i32(&lhs, &rhs)?;
        // C_R = C_I + (A_R - A_I)(B_R - B_I)
        let da = Matrix::from_fn(ar.rows(), ar.cols(), |i, j| ar[(i, j)] - ai[(i, j)]);
        let db = Matrix::from_fn(br.rows(), br.cols(), |i, j| br[(i, j)] - bi[(i, j)]);
        let d = gemm_i8_i32(&da, &db)?;
        let mut c_re = c_im.clone();
        for (x, y) in c_re.as_mut_slice().iter_mut().zip(d.as_slice()) {
            *x += y;
        }
        (c_re, Some(c_im))
    };
    Ok(AccurateBound {
        bar_mu_exp,
        bar_nu_exp,
        a_bar,
        b_bar,
        c_re,
        c_im,
    })
}

fn hcat(x: &Int8Matrix, y: &Int8Matrix) -> Int8Matrix {
    let mut data = x.as_slice().to_vec();
    data.extend_from_slice(y.as_slice());
    Matrix::from_col_major(x.rows(), x.cols() + y.cols(), data).expect("same row count")
}

fn vcat(x: &Int8Matrix, y: &Int8Matrix) -> Int8Matrix {
    let mut data = Vec::with_capacity(x.as_slice().len() + y.as_slice().len());
    for j in 0..x.cols() {
        data.extend_from_slice(x.col(j));
        data.extend_from_slice(y.col(j));
    }
    Matrix::from_col_major(x.rows() + y.rows(), x.cols(), data).expect("same column count")
}

/// Accurate-mode bound matrices for real operands.
pub fn accurate_bound_real(a: &Matrix<f64>, b: &Matrix<f64>) -> Result<AccurateBound> {
    bound_parts(&[a], &[b])
}

/// Accurate-mode bound matrices for complex operands.
pub fn accurate_bound_complex(a: &ComplexMatrix<f64>, b: &ComplexMatrix<f64>) -> Result<AccurateBound> {
    bound_parts(&[&a.re, &a.im], &[&b.re, &b.im])
}

fn accurate_parts(a: &[&Matrix<f64>], b: &[&Matrix<f64>], sc: &ScalingConstants) -> Result<ScalingVectors> {
    let bound = bound_parts(a, b)?;
    let cs: Vec<&Int32Matrix> = std::iter::once(&bound.c_re).chain(bound.c_im.as_ref()).collect();
    let (rmax, cmax) = row_col_maxima(&cs);
    let mut diagnostics = ScalingDiagnostics {
        zero_rows: count_zero_lines(a, Lines::Rows),
        zero_cols: count_zero_lines(b, Lines::Cols),
        clamped: 0,
    };
    let mu_exp = accurate_line_exps(&bound.bar_mu_exp, &rmax, sc, &mut diagnostics)?;
    let nu_exp = accurate_line_exps(&bound.bar_nu_exp, &cmax, sc, &mut diagnostics)?;
    Ok(ScalingVectors {
        mu_exp,
        nu_exp,
        bar_mu_exp: Some(bound.bar_mu_exp),
        bar_nu_exp: Some(bound.bar_nu_exp),
        diagnostics,
    })
}

/// Accurate-mode scaling of real operands.
pub fn accurate_scaling_real(a: &Matrix<f64>, b: &Matrix<f64>, sc: &ScalingConstants) -> Result<ScalingVectors> {
    accurate_parts(&[a], &[b], sc)
}

/// Accurate-mode scaling of complex operands.
pub fn accurate_scaling_complex(
    a: &ComplexMatrix<f64>,
    b: &ComplexMatrix<f64>,
    sc: &ScalingConstants,
) -> Result<ScalingVectors> {
    accurate_parts(&[&a.re, &a.im], &[&b.re, &b.im], sc)
}

// ---------------------------------------------------------------------------
// Quantization

/// `trunc(x * 2^e)`; exact, since the scaling only touches the exponent.
pub fn quantize_value(x: f64, e: i32) -> Result<f64> {
    let y = scalbn(x, e).trunc();
    if !y.is_finite() || y.abs() >= 2f64.powi(QUANT_LIMIT_BITS) {
        return Err(EmuError::domain(format!(
            "{x} * 2^{e} exceeds the 2^{QUANT_LIMIT_BITS} integer budget"
        )));
    }
    Ok(y)
}

/// Quantizes row `i` with exponent `exps[i]`.
pub fn quantize_rows(m: &Matrix<f64>, exps: &[i32]) -> Result<Matrix<f64>> {
    if exps.len() != m.rows() {
        return Err(EmuError::dim(format!(
            "{} row exponents for {} rows",
            exps.len(),
            m.rows()
        )));
    }
    let mut out = Vec::with_capacity(m.as_slice().len());
    for j in 0..m.cols() {
        for (&x, &e) in m.col(j).iter().zip(exps) {
            out.push(quantize_value(x, e)?);
        }
    }
    Matrix::from_col_major(m.rows(), m.cols(), out)
}

/// Quantizes column `j` with exponent `exps[j]`.
pub fn quantize_cols(m: &Matrix<f64>, exps: &[i32]) -> Result<Matrix<f64>> {
    if exps.len() != m.cols() {
        return Err(EmuError::dim(format!(
            "{} column exponents for {} columns",
            exps.len(),
            m.cols()
        )));
    }
    let mut out = Vec::with_capacity(m.as_slice().len());
    for (j, &e) in exps.iter().enumerate() {
        for &x in m.col(j) {
            out.push(quantize_value(x, e)?);
        }
    }
    Matrix::from_col_major(m.rows(), m.cols(), out)
}

/// Scales and quantizes real operands.
pub fn scale_real(
    a: &Matrix<f64>,
    b: &Matrix<f64>,
    mode: Mode,
    sc: &ScalingConstants,
) -> Result<ScaledIntMatrices<Matrix<f64>>> {
    let scaling = match mode {
        Mode::Fast => fast_scaling_real(a, b, sc)?,
        Mode::Accurate => accurate_scaling_real(a, b, sc)?,
    };
    Ok(ScaledIntMatrices {
        a_int: quantize_rows(a, &scaling.mu_exp)?,
        b_int: quantize_cols(b, &scaling.nu_exp)?,
        scaling,
    })
}

/// Scales and quantizes complex operands (one exponent per logical row/column).
pub fn scale_complex(
    a: &ComplexMatrix<f64>,
    b: &ComplexMatrix<f64>,
    mode: Mode,
    sc: &ScalingConstants,
) -> Result<ScaledIntMatrices<ComplexMatrix<f64>>> {
    let scaling = match mode {
        Mode::Fast => fast_scaling_complex(a, b, sc)?,
        Mode::Accurate => accurate_scaling_complex(a, b, sc)?,
    };
    let a_int = ComplexMatrix::new(
        quantize_rows(&a.re, &scaling.mu_exp)?,
        quantize_rows(&a.im, &scaling.mu_exp)?,
    )?;
    let b_int = ComplexMatrix::new(
        quantize_cols(&b.re, &scaling.nu_exp)?,
        quantize_cols(&b.im, &scaling.nu_exp)?,
    )?;
    Ok(ScaledIntMatrices { a_int, b_int, scaling })
}

/// Exact check of `2 sum_h |a'_ih| |b'_hj| < P` for every output element.
///
/// For complex operands pass both parts; the check covers the stacked real
/// representation. Intended for tests: cost is `O(mnk)` big-integer work.
pub fn satisfies_uniqueness(a_int: &[&Matrix<f64>], b_int: &[&Matrix<f64>], ms: &ModulusSet) -> bool {
    let p = BigInt::from(ms.product().clone());
    let (m, k) = a_int[0].shape();
    let n = b_int[0].cols();
    let abs = |x: f64| f64_to_bigint(x.abs());
    let a_abs: Vec<Vec<BigInt>> = a_int
        .iter()
        .map(|x| x.as_slice().iter().map(|&v| abs(v)).collect())
        .collect();
    let b_abs: Vec<Vec<BigInt>> = b_int
        .iter()
        .map(|x| x.as_slice().iter().map(|&v| abs(v)).collect())
        .collect();
    for i in 0..m {
        for j in 0..n {
            // Stacked real form: the real output pairs (R,R)+(I,I), the
            // imaginary output pairs (R,I)+(I,R).
            for shift in 0..b_abs.len() {
                let mut s = BigInt::from(0);
                for (pa, ap) in a_abs.iter().enumerate() {
                    let bp = &b_abs[(pa + shift) % b_abs.len()];
                    for h in 0..k {
                        s += &ap[i + h * m] * &bp[h + j * k];
                    }
                }
                if BigInt::from(2) * s >= p {
                    return false;
                }
            }
        }
    }
    true
}
