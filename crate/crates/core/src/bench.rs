//! Test-matrix generation, precision/domain dispatch and accuracy sweeps.

use std::io::Write;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::emulate::{emulate_gemm_complex, emulate_gemm_real, Domain, EmuConfig, Precision, Scalar};
use crate::error::{EmuError, Result};
use crate::int8::{ComplexStrategy, DEFAULT_N_BLOCK};
use crate::matrix::{ComplexMatrix, Matrix};
use crate::oracle::{
    max_relative_error_complex, max_relative_error_real, native_gemm_complex, native_gemm_real,
    reference_gemm_dd_complex, reference_gemm_dd_real, ComplexDdMatrix, DdMatrix, ErrorStats,
};
use crate::scaling::Mode;

/// A matrix of any supported element type.
#[derive(Debug, Clone, PartialEq)]
pub enum AnyMatrix {
    F32(Matrix<f32>),
    F64(Matrix<f64>),
    C32(ComplexMatrix<f32>),
    C64(ComplexMatrix<f64>),
}

impl AnyMatrix {
    pub fn shape(&self) -> (usize, usize) {
        match self {
            AnyMatrix::F32(m) => m.shape(),
            AnyMatrix::F64(m) => m.shape(),
            AnyMatrix::C32(m) => m.shape(),
            AnyMatrix::C64(m) => m.shape(),
        }
    }

    pub fn precision(&self) -> Precision {
        match self {
            AnyMatrix::F32(_) | AnyMatrix::C32(_) => Precision::Single,
            AnyMatrix::F64(_) | AnyMatrix::C64(_) => Precision::Double,
        }
    }

    pub fn domain(&self) -> Domain {
        match self {
            AnyMatrix::F32(_) | AnyMatrix::F64(_) => Domain::Real,
            AnyMatrix::C32(_) | AnyMatrix::C64(_) => Domain::Complex,
        }
    }
}

// ---------------------------------------------------------------------------
// Generator

/// Parameters of one generated matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GenSpec {
    pub rows: usize,
    pub cols: usize,
    /// Dynamic-range parameter; 0 gives magnitudes up to 0.5.
    pub phi: f64,
    pub seed: u64,
    /// Independent stream for the same seed (0 for A, 1 for B by convention).
    pub stream: u64,
    pub precision: Precision,
    pub domain: Domain,
}

/// Seeded source of `(u - 0.5) exp(z phi)` samples, `u` uniform on (0, 1]
/// and `z` standard normal.
pub struct PhiSampler {
    rng: ChaCha8Rng,
    phi: f64,
}

impl PhiSampler {
    pub fn new(seed: u64, stream: u64, phi: f64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        Self { rng, phi }
    }

    /// Uniform on (0, 1] with 53 random bits.
    pub fn uniform(&mut self) -> f64 {
        ((self.rng.next_u64() >> 11) + 1) as f64 * 2f64.powi(-53)
    }

    /// Standard normal by inverse CDF of a uniform on the open interval.
    pub fn normal(&mut self) -> f64 {
        let u = ((self.rng.next_u64() >> 11) as f64 + 0.5) * 2f64.powi(-53);
        inverse_normal_cdf(u)
    }

    pub fn sample(&mut self) -> f64 {
        let u = self.uniform();
        let z = self.normal();
        (u - 0.5) * libm::exp(z * self.phi)
    }
}

/// Acklam's rational approximation of the standard normal quantile
/// (relative error below 1.2e-9), `p` in (0, 1).
#[allow(clippy::excessive_precision)]
pub fn inverse_normal_cdf(p: f64) -> f64 {
    const A: [f64; 6] = [
        -3.969683028665376e+01,
        2.209460984245205e+02,
        -2.759285104469687e+02,
        1.383577518672690e+02,
        -3.066479806614716e+01,
        2.506628277459239e+00,
    ];
    const B: [f64; 5] = [
        -5.447609879822406e+01,
        1.615858368580409e+02,
        -1.556989798598866e+02,
        6.680131188771972e+01,
        -1.328068155288572e+01,
    ];
    const C: [f64; 6] = [
        -7.784894002430293e-03,
        -3.223964580411365e-01,
        -2.400758277161838e+00,
        -2.549732539343734e+00,
        4.374664141464968e+00,
        2.938163982698783e+00,
    ];
    const D: [f64; 4] = [
        7.784695709041462e-03,
        3.224671290700398e-01,
        2.445134137142996e+00,
        3.754408661907416e+00,
    ];
    const P_LOW: f64 = 0.02425;

    let tail = |q: f64| {
        (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    };
    if p < P_LOW {
        tail(libm::sqrt(-2.0 * libm::log(p)))
    } else if p <= 1.0 - P_LOW {
        let q = p - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    } else {
        -tail(libm::sqrt(-2.0 * libm::log(1.0 - p)))
    }
}

/// Real matrix, filled column-major.
pub fn gen_real<T: Scalar>(rows: usize, cols: usize, phi: f64, seed: u64, stream: u64) -> Matrix<T> {
    let mut s = PhiSampler::new(seed, stream, phi);
    let data = (0..rows * cols).map(|_| T::from_f64(s.sample())).collect();
    Matrix::from_col_major(rows, cols, data).expect("length matches")
}

/// Complex matrix, filled column-major, real part drawn before imaginary.
pub fn gen_complex<T: Scalar>(rows: usize, cols: usize, phi: f64, seed: u64, stream: u64) -> ComplexMatrix<T> {
    let mut s = PhiSampler::new(seed, stream, phi);
    let mut re = Vec::with_capacity(rows * cols);
    let mut im = Vec::with_capacity(rows * cols);
    for _ in 0..rows * cols {
        re.push(T::from_f64(s.sample()));
        im.push(T::from_f64(s.sample()));
    }
    ComplexMatrix::new(
        Matrix::from_col_major(rows, cols, re).expect("length matches"),
        Matrix::from_col_major(rows, cols, im).expect("length matches"),
    )
    .expect("shapes match")
}

pub fn gen_matrix(gs: &GenSpec) -> AnyMatrix {
    let GenSpec {
        rows,
        cols,
        phi,
        seed,
        stream,
        ..
    } = *gs;
    match (gs.domain, gs.precision) {
        (Domain::Real, Precision::Single) => AnyMatrix::F32(gen_real(rows, cols, phi, seed, stream)),
        (Domain::Real, Precision::Double) => AnyMatrix::F64(gen_real(rows, cols, phi, seed, stream)),
        (Domain::Complex, Precision::Single) => AnyMatrix::C32(gen_complex(rows, cols, phi, seed, stream)),
        (Domain::Complex, Precision::Double) => AnyMatrix::C64(gen_complex(rows, cols, phi, seed, stream)),
    }
}

// ---------------------------------------------------------------------------
// Dispatch on element type

fn mismatch(a: &AnyMatrix, b: &AnyMatrix) -> EmuError {
    EmuError::config(format!(
        "operand types differ: {} {} and {} {}",
        a.precision(),
        a.domain(),
        b.precision(),
        b.domain()
    ))
}

/// Emulated product; domain and precision follow the operands.
pub fn emulate_any(a: &AnyMatrix, b: &AnyMatrix, cfg: &EmuConfig) -> Result<AnyMatrix> {
    let cfg = EmuConfig {
        domain: a.domain(),
        precision: a.precision(),
        ..cfg.clone()
    };
    Ok(match (a, b) {
        (AnyMatrix::F32(a), AnyMatrix::F32(b)) => AnyMatrix::F32(emulate_gemm_real(a, b, &cfg)?),
        (AnyMatrix::F64(a), AnyMatrix::F64(b)) => AnyMatrix::F64(emulate_gemm_real(a, b, &cfg)?),
        (AnyMatrix::C32(a), AnyMatrix::C32(b)) => AnyMatrix::C32(emulate_gemm_complex(a, b, &cfg)?),
        (AnyMatrix::C64(a), AnyMatrix::C64(b)) => AnyMatrix::C64(emulate_gemm_complex(a, b, &cfg)?),
        _ => return Err(mismatch(a, b)),
    })
}

/// Product in the operands' own precision, without emulation.
pub fn native_any(a: &AnyMatrix, b: &AnyMatrix) -> Result<AnyMatrix> {
    Ok(match (a, b) {
        (AnyMatrix::F32(a), AnyMatrix::F32(b)) => AnyMatrix::F32(native_gemm_real(a, b)?),
        (AnyMatrix::F64(a), AnyMatrix::F64(b)) => AnyMatrix::F64(native_gemm_real(a, b)?),
        (AnyMatrix::C32(a), AnyMatrix::C32(b)) => AnyMatrix::C32(native_gemm_complex(a, b)?),
        (AnyMatrix::C64(a), AnyMatrix::C64(b)) => AnyMatrix::C64(native_gemm_complex(a, b)?),
        _ => return Err(mismatch(a, b)),
    })
}

/// Double-double reference of either domain.
#[derive(Debug, Clone, PartialEq)]
pub enum Reference {
    Real(DdMatrix),
    Complex(ComplexDdMatrix),
}

pub fn reference_any(a: &AnyMatrix, b: &AnyMatrix) -> Result<Reference> {
    Ok(match (a, b) {
        (AnyMatrix::F32(a), AnyMatrix::F32(b)) => Reference::Real(reference_gemm_dd_real(a, b)?),
        (AnyMatrix::F64(a), AnyMatrix::F64(b)) => Reference::Real(reference_gemm_dd_real(a, b)?),
        (AnyMatrix::C32(a), AnyMatrix::C32(b)) => Reference::Complex(reference_gemm_dd_complex(a, b)?),
        (AnyMatrix::C64(a), AnyMatrix::C64(b)) => Reference::Complex(reference_gemm_dd_complex(a, b)?),
        _ => return Err(mismatch(a, b)),
    })
}

pub fn max_rel_error_any(c: &AnyMatrix, r: &Reference) -> Result<ErrorStats> {
    match (c, r) {
        (AnyMatrix::F32(c), Reference::Real(r)) => max_relative_error_real(c, r),
        (AnyMatrix::F64(c), Reference::Real(r)) => max_relative_error_real(c, r),
        (AnyMatrix::C32(c), Reference::Complex(r)) => max_relative_error_complex(c, r),
        (AnyMatrix::C64(c), Reference::Complex(r)) => max_relative_error_complex(c, r),
        _ => Err(EmuError::config("result and reference domains differ")),
    }
}

// ---------------------------------------------------------------------------
// Accuracy sweep

/// Desk-scale default dimensions of an accuracy sweep.
pub const DEFAULT_SWEEP_DIMS: (usize, usize, usize) = (256, 256, 4096);

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    /// `(m, n, k)`.
    pub dims: (usize, usize, usize),
    pub num_moduli: Vec<usize>,
    pub phis: Vec<f64>,
    pub seeds: Vec<u64>,
    pub mode: Mode,
    pub precision: Precision,
    pub domain: Domain,
    pub strategy: ComplexStrategy,
    pub n_block: usize,
}

impl SweepSpec {
    pub fn new(precision: Precision, domain: Domain, mode: Mode) -> Self {
        Self {
            dims: DEFAULT_SWEEP_DIMS,
            num_moduli: Vec::new(),
            phis: vec![0.5],
            seeds: vec![0],
            mode,
            precision,
            domain,
            strategy: ComplexStrategy::Karatsuba,
            n_block: DEFAULT_N_BLOCK,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepRow {
    pub num_moduli: usize,
    pub phi: f64,
    pub seed: u64,
    pub max_rel_error: f64,
    pub skipped_zero: usize,
}

/// The operand pair of one sweep point: A on stream 0, B on stream 1.
pub fn sweep_operands(spec: &SweepSpec, phi: f64, seed: u64) -> (AnyMatrix, AnyMatrix) {
    let (m, n, k) = spec.dims;
    let gs = |rows, cols, stream| GenSpec {
        rows,
        cols,
        phi,
        seed,
        stream,
        precision: spec.precision,
        domain: spec.domain,
    };
    (gen_matrix(&gs(m, k, 0)), gen_matrix(&gs(k, n, 1)))
}

/// One row per `(N, phi, seed)`, ordered by `N`, then `phi`, then `seed`
/// (in the order given).
pub fn run_accuracy_sweep(spec: &SweepSpec) -> Result<Vec<SweepRow>> {
    let base = EmuConfig::new(spec.domain, spec.precision)
        .with_mode(spec.mode)
        .with_strategy(spec.strategy)
        .with_n_block(spec.n_block);
    for &n in &spec.num_moduli {
        base.clone().with_num_moduli(n).validate()?;
    }
    let mut rows = Vec::new();
    for (pi, &phi) in spec.phis.iter().enumerate() {
        for (si, &seed) in spec.seeds.iter().enumerate() {
            let (a, b) = sweep_operands(spec, phi, seed);
            let reference = reference_any(&a, &b)?;
            for (ni, &n) in spec.num_moduli.iter().enumerate() {
                let c = emulate_any(&a, &b, &base.clone().with_num_moduli(n))?;
                let stats = max_rel_error_any(&c, &reference)?;
                rows.push((
                    (ni, pi, si),
                    SweepRow {
                        num_moduli: n,
                        phi,
                        seed,
                        max_rel_error: stats.max_rel,
                        skipped_zero: stats.skipped_zero,
                    },
                ));
            }
        }
    }
    rows.sort_by_key(|(key, _)| *key);
    Ok(rows.into_iter().map(|(_, r)| r).collect())
}

/// Writes `N,phi,seed,max_rel_error` CSV.
pub fn write_sweep_csv<W: Write>(rows: &[SweepRow], mut w: W) -> std::io::Result<()> {
    writeln!(w, "N,phi,seed,max_rel_error")?;
    for r in rows {
        writeln!(w, "{},{},{},{:e}", r.num_moduli, r.phi, r.seed, r.max_rel_error)?;
    }
    Ok(())
}

/// Median of a non-empty sample (mean of the middle pair for even sizes).
pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let h = v.len() / 2;
    if v.len() % 2 == 1 {
        v[h]
    } else {
        (v[h - 1] + v[h]) / 2.0
    }
}
