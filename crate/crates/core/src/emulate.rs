//! End-to-end GEMM emulation: scale, quantize, multiply residues, reconstruct.

use std::fmt;
use std::str::FromStr;

use libm::scalbn;
use num_complex::Complex;

use crate::crt::{
    crt_accumulate_slices, crt_reduce, residue_decompose, select_moduli, CrtPath, ModulusSet, MAX_MODULI,
};
use crate::error::{EmuError, Result};
use crate::int8::{complex_gemm_mod, real_gemm_mod, ComplexStrategy, DEFAULT_N_BLOCK};
use crate::matrix::{ComplexMatrix, Matrix};
use crate::scaling::{scale_complex, scale_real, Mode, ScalingConstants, ScalingDiagnostics};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Precision {
    Single,
    #[default]
    Double,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Domain {
    Real,
    #[default]
    Complex,
}

impl FromStr for Precision {
    type Err = EmuError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "single" | "s" | "f32" => Ok(Precision::Single),
            "double" | "d" | "f64" => Ok(Precision::Double),
            _ => Err(EmuError::config(format!("unknown precision `{s}` (single|double)"))),
        }
    }
}

impl FromStr for Domain {
    type Err = EmuError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "real" => Ok(Domain::Real),
            "complex" => Ok(Domain::Complex),
            _ => Err(EmuError::config(format!("unknown domain `{s}` (real|complex)"))),
        }
    }
}

impl fmt::Display for Precision {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Precision::Single => "single",
            Precision::Double => "double",
        })
    }
}

impl fmt::Display for Domain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Domain::Real => "real",
            Domain::Complex => "complex",
        })
    }
}

/// Default number of moduli for a domain, precision and mode.
pub fn default_num_moduli(domain: Domain, precision: Precision, mode: Mode) -> usize {
    match (domain, precision, mode) {
        (Domain::Complex, Precision::Single, Mode::Fast) => 8,
        (Domain::Complex, Precision::Single, Mode::Accurate) => 7,
        (Domain::Complex, Precision::Double, Mode::Fast) => 14,
        (Domain::Complex, Precision::Double, Mode::Accurate) => 15,
        // Real data uses the same counts in both precisions.
        (Domain::Real, _, _) => 15,
    }
}

/// Emulation settings.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EmuConfig {
    pub precision: Precision,
    pub domain: Domain,
    pub mode: Mode,
    /// `None` picks [`default_num_moduli`].
    pub num_moduli: Option<usize>,
    /// Output-column block width.
    pub n_block: usize,
    pub strategy: ComplexStrategy,
    /// Worker threads; 0 uses the global pool, 1 runs serially.
    pub threads: usize,
}

impl Default for EmuConfig {
    fn default() -> Self {
        Self::new(Domain::Complex, Precision::Double)
    }
}

impl EmuConfig {
    pub fn new(domain: Domain, precision: Precision) -> Self {
        Self {
            precision,
            domain,
            mode: Mode::Accurate,
            num_moduli: None,
            n_block: DEFAULT_N_BLOCK,
            strategy: ComplexStrategy::Karatsuba,
            threads: 0,
        }
    }

    pub fn with_mode(mut self, mode: Mode) -> Self {
        self.mode = mode;
        self
    }

    pub fn with_num_moduli(mut self, n: usize) -> Self {
        self.num_moduli = Some(n);
        self
    }

    pub fn with_n_block(mut self, n_block: usize) -> Self {
        self.n_block = n_block;
        self
    }

    pub fn with_strategy(mut self, strategy: ComplexStrategy) -> Self {
        self.strategy = strategy;
        self
    }

    pub fn with_threads(mut self, threads: usize) -> Self {
        self.threads = threads;
        self
    }

    pub fn effective_num_moduli(&self) -> usize {
        self.num_moduli
            .unwrap_or_else(|| default_num_moduli(self.domain, self.precision, self.mode))
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.effective_num_moduli();
        if !(1..=MAX_MODULI).contains(&n) {
            return Err(EmuError::config(format!(
                "number of moduli must be in 1..={MAX_MODULI}, got {n}"
            )));
        }
        if self.n_block == 0 {
            return Err(EmuError::config("block width must be at least 1"));
        }
        Ok(())
    }

    /// Reconstruction arithmetic implied by the precision.
    pub fn crt_path(&self) -> CrtPath {
        match self.precision {
            Precision::Single => CrtPath::Single,
            Precision::Double => CrtPath::Double,
        }
    }

    fn expect(&self, domain: Domain, precision: Precision) -> Result<()> {
        if self.domain != domain || self.precision != precision {
            return Err(EmuError::config(format!(
                "config is for {} {} data, called with {domain} {precision}",
                self.precision, self.domain
            )));
        }
        self.validate()
    }

    /// Runs `f` on the configured thread pool.
    fn run<R: Send>(&self, f: impl FnOnce() -> Result<R> + Send) -> Result<R> {
        if self.threads == 0 {
            return f();
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(self.threads)
            .build()
            .map_err(|e| EmuError::config(format!("thread pool: {e}")))?
            .install(f)
    }
}

/// Floating-point element types accepted by the emulator.
pub trait Scalar: Copy + Default + Send + Sync + 'static {
    const PRECISION: Precision;
    fn to_f64(self) -> f64;
    fn from_f64(x: f64) -> Self;
}

impl Scalar for f32 {
    const PRECISION: Precision = Precision::Single;

    fn to_f64(self) -> f64 {
        f64::from(self)
    }

    fn from_f64(x: f64) -> Self {
        x as f32
    }
}

impl Scalar for f64 {
    const PRECISION: Precision = Precision::Double;

    fn to_f64(self) -> f64 {
        self
    }

    fn from_f64(x: f64) -> Self {
        x
    }
}

/// What happened during one emulation call.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct EmulationReport {
    pub moduli: Vec<u32>,
    pub scaling: ScalingDiagnostics,
}

/// `C = diag(2^-mu) C' diag(2^-nu)`, exact unless the result leaves the
/// normal range.
pub fn inverse_scale(cp: &Matrix<f64>, mu_exp: &[i32], nu_exp: &[i32]) -> Result<Matrix<f64>> {
    if mu_exp.len() != cp.rows() || nu_exp.len() != cp.cols() {
        return Err(EmuError::dim(format!(
            "{}x{} scaling for a {}x{} matrix",
            mu_exp.len(),
            nu_exp.len(),
            cp.rows(),
            cp.cols()
        )));
    }
    Ok(Matrix::from_fn(cp.rows(), cp.cols(), |i, j| {
        scalbn(cp[(i, j)], -(mu_exp[i] + nu_exp[j]))
    }))
}

fn moduli_for(cfg: &EmuConfig) -> Result<(ModulusSet, ScalingConstants)> {
    let ms = select_moduli(cfg.effective_num_moduli())?;
    let sc = ScalingConstants::new(&ms);
    Ok((ms, sc))
}

/// Product of integer-valued matrices through residues, int8 products and
/// CRT reconstruction. Exact when `2 sum_h |a_ih| |b_hj| < P` for every
/// output element and the result fits the CRT path's precision.
pub fn crt_gemm_int(
    a_int: &Matrix<f64>,
    b_int: &Matrix<f64>,
    ms: &ModulusSet,
    path: CrtPath,
    n_block: usize,
) -> Result<Matrix<f64>> {
    let ra = residue_decompose(a_int, ms)?.into_residues();
    let rb = residue_decompose(b_int, ms)?.into_residues();
    let e = ms
        .moduli()
        .iter()
        .zip(ra.iter().zip(&rb))
        .map(|(&p, (x, y))| real_gemm_mod(x, y, p, n_block))
        .collect::<Result<Vec<_>>>()?;
    Ok(crt_reduce(&crt_accumulate_slices(&e, ms.moduli(), ms, path)?, ms))
}

/// Complex counterpart of [`crt_gemm_int`]; the bound applies to the
/// `2k`-term real expansion of each output part.
pub fn crt_gemm_int_complex(
    a_int: &ComplexMatrix<f64>,
    b_int: &ComplexMatrix<f64>,
    ms: &ModulusSet,
    path: CrtPath,
    strategy: ComplexStrategy,
    n_block: usize,
) -> Result<ComplexMatrix<f64>> {
    let ar = residue_decompose(&a_int.re, ms)?.into_residues();
    let ai = residue_decompose(&a_int.im, ms)?.into_residues();
    let br = residue_decompose(&b_int.re, ms)?.into_residues();
    let bi = residue_decompose(&b_int.im, ms)?.into_residues();
    let mut er = Vec::with_capacity(ms.len());
    let mut ei = Vec::with_capacity(ms.len());
    for (l, &p) in ms.moduli().iter().enumerate() {
        let (x, y) = complex_gemm_mod(&ar[l], &ai[l], &br[l], &bi[l], p, strategy, n_block)?;
        er.push(x);
        ei.push(y);
    }
    let cr = crt_reduce(&crt_accumulate_slices(&er, ms.moduli(), ms, path)?, ms);
    let ci = crt_reduce(&crt_accumulate_slices(&ei, ms.moduli(), ms, path)?, ms);
    ComplexMatrix::new(cr, ci)
}

/// Emulated real product `A B`.
pub fn emulate_gemm_real<T: Scalar>(a: &Matrix<T>, b: &Matrix<T>, cfg: &EmuConfig) -> Result<Matrix<T>> {
    emulate_gemm_real_report(a, b, cfg).map(|(c, _)| c)
}

/// As [`emulate_gemm_real`], also returning diagnostics.
pub fn emulate_gemm_real_report<T: Scalar>(
    a: &Matrix<T>,
    b: &Matrix<T>,
    cfg: &EmuConfig,
) -> Result<(Matrix<T>, EmulationReport)> {
    cfg.expect(Domain::Real, T::PRECISION)?;
    let a = a.map(T::to_f64);
    let b = b.map(T::to_f64);
    cfg.run(|| {
        let (ms, sc) = moduli_for(cfg)?;
        let s = scale_real(&a, &b, cfg.mode, &sc)?;
        let cp = crt_gemm_int(&s.a_int, &s.b_int, &ms, cfg.crt_path(), cfg.n_block)?;
        let c = inverse_scale(&cp, &s.scaling.mu_exp, &s.scaling.nu_exp)?;
        let report = EmulationReport {
            moduli: ms.moduli().to_vec(),
            scaling: s.scaling.diagnostics,
        };
        Ok((c.map(T::from_f64), report))
    })
}

/// Emulated complex product `A B`.
pub fn emulate_gemm_complex<T: Scalar>(
    a: &ComplexMatrix<T>,
    b: &ComplexMatrix<T>,
    cfg: &EmuConfig,
) -> Result<ComplexMatrix<T>> {
    emulate_gemm_complex_report(a, b, cfg).map(|(c, _)| c)
}

/// As [`emulate_gemm_complex`], also returning diagnostics.
pub fn emulate_gemm_complex_report<T: Scalar>(
    a: &ComplexMatrix<T>,
    b: &ComplexMatrix<T>,
    cfg: &EmuConfig,
) -> Result<(ComplexMatrix<T>, EmulationReport)> {
    cfg.expect(Domain::Complex, T::PRECISION)?;
    let a = ComplexMatrix::new(a.re.map(T::to_f64), a.im.map(T::to_f64))?;
    let b = ComplexMatrix::new(b.re.map(T::to_f64), b.im.map(T::to_f64))?;
    cfg.run(|| {
        let (ms, sc) = moduli_for(cfg)?;
        let s = scale_complex(&a, &b, cfg.mode, &sc)?;
        let cp = crt_gemm_int_complex(&s.a_int, &s.b_int, &ms, cfg.crt_path(), cfg.strategy, cfg.n_block)?;
        let (mu, nu) = (&s.scaling.mu_exp, &s.scaling.nu_exp);
        let c = ComplexMatrix::new(
            inverse_scale(&cp.re, mu, nu)?.map(T::from_f64),
            inverse_scale(&cp.im, mu, nu)?.map(T::from_f64),
        )?;
        let report = EmulationReport {
            moduli: ms.moduli().to_vec(),
            scaling: s.scaling.diagnostics,
        };
        Ok((c, report))
    })
}

// ---------------------------------------------------------------------------
// GEMM-style entry points on column-major buffers with leading dimensions.
// Domain and precision come from the routine; the rest of `cfg` applies.

fn check_ld(name: &str, ld: usize, rows: usize) -> Result<()> {
    if ld < rows.max(1) {
        return Err(EmuError::dim(format!("{name} = {ld} is smaller than {rows} rows")));
    }
    Ok(())
}

fn real_gemm<T: Scalar>(
    cfg: &EmuConfig,
    (m, n, k): (usize, usize, usize),
    (a, lda): (&[T], usize),
    (b, ldb): (&[T], usize),
    (c, ldc): (&mut [T], usize),
) -> Result<()> {
    check_ld("lda", lda, m)?;
    check_ld("ldb", ldb, k)?;
    check_ld("ldc", ldc, m)?;
    let a = Matrix::from_strided(m, k, a, lda)?;
    let b = Matrix::from_strided(k, n, b, ldb)?;
    let cfg = EmuConfig {
        domain: Domain::Real,
        precision: T::PRECISION,
        ..cfg.clone()
    };
    emulate_gemm_real(&a, &b, &cfg)?.write_strided(c, ldc)
}

fn complex_gemm<T: Scalar>(
    cfg: &EmuConfig,
    (m, n, k): (usize, usize, usize),
    (a, lda): (&[Complex<T>], usize),
    (b, ldb): (&[Complex<T>], usize),
    (c, ldc): (&mut [Complex<T>], usize),
) -> Result<()> {
    check_ld("lda", lda, m)?;
    check_ld("ldb", ldb, k)?;
    check_ld("ldc", ldc, m)?;
    let a = ComplexMatrix::from_interleaved(m, k, a, lda)?;
    let b = ComplexMatrix::from_interleaved(k, n, b, ldb)?;
    let cfg = EmuConfig {
        domain: Domain::Complex,
        precision: T::PRECISION,
        ..cfg.clone()
    };
    emulate_gemm_complex(&a, &b, &cfg)?.write_interleaved(c, ldc)
}

/// `C = A B` for single-precision real column-major buffers.
#[allow(clippy::too_many_arguments)]
pub fn sgemm(
    cfg: &EmuConfig,
    m: usize,
    n: usize,
    k: usize,
    a: &[f32],
    lda: usize,
    b: &[f32],
    ldb: usize,
    c: &mut [f32],
    ldc: usize,
) -> Result<()> {
    real_gemm(cfg, (m, n, k), (a, lda), (b, ldb), (c, ldc))
}

/// `C = A B` for double-precision real column-major buffers.
#[allow(clippy::too_many_arguments)]
pub fn dgemm(
    cfg: &EmuConfig,
    m: usize,
    n: usize,
    k: usize,
    a: &[f64],
    lda: usize,
    b: &[f64],
    ldb: usize,
    c: &mut [f64],
    ldc: usize,
) -> Result<()> {
    real_gemm(cfg, (m, n, k), (a, lda), (b, ldb), (c, ldc))
}

/// `C = A B` for single-precision complex column-major buffers.
#[allow(clippy::too_many_arguments)]
pub fn cgemm(
    cfg: &EmuConfig,
    m: usize,
    n: usize,
    k: usize,
    a: &[Complex<f32>],
    lda: usize,
    b: &[Complex<f32>],
    ldb: usize,
    c: &mut [Complex<f32>],
    ldc: usize,
) -> Result<()> {
    complex_gemm(cfg, (m, n, k), (a, lda), (b, ldb), (c, ldc))
}

/// `C = A B` for double-precision complex column-major buffers.
#[allow(clippy::too_many_arguments)]
pub fn zgemm(
    cfg: &EmuConfig,
    m: usize,
    n: usize,
    k: usize,
    a: &[Complex<f64>],
    lda: usize,
    b: &[Complex<f64>],
    ldb: usize,
    c: &mut [Complex<f64>],
    ldc: usize,
) -> Result<()> {
    complex_gemm(cfg, (m, n, k), (a, lda), (b, ldb), (c, ldc))
}
