use num_complex::Complex;
use proptest::prelude::*;

use ozaki2::bench::{gen_complex, gen_real};
use ozaki2::oracle::{exact_gemm_bigint, native_gemm_real, reference_gemm_dd_complex, reference_gemm_dd_real};
use ozaki2::{
    cgemm, dgemm, emulate_gemm_complex, emulate_gemm_real, sgemm, zgemm, ComplexMatrix, ComplexStrategy, Domain,
    EmuConfig, EmuError, Matrix, Mode, Precision,
};

fn abs_product(a: &Matrix<f64>, b: &Matrix<f64>) -> Matrix<f64> {
    native_gemm_real(&a.map(f64::abs), &b.map(f64::abs)).unwrap()
}

/// Largest `|c - r| / (|A||B|)` over all elements.
fn componentwise_real(c: &Matrix<f64>, a: &Matrix<f64>, b: &Matrix<f64>) -> f64 {
    let r = reference_gemm_dd_real(a, b).unwrap();
    let scale = abs_product(a, b);
    let mut worst = 0.0f64;
    for i in 0..c.rows() {
        for j in 0..c.cols() {
            let d = r.get(i, j);
            let err = ((c[(i, j)] - d.hi) - d.lo).abs();
            if scale[(i, j)] > 0.0 {
                worst = worst.max(err / scale[(i, j)]);
            } else {
                assert_eq!(c[(i, j)], 0.0);
            }
        }
    }
    worst
}

fn componentwise_complex(c: &ComplexMatrix<f64>, a: &ComplexMatrix<f64>, b: &ComplexMatrix<f64>) -> f64 {
    let r = reference_gemm_dd_complex(a, b).unwrap();
    let abs = |z: &ComplexMatrix<f64>| Matrix::from_fn(z.rows(), z.cols(), |i, j| z.get(i, j).norm());
    let scale = abs_product(&abs(a), &abs(b));
    let mut worst = 0.0f64;
    for i in 0..c.rows() {
        for j in 0..c.cols() {
            let (dr, di) = (r.re.get(i, j), r.im.get(i, j));
            let err = ((c.re[(i, j)] - dr.hi) - dr.lo)
                .abs()
                .max(((c.im[(i, j)] - di.hi) - di.lo).abs());
            if scale[(i, j)] > 0.0 {
                worst = worst.max(err / scale[(i, j)]);
            }
        }
    }
    worst
}

#[test]
fn double_real_componentwise_accuracy() {
    let a = gen_real::<f64>(37, 300, 1.0, 11, 0);
    let b = gen_real::<f64>(300, 29, 1.0, 11, 1);
    for (mode, n, tol) in [
        (Mode::Accurate, 15, 1e-15),
        (Mode::Fast, 15, 1e-14),
        (Mode::Accurate, 18, 1e-15),
    ] {
        let cfg = EmuConfig::new(Domain::Real, Precision::Double)
            .with_mode(mode)
            .with_num_moduli(n);
        let c = emulate_gemm_real(&a, &b, &cfg).unwrap();
        let e = componentwise_real(&c, &a, &b);
        assert!(e < tol, "{mode:?} N={n}: {e:e}");
    }
}

#[test]
fn double_complex_componentwise_accuracy() {
    let a = gen_complex::<f64>(33, 257, 0.5, 12, 0);
    let b = gen_complex::<f64>(257, 41, 0.5, 12, 1);
    for strategy in [
        ComplexStrategy::Karatsuba,
        ComplexStrategy::ExpandRows,
        ComplexStrategy::ExpandCols,
    ] {
        let cfg = EmuConfig::new(Domain::Complex, Precision::Double).with_strategy(strategy);
        let c = emulate_gemm_complex(&a, &b, &cfg).unwrap();
        let e = componentwise_complex(&c, &a, &b);
        assert!(e < 1e-15, "{strategy:?}: {e:e}");
    }
}

#[test]
fn single_complex_componentwise_accuracy() {
    let a = gen_complex::<f32>(20, 512, 0.0, 13, 0);
    let b = gen_complex::<f32>(512, 24, 0.0, 13, 1);
    let widen = |z: &ComplexMatrix<f32>| ComplexMatrix::new(z.re.map(f64::from), z.im.map(f64::from)).unwrap();
    for (mode, tol) in [(Mode::Accurate, 1e-6), (Mode::Fast, 1e-5)] {
        let cfg = EmuConfig::new(Domain::Complex, Precision::Single).with_mode(mode);
        let c = emulate_gemm_complex(&a, &b, &cfg).unwrap();
        let e = componentwise_complex(&widen(&c), &widen(&a), &widen(&b));
        assert!(e < tol, "{mode:?}: {e:e}");
    }
}

#[test]
fn strategies_give_identical_outputs() {
    let a = gen_complex::<f64>(21, 70, 2.0, 14, 0);
    let b = gen_complex::<f64>(70, 90, 2.0, 14, 1);
    let run = |s| emulate_gemm_complex(&a, &b, &EmuConfig::default().with_strategy(s)).unwrap();
    let k = run(ComplexStrategy::Karatsuba);
    assert_eq!(run(ComplexStrategy::ExpandRows), k);
    assert_eq!(run(ComplexStrategy::ExpandCols), k);
}

#[test]
fn zero_rows_and_columns_give_exact_zeros() {
    let mut a = gen_real::<f64>(6, 40, 1.0, 15, 0);
    let mut b = gen_real::<f64>(40, 5, 1.0, 15, 1);
    for h in 0..40 {
        a[(2, h)] = 0.0;
        b[(h, 4)] = 0.0;
    }
    for mode in [Mode::Fast, Mode::Accurate] {
        let cfg = EmuConfig::new(Domain::Real, Precision::Double).with_mode(mode);
        let c = emulate_gemm_real(&a, &b, &cfg).unwrap();
        assert!((0..5).all(|j| c[(2, j)] == 0.0));
        assert!((0..6).all(|i| c[(i, 4)] == 0.0));
        assert!(c[(0, 0)] != 0.0);
    }
}

#[test]
fn empty_inner_dimension_gives_zeros() {
    let a = Matrix::<f64>::zeros(3, 0);
    let b = Matrix::<f64>::zeros(0, 4);
    let c = emulate_gemm_real(&a, &b, &EmuConfig::new(Domain::Real, Precision::Double)).unwrap();
    assert_eq!(c, Matrix::zeros(3, 4));
    let c = emulate_gemm_real(
        &Matrix::<f64>::zeros(0, 5),
        &Matrix::zeros(5, 2),
        &EmuConfig::new(Domain::Real, Precision::Double),
    )
    .unwrap();
    assert_eq!(c.shape(), (0, 2));
}

#[test]
fn invalid_inputs_are_rejected() {
    let cfg = EmuConfig::new(Domain::Real, Precision::Double);
    let a = Matrix::<f64>::zeros(2, 3);
    assert!(matches!(
        emulate_gemm_real(&a, &Matrix::zeros(4, 2), &cfg),
        Err(EmuError::Dimension(_))
    ));
    let mut nan = a.clone();
    nan[(0, 0)] = f64::NAN;
    assert!(matches!(
        emulate_gemm_real(&nan, &Matrix::zeros(3, 2), &cfg),
        Err(EmuError::Domain(_))
    ));
    let mut inf = a.clone();
    inf[(1, 2)] = f64::INFINITY;
    assert!(matches!(
        emulate_gemm_real(&inf, &Matrix::zeros(3, 2), &cfg),
        Err(EmuError::Domain(_))
    ));
    for n in [0, 1000] {
        let bad = cfg.clone().with_num_moduli(n);
        assert!(matches!(
            emulate_gemm_real(&a, &Matrix::zeros(3, 2), &bad),
            Err(EmuError::Config(_))
        ));
    }
    let single = EmuConfig::new(Domain::Real, Precision::Single);
    assert!(matches!(
        emulate_gemm_real(&a, &Matrix::zeros(3, 2), &single),
        Err(EmuError::Config(_))
    ));
}

#[test]
fn blas_entry_points_respect_leading_dimensions() {
    let (m, n, k) = (3, 2, 4);
    let (lda, ldb, ldc) = (5, 6, 4);
    let a: Vec<f64> = (0..lda * k).map(|x| x as f64 - 7.0).collect();
    let b: Vec<f64> = (0..ldb * n).map(|x| 3.0 - x as f64).collect();
    let mut c = vec![99.0; ldc * n];
    let cfg = EmuConfig::default();
    dgemm(&cfg, m, n, k, &a, lda, &b, ldb, &mut c, ldc).unwrap();
    for j in 0..n {
        for i in 0..m {
            let want: f64 = (0..k).map(|h| a[i + h * lda] * b[h + j * ldb]).sum();
            assert_eq!(c[i + j * ldc], want);
        }
        assert_eq!(c[m + j * ldc], 99.0, "padding overwritten");
    }

    let af: Vec<f32> = a.iter().map(|&x| x as f32).collect();
    let bf: Vec<f32> = b.iter().map(|&x| x as f32).collect();
    let mut cf = vec![99.0f32; ldc * n];
    sgemm(&cfg, m, n, k, &af, lda, &bf, ldb, &mut cf, ldc).unwrap();
    assert!(c.iter().zip(&cf).all(|(&x, &y)| x as f32 == y));

    let az: Vec<Complex<f64>> = a.iter().map(|&x| Complex::new(x, 1.0 - x)).collect();
    let bz: Vec<Complex<f64>> = b.iter().map(|&x| Complex::new(2.0 * x, x)).collect();
    let mut cz = vec![Complex::new(99.0, 99.0); ldc * n];
    zgemm(&cfg, m, n, k, &az, lda, &bz, ldb, &mut cz, ldc).unwrap();
    let mut cc = vec![Complex::new(99.0f32, 99.0); ldc * n];
    let ac: Vec<Complex<f32>> = az.iter().map(|z| Complex::new(z.re as f32, z.im as f32)).collect();
    let bc: Vec<Complex<f32>> = bz.iter().map(|z| Complex::new(z.re as f32, z.im as f32)).collect();
    cgemm(&cfg, m, n, k, &ac, lda, &bc, ldb, &mut cc, ldc).unwrap();
    for j in 0..n {
        for i in 0..m {
            let want: Complex<f64> = (0..k).map(|h| az[i + h * lda] * bz[h + j * ldb]).sum();
            assert_eq!(cz[i + j * ldc], want);
            assert_eq!(cc[i + j * ldc], Complex::new(want.re as f32, want.im as f32));
        }
        assert_eq!(cz[m + j * ldc], Complex::new(99.0, 99.0));
    }

    assert!(matches!(
        dgemm(&cfg, m, n, k, &a, 2, &b, ldb, &mut c, ldc),
        Err(EmuError::Dimension(_))
    ));
}

#[test]
fn conjugation_commutes_with_the_product() {
    let a = gen_complex::<f64>(9, 64, 1.0, 16, 0);
    let b = gen_complex::<f64>(64, 7, 1.0, 16, 1);
    let cfg = EmuConfig::default();
    let c = emulate_gemm_complex(&a, &b, &cfg).unwrap();
    let cc = emulate_gemm_complex(&a.conj(), &b.conj(), &cfg).unwrap();
    for i in 0..9 {
        for j in 0..7 {
            let (x, y) = (c.get(i, j).conj(), cc.get(i, j));
            assert!((x - y).norm() <= 1e-15 * x.norm(), "({i},{j}): {x} vs {y}");
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    /// Short-mantissa inputs are representable after scaling, so the
    /// emulated product equals the exact one rounded once.
    #[test]
    fn small_integer_products_are_exact(
        (m, k, n) in (1usize..10, 1usize..40, 1usize..10),
        seed in any::<u64>(),
        mode in prop_oneof![Just(Mode::Fast), Just(Mode::Accurate)],
    ) {
        let mut s = seed;
        let mut draw = || {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((s >> 40) as i64 % 4097 - 2048) as f64
        };
        let a = Matrix::from_fn(m, k, |_, _| draw());
        let b = Matrix::from_fn(k, n, |_, _| draw());
        let cfg = EmuConfig::new(Domain::Real, Precision::Double).with_mode(mode);
        let c = emulate_gemm_real(&a, &b, &cfg).unwrap();
        prop_assert!(exact_gemm_bigint(&a, &b).unwrap().equals_f64(&c));
    }
}

/// Wider exponent spread never helps: the median error over seeds grows
/// with phi at a fixed moduli count. Steps below phi = 1 are within seed
/// noise, so the sweep uses well-separated values.
#[test]
fn median_error_grows_with_phi() {
    use ozaki2::bench::{median, run_accuracy_sweep, SweepSpec};
    let phis = [0.0, 2.0, 4.0];
    for (precision, domain, moduli) in [
        (Precision::Double, Domain::Real, vec![12, 16]),
        (Precision::Double, Domain::Complex, vec![12, 16]),
        (Precision::Single, Domain::Real, vec![6, 8]),
        (Precision::Single, Domain::Complex, vec![6, 8]),
    ] {
        let mut spec = SweepSpec::new(precision, domain, Mode::Accurate);
        spec.dims = (48, 48, 256);
        spec.num_moduli = moduli.clone();
        spec.phis = phis.to_vec();
        spec.seeds = (0..7).collect();
        let rows = run_accuracy_sweep(&spec).unwrap();
        for &n in &moduli {
            let meds: Vec<f64> = phis
                .iter()
                .map(|&phi| {
                    let errs: Vec<f64> = rows
                        .iter()
                        .filter(|r| r.num_moduli == n && r.phi == phi)
                        .map(|r| r.max_rel_error)
                        .collect();
                    median(&errs)
                })
                .collect();
            assert!(
                meds.windows(2).all(|w| w[0] <= w[1]),
                "{precision:?} {domain:?} N={n}: {meds:?}"
            );
        }
    }
}
