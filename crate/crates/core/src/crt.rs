//! Moduli, CRT coefficients, symmetric residues and reconstruction.
//!
//! Integers are represented modulo a set of pairwise-coprime moduli no larger
//! than 256, so that every residue fits a signed byte. Reconstruction uses
//! the coefficients `(P / p_l) * q_l` split into a high part, chosen so that
//! the integer-weighted sum over all moduli is exact in double precision,
//! and a low part rounded to double.

use num_bigint::{BigInt, BigUint, Sign};
use num_integer::Integer;
use num_traits::{ToPrimitive, Zero};

use crate::dd::{two_sum, DoubleDouble};
use crate::error::{EmuError, Result};
use crate::matrix::Matrix;

pub const MAX_MODULI: usize = 20;
pub const MAX_MODULUS: u32 = 256;

/// Which reconstruction arithmetic to use.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CrtPath {
    /// One plain-double coefficient per modulus, plain-double reduction.
    Single,
    /// Split coefficients `s1 + s2`, exact `S1`, double-double reduction.
    Double,
}

/// Pairwise-coprime moduli plus everything needed to reconstruct from them.
#[derive(Clone, Debug)]
pub struct ModulusSet {
    moduli: Vec<u32>,
    product: BigUint,
    log2_product: f64,
    inverses: Vec<u32>,
    coeff_hi: Vec<f64>,
    coeff_lo: Vec<f64>,
    coeff: Vec<f64>,
    product_dd: DoubleDouble,
    product_f64: f64,
}

/// Greedy descending coprime scan from 256.
pub fn select_moduli(n: usize) -> Result<ModulusSet> {
    if !(1..=MAX_MODULI).contains(&n) {
        return Err(EmuError::config(format!(
            "number of moduli must be in 1..={MAX_MODULI}, got {n}"
        )));
    }
    let mut chosen: Vec<u32> = Vec::with_capacity(n);
    let mut cand = MAX_MODULUS;
    while chosen.len() < n {
        if chosen.iter().all(|&p| p.gcd(&cand) == 1) {
            chosen.push(cand);
        }
        cand -= 1;
    }
    ModulusSet::from_moduli(&chosen)
}

impl ModulusSet {
    /// Builds a set from explicit moduli. They are sorted descending.
    pub fn from_moduli(moduli: &[u32]) -> Result<Self> {
        let n = moduli.len();
        if !(1..=MAX_MODULI).contains(&n) {
            return Err(EmuError::config(format!(
                "number of moduli must be in 1..={MAX_MODULI}, got {n}"
            )));
        }
        let mut moduli = moduli.to_vec();
        moduli.sort_unstable_by(|a, b| b.cmp(a));
        for (i, &p) in moduli.iter().enumerate() {
            if !(2..=MAX_MODULUS).contains(&p) {
                return Err(EmuError::config(format!("modulus {p} outside 2..=256")));
            }
            if let Some(&q) = moduli[..i].iter().find(|&&q| q.gcd(&p) != 1) {
                return Err(EmuError::config(format!("moduli {q} and {p} are not coprime")));
            }
        }

        let product: BigUint = moduli.iter().map(|&p| BigUint::from(p)).product();
        let width = hi_coeff_width(n);
        let shift = product.bits().saturating_sub(u64::from(width));

        let mut inverses = Vec::with_capacity(n);
        let mut coeff_hi = Vec::with_capacity(n);
        let mut coeff_lo = Vec::with_capacity(n);
        let mut coeff = Vec::with_capacity(n);
        for &p in &moduli {
            let cofactor = &product / p;
            let r = (&cofactor % p).to_u32().unwrap_or(0);
            let q = mod_inverse(r, p).ok_or_else(|| EmuError::config(format!("no inverse of {r} modulo {p}")))?;
            let full = cofactor * q;
            let hi = (&full >> shift) << shift;
            let lo = &full - &hi;
            inverses.push(q);
            coeff_hi.push(biguint_to_f64(&hi));
            coeff_lo.push(biguint_to_f64(&lo));
            coeff.push(biguint_to_f64(&full));
        }

        let p_hi = biguint_to_f64(&product);
        let p_lo = bigint_to_f64(&(BigInt::from(product.clone()) - f64_to_bigint(p_hi)));
        let log2_product = crate::scaling::log2_f64(p_hi);

        Ok(Self {
            moduli,
            product,
            log2_product,
            inverses,
            coeff_hi,
            coeff_lo,
            coeff,
            product_dd: DoubleDouble::new(p_hi, p_lo),
            product_f64: p_hi,
        })
    }

    pub fn len(&self) -> usize {
        self.moduli.len()
    }

    pub fn is_empty(&self) -> bool {
        self.moduli.is_empty()
    }

    pub fn moduli(&self) -> &[u32] {
        &self.moduli
    }

    /// Exact product of all moduli.
    pub fn product(&self) -> &BigUint {
        &self.product
    }

    pub fn log2_product(&self) -> f64 {
        self.log2_product
    }

    /// `q_l` with `(P / p_l) * q_l ≡ 1 (mod p_l)`, in `[1, p_l)`.
    pub fn inverses(&self) -> &[u32] {
        &self.inverses
    }

    /// High parts `s_l1` of the CRT coefficients.
    pub fn coeff_hi(&self) -> &[f64] {
        &self.coeff_hi
    }

    /// Low parts `s_l2`.
    pub fn coeff_lo(&self) -> &[f64] {
        &self.coeff_lo
    }

    /// Coefficients rounded to nearest double, used by the single path.
    pub fn coeff(&self) -> &[f64] {
        &self.coeff
    }

    /// Significand budget of each `s_l1`: `53 - 7 - ceil(log2 N)` bits.
    pub fn hi_coeff_width(&self) -> u32 {
        hi_coeff_width(self.len())
    }

    /// Exact CRT coefficient `(P / p_l) * q_l`.
    pub fn coeff_exact(&self, l: usize) -> BigUint {
        (&self.product / self.moduli[l]) * self.inverses[l]
    }

    pub fn product_dd(&self) -> DoubleDouble {
        self.product_dd
    }
}

fn hi_coeff_width(n: usize) -> u32 {
    let ceil_log2 = usize::BITS - (n.max(1) - 1).leading_zeros();
    53 - 7 - ceil_log2
}

fn mod_inverse(a: u32, p: u32) -> Option<u32> {
    let (mut r0, mut r1) = (i64::from(p), i64::from(a));
    let (mut t0, mut t1) = (0i64, 1i64);
    while r1 != 0 {
        let q = r0 / r1;
        (r0, r1) = (r1, r0 - q * r1);
        (t0, t1) = (t1, t0 - q * t1);
    }
    if r0 != 1 {
        return None;
    }
    Some(t0.rem_euclid(i64::from(p)) as u32)
}

/// Round-to-nearest-even conversion, independent of the bigint crate's rounding.
pub(crate) fn biguint_to_f64(x: &BigUint) -> f64 {
    let bits = x.bits();
    if bits <= 64 {
        return x.to_u64().unwrap_or(0) as f64;
    }
    let shift = bits - 64;
    let mut top = (x >> shift).to_u64().unwrap_or(u64::MAX);
    if x.trailing_zeros().is_some_and(|tz| tz < shift) {
        // Sticky bit. Bit 0 of `top` sits below the 53-bit rounding point.
        top |= 1;
    }
    libm::scalbn(top as f64, shift as i32)
}

pub(crate) fn bigint_to_f64(x: &BigInt) -> f64 {
    let mag = biguint_to_f64(x.magnitude());
    if x.sign() == Sign::Minus {
        -mag
    } else {
        mag
    }
}

/// Exact conversion of an integer-valued double.
pub(crate) fn f64_to_bigint(x: f64) -> BigInt {
    debug_assert!(x.is_finite() && x.fract() == 0.0);
    if x.abs() < 9.0e15 {
        return BigInt::from(x as i64);
    }
    let bits = x.to_bits();
    let exp = ((bits >> 52) & 0x7ff) as i32 - 1075;
    let mant = (bits & ((1u64 << 52) - 1)) | (1u64 << 52);
    let mag = BigInt::from(mant) << exp as usize;
    if x < 0.0 {
        -mag
    } else {
        mag
    }
}

/// Symmetric remainder: `x - p * round(x / p)` with the range fixed to
/// `[-floor(p/2), ceil(p/2) - 1]`, so an even modulus never yields `+p/2`.
#[inline]
pub fn symmetric_mod_int(x: i64, p: u32) -> i32 {
    let p = i64::from(p);
    let r = x.rem_euclid(p);
    (if r >= (p + 1) / 2 { r - p } else { r }) as i32
}

#[inline]
fn symmetric_mod_i128(x: i128, p: u32) -> i32 {
    let p = i128::from(p);
    let r = x.rem_euclid(p);
    (if r >= (p + 1) / 2 { r - p } else { r }) as i32
}

/// Double-double reduction `s - P * round(s / P)` into `(-P/2, P/2]`.
pub fn symmetric_mod_wide_dd(s: DoubleDouble, ms: &ModulusSet) -> DoubleDouble {
    let p = ms.product_dd;
    let q = (s.hi / p.hi).round();
    let qp = DoubleDouble::from_prod(q, p.hi);
    let (h, e) = two_sum(s.hi, -qp.hi);
    let lo = ((e + s.lo) - qp.lo) - q * p.lo;
    let mut r = DoubleDouble::from_sum(h, lo);
    let half = DoubleDouble::new(0.5 * p.hi, 0.5 * p.lo);
    if r > half {
        r = r - p;
    } else if r <= -half {
        r = r + p;
    }
    r
}

/// Plain-double reduction `s - P * round(s / P)` into `(-P/2, P/2]`.
pub fn symmetric_mod_wide_f64(s: f64, ms: &ModulusSet) -> f64 {
    let p = ms.product_f64;
    let mut r = s - p * (s / p).round();
    if r > 0.5 * p {
        r -= p;
    } else if r <= -0.5 * p {
        r += p;
    }
    r
}

/// Per-modulus residue matrices of one integer matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct ResidueStack {
    moduli: Vec<u32>,
    residues: Vec<Matrix<i8>>,
}

impl ResidueStack {
    /// Wraps existing residue matrices; checks shapes and ranges.
    pub fn new(moduli: &[u32], residues: Vec<Matrix<i8>>) -> Result<Self> {
        if moduli.len() != residues.len() {
            return Err(EmuError::config(format!(
                "{} moduli but {} residue matrices",
                moduli.len(),
                residues.len()
            )));
        }
        if let Some(first) = residues.first() {
            if residues.iter().any(|r| r.shape() != first.shape()) {
                return Err(EmuError::dim("residue matrices differ in shape"));
            }
        }
        for (&p, r) in moduli.iter().zip(&residues) {
            let (lo, hi) = residue_range(p);
            if r.as_slice().iter().any(|&e| i32::from(e) < lo || i32::from(e) > hi) {
                return Err(EmuError::domain(format!(
                    "residue outside [{lo}, {hi}] for modulus {p}"
                )));
            }
        }
        Ok(Self {
            moduli: moduli.to_vec(),
            residues,
        })
    }

    pub fn moduli(&self) -> &[u32] {
        &self.moduli
    }

    pub fn residues(&self) -> &[Matrix<i8>] {
        &self.residues
    }

    pub fn into_residues(self) -> Vec<Matrix<i8>> {
        self.residues
    }

    pub fn shape(&self) -> (usize, usize) {
        self.residues.first().map_or((0, 0), Matrix::shape)
    }
}

/// Inclusive signed residue range for modulus `p`.
pub fn residue_range(p: u32) -> (i32, i32) {
    let p = p as i32;
    (-(p / 2), (p + 1) / 2 - 1)
}

/// Residues of every element of an integer-valued matrix, one matrix per modulus.
pub fn residue_decompose(m: &Matrix<f64>, ms: &ModulusSet) -> Result<ResidueStack> {
    let (rows, cols) = m.shape();
    let data = m.as_slice();
    let mut small = Vec::with_capacity(data.len());
    let mut wide = Vec::new();
    for &x in data {
        let w = IntValue::from_f64(x)?;
        if x.abs() < SMALL_LIMIT {
            small.push(x);
        } else {
            wide.push((small.len(), w));
            small.push(0.0);
        }
    }
    let pow2 = Pow2Residues::new(ms.moduli());
    let residues = ms
        .moduli()
        .iter()
        .enumerate()
        .map(|(l, &p)| {
            let mut d = vec![0i8; data.len()];
            small_residues(&small, p, &mut d);
            for &(idx, w) in &wide {
                d[idx] = w.residue(p, &pow2, l) as i8;
            }
            Matrix::from_col_major(rows, cols, d)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ResidueStack {
        moduli: ms.moduli().to_vec(),
        residues,
    })
}

const SMALL_LIMIT: f64 = 4_503_599_627_370_496.0; // 2^52

/// Symmetric residues of integers with `|x| < 2^52`, in plain doubles.
///
/// `q = round(x / p)` is off by at most one, `q * p` stays below `2^53` and
/// is exact, so `x - q p` is exact and one correction per side suffices.
fn small_residues(xs: &[f64], p: u32, out: &mut [i8]) {
    #[cfg(target_arch = "x86_64")]
    {
        if std::is_x86_feature_detected!("avx2") {
            // SAFETY: the CPU supports AVX2 (and hence SSE4.1), checked just above.
            unsafe { small_residues_avx2(xs, p, out) };
            return;
        }
    }
    small_residues_body(xs, p, out);
}

#[cfg(target_arch = "x86_64")]
#[target_feature(enable = "avx2")]
unsafe fn small_residues_avx2(xs: &[f64], p: u32, out: &mut [i8]) {
    small_residues_body(xs, p, out);
}

#[inline(always)]
fn small_residues_body(xs: &[f64], p: u32, out: &mut [i8]) {
    let inv = 1.0 / f64::from(p);
    let pf = f64::from(p);
    let (lo, hi) = residue_range(p);
    let (lo, hi) = (f64::from(lo), f64::from(hi));
    for (o, &x) in out.iter_mut().zip(xs) {
        let q = (x * inv).round_ties_even();
        let mut r = x - q * pf;
        r = if r > hi { r - pf } else { r };
        r = if r < lo { r + pf } else { r };
        // SAFETY: r is an integer in [-128, 127].
        *o = unsafe { r.to_int_unchecked::<i32>() } as i8;
    }
}

/// An integer-valued double split for cheap residue evaluation.
#[derive(Clone, Copy)]
enum IntValue {
    Small(i64),
    /// `mant * 2^exp` with `exp >= 11`.
    Wide {
        mant: i64,
        exp: u32,
    },
}

impl IntValue {
    fn from_f64(x: f64) -> Result<Self> {
        if !x.is_finite() || x.fract() != 0.0 {
            return Err(EmuError::domain(format!("{x} is not a finite integer")));
        }
        if x.abs() < 9.2e18 {
            return Ok(IntValue::Small(x as i64));
        }
        let bits = x.to_bits();
        let exp = ((bits >> 52) & 0x7ff) as u32 - 1075;
        if exp > 127 {
            return Err(EmuError::domain(format!("{x} exceeds the 2^180 residue budget")));
        }
        let mant = ((bits & ((1u64 << 52) - 1)) | (1u64 << 52)) as i64;
        Ok(IntValue::Wide {
            mant: if x < 0.0 { -mant } else { mant },
            exp,
        })
    }

    #[inline]
    fn residue(self, p: u32, pow2: &Pow2Residues, l: usize) -> i32 {
        match self {
            IntValue::Small(v) => symmetric_mod_int(v, p),
            IntValue::Wide { mant, exp } => {
                let r = i128::from(mant.rem_euclid(i64::from(p))) * i128::from(pow2.get(l, exp));
                symmetric_mod_i128(r, p)
            }
        }
    }
}

struct Pow2Residues {
    table: Vec<[u32; 128]>,
}

impl Pow2Residues {
    fn new(moduli: &[u32]) -> Self {
        let table = moduli
            .iter()
            .map(|&p| {
                let mut t = [0u32; 128];
                let mut v = 1 % p;
                for e in t.iter_mut() {
                    *e = v;
                    v = (v * 2) % p;
                }
                t
            })
            .collect();
        Self { table }
    }

    #[inline]
    fn get(&self, l: usize, exp: u32) -> u32 {
        self.table[l][exp as usize]
    }
}

/// Output of the CRT accumulation step.
#[derive(Clone, Debug, PartialEq)]
pub enum CrtAccumulator {
    Single(Matrix<f64>),
    Double { hi: Matrix<f64>, lo: Matrix<f64> },
}

impl CrtAccumulator {
    pub fn shape(&self) -> (usize, usize) {
        match self {
            CrtAccumulator::Single(s) => s.shape(),
            CrtAccumulator::Double { hi, .. } => hi.shape(),
        }
    }
}

/// `S = sum_l (P/p_l) q_l E_l`, accumulated per element in ascending `l`.
pub fn crt_accumulate(stack: &ResidueStack, ms: &ModulusSet, path: CrtPath) -> Result<CrtAccumulator> {
    crt_accumulate_slices(&stack.residues, stack.moduli(), ms, path)
}

pub(crate) fn crt_accumulate_slices(
    residues: &[Matrix<i8>],
    moduli: &[u32],
    ms: &ModulusSet,
    path: CrtPath,
) -> Result<CrtAccumulator> {
    if moduli != ms.moduli() {
        return Err(EmuError::config(format!(
            "residue stack built for moduli {moduli:?}, modulus set has {:?}",
            ms.moduli()
        )));
    }
    let (rows, cols) = residues.first().map_or((0, 0), Matrix::shape);
    if residues.iter().any(|r| r.shape() != (rows, cols)) {
        return Err(EmuError::dim("residue matrices differ in shape"));
    }
    let weighted_sum = |coeffs: &[f64]| {
        let mut acc = vec![0.0f64; rows * cols];
        for (e, &c) in residues.iter().zip(coeffs) {
            for (a, &x) in acc.iter_mut().zip(e.as_slice()) {
                *a += c * f64::from(x);
            }
        }
        Matrix::from_col_major(rows, cols, acc)
    };
    Ok(match path {
        CrtPath::Single => CrtAccumulator::Single(weighted_sum(ms.coeff())?),
        CrtPath::Double => CrtAccumulator::Double {
            hi: weighted_sum(ms.coeff_hi())?,
            lo: weighted_sum(ms.coeff_lo())?,
        },
    })
}

/// Final reduction `C' = mod(S, P)`, rounded to the nearest integer.
///
/// Equals the exact integer product only when `2 sum_h |a'_ih||b'_hj| < P`;
/// otherwise the result is off by an undetected multiple of `P`.
pub fn crt_reduce(acc: &CrtAccumulator, ms: &ModulusSet) -> Matrix<f64> {
    match acc {
        CrtAccumulator::Single(s) => s.map(|x| symmetric_mod_wide_f64(x, ms).round()),
        CrtAccumulator::Double { hi, lo } => {
            let data = hi
                .as_slice()
                .iter()
                .zip(lo.as_slice())
                .map(|(&h, &l)| {
                    symmetric_mod_wide_dd(DoubleDouble::from_sum(h, l), ms)
                        .round_to_integer()
                        .to_f64()
                })
                .collect();
            Matrix::from_col_major(hi.rows(), hi.cols(), data).expect("shape preserved")
        }
    }
}

/// Residues of the exact integer `x`, for tests and diagnostics.
pub fn residues_of(x: &BigInt, ms: &ModulusSet) -> Vec<i32> {
    ms.moduli()
        .iter()
        .map(|&p| {
            let r = x.mod_floor(&BigInt::from(p)).to_i64().unwrap_or(0);
            symmetric_mod_int(r, p)
        })
        .collect()
}

/// Exact value of `sum_l s_l1 E_l` for one element, used to audit the
/// split-accumulation bit budget.
pub fn exact_hi_sum(ms: &ModulusSet, residues: &[i32]) -> BigInt {
    let mut total = BigInt::zero();
    for (&c, &e) in ms.coeff_hi().iter().zip(residues) {
        total += f64_to_bigint(c) * e;
    }
    total
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_traits::One;
    use proptest::prelude::*;

    fn gcd_oracle(mut a: u32, mut b: u32) -> u32 {
        while b != 0 {
            (a, b) = (b, a % b);
        }
        a
    }

    #[test]
    fn select_one_modulus() {
        let ms = select_moduli(1).unwrap();
        assert_eq!(ms.moduli(), &[256]);
        assert_eq!(ms.product(), &BigUint::from(256u32));
    }

    #[test]
    fn select_three_moduli_matches_brute_force() {
        // Oracle: scan every integer <= 256 downward, keep it when coprime to all kept.
        let mut kept = Vec::new();
        for c in (2..=256u32).rev() {
            if kept.len() == 3 {
                break;
            }
            if kept.iter().all(|&k| gcd_oracle(k, c) == 1) {
                kept.push(c);
            }
        }
        assert_eq!(kept, vec![256, 255, 253]);
        let ms = select_moduli(3).unwrap();
        assert_eq!(ms.moduli(), kept.as_slice());
        assert_eq!(ms.product(), &BigUint::from(16_515_840u32));
    }

    #[test]
    fn select_rejects_out_of_range() {
        assert!(matches!(select_moduli(0), Err(EmuError::Config(_))));
        assert!(matches!(select_moduli(21), Err(EmuError::Config(_))));
    }

    #[test]
    fn moduli_invariants_hold_for_all_counts() {
        for n in 1..=MAX_MODULI {
            let ms = select_moduli(n).unwrap();
            let p = ms.moduli();
            assert!(p.windows(2).all(|w| w[0] > w[1]));
            for i in 0..n {
                for j in 0..i {
                    assert_eq!(gcd_oracle(p[i], p[j]), 1);
                }
                let cof = ms.product() / p[i];
                assert_eq!((cof * ms.inverses()[i]) % p[i], BigUint::one());
            }
        }
    }

    #[test]
    fn hi_coefficients_fit_budget() {
        for n in 1..=MAX_MODULI {
            let ms = select_moduli(n).unwrap();
            let width = ms.hi_coeff_width();
            for &c in ms.coeff_hi() {
                if c == 0.0 {
                    continue;
                }
                let big = f64_to_bigint(c);
                let mag = big.magnitude();
                let span = mag.bits() - mag.trailing_zeros().unwrap();
                assert!(span <= u64::from(width), "n={n}: {span} > {width}");
            }
        }
        assert_eq!(select_moduli(13).unwrap().hi_coeff_width(), 42);
    }

    #[test]
    fn split_coefficients_are_accurate() {
        // s1 + s2 misses the exact coefficient by at most half an ulp of the
        // discarded low part: |err| <= 2^(bits(P) - width - 54).
        for n in 1..=MAX_MODULI {
            let ms = select_moduli(n).unwrap();
            let shift = ms.product().bits() as i64 - i64::from(ms.hi_coeff_width());
            for l in 0..n {
                let exact = BigInt::from(ms.coeff_exact(l));
                let approx = f64_to_bigint(ms.coeff_hi()[l]);
                let lo = ms.coeff_lo()[l];
                let resid = &exact - &approx;
                assert!(resid.sign() != Sign::Minus);
                let resid_f = bigint_to_f64(&resid);
                assert!(resid_f < 2f64.powi(shift.max(0) as i32));
                let err = (resid_f - lo).abs();
                assert!(err <= 2f64.powi((shift - 54) as i32), "n={n} l={l}");
            }
        }
    }

    #[test]
    fn symmetric_mod_examples() {
        assert_eq!(symmetric_mod_int(7, 5), 2);
        assert_eq!(symmetric_mod_int(13, 5), -2);
        assert_eq!(symmetric_mod_int(128, 256), -128);
        assert_eq!(symmetric_mod_int(-128, 256), -128);
        assert_eq!(symmetric_mod_int(127, 256), 127);
        assert_eq!(symmetric_mod_int(-127, 255), -127);
        assert_eq!(symmetric_mod_int(127, 255), 127);
    }

    #[test]
    fn symmetric_mod_exhaustive_small() {
        for p in 2..=256u32 {
            let (lo, hi) = residue_range(p);
            assert_eq!(hi - lo + 1, p as i32);
            for x in -600i64..600 {
                let r = symmetric_mod_int(x, p);
                assert!(r >= lo && r <= hi);
                assert_eq!((x - i64::from(r)).rem_euclid(i64::from(p)), 0);
            }
        }
    }

    #[test]
    fn fast_residues_match_exact_at_edges() {
        let lim = 1i64 << 52;
        let mut xs: Vec<i64> = (-300..300).collect();
        for d in 1..600 {
            xs.extend([lim - d, -lim + d, (lim / 3) + d, -(lim / 7) - d]);
        }
        let xf: Vec<f64> = xs.iter().map(|&x| x as f64).collect();
        let mut out = vec![0i8; xs.len()];
        for p in [2u32, 3, 127, 128, 233, 251, 253, 255, 256] {
            small_residues(&xf, p, &mut out);
            for (&x, &r) in xs.iter().zip(&out) {
                assert_eq!(i32::from(r), symmetric_mod_int(x, p), "x={x} p={p}");
            }
        }
    }

    proptest! {
        #[test]
        fn fast_residues_match_exact(xs in proptest::collection::vec(-(1i64 << 52) + 1..(1i64 << 52), 1..64), p in 2u32..=256) {
            let xf: Vec<f64> = xs.iter().map(|&x| x as f64).collect();
            let mut out = vec![0i8; xs.len()];
            small_residues(&xf, p, &mut out);
            for (&x, &r) in xs.iter().zip(&out) {
                prop_assert_eq!(i32::from(r), symmetric_mod_int(x, p));
            }
        }

        #[test]
        fn crt_round_trip(xs in proptest::collection::vec(-(1i64 << 50)..(1i64 << 50), 1..32)) {
            let ms = select_moduli(8).unwrap();
            let m = Matrix::from_col_major(xs.len(), 1, xs.iter().map(|&x| x as f64).collect()).unwrap();
            let stack = residue_decompose(&m, &ms).unwrap();
            let back = crt_reduce(&crt_accumulate(&stack, &ms, CrtPath::Double).unwrap(), &ms);
            prop_assert_eq!(back, m);
        }
    }

    #[test]
    fn wide_mod_examples() {
        let ms = ModulusSet::from_moduli(&[3, 5]).unwrap();
        assert_eq!(symmetric_mod_wide_f64(22.0, &ms), 7.0);
        assert_eq!(symmetric_mod_wide_dd(DoubleDouble::from_f64(22.0), &ms).to_f64(), 7.0);
        assert_eq!(symmetric_mod_wide_f64(0.0, &ms), 0.0);
        assert_eq!(symmetric_mod_wide_dd(DoubleDouble::ZERO, &ms).to_f64(), 0.0);
        assert_eq!(symmetric_mod_wide_f64(15.0, &ms), 0.0);
        assert_eq!(symmetric_mod_wide_dd(DoubleDouble::from_f64(15.0), &ms).to_f64(), 0.0);
        // Upper end of the interval is closed.
        let even = ModulusSet::from_moduli(&[4]).unwrap();
        assert_eq!(symmetric_mod_wide_f64(2.0, &even), 2.0);
        assert_eq!(symmetric_mod_wide_f64(-2.0, &even), 2.0);
    }

    #[test]
    fn decompose_examples() {
        let ms = ModulusSet::from_moduli(&[3, 5]).unwrap();
        let st = residue_decompose(&Matrix::from_rows(&[vec![7.0]]).unwrap(), &ms).unwrap();
        // Sorted descending: modulus 5 first.
        assert_eq!(st.moduli(), &[5, 3]);
        assert_eq!(st.residues()[0].as_slice(), &[2]);
        assert_eq!(st.residues()[1].as_slice(), &[1]);

        let zero = residue_decompose(&Matrix::zeros(3, 2), &select_moduli(4).unwrap()).unwrap();
        assert!(zero.residues().iter().all(|r| r.as_slice().iter().all(|&e| e == 0)));

        let st = residue_decompose(&Matrix::from_rows(&[vec![255.0]]).unwrap(), &select_moduli(1).unwrap()).unwrap();
        assert_eq!(st.residues()[0].as_slice(), &[-1]);
    }

    #[test]
    fn decompose_wide_values_exactly() {
        let ms = select_moduli(20).unwrap();
        for &x in &[
            2f64.powi(70) * 3.0,
            -(2f64.powi(100) + 2f64.powi(60)),
            9.3e18,
            -1.234e25,
        ] {
            let st = residue_decompose(&Matrix::from_rows(&[vec![x]]).unwrap(), &ms).unwrap();
            let want = residues_of(&f64_to_bigint(x), &ms);
            let got: Vec<i32> = st.residues().iter().map(|r| i32::from(r.as_slice()[0])).collect();
            assert_eq!(got, want, "x={x}");
        }
    }

    #[test]
    fn decompose_rejects_non_integers() {
        let ms = select_moduli(2).unwrap();
        for bad in [0.5, f64::NAN, f64::INFINITY, 1e300] {
            let m = Matrix::from_rows(&[vec![bad]]).unwrap();
            assert!(matches!(residue_decompose(&m, &ms), Err(EmuError::Domain(_))));
        }
    }

    #[test]
    fn accumulate_hand_example() {
        let ms = ModulusSet::from_moduli(&[3, 5]).unwrap();
        assert_eq!(ms.inverses(), &[2, 2]);
        let st = residue_decompose(&Matrix::from_rows(&[vec![7.0]]).unwrap(), &ms).unwrap();
        match crt_accumulate(&st, &ms, CrtPath::Single).unwrap() {
            CrtAccumulator::Single(s) => assert_eq!(s.as_slice(), &[22.0]),
            _ => unreachable!(),
        }
        let acc = crt_accumulate(&st, &ms, CrtPath::Double).unwrap();
        assert_eq!(crt_reduce(&acc, &ms).as_slice(), &[7.0]);
    }

    #[test]
    fn accumulate_zero_and_mismatch() {
        let ms = select_moduli(5).unwrap();
        let st = residue_decompose(&Matrix::zeros(2, 2), &ms).unwrap();
        let acc = crt_accumulate(&st, &ms, CrtPath::Double).unwrap();
        assert_eq!(crt_reduce(&acc, &ms), Matrix::zeros(2, 2));
        let other = select_moduli(4).unwrap();
        assert!(matches!(
            crt_accumulate(&st, &other, CrtPath::Double),
            Err(EmuError::Config(_))
        ));
    }

    #[test]
    fn reduce_leaves_in_range_values() {
        let ms = ModulusSet::from_moduli(&[3, 5]).unwrap();
        let acc = CrtAccumulator::Single(Matrix::from_rows(&[vec![-7.0, 3.0, 7.0]]).unwrap());
        assert_eq!(crt_reduce(&acc, &ms).as_slice(), &[-7.0, 3.0, 7.0]);
    }

    #[test]
    fn stack_rejects_out_of_range_residue() {
        let m = Matrix::from_rows(&[vec![3i8]]).unwrap();
        assert!(ResidueStack::new(&[5], vec![m.clone()]).is_err());
        assert!(ResidueStack::new(&[7], vec![m]).is_ok());
    }
}
