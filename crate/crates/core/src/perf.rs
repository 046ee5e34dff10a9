//! Analytic time and throughput model for emulated complex GEMM.
//!
//! Time is a memory term (bytes moved over bandwidth `b`) plus a compute term
//! (int8 operations over engine throughput `p`); `c` accounts for arithmetic
//! overhead inside memory-bound kernels.

use std::io::Write;

use crate::emulate::Precision;
use crate::error::{EmuError, Result};
use crate::scaling::Mode;

/// Model inputs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PerfParams {
    /// Sustained memory bandwidth, bytes per second.
    pub b: f64,
    /// Int8 engine throughput, operations per second.
    pub p: f64,
    /// Correction term.
    pub c: f64,
    pub m: f64,
    pub n: f64,
    pub k: f64,
    pub num_moduli: f64,
    pub mode: Mode,
    pub precision: Precision,
}

impl PerfParams {
    /// Parameters with `c` equal to the number of moduli.
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        precision: Precision,
        mode: Mode,
        (m, n, k): (usize, usize, usize),
        num_moduli: usize,
        b: f64,
        p: f64,
    ) -> Self {
        Self {
            b,
            p,
            c: num_moduli as f64,
            m: m as f64,
            n: n as f64,
            k: k as f64,
            num_moduli: num_moduli as f64,
            mode,
            precision,
        }
    }

    pub fn with_c(mut self, c: f64) -> Self {
        self.c = c;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [self.b, self.p, self.m, self.n, self.k, self.num_moduli];
        if positive.iter().any(|&x| !(x > 0.0 && x.is_finite())) || !(self.c >= 0.0 && self.c.is_finite()) {
            return Err(EmuError::config(format!("invalid performance parameters {self:?}")));
        }
        Ok(())
    }

    /// Bytes moved (numerator of the memory term).
    pub fn memory_bytes(&self) -> f64 {
        let Self {
            c,
            m,
            n,
            k,
            num_moduli: nn,
            ..
        } = *self;
        let (kc, kk, mc) = match (self.mode, self.precision) {
            (Mode::Fast, Precision::Double) => (3.0 * nn + 32.0 + c, 4.0, 16.0 * nn + 16.0 + 2.0 * c),
            (Mode::Fast, Precision::Single) => (3.0 * nn + 16.0 + c, 4.0, 16.0 * nn + 8.0 + 2.0 * c),
            (Mode::Accurate, Precision::Double) => (35.0 + 3.0 * nn + c, 8.0, 16.0 * nn + 40.0 + 2.0 * c),
            (Mode::Accurate, Precision::Single) => (19.0 + 3.0 * nn + c, 8.0, 16.0 * nn + 32.0 + 2.0 * c),
        };
        (kc * k + kk) * (m + n) + mc * m * n
    }

    /// Int8 operations (numerator of the compute term).
    pub fn int8_ops(&self) -> f64 {
        let gemms = match self.mode {
            Mode::Fast => self.num_moduli,
            Mode::Accurate => self.num_moduli + 1.0,
        };
        6.0 * gemms * self.m * self.n * self.k
    }

    /// Floating-point operations credited to one complex product.
    pub fn flops(&self) -> f64 {
        8.0 * self.m * self.n * self.k
    }
}

/// Predicted execution time in seconds.
pub fn predict_time(pp: &PerfParams) -> f64 {
    pp.memory_bytes() / pp.b + pp.int8_ops() / pp.p
}

/// Throughput for a given time, `8 m n k / t * 1e-12`.
pub fn tflops_for_time(pp: &PerfParams, seconds: f64) -> f64 {
    pp.flops() / seconds * 1e-12
}

/// Predicted throughput in TFLOPS.
pub fn predicted_tflops(pp: &PerfParams) -> f64 {
    tflops_for_time(pp, predict_time(pp))
}

/// Compute-bound limit of [`predicted_tflops`] as `b` grows without bound.
pub fn compute_bound_tflops(pp: &PerfParams) -> f64 {
    tflops_for_time(pp, pp.int8_ops() / pp.p)
}

/// Inclusive, evenly spaced axis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Axis {
    pub min: f64,
    pub max: f64,
    pub steps: usize,
}

impl Axis {
    pub fn new(min: f64, max: f64, steps: usize) -> Self {
        Self { min, max, steps }
    }

    pub fn values(&self) -> Vec<f64> {
        if self.steps == 1 {
            return vec![self.min];
        }
        let d = (self.max - self.min) / (self.steps - 1) as f64;
        (0..self.steps).map(|i| self.min + i as f64 * d).collect()
    }

    // Negated comparisons also reject NaN.
    #[allow(clippy::neg_cmp_op_on_partial_ord)]
    fn validate(&self, name: &str) -> Result<()> {
        if self.steps == 0 || !(self.min > 0.0) || !(self.max >= self.min) || !self.max.is_finite() {
            return Err(EmuError::config(format!("invalid {name} range {self:?}")));
        }
        Ok(())
    }
}

/// Default bandwidth axis, 0.5–8 TB/s.
pub const DEFAULT_B_AXIS: Axis = Axis {
    min: 0.5e12,
    max: 8e12,
    steps: 16,
};
/// Default throughput axis, 0.25–5 POPS.
pub const DEFAULT_P_AXIS: Axis = Axis {
    min: 0.25e15,
    max: 5e15,
    steps: 20,
};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HeatCell {
    pub b: f64,
    pub p: f64,
    pub tflops: f64,
}

/// Throughput over a `b` × `p` grid, row-major over `b` then `p`.
/// `template` supplies every other parameter.
pub fn heatmap_grid(b_axis: Axis, p_axis: Axis, template: &PerfParams) -> Result<Vec<HeatCell>> {
    b_axis.validate("bandwidth")?;
    p_axis.validate("throughput")?;
    let ps = p_axis.values();
    let mut out = Vec::with_capacity(b_axis.steps * p_axis.steps);
    for b in b_axis.values() {
        for &p in &ps {
            let pp = PerfParams { b, p, ..*template };
            pp.validate()?;
            out.push(HeatCell {
                b,
                p,
                tflops: predicted_tflops(&pp),
            });
        }
    }
    Ok(out)
}

/// Writes `b,p,tflops` CSV.
pub fn write_heatmap_csv<W: Write>(cells: &[HeatCell], mut w: W) -> std::io::Result<()> {
    writeln!(w, "b,p,tflops")?;
    for c in cells {
        writeln!(w, "{},{},{}", c.b, c.p, c.tflops)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gh200(b: f64) -> PerfParams {
        PerfParams::new(Precision::Double, Mode::Accurate, (16384, 16384, 16384), 13, b, 1.5e15)
    }

    #[test]
    fn accurate_double_anchor() {
        let pp = gh200(4e12);
        let t = predict_time(&pp);
        assert!((t - 0.2764).abs() < 5e-4, "t={t}");
        let tf = predicted_tflops(&pp);
        assert!((tf - 127.3).abs() < 0.1, "tf={tf}");
        assert!((predicted_tflops(&gh200(2e12)) - 114.8).abs() < 0.1);
    }

    #[test]
    fn forced_time_conversion() {
        let pp = PerfParams::new(Precision::Single, Mode::Fast, (1024, 1024, 1024), 6, 1e12, 1e15);
        assert!((tflops_for_time(&pp, 1.0) - 0.008_589_934_592).abs() < 1e-15);
    }

    #[test]
    fn doubling_p_halves_compute_only_time() {
        let mut pp = gh200(4e12);
        pp.b = f64::INFINITY;
        let t1 = predict_time(&pp);
        pp.p *= 2.0;
        assert_eq!(predict_time(&pp), t1 / 2.0);
    }

    #[test]
    fn fast_is_cheaper_and_below_asymptote() {
        for prec in [Precision::Single, Precision::Double] {
            let acc = PerfParams::new(prec, Mode::Accurate, (4096, 4096, 4096), 8, 3e12, 1e15);
            let fast = PerfParams {
                mode: Mode::Fast,
                ..acc
            };
            assert!(predict_time(&fast) < predict_time(&acc));
            for pp in [acc, fast] {
                assert!(predicted_tflops(&pp) < compute_bound_tflops(&pp));
            }
        }
    }

    #[test]
    fn default_axes_hit_anchor_points() {
        assert!(DEFAULT_B_AXIS.values().contains(&4e12));
        assert!(DEFAULT_B_AXIS.values().contains(&2e12));
        assert!(DEFAULT_P_AXIS.values().contains(&1.5e15));
    }

    #[test]
    fn grid_is_monotone_and_ordered() {
        let tpl = PerfParams::new(Precision::Single, Mode::Fast, (16384, 16384, 16384), 6, 1.0, 1.0);
        let cells = heatmap_grid(DEFAULT_B_AXIS, DEFAULT_P_AXIS, &tpl).unwrap();
        let np = DEFAULT_P_AXIS.steps;
        assert_eq!(cells.len(), DEFAULT_B_AXIS.steps * np);
        for (idx, c) in cells.iter().enumerate() {
            if idx % np > 0 {
                assert_eq!(c.b, cells[idx - 1].b);
                assert!(c.tflops > cells[idx - 1].tflops);
            }
            if idx >= np {
                assert!(c.tflops > cells[idx - np].tflops);
            }
        }
        let one = heatmap_grid(Axis::new(3e12, 3e12, 1), Axis::new(1e15, 1e15, 1), &tpl).unwrap();
        let pp = PerfParams {
            b: 3e12,
            p: 1e15,
            ..tpl
        };
        assert_eq!(one[0].tflops, predicted_tflops(&pp));
    }

    #[test]
    fn csv_layout() {
        let mut buf = Vec::new();
        write_heatmap_csv(
            &[HeatCell {
                b: 4e12,
                p: 1.5e15,
                tflops: 127.5,
            }],
            &mut buf,
        )
        .unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "b,p,tflops\n4000000000000,1500000000000000,127.5\n"
        );
    }
}
