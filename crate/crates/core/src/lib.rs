//! Emulation of real and complex single/double precision matrix products
//! with exact int8 matrix multiplications and the Chinese remainder theorem.

pub mod bench;
pub mod crt;
pub mod dd;
pub mod emulate;
pub mod error;
pub mod int8;
pub mod io;
pub mod matrix;
pub mod oracle;
pub mod perf;
pub mod scaling;

pub use emulate::{cgemm, dgemm, emulate_gemm_complex, emulate_gemm_real, sgemm, zgemm, Domain, EmuConfig, Precision};
pub use error::{EmuError, Result};
pub use int8::ComplexStrategy;
pub use matrix::{ComplexMatrix, Matrix};
pub use scaling::Mode;
