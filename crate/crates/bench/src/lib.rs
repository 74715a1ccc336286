//! Shared fixtures for the kernel benchmarks.

use lpcoreset_core::generators::gaussian_matrix;
use lpcoreset_core::matrix::Matrix;

/// Deterministic Gaussian test matrix.
pub fn fixture(n: usize, d: usize) -> Matrix {
    gaussian_matrix(n, d, 0xBE7C).expect("valid dimensions")
}
