//! Dense matrix helpers for the finite-state backend.

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Padé(13,13) numerator coefficients; the denominator uses the same
/// values with alternating signs.
const PADE13: [f64; 14] = [
    64_764_752_532_480_000.0,
    32_382_376_266_240_000.0,
    7_771_770_303_897_600.0,
    1_187_353_796_428_800.0,
    129_060_195_264_000.0,
    10_559_470_521_600.0,
    670_442_572_800.0,
    33_522_128_640.0,
    1_323_241_920.0,
    40_840_800.0,
    960_960.0,
    16_380.0,
    182.0,
    1.0,
];

/// Largest 1-norm for which Padé(13) reaches double precision.
const THETA13: f64 = 5.371_920_351_148_152;

/// Squarings beyond this are treated as overflow.
const MAX_SQUARINGS: i32 = 1024;

/// Matrix exponential by scaling and squaring with a Padé(13) approximant.
pub fn expm(a: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = a.nrows();
    if n != a.ncols() {
        return Err(Error::DomainError(format!(
            "expm needs a square matrix, got {}x{}",
            n,
            a.ncols()
        )));
    }
    let norm = one_norm(a);
    if !norm.is_finite() {
        return Err(Error::MatrixOverflow(format!("matrix 1-norm is {norm}")));
    }
    if n == 0 || norm == 0.0 {
        return Ok(DMatrix::identity(n, n));
    }
    let squarings = if norm > THETA13 {
        (norm / THETA13).log2().ceil() as i32
    } else {
        0
    };
    if squarings > MAX_SQUARINGS {
        return Err(Error::MatrixOverflow(format!(
            "1-norm {norm:e} needs {squarings} squarings"
        )));
    }
    let scaled = a * 2f64.powi(-squarings);

    let b = &PADE13;
    let ident = DMatrix::<f64>::identity(n, n);
    let a2 = &scaled * &scaled;
    let a4 = &a2 * &a2;
    let a6 = &a4 * &a2;

    let u_inner = &a6 * (b[13] * &a6 + b[11] * &a4 + b[9] * &a2)
        + b[7] * &a6
        + b[5] * &a4
        + b[3] * &a2
        + b[1] * &ident;
    let u = &scaled * u_inner;
    let v = &a6 * (b[12] * &a6 + b[10] * &a4 + b[8] * &a2)
        + b[6] * &a6
        + b[4] * &a4
        + b[2] * &a2
        + b[0] * &ident;

    let numer = &v + &u;
    let denom = &v - &u;
    let mut result = denom
        .lu()
        .solve(&numer)
        .ok_or_else(|| Error::SingularSystem("Padé denominator".into()))?;
    for _ in 0..squarings {
        result = &result * &result;
    }
    if result.iter().any(|v| !v.is_finite()) {
        return Err(Error::MatrixOverflow("non-finite entries after squaring".into()));
    }
    Ok(result)
}

pub fn one_norm(a: &DMatrix<f64>) -> f64 {
    a.column_iter()
        .map(|c| c.iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Solves `x A = b` for a row vector `x`.
pub fn solve_left(a: &DMatrix<f64>, b: &[f64]) -> Result<Vec<f64>> {
    let at = a.transpose();
    let rhs = nalgebra::DVector::from_column_slice(b);
    at.lu()
        .solve(&rhs)
        .map(|v| v.iter().copied().collect())
        .ok_or_else(|| Error::SingularSystem("left solve".into()))
}
