//! Matrix exponential and its time integral.

use super::matrix::Matrix;
use crate::error::Error;

const SERIES_ORDER: usize = 13;
const SQUARING_THRESHOLD: f64 = 0.5;

/// e^{At} by scaling and squaring around a fixed-order Taylor core.
///
/// The argument is scaled until its infinity norm is at most 0.5, so the
/// order-13 series core is accurate to well below 1e-12 relative error.
pub fn expm(a: &Matrix, t: f64) -> Result<Matrix, Error> {
    if !a.is_square() {
        return Err(Error::Dimension(format!("expm of {}x{} matrix", a.rows(), a.cols())));
    }
    if t < 0.0 {
        return Err(Error::Contract(format!("expm needs t >= 0, got {t}")));
    }
    let at = a.scale(t);
    let norm = at.norm_inf();
    let squarings = if norm <= SQUARING_THRESHOLD {
        0
    } else {
        (norm / SQUARING_THRESHOLD).log2().ceil() as u32
    };
    let scaled = at.scale(0.5f64.powi(squarings as i32));
    let mut result = series_core(&scaled);
    for _ in 0..squarings {
        result = &result * &result;
    }
    Ok(result)
}

fn series_core(m: &Matrix) -> Matrix {
    let n = m.rows();
    let mut sum = Matrix::identity(n);
    let mut term = Matrix::identity(n);
    for k in 1..=SERIES_ORDER {
        term = &(&term * m) * &Matrix::identity(n).scale(1.0 / k as f64);
        sum = &sum + &term;
    }
    sum
}

/// ∫_0^t e^{Ar} dr via the exponential of the block matrix [[A, I], [0, 0]].
///
/// Valid for singular A, unlike the A^{-1}(e^{At}-I) closed form.
pub fn int_expm(a: &Matrix, t: f64) -> Result<Matrix, Error> {
    if !a.is_square() {
        return Err(Error::Dimension(format!(
            "int_expm of {}x{} matrix",
            a.rows(),
            a.cols()
        )));
    }
    if t < 0.0 {
        return Err(Error::Contract(format!("int_expm needs t >= 0, got {t}")));
    }
    let n = a.rows();
    let mut aug = Matrix::zeros(2 * n, 2 * n);
    for i in 0..n {
        for j in 0..n {
            aug.set(i, j, a.get(i, j));
        }
        aug.set(i, n + i, 1.0);
    }
    let e = expm(&aug, t)?;
    let mut out = Matrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            out.set(i, j, e.get(i, n + j));
        }
    }
    Ok(out)
}
