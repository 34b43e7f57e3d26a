//! Symmetric eigenvalue extremes via cyclic Jacobi rotations.

use super::matrix::{Matrix, Vector};
use crate::error::Error;

const SYMMETRY_TOL: f64 = 1e-9;
const OFF_DIAG_TOL: f64 = 1e-12;
const MAX_SWEEPS: usize = 100;

/// Extreme eigenvalues of a symmetric matrix plus a unit eigenvector for the
/// largest one. The input is symmetrized as (M + M^T)/2 before iterating;
/// asymmetry beyond 1e-9 is a contract error.
pub fn sym_eig_extremes(m: &Matrix) -> Result<(f64, f64, Vector), Error> {
    if !m.is_square() {
        return Err(Error::Dimension(format!(
            "sym_eig_extremes of {}x{} matrix",
            m.rows(),
            m.cols()
        )));
    }
    if m.asymmetry() > SYMMETRY_TOL {
        return Err(Error::Contract(format!(
            "matrix asymmetry {} exceeds {}",
            m.asymmetry(),
            SYMMETRY_TOL
        )));
    }
    let n = m.rows();
    if n == 0 {
        return Err(Error::Dimension("empty matrix".into()));
    }
    let mut a = m.symmetrize();

    // 2x2 fast path: closed-form rotation, used heavily by the bound search.
    if n == 2 {
        let (lo, hi, v) = eig2(&a);
        return Ok((lo, hi, v));
    }

    let mut vecs = Matrix::identity(n);
    for _ in 0..MAX_SWEEPS {
        if off_diag_norm(&a) <= OFF_DIAG_TOL {
            break;
        }
        for p in 0..n - 1 {
            for q in p + 1..n {
                let apq = a.get(p, q);
                if apq.abs() <= OFF_DIAG_TOL / (n as f64) {
                    continue;
                }
                let (c, s) = rotation(a.get(p, p), a.get(q, q), apq);
                apply_rotation(&mut a, &mut vecs, p, q, c, s);
            }
        }
    }

    let mut lo = a.get(0, 0);
    let mut hi = a.get(0, 0);
    let mut hi_idx = 0;
    for i in 1..n {
        let d = a.get(i, i);
        if d < lo {
            lo = d;
        }
        if d > hi {
            hi = d;
            hi_idx = i;
        }
    }
    let v_max = Vector::new((0..n).map(|i| vecs.get(i, hi_idx)).collect());
    Ok((lo, hi, v_max.normalized().unwrap_or(v_max)))
}

/// λ_max only, without the contract checks (caller guarantees symmetry).
pub fn lambda_max(m: &Matrix) -> f64 {
    if m.rows() == 2 {
        let (_, hi, _) = eig2(m);
        return hi;
    }
    sym_eig_extremes(&m.symmetrize()).map(|(_, hi, _)| hi).unwrap_or(f64::NAN)
}

/// λ_min counterpart of [`lambda_max`].
pub fn lambda_min(m: &Matrix) -> f64 {
    if m.rows() == 2 {
        let (lo, _, _) = eig2(m);
        return lo;
    }
    sym_eig_extremes(&m.symmetrize()).map(|(lo, _, _)| lo).unwrap_or(f64::NAN)
}

/// Spectral norm via the eigenvalues of M^T M.
pub fn operator_norm_2(m: &Matrix) -> f64 {
    let gram = &m.transpose() * m;
    lambda_max(&gram.symmetrize()).max(0.0).sqrt()
}

fn eig2(a: &Matrix) -> (f64, f64, Vector) {
    let (p, q, r) = (a.get(0, 0), 0.5 * (a.get(0, 1) + a.get(1, 0)), a.get(1, 1));
    let mean = 0.5 * (p + r);
    let disc = (0.5 * (p - r)).hypot(q);
    let lo = mean - disc;
    let hi = mean + disc;
    // eigenvector for hi: (q, hi - p) or (hi - r, q), whichever is better conditioned
    let v = if q.abs() > 1e-300 {
        Vector::new(vec![q, hi - p])
    } else if p >= r {
        Vector::new(vec![1.0, 0.0])
    } else {
        Vector::new(vec![0.0, 1.0])
    };
    let v = v.normalized().unwrap_or_else(|| Vector::new(vec![1.0, 0.0]));
    (lo, hi, v)
}

fn off_diag_norm(a: &Matrix) -> f64 {
    let n = a.rows();
    let mut acc = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                acc += a.get(i, j) * a.get(i, j);
            }
        }
    }
    acc.sqrt()
}

fn rotation(app: f64, aqq: f64, apq: f64) -> (f64, f64) {
    let theta = (aqq - app) / (2.0 * apq);
    let t = if theta >= 0.0 {
        1.0 / (theta + (1.0 + theta * theta).sqrt())
    } else {
        -1.0 / (-theta + (1.0 + theta * theta).sqrt())
    };
    let c = 1.0 / (1.0 + t * t).sqrt();
    (c, t * c)
}

fn apply_rotation(a: &mut Matrix, vecs: &mut Matrix, p: usize, q: usize, c: f64, s: f64) {
    let n = a.rows();
    for k in 0..n {
        let akp = a.get(k, p);
        let akq = a.get(k, q);
        a.set(k, p, c * akp - s * akq);
        a.set(k, q, s * akp + c * akq);
    }
    for k in 0..n {
        let apk = a.get(p, k);
        let aqk = a.get(q, k);
        a.set(p, k, c * apk - s * aqk);
        a.set(q, k, s * apk + c * aqk);
    }
    for k in 0..n {
        let vkp = vecs.get(k, p);
        let vkq = vecs.get(k, q);
        vecs.set(k, p, c * vkp - s * vkq);
        vecs.set(k, q, s * vkp + c * vkq);
    }
}
