//! Convex hulls in H-representation for the flow-pipe polytopes.
//! Exact in 2 and 3 dimensions; higher dimensions fall back to a bounding
//! box and say so in the result.

use super::matrix::{Matrix, Vector};
use crate::error::Error;

const CONTAIN_TOL: f64 = 1e-9;

#[derive(Clone, Debug)]
pub struct Hull {
    /// Outward half-space normals, one per row.
    pub c: Matrix,
    pub d: Vector,
    /// True when the exact hull was replaced by an axis-aligned bounding box.
    pub bounding_box_fallback: bool,
}

impl Hull {
    pub fn contains(&self, x: &Vector, tol: f64) -> bool {
        (0..self.c.rows()).all(|i| self.c.row(i).dot(x) <= self.d[i] + tol)
    }
}

pub fn convex_hull(points: &[Vector]) -> Result<Hull, Error> {
    if points.is_empty() {
        return Err(Error::DegenerateHull("no points".into()));
    }
    let n = points[0].dim();
    if points.iter().any(|p| p.dim() != n) {
        return Err(Error::Dimension("points of mixed dimension".into()));
    }
    if points.len() < n + 1 {
        return Err(Error::DegenerateHull(format!(
            "need at least {} points in dimension {}",
            n + 1,
            n
        )));
    }
    if affine_rank(points) < n {
        return Err(Error::DegenerateHull(
            "points are affinely dependent; bloat the cloud first".into(),
        ));
    }
    match n {
        2 => hull_2d(points),
        3 => hull_3d(points),
        _ => bounding_box(points),
    }
}

fn affine_rank(points: &[Vector]) -> usize {
    let n = points[0].dim();
    let base = &points[0];
    let mut rows: Vec<Vec<f64>> = points[1..]
        .iter()
        .map(|p| p.sub(base).data().to_vec())
        .collect();
    // Gaussian elimination with partial pivoting.
    let mut rank = 0;
    for col in 0..n {
        let pivot = (rank..rows.len())
            .max_by(|&a, &b| rows[a][col].abs().partial_cmp(&rows[b][col].abs()).unwrap());
        let Some(p) = pivot else { break };
        if rows[p][col].abs() < 1e-12 {
            continue;
        }
        rows.swap(rank, p);
        for r in rank + 1..rows.len() {
            let f = rows[r][col] / rows[rank][col];
            for c in col..n {
                rows[r][c] -= f * rows[rank][c];
            }
        }
        rank += 1;
        if rank == rows.len() {
            break;
        }
    }
    rank
}

fn hull_2d(points: &[Vector]) -> Result<Hull, Error> {
    // Andrew's monotone chain; vertices come out counterclockwise.
    let mut pts: Vec<(f64, f64)> = points.iter().map(|p| (p[0], p[1])).collect();
    pts.sort_by(|a, b| a.partial_cmp(b).unwrap());
    pts.dedup_by(|a, b| (a.0 - b.0).abs() < 1e-14 && (a.1 - b.1).abs() < 1e-14);
    let cross = |o: (f64, f64), a: (f64, f64), b: (f64, f64)| {
        (a.0 - o.0) * (b.1 - o.1) - (a.1 - o.1) * (b.0 - o.0)
    };
    let mut lower: Vec<(f64, f64)> = Vec::new();
    for &p in &pts {
        while lower.len() >= 2 && cross(lower[lower.len() - 2], lower[lower.len() - 1], p) <= 0.0 {
            lower.pop();
        }
        lower.push(p);
    }
    let mut upper: Vec<(f64, f64)> = Vec::new();
    for &p in pts.iter().rev() {
        while upper.len() >= 2 && cross(upper[upper.len() - 2], upper[upper.len() - 1], p) <= 0.0 {
            upper.pop();
        }
        upper.push(p);
    }
    lower.pop();
    upper.pop();
    let verts: Vec<(f64, f64)> = lower.into_iter().chain(upper).collect();
    if verts.len() < 3 {
        return Err(Error::DegenerateHull("collinear 2-D point set".into()));
    }
    let mut rows = Vec::new();
    let mut offs = Vec::new();
    for i in 0..verts.len() {
        let p = verts[i];
        let q = verts[(i + 1) % verts.len()];
        let (dx, dy) = (q.0 - p.0, q.1 - p.1);
        let len = dx.hypot(dy);
        // outward normal of a CCW edge
        let normal = vec![dy / len, -dx / len];
        offs.push(normal[0] * p.0 + normal[1] * p.1);
        rows.push(normal);
    }
    finish(points, rows, offs, false)
}

fn hull_3d(points: &[Vector]) -> Result<Hull, Error> {
    // Brute-force facet enumeration over point triples; the flow-pipe
    // clouds this serves stay well under a hundred points.
    let n = points.len();
    let centroid = {
        let mut c = Vector::zeros(3);
        for p in points {
            c = c.add(p);
        }
        c.scale(1.0 / n as f64)
    };
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut offs: Vec<f64> = Vec::new();
    let scale = points
        .iter()
        .map(|p| p.sub(&centroid).norm())
        .fold(0.0, f64::max)
        .max(1e-12);
    let side_tol = 1e-9 * scale;
    for i in 0..n {
        for j in i + 1..n {
            for k in j + 1..n {
                let u = points[j].sub(&points[i]);
                let v = points[k].sub(&points[i]);
                let mut nrm = Vector::new(vec![
                    u[1] * v[2] - u[2] * v[1],
                    u[2] * v[0] - u[0] * v[2],
                    u[0] * v[1] - u[1] * v[0],
                ]);
                let len = nrm.norm();
                if len < 1e-12 * scale * scale {
                    continue;
                }
                nrm = nrm.scale(1.0 / len);
                let off = nrm.dot(&points[i]);
                let mut lo = 0.0f64;
                let mut hi = 0.0f64;
                for p in points {
                    let s = nrm.dot(p) - off;
                    lo = lo.min(s);
                    hi = hi.max(s);
                }
                let (nrm, off) = if hi <= side_tol {
                    (nrm, off)
                } else if lo >= -side_tol {
                    (nrm.scale(-1.0), -off)
                } else {
                    continue;
                };
                // dedup near-identical facets
                let dup = rows.iter().zip(&offs).any(|(r, &o)| {
                    (r[0] - nrm[0]).abs() < 1e-7
                        && (r[1] - nrm[1]).abs() < 1e-7
                        && (r[2] - nrm[2]).abs() < 1e-7
                        && (o - off).abs() < 1e-7 * scale.max(1.0)
                });
                if !dup {
                    offs.push(off);
                    rows.push(nrm.data().to_vec());
                }
            }
        }
    }
    if rows.len() < 4 {
        return Err(Error::DegenerateHull("3-D point set is flat".into()));
    }
    finish(points, rows, offs, false)
}

fn bounding_box(points: &[Vector]) -> Result<Hull, Error> {
    let n = points[0].dim();
    let mut rows = Vec::new();
    let mut offs = Vec::new();
    for axis in 0..n {
        let lo = points.iter().map(|p| p[axis]).fold(f64::INFINITY, f64::min);
        let hi = points.iter().map(|p| p[axis]).fold(f64::NEG_INFINITY, f64::max);
        let mut up = vec![0.0; n];
        up[axis] = 1.0;
        rows.push(up.clone());
        offs.push(hi);
        up[axis] = -1.0;
        rows.push(up);
        offs.push(-lo);
    }
    finish(points, rows, offs, true)
}

fn finish(
    points: &[Vector],
    rows: Vec<Vec<f64>>,
    offs: Vec<f64>,
    fallback: bool,
) -> Result<Hull, Error> {
    let hull = Hull {
        c: Matrix::from_rows(&rows)?,
        d: Vector::new(offs),
        bounding_box_fallback: fallback,
    };
    for p in points {
        if !hull.contains(p, CONTAIN_TOL) {
            return Err(Error::DegenerateHull(
                "constructed hull fails to contain an input point".into(),
            ));
        }
    }
    Ok(hull)
}
