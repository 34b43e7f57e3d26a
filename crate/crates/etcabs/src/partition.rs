//! Isotropic conic covering of the state space: angular subdivision,
//! region representations (quadratic form for n = 2, half-space form in
//! general), and point-to-region lookup.

use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::linalg::{Matrix, Vector};

const MEMBERSHIP_TOL: f64 = 1e-9;

/// One convex polyhedral cone of the covering.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ConicRegion {
    pub index: usize,
    /// Bounds per generalized spherical angle, radians.
    pub angular_box: Vec<(f64, f64)>,
    /// Unit extreme rays.
    pub rays: Vec<Vector>,
    /// Half-space normals: x is in the cone iff E x >= 0.
    pub e: Matrix,
    /// Quadratic form with x^T Q x >= 0 on cone union -cone (n = 2 only).
    pub q: Option<Matrix>,
    /// Index of the antipodal mirror region.
    pub mirror: usize,
}

impl ConicRegion {
    pub fn accepts(&self, x: &Vector, tol: f64) -> bool {
        let scale = x.norm().max(1.0);
        (0..self.e.rows()).all(|i| self.e.row(i).dot(x) >= -tol * scale)
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Partition {
    pub n: usize,
    pub m_bar: usize,
    pub regions: Vec<ConicRegion>,
    /// The m_bar^(n-1) regions covering the chosen half of the directions;
    /// each is paired with its antipodal mirror.
    pub half_indices: Vec<usize>,
}

impl Partition {
    pub fn len(&self) -> usize {
        self.regions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.regions.is_empty()
    }

    /// Index of a region containing x; boundary ties go to the lowest index.
    pub fn locate_region(&self, x: &Vector) -> Result<usize, Error> {
        if x.norm() == 0.0 {
            return Err(Error::UndefinedPoint("the origin belongs to every cone".into()));
        }
        for region in &self.regions {
            if region.accepts(x, MEMBERSHIP_TOL) {
                return Ok(region.index);
            }
        }
        // Coverage holds by construction; reaching this point means x sits on
        // a boundary just past the tolerance. Take the least-violating region.
        let best = self
            .regions
            .iter()
            .map(|r| {
                let slack = (0..r.e.rows())
                    .map(|i| r.e.row(i).dot(x))
                    .fold(f64::INFINITY, f64::min);
                (r.index, slack)
            })
            .max_by(|a, b| a.1.partial_cmp(&b.1).unwrap())
            .map(|(i, _)| i)
            .ok_or_else(|| Error::UndefinedPoint("empty partition".into()))?;
        Ok(best)
    }
}

/// Equidistant isotropic covering with q = 2 m_bar^(n-1) conic regions.
pub fn isotropic_cover(n: usize, m_bar: usize) -> Result<Partition, Error> {
    if n < 2 {
        return Err(Error::Contract("dimension must be at least 2".into()));
    }
    if m_bar < 1 {
        return Err(Error::Contract("m_bar must be at least 1".into()));
    }
    if n > 2 && m_bar < 2 {
        return Err(Error::InvalidSector(
            "n >= 3 needs m_bar >= 2 so every angular cell has width < pi".into(),
        ));
    }
    let angles = n - 1;
    let half_count = m_bar.pow(angles as u32);
    let mut regions = Vec::with_capacity(2 * half_count);

    for cell in 0..half_count {
        let mut rem = cell;
        let mut boxes = Vec::with_capacity(angles);
        for _ in 0..angles {
            let idx = rem % m_bar;
            rem /= m_bar;
            let width = std::f64::consts::PI / m_bar as f64;
            boxes.push((idx as f64 * width, (idx + 1) as f64 * width));
        }
        let rays = corner_rays(&boxes);
        let e = cone_facets(&boxes, &rays)?;
        let q = if n == 2 { Some(sector_quadratic_form(boxes[0])?) } else { None };
        regions.push(ConicRegion {
            index: cell,
            angular_box: boxes,
            rays,
            e,
            q,
            mirror: half_count + cell,
        });
    }

    // Antipodal mirrors: same cones reflected through the origin.
    for cell in 0..half_count {
        let src = regions[cell].clone();
        let mirrored_box = mirror_box(&src.angular_box);
        regions.push(ConicRegion {
            index: half_count + cell,
            angular_box: mirrored_box,
            rays: src.rays.iter().map(|r| r.scale(-1.0)).collect(),
            e: src.e.scale(-1.0),
            q: src.q.clone(),
            mirror: cell,
        });
    }

    Ok(Partition { n, m_bar, regions, half_indices: (0..half_count).collect() })
}

fn mirror_box(boxes: &[(f64, f64)]) -> Vec<(f64, f64)> {
    let angles = boxes.len();
    boxes
        .iter()
        .enumerate()
        .map(|(i, &(lo, hi))| {
            if i + 1 < angles {
                (std::f64::consts::PI - hi, std::f64::consts::PI - lo)
            } else {
                (lo - std::f64::consts::PI, hi - std::f64::consts::PI)
            }
        })
        .collect()
}

/// Unit vector at the given generalized spherical angles.
pub fn spherical_ray(angles: &[f64]) -> Vector {
    let n = angles.len() + 1;
    let mut out = vec![0.0; n];
    let mut sin_prod = 1.0;
    for (i, &th) in angles.iter().enumerate() {
        out[i] = sin_prod * th.cos();
        sin_prod *= th.sin();
    }
    out[n - 1] = sin_prod;
    Vector::new(out)
}

fn corner_rays(boxes: &[(f64, f64)]) -> Vec<Vector> {
    let angles = boxes.len();
    let mut rays: Vec<Vector> = Vec::new();
    for mask in 0..(1usize << angles) {
        let corner: Vec<f64> = boxes
            .iter()
            .enumerate()
            .map(|(i, &(lo, hi))| if mask & (1 << i) != 0 { hi } else { lo })
            .collect();
        let ray = spherical_ray(&corner);
        let dup = rays.iter().any(|r| r.sub(&ray).norm() < 1e-12);
        if !dup {
            rays.push(ray);
        }
    }
    rays
}

/// Inward facet normals of the polyhedral cone spanned by the cell's corner
/// rays. For n = 2 the sector normals are written down directly; in higher
/// dimensions facets are enumerated over (n-1)-subsets of rays.
fn cone_facets(boxes: &[(f64, f64)], rays: &[Vector]) -> Result<Matrix, Error> {
    let n = boxes.len() + 1;
    if n == 2 {
        return Ok(sector_halfspaces(boxes[0]));
    }
    let mut normals: Vec<Vector> = Vec::new();
    let subsets = subsets_of_size(rays.len(), n - 1);
    for subset in subsets {
        let span: Vec<&Vector> = subset.iter().map(|&i| &rays[i]).collect();
        let Some(normal) = null_direction(&span, n) else { continue };
        for cand in [normal.clone(), normal.scale(-1.0)] {
            if rays.iter().all(|r| cand.dot(r) >= -1e-10) {
                // keep facets only: some ray must be strictly inside
                if rays.iter().any(|r| cand.dot(r) > 1e-10) {
                    let dup = normals.iter().any(|m| m.sub(&cand).norm() < 1e-9);
                    if !dup {
                        normals.push(cand);
                    }
                }
                break;
            }
        }
    }
    if normals.is_empty() {
        return Err(Error::InvalidSector("cell spans no pointed cone".into()));
    }
    Matrix::from_rows(&normals.iter().map(|v| v.data().to_vec()).collect::<Vec<_>>())
}

fn subsets_of_size(n: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut current = Vec::new();
    fn rec(start: usize, n: usize, k: usize, current: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if current.len() == k {
            out.push(current.clone());
            return;
        }
        for i in start..n {
            current.push(i);
            rec(i + 1, n, k, current, out);
            current.pop();
        }
    }
    rec(0, n, k, &mut current, &mut out);
    out
}

/// A unit vector orthogonal to all given vectors, if the orthogonal
/// complement is one-dimensional.
fn null_direction(span: &[&Vector], n: usize) -> Option<Vector> {
    let mut rows: Vec<Vec<f64>> = span.iter().map(|v| v.data().to_vec()).collect();
    let m = rows.len();
    let mut pivot_cols = Vec::new();
    let mut r = 0;
    for c in 0..n {
        let p = (r..m).max_by(|&a, &b| rows[a][c].abs().partial_cmp(&rows[b][c].abs()).unwrap())?;
        if rows[p][c].abs() < 1e-12 {
            continue;
        }
        rows.swap(r, p);
        let pivot = rows[r][c];
        for v in rows[r].iter_mut() {
            *v /= pivot;
        }
        for i in 0..m {
            if i != r && rows[i][c].abs() > 0.0 {
                let f = rows[i][c];
                for cc in 0..n {
                    rows[i][cc] -= f * rows[r][cc];
                }
            }
        }
        pivot_cols.push(c);
        r += 1;
        if r == m {
            break;
        }
    }
    if r != n - 1 {
        return None; // rank deficient: not a facet-defining subset
    }
    let free_col = (0..n).find(|c| !pivot_cols.contains(c))?;
    let mut v = vec![0.0; n];
    v[free_col] = 1.0;
    for (row_idx, &pc) in pivot_cols.iter().enumerate() {
        v[pc] = -rows[row_idx][free_col];
    }
    Vector::new(v).normalized()
}

fn sector_halfspaces(sector: (f64, f64)) -> Matrix {
    let (a, b) = sector;
    let opening = b - a;
    let inward_a = vec![-a.sin(), a.cos()];
    if (opening - std::f64::consts::PI).abs() < 1e-12 {
        // half-plane: a single boundary line
        return Matrix::from_rows(&[inward_a]).unwrap();
    }
    let inward_b = vec![b.sin(), -b.cos()];
    Matrix::from_rows(&[inward_a, inward_b]).unwrap()
}

/// Q = (n_a n_b^T + n_b n_a^T) / 2 from the inward boundary normals of a
/// 2-D sector; x^T Q x >= 0 exactly on cone union -cone.
pub fn region_quadratic_form(ray_a: &Vector, ray_b: &Vector) -> Result<Matrix, Error> {
    if ray_a.dim() != 2 || ray_b.dim() != 2 {
        return Err(Error::Dimension("quadratic form is defined for n = 2".into()));
    }
    let a = ray_a.normalized().ok_or_else(|| Error::Contract("zero ray".into()))?;
    let b = ray_b.normalized().ok_or_else(|| Error::Contract("zero ray".into()))?;
    let cross = a[0] * b[1] - a[1] * b[0];
    let dot = a.dot(&b);
    let opening = cross.atan2(dot);
    if opening <= 0.0 || opening >= std::f64::consts::PI - 1e-12 {
        return Err(Error::InvalidSector(format!(
            "sector opening {opening} not in (0, pi)"
        )));
    }
    // inward normals: rotate ray_a by +90 degrees, ray_b by -90 degrees
    let na = Vector::new(vec![-a[1], a[0]]);
    let nb = Vector::new(vec![b[1], -b[0]]);
    let mut q = Matrix::zeros(2, 2);
    for i in 0..2 {
        for j in 0..2 {
            q.set(i, j, 0.5 * (na[i] * nb[j] + nb[i] * na[j]));
        }
    }
    Ok(q)
}

fn sector_quadratic_form(sector: (f64, f64)) -> Result<Matrix, Error> {
    let (a, b) = sector;
    if (b - a - std::f64::consts::PI).abs() < 1e-12 {
        // opening of exactly pi: the cone and its mirror tile the plane,
        // so the zero form is the valid (degenerate) representation
        return Ok(Matrix::zeros(2, 2));
    }
    region_quadratic_form(&spherical_ray(&[a]), &spherical_ray(&[b]))
}

/// Half-space form of an angular box cell; one row per active bound.
pub fn region_halfspace_form(angular_box: &[(f64, f64)]) -> Result<Matrix, Error> {
    for &(lo, hi) in angular_box {
        if hi - lo >= std::f64::consts::PI - 1e-12 {
            return Err(Error::InvalidSector(format!(
                "angular interval [{lo}, {hi}] has width >= pi"
            )));
        }
        if hi <= lo {
            return Err(Error::InvalidSector("empty angular interval".into()));
        }
    }
    let rays = corner_rays(angular_box);
    cone_facets(angular_box, &rays)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_unit(rng: &mut ChaCha8Rng, n: usize) -> Vector {
        loop {
            let v = Vector::new((0..n).map(|_| rng.gen_range(-1.0..1.0f64)).collect());
            if v.norm() > 0.1 {
                return v.normalized().unwrap();
            }
        }
    }

    #[test]
    fn region_counts() {
        assert_eq!(isotropic_cover(2, 10).unwrap().len(), 20);
        assert_eq!(isotropic_cover(2, 1).unwrap().len(), 2);
        assert_eq!(isotropic_cover(3, 4).unwrap().len(), 32);
    }

    #[test]
    fn m_bar_one_covers_all_directions() {
        let part = isotropic_cover(2, 1).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..200 {
            let x = random_unit(&mut rng, 2);
            assert!(part.regions.iter().any(|r| r.accepts(&x, 1e-9)));
        }
    }

    #[test]
    fn coverage_by_sampling() {
        for (n, m_bar, samples) in [(2, 10, 100_000), (3, 4, 1_000)] {
            let part = isotropic_cover(n, m_bar).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(2);
            for _ in 0..samples {
                let x = random_unit(&mut rng, n);
                assert!(
                    part.regions.iter().any(|r| r.accepts(&x, 1e-9)),
                    "uncovered direction {:?}",
                    x
                );
            }
        }
    }

    #[test]
    fn rays_satisfy_own_halfspace_form() {
        let part = isotropic_cover(3, 4).unwrap();
        for region in &part.regions {
            for ray in &region.rays {
                let mut active = 0;
                for i in 0..region.e.rows() {
                    let s = region.e.row(i).dot(ray);
                    assert!(s >= -1e-9);
                    if s.abs() < 1e-9 {
                        active += 1;
                    }
                }
                assert!(active >= 1, "corner ray should sit on a facet");
            }
            assert!(region.e.rows() <= 2 * 3 - 2);
        }
    }

    #[test]
    fn quadrant_halfspace_form() {
        let e = region_halfspace_form(&[(0.0, std::f64::consts::FRAC_PI_2)]).unwrap();
        assert_eq!(e.rows(), 2);
        let inside = Vector::new(vec![1.0, 1.0]);
        for i in 0..2 {
            assert!(e.row(i).dot(&inside) > 0.0);
        }
    }

    #[test]
    fn quadrant_quadratic_form_sign_pattern() {
        let q = region_quadratic_form(
            &Vector::new(vec![1.0, 0.0]),
            &Vector::new(vec![0.0, 1.0]),
        )
        .unwrap();
        assert!(q.quad_form(&Vector::new(vec![1.0, 1.0])) > 0.0);
        assert!(q.quad_form(&Vector::new(vec![1.0, -1.0])) < 0.0);
        // boundary rays sit on the zero set
        assert!(q.quad_form(&Vector::new(vec![1.0, 0.0])).abs() < 1e-12);
        assert!(q.quad_form(&Vector::new(vec![0.0, 1.0])).abs() < 1e-12);
    }

    #[test]
    fn quadratic_form_rejects_wide_sector() {
        let r = region_quadratic_form(
            &Vector::new(vec![1.0, 0.0]),
            &Vector::new(vec![-1.0, 0.0]),
        );
        assert!(matches!(r, Err(Error::InvalidSector(_))));
    }

    #[test]
    fn quadratic_form_agrees_with_angle_membership() {
        let a = 0.3f64;
        let b = 1.1f64;
        let q = region_quadratic_form(&spherical_ray(&[a]), &spherical_ray(&[b])).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..10_000 {
            let th: f64 = rng.gen_range(-std::f64::consts::PI..std::f64::consts::PI);
            let x = Vector::new(vec![th.cos(), th.sin()]);
            let in_cone = (th >= a - 1e-9 && th <= b + 1e-9)
                || (th + std::f64::consts::PI >= a - 1e-9
                    && th + std::f64::consts::PI <= b + 1e-9)
                || (th - std::f64::consts::PI >= a - 1e-9
                    && th - std::f64::consts::PI <= b + 1e-9);
            let val = q.quad_form(&x);
            if val > 1e-9 {
                assert!(in_cone, "theta={th}");
            } else if val < -1e-9 {
                assert!(!in_cone, "theta={th}");
            }
        }
    }

    #[test]
    fn q_and_e_forms_agree_modulo_antipodes() {
        let part = isotropic_cover(2, 6).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for _ in 0..5_000 {
            let x = random_unit(&mut rng, 2);
            for region in &part.regions {
                let q_ok = region.q.as_ref().unwrap().quad_form(&x) >= -1e-9;
                let e_ok = region.accepts(&x, 1e-9)
                    || region.accepts(&x.scale(-1.0), 1e-9);
                if region.q.as_ref().unwrap().quad_form(&x).abs() > 1e-7 {
                    assert_eq!(q_ok, e_ok);
                }
            }
        }
    }

    /// Conic-combination membership, independent of the half-space build:
    /// x is in cone(rays) iff some simplicial subset yields nonnegative
    /// coefficients.
    fn conic_member(rays: &[Vector], x: &Vector) -> bool {
        let n = x.dim();
        for subset in subsets_of_size(rays.len(), n) {
            let cols: Vec<&Vector> = subset.iter().map(|&i| &rays[i]).collect();
            if let Some(coeffs) = solve_square(&cols, x) {
                if coeffs.iter().all(|&c| c >= -1e-9) {
                    return true;
                }
            }
        }
        false
    }

    fn solve_square(cols: &[&Vector], rhs: &Vector) -> Option<Vec<f64>> {
        let n = rhs.dim();
        let mut a: Vec<Vec<f64>> = (0..n)
            .map(|i| {
                let mut row: Vec<f64> = cols.iter().map(|c| c[i]).collect();
                row.push(rhs[i]);
                row
            })
            .collect();
        for c in 0..n {
            let p = (c..n).max_by(|&i, &j| a[i][c].abs().partial_cmp(&a[j][c].abs()).unwrap())?;
            if a[p][c].abs() < 1e-12 {
                return None;
            }
            a.swap(c, p);
            for i in 0..n {
                if i != c {
                    let f = a[i][c] / a[c][c];
                    for k in c..=n {
                        a[i][k] -= f * a[c][k];
                    }
                }
            }
        }
        Some((0..n).map(|i| a[i][n] / a[i][i]).collect())
    }

    #[test]
    fn halfspace_form_agrees_with_cone_membership_3d() {
        let boxes = vec![(0.5, 1.1), (1.8, 2.3)];
        let e = region_halfspace_form(&boxes).unwrap();
        let rays = corner_rays(&boxes);
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let mut inside_seen = 0;
        for _ in 0..10_000 {
            let x = random_unit(&mut rng, 3);
            let e_ok = (0..e.rows()).all(|i| e.row(i).dot(&x) >= -1e-9);
            let cone_ok = conic_member(&rays, &x);
            // skip points within numeric reach of a facet
            let min_abs = (0..e.rows())
                .map(|i| e.row(i).dot(&x).abs())
                .fold(f64::INFINITY, f64::min);
            if min_abs > 1e-6 {
                assert_eq!(e_ok, cone_ok);
            }
            if e_ok {
                inside_seen += 1;
            }
        }
        assert!(inside_seen > 0);
    }

    #[test]
    fn locate_region_tie_breaks_to_lowest_index() {
        let part = isotropic_cover(2, 10).unwrap();
        // the boundary ray between regions 2 and 3
        let th = 3.0 * std::f64::consts::PI / 10.0;
        let x = Vector::new(vec![th.cos(), th.sin()]);
        assert_eq!(part.locate_region(&x).unwrap(), 2);
    }

    #[test]
    fn locate_region_antipodal_pairs() {
        let part = isotropic_cover(2, 10).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        for _ in 0..1_000 {
            let x = random_unit(&mut rng, 2);
            let s = part.locate_region(&x).unwrap();
            let s_neg = part.locate_region(&x.scale(-1.0)).unwrap();
            assert_eq!(part.regions[s].mirror, s_neg);
        }
    }

    #[test]
    fn locate_region_rejects_origin() {
        let part = isotropic_cover(2, 4).unwrap();
        assert!(part.locate_region(&Vector::zeros(2)).is_err());
    }

    #[test]
    fn located_region_accepts_the_point() {
        let part = isotropic_cover(2, 10).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for _ in 0..10_000 {
            let x = random_unit(&mut rng, 2);
            let s = part.locate_region(&x).unwrap();
            assert!(part.regions[s].accepts(&x, 1e-9));
        }
    }

    #[test]
    fn refinement_nests_into_parent_regions() {
        let coarse = isotropic_cover(2, 10).unwrap();
        let fine = isotropic_cover(2, 20).unwrap();
        for region in &fine.regions {
            let mut parents = 0;
            for parent in &coarse.regions {
                if region.rays.iter().all(|r| parent.accepts(r, 1e-9)) {
                    parents += 1;
                }
            }
            assert_eq!(parents, 1, "fine region {} has {} parents", region.index, parents);
        }
    }
}
