//! Certified regional inter-sample bounds. Builds the convex-embedding
//! tables (Taylor blocks of the triggering matrix over time subintervals
//! plus remainder constants), then certifies per-region lower and upper
//! bounds through S-procedure feasibility tests driven by bisection.

use std::collections::HashMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::linalg::{int_expm, lambda_max, lambda_min, Matrix};
use crate::partition::{ConicRegion, Partition};
use crate::plant::Plant;

const FEAS_TOL: f64 = 1e-9;
const BISECT_ITERS: usize = 30;

#[derive(Clone, Copy, Debug)]
pub struct BoundsOptions {
    /// Grid points per time cell when evaluating the remainder constants.
    pub grid_per_cell: usize,
    /// Inflation factor applied to the gridded remainder extrema.
    pub nu_safety: f64,
    /// Cap on the doublings used to bracket the scalar multiplier.
    pub eps_max_doubling_cap: usize,
    /// Iteration budget of the projected-subgradient multiplier search (n >= 3).
    pub subgradient_iters: usize,
}

impl Default for BoundsOptions {
    fn default() -> Self {
        BoundsOptions {
            grid_per_cell: 16,
            nu_safety: 1.5,
            eps_max_doubling_cap: 60,
            subgradient_iters: 500,
        }
    }
}

/// Per-subinterval Taylor blocks and remainder constants of the embedding.
#[derive(Clone, Debug)]
pub struct EmbeddingTables {
    pub sigma_bar: f64,
    pub l: usize,
    pub n_conv: usize,
    /// taylor_blocks[j][k] is the coefficient of sigma'^k on cell j.
    pub taylor_blocks: Vec<Vec<Matrix>>,
    pub m_tables: Vec<Matrix>,
    pub n_tables: Vec<Matrix>,
    pub pi1_tables: Vec<Matrix>,
    pub pi2_tables: Vec<Matrix>,
    /// Remainder constant added for lower-bound certificates (>= sup of the
    /// remainder's largest eigenvalue).
    pub nu_lower: f64,
    /// Remainder constant for upper-bound certificates (<= inf of the
    /// remainder's smallest eigenvalue).
    pub nu_upper: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub enum Multiplier {
    Scalar(f64),
    Matrix(Matrix),
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct VertexCertificate {
    pub i: usize,
    pub j: usize,
    pub multiplier: Multiplier,
    /// Achieved extreme-eigenvalue margin of the certified LMI (<= tolerance).
    pub margin: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RegionalBounds {
    pub region: usize,
    pub tau_lo: f64,
    pub tau_hi: f64,
    /// The upper search hit sigma_bar without certifying; enlarge sigma_bar.
    pub saturated: bool,
    pub lower_certificates: Vec<VertexCertificate>,
    pub upper_certificates: Vec<VertexCertificate>,
}

impl EmbeddingTables {
    pub fn cell_width(&self) -> f64 {
        self.sigma_bar / self.l as f64
    }

    /// Truncated Taylor sum of Phi on cell r at local offset sigma'.
    pub fn phi_tilde(&self, r: usize, sigma_prime: f64) -> Matrix {
        let blocks = &self.taylor_blocks[r];
        let n = blocks[0].rows();
        let mut sum = Matrix::zeros(n, n);
        let mut power = 1.0;
        for block in blocks.iter() {
            sum = &sum + &block.scale(power);
            power *= sigma_prime;
        }
        sum
    }
}

/// Build the embedding tables for l subdivisions of [0, sigma_bar] and a
/// polytope of order n_conv, with remainder constants evaluated on a
/// grid_per_cell grid and inflated by the configured safety factor.
pub fn build_embedding(
    plant: &Plant,
    sigma_bar: f64,
    l: usize,
    n_conv: usize,
    opts: &BoundsOptions,
) -> Result<EmbeddingTables, Error> {
    if l < 1 || n_conv < 1 {
        return Err(Error::Contract("l and n_conv must be at least 1".into()));
    }
    if sigma_bar <= 0.0 {
        return Err(Error::Contract("sigma_bar must be positive".into()));
    }
    if opts.grid_per_cell < 2 {
        return Err(Error::Contract("grid_per_cell must be at least 2".into()));
    }
    let n = plant.dim();
    let a = &plant.a;
    let cl = plant.closed_loop();
    let alpha = plant.alpha;
    let eye = Matrix::identity(n);
    let cell = sigma_bar / l as f64;

    // A^{k-1} / k! for k = 1..n_conv, shared across cells.
    let mut pow_over_fact: Vec<Matrix> = Vec::with_capacity(n_conv);
    let mut current = eye.clone(); // A^0
    let mut fact = 1.0f64;
    for k in 1..=n_conv {
        fact *= k as f64;
        pow_over_fact.push(current.scale(1.0 / fact));
        current = &current * a;
    }

    let mut m_tables = Vec::with_capacity(l);
    let mut n_tables = Vec::with_capacity(l);
    let mut pi1_tables = Vec::with_capacity(l);
    let mut pi2_tables = Vec::with_capacity(l);
    let mut taylor_blocks = Vec::with_capacity(l);

    for j in 0..l {
        let m_j = int_expm(a, j as f64 * cell)?;
        let n_j = (&(a * &m_j) + &eye).clone();
        let pi1 = &eye + &(&m_j * &cl);
        let pi2 = &n_j * &cl;
        let pi1_t = pi1.transpose();
        let pi2_t = pi2.transpose();
        let one_minus_alpha = 1.0 - alpha;

        let mut blocks = Vec::with_capacity(n_conv + 1);
        // L_0 = I - Pi1 - Pi1^T + (1 - alpha) Pi1^T Pi1
        let l0 = &(&(&eye - &pi1) - &pi1_t) + &(&pi1_t * &pi1).scale(one_minus_alpha);
        blocks.push(l0.symmetrize());
        // L_1 = [(1-a)Pi1^T - I] Pi2 + Pi2^T [(1-a)Pi1 - I]
        let left = &pi1_t.scale(one_minus_alpha) - &eye;
        let right = &pi1.scale(one_minus_alpha) - &eye;
        let l1 = &(&left * &pi2) + &(&pi2_t * &right);
        blocks.push(l1.symmetrize());
        for k in 2..=n_conv {
            // L_k = [(1-a)Pi1^T - I] (A^{k-1}/k!) Pi2
            //     + Pi2^T ((A^{k-1})^T/k!) [(1-a)Pi1 - I]
            //     + (1-a) Pi2^T (sum_{i=1}^{k-1} (A^{i-1})^T/i! A^{k-i-1}/(k-i)!) Pi2
            let ak = &pow_over_fact[k - 1];
            let first = &(&left * ak) * &pi2;
            let second = &(&pi2_t * &ak.transpose()) * &right;
            let mut inner = Matrix::zeros(n, n);
            for i in 1..=k - 1 {
                inner = &inner + &(&pow_over_fact[i - 1].transpose() * &pow_over_fact[k - i - 1]);
            }
            let third = (&(&pi2_t * &inner) * &pi2).scale(one_minus_alpha);
            let lk = &(&first + &second) + &third;
            blocks.push(lk.symmetrize());
        }

        m_tables.push(m_j);
        n_tables.push(n_j);
        pi1_tables.push(pi1);
        pi2_tables.push(pi2);
        taylor_blocks.push(blocks);
    }

    let mut tab = EmbeddingTables {
        sigma_bar,
        l,
        n_conv,
        taylor_blocks,
        m_tables,
        n_tables,
        pi1_tables,
        pi2_tables,
        nu_lower: 0.0,
        nu_upper: 0.0,
    };

    // Remainder extrema on a finite grid, inflated conservatively.
    let mut worst_max = f64::NEG_INFINITY;
    let mut worst_min = f64::INFINITY;
    for r in 0..l {
        let base = r as f64 * cell;
        for g in 0..opts.grid_per_cell {
            let sigma_prime = cell * g as f64 / (opts.grid_per_cell - 1) as f64;
            let phi = plant.phi_at(base + sigma_prime)?;
            let remainder = (&phi - &tab.phi_tilde(r, sigma_prime)).symmetrize();
            worst_max = worst_max.max(lambda_max(&remainder));
            worst_min = worst_min.min(lambda_min(&remainder));
        }
    }
    let pad = opts.nu_safety - 1.0;
    tab.nu_lower = worst_max + pad * worst_max.abs();
    tab.nu_upper = worst_min - pad * worst_min.abs();
    Ok(tab)
}

/// Chi exponent base per cell for the lower family at time limit tau_lo:
/// full cell width on interior cells, the residual on the last one.
pub fn vertex_matrices_lower(
    tab: &EmbeddingTables,
    tau_lo: f64,
) -> Vec<((usize, usize), Matrix)> {
    let cell = tab.cell_width();
    let j_last = ((tau_lo * tab.l as f64 / tab.sigma_bar).floor() as usize).min(tab.l - 1);
    let mut family = Vec::with_capacity((tab.n_conv + 1) * (j_last + 1));
    for j in 0..=j_last {
        let chi = if j < j_last { cell } else { tau_lo - j as f64 * cell };
        for i in 0..=tab.n_conv {
            family.push(((i, j), vertex_matrix(tab, i, j, chi, tab.nu_lower)));
        }
    }
    family
}

/// Upper family over cells from floor(tau_hi l / sigma_bar) to l-1, with the
/// boundary cell evaluated at chi = (j+1) sigma_bar/l - tau_hi.
pub fn vertex_matrices_upper(
    tab: &EmbeddingTables,
    tau_hi: f64,
) -> Vec<((usize, usize), Matrix)> {
    let cell = tab.cell_width();
    let j_first_raw = (tau_hi * tab.l as f64 / tab.sigma_bar).floor() as usize;
    // tau_hi = sigma_bar leaves no cells; keep the last one at chi = 0.
    let j_first = j_first_raw.min(tab.l - 1);
    let mut family = Vec::with_capacity((tab.n_conv + 1) * (tab.l - j_first));
    for j in j_first..tab.l {
        let chi = if j == j_first {
            ((j + 1) as f64 * cell - tau_hi).max(0.0)
        } else {
            cell
        };
        for i in 0..=tab.n_conv {
            family.push(((i, j), vertex_matrix(tab, i, j, chi, tab.nu_upper)));
        }
    }
    family
}

fn vertex_matrix(tab: &EmbeddingTables, i: usize, j: usize, chi: f64, nu: f64) -> Matrix {
    let blocks = &tab.taylor_blocks[j];
    let n = blocks[0].rows();
    let mut sum = Matrix::zeros(n, n);
    let mut power = 1.0;
    for block in blocks.iter().take(i + 1) {
        sum = &sum + &block.scale(power);
        power *= chi;
    }
    sum.add_scaled_identity(nu)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Sense {
    Lower,
    Upper,
}

/// S-procedure feasibility of a single vertex matrix against a conic region.
///
/// Lower sense asks for V + mult <= 0 on the cone; upper sense certifies
/// V - mult >= 0 by running the lower search on -V. For n = 2 the scalar
/// multiplier is found by golden-section over a doubled bracket; for n >= 3
/// a symmetric entrywise-nonnegative matrix multiplier is searched by
/// projected subgradient with a fixed budget.
pub fn sproc_feasible(
    v: &Matrix,
    region: &ConicRegion,
    sense: Sense,
    opts: &BoundsOptions,
) -> (bool, Multiplier, f64) {
    let w = match sense {
        Sense::Lower => v.symmetrize(),
        Sense::Upper => v.symmetrize().scale(-1.0),
    };
    match &region.q {
        Some(q) => scalar_multiplier_search(&w, q, opts),
        None => matrix_multiplier_search(&w, &region.e, opts),
    }
}

fn scalar_multiplier_search(
    w: &Matrix,
    q: &Matrix,
    opts: &BoundsOptions,
) -> (bool, Multiplier, f64) {
    let g = |eps: f64| lambda_max(&(w + &q.scale(eps)).symmetrize());
    let at_zero = g(0.0);
    if at_zero <= FEAS_TOL || q.norm_max_abs() == 0.0 {
        return (at_zero <= FEAS_TOL, Multiplier::Scalar(0.0), at_zero);
    }
    // bracket by doubling until the objective stops decreasing
    let mut hi = 1.0;
    let mut best = g(hi).min(at_zero);
    for _ in 0..opts.eps_max_doubling_cap {
        let next = g(2.0 * hi);
        if next < best - 1e-15 {
            hi *= 2.0;
            best = next;
        } else {
            hi *= 2.0;
            break;
        }
    }
    // golden-section on [0, hi]; g is convex in eps
    let phi = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (0.0, hi);
    let mut c = b - phi * (b - a);
    let mut d = a + phi * (b - a);
    let (mut gc, mut gd) = (g(c), g(d));
    for _ in 0..120 {
        if gc < gd {
            b = d;
            d = c;
            gd = gc;
            c = b - phi * (b - a);
            gc = g(c);
        } else {
            a = c;
            c = d;
            gc = gd;
            d = a + phi * (b - a);
            gd = g(d);
        }
        if b - a < 1e-13 * hi.max(1.0) {
            break;
        }
    }
    let eps = 0.5 * (a + b);
    let value = g(eps).min(at_zero);
    let (eps, value) = if at_zero < g(eps) { (0.0, at_zero) } else { (eps, value) };
    (value <= FEAS_TOL, Multiplier::Scalar(eps), value)
}

fn matrix_multiplier_search(
    w: &Matrix,
    e: &Matrix,
    opts: &BoundsOptions,
) -> (bool, Multiplier, f64) {
    let p = e.rows();
    let mut u = Matrix::zeros(p, p);
    let mut best_u = u.clone();
    let objective = |u: &Matrix| -> (f64, crate::linalg::Vector) {
        let m = (w + &(&(&e.transpose() * u) * e)).symmetrize();
        let (_, hi, vect) = crate::linalg::sym_eig_extremes(&m).expect("symmetric by build");
        (hi, vect)
    };
    let (mut best, _) = objective(&u);
    let scale = w.norm_max_abs().max(1.0);
    for iter in 1..=opts.subgradient_iters {
        let (value, top) = objective(&u);
        if value < best {
            best = value;
            best_u = u.clone();
        }
        if best <= FEAS_TOL * 0.5 {
            break;
        }
        // subgradient of lambda_max wrt U is (E w)(E w)^T for top eigenvector w
        let ew = e.mul_vec(&top).expect("shape checked");
        let mut grad = Matrix::zeros(p, p);
        for i in 0..p {
            for j in 0..p {
                grad.set(i, j, ew[i] * ew[j]);
            }
        }
        let step = scale / (iter as f64).sqrt() / grad.norm_max_abs().max(1e-12);
        u = &u - &grad.scale(step);
        // projection: symmetric with nonnegative entries
        u = u.symmetrize();
        for i in 0..p {
            for j in 0..p {
                if u.get(i, j) < 0.0 {
                    u.set(i, j, 0.0);
                }
            }
        }
    }
    (best <= FEAS_TOL, Multiplier::Matrix(best_u), best)
}

/// Largest tau such that every lower vertex matrix is itself negative
/// semidefinite: the whole-state-space lower bound that seeds the regional
/// searches.
pub fn global_lower_bound(tab: &EmbeddingTables) -> Result<f64, Error> {
    let feasible = |tau: f64| {
        vertex_matrices_lower(tab, tau)
            .iter()
            .all(|(_, m)| lambda_max(m) <= FEAS_TOL)
    };
    let tiny = tab.sigma_bar * 2f64.powi(-(BISECT_ITERS as i32));
    if !feasible(tiny) {
        return Err(Error::AbstractionFailure(format!(
            "no global lower bound exists even at tau = {tiny:e}; the remainder \
             constant {:.3e} dominates; increase l or n_conv",
            tab.nu_lower
        )));
    }
    if feasible(tab.sigma_bar) {
        return Ok(tab.sigma_bar);
    }
    let (mut lo, mut hi) = (tiny, tab.sigma_bar);
    for _ in 0..BISECT_ITERS {
        let mid = 0.5 * (lo + hi);
        if feasible(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(lo)
}

type SprocCache = HashMap<(usize, usize), (bool, Multiplier, f64)>;

fn family_feasible(
    tab: &EmbeddingTables,
    region: &ConicRegion,
    family: &[((usize, usize), Matrix)],
    boundary_j: usize,
    sense: Sense,
    opts: &BoundsOptions,
    cache: &mut SprocCache,
) -> bool {
    let _ = tab;
    for ((i, j), m) in family {
        let feasible = if *j == boundary_j {
            sproc_feasible(m, region, sense, opts).0
        } else {
            // interior cells do not depend on the search point; cache them
            cache
                .entry((*i, *j))
                .or_insert_with(|| sproc_feasible(m, region, sense, opts))
                .0
        };
        if !feasible {
            return false;
        }
    }
    true
}

fn collect_certificates(
    region: &ConicRegion,
    family: &[((usize, usize), Matrix)],
    sense: Sense,
    opts: &BoundsOptions,
) -> Vec<VertexCertificate> {
    family
        .iter()
        .map(|((i, j), m)| {
            let (_, multiplier, margin) = sproc_feasible(m, region, sense, opts);
            VertexCertificate { i: *i, j: *j, multiplier, margin }
        })
        .collect()
}

/// Largest certified regional lower bound in [tau_prime, sigma_bar].
pub fn regional_lower_bound(
    tab: &EmbeddingTables,
    region: &ConicRegion,
    tau_prime: f64,
    opts: &BoundsOptions,
) -> Result<(f64, Vec<VertexCertificate>), Error> {
    let mut cache: SprocCache = HashMap::new();
    let check = |tau: f64, cache: &mut SprocCache| {
        let family = vertex_matrices_lower(tab, tau);
        let boundary = family.last().map(|((_, j), _)| *j).unwrap_or(0);
        family_feasible(tab, region, &family, boundary, Sense::Lower, opts, cache)
    };
    if !check(tau_prime, &mut cache) {
        // tau_prime was certified without the S-procedure, which subsumes it;
        // keep it as the sound fallback.
        let family = vertex_matrices_lower(tab, tau_prime);
        return Ok((tau_prime, collect_certificates(region, &family, Sense::Lower, opts)));
    }
    let mut lo = tau_prime;
    let mut hi = tab.sigma_bar;
    if check(hi, &mut cache) {
        lo = hi;
    } else {
        for _ in 0..BISECT_ITERS {
            let mid = 0.5 * (lo + hi);
            if check(mid, &mut cache) {
                lo = mid;
            } else {
                hi = mid;
            }
        }
    }
    let family = vertex_matrices_lower(tab, lo);
    Ok((lo, collect_certificates(region, &family, Sense::Lower, opts)))
}

/// Smallest certified regional upper bound in [tau_lo, sigma_bar]; saturates
/// at sigma_bar when even the full horizon cannot be certified.
pub fn regional_upper_bound(
    tab: &EmbeddingTables,
    region: &ConicRegion,
    tau_lo: f64,
    opts: &BoundsOptions,
) -> Result<(f64, bool, Vec<VertexCertificate>), Error> {
    let mut cache: SprocCache = HashMap::new();
    let check = |tau: f64, cache: &mut SprocCache| {
        let family = vertex_matrices_upper(tab, tau);
        let boundary = family.first().map(|((_, j), _)| *j).unwrap_or(0);
        family_feasible(tab, region, &family, boundary, Sense::Upper, opts, cache)
    };
    if !check(tab.sigma_bar, &mut cache) {
        return Ok((tab.sigma_bar, true, Vec::new()));
    }
    let mut hi = tab.sigma_bar;
    if check(tau_lo, &mut cache) {
        hi = tau_lo;
    } else {
        let mut lo = tau_lo;
        for _ in 0..BISECT_ITERS {
            let mid = 0.5 * (lo + hi);
            if check(mid, &mut cache) {
                hi = mid;
            } else {
                lo = mid;
            }
        }
    }
    let family = vertex_matrices_upper(tab, hi);
    Ok((hi, false, collect_certificates(region, &family, Sense::Upper, opts)))
}

/// Bounds for every region of the covering. The half-space regions are
/// certified in parallel and mirrored to their antipodal partners, which
/// share the same quadratic representation.
pub fn compute_all_bounds(
    tab: &EmbeddingTables,
    part: &Partition,
    opts: &BoundsOptions,
) -> Result<Vec<RegionalBounds>, Error> {
    let tau_prime = global_lower_bound(tab)?;
    let half: Vec<RegionalBounds> = part
        .half_indices
        .par_iter()
        .map(|&idx| -> Result<RegionalBounds, Error> {
            let region = &part.regions[idx];
            let (tau_lo, lower_certificates) =
                regional_lower_bound(tab, region, tau_prime, opts)?;
            let (tau_hi, saturated, upper_certificates) =
                regional_upper_bound(tab, region, tau_lo, opts)?;
            Ok(RegionalBounds {
                region: idx,
                tau_lo,
                tau_hi,
                saturated,
                lower_certificates,
                upper_certificates,
            })
        })
        .collect::<Result<Vec<_>, _>>()?;

    let mut all = Vec::with_capacity(part.len());
    all.extend(half.iter().cloned());
    for b in &half {
        let mirror = part.regions[b.region].mirror;
        let mut m = b.clone();
        m.region = mirror;
        all.push(m);
    }
    all.sort_by_key(|b| b.region);
    Ok(all)
}
