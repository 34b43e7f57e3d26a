//! Flow-pipe reachability over the certified inter-sample window. The unit
//! rays of a region are propagated by the sampled-state transition map on a
//! grid of time subintervals; each subinterval's image cloud is wrapped in a
//! convex hull bloated for chord curvature, and transitions are read off by
//! intersecting the hull with every cone of the covering.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bounds::RegionalBounds;
use crate::error::Error;
use crate::linalg::{convex_hull, expm, lp_feasible, operator_norm_2, Hull, Matrix, Vector};
use crate::partition::Partition;
use crate::plant::Plant;

const ORIGIN_TOL: f64 = 1e-12;
const CURVATURE_SAMPLES: usize = 8;
const CURVATURE_SAFETY: f64 = 1.5;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FlowPipeSegment {
    pub region: usize,
    pub t_lo: f64,
    pub t_hi: f64,
    /// Half-space rows (unit outward normals) of the bloated hull.
    pub c: Matrix,
    pub d: Vector,
    pub bloat: f64,
    pub bounding_box_fallback: bool,
}

impl FlowPipeSegment {
    pub fn contains(&self, x: &Vector, tol: f64) -> bool {
        (0..self.c.rows()).all(|i| self.c.row(i).dot(x) <= self.d[i] + tol)
    }

    /// The hull contains the origin, so cone-intersection tests degenerate.
    pub fn contains_origin(&self) -> bool {
        (0..self.d.dim()).all(|i| self.d[i] >= -ORIGIN_TOL)
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FlowPipe {
    pub region: usize,
    pub segments: Vec<FlowPipeSegment>,
    /// Some segment swallowed the origin; its successors were set to every
    /// region as the only sound answer.
    pub origin_in_pipe: bool,
}

/// Unit extreme rays of a region: the initial set of its flow pipe.
pub fn initial_polytope(part: &Partition, region: usize) -> Vec<Vector> {
    part.regions[region]
        .rays
        .iter()
        .filter_map(|r| r.normalized())
        .collect()
}

/// Overapproximate the reach set of region's unit states over
/// [tau_lo, tau_hi] with ceil((tau_hi - tau_lo)/step) hull segments.
pub fn flow_pipe(
    plant: &Plant,
    part: &Partition,
    region: usize,
    tau_lo: f64,
    tau_hi: f64,
    step: f64,
) -> Result<FlowPipe, Error> {
    if !(step > 0.0) {
        return Err(Error::Contract("flow-pipe step must be positive".into()));
    }
    if tau_hi < tau_lo {
        return Err(Error::Contract("tau_hi below tau_lo".into()));
    }
    let rays = initial_polytope(part, region);
    let count = (((tau_hi - tau_lo) / step).ceil() as usize).max(1);
    let dt = (tau_hi - tau_lo) / count as f64;
    let mut segments = Vec::with_capacity(count);
    let mut origin_in_pipe = false;
    for f in 0..count {
        let t_lo = tau_lo + f as f64 * dt;
        let t_hi = if f + 1 == count { tau_hi } else { t_lo + dt };
        let mut cloud = Vec::with_capacity(3 * rays.len());
        for t in [t_lo, 0.5 * (t_lo + t_hi), t_hi] {
            let lam = plant.lambda_at(t)?;
            for r in &rays {
                cloud.push(lam.mul_vec(r)?);
            }
        }
        let mut bloat = curvature_bloat(plant, t_lo, t_hi)?;
        let hull = match convex_hull(&cloud) {
            Ok(h) => h,
            Err(Error::DegenerateHull(_)) => {
                // flat or collinear image cloud: puff it up along the axes
                // and account for the puff in the bloat term
                let eta = 1e-6
                    * (1.0 + cloud.iter().map(|p| p.norm()).fold(0.0, f64::max));
                let n = plant.dim();
                let mut inflated = Vec::with_capacity(cloud.len() * (2 * n + 1));
                for p in &cloud {
                    inflated.push(p.clone());
                    for axis in 0..n {
                        let mut e = Vector::zeros(n);
                        e[axis] = eta;
                        inflated.push(p.add(&e));
                        inflated.push(p.sub(&e));
                    }
                }
                bloat += eta;
                convex_hull(&inflated)?
            }
            Err(e) => return Err(e),
        };
        let Hull { c, d, bounding_box_fallback } = hull;
        let mut d_bloated = d;
        for i in 0..d_bloated.dim() {
            d_bloated[i] += bloat;
        }
        let segment = FlowPipeSegment {
            region,
            t_lo,
            t_hi,
            c,
            d: d_bloated,
            bloat,
            bounding_box_fallback,
        };
        origin_in_pipe |= segment.contains_origin();
        segments.push(segment);
    }
    Ok(FlowPipe { region, segments, origin_in_pipe })
}

/// Chord-sag bound for replacing the arc t -> Lambda(t) x (|x| <= 1) on a
/// half-subinterval by its endpoints: (dt/2)^2 / 2 times the largest second
/// derivative norm, padded by a safety factor.
fn curvature_bloat(plant: &Plant, t_lo: f64, t_hi: f64) -> Result<f64, Error> {
    let cl = plant.closed_loop();
    let mut max_curv = 0.0f64;
    for s in 0..CURVATURE_SAMPLES {
        let t = t_lo + (t_hi - t_lo) * s as f64 / (CURVATURE_SAMPLES - 1) as f64;
        let second = &(&plant.a * &expm(&plant.a, t)?) * &cl;
        max_curv = max_curv.max(operator_norm_2(&second));
    }
    let half = 0.5 * (t_hi - t_lo);
    Ok(0.5 * half * half * max_curv * CURVATURE_SAFETY)
}

/// Regions whose cones meet the pipe. When a segment contains the origin
/// every region is returned, since the origin lies on every cone boundary.
pub fn successor_regions(pipe: &FlowPipe, part: &Partition) -> Result<Vec<usize>, Error> {
    if pipe.origin_in_pipe {
        return Ok((0..part.len()).collect());
    }
    let mut out = Vec::new();
    for target in &part.regions {
        let hit = pipe.segments.iter().any(|seg| {
            lp_feasible(&seg.c, &seg.d, &target.e).unwrap_or(true)
        });
        if hit {
            out.push(target.index);
        }
    }
    if out.is_empty() {
        return Err(Error::AbstractionFailure(format!(
            "flow pipe of region {} intersects no cone; the covering is broken",
            pipe.region
        )));
    }
    Ok(out)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ReachabilityResult {
    pub pipes: Vec<FlowPipe>,
    /// successors[s] is the sorted successor-region list of region s.
    pub successors: Vec<Vec<usize>>,
}

/// Flow pipes and successor sets for every region, in parallel.
pub fn compute_transitions(
    plant: &Plant,
    part: &Partition,
    bounds: &[RegionalBounds],
    step: f64,
) -> Result<ReachabilityResult, Error> {
    if bounds.len() != part.len() {
        return Err(Error::Contract(
            "one bounds entry per region is required".into(),
        ));
    }
    let mut items: Vec<(FlowPipe, Vec<usize>)> = bounds
        .par_iter()
        .map(|b| -> Result<(FlowPipe, Vec<usize>), Error> {
            let pipe = flow_pipe(plant, part, b.region, b.tau_lo, b.tau_hi, step)?;
            let succ = successor_regions(&pipe, part)?;
            Ok((pipe, succ))
        })
        .collect::<Result<Vec<_>, _>>()?;
    items.sort_by_key(|(p, _)| p.region);
    let (pipes, successors) = items.into_iter().unzip();
    Ok(ReachabilityResult { pipes, successors })
}
