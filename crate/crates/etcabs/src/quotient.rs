//! Quotient of the sampling behaviour into a timed safety automaton: one
//! location per cone with a single clock, interval guards from the certified
//! bounds, and edges from the flow-pipe successor sets.

use serde::{Deserialize, Serialize};

use crate::bounds::RegionalBounds;
use crate::error::Error;
use crate::partition::Partition;
use crate::plant::Trace;

pub const REPLAY_TOL: f64 = 1e-6;
pub const DEFAULT_CLOCK_SCALE: u64 = 10_000;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Location {
    pub id: usize,
    pub tau_lo: f64,
    pub tau_hi: f64,
    pub initial: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Edge {
    pub src: usize,
    pub dst: usize,
    pub guard_lo: f64,
    pub guard_hi: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TrafficAutomaton {
    pub locations: Vec<Location>,
    pub edges: Vec<Edge>,
    pub clock: String,
    /// Largest guard-interval width: the timing precision of the quotient.
    pub epsilon: f64,
}

#[derive(Clone, Debug)]
pub struct QuotientSystem {
    pub automaton: TrafficAutomaton,
    /// Locations without outgoing edges, and other assembly oddities.
    pub warnings: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum InitialSet {
    All,
    Regions(Vec<usize>),
}

/// Assemble the timed safety automaton from per-region bounds and successor
/// sets. Locations keep the region indices as ids; every edge carries the
/// guard interval of its source and resets the single clock.
pub fn build_quotient(
    part: &Partition,
    bounds: &[RegionalBounds],
    successors: &[Vec<usize>],
    initial: &InitialSet,
) -> Result<QuotientSystem, Error> {
    if bounds.len() != part.len() || successors.len() != part.len() {
        return Err(Error::Assembly(
            "bounds and successor lists must cover every region".into(),
        ));
    }
    if let InitialSet::Regions(list) = initial {
        if list.is_empty() {
            return Err(Error::Assembly("empty initial region list".into()));
        }
        if let Some(bad) = list.iter().find(|&&s| s >= part.len()) {
            return Err(Error::Assembly(format!(
                "initial region {bad} out of range (have {})",
                part.len()
            )));
        }
    }

    let mut locations = Vec::with_capacity(part.len());
    let mut epsilon = 0.0f64;
    for b in bounds {
        if !(b.tau_lo > 0.0) || b.tau_hi < b.tau_lo {
            return Err(Error::Assembly(format!(
                "region {} carries an invalid interval [{}, {}]",
                b.region, b.tau_lo, b.tau_hi
            )));
        }
        epsilon = epsilon.max(b.tau_hi - b.tau_lo);
        let is_initial = match initial {
            InitialSet::All => true,
            InitialSet::Regions(list) => list.contains(&b.region),
        };
        locations.push(Location {
            id: b.region,
            tau_lo: b.tau_lo,
            tau_hi: b.tau_hi,
            initial: is_initial,
        });
    }
    locations.sort_by_key(|l| l.id);

    let mut edges = Vec::new();
    let mut warnings = Vec::new();
    for (src, succ) in successors.iter().enumerate() {
        if succ.is_empty() {
            warnings.push(format!("location {src} is a dead end: no successors"));
            continue;
        }
        let loc = &locations[src];
        for &dst in succ {
            edges.push(Edge {
                src,
                dst,
                guard_lo: loc.tau_lo,
                guard_hi: loc.tau_hi,
            });
        }
    }

    Ok(QuotientSystem {
        automaton: TrafficAutomaton {
            locations,
            edges,
            clock: "c".to_string(),
            epsilon,
        },
        warnings,
    })
}

impl TrafficAutomaton {
    pub fn location(&self, id: usize) -> Option<&Location> {
        self.locations.iter().find(|l| l.id == id)
    }

    pub fn has_edge(&self, src: usize, dst: usize) -> bool {
        self.edges.iter().any(|e| e.src == src && e.dst == dst)
    }

    /// Clock invariant of a location: the clock stays in [0, tau_hi].
    pub fn invariant(&self, id: usize) -> Option<(f64, f64)> {
        self.location(id).map(|l| (0.0, l.tau_hi))
    }

    pub fn to_json_string(&self) -> Result<String, Error> {
        serde_json::to_string_pretty(self)
            .map_err(|e| Error::Assembly(format!("automaton serialization: {e}")))
    }

    /// Model-checker XML with integer clock units: lower guards round down,
    /// upper guards and invariants round up, so the scaled automaton admits
    /// at least the behaviours of the real-valued one. A committed entry
    /// location fans out to the initial regions.
    pub fn to_model_checker_xml(&self, scale: u64) -> String {
        let lo_int = |t: f64| (t * scale as f64).floor() as u64;
        let hi_int = |t: f64| (t * scale as f64).ceil() as u64;
        let clock = &self.clock;
        let mut xml = String::new();
        xml.push_str("<?xml version=\"1.0\" encoding=\"utf-8\"?>\n");
        xml.push_str("<nta>\n");
        xml.push_str(&format!(
            "  <declaration>clock {clock}; // {scale} units per second</declaration>\n"
        ));
        xml.push_str("  <template>\n    <name>traffic</name>\n");
        for l in &self.locations {
            xml.push_str(&format!(
                "    <location id=\"id{}\"><name>s{}</name>\
                 <label kind=\"invariant\">{clock} &lt;= {}</label></location>\n",
                l.id,
                l.id,
                hi_int(l.tau_hi)
            ));
        }
        xml.push_str(&format!(
            "    <location id=\"entry\"><name>entry</name>\
             <label kind=\"invariant\">{clock} &lt;= 0</label></location>\n"
        ));
        xml.push_str("    <init ref=\"entry\"/>\n");
        for l in self.locations.iter().filter(|l| l.initial) {
            xml.push_str(&format!(
                "    <transition><source ref=\"entry\"/><target ref=\"id{}\"/>\
                 <label kind=\"assignment\">{clock} := 0</label></transition>\n",
                l.id
            ));
        }
        for e in &self.edges {
            xml.push_str(&format!(
                "    <transition><source ref=\"id{}\"/><target ref=\"id{}\"/>\
                 <label kind=\"guard\">{clock} &gt;= {} &amp;&amp; {clock} &lt;= {}</label>\
                 <label kind=\"assignment\">{clock} := 0</label></transition>\n",
                e.src,
                e.dst,
                lo_int(e.guard_lo),
                hi_int(e.guard_hi)
            ));
        }
        xml.push_str("  </template>\n");
        xml.push_str("  <system>system traffic;</system>\n");
        xml.push_str("</nta>\n");
        xml
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ReplayStep {
    pub index: usize,
    pub region: usize,
    pub tau: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ReplayReport {
    pub accepted: bool,
    /// First event index the automaton could not reproduce, if any.
    pub failing_index: Option<usize>,
    pub reason: Option<String>,
    pub steps: Vec<ReplayStep>,
}

/// Replay a concrete sampling trace through the automaton: every event's
/// inter-sample time must satisfy its region's guard (within tolerance) and
/// every consecutive region pair must be an edge.
pub fn replay_trace(
    automaton: &TrafficAutomaton,
    part: &Partition,
    trace: &Trace,
) -> Result<ReplayReport, Error> {
    let mut steps = Vec::with_capacity(trace.events.len());
    let mut regions = Vec::with_capacity(trace.events.len());
    for ev in &trace.events {
        regions.push(part.locate_region(&ev.state)?);
    }
    for (k, ev) in trace.events.iter().enumerate() {
        let region = regions[k];
        let loc = automaton.location(region).ok_or_else(|| {
            Error::Assembly(format!("trace visits region {region} with no location"))
        })?;
        steps.push(ReplayStep { index: ev.index, region, tau: ev.tau });
        if ev.tau < loc.tau_lo - REPLAY_TOL || ev.tau > loc.tau_hi + REPLAY_TOL {
            return Ok(ReplayReport {
                accepted: false,
                failing_index: Some(k),
                reason: Some(format!(
                    "tau = {} outside guard [{}, {}] of location {region}",
                    ev.tau, loc.tau_lo, loc.tau_hi
                )),
                steps,
            });
        }
        if k + 1 < trace.events.len() && !automaton.has_edge(region, regions[k + 1]) {
            return Ok(ReplayReport {
                accepted: false,
                failing_index: Some(k),
                reason: Some(format!("missing edge {region} -> {}", regions[k + 1])),
                steps,
            });
        }
    }
    Ok(ReplayReport { accepted: true, failing_index: None, reason: None, steps })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bounds::{build_embedding, compute_all_bounds, BoundsOptions};
    use crate::linalg::{Matrix, Vector};
    use crate::partition::isotropic_cover;
    use crate::plant::Plant;
    use crate::reachability::compute_transitions;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn example_plant() -> Plant {
        Plant::new(
            Matrix::from_rows(&[vec![0.0, 1.0], vec![-2.0, 3.0]]).unwrap(),
            Matrix::from_rows(&[vec![0.0], vec![1.0]]).unwrap(),
            Matrix::from_rows(&[vec![1.0, -4.0]]).unwrap(),
            0.05,
        )
        .unwrap()
    }

    fn build_example() -> (Plant, Partition, QuotientSystem) {
        let p = example_plant();
        let part = isotropic_cover(2, 8).unwrap();
        let opts = BoundsOptions::default();
        let tab = build_embedding(&p, 1.0, 50, 5, &opts).unwrap();
        let bounds = compute_all_bounds(&tab, &part, &opts).unwrap();
        let reach = compute_transitions(&p, &part, &bounds, 0.01).unwrap();
        let q = build_quotient(&part, &bounds, &reach.successors, &InitialSet::All).unwrap();
        (p, part, q)
    }

    #[test]
    fn epsilon_is_worst_interval_width() {
        let (_, part, q) = build_example();
        assert_eq!(q.automaton.locations.len(), part.len());
        let widest = q
            .automaton
            .locations
            .iter()
            .map(|l| l.tau_hi - l.tau_lo)
            .fold(0.0, f64::max);
        assert_eq!(q.automaton.epsilon, widest);
        assert!(q.automaton.epsilon > 0.0);
    }

    #[test]
    fn json_shape_is_stable() {
        let (_, _, q) = build_example();
        let text = q.automaton.to_json_string().unwrap();
        let v: serde_json::Value = serde_json::from_str(&text).unwrap();
        assert_eq!(v["clock"], "c");
        assert!(v["epsilon"].is_f64());
        let loc = &v["locations"][0];
        for key in ["id", "tau_lo", "tau_hi", "initial"] {
            assert!(loc.get(key).is_some(), "missing location key {key}");
        }
        let edge = &v["edges"][0];
        for key in ["src", "dst", "guard_lo", "guard_hi"] {
            assert!(edge.get(key).is_some(), "missing edge key {key}");
        }
        // deterministic emission
        assert_eq!(text, q.automaton.to_json_string().unwrap());
    }

    #[test]
    fn initial_set_restriction() {
        let p = example_plant();
        let part = isotropic_cover(2, 4).unwrap();
        let opts = BoundsOptions::default();
        let tab = build_embedding(&p, 1.0, 25, 4, &opts).unwrap();
        let bounds = compute_all_bounds(&tab, &part, &opts).unwrap();
        let reach = compute_transitions(&p, &part, &bounds, 0.01).unwrap();
        let q = build_quotient(
            &part,
            &bounds,
            &reach.successors,
            &InitialSet::Regions(vec![2, 5]),
        )
        .unwrap();
        let initials: Vec<usize> = q
            .automaton
            .locations
            .iter()
            .filter(|l| l.initial)
            .map(|l| l.id)
            .collect();
        assert_eq!(initials, vec![2, 5]);
        assert!(build_quotient(
            &part,
            &bounds,
            &reach.successors,
            &InitialSet::Regions(vec![99])
        )
        .is_err());
    }

    #[test]
    fn dead_end_produces_warning_not_error() {
        let p = example_plant();
        let part = isotropic_cover(2, 4).unwrap();
        let opts = BoundsOptions::default();
        let tab = build_embedding(&p, 1.0, 25, 4, &opts).unwrap();
        let bounds = compute_all_bounds(&tab, &part, &opts).unwrap();
        let mut successors: Vec<Vec<usize>> = vec![vec![0]; part.len()];
        successors[3] = Vec::new();
        let q = build_quotient(&part, &bounds, &successors, &InitialSet::All).unwrap();
        assert!(q.warnings.iter().any(|w| w.contains("location 3")));
        assert!(!q.automaton.edges.iter().any(|e| e.src == 3));
    }

    #[test]
    fn xml_guards_round_outward() {
        let (_, _, q) = build_example();
        let xml = q.automaton.to_model_checker_xml(DEFAULT_CLOCK_SCALE);
        assert!(xml.contains("<nta>"));
        assert!(xml.contains("clock c;"));
        let e = &q.automaton.edges[0];
        let lo = (e.guard_lo * DEFAULT_CLOCK_SCALE as f64).floor() as u64;
        let hi = (e.guard_hi * DEFAULT_CLOCK_SCALE as f64).ceil() as u64;
        assert!(lo as f64 <= e.guard_lo * DEFAULT_CLOCK_SCALE as f64);
        assert!(hi as f64 >= e.guard_hi * DEFAULT_CLOCK_SCALE as f64);
        assert!(xml.contains(&format!("c &gt;= {lo} &amp;&amp; c &lt;= {hi}")));
        // one entry edge per initial location
        let entry_edges = xml.matches("<source ref=\"entry\"/>").count();
        let initials = q.automaton.locations.iter().filter(|l| l.initial).count();
        assert_eq!(entry_edges, initials);
    }

    #[test]
    fn replays_simulated_traces() {
        let (p, part, q) = build_example();
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        for _ in 0..20 {
            let x0 = Vector::new(vec![rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0)]);
            if x0.norm() < 1e-3 {
                continue;
            }
            let trace = p.simulate_traffic(&x0, 5.0, 1.0, 1e-4).unwrap();
            let report = replay_trace(&q.automaton, &part, &trace).unwrap();
            assert!(
                report.accepted,
                "trace from {:?} rejected at {:?}: {:?}",
                x0.data(), report.failing_index, report.reason
            );
        }
    }

    #[test]
    fn replay_flags_guard_violation_with_index() {
        let (p, part, q) = build_example();
        let mut narrowed = q.automaton.clone();
        // shrink every guard to an impossible sliver
        for l in &mut narrowed.locations {
            l.tau_hi = l.tau_lo * (1.0 + 1e-12);
        }
        let trace = p
            .simulate_traffic(&Vector::new(vec![1.0, 0.3]), 2.0, 1.0, 1e-4)
            .unwrap();
        let report = replay_trace(&narrowed, &part, &trace).unwrap();
        assert!(!report.accepted);
        assert!(report.failing_index.is_some());
        assert!(report.reason.unwrap().contains("outside guard"));
    }
}
