//! Orchestration of the abstraction pipeline and persistence of its
//! artifacts. Every writer emits deterministic bytes for a fixed config.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use etcabs::quotient::ReplayReport;
use etcabs::reachability::ReachabilityResult;
use etcabs::{
    build_embedding, build_quotient, compute_all_bounds, compute_transitions,
    global_lower_bound, replay_trace, Error, Partition, Plant, QuotientSystem, RegionalBounds,
    Trace, Vector, DEFAULT_CLOCK_SCALE,
};

use crate::config::RunConfig;

pub enum CliError {
    /// exit 1: bad configuration or I/O, message names the problem
    Config(String),
    /// exit 2: the abstraction could not be certified
    Abstraction(String),
    /// exit 3: validation found violations
    Validation(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 1,
            CliError::Abstraction(_) => 2,
            CliError::Validation(_) => 3,
        }
    }

    pub fn message(&self) -> &str {
        match self {
            CliError::Config(m) | CliError::Abstraction(m) | CliError::Validation(m) => m,
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::HorizonExceeded { .. } | Error::AbstractionFailure(_) => {
                CliError::Abstraction(e.to_string())
            }
            other => CliError::Config(other.to_string()),
        }
    }
}

pub struct Abstraction {
    pub plant: Plant,
    pub partition: Partition,
    pub bounds: Vec<RegionalBounds>,
    pub reach: ReachabilityResult,
    pub quotient: QuotientSystem,
    pub tau_prime: f64,
    pub nu_lower: f64,
    pub nu_upper: f64,
    pub wall_seconds: f64,
}

/// Run partition -> embedding -> bounds -> flow pipes -> quotient. A
/// saturated upper bound means the horizon is too short to certify, which
/// the pipeline treats as an abstraction failure.
pub fn run_abstraction(cfg: &RunConfig) -> Result<Abstraction, CliError> {
    let start = Instant::now();
    let plant = cfg.plant().map_err(|e| CliError::Config(format!("config: plant: {e}")))?;
    let opts = cfg.bounds_options();
    let part = etcabs::isotropic_cover(plant.dim(), cfg.abstraction.m_bar)?;
    let tab = build_embedding(
        &plant,
        cfg.abstraction.sigma_bar,
        cfg.abstraction.l,
        cfg.abstraction.n_conv,
        &opts,
    )?;
    let tau_prime = global_lower_bound(&tab)?;
    let bounds = compute_all_bounds(&tab, &part, &opts)?;
    let saturated: Vec<usize> =
        bounds.iter().filter(|b| b.saturated).map(|b| b.region).collect();
    if !saturated.is_empty() {
        return Err(CliError::Abstraction(format!(
            "no upper bound certifiable within the horizon for regions {saturated:?}; \
             try increasing the value of sigma_bar"
        )));
    }
    let reach = compute_transitions(&plant, &part, &bounds, cfg.abstraction.flowpipe_step)?;
    let quotient = build_quotient(
        &part,
        &bounds,
        &reach.successors,
        &cfg.abstraction.initial.to_initial_set(),
    )?;
    Ok(Abstraction {
        plant,
        partition: part,
        bounds,
        reach,
        quotient,
        tau_prime,
        nu_lower: tab.nu_lower,
        nu_upper: tab.nu_upper,
        wall_seconds: start.elapsed().as_secs_f64(),
    })
}

fn write(path: &Path, bytes: &str) -> Result<(), CliError> {
    fs::write(path, bytes)
        .map_err(|e| CliError::Config(format!("config: cannot write {}: {e}", path.display())))
}

fn ensure_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir)
        .map_err(|e| CliError::Config(format!("config: cannot create {}: {e}", dir.display())))
}

pub fn bounds_csv(bounds: &[RegionalBounds]) -> String {
    let mut out = String::from("region,tau_lo,tau_hi,saturated\n");
    for b in bounds {
        out.push_str(&format!("{},{},{},{}\n", b.region, b.tau_lo, b.tau_hi, b.saturated));
    }
    out
}

#[derive(Serialize)]
struct Metadata<'a> {
    epsilon: f64,
    epsilon_definition: &'a str,
    tau_prime: f64,
    nu_lower: f64,
    nu_upper: f64,
    regions: usize,
    edges: usize,
    origin_in_pipe_regions: Vec<usize>,
    dead_end_warnings: &'a [String],
    wall_seconds: f64,
    threads: usize,
}

pub fn write_abstraction(
    cfg: &RunConfig,
    art: &Abstraction,
    dir: &Path,
) -> Result<(), CliError> {
    ensure_dir(dir)?;
    let formats = &cfg.output.formats;
    if formats.iter().any(|f| f == "csv") {
        write(&dir.join("bounds.csv"), &bounds_csv(&art.bounds))?;
    }
    if formats.iter().any(|f| f == "json") {
        let bounds_json = serde_json::to_string_pretty(&art.bounds)
            .map_err(|e| CliError::Config(format!("config: bounds serialization: {e}")))?;
        write(&dir.join("bounds.json"), &bounds_json)?;
        let pipes_json = serde_json::to_string_pretty(&art.reach.pipes)
            .map_err(|e| CliError::Config(format!("config: flow-pipe serialization: {e}")))?;
        write(&dir.join("flowpipes.json"), &pipes_json)?;
        write(&dir.join("automaton.json"), &art.quotient.automaton.to_json_string()?)?;
    }
    if formats.iter().any(|f| f == "xml") {
        write(
            &dir.join("automaton.xml"),
            &art.quotient.automaton.to_model_checker_xml(DEFAULT_CLOCK_SCALE),
        )?;
    }
    let meta = Metadata {
        epsilon: art.quotient.automaton.epsilon,
        epsilon_definition: "max over regions of (tau_hi - tau_lo)",
        tau_prime: art.tau_prime,
        nu_lower: art.nu_lower,
        nu_upper: art.nu_upper,
        regions: art.partition.len(),
        edges: art.quotient.automaton.edges.len(),
        origin_in_pipe_regions: art
            .reach
            .pipes
            .iter()
            .filter(|p| p.origin_in_pipe)
            .map(|p| p.region)
            .collect(),
        dead_end_warnings: &art.quotient.warnings,
        wall_seconds: art.wall_seconds,
        threads: rayon::current_num_threads(),
    };
    let meta_json = serde_json::to_string_pretty(&meta)
        .map_err(|e| CliError::Config(format!("config: metadata serialization: {e}")))?;
    write(&dir.join("metadata.json"), &meta_json)?;
    Ok(())
}

pub struct SimulatedTrace {
    pub trace: Trace,
    pub regions: Vec<usize>,
    pub horizon_exceeded: bool,
}

/// Seeded batch of traces from random unit initial states. A trace whose
/// next event falls outside the scan horizon is kept up to that point and
/// flagged, as the run must go on.
pub fn simulate_batch(
    cfg: &RunConfig,
    plant: &Plant,
    part: &Partition,
    seed: u64,
) -> Result<Vec<SimulatedTrace>, CliError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = plant.dim();
    let scan_dt = cfg.scan_dt();
    let mut out = Vec::with_capacity(cfg.simulation.trace_count);
    for _ in 0..cfg.simulation.trace_count {
        let x0 = loop {
            let v = Vector::new((0..n).map(|_| rng.gen_range(-1.0..1.0)).collect());
            if v.norm() > 0.2 {
                break v.normalized().expect("norm checked");
            }
        };
        let (trace, horizon_exceeded) = match plant.simulate_traffic(
            &x0,
            cfg.simulation.horizon,
            cfg.abstraction.sigma_bar,
            scan_dt,
        ) {
            Ok(t) => (t, false),
            Err(Error::HorizonExceeded { .. }) => (
                Trace { events: Vec::new(), truncated_at_origin: false },
                true,
            ),
            Err(e) => return Err(e.into()),
        };
        let mut regions = Vec::with_capacity(trace.events.len());
        for ev in &trace.events {
            regions.push(part.locate_region(&ev.state)?);
        }
        out.push(SimulatedTrace { trace, regions, horizon_exceeded });
    }
    Ok(out)
}

pub fn traces_csv(traces: &[SimulatedTrace], n: usize) -> String {
    let mut out = String::from("trace,k,t");
    for i in 0..n {
        out.push_str(&format!(",x{i}"));
    }
    out.push_str(",tau,region\n");
    for (id, st) in traces.iter().enumerate() {
        for (ev, region) in st.trace.events.iter().zip(&st.regions) {
            out.push_str(&format!("{},{},{}", id, ev.index, ev.time));
            for i in 0..n {
                out.push_str(&format!(",{}", ev.state[i]));
            }
            out.push_str(&format!(",{},{}\n", ev.tau, region));
        }
    }
    out
}

#[derive(Serialize)]
struct SimulationSummary {
    traces: usize,
    events: usize,
    horizon_exceeded: Vec<usize>,
    seed: u64,
}

pub fn write_simulation(
    cfg: &RunConfig,
    traces: &[SimulatedTrace],
    n: usize,
    seed: u64,
    dir: &Path,
) -> Result<(), CliError> {
    ensure_dir(dir)?;
    if cfg.output.formats.iter().any(|f| f == "csv") {
        write(&dir.join("traces.csv"), &traces_csv(traces, n))?;
    }
    let summary = SimulationSummary {
        traces: traces.len(),
        events: traces.iter().map(|t| t.trace.events.len()).sum(),
        horizon_exceeded: traces
            .iter()
            .enumerate()
            .filter(|(_, t)| t.horizon_exceeded)
            .map(|(i, _)| i)
            .collect(),
        seed,
    };
    let json = serde_json::to_string_pretty(&summary)
        .map_err(|e| CliError::Config(format!("config: summary serialization: {e}")))?;
    write(&dir.join("simulation.json"), &json)?;
    Ok(())
}

#[derive(Serialize)]
pub struct ValidationReport {
    pub traces: usize,
    pub accepted_traces: usize,
    pub violation_count: usize,
    /// distinct simulated edges divided by abstraction edges; always <= 1
    pub coverage_ratio: f64,
    pub replays: Vec<ReplayOutcome>,
}

#[derive(Serialize)]
pub struct ReplayOutcome {
    pub trace: usize,
    pub accepted: bool,
    pub failing_index: Option<usize>,
    pub reason: Option<String>,
}

pub fn validate(
    art: &Abstraction,
    traces: &[SimulatedTrace],
) -> Result<ValidationReport, CliError> {
    let mut replays = Vec::with_capacity(traces.len());
    let mut violation_count = 0usize;
    let mut seen_edges = std::collections::BTreeSet::new();
    for (id, st) in traces.iter().enumerate() {
        let report: ReplayReport =
            replay_trace(&art.quotient.automaton, &art.partition, &st.trace)?;
        if !report.accepted {
            violation_count += 1;
        }
        for pair in st.regions.windows(2) {
            seen_edges.insert((pair[0], pair[1]));
        }
        replays.push(ReplayOutcome {
            trace: id,
            accepted: report.accepted,
            failing_index: report.failing_index,
            reason: report.reason,
        });
    }
    let edge_total = art.quotient.automaton.edges.len().max(1);
    let accepted_traces = replays.iter().filter(|r| r.accepted).count();
    Ok(ValidationReport {
        traces: traces.len(),
        accepted_traces,
        violation_count,
        coverage_ratio: seen_edges.len() as f64 / edge_total as f64,
        replays,
    })
}

pub fn write_validation(report: &ValidationReport, dir: &Path) -> Result<(), CliError> {
    ensure_dir(dir)?;
    let json = serde_json::to_string_pretty(report)
        .map_err(|e| CliError::Config(format!("config: report serialization: {e}")))?;
    write(&dir.join("validation.json"), &json)
}

pub fn out_dir(cfg: &RunConfig, flag: &Option<PathBuf>) -> PathBuf {
    flag.clone().unwrap_or_else(|| PathBuf::from(&cfg.output.directory))
}
