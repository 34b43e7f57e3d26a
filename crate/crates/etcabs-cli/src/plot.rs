//! Hand-rolled SVG charts: interval bars per region, a polar view of the
//! planar covering, a tau scatter over the certified intervals, and the
//! transition dot matrix. Each chart gets a CSV with its underlying data.

use std::path::Path;

use etcabs::{Partition, RegionalBounds, TrafficAutomaton};

use crate::pipeline::{CliError, SimulatedTrace};

const W: f64 = 720.0;
const H: f64 = 480.0;
const MARGIN: f64 = 50.0;

fn svg_open() -> String {
    format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{W}\" height=\"{H}\" \
         viewBox=\"0 0 {W} {H}\">\n<rect width=\"{W}\" height=\"{H}\" fill=\"white\"/>\n"
    )
}

fn axis_frame() -> String {
    format!(
        "<rect x=\"{MARGIN}\" y=\"{MARGIN}\" width=\"{}\" height=\"{}\" \
         fill=\"none\" stroke=\"black\"/>\n",
        W - 2.0 * MARGIN,
        H - 2.0 * MARGIN
    )
}

fn x_of(region: usize, q: usize) -> f64 {
    MARGIN + (W - 2.0 * MARGIN) * (region as f64 + 0.5) / q as f64
}

fn y_of(tau: f64, tau_max: f64) -> f64 {
    H - MARGIN - (H - 2.0 * MARGIN) * tau / tau_max
}

/// Interval bar per region: lower and upper certified bounds.
pub fn bounds_chart(bounds: &[RegionalBounds]) -> String {
    let q = bounds.len();
    let tau_max = bounds.iter().map(|b| b.tau_hi).fold(0.0, f64::max) * 1.1;
    let mut svg = svg_open();
    svg.push_str(&axis_frame());
    for b in bounds {
        let x = x_of(b.region, q);
        let y_lo = y_of(b.tau_lo, tau_max);
        let y_hi = y_of(b.tau_hi, tau_max);
        svg.push_str(&format!(
            "<line x1=\"{x:.2}\" y1=\"{y_lo:.2}\" x2=\"{x:.2}\" y2=\"{y_hi:.2}\" \
             stroke=\"steelblue\" stroke-width=\"4\"/>\n"
        ));
        svg.push_str(&format!(
            "<circle cx=\"{x:.2}\" cy=\"{y_lo:.2}\" r=\"3\" fill=\"darkblue\"/>\n\
             <circle cx=\"{x:.2}\" cy=\"{y_hi:.2}\" r=\"3\" fill=\"firebrick\"/>\n"
        ));
        svg.push_str(&format!(
            "<text x=\"{x:.2}\" y=\"{:.2}\" font-size=\"9\" text-anchor=\"middle\">{}</text>\n",
            H - MARGIN + 14.0,
            b.region
        ));
    }
    svg.push_str(&format!(
        "<text x=\"{:.2}\" y=\"20\" font-size=\"13\" text-anchor=\"middle\">\
         certified inter-sample bounds per region</text>\n",
        W / 2.0
    ));
    svg.push_str("</svg>\n");
    svg
}

/// Planar covering drawn as sector wedges shaded by the lower bound.
/// Only meaningful for two-dimensional plants.
pub fn polar_view(part: &Partition, bounds: &[RegionalBounds]) -> Option<String> {
    if part.n != 2 {
        return None;
    }
    let (cx, cy, r) = (W / 2.0, H / 2.0, (H / 2.0 - MARGIN).max(10.0));
    let lo_min = bounds.iter().map(|b| b.tau_lo).fold(f64::INFINITY, f64::min);
    let lo_max = bounds.iter().map(|b| b.tau_lo).fold(0.0, f64::max);
    let span = (lo_max - lo_min).max(1e-12);
    let mut svg = svg_open();
    for b in bounds {
        let (a0, a1) = part.regions[b.region].angular_box[0];
        let shade = ((b.tau_lo - lo_min) / span * 200.0) as u8;
        let (x0, y0) = (cx + r * a0.cos(), cy - r * a0.sin());
        let (x1, y1) = (cx + r * a1.cos(), cy - r * a1.sin());
        svg.push_str(&format!(
            "<path d=\"M {cx:.2} {cy:.2} L {x0:.2} {y0:.2} A {r:.2} {r:.2} 0 0 0 \
             {x1:.2} {y1:.2} Z\" fill=\"rgb({},{},230)\" stroke=\"black\" \
             stroke-width=\"0.5\"/>\n",
            55 + shade / 2,
            55 + shade
        ));
    }
    svg.push_str(&format!(
        "<text x=\"{:.2}\" y=\"20\" font-size=\"13\" text-anchor=\"middle\">\
         conic covering shaded by lower bound</text>\n",
        W / 2.0
    ));
    svg.push_str("</svg>\n");
    Some(svg)
}

/// Simulated inter-sample times scattered over the certified intervals.
pub fn tau_scatter(bounds: &[RegionalBounds], traces: &[SimulatedTrace]) -> String {
    let q = bounds.len();
    let tau_max = bounds.iter().map(|b| b.tau_hi).fold(0.0, f64::max) * 1.1;
    let mut svg = svg_open();
    svg.push_str(&axis_frame());
    for b in bounds {
        let x = x_of(b.region, q);
        svg.push_str(&format!(
            "<line x1=\"{x:.2}\" y1=\"{:.2}\" x2=\"{x:.2}\" y2=\"{:.2}\" \
             stroke=\"lightgray\" stroke-width=\"6\"/>\n",
            y_of(b.tau_lo, tau_max),
            y_of(b.tau_hi, tau_max)
        ));
    }
    for st in traces {
        for (ev, region) in st.trace.events.iter().zip(&st.regions) {
            svg.push_str(&format!(
                "<circle cx=\"{:.2}\" cy=\"{:.2}\" r=\"1.5\" fill=\"firebrick\"/>\n",
                x_of(*region, q),
                y_of(ev.tau, tau_max)
            ));
        }
    }
    svg.push_str(&format!(
        "<text x=\"{:.2}\" y=\"20\" font-size=\"13\" text-anchor=\"middle\">\
         simulated inter-sample times over certified intervals</text>\n",
        W / 2.0
    ));
    svg.push_str("</svg>\n");
    svg
}

/// Dot matrix of the automaton edges: a dot at (src, dst) iff the edge exists.
pub fn transition_matrix(automaton: &TrafficAutomaton) -> String {
    let q = automaton.locations.len();
    let cell = (W.min(H) - 2.0 * MARGIN) / q as f64;
    let mut svg = svg_open();
    for e in &automaton.edges {
        let x = MARGIN + (e.dst as f64 + 0.5) * cell;
        let y = MARGIN + (e.src as f64 + 0.5) * cell;
        svg.push_str(&format!(
            "<circle cx=\"{x:.2}\" cy=\"{y:.2}\" r=\"{:.2}\" fill=\"black\"/>\n",
            (cell * 0.3).min(5.0)
        ));
    }
    svg.push_str(&format!(
        "<rect x=\"{MARGIN}\" y=\"{MARGIN}\" width=\"{:.2}\" height=\"{:.2}\" \
         fill=\"none\" stroke=\"black\"/>\n",
        cell * q as f64,
        cell * q as f64
    ));
    svg.push_str(&format!(
        "<text x=\"{:.2}\" y=\"20\" font-size=\"13\" text-anchor=\"middle\">\
         transition matrix (row: source, column: target)</text>\n",
        W / 2.0
    ));
    svg.push_str("</svg>\n");
    svg
}

pub fn scatter_csv(traces: &[SimulatedTrace]) -> String {
    let mut out = String::from("region,tau\n");
    for st in traces {
        for (ev, region) in st.trace.events.iter().zip(&st.regions) {
            out.push_str(&format!("{region},{}\n", ev.tau));
        }
    }
    out
}

pub fn transitions_csv(automaton: &TrafficAutomaton) -> String {
    let mut out = String::from("src,dst\n");
    for e in &automaton.edges {
        out.push_str(&format!("{},{}\n", e.src, e.dst));
    }
    out
}

pub fn write_plots(
    part: &Partition,
    bounds: &[RegionalBounds],
    automaton: &TrafficAutomaton,
    traces: &[SimulatedTrace],
    dir: &Path,
) -> Result<(), CliError> {
    let w = |name: &str, text: &str| -> Result<(), CliError> {
        std::fs::write(dir.join(name), text).map_err(|e| {
            CliError::Config(format!("config: cannot write {}: {e}", dir.join(name).display()))
        })
    };
    std::fs::create_dir_all(dir)
        .map_err(|e| CliError::Config(format!("config: cannot create {}: {e}", dir.display())))?;
    w("bounds.svg", &bounds_chart(bounds))?;
    match polar_view(part, bounds) {
        Some(svg) => w("polar.svg", &svg)?,
        None => eprintln!("polar view skipped: state dimension is not 2"),
    }
    w("scatter.svg", &tau_scatter(bounds, traces))?;
    w("transitions.svg", &transition_matrix(automaton))?;
    w("scatter.csv", &scatter_csv(traces))?;
    w("transitions.csv", &transitions_csv(automaton))?;
    Ok(())
}
