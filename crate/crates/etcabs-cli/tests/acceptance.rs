//! End-to-end acceptance checks. Each test prints a single PASS/FAIL line
//! for its criterion; run with `--nocapture` to see them all.

use std::process::Command;
use std::sync::OnceLock;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use etcabs::bounds::{vertex_matrices_lower, vertex_matrices_upper};
use etcabs::linalg::{lambda_max, sym_eig_extremes};
use etcabs::quotient::REPLAY_TOL;
use etcabs::reachability::ReachabilityResult;
use etcabs::{
    build_embedding, build_quotient, compute_all_bounds, compute_transitions, isotropic_cover,
    BoundsOptions, EmbeddingTables, InitialSet, Matrix, Multiplier, Partition, Plant,
    QuotientSystem, RegionalBounds, Vector,
};

const SIGMA_BAR: f64 = 1.0;
const L: usize = 100;
const N_CONV: usize = 5;
const M_BAR: usize = 10;

fn reference_plant() -> Plant {
    Plant::new(
        Matrix::from_rows(&[vec![0.0, 1.0], vec![-2.0, 3.0]]).unwrap(),
        Matrix::from_rows(&[vec![0.0], vec![1.0]]).unwrap(),
        Matrix::from_rows(&[vec![1.0, -4.0]]).unwrap(),
        0.05,
    )
    .unwrap()
}

struct Baseline {
    plant: Plant,
    part: Partition,
    tab: EmbeddingTables,
    bounds: Vec<RegionalBounds>,
    #[allow(dead_code)]
    reach: ReachabilityResult,
    quotient: QuotientSystem,
    epsilon: f64,
    build_seconds: f64,
}

static BASELINE: OnceLock<Baseline> = OnceLock::new();

fn baseline() -> &'static Baseline {
    BASELINE.get_or_init(|| {
        let start = Instant::now();
        let plant = reference_plant();
        let opts = BoundsOptions::default();
        let part = isotropic_cover(2, M_BAR).unwrap();
        let tab = build_embedding(&plant, SIGMA_BAR, L, N_CONV, &opts).unwrap();
        let bounds = compute_all_bounds(&tab, &part, &opts).unwrap();
        let reach = compute_transitions(&plant, &part, &bounds, 0.01).unwrap();
        let quotient = build_quotient(&part, &bounds, &reach.successors, &InitialSet::All).unwrap();
        let epsilon = quotient.automaton.epsilon;
        Baseline {
            plant,
            part,
            tab,
            bounds,
            reach,
            quotient,
            epsilon,
            build_seconds: start.elapsed().as_secs_f64(),
        }
    })
}

fn criterion(n: u32, name: &str, f: impl FnOnce() -> Result<String, String>) {
    match f() {
        Ok(detail) => println!("criterion {n}: PASS - {name} ({detail})"),
        Err(e) => {
            println!("criterion {n}: FAIL - {name}: {e}");
            panic!("criterion {n} failed: {e}");
        }
    }
}

fn seeded_unit_states(seed: u64, count: usize) -> Vec<Vector> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| loop {
            let v = Vector::new(vec![rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)]);
            if v.norm() > 0.2 {
                break v.normalized().unwrap();
            }
        })
        .collect()
}

#[test]
fn criterion_1_reference_reproduction() {
    criterion(1, "reference-example reproduction", || {
        let b = baseline();
        if b.part.len() != 20 {
            return Err(format!("expected 20 regions, got {}", b.part.len()));
        }
        if let Some(bad) = b.bounds.iter().find(|r| !(r.tau_lo > 0.0)) {
            return Err(format!("region {} has nonpositive lower bound", bad.region));
        }
        if !(0.089..=0.149).contains(&b.epsilon) {
            return Err(format!("epsilon {} outside [0.089, 0.149]", b.epsilon));
        }
        if b.build_seconds >= 60.0 {
            return Err(format!("pipeline took {:.1} s (limit 60)", b.build_seconds));
        }
        Ok(format!("epsilon = {:.4} in {:.1} s", b.epsilon, b.build_seconds))
    });
}

#[test]
fn criterion_2_refined_partition() {
    criterion(2, "refined-partition precision", || {
        let b = baseline();
        let start = Instant::now();
        let opts = BoundsOptions::default();
        let part = isotropic_cover(2, 100).unwrap();
        let bounds = compute_all_bounds(&b.tab, &part, &opts).unwrap();
        let eps = bounds.iter().map(|r| r.tau_hi - r.tau_lo).fold(0.0, f64::max);
        let secs = start.elapsed().as_secs_f64();
        if !(0.006..=0.036).contains(&eps) {
            return Err(format!("epsilon' {eps} outside [0.006, 0.036]"));
        }
        if eps >= b.epsilon {
            return Err(format!("epsilon' {eps} not below epsilon {}", b.epsilon));
        }
        if secs >= 600.0 {
            return Err(format!("took {secs:.1} s (limit 600)"));
        }
        Ok(format!("epsilon' = {eps:.4} < {:.4} in {secs:.1} s", b.epsilon))
    });
}

#[test]
fn criterion_3_refinement_monotonicity() {
    criterion(3, "refinement monotonicity", || {
        let b = baseline();
        let opts = BoundsOptions::default();
        let fine_part = isotropic_cover(2, 2 * M_BAR).unwrap();
        let fine = compute_all_bounds(&b.tab, &fine_part, &opts).unwrap();
        let eps_fine = fine.iter().map(|r| r.tau_hi - r.tau_lo).fold(0.0, f64::max);
        if eps_fine > b.epsilon + 1e-9 {
            return Err(format!(
                "epsilon(20) = {eps_fine} exceeds epsilon(10) = {}",
                b.epsilon
            ));
        }
        for fb in &fine {
            let (a0, a1) = fine_part.regions[fb.region].angular_box[0];
            let mid = 0.5 * (a0 + a1);
            let ray = Vector::new(vec![mid.cos(), mid.sin()]);
            let parent = b.part.locate_region(&ray).unwrap();
            let pb = &b.bounds[parent];
            if fb.tau_lo < pb.tau_lo - 1e-9 || fb.tau_hi > pb.tau_hi + 1e-9 {
                return Err(format!(
                    "refined region {} interval [{}, {}] escapes parent {} [{}, {}]",
                    fb.region, fb.tau_lo, fb.tau_hi, parent, pb.tau_lo, pb.tau_hi
                ));
            }
        }
        Ok(format!("epsilon(20) = {eps_fine:.4} <= epsilon(10) = {:.4}", b.epsilon))
    });
}

#[test]
fn criterion_4_containment_soundness() {
    criterion(4, "trace containment via validate", || {
        let dir = std::env::temp_dir().join("etcabs-acceptance-c4");
        std::fs::create_dir_all(&dir).map_err(|e| e.to_string())?;
        let config = dir.join("config.json");
        std::fs::write(&config, reference_config_json(&dir)).map_err(|e| e.to_string())?;
        let out = Command::new(env!("CARGO_BIN_EXE_etcabs"))
            .args(["validate", "--config"])
            .arg(&config)
            .arg("--out")
            .arg(&dir)
            .output()
            .map_err(|e| e.to_string())?;
        if !out.status.success() {
            return Err(format!(
                "validate exited {:?}: {}",
                out.status.code(),
                String::from_utf8_lossy(&out.stderr)
            ));
        }
        let report: serde_json::Value = serde_json::from_str(
            &std::fs::read_to_string(dir.join("validation.json")).map_err(|e| e.to_string())?,
        )
        .map_err(|e| e.to_string())?;
        let violations = report["violation_count"].as_u64().unwrap_or(u64::MAX);
        let traces = report["traces"].as_u64().unwrap_or(0);
        if traces != 100 || violations != 0 {
            return Err(format!("{violations} violations across {traces} traces"));
        }
        Ok("100 traces, 0 violations, exit 0".to_string())
    });
}

#[test]
fn criterion_5_transition_soundness() {
    criterion(5, "transition soundness and coverage", || {
        let b = baseline();
        let mut seen = std::collections::BTreeSet::new();
        for x0 in seeded_unit_states(7, 100) {
            let trace = b.plant.simulate_traffic(&x0, 5.0, SIGMA_BAR, 1e-4).unwrap();
            let regions: Vec<usize> = trace
                .events
                .iter()
                .map(|ev| b.part.locate_region(&ev.state).unwrap())
                .collect();
            for pair in regions.windows(2) {
                if !b.quotient.automaton.has_edge(pair[0], pair[1]) {
                    return Err(format!("observed step {} -> {} has no edge", pair[0], pair[1]));
                }
                seen.insert((pair[0], pair[1]));
            }
        }
        let coverage = seen.len() as f64 / b.quotient.automaton.edges.len() as f64;
        if coverage > 1.0 {
            return Err(format!("coverage ratio {coverage} exceeds 1"));
        }
        Ok(format!("coverage ratio {coverage:.3}"))
    });
}

#[test]
fn criterion_6_oracle_equivalence() {
    criterion(6, "closed-form tau vs dense integration", || {
        let p = reference_plant();
        let mut worst = 0.0f64;
        for x0 in seeded_unit_states(11, 50) {
            let closed = p.inter_sample_time(&x0, SIGMA_BAR, 1e-5).unwrap();
            let dense = rk4_trigger_time(&p, &x0, SIGMA_BAR, 1e-6)
                .ok_or_else(|| "dense integration never triggered".to_string())?;
            let gap = (closed - dense).abs();
            worst = worst.max(gap);
            if gap > 2e-5 {
                return Err(format!("tau mismatch {gap:.2e} at state {:?}", x0.data()));
            }
        }
        Ok(format!("worst mismatch {worst:.2e}"))
    });
}

/// Independent oracle: integrate the held-input loop with RK4 and bracket
/// the first zero of |x0 - xi|^2 - alpha |xi|^2 by linear interpolation.
fn rk4_trigger_time(p: &Plant, x0: &Vector, horizon: f64, dt: f64) -> Option<f64> {
    let bk = (&p.b * &p.k).mul_vec(x0).unwrap();
    let f = |x: &Vector| p.a.mul_vec(x).unwrap().add(&bk);
    let trigger = |xi: &Vector| {
        let e = x0.sub(xi);
        e.dot(&e) - p.alpha * xi.dot(xi)
    };
    let steps = (horizon / dt).ceil() as usize;
    let h = horizon / steps as f64;
    let mut xi = x0.clone();
    let mut prev = trigger(&xi);
    for s in 0..steps {
        let k1 = f(&xi);
        let k2 = f(&xi.add(&k1.scale(h / 2.0)));
        let k3 = f(&xi.add(&k2.scale(h / 2.0)));
        let k4 = f(&xi.add(&k3.scale(h)));
        xi = xi.add(&k1.add(&k2.scale(2.0)).add(&k3.scale(2.0)).add(&k4).scale(h / 6.0));
        let cur = trigger(&xi);
        if prev < 0.0 && cur >= 0.0 {
            let t0 = s as f64 * h;
            return Some(t0 + h * prev / (prev - cur));
        }
        prev = cur;
    }
    None
}

#[test]
fn criterion_7_analytic_checks() {
    criterion(7, "analytic identities", || {
        let p = reference_plant();
        let phi0 = p.phi_at(0.0).unwrap();
        let expected = Matrix::identity(2).scale(-p.alpha);
        let gap = (&phi0 - &expected).norm_max_abs();
        if gap > 1e-12 {
            return Err(format!("Phi(0) deviates from -alpha I by {gap:.2e}"));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let mut worst = 0.0f64;
        for _ in 0..100 {
            let (a, bb, c) = (
                rng.gen_range(-5.0..5.0),
                rng.gen_range(-5.0..5.0),
                rng.gen_range(-5.0..5.0),
            );
            let m = Matrix::from_rows(&[vec![a, bb], vec![bb, c]]).unwrap();
            let (lo, hi, _) = sym_eig_extremes(&m).unwrap();
            // independent closed form: roots of l^2 - tr l + det
            let tr = a + c;
            let det = a * c - bb * bb;
            let disc = (tr * tr - 4.0 * det).max(0.0).sqrt();
            let (want_lo, want_hi) = ((tr - disc) / 2.0, (tr + disc) / 2.0);
            worst = worst.max((lo - want_lo).abs()).max((hi - want_hi).abs());
        }
        if worst > 1e-10 {
            return Err(format!("eigen extremes off by {worst:.2e}"));
        }
        Ok(format!("Phi(0) exact to {gap:.1e}, eigenvalues to {worst:.1e}"))
    });
}

#[test]
fn criterion_8_lmi_soundness_sampling() {
    criterion(8, "certified LMI sampling", || {
        let b = baseline();
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        let mut checked = 0usize;
        for rb in &b.bounds {
            let region = &b.part.regions[rb.region];
            let q = region.q.as_ref().ok_or("planar regions carry Q")?;
            let lower = vertex_matrices_lower(&b.tab, rb.tau_lo);
            let upper = vertex_matrices_upper(&b.tab, rb.tau_hi);
            // multipliers certify their LMIs directly
            for (cert, (_, m)) in rb.lower_certificates.iter().zip(&lower) {
                let Multiplier::Scalar(eps) = cert.multiplier else {
                    return Err("expected scalar multiplier".into());
                };
                let margin = lambda_max(&(m + &q.scale(eps)).symmetrize());
                if margin > 1e-9 {
                    return Err(format!("lower certificate margin {margin:.2e}"));
                }
                checked += 1;
            }
            for (cert, (_, m)) in rb.upper_certificates.iter().zip(&upper) {
                let Multiplier::Scalar(eps) = cert.multiplier else {
                    return Err("expected scalar multiplier".into());
                };
                let margin = lambda_max(&(&m.scale(-1.0) + &q.scale(eps)).symmetrize());
                if margin > 1e-9 {
                    return Err(format!("upper certificate margin {margin:.2e}"));
                }
                checked += 1;
            }
            // sampled cone directions satisfy the signed quadratic forms
            let (a0, a1) = region.angular_box[0];
            for _ in 0..10_000 {
                let th = rng.gen_range(a0..a1);
                let x = Vector::new(vec![th.cos(), th.sin()]);
                for (_, m) in &lower {
                    if m.quad_form(&x) > 1e-6 {
                        return Err(format!(
                            "lower vertex positive on cone of region {}",
                            rb.region
                        ));
                    }
                }
                for (_, m) in &upper {
                    if m.quad_form(&x) < -1e-6 {
                        return Err(format!(
                            "upper vertex negative on cone of region {}",
                            rb.region
                        ));
                    }
                }
            }
        }
        Ok(format!("{checked} certificates verified"))
    });
}

#[test]
fn criterion_9_determinism() {
    criterion(9, "byte-identical artifacts", || {
        let base = std::env::temp_dir().join("etcabs-acceptance-c9");
        let (dir_a, dir_b) = (base.join("a"), base.join("b"));
        std::fs::create_dir_all(&dir_a).map_err(|e| e.to_string())?;
        std::fs::create_dir_all(&dir_b).map_err(|e| e.to_string())?;
        let config = base.join("config.json");
        std::fs::write(&config, small_config_json()).map_err(|e| e.to_string())?;
        for (sub, dir) in [("abstract", &dir_a), ("abstract", &dir_b), ("simulate", &dir_a), ("simulate", &dir_b)] {
            let out = Command::new(env!("CARGO_BIN_EXE_etcabs"))
                .args([sub, "--config"])
                .arg(&config)
                .arg("--out")
                .arg(dir)
                .output()
                .map_err(|e| e.to_string())?;
            if !out.status.success() {
                return Err(format!(
                    "{sub} failed: {}",
                    String::from_utf8_lossy(&out.stderr)
                ));
            }
        }
        for file in [
            "bounds.csv",
            "bounds.json",
            "flowpipes.json",
            "automaton.json",
            "automaton.xml",
            "traces.csv",
            "simulation.json",
        ] {
            let a = std::fs::read(dir_a.join(file)).map_err(|e| format!("{file}: {e}"))?;
            let b = std::fs::read(dir_b.join(file)).map_err(|e| format!("{file}: {e}"))?;
            if a != b {
                return Err(format!("{file} differs between identical runs"));
            }
        }
        Ok("7 artifacts byte-identical across runs".to_string())
    });
}

fn reference_config_json(out_dir: &std::path::Path) -> String {
    format!(
        r#"{{
  "plant": {{ "a": [[0.0, 1.0], [-2.0, 3.0]], "b": [[0.0], [1.0]], "k": [[1.0, -4.0]], "alpha": 0.05 }},
  "abstraction": {{ "sigma_bar": 1.0, "l": 100, "n_conv": 5, "m_bar": 10 }},
  "simulation": {{ "horizon": 5.0, "trace_count": 100, "seed": 7 }},
  "output": {{ "directory": {:?} }}
}}"#,
        out_dir.to_string_lossy()
    )
}

fn small_config_json() -> String {
    r#"{
  "plant": { "a": [[0.0, 1.0], [-2.0, 3.0]], "b": [[0.0], [1.0]], "k": [[1.0, -4.0]], "alpha": 0.05 },
  "abstraction": { "sigma_bar": 1.0, "l": 50, "n_conv": 5, "m_bar": 6 },
  "simulation": { "horizon": 2.0, "trace_count": 10, "seed": 3 }
}"#
    .to_string()
}
