//! Run configuration: one JSON file carries the plant, the abstraction
//! parameters, the simulation setup, and the output policy.

use serde::{Deserialize, Serialize};

use etcabs::{BoundsOptions, Error, InitialSet, Matrix, Plant};

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub plant: PlantConfig,
    pub abstraction: AbstractionConfig,
    pub simulation: SimulationConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlantConfig {
    pub a: Vec<Vec<f64>>,
    pub b: Vec<Vec<f64>>,
    pub k: Vec<Vec<f64>>,
    pub alpha: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AbstractionConfig {
    pub sigma_bar: f64,
    pub l: usize,
    pub n_conv: usize,
    pub m_bar: usize,
    #[serde(default = "default_nu_grid")]
    pub nu_grid: usize,
    #[serde(default = "default_nu_safety")]
    pub nu_safety: f64,
    #[serde(default = "default_flowpipe_step")]
    pub flowpipe_step: f64,
    #[serde(default = "default_doubling_cap")]
    pub eps_max_doubling_cap: usize,
    #[serde(default)]
    pub initial: InitialSpec,
}

#[derive(Clone, Debug, Serialize, Deserialize, Default)]
#[serde(untagged)]
pub enum InitialSpec {
    #[default]
    #[serde(rename = "all")]
    All,
    Regions(Vec<usize>),
}

impl InitialSpec {
    pub fn to_initial_set(&self) -> InitialSet {
        match self {
            InitialSpec::All => InitialSet::All,
            InitialSpec::Regions(v) => InitialSet::Regions(v.clone()),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationConfig {
    pub horizon: f64,
    pub trace_count: usize,
    pub seed: u64,
    /// Triggering-scan resolution; defaults to sigma_bar / 1e4.
    #[serde(default)]
    pub scan_dt: Option<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default = "default_out_dir")]
    pub directory: String,
    #[serde(default = "default_formats")]
    pub formats: Vec<String>,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig { directory: default_out_dir(), formats: default_formats() }
    }
}

fn default_nu_grid() -> usize {
    16
}
fn default_nu_safety() -> f64 {
    1.5
}
fn default_flowpipe_step() -> f64 {
    0.01
}
fn default_doubling_cap() -> usize {
    60
}
fn default_out_dir() -> String {
    "out".to_string()
}
fn default_formats() -> Vec<String> {
    vec!["csv".to_string(), "json".to_string(), "xml".to_string()]
}

impl RunConfig {
    pub fn from_path(path: &std::path::Path) -> Result<Self, String> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| format!("config: cannot read {}: {e}", path.display()))?;
        let cfg: RunConfig =
            serde_json::from_str(&text).map_err(|e| format!("config: {e}"))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Field-by-field sanity with messages naming the offending field.
    pub fn validate(&self) -> Result<(), String> {
        let n = self.plant.a.len();
        if n == 0 || self.plant.a.iter().any(|r| r.len() != n) {
            return Err("config: plant.a must be a non-empty square matrix".into());
        }
        if self.plant.b.len() != n {
            return Err("config: plant.b must have one row per state".into());
        }
        if self.plant.k.iter().any(|r| r.len() != n) {
            return Err("config: plant.k rows must match the state dimension".into());
        }
        if !(self.plant.alpha > 0.0 && self.plant.alpha < 1.0) {
            return Err("config: plant.alpha must lie in (0, 1)".into());
        }
        let a = &self.abstraction;
        if !(a.sigma_bar > 0.0) {
            return Err("config: abstraction.sigma_bar must be positive".into());
        }
        if a.l < 1 {
            return Err("config: abstraction.l must be at least 1".into());
        }
        if a.n_conv < 1 {
            return Err("config: abstraction.n_conv must be at least 1".into());
        }
        if a.m_bar < 1 {
            return Err("config: abstraction.m_bar must be at least 1".into());
        }
        if a.nu_grid < 2 {
            return Err("config: abstraction.nu_grid must be at least 2".into());
        }
        if a.nu_safety < 1.0 {
            return Err("config: abstraction.nu_safety must be at least 1".into());
        }
        if !(a.flowpipe_step > 0.0) {
            return Err("config: abstraction.flowpipe_step must be positive".into());
        }
        if let InitialSpec::Regions(list) = &a.initial {
            if list.is_empty() {
                return Err("config: abstraction.initial must name at least one region".into());
            }
        }
        let s = &self.simulation;
        if !(s.horizon > 0.0) {
            return Err("config: simulation.horizon must be positive".into());
        }
        if s.trace_count < 1 {
            return Err("config: simulation.trace_count must be at least 1".into());
        }
        if let Some(dt) = s.scan_dt {
            if !(dt > 0.0) {
                return Err("config: simulation.scan_dt must be positive".into());
            }
        }
        Ok(())
    }

    pub fn plant(&self) -> Result<Plant, Error> {
        let n = self.plant.a.len();
        let m = self.plant.b.first().map(|r| r.len()).unwrap_or(0);
        let rows =
            |v: &[Vec<f64>]| -> Vec<Vec<f64>> { v.to_vec() };
        let a = Matrix::from_rows(&rows(&self.plant.a))?;
        let b = if m == 0 {
            Matrix::zeros(n, 1)
        } else {
            Matrix::from_rows(&rows(&self.plant.b))?
        };
        let k = Matrix::from_rows(&rows(&self.plant.k))?;
        Plant::new(a, b, k, self.plant.alpha)
    }

    pub fn bounds_options(&self) -> BoundsOptions {
        BoundsOptions {
            grid_per_cell: self.abstraction.nu_grid,
            nu_safety: self.abstraction.nu_safety,
            eps_max_doubling_cap: self.abstraction.eps_max_doubling_cap,
            ..BoundsOptions::default()
        }
    }

    pub fn scan_dt(&self) -> f64 {
        self.simulation
            .scan_dt
            .unwrap_or(self.abstraction.sigma_bar / 1e4)
    }

    /// Canonical serialized form; parsing then re-serializing a config file
    /// yields exactly this.
    #[cfg_attr(not(test), allow(dead_code))]
    pub fn normalized(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }
}
