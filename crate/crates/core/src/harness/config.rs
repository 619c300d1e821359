//! Experiment configuration: one JSON file, every field overridable from the
//! command line.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linear_margin::SolverOpts;
use crate::synthdata::{LinearSpec, XorSpec};
use crate::xor_net::TrainOpts;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Problem {
    Linear,
    Xor,
}

impl Problem {
    pub fn name(self) -> &'static str {
        match self {
            Problem::Linear => "linear",
            Problem::Xor => "xor",
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverConfig {
    pub tol: f64,
    pub max_epochs: usize,
    pub seed: u64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        let o = SolverOpts::default();
        SolverConfig { tol: o.tol, max_epochs: o.max_epochs, seed: o.seed }
    }
}

impl SolverConfig {
    pub fn to_opts(&self) -> SolverOpts {
        SolverOpts { tol: self.tol, max_epochs: self.max_epochs, seed: self.seed }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainerConfig {
    pub max_steps: usize,
    pub restarts: usize,
    pub step_size: f64,
    pub tau0: Option<f64>,
    pub tau_decay: f64,
    pub tau_floor: f64,
    pub plateau_window: usize,
    pub plateau_tol: f64,
    pub backtrack_max: usize,
}

impl Default for TrainerConfig {
    fn default() -> Self {
        let o = TrainOpts::default();
        TrainerConfig {
            max_steps: o.max_steps,
            restarts: o.restarts,
            step_size: o.step_size,
            tau0: o.tau0,
            tau_decay: o.tau_decay,
            tau_floor: o.tau_floor,
            plateau_window: o.plateau_window,
            plateau_tol: o.plateau_tol,
            backtrack_max: o.backtrack_max,
        }
    }
}

impl TrainerConfig {
    pub fn to_opts(&self, seed: u64, epsilon: f64, reference: Option<f64>) -> TrainOpts {
        TrainOpts {
            max_steps: self.max_steps,
            restarts: self.restarts,
            seed,
            step_size: self.step_size,
            tau0: self.tau0,
            tau_decay: self.tau_decay,
            tau_floor: self.tau_floor,
            plateau_window: self.plateau_window,
            plateau_tol: self.plateau_tol,
            backtrack_max: self.backtrack_max,
            epsilon,
            reference_margin: reference,
        }
    }
}

/// Grid for `sweep`: the cross product of `kappas`, `d_over_n` and (for the
/// XOR problem) `hs`, each cell run once per seed in `trials`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct SweepConfig {
    pub kappas: Vec<f64>,
    pub d_over_n: Vec<usize>,
    pub hs: Vec<f64>,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig { kappas: vec![0.25, 0.5, 1.0, 2.0, 4.0], d_over_n: vec![64], hs: vec![1.5] }
    }
}

/// Output format for record emission.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EmitFormat {
    Csv,
    Json,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub problem: Problem,
    pub n: usize,
    pub d: usize,
    /// Exactly one of `sigma` / `kappa` must be set; `kappa` is primary and
    /// `sigma` is derived as `sigma^2 = n / (d kappa)`.
    pub sigma: Option<f64>,
    pub kappa: Option<f64>,
    pub h: f64,
    pub m: usize,
    /// Seed list; one trial per seed.
    pub trials: Vec<u64>,
    pub mc_samples: usize,
    /// Max-margin certification slack.
    pub epsilon: f64,
    pub solver: SolverConfig,
    pub trainer: TrainerConfig,
    pub sweep: SweepConfig,
    /// Run demos outside their analytic band.
    pub force: bool,
    /// Construction mode for `construct`: "optimal", "no_gen" or "scaled".
    pub mode: String,
    /// Signal shrink factor for the "scaled" mode.
    pub alpha: f64,
    /// Trivariate program inputs for `opt5`.
    pub k: f64,
    pub p5: f64,
    pub grid: usize,
    pub out: Option<String>,
    pub format: EmitFormat,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            problem: Problem::Linear,
            n: 32,
            d: 1024,
            sigma: None,
            kappa: Some(2.0),
            h: 1.5,
            m: 64,
            trials: vec![1, 2, 3],
            mc_samples: 10_000,
            epsilon: 0.01,
            solver: SolverConfig::default(),
            trainer: TrainerConfig::default(),
            sweep: SweepConfig::default(),
            force: false,
            mode: "optimal".into(),
            alpha: 0.5,
            k: 1.0,
            p5: 1.0,
            grid: 60,
            out: None,
            format: EmitFormat::Csv,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        match (self.sigma, self.kappa) {
            (Some(_), Some(_)) => {
                return Err(Error::invalid("set exactly one of sigma / kappa, not both"))
            }
            (None, None) => return Err(Error::invalid("one of sigma / kappa is required")),
            _ => {}
        }
        if self.trials.is_empty() {
            return Err(Error::invalid("trials (seed list) must be non-empty"));
        }
        Ok(())
    }

    /// Noise scale, deriving from `kappa` when needed.
    pub fn resolved_sigma(&self) -> Result<f64> {
        self.validate()?;
        match (self.sigma, self.kappa) {
            (Some(s), None) => Ok(s),
            (None, Some(k)) => Ok((self.n as f64 / (self.d as f64 * k)).sqrt()),
            _ => unreachable!(),
        }
    }

    pub fn resolved_kappa(&self) -> Result<f64> {
        let sigma = self.resolved_sigma()?;
        Ok(self.n as f64 / (self.d as f64 * sigma * sigma))
    }

    pub fn linear_spec(&self) -> Result<LinearSpec> {
        LinearSpec::canonical(self.d, self.resolved_sigma()?, self.n)
    }

    pub fn xor_spec(&self) -> Result<XorSpec> {
        XorSpec::canonical(self.d, self.resolved_sigma()?, self.n, self.h, self.m)
    }

    /// A copy with a different cell in the (kappa, d/n, h) grid.
    pub fn with_cell(&self, kappa: f64, d_over_n: usize, h: f64) -> ExperimentConfig {
        let mut cfg = self.clone();
        cfg.kappa = Some(kappa);
        cfg.sigma = None;
        cfg.d = d_over_n * self.n;
        cfg.h = h;
        cfg
    }

    pub fn from_json(json: &str) -> Result<ExperimentConfig> {
        let cfg: ExperimentConfig = serde_json::from_str(json)?;
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Applies a `--key=value` override onto the JSON form of a config.
///
/// `key` may be dotted (`solver.tol`); `value` is parsed as JSON when
/// possible and treated as a bare string otherwise, so `--mode=no_gen` and
/// `--trials=[1,2,3]` both work.
pub fn apply_override(doc: &mut serde_json::Value, key: &str, value: &str) -> Result<()> {
    let parsed: serde_json::Value = match serde_json::from_str(value) {
        Ok(v) => v,
        Err(_) => serde_json::Value::String(value.to_string()),
    };
    let mut node = doc;
    let parts: Vec<&str> = key.split('.').collect();
    for (i, part) in parts.iter().enumerate() {
        let obj = node
            .as_object_mut()
            .ok_or_else(|| Error::invalid(format!("cannot set {key}: not an object")))?;
        if i + 1 == parts.len() {
            obj.insert((*part).to_string(), parsed);
            return Ok(());
        }
        node = obj
            .entry((*part).to_string())
            .or_insert_with(|| serde_json::Value::Object(Default::default()));
    }
    Ok(())
}
