//! The one-row-per-trial record that sweeps and demos emit.

use serde::{Deserialize, Serialize};

/// Every measured quantity of one experiment trial. Fields that do not apply
/// to the problem at hand stay `None` and serialize as empty CSV cells.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct TrialRecord {
    pub problem: String,
    pub n: usize,
    pub d: usize,
    pub sigma: f64,
    pub kappa: f64,
    pub h: Option<f64>,
    pub m: Option<usize>,
    pub seed: u64,
    /// Analytic region label from the thresholds module.
    pub region: String,
    /// Certified `gamma*(S)` (linear only).
    pub gamma_star: Option<f64>,
    /// Margin of the algorithmic solution (solver / trainer output).
    pub margin_trained: Option<f64>,
    /// Margin of the pure-signal construction.
    pub margin_good: Option<f64>,
    /// Margin of the pure-noise construction.
    pub margin_bad: Option<f64>,
    /// Margin of the combined construction (mixture / chained network).
    pub margin_constructed: Option<f64>,
    pub train_err: Option<f64>,
    pub test_err: Option<f64>,
    pub err_psi_s: Option<f64>,
    pub err_psibar_s: Option<f64>,
    pub err_psi_d: Option<f64>,
    /// `q / sqrt(kappa)` of the trained model (linear only).
    pub q_ratio: Option<f64>,
    /// Cross-cluster mass `D` of the trained network (XOR only).
    pub cross_mass_d: Option<f64>,
    pub status: String,
    pub wall_time_ms: u64,
}

impl TrialRecord {
    pub fn ok(&self) -> bool {
        self.status == "ok"
    }

    /// Sort key used to keep emission order independent of scheduling.
    pub fn cell_key(&self) -> (String, u64, u64, u64, u64) {
        (
            self.problem.clone(),
            self.kappa.to_bits(),
            self.d as u64,
            self.h.unwrap_or(f64::NAN).to_bits(),
            self.seed,
        )
    }
}
