//! The two headline demonstrations: a uniform-convergence failure witness
//! and the vacuity of margin-proportional bounds.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::harness::config::{ExperimentConfig, Problem};
use crate::linear_margin::{
    construct_bad, margin_report, solve_max_margin_with, test_error,
};
use crate::opt_chain::{
    construct_network, opposite_margin_audit, ConstructMode, KAPPA_UC_LINEAR, KAPPA_UC_XOR,
};
use crate::rng;
use crate::synthdata::{opposite_linear, sample_linear, sample_xor, OppositeVariant};
use crate::xor_net::{normalized_margin, train_max_margin, xor_test_error};

fn error_fraction(per_sample: &[f64]) -> f64 {
    per_sample.iter().filter(|&&m| m <= 0.0).count() as f64 / per_sample.len() as f64
}

/// Checks the UC band `kappa_gen < kappa < kappa_uc` for the configured
/// problem; demos refuse to run outside it unless forced.
pub fn in_uc_band(cfg: &ExperimentConfig) -> Result<bool> {
    let kappa = cfg.resolved_kappa()?;
    Ok(match cfg.problem {
        Problem::Linear => kappa > 0.0 && kappa < KAPPA_UC_LINEAR,
        Problem::Xor => {
            let kgen = crate::opt_chain::kappa_gen_xor(cfg.h)?;
            kappa > kgen && kappa < KAPPA_UC_XOR
        }
    })
}

fn check_band(cfg: &ExperimentConfig, demo: &str) -> Result<()> {
    if !in_uc_band(cfg)? && !cfg.force {
        return Err(Error::invalid(format!(
            "{demo}: kappa = {:.4} is outside the (kappa_gen, kappa_uc) band; pass --force=true to run anyway",
            cfg.resolved_kappa()?
        )));
    }
    Ok(())
}

/// Per-seed row of the UC-failure demo.
#[derive(Debug, Clone, Serialize)]
pub struct UcSeedRow {
    pub seed: u64,
    pub train_err: f64,
    pub test_err: f64,
    /// Accuracy on the signal-flipped training set.
    pub acc_psi_s: f64,
    /// Error on the noise-negated training set (linear only).
    pub err_psibar_s: Option<f64>,
    /// Monte-Carlo error on the opposite distribution (XOR only).
    pub err_psi_d: Option<f64>,
    /// Empirical one-sided UC witness.
    pub witness: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct UcDemoRecord {
    pub problem: String,
    pub kappa: f64,
    pub rows: Vec<UcSeedRow>,
    /// Worst witness across seeds.
    pub witness_min: f64,
}

/// Trains on `S` and measures how the learned model behaves on the opposite
/// dataset and the opposite distribution. The reported witness is the
/// one-sided gap `L_{psi(D)} - L_{psi(S)}`, both measurable quantities.
pub fn uc_failure_demo(cfg: &ExperimentConfig) -> Result<UcDemoRecord> {
    cfg.validate()?;
    check_band(cfg, "uc-demo")?;
    let mut rows = Vec::new();
    for &seed in &cfg.trials {
        rows.push(match cfg.problem {
            Problem::Linear => uc_linear_row(cfg, seed)?,
            Problem::Xor => uc_xor_row(cfg, seed)?,
        });
    }
    let witness_min = rows.iter().map(|r| r.witness).fold(f64::INFINITY, f64::min);
    Ok(UcDemoRecord {
        problem: cfg.problem.name().into(),
        kappa: cfg.resolved_kappa()?,
        rows,
        witness_min,
    })
}

fn uc_linear_row(cfg: &ExperimentConfig, seed: u64) -> Result<UcSeedRow> {
    let spec = cfg.linear_spec()?;
    let ds = sample_linear(&spec, rng::derive_seed(seed, rng::tags::DATA))?;
    let mut opts = cfg.solver.to_opts();
    opts.seed = seed;
    let sol = solve_max_margin_with(&ds, &opts)?;
    let test_err = test_error(&sol.model, &spec, cfg.mc_samples, seed)?.empirical;
    let psi = opposite_linear(&ds, &spec, OppositeVariant::Psi)?;
    let acc_psi_s = 1.0 - error_fraction(&margin_report(&sol.model, &psi).per_sample);
    let psi_bar = opposite_linear(&ds, &spec, OppositeVariant::PsiBar)?;
    let err_psibar_s = error_fraction(&margin_report(&sol.model, &psi_bar).per_sample);
    // L_{psi(D)}(w) = 1 - L_D(w) by the label flip; L_{psi(S)}(w) = 1 - acc.
    let witness = (1.0 - test_err) - (1.0 - acc_psi_s);
    Ok(UcSeedRow {
        seed,
        train_err: error_fraction(&sol.report.per_sample),
        test_err,
        acc_psi_s,
        err_psibar_s: Some(err_psibar_s),
        err_psi_d: None,
        witness,
    })
}

fn uc_xor_row(cfg: &ExperimentConfig, seed: u64) -> Result<UcSeedRow> {
    let spec = cfg.xor_spec()?;
    let ds = sample_xor(&spec, rng::derive_seed(seed, rng::tags::DATA))?;
    let constructed = construct_network(&ds, &spec, ConstructMode::Optimal)?;
    let reference = normalized_margin(&constructed, &ds).normalized_margin;
    let opts = cfg.trainer.to_opts(seed, cfg.epsilon, Some(reference));
    let trained = train_max_margin(&ds, &spec, &opts)?;
    let test_err = xor_test_error(&trained.net, &spec, cfg.mc_samples, seed)?;
    let audit = opposite_margin_audit(&trained.net, &ds, &spec, cfg.mc_samples, seed)?;
    let witness = audit.err_psi_d - audit.err_psi_s;
    Ok(UcSeedRow {
        seed,
        train_err: error_fraction(&trained.report.per_sample),
        test_err,
        acc_psi_s: 1.0 - audit.err_psi_s,
        err_psibar_s: None,
        err_psi_d: Some(audit.err_psi_d),
        witness,
    })
}

/// Per-seed row of the margin-vacuity demo.
#[derive(Debug, Clone, Serialize)]
pub struct MarginVacuityRow {
    pub seed: u64,
    /// Linear: `margin(w_b) / gamma*(S)`. XOR: `gamma(f, psi(S)) / gamma(f, S)`
    /// of the constructed near-max-margin network.
    pub margin_ratio: f64,
    /// Test error of the large-margin-but-bad classifier on the distribution
    /// it should be judged against.
    pub failure_err: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct MarginVacuityRecord {
    pub problem: String,
    pub kappa: f64,
    pub rows: Vec<MarginVacuityRow>,
}

/// Linear: the pure-noise solution keeps a constant fraction of the maximum
/// margin while testing at chance. XOR: the constructed near-max-margin
/// network keeps a positive margin on `psi(S)` while failing on `psi(D)`.
pub fn margin_vacuity_demo(cfg: &ExperimentConfig) -> Result<MarginVacuityRecord> {
    cfg.validate()?;
    check_band(cfg, "margin-demo")?;
    let mut rows = Vec::new();
    for &seed in &cfg.trials {
        let row = match cfg.problem {
            Problem::Linear => {
                let spec = cfg.linear_spec()?;
                let ds = sample_linear(&spec, rng::derive_seed(seed, rng::tags::DATA))?;
                let mut opts = cfg.solver.to_opts();
                opts.seed = seed;
                let sol = solve_max_margin_with(&ds, &opts)?;
                let bad = construct_bad(&ds, &spec)?;
                let ratio = margin_report(&bad, &ds).min_margin / sol.gamma_star();
                let err = test_error(&bad, &spec, cfg.mc_samples, seed)?.empirical;
                MarginVacuityRow { seed, margin_ratio: ratio, failure_err: err }
            }
            Problem::Xor => {
                let spec = cfg.xor_spec()?;
                let ds = sample_xor(&spec, rng::derive_seed(seed, rng::tags::DATA))?;
                let net = construct_network(&ds, &spec, ConstructMode::Optimal)?;
                let audit = opposite_margin_audit(&net, &ds, &spec, cfg.mc_samples, seed)?;
                MarginVacuityRow {
                    seed,
                    margin_ratio: audit.margin_ratio.defined().unwrap_or(f64::NAN),
                    failure_err: audit.err_psi_d,
                }
            }
        };
        rows.push(row);
    }
    Ok(MarginVacuityRecord {
        problem: cfg.problem.name().into(),
        kappa: cfg.resolved_kappa()?,
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn band_gate_refuses_and_force_overrides() {
        let cfg = ExperimentConfig {
            n: 16,
            d: 512,
            kappa: Some(2.0), // above kappa_uc = 1 for the linear problem
            trials: vec![1],
            mc_samples: 200,
            ..Default::default()
        };
        assert!(uc_failure_demo(&cfg).is_err());
        let forced = ExperimentConfig { force: true, ..cfg };
        assert!(uc_failure_demo(&forced).is_ok());
    }

    #[test]
    fn linear_uc_witness_in_band() {
        let cfg = ExperimentConfig {
            n: 16,
            d: 4096,
            kappa: Some(0.5),
            trials: vec![1, 2],
            mc_samples: 2000,
            ..Default::default()
        };
        let demo = uc_failure_demo(&cfg).unwrap();
        assert!(demo.witness_min >= 0.9, "witness {}", demo.witness_min);
        for row in &demo.rows {
            assert_eq!(row.acc_psi_s, 1.0);
            assert_eq!(row.err_psibar_s, Some(1.0));
            assert!(row.test_err <= 0.1);
        }
    }

    #[test]
    fn linear_margin_vacuity_ratio() {
        let cfg = ExperimentConfig {
            n: 32,
            d: 2048,
            kappa: Some(3.0),
            trials: vec![1],
            mc_samples: 10_000,
            force: true, // kappa = 3 is outside the linear UC band
            ..Default::default()
        };
        let demo = margin_vacuity_demo(&cfg).unwrap();
        let row = &demo.rows[0];
        assert!((row.margin_ratio - 0.5).abs() <= 0.05, "ratio {}", row.margin_ratio);
        assert!((row.failure_err - 0.5).abs() <= 0.02, "err {}", row.failure_err);
    }
}
