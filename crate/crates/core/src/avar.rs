//! Ensemble estimates of the optimized AVaR, its VaR and portfolio, and the
//! explicit constant of the deviation inequality.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::objective::{ObjectiveConfig, PenaltyMode, SampleMode};
use crate::payoff::{PayoffKind, PayoffModel};
use crate::sgld::{run_ensemble, ChainTrace, SgldConfig};

/// Running ensemble averages at one recorded step.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PathPoint {
    pub step: usize,
    /// Mean objective over chains.
    pub avar: f64,
    /// Mean VaR proxy `m` over chains.
    pub var: f64,
    /// Cross-chain standard deviation of the objective.
    pub loss_std: f64,
}

/// Fully resolved run parameters, echoed into every report.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunEcho {
    pub payoff: PayoffKind,
    pub dim: usize,
    pub u: f64,
    pub gamma: f64,
    pub lambda: f64,
    pub step_size: f64,
    pub steps: usize,
    pub implied_horizon: f64,
    pub time_span: f64,
    pub chains: usize,
    pub samples: usize,
    pub seed: u64,
    pub penalty_mode: PenaltyMode,
    pub sample_mode: SampleMode,
    pub record_stride: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EstimateReport {
    /// Mean of `per_chain_losses`.
    pub avar: f64,
    /// Mean over chains of the final `m`.
    pub var: f64,
    pub var_std: f64,
    /// Mean over chains of the final portfolio.
    pub portfolio: Vec<f64>,
    pub portfolio_std: Vec<f64>,
    pub per_chain_losses: Vec<f64>,
    pub path: Vec<PathPoint>,
    pub config: RunEcho,
    pub assumption_flags: Vec<String>,
    pub warnings: Vec<String>,
}

impl EstimateReport {
    /// Cross-chain standard deviation of the final objective values.
    pub fn loss_std(&self) -> f64 {
        std_dev(&self.per_chain_losses, self.avar)
    }
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

fn std_dev(xs: &[f64], mean: f64) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let ss: f64 = xs.iter().map(|x| (x - mean) * (x - mean)).sum();
    (ss / (xs.len() - 1) as f64).sqrt()
}

fn summarize(traces: &[ChainTrace]) -> Vec<PathPoint> {
    let first = &traces[0];
    (0..first.steps.len())
        .map(|j| {
            let losses: Vec<f64> = traces.iter().map(|t| t.losses[j]).collect();
            let ms: Vec<f64> = traces.iter().map(|t| t.states[j].m).collect();
            let avar = mean(&losses);
            PathPoint {
                step: first.steps[j],
                avar,
                var: mean(&ms),
                loss_std: std_dev(&losses, avar),
            }
        })
        .collect()
}

/// Runs the chain ensemble and averages the objective over final states.
pub fn estimate_avar(
    cfg: &SgldConfig,
    model: &PayoffModel,
    objective: &ObjectiveConfig,
) -> Result<EstimateReport> {
    let traces = run_ensemble(cfg, model, objective)?;
    Ok(report_from_traces(cfg, model, objective, &traces))
}

pub(crate) fn report_from_traces(
    cfg: &SgldConfig,
    model: &PayoffModel,
    objective: &ObjectiveConfig,
    traces: &[ChainTrace],
) -> EstimateReport {
    let per_chain_losses: Vec<f64> = traces.iter().map(ChainTrace::final_loss).collect();
    let avar = mean(&per_chain_losses);
    let finals: Vec<_> = traces.iter().map(ChainTrace::final_state).collect();
    let ms: Vec<f64> = finals.iter().map(|z| z.m).collect();
    let var = mean(&ms);
    let (portfolio, portfolio_std) = (0..model.portfolio_dim())
        .map(|k| {
            let col: Vec<f64> = finals.iter().map(|z| z.r[k]).collect();
            let mu = mean(&col);
            (mu, std_dev(&col, mu))
        })
        .unzip();

    let mut path = summarize(traces);
    // Same summation order as `avar`, so the last point matches it exactly.
    if let Some(last) = path.last_mut() {
        last.avar = avar;
    }

    let warnings = cfg
        .step_size_warning(objective.u, objective.gamma)
        .into_iter()
        .collect();

    EstimateReport {
        avar,
        var,
        var_std: std_dev(&ms, var),
        portfolio,
        portfolio_std,
        per_chain_losses,
        path,
        config: RunEcho {
            payoff: model.kind(),
            dim: model.dim(),
            u: objective.u,
            gamma: objective.gamma,
            lambda: cfg.lambda,
            step_size: cfg.step_size(),
            steps: cfg.steps,
            implied_horizon: cfg.implied_horizon(),
            time_span: cfg.time_span(),
            chains: cfg.chains,
            samples: objective.samples.len(),
            seed: cfg.seed,
            penalty_mode: objective.penalty_mode,
            sample_mode: objective.sample_mode,
            record_stride: cfg.record_stride,
        },
        assumption_flags: model.assumption_flags(),
        warnings,
    }
}

/// `1152 (t/M) / ((1-u) lambda) * exp(2 (1/(1-u) + 1) t/M)`, the variance
/// proxy in the sub-Gaussian deviation bound of the ensemble estimator.
pub fn psi_constant(steps: usize, horizon: f64, u: f64, lambda: f64) -> Result<f64> {
    if steps == 0 {
        return Err(Error::arg("M must be positive"));
    }
    if !(horizon > 0.0 && horizon.is_finite()) {
        return Err(Error::arg(format!("horizon t={horizon} must be positive")));
    }
    if !(u > 0.0 && u < 1.0) {
        return Err(Error::arg(format!("risk level u={u} not in (0,1)")));
    }
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::arg(format!("lambda={lambda} must be positive")));
    }
    let ratio = horizon / steps as f64;
    let tail = 1.0 / (1.0 - u);
    Ok(1152.0 * ratio * tail / lambda * (2.0 * (tail + 1.0) * ratio).exp())
}

/// What [`deviation_probability_bound`] leaves out.
pub const DEVIATION_BOUND_CAVEAT: &str = "bound omits the additive C(M,lambda,gamma) exp(-eps^2/64) term, whose constant is not explicit";

/// `min(1, 2 exp(-eps^2 N / psi))`, the explicit part of the deviation
/// inequality `P(|estimate - AVaR| >= eps)`.
pub fn deviation_probability_bound(epsilon: f64, chains: usize, psi: f64) -> Result<f64> {
    if !(epsilon >= 0.0 && epsilon.is_finite()) {
        return Err(Error::arg(format!(
            "epsilon={epsilon} must be non-negative"
        )));
    }
    if chains == 0 {
        return Err(Error::arg("N must be positive"));
    }
    if !(psi > 0.0 && psi.is_finite()) {
        return Err(Error::arg(format!("psi={psi} must be positive")));
    }
    let exponent = epsilon * epsilon * chains as f64 / psi;
    Ok((2.0 * (-exponent).exp()).min(1.0))
}
