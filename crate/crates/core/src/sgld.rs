//! Stochastic gradient Langevin dynamics on the sampled objective.
//!
//! One step of a chain is
//!
//! ```text
//! z_{k+1} = z_k - grad(z_k) h + sqrt(2 / lambda) dW_k,    dW_k ~ N(0, h I)
//! ```
//!
//! and an ensemble runs `N` independent chains from the same initial state.
//!
//! # Random streams
//!
//! Chain `n` draws its Brownian increments from a ChaCha8 generator seeded
//! with `seed_from_u64(seed)` and switched to stream `2n`; minibatch indices
//! (if any) come from stream `2n + 1` of the same key. Within a step the
//! `1 + dim(r)` standard normals are drawn in coordinate order (`m` first)
//! and scaled by `sqrt(h)`. Because every chain owns its streams, results do
//! not depend on how chains are scheduled across threads.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::objective::{ChainState, Evaluator, ObjectiveConfig, SampleMode};
use crate::payoff::PayoffModel;

/// How the step size is specified: directly, or through a horizon `t` with
/// `h = t / M^2`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepSpec {
    Size(f64),
    Horizon(f64),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SgldConfig {
    /// Inverse temperature.
    pub lambda: f64,
    pub step: StepSpec,
    /// Steps per chain, `M`.
    pub steps: usize,
    /// Number of chains, `N`.
    pub chains: usize,
    pub seed: u64,
    /// Starting point of every chain; `None` means the origin.
    pub init_state: Option<ChainState>,
    /// Record the chain every this many steps (the final step is always kept).
    pub record_stride: usize,
}

impl SgldConfig {
    pub fn new(lambda: f64, step: StepSpec, steps: usize, chains: usize, seed: u64) -> Self {
        Self {
            lambda,
            step,
            steps,
            chains,
            seed,
            init_state: None,
            record_stride: steps.max(1),
        }
    }

    pub fn with_record_stride(mut self, stride: usize) -> Self {
        self.record_stride = stride;
        self
    }

    pub fn with_init_state(mut self, z: ChainState) -> Self {
        self.init_state = Some(z);
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    /// Resolved step size `h`.
    pub fn step_size(&self) -> f64 {
        match self.step {
            StepSpec::Size(h) => h,
            StepSpec::Horizon(t) => {
                let m = self.steps.max(1) as f64;
                t / (m * m)
            }
        }
    }

    /// The horizon `t = h M^2` implied by the resolved step size.
    pub fn implied_horizon(&self) -> f64 {
        let m = self.steps as f64;
        self.step_size() * m * m
    }

    /// Elapsed Langevin time `M h` at the end of each chain.
    pub fn time_span(&self) -> f64 {
        self.steps as f64 * self.step_size()
    }

    pub fn validate(&self, model: &PayoffModel) -> Result<()> {
        if !(self.lambda > 0.0 && self.lambda.is_finite()) {
            return Err(Error::arg(format!(
                "lambda={} must be positive",
                self.lambda
            )));
        }
        match self.step {
            StepSpec::Size(h) if !(h > 0.0 && h.is_finite()) => {
                return Err(Error::arg(format!("step size h={h} must be positive")));
            }
            StepSpec::Horizon(t) if !(t > 0.0 && t.is_finite()) => {
                return Err(Error::arg(format!("horizon t={t} must be positive")));
            }
            _ => {}
        }
        if self.chains == 0 {
            return Err(Error::arg("at least one chain is required"));
        }
        if self.record_stride == 0 {
            return Err(Error::arg("record stride must be positive"));
        }
        if let Some(z) = &self.init_state {
            if z.r.len() != model.portfolio_dim() {
                return Err(Error::arg(format!(
                    "initial portfolio has length {}, payoff expects {}",
                    z.r.len(),
                    model.portfolio_dim()
                )));
            }
            if !z.is_finite() {
                return Err(Error::arg("initial state must be finite"));
            }
        }
        Ok(())
    }

    /// Warning text when `h >= 1 / (2/(1-u) + gamma)`, the largest step for
    /// which the convergence guarantees hold.
    pub fn step_size_warning(&self, u: f64, gamma: f64) -> Option<String> {
        let limit = 1.0 / (2.0 / (1.0 - u) + gamma);
        let h = self.step_size();
        (h >= limit).then(|| format!("step size h={h:e} is not below 1/(2/(1-u)+gamma)={limit:e}"))
    }

    fn initial_state(&self, model: &PayoffModel) -> ChainState {
        self.init_state
            .clone()
            .unwrap_or_else(|| ChainState::zeros(model.portfolio_dim()))
    }
}

/// Recorded path of one chain.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChainTrace {
    pub steps: Vec<usize>,
    pub states: Vec<ChainState>,
    /// Objective value at each recorded state.
    pub losses: Vec<f64>,
    pub record_stride: usize,
}

impl ChainTrace {
    pub fn final_state(&self) -> &ChainState {
        self.states.last().expect("trace records the final step")
    }

    pub fn final_loss(&self) -> f64 {
        *self.losses.last().expect("trace records the final step")
    }
}

/// Steps at which a chain of `steps` steps is recorded: `k * stride` for
/// `k < steps / stride`, then `steps`. There are `steps / stride + 1` of them.
pub fn recorded_steps(steps: usize, stride: usize) -> Vec<usize> {
    let full = steps / stride;
    (0..full).map(|k| k * stride).chain([steps]).collect()
}

/// Brownian increment generator of chain `chain`.
pub fn noise_stream(seed: u64, chain: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(2 * chain as u64);
    rng
}

fn batch_stream(seed: u64, chain: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(2 * chain as u64 + 1);
    rng
}

/// Fills `noise` with one Brownian increment over a step of length `h`.
pub fn draw_increment<R: Rng + ?Sized>(rng: &mut R, h: f64, noise: &mut [f64]) {
    let sqrt_h = h.sqrt();
    for x in noise.iter_mut() {
        let xi: f64 = StandardNormal.sample(rng);
        *x = sqrt_h * xi;
    }
}

#[inline]
fn apply_update(z: &mut ChainState, grad: &[f64], noise: &[f64], h: f64, diffusion: f64) {
    z.m = z.m - grad[0] * h + diffusion * noise[0];
    for ((ri, gi), wi) in z.r.iter_mut().zip(&grad[1..]).zip(&noise[1..]) {
        *ri = *ri - gi * h + diffusion * wi;
    }
}

/// One Langevin update from `z`. `noise` is the Brownian increment, i.e.
/// standard normals already scaled by `sqrt(h)`.
pub fn step(
    cfg: &SgldConfig,
    model: &PayoffModel,
    objective: &ObjectiveConfig,
    z: &ChainState,
    noise: &[f64],
) -> Result<ChainState> {
    cfg.validate(model)?;
    objective.validate(model)?;
    if z.r.len() != model.portfolio_dim() || noise.len() != z.dim() {
        return Err(Error::arg(format!(
            "state of dimension {} with noise of length {} for a payoff with portfolio dimension {}",
            z.dim(),
            noise.len(),
            model.portfolio_dim()
        )));
    }
    let eval = Evaluator::prepared(objective, model);
    let mut grad = vec![0.0; z.dim()];
    eval.grad_into(z, None, &mut grad);
    let mut next = z.clone();
    apply_update(
        &mut next,
        &grad,
        noise,
        cfg.step_size(),
        (2.0 / cfg.lambda).sqrt(),
    );
    if !next.is_finite() {
        return Err(Error::Divergence { chain: 0, step: 1 });
    }
    Ok(next)
}

fn run_chain(
    cfg: &SgldConfig,
    eval: &Evaluator<'_>,
    init: &ChainState,
    chain: usize,
) -> Result<ChainTrace> {
    let h = cfg.step_size();
    let diffusion = (2.0 / cfg.lambda).sqrt();
    let samples = eval.cfg().samples.len();
    let batch_size = match eval.cfg().sample_mode {
        SampleMode::Fixed => None,
        SampleMode::Minibatch { size } => Some(size),
    };

    let mut noise_rng = noise_stream(cfg.seed, chain);
    let mut batch_rng = batch_size.map(|_| batch_stream(cfg.seed, chain));
    let mut batch = vec![0usize; batch_size.unwrap_or(0)];

    let mut z = init.clone();
    let mut grad = vec![0.0; z.dim()];
    let mut noise = vec![0.0; z.dim()];

    let recorded = recorded_steps(cfg.steps, cfg.record_stride);
    let mut trace = ChainTrace {
        steps: Vec::with_capacity(recorded.len()),
        states: Vec::with_capacity(recorded.len()),
        losses: Vec::with_capacity(recorded.len()),
        record_stride: cfg.record_stride,
    };
    let mut next_record = recorded.iter().copied().peekable();
    let mut record = |k: usize, z: &ChainState, trace: &mut ChainTrace| {
        if next_record.peek() == Some(&k) {
            next_record.next();
            trace.steps.push(k);
            trace.states.push(z.clone());
            trace.losses.push(eval.loss(z));
        }
    };

    record(0, &z, &mut trace);
    for k in 1..=cfg.steps {
        let rows = match batch_rng.as_mut() {
            Some(rng) => {
                for idx in batch.iter_mut() {
                    *idx = rng.random_range(0..samples);
                }
                Some(batch.as_slice())
            }
            None => None,
        };
        eval.grad_into(&z, rows, &mut grad);
        draw_increment(&mut noise_rng, h, &mut noise);
        apply_update(&mut z, &grad, &noise, h, diffusion);
        if !z.is_finite() {
            return Err(Error::Divergence { chain, step: k });
        }
        record(k, &z, &mut trace);
    }
    Ok(trace)
}

/// Runs `cfg.chains` independent chains and returns their traces in chain
/// order. Parallelism comes from the ambient rayon pool.
pub fn run_ensemble(
    cfg: &SgldConfig,
    model: &PayoffModel,
    objective: &ObjectiveConfig,
) -> Result<Vec<ChainTrace>> {
    cfg.validate(model)?;
    objective.validate(model)?;
    let eval = Evaluator::prepared(objective, model);
    let init = cfg.initial_state(model);
    let results: Vec<Result<ChainTrace>> = (0..cfg.chains)
        .into_par_iter()
        .map(|n| run_chain(cfg, &eval, &init, n))
        .collect();
    results.into_iter().collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::objective::{PenaltyMode, SampleSet};

    fn zero_linear() -> (PayoffModel, ObjectiveConfig) {
        let model = PayoffModel::linear(2).unwrap();
        let samples = SampleSet::from_rows(&vec![vec![0.0, 0.0]; 3]).unwrap();
        let obj = ObjectiveConfig::new(0.9, 1.0, samples).with_penalty(PenaltyMode::FullState);
        (model, obj)
    }

    #[test]
    fn fixed_point_without_noise() {
        // At m = 0.5 one of two samples is >= m: d/dm = 1 - 1/(0.5 * 2) = 0.
        let model = PayoffModel::identity();
        let obj = ObjectiveConfig::new(0.5, 1e-300, SampleSet::from_scalars(&[1.0, -1.0]).unwrap())
            .with_penalty(PenaltyMode::FirstCoordinate);
        let cfg = SgldConfig::new(1e8, StepSpec::Size(0.1), 1, 1, 0);
        let z = ChainState::new(0.5, vec![]);
        let next = step(&cfg, &model, &obj, &z, &[0.0]).unwrap();
        assert_eq!(next, z);
    }

    #[test]
    fn noiseless_affine_map_three_steps() {
        // Constant payoff f = 0, gamma = 1, full penalty, u = 0.9.
        // m <= 0 (ties count): d/dm = 1 + m - 1/(1-u) = m - 9; m > 0: 1 + m.
        // Portfolio part: d/dr = r.
        let (model, obj) = zero_linear();
        let h = 0.01;
        let cfg = SgldConfig::new(1e8, StepSpec::Size(h), 3, 1, 0);
        let mut z = ChainState::new(-1.0, vec![2.0, -4.0]);
        let mut expect = (-1.0f64, 2.0f64, -4.0f64);
        for _ in 0..3 {
            z = step(&cfg, &model, &obj, &z, &[0.0; 3]).unwrap();
            let (m, r1, r2) = expect;
            let gm = if m > 0.0 { 1.0 + m } else { m - 9.0 };
            expect = (m - h * gm, (1.0 - h) * r1, (1.0 - h) * r2);
        }
        // m: -1 -> -0.9 -> -0.801 -> -0.70299
        assert!((z.m - -0.70299).abs() < 1e-12, "{}", z.m);
        assert!((z.m - expect.0).abs() < 1e-14);
        assert!((z.r[0] - 2.0 * 0.99f64.powi(3)).abs() < 1e-14);
        assert!((z.r[1] - expect.2).abs() < 1e-14);
    }

    #[test]
    fn step_rejects_non_finite_results() {
        let (model, obj) = zero_linear();
        let cfg = SgldConfig::new(1e8, StepSpec::Size(0.01), 1, 1, 0);
        let z = ChainState::new(0.0, vec![0.0, 0.0]);
        let err = step(&cfg, &model, &obj, &z, &[f64::INFINITY, 0.0, 0.0]).unwrap_err();
        assert!(matches!(err, Error::Divergence { .. }));
    }

    #[test]
    fn zero_steps_records_only_the_initial_state() {
        let (model, obj) = zero_linear();
        let init = ChainState::new(0.3, vec![1.0, 2.0]);
        let cfg = SgldConfig::new(1.0, StepSpec::Size(0.01), 0, 1, 9).with_init_state(init.clone());
        let traces = run_ensemble(&cfg, &model, &obj).unwrap();
        assert_eq!(traces.len(), 1);
        assert_eq!(traces[0].states, vec![init]);
        assert_eq!(traces[0].steps, vec![0]);
    }

    #[test]
    fn chains_get_distinct_noise() {
        let mut a = [0.0; 3];
        let mut b = [0.0; 3];
        draw_increment(&mut noise_stream(7, 0), 1.0, &mut a);
        draw_increment(&mut noise_stream(7, 1), 1.0, &mut b);
        assert_ne!(a, b);
        let mut again = [0.0; 3];
        draw_increment(&mut noise_stream(7, 0), 1.0, &mut again);
        assert_eq!(a, again);
    }

    #[test]
    fn ensemble_matches_manual_stepping() {
        let model = PayoffModel::softmax(2).unwrap();
        let samples =
            SampleSet::from_rows(&[vec![1.0, -0.5], vec![0.3, 2.0], vec![-1.0, 0.1]]).unwrap();
        let obj = ObjectiveConfig::new(0.7, 0.1, samples);
        let cfg = SgldConfig::new(50.0, StepSpec::Size(0.01), 25, 3, 11).with_record_stride(5);
        let traces = run_ensemble(&cfg, &model, &obj).unwrap();
        let mut rng = noise_stream(11, 2);
        let mut z = ChainState::zeros(2);
        let mut noise = [0.0; 3];
        for _ in 0..25 {
            draw_increment(&mut rng, 0.01, &mut noise);
            z = step(&cfg, &model, &obj, &z, &noise).unwrap();
        }
        assert_eq!(traces[2].final_state(), &z);
        assert_eq!(traces[2].steps, vec![0, 5, 10, 15, 20, 25]);
    }

    #[test]
    fn thread_count_does_not_change_results() {
        let model = PayoffModel::softmax(2).unwrap();
        let samples = SampleSet::from_rows(&[vec![1.0, -0.5], vec![0.3, 2.0]]).unwrap();
        let obj = ObjectiveConfig::new(0.8, 0.1, samples);
        let cfg = SgldConfig::new(100.0, StepSpec::Size(0.01), 50, 16, 3);
        let run = |threads| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap()
                .install(|| run_ensemble(&cfg, &model, &obj).unwrap())
        };
        assert_eq!(run(1), run(4));
    }

    #[test]
    fn recorded_step_layout() {
        assert_eq!(recorded_steps(10, 5), vec![0, 5, 10]);
        assert_eq!(recorded_steps(10, 3), vec![0, 3, 6, 10]);
        assert_eq!(recorded_steps(0, 4), vec![0]);
        for (m, s) in [(100, 7), (99, 10), (5, 9)] {
            assert_eq!(recorded_steps(m, s).len(), m / s + 1);
        }
    }

    #[test]
    fn horizon_resolves_to_t_over_m_squared() {
        let cfg = SgldConfig::new(1.0, StepSpec::Horizon(2.0), 100, 1, 0);
        assert_eq!(cfg.step_size(), 2e-4);
        assert!((cfg.implied_horizon() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn step_size_warning_threshold() {
        let u = 0.95;
        let gamma = 0.5;
        let limit = 1.0 / (2.0 / (1.0 - u) + gamma);
        let at = SgldConfig::new(1.0, StepSpec::Size(limit), 1, 1, 0);
        let below = SgldConfig::new(1.0, StepSpec::Size(limit * (1.0 - 1e-12)), 1, 1, 0);
        assert!(at.step_size_warning(u, gamma).is_some());
        assert!(below.step_size_warning(u, gamma).is_none());
    }

    #[test]
    fn minibatch_mode_is_reproducible() {
        let model = PayoffModel::linear(2).unwrap();
        let rows: Vec<Vec<f64>> = (0..20).map(|i| vec![i as f64 * 0.1 - 1.0, 0.5]).collect();
        let obj = ObjectiveConfig::new(0.9, 0.1, SampleSet::from_rows(&rows).unwrap())
            .with_sample_mode(SampleMode::Minibatch { size: 4 });
        let cfg = SgldConfig::new(100.0, StepSpec::Size(0.001), 30, 2, 5);
        let a = run_ensemble(&cfg, &model, &obj).unwrap();
        let b = run_ensemble(&cfg, &model, &obj).unwrap();
        assert_eq!(a, b);
        let full = run_ensemble(
            &cfg,
            &model,
            &obj.clone().with_sample_mode(SampleMode::Fixed),
        )
        .unwrap();
        assert_ne!(a[0].final_state(), full[0].final_state());
    }

    #[test]
    fn divergence_names_chain_and_step() {
        let model = PayoffModel::identity();
        let obj = ObjectiveConfig::new(0.5, 1e300, SampleSet::from_scalars(&[0.0]).unwrap());
        let cfg = SgldConfig::new(1.0, StepSpec::Size(1.0), 10, 2, 0)
            .with_init_state(ChainState::new(1.0, vec![]));
        match run_ensemble(&cfg, &model, &obj) {
            Err(Error::Divergence { chain, step }) => {
                assert_eq!(chain, 0);
                assert!(step >= 1);
            }
            other => panic!("expected divergence, got {other:?}"),
        }
    }
}
