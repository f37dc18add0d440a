//! The sampled Rockafellar-Uryasev objective and its (sub)gradient.
//!
//! For a chain state `z = (m, r)` and a fixed sample set `S^1..S^P`,
//!
//! ```text
//! loss(z) = (1/P) sum_p (f(r, S^p) - m)^+ / (1 - u) + m + (gamma/2) pen(z)
//! ```
//!
//! with `pen(z) = m^2` ([`PenaltyMode::FirstCoordinate`]) or `|z|^2`
//! ([`PenaltyMode::FullState`]). The gradient uses the indicator
//! `1{f(r, S^p) >= m}`, so at a kink the returned vector is a valid subgradient.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::payoff::PayoffModel;

/// SGLD iterate: VaR proxy `m` followed by the portfolio `r`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChainState {
    pub m: f64,
    pub r: Vec<f64>,
}

impl ChainState {
    pub fn new(m: f64, r: Vec<f64>) -> Self {
        Self { m, r }
    }

    pub fn zeros(portfolio_dim: usize) -> Self {
        Self {
            m: 0.0,
            r: vec![0.0; portfolio_dim],
        }
    }

    /// Number of coordinates, `1 + dim(r)`.
    pub fn dim(&self) -> usize {
        1 + self.r.len()
    }

    pub fn to_vec(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.dim());
        v.push(self.m);
        v.extend_from_slice(&self.r);
        v
    }

    pub fn from_slice(z: &[f64]) -> Result<Self> {
        match z.split_first() {
            Some((m, r)) => Ok(Self::new(*m, r.to_vec())),
            None => Err(Error::arg("chain state needs at least one coordinate")),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.m.is_finite() && self.r.iter().all(|x| x.is_finite())
    }

    pub fn norm_sq(&self) -> f64 {
        self.m * self.m + self.r.iter().map(|x| x * x).sum::<f64>()
    }
}

/// `P` draws of the risk factor vector, stored row-major.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SampleSet {
    data: Vec<f64>,
    dim: usize,
}

impl SampleSet {
    pub fn from_flat(data: Vec<f64>, dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::arg("sample dimension must be positive"));
        }
        if data.is_empty() {
            return Err(Error::arg("sample set is empty"));
        }
        if !data.len().is_multiple_of(dim) {
            return Err(Error::arg(format!(
                "{} values do not form rows of length {dim}",
                data.len()
            )));
        }
        if data.iter().any(|x| !x.is_finite()) {
            return Err(Error::arg("sample set contains non-finite values"));
        }
        Ok(Self { data, dim })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let dim = rows.first().map(Vec::len).unwrap_or(0);
        if rows.iter().any(|r| r.len() != dim) {
            return Err(Error::arg("sample rows have unequal lengths"));
        }
        Self::from_flat(rows.concat(), dim)
    }

    /// One-dimensional sample set, e.g. for the identity payoff.
    pub fn from_scalars(values: &[f64]) -> Result<Self> {
        Self::from_flat(values.to_vec(), 1)
    }

    /// Number of draws `P`.
    pub fn len(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn row(&self, p: usize) -> &[f64] {
        &self.data[p * self.dim..(p + 1) * self.dim]
    }

    pub fn rows(&self) -> std::slice::ChunksExact<'_, f64> {
        self.data.chunks_exact(self.dim)
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        self.rows().map(|row| row[j]).collect()
    }

    pub fn as_flat(&self) -> &[f64] {
        &self.data
    }

    /// Returns a copy with `c` added to every entry.
    pub fn shifted(&self, c: f64) -> Self {
        Self {
            data: self.data.iter().map(|x| x + c).collect(),
            dim: self.dim,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PenaltyMode {
    /// `(gamma/2) m^2`
    FirstCoordinate,
    /// `(gamma/2) |z|^2`
    #[default]
    FullState,
}

impl std::str::FromStr for PenaltyMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "first" | "first_coordinate" => Ok(PenaltyMode::FirstCoordinate),
            "full" | "full_state" => Ok(PenaltyMode::FullState),
            other => Err(Error::arg(format!("unknown penalty mode `{other}`"))),
        }
    }
}

/// Which samples enter the gradient at each chain step.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SampleMode {
    /// Every step uses the whole sample set.
    #[default]
    Fixed,
    /// Every step draws `size` rows with replacement from the sample set.
    Minibatch { size: usize },
}

#[derive(Clone, Debug)]
pub struct ObjectiveConfig {
    pub u: f64,
    pub gamma: f64,
    pub penalty_mode: PenaltyMode,
    pub sample_mode: SampleMode,
    pub samples: Arc<SampleSet>,
}

impl ObjectiveConfig {
    pub fn new(u: f64, gamma: f64, samples: impl Into<Arc<SampleSet>>) -> Self {
        Self {
            u,
            gamma,
            penalty_mode: PenaltyMode::default(),
            sample_mode: SampleMode::default(),
            samples: samples.into(),
        }
    }

    pub fn with_penalty(mut self, mode: PenaltyMode) -> Self {
        self.penalty_mode = mode;
        self
    }

    pub fn with_sample_mode(mut self, mode: SampleMode) -> Self {
        self.sample_mode = mode;
        self
    }

    /// Same objective at another risk level, sharing the samples.
    pub fn at_level(&self, u: f64) -> Self {
        Self { u, ..self.clone() }
    }

    pub fn validate(&self, model: &PayoffModel) -> Result<()> {
        if !(self.u > 0.0 && self.u < 1.0) {
            return Err(Error::arg(format!("risk level u={} not in (0,1)", self.u)));
        }
        if !(self.gamma > 0.0 && self.gamma.is_finite()) {
            return Err(Error::arg(format!("gamma={} must be positive", self.gamma)));
        }
        if self.samples.is_empty() {
            return Err(Error::arg("sample set is empty"));
        }
        if self.samples.dim() != model.dim() {
            return Err(Error::arg(format!(
                "samples have dimension {}, payoff expects {}",
                self.samples.dim(),
                model.dim()
            )));
        }
        if let SampleMode::Minibatch { size: 0 } = self.sample_mode {
            return Err(Error::arg("minibatch size must be positive"));
        }
        Ok(())
    }

    fn penalty_weights(&self) -> (f64, f64) {
        match self.penalty_mode {
            PenaltyMode::FirstCoordinate => (self.gamma, 0.0),
            PenaltyMode::FullState => (self.gamma, self.gamma),
        }
    }

    pub fn penalty(&self, z: &ChainState) -> f64 {
        match self.penalty_mode {
            PenaltyMode::FirstCoordinate => z.m * z.m,
            PenaltyMode::FullState => z.norm_sq(),
        }
    }
}

fn check_state(model: &PayoffModel, z: &ChainState) -> Result<()> {
    if z.r.len() != model.portfolio_dim() {
        return Err(Error::arg(format!(
            "state portfolio has length {}, payoff expects {}",
            z.r.len(),
            model.portfolio_dim()
        )));
    }
    Ok(())
}

/// The penalized sampled objective at `z`.
pub fn loss(cfg: &ObjectiveConfig, model: &PayoffModel, z: &ChainState) -> Result<f64> {
    cfg.validate(model)?;
    check_state(model, z)?;
    Ok(Evaluator::direct(cfg, model).loss(z))
}

/// The (sub)gradient of [`loss`] at `z`, as a vector `(d/dm, d/dr...)`.
pub fn grad(cfg: &ObjectiveConfig, model: &PayoffModel, z: &ChainState) -> Result<Vec<f64>> {
    cfg.validate(model)?;
    check_state(model, z)?;
    let mut out = vec![0.0; z.dim()];
    Evaluator::direct(cfg, model).grad_into(z, None, &mut out);
    Ok(out)
}

/// Payoff values sorted ascending with suffix sums, for payoffs that ignore
/// the portfolio. Turns every tail query into a binary search.
struct SortedTail {
    values: Vec<f64>,
    // suffix[i] = values[i..].sum()
    suffix: Vec<f64>,
}

impl SortedTail {
    fn new(mut values: Vec<f64>) -> Self {
        values.sort_by(f64::total_cmp);
        let mut suffix = vec![0.0; values.len() + 1];
        for i in (0..values.len()).rev() {
            suffix[i] = suffix[i + 1] + values[i];
        }
        Self { values, suffix }
    }

    /// (#{v >= m}, sum of v over that set)
    #[inline]
    fn tail(&self, m: f64) -> (usize, f64) {
        let idx = self.values.partition_point(|v| *v < m);
        (self.values.len() - idx, self.suffix[idx])
    }
}

/// Validated objective ready for repeated evaluation inside a chain.
pub(crate) struct Evaluator<'a> {
    cfg: &'a ObjectiveConfig,
    model: &'a PayoffModel,
    sorted: Option<SortedTail>,
}

impl<'a> Evaluator<'a> {
    fn direct(cfg: &'a ObjectiveConfig, model: &'a PayoffModel) -> Self {
        Self {
            cfg,
            model,
            sorted: None,
        }
    }

    /// Caller must have validated `cfg` against `model`.
    pub(crate) fn prepared(cfg: &'a ObjectiveConfig, model: &'a PayoffModel) -> Self {
        let sorted = model.is_portfolio_free().then(|| {
            let prep = model.prepare(&[]);
            SortedTail::new(cfg.samples.rows().map(|s| prep.value(s)).collect())
        });
        Self { cfg, model, sorted }
    }

    pub(crate) fn cfg(&self) -> &ObjectiveConfig {
        self.cfg
    }

    pub(crate) fn loss(&self, z: &ChainState) -> f64 {
        let cfg = self.cfg;
        let p = cfg.samples.len();
        let tail = match &self.sorted {
            Some(sorted) => {
                let (count, sum) = sorted.tail(z.m);
                sum - z.m * count as f64
            }
            None => {
                let prep = self.model.prepare(&z.r);
                cfg.samples
                    .rows()
                    .map(|s| (prep.value(s) - z.m).max(0.0))
                    .sum()
            }
        };
        tail / ((1.0 - cfg.u) * p as f64) + z.m + 0.5 * cfg.gamma * cfg.penalty(z)
    }

    /// Writes the gradient into `out` (length `1 + dim(r)`). With `batch`,
    /// only the listed sample rows enter the expectation.
    pub(crate) fn grad_into(&self, z: &ChainState, batch: Option<&[usize]>, out: &mut [f64]) {
        let cfg = self.cfg;
        let (gamma_m, gamma_r) = cfg.penalty_weights();
        out.fill(0.0);
        let (count, n) = match (batch, &self.sorted) {
            (None, Some(sorted)) => (sorted.tail(z.m).0, cfg.samples.len()),
            _ => {
                let prep = self.model.prepare(&z.r);
                let rest = &mut out[1..];
                let mut count = 0usize;
                let mut visit = |s: &[f64]| {
                    let f = prep.value(s);
                    if f >= z.m {
                        count += 1;
                        prep.add_grad(s, f, 1.0, rest);
                    }
                };
                let n = match batch {
                    Some(idx) => {
                        idx.iter().for_each(|&p| visit(cfg.samples.row(p)));
                        idx.len()
                    }
                    None => {
                        cfg.samples.rows().for_each(&mut visit);
                        cfg.samples.len()
                    }
                };
                (count, n)
            }
        };
        let inv = 1.0 / ((1.0 - cfg.u) * n as f64);
        out[0] = 1.0 + gamma_m * z.m - count as f64 * inv;
        for (o, ri) in out[1..].iter_mut().zip(&z.r) {
            *o = *o * inv + gamma_r * ri;
        }
    }
}
