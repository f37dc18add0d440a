//! Payoff families `f(r, s)` and their exact gradients in the portfolio `r`.
//!
//! - `Identity`: `f(r, s) = s` for a scalar risk factor. The portfolio is
//!   empty, so the chain state degenerates to the VaR proxy alone.
//! - `LinearPnl`: `f(r, s) = sum_i r_i s_i`, the P&L of holding `r` when the
//!   risk factors `s` are price increments. Its gradient is not bounded
//!   uniformly in `s`, which reports flag as `assumption-unchecked`.
//! - `SoftmaxPortfolio`: `f(r, s) = sum_i softmax(r)_i s_i`, a fully invested
//!   long-only portfolio parameterized by unconstrained logits.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PayoffKind {
    Identity,
    LinearPnl,
    SoftmaxPortfolio,
}

impl std::str::FromStr for PayoffKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "identity" => Ok(PayoffKind::Identity),
            "linear" | "linear_pnl" | "linearpnl" => Ok(PayoffKind::LinearPnl),
            "softmax" | "softmax_portfolio" => Ok(PayoffKind::SoftmaxPortfolio),
            other => Err(Error::arg(format!("unknown payoff kind `{other}`"))),
        }
    }
}

/// A payoff family together with the dimension of its risk factor vector.
///
/// Immutable after construction, so one model can be shared by every chain.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PayoffModel {
    kind: PayoffKind,
    dim: usize,
}

impl PayoffModel {
    pub fn new(kind: PayoffKind, dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::arg("payoff dimension must be positive"));
        }
        if kind == PayoffKind::Identity && dim != 1 {
            return Err(Error::arg(format!(
                "identity payoff takes a scalar risk factor, got dimension {dim}"
            )));
        }
        Ok(Self { kind, dim })
    }

    pub fn identity() -> Self {
        Self {
            kind: PayoffKind::Identity,
            dim: 1,
        }
    }

    pub fn linear(dim: usize) -> Result<Self> {
        Self::new(PayoffKind::LinearPnl, dim)
    }

    pub fn softmax(dim: usize) -> Result<Self> {
        Self::new(PayoffKind::SoftmaxPortfolio, dim)
    }

    pub fn kind(&self) -> PayoffKind {
        self.kind
    }

    /// Dimension of the risk factor vector `s`.
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Dimension of the portfolio `r` (zero for the identity payoff).
    pub fn portfolio_dim(&self) -> usize {
        match self.kind {
            PayoffKind::Identity => 0,
            _ => self.dim,
        }
    }

    /// True when `f(r, s)` does not depend on `r`.
    pub fn is_portfolio_free(&self) -> bool {
        self.portfolio_dim() == 0
    }

    /// Labels for model properties that the convergence guarantees assume but
    /// this payoff does not provide.
    pub fn assumption_flags(&self) -> Vec<String> {
        match self.kind {
            PayoffKind::LinearPnl => {
                vec!["assumption-unchecked: linear payoff gradient is unbounded in s".to_string()]
            }
            _ => Vec::new(),
        }
    }

    fn check(&self, r: &[f64], s: &[f64]) -> Result<()> {
        if r.len() != self.portfolio_dim() {
            return Err(Error::arg(format!(
                "portfolio has length {}, expected {}",
                r.len(),
                self.portfolio_dim()
            )));
        }
        if s.len() != self.dim {
            return Err(Error::arg(format!(
                "risk factor has length {}, expected {}",
                s.len(),
                self.dim
            )));
        }
        Ok(())
    }

    pub fn evaluate(&self, r: &[f64], s: &[f64]) -> Result<f64> {
        self.check(r, s)?;
        Ok(self.prepare(r).value(s))
    }

    pub fn grad_r(&self, r: &[f64], s: &[f64]) -> Result<Vec<f64>> {
        self.check(r, s)?;
        let prepared = self.prepare(r);
        let value = prepared.value(s);
        let mut out = vec![0.0; r.len()];
        prepared.add_grad(s, value, 1.0, &mut out);
        Ok(out)
    }

    /// Precomputes whatever depends on `r` alone, so that evaluating many
    /// samples at one portfolio costs one pass each.
    pub(crate) fn prepare<'a>(&self, r: &'a [f64]) -> PreparedPayoff<'a> {
        match self.kind {
            PayoffKind::Identity => PreparedPayoff::Identity,
            PayoffKind::LinearPnl => PreparedPayoff::Linear(r),
            PayoffKind::SoftmaxPortfolio => PreparedPayoff::Weights(softmax(r)),
        }
    }
}

pub(crate) enum PreparedPayoff<'a> {
    Identity,
    Linear(&'a [f64]),
    Weights(Vec<f64>),
}

impl PreparedPayoff<'_> {
    #[inline]
    pub(crate) fn value(&self, s: &[f64]) -> f64 {
        match self {
            PreparedPayoff::Identity => s[0],
            PreparedPayoff::Linear(r) => dot(r, s),
            PreparedPayoff::Weights(w) => dot(w, s),
        }
    }

    /// Adds `scale * grad_r f(r, s)` into `out`; `value` must be `f(r, s)`.
    #[inline]
    pub(crate) fn add_grad(&self, s: &[f64], value: f64, scale: f64, out: &mut [f64]) {
        match self {
            PreparedPayoff::Identity => {}
            PreparedPayoff::Linear(_) => {
                for (o, si) in out.iter_mut().zip(s) {
                    *o += scale * si;
                }
            }
            PreparedPayoff::Weights(w) => {
                for ((o, wi), si) in out.iter_mut().zip(w).zip(s) {
                    *o += scale * wi * (si - value);
                }
            }
        }
    }
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Softmax with max subtraction; finite for any finite input.
pub fn softmax(r: &[f64]) -> Vec<f64> {
    if r.is_empty() {
        return Vec::new();
    }
    let max = r.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut w: Vec<f64> = r.iter().map(|x| (x - max).exp()).collect();
    let total: f64 = w.iter().sum();
    for wi in &mut w {
        *wi /= total;
    }
    w
}
