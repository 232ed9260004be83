//! Per-report worker rewards.
//!
//! In variable mode a report earns `min(r_max, r_min + sum(s_a + s_d))`
//! over its extracted pairs, where `s_a = sigmoid(-cost)` rewards good
//! alignment and `s_d` rewards in-domain source sentences. Fixed mode pays a
//! flat amount for any report that yields at least one pair. Amounts are
//! integer minor currency units, rounded half-up once at the end.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum RewardError {
    #[error("non-finite reward input: {0}")]
    NonFinite(&'static str),
    #[error("alignment cost must be >= 0, got {0}")]
    NegativeCost(f64),
    #[error("invalid reward parameters: {0}")]
    InvalidParams(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RewardMode {
    Fixed,
    Variable,
}

/// Orientation of the domain term.
///
/// `InDomain` uses `sigmoid(h_gen - h_in)`, which grows as the in-domain
/// model finds the sentence less surprising than the general model does.
/// `AsPrinted` uses `sigmoid(h_in - h_gen)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DomainSign {
    InDomain,
    AsPrinted,
}

impl DomainSign {
    pub fn factor(self) -> f64 {
        match self {
            DomainSign::InDomain => 1.0,
            DomainSign::AsPrinted => -1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RewardParams {
    pub mode: RewardMode,
    pub fixed_amount: u64,
    pub r_min: u64,
    pub r_max: u64,
    pub domain_sign: DomainSign,
}

impl Default for RewardParams {
    /// 25 JPY fixed; 10 to 100 JPY variable.
    fn default() -> Self {
        RewardParams {
            mode: RewardMode::Variable,
            fixed_amount: 25,
            r_min: 10,
            r_max: 100,
            domain_sign: DomainSign::InDomain,
        }
    }
}

impl RewardParams {
    pub fn validate(&self) -> Result<(), RewardError> {
        if self.r_min > self.r_max {
            return Err(RewardError::InvalidParams(format!(
                "r_min {} exceeds r_max {}",
                self.r_min, self.r_max
            )));
        }
        Ok(())
    }
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairTerms {
    pub s_a: f64,
    pub s_d: f64,
}

impl PairTerms {
    pub fn sum(&self) -> f64 {
        self.s_a + self.s_d
    }
}

/// Alignment and domain terms of a single extracted pair.
pub fn pair_terms(cost: f64, h_in: f64, h_gen: f64, params: &RewardParams) -> Result<PairTerms, RewardError> {
    if !cost.is_finite() {
        return Err(RewardError::NonFinite("cost"));
    }
    if !h_in.is_finite() {
        return Err(RewardError::NonFinite("h_in"));
    }
    if !h_gen.is_finite() {
        return Err(RewardError::NonFinite("h_gen"));
    }
    if cost < 0.0 {
        return Err(RewardError::NegativeCost(cost));
    }
    Ok(PairTerms {
        s_a: sigmoid(-cost),
        s_d: sigmoid(params.domain_sign.factor() * (h_gen - h_in)),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RewardBreakdown {
    pub mode: RewardMode,
    pub terms: Vec<PairTerms>,
    pub sum_terms: f64,
    /// `r_min + sum_terms` before clamping (variable mode).
    pub raw: f64,
    pub amount: u64,
}

/// Sums the terms in a canonical order so the result does not depend on
/// the order the pairs were extracted in.
fn canonical_sum(terms: &[PairTerms]) -> f64 {
    let mut values: Vec<f64> = terms.iter().map(PairTerms::sum).collect();
    values.sort_by(f64::total_cmp);
    values.iter().sum()
}

fn round_half_up(x: f64) -> u64 {
    (x + 0.5).floor().max(0.0) as u64
}

pub fn compute_reward(terms: &[PairTerms], params: &RewardParams) -> RewardBreakdown {
    let sum_terms = canonical_sum(terms);
    let raw = params.r_min as f64 + sum_terms;
    let amount = match params.mode {
        RewardMode::Variable => {
            let clamped = raw.clamp(params.r_min as f64, params.r_max as f64);
            round_half_up(clamped).clamp(params.r_min, params.r_max)
        }
        RewardMode::Fixed if terms.is_empty() => 0,
        RewardMode::Fixed => params.fixed_amount,
    };
    RewardBreakdown {
        mode: params.mode,
        terms: terms.to_vec(),
        sum_terms,
        raw,
        amount,
    }
}
