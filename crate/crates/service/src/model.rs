use std::path::PathBuf;

use chrono::{DateTime, NaiveDate, Utc};
use crowdmine::web::CanonicalUrl;
use crowdmine::{AlignParams, RewardBreakdown, RewardParams};
use serde::{Deserialize, Serialize};

pub type Id = u64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Admin,
    Worker,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Worker {
    pub id: Id,
    pub name: String,
    pub role: Role,
    /// Hex SHA-256 of the bearer token; the token itself is never stored.
    pub token_hash: String,
    pub created_at: DateTime<Utc>,
}

/// Where a campaign's general-domain language model comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GeneralLm {
    /// A model file written by `train-lm`.
    Path(PathBuf),
    /// Sentences to train on when the campaign is loaded.
    Sentences(Vec<String>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Campaign {
    pub id: Id,
    pub domain: String,
    pub lang_e: String,
    pub lang_f: String,
    pub reward: RewardParams,
    pub align: AlignParams,
    /// In-domain development sentences (language e): train the in-domain
    /// model and are shown to workers as examples.
    pub dev_sentences: Vec<String>,
    pub general_lm: GeneralLm,
    pub lm_order: usize,
    pub created_at: DateTime<Utc>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReportStatus {
    Pending,
    Processing,
    Done,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Failure {
    pub code: String,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub id: Id,
    pub campaign_id: Id,
    pub worker_id: Id,
    pub url_a: CanonicalUrl,
    pub url_b: CanonicalUrl,
    pub status: ReportStatus,
    pub failure: Option<Failure>,
    pub pair_count: usize,
    pub reward: Option<RewardBreakdown>,
    /// Page B held the language-e text.
    pub swapped: bool,
    pub submitted_at: DateTime<Utc>,
    pub completed_at: Option<DateTime<Utc>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StoredPair {
    pub report_id: Id,
    pub src: String,
    pub tgt: String,
    pub cost: f64,
    pub s_a: f64,
    pub s_d: f64,
    pub h_in: f64,
    pub h_gen: f64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LedgerEntry {
    pub seq: u64,
    pub worker_id: Id,
    pub report_id: Id,
    pub campaign_id: Id,
    pub amount: u64,
    pub created_at: DateTime<Utc>,
}

/// One UTC day of a campaign.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StatsPoint {
    pub day: NaiveDate,
    pub reports: u64,
    pub sentences: u64,
    pub payout: u64,
    pub cumulative_reports: u64,
    pub cumulative_sentences: u64,
    pub cumulative_payout: u64,
}

pub const STATS_CSV_HEADER: &str = "day,reports,sentences,cumulative_sentences,payout";

pub fn stats_csv(points: &[StatsPoint]) -> String {
    let mut out = format!("{STATS_CSV_HEADER}\n");
    for p in points {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            p.day, p.reports, p.sentences, p.cumulative_sentences, p.payout
        ));
    }
    out
}

pub const EXPORT_HEADER: &str = "src\ttgt\tcost";

/// Exported bitext: header plus one `src<TAB>tgt<TAB>cost` line per pair.
pub fn export_tsv(rows: &[(String, String, f64)]) -> String {
    let mut out = format!("{EXPORT_HEADER}\n");
    for (s, t, c) in rows {
        out.push_str(&format!("{}\t{}\t{:.6}\n", clean_field(s), clean_field(t), c));
    }
    out
}

fn clean_field(s: &str) -> String {
    s.replace(['\t', '\n', '\r'], " ")
}
