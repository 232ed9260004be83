//! Service state with an append-only JSON-lines journal.
//!
//! Every mutation is validated against the in-memory state, written to the
//! journal (flushed and synced) and only then applied, all under one lock.
//! Opening a store replays its journal. The payment ledger is part of the
//! same journal, so a report can never be marked done without its ledger
//! entry or paid twice.

use std::collections::{BTreeMap, HashMap};
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use chrono::{DateTime, Utc};
use crowdmine::web::CanonicalUrl;
use crowdmine::RewardBreakdown;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::model::{
    Campaign, Failure, Id, LedgerEntry, Report, ReportStatus, Role, StatsPoint, StoredPair, Worker,
};

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("{0} {1} not found")]
    NotFound(&'static str, Id),
    #[error("URL pair already reported as report {existing}")]
    Duplicate { existing: Id },
    #[error("both URLs are the same page")]
    SameUrl,
    #[error("report {id} is {status:?}; cannot {action}")]
    BadTransition {
        id: Id,
        status: ReportStatus,
        action: &'static str,
    },
    #[error("pair cost {cost} exceeds the campaign threshold {threshold}")]
    OverThreshold { cost: f64, threshold: f64 },
    #[error("journal {path}, line {line}: {msg}")]
    Corrupt { path: PathBuf, line: usize, msg: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
enum Event {
    WorkerAdded {
        worker: Worker,
    },
    CampaignAdded {
        campaign: Campaign,
    },
    ReportSubmitted {
        report: Report,
    },
    ReportStarted {
        id: Id,
    },
    ReportDone {
        id: Id,
        at: DateTime<Utc>,
        swapped: bool,
        pairs: Vec<StoredPair>,
        reward: RewardBreakdown,
        ledger: LedgerEntry,
    },
    ReportFailed {
        id: Id,
        at: DateTime<Utc>,
        failure: Failure,
    },
    ReportReprocessed {
        id: Id,
        pairs: Vec<StoredPair>,
    },
}

type DedupKey = (Id, CanonicalUrl, CanonicalUrl);

fn dedup_key(campaign: Id, a: &CanonicalUrl, b: &CanonicalUrl) -> DedupKey {
    if a <= b {
        (campaign, a.clone(), b.clone())
    } else {
        (campaign, b.clone(), a.clone())
    }
}

pub fn hash_token(token: &str) -> String {
    Sha256::digest(token.as_bytes())
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

#[derive(Default)]
struct State {
    workers: BTreeMap<Id, Worker>,
    tokens: HashMap<String, Id>,
    campaigns: BTreeMap<Id, Campaign>,
    reports: BTreeMap<Id, Report>,
    dedup: HashMap<DedupKey, Id>,
    pairs: BTreeMap<Id, Vec<StoredPair>>,
    ledger: Vec<LedgerEntry>,
}

impl State {
    fn next_id<T>(map: &BTreeMap<Id, T>) -> Id {
        map.keys().next_back().map_or(1, |k| k + 1)
    }

    fn report_mut(&mut self, id: Id) -> &mut Report {
        self.reports.get_mut(&id).expect("validated before apply")
    }

    fn apply(&mut self, event: Event) {
        match event {
            Event::WorkerAdded { worker } => {
                self.tokens.insert(worker.token_hash.clone(), worker.id);
                self.workers.insert(worker.id, worker);
            }
            Event::CampaignAdded { campaign } => {
                self.campaigns.insert(campaign.id, campaign);
            }
            Event::ReportSubmitted { report } => {
                self.dedup
                    .insert(dedup_key(report.campaign_id, &report.url_a, &report.url_b), report.id);
                self.reports.insert(report.id, report);
            }
            Event::ReportStarted { id } => {
                self.report_mut(id).status = ReportStatus::Processing;
            }
            Event::ReportDone {
                id,
                at,
                swapped,
                pairs,
                reward,
                ledger,
            } => {
                let r = self.report_mut(id);
                r.status = ReportStatus::Done;
                r.completed_at = Some(at);
                r.swapped = swapped;
                r.pair_count = pairs.len();
                r.reward = Some(reward);
                self.pairs.insert(id, pairs);
                self.ledger.push(ledger);
            }
            Event::ReportFailed { id, at, failure } => {
                let r = self.report_mut(id);
                r.status = ReportStatus::Failed;
                r.completed_at = Some(at);
                r.failure = Some(failure);
            }
            Event::ReportReprocessed { id, pairs } => {
                self.report_mut(id).pair_count = pairs.len();
                self.pairs.insert(id, pairs);
            }
        }
    }
}

struct Inner {
    state: State,
    journal: Option<File>,
}

pub struct Store {
    inner: Mutex<Inner>,
}

impl Store {
    /// A store that lives only in memory.
    pub fn in_memory() -> Self {
        Store {
            inner: Mutex::new(Inner {
                state: State::default(),
                journal: None,
            }),
        }
    }

    /// Opens (or creates) a journal-backed store, replaying existing events.
    /// A torn final line from an interrupted write is ignored.
    pub fn open(path: &Path) -> Result<Self, StoreError> {
        let mut state = State::default();
        if path.exists() {
            let lines: Vec<String> = BufReader::new(File::open(path)?).lines().collect::<Result<_, _>>()?;
            let last = lines.len();
            for (i, line) in lines.iter().enumerate() {
                if line.trim().is_empty() {
                    continue;
                }
                match serde_json::from_str::<Event>(line) {
                    Ok(ev) => state.apply(ev),
                    Err(_) if i + 1 == last => break,
                    Err(e) => {
                        return Err(StoreError::Corrupt {
                            path: path.to_path_buf(),
                            line: i + 1,
                            msg: e.to_string(),
                        })
                    }
                }
            }
        }
        let journal = OpenOptions::new().create(true).append(true).open(path)?;
        Ok(Store {
            inner: Mutex::new(Inner {
                state,
                journal: Some(journal),
            }),
        })
    }

    fn commit<T>(&self, build: impl FnOnce(&State) -> Result<(Event, T), StoreError>) -> Result<T, StoreError> {
        let mut inner = self.inner.lock().unwrap();
        let (event, out) = build(&inner.state)?;
        if let Some(file) = inner.journal.as_mut() {
            let mut line = serde_json::to_string(&event).expect("events serialize");
            line.push('\n');
            file.write_all(line.as_bytes())?;
            file.sync_data()?;
        }
        inner.state.apply(event);
        Ok(out)
    }

    fn read<T>(&self, f: impl FnOnce(&State) -> T) -> T {
        f(&self.inner.lock().unwrap().state)
    }

    /// Registers a worker and returns it with its bearer token.
    pub fn add_worker(&self, name: &str, role: Role) -> Result<(Worker, String), StoreError> {
        let token = uuid::Uuid::new_v4().simple().to_string();
        let token_hash = hash_token(&token);
        let worker = self.commit(|s| {
            let worker = Worker {
                id: State::next_id(&s.workers),
                name: name.to_string(),
                role,
                token_hash,
                created_at: Utc::now(),
            };
            Ok((Event::WorkerAdded { worker: worker.clone() }, worker))
        })?;
        Ok((worker, token))
    }

    pub fn worker_by_token(&self, token: &str) -> Option<Worker> {
        let h = hash_token(token);
        self.read(|s| s.tokens.get(&h).and_then(|id| s.workers.get(id)).cloned())
    }

    pub fn worker(&self, id: Id) -> Option<Worker> {
        self.read(|s| s.workers.get(&id).cloned())
    }

    /// Stores a campaign; `campaign.id` and `created_at` are assigned here.
    pub fn add_campaign(&self, mut campaign: Campaign) -> Result<Campaign, StoreError> {
        self.commit(|s| {
            campaign.id = State::next_id(&s.campaigns);
            campaign.created_at = Utc::now();
            Ok((Event::CampaignAdded { campaign: campaign.clone() }, campaign))
        })
    }

    pub fn campaign(&self, id: Id) -> Option<Campaign> {
        self.read(|s| s.campaigns.get(&id).cloned())
    }

    pub fn campaigns(&self) -> Vec<Campaign> {
        self.read(|s| s.campaigns.values().cloned().collect())
    }

    /// Accepts a report unless the unordered URL pair was already reported
    /// in this campaign.
    pub fn submit_report(
        &self,
        campaign_id: Id,
        worker_id: Id,
        url_a: CanonicalUrl,
        url_b: CanonicalUrl,
    ) -> Result<Report, StoreError> {
        if url_a == url_b {
            return Err(StoreError::SameUrl);
        }
        self.commit(|s| {
            if !s.campaigns.contains_key(&campaign_id) {
                return Err(StoreError::NotFound("campaign", campaign_id));
            }
            if !s.workers.contains_key(&worker_id) {
                return Err(StoreError::NotFound("worker", worker_id));
            }
            if let Some(&existing) = s.dedup.get(&dedup_key(campaign_id, &url_a, &url_b)) {
                return Err(StoreError::Duplicate { existing });
            }
            let report = Report {
                id: State::next_id(&s.reports),
                campaign_id,
                worker_id,
                url_a,
                url_b,
                status: ReportStatus::Pending,
                failure: None,
                pair_count: 0,
                reward: None,
                swapped: false,
                submitted_at: Utc::now(),
                completed_at: None,
            };
            Ok((Event::ReportSubmitted { report: report.clone() }, report))
        })
    }

    /// pending -> processing. A report already processing (left over from
    /// a restart) may be started again.
    pub fn start_report(&self, id: Id) -> Result<Report, StoreError> {
        self.commit(|s| {
            let r = s.reports.get(&id).ok_or(StoreError::NotFound("report", id))?;
            match r.status {
                ReportStatus::Pending => {}
                ReportStatus::Processing => return Ok((Event::ReportStarted { id }, r.clone())),
                status => {
                    return Err(StoreError::BadTransition {
                        id,
                        status,
                        action: "start",
                    })
                }
            }
            let mut out = r.clone();
            out.status = ReportStatus::Processing;
            Ok((Event::ReportStarted { id }, out))
        })
    }

    /// processing -> done, appending the report's ledger entry.
    pub fn complete_report(
        &self,
        id: Id,
        swapped: bool,
        pairs: Vec<StoredPair>,
        reward: RewardBreakdown,
    ) -> Result<Report, StoreError> {
        self.commit(|s| {
            let r = s.reports.get(&id).ok_or(StoreError::NotFound("report", id))?;
            if r.status != ReportStatus::Processing {
                return Err(StoreError::BadTransition {
                    id,
                    status: r.status,
                    action: "complete",
                });
            }
            let threshold = s.campaigns[&r.campaign_id].align.cost_threshold;
            if let Some(p) = pairs.iter().find(|p| !(p.cost <= threshold)) {
                return Err(StoreError::OverThreshold { cost: p.cost, threshold });
            }
            let at = Utc::now();
            let ledger = LedgerEntry {
                seq: s.ledger.last().map_or(1, |e| e.seq + 1),
                worker_id: r.worker_id,
                report_id: id,
                campaign_id: r.campaign_id,
                amount: reward.amount,
                created_at: at,
            };
            let mut out = r.clone();
            out.status = ReportStatus::Done;
            out.completed_at = Some(at);
            out.swapped = swapped;
            out.pair_count = pairs.len();
            out.reward = Some(reward.clone());
            Ok((
                Event::ReportDone {
                    id,
                    at,
                    swapped,
                    pairs,
                    reward,
                    ledger,
                },
                out,
            ))
        })
    }

    /// pending or processing -> failed.
    pub fn fail_report(&self, id: Id, failure: Failure) -> Result<Report, StoreError> {
        self.commit(|s| {
            let r = s.reports.get(&id).ok_or(StoreError::NotFound("report", id))?;
            if !matches!(r.status, ReportStatus::Pending | ReportStatus::Processing) {
                return Err(StoreError::BadTransition {
                    id,
                    status: r.status,
                    action: "fail",
                });
            }
            let at = Utc::now();
            let mut out = r.clone();
            out.status = ReportStatus::Failed;
            out.completed_at = Some(at);
            out.failure = Some(failure.clone());
            Ok((Event::ReportFailed { id, at, failure }, out))
        })
    }

    /// Replaces the stored pairs of a done report. The reward and ledger
    /// are left alone: a report is paid once. Returns whether the pair set
    /// changed.
    pub fn replace_pairs(&self, id: Id, pairs: Vec<StoredPair>) -> Result<bool, StoreError> {
        self.commit(|s| {
            let r = s.reports.get(&id).ok_or(StoreError::NotFound("report", id))?;
            if r.status != ReportStatus::Done {
                return Err(StoreError::BadTransition {
                    id,
                    status: r.status,
                    action: "reprocess",
                });
            }
            let threshold = s.campaigns[&r.campaign_id].align.cost_threshold;
            if let Some(p) = pairs.iter().find(|p| !(p.cost <= threshold)) {
                return Err(StoreError::OverThreshold { cost: p.cost, threshold });
            }
            let changed = s.pairs.get(&id) != Some(&pairs);
            Ok((Event::ReportReprocessed { id, pairs }, changed))
        })
    }

    pub fn report(&self, id: Id) -> Option<Report> {
        self.read(|s| s.reports.get(&id).cloned())
    }

    pub fn reports_for_campaign(&self, campaign_id: Id) -> Vec<Report> {
        self.read(|s| {
            s.reports
                .values()
                .filter(|r| r.campaign_id == campaign_id)
                .cloned()
                .collect()
        })
    }

    /// Reports that still need processing, oldest first.
    pub fn unfinished_reports(&self) -> Vec<Id> {
        self.read(|s| {
            s.reports
                .values()
                .filter(|r| matches!(r.status, ReportStatus::Pending | ReportStatus::Processing))
                .map(|r| r.id)
                .collect()
        })
    }

    pub fn pairs(&self, report_id: Id) -> Vec<StoredPair> {
        self.read(|s| s.pairs.get(&report_id).cloned().unwrap_or_default())
    }

    pub fn ledger(&self) -> Vec<LedgerEntry> {
        self.read(|s| s.ledger.clone())
    }

    pub fn ledger_for_worker(&self, worker_id: Id) -> Vec<LedgerEntry> {
        self.read(|s| s.ledger.iter().filter(|e| e.worker_id == worker_id).cloned().collect())
    }

    /// Per-UTC-day totals over done reports, by completion time.
    pub fn stats(&self, campaign_id: Id) -> Vec<StatsPoint> {
        let mut days: BTreeMap<chrono::NaiveDate, (u64, u64, u64)> = BTreeMap::new();
        self.read(|s| {
            for r in s.reports.values() {
                if r.campaign_id != campaign_id || r.status != ReportStatus::Done {
                    continue;
                }
                let (Some(at), Some(reward)) = (r.completed_at, r.reward.as_ref()) else {
                    continue;
                };
                let d = days.entry(at.date_naive()).or_default();
                d.0 += 1;
                d.1 += r.pair_count as u64;
                d.2 += reward.amount;
            }
        });
        let (mut cr, mut cs, mut cp) = (0, 0, 0);
        days.into_iter()
            .map(|(day, (reports, sentences, payout))| {
                cr += reports;
                cs += sentences;
                cp += payout;
                StatsPoint {
                    day,
                    reports,
                    sentences,
                    payout,
                    cumulative_reports: cr,
                    cumulative_sentences: cs,
                    cumulative_payout: cp,
                }
            })
            .collect()
    }

    /// Distinct `(src, tgt)` pairs of a campaign with cost <= `max_cost`,
    /// cheapest first. A pair found by several reports keeps its lowest
    /// cost.
    pub fn export(&self, campaign_id: Id, max_cost: f64) -> Vec<(String, String, f64)> {
        let mut best: HashMap<(String, String), f64> = HashMap::new();
        self.read(|s| {
            for r in s.reports.values().filter(|r| r.campaign_id == campaign_id) {
                for p in s.pairs.get(&r.id).into_iter().flatten() {
                    if p.cost <= max_cost {
                        let e = best.entry((p.src.clone(), p.tgt.clone())).or_insert(p.cost);
                        *e = e.min(p.cost);
                    }
                }
            }
        });
        let mut rows: Vec<(String, String, f64)> = best.into_iter().map(|((s, t), c)| (s, t, c)).collect();
        rows.sort_by(|a, b| a.2.total_cmp(&b.2).then_with(|| (&a.0, &a.1).cmp(&(&b.0, &b.1))));
        rows
    }
}
