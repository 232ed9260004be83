//! The service core: campaign setup, report intake and the processing
//! queue. HTTP handlers in [`crate::api`] are thin wrappers over this.

use std::collections::{BTreeMap, HashMap};
use std::fs::File;
use std::io::BufReader;
use std::sync::{Arc, Mutex};

use crowdmine::ngram::train_lm;
use crowdmine::pipeline::Extractor;
use crowdmine::textkit::normalize_text;
use crowdmine::web::{canonicalize_url, FetchPolicy};
use crowdmine::{AlignParams, EmbedderConfig, LidModel, LmModel, RewardParams, Sentence, TokenizerMode};
use serde::{Deserialize, Serialize};
use thiserror::Error;
use tokio::sync::mpsc;

use crate::fetch::{FetchError, Fetcher};
use crate::model::{Campaign, Failure, GeneralLm, Id, Report, StoredPair};
use crate::store::{Store, StoreError};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct ServiceConfig {
    pub admin_token: String,
    /// Concurrent report processors.
    pub workers: usize,
    pub queue_capacity: usize,
    pub fetch: FetchPolicy,
    pub embedder: EmbedderConfig,
    pub min_lid_confidence: f64,
    pub lm_order: usize,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        ServiceConfig {
            admin_token: String::new(),
            workers: 4,
            queue_capacity: 1024,
            fetch: FetchPolicy::default(),
            embedder: EmbedderConfig::default(),
            min_lid_confidence: crowdmine::textkit::DEFAULT_MIN_CONFIDENCE,
            lm_order: 5,
        }
    }
}

#[derive(Debug, Error)]
pub enum ServiceError {
    #[error("invalid URL: {0}")]
    InvalidUrl(String),
    #[error("invalid campaign: {0}")]
    InvalidCampaign(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Store(#[from] StoreError),
}

/// What an admin supplies to open a campaign.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CampaignSpec {
    pub domain: String,
    pub lang_e: String,
    pub lang_f: String,
    pub dev_sentences: Vec<String>,
    pub general_lm: GeneralLm,
    #[serde(default)]
    pub lm_order: Option<usize>,
    #[serde(default)]
    pub reward: RewardParams,
    #[serde(default)]
    pub align: AlignParams,
}

pub struct CampaignModels {
    pub in_domain: LmModel,
    pub general: LmModel,
}

fn sentences(lines: &[String]) -> Vec<Sentence> {
    lines
        .iter()
        .map(|l| normalize_text(l))
        .filter(|l| !l.trim().is_empty())
        .enumerate()
        .map(|(i, l)| Sentence::new(&l, i))
        .collect()
}

/// Trains the in-domain model and loads or trains the general one.
pub fn build_models(campaign: &Campaign) -> Result<CampaignModels, ServiceError> {
    let bad = |m: String| ServiceError::InvalidCampaign(m);
    let mode = TokenizerMode::for_lang(&campaign.lang_e);
    let in_domain = train_lm(&sentences(&campaign.dev_sentences), campaign.lm_order, mode)
        .map_err(|e| bad(format!("in-domain model: {e}")))?;
    let general = match &campaign.general_lm {
        GeneralLm::Path(p) => {
            let f = File::open(p).map_err(|e| bad(format!("general model {}: {e}", p.display())))?;
            let m = LmModel::read_from(BufReader::new(f)).map_err(|e| bad(format!("general model {}: {e}", p.display())))?;
            if m.tokenizer_mode() != mode {
                return Err(bad(format!(
                    "general model uses {} tokens but {} needs {}",
                    m.tokenizer_mode(),
                    campaign.lang_e,
                    mode
                )));
            }
            m
        }
        GeneralLm::Sentences(lines) => train_lm(&sentences(lines), campaign.lm_order, mode)
            .map_err(|e| bad(format!("general model: {e}")))?,
    };
    Ok(CampaignModels { in_domain, general })
}

pub struct Service {
    pub store: Arc<Store>,
    pub config: ServiceConfig,
    fetcher: Fetcher,
    lid: Arc<LidModel>,
    models: Mutex<HashMap<Id, Arc<CampaignModels>>>,
    queue: mpsc::Sender<Id>,
}

impl Service {
    /// Builds the service and spawns its processing pool on the current
    /// tokio runtime. Unfinished reports from an earlier run are requeued.
    pub fn start(config: ServiceConfig, lid: LidModel, store: Arc<Store>) -> Result<Arc<Service>, ServiceError> {
        if config.admin_token.len() < 8 {
            return Err(ServiceError::Config("admin_token must be at least 8 characters".into()));
        }
        if !config.fetch.respect_robots {
            return Err(ServiceError::Config("robots.txt cannot be ignored in service mode".into()));
        }
        if config.workers == 0 || config.queue_capacity == 0 {
            return Err(ServiceError::Config("workers and queue_capacity must be > 0".into()));
        }
        config.embedder.validate().map_err(|e| ServiceError::Config(e.to_string()))?;
        let fetcher = Fetcher::new(config.fetch.clone()).map_err(|e| ServiceError::Config(e.to_string()))?;
        let (tx, rx) = mpsc::channel(config.queue_capacity);
        let service = Arc::new(Service {
            store,
            fetcher,
            lid: Arc::new(lid),
            models: Mutex::new(HashMap::new()),
            queue: tx,
            config,
        });
        let rx = Arc::new(tokio::sync::Mutex::new(rx));
        for _ in 0..service.config.workers {
            let rx = rx.clone();
            let svc = Arc::downgrade(&service);
            tokio::spawn(async move {
                loop {
                    let next = rx.lock().await.recv().await;
                    let (Some(id), Some(svc)) = (next, svc.upgrade()) else {
                        break;
                    };
                    svc.process_report(id).await;
                }
            });
        }
        let pending = service.store.unfinished_reports();
        let tx = service.queue.clone();
        tokio::spawn(async move {
            for id in pending {
                if tx.send(id).await.is_err() {
                    break;
                }
            }
        });
        Ok(service)
    }

    pub fn lid(&self) -> &LidModel {
        &self.lid
    }

    pub fn create_campaign(&self, spec: CampaignSpec) -> Result<Campaign, ServiceError> {
        let bad = |m: &str| ServiceError::InvalidCampaign(m.to_string());
        if spec.domain.trim().is_empty() {
            return Err(bad("domain must not be empty"));
        }
        if spec.lang_e == spec.lang_f {
            return Err(bad("the two languages must differ"));
        }
        for lang in [&spec.lang_e, &spec.lang_f] {
            if !self.lid.languages().iter().any(|l| l == lang) {
                return Err(ServiceError::InvalidCampaign(format!(
                    "language {lang:?} is not known to the language identifier"
                )));
            }
        }
        spec.reward.validate().map_err(|e| ServiceError::InvalidCampaign(e.to_string()))?;
        spec.align.validate().map_err(|e| ServiceError::InvalidCampaign(e.to_string()))?;
        let campaign = Campaign {
            id: 0,
            domain: spec.domain,
            lang_e: spec.lang_e,
            lang_f: spec.lang_f,
            reward: spec.reward,
            align: spec.align,
            dev_sentences: spec.dev_sentences,
            general_lm: spec.general_lm,
            lm_order: spec.lm_order.unwrap_or(self.config.lm_order),
            created_at: chrono::Utc::now(),
        };
        let models = Arc::new(build_models(&campaign)?);
        let campaign = self.store.add_campaign(campaign)?;
        self.models.lock().unwrap().insert(campaign.id, models);
        Ok(campaign)
    }

    fn models_for(&self, campaign: &Campaign) -> Result<Arc<CampaignModels>, ServiceError> {
        if let Some(m) = self.models.lock().unwrap().get(&campaign.id) {
            return Ok(m.clone());
        }
        let m = Arc::new(build_models(campaign)?);
        self.models.lock().unwrap().insert(campaign.id, m.clone());
        Ok(m)
    }

    /// Validates and stores a report, then queues it.
    pub async fn submit_report(&self, campaign_id: Id, worker_id: Id, url_a: &str, url_b: &str) -> Result<Report, ServiceError> {
        let a = canonicalize_url(url_a).map_err(|e| ServiceError::InvalidUrl(e.to_string()))?;
        let b = canonicalize_url(url_b).map_err(|e| ServiceError::InvalidUrl(e.to_string()))?;
        let report = self.store.submit_report(campaign_id, worker_id, a, b)?;
        // The receiver only closes when the service is shutting down; the
        // report then stays pending and is picked up on the next start.
        let _ = self.queue.send(report.id).await;
        Ok(report)
    }

    /// Runs the extraction pipeline for one report and records the outcome.
    pub async fn process_report(&self, id: Id) {
        let report = match self.store.start_report(id) {
            Ok(r) => r,
            Err(e) => {
                tracing::warn!(report = id, error = %e, "cannot start report");
                return;
            }
        };
        let outcome = self.run_pipeline(&report).await;
        let result = match outcome {
            Ok((swapped, pairs, reward)) => self.store.complete_report(id, swapped, pairs, reward).map(|_| ()),
            Err(failure) => {
                tracing::info!(report = id, code = %failure.code, "report failed");
                self.store.fail_report(id, failure).map(|_| ())
            }
        };
        if let Err(e) = result {
            tracing::error!(report = id, error = %e, "cannot record report outcome");
        }
    }

    /// Re-runs a done report and replaces its pairs; the reward stands.
    /// Returns whether the pair set changed.
    pub async fn reprocess_report(&self, id: Id) -> Result<bool, ServiceError> {
        let report = self.store.report(id).ok_or(StoreError::NotFound("report", id))?;
        match self.run_pipeline(&report).await {
            Ok((_, pairs, _)) => Ok(self.store.replace_pairs(id, pairs)?),
            Err(f) => Err(ServiceError::InvalidCampaign(format!("reprocessing failed: {}", f.message))),
        }
    }

    async fn run_pipeline(&self, report: &Report) -> Result<(bool, Vec<StoredPair>, crowdmine::RewardBreakdown), Failure> {
        let fail = |code: &str, message: String| Failure {
            code: code.to_string(),
            message,
        };
        let campaign = self
            .store
            .campaign(report.campaign_id)
            .ok_or_else(|| fail("internal", "campaign vanished".into()))?;
        let models = self
            .models_for(&campaign)
            .map_err(|e| fail("campaign_models", e.to_string()))?;
        let (a, b) = tokio::join!(self.fetcher.fetch(&report.url_a), self.fetcher.fetch(&report.url_b));
        let fetch_fail = |e: FetchError| {
            let message = match &e {
                FetchError::RobotsDenied(_) => format!("robots policy: {e}"),
                _ => e.to_string(),
            };
            fail(e.code(), message)
        };
        let (a, b) = (a.map_err(fetch_fail)?, b.map_err(fetch_fail)?);
        let (Some(text_a), Some(text_b)) = (a.text, b.text) else {
            return Err(fail(
                "unsupported_content",
                "both pages must be HTML or plain text".into(),
            ));
        };

        let lid = self.lid.clone();
        let embedder = self.config.embedder.clone();
        let min_conf = self.config.min_lid_confidence;
        let report_id = report.id;
        let joined = tokio::task::spawn_blocking(move || {
            let ex = Extractor {
                lid: &lid,
                in_domain: &models.in_domain,
                general: &models.general,
                embedder: &embedder,
                lang_e: &campaign.lang_e,
                lang_f: &campaign.lang_f,
                min_lid_confidence: min_conf,
                align: &campaign.align,
                reward: &campaign.reward,
            };
            ex.run(&text_a, &text_b)
        })
        .await;
        let extraction = joined
            .map_err(|e| fail("internal", e.to_string()))?
            .map_err(|e| fail("pipeline_error", e.to_string()))?;
        let pairs = extraction
            .pairs
            .into_iter()
            .map(|p| StoredPair {
                report_id,
                src: p.src,
                tgt: p.tgt,
                cost: p.cost,
                s_a: p.s_a,
                s_d: p.s_d,
                h_in: p.h_in,
                h_gen: p.h_gen,
            })
            .collect();
        Ok((extraction.swapped, pairs, extraction.reward))
    }

    /// Ledger totals per campaign; used to check conservation.
    pub fn ledger_totals(&self) -> BTreeMap<Id, u64> {
        let mut out = BTreeMap::new();
        for e in self.store.ledger() {
            *out.entry(e.campaign_id).or_default() += e.amount;
        }
        out
    }
}
