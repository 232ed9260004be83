//! Run configuration: a flat TOML file plus `--set key=value` overrides.
//!
//! Every key is optional except `seed`, which the commands that sample or
//! hash anything refuse to run without. Unknown keys are errors.

use std::path::Path;

use anyhow::{bail, Context, Result};
use crowdmine::align::AlignParams;
use crowdmine::embed::{EmbedMode, EmbedderConfig};
use crowdmine::reward::{DomainSign, RewardMode, RewardParams};
use crowdmine::{BeadShape, FetchPolicy, TokenizerMode};
use serde::Deserialize;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    /// Drives the embedding hash, the alignment normalizer sample and
    /// held-out splits.
    pub seed: Option<u64>,
    pub lang_e: String,
    pub lang_f: String,

    pub embed_dimension: usize,
    pub embed_ngram_orders: Vec<usize>,
    pub embed_mode: EmbedMode,

    /// Shapes as `"m:n"`.
    pub align_beads: Vec<String>,
    pub align_skip_penalty: f64,
    pub align_norm_sample: usize,
    /// 0 searches the full grid.
    pub align_band_width: usize,
    pub cost_threshold: f64,

    pub reward_mode: RewardMode,
    pub reward_fixed_amount: u64,
    pub reward_r_min: u64,
    pub reward_r_max: u64,
    pub reward_domain_sign: DomainSign,

    pub lm_order: usize,
    /// Defaults to the tokenizer suited to `lang_e`.
    pub lm_tokenizer: Option<TokenizerMode>,
    pub lid_order: usize,
    pub lid_min_confidence: f64,
    /// Share of each training corpus held out for the reported metric.
    pub heldout_fraction: f64,

    pub fetch_user_agent: String,
    pub fetch_timeout_secs: f64,
    pub fetch_max_bytes: u64,
    pub fetch_interval_secs: f64,
    pub fetch_max_redirects: usize,

    /// Falls back to the CROWDMINE_ADMIN_TOKEN environment variable.
    pub admin_token: Option<String>,
    pub workers: usize,
    pub queue_capacity: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        let embed = EmbedderConfig::default();
        let align = AlignParams::default();
        let reward = RewardParams::default();
        let fetch = FetchPolicy::default();
        RunConfig {
            seed: None,
            lang_e: "en".into(),
            lang_f: "ja".into(),
            embed_dimension: embed.dimension,
            embed_ngram_orders: embed.ngram_orders,
            embed_mode: embed.mode,
            align_beads: align.allowed_beads.iter().map(|s| s.to_string()).collect(),
            align_skip_penalty: align.skip_penalty,
            align_norm_sample: align.norm_sample,
            align_band_width: align.band_width.unwrap_or(0),
            cost_threshold: align.cost_threshold,
            reward_mode: reward.mode,
            reward_fixed_amount: reward.fixed_amount,
            reward_r_min: reward.r_min,
            reward_r_max: reward.r_max,
            reward_domain_sign: reward.domain_sign,
            lm_order: 5,
            lm_tokenizer: None,
            lid_order: 3,
            lid_min_confidence: 0.6,
            heldout_fraction: 0.1,
            fetch_user_agent: fetch.user_agent,
            fetch_timeout_secs: fetch.timeout_secs,
            fetch_max_bytes: fetch.max_bytes,
            fetch_interval_secs: fetch.per_host_min_interval_secs,
            fetch_max_redirects: fetch.max_redirects,
            admin_token: None,
            workers: 4,
            queue_capacity: 1024,
        }
    }
}

/// `value` as TOML if it parses as a scalar or array, else as a bare string.
fn override_value(value: &str) -> toml::Value {
    let doc = format!("v = {value}");
    match doc.parse::<toml::Table>() {
        Ok(mut t) => t.remove("v").unwrap_or_else(|| toml::Value::String(value.into())),
        Err(_) => toml::Value::String(value.into()),
    }
}

impl RunConfig {
    pub fn load(path: Option<&Path>, overrides: &[String]) -> Result<RunConfig> {
        let mut table = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p).with_context(|| format!("reading config {}", p.display()))?;
                text.parse::<toml::Table>()
                    .with_context(|| format!("parsing config {}", p.display()))?
            }
            None => toml::Table::new(),
        };
        for o in overrides {
            let Some((k, v)) = o.split_once('=') else {
                bail!("override {o:?} is not key=value");
            };
            table.insert(k.trim().to_string(), override_value(v.trim()));
        }
        let cfg: RunConfig = toml::Value::Table(table).try_into().context("invalid configuration")?;
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> Result<()> {
        self.embedder_with_seed(0).validate()?;
        self.align_with_seed(0)?.validate()?;
        self.reward().validate()?;
        self.fetch().validate().map_err(anyhow::Error::msg)?;
        if self.lm_order == 0 || self.lid_order == 0 {
            bail!("lm_order and lid_order must be >= 1");
        }
        if !(0.0..1.0).contains(&self.heldout_fraction) {
            bail!("heldout_fraction must be in [0, 1)");
        }
        Ok(())
    }

    pub fn seed(&self) -> Result<u64> {
        self.seed
            .context("config key `seed` is required (set it in the config file or with --set seed=N)")
    }

    fn embedder_with_seed(&self, seed: u64) -> EmbedderConfig {
        EmbedderConfig {
            dimension: self.embed_dimension,
            ngram_orders: self.embed_ngram_orders.clone(),
            seed,
            mode: self.embed_mode,
        }
    }

    pub fn embedder(&self) -> Result<EmbedderConfig> {
        Ok(self.embedder_with_seed(self.seed()?))
    }

    fn align_with_seed(&self, seed: u64) -> Result<AlignParams> {
        let beads = self
            .align_beads
            .iter()
            .map(|s| parse_shape(s))
            .collect::<Result<Vec<_>>>()?;
        Ok(AlignParams {
            allowed_beads: beads,
            skip_penalty: self.align_skip_penalty,
            norm_sample: self.align_norm_sample,
            norm_seed: seed,
            cost_threshold: self.cost_threshold,
            band_width: (self.align_band_width > 0).then_some(self.align_band_width),
        })
    }

    pub fn align(&self) -> Result<AlignParams> {
        self.align_with_seed(self.seed()?)
    }

    pub fn reward(&self) -> RewardParams {
        RewardParams {
            mode: self.reward_mode,
            fixed_amount: self.reward_fixed_amount,
            r_min: self.reward_r_min,
            r_max: self.reward_r_max,
            domain_sign: self.reward_domain_sign,
        }
    }

    pub fn fetch(&self) -> FetchPolicy {
        FetchPolicy {
            user_agent: self.fetch_user_agent.clone(),
            timeout_secs: self.fetch_timeout_secs,
            max_bytes: self.fetch_max_bytes,
            per_host_min_interval_secs: self.fetch_interval_secs,
            respect_robots: true,
            max_redirects: self.fetch_max_redirects,
        }
    }

    pub fn tokenizer(&self) -> TokenizerMode {
        self.lm_tokenizer.unwrap_or_else(|| TokenizerMode::for_lang(&self.lang_e))
    }
}

fn parse_shape(s: &str) -> Result<BeadShape> {
    let parsed = s
        .split_once(':')
        .and_then(|(a, b)| Some(BeadShape::new(a.trim().parse().ok()?, b.trim().parse().ok()?)));
    parsed.with_context(|| format!("bead shape {s:?} is not m:n"))
}
