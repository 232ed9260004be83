//! `crowdmine`: train models, run pipeline stages on files, run the service
//! and pull analysis data out of it.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::config::RunConfig;

#[derive(Parser)]
#[command(name = "crowdmine", version, about = "Crowd-sourced bitext mining toolkit")]
struct Cli {
    /// Flat TOML configuration file.
    #[arg(long, short, global = true)]
    config: Option<PathBuf>,
    /// Override a config key, e.g. `--set cost_threshold=0.5`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    overrides: Vec<String>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train a character n-gram language identifier.
    TrainLid {
        /// `LANG=PATH`, one sentence per line. At least two.
        #[arg(long = "corpus", required = true)]
        corpora: Vec<String>,
        #[arg(long, short)]
        output: PathBuf,
    },
    /// Train a Kneser-Ney n-gram language model.
    TrainLm {
        /// One sentence per line. Repeatable.
        #[arg(long = "corpus", required = true)]
        corpora: Vec<PathBuf>,
        #[arg(long, short)]
        output: PathBuf,
    },
    /// Align two sentence-per-line files.
    Align {
        #[arg(long)]
        src: PathBuf,
        #[arg(long)]
        tgt: PathBuf,
        /// Vector tables for `embed_mode = "external-table"`.
        #[arg(long, requires = "tgt_vectors")]
        src_vectors: Option<PathBuf>,
        #[arg(long, requires = "src_vectors")]
        tgt_vectors: Option<PathBuf>,
        /// `srcStart:len<TAB>tgtStart:len<TAB>cost` per bead.
        #[arg(long)]
        beads: PathBuf,
        /// `src<TAB>tgt<TAB>cost` for beads under the threshold.
        #[arg(long)]
        pairs: PathBuf,
    },
    /// Moore-Lewis selection of the k most in-domain general sentences.
    MlSelect {
        #[arg(long)]
        general: PathBuf,
        /// In-domain development set; ignored when `--in-model` is given.
        #[arg(long, required_unless_present = "in_model")]
        dev: Option<PathBuf>,
        #[arg(long)]
        in_model: Option<PathBuf>,
        /// Defaults to a model trained on `--general`.
        #[arg(long)]
        gen_model: Option<PathBuf>,
        #[arg(short)]
        k: usize,
        #[arg(long, short)]
        output: PathBuf,
    },
    /// Fetch two URLs and print their scored parallel pairs.
    ExtractUrlPair {
        url_a: String,
        url_b: String,
        #[arg(long)]
        lid: PathBuf,
        #[arg(long)]
        in_model: PathBuf,
        #[arg(long)]
        gen_model: PathBuf,
        /// Defaults to stdout.
        #[arg(long, short)]
        output: Option<PathBuf>,
    },
    /// Run the HTTP service.
    Serve {
        #[arg(long)]
        lid: PathBuf,
        /// Journal file; created if missing.
        #[arg(long)]
        store: PathBuf,
        #[arg(long, default_value = "127.0.0.1:8080")]
        bind: String,
    },
    /// Daily time series of a campaign as CSV.
    Stats {
        #[arg(long)]
        campaign: u64,
        #[command(flatten)]
        source: Source,
        #[arg(long, short)]
        output: Option<PathBuf>,
    },
    /// Deduplicated corpus of a campaign as TSV.
    Export {
        #[arg(long)]
        campaign: u64,
        #[command(flatten)]
        source: Source,
        /// Defaults to the campaign threshold.
        #[arg(long)]
        max_cost: Option<f64>,
        #[arg(long, short)]
        output: Option<PathBuf>,
    },
    /// Split a scored pairs file into top, middle and bottom parts by
    /// `s_a + s_d`.
    Partition {
        /// `src<TAB>tgt<TAB>cost<TAB>s_a<TAB>s_d` lines.
        #[arg(long)]
        pairs: PathBuf,
        #[arg(long, default_value_t = 0.2)]
        fraction: f64,
        /// Writes `<prefix>.top.tsv`, `<prefix>.middle.tsv`, `<prefix>.bottom.tsv`.
        #[arg(long)]
        out_prefix: PathBuf,
    },
}

/// Where campaign data comes from: a journal file or a running service.
#[derive(Args)]
#[group(required = true, multiple = false)]
pub struct Source {
    #[arg(long)]
    store: Option<PathBuf>,
    #[arg(long)]
    url: Option<String>,
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let cfg = RunConfig::load(cli.config.as_deref(), &cli.overrides)?;
    match cli.command {
        Command::TrainLid { corpora, output } => commands::train_lid(&cfg, &corpora, &output),
        Command::TrainLm { corpora, output } => commands::train_lm(&cfg, &corpora, &output),
        Command::Align {
            src,
            tgt,
            src_vectors,
            tgt_vectors,
            beads,
            pairs,
        } => {
            let vectors = src_vectors.zip(tgt_vectors);
            commands::align(&cfg, &src, &tgt, vectors, &beads, &pairs)
        }
        Command::MlSelect {
            general,
            dev,
            in_model,
            gen_model,
            k,
            output,
        } => commands::ml_select(&cfg, &general, dev.as_deref(), in_model.as_deref(), gen_model.as_deref(), k, &output),
        Command::ExtractUrlPair {
            url_a,
            url_b,
            lid,
            in_model,
            gen_model,
            output,
        } => commands::extract_url_pair(&cfg, &url_a, &url_b, &lid, &in_model, &gen_model, output.as_deref()),
        Command::Serve { lid, store, bind } => commands::serve(&cfg, &lid, &store, &bind),
        Command::Stats {
            campaign,
            source,
            output,
        } => commands::stats(&cfg, campaign, source.store.as_deref(), source.url.as_deref(), output.as_deref()),
        Command::Export {
            campaign,
            source,
            max_cost,
            output,
        } => commands::export(
            &cfg,
            campaign,
            source.store.as_deref(),
            source.url.as_deref(),
            max_cost,
            output.as_deref(),
        ),
        Command::Partition {
            pairs,
            fraction,
            out_prefix,
        } => commands::partition(&pairs, fraction, &out_prefix),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
