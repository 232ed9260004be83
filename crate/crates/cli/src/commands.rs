use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use crowdmine::align::{align_documents, extract_pairs, format_beads};
use crowdmine::embed::{embed_overlaps, load_external_vectors, EmbedMode};
use crowdmine::ngram::{self, ml_score, partition_by_score, select_lowest, AddOneUnigram};
use crowdmine::textkit::{self, normalize_text};
use crowdmine::web::canonicalize_url;
use crowdmine::{Extractor, LidModel, LmModel, Sentence};
use crowdmine_service::client::ApiClient;
use crowdmine_service::model::{export_tsv, stats_csv};
use crowdmine_service::{Fetcher, Service, ServiceConfig, Store};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::config::RunConfig;

/// Non-blank lines of a file, NFKC-normalized.
fn read_lines(path: &Path) -> Result<Vec<String>> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(text
        .lines()
        .map(normalize_text)
        .map(|l| l.trim().to_string())
        .filter(|l| !l.is_empty())
        .collect())
}

fn sentences(lines: &[String]) -> Vec<Sentence> {
    lines.iter().enumerate().map(|(i, l)| Sentence::new(l, i)).collect()
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    let f = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    Ok(BufWriter::new(f))
}

fn write_output(path: Option<&Path>, content: &str) -> Result<()> {
    match path {
        Some(p) => std::fs::write(p, content).with_context(|| format!("writing {}", p.display())),
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(content.as_bytes())?;
            Ok(out.flush()?)
        }
    }
}

/// Seeded train / held-out split, both halves in corpus order.
fn split<T: Clone>(items: &[T], fraction: f64, seed: u64) -> (Vec<T>, Vec<T>) {
    let n_held = (items.len() as f64 * fraction).round() as usize;
    let mut idx: Vec<usize> = (0..items.len()).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut held: Vec<usize> = idx[..n_held].to_vec();
    let mut train: Vec<usize> = idx[n_held..].to_vec();
    held.sort_unstable();
    train.sort_unstable();
    let pick = |ix: Vec<usize>| ix.into_iter().map(|i| items[i].clone()).collect();
    (pick(train), pick(held))
}

fn clean(field: &str) -> String {
    field.replace(['\t', '\n', '\r'], " ")
}

fn load_lm(path: &Path) -> Result<LmModel> {
    let f = File::open(path).with_context(|| format!("reading {}", path.display()))?;
    LmModel::read_from(BufReader::new(f)).with_context(|| format!("loading model {}", path.display()))
}

fn load_lid(path: &Path) -> Result<LidModel> {
    let f = File::open(path).with_context(|| format!("reading {}", path.display()))?;
    LidModel::read_from(BufReader::new(f)).with_context(|| format!("loading language identifier {}", path.display()))
}

pub fn train_lid(cfg: &RunConfig, specs: &[String], output: &Path) -> Result<()> {
    let seed = cfg.seed()?;
    let mut train = BTreeMap::new();
    let mut held = Vec::new();
    for spec in specs {
        let Some((lang, path)) = spec.split_once('=') else {
            bail!("corpus {spec:?} is not LANG=PATH");
        };
        let lines = read_lines(Path::new(path))?;
        let (t, h) = split(&lines, cfg.heldout_fraction, seed);
        train.insert(lang.to_string(), t);
        held.extend(h.into_iter().map(|s| (lang.to_string(), s)));
    }
    let model = textkit::train_lid(&train, cfg.lid_order)?;
    let mut w = create(output)?;
    model.write_to(&mut w)?;
    w.flush()?;
    if !held.is_empty() {
        let correct = held
            .iter()
            .filter(|(lang, s)| &model.classify(&Sentence::new(s, 0)).0 == lang)
            .count();
        println!(
            "heldout_accuracy\t{:.4}\t{correct}/{}",
            correct as f64 / held.len() as f64,
            held.len()
        );
    }
    Ok(())
}

pub fn train_lm(cfg: &RunConfig, corpora: &[PathBuf], output: &Path) -> Result<()> {
    let mut lines = Vec::new();
    for p in corpora {
        lines.extend(read_lines(p)?);
    }
    let (train, held) = split(&lines, cfg.heldout_fraction, cfg.seed()?);
    let (train, held) = (sentences(&train), sentences(&held));
    let mode = cfg.tokenizer();
    let model = ngram::train_lm(&train, cfg.lm_order, mode)?;
    let mut w = create(output)?;
    model.write_to(&mut w)?;
    w.flush()?;
    if !held.is_empty() {
        println!("heldout_perplexity\t{:.4}", model.perplexity(&held));
        let unigram = AddOneUnigram::train(&train, mode);
        println!("add_one_unigram_perplexity\t{:.4}", unigram.perplexity(&held));
    }
    Ok(())
}

/// Entries an overlap table holds for `n` sentences and groups up to `g`.
fn overlap_entries(n: usize, g: usize) -> usize {
    (1..=g).map(|l| (n + 1).saturating_sub(l)).sum()
}

pub fn align(
    cfg: &RunConfig,
    src: &Path,
    tgt: &Path,
    vectors: Option<(PathBuf, PathBuf)>,
    beads_out: &Path,
    pairs_out: &Path,
) -> Result<()> {
    let params = cfg.align()?;
    let embedder = cfg.embedder()?;
    let s = sentences(&read_lines(src)?);
    let t = sentences(&read_lines(tgt)?);
    let group = params.max_group();
    let (s_table, t_table) = match (embedder.mode, vectors) {
        (EmbedMode::BuiltinHashed, _) => (embed_overlaps(&embedder, &s, group)?, embed_overlaps(&embedder, &t, group)?),
        (EmbedMode::ExternalTable, Some((sv, tv))) => (
            load_external_vectors(&sv, overlap_entries(s.len(), group))
                .with_context(|| format!("loading {}", sv.display()))?,
            load_external_vectors(&tv, overlap_entries(t.len(), group))
                .with_context(|| format!("loading {}", tv.display()))?,
        ),
        (EmbedMode::ExternalTable, None) => bail!("embed_mode external-table needs --src-vectors and --tgt-vectors"),
    };
    let path = align_documents(&s_table, &t_table, s.len(), t.len(), &params)?;
    std::fs::write(beads_out, format_beads(&path)).with_context(|| format!("writing {}", beads_out.display()))?;
    let mut w = create(pairs_out)?;
    let pairs = extract_pairs(&path, &s, &t, params.cost_threshold);
    for p in &pairs {
        writeln!(w, "{}\t{}\t{:.6}", clean(&p.src), clean(&p.tgt), p.cost)?;
    }
    w.flush()?;
    eprintln!(
        "{} beads, {} pairs under {}, total cost {:.4}",
        path.beads.len(),
        pairs.len(),
        params.cost_threshold,
        path.total_cost
    );
    Ok(())
}

pub fn ml_select(
    cfg: &RunConfig,
    general: &Path,
    dev: Option<&Path>,
    in_model: Option<&Path>,
    gen_model: Option<&Path>,
    k: usize,
    output: &Path,
) -> Result<()> {
    let corpus = sentences(&read_lines(general)?);
    let mode = cfg.tokenizer();
    let in_lm = match (in_model, dev) {
        (Some(p), _) => load_lm(p)?,
        (None, Some(d)) => ngram::train_lm(&sentences(&read_lines(d)?), cfg.lm_order, mode).context("training in-domain model")?,
        (None, None) => bail!("either --dev or --in-model is required"),
    };
    let gen_lm = match gen_model {
        Some(p) => load_lm(p)?,
        None => ngram::train_lm(&corpus, cfg.lm_order, mode).context("training general model")?,
    };
    let scores = corpus
        .iter()
        .map(|s| ml_score(&in_lm, &gen_lm, s).with_context(|| format!("scoring line {}", s.index + 1)))
        .collect::<Result<Vec<_>>>()?;
    let chosen = select_lowest(&corpus, &scores, k)?;
    let mut w = create(output)?;
    for s in chosen {
        let m = &scores[s.index];
        writeln!(w, "{:.6}\t{:.6}\t{:.6}\t{}", m.score, m.h_in, m.h_gen, clean(&s.text))?;
    }
    w.flush()?;
    Ok(())
}

fn runtime() -> Result<tokio::runtime::Runtime> {
    Ok(tokio::runtime::Builder::new_multi_thread().enable_all().build()?)
}

pub fn extract_url_pair(
    cfg: &RunConfig,
    url_a: &str,
    url_b: &str,
    lid: &Path,
    in_model: &Path,
    gen_model: &Path,
    output: Option<&Path>,
) -> Result<()> {
    let a = canonicalize_url(url_a).with_context(|| format!("invalid URL {url_a:?}"))?;
    let b = canonicalize_url(url_b).with_context(|| format!("invalid URL {url_b:?}"))?;
    let lid = load_lid(lid)?;
    let in_lm = load_lm(in_model)?;
    let gen_lm = load_lm(gen_model)?;
    let embedder = cfg.embedder()?;
    if embedder.mode != EmbedMode::BuiltinHashed {
        bail!("extract-url-pair needs the builtin embedder");
    }
    let align = cfg.align()?;
    let reward = cfg.reward();
    let fetcher = Fetcher::new(cfg.fetch())?;
    let (doc_a, doc_b) = runtime()?.block_on(async { tokio::join!(fetcher.fetch(&a), fetcher.fetch(&b)) });
    let text = |d: Result<crowdmine_service::Document, _>, url: &str| -> Result<String> {
        let d = d.with_context(|| format!("fetching {url}"))?;
        d.text
            .with_context(|| format!("{url}: unsupported content type {:?}", d.content_type))
    };
    let (text_a, text_b) = (text(doc_a, a.as_str())?, text(doc_b, b.as_str())?);
    let extractor = Extractor {
        lid: &lid,
        in_domain: &in_lm,
        general: &gen_lm,
        embedder: &embedder,
        lang_e: &cfg.lang_e,
        lang_f: &cfg.lang_f,
        min_lid_confidence: cfg.lid_min_confidence,
        align: &align,
        reward: &reward,
    };
    let ex = extractor.run(&text_a, &text_b)?;
    let mut out = String::new();
    for p in &ex.pairs {
        out.push_str(&format!(
            "{}\t{}\t{:.6}\t{:.6}\t{:.6}\n",
            clean(&p.src),
            clean(&p.tgt),
            p.cost,
            p.s_a,
            p.s_d
        ));
    }
    write_output(output, &out)?;
    eprintln!(
        "{} {} / {} {} sentences{}, {} pairs, reward {} ({:?})",
        ex.src_sentences,
        cfg.lang_e,
        ex.tgt_sentences,
        cfg.lang_f,
        if ex.swapped { " (pages swapped)" } else { "" },
        ex.pairs.len(),
        ex.reward.amount,
        ex.reward.mode
    );
    Ok(())
}

fn admin_token(cfg: &RunConfig) -> Option<String> {
    cfg.admin_token
        .clone()
        .or_else(|| std::env::var("CROWDMINE_ADMIN_TOKEN").ok())
}

pub fn serve(cfg: &RunConfig, lid: &Path, store: &Path, bind: &str) -> Result<()> {
    tracing_subscriber::fmt().with_writer(std::io::stderr).init();
    let config = ServiceConfig {
        admin_token: admin_token(cfg).context("set admin_token in the config or CROWDMINE_ADMIN_TOKEN")?,
        workers: cfg.workers,
        queue_capacity: cfg.queue_capacity,
        fetch: cfg.fetch(),
        embedder: cfg.embedder()?,
        min_lid_confidence: cfg.lid_min_confidence,
        lm_order: cfg.lm_order,
    };
    let lid = load_lid(lid)?;
    let store = Arc::new(Store::open(store).with_context(|| format!("opening store {}", store.display()))?);
    runtime()?.block_on(async {
        let service = Service::start(config, lid, store)?;
        let listener = tokio::net::TcpListener::bind(bind)
            .await
            .with_context(|| format!("binding {bind}"))?;
        eprintln!("listening on http://{}", listener.local_addr()?);
        crowdmine_service::api::serve(service, listener).await?;
        Ok(())
    })
}

fn open_existing(path: &Path) -> Result<Store> {
    if !path.is_file() {
        bail!("store {} does not exist", path.display());
    }
    Store::open(path).with_context(|| format!("opening store {}", path.display()))
}

fn remote_get(cfg: &RunConfig, base: &str, path: &str) -> Result<String> {
    let token = admin_token(cfg).context("set admin_token in the config or CROWDMINE_ADMIN_TOKEN")?;
    let client = ApiClient::new(base, &token);
    Ok(runtime()?.block_on(client.get_text(path))?)
}

pub fn stats(cfg: &RunConfig, campaign: u64, store: Option<&Path>, url: Option<&str>, output: Option<&Path>) -> Result<()> {
    let csv = match (store, url) {
        (Some(p), _) => {
            let store = open_existing(p)?;
            store.campaign(campaign).with_context(|| format!("campaign {campaign} not found"))?;
            stats_csv(&store.stats(campaign))
        }
        (None, Some(u)) => remote_get(cfg, u, &format!("/v1/campaigns/{campaign}/stats?format=csv"))?,
        (None, None) => bail!("either --store or --url is required"),
    };
    write_output(output, &csv)
}

pub fn export(
    cfg: &RunConfig,
    campaign: u64,
    store: Option<&Path>,
    url: Option<&str>,
    max_cost: Option<f64>,
    output: Option<&Path>,
) -> Result<()> {
    let tsv = match (store, url) {
        (Some(p), _) => {
            let store = open_existing(p)?;
            let c = store.campaign(campaign).with_context(|| format!("campaign {campaign} not found"))?;
            export_tsv(&store.export(campaign, max_cost.unwrap_or(c.align.cost_threshold)))
        }
        (None, Some(u)) => {
            let q = max_cost.map(|m| format!("?max_cost={m}")).unwrap_or_default();
            remote_get(cfg, u, &format!("/v1/campaigns/{campaign}/export{q}"))?
        }
        (None, None) => bail!("either --store or --url is required"),
    };
    write_output(output, &tsv)
}

pub fn partition(pairs: &Path, fraction: f64, prefix: &Path) -> Result<()> {
    let text = std::fs::read_to_string(pairs).with_context(|| format!("reading {}", pairs.display()))?;
    let mut lines = Vec::new();
    let mut scores = Vec::new();
    for (n, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        let parsed = (fields.len() == 5)
            .then(|| Some(fields[3].trim().parse::<f64>().ok()? + fields[4].trim().parse::<f64>().ok()?))
            .flatten();
        let Some(score) = parsed.filter(|s| s.is_finite()) else {
            bail!(
                "{}:{}: expected src<TAB>tgt<TAB>cost<TAB>s_a<TAB>s_d",
                pairs.display(),
                n + 1
            );
        };
        lines.push(line);
        scores.push(score);
    }
    let parts = partition_by_score(&lines, &scores, fraction)?;
    for (name, part) in [("top", &parts.top), ("middle", &parts.middle), ("bottom", &parts.bottom)] {
        let mut path = prefix.as_os_str().to_owned();
        path.push(format!(".{name}.tsv"));
        let body: String = part.iter().map(|l| format!("{l}\n")).collect();
        std::fs::write(&path, body).with_context(|| format!("writing {}", Path::new(&path).display()))?;
    }
    eprintln!(
        "{} pairs: {} top, {} middle, {} bottom",
        lines.len(),
        parts.top.len(),
        parts.middle.len(),
        parts.bottom.len()
    );
    Ok(())
}
