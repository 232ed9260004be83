//! Acceptance suite: one line per criterion with its verdict, runtime and
//! the measured figures. Exits nonzero if any criterion fails or overruns
//! its time limit.

use std::collections::{BTreeMap, BTreeSet};
use std::panic::AssertUnwindSafe;
use std::sync::Arc;
use std::time::{Duration, Instant};

use crowdmine::align::oracle::brute_force_align;
use crowdmine::align::{align_documents, BeadShape, SHAPE_PRIORITY};
use crowdmine::embed::embed_overlaps;
use crowdmine::ngram::{ml_score, partition_by_score, select_lowest, train_lm, AddOneUnigram};
use crowdmine::reward::{compute_reward, pair_terms, sigmoid, PairTerms, RewardMode};
use crowdmine::synth::{doc_pair, lexicon, sentence, translate};
use crowdmine::{AlignParams, EmbedderConfig, Extractor, LmModel, RewardParams, Sentence, TokenizerMode};
use crowdmine_service::client::ApiClient;
use crowdmine_service::testing::{html_page, FixturePage, FixtureSite, SyntheticWorld};
use crowdmine_service::{Service, ServiceConfig, Store, StoredPair};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::json;

type Outcome = Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        if !$cond {
            return Err(format!($($msg)+));
        }
    };
}

fn sents(lines: &[String]) -> Vec<Sentence> {
    lines.iter().enumerate().map(|(i, l)| Sentence::new(l, i)).collect()
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn aligner_matches_exhaustive_search() -> Outcome {
    let mut r = rng(1001);
    let words = lexicon(&mut r, 300);
    let cfg = EmbedderConfig::default();
    let (mut max_diff, mut equal) = (0.0f64, 0);
    for k in 0..200 {
        let n_src = r.gen_range(1..=6);
        let n_tgt = r.gen_range(1..=6);
        let src: Vec<String> = (0..n_src).map(|_| sentence(&mut r, &words, 3, 12)).collect();
        // some targets translate a source sentence, the rest are unrelated
        let tgt: Vec<String> = (0..n_tgt)
            .map(|j| {
                if j < n_src && r.gen_bool(0.6) {
                    translate(&src[j])
                } else {
                    translate(&sentence(&mut r, &words, 3, 12))
                }
            })
            .collect();
        let params = match k % 3 {
            0 => AlignParams::default(),
            1 => AlignParams {
                allowed_beads: SHAPE_PRIORITY.to_vec(),
                band_width: None,
                ..AlignParams::default()
            },
            _ => AlignParams {
                skip_penalty: r.gen_range(0.1..1.5),
                norm_seed: k,
                ..AlignParams::default()
            },
        };
        let (s, t) = (sents(&src), sents(&tgt));
        let st = embed_overlaps(&cfg, &s, 2).map_err(|e| e.to_string())?;
        let tt = embed_overlaps(&cfg, &t, 2).map_err(|e| e.to_string())?;
        let dp = align_documents(&st, &tt, n_src, n_tgt, &params).map_err(|e| e.to_string())?;
        let bf = brute_force_align(&st, &tt, n_src, n_tgt, &params).map_err(|e| e.to_string())?;
        let d = (dp.total_cost - bf.total_cost).abs();
        max_diff = max_diff.max(d);
        ensure!(
            d <= 1e-9,
            "document {k} ({n_src}x{n_tgt}): dp {} vs exhaustive {}",
            dp.total_cost,
            bf.total_cost
        );
        equal += 1;
    }
    Ok(format!("{equal}/200 totals equal, max |diff| {max_diff:.1e}"))
}

struct Models {
    world: SyntheticWorld,
    in_lm: LmModel,
    gen_lm: LmModel,
}

fn models(seed: u64) -> Models {
    let world = SyntheticWorld::new(seed);
    let in_lm = train_lm(&sents(&world.dev), 3, TokenizerMode::Whitespace).unwrap();
    let gen_lm = train_lm(&sents(&world.general), 3, TokenizerMode::Whitespace).unwrap();
    Models { world, in_lm, gen_lm }
}

fn threshold_fidelity() -> Outcome {
    let mut m = models(2002);
    let embedder = EmbedderConfig::default();
    let align = AlignParams::default();
    let reward = RewardParams::default();
    let lid = m.world.lid.clone();
    let extractor = Extractor {
        lid: &lid,
        in_domain: &m.in_lm,
        general: &m.gen_lm,
        embedder: &embedder,
        lang_e: "en",
        lang_f: "de",
        min_lid_confidence: 0.6,
        align: &align,
        reward: &reward,
    };
    let store = Store::in_memory();
    let (worker, _) = store.add_worker("w", crowdmine_service::model::Role::Worker).unwrap();
    let campaign = store
        .add_campaign(crowdmine_service::Campaign {
            id: 0,
            domain: "toy".into(),
            lang_e: "en".into(),
            lang_f: "de".into(),
            reward: reward.clone(),
            align: align.clone(),
            dev_sentences: m.world.dev.clone(),
            general_lm: crowdmine_service::GeneralLm::Sentences(vec![]),
            lm_order: 3,
            created_at: chrono::Utc::now(),
        })
        .unwrap();

    let mut planted = Vec::new();
    let mut max_cost = 0.0f64;
    let mut total_pairs = 0;
    for d in 0..8 {
        let (mut e, mut f) = m.world.parallel(10);
        // a sentence whose "translation" is an unrelated sentence, sitting
        // where a 1:1 bead is forced
        let stray_e = m.world.monolingual(1).remove(0);
        let stray_f = translate(&m.world.monolingual(1).remove(0));
        e.insert(5, stray_e.clone());
        f.insert(5, stray_f.clone());
        planted.push(stray_e.clone());

        let ex = extractor
            .run(&e.join(" "), &f.join(" "))
            .map_err(|err| err.to_string())?;
        for p in &ex.pairs {
            max_cost = max_cost.max(p.cost);
            ensure!(p.cost <= 0.7, "doc {d}: extracted pair with cost {}", p.cost);
            ensure!(!p.src.contains(&stray_e), "doc {d}: planted pair extracted at cost {}", p.cost);
        }
        total_pairs += ex.pairs.len();
        let report = store
            .submit_report(
                campaign.id,
                worker.id,
                crowdmine::web::canonicalize_url(&format!("http://e.test/{d}")).unwrap(),
                crowdmine::web::canonicalize_url(&format!("http://f.test/{d}")).unwrap(),
            )
            .unwrap();
        store.start_report(report.id).unwrap();
        let pairs = ex
            .pairs
            .iter()
            .map(|p| StoredPair {
                report_id: report.id,
                src: p.src.clone(),
                tgt: p.tgt.clone(),
                cost: p.cost,
                s_a: p.s_a,
                s_d: p.s_d,
                h_in: p.h_in,
                h_gen: p.h_gen,
            })
            .collect();
        store
            .complete_report(report.id, ex.swapped, pairs, ex.reward)
            .map_err(|err| err.to_string())?;
    }

    // the store refuses a pair over the threshold outright
    let report = store
        .submit_report(
            campaign.id,
            worker.id,
            crowdmine::web::canonicalize_url("http://e.test/x").unwrap(),
            crowdmine::web::canonicalize_url("http://f.test/x").unwrap(),
        )
        .unwrap();
    store.start_report(report.id).unwrap();
    let forced = StoredPair {
        report_id: report.id,
        src: "Planted source.".into(),
        tgt: "Planted target.".into(),
        cost: 0.9,
        s_a: sigmoid(-0.9),
        s_d: 0.5,
        h_in: 1.0,
        h_gen: 1.0,
    };
    let terms = [pair_terms(0.9, 1.0, 1.0, &reward).unwrap()];
    let refused = store.complete_report(report.id, false, vec![forced], compute_reward(&terms, &reward));
    ensure!(refused.is_err(), "store accepted a pair with cost 0.9");

    let export = crowdmine_service::model::export_tsv(&store.export(campaign.id, 0.7));
    let rows: Vec<&str> = export.lines().skip(1).collect();
    ensure!(rows.len() == total_pairs, "export has {} rows, extracted {total_pairs}", rows.len());
    for row in &rows {
        let cost: f64 = row.rsplit('\t').next().unwrap().parse().unwrap();
        ensure!(cost <= 0.7, "exported cost {cost}");
    }
    for p in planted.iter().map(String::as_str).chain(["Planted source."]) {
        ensure!(!export.contains(p), "planted sentence {p:?} exported");
    }
    Ok(format!(
        "{total_pairs} pairs, max cost {max_cost:.3}; 9 planted pairs absent from the export"
    ))
}

fn link_f1(params: &AlignParams, seed: u64) -> Result<(f64, f64, f64), String> {
    let mut r = rng(seed);
    let words = lexicon(&mut r, 400);
    let cfg = EmbedderConfig::default();
    let (mut tp, mut n_pred, mut n_gold) = (0usize, 0usize, 0usize);
    for _ in 0..50 {
        let d = doc_pair(&mut r, &words, 30, 0.1);
        let (s, t) = (sents(&d.src), sents(&d.tgt));
        let group = params.max_group();
        let st = embed_overlaps(&cfg, &s, group).map_err(|e| e.to_string())?;
        let tt = embed_overlaps(&cfg, &t, group).map_err(|e| e.to_string())?;
        let path = align_documents(&st, &tt, s.len(), t.len(), params).map_err(|e| e.to_string())?;
        let gold: BTreeSet<(usize, usize)> = d.gold.iter().copied().collect();
        let pred: BTreeSet<(usize, usize)> = path.links().into_iter().collect();
        tp += pred.intersection(&gold).count();
        n_pred += pred.len();
        n_gold += gold.len();
    }
    let p = tp as f64 / n_pred.max(1) as f64;
    let r = tp as f64 / n_gold.max(1) as f64;
    Ok((p, r, 2.0 * p * r / (p + r).max(f64::MIN_POSITIVE)))
}

fn synthetic_bitext_recovery() -> Outcome {
    let params = AlignParams {
        allowed_beads: vec![BeadShape::new(1, 1), BeadShape::new(1, 0), BeadShape::new(0, 1)],
        ..AlignParams::default()
    };
    let (p, r, f1) = link_f1(&params, 3003)?;
    let (dp, dr, df1) = link_f1(&AlignParams::default(), 3003)?;
    let summary = format!(
        "1:1/1:0/0:1 beads: P {p:.4} R {r:.4} F1 {f1:.4}; default beads (info): P {dp:.4} R {dr:.4} F1 {df1:.4}"
    );
    ensure!(f1 >= 0.95, "F1 {f1:.4} < 0.95 ({summary})");
    Ok(summary)
}

/// Word sequences with strong local structure: every word has a handful
/// of likely successors.
fn markov_corpus(seed: u64, n: usize) -> Vec<String> {
    let mut r = rng(seed);
    let words = lexicon(&mut r, 400);
    let next: Vec<Vec<usize>> = (0..words.len())
        .map(|_| (0..4).map(|_| r.gen_range(0..words.len())).collect())
        .collect();
    (0..n)
        .map(|_| {
            let len = r.gen_range(5..15);
            let mut w = r.gen_range(0..words.len());
            let mut out = Vec::with_capacity(len);
            for _ in 0..len {
                out.push(words[w].as_str());
                w = if r.gen_bool(0.9) {
                    next[w][r.gen_range(0..4)]
                } else {
                    r.gen_range(0..words.len())
                };
            }
            out.join(" ")
        })
        .collect()
}

fn lm_correctness() -> Outcome {
    let corpus = markov_corpus(4004, 4000);
    let (train, held) = corpus.split_at(3600);
    let train = sents(train);
    let held = sents(held);
    let lm = train_lm(&train, 5, TokenizerMode::Whitespace).map_err(|e| e.to_string())?;

    let mut r = rng(4005);
    let ids: Vec<u32> = lm.predictable_ids().collect();
    let mut worst = 0.0f64;
    for c in 0..100 {
        // contexts mix seen histories with random ids, across all orders
        let len = c % lm.order();
        let context: Vec<u32> = if c % 2 == 0 && len > 0 {
            let s = &train[r.gen_range(0..train.len())];
            let enc = lm.encode(&s.text);
            let end = r.gen_range(1..enc.len());
            enc[end.saturating_sub(len)..end].to_vec()
        } else {
            (0..len).map(|_| r.gen_range(0..lm.vocab_len() as u32)).collect()
        };
        let total: f64 = ids.iter().map(|&w| lm.log_prob(&context, w).exp()).sum();
        worst = worst.max((total - 1.0).abs());
        ensure!((total - 1.0).abs() <= 1e-6, "context {context:?}: mass {total}");
    }
    let kn = lm.perplexity(&held);
    let uni = AddOneUnigram::train(&train, TokenizerMode::Whitespace).perplexity(&held);
    ensure!(kn < uni, "KN perplexity {kn:.2} not below add-one unigram {uni:.2}");
    Ok(format!(
        "max |mass - 1| {worst:.1e} over 100 contexts; held-out perplexity KN-5 {kn:.2} vs add-one unigram {uni:.2}"
    ))
}

fn moore_lewis_selection() -> Outcome {
    let mut r = rng(5005);
    let words = lexicon(&mut r, 1500);
    let domain = &words[..300];
    let general_vocab = &words[250..];
    let dev: Vec<String> = (0..1000).map(|_| sentence(&mut r, domain, 6, 14)).collect();
    let mut pool: Vec<(String, bool)> = (0..9000)
        .map(|_| (sentence(&mut r, general_vocab, 6, 14), false))
        .collect();
    pool.extend((0..1000).map(|_| (sentence(&mut r, domain, 6, 14), true)));
    // deterministic shuffle
    for i in (1..pool.len()).rev() {
        pool.swap(i, r.gen_range(0..=i));
    }
    let corpus: Vec<Sentence> = pool.iter().enumerate().map(|(i, (t, _))| Sentence::new(t, i)).collect();
    let in_lm = train_lm(&sents(&dev), 5, TokenizerMode::Whitespace).map_err(|e| e.to_string())?;
    let gen_lm = train_lm(&corpus, 5, TokenizerMode::Whitespace).map_err(|e| e.to_string())?;
    let scores = corpus
        .iter()
        .map(|s| ml_score(&in_lm, &gen_lm, s))
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| e.to_string())?;
    let chosen = select_lowest(&corpus, &scores, 1000).map_err(|e| e.to_string())?;
    let hits = chosen.iter().filter(|s| pool[s.index].1).count();
    let recall = hits as f64 / 1000.0;
    ensure!(recall >= 0.90, "recall {recall:.3} < 0.90");
    Ok(format!("recall of planted in-domain sentences {recall:.3} ({hits}/1000)"))
}

fn reward_contract() -> Outcome {
    let p = RewardParams::default();
    ensure!(sigmoid(0.0) == 0.5, "sigmoid(0) = {}", sigmoid(0.0));
    let t = pair_terms(0.0, 2.5, 2.5, &p).map_err(|e| e.to_string())?;
    ensure!(t.s_a == 0.5 && t.s_d == 0.5, "zero cost, equal entropies: {t:?}");
    let empty = compute_reward(&[], &p);
    ensure!(empty.amount == 10, "empty variable reward {}", empty.amount);
    let perfect = vec![PairTerms { s_a: 1.0, s_d: 1.0 }; 200];
    let clamped = compute_reward(&perfect, &p);
    ensure!(clamped.amount == 100, "clamp gave {}", clamped.amount);
    let fixed = RewardParams {
        mode: RewardMode::Fixed,
        ..p.clone()
    };
    ensure!(compute_reward(&perfect[..1], &fixed).amount == 25, "fixed with one pair");
    ensure!(compute_reward(&perfect, &fixed).amount == 25, "fixed with many pairs");
    ensure!(compute_reward(&[], &fixed).amount == 0, "fixed with no pairs");

    let mut r = rng(6006);
    for seq in 0..1000 {
        let n = r.gen_range(1..150);
        let mut terms = Vec::with_capacity(n);
        let mut last = compute_reward(&terms, &p).amount;
        for _ in 0..n {
            let cost = r.gen_range(0.0..0.7);
            let h_in = r.gen_range(1.0..12.0);
            let h_gen = r.gen_range(1.0..12.0);
            terms.push(pair_terms(cost, h_in, h_gen, &p).map_err(|e| e.to_string())?);
            let now = compute_reward(&terms, &p).amount;
            ensure!(now >= last, "sequence {seq}: reward fell from {last} to {now}");
            ensure!((10..=100).contains(&now), "sequence {seq}: reward {now} out of range");
            last = now;
        }
    }
    Ok("sigmoid(0) = 0.5, empty = 10, clamp = 100, fixed 25/0, monotone over 1000 sequences".into())
}

fn partition_trend() -> Outcome {
    let mut m = models(7007);
    let embedder = EmbedderConfig::default();
    let align = AlignParams::default();
    let reward = RewardParams::default();
    let lid = m.world.lid.clone();
    let extractor = Extractor {
        lid: &lid,
        in_domain: &m.in_lm,
        general: &m.gen_lm,
        embedder: &embedder,
        lang_e: "en",
        lang_f: "de",
        min_lid_confidence: 0.6,
        align: &align,
        reward: &reward,
    };
    let mut r = rng(7008);
    let words = m.world.words.clone();
    // tier 0: in-domain, faithful; tier 1: general, a few words changed;
    // tier 2: general, many words changed
    let corrupt = |s: &str, rate: f64, r: &mut ChaCha8Rng| -> String {
        let body = s.trim_end_matches('.');
        let out: Vec<String> = body
            .split(' ')
            .enumerate()
            .map(|(i, w)| {
                if i > 0 && r.gen_bool(rate) {
                    words[r.gen_range(0..words.len())].clone()
                } else {
                    w.to_string()
                }
            })
            .collect();
        translate(&format!("{}.", out.join(" ")))
    };
    let mut items: Vec<(f64, bool, f64)> = Vec::new(); // (cost, in-domain, score)
    for _ in 0..30 {
        let mut rows: Vec<(String, String, usize)> = Vec::new();
        let (de, df) = m.world.parallel(4);
        rows.extend(de.into_iter().zip(df).map(|(e, f)| (e, f, 0)));
        for e in m.world.monolingual(4) {
            let f = corrupt(&e, 0.2, &mut r);
            rows.push((e, f, 1));
        }
        for e in m.world.monolingual(4) {
            let f = corrupt(&e, 0.45, &mut r);
            rows.push((e, f, 2));
        }
        for i in (1..rows.len()).rev() {
            rows.swap(i, r.gen_range(0..=i));
        }
        let e_text: Vec<&str> = rows.iter().map(|x| x.0.as_str()).collect();
        let f_text: Vec<&str> = rows.iter().map(|x| x.1.as_str()).collect();
        let ex = extractor
            .run(&e_text.join(" "), &f_text.join(" "))
            .map_err(|e| e.to_string())?;
        for p in ex.pairs {
            let tier = rows.iter().find(|x| p.src.contains(x.0.as_str())).map(|x| x.2);
            items.push((p.cost, tier == Some(0), p.s_a + p.s_d));
        }
    }
    let scores: Vec<f64> = items.iter().map(|x| x.2).collect();
    let parts = partition_by_score(&items, &scores, 0.2).map_err(|e| e.to_string())?;
    let mean_cost = |v: &[(f64, bool, f64)]| v.iter().map(|x| x.0).sum::<f64>() / v.len() as f64;
    let in_frac = |v: &[(f64, bool, f64)]| v.iter().filter(|x| x.1).count() as f64 / v.len() as f64;
    let (tc, bc) = (mean_cost(&parts.top), mean_cost(&parts.bottom));
    let (ti, bi) = (in_frac(&parts.top), in_frac(&parts.bottom));
    let summary = format!(
        "{} pairs; mean cost top {tc:.3} / middle {:.3} / bottom {bc:.3}; in-domain share top {ti:.2} / bottom {bi:.2}",
        items.len(),
        mean_cost(&parts.middle)
    );
    ensure!(tc < bc, "top cost not below bottom: {summary}");
    ensure!(ti > bi, "top in-domain share not above bottom: {summary}");
    Ok(summary)
}

async fn service_end_to_end() -> Outcome {
    const ADMIN: &str = "acceptance-admin-token";
    let mut world = SyntheticWorld::new(8008);
    let (e, f) = world.parallel(10);
    // what the extraction step yields on the bare sentences, no web involved
    let expected = {
        let in_lm = train_lm(&sents(&world.dev), 3, TokenizerMode::Whitespace).unwrap();
        let gen_lm = train_lm(&sents(&world.general), 3, TokenizerMode::Whitespace).unwrap();
        let extractor = Extractor {
            lid: &world.lid,
            in_domain: &in_lm,
            general: &gen_lm,
            embedder: &EmbedderConfig::default(),
            lang_e: "en",
            lang_f: "de",
            min_lid_confidence: 0.6,
            align: &AlignParams::default(),
            reward: &RewardParams::default(),
        };
        let ex = extractor.run(&e.join(" "), &f.join(" ")).map_err(|e| e.to_string())?;
        ex.pairs.len() as u64
    };
    ensure!(expected >= 8, "fixture yields only {expected} pairs offline");
    let site = FixtureSite::new()
        .robots("User-agent: *\nDisallow: /private/\n")
        .page("/en/a.html", FixturePage::html(html_page("A", &e)))
        .page("/de/a.html", FixturePage::html(html_page("A", &f)))
        .page("/private/de.html", FixturePage::html(html_page("P", &f)))
        .start()
        .await
        .map_err(|e| e.to_string())?;
    let config = ServiceConfig {
        admin_token: ADMIN.into(),
        fetch: crowdmine::FetchPolicy {
            per_host_min_interval_secs: 0.05,
            ..Default::default()
        },
        lm_order: 3,
        ..ServiceConfig::default()
    };
    let service = Service::start(config, world.lid.clone(), Arc::new(Store::in_memory())).map_err(|e| e.to_string())?;
    let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.map_err(|e| e.to_string())?;
    let base = format!("http://{}", listener.local_addr().unwrap());
    tokio::spawn(crowdmine_service::api::serve(service.clone(), listener));

    let admin = ApiClient::new(&base, ADMIN);
    let err = |e: crowdmine_service::client::ClientError| e.to_string();
    let campaign = admin
        .post_json(
            "/v1/campaigns",
            &json!({
                "domain": "toy", "lang_e": "en", "lang_f": "de",
                "dev_sentences": world.dev,
                "general_lm": { "sentences": world.general },
            }),
        )
        .await
        .map_err(err)?["id"]
        .as_u64()
        .unwrap();
    let mut workers = Vec::new();
    for name in ["ann", "ben"] {
        let w = admin.post_json("/v1/workers", &json!({ "name": name })).await.map_err(err)?;
        workers.push((w["id"].as_u64().unwrap(), admin.with_token(w["token"].as_str().unwrap())));
    }
    let path = format!("/v1/campaigns/{campaign}/reports");
    let body = |a: &str, b: &str| json!({ "url_a": site.url(a), "url_b": site.url(b) });

    let good = workers[0].1.post_json(&path, &body("/en/a.html", "/de/a.html")).await.map_err(err)?;
    let good = good["id"].as_u64().unwrap();
    let dup = workers[1].1.post_raw(&path, &body("/de/a.html", "/en/a.html")).await.map_err(err)?;
    let dup_json = dup.json().map_err(|e| e.to_string())?;
    ensure!(
        dup.status == 409 && dup_json["error"]["code"] == "duplicate_report",
        "reversed duplicate answered {} {}",
        dup.status,
        dup.body
    );
    let blocked = workers[1].1.post_json(&path, &body("/private/de.html", "/en/a.html")).await.map_err(err)?;
    let blocked = blocked["id"].as_u64().unwrap();

    let wait = |id: u64| {
        let admin = admin.clone();
        async move {
            let start = Instant::now();
            loop {
                let r = admin.get_json(&format!("/v1/reports/{id}")).await.map_err(|e| e.to_string())?;
                if r["status"] == "done" || r["status"] == "failed" {
                    return Ok::<_, String>(r);
                }
                if start.elapsed() > Duration::from_secs(60) {
                    return Err(format!("report {id} still {}", r["status"]));
                }
                tokio::time::sleep(Duration::from_millis(50)).await;
            }
        }
    };
    let done = wait(good).await?;
    ensure!(done["status"] == "done", "parallel report ended as {done}");
    let pairs = done["pair_count"].as_u64().unwrap_or(0);
    let amount = done["reward"]["amount"].as_u64().unwrap_or(0);
    ensure!(pairs == expected, "expected {expected} pairs, got {pairs}");
    for p in done["pairs"].as_array().unwrap() {
        let (src, tgt) = (p["src"].as_str().unwrap(), p["tgt"].as_str().unwrap());
        ensure!(translate(src) == tgt, "non-parallel pair {src:?} / {tgt:?}");
    }
    ensure!(amount > 10, "reward {amount} not above r_min");

    let failed = wait(blocked).await?;
    ensure!(
        failed["status"] == "failed" && failed["failure"]["code"] == "robots_denied",
        "robots-blocked report ended as {failed}"
    );
    let content_hits = site.requests_for("/private/de.html").len();
    ensure!(content_hits == 0, "{content_hits} requests for the disallowed page");

    let mut ledger = 0;
    for (id, _) in &workers {
        let l = admin.get_json(&format!("/v1/workers/{id}/ledger")).await.map_err(err)?;
        ledger += l["total"].as_u64().unwrap();
    }
    ensure!(ledger == amount, "ledger total {ledger} vs rewards {amount}");
    Ok(format!(
        "{pairs}/{expected} expected pairs paid {amount}; reversed duplicate -> 409 duplicate_report; robots -> robots_denied with 0 content requests; ledger {ledger} = rewards {amount}"
    ))
}

fn main() {
    let criteria: Vec<(&str, &str, u64, Box<dyn Fn() -> Outcome>)> = vec![
        ("1", "aligner matches exhaustive search", 30, Box::new(aligner_matches_exhaustive_search)),
        ("2", "cost threshold holds end to end", 5, Box::new(threshold_fidelity)),
        ("3", "synthetic bitext recovery", 60, Box::new(synthetic_bitext_recovery)),
        ("4", "language model correctness", 60, Box::new(lm_correctness)),
        ("5", "Moore-Lewis selection recall", 120, Box::new(moore_lewis_selection)),
        ("6", "reward contract", 5, Box::new(reward_contract)),
        ("7", "score partition trend", 30, Box::new(partition_trend)),
        (
            "8",
            "service end to end",
            120,
            Box::new(|| {
                tokio::runtime::Builder::new_multi_thread()
                    .worker_threads(4)
                    .enable_all()
                    .build()
                    .unwrap()
                    .block_on(service_end_to_end())
            }),
        ),
    ];
    let only: Option<String> = std::env::args().skip(1).find(|a| !a.starts_with('-'));
    let mut failures = 0;
    let mut results = BTreeMap::new();
    for (id, name, limit, f) in &criteria {
        if only.as_deref().is_some_and(|o| o != *id) {
            continue;
        }
        let start = Instant::now();
        let outcome = std::panic::catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        let secs = start.elapsed().as_secs_f64();
        let (verdict, detail) = match outcome {
            Ok(d) if secs <= *limit as f64 => ("PASS", d),
            Ok(d) => ("FAIL", format!("over the {limit} s limit; {d}")),
            Err(e) => ("FAIL", e),
        };
        if verdict == "FAIL" {
            failures += 1;
        }
        println!("criterion {id} {name:<36} {verdict}  {secs:6.2} s / {limit} s  {detail}");
        results.insert(*id, verdict);
    }
    println!(
        "{} passed, {failures} failed",
        results.values().filter(|v| **v == "PASS").count()
    );
    if failures > 0 {
        std::process::exit(1);
    }
}
