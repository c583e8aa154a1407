//! Generates the bundled DRUID-like fixture: 40 synthetic claim-checking
//! samples with engineered distractor passages, plus two oracle score
//! files — one correlated with lexical overlap (mimics a re-ranker fooled
//! by distractors) and one leaning on gold labels.
//!
//! Deterministic; re-running overwrites the same bytes:
//!
//! ```text
//! cargo run -p rerank-lens --example gen_fixture [-- <out-dir>]
//! ```

use std::collections::HashSet;
use std::fmt::Write as _;
use std::path::Path;

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use rerank_lens::corpus::{Dataset, Passage, Sample};
use rerank_lens::lexical::{self, Bm25Params, TokenizerConfig};
use rerank_lens::metrics::{separation, RelevanceView};
use rerank_lens::rerankers::rerank_bm25;

const TOPICS: &[&str] = &[
    "river", "bridge", "election", "vaccine", "satellite", "museum", "harbor", "glacier",
    "festival", "reactor", "pipeline", "stadium", "library", "volcano", "archive", "tunnel",
    "orchard", "observatory", "canal", "fortress",
];
const VERBS: &[&str] = &[
    "opened", "closed", "flooded", "collapsed", "expanded", "relocated", "reopened", "burned",
    "sold", "banned",
];
const PLACES: &[&str] = &[
    "karlstad", "geneva", "porto", "osaka", "cusco", "tallinn", "windhoek", "darwin", "quebec",
    "bergen",
];
const FILLER: &[&str] = &[
    "committee", "morning", "report", "season", "council", "weather", "traffic", "budget",
    "garden", "market", "signal", "channel", "student", "teacher", "farmer", "doctor", "window",
    "engine", "forest", "castle",
];
const ANSWER: &[&str] = &[
    "confirmed", "records", "testimony", "evidence", "inspection", "audit", "survey", "analysis",
    "documents", "witnesses",
];
const CLAIMANTS: &[&str] = &[
    "A. Lindgren", "B. Moreau", "C. Tanaka", "D. Okafor", "E. Haugen", "F. Silva", "G. Novak",
    "H. Reyes",
];

fn main() {
    let out_dir = std::env::args()
        .nth(1)
        .unwrap_or_else(|| "fixtures".to_string());
    let out_dir = Path::new(&out_dir);
    std::fs::create_dir_all(out_dir).expect("create output dir");

    let mut rng = ChaCha8Rng::seed_from_u64(40);
    let mut samples = Vec::new();
    for i in 0..40 {
        // Three of four samples are distractor-dominant: a non-gold
        // passage lexically closer to the claim than any gold passage.
        samples.push(make_sample(&mut rng, i, i % 4 != 3));
    }
    let dataset = Dataset::new("druid-like", samples).expect("valid fixture");

    verify(&dataset);

    let mut jsonl = String::new();
    for sample in dataset.samples() {
        writeln!(jsonl, "{}", serde_json::to_string(sample).unwrap()).unwrap();
    }
    std::fs::write(out_dir.join("druid_like.jsonl"), jsonl).expect("write dataset");
    std::fs::write(
        out_dir.join("overlap_scores.csv"),
        oracle_csv(&dataset, overlap_score),
    )
    .expect("write overlap oracle");
    std::fs::write(
        out_dir.join("goldlean_scores.csv"),
        oracle_csv(&dataset, goldlean_score),
    )
    .expect("write gold-leaning oracle");
    println!("wrote fixture to {}", out_dir.display());
}

fn make_sample(rng: &mut ChaCha8Rng, index: usize, distractor_dominant: bool) -> Sample {
    let topic = TOPICS[rng.random_range(0..TOPICS.len())];
    let verb = VERBS[rng.random_range(0..VERBS.len())];
    let place = PLACES[rng.random_range(0..PLACES.len())];
    let year = 1950 + rng.random_range(0..70);
    let query = format!("the {topic} in {place} {verb} in {year}");
    let claimant = CLAIMANTS[rng.random_range(0..CLAIMANTS.len())];

    let answer = |rng: &mut ChaCha8Rng| ANSWER[rng.random_range(0..ANSWER.len())];
    let filler_words = |rng: &mut ChaCha8Rng, n: usize| {
        (0..n)
            .map(|_| FILLER[rng.random_range(0..FILLER.len())])
            .collect::<Vec<_>>()
            .join(" ")
    };

    let mut passages = Vec::new();
    let gold_count = if rng.random_bool(0.25) { 2 } else { 1 };
    if distractor_dominant {
        // Distractor: repeats the claim's content words, short and dense.
        passages.push(Passage::new(
            "d",
            format!("{topic} {place}: {topic} {verb} {year}. {topic} {verb} rumour."),
            false,
        ));
        // Gold: shares almost nothing with the claim lexically.
        for g in 0..gold_count {
            passages.push(Passage::new(
                format!("g{}", g + 1),
                format!(
                    "{} {} from {} show the account is false; {} cited {}.",
                    answer(rng),
                    answer(rng),
                    filler_words(rng, 1),
                    claimant.to_lowercase().replace(". ", " "),
                    answer(rng),
                ),
                true,
            ));
        }
    } else {
        // Gold-dominant: a gold passage echoes the claim wording.
        for g in 0..gold_count {
            passages.push(Passage::new(
                format!("g{}", g + 1),
                format!("the {topic} in {place} {verb} in {year}: {} it.", answer(rng)),
                true,
            ));
        }
        passages.push(Passage::new(
            "d",
            format!("{} about a {topic} elsewhere.", filler_words(rng, 3)),
            false,
        ));
    }
    for f in 0..rng.random_range(1..=2u32) {
        passages.push(Passage::new(
            format!("f{}", f + 1),
            format!("{}.", filler_words(rng, 6)),
            false,
        ));
    }

    let mut sample = Sample {
        id: format!("dl{index:03}"),
        query,
        claimant: Some(claimant.to_string()),
        passages,
    };
    // Noisy webpage-style titles on some passages, contexts on some.
    for (i, p) in sample.passages.iter_mut().enumerate() {
        if !(index + i).is_multiple_of(3) {
            p.title = Some(format!("{} {} news", place, topic));
        }
        if (index + i).is_multiple_of(2) {
            p.context = Some(format!("From a page about the {topic} in {place}:"));
        }
        p.url = Some(format!("https://example.org/{place}/{topic}/{i}"));
    }
    sample
}

fn query_tokens(sample: &Sample) -> HashSet<String> {
    lexical::tokenize(&sample.query, &TokenizerConfig::new())
        .into_iter()
        .collect()
}

/// Oracle correlated with lexical overlap: counts shared tokens.
fn overlap_score(sample: &Sample, passage: &Passage) -> f64 {
    let q = query_tokens(sample);
    lexical::tokenize(&passage.text, &TokenizerConfig::new())
        .iter()
        .filter(|t| q.contains(*t))
        .count() as f64
}

/// Oracle leaning on gold labels, with mild text-length noise.
fn goldlean_score(_sample: &Sample, passage: &Passage) -> f64 {
    let noise = passage.text.len() % 7;
    let base = if passage.gold { 100 } else { 20 };
    (base + noise) as f64 / 100.0
}

fn oracle_csv(dataset: &Dataset, score: impl Fn(&Sample, &Passage) -> f64) -> String {
    let mut out = String::from("sample_id,passage_id,score\n");
    for sample in dataset.samples() {
        for passage in &sample.passages {
            writeln!(out, "{},{},{}", sample.id, passage.id, score(sample, passage)).unwrap();
        }
    }
    out
}

/// Self-check: the fixture must actually produce the engineered contrast.
fn verify(dataset: &Dataset) {
    let params = Bm25Params::default();
    let tok = TokenizerConfig::new();
    let matrices: Vec<_> = dataset
        .samples()
        .iter()
        .map(|s| lexical::bm25_scores(s, &params, &tok))
        .collect();

    // Tie-free: every sample separates gold from non-gold under BM25.
    for (sample, matrix) in dataset.samples().iter().zip(&matrices) {
        let d = separation(sample, matrix).expect("valid sample");
        assert!(d != 0.0, "sample {} has a BM25 tie", sample.id);
    }

    let gold_view = RelevanceView::gold_labels(dataset);
    let bm25_view = RelevanceView::bm25_max(dataset, &matrices).expect("coverage");
    let hits = |rankings: &[rerank_lens::Ranking], view: &RelevanceView| -> f64 {
        let n = rankings.len() as f64;
        rankings
            .iter()
            .filter(|r| view.relevant(&r.sample_id).unwrap().contains(r.top1().unwrap()))
            .count() as f64
            / n
    };

    for (oracle, want_negative) in [
        (overlap_score as fn(&Sample, &Passage) -> f64, true),
        (goldlean_score as fn(&Sample, &Passage) -> f64, false),
    ] {
        let rankings: Vec<_> = dataset
            .samples()
            .iter()
            .zip(&matrices)
            .map(|(s, m)| {
                let mut m = m.clone();
                for (id, score) in &mut m.scores {
                    let passage = s.passages.iter().find(|p| &p.id == id).unwrap();
                    *score = oracle(s, passage);
                }
                rerank_bm25(s, &m).expect("covered")
            })
            .collect();
        let delta = hits(&rankings, &gold_view) - hits(&rankings, &bm25_view);
        if want_negative {
            assert!(delta < 0.0, "overlap oracle delta {delta} not negative");
        } else {
            assert!(delta > 0.0, "gold-leaning oracle delta {delta} not positive");
        }
    }

    // The BM25 baseline itself must score strictly between the oracles.
    let baseline: Vec<_> = dataset
        .samples()
        .iter()
        .zip(&matrices)
        .map(|(s, m)| rerank_bm25(s, m).expect("covered"))
        .collect();
    assert_eq!(hits(&baseline, &bm25_view), 1.0);
}
