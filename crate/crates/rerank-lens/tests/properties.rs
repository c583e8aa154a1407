//! Property tests for the spec-level invariants that cut across modules.

use proptest::prelude::*;
use std::collections::HashSet;

use rerank_lens::corpus::{chunk_newlines, Dataset, Passage, Sample};
use rerank_lens::lexical::{self, Bm25Params, SimilarityMatrix, TokenizerConfig};
use rerank_lens::metrics::{self, RelevanceView};
use rerank_lens::rerankers::{self, window_schedule};

const VOCAB: &[&str] = &["ada", "bee", "cod", "dew", "elm", "fig"];

fn vocab_text() -> impl Strategy<Value = String> {
    proptest::collection::vec(0..VOCAB.len(), 1..8)
        .prop_map(|ix| ix.into_iter().map(|i| VOCAB[i]).collect::<Vec<_>>().join(" "))
}

fn small_sample() -> impl Strategy<Value = Sample> {
    (2..=4usize)
        .prop_flat_map(|n| {
            let golds = proptest::collection::vec(any::<bool>(), n)
                .prop_filter("mixed labels", |g| {
                    g.iter().any(|&x| x) && g.iter().any(|&x| !x)
                });
            (
                Just(n),
                golds,
                proptest::collection::vec(vocab_text(), n),
                vocab_text(),
            )
        })
        .prop_map(|(n, golds, texts, query)| Sample {
            id: "s".into(),
            query,
            claimant: None,
            passages: (0..n)
                .map(|i| Passage::new(format!("p{i}"), texts[i].clone(), golds[i]))
                .collect(),
        })
}

/// Naive BM25 reference: recomputes every quantity inline from the
/// formula, no shared helpers with the implementation.
fn bm25_reference(sample: &Sample, k1: f64, b: f64) -> Vec<f64> {
    let tokens = |text: &str| -> Vec<String> {
        text.split(|c: char| !c.is_alphanumeric())
            .filter(|t| !t.is_empty())
            .map(|t| t.to_lowercase())
            .collect()
    };
    let docs: Vec<Vec<String>> = sample.passages.iter().map(|p| tokens(&p.text)).collect();
    let n = docs.len() as f64;
    let avgdl = docs.iter().map(Vec::len).sum::<usize>() as f64 / n;
    let query = tokens(&sample.query);
    docs.iter()
        .map(|doc| {
            let mut score = 0.0;
            for term in &query {
                let tf = doc.iter().filter(|t| *t == term).count() as f64;
                if tf == 0.0 {
                    continue;
                }
                let df = docs
                    .iter()
                    .filter(|d| d.iter().any(|t| t == term))
                    .count() as f64;
                let idf = ((n - df + 0.5) / (df + 0.5) + 1.0).ln();
                score += idf * (tf * (k1 + 1.0)) / (tf + k1 * (1.0 - b + b * doc.len() as f64 / avgdl));
            }
            score
        })
        .collect()
}

proptest! {
    #[test]
    fn bm25_matches_naive_reference(sample in small_sample()) {
        let params = Bm25Params::default();
        let got = lexical::bm25_scores(&sample, &params, &TokenizerConfig::new());
        let want = bm25_reference(&sample, params.k1, params.b);
        for (&(_, g), w) in got.scores.iter().zip(&want) {
            prop_assert!((g - w).abs() < 1e-9, "{g} vs {w}");
            prop_assert!(g >= 0.0);
        }
    }

    #[test]
    fn bm25_extra_occurrence_never_decreases(sample in small_sample(), slot in 0..4usize) {
        // Monotonicity holds per query term: with a single-token query,
        // one more occurrence of it (length adjustments recomputed as
        // the scorer computes them) never lowers the passage's score.
        // Multi-term queries can interfere through the length norm.
        let params = Bm25Params::default();
        let tok = TokenizerConfig::new();
        let slot = slot % sample.passages.len();
        let p_tokens: HashSet<String> =
            lexical::tokenize(&sample.passages[slot].text, &tok).into_iter().collect();
        let Some(term) = p_tokens.iter().next().cloned() else {
            return Ok(());
        };
        let mut sample = sample;
        sample.query = term.clone();
        let before = lexical::bm25_scores(&sample, &params, &tok).scores[slot].1;
        let mut bumped = sample.clone();
        bumped.passages[slot].text = format!("{} {term}", bumped.passages[slot].text);
        let after = lexical::bm25_scores(&bumped, &params, &tok).scores[slot].1;
        prop_assert!(after >= before - 1e-12, "{after} < {before}");
    }

    #[test]
    fn jaccard_range_and_symmetry(a in vocab_text(), b in vocab_text()) {
        let tok = TokenizerConfig::new();
        let mk = |query: &str, text: &str| Sample {
            id: "s".into(),
            query: query.to_string(),
            claimant: None,
            passages: vec![
                Passage::new("p1", text, true),
                Passage::new("p2", "zzz", false),
            ],
        };
        let ab = lexical::jaccard_scores(&mk(&a, &b), &tok).scores[0].1;
        let ba = lexical::jaccard_scores(&mk(&b, &a), &tok).scores[0].1;
        prop_assert!((0.0..=1.0).contains(&ab));
        prop_assert_eq!(ab, ba);
    }

    #[test]
    fn tokenizer_idempotent(text in "\\PC{0,60}") {
        let tok = TokenizerConfig::new();
        let once = lexical::tokenize(&text, &tok);
        let again = lexical::tokenize(&once.join(" "), &tok);
        prop_assert_eq!(once, again);
    }

    #[test]
    fn schedule_covers_ends_and_is_deterministic(
        n in 1..200usize,
        w in 1..40usize,
        s in 1..40usize,
    ) {
        prop_assume!(s <= w);
        let sched = window_schedule(n, w, s);
        prop_assert_eq!(sched.clone(), window_schedule(n, w, s));
        prop_assert_eq!(sched.first().unwrap().1, n);
        prop_assert_eq!(sched.last().unwrap().0, 0);
        for &(start, end) in &sched {
            prop_assert!(end - start == w.min(n));
            prop_assert!(end <= n);
        }
    }

    #[test]
    fn sliding_window_conserves_ids(
        keys in proptest::collection::vec(-50i64..50, 2..12),
        w in 2..6usize,
        s in 1..3usize,
    ) {
        prop_assume!(s <= w);
        let sample = Sample {
            id: "s".into(),
            query: "q".into(),
            claimant: None,
            passages: keys
                .iter()
                .enumerate()
                .map(|(i, k)| Passage::new(format!("p{}", i + 1), format!("key={k}"), i == 0))
                .collect(),
        };
        let mut cfg = rerankers::ListwiseLlmConfig::new("mock://", "t");
        cfg.window_size = w;
        cfg.step_size = s;
        cfg.backoff_base = std::time::Duration::ZERO;
        let transport = |messages: &[rerankers::Message]| {
            // Reverse each window: a permutation, content-independent.
            let n = messages
                .iter()
                .filter(|m| m.role == rerankers::Role::User && m.content.starts_with('['))
                .count();
            Ok((1..=n).rev().map(|i| format!("[{i}]")).collect::<Vec<_>>().join(" > "))
        };
        let out = rerankers::rerank_listwise(&sample, "q", &cfg, &transport).unwrap();
        let mut got: Vec<&str> = out.ranking.order.iter().map(|s| s.as_str()).collect();
        let mut want: Vec<String> = sample.passages.iter().map(|p| p.id.clone()).collect();
        got.sort_unstable();
        want.sort_unstable();
        prop_assert_eq!(got, want.iter().map(|s| s.as_str()).collect::<Vec<_>>());
    }

    #[test]
    fn rank_by_scores_is_stable_descending(scores in proptest::collection::vec(-3i32..3, 2..7)) {
        let sample = Sample {
            id: "s".into(),
            query: "q".into(),
            claimant: None,
            passages: (0..scores.len())
                .map(|i| Passage::new(format!("p{i}"), "t", i == 0))
                .collect(),
        };
        let matrix = SimilarityMatrix {
            sample_id: "s".into(),
            measure: "bm25".into(),
            scores: scores
                .iter()
                .enumerate()
                .map(|(i, &s)| (format!("p{i}"), s as f64))
                .collect(),
        };
        let ranking = rerankers::rerank_bm25(&sample, &matrix).unwrap();
        let score_of = |id: &str| matrix.scores.iter().find(|(p, _)| p == id).unwrap().1;
        let index_of = |id: &str| id[1..].parse::<usize>().unwrap();
        for pair in ranking.order.windows(2) {
            let (a, b) = (score_of(&pair[0]), score_of(&pair[1]));
            prop_assert!(a >= b);
            if a == b {
                prop_assert!(index_of(&pair[0]) < index_of(&pair[1]), "unstable tie");
            }
        }
    }

    #[test]
    fn scale_invariance_of_separation_linkage(
        raw in proptest::collection::vec((any::<bool>(), 0..1000u32), 2..8),
        scale_exp in -3..4i32,
    ) {
        prop_assume!(raw.iter().any(|&(g, _)| g) && raw.iter().any(|&(g, _)| !g));
        let c = 10f64.powi(scale_exp);
        let sample = Sample {
            id: "s".into(),
            query: "q".into(),
            claimant: None,
            passages: raw
                .iter()
                .enumerate()
                .map(|(i, &(g, _))| Passage::new(format!("p{i}"), "t", g))
                .collect(),
        };
        let matrix = |mult: f64| SimilarityMatrix {
            sample_id: "s".into(),
            measure: "bm25".into(),
            scores: raw
                .iter()
                .enumerate()
                .map(|(i, &(_, s))| (format!("p{i}"), s as f64 * mult))
                .collect(),
        };
        let (base, scaled) = (matrix(1.0), matrix(c));
        let d1 = metrics::separation(&sample, &base).unwrap();
        let d2 = metrics::separation(&sample, &scaled).unwrap();
        prop_assert!((d2 - c * d1).abs() <= 1e-9 * d1.abs().max(1.0) * c.max(1.0));
        // Partition membership at threshold 0 is scale-free.
        prop_assert_eq!(d1 < 0.0, d2 < 0.0);
        // The baseline's top passage is unchanged by positive scaling.
        let r1 = rerankers::rerank_bm25(&sample, &base).unwrap();
        let r2 = rerankers::rerank_bm25(&sample, &scaled).unwrap();
        prop_assert_eq!(r1.order[0].clone(), r2.order[0].clone());
    }

    #[test]
    fn delta_bounds_and_coincidence(samples in proptest::collection::vec(small_sample(), 1..5)) {
        let samples: Vec<Sample> = samples
            .into_iter()
            .enumerate()
            .map(|(i, mut s)| {
                s.id = format!("s{i}");
                s
            })
            .collect();
        let dataset = Dataset::new("d", samples).unwrap();
        // Scores equal to the gold indicator make the bm25-max view
        // coincide with the gold view, forcing delta = 0.
        let matrices: Vec<SimilarityMatrix> = dataset
            .samples()
            .iter()
            .map(|s| SimilarityMatrix {
                sample_id: s.id.clone(),
                measure: "bm25".into(),
                scores: s
                    .passages
                    .iter()
                    .map(|p| (p.id.clone(), if p.gold { 1.0 } else { 0.0 }))
                    .collect(),
            })
            .collect();
        let rankings: Vec<_> = dataset
            .samples()
            .iter()
            .zip(&matrices)
            .map(|(s, m)| rerankers::rerank_bm25(s, m).unwrap())
            .collect();
        let gold = RelevanceView::gold_labels(&dataset);
        let bm25 = RelevanceView::bm25_max(&dataset, &matrices).unwrap();
        let delta = metrics::delta_p_at_1(&rankings, &gold, &bm25).unwrap();
        prop_assert!((-1.0..=1.0).contains(&delta.value));
        prop_assert_eq!(delta.value, 0.0);
    }

    #[test]
    fn ndcg_never_exceeds_one(sample in small_sample(), seed in any::<u64>()) {
        use rand::seq::SliceRandom;
        use rand::SeedableRng;
        let dataset = Dataset::new("d", vec![sample]).unwrap();
        let view = RelevanceView::gold_labels(&dataset);
        let mut order: Vec<String> = dataset.samples()[0]
            .passages
            .iter()
            .map(|p| p.id.clone())
            .collect();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        order.shuffle(&mut rng);
        let ranking = rerank_lens::Ranking {
            sample_id: "s".into(),
            order,
            scores: None,
        };
        for k in 1..=4 {
            let m = metrics::ndcg_at_k(std::slice::from_ref(&ranking), &view, k).unwrap();
            prop_assert!(m.value <= 1.0 + 1e-12);
        }
    }

    #[test]
    fn dataset_stats_match_independent_fold(counts in proptest::collection::vec(2..9usize, 1..8)) {
        let samples: Vec<Sample> = counts
            .iter()
            .enumerate()
            .map(|(i, &n)| Sample {
                id: format!("s{i}"),
                query: "q".into(),
                claimant: None,
                passages: (0..n)
                    .map(|j| Passage::new(format!("p{j}"), "t", j == 0))
                    .collect(),
            })
            .collect();
        let dataset = Dataset::new("d", samples).unwrap();
        let stats = dataset.stats();
        let total: usize = counts.iter().sum();
        prop_assert_eq!(stats.samples, counts.len());
        prop_assert_eq!(stats.mean_passages, total as f64 / counts.len() as f64);
        prop_assert_eq!(stats.min_passages, *counts.iter().min().unwrap());
        prop_assert_eq!(stats.max_passages, *counts.iter().max().unwrap());
        prop_assert_eq!(stats.gold_per_sample.get(&1), Some(&counts.len()));
    }

    #[test]
    fn newline_chunks_partition_document(
        paragraphs in proptest::collection::vec("[a-z]{1,8}( [a-z]{1,8}){0,4}", 1..6),
        gap in 1..3usize,
    ) {
        let document = paragraphs.join(&"\n".repeat(gap + 1));
        let excerpt = paragraphs[0].clone();
        let passages = chunk_newlines(&document, &excerpt, 0.0).unwrap();
        let rejoined: Vec<&str> = passages.iter().flat_map(|p| p.text.lines()).collect();
        let original: Vec<&str> = document.lines().filter(|l| !l.trim().is_empty()).collect();
        prop_assert_eq!(rejoined, original);
        prop_assert_eq!(passages.iter().filter(|p| p.gold).count(), 1);
    }
}
