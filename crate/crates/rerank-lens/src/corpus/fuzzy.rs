//! Fuzzy text matching for gold-passage alignment.
//!
//! Similarity is the normalized indel ratio `1 - d / (|a| + |b|)` where `d`
//! is the insertion/deletion edit distance, computed on lowercased,
//! whitespace-collapsed text. Equivalent to `2 * LCS(a, b) / (|a| + |b|)`.

/// Normalized indel similarity between two texts in [0, 1].
///
/// Both inputs are normalized first: lowercased, whitespace runs collapsed
/// to a single space, ends trimmed. Two empty (or whitespace-only) texts
/// compare as 1.0.
pub fn similarity(a: &str, b: &str) -> f64 {
    let a = normalize(a);
    let b = normalize(b);
    let (na, nb) = (a.chars().count(), b.chars().count());
    if na + nb == 0 {
        return 1.0;
    }
    let lcs = lcs_len(&a, &b);
    let indel = na + nb - 2 * lcs;
    1.0 - indel as f64 / (na + nb) as f64
}

fn normalize(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    let mut pending_space = false;
    for ch in text.trim().chars() {
        if ch.is_whitespace() {
            pending_space = true;
        } else {
            if pending_space && !out.is_empty() {
                out.push(' ');
            }
            pending_space = false;
            for lc in ch.to_lowercase() {
                out.push(lc);
            }
        }
    }
    out
}

/// Length of the longest common subsequence, two-row DP.
fn lcs_len(a: &str, b: &str) -> usize {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    if a.is_empty() || b.is_empty() {
        return 0;
    }
    let mut prev = vec![0usize; b.len() + 1];
    let mut cur = vec![0usize; b.len() + 1];
    for &ca in &a {
        for (j, &cb) in b.iter().enumerate() {
            cur[j + 1] = if ca == cb {
                prev[j] + 1
            } else {
                prev[j + 1].max(cur[j])
            };
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}
