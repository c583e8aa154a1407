//! Chunking raw documents into passages.
//!
//! Two strategies are implemented here; pre-chunked input needs none.
//!
//! * [`chunk_html`] segments flat, NQ-style markup on top-level elements
//!   and assigns the gold label from a token index span.
//! * [`chunk_newlines`] splits plain text on blank lines and assigns the
//!   gold label by fuzzy-matching an excerpt against each paragraph.

use super::{fuzzy, CorpusError, Passage};
use std::ops::Range;

/// Tag names that open a top-level element. `li` is handled separately:
/// consecutive top-level list items merge into one passage.
const CONTAINER_TAGS: &[&str] = &[
    "p", "table", "ul", "ol", "tr", "h1", "h2", "h3", "h4", "h5", "h6",
];

#[derive(Debug, Clone, Copy)]
struct Token {
    start: usize,
    end: usize,
    kind: TokenKind,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum TokenKind {
    /// Opening tag with index into a side table of names.
    Open(usize),
    /// Closing tag (`</...>`).
    Close(usize),
    Word,
}

/// Lexes a document into a flat token stream: each `<...>` tag is one
/// token, text between tags splits on whitespace. Matches NQ-style
/// pre-tokenized markup, where tags count as tokens.
fn lex(document: &str) -> (Vec<Token>, Vec<String>) {
    let bytes = document.as_bytes();
    let mut tokens = Vec::new();
    let mut names: Vec<String> = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        if c.is_ascii_whitespace() {
            i += 1;
        } else if c == b'<' {
            match document[i..].find('>') {
                Some(rel) => {
                    let end = i + rel + 1;
                    let inner = document[i + 1..end - 1].trim();
                    let (is_close, rest) = match inner.strip_prefix('/') {
                        Some(r) => (true, r),
                        None => (false, inner),
                    };
                    let name: String = rest
                        .chars()
                        .take_while(|ch| ch.is_ascii_alphanumeric())
                        .collect::<String>()
                        .to_ascii_lowercase();
                    names.push(name);
                    let kind = if is_close {
                        TokenKind::Close(names.len() - 1)
                    } else {
                        TokenKind::Open(names.len() - 1)
                    };
                    tokens.push(Token { start: i, end, kind });
                    i = end;
                }
                None => {
                    // Unterminated '<': treat the rest as one word.
                    tokens.push(Token {
                        start: i,
                        end: bytes.len(),
                        kind: TokenKind::Word,
                    });
                    i = bytes.len();
                }
            }
        } else {
            let start = i;
            while i < bytes.len() && !bytes[i].is_ascii_whitespace() && bytes[i] != b'<' {
                i += 1;
            }
            tokens.push(Token {
                start,
                end: i,
                kind: TokenKind::Word,
            });
        }
    }
    (tokens, names)
}

/// A contiguous run of tokens forming one passage candidate.
struct Segment {
    /// Token index range, end exclusive.
    tokens: Range<usize>,
}

/// Splits the token stream into top-level segments: recognized container
/// elements, groups of consecutive top-level `<li>` items, and runs of
/// free text between them.
fn segment(tokens: &[Token], names: &[String]) -> Vec<Segment> {
    let mut segments = Vec::new();
    let mut free_start: Option<usize> = None;
    let mut i = 0;

    let flush_free = |upto: usize, start: &mut Option<usize>, segs: &mut Vec<Segment>| {
        if let Some(s) = start.take() {
            if s < upto {
                segs.push(Segment { tokens: s..upto });
            }
        }
    };

    while i < tokens.len() {
        let container = match tokens[i].kind {
            TokenKind::Open(n) => {
                let name = names[n].as_str();
                if CONTAINER_TAGS.contains(&name) || name == "li" {
                    Some(name.to_string())
                } else {
                    None
                }
            }
            _ => None,
        };
        match container {
            Some(name) => {
                flush_free(i, &mut free_start, &mut segments);
                let start = i;
                let mut end = consume_element(tokens, names, i, &name);
                if name == "li" {
                    // Merge consecutive top-level list items into one group.
                    while end < tokens.len() {
                        if let TokenKind::Open(n) = tokens[end].kind {
                            if names[n] == "li" {
                                end = consume_element(tokens, names, end, "li");
                                continue;
                            }
                        }
                        break;
                    }
                }
                segments.push(Segment { tokens: start..end });
                i = end;
            }
            None => {
                if free_start.is_none() {
                    free_start = Some(i);
                }
                i += 1;
            }
        }
    }
    flush_free(tokens.len(), &mut free_start, &mut segments);
    segments
}

/// Consumes one element starting at the opening tag `tokens[open]`,
/// returning the index just past its matching close tag. Same-name tags
/// nest (NQ tables contain tables); an unclosed element runs to the end.
fn consume_element(tokens: &[Token], names: &[String], open: usize, name: &str) -> usize {
    let mut depth = 1;
    let mut i = open + 1;
    while i < tokens.len() {
        match tokens[i].kind {
            TokenKind::Open(n) if names[n] == name => depth += 1,
            TokenKind::Close(n) if names[n] == name => {
                depth -= 1;
                if depth == 0 {
                    return i + 1;
                }
            }
            _ => {}
        }
        i += 1;
    }
    tokens.len()
}

/// Segments NQ-style markup into one passage per top-level element and
/// assigns the gold label from `gold_span`, a token index range over the
/// whole document (tags count as tokens). Passages after the gold passage
/// are dropped, so the gold passage is always last.
///
/// Errors when no single element covers the span.
pub fn chunk_html(document: &str, gold_span: Range<usize>) -> Result<Vec<Passage>, CorpusError> {
    if document.trim().is_empty() {
        return Err(CorpusError::EmptyDocument);
    }
    let (tokens, names) = lex(document);
    let segments = segment(&tokens, &names);

    let not_covered = CorpusError::GoldSpanNotCovered {
        start: gold_span.start,
        end: gold_span.end,
        n_tokens: tokens.len(),
    };
    if gold_span.start >= gold_span.end || gold_span.end > tokens.len() {
        return Err(not_covered);
    }
    let gold_idx = segments
        .iter()
        .position(|seg| seg.tokens.start <= gold_span.start && gold_span.end <= seg.tokens.end)
        .ok_or(not_covered)?;

    let passages = segments[..=gold_idx]
        .iter()
        .enumerate()
        .map(|(i, seg)| {
            let start = tokens[seg.tokens.start].start;
            let end = tokens[seg.tokens.end - 1].end;
            Passage::new(
                format!("p{}", i + 1),
                document[start..end].trim().to_string(),
                i == gold_idx,
            )
        })
        .collect();
    Ok(passages)
}

/// Splits plain text into paragraphs (maximal runs of non-blank lines)
/// and marks as gold the paragraph with the highest fuzzy-match score
/// against `gold_excerpt`, provided that score reaches `threshold`.
/// Exactly one passage comes out gold. Ties keep the earliest paragraph.
pub fn chunk_newlines(
    document: &str,
    gold_excerpt: &str,
    threshold: f64,
) -> Result<Vec<Passage>, CorpusError> {
    if document.trim().is_empty() {
        return Err(CorpusError::EmptyDocument);
    }
    if gold_excerpt.trim().is_empty() {
        return Err(CorpusError::EmptyGoldExcerpt);
    }
    if !(0.0..=1.0).contains(&threshold) {
        return Err(CorpusError::InvalidThreshold { threshold });
    }

    let mut paragraphs: Vec<String> = Vec::new();
    let mut current: Vec<&str> = Vec::new();
    for line in document.lines() {
        if line.trim().is_empty() {
            if !current.is_empty() {
                paragraphs.push(current.join("\n"));
                current.clear();
            }
        } else {
            current.push(line);
        }
    }
    if !current.is_empty() {
        paragraphs.push(current.join("\n"));
    }

    let scores: Vec<f64> = paragraphs
        .iter()
        .map(|p| fuzzy::similarity(p, gold_excerpt))
        .collect();
    let (best_idx, best) = scores
        .iter()
        .copied()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |acc, (i, s)| {
            if s > acc.1 {
                (i, s)
            } else {
                acc
            }
        });
    if best < threshold {
        return Err(CorpusError::GoldNotMatched { best, threshold });
    }

    Ok(paragraphs
        .into_iter()
        .enumerate()
        .map(|(i, text)| Passage::new(format!("p{}", i + 1), text, i == best_idx))
        .collect())
}
