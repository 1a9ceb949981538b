//! Word tokenization shared by the hashing embedder, term extraction and the
//! lexical entailment backend.

/// Lowercased runs of Unicode alphanumeric characters.
pub fn words(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|w| !w.is_empty())
        .map(str::to_lowercase)
        .collect()
}

/// All n-grams with `lo <= n <= hi`, words joined by a single space.
/// N-grams never cross the boundary of the token slice they come from.
pub fn ngrams(tokens: &[String], lo: usize, hi: usize) -> Vec<String> {
    let mut out = Vec::new();
    for n in lo..=hi {
        if n == 0 || n > tokens.len() {
            continue;
        }
        out.extend(tokens.windows(n).map(|w| w.join(" ")));
    }
    out
}

/// Split on whitespace and keep the first `max_tokens` tokens, joined by single spaces.
/// Returns the input unchanged when it already fits.
pub fn truncate_whitespace_tokens(text: &str, max_tokens: usize) -> String {
    let mut tokens = text.split_whitespace();
    let kept: Vec<&str> = tokens.by_ref().take(max_tokens).collect();
    if tokens.next().is_none() {
        text.to_string()
    } else {
        kept.join(" ")
    }
}
