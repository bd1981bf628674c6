//! Character-offset helpers.
//!
//! Offsets throughout the crate count Unicode scalar values, the same unit
//! Python string indices use, so SQuAD `answer_start` values and tokenizer
//! offset mappings line up with what Python tooling produces.

pub fn char_len(s: &str) -> usize {
    s.chars().count()
}

/// Slice `s` by half-open character offsets. `None` if out of range.
pub fn char_slice(s: &str, start: usize, end: usize) -> Option<&str> {
    if start > end {
        return None;
    }
    let byte_at = |target: usize| -> Option<usize> {
        if target == 0 {
            return Some(0);
        }
        s.char_indices()
            .map(|(b, _)| b)
            .chain(std::iter::once(s.len()))
            .nth(target)
    };
    let b0 = byte_at(start)?;
    let b1 = byte_at(end)?;
    Some(&s[b0..b1])
}

/// Whitespace-separated words with their character offsets.
pub fn words_with_offsets(s: &str) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    let mut start = None;
    let mut idx = 0;
    for ch in s.chars() {
        if ch.is_whitespace() {
            if let Some(st) = start.take() {
                out.push((st, idx));
            }
        } else if start.is_none() {
            start = Some(idx);
        }
        idx += 1;
    }
    if let Some(st) = start {
        out.push((st, idx));
    }
    out
}
