use std::sync::LazyLock;

use regex::Regex;

use super::porter;
use super::{NormalizedToken, TokenKind};

#[derive(Clone, Copy, PartialEq, Eq)]
enum Class {
    Lower,
    Upper,
    Digit,
    Other,
}

fn class(c: char) -> Class {
    if c.is_numeric() {
        Class::Digit
    } else if c.is_uppercase() {
        Class::Upper
    } else if c.is_lowercase() {
        Class::Lower
    } else {
        Class::Other
    }
}

/// Splits an alphanumeric run at camel humps (`aB`), acronym ends (`ABc` →
/// `A`,`Bc`) and digit/letter boundaries.
fn camel_pieces(run: &str) -> Vec<&str> {
    let chars: Vec<(usize, char)> = run.char_indices().collect();
    let mut out = Vec::new();
    let mut start = 0;
    for w in 1..chars.len() {
        let (pos, c) = chars[w];
        let prev = class(chars[w - 1].1);
        let cur = class(c);
        let next = chars.get(w + 1).map(|&(_, n)| class(n));
        let boundary = match (prev, cur) {
            (Class::Digit, x) | (x, Class::Digit) if x != Class::Digit => true,
            (Class::Lower, Class::Upper) | (Class::Other, Class::Upper) => true,
            (Class::Upper, Class::Upper) => next == Some(Class::Lower),
            _ => false,
        };
        if boundary {
            out.push(&run[start..pos]);
            start = pos;
        }
    }
    out.push(&run[start..]);
    out
}

/// Normalizes one raw token: split at separators and camel/digit
/// boundaries, lowercase, Porter-stem. Pieces that end up empty are dropped.
pub fn normalize_token(raw: &str, kind: TokenKind) -> Vec<NormalizedToken> {
    raw.split(|c: char| !c.is_alphanumeric())
        .filter(|s| !s.is_empty())
        .flat_map(camel_pieces)
        .filter_map(|piece| {
            let lower = piece.to_lowercase();
            let text = porter::stem(&lower);
            (!text.is_empty()).then_some(NormalizedToken { text, kind })
        })
        .collect()
}

static CODE_LIKE: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"[\p{L}\p{N}](?:\.|_|::)[\p{L}\p{N}]|[\p{L}\p{N}_]\(|\([\p{L}\p{N}_)]|\p{Ll}\p{Lu}")
        .expect("static regex")
});

/// Whether a whitespace token looks like code: `.`, `_`, `::` joined to
/// word characters on both sides, a parenthesis attached to a word, or a
/// camel hump.
pub fn is_code_like(token: &str) -> bool {
    CODE_LIKE.is_match(token)
}
