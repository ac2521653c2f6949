use std::sync::LazyLock;

use regex::Regex;

use super::{normalize_token, Origin, Part, PartKind, TagRole, TextNormalizer, TokenKind};

/// Text that did not end up inside a part.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RemovedKind {
    Tag,
    Delimiter,
    /// A segment with no surviving tokens (whitespace or punctuation only).
    Empty,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Warning {
    /// An opening tag without a closer; the rest of the text became code.
    UnbalancedTag { literal: String, offset: usize },
}

/// Parts plus everything that was cut out. Part spans and removed spans
/// together tile the input exactly.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Segmentation {
    pub parts: Vec<Part>,
    pub removed: Vec<((usize, usize), RemovedKind)>,
    pub warnings: Vec<Warning>,
}

// URLs and hex literals keep their punctuation through sentence splitting.
static PROTECTED: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"(?i)\b(?:https?|ftp)://\S+|\bwww\.\S+|\b0x[0-9a-f]+\b").expect("static regex")
});

struct Builder<'a> {
    text: &'a str,
    origin: Origin,
    out: Segmentation,
}

impl Builder<'_> {
    fn removed(&mut self, start: usize, end: usize, kind: RemovedKind) {
        if start < end {
            self.out.removed.push(((start, end), kind));
        }
    }

    fn part(&mut self, start: usize, end: usize, kind: PartKind) {
        if start >= end {
            return;
        }
        let tk = match kind {
            PartKind::Sentence => TokenKind::Word,
            PartKind::CodePart => TokenKind::CodeToken,
        };
        let tokens: Vec<_> = self.text[start..end]
            .split_whitespace()
            .flat_map(|raw| normalize_token(raw, tk))
            .collect();
        if tokens.is_empty() {
            self.removed(start, end, RemovedKind::Empty);
        } else {
            self.out.parts.push(Part {
                kind,
                tokens,
                origin: self.origin,
                span: (start, end),
            });
        }
    }

    /// Splits prose in `[start, end)` into sentences.
    fn prose(&mut self, norm: &TextNormalizer, start: usize, end: usize) {
        let region = &self.text[start..end];
        let protected: Vec<(usize, usize)> = PROTECTED
            .find_iter(region)
            .map(|m| (m.start(), m.end()))
            .collect();
        let in_protected = |i: usize| protected.iter().any(|&(a, b)| a <= i && i < b);
        let cfg = norm.config();

        let mut sent_start = 0;
        let mut iter = region.char_indices().peekable();
        while let Some((i, c)) = iter.next() {
            let is_newline = c == '\n' || c == '\r';
            if is_newline && cfg.newline_delimits {
                let mut j = i + c.len_utf8();
                while let Some(&(k, n)) = iter.peek() {
                    if n == '\n' || n == '\r' {
                        iter.next();
                        j = k + n.len_utf8();
                    } else {
                        break;
                    }
                }
                self.part(start + sent_start, start + i, PartKind::Sentence);
                self.removed(start + i, start + j, RemovedKind::Delimiter);
                sent_start = j;
            } else if cfg.sentence_delimiters.contains(&c) && !in_protected(i) {
                let followed_by_space = iter.peek().is_none_or(|&(_, n)| n.is_whitespace());
                if followed_by_space {
                    let j = i + c.len_utf8();
                    self.part(start + sent_start, start + i, PartKind::Sentence);
                    self.removed(start + i, start + j, RemovedKind::Delimiter);
                    sent_start = j;
                }
            }
        }
        self.part(start + sent_start, end, PartKind::Sentence);
    }
}

pub(super) fn split(norm: &TextNormalizer, text: &str, origin: Origin) -> Segmentation {
    let mut b = Builder {
        text,
        origin,
        out: Segmentation::default(),
    };
    let tags = norm.detect_special_tags(text);
    if origin == Origin::Title {
        // Tags in titles are stripped; whatever they enclose is prose.
        let mut seg_start = 0;
        for t in &tags {
            b.prose(norm, seg_start, t.span.0);
            b.removed(t.span.0, t.span.1, RemovedKind::Tag);
            seg_start = t.span.1;
        }
        b.prose(norm, seg_start, text.len());
        return finish(b);
    }

    let mut cursor = 0;
    let mut open: Option<(&str, usize, &str)> = None;
    for t in &tags {
        match (&open, &t.role) {
            (None, TagRole::Delimiter) => {
                b.prose(norm, cursor, t.span.0);
                b.removed(t.span.0, t.span.1, RemovedKind::Tag);
                cursor = t.span.1;
            }
            (None, TagRole::Code { family }) => {
                b.prose(norm, cursor, t.span.0);
                b.removed(t.span.0, t.span.1, RemovedKind::Tag);
                open = Some((family.as_str(), t.span.1, t.literal.as_str()));
                cursor = t.span.1;
            }
            (Some((fam, content_start, _)), TagRole::Code { family }) if family == fam => {
                let content_start = *content_start;
                b.part(content_start, t.span.0, PartKind::CodePart);
                b.removed(t.span.0, t.span.1, RemovedKind::Tag);
                open = None;
                cursor = t.span.1;
            }
            // Unrelated tags inside a code span are part of its content.
            (Some(_), _) => {}
        }
    }
    match open {
        Some((_, content_start, literal)) => {
            b.out.warnings.push(Warning::UnbalancedTag {
                literal: literal.to_string(),
                offset: content_start - literal.len(),
            });
            log::debug!(
                "unbalanced tag {literal:?} at byte {}",
                content_start - literal.len()
            );
            b.part(content_start, text.len(), PartKind::CodePart);
        }
        None => b.prose(norm, cursor, text.len()),
    }
    finish(b)
}

fn finish(b: Builder<'_>) -> Segmentation {
    let mut out = b.out;
    out.removed.sort_by_key(|&((s, _), _)| s);
    out
}
