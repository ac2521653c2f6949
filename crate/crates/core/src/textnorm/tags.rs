use regex::Regex;

use super::TextNormError;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TagRole {
    /// Opens or closes a code part; tags of one family pair up.
    Code { family: String },
    /// Ends a sentence.
    Delimiter,
}

/// A tag occurrence. `literal` is the matched source text, `pattern` the
/// registered pattern it matched, `span` a byte range.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SpecialTag {
    pub literal: String,
    pub pattern: String,
    pub role: TagRole,
    pub span: (usize, usize),
}

#[derive(Debug, Clone)]
struct Pattern {
    text: String,
    lower: String,
    family: String,
    generic: bool,
    delimiter: bool,
}

#[derive(Debug, Clone)]
pub(crate) struct TagMatcher {
    patterns: Vec<Pattern>,
    regex: Option<Regex>,
}

fn parse_pattern(p: &str, delimiters: &[String]) -> Result<Pattern, TextNormError> {
    let bad = || TextNormError::BadPattern(p.to_string());
    let (inner, curly) = if let Some(x) = p.strip_prefix('{').and_then(|x| x.strip_suffix('}')) {
        (x, true)
    } else if let Some(x) = p.strip_prefix('<').and_then(|x| x.strip_suffix('>')) {
        (x, false)
    } else {
        return Err(bad());
    };
    let (name, variant) = match inner.split_once(':') {
        Some((n, v)) if curly => (n, Some(v)),
        Some(_) => return Err(bad()),
        None => (inner, None),
    };
    if name.is_empty()
        || !name
            .chars()
            .all(|c| c.is_alphanumeric() || c == '_' || c == '-')
    {
        return Err(bad());
    }
    Ok(Pattern {
        text: p.to_string(),
        lower: p.to_lowercase(),
        family: name.to_lowercase(),
        generic: variant == Some("*"),
        delimiter: delimiters.iter().any(|d| d.eq_ignore_ascii_case(p)),
    })
}

impl TagMatcher {
    pub fn new(specs: &[String], delimiters: &[String]) -> Result<Self, TextNormError> {
        let patterns: Vec<Pattern> = specs
            .iter()
            .map(|p| parse_pattern(p, delimiters))
            .collect::<Result<_, _>>()?;
        // Literal patterns take precedence over the generic ones.
        let mut alts: Vec<String> = patterns
            .iter()
            .filter(|p| !p.generic)
            .map(|p| regex::escape(&p.text))
            .collect();
        alts.extend(
            patterns
                .iter()
                .filter(|p| p.generic)
                .map(|p| format!(r"\{{{}:[^{{}}\r\n]{{0,200}}\}}", regex::escape(&p.family))),
        );
        let regex = if alts.is_empty() {
            None
        } else {
            Some(Regex::new(&format!("(?i){}", alts.join("|"))).expect("escaped alternation"))
        };
        Ok(Self { patterns, regex })
    }

    fn classify(&self, literal: &str) -> Option<&Pattern> {
        let lower = literal.to_lowercase();
        self.patterns
            .iter()
            .find(|p| !p.generic && p.lower == lower)
            .or_else(|| {
                self.patterns.iter().find(|p| {
                    p.generic
                        && lower
                            .strip_prefix('{')
                            .and_then(|x| x.strip_prefix(p.family.as_str()))
                            .is_some_and(|x| x.starts_with(':'))
                })
            })
    }

    pub fn find_all(&self, text: &str) -> Vec<SpecialTag> {
        let Some(re) = &self.regex else {
            return Vec::new();
        };
        re.find_iter(text)
            .filter_map(|m| {
                let p = self.classify(m.as_str())?;
                Some(SpecialTag {
                    literal: m.as_str().to_string(),
                    pattern: p.text.clone(),
                    role: if p.delimiter {
                        TagRole::Delimiter
                    } else {
                        TagRole::Code {
                            family: p.family.clone(),
                        }
                    },
                    span: (m.start(), m.end()),
                })
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use crate::textnorm::{TagRole, TextNormalizer};

    fn literals(text: &str) -> Vec<String> {
        TextNormalizer::default()
            .detect_special_tags(text)
            .into_iter()
            .map(|t| t.pattern)
            .collect()
    }

    #[test]
    fn literal_tags() {
        assert_eq!(
            literals("see {code} int x; {code} done"),
            ["{code}", "{code}"]
        );
        assert_eq!(literals("{code:java} A {code}"), ["{code:java}", "{code}"]);
        assert!(literals("plain text").is_empty());
    }

    #[test]
    fn generic_variant_and_case() {
        assert_eq!(literals("{code:python} x {CODE}"), ["{code:*}", "{code}"]);
        assert_eq!(
            literals("{Code:Title=Foo.java|borderStyle=solid}"),
            ["{code:*}"]
        );
        assert_eq!(literals("{code:javascript}"), ["{code:javascript}"]);
    }

    #[test]
    fn redacted_is_delimiter() {
        let tags = TextNormalizer::default().detect_special_tags("a <redacted> b {quote}");
        assert_eq!(tags[0].role, TagRole::Delimiter);
        assert_eq!(
            tags[1].role,
            TagRole::Code {
                family: "quote".into()
            }
        );
        assert_eq!(tags[0].span, (2, 12));
    }

    #[test]
    fn rejects_malformed_patterns() {
        use crate::textnorm::{TextNormConfig, TextNormError};
        let cfg = TextNormConfig {
            special_tags: vec!["code".into()],
            ..Default::default()
        };
        assert!(matches!(
            TextNormalizer::new(cfg),
            Err(TextNormError::BadPattern(_))
        ));
    }
}
