//! Tokenizer shared by the line-oriented file formats.
//!
//! Every format is one record per line, whitespace-separated fields, with
//! `#` starting a comment. A record is either tagged (`N`, `E`, `P`, `O`,
//! `B`, `V`) or a bare `key=value` setting (config files only).

pub(crate) const KNOWN_TAGS: [&str; 6] = ["N", "E", "P", "O", "B", "V"];

#[derive(Debug, Clone, PartialEq)]
pub(crate) enum Record<'a> {
    Tagged {
        line: usize,
        tag: &'a str,
        fields: Vec<&'a str>,
    },
    Setting {
        line: usize,
        key: &'a str,
        value: &'a str,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) struct RecordError {
    pub line: usize,
    pub msg: String,
}

pub(crate) fn strip_comment(line: &str) -> &str {
    match line.find('#') {
        Some(i) => &line[..i],
        None => line,
    }
}

/// Splits `text` into records, skipping blanks and comments. Line numbers
/// are 1-based.
pub(crate) fn records(text: &str) -> impl Iterator<Item = Result<Record<'_>, RecordError>> {
    text.lines().enumerate().filter_map(|(i, raw)| {
        let line = i + 1;
        let body = strip_comment(raw).trim();
        if body.is_empty() {
            return None;
        }
        let mut tokens = body.split_whitespace();
        let head = tokens.next()?;
        if KNOWN_TAGS.contains(&head) {
            return Some(Ok(Record::Tagged {
                line,
                tag: head,
                fields: tokens.collect(),
            }));
        }
        if let Some((key, value)) = body.split_once('=') {
            let (key, value) = (key.trim(), value.trim());
            if !key.is_empty() && !key.contains(char::is_whitespace) {
                return Some(Ok(Record::Setting { line, key, value }));
            }
        }
        Some(Err(RecordError {
            line,
            msg: format!("unknown record `{head}`"),
        }))
    })
}

pub(crate) fn parse_f64(line: usize, what: &str, s: &str) -> Result<f64, RecordError> {
    match s.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        _ => Err(RecordError {
            line,
            msg: format!("invalid {what} `{s}`"),
        }),
    }
}

pub(crate) fn parse_id(line: usize, what: &str, s: &str) -> Result<u64, RecordError> {
    match s.parse::<u64>() {
        Ok(v) if v > 0 => Ok(v),
        _ => Err(RecordError {
            line,
            msg: format!("invalid {what} `{s}` (expected positive integer)"),
        }),
    }
}

pub(crate) fn arity(
    line: usize,
    tag: &str,
    fields: &[&str],
    min: usize,
    max: usize,
) -> Result<(), RecordError> {
    if fields.len() < min || fields.len() > max {
        let expected = if min == max {
            format!("{min}")
        } else {
            format!("{min}..={max}")
        };
        return Err(RecordError {
            line,
            msg: format!("`{tag}` record takes {expected} fields, got {}", fields.len()),
        });
    }
    Ok(())
}
