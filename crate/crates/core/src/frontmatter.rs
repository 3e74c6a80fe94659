//! Restricted key-value frontmatter shared by skill and task documents.
//!
//! ```text
//! ---
//! name: zephyr-gpio
//! platforms: [nrf52840+zephyr]
//! checklist:
//!   - LED blinks three short, three long, three short
//! ---
//! body text, verbatim
//! ```
//!
//! Only flat values are supported: plain or double-quoted scalars, inline
//! lists (`[a, "b, c"]`) and block lists (`- item` lines after an empty
//! `key:`). No nesting, anchors or multi-line scalars.

use std::io::BufRead;

use thiserror::Error;

pub const DELIMITER: &str = "---";

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum FrontValue {
    Scalar(String),
    List(Vec<String>),
}

impl FrontValue {
    pub fn as_scalar(&self) -> Option<&str> {
        match self {
            FrontValue::Scalar(s) => Some(s),
            FrontValue::List(_) => None,
        }
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum FrontmatterError {
    #[error("document does not start with a '---' line")]
    Missing,
    #[error("frontmatter is not closed by a '---' line")]
    Unterminated,
    #[error("line {line}: {message}")]
    Malformed { line: usize, message: String },
    #[error("i/o error: {0}")]
    Io(String),
}

/// Ordered header entries. Keys are unique.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Frontmatter {
    entries: Vec<(String, FrontValue)>,
}

impl Frontmatter {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get(&self, key: &str) -> Option<&FrontValue> {
        self.entries.iter().find(|(k, _)| k == key).map(|(_, v)| v)
    }

    pub fn entries(&self) -> &[(String, FrontValue)] {
        &self.entries
    }

    pub fn into_entries(self) -> Vec<(String, FrontValue)> {
        self.entries
    }

    /// Inserts or replaces `key`, keeping the original position on replace.
    pub fn set(&mut self, key: impl Into<String>, value: FrontValue) {
        let key = key.into();
        match self.entries.iter_mut().find(|(k, _)| *k == key) {
            Some(slot) => slot.1 = value,
            None => self.entries.push((key, value)),
        }
    }

    pub fn set_scalar(&mut self, key: impl Into<String>, value: impl Into<String>) {
        self.set(key, FrontValue::Scalar(value.into()));
    }

    pub fn set_list<I, S>(&mut self, key: impl Into<String>, items: I)
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        self.set(
            key,
            FrontValue::List(items.into_iter().map(Into::into).collect()),
        );
    }

    /// Renders the header block including both delimiter lines.
    pub fn render(&self) -> String {
        let mut out = String::from("---\n");
        for (key, value) in &self.entries {
            out.push_str(key);
            out.push(':');
            match value {
                FrontValue::Scalar(s) => {
                    out.push(' ');
                    out.push_str(&render_scalar(s));
                }
                FrontValue::List(items) => {
                    out.push_str(" [");
                    for (i, item) in items.iter().enumerate() {
                        if i > 0 {
                            out.push_str(", ");
                        }
                        out.push_str(&render_item(item));
                    }
                    out.push(']');
                }
            }
            out.push('\n');
        }
        out.push_str("---\n");
        out
    }
}

/// Splits a document into its header and the verbatim body.
pub fn split_document(text: &str) -> Result<(Frontmatter, &str), FrontmatterError> {
    let mut parser = HeaderParser::default();
    let mut offset = 0;
    let mut first = true;
    while offset < text.len() {
        let end = text[offset..]
            .find('\n')
            .map(|i| offset + i + 1)
            .unwrap_or(text.len());
        let line = &text[offset..end];
        offset = end;
        if first {
            first = false;
            if strip_eol(line) != DELIMITER {
                return Err(FrontmatterError::Missing);
            }
            continue;
        }
        if parser.push_line(line)? {
            return Ok((parser.finish(), &text[offset..]));
        }
    }
    if first {
        Err(FrontmatterError::Missing)
    } else {
        Err(FrontmatterError::Unterminated)
    }
}

/// Reads only the header block from `reader`, leaving everything after the
/// closing delimiter unread.
pub fn read_header<R: BufRead>(mut reader: R) -> Result<Frontmatter, FrontmatterError> {
    let mut parser = HeaderParser::default();
    let mut line = String::new();
    let mut first = true;
    loop {
        line.clear();
        let n = reader
            .read_line(&mut line)
            .map_err(|e| FrontmatterError::Io(e.to_string()))?;
        if n == 0 {
            return Err(if first {
                FrontmatterError::Missing
            } else {
                FrontmatterError::Unterminated
            });
        }
        if first {
            first = false;
            if strip_eol(&line) != DELIMITER {
                return Err(FrontmatterError::Missing);
            }
            continue;
        }
        if parser.push_line(&line)? {
            return Ok(parser.finish());
        }
    }
}

fn strip_eol(line: &str) -> &str {
    let line = line.strip_suffix('\n').unwrap_or(line);
    line.strip_suffix('\r').unwrap_or(line)
}

#[derive(Default)]
struct HeaderParser {
    header: Frontmatter,
    // key awaiting block-list items
    open_key: Option<String>,
    open_items: Vec<String>,
    line_no: usize,
}

impl HeaderParser {
    /// Returns `Ok(true)` once the closing delimiter has been consumed.
    fn push_line(&mut self, raw: &str) -> Result<bool, FrontmatterError> {
        self.line_no += 1;
        let line_no = self.line_no + 1;
        let line = strip_eol(raw);
        if line == DELIMITER {
            self.close_block();
            return Ok(true);
        }
        if line.trim().is_empty() {
            return Ok(false);
        }
        let trimmed = line.trim_start();
        if let Some(item) =
            trimmed
                .strip_prefix("- ")
                .or_else(|| if trimmed == "-" { Some("") } else { None })
        {
            if self.open_key.is_none() {
                return Err(malformed(line_no, "list item outside of a block list"));
            }
            let item = parse_value_text(item.trim(), line_no)?;
            self.open_items.push(item);
            return Ok(false);
        }
        self.close_block();
        if line.starts_with(char::is_whitespace) {
            return Err(malformed(line_no, "unexpected indentation"));
        }
        let (key, value) = line
            .split_once(':')
            .ok_or_else(|| malformed(line_no, "expected 'key: value'"))?;
        if key.is_empty()
            || !key
                .chars()
                .all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-')
        {
            return Err(malformed(line_no, format!("invalid key {key:?}")));
        }
        if self.header.get(key).is_some() {
            return Err(malformed(line_no, format!("duplicate key {key:?}")));
        }
        let value = value.trim();
        if value.is_empty() {
            self.open_key = Some(key.to_string());
            return Ok(false);
        }
        let parsed = if value.starts_with('[') {
            FrontValue::List(parse_inline_list(value, line_no)?)
        } else {
            FrontValue::Scalar(parse_value_text(value, line_no)?)
        };
        self.header.entries.push((key.to_string(), parsed));
        Ok(false)
    }

    fn close_block(&mut self) {
        if let Some(key) = self.open_key.take() {
            let items = std::mem::take(&mut self.open_items);
            let value = if items.is_empty() {
                FrontValue::Scalar(String::new())
            } else {
                FrontValue::List(items)
            };
            self.header.entries.push((key, value));
        }
    }

    fn finish(mut self) -> Frontmatter {
        self.close_block();
        self.header
    }
}

fn malformed(line: usize, message: impl Into<String>) -> FrontmatterError {
    FrontmatterError::Malformed {
        line,
        message: message.into(),
    }
}

/// Plain text is taken as-is; a leading double quote starts a quoted string
/// that must span the whole value.
fn parse_value_text(value: &str, line: usize) -> Result<String, FrontmatterError> {
    if !value.starts_with('"') {
        return Ok(value.to_string());
    }
    let (s, rest) = parse_quoted(value, line)?;
    if !rest.trim().is_empty() {
        return Err(malformed(line, "trailing text after quoted string"));
    }
    Ok(s)
}

/// Parses a quoted string at the start of `text`; returns it and the rest.
fn parse_quoted(text: &str, line: usize) -> Result<(String, &str), FrontmatterError> {
    let mut out = String::new();
    let mut chars = text.char_indices().skip(1);
    while let Some((i, c)) = chars.next() {
        match c {
            '"' => return Ok((out, &text[i + 1..])),
            '\\' => {
                let (_, esc) = chars
                    .next()
                    .ok_or_else(|| malformed(line, "dangling escape"))?;
                out.push(match esc {
                    'n' => '\n',
                    'r' => '\r',
                    't' => '\t',
                    '"' => '"',
                    '\\' => '\\',
                    other => {
                        return Err(malformed(line, format!("unknown escape \\{other}")));
                    }
                });
            }
            c => out.push(c),
        }
    }
    Err(malformed(line, "unterminated quoted string"))
}

fn parse_inline_list(value: &str, line: usize) -> Result<Vec<String>, FrontmatterError> {
    let inner = value
        .strip_prefix('[')
        .and_then(|v| v.strip_suffix(']'))
        .ok_or_else(|| malformed(line, "inline list must end with ']'"))?;
    let mut items = Vec::new();
    if inner.trim().is_empty() {
        return Ok(items);
    }
    let mut rest = inner;
    loop {
        let trimmed = rest.trim_start();
        let (item, after) = if trimmed.starts_with('"') {
            let (s, after) = parse_quoted(trimmed, line)?;
            (s, after.trim_start())
        } else {
            let end = trimmed.find(',').unwrap_or(trimmed.len());
            let raw = trimmed[..end].trim();
            if raw.is_empty() {
                return Err(malformed(line, "empty list item"));
            }
            if raw.contains(['[', ']', '"']) {
                return Err(malformed(line, "nested or unbalanced list syntax"));
            }
            (raw.to_string(), &trimmed[end..])
        };
        items.push(item);
        if after.is_empty() {
            return Ok(items);
        }
        rest = after
            .strip_prefix(',')
            .ok_or_else(|| malformed(line, "expected ',' between list items"))?;
    }
}

fn escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len() + 2);
    out.push('"');
    for c in s.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            '\r' => out.push_str("\\r"),
            '\t' => out.push_str("\\t"),
            c => out.push(c),
        }
    }
    out.push('"');
    out
}

fn needs_quotes(s: &str) -> bool {
    s.is_empty()
        || s.trim() != s
        || s.starts_with('"')
        || s.starts_with('[')
        || s.contains(['\n', '\r', '\t'])
}

fn render_scalar(s: &str) -> String {
    if needs_quotes(s) {
        escape(s)
    } else {
        s.to_string()
    }
}

fn render_item(s: &str) -> String {
    if needs_quotes(s) || s.contains([',', '"', '[', ']']) {
        escape(s)
    } else {
        s.to_string()
    }
}
