//! Pulls the firmware source out of a raw model reply.

use regex::Regex;
use serde::{Deserialize, Serialize};

use super::AssembleError;

/// How the code was found.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ExtractionNote {
    /// The longest of `blocks` fenced blocks (0-based `index`). Other blocks
    /// were discarded.
    FencedBlock { index: usize, blocks: usize },
    /// No fences; the reply itself looked like source code.
    WholeText,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExtractedSource {
    pub code: String,
    /// Info string of the chosen fence, informational only.
    pub language: Option<String>,
    pub note: ExtractionNote,
}

impl ExtractedSource {
    pub fn discarded_blocks(&self) -> usize {
        match self.note {
            ExtractionNote::FencedBlock { blocks, .. } => blocks - 1,
            ExtractionNote::WholeText => 0,
        }
    }
}

fn fence(line: &str) -> Option<(char, usize, &str)> {
    let trimmed = line.trim_start();
    if line.len() - trimmed.len() > 3 {
        return None;
    }
    let ch = trimmed.chars().next().filter(|c| *c == '`' || *c == '~')?;
    let n = trimmed.chars().take_while(|&c| c == ch).count();
    (n >= 3).then(|| (ch, n, trimmed[n..].trim()))
}

pub(crate) fn is_fence_line(line: &str) -> bool {
    fence(line).is_some()
}

struct Block {
    info: String,
    lines: Vec<String>,
}

/// Fenced blocks in order. An unclosed fence runs to the end of the text,
/// which is what a reply cut off at the output limit looks like.
fn fenced_blocks(text: &str) -> Vec<Block> {
    let mut blocks = Vec::new();
    let mut current: Option<(char, usize, Block)> = None;
    for line in text.lines() {
        match current.as_mut() {
            None => {
                if let Some((ch, n, info)) = fence(line) {
                    current = Some((
                        ch,
                        n,
                        Block {
                            info: info.to_string(),
                            lines: Vec::new(),
                        },
                    ));
                }
            }
            Some((ch, n, block)) => match fence(line) {
                Some((c2, n2, info)) if c2 == *ch && n2 >= *n && info.is_empty() => {
                    let (_, _, block) = current.take().expect("open block");
                    blocks.push(block);
                }
                _ => block.lines.push(line.to_string()),
            },
        }
    }
    if let Some((_, _, block)) = current {
        blocks.push(block);
    }
    blocks
}

/// At least three lines that look like C/C++: preprocessor directives,
/// statements or blocks ending in `;`, `{` or `}`, or an entry-point
/// signature.
pub fn looks_like_source(text: &str) -> bool {
    let entry = Regex::new(r"\b(int|void)\s+(main|app_main|setup|loop)\s*\(").expect("static");
    let directive =
        Regex::new(r"^\s*#\s*(include|define|if|ifdef|ifndef|endif|pragma|else|elif|undef)\b")
            .expect("static");
    text.lines()
        .filter(|line| {
            let t = line.trim_end();
            directive.is_match(t)
                || entry.is_match(t)
                || t.ends_with(';')
                || t.ends_with('{')
                || t.ends_with('}')
        })
        .count()
        >= 3
}

pub fn extract_code(raw: &str) -> Result<ExtractedSource, AssembleError> {
    let blocks: Vec<Block> = fenced_blocks(raw)
        .into_iter()
        .filter(|b| {
            b.lines
                .iter()
                .any(|l| !l.trim().is_empty() && !is_fence_line(l))
        })
        .collect();
    if !blocks.is_empty() {
        let mut best = 0;
        let len = |b: &Block| b.lines.iter().map(|l| l.chars().count() + 1).sum::<usize>();
        for (i, b) in blocks.iter().enumerate() {
            if len(b) > len(&blocks[best]) {
                best = i;
            }
        }
        if blocks.len() > 1 {
            log::info!(
                "coder reply had {} code blocks; keeping block {} and discarding the rest",
                blocks.len(),
                best
            );
        }
        let block = &blocks[best];
        let mut code: String = block
            .lines
            .iter()
            .filter(|l| !is_fence_line(l))
            .map(|l| format!("{l}\n"))
            .collect();
        trim_blank_edges(&mut code);
        let language = block.info.split_whitespace().next().map(str::to_string);
        return Ok(ExtractedSource {
            code,
            language,
            note: ExtractionNote::FencedBlock {
                index: best,
                blocks: blocks.len(),
            },
        });
    }
    if looks_like_source(raw) {
        let mut code: String = raw
            .lines()
            .filter(|l| !is_fence_line(l))
            .map(|l| format!("{l}\n"))
            .collect();
        trim_blank_edges(&mut code);
        return Ok(ExtractedSource {
            code,
            language: None,
            note: ExtractionNote::WholeText,
        });
    }
    Err(AssembleError::NoCodeFound)
}

/// Drops leading and trailing blank lines, leaving exactly one final newline.
fn trim_blank_edges(code: &mut String) {
    let start = code
        .lines()
        .take_while(|l| l.trim().is_empty())
        .map(|l| l.len() + 1)
        .sum::<usize>();
    code.drain(..start.min(code.len()));
    let trimmed = code.trim_end().len();
    code.truncate(trimmed);
    code.push('\n');
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn single_block() {
        let src = extract_code("Here is the code:\n```c\nint main(){}\n```\nEnjoy!").unwrap();
        assert_eq!(src.code, "int main(){}\n");
        assert_eq!(src.language.as_deref(), Some("c"));
        assert_eq!(
            src.note,
            ExtractionNote::FencedBlock {
                index: 0,
                blocks: 1
            }
        );
    }

    #[test]
    fn longest_block_wins() {
        let short = "x".repeat(40);
        let long = "y".repeat(400);
        let raw = format!("```\n{short}\n```\ntext\n```cpp\n{long}\n```\n");
        let src = extract_code(&raw).unwrap();
        assert_eq!(src.code, format!("{long}\n"));
        assert_eq!(
            src.note,
            ExtractionNote::FencedBlock {
                index: 1,
                blocks: 2
            }
        );
        assert_eq!(src.discarded_blocks(), 1);
    }

    #[test]
    fn prose_only_fails() {
        assert!(matches!(
            extract_code("I'm sorry, I can't write that firmware for you."),
            Err(AssembleError::NoCodeFound)
        ));
        assert!(matches!(
            extract_code("```\n\n```"),
            Err(AssembleError::NoCodeFound)
        ));
    }

    #[test]
    fn unfenced_source_is_taken_whole() {
        let raw = "#include <stdio.h>\n\nvoid app_main(void) {\n    printf(\"hi\\n\");\n}\n";
        let src = extract_code(raw).unwrap();
        assert_eq!(src.note, ExtractionNote::WholeText);
        assert_eq!(src.code, raw);
    }

    #[test]
    fn truncated_reply_keeps_open_block() {
        let src = extract_code("```c\nvoid setup() {\n  pinMode(13, OUTPUT);\n").unwrap();
        assert_eq!(src.code, "void setup() {\n  pinMode(13, OUTPUT);\n");
    }

    #[test]
    fn tilde_fences_and_longer_closers() {
        let src = extract_code("~~~~ino\nvoid loop() {}\n~~~~~\nafter").unwrap();
        assert_eq!(src.code, "void loop() {}\n");
    }

    proptest! {
        #[test]
        fn never_returns_fence_lines(parts in proptest::collection::vec(
            prop_oneof![
                Just("```".to_string()),
                Just("```c".to_string()),
                Just("~~~".to_string()),
                Just("int x = 1;".to_string()),
                Just("}".to_string()),
                "[ -~]{0,30}",
            ], 0..30)
        ) {
            let raw = parts.join("\n");
            if let Ok(src) = extract_code(&raw) {
                prop_assert!(src.code.lines().all(|l| !is_fence_line(l)));
                prop_assert!(!src.code.trim().is_empty());
            }
        }
    }
}
