//! Parsing of model replies into code, summary and insertion blocks.

use std::collections::BTreeMap;

use serde::Deserialize;
use serde_json::Value;

use crate::context::{ArgInfo, FunctionInfo, VariableInfo};
use crate::error::{Error, Result};

/// One fenced block: its info-string tag and raw content.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FencedBlock {
    pub tag: String,
    pub content: String,
}

/// Splits markdown text into fenced blocks. A fence is three or more
/// backticks or tildes; the closing fence must use the same character and be
/// at least as long. An unclosed block runs to the end of the text.
pub fn fenced_blocks(text: &str) -> Vec<FencedBlock> {
    let mut out = Vec::new();
    let mut open: Option<(char, usize, String, Vec<&str>)> = None;
    for line in text.lines() {
        let trimmed = line.trim_start();
        let fence_char = trimmed.chars().next().filter(|c| *c == '`' || *c == '~');
        let fence_len = fence_char
            .map(|c| trimmed.chars().take_while(|x| *x == c).count())
            .unwrap_or(0);
        match &mut open {
            None => {
                if fence_len >= 3 {
                    let tag = trimmed[fence_len..].trim().to_string();
                    open = Some((fence_char.unwrap(), fence_len, tag, Vec::new()));
                }
            }
            Some((c, len, _, lines)) => {
                let closes = fence_char == Some(*c)
                    && fence_len >= *len
                    && trimmed[fence_len..].trim().is_empty();
                if closes {
                    let (_, _, tag, lines) = open.take().unwrap();
                    out.push(FencedBlock {
                        tag,
                        content: join_lines(&lines),
                    });
                } else {
                    lines.push(line);
                }
            }
        }
    }
    if let Some((_, _, tag, lines)) = open {
        out.push(FencedBlock {
            tag,
            content: join_lines(&lines),
        });
    }
    out
}

fn join_lines(lines: &[&str]) -> String {
    let mut s = lines.join("\n");
    if !s.is_empty() {
        s.push('\n');
    }
    s
}

/// Summary of one class as reported by the model.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SummaryPayload {
    pub class_name: String,
    pub variables: Vec<VariableInfo>,
    pub functions: Vec<FunctionInfo>,
    /// Central replies only: per-element descriptions of inserted members.
    pub elements: Vec<SummaryPayload>,
}

/// Insertion blocks addressed to one element class.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct InsertionBlocks {
    pub variables: Option<String>,
    pub functions: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParsedResponse {
    pub code: String,
    pub summary: SummaryPayload,
    /// Keyed by element class name.
    pub insertions: BTreeMap<String, InsertionBlocks>,
}

#[derive(Deserialize)]
struct RawSummary {
    #[serde(default)]
    class_name: Option<String>,
    #[serde(default)]
    variables: Vec<RawVariable>,
    #[serde(default)]
    functions: Vec<RawFunction>,
    #[serde(default)]
    elements: Vec<RawSummary>,
}

#[derive(Deserialize)]
struct RawVariable {
    name: String,
    #[serde(default, alias = "value", alias = "initial")]
    initial_value: Value,
    #[serde(default)]
    description: String,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum RawArg {
    Name(String),
    Full {
        name: String,
        #[serde(default, alias = "type")]
        hint: String,
    },
}

#[derive(Deserialize)]
struct RawFunction {
    name: String,
    #[serde(default)]
    args: Vec<RawArg>,
    #[serde(default, rename = "return", alias = "returns")]
    return_value: Option<Value>,
    #[serde(default)]
    description: String,
}

/// Renders a JSON value the way it would appear as a JS literal in code.
fn literal_text(v: &Value) -> String {
    match v {
        Value::String(s) => s.clone(),
        Value::Null => "null".into(),
        other => other.to_string(),
    }
}

impl From<RawSummary> for SummaryPayload {
    fn from(raw: RawSummary) -> Self {
        SummaryPayload {
            class_name: raw.class_name.unwrap_or_default(),
            variables: raw
                .variables
                .into_iter()
                .map(|v| VariableInfo {
                    name: v.name,
                    initial_value: literal_text(&v.initial_value),
                    description: v.description,
                })
                .collect(),
            functions: raw
                .functions
                .into_iter()
                .map(|f| FunctionInfo {
                    name: f.name,
                    args: f
                        .args
                        .into_iter()
                        .map(|a| match a {
                            RawArg::Name(name) => ArgInfo {
                                name,
                                hint: String::new(),
                            },
                            RawArg::Full { name, hint } => ArgInfo { name, hint },
                        })
                        .collect(),
                    return_value: match f.return_value {
                        None | Some(Value::Null) => "none".into(),
                        Some(v) => literal_text(&v),
                    },
                    description: f.description,
                })
                .collect(),
            elements: raw.elements.into_iter().map(Into::into).collect(),
        }
    }
}

const CODE_TAGS: [&str; 3] = ["code", "js", "javascript"];

/// Parses a model reply. Element replies (`allow_insertions == false`) must
/// not carry insertion blocks.
pub fn parse_response(text: &str, allow_insertions: bool) -> Result<ParsedResponse> {
    let blocks = fenced_blocks(text);
    let first_word = |b: &FencedBlock| b.tag.split_whitespace().next().unwrap_or("").to_string();

    let code = blocks
        .iter()
        .find(|b| first_word(b).eq_ignore_ascii_case("code"))
        .or_else(|| {
            blocks
                .iter()
                .find(|b| CODE_TAGS.iter().any(|t| first_word(b).eq_ignore_ascii_case(t)))
        })
        .ok_or(Error::MissingCodeBlock)?
        .content
        .clone();

    let summary_block = blocks
        .iter()
        .find(|b| first_word(b).eq_ignore_ascii_case("summary"))
        .ok_or(Error::MissingSummaryBlock)?;
    let raw: RawSummary = serde_json::from_str(summary_block.content.trim())
        .map_err(|e| Error::MalformedSummaryJson(e.to_string()))?;

    let mut insertions: BTreeMap<String, InsertionBlocks> = BTreeMap::new();
    for b in &blocks {
        let tag = first_word(b);
        let Some(rest) = tag.strip_prefix("insert:") else {
            continue;
        };
        if !allow_insertions {
            return Err(Error::UnexpectedDelta(tag));
        }
        let (element, part) = rest
            .rsplit_once(':')
            .ok_or_else(|| Error::UnexpectedDelta(tag.clone()))?;
        let entry = insertions.entry(element.to_string()).or_default();
        let slot = match part {
            "variables" => &mut entry.variables,
            "functions" => &mut entry.functions,
            _ => return Err(Error::UnexpectedDelta(tag.clone())),
        };
        slot.get_or_insert_with(String::new).push_str(&b.content);
    }

    Ok(ParsedResponse {
        code,
        summary: raw.into(),
        insertions,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const ELEMENT_REPLY: &str = r#"Here you go.

```code
class Sun {
  constructor() {
    //variable start
    this.radius = 40;
    //variable end
  }
}
```

```summary
{"class_name": "Sun", "variables": [{"name": "radius", "initial_value": 40, "description": "disc radius"}],
 "functions": [{"name": "glow", "args": ["t", {"name": "k", "type": "number"}], "description": "pulse"}]}
```
"#;

    #[test]
    fn parses_element_reply() {
        let r = parse_response(ELEMENT_REPLY, false).unwrap();
        assert!(r.code.starts_with("class Sun {\n"));
        assert!(r.code.ends_with("}\n"));
        assert_eq!(r.summary.class_name, "Sun");
        assert_eq!(r.summary.variables[0].initial_value, "40");
        let f = &r.summary.functions[0];
        assert_eq!(f.return_value, "none");
        assert_eq!(f.args[0].name, "t");
        assert_eq!(f.args[1].hint, "number");
        assert!(r.insertions.is_empty());
    }

    #[test]
    fn missing_blocks_are_classified() {
        assert_eq!(
            parse_response("no code here", false).unwrap_err().code(),
            "missing-code-block"
        );
        assert_eq!(
            parse_response("```code\nx\n```\n", false).unwrap_err().code(),
            "missing-summary-block"
        );
        assert_eq!(
            parse_response("```code\nx\n```\n```summary\n{oops\n```\n", false)
                .unwrap_err()
                .code(),
            "malformed-summary-json"
        );
    }

    #[test]
    fn insertion_blocks_only_for_central() {
        let text = "```code\nnew Earth();\n```\n\
                    ```insert:Earth:functions\norbit(cx, cy) {\n  return 1;\n}\n```\n\
                    ```insert:Earth:variables\nthis.angle = 0;\n```\n\
                    ```summary\n{\"class_name\": \"central\", \"elements\": [{\"class_name\": \"Earth\", \"functions\": [{\"name\": \"orbit\"}]}]}\n```\n";
        let r = parse_response(text, true).unwrap();
        let e = &r.insertions["Earth"];
        assert_eq!(e.variables.as_deref(), Some("this.angle = 0;\n"));
        assert!(e.functions.as_deref().unwrap().starts_with("orbit(cx, cy) {"));
        assert_eq!(r.summary.elements[0].class_name, "Earth");
        assert_eq!(
            parse_response(text, false).unwrap_err().code(),
            "unexpected-delta"
        );
    }

    #[test]
    fn longer_fences_may_contain_shorter_ones() {
        let text = "````code\nconst s = `x`;\n```\n````\n```summary\n{}\n```";
        let r = parse_response(text, false).unwrap();
        assert_eq!(r.code, "const s = `x`;\n```\n");
    }

    #[test]
    fn js_tag_fallback() {
        let text = "```javascript\nlet a = 1;\n```\n```summary\n{\"class_name\": \"A\"}\n```";
        assert_eq!(parse_response(text, false).unwrap().code, "let a = 1;\n");
    }
}
