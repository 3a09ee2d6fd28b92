//! Prompt assembly for element and central modules, including framework
//! selection and the expansion of graphical proxy labels.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;
use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::code::unit::{FUNCTION_END, FUNCTION_START, VARIABLE_END, VARIABLE_START};
use crate::error::{Error, Result};
use crate::scene::{GraphicalProxy, CANVAS_HEIGHT, CANVAS_WIDTH};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FrameworkId {
    Phaser,
    P5js,
}

impl FrameworkId {
    pub fn as_str(self) -> &'static str {
        match self {
            FrameworkId::Phaser => "phaser",
            FrameworkId::P5js => "p5js",
        }
    }

    pub fn display_name(self) -> &'static str {
        match self {
            FrameworkId::Phaser => "Phaser",
            FrameworkId::P5js => "p5.js",
        }
    }
}

impl fmt::Display for FrameworkId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for FrameworkId {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "phaser" => Ok(FrameworkId::Phaser),
            "p5js" | "p5" | "p5.js" => Ok(FrameworkId::P5js),
            other => Err(format!("unknown framework `{other}`")),
        }
    }
}

/// Keyword table driving framework selection. Phaser and p5.js keyword sets
/// must be disjoint.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FrameworkKeywords {
    pub phaser: Vec<String>,
    pub p5js: Vec<String>,
    /// Used when neither set matches.
    pub default: FrameworkId,
}

impl Default for FrameworkKeywords {
    fn default() -> Self {
        FrameworkKeywords {
            phaser: ["game", "platformer", "player", "level", "enemy", "score"]
                .map(String::from)
                .to_vec(),
            p5js: ["creative coding", "animation", "illustration", "particles", "demo"]
                .map(String::from)
                .to_vec(),
            default: FrameworkId::P5js,
        }
    }
}

fn words(text: &str) -> Vec<String> {
    text.to_lowercase()
        .split(|c: char| !c.is_alphanumeric())
        .filter(|w| !w.is_empty())
        .map(String::from)
        .collect()
}

impl FrameworkKeywords {
    pub fn validate(&self) -> Result<()> {
        let phaser: BTreeSet<Vec<String>> = self.phaser.iter().map(|k| words(k)).collect();
        let p5: BTreeSet<Vec<String>> = self.p5js.iter().map(|k| words(k)).collect();
        if let Some(shared) = phaser.intersection(&p5).next() {
            return Err(Error::InvalidKeywordTable(format!(
                "`{}` is listed for both frameworks",
                shared.join(" ")
            )));
        }
        if phaser.iter().chain(&p5).any(|k| k.is_empty()) {
            return Err(Error::InvalidKeywordTable("empty keyword".into()));
        }
        Ok(())
    }

    fn hits(keywords: &[String], text_words: &[String]) -> usize {
        keywords
            .iter()
            .filter(|k| {
                let kw = words(k);
                text_words.windows(kw.len()).any(|win| {
                    win.iter()
                        .zip(&kw)
                        .all(|(w, k)| w == k || w.strip_suffix('s') == Some(k.as_str()))
                })
            })
            .count()
    }

    /// Picks a framework for a scene description. More matching keywords
    /// wins; a tie between non-zero counts goes to Phaser; no match at all
    /// gives the declared default.
    pub fn select(&self, description: &str) -> FrameworkId {
        let text = words(description);
        let phaser = Self::hits(&self.phaser, &text);
        let p5 = Self::hits(&self.p5js, &text);
        match (phaser, p5) {
            (0, 0) => self.default,
            (a, b) if a >= b => FrameworkId::Phaser,
            _ => FrameworkId::P5js,
        }
    }
}

static LABEL_RE: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"\b([PLCR]\d+)\b").unwrap());

pub const PROXY_BLOCK_HEADER: &str =
    "Referenced graphical inputs (canvas pixels, origin top-left, y down):";

/// Appends a data block describing every proxy label referenced in `text`.
///
/// Labels are listed in order of first reference, one line each:
/// `LABEL kind: (x1,y1) (x2,y2) ...` with coordinates rounded to integers.
/// Text without labels comes back unchanged.
pub fn expand_proxies(text: &str, proxies: &[GraphicalProxy]) -> Result<String> {
    let mut seen: Vec<&str> = Vec::new();
    for m in LABEL_RE.find_iter(text) {
        if !seen.contains(&m.as_str()) {
            seen.push(m.as_str());
        }
    }
    if seen.is_empty() {
        return Ok(text.to_string());
    }
    let mut lines = Vec::with_capacity(seen.len());
    for label in seen {
        let proxy = proxies
            .iter()
            .find(|p| p.label == label)
            .ok_or_else(|| Error::UnknownProxyLabel(label.to_string()))?;
        lines.push(proxy_line(proxy));
    }
    Ok(format!("{text}\n\n{PROXY_BLOCK_HEADER}\n{}", lines.join("\n")))
}

pub fn proxy_line(proxy: &GraphicalProxy) -> String {
    let coords: Vec<String> = proxy
        .geometry
        .iter()
        .map(|p| format!("({},{})", p.x.round() as i64, p.y.round() as i64))
        .collect();
    format!("{} {}: {}", proxy.label, proxy.kind.as_str(), coords.join(" "))
}

/// The structured prompt sent as one user message.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptEnvelope {
    pub task: String,
    pub requirement: String,
    pub reference_template: String,
    pub output_format: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub context: Option<String>,
}

impl PromptEnvelope {
    /// Renders the envelope as one message: Task, Requirement, Reference Code
    /// Template, Context (central only), Output Format.
    pub fn render(&self) -> String {
        let mut out = format!(
            "### Task\n{}\n\n### Requirement\n{}\n\n### Reference Code Template\n```javascript\n{}\n```\n",
            self.task.trim_end(),
            self.requirement.trim_end(),
            self.reference_template.trim_end()
        );
        if let Some(ctx) = &self.context {
            out.push_str(&format!("\n### Context\n{}\n", ctx.trim_end()));
        }
        out.push_str(&format!("\n### Output Format\n{}\n", self.output_format.trim_end()));
        out
    }
}

fn summary_schema() -> &'static str {
    r#"{"class_name": "<ClassName>", "variables": [{"name": "...", "initial_value": "...", "description": "..."}], "functions": [{"name": "...", "args": [{"name": "...", "hint": "..."}], "return": "...", "description": "..."}]}"#
}

pub fn element_output_format(class_name: &str) -> String {
    format!(
        "Reply with exactly two fenced blocks, in this order:\n\
         1. A block tagged `code` holding the complete class `{class_name}`:\n\
         ```code\n<complete class code>\n```\n\
         2. A block tagged `summary` holding one JSON object that summarizes the class:\n\
         ```summary\n{}\n```\n\
         List every variable declared between `{VARIABLE_START}` and `{VARIABLE_END}` and every function you define.",
        summary_schema().replace("<ClassName>", class_name)
    )
}

pub fn central_output_format() -> String {
    format!(
        "Reply with the following fenced blocks:\n\
         1. A block tagged `code` holding the complete central script:\n\
         ```code\n<complete central script>\n```\n\
         2. For each element that needs new variables or functions, blocks tagged with the element's class name:\n\
         ```insert:<ElementName>:variables\nthis.name = value;\n```\n\
         ```insert:<ElementName>:functions\nname(args) {{\n  ...\n}}\n```\n\
         Define the code of variables and functions for each element within these blocks, never in the central script.\n\
         3. A block tagged `summary` holding one JSON object:\n\
         ```summary\n{{\"class_name\": \"central\", \"variables\": [], \"functions\": [], \"elements\": [{}]}}\n```\n\
         where `elements` describes every inserted variable and function per element class.",
        summary_schema().replace("<ClassName>", "<ElementName>")
    )
}

fn element_constraints(class_name: &str) -> String {
    format!(
        "Constraints:\n\
         - Keep all code for this element inside class `{class_name}`; do not reference or change other elements.\n\
         - Keep the marker lines `{VARIABLE_START}`, `{VARIABLE_END}`, `{FUNCTION_START}` and `{FUNCTION_END}` exactly as written, each alone on its own line.\n\
         - Declare adjustable parameters as `this.name = value;` lines between `{VARIABLE_START}` and `{VARIABLE_END}`, using plain numeric literals for numbers.\n\
         - Keep the transform lines `this.x`, `this.y`, `this.rotationDeg` and `this.scale` in that region.\n\
         - Put new methods between `{FUNCTION_START}` and `{FUNCTION_END}`.\n\
         - The canvas is {CANVAS_WIDTH}x{CANVAS_HEIGHT} pixels, origin top-left, y pointing down."
    )
}

fn central_constraints() -> String {
    format!(
        "Constraints:\n\
         - Only instantiate element classes, read their variables and call their functions here.\n\
         - Any new variable or function an element needs goes into that element's class through an insertion block.\n\
         - Use only the classes, variables and functions listed in the context or in your insertion blocks.\n\
         - The canvas is {CANVAS_WIDTH}x{CANVAS_HEIGHT} pixels, origin top-left, y pointing down."
    )
}

/// Builds the envelope for an element module. `expanded_effect` must already
/// have gone through [`expand_proxies`].
pub fn element_envelope(
    framework: FrameworkId,
    class_name: &str,
    expanded_effect: &str,
    current_code: &str,
) -> PromptEnvelope {
    PromptEnvelope {
        task: format!(
            "Write the {} class `{class_name}` for one element of a 2D interactive scene.",
            framework.display_name()
        ),
        requirement: format!(
            "Effect requested for `{class_name}`:\n{expanded_effect}\n\n{}",
            element_constraints(class_name)
        ),
        reference_template: current_code.to_string(),
        output_format: element_output_format(class_name),
        context: None,
    }
}

pub fn central_envelope(
    framework: FrameworkId,
    expanded_effect: &str,
    current_code: &str,
    context: String,
) -> PromptEnvelope {
    PromptEnvelope {
        task: format!(
            "Write the central {} script that creates the scene, instantiates the element classes and scripts the interactions between them.",
            framework.display_name()
        ),
        requirement: format!(
            "Interaction requested:\n{expanded_effect}\n\n{}",
            central_constraints()
        ),
        reference_template: current_code.to_string(),
        output_format: central_output_format(),
        context: Some(context),
    }
}

pub fn central_system_message() -> String {
    "You are the central module of a 2D interactive scene authoring tool. \
     Each scene element is written as its own class by a separate element module; \
     you receive a summary of every class (its variables and functions) as context. \
     Your script instantiates the element classes and orchestrates the interactions between them \
     by calling their functions. The target framework is chosen from the user's first description: \
     Phaser for games, p5.js for creative coding."
        .to_string()
}

pub fn element_system_message(framework: FrameworkId, class_name: &str, template: &str) -> String {
    format!(
        "You are the module responsible for the scene element `{class_name}`, written with {}. \
         The user describes the properties and behaviors of this one element; pronouns such as \
         \"it\" or \"each of them\" refer to `{class_name}`. Always return the whole class. \
         The class starts from this template:\n```javascript\n{}\n```",
        framework.display_name(),
        template.trim_end()
    )
}
