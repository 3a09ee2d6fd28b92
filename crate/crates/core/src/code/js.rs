//! Just enough JavaScript scanning to find classes, variable declarations and
//! method definitions without a full parser.
//!
//! Everything works on a *masked* copy of the source in which string,
//! template-literal, regex and comment contents are blanked out with spaces.
//! The mask has the same byte length as the input and keeps newlines, so
//! offsets found in the mask index the original text directly.

use std::ops::Range;
use std::sync::LazyLock;

use regex::Regex;

/// Returns `src` with the contents of comments, strings, template literals
/// and regex literals replaced by spaces. Template substitutions (`${...}`)
/// stay visible.
pub fn mask(src: &str) -> String {
    #[derive(Clone, Copy, PartialEq)]
    enum Mode {
        Code,
        LineComment,
        BlockComment,
        Str(u8),
        Template,
        Regex { in_class: bool },
    }

    let bytes = src.as_bytes();
    let mut out = bytes.to_vec();
    let mut mode = Mode::Code;
    // brace depth at which each open template substitution resumes the template
    let mut template_stack: Vec<usize> = Vec::new();
    let mut depth = 0usize;
    let mut last_significant: u8 = b'\n';
    let mut i = 0;

    let blank = |out: &mut Vec<u8>, i: usize| {
        if out[i] != b'\n' {
            out[i] = b' ';
        }
    };

    while i < bytes.len() {
        let b = bytes[i];
        match mode {
            Mode::Code => {
                let next = bytes.get(i + 1).copied();
                match b {
                    b'/' if next == Some(b'/') => {
                        mode = Mode::LineComment;
                        blank(&mut out, i);
                    }
                    b'/' if next == Some(b'*') => {
                        mode = Mode::BlockComment;
                        blank(&mut out, i);
                        blank(&mut out, i + 1);
                        i += 1;
                    }
                    b'/' if regex_may_start(last_significant) => {
                        mode = Mode::Regex { in_class: false };
                    }
                    b'\'' | b'"' => mode = Mode::Str(b),
                    b'`' => mode = Mode::Template,
                    b'{' => depth += 1,
                    b'}' => {
                        if template_stack.last() == Some(&depth) {
                            template_stack.pop();
                            mode = Mode::Template;
                        }
                        depth = depth.saturating_sub(1);
                    }
                    _ => {}
                }
                if !b.is_ascii_whitespace() {
                    last_significant = b;
                }
            }
            Mode::LineComment => {
                if b == b'\n' {
                    mode = Mode::Code;
                } else {
                    blank(&mut out, i);
                }
            }
            Mode::BlockComment => {
                if b == b'*' && bytes.get(i + 1) == Some(&b'/') {
                    blank(&mut out, i);
                    blank(&mut out, i + 1);
                    i += 1;
                    mode = Mode::Code;
                } else {
                    blank(&mut out, i);
                }
            }
            Mode::Str(q) => {
                if b == b'\\' {
                    blank(&mut out, i);
                    if i + 1 < bytes.len() {
                        blank(&mut out, i + 1);
                    }
                    i += 1;
                } else if b == q {
                    mode = Mode::Code;
                    last_significant = b;
                } else if b == b'\n' {
                    // unterminated string; recover at end of line
                    mode = Mode::Code;
                } else {
                    blank(&mut out, i);
                }
            }
            Mode::Template => {
                if b == b'\\' {
                    blank(&mut out, i);
                    if i + 1 < bytes.len() {
                        blank(&mut out, i + 1);
                    }
                    i += 1;
                } else if b == b'`' {
                    mode = Mode::Code;
                    last_significant = b;
                } else if b == b'$' && bytes.get(i + 1) == Some(&b'{') {
                    depth += 1;
                    template_stack.push(depth);
                    i += 1;
                    mode = Mode::Code;
                    last_significant = b'{';
                } else {
                    blank(&mut out, i);
                }
            }
            Mode::Regex { in_class } => {
                match b {
                    b'\\' => {
                        blank(&mut out, i);
                        if i + 1 < bytes.len() {
                            blank(&mut out, i + 1);
                        }
                        i += 1;
                    }
                    b'[' => {
                        blank(&mut out, i);
                        mode = Mode::Regex { in_class: true };
                    }
                    b']' if in_class => {
                        blank(&mut out, i);
                        mode = Mode::Regex { in_class: false };
                    }
                    b'/' if !in_class => {
                        mode = Mode::Code;
                        // a closed literal behaves like an operand
                        last_significant = b'a';
                    }
                    b'\n' => mode = Mode::Code,
                    _ => blank(&mut out, i),
                }
            }
        }
        i += 1;
    }
    // blanking only ever writes ASCII spaces over whole multi-byte sequences
    // or ASCII bytes, except where a multi-byte char sits in plain code
    String::from_utf8(out).unwrap_or_else(|e| {
        let mut bytes = e.into_bytes();
        for b in bytes.iter_mut() {
            if !b.is_ascii() {
                *b = b' ';
            }
        }
        String::from_utf8(bytes).expect("ascii")
    })
}

fn regex_may_start(prev: u8) -> bool {
    matches!(
        prev,
        b'(' | b',' | b'=' | b':' | b'[' | b'!' | b'&' | b'|' | b'?' | b'{' | b'}' | b';' | b'\n'
            | b'+' | b'-' | b'*' | b'%' | b'<' | b'>' | b'~' | b'^'
    )
}

/// Byte offset of the `}` matching the `{` at `open`, in masked text.
pub fn matching_brace(masked: &str, open: usize) -> Option<usize> {
    let bytes = masked.as_bytes();
    debug_assert_eq!(bytes.get(open), Some(&b'{'));
    let mut depth = 0usize;
    for (i, &b) in bytes.iter().enumerate().skip(open) {
        match b {
            b'{' => depth += 1,
            b'}' => {
                depth -= 1;
                if depth == 0 {
                    return Some(i);
                }
            }
            _ => {}
        }
    }
    None
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClassDecl {
    pub name: String,
    /// Offset of the class body's opening brace.
    pub open: usize,
    /// Offset of the matching closing brace, if the body is balanced.
    pub close: Option<usize>,
}

static CLASS_RE: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"\bclass\s+([A-Za-z_$][\w$]*)[^{]*\{").unwrap());

/// All class declarations in source order.
pub fn classes(src: &str) -> Vec<ClassDecl> {
    let masked = mask(src);
    CLASS_RE
        .captures_iter(&masked)
        .map(|c| {
            let whole = c.get(0).unwrap();
            let open = whole.end() - 1;
            ClassDecl {
                name: c[1].to_string(),
                open,
                close: matching_brace(&masked, open),
            }
        })
        .collect()
}

/// Splits text into lines with their byte ranges (range includes the
/// trailing newline, if any).
pub fn line_spans(text: &str) -> Vec<Range<usize>> {
    let mut spans = Vec::new();
    let mut start = 0;
    for (i, b) in text.bytes().enumerate() {
        if b == b'\n' {
            spans.push(start..i + 1);
            start = i + 1;
        }
    }
    if start < text.len() {
        spans.push(start..text.len());
    }
    spans
}

/// A variable declaration found in a region.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VarDecl {
    pub name: String,
    /// Whole lines covered by the declaration, relative to the scanned text.
    pub span: Range<usize>,
    /// The right-hand side, trimmed, relative to the scanned text.
    pub value: Range<usize>,
}

impl VarDecl {
    pub fn value_text<'a>(&self, text: &'a str) -> &'a str {
        &text[self.value.clone()]
    }
}

/// A method (or function) definition found in a region.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FnDecl {
    pub name: String,
    pub args: Vec<String>,
    /// Whole lines covered by the definition.
    pub span: Range<usize>,
}

static DECL_RE: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"^\s*(?:(?:let|const|var)\s+|this\.)?([A-Za-z_$][\w$]*)\s*=[^=>]").unwrap()
});

static METHOD_RE: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"^\s*(?:async\s+)?(?:static\s+)?(?:function\s*)?\*?\s*([A-Za-z_$][\w$]*)\s*\(")
        .unwrap()
});

static ARROW_FIELD_RE: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"^\s*(?:this\.)?([A-Za-z_$][\w$]*)\s*=\s*(?:async\s+)?(?:\([^)]*\)|[A-Za-z_$][\w$]*)\s*=>")
        .unwrap()
});

const NOT_METHODS: &[&str] = &[
    "if", "for", "while", "switch", "catch", "return", "function", "typeof", "new", "else", "do",
];

/// Per-line brace depth at line start, computed on masked text.
fn line_depths(masked: &str, lines: &[Range<usize>]) -> Vec<isize> {
    let mut depth = 0isize;
    let mut depths = Vec::with_capacity(lines.len());
    for span in lines {
        depths.push(depth);
        for b in masked[span.clone()].bytes() {
            match b {
                b'{' | b'(' | b'[' => depth += 1,
                b'}' | b')' | b']' => depth -= 1,
                _ => {}
            }
        }
    }
    depths.push(depth);
    depths
}

/// Top-level variable declarations in `text` (a variable region body).
///
/// A declaration starts on a depth-0 line of the form `this.name = ...`,
/// `name = ...` or `let|const|var name = ...` and runs until brackets balance
/// and the line ends with `;`, or until the next depth-0 line that starts a
/// new statement.
pub fn var_decls(text: &str) -> Vec<VarDecl> {
    let masked = mask(text);
    let lines = line_spans(text);
    let depths = line_depths(&masked, &lines);
    let mut out = Vec::new();
    let mut i = 0;
    while i < lines.len() {
        let line_masked = &masked[lines[i].clone()];
        let Some(cap) = (depths[i] == 0).then(|| DECL_RE.captures(line_masked)).flatten() else {
            i += 1;
            continue;
        };
        let name = cap[1].to_string();
        let eq = lines[i].start + cap.get(0).unwrap().end() - 1;
        let mut end = i;
        loop {
            let trimmed = masked[lines[end].clone()].trim_end();
            let closed = depths[end + 1] == 0;
            if closed && (trimmed.ends_with(';') || trimmed.ends_with(',')) {
                break;
            }
            if end + 1 >= lines.len() {
                break;
            }
            let next = masked[lines[end + 1].clone()].trim();
            if closed && (next.is_empty() || DECL_RE.is_match(&masked[lines[end + 1].clone()])) {
                break;
            }
            end += 1;
        }
        let stmt_end = lines[end].end;
        let mut value_end = masked[..stmt_end].trim_end().len();
        if masked[..value_end].ends_with(';') || masked[..value_end].ends_with(',') {
            value_end -= 1;
        }
        let raw = &text[eq + 1..value_end.max(eq + 1)];
        let lead = raw.len() - raw.trim_start().len();
        let trail = raw.len() - raw.trim_end().len();
        let value = (eq + 1 + lead)..(value_end - trail).max(eq + 1 + lead);
        out.push(VarDecl {
            name,
            span: lines[i].start..stmt_end,
            value,
        });
        i = end + 1;
    }
    out
}

/// Top-level method definitions in `text` (a function region body).
pub fn fn_decls(text: &str) -> Vec<FnDecl> {
    let masked = mask(text);
    let lines = line_spans(text);
    let depths = line_depths(&masked, &lines);
    let mut out = Vec::new();
    let mut i = 0;
    while i < lines.len() {
        if depths[i] != 0 {
            i += 1;
            continue;
        }
        let line_masked = &masked[lines[i].clone()];
        let cap = ARROW_FIELD_RE
            .captures(line_masked)
            .or_else(|| METHOD_RE.captures(line_masked));
        let Some(cap) = cap else {
            i += 1;
            continue;
        };
        let name = cap[1].to_string();
        if NOT_METHODS.contains(&name.as_str()) {
            i += 1;
            continue;
        }
        let Some(open) = body_brace(&masked, lines[i].start) else {
            i += 1;
            continue;
        };
        let Some(close) = matching_brace(&masked, open) else {
            i += 1;
            continue;
        };
        let end_line = lines
            .iter()
            .position(|l| l.contains(&close))
            .unwrap_or(lines.len() - 1);
        let args = masked[lines[i].start..open]
            .find('(')
            .map(|p| lines[i].start + p)
            .and_then(|p| {
                let inner_end = masked[p..open].rfind(')')? + p;
                Some(split_args(&masked[p + 1..inner_end], &text[p + 1..inner_end]))
            })
            .unwrap_or_default();
        out.push(FnDecl {
            name,
            args,
            span: lines[i].start..lines[end_line].end,
        });
        i = end_line + 1;
    }
    out
}

/// Opening brace of a definition body starting at `from`: the first `{`
/// after the parameter list, or the first `{` if there is none.
fn body_brace(masked: &str, from: usize) -> Option<usize> {
    let rest = &masked[from..];
    let brace = rest.find('{')?;
    let Some(paren) = rest.find('(').filter(|p| *p < brace) else {
        return Some(from + brace);
    };
    let mut depth = 0i32;
    for (k, b) in rest.bytes().enumerate().skip(paren) {
        match b {
            b'(' => depth += 1,
            b')' => {
                depth -= 1;
                if depth == 0 {
                    return rest[k..].find('{').map(|o| from + k + o);
                }
            }
            _ => {}
        }
    }
    None
}

fn split_args(masked: &str, _original: &str) -> Vec<String> {
    let mut args = Vec::new();
    let mut depth = 0i32;
    let mut current = String::new();
    for c in masked.chars() {
        match c {
            '(' | '[' | '{' => depth += 1,
            ')' | ']' | '}' => depth -= 1,
            ',' if depth == 0 => {
                args.push(std::mem::take(&mut current));
                continue;
            }
            _ => {}
        }
        current.push(c);
    }
    args.push(current);
    args.into_iter()
        .filter_map(|a| {
            let a = a.trim().trim_start_matches("...");
            let ident: String = a
                .chars()
                .take_while(|c| c.is_ascii_alphanumeric() || *c == '_' || *c == '$')
                .collect();
            (!ident.is_empty()).then_some(ident)
        })
        .collect()
}

/// Leading whitespace of a line.
pub fn indent_of(line: &str) -> &str {
    let trimmed = line.trim_start_matches([' ', '\t']);
    &line[..line.len() - trimmed.len()]
}

/// Re-indents a block: strips the common leading whitespace of its non-empty
/// lines, prefixes each with `indent`, and guarantees a trailing newline.
pub fn reindent(block: &str, indent: &str) -> String {
    let block = block.trim_matches('\n');
    let common = block
        .lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| indent_of(l).len())
        .min()
        .unwrap_or(0);
    let mut out = String::new();
    for line in block.lines() {
        let line = line.trim_end();
        if line.trim().is_empty() {
            out.push('\n');
        } else {
            out.push_str(indent);
            out.push_str(&line[common.min(indent_of(line).len())..]);
            out.push('\n');
        }
    }
    out
}

static NUMBER_RE: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"^[+-]?\d+(?:\.\d+)?$").unwrap());

/// A single, optionally signed, integer or decimal literal.
pub fn is_numeric_literal(text: &str) -> bool {
    NUMBER_RE.is_match(text)
}

/// Formats `value` for writing back over `original`: integer form when the
/// original was an integer and the value is whole, at least one decimal digit
/// when the original was decimal, otherwise the shortest round-trip form.
pub fn format_number_like(value: f64, original: &str) -> String {
    let original_is_decimal = original.contains('.');
    let value = if value == 0.0 { 0.0 } else { value };
    if value.fract() == 0.0 && value.abs() < 1e15 {
        if original_is_decimal {
            format!("{value:.1}")
        } else {
            format!("{}", value as i64)
        }
    } else {
        format!("{value}")
    }
}
