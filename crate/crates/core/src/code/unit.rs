//! Code units and their flag-delimited regions.

use std::ops::Range;

use crate::code::js;
use crate::scene::Transform;
use crate::session::ModuleId;

pub const VARIABLE_START: &str = "//variable start";
pub const VARIABLE_END: &str = "//variable end";
pub const FUNCTION_START: &str = "//function start";
pub const FUNCTION_END: &str = "//function end";

pub const MARKERS: [&str; 4] = [VARIABLE_START, VARIABLE_END, FUNCTION_START, FUNCTION_END];

/// Transform anchor variables, in `x, y, rotation, scale` order.
pub const TRANSFORM_ANCHORS: [&str; 4] = ["x", "y", "rotationDeg", "scale"];

/// A generated source file owned by one module.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CodeUnit {
    pub owner: ModuleId,
    pub body: String,
}

/// Located marker regions of an element code unit. Region ranges cover the
/// lines strictly between the marker lines.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Regions {
    pub variables: Range<usize>,
    pub functions: Range<usize>,
    /// Line spans of the four marker lines, in marker order.
    pub markers: [Range<usize>; 4],
}

impl CodeUnit {
    pub fn new(owner: ModuleId, body: impl Into<String>) -> Self {
        CodeUnit {
            owner,
            body: body.into(),
        }
    }

    pub fn regions(&self) -> Result<Regions, String> {
        locate_regions(&self.body)
    }

    pub fn variable_region(&self) -> Result<&str, String> {
        let r = self.regions()?;
        Ok(&self.body[r.variables])
    }

    pub fn function_region(&self) -> Result<&str, String> {
        let r = self.regions()?;
        Ok(&self.body[r.functions])
    }

    /// Variable names declared in the variable region, in order.
    pub fn region_variable_names(&self) -> Result<Vec<String>, String> {
        Ok(js::var_decls(self.variable_region()?)
            .into_iter()
            .map(|d| d.name)
            .collect())
    }
}

fn is_marker_line(line: &str, marker: &str) -> bool {
    line.trim() == marker
}

/// Finds the four marker lines. They must each occur exactly once, alone on
/// their line, in the order variable start/end, function start/end.
pub fn locate_regions(body: &str) -> Result<Regions, String> {
    let lines = js::line_spans(body);
    let mut found: [Vec<Range<usize>>; 4] = Default::default();
    for span in &lines {
        let text = &body[span.clone()];
        for (k, marker) in MARKERS.iter().enumerate() {
            if is_marker_line(text, marker) {
                found[k].push(span.clone());
            }
        }
    }
    let mut problems = Vec::new();
    for (k, marker) in MARKERS.iter().enumerate() {
        match found[k].len() {
            1 => {}
            0 => problems.push(format!("`{marker}` missing")),
            n => problems.push(format!("`{marker}` appears {n} times")),
        }
    }
    if !problems.is_empty() {
        return Err(problems.join("; "));
    }
    let markers: [Range<usize>; 4] = std::array::from_fn(|k| found[k][0].clone());
    if !markers.windows(2).all(|w| w[0].start < w[1].start) {
        return Err("markers out of order".into());
    }
    Ok(Regions {
        variables: markers[0].end..markers[1].start,
        functions: markers[2].end..markers[3].start,
        markers,
    })
}

/// Outcome of a marker repair pass.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Repaired {
    pub body: String,
    pub inserted: Vec<&'static str>,
}

/// Inserts missing marker lines at heuristic positions: an absent variable
/// region goes right after the class's opening brace, an absent function
/// region right before its closing brace. A lone start (or end) marker is
/// paired around the adjacent run of declarations.
///
/// Duplicated or out-of-order markers, or a missing or unbalanced class
/// body, are not repairable.
pub fn repair_markers(body: &str, class_name: &str) -> Result<Repaired, String> {
    if locate_regions(body).is_ok() {
        return Ok(Repaired {
            body: body.to_string(),
            inserted: Vec::new(),
        });
    }
    let lines = js::line_spans(body);
    let mut present: [Option<usize>; 4] = [None; 4];
    for (li, span) in lines.iter().enumerate() {
        for (k, marker) in MARKERS.iter().enumerate() {
            if is_marker_line(&body[span.clone()], marker) {
                if present[k].is_some() {
                    return Err(format!("`{marker}` appears more than once"));
                }
                present[k] = Some(li);
            }
        }
    }
    let order: Vec<usize> = present.iter().flatten().copied().collect();
    if !order.windows(2).all(|w| w[0] < w[1]) {
        return Err("markers out of order".into());
    }
    let class = js::classes(body)
        .into_iter()
        .find(|c| c.name == class_name)
        .ok_or_else(|| format!("class `{class_name}` not found"))?;
    let close = class
        .close
        .ok_or_else(|| format!("class `{class_name}` body is unbalanced"))?;

    let masked = js::mask(body);
    let line_of = |offset: usize| lines.iter().position(|l| l.contains(&offset)).unwrap_or(0);
    let class_line = line_of(class.open);
    let class_indent = js::indent_of(&body[lines[class_line].clone()]).to_string();
    let member_indent = format!("{class_indent}  ");

    // (byte offset, text) insertions, applied back to front
    let mut inserts: Vec<(usize, String)> = Vec::new();
    let mut inserted = Vec::new();
    let marker_line = |indent: &str, marker: &str| format!("{indent}{marker}\n");

    match (present[0], present[1]) {
        (None, None) => {
            let at = lines[class_line].end;
            inserts.push((
                at,
                format!(
                    "{}{}",
                    marker_line(&member_indent, VARIABLE_START),
                    marker_line(&member_indent, VARIABLE_END)
                ),
            ));
            inserted.extend([VARIABLE_START, VARIABLE_END]);
        }
        (Some(start), None) => {
            let indent = js::indent_of(&body[lines[start].clone()]).to_string();
            let at = declaration_run_after(body, &masked, &lines, start);
            inserts.push((at, marker_line(&indent, VARIABLE_END)));
            inserted.push(VARIABLE_END);
        }
        (None, Some(end)) => {
            let indent = js::indent_of(&body[lines[end].clone()]).to_string();
            let at = declaration_run_before(body, &masked, &lines, end);
            inserts.push((at, marker_line(&indent, VARIABLE_START)));
            inserted.push(VARIABLE_START);
        }
        (Some(_), Some(_)) => {}
    }

    let close_line = line_of(close);
    let before_close = if masked[lines[close_line].clone()].trim_start().starts_with('}') {
        (lines[close_line].start, String::new())
    } else {
        (close, "\n".to_string())
    };
    match (present[2], present[3]) {
        (None, None) => {
            let (at, lead) = before_close;
            inserts.push((
                at,
                format!(
                    "{lead}{}{}",
                    marker_line(&member_indent, FUNCTION_START),
                    marker_line(&member_indent, FUNCTION_END)
                ),
            ));
            inserted.extend([FUNCTION_START, FUNCTION_END]);
        }
        (Some(start), None) => {
            let indent = js::indent_of(&body[lines[start].clone()]).to_string();
            let (at, lead) = before_close;
            inserts.push((at, format!("{lead}{}", marker_line(&indent, FUNCTION_END))));
            inserted.push(FUNCTION_END);
        }
        (None, Some(end)) => {
            let indent = js::indent_of(&body[lines[end].clone()]).to_string();
            inserts.push((lines[end].start, marker_line(&indent, FUNCTION_START)));
            inserted.push(FUNCTION_START);
        }
        (Some(_), Some(_)) => {}
    }

    let mut out = body.to_string();
    if !out.ends_with('\n') && inserts.iter().any(|(at, _)| *at == out.len()) {
        out.push('\n');
    }
    inserts.sort_by(|a, b| b.0.cmp(&a.0));
    for (at, text) in inserts {
        out.insert_str(at, &text);
    }
    locate_regions(&out).map_err(|e| format!("repair failed: {e}"))?;
    Ok(Repaired {
        body: out,
        inserted,
    })
}

fn is_blank_or_comment(masked_line: &str) -> bool {
    masked_line.trim().is_empty()
}

/// Byte offset just past the run of declarations following line `start`.
fn declaration_run_after(
    body: &str,
    masked: &str,
    lines: &[Range<usize>],
    start: usize,
) -> usize {
    let from = lines[start].end;
    let tail = &body[from..];
    let decls = js::var_decls(tail);
    let mut at = from;
    let mut cursor = from;
    let mut next_decl = decls.iter().peekable();
    for span in &lines[start + 1..] {
        if span.start < cursor {
            continue;
        }
        match next_decl.peek() {
            Some(d) if d.span.start + from == span.start => {
                cursor = d.span.end + from;
                at = cursor;
                next_decl.next();
            }
            _ if is_blank_or_comment(&masked[span.clone()]) => {
                cursor = span.end;
            }
            _ => break,
        }
    }
    at
}

/// Byte offset of the first line of the run of declarations ending at line
/// `end`, scanning back to the enclosing block's opening line.
fn declaration_run_before(body: &str, masked: &str, lines: &[Range<usize>], end: usize) -> usize {
    let block_start = (0..end)
        .rev()
        .find(|&li| masked[lines[li].clone()].trim_end().ends_with('{'))
        .map(|li| li + 1)
        .unwrap_or(0);
    let from = lines.get(block_start).map_or(lines[end].start, |l| l.start);
    let text = &body[from..lines[end].start];
    let decls = js::var_decls(text);
    let local_lines = js::line_spans(text);
    let local_masked = &masked[from..lines[end].start];
    // walk backwards accepting declarations and blank lines
    let mut at = lines[end].start;
    let mut li = local_lines.len();
    while li > 0 {
        let span = &local_lines[li - 1];
        if is_blank_or_comment(&local_masked[span.clone()]) {
            li -= 1;
            continue;
        }
        match decls.iter().find(|d| d.span.end == span.end) {
            Some(d) => {
                at = from + d.span.start;
                li = local_lines
                    .iter()
                    .position(|l| l.start == d.span.start)
                    .unwrap_or(0);
            }
            None => break,
        }
    }
    at
}

/// Rewrites the four transform anchor literals inside the variable region.
/// Only the right-hand sides of the anchor lines change.
pub fn sync_transform_text(body: &str, t: &Transform) -> Result<String, &'static str> {
    let regions = locate_regions(body).map_err(|_| "markers")?;
    let region = &body[regions.variables.clone()];
    let decls = js::var_decls(region);
    let values = [t.x, t.y, t.rotation, t.scale];
    let mut edits = Vec::with_capacity(4);
    for (anchor, value) in TRANSFORM_ANCHORS.iter().zip(values) {
        let decl = decls
            .iter()
            .find(|d| d.name == *anchor && region[d.span.clone()].trim_start().starts_with("this."))
            .ok_or(*anchor)?;
        let old = decl.value_text(region);
        let new = js::format_number_like(value, if js::is_numeric_literal(old) { old } else { "0" });
        edits.push((decl.value.clone(), new));
    }
    edits.sort_by(|a, b| b.0.start.cmp(&a.0.start));
    let mut out = body.to_string();
    for (range, text) in edits {
        let abs = (range.start + regions.variables.start)..(range.end + regions.variables.start);
        out.replace_range(abs, &text);
    }
    Ok(out)
}

/// Reads the transform back out of the anchor literals, if all four are
/// plain numbers describing a valid transform.
pub fn read_transform(body: &str) -> Option<Transform> {
    let regions = locate_regions(body).ok()?;
    let region = &body[regions.variables];
    let decls = js::var_decls(region);
    let mut values = [0.0; 4];
    for (slot, anchor) in values.iter_mut().zip(TRANSFORM_ANCHORS) {
        let d = decls.iter().find(|d| {
            d.name == anchor && region[d.span.clone()].trim_start().starts_with("this.")
        })?;
        let text = d.value_text(region);
        if !js::is_numeric_literal(text) {
            return None;
        }
        *slot = text.parse().ok()?;
    }
    Transform {
        x: values[0],
        y: values[1],
        rotation: values[2],
        scale: values[3],
    }
    .normalized()
    .ok()
}

#[cfg(test)]
mod tests {
    use super::*;

    const GOOD: &str = "class Mario {\n  constructor(scene) {\n    //variable start\n    this.x = 0;\n    this.y = 0;\n    this.rotationDeg = 0;\n    this.scale = 1;\n    this.speed = 200;\n    //variable end\n  }\n\n  //function start\n  jump() {\n    this.vy = -300;\n  }\n  //function end\n}\n";

    #[test]
    fn locates_regions() {
        let r = locate_regions(GOOD).unwrap();
        assert!(GOOD[r.variables.clone()].starts_with("    this.x = 0;"));
        assert!(GOOD[r.variables.clone()].ends_with("this.speed = 200;\n"));
        assert_eq!(&GOOD[r.functions], "  jump() {\n    this.vy = -300;\n  }\n");
    }

    #[test]
    fn rejects_missing_duplicate_and_misordered_markers() {
        let missing = GOOD.replace("  //function end\n", "");
        assert!(locate_regions(&missing).unwrap_err().contains("missing"));
        let dup = GOOD.replace("  //function end\n", "  //function end\n  //function end\n");
        assert!(locate_regions(&dup).unwrap_err().contains("2 times"));
        let swapped = GOOD
            .replace("//variable start", "//TMP")
            .replace("//variable end", "//variable start")
            .replace("//TMP", "//variable end");
        assert!(locate_regions(&swapped).unwrap_err().contains("order"));
    }

    #[test]
    fn markers_must_be_alone_on_their_line() {
        let inline = GOOD.replace("    //variable end\n", "    this.z = 1; //variable end\n");
        assert!(locate_regions(&inline).is_err());
        // surrounding whitespace is fine
        let spaced = GOOD.replace("    //variable end", "\t//variable end  ");
        assert!(locate_regions(&spaced).is_ok());
        // case-sensitive
        let upper = GOOD.replace("//variable end", "//Variable End");
        assert!(locate_regions(&upper).is_err());
    }

    #[test]
    fn repair_inserts_missing_function_end_before_class_close() {
        let broken = GOOD.replace("  //function end\n", "");
        let fixed = repair_markers(&broken, "Mario").unwrap();
        assert_eq!(fixed.inserted, vec![FUNCTION_END]);
        assert_eq!(fixed.body, GOOD);
    }

    #[test]
    fn repair_inserts_whole_regions() {
        let src = "class Sun {\n  constructor() {\n    this.x = 0;\n  }\n  shine() {}\n}\n";
        let fixed = repair_markers(src, "Sun").unwrap();
        assert_eq!(fixed.inserted.len(), 4);
        let r = locate_regions(&fixed.body).unwrap();
        assert!(fixed.body[r.variables].is_empty());
        assert!(fixed.body.starts_with("class Sun {\n  //variable start\n  //variable end\n"));
        assert!(fixed.body.ends_with("  shine() {}\n  //function start\n  //function end\n}\n"));
    }

    #[test]
    fn repair_pairs_lone_variable_markers_around_declarations() {
        let no_end = GOOD.replace("    //variable end\n", "");
        let fixed = repair_markers(&no_end, "Mario").unwrap();
        assert_eq!(fixed.body, GOOD);

        let no_start = GOOD.replace("    //variable start\n", "");
        let fixed = repair_markers(&no_start, "Mario").unwrap();
        assert_eq!(fixed.body, GOOD);
    }

    #[test]
    fn repair_gives_up_on_duplicates_and_missing_class() {
        let dup = GOOD.replace("  //function end\n", "").replace(
            "    //variable end\n",
            "    //variable end\n    //variable end\n",
        );
        assert!(repair_markers(&dup, "Mario").is_err());
        assert!(repair_markers("const x = 1;\n", "Mario").is_err());
        assert!(repair_markers(&GOOD.replace("//function end", ""), "Luigi").is_err());
    }

    #[test]
    fn repair_handles_close_brace_sharing_a_line() {
        let src = "class A {\n  constructor() {\n    //variable start\n    //variable end\n  }\n  f() { return 1; } }";
        let fixed = repair_markers(src, "A").unwrap();
        assert!(locate_regions(&fixed.body).is_ok());
        assert!(fixed.body.contains("f() { return 1; } \n  //function start\n  //function end\n}"));
    }

    #[test]
    fn transform_sync_rewrites_only_anchor_literals() {
        let t = Transform {
            x: 120.0,
            y: 340.0,
            rotation: 0.0,
            scale: 1.0,
        };
        let out = sync_transform_text(GOOD, &t).unwrap();
        let changed: Vec<_> = GOOD
            .lines()
            .zip(out.lines())
            .filter(|(a, b)| a != b)
            .collect();
        assert_eq!(
            changed,
            vec![("    this.x = 0;", "    this.x = 120;"), ("    this.y = 0;", "    this.y = 340;")]
        );
        assert_eq!(read_transform(&out), Some(t));
        assert_eq!(sync_transform_text(GOOD, &Transform::IDENTITY).unwrap(), GOOD);
    }

    #[test]
    fn transform_sync_needs_all_anchors() {
        let without = GOOD.replace("    this.scale = 1;\n", "");
        assert_eq!(
            sync_transform_text(&without, &Transform::IDENTITY).unwrap_err(),
            "scale"
        );
        assert_eq!(read_transform(&without), None);
    }
}
