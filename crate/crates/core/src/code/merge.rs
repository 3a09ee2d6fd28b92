//! Merging generated code into code units: element replacement, central
//! insertion blocks, and reconciliation of summaries against the code.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::code::js;
use crate::code::response::{InsertionBlocks, SummaryPayload};
use crate::code::unit::locate_regions;
use crate::context::{ArgInfo, ClassSummary, FunctionInfo, VariableInfo};
use crate::error::{Error, Result};
use crate::scene::ElementId;

/// Element code accepted for merging, possibly after a marker repair.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PreparedElementCode {
    pub body: String,
    pub repaired: Vec<&'static str>,
}

/// Validates generated element code: it must declare a class named after the
/// element and carry the four markers, after at most one repair pass.
pub fn prepare_element_code(element_name: &str, code: &str) -> Result<PreparedElementCode> {
    let classes = js::classes(code);
    if !classes.iter().any(|c| c.name == element_name) {
        return Err(Error::ClassNameMismatch {
            expected: element_name.to_string(),
            found: classes.first().map(|c| c.name.clone()),
        });
    }
    let repaired = crate::code::unit::repair_markers(code, element_name).map_err(|detail| {
        Error::MissingMarkers {
            element: element_name.to_string(),
            detail,
        }
    })?;
    Ok(PreparedElementCode {
        body: repaired.body,
        repaired: repaired.inserted,
    })
}

/// Text of central-inserted members of one element, keyed by member name.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ElementLedger {
    #[serde(default)]
    pub variables: BTreeMap<String, String>,
    #[serde(default)]
    pub functions: BTreeMap<String, String>,
}

impl ElementLedger {
    pub fn is_empty(&self) -> bool {
        self.variables.is_empty() && self.functions.is_empty()
    }
}

/// Result of applying one element's insertion blocks.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct InsertOutcome {
    pub body: String,
    pub variables: Vec<String>,
    pub functions: Vec<String>,
    /// Members that replaced same-named code not written by an earlier
    /// insertion, or differing from it.
    pub conflicts: Vec<String>,
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Part {
    Variables,
    Functions,
}

struct Item {
    name: String,
    text: String,
}

fn block_items(block: &str, part: Part) -> Vec<Item> {
    match part {
        Part::Variables => js::var_decls(block)
            .into_iter()
            .map(|d| Item {
                name: d.name,
                text: block[d.span].to_string(),
            })
            .collect(),
        Part::Functions => js::fn_decls(block)
            .into_iter()
            .map(|d| Item {
                name: d.name,
                text: block[d.span].to_string(),
            })
            .collect(),
    }
}

fn normalized(text: &str) -> String {
    js::reindent(text, "")
}

/// Places one member into its region, replacing a same-named declaration in
/// place or appending before the region's end marker.
fn place(body: &str, part: Part, item: &Item) -> std::result::Result<(String, Option<String>), String> {
    let regions = locate_regions(body)?;
    let (range, end_marker) = match part {
        Part::Variables => (regions.variables.clone(), regions.markers[1].clone()),
        Part::Functions => (regions.functions.clone(), regions.markers[3].clone()),
    };
    let region = &body[range.clone()];
    let existing = match part {
        Part::Variables => js::var_decls(region)
            .into_iter()
            .find(|d| d.name == item.name)
            .map(|d| d.span),
        Part::Functions => js::fn_decls(region)
            .into_iter()
            .find(|d| d.name == item.name)
            .map(|d| d.span),
    };
    let mut out = body.to_string();
    match existing {
        Some(span) => {
            let old = region[span.clone()].to_string();
            let indent = js::indent_of(&old).to_string();
            let abs = (range.start + span.start)..(range.start + span.end);
            out.replace_range(abs, &js::reindent(&item.text, &indent));
            Ok((out, Some(old)))
        }
        None => {
            let indent = js::indent_of(&body[end_marker.clone()]).to_string();
            let mut text = js::reindent(&item.text, &indent);
            if part == Part::Functions && !region.trim().is_empty() {
                text.insert(0, '\n');
            }
            out.insert_str(end_marker.start, &text);
            Ok((out, None))
        }
    }
}

/// Applies the central module's insertion blocks for one element. Only the
/// element's marker regions change.
pub fn apply_insertions(
    element_name: &str,
    body: &str,
    blocks: &InsertionBlocks,
    ledger: &mut ElementLedger,
) -> Result<InsertOutcome> {
    let mut out = InsertOutcome {
        body: body.to_string(),
        ..Default::default()
    };
    let parts = [
        (Part::Variables, blocks.variables.as_deref()),
        (Part::Functions, blocks.functions.as_deref()),
    ];
    for (part, block) in parts {
        let Some(block) = block.filter(|b| !b.trim().is_empty()) else {
            continue;
        };
        let items = block_items(block, part);
        if items.is_empty() {
            return Err(Error::InvalidCodeUnit {
                unit: element_name.to_string(),
                detail: format!(
                    "insertion block for {} declares nothing",
                    if part == Part::Variables { "variables" } else { "functions" }
                ),
            });
        }
        for item in items {
            let (body, replaced) = place(&out.body, part, &item).map_err(|detail| {
                Error::MissingMarkers {
                    element: element_name.to_string(),
                    detail,
                }
            })?;
            let book = match part {
                Part::Variables => &mut ledger.variables,
                Part::Functions => &mut ledger.functions,
            };
            if let Some(old) = replaced {
                let old = normalized(&old);
                let ours = book.get(&item.name).is_some_and(|t| *t == old);
                if !ours && old != normalized(&item.text) {
                    out.conflicts.push(item.name.clone());
                }
            }
            book.insert(item.name.clone(), normalized(&item.text));
            match part {
                Part::Variables => out.variables.push(item.name),
                Part::Functions => out.functions.push(item.name),
            }
            out.body = body;
        }
    }
    Ok(out)
}

fn one_line(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Builds the summary for an element from its code. Variable names and
/// values come from the variable region; descriptions come from the model's
/// report, falling back to the prior summary. Functions are the reported or
/// prior ones plus any found in the function region.
pub fn reconcile(
    element: &ElementId,
    class_name: &str,
    body: &str,
    prior: Option<&ClassSummary>,
    reported: Option<&SummaryPayload>,
) -> ClassSummary {
    let mut summary = ClassSummary::empty(element.clone(), class_name);
    let Ok(regions) = locate_regions(body) else {
        return summary;
    };
    let describe_var = |name: &str| {
        reported
            .and_then(|r| r.variables.iter().find(|v| v.name == name))
            .map(|v| v.description.clone())
            .filter(|d| !d.is_empty())
            .or_else(|| prior.and_then(|p| p.variable(name)).map(|v| v.description.clone()))
            .unwrap_or_default()
    };
    let var_region = &body[regions.variables.clone()];
    let mut seen = BTreeSet::new();
    for d in js::var_decls(var_region) {
        if !seen.insert(d.name.clone()) {
            continue;
        }
        summary.variables.push(VariableInfo {
            description: describe_var(&d.name),
            initial_value: one_line(d.value_text(var_region)),
            name: d.name,
        });
    }

    let base: Vec<FunctionInfo> = match reported {
        Some(r) => r.functions.clone(),
        None => prior.map(|p| p.functions.clone()).unwrap_or_default(),
    };
    for mut f in base {
        if f.description.is_empty() {
            if let Some(p) = prior.and_then(|p| p.function(&f.name)) {
                f.description = p.description.clone();
            }
        }
        summary.put_function(f);
    }
    let fn_region = &body[regions.functions.clone()];
    for d in js::fn_decls(fn_region) {
        if summary.function(&d.name).is_some() {
            continue;
        }
        let info = match prior.and_then(|p| p.function(&d.name)) {
            Some(p) => p.clone(),
            None => FunctionInfo {
                name: d.name.clone(),
                args: d
                    .args
                    .iter()
                    .map(|a| ArgInfo {
                        name: a.clone(),
                        hint: String::new(),
                    })
                    .collect(),
                return_value: "none".into(),
                description: String::new(),
            },
        };
        summary.functions.push(info);
    }
    summary
}

static NEW_RE: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"\bnew\s+([A-Za-z_$][\w$]*)\s*\(").unwrap());

const BUILTIN_CLASSES: &[&str] = &[
    "Array", "Date", "Error", "Float32Array", "Image", "Map", "Object", "Promise", "RegExp",
    "Set", "String", "WeakMap", "WeakSet", "Number", "Boolean", "Function", "Uint8Array",
    "Int32Array", "Audio",
];

/// Class names instantiated with `new X(...)` in central code that are not
/// element classes, classes declared in the script itself, or JS built-ins.
pub fn unresolved_classes(central: &str, element_names: &[&str]) -> Vec<String> {
    let masked = js::mask(central);
    let local: BTreeSet<String> = js::classes(central).into_iter().map(|c| c.name).collect();
    let mut out: Vec<String> = Vec::new();
    for cap in NEW_RE.captures_iter(&masked) {
        let name = &cap[1];
        if element_names.contains(&name)
            || local.contains(name)
            || BUILTIN_CLASSES.contains(&name)
            || out.iter().any(|o| o == name)
        {
            continue;
        }
        out.push(name.to_string());
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::code::template::element_template;
    use crate::code::unit::{CodeUnit, FUNCTION_END};
    use crate::prompt::FrameworkId;
    use crate::session::ModuleId;

    fn earth() -> String {
        element_template(FrameworkId::P5js, "Earth")
    }

    #[test]
    fn prepare_rejects_wrong_class() {
        let err = prepare_element_code("Earth", "class Moon {}\n").unwrap_err();
        assert!(matches!(
            err,
            Error::ClassNameMismatch { ref found, .. } if found.as_deref() == Some("Moon")
        ));
        let err = prepare_element_code("Earth", "let x = 1;\n").unwrap_err();
        assert_eq!(err.code(), "class-name-mismatch");
    }

    #[test]
    fn prepare_repairs_missing_function_end() {
        let code = earth().replace(&format!("  {FUNCTION_END}\n"), "");
        let p = prepare_element_code("Earth", &code).unwrap();
        assert_eq!(p.repaired, vec![FUNCTION_END]);
        locate_regions(&p.body).unwrap();
    }

    fn functions(text: &str) -> InsertionBlocks {
        InsertionBlocks {
            variables: None,
            functions: Some(text.to_string()),
        }
    }

    const ORBIT: &str = "orbit(cx, cy, r) {\n  this.angle += 0.01;\n  this.x = cx + r * cos(this.angle);\n}\n";

    #[test]
    fn insertion_lands_in_function_region_and_is_idempotent() {
        let mut ledger = ElementLedger::default();
        let blocks = InsertionBlocks {
            variables: Some("this.angle = 0;\n".into()),
            functions: Some(ORBIT.into()),
        };
        let first = apply_insertions("Earth", &earth(), &blocks, &mut ledger).unwrap();
        assert!(first.conflicts.is_empty());
        let unit = CodeUnit::new(ModuleId::Central, first.body.clone());
        assert!(unit.function_region().unwrap().contains("  orbit(cx, cy, r) {\n"));
        assert!(unit
            .region_variable_names()
            .unwrap()
            .contains(&"angle".to_string()));
        let second = apply_insertions("Earth", &first.body, &blocks, &mut ledger).unwrap();
        assert_eq!(second.body, first.body);
        assert!(second.conflicts.is_empty());
    }

    #[test]
    fn latest_insertion_wins() {
        let mut ledger = ElementLedger::default();
        let a = apply_insertions("Earth", &earth(), &functions(ORBIT), &mut ledger).unwrap();
        let v2 = ORBIT.replace("0.01", "0.02");
        let b = apply_insertions("Earth", &a.body, &functions(&v2), &mut ledger).unwrap();
        assert!(b.conflicts.is_empty(), "replacing our own insertion is silent");
        assert!(b.body.contains("0.02") && !b.body.contains("0.01"));
        assert_eq!(b.body.matches("orbit(").count(), 1);
    }

    #[test]
    fn replacing_foreign_code_warns() {
        let own = earth().replace(
            &format!("  {FUNCTION_END}"),
            &format!("  orbit() {{\n    return 0;\n  }}\n  {FUNCTION_END}"),
        );
        let mut ledger = ElementLedger::default();
        let out = apply_insertions("Earth", &own, &functions(ORBIT), &mut ledger).unwrap();
        assert_eq!(out.conflicts, vec!["orbit".to_string()]);
        assert_eq!(out.body.matches("orbit(").count(), 1);
    }

    #[test]
    fn insertion_only_touches_regions() {
        let mut ledger = ElementLedger::default();
        let before = earth();
        let out = apply_insertions("Earth", &before, &functions(ORBIT), &mut ledger).unwrap();
        let r0 = locate_regions(&before).unwrap();
        let r1 = locate_regions(&out.body).unwrap();
        assert_eq!(before[..r0.functions.start], out.body[..r1.functions.start]);
        assert_eq!(before[r0.functions.end..], out.body[r1.functions.end..]);
    }

    #[test]
    fn reconcile_prefers_code_for_names_and_model_for_descriptions() {
        let body = earth().replace("this.scale = 1;\n", "this.scale = 1;\n    this.speed = 200;\n");
        let reported = SummaryPayload {
            class_name: "Earth".into(),
            variables: vec![
                VariableInfo {
                    name: "speed".into(),
                    initial_value: "999".into(),
                    description: "pixels per second".into(),
                },
                VariableInfo {
                    name: "ghost".into(),
                    initial_value: "1".into(),
                    description: "not in code".into(),
                },
            ],
            ..Default::default()
        };
        let s = reconcile(&ElementId::new("e1"), "Earth", &body, None, Some(&reported));
        assert_eq!(s.variable_names(), vec!["x", "y", "rotationDeg", "scale", "speed"]);
        let speed = s.variable("speed").unwrap();
        assert_eq!(speed.initial_value, "200");
        assert_eq!(speed.description, "pixels per second");
    }

    #[test]
    fn reconcile_adds_static_functions() {
        let mut ledger = ElementLedger::default();
        let body = apply_insertions("Earth", &earth(), &functions(ORBIT), &mut ledger)
            .unwrap()
            .body;
        let s = reconcile(&ElementId::new("e1"), "Earth", &body, None, None);
        let f = s.function("orbit").unwrap();
        let args: Vec<&str> = f.args.iter().map(|a| a.name.as_str()).collect();
        assert_eq!(args, ["cx", "cy", "r"]);
    }

    #[test]
    fn unresolved_class_references() {
        let central = "class Scene {}\nconst a = new Sun();\nconst b = new Moon(1);\nconst m = new Map();\nnew Scene();\nconst s = 'new Ghost()';\n";
        assert_eq!(unresolved_classes(central, &["Sun"]), vec!["Moon".to_string()]);
    }
}
