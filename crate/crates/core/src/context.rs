//! Context repository: per-element class summaries and the compiled context
//! block that central-module prompts read.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scene::ElementId;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VariableInfo {
    pub name: String,
    /// Literal text as written in code (`200`, `'red'`, `true`, ...).
    pub initial_value: String,
    #[serde(default)]
    pub description: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArgInfo {
    pub name: String,
    #[serde(default)]
    pub hint: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FunctionInfo {
    pub name: String,
    #[serde(default)]
    pub args: Vec<ArgInfo>,
    #[serde(rename = "return", default = "none_text")]
    pub return_value: String,
    #[serde(default)]
    pub description: String,
}

fn none_text() -> String {
    "none".to_string()
}

impl FunctionInfo {
    pub fn signature(&self) -> String {
        let args: Vec<String> = self
            .args
            .iter()
            .map(|a| {
                if a.hint.is_empty() {
                    a.name.clone()
                } else {
                    format!("{}: {}", a.name, a.hint)
                }
            })
            .collect();
        format!("{}({}) -> {}", self.name, args.join(", "), self.return_value)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassSummary {
    pub element: ElementId,
    pub class_name: String,
    #[serde(default)]
    pub variables: Vec<VariableInfo>,
    #[serde(default)]
    pub functions: Vec<FunctionInfo>,
}

impl ClassSummary {
    pub fn empty(element: ElementId, class_name: impl Into<String>) -> Self {
        ClassSummary {
            element,
            class_name: class_name.into(),
            variables: Vec::new(),
            functions: Vec::new(),
        }
    }

    pub fn variable(&self, name: &str) -> Option<&VariableInfo> {
        self.variables.iter().find(|v| v.name == name)
    }

    pub fn function(&self, name: &str) -> Option<&FunctionInfo> {
        self.functions.iter().find(|f| f.name == name)
    }

    pub fn variable_names(&self) -> Vec<&str> {
        self.variables.iter().map(|v| v.name.as_str()).collect()
    }

    /// Inserts or replaces (by name, keeping position) a variable.
    pub fn put_variable(&mut self, v: VariableInfo) {
        match self.variables.iter_mut().find(|x| x.name == v.name) {
            Some(slot) => *slot = v,
            None => self.variables.push(v),
        }
    }

    pub fn put_function(&mut self, f: FunctionInfo) {
        match self.functions.iter_mut().find(|x| x.name == f.name) {
            Some(slot) => *slot = f,
            None => self.functions.push(f),
        }
    }
}

/// Name-keyed, field-wise differences between two summaries of one element.
/// Renames show up as a removal plus an addition.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DiffReport {
    pub element: ElementId,
    pub class_name: String,
    pub added_variables: Vec<String>,
    pub removed_variables: Vec<String>,
    pub changed_variables: Vec<String>,
    pub added_functions: Vec<String>,
    pub removed_functions: Vec<String>,
    pub changed_functions: Vec<String>,
}

impl DiffReport {
    pub fn between(prior: Option<&ClassSummary>, next: &ClassSummary) -> DiffReport {
        let mut report = DiffReport {
            element: next.element.clone(),
            class_name: next.class_name.clone(),
            ..Default::default()
        };
        let empty = ClassSummary::empty(next.element.clone(), "");
        let prior = prior.unwrap_or(&empty);

        diff_keyed(
            &prior.variables,
            &next.variables,
            |v| &v.name,
            &mut report.added_variables,
            &mut report.removed_variables,
            &mut report.changed_variables,
        );
        diff_keyed(
            &prior.functions,
            &next.functions,
            |f| &f.name,
            &mut report.added_functions,
            &mut report.removed_functions,
            &mut report.changed_functions,
        );
        report
    }

    pub fn is_empty(&self) -> bool {
        self.added_variables.is_empty()
            && self.removed_variables.is_empty()
            && self.changed_variables.is_empty()
            && self.added_functions.is_empty()
            && self.removed_functions.is_empty()
            && self.changed_functions.is_empty()
    }
}

fn diff_keyed<T: PartialEq>(
    prior: &[T],
    next: &[T],
    key: impl Fn(&T) -> &String,
    added: &mut Vec<String>,
    removed: &mut Vec<String>,
    changed: &mut Vec<String>,
) {
    for item in next {
        match prior.iter().find(|p| key(p) == key(item)) {
            None => added.push(key(item).clone()),
            Some(p) if p != item => changed.push(key(item).clone()),
            Some(_) => {}
        }
    }
    for item in prior {
        if !next.iter().any(|n| key(n) == key(item)) {
            removed.push(key(item).clone());
        }
    }
}

/// Variables and functions the central module contributed to one element.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SummaryDelta {
    pub element: ElementId,
    pub variables: Vec<VariableInfo>,
    pub functions: Vec<FunctionInfo>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ContextRepository {
    summaries: BTreeMap<ElementId, ClassSummary>,
    /// Creation order.
    order: Vec<ElementId>,
}

pub const CONTEXT_HEADER: &str = "# Scene context";

impl ContextRepository {
    pub fn new() -> Self {
        Self::default()
    }

    pub(crate) fn from_ordered(summaries: Vec<ClassSummary>) -> Self {
        let order = summaries.iter().map(|s| s.element.clone()).collect();
        ContextRepository {
            summaries: summaries
                .into_iter()
                .map(|s| (s.element.clone(), s))
                .collect(),
            order,
        }
    }

    /// Summaries in creation order.
    pub fn summaries(&self) -> impl Iterator<Item = &ClassSummary> {
        self.order.iter().map(|id| &self.summaries[id])
    }

    pub fn summary(&self, e: &ElementId) -> Option<&ClassSummary> {
        self.summaries.get(e)
    }

    /// Stores `s` for its element. `expected_class` is the element's name;
    /// the caller guarantees the element exists.
    pub fn upsert(&mut self, s: ClassSummary, expected_class: &str) -> Result<DiffReport> {
        if s.class_name != expected_class {
            return Err(Error::NameMismatch {
                expected: expected_class.to_string(),
                found: s.class_name,
            });
        }
        let report = DiffReport::between(self.summaries.get(&s.element), &s);
        if !self.summaries.contains_key(&s.element) {
            self.order.push(s.element.clone());
        }
        self.summaries.insert(s.element.clone(), s);
        Ok(report)
    }

    /// Extends summaries with central-module contributions. Same-named
    /// entries are overwritten. All referenced elements must already have a
    /// summary, otherwise nothing is applied.
    pub fn apply_central_deltas(&mut self, deltas: &[SummaryDelta]) -> Result<Vec<DiffReport>> {
        if let Some(d) = deltas
            .iter()
            .find(|d| !self.summaries.contains_key(&d.element))
        {
            return Err(Error::UnknownElement(d.element.to_string()));
        }
        let mut reports = Vec::with_capacity(deltas.len());
        for delta in deltas {
            let summary = self.summaries.get_mut(&delta.element).expect("checked");
            let before = summary.clone();
            for v in &delta.variables {
                summary.put_variable(v.clone());
            }
            for f in &delta.functions {
                summary.put_function(f.clone());
            }
            reports.push(DiffReport::between(Some(&before), summary));
        }
        Ok(reports)
    }

    pub fn set_variable_value(&mut self, e: &ElementId, name: &str, literal: &str) {
        if let Some(v) = self
            .summaries
            .get_mut(e)
            .and_then(|s| s.variables.iter_mut().find(|v| v.name == name))
        {
            v.initial_value = literal.to_string();
        }
    }

    pub(crate) fn remove(&mut self, e: &ElementId) -> Option<ClassSummary> {
        self.order.retain(|x| x != e);
        self.summaries.remove(e)
    }

    /// Finds the element class that defines function `name`.
    pub fn resolve_function(&self, name: &str) -> Option<(&ClassSummary, &FunctionInfo)> {
        self.summaries()
            .find_map(|s| s.function(name).map(|f| (s, f)))
    }

    /// Deterministic text block listing every element's class, variables and
    /// functions, in creation order.
    pub fn compile(&self) -> String {
        let mut out = String::from(CONTEXT_HEADER);
        out.push('\n');
        for s in self.summaries() {
            let _ = writeln!(out, "\n## {}", s.class_name);
            if s.variables.is_empty() {
                out.push_str("variables: (none)\n");
            } else {
                out.push_str("variables:\n");
                for v in &s.variables {
                    let _ = write!(out, "- {} = {}", v.name, v.initial_value);
                    if !v.description.is_empty() {
                        let _ = write!(out, " — {}", one_line(&v.description));
                    }
                    out.push('\n');
                }
            }
            if s.functions.is_empty() {
                out.push_str("functions: (none)\n");
            } else {
                out.push_str("functions:\n");
                for f in &s.functions {
                    let _ = write!(out, "- {}", f.signature());
                    if !f.description.is_empty() {
                        let _ = write!(out, " — {}", one_line(&f.description));
                    }
                    out.push('\n');
                }
            }
        }
        out
    }
}

fn one_line(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn var(name: &str, value: &str) -> VariableInfo {
        VariableInfo {
            name: name.into(),
            initial_value: value.into(),
            description: format!("the {name}"),
        }
    }

    fn func(name: &str, desc: &str) -> FunctionInfo {
        FunctionInfo {
            name: name.into(),
            args: vec![],
            return_value: "none".into(),
            description: desc.into(),
        }
    }

    fn mario(vars: Vec<VariableInfo>) -> ClassSummary {
        ClassSummary {
            element: ElementId::new("e1"),
            class_name: "Mario".into(),
            variables: vars,
            functions: vec![],
        }
    }

    #[test]
    fn first_upsert_is_all_added_and_reupsert_is_empty() {
        let mut repo = ContextRepository::new();
        let s = mario(vec![var("speed", "200")]);
        let d = repo.upsert(s.clone(), "Mario").unwrap();
        assert_eq!(d.added_variables, vec!["speed"]);
        assert!(d.removed_variables.is_empty() && d.changed_variables.is_empty());
        assert!(repo.upsert(s, "Mario").unwrap().is_empty());
    }

    #[test]
    fn changed_initial_value_is_a_change() {
        let mut repo = ContextRepository::new();
        repo.upsert(mario(vec![var("speed", "200")]), "Mario")
            .unwrap();
        let d = repo
            .upsert(mario(vec![var("speed", "300")]), "Mario")
            .unwrap();
        assert_eq!(d.changed_variables, vec!["speed"]);
        assert!(d.added_variables.is_empty());
    }

    #[test]
    fn rename_is_remove_plus_add() {
        let mut repo = ContextRepository::new();
        repo.upsert(mario(vec![var("speed", "200")]), "Mario")
            .unwrap();
        let d = repo
            .upsert(mario(vec![var("velocity", "200")]), "Mario")
            .unwrap();
        assert_eq!(d.added_variables, vec!["velocity"]);
        assert_eq!(d.removed_variables, vec!["speed"]);
    }

    #[test]
    fn name_mismatch() {
        let mut repo = ContextRepository::new();
        let err = repo.upsert(mario(vec![]), "Luigi").unwrap_err();
        assert_eq!(err.code(), "name-mismatch");
    }

    #[test]
    fn central_deltas_extend_summaries() {
        let mut repo = ContextRepository::new();
        repo.upsert(mario(vec![]), "Mario").unwrap();
        repo.upsert(ClassSummary::empty(ElementId::new("e2"), "Spring"), "Spring")
            .unwrap();
        let deltas = vec![
            SummaryDelta {
                element: ElementId::new("e1"),
                variables: vec![],
                functions: vec![func("bounce", "bounce up")],
            },
            SummaryDelta {
                element: ElementId::new("e2"),
                variables: vec![],
                functions: vec![func("stretch", "stretch")],
            },
        ];
        let reports = repo.apply_central_deltas(&deltas).unwrap();
        assert_eq!(reports[0].added_functions, vec!["bounce"]);
        assert_eq!(reports[1].added_functions, vec!["stretch"]);

        let changed = vec![SummaryDelta {
            element: ElementId::new("e1"),
            variables: vec![],
            functions: vec![func("bounce", "bounce higher")],
        }];
        let reports = repo.apply_central_deltas(&changed).unwrap();
        assert_eq!(reports[0].changed_functions, vec!["bounce"]);
        assert!(reports[0].added_functions.is_empty());

        assert!(repo.apply_central_deltas(&[]).unwrap().is_empty());

        let unknown = vec![SummaryDelta {
            element: ElementId::new("e9"),
            ..Default::default()
        }];
        assert_eq!(
            repo.apply_central_deltas(&unknown).unwrap_err().code(),
            "unknown-element"
        );
    }

    #[test]
    fn compile_layout() {
        let repo = ContextRepository::new();
        assert_eq!(repo.compile(), "# Scene context\n");

        let mut repo = ContextRepository::new();
        let mut s = mario(vec![var("speed", "200")]);
        s.functions.push(FunctionInfo {
            name: "jump".into(),
            args: vec![ArgInfo {
                name: "force".into(),
                hint: "number".into(),
            }],
            return_value: "none".into(),
            description: "jumps".into(),
        });
        repo.upsert(s, "Mario").unwrap();
        let text = repo.compile();
        assert_eq!(
            text,
            "# Scene context\n\n## Mario\nvariables:\n- speed = 200 — the speed\nfunctions:\n- jump(force: number) -> none — jumps\n"
        );
        assert_eq!(text.lines().filter(|l| l.starts_with("- speed")).count(), 1);
        assert_eq!(repo.compile(), text);
    }

    #[test]
    fn compile_follows_creation_order() {
        let mut repo = ContextRepository::new();
        repo.upsert(ClassSummary::empty(ElementId::new("e10"), "Zed"), "Zed")
            .unwrap();
        repo.upsert(ClassSummary::empty(ElementId::new("e2"), "Amy"), "Amy")
            .unwrap();
        let text = repo.compile();
        assert!(text.find("## Zed").unwrap() < text.find("## Amy").unwrap());
    }
}
