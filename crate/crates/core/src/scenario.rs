//! Scripted scenarios: JSON step lists replayed against a fresh project,
//! with assertions on the saved tree.
//!
//! A scenario directory holds `scenario.json`, a `fixtures/` directory for
//! the mock backend and, optionally, `assets/` with images referenced by
//! steps.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::code::unit::locate_regions;
use crate::engine::{Engine, LogicalClock};
use crate::error::{Error, Result};
use crate::llm::{LlmBackend, MockBackend};
use crate::project::{AssetUpload, Project};
use crate::prompt::FrameworkId;
use crate::scene::{ElementKind, Point, ProxyKind, Transform};
use crate::session::Role;
use crate::store;

pub const SCENARIO_FILE: &str = "scenario.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub name: String,
    #[serde(default)]
    pub description: String,
    pub project: ProjectSetup,
    pub steps: Vec<Step>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProjectSetup {
    pub name: String,
    #[serde(default)]
    pub framework: Option<FrameworkId>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "kebab-case")]
pub enum Step {
    CreateElement {
        name: String,
        kind: ElementKind,
        /// Image path relative to the scenario directory.
        #[serde(default)]
        asset: Option<String>,
        #[serde(default)]
        expect_error: Option<String>,
    },
    DeleteElement {
        element: String,
    },
    SetTransform {
        element: String,
        x: f64,
        y: f64,
        #[serde(default)]
        rotation: f64,
        #[serde(default = "one")]
        scale: f64,
        #[serde(default)]
        expect_error: Option<String>,
    },
    AddProxy {
        kind: ProxyKind,
        points: Vec<Point>,
        #[serde(default)]
        expect_label: Option<String>,
    },
    DeleteProxy {
        label: String,
    },
    Prompt {
        module: String,
        text: String,
        #[serde(default)]
        expect_error: Option<String>,
    },
    SetSlider {
        element: String,
        variable: String,
        value: f64,
        #[serde(default)]
        expect_error: Option<String>,
    },
    Snapshot {
        label: String,
        path: String,
    },
    Assert {
        check: Check,
    },
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RegionName {
    Variables,
    Functions,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Check {
    FileHash {
        path: String,
        sha256: String,
    },
    FileContains {
        path: String,
        text: String,
        #[serde(default)]
        region: Option<RegionName>,
    },
    FileNotContains {
        path: String,
        text: String,
    },
    FileMatchesSnapshot {
        path: String,
        label: String,
    },
    ManifestValue {
        element: String,
        variable: String,
        #[serde(default)]
        current: Option<f64>,
        #[serde(default)]
        min: Option<f64>,
        #[serde(default)]
        max: Option<f64>,
        #[serde(default)]
        step: Option<f64>,
    },
    PromptContains {
        module: String,
        text: String,
    },
    CallResolves {
        function: String,
        element: String,
    },
    Exchanges {
        module: String,
        count: usize,
    },
}

/// Tolerance for manifest number comparisons.
pub const MANIFEST_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepOutcome {
    pub index: usize,
    pub op: String,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplayReport {
    pub scenario: String,
    pub steps: Vec<StepOutcome>,
    pub assertions: usize,
    /// SHA-256 over the final saved tree.
    pub tree_digest: String,
}

pub fn load_scenario(dir: &Path) -> Result<Scenario> {
    let path = dir.join(SCENARIO_FILE);
    let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::Scenario(format!("{}: {e}", path.display())))
}

/// Mock backend over the scenario's `fixtures/` directory.
pub fn scenario_backend(dir: &Path) -> Result<MockBackend> {
    MockBackend::from_dir(&dir.join("fixtures"))
}

pub fn tree_digest(project: &Project) -> String {
    let mut h = Sha256::new();
    for (path, bytes) in store::render_tree(project) {
        h.update((path.len() as u64).to_le_bytes());
        h.update(path.as_bytes());
        h.update((bytes.len() as u64).to_le_bytes());
        h.update(&bytes);
    }
    hex::encode(h.finalize())
}

fn media_type_for(path: &Path) -> &'static str {
    match path
        .extension()
        .and_then(|e| e.to_str())
        .map(str::to_ascii_lowercase)
        .as_deref()
    {
        Some("png") => "image/png",
        Some("jpg" | "jpeg") => "image/jpeg",
        Some("gif") => "image/gif",
        Some("svg") => "image/svg+xml",
        Some("webp") => "image/webp",
        _ => "application/octet-stream",
    }
}

struct Runner<'a> {
    scenario_dir: &'a Path,
    project_dir: PathBuf,
    engine: Engine,
    snapshots: BTreeMap<String, Vec<u8>>,
    assertions: usize,
}

fn fail(step: usize, detail: impl Into<String>) -> Error {
    Error::AssertionFailed {
        step,
        detail: detail.into(),
    }
}

/// Compares an operation result against an optional expected error code.
fn expect<T>(step: usize, outcome: Result<T>, expected: &Option<String>) -> Result<String> {
    match (outcome, expected) {
        (Ok(_), None) => Ok("ok".into()),
        (Err(e), Some(code)) if e.code() == code => Ok(format!("failed as expected ({code})")),
        (Ok(_), Some(code)) => Err(fail(step, format!("expected error {code}, got success"))),
        (Err(e), _) => Err(fail(step, format!("{}: {e}", e.code()))),
    }
}

impl Runner<'_> {
    fn read_file(&self, step: usize, rel: &str) -> Result<Vec<u8>> {
        std::fs::read(self.project_dir.join(rel)).map_err(|e| fail(step, format!("{rel}: {e}")))
    }

    fn element_id(&self, step: usize, name: &str) -> Result<crate::scene::ElementId> {
        self.engine
            .read(|p| p.resolve_element(name).map(|e| e.id.clone()))
            .map_err(|e| fail(step, e.to_string()))
    }

    fn run_step(&mut self, index: usize, step: &Step) -> Result<String> {
        let now = self.engine.now_ms();
        match step {
            Step::CreateElement {
                name,
                kind,
                asset,
                expect_error,
            } => {
                let upload = match asset {
                    Some(rel) => {
                        let path = self.scenario_dir.join(rel);
                        let bytes = std::fs::read(&path).map_err(|e| Error::io(&path, e))?;
                        Some(AssetUpload {
                            file_name: rel.clone(),
                            media_type: media_type_for(&path).to_string(),
                            bytes,
                        })
                    }
                    None => None,
                };
                let r = self.engine.mutate(|p| p.create_element(name, *kind, upload, now));
                expect(index, r, expect_error)
            }
            Step::DeleteElement { element } => {
                let id = self.element_id(index, element)?;
                self.engine.mutate(|p| p.delete_element(&id))?;
                Ok("ok".into())
            }
            Step::SetTransform {
                element,
                x,
                y,
                rotation,
                scale,
                expect_error,
            } => {
                let id = self.element_id(index, element)?;
                let t = Transform {
                    x: *x,
                    y: *y,
                    rotation: *rotation,
                    scale: *scale,
                };
                let r = self.engine.mutate(|p| p.set_transform(&id, t));
                expect(index, r, expect_error)
            }
            Step::AddProxy {
                kind,
                points,
                expect_label,
            } => {
                let proxy = self.engine.mutate(|p| p.add_proxy(*kind, points.clone()))?;
                if let Some(label) = expect_label {
                    if &proxy.label != label {
                        return Err(fail(index, format!("expected label {label}, got {}", proxy.label)));
                    }
                }
                Ok(proxy.label)
            }
            Step::DeleteProxy { label } => {
                self.engine.mutate(|p| p.delete_proxy(label))?;
                Ok("ok".into())
            }
            Step::Prompt {
                module,
                text,
                expect_error,
            } => {
                let m = self
                    .engine
                    .read(|p| p.resolve_module(module))
                    .map_err(|e| fail(index, e.to_string()))?;
                let r = self.engine.generate(&m, text);
                expect(index, r, expect_error)
            }
            Step::SetSlider {
                element,
                variable,
                value,
                expect_error,
            } => {
                let id = self.element_id(index, element)?;
                let r = self.engine.mutate(|p| p.apply_slider(&id, variable, *value));
                expect(index, r, expect_error)
            }
            Step::Snapshot { label, path } => {
                let bytes = self.read_file(index, path)?;
                self.snapshots.insert(label.clone(), bytes);
                Ok(format!("snapshot {label}"))
            }
            Step::Assert { check } => {
                self.assertions += 1;
                self.check(index, check)
            }
        }
    }

    fn check(&self, index: usize, check: &Check) -> Result<String> {
        match check {
            Check::FileHash { path, sha256 } => {
                let got = hex::encode(Sha256::digest(self.read_file(index, path)?));
                if !got.eq_ignore_ascii_case(sha256) {
                    return Err(fail(index, format!("{path}: sha256 {got}, expected {sha256}")));
                }
                Ok(format!("{path} hash matches"))
            }
            Check::FileContains { path, text, region } => {
                let content = String::from_utf8_lossy(&self.read_file(index, path)?).into_owned();
                let haystack = match region {
                    None => content.clone(),
                    Some(r) => {
                        let regions = locate_regions(&content).map_err(|e| fail(index, format!("{path}: {e}")))?;
                        let range = match r {
                            RegionName::Variables => regions.variables,
                            RegionName::Functions => regions.functions,
                        };
                        content[range].to_string()
                    }
                };
                if !haystack.contains(text.as_str()) {
                    return Err(fail(index, format!("{path} does not contain {text:?}")));
                }
                Ok(format!("{path} contains {text:?}"))
            }
            Check::FileNotContains { path, text } => {
                let content = String::from_utf8_lossy(&self.read_file(index, path)?).into_owned();
                if content.contains(text.as_str()) {
                    return Err(fail(index, format!("{path} contains {text:?}")));
                }
                Ok(format!("{path} lacks {text:?}"))
            }
            Check::FileMatchesSnapshot { path, label } => {
                let snap = self
                    .snapshots
                    .get(label)
                    .ok_or_else(|| fail(index, format!("no snapshot {label}")))?;
                if &self.read_file(index, path)? != snap {
                    return Err(fail(index, format!("{path} differs from snapshot {label}")));
                }
                Ok(format!("{path} identical to {label}"))
            }
            Check::ManifestValue {
                element,
                variable,
                current,
                min,
                max,
                step,
            } => {
                let id = self.element_id(index, element)?;
                let manifest = self
                    .engine
                    .read(|p| p.slider_manifest(&id))
                    .map_err(|e| fail(index, e.to_string()))?;
                let spec = manifest
                    .iter()
                    .find(|s| &s.variable == variable)
                    .ok_or_else(|| fail(index, format!("{element}.{variable} not in manifest")))?;
                for (what, want, got) in [
                    ("current", current, spec.current),
                    ("min", min, spec.min),
                    ("max", max, spec.max),
                    ("step", step, spec.step),
                ] {
                    if let Some(want) = want {
                        if (want - got).abs() > MANIFEST_TOLERANCE * want.abs().max(1.0) {
                            return Err(fail(
                                index,
                                format!("{element}.{variable} {what} = {got}, expected {want}"),
                            ));
                        }
                    }
                }
                Ok(format!("{element}.{variable} manifest matches"))
            }
            Check::PromptContains { module, text } => {
                let prompt = self
                    .engine
                    .read(|p| {
                        let m = p.resolve_module(module)?;
                        Ok::<_, Error>(
                            p.session(&m)?
                                .messages
                                .iter()
                                .rev()
                                .find(|m| m.role == Role::User)
                                .map(|m| m.sent_text().to_string()),
                        )
                    })
                    .map_err(|e| fail(index, e.to_string()))?
                    .ok_or_else(|| fail(index, format!("{module} has no prompt yet")))?;
                if !prompt.contains(text.as_str()) {
                    return Err(fail(index, format!("last {module} prompt lacks {text:?}")));
                }
                Ok(format!("{module} prompt contains {text:?}"))
            }
            Check::CallResolves { function, element } => {
                let id = self.element_id(index, element)?;
                match self.engine.read(|p| p.central_call_resolves(function)) {
                    Some(found) if found == id => Ok(format!("{function} resolves to {element}")),
                    other => Err(fail(
                        index,
                        format!("{function} resolves to {other:?}, expected {element}"),
                    )),
                }
            }
            Check::Exchanges { module, count } => {
                let got = self
                    .engine
                    .read(|p| p.resolve_module(module).and_then(|m| Ok(p.session(&m)?.exchanges())))
                    .map_err(|e| fail(index, e.to_string()))?;
                if got != *count {
                    return Err(fail(index, format!("{module} has {got} exchanges, expected {count}")));
                }
                Ok(format!("{module} has {count} exchanges"))
            }
        }
    }
}

fn op_name(step: &Step) -> String {
    let v = serde_json::to_value(step).expect("steps serialize");
    v["op"].as_str().unwrap_or("?").to_string()
}

/// Replays a scenario into `project_dir`, which must not exist or be empty.
/// The summary/code coherence invariant is checked after every step.
pub fn replay(
    scenario_dir: &Path,
    project_dir: &Path,
    backend: Arc<dyn LlmBackend>,
) -> Result<ReplayReport> {
    let scenario = load_scenario(scenario_dir)?;
    if project_dir.exists()
        && std::fs::read_dir(project_dir)
            .map_err(|e| Error::io(project_dir, e))?
            .next()
            .is_some()
    {
        return Err(Error::Scenario(format!(
            "{} is not empty",
            project_dir.display()
        )));
    }
    let clock = Arc::new(LogicalClock::default());
    let project = Project::new(
        &scenario.project.name,
        scenario.project.framework,
        crate::engine::Clock::now_ms(clock.as_ref()),
    );
    store::save(&project, project_dir)?;
    let engine = Engine::new(project, backend)
        .with_store(project_dir)
        .with_clock(clock);
    let mut runner = Runner {
        scenario_dir,
        project_dir: project_dir.to_path_buf(),
        engine,
        snapshots: BTreeMap::new(),
        assertions: 0,
    };
    let mut steps = Vec::with_capacity(scenario.steps.len());
    for (index, step) in scenario.steps.iter().enumerate() {
        let detail = runner.run_step(index, step).map_err(|e| match e {
            Error::AssertionFailed { .. } => e,
            other => fail(index, format!("{}: {other}", other.code())),
        })?;
        let mismatches = runner.engine.read(Project::coherence_mismatches);
        if !mismatches.is_empty() {
            return Err(fail(index, format!("context incoherent: {}", mismatches.join("; "))));
        }
        steps.push(StepOutcome {
            index,
            op: op_name(step),
            detail,
        });
    }
    Ok(ReplayReport {
        scenario: scenario.name,
        steps,
        assertions: runner.assertions,
        tree_digest: runner.engine.read(tree_digest),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn step_json_shape() {
        let s: Step = serde_json::from_str(
            r#"{"op": "assert", "check": {"kind": "manifest-value", "element": "Fish", "variable": "speed", "max": 400}}"#,
        )
        .unwrap();
        assert_eq!(op_name(&s), "assert");
        let s: Step = serde_json::from_str(
            r#"{"op": "add-proxy", "kind": "point", "points": [[100, 200]], "expect_label": "P1"}"#,
        )
        .unwrap();
        assert!(matches!(s, Step::AddProxy { ref points, .. } if points[0] == Point::new(100.0, 200.0)));
    }

    #[test]
    fn replay_refuses_non_empty_target() {
        let scen = tempfile::tempdir().unwrap();
        std::fs::write(
            scen.path().join(SCENARIO_FILE),
            r#"{"name": "n", "project": {"name": "p"}, "steps": []}"#,
        )
        .unwrap();
        let target = tempfile::tempdir().unwrap();
        std::fs::write(target.path().join("x"), "").unwrap();
        let err = replay(scen.path(), target.path(), Arc::new(MockBackend::new())).unwrap_err();
        assert_eq!(err.code(), "scenario-error");
        let fresh = target.path().join("fresh");
        let report = replay(scen.path(), &fresh, Arc::new(MockBackend::new())).unwrap();
        assert!(report.steps.is_empty());
        assert!(fresh.join("project.json").exists());
    }
}
