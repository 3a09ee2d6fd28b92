//! The project aggregate. Holds everything that gets persisted and
//! implements every state-changing operation of the engine.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::code::bundle::{build_bundle, Bundle, BundleInput};
use crate::code::merge::{self, reconcile, ElementLedger};
use crate::code::response::{parse_response, InsertionBlocks, SummaryPayload};
use crate::code::template::{central_template, element_template};
use crate::code::unit::{read_transform, sync_transform_text, CodeUnit};
use crate::code::js;
use crate::context::{ClassSummary, ContextRepository, DiffReport, SummaryDelta};
use crate::error::{Error, Result};
use crate::events::EngineEvent;
use crate::llm::{ChatMessage, CompletionRequest, ModuleCall, DEFAULT_MODEL, DEFAULT_TEMPERATURE};
use crate::params::{self, SliderSpec};
use crate::prompt::{self, FrameworkId, FrameworkKeywords};
use crate::scene::{
    AssetRef, Element, ElementId, ElementKind, GraphicalProxy, Point, ProxyKind, SceneModel,
    Transform,
};
use crate::session::{ModuleId, ModuleRegistry, ModuleSession, DEFAULT_HISTORY_CAP};

/// Templates are instantiated for this framework until one is selected.
pub const PROVISIONAL_FRAMEWORK: FrameworkId = FrameworkId::P5js;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ProjectMeta {
    pub name: String,
    pub framework: Option<FrameworkId>,
    /// Set once the central module has produced code; until then the
    /// central script is regenerated from the element list.
    pub central_generated: bool,
    pub insertion_ledger: BTreeMap<ElementId, ElementLedger>,
    /// Per element, the value each slider range was computed from.
    pub slider_anchors: BTreeMap<ElementId, BTreeMap<String, f64>>,
}

/// An uploaded or sketched image.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AssetUpload {
    pub file_name: String,
    pub media_type: String,
    pub bytes: Vec<u8>,
}

#[derive(Debug, Clone)]
struct Archived {
    element: Element,
    summary: Option<ClassSummary>,
    body: String,
    ledger: Option<ElementLedger>,
    anchors: Option<BTreeMap<String, f64>>,
    asset: Option<Vec<u8>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GenerationSettings {
    pub model: String,
    pub temperature: f64,
    pub history_cap: usize,
}

impl Default for GenerationSettings {
    fn default() -> Self {
        GenerationSettings {
            model: DEFAULT_MODEL.to_string(),
            temperature: DEFAULT_TEMPERATURE,
            history_cap: DEFAULT_HISTORY_CAP,
        }
    }
}

impl GenerationSettings {
    /// Defaults, with the model taken from `ENGINE_LLM_MODEL` when set.
    pub fn from_env() -> Self {
        let mut s = Self::default();
        if let Ok(model) = std::env::var("ENGINE_LLM_MODEL") {
            if !model.trim().is_empty() {
                s.model = model.trim().to_string();
            }
        }
        s
    }
}

/// Everything needed to call the backend for one prompt and to merge the
/// answer afterwards.
#[derive(Debug, Clone, PartialEq)]
pub struct GenerationPlan {
    pub module: ModuleId,
    pub user_text: String,
    pub prompt: String,
    pub call: ModuleCall,
    pub request: CompletionRequest,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationReport {
    pub module: ModuleId,
    pub diffs: Vec<DiffReport>,
    pub warnings: Vec<EngineEvent>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SliderOutcome {
    pub element: ElementId,
    pub variable: String,
    pub literal: String,
    pub changed: bool,
}

#[derive(Debug, Clone)]
pub struct Project {
    pub(crate) meta: ProjectMeta,
    pub(crate) scene: SceneModel,
    pub(crate) registry: ModuleRegistry,
    pub(crate) context: ContextRepository,
    pub(crate) central: String,
    pub(crate) code: BTreeMap<ElementId, String>,
    /// Asset bytes keyed by path under `assets/`.
    pub(crate) assets: BTreeMap<String, Vec<u8>>,
    archived: BTreeMap<ElementId, Archived>,
    outbox: Vec<EngineEvent>,
}

/// Equality of persisted state; undo archives and pending events are
/// ignored.
impl PartialEq for Project {
    fn eq(&self, other: &Self) -> bool {
        self.meta == other.meta
            && self.scene == other.scene
            && self.registry.sessions().eq(other.registry.sessions())
            && self.context == other.context
            && self.central == other.central
            && self.code == other.code
            && self.assets == other.assets
    }
}

fn asset_extension(upload: &AssetUpload) -> String {
    let from_name = std::path::Path::new(&upload.file_name)
        .extension()
        .and_then(|e| e.to_str())
        .map(|e| e.to_ascii_lowercase())
        .filter(|e| !e.is_empty() && e.len() <= 8 && e.chars().all(|c| c.is_ascii_alphanumeric()));
    from_name.unwrap_or_else(|| {
        match upload.media_type.as_str() {
            "image/png" => "png",
            "image/jpeg" => "jpg",
            "image/gif" => "gif",
            "image/webp" => "webp",
            "image/svg+xml" => "svg",
            _ => "bin",
        }
        .to_string()
    })
}

impl Project {
    pub fn new(name: &str, framework: Option<FrameworkId>, now_ms: u64) -> Self {
        let mut registry = ModuleRegistry::new();
        registry
            .open(ModuleId::Central, prompt::central_system_message(), now_ms)
            .expect("fresh registry");
        let fw = framework.unwrap_or(PROVISIONAL_FRAMEWORK);
        Project {
            meta: ProjectMeta {
                name: name.to_string(),
                framework,
                ..Default::default()
            },
            scene: SceneModel::new(),
            registry,
            context: ContextRepository::new(),
            central: central_template(fw, &[]),
            code: BTreeMap::new(),
            assets: BTreeMap::new(),
            archived: BTreeMap::new(),
            outbox: Vec::new(),
        }
    }

    #[allow(clippy::too_many_arguments)]
    pub(crate) fn from_parts(
        meta: ProjectMeta,
        scene: SceneModel,
        registry: ModuleRegistry,
        context: ContextRepository,
        central: String,
        code: BTreeMap<ElementId, String>,
        assets: BTreeMap<String, Vec<u8>>,
    ) -> Self {
        Project {
            meta,
            scene,
            registry,
            context,
            central,
            code,
            assets,
            archived: BTreeMap::new(),
            outbox: Vec::new(),
        }
    }

    pub fn name(&self) -> &str {
        &self.meta.name
    }

    pub fn meta(&self) -> &ProjectMeta {
        &self.meta
    }

    pub fn framework(&self) -> Option<FrameworkId> {
        self.meta.framework
    }

    fn effective_framework(&self) -> FrameworkId {
        self.meta.framework.unwrap_or(PROVISIONAL_FRAMEWORK)
    }

    pub fn scene(&self) -> &SceneModel {
        &self.scene
    }

    pub fn registry(&self) -> &ModuleRegistry {
        &self.registry
    }

    pub fn context(&self) -> &ContextRepository {
        &self.context
    }

    pub fn assets(&self) -> &BTreeMap<String, Vec<u8>> {
        &self.assets
    }

    pub fn central_code(&self) -> &str {
        &self.central
    }

    pub fn element_code(&self, id: &ElementId) -> Result<&str> {
        self.code
            .get(id)
            .map(String::as_str)
            .ok_or_else(|| Error::UnknownElement(id.to_string()))
    }

    pub fn code_unit(&self, module: &ModuleId) -> Result<CodeUnit> {
        match module {
            ModuleId::Central => Ok(CodeUnit::new(ModuleId::Central, self.central.clone())),
            ModuleId::Element(id) => Ok(CodeUnit::new(module.clone(), self.element_code(id)?)),
        }
    }

    pub fn session(&self, module: &ModuleId) -> Result<&ModuleSession> {
        self.registry.session(module)
    }

    /// Accepts `central`, an element id or an element name.
    pub fn resolve_module(&self, s: &str) -> Result<ModuleId> {
        if s == "central" {
            return Ok(ModuleId::Central);
        }
        self.scene
            .resolve(s)
            .map(|e| ModuleId::Element(e.id.clone()))
            .map_err(|_| Error::UnknownModule(s.to_string()))
    }

    pub fn resolve_element(&self, s: &str) -> Result<&Element> {
        self.scene.resolve(s)
    }

    /// Events produced since the last drain, in order.
    pub fn drain_events(&mut self) -> Vec<EngineEvent> {
        std::mem::take(&mut self.outbox)
    }

    pub(crate) fn push_event(&mut self, event: EngineEvent) {
        self.outbox.push(event);
    }

    fn element_names(&self) -> Vec<&str> {
        self.scene.elements().map(|e| e.name.as_str()).collect()
    }

    fn regenerate_central_if_automatic(&mut self) {
        if !self.meta.central_generated {
            self.central = central_template(self.effective_framework(), &self.element_names());
        }
    }

    fn refresh_anchors(&mut self, id: &ElementId) {
        let Some(body) = self.code.get(id) else {
            return;
        };
        let Ok(regions) = crate::code::unit::locate_regions(body) else {
            return;
        };
        let anchors: BTreeMap<String, f64> = params::numeric_variables(&body[regions.variables])
            .into_iter()
            .map(|(name, _, v)| (name, v))
            .collect();
        if anchors.is_empty() {
            self.meta.slider_anchors.remove(id);
        } else {
            self.meta.slider_anchors.insert(id.clone(), anchors);
        }
    }

    fn resync_summary(&mut self, id: &ElementId, reported: Option<&SummaryPayload>) -> Result<DiffReport> {
        let name = self.scene.element(id)?.name.clone();
        let body = self.element_code(id)?;
        let next = reconcile(id, &name, body, self.context.summary(id), reported);
        self.context.upsert(next, &name)
    }

    // ---- scene operations ----

    pub fn create_element(
        &mut self,
        name: &str,
        kind: ElementKind,
        upload: Option<AssetUpload>,
        now_ms: u64,
    ) -> Result<Element> {
        let asset = upload.as_ref().map(|u| AssetRef {
            path: format!("{name}.{}", asset_extension(u)),
            media_type: u.media_type.clone(),
        });
        let element = self.scene.create_element(name, kind, asset)?;
        if let (Some(upload), Some(asset)) = (upload, &element.asset) {
            self.assets.insert(asset.path.clone(), upload.bytes);
        }
        let fw = self.effective_framework();
        let body = element_template(fw, name);
        let module = ModuleId::element(&element.id);
        self.registry
            .open(module, prompt::element_system_message(fw, name, &body), now_ms)?;
        self.code.insert(element.id.clone(), body);
        self.resync_summary(&element.id, None)?;
        self.refresh_anchors(&element.id);
        self.regenerate_central_if_automatic();
        self.push_event(EngineEvent::ElementCreated {
            element: element.clone(),
        });
        Ok(element)
    }

    pub fn delete_element(&mut self, id: &ElementId) -> Result<Element> {
        let element = self.scene.delete_element(id)?;
        self.registry.archive(id);
        let archived = Archived {
            summary: self.context.remove(id),
            body: self.code.remove(id).unwrap_or_default(),
            ledger: self.meta.insertion_ledger.remove(id),
            anchors: self.meta.slider_anchors.remove(id),
            asset: element
                .asset
                .as_ref()
                .and_then(|a| self.assets.remove(&a.path)),
            element: element.clone(),
        };
        self.archived.insert(id.clone(), archived);
        self.regenerate_central_if_automatic();
        self.push_event(EngineEvent::ElementDeleted {
            element: id.clone(),
            name: element.name.clone(),
        });
        self.warn_unresolved();
        Ok(element)
    }

    /// Undoes a deletion made earlier in this process.
    pub fn restore_element(&mut self, id: &ElementId) -> Result<Element> {
        let archived = self
            .archived
            .get(id)
            .cloned()
            .ok_or_else(|| Error::UnknownElement(id.to_string()))?;
        self.scene.restore_element(archived.element.clone())?;
        self.archived.remove(id);
        self.registry.unarchive(id);
        if let Some(s) = archived.summary {
            let name = s.class_name.clone();
            self.context.upsert(s, &name)?;
        }
        self.code.insert(id.clone(), archived.body);
        if let Some(l) = archived.ledger {
            self.meta.insertion_ledger.insert(id.clone(), l);
        }
        if let Some(a) = archived.anchors {
            self.meta.slider_anchors.insert(id.clone(), a);
        }
        if let (Some(bytes), Some(asset)) = (archived.asset, &archived.element.asset) {
            self.assets.insert(asset.path.clone(), bytes);
        }
        self.regenerate_central_if_automatic();
        let element = self.scene.element(id)?.clone();
        self.push_event(EngineEvent::ElementRestored {
            element: element.clone(),
        });
        Ok(element)
    }

    /// Rewrites the element's transform anchors to `t`. Nothing changes if
    /// the anchors cannot be found.
    pub fn sync_transform(&mut self, id: &ElementId, t: &Transform) -> Result<CodeUnit> {
        let name = self.scene.element(id)?.name.clone();
        let body = sync_transform_text(self.element_code(id)?, t).map_err(|anchor| {
            Error::TransformAnchorMissing {
                element: name.clone(),
                anchor: anchor.to_string(),
            }
        })?;
        self.code.insert(id.clone(), body);
        self.resync_summary(id, None)?;
        self.code_unit(&ModuleId::element(id))
    }

    pub fn set_transform(&mut self, id: &ElementId, t: Transform) -> Result<Element> {
        let t = t.normalized()?;
        self.scene.element(id)?;
        self.sync_transform(id, &t)?;
        let element = self.scene.set_transform(id, t)?;
        self.push_event(EngineEvent::TransformChanged {
            element: id.clone(),
            transform: t,
        });
        Ok(element)
    }

    pub fn set_group_members(&mut self, group: &ElementId, members: Vec<ElementId>) -> Result<()> {
        self.scene.set_group_members(group, members.clone())?;
        self.push_event(EngineEvent::GroupChanged {
            group: group.clone(),
            members,
        });
        Ok(())
    }

    pub fn add_proxy(&mut self, kind: ProxyKind, geometry: Vec<Point>) -> Result<GraphicalProxy> {
        let proxy = self.scene.add_proxy(kind, geometry)?;
        self.push_event(EngineEvent::ProxyAdded {
            proxy: proxy.clone(),
        });
        Ok(proxy)
    }

    pub fn delete_proxy(&mut self, label: &str) -> Result<GraphicalProxy> {
        let proxy = self.scene.delete_proxy(label)?;
        self.push_event(EngineEvent::ProxyDeleted {
            label: proxy.label.clone(),
        });
        Ok(proxy)
    }

    // ---- framework ----

    /// Fixes the framework from a scene description. Elements whose code is
    /// still the untouched provisional template are re-instantiated for the
    /// chosen framework.
    pub fn select_framework(&mut self, description: &str, keywords: &FrameworkKeywords) -> Result<FrameworkId> {
        if let Some(fw) = self.meta.framework {
            return Err(Error::AlreadySelected(fw.to_string()));
        }
        let fw = keywords.select(description);
        self.apply_framework(fw);
        Ok(fw)
    }

    /// Sets the framework explicitly, as `init --framework` does.
    pub fn set_framework(&mut self, fw: FrameworkId) -> Result<()> {
        if let Some(fw) = self.meta.framework {
            return Err(Error::AlreadySelected(fw.to_string()));
        }
        self.apply_framework(fw);
        Ok(())
    }

    fn apply_framework(&mut self, fw: FrameworkId) {
        let old = self.effective_framework();
        self.meta.framework = Some(fw);
        if fw != old {
            let elements: Vec<Element> = self.scene.elements().cloned().collect();
            for el in elements {
                let module = ModuleId::element(&el.id);
                let untouched_session = self
                    .registry
                    .session(&module)
                    .is_ok_and(|s| s.exchanges() == 0);
                let expected = sync_transform_text(&element_template(old, &el.name), &el.transform);
                let untouched_code = expected.as_deref().ok() == self.code.get(&el.id).map(String::as_str);
                if !(untouched_session && untouched_code) {
                    continue;
                }
                let template = element_template(fw, &el.name);
                let body = sync_transform_text(&template, &el.transform).unwrap_or(template.clone());
                self.code.insert(el.id.clone(), body);
                self.registry.reset_system_message(
                    &module,
                    prompt::element_system_message(fw, &el.name, &template),
                );
                let _ = self.resync_summary(&el.id, None);
            }
            self.regenerate_central_if_automatic();
        }
        self.push_event(EngineEvent::FrameworkSelected { framework: fw });
    }

    // ---- generation ----

    pub fn plan_generation(
        &self,
        module: &ModuleId,
        text: &str,
        settings: &GenerationSettings,
    ) -> Result<GenerationPlan> {
        let module = self.registry.route(module, text)?;
        let fw = self.meta.framework.ok_or(Error::FrameworkUnselected)?;
        let expanded = prompt::expand_proxies(text, self.scene.proxies())?;
        let (envelope, key) = match &module {
            ModuleId::Central => (
                prompt::central_envelope(fw, &expanded, &self.central, self.context.compile()),
                "central".to_string(),
            ),
            ModuleId::Element(id) => {
                let name = self.scene.element(id)?.name.clone();
                (
                    prompt::element_envelope(fw, &name, &expanded, self.element_code(id)?),
                    name,
                )
            }
        };
        let rendered = envelope.render();
        let session = self.registry.session(&module)?;
        let messages = session
            .request_window(&rendered, settings.history_cap)
            .into_iter()
            .map(|(role, content)| ChatMessage { role, content })
            .collect();
        Ok(GenerationPlan {
            call: ModuleCall {
                module: key,
                sequence: session.exchanges(),
            },
            request: CompletionRequest {
                messages,
                model: settings.model.clone(),
                temperature: settings.temperature,
            },
            module,
            user_text: text.to_string(),
            prompt: rendered,
        })
    }

    /// Parses and merges a backend reply for `plan`, then records the
    /// exchange in the module's session.
    pub fn complete_generation(&mut self, plan: &GenerationPlan, raw: &str) -> Result<GenerationReport> {
        self.registry.session(&plan.module)?;
        let parsed = parse_response(raw, plan.module.is_central())?;
        let first_event = self.outbox.len();
        let diffs = match &plan.module {
            ModuleId::Element(id) => vec![self.merge_element_code(id, &parsed.code, Some(&parsed.summary))?],
            ModuleId::Central => self.merge_central(&parsed.code, &parsed.insertions, Some(&parsed.summary))?,
        };
        self.registry
            .append_exchange(&plan.module, &plan.user_text, Some(plan.prompt.clone()), raw)?;
        let warnings = self.outbox[first_event..]
            .iter()
            .filter(|e| e.is_warning())
            .cloned()
            .collect();
        self.push_event(EngineEvent::GenerationComplete {
            module: plan.module.clone(),
            diffs: diffs.clone(),
        });
        Ok(GenerationReport {
            module: plan.module.clone(),
            diffs,
            warnings,
        })
    }

    /// Replaces an element's code wholesale with generated code.
    pub fn merge_element_code(
        &mut self,
        id: &ElementId,
        code: &str,
        reported: Option<&SummaryPayload>,
    ) -> Result<DiffReport> {
        let element = self.scene.element(id)?.clone();
        if let Some(r) = reported {
            if !r.class_name.is_empty() && r.class_name != element.name {
                return Err(Error::NameMismatch {
                    expected: element.name.clone(),
                    found: r.class_name.clone(),
                });
            }
        }
        let prepared = merge::prepare_element_code(&element.name, code)?;
        if !prepared.repaired.is_empty() {
            self.push_event(EngineEvent::CodeRepaired {
                element: id.clone(),
                inserted: prepared.repaired.iter().map(|s| s.to_string()).collect(),
            });
        }
        self.code.insert(id.clone(), prepared.body);
        let diff = self.resync_summary(id, reported)?;
        if let Some(t) = read_transform(self.element_code(id)?) {
            if t != element.transform {
                self.scene.set_transform(id, t)?;
                self.push_event(EngineEvent::TransformChanged {
                    element: id.clone(),
                    transform: t,
                });
            }
        }
        self.refresh_anchors(id);
        Ok(diff)
    }

    /// Replaces the central script and applies its insertion blocks to the
    /// addressed element classes.
    pub fn merge_central(
        &mut self,
        code: &str,
        insertions: &BTreeMap<String, InsertionBlocks>,
        reported: Option<&SummaryPayload>,
    ) -> Result<Vec<DiffReport>> {
        let mut targets = Vec::new();
        for class in insertions.keys() {
            let el = self
                .scene
                .element_by_name(class)
                .ok_or_else(|| Error::UnknownElementInDelta(class.clone()))?;
            targets.push(el.id.clone());
        }
        // creation order keeps event order stable
        targets.sort_by_key(|id| self.scene.order().iter().position(|o| o == id));

        let before: BTreeMap<ElementId, Option<ClassSummary>> = targets
            .iter()
            .map(|id| (id.clone(), self.context.summary(id).cloned()))
            .collect();
        let mut deltas = Vec::new();
        for id in &targets {
            let name = self.scene.element(id)?.name.clone();
            let blocks = &insertions[&name];
            let ledger = self.meta.insertion_ledger.entry(id.clone()).or_default();
            let outcome = merge::apply_insertions(&name, &self.code[id], blocks, ledger)?;
            for member in &outcome.conflicts {
                self.outbox.push(EngineEvent::InsertionConflict {
                    element: id.clone(),
                    member: member.clone(),
                });
            }
            self.code.insert(id.clone(), outcome.body);
            if let Some(described) = reported.and_then(|r| r.elements.iter().find(|e| e.class_name == name)) {
                deltas.push(SummaryDelta {
                    element: id.clone(),
                    variables: described.variables.clone(),
                    functions: described.functions.clone(),
                });
            }
        }
        self.context.apply_central_deltas(&deltas)?;
        let mut diffs = Vec::new();
        for id in &targets {
            self.resync_summary(id, None)?;
            self.refresh_anchors(id);
            let after = self.context.summary(id).expect("element has a summary");
            diffs.push(DiffReport::between(before[id].as_ref(), after));
        }
        self.central = code.to_string();
        self.meta.central_generated = true;
        self.warn_unresolved();
        Ok(diffs)
    }

    fn warn_unresolved(&mut self) {
        if !self.meta.central_generated {
            return;
        }
        let names = merge::unresolved_classes(&self.central, &self.element_names());
        if !names.is_empty() {
            self.push_event(EngineEvent::UnresolvedReference { names });
        }
    }

    // ---- sliders ----

    pub fn slider_manifest(&self, id: &ElementId) -> Result<Vec<SliderSpec>> {
        let el = self.scene.element(id)?;
        let empty = BTreeMap::new();
        let anchors = self.meta.slider_anchors.get(id).unwrap_or(&empty);
        params::build_manifest(id, &format!("code/{}.js", el.name), self.element_code(id)?, anchors)
    }

    pub fn apply_slider(&mut self, id: &ElementId, variable: &str, value: f64) -> Result<SliderOutcome> {
        let manifest = self.slider_manifest(id)?;
        if manifest.is_empty() || !manifest.iter().any(|s| s.variable == variable) {
            return Err(Error::UnknownVariable {
                element: self.scene.element(id)?.name.clone(),
                variable: variable.to_string(),
            });
        }
        let (body, literal) = params::apply_slider(&manifest, self.element_code(id)?, variable, value)?;
        let changed = body != self.code[id];
        if changed {
            self.code.insert(id.clone(), body);
            self.context.set_variable_value(id, variable, &literal);
            self.push_event(EngineEvent::SliderChanged {
                element: id.clone(),
                variable: variable.to_string(),
                value: literal.parse().unwrap_or(value),
            });
        }
        Ok(SliderOutcome {
            element: id.clone(),
            variable: variable.to_string(),
            literal,
            changed,
        })
    }

    // ---- export and checks ----

    pub fn export_bundle(&self) -> Result<Bundle> {
        let elements = self
            .scene
            .elements()
            .map(|e| {
                (
                    e.name.as_str(),
                    self.code[&e.id].as_str(),
                    e.asset.as_ref().map(|a| a.path.as_str()),
                )
            })
            .collect();
        build_bundle(&BundleInput {
            title: &self.meta.name,
            framework: self.meta.framework,
            central: &self.central,
            elements,
            assets: &self.assets,
        })
    }

    /// Elements whose summary variable names differ from the names declared
    /// in their variable region. Empty when the context is coherent.
    pub fn coherence_mismatches(&self) -> Vec<String> {
        let mut out = Vec::new();
        for el in self.scene.elements() {
            let Some(summary) = self.context.summary(&el.id) else {
                out.push(format!("{}: no summary", el.name));
                continue;
            };
            let code = CodeUnit::new(ModuleId::element(&el.id), self.code[&el.id].clone());
            let Ok(names) = code.region_variable_names() else {
                out.push(format!("{}: markers invalid", el.name));
                continue;
            };
            let mut in_code: Vec<&str> = names.iter().map(String::as_str).collect();
            in_code.sort_unstable();
            in_code.dedup();
            let mut in_summary = summary.variable_names();
            in_summary.sort_unstable();
            if in_code != in_summary {
                out.push(format!(
                    "{}: code declares {:?}, summary lists {:?}",
                    el.name, in_code, in_summary
                ));
            }
        }
        if self.context.summaries().count() != self.scene.len() {
            out.push("summary count differs from element count".into());
        }
        out
    }

    /// Checks that `function` is called as a method in the central script,
    /// that the context attributes it to an element, and that the element's
    /// function region defines it.
    pub fn central_call_resolves(&self, function: &str) -> Option<ElementId> {
        if !js::mask(&self.central).contains(&format!(".{function}(")) {
            return None;
        }
        let (summary, _) = self.context.resolve_function(function)?;
        let unit = CodeUnit::new(
            ModuleId::element(&summary.element),
            self.code.get(&summary.element)?.clone(),
        );
        js::fn_decls(unit.function_region().ok()?)
            .iter()
            .any(|d| d.name == function)
            .then(|| summary.element.clone())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn png() -> Option<AssetUpload> {
        Some(AssetUpload {
            file_name: "sprite.PNG".into(),
            media_type: "image/png".into(),
            bytes: vec![137, 80, 78, 71],
        })
    }

    #[test]
    fn create_element_wires_every_module() {
        let mut p = Project::new("demo", None, 0);
        let el = p
            .create_element("Mario", ElementKind::UploadedImage, png(), 5)
            .unwrap();
        assert_eq!(el.asset.as_ref().unwrap().path, "Mario.png");
        assert_eq!(p.registry().len(), 2);
        assert!(p.context().summary(&el.id).is_some());
        assert!(p.central_code().contains("new Mario()"));
        assert!(p.coherence_mismatches().is_empty());
        let events = p.drain_events();
        assert_eq!(events.len(), 1);
        assert_eq!(events[0].kind(), "element-created");
    }

    #[test]
    fn framework_selection_retemplates_untouched_elements() {
        let mut p = Project::new("demo", None, 0);
        let el = p.create_element("Mario", ElementKind::LlmGenerated, None, 0).unwrap();
        p.set_transform(&el.id, Transform { x: 10.0, y: 20.0, rotation: 0.0, scale: 1.0 })
            .unwrap();
        let fw = p
            .select_framework("I want to make a platform game", &FrameworkKeywords::default())
            .unwrap();
        assert_eq!(fw, FrameworkId::Phaser);
        let code = p.element_code(&el.id).unwrap();
        assert!(code.contains("this.scene = scene;"));
        assert!(code.contains("this.x = 10;"));
        assert!(p.central_code().contains("new Mario(this)"));
        let sys = &p.session(&ModuleId::element(&el.id)).unwrap().messages[0].content;
        assert!(sys.contains("Phaser"));
        assert_eq!(
            p.select_framework("x", &FrameworkKeywords::default()).unwrap_err().code(),
            "already-selected"
        );
    }

    #[test]
    fn element_prompts_need_a_framework() {
        let mut p = Project::new("demo", None, 0);
        let el = p.create_element("Sun", ElementKind::LlmGenerated, None, 0).unwrap();
        let err = p
            .plan_generation(&ModuleId::element(&el.id), "glow", &GenerationSettings::default())
            .unwrap_err();
        assert_eq!(err.code(), "framework-unselected");
    }

    #[test]
    fn delete_and_restore() {
        let mut p = Project::new("demo", Some(FrameworkId::P5js), 0);
        let el = p.create_element("Sun", ElementKind::UploadedImage, png(), 0).unwrap();
        let snapshot = p.clone();
        p.delete_element(&el.id).unwrap();
        assert!(p.assets().is_empty());
        assert!(!p.central_code().contains("Sun"));
        p.restore_element(&el.id).unwrap();
        assert_eq!(p, snapshot);
    }

    #[test]
    fn set_transform_rejects_missing_anchor_atomically() {
        let mut p = Project::new("demo", Some(FrameworkId::P5js), 0);
        let el = p.create_element("Sun", ElementKind::LlmGenerated, None, 0).unwrap();
        let body = p.element_code(&el.id).unwrap().replace("    this.y = 0;\n", "");
        p.merge_element_code(&el.id, &body, None).unwrap();
        let before = p.clone();
        let err = p
            .set_transform(&el.id, Transform { x: 1.0, y: 2.0, rotation: 0.0, scale: 1.0 })
            .unwrap_err();
        assert_eq!(err.code(), "transform-anchor-missing");
        assert_eq!(p, before);
    }
}
