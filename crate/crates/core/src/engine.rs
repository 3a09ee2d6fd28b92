//! Thread-safe engine. One writer commits project changes and saves them;
//! generations are serialized per module.

use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex, RwLock};
use std::time::{SystemTime, UNIX_EPOCH};

use crate::error::{Error, Result};
use crate::events::{EngineEvent, EventRecord, EventSink};
use crate::llm::LlmBackend;
use crate::project::{GenerationReport, GenerationSettings, Project};
use crate::prompt::FrameworkKeywords;
use crate::session::ModuleId;
use crate::store;

pub trait Clock: Send + Sync {
    fn now_ms(&self) -> u64;
}

#[derive(Debug, Default)]
pub struct SystemClock;

impl Clock for SystemClock {
    fn now_ms(&self) -> u64 {
        SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_millis() as u64)
            .unwrap_or(0)
    }
}

/// Clock that ticks by one on every reading, for reproducible runs.
#[derive(Debug, Default)]
pub struct LogicalClock(AtomicU64);

impl Clock for LogicalClock {
    fn now_ms(&self) -> u64 {
        self.0.fetch_add(1, Ordering::SeqCst)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EngineConfig {
    pub generation: GenerationSettings,
    pub keywords: FrameworkKeywords,
}

impl Default for EngineConfig {
    fn default() -> Self {
        EngineConfig {
            generation: GenerationSettings::default(),
            keywords: FrameworkKeywords::default(),
        }
    }
}

struct State {
    project: Project,
    next_seq: u64,
}

pub struct Engine {
    state: RwLock<State>,
    backend: Arc<dyn LlmBackend>,
    config: EngineConfig,
    store: Option<PathBuf>,
    clock: Arc<dyn Clock>,
    sinks: RwLock<Vec<Arc<dyn EventSink>>>,
    module_locks: Mutex<HashMap<ModuleId, Arc<Mutex<()>>>>,
    /// Central generation reads the whole context and may write into any
    /// element, so it excludes element generations; those may overlap.
    context_gate: RwLock<()>,
}

enum Gate<'a> {
    Shared(#[allow(dead_code)] std::sync::RwLockReadGuard<'a, ()>),
    Exclusive(#[allow(dead_code)] std::sync::RwLockWriteGuard<'a, ()>),
}

impl Engine {
    pub fn new(project: Project, backend: Arc<dyn LlmBackend>) -> Self {
        Engine {
            state: RwLock::new(State {
                project,
                next_seq: 1,
            }),
            backend,
            config: EngineConfig::default(),
            store: None,
            clock: Arc::new(SystemClock),
            sinks: RwLock::new(Vec::new()),
            module_locks: Mutex::new(HashMap::new()),
            context_gate: RwLock::new(()),
        }
    }

    /// Saves to `dir` after every committed mutation.
    pub fn with_store(mut self, dir: impl Into<PathBuf>) -> Self {
        self.store = Some(dir.into());
        self
    }

    pub fn with_config(mut self, config: EngineConfig) -> Self {
        self.config = config;
        self
    }

    pub fn with_clock(mut self, clock: Arc<dyn Clock>) -> Self {
        self.clock = clock;
        self
    }

    pub fn config(&self) -> &EngineConfig {
        &self.config
    }

    pub fn store_dir(&self) -> Option<&Path> {
        self.store.as_deref()
    }

    pub fn backend_name(&self) -> &'static str {
        self.backend.name()
    }

    pub fn now_ms(&self) -> u64 {
        self.clock.now_ms()
    }

    pub fn subscribe(&self, sink: Arc<dyn EventSink>) {
        self.sinks.write().unwrap().push(sink);
    }

    /// Runs `f` against the committed state.
    pub fn read<T>(&self, f: impl FnOnce(&Project) -> T) -> T {
        f(&self.state.read().unwrap().project)
    }

    pub fn snapshot(&self) -> Project {
        self.read(Project::clone)
    }

    fn publish(&self, state: &mut State, events: Vec<EngineEvent>) {
        let sinks = self.sinks.read().unwrap();
        for event in events {
            let record = EventRecord {
                seq: state.next_seq,
                event,
            };
            state.next_seq += 1;
            for sink in sinks.iter() {
                sink.publish(&record);
            }
        }
    }

    /// Applies `f` to a copy of the project and commits it only if `f`
    /// succeeds and the copy was saved. Events are published in commit order.
    pub fn mutate<T>(&self, f: impl FnOnce(&mut Project) -> Result<T>) -> Result<T> {
        let mut state = self.state.write().unwrap();
        let mut draft = state.project.clone();
        let value = f(&mut draft)?;
        let events = draft.drain_events();
        if let Some(dir) = &self.store {
            store::save(&draft, dir)?;
        }
        state.project = draft;
        self.publish(&mut state, events);
        Ok(value)
    }

    /// Publishes an event without changing state.
    pub fn emit(&self, event: EngineEvent) {
        let mut state = self.state.write().unwrap();
        self.publish(&mut state, vec![event]);
    }

    fn module_lock(&self, m: &ModuleId) -> Arc<Mutex<()>> {
        self.module_locks
            .lock()
            .unwrap()
            .entry(m.clone())
            .or_default()
            .clone()
    }

    /// Sends `text` to a module and merges the reply. The first central
    /// prompt also selects the framework. The backend is called without
    /// holding the state lock.
    pub fn generate(&self, module: &ModuleId, text: &str) -> Result<GenerationReport> {
        let module = self.read(|p| p.registry().route(module, text))?;
        let lock = self.module_lock(&module);
        let _serial = lock.lock().unwrap();
        let _gate = if module.is_central() {
            Gate::Exclusive(self.context_gate.write().unwrap())
        } else {
            Gate::Shared(self.context_gate.read().unwrap())
        };
        // Selection commits together with the merge, so a failed first
        // central prompt leaves the framework open.
        let select = module.is_central() && self.read(|p| p.framework().is_none());
        let keywords = &self.config.keywords;
        let plan = self.read(|p| {
            if select {
                let mut draft = p.clone();
                draft.select_framework(text, keywords)?;
                draft.plan_generation(&module, text, &self.config.generation)
            } else {
                p.plan_generation(&module, text, &self.config.generation)
            }
        })?;
        self.emit(EngineEvent::GenerationStarted {
            module: module.clone(),
        });
        let outcome = self
            .backend
            .complete(&plan.call, &plan.request)
            .map_err(Error::from)
            .and_then(|raw| {
                self.mutate(|p| {
                    if select && p.framework().is_none() {
                        p.select_framework(text, keywords)?;
                    }
                    p.complete_generation(&plan, &raw)
                })
            });
        if let Err(e) = &outcome {
            self.emit(EngineEvent::GenerationFailed {
                module: module.clone(),
                code: e.code().to_string(),
                message: e.to_string(),
            });
        }
        outcome
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::events::CollectingSink;
    use crate::llm::MockBackend;
    use crate::prompt::FrameworkId;
    use crate::scene::ElementKind;

    fn reply(name: &str, extra: &str) -> String {
        let body = crate::code::template::element_template(FrameworkId::P5js, name)
            .replace("    this.scale = 1;\n", &format!("    this.scale = 1;\n{extra}"));
        format!("```code\n{body}```\n```summary\n{{\"class_name\": \"{name}\"}}\n```\n")
    }

    #[test]
    fn generation_commits_and_publishes_in_order() {
        let mock = MockBackend::new().with_fixture("Sun", 0, reply("Sun", "    this.glow = 3;\n"));
        let engine = Engine::new(Project::new("t", Some(FrameworkId::P5js), 0), Arc::new(mock));
        let sink = Arc::new(CollectingSink::new());
        engine.subscribe(sink.clone());
        let el = engine
            .mutate(|p| p.create_element("Sun", ElementKind::LlmGenerated, None, 0))
            .unwrap();
        engine.generate(&ModuleId::element(&el.id), "it glows").unwrap();
        let kinds: Vec<&str> = sink.records().iter().map(|r| r.event.kind()).collect();
        assert_eq!(kinds, ["element-created", "generation-started", "generation-complete"]);
        let seqs: Vec<u64> = sink.records().iter().map(|r| r.seq).collect();
        assert_eq!(seqs, [1, 2, 3]);
        assert!(engine.read(|p| p.element_code(&el.id).unwrap().contains("this.glow = 3;")));
    }

    #[test]
    fn failed_generation_leaves_state_untouched() {
        let mock = MockBackend::new().with_fixture("Sun", 0, "no code at all");
        let engine = Engine::new(Project::new("t", Some(FrameworkId::P5js), 0), Arc::new(mock));
        let el = engine
            .mutate(|p| p.create_element("Sun", ElementKind::LlmGenerated, None, 0))
            .unwrap();
        let before = engine.snapshot();
        let err = engine.generate(&ModuleId::element(&el.id), "x").unwrap_err();
        assert_eq!(err.code(), "missing-code-block");
        assert_eq!(engine.snapshot(), before);
        let err = engine.generate(&ModuleId::element(&el.id), "x").unwrap_err();
        assert_eq!(err.code(), "fixture-exhausted");
    }

    #[test]
    fn failed_first_central_prompt_leaves_framework_open() {
        let engine = Engine::new(Project::new("t", None, 0), Arc::new(MockBackend::new()));
        let err = engine.generate(&ModuleId::Central, "a platform game").unwrap_err();
        assert_eq!(err.code(), "fixture-exhausted");
        assert_eq!(engine.read(|p| p.framework()), None);
        assert_eq!(engine.read(|p| p.session(&ModuleId::Central).unwrap().exchanges()), 0);
    }
}
