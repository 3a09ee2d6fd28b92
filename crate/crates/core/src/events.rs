//! Engine events, published in commit order.

use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use crate::context::DiffReport;
use crate::prompt::FrameworkId;
use crate::scene::{Element, ElementId, GraphicalProxy, Transform};
use crate::session::ModuleId;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", content = "payload", rename_all = "kebab-case")]
pub enum EngineEvent {
    ElementCreated {
        element: Element,
    },
    ElementDeleted {
        element: ElementId,
        name: String,
    },
    ElementRestored {
        element: Element,
    },
    TransformChanged {
        element: ElementId,
        transform: Transform,
    },
    GroupChanged {
        group: ElementId,
        members: Vec<ElementId>,
    },
    ProxyAdded {
        proxy: GraphicalProxy,
    },
    ProxyDeleted {
        label: String,
    },
    FrameworkSelected {
        framework: FrameworkId,
    },
    GenerationStarted {
        module: ModuleId,
    },
    GenerationComplete {
        module: ModuleId,
        diffs: Vec<DiffReport>,
    },
    GenerationFailed {
        module: ModuleId,
        code: String,
        message: String,
    },
    SliderChanged {
        element: ElementId,
        variable: String,
        value: f64,
    },
    CodeRepaired {
        element: ElementId,
        inserted: Vec<String>,
    },
    InsertionConflict {
        element: ElementId,
        member: String,
    },
    UnresolvedReference {
        names: Vec<String>,
    },
}

impl EngineEvent {
    pub fn kind(&self) -> &'static str {
        match self {
            EngineEvent::ElementCreated { .. } => "element-created",
            EngineEvent::ElementDeleted { .. } => "element-deleted",
            EngineEvent::ElementRestored { .. } => "element-restored",
            EngineEvent::TransformChanged { .. } => "transform-changed",
            EngineEvent::GroupChanged { .. } => "group-changed",
            EngineEvent::ProxyAdded { .. } => "proxy-added",
            EngineEvent::ProxyDeleted { .. } => "proxy-deleted",
            EngineEvent::FrameworkSelected { .. } => "framework-selected",
            EngineEvent::GenerationStarted { .. } => "generation-started",
            EngineEvent::GenerationComplete { .. } => "generation-complete",
            EngineEvent::GenerationFailed { .. } => "generation-failed",
            EngineEvent::SliderChanged { .. } => "slider-changed",
            EngineEvent::CodeRepaired { .. } => "code-repaired",
            EngineEvent::InsertionConflict { .. } => "insertion-conflict",
            EngineEvent::UnresolvedReference { .. } => "unresolved-reference",
        }
    }

    /// Warnings report something the engine worked around.
    pub fn is_warning(&self) -> bool {
        matches!(
            self,
            EngineEvent::CodeRepaired { .. }
                | EngineEvent::InsertionConflict { .. }
                | EngineEvent::UnresolvedReference { .. }
        )
    }
}

/// An event with its position in the engine's commit order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventRecord {
    pub seq: u64,
    #[serde(flatten)]
    pub event: EngineEvent,
}

pub trait EventSink: Send + Sync {
    fn publish(&self, record: &EventRecord);
}

/// Sink that keeps every record, for tests and replay.
#[derive(Debug, Default)]
pub struct CollectingSink {
    records: Mutex<Vec<EventRecord>>,
}

impl CollectingSink {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn records(&self) -> Vec<EventRecord> {
        self.records.lock().unwrap().clone()
    }
}

impl EventSink for CollectingSink {
    fn publish(&self, record: &EventRecord) {
        self.records.lock().unwrap().push(record.clone());
    }
}
