use std::collections::BTreeMap;
use std::path::Path;
use std::sync::Mutex;

use super::{CompletionRequest, LlmBackend, LlmError, ModuleCall};
use crate::error::{Error, Result};

/// Deterministic backend answering from fixtures keyed by module and
/// per-module index.
///
/// The index used for a call is the larger of the caller's session sequence
/// and the mock's own next index for that module, so a fresh process resumes
/// where a saved session left off while failed calls still advance.
#[derive(Debug, Default)]
pub struct MockBackend {
    fixtures: BTreeMap<(String, usize), String>,
    next: Mutex<BTreeMap<String, usize>>,
    log: Mutex<Vec<(String, usize)>>,
}

impl MockBackend {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_fixture(mut self, module: &str, index: usize, text: impl Into<String>) -> Self {
        self.insert(module, index, text);
        self
    }

    pub fn insert(&mut self, module: &str, index: usize, text: impl Into<String>) {
        self.fixtures.insert((module.to_string(), index), text.into());
    }

    /// Loads every `<module>-<index>.txt` file in `dir`. Other files are
    /// ignored.
    pub fn from_dir(dir: &Path) -> Result<Self> {
        let mut mock = MockBackend::new();
        let entries = std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
        for entry in entries {
            let path = entry.map_err(|e| Error::io(dir, e))?.path();
            let Some(stem) = path
                .extension()
                .filter(|e| *e == "txt")
                .and_then(|_| path.file_stem())
                .and_then(|s| s.to_str())
            else {
                continue;
            };
            let Some((module, index)) = stem.rsplit_once('-') else {
                continue;
            };
            let Ok(index) = index.parse::<usize>() else {
                continue;
            };
            let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
            mock.insert(module, index, text);
        }
        Ok(mock)
    }

    pub fn fixture_count(&self) -> usize {
        self.fixtures.len()
    }

    /// Calls answered so far, as (module, index).
    pub fn calls(&self) -> Vec<(String, usize)> {
        self.log.lock().unwrap().clone()
    }
}

impl LlmBackend for MockBackend {
    fn complete(&self, call: &ModuleCall, req: &CompletionRequest) -> std::result::Result<String, LlmError> {
        req.validate()?;
        let index = {
            let mut next = self.next.lock().unwrap();
            let slot = next.entry(call.module.clone()).or_insert(0);
            let index = (*slot).max(call.sequence);
            *slot = index + 1;
            index
        };
        self.log.lock().unwrap().push((call.module.clone(), index));
        self.fixtures
            .get(&(call.module.clone(), index))
            .cloned()
            .ok_or_else(|| LlmError::FixtureExhausted {
                module: call.module.clone(),
                index,
            })
    }

    fn name(&self) -> &'static str {
        "mock"
    }
}
