//! Module registry: one conversation session per element plus the central
//! module, and prompt routing between them.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::scene::ElementId;

/// Default number of messages sent per generation request (system message
/// included).
pub const DEFAULT_HISTORY_CAP: usize = 40;

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ModuleId {
    Central,
    Element(ElementId),
}

impl ModuleId {
    pub fn element(id: &ElementId) -> Self {
        ModuleId::Element(id.clone())
    }

    pub fn is_central(&self) -> bool {
        matches!(self, ModuleId::Central)
    }

    pub fn element_id(&self) -> Option<&ElementId> {
        match self {
            ModuleId::Central => None,
            ModuleId::Element(id) => Some(id),
        }
    }
}

impl fmt::Display for ModuleId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ModuleId::Central => f.write_str("central"),
            ModuleId::Element(id) => f.write_str(id.as_str()),
        }
    }
}

impl FromStr for ModuleId {
    type Err = std::convert::Infallible;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        Ok(if s == "central" {
            ModuleId::Central
        } else {
            ModuleId::Element(ElementId::new(s))
        })
    }
}

impl Serialize for ModuleId {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for ModuleId {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        Ok(s.parse().unwrap_or_else(|never: std::convert::Infallible| match never {}))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    System,
    User,
    Assistant,
}

/// One transcript entry. For user turns `content` is what the user typed and
/// `prompt` is the fully assembled text that was actually sent to the model.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Message {
    pub role: Role,
    pub content: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prompt: Option<String>,
}

impl Message {
    pub fn new(role: Role, content: impl Into<String>) -> Self {
        Message {
            role,
            content: content.into(),
            prompt: None,
        }
    }

    /// Text the model saw for this message.
    pub fn sent_text(&self) -> &str {
        self.prompt.as_deref().unwrap_or(&self.content)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModuleSession {
    pub module: ModuleId,
    pub messages: Vec<Message>,
    pub created_at_ms: u64,
}

impl ModuleSession {
    /// Number of completed user/assistant exchanges.
    pub fn exchanges(&self) -> usize {
        self.messages
            .iter()
            .filter(|m| m.role == Role::Assistant)
            .count()
    }

    pub fn last_prompt(&self) -> Option<&Message> {
        self.messages.iter().rev().find(|m| m.role == Role::User)
    }

    /// The request message list for a new user turn: system message, then
    /// the most recent history, then `next_prompt`, at most `cap` messages in
    /// total. Oldest turns are dropped first; the window never starts with an
    /// assistant turn.
    pub fn request_window(&self, next_prompt: &str, cap: usize) -> Vec<(Role, String)> {
        let cap = cap.max(2);
        let (system, history) = self
            .messages
            .split_first()
            .expect("sessions always start with a system message");
        let keep = cap - 2;
        let mut start = history.len().saturating_sub(keep);
        while start < history.len() && history[start].role != Role::User {
            start += 1;
        }
        let mut out = Vec::with_capacity(cap);
        out.push((system.role, system.content.clone()));
        out.extend(
            history[start..]
                .iter()
                .map(|m| (m.role, m.sent_text().to_string())),
        );
        out.push((Role::User, next_prompt.to_string()));
        out
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ModuleRegistry {
    sessions: BTreeMap<ModuleId, ModuleSession>,
    /// Sessions of deleted elements, kept in memory so deletion can be undone.
    archived: BTreeMap<ElementId, ModuleSession>,
}

impl ModuleRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    pub(crate) fn from_sessions(sessions: impl IntoIterator<Item = ModuleSession>) -> Self {
        ModuleRegistry {
            sessions: sessions
                .into_iter()
                .map(|s| (s.module.clone(), s))
                .collect(),
            archived: BTreeMap::new(),
        }
    }

    pub fn sessions(&self) -> impl Iterator<Item = &ModuleSession> {
        self.sessions.values()
    }

    pub fn len(&self) -> usize {
        self.sessions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sessions.is_empty()
    }

    pub fn session(&self, m: &ModuleId) -> Result<&ModuleSession> {
        self.sessions
            .get(m)
            .ok_or_else(|| Error::UnknownModule(m.to_string()))
    }

    /// Opens a session whose first message is `system_message`. Existence of
    /// the backing element is the caller's concern.
    pub fn open(
        &mut self,
        m: ModuleId,
        system_message: String,
        now_ms: u64,
    ) -> Result<&ModuleSession> {
        if self.sessions.contains_key(&m) {
            return Err(Error::DuplicateSession(m.to_string()));
        }
        let session = ModuleSession {
            module: m.clone(),
            messages: vec![Message::new(Role::System, system_message)],
            created_at_ms: now_ms,
        };
        Ok(self.sessions.entry(m).or_insert(session))
    }

    /// Resolves which session receives a generation request. The text is not
    /// inspected: pronouns in element prompts resolve through the dedicated
    /// session itself.
    pub fn route(&self, selection: &ModuleId, _text: &str) -> Result<ModuleId> {
        self.session(selection).map(|s| s.module.clone())
    }

    pub fn append_exchange(
        &mut self,
        m: &ModuleId,
        user: &str,
        prompt: Option<String>,
        assistant: &str,
    ) -> Result<&ModuleSession> {
        let session = self
            .sessions
            .get_mut(m)
            .ok_or_else(|| Error::UnknownModule(m.to_string()))?;
        session.messages.push(Message {
            role: Role::User,
            content: user.to_string(),
            prompt,
        });
        session
            .messages
            .push(Message::new(Role::Assistant, assistant));
        Ok(session)
    }

    /// Replaces the system message of a session that has no exchanges yet.
    pub(crate) fn reset_system_message(&mut self, m: &ModuleId, system_message: String) -> bool {
        match self.sessions.get_mut(m) {
            Some(s) if s.messages.len() == 1 => {
                s.messages[0].content = system_message;
                true
            }
            _ => false,
        }
    }

    pub(crate) fn archive(&mut self, id: &ElementId) -> Option<()> {
        let session = self.sessions.remove(&ModuleId::element(id))?;
        self.archived.insert(id.clone(), session);
        Some(())
    }

    pub(crate) fn unarchive(&mut self, id: &ElementId) -> bool {
        match self.archived.remove(id) {
            Some(s) => {
                self.sessions.insert(ModuleId::element(id), s);
                true
            }
            None => false,
        }
    }

    pub fn archived(&self, id: &ElementId) -> Option<&ModuleSession> {
        self.archived.get(id)
    }
}
