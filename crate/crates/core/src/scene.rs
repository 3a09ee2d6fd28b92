//! Structural scene state: elements, their transforms and group membership,
//! and the labeled graphical proxies users draw on the canvas.
//!
//! Nothing here knows about generated code; the project layer wires scene
//! mutations to the rest of the state.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Logical canvas size. All coordinates are in this space, origin top-left,
/// y pointing down.
pub const CANVAS_WIDTH: u32 = 800;
pub const CANVAS_HEIGHT: u32 = 600;

const RESERVED_WORDS: &[&str] = &[
    "await", "break", "case", "catch", "class", "const", "continue", "debugger", "default",
    "delete", "do", "else", "enum", "export", "extends", "false", "finally", "for", "function",
    "if", "implements", "import", "in", "instanceof", "interface", "let", "new", "null",
    "package", "private", "protected", "public", "return", "static", "super", "switch", "this",
    "throw", "true", "try", "typeof", "var", "void", "while", "with", "yield",
];

/// Returns true if `name` can be used as an element (class) name.
///
/// `central` is rejected in any casing because `code/central.js` is the
/// central module's file.
pub fn is_valid_identifier(name: &str) -> bool {
    let mut chars = name.chars();
    let head_ok = chars.next().is_some_and(|c| c.is_ascii_alphabetic());
    head_ok
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
        && !RESERVED_WORDS.contains(&name)
        && !name.eq_ignore_ascii_case("central")
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ElementId(String);

impl ElementId {
    pub fn new(raw: impl Into<String>) -> Self {
        ElementId(raw.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for ElementId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ElementKind {
    UploadedImage,
    DrawnSketch,
    LlmGenerated,
    Group,
}

impl ElementKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ElementKind::UploadedImage => "uploaded-image",
            ElementKind::DrawnSketch => "drawn-sketch",
            ElementKind::LlmGenerated => "llm-generated",
            ElementKind::Group => "group",
        }
    }
}

impl std::str::FromStr for ElementKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "uploaded-image" => Ok(ElementKind::UploadedImage),
            "drawn-sketch" => Ok(ElementKind::DrawnSketch),
            "llm-generated" => Ok(ElementKind::LlmGenerated),
            "group" => Ok(ElementKind::Group),
            other => Err(format!("unknown element kind `{other}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Transform {
    pub x: f64,
    pub y: f64,
    /// Degrees, normalized to [0, 360).
    pub rotation: f64,
    pub scale: f64,
}

impl Default for Transform {
    fn default() -> Self {
        Transform::IDENTITY
    }
}

impl Transform {
    pub const IDENTITY: Transform = Transform {
        x: 0.0,
        y: 0.0,
        rotation: 0.0,
        scale: 1.0,
    };

    /// Validates and normalizes rotation into [0, 360).
    pub fn normalized(self) -> Result<Transform> {
        let Transform {
            x,
            y,
            rotation,
            scale,
        } = self;
        if ![x, y, rotation, scale].iter().all(|v| v.is_finite()) {
            return Err(Error::InvalidTransform("values must be finite".into()));
        }
        if scale <= 0.0 {
            return Err(Error::InvalidTransform(format!(
                "scale must be positive, got {scale}"
            )));
        }
        Ok(Transform {
            x,
            y,
            rotation: normalize_degrees(rotation),
            scale,
        })
    }
}

pub fn normalize_degrees(deg: f64) -> f64 {
    let r = deg.rem_euclid(360.0);
    // rem_euclid can round up to exactly 360 for tiny negative inputs
    if r >= 360.0 || r == 0.0 {
        0.0
    } else {
        r
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AssetRef {
    /// Path relative to the project's `assets/` directory.
    pub path: String,
    pub media_type: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Element {
    pub id: ElementId,
    pub name: String,
    pub kind: ElementKind,
    pub transform: Transform,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub asset: Option<AssetRef>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub members: Vec<ElementId>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProxyKind {
    Point,
    Line,
    Curve,
    Region,
}

impl ProxyKind {
    pub fn prefix(self) -> char {
        match self {
            ProxyKind::Point => 'P',
            ProxyKind::Line => 'L',
            ProxyKind::Curve => 'C',
            ProxyKind::Region => 'R',
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ProxyKind::Point => "point",
            ProxyKind::Line => "line",
            ProxyKind::Curve => "curve",
            ProxyKind::Region => "region",
        }
    }

    fn cardinality_ok(self, n: usize) -> bool {
        match self {
            ProxyKind::Point => n == 1,
            ProxyKind::Line => n == 2,
            ProxyKind::Curve | ProxyKind::Region => n >= 3,
        }
    }

    fn expected(self) -> &'static str {
        match self {
            ProxyKind::Point => "exactly 1",
            ProxyKind::Line => "exactly 2",
            ProxyKind::Curve | ProxyKind::Region => "at least 3",
        }
    }
}

impl std::str::FromStr for ProxyKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "point" => Ok(ProxyKind::Point),
            "line" => Ok(ProxyKind::Line),
            "curve" => Ok(ProxyKind::Curve),
            "region" => Ok(ProxyKind::Region),
            other => Err(format!("unknown proxy kind `{other}`")),
        }
    }
}

/// A canvas-space coordinate, serialized as an `[x, y]` pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 2]", into = "[f64; 2]")]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub fn new(x: f64, y: f64) -> Self {
        Point { x, y }
    }
}

impl From<[f64; 2]> for Point {
    fn from([x, y]: [f64; 2]) -> Self {
        Point { x, y }
    }
}

impl From<Point> for [f64; 2] {
    fn from(p: Point) -> Self {
        [p.x, p.y]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphicalProxy {
    pub kind: ProxyKind,
    pub label: String,
    pub geometry: Vec<Point>,
}

/// Per-kind label counters. Values are the last index handed out, so the next
/// label is `counter + 1`. Counters only ever grow.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProxyCounters {
    pub point: u32,
    pub line: u32,
    pub curve: u32,
    pub region: u32,
}

impl ProxyCounters {
    fn bump(&mut self, kind: ProxyKind) -> u32 {
        let slot = match kind {
            ProxyKind::Point => &mut self.point,
            ProxyKind::Line => &mut self.line,
            ProxyKind::Curve => &mut self.curve,
            ProxyKind::Region => &mut self.region,
        };
        *slot += 1;
        *slot
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SceneModel {
    elements: BTreeMap<ElementId, Element>,
    /// Creation order of live elements.
    order: Vec<ElementId>,
    proxies: Vec<GraphicalProxy>,
    counters: ProxyCounters,
    /// Last element sequence number issued; ids are never reused.
    last_element_seq: u64,
}

impl SceneModel {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn elements(&self) -> impl Iterator<Item = &Element> {
        self.order.iter().map(|id| &self.elements[id])
    }

    pub fn element(&self, id: &ElementId) -> Result<&Element> {
        self.elements
            .get(id)
            .ok_or_else(|| Error::UnknownElement(id.to_string()))
    }

    pub fn contains(&self, id: &ElementId) -> bool {
        self.elements.contains_key(id)
    }

    pub fn element_by_name(&self, name: &str) -> Option<&Element> {
        self.elements().find(|e| e.name == name)
    }

    /// Resolves either an element id or an element name.
    pub fn resolve(&self, id_or_name: &str) -> Result<&Element> {
        self.elements
            .get(&ElementId::new(id_or_name))
            .or_else(|| self.element_by_name(id_or_name))
            .ok_or_else(|| Error::UnknownElement(id_or_name.to_string()))
    }

    pub fn order(&self) -> &[ElementId] {
        &self.order
    }

    pub fn len(&self) -> usize {
        self.order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }

    pub fn proxies(&self) -> &[GraphicalProxy] {
        &self.proxies
    }

    pub fn proxy(&self, label: &str) -> Option<&GraphicalProxy> {
        self.proxies.iter().find(|p| p.label == label)
    }

    pub fn counters(&self) -> &ProxyCounters {
        &self.counters
    }

    /// Registers a new element with the identity transform. Asset presence
    /// rules are checked here; storing asset bytes is the caller's job.
    pub fn create_element(
        &mut self,
        name: &str,
        kind: ElementKind,
        asset: Option<AssetRef>,
    ) -> Result<Element> {
        if !is_valid_identifier(name) {
            return Err(Error::InvalidIdentifier(name.to_string()));
        }
        if self.element_by_name(name).is_some() {
            return Err(Error::DuplicateName(name.to_string()));
        }
        match (kind, &asset) {
            (ElementKind::UploadedImage | ElementKind::DrawnSketch, None) => {
                return Err(Error::MissingAsset(format!(
                    "a {} element needs an image asset",
                    kind.as_str()
                )));
            }
            (ElementKind::LlmGenerated, Some(_)) => {
                return Err(Error::MissingAsset(
                    "an llm-generated element does not take an asset".into(),
                ));
            }
            _ => {}
        }

        self.last_element_seq += 1;
        let element = Element {
            id: ElementId(format!("e{}", self.last_element_seq)),
            name: name.to_string(),
            kind,
            transform: Transform::IDENTITY,
            asset,
            members: Vec::new(),
        };
        self.order.push(element.id.clone());
        self.elements.insert(element.id.clone(), element.clone());
        Ok(element)
    }

    /// Removes an element, detaching it from any group. Deleting a group frees
    /// its members.
    pub fn delete_element(&mut self, id: &ElementId) -> Result<Element> {
        let removed = self
            .elements
            .remove(id)
            .ok_or_else(|| Error::UnknownElement(id.to_string()))?;
        self.order.retain(|e| e != id);
        for el in self.elements.values_mut() {
            el.members.retain(|m| m != id);
        }
        Ok(removed)
    }

    /// Re-inserts a previously deleted element at the end of the creation order.
    pub fn restore_element(&mut self, element: Element) -> Result<()> {
        if self.elements.contains_key(&element.id) {
            return Err(Error::DuplicateName(element.name));
        }
        if self.element_by_name(&element.name).is_some() {
            return Err(Error::DuplicateName(element.name));
        }
        let mut element = element;
        element.members.retain(|m| self.elements.contains_key(m));
        self.order.push(element.id.clone());
        self.elements.insert(element.id.clone(), element);
        Ok(())
    }

    pub fn set_transform(&mut self, id: &ElementId, t: Transform) -> Result<Element> {
        let t = t.normalized()?;
        let el = self
            .elements
            .get_mut(id)
            .ok_or_else(|| Error::UnknownElement(id.to_string()))?;
        el.transform = t;
        Ok(el.clone())
    }

    /// Replaces the member list of a group. Members must be existing,
    /// non-group elements not already claimed by another group.
    pub fn set_group_members(&mut self, group: &ElementId, members: Vec<ElementId>) -> Result<()> {
        let g = self.element(group)?;
        if g.kind != ElementKind::Group {
            return Err(Error::InvalidGroup(format!("`{}` is not a group", g.name)));
        }
        let mut seen = Vec::new();
        for m in &members {
            let el = self.element(m)?;
            if el.kind == ElementKind::Group {
                return Err(Error::InvalidGroup(format!(
                    "group `{}` cannot be a member",
                    el.name
                )));
            }
            if seen.contains(m) {
                return Err(Error::InvalidGroup(format!("`{}` listed twice", el.name)));
            }
            let owner = self
                .elements
                .values()
                .find(|o| o.id != *group && o.members.contains(m));
            if let Some(owner) = owner {
                return Err(Error::InvalidGroup(format!(
                    "`{}` already belongs to group `{}`",
                    el.name, owner.name
                )));
            }
            seen.push(m.clone());
        }
        self.elements
            .get_mut(group)
            .expect("checked above")
            .members = members;
        Ok(())
    }

    /// Structural checks for a model read from disk.
    pub(crate) fn check_consistency(&self) -> std::result::Result<(), String> {
        let mut seen = std::collections::BTreeSet::new();
        for id in &self.order {
            if !seen.insert(id) {
                return Err(format!("element `{id}` listed twice in the element order"));
            }
            if !self.elements.contains_key(id) {
                return Err(format!("element order names unknown element `{id}`"));
            }
        }
        if seen.len() != self.elements.len() {
            return Err("element order does not list every element".into());
        }
        for (id, el) in &self.elements {
            if &el.id != id {
                return Err(format!("element stored under `{id}` has id `{}`", el.id));
            }
            if let Some(m) = el.members.iter().find(|m| !self.elements.contains_key(*m)) {
                return Err(format!("group `{}` lists unknown member `{m}`", el.name));
            }
        }
        Ok(())
    }

    pub fn add_proxy(&mut self, kind: ProxyKind, geometry: Vec<Point>) -> Result<GraphicalProxy> {
        if !kind.cardinality_ok(geometry.len()) {
            return Err(Error::BadGeometryCardinality {
                kind: kind.as_str(),
                expected: kind.expected(),
                got: geometry.len(),
            });
        }
        if geometry.iter().any(|p| !p.x.is_finite() || !p.y.is_finite()) {
            return Err(Error::BadGeometryCardinality {
                kind: kind.as_str(),
                expected: kind.expected(),
                got: geometry.len(),
            });
        }
        let index = self.counters.bump(kind);
        let proxy = GraphicalProxy {
            kind,
            label: format!("{}{}", kind.prefix(), index),
            geometry,
        };
        self.proxies.push(proxy.clone());
        Ok(proxy)
    }

    pub fn delete_proxy(&mut self, label: &str) -> Result<GraphicalProxy> {
        let pos = self
            .proxies
            .iter()
            .position(|p| p.label == label)
            .ok_or_else(|| Error::UnknownLabel(label.to_string()))?;
        Ok(self.proxies.remove(pos))
    }
}
