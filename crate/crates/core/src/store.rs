//! On-disk project format: deterministic JSON plus verbatim code files.
//!
//! ```text
//! project.json        manifest, scene, metadata
//! context.json        class summaries in creation order
//! sessions/<m>.jsonl  one message per line; <m> is `central` or an element id
//! code/central.js     central script
//! code/<Name>.js      one file per element
//! assets/<file>       uploaded images
//! ```

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::context::{ClassSummary, ContextRepository};
use crate::error::{Error, Result};
use crate::project::{Project, ProjectMeta};
use crate::scene::{SceneModel, CANVAS_HEIGHT, CANVAS_WIDTH};
use crate::session::{Message, ModuleId, ModuleRegistry, ModuleSession};

pub const FORMAT_VERSION: u32 = 1;

const TOP_LEVEL: [&str; 5] = ["assets", "code", "sessions", "context.json", "project.json"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
struct Canvas {
    width: u32,
    height: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct SessionMeta {
    created_at_ms: u64,
}

#[derive(Serialize, Deserialize)]
struct ProjectFile {
    format_version: u32,
    canvas: Canvas,
    #[serde(flatten)]
    meta: ProjectMeta,
    scene: SceneModel,
    sessions: BTreeMap<ModuleId, SessionMeta>,
}

/// Pretty JSON with object keys sorted.
pub fn to_sorted_json<T: Serialize>(value: &T) -> String {
    let v: Value = serde_json::to_value(value).expect("project state serializes");
    let mut s = serde_json::to_string_pretty(&v).expect("value serializes");
    s.push('\n');
    s
}

fn compact_sorted<T: Serialize>(value: &T) -> String {
    let v: Value = serde_json::to_value(value).expect("project state serializes");
    serde_json::to_string(&v).expect("value serializes")
}

/// All files of the saved tree as relative path and bytes.
pub fn render_tree(project: &Project) -> BTreeMap<String, Vec<u8>> {
    let mut files = BTreeMap::new();
    let manifest = ProjectFile {
        format_version: FORMAT_VERSION,
        canvas: Canvas {
            width: CANVAS_WIDTH,
            height: CANVAS_HEIGHT,
        },
        meta: project.meta.clone(),
        scene: project.scene.clone(),
        sessions: project
            .registry
            .sessions()
            .map(|s| {
                (
                    s.module.clone(),
                    SessionMeta {
                        created_at_ms: s.created_at_ms,
                    },
                )
            })
            .collect(),
    };
    files.insert("project.json".into(), to_sorted_json(&manifest).into_bytes());
    let summaries: Vec<&ClassSummary> = project.context.summaries().collect();
    files.insert("context.json".into(), to_sorted_json(&summaries).into_bytes());
    for s in project.registry.sessions() {
        let mut text = String::new();
        for m in &s.messages {
            text.push_str(&compact_sorted(m));
            text.push('\n');
        }
        files.insert(format!("sessions/{}.jsonl", s.module), text.into_bytes());
    }
    files.insert("code/central.js".into(), project.central.as_bytes().to_vec());
    for el in project.scene.elements() {
        files.insert(
            format!("code/{}.js", el.name),
            project.code[&el.id].as_bytes().to_vec(),
        );
    }
    for (path, bytes) in &project.assets {
        files.insert(format!("assets/{path}"), bytes.clone());
    }
    files
}

fn write_tree(root: &Path, files: &BTreeMap<String, Vec<u8>>) -> Result<()> {
    for dir in ["assets", "code", "sessions"] {
        let d = root.join(dir);
        fs::create_dir_all(&d).map_err(|e| Error::io(&d, e))?;
    }
    for (rel, bytes) in files {
        let path = root.join(rel);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
        fs::write(&path, bytes).map_err(|e| Error::io(&path, e))?;
    }
    Ok(())
}

fn remove_any(path: &Path) -> Result<()> {
    let r = if path.is_dir() {
        fs::remove_dir_all(path)
    } else {
        fs::remove_file(path)
    };
    match r {
        Ok(()) => Ok(()),
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(()),
        Err(e) => Err(Error::io(path, e)),
    }
}

fn rename(from: &Path, to: &Path) -> Result<()> {
    fs::rename(from, to).map_err(|e| Error::io(to, e))
}

/// Saves the project to `dir`.
///
/// A new directory is staged next to `dir` and renamed into place. An
/// existing directory is updated by staging the tree inside it and swapping
/// each top-level entry in with a rename; `project.json` goes last.
pub fn save(project: &Project, dir: &Path) -> Result<()> {
    let files = render_tree(project);
    let stamp = std::process::id();
    if !dir.exists() {
        let parent = match dir.parent() {
            Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
            _ => PathBuf::from("."),
        };
        fs::create_dir_all(&parent).map_err(|e| Error::io(&parent, e))?;
        let name = dir
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_else(|| "project".into());
        let tmp = parent.join(format!(".{name}.staging-{stamp}"));
        remove_any(&tmp)?;
        fs::create_dir(&tmp).map_err(|e| Error::io(&tmp, e))?;
        if let Err(e) = write_tree(&tmp, &files) {
            let _ = remove_any(&tmp);
            return Err(e);
        }
        return rename(&tmp, dir);
    }
    let staging = dir.join(format!(".staging-{stamp}"));
    let trash = dir.join(format!(".trash-{stamp}"));
    remove_any(&staging)?;
    remove_any(&trash)?;
    fs::create_dir(&staging).map_err(|e| Error::io(&staging, e))?;
    if let Err(e) = write_tree(&staging, &files) {
        let _ = remove_any(&staging);
        return Err(e);
    }
    fs::create_dir(&trash).map_err(|e| Error::io(&trash, e))?;
    for entry in TOP_LEVEL {
        let live = dir.join(entry);
        if live.exists() {
            rename(&live, &trash.join(entry))?;
        }
        rename(&staging.join(entry), &live)?;
    }
    remove_any(&staging)?;
    remove_any(&trash)
}

fn read_text(path: &Path) -> Result<String> {
    match fs::read_to_string(path) {
        Ok(s) => Ok(s),
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
            Err(Error::corrupt(path, "file is missing"))
        }
        Err(e) => Err(Error::io(path, e)),
    }
}

fn read_assets(root: &Path, dir: &Path, out: &mut BTreeMap<String, Vec<u8>>) -> Result<()> {
    let entries = match fs::read_dir(dir) {
        Ok(e) => e,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(()),
        Err(e) => return Err(Error::io(dir, e)),
    };
    for entry in entries {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        if path.is_dir() {
            read_assets(root, &path, out)?;
        } else {
            let rel = path
                .strip_prefix(root)
                .expect("walk stays under root")
                .to_string_lossy()
                .replace('\\', "/");
            let bytes = fs::read(&path).map_err(|e| Error::io(&path, e))?;
            out.insert(rel, bytes);
        }
    }
    Ok(())
}

/// Loads a project saved by [`save`].
pub fn load(dir: &Path) -> Result<Project> {
    let manifest_path = dir.join("project.json");
    let raw: Value = serde_json::from_str(&read_text(&manifest_path)?)
        .map_err(|e| Error::corrupt(&manifest_path, e))?;
    let version = raw
        .get("format_version")
        .and_then(Value::as_u64)
        .ok_or_else(|| Error::corrupt(&manifest_path, "no format_version"))?;
    if version != u64::from(FORMAT_VERSION) {
        return Err(Error::VersionMismatch {
            found: version as u32,
            expected: FORMAT_VERSION,
        });
    }
    let manifest: ProjectFile =
        serde_json::from_value(raw).map_err(|e| Error::corrupt(&manifest_path, e))?;
    manifest
        .scene
        .check_consistency()
        .map_err(|d| Error::corrupt(&manifest_path, d))?;

    let context_path = dir.join("context.json");
    let summaries: Vec<ClassSummary> = serde_json::from_str(&read_text(&context_path)?)
        .map_err(|e| Error::corrupt(&context_path, e))?;
    let summarized: Vec<_> = summaries.iter().map(|s| &s.element).collect();
    let mut expected: Vec<_> = manifest.scene.order().iter().collect();
    let mut got = summarized.clone();
    expected.sort();
    got.sort();
    if expected != got {
        return Err(Error::corrupt(
            &context_path,
            "summaries do not match the element list",
        ));
    }

    let mut sessions = Vec::new();
    let has_central = manifest.sessions.contains_key(&ModuleId::Central);
    let element_sessions = manifest.sessions.keys().filter(|m| !m.is_central()).count();
    if !has_central
        || element_sessions != manifest.scene.len()
        || manifest
            .scene
            .order()
            .iter()
            .any(|id| !manifest.sessions.contains_key(&ModuleId::element(id)))
    {
        return Err(Error::corrupt(
            &manifest_path,
            "sessions do not match the element list",
        ));
    }
    for (module, meta) in &manifest.sessions {
        let path = dir.join("sessions").join(format!("{module}.jsonl"));
        let text = read_text(&path)?;
        let mut messages = Vec::new();
        for (n, line) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
            let m: Message = serde_json::from_str(line)
                .map_err(|e| Error::corrupt(&path, format!("line {}: {e}", n + 1)))?;
            messages.push(m);
        }
        if messages.is_empty() {
            return Err(Error::corrupt(&path, "session has no system message"));
        }
        sessions.push(ModuleSession {
            module: module.clone(),
            messages,
            created_at_ms: meta.created_at_ms,
        });
    }

    let central = read_text(&dir.join("code").join("central.js"))?;
    let mut code = BTreeMap::new();
    for el in manifest.scene.elements() {
        let path = dir.join("code").join(format!("{}.js", el.name));
        code.insert(el.id.clone(), read_text(&path)?);
    }
    let mut assets = BTreeMap::new();
    let asset_root = dir.join("assets");
    read_assets(&asset_root, &asset_root, &mut assets)?;

    Ok(Project::from_parts(
        manifest.meta,
        manifest.scene,
        ModuleRegistry::from_sessions(sessions),
        ContextRepository::from_ordered(summaries),
        central,
        code,
        assets,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::prompt::FrameworkId;
    use crate::project::AssetUpload;
    use crate::scene::ElementKind;

    fn sample() -> Project {
        let mut p = Project::new("demo", Some(FrameworkId::P5js), 1);
        p.create_element(
            "Sun",
            ElementKind::UploadedImage,
            Some(AssetUpload {
                file_name: "sun.png".into(),
                media_type: "image/png".into(),
                bytes: vec![1, 2, 3],
            }),
            2,
        )
        .unwrap();
        p.create_element("Earth", ElementKind::LlmGenerated, None, 3).unwrap();
        p
    }

    #[test]
    fn round_trip_is_a_fixpoint() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("proj");
        let p = sample();
        save(&p, &path).unwrap();
        let loaded = load(&path).unwrap();
        assert_eq!(loaded, p);
        assert_eq!(render_tree(&loaded), render_tree(&p));
        // saving over an existing tree leaves no staging debris
        save(&loaded, &path).unwrap();
        let names: Vec<String> = fs::read_dir(&path)
            .unwrap()
            .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
            .collect();
        assert!(names.iter().all(|n| !n.starts_with('.')), "{names:?}");
        assert_eq!(load(&path).unwrap(), p);
    }

    #[test]
    fn deleted_elements_leave_no_files() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("proj");
        let mut p = sample();
        save(&p, &path).unwrap();
        let sun = p.scene().element_by_name("Sun").unwrap().id.clone();
        p.delete_element(&sun).unwrap();
        save(&p, &path).unwrap();
        assert!(!path.join("code/Sun.js").exists());
        assert!(!path.join("assets/Sun.png").exists());
        assert_eq!(load(&path).unwrap(), p);
    }

    #[test]
    fn missing_context_is_corrupt() {
        let dir = tempfile::tempdir().unwrap();
        save(&sample(), dir.path()).unwrap();
        fs::remove_file(dir.path().join("context.json")).unwrap();
        assert_eq!(load(dir.path()).unwrap_err().code(), "corrupt-file");
    }

    #[test]
    fn other_versions_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        save(&sample(), dir.path()).unwrap();
        let path = dir.path().join("project.json");
        let text = fs::read_to_string(&path)
            .unwrap()
            .replace("\"format_version\": 1", "\"format_version\": 0");
        fs::write(&path, text).unwrap();
        let err = load(dir.path()).unwrap_err();
        assert_eq!(err.code(), "version-mismatch");
        assert!(err.to_string().contains('0'));
    }

    #[test]
    fn unwritable_path_is_io_failure() {
        let dir = tempfile::tempdir().unwrap();
        let file = dir.path().join("plain-file");
        fs::write(&file, "x").unwrap();
        let err = save(&sample(), &file.join("proj")).unwrap_err();
        assert_eq!(err.code(), "io-failure");
    }

    #[test]
    fn keys_are_sorted() {
        let text = String::from_utf8(render_tree(&sample())["project.json"].clone()).unwrap();
        let top: Vec<&str> = text
            .lines()
            .filter(|l| l.starts_with("  \""))
            .map(|l| l.trim().split('"').nth(1).unwrap())
            .collect();
        let mut sorted = top.clone();
        sorted.sort_unstable();
        assert_eq!(top, sorted);
    }
}
