//! Runnable export bundle: index.html, code files, assets and the vendored
//! framework build.

use std::collections::BTreeMap;
use std::path::Path;

use sha2::{Digest, Sha256};

use crate::code::unit::locate_regions;
use crate::error::{Error, Result};
use crate::prompt::FrameworkId;
use crate::scene::{CANVAS_HEIGHT, CANVAS_WIDTH};

const PHASER_JS: &[u8] = include_bytes!("../../vendor/phaser-3.80.1.min.js");
const PHASER_LICENSE: &[u8] = include_bytes!("../../vendor/LICENSE-phaser.md");
const P5_JS: &[u8] = include_bytes!("../../vendor/p5-1.9.4.min.js");
const P5_LICENSE: &[u8] = include_bytes!("../../vendor/LICENSE-p5.txt");

/// Pinned framework build: file name under `vendor/`, contents, license.
pub fn vendored(framework: FrameworkId) -> (&'static str, &'static [u8], &'static str, &'static [u8]) {
    match framework {
        FrameworkId::Phaser => (
            "phaser-3.80.1.min.js",
            PHASER_JS,
            "LICENSE-phaser.md",
            PHASER_LICENSE,
        ),
        FrameworkId::P5js => ("p5-1.9.4.min.js", P5_JS, "LICENSE-p5.txt", P5_LICENSE),
    }
}

/// Everything the bundle is built from.
pub struct BundleInput<'a> {
    pub title: &'a str,
    pub framework: Option<FrameworkId>,
    pub central: &'a str,
    /// Element name, code body and optional asset path, in creation order.
    pub elements: Vec<(&'a str, &'a str, Option<&'a str>)>,
    pub assets: &'a BTreeMap<String, Vec<u8>>,
}

/// An export as relative path to bytes.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Bundle {
    pub files: BTreeMap<String, Vec<u8>>,
}

impl Bundle {
    pub fn get(&self, path: &str) -> Option<&[u8]> {
        self.files.get(path).map(Vec::as_slice)
    }

    /// SHA-256 over every path and content, in path order.
    pub fn digest(&self) -> String {
        let mut h = Sha256::new();
        for (path, bytes) in &self.files {
            h.update((path.len() as u64).to_le_bytes());
            h.update(path.as_bytes());
            h.update((bytes.len() as u64).to_le_bytes());
            h.update(bytes);
        }
        hex::encode(h.finalize())
    }

    pub fn write_to(&self, dir: &Path) -> Result<()> {
        for (rel, bytes) in &self.files {
            let path = dir.join(rel);
            if let Some(parent) = path.parent() {
                std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
            }
            std::fs::write(&path, bytes).map_err(|e| Error::io(&path, e))?;
        }
        Ok(())
    }
}

fn html_escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

pub fn build_bundle(input: &BundleInput<'_>) -> Result<Bundle> {
    let framework = input.framework.ok_or(Error::FrameworkUnselected)?;
    let mut files = BTreeMap::new();
    let mut asset_map = BTreeMap::new();
    let mut scripts = Vec::new();
    for (name, body, asset) in &input.elements {
        locate_regions(body).map_err(|detail| Error::InvalidCodeUnit {
            unit: format!("code/{name}.js"),
            detail,
        })?;
        if let Some(path) = asset {
            let bytes = input.assets.get(*path).ok_or_else(|| Error::InvalidCodeUnit {
                unit: format!("code/{name}.js"),
                detail: format!("asset `{path}` is missing"),
            })?;
            let rel = format!("assets/{path}");
            asset_map.insert(name.to_string(), rel.clone());
            files.insert(rel, bytes.clone());
        }
        files.insert(format!("code/{name}.js"), body.as_bytes().to_vec());
        scripts.push(format!("code/{name}.js"));
    }
    files.insert("code/central.js".into(), input.central.as_bytes().to_vec());

    let (lib, lib_bytes, license, license_bytes) = vendored(framework);
    files.insert(format!("vendor/{lib}"), lib_bytes.to_vec());
    files.insert(format!("vendor/{license}"), license_bytes.to_vec());

    let assets_json = serde_json::to_string(&asset_map)
        .expect("string map serializes")
        .replace("</", "<\\/");
    let mut html = format!(
        "<!DOCTYPE html>\n<html>\n<head>\n<meta charset=\"utf-8\">\n<title>{}</title>\n\
         <style>body {{ margin: 0; background: #f4f4f4; }} #scene {{ width: {CANVAS_WIDTH}px; margin: 0 auto; }}</style>\n\
         </head>\n<body>\n<div id=\"scene\"></div>\n<script>\n\
         const CANVAS_WIDTH = {CANVAS_WIDTH};\nconst CANVAS_HEIGHT = {CANVAS_HEIGHT};\nconst ASSETS = {assets_json};\n\
         </script>\n<script src=\"vendor/{lib}\"></script>\n",
        html_escape(input.title)
    );
    for s in scripts.iter().map(String::as_str).chain(["code/central.js"]) {
        html.push_str(&format!("<script src=\"{s}\"></script>\n"));
    }
    html.push_str("</body>\n</html>\n");
    files.insert("index.html".into(), html.into_bytes());
    Ok(Bundle { files })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::code::template::{central_template, element_template};

    #[test]
    fn one_element_bundle() {
        let sun = element_template(FrameworkId::P5js, "Sun");
        let central = central_template(FrameworkId::P5js, &["Sun"]);
        let mut assets = BTreeMap::new();
        assets.insert("Sun.png".to_string(), vec![1, 2, 3]);
        let input = BundleInput {
            title: "a <b>",
            framework: Some(FrameworkId::P5js),
            central: &central,
            elements: vec![("Sun", &sun, Some("Sun.png"))],
            assets: &assets,
        };
        let b = build_bundle(&input).unwrap();
        let code_files = b.files.keys().filter(|k| k.starts_with("code/")).count();
        assert_eq!(code_files, 2);
        let html = String::from_utf8(b.get("index.html").unwrap().to_vec()).unwrap();
        assert!(html.contains("a &lt;b&gt;"));
        assert!(html.contains(r#"const ASSETS = {"Sun":"assets/Sun.png"};"#));
        let lib = html.find("vendor/p5-1.9.4.min.js").unwrap();
        let el = html.find("code/Sun.js").unwrap();
        let central_pos = html.find("code/central.js").unwrap();
        assert!(lib < el && el < central_pos);
        assert_eq!(b.get("assets/Sun.png"), Some(&[1u8, 2, 3][..]));
        assert_eq!(build_bundle(&input).unwrap().digest(), b.digest());
    }

    #[test]
    fn missing_asset_and_framework() {
        let sun = element_template(FrameworkId::P5js, "Sun");
        let assets = BTreeMap::new();
        let mut input = BundleInput {
            title: "t",
            framework: Some(FrameworkId::P5js),
            central: "",
            elements: vec![("Sun", &sun, Some("Sun.png"))],
            assets: &assets,
        };
        assert_eq!(build_bundle(&input).unwrap_err().code(), "invalid-code-unit");
        input.framework = None;
        assert_eq!(build_bundle(&input).unwrap_err().code(), "framework-unselected");
    }
}
