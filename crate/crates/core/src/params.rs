//! Slider manifests derived from an element's variable region, and literal
//! rewriting when a slider moves.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::code::js;
use crate::code::unit::{locate_regions, TRANSFORM_ANCHORS};
use crate::error::{Error, Result};
use crate::scene::ElementId;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SliderSpec {
    pub element: ElementId,
    pub variable: String,
    pub current: f64,
    pub min: f64,
    pub max: f64,
    pub step: f64,
}

/// Normalized range for a value: `[0, 2v]`, `[2v, 0]` or `[-1, 1]`.
pub fn range_for(v: f64) -> (f64, f64) {
    if v > 0.0 {
        (0.0, 2.0 * v)
    } else if v < 0.0 {
        (2.0 * v, 0.0)
    } else {
        (-1.0, 1.0)
    }
}

fn within(value: f64, min: f64, max: f64) -> bool {
    let eps = 1e-9 * min.abs().max(max.abs()).max(1.0);
    value >= min - eps && value <= max + eps
}

/// Numeric variables of a variable region, first declaration per name,
/// transform anchors excluded. Returns name, literal and parsed value.
pub fn numeric_variables(region: &str) -> Vec<(String, String, f64)> {
    let mut out: Vec<(String, String, f64)> = Vec::new();
    for d in js::var_decls(region) {
        if TRANSFORM_ANCHORS.contains(&d.name.as_str()) || out.iter().any(|(n, ..)| *n == d.name) {
            continue;
        }
        let literal = d.value_text(region);
        if !js::is_numeric_literal(literal) {
            continue;
        }
        if let Ok(v) = literal.parse::<f64>() {
            out.push((d.name, literal.to_string(), v));
        }
    }
    out
}

/// Builds the manifest for one element. `anchors` holds the value each
/// range was first computed from; variables without an anchor use their
/// current value. An anchor whose range no longer contains the current value
/// is ignored.
pub fn build_manifest(
    element: &ElementId,
    unit_name: &str,
    body: &str,
    anchors: &BTreeMap<String, f64>,
) -> Result<Vec<SliderSpec>> {
    let regions = locate_regions(body).map_err(|detail| Error::InvalidCodeUnit {
        unit: unit_name.to_string(),
        detail,
    })?;
    let region = &body[regions.variables];
    Ok(numeric_variables(region)
        .into_iter()
        .map(|(name, _, current)| {
            let mut range = range_for(current);
            if let Some(&a) = anchors.get(&name) {
                let anchored = range_for(a);
                if within(current, anchored.0, anchored.1) {
                    range = anchored;
                }
            }
            SliderSpec {
                element: element.clone(),
                variable: name,
                current,
                min: range.0,
                max: range.1,
                step: (range.1 - range.0) / 100.0,
            }
        })
        .collect())
}

/// Rewrites the literal of `variable` to `value`. Returns the new body and
/// the literal written.
pub fn apply_slider(
    spec: &[SliderSpec],
    body: &str,
    variable: &str,
    value: f64,
) -> Result<(String, String)> {
    let s = spec
        .iter()
        .find(|s| s.variable == variable)
        .ok_or_else(|| Error::UnknownVariable {
            element: spec.first().map(|s| s.element.to_string()).unwrap_or_default(),
            variable: variable.to_string(),
        })?;
    if !value.is_finite() || !within(value, s.min, s.max) {
        return Err(Error::OutOfRange {
            variable: variable.to_string(),
            value,
            min: s.min,
            max: s.max,
        });
    }
    let value = value.clamp(s.min, s.max);
    let regions = locate_regions(body).expect("manifest was built from this body");
    let region = &body[regions.variables.clone()];
    let decl = js::var_decls(region)
        .into_iter()
        .find(|d| d.name == variable)
        .expect("manifest entries come from the region");
    let old = decl.value_text(region);
    let new = js::format_number_like(value, old);
    if old.parse::<f64>().ok() == Some(value) && !old.starts_with('+') {
        return Ok((body.to_string(), old.to_string()));
    }
    let mut out = body.to_string();
    let abs = (regions.variables.start + decl.value.start)..(regions.variables.start + decl.value.end);
    out.replace_range(abs, &new);
    Ok((out, new))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::code::template::element_template;
    use crate::prompt::FrameworkId;
    use proptest::prelude::*;

    fn body_with(vars: &str) -> String {
        element_template(FrameworkId::P5js, "Fish")
            .replace("    this.scale = 1;\n", &format!("    this.scale = 1;\n{vars}"))
    }

    fn manifest(body: &str) -> Vec<SliderSpec> {
        build_manifest(&ElementId::new("e1"), "Fish", body, &BTreeMap::new()).unwrap()
    }

    #[test]
    fn ranges_follow_the_sign_rule() {
        let body = body_with(
            "    this.speed = 200;\n    this.offset = 0;\n    this.gravity = -9.8;\n    this.color = 'red';\n    this.k = 2 * 3;\n",
        );
        let m = manifest(&body);
        let names: Vec<&str> = m.iter().map(|s| s.variable.as_str()).collect();
        assert_eq!(names, ["speed", "offset", "gravity"]);
        assert_eq!((m[0].min, m[0].max, m[0].step), (0.0, 400.0, 4.0));
        assert_eq!((m[1].min, m[1].max, m[1].step), (-1.0, 1.0, 0.02));
        assert_eq!((m[2].min, m[2].max), (-19.6, 0.0));
        assert!((m[2].step - 0.196).abs() < 1e-12);
    }

    #[test]
    fn apply_rewrites_one_line() {
        let body = body_with("    this.speed = 200;\n");
        let m = manifest(&body);
        let (out, lit) = apply_slider(&m, &body, "speed", 250.0).unwrap();
        assert_eq!(lit, "250");
        let changed = body.lines().zip(out.lines()).filter(|(a, b)| a != b).count();
        assert_eq!(changed, 1);
        assert_eq!(body.lines().count(), out.lines().count());
        let (same, _) = apply_slider(&m, &body, "speed", 200.0).unwrap();
        assert_eq!(same, body);
        assert_eq!(
            apply_slider(&m, &body, "speed", 10_000.0).unwrap_err().code(),
            "out-of-range"
        );
        assert_eq!(
            apply_slider(&m, &body, "x", 1.0).unwrap_err().code(),
            "unknown-variable"
        );
    }

    #[test]
    fn anchored_ranges_do_not_walk() {
        let body = body_with("    this.speed = 200;\n");
        let m = manifest(&body);
        let (out, _) = apply_slider(&m, &body, "speed", 350.0).unwrap();
        let mut anchors = BTreeMap::new();
        anchors.insert("speed".to_string(), 200.0);
        let again = build_manifest(&ElementId::new("e1"), "Fish", &out, &anchors).unwrap();
        assert_eq!((again[0].current, again[0].min, again[0].max), (350.0, 0.0, 400.0));
    }

    #[test]
    fn decimal_form_is_preserved() {
        let body = body_with("    this.g = -9.8;\n");
        let m = manifest(&body);
        let (out, lit) = apply_slider(&m, &body, "g", -10.0).unwrap();
        assert_eq!(lit, "-10.0");
        assert!(out.contains("this.g = -10.0;"));
    }

    proptest! {
        #[test]
        fn round_trip_and_commutation(a in 1u32..1000, b in -1000i32..-1, fa in 0.0f64..1.0, fb in 0.0f64..1.0) {
            let body = body_with(&format!("    this.p = {a};\n    this.q = {b}.5;\n"));
            let m = manifest(&body);
            let xa = m[0].min + fa * (m[0].max - m[0].min);
            let xb = m[1].min + fb * (m[1].max - m[1].min);
            let (one, _) = apply_slider(&m, &body, "p", xa).unwrap();
            let (one, _) = apply_slider(&m, &one, "q", xb).unwrap();
            let (two, _) = apply_slider(&m, &body, "q", xb).unwrap();
            let (two, _) = apply_slider(&m, &two, "p", xa).unwrap();
            prop_assert_eq!(&one, &two);
            let mut anchors = BTreeMap::new();
            anchors.insert("p".to_string(), a as f64);
            anchors.insert("q".to_string(), b as f64 + if b < 0 { -0.5 } else { 0.5 });
            let after = build_manifest(&ElementId::new("e1"), "Fish", &one, &anchors).unwrap();
            prop_assert_eq!(after[0].current, xa);
            prop_assert_eq!(after[1].current, xb);
            for s in &after {
                prop_assert!(s.min <= s.current && s.current <= s.max && s.step > 0.0);
            }
        }
    }
}
