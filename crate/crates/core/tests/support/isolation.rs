//! Randomized sequences of merges, slider edits and transform syncs.
//!
//! After every operation the files outside its target keep their bytes and
//! each element keeps exactly one of each marker, in order. Repeating a
//! merge changes nothing. Central insertions stay inside marker regions.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::time::{Duration, Instant};

use proptest::prelude::*;
use proptest::test_runner::{Config, TestRunner};

use scenecraft_core::code::response::parse_response;
use scenecraft_core::code::unit::{locate_regions, MARKERS};
use scenecraft_core::prompt::FrameworkId;
use scenecraft_core::scene::{ElementId, ElementKind, Transform};
use scenecraft_core::store::render_tree;
use scenecraft_core::Project;

pub const SEQUENCES: u32 = 500;
pub const BUDGET: Duration = Duration::from_secs(30);
/// Each operation kind must change files at least this often per run, so
/// a vacuous run cannot pass.
pub const MIN_EFFECTIVE: usize = 50;

#[derive(Debug, Clone)]
enum Op {
    ElementMerge {
        target: usize,
        anchors: (i32, i32, i32, u8),
        extras: Vec<(u8, i32)>,
        functions: Vec<u8>,
    },
    CentralMerge {
        targets: Vec<usize>,
        variables: Vec<(u8, i32)>,
        functions: Vec<u8>,
    },
    Slider {
        target: usize,
        pick: usize,
        fraction: f64,
    },
    Transform {
        target: usize,
        x: i32,
        y: i32,
        rotation: i32,
        scale: u8,
    },
}

fn op() -> impl Strategy<Value = Op> {
    prop_oneof![
        (
            0..8usize,
            (-50..850i32, -50..650i32, -360..360i32, 1..4u8),
            prop::collection::vec((0..6u8, -300..300i32), 0..4),
            prop::collection::vec(0..5u8, 0..3),
        )
            .prop_map(|(target, anchors, extras, functions)| Op::ElementMerge {
                target,
                anchors,
                extras,
                functions
            }),
        (
            prop::collection::vec(0..8usize, 0..3),
            prop::collection::vec((0..4u8, -100..100i32), 0..3),
            prop::collection::vec(0..4u8, 0..3),
        )
            .prop_map(|(targets, variables, functions)| Op::CentralMerge {
                targets,
                variables,
                functions
            }),
        (0..8usize, 0..16usize, 0.0..=1.0f64).prop_map(|(target, pick, fraction)| Op::Slider {
            target,
            pick,
            fraction
        }),
        (0..8usize, -100..900i32, -100..700i32, -720..720i32, 1..5u8).prop_map(
            |(target, x, y, rotation, scale)| Op::Transform {
                target,
                x,
                y,
                rotation,
                scale
            }
        ),
    ]
}

fn element_reply(name: &str, anchors: (i32, i32, i32, u8), extras: &[(u8, i32)], functions: &[u8]) -> String {
    let mut vars = format!(
        "    this.x = {};\n    this.y = {};\n    this.rotationDeg = {};\n    this.scale = {};\n",
        anchors.0, anchors.1, anchors.2, anchors.3
    );
    let mut seen = Vec::new();
    for (k, v) in extras {
        if !seen.contains(k) {
            seen.push(*k);
            let _ = writeln!(vars, "    this.v{k} = {v};");
        }
    }
    let mut fns = String::new();
    let mut seen = Vec::new();
    for k in functions {
        if !seen.contains(k) {
            seen.push(*k);
            let _ = write!(fns, "  f{k}(a) {{\n    return a * {k};\n  }}\n");
        }
    }
    format!(
        "Here it is.\n\n```code\nclass {name} {{\n  constructor() {{\n    //variable start\n{vars}    //variable end\n  }}\n\n  \
         update() {{\n  }}\n\n  display() {{\n  }}\n\n  //function start\n{fns}  //function end\n}}\n```\n\n\
         ```summary\n{{\"class_name\": \"{name}\"}}\n```\n"
    )
}

fn central_reply(names: &[String], variables: &[(u8, i32)], functions: &[u8]) -> String {
    let mut out = String::from("```code\nconst elements = {};\nfunction draw() {\n");
    for n in names {
        let _ = writeln!(out, "  elements.{n} = elements.{n} || new {n}();");
    }
    out.push_str("}\n```\n\n");
    for n in names {
        if !variables.is_empty() {
            let _ = writeln!(out, "```insert:{n}:variables");
            for (k, v) in variables {
                let _ = writeln!(out, "this.c{k} = {v};");
            }
            out.push_str("```\n\n");
        }
        if !functions.is_empty() {
            let _ = writeln!(out, "```insert:{n}:functions");
            for k in functions {
                let _ = write!(out, "g{k}(b) {{\n  return b + {k};\n}}\n");
            }
            out.push_str("```\n\n");
        }
    }
    out.push_str("```summary\n{\"class_name\": \"central\"}\n```\n");
    out
}

struct World {
    project: Project,
    ids: Vec<ElementId>,
}

impl World {
    fn new(count: usize) -> World {
        let mut project = Project::new("iso", Some(FrameworkId::P5js), 0);
        let ids = (0..count)
            .map(|i| {
                project
                    .create_element(&format!("E{i}"), ElementKind::LlmGenerated, None, 0)
                    .unwrap()
                    .id
            })
            .collect();
        project.drain_events();
        World { project, ids }
    }

    fn files(&self) -> BTreeMap<String, Vec<u8>> {
        render_tree(&self.project)
            .into_iter()
            .filter(|(k, _)| k.starts_with("code/"))
            .collect()
    }

    fn name(&self, i: usize) -> String {
        self.project.scene().element(&self.ids[i]).unwrap().name.clone()
    }

    fn path(&self, i: usize) -> String {
        format!("code/{}.js", self.name(i))
    }
}

/// Text of a body outside its two marker regions.
fn outside_regions(body: &str) -> (String, String, String) {
    let r = locate_regions(body).expect("markers");
    (
        body[..r.variables.start].to_string(),
        body[r.variables.end..r.functions.start].to_string(),
        body[r.functions.end..].to_string(),
    )
}

fn check_markers(world: &World) -> Result<(), TestCaseError> {
    for id in &world.ids {
        let body = world.project.element_code(id).unwrap();
        let lines: Vec<&str> = body.lines().map(str::trim).collect();
        let mut last = None;
        for marker in MARKERS {
            let hits: Vec<usize> = (0..lines.len()).filter(|&i| lines[i] == marker).collect();
            prop_assert_eq!(hits.len(), 1, "{} occurs {} times", marker, hits.len());
            prop_assert!(last.map_or(true, |l| l < hits[0]), "{} out of order", marker);
            last = Some(hits[0]);
        }
    }
    let mismatches = world.project.coherence_mismatches();
    prop_assert!(mismatches.is_empty(), "{:?}", mismatches);
    Ok(())
}

fn unchanged_except(
    before: &BTreeMap<String, Vec<u8>>,
    after: &BTreeMap<String, Vec<u8>>,
    allowed: &[String],
) -> Result<(), TestCaseError> {
    prop_assert_eq!(before.keys().collect::<Vec<_>>(), after.keys().collect::<Vec<_>>());
    for (path, bytes) in before {
        if !allowed.contains(path) {
            prop_assert!(&after[path] == bytes, "{} changed", path);
        }
    }
    Ok(())
}

fn step(world: &mut World, op: &Op, effective: &[AtomicUsize; 4]) -> Result<(), TestCaseError> {
    let before = world.files();
    match op {
        Op::ElementMerge {
            target,
            anchors,
            extras,
            functions,
        } => {
            let i = target % world.ids.len();
            let id = world.ids[i].clone();
            let raw = element_reply(&world.name(i), *anchors, extras, functions);
            let parsed = parse_response(&raw, false).unwrap();
            world
                .project
                .merge_element_code(&id, &parsed.code, Some(&parsed.summary))
                .unwrap();
            unchanged_except(&before, &world.files(), &[world.path(i)])?;
            let once = world.project.clone();
            world
                .project
                .merge_element_code(&id, &parsed.code, Some(&parsed.summary))
                .unwrap();
            prop_assert!(world.project == once, "element merge not idempotent");
            prop_assert_eq!(render_tree(&world.project), render_tree(&once));
        }
        Op::CentralMerge {
            targets,
            variables,
            functions,
        } => {
            let mut picked: Vec<usize> = targets.iter().map(|t| t % world.ids.len()).collect();
            picked.sort_unstable();
            picked.dedup();
            let names: Vec<String> = picked.iter().map(|&i| world.name(i)).collect();
            let mut vars = variables.clone();
            vars.sort_by_key(|v| v.0);
            vars.dedup_by_key(|v| v.0);
            let mut fns = functions.clone();
            fns.sort_unstable();
            fns.dedup();
            let raw = central_reply(&names, &vars, &fns);
            let parsed = parse_response(&raw, true).unwrap();
            world
                .project
                .merge_central(&parsed.code, &parsed.insertions, Some(&parsed.summary))
                .unwrap();
            let after = world.files();
            let mut allowed: Vec<String> = picked.iter().map(|&i| world.path(i)).collect();
            allowed.push("code/central.js".into());
            unchanged_except(&before, &after, &allowed)?;
            for &i in &picked {
                let path = world.path(i);
                let old = String::from_utf8(before[&path].clone()).unwrap();
                let new = String::from_utf8(after[&path].clone()).unwrap();
                prop_assert_eq!(outside_regions(&old), outside_regions(&new), "{} edited outside regions", path);
            }
            let once = world.project.clone();
            world
                .project
                .merge_central(&parsed.code, &parsed.insertions, Some(&parsed.summary))
                .unwrap();
            prop_assert!(world.project == once, "central merge not idempotent");
            prop_assert_eq!(render_tree(&world.project), render_tree(&once));
        }
        Op::Slider {
            target,
            pick,
            fraction,
        } => {
            let i = target % world.ids.len();
            let id = world.ids[i].clone();
            let manifest = world.project.slider_manifest(&id).unwrap();
            if manifest.is_empty() {
                return Ok(());
            }
            let spec = &manifest[pick % manifest.len()];
            let lo = spec.min.min(spec.max);
            let hi = spec.min.max(spec.max);
            let value = (lo + (hi - lo) * fraction).round().clamp(lo, hi);
            world.project.apply_slider(&id, &spec.variable, value).unwrap();
            let after = world.files();
            unchanged_except(&before, &after, &[world.path(i)])?;
            let path = world.path(i);
            let old = String::from_utf8(before[&path].clone()).unwrap();
            let new = String::from_utf8(after[&path].clone()).unwrap();
            let changed = old.lines().zip(new.lines()).filter(|(a, b)| a != b).count();
            prop_assert_eq!(old.lines().count(), new.lines().count());
            prop_assert!(changed <= 1, "slider changed {} lines", changed);
        }
        Op::Transform {
            target,
            x,
            y,
            rotation,
            scale,
        } => {
            let i = target % world.ids.len();
            let id = world.ids[i].clone();
            let t = Transform {
                x: *x as f64,
                y: *y as f64,
                rotation: *rotation as f64,
                scale: *scale as f64 / 2.0,
            };
            world.project.set_transform(&id, t).unwrap();
            unchanged_except(&before, &world.files(), &[world.path(i)])?;
        }
    }
    if world.files() != before {
        let kind = match op {
            Op::ElementMerge { .. } => 0,
            Op::CentralMerge { .. } => 1,
            Op::Slider { .. } => 2,
            Op::Transform { .. } => 3,
        };
        effective[kind].fetch_add(1, Ordering::Relaxed);
    }
    world.project.drain_events();
    check_markers(world)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SuiteReport {
    pub sequences: u32,
    pub elapsed: Duration,
    /// File-changing operations per kind: element merge, central merge,
    /// slider edit, transform sync.
    pub effective: [usize; 4],
}

/// Runs `sequences` random operation sequences, failing on the first
/// violated invariant.
pub fn run_suite(sequences: u32) -> Result<SuiteReport, String> {
    let started = Instant::now();
    let effective: [AtomicUsize; 4] = Default::default();
    let mut runner = TestRunner::new(Config {
        cases: sequences,
        failure_persistence: None,
        ..Config::default()
    });
    let strategy = (2..6usize, prop::collection::vec(op(), 1..12));
    runner
        .run(&strategy, |(count, ops)| {
            let mut world = World::new(count);
            check_markers(&world)?;
            for op in &ops {
                step(&mut world, op, &effective)?;
            }
            Ok(())
        })
        .map_err(|e| e.to_string())?;
    Ok(SuiteReport {
        sequences,
        elapsed: started.elapsed(),
        effective: effective.map(|c| c.into_inner()),
    })
}
