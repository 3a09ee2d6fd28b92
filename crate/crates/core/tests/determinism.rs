use std::path::PathBuf;
use std::sync::Arc;

use scenecraft_core::scenario::{replay, scenario_backend, tree_digest};
use scenecraft_core::store;

fn replayed(name: &str) -> (tempfile::TempDir, PathBuf) {
    let scen = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../scenarios").join(name);
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().join("project");
    replay(&scen, &dir, Arc::new(scenario_backend(&scen).unwrap())).unwrap();
    (tmp, dir)
}

#[test]
fn save_load_save_is_a_fixpoint() {
    for name in ["task1-fish-points", "task2-fish-curve", "task3-sun-earth"] {
        let (_tmp, dir) = replayed(name);
        let first = store::load(&dir).unwrap();
        let digest = tree_digest(&first);
        let again = dir.with_file_name("again");
        store::save(&first, &again).unwrap();
        let second = store::load(&again).unwrap();
        assert_eq!(second, first, "{name}");
        assert_eq!(tree_digest(&second), digest, "{name}");
        // the bytes on disk match the in-memory rendering
        for (path, bytes) in store::render_tree(&second) {
            assert_eq!(std::fs::read(again.join(&path)).unwrap(), bytes, "{name}: {path}");
        }
    }
}

#[test]
fn export_and_compile_are_repeatable() {
    let (_tmp, dir) = replayed("task3-sun-earth");
    let project = store::load(&dir).unwrap();
    let a = project.export_bundle().unwrap();
    let b = project.export_bundle().unwrap();
    assert_eq!(a, b);
    assert_eq!(a.digest(), b.digest());
    assert_eq!(project.context().compile(), project.context().compile());
    let reloaded = store::load(&dir).unwrap();
    assert_eq!(reloaded.export_bundle().unwrap().digest(), a.digest());
    assert_eq!(reloaded.context().compile(), project.context().compile());
}
