use std::path::PathBuf;
use std::sync::Arc;

use latte_core::{parse_app_spec, AppSpec};

pub fn fixtures_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

pub fn fixture(name: &str) -> Arc<AppSpec> {
    let path = fixtures_dir().join(format!("{name}.json"));
    let text = std::fs::read_to_string(&path)
        .unwrap_or_else(|e| panic!("fixture {} unreadable: {e}", path.display()));
    Arc::new(parse_app_spec(&text).unwrap_or_else(|e| panic!("fixture {name} invalid: {e}")))
}

pub const MAIN_FIXTURES: [&str; 3] = ["tomdroid", "tippytipper", "hotdeath"];
pub const ALL_FIXTURES: [&str; 6] =
    ["tomdroid", "tippytipper", "hotdeath", "two_checkbox", "one_button", "minimal_noop"];

/// Compare `content` against the committed golden file, or rewrite the
/// golden when `LATTE_REGEN_GOLDEN` is set.
#[allow(dead_code)]
pub fn golden_check(name: &str, content: &str) {
    let path = fixtures_dir().join("golden").join(name);
    if std::env::var_os("LATTE_REGEN_GOLDEN").is_some() {
        std::fs::write(&path, content).unwrap_or_else(|e| panic!("cannot write golden: {e}"));
        return;
    }
    let expected = std::fs::read_to_string(&path).unwrap_or_else(|e| {
        panic!(
            "golden file {} unreadable ({e}); run with LATTE_REGEN_GOLDEN=1 to create it",
            path.display()
        )
    });
    assert_eq!(content, expected, "output diverges from golden file {name}");
}
