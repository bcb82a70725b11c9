#![allow(dead_code)]

use std::path::PathBuf;

use dpaudit_core::executor::{load_dataset, Dataset};
use dpaudit_core::plan::{parse_plan, AnalysisPlan};

pub fn fixtures() -> PathBuf {
    PathBuf::from(concat!(env!("CARGO_MANIFEST_DIR"), "/../../fixtures"))
}

pub fn plan(name: &str) -> AnalysisPlan {
    let path = fixtures().join("plans").join(format!("{name}.json"));
    let text = std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
    parse_plan(&text).unwrap_or_else(|e| panic!("{name}: {e}"))
}

pub fn dataset(plan: &AnalysisPlan, file: &str) -> Dataset {
    load_dataset(fixtures().join("data").join(file), &plan.schema, &plan.privacy.unit_column).unwrap()
}

pub fn plan_names() -> Vec<String> {
    let mut names: Vec<String> = std::fs::read_dir(fixtures().join("plans"))
        .unwrap()
        .map(|e| e.unwrap().path().file_stem().unwrap().to_string_lossy().into_owned())
        .collect();
    names.sort();
    names
}
