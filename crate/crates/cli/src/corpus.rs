//! The fixture corpus: plans with known-correct verdicts.

use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use dpaudit_core::verifier::{Code, Report, Verdict};
use serde::Deserialize;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Expected {
    Pass,
    Codes(BTreeSet<Code>),
}

impl Expected {
    pub fn matches(&self, report: &Report) -> bool {
        match self {
            Expected::Pass => report.verdict == Verdict::Pass,
            Expected::Codes(codes) => report.codes() == *codes,
        }
    }
}

#[derive(Debug, Clone)]
pub struct FixtureCase {
    pub name: String,
    pub plan: PathBuf,
    pub dataset: Option<PathBuf>,
    pub expected: Expected,
    pub note: String,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawManifest {
    cases: Vec<RawCase>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawCase {
    name: String,
    plan: String,
    dataset: Option<String>,
    expected: RawExpected,
    note: String,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawExpected {
    verdict: Option<String>,
    codes: Option<Vec<String>>,
}

/// The corpus shipped with the repository.
pub fn default_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

/// Reads `corpus.json` from `dir`; paths in the manifest are relative to it.
pub fn load(dir: &Path) -> Result<Vec<FixtureCase>> {
    let path = dir.join("corpus.json");
    let text = fs::read_to_string(&path).with_context(|| format!("cannot read {}", path.display()))?;
    let raw: RawManifest = serde_json::from_str(&text).with_context(|| format!("{} is malformed", path.display()))?;
    raw.cases
        .into_iter()
        .map(|c| {
            let expected = match (c.expected.verdict.as_deref(), c.expected.codes) {
                (Some("pass"), None) => Expected::Pass,
                (None, Some(codes)) => {
                    let parsed = codes
                        .iter()
                        .map(|s| Code::parse(s).with_context(|| format!("{}: unknown code `{s}`", c.name)))
                        .collect::<Result<BTreeSet<_>>>()?;
                    if parsed.is_empty() {
                        bail!("{}: an expected code set must not be empty; use verdict pass", c.name);
                    }
                    Expected::Codes(parsed)
                }
                _ => bail!("{}: expected must be either {{\"verdict\": \"pass\"}} or {{\"codes\": [...]}}", c.name),
            };
            Ok(FixtureCase {
                plan: dir.join(&c.plan),
                dataset: c.dataset.map(|d| dir.join(d)),
                name: c.name,
                expected,
                note: c.note,
            })
        })
        .collect()
}
