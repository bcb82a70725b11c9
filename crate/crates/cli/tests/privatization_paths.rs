//! Cross-checks partial-privatization findings against an exhaustive
//! enumeration of every source-to-release path.

mod common;

use std::collections::{BTreeMap, BTreeSet};

use dpaudit_core::plan::{AnalysisPlan, Expr, NodeKind};
use dpaudit_core::verifier::{verify, Code, VerifyOptions};

/// Releases with at least one path from the source that avoids every noise node.
fn releases_with_clear_path(plan: &AnalysisPlan) -> BTreeSet<String> {
    let mut children: BTreeMap<&str, Vec<&str>> = BTreeMap::new();
    for e in &plan.edges {
        children.entry(e.parent.as_str()).or_default().push(e.child.as_str());
    }
    let is_noise = |id: &str| matches!(plan.node(id).map(|n| &n.kind), Some(NodeKind::Noise(_)));
    let is_release = |id: &str| matches!(plan.node(id).map(|n| &n.kind), Some(NodeKind::Release));
    let mut found = BTreeSet::new();
    let mut stack: Vec<Vec<&str>> = vec![vec![plan.source_id().unwrap()]];
    while let Some(path) = stack.pop() {
        let last = *path.last().unwrap();
        if is_release(last) {
            found.insert(last.to_string());
        }
        for &next in children.get(last).into_iter().flatten() {
            if !is_noise(next) && !path.contains(&next) {
                let mut longer = path.clone();
                longer.push(next);
                stack.push(longer);
            }
        }
    }
    found
}

fn flagged_releases(plan: &AnalysisPlan) -> BTreeSet<String> {
    let report = verify(plan, &VerifyOptions::default()).unwrap();
    report.findings.iter().filter(|f| f.code == Code::M3).map(|f| f.nodes[0].clone()).collect()
}

#[test]
fn findings_match_path_enumeration_on_the_corpus() {
    for case in dpaudit_cli::corpus::load(&dpaudit_cli::corpus::default_dir()).unwrap() {
        let plan = dpaudit_cli::load_plan(&case.plan).unwrap();
        assert_eq!(flagged_releases(&plan), releases_with_clear_path(&plan), "{}", case.name);
    }
}

fn substitute(expr: &mut Expr, from: &str, to: &str) {
    match expr {
        Expr::Node(id) if id == from => *id = to.to_string(),
        Expr::Op(_, args) => args.iter_mut().for_each(|a| substitute(a, from, to)),
        _ => {}
    }
}

/// `plan` with noise node `noise` removed and its consumers reading the
/// noise node's input directly.
fn bypass(plan: &AnalysisPlan, noise: &str) -> AnalysisPlan {
    let input = plan.data_input(noise).unwrap().to_string();
    let mut out = plan.clone();
    out.nodes.retain(|n| n.id != noise);
    out.edges.retain(|e| e.child != noise);
    for e in &mut out.edges {
        if e.parent == noise {
            e.parent = input.clone();
        }
    }
    for n in &mut out.nodes {
        match &mut n.kind {
            NodeKind::PostProcess(pp) => substitute(&mut pp.expr, noise, &input),
            NodeKind::Hyperparameter { expr } => substitute(expr, noise, &input),
            _ => {}
        }
    }
    out
}

#[test]
fn findings_match_path_enumeration_after_bypassing_noise() {
    // A bypassed noise node that only fed a hyperparameter exposes nothing
    // directly; every other one does.
    let (mut checked, mut exposed) = (0, 0);
    for name in ["telemetry-average-repaired", "telemetry-zscore-repaired", "restaurant-ratio", "adaptive-clip", "per-day-split"] {
        let base = dpaudit_cli::load_plan(&common::plan_path(name)).unwrap();
        for noise in base.noise_ids() {
            let plan = bypass(&base, noise);
            let errors = dpaudit_core::plan::validate_plan(&plan);
            assert!(errors.is_empty(), "{name} without {noise}: {errors:?}");
            let expected = releases_with_clear_path(&plan);
            assert_eq!(flagged_releases(&plan), expected, "{name} without {noise}");
            if !expected.is_empty() {
                exposed += 1;
            }
            checked += 1;
        }
    }
    assert!(checked >= 40);
    assert_eq!(exposed, checked - 1);
}
