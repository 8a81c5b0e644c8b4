//! Graphviz DOT rendering of a single tree.

use std::fmt::Write;

use crate::dataset::{FeatureKind, LinearFeatureSet, Schema};
use crate::splitter::SplitRule;
use crate::tree::TreeNode;

fn escape(s: &str) -> String {
    s.replace('\\', "\\\\").replace('"', "\\\"")
}

fn split_label(schema: &Schema, feature: usize, rule: &SplitRule) -> String {
    let spec = &schema.features[feature];
    match (rule, &spec.kind) {
        (SplitRule::Numeric { threshold }, _) => format!("{} < {:.3}", spec.name, threshold),
        (SplitRule::Categorical { level }, FeatureKind::Categorical { levels }) => {
            let label = levels.get(*level as usize).map_or("?", String::as_str);
            format!("{} == {}", spec.name, label)
        }
        (SplitRule::Categorical { level }, FeatureKind::Numeric) => format!("{} == #{}", spec.name, level),
    }
}

/// Renders `tree` as a directed graph. Internal nodes show their test, with
/// the left (test true) edge labeled "yes"; leaves show the number of rows
/// behind the fit, the intercept and each slope to three decimals.
pub fn export_dot(tree: &TreeNode, schema: &Schema, lin: &LinearFeatureSet) -> String {
    let mut out = String::from("digraph tree {\n  node [shape=box, fontname=\"Helvetica\"];\n");
    let mut next = 0usize;
    emit(tree, schema, lin, &mut next, &mut out);
    out.push_str("}\n");
    out
}

fn emit(node: &TreeNode, schema: &Schema, lin: &LinearFeatureSet, next: &mut usize, out: &mut String) -> usize {
    let id = *next;
    *next += 1;
    match node {
        TreeNode::Leaf(leaf) => {
            let mut label = format!("n = {}\\nintercept = {:.3}", leaf.n_aggregation, leaf.model.intercept);
            for (b, &f) in leaf.model.beta.iter().zip(lin.indices()) {
                let _ = write!(label, "\\n{} = {:.3}", escape(&schema.features[f].name), b);
            }
            let _ = writeln!(out, "  n{id} [label=\"{label}\", style=rounded];");
        }
        TreeNode::Internal { split, left, right, .. } => {
            let label = escape(&split_label(schema, split.feature, &split.rule));
            let _ = writeln!(out, "  n{id} [label=\"{label}\"];");
            let l = emit(left, schema, lin, next, out);
            let r = emit(right, schema, lin, next, out);
            let _ = writeln!(out, "  n{id} -> n{l} [label=\"yes\"];");
            let _ = writeln!(out, "  n{id} -> n{r} [label=\"no\"];");
        }
    }
    id
}
