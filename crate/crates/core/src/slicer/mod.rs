//! Call-graph construction and bidirectional BLE slicing.

mod parse;

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ingest::{contains_token, AppPackage};

pub const DEFAULT_DEPTH_CAP: usize = 8;

pub const DEFAULT_ANCHORS: &[&str] = &[
    "BluetoothAdapter",
    "BluetoothDevice",
    "BluetoothGatt",
    "BluetoothGattCallback",
    "connectGatt",
    "onLeScan",
    "writeCharacteristic",
    "readCharacteristic",
    "setCharacteristicNotification",
];

pub fn default_anchor_tokens() -> BTreeSet<String> {
    DEFAULT_ANCHORS.iter().map(|s| s.to_string()).collect()
}

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum SliceError {
    #[error("parse failure in {path} at line {line}: {reason}")]
    ParseFailure { path: String, line: usize, reason: String },
    #[error("no BLE anchor methods resolved")]
    EmptyAnchors,
    #[error("app has no source units")]
    NoSources,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MethodNode {
    pub qualified_name: String,
    pub body_text: String,
    pub callees: BTreeSet<String>,
    pub is_anchor: bool,
    /// Unresolved call target with no body.
    pub external: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct CallGraph {
    pub nodes: BTreeMap<String, MethodNode>,
    pub edges: BTreeSet<(String, String)>,
}

impl CallGraph {
    /// Builds a graph from `(name, body, callees)` triples; callees without a
    /// declaration become external stubs.
    pub fn from_methods<I, S>(methods: I) -> Self
    where
        I: IntoIterator<Item = (S, String, Vec<S>)>,
        S: Into<String>,
    {
        let mut g = CallGraph::default();
        for (name, body, callees) in methods {
            let name = name.into();
            let callees: BTreeSet<String> = callees.into_iter().map(Into::into).collect();
            let node = g.nodes.entry(name.clone()).or_insert_with(|| MethodNode {
                qualified_name: name.clone(),
                body_text: String::new(),
                callees: BTreeSet::new(),
                is_anchor: false,
                external: false,
            });
            if !node.body_text.is_empty() && !body.is_empty() {
                node.body_text.push('\n');
            }
            node.body_text.push_str(&body);
            node.callees.extend(callees);
        }
        g.close_edges();
        g
    }

    fn close_edges(&mut self) {
        let mut stubs = Vec::new();
        self.edges.clear();
        for node in self.nodes.values() {
            for c in &node.callees {
                self.edges.insert((node.qualified_name.clone(), c.clone()));
                if !self.nodes.contains_key(c) {
                    stubs.push(c.clone());
                }
            }
        }
        for s in stubs {
            self.nodes.entry(s.clone()).or_insert_with(|| MethodNode {
                qualified_name: s,
                body_text: String::new(),
                callees: BTreeSet::new(),
                is_anchor: false,
                external: true,
            });
        }
    }

    pub fn callers(&self) -> BTreeMap<&str, BTreeSet<&str>> {
        let mut rev: BTreeMap<&str, BTreeSet<&str>> = BTreeMap::new();
        for (a, b) in &self.edges {
            rev.entry(b.as_str()).or_default().insert(a.as_str());
        }
        rev
    }
}

#[derive(Debug, Clone, Default)]
pub struct ParseOutcome {
    pub graph: CallGraph,
    pub warnings: Vec<String>,
}

/// Parses every unit into method nodes. With `tolerant`, units that fail to
/// parse are skipped and reported as warnings instead of failing the app.
pub fn parse_sources(app: &AppPackage, tolerant: bool) -> Result<ParseOutcome, SliceError> {
    if app.source_units.is_empty() {
        return Err(SliceError::NoSources);
    }
    let mut warnings = Vec::new();
    let mut raw = Vec::new();
    for unit in &app.source_units {
        match parse::parse_unit(&unit.path, &unit.class_name, &unit.text) {
            Ok(ms) => raw.extend(ms),
            Err(e) if tolerant => warnings.push(e.to_string()),
            Err(e) => return Err(e),
        }
    }

    // simple name -> qualified names, for arity-insensitive resolution
    let mut by_name: BTreeMap<&str, BTreeSet<String>> = BTreeMap::new();
    for m in &raw {
        by_name.entry(m.name.as_str()).or_default().insert(format!("{}.{}", m.class_name, m.name));
    }
    let mut triples = Vec::with_capacity(raw.len());
    for m in &raw {
        let own = format!("{}.{}", m.class_name, m.name);
        let mut callees = Vec::new();
        for (receiver, name) in &m.calls {
            let same_class = format!("{}.{}", m.class_name, name);
            let explicit = receiver.as_ref().map(|r| format!("{r}.{name}"));
            match by_name.get(name.as_str()) {
                Some(cands) if explicit.as_ref().is_some_and(|e| cands.contains(e)) => callees.push(explicit.unwrap()),
                Some(cands) if cands.contains(&same_class) && receiver.is_none() => callees.push(same_class),
                Some(cands) => callees.extend(cands.iter().cloned()),
                None => callees.push(match receiver {
                    Some(r) => format!("{r}.{name}"),
                    None => format!("<external>.{name}"),
                }),
            }
        }
        triples.push((own, m.body.clone(), callees));
    }
    Ok(ParseOutcome { graph: CallGraph::from_methods(triples), warnings })
}

/// Methods whose body mentions any anchor token at identifier boundaries.
/// Matching is textual, so tokens inside string literals count too.
pub fn find_ble_anchors(graph: &CallGraph, anchor_tokens: &BTreeSet<String>) -> BTreeSet<String> {
    graph
        .nodes
        .values()
        .filter(|n| !n.external && anchor_tokens.iter().any(|t| contains_token(&n.body_text, t)))
        .map(|n| n.qualified_name.clone())
        .collect()
}

pub fn mark_anchors(graph: &mut CallGraph, anchors: &BTreeSet<String>) {
    for n in graph.nodes.values_mut() {
        n.is_anchor = anchors.contains(&n.qualified_name);
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SlicedMethod {
    pub name: String,
    pub body: String,
    pub callees: Vec<String>,
    /// Hops from the nearest anchor (callee or caller direction).
    pub distance: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BleSlice {
    pub app_id: String,
    pub anchors: Vec<String>,
    pub methods: Vec<SlicedMethod>,
    pub total_chars: usize,
}

impl BleSlice {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("slice serializes")
    }

    pub fn method_names(&self) -> Vec<&str> {
        self.methods.iter().map(|m| m.name.as_str()).collect()
    }

    /// Slice rendered as source text, one method after another.
    pub fn payload(&self) -> String {
        let mut out = String::new();
        for m in &self.methods {
            out.push_str(&format!("// {}\n{}\n\n", m.name, m.body));
        }
        out
    }
}

fn bfs<'a>(
    starts: &BTreeSet<String>,
    depth_cap: usize,
    next: impl Fn(&str) -> Vec<&'a str>,
) -> BTreeMap<String, usize> {
    let mut dist: BTreeMap<String, usize> = starts.iter().map(|s| (s.clone(), 0)).collect();
    let mut queue: VecDeque<String> = starts.iter().cloned().collect();
    while let Some(u) = queue.pop_front() {
        let d = dist[&u];
        if d >= depth_cap {
            continue;
        }
        for v in next(&u) {
            if !dist.contains_key(v) {
                dist.insert(v.to_string(), d + 1);
                queue.push_back(v.to_string());
            }
        }
    }
    dist
}

/// Anchors plus everything reachable from them through callees and through
/// callers, each within `depth_cap` hops. External stubs are left out.
/// Order: distance layer, then name.
pub fn slice(
    app_id: &str,
    graph: &CallGraph,
    anchors: &BTreeSet<String>,
    depth_cap: usize,
) -> Result<BleSlice, SliceError> {
    let anchors: BTreeSet<String> = anchors.iter().filter(|a| graph.nodes.contains_key(*a)).cloned().collect();
    if anchors.is_empty() {
        return Err(SliceError::EmptyAnchors);
    }
    let depth_cap = depth_cap.max(1);
    let forward = bfs(&anchors, depth_cap, |u| {
        graph.nodes.get(u).map(|n| n.callees.iter().map(String::as_str).collect()).unwrap_or_default()
    });
    let callers = graph.callers();
    let backward =
        bfs(&anchors, depth_cap, |u| callers.get(u).map(|s| s.iter().copied().collect()).unwrap_or_default());
    let mut dist: BTreeMap<String, usize> = forward;
    for (k, d) in backward {
        let e = dist.entry(k).or_insert(d);
        *e = (*e).min(d);
    }
    let mut members: Vec<(usize, String)> = dist
        .into_iter()
        .filter(|(k, _)| graph.nodes.get(k).is_some_and(|n| !n.external))
        .map(|(k, d)| (d, k))
        .collect();
    members.sort();
    let methods: Vec<SlicedMethod> = members
        .into_iter()
        .map(|(d, name)| {
            let node = &graph.nodes[&name];
            SlicedMethod {
                body: node.body_text.clone(),
                callees: node.callees.iter().cloned().collect(),
                name,
                distance: d,
            }
        })
        .collect();
    let total_chars = methods.iter().map(|m| m.body.chars().count()).sum();
    Ok(BleSlice { app_id: app_id.to_string(), anchors: anchors.into_iter().collect(), methods, total_chars })
}

/// Parse, locate anchors and slice in one go.
pub fn slice_app(
    app: &AppPackage,
    anchor_tokens: &BTreeSet<String>,
    depth_cap: usize,
) -> Result<(BleSlice, Vec<String>), SliceError> {
    let ParseOutcome { mut graph, warnings } = parse_sources(app, true)?;
    let anchors = find_ble_anchors(&graph, anchor_tokens);
    mark_anchors(&mut graph, &anchors);
    let s = slice(&app.app_id, &graph, &anchors, depth_cap)?;
    Ok((s, warnings))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::{AppMetadata, SourceUnit};

    fn app(units: &[(&str, &str)]) -> AppPackage {
        AppPackage {
            app_id: "com.test".into(),
            source_units: units.iter().map(|(p, t)| SourceUnit::new(*p, *t)).collect(),
            metadata: AppMetadata::default(),
            manifest_permissions: Default::default(),
        }
    }

    #[test]
    fn single_edge() {
        let g = parse_sources(&app(&[("A.java", "class A { void a() { b(); } void b() {} }")]), false).unwrap().graph;
        assert!(g.edges.contains(&("A.a".into(), "A.b".into())));
        assert_eq!(g.nodes.len(), 2);
    }

    #[test]
    fn external_stub() {
        let g =
            parse_sources(&app(&[("A.java", "class A { void a() { Log.d(\"x\", \"y\"); } }")]), false).unwrap().graph;
        assert!(g.nodes["Log.d"].external);
        assert!(g.edges.contains(&("A.a".into(), "Log.d".into())));
    }

    #[test]
    fn overloads_merge() {
        let src =
            "class A { void b(int x) { p(); } void b(String s) { q(); } void a() { b(1); } void p() {} void q() {} }";
        let g = parse_sources(&app(&[("A.java", src)]), false).unwrap().graph;
        let internal: Vec<_> = g.nodes.values().filter(|n| !n.external).map(|n| n.qualified_name.as_str()).collect();
        assert_eq!(internal, ["A.a", "A.b", "A.p", "A.q"]);
        let b = &g.nodes["A.b"];
        assert!(b.body_text.contains("int x") && b.body_text.contains("String s"));
        assert_eq!(b.callees.iter().map(String::as_str).collect::<Vec<_>>(), ["A.p", "A.q"]);
    }

    #[test]
    fn edge_set_equals_union_of_callees() {
        let src = "class A { void a() { b(); c(); x.y(); } void b() { a(); } void c() {} }";
        let g = parse_sources(&app(&[("A.java", src)]), false).unwrap().graph;
        let union: BTreeSet<(String, String)> = g
            .nodes
            .values()
            .flat_map(|n| n.callees.iter().map(move |c| (n.qualified_name.clone(), c.clone())))
            .collect();
        assert_eq!(union, g.edges);
        for (a, b) in &g.edges {
            assert!(g.nodes.contains_key(a) && g.nodes.contains_key(b));
        }
    }

    #[test]
    fn tolerant_parse_skips_bad_unit() {
        let a = app(&[("A.java", "class A { void a() { gatt.connect(); } }"), ("B.java", "class B { void b( {")]);
        assert!(parse_sources(&a, false).is_err());
        let out = parse_sources(&a, true).unwrap();
        assert_eq!(out.warnings.len(), 1);
        assert!(out.graph.nodes.contains_key("A.a"));
    }

    #[test]
    fn anchors_are_textual() {
        let src = r#"class A {
            void w() { gatt.writeCharacteristic(c); }
            void s() { String n = "BluetoothGatt"; }
            void plain() { int x = 1; }
        }"#;
        let g = parse_sources(&app(&[("A.java", src)]), false).unwrap().graph;
        let got = find_ble_anchors(&g, &default_anchor_tokens());
        assert_eq!(got.into_iter().collect::<Vec<_>>(), ["A.s", "A.w"]);
        let none: BTreeSet<String> = ["connectGatt".to_string()].into();
        assert!(find_ble_anchors(&g, &none).is_empty());
    }

    #[test]
    fn encryption_wrapper_chain() {
        let src = r#"class Lock {
            void onClick(View v) { e(cmd); }
            void e(byte[] c) { w(c); }
            void w(byte[] c) { characteristic.setValue(fmt(c)); gatt.writeCharacteristic(characteristic); }
            byte[] fmt(byte[] c) { return c; }
            void unrelated() { int y = 2; }
        }"#;
        let (s, _) = slice_app(&app(&[("Lock.java", src)]), &default_anchor_tokens(), DEFAULT_DEPTH_CAP).unwrap();
        assert_eq!(s.method_names(), ["Lock.w", "Lock.e", "Lock.fmt", "Lock.onClick"]);
        assert_eq!(s.anchors, ["Lock.w"]);
        assert_eq!(s.total_chars, s.methods.iter().map(|m| m.body.chars().count()).sum::<usize>());
    }

    #[test]
    fn cycle_terminates() {
        let g =
            CallGraph::from_methods(vec![("A.a", "a".to_string(), vec!["A.b"]), ("A.b", "b".to_string(), vec!["A.a"])]);
        let s = slice("x", &g, &["A.a".to_string()].into(), 8).unwrap();
        assert_eq!(s.method_names(), ["A.a", "A.b"]);
    }

    #[test]
    fn empty_anchors() {
        let g = CallGraph::from_methods(vec![("A.a", String::new(), Vec::<&str>::new())]);
        assert_eq!(slice("x", &g, &BTreeSet::new(), 8), Err(SliceError::EmptyAnchors));
    }

    #[test]
    fn depth_cap_limits_reach() {
        let g = CallGraph::from_methods(vec![
            ("A.a", "a".to_string(), vec!["A.b"]),
            ("A.b", "b".to_string(), vec!["A.c"]),
            ("A.c", "c".to_string(), vec![]),
        ]);
        let s = slice("x", &g, &["A.a".to_string()].into(), 1).unwrap();
        assert_eq!(s.method_names(), ["A.a", "A.b"]);
    }
}
