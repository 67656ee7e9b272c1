//! Random call graphs and a matrix-based reachability oracle.

#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};

use bleproof_core::ingest::{AppPackage, SourceUnit};
use bleproof_core::slicer::{slice, CallGraph};
use rand::rngs::StdRng;
use rand::Rng;

pub struct RandomGraph {
    pub graph: CallGraph,
    pub anchors: BTreeSet<String>,
    /// Adjacency over declared and stub nodes, by index.
    pub adj: Vec<Vec<bool>>,
    pub names: Vec<String>,
    pub external: Vec<bool>,
}

pub fn random_graph(rng: &mut StdRng, max_nodes: usize) -> RandomGraph {
    let n = rng.gen_range(2..=max_nodes);
    let stubs = rng.gen_range(0..=3).min(max_nodes - n);
    let names: Vec<String> =
        (0..n).map(|i| format!("C{}.m{i}", i % 4)).chain((0..stubs).map(|j| format!("Ext.x{j}"))).collect();
    let total = names.len();
    let density = rng.gen_range(0.02..0.15);
    let mut adj = vec![vec![false; total]; total];
    let mut methods = Vec::new();
    for i in 0..n {
        let mut callees = Vec::new();
        for (j, row) in names.iter().enumerate() {
            if rng.gen_bool(density) {
                adj[i][j] = true;
                callees.push(row.clone());
            }
        }
        methods.push((names[i].clone(), format!("body{i}"), callees));
    }
    let graph = CallGraph::from_methods(methods);
    let k = rng.gen_range(1..=3);
    let anchors = (0..k).map(|_| names[rng.gen_range(0..n)].clone()).collect();
    let external = (0..total).map(|i| i >= n).collect();
    RandomGraph { graph, anchors, adj, names, external }
}

/// Hop distances by Bellman-Ford relaxation over the adjacency matrix, then
/// the declared members within `cap`.
pub fn brute_force(g: &RandomGraph, cap: usize) -> BTreeMap<String, usize> {
    let n = g.names.len();
    // forward reach follows callees only, backward reach callers only
    let fwd = relax(n, &g.anchors, &g.names, |u, v| g.adj[u][v]);
    let bwd = relax(n, &g.anchors, &g.names, |u, v| g.adj[v][u]);
    (0..n)
        .map(|i| (i, fwd[i].min(bwd[i])))
        .filter(|&(i, d)| d <= cap && !g.external[i])
        .map(|(i, d)| (g.names[i].clone(), d))
        .collect()
}

fn relax(n: usize, anchors: &BTreeSet<String>, names: &[String], edge: impl Fn(usize, usize) -> bool) -> Vec<usize> {
    let mut d: Vec<usize> = names.iter().map(|s| if anchors.contains(s) { 0 } else { usize::MAX }).collect();
    loop {
        let mut changed = false;
        for u in 0..n {
            if d[u] == usize::MAX {
                continue;
            }
            for v in 0..n {
                if edge(u, v) && d[u] + 1 < d[v] {
                    d[v] = d[u] + 1;
                    changed = true;
                }
            }
        }
        if !changed {
            return d;
        }
    }
}

/// Slice members with their distances, as the slicer reports them.
pub fn sliced(g: &RandomGraph, cap: usize) -> BTreeMap<String, usize> {
    let s = slice("app", &g.graph, &g.anchors, cap).unwrap();
    s.methods.iter().map(|m| (m.name.clone(), m.distance)).collect()
}

/// Three layers: UI handler, protocol method, and a channel method that both
/// encrypts and writes.
pub const WRAPPER_SOURCE: &str = r#"package com.acme.lock;

public class LockActivity {
    private SecureChannel channel;

    public void onUnlockPressed(View v) {
        sendCommand(new byte[] { 1 });
    }

    private void sendCommand(byte[] cmd) {
        channel.encryptAndWrite(cmd);
    }

    private void showToast(String s) {
        Toast.makeText(this, s, 0).show();
    }
}

class SecureChannel {
    private BluetoothGatt gatt;
    private BluetoothGattCharacteristic characteristic;

    void encryptAndWrite(byte[] data) {
        characteristic.setValue(encrypt(data));
        gatt.writeCharacteristic(characteristic);
    }

    private byte[] encrypt(byte[] data) {
        return aes.doFinal(data);
    }
}
"#;

pub fn wrapper_app() -> AppPackage {
    AppPackage {
        app_id: "com.acme.lock".into(),
        source_units: vec![SourceUnit::new("LockActivity.java", WRAPPER_SOURCE)],
        metadata: Default::default(),
        manifest_permissions: BTreeSet::new(),
    }
}

pub const WRAPPER_METHODS: [&str; 4] = [
    "SecureChannel.encryptAndWrite",
    "LockActivity.sendCommand",
    "SecureChannel.encrypt",
    "LockActivity.onUnlockPressed",
];
