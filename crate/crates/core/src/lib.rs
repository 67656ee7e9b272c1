//! Pipeline building blocks: ingest decompiled BLE apps, slice the BLE-relevant
//! call graph, translate slices into a restricted applied pi-calculus model,
//! verify secrecy/freshness/authentication and classify the resulting attacks.

pub mod config;
pub mod ingest;
pub mod pvlang;
pub mod report;
pub mod slicer;
pub mod translator;
pub mod verifier;
