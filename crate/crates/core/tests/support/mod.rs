pub mod gen;
pub mod graphs;
pub mod oracle;
pub mod repairs;
