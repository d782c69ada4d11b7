use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::topology::{MolecularSystem, TopologyDoc, TOPOLOGY_SCHEMA_VERSION};

/// Parse and validate a topology document. `path` is only used in error
/// messages.
pub fn parse_topology(text: &str, path: &Path) -> Result<MolecularSystem> {
    let doc: TopologyDoc = serde_json::from_str(text)
        .map_err(|e| Error::parse(path, format!("line {} column {}: {e}", e.line(), e.column())))?;
    if doc.version != TOPOLOGY_SCHEMA_VERSION {
        return Err(Error::parse(
            path,
            format!("unsupported schema version {} (expected {TOPOLOGY_SCHEMA_VERSION})", doc.version),
        ));
    }
    MolecularSystem::from_doc(&doc).map_err(|e| match e {
        Error::Topology(m) => Error::parse(path, m),
        other => other,
    })
}

pub fn read_topology(path: &Path) -> Result<MolecularSystem> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_topology(&text, path)
}

pub fn topology_to_string(system: &MolecularSystem) -> String {
    let mut s = serde_json::to_string_pretty(&system.to_doc()).expect("topology serialises");
    s.push('\n');
    s
}

pub fn write_topology(path: &Path, system: &MolecularSystem) -> Result<()> {
    fs::write(path, topology_to_string(system)).map_err(|e| Error::io(path, e))
}
