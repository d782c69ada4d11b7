use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::StructureRecord;
use crate::confbench::{ConfBenchLinkage, ConformationLabel};
use crate::error::{Error, Result};

pub const MANIFEST_VERSION: u32 = 1;

/// Topology JSON and PDB file of one structure; relative paths resolve
/// against the manifest's directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StructurePaths {
    pub topology: PathBuf,
    pub coords: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinkageEntry {
    pub id: String,
    pub apo: StructurePaths,
    pub holo: StructurePaths,
    pub query: StructurePaths,
    pub ligand_chain: String,
    pub label: ConformationLabel,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinkageManifest {
    #[serde(default = "default_version")]
    pub version: u32,
    pub linkages: Vec<LinkageEntry>,
}

fn default_version() -> u32 {
    MANIFEST_VERSION
}

impl LinkageEntry {
    pub fn load(&self, base: &Path) -> Result<ConfBenchLinkage> {
        let load = |s: &StructurePaths| StructureRecord::load(&base.join(&s.topology), &base.join(&s.coords));
        Ok(ConfBenchLinkage {
            apo: load(&self.apo)?,
            holo: load(&self.holo)?,
            query: load(&self.query)?,
            ligand_chain: self.ligand_chain.clone(),
            label: self.label,
        })
    }
}

/// The manifest and the directory its relative paths resolve against.
pub fn read_manifest(path: &Path) -> Result<(LinkageManifest, PathBuf)> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let m: LinkageManifest = serde_json::from_str(&text)
        .map_err(|e| Error::parse(path, format!("line {} column {}: {e}", e.line(), e.column())))?;
    if m.version != MANIFEST_VERSION {
        return Err(Error::parse(path, format!("unsupported manifest version {}", m.version)));
    }
    let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
    Ok((m, base))
}
