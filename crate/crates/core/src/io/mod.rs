//! Readers and writers: topology JSON, PDB coordinates, linkage manifests
//! and metric reports.

mod manifest;
mod pdb;
mod report;
mod topology;

use std::path::{Path, PathBuf};

pub use manifest::{read_manifest, LinkageEntry, LinkageManifest, StructurePaths, MANIFEST_VERSION};
pub use pdb::{parse_pdb, read_pdb, to_pdb_string, write_pdb};
pub use report::{write_csv, write_json};
pub use topology::{parse_topology, read_topology, topology_to_string, write_topology};

use crate::error::{Error, Result};
use crate::geometry::Conformation;
use crate::topology::MolecularSystem;

/// A system with one set of coordinates and where it came from.
#[derive(Debug, Clone)]
pub struct StructureRecord {
    pub system: MolecularSystem,
    pub coords: Conformation,
    pub source: Option<PathBuf>,
}

impl StructureRecord {
    pub fn new(system: MolecularSystem, coords: Conformation) -> Result<Self> {
        if coords.len() != system.n_atoms() {
            return Err(Error::ShapeMismatch {
                expected: system.n_atoms(),
                got: coords.len(),
            });
        }
        Ok(Self {
            system,
            coords,
            source: None,
        })
    }

    /// Topology JSON plus matching PDB coordinates.
    pub fn load(topology: &Path, pdb: &Path) -> Result<Self> {
        let system = read_topology(topology)?;
        let coords = read_pdb(pdb, &system)?;
        Ok(Self {
            system,
            coords,
            source: Some(pdb.to_path_buf()),
        })
    }
}
