//! `--config` files: top-level keys are global flags, one table per
//! subcommand holds that subcommand's flags. Keys use underscores.
//!
//! ```toml
//! seed = 7
//! out_dir = "runs/a"
//!
//! [sample]
//! steps = 40
//! replicas = 4
//! ```

use std::fs;
use std::path::Path;

use serde::de::DeserializeOwned;

use crate::args::GlobalArgs;
use crate::{CliError, CliResult};

const SECTIONS: [&str; 6] = ["prior", "sample", "train-toy", "score", "confbench", "attn-bench"];

#[derive(Debug, Clone, Default)]
pub struct ConfigFile {
    pub global: GlobalArgs,
    sections: toml::Table,
}

impl ConfigFile {
    pub fn read(path: &Path) -> CliResult<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::Input(format!("cannot read config {}: {e}", path.display())))?;
        let bad = |m: String| CliError::Input(format!("config {}: {m}", path.display()));
        let mut table: toml::Table = text.parse().map_err(|e: toml::de::Error| bad(e.to_string()))?;
        let mut sections = toml::Table::new();
        for name in SECTIONS {
            if let Some(v) = table.remove(name) {
                if !v.is_table() {
                    return Err(bad(format!("[{name}] must be a table")));
                }
                sections.insert(name.into(), v);
            }
        }
        let global: GlobalArgs = toml::Value::Table(table).try_into().map_err(|e: toml::de::Error| bad(e.to_string()))?;
        Ok(Self { global, sections })
    }

    /// Values for one subcommand, all unset when the table is absent.
    pub fn section<T: DeserializeOwned + Default>(&self, name: &str) -> CliResult<T> {
        match self.sections.get(name) {
            Some(v) => v
                .clone()
                .try_into()
                .map_err(|e: toml::de::Error| CliError::Input(format!("config [{name}]: {e}"))),
            None => Ok(T::default()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::args::SampleArgs;

    #[test]
    fn globals_and_sections_split() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.toml");
        fs::write(&path, "seed = 7\n[sample]\nsteps = 12\nrank = \"ligand:L\"\n").unwrap();
        let c = ConfigFile::read(&path).unwrap();
        assert_eq!(c.global.seed, Some(7));
        let s: SampleArgs = c.section("sample").unwrap();
        assert_eq!(s.steps, Some(12));
        assert_eq!(s.rank.as_deref(), Some("ligand:L"));
        let p: crate::args::PriorArgs = c.section("prior").unwrap();
        assert!(p.steps.is_none());
    }

    #[test]
    fn unknown_keys_are_errors() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.toml");
        fs::write(&path, "[sample]\nstepz = 12\n").unwrap();
        let c = ConfigFile::read(&path).unwrap();
        assert!(c.section::<SampleArgs>("sample").is_err());
        fs::write(&path, "sead = 1\n").unwrap();
        assert!(ConfigFile::read(&path).is_err());
    }
}
