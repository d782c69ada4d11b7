//! Fixed-column PDB `ATOM`/`HETATM` records (see `docs/pdb.md`).
//!
//! Atoms are matched on (chain id, residue number, atom name) where the
//! residue number is the residue ordinal within its chain plus one.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::geometry::{Conformation, Provenance, Vec3};
use crate::topology::{MolecularSystem, MoleculeClass};

/// PDB atom-name column: names shorter than four characters with a
/// one-letter element start one column in (" CA ").
fn name_field(name: &str, element: &str) -> String {
    if name.len() < 4 && element.len() == 1 {
        format!(" {name:<3}")
    } else {
        format!("{name:<4}")
    }
}

pub fn to_pdb_string(system: &MolecularSystem, coords: &[Vec3]) -> Result<String> {
    if coords.len() != system.n_atoms() {
        return Err(Error::ShapeMismatch {
            expected: system.n_atoms(),
            got: coords.len(),
        });
    }
    let mut out = String::new();
    let mut serial = 0usize;
    for chain in system.chains() {
        if chain.id.chars().count() != 1 {
            return Err(Error::InvalidParameter(format!(
                "chain id '{}' does not fit the one-character PDB column",
                chain.id
            )));
        }
        let record = if chain.class == MoleculeClass::Ligand { "HETATM" } else { "ATOM" };
        let mut last = None;
        for (ri, res) in chain.residues.iter().enumerate() {
            if res.name.len() > 3 {
                return Err(Error::InvalidParameter(format!("residue name '{}' is longer than 3", res.name)));
            }
            for i in res.atoms.clone() {
                let a = system.atom(i);
                if a.name.len() > 4 {
                    return Err(Error::InvalidParameter(format!("atom name '{}' is longer than 4", a.name)));
                }
                let p = coords[i];
                if p.iter().any(|v| !v.is_finite() || v.abs() >= 1e7) {
                    return Err(Error::InvalidParameter(format!("atom {i} has coordinates outside the PDB range")));
                }
                serial += 1;
                writeln!(
                    out,
                    "{record:<6}{:>5} {}{}{:>3} {}{:>4}{}   {:>8.3}{:>8.3}{:>8.3}{:>6.2}{:>6.2}          {:>2}  ",
                    serial % 100_000,
                    name_field(&a.name, &a.element),
                    ' ',
                    res.name,
                    chain.id,
                    ri + 1,
                    ' ',
                    p.x,
                    p.y,
                    p.z,
                    1.0,
                    0.0,
                    a.element.to_uppercase(),
                )
                .expect("writing to a String");
                last = Some((res.name.clone(), ri + 1));
            }
        }
        if let Some((name, seq)) = last {
            serial += 1;
            writeln!(out, "TER   {:>5}      {:>3} {}{:>4}", serial % 100_000, name, chain.id, seq).expect("writing to a String");
        }
    }
    out.push_str("END\n");
    Ok(out)
}

pub fn write_pdb(system: &MolecularSystem, coords: &[Vec3], path: &Path) -> Result<()> {
    let text = to_pdb_string(system, coords)?;
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn field<'a>(line: &'a str, range: std::ops::Range<usize>) -> &'a str {
    line.get(range.start..range.end.min(line.len())).unwrap_or("")
}

/// Coordinates for every atom of `system` from PDB text. Only the first
/// model and the first alternate location are read.
pub fn parse_pdb(text: &str, system: &MolecularSystem, path: &Path) -> Result<Conformation> {
    let mut index: HashMap<(String, usize, String), usize> = HashMap::new();
    for (i, a) in system.atoms().iter().enumerate() {
        let chain = &system.chain(a.chain_index).id;
        index.insert((chain.clone(), a.residue_index + 1, a.name.clone()), i);
    }
    let mut coords: Vec<Option<Vec3>> = vec![None; system.n_atoms()];
    for (ln, line) in text.lines().enumerate() {
        let bad = |m: String| Error::parse(path, format!("line {}: {m}", ln + 1));
        if line.starts_with("ENDMDL") {
            break;
        }
        if !(line.starts_with("ATOM  ") || line.starts_with("HETATM")) {
            continue;
        }
        if !line.is_char_boundary(54.min(line.len())) || line.len() < 54 {
            return Err(bad("coordinate record shorter than 54 columns".into()));
        }
        let alt = field(line, 16..17);
        if !(alt.trim().is_empty() || alt == "A") {
            continue;
        }
        let name = field(line, 12..16).trim().to_string();
        let chain = field(line, 21..22).to_string();
        let seq: usize = field(line, 22..26)
            .trim()
            .parse()
            .map_err(|_| bad(format!("bad residue number '{}'", field(line, 22..26))))?;
        let mut xyz = [0.0; 3];
        for (k, r) in [30..38, 38..46, 46..54].into_iter().enumerate() {
            let s = field(line, r);
            xyz[k] = s.trim().parse().map_err(|_| bad(format!("bad coordinate '{s}'")))?;
        }
        let key = (chain, seq, name);
        let Some(&i) = index.get(&key) else {
            return Err(bad(format!("unknown atom {}:{}:{}", key.0, key.1, key.2)));
        };
        if coords[i].is_some() {
            return Err(bad(format!("duplicate atom {}:{}:{}", key.0, key.1, key.2)));
        }
        coords[i] = Some(Vec3::new(xyz[0], xyz[1], xyz[2]));
    }
    let missing: Vec<String> = coords
        .iter()
        .enumerate()
        .filter(|(_, c)| c.is_none())
        .map(|(i, _)| {
            let a = system.atom(i);
            format!("{}:{}:{}", system.chain(a.chain_index).id, a.residue_index + 1, a.name)
        })
        .collect();
    if !missing.is_empty() {
        return Err(Error::MissingAtoms {
            path: path.to_path_buf(),
            atoms: missing,
        });
    }
    Ok(Conformation::new(coords.into_iter().flatten().collect(), Provenance::Reference))
}

pub fn read_pdb(path: &Path, system: &MolecularSystem) -> Result<Conformation> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let text = String::from_utf8_lossy(&bytes);
    parse_pdb(&text, system, path)
}
