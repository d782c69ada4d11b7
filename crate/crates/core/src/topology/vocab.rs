//! Residue and element vocabularies used for one-hot featurisation.

pub const AMINO_ACIDS: [&str; 20] = [
    "ALA", "ARG", "ASN", "ASP", "CYS", "GLN", "GLU", "GLY", "HIS", "ILE", "LEU", "LYS", "MET",
    "PHE", "PRO", "SER", "THR", "TRP", "TYR", "VAL",
];
pub const RIBONUCLEOTIDES: [&str; 4] = ["A", "C", "G", "U"];
pub const DEOXYRIBONUCLEOTIDES: [&str; 4] = ["DA", "DC", "DG", "DT"];

/// 20 amino acids + 4 ribonucleotides + 4 deoxyribonucleotides + "other".
pub const RESIDUE_VOCAB_SIZE: usize = 29;
pub const RESIDUE_OTHER: usize = 28;

pub fn residue_index(name: &str) -> usize {
    if let Some(i) = AMINO_ACIDS.iter().position(|r| *r == name) {
        return i;
    }
    if let Some(i) = RIBONUCLEOTIDES.iter().position(|r| *r == name) {
        return 20 + i;
    }
    if let Some(i) = DEOXYRIBONUCLEOTIDES.iter().position(|r| *r == name) {
        return 24 + i;
    }
    RESIDUE_OTHER
}

pub fn one_letter(name: &str) -> char {
    const LETTERS: &[u8; 20] = b"ARNDCQEGHILKMFPSTWYV";
    if let Some(i) = AMINO_ACIDS.iter().position(|r| *r == name) {
        return LETTERS[i] as char;
    }
    match name {
        "A" | "DA" => 'A',
        "C" | "DC" => 'C',
        "G" | "DG" => 'G',
        "U" => 'U',
        "DT" => 'T',
        _ => 'X',
    }
}

const HEAVY_ELEMENTS: &[&str] = &[
    "He", "Li", "Be", "B", "C", "N", "O", "F", "Ne", "Na", "Mg", "Al", "Si", "P", "S", "Cl", "Ar",
    "K", "Ca", "Sc", "Ti", "V", "Cr", "Mn", "Fe", "Co", "Ni", "Cu", "Zn", "Ga", "Ge", "As", "Se",
    "Br", "Kr", "Rb", "Sr", "Y", "Zr", "Nb", "Mo", "Tc", "Ru", "Rh", "Pd", "Ag", "Cd", "In", "Sn",
    "Sb", "Te", "I", "Xe", "Cs", "Ba", "La", "Ce", "Pr", "Nd", "Pm", "Sm", "Eu", "Gd", "Tb", "Dy",
    "Ho", "Er", "Tm", "Yb", "Lu", "Hf", "Ta", "W", "Re", "Os", "Ir", "Pt", "Au", "Hg", "Tl", "Pb",
    "Bi", "Po", "At", "Rn", "Fr", "Ra", "Ac", "Th", "Pa", "U", "Np", "Pu",
];

/// Normalises an element symbol ("CL" -> "Cl") and checks it is a heavy element.
pub fn normalize_element(symbol: &str) -> Option<String> {
    let s = symbol.trim();
    let mut chars = s.chars();
    let first = chars.next()?.to_ascii_uppercase();
    let rest: String = chars.map(|c| c.to_ascii_lowercase()).collect();
    let norm = format!("{first}{rest}");
    HEAVY_ELEMENTS.contains(&norm.as_str()).then_some(norm)
}

/// C, N, O, S, P, halogen, metal/other.
pub const ELEMENT_VOCAB_SIZE: usize = 7;

pub fn element_index(element: &str) -> usize {
    match element {
        "C" => 0,
        "N" => 1,
        "O" => 2,
        "S" => 3,
        "P" => 4,
        "F" | "Cl" | "Br" | "I" => 5,
        _ => 6,
    }
}
