//! Minimal reader for the ATOM/HETATM records of PDB files.

use std::io::BufRead;

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct Atom {
    pub element: String,
    /// Cartesian coordinates in Ångström.
    pub position: [f64; 3],
    pub occupancy: f64,
}

impl Atom {
    /// Atomic number of the element, if known.
    pub fn atomic_number(&self) -> Option<u32> {
        atomic_number(&self.element)
    }
}

const ELEMENTS: [&str; 54] = [
    "H", "HE", "LI", "BE", "B", "C", "N", "O", "F", "NE", "NA", "MG", "AL", "SI", "P", "S", "CL",
    "AR", "K", "CA", "SC", "TI", "V", "CR", "MN", "FE", "CO", "NI", "CU", "ZN", "GA", "GE", "AS",
    "SE", "BR", "KR", "RB", "SR", "Y", "ZR", "NB", "MO", "TC", "RU", "RH", "PD", "AG", "CD", "IN",
    "SN", "SB", "TE", "I", "XE",
];

/// Atomic number for symbols up to xenon, plus deuterium. Case-insensitive.
pub fn atomic_number(symbol: &str) -> Option<u32> {
    let s = symbol.trim().to_ascii_uppercase();
    if s == "D" {
        return Some(1);
    }
    ELEMENTS.iter().position(|&e| e == s).map(|k| k as u32 + 1)
}

/// Byte columns `start..=end` (1-based, inclusive), clipped to the line.
fn columns(line: &str, start: usize, end: usize) -> &str {
    let bytes = line.as_bytes();
    if bytes.len() < start {
        return "";
    }
    let end = end.min(bytes.len());
    line.get(start - 1..end).unwrap_or("")
}

fn element_from_name(name: &str) -> String {
    // names are left-padded for one-letter elements, e.g. " CA " is a carbon
    let bytes = name.as_bytes();
    let first_alpha = |s: &str| s.chars().find(|c| c.is_ascii_alphabetic()).map(String::from);
    if bytes.first().is_some_and(|b| b.is_ascii_alphabetic()) {
        let two = name.get(..2).unwrap_or(name);
        if two.chars().all(|c| c.is_ascii_alphabetic()) && atomic_number(two).is_some() {
            return two.to_ascii_uppercase();
        }
    }
    first_alpha(name).unwrap_or_default().to_ascii_uppercase()
}

fn parse_field(line: &str, start: usize, end: usize, what: &str, lineno: usize) -> Result<f64> {
    let raw = columns(line, start, end).trim();
    raw.parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| Error::Parse { line: lineno, message: format!("bad {what} field {raw:?}") })
}

/// Parses ATOM and HETATM records in file order. Other records are skipped.
pub fn parse_pdb<R: BufRead>(reader: R) -> Result<Vec<Atom>> {
    let mut atoms = Vec::new();
    for (k, line) in reader.lines().enumerate() {
        let line = line?;
        let lineno = k + 1;
        let record = columns(&line, 1, 6).trim_end();
        if record != "ATOM" && record != "HETATM" {
            continue;
        }
        let x = parse_field(&line, 31, 38, "x", lineno)?;
        let y = parse_field(&line, 39, 46, "y", lineno)?;
        let z = parse_field(&line, 47, 54, "z", lineno)?;
        let occ_raw = columns(&line, 55, 60).trim();
        let occupancy = if occ_raw.is_empty() {
            1.0
        } else {
            parse_field(&line, 55, 60, "occupancy", lineno)?
        };
        let mut element = columns(&line, 77, 78).trim().to_ascii_uppercase();
        if element.is_empty() {
            element = element_from_name(columns(&line, 13, 16));
        }
        if element.is_empty() {
            return Err(Error::Parse { line: lineno, message: "no element symbol".into() });
        }
        atoms.push(Atom { element, position: [x, y, z], occupancy });
    }
    if atoms.is_empty() {
        return Err(Error::EmptyMolecule);
    }
    Ok(atoms)
}

/// Bundled caffeine model: the 14 heavy atoms of C8H10N4O2.
pub const CAFFEINE_PDB: &str = include_str!("../../data/caffeine.pdb");

pub fn caffeine() -> Vec<Atom> {
    parse_pdb(CAFFEINE_PDB.as_bytes()).expect("bundled caffeine parses")
}
