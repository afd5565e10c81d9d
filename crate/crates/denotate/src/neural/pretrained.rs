//! Fixed pretrained word vectors in the standard text format: one word per
//! line followed by its whitespace-separated components.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

/// Immutable word-vector table. Entity tokens and out-of-table words map to
/// the zero vector downstream.
#[derive(Debug, Clone, PartialEq)]
pub struct PretrainedTable {
    dim: usize,
    vectors: BTreeMap<String, Vec<f64>>,
}

impl PretrainedTable {
    pub fn from_entries(entries: Vec<(String, Vec<f64>)>) -> Result<Self> {
        let mut dim = None;
        let mut vectors = BTreeMap::new();
        for (word, vector) in entries {
            match dim {
                None => dim = Some(vector.len()),
                Some(d) if d != vector.len() => {
                    return Err(Error::InvalidArgument(format!(
                        "inconsistent vector dimension: {} then {}",
                        d,
                        vector.len()
                    )));
                }
                _ => {}
            }
            vectors.insert(word, vector);
        }
        Ok(PretrainedTable {
            dim: dim.unwrap_or(0),
            vectors,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn get(&self, word: &str) -> Option<&[f64]> {
        self.vectors.get(word).map(Vec::as_slice)
    }

    pub fn entries(&self) -> impl Iterator<Item = (&str, &[f64])> {
        self.vectors.iter().map(|(w, v)| (w.as_str(), v.as_slice()))
    }
}

/// Loads a pretrained table from a text file. Blank lines are skipped;
/// a line whose vector length differs from the first line's is an error.
pub fn load_pretrained(path: &Path) -> Result<PretrainedTable> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut dim: Option<usize> = None;
    let mut entries = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let lineno = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let mut parts = line.split_whitespace();
        let word = parts
            .next()
            .ok_or_else(|| Error::parse(path, lineno, "missing word"))?;
        let values: Vec<f64> = parts
            .map(|p| {
                p.parse::<f64>()
                    .map_err(|_| Error::parse(path, lineno, format!("bad component `{p}`")))
            })
            .collect::<Result<_>>()?;
        if values.is_empty() {
            return Err(Error::parse(path, lineno, "no vector components"));
        }
        match dim {
            None => dim = Some(values.len()),
            Some(d) if d != values.len() => {
                return Err(Error::parse(
                    path,
                    lineno,
                    format!("inconsistent dimension: expected {d}, found {}", values.len()),
                ));
            }
            _ => {}
        }
        entries.push((word.to_owned(), values));
    }
    PretrainedTable::from_entries(entries)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn loads_three_line_fixture() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("vectors.txt");
        std::fs::write(&path, "the 0.1 0.2 0.3\nof -0.5 0.25 0\nand 1 2 3\n").unwrap();
        let table = load_pretrained(&path).unwrap();
        assert_eq!(table.len(), 3);
        assert_eq!(table.dim(), 3);
        assert_eq!(table.get("of").unwrap(), &[-0.5, 0.25, 0.0]);
        assert!(table.get("unseen").is_none());
    }

    #[test]
    fn rejects_inconsistent_dimension() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("vectors.txt");
        std::fs::write(&path, "the 0.1 0.2\nof 0.1 0.2 0.3\n").unwrap();
        let err = load_pretrained(&path).unwrap_err();
        assert!(err.to_string().contains("inconsistent dimension"), "{err}");
    }

    #[test]
    fn rejects_non_numeric_component() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("vectors.txt");
        std::fs::write(&path, "the x y\n").unwrap();
        assert!(load_pretrained(&path).is_err());
    }
}
