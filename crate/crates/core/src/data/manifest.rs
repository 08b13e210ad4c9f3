//! Labeled image index read from `path,label` CSV files.

use std::collections::{HashMap, HashSet};
use std::io::Read;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};

/// The 120-painting, three-painter benchmark index (titles as file stems).
pub const APPENDIX_MANIFEST: &str = include_str!("../../data/appendix_manifest.csv");

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ManifestEntry {
    pub path: String,
    pub label: String,
    pub class: usize,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DatasetManifest {
    entries: Vec<ManifestEntry>,
    classes: Vec<String>,
    base_dir: PathBuf,
}

impl DatasetManifest {
    /// Builds a manifest from `(path, label)` pairs; classes are indexed in
    /// first-appearance order.
    pub fn from_rows<I, P, L>(rows: I, base_dir: impl Into<PathBuf>) -> Result<Self>
    where
        I: IntoIterator<Item = (P, L)>,
        P: Into<String>,
        L: Into<String>,
    {
        let mut entries = Vec::new();
        let mut classes: Vec<String> = Vec::new();
        let mut class_of: HashMap<String, usize> = HashMap::new();
        let mut seen = HashSet::new();
        for (line, (path, label)) in rows.into_iter().enumerate() {
            let (path, label) = (path.into(), label.into());
            if path.is_empty() {
                return Err(Error::Manifest(format!("row {}: empty path", line + 1)));
            }
            if !seen.insert(path.clone()) {
                return Err(Error::Manifest(format!("duplicate path {path:?}")));
            }
            let class = *class_of.entry(label.clone()).or_insert_with(|| {
                classes.push(label.clone());
                classes.len() - 1
            });
            entries.push(ManifestEntry { path, label, class });
        }
        if entries.is_empty() {
            return Err(Error::Manifest("manifest has no entries".into()));
        }
        Ok(DatasetManifest {
            entries,
            classes,
            base_dir: base_dir.into(),
        })
    }

    /// Parses CSV text with a `path,label` header.
    pub fn parse(reader: impl Read, base_dir: impl Into<PathBuf>) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(true)
            .trim(csv::Trim::All)
            .from_reader(reader);
        let headers = rdr
            .headers()
            .map_err(|e| Error::Manifest(e.to_string()))?
            .clone();
        if headers.is_empty() {
            return Err(Error::Manifest("manifest is empty".into()));
        }
        if headers.len() != 2 || &headers[0] != "path" || &headers[1] != "label" {
            return Err(Error::Manifest(format!(
                "expected header `path,label`, found `{}`",
                headers.iter().collect::<Vec<_>>().join(",")
            )));
        }
        let mut rows = Vec::new();
        for rec in rdr.records() {
            let rec = rec.map_err(|e| Error::Manifest(e.to_string()))?;
            rows.push((rec[0].to_string(), rec[1].to_string()));
        }
        Self::from_rows(rows, base_dir)
    }

    pub fn entries(&self) -> &[ManifestEntry] {
        &self.entries
    }

    pub fn classes(&self) -> &[String] {
        &self.classes
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn base_dir(&self) -> &Path {
        &self.base_dir
    }

    /// Image path resolved against the manifest's directory.
    pub fn resolve(&self, index: usize) -> PathBuf {
        self.base_dir.join(&self.entries[index].path)
    }

    pub fn labels(&self) -> Vec<usize> {
        self.entries.iter().map(|e| e.class).collect()
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.classes.len()];
        for e in &self.entries {
            counts[e.class] += 1;
        }
        counts
    }
}

/// Loads a manifest file; entry paths are relative to the file's directory.
pub fn load_manifest(path: &Path) -> Result<DatasetManifest> {
    let file = std::fs::File::open(path)
        .map_err(|e| Error::Manifest(format!("{}: {e}", path.display())))?;
    let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
    DatasetManifest::parse(file, base)
}
