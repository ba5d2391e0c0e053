use std::collections::HashSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::HarnessError;
use crate::backend::TraceBackend;

/// Where a sample's views come from.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SampleSource {
    /// A PPM image, decoded before timing starts.
    Image(PathBuf),
    /// Views recorded in the backend's trace under the sample id.
    Trace,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub sample_id: String,
    pub source: SampleSource,
    pub label: usize,
}

/// The labelled sample list a benchmark runs over.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetManifest {
    entries: Vec<ManifestEntry>,
    classes: usize,
}

impl DatasetManifest {
    pub fn new(entries: Vec<ManifestEntry>, classes: usize) -> Result<Self, HarnessError> {
        let mut seen = HashSet::new();
        for e in &entries {
            if !seen.insert(e.sample_id.as_str()) {
                return Err(HarnessError::DuplicateSample(e.sample_id.clone()));
            }
            if e.label >= classes {
                return Err(HarnessError::LabelOutOfRange {
                    sample_id: e.sample_id.clone(),
                    label: e.label,
                    classes,
                });
            }
        }
        Ok(Self { entries, classes })
    }

    /// Every sample of a trace, in file order.
    pub fn from_trace(trace: &TraceBackend) -> Self {
        let entries = trace
            .samples()
            .map(|(id, label)| ManifestEntry {
                sample_id: id.to_string(),
                source: SampleSource::Trace,
                label,
            })
            .collect();
        Self {
            entries,
            classes: trace.header().classes,
        }
    }

    /// Parses `sample_id<TAB>path<TAB>label` lines. Relative paths are
    /// resolved against `base_dir`. Blank lines and lines starting with `#`
    /// are skipped.
    pub fn parse_tsv(text: &str, classes: usize, base_dir: &Path) -> Result<Self, HarnessError> {
        let mut entries = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let line_no = i + 1;
            let line = line.trim_end_matches('\r');
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = line.split('\t').collect();
            let [id, path, label] = fields.as_slice() else {
                return Err(HarnessError::Manifest {
                    line: line_no,
                    message: format!("expected 3 tab-separated fields, found {}", fields.len()),
                });
            };
            if id.is_empty() || path.is_empty() {
                return Err(HarnessError::Manifest {
                    line: line_no,
                    message: "empty sample id or path".into(),
                });
            }
            let label = label.trim().parse().map_err(|_| HarnessError::Manifest {
                line: line_no,
                message: format!("label {label:?} is not a non-negative integer"),
            })?;
            entries.push(ManifestEntry {
                sample_id: id.to_string(),
                source: SampleSource::Image(base_dir.join(path)),
                label,
            });
        }
        Self::new(entries, classes)
    }

    pub fn load_tsv(path: &Path, classes: usize) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path).map_err(|e| HarnessError::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        let base = path.parent().unwrap_or_else(|| Path::new("."));
        Self::parse_tsv(&text, classes, base)
    }

    /// Keeps only `ids`, in the given order. Each id must be present.
    pub fn select(&self, ids: &[&str]) -> Result<Self, HarnessError> {
        let entries = ids
            .iter()
            .map(|id| {
                self.entries
                    .iter()
                    .find(|e| e.sample_id == *id)
                    .cloned()
                    .ok_or_else(|| HarnessError::UnknownSample(id.to_string()))
            })
            .collect::<Result<_, _>>()?;
        Self::new(entries, self.classes)
    }

    pub fn entries(&self) -> &[ManifestEntry] {
        &self.entries
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_tsv() {
        let m = DatasetManifest::parse_tsv(
            "# id\tpath\tlabel\na\timgs/a.ppm\t2\n\nb\t/abs/b.ppm\t0\n",
            3,
            Path::new("/data"),
        )
        .unwrap();
        assert_eq!(m.len(), 2);
        assert_eq!(
            m.entries()[0].source,
            SampleSource::Image("/data/imgs/a.ppm".into())
        );
        assert_eq!(
            m.entries()[1].source,
            SampleSource::Image("/abs/b.ppm".into())
        );
        assert_eq!(m.entries()[0].label, 2);
    }

    #[test]
    fn rejects_bad_lines() {
        let base = Path::new(".");
        assert!(matches!(
            DatasetManifest::parse_tsv("a\tx.ppm\n", 3, base),
            Err(HarnessError::Manifest { line: 1, .. })
        ));
        assert!(matches!(
            DatasetManifest::parse_tsv("a\tx.ppm\t-1\n", 3, base),
            Err(HarnessError::Manifest { .. })
        ));
        assert!(matches!(
            DatasetManifest::parse_tsv("a\tx.ppm\t3\n", 3, base),
            Err(HarnessError::LabelOutOfRange { label: 3, .. })
        ));
        assert!(matches!(
            DatasetManifest::parse_tsv("a\tx.ppm\t0\na\ty.ppm\t1\n", 3, base),
            Err(HarnessError::DuplicateSample(_))
        ));
    }
}
