//! Trace replay: per-view probability rows recorded from a real model,
//! served back by `(sample_id, view)` lookup.
//!
//! The file format is JSON Lines. The first line is a header
//! `{"classes": C, "policy": "5C", "num_views": N}`; every following line is
//! one record `{"sample": id, "view": k, "label": y, "probs": [..C floats]}`.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::io::{self, BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{Backend, BackendError, ProbError, ProbVector, ViewInput};
use crate::imaging::{TransformPolicy, FIVE_CROP, TEN_CROP};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TraceHeader {
    pub classes: usize,
    pub policy: String,
    pub num_views: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    #[serde(rename = "sample")]
    pub sample_id: String,
    #[serde(rename = "view")]
    pub view_index: usize,
    #[serde(rename = "label")]
    pub true_label: usize,
    pub probs: ProbVector,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRecord {
    sample: String,
    view: usize,
    label: usize,
    probs: Vec<f64>,
}

#[derive(Debug, Error)]
pub enum TraceError {
    #[error("failed to read trace: {0}")]
    Io(#[from] io::Error),
    #[error("trace is empty, expected a header line")]
    MissingHeader,
    #[error("line {line}: {message}")]
    Schema { line: usize, message: String },
    #[error("line {line}: duplicate record for sample {sample_id:?} view {view}")]
    Duplicate {
        line: usize,
        sample_id: String,
        view: usize,
    },
    #[error("line {line}: row has {actual} classes, header declares {expected}")]
    InconsistentClasses {
        line: usize,
        expected: usize,
        actual: usize,
    },
    #[error("line {line}: invalid probability row: {source}")]
    InvalidRow { line: usize, source: ProbError },
    #[error("line {line}: label {label} is outside 0..{classes}")]
    LabelOutOfRange {
        line: usize,
        label: usize,
        classes: usize,
    },
    #[error("line {line}: sample {sample_id:?} has label {label}, earlier rows say {expected}")]
    InconsistentLabel {
        line: usize,
        sample_id: String,
        label: usize,
        expected: usize,
    },
    #[error("incomplete view coverage: sample {sample_id:?} is missing view {view}")]
    IncompleteCoverage { sample_id: String, view: usize },
}

#[derive(Debug, Clone)]
struct TraceSample {
    id: String,
    label: usize,
    views: Vec<Option<ProbVector>>,
}

/// A backend answering lookups from a validated trace. Every declared
/// `(sample, view)` pair is present; anything else is an error.
#[derive(Debug, Clone)]
pub struct TraceBackend {
    header: TraceHeader,
    samples: Vec<TraceSample>,
    index: HashMap<String, usize>,
}

fn schema(line: usize, message: impl Into<String>) -> TraceError {
    TraceError::Schema {
        line,
        message: message.into(),
    }
}

fn check_header(header: &TraceHeader) -> Result<(), TraceError> {
    if header.classes < 2 {
        return Err(schema(
            1,
            format!("classes must be at least 2, got {}", header.classes),
        ));
    }
    if header.num_views == 0 {
        return Err(schema(1, "num_views must be positive"));
    }
    let expected = match header.policy.as_str() {
        FIVE_CROP => Some(5),
        TEN_CROP => Some(10),
        _ => None,
    };
    if let Some(n) = expected.filter(|&n| n != header.num_views) {
        return Err(schema(
            1,
            format!(
                "policy {} has {n} views, header declares {}",
                header.policy, header.num_views
            ),
        ));
    }
    Ok(())
}

/// Incremental builder shared by the file loader and in-memory construction.
struct Builder {
    header: TraceHeader,
    samples: Vec<TraceSample>,
    index: HashMap<String, usize>,
}

impl Builder {
    fn new(header: TraceHeader) -> Result<Self, TraceError> {
        check_header(&header)?;
        Ok(Self {
            header,
            samples: Vec::new(),
            index: HashMap::new(),
        })
    }

    fn push(
        &mut self,
        line: usize,
        sample_id: String,
        view: usize,
        label: usize,
        probs: Vec<f64>,
    ) -> Result<(), TraceError> {
        let classes = self.header.classes;
        if probs.len() != classes {
            return Err(TraceError::InconsistentClasses {
                line,
                expected: classes,
                actual: probs.len(),
            });
        }
        let probs =
            ProbVector::new(probs).map_err(|source| TraceError::InvalidRow { line, source })?;
        if label >= classes {
            return Err(TraceError::LabelOutOfRange {
                line,
                label,
                classes,
            });
        }
        if view >= self.header.num_views {
            return Err(schema(
                line,
                format!("view {view} is outside 0..{}", self.header.num_views),
            ));
        }
        let slot = match self.index.get(&sample_id) {
            Some(&i) => i,
            None => {
                self.index.insert(sample_id.clone(), self.samples.len());
                self.samples.push(TraceSample {
                    id: sample_id.clone(),
                    label,
                    views: vec![None; self.header.num_views],
                });
                self.samples.len() - 1
            }
        };
        let sample = &mut self.samples[slot];
        if sample.label != label {
            return Err(TraceError::InconsistentLabel {
                line,
                sample_id,
                label,
                expected: sample.label,
            });
        }
        if sample.views[view].is_some() {
            return Err(TraceError::Duplicate {
                line,
                sample_id,
                view,
            });
        }
        sample.views[view] = Some(probs);
        Ok(())
    }

    fn finish(self) -> Result<TraceBackend, TraceError> {
        for s in &self.samples {
            if let Some(view) = s.views.iter().position(Option::is_none) {
                return Err(TraceError::IncompleteCoverage {
                    sample_id: s.id.clone(),
                    view,
                });
            }
        }
        Ok(TraceBackend {
            header: self.header,
            samples: self.samples,
            index: self.index,
        })
    }
}

impl TraceBackend {
    /// Builds a backend from in-memory records, applying the same checks
    /// as the file loader. Line numbers in errors count the header as 1.
    pub fn from_records(
        header: TraceHeader,
        records: impl IntoIterator<Item = TraceRecord>,
    ) -> Result<Self, TraceError> {
        let mut b = Builder::new(header)?;
        for (i, r) in records.into_iter().enumerate() {
            b.push(
                i + 2,
                r.sample_id,
                r.view_index,
                r.true_label,
                r.probs.into_inner(),
            )?;
        }
        b.finish()
    }

    pub fn from_reader(reader: impl BufRead) -> Result<Self, TraceError> {
        let mut lines = reader.lines().enumerate();
        let header = loop {
            match lines.next() {
                None => return Err(TraceError::MissingHeader),
                Some((_, line)) => {
                    let line = line?;
                    if line.trim().is_empty() {
                        continue;
                    }
                    break serde_json::from_str::<TraceHeader>(&line)
                        .map_err(|e| schema(1, format!("bad header: {e}")))?;
                }
            }
        };
        let mut b = Builder::new(header)?;
        for (i, line) in lines {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let raw: RawRecord =
                serde_json::from_str(&line).map_err(|e| schema(i + 1, e.to_string()))?;
            b.push(i + 1, raw.sample, raw.view, raw.label, raw.probs)?;
        }
        b.finish()
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, TraceError> {
        let f = std::fs::File::open(path)?;
        Self::from_reader(BufReader::new(f))
    }

    pub fn header(&self) -> &TraceHeader {
        &self.header
    }

    pub fn num_views(&self) -> usize {
        self.header.num_views
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// `(sample_id, true_label)` in file order.
    pub fn samples(&self) -> impl ExactSizeIterator<Item = (&str, usize)> + '_ {
        self.samples.iter().map(|s| (s.id.as_str(), s.label))
    }

    pub fn label(&self, sample_id: &str) -> Option<usize> {
        self.index.get(sample_id).map(|&i| self.samples[i].label)
    }

    pub fn lookup(&self, sample_id: &str, view: usize) -> Result<&ProbVector, BackendError> {
        let sample = self
            .index
            .get(sample_id)
            .map(|&i| &self.samples[i])
            .ok_or_else(|| BackendError::UnknownSample(sample_id.to_string()))?;
        sample
            .views
            .get(view)
            .and_then(Option::as_ref)
            .ok_or_else(|| BackendError::UnknownView {
                sample_id: sample_id.to_string(),
                view,
            })
    }

    pub fn records(&self) -> impl Iterator<Item = TraceRecord> + '_ {
        self.samples.iter().flat_map(|s| {
            s.views.iter().enumerate().map(move |(k, p)| TraceRecord {
                sample_id: s.id.clone(),
                view_index: k,
                true_label: s.label,
                probs: p.clone().expect("coverage checked at construction"),
            })
        })
    }

    pub fn write(&self, out: impl Write) -> io::Result<()> {
        write_trace(out, &self.header, self.records())
    }
}

/// Writes a trace file. Probabilities are printed with 17 significant
/// digits so they reload bit-exactly.
pub fn write_trace(
    mut out: impl Write,
    header: &TraceHeader,
    records: impl IntoIterator<Item = TraceRecord>,
) -> io::Result<()> {
    serde_json::to_writer(&mut out, header)?;
    out.write_all(b"\n")?;
    let mut line = String::new();
    for r in records {
        line.clear();
        let id = serde_json::to_string(&r.sample_id)?;
        let _ = write!(
            line,
            "{{\"sample\":{id},\"view\":{},\"label\":{},\"probs\":[",
            r.view_index, r.true_label
        );
        for (i, p) in r.probs.as_slice().iter().enumerate() {
            if i > 0 {
                line.push(',');
            }
            let _ = write!(line, "{p:.16e}");
        }
        line.push_str("]}\n");
        out.write_all(line.as_bytes())?;
    }
    out.flush()
}

impl Backend for TraceBackend {
    fn name(&self) -> &'static str {
        "trace"
    }

    fn classes(&self) -> usize {
        self.header.classes
    }

    fn predict(&self, input: ViewInput<'_>) -> Result<ProbVector, BackendError> {
        match input {
            ViewInput::Recorded { sample_id, view } => self.lookup(sample_id, view).cloned(),
            ViewInput::Pixels(_) => Err(BackendError::UnsupportedInput {
                backend: "trace",
                input: "pixel",
            }),
        }
    }

    fn check_policy(&self, policy: &TransformPolicy) -> Result<(), BackendError> {
        if policy.len() > self.header.num_views {
            return Err(BackendError::PolicyMismatch {
                policy: policy.name().to_string(),
                needed: policy.len(),
                available: self.header.num_views,
            });
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_sample_trace() -> String {
        let mut s = String::from("{\"classes\":3,\"policy\":\"5C\",\"num_views\":5}\n");
        for id in ["a", "b"] {
            for v in 0..5 {
                s += &format!(
                    "{{\"sample\":\"{id}\",\"view\":{v},\"label\":1,\"probs\":[0.2,0.5,0.3]}}\n"
                );
            }
        }
        s
    }

    #[test]
    fn loads_two_samples() {
        let t = TraceBackend::from_reader(two_sample_trace().as_bytes()).unwrap();
        assert_eq!(t.len(), 2);
        assert_eq!(t.num_views(), 5);
        assert_eq!(t.classes(), 3);
        assert_eq!(t.samples().collect::<Vec<_>>(), vec![("a", 1), ("b", 1)]);
    }

    #[test]
    fn lookup_returns_stored_row() {
        let text = two_sample_trace().replace(
            "\"sample\":\"b\",\"view\":2,\"label\":1,\"probs\":[0.2,0.5,0.3]",
            "\"sample\":\"b\",\"view\":2,\"label\":1,\"probs\":[0.7,0.1,0.2]",
        );
        let t = TraceBackend::from_reader(text.as_bytes()).unwrap();
        let p = t
            .predict(ViewInput::Recorded {
                sample_id: "b",
                view: 2,
            })
            .unwrap();
        assert_eq!(p.as_slice(), &[0.7, 0.1, 0.2]);
        assert!(matches!(
            t.predict(ViewInput::Recorded {
                sample_id: "b",
                view: 5
            }),
            Err(BackendError::UnknownView { view: 5, .. })
        ));
        assert!(matches!(
            t.predict(ViewInput::Recorded {
                sample_id: "zz",
                view: 0
            }),
            Err(BackendError::UnknownSample(_))
        ));
    }

    #[test]
    fn rejects_bad_row_sum() {
        let text = two_sample_trace().replacen("[0.2,0.5,0.3]", "[0.2,0.2,0.1]", 1);
        assert!(matches!(
            TraceBackend::from_reader(text.as_bytes()),
            Err(TraceError::InvalidRow {
                line: 2,
                source: ProbError::BadSum(_)
            })
        ));
    }

    #[test]
    fn rejects_missing_view() {
        let text: String = two_sample_trace()
            .lines()
            .filter(|l| !l.contains("\"sample\":\"a\",\"view\":3"))
            .map(|l| format!("{l}\n"))
            .collect();
        match TraceBackend::from_reader(text.as_bytes()) {
            Err(TraceError::IncompleteCoverage { sample_id, view }) => {
                assert_eq!((sample_id.as_str(), view), ("a", 3));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn rejects_duplicates_and_inconsistencies() {
        let mut dup = two_sample_trace();
        dup += "{\"sample\":\"a\",\"view\":0,\"label\":1,\"probs\":[0.2,0.5,0.3]}\n";
        assert!(matches!(
            TraceBackend::from_reader(dup.as_bytes()),
            Err(TraceError::Duplicate { line: 12, .. })
        ));

        let wide = two_sample_trace().replacen("[0.2,0.5,0.3]", "[0.2,0.5,0.2,0.1]", 1);
        assert!(matches!(
            TraceBackend::from_reader(wide.as_bytes()),
            Err(TraceError::InconsistentClasses {
                expected: 3,
                actual: 4,
                ..
            })
        ));

        let relabeled = two_sample_trace().replacen("\"label\":1", "\"label\":2", 1);
        assert!(matches!(
            TraceBackend::from_reader(relabeled.as_bytes()),
            Err(TraceError::InconsistentLabel { .. })
        ));

        let bad_label = two_sample_trace().replace("\"label\":1", "\"label\":3");
        assert!(matches!(
            TraceBackend::from_reader(bad_label.as_bytes()),
            Err(TraceError::LabelOutOfRange { .. })
        ));

        let bad_header = two_sample_trace().replacen("\"num_views\":5", "\"num_views\":10", 1);
        assert!(matches!(
            TraceBackend::from_reader(bad_header.as_bytes()),
            Err(TraceError::Schema { line: 1, .. })
        ));

        assert!(matches!(
            TraceBackend::from_reader(&b""[..]),
            Err(TraceError::MissingHeader)
        ));
        let garbage = two_sample_trace() + "{not json}\n";
        assert!(matches!(
            TraceBackend::from_reader(garbage.as_bytes()),
            Err(TraceError::Schema { line: 12, .. })
        ));
    }

    #[test]
    fn write_then_load_is_exact() {
        let header = TraceHeader {
            classes: 3,
            policy: "custom".into(),
            num_views: 2,
        };
        let third = 1.0 / 3.0;
        let records = (0..2).map(|v| TraceRecord {
            sample_id: "quote\"d".into(),
            view_index: v,
            true_label: 0,
            probs: ProbVector::new(vec![third, third, 1.0 - 2.0 * third]).unwrap(),
        });
        let mut buf = Vec::new();
        write_trace(&mut buf, &header, records.clone()).unwrap();
        let t = TraceBackend::from_reader(buf.as_slice()).unwrap();
        assert_eq!(t.header(), &header);
        assert_eq!(t.records().collect::<Vec<_>>(), records.collect::<Vec<_>>());
        let mut again = Vec::new();
        t.write(&mut again).unwrap();
        assert_eq!(buf, again);
    }

    #[test]
    fn policy_check() {
        let t = TraceBackend::from_reader(two_sample_trace().as_bytes()).unwrap();
        assert!(t
            .check_policy(&TransformPolicy::by_name("5C").unwrap())
            .is_ok());
        assert!(matches!(
            t.check_policy(&TransformPolicy::by_name("10C").unwrap()),
            Err(BackendError::PolicyMismatch {
                needed: 10,
                available: 5,
                ..
            })
        ));
    }
}
