use std::collections::HashMap;
use std::fmt;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Corrosion severity, ordered from least to most severe.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Label {
    /// Non-defective.
    ND,
    /// Medium corrosion.
    MC,
    /// Aggravated corrosion.
    AC,
}

impl Label {
    pub const ALL: [Label; 3] = [Label::ND, Label::MC, Label::AC];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Label> {
        Self::ALL.get(i).copied()
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Label::ND => "ND",
            Label::MC => "MC",
            Label::AC => "AC",
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Label {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "ND" => Ok(Label::ND),
            "MC" => Ok(Label::MC),
            "AC" => Ok(Label::AC),
            _ => Err(Error::Dataset(format!("unknown class label `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Subset {
    Train,
    Validation,
    Test,
}

impl Subset {
    pub const ALL: [Subset; 3] = [Subset::Train, Subset::Validation, Subset::Test];

    pub fn as_str(self) -> &'static str {
        match self {
            Subset::Train => "train",
            Subset::Validation => "validation",
            Subset::Test => "test",
        }
    }
}

impl fmt::Display for Subset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Subset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(Subset::Train),
            "validation" | "val" => Ok(Subset::Validation),
            "test" => Ok(Subset::Test),
            _ => Err(Error::Dataset(format!("unknown split tag `{s}`"))),
        }
    }
}

/// One patch of the dataset.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestRecord {
    /// Patch image path, relative to the manifest's directory unless absolute.
    pub path: String,
    pub label: Label,
    pub source_id: String,
    pub patch_index: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub split: Option<Subset>,
}

/// JSON Lines patch list. Relative paths resolve against `root`.
#[derive(Debug, Clone, PartialEq)]
pub struct Manifest {
    pub root: PathBuf,
    pub records: Vec<ManifestRecord>,
}

impl Manifest {
    pub fn new(root: impl Into<PathBuf>, records: Vec<ManifestRecord>) -> Result<Self> {
        let m = Self {
            root: root.into(),
            records,
        };
        m.validate()?;
        Ok(m)
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Every source image carries a single label.
    pub fn validate(&self) -> Result<()> {
        let mut labels: HashMap<&str, Label> = HashMap::new();
        for r in &self.records {
            if let Some(prev) = labels.insert(&r.source_id, r.label) {
                if prev != r.label {
                    return Err(Error::Dataset(format!(
                        "source image `{}` is labelled both {prev} and {}",
                        r.source_id, r.label
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn resolve(&self, record: &ManifestRecord) -> PathBuf {
        let p = Path::new(&record.path);
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.root.join(p)
        }
    }

    /// Source images with their label, in order of first appearance.
    pub fn sources(&self) -> Vec<(String, Label)> {
        let mut seen = HashMap::new();
        let mut out = Vec::new();
        for r in &self.records {
            if seen.insert(r.source_id.as_str(), ()).is_none() {
                out.push((r.source_id.clone(), r.label));
            }
        }
        out
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        let mut records = Vec::new();
        for (i, line) in BufReader::new(file).lines().enumerate() {
            let line = line.map_err(|e| Error::io(path, e))?;
            if line.trim().is_empty() {
                continue;
            }
            let record: ManifestRecord = serde_json::from_str(&line).map_err(|e| {
                Error::Dataset(format!("{}:{}: {e}", path.display(), i + 1))
            })?;
            records.push(record);
        }
        let root = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::new(root, records)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut out = BufWriter::new(file);
        for r in &self.records {
            serde_json::to_writer(&mut out, r)?;
            out.write_all(b"\n").map_err(|e| Error::io(path, e))?;
        }
        out.flush().map_err(|e| Error::io(path, e))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(source: &str, label: Label, idx: usize) -> ManifestRecord {
        ManifestRecord {
            path: format!("patches/{source}_p{idx:02}.png"),
            label,
            source_id: source.into(),
            patch_index: idx,
            split: None,
        }
    }

    #[test]
    fn label_round_trip() {
        for l in Label::ALL {
            assert_eq!(l.as_str().parse::<Label>().unwrap(), l);
            assert_eq!(Label::from_index(l.index()), Some(l));
        }
        assert!("XX".parse::<Label>().is_err());
        assert!(Label::AC > Label::MC && Label::MC > Label::ND);
    }

    #[test]
    fn jsonl_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let mut records = vec![record("a", Label::ND, 0), record("b", Label::AC, 1)];
        records[1].split = Some(Subset::Test);
        let m = Manifest::new(dir.path(), records).unwrap();
        let path = dir.path().join("manifest.jsonl");
        m.save(&path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.lines().next().unwrap().contains("\"label\":\"ND\""));
        assert!(!text.lines().next().unwrap().contains("split"));
        assert!(text.lines().nth(1).unwrap().contains("\"split\":\"test\""));
        let back = Manifest::load(&path).unwrap();
        assert_eq!(back, m);
        assert_eq!(back.resolve(&back.records[0]), dir.path().join("patches/a_p00.png"));
    }

    #[test]
    fn conflicting_labels_rejected() {
        let records = vec![record("a", Label::ND, 0), record("a", Label::MC, 1)];
        assert!(Manifest::new(".", records).is_err());
    }

    #[test]
    fn unknown_label_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.jsonl");
        std::fs::write(
            &path,
            r#"{"path":"x.png","label":"XX","source_id":"a","patch_index":0}"#,
        )
        .unwrap();
        assert!(Manifest::load(&path).is_err());
    }

    #[test]
    fn sources_in_first_appearance_order() {
        let records = vec![
            record("b", Label::MC, 0),
            record("a", Label::ND, 0),
            record("b", Label::MC, 1),
        ];
        let m = Manifest::new(".", records).unwrap();
        assert_eq!(
            m.sources(),
            vec![("b".to_string(), Label::MC), ("a".to_string(), Label::ND)]
        );
    }
}
