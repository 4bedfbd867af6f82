//! Dataset index: image id, subject, side, split and optional pose.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::side::{Side, SideLabel};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Test,
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Split::Train => "train",
            Split::Test => "test",
        })
    }
}

impl FromStr for Split {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "train" => Ok(Split::Train),
            "test" => Ok(Split::Test),
            other => Err(format!("unknown split `{other}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Entry {
    pub id: String,
    pub subject: String,
    /// Side from metadata, or a resolved label once one has been applied.
    pub side: Option<Side>,
    pub split: Split,
    pub pose_deg: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Manifest {
    entries: Vec<Entry>,
}

impl Manifest {
    pub fn new(entries: Vec<Entry>) -> Result<Self> {
        let mut seen: HashMap<&str, usize> = HashMap::new();
        for (i, e) in entries.iter().enumerate() {
            if let Some(first) = seen.insert(&e.id, i) {
                return Err(Error::DuplicateId {
                    id: e.id.clone(),
                    first_line: first as u64 + 2,
                    second_line: i as u64 + 2,
                });
            }
        }
        Ok(Self { entries })
    }

    pub fn entries(&self) -> &[Entry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn split(&self, split: Split) -> impl Iterator<Item = &Entry> {
        self.entries.iter().filter(move |e| e.split == split)
    }

    pub fn get(&self, id: &str) -> Option<&Entry> {
        self.entries.iter().find(|e| e.id == id)
    }

    /// Subject per id.
    pub fn subjects(&self) -> BTreeMap<&str, &str> {
        self.entries
            .iter()
            .map(|e| (e.id.as_str(), e.subject.as_str()))
            .collect()
    }

    /// Copy with sides filled from `labels`; existing metadata sides are
    /// replaced by the resolved value.
    pub fn with_sides(&self, labels: &BTreeMap<String, SideLabel>) -> Manifest {
        let entries = self
            .entries
            .iter()
            .map(|e| Entry {
                side: labels.get(&e.id).map(|l| l.value).or(e.side),
                ..e.clone()
            })
            .collect();
        Manifest { entries }
    }

    pub fn parse(reader: impl std::io::Read, source: &str) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .flexible(true)
            .from_reader(reader);
        let headers = rdr
            .headers()
            .map_err(|e| Error::parse(source, 1, e.to_string()))?
            .clone();
        let col = |name: &str| headers.iter().position(|h| h.eq_ignore_ascii_case(name));
        let (Some(id_col), Some(subject_col), Some(split_col)) = (col("id"), col("subject"), col("split")) else {
            return Err(Error::parse(
                source,
                1,
                "expected header `id,subject,side,split,pose_deg`",
            ));
        };
        let side_col = col("side");
        let pose_col = col("pose_deg");

        let mut entries = Vec::new();
        let mut lines: HashMap<String, u64> = HashMap::new();
        for rec in rdr.records() {
            let rec = rec.map_err(|e| {
                let line = e.position().map_or(0, |p| p.line());
                Error::parse(source, line, e.to_string())
            })?;
            let line = rec.position().map_or(0, |p| p.line());
            let field = |c: Option<usize>| c.and_then(|c| rec.get(c)).unwrap_or("");
            let id = field(Some(id_col)).to_string();
            let subject = field(Some(subject_col)).to_string();
            if id.is_empty() {
                return Err(Error::parse(source, line, "empty id"));
            }
            if subject.is_empty() {
                return Err(Error::parse(source, line, "empty subject"));
            }
            let side = match field(side_col) {
                "" => None,
                s => Some(s.parse::<Side>().map_err(|e| Error::parse(source, line, e))?),
            };
            let split = field(Some(split_col))
                .parse::<Split>()
                .map_err(|e| Error::parse(source, line, e))?;
            let pose_deg = match field(pose_col) {
                "" => None,
                s => Some(
                    s.parse::<f64>()
                        .ok()
                        .filter(|v| v.is_finite())
                        .ok_or_else(|| Error::parse(source, line, format!("bad pose_deg `{s}`")))?,
                ),
            };
            if let Some(&first) = lines.get(&id) {
                return Err(Error::DuplicateId {
                    id,
                    first_line: first,
                    second_line: line,
                });
            }
            lines.insert(id.clone(), line);
            entries.push(Entry {
                id,
                subject,
                side,
                split,
                pose_deg,
            });
        }
        Ok(Self { entries })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path)?;
        Self::parse(file, &path.display().to_string())
    }

    pub fn write(&self, writer: impl std::io::Write) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["id", "subject", "side", "split", "pose_deg"])?;
        for e in &self.entries {
            w.write_record([
                e.id.as_str(),
                e.subject.as_str(),
                e.side.map_or("", Side::code),
                &e.split.to_string(),
                &e.pose_deg.map(crate::format::csv_float).unwrap_or_default(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        self.write(std::fs::File::create(path)?)
    }
}
