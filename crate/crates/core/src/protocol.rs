//! Training-label arrangements and verification pair protocols.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::embedding::{cosine, Embedding};
use crate::error::{Error, Result};
use crate::format::csv_float;
use crate::manifest::{Manifest, Split};
use crate::side::Side;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ClassMode {
    /// One class per subject.
    Single,
    /// One class per occupied (subject, side).
    Split,
}

impl FromStr for ClassMode {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "single" => Ok(ClassMode::Single),
            "split" => Ok(ClassMode::Split),
            other => Err(format!("unknown class mode `{other}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClassArrangement {
    pub mode: ClassMode,
    /// Image id to dense class index.
    pub mapping: BTreeMap<String, usize>,
    pub num_classes: usize,
}

#[derive(Debug, Serialize)]
struct ArrangementSummary {
    mode: ClassMode,
    num_classes: usize,
}

impl ClassArrangement {
    pub fn write_csv(&self, w: impl Write) -> Result<()> {
        let mut w = csv::Writer::from_writer(w);
        w.write_record(["id", "class_index"])?;
        for (id, class) in &self.mapping {
            w.write_record([id.as_str(), &class.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn summary_json(&self) -> Result<String> {
        Ok(crate::format::to_json_string(&ArrangementSummary {
            mode: self.mode,
            num_classes: self.num_classes,
        })?)
    }
}

/// Class labels over the TRAIN split, indices assigned in sorted key order.
pub fn arrange_classes(manifest: &Manifest, mode: ClassMode) -> Result<ClassArrangement> {
    let train: Vec<_> = manifest.split(Split::Train).collect();
    if train.is_empty() {
        return Err(Error::EmptySplit("train"));
    }
    let mut keyed = Vec::with_capacity(train.len());
    for e in &train {
        let side = match mode {
            ClassMode::Single => None,
            ClassMode::Split => Some(e.side.ok_or_else(|| Error::MissingSideLabel(e.id.clone()))?),
        };
        keyed.push((e.id.clone(), (e.subject.as_str(), side)));
    }
    let keys: BTreeSet<_> = keyed.iter().map(|(_, k)| *k).collect();
    let index: HashMap<_, _> = keys.iter().enumerate().map(|(i, k)| (*k, i)).collect();
    let mapping = keyed.iter().map(|(id, k)| (id.clone(), index[k])).collect();
    Ok(ClassArrangement {
        mode,
        mapping,
        num_classes: keys.len(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Protocol {
    /// L-L and R-R pairs pooled.
    SameSide,
    OppositeSide,
    All,
    LeftLeft,
    RightRight,
}

impl Protocol {
    pub fn name(self) -> &'static str {
        match self {
            Protocol::SameSide => "same-side",
            Protocol::OppositeSide => "opposite-side",
            Protocol::All => "all",
            Protocol::LeftLeft => "left-left",
            Protocol::RightRight => "right-right",
        }
    }

    fn admits(self, a: Option<Side>, b: Option<Side>) -> bool {
        match (self, a, b) {
            (Protocol::All, _, _) => true,
            (Protocol::SameSide, Some(x), Some(y)) => x == y,
            (Protocol::OppositeSide, Some(x), Some(y)) => x != y,
            (Protocol::LeftLeft, Some(x), Some(y)) => x == Side::Left && y == Side::Left,
            (Protocol::RightRight, Some(x), Some(y)) => x == Side::Right && y == Side::Right,
            _ => false,
        }
    }
}

impl fmt::Display for Protocol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Protocol {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.to_ascii_lowercase().replace('_', "-").as_str() {
            "same-side" | "same" => Ok(Protocol::SameSide),
            "opposite-side" | "opposite" => Ok(Protocol::OppositeSide),
            "all" => Ok(Protocol::All),
            "left-left" => Ok(Protocol::LeftLeft),
            "right-right" => Ok(Protocol::RightRight),
            other => Err(format!("unknown protocol `{other}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SideRelation {
    Same,
    Opposite,
    /// At least one side unresolved (protocol ALL only).
    Unknown,
}

impl SideRelation {
    fn of(a: Option<Side>, b: Option<Side>) -> Self {
        match (a, b) {
            (Some(x), Some(y)) if x == y => SideRelation::Same,
            (Some(_), Some(_)) => SideRelation::Opposite,
            _ => SideRelation::Unknown,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            SideRelation::Same => "same",
            SideRelation::Opposite => "opposite",
            SideRelation::Unknown => "unknown",
        }
    }
}

impl FromStr for SideRelation {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "same" => Ok(SideRelation::Same),
            "opposite" => Ok(SideRelation::Opposite),
            "unknown" | "" => Ok(SideRelation::Unknown),
            other => Err(format!("unknown side relation `{other}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Pair {
    /// Indices into [`PairSet::ids`].
    pub a: u32,
    pub b: u32,
    pub genuine: bool,
    pub relation: SideRelation,
}

/// Canonical comparison pairs; `ids[a] < ids[b]` for every pair.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PairSet {
    pub protocol: Protocol,
    pub ids: Vec<String>,
    pub pairs: Vec<Pair>,
}

impl PairSet {
    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn id_pair(&self, p: &Pair) -> (&str, &str) {
        (&self.ids[p.a as usize], &self.ids[p.b as usize])
    }

    pub fn genuine_count(&self) -> usize {
        self.pairs.iter().filter(|p| p.genuine).count()
    }

    pub fn write_csv(&self, w: impl Write) -> Result<()> {
        let mut w = csv::Writer::from_writer(w);
        w.write_record(["id_a", "id_b", "genuine", "side_relation"])?;
        for p in &self.pairs {
            let (a, b) = self.id_pair(p);
            w.write_record([a, b, if p.genuine { "1" } else { "0" }, p.relation.name()])?;
        }
        w.flush()?;
        Ok(())
    }

    /// Reads a pair CSV. The protocol is inferred from the relations present.
    pub fn read_csv(r: impl Read, source: &str) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(r);
        let headers = rdr.headers()?.clone();
        if headers.iter().collect::<Vec<_>>() != ["id_a", "id_b", "genuine", "side_relation"] {
            return Err(Error::parse(
                source,
                1,
                "expected header `id_a,id_b,genuine,side_relation`",
            ));
        }
        let mut ids: Vec<String> = Vec::new();
        let mut lookup: HashMap<String, u32> = HashMap::new();
        let mut intern = |s: &str| -> u32 {
            if let Some(&i) = lookup.get(s) {
                return i;
            }
            let i = ids.len() as u32;
            ids.push(s.to_string());
            lookup.insert(s.to_string(), i);
            i
        };
        let mut pairs = Vec::new();
        for (i, rec) in rdr.records().enumerate() {
            let line = i as u64 + 2;
            let rec = rec?;
            let a = rec.get(0).unwrap_or("");
            let b = rec.get(1).unwrap_or("");
            if a.is_empty() || b.is_empty() {
                return Err(Error::parse(source, line, "empty id"));
            }
            let genuine =
                parse_flag(rec.get(2).unwrap_or("")).ok_or_else(|| Error::parse(source, line, "bad genuine flag"))?;
            let relation = rec
                .get(3)
                .unwrap_or("")
                .parse::<SideRelation>()
                .map_err(|e| Error::parse(source, line, e))?;
            pairs.push(Pair {
                a: intern(a),
                b: intern(b),
                genuine,
                relation,
            });
        }
        let protocol = infer_protocol(pairs.iter().map(|p| p.relation));
        Ok(PairSet { protocol, ids, pairs })
    }
}

fn parse_flag(s: &str) -> Option<bool> {
    match s.to_ascii_lowercase().as_str() {
        "1" | "true" => Some(true),
        "0" | "false" => Some(false),
        _ => None,
    }
}

fn infer_protocol(relations: impl Iterator<Item = SideRelation>) -> Protocol {
    let mut seen = BTreeSet::new();
    for r in relations {
        seen.insert(r.name());
    }
    match seen.into_iter().collect::<Vec<_>>().as_slice() {
        ["same"] => Protocol::SameSide,
        ["opposite"] => Protocol::OppositeSide,
        _ => Protocol::All,
    }
}

/// Options for [`generate_pairs_with`].
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairOptions {
    /// Keep at most this many impostor pairs, chosen uniformly with `seed`.
    pub impostor_limit: Option<usize>,
    pub seed: u64,
}

/// All unordered TEST pairs admitted by `protocol`.
pub fn generate_pairs(manifest: &Manifest, protocol: Protocol) -> Result<PairSet> {
    generate_pairs_with(manifest, protocol, &PairOptions::default())
}

pub fn generate_pairs_with(manifest: &Manifest, protocol: Protocol, opts: &PairOptions) -> Result<PairSet> {
    let mut test: Vec<_> = manifest.split(Split::Test).collect();
    if test.len() < 2 {
        return Err(Error::TooFewImages(test.len()));
    }
    test.sort_by(|a, b| a.id.cmp(&b.id));
    if protocol != Protocol::All {
        if let Some(e) = test.iter().find(|e| e.side.is_none()) {
            return Err(Error::MissingSideLabel(e.id.clone()));
        }
    }
    let mut pairs = Vec::new();
    for i in 0..test.len() {
        for j in i + 1..test.len() {
            let (a, b) = (test[i], test[j]);
            if !protocol.admits(a.side, b.side) {
                continue;
            }
            pairs.push(Pair {
                a: i as u32,
                b: j as u32,
                genuine: a.subject == b.subject,
                relation: SideRelation::of(a.side, b.side),
            });
        }
    }
    if let Some(limit) = opts.impostor_limit {
        let impostors: Vec<usize> = (0..pairs.len()).filter(|&i| !pairs[i].genuine).collect();
        if impostors.len() > limit {
            let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
            let keep: BTreeSet<usize> = rand::seq::index::sample(&mut rng, impostors.len(), limit)
                .into_iter()
                .map(|k| impostors[k])
                .collect();
            let mut idx = 0;
            pairs.retain(|p| {
                let ok = p.genuine || keep.contains(&idx);
                idx += 1;
                ok
            });
        }
    }
    Ok(PairSet {
        protocol,
        ids: test.iter().map(|e| e.id.clone()).collect(),
        pairs,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScoredPair {
    pub score: f64,
    pub genuine: bool,
    pub relation: SideRelation,
}

/// Similarity scores in pair order, tagged with the protocol that produced them.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreSet {
    pub protocol: Protocol,
    pub scores: Vec<ScoredPair>,
}

impl ScoreSet {
    pub fn genuine(&self) -> Vec<f64> {
        self.scores.iter().filter(|s| s.genuine).map(|s| s.score).collect()
    }

    pub fn impostor(&self) -> Vec<f64> {
        self.scores.iter().filter(|s| !s.genuine).map(|s| s.score).collect()
    }

    /// Scores snapped to their CSV text form, matching what a write/read cycle yields.
    pub fn quantized(&self) -> ScoreSet {
        ScoreSet {
            protocol: self.protocol,
            scores: self
                .scores
                .iter()
                .map(|s| ScoredPair {
                    score: csv_float(s.score).parse().expect("formatted float parses"),
                    ..*s
                })
                .collect(),
        }
    }

    pub fn write_csv(&self, w: impl Write) -> Result<()> {
        let mut w = csv::Writer::from_writer(w);
        w.write_record(["score", "genuine", "side_relation"])?;
        for s in &self.scores {
            w.write_record([
                csv_float(s.score).as_str(),
                if s.genuine { "1" } else { "0" },
                s.relation.name(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv(r: impl Read, source: &str) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(r);
        let headers = rdr.headers()?.clone();
        if headers.iter().collect::<Vec<_>>() != ["score", "genuine", "side_relation"] {
            return Err(Error::parse(source, 1, "expected header `score,genuine,side_relation`"));
        }
        let mut scores = Vec::new();
        for (i, rec) in rdr.records().enumerate() {
            let line = i as u64 + 2;
            let rec = rec?;
            let score = rec
                .get(0)
                .and_then(|s| s.parse::<f64>().ok())
                .filter(|v| v.is_finite())
                .ok_or_else(|| Error::parse(source, line, "bad score"))?;
            let genuine =
                parse_flag(rec.get(1).unwrap_or("")).ok_or_else(|| Error::parse(source, line, "bad genuine flag"))?;
            let relation = rec
                .get(2)
                .unwrap_or("")
                .parse::<SideRelation>()
                .map_err(|e| Error::parse(source, line, e))?;
            scores.push(ScoredPair {
                score,
                genuine,
                relation,
            });
        }
        let protocol = infer_protocol(scores.iter().map(|s| s.relation));
        Ok(ScoreSet { protocol, scores })
    }
}

/// Cosine score for every pair, in pair order.
pub fn score_pairs(pairs: &PairSet, embeddings: &BTreeMap<String, Embedding>) -> Result<ScoreSet> {
    let resolved: Vec<&Embedding> = pairs
        .ids
        .iter()
        .map(|id| embeddings.get(id).ok_or_else(|| Error::MissingEmbedding(id.clone())))
        .collect::<Result<_>>()?;
    let scores = pairs
        .pairs
        .par_iter()
        .map(|p| {
            let score = cosine(resolved[p.a as usize], resolved[p.b as usize])?;
            Ok(ScoredPair {
                score,
                genuine: p.genuine,
                relation: p.relation,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ScoreSet {
        protocol: pairs.protocol,
        scores,
    })
}
