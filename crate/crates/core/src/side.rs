//! Left/right labels for ear images.
//!
//! Labels come from manifest metadata, from an external classifier's
//! predictions, or from a geometric baseline: the sign of the skewness of the
//! mask's column coordinates.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::manifest::Manifest;
use crate::raster::Mask;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Side {
    #[serde(rename = "L")]
    Left,
    #[serde(rename = "R")]
    Right,
}

impl Side {
    pub fn code(self) -> &'static str {
        match self {
            Side::Left => "L",
            Side::Right => "R",
        }
    }

    pub fn opposite(self) -> Side {
        match self {
            Side::Left => Side::Right,
            Side::Right => Side::Left,
        }
    }
}

impl fmt::Display for Side {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

impl FromStr for Side {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "l" | "left" => Ok(Side::Left),
            "r" | "right" => Ok(Side::Right),
            other => Err(format!("unknown side `{other}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SideSource {
    Metadata,
    External,
    Geometric,
}

impl fmt::Display for SideSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SideSource::Metadata => "metadata",
            SideSource::External => "external",
            SideSource::Geometric => "geometric",
        })
    }
}

impl FromStr for SideSource {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "metadata" => Ok(SideSource::Metadata),
            "external" => Ok(SideSource::External),
            "geometric" => Ok(SideSource::Geometric),
            other => Err(format!("unknown side source `{other}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SideLabel {
    pub value: Side,
    pub source: SideSource,
}

/// Which skewness sign maps to a right ear.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SkewConvention {
    #[default]
    PositiveRight,
    PositiveLeft,
}

impl FromStr for SkewConvention {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().replace('_', "-").as_str() {
            "positive-right" => Ok(SkewConvention::PositiveRight),
            "positive-left" => Ok(SkewConvention::PositiveLeft),
            other => Err(format!("unknown skew convention `{other}`")),
        }
    }
}

/// Sample skewness of the set pixels' column coordinates.
///
/// Returns 0 when every set pixel shares one column.
pub fn column_skewness(mask: &Mask) -> f64 {
    let cols: Vec<f64> = mask.set_pixels().map(|(_, c)| c as f64).collect();
    if cols.is_empty() {
        return 0.0;
    }
    let n = cols.len() as f64;
    let mean = cols.iter().sum::<f64>() / n;
    let (mut m2, mut m3) = (0.0, 0.0);
    for c in &cols {
        let d = c - mean;
        m2 += d * d;
        m3 += d * d * d;
    }
    m2 /= n;
    m3 /= n;
    if m2 <= 0.0 {
        return 0.0;
    }
    m3 / m2.powf(1.5)
}

fn column_sums(mask: &Mask) -> (u64, u128, u128, u128) {
    let (mut n, mut s1, mut s2, mut s3) = (0u64, 0u128, 0u128, 0u128);
    for (_, c) in mask.set_pixels() {
        let c = c as u128;
        n += 1;
        s1 += c;
        s2 += c * c;
        s3 += c * c * c;
    }
    (n, s1, s2, s3)
}

/// Exact sign of the third central moment of the column coordinates.
///
/// `n^2 S3 - 3 n S1 S2 + 2 S1^3` equals `n^3` times the third central moment,
/// so its sign is computed without rounding.
fn skew_sign(mask: &Mask) -> Ordering3 {
    let (n, s1, s2, s3) = column_sums(mask);
    let exact = (|| {
        let n = i128::from(n);
        let (s1, s2, s3) = (
            i128::try_from(s1).ok()?,
            i128::try_from(s2).ok()?,
            i128::try_from(s3).ok()?,
        );
        let a = n.checked_mul(n)?.checked_mul(s3)?;
        let b = n.checked_mul(3)?.checked_mul(s1)?.checked_mul(s2)?;
        let c = s1.checked_mul(s1)?.checked_mul(s1)?.checked_mul(2)?;
        a.checked_sub(b)?.checked_add(c)
    })();
    match exact {
        Some(v) => v.cmp(&0).into(),
        None => {
            let s = column_skewness(mask);
            if s > 0.0 {
                Ordering3::Positive
            } else if s < 0.0 {
                Ordering3::Negative
            } else {
                Ordering3::Zero
            }
        }
    }
}

enum Ordering3 {
    Negative,
    Zero,
    Positive,
}

impl From<std::cmp::Ordering> for Ordering3 {
    fn from(o: std::cmp::Ordering) -> Self {
        match o {
            std::cmp::Ordering::Less => Ordering3::Negative,
            std::cmp::Ordering::Equal => Ordering3::Zero,
            std::cmp::Ordering::Greater => Ordering3::Positive,
        }
    }
}

/// Geometric side baseline. Exact zero skew resolves to LEFT.
pub fn classify_side_geometric(mask: &Mask, convention: SkewConvention) -> Result<SideLabel> {
    let count = mask.count();
    if count < 3 {
        return Err(Error::DegenerateMask(format!("{count} set pixel(s), need at least 3")));
    }
    let positive = match convention {
        SkewConvention::PositiveRight => Side::Right,
        SkewConvention::PositiveLeft => Side::Left,
    };
    let value = match skew_sign(mask) {
        Ordering3::Positive => positive,
        Ordering3::Negative => positive.opposite(),
        Ordering3::Zero => Side::Left,
    };
    Ok(SideLabel {
        value,
        source: SideSource::Geometric,
    })
}

/// An image whose available side sources disagree.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Conflict {
    pub id: String,
    pub metadata: Option<Side>,
    pub external: Option<Side>,
    pub geometric: Option<Side>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SideResolution {
    pub labels: BTreeMap<String, SideLabel>,
    /// Sorted by image id.
    pub conflicts: Vec<Conflict>,
}

/// Assigns one label per manifest entry with precedence
/// metadata > external > geometric.
pub fn resolve_sides(
    manifest: &Manifest,
    masks: Option<&BTreeMap<String, Mask>>,
    external: Option<&BTreeMap<String, Side>>,
    convention: SkewConvention,
) -> Result<SideResolution> {
    let mut out = SideResolution::default();
    for entry in manifest.entries() {
        let metadata = entry.side;
        let ext = external.and_then(|m| m.get(&entry.id)).copied();
        let geometric = match masks.and_then(|m| m.get(&entry.id)) {
            Some(mask) => Some(classify_side_geometric(mask, convention)?.value),
            None => None,
        };
        let label = if let Some(v) = metadata {
            SideLabel {
                value: v,
                source: SideSource::Metadata,
            }
        } else if let Some(v) = ext {
            SideLabel {
                value: v,
                source: SideSource::External,
            }
        } else if let Some(v) = geometric {
            SideLabel {
                value: v,
                source: SideSource::Geometric,
            }
        } else {
            return Err(Error::UnlabelableImage(entry.id.clone()));
        };
        let present: Vec<Side> = [metadata, ext, geometric].into_iter().flatten().collect();
        if present.iter().any(|&s| s != present[0]) {
            out.conflicts.push(Conflict {
                id: entry.id.clone(),
                metadata,
                external: ext,
                geometric,
            });
        }
        out.labels.insert(entry.id.clone(), label);
    }
    out.conflicts.sort_by(|a, b| a.id.cmp(&b.id));
    Ok(out)
}

/// Reads an `id,side` prediction file.
pub fn read_predictions(path: &Path) -> Result<BTreeMap<String, Side>> {
    let display = path.display().to_string();
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_path(path)?;
    let headers = rdr.headers()?.clone();
    let (Some(id_col), Some(side_col)) = (
        headers.iter().position(|h| h == "id"),
        headers.iter().position(|h| h == "side"),
    ) else {
        return Err(Error::parse(display, 1, "expected header `id,side`"));
    };
    let mut out = BTreeMap::new();
    for (i, rec) in rdr.records().enumerate() {
        let line = i as u64 + 2;
        let rec = rec?;
        let id = rec.get(id_col).unwrap_or("").to_string();
        let side = rec
            .get(side_col)
            .unwrap_or("")
            .parse::<Side>()
            .map_err(|e| Error::parse(display.clone(), line, e))?;
        if id.is_empty() {
            return Err(Error::parse(display.clone(), line, "empty id"));
        }
        out.insert(id, side);
    }
    Ok(out)
}

/// Writes resolved labels as `id,side,source`, sorted by id.
pub fn write_labels(path: &Path, labels: &BTreeMap<String, SideLabel>) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["id", "side", "source"])?;
    for (id, label) in labels {
        w.write_record([id.as_str(), label.value.code(), &label.source.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

/// Reads an `id,side[,source]` label file; a missing source means external.
pub fn read_labels(path: &Path) -> Result<BTreeMap<String, SideLabel>> {
    let display = path.display().to_string();
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_path(path)?;
    let headers = rdr.headers()?.clone();
    let col = |name: &str| headers.iter().position(|h| h == name);
    let (Some(id_col), Some(side_col)) = (col("id"), col("side")) else {
        return Err(Error::parse(display, 1, "expected header `id,side[,source]`"));
    };
    let source_col = col("source");
    let mut out = BTreeMap::new();
    for (i, rec) in rdr.records().enumerate() {
        let line = i as u64 + 2;
        let rec = rec?;
        let value = rec
            .get(side_col)
            .unwrap_or("")
            .parse::<Side>()
            .map_err(|e| Error::parse(display.clone(), line, e))?;
        let source = match source_col.and_then(|c| rec.get(c)) {
            Some(s) if !s.is_empty() => s.parse().map_err(|e: String| Error::parse(display.clone(), line, e))?,
            _ => SideSource::External,
        };
        out.insert(rec.get(id_col).unwrap_or("").to_string(), SideLabel { value, source });
    }
    Ok(out)
}
