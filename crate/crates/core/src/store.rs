//! `EARB` embedding store.
//!
//! A store is a directory holding `embeddings.earb` and `index.csv`. The binary
//! file is little-endian: magic `EARB`, version `u32 = 1`, `dim u32`,
//! `count u32`, then `count * dim` `f32` values row-major. `index.csv` has
//! header `row,id` and maps each binary row to an image id.

use std::collections::{BTreeMap, HashMap};
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use crate::embedding::Embedding;
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"EARB";
pub const VERSION: u32 = 1;
pub const BINARY_NAME: &str = "embeddings.earb";
pub const INDEX_NAME: &str = "index.csv";

#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingStore {
    dim: usize,
    ids: Vec<String>,
    values: Vec<f32>,
    rows: HashMap<String, usize>,
}

impl EmbeddingStore {
    pub fn new(dim: usize) -> Self {
        Self {
            dim,
            ids: Vec::new(),
            values: Vec::new(),
            rows: HashMap::new(),
        }
    }

    /// Builds a store from `(id, embedding)` pairs, narrowing values to f32.
    pub fn from_embeddings<'a, I>(dim: usize, items: I) -> Result<Self>
    where
        I: IntoIterator<Item = (&'a str, &'a Embedding)>,
    {
        let mut store = Self::new(dim);
        for (id, e) in items {
            let row: Vec<f32> = e.values().iter().map(|&v| v as f32).collect();
            store.push(id, &row)?;
        }
        Ok(store)
    }

    pub fn push(&mut self, id: &str, row: &[f32]) -> Result<()> {
        if row.len() != self.dim {
            return Err(Error::DimMismatch {
                expected: self.dim,
                got: row.len(),
            });
        }
        if self.rows.contains_key(id) {
            return Err(Error::DuplicateId {
                id: id.to_string(),
                first_line: self.rows[id] as u64 + 2,
                second_line: self.ids.len() as u64 + 2,
            });
        }
        self.rows.insert(id.to_string(), self.ids.len());
        self.ids.push(id.to_string());
        self.values.extend_from_slice(row);
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn row(&self, id: &str) -> Option<&[f32]> {
        self.rows
            .get(id)
            .map(|&r| &self.values[r * self.dim..(r + 1) * self.dim])
    }

    pub fn embedding(&self, id: &str) -> Result<Embedding> {
        let row = self.row(id).ok_or_else(|| Error::MissingEmbedding(id.to_string()))?;
        Embedding::from_f32(row)
    }

    /// All rows widened to f64, keyed by id.
    pub fn to_map(&self) -> Result<BTreeMap<String, Embedding>> {
        self.ids
            .iter()
            .map(|id| Ok((id.clone(), self.embedding(id)?)))
            .collect()
    }

    pub fn write_binary(&self, mut w: impl Write) -> Result<()> {
        let count = u32::try_from(self.len()).map_err(|_| Error::InvalidParameter("too many rows".into()))?;
        let dim = u32::try_from(self.dim).map_err(|_| Error::InvalidParameter("dim too large".into()))?;
        w.write_all(MAGIC)?;
        w.write_all(&VERSION.to_le_bytes())?;
        w.write_all(&dim.to_le_bytes())?;
        w.write_all(&count.to_le_bytes())?;
        for v in &self.values {
            w.write_all(&v.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn write_index(&self, w: impl Write) -> Result<()> {
        let mut w = csv::Writer::from_writer(w);
        w.write_record(["row", "id"])?;
        for (i, id) in self.ids.iter().enumerate() {
            w.write_record([i.to_string().as_str(), id])?;
        }
        w.flush()?;
        Ok(())
    }

    /// Parses the binary part; rows get placeholder ids until an index is attached.
    fn read_binary(mut r: impl Read, path: &Path) -> Result<(usize, usize, Vec<f32>)> {
        let mut header = [0u8; 16];
        read_exact_or_truncated(&mut r, &mut header, "header")?;
        if &header[0..4] != MAGIC {
            return Err(Error::MagicMismatch(path.to_path_buf()));
        }
        let word = |i: usize| u32::from_le_bytes(header[i..i + 4].try_into().expect("4 bytes"));
        let version = word(4);
        if version != VERSION {
            return Err(Error::UnsupportedVersion(version));
        }
        let dim = word(8) as usize;
        let count = word(12) as usize;
        let mut bytes = vec![0u8; dim * count * 4];
        read_exact_or_truncated(&mut r, &mut bytes, "embedding rows")?;
        let mut trailing = [0u8; 1];
        if r.read(&mut trailing)? != 0 {
            return Err(Error::TruncatedFile(format!(
                "{}: trailing bytes after {count} rows",
                path.display()
            )));
        }
        let values = bytes
            .chunks_exact(4)
            .map(|b| f32::from_le_bytes(b.try_into().expect("4 bytes")))
            .collect();
        Ok((dim, count, values))
    }

    fn read_index(r: impl Read, path: &Path) -> Result<Vec<String>> {
        let display = path.display().to_string();
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(r);
        let headers = rdr.headers()?.clone();
        if headers.iter().collect::<Vec<_>>() != ["row", "id"] {
            return Err(Error::parse(display, 1, "expected header `row,id`"));
        }
        let mut ids = Vec::new();
        for (i, rec) in rdr.records().enumerate() {
            let rec = rec?;
            let line = i as u64 + 2;
            let row: usize = rec
                .get(0)
                .and_then(|s| s.parse().ok())
                .ok_or_else(|| Error::parse(display.clone(), line, "bad row number"))?;
            if row != i {
                return Err(Error::parse(
                    display.clone(),
                    line,
                    format!("expected row {i}, found {row}"),
                ));
            }
            ids.push(rec.get(1).unwrap_or("").to_string());
        }
        Ok(ids)
    }

    pub fn from_parts(binary: impl Read, index: impl Read, path: &Path) -> Result<Self> {
        let (dim, count, values) = Self::read_binary(binary, &path.join(BINARY_NAME))?;
        let ids = Self::read_index(index, &path.join(INDEX_NAME))?;
        if ids.len() != count {
            return Err(Error::TruncatedFile(format!(
                "{}: index lists {} rows but binary holds {count}",
                path.display(),
                ids.len()
            )));
        }
        let mut store = Self::new(dim);
        for (i, id) in ids.iter().enumerate() {
            store.push(id, &values[i * dim..(i + 1) * dim])?;
        }
        Ok(store)
    }

    pub fn binary_path(dir: &Path) -> PathBuf {
        dir.join(BINARY_NAME)
    }

    pub fn index_path(dir: &Path) -> PathBuf {
        dir.join(INDEX_NAME)
    }

    pub fn save(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        let mut bin = BufWriter::new(File::create(Self::binary_path(dir))?);
        self.write_binary(&mut bin)?;
        bin.flush()?;
        self.write_index(File::create(Self::index_path(dir))?)
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let bin = BufReader::new(File::open(Self::binary_path(dir))?);
        let index = File::open(Self::index_path(dir))?;
        Self::from_parts(bin, index, dir)
    }
}

fn read_exact_or_truncated(r: &mut impl Read, buf: &mut [u8], what: &str) -> Result<()> {
    r.read_exact(buf).map_err(|e| match e.kind() {
        std::io::ErrorKind::UnexpectedEof => Error::TruncatedFile(format!("{what} cut short")),
        _ => Error::Io(e),
    })
}
