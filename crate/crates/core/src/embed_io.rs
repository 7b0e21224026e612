//! Embedding dumps: the `EMB1` binary container, a CSV fallback for
//! hand-written fixtures, and seeded paired subsampling.
//!
//! `EMB1` layout, little-endian throughout:
//!
//! ```text
//! "EMB1" | version u32 = 1 | n u32 | d u32 | modality u8 (0 vision, 1 text)
//! | source_len u32 | source utf-8
//! | n x (id_len u32 | id utf-8)
//! | n*d f32, row-major
//! ```

use std::collections::HashSet;
use std::fs;
use std::io::Write;
use std::path::Path;

use ndarray::{Array2, ArrayView1, ArrayView2, Axis};

use crate::error::{Error, Result};
use crate::rng::{partial_shuffle, SplitMix64};

pub const EMB1_MAGIC: &[u8; 4] = b"EMB1";
pub const EMB1_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Modality {
    Vision,
    Text,
}

impl Modality {
    fn tag(self) -> u8 {
        match self {
            Modality::Vision => 0,
            Modality::Text => 1,
        }
    }

    fn from_tag(tag: u8) -> Result<Self> {
        match tag {
            0 => Ok(Modality::Vision),
            1 => Ok(Modality::Text),
            other => Err(Error::Format(format!("unknown modality tag {other}"))),
        }
    }
}

/// One modality's sampled representations. Row `i` embeds `ids[i]`.
///
/// Construction validates every invariant, so a value of this type always
/// has `n >= 2`, `d >= 1`, unique ids, and finite nonzero rows.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingSet {
    ids: Vec<String>,
    modality: Modality,
    data: Array2<f32>,
    source: String,
}

impl EmbeddingSet {
    pub fn new(
        ids: Vec<String>,
        modality: Modality,
        data: Array2<f32>,
        source: impl Into<String>,
    ) -> Result<Self> {
        let (n, d) = data.dim();
        if n < 2 {
            return Err(Error::InvalidSet(format!("need at least 2 rows, got {n}")));
        }
        if d < 1 {
            return Err(Error::InvalidSet("embedding dimension must be >= 1".into()));
        }
        if ids.len() != n {
            return Err(Error::InvalidSet(format!(
                "{} ids for {n} rows",
                ids.len()
            )));
        }
        let mut seen = HashSet::with_capacity(n);
        for (row, id) in ids.iter().enumerate() {
            if !seen.insert(id.as_str()) {
                return Err(Error::Validation {
                    row,
                    reason: format!("duplicate id `{id}`"),
                });
            }
        }
        for (row, values) in data.axis_iter(Axis(0)).enumerate() {
            validate_row(row, values)?;
        }
        Ok(Self {
            ids,
            modality,
            data,
            source: source.into(),
        })
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn modality(&self) -> Modality {
        self.modality
    }

    pub fn data(&self) -> ArrayView2<'_, f32> {
        self.data.view()
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    pub fn len(&self) -> usize {
        self.data.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dim(&self) -> usize {
        self.data.ncols()
    }

    /// Rows widened to `f64`.
    pub fn to_f64(&self) -> Array2<f64> {
        self.data.mapv(f64::from)
    }

    pub fn with_modality(mut self, modality: Modality) -> Self {
        self.modality = modality;
        self
    }

    /// Subset by row indices, in the order given.
    pub fn select(&self, indices: &[usize]) -> Result<Self> {
        let ids = indices.iter().map(|&i| self.ids[i].clone()).collect();
        let data = self.data.select(Axis(0), indices);
        Self::new(ids, self.modality, data, self.source.clone())
    }
}

fn validate_row(row: usize, values: ArrayView1<'_, f32>) -> Result<()> {
    if let Some(col) = values.iter().position(|v| !v.is_finite()) {
        return Err(Error::Validation {
            row,
            reason: format!("non-finite value at column {col}"),
        });
    }
    if values.iter().all(|&v| v == 0.0) {
        return Err(Error::Validation {
            row,
            reason: "zero-norm row".into(),
        });
    }
    Ok(())
}

/// Corresponding image/text rows drawn with one seed.
#[derive(Debug, Clone, PartialEq)]
pub struct PairedSample {
    pub vision: EmbeddingSet,
    pub text: EmbeddingSet,
    pub seed: u64,
}

pub fn read_embeddings(path: impl AsRef<Path>) -> Result<EmbeddingSet> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    if bytes.starts_with(EMB1_MAGIC) {
        return decode_emb1(&bytes);
    }
    let is_csv = path
        .extension()
        .and_then(|e| e.to_str())
        .is_some_and(|e| e.eq_ignore_ascii_case("csv"));
    if is_csv {
        let text = String::from_utf8(bytes)
            .map_err(|_| Error::Format("CSV file is not valid UTF-8".into()))?;
        let source = path
            .file_stem()
            .and_then(|s| s.to_str())
            .unwrap_or_default()
            .to_owned();
        return parse_csv(&text, &source);
    }
    Err(Error::Format(format!(
        "{}: missing EMB1 magic and not a .csv file",
        path.display()
    )))
}

/// Writes `set` as `EMB1`. The payload carries no timestamps, so identical
/// sets produce identical files.
pub fn write_embeddings(set: &EmbeddingSet, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let bytes = encode_emb1(set)?;
    let mut file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    file.write_all(&bytes).map_err(|e| Error::io(path, e))
}

/// CSV fallback writer (`id,v0,v1,...`). Modality and source are not stored.
pub fn write_embeddings_csv(set: &EmbeddingSet, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut out = String::from("id");
    for j in 0..set.dim() {
        out.push_str(&format!(",v{j}"));
    }
    out.push('\n');
    for (id, row) in set.ids.iter().zip(set.data.axis_iter(Axis(0))) {
        out.push_str(id);
        for v in row {
            out.push_str(&format!(",{v}"));
        }
        out.push('\n');
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

pub fn encode_emb1(set: &EmbeddingSet) -> Result<Vec<u8>> {
    // Re-validate: an EmbeddingSet is valid by construction, but the
    // header fields are u32.
    let n = u32::try_from(set.len()).map_err(|_| Error::InvalidSet("n exceeds u32".into()))?;
    let d = u32::try_from(set.dim()).map_err(|_| Error::InvalidSet("d exceeds u32".into()))?;
    let mut buf = Vec::with_capacity(32 + set.len() * (8 + 4 * set.dim()));
    buf.extend_from_slice(EMB1_MAGIC);
    buf.extend_from_slice(&EMB1_VERSION.to_le_bytes());
    buf.extend_from_slice(&n.to_le_bytes());
    buf.extend_from_slice(&d.to_le_bytes());
    buf.push(set.modality.tag());
    put_str(&mut buf, &set.source)?;
    for id in &set.ids {
        put_str(&mut buf, id)?;
    }
    for v in set.data.iter() {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    Ok(buf)
}

fn put_str(buf: &mut Vec<u8>, s: &str) -> Result<()> {
    let len = u32::try_from(s.len()).map_err(|_| Error::InvalidSet("string exceeds u32".into()))?;
    buf.extend_from_slice(&len.to_le_bytes());
    buf.extend_from_slice(s.as_bytes());
    Ok(())
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, len: usize, what: &str) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(len)
            .filter(|&end| end <= self.bytes.len())
            .ok_or_else(|| {
                Error::Format(format!(
                    "truncated payload while reading {what} at byte {}",
                    self.pos
                ))
            })?;
        let out = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        let b = self.take(4, what)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
    }

    fn string(&mut self, what: &str) -> Result<String> {
        let len = self.u32(what)? as usize;
        let raw = self.take(len, what)?;
        String::from_utf8(raw.to_vec()).map_err(|_| Error::Format(format!("{what} is not UTF-8")))
    }
}

pub fn decode_emb1(bytes: &[u8]) -> Result<EmbeddingSet> {
    let mut r = Reader { bytes, pos: 0 };
    if r.take(4, "magic")? != EMB1_MAGIC {
        return Err(Error::Format("bad magic, expected EMB1".into()));
    }
    let version = r.u32("version")?;
    if version != EMB1_VERSION {
        return Err(Error::Format(format!("unsupported EMB1 version {version}")));
    }
    let n = r.u32("n")? as usize;
    let d = r.u32("d")? as usize;
    let modality = Modality::from_tag(r.take(1, "modality")?[0])?;
    let source = r.string("source metadata")?;
    let mut ids = Vec::with_capacity(n.min(1 << 20));
    for i in 0..n {
        ids.push(r.string(&format!("id {i}"))?);
    }
    let payload_len = n
        .checked_mul(d)
        .and_then(|c| c.checked_mul(4))
        .ok_or_else(|| Error::Format("payload size overflows".into()))?;
    let payload = r.take(payload_len, "payload")?;
    if r.pos != bytes.len() {
        return Err(Error::Format(format!(
            "{} trailing bytes after payload",
            bytes.len() - r.pos
        )));
    }
    let values: Vec<f32> = payload
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
        .collect();
    let data = Array2::from_shape_vec((n, d), values)
        .map_err(|e| Error::Format(format!("payload shape: {e}")))?;
    EmbeddingSet::new(ids, modality, data, source)
}

fn parse_csv(text: &str, source: &str) -> Result<EmbeddingSet> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header = lines
        .next()
        .ok_or_else(|| Error::Format("empty CSV".into()))?;
    let columns: Vec<&str> = header.split(',').map(str::trim).collect();
    if columns.first() != Some(&"id") || columns.len() < 2 {
        return Err(Error::Format("CSV header must be `id,v0,v1,...`".into()));
    }
    let d = columns.len() - 1;
    let mut ids = Vec::new();
    let mut values = Vec::new();
    for (row, line) in lines.enumerate() {
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != d + 1 {
            return Err(Error::Format(format!(
                "CSV row {row} has {} fields, expected {}",
                fields.len(),
                d + 1
            )));
        }
        ids.push(fields[0].to_owned());
        for f in &fields[1..] {
            let v: f32 = f.parse().map_err(|_| Error::Validation {
                row,
                reason: format!("cannot parse `{f}` as a number"),
            })?;
            values.push(v);
        }
    }
    let n = ids.len();
    let data = Array2::from_shape_vec((n, d), values)
        .map_err(|e| Error::Format(format!("CSV shape: {e}")))?;
    EmbeddingSet::new(ids, Modality::Vision, data, source)
}

/// Sorted indices of `count` rows drawn without replacement from `0..n`.
pub fn sample_indices(n: usize, count: usize, seed: u64) -> Result<Vec<usize>> {
    if count > n {
        return Err(Error::Size {
            requested: count,
            available: n,
        });
    }
    if count == 0 {
        return Err(Error::Parameter("sample count must be positive".into()));
    }
    let mut rng = SplitMix64::new(seed);
    let mut picked = partial_shuffle(n, count, &mut rng);
    picked.sort_unstable();
    Ok(picked)
}

/// Draws `count` corresponding rows from both modalities.
///
/// Indices come from a partial Fisher-Yates shuffle driven by SplitMix64
/// seeded with `seed`, then sorted ascending so output rows keep file order.
pub fn sample_pairs(
    vision: &EmbeddingSet,
    text: &EmbeddingSet,
    count: usize,
    seed: u64,
) -> Result<PairedSample> {
    check_paired(vision, text)?;
    let indices = sample_indices(vision.len(), count, seed)?;
    Ok(PairedSample {
        vision: vision.select(&indices)?,
        text: text.select(&indices)?,
        seed,
    })
}

pub(crate) fn check_paired(vision: &EmbeddingSet, text: &EmbeddingSet) -> Result<()> {
    if vision.len() != text.len() {
        return Err(Error::Pairing(format!(
            "vision has {} rows, text has {}",
            vision.len(),
            text.len()
        )));
    }
    if let Some(i) = (0..vision.len()).find(|&i| vision.ids[i] != text.ids[i]) {
        return Err(Error::Pairing(format!(
            "id mismatch at row {i}: `{}` vs `{}`",
            vision.ids[i], text.ids[i]
        )));
    }
    Ok(())
}
