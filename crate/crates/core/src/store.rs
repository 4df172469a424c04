//! Binary cascade store: `cascades.bin` holds one record per cascade,
//! `cascades.idx` holds the byte offset of every record. Both files start
//! with an 8-byte magic and a little-endian `u32` format version.
//!
//! Record layout (all integers little-endian):
//!
//! ```text
//! u32 len, bytes            cascade_id
//! u32 n                     node count
//! n x (u32 len, bytes)      user ids, root first
//! n x i64                   event times
//! u32 m                     edge count
//! m x (u32, u32, u32)       source, target, weight
//! ```

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Seek, SeekFrom, Write};
use std::path::{Path, PathBuf};

use crate::cascade::{CascadeGraph, Edge};
use crate::error::{Error, Result};

pub const DATA_MAGIC: [u8; 8] = *b"CSCDATA\0";
pub const INDEX_MAGIC: [u8; 8] = *b"CSCINDX\0";
pub const FORMAT_VERSION: u32 = 1;
pub const DATA_FILE: &str = "cascades.bin";
pub const INDEX_FILE: &str = "cascades.idx";

fn corrupt(msg: impl Into<String>) -> Error {
    Error::Store(msg.into())
}

pub fn encode(c: &CascadeGraph, out: &mut Vec<u8>) {
    let put_str = |out: &mut Vec<u8>, s: &str| {
        out.extend_from_slice(&(s.len() as u32).to_le_bytes());
        out.extend_from_slice(s.as_bytes());
    };
    put_str(out, c.cascade_id());
    out.extend_from_slice(&(c.node_count() as u32).to_le_bytes());
    for u in c.users() {
        put_str(out, u);
    }
    for t in c.event_times() {
        out.extend_from_slice(&t.to_le_bytes());
    }
    out.extend_from_slice(&(c.edges().len() as u32).to_le_bytes());
    for e in c.edges() {
        out.extend_from_slice(&e.source.to_le_bytes());
        out.extend_from_slice(&e.target.to_le_bytes());
        out.extend_from_slice(&e.weight.to_le_bytes());
    }
}

struct Cursor<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.buf.len())
            .ok_or_else(|| corrupt("truncated record"))?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn i64(&mut self) -> Result<i64> {
        Ok(i64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn string(&mut self) -> Result<String> {
        let n = self.u32()? as usize;
        String::from_utf8(self.take(n)?.to_vec()).map_err(|_| corrupt("invalid UTF-8"))
    }
}

/// Decodes one record; returns the graph and the bytes consumed.
pub fn decode(buf: &[u8]) -> Result<(CascadeGraph, usize)> {
    let mut c = Cursor { buf, pos: 0 };
    let id = c.string()?;
    let n = c.u32()? as usize;
    let mut users = Vec::with_capacity(n.min(buf.len()));
    for _ in 0..n {
        users.push(c.string()?);
    }
    let mut times = Vec::with_capacity(n);
    for _ in 0..n {
        times.push(c.i64()?);
    }
    let m = c.u32()? as usize;
    let mut edges = Vec::with_capacity(m.min(buf.len() / 12));
    for _ in 0..m {
        edges.push(Edge {
            source: c.u32()?,
            target: c.u32()?,
            weight: c.u32()?,
        });
    }
    let g = CascadeGraph::new(id, users, times, edges)?;
    Ok((g, c.pos))
}

fn write_header<W: Write>(w: &mut W, magic: &[u8; 8]) -> Result<()> {
    w.write_all(magic)?;
    w.write_all(&FORMAT_VERSION.to_le_bytes())?;
    Ok(())
}

fn check_header(buf: &[u8], magic: &[u8; 8], what: &str) -> Result<()> {
    if buf.len() < 12 || &buf[..8] != magic {
        return Err(corrupt(format!("{what}: not a cascade store file")));
    }
    let v = u32::from_le_bytes(buf[8..12].try_into().unwrap());
    if v != FORMAT_VERSION {
        return Err(corrupt(format!(
            "{what}: unsupported format version {v} (expected {FORMAT_VERSION})"
        )));
    }
    Ok(())
}

/// Appends cascades to a new store in `dir`.
pub struct StoreWriter {
    data: BufWriter<File>,
    offsets: Vec<u64>,
    pos: u64,
    dir: PathBuf,
    scratch: Vec<u8>,
}

impl StoreWriter {
    pub fn create(dir: &Path) -> Result<Self> {
        std::fs::create_dir_all(dir)?;
        let mut data = BufWriter::new(File::create(dir.join(DATA_FILE))?);
        write_header(&mut data, &DATA_MAGIC)?;
        Ok(Self {
            data,
            offsets: Vec::new(),
            pos: 12,
            dir: dir.to_owned(),
            scratch: Vec::new(),
        })
    }

    pub fn append(&mut self, c: &CascadeGraph) -> Result<()> {
        self.scratch.clear();
        encode(c, &mut self.scratch);
        self.data.write_all(&self.scratch)?;
        self.offsets.push(self.pos);
        self.pos += self.scratch.len() as u64;
        Ok(())
    }

    /// Flushes the data file and writes the index.
    pub fn finish(mut self) -> Result<u64> {
        self.data.flush()?;
        let mut idx = BufWriter::new(File::create(self.dir.join(INDEX_FILE))?);
        write_header(&mut idx, &INDEX_MAGIC)?;
        idx.write_all(&(self.offsets.len() as u64).to_le_bytes())?;
        for o in &self.offsets {
            idx.write_all(&o.to_le_bytes())?;
        }
        idx.flush()?;
        Ok(self.offsets.len() as u64)
    }
}

pub fn write_store(dir: &Path, cascades: &[CascadeGraph]) -> Result<u64> {
    let mut w = StoreWriter::create(dir)?;
    for c in cascades {
        w.append(c)?;
    }
    w.finish()
}

/// Random and sequential access to a store.
pub struct StoreReader {
    data: BufReader<File>,
    offsets: Vec<u64>,
    data_len: u64,
}

impl StoreReader {
    pub fn open(dir: &Path) -> Result<Self> {
        let idx = std::fs::read(dir.join(INDEX_FILE))?;
        check_header(&idx, &INDEX_MAGIC, INDEX_FILE)?;
        if idx.len() < 20 {
            return Err(corrupt("index: truncated"));
        }
        let count = u64::from_le_bytes(idx[12..20].try_into().unwrap()) as usize;
        let body = &idx[20..];
        if body.len() != count * 8 {
            return Err(corrupt("index: length does not match record count"));
        }
        let offsets: Vec<u64> = body
            .chunks_exact(8)
            .map(|c| u64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        let mut file = File::open(dir.join(DATA_FILE))?;
        let data_len = file.metadata()?.len();
        let mut head = [0u8; 12];
        file.read_exact(&mut head)
            .map_err(|_| corrupt("data: truncated header"))?;
        check_header(&head, &DATA_MAGIC, DATA_FILE)?;
        if offsets.windows(2).any(|w| w[1] <= w[0])
            || offsets.iter().any(|&o| o < 12 || o >= data_len)
        {
            return Err(corrupt("index: offsets out of range"));
        }
        Ok(Self {
            data: BufReader::new(file),
            offsets,
            data_len,
        })
    }

    pub fn len(&self) -> usize {
        self.offsets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.offsets.is_empty()
    }

    /// Reads record `i` through the index.
    pub fn get(&mut self, i: usize) -> Result<CascadeGraph> {
        let start = *self
            .offsets
            .get(i)
            .ok_or_else(|| corrupt(format!("record {i} out of range")))?;
        let end = self.offsets.get(i + 1).copied().unwrap_or(self.data_len);
        self.data.seek(SeekFrom::Start(start))?;
        let mut buf = vec![0u8; (end - start) as usize];
        self.data.read_exact(&mut buf)?;
        let (g, used) = decode(&buf)?;
        if used != buf.len() {
            return Err(corrupt(format!("record {i}: trailing bytes")));
        }
        Ok(g)
    }

    /// Reads every record in order with one sequential pass.
    pub fn read_all(&mut self) -> Result<Vec<CascadeGraph>> {
        self.data.seek(SeekFrom::Start(12))?;
        let mut buf = Vec::new();
        self.data.read_to_end(&mut buf)?;
        let mut out = Vec::with_capacity(self.offsets.len());
        let mut pos = 0usize;
        for (i, &o) in self.offsets.iter().enumerate() {
            if o - 12 != pos as u64 {
                return Err(corrupt(format!("record {i}: offset mismatch")));
            }
            let (g, used) = decode(&buf[pos..])?;
            out.push(g);
            pos += used;
        }
        if pos != buf.len() {
            return Err(corrupt("data: trailing bytes after last record"));
        }
        Ok(out)
    }
}

pub fn read_store(dir: &Path) -> Result<Vec<CascadeGraph>> {
    StoreReader::open(dir)?.read_all()
}
