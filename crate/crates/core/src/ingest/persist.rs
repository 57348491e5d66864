//! Directory store: a `MANIFEST` of `key=value` lines, string dictionaries,
//! and one little-endian binary file per segment or summary.
//!
//! Item file layout:
//!
//! ```text
//! b"SGSM" | kind u8 (0 segment, 1 summary) | key | payload
//! key     = 0u8 index:u64 | 1u8 n:u32 (dim:u32){n}
//! segment = domain:u8 n:u64 (value:u64 count:u64){n}
//! summary = domain:u8 method_len:u8 method budget:u64 flags:u8 h:f64 b:f64
//!           n:u64 (value:u64 weight:f64){n}
//! ```

use std::collections::BTreeMap;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::ingest::{CubeKey, DatasetConfig, Dictionaries, Layout, Mode, SegmentKey, Store};
use crate::model::{QueryFunction, Segment, Summary, SummaryMethod, Value, ValueDomain};

pub const STORE_VERSION: &str = "segsum-store-v1";
const MAGIC: &[u8; 4] = b"SGSM";
const MANIFEST: &str = "MANIFEST";

trait Item: Sized {
    const KIND: u8;
    const KIND_NAME: &'static str;
    fn encode(&self, out: &mut Vec<u8>);
    fn decode(r: &mut Reader<'_>) -> Result<Self>;
}

fn domain_tag(d: ValueDomain) -> u8 {
    match d {
        ValueDomain::Categorical => 0,
        ValueDomain::Ordinal => 1,
    }
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
    path: &'a Path,
}

impl<'a> Reader<'a> {
    fn corrupt(&self, reason: impl Into<String>) -> Error {
        Error::Corrupt {
            path: self.path.to_path_buf(),
            reason: reason.into(),
        }
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.buf.len() - self.pos < n {
            return Err(self.corrupt("unexpected end of file"));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_bits(self.u64()?))
    }

    fn domain(&mut self) -> Result<ValueDomain> {
        match self.u8()? {
            0 => Ok(ValueDomain::Categorical),
            1 => Ok(ValueDomain::Ordinal),
            t => Err(self.corrupt(format!("bad domain tag {t}"))),
        }
    }

    /// Entry count, checked against the bytes left so a corrupt length
    /// cannot trigger a huge allocation.
    fn count(&mut self, entry_bytes: usize) -> Result<usize> {
        let n = self.u64()?;
        let left = (self.buf.len() - self.pos) as u64;
        if n.saturating_mul(entry_bytes as u64) > left {
            return Err(self.corrupt("unexpected end of file"));
        }
        Ok(n as usize)
    }
}

impl Item for Segment {
    const KIND: u8 = 0;
    const KIND_NAME: &'static str = "segments";

    fn encode(&self, out: &mut Vec<u8>) {
        out.push(domain_tag(self.domain()));
        out.extend_from_slice(&(self.len() as u64).to_le_bytes());
        for &(v, c) in self.entries() {
            out.extend_from_slice(&v.id().to_le_bytes());
            out.extend_from_slice(&c.to_le_bytes());
        }
    }

    fn decode(r: &mut Reader<'_>) -> Result<Self> {
        let domain = r.domain()?;
        let n = r.count(16)?;
        let mut entries = Vec::with_capacity(n);
        let mut prev: Option<Value> = None;
        for _ in 0..n {
            let v = Value::from_id(r.u64()?);
            let c = r.u64()?;
            if c == 0 || prev.is_some_and(|p| p >= v) {
                return Err(r.corrupt("segment entries out of order or zero"));
            }
            prev = Some(v);
            entries.push((v, c));
        }
        Ok(Segment::from_counts(entries, domain))
    }
}

impl Item for Summary {
    const KIND: u8 = 1;
    const KIND_NAME: &'static str = "summaries";

    fn encode(&self, out: &mut Vec<u8>) {
        out.push(domain_tag(self.domain()));
        let tag = self.method().as_str().as_bytes();
        out.push(tag.len() as u8);
        out.extend_from_slice(tag);
        out.extend_from_slice(&(self.size_budget() as u64).to_le_bytes());
        let flags = u8::from(self.threshold().is_some()) | (u8::from(self.bias().is_some()) << 1);
        out.push(flags);
        out.extend_from_slice(&self.threshold().unwrap_or(0.0).to_bits().to_le_bytes());
        out.extend_from_slice(&self.bias().unwrap_or(0.0).to_bits().to_le_bytes());
        out.extend_from_slice(&(self.len() as u64).to_le_bytes());
        for &(v, w) in self.entries() {
            out.extend_from_slice(&v.id().to_le_bytes());
            out.extend_from_slice(&w.to_bits().to_le_bytes());
        }
    }

    fn decode(r: &mut Reader<'_>) -> Result<Self> {
        let domain = r.domain()?;
        let len = r.u8()? as usize;
        let tag = std::str::from_utf8(r.take(len)?)
            .map_err(|_| r.corrupt("method tag is not utf-8"))?
            .to_string();
        let method: SummaryMethod = tag.parse().map_err(|_| r.corrupt(format!("unknown method `{tag}`")))?;
        let budget = r.u64()? as usize;
        let flags = r.u8()?;
        let h = r.f64()?;
        let b = r.f64()?;
        let n = r.count(16)?;
        let mut entries = Vec::with_capacity(n);
        for _ in 0..n {
            let v = Value::from_id(r.u64()?);
            let w = r.f64()?;
            if !(w.is_finite() && w >= 0.0) {
                return Err(r.corrupt("invalid summary weight"));
            }
            entries.push((v, w));
        }
        let mut s = Summary::new(entries, budget, method, domain);
        if flags & 1 != 0 {
            s = s.with_threshold(h);
        }
        if flags & 2 != 0 {
            s = s.with_bias(b);
        }
        Ok(s)
    }
}

fn escape(s: &str) -> String {
    s.replace('\\', "\\\\").replace('\n', "\\n")
}

fn unescape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    let mut chars = s.chars();
    while let Some(c) = chars.next() {
        if c == '\\' {
            match chars.next() {
                Some('n') => out.push('\n'),
                Some(other) => out.push(other),
                None => out.push('\\'),
            }
        } else {
            out.push(c);
        }
    }
    out
}

fn write_dict(path: &Path, words: &[String]) -> Result<()> {
    let mut w = BufWriter::new(fs::File::create(path)?);
    for word in words {
        writeln!(w, "{}", escape(word))?;
    }
    w.flush()?;
    Ok(())
}

fn read_dict(path: &Path) -> Result<Vec<String>> {
    if !path.exists() {
        return Ok(Vec::new());
    }
    Ok(fs::read_to_string(path)?.lines().map(unescape).collect())
}

fn item_path(dir: &Path, n: usize) -> PathBuf {
    dir.join("items").join(format!("{n:08}.bin"))
}

fn save<T: Item>(store: &Store<T>, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir.join("items"))?;
    let cfg = &store.config;
    let mut manifest: BTreeMap<String, String> = store.meta.clone();
    let mut put = |k: &str, v: String| {
        manifest.insert(k.to_string(), v);
    };
    put("version", STORE_VERSION.into());
    put("kind", T::KIND_NAME.into());
    put("mode", store.mode().as_str().into());
    put("query_kind", cfg.query_kind.as_str().into());
    put("T_G", cfg.time_resolution.to_string());
    put("k_T", cfg.max_interval.to_string());
    put("dims", cfg.dims.join(","));
    put("s", cfg.summary_size.to_string());
    put("S_T", cfg.total_space.to_string());
    put("s_min", cfg.min_size.to_string());
    put("seed", cfg.seed.to_string());
    put("rng", "chacha8".into());
    put("count", store.len().to_string());
    if let Some((first, _)) = store.interval_range() {
        put("first_index", first.to_string());
    }

    let mut w = BufWriter::new(fs::File::create(dir.join(MANIFEST))?);
    for (k, v) in &manifest {
        writeln!(w, "{k}={}", escape(v))?;
    }
    w.flush()?;

    write_dict(&dir.join("values.dict"), &store.dictionaries.values)?;
    for (j, d) in store.dictionaries.dims.iter().enumerate() {
        write_dict(&dir.join(format!("dim{j}.dict")), d)?;
    }

    let mut buf = Vec::new();
    for (n, (key, item)) in store.iter().enumerate() {
        buf.clear();
        buf.extend_from_slice(MAGIC);
        buf.push(T::KIND);
        match &key {
            SegmentKey::Interval(i) => {
                buf.push(0);
                buf.extend_from_slice(&i.to_le_bytes());
            }
            SegmentKey::Cube(k) => {
                buf.push(1);
                buf.extend_from_slice(&(k.len() as u32).to_le_bytes());
                for d in k {
                    buf.extend_from_slice(&d.to_le_bytes());
                }
            }
        }
        item.encode(&mut buf);
        fs::write(item_path(dir, n), &buf)?;
    }
    Ok(())
}

fn parse_manifest(dir: &Path) -> Result<BTreeMap<String, String>> {
    let path = dir.join(MANIFEST);
    if !path.exists() {
        return Err(Error::StoreNotFound(dir.to_path_buf()));
    }
    let text = fs::read_to_string(&path)?;
    let mut out = BTreeMap::new();
    for line in text.lines().filter(|l| !l.trim().is_empty()) {
        let (k, v) = line.split_once('=').ok_or_else(|| Error::Corrupt {
            path: path.clone(),
            reason: format!("bad manifest line `{line}`"),
        })?;
        out.insert(k.to_string(), unescape(v));
    }
    Ok(out)
}

fn load<T: Item>(dir: &Path) -> Result<Store<T>> {
    let mut manifest = parse_manifest(dir)?;
    let mpath = dir.join(MANIFEST);
    let version = manifest.get("version").cloned().unwrap_or_default();
    if version != STORE_VERSION {
        return Err(Error::VersionMismatch {
            expected: STORE_VERSION.into(),
            found: version,
        });
    }
    let field = |m: &BTreeMap<String, String>, k: &str| -> Result<String> {
        m.get(k).cloned().ok_or_else(|| Error::Corrupt {
            path: mpath.clone(),
            reason: format!("manifest is missing `{k}`"),
        })
    };
    let num = |m: &BTreeMap<String, String>, k: &str| -> Result<u64> {
        field(m, k)?.parse().map_err(|_| Error::Corrupt {
            path: mpath.clone(),
            reason: format!("manifest field `{k}` is not a number"),
        })
    };
    let kind = field(&manifest, "kind")?;
    if kind != T::KIND_NAME {
        return Err(Error::Corrupt {
            path: mpath.clone(),
            reason: format!("expected a store of {}, found {kind}", T::KIND_NAME),
        });
    }
    let mode: Mode = field(&manifest, "mode")?.parse()?;
    let query_kind: QueryFunction = field(&manifest, "query_kind")?.parse()?;
    let dims_field = field(&manifest, "dims")?;
    let dims: Vec<String> = if dims_field.is_empty() {
        Vec::new()
    } else {
        dims_field.split(',').map(str::to_string).collect()
    };
    let config = DatasetConfig {
        mode,
        query_kind,
        time_resolution: num(&manifest, "T_G")?,
        max_interval: num(&manifest, "k_T")?,
        summary_size: num(&manifest, "s")? as usize,
        total_space: num(&manifest, "S_T")?,
        min_size: num(&manifest, "s_min")? as usize,
        seed: num(&manifest, "seed")?,
        dims,
    };
    let count = num(&manifest, "count")? as usize;
    let first = manifest.get("first_index").map(|s| s.parse().unwrap_or(0)).unwrap_or(0);

    let dictionaries = Dictionaries {
        values: read_dict(&dir.join("values.dict"))?,
        dims: (0..config.dims.len())
            .map(|j| read_dict(&dir.join(format!("dim{j}.dict"))))
            .collect::<Result<_>>()?,
    };

    let mut interval = Vec::new();
    let mut cube: BTreeMap<CubeKey, T> = BTreeMap::new();
    for n in 0..count {
        let path = item_path(dir, n);
        let bytes = fs::read(&path).map_err(|e| match e.kind() {
            std::io::ErrorKind::NotFound => Error::Corrupt {
                path: path.clone(),
                reason: "missing item file".into(),
            },
            _ => Error::Io(e),
        })?;
        let mut r = Reader {
            buf: &bytes,
            pos: 0,
            path: &path,
        };
        if r.take(4)? != MAGIC {
            return Err(r.corrupt("bad magic"));
        }
        if r.u8()? != T::KIND {
            return Err(r.corrupt("item kind does not match store kind"));
        }
        let key = match r.u8()? {
            0 => SegmentKey::Interval(r.u64()?),
            1 => {
                let m = r.u32()? as usize;
                if m > bytes.len() {
                    return Err(r.corrupt("unexpected end of file"));
                }
                SegmentKey::Cube((0..m).map(|_| r.u32()).collect::<Result<_>>()?)
            }
            t => return Err(r.corrupt(format!("bad key tag {t}"))),
        };
        let item = T::decode(&mut r)?;
        if r.pos != bytes.len() {
            return Err(r.corrupt("trailing bytes"));
        }
        match (mode, key) {
            (Mode::Interval, SegmentKey::Interval(i)) if i == first + n as u64 => interval.push(item),
            (Mode::Cube, SegmentKey::Cube(k)) => {
                cube.insert(k, item);
            }
            _ => return Err(r.corrupt("segment key does not match store layout")),
        }
    }

    for k in [
        "version",
        "kind",
        "mode",
        "query_kind",
        "T_G",
        "k_T",
        "dims",
        "s",
        "S_T",
        "s_min",
        "seed",
        "rng",
        "count",
        "first_index",
    ] {
        manifest.remove(k);
    }
    let layout = match mode {
        Mode::Interval => Layout::Interval { first, items: interval },
        Mode::Cube => Layout::Cube { items: cube },
    };
    Ok(Store {
        config,
        dictionaries,
        layout,
        meta: manifest,
    })
}

pub fn save_segments(store: &Store<Segment>, dir: &Path) -> Result<()> {
    save(store, dir)
}

pub fn load_segments(dir: &Path) -> Result<Store<Segment>> {
    load(dir)
}

pub fn save_summaries(store: &Store<Summary>, dir: &Path) -> Result<()> {
    save(store, dir)
}

pub fn load_summaries(dir: &Path) -> Result<Store<Summary>> {
    load(dir)
}
