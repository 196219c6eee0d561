//! File formats: the snapshot container, its CSV fallback and JSON sidecar,
//! and the modal-cache file.
//!
//! Snapshot container, little-endian:
//!
//! | offset | type      | field                          |
//! |--------|-----------|--------------------------------|
//! | 0      | [u8; 8]   | magic `WIMOSNAP`               |
//! | 8      | u16       | format version (1)             |
//! | 10     | u16       | layout (0 = row-major sensor x time) |
//! | 12     | u32       | N_S                            |
//! | 16     | u64       | M                              |
//! | 24     | f64       | fs (Hz)                        |
//! | 32     | f32 pairs | samples, `re, im` interleaved  |

use std::fs;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use wimo_core::approx::{ModalCache, ModalEntry};
use wimo_core::linalg::CMatrix;
use wimo_core::stcm::SnapshotMatrix;
use wimo_core::C64;

use crate::error::{Result, WimoError};

pub const SNAPSHOT_MAGIC: &[u8; 8] = b"WIMOSNAP";
pub const SNAPSHOT_VERSION: u16 = 1;
const LAYOUT_ROW_MAJOR: u16 = 0;
const HEADER_LEN: usize = 32;

pub const CACHE_MAGIC: &[u8; 8] = b"WIMOMODC";
pub const CACHE_VERSION: u32 = 1;

fn read_all(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| WimoError::io(path, e))
}

fn create(path: &Path) -> Result<BufWriter<fs::File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| WimoError::io(dir, e))?;
    }
    Ok(BufWriter::new(
        fs::File::create(path).map_err(|e| WimoError::io(path, e))?,
    ))
}

pub fn encode_snapshots(snap: &SnapshotMatrix) -> Vec<u8> {
    let data = snap.data();
    let mut out = Vec::with_capacity(HEADER_LEN + data.as_slice().len() * 8);
    out.extend_from_slice(SNAPSHOT_MAGIC);
    out.extend_from_slice(&SNAPSHOT_VERSION.to_le_bytes());
    out.extend_from_slice(&LAYOUT_ROW_MAJOR.to_le_bytes());
    out.extend_from_slice(&(snap.n_sensors() as u32).to_le_bytes());
    out.extend_from_slice(&(snap.n_snapshots() as u64).to_le_bytes());
    out.extend_from_slice(&snap.fs().to_le_bytes());
    for v in data.as_slice() {
        out.extend_from_slice(&(v.re as f32).to_le_bytes());
        out.extend_from_slice(&(v.im as f32).to_le_bytes());
    }
    out
}

fn take<const N: usize>(bytes: &[u8], at: usize) -> [u8; N] {
    bytes[at..at + N]
        .try_into()
        .expect("bounds checked by caller")
}

pub fn decode_snapshots(bytes: &[u8]) -> Result<SnapshotMatrix> {
    if bytes.len() < HEADER_LEN || &bytes[..8] != SNAPSHOT_MAGIC {
        return Err(WimoError::Format(
            "not a snapshot container (bad magic)".into(),
        ));
    }
    let version = u16::from_le_bytes(take(bytes, 8));
    if version != SNAPSHOT_VERSION {
        return Err(WimoError::Format(format!(
            "unsupported snapshot container version {version}"
        )));
    }
    let layout = u16::from_le_bytes(take(bytes, 10));
    if layout != LAYOUT_ROW_MAJOR {
        return Err(WimoError::Format(format!(
            "unsupported sample layout {layout}"
        )));
    }
    let n_sensors = u32::from_le_bytes(take(bytes, 12)) as usize;
    let n_snapshots = u64::from_le_bytes(take(bytes, 16)) as usize;
    let fs = f64::from_le_bytes(take(bytes, 24));
    let expected = n_sensors
        .checked_mul(n_snapshots)
        .and_then(|n| n.checked_mul(8))
        .and_then(|n| n.checked_add(HEADER_LEN))
        .ok_or_else(|| WimoError::Format("snapshot dimensions overflow".into()))?;
    if bytes.len() != expected {
        return Err(WimoError::Format(format!(
            "snapshot container holds {} bytes, header implies {expected} ({n_sensors} x {n_snapshots})",
            bytes.len()
        )));
    }
    let data: Vec<C64> = bytes[HEADER_LEN..]
        .chunks_exact(8)
        .map(|c| {
            C64::new(
                f32::from_le_bytes(take(c, 0)) as f64,
                f32::from_le_bytes(take(c, 4)) as f64,
            )
        })
        .collect();
    Ok(SnapshotMatrix::new(
        CMatrix::from_row_major(n_sensors, n_snapshots, data),
        fs,
    )?)
}

pub fn write_snapshots(path: &Path, snap: &SnapshotMatrix) -> Result<()> {
    let mut w = create(path)?;
    w.write_all(&encode_snapshots(snap))
        .map_err(|e| WimoError::io(path, e))?;
    w.flush().map_err(|e| WimoError::io(path, e))
}

pub fn read_snapshots(path: &Path) -> Result<SnapshotMatrix> {
    decode_snapshots(&read_all(path)?)
}

#[derive(Debug, Serialize, Deserialize)]
struct CsvSample {
    sensor: usize,
    sample: usize,
    re: f64,
    im: f64,
}

/// CSV fallback: one row per sample with columns `sensor,sample,re,im`.
pub fn write_snapshots_csv(path: &Path, snap: &SnapshotMatrix) -> Result<()> {
    let mut w = csv::Writer::from_writer(create(path)?);
    let data = snap.data();
    for sensor in 0..snap.n_sensors() {
        for sample in 0..snap.n_snapshots() {
            let v = data[(sensor, sample)];
            w.serialize(CsvSample {
                sensor,
                sample,
                re: v.re,
                im: v.im,
            })?;
        }
    }
    w.flush().map_err(|e| WimoError::io(path, e))
}

/// Reads the CSV fallback; the sampling rate comes from the caller (usually
/// the sidecar).
pub fn read_snapshots_csv(path: &Path, fs: f64) -> Result<SnapshotMatrix> {
    let file = fs::File::open(path).map_err(|e| WimoError::io(path, e))?;
    let mut rows: Vec<CsvSample> = Vec::new();
    for row in csv::Reader::from_reader(BufReader::new(file)).deserialize() {
        rows.push(row?);
    }
    let n_sensors = rows.iter().map(|r| r.sensor + 1).max().unwrap_or(0);
    let n_snapshots = rows.iter().map(|r| r.sample + 1).max().unwrap_or(0);
    if rows.len() != n_sensors * n_snapshots {
        return Err(WimoError::Format(format!(
            "CSV has {} rows, expected {n_sensors} sensors x {n_snapshots} samples",
            rows.len()
        )));
    }
    let mut data = CMatrix::zeros(n_sensors, n_snapshots);
    let mut seen = vec![false; rows.len()];
    for r in rows {
        let idx = r.sensor * n_snapshots + r.sample;
        if std::mem::replace(&mut seen[idx], true) {
            return Err(WimoError::Format(format!(
                "duplicate CSV row for sensor {} sample {}",
                r.sensor, r.sample
            )));
        }
        data[(r.sensor, r.sample)] = C64::new(r.re, r.im);
    }
    Ok(SnapshotMatrix::new(data, fs)?)
}

/// Metadata written next to a snapshot file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sidecar {
    pub format_version: u16,
    pub format: String,
    pub n_sensors: usize,
    pub n_snapshots: usize,
    pub fs: f64,
    pub seed: u64,
    pub config: serde_json::Value,
    /// Wall-clock time of generation; the only time-dependent field.
    pub generated_unix_s: u64,
}

pub fn sidecar_path(data_path: &Path) -> PathBuf {
    let mut name = data_path.as_os_str().to_owned();
    name.push(".json");
    PathBuf::from(name)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n").map_err(|e| WimoError::io(path, e))?;
    w.flush().map_err(|e| WimoError::io(path, e))
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    Ok(serde_json::from_slice(&read_all(path)?)?)
}

/// Loads a snapshot file by extension (`.csv` or the binary container).
/// CSV needs the sidecar for the sampling rate.
pub fn load_snapshots(path: &Path) -> Result<SnapshotMatrix> {
    if path
        .extension()
        .is_some_and(|e| e.eq_ignore_ascii_case("csv"))
    {
        let side: Sidecar = read_json(&sidecar_path(path))?;
        read_snapshots_csv(path, side.fs)
    } else {
        read_snapshots(path)
    }
}

/// SHA-256 of a canonical JSON rendering of the cache key.
pub fn cache_key_hash(key: &serde_json::Value) -> [u8; 32] {
    Sha256::digest(key.to_string().as_bytes()).into()
}

fn push_c64(out: &mut Vec<u8>, v: C64) {
    out.extend_from_slice(&v.re.to_le_bytes());
    out.extend_from_slice(&v.im.to_le_bytes());
}

pub fn encode_modal_cache(cache: &ModalCache, key_hash: &[u8; 32]) -> Vec<u8> {
    let l = cache.dim();
    let mut out = Vec::new();
    out.extend_from_slice(CACHE_MAGIC);
    out.extend_from_slice(&CACHE_VERSION.to_le_bytes());
    out.extend_from_slice(key_hash);
    out.extend_from_slice(&(l as u32).to_le_bytes());
    out.extend_from_slice(&(cache.len() as u32).to_le_bytes());
    for e in cache.entries() {
        out.extend_from_slice(&e.theta_deg.to_le_bytes());
        e.sbreve
            .as_slice()
            .iter()
            .for_each(|v| push_c64(&mut out, *v));
        e.sigma
            .iter()
            .for_each(|v| out.extend_from_slice(&v.to_le_bytes()));
        e.gsv.iter().for_each(|v| push_c64(&mut out, *v));
    }
    out
}

struct Cursor<'a> {
    bytes: &'a [u8],
    at: usize,
}

impl Cursor<'_> {
    fn next<const N: usize>(&mut self) -> Result<[u8; N]> {
        if self.at + N > self.bytes.len() {
            return Err(WimoError::Format("modal cache file is truncated".into()));
        }
        let v = take(self.bytes, self.at);
        self.at += N;
        Ok(v)
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.next()?))
    }

    fn c64(&mut self) -> Result<C64> {
        Ok(C64::new(self.f64()?, self.f64()?))
    }
}

/// Decodes a cache file; `Ok(None)` when it was built for a different key.
pub fn decode_modal_cache(bytes: &[u8], key_hash: &[u8; 32]) -> Result<Option<ModalCache>> {
    let mut cur = Cursor { bytes, at: 0 };
    if &cur.next::<8>()? != CACHE_MAGIC {
        return Err(WimoError::Format(
            "not a modal cache file (bad magic)".into(),
        ));
    }
    let version = u32::from_le_bytes(cur.next()?);
    if version != CACHE_VERSION {
        return Ok(None);
    }
    if &cur.next::<32>()? != key_hash {
        return Ok(None);
    }
    let l = u32::from_le_bytes(cur.next()?) as usize;
    let n = u32::from_le_bytes(cur.next()?) as usize;
    let mut entries = Vec::with_capacity(n);
    for _ in 0..n {
        let theta_deg = cur.f64()?;
        let data = (0..l * l).map(|_| cur.c64()).collect::<Result<Vec<_>>>()?;
        let sigma = (0..l).map(|_| cur.f64()).collect::<Result<Vec<_>>>()?;
        let gsv = (0..l).map(|_| cur.c64()).collect::<Result<Vec<_>>>()?;
        entries.push(ModalEntry {
            theta_deg,
            sbreve: CMatrix::from_row_major(l, l, data),
            sigma,
            gsv,
        });
    }
    if cur.at != bytes.len() {
        return Err(WimoError::Format(
            "trailing bytes in modal cache file".into(),
        ));
    }
    Ok(Some(ModalCache::from_entries(entries)?))
}

pub fn write_modal_cache(path: &Path, cache: &ModalCache, key_hash: &[u8; 32]) -> Result<()> {
    let mut w = create(path)?;
    w.write_all(&encode_modal_cache(cache, key_hash))
        .map_err(|e| WimoError::io(path, e))?;
    w.flush().map_err(|e| WimoError::io(path, e))
}

/// Reads the cache at `path` if it exists and matches `key_hash`.
pub fn read_modal_cache(path: &Path, key_hash: &[u8; 32]) -> Result<Option<ModalCache>> {
    let mut file = match fs::File::open(path) {
        Ok(f) => f,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(None),
        Err(e) => return Err(WimoError::io(path, e)),
    };
    let mut bytes = Vec::new();
    file.read_to_end(&mut bytes)
        .map_err(|e| WimoError::io(path, e))?;
    decode_modal_cache(&bytes, key_hash)
}
