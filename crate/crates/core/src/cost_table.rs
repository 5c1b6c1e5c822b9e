//! Exhaustive objective table over all `2^M` generator commitments.
//!
//! Index `i` encodes a commitment with bit `k` (least significant first)
//! switching generator `k` of the scenario; the same bit drives qubit `k`.
//!
//! Cache file layout (little endian):
//!
//! | offset | size | field                         |
//! |--------|------|-------------------------------|
//! | 0      | 8    | magic `QUSOCT01`              |
//! | 8      | 4    | format version (1)            |
//! | 12     | 4    | number of bits `M`            |
//! | 16     | 8    | min index                     |
//! | 24     | 8    | max index                     |
//! | 32     | 32   | scenario digest (SHA-256)     |
//! | 64     | 8·2^M | raw costs, `f64`             |
//! | …      | 8·2^M | normalized costs, `f64`      |

use crate::grid::Scenario;
use crate::powerflow::{FlowError, FlowScratch, FlowSolver, GridFactorization};
use rayon::prelude::*;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};
use thiserror::Error;

pub const MAGIC: &[u8; 8] = b"QUSOCT01";
pub const FORMAT_VERSION: u32 = 1;
pub const HEADER_LEN: usize = 64;
pub const DEFAULT_MAX_BITS: usize = 24;

/// Entries evaluated per parallel task. Fixed so results never depend on the
/// thread count.
const CHUNK: usize = 2048;

#[derive(Debug, Error)]
pub enum TableError {
    #[error("{bits} generators need 2^{bits} entries ({bytes} bytes for raw + normalized costs), over the {max}-bit limit")]
    Capacity { bits: usize, max: usize, bytes: u128 },
    #[error("cost table needs a power-of-two length, got {0}")]
    Length(usize),
    #[error(transparent)]
    Flow(#[from] FlowError),
    #[error("stale cost table: file digest {found}, scenario digest {expected}")]
    StaleCache { expected: String, found: String },
    #[error("malformed cost table file: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq)]
pub struct CostTable {
    num_bits: usize,
    raw: Vec<f64>,
    normalized: Vec<f64>,
    min_index: usize,
    max_index: usize,
    digest: [u8; 32],
}

impl CostTable {
    /// Wrap precomputed raw costs. `raw.len()` must be a power of two.
    pub fn from_raw(raw: Vec<f64>, digest: [u8; 32]) -> Result<Self, TableError> {
        if raw.is_empty() || !raw.len().is_power_of_two() {
            return Err(TableError::Length(raw.len()));
        }
        let num_bits = raw.len().trailing_zeros() as usize;
        let (mut min_index, mut max_index) = (0, 0);
        for (i, &c) in raw.iter().enumerate() {
            if c < raw[min_index] {
                min_index = i;
            }
            if c > raw[max_index] {
                max_index = i;
            }
        }
        let (lo, hi) = (raw[min_index], raw[max_index]);
        let normalized = if hi > lo {
            let range = hi - lo;
            raw.iter().map(|c| (c - lo) / range).collect()
        } else {
            vec![0.0; raw.len()]
        };
        Ok(CostTable {
            num_bits,
            raw,
            normalized,
            min_index,
            max_index,
            digest,
        })
    }

    pub fn num_bits(&self) -> usize {
        self.num_bits
    }

    pub fn len(&self) -> usize {
        self.raw.len()
    }

    pub fn is_empty(&self) -> bool {
        self.raw.is_empty()
    }

    pub fn raw(&self) -> &[f64] {
        &self.raw
    }

    pub fn normalized(&self) -> &[f64] {
        &self.normalized
    }

    pub fn min_index(&self) -> usize {
        self.min_index
    }

    pub fn max_index(&self) -> usize {
        self.max_index
    }

    /// All raw costs equal; every normalized cost is then 0.
    pub fn is_trivial(&self) -> bool {
        self.raw[self.max_index] == self.raw[self.min_index]
    }

    pub fn digest(&self) -> &[u8; 32] {
        &self.digest
    }

    pub fn digest_hex(&self) -> String {
        hex::encode(self.digest)
    }

    /// Size of the cache file for `bits` generators.
    pub fn file_len(bits: usize) -> u64 {
        HEADER_LEN as u64 + 16 * (1u64 << bits)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), TableError> {
        let path = path.as_ref();
        let tmp = temp_sibling(path);
        {
            let mut w = BufWriter::new(File::create(&tmp)?);
            w.write_all(MAGIC)?;
            w.write_all(&FORMAT_VERSION.to_le_bytes())?;
            w.write_all(&(self.num_bits as u32).to_le_bytes())?;
            w.write_all(&(self.min_index as u64).to_le_bytes())?;
            w.write_all(&(self.max_index as u64).to_le_bytes())?;
            w.write_all(&self.digest)?;
            for v in self.raw.iter().chain(&self.normalized) {
                w.write_all(&v.to_le_bytes())?;
            }
            w.into_inner().map_err(|e| e.into_error())?.sync_all()?;
        }
        std::fs::rename(&tmp, path)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, TableError> {
        let file = File::open(path)?;
        let len = file.metadata()?.len();
        let mut r = BufReader::new(file);
        let mut header = [0u8; HEADER_LEN];
        r.read_exact(&mut header)
            .map_err(|_| TableError::Format(format!("file of {len} bytes has no header")))?;
        if &header[..8] != MAGIC {
            return Err(TableError::Format("bad magic".into()));
        }
        let word = |at: usize| u32::from_le_bytes(header[at..at + 4].try_into().unwrap());
        let long = |at: usize| u64::from_le_bytes(header[at..at + 8].try_into().unwrap());
        if word(8) != FORMAT_VERSION {
            return Err(TableError::Format(format!("unsupported version {}", word(8))));
        }
        let num_bits = word(12) as usize;
        if num_bits > 62 {
            return Err(TableError::Format(format!("implausible bit count {num_bits}")));
        }
        if len != Self::file_len(num_bits) {
            return Err(TableError::Format(format!(
                "expected {} bytes for {num_bits} bits, file has {len}",
                Self::file_len(num_bits)
            )));
        }
        let n = 1usize << num_bits;
        let (min_index, max_index) = (long(16) as usize, long(24) as usize);
        if min_index >= n || max_index >= n {
            return Err(TableError::Format("extreme index out of range".into()));
        }
        let mut digest = [0u8; 32];
        digest.copy_from_slice(&header[32..64]);

        let mut read_block = || -> Result<Vec<f64>, TableError> {
            let mut bytes = vec![0u8; 8 * n];
            r.read_exact(&mut bytes)
                .map_err(|_| TableError::Format("truncated cost data".into()))?;
            Ok(bytes
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
                .collect())
        };
        let raw = read_block()?;
        let normalized = read_block()?;
        Ok(CostTable {
            num_bits,
            raw,
            normalized,
            min_index,
            max_index,
            digest,
        })
    }

    /// Load and check the table was built from `scenario`.
    pub fn load_for(path: impl AsRef<Path>, scenario: &Scenario) -> Result<Self, TableError> {
        let table = Self::load(path)?;
        let expected = scenario.digest();
        if table.digest_hex() != expected {
            return Err(TableError::StaleCache {
                expected,
                found: table.digest_hex(),
            });
        }
        Ok(table)
    }
}

fn temp_sibling(path: &Path) -> PathBuf {
    let mut name = path.file_name().unwrap_or_default().to_os_string();
    name.push(format!(".tmp{}", std::process::id()));
    path.with_file_name(name)
}

fn digest_bytes(scenario: &Scenario) -> [u8; 32] {
    let mut out = [0u8; 32];
    hex::decode_to_slice(scenario.digest(), &mut out).expect("digest is 32 hex bytes");
    out
}

fn check_capacity(bits: usize, max_bits: usize) -> Result<(), TableError> {
    if bits > max_bits || bits > 62 {
        return Err(TableError::Capacity {
            bits,
            max: max_bits,
            bytes: 16u128 << bits.min(127),
        });
    }
    Ok(())
}

/// Evaluate the power-flow objective of every commitment.
pub fn build_table(scenario: &Scenario, max_bits: usize) -> Result<CostTable, TableError> {
    check_capacity(scenario.num_generators(), max_bits)?;
    let solver = FlowSolver::new(scenario)?;
    build_with_solver(scenario, &solver)
}

/// Like [`build_table`] with a factorization shared across scenarios on the
/// same grid.
pub fn build_table_with(
    scenario: &Scenario,
    factorization: &GridFactorization,
    max_bits: usize,
) -> Result<CostTable, TableError> {
    check_capacity(scenario.num_generators(), max_bits)?;
    let solver = FlowSolver::with_factorization(scenario, factorization.clone());
    build_with_solver(scenario, &solver)
}

fn build_with_solver(scenario: &Scenario, solver: &FlowSolver) -> Result<CostTable, TableError> {
    let n = 1usize << scenario.num_generators();
    let mut raw = vec![0.0; n];
    raw.par_chunks_mut(CHUNK)
        .enumerate()
        .for_each_init(FlowScratch::default, |scratch, (c, chunk)| {
            let base = (c * CHUNK) as u64;
            for (k, out) in chunk.iter_mut().enumerate() {
                *out = solver.cost_of_index(base + k as u64, scratch);
            }
        });
    CostTable::from_raw(raw, digest_bytes(scenario))
}
