//! Binary field records, their JSON sidecars, and evolution checkpoints.
//!
//! Both binary formats share a little-endian header followed by the field
//! payload as interleaved (re, im) f64 pairs in the grid's flat order, z
//! fastest. A sample record carries one or two fields; a checkpoint always
//! carries both components.

use std::path::{Path, PathBuf};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::field::{FieldPair, GridDescriptor};
use crate::model::{BoxShape, Grid, PhysicalParams};
use crate::sampler::{SamplerConfig, ThermalDiagnostics};

pub const RECORD_MAGIC: [u8; 8] = *b"SSQFIELD";
pub const CHECKPOINT_MAGIC: [u8; 8] = *b"SSQCHKPT";
pub const FORMAT_VERSION: u16 = 1;
/// Largest lattice accepted on decode; bounds allocations from untrusted input.
pub const MAX_POINTS_PER_DIR: u32 = 512;

const HEADER_LEN: usize = 8 + 2 + 4 + 1 + 24 + 8 + 8 + 1;

#[derive(Debug, Error)]
pub enum IoError {
    #[error("bad magic bytes")]
    BadMagic,
    #[error("unsupported format version {0}")]
    Version(u16),
    #[error("truncated or oversized payload: expected {expected} bytes, found {found}")]
    Length { expected: usize, found: usize },
    #[error("invalid header field {field}: {detail}")]
    Header { field: &'static str, detail: String },
    #[error("record grid {found:?} does not match {expected:?}")]
    GridMismatch {
        expected: GridDescriptor,
        found: GridDescriptor,
    },
    #[error("sidecar: {0}")]
    Sidecar(#[from] serde_json::Error),
    #[error(transparent)]
    File(#[from] std::io::Error),
}

/// One cached realization.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleRecord {
    pub grid: GridDescriptor,
    pub shape: BoxShape,
    pub seed: u64,
    pub time: f64,
    pub fields: Vec<Vec<Complex64>>,
}

#[derive(Debug, Clone, PartialEq)]
struct Header {
    grid: GridDescriptor,
    shape: BoxShape,
    seed: u64,
    time: f64,
    n_fields: u8,
}

fn shape_code(shape: BoxShape) -> u8 {
    match shape {
        BoxShape::Cubic => 0,
        BoxShape::Incommensurate => 1,
    }
}

fn encode(magic: [u8; 8], header: &Header, fields: &[&[Complex64]]) -> Vec<u8> {
    let points = header.grid.points();
    let mut out = Vec::with_capacity(HEADER_LEN + fields.len() * points * 16);
    out.extend_from_slice(&magic);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&(header.grid.n_per_dir as u32).to_le_bytes());
    out.push(shape_code(header.shape));
    for l in header.grid.box_lengths {
        out.extend_from_slice(&l.to_le_bytes());
    }
    out.extend_from_slice(&header.seed.to_le_bytes());
    out.extend_from_slice(&header.time.to_le_bytes());
    out.push(header.n_fields);
    for field in fields {
        assert_eq!(field.len(), points);
        for z in field.iter() {
            out.extend_from_slice(&z.re.to_le_bytes());
            out.extend_from_slice(&z.im.to_le_bytes());
        }
    }
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take<const N: usize>(&mut self) -> Result<[u8; N], IoError> {
        let end = self.pos + N;
        let slice = self.bytes.get(self.pos..end).ok_or(IoError::Length {
            expected: end,
            found: self.bytes.len(),
        })?;
        self.pos = end;
        Ok(slice.try_into().expect("slice length"))
    }

    fn f64(&mut self) -> Result<f64, IoError> {
        Ok(f64::from_le_bytes(self.take()?))
    }
}

fn decode(magic: [u8; 8], bytes: &[u8]) -> Result<(Header, Vec<Vec<Complex64>>), IoError> {
    let mut r = Reader { bytes, pos: 0 };
    if r.take::<8>()? != magic {
        return Err(IoError::BadMagic);
    }
    let version = u16::from_le_bytes(r.take()?);
    if version != FORMAT_VERSION {
        return Err(IoError::Version(version));
    }
    let n = u32::from_le_bytes(r.take()?);
    if n < 2 || n % 2 == 1 || n > MAX_POINTS_PER_DIR {
        return Err(IoError::Header {
            field: "n_per_dir",
            detail: n.to_string(),
        });
    }
    let shape = match r.take::<1>()?[0] {
        0 => BoxShape::Cubic,
        1 => BoxShape::Incommensurate,
        other => {
            return Err(IoError::Header {
                field: "shape",
                detail: other.to_string(),
            })
        }
    };
    let box_lengths = [r.f64()?, r.f64()?, r.f64()?];
    if box_lengths.iter().any(|l| !(l.is_finite() && *l > 0.0)) {
        return Err(IoError::Header {
            field: "box_lengths",
            detail: format!("{box_lengths:?}"),
        });
    }
    let seed = u64::from_le_bytes(r.take()?);
    let time = r.f64()?;
    if !time.is_finite() {
        return Err(IoError::Header {
            field: "time",
            detail: time.to_string(),
        });
    }
    let n_fields = r.take::<1>()?[0];
    if !(1..=2).contains(&n_fields) {
        return Err(IoError::Header {
            field: "n_fields",
            detail: n_fields.to_string(),
        });
    }
    let grid = GridDescriptor {
        n_per_dir: n as usize,
        box_lengths,
    };
    let points = grid.points();
    let expected = HEADER_LEN + n_fields as usize * points * 16;
    if bytes.len() != expected {
        return Err(IoError::Length {
            expected,
            found: bytes.len(),
        });
    }
    let fields = bytes[HEADER_LEN..]
        .chunks_exact(points * 16)
        .map(|chunk| {
            chunk
                .chunks_exact(16)
                .map(|c| {
                    let re = f64::from_le_bytes(c[..8].try_into().expect("8 bytes"));
                    let im = f64::from_le_bytes(c[8..].try_into().expect("8 bytes"));
                    Complex64::new(re, im)
                })
                .collect()
        })
        .collect();
    Ok((
        Header {
            grid,
            shape,
            seed,
            time,
            n_fields,
        },
        fields,
    ))
}

impl SampleRecord {
    pub fn encode(&self) -> Vec<u8> {
        let header = Header {
            grid: self.grid,
            shape: self.shape,
            seed: self.seed,
            time: self.time,
            n_fields: self.fields.len() as u8,
        };
        let fields: Vec<&[Complex64]> = self.fields.iter().map(Vec::as_slice).collect();
        encode(RECORD_MAGIC, &header, &fields)
    }

    pub fn decode(bytes: &[u8]) -> Result<Self, IoError> {
        let (header, fields) = decode(RECORD_MAGIC, bytes)?;
        Ok(Self {
            grid: header.grid,
            shape: header.shape,
            seed: header.seed,
            time: header.time,
            fields,
        })
    }
}

/// Metadata stored next to a sample record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sidecar {
    pub format_version: u16,
    pub seed: u64,
    pub shape: BoxShape,
    pub grid: GridDescriptor,
    pub params: PhysicalParams,
    pub sampler: SamplerConfig,
    pub diagnostics: Option<SidecarDiagnostics>,
}

/// Scalar summary of the sampler diagnostics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SidecarDiagnostics {
    pub final_energy: f64,
    pub condensate_fraction: f64,
    pub rotation_acceptance: f64,
    pub refresh_acceptance: f64,
    pub autocorrelation_time: f64,
    pub converged: bool,
}

impl From<&ThermalDiagnostics> for SidecarDiagnostics {
    fn from(d: &ThermalDiagnostics) -> Self {
        Self {
            final_energy: d.energy_trace.last().copied().unwrap_or(f64::NAN),
            condensate_fraction: d.condensate_fraction_trace.last().copied().unwrap_or(f64::NAN),
            rotation_acceptance: d.rotation_acceptance,
            refresh_acceptance: d.refresh_acceptance,
            autocorrelation_time: d.autocorrelation_time,
            converged: d.converged,
        }
    }
}

impl Sidecar {
    pub fn to_json(&self) -> Result<String, IoError> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &[u8]) -> Result<Self, IoError> {
        let sidecar: Self = serde_json::from_slice(text)?;
        if sidecar.format_version != FORMAT_VERSION {
            return Err(IoError::Version(sidecar.format_version));
        }
        Ok(sidecar)
    }
}

/// Directory of sample records keyed by seed.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleCache {
    root: PathBuf,
}

impl SampleCache {
    pub const ENV_VAR: &'static str = "SPINSQUEEZE_CACHE";

    pub fn new(root: impl Into<PathBuf>) -> Self {
        Self { root: root.into() }
    }

    /// Root from the environment, if set.
    pub fn from_env() -> Option<Self> {
        std::env::var_os(Self::ENV_VAR).map(Self::new)
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    fn paths(&self, tag: &str, seed: u64) -> (PathBuf, PathBuf) {
        let dir = self.root.join(tag);
        (
            dir.join(format!("{seed:016x}.bin")),
            dir.join(format!("{seed:016x}.json")),
        )
    }

    pub fn store(&self, tag: &str, record: &SampleRecord, sidecar: &Sidecar) -> Result<(), IoError> {
        let (bin, json) = self.paths(tag, record.seed);
        std::fs::create_dir_all(bin.parent().expect("cache path has a parent"))?;
        std::fs::write(bin, record.encode())?;
        std::fs::write(json, sidecar.to_json()?)?;
        Ok(())
    }

    pub fn load(&self, tag: &str, seed: u64) -> Result<Option<(SampleRecord, Sidecar)>, IoError> {
        let (bin, json) = self.paths(tag, seed);
        if !bin.exists() || !json.exists() {
            return Ok(None);
        }
        let record = SampleRecord::decode(&std::fs::read(bin)?)?;
        let sidecar = Sidecar::from_json(&std::fs::read(json)?)?;
        Ok(Some((record, sidecar)))
    }
}

/// Bit-exact snapshot of a field pair, including its time and seed.
pub fn checkpoint(pair: &FieldPair, shape: BoxShape) -> Vec<u8> {
    let header = Header {
        grid: pair.grid,
        shape,
        seed: pair.seed,
        time: pair.time,
        n_fields: 2,
    };
    encode(CHECKPOINT_MAGIC, &header, &[&pair.psi_a, &pair.psi_b])
}

/// Restores a snapshot onto `grid`; a snapshot from another lattice is rejected.
pub fn restore(bytes: &[u8], grid: &Grid) -> Result<FieldPair, IoError> {
    let (header, mut fields) = decode_checkpoint(bytes)?;
    let expected = GridDescriptor::of(grid);
    if header.grid != expected || header.shape != grid.shape {
        return Err(IoError::GridMismatch {
            expected,
            found: header.grid,
        });
    }
    let psi_b = fields.pop().expect("two fields");
    let psi_a = fields.pop().expect("two fields");
    let mut pair = FieldPair::new(header.grid, psi_a, psi_b, header.seed);
    pair.time = header.time;
    Ok(pair)
}

fn decode_checkpoint(bytes: &[u8]) -> Result<(Header, Vec<Vec<Complex64>>), IoError> {
    let (header, fields) = decode(CHECKPOINT_MAGIC, bytes)?;
    if header.n_fields != 2 {
        return Err(IoError::Header {
            field: "n_fields",
            detail: format!("checkpoint holds {} fields", header.n_fields),
        });
    }
    Ok((header, fields))
}

/// Parses a checkpoint without a target grid; the entry point for fuzzing.
pub fn parse_checkpoint(bytes: &[u8]) -> Result<FieldPair, IoError> {
    let (header, mut fields) = decode_checkpoint(bytes)?;
    let psi_b = fields.pop().expect("two fields");
    let psi_a = fields.pop().expect("two fields");
    let mut pair = FieldPair::new(header.grid, psi_a, psi_b, header.seed);
    pair.time = header.time;
    Ok(pair)
}
