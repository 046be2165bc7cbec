//! Bit-exact trace persistence and CSV emission.
//!
//! One flat little-endian binary format: a fixed header followed by
//! per-trace records of plaintext, ciphertext and f32 samples. No
//! compression, no padding, parseable from any language.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::TraceIoError;
use crate::sca::{CaptureMetadata, TraceSet};

pub const MAGIC: [u8; 4] = *b"RSTL";
pub const FORMAT_VERSION: u16 = 1;
/// f32, little endian.
pub const DTYPE_F32LE: u8 = 0;
pub const HEADER_LEN: usize = 33;
const PT_LEN: u8 = 16;
const CT_LEN: u8 = 16;

/// On-disk header. All integers little endian.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceFileHeader {
    pub n_traces: u32,
    pub n_samples: u32,
    pub sample_dtype: u8,
    pub pt_len: u8,
    pub ct_len: u8,
    pub sample_rate_hz: f64,
}

impl TraceFileHeader {
    fn record_len(&self) -> u64 {
        u64::from(self.pt_len) + u64::from(self.ct_len) + 4 * u64::from(self.n_samples)
    }

    fn file_len(&self) -> u64 {
        HEADER_LEN as u64 + u64::from(self.n_traces) * self.record_len()
    }

    fn encode(&self) -> [u8; HEADER_LEN] {
        let mut buf = [0u8; HEADER_LEN];
        buf[0..4].copy_from_slice(&MAGIC);
        buf[4..6].copy_from_slice(&FORMAT_VERSION.to_le_bytes());
        buf[6..10].copy_from_slice(&self.n_traces.to_le_bytes());
        buf[10..14].copy_from_slice(&self.n_samples.to_le_bytes());
        buf[14] = self.sample_dtype;
        buf[15] = self.pt_len;
        buf[16] = self.ct_len;
        buf[17..25].copy_from_slice(&self.sample_rate_hz.to_le_bytes());
        // buf[25..33] reserved, zero.
        buf
    }

    fn decode(buf: &[u8; HEADER_LEN]) -> Result<Self, TraceIoError> {
        let mut magic = [0u8; 4];
        magic.copy_from_slice(&buf[0..4]);
        if magic != MAGIC {
            return Err(TraceIoError::BadMagic { found: magic });
        }
        let version = u16::from_le_bytes([buf[4], buf[5]]);
        if version != FORMAT_VERSION {
            return Err(TraceIoError::UnsupportedVersion(version));
        }
        let n_traces = u32::from_le_bytes(buf[6..10].try_into().unwrap());
        let n_samples = u32::from_le_bytes(buf[10..14].try_into().unwrap());
        let sample_dtype = buf[14];
        if sample_dtype != DTYPE_F32LE {
            return Err(TraceIoError::UnsupportedDtype(sample_dtype));
        }
        let pt_len = buf[15];
        let ct_len = buf[16];
        if pt_len != PT_LEN || ct_len != CT_LEN {
            return Err(TraceIoError::UnsupportedRecordLayout { pt_len, ct_len });
        }
        let sample_rate_hz = f64::from_le_bytes(buf[17..25].try_into().unwrap());
        Ok(TraceFileHeader {
            n_traces,
            n_samples,
            sample_dtype,
            pt_len,
            ct_len,
            sample_rate_hz,
        })
    }
}

/// Write a trace set. Rejects non-finite samples and sets whose record count
/// exceeds the 32-bit budget of the format.
pub fn write_traces<P: AsRef<Path>>(path: P, set: &TraceSet) -> Result<(), TraceIoError> {
    set.validate()?;
    let n_traces = set.n_traces() as u64;
    let n_samples = set.n_samples as u64;
    if n_traces > u32::MAX as u64
        || n_samples > u32::MAX as u64
        || n_traces.checked_mul(n_samples).is_none()
        || n_traces * n_samples > u32::MAX as u64
    {
        return Err(TraceIoError::TooLarge { n_traces, n_samples });
    }
    for (i, chunk) in set.samples.chunks(set.n_samples.max(1)).enumerate() {
        for (j, &s) in chunk.iter().enumerate() {
            if !s.is_finite() {
                return Err(TraceIoError::NonFiniteSample { trace: i, sample: j });
            }
        }
    }

    let header = TraceFileHeader {
        n_traces: n_traces as u32,
        n_samples: n_samples as u32,
        sample_dtype: DTYPE_F32LE,
        pt_len: PT_LEN,
        ct_len: CT_LEN,
        sample_rate_hz: set.metadata.sample_rate_hz,
    };

    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(&header.encode())?;
    for i in 0..set.n_traces() {
        w.write_all(&set.plaintexts[i])?;
        w.write_all(&set.ciphertexts[i])?;
        for &s in set.trace(i) {
            w.write_all(&s.to_le_bytes())?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Read a trace set back. Exact inverse of [`write_traces`]; any size
/// disagreement is an explicit corrupt-file error, never partial data.
pub fn read_traces<P: AsRef<Path>>(path: P) -> Result<TraceSet, TraceIoError> {
    let file = File::open(&path)?;
    let actual_len = file.metadata()?.len();
    let mut r = BufReader::new(file);

    let mut header_buf = [0u8; HEADER_LEN];
    if actual_len < HEADER_LEN as u64 {
        return Err(TraceIoError::Truncated {
            expected: HEADER_LEN as u64,
            found: actual_len,
        });
    }
    r.read_exact(&mut header_buf)?;
    let header = TraceFileHeader::decode(&header_buf)?;

    let expected_len = header.file_len();
    if actual_len < expected_len {
        return Err(TraceIoError::Truncated {
            expected: expected_len,
            found: actual_len,
        });
    }
    if actual_len != expected_len {
        return Err(TraceIoError::SizeMismatch {
            expected: expected_len,
            found: actual_len,
        });
    }

    let n_traces = header.n_traces as usize;
    let n_samples = header.n_samples as usize;
    let mut set = TraceSet::empty(
        n_samples,
        CaptureMetadata {
            sample_rate_hz: header.sample_rate_hz,
            source: String::new(),
        },
    );
    set.samples.reserve(n_traces * n_samples);
    let mut pt = [0u8; 16];
    let mut ct = [0u8; 16];
    let mut sample_buf = vec![0u8; 4 * n_samples];
    for _ in 0..n_traces {
        r.read_exact(&mut pt)?;
        r.read_exact(&mut ct)?;
        r.read_exact(&mut sample_buf)?;
        set.plaintexts.push(pt);
        set.ciphertexts.push(ct);
        for chunk in sample_buf.chunks_exact(4) {
            set.samples
                .push(f32::from_le_bytes(chunk.try_into().unwrap()));
        }
    }
    Ok(set)
}

/// CSV writer: '.' decimal separator, LF line endings, one header row.
pub struct CsvWriter {
    out: BufWriter<File>,
}

impl CsvWriter {
    pub fn create<P: AsRef<Path>>(path: P, header: &[&str]) -> Result<Self, TraceIoError> {
        let mut out = BufWriter::new(File::create(path)?);
        out.write_all(header.join(",").as_bytes())?;
        out.write_all(b"\n")?;
        Ok(CsvWriter { out })
    }

    pub fn row(&mut self, fields: &[String]) -> Result<(), TraceIoError> {
        self.out.write_all(fields.join(",").as_bytes())?;
        self.out.write_all(b"\n")?;
        Ok(())
    }

    pub fn finish(mut self) -> Result<(), TraceIoError> {
        self.out.flush()?;
        Ok(())
    }
}

/// Shortest-roundtrip float formatting shared by all CSV emitters.
pub fn fmt_float(v: f64) -> String {
    format!("{v}")
}
