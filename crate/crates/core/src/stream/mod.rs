//! Teacher-vector exchange format.
//!
//! Layout, all little-endian:
//!
//! ```text
//! header (16 bytes):
//!   magic     [u8; 4] = "X2SV"
//!   version   u32     = 1
//!   dim       u32
//!   scope     u8      0 = sentence, 1 = paragraph
//!   dtype     u8      0 = f32, 1 = f16
//!   reserved  u16     = 0
//! records, repeated to EOF:
//!   paragraph_id    u32
//!   sentence_index  u32
//!   token_count     u32
//!   token_count x u32 vocabulary id (0xFFFFFFFF = out of vocabulary)
//!   token_count x dim scalars in dtype
//! ```
//!
//! One stream holds one teacher layer. Vectors are word-level: subword
//! pooling happens in the producer.

mod context;
mod source;

use std::io::{self, Read, Write};

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use half::f16;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use context::{context_vector, static_context_vector, EmptyContext};
pub use source::{count_records, MemorySource, PrefixSource, RecordSource, StreamFile};

pub const MAGIC: [u8; 4] = *b"X2SV";
pub const VERSION: u32 = 1;
pub const HEADER_LEN: u64 = 16;

/// Upper bound on tokens per record; larger counts are treated as corruption.
const MAX_TOKENS_PER_RECORD: u32 = 1 << 24;

#[derive(Debug, Error)]
pub enum StreamError {
    #[error("bad magic {0:?}, expected \"X2SV\"")]
    BadMagic([u8; 4]),
    #[error("unsupported stream version {0}")]
    UnsupportedVersion(u32),
    #[error("invalid header: {0}")]
    InvalidHeader(String),
    #[error("record {record}: {message}")]
    Format { record: u64, message: String },
    #[error("stream truncated inside record {record}")]
    Truncated { record: u64 },
    #[error("stream truncated inside header")]
    TruncatedHeader,
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// Which text the teacher saw when producing token vectors.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scope {
    Sentence,
    Paragraph,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Dtype {
    F32,
    F16,
}

impl Dtype {
    pub fn width(self) -> usize {
        match self {
            Dtype::F32 => 4,
            Dtype::F16 => 2,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct StreamHeader {
    pub dim: u32,
    pub scope: Scope,
    pub dtype: Dtype,
}

impl StreamHeader {
    pub fn new(dim: u32, scope: Scope, dtype: Dtype) -> Self {
        StreamHeader { dim, scope, dtype }
    }

    pub fn write<W: Write>(&self, w: &mut W) -> Result<(), StreamError> {
        if self.dim == 0 {
            return Err(StreamError::InvalidHeader("dim must be >= 1".into()));
        }
        w.write_all(&MAGIC)?;
        w.write_u32::<LittleEndian>(VERSION)?;
        w.write_u32::<LittleEndian>(self.dim)?;
        w.write_u8(match self.scope {
            Scope::Sentence => 0,
            Scope::Paragraph => 1,
        })?;
        w.write_u8(match self.dtype {
            Dtype::F32 => 0,
            Dtype::F16 => 1,
        })?;
        w.write_u16::<LittleEndian>(0)?;
        Ok(())
    }

    pub fn read<R: Read>(r: &mut R) -> Result<Self, StreamError> {
        let mut raw = [0u8; HEADER_LEN as usize];
        r.read_exact(&mut raw).map_err(|e| match e.kind() {
            io::ErrorKind::UnexpectedEof => StreamError::TruncatedHeader,
            _ => StreamError::Io(e),
        })?;
        let mut cur = &raw[..];
        let mut magic = [0u8; 4];
        cur.read_exact(&mut magic)?;
        if magic != MAGIC {
            return Err(StreamError::BadMagic(magic));
        }
        let version = cur.read_u32::<LittleEndian>()?;
        if version != VERSION {
            return Err(StreamError::UnsupportedVersion(version));
        }
        let dim = cur.read_u32::<LittleEndian>()?;
        if dim == 0 {
            return Err(StreamError::InvalidHeader("dim must be >= 1".into()));
        }
        let scope = match cur.read_u8()? {
            0 => Scope::Sentence,
            1 => Scope::Paragraph,
            s => return Err(StreamError::InvalidHeader(format!("unknown scope {s}"))),
        };
        let dtype = match cur.read_u8()? {
            0 => Dtype::F32,
            1 => Dtype::F16,
            d => return Err(StreamError::InvalidHeader(format!("unknown dtype {d}"))),
        };
        let reserved = cur.read_u16::<LittleEndian>()?;
        if reserved != 0 {
            return Err(StreamError::InvalidHeader(format!("reserved field is {reserved}, expected 0")));
        }
        Ok(StreamHeader { dim, scope, dtype })
    }
}

/// Teacher output for one sentence: one vector per token, flattened
/// row-major into `vectors`.
#[derive(Clone, Debug, PartialEq)]
pub struct SentenceRecord {
    pub paragraph_id: u32,
    pub sentence_index: u32,
    pub token_ids: Vec<u32>,
    pub vectors: Vec<f32>,
}

impl SentenceRecord {
    pub fn len(&self) -> usize {
        self.token_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.token_ids.is_empty()
    }

    /// Vector of token `i`, given the stream width.
    pub fn vector(&self, i: usize, dim: usize) -> &[f32] {
        &self.vectors[i * dim..(i + 1) * dim]
    }

    pub fn iter_vectors(&self, dim: usize) -> impl Iterator<Item = &[f32]> {
        self.vectors.chunks_exact(dim)
    }

    fn validate(&self, dim: usize, record: u64) -> Result<(), StreamError> {
        let fail = |message: String| StreamError::Format { record, message };
        if self.token_ids.is_empty() {
            return Err(fail("record has no tokens".into()));
        }
        if self.token_ids.len() > MAX_TOKENS_PER_RECORD as usize {
            return Err(fail(format!("token count {} too large", self.token_ids.len())));
        }
        if self.vectors.len() != self.token_ids.len() * dim {
            return Err(fail(format!(
                "{} scalars for {} tokens at dim {dim}",
                self.vectors.len(),
                self.token_ids.len()
            )));
        }
        if let Some(i) = self.vectors.iter().position(|x| !x.is_finite()) {
            return Err(fail(format!("non-finite component at token {}", i / dim)));
        }
        Ok(())
    }
}

/// Writes records after a header; every record is validated before any of
/// its bytes reach the sink.
pub struct StreamWriter<W: Write> {
    sink: W,
    header: StreamHeader,
    records: u64,
    bytes: u64,
    scratch: Vec<u8>,
}

impl<W: Write> StreamWriter<W> {
    pub fn new(mut sink: W, header: StreamHeader) -> Result<Self, StreamError> {
        header.write(&mut sink)?;
        Ok(StreamWriter {
            sink,
            header,
            records: 0,
            bytes: HEADER_LEN,
            scratch: Vec::new(),
        })
    }

    pub fn header(&self) -> &StreamHeader {
        &self.header
    }

    pub fn write_record(&mut self, record: &SentenceRecord) -> Result<(), StreamError> {
        let dim = self.header.dim as usize;
        record.validate(dim, self.records)?;

        let buf = &mut self.scratch;
        buf.clear();
        buf.reserve(12 + record.len() * 4 + record.vectors.len() * self.header.dtype.width());
        buf.write_u32::<LittleEndian>(record.paragraph_id)?;
        buf.write_u32::<LittleEndian>(record.sentence_index)?;
        buf.write_u32::<LittleEndian>(record.len() as u32)?;
        for &id in &record.token_ids {
            buf.write_u32::<LittleEndian>(id)?;
        }
        match self.header.dtype {
            Dtype::F32 => {
                for &x in &record.vectors {
                    buf.write_f32::<LittleEndian>(x)?;
                }
            }
            Dtype::F16 => {
                for (i, &x) in record.vectors.iter().enumerate() {
                    let h = f16::from_f32(x);
                    if !h.is_finite() {
                        return Err(StreamError::Format {
                            record: self.records,
                            message: format!("component at token {} overflows f16", i / dim),
                        });
                    }
                    buf.write_u16::<LittleEndian>(h.to_bits())?;
                }
            }
        }
        self.sink.write_all(buf)?;
        self.bytes += buf.len() as u64;
        self.records += 1;
        Ok(())
    }

    pub fn records_written(&self) -> u64 {
        self.records
    }

    pub fn bytes_written(&self) -> u64 {
        self.bytes
    }

    pub fn finish(mut self) -> Result<W, StreamError> {
        self.sink.flush()?;
        Ok(self.sink)
    }
}

/// Writes a complete stream, returning the byte count.
pub fn write_stream<'a, W, I>(header: StreamHeader, records: I, sink: W) -> Result<u64, StreamError>
where
    W: Write,
    I: IntoIterator<Item = &'a SentenceRecord>,
{
    let mut w = StreamWriter::new(sink, header)?;
    for r in records {
        w.write_record(r)?;
    }
    let n = w.bytes_written();
    w.finish()?;
    Ok(n)
}

/// Lazy record iterator. The header is validated on construction; the first
/// error ends iteration.
pub struct StreamReader<R: Read> {
    source: R,
    header: StreamHeader,
    next_index: u64,
    done: bool,
    scratch: Vec<u8>,
}

impl<R: Read> StreamReader<R> {
    pub fn new(mut source: R) -> Result<Self, StreamError> {
        let header = StreamHeader::read(&mut source)?;
        Ok(StreamReader {
            source,
            header,
            next_index: 0,
            done: false,
            scratch: Vec::new(),
        })
    }

    pub fn header(&self) -> &StreamHeader {
        &self.header
    }

    fn read_record(&mut self) -> Result<Option<SentenceRecord>, StreamError> {
        let record = self.next_index;
        let truncated = |e: io::Error| match e.kind() {
            io::ErrorKind::UnexpectedEof => StreamError::Truncated { record },
            _ => StreamError::Io(e),
        };

        let mut first = [0u8; 4];
        let got = read_fully(&mut self.source, &mut first)?;
        if got == 0 {
            return Ok(None);
        }
        if got < 4 {
            return Err(StreamError::Truncated { record });
        }
        let paragraph_id = u32::from_le_bytes(first);
        let sentence_index = self.source.read_u32::<LittleEndian>().map_err(truncated)?;
        let count = self.source.read_u32::<LittleEndian>().map_err(truncated)?;
        if count == 0 || count > MAX_TOKENS_PER_RECORD {
            return Err(StreamError::Format {
                record,
                message: format!("invalid token count {count}"),
            });
        }
        let count = count as usize;
        let dim = self.header.dim as usize;

        let mut token_ids = vec![0u32; count];
        self.source.read_u32_into::<LittleEndian>(&mut token_ids).map_err(truncated)?;

        let n = count * dim;
        let vectors = match self.header.dtype {
            Dtype::F32 => {
                let mut v = vec![0f32; n];
                self.source.read_f32_into::<LittleEndian>(&mut v).map_err(truncated)?;
                v
            }
            Dtype::F16 => {
                self.scratch.resize(n * 2, 0);
                self.source.read_exact(&mut self.scratch).map_err(truncated)?;
                self.scratch
                    .chunks_exact(2)
                    .map(|b| f16::from_bits(u16::from_le_bytes([b[0], b[1]])).to_f32())
                    .collect()
            }
        };
        let rec = SentenceRecord {
            paragraph_id,
            sentence_index,
            token_ids,
            vectors,
        };
        rec.validate(dim, record)?;
        Ok(Some(rec))
    }
}

fn read_fully<R: Read>(r: &mut R, buf: &mut [u8]) -> io::Result<usize> {
    let mut filled = 0;
    while filled < buf.len() {
        match r.read(&mut buf[filled..]) {
            Ok(0) => break,
            Ok(n) => filled += n,
            Err(e) if e.kind() == io::ErrorKind::Interrupted => {}
            Err(e) => return Err(e),
        }
    }
    Ok(filled)
}

impl<R: Read> Iterator for StreamReader<R> {
    type Item = Result<SentenceRecord, StreamError>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.done {
            return None;
        }
        match self.read_record() {
            Ok(Some(r)) => {
                self.next_index += 1;
                Some(Ok(r))
            }
            Ok(None) => {
                self.done = true;
                None
            }
            Err(e) => {
                self.done = true;
                Some(Err(e))
            }
        }
    }
}

/// Validates the header and returns it with a lazy record iterator.
pub fn read_stream<R: Read>(source: R) -> Result<(StreamHeader, StreamReader<R>), StreamError> {
    let reader = StreamReader::new(source)?;
    Ok((*reader.header(), reader))
}
