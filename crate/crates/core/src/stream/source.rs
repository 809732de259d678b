use std::fs::File;
use std::io::BufReader;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use super::{SentenceRecord, StreamError, StreamHeader, StreamReader};

/// A re-iterable sequence of teacher records. Multi-epoch training and the
/// corpus-size sweep read the same records more than once.
pub trait RecordSource: Sync {
    fn header(&self) -> StreamHeader;

    fn records(&self) -> Result<Box<dyn Iterator<Item = Result<SentenceRecord, StreamError>> + '_>, StreamError>;
}

/// A stream file on disk, opened read-only on every pass.
#[derive(Clone, Debug)]
pub struct StreamFile {
    path: PathBuf,
    header: StreamHeader,
}

impl StreamFile {
    pub fn open(path: impl AsRef<Path>) -> Result<Self, StreamError> {
        let path = path.as_ref().to_path_buf();
        let reader = StreamReader::new(BufReader::new(File::open(&path)?))?;
        Ok(StreamFile {
            header: *reader.header(),
            path,
        })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }
}

impl RecordSource for StreamFile {
    fn header(&self) -> StreamHeader {
        self.header
    }

    fn records(&self) -> Result<Box<dyn Iterator<Item = Result<SentenceRecord, StreamError>> + '_>, StreamError> {
        let reader = StreamReader::new(BufReader::with_capacity(1 << 20, File::open(&self.path)?))?;
        if *reader.header() != self.header {
            return Err(StreamError::InvalidHeader("stream header changed since open".into()));
        }
        Ok(Box::new(reader))
    }
}

/// Records held in memory.
#[derive(Clone, Debug)]
pub struct MemorySource {
    header: StreamHeader,
    records: Arc<[SentenceRecord]>,
}

impl MemorySource {
    pub fn new(header: StreamHeader, records: Vec<SentenceRecord>) -> Self {
        MemorySource {
            header,
            records: records.into(),
        }
    }

    pub fn as_slice(&self) -> &[SentenceRecord] {
        &self.records
    }
}

impl RecordSource for MemorySource {
    fn header(&self) -> StreamHeader {
        self.header
    }

    fn records(&self) -> Result<Box<dyn Iterator<Item = Result<SentenceRecord, StreamError>> + '_>, StreamError> {
        Ok(Box::new(self.records.iter().cloned().map(Ok)))
    }
}

/// The first `limit` records of another source.
pub struct PrefixSource<'a, S: ?Sized> {
    inner: &'a S,
    limit: usize,
}

impl<'a, S: RecordSource + ?Sized> PrefixSource<'a, S> {
    pub fn new(inner: &'a S, limit: usize) -> Self {
        PrefixSource { inner, limit }
    }
}

impl<S: RecordSource + ?Sized> RecordSource for PrefixSource<'_, S> {
    fn header(&self) -> StreamHeader {
        self.inner.header()
    }

    fn records(&self) -> Result<Box<dyn Iterator<Item = Result<SentenceRecord, StreamError>> + '_>, StreamError> {
        Ok(Box::new(self.inner.records()?.take(self.limit)))
    }
}

/// Counts records, surfacing the first read error.
pub fn count_records(source: &(impl RecordSource + ?Sized)) -> Result<usize, StreamError> {
    let mut n = 0;
    for r in source.records()? {
        r?;
        n += 1;
    }
    Ok(n)
}
