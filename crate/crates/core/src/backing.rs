//! Byte stores that hold the payload of emulated devices.
//!
//! Both the ZNS emulator and the FTL emulator keep real bytes so that reads
//! can be checked against writes. A 4 GiB desk-scale device does not fit in
//! memory next to everything else, so the store can also live in a sparse
//! temporary file whose ranges are hole-punched when a zone or erase block
//! is cleaned.

use std::io;
use std::sync::Mutex;

const CHUNK_SIZE: u64 = 1 << 20;

/// Where an emulated device keeps its bytes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum BackingKind {
    /// Lazily allocated 1 MiB chunks on the heap.
    #[default]
    Memory,
    /// A sparse unnamed temporary file (Unix only).
    TempFile,
}

impl std::str::FromStr for BackingKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "memory" | "mem" => Ok(BackingKind::Memory),
            "file" | "tempfile" => Ok(BackingKind::TempFile),
            other => Err(format!("unknown backing '{other}' (expected memory|file)")),
        }
    }
}

/// Random-access byte storage with explicit discard.
pub trait ByteStore: Send + Sync {
    fn write_at(&self, offset: u64, data: &[u8]) -> io::Result<()>;
    /// Reads `buf.len()` bytes. Never-written or discarded ranges read as zeros.
    fn read_at(&self, offset: u64, buf: &mut [u8]) -> io::Result<()>;
    /// Drops the contents of a range; subsequent reads return zeros.
    fn discard(&self, offset: u64, len: u64) -> io::Result<()>;
}

/// Opens a store of `capacity` bytes.
pub fn open_store(kind: BackingKind, capacity: u64) -> io::Result<Box<dyn ByteStore>> {
    match kind {
        BackingKind::Memory => Ok(Box::new(MemoryStore::new(capacity))),
        BackingKind::TempFile => open_file_store(capacity),
    }
}

#[cfg(unix)]
fn open_file_store(capacity: u64) -> io::Result<Box<dyn ByteStore>> {
    Ok(Box::new(FileStore::new(capacity)?))
}

#[cfg(not(unix))]
fn open_file_store(_capacity: u64) -> io::Result<Box<dyn ByteStore>> {
    Err(io::Error::new(
        io::ErrorKind::Unsupported,
        "file-backed devices require a Unix host",
    ))
}

/// Heap store split into independently locked chunks.
pub struct MemoryStore {
    capacity: u64,
    chunks: Vec<Mutex<Option<Box<[u8]>>>>,
}

impl MemoryStore {
    pub fn new(capacity: u64) -> Self {
        let n = capacity.div_ceil(CHUNK_SIZE) as usize;
        MemoryStore {
            capacity,
            chunks: (0..n).map(|_| Mutex::new(None)).collect(),
        }
    }

    fn chunk_len(&self, idx: usize) -> usize {
        let start = idx as u64 * CHUNK_SIZE;
        (self.capacity - start).min(CHUNK_SIZE) as usize
    }

    fn check(&self, offset: u64, len: u64) -> io::Result<()> {
        if offset.checked_add(len).is_none_or(|end| end > self.capacity) {
            return Err(io::Error::new(
                io::ErrorKind::InvalidInput,
                format!("range {offset}+{len} exceeds store capacity {}", self.capacity),
            ));
        }
        Ok(())
    }

    /// Visits the chunk pieces covering `[offset, offset + len)`.
    fn for_each_piece(
        &self,
        offset: u64,
        len: u64,
        mut f: impl FnMut(usize, usize, std::ops::Range<usize>),
    ) {
        let mut pos = offset;
        let end = offset + len;
        while pos < end {
            let idx = (pos / CHUNK_SIZE) as usize;
            let within = (pos % CHUNK_SIZE) as usize;
            let take = ((end - pos) as usize).min(self.chunk_len(idx) - within);
            let done = (pos - offset) as usize;
            f(idx, within, done..done + take);
            pos += take as u64;
        }
    }
}

impl ByteStore for MemoryStore {
    fn write_at(&self, offset: u64, data: &[u8]) -> io::Result<()> {
        self.check(offset, data.len() as u64)?;
        self.for_each_piece(offset, data.len() as u64, |idx, within, src| {
            let mut chunk = self.chunks[idx].lock().unwrap();
            let buf = chunk.get_or_insert_with(|| vec![0u8; self.chunk_len(idx)].into_boxed_slice());
            buf[within..within + src.len()].copy_from_slice(&data[src]);
        });
        Ok(())
    }

    fn read_at(&self, offset: u64, buf: &mut [u8]) -> io::Result<()> {
        self.check(offset, buf.len() as u64)?;
        self.for_each_piece(offset, buf.len() as u64, |idx, within, dst| {
            let chunk = self.chunks[idx].lock().unwrap();
            match chunk.as_ref() {
                Some(c) => buf[dst.clone()].copy_from_slice(&c[within..within + dst.len()]),
                None => buf[dst].fill(0),
            }
        });
        Ok(())
    }

    fn discard(&self, offset: u64, len: u64) -> io::Result<()> {
        self.check(offset, len)?;
        self.for_each_piece(offset, len, |idx, within, piece| {
            let mut chunk = self.chunks[idx].lock().unwrap();
            if within == 0 && piece.len() == self.chunk_len(idx) {
                *chunk = None;
            } else if let Some(c) = chunk.as_mut() {
                c[within..within + piece.len()].fill(0);
            }
        });
        Ok(())
    }
}

#[cfg(unix)]
pub struct FileStore {
    file: std::fs::File,
    capacity: u64,
}

#[cfg(unix)]
impl FileStore {
    pub fn new(capacity: u64) -> io::Result<Self> {
        let file = tempfile::tempfile()?;
        file.set_len(capacity)?;
        Ok(FileStore { file, capacity })
    }
}

#[cfg(unix)]
impl ByteStore for FileStore {
    fn write_at(&self, offset: u64, data: &[u8]) -> io::Result<()> {
        use std::os::unix::fs::FileExt;
        if offset + data.len() as u64 > self.capacity {
            return Err(io::Error::new(io::ErrorKind::InvalidInput, "write past end of store"));
        }
        self.file.write_all_at(data, offset)
    }

    fn read_at(&self, offset: u64, buf: &mut [u8]) -> io::Result<()> {
        use std::os::unix::fs::FileExt;
        self.file.read_exact_at(buf, offset)
    }

    fn discard(&self, offset: u64, len: u64) -> io::Result<()> {
        punch_hole(&self.file, offset, len)
    }
}

#[cfg(target_os = "linux")]
fn punch_hole(file: &std::fs::File, offset: u64, len: u64) -> io::Result<()> {
    use std::os::unix::io::AsRawFd;
    let rc = unsafe {
        libc::fallocate(
            file.as_raw_fd(),
            libc::FALLOC_FL_PUNCH_HOLE | libc::FALLOC_FL_KEEP_SIZE,
            offset as libc::off_t,
            len as libc::off_t,
        )
    };
    if rc == 0 {
        Ok(())
    } else {
        Err(io::Error::last_os_error())
    }
}

#[cfg(all(unix, not(target_os = "linux")))]
fn punch_hole(file: &std::fs::File, offset: u64, len: u64) -> io::Result<()> {
    use std::os::unix::fs::FileExt;
    let zeros = vec![0u8; CHUNK_SIZE as usize];
    let mut pos = offset;
    while pos < offset + len {
        let n = (offset + len - pos).min(CHUNK_SIZE) as usize;
        file.write_all_at(&zeros[..n], pos)?;
        pos += n as u64;
    }
    Ok(())
}
