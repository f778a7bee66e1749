//! Little-endian binary cache files with a magic, format version, and an
//! FNV-1a payload checksum. Shared by the band and covariance caches.

use std::io::{Read, Write};

use crate::error::{Error, Result};
use crate::stats::fnv1a;

pub(crate) struct Payload {
    buf: Vec<u8>,
}

impl Payload {
    pub fn new() -> Self {
        Payload { buf: Vec::new() }
    }

    pub fn put_u32(&mut self, v: u32) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    pub fn put_u64(&mut self, v: u64) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    pub fn put_f64(&mut self, v: f64) {
        self.buf.extend_from_slice(&v.to_bits().to_le_bytes());
    }

    pub fn put_f64_slice(&mut self, vs: &[f64]) {
        self.put_u64(vs.len() as u64);
        for &v in vs {
            self.put_f64(v);
        }
    }

    pub fn checksum(&self) -> u64 {
        fnv1a(&self.buf)
    }

    pub fn write_to(
        &self,
        path: &std::path::Path,
        magic: &[u8; 8],
        version: u32,
    ) -> Result<u64> {
        let checksum = self.checksum();
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent)?;
        }
        let mut f = std::fs::File::create(path)?;
        f.write_all(magic)?;
        f.write_all(&version.to_le_bytes())?;
        f.write_all(&checksum.to_le_bytes())?;
        f.write_all(&(self.buf.len() as u64).to_le_bytes())?;
        f.write_all(&self.buf)?;
        Ok(checksum)
    }
}

pub(crate) struct Reader {
    buf: Vec<u8>,
    pos: usize,
}

impl Reader {
    pub fn open(path: &std::path::Path, magic: &[u8; 8], version: u32) -> Result<Self> {
        let mut f = std::fs::File::open(path)?;
        let mut head = [0u8; 8];
        f.read_exact(&mut head)?;
        if &head != magic {
            return Err(Error::Cache(format!("{}: bad magic", path.display())));
        }
        let mut w = [0u8; 4];
        f.read_exact(&mut w)?;
        let got_version = u32::from_le_bytes(w);
        if got_version != version {
            return Err(Error::Cache(format!(
                "{}: format version {} (expected {})",
                path.display(),
                got_version,
                version
            )));
        }
        let mut dw = [0u8; 8];
        f.read_exact(&mut dw)?;
        let checksum = u64::from_le_bytes(dw);
        f.read_exact(&mut dw)?;
        let len = u64::from_le_bytes(dw) as usize;
        let mut buf = vec![0u8; len];
        f.read_exact(&mut buf)?;
        if fnv1a(&buf) != checksum {
            return Err(Error::Cache(format!("{}: checksum mismatch", path.display())));
        }
        Ok(Reader { buf, pos: 0 })
    }

    fn take(&mut self, n: usize) -> Result<&[u8]> {
        if self.pos + n > self.buf.len() {
            return Err(Error::Cache("truncated payload".into()));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    pub fn get_u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    pub fn get_u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    pub fn get_f64(&mut self) -> Result<f64> {
        Ok(f64::from_bits(u64::from_le_bytes(self.take(8)?.try_into().unwrap())))
    }

    pub fn get_f64_vec(&mut self) -> Result<Vec<f64>> {
        let n = self.get_u64()? as usize;
        let mut v = Vec::with_capacity(n);
        for _ in 0..n {
            v.push(self.get_f64()?);
        }
        Ok(v)
    }
}
