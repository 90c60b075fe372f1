//! Binary artifact container shared by every persisted grid, sample set,
//! checkpoint and sonar frame.
//!
//! Layout (little-endian throughout):
//!
//! ```text
//! magic   [u8; 4]  = "SAPG"
//! version u16      = 1
//! payload u16      = PayloadType
//! ...payload-specific body...
//! ```

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};

pub const MAGIC: [u8; 4] = *b"SAPG";
pub const VERSION: u16 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[repr(u16)]
pub enum PayloadType {
    FeatureGrid = 1,
    Tsdf = 2,
    TrainingSamples = 3,
    Checkpoint = 4,
    SonarFrame = 5,
}

impl PayloadType {
    fn from_u16(v: u16) -> Option<Self> {
        Some(match v {
            1 => Self::FeatureGrid,
            2 => Self::Tsdf,
            3 => Self::TrainingSamples,
            4 => Self::Checkpoint,
            5 => Self::SonarFrame,
            _ => return None,
        })
    }
}

pub struct Writer<W: Write> {
    inner: W,
}

impl<W: Write> Writer<W> {
    pub fn new(mut inner: W, payload: PayloadType) -> std::io::Result<Self> {
        inner.write_all(&MAGIC)?;
        inner.write_all(&VERSION.to_le_bytes())?;
        inner.write_all(&(payload as u16).to_le_bytes())?;
        Ok(Self { inner })
    }

    pub fn u8(&mut self, v: u8) -> std::io::Result<()> {
        self.inner.write_all(&[v])
    }
    pub fn u16(&mut self, v: u16) -> std::io::Result<()> {
        self.inner.write_all(&v.to_le_bytes())
    }
    pub fn u32(&mut self, v: u32) -> std::io::Result<()> {
        self.inner.write_all(&v.to_le_bytes())
    }
    pub fn u64(&mut self, v: u64) -> std::io::Result<()> {
        self.inner.write_all(&v.to_le_bytes())
    }
    pub fn f32(&mut self, v: f32) -> std::io::Result<()> {
        self.inner.write_all(&v.to_le_bytes())
    }
    pub fn f64(&mut self, v: f64) -> std::io::Result<()> {
        self.inner.write_all(&v.to_le_bytes())
    }
    pub fn bytes(&mut self, v: &[u8]) -> std::io::Result<()> {
        self.inner.write_all(v)
    }

    pub fn finish(mut self) -> std::io::Result<W> {
        self.inner.flush()?;
        Ok(self.inner)
    }
}

pub struct Reader<R: Read> {
    inner: R,
}

impl<R: Read> Reader<R> {
    /// Reads and checks the container header.
    pub fn new(mut inner: R, expected: PayloadType) -> Result<Self> {
        let mut head = [0u8; 8];
        inner
            .read_exact(&mut head)
            .map_err(|e| Error::Format(format!("truncated container header: {e}")))?;
        if head[..4] != MAGIC {
            return Err(Error::Format("bad magic, not a SAPG container".into()));
        }
        let version = u16::from_le_bytes([head[4], head[5]]);
        if version != VERSION {
            return Err(Error::Format(format!("unsupported container version {version}")));
        }
        let payload = u16::from_le_bytes([head[6], head[7]]);
        match PayloadType::from_u16(payload) {
            Some(p) if p == expected => Ok(Self { inner }),
            Some(p) => Err(Error::Format(format!("expected {expected:?} payload, found {p:?}"))),
            None => Err(Error::Format(format!("unknown payload type {payload}"))),
        }
    }

    fn array<const N: usize>(&mut self) -> Result<[u8; N]> {
        let mut b = [0u8; N];
        self.inner
            .read_exact(&mut b)
            .map_err(|e| Error::Format(format!("truncated container body: {e}")))?;
        Ok(b)
    }

    pub fn u8(&mut self) -> Result<u8> {
        Ok(self.array::<1>()?[0])
    }
    pub fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.array()?))
    }
    pub fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.array()?))
    }
    pub fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.array()?))
    }
    pub fn f32(&mut self) -> Result<f32> {
        Ok(f32::from_le_bytes(self.array()?))
    }
    pub fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.array()?))
    }
    pub fn bytes(&mut self, len: usize) -> Result<Vec<u8>> {
        let mut v = vec![0u8; len];
        self.inner
            .read_exact(&mut v)
            .map_err(|e| Error::Format(format!("truncated container body: {e}")))?;
        Ok(v)
    }

    /// Fails unless the body has been consumed completely.
    pub fn expect_end(mut self) -> Result<()> {
        let mut b = [0u8; 1];
        match self.inner.read(&mut b) {
            Ok(0) => Ok(()),
            Ok(_) => Err(Error::Format("trailing bytes after container body".into())),
            Err(e) => Err(Error::Format(e.to_string())),
        }
    }
}

pub fn create(path: &Path, payload: PayloadType) -> Result<Writer<BufWriter<File>>> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    Writer::new(BufWriter::new(file), payload).map_err(|e| Error::io(path, e))
}

pub fn open(path: &Path, payload: PayloadType) -> Result<Reader<BufReader<File>>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    Reader::new(BufReader::new(file), payload)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_checks() {
        let mut w = Writer::new(Vec::new(), PayloadType::Tsdf).unwrap();
        w.u32(7).unwrap();
        let buf = w.finish().unwrap();
        assert_eq!(&buf[..4], b"SAPG");
        assert_eq!(&buf[4..8], &[1, 0, 2, 0]);
        let mut r = Reader::new(&buf[..], PayloadType::Tsdf).unwrap();
        assert_eq!(r.u32().unwrap(), 7);
        r.expect_end().unwrap();
        assert!(Reader::new(&buf[..], PayloadType::FeatureGrid).is_err());
        let mut bad = buf.clone();
        bad[0] = b'X';
        assert!(Reader::new(&bad[..], PayloadType::Tsdf).is_err());
    }
}
