//! Parameter checkpoints.
//!
//! Binary layout (all integers little-endian):
//!
//! ```text
//! b"TCADCKPT"  u32 version  u64 header_len  header_len bytes of JSON header
//! u64 count    count × f64 (little-endian, layer order)
//! ```
//!
//! The JSON header echoes the [`NetworkConfig`] plus free-form metadata.
//! Files ending in `.json` use a plain JSON document instead.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Network, NetworkConfig, Parameters};
use crate::{Error, Result};

const MAGIC: &[u8; 8] = b"TCADCKPT";
const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub config: NetworkConfig,
    /// Free-form metadata, e.g. the calibrated threshold.
    #[serde(default)]
    pub metadata: serde_json::Map<String, serde_json::Value>,
    pub values: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct Header {
    config: NetworkConfig,
    #[serde(default)]
    metadata: serde_json::Map<String, serde_json::Value>,
}

impl Checkpoint {
    pub fn new(network: &Network) -> Self {
        Self {
            config: network.config.clone(),
            metadata: Default::default(),
            values: network.params.values().to_vec(),
        }
    }

    pub fn network(&self) -> Result<Network> {
        let params = Parameters::from_values(&self.config, self.values.clone())?;
        Network::new(self.config.clone(), params)
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let header = serde_json::to_vec(&Header {
            config: self.config.clone(),
            metadata: self.metadata.clone(),
        })?;
        let mut out = Vec::with_capacity(28 + header.len() + 8 * self.values.len());
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.extend_from_slice(&(header.len() as u64).to_le_bytes());
        out.extend_from_slice(&header);
        out.extend_from_slice(&(self.values.len() as u64).to_le_bytes());
        for v in &self.values {
            out.extend_from_slice(&v.to_le_bytes());
        }
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut cur = Cursor { bytes, pos: 0 };
        if cur.take(8)? != MAGIC {
            return Err(Error::Checkpoint("bad magic".into()));
        }
        let version = u32::from_le_bytes(cur.take(4)?.try_into().unwrap());
        if version != VERSION {
            return Err(Error::Checkpoint(format!("unsupported version {version}")));
        }
        let header_len = cur.u64()? as usize;
        let header: Header = serde_json::from_slice(cur.take(header_len)?)?;
        let count = cur.u64()? as usize;
        let values = (0..count)
            .map(|_| cur.take(8).map(|b| f64::from_le_bytes(b.try_into().unwrap())))
            .collect::<Result<Vec<_>>>()?;
        if cur.pos != bytes.len() {
            return Err(Error::Checkpoint("trailing bytes".into()));
        }
        Ok(Self {
            config: header.config,
            metadata: header.metadata,
            values,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let bytes = if is_json(path) {
            serde_json::to_vec_pretty(self)?
        } else {
            self.to_bytes()?
        };
        fs::write(path, bytes).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        if is_json(path) {
            Ok(serde_json::from_slice(&bytes)?)
        } else {
            Self::from_bytes(&bytes)
        }
    }
}

fn is_json(path: &Path) -> bool {
    path.extension().is_some_and(|e| e == "json")
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| Error::Checkpoint("truncated".into()))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}
