//! Versioned JSON snapshots of a running chain.
//!
//! The generator is stored as its ChaCha key, stream and word position, so a
//! restored chain continues the exact random sequence of the original.

use std::io::Write;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::write_atomic;
use crate::lattice::{LatticePoint, Walk};
use crate::pivot::{Chain, ChainConfig};

pub const CHECKPOINT_FORMAT: &str = "sawlab-chain";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RngState {
    pub key: [u8; 32],
    pub stream: u64,
    /// Decimal string: JSON numbers cannot hold a u128 exactly.
    pub word_pos: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainCheckpoint {
    pub format: String,
    pub version: u32,
    pub config: ChainConfig,
    pub attempted: u64,
    pub accepted: u64,
    pub rng: RngState,
    pub sites: Vec<[i64; 3]>,
}

impl ChainCheckpoint {
    pub fn capture(chain: &Chain) -> Self {
        let rng = chain.rng();
        ChainCheckpoint {
            format: CHECKPOINT_FORMAT.to_string(),
            version: CHECKPOINT_VERSION,
            config: chain.config().clone(),
            attempted: chain.attempted(),
            accepted: chain.accepted(),
            rng: RngState { key: rng.get_seed(), stream: rng.get_stream(), word_pos: rng.get_word_pos().to_string() },
            sites: chain.walk().sites().iter().map(|p| p.to_array()).collect(),
        }
    }

    pub fn restore(&self) -> Result<Chain> {
        if self.format != CHECKPOINT_FORMAT || self.version != CHECKPOINT_VERSION {
            return Err(Error::InvalidConfig(format!(
                "unsupported checkpoint {} v{} (expected {CHECKPOINT_FORMAT} v{CHECKPOINT_VERSION})",
                self.format, self.version
            )));
        }
        self.config.validate()?;
        if self.sites.len() != self.config.n_steps + 1 {
            return Err(Error::InvalidWalk(format!(
                "checkpoint holds {} sites for N = {}",
                self.sites.len(),
                self.config.n_steps
            )));
        }
        let sites = self.sites.iter().map(|&a| LatticePoint::from_array(a)).collect();
        let walk = Walk::from_sites(sites, self.config.self_avoiding)?;
        if !self.config.constraint.admits(&walk) {
            return Err(Error::InvalidWalk("checkpointed walk violates its constraint".into()));
        }
        let word_pos: u128 = self
            .rng
            .word_pos
            .parse()
            .map_err(|_| Error::InvalidConfig(format!("bad word position '{}'", self.rng.word_pos)))?;
        let mut rng = ChaCha8Rng::from_seed(self.rng.key);
        rng.set_stream(self.rng.stream);
        rng.set_word_pos(word_pos);
        Ok(Chain::from_parts(self.config.clone(), walk, self.attempted, self.accepted, rng))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let json = serde_json::to_vec_pretty(self).map_err(|e| Error::json(path, e))?;
        write_atomic(path, |w| w.write_all(&json))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_slice(&bytes).map_err(|e| Error::json(path, e))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pivot::Constraint;

    #[test]
    fn restored_chain_continues_identically() {
        let mut chain = Chain::new(ChainConfig::new(40, true, Constraint::HalfSpace, 21, 3)).unwrap();
        chain.advance(777);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("chain.json");
        ChainCheckpoint::capture(&chain).save(&path).unwrap();
        let loaded = ChainCheckpoint::load(&path).unwrap();
        assert_eq!(loaded, ChainCheckpoint::capture(&chain));
        let mut restored = loaded.restore().unwrap();
        for _ in 0..1000 {
            assert_eq!(chain.step(), restored.step());
        }
        assert_eq!(chain.walk().sites(), restored.walk().sites());
        assert_eq!(ChainCheckpoint::capture(&chain), ChainCheckpoint::capture(&restored));
    }

    #[test]
    fn rejects_foreign_format() {
        let chain = Chain::new(ChainConfig::new(5, true, Constraint::None, 1, 0)).unwrap();
        let mut cp = ChainCheckpoint::capture(&chain);
        cp.version = 99;
        assert!(cp.restore().is_err());
    }
}
