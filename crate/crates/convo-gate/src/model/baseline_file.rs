//! The `CGBL1` baseline model file.
//!
//! Little-endian throughout:
//!
//! ```text
//! "CGBL1"
//! u64 hash seed | u32 buckets | u32 intents
//! per intent: str id | f64 threshold | f64 bias | f64 x buckets weights
//! str separator | str trained_on | u64 steps
//! ```
//!
//! where `str` is a u32 byte length followed by UTF-8 bytes.

use std::path::Path;

use convo_gate_core::baseline::BaselineModel;
use convo_gate_core::features::FeatureHasher;
use convo_gate_core::intent::Thresholds;

use super::ModelMetadata;

pub const MAGIC: &[u8; 5] = b"CGBL1";

#[derive(Debug, Clone, PartialEq)]
pub struct BaselineArtifact {
    pub model: BaselineModel,
    pub intent_ids: Vec<String>,
    pub thresholds: Thresholds,
    pub metadata: ModelMetadata,
}

fn put_str(out: &mut Vec<u8>, s: &str) {
    out.extend_from_slice(&(s.len() as u32).to_le_bytes());
    out.extend_from_slice(s.as_bytes());
}

impl BaselineArtifact {
    pub fn to_bytes(&self) -> Vec<u8> {
        let m = &self.model;
        let mut out = Vec::with_capacity(32 + m.intent_count() * (m.hasher.buckets * 8 + 64));
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&m.hasher.seed.to_le_bytes());
        out.extend_from_slice(&(m.hasher.buckets as u32).to_le_bytes());
        out.extend_from_slice(&(m.intent_count() as u32).to_le_bytes());
        for k in 0..m.intent_count() {
            put_str(&mut out, &self.intent_ids[k]);
            out.extend_from_slice(&self.thresholds.as_slice()[k].to_le_bytes());
            out.extend_from_slice(&m.bias[k].to_le_bytes());
            for w in &m.weights[k] {
                out.extend_from_slice(&w.to_le_bytes());
            }
        }
        put_str(&mut out, &m.separator);
        put_str(&mut out, &self.metadata.trained_on);
        out.extend_from_slice(&self.metadata.steps.to_le_bytes());
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, String> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(MAGIC.len())? != MAGIC {
            return Err("not a CGBL1 file (bad magic)".into());
        }
        let seed = r.u64()?;
        let buckets = r.u32()? as usize;
        let intents = r.u32()? as usize;
        if buckets == 0 || intents == 0 {
            return Err("bucket and intent counts must be positive".into());
        }
        // each intent needs at least its weight block
        if intents.saturating_mul(buckets.saturating_mul(8)) > bytes.len() {
            return Err("file is shorter than its header claims".into());
        }
        let mut ids = Vec::with_capacity(intents);
        let mut thresholds = Vec::with_capacity(intents);
        let mut bias = Vec::with_capacity(intents);
        let mut weights = Vec::with_capacity(intents);
        for _ in 0..intents {
            ids.push(r.string()?);
            thresholds.push(r.f64()?);
            bias.push(r.f64()?);
            let block = r.take(buckets * 8)?;
            weights.push(block.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect());
        }
        let separator = r.string()?;
        let trained_on = r.string()?;
        let steps = r.u64()?;
        if r.pos != bytes.len() {
            return Err(format!("{} trailing bytes", bytes.len() - r.pos));
        }
        let thresholds = Thresholds::new(thresholds).map_err(|e| e.to_string())?;
        Ok(Self {
            model: BaselineModel { hasher: FeatureHasher::new(seed, buckets), separator, weights, bias },
            intent_ids: ids,
            thresholds,
            metadata: ModelMetadata { trained_on, steps },
        })
    }

    pub fn save(&self, path: &Path) -> std::io::Result<()> {
        std::fs::write(path, self.to_bytes())
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], String> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len()).ok_or("unexpected end of file")?;
        let out = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    fn u32(&mut self) -> Result<u32, String> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64, String> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64, String> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn string(&mut self) -> Result<String, String> {
        let len = self.u32()? as usize;
        String::from_utf8(self.take(len)?.to_vec()).map_err(|_| "string field is not UTF-8".into())
    }
}
