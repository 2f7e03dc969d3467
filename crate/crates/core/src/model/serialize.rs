//! Single-file model format: a versioned text header (magic line plus a
//! JSON document describing kind, architecture, and head configuration)
//! followed by the flat weight vector as little-endian 8-byte IEEE floats.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{build_learner, Arch, ConditionalGevModel, HeadConfig, LearnerKind};

const MAGIC: &str = "xtreat-model v1";

#[derive(Serialize, Deserialize)]
struct Header {
    #[serde(flatten)]
    kind: LearnerKind,
    arch: Arch,
    input_dim: usize,
    heads: HeadConfig,
    n_weights: usize,
}

impl ConditionalGevModel<f64> {
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut out = BufWriter::new(File::create(path.as_ref())?);
        let header = Header {
            kind: self.kind,
            arch: self.arch.clone(),
            input_dim: self.input_dim,
            heads: self.heads.clone(),
            n_weights: self.n_weights(),
        };
        writeln!(out, "{MAGIC}")?;
        writeln!(out, "{}", serde_json::to_string(&header)?)?;
        for w in self.flat_weights() {
            out.write_all(&w.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let mut input = BufReader::new(File::open(path.as_ref())?);
        let mut magic = vec![0u8; MAGIC.len() + 1];
        input.read_exact(&mut magic).map_err(|_| bad("truncated header"))?;
        if magic != format!("{MAGIC}\n").as_bytes() {
            return Err(bad("not an xtreat model file (bad magic)"));
        }
        let mut header_line = Vec::new();
        loop {
            let mut b = [0u8; 1];
            input.read_exact(&mut b).map_err(|_| bad("truncated header"))?;
            if b[0] == b'\n' {
                break;
            }
            header_line.push(b[0]);
        }
        let header: Header = serde_json::from_slice(&header_line)?;
        // Rebuild the skeleton, then overwrite the weights.
        let mut model = build_learner::<f64>(
            header.kind,
            header.input_dim,
            &header.arch,
            header.heads,
            1.0,
            0,
        )?;
        if model.n_weights() != header.n_weights {
            return Err(bad(format!(
                "weight count mismatch: header says {}, architecture needs {}",
                header.n_weights,
                model.n_weights()
            )));
        }
        let mut bytes = Vec::new();
        input.read_to_end(&mut bytes)?;
        if bytes.len() != header.n_weights * 8 {
            return Err(bad(format!(
                "expected {} weight bytes, found {}",
                header.n_weights * 8,
                bytes.len()
            )));
        }
        let flat: Vec<f64> = bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        model.set_flat_weights(&flat)?;
        Ok(model)
    }
}

fn bad(msg: impl Into<String>) -> Error {
    Error::Serde(msg.into())
}
