//! Versioned checkpoint container: a JSON header naming sections and tensor
//! shapes (plus the training config), followed by raw little-endian f32
//! data. The extractor and estimator are separate sections, so the offline
//! phase can hand an estimator-only checkpoint to a later phase.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::autodiff::ParamSet;

use super::config::TrainingConfig;
use super::EstiNetError;

const MAGIC: &[u8; 4] = b"ESNT";
const VERSION: u32 = 1;

#[derive(Debug, Serialize, Deserialize)]
struct TensorMeta {
    name: String,
    shape: Vec<usize>,
}

#[derive(Debug, Serialize, Deserialize)]
struct SectionMeta {
    name: String,
    tensors: Vec<TensorMeta>,
}

#[derive(Debug, Serialize, Deserialize)]
struct Header {
    config: TrainingConfig,
    sections: Vec<SectionMeta>,
}

/// In-memory form of a loaded checkpoint.
#[derive(Debug)]
pub struct Checkpoint {
    pub config: TrainingConfig,
    pub sections: Vec<(String, Vec<(String, Vec<usize>, Vec<f32>)>)>,
}

impl Checkpoint {
    pub fn section(&self, name: &str) -> Option<&Vec<(String, Vec<usize>, Vec<f32>)>> {
        self.sections.iter().find(|(n, _)| n == name).map(|(_, t)| t)
    }

    /// Copy one section's tensors into a parameter set registered with the
    /// same names and shapes.
    pub fn restore_into(&self, section: &str, params: &mut ParamSet<f32>) -> Result<(), EstiNetError> {
        let tensors = self
            .section(section)
            .ok_or_else(|| EstiNetError::Checkpoint(format!("no section {section:?}")))?;
        if tensors.len() != params.len() {
            return Err(EstiNetError::Checkpoint(format!(
                "section {section:?} holds {} tensors, parameter set has {}",
                tensors.len(),
                params.len()
            )));
        }
        for (i, (name, shape, values)) in tensors.iter().enumerate() {
            if params.name(i) != name || &params.tensor(i).shape != shape {
                return Err(EstiNetError::Checkpoint(format!(
                    "tensor {i} mismatch: checkpoint {name:?} {shape:?} vs parameter {:?} {:?}",
                    params.name(i),
                    params.tensor(i).shape
                )));
            }
            params.tensor_mut(i).values.copy_from_slice(values);
        }
        Ok(())
    }
}

pub fn save_checkpoint(
    path: &Path,
    config: &TrainingConfig,
    sections: &[(&str, &ParamSet<f32>)],
) -> Result<(), EstiNetError> {
    let header = Header {
        config: config.clone(),
        sections: sections
            .iter()
            .map(|(name, ps)| SectionMeta {
                name: name.to_string(),
                tensors: ps
                    .iter()
                    .map(|(n, t)| TensorMeta { name: n.to_string(), shape: t.shape.clone() })
                    .collect(),
            })
            .collect(),
    };
    let header_json = serde_json::to_vec(&header)
        .map_err(|e| EstiNetError::Checkpoint(e.to_string()))?;
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    w.write_all(&(header_json.len() as u64).to_le_bytes())?;
    w.write_all(&header_json)?;
    for (_, ps) in sections {
        for (_, t) in ps.iter() {
            for v in &t.values {
                w.write_all(&v.to_le_bytes())?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint, EstiNetError> {
    let mut r = BufReader::new(File::open(path)?);
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(EstiNetError::Checkpoint(format!(
            "bad magic {magic:?}, expected {MAGIC:?}"
        )));
    }
    let mut word = [0u8; 4];
    r.read_exact(&mut word)?;
    let version = u32::from_le_bytes(word);
    if version != VERSION {
        return Err(EstiNetError::Checkpoint(format!(
            "unsupported checkpoint version {version}"
        )));
    }
    let mut len8 = [0u8; 8];
    r.read_exact(&mut len8)?;
    let header_len = u64::from_le_bytes(len8) as usize;
    let mut header_json = vec![0u8; header_len];
    r.read_exact(&mut header_json)?;
    let header: Header = serde_json::from_slice(&header_json)
        .map_err(|e| EstiNetError::Checkpoint(e.to_string()))?;
    let mut sections = Vec::new();
    for s in header.sections {
        let mut tensors = Vec::new();
        for t in s.tensors {
            let numel: usize = t.shape.iter().product();
            let mut raw = vec![0u8; numel * 4];
            r.read_exact(&mut raw).map_err(|_| {
                EstiNetError::Checkpoint(format!("truncated data for {:?}", t.name))
            })?;
            let values = raw
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
                .collect();
            tensors.push((t.name, t.shape, values));
        }
        sections.push((s.name, tensors));
    }
    Ok(Checkpoint { config: header.config, sections })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::Tensor;

    fn demo_params(seedish: f32) -> ParamSet<f32> {
        let mut ps = ParamSet::new();
        ps.register("w", Tensor::new(vec![2, 2], vec![seedish, 1.0, 2.0, 3.0]).unwrap());
        ps.register("b", Tensor::new(vec![2], vec![-1.0, seedish]).unwrap());
        ps
    }

    #[test]
    fn roundtrip_restores_both_sections() {
        let dir = std::env::temp_dir().join("estinet_ckpt_test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("model.esnt");
        let cfg = TrainingConfig::default();
        let arg = demo_params(0.5);
        let est = demo_params(7.25);
        save_checkpoint(&path, &cfg, &[("extractor", &arg), ("estimator", &est)]).unwrap();

        let ck = load_checkpoint(&path).unwrap();
        assert_eq!(ck.config, cfg);
        let mut arg2 = demo_params(0.0);
        let mut est2 = demo_params(0.0);
        ck.restore_into("extractor", &mut arg2).unwrap();
        ck.restore_into("estimator", &mut est2).unwrap();
        assert_eq!(arg2.tensor(0).values, arg.tensor(0).values);
        assert_eq!(est2.tensor(1).values, est.tensor(1).values);
    }

    #[test]
    fn estimator_only_checkpoint_is_valid() {
        let dir = std::env::temp_dir().join("estinet_ckpt_test2");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("est.esnt");
        let est = demo_params(1.5);
        save_checkpoint(&path, &TrainingConfig::default(), &[("estimator", &est)]).unwrap();
        let ck = load_checkpoint(&path).unwrap();
        assert!(ck.section("extractor").is_none());
        let mut est2 = demo_params(0.0);
        ck.restore_into("estimator", &mut est2).unwrap();
        assert_eq!(est2.tensor(0).values, est.tensor(0).values);
    }

    #[test]
    fn shape_mismatch_is_rejected() {
        let dir = std::env::temp_dir().join("estinet_ckpt_test3");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("bad.esnt");
        let est = demo_params(1.5);
        save_checkpoint(&path, &TrainingConfig::default(), &[("estimator", &est)]).unwrap();
        let ck = load_checkpoint(&path).unwrap();
        let mut other = ParamSet::new();
        other.register("w", Tensor::<f32>::zeros(vec![3]));
        other.register("b", Tensor::<f32>::zeros(vec![2]));
        assert!(ck.restore_into("estimator", &mut other).is_err());
    }
}
