use std::path::Path;

use super::{DeepONet, DeepONetConfig, Fno, FnoConfig, NeuralModel};
use crate::error::{Error, Result};
use crate::io::{Decoder, Encoder};
use crate::{Grid1D, ReferenceParams};

const MODEL_MAGIC: &[u8; 8] = b"SNOPMODL";
pub const MODEL_VERSION: u32 = 1;
const ARCH_DEEPONET: u8 = 1;
const ARCH_FNO: u8 = 2;

#[derive(Debug, Clone, PartialEq)]
pub struct LoadedModel {
    pub model: NeuralModel,
    /// Digest of the training configuration that produced the weights.
    pub train_digest: [u8; 32],
}

fn encode_sizes(e: &mut Encoder, sizes: &[usize]) {
    e.u32(sizes.len() as u32);
    for &s in sizes {
        e.u64(s as u64);
    }
}

fn decode_sizes(d: &mut Decoder<'_>) -> Result<Vec<usize>> {
    let n = d.u32()? as usize;
    if n > 64 {
        return Err(Error::Format(format!("implausible layer count {n}")));
    }
    (0..n).map(|_| d.usize()).collect()
}

/// Layout, little-endian: magic, version, architecture tag and shapes,
/// reference parameters, grid, training digest, parameter count and
/// values, SHA-256 of all preceding bytes.
pub fn model_to_bytes(model: &NeuralModel, train_digest: &[u8; 32]) -> Vec<u8> {
    let mut e = Encoder::default();
    e.bytes(MODEL_MAGIC);
    e.u32(MODEL_VERSION);
    match model {
        NeuralModel::DeepONet(m) => {
            e.u8(ARCH_DEEPONET);
            let c = m.config();
            encode_sizes(&mut e, &c.branch_hidden);
            encode_sizes(&mut e, &c.trunk_hidden);
            e.u64(c.latent as u64);
            e.u8(u8::from(c.bias));
        }
        NeuralModel::Fno(m) => {
            e.u8(ARCH_FNO);
            let c = m.config();
            e.u64(c.width as u64);
            e.u64(c.modes as u64);
            e.u64(c.layers as u64);
            e.u64(c.head_hidden.unwrap_or(0) as u64);
        }
    }
    let r = model.reference();
    e.f64(r.sigma_t);
    e.f64(r.sigma_s0);
    e.f64(model.grid().length());
    e.u64(model.grid().n_cells() as u64);
    e.bytes(train_digest);
    let params = model.network().params();
    e.u64(params.len() as u64);
    e.f64s(params);
    e.finish_with_checksum()
}

pub fn model_from_bytes(bytes: &[u8]) -> Result<LoadedModel> {
    let mut d = Decoder::with_checksum(bytes)?;
    if d.take(8)? != MODEL_MAGIC {
        return Err(Error::Format("not a model file".into()));
    }
    let version = d.u32()?;
    if version != MODEL_VERSION {
        return Err(Error::Version {
            found: version,
            expected: MODEL_VERSION,
        });
    }
    enum Arch {
        DeepONet(DeepONetConfig),
        Fno(FnoConfig),
    }
    let arch = match d.u8()? {
        ARCH_DEEPONET => Arch::DeepONet(DeepONetConfig {
            branch_hidden: decode_sizes(&mut d)?,
            trunk_hidden: decode_sizes(&mut d)?,
            latent: d.usize()?,
            bias: d.u8()? != 0,
        }),
        ARCH_FNO => {
            let (width, modes, layers, head) = (d.usize()?, d.usize()?, d.usize()?, d.usize()?);
            Arch::Fno(FnoConfig {
                width,
                modes,
                layers,
                head_hidden: (head > 0).then_some(head),
            })
        }
        tag => return Err(Error::Format(format!("unknown architecture tag {tag}"))),
    };
    let reference = ReferenceParams {
        sigma_t: d.f64()?,
        sigma_s0: d.f64()?,
    };
    let grid = Grid1D::new(d.f64()?, d.usize()?)?;
    let train_digest: [u8; 32] = d.take(32)?.try_into().unwrap();
    let mut model = match arch {
        Arch::DeepONet(c) => NeuralModel::DeepONet(DeepONet::zeros(c, grid, reference)?),
        Arch::Fno(c) => NeuralModel::Fno(Fno::zeros(c, grid, reference)?),
    };
    let n = d.usize()?;
    if n != model.network().params().len() {
        return Err(Error::Format(format!(
            "file holds {n} parameters, architecture needs {}",
            model.network().params().len()
        )));
    }
    let params = d.f64s(n)?;
    d.expect_end()?;
    model.network_mut().params_mut().copy_from_slice(&params);
    Ok(LoadedModel { model, train_digest })
}

pub fn save_model(model: &NeuralModel, train_digest: &[u8; 32], path: &Path) -> Result<()> {
    std::fs::write(path, model_to_bytes(model, train_digest))?;
    Ok(())
}

pub fn load_model(path: &Path) -> Result<LoadedModel> {
    model_from_bytes(&std::fs::read(path)?)
}
