//! Binary checkpoint format (all integers and floats little-endian):
//!
//! | offset | size | field                                              |
//! |-------:|-----:|----------------------------------------------------|
//! | 0      | 8    | magic `GILCKPT\0`                                  |
//! | 8      | 4    | format version (`u32`, currently 1)                |
//! | 12     | 1    | architecture: 0 = egnn, 1 = attention              |
//! | 13     | 1    | head: 0 = graph scalar, 1 = node vector            |
//! | 14     | 1    | activation: 0 = silu, 1 = relu                     |
//! | 15     | 1    | flags: bit 0 multi-scale, bit 1 full last layer    |
//! | 16     | 4×5  | `u32` in_features, hidden, depth, heads, ffn       |
//! | 36     | 4    | reserved, zero                                     |
//! | 40     | 8    | dropout (`f64`)                                    |
//! | 48     | 8    | init seed (`u64`)                                  |
//! | 56     | 8    | output shift (`f64`)                               |
//! | 64     | 8    | output scale (`f64`)                               |
//! | 72     | 8    | parameter value count `P` (`u64`)                  |
//! | 80     | 8·P  | parameters (`f64`), tensors in declaration order,  |
//! |        |      | each row-major                                     |

use std::path::Path;

use super::{Activation, Arch, Head, Model, ModelConfig};
use crate::error::{Error, Result};
use crate::tensor::Tensor;

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"GILCKPT\0";
const VERSION: u32 = 1;
const HEADER_LEN: usize = 80;

pub fn checkpoint_bytes(model: &Model) -> Vec<u8> {
    let c = model.config();
    let mut out = Vec::with_capacity(HEADER_LEN + 8 * model.param_count());
    out.extend_from_slice(CHECKPOINT_MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.push(match c.arch {
        Arch::Egnn => 0,
        Arch::Attention => 1,
    });
    out.push(match c.head {
        Head::GraphScalar => 0,
        Head::NodeVector => 1,
    });
    out.push(match c.activation {
        Activation::Silu => 0,
        Activation::Relu => 1,
    });
    out.push(u8::from(c.multiscale) | u8::from(c.full_last_layer) << 1);
    for v in [c.in_features, c.hidden, c.depth, c.heads, c.ffn, 0] {
        out.extend_from_slice(&(v as u32).to_le_bytes());
    }
    out.extend_from_slice(&c.dropout.to_le_bytes());
    out.extend_from_slice(&c.seed.to_le_bytes());
    let (shift, scale) = model.output_affine();
    out.extend_from_slice(&shift.to_le_bytes());
    out.extend_from_slice(&scale.to_le_bytes());
    out.extend_from_slice(&(model.param_count() as u64).to_le_bytes());
    for p in model.params() {
        for v in p.iter() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

pub fn save_checkpoint(model: &Model, path: &Path) -> Result<()> {
    std::fs::write(path, checkpoint_bytes(model))?;
    Ok(())
}

pub fn load_checkpoint(path: &Path) -> Result<Model> {
    parse(&std::fs::read(path)?)
}

fn parse(bytes: &[u8]) -> Result<Model> {
    if bytes.len() < HEADER_LEN || &bytes[..8] != CHECKPOINT_MAGIC {
        return Err(Error::Checkpoint("missing magic header".into()));
    }
    let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().unwrap());
    let u64_at = |o: usize| u64::from_le_bytes(bytes[o..o + 8].try_into().unwrap());
    let f64_at = |o: usize| f64::from_le_bytes(bytes[o..o + 8].try_into().unwrap());
    if u32_at(8) != VERSION {
        return Err(Error::Checkpoint(format!("unsupported version {}", u32_at(8))));
    }
    let arch = match bytes[12] {
        0 => Arch::Egnn,
        1 => Arch::Attention,
        b => return Err(Error::Checkpoint(format!("unknown architecture {b}"))),
    };
    let head = match bytes[13] {
        0 => Head::GraphScalar,
        1 => Head::NodeVector,
        b => return Err(Error::Checkpoint(format!("unknown head {b}"))),
    };
    let activation = match bytes[14] {
        0 => Activation::Silu,
        1 => Activation::Relu,
        b => return Err(Error::Checkpoint(format!("unknown activation {b}"))),
    };
    let config = ModelConfig {
        arch,
        head,
        activation,
        in_features: u32_at(16) as usize,
        hidden: u32_at(20) as usize,
        depth: u32_at(24) as usize,
        heads: u32_at(28) as usize,
        ffn: u32_at(32) as usize,
        dropout: f64_at(40),
        multiscale: bytes[15] & 1 != 0,
        full_last_layer: bytes[15] & 2 != 0,
        seed: u64_at(48),
    };
    let shift = f64_at(56);
    let scale = f64_at(64);
    let count = u64_at(72) as usize;
    if bytes.len() != HEADER_LEN + 8 * count {
        return Err(Error::Checkpoint(format!(
            "expected {} parameter bytes, found {}",
            8 * count,
            bytes.len() - HEADER_LEN
        )));
    }
    let template = Model::new(config.clone())?;
    if template.param_count() != count {
        return Err(Error::Checkpoint(format!(
            "header declares {count} parameters, architecture needs {}",
            template.param_count()
        )));
    }
    let mut offset = HEADER_LEN;
    let params = template
        .params()
        .iter()
        .map(|p| {
            let t = Tensor::from_shape_fn(p.raw_dim(), |_| {
                let v = f64_at(offset);
                offset += 8;
                v
            });
            t
        })
        .collect();
    Model::from_parts(config, params, shift, scale)
}
