//! Versioned binary model checkpoints.

use std::io::{Read, Write};

use ndarray::{Array1, Array2};

use super::{ClassifierError, HyperbolicHead, Model, Result, TinyBackbone};
use crate::format::{Decoder, Encoder, FormatError};
use crate::hierarchy::{leaf_digest, ClassDistanceMatrix, Encoding};
use crate::prototypes::io::{decode_space, encode_space};
use crate::prototypes::PrototypeSet;

pub const MAGIC: &[u8; 8] = b"HPNMODEL";
pub const VERSION: u32 = 1;

/// A trained model plus the metadata needed to reuse it safely.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub model: Model,
    /// Digest of the class labels in order; see [`leaf_digest`].
    pub leaf_digest: String,
    pub config_hash: String,
    /// Ground-truth class distances the prototypes were regularized with.
    pub distance_matrix: Option<ClassDistanceMatrix>,
}

fn matrix(d: &mut Decoder, rows: usize, cols: usize) -> std::result::Result<Array2<f64>, FormatError> {
    Array2::from_shape_vec((rows, cols), d.f64s(rows.saturating_mul(cols))?).map_err(|e| FormatError::Invalid(e.to_string()))
}

impl Checkpoint {
    pub fn new(model: Model, config_hash: String, distance_matrix: Option<ClassDistanceMatrix>) -> Self {
        let leaf_digest = leaf_digest(model.prototypes.labels());
        Self {
            model,
            leaf_digest,
            config_hash,
            distance_matrix,
        }
    }

    pub fn classes(&self) -> &[String] {
        self.model.prototypes.labels()
    }

    pub fn write<W: Write>(&self, w: W) -> Result<()> {
        let m = &self.model;
        let mut e = Encoder::new();
        e.str(&self.config_hash).str(&self.leaf_digest);
        encode_space(&mut e, m.head.space());
        e.f64(m.head.temperature());
        e.u32(m.head.output_dim() as u32).u32(m.head.input_dim() as u32);
        e.f64s(m.head.w.as_slice().expect("standard layout"));
        e.f64s(&m.head.bias);
        match &m.backbone {
            None => {
                e.u8(0);
            }
            Some(bb) => {
                e.u8(1)
                    .u32(bb.input_dim() as u32)
                    .u32(bb.hidden_dim() as u32)
                    .u32(bb.output_dim() as u32);
                for a in [&bb.w1, &bb.w2] {
                    e.f64s(a.as_standard_layout().as_slice().expect("standard layout"));
                }
                e.f64s(bb.b1.as_slice().expect("contiguous"));
                e.f64s(bb.b2.as_slice().expect("contiguous"));
            }
        }
        m.prototypes.encode_into(&mut e);
        match &self.distance_matrix {
            None => {
                e.u8(0);
            }
            Some(d) => {
                e.u8(match d.encoding() {
                    Encoding::Lcd => 1,
                    Encoding::Hcd => 2,
                });
                e.f64s(d.matrix().as_standard_layout().as_slice().expect("standard layout"));
            }
        }
        e.finish(w, MAGIC, VERSION)?;
        Ok(())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        self.write(&mut out).expect("in-memory write");
        out
    }

    /// Reads and validates a checkpoint, including its leaf-order digest.
    pub fn read<R: Read>(r: R) -> Result<Self> {
        let (mut d, _) = Decoder::open(r, MAGIC, "model checkpoint", VERSION)?;
        let config_hash = d.str()?;
        let digest = d.str()?;
        let space = decode_space(&mut d)?;
        let temperature = d.f64()?;
        let n = d.u32()? as usize;
        let p = d.u32()? as usize;
        let w = matrix(&mut d, n, p)?;
        let bias = d.f64s(p)?;
        let backbone = match d.u8()? {
            0 => None,
            1 => {
                let (i, h, o) = (d.u32()? as usize, d.u32()? as usize, d.u32()? as usize);
                let w1 = matrix(&mut d, h, i)?;
                let w2 = matrix(&mut d, o, h)?;
                let b1 = Array1::from(d.f64s(h)?);
                let b2 = Array1::from(d.f64s(o)?);
                Some(TinyBackbone { w1, b1, w2, b2 })
            }
            t => return Err(FormatError::Invalid(format!("backbone tag {t}")).into()),
        };
        let prototypes = PrototypeSet::decode_from(&mut d)?;
        let k = prototypes.num_classes();
        let distance_matrix = match d.u8()? {
            0 => None,
            tag @ (1 | 2) => {
                let enc = if tag == 1 { Encoding::Lcd } else { Encoding::Hcd };
                let m = matrix(&mut d, k, k)?;
                Some(ClassDistanceMatrix::new(m, prototypes.labels().to_vec(), enc)?)
            }
            t => return Err(FormatError::Invalid(format!("distance matrix tag {t}")).into()),
        };
        d.done()?;
        if leaf_digest(prototypes.labels()) != digest {
            return Err(ClassifierError::DigestMismatch);
        }
        let head = HyperbolicHead::new(w, bias, space, temperature)?;
        let model = Model::new(backbone, head, prototypes)?;
        Ok(Self {
            model,
            leaf_digest: digest,
            config_hash,
            distance_matrix,
        })
    }

    /// Errors unless the checkpoint was trained on `classes` in this order.
    pub fn check_classes(&self, classes: &[String]) -> Result<()> {
        if leaf_digest(classes) == self.leaf_digest {
            Ok(())
        } else {
            Err(ClassifierError::DigestMismatch)
        }
    }
}
