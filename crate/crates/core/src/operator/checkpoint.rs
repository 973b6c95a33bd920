//! `NOPCKPT1` checkpoints.
//!
//! Little-endian layout: magic `NOPCKPT1`, version `u32`, variant `u8`
//! (0 = FNO, 1 = IFNO), then `d, d_F, d_u, d_Q, k1, k2, L` as `u32`, then the
//! normalization arrays `in_mean[d_F], in_std[d_F], out_mean[d_u], out_std[d_u]`
//! and the flat parameter vector, all `f64`.

use std::io::{Read, Write};
use std::path::Path;

use super::{HyperParams, Normalization, OperatorModel, ParamLayout, Variant};
use crate::error::{Error, Result};

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"NOPCKPT1";
pub const CHECKPOINT_VERSION: u32 = 1;

fn u32_of(v: usize) -> Result<[u8; 4]> {
    u32::try_from(v).map(u32::to_le_bytes).map_err(|_| Error::InvalidArgument(format!("{v} overflows u32")))
}

impl OperatorModel {
    pub fn to_checkpoint_bytes(&self) -> Result<Vec<u8>> {
        let h = self.hyper();
        let mut out = Vec::with_capacity(64 + 8 * self.num_params());
        out.extend_from_slice(CHECKPOINT_MAGIC);
        out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
        out.push(match h.variant {
            Variant::Fno => 0,
            Variant::Ifno => 1,
        });
        for v in [h.d, h.d_f, h.d_u, h.d_q, h.k1, h.k2, h.layers] {
            out.extend_from_slice(&u32_of(v)?);
        }
        let n = &self.norm;
        for v in n.in_mean.iter().chain(&n.in_std).chain(&n.out_mean).chain(&n.out_std).chain(self.params()) {
            out.extend_from_slice(&v.to_le_bytes());
        }
        Ok(out)
    }

    pub fn from_checkpoint_bytes(bytes: &[u8]) -> Result<Self> {
        let mut cur = bytes;
        let model = Self::read_checkpoint(&mut cur)?;
        if !cur.is_empty() {
            return Err(Error::Format(format!("{} trailing bytes after checkpoint", cur.len())));
        }
        Ok(model)
    }

    pub fn read_checkpoint(mut r: impl Read) -> Result<Self> {
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic)?;
        if &magic != CHECKPOINT_MAGIC {
            return Err(Error::Format("bad checkpoint magic".into()));
        }
        let mut word = [0u8; 4];
        r.read_exact(&mut word)?;
        let version = u32::from_le_bytes(word);
        if version != CHECKPOINT_VERSION {
            return Err(Error::Format(format!("unsupported checkpoint version {version}")));
        }
        let mut tag = [0u8; 1];
        r.read_exact(&mut tag)?;
        let variant = match tag[0] {
            0 => Variant::Fno,
            1 => Variant::Ifno,
            t => return Err(Error::Format(format!("unknown variant tag {t}"))),
        };
        let mut fields = [0usize; 7];
        for f in &mut fields {
            r.read_exact(&mut word)?;
            *f = u32::from_le_bytes(word) as usize;
        }
        let [d, d_f, d_u, d_q, k1, k2, layers] = fields;
        let hyper = HyperParams { d, d_f, d_u, d_q, k1, k2, layers, variant };
        hyper.validate().map_err(|e| Error::Format(e.to_string()))?;
        let mut read_f64s = |n: usize| -> Result<Vec<f64>> {
            let mut buf = vec![0u8; n * 8];
            r.read_exact(&mut buf)?;
            Ok(buf.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect())
        };
        let norm = Normalization {
            in_mean: read_f64s(d_f)?,
            in_std: read_f64s(d_f)?,
            out_mean: read_f64s(d_u)?,
            out_std: read_f64s(d_u)?,
        };
        let params = read_f64s(ParamLayout::new(&hyper).total)?;
        Self::from_parts(hyper, norm, params)
    }

    pub fn write_checkpoint(&self, mut w: impl Write) -> Result<()> {
        w.write_all(&self.to_checkpoint_bytes()?)?;
        Ok(())
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_checkpoint_bytes()?)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_checkpoint_bytes(&std::fs::read(path)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{GridField2D, GridShape};

    #[test]
    fn roundtrip_reproduces_forward_bitwise() {
        for variant in [Variant::Fno, Variant::Ifno] {
            let h = HyperParams { d: 3, d_f: 2, d_u: 1, d_q: 5, k1: 3, k2: 2, layers: 3, variant };
            let mut m = OperatorModel::init(h, 11).unwrap();
            m.norm.in_mean = vec![0.5, -1.0];
            m.norm.out_std = vec![2.5];
            let bytes = m.to_checkpoint_bytes().unwrap();
            assert_eq!(&bytes[..8], CHECKPOINT_MAGIC);
            let back = OperatorModel::from_checkpoint_bytes(&bytes).unwrap();
            assert_eq!(back, m);
            let f = GridField2D::from_fn(GridShape::new(7, 6, 2).unwrap(), |c, x, y| (x * 3.0 + c as f64).sin() * y);
            let (a, b) = (m.forward(&f).unwrap(), back.forward(&f).unwrap());
            assert!(a.data().iter().zip(b.data()).all(|(x, y)| x.to_bits() == y.to_bits()));
        }
    }

    #[test]
    fn rejects_truncated_and_foreign_bytes() {
        let h = HyperParams { d: 2, d_f: 1, d_u: 1, d_q: 2, k1: 1, k2: 1, layers: 1, variant: Variant::Fno };
        let bytes = OperatorModel::zeros(h).unwrap().to_checkpoint_bytes().unwrap();
        assert!(OperatorModel::from_checkpoint_bytes(&bytes[..bytes.len() - 1]).is_err());
        let mut extra = bytes.clone();
        extra.push(0);
        assert!(OperatorModel::from_checkpoint_bytes(&extra).is_err());
        assert!(OperatorModel::from_checkpoint_bytes(b"NOPDS01\0rest").is_err());
    }
}
