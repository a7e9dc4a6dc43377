//! Binary model checkpoints.
//!
//! Layout (little-endian): magic, kind tag `u8`, `u32` ASV dim, `u32` CM dim,
//! `f64` margin, `u8` flags (bit 0: projector length normalization),
//! `u32` block count, then each block's layer list (`u16` name
//! length, name, `u32` layer count, per layer `u8` 0 = FC with `u32` in/out,
//! 1 = ELU), then every FC layer's weights and bias as `f64`.

use std::path::Path;

use super::{Baseline2Model, EmbeddingDims, IepModel, ModelKind, MsfmModel};
use crate::nn::{DenseParams, LayerKind, Mlp, MlpParams, MlpSpec};
use crate::{Error, Result};

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"SASVMDL1";

const WHAT: &str = "checkpoint";

/// A trained model in a form that can be written to disk.
#[derive(Debug, Clone, PartialEq)]
pub enum Checkpoint {
    Msfm(MsfmModel),
    Iep(IepModel),
    Baseline2(Baseline2Model),
}

impl Checkpoint {
    pub fn kind(&self) -> ModelKind {
        match self {
            Checkpoint::Msfm(m) if m.use_sssv_score() => ModelKind::Msfm,
            Checkpoint::Msfm(_) => ModelKind::MsfmNoSssv,
            Checkpoint::Iep(_) => ModelKind::Iep,
            Checkpoint::Baseline2(_) => ModelKind::Baseline2,
        }
    }

    fn tag(&self) -> u8 {
        match self.kind() {
            ModelKind::Msfm => 1,
            ModelKind::MsfmNoSssv => 2,
            ModelKind::Iep => 3,
            _ => 4,
        }
    }

    fn dims(&self) -> EmbeddingDims {
        match self {
            Checkpoint::Msfm(m) => m.dims(),
            Checkpoint::Iep(m) => m.dims(),
            Checkpoint::Baseline2(m) => m.dims(),
        }
    }

    fn blocks(&self) -> Vec<(&'static str, &Mlp)> {
        match self {
            Checkpoint::Msfm(m) => vec![("u1", &m.u1), ("u2", &m.u2), ("pj", &m.pj), ("sf", &m.sf)],
            Checkpoint::Iep(m) => vec![("f", &m.f), ("g", &m.g)],
            Checkpoint::Baseline2(m) => vec![("mlp", &m.mlp)],
        }
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(CHECKPOINT_MAGIC);
        out.push(self.tag());
        let dims = self.dims();
        out.extend_from_slice(&(dims.asv as u32).to_le_bytes());
        out.extend_from_slice(&(dims.cm as u32).to_le_bytes());
        let margin = match self {
            Checkpoint::Iep(m) => m.margin,
            _ => 0.0,
        };
        out.extend_from_slice(&margin.to_le_bytes());
        out.push(match self {
            Checkpoint::Iep(m) => m.length_norm as u8,
            _ => 0,
        });
        let blocks = self.blocks();
        out.extend_from_slice(&(blocks.len() as u32).to_le_bytes());
        for (name, mlp) in &blocks {
            out.extend_from_slice(&(name.len() as u16).to_le_bytes());
            out.extend_from_slice(name.as_bytes());
            let layers = mlp.spec().layers();
            out.extend_from_slice(&(layers.len() as u32).to_le_bytes());
            for layer in layers {
                match *layer {
                    LayerKind::FullyConnected { in_dim, out_dim } => {
                        out.push(0);
                        out.extend_from_slice(&(in_dim as u32).to_le_bytes());
                        out.extend_from_slice(&(out_dim as u32).to_le_bytes());
                    }
                    LayerKind::Elu => out.push(1),
                }
            }
        }
        for (_, mlp) in &blocks {
            for dense in &mlp.params.dense {
                for v in dense.weight.iter().chain(&dense.bias) {
                    out.extend_from_slice(&v.to_le_bytes());
                }
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(CHECKPOINT_MAGIC.len())? != CHECKPOINT_MAGIC {
            return Err(Error::format(WHAT, "bad magic"));
        }
        let tag = r.u8()?;
        let dims = EmbeddingDims {
            asv: r.u32()? as usize,
            cm: r.u32()? as usize,
        };
        let margin = r.f64()?;
        let flags = r.u8()?;
        if flags > 1 {
            return Err(Error::format(WHAT, format!("unknown flags {flags:#04x}")));
        }
        let n_blocks = r.u32()? as usize;
        if n_blocks > 16 {
            return Err(Error::format(WHAT, "too many blocks"));
        }
        let mut specs = Vec::with_capacity(n_blocks);
        for _ in 0..n_blocks {
            let name_len = r.u16()? as usize;
            let name = std::str::from_utf8(r.take(name_len)?)
                .map_err(|_| Error::format(WHAT, "block name is not UTF-8"))?
                .to_string();
            let n_layers = r.u32()? as usize;
            // every layer takes at least one byte
            if n_layers > r.remaining() {
                return Err(Error::format(WHAT, "truncated layer list"));
            }
            let mut layers = Vec::with_capacity(n_layers);
            for _ in 0..n_layers {
                layers.push(match r.u8()? {
                    0 => LayerKind::FullyConnected {
                        in_dim: r.u32()? as usize,
                        out_dim: r.u32()? as usize,
                    },
                    1 => LayerKind::Elu,
                    other => return Err(Error::format(WHAT, format!("unknown layer tag {other}"))),
                });
            }
            specs.push((name, MlpSpec::new(layers)?));
        }
        let mut blocks = Vec::with_capacity(n_blocks);
        for (name, spec) in specs {
            let mut dense = Vec::new();
            for (in_dim, out_dim) in spec.dense_shapes() {
                let count = in_dim
                    .checked_mul(out_dim)
                    .and_then(|w| w.checked_add(out_dim))
                    .filter(|n| n.checked_mul(8).is_some_and(|b| b <= r.remaining()))
                    .ok_or_else(|| Error::format(WHAT, "truncated parameters"))?;
                let mut values = Vec::with_capacity(count);
                for _ in 0..count {
                    values.push(r.f64()?);
                }
                let bias = values.split_off(in_dim * out_dim);
                dense.push(DenseParams {
                    in_dim,
                    out_dim,
                    weight: values,
                    bias,
                });
            }
            blocks.push((name, Mlp::new(spec, MlpParams { dense })?));
        }
        if r.remaining() != 0 {
            return Err(Error::format(WHAT, "trailing bytes"));
        }

        let names: Vec<String> = blocks.iter().map(|(n, _)| n.clone()).collect();
        let expect = |want: &[&str]| -> Result<()> {
            if names.iter().map(String::as_str).eq(want.iter().copied()) {
                Ok(())
            } else {
                Err(Error::format(
                    WHAT,
                    format!("expected blocks {want:?}, found {names:?}"),
                ))
            }
        };
        let mut mlps = blocks.into_iter().map(|(_, m)| m);
        let mut next = || mlps.next().expect("block count checked");
        match tag {
            1 | 2 => {
                expect(&["u1", "u2", "pj", "sf"])?;
                let (u1, u2, pj, sf) = (next(), next(), next(), next());
                Ok(Checkpoint::Msfm(MsfmModel::from_parts(
                    dims,
                    tag == 1,
                    u1,
                    u2,
                    pj,
                    sf,
                )?))
            }
            3 => {
                expect(&["f", "g"])?;
                let (f, g) = (next(), next());
                let mut model = IepModel::from_parts(dims, margin, f, g)?;
                model.length_norm = flags & 1 == 1;
                Ok(Checkpoint::Iep(model))
            }
            4 => {
                expect(&["mlp"])?;
                Ok(Checkpoint::Baseline2(Baseline2Model::from_parts(
                    dims,
                    next(),
                )?))
            }
            other => Err(Error::format(WHAT, format!("unknown model tag {other}"))),
        }
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_bytes())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_bytes(&std::fs::read(path)?)
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn remaining(&self) -> usize {
        self.bytes.len() - self.pos
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if n > self.remaining() {
            return Err(Error::format(WHAT, "unexpected end of data"));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn small() -> EmbeddingDims {
        EmbeddingDims { asv: 6, cm: 4 }
    }

    fn all_kinds() -> Vec<Checkpoint> {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut raw_iep = IepModel::init(small(), 0.5, &mut rng);
        raw_iep.length_norm = false;
        vec![
            Checkpoint::Msfm(MsfmModel::init(small(), true, &mut rng)),
            Checkpoint::Msfm(MsfmModel::init(small(), false, &mut rng)),
            Checkpoint::Iep(IepModel::init(small(), 0.3, &mut rng)),
            Checkpoint::Iep(raw_iep),
            Checkpoint::Baseline2(Baseline2Model::init(small(), &mut rng)),
        ]
    }

    #[test]
    fn round_trip_is_exact() {
        for ck in all_kinds() {
            let bytes = ck.to_bytes();
            let back = Checkpoint::from_bytes(&bytes).unwrap();
            assert_eq!(back, ck);
            assert_eq!(back.to_bytes(), bytes);
        }
    }

    #[test]
    fn kinds() {
        let kinds: Vec<_> = all_kinds().iter().map(Checkpoint::kind).collect();
        assert_eq!(
            kinds,
            [
                ModelKind::Msfm,
                ModelKind::MsfmNoSssv,
                ModelKind::Iep,
                ModelKind::Iep,
                ModelKind::Baseline2
            ]
        );
    }

    #[test]
    fn rejects_damage() {
        let bytes = all_kinds()[2].to_bytes();
        let mut bad_flags = bytes.clone();
        bad_flags[8 + 1 + 8 + 8] = 7;
        assert!(Checkpoint::from_bytes(&bad_flags).is_err());
        for cut in [0, 5, 9, 30, bytes.len() - 1] {
            assert!(Checkpoint::from_bytes(&bytes[..cut]).is_err(), "cut {cut}");
        }
        let mut extra = bytes.clone();
        extra.push(0);
        assert!(Checkpoint::from_bytes(&extra).is_err());
        let mut bad_tag = bytes.clone();
        bad_tag[8] = 9;
        assert!(Checkpoint::from_bytes(&bad_tag).is_err());
        let mut wrong_kind = bytes;
        wrong_kind[8] = 4;
        assert!(Checkpoint::from_bytes(&wrong_kind).is_err());
    }
}
