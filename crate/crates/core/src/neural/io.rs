//! Weight files.
//!
//! Network (`SKNN0001`), little-endian:
//!
//! ```text
//! magic[8] | u32 n_sizes | u32 sizes[n_sizes] | u32 hidden activation tag | f64 slope
//! | per layer: f64 W (out x in, row-major), f64 b (out)
//! ```
//!
//! VAE (`SKVAE001`): `magic[8] | u32 latent_dim | f64 beta_kl | u64 encoder bytes |
//! encoder network | decoder network`.

use std::path::Path;

use crate::error::{Error, Result};
use crate::scalar::Real;

use super::{Activation, Mlp, Vae};

pub const MLP_MAGIC: &[u8; 8] = b"SKNN0001";
pub const VAE_MAGIC: &[u8; 8] = b"SKVAE001";

pub fn encode_mlp<T: Real>(mlp: &Mlp<T>) -> Vec<u8> {
    let mut out = Vec::with_capacity(32 + mlp.n_params() * 8);
    out.extend_from_slice(MLP_MAGIC);
    out.extend_from_slice(&(mlp.sizes().len() as u32).to_le_bytes());
    for &s in mlp.sizes() {
        out.extend_from_slice(&(s as u32).to_le_bytes());
    }
    out.extend_from_slice(&mlp.hidden_activation().tag().to_le_bytes());
    out.extend_from_slice(&mlp.slope().as_f64().to_le_bytes());
    for p in mlp.params() {
        out.extend_from_slice(&p.as_f64().to_le_bytes());
    }
    out
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        if self.pos + n > self.bytes.len() {
            return Err(Error::format(self.pos, format!("truncated while reading {what}")));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }

    fn u64(&mut self, what: &str) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8, what)?.try_into().unwrap()))
    }

    fn f64(&mut self, what: &str) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8, what)?.try_into().unwrap()))
    }
}

fn read_mlp<T: Real>(c: &mut Cursor<'_>) -> Result<Mlp<T>> {
    let start = c.pos;
    if c.take(8, "magic")? != MLP_MAGIC {
        return Err(Error::format(start, "bad network magic"));
    }
    let n_sizes = c.u32("layer count")? as usize;
    if !(2..=64).contains(&n_sizes) {
        return Err(Error::format(c.pos - 4, format!("implausible layer count {n_sizes}")));
    }
    let sizes = (0..n_sizes)
        .map(|_| c.u32("layer size").map(|v| v as usize))
        .collect::<Result<Vec<_>>>()?;
    let tag_pos = c.pos;
    let act = Activation::from_tag(c.u32("activation")?)
        .ok_or_else(|| Error::format(tag_pos, "unknown activation tag"))?;
    let slope = c.f64("slope")?;
    let mut mlp = Mlp::zeros(&sizes, act, T::lit(slope))
        .map_err(|e| Error::format(start, e.to_string()))?;
    let need = mlp.n_params() * 8;
    if c.bytes.len() - c.pos < need {
        return Err(Error::format(
            c.bytes.len(),
            format!("payload holds {} bytes, sizes imply {need}", c.bytes.len() - c.pos),
        ));
    }
    for p in mlp.params_mut() {
        *p = T::lit(c.f64("weights")?);
    }
    Ok(mlp)
}

/// Decodes one network; trailing bytes are an error.
pub fn decode_mlp<T: Real>(bytes: &[u8]) -> Result<Mlp<T>> {
    let mut c = Cursor { bytes, pos: 0 };
    let mlp = read_mlp(&mut c)?;
    if c.pos != bytes.len() {
        return Err(Error::format(c.pos, "trailing bytes after network payload"));
    }
    Ok(mlp)
}

pub fn save_mlp<T: Real>(mlp: &Mlp<T>, path: &Path) -> Result<()> {
    std::fs::write(path, encode_mlp(mlp))?;
    Ok(())
}

pub fn load_mlp<T: Real>(path: &Path) -> Result<Mlp<T>> {
    decode_mlp(&std::fs::read(path)?)
}

pub fn encode_vae<T: Real>(vae: &Vae<T>) -> Vec<u8> {
    let enc = encode_mlp(&vae.encoder);
    let mut out = Vec::new();
    out.extend_from_slice(VAE_MAGIC);
    out.extend_from_slice(&(vae.latent_dim as u32).to_le_bytes());
    out.extend_from_slice(&vae.beta_kl.as_f64().to_le_bytes());
    out.extend_from_slice(&(enc.len() as u64).to_le_bytes());
    out.extend_from_slice(&enc);
    out.extend_from_slice(&encode_mlp(&vae.decoder));
    out
}

pub fn decode_vae<T: Real>(bytes: &[u8]) -> Result<Vae<T>> {
    let mut c = Cursor { bytes, pos: 0 };
    if c.take(8, "magic")? != VAE_MAGIC {
        return Err(Error::format(0, "bad VAE magic"));
    }
    let latent = c.u32("latent dim")? as usize;
    let beta = c.f64("beta_kl")?;
    let enc_len = c.u64("encoder length")? as usize;
    let enc_start = c.pos;
    let encoder = read_mlp(&mut c)?;
    if c.pos - enc_start != enc_len {
        return Err(Error::format(enc_start, "encoder length does not match header"));
    }
    let decoder = read_mlp(&mut c)?;
    if c.pos != bytes.len() {
        return Err(Error::format(c.pos, "trailing bytes after VAE payload"));
    }
    let vae = Vae::new(encoder, decoder, T::lit(beta)).map_err(|e| Error::format(0, e.to_string()))?;
    if vae.latent_dim != latent {
        return Err(Error::format(8, "latent dimension does not match decoder"));
    }
    Ok(vae)
}

pub fn save_vae<T: Real>(vae: &Vae<T>, path: &Path) -> Result<()> {
    std::fs::write(path, encode_vae(vae))?;
    Ok(())
}

pub fn load_vae<T: Real>(path: &Path) -> Result<Vae<T>> {
    decode_vae(&std::fs::read(path)?)
}
