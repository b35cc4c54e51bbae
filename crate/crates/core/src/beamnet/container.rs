//! Binary parameter container.
//!
//! Layout (little-endian): magic `BSNET\0\0\0`, `u32` version, `u32` length and
//! JSON network config, `u32` tensor count, then per tensor: `u16` name length,
//! UTF-8 name, `u8` rank, `u32` dims, f32 payload, `u32` CRC-32 of the payload.

use std::io::{Read, Write};

use super::{BeamNet, BeamNetConfig};
use crate::error::{Error, Result};
use crate::nn::Tensor;

const MAGIC: &[u8; 8] = b"BSNET\0\0\0";
const VERSION: u32 = 1;

fn write_tensor<W: Write>(w: &mut W, t: &Tensor<f32>) -> Result<()> {
    let name = t.name.as_bytes();
    w.write_all(&(name.len() as u16).to_le_bytes())?;
    w.write_all(name)?;
    w.write_all(&[t.shape.len() as u8])?;
    for &d in &t.shape {
        w.write_all(&(d as u32).to_le_bytes())?;
    }
    let payload: Vec<u8> = t.data.iter().flat_map(|v| v.to_le_bytes()).collect();
    w.write_all(&payload)?;
    w.write_all(&crc32fast::hash(&payload).to_le_bytes())?;
    Ok(())
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_tensor<R: Read>(r: &mut R) -> Result<Tensor<f32>> {
    let mut b2 = [0u8; 2];
    r.read_exact(&mut b2)?;
    let mut name = vec![0u8; u16::from_le_bytes(b2) as usize];
    r.read_exact(&mut name)?;
    let name = String::from_utf8(name).map_err(|_| Error::Format("tensor name is not UTF-8".into()))?;
    let mut rank = [0u8; 1];
    r.read_exact(&mut rank)?;
    let shape = (0..rank[0])
        .map(|_| read_u32(r).map(|d| d as usize))
        .collect::<Result<Vec<_>>>()?;
    let count: usize = shape.iter().product();
    let mut payload = vec![0u8; 4 * count];
    r.read_exact(&mut payload)?;
    if read_u32(r)? != crc32fast::hash(&payload) {
        return Err(Error::Format(format!("checksum mismatch in tensor {name}")));
    }
    let data = payload
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
        .collect();
    Ok(Tensor { name, shape, data })
}

/// Write a container: `magic`, version, JSON `config`, then `tensors`.
pub fn write_container<W: Write>(mut w: W, magic: &[u8; 8], config: &[u8], tensors: &[&Tensor<f32>]) -> Result<()> {
    w.write_all(magic)?;
    w.write_all(&VERSION.to_le_bytes())?;
    w.write_all(&(config.len() as u32).to_le_bytes())?;
    w.write_all(config)?;
    w.write_all(&(tensors.len() as u32).to_le_bytes())?;
    for t in tensors {
        write_tensor(&mut w, t)?;
    }
    Ok(())
}

/// Read a container written with `magic`; returns the config bytes and tensors.
pub fn read_container<R: Read>(mut r: R, magic: &[u8; 8]) -> Result<(Vec<u8>, Vec<Tensor<f32>>)> {
    let mut m = [0u8; 8];
    r.read_exact(&mut m)?;
    if &m != magic {
        return Err(Error::Format("not a parameter container of the expected kind".into()));
    }
    let version = read_u32(&mut r)?;
    if version != VERSION {
        return Err(Error::Format(format!("unsupported container version {version}")));
    }
    let mut cfg = vec![0u8; read_u32(&mut r)? as usize];
    r.read_exact(&mut cfg)?;
    let count = read_u32(&mut r)? as usize;
    let tensors = (0..count).map(|_| read_tensor(&mut r)).collect::<Result<Vec<_>>>()?;
    Ok((cfg, tensors))
}

/// Copy loaded tensors into `slots`, checking names and shapes.
pub fn fill_slots<'a>(slots: impl Iterator<Item = &'a mut Tensor<f32>>, loaded: Vec<Tensor<f32>>) -> Result<()> {
    let slots: Vec<_> = slots.collect();
    if slots.len() != loaded.len() {
        return Err(Error::Format("tensor count does not match the config".into()));
    }
    for (slot, t) in slots.into_iter().zip(loaded) {
        if t.name != slot.name || t.shape != slot.shape {
            return Err(Error::Format(format!("unexpected tensor {} {:?}", t.name, t.shape)));
        }
        *slot = t;
    }
    Ok(())
}

pub fn save_params<W: Write>(net: &BeamNet<f32>, w: W) -> Result<()> {
    let all: Vec<&Tensor<f32>> = net.params.iter().chain(&net.running).collect();
    write_container(w, MAGIC, &serde_json::to_vec(&net.cfg)?, &all)
}

pub fn load_params<R: Read>(r: R) -> Result<BeamNet<f32>> {
    let (cfg, tensors) = read_container(r, MAGIC)?;
    let cfg: BeamNetConfig = serde_json::from_slice(&cfg)?;
    let mut net = BeamNet::<f32>::new(cfg, 0)?;
    fill_slots(net.params.iter_mut().chain(net.running.iter_mut()), tensors)?;
    Ok(net)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_and_corruption() {
        let net = BeamNet::<f32>::new(BeamNetConfig::default(), 9).unwrap();
        let mut buf = Vec::new();
        save_params(&net, &mut buf).unwrap();
        assert_eq!(load_params(&buf[..]).unwrap(), net);
        let mut bad = buf.clone();
        let n = bad.len();
        bad[n - 10] ^= 0x40;
        assert!(matches!(load_params(&bad[..]), Err(Error::Format(_))));
        assert!(load_params(&b"nonsense"[..]).is_err());
    }
}
