//! Flat binary formats for datasets and networks.
//!
//! Dataset (`MLDS`, version 1, little-endian): magic, version, kind,
//! d, n, sigma, h, m, the ground-truth directions, row-major X, y, signal
//! codes, cluster index lists (XOR), then row-major Xi so that reloaded
//! datasets reproduce constructions bit-for-bit.
//!
//! Network (`MLNT`, version 1): magic, version, m, d, h, the second layer
//! as i8, row-major W.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use ndarray::{Array1, Array2};

use crate::error::{Error, Result};
use crate::synthdata::{Dataset, LinearSpec, XorSpec};
use crate::xor_net::TwoLayerNet;

const DATASET_MAGIC: &[u8; 4] = b"MLDS";
const NET_MAGIC: &[u8; 4] = b"MLNT";
const VERSION: u32 = 1;

/// The generating specification stored alongside a dataset.
#[derive(Debug, Clone, PartialEq)]
pub enum ProblemSpec {
    Linear(LinearSpec),
    Xor(XorSpec),
}

fn write_u64(w: &mut impl Write, v: u64) -> Result<()> {
    w.write_all(&v.to_le_bytes())?;
    Ok(())
}

fn write_f64(w: &mut impl Write, v: f64) -> Result<()> {
    w.write_all(&v.to_le_bytes())?;
    Ok(())
}

fn write_f64_slice(w: &mut impl Write, vs: impl IntoIterator<Item = f64>) -> Result<()> {
    for v in vs {
        write_f64(w, v)?;
    }
    Ok(())
}

fn read_exact<const N: usize>(r: &mut impl Read) -> Result<[u8; N]> {
    let mut buf = [0u8; N];
    r.read_exact(&mut buf)?;
    Ok(buf)
}

fn read_u64(r: &mut impl Read) -> Result<u64> {
    Ok(u64::from_le_bytes(read_exact::<8>(r)?))
}

fn read_f64(r: &mut impl Read) -> Result<f64> {
    Ok(f64::from_le_bytes(read_exact::<8>(r)?))
}

fn read_f64_vec(r: &mut impl Read, len: usize) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(len);
    for _ in 0..len {
        out.push(read_f64(r)?);
    }
    Ok(out)
}

pub fn write_dataset(path: &Path, ds: &Dataset, spec: &ProblemSpec) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(DATASET_MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    let (kind, sigma, h, m): (u8, f64, f64, u64) = match spec {
        ProblemSpec::Linear(s) => (0, s.sigma, f64::NAN, 0),
        ProblemSpec::Xor(s) => (1, s.sigma, s.h, s.m as u64),
    };
    w.write_all(&[kind])?;
    write_u64(&mut w, ds.d() as u64)?;
    write_u64(&mut w, ds.n() as u64)?;
    write_f64(&mut w, sigma)?;
    write_f64(&mut w, h)?;
    write_u64(&mut w, m)?;
    match spec {
        ProblemSpec::Linear(s) => write_f64_slice(&mut w, s.mu.iter().cloned())?,
        ProblemSpec::Xor(s) => {
            write_f64_slice(&mut w, s.mu1.iter().cloned())?;
            write_f64_slice(&mut w, s.mu2.iter().cloned())?;
        }
    }
    write_f64_slice(&mut w, ds.x.iter().cloned())?; // row-major d x n
    write_f64_slice(&mut w, ds.y.iter().cloned())?;
    w.write_all(&ds.signal_codes())?;
    if let Some(c) = &ds.clusters {
        for set in [&c.mu1, &c.minus_mu1, &c.mu2, &c.minus_mu2] {
            write_u64(&mut w, set.len() as u64)?;
            for &j in set.iter() {
                write_u64(&mut w, j as u64)?;
            }
        }
    }
    write_f64_slice(&mut w, ds.xi.iter().cloned())?;
    w.flush()?;
    Ok(())
}

pub fn read_dataset(path: &Path) -> Result<(Dataset, ProblemSpec)> {
    let mut r = BufReader::new(File::open(path)?);
    if &read_exact::<4>(&mut r)? != DATASET_MAGIC {
        return Err(Error::invalid("not a dataset file"));
    }
    if u32::from_le_bytes(read_exact::<4>(&mut r)?) != VERSION {
        return Err(Error::invalid("unsupported dataset version"));
    }
    let kind = read_exact::<1>(&mut r)?[0];
    let d = read_u64(&mut r)? as usize;
    let n = read_u64(&mut r)? as usize;
    let sigma = read_f64(&mut r)?;
    let h = read_f64(&mut r)?;
    let m = read_u64(&mut r)? as usize;
    let spec = match kind {
        0 => {
            let mu = Array1::from(read_f64_vec(&mut r, d)?);
            ProblemSpec::Linear(LinearSpec::new(mu, sigma, n)?)
        }
        1 => {
            let mu1 = Array1::from(read_f64_vec(&mut r, d)?);
            let mu2 = Array1::from(read_f64_vec(&mut r, d)?);
            ProblemSpec::Xor(XorSpec::new(mu1, mu2, sigma, n, h, m)?)
        }
        _ => return Err(Error::invalid("bad dataset kind")),
    };
    let x = Array2::from_shape_vec((d, n), read_f64_vec(&mut r, d * n)?)
        .map_err(|e| Error::invalid(e.to_string()))?;
    let y = Array1::from(read_f64_vec(&mut r, n)?);
    let mut codes = vec![0u8; n];
    r.read_exact(&mut codes)?;
    if kind == 1 {
        // Cluster lists are recomputed from the signal codes; read & discard.
        for _ in 0..4 {
            let len = read_u64(&mut r)? as usize;
            for _ in 0..len {
                read_u64(&mut r)?;
            }
        }
    }
    let xi = Array2::from_shape_vec((d, n), read_f64_vec(&mut r, d * n)?)
        .map_err(|e| Error::invalid(e.to_string()))?;
    let ds = Dataset::from_parts(x, y, &codes, xi, kind == 1)?;
    Ok((ds, spec))
}

pub fn write_net(path: &Path, net: &TwoLayerNet) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(NET_MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    write_u64(&mut w, net.m() as u64)?;
    write_u64(&mut w, net.d() as u64)?;
    write_f64(&mut w, net.h)?;
    for i in 0..net.m() {
        w.write_all(&[net.second_layer(i) as i8 as u8])?;
    }
    write_f64_slice(&mut w, net.w.iter().cloned())?;
    w.flush()?;
    Ok(())
}

pub fn read_net(path: &Path) -> Result<TwoLayerNet> {
    let mut r = BufReader::new(File::open(path)?);
    if &read_exact::<4>(&mut r)? != NET_MAGIC {
        return Err(Error::invalid("not a network file"));
    }
    if u32::from_le_bytes(read_exact::<4>(&mut r)?) != VERSION {
        return Err(Error::invalid("unsupported network version"));
    }
    let m = read_u64(&mut r)? as usize;
    let d = read_u64(&mut r)? as usize;
    let h = read_f64(&mut r)?;
    let mut a = vec![0u8; m];
    r.read_exact(&mut a)?;
    for (i, &ai) in a.iter().enumerate() {
        let expect = if i < m / 2 { 1i8 } else { -1i8 };
        if ai as i8 != expect {
            return Err(Error::invalid("second layer is not the block pattern"));
        }
    }
    let w = Array2::from_shape_vec((m, d), read_f64_vec(&mut r, m * d)?)
        .map_err(|e| Error::invalid(e.to_string()))?;
    TwoLayerNet::new(w, h)
}
