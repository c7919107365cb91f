//! Dense row-major tensors and their on-disk formats.
//!
//! Binary layout, all little-endian: magic `TNSR`, dtype `u32` (0 = i64,
//! 1 = f64), rank `u32`, `rank` extents as `u64`, then the elements.

use std::fmt::Debug;
use std::io::{Read, Write};
use std::ops::{Add, Mul};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const MAGIC: &[u8; 4] = b"TNSR";

pub trait Element:
    Copy
    + Debug
    + Default
    + PartialEq
    + Send
    + Sync
    + Serialize
    + serde::de::DeserializeOwned
    + Add<Output = Self>
    + Mul<Output = Self>
    + 'static
{
    const DTYPE: u32;
    fn to_le(self) -> [u8; 8];
    fn from_le(bytes: [u8; 8]) -> Self;
    fn parse(text: &str) -> Option<Self>;
    /// Uniform small value, so integer sums never overflow.
    fn random<R: Rng>(rng: &mut R) -> Self;
}

impl Element for i64 {
    const DTYPE: u32 = 0;
    fn to_le(self) -> [u8; 8] {
        self.to_le_bytes()
    }
    fn from_le(bytes: [u8; 8]) -> Self {
        i64::from_le_bytes(bytes)
    }
    fn parse(text: &str) -> Option<Self> {
        text.parse().ok()
    }
    fn random<R: Rng>(rng: &mut R) -> Self {
        rng.gen_range(-8..=8)
    }
}

impl Element for f64 {
    const DTYPE: u32 = 1;
    fn to_le(self) -> [u8; 8] {
        self.to_le_bytes()
    }
    fn from_le(bytes: [u8; 8]) -> Self {
        f64::from_le_bytes(bytes)
    }
    fn parse(text: &str) -> Option<Self> {
        text.parse().ok()
    }
    fn random<R: Rng>(rng: &mut R) -> Self {
        rng.gen_range(-1.0..1.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tensor<T> {
    pub extents: Vec<usize>,
    pub data: Vec<T>,
}

impl<T: Element> Tensor<T> {
    pub fn zeros(extents: &[usize]) -> Self {
        Tensor {
            extents: extents.to_vec(),
            data: vec![T::default(); extents.iter().product()],
        }
    }

    pub fn from_vec(extents: &[usize], data: Vec<T>) -> Result<Self> {
        let n: usize = extents.iter().product();
        if n != data.len() {
            return Err(Error::Format(format!(
                "{} elements for extents {:?}",
                data.len(),
                extents
            )));
        }
        Ok(Tensor {
            extents: extents.to_vec(),
            data,
        })
    }

    pub fn random<R: Rng>(extents: &[usize], rng: &mut R) -> Self {
        let n: usize = extents.iter().product();
        Tensor {
            extents: extents.to_vec(),
            data: (0..n).map(|_| T::random(rng)).collect(),
        }
    }

    pub fn rank(&self) -> usize {
        self.extents.len()
    }

    /// Flat offset of a signed index, `None` when out of range.
    pub fn offset(&self, index: &[i64]) -> Option<usize> {
        if index.len() != self.extents.len() {
            return None;
        }
        let mut off = 0usize;
        for (&i, &e) in index.iter().zip(&self.extents) {
            if i < 0 || i as usize >= e {
                return None;
            }
            off = off * e + i as usize;
        }
        Some(off)
    }

    pub fn get(&self, index: &[i64]) -> Option<T> {
        self.offset(index).map(|o| self.data[o])
    }

    pub fn write_binary<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(MAGIC)?;
        w.write_all(&T::DTYPE.to_le_bytes())?;
        w.write_all(&(self.extents.len() as u32).to_le_bytes())?;
        for &e in &self.extents {
            w.write_all(&(e as u64).to_le_bytes())?;
        }
        for &v in &self.data {
            w.write_all(&v.to_le())?;
        }
        Ok(())
    }

    pub fn read_binary<R: Read>(mut r: R) -> Result<Self> {
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if &magic != MAGIC {
            return Err(Error::Format("bad tensor magic".into()));
        }
        let mut word = [0u8; 4];
        r.read_exact(&mut word)?;
        let dtype = u32::from_le_bytes(word);
        if dtype != T::DTYPE {
            return Err(Error::Format(format!(
                "tensor dtype {dtype}, expected {}",
                T::DTYPE
            )));
        }
        r.read_exact(&mut word)?;
        let rank = u32::from_le_bytes(word) as usize;
        let mut long = [0u8; 8];
        let mut extents = Vec::with_capacity(rank);
        for _ in 0..rank {
            r.read_exact(&mut long)?;
            extents.push(u64::from_le_bytes(long) as usize);
        }
        let n: usize = extents.iter().product();
        let mut data = Vec::with_capacity(n);
        for _ in 0..n {
            r.read_exact(&mut long)?;
            data.push(T::from_le(long));
        }
        Ok(Tensor { extents, data })
    }

    /// First line: extents. Remaining lines: row-major values, separated by
    /// commas or whitespace.
    pub fn read_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let head = lines
            .next()
            .ok_or_else(|| Error::Format("empty tensor CSV".into()))?;
        let fields = |l: &str| -> Vec<String> {
            l.split(|c: char| c == ',' || c.is_whitespace())
                .filter(|s| !s.is_empty())
                .map(str::to_string)
                .collect()
        };
        let extents = fields(head)
            .iter()
            .map(|s| s.parse::<usize>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| Error::Format(format!("bad extent: {e}")))?;
        let mut data = Vec::new();
        for l in lines {
            for f in fields(l) {
                data.push(T::parse(&f).ok_or_else(|| Error::Format(format!("bad value `{f}`")))?);
            }
        }
        Tensor::from_vec(&extents, data)
    }

    pub fn to_csv(&self) -> String {
        let head: Vec<String> = self.extents.iter().map(|e| e.to_string()).collect();
        let mut out = head.join(",");
        out.push('\n');
        let row = self.extents.last().copied().unwrap_or(1).max(1);
        for chunk in self.data.chunks(row) {
            let vals: Vec<String> = chunk.iter().map(|v| format!("{v:?}")).collect();
            out.push_str(&vals.join(","));
            out.push('\n');
        }
        out
    }
}

/// Reads a tensor by extension: `.csv` as text, anything else as binary.
pub fn load<T: Element>(path: &std::path::Path) -> Result<Tensor<T>> {
    if path.extension().is_some_and(|e| e == "csv") {
        Tensor::read_csv(&std::fs::read_to_string(path)?)
    } else {
        Tensor::read_binary(std::io::BufReader::new(std::fs::File::open(path)?))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn binary_round_trip() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let t: Tensor<i64> = Tensor::random(&[2, 3, 4], &mut rng);
        let mut buf = Vec::new();
        t.write_binary(&mut buf).unwrap();
        assert_eq!(&buf[..4], b"TNSR");
        assert_eq!(buf.len(), 4 + 4 + 4 + 3 * 8 + 24 * 8);
        assert_eq!(Tensor::<i64>::read_binary(&buf[..]).unwrap(), t);
        assert!(Tensor::<f64>::read_binary(&buf[..]).is_err());
    }

    #[test]
    fn csv_round_trip() {
        let t = Tensor::<i64>::read_csv("2,2\n1,2\n3 4\n").unwrap();
        assert_eq!(t.data, vec![1, 2, 3, 4]);
        assert_eq!(Tensor::<i64>::read_csv(&t.to_csv()).unwrap(), t);
        assert!(Tensor::<i64>::read_csv("2,2\n1,2,3\n").is_err());
    }

    #[test]
    fn offsets() {
        let t = Tensor::<i64>::zeros(&[2, 3]);
        assert_eq!(t.offset(&[1, 2]), Some(5));
        assert_eq!(t.offset(&[2, 0]), None);
        assert_eq!(t.offset(&[-1, 0]), None);
    }
}
