//! Named parameter storage and the binary checkpoint format.
//!
//! Checkpoint layout (little endian): magic `UNSG`, version `u32`, tensor
//! count `u32`, then per tensor: name length `u32`, UTF-8 name, rank `u32`,
//! dims as `u32`, values as `f64`.

use std::path::Path;

use ndarray::Array2;
use rand::Rng;
use rand_distr::{Distribution, Uniform};

use crate::NnError;

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"UNSG";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Params {
    names: Vec<String>,
    values: Vec<Array2<f64>>,
}

impl Params {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, name: &str, value: Array2<f64>) -> usize {
        self.names.push(name.to_string());
        self.values.push(value);
        self.values.len() - 1
    }

    /// Glorot-uniform initialised `rows×cols` weight.
    pub fn glorot<R: Rng>(&mut self, name: &str, rows: usize, cols: usize, rng: &mut R) -> usize {
        let limit = (6.0 / (rows + cols).max(1) as f64).sqrt();
        let dist = Uniform::new_inclusive(-limit, limit);
        let w = Array2::from_shape_fn((rows, cols), |_| dist.sample(rng));
        self.add(name, w)
    }

    pub fn zeros(&mut self, name: &str, rows: usize, cols: usize) -> usize {
        self.add(name, Array2::zeros((rows, cols)))
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn name(&self, i: usize) -> &str {
        &self.names[i]
    }

    pub fn value(&self, i: usize) -> &Array2<f64> {
        &self.values[i]
    }

    pub fn value_mut(&mut self, i: usize) -> &mut Array2<f64> {
        &mut self.values[i]
    }

    pub fn find(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    pub fn num_scalars(&self) -> usize {
        self.values.iter().map(|v| v.len()).sum()
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(CHECKPOINT_MAGIC);
        out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
        out.extend_from_slice(&(self.len() as u32).to_le_bytes());
        for (name, v) in self.names.iter().zip(&self.values) {
            out.extend_from_slice(&(name.len() as u32).to_le_bytes());
            out.extend_from_slice(name.as_bytes());
            out.extend_from_slice(&2u32.to_le_bytes());
            out.extend_from_slice(&(v.nrows() as u32).to_le_bytes());
            out.extend_from_slice(&(v.ncols() as u32).to_le_bytes());
            for x in v.iter() {
                out.extend_from_slice(&x.to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, NnError> {
        let mut r = Reader { bytes, at: 0 };
        if r.take(4)? != CHECKPOINT_MAGIC {
            return Err(NnError::Checkpoint("bad magic".into()));
        }
        let version = r.u32()?;
        if version != CHECKPOINT_VERSION {
            return Err(NnError::Checkpoint(format!("unsupported version {version}")));
        }
        let count = r.u32()?;
        let mut params = Params::new();
        for _ in 0..count {
            let len = r.u32()? as usize;
            let name = std::str::from_utf8(r.take(len)?)
                .map_err(|_| NnError::Checkpoint("tensor name is not UTF-8".into()))?
                .to_string();
            let rank = r.u32()?;
            if rank != 2 {
                return Err(NnError::Checkpoint(format!("tensor {name}: rank {rank}, expected 2")));
            }
            let rows = r.u32()? as usize;
            let cols = r.u32()? as usize;
            let mut data = Vec::with_capacity(rows * cols);
            for _ in 0..rows * cols {
                data.push(f64::from_le_bytes(r.take(8)?.try_into().expect("8 bytes")));
            }
            let v = Array2::from_shape_vec((rows, cols), data).expect("sized above");
            params.add(&name, v);
        }
        if r.at != bytes.len() {
            return Err(NnError::Checkpoint(format!("{} trailing bytes", bytes.len() - r.at)));
        }
        Ok(params)
    }

    pub fn save(&self, path: &Path) -> Result<(), NnError> {
        std::fs::write(path, self.to_bytes())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, NnError> {
        Self::from_bytes(&std::fs::read(path)?)
    }

    /// Overwrite values from `other`, which must have the same names and
    /// shapes in the same order.
    pub fn load_from(&mut self, other: &Params) -> Result<(), NnError> {
        if other.names != self.names {
            return Err(NnError::Checkpoint(format!(
                "parameter names differ: expected {:?}, got {:?}",
                self.names, other.names
            )));
        }
        for (i, (a, b)) in self.values.iter().zip(&other.values).enumerate() {
            if a.dim() != b.dim() {
                return Err(NnError::Checkpoint(format!(
                    "{}: shape {:?}, expected {:?}",
                    self.names[i],
                    b.dim(),
                    a.dim()
                )));
            }
        }
        self.values.clone_from(&other.values);
        Ok(())
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    at: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], NnError> {
        if self.at + n > self.bytes.len() {
            return Err(NnError::Checkpoint("truncated".into()));
        }
        let s = &self.bytes[self.at..self.at + n];
        self.at += n;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32, NnError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn checkpoint_round_trip_is_bitwise() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut p = Params::new();
        p.glorot("w", 3, 5, &mut rng);
        p.zeros("b", 1, 5);
        p.add("odd", ndarray::array![[f64::MIN_POSITIVE, -0.0, 1e300]]);
        let q = Params::from_bytes(&p.to_bytes()).unwrap();
        assert_eq!(p.to_bytes(), q.to_bytes());
        assert_eq!(q.name(2), "odd");
    }

    #[test]
    fn header_layout() {
        let mut p = Params::new();
        p.zeros("ab", 1, 1);
        let b = p.to_bytes();
        assert_eq!(&b[0..4], b"UNSG");
        assert_eq!(u32::from_le_bytes(b[4..8].try_into().unwrap()), 1);
        assert_eq!(u32::from_le_bytes(b[8..12].try_into().unwrap()), 1);
        assert_eq!(b.len(), 12 + 4 + 2 + 4 + 8 + 8);
    }

    #[test]
    fn corrupt_checkpoints_are_rejected() {
        let mut p = Params::new();
        p.zeros("w", 2, 2);
        let b = p.to_bytes();
        assert!(Params::from_bytes(&b[..b.len() - 1]).is_err());
        let mut bad = b.clone();
        bad[0] = b'X';
        assert!(Params::from_bytes(&bad).is_err());
        let mut extra = b.clone();
        extra.push(0);
        assert!(Params::from_bytes(&extra).is_err());
    }

    #[test]
    fn load_from_checks_shapes() {
        let mut a = Params::new();
        a.zeros("w", 2, 2);
        let mut b = Params::new();
        b.zeros("w", 2, 3);
        assert!(a.load_from(&b).is_err());
    }
}
