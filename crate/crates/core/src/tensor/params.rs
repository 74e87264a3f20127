//! Named parameter collections and their binary checkpoint blob.
//!
//! ```text
//! magic "RGPARAMS" | version u32 | count u32
//! count x (name_len u16, utf8 name, rows u32, cols u32, rows*cols x f64 LE)
//! ```

use crate::codec::{Reader, Writer};
use crate::error::{Error, Result};

use super::matrix::Matrix;

pub const PARAMS_MAGIC: [u8; 8] = *b"RGPARAMS";
pub const PARAMS_VERSION: u32 = 1;

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ParamSet {
    names: Vec<String>,
    values: Vec<Matrix>,
}

impl ParamSet {
    pub fn new() -> Self {
        ParamSet::default()
    }

    /// Registers a tensor and returns its slot.
    pub fn add(&mut self, name: impl Into<String>, value: Matrix) -> usize {
        let name = name.into();
        assert!(self.index_of(&name).is_none(), "duplicate parameter {name}");
        self.names.push(name);
        self.values.push(value);
        self.values.len() - 1
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    pub fn get(&self, name: &str) -> Option<&Matrix> {
        self.index_of(name).map(|i| &self.values[i])
    }

    pub fn get_mut(&mut self, name: &str) -> Option<&mut Matrix> {
        self.index_of(name).map(move |i| &mut self.values[i])
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn values(&self) -> &[Matrix] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [Matrix] {
        &mut self.values
    }

    pub fn num_scalars(&self) -> usize {
        self.values.iter().map(|m| m.data().len()).sum()
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = Writer::new();
        self.encode(&mut w);
        w.finish()
    }

    pub(crate) fn encode(&self, w: &mut Writer) {
        w.bytes(&PARAMS_MAGIC);
        w.u32(PARAMS_VERSION);
        w.u32(self.values.len() as u32);
        for (name, m) in self.names.iter().zip(&self.values) {
            w.u16(name.len() as u16);
            w.bytes(name.as_bytes());
            w.u32(m.rows() as u32);
            w.u32(m.cols() as u32);
            for &v in m.data() {
                w.f64(v);
            }
        }
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader::new(bytes);
        let out = Self::decode(&mut r).map_err(Error::Checkpoint)?;
        r.expect_end().map_err(Error::Checkpoint)?;
        Ok(out)
    }

    pub(crate) fn decode(r: &mut Reader<'_>) -> std::result::Result<Self, String> {
        if r.take(PARAMS_MAGIC.len())? != PARAMS_MAGIC {
            return Err("bad parameter magic".into());
        }
        let version = r.u32()?;
        if version != PARAMS_VERSION {
            return Err(format!("unsupported parameter version {version}"));
        }
        let count = r.u32()? as usize;
        let mut set = ParamSet::new();
        for _ in 0..count {
            let len = r.u16()? as usize;
            let name = std::str::from_utf8(r.take(len)?)
                .map_err(|e| format!("parameter name not utf-8: {e}"))?
                .to_owned();
            if set.index_of(&name).is_some() {
                return Err(format!("duplicate parameter {name}"));
            }
            let rows = r.u32()? as usize;
            let cols = r.u32()? as usize;
            let n = rows.checked_mul(cols).ok_or("parameter size overflows")?;
            if n.saturating_mul(8) > r.remaining() {
                return Err(format!("parameter {name} truncated"));
            }
            let mut data = Vec::with_capacity(n);
            for _ in 0..n {
                let v = r.f64()?;
                if !v.is_finite() {
                    return Err(format!("parameter {name} holds a non-finite value"));
                }
                data.push(v);
            }
            set.add(name, Matrix::from_vec(rows, cols, data));
        }
        Ok(set)
    }
}
