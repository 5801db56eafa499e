//! Checkpoint container: a text header followed by little-endian `f64`
//! payload.
//!
//! ```text
//! GBBAN-CHECKPOINT 1
//! meta <key> <value...>
//! tensor <name> <dim> <dim> ...
//! end
//! <payload: tensors in header order>
//! ```

use std::collections::BTreeMap;
use std::path::Path;

use super::Tensor;
use crate::error::{Error, Result};

const MAGIC: &str = "GBBAN-CHECKPOINT 1";

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Checkpoint {
    pub meta: BTreeMap<String, String>,
    pub tensors: Vec<(String, Tensor)>,
}

impl Checkpoint {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn set_meta(&mut self, key: &str, value: impl ToString) {
        self.meta.insert(key.to_string(), value.to_string());
    }

    pub fn meta(&self, key: &str) -> Option<&str> {
        self.meta.get(key).map(String::as_str)
    }

    pub fn push(&mut self, name: &str, t: &Tensor) {
        self.tensors.push((name.to_string(), t.clone()));
    }

    pub fn tensor(&self, name: &str) -> Option<&Tensor> {
        self.tensors.iter().find(|(n, _)| n == name).map(|(_, t)| t)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut head = String::from(MAGIC);
        head.push('\n');
        for (k, v) in &self.meta {
            head.push_str(&format!("meta {k} {v}\n"));
        }
        for (name, t) in &self.tensors {
            head.push_str(&format!("tensor {name}"));
            for d in t.shape() {
                head.push_str(&format!(" {d}"));
            }
            head.push('\n');
        }
        head.push_str("end\n");
        let mut out = head.into_bytes();
        for (_, t) in &self.tensors {
            for v in t.data() {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let bad = |msg: &str| Error::invalid(format!("corrupt checkpoint: {msg}"));
        let mut pos = 0;
        let mut next_line = || -> Result<&str> {
            let rest = &bytes[pos..];
            let nl = rest.iter().position(|&b| b == b'\n').ok_or_else(|| bad("truncated header"))?;
            pos += nl + 1;
            std::str::from_utf8(&rest[..nl]).map_err(|_| bad("header is not UTF-8"))
        };
        if next_line()? != MAGIC {
            return Err(bad("bad magic line"));
        }
        let mut ck = Checkpoint::new();
        let mut shapes: Vec<(String, Vec<usize>)> = Vec::new();
        loop {
            let line = next_line()?;
            if line == "end" {
                break;
            }
            let mut parts = line.splitn(3, ' ');
            match parts.next() {
                Some("meta") => {
                    let k = parts.next().ok_or_else(|| bad("meta without key"))?;
                    ck.meta.insert(k.to_string(), parts.next().unwrap_or("").to_string());
                }
                Some("tensor") => {
                    let name = parts.next().ok_or_else(|| bad("tensor without name"))?;
                    let dims = parts
                        .next()
                        .unwrap_or("")
                        .split_whitespace()
                        .map(|d| d.parse::<usize>().map_err(|_| bad("bad dimension")))
                        .collect::<Result<Vec<_>>>()?;
                    shapes.push((name.to_string(), dims));
                }
                _ => return Err(bad(&format!("unexpected header line '{line}'"))),
            }
        }
        let mut payload = bytes[pos..].chunks_exact(8);
        if payload.len() * 8 != bytes.len() - pos {
            return Err(bad("payload is not a whole number of f64 values"));
        }
        for (name, dims) in shapes {
            let n: usize = dims.iter().product();
            let mut data = Vec::with_capacity(n);
            for _ in 0..n {
                let c = payload.next().ok_or_else(|| bad("payload too short"))?;
                data.push(f64::from_le_bytes(c.try_into().expect("chunk of 8")));
            }
            ck.tensors.push((name, Tensor::from_vec(&dims, data)?));
        }
        if payload.next().is_some() {
            return Err(bad("trailing payload"));
        }
        Ok(ck)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_bytes())?;
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::from_bytes(&std::fs::read(path)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Checkpoint {
        let mut ck = Checkpoint::new();
        ck.set_meta("seed", 7);
        ck.set_meta("variant", "attention mr gf");
        ck.push("a", &Tensor::from_vec(&[2, 2], vec![1.0, -0.0, 1e-300, f64::MAX]).unwrap());
        ck.push("b", &Tensor::from_vec(&[3], vec![0.1, 0.2, 0.3]).unwrap());
        ck
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let ck = sample();
        let back = Checkpoint::from_bytes(&ck.to_bytes()).unwrap();
        assert_eq!(back.meta("variant"), Some("attention mr gf"));
        for ((n1, t1), (n2, t2)) in ck.tensors.iter().zip(&back.tensors) {
            assert_eq!(n1, n2);
            assert_eq!(t1.shape(), t2.shape());
            let b1: Vec<u64> = t1.data().iter().map(|v| v.to_bits()).collect();
            let b2: Vec<u64> = t2.data().iter().map(|v| v.to_bits()).collect();
            assert_eq!(b1, b2);
        }
        assert_eq!(back.to_bytes(), ck.to_bytes());
    }

    #[test]
    fn rejects_corruption() {
        let bytes = sample().to_bytes();
        assert!(Checkpoint::from_bytes(&bytes[..bytes.len() - 8]).is_err());
        assert!(Checkpoint::from_bytes(&bytes[..bytes.len() - 3]).is_err());
        assert!(Checkpoint::from_bytes(b"NOT-A-CHECKPOINT\nend\n").is_err());
    }
}
