use std::fs;
use std::path::Path;

use super::graph::ParamStore;
use super::tensor::Tensor;
use crate::error::{Error, Result};

pub const FORMAT_VERSION: u32 = 1;
const MAGIC: &str = "structdistill-checkpoint";

/// Parameters plus enough metadata to rebuild the owning model.
///
/// Layout: a text header ending in a line `end`, then every parameter as
/// little-endian f64 in declaration order.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub class: String,
    pub vocab_hash: String,
    pub config: Vec<(String, String)>,
    pub params: ParamStore,
}

impl Checkpoint {
    pub fn config_value(&self, key: &str) -> Result<&str> {
        self.config
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
            .ok_or_else(|| Error::data(format!("checkpoint lacks config key {key:?}")))
    }

    pub fn config_parse<T: std::str::FromStr>(&self, key: &str) -> Result<T> {
        let v = self.config_value(key)?;
        v.parse().map_err(|_| Error::data(format!("checkpoint config {key}={v:?} is malformed")))
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut header = format!("{MAGIC} {FORMAT_VERSION}\nclass {}\nvocab {}\n", self.class, self.vocab_hash);
        for (k, v) in &self.config {
            header.push_str(&format!("config {k}={v}\n"));
        }
        for (name, t) in self.params.iter() {
            let dims: Vec<String> = t.shape().iter().map(usize::to_string).collect();
            header.push_str(&format!("param {name} {}\n", dims.join("x")));
        }
        header.push_str("end\n");
        let mut out = header.into_bytes();
        for (_, t) in self.params.iter() {
            for v in t.data() {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut pos = 0;
        let mut next_line = || -> Result<&str> {
            let rest = &bytes[pos..];
            let nl = rest.iter().position(|&b| b == b'\n').ok_or_else(|| Error::data("truncated checkpoint header"))?;
            pos += nl + 1;
            std::str::from_utf8(&rest[..nl]).map_err(|_| Error::data("checkpoint header is not UTF-8"))
        };
        let first = next_line()?;
        let version = first.strip_prefix(MAGIC).map(str::trim).ok_or_else(|| Error::data("not a checkpoint file"))?;
        if version != FORMAT_VERSION.to_string() {
            return Err(Error::data(format!("unsupported checkpoint version {version}")));
        }
        let mut class = None;
        let mut vocab_hash = None;
        let mut config = Vec::new();
        let mut shapes: Vec<(String, Vec<usize>)> = Vec::new();
        loop {
            let line = next_line()?;
            if line == "end" {
                break;
            }
            let (key, rest) = line.split_once(' ').ok_or_else(|| Error::data(format!("bad header line {line:?}")))?;
            match key {
                "class" => class = Some(rest.to_string()),
                "vocab" => vocab_hash = Some(rest.to_string()),
                "config" => {
                    let (k, v) =
                        rest.split_once('=').ok_or_else(|| Error::data(format!("bad config line {line:?}")))?;
                    config.push((k.to_string(), v.to_string()));
                }
                "param" => {
                    let (name, dims) =
                        rest.rsplit_once(' ').ok_or_else(|| Error::data(format!("bad param line {line:?}")))?;
                    let dims = dims
                        .split('x')
                        .map(|d| d.parse::<usize>().map_err(|_| Error::data(format!("bad shape in {line:?}"))))
                        .collect::<Result<Vec<_>>>()?;
                    shapes.push((name.to_string(), dims));
                }
                _ => return Err(Error::data(format!("unknown header key {key:?}"))),
            }
        }
        let mut params = ParamStore::new();
        let mut body = &bytes[pos..];
        for (name, shape) in shapes {
            let n: usize = shape.iter().product();
            if body.len() < 8 * n {
                return Err(Error::data(format!("checkpoint truncated in parameter {name}")));
            }
            let data =
                body[..8 * n].chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8"))).collect();
            body = &body[8 * n..];
            params.add(name, Tensor::new(shape, data)?);
        }
        if !body.is_empty() {
            return Err(Error::data("trailing bytes after checkpoint parameters"));
        }
        Ok(Checkpoint {
            class: class.ok_or_else(|| Error::data("checkpoint lacks a class"))?,
            vocab_hash: vocab_hash.ok_or_else(|| Error::data("checkpoint lacks a vocabulary hash"))?,
            config,
            params,
        })
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, self.to_bytes())?;
        Ok(())
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_bytes(&fs::read(path)?)
    }

    /// Copies stored values into a freshly built store with identical names and shapes.
    pub fn restore_into(&self, store: &mut ParamStore) -> Result<()> {
        if store.len() != self.params.len() {
            return Err(Error::data(format!(
                "checkpoint has {} parameters, model expects {}",
                self.params.len(),
                store.len()
            )));
        }
        for id in 0..store.len() {
            let (name, src) = (self.params.name(id), self.params.get(id));
            if name != store.name(id) || src.shape() != store.get(id).shape() {
                return Err(Error::data(format!(
                    "checkpoint parameter {name} {:?} does not match model parameter {} {:?}",
                    src.shape(),
                    store.name(id),
                    store.get(id).shape()
                )));
            }
            *store.get_mut(id) = src.clone();
        }
        Ok(())
    }

    /// Fails unless the checkpoint holds a model of the given class.
    pub fn expect_class(&self, class: &str) -> Result<()> {
        if self.class != class {
            return Err(Error::data(format!("expected a {class} checkpoint, found {}", self.class)));
        }
        Ok(())
    }
}
