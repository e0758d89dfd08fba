//! Checkpoint container.
//!
//! ```text
//! PUMFA-CKPT-1
//! [config]
//! key=value                      (zero or more)
//! [manifest]
//! <name> <d0>x<d1>x... <offset>  (byte offset into the blob)
//! [data]
//! <little-endian f32 blob>
//! ```

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};

pub const MAGIC: &str = "PUMFA-CKPT-1";

#[derive(Debug, Clone, PartialEq)]
pub struct NamedBuffer {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: Vec<f32>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Checkpoint {
    pub config: Vec<(String, String)>,
    pub tensors: Vec<NamedBuffer>,
}

fn parse_err(path: &Path, message: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        message: message.into(),
    }
}

impl Checkpoint {
    pub fn push_config(&mut self, key: impl Into<String>, value: impl ToString) {
        self.config.push((key.into(), value.to_string()));
    }

    pub fn config_value(&self, key: &str) -> Option<&str> {
        self.config.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    pub fn push_tensor(&mut self, name: impl Into<String>, shape: &[usize], data: Vec<f32>) {
        self.tensors.push(NamedBuffer {
            name: name.into(),
            shape: shape.to_vec(),
            data,
        });
    }

    pub fn tensor(&self, name: &str) -> Option<&NamedBuffer> {
        self.tensors.iter().find(|t| t.name == name)
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let mut header = String::new();
        header.push_str(MAGIC);
        header.push_str("\n[config]\n");
        for (k, v) in &self.config {
            if k.contains(['=', '\n']) || v.contains('\n') || k.is_empty() {
                return Err(Error::InvalidArgument(format!("checkpoint config entry {k:?} is not representable")));
            }
            header.push_str(&format!("{k}={v}\n"));
        }
        header.push_str("[manifest]\n");
        let mut offset = 0usize;
        for t in &self.tensors {
            if t.name.is_empty() || t.name.contains(char::is_whitespace) {
                return Err(Error::InvalidArgument(format!("tensor name {:?} is not representable", t.name)));
            }
            if t.shape.iter().product::<usize>() != t.data.len() {
                return Err(Error::ShapeMismatch {
                    op: "checkpoint",
                    lhs: t.shape.clone(),
                    rhs: vec![t.data.len()],
                });
            }
            let dims: Vec<String> = t.shape.iter().map(|d| d.to_string()).collect();
            header.push_str(&format!("{} {} {}\n", t.name, dims.join("x"), offset));
            offset += t.data.len() * 4;
        }
        header.push_str("[data]\n");

        let mut bytes = header.into_bytes();
        bytes.reserve(offset);
        for t in &self.tensors {
            for v in &t.data {
                bytes.extend_from_slice(&v.to_le_bytes());
            }
        }
        Ok(bytes)
    }

    pub fn from_bytes(bytes: &[u8], path: &Path) -> Result<Self> {
        const DATA_MARK: &[u8] = b"[data]\n";
        let split = bytes
            .windows(DATA_MARK.len())
            .position(|w| w == DATA_MARK)
            .ok_or_else(|| parse_err(path, "missing [data] section"))?;
        let header = std::str::from_utf8(&bytes[..split]).map_err(|_| parse_err(path, "header is not UTF-8"))?;
        let blob = &bytes[split + DATA_MARK.len()..];

        let mut lines = header.lines();
        if lines.next() != Some(MAGIC) {
            return Err(parse_err(path, format!("missing magic {MAGIC}")));
        }
        if lines.next() != Some("[config]") {
            return Err(parse_err(path, "expected [config] section"));
        }
        let mut ckpt = Checkpoint::default();
        let mut in_manifest = false;
        let mut expected_offset = 0usize;
        for line in lines {
            if line == "[manifest]" {
                in_manifest = true;
                continue;
            }
            if !in_manifest {
                let (k, v) = line
                    .split_once('=')
                    .ok_or_else(|| parse_err(path, format!("malformed config line {line:?}")))?;
                ckpt.push_config(k, v);
                continue;
            }
            let parts: Vec<&str> = line.split(' ').collect();
            let [name, dims, offset] = parts[..] else {
                return Err(parse_err(path, format!("malformed manifest line {line:?}")));
            };
            let shape = dims
                .split('x')
                .map(|d| d.parse::<usize>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|_| parse_err(path, format!("bad shape {dims:?}")))?;
            let offset: usize = offset.parse().map_err(|_| parse_err(path, format!("bad offset {offset:?}")))?;
            if offset != expected_offset {
                return Err(parse_err(path, format!("{name}: offset {offset}, expected {expected_offset}")));
            }
            let count: usize = shape.iter().product();
            let end = offset + count * 4;
            if end > blob.len() {
                return Err(parse_err(path, format!("{name}: data truncated")));
            }
            let data = blob[offset..end]
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
                .collect();
            ckpt.push_tensor(name, &shape, data);
            expected_offset = end;
        }
        if !in_manifest {
            return Err(parse_err(path, "missing [manifest] section"));
        }
        if expected_offset != blob.len() {
            return Err(parse_err(path, "trailing bytes after last tensor"));
        }
        Ok(ckpt)
    }

    /// Writes to a sibling temp file, then renames over `path`.
    pub fn write(&self, path: &Path) -> Result<()> {
        let bytes = self.to_bytes()?;
        let tmp: PathBuf = {
            let mut name = path.file_name().map(|n| n.to_os_string()).unwrap_or_default();
            name.push(".tmp");
            path.with_file_name(name)
        };
        {
            let mut f = fs::File::create(&tmp)?;
            f.write_all(&bytes)?;
            f.sync_all()?;
        }
        fs::rename(&tmp, path)?;
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Self> {
        let bytes = fs::read(path)?;
        Self::from_bytes(&bytes, path)
    }
}
