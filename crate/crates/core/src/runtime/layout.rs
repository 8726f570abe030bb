//! Dense pre-order serialization of boxed values.
//!
//! A constructor is written as a one-byte tag (its ordinal), then, in
//! [`OffsetMode::ShortcutOffsets`] and only for constructors with `n >= 2`
//! fields, `n - 1` little-endian `u64` offsets, then its fields in declared
//! order. Offset `k` is the distance from the end of the offset table to the
//! start of field `k + 1`. `Int` fields take 8 bytes (LE), `Bool` 1 byte,
//! `Str` a `u32` LE byte length followed by UTF-8 bytes; packed fields are
//! written inline.

use std::collections::HashMap;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::value::Value;
use crate::lang::{CtorRef, Name, Program, Type, MAX_CTORS, MAX_FIELDS};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OffsetMode {
    None,
    ShortcutOffsets,
}

impl OffsetMode {
    fn byte(self) -> u8 {
        match self {
            OffsetMode::None => 0,
            OffsetMode::ShortcutOffsets => 1,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FieldKind {
    Int,
    Bool,
    Str,
    Packed(usize),
}

#[derive(Clone, Debug)]
pub struct CtorLayout {
    pub name: Name,
    pub fields: Vec<FieldKind>,
}

#[derive(Clone, Debug)]
pub struct DataLayout {
    pub name: Name,
    pub ctors: Vec<CtorLayout>,
}

/// Field order per constructor, as declared in a (possibly rewritten)
/// program, plus the offset mode.
#[derive(Clone, Debug)]
pub struct LayoutDescriptor {
    pub mode: OffsetMode,
    pub datas: Vec<DataLayout>,
    index: HashMap<Name, usize>,
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum FormatError {
    #[error("bad magic; expected LPK1")]
    BadMagic,
    #[error("unknown offset mode byte {0}")]
    BadMode(u8),
    #[error("truncated buffer at byte {0}")]
    Truncated(usize),
    #[error("tag {tag} at byte {at} is not a constructor of `{data}`")]
    BadTag { at: usize, tag: u8, data: Name },
    #[error("invalid UTF-8 string at byte {0}")]
    BadUtf8(usize),
    #[error("invalid Bool byte at {0}")]
    BadBool(usize),
    #[error("offset table at byte {at} disagrees with field {field}")]
    BadOffset { at: usize, field: usize },
    #[error("root index {0} out of bounds")]
    BadRoot(usize),
    #[error("unknown datatype `{0}`")]
    UnknownData(Name),
    #[error("value does not match its declared type: {0}")]
    Shape(String),
    #[error("limit exceeded: {0}")]
    Limit(String),
    #[error("io: {0}")]
    Io(String),
}

impl LayoutDescriptor {
    pub fn from_program(p: &Program, mode: OffsetMode) -> LayoutDescriptor {
        let index: HashMap<Name, usize> = p.datas.iter().enumerate().map(|(i, d)| (d.name.clone(), i)).collect();
        let datas = p
            .datas
            .iter()
            .map(|d| DataLayout {
                name: d.name.clone(),
                ctors: d
                    .ctors
                    .iter()
                    .map(|c| CtorLayout {
                        name: c.name.clone(),
                        fields: c
                            .fields
                            .iter()
                            .map(|t| match t {
                                Type::Int => FieldKind::Int,
                                Type::Bool => FieldKind::Bool,
                                Type::Str => FieldKind::Str,
                                Type::Data(n) => FieldKind::Packed(index[n]),
                            })
                            .collect(),
                    })
                    .collect(),
            })
            .collect();
        LayoutDescriptor { mode, datas, index }
    }

    pub fn data_index(&self, name: &str) -> Option<usize> {
        self.index.get(name).copied()
    }

    pub fn ctor(&self, data: usize, tag: usize) -> &CtorLayout {
        &self.datas[data].ctors[tag]
    }

    /// Size of the offset table that follows the tag of this constructor.
    pub fn table_bytes(&self, data: usize, tag: usize) -> usize {
        let n = self.datas[data].ctors[tag].fields.len();
        match self.mode {
            OffsetMode::ShortcutOffsets if n >= 2 => 8 * (n - 1),
            _ => 0,
        }
    }
}

/// A serialized value: `bytes[root..]` holds one value of datatype `data`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PackedBuffer {
    pub mode: OffsetMode,
    pub data: usize,
    pub root: usize,
    pub bytes: Vec<u8>,
}

/// Serialize a boxed value of datatype `data` (an index into the descriptor).
pub fn serialize(v: &Value, data: usize, desc: &LayoutDescriptor) -> Result<PackedBuffer, FormatError> {
    let mut bytes = Vec::new();
    write_value(v, FieldKind::Packed(data), desc, &mut bytes)?;
    Ok(PackedBuffer { mode: desc.mode, data, root: 0, bytes })
}

fn write_value(v: &Value, kind: FieldKind, desc: &LayoutDescriptor, out: &mut Vec<u8>) -> Result<(), FormatError> {
    match (kind, v) {
        (FieldKind::Int, Value::Int(i)) => out.extend_from_slice(&i.to_le_bytes()),
        (FieldKind::Bool, Value::Bool(b)) => out.push(*b as u8),
        (FieldKind::Str, Value::Str(s)) => {
            let len = u32::try_from(s.len()).map_err(|_| FormatError::Limit("string longer than 4 GiB".into()))?;
            out.extend_from_slice(&len.to_le_bytes());
            out.extend_from_slice(s.as_bytes());
        }
        (FieldKind::Packed(d), Value::Con(c)) => {
            if c.ctor.data != d {
                return Err(FormatError::Shape(format!(
                    "constructor of datatype #{} where `{}` was expected",
                    c.ctor.data, desc.datas[d].name
                )));
            }
            let cl = desc.datas[d]
                .ctors
                .get(c.ctor.tag)
                .ok_or_else(|| FormatError::Shape(format!("bad constructor ordinal {}", c.ctor.tag)))?;
            if c.ctor.tag >= MAX_CTORS || cl.fields.len() > MAX_FIELDS {
                return Err(FormatError::Limit(format!("constructor `{}`", cl.name)));
            }
            if cl.fields.len() != c.fields.len() {
                return Err(FormatError::Shape(format!("`{}` expects {} fields", cl.name, cl.fields.len())));
            }
            out.push(c.ctor.tag as u8);
            let table = desc.table_bytes(d, c.ctor.tag);
            let table_at = out.len();
            out.resize(table_at + table, 0);
            let table_end = out.len();
            for (k, (f, fk)) in c.fields.iter().zip(&cl.fields).enumerate() {
                if k >= 1 && table > 0 {
                    let off = (out.len() - table_end) as u64;
                    let slot = table_at + 8 * (k - 1);
                    out[slot..slot + 8].copy_from_slice(&off.to_le_bytes());
                }
                stacker::maybe_grow(64 * 1024, 2 * 1024 * 1024, || write_value(f, *fk, desc, out))?;
            }
        }
        (k, v) => return Err(FormatError::Shape(format!("{v:?} is not a {k:?}"))),
    }
    Ok(())
}

pub(crate) fn read_u64(bytes: &[u8], at: usize) -> Result<u64, FormatError> {
    let s = bytes.get(at..at + 8).ok_or(FormatError::Truncated(at))?;
    Ok(u64::from_le_bytes(s.try_into().unwrap()))
}

pub(crate) fn read_u32(bytes: &[u8], at: usize) -> Result<u32, FormatError> {
    let s = bytes.get(at..at + 4).ok_or(FormatError::Truncated(at))?;
    Ok(u32::from_le_bytes(s.try_into().unwrap()))
}

/// Decode a scalar at `at`; returns the value and its encoded size.
pub(crate) fn read_scalar(bytes: &[u8], at: usize, kind: FieldKind) -> Result<(Value, usize), FormatError> {
    match kind {
        FieldKind::Int => Ok((Value::Int(read_u64(bytes, at)? as i64), 8)),
        FieldKind::Bool => match bytes.get(at) {
            Some(0) => Ok((Value::Bool(false), 1)),
            Some(1) => Ok((Value::Bool(true), 1)),
            Some(_) => Err(FormatError::BadBool(at)),
            None => Err(FormatError::Truncated(at)),
        },
        FieldKind::Str => {
            let len = read_u32(bytes, at)? as usize;
            let s = bytes.get(at + 4..at + 4 + len).ok_or(FormatError::Truncated(at + 4))?;
            let s = std::str::from_utf8(s).map_err(|_| FormatError::BadUtf8(at))?;
            Ok((Value::Str(s.into()), 4 + len))
        }
        FieldKind::Packed(_) => unreachable!("packed field decoded as scalar"),
    }
}

/// Decode the value at `at`; returns it and the position just past it.
/// Validates tags, string encodings and, in offset mode, every offset.
pub(crate) fn read_value(
    bytes: &[u8],
    at: usize,
    kind: FieldKind,
    desc: &LayoutDescriptor,
) -> Result<(Value, usize), FormatError> {
    let FieldKind::Packed(d) = kind else {
        let (v, n) = read_scalar(bytes, at, kind)?;
        return Ok((v, at + n));
    };
    let tag = *bytes.get(at).ok_or(FormatError::Truncated(at))?;
    let dl = &desc.datas[d];
    let cl = dl
        .ctors
        .get(tag as usize)
        .ok_or_else(|| FormatError::BadTag { at, tag, data: dl.name.clone() })?;
    let table = desc.table_bytes(d, tag as usize);
    let table_end = at + 1 + table;
    if table_end > bytes.len() {
        return Err(FormatError::Truncated(at + 1));
    }
    let mut pos = table_end;
    let mut fields = Vec::with_capacity(cl.fields.len());
    for (k, fk) in cl.fields.iter().enumerate() {
        if k >= 1 && table > 0 {
            let off = read_u64(bytes, at + 1 + 8 * (k - 1))?;
            if table_end as u64 + off != pos as u64 {
                return Err(FormatError::BadOffset { at, field: k });
            }
        }
        let (v, next) = stacker::maybe_grow(64 * 1024, 2 * 1024 * 1024, || read_value(bytes, pos, *fk, desc))?;
        fields.push(v);
        pos = next;
    }
    Ok((Value::con(CtorRef { data: d, tag: tag as usize }, fields), pos))
}

/// Decode and validate a whole buffer.
pub fn deserialize(buf: &PackedBuffer, desc: &LayoutDescriptor) -> Result<Value, FormatError> {
    if buf.root >= buf.bytes.len() {
        return Err(FormatError::BadRoot(buf.root));
    }
    if buf.data >= desc.datas.len() {
        return Err(FormatError::Shape(format!("datatype #{} not in layout", buf.data)));
    }
    let (v, _) = read_value(&buf.bytes, buf.root, FieldKind::Packed(buf.data), desc)?;
    Ok(v)
}

const MAGIC: &[u8; 4] = b"LPK1";

/// Encode as `LPK1`, one offset-mode byte, the root index as a `u64` LE, then
/// the raw bytes.
pub fn encode_buffer_file(buf: &PackedBuffer) -> Vec<u8> {
    let mut out = Vec::with_capacity(13 + buf.bytes.len());
    out.extend_from_slice(MAGIC);
    out.push(buf.mode.byte());
    out.extend_from_slice(&(buf.root as u64).to_le_bytes());
    out.extend_from_slice(&buf.bytes);
    out
}

/// Inverse of [`encode_buffer_file`]; the datatype is supplied by the caller.
pub fn decode_buffer_file(raw: &[u8], data: usize) -> Result<PackedBuffer, FormatError> {
    if raw.len() < 13 || &raw[..4] != MAGIC {
        return Err(FormatError::BadMagic);
    }
    let mode = match raw[4] {
        0 => OffsetMode::None,
        1 => OffsetMode::ShortcutOffsets,
        b => return Err(FormatError::BadMode(b)),
    };
    let root = read_u64(raw, 5)? as usize;
    let bytes = raw[13..].to_vec();
    if root >= bytes.len() {
        return Err(FormatError::BadRoot(root));
    }
    Ok(PackedBuffer { mode, data, root, bytes })
}

pub fn write_buffer_file(path: &Path, buf: &PackedBuffer) -> Result<(), FormatError> {
    let mut f = std::fs::File::create(path).map_err(|e| FormatError::Io(e.to_string()))?;
    f.write_all(&encode_buffer_file(buf)).map_err(|e| FormatError::Io(e.to_string()))
}

pub fn read_buffer_file(path: &Path, data: usize) -> Result<PackedBuffer, FormatError> {
    let mut raw = Vec::new();
    std::fs::File::open(path)
        .and_then(|mut f| f.read_to_end(&mut raw))
        .map_err(|e| FormatError::Io(e.to_string()))?;
    decode_buffer_file(&raw, data)
}
