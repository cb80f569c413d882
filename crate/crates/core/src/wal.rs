//! Write-ahead log.
//!
//! Record layout, little-endian:
//! `[u64 seq][u8 op][u16 payload_len][payload][u32 crc32]`, where the CRC
//! covers every preceding byte of the record. Transaction payloads are a
//! concatenation of `[u8 op][u16 len][payload]` items. Vertex insertions log
//! the id that was assigned so replay can check it.
//!
//! A record that is cut short or fails its CRC as the final record of the
//! file is a torn tail and is dropped. A CRC failure followed by more data
//! is fatal.

use std::fs::{File, OpenOptions};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use crate::ccontrol::Update;
use crate::error::{Error, Result};
use crate::graph_store::VertexId;

const OP_INS_EDGE: u8 = 1;
const OP_DEL_EDGE: u8 = 2;
const OP_INS_VERTEX: u8 = 3;
const OP_DEL_VERTEX: u8 = 4;
const OP_TXN: u8 = 5;

const HEADER: usize = 8 + 1 + 2;
const TRAILER: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum FsyncPolicy {
    EveryRecord,
    #[default]
    EveryEpochPhase,
}

impl std::str::FromStr for FsyncPolicy {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "every-record" => Ok(FsyncPolicy::EveryRecord),
            "every-epoch-phase" => Ok(FsyncPolicy::EveryEpochPhase),
            _ => Err(format!("unknown fsync policy '{s}'")),
        }
    }
}

/// A decoded record: the update plus the vertex ids it was assigned.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WalRecord {
    pub seq: u64,
    pub update: Update,
    pub assigned: Vec<VertexId>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WalContents {
    pub records: Vec<WalRecord>,
    /// Bytes covered by intact records.
    pub valid_len: u64,
    /// Whether a torn tail followed the intact records.
    pub torn_tail: bool,
}

pub struct Wal {
    out: BufWriter<File>,
    path: PathBuf,
    next_seq: u64,
    policy: FsyncPolicy,
    dirty: bool,
    buf: Vec<u8>,
}

impl std::fmt::Debug for Wal {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Wal")
            .field("path", &self.path)
            .field("next_seq", &self.next_seq)
            .field("policy", &self.policy)
            .finish()
    }
}

impl Wal {
    /// Opens `path` for appending, creating it if missing. `next_seq` must
    /// exceed every sequence number already in the file.
    pub fn open(path: &Path, policy: FsyncPolicy, next_seq: u64) -> Result<Self> {
        let file = OpenOptions::new().create(true).append(true).open(path)?;
        Ok(Wal {
            out: BufWriter::with_capacity(1 << 16, file),
            path: path.to_path_buf(),
            next_seq,
            policy,
            dirty: false,
            buf: Vec::with_capacity(64),
        })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn next_seq(&self) -> u64 {
        self.next_seq
    }

    pub fn append(&mut self, update: &Update, assigned: &[VertexId]) -> Result<u64> {
        let seq = self.next_seq;
        encode_record(seq, update, assigned, &mut self.buf)?;
        self.out.write_all(&self.buf)?;
        self.next_seq += 1;
        self.dirty = true;
        if self.policy == FsyncPolicy::EveryRecord {
            self.sync()?;
        }
        Ok(seq)
    }

    /// Flushes buffered records and syncs them to disk.
    pub fn sync(&mut self) -> Result<()> {
        if self.dirty {
            self.out.flush()?;
            self.out.get_ref().sync_data()?;
            self.dirty = false;
        }
        Ok(())
    }
}

impl Drop for Wal {
    fn drop(&mut self) {
        let _ = self.sync();
    }
}

fn encode_record(
    seq: u64,
    update: &Update,
    assigned: &[VertexId],
    buf: &mut Vec<u8>,
) -> Result<()> {
    buf.clear();
    buf.extend_from_slice(&seq.to_le_bytes());
    buf.push(0);
    buf.extend_from_slice(&[0, 0]);
    let mut ids = assigned.iter().copied();
    let op = encode_payload(update, &mut ids, buf)?;
    if ids.next().is_some() {
        return Err(Error::Wal(
            "more assigned ids than vertex insertions".into(),
        ));
    }
    let len = buf.len() - HEADER;
    let len = u16::try_from(len)
        .map_err(|_| Error::Wal(format!("payload of {len} bytes exceeds u16")))?;
    buf[8] = op;
    buf[9..11].copy_from_slice(&len.to_le_bytes());
    let crc = crc32fast::hash(buf);
    buf.extend_from_slice(&crc.to_le_bytes());
    Ok(())
}

fn encode_payload(
    update: &Update,
    ids: &mut impl Iterator<Item = VertexId>,
    buf: &mut Vec<u8>,
) -> Result<u8> {
    Ok(match update {
        Update::InsEdge { src, dst, weight } | Update::DelEdge { src, dst, weight } => {
            buf.extend_from_slice(&src.to_le_bytes());
            buf.extend_from_slice(&dst.to_le_bytes());
            buf.extend_from_slice(&weight.to_le_bytes());
            if matches!(update, Update::InsEdge { .. }) {
                OP_INS_EDGE
            } else {
                OP_DEL_EDGE
            }
        }
        Update::InsVertex => {
            let id = ids
                .next()
                .ok_or_else(|| Error::Wal("vertex insertion without an assigned id".into()))?;
            buf.extend_from_slice(&id.to_le_bytes());
            OP_INS_VERTEX
        }
        Update::DelVertex(v) => {
            buf.extend_from_slice(&v.to_le_bytes());
            OP_DEL_VERTEX
        }
        Update::Txn(ops) => {
            for op in ops {
                if matches!(op, Update::Txn(_)) {
                    return Err(Error::NestedTxn);
                }
                let at = buf.len();
                buf.extend_from_slice(&[0, 0, 0]);
                let code = encode_payload(op, ids, buf)?;
                let len = (buf.len() - at - 3) as u16;
                buf[at] = code;
                buf[at + 1..at + 3].copy_from_slice(&len.to_le_bytes());
            }
            OP_TXN
        }
    })
}

fn u64_at(b: &[u8], at: usize) -> u64 {
    u64::from_le_bytes(b[at..at + 8].try_into().unwrap())
}

fn decode_payload(
    op: u8,
    p: &[u8],
    assigned: &mut Vec<VertexId>,
) -> std::result::Result<Update, String> {
    match op {
        OP_INS_EDGE | OP_DEL_EDGE => {
            if p.len() != 24 {
                return Err(format!("edge payload of {} bytes", p.len()));
            }
            let (src, dst, weight) = (u64_at(p, 0), u64_at(p, 8), u64_at(p, 16) as i64);
            Ok(if op == OP_INS_EDGE {
                Update::InsEdge { src, dst, weight }
            } else {
                Update::DelEdge { src, dst, weight }
            })
        }
        OP_INS_VERTEX | OP_DEL_VERTEX => {
            if p.len() != 8 {
                return Err(format!("vertex payload of {} bytes", p.len()));
            }
            let v = u64_at(p, 0);
            if op == OP_INS_VERTEX {
                assigned.push(v);
                Ok(Update::InsVertex)
            } else {
                Ok(Update::DelVertex(v))
            }
        }
        OP_TXN => {
            let mut ops = Vec::new();
            let mut at = 0;
            while at < p.len() {
                if p.len() - at < 3 {
                    return Err("truncated transaction item".into());
                }
                let code = p[at];
                let len = u16::from_le_bytes([p[at + 1], p[at + 2]]) as usize;
                let body = p
                    .get(at + 3..at + 3 + len)
                    .ok_or("transaction item overruns payload")?;
                if code == OP_TXN {
                    return Err("nested transaction".into());
                }
                ops.push(decode_payload(code, body, assigned)?);
                at += 3 + len;
            }
            Ok(Update::Txn(ops))
        }
        other => Err(format!("unknown op code {other}")),
    }
}

/// Reads every intact record. A missing file reads as empty.
pub fn read_wal(path: &Path) -> Result<WalContents> {
    let bytes = match std::fs::read(path) {
        Ok(b) => b,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => Vec::new(),
        Err(e) => return Err(e.into()),
    };
    decode_wal(&bytes)
}

pub fn decode_wal(bytes: &[u8]) -> Result<WalContents> {
    let mut records = Vec::new();
    let mut at = 0usize;
    let mut last_seq: Option<u64> = None;
    let torn = |records, at: usize| {
        Ok(WalContents {
            records,
            valid_len: at as u64,
            torn_tail: true,
        })
    };
    while at < bytes.len() {
        if bytes.len() - at < HEADER {
            return torn(records, at);
        }
        let len = u16::from_le_bytes([bytes[at + 9], bytes[at + 10]]) as usize;
        let end = at + HEADER + len + TRAILER;
        if end > bytes.len() {
            return torn(records, at);
        }
        let body = &bytes[at..end - TRAILER];
        let stored = u32::from_le_bytes(bytes[end - TRAILER..end].try_into().unwrap());
        let corrupt = |reason: String| Error::CorruptBody {
            offset: at as u64,
            reason,
        };
        if crc32fast::hash(body) != stored {
            if end == bytes.len() {
                return torn(records, at);
            }
            return Err(corrupt("crc mismatch".into()));
        }
        let seq = u64_at(bytes, at);
        if last_seq.is_some_and(|s| seq <= s) {
            return Err(corrupt(format!("sequence {seq} does not increase")));
        }
        let mut assigned = Vec::new();
        let update =
            decode_payload(bytes[at + 8], &body[HEADER..], &mut assigned).map_err(corrupt)?;
        records.push(WalRecord {
            seq,
            update,
            assigned,
        });
        last_seq = Some(seq);
        at = end;
    }
    Ok(WalContents {
        records,
        valid_len: at as u64,
        torn_tail: false,
    })
}

/// Drops a torn tail so appends continue after the last intact record.
pub fn truncate_to(path: &Path, len: u64) -> Result<()> {
    if path.exists() {
        let f = OpenOptions::new().write(true).open(path)?;
        f.set_len(len)?;
        f.sync_all()?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Vec<(Update, Vec<VertexId>)> {
        vec![
            (
                Update::InsEdge {
                    src: 1,
                    dst: 2,
                    weight: -7,
                },
                vec![],
            ),
            (
                Update::DelEdge {
                    src: 3,
                    dst: 4,
                    weight: 9,
                },
                vec![],
            ),
            (Update::InsVertex, vec![42]),
            (Update::DelVertex(5), vec![]),
            (
                Update::Txn(vec![
                    Update::InsVertex,
                    Update::InsEdge {
                        src: 0,
                        dst: 8,
                        weight: 1,
                    },
                    Update::InsVertex,
                ]),
                vec![8, 9],
            ),
        ]
    }

    fn encode_all(ops: &[(Update, Vec<VertexId>)]) -> Vec<u8> {
        let mut out = Vec::new();
        let mut buf = Vec::new();
        for (i, (u, a)) in ops.iter().enumerate() {
            encode_record(i as u64 + 1, u, a, &mut buf).unwrap();
            out.extend_from_slice(&buf);
        }
        out
    }

    #[test]
    fn round_trip() {
        let ops = sample();
        let bytes = encode_all(&ops);
        let c = decode_wal(&bytes).unwrap();
        assert!(!c.torn_tail);
        assert_eq!(c.valid_len as usize, bytes.len());
        let got: Vec<_> = c
            .records
            .into_iter()
            .map(|r| (r.update, r.assigned))
            .collect();
        assert_eq!(got, ops);
    }

    #[test]
    fn edge_record_layout() {
        let mut buf = Vec::new();
        encode_record(
            7,
            &Update::InsEdge {
                src: 1,
                dst: 2,
                weight: 3,
            },
            &[],
            &mut buf,
        )
        .unwrap();
        assert_eq!(buf.len(), 8 + 1 + 2 + 24 + 4);
        assert_eq!(&buf[..8], &7u64.to_le_bytes());
        assert_eq!(buf[8], OP_INS_EDGE);
        assert_eq!(&buf[9..11], &24u16.to_le_bytes());
        let crc = crc32fast::hash(&buf[..35]);
        assert_eq!(&buf[35..], &crc.to_le_bytes());
    }

    #[test]
    fn every_truncation_is_a_torn_tail() {
        let bytes = encode_all(&sample());
        for cut in 0..bytes.len() {
            let c = decode_wal(&bytes[..cut]).unwrap();
            assert!(c.valid_len as usize <= cut);
            assert_eq!(c.torn_tail, c.valid_len as usize != cut);
        }
    }

    #[test]
    fn bad_crc_in_last_record_is_tail() {
        let mut bytes = encode_all(&sample());
        let n = bytes.len();
        bytes[n - 1] ^= 0xff;
        let c = decode_wal(&bytes).unwrap();
        assert!(c.torn_tail);
        assert_eq!(c.records.len(), 4);
    }

    #[test]
    fn bad_crc_mid_file_is_fatal() {
        let mut bytes = encode_all(&sample());
        bytes[HEADER + 3] ^= 0x01;
        assert!(matches!(
            decode_wal(&bytes),
            Err(Error::CorruptBody { offset: 0, .. })
        ));
    }

    #[test]
    fn empty_input_is_empty_log() {
        let c = decode_wal(&[]).unwrap();
        assert!(c.records.is_empty());
        assert!(!c.torn_tail);
    }

    #[test]
    fn missing_assigned_id_rejected() {
        let mut buf = Vec::new();
        assert!(encode_record(1, &Update::InsVertex, &[], &mut buf).is_err());
        assert!(encode_record(1, &Update::DelVertex(1), &[3], &mut buf).is_err());
    }
}
