//! Binary embedding checkpoints, their text metadata, and resumable
//! training snapshots.
//!
//! Embedding layout: five little-endian u64 (magic, version, M, N, d)
//! followed by the row-major f64 values of `E_U` and then `E_I`.

use std::fs;
use std::io::{self, Read, Write};
use std::path::Path;

use crate::adam::OptimizerState;
use crate::data::parse_key_values;
use crate::denoise::{DenoiseReport, HISTOGRAM_BINS};
use crate::encoder::EmbeddingState;
use crate::error::{Error, Result};
use crate::graph::EdgeMask;
use crate::matrix::Matrix;
use crate::objective::LossBreakdown;
use crate::trainer::{BestCheckpoint, EpochRecord, SessionSnapshot, TrainerSnapshot, TrainingLog};

pub const EMBEDDING_MAGIC: u64 = u64::from_le_bytes(*b"DCDSREMB");
pub const SESSION_MAGIC: u64 = u64::from_le_bytes(*b"DCDSRSES");
pub const FORMAT_VERSION: u64 = 1;

struct Encoder<W: Write> {
    out: W,
}

impl<W: Write> Encoder<W> {
    fn u64(&mut self, v: u64) -> io::Result<()> {
        self.out.write_all(&v.to_le_bytes())
    }

    fn f64(&mut self, v: f64) -> io::Result<()> {
        self.out.write_all(&v.to_le_bytes())
    }

    fn values(&mut self, m: &Matrix) -> io::Result<()> {
        let mut buf = Vec::with_capacity(m.as_slice().len() * 8);
        for v in m.as_slice() {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        self.out.write_all(&buf)
    }

    fn matrix(&mut self, m: &Matrix) -> io::Result<()> {
        self.u64(m.rows() as u64)?;
        self.u64(m.cols() as u64)?;
        self.values(m)
    }

    fn state(&mut self, s: &EmbeddingState) -> io::Result<()> {
        self.matrix(&s.users)?;
        self.matrix(&s.items)
    }

    fn mask(&mut self, m: &EdgeMask) -> io::Result<()> {
        self.u64(m.len() as u64)?;
        let bytes: Vec<u8> = m.flags().iter().map(|&k| u8::from(k)).collect();
        self.out.write_all(&bytes)
    }
}

struct Decoder<'a> {
    buf: &'a [u8],
}

impl Decoder<'_> {
    fn take(&mut self, n: usize) -> io::Result<&[u8]> {
        if self.buf.len() < n {
            return Err(io::Error::new(io::ErrorKind::UnexpectedEof, "truncated checkpoint"));
        }
        let (head, rest) = self.buf.split_at(n);
        self.buf = rest;
        Ok(head)
    }

    fn u64(&mut self) -> io::Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn usize(&mut self) -> io::Result<usize> {
        usize::try_from(self.u64()?).map_err(|_| io::Error::new(io::ErrorKind::InvalidData, "count overflows usize"))
    }

    fn f64(&mut self) -> io::Result<f64> {
        Ok(f64::from_bits(self.u64()?))
    }

    fn values(&mut self, rows: usize, cols: usize) -> io::Result<Matrix> {
        let count = rows
            .checked_mul(cols)
            .filter(|&c| c.checked_mul(8).is_some_and(|b| b <= self.buf.len()))
            .ok_or_else(|| io::Error::new(io::ErrorKind::UnexpectedEof, "truncated checkpoint"))?;
        let bytes = self.take(count * 8)?;
        let data = bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect();
        Matrix::from_vec(rows, cols, data).map_err(|e| io::Error::new(io::ErrorKind::InvalidData, e.to_string()))
    }

    fn matrix(&mut self) -> io::Result<Matrix> {
        let rows = self.usize()?;
        let cols = self.usize()?;
        self.values(rows, cols)
    }

    fn state(&mut self) -> io::Result<EmbeddingState> {
        let users = self.matrix()?;
        let items = self.matrix()?;
        EmbeddingState::new(users, items).map_err(|e| io::Error::new(io::ErrorKind::InvalidData, e.to_string()))
    }

    fn mask(&mut self) -> io::Result<EdgeMask> {
        let n = self.usize()?;
        let bytes = self.take(n)?;
        if bytes.iter().any(|&b| b > 1) {
            return Err(io::Error::new(io::ErrorKind::InvalidData, "mask byte is not 0 or 1"));
        }
        Ok(EdgeMask::new(bytes.iter().map(|&b| b == 1).collect()))
    }
}

fn format_error(path: &Path, e: io::Error) -> Error {
    Error::Format {
        path: path.to_path_buf(),
        message: e.to_string(),
    }
}

/// Serialize the two tables in the checkpoint layout.
pub fn encode_embeddings(state: &EmbeddingState) -> Vec<u8> {
    let mut enc = Encoder { out: Vec::new() };
    let header = [
        EMBEDDING_MAGIC,
        FORMAT_VERSION,
        state.user_count() as u64,
        state.item_count() as u64,
        state.dim() as u64,
    ];
    for h in header {
        enc.u64(h).expect("writing to a Vec");
    }
    enc.values(&state.users).expect("writing to a Vec");
    enc.values(&state.items).expect("writing to a Vec");
    enc.out
}

/// Parse the checkpoint layout. `path` is used only for error messages.
pub fn decode_embeddings(bytes: &[u8], path: &Path) -> Result<EmbeddingState> {
    let mut dec = Decoder { buf: bytes };
    let read = |dec: &mut Decoder| -> io::Result<EmbeddingState> {
        if dec.u64()? != EMBEDDING_MAGIC {
            return Err(io::Error::new(io::ErrorKind::InvalidData, "not an embedding checkpoint (bad magic)"));
        }
        let version = dec.u64()?;
        if version != FORMAT_VERSION {
            return Err(io::Error::new(io::ErrorKind::InvalidData, format!("unsupported version {version}")));
        }
        let (m, n, d) = (dec.usize()?, dec.usize()?, dec.usize()?);
        let users = dec.values(m, d)?;
        let items = dec.values(n, d)?;
        if !dec.buf.is_empty() {
            return Err(io::Error::new(io::ErrorKind::InvalidData, "trailing bytes after the item table"));
        }
        EmbeddingState::new(users, items).map_err(|e| io::Error::new(io::ErrorKind::InvalidData, e.to_string()))
    };
    read(&mut dec).map_err(|e| format_error(path, e))
}

pub fn save_embeddings(path: &Path, state: &EmbeddingState) -> Result<()> {
    fs::write(path, encode_embeddings(state)).map_err(|e| Error::io(format!("writing {}", path.display()), e))
}

pub fn load_embeddings(path: &Path) -> Result<EmbeddingState> {
    let bytes = fs::read(path).map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
    decode_embeddings(&bytes, path)
}

/// Companion text file of a checkpoint.
#[derive(Debug, Clone, PartialEq)]
pub struct CheckpointMeta {
    pub config_hash: String,
    pub epoch: usize,
    /// Validation Recall@20 of the saved state, if validation ran.
    pub metric: Option<f64>,
    pub layers: usize,
}

impl CheckpointMeta {
    pub fn to_text(&self) -> String {
        let metric = self.metric.map_or_else(|| "nan".to_string(), |m| m.to_string());
        format!(
            "config_hash = {}\nepoch = {}\nval_recall@20 = {}\nlayers = {}\n",
            self.config_hash, self.epoch, metric, self.layers
        )
    }

    pub fn parse(text: &str, path: &Path) -> Result<Self> {
        let kv = parse_key_values(text, path)?;
        let get = |k: &str| {
            kv.get(k).ok_or_else(|| Error::Format {
                path: path.to_path_buf(),
                message: format!("missing key '{k}'"),
            })
        };
        let bad = |k: &str| Error::Format {
            path: path.to_path_buf(),
            message: format!("bad value for '{k}'"),
        };
        let metric: f64 = get("val_recall@20")?.parse().map_err(|_| bad("val_recall@20"))?;
        Ok(CheckpointMeta {
            config_hash: get("config_hash")?.clone(),
            epoch: get("epoch")?.parse().map_err(|_| bad("epoch"))?,
            metric: (!metric.is_nan()).then_some(metric),
            layers: get("layers")?.parse().map_err(|_| bad("layers"))?,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_text()).map_err(|e| Error::io(format!("writing {}", path.display()), e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
        Self::parse(&text, path)
    }
}

fn write_report<W: Write>(enc: &mut Encoder<W>, r: &DenoiseReport) -> io::Result<()> {
    for v in [
        r.social_edges,
        r.social_edges_removed,
        r.interaction_edges,
        r.interaction_edges_removed,
        r.removed_flagged_noise,
        r.flagged_noise,
        r.removed_flagged_social,
        r.flagged_social,
    ] {
        enc.u64(v as u64)?;
    }
    for v in r.pc_histogram.iter().chain(&r.ic_histogram) {
        enc.u64(*v)?;
    }
    Ok(())
}

fn read_report(dec: &mut Decoder) -> io::Result<DenoiseReport> {
    let mut r = DenoiseReport {
        social_edges: dec.usize()?,
        social_edges_removed: dec.usize()?,
        interaction_edges: dec.usize()?,
        interaction_edges_removed: dec.usize()?,
        removed_flagged_noise: dec.usize()?,
        flagged_noise: dec.usize()?,
        removed_flagged_social: dec.usize()?,
        flagged_social: dec.usize()?,
        ..Default::default()
    };
    for b in 0..HISTOGRAM_BINS {
        r.pc_histogram[b] = dec.u64()?;
    }
    for b in 0..HISTOGRAM_BINS {
        r.ic_histogram[b] = dec.u64()?;
    }
    Ok(r)
}

fn write_losses<W: Write>(enc: &mut Encoder<W>, l: &LossBreakdown) -> io::Result<()> {
    for v in [l.bpr, l.cl_interaction, l.cl_social, l.cl_item, l.reg, l.total] {
        enc.f64(v)?;
    }
    Ok(())
}

fn read_losses(dec: &mut Decoder) -> io::Result<LossBreakdown> {
    Ok(LossBreakdown {
        bpr: dec.f64()?,
        cl_interaction: dec.f64()?,
        cl_social: dec.f64()?,
        cl_item: dec.f64()?,
        reg: dec.f64()?,
        total: dec.f64()?,
    })
}

/// Serialize a training session so it can continue bit for bit.
pub fn encode_session(snap: &SessionSnapshot) -> Vec<u8> {
    let mut enc = Encoder { out: Vec::new() };
    let write = |enc: &mut Encoder<Vec<u8>>| -> io::Result<()> {
        enc.u64(SESSION_MAGIC)?;
        enc.u64(FORMAT_VERSION)?;
        let t = &snap.trainer;
        enc.u64(t.epoch as u64)?;
        enc.state(&t.state)?;
        enc.u64(t.optimizer.step)?;
        for m in [&t.optimizer.m_users, &t.optimizer.v_users, &t.optimizer.m_items, &t.optimizer.v_items] {
            enc.matrix(m)?;
        }
        enc.mask(&t.interaction_mask)?;
        enc.u64(snap.since_improvement as u64)?;
        match &snap.best {
            None => enc.u64(0)?,
            Some(b) => {
                enc.u64(1)?;
                enc.u64(b.epoch as u64)?;
                enc.f64(b.metric)?;
                enc.state(&b.state)?;
                enc.mask(&b.interaction_mask)?;
            }
        }
        enc.u64(snap.log.records.len() as u64)?;
        for r in &snap.log.records {
            enc.u64(r.epoch as u64)?;
            write_losses(enc, &r.losses)?;
            write_report(enc, &r.report)?;
            match r.val_recall {
                None => enc.u64(0)?,
                Some(v) => {
                    enc.u64(1)?;
                    enc.f64(v)?;
                }
            }
            enc.f64(r.wall_seconds)?;
        }
        Ok(())
    };
    write(&mut enc).expect("writing to a Vec");
    enc.out
}

pub fn decode_session(bytes: &[u8], path: &Path) -> Result<SessionSnapshot> {
    let mut dec = Decoder { buf: bytes };
    let read = |dec: &mut Decoder| -> io::Result<SessionSnapshot> {
        if dec.u64()? != SESSION_MAGIC {
            return Err(io::Error::new(io::ErrorKind::InvalidData, "not a session snapshot (bad magic)"));
        }
        let version = dec.u64()?;
        if version != FORMAT_VERSION {
            return Err(io::Error::new(io::ErrorKind::InvalidData, format!("unsupported version {version}")));
        }
        let epoch = dec.usize()?;
        let state = dec.state()?;
        let step = dec.u64()?;
        let optimizer = OptimizerState {
            step,
            m_users: dec.matrix()?,
            v_users: dec.matrix()?,
            m_items: dec.matrix()?,
            v_items: dec.matrix()?,
        };
        let interaction_mask = dec.mask()?;
        let since_improvement = dec.usize()?;
        let best = match dec.u64()? {
            0 => None,
            _ => Some(BestCheckpoint {
                epoch: dec.usize()?,
                metric: dec.f64()?,
                state: dec.state()?,
                interaction_mask: dec.mask()?,
            }),
        };
        let count = dec.usize()?;
        let mut records = Vec::with_capacity(count.min(1 << 16));
        for _ in 0..count {
            let epoch = dec.usize()?;
            let losses = read_losses(dec)?;
            let report = read_report(dec)?;
            let val_recall = match dec.u64()? {
                0 => None,
                _ => Some(dec.f64()?),
            };
            records.push(EpochRecord {
                epoch,
                losses,
                report,
                val_recall,
                wall_seconds: dec.f64()?,
            });
        }
        if !dec.buf.is_empty() {
            return Err(io::Error::new(io::ErrorKind::InvalidData, "trailing bytes"));
        }
        Ok(SessionSnapshot {
            trainer: TrainerSnapshot {
                epoch,
                state,
                optimizer,
                interaction_mask,
            },
            best,
            since_improvement,
            log: TrainingLog { records },
        })
    };
    read(&mut dec).map_err(|e| format_error(path, e))
}

pub fn save_session(path: &Path, snap: &SessionSnapshot) -> Result<()> {
    fs::write(path, encode_session(snap)).map_err(|e| Error::io(format!("writing {}", path.display()), e))
}

pub fn load_session(path: &Path) -> Result<SessionSnapshot> {
    let mut bytes = Vec::new();
    fs::File::open(path)
        .and_then(|mut f| f.read_to_end(&mut bytes))
        .map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
    decode_session(&bytes, path)
}

/// Write the kept interaction edges that scoring propagates over.
pub fn save_edges(path: &Path, edges: &[(u32, u32)]) -> Result<()> {
    let body: String = edges.iter().map(|(u, i)| format!("{u} {i}\n")).collect();
    fs::write(path, body).map_err(|e| Error::io(format!("writing {}", path.display()), e))
}

pub fn load_edges(path: &Path) -> Result<Vec<(u32, u32)>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
    let mut out = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let mut it = line.split_whitespace().map(str::parse::<u32>);
        match (it.next(), it.next()) {
            (Some(Ok(u)), Some(Ok(i))) => out.push((u, i)),
            _ => {
                return Err(Error::Parse {
                    path: path.to_path_buf(),
                    line: n + 1,
                    message: format!("expected two integer ids, got '{line}'"),
                })
            }
        }
    }
    Ok(out)
}
