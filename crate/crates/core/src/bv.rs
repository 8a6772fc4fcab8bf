//! BV-style compressed adjacency lists.
//!
//! Each node record is, in order:
//!
//! 1. outdegree `d` (γ); nothing else follows when `d = 0`;
//! 2. if `window > 0`, the reference `r ∈ [0, min(window, x)]` (unary);
//! 3. if `r > 0`, copy blocks against the list of `x − r`: block count `b`
//!    (γ), then `b` run lengths (γ; the first as is, the others minus one).
//!    Runs alternate copied/skipped starting with copied, and the elements
//!    after the last explicit run are copied iff `b` is even;
//! 4. if `min_interval > 0` and some successors are not copied, the interval
//!    count (γ) and for each interval its left extreme (γ; the first folded
//!    against `x`, the others as `left − previous_right − 2`) and its length
//!    minus `min_interval` (γ);
//! 5. the remaining residual successors with the residual code: the first
//!    folded against `x`, the others as `s_i − s_{i−1} − 1`.
//!
//! Folding maps successor `s` of node `x` to `2(s − x) − 1` when `s > x` and
//! to `2(x − s)` otherwise.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::codes::{self, BitReader, BitWriter, Code};
use crate::error::{Error, Result};
use crate::graph::Graph;

pub const MAGIC: &[u8; 4] = b"HBG1";
pub const ENDIAN_TAG: u32 = 0x0A0B_0C0D;
pub const FORMAT_VERSION: u32 = 1;
pub const HEADER_BYTES: usize = 64;

const CHUNK: usize = 4096;

/// Compression parameters, recorded in every file header.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CodecConfig {
    /// Copy window; 0 disables referencing.
    pub window: usize,
    /// Minimum interval length; 0 disables intervalisation.
    pub min_interval: usize,
    pub residual_code: Code,
}

impl Default for CodecConfig {
    fn default() -> Self {
        Self {
            window: 7,
            min_interval: 4,
            residual_code: Code::Zeta(3),
        }
    }
}

impl CodecConfig {
    pub fn validate(&self) -> Result<()> {
        if self.min_interval == 1 {
            return Err(Error::InvalidArgument(
                "min_interval must be 0 (disabled) or at least 2".into(),
            ));
        }
        if let Code::Zeta(k) = self.residual_code {
            if !(1..=32).contains(&k) {
                return Err(Error::InvalidArgument(format!(
                    "zeta shrinking parameter {k} outside [1, 32]"
                )));
            }
        }
        if self.window > u32::MAX as usize || self.min_interval > u32::MAX as usize {
            return Err(Error::InvalidArgument("codec parameter too large".into()));
        }
        Ok(())
    }
}

#[inline]
fn fold(s: usize, x: usize) -> u64 {
    if s > x {
        2 * (s - x) as u64 - 1
    } else {
        2 * (x - s) as u64
    }
}

#[inline]
fn unfold(v: u64, x: usize) -> Result<usize> {
    let out = if v % 2 == 1 {
        (x as u64).checked_add(v.div_ceil(2))
    } else {
        (x as u64).checked_sub(v / 2)
    };
    out.and_then(|s| usize::try_from(s).ok())
        .ok_or_else(|| Error::Corrupt(format!("folded value {v} out of range for node {x}")))
}

/// How the arcs of a graph were represented by the encoder.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EncodeStats {
    pub bits: u64,
    pub arcs: u64,
    pub copied: u64,
    pub intervalised: u64,
    pub residual: u64,
}

impl EncodeStats {
    pub fn bits_per_arc(&self) -> f64 {
        if self.arcs == 0 {
            0.0
        } else {
            self.bits as f64 / self.arcs as f64
        }
    }

    /// Fraction of arcs represented by copying.
    pub fn copy_fraction(&self) -> f64 {
        if self.arcs == 0 {
            0.0
        } else {
            self.copied as f64 / self.arcs as f64
        }
    }

    fn add(&mut self, o: &EncodeStats) {
        self.bits += o.bits;
        self.arcs += o.arcs;
        self.copied += o.copied;
        self.intervalised += o.intervalised;
        self.residual += o.residual;
    }
}

/// A compressed graph: header fields, per-node bit offsets and the code
/// stream. Immutable once built.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CompressedGraph {
    num_nodes: usize,
    num_arcs: usize,
    symmetric: bool,
    cfg: CodecConfig,
    offsets: Vec<u64>,
    stream: Vec<u8>,
    stream_bits: u64,
}

/// Writes one node record; returns counts of (copied, intervalised, residual).
fn write_record(
    w: &mut BitWriter,
    x: usize,
    succ: &[usize],
    reference: Option<(usize, &[usize])>,
    cfg: &CodecConfig,
) -> (u64, u64, u64) {
    codes::write_gamma(w, succ.len() as u64);
    if succ.is_empty() {
        return (0, 0, 0);
    }
    if cfg.window > 0 {
        codes::write_unary(w, reference.map_or(0, |(r, _)| r) as u64);
    }

    let mut extras: Vec<usize> = Vec::with_capacity(succ.len());
    let mut copied = 0u64;
    if let Some((_, ref_list)) = reference {
        let mut runs = Vec::new();
        let mut copying = true;
        let mut run = 0u64;
        let mut j = 0;
        for &v in ref_list {
            while j < succ.len() && succ[j] < v {
                extras.push(succ[j]);
                j += 1;
            }
            let present = j < succ.len() && succ[j] == v;
            if present {
                j += 1;
                copied += 1;
            }
            if present == copying {
                run += 1;
            } else {
                runs.push(run);
                copying = !copying;
                run = 1;
            }
        }
        extras.extend_from_slice(&succ[j..]);
        // the last run is implied by the parity of the block count
        codes::write_gamma(w, runs.len() as u64);
        for (i, &len) in runs.iter().enumerate() {
            codes::write_gamma(w, if i == 0 { len } else { len - 1 });
        }
    } else {
        extras.extend_from_slice(succ);
    }

    let mut intervalised = 0u64;
    let residuals: Vec<usize> = if cfg.min_interval > 0 && !extras.is_empty() {
        let mut intervals = Vec::new();
        let mut rest = Vec::new();
        let mut i = 0;
        while i < extras.len() {
            let mut j = i + 1;
            while j < extras.len() && extras[j] == extras[j - 1] + 1 {
                j += 1;
            }
            if j - i >= cfg.min_interval {
                intervals.push((extras[i], j - i));
            } else {
                rest.extend_from_slice(&extras[i..j]);
            }
            i = j;
        }
        codes::write_gamma(w, intervals.len() as u64);
        let mut prev_right = 0;
        for (k, &(left, len)) in intervals.iter().enumerate() {
            if k == 0 {
                codes::write_gamma(w, fold(left, x));
            } else {
                codes::write_gamma(w, (left - prev_right - 2) as u64);
            }
            codes::write_gamma(w, (len - cfg.min_interval) as u64);
            prev_right = left + len - 1;
            intervalised += len as u64;
        }
        rest
    } else {
        extras
    };

    let code = cfg.residual_code;
    for (k, &s) in residuals.iter().enumerate() {
        if k == 0 {
            code.write(w, fold(s, x));
        } else {
            code.write(w, (s - residuals[k - 1] - 1) as u64);
        }
    }
    (copied, intervalised, residuals.len() as u64)
}

/// Encodes node `x` choosing the cheapest reference in the window; ties go
/// to the closest reference, and no reference wins over any copy.
fn encode_node(g: &Graph, x: usize, cfg: &CodecConfig, out: &mut BitWriter) -> EncodeStats {
    let succ = g.successors(x);
    let mut best = BitWriter::new();
    let mut best_counts = write_record(&mut best, x, succ, None, cfg);
    if !succ.is_empty() {
        for r in 1..=cfg.window.min(x) {
            let ref_list = g.successors(x - r);
            if ref_list.is_empty() {
                continue;
            }
            let mut trial = BitWriter::new();
            let counts = write_record(&mut trial, x, succ, Some((r, ref_list)), cfg);
            if trial.len() < best.len() {
                best = trial;
                best_counts = counts;
            }
        }
    }
    out.append(&best);
    EncodeStats {
        bits: best.len(),
        arcs: succ.len() as u64,
        copied: best_counts.0,
        intervalised: best_counts.1,
        residual: best_counts.2,
    }
}

/// Compresses `g`. Disjoint node ranges are encoded in parallel.
pub fn encode(g: &Graph, cfg: CodecConfig) -> Result<(CompressedGraph, EncodeStats)> {
    cfg.validate()?;
    let n = g.num_nodes();
    let chunks: Vec<(BitWriter, Vec<u64>, EncodeStats)> = (0..n.div_ceil(CHUNK))
        .into_par_iter()
        .map(|c| {
            let mut w = BitWriter::new();
            let mut offs = Vec::new();
            let mut stats = EncodeStats::default();
            for x in c * CHUNK..((c + 1) * CHUNK).min(n) {
                offs.push(w.len());
                stats.add(&encode_node(g, x, &cfg, &mut w));
            }
            (w, offs, stats)
        })
        .collect();

    let mut stream = BitWriter::new();
    let mut offsets = Vec::with_capacity(n + 1);
    let mut stats = EncodeStats::default();
    for (w, offs, s) in &chunks {
        let base = stream.len();
        offsets.extend(offs.iter().map(|o| base + o));
        stream.append(w);
        stats.add(s);
    }
    offsets.push(stream.len());
    let (stream, stream_bits) = stream.into_bytes();
    Ok((
        CompressedGraph {
            num_nodes: n,
            num_arcs: g.num_arcs(),
            symmetric: g.is_symmetric(),
            cfg,
            offsets,
            stream,
            stream_bits,
        },
        stats,
    ))
}

impl CompressedGraph {
    pub fn num_nodes(&self) -> usize {
        self.num_nodes
    }

    pub fn num_arcs(&self) -> usize {
        self.num_arcs
    }

    pub fn is_symmetric(&self) -> bool {
        self.symmetric
    }

    pub fn config(&self) -> &CodecConfig {
        &self.cfg
    }

    /// Size of the code stream in bits, offsets excluded.
    pub fn stream_bits(&self) -> u64 {
        self.stream_bits
    }

    pub fn bits_per_arc(&self) -> f64 {
        if self.num_arcs == 0 {
            0.0
        } else {
            self.stream_bits as f64 / self.num_arcs as f64
        }
    }

    fn reader_at(&self, x: usize) -> Result<BitReader<'_>> {
        let mut r = BitReader::new(&self.stream, self.stream_bits);
        r.seek(self.offsets[x])?;
        Ok(r)
    }

    fn reference_of(&self, x: usize) -> Result<usize> {
        let mut r = self.reader_at(x)?;
        let d = codes::read_gamma(&mut r)?;
        if d == 0 || self.cfg.window == 0 {
            return Ok(0);
        }
        let reference = codes::read_unary(&mut r)? as usize;
        if reference > self.cfg.window.min(x) {
            return Err(Error::Corrupt(format!(
                "node {x} references {reference} nodes back (window {})",
                self.cfg.window
            )));
        }
        Ok(reference)
    }

    /// Decodes the record of `x`; `ref_list` must be the list of the node it
    /// references, if any.
    fn decode_record(&self, x: usize, ref_list: Option<&[usize]>) -> Result<Vec<usize>> {
        let n = self.num_nodes;
        let corrupt = |what: &str| Error::Corrupt(format!("node {x}: {what}"));
        let mut r = self.reader_at(x)?;
        let d = codes::read_gamma(&mut r)? as usize;
        if d > n {
            return Err(corrupt("outdegree exceeds node count"));
        }
        if d == 0 {
            return Ok(Vec::new());
        }
        let mut out = Vec::with_capacity(d);
        let reference = if self.cfg.window > 0 {
            codes::read_unary(&mut r)? as usize
        } else {
            0
        };
        if reference > 0 {
            let ref_list = ref_list.ok_or_else(|| corrupt("missing reference list"))?;
            let blocks = codes::read_gamma(&mut r)? as usize;
            if blocks > ref_list.len() {
                return Err(corrupt("too many copy blocks"));
            }
            let mut pos = 0usize;
            for b in 0..blocks {
                let len = codes::read_gamma(&mut r)? as usize + usize::from(b > 0);
                let end = pos
                    .checked_add(len)
                    .filter(|&e| e <= ref_list.len())
                    .ok_or_else(|| corrupt("copy block exceeds reference list"))?;
                if b % 2 == 0 {
                    out.extend_from_slice(&ref_list[pos..end]);
                }
                pos = end;
            }
            if blocks.is_multiple_of(2) {
                out.extend_from_slice(&ref_list[pos..]);
            }
            if out.len() > d {
                return Err(corrupt("copied more successors than the outdegree"));
            }
        }

        let mut extras = d - out.len();
        if self.cfg.min_interval > 0 && extras > 0 {
            let count = codes::read_gamma(&mut r)? as usize;
            let mut prev_right = 0usize;
            for k in 0..count {
                let left = if k == 0 {
                    unfold(codes::read_gamma(&mut r)?, x)?
                } else {
                    usize::try_from(codes::read_gamma(&mut r)?)
                        .ok()
                        .and_then(|v| v.checked_add(prev_right + 2))
                        .ok_or_else(|| corrupt("interval out of range"))?
                };
                let len = usize::try_from(codes::read_gamma(&mut r)?)
                    .ok()
                    .and_then(|v| v.checked_add(self.cfg.min_interval))
                    .filter(|&l| l <= extras)
                    .ok_or_else(|| corrupt("interval longer than the outdegree"))?;
                if left.checked_add(len).is_none_or(|e| e > n) {
                    return Err(corrupt("interval out of range"));
                }
                out.extend(left..left + len);
                extras -= len;
                prev_right = left + len - 1;
            }
        }

        let code = self.cfg.residual_code;
        let mut prev = 0usize;
        for k in 0..extras {
            let v = code.read(&mut r)?;
            let s = if k == 0 {
                unfold(v, x)?
            } else {
                usize::try_from(v)
                    .ok()
                    .and_then(|g| g.checked_add(prev + 1))
                    .ok_or_else(|| corrupt("residual gap out of range"))?
            };
            out.push(s);
            prev = s;
        }

        if r.position() != self.offsets[x + 1] {
            return Err(corrupt("record length disagrees with offsets"));
        }
        out.sort_unstable();
        if out.windows(2).any(|w| w[0] >= w[1]) || out.last().is_some_and(|&s| s >= n) {
            return Err(corrupt("successors are not distinct ids in range"));
        }
        Ok(out)
    }

    /// Successor list of `x`, resolving reference chains.
    pub fn decode_node(&self, x: usize) -> Result<Vec<usize>> {
        if x >= self.num_nodes {
            return Err(Error::InvalidArgument(format!(
                "node {x} out of range for {} nodes",
                self.num_nodes
            )));
        }
        let mut chain = vec![x];
        let mut cur = x;
        loop {
            let r = self.reference_of(cur)?;
            if r == 0 {
                break;
            }
            cur -= r;
            chain.push(cur);
        }
        let mut list = self.decode_record(cur, None)?;
        for &y in chain.iter().rev().skip(1) {
            list = self.decode_record(y, Some(&list))?;
        }
        Ok(list)
    }

    fn decode_range(&self, start: usize, end: usize) -> Result<Vec<Vec<usize>>> {
        let mut lists: Vec<Vec<usize>> = Vec::with_capacity(end - start);
        for x in start..end {
            let r = self.reference_of(x)?;
            let list = if r == 0 {
                self.decode_record(x, None)?
            } else if x - r >= start {
                self.decode_record(x, Some(&lists[x - r - start]))?
            } else {
                let ref_list = self.decode_node(x - r)?;
                self.decode_record(x, Some(&ref_list))?
            };
            lists.push(list);
        }
        Ok(lists)
    }

    /// Decodes the whole graph.
    pub fn decode(&self) -> Result<Graph> {
        let n = self.num_nodes;
        let chunks = (0..n.div_ceil(CHUNK))
            .into_par_iter()
            .map(|c| self.decode_range(c * CHUNK, ((c + 1) * CHUNK).min(n)))
            .collect::<Result<Vec<_>>>()?;
        let lists: Vec<Vec<usize>> = chunks.into_iter().flatten().collect();
        let g = Graph::from_lists(lists)?;
        if g.num_arcs() != self.num_arcs {
            return Err(Error::Corrupt(format!(
                "header declares {} arcs, stream holds {}",
                self.num_arcs,
                g.num_arcs()
            )));
        }
        Ok(g)
    }

    /// Serialises header, offsets and stream as described in FORMATS.md.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(HEADER_BYTES + 8 * self.offsets.len() + self.stream.len());
        let (code_tag, k) = match self.cfg.residual_code {
            Code::Gamma => (0u32, 0u32),
            Code::Delta => (1, 0),
            Code::Zeta(k) => (2, k),
        };
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&ENDIAN_TAG.to_le_bytes());
        out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
        out.extend_from_slice(&u32::from(self.symmetric).to_le_bytes());
        out.extend_from_slice(&(self.num_nodes as u64).to_le_bytes());
        out.extend_from_slice(&(self.num_arcs as u64).to_le_bytes());
        out.extend_from_slice(&(self.cfg.window as u32).to_le_bytes());
        out.extend_from_slice(&(self.cfg.min_interval as u32).to_le_bytes());
        out.extend_from_slice(&code_tag.to_le_bytes());
        out.extend_from_slice(&k.to_le_bytes());
        out.extend_from_slice(&self.stream_bits.to_le_bytes());
        out.extend_from_slice(&crc32fast::hash(&self.stream).to_le_bytes());
        out.extend_from_slice(&0u32.to_le_bytes());
        debug_assert_eq!(out.len(), HEADER_BYTES);
        for &o in &self.offsets {
            out.extend_from_slice(&o.to_le_bytes());
        }
        out.extend_from_slice(&self.stream);
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let corrupt = |m: &str| Error::Corrupt(m.to_string());
        if bytes.len() < HEADER_BYTES || &bytes[0..4] != MAGIC {
            return Err(corrupt("missing HBG1 magic"));
        }
        let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().unwrap());
        let u64_at = |o: usize| u64::from_le_bytes(bytes[o..o + 8].try_into().unwrap());
        if u32_at(4) != ENDIAN_TAG {
            return Err(corrupt("endianness tag mismatch"));
        }
        if u32_at(8) != FORMAT_VERSION {
            return Err(corrupt("unsupported format version"));
        }
        let flags = u32_at(12);
        let n = usize::try_from(u64_at(16)).map_err(|_| corrupt("node count overflow"))?;
        let m = usize::try_from(u64_at(24)).map_err(|_| corrupt("arc count overflow"))?;
        let residual_code = match (u32_at(40), u32_at(44)) {
            (0, _) => Code::Gamma,
            (1, _) => Code::Delta,
            (2, k) => Code::Zeta(k),
            _ => return Err(corrupt("unknown residual code")),
        };
        let cfg = CodecConfig {
            window: u32_at(32) as usize,
            min_interval: u32_at(36) as usize,
            residual_code,
        };
        cfg.validate().map_err(|e| Error::Corrupt(e.to_string()))?;
        let stream_bits = u64_at(48);
        let crc = u32_at(56);
        let off_bytes = n
            .checked_add(1)
            .and_then(|v| v.checked_mul(8))
            .ok_or_else(|| corrupt("node count overflow"))?;
        let stream_start = HEADER_BYTES + off_bytes;
        let stream_len = stream_bits.div_ceil(8) as usize;
        if bytes.len() != stream_start.saturating_add(stream_len) {
            return Err(corrupt("file length disagrees with header"));
        }
        let offsets: Vec<u64> = bytes[HEADER_BYTES..stream_start]
            .chunks_exact(8)
            .map(|c| u64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        if offsets.windows(2).any(|w| w[0] > w[1]) || offsets[n] != stream_bits || offsets[0] != 0 {
            return Err(corrupt("offsets are not monotone within the stream"));
        }
        let stream = bytes[stream_start..].to_vec();
        if crc32fast::hash(&stream) != crc {
            return Err(corrupt("stream checksum mismatch"));
        }
        Ok(Self {
            num_nodes: n,
            num_arcs: m,
            symmetric: flags & 1 != 0,
            cfg,
            offsets,
            stream,
            stream_bits,
        })
    }

    pub fn save(&self, path: &std::path::Path) -> Result<()> {
        std::fs::write(path, self.to_bytes())?;
        Ok(())
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        Self::from_bytes(&std::fs::read(path)?)
    }
}
