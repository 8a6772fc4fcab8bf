//! Bit streams and instantaneous codes for natural numbers.
//!
//! Bits are written most-significant first within each byte. Every code in
//! this module encodes a natural number `x >= 0`; γ, δ and ζ<sub>k</sub> are
//! applied to `x + 1` internally, so `0` is always the shortest codeword.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Growable bit buffer.
#[derive(Debug, Default, Clone)]
pub struct BitWriter {
    bytes: Vec<u8>,
    len: u64,
}

impl BitWriter {
    pub fn new() -> Self {
        Self::default()
    }

    /// Number of bits written so far.
    pub fn len(&self) -> u64 {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    #[inline]
    pub fn write_bit(&mut self, bit: bool) {
        let used = (self.len % 8) as u32;
        if used == 0 {
            self.bytes.push(0);
        }
        if bit {
            *self.bytes.last_mut().unwrap() |= 0x80 >> used;
        }
        self.len += 1;
    }

    /// Writes the `width` low bits of `value`, most significant first.
    pub fn write_bits(&mut self, value: u64, width: u32) {
        debug_assert!(width <= 64);
        for i in (0..width).rev() {
            self.write_bit((value >> i) & 1 == 1);
        }
    }

    /// Appends the whole content of another writer.
    pub fn append(&mut self, other: &BitWriter) {
        if self.len.is_multiple_of(8) {
            self.bytes.extend_from_slice(&other.bytes);
            self.len += other.len;
            return;
        }
        let mut reader = BitReader::new(&other.bytes, other.len);
        let mut left = other.len;
        while left >= 32 {
            let chunk = reader.read_bits(32).expect("in bounds");
            self.write_bits(chunk, 32);
            left -= 32;
        }
        let rest = reader.read_bits(left as u32).expect("in bounds");
        self.write_bits(rest, left as u32);
    }

    pub fn into_bytes(self) -> (Vec<u8>, u64) {
        (self.bytes, self.len)
    }
}

/// Bit reader over a byte slice with an explicit bit length.
#[derive(Debug, Clone)]
pub struct BitReader<'a> {
    bytes: &'a [u8],
    len: u64,
    pos: u64,
}

impl<'a> BitReader<'a> {
    pub fn new(bytes: &'a [u8], len: u64) -> Self {
        Self { bytes, len, pos: 0 }
    }

    pub fn position(&self) -> u64 {
        self.pos
    }

    pub fn seek(&mut self, pos: u64) -> Result<()> {
        if pos > self.len {
            return Err(Error::Corrupt(format!(
                "seek to bit {pos} beyond stream of {} bits",
                self.len
            )));
        }
        self.pos = pos;
        Ok(())
    }

    #[inline]
    pub fn read_bit(&mut self) -> Result<bool> {
        if self.pos >= self.len {
            return Err(Error::Corrupt("unexpected end of code stream".into()));
        }
        let byte = self.bytes[(self.pos / 8) as usize];
        let bit = byte & (0x80 >> (self.pos % 8)) != 0;
        self.pos += 1;
        Ok(bit)
    }

    pub fn read_bits(&mut self, width: u32) -> Result<u64> {
        let mut v = 0u64;
        for _ in 0..width {
            v = (v << 1) | self.read_bit()? as u64;
        }
        Ok(v)
    }
}

/// Residual code selector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "code", content = "k", rename_all = "snake_case")]
pub enum Code {
    Gamma,
    Delta,
    Zeta(u32),
}

impl Code {
    pub fn write(self, w: &mut BitWriter, x: u64) {
        match self {
            Code::Gamma => write_gamma(w, x),
            Code::Delta => write_delta(w, x),
            Code::Zeta(k) => write_zeta(w, x, k),
        }
    }

    pub fn read(self, r: &mut BitReader<'_>) -> Result<u64> {
        match self {
            Code::Gamma => read_gamma(r),
            Code::Delta => read_delta(r),
            Code::Zeta(k) => read_zeta(r, k),
        }
    }

    /// Codeword length in bits, without writing.
    pub fn len(self, x: u64) -> u64 {
        match self {
            Code::Gamma => gamma_len(x),
            Code::Delta => delta_len(x),
            Code::Zeta(k) => zeta_len(x, k),
        }
    }
}

impl std::fmt::Display for Code {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Code::Gamma => write!(f, "gamma"),
            Code::Delta => write!(f, "delta"),
            Code::Zeta(k) => write!(f, "zeta{k}"),
        }
    }
}

impl std::str::FromStr for Code {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gamma" => Ok(Code::Gamma),
            "delta" => Ok(Code::Delta),
            _ => match s.strip_prefix("zeta").map(str::parse::<u32>) {
                Some(Ok(k)) if k >= 1 => Ok(Code::Zeta(k)),
                _ => Err(Error::InvalidArgument(format!(
                    "unknown code {s:?} (expected gamma, delta or zetaK with K >= 1)"
                ))),
            },
        }
    }
}

#[inline]
fn bit_length(v: u128) -> u32 {
    128 - v.leading_zeros()
}

pub fn write_unary(w: &mut BitWriter, x: u64) {
    for _ in 0..x {
        w.write_bit(false);
    }
    w.write_bit(true);
}

/// Unary codes are capped at 2^32 zeros when reading.
pub fn read_unary(r: &mut BitReader<'_>) -> Result<u64> {
    let mut zeros = 0u64;
    while !r.read_bit()? {
        zeros += 1;
        if zeros > u32::MAX as u64 {
            return Err(Error::Corrupt("unary run too long".into()));
        }
    }
    Ok(zeros)
}

pub fn unary_len(x: u64) -> u64 {
    x + 1
}

pub fn write_gamma(w: &mut BitWriter, x: u64) {
    let v = x as u128 + 1;
    let l = bit_length(v) - 1;
    write_unary(w, l as u64);
    write_wide(w, v, l);
}

pub fn read_gamma(r: &mut BitReader<'_>) -> Result<u64> {
    let l = read_unary(r)?;
    if l > 64 {
        return Err(Error::Corrupt("gamma prefix out of range".into()));
    }
    let v = (1u128 << l) | read_wide(r, l as u32)?;
    to_natural(v - 1)
}

pub fn gamma_len(x: u64) -> u64 {
    let l = (bit_length(x as u128 + 1) - 1) as u64;
    2 * l + 1
}

pub fn write_delta(w: &mut BitWriter, x: u64) {
    let v = x as u128 + 1;
    let l = bit_length(v) - 1;
    write_gamma(w, l as u64);
    write_wide(w, v, l);
}

pub fn read_delta(r: &mut BitReader<'_>) -> Result<u64> {
    let l = read_gamma(r)?;
    if l > 64 {
        return Err(Error::Corrupt("delta prefix out of range".into()));
    }
    let v = (1u128 << l) | read_wide(r, l as u32)?;
    to_natural(v - 1)
}

pub fn delta_len(x: u64) -> u64 {
    let l = (bit_length(x as u128 + 1) - 1) as u64;
    gamma_len(l) + l
}

/// ζ<sub>k</sub>: with `x + 1 ∈ [2^(hk), 2^((h+1)k))`, writes `h` in unary and
/// then `x + 1 − 2^(hk)` in minimal binary over an interval of size
/// `2^((h+1)k) − 2^(hk)`.
pub fn write_zeta(w: &mut BitWriter, x: u64, k: u32) {
    let v = x as u128 + 1;
    let h = (bit_length(v) - 1) / k;
    write_unary(w, h as u64);
    let low = 1u128 << (h * k);
    let size = (1u128 << ((h + 1) * k)) - low;
    write_minimal_binary(w, v - low, size);
}

pub fn read_zeta(r: &mut BitReader<'_>, k: u32) -> Result<u64> {
    let h = read_unary(r)?;
    if (h + 1) * k as u64 > 127 {
        return Err(Error::Corrupt("zeta prefix out of range".into()));
    }
    let h = h as u32;
    let low = 1u128 << (h * k);
    let size = (1u128 << ((h + 1) * k)) - low;
    let v = read_minimal_binary(r, size)? + low;
    to_natural(v - 1)
}

pub fn zeta_len(x: u64, k: u32) -> u64 {
    let v = x as u128 + 1;
    let h = (bit_length(v) - 1) / k;
    let low = 1u128 << (h * k);
    let size = (1u128 << ((h + 1) * k)) - low;
    unary_len(h as u64) + minimal_binary_len(v - low, size)
}

/// Minimal binary code of `v` in `[0, size)`.
fn write_minimal_binary(w: &mut BitWriter, v: u128, size: u128) {
    debug_assert!(v < size);
    let s = bit_length(size - 1);
    let threshold = (1u128 << s) - size;
    if v < threshold {
        write_wide(w, v, s - 1);
    } else {
        write_wide(w, v + threshold, s);
    }
}

fn read_minimal_binary(r: &mut BitReader<'_>, size: u128) -> Result<u128> {
    let s = bit_length(size - 1);
    if s == 0 {
        return Ok(0);
    }
    let threshold = (1u128 << s) - size;
    let v = read_wide(r, s - 1)?;
    if v < threshold {
        Ok(v)
    } else {
        Ok(((v << 1) | r.read_bit()? as u128) - threshold)
    }
}

fn minimal_binary_len(v: u128, size: u128) -> u64 {
    let s = bit_length(size - 1);
    let threshold = (1u128 << s) - size;
    if v < threshold {
        (s - 1) as u64
    } else {
        s as u64
    }
}

fn write_wide(w: &mut BitWriter, v: u128, width: u32) {
    if width > 64 {
        w.write_bits((v >> 64) as u64, width - 64);
        w.write_bits(v as u64, 64);
    } else {
        w.write_bits(v as u64, width);
    }
}

fn read_wide(r: &mut BitReader<'_>, width: u32) -> Result<u128> {
    if width > 64 {
        let hi = r.read_bits(width - 64)? as u128;
        Ok((hi << 64) | r.read_bits(64)? as u128)
    } else {
        Ok(r.read_bits(width)? as u128)
    }
}

fn to_natural(v: u128) -> Result<u64> {
    u64::try_from(v).map_err(|_| Error::Corrupt("decoded value exceeds 64 bits".into()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn bits_of(f: impl FnOnce(&mut BitWriter)) -> String {
        let mut w = BitWriter::new();
        f(&mut w);
        let (bytes, len) = w.into_bytes();
        let mut r = BitReader::new(&bytes, len);
        (0..len)
            .map(|_| if r.read_bit().unwrap() { '1' } else { '0' })
            .collect()
    }

    #[test]
    fn gamma_codewords() {
        assert_eq!(bits_of(|w| write_gamma(w, 0)), "1");
        assert_eq!(bits_of(|w| write_gamma(w, 1)), "010");
        assert_eq!(bits_of(|w| write_gamma(w, 2)), "011");
        assert_eq!(bits_of(|w| write_gamma(w, 6)), "00111");
    }

    #[test]
    fn delta_codewords() {
        assert_eq!(bits_of(|w| write_delta(w, 0)), "1");
        assert_eq!(bits_of(|w| write_delta(w, 1)), "0100");
        assert_eq!(bits_of(|w| write_delta(w, 7)), "00100000");
    }

    #[test]
    fn zeta3_codewords() {
        // x + 1 in [1, 8): unary "1" then minimal binary over 7 values
        assert_eq!(bits_of(|w| write_zeta(w, 0, 3)), "100");
        assert_eq!(bits_of(|w| write_zeta(w, 1, 3)), "1010");
        assert_eq!(bits_of(|w| write_zeta(w, 6, 3)), "1111");
        // x + 1 = 8 opens the second bucket [8, 64), 56 values, 6 bits
        assert_eq!(bits_of(|w| write_zeta(w, 7, 3)), "0100000");
    }

    #[test]
    fn zeta1_is_gamma() {
        for x in 0..200 {
            assert_eq!(
                bits_of(|w| write_zeta(w, x, 1)),
                bits_of(|w| write_gamma(w, x))
            );
        }
    }

    #[test]
    fn extremes_round_trip() {
        for code in [Code::Gamma, Code::Delta, Code::Zeta(3), Code::Zeta(7)] {
            let values = [0, 1, u32::MAX as u64, u64::MAX - 1, u64::MAX];
            let mut w = BitWriter::new();
            for &v in &values {
                code.write(&mut w, v);
            }
            let (bytes, len) = w.into_bytes();
            let mut r = BitReader::new(&bytes, len);
            for &v in &values {
                assert_eq!(code.read(&mut r).unwrap(), v, "{code}");
            }
        }
    }

    #[test]
    fn truncated_stream_is_corrupt() {
        let mut w = BitWriter::new();
        write_gamma(&mut w, 1000);
        let (bytes, len) = w.into_bytes();
        let mut r = BitReader::new(&bytes, len - 1);
        assert!(matches!(read_gamma(&mut r), Err(Error::Corrupt(_))));
    }

    #[test]
    fn parse_codes() {
        assert_eq!("zeta3".parse::<Code>().unwrap(), Code::Zeta(3));
        assert_eq!("gamma".parse::<Code>().unwrap(), Code::Gamma);
        assert!("zeta0".parse::<Code>().is_err());
        assert!("rice".parse::<Code>().is_err());
    }

    proptest! {
        #[test]
        fn codes_round_trip_and_lengths(values in prop::collection::vec(any::<u64>().prop_map(|v| v >> (v % 64)), 1..64), k in 1u32..8) {
            for code in [Code::Gamma, Code::Delta, Code::Zeta(k)] {
                let mut w = BitWriter::new();
                let mut expected_len = 0;
                for &v in &values {
                    code.write(&mut w, v);
                    expected_len += code.len(v);
                }
                prop_assert_eq!(w.len(), expected_len);
                let (bytes, len) = w.into_bytes();
                let mut r = BitReader::new(&bytes, len);
                for &v in &values {
                    prop_assert_eq!(code.read(&mut r).unwrap(), v);
                }
                prop_assert_eq!(r.position(), len);
            }
        }

        #[test]
        fn append_concatenates(a in prop::collection::vec(any::<bool>(), 0..100), b in prop::collection::vec(any::<bool>(), 0..100)) {
            let mut wa = BitWriter::new();
            a.iter().for_each(|&x| wa.write_bit(x));
            let mut wb = BitWriter::new();
            b.iter().for_each(|&x| wb.write_bit(x));
            wa.append(&wb);
            let (bytes, len) = wa.into_bytes();
            let mut r = BitReader::new(&bytes, len);
            let out: Vec<bool> = (0..len).map(|_| r.read_bit().unwrap()).collect();
            let expected: Vec<bool> = a.iter().chain(b.iter()).copied().collect();
            prop_assert_eq!(out, expected);
        }
    }
}
