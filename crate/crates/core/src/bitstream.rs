//! Length-counted packed bit sequences and the `TBBS` file format.
//!
//! Bit `i` of a stream lives in byte `i / 8` at bit position `7 - i % 8`
//! (MSB-first). Pad bits after `bit_count` are always zero.

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub const BITSTREAM_MAGIC: &[u8; 4] = b"TBBS";
pub const BITSTREAM_VERSION: u8 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum BitOrder {
    MsbFirst,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Hash)]
pub struct BitStream {
    bit_count: usize,
    payload: Vec<u8>,
}

impl BitStream {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_capacity(bits: usize) -> Self {
        Self {
            bit_count: 0,
            payload: Vec::with_capacity(bits.div_ceil(8)),
        }
    }

    /// Wraps packed bytes. Fails unless `payload.len() == ceil(bit_count / 8)`
    /// and every pad bit is zero.
    pub fn from_bytes(payload: Vec<u8>, bit_count: usize) -> Result<Self> {
        if payload.len() != bit_count.div_ceil(8) {
            return Err(Error::LengthMismatch {
                expected: bit_count.div_ceil(8),
                actual: payload.len(),
            });
        }
        let tail = bit_count % 8;
        if tail != 0 {
            let last = *payload.last().expect("non-empty when tail != 0");
            if last & (0xFFu8 >> tail) != 0 {
                return Err(Error::Format("non-zero pad bits".into()));
            }
        }
        Ok(Self { bit_count, payload })
    }

    /// Whole bytes, eight bits each.
    pub fn from_byte_vec(payload: Vec<u8>) -> Self {
        let bit_count = payload.len() * 8;
        Self { bit_count, payload }
    }

    pub fn from_bools(bits: &[bool]) -> Self {
        bits.iter().copied().collect()
    }

    /// Parses a string of `'0'`/`'1'` characters; whitespace and `_` are ignored.
    pub fn parse_bits(s: &str) -> Result<Self> {
        let mut out = BitStream::new();
        for c in s.chars() {
            match c {
                '0' => out.push(false),
                '1' => out.push(true),
                c if c.is_whitespace() || c == '_' => {}
                c => return Err(Error::Format(format!("invalid bit character {c:?}"))),
            }
        }
        Ok(out)
    }

    pub fn len(&self) -> usize {
        self.bit_count
    }

    pub fn is_empty(&self) -> bool {
        self.bit_count == 0
    }

    pub fn bit_order(&self) -> BitOrder {
        BitOrder::MsbFirst
    }

    pub fn as_bytes(&self) -> &[u8] {
        &self.payload
    }

    pub fn into_bytes(self) -> Vec<u8> {
        self.payload
    }

    #[inline]
    pub fn get(&self, i: usize) -> bool {
        assert!(i < self.bit_count, "bit index {i} out of range {}", self.bit_count);
        (self.payload[i >> 3] >> (7 - (i & 7))) & 1 == 1
    }

    #[inline]
    pub fn push(&mut self, bit: bool) {
        let off = self.bit_count & 7;
        if off == 0 {
            self.payload.push(0);
        }
        if bit {
            *self.payload.last_mut().unwrap() |= 0x80 >> off;
        }
        self.bit_count += 1;
    }

    /// Appends the top `nbits` bits of `word`, most significant first.
    pub fn push_word(&mut self, word: u64, nbits: u32) {
        debug_assert!(nbits <= 64);
        if nbits == 0 {
            return;
        }
        let word = if nbits == 64 { word } else { word & !(u64::MAX >> nbits) };
        let mut remaining = nbits;
        let mut w = word;
        let off = (self.bit_count & 7) as u32;
        if off != 0 {
            let take = (8 - off).min(remaining);
            let byte = (w >> 56) as u8;
            *self.payload.last_mut().unwrap() |= byte >> off;
            w = if take == 64 { 0 } else { w << take };
            remaining -= take;
            self.bit_count += take as usize;
        }
        while remaining >= 8 {
            self.payload.push((w >> 56) as u8);
            w <<= 8;
            remaining -= 8;
            self.bit_count += 8;
        }
        if remaining > 0 {
            self.payload.push((w >> 56) as u8);
            self.bit_count += remaining as usize;
        }
    }

    /// Appends `nbits` bits taken from MSB-first packed words.
    pub fn push_words(&mut self, words: &[u64], nbits: usize) {
        debug_assert!(nbits <= words.len() * 64);
        if self.bit_count & 7 == 0 {
            let full = nbits / 64;
            self.payload.reserve(nbits.div_ceil(8));
            for w in &words[..full] {
                self.payload.extend_from_slice(&w.to_be_bytes());
            }
            self.bit_count += full * 64;
            let rest = (nbits % 64) as u32;
            if rest > 0 {
                self.push_word(words[full], rest);
            }
            return;
        }
        let mut left = nbits;
        for &w in words {
            if left == 0 {
                break;
            }
            let take = left.min(64);
            self.push_word(w, take as u32);
            left -= take;
        }
    }

    pub fn extend_from(&mut self, other: &BitStream) {
        let full = other.bit_count / 8;
        if self.bit_count & 7 == 0 {
            self.payload.extend_from_slice(&other.payload[..full]);
            self.bit_count += full * 8;
        } else {
            for &b in &other.payload[..full] {
                self.push_word((b as u64) << 56, 8);
            }
        }
        let rest = other.bit_count % 8;
        if rest > 0 {
            self.push_word((other.payload[full] as u64) << 56, rest as u32);
        }
    }

    /// The 64 bits starting at `offset`, MSB-first; bits past the end read as zero.
    #[inline]
    pub fn word_at(&self, offset: usize) -> u64 {
        let byte = offset >> 3;
        let shift = (offset & 7) as u32;
        let mut buf = [0u8; 9];
        let end = (byte + 9).min(self.payload.len());
        if byte < end {
            buf[..end - byte].copy_from_slice(&self.payload[byte..end]);
        }
        let hi = u64::from_be_bytes(buf[..8].try_into().unwrap());
        let w = if shift == 0 {
            hi
        } else {
            (hi << shift) | (buf[8] as u64 >> (8 - shift))
        };
        let avail = self.bit_count.saturating_sub(offset);
        if avail >= 64 {
            w
        } else if avail == 0 {
            0
        } else {
            w & !(u64::MAX >> avail)
        }
    }

    /// Fills `out` with `ceil(nbits / 64)` MSB-first words covering
    /// `[offset, offset + nbits)`; bits after `nbits` in the last word are zero.
    pub fn read_words(&self, offset: usize, nbits: usize, out: &mut Vec<u64>) {
        assert!(offset + nbits <= self.bit_count, "bit range out of bounds");
        out.clear();
        let nwords = nbits.div_ceil(64);
        if offset & 7 == 0 {
            let start = offset >> 3;
            let full = nbits / 64;
            out.extend(
                self.payload[start..start + full * 8]
                    .chunks_exact(8)
                    .map(|c| u64::from_be_bytes(c.try_into().unwrap())),
            );
            if full < nwords {
                out.push(self.word_at(offset + full * 64));
            }
        } else {
            out.extend((0..nwords).map(|k| self.word_at(offset + 64 * k)));
        }
        let tail = nbits % 64;
        if tail != 0 {
            let last = out.last_mut().unwrap();
            *last &= !(u64::MAX >> tail);
        }
    }

    pub fn slice(&self, start: usize, len: usize) -> BitStream {
        assert!(start + len <= self.bit_count, "slice out of bounds");
        if start & 7 == 0 {
            let mut payload = self.payload[start / 8..(start + len).div_ceil(8)].to_vec();
            let tail = len % 8;
            if tail != 0 {
                *payload.last_mut().unwrap() &= !(0xFFu8 >> tail);
            }
            return BitStream {
                bit_count: len,
                payload,
            };
        }
        let mut words = Vec::new();
        self.read_words(start, len, &mut words);
        let mut out = BitStream::with_capacity(len);
        out.push_words(&words, len);
        out
    }

    /// Splits into consecutive pieces of `piece_bits`; a short tail is dropped.
    pub fn chunks(&self, piece_bits: usize) -> Vec<BitStream> {
        assert!(piece_bits > 0);
        (0..self.bit_count / piece_bits)
            .map(|k| self.slice(k * piece_bits, piece_bits))
            .collect()
    }

    pub fn iter(&self) -> impl Iterator<Item = bool> + '_ {
        (0..self.bit_count).map(move |i| self.get(i))
    }

    pub fn to_bools(&self) -> Vec<bool> {
        self.iter().collect()
    }

    pub fn count_ones(&self) -> u64 {
        self.payload.iter().map(|b| b.count_ones() as u64).sum()
    }

    /// Bitwise complement of every counted bit.
    pub fn complement(&self) -> BitStream {
        let mut payload: Vec<u8> = self.payload.iter().map(|b| !b).collect();
        let tail = self.bit_count % 8;
        if tail != 0 {
            *payload.last_mut().unwrap() &= !(0xFFu8 >> tail);
        }
        BitStream {
            bit_count: self.bit_count,
            payload,
        }
    }

    pub fn xor(&self, other: &BitStream) -> Result<BitStream> {
        if self.bit_count != other.bit_count {
            return Err(Error::LengthMismatch {
                expected: self.bit_count,
                actual: other.bit_count,
            });
        }
        let payload = self
            .payload
            .iter()
            .zip(&other.payload)
            .map(|(a, b)| a ^ b)
            .collect();
        Ok(BitStream {
            bit_count: self.bit_count,
            payload,
        })
    }

    pub fn write_to<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(BITSTREAM_MAGIC)?;
        w.write_all(&[BITSTREAM_VERSION])?;
        w.write_all(&(self.bit_count as u64).to_le_bytes())?;
        w.write_all(&self.payload)?;
        Ok(())
    }

    pub fn read_from<R: Read>(mut r: R) -> Result<Self> {
        let mut header = [0u8; 13];
        read_exact_or_format(&mut r, &mut header, "bitstream header")?;
        if &header[..4] != BITSTREAM_MAGIC {
            return Err(Error::Format("bad magic, expected TBBS".into()));
        }
        if header[4] != BITSTREAM_VERSION {
            return Err(Error::Format(format!(
                "unsupported bitstream version {}",
                header[4]
            )));
        }
        let bit_count = u64::from_le_bytes(header[5..13].try_into().unwrap());
        let bit_count = usize::try_from(bit_count)
            .map_err(|_| Error::Format("bit count exceeds address space".into()))?;
        let mut payload = vec![0u8; bit_count.div_ceil(8)];
        read_exact_or_format(&mut r, &mut payload, "bitstream payload")?;
        let mut extra = [0u8; 1];
        if r.read(&mut extra)? != 0 {
            return Err(Error::Format("trailing bytes after bitstream payload".into()));
        }
        BitStream::from_bytes(payload, bit_count)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let f = std::fs::File::create(path)?;
        let mut w = std::io::BufWriter::new(f);
        self.write_to(&mut w)?;
        w.flush()?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let f = std::fs::File::open(path)?;
        Self::read_from(std::io::BufReader::new(f))
    }
}

pub(crate) fn read_exact_or_format<R: Read>(r: &mut R, buf: &mut [u8], what: &str) -> Result<()> {
    r.read_exact(buf).map_err(|e| {
        if e.kind() == std::io::ErrorKind::UnexpectedEof {
            Error::Format(format!("truncated {what}"))
        } else {
            Error::Io(e)
        }
    })
}

impl FromIterator<bool> for BitStream {
    fn from_iter<I: IntoIterator<Item = bool>>(iter: I) -> Self {
        let mut out = BitStream::new();
        for b in iter {
            out.push(b);
        }
        out
    }
}

impl std::fmt::Display for BitStream {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        for b in self.iter() {
            f.write_str(if b { "1" } else { "0" })?;
        }
        Ok(())
    }
}
