//! `TBQR` raw sample files: a fixed 28-byte little-endian header followed by
//! channel-interleaved ADC codes (one byte per code up to 8 bits, otherwise
//! a little-endian u16).
//!
//! ```text
//! 0  magic "TBQR"        4  version u8     5  channels u8
//! 6  bits u8             7  reserved u8    8  sample_rate_hz u32
//! 12 full_scale_mv f64   20 samples per channel u64
//! ```

use std::io::{Read, Write};
use std::path::Path;

use super::{AdcConfig, SampleBlock};
use crate::bitstream::read_exact_or_format;
use crate::{Error, Result};

pub const RAW_MAGIC: &[u8; 4] = b"TBQR";
pub const RAW_VERSION: u8 = 1;
const HEADER_LEN: usize = 28;

#[derive(Clone, Debug, PartialEq)]
pub struct RawSampleFile {
    pub adc: AdcConfig,
    pub channels: Vec<Vec<u16>>,
}

impl RawSampleFile {
    pub fn new(adc: AdcConfig, channels: Vec<Vec<u16>>) -> Result<Self> {
        adc.validate()?;
        if channels.is_empty() || channels.len() > u8::MAX as usize {
            return Err(Error::domain("channel count must lie in 1..=255"));
        }
        let n = channels[0].len();
        for ch in &channels {
            if ch.len() != n {
                return Err(Error::LengthMismatch { expected: n, actual: ch.len() });
            }
            if ch.iter().any(|&c| c as u32 >= adc.levels()) {
                return Err(Error::domain("code exceeds ADC range"));
            }
        }
        Ok(Self { adc, channels })
    }

    pub fn from_blocks(blocks: &[SampleBlock]) -> Result<Self> {
        let first = blocks.first().ok_or(Error::Empty)?;
        if blocks.iter().any(|b| b.adc != first.adc) {
            return Err(Error::domain("channels were digitized with different ADC settings"));
        }
        Self::new(first.adc.clone(), blocks.iter().map(|b| b.codes.clone()).collect())
    }

    pub fn samples_per_channel(&self) -> usize {
        self.channels[0].len()
    }

    pub fn block(&self, channel: usize) -> Result<SampleBlock> {
        let codes = self
            .channels
            .get(channel)
            .ok_or_else(|| Error::domain(format!("no channel {channel}")))?
            .clone();
        Ok(SampleBlock { codes, adc: self.adc.clone() })
    }

    pub fn write_to<W: Write>(&self, mut w: W) -> Result<()> {
        let rate = self.adc.sample_rate_hz;
        if rate.fract() != 0.0 || rate > u32::MAX as f64 {
            return Err(Error::domain("sample rate must be an integer number of Hz below 2^32"));
        }
        let mut header = Vec::with_capacity(HEADER_LEN);
        header.extend_from_slice(RAW_MAGIC);
        header.extend_from_slice(&[RAW_VERSION, self.channels.len() as u8, self.adc.bits as u8, 0]);
        header.extend_from_slice(&(rate as u32).to_le_bytes());
        header.extend_from_slice(&self.adc.full_scale_mv.to_le_bytes());
        header.extend_from_slice(&(self.samples_per_channel() as u64).to_le_bytes());
        w.write_all(&header)?;

        let wide = self.adc.bits > 8;
        let n = self.samples_per_channel();
        let mut buf = Vec::with_capacity(64 * 1024);
        for i in 0..n {
            for ch in &self.channels {
                if wide {
                    buf.extend_from_slice(&ch[i].to_le_bytes());
                } else {
                    buf.push(ch[i] as u8);
                }
            }
            if buf.len() >= 60 * 1024 {
                w.write_all(&buf)?;
                buf.clear();
            }
        }
        w.write_all(&buf)?;
        Ok(())
    }

    pub fn read_from<R: Read>(mut r: R) -> Result<Self> {
        let mut header = [0u8; HEADER_LEN];
        read_exact_or_format(&mut r, &mut header, "raw sample header")?;
        if &header[..4] != RAW_MAGIC {
            return Err(Error::Format("bad magic, expected TBQR".into()));
        }
        if header[4] != RAW_VERSION {
            return Err(Error::Format(format!("unsupported raw file version {}", header[4])));
        }
        let nch = header[5] as usize;
        let bits = header[6] as u32;
        let rate = u32::from_le_bytes(header[8..12].try_into().unwrap());
        let full_scale = f64::from_le_bytes(header[12..20].try_into().unwrap());
        let n = u64::from_le_bytes(header[20..28].try_into().unwrap());
        let adc = AdcConfig { bits, full_scale_mv: full_scale, sample_rate_hz: rate as f64 };
        adc.validate().map_err(|e| Error::Format(format!("invalid header: {e}")))?;
        if nch == 0 {
            return Err(Error::Format("invalid header: zero channels".into()));
        }
        let width = if bits > 8 { 2 } else { 1 };
        let total = (n as usize)
            .checked_mul(nch * width)
            .ok_or_else(|| Error::Format("sample count overflows".into()))?;
        let mut body = vec![0u8; total];
        read_exact_or_format(&mut r, &mut body, "raw sample data")?;
        let mut channels = vec![Vec::with_capacity(n as usize); nch];
        if width == 1 {
            for frame in body.chunks_exact(nch) {
                for (ch, &b) in channels.iter_mut().zip(frame) {
                    ch.push(b as u16);
                }
            }
        } else {
            for frame in body.chunks_exact(2 * nch) {
                for (ch, c) in channels.iter_mut().zip(frame.chunks_exact(2)) {
                    ch.push(u16::from_le_bytes([c[0], c[1]]));
                }
            }
        }
        Self::new(adc, channels).map_err(|e| Error::Format(e.to_string()))
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
        self.write_to(&mut w)?;
        w.flush()?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::read_from(std::io::BufReader::new(std::fs::File::open(path)?))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn layout_and_round_trip() {
        let adc = AdcConfig::default();
        let file = RawSampleFile::new(adc, vec![vec![1, 2, 3], vec![250, 251, 252]]).unwrap();
        let mut buf = Vec::new();
        file.write_to(&mut buf).unwrap();
        assert_eq!(buf.len(), HEADER_LEN + 6);
        assert_eq!(&buf[..4], b"TBQR");
        assert_eq!(buf[5], 2);
        assert_eq!(buf[6], 8);
        assert_eq!(u32::from_le_bytes(buf[8..12].try_into().unwrap()), 10_000_000);
        assert_eq!(&buf[HEADER_LEN..], &[1, 250, 2, 251, 3, 252]);
        assert_eq!(RawSampleFile::read_from(&buf[..]).unwrap(), file);
    }

    #[test]
    fn wide_codes_use_two_bytes() {
        let adc = AdcConfig { bits: 12, ..Default::default() };
        let file = RawSampleFile::new(adc, vec![vec![0x0ABC], vec![0x0123]]).unwrap();
        let mut buf = Vec::new();
        file.write_to(&mut buf).unwrap();
        assert_eq!(&buf[HEADER_LEN..], &[0xBC, 0x0A, 0x23, 0x01]);
        assert_eq!(RawSampleFile::read_from(&buf[..]).unwrap(), file);
    }

    #[test]
    fn truncated_and_corrupt_files() {
        let file = RawSampleFile::new(AdcConfig::default(), vec![vec![7; 10]]).unwrap();
        let mut buf = Vec::new();
        file.write_to(&mut buf).unwrap();
        assert!(matches!(RawSampleFile::read_from(&buf[..buf.len() - 1]), Err(Error::Format(_))));
        assert!(matches!(RawSampleFile::read_from(&buf[..10]), Err(Error::Format(_))));
        let mut bad = buf.clone();
        bad[0] = b'X';
        assert!(matches!(RawSampleFile::read_from(&bad[..]), Err(Error::Format(_))));
    }
}
