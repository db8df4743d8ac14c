use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Bits of `index`, most significant first.
pub fn index_to_bits(index: usize, width: usize) -> Vec<u8> {
    (0..width).map(|i| ((index >> (width - 1 - i)) & 1) as u8).collect()
}

pub fn bits_to_index(bits: &[u8]) -> usize {
    bits.iter().fold(0, |acc, &b| (acc << 1) | b as usize)
}

/// Equidistant binning of `[-1, 1]` channels into binary codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BinaryCode {
    pub bits_per_channel: usize,
    pub channels: usize,
}

impl BinaryCode {
    pub fn new(bits_per_channel: usize, channels: usize) -> Result<Self> {
        if bits_per_channel == 0 || bits_per_channel > 31 {
            return Err(Error::config(format!("bits per channel {bits_per_channel} outside 1..=31")));
        }
        Ok(BinaryCode { bits_per_channel, channels })
    }

    pub fn total_bits(&self) -> usize {
        self.bits_per_channel * self.channels
    }

    fn bins(&self) -> usize {
        1 << self.bits_per_channel
    }

    /// Bin index of `value` and whether it had to be clamped into range.
    pub fn bin(&self, value: f64) -> Result<(usize, bool)> {
        if value.is_nan() {
            return Err(Error::config("cannot encode NaN"));
        }
        let clamped = !(-1.0..=1.0).contains(&value);
        let v = value.clamp(-1.0, 1.0);
        let bins = self.bins();
        let raw = ((v + 1.0) / 2.0 * bins as f64).floor() as usize;
        Ok((raw.min(bins - 1), clamped))
    }

    pub fn bin_center(&self, bin: usize) -> f64 {
        -1.0 + (bin as f64 + 0.5) * 2.0 / self.bins() as f64
    }

    /// Encodes one value per channel; returns the bits and the number of
    /// values that were clamped.
    pub fn encode(&self, values: &[f64]) -> Result<(Vec<u8>, usize)> {
        if values.len() != self.channels {
            return Err(Error::config(format!("expected {} channels, got {}", self.channels, values.len())));
        }
        let mut bits = Vec::with_capacity(self.total_bits());
        let mut clamped = 0;
        for &v in values {
            let (bin, c) = self.bin(v)?;
            clamped += usize::from(c);
            bits.extend(index_to_bits(bin, self.bits_per_channel));
        }
        if clamped > 0 {
            log::warn!("{clamped} value(s) outside [-1, 1] clamped during encoding");
        }
        Ok((bits, clamped))
    }

    pub fn decode(&self, bits: &[u8]) -> Result<Vec<f64>> {
        if bits.len() != self.total_bits() {
            return Err(Error::config(format!("expected {} bits, got {}", self.total_bits(), bits.len())));
        }
        Ok(bits.chunks(self.bits_per_channel).map(|c| self.bin_center(bits_to_index(c))).collect())
    }
}
