use std::fmt;
use std::str::FromStr;

use super::DecodeError;

/// Ordered bits, most significant first within each byte or nibble.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct BitString(Vec<bool>);

impl BitString {
    pub fn new() -> Self {
        BitString(Vec::new())
    }

    pub fn from_bools(bits: Vec<bool>) -> Self {
        BitString(bits)
    }

    pub fn from_bytes(bytes: &[u8]) -> Self {
        let mut bits = Vec::with_capacity(bytes.len() * 8);
        for &b in bytes {
            bits.extend((0..8).rev().map(|i| b >> i & 1 == 1));
        }
        BitString(bits)
    }

    pub fn from_nibbles(nibbles: &[u8]) -> Self {
        let mut bits = Vec::with_capacity(nibbles.len() * 4);
        for &n in nibbles {
            bits.extend((0..4).rev().map(|i| n >> i & 1 == 1));
        }
        BitString(bits)
    }

    /// Packs into bytes; a trailing partial byte is padded with zeros.
    pub fn to_bytes(&self) -> Vec<u8> {
        self.0
            .chunks(8)
            .map(|c| {
                c.iter()
                    .enumerate()
                    .fold(0u8, |acc, (i, &b)| acc | (b as u8) << (7 - i))
            })
            .collect()
    }

    /// Packs into nibbles; a trailing partial nibble is padded with zeros.
    pub fn to_nibbles(&self) -> Vec<u8> {
        self.0
            .chunks(4)
            .map(|c| {
                c.iter()
                    .enumerate()
                    .fold(0u8, |acc, (i, &b)| acc | (b as u8) << (3 - i))
            })
            .collect()
    }

    /// Parses lowercase (or uppercase) hex with no separators; each digit is
    /// four bits.
    pub fn from_hex(text: &str) -> Result<Self, DecodeError> {
        let nibbles = text
            .chars()
            .map(|c| {
                c.to_digit(16)
                    .map(|d| d as u8)
                    .ok_or_else(|| DecodeError::Format(format!("invalid hex digit '{c}'")))
            })
            .collect::<Result<Vec<u8>, _>>()?;
        Ok(BitString::from_nibbles(&nibbles))
    }

    /// Lowercase hex, one digit per nibble.
    pub fn to_hex(&self) -> String {
        self.to_nibbles()
            .iter()
            .map(|&n| char::from_digit(n as u32, 16).unwrap())
            .collect()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn push(&mut self, bit: bool) {
        self.0.push(bit);
    }

    pub fn as_slice(&self) -> &[bool] {
        &self.0
    }

    pub fn as_mut_slice(&mut self) -> &mut [bool] {
        &mut self.0
    }

    pub fn iter(&self) -> impl Iterator<Item = bool> + '_ {
        self.0.iter().copied()
    }

    /// Copy of the bits from `start` onward.
    pub fn tail(&self, start: usize) -> BitString {
        BitString(self.0[start.min(self.0.len())..].to_vec())
    }
}

impl fmt::Display for BitString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for &b in &self.0 {
            f.write_str(if b { "1" } else { "0" })?;
        }
        Ok(())
    }
}

impl FromStr for BitString {
    type Err = DecodeError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        s.chars()
            .map(|c| match c {
                '0' => Ok(false),
                '1' => Ok(true),
                other => Err(DecodeError::Format(format!(
                    "invalid bit character '{other}'"
                ))),
            })
            .collect::<Result<Vec<_>, _>>()
            .map(BitString)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bytes_and_hex() {
        let b = BitString::from_bytes(&[0xA5, 0x0F]);
        assert_eq!(b.to_string(), "1010010100001111");
        assert_eq!(b.to_hex(), "a50f");
        assert_eq!(BitString::from_hex("A50f").unwrap(), b);
        assert_eq!(b.to_bytes(), vec![0xA5, 0x0F]);
    }

    #[test]
    fn odd_nibble_count() {
        let b = BitString::from_hex("9a3").unwrap();
        assert_eq!(b.len(), 12);
        assert_eq!(b.to_nibbles(), vec![9, 0xA, 3]);
        assert_eq!(b.to_hex(), "9a3");
    }

    #[test]
    fn rejects_bad_characters() {
        assert!("0102".parse::<BitString>().is_err());
        assert!(BitString::from_hex("zz").is_err());
    }
}
