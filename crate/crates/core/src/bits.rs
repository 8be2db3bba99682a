// SPDX-License-Identifier: Apache-2.0

//! Four-state fixed-width bit vectors.

use std::fmt;
use std::str::FromStr;

use num_bigint::BigUint;
use thiserror::Error;

/// One four-state logic symbol.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Logic {
    Zero,
    One,
    X,
    Z,
}

impl Logic {
    pub fn from_char(c: char) -> Option<Logic> {
        match c {
            '0' => Some(Logic::Zero),
            '1' => Some(Logic::One),
            'x' | 'X' => Some(Logic::X),
            'z' | 'Z' => Some(Logic::Z),
            _ => None,
        }
    }

    pub fn to_char(self) -> char {
        match self {
            Logic::Zero => '0',
            Logic::One => '1',
            Logic::X => 'X',
            Logic::Z => 'Z',
        }
    }

    pub fn is_known(self) -> bool {
        matches!(self, Logic::Zero | Logic::One)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum BitsError {
    #[error("bit string must not be empty")]
    Empty,
    #[error("invalid four-state symbol `{0}`")]
    InvalidSymbol(char),
    #[error("slice [{hi}:{lo}] out of range for width {width}")]
    SliceOutOfRange { hi: u32, lo: u32, width: u32 },
    #[error("value of width {have} does not fit into {want} bits")]
    TooWide { have: u32, want: u32 },
}

/// A non-empty vector of four-state symbols, stored MSB first.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct BitString {
    bits: Vec<Logic>,
}

impl BitString {
    pub fn new(bits: Vec<Logic>) -> Result<Self, BitsError> {
        if bits.is_empty() {
            return Err(BitsError::Empty);
        }
        Ok(BitString { bits })
    }

    /// All-`X` value; used for signals that have not changed yet.
    pub fn unknown(width: u32) -> Self {
        Self::filled(Logic::X, width)
    }

    pub fn filled(sym: Logic, width: u32) -> Self {
        assert!(width >= 1, "bit strings have at least one bit");
        BitString {
            bits: vec![sym; width as usize],
        }
    }

    /// Unsigned binary encoding of `value`, zero-extended to `width`.
    pub fn from_biguint(value: &BigUint, width: u32) -> Result<Self, BitsError> {
        let have = value.bits() as u32;
        if have > width {
            return Err(BitsError::TooWide { have, want: width });
        }
        let bits = (0..width)
            .rev()
            .map(|i| {
                if value.bit(i as u64) {
                    Logic::One
                } else {
                    Logic::Zero
                }
            })
            .collect();
        BitString::new(bits)
    }

    pub fn width(&self) -> u32 {
        self.bits.len() as u32
    }

    pub fn symbols(&self) -> &[Logic] {
        &self.bits
    }

    pub fn has_unknown(&self) -> bool {
        self.bits.iter().any(|b| !b.is_known())
    }

    /// Symbol at bit index `idx`, where index 0 is the LSB.
    pub fn bit(&self, idx: u32) -> Option<Logic> {
        let w = self.width();
        if idx >= w {
            return None;
        }
        Some(self.bits[(w - 1 - idx) as usize])
    }

    /// Bits `hi` down to `lo` inclusive (LSB is bit 0).
    pub fn slice(&self, hi: u32, lo: u32) -> Result<BitString, BitsError> {
        let w = self.width();
        if hi < lo || hi >= w {
            return Err(BitsError::SliceOutOfRange { hi, lo, width: w });
        }
        let start = (w - 1 - hi) as usize;
        let end = (w - lo) as usize;
        Ok(BitString {
            bits: self.bits[start..end].to_vec(),
        })
    }

    /// MSB-first concatenation: the first part ends up in the most significant bits.
    pub fn concat<'a, I>(parts: I) -> Result<BitString, BitsError>
    where
        I: IntoIterator<Item = &'a BitString>,
    {
        let bits: Vec<Logic> = parts
            .into_iter()
            .flat_map(|p| p.bits.iter().copied())
            .collect();
        BitString::new(bits)
    }

    /// Widen to `width` following VCD vector rules: pad with `0` when the
    /// leading symbol is `1` or `0`, otherwise repeat the leading `X`/`Z`.
    pub fn extend_to(&self, width: u32) -> Result<BitString, BitsError> {
        let w = self.width();
        if w > width {
            return Err(BitsError::TooWide { have: w, want: width });
        }
        let pad = match self.bits[0] {
            Logic::X => Logic::X,
            Logic::Z => Logic::Z,
            Logic::Zero | Logic::One => Logic::Zero,
        };
        let mut bits = vec![pad; (width - w) as usize];
        bits.extend_from_slice(&self.bits);
        Ok(BitString { bits })
    }

    /// Unsigned interpretation; `None` if any symbol is `X` or `Z`.
    pub fn to_biguint(&self) -> Option<BigUint> {
        if self.has_unknown() {
            return None;
        }
        let mut bytes = vec![0u8; self.bits.len().div_ceil(8)];
        for (i, b) in self.bits.iter().rev().enumerate() {
            if *b == Logic::One {
                bytes[i / 8] |= 1 << (i % 8);
            }
        }
        Some(BigUint::from_bytes_le(&bytes))
    }

    /// Lower-case textual form, e.g. `1xz0`.
    pub fn to_lowercase_string(&self) -> String {
        self.to_string().to_ascii_lowercase()
    }
}

impl FromStr for BitString {
    type Err = BitsError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bits = s
            .chars()
            .map(|c| Logic::from_char(c).ok_or(BitsError::InvalidSymbol(c)))
            .collect::<Result<Vec<_>, _>>()?;
        BitString::new(bits)
    }
}

impl fmt::Display for BitString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for b in &self.bits {
            write!(f, "{}", b.to_char())?;
        }
        Ok(())
    }
}

impl fmt::Debug for BitString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "BitString(\"{self}\")")
    }
}
