//! Measurement configurations. Bit `v` set means atom `v` is in |r⟩; the
//! printed form lists atom 1 first, so `1001001` excites atoms 1, 4 and 7.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Bitstring {
    mask: u64,
    len: usize,
}

impl Bitstring {
    pub fn new(mask: u64, len: usize) -> Self {
        debug_assert!(len <= 64);
        debug_assert!(len == 64 || mask >> len == 0);
        Self { mask, len }
    }

    pub fn from_sites(sites: &[usize], len: usize) -> Self {
        let mask = sites.iter().fold(0u64, |m, &s| m | (1 << s));
        Self::new(mask, len)
    }

    pub fn mask(&self) -> u64 {
        self.mask
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn count_ones(&self) -> usize {
        self.mask.count_ones() as usize
    }

    pub fn is_set(&self, site: usize) -> bool {
        self.mask >> site & 1 == 1
    }
}

/// Lexicographic order of the printed form.
pub fn lex_key(mask: u64, len: usize) -> u64 {
    (0..len).fold(0u64, |k, v| (k << 1) | (mask >> v & 1))
}

impl fmt::Display for Bitstring {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s: String = (0..self.len)
            .map(|v| if self.is_set(v) { '1' } else { '0' })
            .collect();
        f.write_str(&s)
    }
}

impl FromStr for Bitstring {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s.len() > 64 {
            return Err(Error::InvalidBitstring(s.to_owned()));
        }
        let mut mask = 0u64;
        for (v, c) in s.chars().enumerate() {
            match c {
                '1' | 'r' => mask |= 1 << v,
                '0' | 'g' => {}
                _ => return Err(Error::InvalidBitstring(s.to_owned())),
            }
        }
        Ok(Self::new(mask, s.chars().count()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_both_alphabets() {
        let a: Bitstring = "1001001".parse().unwrap();
        let b: Bitstring = "rggrggr".parse().unwrap();
        assert_eq!(a, b);
        assert_eq!(a.mask(), 0b1001001);
        assert_eq!(a.to_string(), "1001001");
        assert!("10x".parse::<Bitstring>().is_err());
    }

    #[test]
    fn lex_key_orders_printed_form() {
        // "100" (site 0) sorts after "010" (site 1).
        assert!(lex_key(0b001, 3) > lex_key(0b010, 3));
    }
}
