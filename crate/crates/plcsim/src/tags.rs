//! Tag addresses and tag values.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Word address in a PLC data block, written `db<N>,w<offset>`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct TagAddress {
    pub block: u16,
    pub word_offset: u16,
}

impl TagAddress {
    pub const DIAMETER: TagAddress = TagAddress::db1(2);
    pub const WIDTH: TagAddress = TagAddress::db1(4);
    pub const WEIGHT: TagAddress = TagAddress::db1(6);
    /// Roll counter, incremented once per roll (mod 2¹⁶).
    pub const COUNTER: TagAddress = TagAddress::db1(8);
    /// Grammage entered by the operator; 0 until entered.
    pub const MANUAL: TagAddress = TagAddress::db1(12);

    /// Measurement tags in feature order (diameter, width, weight).
    pub const MEASUREMENTS: [TagAddress; 3] = [Self::DIAMETER, Self::WIDTH, Self::WEIGHT];
    pub const ALL: [TagAddress; 5] = [Self::DIAMETER, Self::WIDTH, Self::WEIGHT, Self::COUNTER, Self::MANUAL];

    const fn db1(word_offset: u16) -> Self {
        TagAddress { block: 1, word_offset }
    }
}

impl fmt::Display for TagAddress {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "db{},w{}", self.block, self.word_offset)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("malformed tag address {0:?}")]
pub struct AddressError(pub String);

impl FromStr for TagAddress {
    type Err = AddressError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || AddressError(s.to_string());
        let (db, w) = s.split_once(',').ok_or_else(bad)?;
        let digits = |t: &str| !t.is_empty() && t.bytes().all(|b| b.is_ascii_digit());
        let block = db.strip_prefix("db").filter(|t| digits(t)).ok_or_else(bad)?;
        let offset = w.strip_prefix('w').filter(|t| digits(t)).ok_or_else(bad)?;
        let block: u16 = block.parse().map_err(|_| bad())?;
        let word_offset: u16 = offset.parse().map_err(|_| bad())?;
        if word_offset % 2 != 0 {
            return Err(bad());
        }
        Ok(TagAddress { block, word_offset })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Quality {
    Good,
    Bad,
}

impl Quality {
    pub fn is_good(self) -> bool {
        self == Quality::Good
    }
}

impl fmt::Display for Quality {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Quality::Good => "GOOD",
            Quality::Bad => "BAD",
        })
    }
}

impl FromStr for Quality {
    type Err = ();

    fn from_str(s: &str) -> Result<Self, ()> {
        match s {
            "GOOD" => Ok(Quality::Good),
            "BAD" => Ok(Quality::Bad),
            _ => Err(()),
        }
    }
}

/// Value, quality and unix-millisecond timestamp of one tag.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TagEntry {
    pub value: u16,
    pub quality: Quality,
    pub timestamp: u64,
}
