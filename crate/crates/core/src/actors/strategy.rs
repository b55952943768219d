use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
#[error("invalid strategy profile {0:?}: expected three letters from a-d, e-h, i-l")]
pub struct ProfileParseError(pub String);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SellerStrategy {
    /// Matched data, matched key.
    A,
    /// Non-matched data, matched key.
    B,
    /// Matched data, non-matched key.
    C,
    /// Non-matched data, non-matched key.
    D,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ConsumerStrategy {
    /// Pays seller and provider in full.
    E,
    /// Pays the seller only `x`, the provider in full.
    F,
    /// Pays the seller in full, the provider only `y`.
    G,
    /// Pays `x` and `y`.
    H,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProviderStrategy {
    /// Authentic data, matched key.
    I,
    /// Authentic data, non-matched key.
    J,
    /// Fake data, matched key.
    K,
    /// Fake data, non-matched key.
    L,
}

impl SellerStrategy {
    pub const ALL: [SellerStrategy; 4] = [Self::A, Self::B, Self::C, Self::D];

    pub fn letter(self) -> char {
        ['a', 'b', 'c', 'd'][self as usize]
    }

    pub fn from_letter(c: char) -> Option<Self> {
        Self::ALL.into_iter().find(|s| s.letter() == c)
    }

    pub fn matched_data(self) -> bool {
        matches!(self, Self::A | Self::C)
    }

    pub fn matched_key(self) -> bool {
        matches!(self, Self::A | Self::B)
    }

    pub fn honest(self) -> bool {
        self == Self::A
    }

    /// Cost in whole tokens of following this strategy.
    pub fn cost(self) -> i64 {
        [-11, -1, -10, 0][self as usize]
    }
}

impl ConsumerStrategy {
    pub const ALL: [ConsumerStrategy; 4] = [Self::E, Self::F, Self::G, Self::H];

    pub fn letter(self) -> char {
        ['e', 'f', 'g', 'h'][self as usize]
    }

    pub fn from_letter(c: char) -> Option<Self> {
        Self::ALL.into_iter().find(|s| s.letter() == c)
    }

    pub fn pays_seller_fully(self) -> bool {
        matches!(self, Self::E | Self::G)
    }

    pub fn pays_provider_fully(self) -> bool {
        matches!(self, Self::E | Self::F)
    }

    pub fn honest(self) -> bool {
        self == Self::E
    }
}

impl ProviderStrategy {
    pub const ALL: [ProviderStrategy; 4] = [Self::I, Self::J, Self::K, Self::L];

    pub fn letter(self) -> char {
        ['i', 'j', 'k', 'l'][self as usize]
    }

    pub fn from_letter(c: char) -> Option<Self> {
        Self::ALL.into_iter().find(|s| s.letter() == c)
    }

    pub fn authentic_data(self) -> bool {
        matches!(self, Self::I | Self::J)
    }

    pub fn matched_key(self) -> bool {
        matches!(self, Self::I | Self::K)
    }

    pub fn honest(self) -> bool {
        self == Self::I
    }

    pub fn cost(self) -> i64 {
        [-2, -1, -1, 0][self as usize]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct StrategyProfile {
    pub seller: SellerStrategy,
    pub consumer: ConsumerStrategy,
    pub provider: ProviderStrategy,
}

impl StrategyProfile {
    pub const HONEST: StrategyProfile =
        StrategyProfile { seller: SellerStrategy::A, consumer: ConsumerStrategy::E, provider: ProviderStrategy::I };

    pub fn new(seller: SellerStrategy, consumer: ConsumerStrategy, provider: ProviderStrategy) -> Self {
        StrategyProfile { seller, consumer, provider }
    }

    /// All 64 profiles, seller-major then consumer then provider.
    pub fn all() -> Vec<StrategyProfile> {
        let mut out = Vec::with_capacity(64);
        for s in SellerStrategy::ALL {
            for c in ConsumerStrategy::ALL {
                for p in ProviderStrategy::ALL {
                    out.push(StrategyProfile::new(s, c, p));
                }
            }
        }
        out
    }

    pub fn code(&self) -> String {
        [self.seller.letter(), self.consumer.letter(), self.provider.letter()].iter().collect()
    }
}

impl fmt::Display for StrategyProfile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.code())
    }
}

impl FromStr for StrategyProfile {
    type Err = ProfileParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let err = || ProfileParseError(s.to_string());
        let chars: Vec<char> = s.trim().to_ascii_lowercase().chars().collect();
        let [a, b, c] = chars[..] else {
            return Err(err());
        };
        Ok(StrategyProfile {
            seller: SellerStrategy::from_letter(a).ok_or_else(err)?,
            consumer: ConsumerStrategy::from_letter(b).ok_or_else(err)?,
            provider: ProviderStrategy::from_letter(c).ok_or_else(err)?,
        })
    }
}

impl Serialize for StrategyProfile {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.code())
    }
}

impl<'de> Deserialize<'de> for StrategyProfile {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        String::deserialize(deserializer)?.parse().map_err(serde::de::Error::custom)
    }
}
