use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

/// The ten scene classes. Declaration order is the one-hot index order used
/// everywhere in the crate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SceneLabel {
    Airport,
    Bus,
    Metro,
    MetroStation,
    Park,
    PublicSquare,
    ShoppingMall,
    StreetPedestrian,
    StreetTraffic,
    Tram,
}

impl SceneLabel {
    pub const COUNT: usize = 10;

    pub const ALL: [SceneLabel; 10] = [
        Self::Airport,
        Self::Bus,
        Self::Metro,
        Self::MetroStation,
        Self::Park,
        Self::PublicSquare,
        Self::ShoppingMall,
        Self::StreetPedestrian,
        Self::StreetTraffic,
        Self::Tram,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Airport => "airport",
            Self::Bus => "bus",
            Self::Metro => "metro",
            Self::MetroStation => "metro_station",
            Self::Park => "park",
            Self::PublicSquare => "public_square",
            Self::ShoppingMall => "shopping_mall",
            Self::StreetPedestrian => "street_pedestrian",
            Self::StreetTraffic => "street_traffic",
            Self::Tram => "tram",
        }
    }

    pub fn one_hot(self) -> Vec<f64> {
        let mut v = vec![0.0; Self::COUNT];
        v[self.index()] = 1.0;
        v
    }
}

impl fmt::Display for SceneLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SceneLabel {
    type Err = Error;

    /// Accepts the canonical names and their spaced or hyphenated forms
    /// in any case ("Metro Station", "metro-station").
    fn from_str(s: &str) -> Result<Self> {
        let canon: String = s
            .trim()
            .to_ascii_lowercase()
            .split([' ', '-', '_'])
            .filter(|p| !p.is_empty())
            .collect::<Vec<_>>()
            .join("_");
        Self::ALL
            .into_iter()
            .find(|l| l.as_str() == canon)
            .ok_or_else(|| Error::Validation(format!("unknown label '{}'", s.trim())))
    }
}
