use core::fmt;
use core::str::FromStr;

#[cfg(feature = "serde")]
use serde::{Deserialize, Serialize};

/// Three-part numeric version rendered as `major.minor.patch`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct Version {
    pub major: u64,
    pub minor: u64,
    pub patch: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize), serde(rename_all = "kebab-case"))]
pub enum VersionPart {
    Major,
    Minor,
    Patch,
}

impl Version {
    pub const fn new(major: u64, minor: u64, patch: u64) -> Self {
        Version { major, minor, patch }
    }

    /// Lower parts reset to zero.
    pub fn bumped(self, part: VersionPart) -> Self {
        match part {
            VersionPart::Major => Version::new(self.major + 1, 0, 0),
            VersionPart::Minor => Version::new(self.major, self.minor + 1, 0),
            VersionPart::Patch => Version::new(self.major, self.minor, self.patch + 1),
        }
    }
}

impl fmt::Display for Version {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{}.{}", self.major, self.minor, self.patch)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("malformed version string")]
pub struct VersionParseError;

impl FromStr for Version {
    type Err = VersionParseError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut parts = s.split('.');
        let mut next = || -> Result<u64, VersionParseError> {
            let p = parts.next().ok_or(VersionParseError)?;
            if p.is_empty() || !p.bytes().all(|b| b.is_ascii_digit()) || (p.len() > 1 && p.starts_with('0')) {
                return Err(VersionParseError);
            }
            p.parse().map_err(|_| VersionParseError)
        };
        let v = Version::new(next()?, next()?, next()?);
        if parts.next().is_some() {
            return Err(VersionParseError);
        }
        Ok(v)
    }
}
