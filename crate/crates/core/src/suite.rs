//! Benchmark-suite generations and their microbenchmark rosters.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "u16", into = "u16")]
pub enum Suite {
    Spec1995,
    Spec2000,
    Spec2006,
    Spec2017,
}

impl Suite {
    /// Oldest to newest.
    pub const ALL: [Suite; 4] = [Suite::Spec1995, Suite::Spec2000, Suite::Spec2006, Suite::Spec2017];

    pub fn year(self) -> u16 {
        match self {
            Suite::Spec1995 => 1995,
            Suite::Spec2000 => 2000,
            Suite::Spec2006 => 2006,
            Suite::Spec2017 => 2017,
        }
    }

    pub fn from_year(year: u16) -> Result<Self, Error> {
        match year {
            1995 => Ok(Suite::Spec1995),
            2000 => Ok(Suite::Spec2000),
            2006 => Ok(Suite::Spec2006),
            2017 => Ok(Suite::Spec2017),
            other => Err(Error::InvalidArgument(format!(
                "unknown suite `{other}`, expected one of 1995, 2000, 2006, 2017"
            ))),
        }
    }

    pub fn ordinal(self) -> usize {
        self as usize
    }

    pub fn next(self) -> Option<Suite> {
        Suite::ALL.get(self.ordinal() + 1).copied()
    }

    pub fn definition(self) -> SuiteDefinition {
        SuiteDefinition::builtin(self)
    }
}

impl From<Suite> for u16 {
    fn from(s: Suite) -> u16 {
        s.year()
    }
}

impl TryFrom<u16> for Suite {
    type Error = Error;
    fn try_from(year: u16) -> Result<Self, Error> {
        Suite::from_year(year)
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.year())
    }
}

impl FromStr for Suite {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self, Error> {
        let trimmed = s.trim();
        let digits = trimmed
            .strip_prefix("SPEC")
            .or_else(|| trimmed.strip_prefix("spec"))
            .unwrap_or(trimmed);
        let year: u16 = digits
            .parse()
            .map_err(|_| Error::InvalidArgument(format!("unknown suite `{s}`")))?;
        Suite::from_year(year)
    }
}

/// Microbenchmarks common to every generation; only these are chained across suites.
pub const SHARED_MICROS: [&str; 2] = ["gcc", "perl"];

/// The integer microbenchmarks of one suite plus the composition constant.
///
/// `composition_constant` is the additive term relating the log overall score to the
/// mean log microbenchmark value. It is zero when the stored values are already ratios
/// to the reference machine.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteDefinition {
    pub suite: Suite,
    pub micros: Vec<String>,
    pub composition_constant: f64,
}

impl SuiteDefinition {
    pub fn new(suite: Suite, micros: Vec<String>, composition_constant: f64) -> Result<Self, Error> {
        if micros.is_empty() {
            return Err(Error::InvalidArgument(format!("suite {suite} declares no microbenchmarks")));
        }
        Ok(SuiteDefinition {
            suite,
            micros,
            composition_constant,
        })
    }

    pub fn builtin(suite: Suite) -> Self {
        let names: &[&str] = match suite {
            Suite::Spec1995 => &["gcc", "perl", "compress", "go", "ijpeg", "li", "m88ksim", "vortex"],
            Suite::Spec2000 => &[
                "gcc", "perl", "bzip2", "crafty", "eon", "gap", "gzip", "mcf", "parser", "twolf",
                "vortex", "vpr",
            ],
            Suite::Spec2006 => &[
                "gcc", "perl", "astar", "bzip2", "gobmk", "h264ref", "hmmer", "libquantum", "mcf",
                "omnetpp", "sjeng", "xalancbmk",
            ],
            Suite::Spec2017 => &[
                "gcc", "perl", "deepsjeng", "exchange2", "leela", "mcf", "omnetpp", "x264",
                "xalancbmk", "xz",
            ],
        };
        SuiteDefinition {
            suite,
            micros: names.iter().map(|s| s.to_string()).collect(),
            composition_constant: 0.0,
        }
    }

    pub fn p(&self) -> usize {
        self.micros.len()
    }

    pub fn contains(&self, name: &str) -> bool {
        self.micros.iter().any(|m| m == name)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_and_order() {
        assert_eq!("2006".parse::<Suite>().unwrap(), Suite::Spec2006);
        assert_eq!("SPEC2017".parse::<Suite>().unwrap(), Suite::Spec2017);
        assert!("2010".parse::<Suite>().is_err());
        assert!(Suite::Spec1995 < Suite::Spec2017);
        assert_eq!(Suite::Spec2006.next(), Some(Suite::Spec2017));
        assert_eq!(Suite::Spec2017.next(), None);
    }

    #[test]
    fn builtin_rosters_share_gcc_and_perl() {
        for suite in Suite::ALL {
            let def = suite.definition();
            assert!(def.p() >= 1);
            for shared in SHARED_MICROS {
                assert!(def.contains(shared), "{suite} lacks {shared}");
            }
        }
        assert!(Suite::Spec2006.definition().contains("libquantum"));
        assert!(!Suite::Spec2017.definition().contains("libquantum"));
    }

    #[test]
    fn json_uses_year() {
        assert_eq!(serde_json::to_string(&Suite::Spec2000).unwrap(), "2000");
        assert_eq!(serde_json::from_str::<Suite>("1995").unwrap(), Suite::Spec1995);
    }
}
