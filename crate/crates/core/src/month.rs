//! Month-resolution time axis anchored at 1995-08 (month 0).

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::Error;

const ORIGIN_YEAR: i64 = 1995;
const ORIGIN_MONTH: i64 = 8;

/// Whole months elapsed since 1995-08-01.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct MonthIndex(pub u32);

impl MonthIndex {
    pub const ORIGIN: MonthIndex = MonthIndex(0);

    pub fn new(value: u32) -> Self {
        MonthIndex(value)
    }

    pub fn from_year_month(year: i64, month: i64) -> Result<Self, Error> {
        if !(1..=12).contains(&month) {
            return Err(Error::InvalidArgument(format!("month {month} out of range")));
        }
        let offset = (year - ORIGIN_YEAR) * 12 + (month - ORIGIN_MONTH);
        if offset < 0 {
            return Err(Error::InvalidArgument(format!(
                "{year:04}-{month:02} precedes the 1995-08 origin"
            )));
        }
        u32::try_from(offset)
            .map(MonthIndex)
            .map_err(|_| Error::InvalidArgument(format!("{year:04}-{month:02} is out of range")))
    }

    pub fn value(self) -> u32 {
        self.0
    }

    pub fn as_f64(self) -> f64 {
        f64::from(self.0)
    }

    pub fn year_month(self) -> (i64, i64) {
        let total = ORIGIN_YEAR * 12 + (ORIGIN_MONTH - 1) + i64::from(self.0);
        (total / 12, total % 12 + 1)
    }

    /// Nearest month to a fractional month count; negative inputs clamp to the origin.
    pub fn round_from(months: f64) -> Self {
        MonthIndex(months.round().max(0.0) as u32)
    }
}

impl fmt::Display for MonthIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let (y, m) = self.year_month();
        write!(f, "{y:04}-{m:02}")
    }
}

impl FromStr for MonthIndex {
    type Err = Error;

    /// Accepts `YYYY-MM`; anything finer (`YYYY-MM-DD`, a trailing time) is truncated.
    fn from_str(s: &str) -> Result<Self, Error> {
        let s = s.trim();
        let bad = || Error::InvalidArgument(format!("invalid date `{s}`, expected YYYY-MM"));
        let mut parts = s.splitn(3, '-');
        let year = parts.next().ok_or_else(bad)?;
        let month = parts.next().ok_or_else(bad)?;
        if year.len() != 4 || month.len() != 2 {
            return Err(bad());
        }
        if let Some(rest) = parts.next() {
            let day = rest.get(..2).ok_or_else(bad)?;
            if !day.bytes().all(|b| b.is_ascii_digit()) {
                return Err(bad());
            }
        }
        let year: i64 = year.parse().map_err(|_| bad())?;
        let month: i64 = month.parse().map_err(|_| bad())?;
        MonthIndex::from_year_month(year, month)
    }
}

impl Serialize for MonthIndex {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for MonthIndex {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn origin_and_first_year() {
        assert_eq!("1995-08".parse::<MonthIndex>().unwrap(), MonthIndex(0));
        assert_eq!("1996-08".parse::<MonthIndex>().unwrap(), MonthIndex(12));
        assert_eq!("1996-04".parse::<MonthIndex>().unwrap(), MonthIndex(8));
        assert_eq!("2028-01".parse::<MonthIndex>().unwrap(), MonthIndex(389));
    }

    #[test]
    fn truncates_days() {
        assert_eq!("1996-10-01".parse::<MonthIndex>().unwrap(), MonthIndex(14));
        assert_eq!("1996-10-31T12:00".parse::<MonthIndex>().unwrap(), MonthIndex(14));
    }

    #[test]
    fn rejects_bad_dates() {
        for s in ["1995-07", "1995-13", "95-08", "1995/08", "", "abcd-ef", "1999-1"] {
            assert!(s.parse::<MonthIndex>().is_err(), "{s}");
        }
    }

    #[test]
    fn display() {
        assert_eq!(MonthIndex(0).to_string(), "1995-08");
        assert_eq!(MonthIndex(5).to_string(), "1996-01");
        assert_eq!(MonthIndex(317).to_string(), "2022-01");
    }

    proptest! {
        #[test]
        fn round_trip(months in 0u32..=1264) {
            // 1995-08 .. 2100-12
            let m = MonthIndex(months);
            prop_assert_eq!(m.to_string().parse::<MonthIndex>().unwrap(), m);
        }
    }
}
