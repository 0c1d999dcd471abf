//! Calendar types for annual, quarterly, and monthly observations.
//!
//! Date literals follow the panel CSV conventions: `YYYY` for annual data,
//! `YYYY-Qq` with `q` in 1..=4 for quarterly data, and `YYYY-Mmm` with a
//! zero-padded month in 01..=12 for monthly data.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Observation frequency of a series.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Frequency {
    Annual,
    Quarterly,
    Monthly,
}

impl fmt::Display for Frequency {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Frequency::Annual => write!(f, "annual"),
            Frequency::Quarterly => write!(f, "quarterly"),
            Frequency::Monthly => write!(f, "monthly"),
        }
    }
}

/// Error produced when a date literal does not match any supported format.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("invalid date literal {literal:?}: expected YYYY, YYYY-Qq, or YYYY-Mmm")]
pub struct ParseDateError {
    pub literal: String,
}

/// A calendar quarter.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct Quarter {
    year: i32,
    quarter: u8,
}

impl Quarter {
    /// Builds a quarter; `quarter` must lie in 1..=4.
    pub fn new(year: i32, quarter: u8) -> Result<Self, ParseDateError> {
        if (1..=4).contains(&quarter) {
            Ok(Quarter { year, quarter })
        } else {
            Err(ParseDateError {
                literal: format!("{year}-Q{quarter}"),
            })
        }
    }

    pub fn year(&self) -> i32 {
        self.year
    }

    pub fn quarter(&self) -> u8 {
        self.quarter
    }

    /// Position on the integer quarter axis; consecutive quarters differ by 1.
    pub fn index(&self) -> i64 {
        i64::from(self.year) * 4 + i64::from(self.quarter) - 1
    }

    pub fn from_index(index: i64) -> Self {
        let year = index.div_euclid(4);
        let quarter = index.rem_euclid(4) + 1;
        Quarter {
            year: year as i32,
            quarter: quarter as u8,
        }
    }

    pub fn next(&self) -> Self {
        Quarter::from_index(self.index() + 1)
    }

    /// Quarters from `self` through `end`, inclusive. Empty when `end < self`.
    pub fn through(&self, end: Quarter) -> Vec<Quarter> {
        (self.index()..=end.index()).map(Quarter::from_index).collect()
    }
}

impl fmt::Display for Quarter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}-Q{}", self.year, self.quarter)
    }
}

impl FromStr for Quarter {
    type Err = ParseDateError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match Date::from_str(s)? {
            Date::Quarterly(q) => Ok(q),
            _ => Err(ParseDateError { literal: s.to_string() }),
        }
    }
}

impl TryFrom<String> for Quarter {
    type Error = ParseDateError;

    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

impl From<Quarter> for String {
    fn from(q: Quarter) -> String {
        q.to_string()
    }
}

/// A calendar month.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Month {
    year: i32,
    month: u8,
}

impl Month {
    pub fn new(year: i32, month: u8) -> Result<Self, ParseDateError> {
        if (1..=12).contains(&month) {
            Ok(Month { year, month })
        } else {
            Err(ParseDateError {
                literal: format!("{year}-M{month:02}"),
            })
        }
    }

    pub fn year(&self) -> i32 {
        self.year
    }

    pub fn month(&self) -> u8 {
        self.month
    }

    /// The quarter containing this month.
    pub fn containing_quarter(&self) -> Quarter {
        Quarter {
            year: self.year,
            quarter: (self.month - 1) / 3 + 1,
        }
    }
}

impl fmt::Display for Month {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}-M{:02}", self.year, self.month)
    }
}

/// A parsed date literal at any supported frequency.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Date {
    Annual(i32),
    Quarterly(Quarter),
    Monthly(Month),
}

impl Date {
    pub fn frequency(&self) -> Frequency {
        match self {
            Date::Annual(_) => Frequency::Annual,
            Date::Quarterly(_) => Frequency::Quarterly,
            Date::Monthly(_) => Frequency::Monthly,
        }
    }
}

impl fmt::Display for Date {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Date::Annual(y) => write!(f, "{y}"),
            Date::Quarterly(q) => write!(f, "{q}"),
            Date::Monthly(m) => write!(f, "{m}"),
        }
    }
}

impl FromStr for Date {
    type Err = ParseDateError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let err = || ParseDateError { literal: s.to_string() };
        let bytes = s.as_bytes();
        let year_part = |y: &str| -> Result<i32, ParseDateError> {
            if y.len() == 4 && y.bytes().all(|b| b.is_ascii_digit()) {
                y.parse().map_err(|_| err())
            } else {
                Err(err())
            }
        };
        match bytes.len() {
            4 => Ok(Date::Annual(year_part(s)?)),
            7 => {
                let year = year_part(&s[..4])?;
                match &s[4..6] {
                    "-Q" => {
                        let q: u8 = s[6..7].parse().map_err(|_| err())?;
                        Ok(Date::Quarterly(Quarter::new(year, q).map_err(|_| err())?))
                    }
                    _ => Err(err()),
                }
            }
            8 => {
                let year = year_part(&s[..4])?;
                if &s[4..6] != "-M" || !s[6..8].bytes().all(|b| b.is_ascii_digit()) {
                    return Err(err());
                }
                let m: u8 = s[6..8].parse().map_err(|_| err())?;
                Ok(Date::Monthly(Month::new(year, m).map_err(|_| err())?))
            }
            _ => Err(err()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_all_three_frequencies() {
        assert_eq!("2006".parse::<Date>().unwrap(), Date::Annual(2006));
        assert_eq!(
            "2006-Q1".parse::<Date>().unwrap(),
            Date::Quarterly(Quarter::new(2006, 1).unwrap())
        );
        assert_eq!(
            "2006-M12".parse::<Date>().unwrap(),
            Date::Monthly(Month::new(2006, 12).unwrap())
        );
    }

    #[test]
    fn rejects_malformed_literals() {
        for bad in ["2006-13", "2006-Q5", "2006-M00", "2006-M13", "06-Q1", "2006Q1", "", "200a"] {
            assert!(bad.parse::<Date>().is_err(), "{bad:?} should not parse");
        }
    }

    #[test]
    fn quarter_axis_round_trips() {
        let q = Quarter::new(2006, 1).unwrap();
        assert_eq!(Quarter::from_index(q.index()), q);
        assert_eq!(q.next(), Quarter::new(2006, 2).unwrap());
        assert_eq!(Quarter::new(2006, 4).unwrap().next(), Quarter::new(2007, 1).unwrap());
    }

    #[test]
    fn quarter_span_2006_2023_has_72_points() {
        let span = Quarter::new(2006, 1).unwrap().through(Quarter::new(2023, 4).unwrap());
        assert_eq!(span.len(), 72);
    }

    #[test]
    fn months_map_to_quarters() {
        assert_eq!(
            Month::new(2010, 7).unwrap().containing_quarter(),
            Quarter::new(2010, 3).unwrap()
        );
        assert_eq!(
            Month::new(2010, 12).unwrap().containing_quarter(),
            Quarter::new(2010, 4).unwrap()
        );
    }

    #[test]
    fn display_round_trips() {
        for lit in ["1999", "2023-Q4", "2010-M07"] {
            assert_eq!(lit.parse::<Date>().unwrap().to_string(), lit);
        }
    }
}
