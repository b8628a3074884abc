use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// A calendar value: either a bare year or a full ISO-8601 date.
///
/// A bare year orders before every full date in the same year, which matches
/// lexicographic ordering of the ISO text form.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Temporal {
    year: u16,
    // 0 when only the year is known
    month: u8,
    day: u8,
}

impl Temporal {
    pub fn year(year: u16) -> Option<Self> {
        (year <= 9999).then_some(Temporal {
            year,
            month: 0,
            day: 0,
        })
    }

    pub fn ymd(year: u16, month: u8, day: u8) -> Option<Self> {
        chrono::NaiveDate::from_ymd_opt(i32::from(year), u32::from(month), u32::from(day))?;
        (year <= 9999).then_some(Temporal { year, month, day })
    }

    pub fn is_bare_year(&self) -> bool {
        self.month == 0
    }

    pub fn year_part(&self) -> u16 {
        self.year
    }
}

impl FromStr for Temporal {
    type Err = ();

    fn from_str(s: &str) -> Result<Self, ()> {
        let b = s.as_bytes();
        let digits = |r: std::ops::Range<usize>| b[r].iter().all(u8::is_ascii_digit);
        match b.len() {
            4 if digits(0..4) => Temporal::year(s.parse().map_err(|_| ())?).ok_or(()),
            10 if digits(0..4) && b[4] == b'-' && digits(5..7) && b[7] == b'-' && digits(8..10) => {
                let y = s[0..4].parse().map_err(|_| ())?;
                let m = s[5..7].parse().map_err(|_| ())?;
                let d = s[8..10].parse().map_err(|_| ())?;
                Temporal::ymd(y, m, d).ok_or(())
            }
            _ => Err(()),
        }
    }
}

impl fmt::Display for Temporal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_bare_year() {
            write!(f, "{:04}", self.year)
        } else {
            write!(f, "{:04}-{:02}-{:02}", self.year, self.month, self.day)
        }
    }
}

/// A single cell value.
#[derive(Debug, Clone, PartialEq)]
pub enum Value {
    Null,
    Text(String),
    Number(f64),
    Date(Temporal),
}

impl Value {
    pub fn is_null(&self) -> bool {
        matches!(self, Value::Null)
    }

    pub fn as_f64(&self) -> Option<f64> {
        match self {
            Value::Number(n) => Some(*n),
            _ => None,
        }
    }

    fn rank(&self) -> u8 {
        match self {
            Value::Null => 0,
            Value::Number(_) => 1,
            Value::Text(_) => 2,
            Value::Date(_) => 3,
        }
    }

    /// Compares two non-null values of the same variant. Returns `None` when
    /// either side is null or the variants differ.
    pub fn compare(&self, other: &Value) -> Option<Ordering> {
        match (self, other) {
            (Value::Number(a), Value::Number(b)) => a.partial_cmp(b),
            (Value::Text(a), Value::Text(b)) => Some(a.as_bytes().cmp(b.as_bytes())),
            (Value::Date(a), Value::Date(b)) => Some(a.cmp(b)),
            _ => None,
        }
    }

    /// Total order used for canonical sorting: null < numbers < text < dates.
    pub fn total_cmp(&self, other: &Value) -> Ordering {
        match (self, other) {
            (Value::Number(a), Value::Number(b)) => a.total_cmp(b),
            _ => self
                .compare(other)
                .unwrap_or_else(|| self.rank().cmp(&other.rank())),
        }
    }

    /// Equality with a relative tolerance on numbers.
    pub fn approx_eq(&self, other: &Value, rel_tol: f64) -> bool {
        match (self, other) {
            (Value::Number(a), Value::Number(b)) => {
                a == b || (a - b).abs() <= rel_tol * a.abs().max(b.abs())
            }
            _ => self == other,
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Null => f.write_str("null"),
            Value::Text(s) => f.write_str(s),
            Value::Number(n) => write!(f, "{n}"),
            Value::Date(d) => write!(f, "{d}"),
        }
    }
}

impl From<f64> for Value {
    fn from(n: f64) -> Self {
        Value::Number(n)
    }
}

impl From<&str> for Value {
    fn from(s: &str) -> Self {
        Value::Text(s.to_string())
    }
}

impl From<Temporal> for Value {
    fn from(t: Temporal) -> Self {
        Value::Date(t)
    }
}

// JSON form: null | number | string | {"date": "YYYY[-MM-DD]"}
#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum ValueRepr {
    Null(()),
    Number(f64),
    Text(String),
    Date { date: String },
}

impl Serialize for Value {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            Value::Null => s.serialize_unit(),
            Value::Number(n) => s.serialize_f64(*n),
            Value::Text(t) => s.serialize_str(t),
            Value::Date(d) => ValueRepr::Date {
                date: d.to_string(),
            }
            .serialize(s),
        }
    }
}

impl<'de> Deserialize<'de> for Value {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        Ok(match ValueRepr::deserialize(d)? {
            ValueRepr::Null(()) => Value::Null,
            ValueRepr::Number(n) => Value::Number(n),
            ValueRepr::Text(t) => Value::Text(t),
            ValueRepr::Date { date } => Value::Date(
                date.parse()
                    .map_err(|_| serde::de::Error::custom(format!("invalid date '{date}'")))?,
            ),
        })
    }
}
