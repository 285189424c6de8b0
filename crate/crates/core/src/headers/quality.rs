use std::fmt;

use super::HeaderError;

/// A q-value in `[0, 1]` with at most three decimals, held in thousandths.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct QualityValue(u16);

impl QualityValue {
    pub const ONE: QualityValue = QualityValue(1000);
    pub const ZERO: QualityValue = QualityValue(0);

    pub fn from_thousandths(t: u16) -> Option<Self> {
        (t <= 1000).then_some(QualityValue(t))
    }

    /// Rounds to the nearest thousandth and clamps into range.
    pub fn from_f64_clamped(v: f64) -> Self {
        let t = (v * 1000.0).round();
        QualityValue(t.clamp(0.0, 1000.0) as u16)
    }

    pub fn thousandths(self) -> u16 {
        self.0
    }

    pub fn as_f64(self) -> f64 {
        f64::from(self.0) / 1000.0
    }

    pub fn is_zero(self) -> bool {
        self.0 == 0
    }

    /// Parses the `qvalue` grammar: `0[.ddd]` or `1[.000]`.
    pub fn parse(text: &str) -> Result<Self, HeaderError> {
        let bad = || HeaderError::malformed("qvalue", format!("bad q-value {text:?}"));
        let (int, frac) = match text.split_once('.') {
            Some((i, f)) => (i, f),
            None => (text, ""),
        };
        if frac.len() > 3 || !frac.bytes().all(|b| b.is_ascii_digit()) {
            return Err(bad());
        }
        let mut thousandths: u16 = 0;
        for (i, b) in frac.bytes().enumerate() {
            thousandths += u16::from(b - b'0') * [100, 10, 1][i];
        }
        match int {
            "0" => Ok(QualityValue(thousandths)),
            "1" if thousandths == 0 => Ok(QualityValue::ONE),
            _ => Err(bad()),
        }
    }
}

impl Default for QualityValue {
    fn default() -> Self {
        QualityValue::ONE
    }
}

impl fmt::Display for QualityValue {
    /// Shortest form with at least one decimal: `1.0`, `0.8`, `0.125`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0 == 1000 {
            return f.write_str("1.0");
        }
        let frac = format!("{:03}", self.0);
        let trimmed = frac.trim_end_matches('0');
        if trimmed.is_empty() {
            f.write_str("0.0")
        } else {
            write!(f, "0.{trimmed}")
        }
    }
}
