//! Sizing a key for file distribution.
//!
//! One tagged message spans a generation of `N` IP packets, so its length is
//! `l_bytes = 1500 N` and `l_bits = 12000 N`. A key may tag at most
//! `M <= l_bits` messages, which bounds the file a single key can cover at
//! `M l_bytes = 8 l_bytes^2 = 18 10^6 N^2` bytes.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const FRAME_BYTES: u64 = 1500;
pub const PAYLOAD_BYTES: u64 = 1480;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum FileDistError {
    #[error("file size must be at least one byte")]
    Empty,
    #[error("generation size must be at least one packet")]
    NoPackets,
    #[error("cannot parse size {0:?}")]
    BadSize(String),
    #[error("size {0:?} is not a whole number of bytes")]
    Fractional(String),
    #[error("size {0:?} is too large")]
    Overflow(String),
}

/// Which per-packet byte count counts as message data.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Accounting {
    /// Whole 1500-byte frames, headers included.
    #[default]
    Frame,
    /// 1480-byte payloads only.
    Payload,
}

impl Accounting {
    pub fn packet_bytes(self) -> u64 {
        match self {
            Accounting::Frame => FRAME_BYTES,
            Accounting::Payload => PAYLOAD_BYTES,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DistPlan {
    pub accounting: Accounting,
    /// IP packets per generation.
    pub n: u64,
    pub l_bytes: u64,
    pub l_bits: u64,
    /// Largest number of messages one key may tag.
    pub m_max: u64,
    pub max_file_bytes: u128,
    pub file_bytes: u64,
    /// Messages needed for this file.
    pub m: u64,
}

impl DistPlan {
    pub fn for_generation(n: u64, accounting: Accounting) -> Result<Self, FileDistError> {
        if n == 0 {
            return Err(FileDistError::NoPackets);
        }
        let l_bytes = accounting.packet_bytes() * n;
        let l_bits = 8 * l_bytes;
        Ok(DistPlan {
            accounting,
            n,
            l_bytes,
            l_bits,
            m_max: l_bits,
            max_file_bytes: l_bits as u128 * l_bytes as u128,
            file_bytes: 0,
            m: 0,
        })
    }
}

/// `18 10^6 N^2`, the largest file one key covers with `N`-packet generations.
pub fn max_file_for(n: u64) -> u128 {
    max_file_with(n, Accounting::Frame)
}

pub fn max_file_with(n: u64, accounting: Accounting) -> u128 {
    let l = accounting.packet_bytes() as u128 * n as u128;
    8 * l * l
}

/// Smallest generation that lets one key cover `file_bytes`.
pub fn plan_for_file(file_bytes: u64) -> Result<DistPlan, FileDistError> {
    plan_with(file_bytes, Accounting::Frame)
}

pub fn plan_with(file_bytes: u64, accounting: Accounting) -> Result<DistPlan, FileDistError> {
    if file_bytes == 0 {
        return Err(FileDistError::Empty);
    }
    // 8 (bN)^2 >= s  <=>  N >= sqrt(s / 8) / b
    let b = accounting.packet_bytes() as u128;
    let mut n = ((file_bytes as f64 / 8.0).sqrt() / b as f64).ceil().max(1.0) as u64;
    while n > 1 && max_file_with(n - 1, accounting) >= file_bytes as u128 {
        n -= 1;
    }
    while max_file_with(n, accounting) < file_bytes as u128 {
        n += 1;
    }
    let mut plan = DistPlan::for_generation(n, accounting)?;
    plan.file_bytes = file_bytes;
    plan.m = file_bytes.div_ceil(plan.l_bytes);
    assert!(plan.m <= plan.m_max, "message count {} above reuse bound {}", plan.m, plan.m_max);
    Ok(plan)
}

const UNITS: [(char, u64); 4] = [('K', 1_000), ('M', 1_000_000), ('G', 1_000_000_000), ('T', 1_000_000_000_000)];

/// Parses decimal sizes such as `1500`, `22.5K`, `18M`, `4.05G` or `18MB`.
pub fn parse_size(text: &str) -> Result<u64, FileDistError> {
    let bad = || FileDistError::BadSize(text.to_string());
    let t = text.trim();
    let t = t.strip_suffix(['B', 'b']).unwrap_or(t);
    let (num, scale) = match t.chars().last() {
        Some(c) if c.is_ascii_alphabetic() => {
            let unit = UNITS.iter().find(|(u, _)| u.eq_ignore_ascii_case(&c)).ok_or_else(bad)?;
            (&t[..t.len() - 1], unit.1)
        }
        _ => (t, 1),
    };
    let (int, frac) = num.split_once('.').unwrap_or((num, ""));
    if int.is_empty() && frac.is_empty() || !int.chars().chain(frac.chars()).all(|c| c.is_ascii_digit()) {
        return Err(bad());
    }
    let overflow = || FileDistError::Overflow(text.to_string());
    let digits: u128 = format!("{int}{frac}").parse().map_err(|_| overflow())?;
    let denom = 10u128.checked_pow(frac.len() as u32).ok_or_else(overflow)?;
    let scaled = digits.checked_mul(scale as u128).ok_or_else(overflow)?;
    if scaled % denom != 0 {
        return Err(FileDistError::Fractional(text.to_string()));
    }
    u64::try_from(scaled / denom).map_err(|_| overflow())
}

/// Short decimal form: `18M`, `1.8G`, `22.5K`, `999`.
pub fn format_size(bytes: u128) -> String {
    let Some(&(unit, scale)) = UNITS.iter().rev().find(|(_, s)| bytes >= *s as u128) else {
        return bytes.to_string();
    };
    let scale = scale as u128;
    let whole = bytes / scale;
    let rest = bytes % scale;
    if rest == 0 {
        return format!("{whole}{unit}");
    }
    let width = scale.ilog10() as usize;
    let frac = format!("{rest:0width$}");
    format!("{whole}.{}{unit}", frac.trim_end_matches('0'))
}

impl fmt::Display for DistPlan {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:>10} {:>4} {:>10} {:>10}", format_size(self.file_bytes as u128), self.n, format_size(self.l_bytes as u128), self.m)
    }
}

/// Header matching [`DistPlan`]'s `Display` columns.
pub fn table_header() -> String {
    format!("{:>10} {:>4} {:>10} {:>10}", "file", "N", "l (bytes)", "M")
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn published_rows() {
        let rows = [("18M", 1, 1500, 12_000), ("72M", 2, 3000, 24_000), ("1.8G", 10, 15_000, 120_000), ("4.05G", 15, 22_500, 180_000)];
        for (size, n, l, m) in rows {
            let p = plan_for_file(parse_size(size).unwrap()).unwrap();
            assert_eq!((p.n, p.l_bytes, p.m), (n, l, m), "{size}");
            assert_eq!(p.m_max, m);
            assert_eq!(p.l_bits, 8 * l);
        }
    }

    #[test]
    fn max_file_values() {
        assert_eq!(max_file_for(1), 18_000_000);
        assert_eq!(max_file_for(2), 72_000_000);
        assert_eq!(max_file_for(10), 1_800_000_000);
        assert_eq!(max_file_for(15), 4_050_000_000);
        for n in 1..200u64 {
            assert_eq!(max_file_for(n), 18_000_000 * (n as u128).pow(2));
        }
    }

    #[test]
    fn one_byte_file() {
        let p = plan_for_file(1).unwrap();
        assert_eq!((p.n, p.m), (1, 1));
        assert_eq!(plan_for_file(0), Err(FileDistError::Empty));
    }

    #[test]
    fn boundaries() {
        assert_eq!(plan_for_file(18_000_000).unwrap().n, 1);
        assert_eq!(plan_for_file(18_000_001).unwrap().n, 2);
        assert_eq!(plan_for_file(72_000_001).unwrap().n, 3);
        let huge = plan_for_file(u64::MAX).unwrap();
        assert!(huge.max_file_bytes >= u64::MAX as u128);
        assert!(max_file_for(huge.n - 1) < u64::MAX as u128);
    }

    #[test]
    fn payload_accounting() {
        let p = plan_with(18_000_000, Accounting::Payload).unwrap();
        assert_eq!(p.l_bytes, 2960);
        assert_eq!(p.n, 2);
        assert_eq!(max_file_with(1, Accounting::Payload), 17_523_200);
    }

    #[test]
    fn sampled_sizes_fit() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..1_000_000 {
            let s = rng.random_range(1..=50_000_000_000u64);
            let p = plan_for_file(s).unwrap();
            assert!(max_file_for(p.n) >= s as u128);
            assert!(p.n == 1 || max_file_for(p.n - 1) < s as u128);
            assert!(p.m <= p.m_max);
        }
    }

    #[test]
    fn size_parsing() {
        assert_eq!(parse_size("18M"), Ok(18_000_000));
        assert_eq!(parse_size("1.8G"), Ok(1_800_000_000));
        assert_eq!(parse_size("4.05G"), Ok(4_050_000_000));
        assert_eq!(parse_size("22.5k"), Ok(22_500));
        assert_eq!(parse_size("72MB"), Ok(72_000_000));
        assert_eq!(parse_size(" 1500 "), Ok(1500));
        assert_eq!(parse_size("1.5"), Err(FileDistError::Fractional("1.5".into())));
        assert!(matches!(parse_size("12X"), Err(FileDistError::BadSize(_))));
        assert!(matches!(parse_size(""), Err(FileDistError::BadSize(_))));
        assert!(matches!(parse_size("."), Err(FileDistError::BadSize(_))));
        assert!(matches!(parse_size("99999999999T"), Err(FileDistError::Overflow(_))));
    }

    #[test]
    fn size_formatting() {
        assert_eq!(format_size(18_000_000), "18M");
        assert_eq!(format_size(1_800_000_000), "1.8G");
        assert_eq!(format_size(4_050_000_000), "4.05G");
        assert_eq!(format_size(22_500), "22.5K");
        assert_eq!(format_size(999), "999");
        for s in ["18M", "1.8G", "4.05G", "22.5K", "1500"] {
            assert_eq!(parse_size(&format_size(parse_size(s).unwrap() as u128)).unwrap(), parse_size(s).unwrap());
        }
    }

    #[test]
    fn row_display() {
        let p = plan_for_file(1_800_000_000).unwrap();
        let cells: Vec<String> = p.to_string().split_whitespace().map(String::from).collect();
        assert_eq!(cells, ["1.8G", "10", "15K", "120000"]);
    }
}
