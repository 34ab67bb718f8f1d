//! Parameter lists: `3`, `3,4,5`, `2..10` (inclusive), and reals such as
//! `1.5,2` or `pi/6,pi/4`.

use std::f64::consts::PI;

pub fn parse_counts(s: &str) -> Result<Vec<u32>, String> {
    let mut out = Vec::new();
    for part in s.split(',').map(str::trim) {
        if let Some((a, b)) = part.split_once("..") {
            let a: u32 = a.trim().parse().map_err(|_| format!("bad range start in {part:?}"))?;
            let b: u32 = b.trim().trim_start_matches('=').parse().map_err(|_| format!("bad range end in {part:?}"))?;
            if b < a {
                return Err(format!("empty range {part:?}"));
            }
            out.extend(a..=b);
        } else {
            out.push(part.parse().map_err(|_| format!("not a count: {part:?}"))?);
        }
    }
    Ok(out)
}

/// A real number, optionally written as a multiple of π (`pi`, `pi/6`, `2pi/3`, `0.25*pi`).
pub fn parse_real(s: &str) -> Result<f64, String> {
    let t = s.trim().to_ascii_lowercase().replace('π', "pi");
    let bad = || format!("not a number: {s:?}");
    let Some((before, after)) = t.split_once("pi") else {
        return t.parse().map_err(|_| bad());
    };
    let before = before.trim().trim_end_matches('*').trim();
    let coef: f64 = if before.is_empty() { 1.0 } else { before.parse().map_err(|_| bad())? };
    let after = after.trim();
    let div: f64 = match after.strip_prefix('/') {
        Some(d) => d.trim().parse().map_err(|_| bad())?,
        None if after.is_empty() => 1.0,
        None => return Err(bad()),
    };
    Ok(coef * PI / div)
}

pub fn parse_reals(s: &str) -> Result<Vec<f64>, String> {
    s.split(',').map(parse_real).collect()
}
