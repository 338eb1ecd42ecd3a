//! Measure files.
//!
//! A file is a sequence of lines; `#` starts a comment. Fields:
//!
//! ```text
//! scale_exponent: 2
//! sigma: 0.5 1, 5/4 2
//! w: 1.5 1
//! ```
//!
//! `scale_exponent` is the integer `m` of the cell length `2^-m`. `sigma` and
//! `w` hold comma-separated atoms `position mass`; repeated lines append, an
//! empty list is allowed. Positions are decimals or dyadic rationals `p/q`
//! with `q` a power of two and are snapped exactly to the cell containing
//! them. Masses are nonnegative decimals.

use std::path::Path;

use crate::error::{Error, Result};
use crate::measure::GridMeasure;

/// The contents of a measure file.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasureFile {
    pub scale_exponent: i32,
    pub sigma: GridMeasure,
    pub w: GridMeasure,
}

fn parse_err(line: usize, field: impl Into<String>, message: impl Into<String>) -> Error {
    Error::Parse { line, field: field.into(), message: message.into() }
}

/// `floor(num / den)` for `den > 0`.
fn floor_div(num: i128, den: i128) -> i128 {
    num.div_euclid(den)
}

/// Index of the cell of scale `m` containing the exact position `num / den`.
fn cell_of_ratio(num: i128, den: i128, m: i32) -> Option<i64> {
    let cell = if m >= 0 {
        floor_div(num.checked_mul(1i128.checked_shl(m as u32)?)?, den)
    } else {
        floor_div(num, den.checked_mul(1i128.checked_shl((-m) as u32)?)?)
    };
    i64::try_from(cell).ok()
}

/// A position string as an exact ratio `(num, den)` with `den > 0`.
pub fn parse_position(s: &str) -> std::result::Result<(i128, i128), String> {
    let s = s.trim();
    let (neg, body) = match s.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, s.strip_prefix('+').unwrap_or(s)),
    };
    let too_long = || format!("`{s}` has too many digits");
    let digits = |t: &str| !t.is_empty() && t.bytes().all(|b| b.is_ascii_digit());
    let (num, den) = if let Some((p, q)) = body.split_once('/') {
        if !digits(p) || !digits(q) {
            return Err(format!("`{s}` is not a rational p/q"));
        }
        let p: i128 = p.parse().map_err(|_| too_long())?;
        let q: i128 = q.parse().map_err(|_| too_long())?;
        if q == 0 || q & (q - 1) != 0 {
            return Err(format!("denominator of `{s}` is not a power of two"));
        }
        (p, q)
    } else {
        let (int, frac) = body.split_once('.').unwrap_or((body, ""));
        if !(digits(int) || (int.is_empty() && digits(frac))) || !(frac.is_empty() || digits(frac)) {
            return Err(format!("`{s}` is not a decimal"));
        }
        if int.len() + frac.len() > 30 {
            return Err(too_long());
        }
        let joined = format!("{int}{frac}");
        let num: i128 = joined.parse().map_err(|_| too_long())?;
        (num, 10i128.pow(frac.len() as u32))
    };
    Ok((if neg { -num } else { num }, den))
}

/// Cell of scale `m` containing the position written as `s`.
pub fn position_cell(s: &str, m: i32) -> std::result::Result<i64, String> {
    let (num, den) = parse_position(s)?;
    cell_of_ratio(num, den, m).ok_or_else(|| format!("`{s}` is out of range at scale exponent {m}"))
}

fn parse_mass(s: &str) -> std::result::Result<f64, String> {
    let v: f64 = s.trim().parse().map_err(|_| format!("`{s}` is not a number"))?;
    if !v.is_finite() {
        return Err(format!("`{s}` is not finite"));
    }
    if v < 0.0 {
        return Err(format!("negative mass {v}"));
    }
    Ok(v)
}

struct RawAtom {
    line: usize,
    field: String,
    position: String,
    mass: f64,
}

/// Parse a measure file. `scale_override`, when given, replaces the declared
/// scale exponent (and supplies one when the file has none).
pub fn parse_measures(text: &str, scale_override: Option<i32>) -> Result<MeasureFile> {
    let mut scale: Option<(i32, usize)> = None;
    let mut atoms: [Vec<RawAtom>; 2] = [Vec::new(), Vec::new()];
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let (key, value) = content
            .split_once(':')
            .ok_or_else(|| parse_err(line, "", format!("expected `field: value`, found `{content}`")))?;
        let key = key.trim();
        match key {
            "scale_exponent" => {
                let m: i32 = value
                    .trim()
                    .parse()
                    .map_err(|_| parse_err(line, key, format!("`{}` is not an integer", value.trim())))?;
                if !(-62..=62).contains(&m) {
                    return Err(parse_err(line, key, format!("{m} outside [-62, 62]")));
                }
                if let Some((prev, at)) = scale {
                    if prev != m {
                        return Err(parse_err(line, key, format!("mixed scales: {m} here, {prev} on line {at}")));
                    }
                }
                scale = Some((m, line));
            }
            "sigma" | "w" => {
                let which = usize::from(key == "w");
                for item in value.split(',').map(str::trim) {
                    if item.is_empty() {
                        continue;
                    }
                    let index = atoms[which].len();
                    let mut parts = item.split_whitespace();
                    let (Some(pos), Some(mass), None) = (parts.next(), parts.next(), parts.next()) else {
                        return Err(parse_err(line, format!("{key}[{index}]"), format!("expected `position mass`, found `{item}`")));
                    };
                    let mass = parse_mass(mass).map_err(|e| parse_err(line, format!("{key}[{index}].mass"), e))?;
                    parse_position(pos).map_err(|e| parse_err(line, format!("{key}[{index}].position"), e))?;
                    atoms[which].push(RawAtom { line, field: format!("{key}[{index}].position"), position: pos.to_string(), mass });
                }
            }
            other => return Err(parse_err(line, other, "unknown field")),
        }
    }
    let m = match (scale_override, scale) {
        (Some(m), _) => m,
        (None, Some((m, _))) => m,
        (None, None) => return Err(parse_err(0, "scale_exponent", "missing")),
    };
    let build = |list: &[RawAtom]| -> Result<GridMeasure> {
        let mut cells = Vec::with_capacity(list.len());
        for a in list {
            let k = position_cell(&a.position, m).map_err(|e| parse_err(a.line, a.field.clone(), e))?;
            cells.push((k, a.mass));
        }
        GridMeasure::from_cells(m, cells)
    };
    Ok(MeasureFile { scale_exponent: m, sigma: build(&atoms[0])?, w: build(&atoms[1])? })
}

pub fn read_measures(path: &Path, scale_override: Option<i32>) -> Result<MeasureFile> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    parse_measures(&text, scale_override)
}

/// Exact dyadic rational for the centre of cell `k` at scale `m`.
pub fn center_string(k: i64, m: i32) -> String {
    let num = 2 * k as i128 + 1;
    let e = m + 1;
    if e <= 0 {
        (num << (-e) as u32).to_string()
    } else {
        format!("{num}/{}", 1i128 << e as u32)
    }
}

fn atom_list(mu: &GridMeasure) -> String {
    mu.atoms().map(|(k, v)| format!("{} {v}", center_string(k, mu.scale()))).collect::<Vec<_>>().join(", ")
}

/// Render a pair in the file format; parsing the result gives back the same measures.
pub fn format_measures(sigma: &GridMeasure, w: &GridMeasure) -> Result<String> {
    if sigma.scale() != w.scale() {
        return Err(Error::ScaleMismatch(sigma.scale(), w.scale()));
    }
    Ok(format!("scale_exponent: {}\nsigma: {}\nw: {}\n", sigma.scale(), atom_list(sigma), atom_list(w)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_cell_instance() {
        let f = parse_measures("scale_exponent: 0\nsigma: 0.5 1\nw: 1.5 1\n", None).unwrap();
        assert_eq!(f.sigma.atoms().collect::<Vec<_>>(), vec![(0, 1.0)]);
        assert_eq!(f.w.atoms().collect::<Vec<_>>(), vec![(1, 1.0)]);
    }

    #[test]
    fn empty_lists() {
        let f = parse_measures("scale_exponent: 3\nsigma:\nw:\n", None).unwrap();
        assert!(f.sigma.is_empty() && f.w.is_empty());
        assert_eq!(f.scale_exponent, 3);
    }

    #[test]
    fn mixed_scales_rejected() {
        let e = parse_measures("scale_exponent: 0\nsigma: 0.5 1\nscale_exponent: 1\n", None).unwrap_err();
        assert!(matches!(e, Error::Parse { line: 3, .. }), "{e}");
    }

    #[test]
    fn negative_mass_names_the_field() {
        let e = parse_measures("scale_exponent: 0\nw: 0.5 1, 2.5 -1\n", None).unwrap_err();
        match e {
            Error::Parse { line, field, .. } => {
                assert_eq!(line, 2);
                assert_eq!(field, "w[1].mass");
            }
            other => panic!("{other}"),
        }
    }

    #[test]
    fn exact_snapping() {
        assert_eq!(position_cell("1.3", 2), Ok(5));
        assert_eq!(position_cell("-0.25", 2), Ok(-1));
        assert_eq!(position_cell("-0.2", 2), Ok(-1));
        assert_eq!(position_cell("3/8", 2), Ok(1));
        assert_eq!(position_cell("0.7499999999999999999999", 2), Ok(2));
        assert_eq!(position_cell("5", -1), Ok(2));
        assert!(position_cell("1/3", 2).is_err());
        assert!(position_cell("1e3", 2).is_err());
    }

    #[test]
    fn flag_overrides_scale() {
        let f = parse_measures("scale_exponent: 0\nsigma: 0.75 1\n", Some(2)).unwrap();
        assert_eq!(f.sigma.atoms().next(), Some((3, 1.0)));
        assert!(matches!(parse_measures("sigma: 1 1\n", None), Err(Error::Parse { .. })));
    }

    #[test]
    fn unknown_field_and_malformed_atom() {
        assert!(matches!(parse_measures("foo: 1\n", None), Err(Error::Parse { line: 1, .. })));
        let e = parse_measures("scale_exponent: 0\nsigma: 1\n", None).unwrap_err();
        assert!(matches!(e, Error::Parse { ref field, .. } if field == "sigma[0]"), "{e}");
    }

    #[test]
    fn round_trip() {
        for m in [-3, 0, 4] {
            let s = GridMeasure::from_cells(m, [(-3, 0.1), (0, 1.0), (7, 2.5e-7)]).unwrap();
            let w = GridMeasure::from_cells(m, [(0, 3.0), (11, 1.0 / 3.0)]).unwrap();
            let text = format_measures(&s, &w).unwrap();
            let back = parse_measures(&text, None).unwrap();
            assert_eq!(back.sigma, s);
            assert_eq!(back.w, w);
        }
    }
}
