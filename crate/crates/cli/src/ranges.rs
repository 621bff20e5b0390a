//! Query-range syntax, one form per structure kind (whitespace is ignored):
//!
//! * tree1d   `x:[lo,hi]`
//! * tree2d   `x:[lo,hi],y:[lo,hi]`
//! * segtree  `x:point` (stab)
//! * grid1d   `(lo)-(hi)`
//! * grid2d   `(i,j)-(k,l)` (corner to corner, inclusive)
//!
//! Intervals are closed; an inverted interval is a valid empty range. Bounds
//! on an index built with --scale are quantized with the same rounding as its
//! data; on an unscaled index they must be integers.

use sdrq::{RangeQuery, StructureKind};

use crate::Failure;

pub fn parse(s: &str, kind: StructureKind, scale: f64) -> Result<RangeQuery, Failure> {
    let t: String = s.chars().filter(|c| !c.is_whitespace()).collect();
    let bad =
        |expect: &str| Failure::Usage(format!("range {s:?} does not parse; {kind} takes {expect}"));
    match kind {
        StructureKind::Tree1d => {
            let (lo, hi) = interval(&t, scale).ok_or_else(|| bad("x:[lo,hi]"))?;
            Ok(RangeQuery::Interval { lo, hi })
        }
        StructureKind::Tree2d => {
            let (x_part, y_part) = t
                .split_once("],")
                .ok_or_else(|| bad("x:[lo,hi],y:[lo,hi]"))?;
            let x = format!("{x_part}]");
            let (x_lo, x_hi) = interval(&x, scale).ok_or_else(|| bad("x:[lo,hi],y:[lo,hi]"))?;
            let y = y_part.strip_prefix("y:").map(|rest| format!("x:{rest}"));
            let (y_lo, y_hi) = y
                .as_deref()
                .and_then(|p| interval(p, scale))
                .ok_or_else(|| bad("x:[lo,hi],y:[lo,hi]"))?;
            Ok(RangeQuery::Rect {
                x_lo,
                x_hi,
                y_lo,
                y_hi,
            })
        }
        StructureKind::SegTree => {
            let x = t
                .strip_prefix("x:")
                .and_then(|v| bound(v, scale))
                .ok_or_else(|| bad("a stab point x:value"))?;
            Ok(RangeQuery::Stab { x })
        }
        StructureKind::Grid1d => {
            let (a, b) = paren_pair(&t).ok_or_else(|| bad("(lo)-(hi)"))?;
            let lo = cell1(&a).ok_or_else(|| bad("(lo)-(hi) with cell indices"))?;
            let hi = cell1(&b).ok_or_else(|| bad("(lo)-(hi) with cell indices"))?;
            Ok(RangeQuery::Grid1 { lo, hi })
        }
        StructureKind::Grid2d => {
            let (a, b) = paren_pair(&t).ok_or_else(|| bad("(i,j)-(k,l)"))?;
            let (i_lo, j_lo) = cell2(&a).ok_or_else(|| bad("(i,j)-(k,l) with cell indices"))?;
            let (i_hi, j_hi) = cell2(&b).ok_or_else(|| bad("(i,j)-(k,l) with cell indices"))?;
            Ok(RangeQuery::Grid2 {
                i_lo,
                j_lo,
                i_hi,
                j_hi,
            })
        }
    }
}

/// "x:[a,b]" -> quantized closed bounds.
fn interval(t: &str, scale: f64) -> Option<(i64, i64)> {
    let inner = t.strip_prefix("x:[")?.strip_suffix(']')?;
    let (a, b) = split_top(inner)?;
    Some((bound(&a, scale)?, bound(&b, scale)?))
}

/// Split "a,b" on the comma separating the two numbers (the first comma not
/// inside a number — numbers have no commas, so just the first one).
fn split_top(s: &str) -> Option<(String, String)> {
    let (a, b) = s.split_once(',')?;
    (!a.is_empty() && !b.is_empty() && !b.contains(',')).then(|| (a.to_string(), b.to_string()))
}

fn paren_pair(t: &str) -> Option<(String, String)> {
    let (a, b) = t.split_once(")-(")?;
    Some((
        a.strip_prefix('(')?.to_string(),
        b.strip_suffix(')')?.to_string(),
    ))
}

fn cell1(tok: &str) -> Option<u64> {
    tok.parse().ok()
}

fn cell2(tok: &str) -> Option<(u64, u64)> {
    let (i, j) = tok.split_once(',')?;
    Some((i.parse().ok()?, j.parse().ok()?))
}

/// One coordinate bound, quantized like the data: round(v * scale). Unscaled
/// indexes (scale 1) take integers only.
fn bound(tok: &str, scale: f64) -> Option<i64> {
    if let Ok(v) = tok.parse::<i64>() {
        if scale == 1.0 {
            return Some(v);
        }
        let q = (v as f64 * scale).round();
        return (q.abs() < (1i64 << 62) as f64).then_some(q as i64);
    }
    let v: f64 = tok.parse().ok()?;
    if !v.is_finite() || scale == 1.0 {
        return None; // fractional bound on an unscaled index
    }
    let q = (v * scale).round();
    (q.is_finite() && q.abs() < (1i64 << 62) as f64).then_some(q as i64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn test_each_kind_parses() {
        assert_eq!(
            parse("x:[ -5, 12 ]", StructureKind::Tree1d, 1.0).unwrap(),
            RangeQuery::Interval { lo: -5, hi: 12 }
        );
        assert_eq!(
            parse("x:[0,3],y:[2,9]", StructureKind::Tree2d, 1.0).unwrap(),
            RangeQuery::Rect {
                x_lo: 0,
                x_hi: 3,
                y_lo: 2,
                y_hi: 9
            }
        );
        assert_eq!(
            parse("x:7", StructureKind::SegTree, 1.0).unwrap(),
            RangeQuery::Stab { x: 7 }
        );
        assert_eq!(
            parse("(2)-(5)", StructureKind::Grid1d, 1.0).unwrap(),
            RangeQuery::Grid1 { lo: 2, hi: 5 }
        );
        assert_eq!(
            parse("(0,1)-(3,4)", StructureKind::Grid2d, 1.0).unwrap(),
            RangeQuery::Grid2 {
                i_lo: 0,
                j_lo: 1,
                i_hi: 3,
                j_hi: 4
            }
        );
    }

    #[test]
    fn test_scaled_bounds_quantize() {
        assert_eq!(
            parse("x:[0.25,1.26]", StructureKind::Tree1d, 100.0).unwrap(),
            RangeQuery::Interval { lo: 25, hi: 126 }
        );
        assert_eq!(
            parse("x:[2,4]", StructureKind::Tree1d, 10.0).unwrap(),
            RangeQuery::Interval { lo: 20, hi: 40 }
        );
        // fractional bound on an unscaled index is refused
        assert!(parse("x:[0.5,2]", StructureKind::Tree1d, 1.0).is_err());
    }

    #[test]
    fn test_syntax_errors_are_usage_failures() {
        for (s, kind) in [
            ("x:[1,2", StructureKind::Tree1d),
            ("y:[1,2]", StructureKind::Tree1d),
            ("x:[1,2],z:[1,2]", StructureKind::Tree2d),
            ("x:[1,2]", StructureKind::Tree2d),
            ("x:", StructureKind::SegTree),
            ("(1)-(2,3)", StructureKind::Grid1d),
            ("(1,2)-(3)", StructureKind::Grid2d),
            ("(-1,2)-(3,4)", StructureKind::Grid2d),
            ("x:[1,2,3]", StructureKind::Tree1d),
        ] {
            assert!(
                matches!(parse(s, kind, 1.0), Err(Failure::Usage(_))),
                "{s:?} on {kind} should be a usage failure"
            );
        }
    }
}
