//! Line-delimited dataset records: one JSON object per line with a set name,
//! a 48-bit id, and geometry fields matching the declared structure kind
//! (x | x,y | lo,hi | i | i,j). Ids must be unique within a set. Float
//! coordinates are only accepted together with a quantization scale and are
//! stored as round(v * scale); the scale is recorded in the built index so
//! query ranges quantize the same way.

use serde::Deserialize;
use std::collections::{BTreeMap, HashSet};
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use sdrq::synth::MAX_ID;
use sdrq::{DataItem, StructureKind};

use crate::Failure;

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRecord {
    set: String,
    id: u64,
    x: Option<serde_json::Number>,
    y: Option<serde_json::Number>,
    lo: Option<serde_json::Number>,
    hi: Option<serde_json::Number>,
    i: Option<u64>,
    j: Option<u64>,
}

pub fn load_datasets(
    path: &Path,
    kind: StructureKind,
    scale: Option<f64>,
) -> Result<BTreeMap<String, Vec<DataItem>>, Failure> {
    if let Some(s) = scale {
        if !(s.is_finite() && s > 0.0) {
            return Err(Failure::Usage(format!(
                "--scale {s} must be positive and finite"
            )));
        }
        if matches!(kind, StructureKind::Grid1d | StructureKind::Grid2d) {
            return Err(Failure::Usage(
                "grid cell indices are integral; --scale does not apply".into(),
            ));
        }
    }
    let file = File::open(path).map_err(|e| Failure::Data(format!("{}: {e}", path.display())))?;
    let mut sets: BTreeMap<String, Vec<DataItem>> = BTreeMap::new();
    let mut seen: BTreeMap<String, HashSet<u64>> = BTreeMap::new();
    for (idx, line) in BufReader::new(file).lines().enumerate() {
        let lineno = idx + 1;
        let line = line.map_err(|e| Failure::Data(format!("line {lineno}: {e}")))?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: RawRecord = serde_json::from_str(&line)
            .map_err(|e| Failure::Data(format!("line {lineno}: {e}")))?;
        if rec.id > MAX_ID {
            return Err(Failure::Data(format!(
                "line {lineno}: id {} does not fit in 48 bits",
                rec.id
            )));
        }
        if !seen.entry(rec.set.clone()).or_default().insert(rec.id) {
            return Err(Failure::Data(format!(
                "line {lineno}: duplicate id {} in set {:?}",
                rec.id, rec.set
            )));
        }
        let item = to_item(&rec, kind, scale, lineno)?;
        sets.entry(rec.set).or_default().push(item);
    }
    if sets.is_empty() {
        return Err(Failure::Data(format!("{}: no records", path.display())));
    }
    Ok(sets)
}

fn to_item(
    rec: &RawRecord,
    kind: StructureKind,
    scale: Option<f64>,
    lineno: usize,
) -> Result<DataItem, Failure> {
    // every field that does not belong to this kind must be absent
    let stray = [
        ("x", rec.x.is_some()),
        ("y", rec.y.is_some()),
        ("lo", rec.lo.is_some()),
        ("hi", rec.hi.is_some()),
        ("i", rec.i.is_some()),
        ("j", rec.j.is_some()),
    ];
    let wanted: &[&str] = match kind {
        StructureKind::Tree1d => &["x"],
        StructureKind::Tree2d => &["x", "y"],
        StructureKind::SegTree => &["lo", "hi"],
        StructureKind::Grid1d => &["i"],
        StructureKind::Grid2d => &["i", "j"],
    };
    for (name, present) in stray {
        if present && !wanted.contains(&name) {
            return Err(Failure::Data(format!(
                "line {lineno}: field {name:?} does not belong in a {kind} record"
            )));
        }
    }
    let num = |field: &Option<serde_json::Number>, name: &str| {
        field.clone().ok_or_else(|| {
            Failure::Data(format!(
                "line {lineno}: {kind} records need a {name:?} field"
            ))
        })
    };
    let cell = |field: Option<u64>, name: &str| {
        field.ok_or_else(|| {
            Failure::Data(format!(
                "line {lineno}: {kind} records need a {name:?} field"
            ))
        })
    };
    Ok(match kind {
        StructureKind::Tree1d => {
            DataItem::p1(rec.id, coord(&num(&rec.x, "x")?, scale, "x", lineno)?)
        }
        StructureKind::Tree2d => DataItem::p2(
            rec.id,
            coord(&num(&rec.x, "x")?, scale, "x", lineno)?,
            coord(&num(&rec.y, "y")?, scale, "y", lineno)?,
        ),
        StructureKind::SegTree => {
            let lo = coord(&num(&rec.lo, "lo")?, scale, "lo", lineno)?;
            let hi = coord(&num(&rec.hi, "hi")?, scale, "hi", lineno)?;
            if lo > hi {
                return Err(Failure::Data(format!(
                    "line {lineno}: segment has lo {lo} > hi {hi}"
                )));
            }
            DataItem::seg(rec.id, lo, hi)
        }
        StructureKind::Grid1d => DataItem::cell1(rec.id, cell(rec.i, "i")?),
        StructureKind::Grid2d => DataItem::cell2(rec.id, cell(rec.i, "i")?, cell(rec.j, "j")?),
    })
}

fn coord(
    n: &serde_json::Number,
    scale: Option<f64>,
    what: &str,
    lineno: usize,
) -> Result<i64, Failure> {
    match scale {
        None => n.as_i64().ok_or_else(|| {
            Failure::Data(format!(
                "line {lineno}: {what} = {n} is not an integer; pass --scale to quantize floats"
            ))
        }),
        Some(s) => {
            let v = n.as_f64().ok_or_else(|| {
                Failure::Data(format!("line {lineno}: {what} = {n} is not finite"))
            })?;
            let q = (v * s).round();
            if !q.is_finite() || q.abs() >= (1i64 << 62) as f64 {
                return Err(Failure::Data(format!(
                    "line {lineno}: {what} = {n} is out of range after scaling by {s}"
                )));
            }
            Ok(q as i64)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use sdrq::Geometry;
    use std::io::Write;

    fn write_lines(lines: &[&str]) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        for l in lines {
            writeln!(f, "{l}").unwrap();
        }
        f
    }

    #[test]
    fn test_loads_points_and_groups_by_set() {
        let f = write_lines(&[
            r#"{"set":"a","id":1,"x":5}"#,
            r#"{"set":"b","id":1,"x":7}"#,
            r#"{"set":"a","id":2,"x":-3}"#,
            "",
        ]);
        let sets = load_datasets(f.path(), StructureKind::Tree1d, None).unwrap();
        assert_eq!(sets.len(), 2);
        assert_eq!(sets["a"].len(), 2);
        assert_eq!(sets["a"][1].geom, Geometry::P1(-3));
    }

    #[test]
    fn test_rejects_bad_records_with_line_numbers() {
        let cases: &[(&[&str], StructureKind, &str)] = &[
            (
                &[r#"{"set":"a","id":1,"x":1}"#, "not json"],
                StructureKind::Tree1d,
                "line 2",
            ),
            (
                &[r#"{"set":"a","id":9,"x":1}"#, r#"{"set":"a","id":9,"x":2}"#],
                StructureKind::Tree1d,
                "duplicate id 9",
            ),
            (
                &[r#"{"set":"a","id":281474976710656,"x":1}"#],
                StructureKind::Tree1d,
                "48 bits",
            ),
            (
                &[r#"{"set":"a","id":1,"lo":5,"hi":2}"#],
                StructureKind::SegTree,
                "lo 5 > hi 2",
            ),
            (
                &[r#"{"set":"a","id":1,"x":1,"y":2}"#],
                StructureKind::Tree1d,
                "\"y\"",
            ),
            (
                &[r#"{"set":"a","id":1,"x":2.5}"#],
                StructureKind::Tree1d,
                "not an integer",
            ),
            (&[r#"{"set":"a","id":1}"#], StructureKind::Grid2d, "\"i\""),
        ];
        for (lines, kind, needle) in cases {
            let f = write_lines(lines);
            match load_datasets(f.path(), *kind, None) {
                Err(Failure::Data(msg)) => {
                    assert!(msg.contains(needle), "{msg:?} should mention {needle:?}")
                }
                other => panic!("expected data failure mentioning {needle:?}, got {other:?}"),
            }
        }
    }

    #[test]
    fn test_scale_quantizes_floats() {
        let f = write_lines(&[r#"{"set":"a","id":1,"x":2.34,"y":-0.26}"#]);
        let sets = load_datasets(f.path(), StructureKind::Tree2d, Some(10.0)).unwrap();
        assert_eq!(sets["a"][0].geom, Geometry::P2(23, -3));
        // grids take no scale
        let g = write_lines(&[r#"{"set":"a","id":1,"i":3}"#]);
        assert!(matches!(
            load_datasets(g.path(), StructureKind::Grid1d, Some(2.0)),
            Err(Failure::Usage(_))
        ));
    }
}
