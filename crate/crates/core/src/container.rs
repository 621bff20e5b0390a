//! On-disk index format. One self-contained block: header (seed, scale,
//! structure kind, sketch mode, dataset name), the raw items, every canonical
//! set's sketch in set-id order, and a trailing checksum over everything
//! before it. The structure topology is *not* stored — it rebuilds
//! deterministically from the items — but sketches are, so a load skips the
//! (much larger) sketch-construction cost.

use crate::canonical::{AnyStructure, DataItem, Geometry, StructureKind};
use crate::engine::{SdIndex, SetSketch, SketchMode};
use crate::error::{Error, Result};
use crate::ibf;
use crate::sketches::{F2Sketch, LevelPlan, SdrFixed, SdrHier, StrataEstimator};
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

const MAGIC: [u8; 8] = *b"SDRQIDX1";
const VERSION: u16 = 1;
const MAX_NAME: usize = 1 << 20;

pub fn write_index<W: Write>(idx: &SdIndex, w: &mut W) -> Result<()> {
    let mut w = Fnv64Writer::new(w);
    w.write_all(&MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    w.write_all(&idx.master_seed().to_le_bytes())?;
    w.write_all(&idx.coord_scale().to_le_bytes())?;
    w.write_all(&[kind_tag(idx.kind())])?;
    write_mode(&mut w, idx.mode())?;

    let name = idx.dataset().as_bytes();
    w.write_all(&(name.len() as u32).to_le_bytes())?;
    w.write_all(name)?;

    let items = idx.items();
    w.write_all(&(items.len() as u64).to_le_bytes())?;
    for it in items {
        w.write_all(&it.id.to_le_bytes())?;
        write_geom(&mut w, &it.geom)?;
    }

    let sketches = idx.sketches();
    w.write_all(&(sketches.len() as u64).to_le_bytes())?;
    for s in sketches {
        match s {
            SetSketch::Fixed(s) => {
                w.write_all(&[1])?;
                s.write_to(&mut w)?;
            }
            SetSketch::Hier(s) => {
                w.write_all(&[2])?;
                s.write_to(&mut w)?;
            }
            SetSketch::F2(s) => {
                w.write_all(&[3])?;
                s.write_to(&mut w)?;
            }
            SetSketch::Strata(s) => {
                w.write_all(&[4])?;
                s.write_to(&mut w)?;
            }
        }
    }

    let sum = w.state;
    w.inner.write_all(&sum.to_le_bytes())?;
    Ok(())
}

pub fn read_index<R: Read>(r: &mut R) -> Result<SdIndex> {
    let mut r = Fnv64Reader::new(r);
    let magic: [u8; 8] = ibf::read_array(&mut r)?;
    if magic != MAGIC {
        return Err(Error::Corrupt("not an index file (bad magic)".into()));
    }
    let version = ibf::read_u16(&mut r)?;
    if version != VERSION {
        return Err(Error::Corrupt(format!(
            "unsupported index version {version}"
        )));
    }
    let master_seed = ibf::read_u64(&mut r)?;
    let coord_scale = ibf::read_f64(&mut r)?;
    let kind = kind_from_tag(ibf::read_array::<_, 1>(&mut r)?[0])?;
    let mode = read_mode(&mut r)?;

    let name_len = ibf::read_u32(&mut r)? as usize;
    if name_len > MAX_NAME {
        return Err(Error::Corrupt(format!("dataset name of {name_len} bytes")));
    }
    let mut name = vec![0u8; name_len];
    r.read_exact(&mut name)?;
    let dataset =
        String::from_utf8(name).map_err(|_| Error::Corrupt("dataset name not utf-8".into()))?;

    let item_count = ibf::read_u64(&mut r)? as usize;
    let mut items = Vec::with_capacity(item_count.min(1 << 24));
    for _ in 0..item_count {
        let id = ibf::read_u64(&mut r)?;
        items.push(DataItem {
            id,
            geom: read_geom(&mut r, kind)?,
        });
    }

    let sketch_count = ibf::read_u64(&mut r)? as usize;
    let expect_tag = match mode {
        SketchMode::FixedM { .. } => 1u8,
        SketchMode::Variable { .. } => 2,
        SketchMode::CountF2 { .. } => 3,
        SketchMode::CountStrata { .. } => 4,
    };
    let mut sketches = Vec::with_capacity(sketch_count.min(1 << 24));
    for i in 0..sketch_count {
        let tag = ibf::read_array::<_, 1>(&mut r)?[0];
        if tag != expect_tag {
            return Err(Error::Corrupt(format!(
                "sketch {i} has kind tag {tag}, mode {mode} expects {expect_tag}"
            )));
        }
        sketches.push(match tag {
            1 => SetSketch::Fixed(SdrFixed::read_from(&mut r)?),
            2 => SetSketch::Hier(SdrHier::read_from(&mut r)?),
            3 => SetSketch::F2(F2Sketch::read_from(&mut r)?),
            4 => SetSketch::Strata(StrataEstimator::read_from(&mut r)?),
            _ => unreachable!(),
        });
    }

    let sum = r.state;
    let stored = ibf::read_u64(&mut r.inner)?;
    if stored != sum {
        return Err(Error::Corrupt(format!(
            "checksum mismatch: stored {stored:#018x}, computed {sum:#018x}"
        )));
    }

    let structure = AnyStructure::build(kind, items)?;
    SdIndex::from_parts(structure, mode, master_seed, dataset, coord_scale, sketches)
}

pub fn save_index(idx: &SdIndex, path: impl AsRef<Path>) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_index(idx, &mut w)?;
    w.flush()?;
    Ok(())
}

pub fn load_index(path: impl AsRef<Path>) -> Result<SdIndex> {
    read_index(&mut BufReader::new(File::open(path)?))
}

fn kind_tag(kind: StructureKind) -> u8 {
    match kind {
        StructureKind::Tree1d => 1,
        StructureKind::Tree2d => 2,
        StructureKind::SegTree => 3,
        StructureKind::Grid1d => 4,
        StructureKind::Grid2d => 5,
    }
}

fn kind_from_tag(tag: u8) -> Result<StructureKind> {
    Ok(match tag {
        1 => StructureKind::Tree1d,
        2 => StructureKind::Tree2d,
        3 => StructureKind::SegTree,
        4 => StructureKind::Grid1d,
        5 => StructureKind::Grid2d,
        other => return Err(Error::Corrupt(format!("unknown structure tag {other}"))),
    })
}

fn write_mode<W: Write>(w: &mut W, mode: &SketchMode) -> Result<()> {
    match *mode {
        SketchMode::FixedM { m, epsilon } => {
            w.write_all(&[1])?;
            w.write_all(&(m as u64).to_le_bytes())?;
            w.write_all(&epsilon.to_le_bytes())?;
        }
        SketchMode::Variable { plan } => {
            w.write_all(&[2])?;
            w.write_all(&plan.j_min.to_le_bytes())?;
            w.write_all(&plan.j_max.to_le_bytes())?;
            w.write_all(&plan.epsilon.to_le_bytes())?;
        }
        SketchMode::CountF2 { delta, epsilon } => {
            w.write_all(&[3])?;
            w.write_all(&delta.to_le_bytes())?;
            w.write_all(&epsilon.to_le_bytes())?;
        }
        SketchMode::CountStrata {
            m_prime,
            delta,
            epsilon,
            universe,
        } => {
            w.write_all(&[4])?;
            w.write_all(&(m_prime as u64).to_le_bytes())?;
            w.write_all(&delta.to_le_bytes())?;
            w.write_all(&epsilon.to_le_bytes())?;
            w.write_all(&universe.to_le_bytes())?;
        }
    }
    Ok(())
}

fn read_mode<R: Read>(r: &mut R) -> Result<SketchMode> {
    Ok(match ibf::read_array::<_, 1>(r)?[0] {
        1 => SketchMode::FixedM {
            m: ibf::read_u64(r)? as usize,
            epsilon: ibf::read_f64(r)?,
        },
        2 => SketchMode::Variable {
            plan: LevelPlan {
                j_min: ibf::read_u32(r)?,
                j_max: ibf::read_u32(r)?,
                epsilon: ibf::read_f64(r)?,
            },
        },
        3 => SketchMode::CountF2 {
            delta: ibf::read_f64(r)?,
            epsilon: ibf::read_f64(r)?,
        },
        4 => SketchMode::CountStrata {
            m_prime: ibf::read_u64(r)? as usize,
            delta: ibf::read_f64(r)?,
            epsilon: ibf::read_f64(r)?,
            universe: ibf::read_u64(r)?,
        },
        other => return Err(Error::Corrupt(format!("unknown mode tag {other}"))),
    })
}

fn write_geom<W: Write>(w: &mut W, geom: &Geometry) -> Result<()> {
    match *geom {
        Geometry::P1(x) => w.write_all(&x.to_le_bytes())?,
        Geometry::P2(x, y) => {
            w.write_all(&x.to_le_bytes())?;
            w.write_all(&y.to_le_bytes())?;
        }
        Geometry::Seg(lo, hi) => {
            w.write_all(&lo.to_le_bytes())?;
            w.write_all(&hi.to_le_bytes())?;
        }
        Geometry::Cell1(i) => w.write_all(&i.to_le_bytes())?,
        Geometry::Cell2(i, j) => {
            w.write_all(&i.to_le_bytes())?;
            w.write_all(&j.to_le_bytes())?;
        }
    }
    Ok(())
}

fn read_geom<R: Read>(r: &mut R, kind: StructureKind) -> Result<Geometry> {
    let i64_of = |r: &mut R| ibf::read_u64(r).map(|v| v as i64);
    Ok(match kind {
        StructureKind::Tree1d => Geometry::P1(i64_of(r)?),
        StructureKind::Tree2d => Geometry::P2(i64_of(r)?, i64_of(r)?),
        StructureKind::SegTree => Geometry::Seg(i64_of(r)?, i64_of(r)?),
        StructureKind::Grid1d => Geometry::Cell1(ibf::read_u64(r)?),
        StructureKind::Grid2d => Geometry::Cell2(ibf::read_u64(r)?, ibf::read_u64(r)?),
    })
}

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

fn fnv_update(state: u64, bytes: &[u8]) -> u64 {
    let mut s = state;
    for &b in bytes {
        s ^= b as u64;
        s = s.wrapping_mul(FNV_PRIME);
    }
    s
}

struct Fnv64Writer<'a, W: Write> {
    inner: &'a mut W,
    state: u64,
}

impl<'a, W: Write> Fnv64Writer<'a, W> {
    fn new(inner: &'a mut W) -> Self {
        Fnv64Writer {
            inner,
            state: FNV_OFFSET,
        }
    }
}

impl<W: Write> Write for Fnv64Writer<'_, W> {
    fn write(&mut self, buf: &[u8]) -> std::io::Result<usize> {
        let n = self.inner.write(buf)?;
        self.state = fnv_update(self.state, &buf[..n]);
        Ok(n)
    }
    fn flush(&mut self) -> std::io::Result<()> {
        self.inner.flush()
    }
}

struct Fnv64Reader<'a, R: Read> {
    inner: &'a mut R,
    state: u64,
}

impl<'a, R: Read> Fnv64Reader<'a, R> {
    fn new(inner: &'a mut R) -> Self {
        Fnv64Reader {
            inner,
            state: FNV_OFFSET,
        }
    }
}

impl<R: Read> Read for Fnv64Reader<'_, R> {
    fn read(&mut self, buf: &mut [u8]) -> std::io::Result<usize> {
        let n = self.inner.read(buf)?;
        self.state = fnv_update(self.state, &buf[..n]);
        Ok(n)
    }
}
