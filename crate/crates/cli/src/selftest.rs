//! Fast invariant suite the binary can run anywhere: hash determinism,
//! decomposition coverage, sketch group laws, decode correctness against
//! planted differences, engine-vs-rescan agreement, container round trips,
//! and seed propagation into the index digests. Everything runs at small
//! sizes with trial streams derived from the command seed, and no timing
//! lands in the output, so two runs with the same seed print identical bytes.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use std::collections::{BTreeMap, HashMap, HashSet};

use sdrq::canonical::geom_in_range;
use sdrq::hashing::{
    family_salt, keyed, mix64, TAG_CELL_INDEX, TAG_CHECKSUM, TAG_F2_BUCKET, TAG_F2_SIGN,
    TAG_STRATA_LAYER,
};
use sdrq::sketches::{F2Sketch, SdrFixed, StrataEstimator};
use sdrq::{
    container, naive_diff, query_diff, synth, AnyStructure, CanonicalStructure, DataItem,
    RangeQuery, SdDiffAnswer, SdIndex, SketchMode, StructureKind,
};

use crate::{emit, Failure};

#[derive(Serialize)]
struct Check {
    name: &'static str,
    pass: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    detail: Option<String>,
}

pub fn cmd_selftest(json: bool, seed: u64) -> Result<i32, Failure> {
    let mut checks = Vec::new();
    let mut push = |name: &'static str, r: Result<(), String>| {
        checks.push(Check {
            name,
            pass: r.is_ok(),
            detail: r.err(),
        });
    };
    push("hash-family-determinism", hash_family_determinism(seed));
    push(
        "decomposition-net-coverage",
        decomposition_net_coverage(seed),
    );
    push("sketch-group-laws", sketch_group_laws(seed));
    push("ibf-decode-oracle", ibf_decode_oracle(seed));
    push("engine-oracle-equivalence", engine_oracle_equivalence(seed));
    push("container-round-trip", container_round_trip(seed));
    push(
        "container-corruption-detected",
        container_corruption_detected(seed),
    );
    let digests = match seed_digests(seed) {
        Ok(d) => {
            push("seed-propagation", Ok(()));
            d
        }
        Err(e) => {
            push("seed-propagation", Err(e));
            BTreeMap::new()
        }
    };

    let passed = checks.iter().filter(|c| c.pass).count();
    let pass = passed == checks.len();
    if json {
        #[derive(Serialize)]
        struct Out<'a> {
            command: &'static str,
            pass: bool,
            seed: u64,
            checks: &'a [Check],
            digests: &'a BTreeMap<&'static str, String>,
        }
        emit(&Out {
            command: "selftest",
            pass,
            seed,
            checks: &checks,
            digests: &digests,
        })?;
    } else {
        for c in &checks {
            match &c.detail {
                None => println!("ok {}", c.name),
                Some(d) => println!("FAIL {}: {d}", c.name),
            }
        }
        for (label, d) in &digests {
            println!("digest {label} {d}");
        }
        println!(
            "selftest: {passed}/{} checks passed, seed {seed}",
            checks.len()
        );
    }
    Ok(if pass { 0 } else { 3 })
}

fn err(e: impl std::fmt::Display) -> String {
    e.to_string()
}

/// Salts repeat, differ across (tag, index), and actually steer `keyed`.
fn hash_family_determinism(seed: u64) -> Result<(), String> {
    let tags = [
        TAG_CELL_INDEX,
        TAG_CHECKSUM,
        TAG_STRATA_LAYER,
        TAG_F2_BUCKET,
        TAG_F2_SIGN,
    ];
    let mut salts = Vec::new();
    for &tag in &tags {
        for index in 0..4 {
            let s = family_salt(seed, tag, index);
            if s != family_salt(seed, tag, index) {
                return Err(format!(
                    "salt for (tag {tag:#x}, index {index}) not repeatable"
                ));
            }
            salts.push(s);
        }
    }
    let distinct: HashSet<u64> = salts.iter().copied().collect();
    if distinct.len() != salts.len() {
        return Err(format!(
            "{} collisions among {} (tag, index) salts",
            salts.len() - distinct.len(),
            salts.len()
        ));
    }
    for x in [0u64, 1, 0xdead_beef, u64::MAX] {
        if keyed(salts[0], x) != keyed(salts[0], x) || mix64(x) != mix64(x) {
            return Err(format!("keyed/mix64 not repeatable at x = {x:#x}"));
        }
    }
    if keyed(salts[0], 7) == keyed(salts[1], 7) && keyed(salts[0], 8) == keyed(salts[1], 8) {
        return Err("two distinct salts produced the same keyed values".into());
    }
    Ok(())
}

fn sample_items(kind: StructureKind, n: usize, rng: &mut ChaCha8Rng) -> Vec<DataItem> {
    let mut used = HashSet::new();
    synth::unique_ids(n, &mut used, rng)
        .into_iter()
        .enumerate()
        .map(|(idx, id)| match kind {
            StructureKind::Tree1d => DataItem::p1(id, rng.gen_range(0..=400)),
            StructureKind::Tree2d => {
                DataItem::p2(id, rng.gen_range(0..=200), rng.gen_range(0..=200))
            }
            StructureKind::SegTree => {
                // one full-width segment keeps every sampled stab in-domain
                if idx == 0 {
                    return DataItem::seg(id, 0, 200);
                }
                let (a, b) = (rng.gen_range(0..=200), rng.gen_range(0..=200));
                DataItem::seg(id, a.min(b), a.max(b))
            }
            // seed every cell first so queries over the full extent are legal
            StructureKind::Grid1d => {
                let i = if idx < 8 {
                    idx as u64
                } else {
                    rng.gen_range(0..8)
                };
                DataItem::cell1(id, i)
            }
            StructureKind::Grid2d => {
                let (i, j) = if idx < 36 {
                    (idx as u64 / 6, idx as u64 % 6)
                } else {
                    (rng.gen_range(0..6), rng.gen_range(0..6))
                };
                DataItem::cell2(id, i, j)
            }
        })
        .collect()
}

fn sample_query(kind: StructureKind, rng: &mut ChaCha8Rng) -> RangeQuery {
    match kind {
        StructureKind::Tree1d => synth::random_interval(400, rng),
        StructureKind::Tree2d => {
            let (x1, x2) = (rng.gen_range(0..=200), rng.gen_range(0..=200));
            let (y1, y2) = (rng.gen_range(0..=200), rng.gen_range(0..=200));
            RangeQuery::Rect {
                x_lo: x1.min(x2),
                x_hi: x1.max(x2),
                y_lo: y1.min(y2),
                y_hi: y1.max(y2),
            }
        }
        StructureKind::SegTree => RangeQuery::Stab {
            x: rng.gen_range(0..=200),
        },
        StructureKind::Grid1d => {
            let (a, b) = (rng.gen_range(0..8u64), rng.gen_range(0..8u64));
            RangeQuery::Grid1 {
                lo: a.min(b),
                hi: a.max(b),
            }
        }
        StructureKind::Grid2d => {
            let (i1, i2) = (rng.gen_range(0..6u64), rng.gen_range(0..6u64));
            let (j1, j2) = (rng.gen_range(0..6u64), rng.gen_range(0..6u64));
            RangeQuery::Grid2 {
                i_lo: i1.min(i2),
                j_lo: j1.min(j2),
                i_hi: i1.max(i2),
                j_hi: j1.max(j2),
            }
        }
    }
}

/// Every structure's signed decomposition covers in-range items exactly once
/// net and out-of-range items zero times, checked item by item.
fn decomposition_net_coverage(seed: u64) -> Result<(), String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5e1f_7e57_0002);
    let kinds = [
        StructureKind::Tree1d,
        StructureKind::Tree2d,
        StructureKind::SegTree,
        StructureKind::Grid1d,
        StructureKind::Grid2d,
    ];
    for kind in kinds {
        let items = sample_items(kind, 48, &mut rng);
        let s = AnyStructure::build(kind, items.clone()).map_err(err)?;
        for _ in 0..40 {
            let q = sample_query(kind, &mut rng);
            let dec = s.decompose(&q).map_err(err)?;
            let mut net: HashMap<u64, i64> = HashMap::new();
            for &(set, sign) in &dec.terms {
                for &id in s.set_elements(set).map_err(err)? {
                    *net.entry(id).or_insert(0) += sign.factor();
                }
            }
            for it in &items {
                let want = i64::from(geom_in_range(&it.geom, &q));
                let got = net.get(&it.id).copied().unwrap_or(0);
                if got != want {
                    return Err(format!(
                        "{kind}: id {} covered {got}x net, expected {want} for {q:?}",
                        it.id
                    ));
                }
            }
        }
    }
    Ok(())
}

/// Linearity of all three sketch types: building from a union equals adding
/// the parts, and adding then subtracting restores the original, bit for bit.
fn sketch_group_laws(seed: u64) -> Result<(), String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5e1f_7e57_0003);
    for trial in 0..30 {
        let mut used = HashSet::new();
        let a = synth::unique_ids(rng.gen_range(1..=24), &mut used, &mut rng);
        let b = synth::unique_ids(rng.gen_range(1..=24), &mut used, &mut rng);
        let both: Vec<u64> = a.iter().chain(&b).copied().collect();
        let fail = |what: &str| Err(format!("trial {trial}: {what}"));

        let sa = SdrFixed::build(&a, 8, 0.1, seed).map_err(err)?;
        let sb = SdrFixed::build(&b, 8, 0.1, seed).map_err(err)?;
        let mut t = sa.clone();
        t.add_assign(&sb).map_err(err)?;
        if t != SdrFixed::build(&both, 8, 0.1, seed).map_err(err)? {
            return fail("difference sketch of a+b differs from a direct build");
        }
        t.sub_assign(&sb).map_err(err)?;
        if t != sa {
            return fail("difference sketch add-then-subtract did not restore");
        }

        let fa = F2Sketch::build(&a, 0.5, 0.25, seed).map_err(err)?;
        let fb = F2Sketch::build(&b, 0.5, 0.25, seed).map_err(err)?;
        let mut t = fa.clone();
        t.add_assign(&fb).map_err(err)?;
        if t != F2Sketch::build(&both, 0.5, 0.25, seed).map_err(err)? {
            return fail("moment sketch of a+b differs from a direct build");
        }
        t.sub_assign(&fb).map_err(err)?;
        if t != fa {
            return fail("moment sketch add-then-subtract did not restore");
        }

        let sa = StrataEstimator::build(&a, 8, 0.25, 1 << 48, seed).map_err(err)?;
        let sb = StrataEstimator::build(&b, 8, 0.25, 1 << 48, seed).map_err(err)?;
        let mut t = sa.clone();
        t.add_assign(&sb).map_err(err)?;
        if t != StrataEstimator::build(&both, 8, 0.25, 1 << 48, seed).map_err(err)? {
            return fail("stratified estimator of a+b differs from a direct build");
        }
        t.sub_assign(&sb).map_err(err)?;
        if t != sa {
            return fail("stratified estimator add-then-subtract did not restore");
        }
    }
    Ok(())
}

/// At half the rated capacity, every complete decode must list exactly the
/// planted difference; incomplete decodes stay rare.
fn ibf_decode_oracle(seed: u64) -> Result<(), String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5e1f_7e57_0004);
    let trials = 100;
    let mut incomplete = 0;
    for trial in 0..trials {
        let ids = synth::planted_ids(50, 4, 4, &mut rng);
        let sa = SdrFixed::build(&ids.a, 16, 0.1, seed).map_err(err)?;
        let sb = SdrFixed::build(&ids.b, 16, 0.1, seed).map_err(err)?;
        let dec = sa.report(&sb).map_err(err)?;
        if !dec.complete {
            incomplete += 1;
            continue;
        }
        let sorted = |mut v: Vec<u64>| {
            v.sort_unstable();
            v
        };
        if sorted(dec.positive) != sorted(ids.only_a) || sorted(dec.negative) != sorted(ids.only_b)
        {
            return Err(format!(
                "trial {trial}: complete decode disagrees with planted ids"
            ));
        }
    }
    if incomplete > trials / 4 {
        return Err(format!(
            "{incomplete}/{trials} decodes incomplete at half capacity"
        ));
    }
    Ok(())
}

/// Indexed queries agree with a rescan of the raw items, on an interval tree
/// and on a prefix grid (the one with subtractive terms).
fn engine_oracle_equivalence(seed: u64) -> Result<(), String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5e1f_7e57_0005);
    let mut undecoded = 0;

    let ids = synth::planted_ids(56, 4, 4, &mut rng);
    let mut items_a = Vec::new();
    let mut items_b = Vec::new();
    for &id in &ids.a[..56] {
        // shared ids share coordinates, so windowed differences stay small
        let x = rng.gen_range(0..=512);
        items_a.push(DataItem::p1(id, x));
        items_b.push(DataItem::p1(id, x));
    }
    for &id in &ids.only_a {
        items_a.push(DataItem::p1(id, rng.gen_range(0..=512)));
    }
    for &id in &ids.only_b {
        items_b.push(DataItem::p1(id, rng.gen_range(0..=512)));
    }
    let ia = SdIndex::build(
        StructureKind::Tree1d,
        items_a.clone(),
        SketchMode::fixed(16, 0.1),
        seed,
        "selftest-a",
    )
    .map_err(err)?;
    let ib = SdIndex::build(
        StructureKind::Tree1d,
        items_b.clone(),
        SketchMode::fixed(16, 0.1),
        seed,
        "selftest-b",
    )
    .map_err(err)?;
    for t in 0..20 {
        let q = synth::random_interval(512, &mut rng);
        match query_diff(&ia, &q, &ib, &q).map_err(err)? {
            SdDiffAnswer::Diff {
                only_in_a,
                only_in_b,
                ..
            } => {
                if (only_in_a, only_in_b) != naive_diff(&items_a, &q, &items_b, &q) {
                    return Err(format!(
                        "interval query {t}: decode disagrees with a rescan"
                    ));
                }
            }
            SdDiffAnswer::TooLarge => {
                return Err(format!(
                    "interval query {t}: a difference of <= 8 reported too large"
                ))
            }
            SdDiffAnswer::DecodeFailed => undecoded += 1,
        }
    }

    let ids = synth::planted_ids(40, 3, 3, &mut rng);
    let mut items_a = Vec::new();
    let mut items_b = Vec::new();
    for (idx, &id) in ids.a[..40].iter().enumerate() {
        let (i, j) = if idx < 36 {
            (idx as u64 / 6, idx as u64 % 6)
        } else {
            (rng.gen_range(0..6), rng.gen_range(0..6))
        };
        items_a.push(DataItem::cell2(id, i, j));
        items_b.push(DataItem::cell2(id, i, j));
    }
    for &id in &ids.only_a {
        items_a.push(DataItem::cell2(
            id,
            rng.gen_range(0..6),
            rng.gen_range(0..6),
        ));
    }
    for &id in &ids.only_b {
        items_b.push(DataItem::cell2(
            id,
            rng.gen_range(0..6),
            rng.gen_range(0..6),
        ));
    }
    let ga = SdIndex::build(
        StructureKind::Grid2d,
        items_a.clone(),
        SketchMode::fixed(16, 0.1),
        seed,
        "selftest-ga",
    )
    .map_err(err)?;
    let gb = SdIndex::build(
        StructureKind::Grid2d,
        items_b.clone(),
        SketchMode::fixed(16, 0.1),
        seed,
        "selftest-gb",
    )
    .map_err(err)?;
    for t in 0..20 {
        let q = sample_query(StructureKind::Grid2d, &mut rng);
        match query_diff(&ga, &q, &gb, &q).map_err(err)? {
            SdDiffAnswer::Diff {
                only_in_a,
                only_in_b,
                ..
            } => {
                if (only_in_a, only_in_b) != naive_diff(&items_a, &q, &items_b, &q) {
                    return Err(format!("grid query {t}: decode disagrees with a rescan"));
                }
            }
            SdDiffAnswer::TooLarge => {
                return Err(format!(
                    "grid query {t}: a difference of <= 6 reported too large"
                ))
            }
            SdDiffAnswer::DecodeFailed => undecoded += 1,
        }
    }

    if undecoded > 5 {
        return Err(format!(
            "{undecoded}/40 queries failed to decode at light load"
        ));
    }
    Ok(())
}

/// Save/load returns a byte-identical index whose sketches still match a
/// direct rebuild and whose answers match the in-memory copy.
fn container_round_trip(seed: u64) -> Result<(), String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5e1f_7e57_0006);
    let items: Vec<DataItem> = (0..40u64)
        .map(|k| DataItem::cell2(1000 + k, rng.gen_range(0..5), rng.gen_range(0..5)))
        .collect();
    let idx = SdIndex::build(
        StructureKind::Grid2d,
        items,
        SketchMode::fixed(8, 0.125),
        seed,
        "rt",
    )
    .map_err(err)?;
    let dir = tempfile::tempdir().map_err(err)?;
    let path = dir.path().join("selftest.sdrq");
    container::save_index(&idx, &path).map_err(err)?;
    let back = container::load_index(&path).map_err(err)?;
    back.verify_sketches()
        .map_err(|e| format!("reloaded index fails verification: {e}"))?;

    let mut orig = Vec::new();
    container::write_index(&idx, &mut orig).map_err(err)?;
    let mut again = Vec::new();
    container::write_index(&back, &mut again).map_err(err)?;
    if orig != again {
        return Err("save/load round trip is not byte-identical".into());
    }

    let q = RangeQuery::Grid2 {
        i_lo: 1,
        j_lo: 0,
        i_hi: 3,
        j_hi: 4,
    };
    match query_diff(&idx, &q, &back, &q).map_err(err)? {
        SdDiffAnswer::Diff {
            only_in_a,
            only_in_b,
            ..
        } if only_in_a.is_empty() && only_in_b.is_empty() => {}
        _ => return Err("reloaded index no longer matches its in-memory source".into()),
    }
    Ok(())
}

/// A single flipped byte in the serialized index must fail the load.
fn container_corruption_detected(seed: u64) -> Result<(), String> {
    let items: Vec<DataItem> = (0..16)
        .map(|k| DataItem::p1(100 + k, (k as i64 * 7) % 40))
        .collect();
    let idx = SdIndex::build(
        StructureKind::Tree1d,
        items,
        SketchMode::fixed(4, 0.25),
        seed,
        "c",
    )
    .map_err(err)?;
    let mut bytes = Vec::new();
    container::write_index(&idx, &mut bytes).map_err(err)?;
    if container::read_index(&mut &bytes[..]).is_err() {
        return Err("clean bytes failed to parse".into());
    }
    let mid = bytes.len() / 2;
    bytes[mid] ^= 0x40;
    match container::read_index(&mut &bytes[..]) {
        Err(_) => Ok(()),
        Ok(_) => Err(format!("flipped byte at offset {mid} went unnoticed")),
    }
}

/// One digest per sketch mode over a constant dataset: the digest is the
/// index checksum, so it moves with the seed and with nothing else.
fn seed_digests(seed: u64) -> Result<BTreeMap<&'static str, String>, String> {
    let d1 = digest_all(seed)?;
    if digest_all(seed)? != d1 {
        return Err("same-seed digests not reproducible".into());
    }
    let d2 = digest_all(seed ^ 1)?;
    for (label, v) in &d1 {
        if d2.get(label) == Some(v) {
            return Err(format!("{label}: digest ignores the seed"));
        }
    }
    Ok(d1)
}

fn digest_all(seed: u64) -> Result<BTreeMap<&'static str, String>, String> {
    let modes: [(&'static str, SketchMode); 4] = [
        ("fixed", SketchMode::fixed(8, 0.1)),
        ("variable", SketchMode::variable_for(32, 0.1).map_err(err)?),
        ("count-f2", SketchMode::count_f2(0.5, 0.25)),
        (
            "count-strata",
            SketchMode::count_strata(0.5, 0.25, 1 << 16).map_err(err)?,
        ),
    ];
    let mut out = BTreeMap::new();
    for (label, mode) in modes {
        // constant inputs: only the seed may move the digest
        let mut rng = ChaCha8Rng::seed_from_u64(0x0d15_e55e);
        let items: Vec<DataItem> = (0..32u64)
            .map(|k| DataItem::p1(10_000 + k * 3, rng.gen_range(0..=256)))
            .collect();
        let idx =
            SdIndex::build(StructureKind::Tree1d, items, mode, seed, "digest").map_err(err)?;
        let mut bytes = Vec::new();
        container::write_index(&idx, &mut bytes).map_err(err)?;
        let tail: [u8; 8] = bytes[bytes.len() - 8..].try_into().expect("8-byte tail");
        out.insert(label, format!("{:016x}", u64::from_le_bytes(tail)));
    }
    Ok(out)
}
