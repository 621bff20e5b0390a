//! Seeded trial loops that re-measure the statistical guarantees against the
//! naive oracle: decode failure rate under load, count-estimate accuracy,
//! end-to-end query correctness, and latency scaling. One structured report
//! per run, plus CSV plot rows behind --plot.
//!
//! Suites run their trials serially; every trial's inputs derive from the
//! command seed, so reports reproduce exactly (timings aside).

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use std::path::Path;
use std::time::Instant;

use sdrq::sketches::{strata_m_prime, F2Sketch, SdrFixed, StrataEstimator};
use sdrq::{
    naive_diff, query_diff, synth, DataItem, RangeQuery, SdDiffAnswer, SdIndex, SketchMode,
    StructureKind,
};

use crate::{emit, Failure, SuiteArg};

#[derive(Clone, Copy, Serialize)]
pub struct BenchParams {
    pub m: usize,
    pub epsilon: f64,
    pub delta: f64,
    pub n: usize,
    pub seed: u64,
}

#[derive(Clone, Copy, Serialize)]
pub struct Quantiles {
    pub p50: f64,
    pub p90: f64,
    pub p99: f64,
}

impl Quantiles {
    fn of(mut xs: Vec<f64>) -> Quantiles {
        assert!(!xs.is_empty());
        xs.sort_by(f64::total_cmp);
        let at = |q: f64| xs[((xs.len() - 1) as f64 * q).round() as usize];
        Quantiles {
            p50: at(0.5),
            p90: at(0.9),
            p99: at(0.99),
        }
    }
}

#[derive(Serialize)]
pub struct BenchReport {
    pub suite: &'static str,
    pub trials: usize,
    pub params: BenchParams,
    /// Fraction of trials that missed their guarantee (failed decode, wrong
    /// answer, or estimate outside the promised band).
    pub failure_rate: f64,
    /// Quantiles of |estimate/truth - 1|; absent for exact-answer suites.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub accuracy_quantiles: Option<Quantiles>,
    pub timing_ms_quantiles: Quantiles,
    /// Median-latency ratio between the largest and smallest size, scaling
    /// suite only.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub scaling_ratio: Option<f64>,
}

impl BenchReport {
    fn new(
        suite: &'static str,
        trials: usize,
        params: BenchParams,
        failures: usize,
        accuracy_quantiles: Option<Quantiles>,
        timing_ms: Vec<f64>,
    ) -> BenchReport {
        assert!(trials > 0, "report with zero trials");
        let failure_rate = failures as f64 / trials as f64;
        assert!((0.0..=1.0).contains(&failure_rate));
        BenchReport {
            suite,
            trials,
            params,
            failure_rate,
            accuracy_quantiles,
            timing_ms_quantiles: Quantiles::of(timing_ms),
            scaling_ratio: None,
        }
    }
}

pub struct CsvData {
    pub header: &'static str,
    pub rows: Vec<String>,
}

#[allow(clippy::too_many_arguments)]
pub fn cmd_bench(
    json: bool,
    seed: u64,
    suite: SuiteArg,
    trials: Option<usize>,
    m: Option<usize>,
    epsilon: Option<f64>,
    delta: Option<f64>,
    n: Option<usize>,
    plot: Option<&Path>,
) -> Result<i32, Failure> {
    let (report, csv) = match suite {
        SuiteArg::Decode => decode_suite(
            trials.unwrap_or(2000),
            m.unwrap_or(16),
            epsilon.unwrap_or(0.1),
            seed,
        )?,
        SuiteArg::CountAccuracy => count_suite(
            "count-accuracy",
            trials.unwrap_or(500),
            delta.unwrap_or(0.25),
            epsilon.unwrap_or(0.05),
            n.unwrap_or(200),
            seed,
        )?,
        SuiteArg::StrataAccuracy => count_suite(
            "strata-accuracy",
            trials.unwrap_or(200),
            delta.unwrap_or(0.25),
            epsilon.unwrap_or(0.05),
            n.unwrap_or(200),
            seed,
        )?,
        SuiteArg::E2e => e2e_suite(
            trials.unwrap_or(200),
            n.unwrap_or(1024),
            epsilon.unwrap_or(0.05),
            seed,
        )?,
        SuiteArg::Scaling => scaling_suite(
            trials.unwrap_or(100),
            m.unwrap_or(16),
            epsilon.unwrap_or(0.1),
            n.unwrap_or(1 << 16),
            seed,
        )?,
    };

    if let Some(path) = plot {
        let mut out = String::from(csv.header);
        out.push('\n');
        for row in &csv.rows {
            out.push_str(row);
            out.push('\n');
        }
        std::fs::write(path, out)?;
    }

    if json {
        emit(&report)?;
    } else {
        println!(
            "suite {} ({} trials, m={}, eps={}, delta={}, n={}, seed {:#x})",
            report.suite,
            report.trials,
            report.params.m,
            report.params.epsilon,
            report.params.delta,
            report.params.n,
            report.params.seed
        );
        println!("  failure rate {:.4}", report.failure_rate);
        if let Some(q) = report.accuracy_quantiles {
            println!(
                "  |rel error| p50 {:.4} p90 {:.4} p99 {:.4}",
                q.p50, q.p90, q.p99
            );
        }
        let t = report.timing_ms_quantiles;
        println!(
            "  latency ms p50 {:.4} p90 {:.4} p99 {:.4}",
            t.p50, t.p90, t.p99
        );
        if let Some(r) = report.scaling_ratio {
            println!("  median-latency ratio largest/smallest n: {r:.2}");
        }
        if let Some(path) = plot {
            println!("  plot rows written to {}", path.display());
        }
    }
    Ok(0)
}

/// Peel failure rate of fixed-capacity difference sketches as the true
/// difference sweeps past the design load m. Trials plant the difference,
/// decode, and compare against the planted ids; a wrong complete decode
/// counts as a failure just like an incomplete one.
fn decode_suite(
    trials: usize,
    m: usize,
    epsilon: f64,
    seed: u64,
) -> Result<(BenchReport, CsvData), Failure> {
    if trials == 0 || m == 0 {
        return Err(Failure::Usage(
            "decode suite needs trials > 0 and m > 0".into(),
        ));
    }
    let mut loads: Vec<usize> = [
        m / 4,
        m / 2,
        (3 * m) / 4,
        m,
        m + m / 4,
        (3 * m) / 2,
        (7 * m) / 4,
        2 * m,
    ]
    .into_iter()
    .filter(|&d| d > 0)
    .collect();
    loads.dedup();

    let mut rows = Vec::new();
    let mut at_design_load = (0usize, Vec::new());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for &d in &loads {
        let mut failures = 0;
        let mut timing = Vec::with_capacity(trials);
        for _ in 0..trials {
            let p = synth::planted_ids(48, d - d / 2, d / 2, &mut rng);
            let t0 = Instant::now();
            let sa = SdrFixed::build(&p.a, m, epsilon, seed)?;
            let sb = SdrFixed::build(&p.b, m, epsilon, seed)?;
            let rep = sa.report(&sb)?;
            timing.push(t0.elapsed().as_secs_f64() * 1e3);
            let ok = rep.complete && {
                let mut pos = rep.positive;
                let mut neg = rep.negative;
                pos.sort_unstable();
                neg.sort_unstable();
                pos == p.only_a && neg == p.only_b
            };
            failures += usize::from(!ok);
        }
        rows.push(format!(
            "{d},{trials},{failures},{:.6}",
            failures as f64 / trials as f64
        ));
        if d == m {
            at_design_load = (failures, timing);
        }
    }

    let params = BenchParams {
        m,
        epsilon,
        delta: 0.0,
        n: m,
        seed,
    };
    let (failures, timing) = at_design_load;
    let report = BenchReport::new("decode", trials, params, failures, None, timing);
    Ok((
        report,
        CsvData {
            header: "load,trials,failures,failure_rate",
            rows,
        },
    ))
}

/// Difference-cardinality estimates on planted pairs; a trial fails when the
/// estimate leaves (1±delta)·truth. CSV rows are the CDF of |rel error|.
fn count_suite(
    suite: &'static str,
    trials: usize,
    delta: f64,
    epsilon: f64,
    d: usize,
    seed: u64,
) -> Result<(BenchReport, CsvData), Failure> {
    if trials == 0 || d == 0 {
        return Err(Failure::Usage(
            "count suites need trials > 0 and n > 0".into(),
        ));
    }
    let strata = suite == "strata-accuracy";
    let m_prime = if strata {
        strata_m_prime(delta, epsilon)?
    } else {
        0
    };
    let universe = 1u64 << 48;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut errs = Vec::with_capacity(trials);
    let mut timing = Vec::with_capacity(trials);
    let mut failures = 0;
    for _ in 0..trials {
        let p = synth::planted_ids(300, d - d / 2, d / 2, &mut rng);
        let t0 = Instant::now();
        let est = if strata {
            let ea = StrataEstimator::build(&p.a, m_prime, epsilon, universe, seed)?;
            let eb = StrataEstimator::build(&p.b, m_prime, epsilon, universe, seed)?;
            ea.estimate(&eb)?
        } else {
            let fa = F2Sketch::build(&p.a, delta, epsilon, seed)?;
            let fb = F2Sketch::build(&p.b, delta, epsilon, seed)?;
            fa.hamming_estimate(&fb)?
        };
        timing.push(t0.elapsed().as_secs_f64() * 1e3);
        let rel = (est - d as f64) / d as f64;
        errs.push(rel.abs());
        failures += usize::from(rel.abs() > delta);
    }

    let mut sorted = errs.clone();
    sorted.sort_by(f64::total_cmp);
    let rows = (0..=20)
        .map(|k| {
            let q = k as f64 / 20.0;
            let e = sorted[((sorted.len() - 1) as f64 * q).round() as usize];
            format!("{q:.2},{e:.6}")
        })
        .collect();

    let params = BenchParams {
        m: m_prime,
        epsilon,
        delta,
        n: d,
        seed,
    };
    let report = BenchReport::new(
        suite,
        trials,
        params,
        failures,
        Some(Quantiles::of(errs)),
        timing,
    );
    Ok((
        report,
        CsvData {
            header: "quantile,abs_rel_error",
            rows,
        },
    ))
}

/// Two n-point 2D sets whose symmetric difference is split across disjoint
/// windows: window t holds exactly d[t] planted differing points, shared
/// points land anywhere, so each window's true difference is its planted one.
pub struct TiledPair {
    pub items_a: Vec<DataItem>,
    pub items_b: Vec<DataItem>,
    pub windows: Vec<RangeQuery>,
}

pub fn tiled_pair(n: usize, d: &[usize], rng: &mut ChaCha8Rng) -> Result<TiledPair, Failure> {
    const SPAN: i64 = 1 << 15; // coordinate room per tile
    let tiles = d.len();
    let cols = (tiles as f64).sqrt().ceil() as i64;
    let rows = (tiles as i64 + cols - 1) / cols;

    // split each window's difference between the sides, keeping totals equal;
    // an odd total leaves one side a filler point outside every window
    let mut da = vec![0usize; tiles];
    let mut db = vec![0usize; tiles];
    let (mut ta, mut tb) = (0usize, 0usize);
    for t in 0..tiles {
        for _ in 0..d[t] {
            if ta <= tb {
                da[t] += 1;
                ta += 1;
            } else {
                db[t] += 1;
                tb += 1;
            }
        }
    }
    let only = ta.max(tb); // per side, filler included
    let shared = n.checked_sub(only).ok_or_else(|| {
        Failure::Usage(format!("n = {n} too small for {} planted diffs", ta + tb))
    })?;

    let ids = synth::planted_ids(shared, only, only, rng);
    let mut items_a = Vec::with_capacity(n);
    let mut items_b = Vec::with_capacity(n);
    for &id in &ids.a[..shared] {
        let x = rng.gen_range(0..cols * SPAN);
        let y = rng.gen_range(0..rows * SPAN);
        items_a.push(DataItem::p2(id, x, y));
        items_b.push(DataItem::p2(id, x, y));
    }
    let mut windows = Vec::with_capacity(tiles);
    let (mut next_a, mut next_b) = (shared, shared);
    for t in 0..tiles {
        let (c, r) = (t as i64 % cols, t as i64 / cols);
        let (x0, y0) = (c * SPAN, r * SPAN);
        windows.push(RangeQuery::Rect {
            x_lo: x0,
            x_hi: x0 + SPAN - 1,
            y_lo: y0,
            y_hi: y0 + SPAN - 1,
        });
        for _ in 0..da[t] {
            let (x, y) = (rng.gen_range(x0..x0 + SPAN), rng.gen_range(y0..y0 + SPAN));
            items_a.push(DataItem::p2(ids.a[next_a], x, y));
            next_a += 1;
        }
        for _ in 0..db[t] {
            let (x, y) = (rng.gen_range(x0..x0 + SPAN), rng.gen_range(y0..y0 + SPAN));
            items_b.push(DataItem::p2(ids.b[next_b], x, y));
            next_b += 1;
        }
    }
    // leftover filler ids land below every window
    let fy = rows * SPAN + 7;
    while next_a < shared + only {
        items_a.push(DataItem::p2(
            ids.a[next_a],
            rng.gen_range(0..cols * SPAN),
            fy,
        ));
        next_a += 1;
    }
    while next_b < shared + only {
        items_b.push(DataItem::p2(
            ids.b[next_b],
            rng.gen_range(0..cols * SPAN),
            fy,
        ));
        next_b += 1;
    }
    debug_assert_eq!(items_a.len(), n);
    debug_assert_eq!(items_b.len(), n);
    Ok(TiledPair {
        items_a,
        items_b,
        windows,
    })
}

/// End-to-end variable-capacity queries on a 2D tree pair, checked against
/// the naive oracle window by window.
fn e2e_suite(
    trials: usize,
    n: usize,
    epsilon: f64,
    seed: u64,
) -> Result<(BenchReport, CsvData), Failure> {
    if trials == 0 {
        return Err(Failure::Usage("e2e suite needs trials > 0".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let d: Vec<usize> = (0..trials).map(|_| rng.gen_range(1..=8)).collect();
    let pair = tiled_pair(n, &d, &mut rng)?;
    let mode = SketchMode::variable_for(n, epsilon)?;
    let a = SdIndex::build(
        StructureKind::Tree2d,
        pair.items_a.clone(),
        mode,
        seed,
        "bench-a",
    )?;
    let b = SdIndex::build(
        StructureKind::Tree2d,
        pair.items_b.clone(),
        mode,
        seed,
        "bench-b",
    )?;

    let mut rows = Vec::with_capacity(trials);
    let mut timing = Vec::with_capacity(trials);
    let mut failures = 0;
    for (t, win) in pair.windows.iter().enumerate() {
        let t0 = Instant::now();
        let ans = query_diff(&a, win, &b, win)?;
        let ms = t0.elapsed().as_secs_f64() * 1e3;
        timing.push(ms);
        let (na, nb) = naive_diff(&pair.items_a, win, &pair.items_b, win);
        let (ok, level) = match &ans {
            SdDiffAnswer::Diff {
                only_in_a,
                only_in_b,
                level_used,
            } => (*only_in_a == na && *only_in_b == nb, *level_used),
            _ => (false, None),
        };
        failures += usize::from(!ok);
        rows.push(format!(
            "{t},{},{},{},{:.1}",
            na.len() + nb.len(),
            u8::from(ok),
            level.map_or(-1i64, i64::from),
            ms * 1e3
        ));
    }

    let params = BenchParams {
        m: 0,
        epsilon,
        delta: 0.0,
        n,
        seed,
    };
    let report = BenchReport::new("e2e", trials, params, failures, None, timing);
    Ok((
        report,
        CsvData {
            header: "trial,diff_size,correct,level_used,micros",
            rows,
        },
    ))
}

/// Median diff-query latency as n grows at fixed capacity m.
fn scaling_suite(
    queries: usize,
    m: usize,
    epsilon: f64,
    n_top: usize,
    seed: u64,
) -> Result<(BenchReport, CsvData), Failure> {
    if queries == 0 || n_top < 256 {
        return Err(Failure::Usage(
            "scaling suite needs trials > 0 and n >= 256".into(),
        ));
    }
    let sizes = [n_top / 16, n_top / 4, n_top];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rows = Vec::new();
    let mut medians = Vec::new();
    let mut top_timing = Vec::new();
    for &n in &sizes {
        let coord_max = 8 * n as i64;
        let items_a = synth::uniform_points_1d(n, coord_max, &mut rng);
        // replace a few points on side B: planted difference 8 << m
        let mut items_b = items_a.clone();
        for (k, slot) in items_b.iter_mut().enumerate().take(4) {
            *slot = DataItem::p1(synth::MAX_ID - k as u64, rng.gen_range(0..=coord_max));
        }
        let mode = SketchMode::fixed(m, epsilon);
        let a = SdIndex::build(StructureKind::Tree1d, items_a, mode, seed, "scale-a")?;
        let b = SdIndex::build(StructureKind::Tree1d, items_b, mode, seed, "scale-b")?;
        let mut timing = Vec::with_capacity(queries);
        for q in 0..queries + 5 {
            let win = synth::random_interval(coord_max, &mut rng);
            let t0 = Instant::now();
            let _ = query_diff(&a, &win, &b, &win)?;
            if q >= 5 {
                // skip warmup
                timing.push(t0.elapsed().as_secs_f64() * 1e3);
            }
        }
        let qs = Quantiles::of(timing.clone());
        rows.push(format!(
            "{n},{queries},{:.1},{:.1}",
            qs.p50 * 1e3,
            qs.p90 * 1e3
        ));
        medians.push(qs.p50);
        if n == n_top {
            top_timing = timing;
        }
    }

    let params = BenchParams {
        m,
        epsilon,
        delta: 0.0,
        n: n_top,
        seed,
    };
    let mut report = BenchReport::new("scaling", queries, params, 0, None, top_timing);
    report.scaling_ratio = Some(medians[medians.len() - 1] / medians[0].max(1e-9));
    Ok((
        report,
        CsvData {
            header: "n,queries,p50_us,p90_us",
            rows,
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use sdrq::canonical::naive_filter;
    use std::collections::HashSet;

    #[test]
    fn test_tiled_pair_plants_exact_window_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let d = vec![3, 1, 5, 2, 4, 1, 1, 2];
        let pair = tiled_pair(160, &d, &mut rng).unwrap();
        assert_eq!(pair.items_a.len(), 160);
        assert_eq!(pair.items_b.len(), 160);
        for (t, win) in pair.windows.iter().enumerate() {
            let ia: HashSet<u64> = naive_filter(&pair.items_a, win).into_iter().collect();
            let ib: HashSet<u64> = naive_filter(&pair.items_b, win).into_iter().collect();
            assert_eq!(ia.symmetric_difference(&ib).count(), d[t], "window {t}");
        }
    }
}
