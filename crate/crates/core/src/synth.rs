//! Seeded synthetic datasets with planted differences, for accuracy checks
//! and benches. Everything is driven by a caller-supplied RNG so trials are
//! reproducible from a seed.

use crate::canonical::{DataItem, RangeQuery};
use rand::Rng;
use std::collections::HashSet;

pub const ID_BITS: u32 = 48;
pub const MAX_ID: u64 = (1 << ID_BITS) - 1;

/// Fresh ids below 2^48, distinct from each other and from `used`.
pub fn unique_ids(count: usize, used: &mut HashSet<u64>, rng: &mut impl Rng) -> Vec<u64> {
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let id = rng.gen_range(0..=MAX_ID);
        if used.insert(id) {
            out.push(id);
        }
    }
    out
}

/// Two id sets sharing `shared` elements, with `d_a` extra on one side and
/// `d_b` on the other.
#[derive(Debug, Clone)]
pub struct PlantedIdSets {
    pub a: Vec<u64>,
    pub b: Vec<u64>,
    /// sorted
    pub only_a: Vec<u64>,
    /// sorted
    pub only_b: Vec<u64>,
}

pub fn planted_ids(shared: usize, d_a: usize, d_b: usize, rng: &mut impl Rng) -> PlantedIdSets {
    let mut used = HashSet::new();
    let common = unique_ids(shared, &mut used, rng);
    let mut only_a = unique_ids(d_a, &mut used, rng);
    let mut only_b = unique_ids(d_b, &mut used, rng);
    let mut a = common.clone();
    a.extend_from_slice(&only_a);
    let mut b = common;
    b.extend_from_slice(&only_b);
    only_a.sort_unstable();
    only_b.sort_unstable();
    PlantedIdSets {
        a,
        b,
        only_a,
        only_b,
    }
}

/// Two 2D point sets with a planted symmetric difference inside a random
/// query window. Shared points land anywhere in [0, coord_max]^2; the
/// differing points land inside the window, so the window's true difference
/// is exactly the planted one.
#[derive(Debug, Clone)]
pub struct PlantedPair {
    pub items_a: Vec<DataItem>,
    pub items_b: Vec<DataItem>,
    /// sorted
    pub only_a: Vec<u64>,
    /// sorted
    pub only_b: Vec<u64>,
    pub window: RangeQuery,
}

pub fn planted_points_2d(
    shared: usize,
    d_a: usize,
    d_b: usize,
    coord_max: i64,
    rng: &mut impl Rng,
) -> PlantedPair {
    let (a1, a2) = (rng.gen_range(0..=coord_max), rng.gen_range(0..=coord_max));
    let (b1, b2) = (rng.gen_range(0..=coord_max), rng.gen_range(0..=coord_max));
    let (x_lo, x_hi) = (a1.min(a2), a1.max(a2));
    let (y_lo, y_hi) = (b1.min(b2), b1.max(b2));

    let ids = planted_ids(shared, d_a, d_b, rng);
    let mut point = |id: u64, in_window: bool| {
        let (x, y) = if in_window {
            (rng.gen_range(x_lo..=x_hi), rng.gen_range(y_lo..=y_hi))
        } else {
            (rng.gen_range(0..=coord_max), rng.gen_range(0..=coord_max))
        };
        DataItem::p2(id, x, y)
    };

    let shared_items: Vec<DataItem> = ids.a[..shared].iter().map(|&id| point(id, false)).collect();
    let mut items_a = shared_items.clone();
    items_a.extend(ids.a[shared..].iter().map(|&id| point(id, true)));
    let mut items_b = shared_items;
    items_b.extend(ids.b[shared..].iter().map(|&id| point(id, true)));

    PlantedPair {
        items_a,
        items_b,
        only_a: ids.only_a,
        only_b: ids.only_b,
        window: RangeQuery::Rect {
            x_lo,
            x_hi,
            y_lo,
            y_hi,
        },
    }
}

/// Uniform 1D points with fresh ids.
pub fn uniform_points_1d(n: usize, coord_max: i64, rng: &mut impl Rng) -> Vec<DataItem> {
    let mut used = HashSet::new();
    unique_ids(n, &mut used, rng)
        .into_iter()
        .map(|id| DataItem::p1(id, rng.gen_range(0..=coord_max)))
        .collect()
}

pub fn random_interval(coord_max: i64, rng: &mut impl Rng) -> RangeQuery {
    let (a, b) = (rng.gen_range(0..=coord_max), rng.gen_range(0..=coord_max));
    RangeQuery::Interval {
        lo: a.min(b),
        hi: a.max(b),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::canonical::{geom_in_range, naive_filter};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn test_planted_ids_shape() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let p = planted_ids(100, 5, 3, &mut rng);
        assert_eq!(p.a.len(), 105);
        assert_eq!(p.b.len(), 103);
        assert_eq!(p.only_a.len(), 5);
        assert_eq!(p.only_b.len(), 3);
        let sa: HashSet<u64> = p.a.iter().copied().collect();
        let sb: HashSet<u64> = p.b.iter().copied().collect();
        assert_eq!(sa.len(), 105);
        let mut diff_a: Vec<u64> = sa.difference(&sb).copied().collect();
        diff_a.sort_unstable();
        assert_eq!(diff_a, p.only_a);
        assert!(p.a.iter().all(|&id| id <= MAX_ID));
    }

    #[test]
    fn test_planted_points_window_difference_is_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..20 {
            let p = planted_points_2d(50, 4, 2, 1000, &mut rng);
            let in_a = naive_filter(&p.items_a, &p.window);
            let in_b = naive_filter(&p.items_b, &p.window);
            let sa: HashSet<u64> = in_a.into_iter().collect();
            let sb: HashSet<u64> = in_b.into_iter().collect();
            let mut d_a: Vec<u64> = sa.difference(&sb).copied().collect();
            let mut d_b: Vec<u64> = sb.difference(&sa).copied().collect();
            d_a.sort_unstable();
            d_b.sort_unstable();
            assert_eq!(d_a, p.only_a);
            assert_eq!(d_b, p.only_b);
            // planted points really are inside the window
            for &id in &p.only_a {
                let it = p.items_a.iter().find(|it| it.id == id).unwrap();
                assert!(geom_in_range(&it.geom, &p.window));
            }
        }
    }
}
