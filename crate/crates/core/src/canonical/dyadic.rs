//! Balanced binary tree over a row of leaves, shared by the tree- and
//! segment-based structures. Internal nodes split their leaf range at the
//! midpoint, so the height is ceil(log2 n) and a canonical range cover has at
//! most 2*ceil(log2 n) nodes (n >= 2; a single leaf covers itself with one).

#[derive(Debug, Clone, Copy)]
struct Node {
    /// leaf range [lo, hi), hi exclusive
    lo: usize,
    hi: usize,
    left: usize,
    right: usize,
}

const NO_CHILD: usize = usize::MAX;

#[derive(Debug, Clone)]
pub(crate) struct DyadicTree {
    n: usize,
    /// preorder; empty when n == 0
    nodes: Vec<Node>,
}

impl DyadicTree {
    pub fn over(n: usize) -> DyadicTree {
        let mut nodes = Vec::new();
        if n > 0 {
            nodes.reserve_exact(2 * n - 1);
            build(&mut nodes, 0, n);
        }
        DyadicTree { n, nodes }
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    /// Leaf range [lo, hi) of a node.
    pub fn range(&self, node: usize) -> (usize, usize) {
        let nd = &self.nodes[node];
        (nd.lo, nd.hi)
    }

    /// Canonical cover of the leaf range [l, r) (clamped to the tree): the
    /// maximal nodes whose ranges tile it. Left-to-right order.
    pub fn cover(&self, l: usize, r: usize) -> Vec<usize> {
        let mut out = Vec::new();
        let r = r.min(self.n);
        if l < r {
            self.cover_into(0, l, r, &mut out);
        }
        out
    }

    fn cover_into(&self, node: usize, l: usize, r: usize, out: &mut Vec<usize>) {
        let nd = &self.nodes[node];
        if r <= nd.lo || nd.hi <= l {
            return;
        }
        if l <= nd.lo && nd.hi <= r {
            out.push(node);
            return;
        }
        self.cover_into(nd.left, l, r, out);
        self.cover_into(nd.right, l, r, out);
    }

    /// Nodes on the root-to-leaf path for a leaf position, root first.
    pub fn path(&self, leaf: usize) -> Vec<usize> {
        assert!(leaf < self.n, "leaf {leaf} out of {}", self.n);
        let mut out = Vec::new();
        let mut node = 0;
        loop {
            out.push(node);
            let nd = &self.nodes[node];
            if nd.left == NO_CHILD {
                return out;
            }
            let mid = self.nodes[nd.left].hi;
            node = if leaf < mid { nd.left } else { nd.right };
        }
    }
}

fn build(nodes: &mut Vec<Node>, lo: usize, hi: usize) -> usize {
    let idx = nodes.len();
    nodes.push(Node {
        lo,
        hi,
        left: NO_CHILD,
        right: NO_CHILD,
    });
    if hi - lo > 1 {
        let mid = lo + (hi - lo).div_ceil(2);
        let left = build(nodes, lo, mid);
        let right = build(nodes, mid, hi);
        nodes[idx].left = left;
        nodes[idx].right = right;
    }
    idx
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cover_term_bound(n: usize) -> usize {
        if n <= 1 {
            1
        } else {
            2 * crate::hashing::ceil_log2_u64(n as u64) as usize
        }
    }

    #[test]
    fn test_node_count_and_ranges() {
        for n in 1..=40 {
            let t = DyadicTree::over(n);
            assert_eq!(t.node_count(), 2 * n - 1);
            assert_eq!(t.range(0), (0, n));
        }
        assert_eq!(DyadicTree::over(0).node_count(), 0);
    }

    #[test]
    fn test_cover_tiles_exactly() {
        for n in [1usize, 2, 3, 7, 8, 13, 32, 100] {
            let t = DyadicTree::over(n);
            for l in 0..n {
                for r in l..=n {
                    let cover = t.cover(l, r);
                    // disjoint, in order, and their union is [l, r)
                    let mut pos = l;
                    for &node in &cover {
                        let (lo, hi) = t.range(node);
                        assert_eq!(lo, pos, "gap or overlap at n={n} [{l},{r})");
                        pos = hi;
                    }
                    assert_eq!(pos, if l < r { r } else { l });
                    assert!(
                        cover.len() <= cover_term_bound(n),
                        "cover of [{l},{r}) in n={n} used {} nodes",
                        cover.len()
                    );
                }
            }
        }
    }

    #[test]
    fn test_cover_is_maximal_nodes() {
        // Full range is always just the root.
        let t = DyadicTree::over(13);
        assert_eq!(t.cover(0, 13), vec![0]);
        // Empty and clamped ranges.
        assert!(t.cover(5, 5).is_empty());
        assert_eq!(t.cover(0, 100), vec![0]);
    }

    #[test]
    fn test_path_lengths_and_membership() {
        for n in [1usize, 2, 5, 8, 100] {
            let t = DyadicTree::over(n);
            let height = if n == 1 {
                0
            } else {
                crate::hashing::ceil_log2_u64(n as u64) as usize
            };
            for leaf in 0..n {
                let path = t.path(leaf);
                assert!(
                    path.len() <= height + 1,
                    "path {} > {} (n={n})",
                    path.len(),
                    height + 1
                );
                assert_eq!(path[0], 0);
                // every node on the path contains the leaf; the last is the leaf
                for &node in &path {
                    let (lo, hi) = t.range(node);
                    assert!(lo <= leaf && leaf < hi);
                }
                let (lo, hi) = t.range(*path.last().unwrap());
                assert_eq!((lo, hi), (leaf, leaf + 1));
            }
        }
    }
}
