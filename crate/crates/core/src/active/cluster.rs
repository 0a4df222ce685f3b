//! Average-linkage agglomerative clustering.
//!
//! Repeatedly merges the pair of clusters with the smallest mean pairwise
//! Euclidean distance until the requested number of clusters remains.
//! Clusters are named by their smallest point index; among equal linkages
//! the pair `(a, b)`, `a < b`, that is lexicographically smallest merges
//! first. The implementation keeps a condensed distance matrix and caches,
//! per cluster, its nearest higher-indexed neighbour, so each merge scans
//! O(n) cached entries instead of all pairs.

fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

struct Condensed {
    n: usize,
    d: Vec<f64>,
}

impl Condensed {
    fn at(&self, i: usize, j: usize) -> usize {
        debug_assert!(i < j && j < self.n);
        i * self.n - i * (i + 1) / 2 + (j - i - 1)
    }

    fn get(&self, i: usize, j: usize) -> f64 {
        if i < j {
            self.d[self.at(i, j)]
        } else {
            self.d[self.at(j, i)]
        }
    }

    fn set(&mut self, i: usize, j: usize, v: f64) {
        let k = if i < j { self.at(i, j) } else { self.at(j, i) };
        self.d[k] = v;
    }
}

/// Cluster label (smallest member index) for every point.
pub fn average_linkage(points: &[&[f64]], clusters: usize) -> Vec<usize> {
    let n = points.len();
    let target = clusters.max(1);
    if n <= target {
        return (0..n).collect();
    }
    let mut dist = Condensed { n, d: Vec::with_capacity(n * (n - 1) / 2) };
    for i in 0..n {
        for j in i + 1..n {
            dist.d.push(euclidean(points[i], points[j]));
        }
    }
    let mut size = vec![1usize; n];
    let mut active = vec![true; n];
    let mut merged_into: Vec<usize> = (0..n).collect();
    let mut nn = vec![usize::MAX; n];
    let mut nn_d = vec![f64::INFINITY; n];

    let recompute = |i: usize, active: &[bool], dist: &Condensed, nn: &mut [usize], nn_d: &mut [f64]| {
        nn[i] = usize::MAX;
        nn_d[i] = f64::INFINITY;
        for j in i + 1..n {
            if active[j] {
                let v = dist.get(i, j);
                if v < nn_d[i] {
                    nn_d[i] = v;
                    nn[i] = j;
                }
            }
        }
    };
    for i in 0..n {
        recompute(i, &active, &dist, &mut nn, &mut nn_d);
    }

    let mut remaining = n;
    while remaining > target {
        let mut a = usize::MAX;
        for i in 0..n {
            if active[i] && nn[i] != usize::MAX && (a == usize::MAX || nn_d[i] < nn_d[a]) {
                a = i;
            }
        }
        let b = nn[a];
        let (sa, sb) = (size[a] as f64, size[b] as f64);
        for k in 0..n {
            if active[k] && k != a && k != b {
                let v = (sa * dist.get(a, k) + sb * dist.get(b, k)) / (sa + sb);
                dist.set(a, k, v);
            }
        }
        size[a] += size[b];
        active[b] = false;
        merged_into[b] = a;
        remaining -= 1;

        for i in 0..a {
            if !active[i] {
                continue;
            }
            if nn[i] == a || nn[i] == b {
                recompute(i, &active, &dist, &mut nn, &mut nn_d);
            } else {
                let v = dist.get(i, a);
                if v < nn_d[i] || (v == nn_d[i] && a < nn[i]) {
                    nn[i] = a;
                    nn_d[i] = v;
                }
            }
        }
        recompute(a, &active, &dist, &mut nn, &mut nn_d);
        for i in a + 1..b {
            if active[i] && nn[i] == b {
                recompute(i, &active, &dist, &mut nn, &mut nn_d);
            }
        }
    }

    (0..n)
        .map(|mut p| {
            while merged_into[p] != p {
                p = merged_into[p];
            }
            p
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use proptest::prelude::*;

    /// Textbook O(n^3) reference: recompute every inter-cluster average from
    /// raw point distances at every step.
    fn naive(points: &[Vec<f64>], target: usize) -> Vec<usize> {
        let n = points.len();
        let mut clusters: Vec<Vec<usize>> = (0..n).map(|i| vec![i]).collect();
        while clusters.len() > target.max(1) {
            let mut best: Option<(f64, usize, usize)> = None;
            for x in 0..clusters.len() {
                for y in x + 1..clusters.len() {
                    let mut s = 0.0;
                    for &p in &clusters[x] {
                        for &q in &clusters[y] {
                            s += euclidean(&points[p], &points[q]);
                        }
                    }
                    let v = s / (clusters[x].len() * clusters[y].len()) as f64;
                    // clusters stay sorted by smallest member, so (x, y) order is id order
                    if best.is_none_or(|(b, _, _)| v < b - 1e-12) {
                        best = Some((v, x, y));
                    }
                }
            }
            let (_, x, y) = best.unwrap();
            let moved = clusters.remove(y);
            clusters[x].extend(moved);
            clusters[x].sort();
        }
        let mut label = vec![0; n];
        for c in &clusters {
            for &p in c {
                label[p] = c[0];
            }
        }
        label
    }

    fn refs(points: &[Vec<f64>]) -> Vec<&[f64]> {
        points.iter().map(Vec::as_slice).collect()
    }

    #[test]
    fn two_blobs() {
        let pts = vec![vec![0.0], vec![0.1], vec![0.2], vec![10.0], vec![10.1], vec![10.3]];
        assert_eq!(average_linkage(&refs(&pts), 2), [0, 0, 0, 3, 3, 3]);
        assert_eq!(average_linkage(&refs(&pts), 1), [0; 6]);
        assert_eq!(average_linkage(&refs(&pts), 6), [0, 1, 2, 3, 4, 5]);
        assert_eq!(average_linkage(&refs(&pts), 60), [0, 1, 2, 3, 4, 5]);
    }

    #[test]
    fn ties_merge_smallest_pair_first() {
        // equally spaced: (0,1) merges first, then {0,1} vs 2 (avg 1.5) loses
        // to (2,3) at distance 1
        let pts = vec![vec![0.0], vec![1.0], vec![2.0], vec![3.0]];
        assert_eq!(average_linkage(&refs(&pts), 2), [0, 0, 2, 2]);
        assert_eq!(average_linkage(&refs(&pts), 3), [0, 0, 2, 3]);
        let same = vec![vec![1.0]; 5];
        assert_eq!(average_linkage(&refs(&same), 2), [0, 0, 0, 0, 4]);
    }

    #[test]
    fn matches_naive_on_random_instances() {
        for case in 0..40u64 {
            let n = 2 + (case as usize % 25);
            let pts: Vec<Vec<f64>> = (0..n)
                .map(|i| (0..3).map(|j| rng::gaussian(case, &[i as u64, j]) * if i % 3 == 0 { 5.0 } else { 1.0 }).collect())
                .collect();
            for target in [1, 2, 3, 5] {
                assert_eq!(average_linkage(&refs(&pts), target), naive(&pts, target), "case {case} target {target}");
            }
        }
    }

    proptest! {
        #[test]
        fn label_count_and_minimality(pts in proptest::collection::vec(proptest::collection::vec(-3i32..3, 2), 1..30), c in 1usize..8) {
            let pts: Vec<Vec<f64>> = pts.into_iter().map(|p| p.into_iter().map(f64::from).collect()).collect();
            let labels = average_linkage(&refs(&pts), c);
            let distinct: std::collections::BTreeSet<_> = labels.iter().copied().collect();
            prop_assert_eq!(distinct.len(), c.min(pts.len()));
            for (p, &l) in labels.iter().enumerate() {
                prop_assert!(l <= p);
                prop_assert_eq!(labels[l], l);
            }
        }
    }
}
