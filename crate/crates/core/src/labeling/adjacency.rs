use super::{dense_ids, ClusterAssignment, DisjointSets, LabelSpace};
use crate::error::{Error, Result};

/// Points tested along each segment.
pub const DEFAULT_SEGMENT_SAMPLES: usize = 20;

/// Symmetric, reflexive connectivity between data points.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AdjacencyMatrix {
    n: usize,
    bits: Vec<bool>,
}

impl AdjacencyMatrix {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> bool {
        self.bits[i * self.n + j]
    }

    /// Connected components as a cluster assignment.
    pub fn components(&self, space: &LabelSpace) -> ClusterAssignment {
        let mut sets = DisjointSets::new(self.n);
        for i in 0..self.n {
            for j in (i + 1)..self.n {
                if self.get(i, j) {
                    sets.union(i, j);
                }
            }
        }
        finish(space, &mut sets)
    }
}

/// Whether `m` evenly spaced interior points of the segment from `a` to `b`
/// all lie inside the ball. Costs `m·N` kernel evaluations.
pub fn segment_inside(space: &LabelSpace, a: [f64; 2], b: [f64; 2], m: usize) -> bool {
    (1..=m).all(|s| {
        let t = s as f64 / (m + 1) as f64;
        space.is_inside([a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])])
    })
}

fn check_samples(m: usize) -> Result<()> {
    if m == 0 {
        return Err(Error::InvalidParameter("segment samples m must be at least 1".into()));
    }
    Ok(())
}

/// Full pairwise segment test.
pub fn build_adjacency(space: &LabelSpace, m: usize) -> Result<AdjacencyMatrix> {
    check_samples(m)?;
    let n = space.len();
    let mut bits = vec![false; n * n];
    for i in 0..n {
        bits[i * n + i] = true;
        for j in (i + 1)..n {
            let ok = segment_inside(space, space.point(i), space.point(j), m);
            bits[i * n + j] = ok;
            bits[j * n + i] = ok;
        }
    }
    Ok(AdjacencyMatrix { n, bits })
}

fn sq_dist(a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)
}

/// Singleton components whose only point lies outside the ball are
/// unclustered; every other component becomes a cluster.
fn finish(space: &LabelSpace, sets: &mut DisjointSets) -> ClusterAssignment {
    let n = space.len();
    let roots: Vec<usize> = (0..n).map(|i| sets.find(i)).collect();
    let mut size = vec![0usize; n];
    for &r in &roots {
        size[r] += 1;
    }
    let group: Vec<Option<usize>> = (0..n)
        .map(|i| {
            let r = roots[i];
            (size[r] > 1 || space.is_inside(space.point(i))).then_some(r)
        })
        .collect();
    ClusterAssignment::new(dense_ids(&group))
}

/// Segment tests restricted to each point's `k` nearest neighbours in the
/// projected plane (ties by index); clusters are the connected components.
pub fn label_knn_adjacency(space: &LabelSpace, k: usize, m: usize) -> Result<ClusterAssignment> {
    check_samples(m)?;
    if k == 0 {
        return Err(Error::InvalidParameter("neighbour count k must be at least 1".into()));
    }
    let n = space.len();
    let mut sets = DisjointSets::new(n);
    let mut tested = std::collections::HashSet::new();
    for i in 0..n {
        let p = space.point(i);
        let mut others: Vec<usize> = (0..n).filter(|&j| j != i).collect();
        others.sort_by(|&a, &b| {
            sq_dist(p, space.point(a))
                .total_cmp(&sq_dist(p, space.point(b)))
                .then(a.cmp(&b))
        });
        for &j in others.iter().take(k) {
            let edge = (i.min(j), i.max(j));
            if tested.insert(edge) && segment_inside(space, p, space.point(j), m) {
                sets.union(i, j);
            }
        }
    }
    Ok(finish(space, &mut sets))
}

/// Euclidean minimum spanning forest in which no node takes more than `k`
/// links; tree edges failing the segment test are cut and the remaining
/// components become clusters.
pub fn label_mst_adjacency(space: &LabelSpace, k: usize, m: usize) -> Result<ClusterAssignment> {
    check_samples(m)?;
    if k == 0 {
        return Err(Error::InvalidParameter("link count k must be at least 1".into()));
    }
    let n = space.len();
    let mut sets = DisjointSets::new(n);
    for (a, b) in degree_capped_mst(space.coords(), k) {
        if segment_inside(space, space.point(a), space.point(b), m) {
            sets.union(a, b);
        }
    }
    Ok(finish(space, &mut sets))
}

/// Prim's algorithm where saturated nodes stop offering edges; when no
/// unsaturated tree node can reach a free node a new tree starts at the
/// lowest free index. Ties go to the lowest (tree node, free node) pair.
pub(crate) fn degree_capped_mst(points: &[[f64; 2]], k: usize) -> Vec<(usize, usize)> {
    let n = points.len();
    let mut in_tree = vec![false; n];
    let mut degree = vec![0usize; n];
    // cheapest link from each free node to an unsaturated tree node
    let mut link: Vec<Option<(f64, usize)>> = vec![None; n];
    let mut edges = Vec::with_capacity(n.saturating_sub(1));

    let offer = |link: &mut [Option<(f64, usize)>], in_tree: &[bool], u: usize| {
        for v in 0..n {
            if in_tree[v] {
                continue;
            }
            let d = sq_dist(points[u], points[v]);
            if link[v].is_none_or(|(bd, bu)| d < bd || (d == bd && u < bu)) {
                link[v] = Some((d, u));
            }
        }
    };

    for _ in 0..n {
        let next = (0..n)
            .filter(|&v| !in_tree[v])
            .filter_map(|v| link[v].map(|(d, u)| (d, u, v)))
            .min_by(|x, y| x.0.total_cmp(&y.0).then(x.1.cmp(&y.1)).then(x.2.cmp(&y.2)));
        let v = match next {
            Some((_, u, v)) => {
                edges.push((u.min(v), u.max(v)));
                degree[u] += 1;
                degree[v] += 1;
                if degree[u] == k {
                    // u stops offering: re-route free nodes that relied on it
                    for w in 0..n {
                        if !in_tree[w] && link[w].is_some_and(|(_, bu)| bu == u) {
                            link[w] = (0..n)
                                .filter(|&t| in_tree[t] && degree[t] < k)
                                .map(|t| (sq_dist(points[t], points[w]), t))
                                .min_by(|x, y| x.0.total_cmp(&y.0).then(x.1.cmp(&y.1)));
                        }
                    }
                }
                v
            }
            None => (0..n).find(|&v| !in_tree[v]).expect("a free node remains"),
        };
        in_tree[v] = true;
        link[v] = None;
        if degree[v] < k {
            offer(&mut link, &in_tree, v);
        }
    }
    edges
}
