use std::collections::BTreeMap;
use std::io::Write;

use super::{ClusterAssignment, DisjointSets, LabelSpace};
use crate::error::{Error, Result};

/// Rings searched beyond the 3×3 window before a point is left unclustered.
pub const MAX_EXTRA_RINGS: usize = 3;

/// G×G lattice over the bounding box of the projected data.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    g: usize,
    origin: [f64; 2],
    scale: [f64; 2],
}

impl Grid {
    /// `scale = (max − min)/G` per axis; lattice point `(a, b)` sits at
    /// `origin + (a·s₁, b·s₂)` for `a, b ∈ [0, G−1]`.
    pub fn new(min: [f64; 2], max: [f64; 2], g: usize) -> Result<Self> {
        if g < 2 {
            return Err(Error::InvalidParameter(format!("grid size must be at least 2, got {g}")));
        }
        let scale = [(max[0] - min[0]) / g as f64, (max[1] - min[1]) / g as f64];
        if !(scale[0] > 0.0 && scale[1] > 0.0) {
            return Err(Error::InvalidData("bounding box has zero extent".into()));
        }
        Ok(Grid { g, origin: min, scale })
    }

    pub fn size(&self) -> usize {
        self.g
    }

    pub fn origin(&self) -> [f64; 2] {
        self.origin
    }

    pub fn scale(&self) -> [f64; 2] {
        self.scale
    }

    pub fn point(&self, a: usize, b: usize) -> [f64; 2] {
        [
            self.origin[0] + a as f64 * self.scale[0],
            self.origin[1] + b as f64 * self.scale[1],
        ]
    }

    /// Lattice point closest to `p`, clamped into the lattice.
    pub fn nearest(&self, p: [f64; 2]) -> (usize, usize) {
        let snap = |axis: usize| {
            let t = ((p[axis] - self.origin[axis]) / self.scale[axis]).round();
            t.clamp(0.0, (self.g - 1) as f64) as usize
        };
        (snap(0), snap(1))
    }

    fn index(&self, a: usize, b: usize) -> usize {
        a * self.g + b
    }

    /// In-lattice cells within Chebyshev distance `r` of `(a, b)`.
    fn window(&self, a: usize, b: usize, r: usize) -> impl Iterator<Item = (usize, usize)> {
        let g = self.g;
        let (a0, a1) = (a.saturating_sub(r), (a + r).min(g - 1));
        let (b0, b1) = (b.saturating_sub(r), (b + r).min(g - 1));
        (a0..=a1).flat_map(move |x| (b0..=b1).map(move |y| (x, y)))
    }
}

/// Cluster id of every lattice point: 0 outside the ball, 1.. inside.
#[derive(Debug, Clone, PartialEq)]
pub struct GridLabeling {
    grid: Grid,
    ids: Vec<u32>,
    cluster_count: usize,
}

impl GridLabeling {
    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn id(&self, a: usize, b: usize) -> u32 {
        self.ids[self.grid.index(a, b)]
    }

    pub fn is_inside(&self, a: usize, b: usize) -> bool {
        self.id(a, b) != 0
    }

    /// Ids indexed by `a·G + b`.
    pub fn ids(&self) -> &[u32] {
        &self.ids
    }

    pub fn cluster_count(&self) -> usize {
        self.cluster_count
    }

    pub fn inside_count(&self) -> usize {
        self.ids.iter().filter(|&&v| v != 0).count()
    }

    /// G lines of G ids; line `b` lists `a = 0..G` (second axis rows, first
    /// axis columns).
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        let g = self.grid.size();
        for b in 0..g {
            let line: Vec<String> = (0..g).map(|a| self.id(a, b).to_string()).collect();
            writeln!(out, "{}", line.join(","))?;
        }
        Ok(())
    }
}

/// Relabel 8-adjacent in-ball cells to their smallest shared id until
/// nothing changes. Returns whether any id changed.
pub fn merge_components(ids: &mut [u32], g: usize) -> bool {
    assert_eq!(ids.len(), g * g, "id map must be G×G");
    let grid = Grid {
        g,
        origin: [0.0; 2],
        scale: [1.0; 2],
    };
    let mut changed = false;
    loop {
        let mut pass = false;
        for a in 0..g {
            for b in 0..g {
                let here = ids[grid.index(a, b)];
                if here == 0 {
                    continue;
                }
                for (x, y) in grid.window(a, b, 1) {
                    let there = ids[grid.index(x, y)];
                    if there != 0 && there != here {
                        let (lo, hi) = (here.min(there), here.max(there));
                        ids.iter_mut().filter(|v| **v == hi).for_each(|v| *v = lo);
                        pass = true;
                    }
                }
            }
        }
        if !pass {
            return changed;
        }
        changed = true;
    }
}

/// Grid hashing labeler.
///
/// Stage 1 evaluates the ball at every lattice point and groups 8-connected
/// in-ball points. Stage 2 hashes each data point to its nearest lattice
/// point and lets the in-ball points of the surrounding window vote: the
/// most frequent id wins if it has at least `k` votes (ties go to the
/// component whose first lattice point comes first), otherwise the window
/// grows by one ring, up to [`MAX_EXTRA_RINGS`] times.
///
/// Final ids are dense, ordered by member count, then lattice size, then
/// lattice position. Components that attract no data point keep the
/// trailing ids.
pub fn label_grid(
    space: &LabelSpace,
    g: usize,
    k: usize,
) -> Result<(GridLabeling, ClusterAssignment)> {
    if !(1..=8).contains(&k) {
        return Err(Error::InvalidParameter(format!("neighbour count k must be in 1..=8, got {k}")));
    }
    let (min, max) = space.bounds();
    let grid = Grid::new(min, max, g)?;
    let cells = g * g;

    // stage 1
    let mut inside = vec![false; cells];
    for a in 0..g {
        for b in 0..g {
            inside[grid.index(a, b)] = space.is_inside(grid.point(a, b));
        }
    }
    let mut sets = DisjointSets::new(cells);
    for a in 0..g {
        for b in 0..g {
            if !inside[grid.index(a, b)] {
                continue;
            }
            for (x, y) in grid.window(a, b, 1) {
                if inside[grid.index(x, y)] {
                    sets.union(grid.index(a, b), grid.index(x, y));
                }
            }
        }
    }
    // all points coincide: the in-ball region is that one location, which
    // the lattice can miss, so it takes the nearest lattice point
    let coords = space.coords();
    if !inside.contains(&true)
        && !coords.is_empty()
        && coords.iter().all(|p| p == &coords[0])
        && space.is_inside(coords[0])
    {
        let (a, b) = grid.nearest(coords[0]);
        inside[grid.index(a, b)] = true;
    }
    // provisional key: the smallest cell index of the component
    let key: Vec<Option<usize>> = (0..cells)
        .map(|c| inside[c].then(|| sets.find(c)))
        .collect();
    if key.iter().all(Option::is_none) {
        log::warn!("no lattice point lies inside the ball; check q and nu");
    }

    // stage 2
    let n = space.len();
    let mut hashed = Vec::with_capacity(n);
    let mut point_key = vec![None; n];
    for (i, slot) in point_key.iter_mut().enumerate() {
        let (a, b) = grid.nearest(space.point(i));
        hashed.push((a, b));
        for r in 1..=1 + MAX_EXTRA_RINGS {
            let mut votes: BTreeMap<usize, usize> = BTreeMap::new();
            for (x, y) in grid.window(a, b, r) {
                if let Some(c) = key[grid.index(x, y)] {
                    *votes.entry(c).or_insert(0) += 1;
                }
            }
            // BTreeMap iterates keys ascending, so the first maximum wins ties
            let mut best: Option<(usize, usize)> = None;
            for (&c, &count) in &votes {
                if best.is_none_or(|(_, bc)| count > bc) {
                    best = Some((c, count));
                }
            }
            if let Some((c, count)) = best {
                if count >= k {
                    *slot = Some(c);
                    break;
                }
            }
        }
    }
    if n > 1 && hashed.iter().all(|&h| h == hashed[0]) {
        log::warn!("all data points hash to one lattice point; increase the grid size");
    }

    // dense renumbering
    let mut stats: BTreeMap<usize, (usize, usize)> = BTreeMap::new();
    for c in key.iter().flatten() {
        stats.entry(*c).or_insert((0, 0)).1 += 1;
    }
    for c in point_key.iter().flatten() {
        stats.get_mut(c).expect("voted id comes from the lattice").0 += 1;
    }
    let mut order: Vec<(usize, usize, usize)> = stats.into_iter().map(|(c, (p, l))| (c, p, l)).collect();
    order.sort_by(|x, y| y.1.cmp(&x.1).then(y.2.cmp(&x.2)).then(x.0.cmp(&y.0)));
    let id: BTreeMap<usize, u32> = order
        .iter()
        .enumerate()
        .map(|(rank, &(c, _, _))| (c, rank as u32 + 1))
        .collect();

    let ids: Vec<u32> = key.iter().map(|c| c.map_or(0, |c| id[&c])).collect();
    let labels: Vec<u32> = point_key.iter().map(|c| c.map_or(0, |c| id[&c])).collect();
    let labeling = GridLabeling {
        grid,
        ids,
        cluster_count: order.len(),
    };
    Ok((labeling, ClusterAssignment::new(labels)))
}
