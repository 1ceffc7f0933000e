//! Whitney-type covering of a finite union of rectangles by squares.
//!
//! Dyadic squares `Q` of side `s` are admissible when the sup-norm distance
//! from their centre to the complement is at least `2s` and `2s <= delta`.
//! The maximal admissible squares are the half-squares `q^`; the cover
//! consists of their doubles `q`. Squares are coloured by
//! `(level mod 3, i mod 2, j mod 2)` into 12 families.
//!
//! Near the boundary the dyadic refinement is truncated at a minimum side, so
//! the half-squares cover every point at distance at least
//! [`SquareCover::resolution`] from the complement.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use rstar::primitives::{GeomWithData, Rectangle};
use rstar::{RTree, AABB};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fields::Rect;

/// Comparability constant guaranteed by the admissibility rule.
pub const COMPARABILITY: f64 = 4.0;
pub const FAMILY_COUNT: usize = 12;

#[derive(Deserialize)]
struct RawUnion {
    rects: Vec<Rect<f64>>,
}

impl TryFrom<RawUnion> for RectUnion {
    type Error = Error;
    fn try_from(r: RawUnion) -> Result<Self> {
        Self::new(r.rects)
    }
}

/// Open set: interior of a finite union of closed rectangles.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawUnion")]
pub struct RectUnion {
    pub rects: Vec<Rect<f64>>,
    #[serde(skip)]
    outside: Vec<Rect<f64>>,
    #[serde(skip)]
    bbox: Option<Rect<f64>>,
}

impl RectUnion {
    pub fn new(rects: Vec<Rect<f64>>) -> Result<Self> {
        if rects.is_empty() {
            return Err(Error::InvalidParameter("empty rectangle list".into()));
        }
        for r in &rects {
            let ok = [r.x0, r.x1, r.y0, r.y1].iter().all(|v| v.is_finite()) && r.x1 > r.x0 && r.y1 > r.y0;
            if !ok {
                return Err(Error::InvalidParameter(format!("rectangle {r:?} must be bounded and non-empty")));
            }
        }
        let mut u = Self {
            rects,
            outside: vec![],
            bbox: None,
        };
        u.prepare();
        Ok(u)
    }

    pub fn unit_square() -> Self {
        Self::new(vec![Rect::unit()]).expect("valid")
    }

    /// `(0,1)^2` minus `[1/2,1] x [1/2,1]`, as two rectangles.
    pub fn l_shape() -> Self {
        Self::new(vec![Rect::new(0.0, 1.0, 0.0, 0.5), Rect::new(0.0, 0.5, 0.5, 1.0)]).expect("valid")
    }

    pub fn slab(height: f64) -> Result<Self> {
        Self::new(vec![Rect::new(0.0, 1.0, 0.0, height)])
    }

    fn prepare(&mut self) {
        let mut xs: Vec<f64> = self.rects.iter().flat_map(|r| [r.x0, r.x1]).collect();
        let mut ys: Vec<f64> = self.rects.iter().flat_map(|r| [r.y0, r.y1]).collect();
        for v in [&mut xs, &mut ys] {
            v.sort_by(f64::total_cmp);
            v.dedup();
        }
        let inside = |x: f64, y: f64| self.rects.iter().any(|r| x > r.x0 && x < r.x1 && y > r.y0 && y < r.y1);
        let mut outside = vec![];
        for wx in xs.windows(2) {
            for wy in ys.windows(2) {
                if !inside(0.5 * (wx[0] + wx[1]), 0.5 * (wy[0] + wy[1])) {
                    outside.push(Rect::new(wx[0], wx[1], wy[0], wy[1]));
                }
            }
        }
        self.outside = outside;
        self.bbox = Some(Rect::new(xs[0], xs[xs.len() - 1], ys[0], ys[ys.len() - 1]));
    }

    pub fn bbox(&self) -> Rect<f64> {
        self.bbox.expect("prepared")
    }

    /// Sup-norm distance to the complement; zero outside.
    pub fn distance(&self, x: f64, y: f64) -> f64 {
        let b = self.bbox();
        let mut d = (x - b.x0).min(b.x1 - x).min(y - b.y0).min(b.y1 - y);
        if d <= 0.0 {
            return 0.0;
        }
        for r in &self.outside {
            let dx = (r.x0 - x).max(x - r.x1).max(0.0);
            let dy = (r.y0 - y).max(y - r.y1).max(0.0);
            d = d.min(dx.max(dy));
            if d == 0.0 {
                return 0.0;
            }
        }
        d
    }

    pub fn contains(&self, x: f64, y: f64) -> bool {
        self.distance(x, y) > 0.0
    }

    /// Largest distance to the complement over rectangle centres and corners
    /// of the complement grid; a lower bound for the inradius.
    fn inradius_estimate(&self) -> f64 {
        self.rects
            .iter()
            .map(|r| self.distance(0.5 * (r.x0 + r.x1), 0.5 * (r.y0 + r.y1)))
            .fold(0.0, f64::max)
    }
}

/// Half-square `q^` at dyadic level `level`, index `(i, j)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Square {
    pub level: u32,
    pub i: i64,
    pub j: i64,
    pub family: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SquareGeom {
    pub cx: f64,
    pub cy: f64,
    /// Half side of the cover square `q` (equals the side of `q^`).
    pub l: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SquareCover {
    pub omega: RectUnion,
    pub delta: f64,
    /// Corner of the level-0 square.
    pub anchor: [f64; 2],
    /// Side of the level-0 square.
    pub root_side: f64,
    /// Finest level; sides are `root_side / 2^level`.
    pub max_level: u32,
    pub squares: Vec<Square>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CoverOptions {
    /// Levels of refinement below the largest admissible side.
    pub depth: u32,
}

impl Default for CoverOptions {
    fn default() -> Self {
        Self { depth: 6 }
    }
}

impl SquareCover {
    pub fn side(&self, level: u32) -> f64 {
        self.root_side / 2f64.powi(level as i32)
    }

    pub fn geometry(&self, sq: &Square) -> SquareGeom {
        let s = self.side(sq.level);
        SquareGeom {
            cx: self.anchor[0] + (sq.i as f64 + 0.5) * s,
            cy: self.anchor[1] + (sq.j as f64 + 0.5) * s,
            l: s,
        }
    }

    /// Points at least this far from the complement lie in some `q^`.
    pub fn resolution(&self) -> f64 {
        2.5 * self.side(self.max_level)
    }

    /// Cover square `q` in integer units of half the finest side.
    fn int_box(&self, sq: &Square) -> [i64; 4] {
        let m = 1i64 << (self.max_level - sq.level);
        [(2 * sq.i - 1) * m, (2 * sq.i + 3) * m, (2 * sq.j - 1) * m, (2 * sq.j + 3) * m]
    }

    /// Half-square `q^` in the same units.
    fn int_half(&self, sq: &Square) -> [i64; 4] {
        let m = 1i64 << (self.max_level - sq.level);
        [2 * sq.i * m, 2 * (sq.i + 1) * m, 2 * sq.j * m, 2 * (sq.j + 1) * m]
    }

    pub fn families(&self) -> Vec<Vec<usize>> {
        let mut fams = vec![Vec::new(); FAMILY_COUNT];
        for (k, s) in self.squares.iter().enumerate() {
            fams[s.family].push(k);
        }
        fams
    }

    fn tree(&self) -> RTree<GeomWithData<Rectangle<[i64; 2]>, usize>> {
        let items = self
            .squares
            .iter()
            .enumerate()
            .map(|(k, s)| {
                let [x0, x1, y0, y1] = self.int_box(s);
                GeomWithData::new(Rectangle::from_corners([x0, y0], [x1, y1]), k)
            })
            .collect();
        RTree::bulk_load(items)
    }

    /// Indices of squares whose (open) cover squares meet square `k`.
    fn first_neighbours(&self, tree: &RTree<GeomWithData<Rectangle<[i64; 2]>, usize>>, k: usize) -> Vec<usize> {
        let [x0, x1, y0, y1] = self.int_box(&self.squares[k]);
        tree.locate_in_envelope_intersecting(AABB::from_corners([x0, y0], [x1, y1]))
            .map(|g| g.data)
            .filter(|&m| {
                let [a0, a1, b0, b1] = self.int_box(&self.squares[m]);
                a0 < x1 && x0 < a1 && b0 < y1 && y0 < b1
            })
            .collect()
    }

    /// Index of `q` in the cover.
    pub fn index_of(&self, q: &Square) -> Option<usize> {
        self.squares
            .iter()
            .position(|s| s.level == q.level && s.i == q.i && s.j == q.j)
    }

    fn output(&self) -> CoverJson {
        CoverJson {
            families: self
                .families()
                .into_iter()
                .map(|f| f.into_iter().map(|k| self.geometry(&self.squares[k])).collect())
                .collect(),
            constants: None,
        }
    }

    /// JSON document `{families: [[{cx, cy, l}]], constants: {c, N, a, b}}`.
    pub fn to_json(&self, report: &CoverReport) -> serde_json::Value {
        let mut doc = self.output();
        doc.constants = Some(report.constants);
        serde_json::to_value(doc).expect("serializable")
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
struct CoverJson {
    families: Vec<Vec<SquareGeom>>,
    constants: Option<CoverConstants>,
}

/// Whitney cover of `omega` with sides of `q` at most `delta`.
pub fn whitney_cover(omega: &RectUnion, delta: f64, opts: CoverOptions) -> Result<SquareCover> {
    if !(delta > 0.0) || !delta.is_finite() {
        return Err(Error::InvalidParameter("delta must be positive and finite".into()));
    }
    let b = omega.bbox();
    let root = b.width().max(b.height());
    // Largest admissible side: 2s <= delta and 2s <= inradius.
    let r_in = omega.inradius_estimate();
    let top = (0.5 * delta).min(0.5 * r_in);
    if !(top > 0.0) {
        return Err(Error::InvalidParameter("domain has empty interior".into()));
    }
    let top_level = (root / top).log2().ceil().max(0.0) as u32;
    let max_level = top_level + opts.depth;
    if max_level > 40 {
        return Err(Error::Overflow(format!("{max_level} dyadic levels")));
    }
    let mut cover = SquareCover {
        omega: omega.clone(),
        delta,
        anchor: [b.x0, b.y0],
        root_side: root,
        max_level,
        squares: Vec::new(),
    };
    let mut stack = vec![(0u32, 0i64, 0i64)];
    let s_min = cover.side(max_level);
    while let Some((level, i, j)) = stack.pop() {
        let s = cover.side(level);
        let cx = b.x0 + (i as f64 + 0.5) * s;
        let cy = b.y0 + (j as f64 + 0.5) * s;
        let d = omega.distance(cx, cy);
        if d >= 2.0 * s && 2.0 * s <= delta {
            let family = (level as usize % 3) * 4 + (i.rem_euclid(2) as usize) * 2 + j.rem_euclid(2) as usize;
            cover.squares.push(Square { level, i, j, family });
            continue;
        }
        // Every point of Q is within s/2 of its centre.
        if level < max_level && d + 0.5 * s >= 2.0 * s_min {
            for (di, dj) in [(0, 0), (1, 0), (0, 1), (1, 1)] {
                stack.push((level + 1, 2 * i + di, 2 * j + dj));
            }
        }
    }
    cover.squares.sort_by_key(|s| (s.level, s.j, s.i));
    Ok(cover)
}

/// Closure of first neighbours after `k` steps (`k >= 1`).
pub fn neighbours(cover: &SquareCover, q: &Square, k: usize) -> Result<Vec<Square>> {
    let idx = cover
        .index_of(q)
        .ok_or_else(|| Error::InvalidParameter(format!("square {q:?} is not in the cover")))?;
    let tree = cover.tree();
    let mut set = neighbour_closure(cover, &tree, idx, k.max(1));
    set.sort_unstable();
    Ok(set.into_iter().map(|m| cover.squares[m]).collect())
}

fn neighbour_closure(
    cover: &SquareCover,
    tree: &RTree<GeomWithData<Rectangle<[i64; 2]>, usize>>,
    idx: usize,
    k: usize,
) -> Vec<usize> {
    let mut seen = std::collections::BTreeSet::from([idx]);
    let mut frontier = vec![idx];
    for _ in 0..k {
        let mut next = Vec::new();
        for &m in &frontier {
            for n in cover.first_neighbours(tree, m) {
                if seen.insert(n) {
                    next.push(n);
                }
            }
        }
        frontier = next;
    }
    seen.into_iter().collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoverConstants {
    /// Largest side ratio between intersecting squares.
    pub c: f64,
    /// Number of non-empty families.
    #[serde(rename = "N")]
    pub n: usize,
    /// Largest `((dist(q, q') + l_q') / l_q)^(1/k)` over sampled squares.
    pub a: f64,
    /// Largest `#N_k(q)^(1/k)` over sampled squares.
    pub b: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CoverReport {
    pub squares: usize,
    /// Sampled points at distance >= resolution not covered by any `q^`.
    pub uncovered_samples: usize,
    pub samples: usize,
    pub resolution: f64,
    /// Cover squares not inside `omega` or larger than `delta`.
    pub containment_failures: usize,
    pub comparability_failures: usize,
    pub disjointness_failures: usize,
    pub constants: CoverConstants,
    pub passes: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VerifyOptions {
    pub samples: usize,
    /// Squares sampled for the neighbour constants `a`, `b`.
    pub neighbour_samples: usize,
    pub max_k: usize,
    pub seed: u64,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        Self {
            samples: 10_000,
            neighbour_samples: 200,
            max_k: 3,
            seed: 0,
        }
    }
}

/// Checks (i) half-square cover by sampling, (ii) comparability and
/// (iii) per-family disjointness exactly, and measures `c, N, a, b`.
pub fn verify_cover(cover: &SquareCover, opts: VerifyOptions) -> CoverReport {
    let tree = cover.tree();
    let n = cover.squares.len();

    let containment_failures = cover
        .squares
        .par_iter()
        .filter(|s| {
            let g = cover.geometry(s);
            2.0 * g.l > cover.delta || cover.omega.distance(g.cx, g.cy) < g.l
        })
        .count();

    let pair_stats: Vec<(f64, usize, usize)> = (0..n)
        .into_par_iter()
        .map(|k| {
            let mut worst: f64 = 1.0;
            let (mut comp, mut disj) = (0, 0);
            let sk = cover.squares[k];
            for m in cover.first_neighbours(&tree, k) {
                if m == k {
                    continue;
                }
                let sm = cover.squares[m];
                let ratio = 2f64.powi((sk.level as i32 - sm.level as i32).abs());
                worst = worst.max(ratio);
                if ratio > COMPARABILITY {
                    comp += 1;
                }
                if sm.family == sk.family {
                    disj += 1;
                }
            }
            (worst, comp, disj)
        })
        .collect();
    let c = pair_stats.iter().map(|p| p.0).fold(1.0, f64::max);
    let comparability_failures = pair_stats.iter().map(|p| p.1).sum::<usize>() / 2;
    let disjointness_failures = pair_stats.iter().map(|p| p.2).sum::<usize>() / 2;

    // (i) by rejection sampling in the bounding box.
    let res = cover.resolution();
    let b = cover.omega.bbox();
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut pts = Vec::with_capacity(opts.samples);
    let mut tries = 0usize;
    while pts.len() < opts.samples && tries < 1000 * opts.samples.max(1) {
        tries += 1;
        let x = b.x0 + rng.random::<f64>() * b.width();
        let y = b.y0 + rng.random::<f64>() * b.height();
        if cover.omega.distance(x, y) >= res {
            pts.push((x, y));
        }
    }
    let finest = cover.side(cover.max_level) / 2.0;
    let uncovered_samples = pts
        .par_iter()
        .filter(|&&(x, y)| {
            let ix = ((x - cover.anchor[0]) / finest).floor() as i64;
            let iy = ((y - cover.anchor[1]) / finest).floor() as i64;
            !tree
                .locate_in_envelope_intersecting(AABB::from_point([ix, iy]))
                .any(|g| {
                    let [x0, x1, y0, y1] = cover.int_half(&cover.squares[g.data]);
                    ix >= x0 && ix < x1 && iy >= y0 && iy < y1
                })
        })
        .count();

    // Neighbour constants on a sample of squares.
    let mut picks: Vec<usize> = (0..n).collect();
    let take = opts.neighbour_samples.min(n);
    for t in 0..take {
        let r = rng.random_range(t..n);
        picks.swap(t, r);
    }
    picks.truncate(take);
    let (a, bconst) = picks
        .par_iter()
        .map(|&k| {
            let gk = cover.geometry(&cover.squares[k]);
            let (mut a, mut b): (f64, f64) = (1.0, 1.0);
            for kk in 1..=opts.max_k.max(1) {
                let set = neighbour_closure(cover, &tree, k, kk);
                b = b.max((set.len() as f64).powf(1.0 / kk as f64));
                for &m in &set {
                    let gm = cover.geometry(&cover.squares[m]);
                    let dx = ((gm.cx - gk.cx).abs() - gm.l - gk.l).max(0.0);
                    let dy = ((gm.cy - gk.cy).abs() - gm.l - gk.l).max(0.0);
                    let ratio = (dx.hypot(dy) + gm.l) / gk.l;
                    a = a.max(ratio.powf(1.0 / kk as f64));
                }
            }
            (a, b)
        })
        .reduce(|| (1.0, 1.0), |x, y| (x.0.max(y.0), x.1.max(y.1)));

    let nonempty = cover.families().iter().filter(|f| !f.is_empty()).count();
    let constants = CoverConstants { c, n: nonempty, a, b: bconst };
    let passes = containment_failures == 0
        && comparability_failures == 0
        && disjointness_failures == 0
        && uncovered_samples == 0
        && [c, a, bconst].iter().all(|v| v.is_finite());
    CoverReport {
        squares: n,
        uncovered_samples,
        samples: pts.len(),
        resolution: res,
        containment_failures,
        comparability_failures,
        disjointness_failures,
        constants,
        passes,
    }
}
