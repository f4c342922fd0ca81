//! Self-similar sets generated by translated dilations `S = τ_q ∘ δ_r`.
//!
//! The distinguished family is the Strichartz system of `2^{2n+2}` maps with
//! horizontal corners in `{0, 1−r}^{2n}` and vertical offsets
//! `{0, 1/4, 1/2, 3/4}`. Map `j` of that system has offset family
//! `j / 2^{2n}` and corner `j % 2^{2n}`, where bit `i` of the corner index
//! selects `z_i = 1 − r`. Map 0 is `δ_r` itself, so cylinders built from the
//! default base point are anchored at the identity.
//!
//! Letters of a [`Word`] are 0-based map indices.

use std::sync::atomic::{AtomicU64, Ordering};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::{self, Execution};
use crate::heis::{raw, HPoint};
use crate::measure::{DiscreteMeasure, Weights};

/// Largest atom count [`cylinder_measure`] will allocate by default.
pub const DEFAULT_ATOM_CAP: usize = 1 << 25;

/// Vertical offsets of the four Strichartz families.
pub const STRICHARTZ_OFFSETS: [f64; 4] = [0.0, 0.25, 0.5, 0.75];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Similarity {
    q: HPoint,
    r: f64,
}

impl Similarity {
    pub fn new(q: HPoint, r: f64) -> Result<Self> {
        if !(r > 0.0 && r < 1.0) {
            return Err(Error::param("r", r, "contraction ratio must lie in (0, 1)"));
        }
        Ok(Similarity { q, r })
    }

    pub fn q(&self) -> &HPoint {
        &self.q
    }

    pub fn r(&self) -> f64 {
        self.r
    }

    pub fn n(&self) -> usize {
        self.q.n()
    }

    #[inline]
    pub(crate) fn apply_into(&self, p: &[f64], out: &mut [f64]) {
        let n = self.q.n();
        let q = self.q.coords();
        let r = self.r;
        // A(q, δ_r p) = r·A(q, p) since A only sees horizontal parts
        let a = r * raw::symplectic(n, q, p);
        for i in 0..2 * n {
            out[i] = q[i] + r * p[i];
        }
        out[2 * n] = q[2 * n] + r * r * p[2 * n] + a;
    }

    pub fn apply(&self, p: &HPoint) -> Result<HPoint> {
        if p.n() != self.n() {
            return Err(Error::DimensionMismatch {
                left: self.n(),
                right: p.n(),
            });
        }
        let mut out = vec![0.0; p.dim()];
        self.apply_into(p.coords(), &mut out);
        Ok(HPoint::from_raw(p.n(), &out))
    }

    /// `self ∘ other`, again a translated dilation.
    pub fn compose(&self, other: &Similarity) -> Similarity {
        let q = self.apply(&other.q).expect("similarities share n");
        Similarity { q, r: self.r * other.r }
    }

    /// The unique fixed point: `p′ = q′/(1−r)`, `p_{2n+1} = q_{2n+1}/(1−r²)`.
    pub fn fixed_point(&self) -> HPoint {
        let n = self.n();
        let q = self.q.coords();
        let mut p = vec![0.0; 2 * n + 1];
        for i in 0..2 * n {
            p[i] = q[i] / (1.0 - self.r);
        }
        p[2 * n] = q[2 * n] / (1.0 - self.r * self.r);
        HPoint::from_raw(n, &p)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StrichartzMeta {
    pub r: f64,
    /// Horizontal corner `z_c` for each corner index `c`.
    pub corners: Vec<Vec<f64>>,
    pub offsets: [f64; 4],
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Ifs {
    n: usize,
    maps: Vec<Similarity>,
    meta: Option<StrichartzMeta>,
}

impl Ifs {
    /// A custom system. Maps are stably sorted by ascending ratio, so the
    /// index of a map may differ from its position in `maps`.
    pub fn new(n: usize, mut maps: Vec<Similarity>) -> Result<Self> {
        if maps.is_empty() {
            return Err(Error::Empty("map list"));
        }
        if let Some(m) = maps.iter().find(|m| m.n() != n) {
            return Err(Error::DimensionMismatch { left: n, right: m.n() });
        }
        maps.sort_by(|a, b| a.r.total_cmp(&b.r));
        Ok(Ifs { n, maps, meta: None })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn maps(&self) -> &[Similarity] {
        &self.maps
    }

    pub fn len(&self) -> usize {
        self.maps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.maps.is_empty()
    }

    pub fn meta(&self) -> Option<&StrichartzMeta> {
        self.meta.as_ref()
    }

    pub fn ratios(&self) -> Vec<f64> {
        self.maps.iter().map(|m| m.r).collect()
    }

    pub fn max_ratio(&self) -> f64 {
        self.maps.iter().map(|m| m.r).fold(0.0, f64::max)
    }

    pub fn equal_ratios(&self) -> bool {
        self.maps.iter().all(|m| m.r == self.maps[0].r)
    }

    /// Fixed point of the first map; it lies in the attractor.
    pub fn base_point(&self) -> HPoint {
        self.maps[0].fixed_point()
    }

    /// `sup_{x∈K} d(base, x)` bounded by `max_i d(base, S_i(base)) / (1 − r_max)`
    /// for a base point in the attractor.
    pub fn attractor_radius(&self, base: &HPoint) -> f64 {
        let far = self
            .maps
            .iter()
            .map(|m| raw::dist(self.n, base.coords(), m.apply(base).unwrap().coords()))
            .fold(0.0, f64::max);
        far / (1.0 - self.max_ratio())
    }
}

pub fn make_strichartz_ifs(n: usize, r: f64) -> Result<Ifs> {
    if n == 0 {
        return Err(Error::Invalid("group index n must be positive".into()));
    }
    if !(r > 0.0 && r < 0.5) {
        return Err(Error::param("r", r, "Strichartz ratio must lie in (0, 1/2)"));
    }
    let corners: Vec<Vec<f64>> = (0..1usize << (2 * n))
        .map(|c| {
            (0..2 * n)
                .map(|i| if c >> i & 1 == 1 { 1.0 - r } else { 0.0 })
                .collect()
        })
        .collect();
    let mut maps = Vec::with_capacity(4 * corners.len());
    for &t in &STRICHARTZ_OFFSETS {
        for z in &corners {
            maps.push(Similarity::new(HPoint::from_parts(z, t)?, r)?);
        }
    }
    Ok(Ifs {
        n,
        maps,
        meta: Some(StrichartzMeta {
            r,
            corners,
            offsets: STRICHARTZ_OFFSETS,
        }),
    })
}

/// The `a > 0` solving `Σ rᵢᵃ = 1`, by bisection to machine precision.
pub fn similarity_dimension(ifs: &Ifs) -> f64 {
    let ratios = ifs.ratios();
    let f = |a: f64| ratios.iter().map(|r| r.powf(a)).sum::<f64>() - 1.0;
    let mut lo = 0.0;
    let mut hi = 1.0;
    while f(hi) > 0.0 {
        lo = hi;
        hi *= 2.0;
    }
    loop {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if f(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    if f(lo).abs() <= f(hi).abs() {
        lo
    } else {
        hi
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Word {
    pub letters: Vec<usize>,
}

impl Word {
    pub fn new(letters: Vec<usize>) -> Self {
        Word { letters }
    }

    pub fn len(&self) -> usize {
        self.letters.len()
    }

    pub fn is_empty(&self) -> bool {
        self.letters.is_empty()
    }

    fn check(&self, ifs: &Ifs) -> Result<()> {
        match self.letters.iter().find(|&&l| l >= ifs.len()) {
            Some(&l) => Err(Error::Invalid(format!(
                "letter {l} out of range for a system of {} maps",
                ifs.len()
            ))),
            None => Ok(()),
        }
    }

    /// The word of a level-`k` atom from its index in [`cylinder_measure`].
    pub fn from_index(ifs: &Ifs, k: usize, mut index: usize) -> Self {
        let mut letters = vec![0; k];
        for slot in letters.iter_mut().rev() {
            *slot = index % ifs.len();
            index /= ifs.len();
        }
        Word { letters }
    }
}

/// `S_{w₁} ∘ S_{w₂} ∘ … ∘ S_{w_k}(p)`.
pub fn apply_word(ifs: &Ifs, w: &Word, p: &HPoint) -> Result<HPoint> {
    w.check(ifs)?;
    if p.n() != ifs.n {
        return Err(Error::DimensionMismatch {
            left: ifs.n,
            right: p.n(),
        });
    }
    let mut cur = p.coords().to_vec();
    let mut next = cur.clone();
    for &l in w.letters.iter().rev() {
        ifs.maps[l].apply_into(&cur, &mut next);
        std::mem::swap(&mut cur, &mut next);
    }
    Ok(HPoint::from_raw(ifs.n, &cur))
}

/// `S_w` as a single similarity `τ_{S_w(0)} ∘ δ_{r_w}`.
pub fn word_similarity(ifs: &Ifs, w: &Word) -> Result<Similarity> {
    let q = apply_word(ifs, w, &HPoint::identity(ifs.n))?;
    let r = w.letters.iter().map(|&l| ifs.maps[l].r).product();
    Ok(Similarity { q, r })
}

pub fn cylinder_measure(ifs: &Ifs, k: usize, base: &HPoint, exec: Execution) -> Result<DiscreteMeasure> {
    cylinder_measure_capped(ifs, k, base, DEFAULT_ATOM_CAP, exec)
}

/// One atom per length-`k` word at `S_w(base)`, ordered with the first
/// letter most significant. Weights are `N^{−k}` for equal ratios and
/// `Π r_{wᵢ}ᵃ` otherwise.
pub fn cylinder_measure_capped(
    ifs: &Ifs,
    k: usize,
    base: &HPoint,
    cap: usize,
    exec: Execution,
) -> Result<DiscreteMeasure> {
    if base.n() != ifs.n {
        return Err(Error::DimensionMismatch {
            left: ifs.n,
            right: base.n(),
        });
    }
    let big_n = ifs.len();
    let requested = (big_n as u128).checked_pow(k as u32).unwrap_or(u128::MAX);
    if requested > cap as u128 {
        return Err(Error::AtomCap { requested, cap });
    }
    let dim = 2 * ifs.n + 1;
    let mut coords = base.coords().to_vec();
    let mut weights = vec![1.0];
    let equal = ifs.equal_ratios();
    let a = if equal { 0.0 } else { similarity_dimension(ifs) };
    for _ in 0..k {
        let prev_len = coords.len();
        let mut next = vec![0.0; prev_len * big_n];
        exec::fill_parts(&mut next, big_n, exec, |letter, out| {
            let map = &ifs.maps[letter];
            for (src, dst) in coords.chunks_exact(dim).zip(out.chunks_exact_mut(dim)) {
                map.apply_into(src, dst);
            }
        });
        coords = next;
        if !equal {
            weights = ifs
                .maps
                .iter()
                .flat_map(|m| {
                    let f = m.r.powf(a);
                    weights.iter().map(move |w| f * w)
                })
                .collect();
        }
    }
    let weights = if equal {
        Weights::Uniform((big_n as f64).powi(-(k as i32)))
    } else {
        Weights::PerAtom(weights)
    };
    let label = match ifs.meta {
        Some(ref m) => format!("strichartz(n={}, r={}) level {k}", ifs.n, m.r),
        None => format!("ifs({} maps) level {k}", big_n),
    };
    Ok(DiscreteMeasure::from_flat(ifs.n, coords, weights, label)?.with_spacing(Some(ifs.max_ratio().powi(k as i32))))
}

/// Minimal distance between level-`level` atoms lying in distinct
/// first-level cylinders; `+∞` for a single-map system.
pub fn min_piece_separation(ifs: &Ifs, level: usize, base: &HPoint, exec: Execution) -> Result<f64> {
    min_piece_separation_within(ifs, &Word::default(), level, base, exec)
}

/// As [`min_piece_separation`], restricted to the children of the cylinder
/// `prefix`; atoms are words of length `level` extending `prefix`.
pub fn min_piece_separation_within(
    ifs: &Ifs,
    prefix: &Word,
    level: usize,
    base: &HPoint,
    exec: Execution,
) -> Result<f64> {
    prefix.check(ifs)?;
    if level <= prefix.len() {
        return Err(Error::Invalid(format!(
            "level {level} must exceed the prefix length {}",
            prefix.len()
        )));
    }
    if base.n() != ifs.n {
        return Err(Error::DimensionMismatch {
            left: ifs.n,
            right: base.n(),
        });
    }
    if ifs.len() == 1 {
        return Ok(f64::INFINITY);
    }
    let search = Separation {
        ifs,
        level,
        radius: ifs.attractor_radius(base),
        base: base.coords().to_vec(),
        best: AtomicU64::new(f64::INFINITY.to_bits()),
    };
    let root = word_similarity(ifs, prefix)?;
    let children: Vec<Node> = (0..ifs.len())
        .map(|a| search.child(&search.node(root.clone(), prefix.len()), a))
        .collect();
    let pairs: Vec<(usize, usize)> = (0..children.len())
        .flat_map(|i| (i + 1..children.len()).map(move |j| (i, j)))
        .collect();
    exec::map_indices(pairs.len(), exec, |k| {
        let (i, j) = pairs[k];
        search.explore(&children[i], &children[j]);
    });
    Ok(f64::from_bits(search.best.load(Ordering::Relaxed)))
}

struct Node {
    sim: Similarity,
    center: Vec<f64>,
    depth: usize,
}

struct Separation<'a> {
    ifs: &'a Ifs,
    level: usize,
    radius: f64,
    base: Vec<f64>,
    best: AtomicU64,
}

impl Separation<'_> {
    fn node(&self, sim: Similarity, depth: usize) -> Node {
        let mut center = vec![0.0; self.base.len()];
        sim.apply_into(&self.base, &mut center);
        Node { sim, center, depth }
    }

    fn child(&self, parent: &Node, letter: usize) -> Node {
        self.node(parent.sim.compose(&self.ifs.maps[letter]), parent.depth + 1)
    }

    fn reach(&self, node: &Node) -> f64 {
        if node.depth == self.level {
            0.0
        } else {
            node.sim.r * self.radius
        }
    }

    fn explore(&self, a: &Node, b: &Node) {
        let d = raw::dist(self.ifs.n, &a.center, &b.center);
        let best = f64::from_bits(self.best.load(Ordering::Relaxed));
        if d - self.reach(a) - self.reach(b) >= best {
            return;
        }
        if a.depth == self.level && b.depth == self.level {
            // positive floats order like their bit patterns
            self.best.fetch_min(d.to_bits(), Ordering::Relaxed);
            return;
        }
        let (split, keep) = if b.depth == self.level || (a.depth < self.level && self.reach(a) >= self.reach(b)) {
            (a, b)
        } else {
            (b, a)
        };
        let mut kids: Vec<(f64, Node)> = (0..self.ifs.len())
            .map(|l| {
                let c = self.child(split, l);
                (raw::dist(self.ifs.n, &c.center, &keep.center), c)
            })
            .collect();
        kids.sort_by(|x, y| x.0.total_cmp(&y.0));
        for (_, c) in &kids {
            self.explore(c, keep);
        }
    }
}

/// Strichartz boxes `Q_c = z_c + [0, r]^{2n}` inside `Q = [0,1]^{2n}`.
#[derive(Clone, Debug)]
struct Boxes {
    n: usize,
    r: f64,
    corners: Vec<Vec<f64>>,
    eps: f64,
}

enum Place {
    Inside(usize),
    Taper {
        corner: usize,
        nearest: Vec<f64>,
        coef: f64,
    },
    Outside,
}

const BOX_TOL: f64 = 1e-12;

impl Boxes {
    fn new(n: usize, r: f64) -> Self {
        let corners = (0..1usize << (2 * n))
            .map(|c| {
                (0..2 * n)
                    .map(|i| if c >> i & 1 == 1 { 1.0 - r } else { 0.0 })
                    .collect()
            })
            .collect();
        Boxes {
            n,
            r,
            corners,
            eps: 0.5 * (1.0 - 2.0 * r),
        }
    }

    fn h(&self, corner: usize, w: &[f64]) -> f64 {
        raw::symplectic(self.n, &self.corners[corner], w)
    }

    fn box_dist(&self, corner: usize, x: &[f64]) -> f64 {
        let z = &self.corners[corner];
        x.iter()
            .zip(z)
            .map(|(&xi, &zi)| {
                let e = (zi - xi).max(xi - zi - self.r).max(0.0);
                e * e
            })
            .sum::<f64>()
            .sqrt()
    }

    fn place(&self, x: &[f64]) -> Place {
        let mut best = (f64::INFINITY, 0);
        for c in 0..self.corners.len() {
            let d = self.box_dist(c, x);
            if d < best.0 {
                best = (d, c);
            }
        }
        let (d, corner) = best;
        if d <= BOX_TOL {
            Place::Inside(corner)
        } else if d < self.eps {
            let z = &self.corners[corner];
            let nearest = x.iter().zip(z).map(|(&xi, &zi)| xi.clamp(zi, zi + self.r)).collect();
            Place::Taper {
                corner,
                nearest,
                coef: (self.eps - d) / self.eps,
            }
        } else {
            Place::Outside
        }
    }

    /// `(w − z_c)/r`, clamped into `Q`.
    fn unscale(&self, corner: usize, w: &[f64]) -> Vec<f64> {
        w.iter()
            .zip(&self.corners[corner])
            .map(|(wi, zi)| ((wi - zi) / self.r).clamp(0.0, 1.0))
            .collect()
    }

    fn h_sup(&self) -> f64 {
        let d = 2 * self.n;
        let mut sup = 0.0f64;
        for (c, z) in self.corners.iter().enumerate() {
            for v in 0..1usize << d {
                let w: Vec<f64> = (0..d)
                    .map(|i| z[i] + if v >> i & 1 == 1 { self.r } else { 0.0 })
                    .collect();
                sup = sup.max(self.h(c, &w).abs());
            }
        }
        sup
    }
}

/// Multilinear interpolation stencil on the uniform grid with `res` nodes
/// per axis.
fn stencil(y: &[f64], res: usize) -> Vec<(usize, f64)> {
    let m = (res - 1) as f64;
    let mut base = 0usize;
    let mut stride = 1usize;
    let mut axes = Vec::with_capacity(y.len());
    for &yi in y {
        let mut u = yi.clamp(0.0, 1.0) * m;
        if (u - u.round()).abs() < 1e-9 {
            u = u.round();
        }
        let i0 = (u.floor() as usize).min(res - 2);
        let frac = u - i0 as f64;
        base += i0 * stride;
        axes.push((stride, frac));
        stride *= res;
    }
    let mut out = vec![(base, 1.0)];
    for (stride, frac) in axes {
        if frac == 0.0 {
            continue;
        }
        if frac == 1.0 {
            out.iter_mut().for_each(|e| e.0 += stride);
            continue;
        }
        let mut next = Vec::with_capacity(2 * out.len());
        for &(i, w) in &out {
            next.push((i, w * (1.0 - frac)));
            next.push((i + stride, w * frac));
        }
        out = next;
    }
    out
}

/// The tilt function `φ` on a uniform grid over `Q = [0,1]^{2n}`.
#[derive(Clone, Debug)]
pub struct GridFunction {
    n: usize,
    r: f64,
    resolution: usize,
    values: Vec<f64>,
    boxes: Boxes,
    iterations: usize,
    updates: Vec<f64>,
}

impl GridFunction {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn r(&self) -> f64 {
        self.r
    }

    pub fn resolution(&self) -> usize {
        self.resolution
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn iterations(&self) -> usize {
        self.iterations
    }

    /// Sup-norm of successive updates, one entry per iterate.
    pub fn updates(&self) -> &[f64] {
        &self.updates
    }

    pub fn taper_width(&self) -> f64 {
        self.boxes.eps
    }

    pub fn h_sup(&self) -> f64 {
        self.boxes.h_sup()
    }

    /// `‖h‖∞ / (1 − r²)`.
    pub fn sup_bound(&self) -> f64 {
        self.h_sup() / (1.0 - self.r * self.r)
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Coordinates of grid node `index`.
    pub fn node(&self, mut index: usize) -> Vec<f64> {
        let m = (self.resolution - 1) as f64;
        (0..2 * self.n)
            .map(|_| {
                let i = index % self.resolution;
                index /= self.resolution;
                i as f64 / m
            })
            .collect()
    }

    /// Multilinear interpolation, clamped to `Q`.
    pub fn eval(&self, x: &[f64]) -> f64 {
        stencil(x, self.resolution)
            .iter()
            .map(|&(i, w)| w * self.values[i])
            .sum()
    }

    /// Applies the fixed-point operator `depth` times to the interpolant
    /// before evaluating at `x`. The result satisfies the self-similarity
    /// relation up to `r^{2·depth}` times the interpolation error.
    pub fn eval_refined(&self, x: &[f64], depth: usize) -> f64 {
        if depth == 0 {
            return self.eval(x);
        }
        let inner = |corner: usize, w: &[f64]| {
            let y = self.boxes.unscale(corner, w);
            self.r * self.r * self.eval_refined(&y, depth - 1) + self.boxes.h(corner, w)
        };
        match self.boxes.place(x) {
            Place::Inside(c) => inner(c, x),
            Place::Taper { corner, nearest, coef } => coef * inner(corner, &nearest),
            Place::Outside => 0.0,
        }
    }

    /// Depth at which [`eval_refined`](Self::eval_refined) is exact to
    /// roughly machine precision.
    pub fn default_depth(&self) -> usize {
        ((1e-16f64).ln() / (self.r * self.r).ln()).ceil().clamp(1.0, 64.0) as usize
    }

    /// `max |φ(w) − r²φ((w−z_c)/r) − h_c(w)|` over grid nodes of `B`.
    pub fn grid_residual(&self) -> f64 {
        let mut worst = 0.0f64;
        for idx in 0..self.values.len() {
            let w = self.node(idx);
            if let Place::Inside(c) = self.boxes.place(&w) {
                let y = self.boxes.unscale(c, &w);
                let rhs = self.r * self.r * self.eval(&y) + self.boxes.h(c, &w);
                worst = worst.max((self.values[idx] - rhs).abs());
            }
        }
        worst
    }

    /// Self-similarity residual of the depth-`depth` refinement at the
    /// given points of `B`, which equals the gap between consecutive depths.
    pub fn refined_residual(&self, points: &[Vec<f64>], depth: usize) -> f64 {
        points
            .iter()
            .filter(|w| matches!(self.boxes.place(w), Place::Inside(_)))
            .map(|w| (self.eval_refined(w, depth + 1) - self.eval_refined(w, depth)).abs())
            .fold(0.0, f64::max)
    }
}

/// Margin allowed above `r²` in successive update ratios.
pub const CONTRACTION_MARGIN: f64 = 0.01;

const MAX_PHI_ITERATIONS: usize = 10_000;

/// Iterates `f ← L(f̃ + h)` from `f ≡ 0` until the sup-norm update falls
/// below `tol`. Grid nodes sit at `i/(resolution − 1)`; when `1/r` is an
/// integer dividing `resolution − 1` the rescaling `(w − z)/r` maps nodes to
/// nodes exactly.
pub fn phi_fixed_point(n: usize, r: f64, resolution: usize, tol: f64, exec: Execution) -> Result<GridFunction> {
    if n == 0 {
        return Err(Error::Invalid("group index n must be positive".into()));
    }
    if !(r > 0.0 && r < 0.5) {
        return Err(Error::param("r", r, "Strichartz ratio must lie in (0, 1/2)"));
    }
    if tol.is_nan() || tol <= 0.0 {
        return Err(Error::param("tol", tol, "must be positive"));
    }
    if resolution < 2 || r * (resolution - 1) as f64 + 1e-9 < 2.0 {
        return Err(Error::Invalid(format!(
            "resolution {resolution} leaves fewer than 2 grid cells per axis in each box"
        )));
    }
    let total = resolution
        .checked_pow(2 * n as u32)
        .filter(|&t| t <= u32::MAX as usize)
        .ok_or_else(|| Error::Invalid(format!("grid {resolution}^{} is too large", 2 * n)))?;
    let boxes = Boxes::new(n, r);
    let template = GridFunction {
        n,
        r,
        resolution,
        values: Vec::new(),
        boxes: boxes.clone(),
        iterations: 0,
        updates: Vec::new(),
    };

    // T(f)[i] = constant[i] + Σ weight·f[source] over the CSR row of i.
    let rows = exec::map_indices(total, exec, |idx| {
        let x = template.node(idx);
        let row = |corner: usize, w: &[f64], coef: f64| {
            let y = boxes.unscale(corner, w);
            let entries: Vec<(u32, f64)> = stencil(&y, resolution)
                .into_iter()
                .map(|(i, wt)| (i as u32, coef * r * r * wt))
                .collect();
            (coef * boxes.h(corner, w), entries)
        };
        match boxes.place(&x) {
            Place::Inside(c) => row(c, &x, 1.0),
            Place::Taper { corner, nearest, coef } => row(corner, &nearest, coef),
            Place::Outside => (0.0, Vec::new()),
        }
    });
    let mut offsets = Vec::with_capacity(total + 1);
    offsets.push(0usize);
    let mut constant = Vec::with_capacity(total);
    let mut entries = Vec::new();
    for (c, e) in rows {
        constant.push(c);
        entries.extend(e);
        offsets.push(entries.len());
    }

    let mut values = vec![0.0; total];
    let mut next = vec![0.0; total];
    let mut updates = Vec::new();
    let parts = total.div_ceil(exec::CHUNK).max(1);
    let size = total / parts;
    let bound = r * r + CONTRACTION_MARGIN;
    loop {
        exec::fill_parts(&mut next, parts, exec, |part, out| {
            let start = part * size;
            for (k, slot) in out.iter_mut().enumerate() {
                let i = start + k;
                let mut v = constant[i];
                for &(src, w) in &entries[offsets[i]..offsets[i + 1]] {
                    v += w * values[src as usize];
                }
                *slot = v;
            }
        });
        let update = values.iter().zip(&next).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        std::mem::swap(&mut values, &mut next);
        updates.push(update);
        let it = updates.len();
        if it >= 2 {
            let prev = updates[it - 2];
            let sup = values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            if prev > 1e3 * f64::EPSILON * sup.max(1.0) && update / prev > bound {
                return Err(Error::NotContracting {
                    iteration: it,
                    ratio: update / prev,
                    bound,
                });
            }
        }
        if update < tol {
            break;
        }
        if it >= MAX_PHI_ITERATIONS {
            return Err(Error::NonConvergence {
                achieved: update,
                target: tol,
            });
        }
    }
    Ok(GridFunction {
        values,
        iterations: updates.len(),
        updates,
        ..template
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegionWitness {
    pub point: Vec<f64>,
    pub map: usize,
    pub detail: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegionReport {
    pub samples: usize,
    pub maps: usize,
    pub refine_depth: usize,
    pub containment_violations: usize,
    /// Smallest `min(v − φ(w), φ(w) + 1 − v)` over images `(w, v) = S_j(q)`.
    pub min_containment_margin: f64,
    /// Largest self-similarity residual of the refined `φ` at image points.
    pub max_refined_residual: f64,
    /// Largest self-similarity residual of the grid `φ` at grid nodes of `B`.
    pub grid_residual: f64,
    pub disjointness_violations: usize,
    /// Smallest sampled vertical distance from an image to another slab
    /// over the same horizontal box.
    pub sampled_vertical_gap: f64,
    /// Separation `1 − 2r` between distinct horizontal boxes.
    pub horizontal_gap: f64,
    /// Separation `1/4 − r²` between slabs over the same box.
    pub vertical_gap: f64,
    pub certified: bool,
    pub witness: Option<RegionWitness>,
}

const REGION_TOL: f64 = 1e-10;

#[derive(Clone)]
struct RegionAcc {
    containment_violations: usize,
    min_margin: f64,
    disjointness_violations: usize,
    min_gap: f64,
    witness: Option<RegionWitness>,
}

impl RegionAcc {
    fn empty() -> Self {
        RegionAcc {
            containment_violations: 0,
            min_margin: f64::INFINITY,
            disjointness_violations: 0,
            min_gap: f64::INFINITY,
            witness: None,
        }
    }

    fn merge(mut self, o: RegionAcc) -> Self {
        self.containment_violations += o.containment_violations;
        self.disjointness_violations += o.disjointness_violations;
        self.min_margin = self.min_margin.min(o.min_margin);
        self.min_gap = self.min_gap.min(o.min_gap);
        self.witness = self.witness.or(o.witness);
        self
    }
}

/// Samples `q ∈ R = {q′ ∈ Q, φ(q′) ≤ q_{2n+1} ≤ φ(q′) + 1}` and checks that
/// every image `S_j(q)` lies in `R` and in no other image slab.
pub fn verify_invariant_region(
    ifs: &Ifs,
    phi: &GridFunction,
    sample_count: usize,
    seed: u64,
    exec: Execution,
) -> Result<RegionReport> {
    let meta = ifs
        .meta()
        .ok_or_else(|| Error::Invalid("invariant region check needs a Strichartz system".into()))?;
    if ifs.n != phi.n || (meta.r - phi.r).abs() > 1e-15 {
        return Err(Error::Invalid(format!(
            "phi was built for (n={}, r={}) but the system has (n={}, r={})",
            phi.n, phi.r, ifs.n, meta.r
        )));
    }
    if sample_count == 0 {
        return Err(Error::Empty("sample set"));
    }
    let n = ifs.n;
    let d = 2 * n;
    let r = meta.r;
    let depth = phi.default_depth();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let samples: Vec<(Vec<f64>, f64)> = (0..sample_count)
        .map(|_| ((0..d).map(|_| rng.gen::<f64>()).collect(), rng.gen::<f64>()))
        .collect();

    let slab = |map: &Similarity, w: &[f64], v: f64, phi_w: f64| -> Option<f64> {
        let z = map.q().horizontal();
        let inside = w
            .iter()
            .zip(z)
            .all(|(wi, zi)| *wi >= zi - BOX_TOL && *wi <= zi + r + BOX_TOL);
        inside.then(|| v - phi_w - map.q().vertical())
    };

    let acc = exec::chunked_reduce(
        samples.len(),
        exec,
        RegionAcc::empty(),
        |range| {
            let mut acc = RegionAcc::empty();
            let mut q = vec![0.0; d + 1];
            let mut img = vec![0.0; d + 1];
            for (qh, u) in &samples[range] {
                q[..d].copy_from_slice(qh);
                q[d] = phi.eval_refined(qh, depth) + u;
                for (j, map) in ifs.maps.iter().enumerate() {
                    map.apply_into(&q, &mut img);
                    let (w, v) = (&img[..d], img[d]);
                    let in_q = w.iter().all(|x| (-BOX_TOL..=1.0 + BOX_TOL).contains(x));
                    let phi_w = phi.eval_refined(w, depth);
                    let margin = (v - phi_w).min(phi_w + 1.0 - v);
                    acc.min_margin = acc.min_margin.min(margin);
                    if !in_q || margin < -REGION_TOL {
                        acc.containment_violations += 1;
                        acc.witness.get_or_insert(RegionWitness {
                            point: q.clone(),
                            map: j,
                            detail: format!("image escapes R with margin {margin:e}"),
                        });
                    }
                    for (k, other) in ifs.maps.iter().enumerate() {
                        if k == j {
                            continue;
                        }
                        if let Some(h) = slab(other, w, v, phi_w) {
                            let gap = (-h).max(h - r * r);
                            acc.min_gap = acc.min_gap.min(gap);
                            if gap <= REGION_TOL {
                                acc.disjointness_violations += 1;
                                acc.witness.get_or_insert(RegionWitness {
                                    point: q.clone(),
                                    map: j,
                                    detail: format!("image of map {j} lies in the slab of map {k}"),
                                });
                            }
                        }
                    }
                }
            }
            acc
        },
        RegionAcc::merge,
    );

    let wpts: Vec<Vec<f64>> = samples
        .iter()
        .take(2000)
        .flat_map(|(qh, _)| {
            meta.corners
                .iter()
                .map(move |z| qh.iter().zip(z).map(|(x, zi)| zi + r * x).collect())
        })
        .collect();
    let horizontal_gap = 1.0 - 2.0 * r;
    let vertical_gap = 0.25 - r * r;
    let certified = acc.containment_violations == 0
        && acc.disjointness_violations == 0
        && horizontal_gap > 0.0
        && vertical_gap > 0.0;
    Ok(RegionReport {
        samples: sample_count,
        maps: ifs.len(),
        refine_depth: depth,
        containment_violations: acc.containment_violations,
        min_containment_margin: acc.min_margin,
        max_refined_residual: phi.refined_residual(&wpts, depth),
        grid_residual: phi.grid_residual(),
        disjointness_violations: acc.disjointness_violations,
        sampled_vertical_gap: acc.min_gap,
        horizontal_gap,
        vertical_gap,
        certified,
        witness: acc.witness,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MapConfig {
    pub q: Vec<f64>,
    pub r: f64,
}

/// IFS config file: `{"n":1,"kind":"strichartz","r":0.25}` or
/// `{"n":1,"kind":"custom","maps":[{"q":[..],"r":..}]}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum IfsConfig {
    Strichartz { n: usize, r: f64 },
    Custom { n: usize, maps: Vec<MapConfig> },
}

impl IfsConfig {
    pub fn build(&self) -> Result<Ifs> {
        match self {
            IfsConfig::Strichartz { n, r } => make_strichartz_ifs(*n, *r),
            IfsConfig::Custom { n, maps } => Ifs::new(
                *n,
                maps.iter()
                    .map(|m| Similarity::new(HPoint::from_slice(*n, &m.q)?, m.r))
                    .collect::<Result<_>>()?,
            ),
        }
    }

    pub fn n(&self) -> usize {
        match self {
            IfsConfig::Strichartz { n, .. } | IfsConfig::Custom { n, .. } => *n,
        }
    }
}
