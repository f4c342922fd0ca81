//! Numerical experiments on discrete measures: Ahlfors-David ratios, cone
//! deficiency, growth of annular Riesz transforms, the horizontal estimate
//! `y_{2n+1} ≥ δ²‖x‖²/2` on small balls, tangent blow-ups and discrepancy
//! against Haar measure.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::{self, Execution};
use crate::heis::{raw, HPoint, Tolerances};
use crate::measure::{DiscreteMeasure, Weights};
use crate::riesz::{annulus_profile, RieszParams};
use crate::subgroups::{
    cone_contains_displacement, dist_to_subgroup, haar_sample, haar_unit_ball_mass, HaarGrid, SubgroupKind,
    SubgroupSpec,
};

/// Where ball statistics are centred.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum Centers {
    /// `count` atoms of the measure drawn uniformly by index.
    Atoms {
        count: usize,
        seed: u64,
    },
    Points {
        points: Vec<HPoint>,
    },
}

impl Centers {
    pub fn resolve(&self, mu: &DiscreteMeasure) -> Result<Vec<HPoint>> {
        match self {
            Centers::Atoms { count, seed } => {
                if mu.is_empty() {
                    return Err(Error::Empty("measure"));
                }
                let mut rng = ChaCha8Rng::seed_from_u64(*seed);
                Ok((0..*count).map(|_| mu.atom(rng.gen_range(0..mu.len()))).collect())
            }
            Centers::Points { points } => {
                if let Some(p) = points.iter().find(|p| p.n() != mu.n()) {
                    return Err(Error::DimensionMismatch {
                        left: mu.n(),
                        right: p.n(),
                    });
                }
                Ok(points.clone())
            }
        }
    }
}

fn check_radii(mu: &DiscreteMeasure, radii: &[f64]) -> Result<()> {
    if radii.is_empty() {
        return Err(Error::Empty("radius list"));
    }
    for &r in radii {
        if !(r.is_finite() && r > 0.0) {
            return Err(Error::param("radius", r, "must be positive"));
        }
        mu.check_radius(r)?;
    }
    Ok(())
}

/// Largest two-sided constant tolerated before a report is flagged.
pub const AD_C_MAX: f64 = 50.0;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdReport {
    pub a: f64,
    pub radii: Vec<f64>,
    pub centers: Vec<Vec<f64>>,
    /// `table[i][j] = μ(B(centers[i], radii[j])) / radii[j]^a`.
    pub table: Vec<Vec<f64>>,
    pub min_ratio: f64,
    pub max_ratio: f64,
    /// `max(max_ratio, 1/min_ratio)`.
    pub implied_c: f64,
    /// `implied_c ≤ AD_C_MAX`.
    pub regular: bool,
}

pub fn ad_regularity_report(
    mu: &DiscreteMeasure,
    a: f64,
    centers: &Centers,
    radii: &[f64],
    exec: Execution,
) -> Result<AdReport> {
    if !(a.is_finite() && a >= 0.0) {
        return Err(Error::param("a", a, "must be a nonnegative dimension"));
    }
    check_radii(mu, radii)?;
    let pts = centers.resolve(mu)?;
    if pts.is_empty() {
        return Err(Error::Empty("center list"));
    }
    let mut table = Vec::with_capacity(pts.len());
    for c in &pts {
        let masses = mu.ball_masses(c, radii, exec)?;
        table.push(
            masses
                .iter()
                .zip(radii)
                .map(|(m, r)| m / r.powf(a))
                .collect::<Vec<f64>>(),
        );
    }
    let flat = table.iter().flatten();
    let min_ratio = flat.clone().copied().fold(f64::INFINITY, f64::min);
    let max_ratio = flat.copied().fold(0.0, f64::max);
    let implied_c = max_ratio.max(1.0 / min_ratio);
    Ok(AdReport {
        a,
        radii: radii.to_vec(),
        centers: pts.iter().map(|p| p.coords().to_vec()).collect(),
        table,
        min_ratio,
        max_ratio,
        implied_c,
        regular: implied_c <= AD_C_MAX,
    })
}

/// `μ(B(k, r) ∖ X(k, G, δ)) / rᵃ` for each radius.
#[allow(clippy::too_many_arguments)]
pub fn cone_deficiency(
    mu: &DiscreteMeasure,
    a: f64,
    k: &HPoint,
    g: &SubgroupSpec,
    delta: f64,
    radii: &[f64],
    tol: &Tolerances,
    exec: Execution,
) -> Result<Vec<f64>> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::param("delta", delta, "cone aperture must lie in (0,1)"));
    }
    check_radii(mu, radii)?;
    for other in [k.n(), g.n()] {
        if other != mu.n() {
            return Err(Error::DimensionMismatch {
                left: mu.n(),
                right: other,
            });
        }
    }
    let n = mu.n();
    let mut sorted: Vec<f64> = radii.to_vec();
    sorted.sort_by(f64::total_cmp);
    let rmax = *sorted.last().unwrap();
    let kc = k.coords();
    let (masses, nearest) = exec::chunked_reduce(
        mu.len(),
        exec,
        (vec![0.0; sorted.len()], f64::INFINITY),
        |range| {
            let mut out = vec![0.0; sorted.len()];
            let mut nearest = f64::INFINITY;
            let mut x = vec![0.0; 2 * n + 1];
            for i in range {
                raw::inv_mul_into(n, kc, mu.point(i), &mut x);
                let d = raw::norm(n, &x);
                nearest = nearest.min(d);
                if d > rmax || d == 0.0 {
                    continue;
                }
                let disp = HPoint::from_raw(n, &x);
                // tolerance errors are impossible here: the subgroup was validated
                if cone_contains_displacement(&disp, g, delta, tol).unwrap_or(true) {
                    continue;
                }
                let first = sorted.partition_point(|&r| r < d);
                out[first] += mu.weight(i);
            }
            (out, nearest)
        },
        |(a, na), (b, nb)| (exec::add_vecs(a, b), na.min(nb)),
    );
    let floor = mu.resolution_floor();
    if nearest > floor.max(tol.eq_tol) {
        return Err(Error::Invalid(format!(
            "cone vertex is {nearest:e} from the nearest atom, beyond the resolution floor {floor:e}"
        )));
    }
    // masses[j] holds atoms with sorted[j−1] < d ≤ sorted[j]
    let mut cumulative = Vec::with_capacity(sorted.len());
    let mut acc = 0.0;
    for m in &masses {
        acc += m;
        cumulative.push(acc);
    }
    Ok(radii
        .iter()
        .map(|r| {
            let j = sorted.partition_point(|s| s < r);
            cumulative[j] / r.powf(a)
        })
        .collect())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    Diverging,
    Bounded,
    Inconclusive,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GrowthOptions {
    /// Minimal per-level increase of the magnitude over the last half of
    /// the schedule for a "diverging" verdict.
    pub threshold: f64,
    /// `|slope|` below which a profile counts as "bounded".
    pub bounded_slope: f64,
    /// Outer radius of the annuli.
    pub outer: f64,
}

impl Default for GrowthOptions {
    fn default() -> Self {
        GrowthOptions {
            threshold: 0.05,
            bounded_slope: 0.01,
            outer: 1.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GrowthReport {
    pub point: Vec<f64>,
    pub eps: Vec<f64>,
    /// Annulus transform `∫_{ε<d≤outer} R_s` per level.
    pub values: Vec<Vec<f64>>,
    /// Max-coordinate magnitude per level.
    pub magnitudes: Vec<f64>,
    /// Least-squares slope of `|value_i|` against the level index.
    pub coordinate_slopes: Vec<f64>,
    /// Least-squares slope of the magnitudes.
    pub slope: f64,
    /// Strict increase over the last half of the schedule.
    pub monotone_tail: bool,
    pub verdict: Verdict,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DivergenceReport {
    pub s: f64,
    pub eps: Vec<f64>,
    pub dropped_eps: Vec<f64>,
    pub warnings: Vec<String>,
    pub options: GrowthOptions,
    pub points: Vec<GrowthReport>,
    pub diverging: usize,
    pub bounded: usize,
}

/// Least-squares slope of `ys` against `0, 1, 2, …`.
pub fn fitted_slope(ys: &[f64]) -> f64 {
    let n = ys.len() as f64;
    if ys.len() < 2 {
        return 0.0;
    }
    let xm = (n - 1.0) / 2.0;
    let ym = ys.iter().sum::<f64>() / n;
    let (mut num, mut den) = (0.0, 0.0);
    for (i, y) in ys.iter().enumerate() {
        let dx = i as f64 - xm;
        num += dx * (y - ym);
        den += dx * dx;
    }
    num / den
}

/// Splits a descending geometric schedule at the resolution floor.
fn schedule(mu: &DiscreteMeasure, eps: &[f64], outer: f64) -> Result<(Vec<f64>, Vec<f64>, Vec<String>)> {
    if eps.is_empty() {
        return Err(Error::Empty("epsilon schedule"));
    }
    if eps.iter().any(|&e| !(e > 0.0 && e < outer)) || eps.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::Invalid(format!(
            "epsilon schedule must be strictly decreasing inside (0, {outer})"
        )));
    }
    if eps.len() > 2 {
        let q = eps[1] / eps[0];
        if eps.windows(2).any(|w| ((w[1] / w[0]) / q - 1.0).abs() > 1e-9) {
            return Err(Error::Invalid("epsilon schedule must be geometric".into()));
        }
    }
    let (kept, dropped): (Vec<f64>, Vec<f64>) = eps.iter().partition(|&&e| mu.check_radius(e).is_ok());
    let mut warnings = Vec::new();
    if !dropped.is_empty() {
        warnings.push(format!(
            "dropped {} epsilon value(s) below the resolution floor {:e}",
            dropped.len(),
            mu.resolution_floor()
        ));
    }
    if kept.is_empty() {
        return Err(Error::BelowResolution {
            radius: eps[0],
            floor: mu.resolution_floor(),
        });
    }
    Ok((kept, dropped, warnings))
}

fn growth_report(point: &HPoint, eps: &[f64], values: Vec<Vec<f64>>, opts: &GrowthOptions) -> GrowthReport {
    let magnitudes: Vec<f64> = values
        .iter()
        .map(|v| v.iter().fold(0.0f64, |m, x| m.max(x.abs())))
        .collect();
    let dim = values.first().map_or(0, Vec::len);
    let coordinate_slopes = (0..dim)
        .map(|i| fitted_slope(&values.iter().map(|v| v[i].abs()).collect::<Vec<_>>()))
        .collect();
    let slope = fitted_slope(&magnitudes);
    let tail = &magnitudes[magnitudes.len() / 2..];
    let monotone_tail = tail.len() >= 2 && tail.windows(2).all(|w| w[1] > w[0]);
    let steep = tail.len() >= 2 && tail.windows(2).all(|w| w[1] - w[0] >= opts.threshold);
    let verdict = if steep {
        Verdict::Diverging
    } else if slope.abs() < opts.bounded_slope {
        Verdict::Bounded
    } else {
        Verdict::Inconclusive
    };
    GrowthReport {
        point: point.coords().to_vec(),
        eps: eps.to_vec(),
        values,
        magnitudes,
        coordinate_slopes,
        slope,
        monotone_tail,
        verdict,
    }
}

/// Growth of `ε ↦ ∫_{ε<d(p,q)≤outer} R_s(p⁻¹q) dμq` along a geometric
/// schedule, one report per point.
pub fn divergence_probe(
    mu: &DiscreteMeasure,
    params: &RieszParams,
    points: &[HPoint],
    eps_schedule: &[f64],
    opts: &GrowthOptions,
    exec: Execution,
) -> Result<DivergenceReport> {
    if points.is_empty() {
        return Err(Error::Empty("point list"));
    }
    let (eps, dropped, warnings) = schedule(mu, eps_schedule, opts.outer)?;
    let mut reports = Vec::with_capacity(points.len());
    for p in points {
        let prof = annulus_profile(mu, params, p, &eps, opts.outer, exec)?;
        reports.push(growth_report(p, &eps, prof.into_iter().map(|(_, v)| v).collect(), opts));
    }
    Ok(DivergenceReport {
        s: params.s(),
        diverging: reports.iter().filter(|r| r.verdict == Verdict::Diverging).count(),
        bounded: reports.iter().filter(|r| r.verdict == Verdict::Bounded).count(),
        eps,
        dropped_eps: dropped,
        warnings,
        options: *opts,
        points: reports,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProbeOptions {
    pub grid: HaarGrid,
    /// Number of points; the first is the identity, the rest are atoms `p`
    /// with `B(p, outer)` inside the window.
    pub point_count: usize,
    pub seed: u64,
    pub growth: GrowthOptions,
}

impl ProbeOptions {
    pub fn new(grid: HaarGrid) -> Self {
        ProbeOptions {
            grid,
            point_count: 8,
            seed: 0,
            growth: GrowthOptions::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SubgroupProbeReport {
    pub kind: SubgroupKind,
    pub hausdorff_dimension: usize,
    pub atoms: usize,
    pub spacing: Option<f64>,
    pub growth: DivergenceReport,
    /// Max over points of the magnitude at each level.
    pub per_eps_max: Vec<f64>,
    pub max_magnitude: f64,
    pub slope: f64,
    pub verdict: Verdict,
}

/// Annulus transforms of `1` on a Haar sample of `V`; expected to stay
/// bounded as `ε → 0` when `s` is the dimension of `V`.
pub fn subgroup_boundedness_probe(
    v: &SubgroupSpec,
    s: f64,
    eps_grid: &[f64],
    opts: &ProbeOptions,
    exec: Execution,
) -> Result<SubgroupProbeReport> {
    let dim = v.hausdorff_dimension();
    if s != dim as f64 {
        return Err(Error::Invalid(format!(
            "s = {s} differs from the Hausdorff dimension {dim} of the subgroup"
        )));
    }
    let params = RieszParams::new(v.n(), s)?;
    let mu = haar_sample(v, &opts.grid)?;
    let inner = opts.grid.window - opts.growth.outer;
    if inner < 0.0 {
        return Err(Error::param(
            "window",
            opts.grid.window,
            "must be at least the outer annulus radius",
        ));
    }
    let candidates: Vec<usize> = (0..mu.len())
        .filter(|&i| raw::norm(v.n(), mu.point(i)) <= inner)
        .collect();
    let mut points = vec![HPoint::identity(v.n())];
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    while points.len() < opts.point_count && !candidates.is_empty() {
        points.push(mu.atom(candidates[rng.gen_range(0..candidates.len())]));
    }
    let growth = divergence_probe(&mu, &params, &points, eps_grid, &opts.growth, exec)?;
    let levels = growth.eps.len();
    let per_eps_max: Vec<f64> = (0..levels)
        .map(|j| growth.points.iter().map(|r| r.magnitudes[j]).fold(0.0, f64::max))
        .collect();
    let max_magnitude = per_eps_max.iter().copied().fold(0.0, f64::max);
    let slope = fitted_slope(&per_eps_max);
    let verdict = if growth.diverging > 0 {
        Verdict::Diverging
    } else if slope.abs() < opts.growth.bounded_slope {
        Verdict::Bounded
    } else {
        Verdict::Inconclusive
    };
    Ok(SubgroupProbeReport {
        kind: v.kind(),
        hausdorff_dimension: dim,
        atoms: mu.len(),
        spacing: mu.spacing(),
        growth,
        per_eps_max,
        max_magnitude,
        slope,
        verdict,
    })
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct HorestReport {
    pub n: usize,
    pub delta: f64,
    pub trials: usize,
    /// Trials whose `x` met the hypothesis `x_{2n+1} > 0`, `√x_{2n+1} > δ‖x‖`.
    pub tested: usize,
    pub skipped: usize,
    /// Failures of `y_{2n+1} ≥ δ²‖x‖²/2`.
    pub violations: usize,
    /// Failures of the linear bound `y_{2n+1} ≥ δ²‖x‖/2`.
    pub linear_violations: usize,
    /// Smallest `y_{2n+1} / (δ²‖x‖²/2)` seen.
    pub min_ratio: f64,
    pub seed: u64,
}

impl HorestReport {
    pub fn passed(&self) -> bool {
        self.violations == 0 && self.tested > 0
    }

    fn merge(mut self, o: HorestReport) -> Self {
        self.n = self.n.max(o.n);
        self.delta = if self.delta != 0.0 { self.delta } else { o.delta };
        self.trials += o.trials;
        self.tested += o.tested;
        self.skipped += o.skipped;
        self.violations += o.violations;
        self.linear_violations += o.linear_violations;
        self.min_ratio = self.min_ratio.min(o.min_ratio);
        self
    }
}

/// A uniform point of the Korányi ball `B(x, ρ)`, as `x·δ_ρ(u)` with `u`
/// uniform in `B(0, 1)`.
pub fn sample_in_ball(n: usize, x: &[f64], rho: f64, rng: &mut impl Rng) -> Vec<f64> {
    let dim = 2 * n + 1;
    let mut u = vec![0.0; dim];
    loop {
        u.iter_mut().for_each(|c| *c = rng.gen_range(-1.0..=1.0));
        if raw::norm(n, &u) <= 1.0 {
            break;
        }
    }
    raw::dilate_in_place(n, rho, &mut u);
    let mut y = vec![0.0; dim];
    raw::mul_into(n, x, &u, &mut y);
    y
}

fn horest_trial(n: usize, delta: f64, x: &[f64], rng: &mut impl Rng, acc: &mut HorestReport) {
    acc.trials += 1;
    let t = x[2 * n];
    let norm = raw::norm(n, x);
    if !(t > 0.0 && t.sqrt() > delta * norm) {
        acc.skipped += 1;
        return;
    }
    acc.tested += 1;
    let rho = delta * delta * norm / (100.0 * n as f64);
    let y = sample_in_ball(n, x, rho, rng);
    let bound = delta * delta * norm * norm / 2.0;
    acc.min_ratio = acc.min_ratio.min(y[2 * n] / bound);
    if y[2 * n] < bound {
        acc.violations += 1;
    }
    if y[2 * n] < delta * delta * norm / 2.0 {
        acc.linear_violations += 1;
    }
}

/// Random `x` paired with one uniform `y ∈ B(x, δ²‖x‖/(100n))` each.
/// Horizontal coordinates are Gaussian. Three draws in four put the
/// vertical coordinate at `e^u` times the hypothesis boundary
/// `κ|x′|²`, `κ = δ²/√(1−δ⁴)`, with `u ∈ [−¼, 3)`; the rest keep a Gaussian
/// one. A log-uniform dilation in `[e⁻³, e³]` follows.
/// Chunk `c` draws from stream `c` of the seeded generator, so results do
/// not depend on the execution mode.
pub fn horest_check(n: usize, delta: f64, trials: usize, seed: u64, exec: Execution) -> Result<HorestReport> {
    if n == 0 {
        return Err(Error::Invalid("group index n must be positive".into()));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::param("delta", delta, "must lie in (0,1)"));
    }
    let empty = HorestReport {
        n,
        delta,
        min_ratio: f64::INFINITY,
        seed,
        ..Default::default()
    };
    let dim = 2 * n + 1;
    let kappa = delta * delta / (1.0 - delta.powi(4)).sqrt();
    Ok(exec::chunked_reduce(
        trials,
        exec,
        empty.clone(),
        |range| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream((range.start / exec::CHUNK) as u64);
            let mut acc = empty.clone();
            let mut x = vec![0.0; dim];
            for _ in range {
                x.iter_mut().for_each(|c| *c = rng.sample(StandardNormal));
                if rng.gen_bool(0.75) {
                    // t = κ·|x'|²·e^u with u > 0 exactly meets the hypothesis
                    let h = raw::horizontal_sq(n, &x);
                    x[2 * n] = kappa * h * rng.gen_range(-0.25f64..3.0).exp();
                }
                let lambda = rng.gen_range(-3.0f64..3.0).exp();
                raw::dilate_in_place(n, lambda, &mut x);
                horest_trial(n, delta, &x, &mut rng, &mut acc);
            }
            acc
        },
        HorestReport::merge,
    ))
}

/// [`horest_check`] at a fixed `x`, with `samples` ball points.
pub fn horest_check_at(x: &HPoint, delta: f64, samples: usize, seed: u64) -> Result<HorestReport> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::param("delta", delta, "must lie in (0,1)"));
    }
    let n = x.n();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut acc = HorestReport {
        n,
        delta,
        min_ratio: f64::INFINITY,
        seed,
        ..Default::default()
    };
    for _ in 0..samples {
        horest_trial(n, delta, x.coords(), &mut rng, &mut acc);
    }
    Ok(acc)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum Normalization {
    /// Multiply weights by `r^{−s}`.
    Power { s: f64 },
    /// Divide weights by `μ(B(a, r))`.
    BallMass,
}

/// The push-forward `c · T_{a,r♯} μ` with `T_{a,r}(q) = δ_{1/r}(a⁻¹·q)`.
pub fn blowup_measure(
    mu: &DiscreteMeasure,
    a: &HPoint,
    r: f64,
    normalization: Normalization,
    exec: Execution,
) -> Result<DiscreteMeasure> {
    if !(r.is_finite() && r > 0.0) {
        return Err(Error::param("r", r, "blow-up scale must be positive"));
    }
    if a.n() != mu.n() {
        return Err(Error::DimensionMismatch {
            left: mu.n(),
            right: a.n(),
        });
    }
    let c = match normalization {
        Normalization::Power { s } => r.powf(-s),
        Normalization::BallMass => {
            let m = mu.mass_in_ball(a, r, exec)?;
            if m <= 0.0 {
                return Err(Error::Invalid(format!("μ(B(a, {r})) = 0: cannot normalize")));
            }
            1.0 / m
        }
    };
    let n = mu.n();
    let dim = 2 * n + 1;
    let mut coords = vec![0.0; mu.len() * dim];
    let ac = a.coords();
    let parts = mu.len().div_ceil(exec::CHUNK).max(1);
    let per = mu.len().div_ceil(parts);
    exec::fill_parts(&mut coords, parts, exec, |part, out| {
        for (k, dst) in out.chunks_exact_mut(dim).enumerate() {
            raw::inv_mul_into(n, ac, mu.point(part * per + k), dst);
            raw::dilate_in_place(n, 1.0 / r, dst);
        }
    });
    let weights = match mu.weights() {
        Weights::Uniform(w) => Weights::Uniform(w * c),
        Weights::PerAtom(ws) => Weights::PerAtom(ws.iter().map(|w| w * c).collect()),
    };
    let label = format!("blowup[a={:?}, r={r:e}, {normalization:?}]({})", a.coords(), mu.label());
    Ok(DiscreteMeasure::from_flat(n, coords, weights, label)?.with_spacing(mu.spacing().map(|h| h / r)))
}

/// `max |ν(B) − λ_V(B)| / λ_V(B)` over test balls centred on `V`, where
/// `λ_V(B(c, ρ)) = λ_V(B(0,1)) · ρ^{dim V}`.
pub fn discrepancy_to_haar(
    nu: &DiscreteMeasure,
    v: &SubgroupSpec,
    test_balls: &[(HPoint, f64)],
    tol: &Tolerances,
    exec: Execution,
) -> Result<f64> {
    if test_balls.is_empty() {
        return Err(Error::Empty("test ball family"));
    }
    let unit = haar_unit_ball_mass(v);
    let dim = v.hausdorff_dimension() as f64;
    let mut worst = 0.0f64;
    for (c, rho) in test_balls {
        let off = dist_to_subgroup(c, v, tol)?;
        if off > tol.opt_tol.max(tol.eq_tol * raw::norm(c.n(), c.coords())) {
            return Err(Error::Invalid(format!(
                "test ball centre lies {off:e} away from the subgroup"
            )));
        }
        nu.check_radius(*rho)?;
        let haar = unit * rho.powf(dim);
        let m = nu.mass_in_ball(c, *rho, exec)?;
        worst = worst.max((m - haar).abs() / haar);
    }
    Ok(worst)
}

/// Builds a Haar sample once and reports its self-discrepancy.
pub fn haar_self_discrepancy(
    v: &SubgroupSpec,
    grid: &HaarGrid,
    test_balls: &[(HPoint, f64)],
    tol: &Tolerances,
    exec: Execution,
) -> Result<f64> {
    let nu = haar_sample(v, grid)?;
    discrepancy_to_haar(&nu, v, test_balls, tol, exec)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fractal::{cylinder_measure, make_strichartz_ifs, word_similarity, Word};
    use crate::heis::{blowup_map, group_inv, group_mul};
    use crate::subgroups::{make_horizontal, make_vertical};

    const SEQ: Execution = Execution::Sequential;

    fn pt(c: &[f64]) -> HPoint {
        HPoint::from_slice((c.len() - 1) / 2, c).unwrap()
    }

    fn interval(cells: usize) -> DiscreteMeasure {
        let h = 2.0 / cells as f64;
        let coords = (0..cells).flat_map(|i| [(i as f64 + 0.5) * h, 0.0, 0.0]).collect();
        DiscreteMeasure::uniform(1, coords, 0.5 * h, "interval")
            .unwrap()
            .with_spacing(Some(h))
    }

    #[test]
    fn ad_interval_oracle() {
        let mu = interval(4000);
        let h = 2.0 / 4000.0;
        let radii = [4.0 * h, 0.01, 0.1, 0.5];
        let rep = ad_regularity_report(&mu, 1.0, &Centers::Atoms { count: 50, seed: 2 }, &radii, SEQ).unwrap();
        assert!(rep.min_ratio >= 0.5 - 1e-9 && rep.max_ratio <= 1.5, "{rep:?}");
        assert!(rep.regular);
        assert!(matches!(
            ad_regularity_report(&mu, 1.0, &Centers::Atoms { count: 1, seed: 0 }, &[h], SEQ),
            Err(Error::BelowResolution { .. })
        ));
    }

    #[test]
    fn ad_single_atom_flagged() {
        let mu = DiscreteMeasure::from_atoms(1, [(HPoint::identity(1), 1.0)], "atom").unwrap();
        let centers = Centers::Points {
            points: vec![HPoint::identity(1)],
        };
        let rep = ad_regularity_report(&mu, 2.0, &centers, &[1.0, 0.1, 0.01], SEQ).unwrap();
        assert!(!rep.regular);
        assert!(rep.implied_c >= 1e4);
    }

    #[test]
    fn ad_strichartz_finite() {
        let ifs = make_strichartz_ifs(1, 0.25).unwrap();
        let mu = cylinder_measure(&ifs, 4, &ifs.base_point(), SEQ).unwrap();
        let radii = [0.25, 1.0 / 16.0, 1.0 / 64.0];
        let rep = ad_regularity_report(&mu, 2.0, &Centers::Atoms { count: 16, seed: 1 }, &radii, SEQ).unwrap();
        assert!(rep.implied_c.is_finite() && rep.implied_c <= AD_C_MAX);
    }

    #[test]
    fn cone_deficiency_properties() {
        let tol = Tolerances::default();
        // measure on the x1 axis, G = that axis: everything is inside the cone
        let mu = interval(2000);
        let g = make_horizontal(1, &[vec![1.0, 0.0]], &tol).unwrap();
        let k = mu.atom(1000);
        let radii = [0.5, 0.1, 0.01];
        let r = cone_deficiency(&mu, 1.0, &k, &g, 0.9, &radii, &tol, SEQ).unwrap();
        assert!(r.iter().all(|&x| x == 0.0));

        let ifs = make_strichartz_ifs(1, 0.25).unwrap();
        let mu = cylinder_measure(&ifs, 4, &ifs.base_point(), SEQ).unwrap();
        let t = make_vertical(1, &[]).unwrap();
        let k = mu.atom(12345);
        let radii = [0.25, 1.0 / 16.0, 1.0 / 64.0];
        let mut prev = cone_deficiency(&mu, 2.0, &k, &t, 0.5, &radii, &tol, SEQ).unwrap();
        assert!(prev.iter().all(|&x| x > 0.0), "{prev:?}");
        for delta in [0.25, 0.125, 0.0625] {
            let next = cone_deficiency(&mu, 2.0, &k, &t, delta, &radii, &tol, SEQ).unwrap();
            for (a, b) in prev.iter().zip(&next) {
                assert!(b >= a);
            }
            prev = next;
        }
        // a vertex off the support is rejected
        assert!(cone_deficiency(&mu, 2.0, &pt(&[5.0, 5.0, 5.0]), &t, 0.5, &radii, &tol, SEQ).is_err());
        assert!(cone_deficiency(&mu, 2.0, &k, &t, 1.0, &radii, &tol, SEQ).is_err());
        let par = cone_deficiency(&mu, 2.0, &k, &t, 0.5, &radii, &tol, Execution::Parallel).unwrap();
        let seq = cone_deficiency(&mu, 2.0, &k, &t, 0.5, &radii, &tol, SEQ).unwrap();
        assert_eq!(par, seq);
    }

    #[test]
    fn cone_deficiency_brute_force() {
        let tol = Tolerances::default();
        let ifs = make_strichartz_ifs(1, 0.25).unwrap();
        let mu = cylinder_measure(&ifs, 3, &ifs.base_point(), SEQ).unwrap();
        let g = make_vertical(1, &[vec![0.6, 0.8]]).unwrap();
        let k = mu.atom(100);
        let radii = [0.5, 0.25];
        let got = cone_deficiency(&mu, 2.0, &k, &g, 0.3, &radii, &tol, SEQ).unwrap();
        for (j, r) in radii.iter().enumerate() {
            let mut m = 0.0;
            for i in 0..mu.len() {
                let q = mu.atom(i);
                let d = crate::heis::dist(&k, &q).unwrap();
                if d <= *r && !crate::subgroups::in_cone(&k, &q, &g, 0.3, &tol).unwrap() {
                    m += mu.weight(i);
                }
            }
            assert!((got[j] - m / r / r).abs() < 1e-12);
        }
    }

    #[test]
    fn slope_fit() {
        assert!((fitted_slope(&[1.0, 3.0, 5.0, 7.0]) - 2.0).abs() < 1e-15);
        assert_eq!(fitted_slope(&[4.0]), 0.0);
        assert!(fitted_slope(&[2.0, 2.0, 2.0]).abs() < 1e-15);
    }

    #[test]
    fn symmetric_pair_measure_has_zero_profile() {
        let p = pt(&[0.2, -0.1, 0.3]);
        let mut atoms = Vec::new();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..20 {
            let x = HPoint::new(1, (0..3).map(|_| rng.gen_range(-0.6..0.6))).unwrap();
            atoms.push((group_mul(&p, &x).unwrap(), 1.0));
            atoms.push((group_mul(&p, &group_inv(&x)).unwrap(), 1.0));
        }
        let mu = DiscreteMeasure::from_atoms(1, atoms, "pairs").unwrap();
        let params = RieszParams::new(1, 2.0).unwrap();
        let eps = [0.5, 0.25, 0.125, 0.0625];
        let rep = divergence_probe(&mu, &params, &[p], &eps, &GrowthOptions::default(), SEQ).unwrap();
        assert!(
            rep.points[0].magnitudes.iter().all(|m| *m < 1e-12),
            "{:?}",
            rep.points[0]
        );
        assert_eq!(rep.points[0].verdict, Verdict::Bounded);
    }

    #[test]
    fn schedule_validation() {
        let ifs = make_strichartz_ifs(1, 0.25).unwrap();
        let mu = cylinder_measure(&ifs, 3, &ifs.base_point(), SEQ).unwrap();
        let params = RieszParams::new(1, 2.0).unwrap();
        let o = [HPoint::identity(1)];
        let opts = GrowthOptions::default();
        let rep = divergence_probe(
            &mu,
            &params,
            &o,
            &[0.25, 1.0 / 16.0, 1.0 / 64.0, 1.0 / 256.0],
            &opts,
            SEQ,
        )
        .unwrap();
        assert_eq!(rep.eps.len(), 2);
        assert_eq!(rep.dropped_eps.len(), 2);
        assert_eq!(rep.warnings.len(), 1);
        assert!(divergence_probe(&mu, &params, &o, &[0.5, 0.25, 0.2], &opts, SEQ).is_err());
        assert!(divergence_probe(&mu, &params, &o, &[0.1, 0.2], &opts, SEQ).is_err());
        assert!(divergence_probe(&mu, &params, &o, &[1e-4], &opts, SEQ).is_err());
    }

    #[test]
    fn cantor_fixed_point_profile() {
        // annuli below the piece separation only see the piece containing p
        let ifs = make_strichartz_ifs(1, 0.25).unwrap();
        let base = ifs.base_point();
        let fine = cylinder_measure(&ifs, 5, &base, SEQ).unwrap();
        let coarse = cylinder_measure(&ifs, 4, &base, SEQ).unwrap();
        let params = RieszParams::new(1, 2.0).unwrap();
        let p = word_similarity(&ifs, &Word::new(vec![9])).unwrap().fixed_point();
        let a = crate::riesz::annulus_transform(&fine, &params, &p, 0.25f64.powi(3), 0.25f64.powi(2), SEQ).unwrap();
        let b = crate::riesz::annulus_transform(&coarse, &params, &p, 0.25f64.powi(2), 0.25, SEQ).unwrap();
        for i in 0..2 {
            assert!((a[i] - b[i]).abs() < 1e-9, "{a:?} {b:?}");
        }
        let eps: Vec<f64> = (1..=4).map(|j| 0.25f64.powi(j)).collect();
        let rep = divergence_probe(&fine, &params, &[p], &eps, &GrowthOptions::default(), SEQ).unwrap();
        assert_eq!(rep.points[0].verdict, Verdict::Diverging, "{:?}", rep.points[0]);
        assert!(rep.points[0].slope > 0.0);
    }

    #[test]
    fn t_axis_probe_is_bounded() {
        let t = make_vertical(1, &[]).unwrap();
        let eps: Vec<f64> = (1..=5).map(|j| 0.5f64.powi(j)).collect();
        let mut opts = ProbeOptions::new(HaarGrid::isotropic(2.0, 256));
        opts.point_count = 4;
        let rep = subgroup_boundedness_probe(&t, 2.0, &eps, &opts, SEQ).unwrap();
        assert_eq!(rep.growth.eps.len(), 5);
        assert!(rep.max_magnitude < 0.05, "{rep:?}");
        assert_eq!(rep.verdict, Verdict::Bounded);
        assert!(subgroup_boundedness_probe(&t, 3.0, &eps, &opts, SEQ).is_err());
        let fine = ProbeOptions {
            grid: HaarGrid::isotropic(2.0, 512),
            ..opts.clone()
        };
        let rep2 = subgroup_boundedness_probe(&t, 2.0, &eps, &fine, SEQ).unwrap();
        assert!(
            (rep2.max_magnitude - rep.max_magnitude).abs() <= 0.1 * rep.max_magnitude.max(rep2.max_magnitude) + 1e-9
        );
    }

    #[test]
    fn vertical_plane_probe_is_bounded() {
        let v = make_vertical(1, &[vec![1.0, 1.0]]).unwrap();
        let eps: Vec<f64> = (1..=4).map(|j| 0.5f64.powi(j)).collect();
        let mut opts = ProbeOptions::new(HaarGrid::isotropic(2.0, 64));
        opts.point_count = 3;
        let rep = subgroup_boundedness_probe(&v, 3.0, &eps, &opts, SEQ).unwrap();
        assert_eq!(rep.verdict, Verdict::Bounded, "{rep:?}");
    }

    #[test]
    fn horest_examples() {
        let x = pt(&[0.0, 0.0, 1.0]);
        let rep = horest_check_at(&x, 0.5, 100_000, 3).unwrap();
        assert_eq!(rep.tested, 100_000);
        assert!(rep.passed());
        assert!(rep.min_ratio >= 1.0 && rep.min_ratio.is_finite());
        let skip = horest_check_at(&pt(&[0.0, 0.0, -1.0]), 0.5, 10, 3).unwrap();
        assert_eq!(skip.skipped, 10);
        assert_eq!(skip.tested, 0);
        let tiny = horest_check_at(&x, 1e-6, 1000, 1).unwrap();
        assert!(tiny.passed());
        for n in [1, 2] {
            let rep = horest_check(n, 0.5, 50_000, 11, SEQ).unwrap();
            assert!(rep.passed(), "{rep:?}");
            assert_eq!(rep.tested + rep.skipped, rep.trials);
        }
        let a = horest_check(1, 0.9, 40_000, 4, SEQ).unwrap();
        let b = horest_check(1, 0.9, 40_000, 4, Execution::Parallel).unwrap();
        assert_eq!(a, b);
        assert!(horest_check(1, 1.0, 10, 0, SEQ).is_err());
    }

    #[test]
    fn ball_samples_stay_in_ball() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x = [0.3, -0.2, 0.7];
        for _ in 0..1000 {
            let y = sample_in_ball(1, &x, 0.1, &mut rng);
            assert!(raw::dist(1, &x, &y) <= 0.1 + 1e-15);
        }
    }

    #[test]
    fn blowup_examples() {
        let ifs = make_strichartz_ifs(1, 0.25).unwrap();
        let mu = cylinder_measure(&ifs, 2, &ifs.base_point(), SEQ).unwrap();
        let o = HPoint::identity(1);
        let same = blowup_measure(&mu, &o, 1.0, Normalization::Power { s: 2.0 }, SEQ).unwrap();
        assert_eq!(same.coords_flat(), mu.coords_flat());
        assert_eq!(same.total_mass(), mu.total_mass());
        let a = mu.atom(37);
        let b = blowup_measure(&mu, &a, 0.3, Normalization::BallMass, SEQ).unwrap();
        let m = b.mass_in_ball(&o, 1.0, SEQ).unwrap();
        assert!((m - 1.0).abs() < 1e-12);
        let direct = blowup_map(&a, 0.3, &mu.atom(5)).unwrap();
        assert!(b.atom(5).max_abs_diff(&direct) < 1e-14);
        let far = pt(&[50.0, 50.0, 0.0]);
        assert!(blowup_measure(&mu, &far, 0.1, Normalization::BallMass, SEQ).is_err());
        assert!(blowup_measure(&mu, &a, 0.0, Normalization::BallMass, SEQ).is_err());
    }

    #[test]
    fn blowup_composition() {
        let ifs = make_strichartz_ifs(1, 0.25).unwrap();
        let mu = cylinder_measure(&ifs, 2, &ifs.base_point(), SEQ).unwrap();
        let a = mu.atom(77);
        let o = HPoint::identity(1);
        let norm = Normalization::Power { s: 2.0 };
        let once = blowup_measure(&mu, &a, 0.2, norm, SEQ).unwrap();
        let twice = blowup_measure(&once, &o, 0.5, norm, SEQ).unwrap();
        let direct = blowup_measure(&mu, &a, 0.1, norm, SEQ).unwrap();
        for i in 0..mu.len() {
            assert!(twice.atom(i).max_abs_diff(&direct.atom(i)) < 1e-12);
        }
        assert!((twice.weight(0) - direct.weight(0)).abs() < 1e-12 * direct.weight(0));
    }

    #[test]
    fn blowup_self_similarity() {
        let ifs = make_strichartz_ifs(1, 0.25).unwrap();
        let base = ifs.base_point();
        let k = 4;
        let fine = cylinder_measure(&ifs, k, &base, SEQ).unwrap();
        for w in [vec![5], vec![3, 14]] {
            let j = w.len();
            let a = word_similarity(&ifs, &Word::new(w.clone())).unwrap().fixed_point();
            let zoom = blowup_measure(&fine, &a, 0.25f64.powi(j as i32), Normalization::Power { s: 2.0 }, SEQ).unwrap();
            let coarse = cylinder_measure(&ifs, k - j, &base, SEQ).unwrap();
            let shifted = blowup_measure(&coarse, &a, 1.0, Normalization::Power { s: 2.0 }, SEQ).unwrap();
            let offset = w.iter().fold(0, |acc, l| acc * 16 + l) * 16usize.pow((k - j) as u32);
            for i in 0..coarse.len() {
                assert!(zoom.atom(offset + i).max_abs_diff(&shifted.atom(i)) < 1e-10);
            }
            assert!((zoom.weight(offset) - coarse.weight(0)).abs() < 1e-15);
        }
    }

    #[test]
    fn haar_discrepancy() {
        let tol = Tolerances::default();
        let t = make_vertical(1, &[]).unwrap();
        let grid = HaarGrid::isotropic(2.0, 128);
        let nu = haar_sample(&t, &grid).unwrap();
        let balls: Vec<(HPoint, f64)> = [0.0, 0.3, -0.5]
            .iter()
            .flat_map(|&c| [(pt(&[0.0, 0.0, c]), 0.5), (pt(&[0.0, 0.0, c]), 1.0)])
            .collect();
        assert!(discrepancy_to_haar(&nu, &t, &balls, &tol, SEQ).unwrap() < 0.02);
        let doubled = nu.scaled(2.0).unwrap();
        assert!(discrepancy_to_haar(&doubled, &t, &balls, &tol, SEQ).unwrap() >= 1.0 - 0.02);
        assert!(discrepancy_to_haar(&nu, &t, &[], &tol, SEQ).is_err());
        assert!(discrepancy_to_haar(&nu, &t, &[(pt(&[1.0, 0.0, 0.0]), 0.5)], &tol, SEQ).is_err());

        let ifs = make_strichartz_ifs(1, 0.25).unwrap();
        let mu = cylinder_measure(&ifs, 4, &ifs.base_point(), SEQ).unwrap();
        let d = discrepancy_to_haar(
            &mu,
            &t,
            &[(HPoint::identity(1), 0.25), (HPoint::identity(1), 0.5)],
            &tol,
            SEQ,
        )
        .unwrap();
        assert!(d > 0.5, "{d}");
    }
}
