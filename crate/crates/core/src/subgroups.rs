//! Homogeneous subgroups of ℍⁿ, cones around them and their Haar measures.
//!
//! Every homogeneous subgroup is a linear subspace of ℝ²ⁿ⁺¹ of one of two
//! shapes: vertical, `V_L = L × 𝕋` for a subspace `L ⊂ ℝ²ⁿ`, or horizontal,
//! an isotropic subspace `G ⊂ ℝ²ⁿ × {0}` (`A(u,v) = 0` on `G`). The vertical
//! axis `𝕋 = V_{{0}}` gets its own kind.

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::heis::{raw, HPoint, Tolerances};
use crate::measure::DiscreteMeasure;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SubgroupKind {
    Vertical,
    Horizontal,
    TAxis,
}

/// A homogeneous subgroup given by an orthonormal basis of its horizontal
/// part (`L` for vertical subgroups, `G` itself for horizontal ones).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SubgroupSpec {
    n: usize,
    kind: SubgroupKind,
    basis: Vec<Vec<f64>>,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Gram–Schmidt with one re-orthogonalization pass.
fn orthonormalize(dim: usize, vectors: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
    let mut out: Vec<Vec<f64>> = Vec::with_capacity(vectors.len());
    for (index, v) in vectors.iter().enumerate() {
        if v.len() != dim {
            return Err(Error::CoordinateCount {
                expected: dim,
                got: v.len(),
            });
        }
        if v.iter().any(|c| !c.is_finite()) {
            return Err(Error::NonFinite("basis vector"));
        }
        let scale = dot(v, v).sqrt();
        let mut w = v.clone();
        for _ in 0..2 {
            for u in &out {
                let c = dot(&w, u);
                w.iter_mut().zip(u).for_each(|(x, y)| *x -= c * y);
            }
        }
        let norm = dot(&w, &w).sqrt();
        if scale == 0.0 || norm <= 1e-10 * scale {
            return Err(Error::DependentBasis { index });
        }
        w.iter_mut().for_each(|x| *x /= norm);
        out.push(w);
    }
    Ok(out)
}

/// Linear coefficients `a` with `A(u, v) = a · v` for horizontal vectors.
fn symplectic_dual(n: usize, u: &[f64]) -> Vec<f64> {
    let mut a = vec![0.0; 2 * n];
    for i in 0..n {
        a[i] = 2.0 * u[i + n];
        a[i + n] = -2.0 * u[i];
    }
    a
}

fn horizontal_a(n: usize, u: &[f64], v: &[f64]) -> f64 {
    dot(&symplectic_dual(n, u), v)
}

impl SubgroupSpec {
    /// `V_L` for `L = span(basis)`; an empty basis gives the vertical axis.
    pub fn vertical(n: usize, basis: &[Vec<f64>]) -> Result<Self> {
        check_n(n)?;
        let basis = orthonormalize(2 * n, basis)?;
        let kind = if basis.is_empty() {
            SubgroupKind::TAxis
        } else {
            SubgroupKind::Vertical
        };
        Ok(SubgroupSpec { n, kind, basis })
    }

    /// The horizontal subgroup spanned by `basis`, which must be isotropic.
    pub fn horizontal(n: usize, basis: &[Vec<f64>], tol: &Tolerances) -> Result<Self> {
        check_n(n)?;
        let ortho = orthonormalize(2 * n, basis)?;
        for i in 0..basis.len() {
            for j in i + 1..basis.len() {
                let value = horizontal_a(n, &basis[i], &basis[j]);
                let scale = dot(&basis[i], &basis[i]).sqrt() * dot(&basis[j], &basis[j]).sqrt();
                if value.abs() > tol.eq_tol * scale.max(1.0) {
                    return Err(Error::NonIsotropic { i, j, value });
                }
            }
        }
        Ok(SubgroupSpec {
            n,
            kind: SubgroupKind::Horizontal,
            basis: ortho,
        })
    }

    pub fn t_axis(n: usize) -> Self {
        SubgroupSpec {
            n,
            kind: SubgroupKind::TAxis,
            basis: Vec::new(),
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn kind(&self) -> SubgroupKind {
        self.kind
    }

    pub fn basis(&self) -> &[Vec<f64>] {
        &self.basis
    }

    pub fn contains_vertical_axis(&self) -> bool {
        self.kind != SubgroupKind::Horizontal
    }

    /// Dimension as a linear subspace of ℝ²ⁿ⁺¹.
    pub fn linear_dimension(&self) -> usize {
        self.basis.len() + usize::from(self.contains_vertical_axis())
    }

    /// Hausdorff dimension in the Korányi metric; the vertical direction
    /// counts twice.
    pub fn hausdorff_dimension(&self) -> usize {
        self.basis.len() + if self.contains_vertical_axis() { 2 } else { 0 }
    }

    /// Orthogonal projection of a horizontal vector onto the basis span.
    pub fn project(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; 2 * self.n];
        for u in &self.basis {
            let c = dot(x, u);
            out.iter_mut().zip(u).for_each(|(o, y)| *o += c * y);
        }
        out
    }

    fn projection_matrix(&self) -> DMatrix<f64> {
        let d = 2 * self.n;
        let mut p = DMatrix::zeros(d, d);
        for u in &self.basis {
            for i in 0..d {
                for j in 0..d {
                    p[(i, j)] += u[i] * u[j];
                }
            }
        }
        p
    }
}

fn check_n(n: usize) -> Result<()> {
    if n == 0 {
        return Err(Error::Invalid("group index n must be positive".into()));
    }
    Ok(())
}

pub fn make_vertical(n: usize, basis: &[Vec<f64>]) -> Result<SubgroupSpec> {
    SubgroupSpec::vertical(n, basis)
}

pub fn make_horizontal(n: usize, basis: &[Vec<f64>], tol: &Tolerances) -> Result<SubgroupSpec> {
    SubgroupSpec::horizontal(n, basis, tol)
}

fn check_same(p: &HPoint, v: &SubgroupSpec) -> Result<()> {
    if p.n() != v.n {
        return Err(Error::DimensionMismatch {
            left: p.n(),
            right: v.n,
        });
    }
    Ok(())
}

/// `inf_{v ∈ V} d(p, v)`.
///
/// For subgroups containing the vertical axis the vertical coordinate of `v`
/// can always absorb the vertical part of `p⁻¹·v`, which leaves the Euclidean
/// distance from `p'` to `L`. Horizontal subgroups need a minimization over
/// the basis coefficients.
pub fn dist_to_subgroup(p: &HPoint, v: &SubgroupSpec, tol: &Tolerances) -> Result<f64> {
    check_same(p, v)?;
    Ok(match v.kind {
        SubgroupKind::Vertical | SubgroupKind::TAxis => vertical_distance(v, p.horizontal()),
        SubgroupKind::Horizontal => horizontal_distance(v, p.coords(), tol)?,
    })
}

fn vertical_distance(v: &SubgroupSpec, x: &[f64]) -> f64 {
    let proj = v.project(x);
    x.iter().zip(&proj).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt()
}

const MAX_SWEEPS: usize = 10_000;

/// Minimizes the convex quartic `f(c) = |Σ cₖuₖ − p'|⁴ + (p₂ₙ₊₁ + Σ cₖ gₖ)²`,
/// `gₖ = A(p, uₖ)`, by exact coordinate descent from two starts.
fn horizontal_distance(v: &SubgroupSpec, p: &[f64], tol: &Tolerances) -> Result<f64> {
    let n = v.n;
    let ph = &p[..2 * n];
    let t = p[2 * n];
    let d = v.basis.len();
    if d == 0 {
        return Ok(raw::norm(n, p));
    }
    let b: Vec<f64> = v.basis.iter().map(|u| dot(u, ph)).collect();
    let g: Vec<f64> = v.basis.iter().map(|u| horizontal_a(n, ph, u)).collect();
    let p2 = dot(ph, ph);
    // |Σcu − p'|² = |c|² − 2c·b + |p'|² for orthonormal u
    let objective = |c: &[f64]| {
        let s = dot(c, c) - 2.0 * dot(c, &b) + p2;
        let a = t + dot(c, &g);
        s.max(0.0).powi(2) + a * a
    };
    let mut best = f64::INFINITY;
    let mut worst_step: f64 = 0.0;
    for start in [vec![0.0; d], b.clone()] {
        let mut c = start;
        let mut converged = false;
        for _ in 0..MAX_SWEEPS {
            let mut step: f64 = 0.0;
            for k in 0..d {
                let old = c[k];
                // S(x) = x² + 2βx + γ with the other coefficients frozen
                let others: f64 = dot(&c, &c) - old * old - 2.0 * (dot(&c, &b) - old * b[k]) + p2;
                let beta = -b[k];
                let alpha = t + dot(&c, &g) - old * g[k];
                let x = minimize_coordinate(beta, others, alpha, g[k], old);
                step = step.max((x - old).abs());
                c[k] = x;
            }
            if step <= tol.opt_tol * 1e-3 {
                converged = true;
                break;
            }
            worst_step = step;
        }
        if !converged {
            return Err(Error::NonConvergence {
                achieved: worst_step,
                target: tol.opt_tol,
            });
        }
        best = best.min(objective(&c));
    }
    Ok(best.max(0.0).sqrt().sqrt())
}

/// Root of the increasing cubic `f'(x) = 4S(x)(x+β) + 2g(α + gx)`.
fn minimize_coordinate(beta: f64, gamma: f64, alpha: f64, g: f64, guess: f64) -> f64 {
    let deriv = |x: f64| {
        let s = x * x + 2.0 * beta * x + gamma;
        4.0 * s * (x + beta) + 2.0 * g * (alpha + g * x)
    };
    let mut lo = guess - 1.0;
    let mut hi = guess + 1.0;
    while deriv(lo) > 0.0 {
        lo -= 2.0 * (hi - lo);
    }
    while deriv(hi) < 0.0 {
        hi += 2.0 * (hi - lo);
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if deriv(mid) > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    0.5 * (lo + hi)
}

fn check_delta(delta: f64) -> Result<()> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::param("delta", delta, "cone aperture must lie in (0,1)"));
    }
    Ok(())
}

/// Membership in the cone `X(p, V, δ) = {q : dist(p⁻¹·q, V) < δ d(q, p)}`.
/// `q = p` counts as inside.
pub fn in_cone(p: &HPoint, q: &HPoint, v: &SubgroupSpec, delta: f64, tol: &Tolerances) -> Result<bool> {
    check_delta(delta)?;
    check_same(p, v)?;
    check_same(q, v)?;
    let mut buf = vec![0.0; p.dim()];
    raw::inv_mul_into(p.n(), p.coords(), q.coords(), &mut buf);
    let x = HPoint::from_raw(p.n(), &buf);
    cone_contains_displacement(&x, v, delta, tol)
}

/// Cone test for an already-computed displacement `x = p⁻¹·q`.
pub(crate) fn cone_contains_displacement(x: &HPoint, v: &SubgroupSpec, delta: f64, tol: &Tolerances) -> Result<bool> {
    let norm = raw::norm(x.n(), x.coords());
    if norm == 0.0 {
        return Ok(true);
    }
    Ok(dist_to_subgroup(x, v, tol)? < delta * norm)
}

/// `ρ(V, W) = ‖P_V − P_W‖` on the horizontal parts.
pub fn subspace_distance(v: &SubgroupSpec, w: &SubgroupSpec) -> Result<f64> {
    if v.n != w.n {
        return Err(Error::DimensionMismatch { left: v.n, right: w.n });
    }
    let diff = v.projection_matrix() - w.projection_matrix();
    let eig = diff.symmetric_eigen();
    Ok(eig.eigenvalues.iter().fold(0.0f64, |m, l| m.max(l.abs())))
}

/// Grid for [`haar_sample`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HaarGrid {
    /// Radius of the Korányi ball `B(0, window)` the grid covers.
    pub window: f64,
    /// Cells per horizontal basis direction.
    pub resolution: usize,
    /// Cells along the vertical axis.
    pub vertical_resolution: usize,
    pub atom_cap: usize,
}

impl HaarGrid {
    /// The same number of cells on every axis.
    pub fn new(window: f64, resolution: usize) -> Self {
        HaarGrid {
            window,
            resolution,
            vertical_resolution: resolution,
            atom_cap: 50_000_000,
        }
    }

    /// Cells sized so that neighbouring atoms are `window / resolution`
    /// apart in the Korányi metric along every axis: `2·resolution` cells
    /// per horizontal direction and `2·resolution²` vertically.
    pub fn isotropic(window: f64, resolution: usize) -> Self {
        HaarGrid {
            window,
            resolution: 2 * resolution,
            vertical_resolution: 2 * resolution * resolution,
            atom_cap: 50_000_000,
        }
    }
}

/// Midpoint-rule discretization of the Lebesgue (Haar) measure on
/// `V ∩ B(0, window)`.
///
/// Each basis direction gets `resolution` cells on `[−W, W]` and the vertical
/// direction `vertical_resolution` cells on `[−W², W²]`; atoms sit at cell centres and
/// carry the Euclidean cell volume. The grid is symmetric under `p ↦ −p`.
pub fn haar_sample(v: &SubgroupSpec, grid: &HaarGrid) -> Result<DiscreteMeasure> {
    let HaarGrid {
        window,
        resolution,
        vertical_resolution,
        atom_cap,
    } = *grid;
    if !(window.is_finite() && window > 0.0) {
        return Err(Error::param("window", window, "must be positive"));
    }
    if resolution < 2 || vertical_resolution < 2 {
        return Err(Error::param(
            "resolution",
            resolution.min(vertical_resolution) as f64,
            "must be at least 2",
        ));
    }
    let n = v.n;
    let d = v.basis.len();
    let vertical = v.contains_vertical_axis();
    let axes = d + usize::from(vertical);
    let requested = (resolution as u128).pow(d as u32) * if vertical { vertical_resolution as u128 } else { 1 };
    let counts: Vec<usize> = (0..axes)
        .map(|a| if a < d { resolution } else { vertical_resolution })
        .collect();
    if requested > atom_cap as u128 {
        return Err(Error::AtomCap {
            requested,
            cap: atom_cap,
        });
    }
    let k = resolution;
    let h = 2.0 * window / k as f64;
    let ht = 2.0 * window * window / vertical_resolution as f64;
    let centre = |i: usize, half: f64, step: f64| -half + (i as f64 + 0.5) * step;
    let cell = h.powi(d as i32) * if vertical { ht } else { 1.0 };

    let dim = 2 * n + 1;
    let mut coords = Vec::new();
    let mut idx = vec![0usize; axes];
    let mut point = vec![0.0; dim];
    for _ in 0..requested {
        point.iter_mut().for_each(|c| *c = 0.0);
        for (a, u) in v.basis.iter().enumerate() {
            let c = centre(idx[a], window, h);
            point[..2 * n].iter_mut().zip(u).for_each(|(x, y)| *x += c * y);
        }
        if vertical {
            point[2 * n] = centre(idx[d], window * window, ht);
        }
        if raw::norm(n, &point) <= window {
            coords.extend_from_slice(&point);
        }
        for (slot, &limit) in idx.iter_mut().zip(&counts) {
            *slot += 1;
            if *slot < limit {
                break;
            }
            *slot = 0;
        }
    }
    let label = format!(
        "haar:{:?} dim={} window={window} cells={k}x{vertical_resolution}",
        v.kind,
        v.hausdorff_dimension()
    );
    let spacing = if vertical && d == 0 {
        ht.sqrt()
    } else if vertical {
        h.max(ht.sqrt())
    } else {
        h
    };
    if coords.is_empty() {
        // zero-dimensional subgroup: the counting measure at the identity
        coords = vec![0.0; dim];
    }
    Ok(DiscreteMeasure::uniform(n, coords, cell, label)?.with_spacing(Some(spacing)))
}

/// Haar mass of `V ∩ B(0, 1)` under the normalization of [`haar_sample`],
/// computed by adaptive Simpson quadrature of the radial profile.
pub fn haar_unit_ball_mass(v: &SubgroupSpec) -> f64 {
    let d = v.basis.len();
    let sphere = unit_sphere_area(d);
    if !v.contains_vertical_axis() {
        return if d == 0 { 1.0 } else { sphere / d as f64 };
    }
    if d == 0 {
        return 2.0;
    }
    // ∫₀¹ 2√(1−ρ⁴) |S^{d−1}| ρ^{d−1} dρ, substituting ρ = 1 − u² to tame the
    // square-root endpoint.
    let f = |u: f64| {
        let rho: f64 = 1.0 - u * u;
        let inner = (1.0 - rho.powi(4)).max(0.0).sqrt();
        2.0 * inner * sphere * rho.powi(d as i32 - 1) * 2.0 * u
    };
    adaptive_simpson(&f, 0.0, 1.0, 1e-13, 40)
}

fn unit_sphere_area(d: usize) -> f64 {
    // |S^{d−1}| = 2π^{d/2} / Γ(d/2)
    match d {
        0 => 0.0,
        1 => 2.0,
        2 => 2.0 * std::f64::consts::PI,
        _ => 2.0 * std::f64::consts::PI / (d as f64 - 2.0) * unit_sphere_area(d - 2),
    }
}

fn adaptive_simpson(f: &impl Fn(f64) -> f64, a: f64, b: f64, eps: f64, depth: u32) -> f64 {
    fn simpson(fa: f64, fm: f64, fb: f64, a: f64, b: f64) -> f64 {
        (b - a) / 6.0 * (fa + 4.0 * fm + fb)
    }
    #[allow(clippy::too_many_arguments)]
    fn rec(
        f: &impl Fn(f64) -> f64,
        a: f64,
        b: f64,
        fa: f64,
        fm: f64,
        fb: f64,
        whole: f64,
        eps: f64,
        depth: u32,
    ) -> f64 {
        let m = 0.5 * (a + b);
        let lm = 0.5 * (a + m);
        let rm = 0.5 * (m + b);
        let flm = f(lm);
        let frm = f(rm);
        let left = simpson(fa, flm, fm, a, m);
        let right = simpson(fm, frm, fb, m, b);
        if depth == 0 || (left + right - whole).abs() <= 15.0 * eps {
            return left + right + (left + right - whole) / 15.0;
        }
        rec(f, a, m, fa, flm, fm, left, eps / 2.0, depth - 1) + rec(f, m, b, fm, frm, fb, right, eps / 2.0, depth - 1)
    }
    let fa = f(a);
    let fb = f(b);
    let fm = f(0.5 * (a + b));
    rec(f, a, b, fa, fm, fb, simpson(fa, fm, fb, a, b), eps, depth)
}

fn random_unit(rng: &mut impl Rng, dim: usize) -> Vec<f64> {
    (0..dim).map(|_| rng.sample::<f64, _>(StandardNormal)).collect()
}

/// A vertical subgroup `V_L` with `L` drawn at random from `G(2n, dim_l)`.
pub fn random_vertical(n: usize, dim_l: usize, rng: &mut impl Rng) -> Result<SubgroupSpec> {
    if dim_l > 2 * n {
        return Err(Error::Invalid(format!("dim L = {dim_l} exceeds 2n = {}", 2 * n)));
    }
    loop {
        let vs: Vec<_> = (0..dim_l).map(|_| random_unit(rng, 2 * n)).collect();
        match SubgroupSpec::vertical(n, &vs) {
            Err(Error::DependentBasis { .. }) => continue,
            other => return other,
        }
    }
}

/// A random isotropic subspace of dimension `dim ≤ n`.
pub fn random_horizontal(n: usize, dim: usize, rng: &mut impl Rng) -> Result<SubgroupSpec> {
    if dim > n {
        return Err(Error::Invalid(format!(
            "isotropic subspaces of ℝ^{} have dimension at most {n}",
            2 * n
        )));
    }
    // keep every new vector orthogonal to the previous ones and to their
    // symplectic duals
    let mut basis: Vec<Vec<f64>> = Vec::new();
    while basis.len() < dim {
        let mut constraints: Vec<Vec<f64>> = basis.clone();
        constraints.extend(basis.iter().map(|u| symplectic_dual(n, u)));
        let cons = match orthonormalize_lenient(&constraints) {
            Some(c) => c,
            None => continue,
        };
        let mut w = random_unit(rng, 2 * n);
        for _ in 0..2 {
            for u in &cons {
                let c = dot(&w, u);
                w.iter_mut().zip(u).for_each(|(x, y)| *x -= c * y);
            }
        }
        let norm = dot(&w, &w).sqrt();
        if norm < 1e-8 {
            continue;
        }
        w.iter_mut().for_each(|x| *x /= norm);
        basis.push(w);
    }
    SubgroupSpec::horizontal(n, &basis, &Tolerances::new(1e-10, 1e-9)?)
}

fn orthonormalize_lenient(vs: &[Vec<f64>]) -> Option<Vec<Vec<f64>>> {
    let mut out: Vec<Vec<f64>> = Vec::new();
    for v in vs {
        let mut w = v.clone();
        for _ in 0..2 {
            for u in &out {
                let c = dot(&w, u);
                w.iter_mut().zip(u).for_each(|(x, y)| *x -= c * y);
            }
        }
        let norm = dot(&w, &w).sqrt();
        if norm > 1e-10 {
            w.iter_mut().for_each(|x| *x /= norm);
            out.push(w);
        } else if !w.iter().all(|x| x.is_finite()) {
            return None;
        }
    }
    Some(out)
}

/// Samples from `𝒱_{m−1} ∪ 𝒲_m`: vertical subgroups `V_L` with
/// `dim L = m − 2` and horizontal subgroups of dimension `m`, i.e. the
/// homogeneous subgroups of Hausdorff dimension `m`. Duplicates (up to
/// `ρ < 1e-12`) are dropped, so small families such as `{𝕋}` in ℍ¹ come back
/// with a single member.
pub fn sample_dimension_family(n: usize, m: usize, count: usize, rng: &mut impl Rng) -> Result<Vec<SubgroupSpec>> {
    let vertical_ok = m >= 2 && m - 2 <= 2 * n;
    let horizontal_ok = m <= n;
    if !vertical_ok && !horizontal_ok {
        return Err(Error::Invalid(format!(
            "ℍ^{n} has no homogeneous subgroup of Hausdorff dimension {m}"
        )));
    }
    let mut out: Vec<SubgroupSpec> = Vec::new();
    for i in 0..count {
        let use_vertical = vertical_ok && (!horizontal_ok || i % 2 == 0);
        let g = if use_vertical {
            random_vertical(n, m - 2, rng)?
        } else {
            random_horizontal(n, m, rng)?
        };
        let mut duplicate = false;
        for h in &out {
            if h.kind == g.kind && subspace_distance(h, &g)? < 1e-12 {
                duplicate = true;
                break;
            }
        }
        if !duplicate {
            out.push(g);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn tol() -> Tolerances {
        Tolerances::default()
    }

    fn pt(c: &[f64]) -> HPoint {
        HPoint::from_slice((c.len() - 1) / 2, c).unwrap()
    }

    #[test]
    fn vertical_construction() {
        let v = make_vertical(1, &[vec![1.0, 0.0]]).unwrap();
        assert_eq!(v.kind(), SubgroupKind::Vertical);
        assert_eq!(v.linear_dimension(), 2);
        assert_eq!(v.hausdorff_dimension(), 3);
        let t = make_vertical(1, &[]).unwrap();
        assert_eq!(t.kind(), SubgroupKind::TAxis);
        assert_eq!(t.hausdorff_dimension(), 2);
        assert!(matches!(
            make_vertical(1, &[vec![1.0, 1.0], vec![2.0, 2.0]]),
            Err(Error::DependentBasis { index: 1 })
        ));
    }

    #[test]
    fn returned_basis_is_orthonormal() {
        let v = make_vertical(
            2,
            &[
                vec![1.0, 2.0, 0.5, -1.0],
                vec![0.3, 1.0, 2.0, 0.0],
                vec![1.0, 0.0, 0.0, 1.0],
            ],
        )
        .unwrap();
        let b = v.basis();
        for i in 0..b.len() {
            for j in 0..b.len() {
                let expected = if i == j { 1.0 } else { 0.0 };
                assert!((dot(&b[i], &b[j]) - expected).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn horizontal_construction() {
        let g = make_horizontal(1, &[vec![1.0, 0.0]], &tol()).unwrap();
        assert_eq!(g.hausdorff_dimension(), 1);
        match make_horizontal(1, &[vec![1.0, 0.0], vec![0.0, 1.0]], &tol()) {
            Err(Error::NonIsotropic { i: 0, j: 1, value }) => assert_eq!(value, -2.0),
            other => panic!("expected NonIsotropic, got {other:?}"),
        }
        // A((1,0,0,0),(0,1,0,0)) = −2(1·0 − 0·1 + 0·0 − 0·0) = 0
        let g2 = make_horizontal(2, &[vec![1.0, 0.0, 0.0, 0.0], vec![0.0, 1.0, 0.0, 0.0]], &tol()).unwrap();
        assert_eq!(g2.hausdorff_dimension(), 2);
        assert!(make_horizontal(2, &[vec![1.0, 0.0, 0.0, 0.0], vec![0.0, 0.0, 1.0, 0.0]], &tol()).is_err());
    }

    #[test]
    fn isotropy_is_rotation_invariant_under_unitary_maps() {
        // rotations in each (xᵢ, xᵢ₊ₙ) plane preserve A, generic rotations do not
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..200 {
            let th: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
            let ph: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
            let rot = |v: [f64; 4]| {
                vec![
                    th.cos() * v[0] - th.sin() * v[2],
                    ph.cos() * v[1] - ph.sin() * v[3],
                    th.sin() * v[0] + th.cos() * v[2],
                    ph.sin() * v[1] + ph.cos() * v[3],
                ]
            };
            let iso = [rot([1.0, 0.0, 0.0, 0.0]), rot([0.0, 1.0, 0.0, 0.0])];
            assert!(make_horizontal(2, &iso, &tol()).is_ok());
            let non = [rot([1.0, 0.0, 0.0, 0.0]), rot([0.0, 0.0, 1.0, 0.0])];
            assert!(make_horizontal(2, &non, &tol()).is_err());
        }
    }

    #[test]
    fn distance_examples() {
        let v = make_vertical(1, &[vec![1.0, 0.0]]).unwrap();
        let p = pt(&[0.0, 3.0, 7.0]);
        assert!((dist_to_subgroup(&p, &v, &tol()).unwrap() - 3.0).abs() < 1e-15);
        assert_eq!(dist_to_subgroup(&pt(&[2.0, 0.0, -5.0]), &v, &tol()).unwrap(), 0.0);

        let g = make_horizontal(1, &[vec![1.0, 0.0]], &tol()).unwrap();
        let d = dist_to_subgroup(&pt(&[0.0, 0.0, 1.0]), &g, &tol()).unwrap();
        assert!((d - 1.0).abs() < 1e-12);
        assert!(dist_to_subgroup(&pt(&[0.5, 0.0, 0.0]), &g, &tol()).unwrap() < 1e-9);
    }

    // grid oracle: d(p, v) minimized over a dense sample of v ∈ V
    fn grid_distance(p: &HPoint, v: &SubgroupSpec) -> f64 {
        let n = p.n();
        let mut best = f64::INFINITY;
        let steps = 4000;
        let mut q = vec![0.0; 2 * n + 1];
        match v.kind() {
            SubgroupKind::Horizontal => {
                assert_eq!(v.basis().len(), 1);
                for i in 0..=steps {
                    let c = -6.0 + 12.0 * i as f64 / steps as f64;
                    q.iter_mut().for_each(|x| *x = 0.0);
                    q[..2 * n].iter_mut().zip(&v.basis()[0]).for_each(|(x, u)| *x = c * u);
                    best = best.min(raw::dist(n, p.coords(), &q));
                }
            }
            _ => {
                assert_eq!(v.basis().len(), 1);
                for i in 0..=steps {
                    let c = -6.0 + 12.0 * i as f64 / steps as f64;
                    q[..2 * n].iter_mut().zip(&v.basis()[0]).for_each(|(x, u)| *x = c * u);
                    // vertical coordinate chosen to cancel, swept finely around it
                    let a = raw::symplectic(n, p.coords(), &q);
                    q[2 * n] = p.vertical() + a;
                    best = best.min(raw::dist(n, p.coords(), &q));
                }
            }
        }
        best
    }

    #[test]
    fn closed_forms_match_grid_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let v = make_vertical(1, &[vec![0.6, 0.8]]).unwrap();
        let g = make_horizontal(1, &[vec![0.6, -0.8]], &tol()).unwrap();
        for _ in 0..50 {
            let p = HPoint::new(1, (0..3).map(|_| rng.gen_range(-2.0..2.0))).unwrap();
            let exact = dist_to_subgroup(&p, &v, &tol()).unwrap();
            assert!((exact - grid_distance(&p, &v)).abs() < 5e-3, "vertical");
            let numeric = dist_to_subgroup(&p, &g, &tol()).unwrap();
            let oracle = grid_distance(&p, &g);
            assert!(numeric <= oracle + 1e-9, "{numeric} > {oracle}");
            assert!(oracle - numeric < 5e-3);
        }
    }

    #[test]
    fn horizontal_distance_in_h2() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let g = random_horizontal(2, 2, &mut rng).unwrap();
        for _ in 0..20 {
            let p = HPoint::new(2, (0..5).map(|_| rng.gen_range(-1.0..1.0))).unwrap();
            let d = dist_to_subgroup(&p, &g, &tol()).unwrap();
            // any point of G is an upper bound
            let mut best = f64::INFINITY;
            for _ in 0..4000 {
                let c0: f64 = rng.gen_range(-2.0..2.0);
                let c1: f64 = rng.gen_range(-2.0..2.0);
                let mut q = vec![0.0; 5];
                for i in 0..4 {
                    q[i] = c0 * g.basis()[0][i] + c1 * g.basis()[1][i];
                }
                best = best.min(raw::dist(2, p.coords(), &q));
            }
            assert!(d <= best + 1e-9);
            assert!(best - d < 0.05);
        }
    }

    #[test]
    fn cone_examples() {
        let v = make_vertical(1, &[vec![1.0, 0.0]]).unwrap();
        let o = HPoint::identity(1);
        assert!(!in_cone(&o, &pt(&[0.0, 1.0, 0.0]), &v, 0.5, &tol()).unwrap());
        assert!(in_cone(&o, &pt(&[2.0, 0.0, 1.0]), &v, 0.1, &tol()).unwrap());
        assert!(in_cone(&o, &o, &v, 0.1, &tol()).unwrap());
        assert!(in_cone(&o, &o, &v, 1.0, &tol()).is_err());
        assert!(in_cone(&o, &o, &v, 0.0, &tol()).is_err());

        // q ∈ p·V is always inside
        let p = pt(&[0.3, -0.7, 2.0]);
        let w = pt(&[1.5, 0.0, -0.4]);
        let q = crate::heis::group_mul(&p, &w).unwrap();
        assert!(in_cone(&p, &q, &v, 0.01, &tol()).unwrap());
    }

    #[test]
    fn cone_left_invariance() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let v = make_vertical(1, &[vec![0.6, 0.8]]).unwrap();
        let g = make_horizontal(1, &[vec![1.0, 0.0]], &tol()).unwrap();
        for _ in 0..300 {
            let mk = |rng: &mut ChaCha8Rng| HPoint::new(1, (0..3).map(|_| rng.gen_range(-2.0..2.0))).unwrap();
            let (a, p, q) = (mk(&mut rng), mk(&mut rng), mk(&mut rng));
            let ap = crate::heis::group_mul(&a, &p).unwrap();
            let aq = crate::heis::group_mul(&a, &q).unwrap();
            for s in [&v, &g] {
                let delta = rng.gen_range(0.05..0.95);
                let x = crate::heis::group_mul(&crate::heis::group_inv(&p), &q).unwrap();
                let margin = dist_to_subgroup(&x, s, &tol()).unwrap() - delta * crate::heis::koranyi_norm(&x);
                if margin.abs() < 1e-9 {
                    continue;
                }
                assert_eq!(
                    in_cone(&p, &q, s, delta, &tol()).unwrap(),
                    in_cone(&ap, &aq, s, delta, &tol()).unwrap()
                );
            }
        }
    }

    #[test]
    fn grassmannian_distance() {
        let x = make_vertical(1, &[vec![1.0, 0.0]]).unwrap();
        let y = make_vertical(1, &[vec![0.0, 1.0]]).unwrap();
        assert!(subspace_distance(&x, &x).unwrap() < 1e-15);
        assert!((subspace_distance(&x, &y).unwrap() - 1.0).abs() < 1e-12);
        for k in 0..64 {
            let th = k as f64 * 0.1;
            let w = make_vertical(1, &[vec![th.cos(), th.sin()]]).unwrap();
            // P_V − P_W for lines has eigenvalues ±|sin θ| (2×2 trace-zero symmetric)
            let oracle = th.sin().abs();
            let d = subspace_distance(&x, &w).unwrap();
            assert!((d - oracle).abs() < 1e-12, "θ={th}: {d} vs {oracle}");
            assert!((d - subspace_distance(&w, &x).unwrap()).abs() < 1e-15);
        }
        assert!((subspace_distance(&x, &SubgroupSpec::t_axis(1)).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn haar_t_axis_mass() {
        let t = SubgroupSpec::t_axis(1);
        let m = haar_sample(&t, &HaarGrid::new(1.0, 64)).unwrap();
        assert_eq!(m.len(), 64);
        // Lebesgue length of {|t| ≤ 1}
        assert!((m.total_mass() - 2.0).abs() < 1e-12);
        assert!((haar_unit_ball_mass(&t) - 2.0).abs() < 1e-15);
    }

    #[test]
    fn haar_vertical_plane_scales_with_dimension_three() {
        let v = make_vertical(1, &[vec![1.0, 0.0]]).unwrap();
        let m = haar_sample(&v, &HaarGrid::new(1.0, 2000)).unwrap();
        let o = HPoint::identity(1);
        let unit = haar_unit_ball_mass(&v);
        for rho in [0.1, 0.2, 0.5, 1.0] {
            let mass = m.mass_in_ball(&o, rho, crate::Execution::Sequential).unwrap();
            let ratio = mass / rho.powi(3);
            assert!((ratio / unit - 1.0).abs() < 0.05, "ρ={rho}: {ratio} vs {unit}");
        }
    }

    #[test]
    fn haar_total_mass_converges() {
        let v = make_vertical(1, &[vec![1.0, 0.0]]).unwrap();
        let a = haar_sample(&v, &HaarGrid::new(1.0, 400)).unwrap().total_mass();
        let b = haar_sample(&v, &HaarGrid::new(1.0, 800)).unwrap().total_mass();
        assert!(((a - b) / b).abs() < 0.01);
        assert!((b / haar_unit_ball_mass(&v) - 1.0).abs() < 0.01);
    }

    #[test]
    fn haar_rejects_bad_grids() {
        let t = SubgroupSpec::t_axis(1);
        assert!(haar_sample(&t, &HaarGrid::new(1.0, 1)).is_err());
        let iso = haar_sample(&t, &HaarGrid::isotropic(2.0, 64)).unwrap();
        assert_eq!(iso.len(), 2 * 64 * 64);
        assert!((iso.spacing().unwrap() - 2.0 / 64.0).abs() < 1e-15);
        assert!((iso.total_mass() - 8.0).abs() < 1e-9);
        let plane = make_vertical(1, &[vec![1.0, 0.0]]).unwrap();
        let iso = haar_sample(&plane, &HaarGrid::isotropic(1.0, 16)).unwrap();
        assert!((iso.spacing().unwrap() - 1.0 / 16.0).abs() < 1e-15);
        assert!(haar_sample(&t, &HaarGrid::new(-1.0, 8)).is_err());
        let v = make_vertical(2, &[vec![1.0, 0.0, 0.0, 0.0], vec![0.0, 1.0, 0.0, 0.0]]).unwrap();
        let grid = HaarGrid {
            atom_cap: 1000,
            ..HaarGrid::new(1.0, 100)
        };
        assert!(matches!(haar_sample(&v, &grid), Err(Error::AtomCap { .. })));
    }

    #[test]
    fn unit_ball_masses() {
        let g = make_horizontal(1, &[vec![1.0, 0.0]], &tol()).unwrap();
        assert!((haar_unit_ball_mass(&g) - 2.0).abs() < 1e-15);
        let g2 = make_horizontal(2, &[vec![1.0, 0.0, 0.0, 0.0], vec![0.0, 1.0, 0.0, 0.0]], &tol()).unwrap();
        assert!((haar_unit_ball_mass(&g2) - std::f64::consts::PI).abs() < 1e-14);
    }

    #[test]
    fn dimension_family() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let fam = sample_dimension_family(1, 2, 8, &mut rng).unwrap();
        assert_eq!(fam.len(), 1);
        assert_eq!(fam[0].kind(), SubgroupKind::TAxis);
        let fam = sample_dimension_family(2, 2, 8, &mut rng).unwrap();
        assert!(fam.iter().all(|g| g.hausdorff_dimension() == 2));
        assert!(fam.len() > 1);
        let fam = sample_dimension_family(2, 3, 6, &mut rng).unwrap();
        assert!(fam.iter().all(|g| g.hausdorff_dimension() == 3));
        assert!(sample_dimension_family(1, 7, 3, &mut rng).is_err());
    }
}
