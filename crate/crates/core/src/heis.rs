//! Heisenberg group arithmetic on ℍⁿ = ℝ²ⁿ⁺¹.
//!
//! A point is stored as `2n+1` coordinates `(p₁,…,p₂ₙ, p₂ₙ₊₁)`; the first
//! `2n` form the horizontal part `p'` and the last one is the vertical
//! coordinate. The product is
//!
//! ```text
//! p·q = (p' + q', p₂ₙ₊₁ + q₂ₙ₊₁ + A(p,q)),   A(p,q) = −2 Σᵢ (pᵢ qᵢ₊ₙ − pᵢ₊ₙ qᵢ)
//! ```
//!
//! and the homogeneous (Korányi) norm is `‖p‖ = (|p'|⁴ + p₂ₙ₊₁²)^{1/4}`.
//! The free functions taking [`HPoint`] validate group indices; the
//! [`raw`] module holds the allocation-free slice kernels used in hot loops.

use serde::{Deserialize, Serialize};
use smallvec::SmallVec;

use crate::error::{Error, Result};

pub type Coords = SmallVec<[f64; 5]>;

/// A point of ℍⁿ.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HPoint {
    n: usize,
    coords: Coords,
}

impl HPoint {
    pub fn new(n: usize, coords: impl IntoIterator<Item = f64>) -> Result<Self> {
        let coords: Coords = coords.into_iter().collect();
        Self::from_coords(n, coords)
    }

    pub fn from_slice(n: usize, coords: &[f64]) -> Result<Self> {
        Self::from_coords(n, Coords::from_slice(coords))
    }

    fn from_coords(n: usize, coords: Coords) -> Result<Self> {
        if n == 0 {
            return Err(Error::Invalid("group index n must be positive".into()));
        }
        if coords.len() != 2 * n + 1 {
            return Err(Error::CoordinateCount {
                expected: 2 * n + 1,
                got: coords.len(),
            });
        }
        if coords.iter().any(|c| !c.is_finite()) {
            return Err(Error::NonFinite("point coordinates"));
        }
        Ok(HPoint { n, coords })
    }

    /// Builds a point from a horizontal part and a vertical coordinate.
    pub fn from_parts(horizontal: &[f64], vertical: f64) -> Result<Self> {
        if horizontal.is_empty() || !horizontal.len().is_multiple_of(2) {
            return Err(Error::Invalid(format!(
                "horizontal part must have even positive length, got {}",
                horizontal.len()
            )));
        }
        let n = horizontal.len() / 2;
        let mut coords = Coords::from_slice(horizontal);
        coords.push(vertical);
        Self::from_coords(n, coords)
    }

    /// The neutral element.
    pub fn identity(n: usize) -> Self {
        assert!(n > 0, "group index n must be positive");
        HPoint {
            n,
            coords: smallvec::smallvec![0.0; 2 * n + 1],
        }
    }

    pub(crate) fn from_raw(n: usize, coords: &[f64]) -> Self {
        debug_assert_eq!(coords.len(), 2 * n + 1);
        HPoint {
            n,
            coords: Coords::from_slice(coords),
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Ambient dimension `2n+1`.
    pub fn dim(&self) -> usize {
        2 * self.n + 1
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn horizontal(&self) -> &[f64] {
        &self.coords[..2 * self.n]
    }

    pub fn vertical(&self) -> f64 {
        self.coords[2 * self.n]
    }

    pub fn is_identity(&self) -> bool {
        self.coords.iter().all(|&c| c == 0.0)
    }

    /// Sup-norm of the coordinate difference, for algebraic identity checks.
    pub fn max_abs_diff(&self, other: &HPoint) -> f64 {
        self.coords
            .iter()
            .zip(&other.coords)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

fn check_same(p: &HPoint, q: &HPoint) -> Result<()> {
    if p.n != q.n {
        return Err(Error::DimensionMismatch { left: p.n, right: q.n });
    }
    Ok(())
}

fn check_ratio(r: f64) -> Result<()> {
    if !(r.is_finite() && r > 0.0) {
        return Err(Error::param("r", r, "dilation factor must be positive"));
    }
    Ok(())
}

/// Tolerances for identity checks and iterative solvers.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    pub eq_tol: f64,
    pub opt_tol: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            eq_tol: 1e-12,
            opt_tol: 1e-9,
        }
    }
}

impl Tolerances {
    pub fn new(eq_tol: f64, opt_tol: f64) -> Result<Self> {
        let t = Tolerances { eq_tol, opt_tol };
        t.validate()?;
        Ok(t)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.eq_tol.is_finite() && self.eq_tol > 0.0) {
            return Err(Error::param("eq_tol", self.eq_tol, "must be positive"));
        }
        if !(self.opt_tol.is_finite() && self.opt_tol > 0.0) {
            return Err(Error::param("opt_tol", self.opt_tol, "must be positive"));
        }
        Ok(())
    }
}

pub fn symplectic_a(p: &HPoint, q: &HPoint) -> Result<f64> {
    check_same(p, q)?;
    Ok(raw::symplectic(p.n, &p.coords, &q.coords))
}

pub fn group_mul(p: &HPoint, q: &HPoint) -> Result<HPoint> {
    check_same(p, q)?;
    let mut out = HPoint::identity(p.n);
    raw::mul_into(p.n, &p.coords, &q.coords, &mut out.coords);
    Ok(out)
}

/// Group inverse; since `A(p,p) = 0` this is coordinatewise negation.
pub fn group_inv(p: &HPoint) -> HPoint {
    HPoint {
        n: p.n,
        coords: p.coords.iter().map(|c| -c).collect(),
    }
}

pub fn koranyi_norm(p: &HPoint) -> f64 {
    raw::norm(p.n, &p.coords)
}

/// `d(p,q) = ‖p⁻¹·q‖`.
pub fn dist(p: &HPoint, q: &HPoint) -> Result<f64> {
    check_same(p, q)?;
    Ok(raw::dist(p.n, &p.coords, &q.coords))
}

/// `δ_r(p) = (r p', r² p₂ₙ₊₁)`.
pub fn dilate(r: f64, p: &HPoint) -> Result<HPoint> {
    check_ratio(r)?;
    let mut out = p.clone();
    raw::dilate_in_place(p.n, r, &mut out.coords);
    Ok(out)
}

/// Left translation `τ_a(p) = a·p`.
pub fn translate(a: &HPoint, p: &HPoint) -> Result<HPoint> {
    group_mul(a, p)
}

/// `T_{a,r}(p) = δ_{1/r}(a⁻¹·p)`.
pub fn blowup_map(a: &HPoint, r: f64, p: &HPoint) -> Result<HPoint> {
    check_ratio(r)?;
    check_same(a, p)?;
    let mut out = HPoint::identity(p.n);
    raw::inv_mul_into(p.n, &a.coords, &p.coords, &mut out.coords);
    raw::dilate_in_place(p.n, 1.0 / r, &mut out.coords);
    Ok(out)
}

impl std::ops::Mul for &HPoint {
    type Output = HPoint;

    /// Panics on mismatched group indices; use [`group_mul`] to get a `Result`.
    fn mul(self, rhs: &HPoint) -> HPoint {
        group_mul(self, rhs).expect("group index mismatch")
    }
}

/// Slice-level kernels. Callers guarantee every slice has length `2n+1`.
pub mod raw {
    #[inline]
    pub fn symplectic(n: usize, p: &[f64], q: &[f64]) -> f64 {
        let mut acc = 0.0;
        for i in 0..n {
            acc += p[i] * q[i + n] - p[i + n] * q[i];
        }
        -2.0 * acc
    }

    #[inline]
    pub fn mul_into(n: usize, p: &[f64], q: &[f64], out: &mut [f64]) {
        let a = symplectic(n, p, q);
        for i in 0..2 * n {
            out[i] = p[i] + q[i];
        }
        out[2 * n] = p[2 * n] + q[2 * n] + a;
    }

    /// `out = p⁻¹·q`.
    #[inline]
    pub fn inv_mul_into(n: usize, p: &[f64], q: &[f64], out: &mut [f64]) {
        // A(−p, q) = −A(p, q)
        let a = symplectic(n, p, q);
        for i in 0..2 * n {
            out[i] = q[i] - p[i];
        }
        out[2 * n] = q[2 * n] - p[2 * n] - a;
    }

    #[inline]
    pub fn horizontal_sq(n: usize, x: &[f64]) -> f64 {
        x[..2 * n].iter().map(|c| c * c).sum()
    }

    #[inline]
    pub fn norm(n: usize, x: &[f64]) -> f64 {
        let h = horizontal_sq(n, x);
        let t = x[2 * n];
        (h * h + t * t).sqrt().sqrt()
    }

    /// `‖p⁻¹·q‖` without materializing the product.
    #[inline]
    pub fn dist(n: usize, p: &[f64], q: &[f64]) -> f64 {
        let mut h = 0.0;
        for i in 0..2 * n {
            let d = q[i] - p[i];
            h += d * d;
        }
        let t = q[2 * n] - p[2 * n] - symplectic(n, p, q);
        (h * h + t * t).sqrt().sqrt()
    }

    #[inline]
    pub fn dilate_in_place(n: usize, r: f64, x: &mut [f64]) {
        for c in &mut x[..2 * n] {
            *c *= r;
        }
        x[2 * n] *= r * r;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn pt(c: &[f64]) -> HPoint {
        HPoint::from_slice((c.len() - 1) / 2, c).unwrap()
    }

    fn random_point(rng: &mut impl Rng, n: usize, scale: f64) -> HPoint {
        HPoint::new(n, (0..2 * n + 1).map(|_| rng.gen_range(-scale..scale))).unwrap()
    }

    #[test]
    fn product_examples() {
        let p = group_mul(&pt(&[1.0, 0.0, 0.0]), &pt(&[0.0, 1.0, 0.0])).unwrap();
        assert_eq!(p.coords(), &[1.0, 1.0, -2.0]);
        let q = pt(&[0.3, -1.2, 4.0]);
        assert_eq!(group_mul(&q, &HPoint::identity(1)).unwrap(), q);
        let t = group_mul(&pt(&[0.0, 0.0, 1.0]), &pt(&[0.0, 0.0, 1.0])).unwrap();
        assert_eq!(t.coords(), &[0.0, 0.0, 2.0]);
    }

    #[test]
    fn symplectic_examples() {
        let p = pt(&[1.0, 0.0, 5.0]);
        let q = pt(&[0.0, 1.0, -3.0]);
        assert_eq!(symplectic_a(&p, &q).unwrap(), -2.0);
        assert_eq!(symplectic_a(&q, &p).unwrap(), 2.0);
        assert_eq!(symplectic_a(&p, &p).unwrap(), 0.0);
        let p2 = pt(&[1.0, 0.0, 0.0, 0.0, 0.0]);
        let q2 = pt(&[0.0, 0.0, 1.0, 0.0, 0.0]);
        assert_eq!(symplectic_a(&p2, &q2).unwrap(), -2.0);
    }

    #[test]
    fn mismatched_indices_rejected() {
        let p = HPoint::identity(1);
        let q = HPoint::identity(2);
        assert!(matches!(
            group_mul(&p, &q),
            Err(Error::DimensionMismatch { left: 1, right: 2 })
        ));
        assert!(dist(&p, &q).is_err());
        assert!(symplectic_a(&p, &q).is_err());
        assert!(translate(&p, &q).is_err());
    }

    #[test]
    fn invalid_points_rejected() {
        assert!(HPoint::new(1, [0.0, 1.0]).is_err());
        assert!(HPoint::new(1, [0.0, f64::NAN, 1.0]).is_err());
        assert!(HPoint::new(1, [0.0, f64::INFINITY, 1.0]).is_err());
        assert!(HPoint::new(0, []).is_err());
    }

    #[test]
    fn inverse_examples() {
        assert_eq!(group_inv(&pt(&[1.0, 2.0, 3.0])).coords(), &[-1.0, -2.0, -3.0]);
        assert!(group_inv(&HPoint::identity(1)).is_identity());
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..100 {
            let p = random_point(&mut rng, 2, 10.0);
            let e = group_mul(&p, &group_inv(&p)).unwrap();
            assert!(e.is_identity());
        }
    }

    #[test]
    fn norm_examples() {
        assert_eq!(koranyi_norm(&pt(&[1.0, 0.0, 0.0])), 1.0);
        assert_eq!(koranyi_norm(&pt(&[0.0, 0.0, 1.0])), 1.0);
        let v = koranyi_norm(&pt(&[1.0, 0.0, 1.0]));
        assert!((v - 2f64.powf(0.25)).abs() < 1e-15);
        assert!((v - 1.189207).abs() < 1e-6);
        assert_eq!(koranyi_norm(&HPoint::identity(2)), 0.0);
    }

    #[test]
    fn dist_examples() {
        let p = pt(&[0.4, -2.0, 1.5]);
        assert_eq!(dist(&p, &p).unwrap(), 0.0);
        assert_eq!(dist(&HPoint::identity(1), &pt(&[1.0, 0.0, 0.0])).unwrap(), 1.0);
    }

    #[test]
    fn dilation_examples() {
        assert_eq!(dilate(2.0, &pt(&[1.0, 1.0, 1.0])).unwrap().coords(), &[2.0, 2.0, 4.0]);
        let p = pt(&[0.1, 0.2, 0.3]);
        assert_eq!(dilate(1.0, &p).unwrap(), p);
        assert!(dilate(0.0, &p).is_err());
        assert!(dilate(-1.0, &p).is_err());
        let a = dilate(3.0, &dilate(0.5, &p).unwrap()).unwrap();
        let b = dilate(1.5, &p).unwrap();
        assert!(a.max_abs_diff(&b) < 1e-15);
    }

    #[test]
    fn translation_examples() {
        let p = pt(&[0.0, 1.0, 0.0]);
        assert_eq!(translate(&HPoint::identity(1), &p).unwrap(), p);
        assert_eq!(
            translate(&pt(&[1.0, 0.0, 0.0]), &p).unwrap().coords(),
            &[1.0, 1.0, -2.0]
        );
        let a = pt(&[0.7, -0.2, 3.0]);
        let back = translate(&a, &translate(&group_inv(&a), &p).unwrap()).unwrap();
        assert!(back.max_abs_diff(&p) < 1e-15);
    }

    #[test]
    fn blowup_examples() {
        let a = pt(&[0.7, -0.2, 3.0]);
        assert!(blowup_map(&a, 0.3, &a).unwrap().is_identity());
        let p = pt(&[1.0, 2.0, 3.0]);
        assert_eq!(blowup_map(&HPoint::identity(1), 1.0, &p).unwrap(), p);
        assert!(blowup_map(&a, 0.0, &p).is_err());
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..200 {
            let p = random_point(&mut rng, 1, 3.0);
            let q = random_point(&mut rng, 1, 3.0);
            let r = rng.gen_range(0.01..5.0);
            let lhs = dist(&blowup_map(&a, r, &p).unwrap(), &blowup_map(&a, r, &q).unwrap()).unwrap();
            let rhs = dist(&p, &q).unwrap() / r;
            assert!((lhs - rhs).abs() <= 1e-12 * (1.0 + rhs));
        }
    }

    #[test]
    fn tolerances_validate() {
        assert!(Tolerances::default().validate().is_ok());
        assert!(Tolerances::new(0.0, 1e-9).is_err());
        assert!(Tolerances::new(1e-12, -1.0).is_err());
    }
}
