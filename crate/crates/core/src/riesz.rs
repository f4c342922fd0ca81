//! s-Riesz kernels and their truncated, annular and maximal transforms
//! against a [`DiscreteMeasure`].
//!
//! The kernel is `R_s(p) = (p₁/‖p‖^{s+1}, …, p₂ₙ/‖p‖^{s+1}, p₂ₙ₊₁/‖p‖^{s+2})`.
//! It is odd, `R_s(p⁻¹) = −R_s(p)`, and `R_s(δ_r p) = r^{−s} R_s(p)` in every
//! coordinate. Balls are closed: a truncation at `ε` drops every atom with
//! `d(p, q) ≤ ε`, and an annulus `(r, R]` keeps `r < d(p, q) ≤ R`.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::{self, Execution};
use crate::heis::{raw, HPoint};
use crate::measure::DiscreteMeasure;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RieszParams {
    n: usize,
    s: f64,
}

impl RieszParams {
    pub fn new(n: usize, s: f64) -> Result<Self> {
        if n == 0 {
            return Err(Error::Invalid("group index n must be positive".into()));
        }
        let max = (2 * n + 2) as f64;
        if !(s > 0.0 && s <= max) {
            return Err(Error::param("s", s, "must lie in (0, 2n+2]"));
        }
        Ok(RieszParams { n, s })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn s(&self) -> f64 {
        self.s
    }

    fn kernel(&self) -> Kernel {
        Kernel::new(self.n, self.s)
    }
}

/// Precomputed exponents for the inner loop.
#[derive(Clone, Copy)]
struct Kernel {
    n: usize,
    s: f64,
    integer_s: Option<i32>,
}

impl Kernel {
    fn new(n: usize, s: f64) -> Self {
        let integer_s = (s.fract() == 0.0 && s <= 64.0).then_some(s as i32);
        Kernel { n, s, integer_s }
    }

    /// `ρ^{−(s+1)}`.
    #[inline]
    fn inv_pow(&self, rho: f64) -> f64 {
        match self.integer_s {
            Some(k) => 1.0 / rho.powi(k + 1),
            None => rho.powf(-(self.s + 1.0)),
        }
    }

    /// `out += w · R_s(x)` for `x ≠ 0` with `‖x‖ = rho`.
    #[inline]
    fn add_scaled(&self, x: &[f64], rho: f64, w: f64, out: &mut [f64]) {
        let h = w * self.inv_pow(rho);
        let n2 = 2 * self.n;
        for i in 0..n2 {
            out[i] += h * x[i];
        }
        out[n2] += h / rho * x[n2];
    }
}

pub fn riesz_kernel(params: &RieszParams, p: &HPoint) -> Result<Vec<f64>> {
    if p.n() != params.n {
        return Err(Error::DimensionMismatch {
            left: params.n,
            right: p.n(),
        });
    }
    let rho = raw::norm(p.n(), p.coords());
    if rho == 0.0 {
        return Err(Error::SingularKernel);
    }
    let mut out = vec![0.0; p.dim()];
    params.kernel().add_scaled(p.coords(), rho, 1.0, &mut out);
    Ok(out)
}

/// The function `f` integrated against the kernel.
#[derive(Clone, Copy)]
pub enum Integrand<'a> {
    One,
    /// The coordinate function `q ↦ q_i` (0-based index).
    Coordinate(usize),
    Func(&'a (dyn Fn(&[f64]) -> f64 + Sync)),
}

impl Integrand<'_> {
    #[inline]
    fn eval(&self, q: &[f64]) -> f64 {
        match self {
            Integrand::One => 1.0,
            Integrand::Coordinate(i) => q[*i],
            Integrand::Func(f) => f(q),
        }
    }
}

impl std::fmt::Debug for Integrand<'_> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Integrand::One => write!(f, "One"),
            Integrand::Coordinate(i) => write!(f, "Coordinate({i})"),
            Integrand::Func(_) => write!(f, "Func(..)"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TransformResult {
    pub value: Vec<f64>,
    pub epsilon: f64,
    pub atom_count_used: usize,
}

/// Kernel sums over the shells cut out by ascending radii `edges`.
///
/// Shell `i` collects atoms with `edges[i] < d(p,q) ≤ edges[i+1]`; the last
/// shell is unbounded. Atoms in the closed ball `B(p, edges[0])` are skipped.
#[derive(Clone, Debug)]
pub struct ShellSums {
    dim: usize,
    pub edges: Vec<f64>,
    sums: Vec<f64>,
    pub counts: Vec<usize>,
}

impl ShellSums {
    pub fn shell(&self, i: usize) -> &[f64] {
        &self.sums[i * self.dim..(i + 1) * self.dim]
    }

    pub fn len(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    /// Sum of shells `lo..hi`, accumulated from the outermost inwards.
    pub fn range_sum(&self, lo: usize, hi: usize) -> (Vec<f64>, usize) {
        let mut v = vec![0.0; self.dim];
        let mut count = 0;
        for i in (lo..hi).rev() {
            v.iter_mut().zip(self.shell(i)).for_each(|(a, b)| *a += b);
            count += self.counts[i];
        }
        (v, count)
    }
}

fn check_point(mu: &DiscreteMeasure, params: &RieszParams, p: &HPoint) -> Result<()> {
    for other in [mu.n(), p.n()] {
        if other != params.n {
            return Err(Error::DimensionMismatch {
                left: params.n,
                right: other,
            });
        }
    }
    Ok(())
}

/// One pass over the atoms binning kernel contributions by distance from `p`.
pub fn shell_sums(
    mu: &DiscreteMeasure,
    params: &RieszParams,
    f: Integrand<'_>,
    p: &HPoint,
    edges: &[f64],
    exec: Execution,
) -> Result<ShellSums> {
    check_point(mu, params, p)?;
    if edges.is_empty() {
        return Err(Error::Empty("shell edge list"));
    }
    if edges.windows(2).any(|w| w[0] >= w[1]) || edges.iter().any(|e| !(e.is_finite() && *e >= 0.0)) {
        return Err(Error::Invalid(
            "shell edges must be finite, nonnegative and strictly increasing".into(),
        ));
    }
    let kernel = params.kernel();
    let n = params.n;
    let dim = 2 * n + 1;
    let shells = edges.len();
    let pc = p.coords();
    let (sums, counts) = exec::chunked_reduce(
        mu.len(),
        exec,
        (vec![0.0; shells * dim], vec![0usize; shells]),
        |range| {
            let mut sums = vec![0.0; shells * dim];
            let mut counts = vec![0usize; shells];
            let mut x = vec![0.0; dim];
            for i in range {
                let q = mu.point(i);
                raw::inv_mul_into(n, pc, q, &mut x);
                let rho = raw::norm(n, &x);
                if rho <= edges[0] {
                    continue;
                }
                let shell = edges.partition_point(|&e| e < rho) - 1;
                let w = mu.weight(i) * f.eval(q);
                kernel.add_scaled(&x, rho, w, &mut sums[shell * dim..(shell + 1) * dim]);
                counts[shell] += 1;
            }
            (sums, counts)
        },
        |(a, ca), (b, cb)| (exec::add_vecs(a, b), ca.iter().zip(&cb).map(|(x, y)| x + y).collect()),
    );
    Ok(ShellSums {
        dim,
        edges: edges.to_vec(),
        sums,
        counts,
    })
}

fn check_eps(eps: f64) -> Result<()> {
    if !(eps.is_finite() && eps > 0.0) {
        return Err(Error::param("eps", eps, "truncation radius must be positive"));
    }
    Ok(())
}

/// `ℛ^ε_s(f)(p) = ∫_{ℍⁿ∖B(p,ε)} R_s(p⁻¹·q) f(q) dμq`.
pub fn truncated_transform(
    mu: &DiscreteMeasure,
    params: &RieszParams,
    f: Integrand<'_>,
    p: &HPoint,
    eps: f64,
    exec: Execution,
) -> Result<TransformResult> {
    check_eps(eps)?;
    let shells = shell_sums(mu, params, f, p, &[eps], exec)?;
    let (value, atom_count_used) = shells.range_sum(0, 1);
    Ok(TransformResult {
        value,
        epsilon: eps,
        atom_count_used,
    })
}

/// Kernel integral of `f ≡ 1` over the annulus `r < d(p,q) ≤ big_r`.
pub fn annulus_transform(
    mu: &DiscreteMeasure,
    params: &RieszParams,
    p: &HPoint,
    r: f64,
    big_r: f64,
    exec: Execution,
) -> Result<Vec<f64>> {
    check_eps(r)?;
    if !(big_r > r && big_r.is_finite()) {
        return Err(Error::param("R", big_r, "outer radius must exceed the inner radius"));
    }
    let shells = shell_sums(mu, params, Integrand::One, p, &[r, big_r], exec)?;
    Ok(shells.shell(0).to_vec())
}

/// Componentwise `sup_ε |ℛ^ε_s(f)(p)|` over a descending list of radii.
pub fn maximal_transform(
    mu: &DiscreteMeasure,
    params: &RieszParams,
    f: Integrand<'_>,
    p: &HPoint,
    eps_grid: &[f64],
    exec: Execution,
) -> Result<Vec<f64>> {
    if eps_grid.is_empty() {
        return Err(Error::Empty("epsilon grid"));
    }
    eps_grid.iter().try_for_each(|&e| check_eps(e))?;
    if eps_grid.windows(2).any(|w| w[0] <= w[1]) {
        return Err(Error::Invalid("epsilon grid must be strictly descending".into()));
    }
    let edges: Vec<f64> = eps_grid.iter().rev().copied().collect();
    let shells = shell_sums(mu, params, f, p, &edges, exec)?;
    let k = edges.len();
    let mut sup = vec![0.0f64; 2 * params.n + 1];
    let mut running = vec![0.0; 2 * params.n + 1];
    for i in (0..k).rev() {
        running.iter_mut().zip(shells.shell(i)).for_each(|(a, b)| *a += b);
        sup.iter_mut().zip(&running).for_each(|(m, v)| *m = m.max(v.abs()));
    }
    Ok(sup)
}

/// `ε ↦ ∫_{B(p,1)∖B(p,ε)} R_s(p⁻¹·q) dμq` for each `ε` of a descending list
/// in `(0, 1)`.
pub fn growth_profile(
    mu: &DiscreteMeasure,
    params: &RieszParams,
    p: &HPoint,
    eps_list: &[f64],
    exec: Execution,
) -> Result<Vec<(f64, Vec<f64>)>> {
    annulus_profile(mu, params, p, eps_list, 1.0, exec)
}

/// [`growth_profile`] with a general outer radius.
pub fn annulus_profile(
    mu: &DiscreteMeasure,
    params: &RieszParams,
    p: &HPoint,
    eps_list: &[f64],
    outer: f64,
    exec: Execution,
) -> Result<Vec<(f64, Vec<f64>)>> {
    if eps_list.is_empty() {
        return Err(Error::Empty("epsilon list"));
    }
    if eps_list.iter().any(|&e| !(e > 0.0 && e < outer)) {
        return Err(Error::Invalid(format!("every epsilon must lie in (0, {outer})")));
    }
    if eps_list.windows(2).any(|w| w[0] <= w[1]) {
        return Err(Error::Invalid("epsilon list must be strictly descending".into()));
    }
    let mut edges: Vec<f64> = eps_list.iter().rev().copied().collect();
    edges.push(outer);
    let shells = shell_sums(mu, params, Integrand::One, p, &edges, exec)?;
    let k = eps_list.len();
    // shell k is (outer, ∞) and is dropped; eps_list[j] = edges[k−1−j]
    Ok(eps_list
        .iter()
        .enumerate()
        .map(|(j, &e)| (e, shells.range_sum(k - 1 - j, k).0))
        .collect())
}

/// A row of the `eps,R,coord_index,value` CSV schema; `outer = None` marks
/// an untruncated outer radius and is written as `inf`.
#[derive(Clone, Debug, PartialEq)]
pub struct ProfileRow {
    pub eps: f64,
    pub outer: Option<f64>,
    pub value: Vec<f64>,
}

/// Writes one line per coordinate, `coord_index` counted from 1.
pub fn write_profile_csv<W: Write>(w: W, rows: &[ProfileRow]) -> Result<()> {
    let mut out = std::io::BufWriter::new(w);
    writeln!(out, "eps,R,coord_index,value")?;
    for row in rows {
        let outer = row.outer.map_or_else(|| "inf".to_string(), |r| format!("{r:?}"));
        for (i, v) in row.value.iter().enumerate() {
            writeln!(out, "{:?},{outer},{},{:?}", row.eps, i + 1, v)?;
        }
    }
    out.flush()?;
    Ok(())
}
