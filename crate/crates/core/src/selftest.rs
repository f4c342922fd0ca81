//! Randomized invariant suites for the group law, the gauge distance, the
//! Riesz kernel and the truncated transforms.
//!
//! Group properties are checked against a [`GroupLaw`] so that deliberately
//! broken laws ([`Mutant`]) can be fed through the same suite.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::exec::Execution;
use crate::heis::{raw, HPoint};
use crate::measure::DiscreteMeasure;
use crate::riesz::{annulus_transform, riesz_kernel, truncated_transform, Integrand, RieszParams};

/// A candidate multiplication on `ℝ^{2n+1}` of the form
/// `(x, t)·(y, u) = (x + y, t + u + A(x, y))`.
pub trait GroupLaw: Sync {
    fn name(&self) -> String;

    fn symplectic(&self, n: usize, p: &[f64], q: &[f64]) -> f64;

    fn mul(&self, n: usize, p: &[f64], q: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; 2 * n + 1];
        for i in 0..2 * n {
            out[i] = p[i] + q[i];
        }
        out[2 * n] = p[2 * n] + q[2 * n] + self.symplectic(n, p, q);
        out
    }

    fn inv(&self, p: &[f64]) -> Vec<f64> {
        p.iter().map(|c| -c).collect()
    }

    fn dist(&self, n: usize, p: &[f64], q: &[f64]) -> f64 {
        raw::norm(n, &self.mul(n, &self.inv(p), q))
    }
}

/// The library's own law.
#[derive(Clone, Copy, Debug, Default)]
pub struct Standard;

impl GroupLaw for Standard {
    fn name(&self) -> String {
        "standard".into()
    }

    fn symplectic(&self, n: usize, p: &[f64], q: &[f64]) -> f64 {
        raw::symplectic(n, p, q)
    }
}

/// Sign errors in `A` used to check that the suite notices them.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mutant {
    /// `A` replaced by `|A|`: the sign flips exactly when `A < 0`.
    SignFlip,
    /// The second term of `A` has the wrong sign, making `A` symmetric.
    SymmetricA,
}

impl GroupLaw for Mutant {
    fn name(&self) -> String {
        match self {
            Mutant::SignFlip => "mutant:sign-flip".into(),
            Mutant::SymmetricA => "mutant:symmetric-a".into(),
        }
    }

    fn symplectic(&self, n: usize, p: &[f64], q: &[f64]) -> f64 {
        match self {
            Mutant::SignFlip => raw::symplectic(n, p, q).abs(),
            Mutant::SymmetricA => {
                let mut acc = 0.0;
                for i in 0..n {
                    acc += p[i] * q[i + n] + p[i + n] * q[i];
                }
                -2.0 * acc
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SuiteOptions {
    pub samples: usize,
    pub seed: u64,
    pub rel_tol: f64,
    /// Atoms of the random measures used by the transform properties.
    pub measure_atoms: usize,
    pub dims: [usize; 2],
}

impl Default for SuiteOptions {
    fn default() -> Self {
        SuiteOptions {
            samples: 10_000,
            seed: 0x5eed,
            rel_tol: 1e-12,
            measure_atoms: 200,
            dims: [1, 2],
        }
    }
}

impl SuiteOptions {
    pub fn quick() -> Self {
        SuiteOptions {
            samples: 1_000,
            measure_atoms: 50,
            ..Self::default()
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PropertyResult {
    pub name: String,
    pub samples: usize,
    pub failures: usize,
    pub worst_error: f64,
    pub first_failure: Option<String>,
}

impl PropertyResult {
    pub fn passed(&self) -> bool {
        self.failures == 0
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SelftestReport {
    pub law: String,
    pub options: SuiteOptions,
    pub properties: Vec<PropertyResult>,
}

impl SelftestReport {
    pub fn passed(&self) -> bool {
        self.properties.iter().all(PropertyResult::passed)
    }

    pub fn first_failure(&self) -> Option<&PropertyResult> {
        self.properties.iter().find(|p| !p.passed())
    }

    pub fn total_samples(&self) -> usize {
        self.properties.iter().map(|p| p.samples).sum()
    }
}

struct Check {
    result: PropertyResult,
    tol: f64,
}

impl Check {
    fn new(name: &str, tol: f64) -> Self {
        Check {
            result: PropertyResult {
                name: name.to_string(),
                samples: 0,
                failures: 0,
                worst_error: 0.0,
                first_failure: None,
            },
            tol,
        }
    }

    fn record(&mut self, err: f64, context: impl FnOnce() -> String) {
        let r = &mut self.result;
        r.samples += 1;
        if err.is_nan() || err > self.tol {
            r.failures += 1;
            if r.first_failure.is_none() {
                r.first_failure = Some(format!("error {err:e}: {}", context()));
            }
        }
        if !err.is_nan() {
            r.worst_error = r.worst_error.max(err);
        }
    }
}

/// Coordinatewise error of two vectors measured against their size.
fn vec_err(a: &[f64], b: &[f64]) -> f64 {
    let scale = a.iter().chain(b).fold(1.0f64, |m, x| m.max(x.abs()));
    a.iter().zip(b).fold(0.0f64, |m, (x, y)| m.max((x - y).abs())) / scale
}

fn scalar_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(f64::MIN_POSITIVE)
}

fn random_point(n: usize, rng: &mut impl Rng) -> Vec<f64> {
    let scale = rng.gen_range(-2.0f64..2.0).exp();
    let mut p: Vec<f64> = (0..2 * n + 1).map(|_| rng.gen_range(-1.0..1.0)).collect();
    raw::dilate_in_place(n, scale, &mut p);
    p
}

fn random_nonzero(n: usize, rng: &mut impl Rng) -> Vec<f64> {
    loop {
        let p = random_point(n, rng);
        if raw::norm(n, &p) > 1e-3 {
            return p;
        }
    }
}

fn dilated(n: usize, r: f64, p: &[f64]) -> Vec<f64> {
    let mut q = p.to_vec();
    raw::dilate_in_place(n, r, &mut q);
    q
}

/// Group, metric and dilation properties of `law`, in the order
/// associativity, identity, inverse, left invariance, dilation
/// homomorphism, dilation scaling, triangle inequality.
pub fn group_suite(law: &dyn GroupLaw, opts: &SuiteOptions) -> Vec<PropertyResult> {
    let tol = opts.rel_tol;
    let mut checks: Vec<Check> = [
        "associativity",
        "identity",
        "inverse",
        "left-invariance",
        "dilation-homomorphism",
        "dilation-scaling",
        "triangle-inequality",
    ]
    .iter()
    .map(|name| Check::new(name, tol))
    .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    for &n in &opts.dims {
        let e = vec![0.0; 2 * n + 1];
        for _ in 0..opts.samples / opts.dims.len() {
            let p = random_point(n, &mut rng);
            let q = random_point(n, &mut rng);
            let g = random_point(n, &mut rng);
            let r = rng.gen_range(-2.0f64..2.0).exp();

            let lhs = law.mul(n, &law.mul(n, &p, &q), &g);
            let rhs = law.mul(n, &p, &law.mul(n, &q, &g));
            checks[0].record(vec_err(&lhs, &rhs), || format!("p={p:?} q={q:?} r={g:?}"));

            let err = vec_err(&law.mul(n, &p, &e), &p).max(vec_err(&law.mul(n, &e, &p), &p));
            checks[1].record(err, || format!("p={p:?}"));

            let pi = law.inv(&p);
            let scale = p.iter().fold(1.0f64, |m, x| m.max(x.abs()));
            let err = vec_err(&law.mul(n, &p, &pi), &e).max(vec_err(&law.mul(n, &pi, &p), &e)) / scale;
            checks[2].record(err, || format!("p={p:?}"));

            let d = law.dist(n, &p, &q);
            let dg = law.dist(n, &law.mul(n, &g, &p), &law.mul(n, &g, &q));
            checks[3].record(scalar_err(d, dg), || format!("g={g:?} p={p:?} q={q:?}"));

            let lhs = dilated(n, r, &law.mul(n, &p, &q));
            let rhs = law.mul(n, &dilated(n, r, &p), &dilated(n, r, &q));
            checks[4].record(vec_err(&lhs, &rhs), || format!("r={r} p={p:?} q={q:?}"));

            let dr = law.dist(n, &dilated(n, r, &p), &dilated(n, r, &q));
            checks[5].record(scalar_err(dr, r * d), || format!("r={r} p={p:?} q={q:?}"));

            let excess = law.dist(n, &p, &g) - law.dist(n, &p, &q) - law.dist(n, &q, &g);
            let scale = law.dist(n, &p, &g).max(f64::MIN_POSITIVE);
            checks[6].record((excess / scale).max(0.0), || format!("p={p:?} q={q:?} r={g:?}"));
        }
    }
    checks.into_iter().map(|c| c.result).collect()
}

/// Kernel oddness under `law`'s inverse and `s`-homogeneity.
pub fn kernel_suite(law: &dyn GroupLaw, opts: &SuiteOptions) -> Vec<PropertyResult> {
    let mut anti = Check::new("kernel-antisymmetry", opts.rel_tol);
    let mut homog = Check::new("kernel-homogeneity", opts.rel_tol);
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed ^ 0x6b65726e);
    for &n in &opts.dims {
        for _ in 0..opts.samples / opts.dims.len() {
            let s = rng.gen_range(0.25..=(2 * n + 2) as f64);
            let params = RieszParams::new(n, s).expect("s drawn inside (0, 2n+2]");
            let p = random_nonzero(n, &mut rng);
            let r = rng.gen_range(-2.0f64..2.0).exp();
            let k = riesz_kernel(&params, &HPoint::from_raw(n, &p)).expect("nonzero point");
            let ki = riesz_kernel(&params, &HPoint::from_raw(n, &law.inv(&p))).expect("nonzero point");
            let neg: Vec<f64> = k.iter().map(|x| -x).collect();
            anti.record(vec_err(&ki, &neg), || format!("s={s} p={p:?}"));
            let kr = riesz_kernel(&params, &HPoint::from_raw(n, &dilated(n, r, &p))).expect("nonzero point");
            let scaled: Vec<f64> = k.iter().map(|x| x * r.powf(-s)).collect();
            homog.record(vec_err(&kr, &scaled), || format!("s={s} r={r} p={p:?}"));
        }
    }
    vec![anti.result, homog.result]
}

fn random_measure(n: usize, atoms: usize, rng: &mut impl Rng) -> DiscreteMeasure {
    let coords: Vec<f64> = (0..atoms * (2 * n + 1)).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let weights = (0..atoms).map(|_| rng.gen_range(0.1..1.0)).collect();
    DiscreteMeasure::from_flat(n, coords, crate::measure::Weights::PerAtom(weights), "selftest")
        .expect("finite random atoms")
}

/// Transform-level identities on small random measures: annuli are
/// differences of truncations, transforms commute with left translation
/// and pick up a factor `r^{−s}` when atoms, point and `ε` are dilated.
pub fn transform_suite(opts: &SuiteOptions) -> Vec<PropertyResult> {
    let tol = opts.rel_tol * 1e3;
    let mut annulus = Check::new("annulus-difference", tol);
    let mut translation = Check::new("translation-covariance", tol);
    let mut dilation = Check::new("dilation-covariance", tol);
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed ^ 0x7472616e);
    let seq = Execution::Sequential;
    let rounds = (opts.samples / 500).max(4);
    for &n in &opts.dims {
        for _ in 0..rounds / opts.dims.len() {
            let mu = random_measure(n, opts.measure_atoms, &mut rng);
            let s = rng.gen_range(0.5..=(2 * n + 2) as f64);
            let params = RieszParams::new(n, s).expect("s drawn inside (0, 2n+2]");
            let p = HPoint::from_raw(n, &random_point(n, &mut rng));
            let lo = rng.gen_range(0.05..0.5);
            let hi = lo * rng.gen_range(1.5..4.0);

            let ann = annulus_transform(&mu, &params, &p, lo, hi, seq).expect("valid annulus");
            let a = truncated_transform(&mu, &params, Integrand::One, &p, lo, seq)
                .expect("valid truncation")
                .value;
            let b = truncated_transform(&mu, &params, Integrand::One, &p, hi, seq)
                .expect("valid truncation")
                .value;
            let diff: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x - y).collect();
            annulus.record(vec_err(&ann, &diff), || {
                format!("s={s} eps=({lo},{hi}] p={:?}", p.coords())
            });

            let g = random_point(n, &mut rng);
            let moved = mu.map_points(|q, out| raw::mul_into(n, &g, q, out));
            let mut gp = vec![0.0; 2 * n + 1];
            raw::mul_into(n, &g, p.coords(), &mut gp);
            let t = truncated_transform(&moved, &params, Integrand::One, &HPoint::from_raw(n, &gp), lo, seq)
                .expect("valid truncation")
                .value;
            translation.record(vec_err(&t, &a), || format!("g={g:?} p={:?}", p.coords()));

            let r = rng.gen_range(0.25..4.0);
            let scaled = mu.map_points(|q, out| {
                out.copy_from_slice(q);
                raw::dilate_in_place(n, r, out);
            });
            let d = truncated_transform(
                &scaled,
                &params,
                Integrand::One,
                &HPoint::from_raw(n, &dilated(n, r, p.coords())),
                lo * r,
                seq,
            )
            .expect("valid truncation")
            .value;
            let expect: Vec<f64> = a.iter().map(|x| x * r.powf(-s)).collect();
            dilation.record(vec_err(&d, &expect), || format!("r={r} s={s}"));
        }
    }
    vec![annulus.result, translation.result, dilation.result]
}

/// All suites against `law`.
pub fn run_selftest(law: &dyn GroupLaw, opts: &SuiteOptions) -> SelftestReport {
    let mut properties = group_suite(law, opts);
    properties.extend(kernel_suite(law, opts));
    properties.extend(transform_suite(opts));
    SelftestReport {
        law: law.name(),
        options: *opts,
        properties,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn standard_law_passes() {
        let rep = run_selftest(&Standard, &SuiteOptions::default());
        assert!(rep.passed(), "{:?}", rep.first_failure());
        assert!(rep.properties.iter().take(9).all(|p| p.samples == 10_000));
    }

    #[test]
    fn quick_mode_passes() {
        let rep = run_selftest(&Standard, &SuiteOptions::quick());
        assert!(rep.passed());
        assert!(rep.total_samples() < 20_000);
    }

    #[test]
    fn sign_flip_breaks_associativity_first() {
        let rep = run_selftest(&Mutant::SignFlip, &SuiteOptions::quick());
        assert!(!rep.passed());
        assert_eq!(rep.first_failure().unwrap().name, "associativity");
    }

    #[test]
    fn symmetric_a_breaks_inverse() {
        let rep = run_selftest(&Mutant::SymmetricA, &SuiteOptions::quick());
        let failing: Vec<&str> = rep
            .properties
            .iter()
            .filter(|p| !p.passed())
            .map(|p| p.name.as_str())
            .collect();
        // any bilinear A is associative; the symmetric one fails on inverses
        assert!(!failing.contains(&"associativity"));
        assert_eq!(failing.first(), Some(&"inverse"));
    }

    #[test]
    fn deterministic() {
        let a = run_selftest(&Standard, &SuiteOptions::quick());
        let b = run_selftest(&Standard, &SuiteOptions::quick());
        assert_eq!(a, b);
    }
}
