use std::fs;

use hriesz::diagnostics::{
    ad_regularity_report, blowup_measure, cone_deficiency, discrepancy_to_haar, divergence_probe, horest_check,
    subgroup_boundedness_probe, Centers, GrowthOptions, HorestReport, ProbeOptions, Verdict,
};
use hriesz::fractal::{
    cylinder_measure_capped, min_piece_separation, phi_fixed_point, similarity_dimension, verify_invariant_region,
    word_similarity, Ifs, RegionReport, Word,
};
use hriesz::riesz::{annulus_transform, truncated_transform, write_profile_csv, Integrand, ProfileRow, RieszParams};
use hriesz::selftest::{run_selftest, GroupLaw, Mutant, PropertyResult, Standard, SuiteOptions};
use hriesz::subgroups::{haar_sample, sample_dimension_family, SubgroupKind, SubgroupSpec};
use hriesz::{DiscreteMeasure, Execution, HPoint};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::config::{Expectation, IntegrandConfig, MeasureSource, PointSelection, RunConfig};
use crate::output::{write_rows, CliResult, Failure, Sink, VerdictCheck};

/// Independent random streams per purpose, all derived from the run seed.
#[derive(Clone, Copy)]
enum Stream {
    Points = 1,
    Centers = 2,
    Vertices = 3,
    Family = 4,
    Probe = 5,
    Region = 6,
    Horest = 7,
}

pub struct Ctx<'a> {
    pub cfg: &'a RunConfig,
    pub exec: Execution,
    pub sink: Sink<'a>,
}

impl Ctx<'_> {
    fn rng(&self, stream: Stream) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.cfg.seed);
        rng.set_stream(stream as u64);
        rng
    }

    fn seed(&self, stream: Stream) -> u64 {
        self.rng(stream).gen()
    }

    fn ifs(&self) -> CliResult<Ifs> {
        Ok(self.cfg.ifs.system.build()?)
    }

    fn base(&self, ifs: &Ifs) -> CliResult<HPoint> {
        match &self.cfg.ifs.base {
            Some(c) => Ok(HPoint::from_slice(ifs.n(), c)?),
            None => Ok(ifs.base_point()),
        }
    }

    fn cylinder(&self, level: usize) -> CliResult<(Ifs, DiscreteMeasure)> {
        let ifs = self.ifs()?;
        let base = self.base(&ifs)?;
        let mu = cylinder_measure_capped(&ifs, level, &base, self.cfg.atom_cap, self.exec)?;
        Ok((ifs, mu))
    }

    /// The measure and the dimension its source suggests.
    fn measure(&self, src: &MeasureSource) -> CliResult<(DiscreteMeasure, Option<f64>, Option<Ifs>)> {
        match src {
            MeasureSource::Cylinder { level } => {
                let (ifs, mu) = self.cylinder(*level)?;
                Ok((mu, Some(similarity_dimension(&ifs)), Some(ifs)))
            }
            MeasureSource::Csv { path, spacing } => {
                let file = fs::File::open(path)
                    .map_err(|e| Failure::config(format!("cannot open {}: {e}", path.display())))?;
                let mu = DiscreteMeasure::read_csv(file, path.display().to_string())?.with_spacing(*spacing);
                Ok((mu, None, None))
            }
            MeasureSource::Haar { subgroup, grid } => {
                let v = subgroup.build(&self.cfg.tolerances)?;
                let mu = haar_sample(&v, &grid.build(self.cfg.atom_cap))?;
                Ok((mu, Some(v.hausdorff_dimension() as f64), None))
            }
        }
    }

    fn points(&self, sel: &PointSelection, mu: &DiscreteMeasure, ifs: Option<&Ifs>) -> CliResult<Vec<HPoint>> {
        let mut rng = self.rng(Stream::Points);
        let need_ifs = || ifs.cloned().map_or_else(|| self.ifs(), Ok);
        match sel {
            PointSelection::Identity => Ok(vec![HPoint::identity(mu.n())]),
            PointSelection::Atoms { count } => {
                if mu.is_empty() {
                    return Err(Failure::config("cannot sample atoms of an empty measure"));
                }
                Ok((0..*count).map(|_| mu.atom(rng.gen_range(0..mu.len()))).collect())
            }
            PointSelection::CylinderFixedPoints { count, word_length } => {
                let ifs = need_ifs()?;
                (0..*count)
                    .map(|_| {
                        let w = Word::new((0..*word_length).map(|_| rng.gen_range(0..ifs.len())).collect());
                        Ok(word_similarity(&ifs, &w)?.fixed_point())
                    })
                    .collect()
            }
            PointSelection::Words { words } => {
                let ifs = need_ifs()?;
                words
                    .iter()
                    .map(|w| {
                        if let Some(&l) = w.iter().find(|&&l| l >= ifs.len()) {
                            return Err(Failure::config(format!(
                                "word letter {l} out of range 0..{}",
                                ifs.len()
                            )));
                        }
                        Ok(word_similarity(&ifs, &Word::new(w.clone()))?.fixed_point())
                    })
                    .collect()
            }
            PointSelection::Explicit { points } => points.iter().map(|c| Ok(HPoint::from_slice(mu.n(), c)?)).collect(),
        }
    }
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> CliResult<()> {
    if cond {
        Ok(())
    } else {
        Err(Failure::config(msg()))
    }
}

fn dimension(explicit: Option<f64>, suggested: Option<f64>) -> CliResult<f64> {
    explicit
        .or(suggested)
        .ok_or_else(|| Failure::config("dimension `a` must be given for measures read from CSV"))
}

#[derive(Serialize)]
struct SelftestOut<'a> {
    law: &'a str,
    passed: bool,
    total_samples: usize,
    properties: &'a [PropertyResult],
}

pub fn selftest(ctx: &Ctx, mutant: Option<Mutant>) -> CliResult<()> {
    let mut opts = if ctx.cfg.quick {
        SuiteOptions::quick()
    } else {
        SuiteOptions::default()
    };
    opts.seed = ctx.cfg.seed;
    let law: &dyn GroupLaw = match &mutant {
        Some(m) => m,
        None => &Standard,
    };
    let rep = run_selftest(law, &opts);
    for p in &rep.properties {
        println!(
            "{:<24} {:>6} samples  {:>6} failures  worst {:.3e}",
            p.name, p.samples, p.failures, p.worst_error
        );
    }
    let out = SelftestOut {
        law: &rep.law,
        passed: rep.passed(),
        total_samples: rep.total_samples(),
        properties: &rep.properties,
    };
    ctx.sink.json("selftest.json", "selftest", &out, None)?;
    match rep.first_failure() {
        None => {
            println!(
                "selftest: {} properties, {} samples, all passed",
                rep.properties.len(),
                rep.total_samples()
            );
            Ok(())
        }
        Some(p) => Err(Failure::contradiction(format!(
            "selftest failed: property {} ({} of {} samples; {})",
            p.name,
            p.failures,
            p.samples,
            p.first_failure.as_deref().unwrap_or("")
        ))),
    }
}

#[derive(Serialize)]
struct GenerateOut {
    maps: usize,
    ratios: Vec<f64>,
    similarity_dimension: f64,
    level: usize,
    atoms: usize,
    total_mass: f64,
    spacing: Option<f64>,
    csv: String,
}

pub fn ifs_generate(ctx: &Ctx) -> CliResult<()> {
    let level = ctx.cfg.ifs.level;
    let (ifs, mu) = ctx.cylinder(level)?;
    let name = format!("measure_level{level}.csv");
    mu.write_csv(ctx.sink.create(&name)?)?;
    let out = GenerateOut {
        maps: ifs.len(),
        ratios: ifs.ratios(),
        similarity_dimension: similarity_dimension(&ifs),
        level,
        atoms: mu.len(),
        total_mass: mu.total_mass(),
        spacing: mu.spacing(),
        csv: name,
    };
    ctx.sink.json("ifs_generate.json", "ifs generate", &out, None)?;
    println!(
        "wrote {} atoms (mass {}) to {}",
        out.atoms,
        out.total_mass,
        ctx.sink.path(&out.csv).display()
    );
    Ok(())
}

#[derive(Serialize)]
struct PhiOut {
    resolution: usize,
    iterations: usize,
    contraction_ratios: Vec<f64>,
    max_contraction_ratio: f64,
    grid_residual: f64,
    taper_width: f64,
    sup_norm: f64,
    sup_bound: f64,
}

#[derive(Serialize)]
struct SeparationOut {
    level: usize,
    min_separation: f64,
}

#[derive(Serialize)]
struct VerifyOut {
    phi: Option<PhiOut>,
    region: Option<RegionReport>,
    separation: Vec<SeparationOut>,
    /// Relative change of the separation between the last two levels.
    separation_relative_change: Option<f64>,
    certified: bool,
}

/// Ratios of successive φ updates while the updates are above rounding.
pub fn contraction_ratios(updates: &[f64]) -> Vec<f64> {
    updates
        .windows(2)
        .filter(|w| w[0] > 1e-12)
        .map(|w| w[1] / w[0])
        .collect()
}

pub fn ifs_verify(ctx: &Ctx) -> CliResult<()> {
    let block = &ctx.cfg.ifs;
    let ifs = ctx.ifs()?;
    let base = ctx.base(&ifs)?;
    let (phi, region) = match ifs.meta() {
        Some(meta) => {
            let phi = phi_fixed_point(ifs.n(), meta.r, block.phi_resolution, block.phi_tol, ctx.exec)?;
            let region = verify_invariant_region(&ifs, &phi, block.verify_samples, ctx.seed(Stream::Region), ctx.exec)?;
            let ratios = contraction_ratios(phi.updates());
            let out = PhiOut {
                resolution: phi.resolution(),
                iterations: phi.iterations(),
                max_contraction_ratio: ratios.iter().copied().fold(0.0, f64::max),
                contraction_ratios: ratios,
                grid_residual: phi.grid_residual(),
                taper_width: phi.taper_width(),
                sup_norm: phi.sup_norm(),
                sup_bound: phi.sup_bound(),
            };
            (Some(out), Some(region))
        }
        None => (None, None),
    };
    let mut separation = Vec::new();
    for &level in &block.separation_levels {
        separation.push(SeparationOut {
            level,
            min_separation: min_piece_separation(&ifs, level, &base, ctx.exec)?,
        });
    }
    let change = match separation.as_slice() {
        [.., a, b] => Some((b.min_separation - a.min_separation).abs() / a.min_separation),
        _ => None,
    };
    let region_ok = region.as_ref().is_none_or(|r| r.certified);
    let certified = region_ok && separation.iter().all(|s| s.min_separation > 0.0);
    let out = VerifyOut {
        phi,
        region,
        separation,
        separation_relative_change: change,
        certified,
    };
    let check = VerdictCheck {
        expected: "certified".into(),
        observed: if certified { "certified" } else { "not certified" }.into(),
        ok: certified,
    };
    ctx.sink.json("ifs_verify.json", "ifs verify", &out, Some(&check))?;
    println!("ifs verify: {}", check.observed);
    check.into_result("ifs verify")
}

pub fn ad_report(ctx: &Ctx) -> CliResult<()> {
    let block = &ctx.cfg.diagnostics.ad;
    let (mu, dim, _) = ctx.measure(&block.measure)?;
    let a = dimension(block.a, dim)?;
    let centers = Centers::Atoms {
        count: block.centers,
        seed: ctx.seed(Stream::Centers),
    };
    let rep = ad_regularity_report(&mu, a, &centers, &block.radii, ctx.exec)?;
    write_rows(
        &ctx.sink.path("ad_report.csv"),
        &["center_index", "radius", "ratio"],
        rep.table.iter().enumerate().flat_map(|(i, row)| {
            row.iter()
                .zip(&rep.radii)
                .map(move |(v, r)| vec![i.to_string(), format!("{r:?}"), format!("{v:?}")])
        }),
    )?;
    let check = block.expect_regular.map(|want| VerdictCheck {
        expected: if want { "regular" } else { "not regular" }.into(),
        observed: format!(
            "{} (C = {:.4})",
            if rep.regular { "regular" } else { "not regular" },
            rep.implied_c
        ),
        ok: rep.regular == want,
    });
    ctx.sink
        .json("ad_report.json", "measure ad-report", &rep, check.as_ref())?;
    println!(
        "AD ratios in [{:.4}, {:.4}], implied C = {:.4}",
        rep.min_ratio, rep.max_ratio, rep.implied_c
    );
    check.map_or(Ok(()), |c| c.into_result("measure ad-report"))
}

#[derive(Serialize)]
struct TransformRow {
    eps: f64,
    outer: Option<f64>,
    value: Vec<f64>,
    atom_count_used: Option<usize>,
}

#[derive(Serialize)]
struct TransformPoint {
    point: Vec<f64>,
    csv: String,
    rows: Vec<TransformRow>,
}

pub fn riesz_transform(ctx: &Ctx) -> CliResult<()> {
    let block = &ctx.cfg.riesz.transform;
    let (mu, _, ifs) = ctx.measure(&block.measure)?;
    let params = RieszParams::new(mu.n(), block.s)?;
    let points = ctx.points(&block.points, &mu, ifs.as_ref())?;
    let f = match block.integrand {
        IntegrandConfig::One => Integrand::One,
        IntegrandConfig::Coordinate { index } => {
            ensure(index >= 1 && index <= 2 * mu.n() + 1, || {
                format!("coordinate index {index} out of range 1..={}", 2 * mu.n() + 1)
            })?;
            Integrand::Coordinate(index - 1)
        }
    };
    ensure(block.outer.is_none() || matches!(f, Integrand::One), || {
        "annular transforms support only the constant integrand".into()
    })?;
    let mut out = Vec::new();
    for (i, p) in points.iter().enumerate() {
        let mut rows = Vec::new();
        for &eps in &block.eps {
            let row = match block.outer {
                Some(outer) => TransformRow {
                    eps,
                    outer: Some(outer),
                    value: annulus_transform(&mu, &params, p, eps, outer, ctx.exec)?,
                    atom_count_used: None,
                },
                None => {
                    let t = truncated_transform(&mu, &params, f, p, eps, ctx.exec)?;
                    TransformRow {
                        eps,
                        outer: None,
                        value: t.value,
                        atom_count_used: Some(t.atom_count_used),
                    }
                }
            };
            rows.push(row);
        }
        let csv = format!("transform_p{i:02}.csv");
        let profile: Vec<ProfileRow> = rows
            .iter()
            .map(|r| ProfileRow {
                eps: r.eps,
                outer: r.outer,
                value: r.value.clone(),
            })
            .collect();
        write_profile_csv(ctx.sink.create(&csv)?, &profile)?;
        out.push(TransformPoint {
            point: p.coords().to_vec(),
            csv,
            rows,
        });
    }
    ctx.sink.json("riesz_transform.json", "riesz transform", &out, None)?;
    println!("riesz transform: {} point(s) x {} eps", out.len(), block.eps.len());
    Ok(())
}

fn profile_csv(ctx: &Ctx, name: &str, eps: &[f64], outer: f64, values: &[Vec<f64>]) -> CliResult<()> {
    let rows: Vec<ProfileRow> = eps
        .iter()
        .zip(values)
        .map(|(&e, v)| ProfileRow {
            eps: e,
            outer: Some(outer),
            value: v.clone(),
        })
        .collect();
    write_profile_csv(ctx.sink.create(name)?, &rows)?;
    Ok(())
}

fn verdict_name(v: Verdict) -> &'static str {
    match v {
        Verdict::Diverging => "diverging",
        Verdict::Bounded => "bounded",
        Verdict::Inconclusive => "inconclusive",
    }
}

fn expectation_verdict(e: Expectation) -> Option<Verdict> {
    match e {
        Expectation::Diverging => Some(Verdict::Diverging),
        Expectation::Bounded => Some(Verdict::Bounded),
        Expectation::None => None,
    }
}

pub fn riesz_divergence(ctx: &Ctx) -> CliResult<()> {
    let block = &ctx.cfg.riesz.divergence;
    let (mu, _, ifs) = ctx.measure(&block.measure)?;
    let params = RieszParams::new(mu.n(), block.s)?;
    let points = ctx.points(&block.points, &mu, ifs.as_ref())?;
    let opts = GrowthOptions {
        threshold: block.threshold,
        bounded_slope: block.bounded_slope,
        outer: block.outer,
    };
    let rep = divergence_probe(&mu, &params, &points, &block.eps, &opts, ctx.exec)?;
    for w in &rep.warnings {
        eprintln!("warning: {w}");
    }
    for (i, p) in rep.points.iter().enumerate() {
        profile_csv(ctx, &format!("divergence_p{i:02}.csv"), &p.eps, block.outer, &p.values)?;
    }
    let total = rep.points.len();
    let check = expectation_verdict(block.expect).map(|want| {
        let hits = rep.points.iter().filter(|p| p.verdict == want).count();
        VerdictCheck {
            expected: format!(
                "{} at >= {:.0}% of points",
                verdict_name(want),
                100.0 * block.min_fraction
            ),
            observed: format!("{} at {hits}/{total}", verdict_name(want)),
            ok: hits as f64 >= block.min_fraction * total as f64,
        }
    });
    ctx.sink
        .json("riesz_divergence.json", "riesz divergence", &rep, check.as_ref())?;
    println!(
        "riesz divergence: {}/{total} diverging, {}/{total} bounded",
        rep.diverging, rep.bounded
    );
    check.map_or(Ok(()), |c| c.into_result("riesz divergence"))
}

pub fn riesz_subgroup_probe(ctx: &Ctx) -> CliResult<()> {
    let block = &ctx.cfg.riesz.probe;
    let v = block.subgroup.build(&ctx.cfg.tolerances)?;
    let s = block.s.unwrap_or(v.hausdorff_dimension() as f64);
    let mut opts = ProbeOptions::new(block.grid.build(ctx.cfg.atom_cap));
    opts.point_count = block.point_count;
    opts.seed = ctx.seed(Stream::Probe);
    opts.growth.outer = block.outer;
    opts.growth.bounded_slope = block.bounded_slope;
    let rep = subgroup_boundedness_probe(&v, s, &block.eps, &opts, ctx.exec)?;
    for w in &rep.growth.warnings {
        eprintln!("warning: {w}");
    }
    for (i, p) in rep.growth.points.iter().enumerate() {
        profile_csv(ctx, &format!("probe_p{i:02}.csv"), &p.eps, block.outer, &p.values)?;
    }
    let check = expectation_verdict(block.expect).map(|want| VerdictCheck {
        expected: verdict_name(want).into(),
        observed: verdict_name(rep.verdict).into(),
        ok: rep.verdict == want,
    });
    ctx.sink.json(
        "riesz_subgroup_probe.json",
        "riesz subgroup-probe",
        &rep,
        check.as_ref(),
    )?;
    println!(
        "riesz subgroup-probe: {} on {} atoms, max magnitude {:.3e}, slope {:.3e}",
        verdict_name(rep.verdict),
        rep.atoms,
        rep.max_magnitude,
        rep.slope
    );
    check.map_or(Ok(()), |c| c.into_result("riesz subgroup-probe"))
}

#[derive(Serialize)]
struct BlowupScale {
    r: f64,
    total_mass: f64,
    /// `(radius, mass of the closed ball at the identity)`.
    ball_masses: Vec<(f64, f64)>,
    haar_discrepancy: Option<f64>,
    csv: String,
}

#[derive(Serialize)]
struct BlowupPoint {
    point: Vec<f64>,
    scales: Vec<BlowupScale>,
}

pub fn tangent_blowup(ctx: &Ctx) -> CliResult<()> {
    let block = &ctx.cfg.diagnostics.tangent;
    let (mu, _, ifs) = ctx.measure(&block.measure)?;
    let points = ctx.points(&block.point, &mu, ifs.as_ref())?;
    let v = block
        .subgroup
        .as_ref()
        .map(|g| g.build(&ctx.cfg.tolerances))
        .transpose()?;
    let o = HPoint::identity(mu.n());
    let balls: Vec<(HPoint, f64)> = block.ball_radii.iter().map(|&r| (o.clone(), r)).collect();
    let mut out = Vec::new();
    for (i, a) in points.iter().enumerate() {
        let mut scales = Vec::new();
        for (j, &r) in block.scales.iter().enumerate() {
            let nu = blowup_measure(&mu, a, r, block.normalization, ctx.exec)?;
            let masses = nu.ball_masses(&o, &block.ball_radii, ctx.exec)?;
            let haar_discrepancy = match &v {
                Some(v) => Some(discrepancy_to_haar(&nu, v, &balls, &ctx.cfg.tolerances, ctx.exec)?),
                None => None,
            };
            let window: Vec<(HPoint, f64)> = (0..nu.len())
                .filter(|&k| hriesz::heis::koranyi_norm(&nu.atom(k)) <= block.csv_window)
                .map(|k| (nu.atom(k), nu.weight(k)))
                .collect();
            let csv = format!("blowup_p{i:02}_s{j:02}.csv");
            DiscreteMeasure::from_atoms(mu.n(), window, nu.label())?.write_csv(ctx.sink.create(&csv)?)?;
            scales.push(BlowupScale {
                r,
                total_mass: nu.total_mass(),
                ball_masses: block.ball_radii.iter().copied().zip(masses).collect(),
                haar_discrepancy,
                csv,
            });
        }
        out.push(BlowupPoint {
            point: a.coords().to_vec(),
            scales,
        });
    }
    ctx.sink.json("tangent_blowup.json", "tangent blowup", &out, None)?;
    println!(
        "tangent blowup: {} point(s) x {} scale(s)",
        out.len(),
        block.scales.len()
    );
    Ok(())
}

#[derive(Serialize)]
struct ConeSubgroup {
    kind: SubgroupKind,
    basis: Vec<Vec<f64>>,
}

#[derive(Serialize)]
struct ConeOut {
    a: f64,
    delta: f64,
    radii: Vec<f64>,
    vertices: Vec<Vec<f64>>,
    subgroups: Vec<ConeSubgroup>,
    /// `table[vertex][subgroup][radius]`.
    table: Vec<Vec<Vec<f64>>>,
    floor: f64,
}

pub fn cone(ctx: &Ctx) -> CliResult<()> {
    let block = &ctx.cfg.diagnostics.cone;
    let (mu, dim, _) = ctx.measure(&block.measure)?;
    let a = dimension(block.a, dim)?;
    let family: Vec<SubgroupSpec> = match &block.subgroups {
        Some(list) => list
            .iter()
            .map(|g| g.build(&ctx.cfg.tolerances))
            .collect::<hriesz::Result<_>>()?,
        None => sample_dimension_family(
            mu.n(),
            block.family_dimension,
            block.family_count,
            &mut ctx.rng(Stream::Family),
        )?,
    };
    ensure(!mu.is_empty(), || "empty measure".into())?;
    let mut rng = ctx.rng(Stream::Vertices);
    let vertices: Vec<HPoint> = (0..block.vertices)
        .map(|_| mu.atom(rng.gen_range(0..mu.len())))
        .collect();
    let mut table = Vec::new();
    for k in &vertices {
        let mut row = Vec::new();
        for g in &family {
            row.push(cone_deficiency(
                &mu,
                a,
                k,
                g,
                block.delta,
                &block.radii,
                &ctx.cfg.tolerances,
                ctx.exec,
            )?);
        }
        table.push(row);
    }
    let floor = table.iter().flatten().flatten().copied().fold(f64::INFINITY, f64::min);
    write_rows(
        &ctx.sink.path("cone_deficiency.csv"),
        &["vertex_index", "subgroup_index", "radius", "ratio"],
        table.iter().enumerate().flat_map(|(i, row)| {
            row.iter().enumerate().flat_map(move |(j, vals)| {
                vals.iter()
                    .zip(&block.radii)
                    .map(move |(v, r)| vec![i.to_string(), j.to_string(), format!("{r:?}"), format!("{v:?}")])
            })
        }),
    )?;
    let out = ConeOut {
        a,
        delta: block.delta,
        radii: block.radii.clone(),
        vertices: vertices.iter().map(|p| p.coords().to_vec()).collect(),
        subgroups: family
            .iter()
            .map(|g| ConeSubgroup {
                kind: g.kind(),
                basis: g.basis().to_vec(),
            })
            .collect(),
        table,
        floor,
    };
    let check = block.expect_positive.then(|| VerdictCheck {
        expected: "positive floor".into(),
        observed: format!("floor {floor:e}"),
        ok: floor > 0.0,
    });
    ctx.sink
        .json("cone_deficiency.json", "cone-deficiency", &out, check.as_ref())?;
    println!(
        "cone-deficiency: {} vertices x {} subgroups, floor {floor:.4e}",
        vertices.len(),
        family.len()
    );
    check.map_or(Ok(()), |c| c.into_result("cone-deficiency"))
}

pub fn horest(ctx: &Ctx) -> CliResult<()> {
    let block = &ctx.cfg.diagnostics.horest;
    let seed = ctx.seed(Stream::Horest);
    let mut reports: Vec<HorestReport> = Vec::new();
    for &n in &block.n_values {
        for &delta in &block.deltas {
            let rep = horest_check(n, delta, block.trials, seed, ctx.exec)?;
            println!(
                "horest n={n} delta={delta}: {} tested, {} skipped, {} violations ({} below the linear bound)",
                rep.tested, rep.skipped, rep.violations, rep.linear_violations
            );
            reports.push(rep);
        }
    }
    let violations: usize = reports.iter().map(|r| r.violations).sum();
    let check = VerdictCheck {
        expected: "0 violations".into(),
        observed: format!("{violations} violations"),
        ok: violations == 0,
    };
    ctx.sink.json("horest.json", "horest", &reports, Some(&check))?;
    check.into_result("horest")
}
