//! Finitely supported measures on ℍⁿ.
//!
//! Atoms are stored as one flat coordinate buffer with stride `2n+1`, which
//! keeps the 16⁶-atom Cantor measures at 24 bytes per atom when the weights
//! are uniform.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::{self, Execution};
use crate::heis::{raw, HPoint};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Weights {
    Uniform(f64),
    PerAtom(Vec<f64>),
}

#[derive(Clone, Debug, PartialEq)]
pub struct DiscreteMeasure {
    n: usize,
    coords: Vec<f64>,
    weights: Weights,
    label: String,
    spacing: Option<f64>,
}

/// Ball and annulus statistics are only trusted when the radius is at least
/// this many atom spacings.
pub const RESOLUTION_FACTOR: f64 = 4.0;

fn check_weight(w: f64) -> Result<()> {
    if !(w.is_finite() && w > 0.0) {
        return Err(Error::param("weight", w, "atom weights must be positive"));
    }
    Ok(())
}

impl DiscreteMeasure {
    pub fn empty(n: usize, label: impl Into<String>) -> Self {
        DiscreteMeasure {
            n,
            coords: Vec::new(),
            weights: Weights::PerAtom(Vec::new()),
            label: label.into(),
            spacing: None,
        }
    }

    pub fn from_atoms(
        n: usize,
        atoms: impl IntoIterator<Item = (HPoint, f64)>,
        label: impl Into<String>,
    ) -> Result<Self> {
        let mut m = Self::empty(n, label);
        for (p, w) in atoms {
            m.push(&p, w)?;
        }
        Ok(m)
    }

    /// Builds a measure from a flat coordinate buffer where every atom has
    /// the same weight.
    pub fn uniform(n: usize, coords: Vec<f64>, weight: f64, label: impl Into<String>) -> Result<Self> {
        check_weight(weight)?;
        Self::from_flat(n, coords, Weights::Uniform(weight), label)
    }

    pub fn from_flat(n: usize, coords: Vec<f64>, weights: Weights, label: impl Into<String>) -> Result<Self> {
        let dim = 2 * n + 1;
        if n == 0 || !coords.len().is_multiple_of(dim) {
            return Err(Error::Invalid(format!(
                "coordinate buffer of length {} is not a multiple of {dim}",
                coords.len()
            )));
        }
        if coords.iter().any(|c| !c.is_finite()) {
            return Err(Error::NonFinite("measure coordinates"));
        }
        match &weights {
            Weights::Uniform(w) => check_weight(*w)?,
            Weights::PerAtom(ws) => {
                if ws.len() != coords.len() / dim {
                    return Err(Error::Invalid(format!(
                        "{} weights for {} atoms",
                        ws.len(),
                        coords.len() / dim
                    )));
                }
                ws.iter().try_for_each(|&w| check_weight(w))?;
            }
        }
        Ok(DiscreteMeasure {
            n,
            coords,
            weights,
            label: label.into(),
            spacing: None,
        })
    }

    pub fn push(&mut self, p: &HPoint, w: f64) -> Result<()> {
        if p.n() != self.n {
            return Err(Error::DimensionMismatch {
                left: self.n,
                right: p.n(),
            });
        }
        check_weight(w)?;
        if let Weights::Uniform(u) = self.weights {
            self.weights = Weights::PerAtom(vec![u; self.len()]);
        }
        if let Weights::PerAtom(ws) = &mut self.weights {
            ws.push(w);
        }
        self.coords.extend_from_slice(p.coords());
        Ok(())
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        2 * self.n + 1
    }

    pub fn len(&self) -> usize {
        self.coords.len() / self.dim()
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn set_label(&mut self, label: impl Into<String>) {
        self.label = label.into();
    }

    /// Typical distance between neighbouring atoms, when known.
    pub fn spacing(&self) -> Option<f64> {
        self.spacing
    }

    pub fn with_spacing(mut self, spacing: Option<f64>) -> Self {
        self.spacing = spacing;
        self
    }

    /// Smallest radius at which ball statistics are meaningful.
    pub fn resolution_floor(&self) -> f64 {
        self.spacing.map_or(0.0, |s| RESOLUTION_FACTOR * s)
    }

    pub fn check_radius(&self, radius: f64) -> Result<()> {
        let floor = self.resolution_floor();
        // exact multiples of the spacing are admitted despite rounding
        if radius < floor * (1.0 - 1e-9) {
            return Err(Error::BelowResolution { radius, floor });
        }
        Ok(())
    }

    pub fn coords_flat(&self) -> &[f64] {
        &self.coords
    }

    pub fn weights(&self) -> &Weights {
        &self.weights
    }

    pub fn point(&self, i: usize) -> &[f64] {
        let d = self.dim();
        &self.coords[i * d..(i + 1) * d]
    }

    pub fn weight(&self, i: usize) -> f64 {
        match &self.weights {
            Weights::Uniform(w) => *w,
            Weights::PerAtom(ws) => ws[i],
        }
    }

    pub fn atom(&self, i: usize) -> HPoint {
        HPoint::from_raw(self.n, self.point(i))
    }

    pub fn iter(&self) -> impl Iterator<Item = (&[f64], f64)> + '_ {
        self.coords
            .chunks_exact(self.dim())
            .enumerate()
            .map(move |(i, c)| (c, self.weight(i)))
    }

    pub fn total_mass(&self) -> f64 {
        match &self.weights {
            Weights::Uniform(w) => w * self.len() as f64,
            Weights::PerAtom(ws) => ws.iter().sum(),
        }
    }

    /// Multiplies every weight by `c`.
    pub fn scaled(&self, c: f64) -> Result<Self> {
        check_weight(c)?;
        let weights = match &self.weights {
            Weights::Uniform(w) => Weights::Uniform(w * c),
            Weights::PerAtom(ws) => Weights::PerAtom(ws.iter().map(|w| w * c).collect()),
        };
        Ok(DiscreteMeasure {
            weights,
            ..self.clone()
        })
    }

    /// Push-forward of the measure under `f`, applied in place to each atom.
    pub fn map_points(&self, f: impl Fn(&[f64], &mut [f64])) -> Self {
        let d = self.dim();
        let mut coords = vec![0.0; self.coords.len()];
        for (src, dst) in self.coords.chunks_exact(d).zip(coords.chunks_exact_mut(d)) {
            f(src, dst);
        }
        DiscreteMeasure { coords, ..self.clone() }
    }

    fn check_point(&self, p: &HPoint) -> Result<()> {
        if p.n() != self.n {
            return Err(Error::DimensionMismatch {
                left: self.n,
                right: p.n(),
            });
        }
        Ok(())
    }

    /// Masses `μ(B(center, r))` of closed balls for every radius in one pass.
    pub fn ball_masses(&self, center: &HPoint, radii: &[f64], exec: Execution) -> Result<Vec<f64>> {
        self.check_point(center)?;
        let n = self.n;
        let c = center.coords();
        let k = radii.len();
        Ok(exec::chunked_reduce(
            self.len(),
            exec,
            vec![0.0; k],
            |range| {
                let mut acc = vec![0.0; k];
                for i in range {
                    let d = raw::dist(n, c, self.point(i));
                    let w = self.weight(i);
                    for (a, &r) in acc.iter_mut().zip(radii) {
                        if d <= r {
                            *a += w;
                        }
                    }
                }
                acc
            },
            exec::add_vecs,
        ))
    }

    pub fn mass_in_ball(&self, center: &HPoint, radius: f64, exec: Execution) -> Result<f64> {
        Ok(self.ball_masses(center, &[radius], exec)?[0])
    }

    /// Writes the `x1,...,x{2n+1},weight` CSV schema.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = std::io::BufWriter::new(w);
        let header: Vec<String> = (1..=self.dim())
            .map(|i| format!("x{i}"))
            .chain(std::iter::once("weight".to_string()))
            .collect();
        writeln!(out, "{}", header.join(","))?;
        for (p, wt) in self.iter() {
            for c in p {
                write!(out, "{c:?},")?;
            }
            writeln!(out, "{wt:?}")?;
        }
        out.flush()?;
        Ok(())
    }

    /// Reads the CSV schema written by [`write_csv`](Self::write_csv); `n` is
    /// inferred from the header.
    pub fn read_csv<R: Read>(r: R, label: impl Into<String>) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(r);
        let headers = rdr.headers()?.clone();
        let cols = headers.len();
        if cols < 4 || cols % 2 != 0 || headers.get(cols - 1) != Some("weight") {
            return Err(Error::Invalid(format!(
                "unexpected measure CSV header: {:?}",
                headers.iter().collect::<Vec<_>>()
            )));
        }
        for (i, h) in headers.iter().take(cols - 1).enumerate() {
            if h != format!("x{}", i + 1) {
                return Err(Error::Invalid(format!("unexpected column name {h:?}")));
            }
        }
        let n = (cols - 2) / 2;
        let mut coords = Vec::new();
        let mut weights = Vec::new();
        for rec in rdr.records() {
            let rec = rec?;
            for (i, field) in rec.iter().enumerate() {
                let v: f64 = field
                    .trim()
                    .parse()
                    .map_err(|_| Error::Invalid(format!("bad number {field:?} in measure CSV")))?;
                if i + 1 == cols {
                    weights.push(v);
                } else {
                    coords.push(v);
                }
            }
        }
        Self::from_flat(n, coords, Weights::PerAtom(weights), label)
    }

    pub fn to_json(&self) -> MeasureJson {
        MeasureJson {
            n: self.n,
            label: self.label.clone(),
            spacing: self.spacing,
            points: self.coords.chunks_exact(self.dim()).map(|c| c.to_vec()).collect(),
            weights: (0..self.len()).map(|i| self.weight(i)).collect(),
        }
    }

    pub fn from_json(j: MeasureJson) -> Result<Self> {
        let dim = 2 * j.n + 1;
        let mut coords = Vec::with_capacity(j.points.len() * dim);
        for p in &j.points {
            if p.len() != dim {
                return Err(Error::CoordinateCount {
                    expected: dim,
                    got: p.len(),
                });
            }
            coords.extend_from_slice(p);
        }
        Ok(Self::from_flat(j.n, coords, Weights::PerAtom(j.weights), j.label)?.with_spacing(j.spacing))
    }
}

/// JSON form of a [`DiscreteMeasure`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeasureJson {
    pub n: usize,
    pub label: String,
    #[serde(default)]
    pub spacing: Option<f64>,
    pub points: Vec<Vec<f64>>,
    pub weights: Vec<f64>,
}
