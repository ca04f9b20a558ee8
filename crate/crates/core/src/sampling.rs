//! Uniform parameter boxes, Latin hypercube sampling and Saltelli matrices.

use std::io::Write;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::material::PARAM_NAMES;
use crate::rng::{stream_rng, streams};

/// Uniform prior range of one parameter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamRange {
    pub name: String,
    pub lower: f64,
    pub upper: f64,
}

impl ParamRange {
    pub fn new(name: impl Into<String>, lower: f64, upper: f64) -> Self {
        Self {
            name: name.into(),
            lower,
            upper,
        }
    }

    pub fn width(&self) -> f64 {
        self.upper - self.lower
    }

    pub fn contains(&self, x: f64) -> bool {
        x >= self.lower && x <= self.upper
    }

    /// Variance of U(lower, upper).
    pub fn variance(&self) -> f64 {
        self.width().powi(2) / 12.0
    }
}

/// Product of independent uniform ranges, one per calibrated parameter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ParamBox {
    pub ranges: Vec<ParamRange>,
}

impl ParamBox {
    pub fn new(ranges: Vec<ParamRange>) -> Result<Self> {
        let b = Self { ranges };
        b.validate()?;
        Ok(b)
    }

    /// Prior ranges for (ℓ_dis, ℓ_en, Y, h, r, E) in nm, GPa and dimensionless.
    pub fn sgp_default() -> Self {
        let bounds = [
            (40.0, 900.0),
            (120.0, 450.0),
            (0.02, 0.21),
            (1e-5, 0.75),
            (0.2, 450.0),
            (118.43, 140.64),
        ];
        Self {
            ranges: PARAM_NAMES
                .iter()
                .zip(bounds)
                .map(|(n, (lo, hi))| ParamRange::new(*n, lo, hi))
                .collect(),
        }
    }

    /// `k` copies of U(0, 1), named x1..xk.
    pub fn unit(k: usize) -> Self {
        Self {
            ranges: (1..=k)
                .map(|i| ParamRange::new(format!("x{i}"), 0.0, 1.0))
                .collect(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.ranges.is_empty() {
            return Err(Error::InvalidConfig("parameter box is empty".into()));
        }
        for (i, r) in self.ranges.iter().enumerate() {
            if !(r.lower.is_finite() && r.upper.is_finite() && r.lower < r.upper) {
                return Err(Error::InvalidConfig(format!(
                    "range `{}` needs finite lower < upper, got [{}, {}]",
                    r.name, r.lower, r.upper
                )));
            }
            if self.ranges[..i].iter().any(|o| o.name == r.name) {
                return Err(Error::InvalidConfig(format!("duplicate parameter `{}`", r.name)));
            }
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.ranges.len()
    }

    pub fn names(&self) -> Vec<&str> {
        self.ranges.iter().map(|r| r.name.as_str()).collect()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.ranges.iter().position(|r| r.name == name)
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dim() && self.ranges.iter().zip(x).all(|(r, v)| r.contains(*v))
    }

    /// Maps a point of the unit cube onto the box.
    pub fn from_unit(&self, z: &[f64]) -> Vec<f64> {
        self.ranges
            .iter()
            .zip(z)
            .map(|(r, v)| r.lower + v * r.width())
            .collect()
    }

    /// Inverse of [`ParamBox::from_unit`].
    pub fn to_unit(&self, x: &[f64]) -> Vec<f64> {
        self.ranges
            .iter()
            .zip(x)
            .map(|(r, v)| (v - r.lower) / r.width())
            .collect()
    }
}

/// Which Saltelli matrix a sample matrix is.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MatrixKind {
    Lhs,
    A,
    B,
    /// A with column k taken from B.
    AB(usize),
}

/// Row-major N × K matrix of parameter samples.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleMatrix {
    n: usize,
    k: usize,
    data: Vec<f64>,
    pub seed: u64,
    pub kind: MatrixKind,
}

impl SampleMatrix {
    pub fn from_rows(rows: &[Vec<f64>], seed: u64, kind: MatrixKind) -> Result<Self> {
        let k = rows.first().map(Vec::len).unwrap_or(0);
        if rows.iter().any(|r| r.len() != k) {
            return Err(Error::LengthMismatch("rows of unequal length".into()));
        }
        Ok(Self {
            n: rows.len(),
            k,
            data: rows.concat(),
            seed,
            kind,
        })
    }

    pub fn n_rows(&self) -> usize {
        self.n
    }

    pub fn n_cols(&self) -> usize {
        self.k
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.k..(i + 1) * self.k]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> + '_ {
        self.data.chunks_exact(self.k.max(1)).take(self.n)
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.k + j]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.n).map(|i| self.get(i, j)).collect()
    }

    /// Writes the matrix with the box's parameter names as header.
    pub fn write_csv<W: Write>(&self, names: &[&str], writer: W) -> Result<()> {
        if names.len() != self.k {
            return Err(Error::LengthMismatch(format!(
                "{} names for {} columns",
                names.len(),
                self.k
            )));
        }
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(names)?;
        for row in self.rows() {
            w.write_record(row.iter().map(|v| format!("{v:e}")))?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn save_csv(&self, names: &[&str], path: &Path) -> Result<()> {
        let file = std::fs::File::create(path)?;
        self.write_csv(names, std::io::BufWriter::new(file))
    }
}

fn lhs_with_rng<R: Rng>(bx: &ParamBox, n: usize, rng: &mut R) -> Vec<f64> {
    let k = bx.dim();
    let mut data = vec![0.0; n * k];
    let mut perm: Vec<usize> = (0..n).collect();
    for (j, r) in bx.ranges.iter().enumerate() {
        perm.shuffle(rng);
        for (i, &stratum) in perm.iter().enumerate() {
            let u: f64 = rng.random();
            let v = r.lower + (stratum as f64 + u) / n as f64 * r.width();
            data[i * k + j] = v.min(r.upper);
        }
    }
    data
}

/// Latin hypercube sample of `n` points: one point per stratum per column,
/// with independent permutations across columns.
pub fn lhs_sample(bx: &ParamBox, n: usize, seed: u64) -> Result<SampleMatrix> {
    lhs_stream(bx, n, seed, streams::LHS_A, MatrixKind::Lhs)
}

fn lhs_stream(bx: &ParamBox, n: usize, seed: u64, stream: u64, kind: MatrixKind) -> Result<SampleMatrix> {
    bx.validate()?;
    if n == 0 {
        return Err(Error::InvalidConfig("sample count must be >= 1".into()));
    }
    let mut rng = stream_rng(seed, stream);
    Ok(SampleMatrix {
        n,
        k: bx.dim(),
        data: lhs_with_rng(bx, n, &mut rng),
        seed,
        kind,
    })
}

/// The A, B and AB_k matrices of the Saltelli design.
#[derive(Debug, Clone, PartialEq)]
pub struct SaltelliDesign {
    pub a: SampleMatrix,
    pub b: SampleMatrix,
    pub ab: Vec<SampleMatrix>,
}

impl SaltelliDesign {
    /// Number of model evaluations the design requires, N(K + 2).
    pub fn n_evaluations(&self) -> usize {
        self.a.n_rows() * (self.ab.len() + 2)
    }
}

/// Two independent LHS draws A and B plus, for each k, A with column k
/// replaced by that of B.
pub fn saltelli_matrices(bx: &ParamBox, n: usize, seed: u64) -> Result<SaltelliDesign> {
    if n < 2 {
        return Err(Error::InvalidConfig("Saltelli design needs n >= 2".into()));
    }
    let a = lhs_stream(bx, n, seed, streams::LHS_A, MatrixKind::A)?;
    let b = lhs_stream(bx, n, seed, streams::LHS_B, MatrixKind::B)?;
    let k = bx.dim();
    let ab = (0..k)
        .map(|col| {
            let mut m = a.clone();
            m.kind = MatrixKind::AB(col);
            for i in 0..n {
                m.data[i * k + col] = b.data[i * k + col];
            }
            m
        })
        .collect();
    Ok(SaltelliDesign { a, b, ab })
}
