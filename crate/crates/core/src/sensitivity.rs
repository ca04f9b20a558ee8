//! Total-effect Sobol indices from a Saltelli design (Jansen estimator), with
//! replication over independent designs and sweeps over pillar sizes.

use std::io::Write;
use std::path::Path;

use log::warn;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::QoiModel;
use crate::rng::{derive_seed, streams};
use crate::sampling::{saltelli_matrices, ParamBox, SampleMatrix};

/// Outputs of a batch, one per input row, with failed rows left empty.
#[derive(Debug, Clone, PartialEq)]
pub struct QoiBatch {
    pub values: Vec<Option<f64>>,
    /// Row index and reason of every failed evaluation.
    pub failures: Vec<(usize, String)>,
}

/// Largest tolerated fraction of failed rows in a batch.
pub const MAX_FAILURE_FRACTION: f64 = 0.01;

fn check_failures(failed: usize, total: usize) -> Result<()> {
    if failed as f64 > MAX_FAILURE_FRACTION * total as f64 {
        return Err(Error::BatchFailure { failed, total });
    }
    Ok(())
}

fn collect_batch(results: Vec<Result<f64>>) -> Result<QoiBatch> {
    let total = results.len();
    let mut values = Vec::with_capacity(total);
    let mut failures = Vec::new();
    for (i, r) in results.into_iter().enumerate() {
        match r {
            Ok(v) if v.is_finite() => values.push(Some(v)),
            Ok(v) => {
                values.push(None);
                failures.push((i, format!("non-finite output {v}")));
            }
            Err(e) => {
                values.push(None);
                failures.push((i, e.to_string()));
            }
        }
    }
    for (i, reason) in &failures {
        warn!("row {i} failed: {reason}");
    }
    check_failures(failures.len(), total)?;
    Ok(QoiBatch { values, failures })
}

/// Evaluates `model` at every row of `matrix` for one size, in parallel on
/// the current rayon pool. Output order follows row order.
pub fn evaluate_qoi_batch<M: QoiModel>(model: &M, matrix: &SampleMatrix, size: f64) -> Result<QoiBatch> {
    let results: Vec<Result<f64>> = (0..matrix.n_rows())
        .into_par_iter()
        .map(|i| model.evaluate(matrix.row(i), size))
        .collect();
    collect_batch(results)
}

/// Unbiased sample variance; `None` for fewer than two values.
fn sample_variance(v: &[f64]) -> Option<f64> {
    if v.len() < 2 {
        return None;
    }
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    Some(v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0))
}

/// Jansen total-effect estimates S_k = (1/2N) Σ (y_A − y_AB_k)² / V, where V
/// is the unbiased variance of the pooled A and B outputs. Missing rows are
/// dropped pairwise for each k.
pub fn total_effect_indices(
    y_a: &[Option<f64>],
    y_b: &[Option<f64>],
    y_ab: &[Vec<Option<f64>>],
) -> Result<Vec<f64>> {
    let n = y_a.len();
    if y_b.len() != n || y_ab.iter().any(|v| v.len() != n) {
        return Err(Error::LengthMismatch("Saltelli outputs differ in length".into()));
    }
    let pooled: Vec<f64> = y_a.iter().chain(y_b).flatten().copied().collect();
    let var = sample_variance(&pooled).unwrap_or(0.0);
    if var.is_nan() || var < 1e-30 {
        return Err(Error::ZeroVariance(var));
    }
    y_ab.iter()
        .map(|yk| {
            let (sum, count) = y_a
                .iter()
                .zip(yk)
                .filter_map(|(a, b)| Some((a.as_ref()? - b.as_ref()?).powi(2)))
                .fold((0.0, 0usize), |(s, c), d| (s + d, c + 1));
            if count == 0 {
                return Err(Error::EmptySamples);
            }
            Ok(sum / (2.0 * count as f64) / var)
        })
        .collect()
}

/// Indices for one output (a size, or the size average) over replicates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndexSet {
    /// Pillar size in nm, or `None` for the across-size mean output.
    pub size: Option<f64>,
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
    /// `replicates[r][k]`.
    pub replicates: Vec<Vec<f64>>,
}

impl IndexSet {
    fn from_replicates(size: Option<f64>, replicates: Vec<Vec<f64>>) -> Self {
        let k = replicates.first().map(Vec::len).unwrap_or(0);
        let col = |j: usize| -> Vec<f64> { replicates.iter().map(|r| r[j]).collect() };
        let mean = (0..k)
            .map(|j| col(j).iter().sum::<f64>() / replicates.len() as f64)
            .collect();
        let std = (0..k)
            .map(|j| sample_variance(&col(j)).map(f64::sqrt).unwrap_or(0.0))
            .collect();
        Self {
            size,
            mean,
            std,
            replicates,
        }
    }

    /// Replicate std divided by mean, averaged over parameters.
    pub fn mean_relative_std(&self) -> f64 {
        let rel: Vec<f64> = self
            .mean
            .iter()
            .zip(&self.std)
            .filter(|(m, _)| m.abs() > 0.0)
            .map(|(m, s)| s / m.abs())
            .collect();
        rel.iter().sum::<f64>() / rel.len().max(1) as f64
    }

    /// Parameter indices sorted by decreasing mean index.
    pub fn ranking(&self) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..self.mean.len()).collect();
        idx.sort_by(|&a, &b| self.mean[b].total_cmp(&self.mean[a]));
        idx
    }
}

/// Total-effect indices per size and for the size-averaged output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensitivityReport {
    pub parameters: Vec<String>,
    pub sizes: Vec<f64>,
    pub n: usize,
    pub replicates: usize,
    pub seed: u64,
    /// Model evaluations per size, R·N·(K + 2).
    pub evaluations_per_size: usize,
    pub failed_evaluations: usize,
    pub per_size: Vec<IndexSet>,
    /// Present when more than one size is swept.
    pub averaged: Option<IndexSet>,
}

impl SensitivityReport {
    /// Index set of the size-averaged output, or of the single size.
    pub fn headline(&self) -> &IndexSet {
        self.averaged.as_ref().unwrap_or(&self.per_size[0])
    }

    pub fn for_size(&self, size: f64) -> Option<&IndexSet> {
        self.per_size.iter().find(|s| s.size == Some(size))
    }

    /// Rows `parameter,size,S_mean,S_std`; the averaged output uses `mean`
    /// in the size column.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["parameter", "size", "S_mean", "S_std"])?;
        for set in self.per_size.iter().chain(self.averaged.as_ref()) {
            let size = set.size.map(|s| s.to_string()).unwrap_or_else(|| "mean".into());
            for (k, name) in self.parameters.iter().enumerate() {
                w.write_record([
                    name.clone(),
                    size.clone(),
                    format!("{:e}", set.mean[k]),
                    format!("{:e}", set.std[k]),
                ])?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

/// Outputs of one replicate for one Saltelli design.
struct DesignOutputs {
    a: Vec<Option<f64>>,
    b: Vec<Option<f64>>,
    ab: Vec<Vec<Option<f64>>>,
}

/// Replicated total-effect analysis over several sizes. Each replicate
/// draws a fresh design from a seed derived from `seed`; within a replicate
/// the same parameter rows are used for every size.
pub fn size_sweep_sensitivity<M: QoiModel>(
    model: &M,
    bx: &ParamBox,
    sizes: &[f64],
    n: usize,
    replicates: usize,
    seed: u64,
) -> Result<SensitivityReport> {
    size_sweep_with_designs(model, bx, sizes, n, replicates, seed).map(|(r, _)| r)
}

/// First-replicate design and its outputs per size (`None` where a solve failed).
pub type ScatterDesign = (SampleMatrix, Vec<Vec<Option<f64>>>);

/// As [`size_sweep_sensitivity`], also returning the A matrix of the first
/// replicate and its per-size outputs (for scatter plots).
pub fn size_sweep_with_designs<M: QoiModel>(
    model: &M,
    bx: &ParamBox,
    sizes: &[f64],
    n: usize,
    replicates: usize,
    seed: u64,
) -> Result<(SensitivityReport, Option<ScatterDesign>)> {
    if sizes.is_empty() {
        return Err(Error::InvalidConfig("at least one size is required".into()));
    }
    if replicates == 0 {
        return Err(Error::InvalidConfig("at least one replicate is required".into()));
    }
    let k = bx.dim();
    let mut per_size_reps: Vec<Vec<Vec<f64>>> = vec![Vec::new(); sizes.len()];
    let mut avg_reps: Vec<Vec<f64>> = Vec::new();
    let mut failed = 0;
    let mut scatter = None;

    for r in 0..replicates {
        let rep_seed = derive_seed(seed, streams::REPLICATE_BASE + r as u64);
        let design = saltelli_matrices(bx, n, rep_seed)?;
        let matrices: Vec<&SampleMatrix> = std::iter::once(&design.a)
            .chain(std::iter::once(&design.b))
            .chain(design.ab.iter())
            .collect();
        // one flat parallel pass over (size, matrix, row)
        let jobs: Vec<(usize, usize, usize)> = (0..sizes.len())
            .flat_map(|s| (0..matrices.len()).flat_map(move |m| (0..n).map(move |i| (s, m, i))))
            .collect();
        let results: Vec<Result<f64>> = jobs
            .par_iter()
            .map(|&(s, m, i)| model.evaluate(matrices[m].row(i), sizes[s]))
            .collect();
        let per_matrix = matrices.len() * n;
        let mut outputs = Vec::with_capacity(sizes.len());
        let mut chunks = results.into_iter();
        for _ in sizes {
            let batch = collect_batch(chunks.by_ref().take(per_matrix).collect())?;
            failed += batch.failures.len();
            let mut vals = batch.values.chunks(n).map(<[_]>::to_vec);
            let a = vals.next().expect("A outputs");
            let b = vals.next().expect("B outputs");
            let ab: Vec<Vec<Option<f64>>> = vals.collect();
            outputs.push(DesignOutputs { a, b, ab });
        }

        for (s, out) in outputs.iter().enumerate() {
            per_size_reps[s].push(total_effect_indices(&out.a, &out.b, &out.ab)?);
        }
        if sizes.len() > 1 {
            let mean_of = |pick: &dyn Fn(&DesignOutputs) -> &Vec<Option<f64>>| -> Vec<Option<f64>> {
                (0..n)
                    .map(|i| {
                        let mut acc = 0.0;
                        for out in &outputs {
                            acc += pick(out)[i]?;
                        }
                        Some(acc / outputs.len() as f64)
                    })
                    .collect()
            };
            let a = mean_of(&|o| &o.a);
            let b = mean_of(&|o| &o.b);
            let ab: Vec<Vec<Option<f64>>> = (0..k).map(|j| mean_of(&|o| &o.ab[j])).collect();
            avg_reps.push(total_effect_indices(&a, &b, &ab)?);
        }
        if r == 0 {
            scatter = Some((design.a.clone(), outputs.iter().map(|o| o.a.clone()).collect()));
        }
    }

    let per_size = sizes
        .iter()
        .zip(per_size_reps)
        .map(|(&s, reps)| IndexSet::from_replicates(Some(s), reps))
        .collect();
    let averaged = (sizes.len() > 1).then(|| IndexSet::from_replicates(None, avg_reps));
    Ok((
        SensitivityReport {
            parameters: bx.names().iter().map(|s| s.to_string()).collect(),
            sizes: sizes.to_vec(),
            n,
            replicates,
            seed,
            evaluations_per_size: replicates * n * (k + 2),
            failed_evaluations: failed,
            per_size,
            averaged,
        },
        scatter,
    ))
}

/// Writes parameter columns plus a `qoi` column; missing outputs are `NaN`.
pub fn scatter_export<W: Write>(
    matrix: &SampleMatrix,
    qoi: &[Option<f64>],
    names: &[&str],
    writer: W,
) -> Result<()> {
    if qoi.len() != matrix.n_rows() {
        return Err(Error::LengthMismatch(format!(
            "{} outputs for {} rows",
            qoi.len(),
            matrix.n_rows()
        )));
    }
    if names.len() != matrix.n_cols() {
        return Err(Error::LengthMismatch("parameter names do not match columns".into()));
    }
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(names.iter().copied().chain(std::iter::once("qoi")))?;
    for (row, q) in matrix.rows().zip(qoi) {
        let mut rec: Vec<String> = row.iter().map(|v| format!("{v:e}")).collect();
        rec.push(q.map(|v| format!("{v:e}")).unwrap_or_else(|| "NaN".into()));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

pub fn save_scatter(matrix: &SampleMatrix, qoi: &[Option<f64>], names: &[&str], path: &Path) -> Result<()> {
    let file = std::fs::File::create(path)?;
    scatter_export(matrix, qoi, names, std::io::BufWriter::new(file))
}

/// Closed-form test models with known total-effect indices.
pub mod test_models {
    use super::*;

    /// Q = Σ a_i x_i.
    #[derive(Debug, Clone)]
    pub struct Additive {
        pub coeffs: Vec<f64>,
    }

    impl Additive {
        /// Total indices for independent inputs of equal variance.
        pub fn analytic_total(&self) -> Vec<f64> {
            let s: f64 = self.coeffs.iter().map(|a| a * a).sum();
            self.coeffs.iter().map(|a| a * a / s).collect()
        }
    }

    impl QoiModel for Additive {
        fn evaluate(&self, x: &[f64], _size: f64) -> Result<f64> {
            Ok(self.coeffs.iter().zip(x).map(|(a, v)| a * v).sum())
        }
    }

    /// sin x1 + a sin² x2 + b x3⁴ sin x1 on [−π, π]³.
    #[derive(Debug, Clone)]
    pub struct Ishigami {
        pub a: f64,
        pub b: f64,
    }

    impl Default for Ishigami {
        fn default() -> Self {
            Self { a: 7.0, b: 0.1 }
        }
    }

    impl Ishigami {
        pub fn input_box() -> ParamBox {
            let pi = std::f64::consts::PI;
            ParamBox {
                ranges: (1..=3)
                    .map(|i| crate::sampling::ParamRange::new(format!("x{i}"), -pi, pi))
                    .collect(),
            }
        }

        /// Closed-form total-effect indices.
        pub fn analytic_total(&self) -> [f64; 3] {
            let pi = std::f64::consts::PI;
            let (a, b) = (self.a, self.b);
            let v1 = 0.5 * (1.0 + b * pi.powi(4) / 5.0).powi(2);
            let v2 = a * a / 8.0;
            let v13 = b * b * pi.powi(8) * (1.0 / 18.0 - 1.0 / 50.0);
            let v = v1 + v2 + v13;
            [(v1 + v13) / v, v2 / v, v13 / v]
        }
    }

    impl QoiModel for Ishigami {
        fn evaluate(&self, x: &[f64], _size: f64) -> Result<f64> {
            Ok(x[0].sin() + self.a * x[1].sin().powi(2) + self.b * x[2].powi(4) * x[0].sin())
        }
    }

    /// Always returns the same value.
    #[derive(Debug, Clone)]
    pub struct Constant(pub f64);

    impl QoiModel for Constant {
        fn evaluate(&self, _x: &[f64], _size: f64) -> Result<f64> {
            Ok(self.0)
        }
    }
}
