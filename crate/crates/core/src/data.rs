//! Replicate stress–strain datasets: CSV ingestion and export, a synthetic
//! generator with curve-level and point-level noise, and train/test splits.

use std::path::{Path, PathBuf};

use log::warn;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::curve::StressStrainCurve;
use crate::error::{Error, Result};
use crate::material::SgpParams;
use crate::model::SgpModel;
use crate::rng::{derive_seed, stream_rng, streams};

/// Pillar sizes (nm) of the reference dataset layout.
pub const DEFAULT_SIZES: [f64; 5] = [200.0, 300.0, 500.0, 700.0, 1000.0];

fn same_size(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-9 * a.abs().max(b.abs())
}

/// One replicate curve at one size.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetEntry {
    /// Pillar size in nm.
    pub size: f64,
    pub replicate: usize,
    pub curve: StressStrainCurve,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Provenance {
    Ingested,
    Synthetic,
}

/// Spread of the replicate curves at one size.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SizeNoise {
    pub size: f64,
    pub replicates: usize,
    /// Square root of the across-replicate variance averaged over strain
    /// points (GPa).
    pub pooled_std: f64,
    /// Across-replicate std divided by the mean stress, averaged over strain
    /// points with non-zero mean.
    pub relative_std: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub entries: Vec<DatasetEntry>,
    pub provenance: Provenance,
}

impl Dataset {
    pub fn new(entries: Vec<DatasetEntry>, provenance: Provenance) -> Result<Self> {
        let d = Self { entries, provenance };
        d.validate()?;
        Ok(d)
    }

    pub fn validate(&self) -> Result<()> {
        if self.entries.is_empty() {
            return Err(Error::Validation("dataset has no curves".into()));
        }
        for e in &self.entries {
            if !(e.size > 0.0 && e.size.is_finite()) {
                return Err(Error::Validation(format!("invalid size {}", e.size)));
            }
            if e.curve.len() < 2 {
                return Err(Error::Validation(format!(
                    "curve L{} r{} has fewer than 2 points",
                    e.size, e.replicate
                )));
            }
            if !e.curve.is_strain_monotone() {
                return Err(Error::Validation(format!(
                    "curve L{} r{} has a non-monotone strain grid",
                    e.size, e.replicate
                )));
            }
        }
        Ok(())
    }

    /// Distinct sizes in increasing order.
    pub fn sizes(&self) -> Vec<f64> {
        let mut s: Vec<f64> = Vec::new();
        for e in &self.entries {
            if !s.iter().any(|&v| same_size(v, e.size)) {
                s.push(e.size);
            }
        }
        s.sort_by(f64::total_cmp);
        s
    }

    pub fn curves_for(&self, size: f64) -> Vec<&StressStrainCurve> {
        self.entries
            .iter()
            .filter(|e| same_size(e.size, size))
            .map(|e| &e.curve)
            .collect()
    }

    pub fn has_size(&self, size: f64) -> bool {
        self.entries.iter().any(|e| same_size(e.size, size))
    }

    /// Replicate spread per size. Curves are compared on the grid of the
    /// first replicate.
    pub fn noise_summary(&self) -> Vec<SizeNoise> {
        self.sizes()
            .into_iter()
            .map(|size| {
                let curves = self.curves_for(size);
                let grid = &curves[0].strain;
                let cols: Vec<Vec<f64>> = curves.iter().map(|c| c.resample(grid)).collect();
                let nrep = curves.len();
                let mut var_sum = 0.0;
                let mut rel_sum = 0.0;
                let mut rel_count = 0usize;
                for i in 0..grid.len() {
                    let vals: Vec<f64> = cols.iter().map(|c| c[i]).collect();
                    let mean = vals.iter().sum::<f64>() / nrep as f64;
                    let var = if nrep > 1 {
                        vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (nrep - 1) as f64
                    } else {
                        0.0
                    };
                    var_sum += var;
                    if mean.abs() > 0.0 {
                        rel_sum += var.sqrt() / mean.abs();
                        rel_count += 1;
                    }
                }
                SizeNoise {
                    size,
                    replicates: nrep,
                    pooled_std: (var_sum / grid.len() as f64).sqrt(),
                    relative_std: rel_sum / rel_count.max(1) as f64,
                }
            })
            .collect()
    }

    /// Writes one `L<size>_r<replicate>.csv` per entry into `dir`.
    pub fn export(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        std::fs::create_dir_all(dir)?;
        self.entries
            .iter()
            .map(|e| {
                let path = dir.join(file_name(e.size, e.replicate));
                e.curve.save_csv(&path)?;
                Ok(path)
            })
            .collect()
    }

    /// Reads every `L<size>_r<replicate>.csv` file of `dir`. Other files are
    /// skipped.
    pub fn ingest(dir: &Path) -> Result<Self> {
        let mut files: Vec<(f64, usize, PathBuf)> = Vec::new();
        for item in std::fs::read_dir(dir)? {
            let path = item?.path();
            let Some(name) = path.file_name().and_then(|n| n.to_str()) else {
                continue;
            };
            match parse_file_name(name) {
                Some((size, rep)) => files.push((size, rep, path)),
                None => {
                    if name.ends_with(".csv") {
                        warn!("skipping {name}: not named L<size>_r<replicate>.csv");
                    }
                }
            }
        }
        files.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let curves: Vec<Result<StressStrainCurve>> = files
            .par_iter()
            .map(|(_, _, p)| StressStrainCurve::load_csv(p))
            .collect();
        let mut entries = Vec::with_capacity(files.len());
        for ((size, replicate, path), curve) in files.iter().zip(curves) {
            let curve = curve?;
            if !curve.is_strain_monotone() {
                return Err(Error::Validation(format!(
                    "{}: strain column is not strictly increasing",
                    path.display()
                )));
            }
            entries.push(DatasetEntry {
                size: *size,
                replicate: *replicate,
                curve,
            });
        }
        Self::new(entries, Provenance::Ingested)
    }
}

pub fn file_name(size: f64, replicate: usize) -> String {
    format!("L{size}_r{replicate}.csv")
}

fn parse_file_name(name: &str) -> Option<(f64, usize)> {
    let stem = name.strip_suffix(".csv")?.strip_prefix('L')?;
    let (size, rep) = stem.split_once("_r")?;
    let size: f64 = size.parse().ok()?;
    (size > 0.0 && size.is_finite()).then_some(())?;
    Some((size, rep.parse().ok()?))
}

/// Replicate noise: a mean-one lognormal factor per curve times the clean
/// curve, plus independent Gaussian noise per point with std proportional
/// to the local stress. The two relative variances add up to
/// `relative_std²`; `curve_fraction` of it is carried by the curve factor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NoiseModel {
    pub relative_std: f64,
    pub curve_fraction: f64,
}

impl Default for NoiseModel {
    fn default() -> Self {
        Self {
            relative_std: 0.2,
            curve_fraction: 0.5,
        }
    }
}

impl NoiseModel {
    pub fn none() -> Self {
        Self {
            relative_std: 0.0,
            curve_fraction: 0.5,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.relative_std >= 0.0 && self.relative_std.is_finite()) {
            return Err(Error::InvalidConfig("noise relative_std must be >= 0".into()));
        }
        if !(0.0..=1.0).contains(&self.curve_fraction) {
            return Err(Error::InvalidConfig("noise curve_fraction must lie in [0, 1]".into()));
        }
        Ok(())
    }

    /// Log-space std of the curve factor whose variance is the curve share.
    fn log_sigma(&self) -> f64 {
        (self.curve_fraction * self.relative_std.powi(2)).ln_1p().sqrt()
    }

    fn point_std(&self) -> f64 {
        ((1.0 - self.curve_fraction) * self.relative_std.powi(2)).sqrt()
    }

    pub fn apply<R: Rng>(&self, clean: &StressStrainCurve, rng: &mut R) -> StressStrainCurve {
        let s = self.log_sigma();
        let z: f64 = StandardNormal.sample(rng);
        let factor = (s * z - 0.5 * s * s).exp();
        let ps = self.point_std();
        let stress = clean
            .stress
            .iter()
            .map(|&y| {
                let e: f64 = StandardNormal.sample(rng);
                y * factor + ps * y.abs() * e
            })
            .collect();
        StressStrainCurve {
            strain: clean.strain.clone(),
            stress,
        }
    }
}

/// Solves the model at `truth` for each size and draws `replicates` noisy
/// copies. Each (size, replicate) pair has its own random stream.
pub fn generate_synthetic(
    model: &SgpModel,
    truth: &SgpParams,
    sizes: &[f64],
    replicates: usize,
    noise: &NoiseModel,
    seed: u64,
) -> Result<Dataset> {
    if replicates == 0 {
        return Err(Error::InvalidConfig("replicates must be >= 1".into()));
    }
    if sizes.is_empty() {
        return Err(Error::InvalidConfig("at least one size is required".into()));
    }
    noise.validate()?;
    truth.validate()?;
    let clean: Vec<StressStrainCurve> = sizes
        .par_iter()
        .map(|&l| model.curve_for(truth, l))
        .collect::<Result<_>>()?;
    let base = derive_seed(seed, streams::SYNTHETIC_NOISE);
    let entries = sizes
        .iter()
        .zip(&clean)
        .enumerate()
        .flat_map(|(si, (&size, c))| {
            (0..replicates).map(move |r| {
                let mut rng = stream_rng(base, ((si as u64) << 32) | r as u64);
                DatasetEntry {
                    size,
                    replicate: r + 1,
                    curve: noise.apply(c, &mut rng),
                }
            })
        })
        .collect();
    Dataset::new(entries, Provenance::Synthetic)
}

/// Training and testing sizes of a calibration case.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseSplit {
    pub label: String,
    pub training: Vec<f64>,
    pub testing: Vec<f64>,
}

impl CaseSplit {
    /// Test on the smallest pillar.
    pub fn case_i() -> Self {
        Self {
            label: "I".into(),
            training: vec![300.0, 500.0, 700.0, 1000.0],
            testing: vec![200.0],
        }
    }

    /// Test on the largest pillar.
    pub fn case_ii() -> Self {
        Self {
            label: "II".into(),
            training: vec![200.0, 300.0, 500.0, 700.0],
            testing: vec![1000.0],
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.training.is_empty() || self.testing.is_empty() {
            return Err(Error::InvalidConfig(format!(
                "case {}: training and testing sizes must be non-empty",
                self.label
            )));
        }
        if self.training.iter().any(|&a| self.testing.iter().any(|&b| same_size(a, b))) {
            return Err(Error::InvalidConfig(format!(
                "case {}: training and testing sizes overlap",
                self.label
            )));
        }
        Ok(())
    }
}

/// Splits a dataset into its training and testing parts. Sizes outside the
/// case are left out of both.
pub fn case_split(dataset: &Dataset, case: &CaseSplit) -> Result<(Dataset, Dataset)> {
    case.validate()?;
    for &s in case.training.iter().chain(&case.testing) {
        if !dataset.has_size(s) {
            return Err(Error::MissingSize(s));
        }
    }
    let pick = |sizes: &[f64]| Dataset {
        entries: dataset
            .entries
            .iter()
            .filter(|e| sizes.iter().any(|&s| same_size(s, e.size)))
            .cloned()
            .collect(),
        provenance: dataset.provenance,
    };
    Ok((pick(&case.training), pick(&case.testing)))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy_curve(scale: f64) -> StressStrainCurve {
        let strain: Vec<f64> = (0..=20).map(|i| i as f64 * 4e-4).collect();
        let stress = strain.iter().map(|e| scale * (100.0 * e).min(0.1 + 5.0 * e)).collect();
        StressStrainCurve::new(strain, stress).unwrap()
    }

    fn toy_dataset() -> Dataset {
        let entries = DEFAULT_SIZES
            .iter()
            .flat_map(|&s| {
                (1..=2).map(move |r| DatasetEntry {
                    size: s,
                    replicate: r,
                    curve: toy_curve(1.0 + 0.1 * r as f64),
                })
            })
            .collect();
        Dataset::new(entries, Provenance::Synthetic).unwrap()
    }

    #[test]
    fn file_names_round_trip() {
        assert_eq!(file_name(200.0, 3), "L200_r3.csv");
        assert_eq!(parse_file_name("L200_r3.csv"), Some((200.0, 3)));
        assert_eq!(parse_file_name("L250.5_r1.csv"), Some((250.5, 1)));
        assert_eq!(parse_file_name("config.json"), None);
        assert_eq!(parse_file_name("L-3_r1.csv"), None);
        assert_eq!(parse_file_name("Lx_r1.csv"), None);
    }

    #[test]
    fn export_ingest_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let d = toy_dataset();
        d.export(dir.path()).unwrap();
        std::fs::write(dir.path().join("notes.txt"), "ignored").unwrap();
        let back = Dataset::ingest(dir.path()).unwrap();
        assert_eq!(back.entries.len(), d.entries.len());
        assert_eq!(back.sizes(), DEFAULT_SIZES.to_vec());
        for (a, b) in d.entries.iter().zip(&back.entries) {
            assert_eq!((a.size, a.replicate), (b.size, b.replicate));
            for (p, q) in a.curve.points().zip(b.curve.points()) {
                assert!((p.0 - q.0).abs() <= 5e-12 * p.0.abs());
                assert!((p.1 - q.1).abs() <= 5e-12 * p.1.abs());
            }
        }
    }

    #[test]
    fn ingest_two_files_and_reject_decreasing_strain() {
        let dir = tempfile::tempdir().unwrap();
        toy_curve(1.0).save_csv(&dir.path().join("L200_r1.csv")).unwrap();
        toy_curve(1.1).save_csv(&dir.path().join("L500_r1.csv")).unwrap();
        let d = Dataset::ingest(dir.path()).unwrap();
        assert_eq!(d.entries.len(), 2);
        assert_eq!(d.provenance, Provenance::Ingested);

        std::fs::write(
            dir.path().join("L300_r1.csv"),
            "strain,stress_gpa\n0.0,0.0\n0.002,0.1\n0.001,0.12\n",
        )
        .unwrap();
        assert!(matches!(Dataset::ingest(dir.path()), Err(Error::Validation(_))));
    }

    #[test]
    fn case_splits_partition() {
        let d = toy_dataset();
        let (train, test) = case_split(&d, &CaseSplit::case_i()).unwrap();
        assert_eq!(train.sizes(), vec![300.0, 500.0, 700.0, 1000.0]);
        assert_eq!(test.sizes(), vec![200.0]);
        assert_eq!(train.entries.len() + test.entries.len(), d.entries.len());
        let (_, test2) = case_split(&d, &CaseSplit::case_ii()).unwrap();
        assert_eq!(test2.sizes(), vec![1000.0]);

        let only = Dataset {
            entries: d.entries.iter().filter(|e| e.size != 200.0).cloned().collect(),
            provenance: d.provenance,
        };
        assert!(matches!(case_split(&only, &CaseSplit::case_i()), Err(Error::MissingSize(s)) if s == 200.0));
        let overlap = CaseSplit {
            label: "x".into(),
            training: vec![200.0],
            testing: vec![200.0],
        };
        assert!(case_split(&d, &overlap).is_err());
    }

    #[test]
    fn lognormal_factor_has_unit_mean_and_target_variance() {
        let noise = NoiseModel {
            relative_std: 0.2,
            curve_fraction: 1.0,
        };
        let c = StressStrainCurve::new(vec![0.0, 1.0], vec![0.0, 1.0]).unwrap();
        let mut rng = stream_rng(1, 0);
        let f: Vec<f64> = (0..200_000).map(|_| noise.apply(&c, &mut rng).stress[1]).collect();
        let m = f.iter().sum::<f64>() / f.len() as f64;
        let v = f.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (f.len() - 1) as f64;
        assert!((m - 1.0).abs() < 3e-3, "{m}");
        assert!((v.sqrt() - 0.2).abs() < 3e-3, "{}", v.sqrt());
    }
}
