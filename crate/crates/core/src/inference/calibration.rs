//! End-to-end calibration on a training split and the per-size error table
//! of a train/test case.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::data::{CaseSplit, Dataset};
use crate::error::{Error, Result};
use crate::inference::ensemble::PosteriorEnsemble;
use crate::inference::likelihood::{Likelihood, LikelihoodSpec};
use crate::inference::mcmc::{dram_sample, mh_sample, ChainConfig};
use crate::inference::predict::{posterior_predict, PredictiveBand};
use crate::model::{CachedModel, SgpModel};
use crate::qoi::{cdf_error, strain_energy};
use crate::sampling::ParamBox;

/// Solves kept in memory during a calibration run.
const CACHE_CAPACITY: usize = 4096;

/// Samples the posterior of the model given `training` under a uniform prior
/// on `prior`. DRAM or plain MH follows `cfg.adaptive` and
/// `cfg.delayed_rejection`.
pub fn calibrate(
    training: &Dataset,
    model: &SgpModel,
    prior: &ParamBox,
    spec: &LikelihoodSpec,
    cfg: &ChainConfig,
    init: Option<&[Vec<f64>]>,
) -> Result<PosteriorEnsemble> {
    let likelihood = Likelihood::new(training, spec)?;
    let cache = CachedModel::new(*model, CACHE_CAPACITY);
    let log_post = |x: &[f64]| likelihood.log_likelihood(x, &cache);
    if cfg.adaptive || cfg.delayed_rejection {
        dram_sample(&log_post, prior, cfg, init)
    } else {
        mh_sample(&log_post, prior, cfg, init)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SetRole {
    Training,
    Testing,
}

impl SetRole {
    pub fn as_str(self) -> &'static str {
        match self {
            SetRole::Training => "training",
            SetRole::Testing => "testing",
        }
    }
}

/// Strain-energy discrepancy between data and predictions at one size.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SizeError {
    pub size: f64,
    pub role: SetRole,
    /// `cdf_error` of the data energies against the predicted energies.
    pub error: f64,
    /// Coefficient of variation of the data energies.
    pub data_spread: f64,
    pub data_mean: f64,
    pub model_mean: f64,
    pub n_data: usize,
    pub n_model: usize,
}

/// Per-size error table of a calibration case, largest size first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseReport {
    pub label: String,
    pub rows: Vec<SizeError>,
}

impl CaseReport {
    pub fn testing(&self) -> impl Iterator<Item = &SizeError> {
        self.rows.iter().filter(|r| r.role == SetRole::Testing)
    }

    /// Rows `size,set,E,spread,data_mean,model_mean,n_data,n_model`.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record([
            "size", "set", "E", "spread", "data_mean", "model_mean", "n_data", "n_model",
        ])?;
        for r in &self.rows {
            w.write_record([
                r.size.to_string(),
                r.role.as_str().to_string(),
                format!("{:e}", r.error),
                format!("{:e}", r.data_spread),
                format!("{:e}", r.data_mean),
                format!("{:e}", r.model_mean),
                r.n_data.to_string(),
                r.n_model.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    /// Plain-text table: size, set and `E ± spread`.
    pub fn to_table(&self) -> String {
        let mut s = format!("{}\n{:>8}  {:<9} {}\n", self.label, "size", "set", "E");
        for r in &self.rows {
            s.push_str(&format!(
                "{:>5} nm  {:<9} {:.3}±{:.2}\n",
                r.size,
                r.role.as_str(),
                r.error,
                r.data_spread
            ));
        }
        s
    }
}

fn mean_and_cv(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    if v.len() < 2 || m == 0.0 {
        return (m, 0.0);
    }
    let var = v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
    (m, var.sqrt() / m.abs())
}

/// Predicts every size of `case` from the posterior and compares strain
/// energies with the data. Returns the table and the predictive bands in
/// table order.
pub fn case_report(
    dataset: &Dataset,
    case: &CaseSplit,
    ens: &PosteriorEnsemble,
    model: &SgpModel,
    n_draws: usize,
    seed: u64,
) -> Result<(CaseReport, Vec<PredictiveBand>)> {
    case.validate()?;
    let mut sizes: Vec<(f64, SetRole)> = case
        .training
        .iter()
        .map(|&s| (s, SetRole::Training))
        .chain(case.testing.iter().map(|&s| (s, SetRole::Testing)))
        .collect();
    sizes.sort_by(|a, b| b.0.total_cmp(&a.0));
    let mut rows = Vec::with_capacity(sizes.len());
    let mut bands = Vec::with_capacity(sizes.len());
    for (size, role) in sizes {
        if !dataset.has_size(size) {
            return Err(Error::MissingSize(size));
        }
        let data: Vec<f64> = dataset
            .curves_for(size)
            .into_iter()
            .map(|c| strain_energy(c, model.qoi_strain))
            .collect::<Result<_>>()?;
        let band = posterior_predict(ens, model, size, n_draws, seed)?;
        let (data_mean, data_spread) = mean_and_cv(&data);
        rows.push(SizeError {
            size,
            role,
            error: cdf_error(&data, &band.qoi)?,
            data_spread,
            data_mean,
            model_mean: band.qoi.iter().sum::<f64>() / band.qoi.len() as f64,
            n_data: data.len(),
            n_model: band.qoi.len(),
        });
        bands.push(band);
    }
    Ok((
        CaseReport {
            label: case.label.clone(),
            rows,
        },
        bands,
    ))
}
