//! Forward propagation of posterior samples through the model.

use std::io::Write;

use log::warn;
use rand::seq::index;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::inference::ensemble::{mean, quantile_sorted, variance, PosteriorEnsemble};
use crate::model::SgpModel;
use crate::qoi::strain_energy;
use crate::rng::{stream_rng, streams};

/// Pointwise statistics of predicted curves on a common strain grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictiveBand {
    pub size: f64,
    pub strain: Vec<f64>,
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
    pub q025: Vec<f64>,
    pub q50: Vec<f64>,
    pub q975: Vec<f64>,
    /// Strain energy of every successful draw.
    pub qoi: Vec<f64>,
    /// Number of draws whose solve failed.
    pub dropped: usize,
}

impl PredictiveBand {
    /// Mean over strain points of the predicted stress variance.
    pub fn mean_variance(&self) -> f64 {
        self.std.iter().map(|s| s * s).sum::<f64>() / self.std.len().max(1) as f64
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["strain", "mean", "std", "q025", "q50", "q975"])?;
        for i in 0..self.strain.len() {
            w.write_record(
                [self.strain[i], self.mean[i], self.std[i], self.q025[i], self.q50[i], self.q975[i]]
                    .iter()
                    .map(|v| format!("{v:.11e}")),
            )?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Indices of `n_draws` samples: without replacement when the ensemble is
/// large enough, otherwise with replacement.
fn draw_indices<R: Rng>(n_samples: usize, n_draws: usize, rng: &mut R) -> Vec<usize> {
    if n_draws <= n_samples {
        let mut idx = index::sample(rng, n_samples, n_draws).into_vec();
        idx.sort_unstable();
        idx
    } else {
        (0..n_draws).map(|_| rng.random_range(0..n_samples)).collect()
    }
}

/// Solves the model at `n_draws` posterior samples for one size and
/// summarises the curves and their strain energies.
pub fn posterior_predict(
    ens: &PosteriorEnsemble,
    model: &SgpModel,
    size: f64,
    n_draws: usize,
    seed: u64,
) -> Result<PredictiveBand> {
    if ens.is_empty() {
        return Err(Error::EmptyEnsemble);
    }
    if n_draws == 0 {
        return Err(Error::InvalidConfig("n_draws must be >= 1".into()));
    }
    let mut rng = stream_rng(seed, streams::PREDICT);
    let idx = draw_indices(ens.len(), n_draws, &mut rng);
    let curves: Vec<_> = idx
        .par_iter()
        .map(|&i| model.curve(&ens.samples[i], size))
        .collect();
    let mut ok = Vec::with_capacity(curves.len());
    let mut dropped = 0;
    for (i, c) in idx.iter().zip(curves) {
        match c {
            Ok(c) => ok.push(c),
            Err(e) => {
                warn!("predictive draw {i} at L = {size} failed: {e}");
                dropped += 1;
            }
        }
    }
    if ok.is_empty() {
        return Err(Error::SolverFailure {
            strain: 0.0,
            reason: format!("all {n_draws} predictive solves failed"),
        });
    }
    let grid = ok[0].strain.clone();
    let rows: Vec<Vec<f64>> = ok.iter().map(|c| c.resample(&grid)).collect();
    let n_pts = grid.len();
    let mut band = PredictiveBand {
        size,
        strain: grid,
        mean: Vec::with_capacity(n_pts),
        std: Vec::with_capacity(n_pts),
        q025: Vec::with_capacity(n_pts),
        q50: Vec::with_capacity(n_pts),
        q975: Vec::with_capacity(n_pts),
        qoi: ok
            .iter()
            .map(|c| strain_energy(c, model.qoi_strain))
            .collect::<Result<_>>()?,
        dropped,
    };
    for j in 0..n_pts {
        let mut col: Vec<f64> = rows.iter().map(|r| r[j]).collect();
        band.mean.push(mean(&col));
        band.std.push(variance(&col).sqrt());
        col.sort_by(f64::total_cmp);
        band.q025.push(quantile_sorted(&col, 0.025));
        band.q50.push(quantile_sorted(&col, 0.5));
        band.q975.push(quantile_sorted(&col, 0.975));
    }
    Ok(band)
}
