//! Random-walk Metropolis–Hastings with optional adaptive covariance and one
//! delayed-rejection stage (DRAM). Plain MH is the same kernel with both
//! extensions switched off.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::inference::ensemble::PosteriorEnsemble;
use crate::rng::{derive_seed, stream_rng, streams};
use crate::sampling::{lhs_sample, ParamBox};

/// Chain lengths, proposal tuning and seeds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ChainConfig {
    pub n_chains: usize,
    /// States per chain, including the initial one.
    pub chain_length: usize,
    pub burn_in_fraction: f64,
    /// Initial proposal std as a fraction of each prior range.
    pub proposal_scale: f64,
    pub adaptive: bool,
    /// Iteration at which covariance adaptation begins.
    pub adapt_start: usize,
    pub adapt_interval: usize,
    /// Covariance scale s_d; `None` means 2.38² / K.
    pub adapt_scale: Option<f64>,
    /// Diagonal jitter added to the adapted covariance.
    pub adapt_epsilon: f64,
    pub delayed_rejection: bool,
    /// Std of the second-stage proposal relative to the first.
    pub dr_scale: f64,
    pub seed: u64,
}

impl Default for ChainConfig {
    fn default() -> Self {
        Self {
            n_chains: 10,
            chain_length: 10_000,
            burn_in_fraction: 0.10,
            proposal_scale: 0.05,
            adaptive: true,
            adapt_start: 500,
            adapt_interval: 100,
            adapt_scale: None,
            adapt_epsilon: 1e-10,
            delayed_rejection: true,
            dr_scale: 0.2,
            seed: 0,
        }
    }
}

impl ChainConfig {
    /// The same settings with adaptation and delayed rejection off.
    pub fn plain_mh(&self) -> Self {
        Self {
            adaptive: false,
            delayed_rejection: false,
            ..self.clone()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_chains == 0 {
            return Err(Error::InvalidConfig("n_chains must be >= 1".into()));
        }
        if self.chain_length < 100 {
            return Err(Error::InvalidConfig("chain_length must be >= 100".into()));
        }
        if !(0.0..1.0).contains(&self.burn_in_fraction) {
            return Err(Error::InvalidConfig("burn_in_fraction must lie in [0, 1)".into()));
        }
        if !(self.proposal_scale > 0.0 && self.proposal_scale.is_finite()) {
            return Err(Error::InvalidConfig("proposal_scale must be > 0".into()));
        }
        if self.adaptive && self.adapt_interval == 0 {
            return Err(Error::InvalidConfig("adapt_interval must be >= 1".into()));
        }
        if self.delayed_rejection && !(self.dr_scale > 0.0 && self.dr_scale.is_finite()) {
            return Err(Error::InvalidConfig("dr_scale must be > 0".into()));
        }
        Ok(())
    }

    pub fn burn_in(&self) -> usize {
        (self.burn_in_fraction * self.chain_length as f64).floor() as usize
    }
}

/// Full history of one chain.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainRun {
    pub samples: Vec<Vec<f64>>,
    pub log_post: Vec<f64>,
    pub accepted: usize,
    /// Accepted moves that came from the delayed-rejection stage.
    pub accepted_second_stage: usize,
    pub iterations: usize,
}

impl ChainRun {
    pub fn acceptance_rate(&self) -> f64 {
        self.accepted as f64 / self.iterations.max(1) as f64
    }
}

/// Running mean and scatter matrix of the chain history.
struct RunningCov {
    n: usize,
    mean: DVector<f64>,
    m2: DMatrix<f64>,
}

impl RunningCov {
    fn new(k: usize) -> Self {
        Self {
            n: 0,
            mean: DVector::zeros(k),
            m2: DMatrix::zeros(k, k),
        }
    }

    fn push(&mut self, x: &[f64]) {
        self.n += 1;
        let x = DVector::from_column_slice(x);
        let d = &x - &self.mean;
        self.mean += &d / self.n as f64;
        let d2 = &x - &self.mean;
        self.m2 += &d * d2.transpose();
    }

    fn covariance(&self) -> Option<DMatrix<f64>> {
        (self.n > 1).then(|| &self.m2 / (self.n - 1) as f64)
    }
}

fn finite_or_neg_inf(v: f64) -> f64 {
    if v.is_nan() {
        f64::NEG_INFINITY
    } else {
        v
    }
}

/// log min(1, exp(d)) with −∞ − (−∞) treated as a rejection.
fn log_alpha(num: f64, den: f64) -> f64 {
    if num == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    if den == f64::NEG_INFINITY {
        return 0.0;
    }
    (num - den).min(0.0)
}

/// ln(1 − e^a) for a ≤ 0.
fn ln_one_minus_exp(a: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        0.0
    } else if a > -std::f64::consts::LN_2 {
        (-a.exp_m1()).ln()
    } else {
        (-a.exp()).ln_1p()
    }
}

/// Runs one chain from `x0`. Proposals outside `bx` have zero prior density
/// and are rejected without evaluating `log_post`.
pub fn run_chain<F>(log_post: &F, bx: &ParamBox, x0: &[f64], cfg: &ChainConfig, rng: &mut ChaCha20Rng) -> ChainRun
where
    F: Fn(&[f64]) -> f64 + ?Sized,
{
    let k = bx.dim();
    let eval = |x: &[f64]| {
        if bx.contains(x) {
            finite_or_neg_inf(log_post(x))
        } else {
            f64::NEG_INFINITY
        }
    };
    let sd = cfg.adapt_scale.unwrap_or(2.38 * 2.38 / k as f64);

    let mut chol = DMatrix::from_diagonal(&DVector::from_iterator(
        k,
        bx.ranges.iter().map(|r| cfg.proposal_scale * r.width()),
    ));
    // inverse of the proposal covariance, for the second-stage ratio
    let mut cov_inv = {
        let c = &chol * chol.transpose();
        c.try_inverse().expect("diagonal proposal is invertible")
    };
    let mut history = RunningCov::new(k);

    let mut x = x0.to_vec();
    let mut lp = eval(&x);
    let mut samples = Vec::with_capacity(cfg.chain_length);
    let mut log_posts = Vec::with_capacity(cfg.chain_length);
    samples.push(x.clone());
    log_posts.push(lp);
    history.push(&x);
    let mut accepted = 0;
    let mut accepted2 = 0;

    let draw = |rng: &mut ChaCha20Rng, from: &[f64], chol: &DMatrix<f64>, scale: f64| -> Vec<f64> {
        let z = DVector::from_iterator(k, (0..k).map(|_| rng.sample::<f64, _>(StandardNormal)));
        let step = chol * z * scale;
        from.iter().zip(step.iter()).map(|(a, b)| a + b).collect()
    };

    for it in 1..cfg.chain_length {
        let y1 = draw(rng, &x, &chol, 1.0);
        let lp1 = eval(&y1);
        let a1 = log_alpha(lp1, lp);
        let u: f64 = rng.random();
        if u.ln() < a1 {
            x = y1;
            lp = lp1;
            accepted += 1;
        } else if cfg.delayed_rejection {
            let y2 = draw(rng, &x, &chol, cfg.dr_scale);
            let lp2 = eval(&y2);
            let a2 = if lp2 == f64::NEG_INFINITY {
                f64::NEG_INFINITY
            } else {
                // first-stage density ratio q1(y2 → y1) / q1(x → y1)
                let d_new = DVector::from_iterator(k, y1.iter().zip(&y2).map(|(a, b)| a - b));
                let d_old = DVector::from_iterator(k, y1.iter().zip(&x).map(|(a, b)| a - b));
                let log_q = -0.5 * (d_new.dot(&(&cov_inv * &d_new)) - d_old.dot(&(&cov_inv * &d_old)));
                let back = ln_one_minus_exp(log_alpha(lp1, lp2));
                let fwd = ln_one_minus_exp(a1);
                if back == f64::NEG_INFINITY {
                    f64::NEG_INFINITY
                } else if lp == f64::NEG_INFINITY {
                    0.0
                } else {
                    (lp2 - lp + log_q + back - fwd).min(0.0)
                }
            };
            let u2: f64 = rng.random();
            if u2.ln() < a2 {
                x = y2;
                lp = lp2;
                accepted += 1;
                accepted2 += 1;
            }
        }
        samples.push(x.clone());
        log_posts.push(lp);
        history.push(&x);

        if cfg.adaptive && it >= cfg.adapt_start && (it - cfg.adapt_start).is_multiple_of(cfg.adapt_interval) {
            if let Some(cov) = history.covariance() {
                let c = cov * sd + DMatrix::identity(k, k) * cfg.adapt_epsilon;
                // keep the previous proposal if the update is not positive definite
                if let Some(ch) = c.clone().cholesky() {
                    if let Some(inv) = c.try_inverse() {
                        chol = ch.l();
                        cov_inv = inv;
                    }
                }
            }
        }
    }

    ChainRun {
        samples,
        log_post: log_posts,
        accepted,
        accepted_second_stage: accepted2,
        iterations: cfg.chain_length - 1,
    }
}

/// Initial states: one LHS draw per chain over the prior box.
pub fn initial_points(bx: &ParamBox, n_chains: usize, seed: u64) -> Result<Vec<Vec<f64>>> {
    let m = lhs_sample(bx, n_chains, derive_seed(seed, streams::CHAIN_INIT))?;
    Ok(m.rows().map(<[f64]>::to_vec).collect())
}

/// Runs `cfg.n_chains` independent chains in parallel and merges them in
/// chain order. `init` gives one starting point per chain; LHS draws from
/// the box are used when it is `None`.
pub fn dram_sample<F>(log_post: &F, bx: &ParamBox, cfg: &ChainConfig, init: Option<&[Vec<f64>]>) -> Result<PosteriorEnsemble>
where
    F: Fn(&[f64]) -> f64 + Sync + ?Sized,
{
    cfg.validate()?;
    bx.validate()?;
    let starts = match init {
        Some(p) => p.to_vec(),
        None => initial_points(bx, cfg.n_chains, cfg.seed)?,
    };
    if starts.len() != cfg.n_chains {
        return Err(Error::InvalidConfig(format!(
            "{} initial points for {} chains",
            starts.len(),
            cfg.n_chains
        )));
    }
    if let Some(bad) = starts.iter().find(|x| !bx.contains(x)) {
        return Err(Error::InvalidConfig(format!("initial point {bad:?} lies outside the prior box")));
    }
    let runs: Vec<ChainRun> = starts
        .par_iter()
        .enumerate()
        .map(|(c, x0)| {
            let mut rng = stream_rng(cfg.seed, streams::CHAIN_BASE + c as u64);
            run_chain(log_post, bx, x0, cfg, &mut rng)
        })
        .collect();
    PosteriorEnsemble::from_runs(runs, bx.clone(), cfg.clone())
}

/// Plain random-walk Metropolis–Hastings: [`dram_sample`] with adaptation and
/// delayed rejection disabled.
pub fn mh_sample<F>(log_post: &F, bx: &ParamBox, cfg: &ChainConfig, init: Option<&[Vec<f64>]>) -> Result<PosteriorEnsemble>
where
    F: Fn(&[f64]) -> f64 + Sync + ?Sized,
{
    dram_sample(log_post, bx, &cfg.plain_mh(), init)
}
