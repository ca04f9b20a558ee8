//! Retained posterior samples and their summaries.

use std::io::{Read, Write};
use std::path::Path;

use log::warn;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::inference::mcmc::{ChainConfig, ChainRun};
use crate::sampling::ParamBox;

/// Post-burn-in samples of all chains, concatenated in chain order.
#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorEnsemble {
    pub samples: Vec<Vec<f64>>,
    pub log_post: Vec<f64>,
    /// Chain index of every retained sample.
    pub chain: Vec<usize>,
    pub acceptance_rates: Vec<f64>,
    pub prior: ParamBox,
    pub config: ChainConfig,
}

impl PosteriorEnsemble {
    pub fn from_runs(runs: Vec<ChainRun>, prior: ParamBox, config: ChainConfig) -> Result<Self> {
        let burn = config.burn_in();
        let mut ens = Self {
            samples: Vec::new(),
            log_post: Vec::new(),
            chain: Vec::new(),
            acceptance_rates: runs.iter().map(ChainRun::acceptance_rate).collect(),
            prior,
            config,
        };
        for (c, run) in runs.into_iter().enumerate() {
            for (s, lp) in run.samples.into_iter().zip(run.log_post).skip(burn) {
                ens.samples.push(s);
                ens.log_post.push(lp);
                ens.chain.push(c);
            }
        }
        ens.check_bounds()?;
        Ok(ens)
    }

    /// Builds an ensemble from stored rows (e.g. a samples file).
    pub fn from_samples(
        samples: Vec<Vec<f64>>,
        log_post: Vec<f64>,
        chain: Vec<usize>,
        prior: ParamBox,
        config: ChainConfig,
    ) -> Result<Self> {
        if samples.len() != log_post.len() || samples.len() != chain.len() {
            return Err(Error::LengthMismatch("samples, log_post and chain differ in length".into()));
        }
        let n_chains = chain.iter().max().map(|c| c + 1).unwrap_or(0);
        let ens = Self {
            samples,
            log_post,
            chain,
            acceptance_rates: vec![f64::NAN; n_chains],
            prior,
            config,
        };
        ens.check_bounds()?;
        Ok(ens)
    }

    fn check_bounds(&self) -> Result<()> {
        if let Some(bad) = self.samples.iter().find(|s| !self.prior.contains(s)) {
            return Err(Error::Validation(format!("posterior sample {bad:?} lies outside the prior box")));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.prior.dim()
    }

    pub fn n_chains(&self) -> usize {
        self.acceptance_rates.len()
    }

    pub fn marginal(&self, k: usize) -> Vec<f64> {
        self.samples.iter().map(|s| s[k]).collect()
    }

    /// Samples of chain `c`, in order.
    pub fn chain_marginal(&self, c: usize, k: usize) -> Vec<f64> {
        self.samples
            .iter()
            .zip(&self.chain)
            .filter(|(_, &ci)| ci == c)
            .map(|(s, _)| s[k])
            .collect()
    }

    pub fn mean(&self) -> Result<Vec<f64>> {
        if self.is_empty() {
            return Err(Error::EmptyEnsemble);
        }
        Ok((0..self.dim()).map(|k| mean(&self.marginal(k))).collect())
    }

    pub fn variance(&self) -> Result<Vec<f64>> {
        if self.is_empty() {
            return Err(Error::EmptyEnsemble);
        }
        Ok((0..self.dim()).map(|k| variance(&self.marginal(k))).collect())
    }

    /// Central interval with probability `mass` for every parameter.
    pub fn central_interval(&self, mass: f64) -> Result<Vec<(f64, f64)>> {
        if self.is_empty() {
            return Err(Error::EmptyEnsemble);
        }
        let tail = 0.5 * (1.0 - mass);
        Ok((0..self.dim())
            .map(|k| {
                let mut m = self.marginal(k);
                m.sort_by(f64::total_cmp);
                (quantile_sorted(&m, tail), quantile_sorted(&m, 1.0 - tail))
            })
            .collect())
    }

    /// Writes `chain,<names>,log_post` with full round-trip precision.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header = vec!["chain".to_string()];
        header.extend(self.prior.names().iter().map(|s| s.to_string()));
        header.push("log_post".into());
        w.write_record(&header)?;
        for ((s, lp), c) in self.samples.iter().zip(&self.log_post).zip(&self.chain) {
            let mut rec = vec![c.to_string()];
            rec.extend(s.iter().map(|v| format!("{v:e}")));
            rec.push(format!("{lp:e}"));
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn save_csv(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path)?;
        self.write_csv(std::io::BufWriter::new(file))
    }

    /// Reads a samples file written by [`PosteriorEnsemble::write_csv`].
    pub fn read_csv<R: Read>(reader: R, origin: &Path, prior: ParamBox, config: ChainConfig) -> Result<Self> {
        let parse_err = |line: usize, reason: String| Error::Parse {
            file: origin.to_path_buf(),
            line,
            reason,
        };
        let mut rdr = csv::Reader::from_reader(reader);
        let headers = rdr.headers().map_err(|e| parse_err(1, e.to_string()))?.clone();
        let k = prior.dim();
        let names = prior.names();
        let expected: Vec<&str> = std::iter::once("chain")
            .chain(names.iter().copied())
            .chain(std::iter::once("log_post"))
            .collect();
        if headers.iter().collect::<Vec<_>>() != expected {
            return Err(parse_err(1, format!("expected header `{}`", expected.join(","))));
        }
        let (mut samples, mut lps, mut chains) = (Vec::new(), Vec::new(), Vec::new());
        for (i, rec) in rdr.records().enumerate() {
            let line = i + 2;
            let rec = rec.map_err(|e| parse_err(line, e.to_string()))?;
            let num = |s: &str| s.parse::<f64>().map_err(|e| parse_err(line, format!("`{s}`: {e}")));
            chains.push(rec[0].parse::<usize>().map_err(|e| parse_err(line, e.to_string()))?);
            samples.push((1..=k).map(|j| num(&rec[j])).collect::<Result<Vec<_>>>()?);
            lps.push(num(&rec[k + 1])?);
        }
        Self::from_samples(samples, lps, chains, prior, config)
    }

    pub fn load_csv(path: &Path, prior: ParamBox, config: ChainConfig) -> Result<Self> {
        let file = std::fs::File::open(path)?;
        Self::read_csv(std::io::BufReader::new(file), path, prior, config)
    }
}

pub(crate) fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Unbiased variance; zero for a single value. Shifting by the first value
/// makes identical inputs give exactly zero.
pub(crate) fn variance(v: &[f64]) -> f64 {
    if v.len() < 2 {
        return 0.0;
    }
    let d: Vec<f64> = v.iter().map(|x| x - v[0]).collect();
    let m = d.iter().sum::<f64>() / d.len() as f64;
    d.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (v.len() - 1) as f64
}

/// Linear-interpolation quantile of sorted data.
pub(crate) fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let h = p.clamp(0.0, 1.0) * (n - 1) as f64;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(n - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Sample with the largest stored log-posterior; the first one on ties.
pub fn map_estimate(ens: &PosteriorEnsemble) -> Result<Vec<f64>> {
    let mut best: Option<usize> = None;
    for (i, lp) in ens.log_post.iter().enumerate() {
        if best.is_none_or(|b| *lp > ens.log_post[b]) {
            best = Some(i);
        }
    }
    best.map(|i| ens.samples[i].clone()).ok_or(Error::EmptyEnsemble)
}

/// Posterior variance of each parameter over its uniform prior variance.
pub fn information_measure(ens: &PosteriorEnsemble, prior: &ParamBox) -> Result<Vec<f64>> {
    let var = ens.variance()?;
    let out: Vec<f64> = var
        .iter()
        .zip(&prior.ranges)
        .map(|(v, r)| v / r.variance())
        .collect();
    for (v, r) in out.iter().zip(&prior.ranges) {
        if *v > 1.2 {
            warn!("information measure of {} is {v:.3} (> 1.2)", r.name);
        }
    }
    Ok(out)
}

/// Effective sample size from the initial positive sequence of
/// autocorrelation pair sums.
pub fn effective_sample_size(x: &[f64]) -> f64 {
    let n = x.len();
    if n < 4 {
        return n as f64;
    }
    let m = mean(x);
    let c0 = x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / n as f64;
    if c0 == 0.0 {
        return n as f64;
    }
    let rho = |lag: usize| -> f64 {
        (0..n - lag).map(|i| (x[i] - m) * (x[i + lag] - m)).sum::<f64>() / n as f64 / c0
    };
    let mut tau = -1.0;
    let mut lag = 0;
    while lag + 1 < n {
        let pair = rho(lag) + rho(lag + 1);
        if pair <= 0.0 {
            break;
        }
        tau += 2.0 * pair;
        lag += 2;
    }
    n as f64 / tau.max(1.0)
}

/// Potential scale reduction factor over chains for each parameter.
pub fn split_r_hat(ens: &PosteriorEnsemble) -> Vec<f64> {
    let n_chains = ens.n_chains();
    (0..ens.dim())
        .map(|k| {
            let chains: Vec<Vec<f64>> = (0..n_chains)
                .flat_map(|c| {
                    let v = ens.chain_marginal(c, k);
                    let h = v.len() / 2;
                    [v[..h].to_vec(), v[h..2 * h].to_vec()]
                })
                .filter(|v| v.len() > 1)
                .collect();
            if chains.len() < 2 {
                return f64::NAN;
            }
            let len = chains[0].len() as f64;
            let means: Vec<f64> = chains.iter().map(|c| mean(c)).collect();
            let w = mean(&chains.iter().map(|c| variance(c)).collect::<Vec<_>>());
            let b = len * variance(&means);
            let var_plus = (len - 1.0) / len * w + b / len;
            if w == 0.0 {
                return f64::NAN;
            }
            (var_plus / w).sqrt()
        })
        .collect()
}

/// Key figures of a posterior, suitable for a JSON report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PosteriorSummary {
    pub parameters: Vec<String>,
    pub n_samples: usize,
    pub n_chains: usize,
    pub map: Vec<f64>,
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
    pub interval_95: Vec<(f64, f64)>,
    pub information: Vec<f64>,
    pub r_hat: Vec<f64>,
    /// `NaN` when reloaded from a samples file.
    pub acceptance_rates: Vec<f64>,
}

impl PosteriorSummary {
    pub fn from_ensemble(ens: &PosteriorEnsemble) -> Result<Self> {
        Ok(Self {
            parameters: ens.prior.names().iter().map(|s| s.to_string()).collect(),
            n_samples: ens.len(),
            n_chains: ens.n_chains(),
            map: map_estimate(ens)?,
            mean: ens.mean()?,
            std: ens.variance()?.iter().map(|v| v.sqrt()).collect(),
            interval_95: ens.central_interval(0.95)?,
            information: information_measure(ens, &ens.prior)?,
            r_hat: split_r_hat(ens),
            acceptance_rates: ens.acceptance_rates.clone(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampling::ParamRange;

    fn bx() -> ParamBox {
        ParamBox::new(vec![ParamRange::new("a", 0.0, 1.0), ParamRange::new("b", -1.0, 1.0)]).unwrap()
    }

    fn ens(samples: Vec<Vec<f64>>, lp: Vec<f64>) -> PosteriorEnsemble {
        let n = samples.len();
        PosteriorEnsemble::from_samples(samples, lp, vec![0; n], bx(), ChainConfig::default()).unwrap()
    }

    #[test]
    fn map_of_single_and_ties() {
        let e = ens(vec![vec![0.3, 0.1]], vec![-2.0]);
        assert_eq!(map_estimate(&e).unwrap(), vec![0.3, 0.1]);
        let e = ens(
            vec![vec![0.1, 0.0], vec![0.2, 0.0], vec![0.3, 0.0]],
            vec![-1.0, 0.5, 0.5],
        );
        assert_eq!(map_estimate(&e).unwrap(), vec![0.2, 0.0]);
        let empty = ens(vec![], vec![]);
        assert!(matches!(map_estimate(&empty), Err(Error::EmptyEnsemble)));
        assert!(matches!(information_measure(&empty, &bx()), Err(Error::EmptyEnsemble)));
    }

    #[test]
    fn delta_posterior_has_zero_information_measure() {
        let e = ens(vec![vec![0.5, 0.2]; 10], vec![0.0; 10]);
        assert!(information_measure(&e, &bx()).unwrap().iter().all(|v| *v < 1e-20));
    }

    #[test]
    fn out_of_box_samples_are_rejected() {
        let r = PosteriorEnsemble::from_samples(vec![vec![2.0, 0.0]], vec![0.0], vec![0], bx(), ChainConfig::default());
        assert!(r.is_err());
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let e = ens(
            vec![vec![0.123_456_789_012_345_67, -0.987_654_321], vec![1.0 / 3.0, 2.0f64.sqrt() - 1.0]],
            vec![-12.345_678_901_234_5, f64::NEG_INFINITY],
        );
        let mut buf = Vec::new();
        e.write_csv(&mut buf).unwrap();
        let back = PosteriorEnsemble::read_csv(buf.as_slice(), Path::new("mem"), bx(), ChainConfig::default()).unwrap();
        assert_eq!(back.samples, e.samples);
        assert_eq!(back.log_post, e.log_post);
        assert_eq!(back.chain, e.chain);
    }

    #[test]
    fn quantiles_interpolate() {
        let v = [1.0, 2.0, 3.0, 4.0, 5.0];
        assert_eq!(quantile_sorted(&v, 0.5), 3.0);
        assert_eq!(quantile_sorted(&v, 0.0), 1.0);
        assert_eq!(quantile_sorted(&v, 1.0), 5.0);
        assert_eq!(quantile_sorted(&v, 0.125), 1.5);
    }

    #[test]
    fn ess_of_independent_and_sticky_series() {
        use rand::Rng;
        let mut rng = crate::rng::stream_rng(3, 0);
        let iid: Vec<f64> = (0..20_000).map(|_| rng.random::<f64>()).collect();
        let ess = effective_sample_size(&iid);
        assert!(ess > 15_000.0, "{ess}");
        // each value repeated 10 times
        let sticky: Vec<f64> = iid.iter().take(2000).flat_map(|v| std::iter::repeat_n(*v, 10)).collect();
        let ess = effective_sample_size(&sticky);
        assert!(ess > 1000.0 && ess < 3000.0, "{ess}");
    }
}
