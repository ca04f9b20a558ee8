//! Sampler properties on closed-form targets.

use sgpuq::inference::{
    dram_sample, effective_sample_size, information_measure, map_estimate, mh_sample, ChainConfig,
};
use sgpuq::sampling::{ParamBox, ParamRange};

fn boxed(ranges: &[(f64, f64)]) -> ParamBox {
    ParamBox::new(
        ranges
            .iter()
            .enumerate()
            .map(|(i, &(lo, hi))| ParamRange::new(format!("x{i}"), lo, hi))
            .collect(),
    )
    .unwrap()
}

#[test]
#[allow(clippy::needless_range_loop)]
fn transition_counts_are_balanced() {
    // piecewise-constant density on 50 unit bins
    let weight = |i: usize| 1.0 + (i as f64 / 5.0).sin().powi(2) + if i.is_multiple_of(7) { 1.0 } else { 0.0 };
    let bx = boxed(&[(0.0, 50.0)]);
    let cfg = ChainConfig {
        n_chains: 1,
        chain_length: 1_000_000,
        burn_in_fraction: 0.0,
        seed: 21,
        ..Default::default()
    };
    let ens = mh_sample(
        &|x: &[f64]| weight((x[0].floor() as usize).min(49)).ln(),
        &bx,
        &cfg,
        Some(&[vec![25.0]]),
    )
    .unwrap();
    let bin = |x: f64| (x.floor() as usize).min(49);
    let mut counts = vec![vec![0f64; 50]; 50];
    for w in ens.samples.windows(2) {
        counts[bin(w[0][0])][bin(w[1][0])] += 1.0;
    }
    let mut chi2 = 0f64;
    let mut dof = 0f64;
    let mut worst: f64 = 0.0;
    for i in 0..50 {
        for j in (i + 1)..50 {
            let total = counts[i][j] + counts[j][i];
            if total > 0.0 {
                let z2 = (counts[i][j] - counts[j][i]).powi(2) / total;
                chi2 += z2;
                dof += 1.0;
                worst = worst.max(z2.sqrt());
            }
        }
    }
    // aggregate imbalance within 3 sigma of its chi-square mean
    assert!(chi2 < dof + 3.0 * (2.0 * dof).sqrt(), "chi2 {chi2} over {dof} pairs");
    assert!(worst < 4.5, "largest single-pair imbalance {worst} sigma");

    // the occupation histogram follows the target
    let total_w: f64 = (0..50).map(weight).sum();
    let n = ens.len() as f64;
    let mut hist = vec![0f64; 50];
    for s in &ens.samples {
        hist[bin(s[0])] += 1.0;
    }
    for i in 0..50 {
        let expect = weight(i) / total_w;
        assert!((hist[i] / n - expect).abs() < 0.15 * expect, "bin {i}");
    }
}

fn banana_log_density(x: &[f64]) -> f64 {
    let b = 0.03;
    let y2 = x[1] - b * (x[0] * x[0] - 100.0);
    -x[0] * x[0] / 200.0 - 0.5 * y2 * y2
}

#[test]
fn dram_beats_mh_on_a_banana() {
    let bx = boxed(&[(-40.0, 40.0), (-20.0, 60.0)]);
    let cfg = ChainConfig {
        n_chains: 4,
        chain_length: 20_000,
        seed: 8,
        ..Default::default()
    };
    let init = vec![vec![0.0, -3.0]; 4];
    let ess = |ens: &sgpuq::inference::PosteriorEnsemble| -> f64 {
        (0..4)
            .map(|c| {
                (0..2)
                    .map(|k| effective_sample_size(&ens.chain_marginal(c, k)))
                    .fold(f64::INFINITY, f64::min)
            })
            .sum()
    };
    let mh = mh_sample(&banana_log_density, &bx, &cfg, Some(&init)).unwrap();
    let dram = dram_sample(&banana_log_density, &bx, &cfg, Some(&init)).unwrap();
    let (e_mh, e_dram) = (ess(&mh), ess(&dram));
    assert!(e_dram > e_mh, "ESS DRAM {e_dram} vs MH {e_mh}");
}

#[test]
fn map_is_close_to_the_gaussian_mode() {
    let bx = boxed(&[(-10.0, 10.0), (-10.0, 10.0)]);
    let cfg = ChainConfig {
        n_chains: 4,
        chain_length: 27_778,
        seed: 2,
        ..Default::default()
    };
    let ens = dram_sample(
        &|x: &[f64]| -0.5 * ((x[0] - 1.0).powi(2) + (x[1] + 2.0).powi(2) / 4.0),
        &bx,
        &cfg,
        None,
    )
    .unwrap();
    assert!(ens.len() >= 100_000);
    let map = map_estimate(&ens).unwrap();
    assert!((map[0] - 1.0).abs() < 0.5);
    assert!((map[1] + 2.0).abs() < 0.5 * 2.0);
}

#[test]
fn flat_posterior_has_unit_information_measure() {
    let bx = boxed(&[(0.0, 1.0), (10.0, 30.0)]);
    let cfg = ChainConfig {
        n_chains: 10,
        chain_length: 11_112,
        seed: 4,
        ..Default::default()
    };
    let ens = dram_sample(&|_: &[f64]| 0.0, &bx, &cfg, None).unwrap();
    for v in information_measure(&ens, &bx).unwrap() {
        assert!((v - 1.0).abs() < 0.05, "{v}");
    }
}

#[test]
fn narrow_posterior_information_measure() {
    let bx = boxed(&[(0.0, 1.0)]);
    let cfg = ChainConfig {
        n_chains: 10,
        chain_length: 11_112,
        seed: 5,
        ..Default::default()
    };
    let init: Vec<Vec<f64>> = (0..10).map(|i| vec![0.48 + 0.004 * i as f64]).collect();
    let ens = dram_sample(&|x: &[f64]| -0.5 * ((x[0] - 0.5) / 0.01).powi(2), &bx, &cfg, Some(&init)).unwrap();
    let i = information_measure(&ens, &bx).unwrap()[0];
    let expected = 0.01f64.powi(2) * 12.0;
    assert!((i - expected).abs() < 0.1 * expected, "{i} vs {expected}");
}

#[test]
fn chains_are_reproducible_and_seed_dependent() {
    let bx = boxed(&[(-5.0, 5.0)]);
    let cfg = ChainConfig {
        n_chains: 3,
        chain_length: 2000,
        seed: 77,
        ..Default::default()
    };
    let target = |x: &[f64]| -0.5 * x[0] * x[0];
    let a = dram_sample(&target, &bx, &cfg, None).unwrap();
    let b = dram_sample(&target, &bx, &cfg, None).unwrap();
    assert_eq!(a, b);
    let c = dram_sample(&target, &bx, &ChainConfig { seed: 78, ..cfg }, None).unwrap();
    assert_ne!(a.samples, c.samples);
    assert_eq!(a.len(), 3 * 1800);
    assert!(a.acceptance_rates.iter().all(|r| *r > 0.0 && *r < 1.0));
}
