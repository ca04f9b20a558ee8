//! Predictive propagation and synthetic data properties.

use rand::Rng;
use sgpuq::data::{generate_synthetic, NoiseModel};
use sgpuq::inference::{posterior_predict, ChainConfig, PosteriorEnsemble};
use sgpuq::model::SgpModel;
use sgpuq::rng::stream_rng;
use sgpuq::sampling::ParamBox;
use sgpuq::SgpParams;

const CENTRE: [f64; 6] = [150.0, 200.0, 0.047, 0.062, 298.42, 128.44];

/// Ensemble of `n` points spread uniformly by `± spread` (relative) about
/// the centre. The same random offsets are used for every spread.
fn ensemble(n: usize, spread: f64) -> PosteriorEnsemble {
    let mut rng = stream_rng(9, 0);
    let samples: Vec<Vec<f64>> = (0..n)
        .map(|_| {
            CENTRE
                .iter()
                .map(|c| c * (1.0 + spread * rng.random_range(-1.0..1.0)))
                .collect()
        })
        .collect();
    PosteriorEnsemble::from_samples(
        samples,
        vec![0.0; n],
        vec![0; n],
        ParamBox::sgp_default(),
        ChainConfig::default(),
    )
    .unwrap()
}

#[test]
fn band_variance_scales_with_the_square_of_the_posterior_spread() {
    let model = SgpModel::default();
    let wide = posterior_predict(&ensemble(16, 0.04), &model, 500.0, 16, 1).unwrap();
    let narrow = posterior_predict(&ensemble(16, 0.01), &model, 500.0, 16, 1).unwrap();
    assert_eq!(wide.dropped + narrow.dropped, 0);
    let ratio = narrow.mean_variance() / wide.mean_variance();
    // linear propagation gives (1/4)² = 0.0625
    assert!((0.045..0.08).contains(&ratio), "variance ratio {ratio}");
}

#[test]
fn collapsed_ensemble_gives_a_zero_width_band() {
    let model = SgpModel::default();
    let band = posterior_predict(&ensemble(8, 0.0), &model, 300.0, 5, 2).unwrap();
    assert_eq!(band.mean_variance(), 0.0);
    for i in 0..band.strain.len() {
        assert_eq!(band.q025[i], band.q975[i]);
        assert_eq!(band.q50[i], band.q025[i]);
        assert!((band.mean[i] - band.q50[i]).abs() <= 1e-14 * band.q50[i].abs());
    }
    assert!(band.qoi.windows(2).all(|w| w[0] == w[1]));
}

#[test]
fn predictions_are_reproducible_for_a_seed() {
    let model = SgpModel::default();
    let ens = ensemble(30, 0.03);
    let a = posterior_predict(&ens, &model, 200.0, 6, 3).unwrap();
    let b = posterior_predict(&ens, &model, 200.0, 6, 3).unwrap();
    assert_eq!(a, b);
}

#[test]
fn realised_replicate_noise_matches_the_requested_level() {
    let truth = SgpParams {
        l_dis: 150.0,
        ..SgpParams::reference()
    };
    let noise = NoiseModel::default();
    let data = generate_synthetic(&SgpModel::default(), &truth, &[200.0, 1000.0], 50, &noise, 4).unwrap();
    for s in data.noise_summary() {
        assert_eq!(s.replicates, 50);
        assert!(
            (s.relative_std - noise.relative_std).abs() < 0.03,
            "L = {}: relative std {}",
            s.size,
            s.relative_std
        );
    }
}
