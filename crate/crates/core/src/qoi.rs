//! Strain-energy quantity of interest and the CDF discrepancy metric.

use serde::{Deserialize, Serialize};

use crate::curve::StressStrainCurve;
use crate::error::{Error, Result};

/// Strain at which the energy integral stops by default.
pub const DEFAULT_QOI_STRAIN: f64 = 0.008;

/// Strain energy density of one curve (GPa).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QoiValue {
    pub value: f64,
    /// Identifier of the curve the value came from.
    pub source: String,
}

impl QoiValue {
    pub fn new(value: f64, source: impl Into<String>) -> Self {
        Self {
            value,
            source: source.into(),
        }
    }
}

/// Trapezoidal ∫|T| dε over |ε| ∈ [0, up_to] on the curve's own grid. The
/// last segment is cut at `up_to` by linear interpolation.
pub fn strain_energy(curve: &StressStrainCurve, up_to: f64) -> Result<f64> {
    let reached = curve.strain.iter().fold(0.0f64, |m, e| m.max(e.abs()));
    // allow a relative rounding slack on the final grid point
    if curve.len() < 2 || reached < up_to * (1.0 - 1e-9) {
        return Err(Error::CurveTooShort {
            reached,
            required: up_to,
        });
    }
    let mut q = 0.0;
    for i in 1..curve.len() {
        let (e0, e1) = (curve.strain[i - 1].abs(), curve.strain[i].abs());
        let (s0, s1) = (curve.stress[i - 1].abs(), curve.stress[i].abs());
        if e0 >= up_to {
            break;
        }
        if e1 > up_to {
            let t = (up_to - e0) / (e1 - e0);
            let s_cut = s0 + t * (s1 - s0);
            q += 0.5 * (s0 + s_cut) * (up_to - e0);
            break;
        }
        q += 0.5 * (s0 + s1) * (e1 - e0);
    }
    Ok(q)
}

/// [`strain_energy`] wrapped with a source tag.
pub fn strain_energy_qoi(
    curve: &StressStrainCurve,
    up_to: f64,
    source: impl Into<String>,
) -> Result<QoiValue> {
    Ok(QoiValue::new(strain_energy(curve, up_to)?, source))
}

/// Right-continuous empirical distribution function.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalCdf {
    sorted: Vec<f64>,
}

impl EmpiricalCdf {
    pub fn new(samples: &[f64]) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::EmptySamples);
        }
        if samples.iter().any(|v| !v.is_finite()) {
            return Err(Error::Validation("CDF samples must be finite".into()));
        }
        let mut sorted = samples.to_vec();
        sorted.sort_by(f64::total_cmp);
        Ok(Self { sorted })
    }

    pub fn samples(&self) -> &[f64] {
        &self.sorted
    }

    pub fn len(&self) -> usize {
        self.sorted.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sorted.is_empty()
    }

    /// F(x) = #{samples ≤ x} / n.
    pub fn eval(&self, x: f64) -> f64 {
        self.sorted.partition_point(|&v| v <= x) as f64 / self.sorted.len() as f64
    }

    pub fn mean(&self) -> f64 {
        self.sorted.iter().sum::<f64>() / self.sorted.len() as f64
    }
}

/// ∫|F_a − F_b| dx, integrated exactly over the merged step locations.
pub fn cdf_l1_distance(a: &EmpiricalCdf, b: &EmpiricalCdf) -> f64 {
    let (xa, xb) = (a.samples(), b.samples());
    let (na, nb) = (xa.len() as f64, xb.len() as f64);
    let (mut i, mut j) = (0usize, 0usize);
    let mut total = 0.0;
    let mut prev: Option<f64> = None;
    while i < xa.len() || j < xb.len() {
        let x = match (xa.get(i), xb.get(j)) {
            (Some(&u), Some(&v)) => u.min(v),
            (Some(&u), None) => u,
            (None, Some(&v)) => v,
            (None, None) => unreachable!(),
        };
        if let Some(p) = prev {
            // both CDFs are constant on [p, x)
            let diff = (i as f64 / na - j as f64 / nb).abs();
            total += diff * (x - p);
        }
        while i < xa.len() && xa[i] <= x {
            i += 1;
        }
        while j < xb.len() && xb[j] <= x {
            j += 1;
        }
        prev = Some(x);
    }
    total
}

/// Discrepancy between the data and model QoI distributions: the L1 distance
/// of the empirical CDFs divided by the data mean.
pub fn cdf_error(data: &[f64], model: &[f64]) -> Result<f64> {
    if data.is_empty() || model.is_empty() {
        return Err(Error::EmptySamples);
    }
    let fd = EmpiricalCdf::new(data)?;
    let fm = EmpiricalCdf::new(model)?;
    let mean = fd.mean();
    if mean == 0.0 {
        return Err(Error::ZeroMean);
    }
    Ok(cdf_l1_distance(&fd, &fm) / mean.abs())
}

/// [`cdf_error`] over tagged QoI values.
pub fn cdf_error_qoi(data: &[QoiValue], model: &[QoiValue]) -> Result<f64> {
    let d: Vec<f64> = data.iter().map(|q| q.value).collect();
    let m: Vec<f64> = model.iter().map(|q| q.value).collect();
    cdf_error(&d, &m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn grid(n: usize, max: f64) -> Vec<f64> {
        (0..=n).map(|i| max * i as f64 / n as f64).collect()
    }

    #[test]
    fn linear_elastic_triangle() {
        let strain = grid(160, 0.008);
        let stress = strain.iter().map(|e| 128.44 * e).collect();
        let c = StressStrainCurve::new(strain, stress).unwrap();
        let q = strain_energy(&c, 0.008).unwrap();
        assert!((q - 0.5 * 128.44 * 0.008 * 0.008).abs() < 1e-12);
        assert!((q - 4.110_08e-3).abs() < 1e-12);
    }

    #[test]
    fn zero_stress_gives_zero() {
        let strain = grid(10, 0.008);
        let c = StressStrainCurve::new(strain, vec![0.0; 11]).unwrap();
        assert_eq!(strain_energy(&c, 0.008).unwrap(), 0.0);
    }

    #[test]
    fn elastic_perfectly_plastic() {
        // yield at 0.001 lies on the grid, so the trapezoid rule is exact
        let strain = grid(160, 0.008);
        let stress = strain.iter().map(|&e| (100.0 * e).min(0.1)).collect();
        let c = StressStrainCurve::new(strain, stress).unwrap();
        let q = strain_energy(&c, 0.008).unwrap();
        assert!((q - 7.5e-4).abs() < 1e-12, "{q}");
    }

    #[test]
    fn short_curve_is_rejected() {
        let strain = grid(10, 0.005);
        let c = StressStrainCurve::new(strain, vec![1.0; 11]).unwrap();
        assert!(matches!(
            strain_energy(&c, 0.008),
            Err(Error::CurveTooShort { .. })
        ));
    }

    #[test]
    fn cut_inside_last_segment() {
        let strain = vec![0.0, 0.01];
        let c = StressStrainCurve::new(strain, vec![0.0, 1.0]).unwrap();
        // ∫_0^0.008 100 e de = 50 · 0.008²
        assert!((strain_energy(&c, 0.008).unwrap() - 50.0 * 0.008 * 0.008).abs() < 1e-15);
    }

    #[test]
    fn cdf_error_examples() {
        assert_eq!(cdf_error(&[1.0, 2.0, 3.0], &[3.0, 1.0, 2.0]).unwrap(), 0.0);
        assert_eq!(cdf_error(&[1.0; 4], &[2.0; 4]).unwrap(), 1.0);
        assert_eq!(cdf_error(&[0.0, 2.0], &[1.0, 3.0]).unwrap(), 1.0);
        assert!(matches!(cdf_error(&[], &[1.0]), Err(Error::EmptySamples)));
        assert!(matches!(cdf_error(&[1.0], &[]), Err(Error::EmptySamples)));
        assert!(matches!(cdf_error(&[-1.0, 1.0], &[1.0]), Err(Error::ZeroMean)));
    }

    #[test]
    fn ecdf_is_right_continuous() {
        let f = EmpiricalCdf::new(&[1.0, 2.0, 2.0, 4.0]).unwrap();
        assert_eq!(f.eval(0.999), 0.0);
        assert_eq!(f.eval(1.0), 0.25);
        assert_eq!(f.eval(2.0), 0.75);
        assert_eq!(f.eval(3.9), 0.75);
        assert_eq!(f.eval(4.0), 1.0);
        assert_eq!(f.eval(f64::INFINITY), 1.0);
        assert_eq!(f.eval(f64::NEG_INFINITY), 0.0);
    }

    /// Wasserstein-1 through the quantile functions: for equal sizes it is
    /// the mean absolute difference of the sorted samples.
    fn w1_sorted(a: &[f64], b: &[f64]) -> f64 {
        let mut a = a.to_vec();
        let mut b = b.to_vec();
        a.sort_by(f64::total_cmp);
        b.sort_by(f64::total_cmp);
        a.iter().zip(&b).map(|(x, y)| (x - y).abs()).sum::<f64>() / a.len() as f64
    }

    fn samples() -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec(0.1f64..10.0, 1..30)
    }

    proptest! {
        #[test]
        fn self_distance_is_zero(a in samples()) {
            prop_assert_eq!(cdf_error(&a, &a).unwrap(), 0.0);
        }

        #[test]
        fn normalised_symmetry(a in samples(), b in samples()) {
            let ma = a.iter().sum::<f64>() / a.len() as f64;
            let mb = b.iter().sum::<f64>() / b.len() as f64;
            let ab = cdf_error(&a, &b).unwrap() * ma;
            let ba = cdf_error(&b, &a).unwrap() * mb;
            prop_assert!((ab - ba).abs() <= 1e-12 * ab.abs().max(1.0));
        }

        #[test]
        fn translation_bound(a in samples(), c in -5.0f64..5.0) {
            let shifted: Vec<f64> = a.iter().map(|v| v + c).collect();
            let fa = EmpiricalCdf::new(&a).unwrap();
            let fs = EmpiricalCdf::new(&shifted).unwrap();
            let d = cdf_l1_distance(&fa, &fs);
            prop_assert!(d <= c.abs() * (1.0 + 1e-12) + 1e-12);
        }

        #[test]
        fn disjoint_translation_is_exact(a in samples()) {
            let c = 20.0;
            let shifted: Vec<f64> = a.iter().map(|v| v + c).collect();
            let d = cdf_l1_distance(&EmpiricalCdf::new(&a).unwrap(), &EmpiricalCdf::new(&shifted).unwrap());
            prop_assert!((d - c).abs() < 1e-9);
        }

        #[test]
        fn matches_quantile_form(a in prop::collection::vec(0.1f64..10.0, 1..20), seed in 0u64..1000) {
            // equal-size second sample derived from the first
            let b: Vec<f64> = a.iter().enumerate()
                .map(|(i, v)| v * (1.0 + ((i as u64 * 31 + seed) % 7) as f64 * 0.1))
                .collect();
            let d = cdf_l1_distance(&EmpiricalCdf::new(&a).unwrap(), &EmpiricalCdf::new(&b).unwrap());
            prop_assert!((d - w1_sorted(&a, &b)).abs() < 1e-9);
        }

        #[test]
        fn energy_monotone_under_domination(
            base in prop::collection::vec(0.0f64..1.0, 11),
            bump in prop::collection::vec(0.0f64..1.0, 11),
        ) {
            let strain = grid(10, 0.008);
            let upper: Vec<f64> = base.iter().zip(&bump).map(|(a, b)| a + b).collect();
            let c1 = StressStrainCurve::new(strain.clone(), upper).unwrap();
            let c2 = StressStrainCurve::new(strain, base).unwrap();
            prop_assert!(strain_energy(&c1, 0.008).unwrap() >= strain_energy(&c2, 0.008).unwrap());
        }
    }
}
