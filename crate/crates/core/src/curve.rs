//! Stress–strain curves and their CSV form (`strain,stress_gpa`).

use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};

pub const CSV_HEADER: [&str; 2] = ["strain", "stress_gpa"];

/// Ordered (strain, stress) samples of one loading history.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct StressStrainCurve {
    pub strain: Vec<f64>,
    pub stress: Vec<f64>,
}

impl StressStrainCurve {
    pub fn new(strain: Vec<f64>, stress: Vec<f64>) -> Result<Self> {
        if strain.len() != stress.len() {
            return Err(Error::LengthMismatch(format!(
                "{} strains vs {} stresses",
                strain.len(),
                stress.len()
            )));
        }
        Ok(Self { strain, stress })
    }

    pub fn len(&self) -> usize {
        self.strain.len()
    }

    pub fn is_empty(&self) -> bool {
        self.strain.is_empty()
    }

    pub fn max_strain(&self) -> f64 {
        self.strain.last().copied().unwrap_or(0.0)
    }

    pub fn is_strain_monotone(&self) -> bool {
        self.strain.windows(2).all(|w| w[1] > w[0])
    }

    pub fn points(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.strain.iter().copied().zip(self.stress.iter().copied())
    }

    /// Piecewise-linear interpolation of stress at `strain`, clamped to the
    /// end values outside the sampled range.
    pub fn interpolate(&self, strain: f64) -> f64 {
        let xs = &self.strain;
        let ys = &self.stress;
        if xs.is_empty() {
            return f64::NAN;
        }
        if strain <= xs[0] {
            return ys[0];
        }
        if strain >= xs[xs.len() - 1] {
            return ys[ys.len() - 1];
        }
        let k = xs.partition_point(|&x| x <= strain);
        let (x0, x1) = (xs[k - 1], xs[k]);
        let t = (strain - x0) / (x1 - x0);
        ys[k - 1] + t * (ys[k] - ys[k - 1])
    }

    /// Stress interpolated onto another strain grid.
    pub fn resample(&self, grid: &[f64]) -> Vec<f64> {
        grid.iter().map(|&e| self.interpolate(e)).collect()
    }

    /// Stress at the intersection with the line E (ε − offset), found on the
    /// piecewise-linear curve. `None` when the curve never crosses it.
    pub fn offset_yield_stress(&self, modulus: f64, offset: f64) -> Option<f64> {
        let gap = |i: usize| self.stress[i] - modulus * (self.strain[i] - offset);
        for i in 1..self.len() {
            let (g0, g1) = (gap(i - 1), gap(i));
            if g0 > 0.0 && g1 <= 0.0 {
                let t = g0 / (g0 - g1);
                return Some(self.stress[i - 1] + t * (self.stress[i] - self.stress[i - 1]));
            }
        }
        None
    }

    /// Least-squares slope of stress against strain over `[lo, hi]`.
    pub fn tangent_slope(&self, lo: f64, hi: f64) -> Option<f64> {
        let pts: Vec<(f64, f64)> = self
            .points()
            .filter(|(e, _)| *e >= lo - 1e-12 && *e <= hi + 1e-12)
            .collect();
        if pts.len() < 2 {
            return None;
        }
        let n = pts.len() as f64;
        let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
        let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
        let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
        let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
        Some(sxy / sxx)
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(CSV_HEADER)?;
        for (e, s) in self.points() {
            w.write_record([format!("{e:.11e}"), format!("{s:.11e}")])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn save_csv(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path)?;
        self.write_csv(std::io::BufWriter::new(file))
    }

    /// Parses a curve, reporting the offending line on failure. Strains are
    /// stored as magnitudes.
    pub fn read_csv<R: Read>(reader: R, origin: &Path) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let parse_err = |line: usize, reason: String| Error::Parse {
            file: origin.to_path_buf(),
            line,
            reason,
        };
        let headers = rdr.headers().map_err(|e| parse_err(1, e.to_string()))?.clone();
        if headers.len() != 2 || &headers[0] != CSV_HEADER[0] || &headers[1] != CSV_HEADER[1] {
            return Err(parse_err(
                1,
                format!("expected header `strain,stress_gpa`, got `{}`", headers.iter().collect::<Vec<_>>().join(",")),
            ));
        }
        let mut strain = Vec::new();
        let mut stress = Vec::new();
        for (k, rec) in rdr.records().enumerate() {
            let line = k + 2;
            let rec = rec.map_err(|e| parse_err(line, e.to_string()))?;
            if rec.len() != 2 {
                return Err(parse_err(line, format!("expected 2 fields, got {}", rec.len())));
            }
            let num = |s: &str| -> Result<f64> {
                s.parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| parse_err(line, format!("not a finite number: `{s}`")))
            };
            strain.push(num(&rec[0])?.abs());
            stress.push(num(&rec[1])?);
        }
        Ok(Self { strain, stress })
    }

    pub fn load_csv(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path)?;
        Self::read_csv(std::io::BufReader::new(file), path)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn interpolation_and_clamping() {
        let c = StressStrainCurve::new(vec![0.0, 1.0, 2.0], vec![0.0, 10.0, 14.0]).unwrap();
        assert_eq!(c.interpolate(0.5), 5.0);
        assert_eq!(c.interpolate(1.5), 12.0);
        assert_eq!(c.interpolate(3.0), 14.0);
        assert_eq!(c.interpolate(-1.0), 0.0);
        assert_eq!(c.interpolate(1.0), 10.0);
    }

    #[test]
    fn offset_yield_on_bilinear_curve() {
        // E = 100, yield at 0.1, hardening slope 10
        let strain: Vec<f64> = (0..=80).map(|i| i as f64 * 1e-4).collect();
        let stress = strain
            .iter()
            .map(|&e| if e <= 1e-3 { 100.0 * e } else { 0.1 + 10.0 * (e - 1e-3) })
            .collect();
        let c = StressStrainCurve::new(strain, stress).unwrap();
        // 0.1 + 10 (e - 0.001) = 100 (e - 0.002) -> e = 0.29 / 90
        let e = 0.29 / 90.0;
        let expected = 100.0 * (e - 0.002);
        let got = c.offset_yield_stress(100.0, 0.002).unwrap();
        assert!((got - expected).abs() < 1e-12, "{got} vs {expected}");
        assert!((c.tangent_slope(0.005, 0.008).unwrap() - 10.0).abs() < 1e-9);
    }

    #[test]
    fn csv_rejects_bad_rows() {
        let bad = "strain,stress_gpa\n0.0,0.0\n0.1,abc\n";
        let err = StressStrainCurve::read_csv(bad.as_bytes(), Path::new("x.csv")).unwrap_err();
        match err {
            Error::Parse { line, .. } => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
        let bad = "eps,sig\n0.0,0.0\n";
        assert!(StressStrainCurve::read_csv(bad.as_bytes(), Path::new("x.csv")).is_err());
    }

    #[test]
    fn csv_keeps_twelve_significant_digits() {
        let c = StressStrainCurve::new(
            vec![0.0, 1.234_567_890_123_4e-3],
            vec![0.0, 0.987_654_321_098_7],
        )
        .unwrap();
        let mut buf = Vec::new();
        c.write_csv(&mut buf).unwrap();
        let back = StressStrainCurve::read_csv(buf.as_slice(), Path::new("mem")).unwrap();
        for (a, b) in c.points().zip(back.points()) {
            // rounding to 12 significant digits: relative error at most 5e-12
            assert!((a.0 - b.0).abs() <= 5e-12 * a.0.abs());
            assert!((a.1 - b.1).abs() <= 5e-12 * a.1.abs());
        }
    }
}
