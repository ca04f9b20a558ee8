//! Square band matrix with an in-place LU factorisation (no pivoting).
//!
//! The incremental system of the mixed problem is symmetric positive definite
//! once the constrained dofs are eliminated, so elimination without pivoting
//! is stable.

#[derive(Debug, Clone)]
pub struct BandMatrix {
    n: usize,
    kd: usize,
    // row-major, each row stores columns i-kd ..= i+kd
    data: Vec<f64>,
}

impl BandMatrix {
    pub fn zeros(n: usize, kd: usize) -> Self {
        Self {
            n,
            kd,
            data: vec![0.0; n * (2 * kd + 1)],
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn half_bandwidth(&self) -> usize {
        self.kd
    }

    pub fn clear(&mut self) {
        self.data.fill(0.0);
    }

    #[inline]
    fn slot(&self, i: usize, j: usize) -> usize {
        debug_assert!(i.abs_diff(j) <= self.kd, "({i},{j}) outside band");
        i * (2 * self.kd + 1) + (j + self.kd - i)
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        if i.abs_diff(j) > self.kd {
            0.0
        } else {
            self.data[self.slot(i, j)]
        }
    }

    #[inline]
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        let s = self.slot(i, j);
        self.data[s] += v;
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        let s = self.slot(i, j);
        self.data[s] = v;
    }

    /// Zeroes row and column `k` and puts 1 on the diagonal.
    pub fn set_identity_row_col(&mut self, k: usize) {
        let lo = k.saturating_sub(self.kd);
        let hi = (k + self.kd).min(self.n - 1);
        for j in lo..=hi {
            self.set(k, j, 0.0);
            self.set(j, k, 0.0);
        }
        self.set(k, k, 1.0);
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        (0..self.n)
            .map(|i| (0..self.n).map(|j| self.get(i, j)).collect())
            .collect()
    }

    /// Solves `A x = b` in place, destroying the matrix. Returns `false` if a
    /// zero or non-finite pivot is met.
    pub fn solve_in_place(&mut self, b: &mut [f64]) -> bool {
        let n = self.n;
        let kd = self.kd;
        let w = 2 * kd + 1;
        assert_eq!(b.len(), n);
        // in row i, column j sits at offset i * w + j + kd - i
        for k in 0..n {
            let pivot = self.data[k * w + kd];
            if pivot == 0.0 || !pivot.is_finite() {
                return false;
            }
            let hi = (k + kd).min(n - 1);
            let (head, tail) = self.data.split_at_mut((k + 1) * w);
            let row_k = &head[k * w + kd + 1..k * w + kd + 1 + (hi - k)];
            for i in (k + 1)..=hi {
                let row_i = &mut tail[(i - k - 1) * w..(i - k) * w];
                let lik = row_i[k + kd - i];
                if lik == 0.0 {
                    continue;
                }
                let factor = lik / pivot;
                row_i[k + kd - i] = 0.0;
                // columns k+1 ..= hi of row i start at offset k + 1 + kd - i
                let start = k + 1 + kd - i;
                for (dst, &akj) in row_i[start..start + row_k.len()].iter_mut().zip(row_k) {
                    *dst -= factor * akj;
                }
                b[i] -= factor * b[k];
            }
        }
        for k in (0..n).rev() {
            let hi = (k + kd).min(n - 1);
            let row = &self.data[k * w + kd..k * w + kd + 1 + (hi - k)];
            let mut s = b[k];
            for (j, a) in row.iter().enumerate().skip(1) {
                s -= a * b[k + j];
            }
            b[k] = s / row[0];
        }
        b.iter().all(|v| v.is_finite())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{DMatrix, DVector};

    #[test]
    fn matches_dense_solve() {
        let n = 17;
        let kd = 3;
        let mut band = BandMatrix::zeros(n, kd);
        let mut dense = DMatrix::<f64>::zeros(n, n);
        for i in 0..n {
            for j in i.saturating_sub(kd)..=(i + kd).min(n - 1) {
                let v = if i == j {
                    10.0 + i as f64
                } else {
                    ((i * 7 + j * 3) % 5) as f64 * 0.3 - 0.6
                };
                band.set(i, j, v);
                dense[(i, j)] = v;
            }
        }
        let rhs: Vec<f64> = (0..n).map(|i| (i as f64).sin()).collect();
        let expected = dense.lu().solve(&DVector::from_vec(rhs.clone())).unwrap();
        let mut x = rhs;
        assert!(band.solve_in_place(&mut x));
        for i in 0..n {
            assert!((x[i] - expected[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_pivot_is_reported() {
        let mut band = BandMatrix::zeros(3, 1);
        let mut b = vec![1.0; 3];
        assert!(!band.solve_in_place(&mut b));
    }
}
